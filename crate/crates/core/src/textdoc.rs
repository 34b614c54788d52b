//! Versioned line-oriented text documents with a trailing SHA-256 checksum.
//!
//! ```text
//! dropsembles-checkpoint v1
//! rng_seed = 7
//! @array params 3
//! 0.25
//! -1.5
//! 3.0
//! @end
//! checksum = 9f2c...
//! ```
//!
//! Fields are `key = value` lines; arrays hold one decimal `f64` per line in the
//! shortest representation that parses back to the same bits. The checksum
//! covers every byte before the checksum line. Writing a parsed document
//! reproduces the original bytes.

use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Entry {
    Field(String, String),
    Array(String, Vec<f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextDoc {
    kind: String,
    version: u32,
    entries: Vec<Entry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut s = String::with_capacity(64);
    for b in digest.iter() {
        let _ = write!(s, "{b:02x}");
    }
    s
}

impl TextDoc {
    pub fn new(kind: &str, version: u32) -> Self {
        TextDoc {
            kind: kind.to_string(),
            version,
            entries: Vec::new(),
        }
    }

    pub fn kind(&self) -> &str {
        &self.kind
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn field(&mut self, key: &str, value: impl ToString) -> &mut Self {
        let value = value.to_string();
        debug_assert!(!value.contains('\n') && !key.contains('='));
        self.entries.push(Entry::Field(key.to_string(), value));
        self
    }

    pub fn array(&mut self, name: &str, values: &[f64]) -> &mut Self {
        self.entries
            .push(Entry::Array(name.to_string(), values.to_vec()));
        self
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find_map(|e| match e {
            Entry::Field(k, v) if k == key => Some(v.as_str()),
            _ => None,
        })
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Argument(format!("{} document lacks field `{key}`", self.kind)))
    }

    pub fn parse_field<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse()
            .map_err(|_| Error::Argument(format!("field `{key}` has invalid value `{raw}`")))
    }

    /// Fields whose key starts with `prefix`, in document order.
    pub fn fields_with_prefix<'a>(
        &'a self,
        prefix: &'a str,
    ) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries.iter().filter_map(move |e| match e {
            Entry::Field(k, v) if k.starts_with(prefix) => Some((k.as_str(), v.as_str())),
            _ => None,
        })
    }

    pub fn get_array(&self, name: &str) -> Option<&[f64]> {
        self.entries.iter().find_map(|e| match e {
            Entry::Array(k, v) if k == name => Some(v.as_slice()),
            _ => None,
        })
    }

    pub fn require_array(&self, name: &str) -> Result<&[f64]> {
        self.get_array(name)
            .ok_or_else(|| Error::Argument(format!("{} document lacks array `{name}`", self.kind)))
    }

    pub fn render(&self) -> String {
        let mut body = String::new();
        let _ = writeln!(body, "{} v{}", self.kind, self.version);
        for e in &self.entries {
            match e {
                Entry::Field(k, v) => {
                    let _ = writeln!(body, "{k} = {v}");
                }
                Entry::Array(name, values) => {
                    let _ = writeln!(body, "@array {name} {}", values.len());
                    for v in values {
                        let _ = writeln!(body, "{v:?}");
                    }
                    body.push_str("@end\n");
                }
            }
        }
        let sum = sha256_hex(body.as_bytes());
        let _ = writeln!(body, "checksum = {sum}");
        body
    }

    pub fn parse(text: &str) -> Result<Self> {
        let fmt_err = |offset: usize, message: String| Error::Format {
            offset: offset as u64,
            message,
        };
        let Some(cs_at) = text.rfind("checksum = ") else {
            return Err(fmt_err(text.len(), "missing checksum line".into()));
        };
        let body = &text[..cs_at];
        let stated = text[cs_at + "checksum = ".len()..].trim_end();
        let actual = sha256_hex(body.as_bytes());
        if stated != actual {
            return Err(fmt_err(cs_at, "checksum mismatch".into()));
        }

        let mut offset = 0usize;
        let mut lines = body.split_inclusive('\n').map(|l| {
            let start = offset;
            offset += l.len();
            (start, l.trim_end_matches('\n'))
        });
        let (start, header) = lines
            .next()
            .ok_or_else(|| fmt_err(0, "empty document".into()))?;
        let (kind, version) = header
            .rsplit_once(" v")
            .and_then(|(k, v)| v.parse::<u32>().ok().map(|v| (k.to_string(), v)))
            .ok_or_else(|| fmt_err(start, format!("bad header `{header}`")))?;

        let mut entries = Vec::new();
        while let Some((start, line)) = lines.next() {
            if let Some(rest) = line.strip_prefix("@array ") {
                let (name, len) = rest
                    .rsplit_once(' ')
                    .and_then(|(n, l)| l.parse::<usize>().ok().map(|l| (n.to_string(), l)))
                    .ok_or_else(|| fmt_err(start, format!("bad array header `{line}`")))?;
                let mut values = Vec::with_capacity(len);
                for _ in 0..len {
                    let (at, raw) = lines
                        .next()
                        .ok_or_else(|| fmt_err(body.len(), format!("array `{name}` truncated")))?;
                    let v: f64 = raw
                        .parse()
                        .map_err(|_| fmt_err(at, format!("bad number `{raw}`")))?;
                    values.push(v);
                }
                match lines.next() {
                    Some((_, "@end")) => {}
                    Some((at, other)) => {
                        return Err(fmt_err(at, format!("expected @end, found `{other}`")))
                    }
                    None => return Err(fmt_err(body.len(), "missing @end".into())),
                }
                entries.push(Entry::Array(name, values));
            } else {
                let (k, v) = line.split_once(" = ").ok_or_else(|| {
                    fmt_err(start, format!("expected `key = value`, found `{line}`"))
                })?;
                entries.push(Entry::Field(k.to_string(), v.to_string()));
            }
        }
        Ok(TextDoc {
            kind,
            version,
            entries,
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        // Write then rename so an interrupted run never leaves a torn file.
        let tmp = path.with_extension("partial");
        std::fs::write(&tmp, self.render()).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn expect_kind(&self, kind: &str, max_version: u32) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Format {
                offset: 0,
                message: format!("expected a `{kind}` document, found `{}`", self.kind),
            });
        }
        if self.version == 0 || self.version > max_version {
            return Err(Error::Format {
                offset: 0,
                message: format!("unsupported {kind} version {}", self.version),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn tampering_is_detected() {
        let mut doc = TextDoc::new("demo", 1);
        doc.field("a", 1).array("xs", &[0.1, -2.5]);
        let text = doc.render();
        assert_eq!(TextDoc::parse(&text).unwrap(), doc);
        let tampered = text.replace("0.1", "0.2");
        assert!(matches!(
            TextDoc::parse(&tampered),
            Err(Error::Format { .. })
        ));
    }

    proptest! {
        #[test]
        fn render_parse_render_is_byte_identical(
            values in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 0..40),
            seed in any::<u64>(),
        ) {
            let mut doc = TextDoc::new("demo", 3);
            doc.field("seed", seed).array("values", &values);
            let first = doc.render();
            let parsed = TextDoc::parse(&first).unwrap();
            prop_assert_eq!(parsed.render(), first);
            let back = parsed.require_array("values").unwrap();
            prop_assert!(back.iter().zip(&values).all(|(a, b)| a.to_bits() == b.to_bits()));
        }
    }
}
