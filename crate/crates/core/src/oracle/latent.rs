use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LatentSource {
    PooledConv,
    Identity,
    PerShapeTable,
}

/// Shape code appended to every query coordinate of one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentCode {
    values: Vec<f64>,
    source: LatentSource,
}

impl LatentSource {
    pub fn name(self) -> &'static str {
        match self {
            LatentSource::PooledConv => "pooled-conv",
            LatentSource::Identity => "identity",
            LatentSource::PerShapeTable => "per-shape-table",
        }
    }
}

impl std::str::FromStr for LatentSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled-conv" => Ok(LatentSource::PooledConv),
            "identity" => Ok(LatentSource::Identity),
            "per-shape-table" => Ok(LatentSource::PerShapeTable),
            _ => Err(Error::Argument(format!("unknown latent source `{s}`"))),
        }
    }
}

impl LatentCode {
    pub fn new(values: Vec<f64>, source: LatentSource) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("latent code has non-finite entries".into()));
        }
        Ok(LatentCode { values, source })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn source(&self) -> LatentSource {
        self.source
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn distance(&self, other: &LatentCode) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}
