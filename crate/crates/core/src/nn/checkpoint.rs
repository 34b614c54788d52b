use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{LayerSpec, MlpNetwork};
use crate::textdoc::TextDoc;

pub const CHECKPOINT_KIND: &str = "dropsembles-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

fn layer_line(l: &LayerSpec) -> String {
    let skip = l
        .skip_from
        .map_or_else(|| "none".to_string(), |s| s.to_string());
    format!(
        "in={} out={} act={} dropout={:?} skip={}",
        l.input_dim, l.output_dim, l.activation, l.dropout_p, skip
    )
}

fn parse_layer_line(line: &str) -> Result<LayerSpec> {
    let bad = || Error::Argument(format!("bad layer spec `{line}`"));
    let mut input_dim = None;
    let mut output_dim = None;
    let mut activation = None;
    let mut dropout_p = None;
    let mut skip_from = None;
    for part in line.split_whitespace() {
        let (k, v) = part.split_once('=').ok_or_else(bad)?;
        match k {
            "in" => input_dim = Some(v.parse().map_err(|_| bad())?),
            "out" => output_dim = Some(v.parse().map_err(|_| bad())?),
            "act" => activation = Some(v.parse()?),
            "dropout" => dropout_p = Some(v.parse().map_err(|_| bad())?),
            "skip" => {
                skip_from = Some(if v == "none" {
                    None
                } else {
                    Some(v.parse().map_err(|_| bad())?)
                })
            }
            _ => return Err(bad()),
        }
    }
    Ok(LayerSpec {
        input_dim: input_dim.ok_or_else(bad)?,
        output_dim: output_dim.ok_or_else(bad)?,
        activation: activation.ok_or_else(bad)?,
        dropout_p: dropout_p.ok_or_else(bad)?,
        skip_from: skip_from.ok_or_else(bad)?,
    })
}

/// Serialize the network into a document of the given kind. Callers may append
/// extension fields before rendering.
pub fn network_doc(net: &MlpNetwork, kind: &str, version: u32) -> TextDoc {
    let mut doc = TextDoc::new(kind, version);
    doc.field("rng_seed", net.rng_seed())
        .field("layers", net.layers().len());
    for (i, l) in net.layers().iter().enumerate() {
        doc.field(&format!("layer.{i}"), layer_line(l));
    }
    doc.array("params", net.params());
    doc
}

pub fn network_from_doc(doc: &TextDoc) -> Result<MlpNetwork> {
    let count: usize = doc.parse_field("layers")?;
    let layers = (0..count)
        .map(|i| parse_layer_line(doc.require(&format!("layer.{i}"))?))
        .collect::<Result<Vec<_>>>()?;
    let params = doc.require_array("params")?.to_vec();
    MlpNetwork::from_params(layers, params, doc.parse_field("rng_seed")?)
}

pub fn checkpoint_doc(net: &MlpNetwork) -> TextDoc {
    network_doc(net, CHECKPOINT_KIND, CHECKPOINT_VERSION)
}

pub fn save_checkpoint(net: &MlpNetwork, path: &Path) -> Result<()> {
    checkpoint_doc(net).write_to(path)
}

pub fn load_checkpoint(path: &Path) -> Result<MlpNetwork> {
    let doc = TextDoc::read_from(path)?;
    doc.expect_kind(CHECKPOINT_KIND, CHECKPOINT_VERSION)?;
    network_from_doc(&doc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp_layers, Activation};

    #[test]
    fn save_load_save_is_byte_identical() {
        let mut layers = mlp_layers(3, &[5, 5], 1, Activation::sine(), Activation::Linear, 0.2);
        layers[1] = LayerSpec::new(8, 5, Activation::sine())
            .with_dropout(0.2)
            .with_skip(0);
        let net = MlpNetwork::new(layers, 99).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.ckpt");
        save_checkpoint(&net, &path).unwrap();
        let first = std::fs::read(&path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, net);
        save_checkpoint(&back, &path).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let doc = TextDoc::new("something-else", 1);
        assert!(doc
            .expect_kind(CHECKPOINT_KIND, CHECKPOINT_VERSION)
            .is_err());
    }
}
