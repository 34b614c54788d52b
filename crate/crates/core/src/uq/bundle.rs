//! Ensemble bundle directory: `manifest.txt` plus `member-<i>.txt` per member.

use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{network_doc, network_from_doc, DropoutMask};
use crate::textdoc::TextDoc;
use crate::uq::{CostLedger, EnsembleKind, EnsembleMember, EnsembleModel, ThinnedMember};

const MANIFEST_KIND: &str = "dropsembles-ensemble";
const MEMBER_KIND: &str = "dropsembles-member";
const VERSION: u32 = 1;

/// Settings recorded alongside the members.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleInfo {
    pub master_seed: u64,
    pub lambda: f64,
    pub dropout_p: f64,
    pub ledger: CostLedger,
}

fn mask_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

fn parse_bits(s: &str) -> Result<Vec<bool>> {
    s.chars()
        .map(|c| match c {
            '1' => Ok(true),
            '0' => Ok(false),
            _ => Err(Error::Argument(format!("bad mask character `{c}`"))),
        })
        .collect()
}

pub fn write_bundle(dir: &Path, model: &EnsembleModel, info: &BundleInfo) -> Result<()> {
    let mut manifest = TextDoc::new(MANIFEST_KIND, VERSION);
    manifest
        .field("kind", model.kind().name())
        .field("members", model.members().len())
        .field("master_seed", info.master_seed)
        .field("lambda", format!("{:?}", info.lambda))
        .field("dropout_p", format!("{:?}", info.dropout_p))
        .field("mc_samples", model.mc_samples())
        .field("mc_seed", model.mc_seed())
        .field("task_a_runs", info.ledger.task_a_runs)
        .field("task_a_epochs", info.ledger.task_a_epochs)
        .field("task_b_runs", info.ledger.task_b_runs)
        .field("task_b_epochs", info.ledger.task_b_epochs);
    for (i, member) in model.members().iter().enumerate() {
        let mut doc = network_doc(member.network(), MEMBER_KIND, VERSION);
        if let EnsembleMember::Thinned(t) = member {
            doc.field("member_seed", t.member_seed())
                .field("ewc_lambda", format!("{:?}", t.ewc_lambda()))
                .field("mask_seed", t.mask().generator_seed());
            for (l, bits) in t.mask().layers().iter().enumerate() {
                doc.field(&format!("mask.{l}"), mask_bits(bits));
            }
        }
        doc.write_to(&dir.join(format!("member-{i}.txt")))?;
    }
    manifest.write_to(&dir.join("manifest.txt"))
}

pub fn read_bundle(dir: &Path) -> Result<(EnsembleModel, BundleInfo)> {
    let manifest = TextDoc::read_from(&dir.join("manifest.txt"))?;
    manifest.expect_kind(MANIFEST_KIND, VERSION)?;
    let kind: EnsembleKind = manifest.require("kind")?.parse()?;
    let count: usize = manifest.parse_field("members")?;
    let mut members = Vec::with_capacity(count);
    for i in 0..count {
        let doc = TextDoc::read_from(&dir.join(format!("member-{i}.txt")))?;
        doc.expect_kind(MEMBER_KIND, VERSION)?;
        let net = network_from_doc(&doc)?;
        if doc.get("member_seed").is_some() {
            let layers = (0..net.layers().len())
                .map(|l| parse_bits(doc.require(&format!("mask.{l}"))?))
                .collect::<Result<Vec<_>>>()?;
            let mask = DropoutMask::from_layers(layers, doc.parse_field("mask_seed")?);
            members.push(EnsembleMember::Thinned(ThinnedMember::from_parts(
                net,
                mask,
                doc.parse_field("member_seed")?,
                doc.parse_field("ewc_lambda")?,
            )?));
        } else {
            members.push(EnsembleMember::Network(net));
        }
    }
    let model = match kind {
        EnsembleKind::McDropoutVirtual => {
            let net = members
                .pop()
                .map(|m| m.network().clone())
                .ok_or_else(|| Error::Contract("MC dropout bundle has no network".into()))?;
            EnsembleModel::mc_dropout(
                net,
                manifest.parse_field("mc_samples")?,
                manifest.parse_field("mc_seed")?,
            )?
        }
        _ => EnsembleModel::new(kind, members)?,
    };
    let info = BundleInfo {
        master_seed: manifest.parse_field("master_seed")?,
        lambda: manifest.parse_field("lambda")?,
        dropout_p: manifest.parse_field("dropout_p")?,
        ledger: CostLedger {
            task_a_runs: manifest.parse_field("task_a_runs")?,
            task_a_epochs: manifest.parse_field("task_a_epochs")?,
            task_b_runs: manifest.parse_field("task_b_runs")?,
            task_b_epochs: manifest.parse_field("task_b_epochs")?,
        },
    };
    Ok((model, info))
}
