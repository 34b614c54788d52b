use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{network_doc, network_from_doc, MlpNetwork, Penalty};
use crate::textdoc::TextDoc;
use crate::uq::FisherDiagonal;

pub const POSTERIOR_KIND: &str = "dropsembles-posterior";
pub const POSTERIOR_VERSION: u32 = 1;

/// Task-A solution and its Fisher diagonal: the mean and precision of the
/// diagonal Laplace approximation used as the fine-tuning prior.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorCheckpoint {
    network: MlpNetwork,
    fisher: FisherDiagonal,
    source_dataset_id: String,
    dropout_p: f64,
    task_a_epochs: usize,
}

impl PosteriorCheckpoint {
    pub fn new(
        network: MlpNetwork,
        fisher: FisherDiagonal,
        source_dataset_id: impl Into<String>,
        task_a_epochs: usize,
    ) -> Result<Self> {
        if fisher.len() != network.param_count() {
            return Err(Error::Shape(format!(
                "Fisher has {} entries, network has {} parameters",
                fisher.len(),
                network.param_count()
            )));
        }
        let dropout_p = network
            .layers()
            .iter()
            .map(|l| l.dropout_p)
            .fold(0.0, f64::max);
        Ok(PosteriorCheckpoint {
            network,
            fisher,
            source_dataset_id: source_dataset_id.into(),
            dropout_p,
            task_a_epochs,
        })
    }

    pub fn network(&self) -> &MlpNetwork {
        &self.network
    }

    pub fn theta_a(&self) -> &[f64] {
        self.network.params()
    }

    pub fn fisher(&self) -> &FisherDiagonal {
        &self.fisher
    }

    pub fn source_dataset_id(&self) -> &str {
        &self.source_dataset_id
    }

    /// Largest dropout probability among the network's layers.
    pub fn dropout_p(&self) -> f64 {
        self.dropout_p
    }

    pub fn task_a_epochs(&self) -> usize {
        self.task_a_epochs
    }

    pub fn with_fisher(&self, fisher: FisherDiagonal) -> Result<Self> {
        PosteriorCheckpoint::new(
            self.network.clone(),
            fisher,
            self.source_dataset_id.clone(),
            self.task_a_epochs,
        )
    }

    pub fn to_doc(&self) -> TextDoc {
        let mut doc = network_doc(&self.network, POSTERIOR_KIND, POSTERIOR_VERSION);
        doc.field("source_dataset", &self.source_dataset_id)
            .field("task_a_epochs", self.task_a_epochs)
            .field("fisher_samples", self.fisher.sample_count())
            .array("fisher", self.fisher.values());
        doc
    }

    pub fn from_doc(doc: &TextDoc) -> Result<Self> {
        doc.expect_kind(POSTERIOR_KIND, POSTERIOR_VERSION)?;
        let network = network_from_doc(doc)?;
        let fisher = FisherDiagonal::from_values(
            doc.require_array("fisher")?.to_vec(),
            doc.parse_field("fisher_samples")?,
        )?;
        PosteriorCheckpoint::new(
            network,
            fisher,
            doc.require("source_dataset")?,
            doc.parse_field("task_a_epochs")?,
        )
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_doc().write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&TextDoc::read_from(path)?)
    }
}

/// `lambda * sum_j F_j (theta_j - anchor_j)^2` and its gradient.
pub fn ewc_penalty(
    theta: &[f64],
    checkpoint: &PosteriorCheckpoint,
    lambda: f64,
) -> Result<(f64, Vec<f64>)> {
    let penalty = EwcPenalty::new(checkpoint.theta_a(), checkpoint.fisher(), lambda)?;
    if theta.len() != checkpoint.theta_a().len() {
        return Err(Error::Shape(format!(
            "theta has {} entries, anchor has {}",
            theta.len(),
            checkpoint.theta_a().len()
        )));
    }
    let mut grad = vec![0.0; theta.len()];
    let value = penalty.accumulate(theta, &mut grad);
    Ok((value, grad))
}

/// Elastic weight consolidation term usable as a training penalty.
#[derive(Debug, Clone)]
pub struct EwcPenalty<'a> {
    anchor: &'a [f64],
    fisher: &'a [f64],
    lambda: f64,
    support: Option<&'a [bool]>,
}

impl<'a> EwcPenalty<'a> {
    pub fn new(anchor: &'a [f64], fisher: &'a FisherDiagonal, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Argument(format!(
                "EWC lambda must be finite and >= 0, got {lambda}"
            )));
        }
        if anchor.len() != fisher.len() {
            return Err(Error::Shape("anchor and Fisher lengths differ".into()));
        }
        Ok(EwcPenalty {
            anchor,
            fisher: fisher.values(),
            lambda,
            support: None,
        })
    }

    /// Restrict the penalty to coordinates flagged `true`.
    pub fn restricted_to(mut self, support: &'a [bool]) -> Result<Self> {
        if support.len() != self.anchor.len() {
            return Err(Error::Shape(
                "support mask length differs from parameters".into(),
            ));
        }
        self.support = Some(support);
        Ok(self)
    }
}

impl Penalty for EwcPenalty<'_> {
    fn accumulate(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        if self.lambda == 0.0 {
            return 0.0;
        }
        let mut value = 0.0;
        for j in 0..params.len() {
            if self.support.is_some_and(|s| !s[j]) {
                continue;
            }
            let d = params[j] - self.anchor[j];
            let f = self.fisher[j];
            value += f * d * d;
            grad[j] += 2.0 * self.lambda * f * d;
        }
        self.lambda * value
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};

    fn scalar_checkpoint(theta_a: f64, fisher: f64) -> PosteriorCheckpoint {
        let net = MlpNetwork::from_params(
            vec![LayerSpec::new(1, 1, Activation::Linear)],
            vec![theta_a, 0.0],
            0,
        )
        .unwrap();
        PosteriorCheckpoint::new(
            net,
            FisherDiagonal::from_values(vec![fisher, 0.0], 1).unwrap(),
            "t",
            1,
        )
        .unwrap()
    }

    #[test]
    fn scalar_quadratic_form() {
        let ck = scalar_checkpoint(1.0, 3.0);
        let (v, g) = ewc_penalty(&[1.5, 0.0], &ck, 2.0).unwrap();
        assert_eq!(v, 1.5);
        assert_eq!(g, vec![6.0, 0.0]);
    }

    #[test]
    fn zero_at_anchor_and_at_zero_lambda() {
        let ck = scalar_checkpoint(0.3, 2.0);
        assert_eq!(
            ewc_penalty(&[0.3, 0.0], &ck, 5.0).unwrap(),
            (0.0, vec![0.0, 0.0])
        );
        assert_eq!(ewc_penalty(&[9.0, 4.0], &ck, 0.0).unwrap().0, 0.0);
    }

    #[test]
    fn bad_lambda_and_length_are_rejected() {
        let ck = scalar_checkpoint(0.0, 1.0);
        assert!(matches!(
            ewc_penalty(&[0.0, 0.0], &ck, -1.0),
            Err(Error::Argument(_))
        ));
        assert!(matches!(
            ewc_penalty(&[0.0], &ck, 1.0),
            Err(Error::Shape(_))
        ));
    }

    #[test]
    fn checkpoint_round_trips() {
        let ck = scalar_checkpoint(0.25, 0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("post.txt");
        ck.save(&path).unwrap();
        assert_eq!(PosteriorCheckpoint::load(&path).unwrap(), ck);
    }
}
