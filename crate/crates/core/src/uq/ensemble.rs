use ndarray::{Array1, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::nn::{Dropout, MlpNetwork};
use crate::oracle::LatentCode;
use crate::rng::{derive_seed, rng_from_seed, Stream};
use crate::uq::ThinnedMember;

/// Default number of stochastic passes for MC dropout inference.
pub const DEFAULT_MC_SAMPLES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EnsembleKind {
    Dropsembles,
    DeepEnsemble,
    /// A single dropout network whose stochastic passes act as members.
    McDropoutVirtual,
}

impl EnsembleKind {
    pub fn name(self) -> &'static str {
        match self {
            EnsembleKind::Dropsembles => "dropsembles",
            EnsembleKind::DeepEnsemble => "deep-ensemble",
            EnsembleKind::McDropoutVirtual => "mc-dropout-virtual",
        }
    }
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dropsembles" => Ok(EnsembleKind::Dropsembles),
            "deep-ensemble" => Ok(EnsembleKind::DeepEnsemble),
            "mc-dropout-virtual" => Ok(EnsembleKind::McDropoutVirtual),
            _ => Err(Error::Argument(format!("unknown ensemble kind `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum EnsembleMember {
    Thinned(ThinnedMember),
    /// A full network evaluated deterministically (weight-scaled if it has dropout).
    Network(MlpNetwork),
}

impl EnsembleMember {
    pub fn network(&self) -> &MlpNetwork {
        match self {
            EnsembleMember::Thinned(m) => m.network(),
            EnsembleMember::Network(n) => n,
        }
    }

    pub fn predict(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        match self {
            EnsembleMember::Thinned(m) => m.predict(inputs),
            EnsembleMember::Network(n) => n.predict(inputs, Dropout::Eval),
        }
    }
}

/// Uniform mixture of predictors.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleModel {
    kind: EnsembleKind,
    members: Vec<EnsembleMember>,
    mc_samples: usize,
    mc_seed: u64,
}

impl EnsembleModel {
    pub fn new(kind: EnsembleKind, members: Vec<EnsembleMember>) -> Result<Self> {
        let first = members
            .first()
            .ok_or_else(|| Error::Contract("an ensemble needs at least one member".into()))?;
        let (din, dout) = (first.network().input_dim(), first.network().output_dim());
        if members
            .iter()
            .any(|m| m.network().input_dim() != din || m.network().output_dim() != dout)
        {
            return Err(Error::Contract(
                "ensemble members disagree on dimensions".into(),
            ));
        }
        if kind == EnsembleKind::McDropoutVirtual && members.len() != 1 {
            return Err(Error::Contract(
                "an MC dropout ensemble wraps exactly one network".into(),
            ));
        }
        Ok(EnsembleModel {
            kind,
            members,
            mc_samples: DEFAULT_MC_SAMPLES,
            mc_seed: 0,
        })
    }

    /// MC dropout over `net` with `n_samples` stochastic passes.
    pub fn mc_dropout(net: MlpNetwork, n_samples: usize, seed: u64) -> Result<Self> {
        if n_samples == 0 {
            return Err(Error::Argument(
                "MC dropout needs at least one sample".into(),
            ));
        }
        let mut model = EnsembleModel::new(
            EnsembleKind::McDropoutVirtual,
            vec![EnsembleMember::Network(net)],
        )?;
        model.mc_samples = n_samples;
        model.mc_seed = seed;
        Ok(model)
    }

    pub fn kind(&self) -> EnsembleKind {
        self.kind
    }

    pub fn members(&self) -> &[EnsembleMember] {
        &self.members
    }

    pub fn mc_samples(&self) -> usize {
        self.mc_samples
    }

    pub fn mc_seed(&self) -> u64 {
        self.mc_seed
    }

    pub fn input_dim(&self) -> usize {
        self.members[0].network().input_dim()
    }

    /// Number of predictions mixed per input (members, or MC passes).
    pub fn width(&self) -> usize {
        match self.kind {
            EnsembleKind::McDropoutVirtual => self.mc_samples,
            _ => self.members.len(),
        }
    }

    /// Per-member outputs for every row of `inputs`.
    pub fn member_outputs(&self, inputs: ArrayView2<'_, f64>) -> Result<MemberOutputs> {
        if self.members[0].network().output_dim() != 1 {
            return Err(Error::Contract(
                "ensemble outputs are defined for scalar heads".into(),
            ));
        }
        let rows = inputs.nrows();
        let mut values = Array2::zeros((self.width(), rows));
        match self.kind {
            EnsembleKind::McDropoutVirtual => {
                let net = self.members[0].network();
                for s in 0..self.mc_samples {
                    let mut rng =
                        rng_from_seed(derive_seed(self.mc_seed, Stream::McSamples, s as u64));
                    let out = net.predict(inputs, Dropout::Sample(&mut rng))?;
                    values.row_mut(s).assign(&out.column(0));
                }
            }
            _ => {
                for (m, member) in self.members.iter().enumerate() {
                    let out = member.predict(inputs)?;
                    values.row_mut(m).assign(&out.column(0));
                }
            }
        }
        Ok(MemberOutputs { values })
    }
}

/// Member-by-row prediction table.
#[derive(Debug, Clone, PartialEq)]
pub struct MemberOutputs {
    /// Shape `(members, rows)`.
    pub values: Array2<f64>,
}

impl MemberOutputs {
    pub fn members(&self) -> usize {
        self.values.nrows()
    }

    pub fn rows(&self) -> usize {
        self.values.ncols()
    }

    /// Uniform mixture mean per row.
    pub fn mean(&self) -> Array1<f64> {
        self.values
            .axis_iter(Axis(1))
            .map(|col| mixture_mean(&col.to_vec()))
            .collect()
    }

    /// Fraction of members whose output is below `threshold`, per row.
    pub fn fraction_below(&self, threshold: f64) -> Array1<f64> {
        let m = self.members() as f64;
        self.values
            .axis_iter(Axis(1))
            .map(|col| col.iter().filter(|&&v| v < threshold).count() as f64 / m)
            .collect()
    }
}

/// Arithmetic mean, summed in sorted order so the result does not depend on
/// member order.
pub fn mixture_mean(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    sorted.iter().sum::<f64>() / sorted.len() as f64
}

/// Mean prediction and the individual member predictions at one input.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub mean: f64,
    pub members: Vec<f64>,
}

fn query_row(x: &[f64], latent: Option<&LatentCode>) -> Array2<f64> {
    let mut row = x.to_vec();
    if let Some(z) = latent {
        row.extend_from_slice(z.values());
    }
    Array2::from_shape_vec((1, row.len()), row).expect("one row")
}

pub fn ensemble_predict(
    model: &EnsembleModel,
    x: &[f64],
    latent: Option<&LatentCode>,
) -> Result<Prediction> {
    let out = model.member_outputs(query_row(x, latent).view())?;
    let members = out.values.column(0).to_vec();
    Ok(Prediction {
        mean: mixture_mean(&members),
        members,
    })
}

/// `n_samples` forward passes of `net`, each with a freshly drawn dropout mask.
pub fn mc_dropout_predict(
    net: &MlpNetwork,
    x: &[f64],
    latent: Option<&LatentCode>,
    n_samples: usize,
    seed: u64,
) -> Result<Prediction> {
    let model = EnsembleModel::mc_dropout(net.clone(), n_samples, seed)?;
    ensemble_predict(&model, x, latent)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp_layers, Activation};

    #[test]
    fn mixture_of_known_values() {
        assert_eq!(mixture_mean(&[0.2, 0.4, 0.6, 0.8]), 0.5);
        assert_eq!(mixture_mean(&[0.7]), 0.7);
    }

    #[test]
    fn empty_ensemble_is_rejected() {
        assert!(matches!(
            EnsembleModel::new(EnsembleKind::DeepEnsemble, vec![]),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn mc_dropout_without_dropout_is_deterministic() {
        let net = MlpNetwork::new(
            mlp_layers(2, &[8], 1, Activation::Relu, Activation::Sigmoid, 0.0),
            1,
        )
        .unwrap();
        let p = mc_dropout_predict(&net, &[0.5, 0.1], None, 5, 3).unwrap();
        let det = net.forward(&[0.5, 0.1], Dropout::Eval).unwrap().0[0];
        assert!(p.members.iter().all(|&v| v == det));
        assert!(mc_dropout_predict(&net, &[0.5, 0.1], None, 0, 3).is_err());
    }

    #[test]
    fn single_sample_mean_is_that_sample() {
        let net = MlpNetwork::new(
            mlp_layers(2, &[8], 1, Activation::Relu, Activation::Sigmoid, 0.4),
            1,
        )
        .unwrap();
        let p = mc_dropout_predict(&net, &[0.5, 0.1], None, 1, 3).unwrap();
        assert_eq!(p.mean, p.members[0]);
    }
}
