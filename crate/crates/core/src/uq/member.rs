use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::nn::{
    train_epochs, Dropout, DropoutMask, MlpNetwork, TrainDropout, TrainPhase, TrainingData,
};
use crate::uq::{EwcPenalty, PosteriorCheckpoint};

/// One subnetwork of a Dropsemble: the Task-A weights seen through a fixed
/// unit mask, fine-tuned on Task B.
///
/// The stored network keeps the dropout layout of the checkpoint; predictions
/// always apply the member's mask and never rescale.
#[derive(Debug, Clone, PartialEq)]
pub struct ThinnedMember {
    network: MlpNetwork,
    mask: DropoutMask,
    member_seed: u64,
    ewc_lambda: f64,
}

impl ThinnedMember {
    pub fn from_parts(
        network: MlpNetwork,
        mask: DropoutMask,
        member_seed: u64,
        ewc_lambda: f64,
    ) -> Result<Self> {
        mask.check_matches(network.layers())?;
        Ok(ThinnedMember {
            network,
            mask,
            member_seed,
            ewc_lambda,
        })
    }

    pub fn network(&self) -> &MlpNetwork {
        &self.network
    }

    pub fn weights(&self) -> &[f64] {
        self.network.params()
    }

    pub fn mask(&self) -> &DropoutMask {
        &self.mask
    }

    pub fn member_seed(&self) -> u64 {
        self.member_seed
    }

    pub fn ewc_lambda(&self) -> f64 {
        self.ewc_lambda
    }

    pub fn predict(&self, inputs: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.network.predict(inputs, Dropout::Mask(&self.mask))
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.network.forward(input, Dropout::Mask(&self.mask))?.0)
    }

    /// Parameters that can influence the output: weights between kept units
    /// (network inputs always count as kept) and biases of kept units.
    pub fn support(&self) -> Vec<bool> {
        thinned_support(&self.network, &self.mask)
    }

    /// A dropout-free network computing the same function: parameters of
    /// dropped units and their outgoing weights are zeroed.
    pub fn materialize(&self) -> MlpNetwork {
        let support = self.support();
        let params: Vec<f64> = self
            .network
            .params()
            .iter()
            .zip(&support)
            .map(|(&v, &keep)| if keep { v } else { 0.0 })
            .collect();
        let layers = self
            .network
            .layers()
            .iter()
            .map(|l| {
                let mut l = l.clone();
                l.dropout_p = 0.0;
                l
            })
            .collect();
        MlpNetwork::from_params(layers, params, self.network.rng_seed())
            .expect("zeroing parameters keeps a valid network")
    }
}

pub(crate) fn thinned_support(net: &MlpNetwork, mask: &DropoutMask) -> Vec<bool> {
    let mut support = vec![false; net.param_count()];
    // Keep flags of every stage: stage 0 is the input, stage k is layer k-1's output.
    let mut stage_keep: Vec<Vec<bool>> = vec![vec![true; net.input_dim()]];
    stage_keep.extend(mask.layers().iter().cloned());
    for (l, layer) in net.layers().iter().enumerate() {
        let mut cols: Vec<bool> = stage_keep[l].clone();
        if let Some(src) = layer.skip_from {
            cols.extend_from_slice(&stage_keep[src]);
        }
        for (j, &unit_kept) in mask.layer(l).iter().enumerate() {
            if !unit_kept {
                continue;
            }
            for (c, &col_kept) in cols.iter().enumerate() {
                support[net.weight_index(l, j, c)] = col_kept;
            }
            support[net.bias_index(l, j)] = true;
        }
    }
    support
}

/// Draw a thinned subnetwork of the checkpoint: each unit of a layer with
/// dropout `p` is kept with probability `1 - p` under `seed`.
pub fn sample_thinned_member(checkpoint: &PosteriorCheckpoint, seed: u64) -> Result<ThinnedMember> {
    let p = checkpoint.dropout_p();
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Argument(format!(
            "dropout probability {p} outside [0, 1)"
        )));
    }
    let mask = DropoutMask::sample(checkpoint.network().layers(), seed);
    ThinnedMember::from_parts(checkpoint.network().clone(), mask, seed, 0.0)
}

/// Fine-tune one member on `data_b` with its mask fixed. Coordinates outside the
/// member's support are frozen; with `lambda > 0` the EWC penalty anchored at
/// the checkpoint is added on the support.
pub fn finetune_member(
    member: &ThinnedMember,
    data_b: &TrainingData,
    phase: &TrainPhase,
    checkpoint: &PosteriorCheckpoint,
    lambda: f64,
) -> Result<ThinnedMember> {
    let annotate = |e: Error| match e {
        Error::TrainingDiverged { epoch, .. } => Error::TrainingDiverged {
            epoch,
            member_seed: Some(member.member_seed),
        },
        other => other,
    };
    let support = member.support();
    let penalty = EwcPenalty::new(checkpoint.theta_a(), checkpoint.fisher(), lambda)?
        .restricted_to(&support)?;
    if checkpoint.theta_a().len() != member.network.param_count() {
        return Err(Error::Shape(
            "member and checkpoint parameter counts differ".into(),
        ));
    }
    let mut tuned = member.clone();
    tuned.ewc_lambda = lambda;
    if phase.epochs == 0 {
        return Ok(tuned);
    }
    let mut opt = phase.optimizer_state()?;
    let frozen: Vec<bool> = support.iter().map(|s| !s).collect();
    let options = phase
        .options(member.member_seed, TrainDropout::Fixed(member.mask.clone()))
        .frozen(Some(frozen));
    let penalty_ref: Option<&dyn crate::nn::Penalty> =
        if lambda > 0.0 { Some(&penalty) } else { None };
    train_epochs(
        &mut tuned.network,
        data_b,
        &phase.loss,
        &mut opt,
        &options,
        penalty_ref,
    )
    .map_err(annotate)?;
    Ok(tuned)
}
