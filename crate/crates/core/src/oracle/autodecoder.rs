//! Per-shape latent table learned jointly with the decoder (auto-decoder).

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::nn::{Dropout, MlpNetwork, OptimizerState, TrainPhase};
use crate::oracle::{LatentCode, LatentSource};
use crate::rng::{derive_seed, rng_from_seed, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct AutoDecoderSettings {
    pub latent_dim: usize,
    pub code_learning_rate: f64,
    pub code_init_std: f64,
    /// Weight of the `||z||^2` prior on every code.
    pub code_regularization: f64,
}

impl AutoDecoderSettings {
    pub fn new(latent_dim: usize) -> Self {
        AutoDecoderSettings {
            latent_dim,
            code_learning_rate: 1e-3,
            code_init_std: 0.01,
            code_regularization: 1e-4,
        }
    }
}

/// Point cloud with a shape index per point.
#[derive(Debug, Clone, Copy)]
pub struct ShapePoints<'a> {
    pub coords: &'a Array2<f64>,
    pub shape_of: &'a [usize],
    pub targets: &'a [f64],
    pub shapes: usize,
}

/// Optimize one code per shape, and the decoder too when `train_decoder` is
/// set. With the decoder fixed, forward passes are deterministic.
pub fn fit_codes(
    net: &mut MlpNetwork,
    points: ShapePoints<'_>,
    phase: &TrainPhase,
    settings: &AutoDecoderSettings,
    train_decoder: bool,
    seed: u64,
) -> Result<Vec<LatentCode>> {
    let n = points.targets.len();
    let dx = points.coords.ncols();
    let dz = settings.latent_dim;
    if n == 0 || points.shapes == 0 {
        return Err(Error::Argument(
            "auto-decoder needs points and shapes".into(),
        ));
    }
    if points.shape_of.len() != n || points.coords.nrows() != n {
        return Err(Error::Shape("point columns differ in length".into()));
    }
    if points.shape_of.iter().any(|&s| s >= points.shapes) {
        return Err(Error::Argument("point references a missing shape".into()));
    }
    if net.input_dim() != dx + dz {
        return Err(Error::Shape(format!(
            "decoder takes {} inputs, expected {}",
            net.input_dim(),
            dx + dz
        )));
    }
    let mut rng = rng_from_seed(derive_seed(seed, Stream::Oracle, 2));
    let init =
        Normal::new(0.0, settings.code_init_std).map_err(|e| Error::Argument(e.to_string()))?;
    let mut codes: Vec<f64> = (0..points.shapes * dz)
        .map(|_| init.sample(&mut rng))
        .collect();

    let batch = phase.batch_size.unwrap_or(n).clamp(1, n);
    let steps = n.div_ceil(batch);
    let total_steps = (steps * phase.epochs) as u64;
    let mut net_opt = phase.optimizer_state()?;
    net_opt.begin(total_steps, steps as u64);
    let mut code_opt =
        OptimizerState::new(phase.optimizer, settings.code_learning_rate, phase.schedule)?;
    code_opt.begin(total_steps, steps as u64);
    let mut dropout_rng = rng_from_seed(derive_seed(seed, Stream::Dropout, 0));
    let mut order: Vec<usize> = (0..n).collect();
    let mut params = net.params().to_vec();

    for epoch in 0..phase.epochs {
        order.shuffle(&mut rng_from_seed(derive_seed(
            seed,
            Stream::Shuffle,
            epoch as u64,
        )));
        for chunk in order.chunks(batch) {
            let mut inputs = Array2::zeros((chunk.len(), dx + dz));
            let mut targets = Array2::zeros((chunk.len(), 1));
            for (row, &i) in chunk.iter().enumerate() {
                for c in 0..dx {
                    inputs[[row, c]] = points.coords[[i, c]];
                }
                let s = points.shape_of[i];
                for k in 0..dz {
                    inputs[[row, dx + k]] = codes[s * dz + k];
                }
                targets[[row, 0]] = points.targets[i];
            }
            let dropout = if train_decoder {
                Dropout::Sample(&mut dropout_rng)
            } else {
                Dropout::Eval
            };
            let trace = net.forward_batch(inputs.view(), dropout)?;
            let (grad, value, input_grad) =
                net.backward_with_input_grad(&trace, &phase.loss, targets.view())?;
            let mut code_grad: Vec<f64> = codes
                .iter()
                .map(|z| 2.0 * settings.code_regularization * z)
                .collect();
            for (row, g) in chunk.iter().zip(input_grad.axis_iter(Axis(0))) {
                let s = points.shape_of[*row];
                for k in 0..dz {
                    code_grad[s * dz + k] += g[dx + k];
                }
            }
            if !value.is_finite() || code_grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged {
                    epoch,
                    member_seed: None,
                });
            }
            code_opt.step(&mut codes, &code_grad, None)?;
            if train_decoder {
                net_opt.step(&mut params, &grad, None)?;
                net.set_params(&params)?;
            }
        }
    }
    codes
        .chunks(dz)
        .map(|c| LatentCode::new(c.to_vec(), LatentSource::PerShapeTable))
        .collect()
}
