use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::nn::{
    Dropout, DropoutMask, LossSpec, MlpNetwork, OptimizerKind, OptimizerState, Schedule,
};
use crate::rng::{derive_seed, rng_from_seed, Stream};

/// Extra objective term evaluated on the flat parameter vector.
pub trait Penalty {
    /// Add the penalty gradient into `grad` and return the penalty value.
    fn accumulate(&self, params: &[f64], grad: &mut [f64]) -> f64;
}

impl<F> Penalty for F
where
    F: Fn(&[f64], &mut [f64]) -> f64,
{
    fn accumulate(&self, params: &[f64], grad: &mut [f64]) -> f64 {
        self(params, grad)
    }
}

/// Inputs and targets as row-aligned matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingData {
    pub inputs: Array2<f64>,
    pub targets: Array2<f64>,
}

impl TrainingData {
    pub fn new(inputs: Array2<f64>, targets: Array2<f64>) -> Result<Self> {
        if inputs.nrows() != targets.nrows() {
            return Err(Error::Shape(format!(
                "{} input rows but {} target rows",
                inputs.nrows(),
                targets.nrows()
            )));
        }
        Ok(TrainingData { inputs, targets })
    }

    pub fn len(&self) -> usize {
        self.inputs.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.nrows() == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TrainDropout {
    /// Deterministic forward passes (weight-scaled when the network has dropout).
    Inactive,
    /// Independent unit masks per row and step.
    Active,
    /// One fixed mask for the whole run (a thinned subnetwork).
    Fixed(DropoutMask),
}

#[derive(Debug, Clone)]
pub struct TrainOptions {
    pub epochs: usize,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    /// Seeds minibatch shuffling and dropout sampling.
    pub seed: u64,
    pub dropout: TrainDropout,
    /// Coordinates that must not change.
    pub frozen: Option<Vec<bool>>,
}

impl TrainOptions {
    pub fn new(epochs: usize, seed: u64) -> Self {
        TrainOptions {
            epochs,
            batch_size: None,
            seed,
            dropout: TrainDropout::Inactive,
            frozen: None,
        }
    }

    pub fn batch_size(mut self, batch_size: Option<usize>) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn dropout(mut self, dropout: TrainDropout) -> Self {
        self.dropout = dropout;
        self
    }

    pub fn frozen(mut self, frozen: Option<Vec<bool>>) -> Self {
        self.frozen = frozen;
        self
    }
}

/// Hyper-parameters of one training phase (task A pretraining or task B tuning).
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPhase {
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub schedule: Schedule,
    /// `None` trains full-batch.
    pub batch_size: Option<usize>,
    pub loss: LossSpec,
}

impl TrainPhase {
    pub fn optimizer_state(&self) -> Result<OptimizerState> {
        OptimizerState::new(self.optimizer, self.learning_rate, self.schedule)
    }

    pub fn options(&self, seed: u64, dropout: TrainDropout) -> TrainOptions {
        TrainOptions::new(self.epochs, seed)
            .batch_size(self.batch_size)
            .dropout(dropout)
    }
}

/// Minimize the mean loss over `data` (plus `penalty`, when given, on every
/// minibatch) and return the per-epoch mean objective.
///
/// The optimizer is restarted for this run. With identical inputs the returned
/// trace and final weights are bitwise reproducible.
pub fn train_epochs(
    net: &mut MlpNetwork,
    data: &TrainingData,
    loss: &LossSpec,
    opt: &mut OptimizerState,
    options: &TrainOptions,
    penalty: Option<&dyn Penalty>,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::Argument("training data is empty".into()));
    }
    if options.epochs == 0 {
        return Err(Error::Argument("epochs must be at least 1".into()));
    }
    loss.validate()?;
    if let Some(f) = &options.frozen {
        if f.len() != net.param_count() {
            return Err(Error::Shape("frozen mask does not match parameters".into()));
        }
    }
    if let TrainDropout::Fixed(mask) = &options.dropout {
        mask.check_matches(net.layers())?;
    }

    let n = data.len();
    let batch = options.batch_size.unwrap_or(n).clamp(1, n);
    let steps_per_epoch = n.div_ceil(batch);
    opt.begin(
        (steps_per_epoch * options.epochs) as u64,
        steps_per_epoch as u64,
    );

    let mut dropout_rng = rng_from_seed(derive_seed(options.seed, Stream::Dropout, 0));
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace_out = Vec::with_capacity(options.epochs);
    let mut params = net.params().to_vec();

    for epoch in 0..options.epochs {
        if batch < n {
            let mut rng = rng_from_seed(derive_seed(options.seed, Stream::Shuffle, epoch as u64));
            order.shuffle(&mut rng);
        }
        let mut epoch_total = 0.0;
        for chunk in order.chunks(batch) {
            let (inputs, targets): (ArrayView2<f64>, ArrayView2<f64>);
            let owned;
            if chunk.len() == n {
                inputs = data.inputs.view();
                targets = data.targets.view();
            } else {
                owned = (
                    data.inputs.select(Axis(0), chunk),
                    data.targets.select(Axis(0), chunk),
                );
                inputs = owned.0.view();
                targets = owned.1.view();
            }
            let dropout = match &options.dropout {
                TrainDropout::Inactive => Dropout::Eval,
                TrainDropout::Active => Dropout::Sample(&mut dropout_rng),
                TrainDropout::Fixed(mask) => Dropout::Mask(mask),
            };
            let trace = net.forward_batch(inputs, dropout).map_err(|e| match e {
                Error::Numeric(_) => Error::TrainingDiverged {
                    epoch,
                    member_seed: None,
                },
                other => other,
            })?;
            let (mut grad, mut value) = net.backward(&trace, loss, targets)?;
            if let Some(p) = penalty {
                value += p.accumulate(net.params(), &mut grad);
            }
            if !value.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged {
                    epoch,
                    member_seed: None,
                });
            }
            epoch_total += value * chunk.len() as f64;
            opt.step(&mut params, &grad, options.frozen.as_deref())?;
            net.set_params(&params)?;
        }
        trace_out.push(epoch_total / n as f64);
    }
    if params.iter().any(|p| !p.is_finite()) {
        return Err(Error::TrainingDiverged {
            epoch: options.epochs - 1,
            member_seed: None,
        });
    }
    Ok(trace_out)
}
