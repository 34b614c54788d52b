use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimizerKind {
    Sgd { momentum: f64 },
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn sgd() -> Self {
        OptimizerKind::Sgd { momentum: 0.0 }
    }
}

/// Learning-rate schedule, evaluated per optimizer step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule {
    Constant,
    /// Linear warmup over the first `warmup_fraction` of all steps, then cosine
    /// decay down to `min_ratio * lr`.
    CosineWarmup {
        warmup_fraction: f64,
        min_ratio: f64,
    },
    /// Multiply by `gamma` every `every_epochs` epochs.
    Step {
        every_epochs: usize,
        gamma: f64,
    },
}

impl Schedule {
    pub fn cosine_warmup() -> Self {
        Schedule::CosineWarmup {
            warmup_fraction: 0.1,
            min_ratio: 0.01,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Constant => Ok(()),
            Schedule::CosineWarmup {
                warmup_fraction,
                min_ratio,
            } => {
                if !(0.0..1.0).contains(&warmup_fraction) || !(min_ratio > 0.0 && min_ratio <= 1.0)
                {
                    Err(Error::Argument(
                        "cosine warmup needs warmup_fraction in [0,1) and min_ratio in (0,1]"
                            .into(),
                    ))
                } else {
                    Ok(())
                }
            }
            Schedule::Step {
                every_epochs,
                gamma,
            } => {
                if every_epochs == 0 || !(gamma > 0.0 && gamma.is_finite()) {
                    Err(Error::Argument(
                        "step schedule needs every_epochs >= 1 and gamma > 0".into(),
                    ))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Optimizer hyper-parameters plus per-parameter moment buffers.
///
/// Buffers are sized lazily on the first step and must stay aligned with the
/// network's flat parameter vector afterwards.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub schedule: Schedule,
    step: u64,
    total_steps: u64,
    steps_per_epoch: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, learning_rate: f64, schedule: Schedule) -> Result<Self> {
        if !(learning_rate >= 0.0 && learning_rate.is_finite()) {
            return Err(Error::Argument(format!(
                "learning rate must be a nonnegative finite number, got {learning_rate}"
            )));
        }
        schedule.validate()?;
        Ok(OptimizerState {
            kind,
            learning_rate,
            schedule,
            step: 0,
            total_steps: 1,
            steps_per_epoch: 1,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::adam(), learning_rate, Schedule::Constant)
    }

    /// Reset step counters for a run of `total_steps` steps. Moment buffers are cleared.
    pub fn begin(&mut self, total_steps: u64, steps_per_epoch: u64) {
        self.step = 0;
        self.total_steps = total_steps.max(1);
        self.steps_per_epoch = steps_per_epoch.max(1);
        self.first_moment.clear();
        self.second_moment.clear();
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    pub fn moment_len(&self) -> usize {
        self.first_moment.len()
    }

    /// Learning rate for the next step.
    pub fn current_lr(&self) -> f64 {
        let base = self.learning_rate;
        match self.schedule {
            Schedule::Constant => base,
            Schedule::CosineWarmup {
                warmup_fraction,
                min_ratio,
            } => {
                let warmup = (warmup_fraction * self.total_steps as f64).ceil() as u64;
                if self.step < warmup {
                    base * (self.step + 1) as f64 / warmup as f64
                } else {
                    let span = (self.total_steps - warmup).max(1) as f64;
                    let t = ((self.step - warmup) as f64 / span).min(1.0);
                    base * (min_ratio + (1.0 - min_ratio) * 0.5 * (1.0 + (PI * t).cos()))
                }
            }
            Schedule::Step {
                every_epochs,
                gamma,
            } => {
                let epoch = self.step / self.steps_per_epoch;
                base * gamma.powi((epoch / every_epochs as u64) as i32)
            }
        }
    }

    /// Apply one update. Coordinates with `frozen[j] == true` are left untouched.
    pub fn step(
        &mut self,
        params: &mut [f64],
        grad: &[f64],
        frozen: Option<&[bool]>,
    ) -> Result<()> {
        if params.len() != grad.len() || frozen.is_some_and(|f| f.len() != params.len()) {
            return Err(Error::Shape(format!(
                "optimizer got {} params and {} gradients",
                params.len(),
                grad.len()
            )));
        }
        if self.first_moment.is_empty() {
            self.first_moment = vec![0.0; params.len()];
            self.second_moment = vec![0.0; params.len()];
        } else if self.first_moment.len() != params.len() {
            return Err(Error::Shape(
                "optimizer buffers are aligned with a different parameter vector".into(),
            ));
        }
        let lr = self.current_lr();
        self.step += 1;
        let is_frozen = |j: usize| frozen.is_some_and(|f| f[j]);
        match self.kind {
            OptimizerKind::Sgd { momentum } => {
                for j in 0..params.len() {
                    if is_frozen(j) {
                        continue;
                    }
                    let v = momentum * self.first_moment[j] + grad[j];
                    self.first_moment[j] = v;
                    params[j] -= lr * v;
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step as i32;
                let c1 = 1.0 - beta1.powi(t);
                let c2 = 1.0 - beta2.powi(t);
                for j in 0..params.len() {
                    if is_frozen(j) {
                        continue;
                    }
                    let g = grad[j];
                    let m = beta1 * self.first_moment[j] + (1.0 - beta1) * g;
                    let v = beta2 * self.second_moment[j] + (1.0 - beta2) * g * g;
                    self.first_moment[j] = m;
                    self.second_moment[j] = v;
                    params[j] -= lr * (m / c1) / ((v / c2).sqrt() + eps);
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules_stay_positive() {
        for schedule in [
            Schedule::Constant,
            Schedule::cosine_warmup(),
            Schedule::Step {
                every_epochs: 3,
                gamma: 0.5,
            },
        ] {
            let mut opt = OptimizerState::new(OptimizerKind::adam(), 0.005, schedule).unwrap();
            opt.begin(500, 10);
            let mut params = vec![0.0; 2];
            for _ in 0..500 {
                assert!(opt.current_lr() > 0.0, "{schedule:?}");
                opt.step(&mut params, &[0.1, -0.1], None).unwrap();
            }
        }
    }

    #[test]
    fn cosine_warmup_peaks_at_base_rate() {
        let mut opt =
            OptimizerState::new(OptimizerKind::sgd(), 1.0, Schedule::cosine_warmup()).unwrap();
        opt.begin(100, 10);
        let mut p = vec![0.0];
        let mut lrs = Vec::new();
        for _ in 0..100 {
            lrs.push(opt.current_lr());
            opt.step(&mut p, &[0.0], None).unwrap();
        }
        let peak = lrs.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 1.0).abs() < 1e-12);
        assert!(lrs[0] < lrs[5]);
        assert!(lrs[99] < lrs[20]);
    }

    #[test]
    fn frozen_coordinates_do_not_move() {
        let mut opt = OptimizerState::adam(0.1).unwrap();
        let mut p = vec![1.0, 2.0];
        opt.step(&mut p, &[1.0, 1.0], Some(&[true, false])).unwrap();
        assert_eq!(p[0], 1.0);
        assert!(p[1] < 2.0);
    }

    #[test]
    fn sgd_step_is_plain_gradient_descent() {
        let mut opt = OptimizerState::new(OptimizerKind::sgd(), 0.5, Schedule::Constant).unwrap();
        let mut p = vec![1.0];
        opt.step(&mut p, &[2.0], None).unwrap();
        assert_eq!(p[0], 0.0);
    }

    #[test]
    fn misaligned_buffers_are_rejected() {
        let mut opt = OptimizerState::adam(0.1).unwrap();
        opt.step(&mut [0.0, 0.0], &[1.0, 1.0], None).unwrap();
        assert!(opt.step(&mut [0.0], &[1.0], None).is_err());
    }
}
