use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Probability clamp used by binary cross-entropy.
pub const BCE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LossSpec {
    BinaryCrossEntropy,
    /// Squared error.
    L2,
    L1,
    /// `|clamp(p, -delta, delta) - clamp(t, -delta, delta)|`.
    ClippedL1 {
        delta: f64,
    },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        if let LossSpec::ClippedL1 { delta } = *self {
            if !(delta > 0.0 && delta.is_finite()) {
                return Err(Error::Argument(format!(
                    "clip delta must be positive, got {delta}"
                )));
            }
        }
        Ok(())
    }

    /// Per-point loss value.
    pub fn value(&self, prediction: f64, target: f64) -> Result<f64> {
        if prediction.is_nan() || target.is_nan() {
            return Err(Error::Numeric("NaN operand to loss".into()));
        }
        Ok(self.value_unchecked(prediction, target))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, prediction: f64, target: f64) -> f64 {
        match *self {
            LossSpec::BinaryCrossEntropy => {
                let p = prediction.clamp(BCE_EPS, 1.0 - BCE_EPS);
                -(target * p.ln() + (1.0 - target) * (1.0 - p).ln())
            }
            LossSpec::L2 => {
                let d = prediction - target;
                d * d
            }
            LossSpec::L1 => (prediction - target).abs(),
            LossSpec::ClippedL1 { delta } => {
                (prediction.clamp(-delta, delta) - target.clamp(-delta, delta)).abs()
            }
        }
    }

    /// Derivative of the per-point loss with respect to the prediction.
    ///
    /// Binary cross-entropy is excluded: with a sigmoid head the network
    /// back-propagates `p - y` straight into the logit (see [`Self::logit_gradient`]).
    #[inline]
    pub(crate) fn prediction_gradient(&self, prediction: f64, target: f64) -> f64 {
        match *self {
            LossSpec::BinaryCrossEntropy => {
                let p = prediction.clamp(BCE_EPS, 1.0 - BCE_EPS);
                (p - target) / (p * (1.0 - p))
            }
            LossSpec::L2 => 2.0 * (prediction - target),
            LossSpec::L1 => signum0(prediction - target),
            LossSpec::ClippedL1 { delta } => {
                if prediction.abs() < delta {
                    signum0(prediction - target.clamp(-delta, delta))
                } else {
                    0.0
                }
            }
        }
    }

    /// Gradient with respect to the pre-sigmoid logit for cross-entropy.
    #[inline]
    pub(crate) fn logit_gradient(prediction: f64, target: f64) -> f64 {
        prediction - target
    }
}

#[inline]
fn signum0(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Free-function form of [`LossSpec::value`].
pub fn loss_value(loss: &LossSpec, prediction: f64, target: f64) -> Result<f64> {
    loss.value(prediction, target)
}

impl fmt::Display for LossSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LossSpec::BinaryCrossEntropy => write!(f, "binary-cross-entropy"),
            LossSpec::L2 => write!(f, "l2"),
            LossSpec::L1 => write!(f, "l1"),
            LossSpec::ClippedL1 { delta } => write!(f, "clipped-l1:{delta}"),
        }
    }
}

impl FromStr for LossSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let loss = match s {
            "binary-cross-entropy" | "bce" => LossSpec::BinaryCrossEntropy,
            "l2" => LossSpec::L2,
            "l1" => LossSpec::L1,
            "clipped-l1" => LossSpec::ClippedL1 { delta: 0.1 },
            other => match other.strip_prefix("clipped-l1:") {
                Some(d) => LossSpec::ClippedL1 {
                    delta: d
                        .parse()
                        .map_err(|_| Error::Argument(format!("bad clip delta `{d}`")))?,
                },
                None => return Err(Error::Argument(format!("unknown loss `{other}`"))),
            },
        };
        loss.validate()?;
        Ok(loss)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CLIP: LossSpec = LossSpec::ClippedL1 { delta: 0.1 };

    #[test]
    fn clipped_l1_examples() {
        assert_eq!(CLIP.value(0.5, 0.3).unwrap(), 0.0);
        assert!((CLIP.value(-0.05, 0.05).unwrap() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn l2_at_target_is_zero() {
        assert_eq!(LossSpec::L2.value(0.37, 0.37).unwrap(), 0.0);
    }

    #[test]
    fn bce_at_half_is_ln2() {
        let v = LossSpec::BinaryCrossEntropy.value(0.5, 1.0).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_is_finite_at_saturation() {
        let v = LossSpec::BinaryCrossEntropy.value(0.0, 1.0).unwrap();
        assert!(v.is_finite());
        assert!((v + BCE_EPS.ln()).abs() < 1e-9);
    }

    #[test]
    fn nan_is_rejected() {
        assert!(matches!(
            LossSpec::L1.value(f64::NAN, 0.0),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn parse_round_trip() {
        for l in [
            LossSpec::BinaryCrossEntropy,
            LossSpec::L2,
            LossSpec::L1,
            CLIP,
        ] {
            assert_eq!(l.to_string().parse::<LossSpec>().unwrap(), l);
        }
        assert!("clipped-l1:0".parse::<LossSpec>().is_err());
    }
}
