use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Default frequency scale of sine layers.
pub const SIREN_OMEGA0: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    /// `sin(omega0 * z)`.
    Sine {
        omega0: f64,
    },
    /// Logistic output head; pairs with binary cross-entropy.
    Sigmoid,
    /// Identity output head.
    Linear,
}

impl Activation {
    pub fn sine() -> Self {
        Activation::Sine {
            omega0: SIREN_OMEGA0,
        }
    }

    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    z
                } else {
                    0.0
                }
            }
            Activation::Sine { omega0 } => (omega0 * z).sin(),
            Activation::Sigmoid => sigmoid(z),
            Activation::Linear => z,
        }
    }

    /// Derivative at pre-activation `z`; `a` is `apply(z)`.
    /// The ReLU subgradient at zero is zero.
    #[inline]
    pub fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sine { omega0 } => omega0 * (omega0 * z).cos(),
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Linear => 1.0,
        }
    }

    pub fn is_output_head(self) -> bool {
        matches!(self, Activation::Sigmoid | Activation::Linear)
    }
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Activation::Relu => write!(f, "relu"),
            Activation::Sine { omega0 } => write!(f, "sine:{omega0}"),
            Activation::Sigmoid => write!(f, "sigmoid-output"),
            Activation::Linear => write!(f, "linear-output"),
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "sigmoid-output" => Ok(Activation::Sigmoid),
            "linear-output" => Ok(Activation::Linear),
            "sine" => Ok(Activation::sine()),
            other => {
                if let Some(w) = other.strip_prefix("sine:") {
                    let omega0: f64 = w
                        .parse()
                        .map_err(|_| Error::Argument(format!("bad sine frequency `{w}`")))?;
                    if !(omega0 > 0.0 && omega0.is_finite()) {
                        return Err(Error::Argument(format!(
                            "sine frequency must be positive, got {omega0}"
                        )));
                    }
                    Ok(Activation::Sine { omega0 })
                } else {
                    Err(Error::Argument(format!("unknown activation `{other}`")))
                }
            }
        }
    }
}

/// One dense layer: `h_out = dropout(activation(W [h_in; h_skip] + b))`.
///
/// `skip_from = Some(s)` concatenates the output of stage `s` after the previous
/// layer's output, where stage 0 is the network input and stage `k` the output of
/// layer `k - 1`. Skips must point strictly backwards.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
    pub dropout_p: f64,
    pub skip_from: Option<usize>,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        LayerSpec {
            input_dim,
            output_dim,
            activation,
            dropout_p: 0.0,
            skip_from: None,
        }
    }

    pub fn with_dropout(mut self, p: f64) -> Self {
        self.dropout_p = p;
        self
    }

    pub fn with_skip(mut self, stage: usize) -> Self {
        self.skip_from = Some(stage);
        self
    }

    pub(crate) fn validate(&self, index: usize) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::Argument(format!(
                "layer {index}: dimensions must be positive"
            )));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::Argument(format!(
                "layer {index}: dropout probability {} outside [0, 1)",
                self.dropout_p
            )));
        }
        if let Activation::Sine { omega0 } = self.activation {
            if !(omega0 > 0.0 && omega0.is_finite()) {
                return Err(Error::Argument(format!(
                    "layer {index}: sine frequency must be positive"
                )));
            }
        }
        Ok(())
    }
}

/// Plain MLP: `hidden.len()` hidden layers followed by one output layer.
///
/// Dropout `p` follows every hidden activation; the output layer has none.
pub fn mlp_layers(
    input_dim: usize,
    hidden: &[usize],
    output_dim: usize,
    hidden_activation: Activation,
    output_activation: Activation,
    dropout_p: f64,
) -> Vec<LayerSpec> {
    let mut layers = Vec::with_capacity(hidden.len() + 1);
    let mut prev = input_dim;
    for &h in hidden {
        layers.push(LayerSpec::new(prev, h, hidden_activation).with_dropout(dropout_p));
        prev = h;
    }
    layers.push(LayerSpec::new(prev, output_dim, output_activation));
    layers
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn activation_names_round_trip() {
        for a in [
            Activation::Relu,
            Activation::Sigmoid,
            Activation::Linear,
            Activation::Sine { omega0: 30.0 },
            Activation::Sine { omega0: 1.5 },
        ] {
            assert_eq!(a.to_string().parse::<Activation>().unwrap(), a);
        }
        assert!("tanh".parse::<Activation>().is_err());
        assert!("sine:-1".parse::<Activation>().is_err());
    }

    #[test]
    fn relu_subgradient_at_zero_is_zero() {
        assert_eq!(Activation::Relu.derivative(0.0, 0.0), 0.0);
    }

    #[test]
    fn sigmoid_is_stable_for_large_inputs() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0);
        assert_eq!(sigmoid(800.0), 1.0);
    }

    #[test]
    fn full_dropout_is_rejected() {
        let l = LayerSpec::new(2, 2, Activation::Relu).with_dropout(1.0);
        assert!(l.validate(0).is_err());
    }
}
