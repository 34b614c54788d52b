use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nn::LayerSpec;
use crate::rng::rng_from_seed;

/// Unit-level dropout mask: one keep/drop flag per output unit of every layer.
///
/// Layers with `dropout_p = 0` always keep every unit, so regenerating from the
/// recorded seed reproduces the mask bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DropoutMask {
    layers: Vec<Vec<bool>>,
    generator_seed: u64,
}

impl DropoutMask {
    /// Draw a mask with keep probability `1 - p` per unit under `seed`.
    pub fn sample(layers: &[LayerSpec], seed: u64) -> Self {
        let mut rng = rng_from_seed(seed);
        let masks = layers
            .iter()
            .map(|l| {
                (0..l.output_dim)
                    .map(|_| {
                        if l.dropout_p > 0.0 {
                            rng.random::<f64>() >= l.dropout_p
                        } else {
                            true
                        }
                    })
                    .collect()
            })
            .collect();
        DropoutMask {
            layers: masks,
            generator_seed: seed,
        }
    }

    /// Mask keeping every unit.
    pub fn all_ones(layers: &[LayerSpec]) -> Self {
        DropoutMask {
            layers: layers.iter().map(|l| vec![true; l.output_dim]).collect(),
            generator_seed: 0,
        }
    }

    pub fn from_layers(layers: Vec<Vec<bool>>, generator_seed: u64) -> Self {
        DropoutMask {
            layers,
            generator_seed,
        }
    }

    pub fn generator_seed(&self) -> u64 {
        self.generator_seed
    }

    pub fn layer(&self, index: usize) -> &[bool] {
        &self.layers[index]
    }

    pub fn layers(&self) -> &[Vec<bool>] {
        &self.layers
    }

    pub fn kept(&self) -> usize {
        self.layers.iter().flatten().filter(|&&k| k).count()
    }

    pub fn total(&self) -> usize {
        self.layers.iter().map(Vec::len).sum()
    }

    pub fn check_matches(&self, layers: &[LayerSpec]) -> Result<()> {
        if self.layers.len() != layers.len() {
            return Err(Error::Shape(format!(
                "mask has {} layers, network has {}",
                self.layers.len(),
                layers.len()
            )));
        }
        for (i, (m, l)) in self.layers.iter().zip(layers).enumerate() {
            if m.len() != l.output_dim {
                return Err(Error::Shape(format!(
                    "mask layer {i} has {} units, layer output is {}",
                    m.len(),
                    l.output_dim
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{mlp_layers, Activation};

    #[test]
    fn regeneration_is_bit_identical() {
        let layers = mlp_layers(2, &[16, 16], 1, Activation::Relu, Activation::Sigmoid, 0.3);
        assert_eq!(
            DropoutMask::sample(&layers, 9),
            DropoutMask::sample(&layers, 9)
        );
        assert_ne!(
            DropoutMask::sample(&layers, 9),
            DropoutMask::sample(&layers, 10)
        );
    }

    #[test]
    fn zero_probability_layers_keep_everything() {
        let layers = mlp_layers(2, &[8], 1, Activation::Relu, Activation::Sigmoid, 0.0);
        let m = DropoutMask::sample(&layers, 3);
        assert_eq!(m.kept(), m.total());
        m.check_matches(&layers).unwrap();
    }
}
