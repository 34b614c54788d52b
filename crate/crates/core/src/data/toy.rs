use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::data::{config_hash, Split, TaskDataset, TaskKind};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, Stream};

/// Two-class problem separated by `x2 = sin(2 pi x1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyConfig {
    pub n_train_a: usize,
    pub n_test_a: usize,
    pub n_train_b: usize,
    pub n_test_b: usize,
    pub noise_sigma: f64,
    pub x1_range_a: (f64, f64),
    pub x1_range_b: (f64, f64),
    pub x2_range: (f64, f64),
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            n_train_a: 1000,
            n_test_a: 500,
            n_train_b: 50,
            n_test_b: 500,
            noise_sigma: 0.15,
            x1_range_a: (-0.75, 0.7),
            x1_range_b: (-0.5, 2.0),
            x2_range: (-1.5, 1.5),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToySplits {
    pub a_train: TaskDataset,
    pub a_test: TaskDataset,
    pub b_train: TaskDataset,
    pub b_test: TaskDataset,
}

pub fn toy_boundary(x1: f64) -> f64 {
    (2.0 * std::f64::consts::PI * x1).sin()
}

fn sample_split(
    n: usize,
    x1: (f64, f64),
    x2: (f64, f64),
    sigma: f64,
    seed: u64,
    split: Split,
    provenance: &str,
) -> Result<TaskDataset> {
    let mut rng = rng_from_seed(seed);
    let noise = Normal::new(0.0, sigma).map_err(|e| Error::Argument(e.to_string()))?;
    let mut coords = Array2::zeros((n, 2));
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let a = rng.random_range(x1.0..=x1.1);
        let b = rng.random_range(x2.0..=x2.1);
        let eps = if sigma > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        coords[[i, 0]] = a;
        coords[[i, 1]] = b;
        targets.push(if b + eps > toy_boundary(a) { 1.0 } else { 0.0 });
    }
    TaskDataset::new(TaskKind::Classification, split, coords, targets, provenance)
}

/// Draw the four toy splits. Labels use `x2 + noise > sin(2 pi x1)`; the stored
/// `x2` is the clean draw.
pub fn gen_toy_classification(config: &ToyConfig, seed: u64) -> Result<ToySplits> {
    let counts = [
        config.n_train_a,
        config.n_test_a,
        config.n_train_b,
        config.n_test_b,
    ];
    if counts.contains(&0) {
        return Err(Error::Argument(
            "every toy split needs at least one point".into(),
        ));
    }
    if !(config.noise_sigma >= 0.0 && config.noise_sigma.is_finite()) {
        return Err(Error::Argument(
            "noise sigma must be finite and >= 0".into(),
        ));
    }
    for (lo, hi) in [config.x1_range_a, config.x1_range_b, config.x2_range] {
        if lo.is_nan() || hi.is_nan() || lo >= hi {
            return Err(Error::Argument(format!("empty range [{lo}, {hi}]")));
        }
    }
    let hash = config_hash(&format!("{config:?}|{seed}"));
    let part = |k: u64, n, x1, split, tag: &str| {
        sample_split(
            n,
            x1,
            config.x2_range,
            config.noise_sigma,
            derive_seed(seed, Stream::Data, k),
            split,
            &format!("toy-{tag}-{hash}"),
        )
    };
    Ok(ToySplits {
        a_train: part(
            0,
            config.n_train_a,
            config.x1_range_a,
            Split::Train,
            "a-train",
        )?,
        a_test: part(1, config.n_test_a, config.x1_range_a, Split::Test, "a-test")?,
        b_train: part(
            2,
            config.n_train_b,
            config.x1_range_b,
            Split::Train,
            "b-train",
        )?,
        b_test: part(3, config.n_test_b, config.x1_range_b, Split::Test, "b-test")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_labels_follow_the_sinusoid() {
        let cfg = ToyConfig {
            noise_sigma: 0.0,
            ..ToyConfig::default()
        };
        let s = gen_toy_classification(&cfg, 3).unwrap();
        for ds in [&s.a_train, &s.b_test] {
            for (row, &y) in ds.coords.rows().into_iter().zip(&ds.targets) {
                assert_eq!(y == 1.0, row[1] > toy_boundary(row[0]));
            }
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let cfg = ToyConfig::default();
        assert_eq!(
            gen_toy_classification(&cfg, 5).unwrap(),
            gen_toy_classification(&cfg, 5).unwrap()
        );
        assert_ne!(
            gen_toy_classification(&cfg, 5).unwrap(),
            gen_toy_classification(&cfg, 6).unwrap()
        );
    }

    #[test]
    fn task_b_extends_past_task_a_support() {
        let s = gen_toy_classification(&ToyConfig::default(), 1).unwrap();
        let beyond = s
            .b_test
            .coords
            .column(0)
            .iter()
            .filter(|&&x| x > 0.7)
            .count();
        let frac = beyond as f64 / s.b_test.len() as f64;
        assert!((frac - 0.52).abs() <= 0.05, "{frac}");
    }

    #[test]
    fn empty_range_is_rejected() {
        let cfg = ToyConfig {
            x1_range_b: (1.0, 1.0),
            ..ToyConfig::default()
        };
        assert!(matches!(
            gen_toy_classification(&cfg, 1),
            Err(Error::Argument(_))
        ));
    }
}
