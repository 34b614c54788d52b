use ndarray::{s, Axis};

use crate::error::{Error, Result};
use crate::nn::{Dropout, LossSpec, MlpNetwork, TrainingData};

/// Rows per forward/backward chunk while estimating the Fisher diagonal.
const FISHER_CHUNK: usize = 512;

/// Diagonal of the empirical Fisher information, aligned with the flat
/// parameter vector of the network it was estimated on.
#[derive(Debug, Clone, PartialEq)]
pub struct FisherDiagonal {
    values: Vec<f64>,
    sample_count: usize,
}

impl FisherDiagonal {
    pub fn from_values(values: Vec<f64>, sample_count: usize) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Numeric(format!(
                "Fisher entry {i} is {} (must be finite and nonnegative)",
                values[i]
            )));
        }
        Ok(FisherDiagonal {
            values,
            sample_count,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sample_count(&self) -> usize {
        self.sample_count
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Elementwise mean of several diagonals of equal length.
    pub fn mean_of(parts: &[&FisherDiagonal]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Argument("no Fisher diagonals to average".into()))?;
        let mut values = vec![0.0; first.len()];
        for p in parts {
            if p.len() != values.len() {
                return Err(Error::Shape("Fisher diagonals differ in length".into()));
            }
            for (v, x) in values.iter_mut().zip(&p.values) {
                *v += x;
            }
        }
        let n = parts.len() as f64;
        values.iter_mut().for_each(|v| *v /= n);
        FisherDiagonal::from_values(values, parts.iter().map(|p| p.sample_count).sum())
    }
}

/// Mean over `data` of squared per-sample log-likelihood gradients, evaluated
/// with dropout disabled.
///
/// For a dense layer the per-sample weight gradient is the outer product of the
/// pre-activation delta and the layer input, so the squared gradients summed
/// over samples reduce to `(delta^2)^T (input^2)`.
pub fn estimate_fisher_diagonal(
    net: &MlpNetwork,
    data: &TrainingData,
    loss: &LossSpec,
) -> Result<FisherDiagonal> {
    if data.is_empty() {
        return Err(Error::Argument(
            "Fisher estimation needs at least one sample".into(),
        ));
    }
    let n = data.len();
    let mut sums = vec![0.0; net.param_count()];
    let mut start = 0;
    while start < n {
        let end = (start + FISHER_CHUNK).min(n);
        let inputs = data.inputs.slice(s![start..end, ..]);
        let targets = data.targets.slice(s![start..end, ..]);
        let trace = net.forward_batch(inputs, Dropout::Eval)?;
        net.backprop(&trace, loss, targets, 1.0, false, |l, dz, net| {
            let layer = &net.layers()[l];
            let dz2 = dz.mapv(|v| v * v);
            let width = net.primary_width(l);
            let off = net.layer_offset(l);
            let mut add_block = |stage: &ndarray::Array2<f64>, col0: usize| {
                let h2 = stage.mapv(|v| v * v);
                let block = dz2.t().dot(&h2);
                for j in 0..layer.output_dim {
                    let row = off + j * layer.input_dim + col0;
                    for (c, v) in block.row(j).iter().enumerate() {
                        sums[row + c] += v;
                    }
                }
            };
            add_block(trace.stage(l), 0);
            if let Some(src) = layer.skip_from {
                add_block(trace.stage(src), width);
            }
            let bias_off = off + layer.output_dim * layer.input_dim;
            for (j, v) in dz2.sum_axis(Axis(0)).iter().enumerate() {
                sums[bias_off + j] += v;
            }
        })?;
        start = end;
    }
    let scale = 1.0 / n as f64;
    FisherDiagonal::from_values(sums.into_iter().map(|v| v * scale).collect(), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Activation, LayerSpec};
    use ndarray::array;

    #[test]
    fn scalar_logistic_model_has_fisher_quarter() {
        let layers = vec![LayerSpec::new(1, 1, Activation::Sigmoid)];
        let net = MlpNetwork::from_params(layers, vec![0.0, 0.0], 0).unwrap();
        let data = TrainingData::new(array![[1.0]], array![[1.0]]).unwrap();
        let f = estimate_fisher_diagonal(&net, &data, &LossSpec::BinaryCrossEntropy).unwrap();
        assert_eq!(f.values(), &[0.25, 0.25]);
        assert_eq!(f.sample_count(), 1);
    }

    #[test]
    fn empty_data_is_rejected() {
        let layers = vec![LayerSpec::new(1, 1, Activation::Sigmoid)];
        let net = MlpNetwork::new(layers, 0).unwrap();
        let data = TrainingData::new(
            ndarray::Array2::zeros((0, 1)),
            ndarray::Array2::zeros((0, 1)),
        )
        .unwrap();
        assert!(matches!(
            estimate_fisher_diagonal(&net, &data, &LossSpec::BinaryCrossEntropy),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn negative_entries_are_rejected() {
        assert!(FisherDiagonal::from_values(vec![0.1, -1e-9], 1).is_err());
    }
}
