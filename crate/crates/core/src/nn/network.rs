use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nn::{Activation, DropoutMask, LayerSpec, LossSpec};
use crate::rng::{rng_from_seed, Rng};

static NEXT_NETWORK_ID: AtomicU64 = AtomicU64::new(1);

fn next_id() -> u64 {
    NEXT_NETWORK_ID.fetch_add(1, Ordering::Relaxed)
}

/// How dropout is treated in a forward pass.
pub enum Dropout<'a> {
    /// No sampling; activations of a layer with dropout `p` are scaled by `1 - p`.
    Eval,
    /// One fixed unit mask shared by every row; dropped units output exactly 0 and
    /// kept units are not rescaled.
    Mask(&'a DropoutMask),
    /// A fresh independent mask for every row of the batch.
    Sample(&'a mut Rng),
}

#[derive(Debug, Clone)]
enum LayerFactor {
    Scale(f64),
    Shared(Vec<bool>),
    /// Row-major `(rows, units)` keep flags.
    Rows(Vec<bool>),
}

/// Cached activations of one forward pass, sufficient to run backward.
#[derive(Debug, Clone)]
pub struct ForwardTrace {
    network_id: u64,
    generation: u64,
    /// `stages[0]` is the input batch; `stages[k]` is the output of layer `k - 1`.
    stages: Vec<Array2<f64>>,
    pre_activations: Vec<Array2<f64>>,
    factors: Vec<LayerFactor>,
}

impl ForwardTrace {
    pub fn output(&self) -> &Array2<f64> {
        self.stages
            .last()
            .expect("trace has at least the input stage")
    }

    pub fn stage(&self, k: usize) -> &Array2<f64> {
        &self.stages[k]
    }

    pub fn rows(&self) -> usize {
        self.stages[0].nrows()
    }
}

/// Dense feed-forward network with optional skip connections.
///
/// Parameters live in one flat vector. For each layer in order it holds the
/// weight matrix row-major with shape `(output_dim, input_dim)` followed by the
/// bias vector. When a layer has a skip connection the first columns of its
/// weight matrix act on the previous layer's output and the remaining columns on
/// the skipped stage. This ordering is the alignment contract for gradients,
/// Fisher diagonals and optimizer buffers.
#[derive(Debug)]
pub struct MlpNetwork {
    layers: Vec<LayerSpec>,
    params: Vec<f64>,
    offsets: Vec<usize>,
    rng_seed: u64,
    id: u64,
    generation: u64,
}

impl Clone for MlpNetwork {
    fn clone(&self) -> Self {
        MlpNetwork {
            layers: self.layers.clone(),
            params: self.params.clone(),
            offsets: self.offsets.clone(),
            rng_seed: self.rng_seed,
            id: next_id(),
            generation: 0,
        }
    }
}

impl PartialEq for MlpNetwork {
    fn eq(&self, other: &Self) -> bool {
        self.layers == other.layers
            && self.rng_seed == other.rng_seed
            && self
                .params
                .iter()
                .zip(&other.params)
                .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

fn stage_dim(layers: &[LayerSpec], stage: usize) -> usize {
    if stage == 0 {
        layers[0].input_dim
    } else {
        layers[stage - 1].output_dim
    }
}

fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::Argument("network needs at least one layer".into()));
    }
    for (i, l) in layers.iter().enumerate() {
        l.validate(i)?;
        let expected = if i == 0 {
            if l.skip_from.is_some() {
                return Err(Error::Argument("layer 0 cannot have a skip input".into()));
            }
            l.input_dim
        } else {
            let prev = layers[i - 1].output_dim;
            match l.skip_from {
                Some(s) if s >= i => {
                    return Err(Error::Argument(format!(
                        "layer {i}: skip source stage {s} is not strictly earlier"
                    )))
                }
                Some(s) => prev + stage_dim(layers, s),
                None => prev,
            }
        };
        if l.input_dim != expected {
            return Err(Error::Shape(format!(
                "layer {i}: input_dim {} but incoming width is {expected}",
                l.input_dim
            )));
        }
    }
    if layers.last().unwrap().dropout_p != 0.0 {
        return Err(Error::Argument("output layer cannot have dropout".into()));
    }
    Ok(())
}

fn compute_offsets(layers: &[LayerSpec]) -> (Vec<usize>, usize) {
    let mut offsets = Vec::with_capacity(layers.len());
    let mut at = 0;
    for l in layers {
        offsets.push(at);
        at += l.output_dim * l.input_dim + l.output_dim;
    }
    (offsets, at)
}

impl MlpNetwork {
    /// Build a network and initialize it from `seed`.
    ///
    /// Sine networks use the periodic-activation scheme: the first layer draws from
    /// `U(-1/fan_in, 1/fan_in)` and later layers from
    /// `U(-sqrt(6/fan_in)/omega0, sqrt(6/fan_in)/omega0)`. Other networks draw
    /// weights from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`. Biases always use
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        validate_layers(&layers)?;
        let (offsets, total) = compute_offsets(&layers);
        let mut params = vec![0.0; total];
        let mut rng = rng_from_seed(seed);
        let siren_omega = layers.iter().find_map(|l| match l.activation {
            Activation::Sine { omega0 } => Some(omega0),
            _ => None,
        });
        for (i, l) in layers.iter().enumerate() {
            let fan_in = l.input_dim as f64;
            let w_bound = match siren_omega {
                Some(_) if i == 0 => 1.0 / fan_in,
                Some(omega0) => (6.0 / fan_in).sqrt() / omega0,
                None => 1.0 / fan_in.sqrt(),
            };
            let b_bound = 1.0 / fan_in.sqrt();
            let off = offsets[i];
            let nw = l.output_dim * l.input_dim;
            for p in &mut params[off..off + nw] {
                *p = rng.random_range(-w_bound..w_bound);
            }
            for p in &mut params[off + nw..off + nw + l.output_dim] {
                *p = rng.random_range(-b_bound..b_bound);
            }
        }
        Ok(MlpNetwork {
            layers,
            params,
            offsets,
            rng_seed: seed,
            id: next_id(),
            generation: 0,
        })
    }

    /// Build a network with explicit parameters.
    pub fn from_params(layers: Vec<LayerSpec>, params: Vec<f64>, rng_seed: u64) -> Result<Self> {
        validate_layers(&layers)?;
        let (offsets, total) = compute_offsets(&layers);
        if params.len() != total {
            return Err(Error::Shape(format!(
                "expected {total} parameters, got {}",
                params.len()
            )));
        }
        if let Some(i) = params.iter().position(|p| !p.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} is not finite")));
        }
        Ok(MlpNetwork {
            layers,
            params,
            offsets,
            rng_seed,
            id: next_id(),
            generation: 0,
        })
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim
    }

    pub fn rng_seed(&self) -> u64 {
        self.rng_seed
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the flat parameters; invalidates outstanding traces.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.params
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "expected {} parameters, got {}",
                self.params.len(),
                params.len()
            )));
        }
        self.params_mut().copy_from_slice(params);
        Ok(())
    }

    /// Offset of layer `index`'s weight block in the flat parameter vector.
    pub fn layer_offset(&self, index: usize) -> usize {
        self.offsets[index]
    }

    /// Flat index of weight `(row, col)` of layer `index`.
    pub fn weight_index(&self, index: usize, row: usize, col: usize) -> usize {
        self.offsets[index] + row * self.layers[index].input_dim + col
    }

    /// Flat index of bias `unit` of layer `index`.
    pub fn bias_index(&self, index: usize, unit: usize) -> usize {
        let l = &self.layers[index];
        self.offsets[index] + l.output_dim * l.input_dim + unit
    }

    pub fn weights(&self, index: usize) -> ArrayView2<'_, f64> {
        let l = &self.layers[index];
        let off = self.offsets[index];
        ArrayView2::from_shape(
            (l.output_dim, l.input_dim),
            &self.params[off..off + l.output_dim * l.input_dim],
        )
        .expect("weight block matches layer shape")
    }

    pub fn bias(&self, index: usize) -> ArrayView1<'_, f64> {
        let l = &self.layers[index];
        let start = self.offsets[index] + l.output_dim * l.input_dim;
        ArrayView1::from(&self.params[start..start + l.output_dim])
    }

    /// Columns of layer `index` that read the previous layer (the rest read the skip stage).
    pub fn primary_width(&self, index: usize) -> usize {
        if index == 0 {
            self.layers[0].input_dim
        } else {
            self.layers[index - 1].output_dim
        }
    }

    /// Single-input forward pass.
    pub fn forward(&self, input: &[f64], dropout: Dropout<'_>) -> Result<(Vec<f64>, ForwardTrace)> {
        let batch = ArrayView2::from_shape((1, input.len()), input)
            .map_err(|e| Error::Shape(e.to_string()))?;
        let trace = self.forward_batch(batch, dropout)?;
        let out = trace.output().row(0).to_vec();
        Ok((out, trace))
    }

    /// Evaluate a batch without keeping a trace.
    pub fn predict(
        &self,
        inputs: ArrayView2<'_, f64>,
        dropout: Dropout<'_>,
    ) -> Result<Array2<f64>> {
        let mut trace = self.forward_batch(inputs, dropout)?;
        Ok(trace.stages.pop().unwrap())
    }

    /// Batched forward pass over the rows of `inputs`.
    pub fn forward_batch(
        &self,
        inputs: ArrayView2<'_, f64>,
        mut dropout: Dropout<'_>,
    ) -> Result<ForwardTrace> {
        if inputs.ncols() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                inputs.ncols(),
                self.input_dim()
            )));
        }
        if inputs.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        if let Dropout::Mask(mask) = &dropout {
            mask.check_matches(&self.layers)?;
        }
        let rows = inputs.nrows();
        let mut stages = Vec::with_capacity(self.layers.len() + 1);
        stages.push(inputs.to_owned());
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        let mut factors = Vec::with_capacity(self.layers.len());

        for (i, layer) in self.layers.iter().enumerate() {
            let w = self.weights(i);
            let width = self.primary_width(i);
            let mut z = Array2::<f64>::zeros((rows, layer.output_dim));
            general_mat_mul(1.0, &stages[i], &w.slice(s![.., ..width]).t(), 0.0, &mut z);
            if let Some(src) = layer.skip_from {
                general_mat_mul(
                    1.0,
                    &stages[src],
                    &w.slice(s![.., width..]).t(),
                    1.0,
                    &mut z,
                );
            }
            z += &self.bias(i);

            let act = layer.activation;
            let mut h = z.mapv(|v| act.apply(v));
            let p = layer.dropout_p;
            let factor = match &mut dropout {
                Dropout::Eval if p > 0.0 => {
                    let keep = 1.0 - p;
                    h.mapv_inplace(|v| v * keep);
                    LayerFactor::Scale(keep)
                }
                Dropout::Mask(mask) if mask.layer(i).iter().any(|&k| !k) => {
                    let m = mask.layer(i);
                    apply_shared(&mut h.view_mut(), m);
                    LayerFactor::Shared(m.to_vec())
                }
                Dropout::Sample(rng) if p > 0.0 => {
                    let keep: Vec<bool> = (0..rows * layer.output_dim)
                        .map(|_| rng.random::<f64>() >= p)
                        .collect();
                    for (v, &k) in h.iter_mut().zip(&keep) {
                        if !k {
                            *v = 0.0;
                        }
                    }
                    LayerFactor::Rows(keep)
                }
                _ => LayerFactor::Scale(1.0),
            };
            pre_activations.push(z);
            factors.push(factor);
            stages.push(h);
        }
        if stages.last().unwrap().iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network output".into()));
        }
        Ok(ForwardTrace {
            network_id: self.id,
            generation: self.generation,
            stages,
            pre_activations,
            factors,
        })
    }

    fn check_trace(&self, trace: &ForwardTrace) -> Result<()> {
        if trace.network_id != self.id || trace.generation != self.generation {
            return Err(Error::StaleTrace);
        }
        Ok(())
    }

    /// Loss (mean over rows, summed over outputs) and its gradient with respect to
    /// the flat parameters.
    pub fn backward(
        &self,
        trace: &ForwardTrace,
        loss: &LossSpec,
        targets: ArrayView2<'_, f64>,
    ) -> Result<(Vec<f64>, f64)> {
        let (grad, value, _) = self.backward_full(trace, loss, targets, false)?;
        Ok((grad, value))
    }

    /// Like [`Self::backward`] but also returns the gradient with respect to the input batch.
    pub fn backward_with_input_grad(
        &self,
        trace: &ForwardTrace,
        loss: &LossSpec,
        targets: ArrayView2<'_, f64>,
    ) -> Result<(Vec<f64>, f64, Array2<f64>)> {
        let (grad, value, input_grad) = self.backward_full(trace, loss, targets, true)?;
        Ok((grad, value, input_grad.expect("requested")))
    }

    fn backward_full(
        &self,
        trace: &ForwardTrace,
        loss: &LossSpec,
        targets: ArrayView2<'_, f64>,
        want_input_grad: bool,
    ) -> Result<(Vec<f64>, f64, Option<Array2<f64>>)> {
        self.check_trace(trace)?;
        let rows = trace.rows();
        let value = self.loss_value(trace, loss, targets)?;
        let scale = 1.0 / rows as f64;
        let mut grad = vec![0.0; self.params.len()];
        let input_grad = self.backprop(
            trace,
            loss,
            targets,
            scale,
            want_input_grad,
            |l, dz, net| {
                net.accumulate_layer_grad(l, dz, trace, &mut grad);
            },
        )?;
        Ok((grad, value, input_grad))
    }

    /// Mean-over-rows loss for a forward trace.
    pub fn loss_value(
        &self,
        trace: &ForwardTrace,
        loss: &LossSpec,
        targets: ArrayView2<'_, f64>,
    ) -> Result<f64> {
        let out = trace.output();
        if targets.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "targets {:?} vs outputs {:?}",
                targets.dim(),
                out.dim()
            )));
        }
        if targets.iter().any(|t| t.is_nan()) {
            return Err(Error::Numeric("NaN target".into()));
        }
        let total: f64 = out
            .iter()
            .zip(targets.iter())
            .map(|(&p, &t)| loss.value_unchecked(p, t))
            .sum();
        Ok(total / out.nrows() as f64)
    }

    fn accumulate_layer_grad(
        &self,
        l: usize,
        dz: &Array2<f64>,
        trace: &ForwardTrace,
        grad: &mut [f64],
    ) {
        let layer = &self.layers[l];
        let off = self.offsets[l];
        let nw = layer.output_dim * layer.input_dim;
        let width = self.primary_width(l);
        {
            let mut gw = ArrayViewMut2::from_shape(
                (layer.output_dim, layer.input_dim),
                &mut grad[off..off + nw],
            )
            .expect("weight block matches layer shape");
            general_mat_mul(
                1.0,
                &dz.t(),
                &trace.stages[l],
                1.0,
                &mut gw.slice_mut(s![.., ..width]),
            );
            if let Some(src) = layer.skip_from {
                general_mat_mul(
                    1.0,
                    &dz.t(),
                    &trace.stages[src],
                    1.0,
                    &mut gw.slice_mut(s![.., width..]),
                );
            }
        }
        for (g, d) in grad[off + nw..off + nw + layer.output_dim]
            .iter_mut()
            .zip(dz.sum_axis(Axis(0)).iter())
        {
            *g += d;
        }
    }

    /// Walk the layers backwards computing each layer's pre-activation delta
    /// (`dL/dz`, scaled by `scale`) and hand it to `visit`.
    pub(crate) fn backprop(
        &self,
        trace: &ForwardTrace,
        loss: &LossSpec,
        targets: ArrayView2<'_, f64>,
        scale: f64,
        want_input_grad: bool,
        mut visit: impl FnMut(usize, &Array2<f64>, &Self),
    ) -> Result<Option<Array2<f64>>> {
        self.check_trace(trace)?;
        let out = trace.output();
        if targets.dim() != out.dim() {
            return Err(Error::Shape(format!(
                "targets {:?} vs outputs {:?}",
                targets.dim(),
                out.dim()
            )));
        }
        let last = self.layers.len() - 1;
        let bce = matches!(loss, LossSpec::BinaryCrossEntropy);
        if bce && self.layers[last].activation != Activation::Sigmoid {
            return Err(Error::Contract(
                "binary cross-entropy needs a sigmoid output layer".into(),
            ));
        }

        let mut stage_grads: Vec<Option<Array2<f64>>> = vec![None; self.layers.len() + 1];
        let mut output_grad = Array2::<f64>::zeros(out.dim());
        for ((g, &p), &t) in output_grad.iter_mut().zip(out.iter()).zip(targets.iter()) {
            *g = scale
                * if bce {
                    LossSpec::logit_gradient(p, t)
                } else {
                    loss.prediction_gradient(p, t)
                };
        }
        stage_grads[last + 1] = Some(output_grad);

        for l in (0..=last).rev() {
            let layer = &self.layers[l];
            let dh = stage_grads[l + 1]
                .take()
                .expect("downstream gradient ready");
            let dz = if l == last && bce {
                dh
            } else {
                let mut dz = dh;
                match &trace.factors[l] {
                    LayerFactor::Scale(s) => {
                        if *s != 1.0 {
                            dz.mapv_inplace(|v| v * s);
                        }
                    }
                    LayerFactor::Shared(m) => apply_shared(&mut dz.view_mut(), m),
                    LayerFactor::Rows(keep) => {
                        for (v, &k) in dz.iter_mut().zip(keep) {
                            if !k {
                                *v = 0.0;
                            }
                        }
                    }
                }
                let act = layer.activation;
                let z = &trace.pre_activations[l];
                ndarray::Zip::from(&mut dz).and(z).for_each(|d, &zv| {
                    let a = act.apply(zv);
                    *d *= act.derivative(zv, a);
                });
                dz
            };

            visit(l, &dz, self);

            if l == 0 && !want_input_grad {
                break;
            }
            let w = self.weights(l);
            let width = self.primary_width(l);
            let primary = dz.dot(&w.slice(s![.., ..width]));
            add_into(&mut stage_grads[l], primary);
            if let Some(src) = layer.skip_from {
                let skip = dz.dot(&w.slice(s![.., width..]));
                add_into(&mut stage_grads[src], skip);
            }
        }
        Ok(if want_input_grad {
            stage_grads[0].take()
        } else {
            None
        })
    }
}

fn add_into(slot: &mut Option<Array2<f64>>, value: Array2<f64>) {
    match slot {
        Some(existing) => *existing += &value,
        None => *slot = Some(value),
    }
}

fn apply_shared(h: &mut ArrayViewMut2<'_, f64>, mask: &[bool]) {
    for mut row in h.rows_mut() {
        for (v, &k) in row.iter_mut().zip(mask) {
            if !k {
                *v = 0.0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::mlp_layers;
    use ndarray::array;

    fn small_net(seed: u64) -> MlpNetwork {
        MlpNetwork::new(
            mlp_layers(2, &[16], 1, Activation::Relu, Activation::Sigmoid, 0.3),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn zero_weights_give_half_under_sigmoid() {
        let layers = mlp_layers(3, &[4, 4], 1, Activation::Relu, Activation::Sigmoid, 0.0);
        let n = MlpNetwork::new(layers.clone(), 1).unwrap().param_count();
        let net = MlpNetwork::from_params(layers, vec![0.0; n], 1).unwrap();
        let (out, _) = net.forward(&[0.3, -2.0, 7.0], Dropout::Eval).unwrap();
        assert_eq!(out, vec![0.5]);
    }

    #[test]
    fn all_ones_mask_matches_eval_without_dropout() {
        let layers = mlp_layers(2, &[8, 8], 1, Activation::Relu, Activation::Sigmoid, 0.0);
        let net = MlpNetwork::new(layers.clone(), 4).unwrap();
        let mask = DropoutMask::all_ones(&layers);
        let (a, _) = net.forward(&[0.1, 0.9], Dropout::Eval).unwrap();
        let (b, _) = net.forward(&[0.1, 0.9], Dropout::Mask(&mask)).unwrap();
        assert_eq!(a[0].to_bits(), b[0].to_bits());
    }

    #[test]
    fn masked_units_output_zero() {
        let net = small_net(2);
        let mask = DropoutMask::sample(net.layers(), 11);
        let trace = net
            .forward_batch(array![[0.3, 0.4], [-1.0, 2.0]].view(), Dropout::Mask(&mask))
            .unwrap();
        for (j, &k) in mask.layer(0).iter().enumerate() {
            if !k {
                assert!(trace.stage(1).column(j).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn dimension_mismatch_is_a_shape_error() {
        let net = small_net(1);
        assert!(matches!(
            net.forward(&[1.0, 2.0, 3.0], Dropout::Eval),
            Err(Error::Shape(_))
        ));
        assert!(matches!(
            net.forward(&[1.0, f64::INFINITY], Dropout::Eval),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn stale_trace_is_rejected() {
        let mut net = small_net(1);
        let (_, trace) = net.forward(&[0.1, 0.2], Dropout::Eval).unwrap();
        net.params_mut()[0] += 1.0;
        let t = array![[1.0]];
        assert!(matches!(
            net.backward(&trace, &LossSpec::BinaryCrossEntropy, t.view()),
            Err(Error::StaleTrace)
        ));
        let other = small_net(1);
        let (_, trace) = other.forward(&[0.1, 0.2], Dropout::Eval).unwrap();
        assert!(matches!(
            net.backward(&trace, &LossSpec::BinaryCrossEntropy, t.view()),
            Err(Error::StaleTrace)
        ));
    }

    #[test]
    fn l2_at_target_gives_zero_output_bias_gradient() {
        let layers = mlp_layers(2, &[6], 1, Activation::Relu, Activation::Linear, 0.0);
        let net = MlpNetwork::new(layers, 3).unwrap();
        let (out, trace) = net.forward(&[0.2, -0.4], Dropout::Eval).unwrap();
        let target = Array2::from_shape_vec((1, 1), out).unwrap();
        let (grad, value) = net.backward(&trace, &LossSpec::L2, target.view()).unwrap();
        assert_eq!(value, 0.0);
        assert_eq!(grad[net.bias_index(1, 0)], 0.0);
    }

    #[test]
    fn bce_at_half_reports_ln2() {
        let layers = mlp_layers(1, &[], 1, Activation::Relu, Activation::Sigmoid, 0.0);
        let net = MlpNetwork::from_params(layers, vec![0.0, 0.0], 0).unwrap();
        let (_, trace) = net.forward(&[1.0], Dropout::Eval).unwrap();
        let (_, value) = net
            .backward(&trace, &LossSpec::BinaryCrossEntropy, array![[1.0]].view())
            .unwrap();
        assert!((value - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn skip_connection_must_point_backwards() {
        let layers = vec![
            LayerSpec::new(2, 4, Activation::Relu),
            LayerSpec::new(6, 4, Activation::Relu).with_skip(0),
            LayerSpec::new(4, 1, Activation::Linear),
        ];
        MlpNetwork::new(layers, 0).unwrap();
        let bad = vec![
            LayerSpec::new(2, 4, Activation::Relu),
            LayerSpec::new(8, 4, Activation::Relu).with_skip(1),
            LayerSpec::new(4, 1, Activation::Linear),
        ];
        assert!(MlpNetwork::new(bad, 0).is_err());
        let wrong_width = vec![
            LayerSpec::new(2, 4, Activation::Relu),
            LayerSpec::new(4, 4, Activation::Relu).with_skip(0),
            LayerSpec::new(4, 1, Activation::Linear),
        ];
        assert!(matches!(
            MlpNetwork::new(wrong_width, 0),
            Err(Error::Shape(_))
        ));
    }
}
