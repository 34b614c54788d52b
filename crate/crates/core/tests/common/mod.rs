//! Independent oracles shared by the property and acceptance suites.
#![allow(dead_code)]

use dropsembles::nn::{Activation, Dropout, LayerSpec, LossSpec, MlpNetwork, TrainingData};
use dropsembles::raster::BinaryMask;
use dropsembles::rng::{rng_from_seed, Rng};
use ndarray::Array2;
use rand::Rng as _;

/// A random dense network: `depth` layers (hidden plus head), hidden widths in
/// 2..=8, optional skip from the input into a middle layer.
pub fn random_network(seed: u64, depth: usize, sine: bool, head: Activation) -> MlpNetwork {
    let mut rng = rng_from_seed(seed);
    let input = rng.random_range(1..=3);
    let hidden = if sine {
        Activation::sine()
    } else {
        Activation::Relu
    };
    let mut layers = Vec::with_capacity(depth);
    let mut prev = input;
    let skip_at = (depth >= 4).then_some(depth / 2);
    for l in 0..depth {
        let out = if l + 1 == depth {
            1
        } else {
            rng.random_range(2..=8)
        };
        let act = if l + 1 == depth { head } else { hidden };
        let mut spec = LayerSpec::new(prev, out, act);
        if Some(l) == skip_at {
            spec = spec.with_skip(0);
            spec.input_dim = prev + input;
        }
        if l + 1 < depth {
            spec = spec.with_dropout(0.25);
        }
        layers.push(spec);
        prev = out;
    }
    MlpNetwork::new(layers, seed ^ 0x5eed).expect("valid layers")
}

pub fn random_data(rng: &mut Rng, rows: usize, input: usize, binary: bool) -> TrainingData {
    let x = Array2::from_shape_fn((rows, input), |_| rng.random_range(-1.0..1.0));
    let y = Array2::from_shape_fn((rows, 1), |_| {
        if binary {
            f64::from(u8::from(rng.random::<bool>()))
        } else {
            rng.random_range(-1.0..1.0)
        }
    });
    TrainingData::new(x, y).expect("matching rows")
}

fn loss_at(net: &MlpNetwork, params: &[f64], data: &TrainingData, loss: &LossSpec) -> f64 {
    let mut probe = net.clone();
    probe.set_params(params).unwrap();
    let trace = probe
        .forward_batch(data.inputs.view(), Dropout::Eval)
        .unwrap();
    probe.loss_value(&trace, loss, data.targets.view()).unwrap()
}

/// Largest relative discrepancy between backprop and finite differences.
/// Each coordinate is compared against several difference estimates and keeps
/// the closest: small steps suffer roundoff, larger steps can straddle a ReLU
/// kink, and a wrong gradient disagrees with all of them. The denominator is
/// floored at 1e-6 so vanishing gradients compare absolutely.
pub fn gradient_check(net: &MlpNetwork, data: &TrainingData, loss: &LossSpec) -> f64 {
    let trace = net
        .forward_batch(data.inputs.view(), Dropout::Eval)
        .unwrap();
    let (grad, _) = net.backward(&trace, loss, data.targets.view()).unwrap();
    let base = net.params().to_vec();
    let at = |j: usize, step: f64| {
        let mut p = base.clone();
        p[j] += step;
        loss_at(net, &p, data, loss)
    };
    let central = |j: usize, h: f64| (at(j, h) - at(j, -h)) / (2.0 * h);
    let fourth = |j: usize, h: f64| {
        (8.0 * (at(j, h) - at(j, -h)) - (at(j, 2.0 * h) - at(j, -2.0 * h))) / (12.0 * h)
    };
    let mut worst: f64 = 0.0;
    for (j, &g) in grad.iter().enumerate() {
        let rel = [central(j, 1e-5), central(j, 1e-6), fourth(j, 1e-5)]
            .into_iter()
            .map(|fd| (g - fd).abs() / g.abs().max(fd.abs()).max(1e-6))
            .fold(f64::INFINITY, f64::min);
        worst = worst.max(rel);
    }
    worst
}

/// Mean over samples of the squared single-sample loss gradient.
pub fn brute_force_fisher(net: &MlpNetwork, data: &TrainingData, loss: &LossSpec) -> Vec<f64> {
    let mut sums = vec![0.0; net.param_count()];
    for i in 0..data.len() {
        let x = data.inputs.row(i).to_owned().insert_axis(ndarray::Axis(0));
        let y = data.targets.row(i).to_owned().insert_axis(ndarray::Axis(0));
        let trace = net.forward_batch(x.view(), Dropout::Eval).unwrap();
        let (g, _) = net.backward(&trace, loss, y.view()).unwrap();
        for (s, v) in sums.iter_mut().zip(g) {
            *s += v * v;
        }
    }
    sums.iter().map(|s| s / data.len() as f64).collect()
}

/// `lambda * sum F (theta - anchor)^2` and its gradient, one coordinate at a time.
pub fn naive_ewc(theta: &[f64], anchor: &[f64], fisher: &[f64], lambda: f64) -> (f64, Vec<f64>) {
    let mut value = 0.0;
    let mut grad = Vec::with_capacity(theta.len());
    for j in 0..theta.len() {
        let d = theta[j] - anchor[j];
        value += fisher[j] * d * d;
        grad.push(2.0 * lambda * fisher[j] * d);
    }
    (lambda * value, grad)
}

/// ECE by walking the bins and scanning every sample for membership in
/// `(b/n, (b+1)/n]` (bin 0 also takes confidence 0).
pub fn brute_force_ece(probs: &[f64], labels: &[bool], n_bins: usize) -> f64 {
    let total = probs.len() as f64;
    let mut ece = 0.0;
    for b in 0..n_bins {
        let lo = b as f64 / n_bins as f64;
        let hi = (b + 1) as f64 / n_bins as f64;
        let mut conf_sum = 0.0;
        let mut hits = 0usize;
        let mut count = 0usize;
        for (&p, &y) in probs.iter().zip(labels) {
            let conf = p.max(1.0 - p);
            let inside = conf <= hi && (conf > lo || (b == 0 && conf == 0.0));
            if inside {
                conf_sum += conf;
                count += 1;
                hits += usize::from((p >= 0.5) == y);
            }
        }
        if count > 0 {
            let gap = (hits as f64 / count as f64 - conf_sum / count as f64).abs();
            ece += count as f64 / total * gap;
        }
    }
    ece
}

/// Symmetric Hausdorff distance by comparing every pair of foreground pixels.
pub fn brute_force_hausdorff(a: &BinaryMask, b: &BinaryMask) -> f64 {
    let directed = |x: &BinaryMask, y: &BinaryMask| {
        let ys = y.ones();
        x.ones()
            .iter()
            .map(|&(r, c)| {
                ys.iter()
                    .map(|&(s, d)| {
                        ((r as f64 - s as f64).powi(2) + (c as f64 - d as f64).powi(2)).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    directed(a, b).max(directed(b, a))
}

pub fn random_mask(rng: &mut Rng, size: usize, density: f64) -> BinaryMask {
    BinaryMask::from_fn(size, size, |_, _| rng.random::<f64>() < density)
}
