use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;

use crate::error::{Error, Result};
use crate::nn::{OptimizerKind, OptimizerState, Schedule, BCE_EPS};
use crate::oracle::{LatentCode, LatentSource};
use crate::raster::BinaryMask;
use crate::rng::{derive_seed, rng_from_seed, Stream};
use crate::textdoc::{sha256_hex, TextDoc};

pub const ENCODER_KIND: &str = "dropsembles-encoder";
pub const ENCODER_VERSION: u32 = 1;

const KERNEL: usize = 3;
const PAD: usize = 1;

/// One 3x3 convolution with padding 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub stride: usize,
}

impl ConvSpec {
    fn weight_len(&self) -> usize {
        self.out_channels * self.in_channels * KERNEL * KERNEL
    }

    fn param_len(&self) -> usize {
        self.weight_len() + self.out_channels
    }

    fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        (
            (h + 2 * PAD - KERNEL) / self.stride + 1,
            (w + 2 * PAD - KERNEL) / self.stride + 1,
        )
    }
}

/// Three-layer convolutional encoder with global average pooling.
///
/// The first two convolutions use ReLU, the last is linear; the pooled output
/// of the last layer is the latent code.
#[derive(Debug, Clone, PartialEq)]
pub struct EncoderModel {
    height: usize,
    width: usize,
    convs: Vec<ConvSpec>,
    params: Vec<f64>,
    /// Per-dimension standardization of pooled features, fitted on the
    /// training rasters when the encoder is frozen.
    code_mean: Vec<f64>,
    code_scale: Vec<f64>,
    frozen: bool,
}

struct Activations {
    /// Input and the output of every conv layer, channel-major.
    maps: Vec<Vec<f64>>,
    dims: Vec<(usize, usize)>,
}

fn conv_forward(
    spec: &ConvSpec,
    params: &[f64],
    input: &[f64],
    h: usize,
    w: usize,
) -> (Vec<f64>, usize, usize) {
    let (ho, wo) = spec.out_dims(h, w);
    let (wts, bias) = params.split_at(spec.weight_len());
    let mut out = vec![0.0; spec.out_channels * ho * wo];
    for co in 0..spec.out_channels {
        for oy in 0..ho {
            for ox in 0..wo {
                let mut acc = bias[co];
                for ci in 0..spec.in_channels {
                    let kbase = (co * spec.in_channels + ci) * KERNEL * KERNEL;
                    for ky in 0..KERNEL {
                        let iy = (oy * spec.stride + ky) as isize - PAD as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..KERNEL {
                            let ix = (ox * spec.stride + kx) as isize - PAD as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            acc += wts[kbase + ky * KERNEL + kx]
                                * input[(ci * h + iy as usize) * w + ix as usize];
                        }
                    }
                }
                out[(co * ho + oy) * wo + ox] = acc;
            }
        }
    }
    (out, ho, wo)
}

#[allow(clippy::too_many_arguments)]
fn conv_backward(
    spec: &ConvSpec,
    params: &[f64],
    input: &[f64],
    h: usize,
    w: usize,
    dout: &[f64],
    grad: &mut [f64],
    mut dinput: Option<&mut [f64]>,
) {
    let (ho, wo) = spec.out_dims(h, w);
    let wlen = spec.weight_len();
    for co in 0..spec.out_channels {
        for oy in 0..ho {
            for ox in 0..wo {
                let d = dout[(co * ho + oy) * wo + ox];
                if d == 0.0 {
                    continue;
                }
                grad[wlen + co] += d;
                for ci in 0..spec.in_channels {
                    let kbase = (co * spec.in_channels + ci) * KERNEL * KERNEL;
                    for ky in 0..KERNEL {
                        let iy = (oy * spec.stride + ky) as isize - PAD as isize;
                        if iy < 0 || iy >= h as isize {
                            continue;
                        }
                        for kx in 0..KERNEL {
                            let ix = (ox * spec.stride + kx) as isize - PAD as isize;
                            if ix < 0 || ix >= w as isize {
                                continue;
                            }
                            let at = (ci * h + iy as usize) * w + ix as usize;
                            grad[kbase + ky * KERNEL + kx] += d * input[at];
                            if let Some(di) = dinput.as_deref_mut() {
                                di[at] += d * params[kbase + ky * KERNEL + kx];
                            }
                        }
                    }
                }
            }
        }
    }
}

/// Autoencoder training settings.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleTraining {
    pub latent_dim: usize,
    pub hidden_channels: (usize, usize),
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl OracleTraining {
    pub fn new(latent_dim: usize, seed: u64) -> Self {
        OracleTraining {
            latent_dim,
            hidden_channels: (8, 16),
            epochs: 50,
            learning_rate: 0.01,
            batch_size: 16,
            seed,
        }
    }
}

impl EncoderModel {
    pub fn new(
        height: usize,
        width: usize,
        latent_dim: usize,
        hidden: (usize, usize),
        seed: u64,
    ) -> Result<Self> {
        if height == 0 || width == 0 || latent_dim == 0 || hidden.0 == 0 || hidden.1 == 0 {
            return Err(Error::Argument(
                "encoder dimensions must be positive".into(),
            ));
        }
        let convs = vec![
            ConvSpec {
                in_channels: 1,
                out_channels: hidden.0,
                stride: 2,
            },
            ConvSpec {
                in_channels: hidden.0,
                out_channels: hidden.1,
                stride: 2,
            },
            ConvSpec {
                in_channels: hidden.1,
                out_channels: latent_dim,
                stride: 1,
            },
        ];
        let mut rng = rng_from_seed(seed);
        let mut params = Vec::new();
        for c in &convs {
            let bound = 1.0 / ((c.in_channels * KERNEL * KERNEL) as f64).sqrt();
            params.extend((0..c.param_len()).map(|_| rng.random_range(-bound..bound)));
        }
        Ok(EncoderModel {
            height,
            width,
            convs,
            params,
            code_mean: vec![0.0; latent_dim],
            code_scale: vec![1.0; latent_dim],
            frozen: false,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn latent_dim(&self) -> usize {
        self.convs[2].out_channels
    }

    pub fn convs(&self) -> &[ConvSpec] {
        &self.convs
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn freeze(&mut self) {
        self.frozen = true;
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if self.frozen {
            return Err(Error::Frozen);
        }
        if params.len() != self.params.len() {
            return Err(Error::Shape("encoder parameter count mismatch".into()));
        }
        self.params.copy_from_slice(params);
        Ok(())
    }

    /// Stable identifier derived from the weights.
    pub fn id(&self) -> String {
        let bytes: Vec<u8> = self
            .params
            .iter()
            .chain(&self.code_mean)
            .chain(&self.code_scale)
            .flat_map(|v| v.to_bits().to_le_bytes())
            .collect();
        format!("conv-{}", &sha256_hex(&bytes)[..16])
    }

    fn layer_params(&self, l: usize) -> &[f64] {
        let start: usize = self.convs[..l].iter().map(ConvSpec::param_len).sum();
        &self.params[start..start + self.convs[l].param_len()]
    }

    fn forward(&self, image: &[f64]) -> Activations {
        let mut maps = vec![image.to_vec()];
        let mut dims = vec![(self.height, self.width)];
        for (l, spec) in self.convs.iter().enumerate() {
            let (h, w) = dims[l];
            let (mut out, ho, wo) = conv_forward(spec, self.layer_params(l), &maps[l], h, w);
            if l + 1 < self.convs.len() {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            maps.push(out);
            dims.push((ho, wo));
        }
        Activations { maps, dims }
    }

    fn pooled(&self, acts: &Activations) -> Vec<f64> {
        let (h, w) = *acts.dims.last().unwrap();
        let last = acts.maps.last().unwrap();
        (0..self.latent_dim())
            .map(|c| last[c * h * w..(c + 1) * h * w].iter().sum::<f64>() / (h * w) as f64)
            .collect()
    }

    fn check_raster(&self, raster: &BinaryMask) -> Result<()> {
        if raster.dims() != (self.height, self.width) {
            return Err(Error::Shape(format!(
                "encoder expects {}x{} rasters, got {:?}",
                self.height,
                self.width,
                raster.dims()
            )));
        }
        Ok(())
    }

    /// Latent code of one occupancy raster.
    pub fn encode(&self, raster: &BinaryMask) -> Result<LatentCode> {
        if !self.frozen {
            return Err(Error::Contract("encode requires a frozen encoder".into()));
        }
        self.check_raster(raster)?;
        let image: Vec<f64> = raster
            .as_slice()
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect();
        let code = self
            .pooled(&self.forward(&image))
            .iter()
            .zip(self.code_mean.iter().zip(&self.code_scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        LatentCode::new(code, LatentSource::PooledConv)
    }

    /// Fit the code standardization to `images` (one flattened raster each).
    fn fit_standardization(&mut self, images: &[Vec<f64>]) {
        let codes: Vec<Vec<f64>> = images
            .iter()
            .map(|im| self.pooled(&self.forward(im)))
            .collect();
        let n = codes.len() as f64;
        for k in 0..self.latent_dim() {
            let mean = codes.iter().map(|c| c[k]).sum::<f64>() / n;
            let var = codes.iter().map(|c| (c[k] - mean).powi(2)).sum::<f64>() / n;
            self.code_mean[k] = mean;
            self.code_scale[k] = if var.sqrt() > 1e-8 { var.sqrt() } else { 1.0 };
        }
    }

    pub fn to_doc(&self) -> TextDoc {
        let mut doc = TextDoc::new(ENCODER_KIND, ENCODER_VERSION);
        doc.field("height", self.height)
            .field("width", self.width)
            .field("frozen", self.frozen)
            .field("convs", self.convs.len());
        for (i, c) in self.convs.iter().enumerate() {
            doc.field(
                &format!("conv.{i}"),
                format!(
                    "in={} out={} kernel={KERNEL} stride={}",
                    c.in_channels, c.out_channels, c.stride
                ),
            );
        }
        doc.array("params", &self.params)
            .array("code_mean", &self.code_mean)
            .array("code_scale", &self.code_scale);
        doc
    }

    pub fn from_doc(doc: &TextDoc) -> Result<Self> {
        doc.expect_kind(ENCODER_KIND, ENCODER_VERSION)?;
        let count: usize = doc.parse_field("convs")?;
        let mut convs = Vec::with_capacity(count);
        for i in 0..count {
            let line = doc.require(&format!("conv.{i}"))?;
            let bad = || Error::Argument(format!("bad conv spec `{line}`"));
            let mut vals = [0usize; 4];
            for (slot, part) in vals.iter_mut().zip(line.split_whitespace()) {
                *slot = part
                    .split_once('=')
                    .and_then(|(_, v)| v.parse().ok())
                    .ok_or_else(bad)?;
            }
            if vals[2] != KERNEL {
                return Err(bad());
            }
            convs.push(ConvSpec {
                in_channels: vals[0],
                out_channels: vals[1],
                stride: vals[3],
            });
        }
        let params = doc.require_array("params")?.to_vec();
        if params.len() != convs.iter().map(ConvSpec::param_len).sum::<usize>() {
            return Err(Error::Shape(
                "encoder parameter count does not match conv specs".into(),
            ));
        }
        let latent = convs.last().map_or(0, |c| c.out_channels);
        if doc.require_array("code_mean")?.len() != latent
            || doc.require_array("code_scale")?.len() != latent
        {
            return Err(Error::Shape(
                "code standardization does not match the latent size".into(),
            ));
        }
        Ok(EncoderModel {
            height: doc.parse_field("height")?,
            width: doc.parse_field("width")?,
            convs,
            params,
            code_mean: doc.require_array("code_mean")?.to_vec(),
            code_scale: doc.require_array("code_scale")?.to_vec(),
            frozen: doc.parse_field("frozen")?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_doc().write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&TextDoc::read_from(path)?)
    }
}

/// Train the encoder as an autoencoder (linear decoder to per-pixel logits,
/// binary cross-entropy), discard the decoder and freeze the encoder.
pub fn train_oracle(rasters: &[BinaryMask], config: &OracleTraining) -> Result<EncoderModel> {
    let first = rasters
        .first()
        .ok_or_else(|| Error::Argument("oracle training needs at least one raster".into()))?;
    let (h, w) = first.dims();
    if rasters.iter().any(|r| r.dims() != (h, w)) {
        return Err(Error::Shape("oracle rasters differ in size".into()));
    }
    if config.epochs == 0 || config.batch_size == 0 {
        return Err(Error::Argument(
            "oracle epochs and batch size must be positive".into(),
        ));
    }
    let mut enc = EncoderModel::new(
        h,
        w,
        config.latent_dim,
        config.hidden_channels,
        derive_seed(config.seed, Stream::Oracle, 0),
    )?;
    let dz = config.latent_dim;
    let pixels = h * w;
    let enc_len = enc.params.len();
    let mut rng = rng_from_seed(derive_seed(config.seed, Stream::Oracle, 1));
    let bound = 1.0 / (dz as f64).sqrt();
    // Decoder: weights (pixels, dz) row-major, then per-pixel bias.
    let mut params = enc.params.clone();
    params.extend((0..pixels * dz + pixels).map(|_| rng.random_range(-bound..bound)));

    let images: Vec<Vec<f64>> = rasters
        .iter()
        .map(|r| {
            r.as_slice()
                .iter()
                .map(|&b| if b { 1.0 } else { 0.0 })
                .collect()
        })
        .collect();
    let n = images.len();
    let batch = config.batch_size.min(n);
    let steps = n.div_ceil(batch);
    let mut opt = OptimizerState::new(
        OptimizerKind::adam(),
        config.learning_rate,
        Schedule::cosine_warmup(),
    )?;
    opt.begin((steps * config.epochs) as u64, steps as u64);
    let mut order: Vec<usize> = (0..n).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng_from_seed(derive_seed(
            config.seed,
            Stream::Shuffle,
            epoch as u64,
        )));
        for chunk in order.chunks(batch) {
            enc.params.copy_from_slice(&params[..enc_len]);
            let mut grad = vec![0.0; params.len()];
            let mut total = 0.0;
            let scale = 1.0 / (chunk.len() * pixels) as f64;
            for &i in chunk {
                let acts = enc.forward(&images[i]);
                let code = enc.pooled(&acts);
                let (dec_w, dec_b) = params[enc_len..].split_at(pixels * dz);
                let mut dcode = vec![0.0; dz];
                for p in 0..pixels {
                    let row = &dec_w[p * dz..(p + 1) * dz];
                    let logit = dec_b[p] + row.iter().zip(&code).map(|(a, b)| a * b).sum::<f64>();
                    let prob = crate::nn::sigmoid(logit).clamp(BCE_EPS, 1.0 - BCE_EPS);
                    let y = images[i][p];
                    total -= y * prob.ln() + (1.0 - y) * (1.0 - prob).ln();
                    let d = (crate::nn::sigmoid(logit) - y) * scale;
                    let gw = &mut grad[enc_len + p * dz..enc_len + (p + 1) * dz];
                    for k in 0..dz {
                        gw[k] += d * code[k];
                        dcode[k] += d * row[k];
                    }
                    grad[enc_len + pixels * dz + p] += d;
                }
                // Back through pooling and the conv stack.
                let (h3, w3) = *acts.dims.last().unwrap();
                let mut dmap: Vec<f64> = (0..dz)
                    .flat_map(|c| std::iter::repeat_n(dcode[c] / (h3 * w3) as f64, h3 * w3))
                    .collect();
                let mut offset = enc_len;
                for l in (0..enc.convs.len()).rev() {
                    let spec = enc.convs[l];
                    offset -= spec.param_len();
                    let (hi, wi) = acts.dims[l];
                    let mut dinput = if l > 0 {
                        Some(vec![0.0; acts.maps[l].len()])
                    } else {
                        None
                    };
                    conv_backward(
                        &spec,
                        enc.layer_params(l),
                        &acts.maps[l],
                        hi,
                        wi,
                        &dmap,
                        &mut grad[offset..offset + spec.param_len()],
                        dinput.as_deref_mut(),
                    );
                    if let Some(mut di) = dinput {
                        // Layer l-1 output passed through ReLU.
                        for (d, &a) in di.iter_mut().zip(&acts.maps[l]) {
                            if a <= 0.0 {
                                *d = 0.0;
                            }
                        }
                        dmap = di;
                    }
                }
            }
            if !total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::TrainingDiverged {
                    epoch,
                    member_seed: None,
                });
            }
            opt.step(&mut params, &grad, None)?;
        }
    }
    enc.params.copy_from_slice(&params[..enc_len]);
    enc.fit_standardization(&images);
    enc.freeze();
    Ok(enc)
}
