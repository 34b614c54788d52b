//! Experiment configuration: a TOML file whose keys overlay per-experiment
//! defaults. Unknown keys, and keys that do not apply to the chosen
//! experiment, are rejected with their line and column.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{config_hash, ShapeFamily};
use crate::error::{Error, Result};
use crate::nn::{mlp_layers, Activation, LayerSpec, LossSpec, OptimizerKind, Schedule, TrainPhase};
use crate::oracle::SparseFill;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Experiment {
    #[serde(rename = "toy")]
    Toy,
    #[serde(rename = "grid-recon")]
    GridRecon,
    #[serde(rename = "sdf-2d")]
    Sdf2d,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Toy => "toy",
            Experiment::GridRecon => "grid-recon",
            Experiment::Sdf2d => "sdf-2d",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "toy" => Ok(Experiment::Toy),
            "grid-recon" => Ok(Experiment::GridRecon),
            "sdf-2d" => Ok(Experiment::Sdf2d),
            _ => Err(Error::Argument(format!("unknown experiment `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "mc-dropout")]
    McDropout,
    #[serde(rename = "dropsembles")]
    Dropsembles,
    #[serde(rename = "deep-ensemble")]
    DeepEnsemble,
    /// MC dropout on the Task-A network without fine-tuning.
    #[serde(rename = "baseline-no-finetune")]
    BaselineNoFinetune,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::BaselineNoFinetune,
        Method::McDropout,
        Method::Dropsembles,
        Method::DeepEnsemble,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::McDropout => "mc-dropout",
            Method::Dropsembles => "dropsembles",
            Method::DeepEnsemble => "deep-ensemble",
            Method::BaselineNoFinetune => "baseline-no-finetune",
        }
    }

    /// Whether the method reuses the shared dropout-trained Task-A network.
    pub fn uses_shared_task_a(self) -> bool {
        !matches!(self, Method::DeepEnsemble)
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::Argument(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HiddenActivation {
    Relu,
    Siren,
}

impl std::str::FromStr for HiddenActivation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(HiddenActivation::Relu),
            "siren" | "sine" => Ok(HiddenActivation::Siren),
            _ => Err(Error::Argument(format!("unknown activation `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Constant,
    CosineWarmup,
    Step,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatentKind {
    PooledConv,
    PerShapeTable,
}

/// Optimization settings of one training phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub schedule: ScheduleKind,
    /// Epochs between learning-rate halvings for the step schedule.
    pub step_every: usize,
    /// `None` trains full batch.
    pub batch_size: Option<usize>,
}

impl PhaseConfig {
    pub fn to_phase(&self, loss: LossSpec) -> TrainPhase {
        let schedule = match self.schedule {
            ScheduleKind::Constant => Schedule::Constant,
            ScheduleKind::CosineWarmup => Schedule::cosine_warmup(),
            ScheduleKind::Step => Schedule::Step {
                every_epochs: self.step_every.max(1),
                gamma: 0.5,
            },
        };
        TrainPhase {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            optimizer: OptimizerKind::adam(),
            schedule,
            batch_size: self.batch_size,
            loss,
        }
    }
}

/// Generator settings. Only the fields of the chosen experiment are used.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DataConfig {
    pub n_train_a: usize,
    pub n_test_a: usize,
    pub n_train_b: usize,
    pub n_test_b: usize,
    pub noise_sigma: f64,
    /// Task-A glyph images.
    pub n_images_a: usize,
    /// Independent Task-B images or shapes.
    pub n_images_b: usize,
    pub grid_stride: usize,
    pub rotate_degrees: f64,
    pub occlude_fraction: f64,
    pub fill: SparseFill,
    pub family: ShapeFamily,
    pub n_shapes_a: usize,
    pub resolution: usize,
    pub erosion: usize,
    /// Near-boundary Task-A samples per shape.
    pub surface_samples: usize,
    /// Optional IDX image/label files; sevens replace the synthetic glyphs.
    pub idx_images: Option<PathBuf>,
    pub idx_labels: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleConfig {
    pub latent: LatentKind,
    pub latent_dim: usize,
    pub epochs: usize,
    pub learning_rate: f64,
}

/// Fully resolved experiment settings.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub method: Method,
    pub seeds: Vec<u64>,
    pub ewc_lambda: f64,
    pub members: usize,
    pub mc_samples: usize,
    pub per_member_fisher: bool,
    pub dropout_p: f64,
    pub activation: HiddenActivation,
    pub hidden_width: usize,
    pub layers: usize,
    pub task_a: PhaseConfig,
    pub task_b: PhaseConfig,
    pub data: DataConfig,
    pub oracle: OracleConfig,
    pub n_bins: usize,
    /// Concurrent member jobs; 1 runs sequentially.
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let data = DataConfig {
            n_train_a: 1000,
            n_test_a: 500,
            n_train_b: 50,
            n_test_b: 500,
            noise_sigma: 0.15,
            n_images_a: 200,
            n_images_b: 20,
            grid_stride: 3,
            rotate_degrees: 15.0,
            occlude_fraction: 0.15,
            fill: SparseFill::Zero,
            family: ShapeFamily::Airfoil,
            n_shapes_a: 32,
            resolution: 32,
            erosion: 1,
            surface_samples: 1024,
            idx_images: None,
            idx_labels: None,
        };
        let phase = |epochs, learning_rate, schedule, batch_size| PhaseConfig {
            epochs,
            learning_rate,
            schedule,
            step_every: 40,
            batch_size,
        };
        let base = ExperimentConfig {
            experiment,
            method: Method::Dropsembles,
            seeds: vec![1, 2, 3],
            ewc_lambda: 0.0,
            members: 4,
            mc_samples: 100,
            per_member_fisher: true,
            dropout_p: 0.3,
            activation: HiddenActivation::Relu,
            hidden_width: 256,
            layers: 3,
            task_a: phase(800, 1e-3, ScheduleKind::Constant, None),
            task_b: phase(600, 5e-3, ScheduleKind::Constant, None),
            data,
            oracle: OracleConfig {
                latent: LatentKind::PooledConv,
                latent_dim: 16,
                epochs: 50,
                learning_rate: 0.01,
            },
            n_bins: 10,
            workers: 1,
        };
        match experiment {
            Experiment::Toy => base,
            Experiment::GridRecon => ExperimentConfig {
                hidden_width: 64,
                layers: 8,
                task_a: phase(50, 5e-3, ScheduleKind::CosineWarmup, Some(256)),
                task_b: phase(30, 5e-3, ScheduleKind::CosineWarmup, Some(256)),
                ..base
            },
            Experiment::Sdf2d => ExperimentConfig {
                hidden_width: 64,
                layers: 8,
                dropout_p: 0.2,
                task_a: phase(100, 1e-3, ScheduleKind::Step, Some(256)),
                task_b: phase(75, 1e-4, ScheduleKind::Constant, Some(256)),
                oracle: OracleConfig {
                    latent_dim: 64,
                    ..base.oracle
                },
                data: DataConfig {
                    n_images_b: 10,
                    ..base.data
                },
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Argument(m));
        if self.seeds.is_empty() {
            return fail("at least one seed is required".into());
        }
        if self.members == 0 {
            return fail("members must be at least 1".into());
        }
        if self.mc_samples == 0 {
            return fail("mc_samples must be at least 1".into());
        }
        if !(self.ewc_lambda >= 0.0 && self.ewc_lambda.is_finite()) {
            return fail(format!(
                "ewc_lambda must be a finite nonnegative number, got {}",
                self.ewc_lambda
            ));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return fail(format!("dropout_p {} outside [0, 1)", self.dropout_p));
        }
        if self.layers < 2 || self.hidden_width == 0 {
            return fail("the decoder needs at least 2 layers and a positive width".into());
        }
        if self.experiment == Experiment::Sdf2d && self.layers < 6 {
            return fail("the SDF decoder needs at least 6 layers for its skip connection".into());
        }
        for (name, p) in [("task_a", &self.task_a), ("task_b", &self.task_b)] {
            if !(p.learning_rate > 0.0 && p.learning_rate.is_finite()) {
                return fail(format!("{name}.learning_rate must be positive"));
            }
            if p.batch_size == Some(0) {
                return fail(format!("{name}.batch_size must be positive"));
            }
        }
        if self.task_a.epochs == 0 {
            return fail("task_a.epochs must be at least 1".into());
        }
        let d = &self.data;
        match self.experiment {
            Experiment::Toy => {
                if [d.n_train_a, d.n_test_a, d.n_train_b, d.n_test_b].contains(&0) {
                    return fail("toy dataset sizes must be positive".into());
                }
                if d.noise_sigma.is_nan() || d.noise_sigma < 0.0 {
                    return fail("noise_sigma must be nonnegative".into());
                }
            }
            Experiment::GridRecon => {
                if d.n_images_a == 0 || d.n_images_b == 0 {
                    return fail("grid-recon needs images in both tasks".into());
                }
                if d.grid_stride < 2 {
                    return fail("grid_stride must be at least 2".into());
                }
                if !(0.0..=1.0).contains(&d.occlude_fraction) {
                    return fail("occlude_fraction outside [0, 1]".into());
                }
            }
            Experiment::Sdf2d => {
                if d.n_shapes_a == 0 || d.n_images_b == 0 {
                    return fail("sdf-2d needs shapes in both tasks".into());
                }
                if d.resolution < 32 {
                    return fail("resolution must be at least 32".into());
                }
            }
        }
        if self.experiment != Experiment::Toy && self.oracle.latent_dim == 0 {
            return fail("latent_dim must be positive".into());
        }
        if self.n_bins == 0 || self.workers == 0 {
            return fail("n_bins and workers must be positive".into());
        }
        Ok(())
    }

    /// Decoder input width.
    pub fn input_dim(&self) -> usize {
        match self.experiment {
            Experiment::Toy => 2,
            _ => 2 + self.oracle.latent_dim,
        }
    }

    /// Network architecture with the configured dropout.
    pub fn layers(&self) -> Vec<LayerSpec> {
        let hidden_act = match self.activation {
            HiddenActivation::Relu => Activation::Relu,
            HiddenActivation::Siren => Activation::sine(),
        };
        let width = self.hidden_width;
        let depth = self.layers - 1;
        match self.experiment {
            Experiment::Toy | Experiment::GridRecon => mlp_layers(
                self.input_dim(),
                &vec![width; depth],
                1,
                hidden_act,
                Activation::Sigmoid,
                self.dropout_p,
            ),
            Experiment::Sdf2d => {
                // Input re-enters at the fifth layer; sine networks keep dropout
                // only after the fourth and sixth layers.
                let d_in = self.input_dim();
                let mut layers = Vec::with_capacity(self.layers);
                for i in 0..depth {
                    let mut l = if i == 0 {
                        LayerSpec::new(d_in, width, hidden_act)
                    } else if i == 4 {
                        LayerSpec::new(width + d_in, width, hidden_act).with_skip(0)
                    } else {
                        LayerSpec::new(width, width, hidden_act)
                    };
                    let p = match self.activation {
                        HiddenActivation::Relu => self.dropout_p,
                        HiddenActivation::Siren if i == 3 || i == 5 => self.dropout_p,
                        HiddenActivation::Siren => 0.0,
                    };
                    l = l.with_dropout(p);
                    layers.push(l);
                }
                layers.push(LayerSpec::new(width, 1, Activation::Linear));
                layers
            }
        }
    }

    pub fn loss_a(&self) -> LossSpec {
        match self.experiment {
            Experiment::Sdf2d => LossSpec::ClippedL1 { delta: 0.1 },
            _ => LossSpec::BinaryCrossEntropy,
        }
    }

    pub fn loss_b(&self) -> LossSpec {
        match self.experiment {
            Experiment::Sdf2d => LossSpec::L1,
            _ => LossSpec::BinaryCrossEntropy,
        }
    }

    pub fn phase_a(&self) -> TrainPhase {
        self.task_a.to_phase(self.loss_a())
    }

    pub fn phase_b(&self) -> TrainPhase {
        self.task_b.to_phase(self.loss_b())
    }

    /// Canonical TOML of everything but the seeds and worker count.
    pub fn canonical(&self) -> String {
        let mut copy = self.clone();
        copy.seeds.clear();
        copy.workers = 1;
        toml::to_string(&copy).expect("config serializes")
    }

    /// Identity of the run directory.
    pub fn hash(&self) -> String {
        config_hash(&self.canonical())
    }

    /// Identity of the shared Task-A artifacts: data, oracle, architecture
    /// and Task-A optimization, but not the method or fine-tuning settings.
    pub fn task_a_hash(&self) -> String {
        let key = format!(
            "{}|{}|{:?}|{}|{}|{}",
            self.experiment.name(),
            toml::to_string(&self.data).expect("serializes"),
            self.activation,
            toml::to_string(&self.task_a).expect("serializes"),
            toml::to_string(&self.oracle).expect("serializes"),
            format_args!("{}x{}p{}", self.layers, self.hidden_width, self.dropout_p),
        );
        config_hash(&key)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| toml_error(text, &e))?;
        raw.resolve(text)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

fn line_col(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

fn toml_error(text: &str, e: &toml::de::Error) -> Error {
    let (line, column) = e.span().map_or((0, 0), |s| line_col(text, s.start));
    Error::Config {
        line,
        column,
        message: e.message().to_string(),
    }
}

/// Position of `key = ...` inside `[section]` (top level when `section` is empty).
fn key_position(text: &str, section: &str, key: &str) -> (usize, usize) {
    let mut current = String::new();
    for (i, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.starts_with('[') {
            current = trimmed
                .trim_matches(|c| c == '[' || c == ']')
                .trim()
                .to_string();
            continue;
        }
        let name = trimmed.split('=').next().unwrap_or("").trim();
        if current == section && name == key {
            return (i + 1, line.len() - line.trim_start().len() + 1);
        }
    }
    (0, 0)
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPhase {
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    schedule: Option<ScheduleKind>,
    step_every: Option<usize>,
    batch_size: Option<usize>,
    full_batch: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawModel {
    hidden_width: Option<usize>,
    layers: Option<usize>,
    dropout_p: Option<f64>,
    activation: Option<HiddenActivation>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEnsemble {
    members: Option<usize>,
    ewc_lambda: Option<f64>,
    mc_samples: Option<usize>,
    per_member_fisher: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawData {
    n_train_a: Option<usize>,
    n_test_a: Option<usize>,
    n_train_b: Option<usize>,
    n_test_b: Option<usize>,
    noise_sigma: Option<f64>,
    n_images_a: Option<usize>,
    n_images_b: Option<usize>,
    grid_stride: Option<usize>,
    rotate_degrees: Option<f64>,
    occlude_fraction: Option<f64>,
    fill: Option<String>,
    family: Option<String>,
    n_shapes_a: Option<usize>,
    resolution: Option<usize>,
    erosion: Option<usize>,
    surface_samples: Option<usize>,
    idx_images: Option<PathBuf>,
    idx_labels: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOracle {
    latent: Option<LatentKind>,
    latent_dim: Option<usize>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    workers: Option<usize>,
    n_bins: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Experiment,
    method: Option<Method>,
    seeds: Option<Vec<u64>>,
    #[serde(default)]
    model: RawModel,
    #[serde(default)]
    ensemble: RawEnsemble,
    #[serde(default)]
    task_a: RawPhase,
    #[serde(default)]
    task_b: RawPhase,
    #[serde(default)]
    data: RawData,
    #[serde(default)]
    oracle: RawOracle,
    #[serde(default)]
    run: RawRun,
}

fn overlay<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn overlay_phase(p: &mut PhaseConfig, raw: RawPhase) {
    overlay(&mut p.epochs, raw.epochs);
    overlay(&mut p.learning_rate, raw.learning_rate);
    overlay(&mut p.schedule, raw.schedule);
    overlay(&mut p.step_every, raw.step_every);
    if raw.batch_size.is_some() {
        p.batch_size = raw.batch_size;
    }
    if raw.full_batch == Some(true) {
        p.batch_size = None;
    }
}

impl RawConfig {
    fn resolve(self, text: &str) -> Result<ExperimentConfig> {
        let exp = self.experiment;
        let mut cfg = ExperimentConfig::defaults(exp);
        let at = |section: &str, key: &str, message: String| {
            let (line, column) = key_position(text, section, key);
            Error::Config {
                line,
                column,
                message,
            }
        };

        let d = &self.data;
        let applicable: &[(&str, bool)] = &[
            ("n_train_a", d.n_train_a.is_some()),
            ("n_test_a", d.n_test_a.is_some()),
            ("n_train_b", d.n_train_b.is_some()),
            ("n_test_b", d.n_test_b.is_some()),
            ("noise_sigma", d.noise_sigma.is_some()),
            ("n_images_a", d.n_images_a.is_some()),
            ("n_images_b", d.n_images_b.is_some()),
            ("grid_stride", d.grid_stride.is_some()),
            ("rotate_degrees", d.rotate_degrees.is_some()),
            ("occlude_fraction", d.occlude_fraction.is_some()),
            ("fill", d.fill.is_some()),
            ("family", d.family.is_some()),
            ("n_shapes_a", d.n_shapes_a.is_some()),
            ("resolution", d.resolution.is_some()),
            ("erosion", d.erosion.is_some()),
            ("surface_samples", d.surface_samples.is_some()),
            ("idx_images", d.idx_images.is_some()),
            ("idx_labels", d.idx_labels.is_some()),
        ];
        let allowed: &[&str] = match exp {
            Experiment::Toy => &[
                "n_train_a",
                "n_test_a",
                "n_train_b",
                "n_test_b",
                "noise_sigma",
            ],
            Experiment::GridRecon => &[
                "n_images_a",
                "n_images_b",
                "grid_stride",
                "rotate_degrees",
                "occlude_fraction",
                "fill",
                "idx_images",
                "idx_labels",
            ],
            Experiment::Sdf2d => &[
                "n_images_b",
                "family",
                "n_shapes_a",
                "resolution",
                "erosion",
                "surface_samples",
                "fill",
            ],
        };
        for (key, present) in applicable {
            if *present && !allowed.contains(key) {
                return Err(at(
                    "data",
                    key,
                    format!("`data.{key}` does not apply to experiment {}", exp.name()),
                ));
            }
        }
        if exp == Experiment::Toy
            && (self.oracle.latent.is_some()
                || self.oracle.latent_dim.is_some()
                || self.oracle.epochs.is_some()
                || self.oracle.learning_rate.is_some())
        {
            let key = ["latent", "latent_dim", "epochs", "learning_rate"]
                .into_iter()
                .find(|k| key_position(text, "oracle", k) != (0, 0))
                .unwrap_or("latent");
            return Err(at(
                "oracle",
                key,
                "the toy experiment has no latent oracle".into(),
            ));
        }

        overlay(&mut cfg.method, self.method);
        overlay(&mut cfg.seeds, self.seeds);
        overlay(&mut cfg.hidden_width, self.model.hidden_width);
        overlay(&mut cfg.layers, self.model.layers);
        overlay(&mut cfg.dropout_p, self.model.dropout_p);
        overlay(&mut cfg.activation, self.model.activation);
        overlay(&mut cfg.members, self.ensemble.members);
        overlay(&mut cfg.ewc_lambda, self.ensemble.ewc_lambda);
        overlay(&mut cfg.mc_samples, self.ensemble.mc_samples);
        overlay(&mut cfg.per_member_fisher, self.ensemble.per_member_fisher);
        overlay_phase(&mut cfg.task_a, self.task_a);
        overlay_phase(&mut cfg.task_b, self.task_b);
        let d = self.data;
        let data = &mut cfg.data;
        overlay(&mut data.n_train_a, d.n_train_a);
        overlay(&mut data.n_test_a, d.n_test_a);
        overlay(&mut data.n_train_b, d.n_train_b);
        overlay(&mut data.n_test_b, d.n_test_b);
        overlay(&mut data.noise_sigma, d.noise_sigma);
        overlay(&mut data.n_images_a, d.n_images_a);
        overlay(&mut data.n_images_b, d.n_images_b);
        overlay(&mut data.grid_stride, d.grid_stride);
        overlay(&mut data.rotate_degrees, d.rotate_degrees);
        overlay(&mut data.occlude_fraction, d.occlude_fraction);
        overlay(&mut data.n_shapes_a, d.n_shapes_a);
        overlay(&mut data.resolution, d.resolution);
        overlay(&mut data.erosion, d.erosion);
        overlay(&mut data.surface_samples, d.surface_samples);
        if d.idx_images.is_some() != d.idx_labels.is_some() {
            let key = if d.idx_images.is_some() {
                "idx_images"
            } else {
                "idx_labels"
            };
            return Err(at(
                "data",
                key,
                "idx_images and idx_labels must be given together".into(),
            ));
        }
        data.idx_images = d.idx_images;
        data.idx_labels = d.idx_labels;
        if let Some(f) = d.fill {
            data.fill = f
                .parse()
                .map_err(|e: Error| at("data", "fill", e.to_string()))?;
        }
        if let Some(f) = d.family {
            data.family = f
                .parse()
                .map_err(|e: Error| at("data", "family", e.to_string()))?;
        }
        overlay(&mut cfg.oracle.latent, self.oracle.latent);
        overlay(&mut cfg.oracle.latent_dim, self.oracle.latent_dim);
        overlay(&mut cfg.oracle.epochs, self.oracle.epochs);
        overlay(&mut cfg.oracle.learning_rate, self.oracle.learning_rate);
        overlay(&mut cfg.workers, self.run.workers);
        overlay(&mut cfg.n_bins, self.run.n_bins);

        if exp != Experiment::Sdf2d && cfg.oracle.latent == LatentKind::PerShapeTable {
            return Err(at(
                "oracle",
                "latent",
                "per-shape latent tables are available for sdf-2d only".into(),
            ));
        }
        if cfg.method == Method::DeepEnsemble && cfg.oracle.latent == LatentKind::PerShapeTable {
            return Err(at(
                "oracle",
                "latent",
                "per-shape latent tables are not available for deep ensembles".into(),
            ));
        }
        cfg.validate().map_err(|e| {
            let message = e.to_string();
            let (line, column) = [
                ("ensemble", "members"),
                ("ensemble", "ewc_lambda"),
                ("ensemble", "mc_samples"),
                ("model", "dropout_p"),
                ("model", "layers"),
                ("", "seeds"),
            ]
            .into_iter()
            .find(|(_, k)| message.contains(k))
            .map_or((0, 0), |(s, k)| key_position(text, s, k));
            Error::Config {
                line,
                column,
                message,
            }
        })?;
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_file_takes_toy_defaults() {
        let cfg = ExperimentConfig::from_toml("experiment = \"toy\"\n").unwrap();
        assert_eq!(cfg, ExperimentConfig::defaults(Experiment::Toy));
        assert_eq!(cfg.task_a.epochs, 800);
        assert_eq!(cfg.task_b.learning_rate, 5e-3);
        assert_eq!(cfg.members, 4);
        assert_eq!(cfg.mc_samples, 100);
        assert_eq!(cfg.layers().len(), 3);
    }

    #[test]
    fn unknown_key_reports_its_position() {
        let text = "experiment = \"toy\"\n[ensemble]\nmembers = 4\newc_lamda = 10.0\n";
        match ExperimentConfig::from_toml(text) {
            Err(Error::Config {
                line,
                column,
                message,
            }) => {
                assert_eq!((line, column), (4, 1));
                assert!(message.contains("ewc_lamda"), "{message}");
            }
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn inapplicable_data_key_is_rejected() {
        let text = "experiment = \"toy\"\n\n[data]\ngrid_stride = 3\n";
        assert!(matches!(
            ExperimentConfig::from_toml(text),
            Err(Error::Config {
                line: 4,
                column: 1,
                ..
            })
        ));
    }

    #[test]
    fn invalid_value_is_a_config_error() {
        let text = "experiment = \"grid-recon\"\n[ensemble]\nmembers = 0\n";
        assert!(matches!(
            ExperimentConfig::from_toml(text),
            Err(Error::Config { line: 3, .. })
        ));
    }

    #[test]
    fn hash_ignores_seeds_but_not_lambda() {
        let a = ExperimentConfig::defaults(Experiment::Toy);
        let mut b = a.clone();
        b.seeds = vec![7];
        assert_eq!(a.hash(), b.hash());
        b.ewc_lambda = 10.0;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.task_a_hash(), b.task_a_hash());
    }

    #[test]
    fn sdf_decoder_has_skip_and_siren_dropout_placement() {
        let mut cfg = ExperimentConfig::defaults(Experiment::Sdf2d);
        let layers = cfg.layers();
        assert_eq!(layers.len(), 8);
        assert_eq!(layers[4].skip_from, Some(0));
        assert_eq!(layers[4].input_dim, 64 + 66);
        cfg.activation = HiddenActivation::Siren;
        let p: Vec<f64> = cfg.layers().iter().map(|l| l.dropout_p).collect();
        assert_eq!(p, vec![0.0, 0.0, 0.0, 0.2, 0.0, 0.2, 0.0, 0.0]);
    }
}
