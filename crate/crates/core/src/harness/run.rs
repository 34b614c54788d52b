//! Run directories, manifests and phase-by-phase execution with resume.
//!
//! ```text
//! <root>/<config-hash>/config.toml
//! <root>/<config-hash>/<seed>/{manifest.txt, metrics.csv, checkpoints/, plots/}
//! <root>/cache/data-<hash>-<seed>/          shared datasets and encoder
//! <root>/cache/task-a-<hash>-<seed>/        shared dropout-trained network
//! <root>/cache/deep-<hash>-<seed>/member-i/ deep-ensemble Task-A networks
//! ```

use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::data::config_hash;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, LatentKind, Method};
use crate::harness::pipeline::{
    evaluate_target, evaluate_toy, fit_method, fit_task_a_codes, generate, infer_target_codes,
    Benchmark, SeedMetrics, TaskAModels,
};
use crate::metrics::{
    entropy_histogram_svg, panels_svg, reliability_svg, write_svg, MetricsReport, Panel,
    RECORD_KEYS,
};
use crate::nn::{load_checkpoint, save_checkpoint, MlpNetwork};
use crate::oracle::EncoderModel;
use crate::raster::Grid;
use crate::textdoc::{sha256_hex, TextDoc};
use crate::uq::{
    estimate_fisher_diagonal, member_seed, read_bundle, train_task_a_network, without_dropout,
    write_bundle, BundleInfo, CostLedger, EnsembleModel, PosteriorCheckpoint,
};

/// Environment variable overriding the run root.
pub const RUN_ROOT_ENV: &str = "DROPSEMBLES_RUN_ROOT";
pub const MANIFEST_KIND: &str = "dropsembles-run";
pub const MANIFEST_VERSION: u32 = 1;
/// Raster figures written per run.
const PANEL_TARGETS: usize = 3;

pub fn default_run_root() -> PathBuf {
    std::env::var_os(RUN_ROOT_ENV).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    Generate,
    TrainA,
    Fisher,
    TuneB,
    Evaluate,
}

impl Phase {
    pub const ALL: [Phase; 5] = [
        Phase::Generate,
        Phase::TrainA,
        Phase::Fisher,
        Phase::TuneB,
        Phase::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Phase::Generate => "generate",
            Phase::TrainA => "train-a",
            Phase::Fisher => "fisher",
            Phase::TuneB => "tune-b",
            Phase::Evaluate => "evaluate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseStatus {
    Pending,
    Complete,
    Failed,
}

impl PhaseStatus {
    fn name(self) -> &'static str {
        match self {
            PhaseStatus::Pending => "pending",
            PhaseStatus::Complete => "complete",
            PhaseStatus::Failed => "failed",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "pending" => Ok(PhaseStatus::Pending),
            "complete" => Ok(PhaseStatus::Complete),
            "failed" => Ok(PhaseStatus::Failed),
            _ => Err(Error::Argument(format!("unknown phase status `{s}`"))),
        }
    }
}

/// Per-seed record of what ran, what it cost and where outputs live.
#[derive(Debug, Clone, PartialEq)]
pub struct RunManifest {
    pub config_hash: String,
    pub task_a_hash: String,
    /// SHA-256 over the generated dataset files.
    pub input_hash: String,
    pub experiment: String,
    pub method: String,
    pub ewc_lambda: f64,
    pub members: usize,
    pub seed: u64,
    pub phases: Vec<(Phase, PhaseStatus, f64)>,
    pub ledger: CostLedger,
    /// Whether Task-A networks came from the shared cache.
    pub task_a_cache_hit: bool,
    pub artifacts: Vec<(String, String)>,
}

impl RunManifest {
    fn new(cfg: &ExperimentConfig, seed: u64) -> Self {
        RunManifest {
            config_hash: cfg.hash(),
            task_a_hash: cfg.task_a_hash(),
            input_hash: String::new(),
            experiment: cfg.experiment.name().into(),
            method: cfg.method.name().into(),
            ewc_lambda: cfg.ewc_lambda,
            members: cfg.members,
            seed,
            phases: Phase::ALL
                .iter()
                .map(|&p| (p, PhaseStatus::Pending, 0.0))
                .collect(),
            ledger: CostLedger::default(),
            task_a_cache_hit: false,
            artifacts: Vec::new(),
        }
    }

    pub fn status(&self, phase: Phase) -> PhaseStatus {
        self.phases
            .iter()
            .find(|p| p.0 == phase)
            .map_or(PhaseStatus::Pending, |p| p.1)
    }

    fn set(&mut self, phase: Phase, status: PhaseStatus, seconds: f64) {
        if let Some(p) = self.phases.iter_mut().find(|p| p.0 == phase) {
            // A resumed phase only reloads its outputs; keep the original timing.
            if p.1 != PhaseStatus::Complete {
                p.2 = (seconds * 1000.0).round() / 1000.0;
            }
            p.1 = status;
        }
    }

    pub fn is_complete(&self) -> bool {
        self.phases.iter().all(|p| p.1 == PhaseStatus::Complete)
    }

    fn artifact(&mut self, name: &str, path: &Path) {
        let value = path.display().to_string();
        match self.artifacts.iter_mut().find(|a| a.0 == name) {
            Some(a) => a.1 = value,
            None => self.artifacts.push((name.into(), value)),
        }
    }

    pub fn to_doc(&self) -> TextDoc {
        let mut doc = TextDoc::new(MANIFEST_KIND, MANIFEST_VERSION);
        doc.field(
            "status",
            if self.is_complete() {
                "complete"
            } else {
                "incomplete"
            },
        )
        .field("config_hash", &self.config_hash)
        .field("task_a_hash", &self.task_a_hash)
        .field("input_hash", &self.input_hash)
        .field("experiment", &self.experiment)
        .field("method", &self.method)
        .field("ewc_lambda", self.ewc_lambda)
        .field("members", self.members)
        .field("seed", self.seed)
        .field("task_a_runs", self.ledger.task_a_runs)
        .field("task_a_epochs", self.ledger.task_a_epochs)
        .field("task_b_runs", self.ledger.task_b_runs)
        .field("task_b_epochs", self.ledger.task_b_epochs)
        .field(
            "task_a_cache",
            if self.task_a_cache_hit { "hit" } else { "miss" },
        );
        for (phase, status, secs) in &self.phases {
            doc.field(&format!("phase.{}", phase.name()), status.name());
            doc.field(
                &format!("wall_seconds.{}", phase.name()),
                format!("{secs:.3}"),
            );
        }
        for (k, v) in &self.artifacts {
            doc.field(&format!("artifact.{k}"), v);
        }
        doc
    }

    pub fn from_doc(doc: &TextDoc) -> Result<Self> {
        doc.expect_kind(MANIFEST_KIND, MANIFEST_VERSION)?;
        let phases = Phase::ALL
            .iter()
            .map(|&p| {
                let status = PhaseStatus::parse(doc.require(&format!("phase.{}", p.name()))?)?;
                let secs = doc.parse_field(&format!("wall_seconds.{}", p.name()))?;
                Ok((p, status, secs))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RunManifest {
            config_hash: doc.require("config_hash")?.into(),
            task_a_hash: doc.require("task_a_hash")?.into(),
            input_hash: doc.require("input_hash")?.into(),
            experiment: doc.require("experiment")?.into(),
            method: doc.require("method")?.into(),
            ewc_lambda: doc.parse_field("ewc_lambda")?,
            members: doc.parse_field("members")?,
            seed: doc.parse_field("seed")?,
            phases,
            ledger: CostLedger {
                task_a_runs: doc.parse_field("task_a_runs")?,
                task_a_epochs: doc.parse_field("task_a_epochs")?,
                task_b_runs: doc.parse_field("task_b_runs")?,
                task_b_epochs: doc.parse_field("task_b_epochs")?,
            },
            task_a_cache_hit: doc.require("task_a_cache")? == "hit",
            artifacts: doc
                .fields_with_prefix("artifact.")
                .map(|(k, v)| {
                    (
                        k.strip_prefix("artifact.").unwrap_or(k).to_string(),
                        v.to_string(),
                    )
                })
                .collect(),
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_doc().write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&TextDoc::read_from(path)?)
    }
}

/// Paths of one configuration under a run root.
#[derive(Debug, Clone)]
pub struct RunLayout {
    pub root: PathBuf,
    pub config_dir: PathBuf,
}

impl RunLayout {
    pub fn new(root: &Path, cfg: &ExperimentConfig) -> Self {
        RunLayout {
            root: root.to_path_buf(),
            config_dir: root.join(cfg.hash()),
        }
    }

    pub fn seed_dir(&self, seed: u64) -> PathBuf {
        self.config_dir.join(seed.to_string())
    }

    fn data_cache(&self, cfg: &ExperimentConfig, seed: u64) -> PathBuf {
        let key = format!(
            "{}|{}|{}",
            cfg.experiment.name(),
            toml::to_string(&cfg.data).expect("serializes"),
            toml::to_string(&cfg.oracle).expect("serializes")
        );
        self.root
            .join("cache")
            .join(format!("data-{}-{seed}", config_hash(&key)))
    }

    fn task_a_cache(&self, cfg: &ExperimentConfig, seed: u64) -> PathBuf {
        self.root
            .join("cache")
            .join(format!("task-a-{}-{seed}", cfg.task_a_hash()))
    }

    fn deep_cache(&self, cfg: &ExperimentConfig, seed: u64) -> PathBuf {
        self.root
            .join("cache")
            .join(format!("deep-{}-{seed}", cfg.task_a_hash()))
    }
}

fn marker(dir: &Path) -> PathBuf {
    dir.join("complete.txt")
}

fn mark_complete(dir: &Path) -> Result<()> {
    let mut doc = TextDoc::new("dropsembles-marker", 1);
    doc.field("complete", "true");
    doc.write_to(&marker(dir))
}

fn input_hash(dir: &Path) -> Result<String> {
    let mut names: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("a-") || n.starts_with("b-"))
        })
        .collect();
    names.sort();
    let mut joined = String::new();
    for p in names {
        let bytes = std::fs::read(&p).map_err(|e| Error::io(&p, e))?;
        joined.push_str(&sha256_hex(&bytes));
    }
    Ok(sha256_hex(joined.as_bytes()))
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> (Result<T>, f64) {
    let start = Instant::now();
    let out = f();
    (out, start.elapsed().as_secs_f64())
}

/// Everything one seed produced.
#[derive(Debug, Clone)]
pub struct SeedOutcome {
    pub seed: u64,
    pub dir: PathBuf,
    pub manifest: RunManifest,
    /// Present once the evaluate phase completed.
    pub metrics: Option<SeedMetrics>,
}

struct SeedRun<'a> {
    cfg: &'a ExperimentConfig,
    layout: &'a RunLayout,
    seed: u64,
    dir: PathBuf,
    manifest: RunManifest,
}

impl SeedRun<'_> {
    fn save(&self) -> Result<()> {
        self.manifest.save(&self.dir.join("manifest.txt"))
    }

    fn phase<T>(&mut self, phase: Phase, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let (out, secs) = timed(|| f(self));
        match out {
            Ok(v) => {
                self.manifest.set(phase, PhaseStatus::Complete, secs);
                self.save()?;
                Ok(v)
            }
            Err(e) => {
                self.manifest.set(phase, PhaseStatus::Failed, secs);
                self.save()?;
                Err(e.in_phase(phase.name()))
            }
        }
    }

    fn generate(&mut self) -> Result<(Benchmark, Option<EncoderModel>)> {
        let dir = self.layout.data_cache(self.cfg, self.seed);
        let encoder_path = dir.join("encoder.txt");
        let loaded = if marker(&dir).exists() {
            let bench = Benchmark::load(&dir, self.cfg)?;
            let enc = if encoder_path.exists() {
                Some(EncoderModel::load(&encoder_path)?)
            } else {
                None
            };
            (bench, enc)
        } else {
            let (bench, enc) = generate(self.cfg, self.seed)?;
            bench.save(&dir)?;
            if let Some(e) = &enc {
                e.save(&encoder_path)?;
            }
            mark_complete(&dir)?;
            (bench, enc)
        };
        self.manifest.input_hash = input_hash(&dir)?;
        self.manifest.artifact("data", &dir);
        Ok(loaded)
    }

    /// Shared network (plus fitted per-shape codes) or deep-ensemble networks.
    fn train_a(&mut self, bench: &mut Benchmark) -> Result<Vec<MlpNetwork>> {
        let cfg = self.cfg;
        if cfg.method.uses_shared_task_a() {
            let dir = self.layout.task_a_cache(cfg, self.seed);
            let net_path = dir.join("network.txt");
            self.manifest.artifact("task_a", &dir);
            let table = cfg.oracle.latent == LatentKind::PerShapeTable;
            if marker(&dir).exists() {
                self.manifest.task_a_cache_hit = true;
                if table {
                    *bench = Benchmark::load(&dir.join("data"), cfg)?;
                }
                return Ok(vec![load_checkpoint(&net_path)?]);
            }
            let net = if table {
                let Benchmark::Recon { task_a, targets } = bench else {
                    return Err(Error::Contract(
                        "per-shape codes need a reconstruction benchmark".into(),
                    ));
                };
                let (net, fitted) = fit_task_a_codes(cfg, task_a, self.seed)?;
                *task_a = fitted;
                infer_target_codes(cfg, &net, targets, self.seed)?;
                bench.save(&dir.join("data"))?;
                net
            } else {
                let data = bench.task_a().training_data();
                train_task_a_network(cfg.layers(), &data, &cfg.phase_a(), self.seed)?
            };
            save_checkpoint(&net, &net_path)?;
            mark_complete(&dir)?;
            Ok(vec![net])
        } else {
            let dir = self.layout.deep_cache(cfg, self.seed);
            self.manifest.artifact("task_a", &dir);
            let data = bench.task_a().training_data();
            let layers = without_dropout(&cfg.layers());
            let mut hits = 0;
            let mut nets = Vec::with_capacity(cfg.members);
            for i in 0..cfg.members {
                let member_dir = dir.join(format!("member-{i}"));
                let path = member_dir.join("network.txt");
                if marker(&member_dir).exists() {
                    hits += 1;
                    nets.push(load_checkpoint(&path)?);
                    continue;
                }
                let net = train_task_a_network(
                    layers.clone(),
                    &data,
                    &cfg.phase_a(),
                    member_seed(self.seed, i),
                )
                .map_err(|e| Error::Member {
                    index: i,
                    source: Box::new(e),
                })?;
                save_checkpoint(&net, &path)?;
                mark_complete(&member_dir)?;
                nets.push(net);
            }
            self.manifest.task_a_cache_hit = hits == cfg.members;
            Ok(nets)
        }
    }

    fn fisher(&mut self, bench: &Benchmark, nets: Vec<MlpNetwork>) -> Result<TaskAModels> {
        let cfg = self.cfg;
        let data = bench.task_a().training_data();
        let id = bench.task_a().provenance.clone();
        let base = if cfg.method.uses_shared_task_a() {
            self.layout.task_a_cache(cfg, self.seed)
        } else {
            self.layout.deep_cache(cfg, self.seed)
        };
        let mut cks = Vec::with_capacity(nets.len());
        for (i, net) in nets.into_iter().enumerate() {
            let path = if cfg.method.uses_shared_task_a() {
                base.join("posterior.txt")
            } else {
                base.join(format!("member-{i}")).join("posterior.txt")
            };
            let ck = if path.exists() {
                PosteriorCheckpoint::load(&path)?
            } else {
                let fisher = estimate_fisher_diagonal(&net, &data, &cfg.loss_a())?;
                let ck = PosteriorCheckpoint::new(net, fisher, id.clone(), cfg.task_a.epochs)?;
                ck.save(&path)?;
                ck
            };
            cks.push(ck);
        }
        Ok(if cfg.method.uses_shared_task_a() {
            TaskAModels::Shared(cks.remove(0))
        } else {
            TaskAModels::Deep(cks)
        })
    }

    fn tune_b(&mut self, bench: &Benchmark, models: &TaskAModels) -> Result<Vec<EnsembleModel>> {
        let cfg = self.cfg;
        let datasets: Vec<_> = match bench {
            Benchmark::Toy(s) => vec![&s.b_train],
            Benchmark::Recon { targets, .. } => targets.iter().map(|t| &t.train).collect(),
        };
        let ckdir = self.dir.join("checkpoints");
        self.manifest.artifact("checkpoints", &ckdir);
        let mut ledger = models.ledger();
        let mut out = Vec::with_capacity(datasets.len());
        for (k, ds) in datasets.into_iter().enumerate() {
            let dir = ckdir.join(format!("target-{k}"));
            if dir.join("manifest.txt").exists() {
                let (model, info) = read_bundle(&dir)?;
                ledger.task_b_runs += info.ledger.task_b_runs;
                ledger.task_b_epochs += info.ledger.task_b_epochs;
                out.push(model);
                continue;
            }
            let (model, l) = fit_method(cfg, models, &ds.training_data(), self.seed, k)?;
            let info = BundleInfo {
                master_seed: self.seed,
                lambda: cfg.ewc_lambda,
                dropout_p: cfg.dropout_p,
                ledger: l,
            };
            write_bundle(&dir, &model, &info)?;
            ledger.task_b_runs += l.task_b_runs;
            ledger.task_b_epochs += l.task_b_epochs;
            out.push(model);
        }
        self.manifest.ledger = ledger;
        Ok(out)
    }

    fn evaluate(&mut self, bench: &Benchmark, models: &[EnsembleModel]) -> Result<SeedMetrics> {
        let cfg = self.cfg;
        let plots = self.dir.join("plots");
        self.manifest.artifact("plots", &plots);
        let mut metrics = match bench {
            Benchmark::Toy(splits) => {
                let m = evaluate_toy(cfg, &models[0], splits)?;
                if let Some(a) = &m.task_a {
                    write_svg(
                        &plots.join("reliability-a.svg"),
                        &reliability_svg(&a.reliability),
                    )?;
                }
                m
            }
            Benchmark::Recon { targets, .. } => {
                let mut reports = Vec::with_capacity(targets.len());
                let mut entropies = Vec::new();
                for (k, (target, model)) in targets.iter().zip(models).enumerate() {
                    let ev = evaluate_target(cfg, model, target)?;
                    if k < PANEL_TARGETS {
                        let (h, w) = (target.height, target.width);
                        let grid = |v: &[f64]| Grid::from_vec(h, w, v.to_vec());
                        let panels = [
                            Panel {
                                title: "truth".into(),
                                image: target.truth().map(|&b| f64::from(u8::from(b))),
                                range: (0.0, 1.0),
                            },
                            Panel {
                                title: "observed".into(),
                                image: target.observed().map(|&b| f64::from(u8::from(b))),
                                range: (0.0, 1.0),
                            },
                            Panel {
                                title: "mean".into(),
                                image: grid(&ev.probability)?,
                                range: (0.0, 1.0),
                            },
                            Panel {
                                title: "entropy".into(),
                                image: grid(&ev.entropy)?,
                                range: (0.0, std::f64::consts::LN_2),
                            },
                        ];
                        write_svg(
                            &plots.join(format!("panels-{k}.svg")),
                            &panels_svg(&panels, 112.0)?,
                        )?;
                        PredictionMaps {
                            truth: panels[0].image.clone(),
                            observed: panels[1].image.clone(),
                            mean: panels[2].image.clone(),
                            entropy: panels[3].image.clone(),
                        }
                        .save(&plots.join(format!("maps-{k}.txt")))?;
                    }
                    entropies.extend(ev.entropy);
                    reports.push(ev.report);
                }
                write_svg(
                    &plots.join("entropy-b.svg"),
                    &entropy_histogram_svg(&entropies, 20),
                )?;
                SeedMetrics {
                    task_a: None,
                    task_b: MetricsReport::combine(&reports)?,
                    targets: reports,
                }
            }
        };
        metrics.task_b.costs = self.manifest.ledger;
        if let Some(a) = &mut metrics.task_a {
            a.costs = self.manifest.ledger;
        }
        write_svg(
            &plots.join("reliability-b.svg"),
            &reliability_svg(&metrics.task_b.reliability),
        )?;
        let path = self.dir.join("metrics.csv");
        write_seed_metrics(&path, &metrics)?;
        self.manifest.artifact("metrics", &path);
        Ok(metrics)
    }
}

const MAPS_KIND: &str = "dropsembles-maps";

/// Per-pixel rasters of one target, kept for cross-run figures.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionMaps {
    pub truth: Grid<f64>,
    pub observed: Grid<f64>,
    pub mean: Grid<f64>,
    pub entropy: Grid<f64>,
}

impl PredictionMaps {
    pub fn save(&self, path: &Path) -> Result<()> {
        let (h, w) = self.mean.dims();
        let mut doc = TextDoc::new(MAPS_KIND, 1);
        doc.field("height", h)
            .field("width", w)
            .array("truth", self.truth.as_slice())
            .array("observed", self.observed.as_slice())
            .array("mean", self.mean.as_slice())
            .array("entropy", self.entropy.as_slice());
        doc.write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let doc = TextDoc::read_from(path)?;
        doc.expect_kind(MAPS_KIND, 1)?;
        let (h, w): (usize, usize) = (doc.parse_field("height")?, doc.parse_field("width")?);
        let grid = |name: &str| Grid::from_vec(h, w, doc.require_array(name)?.to_vec());
        Ok(PredictionMaps {
            truth: grid("truth")?,
            observed: grid("observed")?,
            mean: grid("mean")?,
            entropy: grid("entropy")?,
        })
    }
}

pub fn write_seed_metrics(path: &Path, metrics: &SeedMetrics) -> Result<()> {
    let mut text = format!("split,{}\n", RECORD_KEYS.join(","));
    let mut row = |split: &str, r: &MetricsReport| {
        let values: Vec<String> = r.to_record().into_iter().map(|(_, v)| v).collect();
        text.push_str(&format!("{split},{}\n", values.join(",")));
    };
    if let Some(a) = &metrics.task_a {
        row("A", a);
    }
    row("B", &metrics.task_b);
    for (k, t) in metrics.targets.iter().enumerate() {
        row(&format!("B{k}"), t);
    }
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_seed_metrics(path: &Path) -> Result<SeedMetrics> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split(',').collect();
    let mut task_a = None;
    let mut task_b = None;
    let mut targets = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(Error::Argument(format!(
                "{}: ragged metrics row",
                path.display()
            )));
        }
        let report = MetricsReport::from_record(
            header[1..].iter().copied().zip(cells[1..].iter().copied()),
        )?;
        match cells[0] {
            "A" => task_a = Some(report),
            "B" => task_b = Some(report),
            other
                if other
                    .strip_prefix('B')
                    .and_then(|k| k.parse::<usize>().ok())
                    == Some(targets.len()) =>
            {
                targets.push(report)
            }
            other => {
                return Err(Error::Argument(format!(
                    "unknown split `{other}` in metrics"
                )))
            }
        }
    }
    Ok(SeedMetrics {
        task_a,
        task_b: task_b
            .ok_or_else(|| Error::Argument(format!("{}: no Task-B row", path.display())))?,
        targets,
    })
}

/// Run `seed` through phase `until`, resuming from completed phases.
pub fn run_seed(
    cfg: &ExperimentConfig,
    root: &Path,
    seed: u64,
    until: Phase,
) -> Result<SeedOutcome> {
    let layout = RunLayout::new(root, cfg);
    std::fs::create_dir_all(&layout.config_dir).map_err(|e| Error::io(&layout.config_dir, e))?;
    let config_path = layout.config_dir.join("config.toml");
    if !config_path.exists() {
        std::fs::write(&config_path, cfg.canonical()).map_err(|e| Error::io(&config_path, e))?;
    }
    let dir = layout.seed_dir(seed);
    let manifest_path = dir.join("manifest.txt");
    let manifest = if manifest_path.exists() {
        RunManifest::load(&manifest_path)?
    } else {
        RunManifest::new(cfg, seed)
    };
    if manifest.is_complete() {
        let metrics = Some(read_seed_metrics(&dir.join("metrics.csv"))?);
        return Ok(SeedOutcome {
            seed,
            dir,
            manifest,
            metrics,
        });
    }
    let mut run = SeedRun {
        cfg,
        layout: &layout,
        seed,
        dir: dir.clone(),
        manifest,
    };
    run.save()?;
    log::info!(
        "{} {} seed {seed}: running through {}",
        cfg.experiment.name(),
        cfg.method.name(),
        until.name()
    );

    let (mut bench, _encoder) = run.phase(Phase::Generate, |r| r.generate())?;
    if until == Phase::Generate {
        return Ok(finish(run, None));
    }
    let nets = run.phase(Phase::TrainA, |r| r.train_a(&mut bench))?;
    if until == Phase::TrainA {
        return Ok(finish(run, None));
    }
    let models = run.phase(Phase::Fisher, |r| r.fisher(&bench, nets))?;
    if until == Phase::Fisher {
        return Ok(finish(run, None));
    }
    let ensembles = run.phase(Phase::TuneB, |r| r.tune_b(&bench, &models))?;
    if until == Phase::TuneB {
        return Ok(finish(run, None));
    }
    let metrics = run.phase(Phase::Evaluate, |r| r.evaluate(&bench, &ensembles))?;
    Ok(finish(run, Some(metrics)))
}

fn finish(run: SeedRun<'_>, metrics: Option<SeedMetrics>) -> SeedOutcome {
    SeedOutcome {
        seed: run.seed,
        dir: run.dir,
        manifest: run.manifest,
        metrics,
    }
}

/// All seeds of one configuration, evaluated end to end.
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub config: ExperimentConfig,
    pub config_dir: PathBuf,
    pub seeds: Vec<SeedOutcome>,
}

pub fn run_experiment(cfg: &ExperimentConfig, root: &Path) -> Result<ExperimentOutcome> {
    cfg.validate()?;
    if cfg.method == Method::DeepEnsemble && cfg.oracle.latent == LatentKind::PerShapeTable {
        return Err(Error::Argument(
            "per-shape latent tables are not available for deep ensembles".into(),
        ));
    }
    let seeds = cfg
        .seeds
        .iter()
        .map(|&s| run_seed(cfg, root, s, Phase::Evaluate))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentOutcome {
        config: cfg.clone(),
        config_dir: RunLayout::new(root, cfg).config_dir,
        seeds,
    })
}
