//! Benchmark preparation, per-method fitting and evaluation for one seed.

use std::path::Path;

use ndarray::Array2;

use crate::data::{
    apply_corruption, binarize, gen_sdf_shapes, gen_toy_classification, load_idx_images,
    occupancy_dataset, seven_glyphs, Corruption, CorruptionSpec, GridShape, SdfConfig, Split,
    TaskDataset, TaskKind, ToyConfig, ToySplits,
};
use crate::error::{Error, Result};
use crate::harness::config::{Experiment, ExperimentConfig, LatentKind, Method};
use crate::metrics::{evaluate_run, EvalData, Evaluation, MetricsReport};
use crate::nn::{MlpNetwork, TrainingData};
use crate::oracle::{
    fill_sparse, fit_codes, train_oracle, AutoDecoderSettings, EncoderModel, LatentCode,
    LatentSource, OracleTraining, ShapePoints,
};
use crate::raster::{pixel_center, BinaryMask, Grid};
use crate::rng::{derive_seed, Stream};
use crate::uq::{
    finetune_deep_ensemble, finetune_full_network, run_dropsembles, CostLedger, DeepEnsembleConfig,
    DropsemblesConfig, EnsembleModel, PosteriorCheckpoint,
};

/// One independent Task-B fine-tuning problem with dense ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct ReconTarget {
    /// Observed (sparse, corrupted) points.
    pub train: TaskDataset,
    /// Every pixel of the raster in row-major order, with clean targets.
    pub eval: TaskDataset,
    pub height: usize,
    pub width: usize,
}

impl ReconTarget {
    pub fn truth(&self) -> BinaryMask {
        let inside: Vec<bool> = self
            .eval
            .targets
            .iter()
            .map(|&t| match self.eval.task {
                TaskKind::Sdf => t < 0.0,
                _ => t == 1.0,
            })
            .collect();
        Grid::from_vec(self.height, self.width, inside).expect("dense raster")
    }

    /// Pixels that carry an observation, for figures.
    pub fn observed(&self) -> BinaryMask {
        let mut m = Grid::filled(self.height, self.width, false);
        for row in self.train.coords.rows() {
            let c = ((row[0] + 1.0) / 2.0 * self.width as f64).floor() as usize;
            let r = ((row[1] + 1.0) / 2.0 * self.height as f64).floor() as usize;
            if r < self.height && c < self.width {
                m.set(r, c, true);
            }
        }
        m
    }
}

/// Datasets of one seed.
#[derive(Debug, Clone, PartialEq)]
#[allow(clippy::large_enum_variant)]
pub enum Benchmark {
    Toy(ToySplits),
    Recon {
        task_a: TaskDataset,
        targets: Vec<ReconTarget>,
    },
}

impl Benchmark {
    pub fn task_a(&self) -> &TaskDataset {
        match self {
            Benchmark::Toy(s) => &s.a_train,
            Benchmark::Recon { task_a, .. } => task_a,
        }
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        match self {
            Benchmark::Toy(s) => {
                s.a_train.save(&dir.join("a-train.txt"))?;
                s.a_test.save(&dir.join("a-test.txt"))?;
                s.b_train.save(&dir.join("b-train.txt"))?;
                s.b_test.save(&dir.join("b-test.txt"))
            }
            Benchmark::Recon { task_a, targets } => {
                task_a.save(&dir.join("a-train.txt"))?;
                for (k, t) in targets.iter().enumerate() {
                    t.train.save(&dir.join(format!("b-{k}-train.txt")))?;
                    t.eval.save(&dir.join(format!("b-{k}-eval.txt")))?;
                }
                Ok(())
            }
        }
    }

    pub fn load(dir: &Path, cfg: &ExperimentConfig) -> Result<Self> {
        let load = |name: &str| TaskDataset::load(&dir.join(name));
        match cfg.experiment {
            Experiment::Toy => Ok(Benchmark::Toy(ToySplits {
                a_train: load("a-train.txt")?,
                a_test: load("a-test.txt")?,
                b_train: load("b-train.txt")?,
                b_test: load("b-test.txt")?,
            })),
            _ => {
                let (height, width) = raster_dims(cfg);
                let targets = (0..cfg.data.n_images_b)
                    .map(|k| {
                        Ok(ReconTarget {
                            train: load(&format!("b-{k}-train.txt"))?,
                            eval: load(&format!("b-{k}-eval.txt"))?,
                            height,
                            width,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(Benchmark::Recon {
                    task_a: load("a-train.txt")?,
                    targets,
                })
            }
        }
    }
}

fn raster_dims(cfg: &ExperimentConfig) -> (usize, usize) {
    match cfg.experiment {
        Experiment::Sdf2d => (cfg.data.resolution, cfg.data.resolution),
        _ => (crate::data::GLYPH_SIZE, crate::data::GLYPH_SIZE),
    }
}

fn dense_points(
    height: usize,
    width: usize,
    values: impl Fn(usize, usize) -> f64,
) -> (Array2<f64>, Vec<f64>) {
    let mut coords = Vec::with_capacity(height * width * 2);
    let mut targets = Vec::with_capacity(height * width);
    for r in 0..height {
        for c in 0..width {
            coords.push(pixel_center(c, width));
            coords.push(pixel_center(r, height));
            targets.push(values(r, c));
        }
    }
    (
        Array2::from_shape_vec((height * width, 2), coords).expect("two columns"),
        targets,
    )
}

fn single_shape(ds: TaskDataset, code: LatentCode, oracle: &str) -> Result<TaskDataset> {
    let n = ds.len();
    ds.with_latents(vec![0; n], vec![code], oracle)
}

/// Task-A and Task-B glyph rasters: real IDX sevens when configured, else
/// synthetic glyphs.
fn glyph_rasters(cfg: &ExperimentConfig, seed: u64) -> Result<(Vec<BinaryMask>, Vec<BinaryMask>)> {
    let d = &cfg.data;
    match (&d.idx_images, &d.idx_labels) {
        (Some(images), Some(labels)) => {
            let sevens: Vec<BinaryMask> = load_idx_images(images, labels)?
                .into_iter()
                .filter(|(_, label)| *label == 7)
                .map(|(g, _)| binarize(&g, 127))
                .collect();
            if sevens.len() < d.n_images_a + d.n_images_b {
                return Err(Error::Argument(format!(
                    "IDX file holds {} sevens, {} needed",
                    sevens.len(),
                    d.n_images_a + d.n_images_b
                )));
            }
            let b = sevens[d.n_images_a..d.n_images_a + d.n_images_b].to_vec();
            Ok((sevens[..d.n_images_a].to_vec(), b))
        }
        _ => {
            let a = seven_glyphs(d.n_images_a, derive_seed(seed, Stream::Data, 0));
            let b = seven_glyphs(d.n_images_b, derive_seed(seed, Stream::Data, 1));
            let bin = |v: Vec<Grid<u8>>| v.iter().map(|g| binarize(g, 127)).collect();
            Ok((bin(a), bin(b)))
        }
    }
}

fn oracle_training(cfg: &ExperimentConfig, seed: u64) -> OracleTraining {
    OracleTraining {
        epochs: cfg.oracle.epochs,
        learning_rate: cfg.oracle.learning_rate,
        ..OracleTraining::new(cfg.oracle.latent_dim, derive_seed(seed, Stream::Oracle, 1))
    }
}

fn gen_grid(cfg: &ExperimentConfig, seed: u64) -> Result<(Benchmark, Option<EncoderModel>)> {
    let d = &cfg.data;
    let (a_rasters, b_rasters) = glyph_rasters(cfg, seed)?;
    let grid_mask = |k: u64| {
        CorruptionSpec::new(
            Corruption::GridMask {
                stride: d.grid_stride,
            },
            k,
        )
    };
    let shapes_a = a_rasters
        .into_iter()
        .enumerate()
        .map(|(k, g)| apply_corruption(&GridShape::dense(g), &grid_mask(k as u64)))
        .collect::<Result<Vec<_>>>()?;
    let encoder_inputs: Vec<BinaryMask> = shapes_a.iter().map(|s| fill_sparse(s, d.fill)).collect();
    let encoder = train_oracle(&encoder_inputs, &oracle_training(cfg, seed))?;
    let oracle_id = encoder.id();
    let codes = encoder_inputs
        .iter()
        .map(|r| encoder.encode(r))
        .collect::<Result<Vec<_>>>()?;
    let (a, ids) = occupancy_dataset(
        &shapes_a,
        Split::Train,
        &format!("grid-a-{}", cfg.task_a_hash()),
    )?;
    let task_a = a.with_latents(ids, codes, &oracle_id)?;

    let mut targets = Vec::with_capacity(b_rasters.len());
    for (k, raster) in b_rasters.into_iter().enumerate() {
        let cseed = |i: u64| derive_seed(seed, Stream::Corruption, 3 * k as u64 + i);
        let rotated = apply_corruption(
            &GridShape::dense(raster),
            &CorruptionSpec::new(
                Corruption::Rotate {
                    angle_degrees: d.rotate_degrees,
                },
                cseed(0),
            ),
        )?;
        let truth = rotated.grid.clone();
        let occluded = apply_corruption(
            &rotated,
            &CorruptionSpec::new(
                Corruption::Occlude {
                    fraction: d.occlude_fraction,
                },
                cseed(1),
            ),
        )?;
        let observed = apply_corruption(&occluded, &grid_mask(cseed(2)))?;
        let code = encoder.encode(&fill_sparse(&observed, d.fill))?;
        let prov = format!("grid-b{k}-{}", cfg.task_a_hash());
        let (train, _) = occupancy_dataset(std::slice::from_ref(&observed), Split::Train, &prov)?;
        let (h, w) = truth.dims();
        let (coords, values) = dense_points(h, w, |r, c| f64::from(u8::from(*truth.get(r, c))));
        let eval = TaskDataset::new(TaskKind::Occupancy, Split::Test, coords, values, prov)?;
        targets.push(ReconTarget {
            train: single_shape(train, code.clone(), &oracle_id)?,
            eval: single_shape(eval, code, &oracle_id)?,
            height: h,
            width: w,
        });
    }
    Ok((Benchmark::Recon { task_a, targets }, Some(encoder)))
}

fn gen_sdf(cfg: &ExperimentConfig, seed: u64) -> Result<(Benchmark, Option<EncoderModel>)> {
    let d = &cfg.data;
    let sdf_cfg = SdfConfig {
        family: d.family,
        n_a: d.n_shapes_a,
        n_b: d.n_images_b,
        resolution: d.resolution,
        erosion_iters_b: d.erosion,
        surface_samples: d.surface_samples,
    };
    let splits = gen_sdf_shapes(&sdf_cfg, derive_seed(seed, Stream::Data, 2))?;
    let res = d.resolution;
    let (encoder, codes_a, codes_b, oracle_id) = match cfg.oracle.latent {
        LatentKind::PooledConv => {
            let occ_a: Vec<BinaryMask> = splits.shapes_a.iter().map(|s| s.occupancy()).collect();
            let encoder = train_oracle(&occ_a, &oracle_training(cfg, seed))?;
            let a = occ_a
                .iter()
                .map(|o| encoder.encode(o))
                .collect::<Result<Vec<_>>>()?;
            let b = splits
                .b_occupancy
                .iter()
                .map(|o| encoder.encode(o))
                .collect::<Result<Vec<_>>>()?;
            let id = encoder.id();
            (Some(encoder), a, b, id)
        }
        LatentKind::PerShapeTable => {
            // Placeholder codes; fitted during Task-A training.
            let zero = || {
                LatentCode::new(
                    vec![0.0; cfg.oracle.latent_dim],
                    LatentSource::PerShapeTable,
                )
            };
            let a = (0..splits.shapes_a.len())
                .map(|_| zero())
                .collect::<Result<Vec<_>>>()?;
            let b = (0..splits.shapes_b.len())
                .map(|_| zero())
                .collect::<Result<Vec<_>>>()?;
            (None, a, b, format!("table-{}", cfg.task_a_hash()))
        }
    };
    let task_a =
        splits
            .a
            .clone()
            .with_latents(splits.a_point_shape.clone(), codes_a, &oracle_id)?;
    let per_shape = res * res;
    let mut targets = Vec::with_capacity(splits.shapes_b.len());
    for (k, clean) in splits.shapes_b.iter().enumerate() {
        let prov = format!("sdf-b{k}-{}", cfg.task_a_hash());
        let rows = k * per_shape..(k + 1) * per_shape;
        let coords = splits
            .b
            .coords
            .slice(ndarray::s![rows.clone(), ..])
            .to_owned();
        let train = TaskDataset::new(
            TaskKind::Sdf,
            Split::Train,
            coords,
            splits.b.targets[rows].to_vec(),
            prov.clone(),
        )?;
        let (coords, values) = dense_points(res, res, |r, c| *clean.values.get(r, c));
        let eval = TaskDataset::new(TaskKind::Sdf, Split::Test, coords, values, prov)?;
        targets.push(ReconTarget {
            train: single_shape(train, codes_b[k].clone(), &oracle_id)?,
            eval: single_shape(eval, codes_b[k].clone(), &oracle_id)?,
            height: res,
            width: res,
        });
    }
    Ok((Benchmark::Recon { task_a, targets }, encoder))
}

/// Build the datasets (and the frozen encoder, when one is used) for `seed`.
pub fn generate(cfg: &ExperimentConfig, seed: u64) -> Result<(Benchmark, Option<EncoderModel>)> {
    match cfg.experiment {
        Experiment::Toy => {
            let d = &cfg.data;
            let toy = ToyConfig {
                n_train_a: d.n_train_a,
                n_test_a: d.n_test_a,
                n_train_b: d.n_train_b,
                n_test_b: d.n_test_b,
                noise_sigma: d.noise_sigma,
                ..ToyConfig::default()
            };
            Ok((Benchmark::Toy(gen_toy_classification(&toy, seed)?), None))
        }
        Experiment::GridRecon => gen_grid(cfg, seed),
        Experiment::Sdf2d => gen_sdf(cfg, seed),
    }
}

fn shape_points(ds: &TaskDataset) -> Result<(Vec<usize>, usize)> {
    let ids = ds
        .latent_ids
        .clone()
        .ok_or_else(|| Error::Contract("per-shape codes need shape ids".into()))?;
    Ok((ids, ds.latents.len()))
}

/// Fit the per-shape code table jointly with the decoder on Task A, returning
/// the trained decoder and the dataset with fitted codes.
pub fn fit_task_a_codes(
    cfg: &ExperimentConfig,
    task_a: &TaskDataset,
    seed: u64,
) -> Result<(MlpNetwork, TaskDataset)> {
    let mut net = MlpNetwork::new(cfg.layers(), derive_seed(seed, Stream::Init, 0))?;
    let (ids, shapes) = shape_points(task_a)?;
    let settings = AutoDecoderSettings {
        code_learning_rate: cfg.task_a.learning_rate,
        ..AutoDecoderSettings::new(cfg.oracle.latent_dim)
    };
    let points = ShapePoints {
        coords: &task_a.coords,
        shape_of: &ids,
        targets: &task_a.targets,
        shapes,
    };
    let codes = fit_codes(&mut net, points, &cfg.phase_a(), &settings, true, seed)?;
    let oracle = task_a.oracle_id.clone().unwrap_or_default();
    let fitted = task_a.clone().with_latents(ids, codes, oracle)?;
    Ok((net, fitted))
}

/// Infer the code of each Task-B target with the Task-A decoder held fixed.
pub fn infer_target_codes(
    cfg: &ExperimentConfig,
    net: &MlpNetwork,
    targets: &mut [ReconTarget],
    seed: u64,
) -> Result<()> {
    let settings = AutoDecoderSettings {
        code_learning_rate: cfg.task_a.learning_rate,
        ..AutoDecoderSettings::new(cfg.oracle.latent_dim)
    };
    for (k, t) in targets.iter_mut().enumerate() {
        let ids = vec![0; t.train.len()];
        let points = ShapePoints {
            coords: &t.train.coords,
            shape_of: &ids,
            targets: &t.train.targets,
            shapes: 1,
        };
        let mut fixed = net.clone();
        let code = fit_codes(
            &mut fixed,
            points,
            &cfg.phase_b(),
            &settings,
            false,
            derive_seed(seed, Stream::Oracle, 10 + k as u64),
        )?
        .remove(0);
        let oracle = t.train.oracle_id.clone().unwrap_or_default();
        let n = t.train.len();
        t.train = t
            .train
            .clone()
            .with_latents(vec![0; n], vec![code.clone()], oracle.clone())?;
        let n = t.eval.len();
        t.eval = t
            .eval
            .clone()
            .with_latents(vec![0; n], vec![code], oracle)?;
    }
    Ok(())
}

/// Task-A networks a method fine-tunes from.
#[derive(Debug, Clone)]
pub enum TaskAModels {
    /// One dropout-trained network with its Fisher diagonal.
    Shared(PosteriorCheckpoint),
    /// Independently trained networks without dropout.
    Deep(Vec<PosteriorCheckpoint>),
}

impl TaskAModels {
    pub fn ledger(&self) -> CostLedger {
        let mut ledger = CostLedger::default();
        match self {
            TaskAModels::Shared(ck) => ledger.record_task_a(ck.task_a_epochs()),
            TaskAModels::Deep(cks) => cks
                .iter()
                .for_each(|ck| ledger.record_task_a(ck.task_a_epochs())),
        }
        ledger
    }
}

pub fn deep_config(cfg: &ExperimentConfig, seed: u64) -> DeepEnsembleConfig {
    DeepEnsembleConfig {
        members: cfg.members,
        lambda: cfg.ewc_lambda,
        layers: cfg.layers(),
        task_a: cfg.phase_a(),
        task_b: cfg.phase_b(),
        master_seed: seed,
        per_member_fisher: cfg.per_member_fisher,
        parallel: cfg.workers > 1,
    }
}

/// Fine-tune on one Task-B dataset. `index` separates the random streams of
/// independent targets. The ledger counts Task-B work only.
pub fn fit_method(
    cfg: &ExperimentConfig,
    models: &TaskAModels,
    data_b: &TrainingData,
    seed: u64,
    index: usize,
) -> Result<(EnsembleModel, CostLedger)> {
    let local = derive_seed(seed, Stream::Ensemble, index as u64);
    let mc_seed = derive_seed(local, Stream::McSamples, 0);
    let mut ledger = CostLedger::default();
    let shared = || match models {
        TaskAModels::Shared(ck) => Ok(ck),
        TaskAModels::Deep(_) => Err(Error::Contract(format!(
            "{} needs the shared Task-A network",
            cfg.method.name()
        ))),
    };
    let model = match cfg.method {
        Method::BaselineNoFinetune => {
            EnsembleModel::mc_dropout(shared()?.network().clone(), cfg.mc_samples, mc_seed)?
        }
        Method::McDropout => {
            let net =
                finetune_full_network(shared()?, data_b, &cfg.phase_b(), cfg.ewc_lambda, local)?;
            ledger.record_task_b(cfg.task_b.epochs);
            EnsembleModel::mc_dropout(net, cfg.mc_samples, mc_seed)?
        }
        Method::Dropsembles => {
            let config = DropsemblesConfig {
                members: cfg.members,
                lambda: cfg.ewc_lambda,
                phase: cfg.phase_b(),
                master_seed: local,
                parallel: cfg.workers > 1,
            };
            let (model, l) = run_dropsembles(shared()?, data_b, &config)?;
            ledger.task_b_runs = l.task_b_runs;
            ledger.task_b_epochs = l.task_b_epochs;
            model
        }
        Method::DeepEnsemble => {
            let TaskAModels::Deep(cks) = models else {
                return Err(Error::Contract(
                    "deep-ensemble needs independently trained networks".into(),
                ));
            };
            let (model, l) = finetune_deep_ensemble(
                cks,
                data_b,
                &DeepEnsembleConfig {
                    master_seed: local,
                    ..deep_config(cfg, seed)
                },
            )?;
            ledger.task_b_runs = l.task_b_runs;
            ledger.task_b_epochs = l.task_b_epochs;
            model
        }
    };
    Ok((model, ledger))
}

/// Task-A and Task-B evaluations of one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct SeedMetrics {
    pub task_a: Option<MetricsReport>,
    pub task_b: MetricsReport,
    /// One report per reconstruction target; empty for the toy benchmark.
    pub targets: Vec<MetricsReport>,
}

pub fn evaluate_toy(
    cfg: &ExperimentConfig,
    model: &EnsembleModel,
    splits: &ToySplits,
) -> Result<SeedMetrics> {
    let a = evaluate_run(model, EvalData::Points(&splits.a_test), cfg.n_bins)?;
    let b = evaluate_run(model, EvalData::Points(&splits.b_test), cfg.n_bins)?;
    Ok(SeedMetrics {
        task_a: Some(a.report),
        task_b: b.report,
        targets: Vec::new(),
    })
}

pub fn evaluate_target(
    cfg: &ExperimentConfig,
    model: &EnsembleModel,
    target: &ReconTarget,
) -> Result<Evaluation> {
    let truth = target.truth();
    evaluate_run(
        model,
        EvalData::Raster {
            dataset: &target.eval,
            truth: &truth,
        },
        cfg.n_bins,
    )
}
