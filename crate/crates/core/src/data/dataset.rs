use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::nn::TrainingData;
use crate::oracle::{LatentCode, LatentSource};
use crate::textdoc::TextDoc;

pub const DATASET_KIND: &str = "dropsembles-dataset";
pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TaskKind {
    Occupancy,
    Sdf,
    Classification,
}

impl TaskKind {
    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Occupancy => "occupancy",
            TaskKind::Sdf => "sdf",
            TaskKind::Classification => "classification",
        }
    }

    /// Occupancy and classification targets are binary labels.
    pub fn is_binary(self) -> bool {
        !matches!(self, TaskKind::Sdf)
    }
}

impl std::str::FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "occupancy" => Ok(TaskKind::Occupancy),
            "sdf" => Ok(TaskKind::Sdf),
            "classification" => Ok(TaskKind::Classification),
            _ => Err(Error::Argument(format!("unknown task `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// Query points with optional per-shape latent codes and scalar targets.
///
/// Stored column-wise: `coords` holds one point per row and `latent_ids[i]`
/// indexes `latents` for point `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskDataset {
    pub task: TaskKind,
    pub split: Split,
    pub coords: Array2<f64>,
    pub latent_ids: Option<Vec<usize>>,
    pub targets: Vec<f64>,
    pub latents: Vec<LatentCode>,
    /// Identifier of the oracle that produced `latents`.
    pub oracle_id: Option<String>,
    /// Hash of the generator configuration.
    pub provenance: String,
}

impl TaskDataset {
    pub fn new(
        task: TaskKind,
        split: Split,
        coords: Array2<f64>,
        targets: Vec<f64>,
        provenance: impl Into<String>,
    ) -> Result<Self> {
        let ds = TaskDataset {
            task,
            split,
            coords,
            latent_ids: None,
            targets,
            latents: Vec::new(),
            oracle_id: None,
            provenance: provenance.into(),
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn with_latents(
        mut self,
        latent_ids: Vec<usize>,
        latents: Vec<LatentCode>,
        oracle_id: impl Into<String>,
    ) -> Result<Self> {
        self.latent_ids = Some(latent_ids);
        self.latents = latents;
        self.oracle_id = Some(oracle_id.into());
        self.validate()?;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn coord_dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn latent_dim(&self) -> usize {
        self.latents.first().map_or(0, LatentCode::dim)
    }

    /// Decoder input width: coordinates plus latent code.
    pub fn input_dim(&self) -> usize {
        self.coord_dim() + self.latent_dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.coords.nrows() != self.targets.len() {
            return Err(Error::Shape(format!(
                "{} points but {} targets",
                self.coords.nrows(),
                self.targets.len()
            )));
        }
        if self.coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite coordinate".into()));
        }
        if self.task.is_binary() {
            if let Some(t) = self.targets.iter().find(|&&t| t != 0.0 && t != 1.0) {
                return Err(Error::Argument(format!(
                    "{} target {t} is not 0 or 1",
                    self.task.name()
                )));
            }
        } else if self.targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::Numeric("non-finite SDF target".into()));
        }
        if let Some(ids) = &self.latent_ids {
            if ids.len() != self.targets.len() {
                return Err(Error::Shape(
                    "latent id column length differs from points".into(),
                ));
            }
            if let Some(&bad) = ids.iter().find(|&&i| i >= self.latents.len()) {
                return Err(Error::Argument(format!(
                    "latent id {bad} missing from table"
                )));
            }
            let d = self.latent_dim();
            if self.latents.iter().any(|z| z.dim() != d) {
                return Err(Error::Shape("latent codes differ in dimension".into()));
            }
        }
        Ok(())
    }

    /// Network inputs `[x, z]` and targets as matrices.
    pub fn training_data(&self) -> TrainingData {
        let n = self.len();
        let (dx, dz) = (self.coord_dim(), self.latent_dim());
        let mut inputs = Array2::zeros((n, dx + dz));
        for i in 0..n {
            let mut row = inputs.row_mut(i);
            for c in 0..dx {
                row[c] = self.coords[[i, c]];
            }
            if let Some(ids) = &self.latent_ids {
                for (c, v) in self.latents[ids[i]].values().iter().enumerate() {
                    row[dx + c] = *v;
                }
            }
        }
        let targets = Array2::from_shape_vec((n, 1), self.targets.clone()).expect("n targets");
        TrainingData { inputs, targets }
    }

    /// Rows whose latent id equals `shape`, as a new dataset sharing the table.
    pub fn select_shape(&self, shape: usize) -> TaskDataset {
        let rows: Vec<usize> = match &self.latent_ids {
            Some(ids) => (0..self.len()).filter(|&i| ids[i] == shape).collect(),
            None => (0..self.len()).collect(),
        };
        TaskDataset {
            task: self.task,
            split: self.split,
            coords: self.coords.select(ndarray::Axis(0), &rows),
            latent_ids: self
                .latent_ids
                .as_ref()
                .map(|ids| rows.iter().map(|&i| ids[i]).collect()),
            targets: rows.iter().map(|&i| self.targets[i]).collect(),
            latents: self.latents.clone(),
            oracle_id: self.oracle_id.clone(),
            provenance: format!("{}#shape{shape}", self.provenance),
        }
    }

    pub fn to_doc(&self) -> TextDoc {
        let mut doc = TextDoc::new(DATASET_KIND, DATASET_VERSION);
        doc.field("task", self.task.name())
            .field("split", self.split.name())
            .field("provenance", &self.provenance)
            .field("points", self.len())
            .field("coord_dim", self.coord_dim())
            .field("oracle", self.oracle_id.as_deref().unwrap_or("none"))
            .field("latents", self.latents.len())
            .field("latent_dim", self.latent_dim())
            .field(
                "latent_source",
                self.latents.first().map_or("none", |z| z.source().name()),
            );
        doc.array("coords", self.coords.as_slice().expect("standard layout"));
        doc.array("targets", &self.targets);
        if let Some(ids) = &self.latent_ids {
            let ids: Vec<f64> = ids.iter().map(|&i| i as f64).collect();
            doc.array("latent_ids", &ids);
            let flat: Vec<f64> = self
                .latents
                .iter()
                .flat_map(|z| z.values().to_vec())
                .collect();
            doc.array("latent_values", &flat);
        }
        doc
    }

    pub fn from_doc(doc: &TextDoc) -> Result<Self> {
        doc.expect_kind(DATASET_KIND, DATASET_VERSION)?;
        let n: usize = doc.parse_field("points")?;
        let dx: usize = doc.parse_field("coord_dim")?;
        let coords = Array2::from_shape_vec((n, dx), doc.require_array("coords")?.to_vec())
            .map_err(|e| Error::Shape(e.to_string()))?;
        let split = match doc.require("split")? {
            "train" => Split::Train,
            "test" => Split::Test,
            other => return Err(Error::Argument(format!("unknown split `{other}`"))),
        };
        let mut ds = TaskDataset::new(
            doc.require("task")?.parse()?,
            split,
            coords,
            doc.require_array("targets")?.to_vec(),
            doc.require("provenance")?,
        )?;
        if let Some(ids) = doc.get_array("latent_ids") {
            let dz: usize = doc.parse_field("latent_dim")?;
            let flat = doc.require_array("latent_values")?;
            let source: LatentSource = doc.require("latent_source")?.parse()?;
            let latents = flat
                .chunks(dz.max(1))
                .map(|c| LatentCode::new(c.to_vec(), source))
                .collect::<Result<Vec<_>>>()?;
            ds = ds.with_latents(
                ids.iter().map(|&i| i as usize).collect(),
                latents,
                doc.require("oracle")?,
            )?;
        }
        Ok(ds)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_doc().write_to(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_doc(&TextDoc::read_from(path)?)
    }
}

/// Reject dataset pairs whose latent codes come from different oracles.
pub fn check_shared_oracle(a: &TaskDataset, b: &TaskDataset) -> Result<()> {
    if a.oracle_id != b.oracle_id {
        return Err(Error::Contract(format!(
            "datasets use different oracles ({:?} vs {:?})",
            a.oracle_id, b.oracle_id
        )));
    }
    Ok(())
}
