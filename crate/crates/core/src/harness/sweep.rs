//! One-axis ablations over the EWC strength or the member count.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;
use crate::harness::report::{AggregateRow, ResultsTable, RunRecord};
use crate::harness::run::run_experiment;
use crate::metrics::{sweep_plot_svg, write_svg, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Lambda,
    Members,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Lambda => "lambda",
            SweepAxis::Members => "M",
        }
    }

    fn apply(self, cfg: &ExperimentConfig, value: f64) -> Result<ExperimentConfig> {
        let mut out = cfg.clone();
        match self {
            SweepAxis::Lambda => out.ewc_lambda = value,
            SweepAxis::Members => {
                if value.fract() != 0.0 || value < 1.0 {
                    return Err(Error::Argument(format!(
                        "M must be a positive integer, got {value}"
                    )));
                }
                out.members = value as usize;
            }
        }
        out.validate()?;
        Ok(out)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lambda" | "ewc_lambda" => Ok(SweepAxis::Lambda),
            "M" | "m" | "members" => Ok(SweepAxis::Members),
            _ => Err(Error::Argument(format!(
                "unknown sweep axis `{s}` (lambda, M)"
            ))),
        }
    }
}

/// Metric columns of the sweep table.
pub const SWEEP_COLUMNS: [&str; 8] = [
    "Acc-A",
    "ECE-A",
    "Acc-B",
    "ECE-B",
    "DSC",
    "ECE",
    "task_a_runs",
    "task_b_runs",
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    pub aggregate: AggregateRow,
    pub runs: Vec<RunRecord>,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub axis: SweepAxis,
    pub cells: Vec<SweepCell>,
    pub csv: PathBuf,
    pub svg: PathBuf,
}

impl SweepOutcome {
    pub fn to_csv(axis: SweepAxis, cells: &[SweepCell]) -> String {
        let mut out = format!("{},{}\n", axis.name(), SWEEP_COLUMNS.join(","));
        for c in cells {
            let _ = write!(out, "{}", c.value);
            for col in SWEEP_COLUMNS {
                match c.aggregate.column(col) {
                    Some((m, s)) => {
                        let _ = write!(out, ",{m:.4}±{s:.4}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Run `cfg` once per value of `axis`, writing `<root>/sweeps/<config>-<axis>/{sweep.csv, sweep.svg}`.
/// Shared Task-A artifacts are reused across cells through the run cache.
pub fn sweep(
    cfg: &ExperimentConfig,
    axis: SweepAxis,
    values: &[f64],
    root: &Path,
) -> Result<SweepOutcome> {
    if values.is_empty() {
        return Err(Error::Argument("sweep needs at least one value".into()));
    }
    if values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Argument(
            "sweep values must be strictly increasing".into(),
        ));
    }
    let mut cells = Vec::with_capacity(values.len());
    for &value in values {
        let tag = |e: Error| Error::Phase {
            phase: format!("sweep {}={value}", axis.name()),
            source: Box::new(e),
        };
        let cell_cfg = axis.apply(cfg, value).map_err(tag)?;
        let outcome = run_experiment(&cell_cfg, root).map_err(tag)?;
        let runs = outcome
            .seeds
            .iter()
            .map(|s| RunRecord::load(&s.dir))
            .collect::<Result<Vec<_>>>()
            .map_err(tag)?;
        let table = ResultsTable::new(runs.clone());
        let aggregate = table
            .aggregates
            .into_iter()
            .next()
            .ok_or_else(|| tag(Error::Contract("sweep cell produced no runs".into())))?;
        cells.push(SweepCell {
            value,
            aggregate,
            runs,
        });
    }

    let dir = root
        .join("sweeps")
        .join(format!("{}-{}", cfg.hash(), axis.name()));
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let csv = dir.join("sweep.csv");
    std::fs::write(&csv, SweepOutcome::to_csv(axis, &cells)).map_err(|e| Error::io(&csv, e))?;

    let series: Vec<Series> = ["Acc-A", "Acc-B", "DSC"]
        .into_iter()
        .filter_map(|col| {
            let points: Vec<(f64, f64)> = cells
                .iter()
                .filter_map(|c| c.aggregate.column(col).map(|(m, _)| (c.value, m)))
                .collect();
            (!points.is_empty()).then(|| Series {
                name: col.into(),
                points,
            })
        })
        .collect();
    let svg = dir.join("sweep.svg");
    write_svg(&svg, &sweep_plot_svg(axis.name(), "%", values, &series))?;
    Ok(SweepOutcome {
        axis,
        cells,
        csv,
        svg,
    })
}
