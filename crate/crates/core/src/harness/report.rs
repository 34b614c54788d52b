//! Consolidated results tables, cross-run figures and threshold gates.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::harness::run::{read_seed_metrics, PredictionMaps, RunManifest};
use crate::metrics::{panels_svg, write_svg, MetricsReport, Panel};

pub const REPORT_COLUMNS: [&str; 16] = [
    "config",
    "experiment",
    "method",
    "ewc_lambda",
    "members",
    "seed",
    "Acc-A",
    "ECE-A",
    "Acc-B",
    "ECE-B",
    "DSC",
    "DSC avg",
    "HD",
    "ECE",
    "task_a_runs",
    "task_b_runs",
];
/// Columns holding metric values, in table order.
const VALUE_COLUMNS: std::ops::Range<usize> = 6..16;

/// One completed seed run as it appears in the table.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub task_a: Option<MetricsReport>,
    pub task_b: MetricsReport,
}

impl RunRecord {
    pub fn load(dir: &Path) -> Result<Self> {
        let manifest = RunManifest::load(&dir.join("manifest.txt"))?;
        if !manifest.is_complete() {
            return Err(Error::Argument(format!(
                "{}: run is incomplete",
                dir.display()
            )));
        }
        let metrics = read_seed_metrics(&dir.join("metrics.csv"))?;
        Ok(RunRecord {
            dir: dir.to_path_buf(),
            manifest,
            task_a: metrics.task_a,
            task_b: metrics.task_b,
        })
    }

    /// Metric values in [`REPORT_COLUMNS`] order from `Acc-A` on.
    pub fn values(&self) -> [Option<f64>; 10] {
        let b = &self.task_b;
        let ledger = &self.manifest.ledger;
        let counts = [
            Some(ledger.task_a_runs as f64),
            Some(ledger.task_b_runs as f64),
        ];
        match &self.task_a {
            Some(a) => [
                Some(a.accuracy),
                Some(a.ece),
                Some(b.accuracy),
                Some(b.ece),
                None,
                None,
                None,
                None,
                counts[0],
                counts[1],
            ],
            None => [
                None,
                None,
                Some(b.accuracy),
                Some(b.ece),
                b.dsc,
                b.dsc_avg,
                b.hausdorff,
                Some(b.ece),
                counts[0],
                counts[1],
            ],
        }
    }

    fn group_key(&self) -> (String, String, u64, usize, String) {
        let m = &self.manifest;
        (
            m.experiment.clone(),
            m.method.clone(),
            m.ewc_lambda.to_bits(),
            m.members,
            m.config_hash.clone(),
        )
    }
}

/// Seed directories under `path`: the path itself when it holds a manifest,
/// otherwise every descendant that does, skipping the shared cache.
pub fn find_run_dirs(path: &Path) -> Vec<PathBuf> {
    if path.join("manifest.txt").is_file() {
        return vec![path.to_path_buf()];
    }
    let mut out = Vec::new();
    let Ok(entries) = std::fs::read_dir(path) else {
        return out;
    };
    let mut children: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    for child in children {
        if child
            .file_name()
            .is_some_and(|n| n == "cache" || n == "checkpoints" || n == "plots")
        {
            continue;
        }
        out.extend(find_run_dirs(&child));
    }
    out
}

/// Load every run under `paths`. Unreadable or incomplete runs are logged
/// and returned separately.
pub fn collect_runs(paths: &[PathBuf]) -> (Vec<RunRecord>, Vec<PathBuf>) {
    let mut runs = Vec::new();
    let mut skipped = Vec::new();
    for path in paths {
        let dirs = find_run_dirs(path);
        if dirs.is_empty() {
            log::warn!("{}: no run manifest found, skipped", path.display());
            skipped.push(path.clone());
        }
        for dir in dirs {
            match RunRecord::load(&dir) {
                Ok(r) => runs.push(r),
                Err(e) => {
                    log::warn!("{}: {e}, skipped", dir.display());
                    skipped.push(dir);
                }
            }
        }
    }
    (runs, skipped)
}

/// Sample mean and standard deviation; the deviation is 0 for fewer than two values.
pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() < 2 {
        0.0
    } else {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    Some((mean, std))
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| format!("{x:.4}"))
}

/// Aggregate statistics of one configuration over its seeds.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub config: String,
    pub experiment: String,
    pub method: String,
    pub ewc_lambda: f64,
    pub members: usize,
    pub seeds: usize,
    /// Mean and sample standard deviation per metric column.
    pub stats: [Option<(f64, f64)>; 10],
}

impl AggregateRow {
    pub fn column(&self, name: &str) -> Option<(f64, f64)> {
        let i = REPORT_COLUMNS.iter().position(|c| *c == name)?;
        VALUE_COLUMNS
            .contains(&i)
            .then(|| self.stats[i - VALUE_COLUMNS.start])
            .flatten()
    }
}

/// Consolidated table: per-seed rows followed by one aggregate row per configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultsTable {
    pub runs: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRow>,
}

impl ResultsTable {
    pub fn new(mut runs: Vec<RunRecord>) -> Self {
        runs.sort_by(|a, b| {
            a.group_key()
                .cmp(&b.group_key())
                .then(a.manifest.seed.cmp(&b.manifest.seed))
        });
        runs.dedup_by(|a, b| a.group_key() == b.group_key() && a.manifest.seed == b.manifest.seed);
        let mut groups: BTreeMap<_, Vec<&RunRecord>> = BTreeMap::new();
        for r in &runs {
            groups.entry(r.group_key()).or_default().push(r);
        }
        let aggregates = groups
            .into_values()
            .map(|members| {
                let m = &members[0].manifest;
                let values: Vec<[Option<f64>; 10]> = members.iter().map(|r| r.values()).collect();
                let stats = std::array::from_fn(|c| {
                    let col: Vec<f64> = values.iter().filter_map(|v| v[c]).collect();
                    mean_std(&col)
                });
                AggregateRow {
                    config: m.config_hash.clone(),
                    experiment: m.experiment.clone(),
                    method: m.method.clone(),
                    ewc_lambda: m.ewc_lambda,
                    members: m.members,
                    seeds: members.len(),
                    stats,
                }
            })
            .collect();
        ResultsTable { runs, aggregates }
    }

    /// CSV text. Aggregate rows carry `mean` in the seed column and
    /// `mean±std` cells.
    pub fn to_csv(&self) -> String {
        let mut out = REPORT_COLUMNS.join(",");
        out.push('\n');
        for agg in &self.aggregates {
            for r in self
                .runs
                .iter()
                .filter(|r| r.manifest.config_hash == agg.config)
            {
                let m = &r.manifest;
                let _ = write!(
                    out,
                    "{},{},{},{},{},{}",
                    m.config_hash, m.experiment, m.method, m.ewc_lambda, m.members, m.seed
                );
                for v in r.values() {
                    let _ = write!(out, ",{}", cell(v));
                }
                out.push('\n');
            }
            let _ = write!(
                out,
                "{},{},{},{},{},mean",
                agg.config, agg.experiment, agg.method, agg.ewc_lambda, agg.members
            );
            for s in &agg.stats {
                match s {
                    Some((mean, std)) => {
                        let _ = write!(out, ",{mean:.4}±{std:.4}");
                    }
                    None => out.push(','),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// One SVG per (seed, target) comparing every run's mean and entropy
    /// maps side by side. Returns the written paths.
    pub fn write_panels(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        let mut by_cell: BTreeMap<(u64, String), Vec<(&RunRecord, PathBuf)>> = BTreeMap::new();
        for r in &self.runs {
            let Ok(entries) = std::fs::read_dir(r.dir.join("plots")) else {
                continue;
            };
            for e in entries.filter_map(|e| e.ok()) {
                let name = e.file_name().to_string_lossy().into_owned();
                if let Some(k) = name
                    .strip_prefix("maps-")
                    .and_then(|n| n.strip_suffix(".txt"))
                {
                    by_cell
                        .entry((r.manifest.seed, k.to_string()))
                        .or_default()
                        .push((r, e.path()));
                }
            }
        }
        let mut written = Vec::new();
        for ((seed, k), runs) in by_cell {
            let mut panels = Vec::new();
            for (i, (run, path)) in runs.iter().enumerate() {
                let maps = PredictionMaps::load(path)?;
                if i == 0 {
                    panels.push(Panel {
                        title: "truth".into(),
                        image: maps.truth.clone(),
                        range: (0.0, 1.0),
                    });
                    panels.push(Panel {
                        title: "observed".into(),
                        image: maps.observed.clone(),
                        range: (0.0, 1.0),
                    });
                }
                let label = format!("{} λ={}", run.manifest.method, run.manifest.ewc_lambda);
                panels.push(Panel {
                    title: format!("{label} mean"),
                    image: maps.mean,
                    range: (0.0, 1.0),
                });
                panels.push(Panel {
                    title: format!("{label} H"),
                    image: maps.entropy,
                    range: (0.0, std::f64::consts::LN_2),
                });
            }
            let path = dir.join(format!("panels-seed{seed}-target{k}.svg"));
            write_svg(&path, &panels_svg(&panels, 112.0)?)?;
            written.push(path);
        }
        Ok(written)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparison {
    AtLeast,
    AtMost,
    Above,
    Below,
}

/// A threshold on an aggregate column, e.g. `Acc-B>=85` or
/// `dropsembles:DSC>60`.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub method: Option<String>,
    pub column: String,
    pub comparison: Comparison,
    pub threshold: f64,
}

impl std::str::FromStr for Gate {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (method, rest) = match s.split_once(':') {
            Some((m, r)) => (Some(m.trim().to_string()), r),
            None => (None, s),
        };
        let ops = [
            (">=", Comparison::AtLeast),
            ("<=", Comparison::AtMost),
            (">", Comparison::Above),
            ("<", Comparison::Below),
        ];
        let (pos, op, comparison) = ops
            .iter()
            .filter_map(|(op, c)| rest.find(op).map(|p| (p, *op, *c)))
            .min_by_key(|(p, op, _)| (*p, std::cmp::Reverse(op.len())))
            .ok_or_else(|| Error::Argument(format!("gate `{s}` lacks a comparison")))?;
        let column = rest[..pos].trim().to_string();
        if !REPORT_COLUMNS[VALUE_COLUMNS].contains(&column.as_str()) {
            return Err(Error::Argument(format!(
                "gate `{s}`: unknown column `{column}`"
            )));
        }
        let threshold = rest[pos + op.len()..]
            .trim()
            .parse()
            .map_err(|_| Error::Argument(format!("gate `{s}`: bad threshold")))?;
        Ok(Gate {
            method,
            column,
            comparison,
            threshold,
        })
    }
}

impl Gate {
    /// Aggregate rows that violate the gate, as readable messages. Rows
    /// without the column are not checked.
    pub fn violations(&self, table: &ResultsTable) -> Vec<String> {
        table
            .aggregates
            .iter()
            .filter(|a| self.method.as_ref().is_none_or(|m| *m == a.method))
            .filter_map(|a| {
                let (mean, _) = a.column(&self.column)?;
                let ok = match self.comparison {
                    Comparison::AtLeast => mean >= self.threshold,
                    Comparison::AtMost => mean <= self.threshold,
                    Comparison::Above => mean > self.threshold,
                    Comparison::Below => mean < self.threshold,
                };
                (!ok).then(|| {
                    format!(
                        "{} {} λ={}: {} = {mean:.4} fails {:?} {}",
                        a.experiment,
                        a.method,
                        a.ewc_lambda,
                        self.column,
                        self.comparison,
                        self.threshold
                    )
                })
            })
            .collect()
    }
}

/// Outcome of [`report`].
#[derive(Debug, Clone)]
pub struct ReportOutcome {
    pub table: ResultsTable,
    pub csv: PathBuf,
    pub panels: Vec<PathBuf>,
    pub skipped: Vec<PathBuf>,
}

/// Consolidate runs under `paths` into `out_dir/results.csv` plus comparison panels.
pub fn report(paths: &[PathBuf], out_dir: &Path) -> Result<ReportOutcome> {
    let (runs, skipped) = collect_runs(paths);
    let table = ResultsTable::new(runs);
    let csv = out_dir.join("results.csv");
    table.write_csv(&csv)?;
    let panels = table.write_panels(&out_dir.join("panels"))?;
    Ok(ReportOutcome {
        table,
        csv,
        panels,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(m, 2.5);
        assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
        assert_eq!(mean_std(&[7.0]), Some((7.0, 0.0)));
        assert_eq!(mean_std(&[]), None);
    }

    #[test]
    fn empty_table_is_header_only() {
        let csv = ResultsTable::new(Vec::new()).to_csv();
        assert_eq!(csv, format!("{}\n", REPORT_COLUMNS.join(",")));
    }

    #[test]
    fn gates_parse() {
        let g: Gate = "dropsembles:Acc-B>=85".parse().unwrap();
        assert_eq!(g.method.as_deref(), Some("dropsembles"));
        assert_eq!(g.column, "Acc-B");
        assert_eq!(g.comparison, Comparison::AtLeast);
        assert_eq!(g.threshold, 85.0);
        let g: Gate = "ECE<5".parse().unwrap();
        assert_eq!(g.comparison, Comparison::Below);
        assert!("Accuracy>=1".parse::<Gate>().is_err());
        assert!("Acc-A 85".parse::<Gate>().is_err());
    }
}
