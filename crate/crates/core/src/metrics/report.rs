use crate::data::{TaskDataset, TaskKind};
use crate::error::{Error, Result};
use crate::metrics::calibration::{
    binary_confidence, ece, BinTotals, ReliabilityBins, DEFAULT_BINS,
};
use crate::metrics::entropy::predictive_entropy;
use crate::metrics::overlap::{dice, hausdorff, iou};
use crate::raster::{BinaryMask, Grid};
use crate::uq::{CostLedger, EnsembleModel, MemberOutputs};

/// Evaluation bundle for one run. Accuracy, ECE and overlap scores are
/// percentages; `None` marks a metric that does not apply or is undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub ece: f64,
    pub dsc: Option<f64>,
    /// Mean of per-member DSC.
    pub dsc_avg: Option<f64>,
    pub iou: Option<f64>,
    pub hausdorff: Option<f64>,
    pub mean_entropy: f64,
    /// Mean total variation of per-member SDF fields.
    pub roughness: Option<f64>,
    pub reliability: ReliabilityBins,
    pub costs: CostLedger,
}

pub const RECORD_KEYS: [&str; 14] = [
    "accuracy",
    "ece",
    "dsc",
    "dsc_avg",
    "iou",
    "hausdorff",
    "mean_entropy",
    "roughness",
    "reliability",
    "task_a_runs",
    "task_a_epochs",
    "task_b_runs",
    "task_b_epochs",
    "n_bins",
];

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

impl MetricsReport {
    /// Flat key/value pairs in [`RECORD_KEYS`] order. Floats use shortest
    /// round-trip formatting, missing values are empty.
    pub fn to_record(&self) -> Vec<(&'static str, String)> {
        let values = [
            self.accuracy.to_string(),
            self.ece.to_string(),
            opt(self.dsc),
            opt(self.dsc_avg),
            opt(self.iou),
            opt(self.hausdorff),
            self.mean_entropy.to_string(),
            opt(self.roughness),
            self.reliability.encode(),
            self.costs.task_a_runs.to_string(),
            self.costs.task_a_epochs.to_string(),
            self.costs.task_b_runs.to_string(),
            self.costs.task_b_epochs.to_string(),
            self.reliability.n_bins().to_string(),
        ];
        RECORD_KEYS.iter().copied().zip(values).collect()
    }

    pub fn from_record<'a>(record: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self> {
        let map: std::collections::HashMap<&str, &str> = record.into_iter().collect();
        let get = |k: &str| {
            map.get(k)
                .copied()
                .ok_or_else(|| Error::Argument(format!("record lacks `{k}`")))
        };
        let num = |k: &str| -> Result<f64> {
            get(k)?
                .parse()
                .map_err(|_| Error::Argument(format!("bad number for `{k}`")))
        };
        let count = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Argument(format!("bad count for `{k}`")))
        };
        let maybe = |k: &str| -> Result<Option<f64>> {
            let v = get(k)?;
            if v.is_empty() {
                Ok(None)
            } else {
                v.parse()
                    .map(Some)
                    .map_err(|_| Error::Argument(format!("bad number for `{k}`")))
            }
        };
        Ok(MetricsReport {
            accuracy: num("accuracy")?,
            ece: num("ece")?,
            dsc: maybe("dsc")?,
            dsc_avg: maybe("dsc_avg")?,
            iou: maybe("iou")?,
            hausdorff: maybe("hausdorff")?,
            mean_entropy: num("mean_entropy")?,
            roughness: maybe("roughness")?,
            reliability: ReliabilityBins::decode(get("reliability")?)?,
            costs: CostLedger {
                task_a_runs: count("task_a_runs")?,
                task_a_epochs: count("task_a_epochs")?,
                task_b_runs: count("task_b_runs")?,
                task_b_epochs: count("task_b_epochs")?,
            },
        })
    }

    /// Average over several evaluations (e.g. one per image). Scalars are
    /// averaged, optional metrics over the reports that define them,
    /// reliability totals and costs are summed.
    pub fn combine(reports: &[MetricsReport]) -> Result<MetricsReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::Argument("nothing to combine".into()))?;
        let n = reports.len() as f64;
        let mean = |f: fn(&MetricsReport) -> f64| reports.iter().map(f).sum::<f64>() / n;
        let mean_opt = |f: fn(&MetricsReport) -> Option<f64>| {
            let vals: Vec<f64> = reports.iter().filter_map(f).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let n_bins = first.reliability.n_bins();
        let mut totals = vec![BinTotals::default(); n_bins];
        let mut costs = CostLedger::default();
        for r in reports {
            if r.reliability.n_bins() != n_bins {
                return Err(Error::Argument("reports use different bin counts".into()));
            }
            for (t, b) in totals.iter_mut().zip(r.reliability.totals()) {
                t.confidence_sum += b.confidence_sum;
                t.hit_count += b.hit_count;
                t.sample_count += b.sample_count;
            }
            costs.task_a_runs += r.costs.task_a_runs;
            costs.task_a_epochs += r.costs.task_a_epochs;
            costs.task_b_runs += r.costs.task_b_runs;
            costs.task_b_epochs += r.costs.task_b_epochs;
        }
        Ok(MetricsReport {
            accuracy: mean(|r| r.accuracy),
            ece: mean(|r| r.ece),
            dsc: mean_opt(|r| r.dsc),
            dsc_avg: mean_opt(|r| r.dsc_avg),
            iou: mean_opt(|r| r.iou),
            hausdorff: mean_opt(|r| r.hausdorff),
            mean_entropy: mean(|r| r.mean_entropy),
            roughness: mean_opt(|r| r.roughness),
            reliability: ReliabilityBins::from_totals(totals)?,
            costs,
        })
    }
}

/// Mean absolute difference between 4-neighbours.
pub fn total_variation(field: &Grid<f64>) -> f64 {
    let (h, w) = field.dims();
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for r in 0..h {
        for c in 0..w {
            let v = *field.get(r, c);
            if c + 1 < w {
                sum += (field.get(r, c + 1) - v).abs();
                pairs += 1;
            }
            if r + 1 < h {
                sum += (field.get(r + 1, c) - v).abs();
                pairs += 1;
            }
        }
    }
    if pairs == 0 {
        0.0
    } else {
        sum / pairs as f64
    }
}

/// What to evaluate against.
#[derive(Debug, Clone, Copy)]
pub enum EvalData<'a> {
    /// Labelled points (classification).
    Points(&'a TaskDataset),
    /// One dense raster in row-major pixel order with its ground-truth mask.
    Raster {
        dataset: &'a TaskDataset,
        truth: &'a BinaryMask,
    },
}

/// Report plus per-point maps for figures.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricsReport,
    /// Probability of class 1 (inside) per point.
    pub probability: Vec<f64>,
    /// Raw mixture mean per point (probability or SDF).
    pub mean: Vec<f64>,
    pub entropy: Vec<f64>,
}

fn member_probabilities(task: TaskKind, out: &MemberOutputs) -> Vec<f64> {
    match task {
        TaskKind::Sdf => out.fraction_below(0.0).to_vec(),
        _ => out.mean().to_vec(),
    }
}

fn member_mask(task: TaskKind, row: &[f64], h: usize, w: usize) -> BinaryMask {
    let data = row
        .iter()
        .map(|&v| match task {
            TaskKind::Sdf => v < 0.0,
            _ => v >= 0.5,
        })
        .collect();
    Grid::from_vec(h, w, data).expect("raster rows")
}

/// Evaluate an ensemble (or MC-dropout model) on dense ground truth.
///
/// Occupancy masks threshold the mean probability at 0.5; SDF masks take
/// `mean SDF < 0` and use the fraction of members below zero as probability.
pub fn evaluate_run(
    model: &EnsembleModel,
    data: EvalData<'_>,
    n_bins: usize,
) -> Result<Evaluation> {
    let dataset = match data {
        EvalData::Points(ds) | EvalData::Raster { dataset: ds, .. } => ds,
    };
    if model.input_dim() != dataset.input_dim() {
        return Err(Error::Contract(format!(
            "model takes {} inputs but the dataset provides {}",
            model.input_dim(),
            dataset.input_dim()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Argument("evaluation dataset is empty".into()));
    }
    let task = dataset.task;
    let out = model.member_outputs(dataset.training_data().inputs.view())?;
    let mean = out.mean().to_vec();
    let probability = member_probabilities(task, &out);

    let (pred_mask, truth_labels): (Vec<bool>, Vec<bool>) = match data {
        EvalData::Points(ds) => {
            if task == TaskKind::Sdf {
                return Err(Error::Contract(
                    "point evaluation needs binary targets".into(),
                ));
            }
            (
                probability
                    .iter()
                    .map(|&p| binary_confidence(p).0)
                    .collect(),
                ds.targets.iter().map(|&t| t == 1.0).collect(),
            )
        }
        EvalData::Raster { truth, .. } => {
            if task == TaskKind::Classification {
                return Err(Error::Contract(
                    "raster evaluation needs a reconstruction task".into(),
                ));
            }
            if truth.len() != dataset.len() {
                return Err(Error::Contract(format!(
                    "{} pixels but {} query points",
                    truth.len(),
                    dataset.len()
                )));
            }
            let pred = match task {
                TaskKind::Sdf => mean.iter().map(|&v| v < 0.0).collect(),
                _ => probability
                    .iter()
                    .map(|&p| binary_confidence(p).0)
                    .collect(),
            };
            (pred, truth.as_slice().to_vec())
        }
    };
    let correct = pred_mask
        .iter()
        .zip(&truth_labels)
        .filter(|(a, b)| a == b)
        .count();
    let accuracy = 100.0 * correct as f64 / truth_labels.len() as f64;
    let (ece_value, reliability) = ece(&probability, &truth_labels, n_bins)?;
    let entropy = probability
        .iter()
        .map(|&p| predictive_entropy(p))
        .collect::<Result<Vec<_>>>()?;
    let mean_entropy = entropy.iter().sum::<f64>() / entropy.len() as f64;

    let mut report = MetricsReport {
        accuracy,
        ece: 100.0 * ece_value,
        dsc: None,
        dsc_avg: None,
        iou: None,
        hausdorff: None,
        mean_entropy,
        roughness: None,
        reliability,
        costs: CostLedger::default(),
    };
    if let EvalData::Raster { truth, .. } = data {
        let (h, w) = truth.dims();
        let pred = Grid::from_vec(h, w, pred_mask)?;
        report.dsc = Some(100.0 * dice(&pred, truth)?);
        report.iou = Some(100.0 * iou(&pred, truth)?);
        report.hausdorff = match hausdorff(&pred, truth) {
            Ok(d) => Some(d),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        let mut member_dsc = 0.0;
        let mut member_tv = 0.0;
        for row in out.values.rows() {
            let row = row.to_vec();
            member_dsc += dice(&member_mask(task, &row, h, w), truth)?;
            if task == TaskKind::Sdf {
                member_tv += total_variation(&Grid::from_vec(h, w, row)?);
            }
        }
        let m = out.members() as f64;
        report.dsc_avg = Some(100.0 * member_dsc / m);
        if task == TaskKind::Sdf {
            report.roughness = Some(member_tv / m);
        }
    }
    Ok(Evaluation {
        report,
        probability,
        mean,
        entropy,
    })
}

pub fn evaluate_points(model: &EnsembleModel, dataset: &TaskDataset) -> Result<MetricsReport> {
    Ok(evaluate_run(model, EvalData::Points(dataset), DEFAULT_BINS)?.report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_round_trips_with_missing_values() {
        let (_, reliability) = ece(&[0.2, 0.93, 0.61], &[false, true, false], 10).unwrap();
        let report = MetricsReport {
            accuracy: 66.66666666666667,
            ece: 12.345678901234567,
            dsc: Some(71.3),
            dsc_avg: None,
            iou: Some(0.1 + 0.2),
            hausdorff: None,
            mean_entropy: 0.4,
            roughness: None,
            reliability,
            costs: CostLedger {
                task_a_runs: 1,
                task_a_epochs: 800,
                task_b_runs: 4,
                task_b_epochs: 2400,
            },
        };
        let record = report.to_record();
        let back =
            MetricsReport::from_record(record.iter().map(|(k, v)| (*k, v.as_str()))).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn total_variation_of_ramp() {
        let g = Grid::from_fn(3, 3, |_, c| c as f64);
        assert!((total_variation(&g) - 0.5).abs() < 1e-15);
        assert_eq!(total_variation(&Grid::filled(4, 4, 2.0)), 0.0);
    }
}
