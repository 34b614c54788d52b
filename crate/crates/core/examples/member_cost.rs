//! Training cost as the ensemble grows: Dropsembles reuse one pretrained
//! network, deep ensembles pretrain every member.
//!
//! cargo run --example member_cost [run_root]

use std::path::PathBuf;

use dropsembles::harness::{sweep, Experiment, ExperimentConfig, Method, SweepAxis};

fn main() -> dropsembles::Result<()> {
    let root = PathBuf::from(
        std::env::args()
            .nth(1)
            .unwrap_or_else(|| "runs-members".into()),
    );
    let mut base = ExperimentConfig::defaults(Experiment::Toy);
    base.task_a.epochs = 100;
    base.task_b.epochs = 80;
    println!(
        "{:<14} {:>3} {:>8} {:>8} {:>7}",
        "method", "M", "A-runs", "B-runs", "Acc-B"
    );
    for method in [Method::Dropsembles, Method::DeepEnsemble] {
        let mut cfg = base.clone();
        cfg.method = method;
        let out = sweep(&cfg, SweepAxis::Members, &[1.0, 2.0, 4.0, 8.0], &root)?;
        for cell in &out.cells {
            let ledger = cell.runs[0].manifest.ledger;
            let acc = cell.aggregate.column("Acc-B").map_or(f64::NAN, |(m, _)| m);
            println!(
                "{:<14} {:>3} {:>8} {:>8} {acc:>7.1}",
                method.name(),
                cell.value,
                ledger.task_a_runs,
                ledger.task_b_runs
            );
        }
    }
    Ok(())
}
