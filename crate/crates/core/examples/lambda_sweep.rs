//! EWC strength ablation on the toy task: one run per λ, a CSV of mean±std
//! per column and a line plot of the accuracies.
//!
//! cargo run --example lambda_sweep [run_root] [epochs_a] [epochs_b]

use std::path::PathBuf;

use dropsembles::harness::{sweep, Experiment, ExperimentConfig, SweepAxis};

fn main() -> dropsembles::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let root = PathBuf::from(args.first().map_or("runs-sweep", String::as_str));
    let mut cfg = ExperimentConfig::defaults(Experiment::Toy);
    cfg.task_a.epochs = args.get(1).map_or(200, |v| v.parse().expect("epochs"));
    cfg.task_b.epochs = args.get(2).map_or(150, |v| v.parse().expect("epochs"));
    let out = sweep(
        &cfg,
        SweepAxis::Lambda,
        &[0.0, 1.0, 10.0, 100.0, 1000.0],
        &root,
    )?;
    print!("{}", std::fs::read_to_string(&out.csv).expect("sweep csv"));
    println!("plot: {}", out.svg.display());
    Ok(())
}
