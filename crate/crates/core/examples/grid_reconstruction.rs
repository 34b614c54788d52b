//! The sparse glyph reconstruction benchmark through the run harness:
//! MC dropout against Dropsembles on the same pretrained decoder, with
//! per-seed figures and a consolidated report.
//!
//! cargo run --example grid_reconstruction [run_root] [epochs_a] [epochs_b]

use std::path::PathBuf;

use dropsembles::harness::{report, run_experiment, Experiment, ExperimentConfig, Method};

fn main() -> dropsembles::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let root = PathBuf::from(args.first().map_or("runs-grid", String::as_str));
    let mut base = ExperimentConfig::defaults(Experiment::GridRecon);
    base.seeds = vec![1];
    base.task_a.epochs = args.get(1).map_or(20, |v| v.parse().expect("epochs"));
    base.task_b.epochs = args.get(2).map_or(15, |v| v.parse().expect("epochs"));

    let mut dirs = Vec::new();
    for (method, lambda) in [
        (Method::McDropout, 0.0),
        (Method::Dropsembles, 0.0),
        (Method::Dropsembles, 1.0),
    ] {
        let mut cfg = base.clone();
        cfg.method = method;
        cfg.ewc_lambda = lambda;
        let out = run_experiment(&cfg, &root)?;
        for seed in &out.seeds {
            let b = &seed.metrics.as_ref().expect("evaluated").task_b;
            println!(
                "{:<12} λ={lambda:<4} DSC {:>5.1}  ECE {:>4.1}  figures in {}",
                method.name(),
                b.dsc.unwrap_or(f64::NAN),
                b.ece,
                seed.dir.join("plots").display()
            );
        }
        dirs.push(out.config_dir);
    }
    let rep = report(&dirs, &root.join("report"))?;
    println!(
        "report: {} ({} comparison panels)",
        rep.csv.display(),
        rep.panels.len()
    );
    Ok(())
}
