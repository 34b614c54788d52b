//! Dropsembles on the sinusoidal toy task, assembled from library calls:
//! train one dropout network on task A, sample thinned members, fine-tune
//! each on the small shifted task B with and without EWC, and compare.
//!
//! cargo run --example toy_dropsembles [epochs_a] [epochs_b]

use dropsembles::data::{gen_toy_classification, ToyConfig};
use dropsembles::harness::{Experiment, ExperimentConfig};
use dropsembles::metrics::evaluate_points;
use dropsembles::uq::{run_dropsembles, train_task_a, DropsemblesConfig};

fn main() -> dropsembles::Result<()> {
    let mut args = std::env::args()
        .skip(1)
        .map(|a| a.parse::<usize>().expect("epoch count"));
    let mut cfg = ExperimentConfig::defaults(Experiment::Toy);
    cfg.task_a.epochs = args.next().unwrap_or(300);
    cfg.task_b.epochs = args.next().unwrap_or(300);

    let splits = gen_toy_classification(&ToyConfig::default(), 7)?;
    let checkpoint = train_task_a(
        cfg.layers(),
        &splits.a_train.training_data(),
        &cfg.phase_a(),
        7,
        "toy-a",
    )?;

    println!(
        "{:<18} {:>7} {:>7} {:>7} {:>7}",
        "method", "Acc-A", "ECE-A", "Acc-B", "ECE-B"
    );
    for lambda in [0.0, 100.0] {
        let config = DropsemblesConfig {
            members: cfg.members,
            lambda,
            phase: cfg.phase_b(),
            master_seed: 7,
            parallel: false,
        };
        let (model, ledger) =
            run_dropsembles(&checkpoint, &splits.b_train.training_data(), &config)?;
        let a = evaluate_points(&model, &splits.a_test)?;
        let b = evaluate_points(&model, &splits.b_test)?;
        let name = if lambda > 0.0 {
            "dropsembles+EWC"
        } else {
            "dropsembles"
        };
        println!(
            "{name:<18} {:>7.1} {:>7.1} {:>7.1} {:>7.1}",
            a.accuracy, a.ece, b.accuracy, b.ece
        );
        println!(
            "{:<18} task-A trainings {}, task-B fine-tunes {}",
            "", ledger.task_a_runs, ledger.task_b_runs
        );
    }
    Ok(())
}
