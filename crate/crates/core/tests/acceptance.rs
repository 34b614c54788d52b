//! End-to-end acceptance checks, one verdict line per criterion.
//!
//! Criteria 1-8 are exact or structural and always fail the test when they do
//! not hold. Criteria 9-13 are stochastic desk-scale reproductions; their
//! verdicts are always printed, and they fail the test only when
//! `DROPSEMBLES_STRICT=1` is set.

mod common;

use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use common::*;
use dropsembles::harness::{
    report, run_experiment, Experiment, ExperimentConfig, HiddenActivation, Method, SeedMetrics,
};
use dropsembles::metrics::{dice, ece, hausdorff, iou, predictive_entropy};
use dropsembles::nn::{
    Activation, Dropout, DropoutMask, LossSpec, MlpNetwork, OptimizerKind, Schedule, TrainPhase,
};
use dropsembles::rng::rng_from_seed;
use dropsembles::uq::{
    ensemble_predict, estimate_fisher_diagonal, ewc_penalty, finetune_member, mixture_mean,
    sample_thinned_member, EnsembleKind, EnsembleMember, EnsembleModel, FisherDiagonal,
    PosteriorCheckpoint, ThinnedMember,
};
use rand::Rng as _;

const STRICT_ENV: &str = "DROPSEMBLES_STRICT";

struct Verdict {
    id: &'static str,
    pass: bool,
    hard: bool,
    detail: String,
}

/// Bypasses the test harness capture so the verdicts land in the log.
fn announce(v: &Verdict, secs: f64) {
    let tag = if v.pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {:>2}: {tag} ({secs:.1}s) {}\n", v.id, v.detail);
    let _ = std::io::stdout().write_all(line.as_bytes());
    let _ = std::io::stdout().flush();
}

fn check(
    id: &'static str,
    hard: bool,
    verdicts: &mut Vec<Verdict>,
    f: impl FnOnce() -> (bool, String),
) {
    let start = Instant::now();
    let (pass, detail) = f();
    let v = Verdict {
        id,
        pass,
        hard,
        detail,
    };
    announce(&v, start.elapsed().as_secs_f64());
    verdicts.push(v);
}

fn head_and_loss(kind: usize) -> (Activation, LossSpec) {
    match kind % 3 {
        0 => (Activation::Sigmoid, LossSpec::BinaryCrossEntropy),
        1 => (Activation::Linear, LossSpec::L2),
        _ => (Activation::Linear, LossSpec::ClippedL1 { delta: 10.0 }),
    }
}

fn checkpoint(net: MlpNetwork, seed: u64) -> PosteriorCheckpoint {
    let mut rng = rng_from_seed(seed);
    let fisher: Vec<f64> = (0..net.param_count())
        .map(|_| rng.random_range(0.0..2.0))
        .collect();
    PosteriorCheckpoint::new(
        net,
        FisherDiagonal::from_values(fisher, 1).unwrap(),
        "fixture",
        1,
    )
    .unwrap()
}

fn gradients() -> (bool, String) {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for i in 0..30u64 {
        let depth = 2 + (i as usize % 7);
        let (head, loss) = head_and_loss(i as usize % 2);
        let net = random_network(1000 + i, depth, i % 2 == 1, head);
        let data = random_data(&mut rng_from_seed(2000 + i), 5, net.input_dim(), i % 2 == 0);
        worst = worst.max(gradient_check(&net, &data, &loss));
    }
    let secs = start.elapsed().as_secs_f64();
    (
        worst < 1e-4 && secs < 30.0,
        format!("30 nets, max rel err {worst:.2e}, {secs:.1}s"),
    )
}

fn fisher() -> (bool, String) {
    let mut worst: f64 = 0.0;
    for i in 0..10u64 {
        let (head, loss) = head_and_loss(i as usize);
        let net = random_network(3000 + i, 2 + i as usize % 4, i % 2 == 0, head);
        let data = random_data(
            &mut rng_from_seed(4000 + i),
            12,
            net.input_dim(),
            i % 3 == 0,
        );
        let fast = estimate_fisher_diagonal(&net, &data, &loss).unwrap();
        for (a, b) in fast
            .values()
            .iter()
            .zip(brute_force_fisher(&net, &data, &loss))
        {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
    }
    (worst <= 1e-12, format!("10 nets, max rel diff {worst:.2e}"))
}

fn ewc() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut anchors_zero = true;
    for i in 0..10u64 {
        let ck = checkpoint(random_network(5000 + i, 3, false, Activation::Sigmoid), i);
        let mut rng = rng_from_seed(6000 + i);
        let theta: Vec<f64> = ck
            .theta_a()
            .iter()
            .map(|t| t + rng.random_range(-0.5..0.5))
            .collect();
        let lambda = rng.random_range(0.0..100.0);
        let (v, g) = ewc_penalty(&theta, &ck, lambda).unwrap();
        let (v2, g2) = naive_ewc(&theta, ck.theta_a(), ck.fisher().values(), lambda);
        worst = worst.max((v - v2).abs() / v2.abs().max(1.0));
        for (a, b) in g.iter().zip(&g2) {
            worst = worst.max((a - b).abs() / b.abs().max(1.0));
        }
        let (at_anchor, _) = ewc_penalty(ck.theta_a(), &ck, lambda).unwrap();
        let (off, _) = ewc_penalty(&theta, &ck, 0.0).unwrap();
        anchors_zero &= at_anchor == 0.0 && off == 0.0;
    }
    (
        worst <= 1e-12 && anchors_zero,
        format!("max rel diff {worst:.2e}, zero at anchor and at λ=0: {anchors_zero}"),
    )
}

fn thinned() -> (bool, String) {
    let mut forward_exact = true;
    for i in 0..10u64 {
        let net = random_network(
            7000 + i,
            2 + i as usize % 5,
            i % 2 == 0,
            Activation::Sigmoid,
        );
        let mask = DropoutMask::sample(net.layers(), 7100 + i);
        let member = ThinnedMember::from_parts(net.clone(), mask, i, 0.0).unwrap();
        let data = random_data(&mut rng_from_seed(7200 + i), 8, net.input_dim(), true);
        let masked = member.predict(data.inputs.view()).unwrap();
        let zeroed = member
            .materialize()
            .predict(data.inputs.view(), Dropout::Eval)
            .unwrap();
        forward_exact &= masked == zeroed;
    }
    let ck = checkpoint(random_network(7300, 4, false, Activation::Sigmoid), 7301);
    let member = sample_thinned_member(&ck, 7302).unwrap();
    let data = random_data(&mut rng_from_seed(7303), 16, ck.network().input_dim(), true);
    let phase = TrainPhase {
        epochs: 100,
        learning_rate: 1e-2,
        optimizer: OptimizerKind::adam(),
        schedule: Schedule::Constant,
        batch_size: Some(5),
        loss: LossSpec::BinaryCrossEntropy,
    };
    let tuned = finetune_member(&member, &data, &phase, &ck, 1.0).unwrap();
    let support = member.support();
    let frozen = member
        .weights()
        .iter()
        .zip(tuned.weights())
        .zip(&support)
        .filter(|(_, keep)| !**keep)
        .all(|((a, b), _)| a.to_bits() == b.to_bits());
    let masked = support.iter().filter(|k| !**k).count();
    (forward_exact && frozen && masked > 0, format!("forward exact: {forward_exact}; {masked} masked coordinates bit-identical after 100 epochs: {frozen}"))
}

fn mixture() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut order_free = true;
    for i in 0..20u64 {
        let m = 1 + i as usize % 8;
        let base = random_network(8000 + i, 3, false, Activation::Sigmoid);
        let nets: Vec<MlpNetwork> = (0..m)
            .map(|k| MlpNetwork::new(base.layers().to_vec(), 8100 + 10 * i + k as u64).unwrap())
            .collect();
        let mut rng = rng_from_seed(8200 + i);
        let x: Vec<f64> = (0..base.input_dim())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let model = |ns: &[MlpNetwork]| {
            EnsembleModel::new(
                EnsembleKind::DeepEnsemble,
                ns.iter().cloned().map(EnsembleMember::Network).collect(),
            )
            .unwrap()
        };
        let pred = ensemble_predict(&model(&nets), &x, None).unwrap();
        let fold = nets
            .iter()
            .map(|n| n.forward(&x, Dropout::Eval).unwrap().0[0])
            .fold(0.0, |a, v| a + v)
            / m as f64;
        worst = worst.max((pred.mean - fold).abs());
        let mut shuffled = nets.clone();
        shuffled.reverse();
        shuffled.rotate_left(i as usize % m);
        order_free &= ensemble_predict(&model(&shuffled), &x, None).unwrap().mean == pred.mean;
    }
    (
        worst <= 1e-15 && order_free,
        format!("max |mean - fold| {worst:.1e}, permutation-invariant: {order_free}"),
    )
}

fn metric_oracles() -> (bool, String) {
    let mut ece_exact = true;
    for i in 0..20u64 {
        let mut rng = rng_from_seed(9000 + i);
        let n = rng.random_range(1..300);
        let probs: Vec<f64> = (0..n)
            .map(|k| {
                if k % 5 == 0 {
                    f64::from(rng.random_range(0..=10)) / 10.0
                } else {
                    rng.random()
                }
            })
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let bins = 1 + i as usize % 15;
        ece_exact &=
            ece(&probs, &labels, bins).unwrap().0 == brute_force_ece(&probs, &labels, bins);
    }
    let mut hd_worst: f64 = 0.0;
    let mut iou_worst: f64 = 0.0;
    let mut rng = rng_from_seed(9100);
    let mut pairs = 0;
    while pairs < 50 {
        let (da, db) = (rng.random_range(0.01..0.4), rng.random_range(0.01..0.4));
        let a = random_mask(&mut rng, 32, da);
        let b = random_mask(&mut rng, 32, db);
        if a.count_ones() == 0 || b.count_ones() == 0 {
            continue;
        }
        hd_worst = hd_worst.max((hausdorff(&a, &b).unwrap() - brute_force_hausdorff(&a, &b)).abs());
        let d = dice(&a, &b).unwrap();
        iou_worst = iou_worst.max((iou(&a, &b).unwrap() - d / (2.0 - d)).abs());
        pairs += 1;
    }
    let mut jensen = true;
    for i in 0..100u64 {
        let mut rng = rng_from_seed(9200 + i);
        let ps: Vec<f64> = (0..1 + i as usize % 16).map(|_| rng.random()).collect();
        let mixed = predictive_entropy(mixture_mean(&ps)).unwrap();
        let mean_h = ps
            .iter()
            .map(|&p| predictive_entropy(p).unwrap())
            .sum::<f64>()
            / ps.len() as f64;
        jensen &= mixed >= mean_h - 1e-12;
    }
    (
        ece_exact && hd_worst <= 1e-9 && iou_worst <= 1e-12 && jensen,
        format!("ECE exact: {ece_exact}; Hausdorff max diff {hd_worst:.1e} on 50 pairs; IoU identity {iou_worst:.1e}; Jensen: {jensen}"),
    )
}

fn small_toy(method: Method) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(Experiment::Toy);
    cfg.method = method;
    cfg.seeds = vec![11];
    cfg.task_a.epochs = 60;
    cfg.task_b.epochs = 40;
    cfg.mc_samples = 20;
    cfg
}

fn determinism() -> (bool, String) {
    let csv = |dir: &Path| {
        let cfg = small_toy(Method::Dropsembles);
        let out = run_experiment(&cfg, dir).unwrap();
        std::fs::read(report(&[out.config_dir], &dir.join("report")).unwrap().csv).unwrap()
    };
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let (first, second) = (csv(a.path()), csv(b.path()));
    (
        first == second && !first.is_empty(),
        format!(
            "two fresh toy runs, {} CSV bytes, identical: {}",
            first.len(),
            first == second
        ),
    )
}

fn cost_ledger() -> (bool, String) {
    let dir = tempfile::tempdir().unwrap();
    let runs = |method| {
        let mut cfg = small_toy(method);
        cfg.members = 4;
        let out = run_experiment(&cfg, dir.path()).unwrap();
        out.seeds[0].manifest.ledger.task_a_runs
    };
    let (drop, deep) = (runs(Method::Dropsembles), runs(Method::DeepEnsemble));
    (
        drop == 1 && deep == 4,
        format!("M=4 Task-A trainings: dropsembles {drop}, deep-ensemble {deep}"),
    )
}

fn seed_metrics(cfg: &ExperimentConfig, root: &Path) -> Vec<SeedMetrics> {
    run_experiment(cfg, root)
        .unwrap()
        .seeds
        .into_iter()
        .map(|s| s.metrics.expect("evaluated"))
        .collect()
}

fn variant(exp: Experiment, method: Method, lambda: f64, seeds: &[u64]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::defaults(exp);
    cfg.method = method;
    cfg.ewc_lambda = lambda;
    cfg.seeds = seeds.to_vec();
    cfg
}

const SEEDS: [u64; 3] = [1, 2, 3];
const TOY_EWC: f64 = 100.0;
const GRID_EWC: f64 = 1.0;

fn toy_table(root: &Path) -> (bool, String) {
    let acc_a = |m: &SeedMetrics| m.task_a.as_ref().unwrap().accuracy;
    let ece_a = |m: &SeedMetrics| m.task_a.as_ref().unwrap().ece;
    let plain = seed_metrics(
        &variant(Experiment::Toy, Method::Dropsembles, 0.0, &SEEDS),
        root,
    );
    let ewc = seed_metrics(
        &variant(Experiment::Toy, Method::Dropsembles, TOY_EWC, &SEEDS),
        root,
    );
    let mut others = Vec::new();
    for method in [Method::McDropout, Method::DeepEnsemble] {
        for lambda in [0.0, TOY_EWC] {
            others.push(seed_metrics(
                &variant(Experiment::Toy, method, lambda, &SEEDS),
                root,
            ));
        }
    }
    let mut good = 0;
    let mut detail = Vec::new();
    for s in 0..SEEDS.len() {
        let a = acc_a(&ewc[s]) >= 85.0 && acc_a(&plain[s]) <= 75.0;
        let b = ece_a(&plain[s]) - ece_a(&ewc[s]) >= 15.0;
        let min_b = others
            .iter()
            .chain([&plain, &ewc])
            .map(|m| m[s].task_b.accuracy)
            .fold(f64::INFINITY, f64::min);
        let c = min_b >= 85.0;
        good += usize::from(a && b && c);
        detail.push(format!(
            "seed {}: Acc-A {:.1} vs {:.1}, ECE-A {:.1} vs {:.1}, min Acc-B {:.1} [{}{}{}]",
            SEEDS[s],
            acc_a(&ewc[s]),
            acc_a(&plain[s]),
            ece_a(&ewc[s]),
            ece_a(&plain[s]),
            min_b,
            if a { "a" } else { "-" },
            if b { "b" } else { "-" },
            if c { "c" } else { "-" },
        ));
    }
    (good >= 2, format!("{good}/3 seeds; {}", detail.join("; ")))
}

fn mean_dsc(ms: &[SeedMetrics]) -> f64 {
    let per_seed: Vec<f64> = ms.iter().map(|m| m.task_b.dsc.unwrap()).collect();
    per_seed.iter().sum::<f64>() / per_seed.len() as f64
}

fn grid_ordering(root: &Path) -> (bool, String) {
    let mc = seed_metrics(
        &variant(Experiment::GridRecon, Method::McDropout, 0.0, &SEEDS),
        root,
    );
    let plain = seed_metrics(
        &variant(Experiment::GridRecon, Method::Dropsembles, 0.0, &SEEDS),
        root,
    );
    let ewc = seed_metrics(
        &variant(Experiment::GridRecon, Method::Dropsembles, GRID_EWC, &SEEDS),
        root,
    );
    let dsc = |m: &SeedMetrics| m.task_b.dsc.unwrap();
    let good = (0..SEEDS.len())
        .filter(|&s| dsc(&plain[s]) > dsc(&mc[s]) && dsc(&ewc[s]) >= dsc(&plain[s]))
        .count();
    (
        good >= 2,
        format!(
            "{good}/3 seeds; mean DSC mc-dropout {:.1}, dropsembles {:.1}, dropsembles+EWC {:.1}",
            mean_dsc(&mc),
            mean_dsc(&plain),
            mean_dsc(&ewc)
        ),
    )
}

fn lambda_sweep(root: &Path) -> (bool, String) {
    let mean_acc_a = |lambda| {
        let ms = seed_metrics(
            &variant(Experiment::Toy, Method::Dropsembles, lambda, &SEEDS),
            root,
        );
        ms.iter()
            .map(|m| m.task_a.as_ref().unwrap().accuracy)
            .sum::<f64>()
            / ms.len() as f64
    };
    let curve: Vec<(f64, f64)> = [0.0, 1.0, 10.0, 100.0, 1000.0]
        .into_iter()
        .map(|l| (l, mean_acc_a(l)))
        .collect();
    let best = curve.iter().copied().fold(
        (0.0, f64::NEG_INFINITY),
        |b, c| if c.1 > b.1 { c } else { b },
    );
    let gain = best.1 - curve[0].1;
    let shown: Vec<String> = curve
        .iter()
        .map(|(l, a)| format!("λ={l}: {a:.1}"))
        .collect();
    (
        gain >= 10.0,
        format!(
            "best λ={} gains {gain:.1} points over λ=0 ({})",
            best.0,
            shown.join(", ")
        ),
    )
}

fn sdf_comparison(
    root: &Path,
    activation: HiddenActivation,
    seeds: &[u64],
) -> (Vec<SeedMetrics>, Vec<SeedMetrics>) {
    let cfg = |method| {
        let mut c = variant(Experiment::Sdf2d, method, 0.0, seeds);
        c.activation = activation;
        c
    };
    (
        seed_metrics(&cfg(Method::Dropsembles), root),
        seed_metrics(&cfg(Method::McDropout), root),
    )
}

fn sdf_benchmark(root: &Path) -> (bool, String) {
    let (drop, mc) = sdf_comparison(root, HiddenActivation::Relu, &[1]);
    let (drop, mc) = (&drop[0], &mc[0]);
    let ordered = drop.task_b.dsc.unwrap() >= mc.task_b.dsc.unwrap();
    let smoother = drop
        .targets
        .iter()
        .zip(&mc.targets)
        .filter(|(d, m)| d.roughness.unwrap() < m.roughness.unwrap())
        .count();
    (
        ordered && smoother >= 8 && drop.targets.len() == 10,
        format!(
            "DSC dropsembles {:.1} vs mc-dropout {:.1}; smoother on {smoother}/{} shapes",
            drop.task_b.dsc.unwrap(),
            mc.task_b.dsc.unwrap(),
            drop.targets.len()
        ),
    )
}

fn siren_variant(root: &Path) -> (bool, String) {
    let (drop, mc) = sdf_comparison(root, HiddenActivation::Siren, &SEEDS);
    let finite = drop.iter().chain(&mc).all(|m| {
        let b = &m.task_b;
        b.accuracy.is_finite()
            && b.ece.is_finite()
            && b.mean_entropy.is_finite()
            && b.dsc.is_some_and(f64::is_finite)
            && b.roughness.is_some_and(f64::is_finite)
    });
    let (d, m) = (mean_dsc(&drop), mean_dsc(&mc));
    (d >= m && finite, format!("mean DSC over 3 seeds: dropsembles {d:.1} vs mc-dropout {m:.1}; all metrics finite: {finite}"))
}

#[test]
fn acceptance_criteria() {
    let strict = std::env::var(STRICT_ENV).is_ok_and(|v| v == "1");
    let mut verdicts = Vec::new();
    check("1", true, &mut verdicts, gradients);
    check("2", true, &mut verdicts, fisher);
    check("3", true, &mut verdicts, ewc);
    check("4", true, &mut verdicts, thinned);
    check("5", true, &mut verdicts, mixture);
    check("6", true, &mut verdicts, metric_oracles);
    check("7", true, &mut verdicts, determinism);
    check("8", true, &mut verdicts, cost_ledger);

    let root = tempfile::tempdir().unwrap();
    let root = root.path();
    let start = Instant::now();
    check("9", strict, &mut verdicts, || {
        let (pass, detail) = toy_table(root);
        let secs = start.elapsed().as_secs_f64();
        (pass && secs < 600.0, format!("{detail}; {secs:.0}s"))
    });
    check("10", strict, &mut verdicts, || grid_ordering(root));
    check("11", strict, &mut verdicts, || lambda_sweep(root));
    check("12", strict, &mut verdicts, || sdf_benchmark(root));
    check("13", strict, &mut verdicts, || siren_variant(root));

    let failed: Vec<&str> = verdicts
        .iter()
        .filter(|v| v.hard && !v.pass)
        .map(|v| v.id)
        .collect();
    let soft: Vec<&str> = verdicts
        .iter()
        .filter(|v| !v.hard && !v.pass)
        .map(|v| v.id)
        .collect();
    if !soft.is_empty() {
        let _ = writeln!(
            std::io::stdout(),
            "criteria failing without {STRICT_ENV}=1: {}",
            soft.join(", ")
        );
    }
    assert!(failed.is_empty(), "failed criteria: {}", failed.join(", "));
}
