use crate::error::{Error, Result};
use crate::nn::{
    train_epochs, LayerSpec, MlpNetwork, Penalty, TrainDropout, TrainPhase, TrainingData,
};
use crate::rng::{derive_seed, Stream};
use crate::uq::{
    estimate_fisher_diagonal, finetune_member, sample_thinned_member, EnsembleKind, EnsembleMember,
    EnsembleModel, EwcPenalty, FisherDiagonal, PosteriorCheckpoint,
};

/// Counts of training runs and epochs spent building an ensemble.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostLedger {
    pub task_a_runs: usize,
    pub task_a_epochs: usize,
    pub task_b_runs: usize,
    pub task_b_epochs: usize,
}

impl CostLedger {
    pub fn record_task_a(&mut self, epochs: usize) {
        self.task_a_runs += 1;
        self.task_a_epochs += epochs;
    }

    pub fn record_task_b(&mut self, epochs: usize) {
        self.task_b_runs += 1;
        self.task_b_epochs += epochs;
    }
}

/// Train a fresh network on Task A.
///
/// Dropout is active during training when any layer has `dropout_p > 0`.
pub fn train_task_a_network(
    layers: Vec<LayerSpec>,
    data_a: &TrainingData,
    phase: &TrainPhase,
    seed: u64,
) -> Result<MlpNetwork> {
    let mut net = MlpNetwork::new(layers, derive_seed(seed, Stream::Init, 0))?;
    let dropout = if net.layers().iter().any(|l| l.dropout_p > 0.0) {
        TrainDropout::Active
    } else {
        TrainDropout::Inactive
    };
    let mut opt = phase.optimizer_state()?;
    train_epochs(
        &mut net,
        data_a,
        &phase.loss,
        &mut opt,
        &phase.options(seed, dropout),
        None,
    )?;
    Ok(net)
}

/// Train a fresh network on Task A and wrap it with its Fisher diagonal.
pub fn train_task_a(
    layers: Vec<LayerSpec>,
    data_a: &TrainingData,
    phase: &TrainPhase,
    seed: u64,
    dataset_id: &str,
) -> Result<PosteriorCheckpoint> {
    let net = train_task_a_network(layers, data_a, phase, seed)?;
    let fisher = estimate_fisher_diagonal(&net, data_a, &phase.loss)?;
    PosteriorCheckpoint::new(net, fisher, dataset_id, phase.epochs)
}

#[derive(Debug, Clone)]
pub struct DropsemblesConfig {
    pub members: usize,
    pub lambda: f64,
    pub phase: TrainPhase,
    pub master_seed: u64,
    /// Fine-tune members on separate threads.
    pub parallel: bool,
}

/// Seed of member `index` under `master_seed`.
pub fn member_seed(master_seed: u64, index: usize) -> u64 {
    derive_seed(master_seed, Stream::Member, index as u64)
}

fn run_members<T: Send>(
    count: usize,
    parallel: bool,
    job: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let annotate = |index: usize, e: Error| Error::Member {
        index,
        source: Box::new(e),
    };
    if !parallel || count < 2 {
        return (0..count)
            .map(|i| job(i).map_err(|e| annotate(i, e)))
            .collect();
    }
    let results: Vec<Result<T>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..count)
            .map(|i| {
                scope.spawn({
                    let job = &job;
                    move || job(i)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::Contract("member job panicked".into())))
            })
            .collect()
    });
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| annotate(i, e)))
        .collect()
}

/// Sample `members` thinned networks from one Task-A checkpoint and fine-tune
/// each independently on Task B.
pub fn run_dropsembles(
    checkpoint: &PosteriorCheckpoint,
    data_b: &TrainingData,
    config: &DropsemblesConfig,
) -> Result<(EnsembleModel, CostLedger)> {
    if config.members == 0 {
        return Err(Error::Argument("M must be at least 1".into()));
    }
    let tuned = run_members(config.members, config.parallel, |i| {
        let member = sample_thinned_member(checkpoint, member_seed(config.master_seed, i))?;
        finetune_member(&member, data_b, &config.phase, checkpoint, config.lambda)
    })?;
    let mut ledger = CostLedger::default();
    ledger.record_task_a(checkpoint.task_a_epochs());
    for _ in 0..config.members {
        ledger.record_task_b(config.phase.epochs);
    }
    let model = EnsembleModel::new(
        EnsembleKind::Dropsembles,
        tuned.into_iter().map(EnsembleMember::Thinned).collect(),
    )?;
    Ok((model, ledger))
}

/// Fine-tune the whole checkpoint network on Task B with dropout active, as
/// used for MC dropout. With `lambda > 0` every coordinate is EWC-anchored.
pub fn finetune_full_network(
    checkpoint: &PosteriorCheckpoint,
    data_b: &TrainingData,
    phase: &TrainPhase,
    lambda: f64,
    seed: u64,
) -> Result<MlpNetwork> {
    let penalty = EwcPenalty::new(checkpoint.theta_a(), checkpoint.fisher(), lambda)?;
    let mut net = checkpoint.network().clone();
    if phase.epochs == 0 {
        return Ok(net);
    }
    let dropout = if net.layers().iter().any(|l| l.dropout_p > 0.0) {
        TrainDropout::Active
    } else {
        TrainDropout::Inactive
    };
    let mut opt = phase.optimizer_state()?;
    let penalty_ref: Option<&dyn Penalty> = if lambda > 0.0 { Some(&penalty) } else { None };
    train_epochs(
        &mut net,
        data_b,
        &phase.loss,
        &mut opt,
        &phase.options(seed, dropout),
        penalty_ref,
    )?;
    Ok(net)
}

#[derive(Debug, Clone)]
pub struct DeepEnsembleConfig {
    pub members: usize,
    pub lambda: f64,
    /// Architecture; dropout probabilities are ignored (members train without dropout).
    pub layers: Vec<LayerSpec>,
    pub task_a: TrainPhase,
    pub task_b: TrainPhase,
    pub master_seed: u64,
    /// Anchor each member with its own Fisher; otherwise all share the mean Fisher.
    pub per_member_fisher: bool,
    pub parallel: bool,
}

pub fn without_dropout(layers: &[LayerSpec]) -> Vec<LayerSpec> {
    layers
        .iter()
        .map(|l| {
            let mut l = l.clone();
            l.dropout_p = 0.0;
            l
        })
        .collect()
}

/// Train the `members` independent Task-A networks of a deep ensemble.
pub fn train_deep_ensemble_task_a(
    data_a: &TrainingData,
    config: &DeepEnsembleConfig,
    dataset_id: &str,
) -> Result<Vec<PosteriorCheckpoint>> {
    if config.members == 0 {
        return Err(Error::Argument("M must be at least 1".into()));
    }
    let layers = without_dropout(&config.layers);
    run_members(config.members, config.parallel, |i| {
        train_task_a(
            layers.clone(),
            data_a,
            &config.task_a,
            member_seed(config.master_seed, i),
            dataset_id,
        )
    })
}

/// Fine-tune each Task-A network of a deep ensemble on Task B.
pub fn finetune_deep_ensemble(
    checkpoints: &[PosteriorCheckpoint],
    data_b: &TrainingData,
    config: &DeepEnsembleConfig,
) -> Result<(EnsembleModel, CostLedger)> {
    let shared = if config.per_member_fisher {
        None
    } else {
        let parts: Vec<&FisherDiagonal> = checkpoints.iter().map(|c| c.fisher()).collect();
        Some(FisherDiagonal::mean_of(&parts)?)
    };
    let nets = run_members(checkpoints.len(), config.parallel, |i| {
        let ck = match &shared {
            Some(f) => checkpoints[i].with_fisher(f.clone())?,
            None => checkpoints[i].clone(),
        };
        let seed = derive_seed(member_seed(config.master_seed, i), Stream::Ensemble, 1);
        finetune_full_network(&ck, data_b, &config.task_b, config.lambda, seed)
    })?;
    let mut ledger = CostLedger::default();
    for ck in checkpoints {
        ledger.record_task_a(ck.task_a_epochs());
        ledger.record_task_b(config.task_b.epochs);
    }
    let model = EnsembleModel::new(
        EnsembleKind::DeepEnsemble,
        nets.into_iter().map(EnsembleMember::Network).collect(),
    )?;
    Ok((model, ledger))
}

/// Independently initialized networks trained on Task A (without dropout),
/// each fine-tuned on Task B.
pub fn run_deep_ensemble(
    data_a: &TrainingData,
    data_b: &TrainingData,
    config: &DeepEnsembleConfig,
) -> Result<(EnsembleModel, CostLedger)> {
    let checkpoints = train_deep_ensemble_task_a(data_a, config, "task-a")?;
    finetune_deep_ensemble(&checkpoints, data_b, config)
}
