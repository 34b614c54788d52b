//! Uncertainty quantification: Fisher diagonal, EWC penalty, Dropsembles, deep
//! ensembles and MC dropout.

mod bundle;
mod ensemble;
mod ewc;
mod fisher;
mod member;
mod methods;

pub use bundle::{read_bundle, write_bundle, BundleInfo};
pub use ensemble::{
    ensemble_predict, mc_dropout_predict, mixture_mean, EnsembleKind, EnsembleMember,
    EnsembleModel, MemberOutputs, Prediction, DEFAULT_MC_SAMPLES,
};
pub use ewc::{ewc_penalty, EwcPenalty, PosteriorCheckpoint, POSTERIOR_KIND, POSTERIOR_VERSION};
pub use fisher::{estimate_fisher_diagonal, FisherDiagonal};
pub use member::{finetune_member, sample_thinned_member, ThinnedMember};
pub use methods::{
    finetune_deep_ensemble, finetune_full_network, member_seed, run_deep_ensemble, run_dropsembles,
    train_deep_ensemble_task_a, train_task_a, train_task_a_network, without_dropout, CostLedger,
    DeepEnsembleConfig, DropsemblesConfig,
};
