mod common;

use common::*;
use dropsembles::metrics::{dice, ece, hausdorff, iou, predictive_entropy};
use dropsembles::nn::{
    Activation, DropoutMask, LossSpec, MlpNetwork, OptimizerKind, Schedule, TrainPhase,
};
use dropsembles::rng::rng_from_seed;
use dropsembles::uq::{
    ensemble_predict, estimate_fisher_diagonal, ewc_penalty, finetune_member, mixture_mean,
    EnsembleKind, EnsembleMember, EnsembleModel, FisherDiagonal, PosteriorCheckpoint,
    ThinnedMember,
};
use proptest::prelude::*;
use rand::Rng as _;

fn head_and_loss(kind: u8) -> (Activation, LossSpec) {
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

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn backprop_matches_finite_differences(seed in any::<u64>(), depth in 2usize..=8, sine in any::<bool>(), kind in 0u8..2) {
        let (head, loss) = head_and_loss(kind);
        let net = random_network(seed, depth, sine, head);
        let data = random_data(&mut rng_from_seed(seed ^ 1), 4, net.input_dim(), kind == 0);
        prop_assert!(gradient_check(&net, &data, &loss) < 1e-4);
    }

    #[test]
    fn fisher_matches_per_sample_squares(seed in any::<u64>(), depth in 2usize..=5, sine in any::<bool>(), kind in 0u8..3) {
        let (head, loss) = head_and_loss(kind);
        let net = random_network(seed, depth, sine, head);
        let data = random_data(&mut rng_from_seed(seed ^ 2), 9, net.input_dim(), kind == 0);
        let fast = estimate_fisher_diagonal(&net, &data, &loss).unwrap();
        let slow = brute_force_fisher(&net, &data, &loss);
        for (a, b) in fast.values().iter().zip(&slow) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn ewc_matches_coordinate_loop(seed in any::<u64>(), lambda in 0.0f64..100.0) {
        let ck = checkpoint(random_network(seed, 3, false, Activation::Sigmoid), seed);
        let mut rng = rng_from_seed(seed ^ 3);
        let theta: Vec<f64> = ck.theta_a().iter().map(|t| t + rng.random_range(-0.5..0.5)).collect();
        let (value, grad) = ewc_penalty(&theta, &ck, lambda).unwrap();
        let (v2, g2) = naive_ewc(&theta, ck.theta_a(), ck.fisher().values(), lambda);
        prop_assert!((value - v2).abs() <= 1e-12 * v2.abs().max(1.0));
        for (a, b) in grad.iter().zip(&g2) {
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
        let (at_anchor, g0) = ewc_penalty(ck.theta_a(), &ck, lambda).unwrap();
        prop_assert_eq!(at_anchor, 0.0);
        prop_assert!(g0.iter().all(|g| *g == 0.0));
        let (off, _) = ewc_penalty(&theta, &ck, 0.0).unwrap();
        prop_assert_eq!(off, 0.0);
    }

    #[test]
    fn thinned_forward_equals_zeroed_network(seed in any::<u64>(), depth in 2usize..=6, sine in any::<bool>()) {
        let net = random_network(seed, depth, sine, Activation::Sigmoid);
        let mask = DropoutMask::sample(net.layers(), seed ^ 4);
        let member = ThinnedMember::from_parts(net.clone(), mask, seed, 0.0).unwrap();
        let data = random_data(&mut rng_from_seed(seed ^ 5), 6, net.input_dim(), true);
        let masked = member.predict(data.inputs.view()).unwrap();
        let zeroed = member.materialize().predict(data.inputs.view(), dropsembles::nn::Dropout::Eval).unwrap();
        prop_assert_eq!(masked, zeroed);
    }

    #[test]
    fn ensemble_mean_is_fold_mean_and_order_free(seed in any::<u64>(), m in 1usize..=8) {
        let nets: Vec<MlpNetwork> = (0..m).map(|i| {
            let base = random_network(seed, 3, false, Activation::Sigmoid);
            MlpNetwork::new(base.layers().to_vec(), seed.wrapping_add(i as u64)).unwrap()
        }).collect();
        let x: Vec<f64> = {
            let mut rng = rng_from_seed(seed ^ 6);
            (0..nets[0].input_dim()).map(|_| rng.random_range(-1.0..1.0)).collect()
        };
        let model = EnsembleModel::new(EnsembleKind::DeepEnsemble, nets.iter().cloned().map(EnsembleMember::Network).collect()).unwrap();
        let pred = ensemble_predict(&model, &x, None).unwrap();
        let outs: Vec<f64> = nets.iter().map(|n| n.forward(&x, dropsembles::nn::Dropout::Eval).unwrap().0[0]).collect();
        let fold = outs.iter().fold(0.0, |acc, v| acc + v) / m as f64;
        prop_assert!((pred.mean - fold).abs() <= 1e-15);
        let mut reversed = nets.clone();
        reversed.reverse();
        reversed.rotate_left(seed as usize % m);
        let model2 = EnsembleModel::new(EnsembleKind::DeepEnsemble, reversed.into_iter().map(EnsembleMember::Network).collect()).unwrap();
        prop_assert_eq!(ensemble_predict(&model2, &x, None).unwrap().mean, pred.mean);
        prop_assert_eq!(mixture_mean(&outs), pred.mean);
    }

    #[test]
    fn ece_matches_bin_walk(seed in any::<u64>(), n in 1usize..400, bins in 1usize..=20) {
        let mut rng = rng_from_seed(seed);
        let probs: Vec<f64> = (0..n).map(|i| if i % 7 == 0 { (rng.random_range(0..=10) as f64) / 10.0 } else { rng.random() }).collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random()).collect();
        let (value, _) = ece(&probs, &labels, bins).unwrap();
        prop_assert_eq!(value, brute_force_ece(&probs, &labels, bins));
    }

    #[test]
    fn hausdorff_matches_all_pairs(seed in any::<u64>(), da in 0.01f64..0.5, db in 0.01f64..0.5) {
        let mut rng = rng_from_seed(seed);
        let a = random_mask(&mut rng, 32, da);
        let b = random_mask(&mut rng, 32, db);
        prop_assume!(a.count_ones() > 0 && b.count_ones() > 0);
        prop_assert!((hausdorff(&a, &b).unwrap() - brute_force_hausdorff(&a, &b)).abs() <= 1e-9);
    }

    #[test]
    fn iou_and_dice_agree(seed in any::<u64>(), da in 0.0f64..1.0, db in 0.0f64..1.0) {
        let mut rng = rng_from_seed(seed);
        let a = random_mask(&mut rng, 16, da);
        let b = random_mask(&mut rng, 16, db);
        let d = dice(&a, &b).unwrap();
        prop_assert!((iou(&a, &b).unwrap() - d / (2.0 - d)).abs() <= 1e-12);
    }

    #[test]
    fn mixture_entropy_dominates_member_entropy(seed in any::<u64>(), m in 1usize..=16) {
        let mut rng = rng_from_seed(seed);
        let ps: Vec<f64> = (0..m).map(|_| rng.random()).collect();
        let mixed = predictive_entropy(mixture_mean(&ps)).unwrap();
        let mean_h = ps.iter().map(|&p| predictive_entropy(p).unwrap()).sum::<f64>() / m as f64;
        prop_assert!(mixed >= mean_h - 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn frozen_coordinates_survive_finetuning(seed in any::<u64>()) {
        let net = random_network(seed, 4, false, Activation::Sigmoid);
        let ck = checkpoint(net, seed);
        let member = dropsembles::uq::sample_thinned_member(&ck, seed ^ 7).unwrap();
        let data = random_data(&mut rng_from_seed(seed ^ 8), 16, ck.network().input_dim(), true);
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
        let mut moved = false;
        for ((before, after), keep) in member.weights().iter().zip(tuned.weights()).zip(&support) {
            if *keep {
                moved |= before != after;
            } else {
                prop_assert_eq!(before.to_bits(), after.to_bits());
            }
        }
        prop_assert!(moved);
    }
}
