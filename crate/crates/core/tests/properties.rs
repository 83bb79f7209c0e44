use proptest::collection::vec;
use proptest::prelude::*;

use hrp::cdcl::{self, CdclConfig, FeatureBank};
use hrp::config::RunConfig;
use hrp::dataset::{self, NoiseMode};
use hrp::metrics::{self, OodScoreSet};
use hrp::oracle;
use hrp::ram::{self, LambdaLaw, RamConfig};
use hrp::reliability::{self, MetaConfig};
use hrp::sampling::stream;
use hrp::trainer::{self, TrainConfig};

fn grads() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..40).prop_flat_map(|n| (vec(-3.0f64..3.0, n), vec(-3.0f64..3.0, n)))
}

proptest! {
    #[test]
    fn disentangled_reliabilities_keep_the_batch_mass((e1, e2) in grads()) {
        let cfg = MetaConfig::default();
        let n = e1.len();
        let rel = reliability::disentangle(&e1, &e2, &cfg, n);
        prop_assert!(rel.alpha.iter().chain(&rel.beta).all(|v| *v >= 0.0));
        let s = rel.raw_mass();
        let lhs: f64 = rel.alpha.iter().chain(&rel.beta).sum();
        let rhs = n as f64 * s / (s + cfg.xi);
        prop_assert!((lhs - rhs).abs() <= 1e-9 * rhs.max(1.0));
        for (k, g) in e1.iter().enumerate() {
            if *g >= 0.0 {
                prop_assert_eq!(rel.alpha[k], 0.0);
            }
        }
    }

    #[test]
    fn gate_and_total_reliability_stay_in_bounds(a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.0f64..5.0, d in 0.0f64..5.0) {
        let cfg = RamConfig::default();
        let (ri, rj) = (ram::total_reliability(a, b, &cfg), ram::total_reliability(c, d, &cfg));
        prop_assert!(ri >= cfg.r_min && ri <= cfg.r_max);
        let w = ram::grg_weight(ri, rj);
        prop_assert!(w >= cfg.r_min && w <= cfg.r_max);
        prop_assert!(w >= ri && w >= rj);
        prop_assert_eq!(w, ram::grg_weight(rj, ri));
    }

    #[test]
    fn lambda_lies_in_the_unit_interval(ri in 0.1f64..2.0, rj in 0.1f64..2.0, seed in any::<u64>(), symmetric in any::<bool>()) {
        let cfg = RamConfig {
            law: if symmetric { LambdaLaw::Symmetric } else { LambdaLaw::Asymmetric },
            ..RamConfig::default()
        };
        let mut rng = stream(seed, &[1]);
        for _ in 0..20 {
            let l = ram::sample_lambda(ri, rj, &cfg, &mut rng);
            prop_assert!(l > 0.0 && l < 1.0, "{}", l);
        }
        let (a, b) = cfg.beta_shapes(ri, rj);
        if !symmetric {
            prop_assert!((a + b - cfg.gamma).abs() < 1e-6);
        }
    }

    #[test]
    fn partners_form_a_derangement(n in 2usize..60, seed in any::<u64>()) {
        let perm = ram::partner_permutation(n, &mut stream(seed, &[2]));
        let mut seen = vec![false; n];
        for (i, &j) in perm.iter().enumerate() {
            prop_assert_ne!(i, j);
            prop_assert!(!seen[j]);
            seen[j] = true;
        }
    }

    #[test]
    fn mixed_pairs_are_convex_combinations(n in 2usize..12, seed in any::<u64>()) {
        let mut rng = stream(seed, &[3]);
        let inputs: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, -(i as f64), 1.0]).collect();
        let targets: Vec<Vec<f64>> = (0..n).map(|i| trainer::sharpen(&[1.0 + i as f64, 2.0, 0.5], 0.5)).collect();
        let rel: Vec<f64> = (0..n).map(|i| 0.1 + 0.15 * i as f64).collect();
        let pairs = ram::build_pairs(&inputs, &rel, &targets, &RamConfig::default(), &mut rng).unwrap();
        for p in &pairs {
            prop_assert!((p.y_mix.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for k in 0..3 {
                let expect = p.lambda * inputs[p.i][k] + (1.0 - p.lambda) * inputs[p.j][k];
                prop_assert!((p.x_mix[k] - expect).abs() < 1e-12);
            }
            prop_assert_eq!(p.w_mix, rel[p.i].max(rel[p.j]));
        }
    }

    #[test]
    fn beta_normalization_maps_into_the_unit_interval(beta in vec(0.0f64..10.0, 1..50)) {
        let cfg = CdclConfig::default();
        let b = cdcl::normalize_beta(&beta, &cfg);
        prop_assert!(b.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn cdcl_matches_the_naive_double_loop(
        n in 1usize..9,
        seed in any::<u64>(),
        tau in 0.05f64..2.0,
    ) {
        use rand::Rng;
        let mut rng = stream(seed, &[4]);
        let mut draw = |n: usize| -> Vec<Vec<f64>> { (0..n).map(|_| (0..5).map(|_| rng.random::<f64>() - 0.5).collect()).collect() };
        let (w, s) = (draw(n), draw(n));
        let mut rng = stream(seed, &[5]);
        let pc: Vec<usize> = (0..n).map(|_| rng.random_range(0..3)).collect();
        let beta: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let bank = FeatureBank::from_embeddings(&w, &s, &pc, &beta).unwrap();
        let cfg = CdclConfig { tau, ..CdclConfig::default() };
        let fast = cdcl::cdcl_loss(&bank, &cfg);
        let naive = oracle::naive_cdcl_loss(&bank.z, &bank.pseudo_class, &bank.beta, tau, cfg.range_eps);
        prop_assert!((fast - naive).abs() <= 1e-10 * naive.abs().max(1.0), "{} vs {}", fast, naive);
        prop_assert!(fast >= 0.0);
    }

    #[test]
    fn auroc_and_fpr95_match_their_oracles(
        id in vec(prop_oneof![0.0f64..1.0, Just(0.5)], 1..60),
        ood in vec(prop_oneof![0.0f64..1.0, Just(0.5)], 1..60),
    ) {
        let s = OodScoreSet { id_scores: id.clone(), ood_scores: ood.clone() };
        let a = metrics::auroc(&s).unwrap();
        prop_assert!((a - oracle::brute_force_auroc(&id, &ood)).abs() < 1e-12);
        let flipped = OodScoreSet { id_scores: ood.clone(), ood_scores: id.clone() };
        prop_assert!((a + metrics::auroc(&flipped).unwrap() - 1.0).abs() < 1e-12);
        let f = metrics::fpr_at_95_tpr(&s).unwrap();
        prop_assert!((f - oracle::sweep_fpr95(&id, &ood)).abs() < 1e-12);
    }

    #[test]
    fn purity_is_a_weighted_fraction(matches in vec((any::<bool>(), 0.0f64..3.0), 1..20)) {
        // one anchor whose positives are the listed rows
        let m = matches.len();
        let mut y_true = vec![0usize];
        y_true.extend(matches.iter().map(|(ok, _)| if *ok { 0 } else { 1 }));
        let mut padded = vec![(1..=m).collect::<Vec<_>>()];
        padded.extend((0..m).map(|_| Vec::new()));
        let mut weights = vec![matches.iter().map(|(_, w)| *w).collect::<Vec<_>>()];
        weights.extend((0..m).map(|_| Vec::new()));
        let (raw, gated) = metrics::pair_purity(&padded, &weights, &y_true);
        let hits = matches.iter().filter(|(ok, _)| *ok).count() as f64;
        prop_assert!((raw.unwrap() - hits / m as f64).abs() < 1e-12);
        let wsum: f64 = matches.iter().map(|(_, w)| w).sum();
        match gated {
            Some(g) => prop_assert!((0.0..=1.0).contains(&g)),
            None => prop_assert!(wsum == 0.0),
        }
    }

    #[test]
    fn symmetric_noise_never_keeps_a_flipped_label(rate in 0.0f64..=1.0, seed in any::<u64>()) {
        let clean = dataset::make_blobs(4, 30, 3, 1.0, seed).unwrap();
        let noisy = dataset::inject_symmetric_noise(&clean, rate, seed ^ 1).unwrap();
        prop_assert_eq!(noisy.noise.mode, NoiseMode::Symmetric);
        for (a, b) in clean.samples.iter().zip(&noisy.samples) {
            prop_assert_eq!(a.y_true, b.y_true);
            prop_assert!(b.y_obs < 4);
        }
        if rate == 0.0 {
            prop_assert_eq!(noisy.noisy_fraction(), 0.0);
        }
        if rate == 1.0 {
            prop_assert_eq!(noisy.noisy_fraction(), 1.0);
        }
    }

    #[test]
    fn refined_targets_are_distributions(
        probs in vec(vec(0.01f64..1.0, 3), 1..20),
        rho in 0.3f64..1.0,
    ) {
        let probs: Vec<Vec<f64>> = probs.iter().map(|p| { let s: f64 = p.iter().sum(); p.iter().map(|v| v / s).collect() }).collect();
        let given: Vec<usize> = (0..probs.len()).map(|i| i % 3).collect();
        let cfg = TrainConfig { conf_threshold: rho, ..TrainConfig::default() };
        for t in trainer::refined_targets(&probs, &given, &cfg) {
            prop_assert!((t.dist.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(t.dist.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn config_survives_a_toml_round_trip(seed in any::<u64>(), rate in 0.0f64..1.0, epochs in 10usize..100, lr in 1e-4f64..1.0) {
        let mut c = RunConfig::default().with_seed(seed);
        c.data.noise_rate = rate;
        c.trainer.epochs = epochs;
        c.trainer.base_lr = lr;
        let back = RunConfig::from_toml(&c.to_toml()).unwrap();
        prop_assert_eq!(&back, &c);
        prop_assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn warmup_ramp_is_monotone_and_bounded(t_start in 0usize..10, span in 0usize..10) {
        let cfg = TrainConfig { t_start, t_full: t_start + span, ..TrainConfig::default() };
        let mut prev = 0.0;
        for t in 0..30 {
            let w = trainer::warmup(t, &cfg);
            prop_assert!((0.0..=1.0).contains(&w));
            prop_assert!(w >= prev);
            if t < t_start { prop_assert_eq!(w, 0.0); }
            if t >= t_start + span && span > 0 { prop_assert_eq!(w, 1.0); }
            prev = w;
        }
    }
}
