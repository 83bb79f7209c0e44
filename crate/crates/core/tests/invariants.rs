use std::fs;

use hrp::cli;
use hrp::config::RunConfig;
use hrp::metrics::RunReport;
use hrp::trainer::{self, NetId};
use hrp::HrpError;

fn small(seed: u64) -> RunConfig {
    let mut c = RunConfig::default();
    c.run.seed = seed;
    c.data.num_classes = 3;
    c.data.per_class = 40;
    c.data.dim = 4;
    c.data.meta_size = 12;
    c.data.test_per_class = 20;
    c.data.ood_per_cluster = 10;
    c.net.hidden = 8;
    c.net.proj = 4;
    c.trainer.epochs = 4;
    c.trainer.batch_size = 16;
    c.trainer.t_start = 1;
    c.trainer.t_full = 2;
    c
}

#[test]
fn swapping_network_seeds_swaps_their_traces() {
    let cfg = small(3);
    let data = cfg.build_data().unwrap();
    let a = cfg.settings();
    let mut b = a.clone();
    std::mem::swap(&mut b.train.net1_seed, &mut b.train.net2_seed);
    let ra = trainer::co_train(&data, &a).unwrap();
    let rb = trainer::co_train(&data, &b).unwrap();
    assert_eq!(ra.epochs.len(), rb.epochs.len());
    for (x, y) in ra.epochs.iter().zip(&rb.epochs) {
        assert_eq!(x.acc_net1, y.acc_net2);
        assert_eq!(x.acc_net2, y.acc_net1);
        assert_eq!(x.acc_ensemble, y.acc_ensemble);
        assert_eq!(x.losses.total, y.losses.total);
        assert_eq!(x.alpha, y.alpha);
    }
}

#[test]
fn warmup_updates_ignore_the_auxiliary_modules() {
    let mut cfg = small(5);
    cfg.trainer.t_start = 4;
    cfg.trainer.t_full = 4;
    cfg.trainer.epochs = 4;
    let data = cfg.build_data().unwrap();
    let full = cfg.settings();
    let mut stubbed = full.clone();
    stubbed.toggles.use_ram = false;
    stubbed.toggles.use_cdcl = false;
    stubbed.toggles.use_cr = false;
    let mut heavy = full.clone();
    heavy.train.lambda_cdcl = 1e6;

    let base = trainer::co_train_with_state(&data, &full, false).unwrap().nets;
    for other in [stubbed, heavy] {
        let nets = trainer::co_train_with_state(&data, &other, false).unwrap().nets;
        assert_eq!(base.net1.params, nets.net1.params);
        assert_eq!(base.net2.params, nets.net2.params);
    }
}

#[test]
fn supervision_always_comes_from_the_co_network() {
    let cfg = small(7);
    let data = cfg.build_data().unwrap();
    let out = trainer::co_train_with_state(&data, &cfg.settings(), true).unwrap();
    let batches = data.train.len().div_ceil(cfg.trainer.batch_size);
    let sup = &out.diagnostics.supervision;
    assert_eq!(sup.len(), 2 * batches * cfg.trainer.epochs);
    assert!(sup.iter().all(|r| r.learner != r.provider));
    assert_eq!(sup.iter().filter(|r| r.learner == NetId::Net1).count(), sup.len() / 2);
}

#[test]
fn zero_epochs_yields_only_the_initial_evaluation() {
    let mut cfg = small(1);
    cfg.trainer.epochs = 0;
    cfg.trainer.t_start = 0;
    cfg.trainer.t_full = 0;
    let report = trainer::co_train(&cfg.build_data().unwrap(), &cfg.settings()).unwrap();
    assert_eq!(report.epochs.len(), 1);
    assert_eq!(report.epochs[0].epoch, 0);
    assert_eq!(report.summary.best_epoch, 0);
    assert_eq!(report.summary.best_accuracy, report.summary.last_accuracy);
}

#[test]
fn total_loss_and_reliabilities_stay_finite() {
    let cfg = small(11);
    let report = trainer::co_train(&cfg.build_data().unwrap(), &cfg.settings()).unwrap();
    for e in &report.epochs[1..] {
        assert!(e.losses.total.is_finite());
        assert!(e.mass_identity_error <= 1e-9, "epoch {}: {}", e.epoch, e.mass_identity_error);
        assert!(e.min_reliability >= 0.0);
    }
}

#[test]
fn repeated_training_is_bit_identical() {
    let cfg = small(2);
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cli::cmd_train(&cfg, &a, true).unwrap();
    cli::cmd_train(&cfg, &b, true).unwrap();
    for f in ["report.json", "metrics.csv", "net1.ckpt", "net2.ckpt", "diagnostics/reliability.csv", "diagnostics/pairs.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let report = RunReport::from_json(&fs::read_to_string(a.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.to_json().unwrap(), fs::read_to_string(a.join("report.json")).unwrap());
}

#[test]
fn generate_is_reproducible() {
    let cfg = small(9);
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    cli::cmd_generate(&cfg, &a).unwrap();
    cli::cmd_generate(&cfg, &b).unwrap();
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 8);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap());
    }
}

#[test]
fn exploding_learning_rate_trips_the_divergence_guard() {
    let mut cfg = small(4);
    cfg.trainer.base_lr = 1e300;
    cfg.trainer.weight_decay = 0.0;
    let dir = tempfile::tempdir().unwrap();
    match cli::cmd_train(&cfg, dir.path(), false) {
        Err(e @ HrpError::Divergence { .. }) => assert_eq!(e.exit_code(), 1),
        other => panic!("expected divergence, got {:?}", other.map(|r| r.summary)),
    }
    let snapshot = fs::read_to_string(dir.path().join("divergence.txt")).unwrap();
    assert!(snapshot.contains("diverged"));
    assert!(!dir.path().join("report.json").exists());
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    fs::write(&bad, "[trainer]\nepochz = 3\n").unwrap();
    let err = RunConfig::load(&bad).unwrap_err();
    assert!(err.to_string().contains("epochz"), "{err}");
    assert_eq!(err.exit_code(), 2);

    let out = dir.path().join("o");
    let (b, o) = (bad.to_str().unwrap(), out.to_str().unwrap());
    assert_eq!(cli::run(["hrp", "train", "--config", b, "--out", o]), 2);
    assert_eq!(cli::run(["hrp", "frobnicate"]), 2);
    assert_eq!(cli::run(["hrp", "oracle", "nonsense"]), 2);
    assert_eq!(cli::run(["hrp", "report", dir.path().join("missing.json").to_str().unwrap()]), 1);

    let range = dir.path().join("range.toml");
    fs::write(&range, "[data]\nnoise_rate = 1.5\n").unwrap();
    let err = RunConfig::load(&range).unwrap_err();
    assert!(err.to_string().contains("data.noise_rate"), "{err}");
    assert_eq!(cli::run(["hrp", "generate", "--config", range.to_str().unwrap(), "--out", o]), 2);

    let good = dir.path().join("good.toml");
    fs::write(&good, small(1).to_toml()).unwrap();
    assert_eq!(cli::run(["hrp", "generate", "--config", good.to_str().unwrap(), "--out", o]), 0);
    assert_eq!(cli::run(["hrp", "oracle", "auroc"]), 0);
}

#[test]
fn cli_train_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    let mut c = small(6);
    c.trainer.epochs = 2;
    fs::write(&cfg, c.to_toml()).unwrap();
    let out = dir.path().join("run");
    let code = cli::run(["hrp", "train", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", "8"]);
    assert_eq!(code, 0);
    let report = RunReport::from_json(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.seeds.run, 8);
    assert_eq!(report.epochs.len(), 3);
    let saved = RunConfig::load(&out.join("config.toml")).unwrap();
    assert_eq!(saved, c.with_seed(8));
    assert_eq!(cli::run(["hrp", "report", out.join("report.json").to_str().unwrap()]), 0);
}
