//! Run configuration: sectioned TOML, validation, canonical hashing and the
//! experiment manifest.
//!
//! ```toml
//! [run]
//! seed = 7
//! method = "hrp"
//!
//! [data]
//! noise_mode = "symmetric"
//! noise_rate = 0.4
//!
//! [ablation]
//! use_ram = false
//! ```
//!
//! Every section and key is optional; missing values take the defaults
//! below. Unknown sections or keys are rejected.

use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::cdcl::CdclConfig;
use crate::dataset::{self, AugmentConfig, Dataset, MetaSet, NoiseMode};
use crate::net::{Arch, Schedule};
use crate::ram::{LambdaLaw, RamConfig};
use crate::reliability::MetaConfig;
use crate::sampling::stream;
use crate::trainer::{Method, Toggles, TrainConfig, TrainData, TrainSettings};
use crate::{HrpError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    pub method: Method,
    /// Output directory; `--out` takes precedence.
    pub out_dir: Option<PathBuf>,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: 0,
            method: Method::Hrp,
            out_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub num_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub spread: f64,
    pub noise_mode: NoiseMode,
    pub noise_rate: f64,
    /// Class map of asymmetric noise; defaults to `c -> c + 1 mod C`.
    pub pair_map: Option<Vec<usize>>,
    pub meta_size: usize,
    pub test_per_class: usize,
    /// OOD samples per displaced cluster; 0 disables the OOD evaluation.
    pub ood_per_cluster: usize,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            num_classes: 4,
            per_class: 500,
            dim: 16,
            spread: 0.5,
            noise_mode: NoiseMode::Symmetric,
            noise_rate: 0.4,
            pair_map: None,
            meta_size: 40,
            test_per_class: 250,
            ood_per_cluster: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetSection {
    pub hidden: usize,
    pub proj: usize,
}

impl Default for NetSection {
    fn default() -> Self {
        NetSection { hidden: 64, proj: 16 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReliabilitySection {
    pub xi: f64,
    pub fd_step: f64,
}

impl Default for ReliabilitySection {
    fn default() -> Self {
        let m = MetaConfig::default();
        ReliabilitySection {
            xi: m.xi,
            fd_step: m.fd_step,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RamSection {
    pub gamma: f64,
    pub delta: f64,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for RamSection {
    fn default() -> Self {
        let r = RamConfig::default();
        RamSection {
            gamma: r.gamma,
            delta: r.delta,
            r_min: r.r_min,
            r_max: r.r_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainerSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub t_start: usize,
    pub t_full: usize,
    pub eta_w: f64,
    pub lambda_cdcl: f64,
    pub conf_threshold: f64,
    pub sharpen_t: f64,
    pub meta_stride: usize,
    pub base_lr: f64,
    /// Learning-rate decay points as fractions of `epochs`.
    pub decay_at: Vec<f64>,
    pub decay_factor: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for TrainerSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainerSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            t_start: t.t_start,
            t_full: t.t_full,
            eta_w: t.eta_w,
            lambda_cdcl: t.lambda_cdcl,
            conf_threshold: t.conf_threshold,
            sharpen_t: t.sharpen_t,
            meta_stride: t.meta_stride,
            base_lr: t.schedule.base_lr,
            decay_at: vec![0.6, 0.85],
            decay_factor: t.schedule.decay_factor,
            momentum: t.schedule.momentum,
            weight_decay: t.schedule.weight_decay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentSection {
    /// Multiples of the blob spread.
    pub weak_jitter: f64,
    pub strong_jitter: f64,
    pub p_drop: f64,
}

impl Default for AugmentSection {
    fn default() -> Self {
        let a = AugmentConfig::for_spread(1.0);
        AugmentSection {
            weak_jitter: a.sigma_weak,
            strong_jitter: a.sigma_strong,
            p_drop: a.p_drop,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub net: NetSection,
    #[serde(default)]
    pub reliability: ReliabilitySection,
    #[serde(default)]
    pub ram: RamSection,
    #[serde(default)]
    pub cdcl: CdclConfig,
    #[serde(default)]
    pub trainer: TrainerSection,
    #[serde(default)]
    pub augment: AugmentSection,
    #[serde(default)]
    pub ablation: Toggles,
}

const TAG_NET: u64 = 0x0E71;

fn config_err(key: &str, msg: impl std::fmt::Display) -> HrpError {
    HrpError::Config(format!("{key}: {msg}"))
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HrpError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path).map_err(|e| HrpError::io(format!("reading {}", path.display()), e))?;
        RunConfig::from_toml(&text).map_err(|e| match e {
            HrpError::Config(m) => HrpError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field, naming the first offending key.
    pub fn validate(&self) -> Result<()> {
        let d = &self.data;
        if d.num_classes < 2 {
            return Err(config_err("data.num_classes", "need at least 2 classes"));
        }
        if d.dim < 2 {
            return Err(config_err("data.dim", "need at least 2 dimensions"));
        }
        if d.per_class == 0 {
            return Err(config_err("data.per_class", "must be positive"));
        }
        if d.test_per_class == 0 {
            return Err(config_err("data.test_per_class", "must be positive"));
        }
        if !(d.spread >= 0.0 && d.spread.is_finite()) {
            return Err(config_err("data.spread", "must be finite and >= 0"));
        }
        if !(0.0..=1.0).contains(&d.noise_rate) {
            return Err(config_err("data.noise_rate", "must lie in [0, 1]"));
        }
        if let Some(map) = &d.pair_map {
            if map.len() != d.num_classes || map.iter().any(|&c| c >= d.num_classes) {
                return Err(config_err("data.pair_map", "must map every class to a class"));
            }
        }
        if d.meta_size >= d.num_classes * d.per_class {
            return Err(config_err("data.meta_size", "must be smaller than the dataset"));
        }
        if self.run.method == Method::Hrp && d.meta_size == 0 {
            return Err(config_err("data.meta_size", "reliability estimation needs a nonempty meta set"));
        }
        if self.net.hidden == 0 {
            return Err(config_err("net.hidden", "must be positive"));
        }
        if self.net.proj == 0 {
            return Err(config_err("net.proj", "must be positive"));
        }
        if !(self.reliability.xi > 0.0) {
            return Err(config_err("reliability.xi", "must be > 0"));
        }
        if !(self.reliability.fd_step > 0.0) {
            return Err(config_err("reliability.fd_step", "must be > 0"));
        }
        let r = &self.ram;
        if !(r.gamma > 0.0 && r.gamma.is_finite()) {
            return Err(config_err("ram.gamma", "must be > 0"));
        }
        if !(r.delta > 0.0) {
            return Err(config_err("ram.delta", "must be > 0"));
        }
        if !(r.r_min > 0.0) {
            return Err(config_err("ram.r_min", "must be > 0"));
        }
        if !(r.r_max > r.r_min && r.r_max.is_finite()) {
            return Err(config_err("ram.r_max", "must exceed ram.r_min"));
        }
        if !(self.cdcl.tau > 0.0 && self.cdcl.tau.is_finite()) {
            return Err(config_err("cdcl.tau", "must be > 0"));
        }
        if !(self.cdcl.range_eps >= 0.0) {
            return Err(config_err("cdcl.range_eps", "must be >= 0"));
        }
        let t = &self.trainer;
        if t.batch_size == 0 {
            return Err(config_err("trainer.batch_size", "must be positive"));
        }
        if t.t_start > t.t_full {
            return Err(config_err("trainer.t_start", "must not exceed trainer.t_full"));
        }
        if t.t_full > t.epochs {
            return Err(config_err("trainer.t_full", "must not exceed trainer.epochs"));
        }
        if !(t.conf_threshold > 0.0 && t.conf_threshold <= 1.0) {
            return Err(config_err("trainer.conf_threshold", "must lie in (0, 1]"));
        }
        if !(t.sharpen_t > 0.0 && t.sharpen_t.is_finite()) {
            return Err(config_err("trainer.sharpen_t", "must be > 0"));
        }
        if t.meta_stride == 0 {
            return Err(config_err("trainer.meta_stride", "must be positive"));
        }
        if !(t.base_lr > 0.0 && t.base_lr.is_finite()) {
            return Err(config_err("trainer.base_lr", "must be > 0"));
        }
        if t.decay_at.iter().any(|f| !(0.0..=1.0).contains(f)) {
            return Err(config_err("trainer.decay_at", "fractions must lie in [0, 1]"));
        }
        for (key, v) in [
            ("trainer.eta_w", t.eta_w),
            ("trainer.lambda_cdcl", t.lambda_cdcl),
            ("trainer.decay_factor", t.decay_factor),
            ("trainer.momentum", t.momentum),
            ("trainer.weight_decay", t.weight_decay),
        ] {
            if !v.is_finite() {
                return Err(config_err(key, "must be finite"));
            }
        }
        let a = &self.augment;
        for (key, v) in [("augment.weak_jitter", a.weak_jitter), ("augment.strong_jitter", a.strong_jitter)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(config_err(key, "must be finite and >= 0"));
            }
        }
        if !(0.0..=1.0).contains(&a.p_drop) {
            return Err(config_err("augment.p_drop", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn with_seed(mut self, seed: u64) -> RunConfig {
        self.run.seed = seed;
        self
    }

    /// Seeds of the two networks, derived from the run seed.
    pub fn net_seeds(&self) -> (u64, u64) {
        (
            stream(self.run.seed, &[TAG_NET, 1]).random(),
            stream(self.run.seed, &[TAG_NET, 2]).random(),
        )
    }

    pub fn settings(&self) -> TrainSettings {
        let t = &self.trainer;
        let (net1_seed, net2_seed) = self.net_seeds();
        let decay_epochs = t
            .decay_at
            .iter()
            .map(|f| (f * t.epochs as f64).round() as usize)
            .collect();
        TrainSettings {
            method: self.run.method,
            arch: Arch {
                input_dim: self.data.dim,
                hidden: self.net.hidden,
                classes: self.data.num_classes,
                proj: self.net.proj,
            },
            train: TrainConfig {
                epochs: t.epochs,
                batch_size: t.batch_size,
                t_start: t.t_start,
                t_full: t.t_full,
                eta_w: t.eta_w,
                lambda_cdcl: t.lambda_cdcl,
                conf_threshold: t.conf_threshold,
                sharpen_t: t.sharpen_t,
                meta_stride: t.meta_stride,
                schedule: Schedule {
                    base_lr: t.base_lr,
                    decay_epochs,
                    decay_factor: t.decay_factor,
                    momentum: t.momentum,
                    weight_decay: t.weight_decay,
                },
                seed: self.run.seed,
                net1_seed,
                net2_seed,
            },
            meta: MetaConfig {
                eta_inner: t.base_lr,
                xi: self.reliability.xi,
                fd_step: self.reliability.fd_step,
            },
            ram: RamConfig {
                gamma: self.ram.gamma,
                delta: self.ram.delta,
                r_min: self.ram.r_min,
                r_max: self.ram.r_max,
                law: LambdaLaw::Asymmetric,
                gating: true,
            },
            cdcl: self.cdcl,
            augment: AugmentConfig {
                sigma_weak: self.augment.weak_jitter * self.data.spread,
                sigma_strong: self.augment.strong_jitter * self.data.spread,
                p_drop: self.augment.p_drop,
            },
            toggles: self.ablation,
        }
    }

    /// Noisy training set before the meta split.
    pub fn noisy_dataset(&self) -> Result<Dataset> {
        let d = &self.data;
        let s = self.run.seed;
        let clean = dataset::make_blobs(d.num_classes, d.per_class, d.dim, d.spread, s)?;
        match d.noise_mode {
            NoiseMode::Clean => Ok(clean),
            NoiseMode::Symmetric => dataset::inject_symmetric_noise(&clean, d.noise_rate, s.wrapping_add(1)),
            NoiseMode::Asymmetric => {
                let default_map: Vec<usize> = (0..d.num_classes).map(|c| (c + 1) % d.num_classes).collect();
                let map = d.pair_map.clone().unwrap_or(default_map);
                dataset::inject_asymmetric_noise(&clean, d.noise_rate, &map, s.wrapping_add(1))
            }
        }
    }

    pub fn test_dataset(&self) -> Result<Dataset> {
        let d = &self.data;
        dataset::make_blobs(d.num_classes, d.test_per_class, d.dim, d.spread, self.run.seed.wrapping_add(3))
    }

    pub fn ood_dataset(&self) -> Result<Option<Dataset>> {
        let d = &self.data;
        if d.ood_per_cluster == 0 {
            return Ok(None);
        }
        dataset::make_ood_blobs(d.num_classes, d.ood_per_cluster, d.dim, d.spread, self.run.seed.wrapping_add(4)).map(Some)
    }

    pub fn split(&self, noisy: &Dataset) -> Result<(Dataset, MetaSet)> {
        dataset::split_meta(noisy, self.data.meta_size, self.run.seed.wrapping_add(2))
    }

    pub fn build_data(&self) -> Result<TrainData> {
        let noisy = self.noisy_dataset()?;
        let (train, meta) = self.split(&noisy)?;
        Ok(TrainData {
            train,
            meta,
            test: self.test_dataset()?,
            ood: self.ood_dataset()?,
        })
    }

    /// Pretty JSON of the config with sorted keys and 17-digit floats.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        crate::metrics::to_json_17(&value).expect("value serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub config_hash: String,
    pub artifact_version: String,
    /// `(name, sha256 of the dataset CSV)`.
    pub dataset_fingerprints: Vec<(String, String)>,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub wall_clock_seconds: f64,
    pub provenance: String,
}

impl ExperimentManifest {
    pub fn new(cfg: &RunConfig, datasets: &[(&str, &Dataset)], started_unix: u64) -> ExperimentManifest {
        let hash = cfg.hash();
        ExperimentManifest {
            provenance: format!(
                "hrp {} seed {} config {}",
                env!("CARGO_PKG_VERSION"),
                cfg.run.seed,
                &hash[..12]
            ),
            config_hash: hash,
            artifact_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_fingerprints: datasets
                .iter()
                .map(|(name, ds)| (name.to_string(), sha256_hex(ds.to_csv().as_bytes())))
                .collect(),
            started_unix,
            finished_unix: started_unix,
            wall_clock_seconds: 0.0,
        }
    }

    /// Recomputes the hash of `cfg` and compares it with the stored one.
    pub fn matches(&self, cfg: &RunConfig) -> bool {
        self.config_hash == cfg.hash()
    }
}

pub fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.trainer.lambda_cdcl, 0.5);
        assert_eq!(cfg.cdcl.tau, 0.2);
        assert_eq!(cfg.ram.gamma, 4.0);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = RunConfig::from_toml("[trainer]\nepochz = 3\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("epochz"), "{e}");
        let e = RunConfig::from_toml("[bogus]\nx = 1\n").unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
    }

    #[test]
    fn invalid_values_are_named() {
        let e = RunConfig::from_toml("[ram]\nr_min = 3.0\n").unwrap_err();
        assert!(e.to_string().contains("ram.r_max"), "{e}");
        let e = RunConfig::from_toml("[trainer]\nt_start = 6\nt_full = 5\n").unwrap_err();
        assert!(e.to_string().contains("trainer.t_start"), "{e}");
        let e = RunConfig::from_toml("[trainer]\nepochs = 4\nt_full = 5\n").unwrap_err();
        assert!(e.to_string().contains("trainer.t_full"), "{e}");
        let e = RunConfig::from_toml("[data]\nnoise_rate = 1.5\n").unwrap_err();
        assert!(e.to_string().contains("data.noise_rate"), "{e}");
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = RunConfig::from_toml("[run]\nseed = 3\n[data]\nnoise_rate = 0.2\n").unwrap();
        let b = RunConfig::from_toml("[data]\nnoise_rate = 0.2\n[run]\nseed = 3\n").unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), a.clone().with_seed(4).hash());
        let back = RunConfig::from_toml(&a.to_toml()).unwrap();
        assert_eq!(back.hash(), a.hash());
    }

    #[test]
    fn manifest_hash_recomputes() {
        let cfg = RunConfig::default();
        let ds = cfg.test_dataset().unwrap();
        let m = ExperimentManifest::new(&cfg, &[("test", &ds)], 0);
        assert!(m.matches(&cfg));
        assert!(!m.matches(&cfg.clone().with_seed(9)));
    }

    #[test]
    fn settings_mirror_sections() {
        let cfg = RunConfig::from_toml("[trainer]\nepochs = 40\n[ablation]\nuse_grg = false\nsymmetric_ram = true\n").unwrap();
        let s = cfg.settings();
        assert_eq!(s.train.schedule.decay_epochs, vec![24, 34]);
        assert!(!s.effective_ram().gating);
        assert_eq!(s.effective_ram().law, LambdaLaw::Symmetric);
        let (a, b) = cfg.net_seeds();
        assert_ne!(a, b);
    }

    #[test]
    fn data_sizes() {
        let data = RunConfig::default().build_data().unwrap();
        assert_eq!(data.train.len(), 1960);
        assert_eq!(data.meta.len(), 40);
        assert_eq!(data.test.len(), 1000);
        assert_eq!(data.ood.unwrap().len(), 1000);
    }
}
