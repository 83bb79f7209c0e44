//! Joint objective and the dual-network co-training loop.
//!
//! Within a batch both networks first predict on the weak views with their
//! pre-update parameters. Each network is then supervised by the other's
//! frozen predictions (pseudo-labels, refined targets, confidence filter),
//! and both take one SGD step. The order of the two updates is irrelevant.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdcl::{self, CdclConfig};
use crate::dataset::{self, AugmentConfig, Dataset, MetaSet};
use crate::metrics::{self, EpochRecord, FinalSummary, LambdaSummary, LossBreakdown, OodScoreSet, RunReport, Seeds, SplitStats};
use crate::net::{self, Arch, GradientVector, ModelParams, Mode, OptState, Schedule};
use crate::ram::{self, LambdaLaw, RamConfig};
use crate::reliability::{self, MetaConfig, ReliabilityBatch};
use crate::sampling::stream;
use crate::{HrpError, Result};

const TAG_SHUFFLE: u64 = 0x5A0F;
const TAG_VIEWS: u64 = 0x71E3;
const TAG_RAM: u64 = 0x4A31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// The full reliability-driven objective.
    Hrp,
    /// Mean cross-entropy on the given labels; no co-training.
    PlainCe,
}

/// Single-flag switches for the ablation grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Toggles {
    pub use_ram: bool,
    pub use_grg: bool,
    pub use_cdcl: bool,
    pub use_cr: bool,
    pub couple_meta: bool,
    pub symmetric_ram: bool,
}

impl Default for Toggles {
    fn default() -> Self {
        Toggles {
            use_ram: true,
            use_grg: true,
            use_cdcl: true,
            use_cr: true,
            couple_meta: false,
            symmetric_ram: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub t_start: usize,
    pub t_full: usize,
    /// Reweighting intensity of the reweighted cross-entropy.
    pub eta_w: f64,
    pub lambda_cdcl: f64,
    /// Confidence threshold `rho`.
    pub conf_threshold: f64,
    pub sharpen_t: f64,
    /// Re-estimate reliabilities every `meta_stride` batches.
    pub meta_stride: usize,
    pub schedule: Schedule,
    pub seed: u64,
    pub net1_seed: u64,
    pub net2_seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            t_start: 5,
            t_full: 10,
            eta_w: 1.0,
            lambda_cdcl: 0.5,
            conf_threshold: 0.9,
            sharpen_t: 0.5,
            meta_stride: 1,
            schedule: Schedule {
                base_lr: 0.05,
                decay_epochs: vec![18, 25],
                decay_factor: 0.1,
                momentum: 0.9,
                weight_decay: 5e-4,
            },
            seed: 0,
            net1_seed: 1,
            net2_seed: 2,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HrpError::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if !(self.t_start <= self.t_full && self.t_full <= self.epochs) {
            return bad(format!(
                "need 0 <= t_start <= t_full <= epochs, got {} / {} / {}",
                self.t_start, self.t_full, self.epochs
            ));
        }
        if !(self.conf_threshold > 0.0 && self.conf_threshold <= 1.0) {
            return bad(format!("conf_threshold must lie in (0, 1], got {}", self.conf_threshold));
        }
        if !(self.sharpen_t > 0.0 && self.sharpen_t.is_finite()) {
            return bad("sharpen_t must be > 0".into());
        }
        if self.meta_stride == 0 {
            return bad("meta_stride must be positive".into());
        }
        let s = &self.schedule;
        for (name, v) in [
            ("eta_w", self.eta_w),
            ("lambda_cdcl", self.lambda_cdcl),
            ("base_lr", s.base_lr),
            ("decay_factor", s.decay_factor),
            ("momentum", s.momentum),
            ("weight_decay", s.weight_decay),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }
}

/// Everything the loop needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSettings {
    pub method: Method,
    pub arch: Arch,
    pub train: TrainConfig,
    pub meta: MetaConfig,
    pub ram: RamConfig,
    pub cdcl: CdclConfig,
    pub augment: AugmentConfig,
    pub toggles: Toggles,
}

impl TrainSettings {
    pub fn validate(&self) -> Result<()> {
        self.arch.validate()?;
        self.train.validate()?;
        self.meta.validate()?;
        self.ram.validate()?;
        self.cdcl.validate()
    }

    /// RAM settings with the ablation switches applied.
    pub fn effective_ram(&self) -> RamConfig {
        RamConfig {
            gating: self.ram.gating && self.toggles.use_grg,
            law: if self.toggles.symmetric_ram {
                LambdaLaw::Symmetric
            } else {
                self.ram.law
            },
            ..self.ram
        }
    }
}

pub struct TrainData {
    pub train: Dataset,
    pub meta: MetaSet,
    pub test: Dataset,
    pub ood: Option<Dataset>,
}

/// Linear ramp of the auxiliary losses.
pub fn warmup(t: usize, cfg: &TrainConfig) -> f64 {
    if t < cfg.t_start {
        0.0
    } else if t >= cfg.t_full {
        1.0
    } else {
        (t - cfg.t_start) as f64 / (cfg.t_full - cfg.t_start) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetSource {
    CoPrediction,
    GivenLabel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefinedTarget {
    pub dist: Vec<f64>,
    pub source: TargetSource,
    pub confidence: f64,
}

/// `p^(1/T)` renormalized.
pub fn sharpen(p: &[f64], t: f64) -> Vec<f64> {
    let powered: Vec<f64> = p.iter().map(|v| v.powf(1.0 / t)).collect();
    let total: f64 = powered.iter().sum();
    powered.iter().map(|v| v / total).collect()
}

pub fn refined_targets(co_probs: &[Vec<f64>], given_labels: &[usize], cfg: &TrainConfig) -> Vec<RefinedTarget> {
    co_probs
        .iter()
        .zip(given_labels)
        .map(|(p, &y)| {
            let confidence = metrics::max_prob(p);
            if confidence >= cfg.conf_threshold {
                RefinedTarget {
                    dist: sharpen(p, cfg.sharpen_t),
                    source: TargetSource::CoPrediction,
                    confidence,
                }
            } else {
                RefinedTarget {
                    dist: net::one_hot(y, p.len()),
                    source: TargetSource::GivenLabel,
                    confidence,
                }
            }
        })
        .collect()
}

/// `B_c`: indices whose co-network confidence reaches `rho`; the whole batch
/// while `in_warmup`.
pub fn confidence_filter(co_probs: &[Vec<f64>], rho: f64, in_warmup: bool) -> Vec<usize> {
    (0..co_probs.len())
        .filter(|&i| in_warmup || metrics::max_prob(&co_probs[i]) >= rho)
        .collect()
}

fn subset<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

/// `(1/|B_c|) sum_{B_c} (1 + eta_w r~_i) CE(f(x_i), y~_i)` with
/// `r~_i = r_i / (mean_{B_c} r + delta)`, and its gradient.
pub fn reweighted_ce(
    params: &ModelParams,
    weak: &[Vec<f64>],
    targets: &[Vec<f64>],
    r: &[f64],
    bc: &[usize],
    eta_w: f64,
    delta: f64,
) -> Result<(f64, GradientVector)> {
    if bc.is_empty() {
        return Ok((0.0, GradientVector::zeros(params.data.len())));
    }
    let m = bc.len() as f64;
    let mean_r = bc.iter().map(|&i| r[i]).sum::<f64>() / m;
    let coeffs: Vec<f64> = bc.iter().map(|&i| (1.0 + eta_w * r[i] / (mean_r + delta)) / m).collect();
    net::weighted_ce(params, &subset(weak, bc), &subset(targets, bc), &coeffs)
}

/// `(1/|B_c|) sum_{B_c} CE(f(x_i^s), y~_i)` and its gradient.
pub fn consistency_loss(
    params: &ModelParams,
    strong: &[Vec<f64>],
    targets: &[Vec<f64>],
    bc: &[usize],
) -> Result<(f64, GradientVector)> {
    if bc.is_empty() {
        return Ok((0.0, GradientVector::zeros(params.data.len())));
    }
    let coeffs = vec![1.0 / bc.len() as f64; bc.len()];
    net::weighted_ce(params, &subset(strong, bc), &subset(targets, bc), &coeffs)
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossComponents {
    pub reweighted_ce: f64,
    pub consistency: f64,
    pub ram: f64,
    pub cdcl: f64,
}

/// `L_re + w (L_cr + L_ram + lambda_cdcl L_cdcl)`.
pub fn total_loss(c: &LossComponents, w: f64, lambda_cdcl: f64) -> f64 {
    c.reweighted_ce + w * (c.consistency + c.ram + lambda_cdcl * c.cdcl)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetId {
    Net1,
    Net2,
}

impl NetId {
    pub fn other(self) -> NetId {
        match self {
            NetId::Net1 => NetId::Net2,
            NetId::Net2 => NetId::Net1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetState {
    pub id: NetId,
    pub seed: u64,
    pub params: ModelParams,
    pub opt: OptState,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetPair {
    pub net1: NetState,
    pub net2: NetState,
}

impl NetPair {
    pub fn new(arch: Arch, cfg: &TrainConfig) -> NetPair {
        let make = |id, seed| NetState {
            id,
            seed,
            params: net::init_params(arch, seed),
            opt: OptState::new(arch, cfg.schedule.clone()),
        };
        NetPair {
            net1: make(NetId::Net1, cfg.net1_seed),
            net2: make(NetId::Net2, cfg.net2_seed),
        }
    }
}

/// Supervision handed from one network to the other for one batch.
#[derive(Debug, Clone)]
pub struct CoSupervision {
    pub provider: NetId,
    pub probs: Vec<Vec<f64>>,
    pub pseudo_class: Vec<usize>,
    pub targets: Vec<RefinedTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisionRecord {
    pub epoch: usize,
    pub batch: usize,
    pub learner: NetId,
    pub provider: NetId,
}

/// Per-sample reliability rows and Mixup pairs of Net1, kept only on request.
#[derive(Debug, Clone, Default)]
pub struct Diagnostics {
    pub enabled: bool,
    pub reliability_rows: Vec<(usize, usize, usize, bool, f64, f64, f64)>,
    pub pair_rows: Vec<(usize, usize, usize, usize, f64, f64)>,
    pub supervision: Vec<SupervisionRecord>,
}

impl Diagnostics {
    pub fn reliability_csv(&self) -> String {
        let mut out = String::from("epoch,batch,id,clean,alpha,beta,r\n");
        for (e, b, id, clean, a, be, r) in &self.reliability_rows {
            out.push_str(&format!(
                "{e},{b},{id},{},{},{},{}\n",
                u8::from(*clean),
                metrics::fmt17(*a),
                metrics::fmt17(*be),
                metrics::fmt17(*r)
            ));
        }
        out
    }

    pub fn pairs_csv(&self) -> String {
        let mut out = String::from("epoch,batch,i,j,lambda,w_mix\n");
        for (e, b, i, j, l, w) in &self.pair_rows {
            out.push_str(&format!("{e},{b},{i},{j},{},{}\n", metrics::fmt17(*l), metrics::fmt17(*w)));
        }
        out
    }
}

/// Epoch accumulator for one network.
#[derive(Debug, Default)]
struct NetEpoch {
    losses: Vec<(LossComponents, f64)>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    clean: Vec<bool>,
    purity: Vec<(f64, usize, f64, f64)>,
    lambdas: Vec<f64>,
    w_mix: Vec<f64>,
    confident: Vec<f64>,
    mass_error: f64,
    min_rel: f64,
}

impl NetEpoch {
    fn new() -> Self {
        NetEpoch {
            min_rel: f64::INFINITY,
            ..Default::default()
        }
    }

    fn loss_means(&self) -> LossBreakdown {
        let n = self.losses.len().max(1) as f64;
        let sum = |f: &dyn Fn(&(LossComponents, f64)) -> f64| self.losses.iter().map(f).sum::<f64>() / n;
        LossBreakdown {
            reweighted_ce: sum(&|l| l.0.reweighted_ce),
            consistency: sum(&|l| l.0.consistency),
            ram: sum(&|l| l.0.ram),
            cdcl: sum(&|l| l.0.cdcl),
            total: sum(&|l| l.1),
        }
    }

    /// `(raw, gated)` pooled over the epoch's batches.
    fn purity(&self) -> (Option<f64>, Option<f64>) {
        let (matches, pairs, w_match, w_all) = self.purity.iter().fold((0.0, 0usize, 0.0, 0.0), |a, p| {
            (a.0 + p.0, a.1 + p.1, a.2 + p.2, a.3 + p.3)
        });
        ((pairs > 0).then(|| matches / pairs as f64), (w_all > 0.0).then(|| w_match / w_all))
    }
}

fn avg(a: f64, b: f64) -> f64 {
    (a + b) / 2.0
}

fn avg_opt(a: Option<f64>, b: Option<f64>) -> Option<f64> {
    match (a, b) {
        (Some(x), Some(y)) => Some(avg(x, y)),
        (x, None) => x,
        (None, y) => y,
    }
}

fn avg_split(a: &SplitStats, b: &SplitStats) -> SplitStats {
    SplitStats {
        clean_mean: avg(a.clean_mean, b.clean_mean),
        clean_std: avg(a.clean_std, b.clean_std),
        noisy_mean: avg(a.noisy_mean, b.noisy_mean),
        noisy_std: avg(a.noisy_std, b.noisy_std),
    }
}

fn mean(v: &[f64]) -> f64 {
    metrics::mean_std(v).0
}

fn combine(epoch: usize, w: f64, a: &NetEpoch, b: &NetEpoch) -> EpochRecord {
    let (la, lb) = (a.loss_means(), b.loss_means());
    let (ra, ga) = a.purity();
    let (rb, gb) = b.purity();
    let (lam_a, lam_b) = (LambdaSummary::from_values(&a.lambdas), LambdaSummary::from_values(&b.lambdas));
    let min_rel = a.min_rel.min(b.min_rel);
    EpochRecord {
        epoch,
        warmup: w,
        losses: LossBreakdown {
            reweighted_ce: avg(la.reweighted_ce, lb.reweighted_ce),
            consistency: avg(la.consistency, lb.consistency),
            ram: avg(la.ram, lb.ram),
            cdcl: avg(la.cdcl, lb.cdcl),
            total: avg(la.total, lb.total),
        },
        alpha: avg_split(&SplitStats::from_values(&a.alpha, &a.clean), &SplitStats::from_values(&b.alpha, &b.clean)),
        beta: avg_split(&SplitStats::from_values(&a.beta, &a.clean), &SplitStats::from_values(&b.beta, &b.clean)),
        purity_raw: avg_opt(ra, rb),
        purity_gated: avg_opt(ga, gb),
        lambda: LambdaSummary {
            mean: avg(lam_a.mean, lam_b.mean),
            std: avg(lam_a.std, lam_b.std),
            histogram: lam_a.histogram.iter().zip(&lam_b.histogram).map(|(x, y)| x + y).collect(),
        },
        w_mix_mean: avg(mean(&a.w_mix), mean(&b.w_mix)),
        confident_fraction: avg(mean(&a.confident), mean(&b.confident)),
        mass_identity_error: a.mass_error.max(b.mass_error),
        min_reliability: if min_rel.is_finite() { min_rel } else { 0.0 },
        ..Default::default()
    }
}

struct Batch<'a> {
    epoch: usize,
    index: usize,
    samples: Vec<&'a dataset::LabeledSample>,
    weak: Vec<Vec<f64>>,
    strong: Vec<Vec<f64>>,
}

impl Batch<'_> {
    fn given_labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.y_obs).collect()
    }
}

fn co_supervision(provider: &NetState, batch: &Batch, cfg: &TrainConfig) -> Result<CoSupervision> {
    let outs = net::forward_batch(&provider.params, &batch.weak, Mode::Eval)?;
    let probs: Vec<Vec<f64>> = outs.iter().map(|o| net::softmax(&o.logits)).collect();
    let pseudo_class = probs.iter().map(|p| net::argmax(p)).collect();
    let targets = refined_targets(&probs, &batch.given_labels(), cfg);
    Ok(CoSupervision {
        provider: provider.id,
        probs,
        pseudo_class,
        targets,
    })
}

/// Per-id reliability cache for `meta_stride > 1`.
type RelCache = std::collections::HashMap<usize, (f64, f64)>;

struct StepOutput {
    grad: GradientVector,
}

fn estimate_reliability(
    learner: &NetState,
    batch: &Batch,
    sup: &CoSupervision,
    meta: &MetaSet,
    settings: &TrainSettings,
    cache: &mut RelCache,
    acc: &mut NetEpoch,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let classes = settings.arch.classes;
    let n = batch.samples.len();
    let fresh = batch.index % settings.train.meta_stride == 0;
    if !fresh {
        let (a, b) = batch
            .samples
            .iter()
            .map(|s| cache.get(&s.id).copied().unwrap_or((0.5, 0.5)))
            .unzip();
        return Ok((a, b));
    }
    let given: Vec<Vec<f64>> = batch.samples.iter().map(|s| net::one_hot(s.y_obs, classes)).collect();
    let pseudo: Vec<Vec<f64>> = sup.pseudo_class.iter().map(|&c| net::one_hot(c, classes)).collect();
    let mcfg = MetaConfig {
        eta_inner: learner.opt.lr(),
        ..settings.meta
    };
    let (e1, e2) = reliability::meta_gradients_closed(&learner.params, &batch.weak, &given, &pseudo, meta, &mcfg)?;
    let mut rb: ReliabilityBatch = reliability::disentangle(&e1, &e2, &mcfg, n);
    rb.ids = batch.samples.iter().map(|s| s.id).collect();
    if settings.toggles.couple_meta {
        rb = rb.coupled();
    }
    let s = rb.raw_mass();
    let expected = n as f64 * s / (s + mcfg.xi);
    let actual: f64 = rb.alpha.iter().chain(&rb.beta).sum();
    acc.mass_error = acc.mass_error.max((actual - expected).abs());
    for (k, s) in batch.samples.iter().enumerate() {
        cache.insert(s.id, (rb.alpha[k], rb.beta[k]));
    }
    Ok((rb.alpha, rb.beta))
}

#[allow(clippy::too_many_arguments)]
fn hrp_step(
    learner: &NetState,
    sup: &CoSupervision,
    batch: &Batch,
    meta: &MetaSet,
    settings: &TrainSettings,
    cache: &mut RelCache,
    acc: &mut NetEpoch,
    diag: &mut Diagnostics,
) -> Result<StepOutput> {
    if sup.provider == learner.id {
        return Err(HrpError::Contract("a network may not supervise itself".into()));
    }
    let cfg = &settings.train;
    let tg = &settings.toggles;
    let params = &learner.params;
    let n = batch.samples.len();
    let w = warmup(batch.epoch, cfg);
    let ram_cfg = settings.effective_ram();

    let (alpha, beta) = estimate_reliability(learner, batch, sup, meta, settings, cache, acc)?;
    let r: Vec<f64> = alpha
        .iter()
        .zip(&beta)
        .map(|(a, b)| ram::total_reliability(*a, *b, &ram_cfg))
        .collect();
    let clean: Vec<bool> = batch.samples.iter().map(|s| s.is_clean()).collect();
    acc.min_rel = alpha.iter().chain(&beta).copied().fold(acc.min_rel, f64::min);

    let targets: Vec<Vec<f64>> = sup.targets.iter().map(|t| t.dist.clone()).collect();
    let bc = confidence_filter(&sup.probs, cfg.conf_threshold, w == 0.0);
    acc.confident.push(bc.len() as f64 / n as f64);

    let (re, mut grad) = reweighted_ce(params, &batch.weak, &targets, &r, &bc, cfg.eta_w, ram_cfg.delta)?;
    let mut comp = LossComponents {
        reweighted_ce: re,
        ..Default::default()
    };

    // pairs come from a stream derived per batch, so drawing them for the
    // trace does not perturb training
    let mut rng = stream(learner.seed, &[TAG_RAM, batch.epoch as u64, batch.index as u64]);
    let pairs = ram::build_pairs(&batch.weak, &r, &targets, &ram_cfg, &mut rng)?;
    acc.lambdas.extend(pairs.iter().map(|p| p.lambda));
    acc.w_mix.extend(pairs.iter().map(|p| p.w_mix));

    let positives = cdcl::positive_sets(&[sup.pseudo_class.clone(), sup.pseudo_class.clone()].concat());
    let beta_rows = [beta.clone(), beta.clone()].concat();
    let weights = cdcl::consensus_weights(&cdcl::normalize_beta(&beta_rows, &settings.cdcl), &positives);
    let y_rows: Vec<usize> = batch.samples.iter().chain(&batch.samples).map(|s| s.y_true).collect();
    let mut counts = (0.0, 0usize, 0.0, 0.0);
    for (i, (ps, ws)) in positives.iter().zip(&weights).enumerate() {
        for (&j, &wij) in ps.iter().zip(ws) {
            let hit = y_rows[i] == y_rows[j];
            counts.1 += 1;
            counts.3 += wij;
            if hit {
                counts.0 += 1.0;
                counts.2 += wij;
            }
        }
    }
    acc.purity.push(counts);

    if w > 0.0 {
        if tg.use_cr {
            let (v, g) = consistency_loss(params, &batch.strong, &targets, &bc)?;
            comp.consistency = v;
            grad.add_scaled(&g, w);
        }
        if tg.use_ram {
            let (v, g) = ram::ram_loss_with_grad(params, &pairs, n)?;
            comp.ram = v;
            grad.add_scaled(&g, w);
        }
        if tg.use_cdcl && cfg.lambda_cdcl != 0.0 {
            let (v, g) = cdcl::cdcl_loss_with_grad(params, &batch.weak, &batch.strong, &sup.pseudo_class, &beta, &settings.cdcl)?;
            comp.cdcl = v;
            grad.add_scaled(&g, w * cfg.lambda_cdcl);
        }
    }
    let total = total_loss(&comp, w, cfg.lambda_cdcl);
    if !total.is_finite() || !grad.is_finite() {
        return Err(HrpError::Divergence {
            epoch: batch.epoch,
            batch: batch.index,
            detail: format!(
                "{:?}: re {} cr {} ram {} cdcl {} total {} |grad| {} |theta| {}",
                learner.id,
                comp.reweighted_ce,
                comp.consistency,
                comp.ram,
                comp.cdcl,
                total,
                grad.norm(),
                params.data.iter().map(|v| v * v).sum::<f64>().sqrt()
            ),
        });
    }
    acc.losses.push((comp, total));
    acc.alpha.extend(&alpha);
    acc.beta.extend(&beta);
    acc.clean.extend(&clean);

    if diag.enabled && learner.id == NetId::Net1 {
        for (k, s) in batch.samples.iter().enumerate() {
            diag.reliability_rows.push((batch.epoch, batch.index, s.id, clean[k], alpha[k], beta[k], r[k]));
        }
        for p in &pairs {
            diag.pair_rows.push((
                batch.epoch,
                batch.index,
                batch.samples[p.i].id,
                batch.samples[p.j].id,
                p.lambda,
                p.w_mix,
            ));
        }
    }
    Ok(StepOutput { grad })
}

fn plain_step(learner: &NetState, batch: &Batch, settings: &TrainSettings, acc: &mut NetEpoch) -> Result<StepOutput> {
    let classes = settings.arch.classes;
    let n = batch.samples.len();
    let targets: Vec<Vec<f64>> = batch.samples.iter().map(|s| net::one_hot(s.y_obs, classes)).collect();
    let (v, grad) = net::weighted_ce(&learner.params, &batch.weak, &targets, &vec![1.0 / n as f64; n])?;
    if !v.is_finite() || !grad.is_finite() {
        return Err(HrpError::Divergence {
            epoch: batch.epoch,
            batch: batch.index,
            detail: format!("{:?}: ce {v} |grad| {}", learner.id, grad.norm()),
        });
    }
    let comp = LossComponents {
        reweighted_ce: v,
        ..Default::default()
    };
    acc.losses.push((comp, v));
    Ok(StepOutput { grad })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub acc_net1: f64,
    pub acc_net2: f64,
    pub acc_ensemble: f64,
}

/// Mean of the two networks' softmax outputs.
pub fn ensemble_probs(pair: &NetPair, inputs: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    let a = net::forward_batch(&pair.net1.params, inputs, Mode::Eval)?;
    let b = net::forward_batch(&pair.net2.params, inputs, Mode::Eval)?;
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| {
            net::softmax(&x.logits)
                .iter()
                .zip(net::softmax(&y.logits))
                .map(|(p, q)| (p + q) / 2.0)
                .collect()
        })
        .collect())
}

pub fn evaluate(pair: &NetPair, test: &Dataset) -> Result<Evaluation> {
    let xs: Vec<Vec<f64>> = test.samples.iter().map(|s| s.x.clone()).collect();
    let ys: Vec<usize> = test.samples.iter().map(|s| s.y_true).collect();
    let preds = |p: &ModelParams| -> Result<Vec<usize>> {
        Ok(net::forward_batch(p, &xs, Mode::Eval)?.iter().map(|o| net::argmax(&o.logits)).collect())
    };
    let ens: Vec<usize> = ensemble_probs(pair, &xs)?.iter().map(|p| net::argmax(p)).collect();
    Ok(Evaluation {
        acc_net1: metrics::accuracy(&preds(&pair.net1.params)?, &ys)?,
        acc_net2: metrics::accuracy(&preds(&pair.net2.params)?, &ys)?,
        acc_ensemble: metrics::accuracy(&ens, &ys)?,
    })
}

/// Ensemble MSP scores on the test set (ID) and the OOD set.
pub fn ood_scores(pair: &NetPair, test: &Dataset, ood: &Dataset) -> Result<OodScoreSet> {
    let msp = |ds: &Dataset| -> Result<Vec<f64>> {
        let xs: Vec<Vec<f64>> = ds.samples.iter().map(|s| s.x.clone()).collect();
        Ok(ensemble_probs(pair, &xs)?.iter().map(|p| metrics::max_prob(p)).collect())
    };
    Ok(OodScoreSet {
        id_scores: msp(test)?,
        ood_scores: msp(ood)?,
    })
}

pub struct TrainOutcome {
    pub report: RunReport,
    pub nets: NetPair,
    pub diagnostics: Diagnostics,
}

pub fn co_train(data: &TrainData, settings: &TrainSettings) -> Result<RunReport> {
    Ok(co_train_with_state(data, settings, false)?.report)
}

pub fn co_train_with_state(data: &TrainData, settings: &TrainSettings, diagnostics: bool) -> Result<TrainOutcome> {
    settings.validate()?;
    let cfg = &settings.train;
    if data.train.is_empty() {
        return Err(HrpError::Config("training set is empty".into()));
    }
    if data.test.is_empty() {
        return Err(HrpError::Config("test set is empty".into()));
    }
    if settings.method == Method::Hrp && data.meta.is_empty() {
        return Err(HrpError::Config("reliability estimation needs a nonempty meta set".into()));
    }
    if data.train.dim != settings.arch.input_dim || data.train.num_classes != settings.arch.classes {
        return Err(HrpError::Config(format!(
            "network shape {}x{} does not match data {}x{}",
            settings.arch.input_dim, settings.arch.classes, data.train.dim, data.train.num_classes
        )));
    }

    let mut pair = NetPair::new(settings.arch, cfg);
    let mut diag = Diagnostics {
        enabled: diagnostics,
        ..Default::default()
    };
    let mut caches = (RelCache::new(), RelCache::new());
    let first = evaluate(&pair, &data.test)?;
    let mut records = vec![EpochRecord {
        epoch: 0,
        acc_net1: first.acc_net1,
        acc_net2: first.acc_net2,
        acc_ensemble: first.acc_ensemble,
        ..Default::default()
    }];

    for epoch in 0..cfg.epochs {
        pair.net1.opt.epoch = epoch;
        pair.net2.opt.epoch = epoch;
        let mut order: Vec<usize> = (0..data.train.len()).collect();
        order.shuffle(&mut stream(cfg.seed, &[TAG_SHUFFLE, epoch as u64]));
        let view_seed: u64 = stream(cfg.seed, &[TAG_VIEWS, epoch as u64]).random();
        let (mut acc1, mut acc2) = (NetEpoch::new(), NetEpoch::new());

        for (index, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let samples: Vec<_> = chunk.iter().map(|&k| &data.train.samples[k]).collect();
            let views: Vec<_> = samples.iter().map(|s| dataset::view_pair(s, &settings.augment, view_seed)).collect();
            let batch = Batch {
                epoch,
                index,
                weak: views.iter().map(|v| v.weak.clone()).collect(),
                strong: views.iter().map(|v| v.strong.clone()).collect(),
                samples,
            };
            let (s1, s2) = match settings.method {
                Method::PlainCe => (
                    plain_step(&pair.net1, &batch, settings, &mut acc1)?,
                    plain_step(&pair.net2, &batch, settings, &mut acc2)?,
                ),
                Method::Hrp => {
                    let from2 = co_supervision(&pair.net2, &batch, cfg)?;
                    let from1 = co_supervision(&pair.net1, &batch, cfg)?;
                    for (learner, sup) in [(&pair.net1, &from2), (&pair.net2, &from1)] {
                        diag.supervision.push(SupervisionRecord {
                            epoch,
                            batch: index,
                            learner: learner.id,
                            provider: sup.provider,
                        });
                    }
                    (
                        hrp_step(&pair.net1, &from2, &batch, &data.meta, settings, &mut caches.0, &mut acc1, &mut diag)?,
                        hrp_step(&pair.net2, &from1, &batch, &data.meta, settings, &mut caches.1, &mut acc2, &mut diag)?,
                    )
                }
            };
            let (p1, o1) = net::sgd_step(&pair.net1.params, &s1.grad, &pair.net1.opt)?;
            let (p2, o2) = net::sgd_step(&pair.net2.params, &s2.grad, &pair.net2.opt)?;
            pair.net1.params = p1;
            pair.net1.opt = o1;
            pair.net2.params = p2;
            pair.net2.opt = o2;
        }

        let ev = evaluate(&pair, &data.test)?;
        let mut rec = combine(epoch + 1, warmup(epoch, cfg), &acc1, &acc2);
        rec.acc_net1 = ev.acc_net1;
        rec.acc_net2 = ev.acc_net2;
        rec.acc_ensemble = ev.acc_ensemble;
        records.push(rec);
    }
    pair.net1.opt.epoch = cfg.epochs;
    pair.net2.opt.epoch = cfg.epochs;

    let last = records.last().expect("initial record");
    let best = records
        .iter()
        .fold(&records[0], |b, r| if r.acc_ensemble > b.acc_ensemble { r } else { b });
    let mut summary = FinalSummary {
        best_accuracy: best.acc_ensemble,
        best_epoch: best.epoch,
        last_accuracy: last.acc_ensemble,
        ood_auroc: None,
        ood_fpr95: None,
    };
    if let Some(ood) = &data.ood {
        let scores = ood_scores(&pair, &data.test, ood)?;
        summary.ood_auroc = Some(metrics::auroc(&scores)?);
        summary.ood_fpr95 = Some(metrics::fpr_at_95_tpr(&scores)?);
    }
    let report = RunReport {
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        method: match settings.method {
            Method::Hrp => "hrp",
            Method::PlainCe => "plain_ce",
        }
        .into(),
        seeds: Seeds {
            run: cfg.seed,
            data: data.train.seed,
            net1: cfg.net1_seed,
            net2: cfg.net2_seed,
        },
        epochs: records,
        summary,
        config: serde_json::to_value(settings).map_err(|e| HrpError::Contract(e.to_string()))?,
    };
    Ok(TrainOutcome {
        report,
        nets: pair,
        diagnostics: diag,
    })
}
