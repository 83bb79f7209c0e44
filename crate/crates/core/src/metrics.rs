//! Accuracy, positive-pair purity, OOD scores and the run report.

use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};
use serde_json::ser::{Formatter, PrettyFormatter};

use crate::net::{self, ModelParams, Mode};
use crate::{HrpError, Result};

pub fn accuracy(predictions: &[usize], true_labels: &[usize]) -> Result<f64> {
    if predictions.len() != true_labels.len() {
        return Err(HrpError::Contract("prediction and label counts differ".into()));
    }
    if predictions.is_empty() {
        return Err(HrpError::Contract("accuracy of an empty set is undefined".into()));
    }
    let hits = predictions.iter().zip(true_labels).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// `(raw, gated)` purity of the positive pairs of a bank. `weights[i]` is
/// aligned with `positives[i]`; `y_true[i]` is the true class behind row `i`.
/// Either value is `None` when its denominator vanishes.
pub fn pair_purity(positives: &[Vec<usize>], weights: &[Vec<f64>], y_true: &[usize]) -> (Option<f64>, Option<f64>) {
    let (mut pairs, mut matches, mut w_all, mut w_match) = (0usize, 0usize, 0.0, 0.0);
    for (i, (ps, ws)) in positives.iter().zip(weights).enumerate() {
        for (&j, &w) in ps.iter().zip(ws) {
            let hit = y_true[i] == y_true[j];
            pairs += 1;
            w_all += w;
            if hit {
                matches += 1;
                w_match += w;
            }
        }
    }
    let raw = (pairs > 0).then(|| matches as f64 / pairs as f64);
    let gated = (w_all > 0.0).then(|| w_match / w_all);
    (raw, gated)
}

/// Maximum-softmax-probability scores of in- and out-of-distribution inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodScoreSet {
    pub id_scores: Vec<f64>,
    pub ood_scores: Vec<f64>,
}

impl OodScoreSet {
    fn check(&self) -> Result<()> {
        if self.id_scores.is_empty() || self.ood_scores.is_empty() {
            return Err(HrpError::Contract("both score sets must be nonempty".into()));
        }
        Ok(())
    }
}

/// `P(id > ood) + P(id == ood) / 2` by the rank-sum formulation.
pub fn auroc(scores: &OodScoreSet) -> Result<f64> {
    scores.check()?;
    let mut all: Vec<(f64, bool)> = scores
        .id_scores
        .iter()
        .map(|&s| (s, true))
        .chain(scores.ood_scores.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));
    // midranks over tie groups
    let mut id_rank_sum = 0.0;
    let mut k = 0;
    while k < all.len() {
        let mut end = k;
        while end + 1 < all.len() && all[end + 1].0 == all[k].0 {
            end += 1;
        }
        let mid = (k + end) as f64 / 2.0 + 1.0;
        id_rank_sum += mid * all[k..=end].iter().filter(|e| e.1).count() as f64;
        k = end + 1;
    }
    let n = scores.id_scores.len() as f64;
    let m = scores.ood_scores.len() as f64;
    Ok((id_rank_sum - n * (n + 1.0) / 2.0) / (n * m))
}

/// Fraction of OOD scores at or above the highest threshold that still
/// accepts at least 95% of the in-distribution scores.
pub fn fpr_at_95_tpr(scores: &OodScoreSet) -> Result<f64> {
    scores.check()?;
    let mut id = scores.id_scores.clone();
    id.sort_by(|a, b| b.total_cmp(a));
    let need = (0.95 * id.len() as f64).ceil() as usize;
    let threshold = id[need.max(1) - 1];
    let fp = scores.ood_scores.iter().filter(|&&s| s >= threshold).count();
    Ok(fp as f64 / scores.ood_scores.len() as f64)
}

pub fn msp_scores(params: &ModelParams, inputs: &[Vec<f64>]) -> Result<Vec<f64>> {
    let outs = net::forward_batch(params, inputs, Mode::Eval)?;
    Ok(outs.iter().map(|o| max_prob(&net::softmax(&o.logits))).collect())
}

pub fn max_prob(probs: &[f64]) -> f64 {
    probs.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Mean and population standard deviation; `(0, 0)` for no values.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub const LAMBDA_BINS: usize = 10;

/// Counts of `values` in `LAMBDA_BINS` equal bins over `[0, 1]`.
pub fn histogram01(values: &[f64]) -> Vec<u64> {
    let mut h = vec![0u64; LAMBDA_BINS];
    for v in values {
        let b = ((v * LAMBDA_BINS as f64) as usize).min(LAMBDA_BINS - 1);
        h[b] += 1;
    }
    h
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub reweighted_ce: f64,
    pub consistency: f64,
    pub ram: f64,
    pub cdcl: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitStats {
    pub clean_mean: f64,
    pub clean_std: f64,
    pub noisy_mean: f64,
    pub noisy_std: f64,
}

impl SplitStats {
    pub fn from_values(values: &[f64], clean: &[bool]) -> Self {
        let pick = |want: bool| -> Vec<f64> {
            values.iter().zip(clean).filter(|(_, &c)| c == want).map(|(v, _)| *v).collect()
        };
        let (clean_mean, clean_std) = mean_std(&pick(true));
        let (noisy_mean, noisy_std) = mean_std(&pick(false));
        SplitStats {
            clean_mean,
            clean_std,
            noisy_mean,
            noisy_std,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LambdaSummary {
    pub mean: f64,
    pub std: f64,
    pub histogram: Vec<u64>,
}

impl LambdaSummary {
    pub fn from_values(values: &[f64]) -> Self {
        let (mean, std) = mean_std(values);
        LambdaSummary {
            mean,
            std,
            histogram: histogram01(values),
        }
    }
}

/// One row of the training trace. Losses and reliability statistics are
/// averaged over both networks and all batches of the epoch; `epoch` 0 is the
/// evaluation before any update.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub warmup: f64,
    pub losses: LossBreakdown,
    pub acc_net1: f64,
    pub acc_net2: f64,
    pub acc_ensemble: f64,
    pub alpha: SplitStats,
    pub beta: SplitStats,
    pub purity_raw: Option<f64>,
    pub purity_gated: Option<f64>,
    pub lambda: LambdaSummary,
    pub w_mix_mean: f64,
    /// Mean `|B_c| / |B|`.
    pub confident_fraction: f64,
    /// Largest `|sum(alpha + beta) - |B| S / (S + xi)|` over the epoch's batches.
    pub mass_identity_error: f64,
    /// Smallest `alpha` or `beta` seen in the epoch.
    pub min_reliability: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FinalSummary {
    pub best_accuracy: f64,
    pub best_epoch: usize,
    pub last_accuracy: f64,
    pub ood_auroc: Option<f64>,
    pub ood_fpr95: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub run: u64,
    pub data: u64,
    pub net1: u64,
    pub net2: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub artifact_version: String,
    pub method: String,
    pub seeds: Seeds,
    pub epochs: Vec<EpochRecord>,
    pub summary: FinalSummary,
    /// Complete configuration the run was produced from.
    pub config: serde_json::Value,
}

impl RunReport {
    pub fn validate(&self) -> Result<()> {
        if self.epochs.windows(2).any(|w| w[1].epoch <= w[0].epoch) {
            return Err(HrpError::Contract("epoch indices must increase".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        to_json_17(self)
    }

    pub fn from_json(text: &str) -> Result<RunReport> {
        serde_json::from_str(text).map_err(|e| HrpError::Contract(format!("malformed run report: {e}")))
    }

    pub fn final_record(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }

    /// One row per epoch.
    pub fn metrics_csv(&self) -> String {
        let mut out = String::from(
            "epoch,warmup,loss_re,loss_cr,loss_ram,loss_cdcl,loss_total,acc_net1,acc_net2,acc_ensemble,\
             alpha_clean_mean,alpha_clean_std,alpha_noisy_mean,alpha_noisy_std,\
             beta_clean_mean,beta_clean_std,beta_noisy_mean,beta_noisy_std,\
             purity_raw,purity_gated,lambda_mean,lambda_std,w_mix_mean,confident_fraction,\
             mass_identity_error,min_reliability\n",
        );
        for r in &self.epochs {
            let l = &r.losses;
            let mut fields = vec![r.epoch.to_string()];
            let opt = |v: Option<f64>| v.map(fmt17).unwrap_or_default();
            fields.extend(
                [
                    r.warmup,
                    l.reweighted_ce,
                    l.consistency,
                    l.ram,
                    l.cdcl,
                    l.total,
                    r.acc_net1,
                    r.acc_net2,
                    r.acc_ensemble,
                    r.alpha.clean_mean,
                    r.alpha.clean_std,
                    r.alpha.noisy_mean,
                    r.alpha.noisy_std,
                    r.beta.clean_mean,
                    r.beta.clean_std,
                    r.beta.noisy_mean,
                    r.beta.noisy_std,
                ]
                .map(fmt17),
            );
            fields.push(opt(r.purity_raw));
            fields.push(opt(r.purity_gated));
            fields.extend(
                [
                    r.lambda.mean,
                    r.lambda.std,
                    r.w_mix_mean,
                    r.confident_fraction,
                    r.mass_identity_error,
                    r.min_reliability,
                ]
                .map(fmt17),
            );
            let _ = writeln!(out, "{}", fields.join(","));
        }
        out
    }
}

/// A float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Pretty JSON whose floats carry 17 significant digits.
pub struct Precise17 {
    inner: PrettyFormatter<'static>,
}

impl Default for Precise17 {
    fn default() -> Self {
        Precise17 {
            inner: PrettyFormatter::new(),
        }
    }
}

impl Formatter for Precise17 {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(fmt17(value).as_bytes())
    }
    fn begin_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + io::Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + io::Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn to_json_17<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, Precise17::default());
    value
        .serialize(&mut ser)
        .map_err(|e| HrpError::Contract(format!("serialization failed: {e}")))?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("serde_json emits UTF-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::{init_params, Arch};
    use crate::oracle::{brute_force_auroc, sweep_fpr95};

    fn set(id: &[f64], ood: &[f64]) -> OodScoreSet {
        OodScoreSet {
            id_scores: id.to_vec(),
            ood_scores: ood.to_vec(),
        }
    }

    #[test]
    fn accuracy_cases() {
        assert_eq!(accuracy(&[1, 2, 3], &[1, 2, 3]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert_eq!(accuracy(&[0, 1, 2, 3], &[0, 1, 2, 0]).unwrap(), 0.75);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[]).is_err());
    }

    #[test]
    fn purity_cases() {
        // three pairs with matches (1, 1, 0) and weights (1, 1, 2)
        let pos = vec![vec![1, 2], vec![], vec![3], vec![]];
        let w = vec![vec![1.0, 1.0], vec![], vec![2.0], vec![]];
        let y = [0, 0, 0, 1];
        let (raw, gated) = pair_purity(&pos, &w, &y);
        assert!((raw.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((gated.unwrap() - 0.5).abs() < 1e-15);

        let unit = vec![vec![1.0, 1.0], vec![], vec![1.0], vec![]];
        let (raw, gated) = pair_purity(&pos, &unit, &y);
        assert_eq!(raw, gated);

        let (raw, gated) = pair_purity(&pos, &w, &[5, 5, 5, 5]);
        assert_eq!((raw, gated), (Some(1.0), Some(1.0)));

        let zero = vec![vec![0.0, 0.0], vec![], vec![0.0], vec![]];
        assert_eq!(pair_purity(&pos, &zero, &y).1, None);
        assert_eq!(pair_purity(&[vec![]], &[vec![]], &[0]), (None, None));
    }

    #[test]
    fn auroc_cases() {
        assert_eq!(auroc(&set(&[0.9, 0.8], &[0.3, 0.1])).unwrap(), 1.0);
        assert_eq!(auroc(&set(&[0.5, 0.7, 0.7], &[0.7, 0.5, 0.7])).unwrap(), 0.5);
        assert_eq!(auroc(&set(&[0.9, 0.8], &[0.85, 0.1])).unwrap(), 0.75);
        assert!(auroc(&set(&[], &[0.1])).is_err());
    }

    #[test]
    fn auroc_matches_brute_force() {
        use rand::Rng;
        for seed in 0..50 {
            let mut rng = crate::sampling::stream(seed, &[]);
            let mut draw = |n: usize| -> Vec<f64> { (0..n).map(|_| (rng.random_range(0..20) as f64) / 20.0).collect() };
            let s = set(&draw(1 + seed as usize % 13), &draw(1 + seed as usize % 7));
            assert!((auroc(&s).unwrap() - brute_force_auroc(&s.id_scores, &s.ood_scores)).abs() < 1e-12);
        }
    }

    #[test]
    fn fpr95_cases() {
        assert_eq!(fpr_at_95_tpr(&set(&[0.9, 0.8, 0.95], &[0.3, 0.1])).unwrap(), 0.0);
        let same = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        assert!(fpr_at_95_tpr(&set(&same, &same)).unwrap() >= 0.95);
        // 20 hand scores checked against the exhaustive sweep
        let id = [0.99, 0.97, 0.95, 0.9, 0.88, 0.86, 0.8, 0.75, 0.7, 0.6];
        let ood = [0.92, 0.85, 0.7, 0.65, 0.6, 0.5, 0.45, 0.4, 0.3, 0.2];
        let s = set(&id, &ood);
        // 95% of 10 ID scores needs all of them: threshold 0.6 admits 0.92 .. 0.6
        assert_eq!(fpr_at_95_tpr(&s).unwrap(), 0.5);
        assert_eq!(sweep_fpr95(&id, &ood), 0.5);
    }

    #[test]
    fn msp_cases() {
        let arch = Arch {
            input_dim: 2,
            hidden: 3,
            classes: 4,
            proj: 2,
        };
        let p = ModelParams::zeros(arch);
        assert_eq!(msp_scores(&p, &[vec![1.0, 2.0]]).unwrap(), vec![0.25]);
        assert!((max_prob(&net::softmax(&[800.0, 0.0, 0.0])) - 1.0).abs() < 1e-15);
        let q = init_params(arch, 3);
        let x = vec![0.4, -1.2];
        let logits = net::forward(&q, &x, Mode::Eval).unwrap().logits;
        let via_ce = net::softmax(&logits);
        assert!((msp_scores(&q, &[x]).unwrap()[0] - max_prob(&via_ce)).abs() < 1e-12);
    }

    #[test]
    fn histogram_edges() {
        assert_eq!(histogram01(&[0.0, 0.05, 0.1, 1.0, 0.999]), vec![2, 1, 0, 0, 0, 0, 0, 0, 0, 2]);
    }

    fn sample_report() -> RunReport {
        RunReport {
            artifact_version: "0.1.0".into(),
            method: "hrp".into(),
            seeds: Seeds {
                run: 1,
                data: 2,
                net1: 3,
                net2: 4,
            },
            epochs: vec![
                EpochRecord {
                    epoch: 0,
                    acc_net1: 0.1 + 0.2,
                    purity_raw: None,
                    ..Default::default()
                },
                EpochRecord {
                    epoch: 1,
                    warmup: 1.0 / 3.0,
                    purity_raw: Some(2.0 / 3.0),
                    purity_gated: Some(std::f64::consts::PI),
                    lambda: LambdaSummary::from_values(&[0.25, 0.75]),
                    min_reliability: 1e-300,
                    ..Default::default()
                },
            ],
            summary: FinalSummary {
                best_accuracy: 0.7,
                ood_auroc: Some(0.5),
                ..Default::default()
            },
            config: serde_json::json!({"b": 1.5, "a": {"z": true}}),
        }
    }

    #[test]
    fn report_round_trip_is_byte_identical() {
        let r = sample_report();
        let text = r.to_json().unwrap();
        let back = RunReport::from_json(&text).unwrap();
        assert_eq!(back, r);
        assert_eq!(back.to_json().unwrap(), text);
        assert!(text.contains("3.0000000000000004e-1"));
        assert!(text.find("\"artifact_version\"").unwrap() < text.find("\"config\"").unwrap());
    }

    #[test]
    fn csv_has_one_row_per_epoch() {
        let csv = sample_report().metrics_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        let cols = lines[0].split(',').count();
        assert!(lines.iter().all(|l| l.split(',').count() == cols));
    }

    #[test]
    fn monotone_epochs_validated() {
        let mut r = sample_report();
        assert!(r.validate().is_ok());
        r.epochs[1].epoch = 0;
        assert!(r.validate().is_err());
    }
}
