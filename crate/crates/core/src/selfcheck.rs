//! Registered oracle comparisons, grouped into suites for `hrp oracle`.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::cdcl::{self, CdclConfig, FeatureBank};
use crate::dataset::{LabeledSample, MetaSet};
use crate::metrics::{self, OodScoreSet};
use crate::net::{self, one_hot, Arch, Mode, ModelParams};
use crate::oracle::{self, central_difference_grad, fixture_params, max_rel_error};
use crate::ram::{self, RamConfig};
use crate::reliability::{self, MetaConfig};
use crate::sampling::{self, stream};
use crate::trainer;
use crate::{HrpError, Result};

pub const SUITES: [&str; 6] = ["meta", "losses", "beta", "cdcl", "auroc", "all"];

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub suite: &'static str,
    pub name: String,
    /// Passing requires `observed < tolerance`.
    pub tolerance: f64,
    pub observed: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.observed < self.tolerance
    }

    pub fn line(&self) -> String {
        format!(
            "{} {:<7} {:<52} observed {:.3e}  tolerance {:.1e}",
            if self.passed() { "PASS" } else { "FAIL" },
            self.suite,
            self.name,
            self.observed,
            self.tolerance
        )
    }
}

pub fn run_suite(name: &str) -> Result<Vec<Check>> {
    match name {
        "meta" => meta_suite(100),
        "losses" => losses_suite(),
        "beta" => Ok(beta_suite(100_000)),
        "cdcl" => Ok(cdcl_suite()),
        "auroc" => auroc_suite(),
        "all" => {
            let mut out = Vec::new();
            for s in &SUITES[..5] {
                out.extend(run_suite(s)?);
            }
            Ok(out)
        }
        other => Err(HrpError::Config(format!(
            "unknown oracle suite `{other}`; expected one of {}",
            SUITES.join(", ")
        ))),
    }
}

/// Input 3, hidden 4, three classes, projection 3.
pub fn gradcheck_arch() -> Arch {
    Arch {
        input_dim: 3,
        hidden: 4,
        classes: 3,
        proj: 3,
    }
}

fn gaussian_points(rng: &mut sampling::StreamRng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

fn random_dist(rng: &mut sampling::StreamRng, classes: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..classes).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

/// A small random reweighting problem: parameters, batch, targets, meta set.
pub struct MetaFixture {
    pub params: ModelParams,
    pub inputs: Vec<Vec<f64>>,
    pub given: Vec<Vec<f64>>,
    pub pseudo: Vec<Vec<f64>>,
    pub meta: MetaSet,
}

pub fn meta_fixture(seed: u64) -> MetaFixture {
    let arch = gradcheck_arch();
    let mut rng = stream(seed, &[0xAE7A]);
    let n = rng.random_range(3..7usize);
    let m = rng.random_range(3..7usize);
    let inputs = gaussian_points(&mut rng, n, arch.input_dim);
    let given = (0..n).map(|_| one_hot(rng.random_range(0..arch.classes), arch.classes)).collect();
    let pseudo = (0..n).map(|_| one_hot(rng.random_range(0..arch.classes), arch.classes)).collect();
    let meta = MetaSet {
        samples: gaussian_points(&mut rng, m, arch.input_dim)
            .into_iter()
            .enumerate()
            .map(|(id, x)| {
                let y = rng.random_range(0..arch.classes);
                LabeledSample {
                    id,
                    x,
                    y_true: y,
                    y_obs: y,
                }
            })
            .collect(),
    };
    MetaFixture {
        params: fixture_params(arch, seed),
        inputs,
        given,
        pseudo,
        meta,
    }
}

/// Closed-form meta-gradients against the literal virtual-step oracle.
pub fn meta_suite(fixtures: u64) -> Result<Vec<Check>> {
    let cfg = MetaConfig {
        eta_inner: 0.5,
        ..MetaConfig::default()
    };
    let mut out = Vec::new();
    for seed in 0..fixtures {
        let f = meta_fixture(seed);
        let (c1, c2) = reliability::meta_gradients_closed(&f.params, &f.inputs, &f.given, &f.pseudo, &f.meta, &cfg)?;
        let (d1, d2) = reliability::meta_gradients_fd(&f.params, &f.inputs, &f.given, &f.pseudo, &f.meta, &cfg)?;
        let closed = [c1, c2].concat();
        let fd = [d1, d2].concat();
        out.push(Check {
            suite: "meta",
            name: format!("closed vs virtual-step FD, fixture {seed}"),
            tolerance: 1e-3,
            observed: max_rel_error(&closed, &fd),
        });
    }
    Ok(out)
}

/// Every loss gradient, and their weighted sum, against central differences.
pub fn losses_suite() -> Result<Vec<Check>> {
    let arch = gradcheck_arch();
    let mut out = Vec::new();
    let tol = 1e-5;
    let h = 1e-5;
    for seed in 0..3u64 {
        let p = fixture_params(arch, 100 + seed);
        let mut rng = stream(seed, &[0x1055]);
        let n = 6;
        let weak = gaussian_points(&mut rng, n, arch.input_dim);
        let strong = gaussian_points(&mut rng, n, arch.input_dim);
        let targets: Vec<Vec<f64>> = (0..n).map(|_| random_dist(&mut rng, arch.classes)).collect();
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..2.0)).collect();
        let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.5)).collect();
        let pc: Vec<usize> = (0..n).map(|_| rng.random_range(0..2)).collect();
        let bc = vec![0, 2, 3, 5];
        let ram_cfg = RamConfig::default();
        let pairs = ram::build_pairs(&weak, &r, &targets, &ram_cfg, &mut rng)?;
        let cdcl_cfg = CdclConfig::default();
        let (w, lambda) = (0.6, 0.5);

        let mut push = |name: &str, analytic: &[f64], fd: &[f64]| {
            out.push(Check {
                suite: "losses",
                name: format!("{name}, fixture {seed}"),
                tolerance: tol,
                observed: max_rel_error(analytic, fd),
            });
        };

        let (_, g_re) = trainer::reweighted_ce(&p, &weak, &targets, &r, &bc, 1.0, ram_cfg.delta)?;
        let fd = central_difference_grad(&p, h, |q| {
            trainer::reweighted_ce(q, &weak, &targets, &r, &bc, 1.0, ram_cfg.delta).unwrap().0
        });
        push("reweighted cross-entropy", &g_re.0, &fd);

        let (_, g_cr) = trainer::consistency_loss(&p, &strong, &targets, &bc)?;
        let fd = central_difference_grad(&p, h, |q| trainer::consistency_loss(q, &strong, &targets, &bc).unwrap().0);
        push("cross-consistency", &g_cr.0, &fd);

        let (_, g_ram) = ram::ram_loss_with_grad(&p, &pairs, n)?;
        let fd = central_difference_grad(&p, h, |q| ram::ram_loss(q, &pairs, n).unwrap());
        push("gated asymmetric mixup", &g_ram.0, &fd);

        let (_, g_cdcl) = cdcl::cdcl_loss_with_grad(&p, &weak, &strong, &pc, &beta, &cdcl_cfg)?;
        let naive_cdcl = |q: &ModelParams| {
            let z: Vec<Vec<f64>> = weak
                .iter()
                .chain(&strong)
                .map(|x| net::l2_normalize(&net::forward(q, x, Mode::Train).unwrap().embedding).0)
                .collect();
            let pc2 = [pc.clone(), pc.clone()].concat();
            let b2 = [beta.clone(), beta.clone()].concat();
            oracle::naive_cdcl_loss(&z, &pc2, &b2, cdcl_cfg.tau, cdcl_cfg.range_eps)
        };
        let fd = central_difference_grad(&p, h, naive_cdcl);
        push("consensus contrastive", &g_cdcl.0, &fd);

        let mut g_total = g_re.clone();
        g_total.add_scaled(&g_cr, w);
        g_total.add_scaled(&g_ram, w);
        g_total.add_scaled(&g_cdcl, w * lambda);
        let fd = central_difference_grad(&p, h, |q| {
            let c = trainer::LossComponents {
                reweighted_ce: trainer::reweighted_ce(q, &weak, &targets, &r, &bc, 1.0, ram_cfg.delta).unwrap().0,
                consistency: trainer::consistency_loss(q, &strong, &targets, &bc).unwrap().0,
                ram: ram::ram_loss(q, &pairs, n).unwrap(),
                cdcl: naive_cdcl(q),
            };
            trainer::total_loss(&c, w, lambda)
        });
        push("joint objective", &g_total.0, &fd);
    }
    Ok(out)
}

/// Raw moments `E[X^k]`, `k = 1..=4`, of `Beta(a, b)`.
fn beta_raw_moments(a: f64, b: f64) -> [f64; 4] {
    let mut m = [0.0; 4];
    let mut acc = 1.0;
    for k in 0..4 {
        acc *= (a + k as f64) / (a + b + k as f64);
        m[k] = acc;
    }
    m
}

/// Standardized errors `(|mean z|, |variance z|)` of `n` draws from the RAM law
/// of `(r_i, r_j)`.
pub fn beta_moment_z(r_i: f64, r_j: f64, cfg: &RamConfig, n: usize, seed: u64) -> (f64, f64) {
    let (a, b) = cfg.beta_shapes(r_i, r_j);
    let mut rng = stream(seed, &[0xBE7A]);
    let draws: Vec<f64> = (0..n).map(|_| ram::sample_lambda(r_i, r_j, cfg, &mut rng)).collect();
    let (mean, var) = sampling::beta_moments(a, b);
    let [e1, e2, e3, e4] = beta_raw_moments(a, b);
    let mu4 = e4 - 4.0 * e1 * e3 + 6.0 * e1 * e1 * e2 - 3.0 * e1.powi(4);
    let nf = n as f64;
    let m = draws.iter().sum::<f64>() / nf;
    let v = draws.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (nf - 1.0);
    let se_mean = (var / nf).sqrt();
    let se_var = ((mu4 - var * var) / nf).sqrt();
    ((m - mean).abs() / se_mean, (v - var).abs() / se_var)
}

pub fn beta_suite(draws: usize) -> Vec<Check> {
    let asym = RamConfig::default();
    let sym = RamConfig {
        law: ram::LambdaLaw::Symmetric,
        ..RamConfig::default()
    };
    let mut out = Vec::new();
    for (k, &(ri, rj)) in [(1.0, 1.0), (3.0, 1.0), (0.1, 2.0)].iter().enumerate() {
        let (zm, zv) = beta_moment_z(ri, rj, &asym, draws, k as u64);
        for (what, z) in [("mean", zm), ("variance", zv)] {
            out.push(Check {
                suite: "beta",
                name: format!("r = ({ri}, {rj}) {what}, standard errors"),
                tolerance: 4.0,
                observed: z,
            });
        }
    }
    let (a, b) = asym.beta_shapes(1.0, 1.0);
    let half = asym.gamma / 2.0;
    out.push(Check {
        suite: "beta",
        name: "equal reliabilities give Beta(gamma/2, gamma/2)".into(),
        tolerance: 1e-8,
        observed: ((a - half).abs()).max((b - half).abs()) / half,
    });
    let (zm, zv) = beta_moment_z(0.7, 1.9, &sym, draws, 9);
    out.push(Check {
        suite: "beta",
        name: "symmetric law mean, standard errors".into(),
        tolerance: 4.0,
        observed: zm,
    });
    out.push(Check {
        suite: "beta",
        name: "symmetric law variance, standard errors".into(),
        tolerance: 4.0,
        observed: zv,
    });
    out
}

/// Random bank with `n` sources (`2n` rows).
pub fn random_bank(n: usize, dim: usize, classes: usize, seed: u64) -> FeatureBank {
    let mut rng = stream(seed, &[0xCDC1]);
    let weak = gaussian_points(&mut rng, n, dim);
    let strong = gaussian_points(&mut rng, n, dim);
    let pc: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    let beta: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..2.0)).collect();
    FeatureBank::from_embeddings(&weak, &strong, &pc, &beta).expect("consistent lengths")
}

/// Four orthogonal unit rows, one positive per anchor: every term is `log 3`.
pub fn log3_bank() -> FeatureBank {
    let e = |k: usize| {
        let mut v = vec![0.0; 4];
        v[k] = 1.0;
        v
    };
    FeatureBank::from_embeddings(&[e(0), e(1)], &[e(2), e(3)], &[0, 1], &[0.5, 0.5]).expect("consistent lengths")
}

pub fn cdcl_suite() -> Vec<Check> {
    let cfg = CdclConfig::default();
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        for n in [1usize, 2, 3, 5, 8, 12, 16] {
            let bank = random_bank(n, 6, 1 + (seed as usize % 4), seed);
            let fast = cdcl::cdcl_loss(&bank, &cfg);
            let slow = oracle::naive_cdcl_loss(&bank.z, &bank.pseudo_class, &bank.beta, cfg.tau, cfg.range_eps);
            worst = worst.max((fast - slow).abs());
        }
    }
    vec![
        Check {
            suite: "cdcl",
            name: "vectorized vs double loop, banks up to 32 rows".into(),
            tolerance: 1e-10,
            observed: worst,
        },
        Check {
            suite: "cdcl",
            name: "orthogonal hand case equals log 3".into(),
            tolerance: 1e-9,
            observed: (cdcl::cdcl_loss(&log3_bank(), &cfg) - 3f64.ln()).abs(),
        },
    ]
}

pub fn auroc_suite() -> Result<Vec<Check>> {
    let mut worst_auc: f64 = 0.0;
    let mut worst_fpr: f64 = 0.0;
    for seed in 0..200u64 {
        let mut rng = stream(seed, &[0xA0C]);
        let n = rng.random_range(1..40usize);
        let m = rng.random_range(1..40usize);
        // coarse grid so ties are common
        let mut draw = |k: usize, shift: i32| -> Vec<f64> {
            (0..k).map(|_| (rng.random_range(0..25) + shift) as f64 / 40.0).collect()
        };
        let s = OodScoreSet {
            id_scores: draw(n, 5),
            ood_scores: draw(m, 0),
        };
        worst_auc = worst_auc.max((metrics::auroc(&s)? - oracle::brute_force_auroc(&s.id_scores, &s.ood_scores)).abs());
        worst_fpr = worst_fpr.max((metrics::fpr_at_95_tpr(&s)? - oracle::sweep_fpr95(&s.id_scores, &s.ood_scores)).abs());
    }
    let hand = OodScoreSet {
        id_scores: vec![0.9, 0.8],
        ood_scores: vec![0.85, 0.1],
    };
    Ok(vec![
        Check {
            suite: "auroc",
            name: "rank formulation vs pairwise count".into(),
            tolerance: 1e-12,
            observed: worst_auc,
        },
        Check {
            suite: "auroc",
            name: "FPR95 vs exhaustive threshold sweep".into(),
            tolerance: 1e-12,
            observed: worst_fpr,
        },
        Check {
            suite: "auroc",
            name: "hand case (0.9, 0.8) vs (0.85, 0.1) equals 0.75".into(),
            tolerance: 1e-15,
            observed: (metrics::auroc(&hand)? - 0.75).abs(),
        },
    ])
}
