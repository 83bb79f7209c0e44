//! `hrp` command line: dataset generation, training, ablation grids, oracle
//! suites and report inspection.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{unix_now, ExperimentManifest, RunConfig};
use crate::dataset::Dataset;
use crate::metrics::RunReport;
use crate::selfcheck;
use crate::trainer::{self, Method, TrainOutcome};
use crate::{par, HrpError, Result};

#[derive(Debug, Parser)]
#[command(name = "hrp", version, about = "Reliability-propagation training on noisy-label blobs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `run.out_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run seed (overrides `run.seed`).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the noisy training set, meta set, test set and OOD set.
    Generate(RunArgs),
    /// Co-train both networks and write the run report.
    Train {
        #[command(flatten)]
        run: RunArgs,
        /// Also write per-sample reliability and Mixup pair traces.
        #[arg(long)]
        diagnostics: bool,
    },
    /// Train every ablation variant over several seeds and emit the grid.
    Ablate {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated run seeds.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
    },
    /// Run an oracle suite: meta, losses, beta, cdcl, auroc or all.
    Oracle { suite: String },
    /// Pretty-print a run report.
    Report { path: PathBuf },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Generate(a) => {
            let (cfg, out) = resolve(&a)?;
            cmd_generate(&cfg, &out)?;
            println!("datasets written to {}", out.display());
            Ok(0)
        }
        Command::Train { run, diagnostics } => {
            let (cfg, out) = resolve(&run)?;
            let report = cmd_train(&cfg, &out, diagnostics)?;
            print!("{}", render_report(&report));
            Ok(0)
        }
        Command::Ablate { run, seeds } => {
            let (cfg, out) = resolve(&run)?;
            ensure_dir(&out)?;
            let grid = ablation_grid(&cfg, &seeds)?;
            write(&out.join("ablation.csv"), grid.to_csv())?;
            write(&out.join("ablation.md"), grid.to_markdown())?;
            print!("{}", grid.to_markdown());
            Ok(0)
        }
        Command::Oracle { suite } => {
            let checks = selfcheck::run_suite(&suite)?;
            let failed = checks.iter().filter(|c| !c.passed()).count();
            for c in &checks {
                println!("{}", c.line());
            }
            println!("{} checks, {} failed", checks.len(), failed);
            Ok(if failed == 0 { 0 } else { 1 })
        }
        Command::Report { path } => {
            let text = fs::read_to_string(&path).map_err(|e| HrpError::io(format!("reading {}", path.display()), e))?;
            let report = RunReport::from_json(&text).map_err(|e| HrpError::Parse {
                path: path.clone(),
                detail: e.to_string(),
            })?;
            print!("{}", render_report(&report));
            Ok(0)
        }
    }
}

fn resolve(a: &RunArgs) -> Result<(RunConfig, PathBuf)> {
    let mut cfg = match &a.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = a.seed {
        cfg = cfg.with_seed(s);
    }
    let out = a
        .out
        .clone()
        .or_else(|| cfg.run.out_dir.clone())
        .ok_or_else(|| HrpError::Config("run.out_dir: no output directory; pass --out".into()))?;
    Ok((cfg, out))
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).map_err(|e| HrpError::io(format!("writing {}", path.display()), e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| HrpError::io(format!("creating {}", dir.display()), e))
}

/// Writes `train`, `meta`, `test` and (when enabled) `ood` as CSV plus sidecar JSON.
pub fn cmd_generate(cfg: &RunConfig, out: &Path) -> Result<()> {
    ensure_dir(out)?;
    let data = cfg.build_data()?;
    data.train.write(out, "train")?;
    meta_as_dataset(&data.train, &data.meta.samples).write(out, "meta")?;
    data.test.write(out, "test")?;
    if let Some(ood) = &data.ood {
        ood.write(out, "ood")?;
    }
    Ok(())
}

fn meta_as_dataset(like: &Dataset, samples: &[crate::dataset::LabeledSample]) -> Dataset {
    Dataset {
        samples: samples.to_vec(),
        noise: crate::dataset::NoiseSpec::clean(),
        ..like.clone()
    }
}

/// Trains and writes `report.json`, `metrics.csv`, `manifest.json`,
/// `config.toml`, both checkpoints and, on request, `diagnostics/*.csv`.
pub fn cmd_train(cfg: &RunConfig, out: &Path, diagnostics: bool) -> Result<RunReport> {
    ensure_dir(out)?;
    let started = unix_now();
    let clock = Instant::now();
    let data = cfg.build_data()?;
    let mut manifest = ExperimentManifest::new(
        cfg,
        &[
            ("train", &data.train),
            ("meta", &meta_as_dataset(&data.train, &data.meta.samples)),
            ("test", &data.test),
        ],
        started,
    );
    let outcome = match trainer::co_train_with_state(&data, &cfg.settings(), diagnostics) {
        Ok(o) => o,
        Err(e @ HrpError::Divergence { .. }) => {
            write(&out.join("divergence.txt"), format!("{e}\n"))?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };
    let TrainOutcome {
        mut report,
        nets,
        diagnostics: diag,
    } = outcome;
    report.config = serde_json::to_value(cfg).map_err(|e| HrpError::Contract(e.to_string()))?;
    report.validate()?;

    write(&out.join("report.json"), report.to_json()?)?;
    write(&out.join("metrics.csv"), report.metrics_csv())?;
    write(&out.join("config.toml"), cfg.to_toml())?;
    write(&out.join("net1.ckpt"), nets.net1.params.to_checkpoint())?;
    write(&out.join("net2.ckpt"), nets.net2.params.to_checkpoint())?;
    if diagnostics {
        let dir = out.join("diagnostics");
        ensure_dir(&dir)?;
        write(&dir.join("reliability.csv"), diag.reliability_csv())?;
        write(&dir.join("pairs.csv"), diag.pairs_csv())?;
        let mut sup = String::from("epoch,batch,learner,provider\n");
        for r in &diag.supervision {
            let _ = writeln!(sup, "{},{},{:?},{:?}", r.epoch, r.batch, r.learner, r.provider);
        }
        write(&dir.join("supervision.csv"), sup)?;
    }
    manifest.finished_unix = unix_now();
    manifest.wall_clock_seconds = clock.elapsed().as_secs_f64();
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| HrpError::Contract(e.to_string()))?;
    write(&out.join("manifest.json"), text + "\n")?;
    Ok(report)
}

pub fn render_report(r: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "method {}  version {}  seed {}", r.method, r.artifact_version, r.seeds.run);
    let _ = writeln!(
        s,
        "{:>5} {:>6} {:>9} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8}",
        "epoch", "w(t)", "loss", "net1", "net2", "ens", "a_clean", "a_noisy", "pur_raw", "pur_gate"
    );
    let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    for e in &r.epochs {
        let _ = writeln!(
            s,
            "{:>5} {:>6.3} {:>9.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8} {:>8}",
            e.epoch,
            e.warmup,
            e.losses.total,
            e.acc_net1,
            e.acc_net2,
            e.acc_ensemble,
            e.alpha.clean_mean,
            e.alpha.noisy_mean,
            opt(e.purity_raw),
            opt(e.purity_gated)
        );
    }
    let m = &r.summary;
    let _ = writeln!(
        s,
        "best {:.4} (epoch {})  last {:.4}  ood auroc {}  fpr95 {}",
        m.best_accuracy,
        m.best_epoch,
        m.last_accuracy,
        opt(m.ood_auroc),
        opt(m.ood_fpr95)
    );
    s
}

/// Rows of the ablation table, each a single-flag change from the full method.
pub const VARIANTS: [&str; 7] = ["hrp", "w/o ram", "w/o cdcl", "w/o grg", "sym ram", "coupled meta", "plain ce"];

pub fn variant_config(base: &RunConfig, variant: &str) -> Result<RunConfig> {
    let mut c = base.clone();
    c.run.method = Method::Hrp;
    c.ablation = Default::default();
    match variant {
        "hrp" => {}
        "w/o ram" => c.ablation.use_ram = false,
        "w/o cdcl" => c.ablation.use_cdcl = false,
        "w/o grg" => c.ablation.use_grg = false,
        "sym ram" => c.ablation.symmetric_ram = true,
        "coupled meta" => c.ablation.couple_meta = true,
        "plain ce" => c.run.method = Method::PlainCe,
        other => return Err(HrpError::Config(format!("unknown ablation variant `{other}`"))),
    }
    Ok(c)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridCell {
    pub variant: &'static str,
    pub seed: u64,
    pub last_accuracy: f64,
    pub best_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AblationGrid {
    pub cells: Vec<GridCell>,
}

impl AblationGrid {
    /// Mean final ensemble accuracy of `variant` over seeds.
    pub fn mean_last(&self, variant: &str) -> f64 {
        let v: Vec<f64> = self.cells.iter().filter(|c| c.variant == variant).map(|c| c.last_accuracy).collect();
        crate::metrics::mean_std(&v).0
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("variant,seed,last_accuracy,best_accuracy\n");
        for c in &self.cells {
            let _ = writeln!(
                s,
                "{},{},{},{}",
                c.variant,
                c.seed,
                crate::metrics::fmt17(c.last_accuracy),
                crate::metrics::fmt17(c.best_accuracy)
            );
        }
        s
    }

    /// Mean final accuracy per variant and its margin to the full method.
    pub fn to_markdown(&self) -> String {
        let full = self.mean_last("hrp");
        let mut s = String::from("| variant | mean final acc | margin vs hrp |\n|---|---|---|\n");
        for v in VARIANTS {
            if self.cells.iter().any(|c| c.variant == v) {
                let m = self.mean_last(v);
                let _ = writeln!(s, "| {v} | {m:.4} | {:+.4} |", m - full);
            }
        }
        s
    }
}

pub fn ablation_grid(base: &RunConfig, seeds: &[u64]) -> Result<AblationGrid> {
    let jobs: Vec<(&'static str, u64)> = VARIANTS.iter().flat_map(|&v| seeds.iter().map(move |&s| (v, s))).collect();
    let cells = par::map_slice(&jobs, |&(variant, seed)| -> Result<GridCell> {
        let cfg = variant_config(base, variant)?.with_seed(seed);
        let report = trainer::co_train(&cfg.build_data()?, &cfg.settings())?;
        Ok(GridCell {
            variant,
            seed,
            last_accuracy: report.summary.last_accuracy,
            best_accuracy: report.summary.best_accuracy,
        })
    });
    Ok(AblationGrid {
        cells: cells.into_iter().collect::<Result<_>>()?,
    })
}
