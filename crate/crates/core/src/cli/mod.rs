//! The `noma` command-line tool.
//!
//! Verbs: `generate` (labelled dataset), `verify` (solver against the
//! oracle), `train` (stacked surrogate), `eval` (surrogate accuracy) and
//! `bench` (solver vs surrogate timing). Every verb is a pure function of its
//! flags, input files and seed, apart from the wall-clock numbers it reports.

mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

pub use report::{Format, Report};
use report::pct;

use crate::dims::Dims;
use crate::error::{Error, Result};
use crate::num::rel_diff;
use crate::oracle::brute_force_solve;
use crate::scenario::{self, generate_scenario, sample_seed, ChannelParams, Dataset, SampleSource};
use crate::solver::{solve, SolverConfig};
use crate::surrogate::{self, io as model_io, NetSpec, OptimizerKind, TrainConfig};

#[derive(Debug, Parser)]
#[command(name = "noma", version, about = "Uplink NOMA subchannel assignment: exact solver, oracle and learned surrogate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Report layout.
    #[arg(long, global = true, value_enum, default_value = "table")]
    pub format: Format,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw random instances, solve them and write a labelled dataset.
    Generate(GenerateArgs),
    /// Compare the dual solver with exhaustive search on fresh instances.
    Verify(VerifyArgs),
    /// Train base networks and the stacked top model on a dataset.
    Train(TrainArgs),
    /// Report per-model accuracy of a trained ensemble.
    Eval(EvalArgs),
    /// Time the solver and the surrogate on the same inputs.
    Bench(BenchArgs),
}

/// `MxNxA` as typed on the command line. Only the syntax is checked while
/// parsing; `M = A * N` is checked when the command runs, so that an
/// inconsistent size is reported as a dimension error, not a usage error.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DimsArg(pub [usize; 3]);

impl std::str::FromStr for DimsArg {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.trim().split(['x', 'X']).collect();
        let parsed: Vec<usize> = parts.iter().filter_map(|p| p.parse().ok()).collect();
        match <[usize; 3]>::try_from(parsed) {
            Ok(v) if parts.len() == 3 => Ok(Self(v)),
            _ => Err(format!("expected MxNxA (e.g. 4x2x2), got {s:?}")),
        }
    }
}

impl DimsArg {
    pub fn resolve(self) -> Result<Dims> {
        let [m, n, a] = self.0;
        Dims::new(m, n, a)
    }
}

fn resolve(d: Option<DimsArg>) -> Result<Option<Dims>> {
    d.map(DimsArg::resolve).transpose()
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Problem size as MxNxA (users x subchannels x users per subchannel).
    #[arg(long)]
    pub dims: DimsArg,
    #[arg(long)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Dataset path; the normalisation sidecar goes next to it as `.norm`.
    #[arg(long, short)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub dims: DimsArg,
    #[arg(long, default_value_t = 1000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
    Switch,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Dataset written by `generate`.
    #[arg(long)]
    pub data: PathBuf,
    /// Ensemble manifest to write; model files are placed next to it.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Expected dims; rejected if the dataset differs.
    #[arg(long)]
    pub dims: Option<DimsArg>,
    /// Initialisation seed (base k uses seed + k, the top model seed + 100).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 60)]
    pub epochs: usize,
    #[arg(long, default_value_t = 200)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub lr: f64,
    #[arg(long, default_value_t = 1e-2)]
    pub sgd_lr: f64,
    #[arg(long, value_enum, default_value = "switch")]
    pub optimizer: OptimizerArg,
    /// First SGD epoch of the switch schedule (default: epochs / 2).
    #[arg(long)]
    pub switch_epoch: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Validation,
    Test,
    All,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub data: PathBuf,
    /// Ensemble manifest written by `train`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub dims: Option<DimsArg>,
    /// Part of the dataset to score (split by the dataset's seed).
    #[arg(long, value_enum, default_value = "test")]
    pub split: SplitArg,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Ensemble manifest; repeat for several problem sizes.
    #[arg(long = "model", required = true)]
    pub models: Vec<PathBuf>,
    #[arg(long, default_value_t = 10_000)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Timing passes per method; the fastest is reported.
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u32).range(1..))]
    pub repeats: u32,
}

/// Process exit status for an error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parameter(_) => 2,
        Error::Io(_) | Error::Parse(_) => 3,
        Error::Dimension(_) | Error::Shape(_) => 4,
        Error::NonConvergence { .. } | Error::Divergence { .. } => 5,
        Error::SizeGuard(_) => 6,
        _ => 1,
    }
}

/// Parses `args` (including the program name), runs the command and writes
/// its report to `out`, diagnostics to `err`. Returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = if code == 0 { write!(out, "{e}") } else { write!(err, "{e}") };
            return code;
        }
    };
    let result = execute(&cli).and_then(|text| out.write_all(text.as_bytes()).map_err(Error::from));
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(cli: &Cli) -> Result<String> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::Parameter("--threads must be positive".into()));
        }
        pool = pool.num_threads(t);
    }
    let pool = pool.build().map_err(|e| Error::Parameter(e.to_string()))?;
    pool.install(|| match &cli.command {
        Command::Generate(a) => cmd_generate(a, cli.format),
        Command::Verify(a) => cmd_verify(a, cli.format),
        Command::Train(a) => cmd_train(a, cli.format),
        Command::Eval(a) => cmd_eval(a, cli.format),
        Command::Bench(a) => cmd_bench(a, cli.format),
    })
}

pub fn cmd_generate(a: &GenerateArgs, format: Format) -> Result<String> {
    let dims = a.dims.resolve()?;
    let params = ChannelParams::default();
    let d: Dataset<f64> = scenario::generate_dataset(a.seed, a.count, dims, &params, &SolverConfig::default())?;
    let mut d = d;
    if d.len() >= 10 {
        d.normalization = scenario::split_dataset(&d, d.seed)?.train.normalization;
    }
    scenario::io::write_dataset(&a.out, &d)?;

    let mut r = Report::new(
        format!("generated {} samples of {} -> {}", d.len(), dims, a.out.display()),
        &["dims", "count", "seed", "solver", "oracle_fallback", "unverified"],
    );
    r.row(vec![
        dims.to_string(),
        d.len().to_string(),
        a.seed.to_string(),
        d.meta.count(SampleSource::Solver).to_string(),
        d.meta.count(SampleSource::OracleFallback).to_string(),
        d.meta.count(SampleSource::Unverified).to_string(),
    ]);
    Ok(r.render(format))
}

struct VerifyRow {
    matched: bool,
    ratio: f64,
    iterations: usize,
    converged: bool,
    repaired: bool,
}

pub fn cmd_verify(a: &VerifyArgs, format: Format) -> Result<String> {
    let dims = a.dims.resolve()?;
    let size = crate::oracle::enumerate_assignments(dims).map(|_| dims.assignment_count())?;
    if a.count == 0 {
        return Err(Error::Parameter("--count must be positive".into()));
    }
    let cfg = SolverConfig { max_iters: a.max_iters, ..SolverConfig::default() };
    let params = ChannelParams::default();
    let rows: Vec<VerifyRow> = (0..a.count)
        .into_par_iter()
        .map(|i| {
            let inst = generate_scenario::<f64>(sample_seed(a.seed, i as u64), dims, &params)?.instance();
            let res = solve(&inst, &cfg)?;
            let (_, best) = brute_force_solve(&inst)?;
            Ok(VerifyRow {
                matched: rel_diff(res.sum_rate, best) <= 1e-6,
                ratio: if best > 0.0 { res.sum_rate / best } else { 1.0 },
                iterations: res.iterations,
                converged: res.converged,
                repaired: res.repair_used,
            })
        })
        .collect::<Result<_>>()?;

    let k = rows.len() as f64;
    let matched = rows.iter().filter(|r| r.matched).count() as f64 / k;
    let mean_ratio = rows.iter().map(|r| r.ratio).sum::<f64>() / k;
    let min_ratio = rows.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let mean_iters = rows.iter().map(|r| r.iterations as f64).sum::<f64>() / k;
    let max_iters = rows.iter().map(|r| r.iterations).max().unwrap_or(0);
    let converged = rows.iter().filter(|r| r.converged).count();
    let repaired = rows.iter().filter(|r| r.repaired).count();

    let mut r = Report::new(
        format!("solver vs exhaustive search, {} instances of {dims}", rows.len()),
        &[
            "dims",
            "instances",
            "enumeration_size",
            "match_fraction",
            "mean_ratio",
            "min_ratio",
            "mean_iters",
            "max_iters",
            "converged",
            "repaired",
        ],
    );
    r.row(vec![
        dims.to_string(),
        rows.len().to_string(),
        size.map_or("-".into(), |s| s.to_string()),
        format!("{matched:.4}"),
        format!("{mean_ratio:.8}"),
        format!("{min_ratio:.8}"),
        format!("{mean_iters:.1}"),
        max_iters.to_string(),
        converged.to_string(),
        repaired.to_string(),
    ]);
    Ok(r.render(format))
}

fn check_dims(expected: Option<Dims>, actual: Dims, what: &str) -> Result<()> {
    match expected {
        Some(e) if e != actual => Err(Error::Dimension(format!("--dims {e} but {what} is {actual}"))),
        _ => Ok(()),
    }
}

fn timing_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("timing")
}

/// Base `k` is seeded `seed + k`; the top model `seed + 100`.
const TOP_SEED_OFFSET: u64 = 100;

pub fn cmd_train(a: &TrainArgs, format: Format) -> Result<String> {
    let d: Dataset<f64> = scenario::io::read_dataset(&a.data)?;
    check_dims(resolve(a.dims)?, d.dims, "the dataset")?;
    let split = scenario::split_dataset(&d, d.seed)?;
    let cfg = TrainConfig {
        epochs: a.epochs,
        batch_size: a.batch_size,
        learning_rate: a.lr,
        sgd_learning_rate: a.sgd_lr,
        optimizer: match a.optimizer {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Sgd => OptimizerKind::SgdMomentum,
            OptimizerArg::Switch => OptimizerKind::CustomizeSwitch,
        },
        switch_epoch: a.switch_epoch.unwrap_or((a.epochs / 2).max(1)),
        seed: a.seed,
        ..TrainConfig::default()
    };
    cfg.validate()?;

    let start = Instant::now();
    let bases = surrogate::train_bases(&split, &surrogate::default_base_specs(a.seed), &cfg)?;
    let base_secs = start.elapsed().as_secs_f64();
    let top_spec = NetSpec { hidden: surrogate::DEFAULT_TOP_HIDDEN.to_vec(), seed: a.seed.wrapping_add(TOP_SEED_OFFSET) };
    let top_start = Instant::now();
    let (ensemble, _) = surrogate::stack_train(bases.iter().map(|b| b.model.clone()).collect(), &split, &top_spec, &cfg)?;
    let top_secs = top_start.elapsed().as_secs_f64();
    let total = start.elapsed().as_secs_f64();

    model_io::write_ensemble(&a.out, &ensemble)?;
    // Wall-clock numbers live apart from the model files so that the
    // models themselves are reproducible byte for byte.
    std::fs::write(timing_path(&a.out), format!("bases,{base_secs:.3}\ntop,{top_secs:.3}\ntotal,{total:.3}\n"))?;

    let val = ensemble.evaluate(&split.validation)?;
    let mut r = Report::new(
        format!(
            "trained on {} samples of {} ({} validation), {:.1} s",
            split.train.len(),
            d.dims,
            split.validation.len(),
            total
        ),
        &["model", "layers", "validation_accuracy", "final_loss"],
    );
    for (k, b) in bases.iter().enumerate() {
        r.row(vec![
            format!("base{}", k + 1),
            layers(b.model.layer_sizes()),
            pct(val.base[k]),
            format!("{:.6}", b.history.last().copied().unwrap_or(f64::NAN)),
        ]);
    }
    // The top model is fitted on the validation split, so its figure here is
    // a training score, not a held-out one.
    r.row(vec!["top".into(), layers(ensemble.top_model.layer_sizes()), pct(val.top), "-".into()]);
    Ok(r.render(format))
}

fn layers(sizes: &[usize]) -> String {
    sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("-")
}

fn read_training_time(manifest: &Path) -> String {
    std::fs::read_to_string(timing_path(manifest))
        .ok()
        .and_then(|t| t.lines().find_map(|l| l.strip_prefix("total,").map(|v| format!("{v} s"))))
        .unwrap_or_else(|| "-".into())
}

pub fn cmd_eval(a: &EvalArgs, format: Format) -> Result<String> {
    let ensemble: surrogate::EnsembleModel<f64> = model_io::read_ensemble(&a.model)?;
    let d: Dataset<f64> = scenario::io::read_dataset(&a.data)?;
    check_dims(resolve(a.dims)?, d.dims, "the dataset")?;
    check_dims(Some(ensemble.dims), d.dims, "the dataset")?;
    let part = match a.split {
        SplitArg::All => d,
        s => {
            let split = scenario::split_dataset(&d, d.seed)?;
            match s {
                SplitArg::Train => split.train,
                SplitArg::Validation => split.validation,
                _ => split.test,
            }
        }
    };
    let rep = ensemble.evaluate(&part)?;
    let split_name = format!("{:?}", a.split).to_lowercase();
    let mut header: Vec<String> = vec!["dims".into(), "split".into(), "samples".into()];
    header.extend((1..=rep.base.len()).map(|k| format!("base{k}")));
    header.extend(["top".into(), "training_time".into()]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut r = Report::new(format!("surrogate accuracy on {} ({split_name} split)", a.data.display()), &header_refs);
    let mut row = vec![part.dims.to_string(), split_name, rep.samples.to_string()];
    row.extend(rep.base.iter().map(|&x| pct(x)));
    row.push(pct(rep.top));
    row.push(read_training_time(&a.model));
    r.row(row);
    Ok(r.render(format))
}

pub fn cmd_bench(a: &BenchArgs, format: Format) -> Result<String> {
    let mut r = Report::new(
        format!("solver vs surrogate on {} samples per size", a.count),
        &["dims", "method", "samples", "total_s", "per_sample_us", "speedup"],
    );
    if a.count == 0 {
        return Ok(r.render(format));
    }
    let params = ChannelParams::default();
    let cfg = SolverConfig::default();
    for path in &a.models {
        let ensemble: surrogate::EnsembleModel<f64> = model_io::read_ensemble(path)?;
        let dims = ensemble.dims;
        let instances: Vec<_> = (0..a.count)
            .map(|i| generate_scenario::<f64>(sample_seed(a.seed, i as u64), dims, &params).map(|s| s.instance()))
            .collect::<Result<_>>()?;
        let features: Vec<Vec<f64>> = instances.iter().map(|i| i.gains().as_slice().to_vec()).collect();

        // Both sides run on one thread over identical inputs; each is timed
        // `repeats` times and the fastest pass is kept.
        let best = |f: &mut dyn FnMut() -> Result<()>| -> Result<f64> {
            let mut best = f64::INFINITY;
            for _ in 0..a.repeats {
                let t = Instant::now();
                f()?;
                best = best.min(t.elapsed().as_secs_f64());
            }
            Ok(best)
        };
        let solver_s = best(&mut || {
            for inst in &instances {
                std::hint::black_box(solve(inst, &cfg)?);
            }
            Ok(())
        })?;
        let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().map_err(|e| Error::Parameter(e.to_string()))?;
        let surrogate_s = best(&mut || {
            std::hint::black_box(single.install(|| ensemble.predict_batch(&features))?);
            Ok(())
        })?;

        let per = |s: f64| format!("{:.2}", 1e6 * s / a.count as f64);
        r.row(vec![dims.to_string(), "solver".into(), a.count.to_string(), format!("{solver_s:.4}"), per(solver_s), "1.0".into()]);
        r.row(vec![
            dims.to_string(),
            "surrogate".into(),
            a.count.to_string(),
            format!("{surrogate_s:.4}"),
            per(surrogate_s),
            format!("{:.1}", solver_s / surrogate_s.max(1e-12)),
        ]);
    }
    Ok(r.render(format))
}
