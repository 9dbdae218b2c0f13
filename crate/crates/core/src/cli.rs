//! Command-line front end: `select`, `verify` and `bench`.
//!
//! Exit codes: 0 on success, 1 on a data error or a failed audit, 2 on a
//! usage error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::bench::{run_bench, BenchConfig};
use crate::config::{
    AdaptiveTau, Budget, CoverageConfig, CropStrategy, Mode, Pooling, DEFAULT_TAU_GRID,
};
use crate::dump::read_dump;
use crate::error::{Error, Result};
use crate::pipeline::select_tokens_detailed;
use crate::record::ResultRecord;
use crate::verify::{run_verify, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_DATA: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "tokcover", version, about = "Coverage-based vision token selection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Select tokens for every input dump and emit one JSON record per line.
    Select(SelectArgs),
    /// Audit the greedy guarantee against exhaustive search on random instances.
    Verify(VerifyArgs),
    /// Time eager and lazy greedy on a synthetic sample.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Tv,
    Vv,
    Mm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum AdaptiveArg {
    Off,
    Bisect,
    Grid,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PoolingArg {
    None,
    PreMean,
    PreMax,
    PreFirst,
    PostMean,
    PostMax,
    PostFirst,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ProfileArg {
    Default,
    Qwen,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("budget_spec").required(true).args(["budget", "budget_ratio"])))]
struct SelectArgs {
    /// Embedding dump to process; repeat for several samples.
    #[arg(long = "input", required = true)]
    inputs: Vec<PathBuf>,
    /// Number of tokens to keep.
    #[arg(long)]
    budget: Option<usize>,
    /// Fraction of --max-tokens to keep, split across crops.
    #[arg(long, requires = "max_tokens")]
    budget_ratio: Option<f64>,
    #[arg(long)]
    max_tokens: Option<usize>,
    #[arg(long, value_enum, default_value = "mm")]
    mode: ModeArg,
    /// Text-vision temperature; defaults to the profile's value.
    #[arg(long)]
    tau_t: Option<f64>,
    #[arg(long, default_value_t = 0.2)]
    tau_v: f64,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    #[arg(long, value_enum, default_value = "off")]
    adaptive: AdaptiveArg,
    /// Rank used by grid temperature search.
    #[arg(long, default_value_t = 2)]
    grid_k: usize,
    #[arg(long, value_enum, default_value = "none")]
    pooling: PoolingArg,
    #[arg(long, value_enum, default_value = "default")]
    profile: ProfileArg,
    /// Run one greedy across all crops instead of one per crop.
    #[arg(long)]
    global_crops: bool,
    /// Include per-stage wall times in each record.
    #[arg(long)]
    timing: bool,
    /// Write records here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    #[arg(long, default_value_t = 200)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 12)]
    max_n: usize,
    #[arg(long, default_value_t = 4)]
    max_k: usize,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 576)]
    n: usize,
    #[arg(long, default_value_t = 40)]
    m: usize,
    #[arg(long, default_value_t = 4096)]
    dim: usize,
    /// Width of pre-projection rows; defaults to --dim.
    #[arg(long)]
    dim_pre: Option<usize>,
    #[arg(long, default_value_t = 64)]
    budget: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    threads: Option<usize>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

impl SelectArgs {
    fn config(&self) -> Result<CoverageConfig> {
        let base = match self.profile {
            ProfileArg::Default => CoverageConfig::default(),
            ProfileArg::Qwen => CoverageConfig::qwen(),
        };
        let budget = match (self.budget, self.budget_ratio, self.max_tokens) {
            (Some(k), None, _) => Budget::Tokens(k),
            (None, Some(r), Some(t)) => {
                if !(r > 0.0 && r <= 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "--budget-ratio must lie in (0, 1], got {r}"
                    )));
                }
                Budget::Ratio {
                    max_budget: (r * t as f64).round() as usize,
                    max_tokens: t,
                }
            }
            _ => unreachable!("clap enforces exactly one budget form"),
        };
        let config = CoverageConfig {
            tau_t: self.tau_t.unwrap_or(base.tau_t),
            tau_v: self.tau_v,
            alpha: self.alpha,
            budget,
            mode: match self.mode {
                ModeArg::Tv => Mode::TextVisionOnly,
                ModeArg::Vv => Mode::VisionVisionOnly,
                ModeArg::Mm => Mode::Multimodal,
            },
            adaptive_tau: match self.adaptive {
                AdaptiveArg::Off => AdaptiveTau::Off,
                AdaptiveArg::Bisect => AdaptiveTau::default_bisection(),
                AdaptiveArg::Grid => AdaptiveTau::GridKth {
                    k: self.grid_k,
                    grid: DEFAULT_TAU_GRID.to_vec(),
                },
            },
            pooling: match self.pooling {
                PoolingArg::None => Pooling::None,
                PoolingArg::PreMean => Pooling::PreMean,
                PoolingArg::PreMax => Pooling::PreMax,
                PoolingArg::PreFirst => Pooling::PreFirst,
                PoolingArg::PostMean => Pooling::PostMean,
                PoolingArg::PostMax => Pooling::PostMax,
                PoolingArg::PostFirst => Pooling::PostFirst,
            },
            crop_strategy: if self.global_crops {
                CropStrategy::Global
            } else {
                CropStrategy::PerCrop
            },
            ..base
        };
        config.validate()?;
        Ok(config)
    }
}

fn sample_id(path: &Path) -> String {
    path.file_stem()
        .unwrap_or(path.as_os_str())
        .to_string_lossy()
        .into_owned()
}

fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(0) => Err(Error::InvalidConfig("--threads must be at least 1".into())),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::InvalidConfig(e.to_string()))?;
            Ok(pool.install(f))
        }
    }
}

fn run_select(args: &SelectArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let config = match args.config() {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };
    let process = |path: &PathBuf| -> Result<ResultRecord> {
        let sample = read_dump(path)?;
        let out = select_tokens_detailed(&sample, &config)?;
        Ok(ResultRecord::new(sample_id(path), config.tau_t, config.alpha, &out, args.timing))
    };
    // collect keeps input order regardless of which worker finished first
    let results = match with_threads(args.threads, || {
        args.inputs.par_iter().map(process).collect::<Vec<_>>()
    }) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_USAGE;
        }
    };

    let mut file_sink;
    let sink: &mut dyn Write = match &args.output {
        Some(path) => match File::create(path) {
            Ok(f) => {
                file_sink = BufWriter::new(f);
                &mut file_sink
            }
            Err(e) => {
                let _ = writeln!(stderr, "error: cannot create {}: {e}", path.display());
                return EXIT_DATA;
            }
        },
        None => stdout,
    };
    for (path, res) in args.inputs.iter().zip(results) {
        match res {
            Ok(rec) => {
                if let Err(e) = sink.write_all(rec.to_line().as_bytes()) {
                    let _ = writeln!(stderr, "error: writing output: {e}");
                    return EXIT_DATA;
                }
            }
            Err(e) => {
                let _ = sink.flush();
                let _ = writeln!(stderr, "error: sample {}: {e}", path.display());
                return EXIT_DATA;
            }
        }
    }
    if let Err(e) = sink.flush() {
        let _ = writeln!(stderr, "error: writing output: {e}");
        return EXIT_DATA;
    }
    EXIT_OK
}

fn run_verify_cmd(args: &VerifyArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cfg = VerifyConfig {
        trials: args.trials,
        seed: args.seed,
        max_n: args.max_n,
        max_k: args.max_k,
        ..VerifyConfig::default()
    };
    match with_threads(args.threads, || run_verify(&cfg)) {
        Ok(Ok(report)) => {
            let _ = writeln!(stdout, "{report}");
            if report.passed() {
                EXIT_OK
            } else {
                EXIT_DATA
            }
        }
        Ok(Err(e)) | Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_DATA
        }
    }
}

fn run_bench_cmd(args: &BenchArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let cfg = BenchConfig {
        n: args.n,
        m: args.m,
        dim: args.dim,
        dim_pre: args.dim_pre,
        budget: args.budget,
        reps: args.reps,
        seed: args.seed,
    };
    match with_threads(args.threads, || run_bench(&cfg)) {
        Ok(Ok(report)) => {
            let _ = if args.json {
                writeln!(stdout, "{}", serde_json::to_string(&report).expect("finite report"))
            } else {
                writeln!(stdout, "{report}")
            };
            EXIT_OK
        }
        Ok(Err(e)) | Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            EXIT_DATA
        }
    }
}

/// Parses `args` (including the program name) and runs the subcommand.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(stderr, "{text}")
            } else {
                write!(stdout, "{text}")
            };
            return code;
        }
    };
    match &cli.command {
        Command::Select(a) => run_select(a, stdout, stderr),
        Command::Verify(a) => run_verify_cmd(a, stdout, stderr),
        Command::Bench(a) => run_bench_cmd(a, stdout, stderr),
    }
}
