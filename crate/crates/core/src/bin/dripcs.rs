use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dripcs::decompose::convex_k_sparse_decompose;
use dripcs::drip::{delta_exact, delta_lower_mc, EnumerationOptions, DEFAULT_ENUMERATION_BUDGET};
use dripcs::error::{Error, Result};
use dripcs::experiment::{
    records_to_csv, records_to_jsonl, run_experiment, run_selftest, ExperimentConfig, FrameKind,
    PhiKind, SelftestOptions,
};
use dripcs::frames::{identity_frame, mercedes_benz_frame, random_tight_frame, Frame, FrameMeta};
use dripcs::measurement::{gaussian_measurement, measure, MeasurementMatrix};
use dripcs::numerics::{
    norm1, norm_inf, read_matrix_csv, read_vector_csv, write_matrix_csv, write_vector_csv,
    SeededRng, DEFAULT_RANK_TOL,
};
use dripcs::solver::{solve_l1_analysis, SolverConfig};

const EXIT_INVALID: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_SELFTEST: u8 = 4;

#[derive(Parser)]
#[command(name = "dripcs", version, about = "Tight-frame l1-analysis recovery and D-RIP certification")]
struct Cli {
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Frame construction.
    Frame {
        #[command(subcommand)]
        action: FrameCommand,
    },
    /// Draw a Gaussian sensing matrix and optionally measure a signal.
    Measure(MeasureArgs),
    /// Restricted isometry constants.
    Drip {
        #[command(subcommand)]
        action: DripCommand,
    },
    /// Convex decomposition of a vector into k-sparse atoms.
    Decompose(DecomposeArgs),
    /// Solve the l1-analysis program.
    Recover(RecoverArgs),
    /// Run reproducible end-to-end trials.
    Experiment(ExperimentArgs),
    /// Run the built-in consistency checks.
    Selftest {
        /// Corrupt the frame identity check; the run must then fail.
        #[arg(long)]
        inject_fault: bool,
    },
}

#[derive(Subcommand)]
enum FrameCommand {
    /// Write a frame as CSV (to --out) plus a `.json` sidecar.
    Gen {
        #[arg(long, value_enum)]
        kind: FrameKindArg,
        #[arg(long)]
        p: Option<usize>,
        #[arg(long)]
        d: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameKindArg {
    Identity,
    MercedesBenz,
    RandomTight,
}

impl From<FrameKindArg> for FrameKind {
    fn from(k: FrameKindArg) -> Self {
        match k {
            FrameKindArg::Identity => FrameKind::Identity,
            FrameKindArg::MercedesBenz => FrameKind::MercedesBenz,
            FrameKindArg::RandomTight => FrameKind::RandomTight,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum PhiKindArg {
    Gaussian,
    Orthonormal,
}

#[derive(Args)]
struct MeasureArgs {
    /// Existing sensing matrix; otherwise one is drawn with --n and --p.
    #[arg(long)]
    phi: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    p: Option<usize>,
    /// Where to write a freshly drawn sensing matrix.
    #[arg(long)]
    phi_out: Option<PathBuf>,
    /// Signal to measure; the instance JSON goes to --out.
    #[arg(long)]
    beta: Option<PathBuf>,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_fraction: f64,
    /// Also write the measurement vector as CSV.
    #[arg(long)]
    y_out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum DripCommand {
    /// Certify delta_k exactly, or lower-bound it by sampling.
    Certify {
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        frame: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long, value_enum, default_value_t = Method::Exact)]
        method: Method,
        #[arg(long, default_value_t = 10_000)]
        samples: u64,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
        budget: u64,
        #[arg(long, default_value_t = DEFAULT_RANK_TOL)]
        rank_tol: f64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Exact,
    Mc,
}

#[derive(Args)]
struct DecomposeArgs {
    #[arg(long)]
    v: PathBuf,
    #[arg(long)]
    k: usize,
    /// l1 budget C; defaults to max(||v||_1, k ||v||_inf).
    #[arg(long)]
    cap: Option<f64>,
}

#[derive(Args)]
struct RecoverArgs {
    #[arg(long)]
    phi: PathBuf,
    #[arg(long)]
    frame: PathBuf,
    #[arg(long)]
    y: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long, default_value_t = 8)]
    p: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 8)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    #[arg(long, value_enum, default_value_t = FrameKindArg::Identity)]
    frame_kind: FrameKindArg,
    #[arg(long, value_enum, default_value_t = PhiKindArg::Gaussian)]
    phi_kind: PhiKindArg,
    #[arg(long, default_value_t = 1.0)]
    noise_fraction: f64,
    #[arg(long, default_value_t = 20)]
    trials: usize,
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_BUDGET)]
    budget: u64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 50_000)]
    max_iters: usize,
    /// Record per-trial wall-clock time (output is then not reproducible).
    #[arg(long)]
    timing: bool,
    /// Also write the CSV summary to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

fn load_frame(path: &Path) -> Result<Frame> {
    let m = read_matrix_csv(fs::File::open(path)?)?;
    let side = sidecar_path(path);
    let label = if side.exists() {
        let meta: FrameMeta = serde_json::from_str(&fs::read_to_string(&side)?)?;
        if (meta.p, meta.d) != m.shape() {
            return Err(Error::InvalidInput(format!(
                "sidecar {} says {}x{}, matrix is {}x{}",
                side.display(),
                meta.p,
                meta.d,
                m.rows(),
                m.cols()
            )));
        }
        meta.label
    } else {
        "loaded".to_string()
    };
    Frame::new(m, label)
}

fn load_phi(path: &Path) -> Result<MeasurementMatrix> {
    MeasurementMatrix::new(read_matrix_csv(fs::File::open(path)?)?)
}

fn load_vector(path: &Path) -> Result<Vec<f64>> {
    read_vector_csv(fs::File::open(path)?)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn run(cli: Cli) -> Result<u8> {
    let out = cli.out.as_deref();
    let mut rng = SeededRng::new(cli.seed);
    match cli.command {
        Command::Frame {
            action: FrameCommand::Gen { kind, p, d },
        } => {
            let frame = match kind {
                FrameKindArg::Identity => identity_frame(p.or(d).unwrap_or(1))?,
                FrameKindArg::MercedesBenz => mercedes_benz_frame(),
                FrameKindArg::RandomTight => {
                    let p = p.ok_or_else(|| Error::InvalidInput("--p is required".into()))?;
                    random_tight_frame(p, d.unwrap_or(p), &mut rng)?
                }
            };
            let csv = write_matrix_csv(frame.matrix());
            match out {
                Some(path) => {
                    fs::write(path, csv)?;
                    fs::write(sidecar_path(path), serde_json::to_string(&frame.meta())? + "\n")?;
                }
                None => emit(None, &csv)?,
            }
        }
        Command::Measure(args) => {
            let phi = match (&args.phi, args.n, args.p) {
                (Some(path), _, _) => load_phi(path)?,
                (None, Some(n), Some(p)) => gaussian_measurement(n, p, &mut rng)?,
                _ => return Err(Error::InvalidInput("give --phi or both --n and --p".into())),
            };
            if args.phi.is_none() {
                match &args.phi_out {
                    Some(path) => fs::write(path, write_matrix_csv(phi.matrix()))?,
                    None if args.beta.is_none() => emit(out, &write_matrix_csv(phi.matrix()))?,
                    None => {}
                }
            }
            if let Some(beta_path) = &args.beta {
                let beta = load_vector(beta_path)?;
                let inst = measure(&phi, &beta, args.eps, args.noise_fraction, &mut rng)?;
                if let Some(y_out) = &args.y_out {
                    fs::write(y_out, write_vector_csv(&inst.y))?;
                }
                emit(out, &to_json(&inst)?)?;
            }
        }
        Command::Drip {
            action:
                DripCommand::Certify {
                    phi,
                    frame,
                    k,
                    method,
                    samples,
                    budget,
                    rank_tol,
                },
        } => {
            let phi = load_phi(&phi)?;
            let frame = load_frame(&frame)?;
            let cert = match method {
                Method::Exact => delta_exact(&phi, &frame, k, &EnumerationOptions { rank_tol, budget })?,
                Method::Mc => delta_lower_mc(&phi, &frame, k, samples, &mut rng)?,
            };
            emit(out, &to_json(&cert)?)?;
        }
        Command::Decompose(args) => {
            let v = load_vector(&args.v)?;
            let cap = args
                .cap
                .unwrap_or_else(|| norm1(&v).max(args.k as f64 * norm_inf(&v)).max(f64::MIN_POSITIVE));
            let dec = convex_k_sparse_decompose(&v, args.k, cap)?;
            emit(out, &to_json(&dec)?)?;
        }
        Command::Recover(args) => {
            let phi = load_phi(&args.phi)?;
            let frame = load_frame(&args.frame)?;
            let y = load_vector(&args.y)?;
            let cfg = SolverConfig {
                tol: args.tol,
                max_iters: args.max_iters,
                ..SolverConfig::default()
            };
            let result = solve_l1_analysis(&phi, &frame, &y, args.eps, &cfg)?;
            emit(out, &to_json(&result)?)?;
        }
        Command::Experiment(args) => {
            let cfg = ExperimentConfig {
                p: args.p,
                d: args.d,
                n: args.n,
                k: args.k,
                eps: args.eps,
                frame_kind: args.frame_kind.into(),
                phi_kind: match args.phi_kind {
                    PhiKindArg::Gaussian => PhiKind::Gaussian,
                    PhiKindArg::Orthonormal => PhiKind::Orthonormal,
                },
                noise_fraction: args.noise_fraction,
                trials: args.trials,
                seed: cli.seed,
                solver: SolverConfig {
                    tol: args.tol,
                    max_iters: args.max_iters,
                    ..SolverConfig::default()
                },
                enumeration_budget: args.budget,
                record_timing: args.timing,
            };
            let records = run_experiment(&cfg)?;
            if let Some(path) = &args.csv {
                fs::write(path, records_to_csv(&records)?)?;
            }
            let text = match cli.format {
                Format::Json => records_to_jsonl(&records)?,
                Format::Csv => records_to_csv(&records)?,
            };
            emit(out, &text)?;
        }
        Command::Selftest { inject_fault } => {
            let report = run_selftest(&SelftestOptions {
                seed: cli.seed,
                inject_fault,
            })?;
            let text = match cli.format {
                Format::Json => to_json(&report)?,
                Format::Csv => report.render(),
            };
            emit(out, &text)?;
            if !report.all_passed() {
                eprintln!("self-test failed");
                return Ok(EXIT_SELFTEST);
            }
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            let code = match e {
                Error::InvalidInput(_) | Error::OutOfDomain(_) | Error::Indeterminate(_) => EXIT_INVALID,
                Error::BudgetExceeded { .. } | Error::AtomBudget(_) => EXIT_BUDGET,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}
