use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use stotiht_harness::commands::{self, ProbeOptions};
use stotiht_harness::error::{HarnessError, Result};
use stotiht_harness::gnuplot;
use stotiht_harness::spec::{self, ExperimentSpec, Kind};

#[derive(Parser)]
#[command(name = "stotiht", version, about = "Low-Tucker-rank tensor recovery experiments (TIHT and StoTIHT)")]
#[command(after_help = "Exit codes: 0 success, 2 invalid arguments, 3 file or I/O error.")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mean cost and relative-error curves per batch size.
    #[command(
        name = "synth-run",
        long_about = "Mean cost and relative-error curves per batch size over seeded random Tucker targets.\n\n\
CSV: algorithm,batch,epoch,cost,rel_error,seconds\n\
Epoch 0 is the starting point X0 = 0. The b = m row is TIHT. Runs use the full epoch budget. \
seconds is empty unless --wall-clock is given.\n\n\
Defaults: --shape 5,5,6 --rank 1,2,2 --m 360 --batch m,0.5m,0.25m --mu 0.46m --epochs 200 --trials 20"
    )]
    SynthRun(Common),
    /// Success fraction over an m x rank grid.
    #[command(
        name = "phase-grid",
        long_about = "Fraction of trials reaching relative error below --tol within --epochs, over m x rank.\n\n\
CSV: m,rank,algorithm,batch,trials,successes,success_fraction\n\
Ranks are labelled like 1x2x2; give several with repeated --rank flags or separated by ';'.\n\n\
Defaults: --m 100,200,300,400 --rank '1,1,1;1,2,2;2,2,2' --batch 0.5m --mu m --epochs 200 --trials 20"
    )]
    PhaseGrid(Common),
    /// Mean epochs to success over an m x rank grid.
    #[command(
        name = "epochs-grid",
        long_about = "Mean first epoch with relative error below --tol; trials that never get there count as epochs + 1.\n\n\
CSV: m,rank,algorithm,batch,trials,successes,mean_epochs_to_success\n\n\
Defaults: --m 200,300,400 --rank '1,1,1;1,2,2;2,2,2' --batch m,0.25m --mu 0.4m --epochs 200 --trials 20"
    )]
    EpochsGrid(Common),
    /// Wall time per epoch and per iteration.
    #[command(
        long_about = "Wall time per epoch and per iteration of each batch size, single-threaded, minimum and median over all timed epochs.\n\n\
CSV: algorithm,batch,iterations_per_epoch,min_seconds_per_epoch,median_seconds_per_epoch,seconds_per_iteration,bound_seconds_per_iteration,within_bound\n\
bound_seconds_per_iteration is the TIHT time per iteration x (b/m) x 1.5. Timing output is not reproducible byte for byte.\n\n\
Defaults: --m 360 --batch m,0.5m,0.25m --mu 0.46m --epochs 20 --trials 20"
    )]
    Timing(Common),
    /// Recover a tensor read from a TNSR or CSV file.
    #[command(
        long_about = "Measures the tensor in --input with a seeded Gaussian operator and recovers it at the assumed --rank.\n\n\
CSV: algorithm,batch,epoch,cost,rel_error,seconds (relative to the input tensor)\n\
The recovered tensor goes to --recovered, or next to --out as <stem>.recovered.tnsr.\n\n\
Defaults: --batch 0.25m --mu 0.46m --epochs 50"
    )]
    Real(RealArgs),
    /// Empirical TRIP lower bounds, sample bound and convergence constants.
    #[command(
        name = "trip-probe",
        long_about = "Probes the restricted isometry of sqrt(mN)*A at rank r and 3r and evaluates kappa, sigma and the sample bound.\n\n\
CSV: quantity,value\n\n\
Defaults: --shape 5,5,6 --rank 1,2,2 --m 360 --batch 0.25m --samples 200"
    )]
    TripProbe(ProbeArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Tensor shape n1,n2,...
    #[arg(long)]
    shape: Option<String>,
    /// Tucker rank r1,r2,... (repeat or separate with ';' for grids)
    #[arg(long)]
    rank: Vec<String>,
    /// Measurement count(s), comma separated
    #[arg(long)]
    m: Option<String>,
    /// Batch size(s): absolute or a multiple of m such as 0.25m
    #[arg(long)]
    batch: Option<String>,
    /// Stepsize: absolute or a multiple of m such as 0.46m
    #[arg(long)]
    mu: Option<String>,
    /// Epoch budget per run
    #[arg(long)]
    epochs: Option<usize>,
    /// Trials per cell
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Success threshold on the relative error
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,
    /// Relative measurement noise level
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Output CSV path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (all cores when absent)
    #[arg(long)]
    threads: Option<usize>,
    /// Also write a gnuplot script next to --out
    #[arg(long)]
    gnuplot: bool,
    /// Fill the seconds column of traces
    #[arg(long)]
    wall_clock: bool,
}

#[derive(Args)]
struct RealArgs {
    #[command(flatten)]
    common: Common,
    /// Input tensor, TNSR or CSV
    #[arg(long)]
    input: PathBuf,
    /// Where to write the recovered tensor (.csv for CSV, TNSR otherwise)
    #[arg(long)]
    recovered: Option<PathBuf>,
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    common: Common,
    /// TRIP constant at rank 3r (empirical lower bound when absent)
    #[arg(long)]
    delta: Option<f64>,
    /// Thresholding quality factor (sqrt(2d-3) when absent)
    #[arg(long)]
    eta: Option<f64>,
    /// Stepsize of the convergence bound (1/alpha when absent)
    #[arg(long)]
    theory_mu: Option<f64>,
    /// Constant of the sample-complexity bound
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Random tensors per TRIP estimate and batch draws for sigma
    #[arg(long, default_value_t = 200)]
    samples: usize,
}

fn build_spec(kind: Kind, c: &Common) -> Result<ExperimentSpec> {
    let mut s = ExperimentSpec::defaults(kind);
    if let Some(v) = &c.shape {
        s.shape = spec::parse_shape(v)?;
    }
    if !c.rank.is_empty() {
        s.ranks = c
            .rank
            .iter()
            .map(|r| spec::parse_ranks(r))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect();
    }
    if let Some(v) = &c.m {
        s.ms = spec::parse_ms(v)?;
    }
    if let Some(v) = &c.batch {
        s.batches = spec::parse_scaled_list(v)?;
    }
    if let Some(v) = &c.mu {
        s.mu = v.parse()?;
    }
    if let Some(v) = c.epochs {
        s.max_epochs = v;
    }
    if let Some(v) = c.trials {
        s.trials = v;
    }
    s.seed = c.seed;
    s.tol = c.tol;
    s.noise = c.noise;
    s.wall_clock = c.wall_clock;
    if kind != Kind::RealTensor {
        s.validate()?;
    }
    if c.gnuplot && c.out.is_none() {
        return Err(HarnessError::Invalid("--gnuplot needs --out".into()));
    }
    Ok(s)
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| HarnessError::file(path, e))
}

fn emit(spec: &ExperimentSpec, common: &Common, csv: &str) -> Result<()> {
    match &common.out {
        Some(path) => {
            write_file(path, csv)?;
            if common.gnuplot {
                match gnuplot::script(spec, path)? {
                    Some(script) => write_file(&path.with_extension("gp"), &script)?,
                    None => eprintln!("note: {} has no figure; no gnuplot script written", spec.kind.as_str()),
                }
            }
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(HarnessError::Invalid("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| HarnessError::Invalid(format!("cannot start worker pool: {e}")))?;
    pool.install(f)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::SynthRun(c) => simple(Kind::SyntheticRun, &c),
        Command::PhaseGrid(c) => simple(Kind::PhaseGrid, &c),
        Command::EpochsGrid(c) => simple(Kind::EpochsGrid, &c),
        Command::Timing(c) => simple(Kind::Timing, &c),
        Command::Real(args) => {
            let c = &args.common;
            let spec = build_spec(Kind::RealTensor, c)?;
            let recovered = args
                .recovered
                .clone()
                .or_else(|| c.out.as_ref().map(|o| o.with_extension("recovered.tnsr")));
            let (csv, _) = with_pool(c.threads, || {
                commands::cmd_real_tensor(&spec, &args.input, recovered.as_deref())
            })?;
            emit(&spec, c, &csv)
        }
        Command::TripProbe(args) => {
            let c = &args.common;
            let spec = build_spec(Kind::TripProbe, c)?;
            let opts = ProbeOptions {
                delta: args.delta,
                eta: args.eta,
                theory_mu: args.theory_mu,
                c: args.c,
                samples: args.samples,
            };
            let csv = with_pool(c.threads, || commands::cmd_trip_probe(&spec, &opts))?;
            emit(&spec, c, &csv)
        }
    }
}

fn simple(kind: Kind, c: &Common) -> Result<()> {
    let spec = build_spec(kind, c)?;
    let csv = with_pool(c.threads, || commands::run_spec(&spec))?;
    emit(&spec, c, &csv)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
