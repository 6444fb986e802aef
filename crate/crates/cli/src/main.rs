use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};

use monge::experiment::{preset, run_experiment_lenient, ExperimentReport, ExperimentSpec, PRESET_NAMES};
use monge::geometry::worst_case_matrix;
use monge::io::{load_matrix, matrix_to_string, save_matrix};
use monge::linalg::DenseMatrix;
use monge::permutation::main_algorithm_detailed;
use monge::projection::{project_anti_monge, DykstraConfig, DykstraScheme};
use monge::svt::{svt, SvtConfig, SvtVariant, ThresholdMode, DEFAULT_SVT_CONSTANT};
use monge::synthetic::{gaussian_noise, gen_theta1, gen_theta2, random_anti_monge, random_shuffle, SeededRng};

/// Estimation of anti-Monge and pre-anti-Monge matrices from noisy data.
///
/// Matrices are read and written as plain CSV: one row per line,
/// comma-separated, no header.
///
/// Exit status: 0 on success, 1 on invalid input, 2 when a projection did
/// not converge and `--strict` was given.
#[derive(Parser)]
#[command(name = "monge", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a ground-truth matrix, optionally shuffled and noisy.
    Gen(GenArgs),
    /// Project a matrix onto the anti-Monge cone.
    Project(ProjectArgs),
    /// Denoise an observed matrix.
    Denoise(DenoiseArgs),
    /// Run a Monte Carlo experiment and write results.csv and report.json.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum GenFamily {
    Theta1,
    Theta2,
    Worstcase,
    Random,
}

#[derive(clap::Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    family: GenFamily,
    #[arg(long)]
    n: usize,
    /// Variation (for `random`: the largest second difference).
    #[arg(long, default_value_t = 1.0)]
    v: f64,
    /// Noise standard deviation; also sets the staircase size of `theta1`.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Add N(0, sigma^2) noise to every entry.
    #[arg(long)]
    noisy: bool,
    /// Shuffle rows and columns by uniform random permutations.
    #[arg(long)]
    shuffle: bool,
    /// Output file; standard output if omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum SchemeArg {
    Blocks,
    Strips,
}

impl From<SchemeArg> for DykstraScheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Blocks => DykstraScheme::Blocks,
            SchemeArg::Strips => DykstraScheme::Strips,
        }
    }
}

#[derive(clap::Args)]
struct DykstraArgs {
    /// Cap on the corner variation.
    #[arg(long)]
    vmax: Option<f64>,
    #[arg(long, default_value_t = 1e-8)]
    feas_tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    drift_tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_sweeps: usize,
    /// Exit with status 2 if the projection does not converge.
    #[arg(long)]
    strict: bool,
}

impl DykstraArgs {
    fn config(&self, scheme: SchemeArg) -> DykstraConfig {
        DykstraConfig {
            feas_tol: self.feas_tol,
            drift_tol: self.drift_tol,
            max_sweeps: self.max_sweeps,
            v_max: self.vmax,
            scheme: scheme.into(),
        }
    }
}

#[derive(clap::Args)]
struct ProjectArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    dykstra: DykstraArgs,
    #[arg(long, value_enum, default_value = "blocks")]
    scheme: SchemeArg,
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    /// Least squares over the cone (rows and columns in the given order).
    Ls,
    /// Variance sorting of rows and columns, then least squares.
    Vsort,
    SvtHard,
    SvtSoft,
}

#[derive(clap::Args)]
struct DenoiseArgs {
    #[arg(long, value_enum)]
    method: Method,
    /// Noise standard deviation (sets the SVT threshold).
    #[arg(long)]
    sigma: f64,
    /// Constant c in the SVT threshold c * sigma * sqrt(max(n1, n2)).
    #[arg(long, default_value_t = DEFAULT_SVT_CONSTANT)]
    svt_c: f64,
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    output: PathBuf,
    #[command(flatten)]
    dykstra: DykstraArgs,
    #[arg(long, value_enum, default_value = "strips")]
    scheme: SchemeArg,
}

#[derive(clap::Args)]
struct ExperimentArgs {
    /// JSON experiment specification.
    #[arg(long, conflicts_with = "preset", required_unless_present = "preset")]
    spec: Option<PathBuf>,
    /// One of the built-in experiments instead of a spec file.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESET_NAMES))]
    preset: Option<String>,
    #[arg(long)]
    out_dir: PathBuf,
    /// Exit with status 2 if any projection did not converge.
    #[arg(long)]
    strict: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

enum Failure {
    Invalid(anyhow::Error),
    NotConverged(String),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Invalid(e.into())
    }
}

type CliResult = Result<(), Failure>;

fn check_converged(strict: bool, converged: bool, what: &str) -> CliResult {
    if converged {
        return Ok(());
    }
    if strict {
        return Err(Failure::NotConverged(format!("{what} did not converge")));
    }
    eprintln!("warning: {what} did not converge; writing the last iterate");
    Ok(())
}

fn gen(args: &GenArgs) -> CliResult {
    let mut rng = SeededRng::new(args.seed, 0);
    let mut m: DenseMatrix = match args.family {
        GenFamily::Theta1 => gen_theta1(args.n, args.v, args.sigma)?,
        GenFamily::Theta2 => gen_theta2(args.n, args.v)?,
        GenFamily::Worstcase => worst_case_matrix(args.n, args.v)?,
        GenFamily::Random => random_anti_monge(args.n, args.n, args.v, &mut rng)?.matrix,
    };
    if args.shuffle {
        m = random_shuffle(&m, &mut rng).0;
    }
    if args.noisy {
        m = m.add(&gaussian_noise(args.n, args.n, args.sigma, &mut rng)?)?;
    }
    match &args.output {
        Some(path) => save_matrix(&m, path).with_context(|| format!("writing {}", path.display()))?,
        None => io::stdout().write_all(matrix_to_string(&m).as_bytes())?,
    }
    Ok(())
}

fn load(path: &Path) -> anyhow::Result<DenseMatrix> {
    load_matrix(path).with_context(|| format!("reading {}", path.display()))
}

fn save(m: &DenseMatrix, path: &Path) -> anyhow::Result<()> {
    save_matrix(m, path).with_context(|| format!("writing {}", path.display()))
}

fn project(args: &ProjectArgs) -> CliResult {
    let y = load(&args.input)?;
    let res = project_anti_monge(&y, &args.dykstra.config(args.scheme))?;
    save(&res.estimate, &args.output)?;
    eprintln!(
        "sweeps {} gap {:e} drift {:e}",
        res.sweeps_used, res.final_feasibility_gap, res.final_drift
    );
    check_converged(args.dykstra.strict, res.converged, "projection")
}

fn denoise(args: &DenoiseArgs) -> CliResult {
    let y = load(&args.input)?;
    let cfg = args.dykstra.config(args.scheme);
    let svt_cfg = |variant| SvtConfig {
        threshold: ThresholdMode::Scaled {
            c: args.svt_c,
            sigma: args.sigma,
        },
        variant,
    };
    let (estimate, converged) = match args.method {
        Method::Ls => {
            let r = project_anti_monge(&y, &cfg)?;
            (r.estimate, r.converged)
        }
        Method::Vsort => {
            let r = main_algorithm_detailed(&y, args.dykstra.vmax, &cfg)?;
            (r.estimate, r.converged)
        }
        Method::SvtHard => (svt(&y, &svt_cfg(SvtVariant::Hard))?, true),
        Method::SvtSoft => (svt(&y, &svt_cfg(SvtVariant::Soft))?, true),
    };
    save(&estimate, &args.output)?;
    check_converged(args.dykstra.strict, converged, "projection")
}

fn experiment(args: &ExperimentArgs) -> CliResult {
    let spec: ExperimentSpec = match (&args.spec, &args.preset) {
        (Some(path), _) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        (None, Some(name)) => preset(name).ok_or_else(|| anyhow!("unknown preset {name}"))?,
        (None, None) => return Err(anyhow!("either --spec or --preset is required").into()),
    };
    let report = run_experiment_lenient(&spec, args.threads)?;
    fs::create_dir_all(&args.out_dir).with_context(|| format!("creating {}", args.out_dir.display()))?;
    fs::write(args.out_dir.join("results.csv"), report.to_csv())?;
    let failed = report.n_failed;
    let full = ExperimentReport::new(spec, report, args.strict);
    fs::write(args.out_dir.join("report.json"), serde_json::to_string_pretty(&full)? + "\n")?;
    match full.report.global_slope {
        Some(s) => eprintln!("global slope {s:.4}"),
        None => eprintln!("single sweep point, no slope"),
    }
    check_converged(args.strict, failed == 0, &format!("{failed} replicate projection(s)"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => gen(a),
        Command::Project(a) => project(a),
        Command::Denoise(a) => denoise(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::NotConverged(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
