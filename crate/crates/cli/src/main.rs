//! `cqed-cpf`: command-line front end for the cavity-assisted photonic
//! phase-flip gate simulator.
//!
//! Every subcommand resolves one [`config::RunConfig`] from (lowest to
//! highest precedence) built-in defaults, `--config FILE`, `CQED_CPF_*`
//! environment variables and flags, validates it, then computes.
//!
//! Exit codes: 0 success, 1 compute or I/O failure, 2 usage or validation.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cqed_cpf::{CpfError, KextPolicy, Objective};

use crate::config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Compute(CpfError),
    Io(std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Compute(_) | CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "{msg}"),
            CliError::Compute(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<CpfError> for CliError {
    /// Input problems map to usage errors; everything else is a compute failure.
    fn from(e: CpfError) -> Self {
        match e {
            CpfError::InvalidParams(_)
            | CpfError::InvalidConfig(_)
            | CpfError::InvalidGrid(_)
            | CpfError::InvalidProbability(_)
            | CpfError::LosslessCavity
            | CpfError::NoBoundary { .. }
            | CpfError::GridTooLarge { .. } => CliError::Usage(e.to_string()),
            other => CliError::Compute(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Parser)]
#[command(name = "cqed-cpf", version, about = "Cavity-QED photonic phase-flip gate simulator")]
struct Cli {
    /// JSON run configuration; flags override its keys.
    #[arg(long, global = true, env = "CQED_CPF_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "CQED_CPF_OUT")]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores for sweeps, one otherwise).
    #[arg(long, global = true, env = "CQED_CPF_JOBS", value_parser = clap::value_parser!(u32).range(1..))]
    jobs: Option<u32>,
    #[command(subcommand)]
    command: Command,
}

/// Rates in units of your choice; only ratios to `gamma` matter.
#[derive(Args)]
struct ParamArgs {
    #[arg(long, env = "CQED_CPF_G")]
    g: Option<f64>,
    #[arg(long, env = "CQED_CPF_KAPPA_EXT")]
    kappa_ext: Option<f64>,
    #[arg(long, env = "CQED_CPF_KAPPA_INT")]
    kappa_int: Option<f64>,
    #[arg(long, env = "CQED_CPF_GAMMA")]
    gamma: Option<f64>,
}

#[derive(Args)]
struct PulseArgs {
    /// Gaussian half-width in units of 1/gamma; selects a finite pulse.
    #[arg(long, env = "CQED_CPF_PULSE_WIDTH", conflicts_with = "long_pulse")]
    pulse_width: Option<f64>,
    /// Use the monochromatic (long-pulse) closed forms.
    #[arg(long, env = "CQED_CPF_LONG_PULSE")]
    long_pulse: bool,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long, env = "CQED_CPF_THRESHOLD_A")]
    threshold_a: Option<f64>,
    #[arg(long, env = "CQED_CPF_THRESHOLD_B")]
    threshold_b: Option<f64>,
    #[arg(long, env = "CQED_CPF_THRESHOLD_D")]
    threshold_d: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Reflect a single photon off one cavity and dump the pulses.
    Reflect {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        pulse: PulseArgs,
    },
    /// Average loss and conditional error of the gate.
    Gate {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        pulse: PulseArgs,
        #[command(flatten)]
        fit: FitArgs,
    },
    /// Optimize kappa_ext for given g, kappa_int and pulse length.
    Optimize {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        pulse: PulseArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, env = "CQED_CPF_OBJECTIVE", value_parser = parse_objective)]
        objective: Option<Objective>,
    },
    /// Map P over (g, kappa_int) and extract the threshold contour.
    Sweep {
        #[command(flatten)]
        pulse: PulseArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
    /// Scale a cavity's length and fit P against the length ratio.
    CavityScan {
        #[command(flatten)]
        params: ParamArgs,
        #[command(flatten)]
        pulse: PulseArgs,
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, env = "CQED_CPF_RATIO_MIN_EXP", allow_hyphen_values = true)]
        ratio_min_exp: Option<f64>,
        #[arg(long, env = "CQED_CPF_RATIO_MAX_EXP", allow_hyphen_values = true)]
        ratio_max_exp: Option<f64>,
        #[arg(long, env = "CQED_CPF_PER_DECADE")]
        per_decade: Option<usize>,
    },
    /// Largest conditional error still below threshold at a given loss.
    Threshold {
        #[command(flatten)]
        fit: FitArgs,
        #[arg(long, env = "CQED_CPF_P_LOSS")]
        p_loss: Option<f64>,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, env = "CQED_CPF_G_MIN")]
    g_min: Option<f64>,
    #[arg(long, env = "CQED_CPF_G_MAX")]
    g_max: Option<f64>,
    #[arg(long, env = "CQED_CPF_G_POINTS")]
    g_points: Option<usize>,
    #[arg(long, env = "CQED_CPF_KAPPA_INT_MIN")]
    kappa_int_min: Option<f64>,
    #[arg(long, env = "CQED_CPF_KAPPA_INT_MAX")]
    kappa_int_max: Option<f64>,
    #[arg(long, env = "CQED_CPF_KAPPA_INT_POINTS")]
    kappa_int_points: Option<usize>,
    #[arg(long, env = "CQED_CPF_KEXT_POLICY", value_parser = parse_policy)]
    kext_policy: Option<KextPolicy>,
    #[arg(long, env = "CQED_CPF_CONTOUR_LEVEL")]
    contour_level: Option<f64>,
}

fn parse_objective(s: &str) -> Result<Objective, String> {
    match s {
        "loss" => Ok(Objective::Loss),
        "ftqc-p" | "p" => Ok(Objective::FtqcP),
        _ => Err(format!("expected `loss` or `ftqc-p`, got `{s}`")),
    }
}

fn parse_policy(s: &str) -> Result<KextPolicy, String> {
    match s {
        "loss-formula" => Ok(KextPolicy::LossFormula),
        "minimize-p" => Ok(KextPolicy::MinimizeP),
        _ => Err(format!("expected `loss-formula` or `minimize-p`, got `{s}`")),
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ParamArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.params.g, self.g);
        set(&mut c.params.kappa_ext, self.kappa_ext);
        set(&mut c.params.kappa_int, self.kappa_int);
        set(&mut c.params.gamma, self.gamma);
    }
}

impl PulseArgs {
    fn apply(self, c: &mut RunConfig) {
        if let Some(w) = self.pulse_width {
            c.pulse.width = w;
            c.pulse.long_pulse = false;
        }
        if self.long_pulse {
            c.pulse.long_pulse = true;
        }
    }
}

impl FitArgs {
    fn apply(self, c: &mut RunConfig) {
        set(&mut c.threshold.a, self.threshold_a);
        set(&mut c.threshold.b, self.threshold_b);
        set(&mut c.threshold.d, self.threshold_d);
    }
}

impl GridArgs {
    fn apply(self, c: &mut RunConfig) {
        let s = &mut c.sweep;
        set(&mut s.g_min, self.g_min);
        set(&mut s.g_max, self.g_max);
        set(&mut s.g_points, self.g_points);
        set(&mut s.kappa_int_min, self.kappa_int_min);
        set(&mut s.kappa_int_max, self.kappa_int_max);
        set(&mut s.kappa_int_points, self.kappa_int_points);
        set(&mut s.kext_policy, self.kext_policy);
        set(&mut s.contour_level, self.contour_level);
    }
}

type Runner = fn(&RunConfig) -> Result<(), CliError>;

/// Merges flags into the loaded config and picks the command to run.
fn resolve(cli: Cli) -> Result<(RunConfig, Runner, bool), CliError> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    set(&mut config.out, cli.out);
    if let Some(jobs) = cli.jobs {
        config.jobs = Some(jobs as usize);
    }
    let (runner, parallel_by_default): (Runner, bool) = match cli.command {
        Command::Reflect { params, pulse } => {
            params.apply(&mut config);
            pulse.apply(&mut config);
            (commands::reflect, false)
        }
        Command::Gate { params, pulse, fit } => {
            params.apply(&mut config);
            pulse.apply(&mut config);
            fit.apply(&mut config);
            (commands::gate, false)
        }
        Command::Optimize {
            params,
            pulse,
            fit,
            objective,
        } => {
            params.apply(&mut config);
            pulse.apply(&mut config);
            fit.apply(&mut config);
            set(&mut config.objective, objective);
            (commands::optimize, false)
        }
        Command::Sweep { pulse, fit, grid } => {
            pulse.apply(&mut config);
            fit.apply(&mut config);
            grid.apply(&mut config);
            (commands::sweep, true)
        }
        Command::CavityScan {
            params,
            pulse,
            fit,
            ratio_min_exp,
            ratio_max_exp,
            per_decade,
        } => {
            params.apply(&mut config);
            pulse.apply(&mut config);
            fit.apply(&mut config);
            set(&mut config.scan.ratio_min_exp, ratio_min_exp);
            set(&mut config.scan.ratio_max_exp, ratio_max_exp);
            set(&mut config.scan.per_decade, per_decade);
            (commands::cavity_scan_cmd, false)
        }
        Command::Threshold { fit, p_loss } => {
            fit.apply(&mut config);
            set(&mut config.p_loss, p_loss);
            (commands::threshold, false)
        }
    };
    if config.jobs == Some(0) {
        return Err(CliError::Usage("jobs must be at least 1".into()));
    }
    Ok((config, runner, parallel_by_default))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (config, runner, parallel_by_default) = resolve(cli)?;
    let threads = match config.jobs {
        Some(n) => n,
        None if parallel_by_default => 0,
        None => 1,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    pool.install(|| runner(&config))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
