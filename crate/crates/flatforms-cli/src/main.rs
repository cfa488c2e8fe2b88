//! `flatforms`: compute and verify secondary invariants of flat bundles from a
//! declarative instance file, emitting a JSON report.
//!
//! Exit status: 0 when every residual passes, 1 when some residual fails, 2 on
//! usage, parse, schema or precondition errors.

mod commands;
mod error;
mod instance;
mod report;
mod spec;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use error::CliError;
use report::{CommandEcho, Findings, Report, Timing};
use spec::InstanceSpec;

#[derive(Parser, Debug)]
#[command(name = "flatforms", version, about = "Secondary invariants of flat vector bundles on discrete models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Instance description (TOML).
    #[arg(long, global = true)]
    spec: Option<PathBuf>,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Multiplies every residual tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
    /// Worker threads for the numerical kernels.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the seed of the spec.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Debug, Clone)]
enum Command {
    /// Odd characteristic forms of a flat bundle and their periods.
    CharForms,
    /// Reidemeister torsion of a based complex or a local system.
    Torsion,
    /// Torsion form of a flat complex.
    TorsionForm,
    /// p-forms of a duality bundle or complex.
    PForm,
    /// Eta-form of a duality complex.
    EtaForm,
    /// Elliptic/hyperbolic normal form of a symplectic matrix.
    NormalForm,
    /// Run a named verification suite.
    Verify { suite: String },
    /// Pushforward of a local system to a point, checked against the Euler class.
    PushforwardPoint,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::CharForms => "char-forms",
            Command::Torsion => "torsion",
            Command::TorsionForm => "torsion-form",
            Command::PForm => "p-form",
            Command::EtaForm => "eta-form",
            Command::NormalForm => "normal-form",
            Command::Verify { .. } => "verify",
            Command::PushforwardPoint => "pushforward-point",
        }
    }
}

fn read_spec(cli: &Cli) -> Result<InstanceSpec, CliError> {
    match &cli.spec {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| CliError::Read { path: path.display().to_string(), source })?;
            InstanceSpec::parse(&text, cli.seed)
        }
        // suites run on their own random instances without a spec
        None if matches!(cli.command, Command::Verify { .. }) => {
            Ok(InstanceSpec { seed: Some(cli.seed.unwrap_or(0)), ..InstanceSpec::default() })
        }
        None => Err(CliError::Usage(format!("{} needs --spec PATH", cli.command.name()))),
    }
}

fn run(cli: &Cli) -> Result<Report, CliError> {
    if !(cli.tolerance_scale > 0.0 && cli.tolerance_scale.is_finite()) {
        return Err(CliError::Usage("--tolerance-scale must be positive".into()));
    }
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    let start = Instant::now();
    let spec = read_spec(cli)?;
    let mut f = Findings::new(cli.tolerance_scale);
    let mut suite = None;
    match &cli.command {
        Command::CharForms => commands::char_forms(&spec, &mut f)?,
        Command::Torsion => commands::torsion(&spec, &mut f)?,
        Command::TorsionForm => commands::torsion_form(&spec, &mut f)?,
        Command::PForm => commands::p_form(&spec, &mut f)?,
        Command::EtaForm => commands::eta_form(&spec, &mut f)?,
        Command::NormalForm => commands::normal_form(&spec, &mut f)?,
        Command::PushforwardPoint => commands::pushforward_point(&spec, &mut f)?,
        Command::Verify { suite: name } => {
            verify::run(name, &spec, &mut f)?;
            suite = Some(name.clone());
        }
    }
    commands::expectations(&spec, &mut f)?;
    Ok(Report {
        command: CommandEcho { name: cli.command.name().into(), suite, tolerance_scale: cli.tolerance_scale },
        instance_digest: report::digest(&spec),
        invariants: f.invariants,
        residuals: f.residuals,
        timing: Timing { wall_seconds: start.elapsed().as_secs_f64() },
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("flatforms: {e}");
            return ExitCode::from(2);
        }
    };
    let text = report.to_json();
    match &cli.out {
        Some(path) => {
            if let Err(e) = report::write_atomically(path, &text) {
                eprintln!("flatforms: {e}");
                return ExitCode::from(2);
            }
        }
        None => print!("{text}"),
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
