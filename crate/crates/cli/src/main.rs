use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use covert_relay::ao::{self, AoConfig, Mode};
use covert_relay::experiment::{self, Suite, SweepParam, SweepSpec};
use covert_relay::scenario::load_scenario_file;
use covert_relay::Scenario;

/// Experiment harness for the covert UAV relay planner.
#[derive(Parser)]
#[command(name = "covert-relay", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ScenarioArg {
    /// Scenario file (TOML). Defaults to the built-in reference scenario.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize one scenario and write the solution and iteration trace.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value = "prop")]
        mode: Mode,
        /// Solution CSV; the trace goes next to it as `<stem>.trace.csv`.
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve over a list of values of one parameter.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long)]
        param: SweepParam,
        /// Comma-separated, strictly monotone.
        #[arg(long)]
        values: String,
        #[arg(long, value_delimiter = ',', default_value = "prop")]
        mode: Vec<Mode>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check closed forms against reference computations.
    Verify {
        /// Suite name, or `all`.
        suite: String,
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare the closed-form phase split with a grid search at the start point.
    OracleAlpha {
        #[command(flatten)]
        scenario: ScenarioArg,
        #[arg(long, default_value_t = 1e-4)]
        step: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Scenario utilities.
    Scenario {
        #[command(subcommand)]
        action: ScenarioAction,
    },
}

#[derive(Subcommand)]
enum ScenarioAction {
    /// Print the reference scenario as TOML.
    PrintDefault,
}

/// Failure carrying its exit status.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure { code: 1, error: e.into() }
    }
}

fn load(arg: &ScenarioArg) -> Result<Scenario, Failure> {
    let Some(path) = &arg.scenario else {
        return Ok(Scenario::reference());
    };
    if !path.is_file() {
        return Err(Failure {
            code: 2,
            error: anyhow::anyhow!("scenario not found: {}", path.display()),
        });
    }
    load_scenario_file(path)
        .with_context(|| format!("loading {}", path.display()))
        .map_err(|error| Failure { code: 2, error })
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn sink(out: &Option<PathBuf>) -> anyhow::Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn trace_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "solution".into());
    out.with_file_name(format!("{stem}.trace.csv"))
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Solve { scenario, mode, out } => {
            let scn = load(&scenario)?;
            let cfg = AoConfig::new(&scn, mode);
            let (sol, trace) = ao::ao_solve(&scn, &cfg)?;
            experiment::write_solution_csv(&scn, &sol, create(&out)?)?;
            trace.write_csv(create(&trace_path(&out))?)?;
            println!("{}", experiment::summary_line(mode, &sol, &trace.stop));
            if let ao::StopReason::SubproblemFailed(m) = &trace.stop {
                return Err(anyhow::anyhow!("stopped early: {m}").into());
            }
        }
        Command::Sweep { scenario, param, values, mode, seed, out } => {
            let scn = load(&scenario)?;
            let spec = SweepSpec { param, values: experiment::parse_values(&values)?, modes: mode, seed };
            let rows = experiment::run_sweep(&scn, &spec)?;
            experiment::write_sweep_csv(&rows, sink(&out)?)?;
            let failed = rows.iter().filter(|r| !r.is_ok()).count();
            if failed > 0 {
                eprintln!("{failed} of {} sweep points did not finish; see the status column", rows.len());
            }
        }
        Command::Verify { suite, scenario, seed, out } => {
            let scn = load(&scenario)?;
            let suites: Vec<Suite> =
                if suite == "all" { Suite::ALL.to_vec() } else { vec![suite.parse()?] };
            let mut rows = Vec::new();
            for s in suites {
                rows.extend(experiment::run_verify(s, &scn, seed)?);
            }
            experiment::write_checks_csv(&rows, sink(&out)?)?;
            if let Some(bad) = rows.iter().find(|r| !r.pass) {
                return Err(anyhow::anyhow!(
                    "{} check failed: {} (residual {:e} > tolerance {:e})",
                    bad.suite,
                    bad.check,
                    bad.residual,
                    bad.tolerance
                )
                .into());
            }
        }
        Command::OracleAlpha { scenario, step, out } => {
            let scn = load(&scenario)?;
            let r = experiment::oracle_alpha(&scn, step)?;
            experiment::write_oracle_csv(&r, sink(&out)?)?;
        }
        Command::Scenario { action: ScenarioAction::PrintDefault } => {
            print!("{}", Scenario::reference().to_toml_string());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
