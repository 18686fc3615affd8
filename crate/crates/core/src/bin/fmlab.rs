use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use fmlab::dynamics::{LinearSystem, PlantState, DEFAULT_STEP};
use fmlab::harness::{
    binary_task_set_check, necessity_counterexample, nsctp_scan, run_simulation, write_outputs, write_reachset_csv,
    NsctpProblem, Scenario,
};
use fmlab::minjerk::{initial_jerk, AxisState, MinJerkPlan, MinJerkTask};
use fmlab::{Error, Result};

#[derive(Parser)]
#[command(name = "fmlab", version, about = "Delayed-feedback control laboratory")]
struct Cli {
    /// Integrator / sampling step (s); overrides the scenario's `h`.
    #[arg(long, global = true)]
    h: Option<f64>,
    /// Simulated duration (s); overrides the scenario's `duration`.
    #[arg(long, global = true)]
    duration: Option<f64>,
    /// Default directory for outputs when `--out` is not given.
    #[arg(long, global = true, env = "FMLAB_OUT_DIR")]
    out_dir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file; writes trajectory.csv and summary.json.
    Simulate {
        scenario: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two states that need opposite optimal controls for the same task.
    Counterexample {
        #[arg(long, allow_negative_numbers = true)]
        s1: f64,
        #[arg(long, allow_negative_numbers = true)]
        s2: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decide whether a pair of states is separable by correct task performing.
    Nsctp {
        #[arg(long, value_enum)]
        problem: Problem,
        /// State `a`: a position, or position,velocity,acceleration.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 1..)]
        a: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 1..)]
        b: Vec<f64>,
        /// Fixed horizon for the minimum-jerk problem.
        #[arg(long = "T")]
        horizon: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export a reachable set as CSV (interval for n = 1, boundary for n = 2).
    Reachset {
        /// `scalar-linear`, `double-integrator`, or a JSON file with `m` and `n`.
        #[arg(long)]
        sys: String,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 1..)]
        x0: Vec<f64>,
        #[arg(long)]
        t: f64,
        /// Boundary points for planar sets.
        #[arg(long, default_value_t = 360)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Plan a planar minimum-jerk move and export it as CSV.
    Minjerk {
        /// `x,y` at rest, or `x,y,xd,yd,xdd,ydd`.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 1..)]
        init: Vec<f64>,
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, num_args = 1..)]
        target: Vec<f64>,
        #[arg(long = "T")]
        horizon: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Problem {
    Scalar,
    Minjerk,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let out_dir = cli.out_dir.clone();
    let step = cli.h.unwrap_or(DEFAULT_STEP);
    match cli.command {
        Command::Simulate { scenario, out } => {
            let mut sc = Scenario::from_json(&fs::read_to_string(&scenario)?)?;
            if let Some(h) = cli.h {
                sc.h = h;
            }
            if let Some(d) = cli.duration {
                sc.duration = d;
            }
            let dir = out.or_else(|| sc.output.clone()).unwrap_or_else(|| {
                let stem = scenario.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
                out_dir.unwrap_or_else(|| PathBuf::from("fmlab-out")).join(stem)
            });
            let result = run_simulation(&sc)?;
            write_outputs(&dir, &sc, &result)?;
            print_stdout(serde_json::to_string_pretty(&result.summary(&sc))? + "\n")?;
            eprintln!("wrote {}", dir.display());
            Ok(())
        }
        Command::Counterexample { s1, s2, out } => {
            let report = necessity_counterexample(s1, s2)?;
            let binary = binary_task_set_check(s1, s2)?;
            let value = serde_json::json!({
                "counterexample": report,
                "binary_task_set": binary
                    .iter()
                    .map(|(x, u1, u2)| serde_json::json!({"x_star": x, "u1": u1, "u2": u2}))
                    .collect::<Vec<_>>(),
            });
            emit(out, out_dir, "counterexample.json", serde_json::to_string_pretty(&value)?)
        }
        Command::Nsctp {
            problem,
            a,
            b,
            horizon,
            out,
        } => {
            let problem = match (problem, horizon) {
                (Problem::Scalar, None) => NsctpProblem::ScalarTimeOptimal,
                (Problem::Scalar, Some(_)) => return Err(Error::Usage("--T applies to the minjerk problem".into())),
                (Problem::Minjerk, None) => NsctpProblem::MinJerk,
                (Problem::Minjerk, Some(t)) => NsctpProblem::MinJerkFixed(t),
            };
            let verdict = nsctp_scan(problem, &a, &b)?;
            emit(out, out_dir, "nsctp.json", serde_json::to_string_pretty(&verdict)?)
        }
        Command::Reachset {
            sys,
            x0,
            t,
            points,
            out,
        } => {
            let sys = parse_system(&sys)?;
            let mut buf = Vec::new();
            write_reachset_csv(&mut buf, &sys, &PlantState::from_slice(&x0)?, t, step, points)?;
            emit(out, out_dir, "reachset.csv", String::from_utf8_lossy(&buf).into_owned())
        }
        Command::Minjerk {
            init,
            target,
            horizon,
            out,
        } => {
            let init = planar_state(&init)?;
            let [tx, ty] = target[..] else {
                return Err(Error::Usage("--target takes x,y".into()));
            };
            let task = MinJerkTask::new([tx, ty], horizon)?;
            let plan = MinJerkPlan::new(&init, &task)?;
            let mut buf = Vec::new();
            plan.write_csv(&mut buf, step)?;
            eprintln!(
                "initial jerk: ({}, {}), jerk cost: {}",
                initial_jerk(init[0], tx, horizon)?,
                initial_jerk(init[1], ty, horizon)?,
                fmlab::harness::plan_cost(&plan)
            );
            emit(out, out_dir, "minjerk.csv", String::from_utf8_lossy(&buf).into_owned())
        }
    }
}

/// Writes to `--out`, else into the default output directory, else to stdout.
fn emit(out: Option<PathBuf>, out_dir: Option<PathBuf>, default_name: &str, mut text: String) -> Result<()> {
    if !text.ends_with('\n') {
        text.push('\n');
    }
    let path = out.or_else(|| out_dir.map(|d| d.join(default_name)));
    match path {
        Some(path) => {
            if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
                fs::create_dir_all(parent)?;
            }
            fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print_stdout(text)?,
    }
    Ok(())
}

/// A reader closing the pipe early is not an error.
fn print_stdout(text: String) -> Result<()> {
    match std::io::stdout().write_all(text.as_bytes()) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => Ok(other?),
    }
}

#[derive(Deserialize)]
struct SystemFile {
    m: Vec<Vec<f64>>,
    n: Vec<Vec<f64>>,
}

fn parse_system(spec: &str) -> Result<LinearSystem> {
    match spec {
        "scalar-linear" => Ok(LinearSystem::scalar_decay()),
        "double-integrator" => Ok(LinearSystem::double_integrator()),
        path => {
            let file: SystemFile = serde_json::from_str(&fs::read_to_string(Path::new(path))?)?;
            LinearSystem::from_rows(&file.m, &file.n)
        }
    }
}

fn planar_state(values: &[f64]) -> Result<[AxisState; 2]> {
    match *values {
        [x, y] => Ok([AxisState::rest(x), AxisState::rest(y)]),
        [x, y, xd, yd, xdd, ydd] => Ok([AxisState::new(x, xd, xdd), AxisState::new(y, yd, ydd)]),
        _ => Err(Error::Usage("--init takes x,y or x,y,xd,yd,xdd,ydd".into())),
    }
}
