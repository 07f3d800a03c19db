//! The `convmon` command line and the monitor benchmark harness.

pub mod bench;
mod script;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use convmon::fsm::{compile, to_dot};
use convmon::projection::{project, project_all};
use convmon::scribble::{parse, parse_global, parse_local, serialize, serialize_local, Protocol};

use bench::{bench_report, bench_run, BenchScenario, Case, ScenarioId};

pub use script::{Action, Script};

/// Exit status for validation failures, violations and runtime errors.
pub const EXIT_FAILURE: i32 = 1;
/// Exit status for malformed command lines.
pub const EXIT_USAGE: i32 = 2;

#[derive(Parser)]
#[command(
    name = "convmon",
    version,
    about = "Scribble protocols, projection and runtime monitoring"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse and validate a global or local protocol.
    Parse {
        file: PathBuf,
        /// Print the canonical form.
        #[arg(long)]
        canonical: bool,
    },
    /// Project a global protocol onto one role, or onto all of them.
    Project {
        file: PathBuf,
        #[arg(long)]
        role: Option<String>,
        /// Write `<Protocol>_<Role>.scr` files here instead of printing.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a local protocol into its nested state machine.
    Fsm {
        file: PathBuf,
        /// Emit Graphviz text.
        #[arg(long)]
        dot: bool,
    },
    /// Drive one monitored session from a script.
    Run {
        global: PathBuf,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        script: PathBuf,
        /// How long a `recv` waits.
        #[arg(long, default_value_t = 2000)]
        timeout_ms: u64,
    },
    /// Time sessions under each mediation case.
    Bench {
        #[arg(long)]
        scenario: ScenarioId,
        /// Comma-separated, strictly increasing. Defaults to the standard sweep.
        #[arg(long, value_delimiter = ',')]
        params: Vec<u64>,
        #[arg(
            long,
            value_delimiter = ',',
            default_value = "Monitor,Forwarder,NoMonitor"
        )]
        cases: Vec<Case>,
        #[arg(long, default_value_t = bench::DEFAULT_REPETITIONS)]
        reps: usize,
        /// Write CSV here and print the summary table instead.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

/// Runs the CLI, returning the process exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    let mut out = std::io::stdout().lock();
    match dispatch(cli.command, &mut out) {
        Ok(code) => code,
        Err(e) => {
            let _ = out.flush();
            eprintln!("error: {e:#}");
            EXIT_FAILURE
        }
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn dispatch(cmd: Command, out: &mut impl Write) -> Result<i32> {
    match cmd {
        Command::Parse { file, canonical } => {
            let p = parse(&read(&file)?).with_context(|| file.display().to_string())?;
            if canonical {
                write!(out, "{}", serialize(&p))?;
            } else {
                match &p {
                    Protocol::Global(g) => writeln!(
                        out,
                        "ok: global protocol {} ({})",
                        g.name,
                        g.roles.join(", ")
                    )?,
                    Protocol::Local(l) => {
                        writeln!(out, "ok: local protocol {} at {}", l.name, l.self_role)?
                    }
                }
            }
        }
        Command::Project {
            file,
            role,
            out: dir,
        } => {
            let g = parse_global(&read(&file)?).with_context(|| file.display().to_string())?;
            let reports = match role {
                Some(r) => vec![project(&g, &r)?],
                None => project_all(&g)?.into_values().collect(),
            };
            for rep in reports {
                for w in &rep.warnings {
                    eprintln!("warning: {} at {}: {}", w.kind, rep.role, w.location);
                }
                let text = serialize_local(&rep.result);
                match &dir {
                    Some(d) => {
                        std::fs::create_dir_all(d)?;
                        let path = d.join(format!("{}_{}.scr", g.name, rep.role));
                        std::fs::write(&path, text)
                            .with_context(|| format!("writing {}", path.display()))?;
                        writeln!(out, "{}", path.display())?;
                    }
                    None => write!(out, "{text}")?,
                }
            }
        }
        Command::Fsm { file, dot } => {
            let lp = parse_local(&read(&file)?).with_context(|| file.display().to_string())?;
            let fsm = compile(&lp)?;
            if dot {
                write!(out, "{}", to_dot(&fsm))?;
            } else {
                writeln!(
                    out,
                    "{} at {}: {} states",
                    fsm.protocol_name,
                    fsm.self_role,
                    fsm.state_count()
                )?;
                for (i, t) in fsm.threads.iter().enumerate() {
                    writeln!(
                        out,
                        "  thread {i}: {} states, {} transitions, {} forks, initial {}",
                        t.states.len(),
                        t.transitions.len(),
                        t.forks.len(),
                        t.initial
                    )?;
                }
            }
        }
        Command::Run {
            global,
            config,
            script,
            timeout_ms,
        } => {
            let g = parse_global(&read(&global)?).with_context(|| global.display().to_string())?;
            let cfg = convmon::transport::InvitationConfig::from_file(&config)?;
            let s = Script::parse(&read(&script)?).with_context(|| script.display().to_string())?;
            let base = config.parent().unwrap_or(Path::new("."));
            let ok = script::run(&g, &cfg, base, &s, Duration::from_millis(timeout_ms), out)?;
            return Ok(if ok { 0 } else { EXIT_FAILURE });
        }
        Command::Bench {
            scenario,
            params,
            cases,
            reps,
            csv,
        } => {
            let id = scenario;
            let params = if params.is_empty() {
                id.default_params()
            } else {
                params
            };
            if cases.is_empty() {
                bail!("no cases selected");
            }
            let records = bench_run(&BenchScenario::new(id, params).repetitions(reps), &cases)?;
            let report = bench_report(&records);
            match csv {
                Some(path) => {
                    std::fs::write(&path, &report.csv)
                        .with_context(|| format!("writing {}", path.display()))?;
                    write!(out, "{}", report.summary)?;
                }
                None => write!(out, "{}", report.csv)?,
            }
        }
    }
    Ok(0)
}
