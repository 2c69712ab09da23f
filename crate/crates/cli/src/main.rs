mod artifacts;
mod build;
mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{RunConfig, Suite};

const PASS: u8 = 0;
const TOLERANCE: u8 = 1;
const USAGE: u8 = 2;
const GUARD: u8 = 3;

#[derive(Parser)]
#[command(name = "wavepacket", version, about = "Wave packet decompositions on periodic grids")]
struct Cli {
    /// Cap the worker threads (default: one per core).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// TOML run config.
    config: PathBuf,
    /// Override a config key, e.g. `--set grid.n=256`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides `output` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze the input field and write the phase-space field.
    Decompose(RunArgs),
    /// Analyze and resynthesize the input field.
    Reconstruct(RunArgs),
    /// Evaluate every `[[norms]]` entry on the input field.
    Norm(RunArgs),
    /// Build the critical-cube partition of the potential.
    Partition(RunArgs),
    /// Tabulate the critical radius on the grid.
    CriticalRadius(RunArgs),
    /// Run one verification suite.
    Verify {
        #[command(flatten)]
        run: RunArgs,
        /// Suite to run; overrides `verify.suite`.
        #[arg(long, value_parser = parse_suite)]
        suite: Option<Suite>,
    },
    /// Run the critical-cube sweep across grid sizes and exponents.
    TheoremSweep(RunArgs),
    /// Summarize the reports in a directory.
    Report {
        dir: PathBuf,
    },
}

fn parse_suite(text: &str) -> Result<Suite, String> {
    Suite::parse(text).ok_or_else(|| {
        let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        format!("unknown suite '{text}', expected one of {}", names.join(", "))
    })
}

fn fail(code: u8, message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(code)
}

fn execute(args: RunArgs, extra: Vec<String>, run: impl FnOnce(&RunConfig) -> wavepacket::Result<commands::Run>) -> ExitCode {
    let mut overrides = args.overrides;
    overrides.extend(extra);
    let config = match config::load(&args.config, &overrides) {
        Ok(c) => c,
        Err(e) => return fail(USAGE, e),
    };
    let start = Instant::now();
    let result = match run(&config) {
        Ok(r) => r,
        Err(e) if e.is_resource_guard() => return fail(GUARD, e),
        Err(e) => return fail(USAGE, e),
    };
    let dir = args.out.or_else(|| config.output.clone()).unwrap_or_else(|| PathBuf::from("wavepacket-out"));
    let written = match artifacts::write(&dir, &config, &result) {
        Ok(w) => w,
        Err(e) => return fail(USAGE, format!("cannot write artifacts to {}: {e}", dir.display())),
    };
    for c in &result.report.checks {
        let bound = match c.upper {
            Some(hi) => format!("[{:e}, {hi:e}]", c.bound),
            None => format!("{:e}", c.bound),
        };
        println!("{} {} = {:e} {} {bound}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.value, c.relation);
    }
    for p in &written {
        println!("wrote {}", p.display());
    }
    eprintln!("{} finished in {:.2}s", result.stem, start.elapsed().as_secs_f64());
    ExitCode::from(if result.report.passed() { PASS } else { TOLERANCE })
}

fn summarize(dir: PathBuf) -> ExitCode {
    let found = match artifacts::collect(&dir) {
        Ok(f) => f,
        Err(e) => return fail(USAGE, format!("cannot read {}: {e}", dir.display())),
    };
    if found.is_empty() {
        return fail(USAGE, format!("no reports in {}", dir.display()));
    }
    let mut csv = String::from("# wavepacket-table v1 summary\nfile,command,seed,config_hash,passed,failed_checks\n");
    for (path, e) in &found {
        let name = path.file_name().unwrap_or_default().to_string_lossy();
        let failed: Vec<&str> = e.report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        println!("{} {name}{}", if e.passed { "PASS" } else { "FAIL" }, if failed.is_empty() { String::new() } else { format!(" ({})", failed.join(" ")) });
        csv.push_str(&format!("{name},{},{},{},{},{}\n", e.command, e.seed, e.config_hash, e.passed, failed.join(";")));
    }
    if let Err(e) = std::fs::write(dir.join("summary.csv"), csv) {
        return fail(USAGE, format!("cannot write summary: {e}"));
    }
    let passed = found.iter().filter(|(_, e)| e.passed).count();
    println!("{passed} of {} reports passed", found.len());
    ExitCode::from(if passed == found.len() { PASS } else { TOLERANCE })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            return fail(USAGE, "--threads must be positive");
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail(USAGE, e);
        }
    }
    match cli.command {
        Command::Decompose(a) => execute(a, vec![], commands::decompose),
        Command::Reconstruct(a) => execute(a, vec![], commands::reconstruct),
        Command::Norm(a) => execute(a, vec![], commands::norm),
        Command::Partition(a) => execute(a, vec![], commands::partition),
        Command::CriticalRadius(a) => execute(a, vec![], commands::critical_radius_map),
        Command::Verify { run, suite } => {
            let extra = suite.map(|s| vec![format!("verify.suite=\"{s}\"")]).unwrap_or_default();
            execute(run, extra, |c| commands::verify(c, c.verify.suite))
        }
        Command::TheoremSweep(a) => execute(a, vec!["verify.suite=\"theorem_sweep\"".into()], |c| commands::verify(c, Suite::TheoremSweep)),
        Command::Report { dir } => summarize(dir),
    }
}
