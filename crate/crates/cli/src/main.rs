use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use reslab::config::{from_settings, parse_config, Command};
use reslab::{run, RunConfig};

#[derive(Parser)]
#[command(name = "reslab", version, about = "Low-energy resolvent laboratory")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Problem file
    #[arg(long)]
    problem: Option<PathBuf>,
    /// Output directory
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Seed for randomized direction grids
    #[arg(long)]
    seed: Option<u64>,
    /// Tolerance override NAME=VALUE, VALUE in (0, 1)
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Parameter KEY=VALUE (same keys as in a run file)
    #[arg(long = "set", short = 's', value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a configuration file
    Run { config: PathBuf },
    /// Bessel values, expansions and comp integrals
    Specfun(Common),
    /// Exact-cone bf0 kernel and mode table
    ConeKernel(Common),
    /// Resolvent kernel and channel solutions of a problem
    Solve(Common),
    /// Zero modes and resonances of a problem
    ZeroModes(Common),
    /// Zero-energy expansion fits of a problem
    Expand(Common),
    /// Riesz transform L^p threshold sweep
    RieszSweep(Common),
    /// Verification suites
    Verify {
        #[command(flatten)]
        common: Common,
        /// Suite name (repeatable)
        #[arg(long)]
        suite: Vec<String>,
        /// Run every suite in dependency order
        #[arg(long)]
        all: bool,
    },
}

fn settings(c: &Common) -> Result<Vec<(String, String)>, String> {
    let mut out = Vec::new();
    if let Some(p) = &c.problem {
        out.push(("problem".into(), p.display().to_string()));
    }
    if let Some(o) = &c.out {
        out.push(("output".into(), o.display().to_string()));
    }
    if let Some(s) = c.seed {
        out.push(("seed".into(), s.to_string()));
    }
    for (prefix, list) in [("tol.", &c.tol), ("", &c.set)] {
        for kv in list {
            let (k, v) = kv.split_once('=').ok_or_else(|| format!("expected KEY=VALUE, found `{kv}`"))?;
            out.push((format!("{prefix}{}", k.trim()), v.trim().to_string()));
        }
    }
    Ok(out)
}

fn config(cli: Cli) -> Result<RunConfig, String> {
    let (command, common, extra) = match cli.cmd {
        Cmd::Run { config } => {
            let text = std::fs::read_to_string(&config).map_err(|e| format!("{}: {e}", config.display()))?;
            return parse_config(&text).map_err(|e| format!("{}: {e}", config.display()));
        }
        Cmd::Specfun(c) => (Command::Specfun, c, vec![]),
        Cmd::ConeKernel(c) => (Command::ConeKernel, c, vec![]),
        Cmd::Solve(c) => (Command::Solve, c, vec![]),
        Cmd::ZeroModes(c) => (Command::ZeroModes, c, vec![]),
        Cmd::Expand(c) => (Command::Expand, c, vec![]),
        Cmd::RieszSweep(c) => (Command::RieszSweep, c, vec![]),
        Cmd::Verify { common, suite, all } => {
            let mut extra: Vec<(String, String)> = suite.into_iter().map(|s| ("suite".to_string(), s)).collect();
            if all {
                extra.push(("suite".into(), "all".into()));
            }
            (Command::Verify, common, extra)
        }
    };
    let mut s = settings(&common)?;
    s.extend(extra);
    from_settings(command, &s).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cfg = match config(Cli::parse()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(out) => {
            // a closed pipe (e.g. `| head`) must not turn a finished run into a panic
            let mut so = std::io::stdout().lock();
            for r in &out.reports {
                let _ = writeln!(so, "{} {} ({} checks)", if r.pass { "PASS" } else { "FAIL" }, r.check_id, r.checks.len());
                for c in r.failures() {
                    let _ = writeln!(so, "    failed: {} (error {:.3e}, tolerance {:.1e}) {}", c.name, c.error, c.tolerance, c.note);
                }
            }
            for f in &out.files {
                let _ = writeln!(so, "wrote {}", f.display());
            }
            if out.pass() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
