//! Command-line front end.
//!
//! Exit status: 0 when every check passes, 1 when a check fails, 2 on
//! configuration or input errors, 3 when a solve stops before converging.

pub mod commands;
pub mod config;
pub mod output;
pub mod scenarios;

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use crate::error::{Error, Result};
use commands::Outcome;
use config::{Settings, CONFIG_DIR_VAR};
use output::Sink;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "fracenv", version, about = "Fractional s-convex envelopes and related checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve for the s-convex (or s-concave) envelope on a lattice.
    Envelope(Common),
    /// Evaluate Lambda, its concave counterpart and the Monge-Ampere residual.
    OperatorEval(Common),
    /// Test s-convexity along random segments.
    CheckConvexity(Common),
    /// Solve the fractional Dirichlet problem on one segment.
    #[command(name = "dirichlet-1d")]
    Dirichlet1d(Common),
    /// Run a named scenario.
    Scenario {
        name: String,
        #[command(flatten)]
        common: Common,
    },
    /// Print the scenario library.
    ListScenarios,
}

#[derive(Debug, Args, Default)]
struct Common {
    /// Config file (key = value) or a run manifest.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override any key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Domain spec, e.g. `ball:1.0` or `dumbbell`.
    #[arg(long)]
    domain: Option<String>,
    /// Exterior datum, e.g. `constant:0.7` or `expr:x*x - y`.
    #[arg(long)]
    g: Option<String>,
    /// Function to test or evaluate; `envelope` solves for it.
    #[arg(long)]
    u: Option<String>,
    /// Fractional order in (0, 1).
    #[arg(long)]
    s: Option<String>,
    /// Lattice spacing.
    #[arg(long)]
    dx: Option<String>,
    /// Directions on the half circle.
    #[arg(long)]
    directions: Option<String>,
    /// Seed for segment sampling and random points.
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads, 0 for all cores.
    #[arg(long)]
    threads: Option<String>,
    /// Output directory; files go to `<out>/<command or scenario>`.
    #[arg(long)]
    out: Option<String>,
}

impl Common {
    fn resolve(&self, defaults: &[(&str, &str)]) -> Result<Settings> {
        let mut s = Settings::default();
        for (k, v) in defaults {
            s.set(k, v)?;
        }
        match &self.config {
            Some(path) => s.apply_file(path)?,
            None => {
                if let Some(dir) = std::env::var_os(CONFIG_DIR_VAR) {
                    let default = Path::new(&dir).join("default.conf");
                    if default.exists() {
                        s.apply_file(&default)?;
                    }
                }
            }
        }
        let flags = [
            ("domain", &self.domain),
            ("g", &self.g),
            ("u", &self.u),
            ("s", &self.s),
            ("solver.dx", &self.dx),
            ("solver.directions", &self.directions),
            ("check.seed", &self.seed),
            ("operator.seed", &self.seed),
            ("threads", &self.threads),
            ("output.dir", &self.out),
        ];
        for (k, v) in flags {
            if let Some(v) = v {
                s.set(k, v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv.split_once('=').ok_or_else(|| Error::Config(format!("--set {kv}: expected KEY=VALUE")))?;
            s.set(k.trim(), v.trim())?;
        }
        Ok(s)
    }
}

/// Parses arguments, runs the command and returns the exit status.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (name, scenario, common) = match &cli.command {
        Command::ListScenarios => {
            for s in scenarios::SCENARIOS {
                println!("{:<20} {}", s.name, s.description);
            }
            return EXIT_OK;
        }
        Command::Envelope(c) => ("envelope", None, c),
        Command::OperatorEval(c) => ("operator-eval", None, c),
        Command::CheckConvexity(c) => ("check-convexity", None, c),
        Command::Dirichlet1d(c) => ("dirichlet-1d", None, c),
        Command::Scenario { name, common } => match scenarios::find(name) {
            Some(s) => (s.name, Some(s), common),
            None => {
                eprintln!("error: unknown scenario `{name}`; see `fracenv list-scenarios`");
                return EXIT_CONFIG;
            }
        },
    };
    let settings = match common.resolve(scenario.map_or(&[][..], |s| s.defaults)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let command = if scenario.is_some() { "scenario" } else { name };
    match execute(command, name, scenario, &settings) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_CONFIG
        }
    }
}

fn execute(command: &str, name: &str, scenario: Option<&scenarios::Scenario>, settings: &Settings) -> Result<i32> {
    let dir = Path::new(settings.get("output.dir")).join(name);
    let mut sink = Sink::new(&dir, name, settings)?;
    let threads = settings.usize("threads")?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let outcome: Outcome = pool.install(|| match (command, scenario) {
        (_, Some(s)) => s.run(settings, &mut sink),
        ("envelope", _) => commands::envelope(settings, &mut sink),
        ("operator-eval", _) => commands::operator_eval(settings, &mut sink),
        ("check-convexity", _) => commands::check_convexity(settings, &mut sink),
        ("dirichlet-1d", _) => commands::dirichlet_1d(settings, &mut sink),
        _ => Err(Error::Config(format!("unknown command `{command}`"))),
    })?;
    let all_passed = outcome.all_passed();
    sink.json(
        "checks.json",
        &json!({
            "command": command,
            "name": name,
            "all_passed": all_passed,
            "converged": outcome.converged,
            "checks": outcome.checks,
            "summary": outcome.summary,
        }),
    )?;
    let mut outputs: Vec<String> = sink.files().to_vec();
    outputs.push("manifest.json".into());
    let manifest = json!({
        "fracenv_version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "name": name,
        "seeds": {
            "check.seed": settings.get("check.seed"),
            "operator.seed": settings.get("operator.seed"),
        },
        "config": settings.map(),
        "outputs": outputs,
    });
    sink.json("manifest.json", &manifest)?;
    for c in &outcome.checks {
        println!(
            "{} {:<28} value {:<24} threshold {:<12} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            format!("{:e}", c.value),
            format!("{:e}", c.threshold),
            c.detail
        );
    }
    println!("wrote {}", sink.dir().display());
    Ok(if outcome.converged == Some(false) {
        EXIT_NOT_CONVERGED
    } else if !all_passed {
        EXIT_CHECK_FAILED
    } else {
        EXIT_OK
    })
}
