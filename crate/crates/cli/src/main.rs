//! `wptsim` — command-line front end for the wireless-power simulator.
//!
//! Subcommands: `validate` (schema & semantic checks on a scenario),
//! `run` (execute a scenario and write metrics, ledger, and summary
//! artifacts), `link-calc` (evaluate one link's channel efficiency),
//! `sweep` (tabulate channel efficiency against one swept variable), and
//! `ledger-verify` (recompute a ledger's hash chain).
//!
//! Exit codes: 0 success, 1 domain failure (invalid scenario, failed
//! verification), 2 usage or input/output failure (unreadable file,
//! malformed JSON, bad flags).

use clap::{Parser, Subcommand, ValueEnum};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use wptsim_core::linkmodels::{
    end_to_end_efficiency, link_env_efficiency_with_coupling, EfficiencyChain, LinkGeometry,
};
use wptsim_core::market::{verify_ledger, Ledger};
use wptsim_core::scenario::{technology_from_json, Scenario, ScenarioError};

#[derive(Parser)]
#[command(
    name = "wptsim",
    version,
    about = "Deterministic multi-agent wireless power transfer simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a scenario file and report every problem with its JSON path.
    Validate {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Treat warnings as failures.
        #[arg(long)]
        strict: bool,
    },
    /// Run a scenario and write metrics.csv, ledger.jsonl, and summary.json.
    Run {
        /// Scenario JSON file.
        scenario: PathBuf,
        /// Override the scenario's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (created if missing).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Evaluate one link's channel efficiency at a fixed geometry.
    LinkCalc {
        /// Technology parameters as JSON, or @FILE to read them from a file.
        #[arg(long)]
        tech: String,
        /// Transmitter-receiver distance, m.
        #[arg(long, default_value_t = 1.0)]
        distance: f64,
        /// Incidence angle at the receiver, rad.
        #[arg(long, default_value_t = 0.0)]
        incidence: f64,
        /// Irradiance angle at the transmitter, rad.
        #[arg(long, default_value_t = 0.0)]
        irradiance: f64,
        /// Treat the line of sight as blocked.
        #[arg(long)]
        blocked: bool,
        /// Coupling-coefficient override for near-field technologies.
        #[arg(long)]
        coupling: Option<f64>,
        /// Transmitter conversion efficiency for the end-to-end figure.
        #[arg(long, default_value_t = 1.0)]
        eta_tr: f64,
        /// Receiver conversion efficiency for the end-to-end figure.
        #[arg(long, default_value_t = 1.0)]
        eta_rc: f64,
    },
    /// Tabulate channel efficiency against one swept variable (CSV).
    Sweep {
        /// Technology parameters as JSON, or @FILE to read them from a file.
        #[arg(long)]
        tech: String,
        /// Which variable to sweep.
        #[arg(long, value_enum)]
        var: SweepVar,
        /// First value of the swept variable.
        #[arg(long)]
        from: f64,
        /// Last value of the swept variable.
        #[arg(long)]
        to: f64,
        /// Number of points including both endpoints.
        #[arg(long, default_value_t = 50)]
        steps: usize,
        /// Space the points logarithmically instead of linearly.
        #[arg(long)]
        log: bool,
        /// Fixed distance while sweeping another variable, m.
        #[arg(long, default_value_t = 1.0)]
        distance: f64,
        /// Fixed incidence angle, rad.
        #[arg(long, default_value_t = 0.0)]
        incidence: f64,
        /// Fixed irradiance angle, rad.
        #[arg(long, default_value_t = 0.0)]
        irradiance: f64,
    },
    /// Recompute a ledger file's hash chain and report whether it holds.
    LedgerVerify {
        /// Ledger JSONL file (as written by `run`).
        ledger: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SweepVar {
    /// Transmitter-receiver distance, m.
    Distance,
    /// Near-field coupling coefficient.
    Coupling,
    /// Incidence angle at the receiver, rad.
    Incidence,
}

impl SweepVar {
    fn as_str(self) -> &'static str {
        match self {
            SweepVar::Distance => "distance",
            SweepVar::Coupling => "coupling",
            SweepVar::Incidence => "incidence",
        }
    }
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn domain(message: impl Into<String>) -> Self {
        Failure {
            code: 1,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Validate { scenario, strict } => validate(&scenario, strict),
        Command::Run {
            scenario,
            seed,
            out,
        } => run(&scenario, seed, &out),
        Command::LinkCalc {
            tech,
            distance,
            incidence,
            irradiance,
            blocked,
            coupling,
            eta_tr,
            eta_rc,
        } => link_calc(
            &tech, distance, incidence, irradiance, blocked, coupling, eta_tr, eta_rc,
        ),
        Command::Sweep {
            tech,
            var,
            from,
            to,
            steps,
            log,
            distance,
            incidence,
            irradiance,
        } => sweep(&tech, var, from, to, steps, log, distance, incidence, irradiance),
        Command::LedgerVerify { ledger } => ledger_verify(&ledger),
    }
}

fn read_file(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::io(format!("cannot read {}: {e}", path.display())))
}

fn load_scenario(path: &Path) -> Result<(Scenario, String), Failure> {
    let text = read_file(path)?;
    match Scenario::parse(&text) {
        Ok((scenario, report)) => Ok((scenario, report.to_string())),
        Err(ScenarioError::Parse(message)) => {
            Err(Failure::io(format!("{}: {message}", path.display())))
        }
        Err(ScenarioError::Invalid(report)) => Err(Failure::domain(format!(
            "{} failed validation:\n{}",
            path.display(),
            report.to_string().trim_end()
        ))),
        Err(other) => Err(Failure::domain(other.to_string())),
    }
}

fn validate(path: &Path, strict: bool) -> Result<(), Failure> {
    let (scenario, warnings) = load_scenario(path)?;
    if !warnings.is_empty() {
        eprint!("{warnings}");
        if strict {
            return Err(Failure::domain(
                "warnings present and --strict was given".to_string(),
            ));
        }
    }
    println!(
        "scenario OK: {} ({} agents, {} orders, {} ticks at {} s)",
        scenario.name,
        scenario.agent_count(),
        scenario.order_count(),
        scenario.config().ticks,
        scenario.config().dt_s
    );
    Ok(())
}

fn run(path: &Path, seed: Option<u64>, out: &Path) -> Result<(), Failure> {
    let (scenario, warnings) = load_scenario(path)?;
    eprint!("{warnings}");
    let mut sim = scenario
        .build(seed)
        .map_err(|e| Failure::domain(e.to_string()))?;
    let artifacts = sim.run().map_err(|e| Failure::domain(e.to_string()))?;
    std::fs::create_dir_all(out)
        .map_err(|e| Failure::io(format!("cannot create {}: {e}", out.display())))?;
    let write = |name: &str, contents: &str| {
        let target = out.join(name);
        std::fs::write(&target, contents)
            .map_err(|e| Failure::io(format!("cannot write {}: {e}", target.display())))
    };
    write("metrics.csv", &artifacts.metrics_csv)?;
    write("ledger.jsonl", &artifacts.ledger_jsonl)?;
    write("summary.json", &artifacts.summary_json)?;
    println!(
        "run complete: {} ticks, {} agents, seed {}",
        sim.tick(),
        sim.agents().len(),
        sim.config().seed
    );
    println!(
        "delivered {} Wh, losses {} Wh, availability {}",
        format_sig(sim.total_delivered_wh(), 12),
        format_sig(sim.total_losses_wh(), 12),
        format_sig(sim.availability(), 6)
    );
    println!(
        "wrote {}, {}, {}",
        out.join("metrics.csv").display(),
        out.join("ledger.jsonl").display(),
        out.join("summary.json").display()
    );
    Ok(())
}

fn parse_tech(tech: &str) -> Result<wptsim_core::LinkTechnologyParams, Failure> {
    let text = if let Some(file) = tech.strip_prefix('@') {
        read_file(Path::new(file))?
    } else {
        tech.to_string()
    };
    technology_from_json(&text)
        .map_err(|e| Failure::io(format!("technology parameters invalid: {e}")))
}

#[allow(clippy::too_many_arguments)]
fn link_calc(
    tech: &str,
    distance: f64,
    incidence: f64,
    irradiance: f64,
    blocked: bool,
    coupling: Option<f64>,
    eta_tr: f64,
    eta_rc: f64,
) -> Result<(), Failure> {
    let params = parse_tech(tech)?;
    let geometry = LinkGeometry::new(distance, incidence, irradiance, !blocked)
        .map_err(|e| Failure::domain(e.to_string()))?;
    let env = link_env_efficiency_with_coupling(&params, &geometry, coupling);
    let chain = EfficiencyChain::new(eta_tr, env.value, eta_rc)
        .map_err(|e| Failure::domain(e.to_string()))?;
    println!("technology = {}", params.kind().as_str());
    println!("eta_env = {}", format_sig(env.value, 12));
    if env.clamped {
        println!("note: raw channel gain exceeded 1 and was clamped");
    }
    println!(
        "eta_end_to_end = {}",
        format_sig(end_to_end_efficiency(&chain), 12)
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn sweep(
    tech: &str,
    var: SweepVar,
    from: f64,
    to: f64,
    steps: usize,
    log: bool,
    distance: f64,
    incidence: f64,
    irradiance: f64,
) -> Result<(), Failure> {
    let params = parse_tech(tech)?;
    if steps < 2 {
        return Err(Failure::io("--steps must be at least 2".to_string()));
    }
    if !(from.is_finite() && to.is_finite()) {
        return Err(Failure::io("--from and --to must be finite".to_string()));
    }
    if log && (from <= 0.0 || to <= 0.0) {
        return Err(Failure::io(
            "--log spacing requires positive --from and --to".to_string(),
        ));
    }
    println!("{},eta_env", var.as_str());
    for i in 0..steps {
        let t = i as f64 / (steps - 1) as f64;
        let value = if log {
            from * (to / from).powf(t)
        } else {
            from + t * (to - from)
        };
        let (d, inc, k) = match var {
            SweepVar::Distance => (value, incidence, None),
            SweepVar::Coupling => (distance, incidence, Some(value)),
            SweepVar::Incidence => (distance, value, None),
        };
        let geometry = LinkGeometry::new(d, inc, irradiance, true)
            .map_err(|e| Failure::domain(format!("at {}={value}: {e}", var.as_str())))?;
        let env = link_env_efficiency_with_coupling(&params, &geometry, k);
        println!("{},{}", format_sig(value, 12), format_sig(env.value, 12));
    }
    Ok(())
}

fn ledger_verify(path: &Path) -> Result<(), Failure> {
    let text = read_file(path)?;
    let records = Ledger::parse_jsonl(&text)
        .map_err(|e| Failure::domain(format!("ledger rejected: {e}")))?;
    if verify_ledger(&records) {
        println!("ledger OK: {} records, chain intact", records.len());
        Ok(())
    } else {
        Err(Failure::domain(format!(
            "ledger INVALID: hash chain broken ({} records)",
            records.len()
        )))
    }
}

/// Formats `x` with `digits` significant digits in plain decimal notation.
fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exponent = x.abs().log10().floor() as i64;
    let decimals = (digits as i64 - 1 - exponent).clamp(0, 18) as usize;
    format!("{x:.decimals$}")
}
