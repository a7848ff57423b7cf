use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use platoon_core::config::{Overrides, ScenarioConfig};
use platoon_core::experiments;
use platoon_core::Error;

/// Robustness analysis for k-nearest-neighbor vehicle platoons.
#[derive(Parser, Debug)]
#[command(name = "platoon", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Spectrum, H-infinity norms, delay margins and certificates as JSON.
    Report(Common),
    /// Demote each reference in turn and recompute both norms.
    SweepRemove(Common),
    /// Promote each follower in turn and recompute both norms.
    SweepAdd(Common),
    /// Simulate both dynamics over a list of delays.
    DelayGrid(Common),
    /// Frequency-swept H-infinity norms.
    HinfSweep(Common),
    /// Single-reference growth rates and MD bounds over a list of n.
    Scaling(Common),
    /// One time-domain run with optional disturbance.
    Simulate(Common),
    /// Cross-check every closed form; exits 4 on any violation.
    Verify(Common),
}

#[derive(Args, Debug, Clone, Default)]
struct Common {
    /// TOML scenario file; flags override its keys.
    #[arg(long, short)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    /// Minimally dense reference placement.
    #[arg(long, conflicts_with_all = ["refs", "single"])]
    md: bool,
    /// Explicit 1-based reference positions, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "single")]
    refs: Option<Vec<usize>>,
    /// A single reference at this position.
    #[arg(long)]
    single: Option<usize>,
    /// Delays for `delay-grid`, comma separated.
    #[arg(long, value_delimiter = ',')]
    taus: Option<Vec<f64>>,
    /// Platoon sizes for `scaling`, comma separated.
    #[arg(long, value_delimiter = ',')]
    ns: Option<Vec<usize>>,
    /// Delay for `simulate`.
    #[arg(long)]
    tau: Option<f64>,
    /// `velocity` or `formation` for `simulate`.
    #[arg(long)]
    dynamics: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    step: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print the effective merged config and exit.
    #[arg(long)]
    emit_config: bool,
}

impl Command {
    fn parts(&self) -> (&'static str, Option<&'static str>, &Common) {
        match self {
            Command::Report(c) => ("report", None, c),
            Command::SweepRemove(c) => ("add-remove", Some("remove"), c),
            Command::SweepAdd(c) => ("add-remove", Some("add"), c),
            Command::DelayGrid(c) => ("delay-grid", None, c),
            Command::HinfSweep(c) => ("hinf-sweep", None, c),
            Command::Scaling(c) => ("scaling", None, c),
            Command::Simulate(c) => ("simulate", None, c),
            Command::Verify(c) => ("verify", None, c),
        }
    }
}

fn overrides(experiment: &str, sweep_mode: Option<&str>, c: &Common) -> Overrides {
    let mut o = Overrides::new();
    o.set_str("experiment", experiment);
    if let Some(m) = sweep_mode {
        o.set_str("sweep.mode", m);
    }
    if let Some(n) = c.n {
        o.set_usize("n", n);
    }
    if let Some(k) = c.k {
        o.set_usize("k", k);
    }
    if c.md {
        o.set_str("arrangement", "md");
    }
    if let Some(r) = &c.refs {
        o.set_str("arrangement", "explicit").set_usize_list("refs", r);
    }
    if let Some(p) = c.single {
        o.set_str("arrangement", "single").set_usize("position", p);
    }
    if let Some(t) = &c.taus {
        o.set_f64_list("delay.taus", t);
    }
    if let Some(ns) = &c.ns {
        o.set_usize_list("scaling.ns", ns);
    }
    if let Some(t) = c.tau {
        o.set_f64("simulate.tau", t);
    }
    if let Some(d) = &c.dynamics {
        o.set_str("simulate.dynamics", d);
    }
    if let Some(g) = c.gamma {
        o.set_f64("gamma", g);
    }
    if let Some(s) = c.seed {
        o.set_u64("delay.seed", s);
    }
    if let Some(h) = c.horizon {
        o.set_f64("delay.horizon", h);
    }
    if let Some(s) = c.step {
        o.set_f64("delay.step", s);
    }
    if let Some(d) = &c.out {
        o.set_str("output.dir", &d.to_string_lossy());
    }
    o
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    let (experiment, mode, common) = cli.command.parts();
    let cfg = ScenarioConfig::load(common.config.as_deref(), &overrides(experiment, mode, common))?;
    if common.emit_config {
        print!("{}", cfg.to_toml_string()?);
        return Ok(ExitCode::SUCCESS);
    }
    let out = experiments::run(&cfg)?;
    let written = out.write_to(&cfg.output.dir)?;
    print!("{}", out.summary);
    for p in written {
        eprintln!("wrote {}", p.display());
    }
    if matches!(cli.command, Command::Verify(_)) && !out.violations.is_empty() {
        for v in &out.violations {
            eprintln!("violation: {v}");
        }
        return Ok(ExitCode::from(4));
    }
    if !out.violations.is_empty() {
        for v in &out.violations {
            eprintln!("warning: {v}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
