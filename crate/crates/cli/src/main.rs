mod commands;
mod config;
mod output;

use clap::{Args, Parser, Subcommand};
use config::{RunConfig, ScanConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "fesh3b", version, about = "Three-body observables near a Feshbach resonance")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print derived model couplings for a resonance.
    Calibrate(Common),
    /// Two-body bound states across a field range.
    DimerScan(Common),
    /// Trimer branches and their threshold fields.
    TrimerScan(Common),
    /// Three-body recombination rate across a field range.
    RecombScan(Common),
    /// Convergence ladder for a named observable.
    Converge(Common),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct Common {
    /// TOML or JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog label; overrides the configuration.
    #[arg(long)]
    resonance: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    grid_n: Option<usize>,
    #[arg(long)]
    b_over_rvdw: Option<f64>,
    /// Field range in gauss; all three must be given together.
    #[arg(long, requires_all = ["to", "nb"])]
    from: Option<f64>,
    #[arg(long, requires_all = ["from", "nb"])]
    to: Option<f64>,
    #[arg(long, requires_all = ["from", "to"])]
    nb: Option<usize>,
}

impl Common {
    fn resolve(&self) -> fesh3b::Result<RunConfig> {
        let mut cfg = match (&self.config, &self.resonance) {
            (Some(p), _) => RunConfig::load(p)?,
            (None, Some(l)) => RunConfig::from_label(l),
            (None, None) => return Err(fesh3b::Error::Config("either --config or --resonance is required".into())),
        };
        if let (Some(_), Some(l)) = (&self.config, &self.resonance) {
            cfg.resonance = config::ResonanceRef::Label(l.clone());
        }
        if let Some(o) = &self.out {
            cfg.out = Some(o.clone());
        }
        if let Some(t) = self.threads {
            cfg.threads = Some(t);
        }
        if let Some(n) = self.grid_n {
            cfg.grid.n = n;
        }
        if let Some(f) = self.b_over_rvdw {
            cfg.b_over_rvdw = Some(f);
        }
        if let (Some(b_from), Some(b_to), Some(nb)) = (self.from, self.to, self.nb) {
            cfg.scan = Some(ScanConfig { b_from, b_to, nb });
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> fesh3b::Result<()> {
    let (common, f): (&Common, fn(&RunConfig) -> fesh3b::Result<()>) = match &cli.command {
        Command::Calibrate(c) => (c, commands::calibrate),
        Command::DimerScan(c) => (c, commands::dimer_scan),
        Command::TrimerScan(c) => (c, commands::trimer_scan),
        Command::RecombScan(c) => (c, commands::recomb_scan),
        Command::Converge(c) => (c, commands::converge),
    };
    let cfg = common.resolve()?;
    if let Some(t) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| fesh3b::Error::Config(e.to_string()))?;
    }
    f(&cfg)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
