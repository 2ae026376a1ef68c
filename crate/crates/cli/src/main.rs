mod config;
mod experiments;
mod output;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, ValueEnum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// A⁰ over positions and detunings.
    A0Map,
    /// Positive-x maximum of A⁰ per detuning (Gaussian mode).
    MaxLocus,
    /// |F| along the run, one column per detuning.
    FidelityMap,
    /// A_t, A⁰ and A⁰ with the curvature term along one run.
    Atrace,
    /// Substitution and inverse-constructed two-level models.
    EffectiveModel,
    /// Final wave functions of one run.
    Snapshot,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::A0Map => "a0-map",
            Experiment::MaxLocus => "max-locus",
            Experiment::FidelityMap => "fidelity-map",
            Experiment::Atrace => "atrace",
            Experiment::EffectiveModel => "effective-model",
            Experiment::Snapshot => "snapshot",
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "adiabatica", version, about = "Adiabaticity experiments for a two-level atom in a spatial mode")]
struct Cli {
    #[arg(value_enum)]
    experiment: Experiment,
    /// JSON scenario file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, env = "ADIABATICA_OUT", default_value = ".")]
    out: PathBuf,
    /// Worker threads for sweeps (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Replace a config value, e.g. `model.detuning=0.1`. Repeatable.
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let config = config::load(&cli.config, &cli.overrides, cli.experiment)?;
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        anyhow::ensure!(n > 0, "--threads must be at least 1");
        pool = pool.num_threads(n);
    }
    let pool = pool.build().context("starting worker threads")?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let written = pool.install(|| experiments::run(cli.experiment, &config, &cli.out))?;
    for path in written {
        println!("{}", path.display());
    }
    Ok(())
}
