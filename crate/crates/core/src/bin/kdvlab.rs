use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use kdvlab::lab::{run, ExperimentConfig, ExperimentKind, LabError, RunOptions};

#[derive(Parser)]
#[command(name = "kdvlab", version, about = "Averaging experiments for perturbed KdV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
    /// Overwrite a directory holding a run of another config.
    #[arg(long)]
    force: bool,
}

#[derive(Subcommand)]
enum Command {
    Simulate(Common),
    Spectrum(Common),
    Average(Common),
    #[command(name = "theorem-i")]
    TheoremI(Common),
    #[command(name = "theorem-ii")]
    TheoremIi(Common),
    QuasiInvariance(Common),
    GalerkinConvergence(Common),
    /// Check a configuration and print it with every default resolved.
    Validate(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig, LabError> {
    let mut cfg = ExperimentConfig::load(&c.config)?;
    if let Some(seed) = c.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn execute(command: Command) -> Result<(), LabError> {
    let (kind, common) = match command {
        Command::Validate(c) => {
            let cfg = load(&c)?;
            cfg.validate()?;
            println!("# {} is valid; config_digest = {}", c.config.display(), cfg.digest());
            print!("{}", cfg.to_toml());
            return Ok(());
        }
        Command::Simulate(c) => (ExperimentKind::Simulate, c),
        Command::Spectrum(c) => (ExperimentKind::Spectrum, c),
        Command::Average(c) => (ExperimentKind::Average, c),
        Command::TheoremI(c) => (ExperimentKind::TheoremI, c),
        Command::TheoremIi(c) => (ExperimentKind::TheoremIi, c),
        Command::QuasiInvariance(c) => (ExperimentKind::QuasiInvariance, c),
        Command::GalerkinConvergence(c) => (ExperimentKind::GalerkinConvergence, c),
    };
    let cfg = load(&common)?;
    if cfg.experiment != kind {
        return Err(LabError::Config(format!(
            "{} configures experiment `{}`, not `{}`",
            common.config.display(),
            cfg.experiment.name(),
            kind.name()
        )));
    }
    let opts = RunOptions {
        out: common.out,
        force: common.force,
        jobs: common.jobs,
    };
    let manifest = run(&cfg, &opts)?;
    println!("{} complete: {} artifacts, config_digest = {}", kind.name(), manifest.artifacts.len(), manifest.config_digest);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("KDVLAB_LOG", "warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("kdvlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
