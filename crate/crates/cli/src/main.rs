//! `resonator-dos` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::info;
use resonator_dos::experiments::{self, ExperimentConfig, Outputs};
use resonator_dos::{Error, Result};

const THREADS_ENV: &str = "RESONATOR_DOS_THREADS";

#[derive(Debug, Parser)]
#[command(name = "resonator-dos", version, about = "Spectra of block-disordered subwavelength resonator chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment config (JSON). Defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory, overriding `output_dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (falls back to RESONATOR_DOS_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Number of blocks M.
    #[arg(long = "M", global = true)]
    m: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sample a block sequence.
    Sample,
    /// Eigenvalues of the symmetrised capacitance matrix.
    Spectrum,
    /// Classify frequencies into shared pass band, bandgap and hybridisation.
    Bands {
        #[arg(long)]
        lambda_max: Option<f64>,
    },
    /// Density of states in the hybridisation window with defect-mode overlays.
    Dos,
    /// Meta-atom estimate of the upper spectrum.
    MetaAtom(MetaAtomArgs),
    /// Thouless ratios of a random realisation.
    Thouless,
    /// Ergodic convergence of the empirical spectral distribution.
    Converge,
    /// Structure factor of several samplers.
    Hyperuniform,
    /// Meta-atom accuracy across samplers and meta-atom lengths.
    AccuracySweep,
}

#[derive(Debug, Args)]
struct MetaAtomArgs {
    #[arg(long = "L")]
    l: Option<usize>,
    #[arg(long = "P")]
    p: Option<usize>,
    #[arg(long = "R")]
    r: Option<usize>,
    #[arg(long)]
    window_lo: Option<f64>,
    #[arg(long)]
    window_hi: Option<f64>,
    /// Also compute the direct spectrum and report the Wasserstein error.
    #[arg(long)]
    compare_direct: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_config_error() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut config = match &cli.common.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.common.seed {
        config.seed = seed;
    }
    if let Some(m) = cli.common.m {
        config.size = m;
        config.accuracy_sweep.size = m;
    }
    if let Some(out) = &cli.common.out {
        config.output_dir = out.clone();
    }
    match &cli.command {
        Command::Bands { lambda_max: Some(l) } => config.bands.lambda_max = *l,
        Command::MetaAtom(a) => {
            if let Some(l) = a.l {
                config.meta_atom.l = l;
            }
            if let Some(p) = a.p {
                config.meta_atom.p = p;
            }
            if let Some(r) = a.r {
                config.meta_atom.r = r;
            }
            match (a.window_lo, a.window_hi) {
                (None, None) => {}
                (lo, hi) => {
                    let current = config.window()?;
                    config.meta_atom.window = Some([lo.unwrap_or(current.lo), hi.unwrap_or(current.hi)]);
                }
            }
        }
        _ => {}
    }
    config.validate()?;
    Ok(config)
}

fn finish(outputs: &Outputs, config: &ExperimentConfig) -> Result<()> {
    let dir: &Path = &config.output_dir;
    outputs.write(dir, config)?;
    info!(
        "{} finished in {:.3} s, wrote {} file(s) to {}",
        outputs.experiment,
        outputs.seconds,
        outputs.files.len() + 1,
        dir.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = threads(cli.common.threads)? {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot configure thread pool: {e}")))?;
    }
    let config = load_config(&cli)?;
    let outputs = match &cli.command {
        Command::Sample => experiments::run_sample(&config)?.1,
        Command::Spectrum => experiments::run_spectrum(&config)?.1,
        Command::Bands { .. } => experiments::run_bands(&config)?.1,
        Command::Dos => experiments::run_dos(&config)?.1,
        Command::MetaAtom(a) => {
            let (run, outputs) = experiments::run_meta_atom(&config, a.compare_direct)?;
            println!("estimated eigenvalues: {}", run.estimate.values.len());
            if let (Some(direct), Some(w)) = (&run.direct, run.wasserstein) {
                println!("direct eigenvalues: {}", direct.len());
                println!("wasserstein error: {w:.6e}");
            }
            outputs
        }
        Command::Thouless => experiments::run_thouless(&config)?.1,
        Command::Converge => {
            let (curve, outputs) = experiments::run_convergence(&config)?;
            for p in &curve.points {
                println!("M={} mean={:.6e} se={:.3e}", p.m, p.mean, p.std_error);
            }
            outputs
        }
        Command::Hyperuniform => experiments::run_hyperuniform(&config)?.1,
        Command::AccuracySweep => {
            let (points, outputs) = experiments::run_accuracy_sweep(&config)?;
            for p in &points {
                println!("{} L={} P={} W={:.6e}", p.sampler, p.l, p.p, p.wasserstein);
            }
            outputs
        }
    };
    finish(&outputs, &config)
}
