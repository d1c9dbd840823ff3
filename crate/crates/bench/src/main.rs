use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use gam_bench::config::{ConfigSource, PRESETS};
use gam_bench::decompose::decompose_file;
use gam_bench::{constellation, decompose, rre, ser, BenchError};
use gam_core::echelon::{DecomposeOptions, Method, DEFAULT_ROTATION_TRIALS};

#[derive(Parser)]
#[command(name = "gam", version, about = "RIS transceiver experiments: residual-error sweeps, constellations and SER")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON experiment config (or a run manifest)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Override the master seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Built-in config: fig3-small, fig3-paper, fig5, fig6, small-example
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Residual error of each decomposition over element count and spacing
    RreBench {
        #[arg(long)]
        realizations: Option<usize>,
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Monte Carlo SER of GAM and QR-SIC over the SNR grid
    SerSim {
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long)]
        realizations: Option<usize>,
    },
    /// Constellations and rate summary for one pinned channel
    ConstellationDump {
        #[arg(long)]
        channel_seed: Option<u64>,
    },
    /// Decompose a matrix, channel or decomposition file
    Decompose {
        input: PathBuf,
        #[arg(long, default_value = "CP")]
        method: Method,
        #[arg(long, default_value_t = DEFAULT_ROTATION_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = 1e-10)]
        rank_tolerance: f64,
        /// Output file (default: <out>/decomposition.json)
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Sample one channel and write it with its equivalent matrix
    ChannelGen {
        #[arg(long)]
        channel_seed: Option<u64>,
    },
    /// List built-in presets
    Presets,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err.downcast_ref::<BenchError>().map_or(1, BenchError::exit_code);
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let g = cli.global;
    if let Some(n) = g.threads {
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().context("configuring the thread pool")?;
    }
    let source = ConfigSource { config: g.config, preset: g.preset, seed: g.seed, out: g.out.clone() };
    match cli.command {
        Command::RreBench { realizations, trials } => {
            let mut cfg = source.resolve("fig3-small")?;
            cfg.realizations = realizations.unwrap_or(cfg.realizations);
            cfg.rotation_trials = trials.unwrap_or(cfg.rotation_trials);
            cfg.validate()?;
            let report = rre::rre_bench(&cfg)?;
            print!("{}", rre::rre_csv(&report.rows));
        }
        Command::SerSim { frames, realizations } => {
            let mut cfg = source.resolve("fig5")?;
            cfg.frames = frames.unwrap_or(cfg.frames);
            cfg.realizations = realizations.unwrap_or(cfg.realizations);
            cfg.validate()?;
            let outcome = ser::ser_sim(&cfg)?;
            println!(
                "total order: GAM {:.2} bits, QR-SIC {:.2} bits ({:+.1}%)",
                outcome.gam_bits,
                outcome.qr_sic_bits,
                100.0 * (outcome.gam_bits / outcome.qr_sic_bits - 1.0)
            );
            println!("wrote {}", cfg.out_dir.display());
        }
        Command::ConstellationDump { channel_seed } => {
            let mut cfg = source.resolve("fig5")?;
            cfg.channel_seed = channel_seed.or(cfg.channel_seed);
            let pair = constellation::constellation_dump(&cfg)?;
            print!("{}", constellation::summary_csv(&[("gam", &pair.gam), ("qr-sic", &pair.qr_sic)]));
        }
        Command::Decompose { input, method, trials, rank_tolerance, output } => {
            let seed = g.seed.unwrap_or(0);
            let output = output.unwrap_or_else(|| g.out.unwrap_or_else(|| PathBuf::from(".")).join("decomposition.json"));
            let opts = DecomposeOptions { rotation_trials: trials, seed };
            let dec = decompose_file(&input, method, &opts, rank_tolerance, &output)?;
            println!("method {method}: tau = {}, n_check = {}, rre = {:.6e}", dec.tau(), dec.n_check(), dec.rre);
            println!("wrote {}", output.display());
        }
        Command::ChannelGen { channel_seed } => {
            let mut cfg = source.resolve("fig5")?;
            cfg.channel_seed = channel_seed.or(cfg.channel_seed);
            let eq = decompose::channel_gen(&cfg)?;
            println!("tau = {}, n_check = {}, singular values {:?}", eq.tau, eq.n_check, eq.singular_values);
        }
        Command::Presets => {
            for name in PRESETS {
                println!("{name}");
            }
        }
    }
    Ok(())
}
