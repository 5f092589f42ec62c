use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use msglance_cli::{cmd_ablate, cmd_fit, cmd_mask, cmd_metric, cmd_undersample, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "msglance", version, about = "Glance-vector similarity, SIREN fitting and MRI undersampling experiments")]
struct Cli {
    /// Seed for every random draw; overrides `seed` in the config file.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Flat key=value config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare two images.
    Metric {
        reference: PathBuf,
        pred: PathBuf,
        /// psnr, ssim, glance-local, glance-global, msglance or s3im
        #[arg(long, default_value = "msglance")]
        metric: String,
    },
    /// Fit a SIREN to an image.
    Fit { target: PathBuf },
    /// Generate a Cartesian column mask.
    Mask {
        #[arg(long)]
        width: usize,
        #[arg(long)]
        accel: Option<f64>,
        #[arg(long)]
        acs: Option<f64>,
    },
    /// Zero-filled reconstruction from undersampled k-space.
    Undersample {
        image: PathBuf,
        /// Acceleration; 1 keeps every column.
        #[arg(long)]
        accel: Option<f64>,
        #[arg(long)]
        acs: Option<f64>,
    },
    /// Run an ablation grid: kernel, lc, shuffles, nm, ngmg or air-prior.
    Ablate {
        #[arg(long)]
        suite: String,
        /// Input image; a synthetic one is generated when omitted.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<String, CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let out = &cli.out_dir;
    match cli.command {
        Command::Metric { reference, pred, metric } => cmd_metric(&reference, &pred, metric.parse()?, &cfg, out),
        Command::Fit { target } => cmd_fit(&target, &cfg, out),
        Command::Mask { width, accel, acs } => {
            cfg.accel = accel.unwrap_or(cfg.accel);
            cfg.acs = acs.unwrap_or(cfg.acs);
            cmd_mask(width, &cfg, out)
        }
        Command::Undersample { image, accel, acs } => {
            cfg.accel = accel.unwrap_or(cfg.accel);
            cfg.acs = acs.unwrap_or(cfg.acs);
            cmd_undersample(&image, &cfg, out)
        }
        Command::Ablate { suite, input } => cmd_ablate(suite.parse()?, input.as_deref(), &cfg, out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("msglance: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
