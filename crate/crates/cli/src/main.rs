use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use roadchar_core::characterize::RpdMode;
use roadchar_core::config::{Config, ConfigOverrides, CONFIG_ENV_VAR};

mod commands;

/// Pothole segmentation post-processing, depth characterization and
/// evaluation.
#[derive(Parser, Debug)]
#[command(name = "roadchar", version, about)]
struct Cli {
    #[command(flatten)]
    config: ConfigArgs,
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the config file.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// TOML config file; falls back to $ROADCHAR_CONFIG
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    band_radius: Option<usize>,
    /// ratio | difference
    #[arg(long, global = true)]
    rpd_mode: Option<RpdMode>,
    #[arg(long, global = true)]
    depth_range_mm: Option<f64>,
    #[arg(long, global = true)]
    conf_threshold: Option<f64>,
    #[arg(long, global = true)]
    iou_threshold: Option<f64>,
    /// 4 or 8
    #[arg(long, global = true)]
    connectivity: Option<u8>,
    #[arg(long, global = true)]
    min_valid_fraction: Option<f64>,
    #[arg(long, global = true)]
    zero_fraction_threshold: Option<f64>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn overrides(&self) -> ConfigOverrides {
        ConfigOverrides {
            band_radius: self.band_radius,
            rpd_mode: self.rpd_mode,
            depth_range_mm: self.depth_range_mm,
            conf_threshold: self.conf_threshold,
            iou_threshold: self.iou_threshold,
            connectivity: self.connectivity,
            min_valid_fraction: self.min_valid_fraction,
            zero_fraction_threshold: self.zero_fraction_threshold,
            seed: self.seed,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Clean, augment, resize and split an RGB-depth dataset
    Prep(commands::PrepArgs),
    /// Per-frame pothole reports and overlays from predicted masks
    Characterize(commands::CharacterizeArgs),
    /// Box and mask detection metrics against ground-truth labels
    Evaluate(commands::EvaluateArgs),
    /// RMSE between predicted and ground-truth depth maps
    DepthEval(commands::DepthEvalArgs),
    /// Generate synthetic scenes with known geometry
    Synth(commands::SynthArgs),
    /// Print the effective configuration as TOML
    Config,
}

fn report_error(kind: &str, err: &anyhow::Error) {
    let chain: Vec<String> = err.chain().map(|e| e.to_string()).collect();
    let body = serde_json::json!({
        "error": {
            "kind": kind,
            "message": err.to_string(),
            "causes": &chain[1..],
        }
    });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = Cli::parse();

    let env_path = std::env::var_os(CONFIG_ENV_VAR).map(PathBuf::from);
    let config = match Config::resolve(
        cli.config.config.as_deref(),
        env_path.as_deref(),
        &cli.config.overrides(),
    ) {
        Ok(c) => c,
        Err(e) => {
            report_error(
                "usage",
                &anyhow::Error::new(e).context("invalid configuration"),
            );
            return ExitCode::from(2);
        }
    };

    let result = match &cli.command {
        Command::Prep(args) => commands::prep(args, &config),
        Command::Characterize(args) => commands::characterize(args, &config),
        Command::Evaluate(args) => commands::evaluate(args, &config),
        Command::DepthEval(args) => commands::depth_eval(args, &config),
        Command::Synth(args) => commands::synth(args, &config),
        Command::Config => {
            print!("{}", config.to_toml());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<commands::UsageError>() => {
            report_error("usage", &e);
            ExitCode::from(2)
        }
        Err(e) => {
            report_error("data", &e);
            ExitCode::from(1)
        }
    }
}
