use clap::{Args, Parser, Subcommand};
use sand_cli::commands::{self, GeneratorKind};
use sand_cli::config::RunConfig;
use sand_core::geometry::RadioParams;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "sand", about = "Sybil-resilient neighborhood discovery: analyze and simulate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search a layout for snares and check the transmission-range condition.
    Analyze {
        /// Run configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory for analysis.json (and layout.svg).
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Snare-search grid resolution override.
        #[arg(long)]
        resolution: Option<f64>,
        /// Also render the layout as SVG.
        #[arg(long)]
        svg: bool,
    },
    /// Run the discovery protocol under the configured adversaries.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Scheduler seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Epoch budget override.
        #[arg(long)]
        max_epochs: Option<u64>,
    },
    /// Write a deterministic layout file.
    Generate {
        #[command(subcommand)]
        kind: GenerateKind,
    },
}

#[derive(Subcommand)]
enum GenerateKind {
    /// Square grid, row-major node order.
    Grid {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long, default_value_t = 1.0)]
        spacing: f64,
        #[command(flatten)]
        radio: RadioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Seeded uniform scatter with a minimum separation.
    Random {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        width: f64,
        #[arg(long)]
        height: f64,
        #[arg(long, default_value_t = 0.05)]
        min_sep: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        radio: RadioArgs,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RadioArgs {
    /// Correct-node transmission range.
    #[arg(long)]
    r_t: f64,
    /// Neighborhood distance.
    #[arg(long)]
    d_n: f64,
}

fn load_config(path: &PathBuf) -> Result<RunConfig, i32> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: cannot read {}: {e}", path.display());
        commands::EXIT_CONFIG
    })?;
    RunConfig::from_json(&text).map_err(|e| {
        eprintln!("error: {e}");
        commands::EXIT_CONFIG
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Analyze { config, out, resolution, svg } => match load_config(&config) {
            Ok(cfg) => commands::cmd_analyze(&cfg, resolution, &out, svg).unwrap_or_else(|e| {
                eprintln!("error: {e}");
                commands::EXIT_CONFIG
            }),
            Err(code) => code,
        },
        Command::Simulate { config, out, seed, max_epochs } => match load_config(&config) {
            Ok(cfg) => {
                commands::cmd_simulate(&cfg, seed, max_epochs, &out).unwrap_or_else(|e| {
                    eprintln!("error: {e}");
                    commands::EXIT_CONFIG
                })
            }
            Err(code) => code,
        },
        Command::Generate { kind } => {
            let (generator, radio, seed, out) = match kind {
                GenerateKind::Grid { rows, cols, spacing, radio, out } => {
                    (GeneratorKind::Grid { rows, cols, spacing }, radio, 0, out)
                }
                GenerateKind::Random { n, width, height, min_sep, seed, radio, out } => {
                    (GeneratorKind::Random { n, width, height, min_sep }, radio, seed, out)
                }
            };
            let params = RadioParams::for_range(radio.r_t, radio.d_n);
            commands::cmd_generate(&generator, params, seed, &out).unwrap_or_else(|e| {
                eprintln!("error: {e}");
                commands::EXIT_CONFIG
            })
        }
    };
    ExitCode::from(code as u8)
}
