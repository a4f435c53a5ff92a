//! Generate traces, simulate the car-to-cloud uplink, analyze the results
//! and size resource-block reservations.

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Parser)]
#[command(
    name = "cvimsim",
    version,
    about = "Car-to-cloud data traffic simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic 1 Hz vehicle traces with the Krauss car follower.
    GenTraces {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trace CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the communication model over a trace file.
    Simulate {
        #[command(flatten)]
        config: ConfigArgs,
        /// Trace CSV, or SUMO FCD XML when the extension is `.xml`.
        #[arg(long)]
        traces: PathBuf,
        /// Station CSV with header `station_id,x,y[,antenna_gain,height]`.
        #[arg(long)]
        stations: PathBuf,
        /// Directory receiving results.csv and summary.json.
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Summarize one or more results.csv files.
    Analyze {
        /// results.csv files; the first two are compared when two are given.
        #[arg(required = true)]
        results: Vec<PathBuf>,
        /// Directory receiving stats.json, cdf.csv and cell_packages.csv.
        #[arg(long)]
        out_dir: PathBuf,
        /// Scenario labels, one per input, overriding the inferred ones.
        #[arg(long = "label")]
        labels: Vec<String>,
        /// `ticks` (every per-vehicle sample) or `vehicles` (per-vehicle means).
        #[arg(long, default_value = "ticks")]
        pooling: String,
    },
    /// Resource blocks needed for a guaranteed rate; prints JSON.
    Plan {
        #[command(flatten)]
        config: ConfigArgs,
        /// Required rate in bit/s.
        #[arg(long)]
        rate: f64,
        /// Link SNR in dB.
        #[arg(long, allow_negative_numbers = true)]
        snr: f64,
        /// Vehicle speed in m/s.
        #[arg(long, default_value_t = 0.0)]
        speed: f64,
    },
}

#[derive(Args)]
struct ConfigArgs {
    /// Config file with `section.key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Preset the config file and overrides apply to.
    #[arg(long, default_value = "free_flow")]
    scenario: String,
    /// Override one key, e.g. `--set cell.n_rb=10`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Override road.seed.
    #[arg(long)]
    seed: Option<u64>,
}

/// Run the command line `args` (program name first) and map the outcome
/// to an exit code: 0 ok, 2 config, 3 data or validation, 4 internal.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            // help and version requests print and succeed
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::GenTraces { config, out } => {
            commands::load_config(&config).and_then(|cfg| commands::gen_traces(&cfg, &out))
        }
        Command::Simulate {
            config,
            traces,
            stations,
            out_dir,
        } => commands::load_config(&config)
            .and_then(|cfg| commands::simulate(&cfg, &traces, &stations, &out_dir)),
        Command::Analyze {
            results,
            out_dir,
            labels,
            pooling,
        } => commands::analyze(&results, &out_dir, &labels, &pooling),
        Command::Plan {
            config,
            rate,
            snr,
            speed,
        } => commands::load_config(&config).and_then(|cfg| commands::plan(&cfg, rate, snr, speed)),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("cvimsim: {:#}", failure.error);
            ExitCode::from(failure.code())
        }
    }
}
