//! The `lavanet` command line: run experiments from config files, inspect
//! core partitions, render rasters.
//!
//! Exit codes: 0 success, 1 configuration/validation errors, 2 runtime
//! errors. Stdout carries machine-greppable `key: value` lines only;
//! diagnostics go to stderr.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use lavanet_core::params::ParameterSet;
use lavanet_core::partition::{chunk_count, compute_layout, MAX_NEURONS_PER_CORE};

use crate::experiment::ExperimentBuilder;
use crate::formats;
use crate::plot::{self, PoolSeries, RasterSpec};

#[derive(Parser)]
#[command(
    name = "lavanet",
    version,
    about = "Reservoir experiments on a deterministic multi-core simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment from a parameter-override config file
    Run {
        /// JSON config with parameter overrides
        #[arg(long)]
        config: PathBuf,
        /// Override the seed from the config
        #[arg(long)]
        seed: Option<u64>,
        /// Base directory for the run directory
        #[arg(long)]
        out: Option<PathBuf>,
        /// Experiment name, becomes part of the run directory
        #[arg(long, default_value = "experiment")]
        name: String,
        /// Seed the weights from a CSR snapshot instead of the initializer
        #[arg(long)]
        initial_weights: Option<PathBuf>,
        /// Host worker threads (never changes results)
        #[arg(long, default_value_t = 1)]
        threads: usize,
        /// Also render raster.svg into the run directory
        #[arg(long)]
        plot: bool,
    },
    /// Show how a network of the given size maps onto cores
    Info {
        #[arg(long)]
        neurons: usize,
        #[arg(long = "per-core")]
        per_core: usize,
    },
    /// Render a run directory's spike CSVs as an SVG raster
    Raster {
        /// Run directory containing parameters.json and spike CSVs
        #[arg(long)]
        run: PathBuf,
        /// Output SVG path
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated pools (ex,in,out); default: all present
        #[arg(long)]
        pools: Option<String>,
    },
}

pub fn main_entry() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return 0;
        }
        Err(e) => {
            eprint!("{e}");
            return 1;
        }
    };
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            name,
            initial_weights,
            threads,
            plot,
        } => cmd_run(&config, seed, out, &name, initial_weights, threads, plot),
        Command::Info { neurons, per_core } => cmd_info(neurons, per_core),
        Command::Raster { run, out, pools } => cmd_raster(&run, &out, pools.as_deref()),
    }
}

fn cmd_run(
    config: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
    name: &str,
    initial_weights: Option<PathBuf>,
    threads: usize,
    plot: bool,
) -> i32 {
    if !config.is_file() {
        eprintln!("config file not found: {}", config.display());
        return 1;
    }
    let overrides = match formats::read_config_file(config) {
        Ok(overrides) => overrides,
        Err(e) => {
            eprintln!("config file {}: {e}", config.display());
            return 1;
        }
    };
    let mut builder = ExperimentBuilder::new(name).overrides(overrides).threads(threads);
    if let Some(seed) = seed {
        builder = builder.seed(seed);
    }
    if let Some(dir) = out {
        builder = builder.output_dir(dir);
    }
    if let Some(path) = initial_weights {
        match formats::read_csr_file(&path) {
            Ok(matrix) => builder = builder.initial_weights(matrix),
            Err(e) => {
                eprintln!("initial weights {}: {e}", path.display());
                return 1;
            }
        }
    }

    let mut experiment = match builder.create() {
        Ok(exp) => exp,
        Err(e) => {
            eprintln!("{e}");
            return if e.is_validation() { 1 } else { 2 };
        }
    };
    if let Err(e) = experiment.build() {
        eprintln!("build: {e}");
        return 2;
    }
    if let Err(e) = experiment.run() {
        eprintln!("run: {e}");
        return 2;
    }
    if plot {
        if let Err(e) = experiment.write_raster_svg() {
            eprintln!("plot: {e}");
            return 2;
        }
    }

    let params = experiment.params().clone();
    let derived = experiment.derived().clone();
    let results = experiment.results().expect("run finished");
    let (ex_spikes, in_spikes) =
        formats::split_raster_by_pool(&results.raster, params.reservoir_ex_size);
    println!("runDir: {}", experiment.run_dir().display());
    println!("reservoirSize: {}", derived.reservoir_size);
    println!("cores: {}", derived.core_count);
    println!("chunks: {}", derived.chunk_count);
    println!("steps: {}", derived.total_steps);
    println!("spikesEx: {}", ex_spikes.len());
    println!("spikesIn: {}", in_spikes.len());
    if let Some(out_raster) = &results.out_raster {
        println!("spikesOut: {}", out_raster.count());
    }
    println!("runtimeSeconds: {:.3}", results.runtime_seconds);
    0
}

fn cmd_info(neurons: usize, per_core: usize) -> i32 {
    if per_core > MAX_NEURONS_PER_CORE {
        eprintln!("per-core value {per_core} exceeds {MAX_NEURONS_PER_CORE} compartments per core");
        return 1;
    }
    let layout = match compute_layout(neurons, per_core) {
        Ok(layout) => layout,
        Err(e) => {
            eprintln!("{e}");
            return 1;
        }
    };
    let sizes: Vec<String> = layout
        .ranges()
        .iter()
        .map(|&(a, b)| (b - a).to_string())
        .collect();
    println!("cores: {}", layout.core_count());
    println!("chunks: {}", chunk_count(&layout));
    println!("coreSizes: {}", sizes.join(","));
    0
}

fn cmd_raster(run: &Path, out: &Path, pools: Option<&str>) -> i32 {
    let params_path = run.join("parameters.json");
    if !params_path.is_file() {
        eprintln!("run directory has no parameters.json: {}", run.display());
        return 2;
    }
    let params = match std::fs::read_to_string(&params_path)
        .map_err(formats::FormatError::from)
        .and_then(|text| formats::parse_overrides(&text))
        .and_then(|overrides| {
            ParameterSet::defaults()
                .merge(&overrides)
                .map_err(|e| formats::FormatError::UnsupportedValue {
                    key: e.to_string(),
                    value: String::new(),
                })
        }) {
        Ok(params) => params,
        Err(e) => {
            eprintln!("{}: {e}", params_path.display());
            return 2;
        }
    };
    let derived = match params.derive() {
        Ok(derived) => derived,
        Err(e) => {
            eprintln!("{}: {e}", params_path.display());
            return 2;
        }
    };

    let selected: Vec<&str> = match pools {
        Some(list) => {
            let mut selected = Vec::new();
            for pool in list.split(',').map(str::trim).filter(|p| !p.is_empty()) {
                if !matches!(pool, "ex" | "in" | "out") {
                    eprintln!("unknown pool `{pool}`; expected ex, in or out");
                    return 1;
                }
                selected.push(match pool {
                    "ex" => "ex",
                    "in" => "in",
                    _ => "out",
                });
            }
            selected
        }
        None => ["ex", "in", "out"]
            .into_iter()
            .filter(|pool| run.join(format!("spikes_{pool}.csv")).is_file())
            .collect(),
    };
    if selected.is_empty() {
        eprintln!("no spike CSVs found in {}", run.display());
        return 2;
    }

    let mut pool_series = Vec::new();
    for pool in selected {
        let path = run.join(format!("spikes_{pool}.csv"));
        let text = match std::fs::read_to_string(&path) {
            Ok(text) => text,
            Err(_) => {
                eprintln!("missing spike CSV: {}", path.display());
                return 2;
            }
        };
        let spikes = match formats::parse_spike_lines(&text, &path) {
            Ok(spikes) => spikes,
            Err(e) => {
                eprintln!("{e}");
                return 2;
            }
        };
        let (size, color, class) = match pool {
            "ex" => (params.reservoir_ex_size, plot::EX_COLOR, "ex"),
            "in" => (params.reservoir_in_size, plot::IN_COLOR, "in"),
            _ => (params.output_size, plot::OUT_COLOR, "out"),
        };
        pool_series.push(PoolSeries {
            label: pool.to_string(),
            size,
            color,
            class,
            spikes,
        });
    }

    let spike_total: usize = pool_series.iter().map(|p| p.spikes.len()).sum();
    let svg = plot::render_svg(&RasterSpec {
        width: params.plot_dimensions.0,
        height: params.plot_dimensions.1,
        total_steps: derived.total_steps,
        steps_per_trial: params.steps_per_trial,
        trials: params.trials,
        input_windows: derived.input_windows.clone(),
        pools: pool_series,
    });
    if let Err(e) = std::fs::write(out, svg) {
        eprintln!("cannot write {}: {e}", out.display());
        return 2;
    }
    println!("svg: {}", out.display());
    println!("spikes: {spike_total}");
    0
}
