use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use ppt_omega::estimator::EditRule;
use ppt_omega::qmc_sequence::{FaureSequence, PrngSequence, Scrambling, SequenceConfig};
use ppt_omega::run::{self, RunConfig, RunOptions};
use ppt_omega::state_param::{coords_to_state, cube_dimension};
use ppt_omega::validate::{validate, ValidationOptions};
use ppt_omega::Error;

#[derive(Parser)]
#[command(name = "ppt-omega", version, about = "Weighted QMC estimates of PPT and cross-norm probabilities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScrambleArg {
    None,
    Tezuka,
    DigitPermutation,
}

#[derive(Subcommand)]
enum Command {
    /// Start a run from a TOML config
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        total_points: Option<u64>,
        #[arg(long)]
        points_per_interval: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Continue a run from its directory or checkpoint file
    Resume {
        path: PathBuf,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Edit the series of an interval log and write report files
    Report {
        log: PathBuf,
        #[arg(long, default_value_t = 5)]
        window: usize,
        #[arg(long, default_value_t = 0.5)]
        threshold: f64,
        /// Defaults to the directory of the log
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the validation suite and print a JSON report
    Validate {
        #[arg(long)]
        out: Option<PathBuf>,
        /// Smaller sample sizes
        #[arg(long)]
        quick: bool,
    },
    /// Print sequence points as CSV
    DumpPoints {
        #[arg(long)]
        dimension: usize,
        #[arg(long, default_value_t = 0)]
        start: u64,
        #[arg(long, default_value_t = 16)]
        count: u64,
        #[arg(long, value_enum, default_value_t = ScrambleArg::Tezuka)]
        scrambling: ScrambleArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        skip: u64,
        /// Use the pseudo-random stream with this seed instead
        #[arg(long)]
        prng_seed: Option<u64>,
    },
    /// Print the density matrix for one point index as JSON
    ShowState {
        #[arg(long)]
        d_a: usize,
        #[arg(long)]
        d_b: usize,
        #[arg(long)]
        index: u64,
        #[arg(long)]
        boundary: bool,
        #[arg(long, value_enum, default_value_t = ScrambleArg::Tezuka)]
        scrambling: ScrambleArg,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Serialize)]
struct StateDump {
    index: u64,
    rank_deficient: bool,
    coords: Vec<f64>,
    eigenvalues: Vec<f64>,
    real: Vec<Vec<f64>>,
    imag: Vec<Vec<f64>>,
}

fn scrambling(arg: ScrambleArg, seed: u64) -> Scrambling {
    match arg {
        ScrambleArg::None => Scrambling::None,
        ScrambleArg::Tezuka => Scrambling::Tezuka { seed },
        ScrambleArg::DigitPermutation => Scrambling::DigitPermutation { seed },
    }
}

fn print_json<T: Serialize>(value: &T) -> Result<(), Error> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, total_points, points_per_interval, workers, output_dir, quiet } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(n) = total_points {
                cfg.total_points = n;
            }
            if let Some(n) = points_per_interval {
                cfg.points_per_interval = n;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            if let Some(d) = output_dir {
                cfg.output_dir = d;
            }
            let summary = run::run(&cfg, RunOptions { progress: !quiet })?;
            eprintln!("finished {} points; summary in {}", summary.n_points, cfg.output_dir.join(run::SUMMARY_FILE).display());
        }
        Command::Resume { path, workers, quiet } => {
            let summary = run::resume(&path, workers, RunOptions { progress: !quiet })?;
            eprintln!("run at {} points", summary.n_points);
        }
        Command::Report { log, window, threshold, out } => {
            let out = out.unwrap_or_else(|| log.parent().map(PathBuf::from).unwrap_or_default());
            let summary = run::report(&log, EditRule { window, threshold }, &out)?;
            print_json(&summary)?;
        }
        Command::Validate { out, quick } => {
            let mut opts = ValidationOptions::default();
            if quick {
                opts.area_volume_points = 200_000;
                opts.ginibre_draws = 20_000;
                opts.qmc_points = 20_000;
                opts.pt_instances = 50;
            }
            let report = validate(&opts);
            if let Some(path) = out {
                std::fs::write(path, serde_json::to_string_pretty(&report)? + "\n")?;
            }
            print_json(&report)?;
            if !report.passed {
                return Ok(ExitCode::from(1));
            }
        }
        Command::DumpPoints { dimension, start, count, scrambling: s, seed, skip, prng_seed } => {
            let mut out = std::io::BufWriter::new(std::io::stdout().lock());
            let header: Vec<String> = (0..dimension).map(|j| format!("x{j}")).collect();
            writeln!(out, "index,{}", header.join(","))?;
            let mut coords = vec![0.0; dimension];
            let source: Box<dyn Fn(u64, &mut [f64]) -> Result<(), Error>> = match prng_seed {
                Some(p) => {
                    let seq = PrngSequence::new(p, dimension);
                    Box::new(move |i, c| seq.fill(i, c))
                }
                None => {
                    let mut cfg = SequenceConfig::new(dimension).with_scrambling(scrambling(s, seed));
                    cfg.skip = skip;
                    let seq = FaureSequence::new(cfg)?;
                    Box::new(move |i, c| seq.fill(i, c))
                }
            };
            for i in start..start + count {
                source(i, &mut coords)?;
                let row: Vec<String> = coords.iter().map(|x| format!("{x}")).collect();
                writeln!(out, "{i},{}", row.join(","))?;
            }
        }
        Command::ShowState { d_a, d_b, index, boundary, scrambling: s, seed } => {
            let d = d_a * d_b;
            let cfg = SequenceConfig::new(cube_dimension(d, false)).with_scrambling(scrambling(s, seed));
            let cfg = if boundary { cfg.with_subset((0..cube_dimension(d, true)).collect()) } else { cfg };
            let seq = FaureSequence::new(cfg)?;
            let coords = seq.point(index)?.coords;
            let (rho, spec) = coords_to_state(&coords, d, boundary)?;
            let m = rho.matrix();
            print_json(&StateDump {
                index,
                rank_deficient: boundary,
                coords,
                eigenvalues: spec.lambdas,
                real: (0..d).map(|i| (0..d).map(|j| m[(i, j)].re).collect()).collect(),
                imag: (0..d).map(|i| (0..d).map(|j| m[(i, j)].im).collect()).collect(),
            })?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) | Error::Toml(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
