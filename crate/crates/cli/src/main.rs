use std::path::{Path, PathBuf};
use std::process::ExitCode;

use afmhyst::commands::{self, Analysis, AnalyzeOptions, Benchmark};
use afmhyst::config::SamplerKind;
use afmhyst::{CliError, CliResult, RunConfig};
use afmhyst_core::calibration::{BENCHMARK_BETA, DEFAULT_ITERATIONS, DEFAULT_SHOTS, DEFAULT_STEP};
use afmhyst_core::observables::{SSF_GRID, SSF_SHOTS};
use afmhyst_core::theory::DropletParams;
use clap::{Args, Parser, Subcommand, ValueEnum};

/// Antiferromagnetic hysteresis in transverse-field Ising models.
#[derive(Parser)]
#[command(name = "afmhyst", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optional calibration, then one hysteresis cycle per pause point.
    Run(RunArgs),
    /// Derive CSV artifacts from a run record.
    Analyze(AnalyzeArgs),
    /// Flux-bias-offset calibration of a config's model or the free-spin
    /// benchmark.
    Calibrate(CalibrateArgs),
    /// Single-domain-wall bands and droplet nucleation tables.
    Theory {
        #[command(subcommand)]
        table: TheoryTable,
    },
    /// Parse and check a config without sampling.
    ValidateConfig {
        config: PathBuf,
    },
}

/// Overrides for fields of the config file.
#[derive(Args)]
struct Overrides {
    #[arg(long)]
    output_dir: Option<PathBuf>,
    #[arg(long)]
    shots: Option<usize>,
    /// Comma-separated pause points; replaces any pause list in the file.
    #[arg(long, value_delimiter = ',')]
    s_pause: Option<Vec<f64>>,
    /// Comma-separated Gamma/J values; replaces any pause list in the file.
    #[arg(long, value_delimiter = ',')]
    gamma_over_j: Option<Vec<f64>>,
    #[arg(long)]
    h_max: Option<f64>,
    #[arg(long)]
    n_slices: Option<usize>,
    #[arg(long)]
    sampler: Option<SamplerArg>,
    #[arg(long)]
    n_trotter: Option<usize>,
    #[arg(long)]
    beta_j: Option<f64>,
    #[arg(long)]
    sweeps_per_step: Option<usize>,
    #[arg(long)]
    warmup_sweeps: Option<usize>,
    /// Skip calibration even if the file enables it.
    #[arg(long)]
    no_calibration: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplerArg {
    Sqa,
    Exact,
}

#[derive(Args)]
struct RunArgs {
    config: PathBuf,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Clone, Copy, ValueEnum)]
enum What {
    Trace,
    Ssf,
    Walls,
    Area,
    Heightmap,
}

#[derive(Args)]
struct AnalyzeArgs {
    /// Output directory of a run.
    record: PathBuf,
    what: What,
    /// Destination; defaults to `<record>/analysis`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Comma-separated field steps for ssf and heightmap.
    #[arg(long, value_delimiter = ',')]
    steps: Option<Vec<usize>>,
    #[arg(long, default_value_t = SSF_GRID)]
    grid: usize,
    #[arg(long, default_value_t = SSF_SHOTS)]
    shots: usize,
}

#[derive(Args)]
struct CalibrateArgs {
    /// Calibrate this config's model; without it, run the free-spin benchmark.
    config: Option<PathBuf>,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1024)]
    sites: usize,
    #[arg(long, default_value_t = 0.01)]
    bias_sigma: f64,
    #[arg(long, default_value_t = BENCHMARK_BETA)]
    beta: f64,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    shots: Option<usize>,
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Subcommand)]
enum TheoryTable {
    /// `E_+-(k)` and group velocities of one wall on an odd ring.
    Bands {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
        #[arg(long, default_value_t = 0.0)]
        field: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Droplet energy against radius, plus `R_c` and `E_c` on stderr.
    Droplet {
        #[arg(long)]
        coordination: f64,
        #[arg(long, default_value_t = 1.0)]
        coupling: f64,
        #[arg(long)]
        field: f64,
        #[arg(long, default_value_t = 1.0)]
        m0: f64,
        #[arg(long, default_value_t = 101)]
        points: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn apply(config: &mut RunConfig, o: Overrides) {
    if let Some(d) = o.output_dir {
        config.output_dir = d;
    }
    if let Some(s) = o.shots {
        config.shots = s;
    }
    if let Some(list) = o.s_pause {
        config.schedule.s_pause = Some(list);
        config.schedule.gamma_over_j = None;
    }
    if let Some(list) = o.gamma_over_j {
        config.schedule.gamma_over_j = Some(list);
        config.schedule.s_pause = None;
    }
    if let Some(h) = o.h_max {
        config.schedule.h_max = h;
    }
    if let Some(n) = o.n_slices {
        config.schedule.n_slices = n;
    }
    if let Some(k) = o.sampler {
        config.sampler.kind = match k {
            SamplerArg::Sqa => SamplerKind::Sqa,
            SamplerArg::Exact => SamplerKind::Exact,
        };
    }
    if let Some(p) = o.n_trotter {
        config.sampler.n_trotter = p;
    }
    if let Some(b) = o.beta_j {
        config.sampler.beta_j = b;
    }
    if let Some(s) = o.sweeps_per_step {
        config.sampler.sweeps_per_step = s;
    }
    if let Some(s) = o.warmup_sweeps {
        config.sampler.warmup_sweeps = s;
    }
    if o.no_calibration {
        config.calibration.enabled = false;
    }
}

fn load_unchecked(path: &Path) -> CliResult<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("cannot read config {}: {e}", path.display())))?;
    RunConfig::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
}

fn write_or_print(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => afmhyst::formats::write_atomic(path, text.as_bytes()),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Run(args) => {
            let mut config = load_unchecked(&args.config)?;
            apply(&mut config, args.overrides);
            config.seed = Some(args.seed);
            let record = commands::run(&config)?;
            for c in &record.cycles {
                println!(
                    "s_pause={:.6} gamma_over_j={:.6} loop_area={:.6} trace={}",
                    c.s_pause, c.gamma_over_j, c.loop_area, c.trace_file
                );
            }
            println!("record: {}", afmhyst::RunRecord::path(&config.output_dir).display());
        }
        Command::Analyze(args) => {
            let what = match args.what {
                What::Trace => Analysis::Trace,
                What::Ssf => Analysis::Ssf,
                What::Walls => Analysis::Walls,
                What::Area => Analysis::Area,
                What::Heightmap => Analysis::Heightmap,
            };
            let options = AnalyzeOptions {
                steps: args.steps,
                grid: args.grid,
                shots: args.shots,
            };
            let out = args.out.unwrap_or_else(|| args.record.join("analysis"));
            for path in commands::analyze(&args.record, what, &options, &out)? {
                println!("{}", path.display());
            }
        }
        Command::Calibrate(args) => {
            let summary = match &args.config {
                Some(path) => {
                    let mut config = load_unchecked(path)?;
                    config.seed = Some(args.seed);
                    config.calibration.enabled = true;
                    if let Some(i) = args.iterations {
                        config.calibration.iterations = i;
                    }
                    if let Some(s) = args.shots {
                        config.calibration.shots = s;
                    }
                    if let Some(s) = args.step {
                        config.calibration.step = s;
                    }
                    commands::calibrate_config(&config, &args.out)?
                }
                None => {
                    let bench = Benchmark {
                        n_sites: args.sites,
                        bias_sigma: args.bias_sigma,
                        beta: args.beta,
                        iterations: args.iterations.unwrap_or(DEFAULT_ITERATIONS),
                        shots: args.shots.unwrap_or(DEFAULT_SHOTS),
                        step: args.step.unwrap_or(DEFAULT_STEP),
                        seed: args.seed,
                    };
                    commands::calibrate_benchmark(&bench, &args.out)?
                }
            };
            println!(
                "iterations={} initial_spread={} final_spread={}",
                summary.iterations, summary.initial_spread, summary.final_spread
            );
        }
        Command::Theory { table } => match table {
            TheoryTable::Bands {
                n,
                coupling,
                field,
                gamma,
                out,
            } => write_or_print(out.as_deref(), &commands::theory_bands(n, coupling, field, gamma)?)?,
            TheoryTable::Droplet {
                coordination,
                coupling,
                field,
                m0,
                points,
                out,
            } => {
                let params = DropletParams::new(coordination, coupling, field, m0)?;
                let (text, r_c, e_c) = commands::theory_droplet(&params, points)?;
                eprintln!("R_c={r_c} E_c={e_c}");
                write_or_print(out.as_deref(), &text)?;
            }
        },
        Command::ValidateConfig { config } => {
            let config = RunConfig::load(&config)?;
            let table = config.table()?;
            println!("sites: {}", config.lattice()?.n_sites());
            for p in config.pauses(&table)? {
                println!("pause s={:.6} gamma_over_j={:.6}", p.s, p.gamma_over_j);
            }
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("afmhyst: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
