use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use glmb::scenarios::{linear_scenario, nonlinear_scenario};
use glmb_cli::bench::{bench_scaling, write_report, BenchConfig};
use glmb_cli::config::{read_config, BackendChoice, InitChoice, RunConfig, ScenarioChoice, SolverChoice};
use glmb_cli::{assign, run, CliError, CliResult};

/// GLMB multi-object tracker with joint prediction-update.
#[derive(Parser)]
#[command(name = "glmb", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and run Monte Carlo filter trials.
    Run(RunArgs),
    /// Time the Gibbs and Murty solvers on synthetic association problems.
    BenchScaling(BenchArgs),
    /// Rank assignments of an η table given as CSV.
    Assign(AssignArgs),
    /// Print a built-in scenario as TOML (a starting point for custom files).
    Scenario {
        #[arg(value_enum)]
        which: ScenarioChoice,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML config; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    scenario: Option<ScenarioChoice>,
    #[arg(long)]
    scenario_file: Option<PathBuf>,
    #[arg(long, value_enum)]
    solver: Option<SolverChoice>,
    #[arg(long)]
    h_max: Option<usize>,
    /// Number of Monte Carlo trials.
    #[arg(long = "mc")]
    mc_trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, short = 'o')]
    output_dir: Option<PathBuf>,
    #[arg(long, value_enum)]
    backend: Option<BackendChoice>,
    /// Particles per track (smc backend).
    #[arg(long)]
    particles: Option<usize>,
    #[arg(long)]
    clutter_scale: Option<f64>,
    /// Only run the first N scans.
    #[arg(long)]
    scans: Option<u32>,
    #[arg(long, value_enum)]
    gibbs_init: Option<InitChoice>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, short = 'o', default_value = "glmb-bench")]
    output_dir: PathBuf,
    #[arg(long)]
    gibbs_samples: Option<usize>,
    #[arg(long)]
    compare_samples: Option<usize>,
    /// Minimum seconds spent per timing.
    #[arg(long)]
    min_seconds: Option<f64>,
}

#[derive(Args)]
struct AssignArgs {
    /// η table: P rows, M + 2 columns ordered j = -1, 0, 1..M.
    eta_csv: PathBuf,
    /// Number of assignments (Murty) or samples (Gibbs).
    #[arg(short = 't', long, default_value_t = 10)]
    t: usize,
    #[arg(long, value_enum, default_value = "murty")]
    solver: SolverChoice,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write here instead of stdout.
    #[arg(long, short = 'o')]
    output: Option<PathBuf>,
}

fn run_command(args: RunArgs) -> CliResult<()> {
    let mut cfg = match &args.config {
        Some(p) => read_config(p)?,
        None => RunConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field {
                cfg.$field = v;
            }
        )*};
    }
    apply!(scenario, solver, h_max, mc_trials, seed, output_dir, backend, particles, clutter_scale, gibbs_init);
    if args.scenario_file.is_some() {
        cfg.scenario_file = args.scenario_file;
        if args.scenario.is_none() {
            cfg.scenario = ScenarioChoice::Custom;
        }
    }
    if args.scans.is_some() {
        cfg.scans = args.scans;
    }
    let summary = run::run(&cfg)?;
    println!(
        "{} trial(s), {} failed, mean OSPA {:.3}, mean runtime {:.3}s -> {}",
        summary.mc_trials,
        summary.failed_trials,
        summary.mean_ospa,
        summary.mean_runtime_seconds,
        cfg.output_dir.display()
    );
    if summary.failed_trials > 0 {
        return Err(CliError::Runtime(anyhow::anyhow!("{} trial(s) failed", summary.failed_trials)));
    }
    Ok(())
}

fn bench_command(args: BenchArgs) -> CliResult<()> {
    let mut cfg = BenchConfig::default();
    if let Some(t) = args.gibbs_samples {
        cfg.gibbs_samples = t;
    }
    if let Some(t) = args.compare_samples {
        cfg.compare_samples = t;
    }
    if let Some(s) = args.min_seconds {
        cfg.min_seconds = s;
    }
    if cfg.gibbs_samples == 0 || cfg.compare_samples == 0 {
        return Err(CliError::Usage("sample counts must be at least 1".into()));
    }
    let report = bench_scaling(&cfg);
    write_report(&args.output_dir, &report)?;
    println!(
        "gibbs slope in M {:.2}, in P {:.2}; murty slope in 2P+M {:.2}; speedup at P={}, M={}: {:.1}x",
        report.gibbs_slope_m,
        report.gibbs_slope_p,
        report.murty_slope_size,
        report.comparison.p,
        report.comparison.m,
        report.comparison.speedup
    );
    Ok(())
}

fn assign_command(args: AssignArgs) -> CliResult<()> {
    let text = std::fs::read_to_string(&args.eta_csv)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", args.eta_csv.display())))?;
    let problem = assign::parse_eta(&text)?;
    let ranked = assign::ranked(&problem, args.t, args.solver, args.seed)?;
    let mut out: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(std::fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    assign::write_ranked(&mut out, &problem, &ranked)?;
    out.flush()?;
    Ok(())
}

fn scenario_command(which: ScenarioChoice) -> CliResult<()> {
    let spec = match which {
        ScenarioChoice::Linear => linear_scenario(),
        ScenarioChoice::Nonlinear => nonlinear_scenario(),
        ScenarioChoice::Custom => return Err(CliError::Usage("pick linear or nonlinear".into())),
    };
    let text = toml::to_string(&spec).map_err(|e| CliError::Runtime(e.into()))?;
    print!("{text}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run_command(a),
        Command::BenchScaling(a) => bench_command(a),
        Command::Assign(a) => assign_command(a),
        Command::Scenario { which } => scenario_command(which),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
