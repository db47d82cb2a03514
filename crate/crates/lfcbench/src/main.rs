use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand, ValueEnum};
use lfcbench::config::RunConfig;
use lfcbench::exit;
use lfcbench::output::{write_atomic, LogTable, RunFiles, Summary};
use lfcbench::run::{execute, resolve_out_dir, WallClock};
use lfcbench::scenario_io::{read_scenario, write_scenario, write_signals, ScenarioError};
use lfcbench::{plot, report, topology_csv};
use lfcbench_core::model::AreaId;
use lfcbench_core::signals::{interpolate_to_steps, synthetic_scenario, Profile};
use lfcbench_core::topology::build_eea_topology;

#[derive(Parser, Debug)]
#[command(
    name = "lfcbench",
    version,
    about = "26-area European load-frequency control benchmark"
)]
struct Cli {
    /// Run configuration (TOML).
    #[arg(long, short = 'c', global = true)]
    config: Option<PathBuf>,
    /// Output directory [default: $LFCBENCH_OUT, else ./lfcbench-out].
    #[arg(long, short = 'o', global = true)]
    out_dir: Option<PathBuf>,
    /// More log output; repeat for more.
    #[arg(long, short = 'v', global = true, action = ArgAction::Count)]
    verbose: u8,
    /// Only errors.
    #[arg(long, short = 'q', global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic scenario CSV.
    Generate {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = ProfileArg::Calm)]
        profile: ProfileArg,
        /// Target file [default: <out-dir>/scenario-<profile>-<seed>.csv].
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Check a scenario CSV and preview the repair of missing cells.
    Validate {
        scenario: PathBuf,
        /// Also export the per-step deviation signals to this CSV.
        #[arg(long)]
        signals: Option<PathBuf>,
        #[arg(long, default_value_t = 1440)]
        steps_per_hour: usize,
    },
    /// Run a closed-loop simulation.
    Run(RunArgs),
    /// Recompute metrics from a step log and check its bookkeeping.
    Report { log: PathBuf },
    /// Draw SVG charts of a step log.
    Plot { log: PathBuf },
    /// Export the tie-line edge list.
    Topology {
        /// Target file [default: standard output].
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// Scenario CSV, or `synthetic:calm` / `synthetic:volatile`.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    controller: Option<String>,
    /// linear, pwa_ess, turbine or augmented.
    #[arg(long)]
    variant: Option<String>,
    /// Number of simulation steps K.
    #[arg(long)]
    steps: Option<usize>,
    /// Prediction horizon N.
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    steps_per_hour: Option<usize>,
    /// Worker threads for parallel controllers (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ProfileArg {
    Calm,
    Volatile,
}

impl ProfileArg {
    fn profile(self) -> Profile {
        match self {
            ProfileArg::Calm => Profile::Calm,
            ProfileArg::Volatile => Profile::Volatile,
        }
    }

    fn name(self) -> &'static str {
        match self {
            ProfileArg::Calm => "calm",
            ProfileArg::Volatile => "volatile",
        }
    }
}

/// Message plus exit code.
struct Failure(u8, String);

impl Failure {
    fn new(code: u8, msg: impl ToString) -> Self {
        Failure(code, msg.to_string())
    }
}

fn scenario_failure(e: ScenarioError) -> Failure {
    let code = match e {
        ScenarioError::Io { .. } => exit::IO,
        _ => exit::SCHEMA,
    };
    Failure::new(code, e)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { exit::USAGE } else { exit::OK };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    match dispatch(&cli) {
        Ok(()) => ExitCode::from(exit::OK),
        Err(Failure(code, msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(code)
        }
    }
}

fn base_config(cli: &Cli) -> Result<RunConfig, Failure> {
    match &cli.config {
        Some(p) => {
            let cfg = RunConfig::load(p).map_err(|e| {
                let code = match e {
                    lfcbench::config::ConfigError::Io { .. } => exit::IO,
                    _ => exit::CONFIG,
                };
                Failure::new(code, e)
            })?;
            Ok(cfg)
        }
        None => Ok(RunConfig::default()),
    }
}

fn out_dir(cli: &Cli) -> Result<PathBuf, Failure> {
    Ok(resolve_out_dir(cli.out_dir.as_deref(), &base_config(cli)?))
}

fn write_out(path: &Path, bytes: &[u8]) -> Result<(), Failure> {
    write_atomic(path, bytes).map_err(|e| Failure::new(exit::IO, e))
}

fn dispatch(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::Generate { seed, profile, output } => {
            let sc = synthetic_scenario(*seed, profile.profile());
            let mut buf = Vec::new();
            write_scenario(&sc, &mut buf).map_err(|e| Failure::new(exit::GENERIC, e))?;
            let path = match output {
                Some(p) => p.clone(),
                None => out_dir(cli)?.join(format!("scenario-{}-{seed}.csv", profile.name())),
            };
            write_out(&path, &buf)?;
            println!("{}", path.display());
            Ok(())
        }
        Command::Validate {
            scenario,
            signals,
            steps_per_hour,
        } => validate(scenario, signals.as_deref(), *steps_per_hour),
        Command::Run(args) => run(cli, args),
        Command::Report { log } => cmd_report(log),
        Command::Plot { log } => {
            let dir = match &cli.out_dir {
                Some(d) => d.clone(),
                None => log.parent().map(Path::to_path_buf).unwrap_or_default(),
            };
            let files = plot::plot_log(log, &dir).map_err(|e| {
                let code = match e {
                    plot::PlotError::Output(lfcbench::output::OutputError::Io { .. }) => exit::IO,
                    plot::PlotError::Draw(_) => exit::GENERIC,
                    _ => exit::SCHEMA,
                };
                Failure::new(code, e)
            })?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }
        Command::Topology { output } => {
            let text = topology_csv(&build_eea_topology());
            match output {
                Some(p) => write_out(p, text.as_bytes()),
                None => std::io::stdout()
                    .write_all(text.as_bytes())
                    .map_err(|e| Failure::new(exit::IO, e)),
            }
        }
    }
}

fn validate(path: &Path, signals: Option<&Path>, steps_per_hour: usize) -> Result<(), Failure> {
    let sc = read_scenario(path).map_err(scenario_failure)?;
    let mut issues = 0;
    let repaired = sc.repaired().map_err(|e| Failure::new(exit::SCHEMA, e))?;
    for (raw, fixed) in sc.series.iter().zip(&repaired.series) {
        for h in raw.missing_hours() {
            issues += 1;
            println!(
                "missing {} {} h{h:02}: repaired to {}",
                raw.area.iso_code(),
                raw.kind,
                fixed.values[h - 1].unwrap_or(f64::NAN)
            );
        }
    }
    repaired.validate().map_err(|e| Failure::new(exit::SCHEMA, e))?;
    let uncovered: Vec<&str> = AreaId::all()
        .filter(|a| {
            let i = a.index();
            let net = |h: usize| {
                let v = |k| repaired.series(i, k).values[h].unwrap_or(0.0);
                v(lfcbench_core::signals::SeriesKind::LoadMeas) - v(lfcbench_core::signals::SeriesKind::RenMeas)
            };
            (0..lfcbench_core::signals::HOURS).any(|h| net(h) > repaired.capacities[i])
        })
        .map(|a| a.iso_code())
        .collect();
    for code in &uncovered {
        issues += 1;
        println!("warning: net load of {code} exceeds its p_disp_max in some hour");
    }
    println!("{}: {} series, {issues} issues", path.display(), sc.series.len());
    if let Some(out) = signals {
        let sig = interpolate_to_steps(&repaired, steps_per_hour).map_err(|e| Failure::new(exit::CONFIG, e))?;
        let mut buf = Vec::new();
        write_signals(&sig, &mut buf).map_err(|e| Failure::new(exit::GENERIC, e))?;
        write_out(out, &buf)?;
        println!("signals written to {}", out.display());
    }
    Ok(())
}

fn run(cli: &Cli, args: &RunArgs) -> Result<(), Failure> {
    let mut cfg = base_config(cli)?;
    if let Some(s) = &args.scenario {
        cfg.scenario = s.clone();
    }
    if let Some(c) = &args.controller {
        cfg.controller = c.clone();
    }
    if let Some(v) = &args.variant {
        cfg.variant = v.clone();
    }
    if let Some(k) = args.steps {
        cfg.steps = k;
    }
    if let Some(n) = args.horizon {
        cfg.mpc.horizon = n;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(s) = args.steps_per_hour {
        cfg.steps_per_hour = s;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    let dir = resolve_out_dir(cli.out_dir.as_deref(), &cfg);
    let outcome = execute(&cfg, &dir, &mut WallClock::default()).map_err(|e| Failure::new(e.exit_code(), e))?;
    let m = &outcome.summary.metrics;
    println!("log       {}", outcome.files.log.display());
    println!("summary   {}", outcome.files.summary.display());
    println!("steps     {}", m.steps);
    println!("cost      {:.9e}", m.cumulative_cost);
    println!("max |df|  {:.6e} Hz", m.max_abs_frequency);
    println!("outside   {} s", m.time_outside_band());
    println!(
        "wall time {:.3} s (mean {:.3e} s per step)",
        m.total_wall_time, m.wall_time_mean
    );
    Ok(())
}

fn cmd_report(log: &Path) -> Result<(), Failure> {
    let table = LogTable::read(log).map_err(|e| {
        let code = match e {
            lfcbench::output::OutputError::Io { .. } => exit::IO,
            _ => exit::SCHEMA,
        };
        Failure::new(code, e)
    })?;
    let files = RunFiles::from_log(log);
    let cfg = files
        .config
        .exists()
        .then(|| RunConfig::load(&files.config))
        .transpose()
        .map_err(|e| Failure::new(exit::CONFIG, e))?;
    let summary = files
        .summary
        .exists()
        .then(|| Summary::read(&files.summary))
        .transpose()
        .map_err(|e| Failure::new(exit::IO, e))?;
    let weights = cfg.as_ref().map(RunConfig::mpc_config);
    let rep = report::analyze(&table, weights.as_ref()).map_err(|e| Failure::new(exit::SCHEMA, e))?;
    print!("{}", rep.to_text(cfg.as_ref().map(RunConfig::tau)));
    let problems = rep.problems(summary.as_ref());
    if problems.is_empty() {
        println!("bookkeeping consistent");
        Ok(())
    } else {
        Err(Failure::new(exit::GENERIC, problems.join("; ")))
    }
}
