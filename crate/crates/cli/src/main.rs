use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use cogmac::optimizer::{optimize, ProtocolVariant};
use cogmac::simulator::{simulate_traced, validate_against_analytic, ComparisonReport, RunError};
use cogmac::{AccessPolicy, OptimizationResult, SimConfig, TrafficParams};
use cogmac_cli::{parse_config_with, run_sweep, write_csv, ConfigError, ParseOptions, RunConfig};

/// Optimizes and simulates multi-instant cognitive access policies.
#[derive(Parser)]
#[command(name = "cogmac", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (TOML).
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Overrides the optimizer and simulation seeds.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, value_name = "N", default_value_t = 0)]
    jobs: usize,
    /// Downgrade rising error probabilities in the sensing profile to warnings.
    #[arg(long)]
    allow_nonmonotone_roc: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize every variant over the λ_p grid and write a CSV table.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Output file; overrides `sweep.output`. Defaults to stdout.
        #[arg(long, value_name = "PATH")]
        output: Option<PathBuf>,
    },
    /// Optimize a single point and print the policy.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: f64,
        #[arg(long, default_value = "proposed")]
        variant: ProtocolVariant,
        /// Overrides `sweep.delay_cap`.
        #[arg(long)]
        delay_cap: Option<f64>,
    },
    /// Simulate one policy and compare against the closed forms.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: f64,
        /// Policy to simulate: the optimum of this variant...
        #[arg(long, default_value = "proposed", conflicts_with = "policy")]
        variant: ProtocolVariant,
        /// ...or an explicit `ω0,ω1..ωM,β1..βM` list.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        policy: Option<Vec<f64>>,
        /// Slots to simulate; overrides `[simulation]` (default 1000000).
        #[arg(long)]
        slots: Option<u64>,
        /// Also write a per-slot trace CSV.
        #[arg(long, value_name = "PATH")]
        trace: Option<PathBuf>,
    },
    /// Parse and check a config, then print its canonical form.
    ValidateConfig {
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Validation(String),
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Validation(_) => 2,
            CliError::Io { .. } => 3,
        }
    }

    fn io(context: impl Into<String>) -> impl FnOnce(io::Error) -> CliError {
        let context = context.into();
        move |source| CliError::Io { context, source }
    }
}

impl From<cogmac::Error> for CliError {
    fn from(e: cogmac::Error) -> Self {
        CliError::Config(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(&common.config).map_err(CliError::io(common.config.display().to_string()))?;
    let options = ParseOptions { allow_nonmonotone_roc: common.allow_nonmonotone_roc };
    let parsed = parse_config_with(&text, options).map_err(|e| config_error(&common.config, &e))?;
    for w in &parsed.warnings {
        eprintln!("warning: sensing profile: {w}");
    }
    let mut config = parsed.config;
    if let Some(seed) = common.seed {
        config.override_seed(seed);
    }
    Ok(config)
}

fn config_error(path: &Path, e: &ConfigError) -> CliError {
    CliError::Config(format!("{}: {e}", path.display()))
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Sweep { common, output } => {
            let config = load(&common)?;
            let table = run_sweep(&config, common.jobs)?;
            match output.or_else(|| config.output_path.clone()) {
                Some(path) => {
                    let file = File::create(&path).map_err(CliError::io(path.display().to_string()))?;
                    write_csv(&config, &table, file).map_err(CliError::io(path.display().to_string()))?;
                    eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
                }
                None => write_csv(&config, &table, io::stdout().lock()).map_err(CliError::io("stdout"))?,
            }
            if table.any_flagged() {
                return Err(CliError::Validation("a simulated estimate is more than 3 standard errors off".into()));
            }
            Ok(())
        }
        Command::Optimize { common, lambda, variant, delay_cap } => {
            let config = load(&common)?;
            let traffic = TrafficParams::new(lambda)?;
            let cap = delay_cap.unwrap_or(config.delay_cap);
            let r = optimize(variant, &traffic, &config.profile, &config.system, cap, &config.optimizer)?;
            print_result(variant, lambda, cap, &r);
            Ok(())
        }
        Command::Simulate { common, lambda, variant, policy, slots, trace } => {
            let config = load(&common)?;
            let traffic = TrafficParams::new(lambda)?;
            let policy = match policy {
                Some(flat) => {
                    let m = config.system.num_instants();
                    if flat.len() != 2 * m + 1 {
                        return Err(CliError::Config(format!("--policy needs {} values, got {}", 2 * m + 1, flat.len())));
                    }
                    AccessPolicy::from_flat(&flat)?
                }
                None => {
                    let r = optimize(variant, &traffic, &config.profile, &config.system, config.delay_cap, &config.optimizer)?;
                    if !r.feasible {
                        return Err(CliError::Config(format!("{variant} has no feasible policy at λ_p = {lambda}")));
                    }
                    r.policy
                }
            };
            let base = config.simulation.unwrap_or(SimConfig::with_default_warmup(1_000_000, config.optimizer.seed)?);
            let sim = match slots {
                Some(n) => SimConfig::with_default_warmup(n, base.seed)?,
                None => base,
            };
            let report = validate_against_analytic(&config.system, &config.profile, &policy, &traffic, &sim)?;
            if let Some(path) = trace {
                let file = File::create(&path).map_err(CliError::io(path.display().to_string()))?;
                let mut w = io::BufWriter::new(file);
                simulate_traced(&config.system, &config.profile, &policy, &traffic, &sim, &mut w).map_err(|e| match e {
                    RunError::Model(e) => e.into(),
                    RunError::Io(source) => CliError::Io { context: path.display().to_string(), source },
                })?;
                w.flush().map_err(CliError::io(path.display().to_string()))?;
            }
            print_report(&sim, &report);
            if report.any_flagged() {
                return Err(CliError::Validation("a simulated estimate is more than 3 standard errors off".into()));
            }
            Ok(())
        }
        Command::ValidateConfig { common } => {
            let config = load(&common)?;
            eprintln!(
                "ok: {} instants, {} grid points x {} variants, sha256 {}",
                config.system.num_instants(),
                config.lambda_grid.points().len(),
                config.variants.len(),
                config.hash()
            );
            print!("{}", config.to_toml());
            Ok(())
        }
    }
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_string(), |v| v.to_string())
}

fn print_result(variant: ProtocolVariant, lambda: f64, cap: f64, r: &OptimizationResult) {
    let list = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(",");
    println!("variant    {variant}");
    println!("lambda_p   {lambda}");
    println!("delay_cap  {cap}");
    println!("feasible   {}", r.feasible);
    println!("mu_s       {}", r.mu_s);
    println!("mu_p       {}", r.metrics.mu_p);
    println!("delay_p    {}", fmt_opt(r.metrics.delay_p));
    println!("p_empty    {}", fmt_opt(r.metrics.p_empty));
    println!("omega_0    {}", r.policy.omega_0);
    println!("omega      {}", list(&r.policy.omega));
    println!("beta       {}", list(&r.policy.beta));
}

fn print_report(sim: &SimConfig, report: &ComparisonReport) {
    println!("slots {} (warmup {}), seed {}", sim.n_slots, sim.warmup_slots, sim.seed);
    println!("{:<10} {:>14} {:>14} {:>12} {:>8}", "quantity", "analytic", "simulated", "std_error", "z");
    for row in &report.rows {
        println!(
            "{:<10} {:>14.8} {:>14} {:>12} {:>8}{}",
            row.quantity.name(),
            row.analytic,
            row.empirical.map_or("-".into(), |v| format!("{v:.8}")),
            row.std_error.map_or("-".into(), |v| format!("{v:.3e}")),
            row.z.map_or("-".into(), |v| format!("{v:.2}")),
            if row.flagged { "  !" } else { "" }
        );
    }
}
