use std::io::{self, Write};

use cogmac::optimizer::{optimize, ProtocolVariant};
use cogmac::simulator::{validate_against_analytic, ComparisonReport, Quantity};
use cogmac::{OptimizationResult, SimConfig, TrafficParams};
use rayon::prelude::*;

use crate::config::RunConfig;

const SIM_QUANTITIES: [(Quantity, &str); 4] = [
    (Quantity::ServiceRate, "mu_p"),
    (Quantity::SecondaryThroughput, "mu_s"),
    (Quantity::EmptyProbability, "p_empty"),
    (Quantity::Delay, "delay"),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub lambda_p: f64,
    pub variant: ProtocolVariant,
    pub result: OptimizationResult<f64>,
    /// Present when the config has a `[simulation]` table and the row has a
    /// feasible policy to simulate.
    pub validation: Option<ComparisonReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    pub num_instants: usize,
    pub simulated: bool,
}

impl SweepTable {
    pub fn any_flagged(&self) -> bool {
        self.rows.iter().filter_map(|r| r.validation.as_ref()).any(ComparisonReport::any_flagged)
    }

    pub fn row(&self, lambda_p: f64, variant: ProtocolVariant) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.lambda_p == lambda_p && r.variant == variant)
    }
}

/// Optimizes every (λ_p, variant) pair of the grid, on `jobs` threads (0 lets
/// rayon decide). Rows come back ordered by λ_p, then by the config's variant
/// order, whatever the scheduling.
///
/// Simulated rows use seed `simulation.seed + row index`, so each row draws
/// its own stream and the table does not depend on `jobs`.
pub fn run_sweep(config: &RunConfig, jobs: usize) -> Result<SweepTable, cogmac::Error> {
    let tasks: Vec<(f64, ProtocolVariant)> = config
        .lambda_grid
        .points()
        .into_iter()
        .flat_map(|l| config.variants.iter().map(move |&v| (l, v)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().expect("thread pool");
    let rows = pool.install(|| {
        tasks
            .par_iter()
            .enumerate()
            .map(|(i, &(lambda_p, variant))| sweep_point(config, i as u64, lambda_p, variant))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(SweepTable { rows, num_instants: config.system.num_instants(), simulated: config.simulation.is_some() })
}

fn sweep_point(
    config: &RunConfig,
    index: u64,
    lambda_p: f64,
    variant: ProtocolVariant,
) -> Result<SweepRow, cogmac::Error> {
    let traffic = TrafficParams::new(lambda_p)?;
    let result = optimize(variant, &traffic, &config.profile, &config.system, config.delay_cap, &config.optimizer)?;
    let validation = match config.simulation {
        // The bound is not a policy; there is nothing to simulate.
        Some(sim) if result.feasible && variant != ProtocolVariant::PerfectBound => {
            let sim = SimConfig { seed: sim.seed.wrapping_add(index), ..sim };
            Some(validate_against_analytic(&config.system, &config.profile, &result.policy, &traffic, &sim)?)
        }
        _ => None,
    };
    Ok(SweepRow { lambda_p, variant, result, validation })
}

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// Writes the table as CSV behind a `#` comment block holding the config
/// hash and the canonical config itself. Floats use Rust's shortest
/// round-trip formatting; missing values are empty fields.
pub fn write_csv<W: Write>(config: &RunConfig, table: &SweepTable, out: W) -> io::Result<()> {
    let mut out = io::BufWriter::new(out);
    writeln!(out, "# cogmac sweep")?;
    writeln!(out, "# config_sha256 = {}", config.hash())?;
    for line in config.to_toml().lines() {
        writeln!(out, "# {line}")?;
    }

    let m = table.num_instants;
    let mut header: Vec<String> =
        ["lambda_p", "variant", "feasible", "mu_s", "mu_p", "delay_p", "p_empty", "omega_0"].map(String::from).to_vec();
    header.extend((1..=m).map(|k| format!("omega_{k}")));
    header.extend((1..=m).map(|k| format!("beta_{k}")));
    if table.simulated {
        header.extend(SIM_QUANTITIES.iter().map(|(_, n)| format!("sim_{n}")));
        header.extend(SIM_QUANTITIES.iter().map(|(_, n)| format!("z_{n}")));
    }

    let mut w = csv::Writer::from_writer(out);
    w.write_record(&header)?;
    for row in &table.rows {
        let r = &row.result;
        let mut rec = vec![
            row.lambda_p.to_string(),
            row.variant.name().to_string(),
            r.feasible.to_string(),
            r.mu_s.to_string(),
            r.metrics.mu_p.to_string(),
            opt(r.metrics.delay_p),
            opt(r.metrics.p_empty),
            r.policy.omega_0.to_string(),
        ];
        rec.extend(r.policy.omega.iter().map(f64::to_string));
        rec.extend(r.policy.beta.iter().map(f64::to_string));
        if table.simulated {
            let v = row.validation.as_ref();
            rec.extend(SIM_QUANTITIES.iter().map(|(q, _)| opt(v.and_then(|v| v.row(*q).empirical))));
            rec.extend(SIM_QUANTITIES.iter().map(|(q, _)| opt(v.and_then(|v| v.row(*q).z))));
        }
        w.write_record(&rec)?;
    }
    w.flush()
}
