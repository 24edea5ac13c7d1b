//! Run configuration: a TOML document with `[system]`, `[profile]`,
//! `[sweep]`, `[optimizer]` and an optional `[simulation]` table.
//!
//! ```toml
//! [system]
//! noise_density = 1e-11
//! power_primary = 3e-12
//! power_secondary = 9e-10
//! bandwidth_hz = 1e7
//! slot_seconds = 4e-4
//! sensing_quantum_seconds = 4e-5
//! packet_bits = 1000
//! var_primary_link = 1
//! var_secondary_link = 1
//!
//! [profile]
//! builtin = "table1"            # or: rows = [[1, 0.2, 0.2], [2, 0.19, 0.19], ...]
//!
//! [sweep]
//! delay_cap = 100
//! lambda_start = 0.0
//! lambda_stop = 0.6
//! lambda_step = 0.01
//! variants = ["proposed", "sp-hat", "s1", "s2", "s3", "s4", "perfect"]
//! output = "fig1.csv"           # optional, relative to the working directory
//!
//! [optimizer]                   # optional, every key defaults
//! multistarts = 64
//! grid_points_per_dim = 101
//! tolerance = 1e-9
//! max_iterations = 200
//! seed = 1
//!
//! [simulation]                  # optional; adds empirical columns to sweeps
//! n_slots = 1000000
//! warmup_slots = 50000          # optional, defaults to 5% of n_slots
//! seed = 1
//! ```
//!
//! Unknown keys are rejected everywhere.

use std::path::PathBuf;

use cogmac::optimizer::ProtocolVariant;
use cogmac::sensing::ProfileViolation;
use cogmac::{Error as ModelError, OptimizerSettings, RocPoint, SensingProfile, SimConfig, SystemParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const BUILTIN_TABLE: &str = "table1";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.into() }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct ParseOptions {
    /// Accept sensing profiles whose error probabilities rise with `k`.
    pub allow_nonmonotone_roc: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl LambdaGrid {
    /// `start, start + step, ...` up to `stop` inclusive. Points are rounded
    /// to 12 decimals so `0.1 * 3` prints as `0.3`.
    pub fn points(&self) -> Vec<f64> {
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize;
        (0..=n)
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub system: SystemParams<f64>,
    pub profile: SensingProfile<f64>,
    pub delay_cap: f64,
    pub lambda_grid: LambdaGrid,
    pub variants: Vec<ProtocolVariant>,
    pub optimizer: OptimizerSettings,
    pub simulation: Option<SimConfig>,
    pub output_path: Option<PathBuf>,
}

/// Parsed config plus monotonicity violations let through by
/// [`ParseOptions::allow_nonmonotone_roc`].
#[derive(Debug, Clone, PartialEq)]
pub struct Parsed {
    pub config: RunConfig,
    pub warnings: Vec<ProfileViolation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    system: SystemParams<f64>,
    profile: RawProfile,
    sweep: RawSweep,
    #[serde(default)]
    optimizer: OptimizerSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    simulation: Option<RawSimulation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<Vec<(usize, f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    delay_cap: f64,
    lambda_start: f64,
    lambda_stop: f64,
    lambda_step: f64,
    #[serde(default = "all_variants")]
    variants: Vec<ProtocolVariant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
}

fn all_variants() -> Vec<ProtocolVariant> {
    ProtocolVariant::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSimulation {
    n_slots: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    warmup_slots: Option<u64>,
    #[serde(default = "default_seed")]
    seed: u64,
}

fn default_seed() -> u64 {
    1
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    parse_config_with(text, ParseOptions::default()).map(|p| p.config)
}

pub fn parse_config_with(text: &str, options: ParseOptions) -> Result<Parsed, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| syntax_error(text, &e))?;
    resolve(raw, options)
}

fn syntax_error(text: &str, e: &toml::de::Error) -> ConfigError {
    let offset = e.span().map_or(0, |s| s.start).min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    ConfigError::Syntax { line, column, message: e.message().trim().to_string() }
}

fn resolve(raw: RawConfig, options: ParseOptions) -> Result<Parsed, ConfigError> {
    let system = raw.system;
    system.validate().map_err(|e| match e {
        ModelError::InvalidParameter { field, reason } => ConfigError::invalid(format!("system.{field}"), reason),
        other => ConfigError::invalid("system", other.to_string()),
    })?;

    let (profile, warnings) = resolve_profile(&raw.profile, options)?;
    let m = system.num_instants();
    if profile.len() != m {
        return Err(ConfigError::invalid(
            "profile",
            format!(
                "{} rows, but slot_seconds / sensing_quantum_seconds gives {m} sensing instants",
                profile.len()
            ),
        ));
    }

    let s = &raw.sweep;
    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
    if !(s.delay_cap > 1.0) {
        return Err(ConfigError::invalid("sweep.delay_cap", format!("must exceed 1 slot, got {}", s.delay_cap)));
    }
    for (key, v) in [("lambda_start", s.lambda_start), ("lambda_stop", s.lambda_stop)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(ConfigError::invalid(format!("sweep.{key}"), format!("must lie in [0, 1], got {v}")));
        }
    }
    if !(s.lambda_step > 0.0 && s.lambda_step.is_finite()) {
        return Err(ConfigError::invalid("sweep.lambda_step", format!("must be positive, got {}", s.lambda_step)));
    }
    if s.lambda_stop < s.lambda_start {
        return Err(ConfigError::invalid("sweep.lambda_stop", "must not be below lambda_start"));
    }
    if s.variants.is_empty() {
        return Err(ConfigError::invalid("sweep.variants", "must list at least one variant"));
    }
    for (i, v) in s.variants.iter().enumerate() {
        if s.variants[..i].contains(v) {
            return Err(ConfigError::invalid(format!("sweep.variants[{i}]"), format!("duplicate `{}`", v.name())));
        }
    }

    raw.optimizer.validate().map_err(|e| match e {
        ModelError::InvalidParameter { field, reason } => ConfigError::invalid(format!("optimizer.{field}"), reason),
        other => ConfigError::invalid("optimizer", other.to_string()),
    })?;

    let simulation = match &raw.simulation {
        None => None,
        Some(sim) => {
            let warmup = sim.warmup_slots.unwrap_or(sim.n_slots / 20);
            Some(
                SimConfig::new(sim.n_slots, warmup, sim.seed)
                    .map_err(|e| ConfigError::invalid("simulation.warmup_slots", e.to_string()))?,
            )
        }
    };

    Ok(Parsed {
        config: RunConfig {
            system,
            profile,
            delay_cap: s.delay_cap,
            lambda_grid: LambdaGrid { start: s.lambda_start, stop: s.lambda_stop, step: s.lambda_step },
            variants: s.variants.clone(),
            optimizer: raw.optimizer,
            simulation,
            output_path: s.output.clone(),
        },
        warnings,
    })
}

fn resolve_profile(
    raw: &RawProfile,
    options: ParseOptions,
) -> Result<(SensingProfile<f64>, Vec<ProfileViolation>), ConfigError> {
    let rows = match (&raw.builtin, &raw.rows) {
        (Some(name), None) if name == BUILTIN_TABLE => {
            return Ok((SensingProfile::table_one(10).expect("built-in table has ten rows"), Vec::new()));
        }
        (Some(name), None) => {
            return Err(ConfigError::invalid(
                "profile.builtin",
                format!("unknown table `{name}`, the only built-in is `{BUILTIN_TABLE}`"),
            ));
        }
        (None, Some(rows)) => rows,
        _ => return Err(ConfigError::invalid("profile", "set exactly one of `builtin` or `rows`")),
    };
    let entries = rows.iter().map(|&(k, p_fa, p_md)| RocPoint { k, p_fa, p_md }).collect();
    let result = if options.allow_nonmonotone_roc {
        SensingProfile::new_allow_nonmonotone(entries)
    } else {
        SensingProfile::new(entries).map(|p| (p, Vec::new()))
    };
    result.map_err(|e| ConfigError::invalid("profile.rows", e.to_string()))
}

impl RunConfig {
    /// Canonical TOML for this config. Profiles are always written as
    /// explicit rows; parsing the output yields an equal config.
    pub fn to_toml(&self) -> String {
        let raw = RawConfig {
            system: self.system,
            profile: RawProfile {
                builtin: None,
                rows: Some(self.profile.entries().iter().map(|r| (r.k, r.p_fa, r.p_md)).collect()),
            },
            sweep: RawSweep {
                delay_cap: self.delay_cap,
                lambda_start: self.lambda_grid.start,
                lambda_stop: self.lambda_grid.stop,
                lambda_step: self.lambda_grid.step,
                variants: self.variants.clone(),
                output: self.output_path.clone(),
            },
            optimizer: self.optimizer,
            simulation: self.simulation.map(|s| RawSimulation {
                n_slots: s.n_slots,
                warmup_slots: Some(s.warmup_slots),
                seed: s.seed,
            }),
        };
        toml::to_string(&raw).expect("config types always serialize")
    }

    /// Hex SHA-256 of [`RunConfig::to_toml`].
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Replaces the optimizer seed and, if present, the simulation seed.
    pub fn override_seed(&mut self, seed: u64) {
        self.optimizer.seed = seed;
        if let Some(sim) = &mut self.simulation {
            sim.seed = seed;
        }
    }
}
