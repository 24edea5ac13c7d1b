//! Slot-by-slot Monte Carlo of the primary queue and the secondary cascade.
//!
//! Each slot:
//! 1. the primary transmits from the slot start iff its queue is non-empty;
//! 2. the secondary accesses at the start with `ω0`, else senses at
//!    `k = 1..M` (sensed busy w.p. `1 - p_md(k)` if the primary is active,
//!    `p_fa(k)` if idle) and accesses with `ω_k` / `β_k`; the first access
//!    ends the cascade;
//! 3. overlapping transmissions both fail; a lone transmission succeeds if
//!    its block-fading draw supports the rate of its transmission time;
//! 4. a delivered primary packet leaves the head of the queue, a failed one
//!    stays for retransmission; the secondary is saturated;
//! 5. a Bernoulli(`λ_p`) arrival joins the tail after service, so it can be
//!    served no earlier than the next slot.

use std::collections::VecDeque;
use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{AccessModel, AccessPolicy, TrafficParams};
use crate::channel::{gain_threshold, FadingLink, LinkId, SystemParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sensing::SensingProfile;
use crate::stats::{binomial_std_error, BatchMeans, Z_99};

/// Batches used for the standard errors of autocorrelated estimates.
const BATCHES: u64 = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub n_slots: u64,
    /// Slots simulated before measurement starts.
    pub warmup_slots: u64,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(n_slots: u64, warmup_slots: u64, seed: u64) -> Result<Self> {
        let cfg = Self { n_slots, warmup_slots, seed };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Warmup of 5% of the horizon.
    pub fn with_default_warmup(n_slots: u64, seed: u64) -> Result<Self> {
        Self::new(n_slots, n_slots / 20, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_slots <= self.warmup_slots {
            return Err(Error::InvalidSimConfig(format!(
                "n_slots ({}) must exceed warmup_slots ({})",
                self.n_slots, self.warmup_slots
            )));
        }
        Ok(())
    }

    pub fn measured_slots(&self) -> u64 {
        self.n_slots - self.warmup_slots
    }
}

/// A value per estimated quantity.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PerQuantity {
    pub mu_p: Option<f64>,
    pub mu_s: Option<f64>,
    pub delay: Option<f64>,
    pub p_empty: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimMetrics {
    /// Primary deliveries per slot in which the primary transmitted; `None`
    /// if it never did.
    pub mu_p_hat: Option<f64>,
    /// Secondary deliveries per slot.
    pub mu_s_hat: f64,
    /// Mean slots from arrival to departure over packets departing in the
    /// measured window.
    pub delay_hat: Option<f64>,
    pub p_empty_hat: f64,
    pub std_error: PerQuantity,
    /// 99% half-widths, `Z_99 * std_error`.
    pub ci_halfwidth: PerQuantity,
    pub measured_slots: u64,
    pub busy_slots: u64,
    pub primary_successes: u64,
    pub secondary_successes: u64,
    pub collisions: u64,
    pub departures: u64,
    /// Arrivals over the whole run, warmup included.
    pub total_arrivals: u64,
    pub total_departures: u64,
    pub final_queue_length: usize,
    /// Slots with an empty queue in the measured window.
    pub idle_slots: u64,
    /// In measured empty-queue slots, how often the secondary accessed at
    /// each instant (index 0 = slot start).
    pub idle_access_counts: Vec<u64>,
}

/// One slot as seen by the trace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotRecord {
    pub slot: u64,
    /// Queue length at the start of the slot.
    pub queue_len: usize,
    pub pu_tx: bool,
    pub su_instant: Option<usize>,
    /// Sensing outcomes in order, `true` = sensed busy.
    pub sensed_busy: Vec<bool>,
    pub collision: bool,
    pub pu_success: bool,
    pub su_success: bool,
    pub arrival: bool,
}

pub const TRACE_HEADER: &str = "slot,queue_len,pu_tx,su_instant,sensed,collision,pu_success,su_success,arrival";

impl SlotRecord {
    /// Comma-separated row matching [`TRACE_HEADER`]; `sensed` is a string of
    /// `B`/`I` letters, `su_instant` is empty when the secondary stayed silent.
    pub fn to_csv_row(&self) -> String {
        let b = |x: bool| if x { '1' } else { '0' };
        let sensed: String = self.sensed_busy.iter().map(|&s| if s { 'B' } else { 'I' }).collect();
        let instant = self.su_instant.map(|k| k.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.slot,
            self.queue_len,
            b(self.pu_tx),
            instant,
            sensed,
            b(self.collision),
            b(self.pu_success),
            b(self.su_success),
            b(self.arrival)
        )
    }

    pub fn parse_csv_row(line: &str) -> Option<Self> {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return None;
        }
        let flag = |s: &str| match s {
            "0" => Some(false),
            "1" => Some(true),
            _ => None,
        };
        Some(Self {
            slot: f[0].parse().ok()?,
            queue_len: f[1].parse().ok()?,
            pu_tx: flag(f[2])?,
            su_instant: if f[3].is_empty() { None } else { Some(f[3].parse().ok()?) },
            sensed_busy: f[4].chars().map(|c| c == 'B').collect(),
            collision: flag(f[5])?,
            pu_success: flag(f[6])?,
            su_success: flag(f[7])?,
            arrival: flag(f[8])?,
        })
    }
}

struct Engine {
    omega_0: f64,
    omega: Vec<f64>,
    beta: Vec<f64>,
    p_fa: Vec<f64>,
    p_md: Vec<f64>,
    lambda: f64,
    primary: FadingLink,
    secondary: FadingLink,
    primary_threshold: Option<f64>,
    /// Gain needed by the secondary when it starts at instant k.
    secondary_thresholds: Vec<Option<f64>>,
}

impl Engine {
    fn new<S: Scalar>(
        params: &SystemParams<S>,
        profile: &SensingProfile<S>,
        policy: &AccessPolicy<S>,
        traffic: &TrafficParams<S>,
    ) -> Result<Self> {
        // Reuses the model's length and range checks.
        AccessModel::new(params, profile)?.service_rate(policy)?;
        TrafficParams::new(traffic.lambda_p)?;
        let m = params.num_instants();
        let secondary_thresholds = (0..=m)
            .map(|k| {
                gain_threshold(params, LinkId::Secondary, params.transmit_seconds_after(k))
                    .map(|t| t.map(Scalar::as_f64))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            omega_0: policy.omega_0.as_f64(),
            omega: policy.omega.iter().map(|x| x.as_f64()).collect(),
            beta: policy.beta.iter().map(|x| x.as_f64()).collect(),
            p_fa: profile.entries().iter().map(|r| r.p_fa.as_f64()).collect(),
            p_md: profile.entries().iter().map(|r| r.p_md.as_f64()).collect(),
            lambda: traffic.lambda_p.as_f64(),
            primary: FadingLink::new(params.var_primary_link.as_f64())?,
            secondary: FadingLink::new(params.var_secondary_link.as_f64())?,
            primary_threshold: gain_threshold(params, LinkId::Primary, params.slot_seconds)?.map(Scalar::as_f64),
            secondary_thresholds,
        })
    }

    /// Runs the access cascade; `sensed` collects outcomes when tracing.
    #[inline]
    fn cascade<R: Rng>(&self, rng: &mut R, pu_active: bool, mut sensed: Option<&mut Vec<bool>>) -> Option<usize> {
        if rng.random::<f64>() < self.omega_0 {
            return Some(0);
        }
        for k in 0..self.omega.len() {
            let busy_prob = if pu_active { 1.0 - self.p_md[k] } else { self.p_fa[k] };
            let busy = rng.random::<f64>() < busy_prob;
            if let Some(s) = sensed.as_deref_mut() {
                s.push(busy);
            }
            let access = if busy { self.beta[k] } else { self.omega[k] };
            if rng.random::<f64>() < access {
                return Some(k + 1);
            }
        }
        None
    }
}

/// Runs the simulation and returns post-warmup estimates.
pub fn simulate<S: Scalar>(
    params: &SystemParams<S>,
    profile: &SensingProfile<S>,
    policy: &AccessPolicy<S>,
    traffic: &TrafficParams<S>,
    sim: &SimConfig,
) -> Result<SimMetrics> {
    run(params, profile, policy, traffic, sim, None::<&mut io::Sink>).map_err(|e| match e {
        RunError::Model(e) => e,
        RunError::Io(_) => unreachable!("sink never fails"),
    })
}

/// Like [`simulate`], additionally writing one [`SlotRecord`] row per slot
/// (warmup included) under [`TRACE_HEADER`].
pub fn simulate_traced<S: Scalar, W: Write>(
    params: &SystemParams<S>,
    profile: &SensingProfile<S>,
    policy: &AccessPolicy<S>,
    traffic: &TrafficParams<S>,
    sim: &SimConfig,
    trace: &mut W,
) -> std::result::Result<SimMetrics, RunError> {
    writeln!(trace, "{TRACE_HEADER}")?;
    run(params, profile, policy, traffic, sim, Some(trace))
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] Error),
    #[error("trace output: {0}")]
    Io(#[from] io::Error),
}

fn run<S: Scalar, W: Write>(
    params: &SystemParams<S>,
    profile: &SensingProfile<S>,
    policy: &AccessPolicy<S>,
    traffic: &TrafficParams<S>,
    sim: &SimConfig,
    mut trace: Option<&mut W>,
) -> std::result::Result<SimMetrics, RunError> {
    sim.validate()?;
    let engine = Engine::new(params, profile, policy, traffic)?;
    let m = engine.omega.len();
    let mut rng = ChaCha8Rng::seed_from_u64(sim.seed);

    let measured = sim.measured_slots();
    let slot_batch = (measured / BATCHES).max(1);
    let expected_departures = (engine.lambda * measured as f64) as u64;
    let mut empty_series = BatchMeans::new(slot_batch);
    let mut su_series = BatchMeans::new(slot_batch);
    let mut delay_series = BatchMeans::new((expected_departures / BATCHES).max(1));

    let mut queue: VecDeque<u64> = VecDeque::new();
    let mut busy_slots = 0u64;
    let mut primary_successes = 0u64;
    let mut secondary_successes = 0u64;
    let mut collisions = 0u64;
    let mut total_arrivals = 0u64;
    let mut total_departures = 0u64;
    let mut idle_slots = 0u64;
    let mut idle_access_counts = vec![0u64; m + 1];
    let mut sensed = Vec::with_capacity(m);

    for slot in 0..sim.n_slots {
        let measuring = slot >= sim.warmup_slots;
        let queue_len = queue.len();
        let pu_tx = queue_len > 0;
        sensed.clear();
        let su_instant = engine.cascade(&mut rng, pu_tx, trace.is_some().then_some(&mut sensed));
        let collision = pu_tx && su_instant.is_some();
        let pu_success = pu_tx && !collision && engine.primary.decodes(&mut rng, engine.primary_threshold);
        let su_success = match su_instant {
            Some(k) if !pu_tx => engine.secondary.decodes(&mut rng, engine.secondary_thresholds[k]),
            _ => false,
        };
        if pu_success {
            let arrived = queue.pop_front().expect("transmitting queue is non-empty");
            total_departures += 1;
            if measuring {
                delay_series.push((slot - arrived) as f64);
            }
        }
        let arrival = rng.random::<f64>() < engine.lambda;
        if arrival {
            queue.push_back(slot);
            total_arrivals += 1;
        }
        if measuring {
            empty_series.push(if pu_tx { 0.0 } else { 1.0 });
            su_series.push(if su_success { 1.0 } else { 0.0 });
            if pu_tx {
                busy_slots += 1;
                primary_successes += u64::from(pu_success);
            } else {
                idle_slots += 1;
                if let Some(k) = su_instant {
                    idle_access_counts[k] += 1;
                }
            }
            secondary_successes += u64::from(su_success);
            collisions += u64::from(collision);
        }
        if let Some(w) = trace.as_deref_mut() {
            let record = SlotRecord {
                slot,
                queue_len,
                pu_tx,
                su_instant,
                sensed_busy: sensed.clone(),
                collision,
                pu_success,
                su_success,
                arrival,
            };
            writeln!(w, "{}", record.to_csv_row())?;
        }
    }

    let std_error = PerQuantity {
        mu_p: binomial_std_error(primary_successes, busy_slots),
        mu_s: su_series.std_error(),
        delay: delay_series.std_error(),
        p_empty: empty_series.std_error(),
    };
    let half = |x: Option<f64>| x.map(|se| Z_99 * se);
    Ok(SimMetrics {
        mu_p_hat: (busy_slots > 0).then(|| primary_successes as f64 / busy_slots as f64),
        mu_s_hat: su_series.mean().unwrap_or(0.0),
        delay_hat: delay_series.mean(),
        p_empty_hat: empty_series.mean().unwrap_or(0.0),
        ci_halfwidth: PerQuantity {
            mu_p: half(std_error.mu_p),
            mu_s: half(std_error.mu_s),
            delay: half(std_error.delay),
            p_empty: half(std_error.p_empty),
        },
        std_error,
        measured_slots: measured,
        busy_slots,
        primary_successes,
        secondary_successes,
        collisions,
        departures: delay_series.count(),
        total_arrivals,
        total_departures,
        final_queue_length: queue.len(),
        idle_slots,
        idle_access_counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    ServiceRate,
    SecondaryThroughput,
    EmptyProbability,
    Delay,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::ServiceRate => "mu_p",
            Quantity::SecondaryThroughput => "mu_s",
            Quantity::EmptyProbability => "p_empty",
            Quantity::Delay => "delay_p",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonRow {
    pub quantity: Quantity,
    pub analytic: f64,
    pub empirical: Option<f64>,
    pub std_error: Option<f64>,
    /// `(empirical - analytic) / std_error`; `None` when nothing was observed.
    pub z: Option<f64>,
    pub flagged: bool,
}

impl ComparisonRow {
    pub fn relative_error(&self) -> Option<f64> {
        self.empirical.map(|e| (e - self.analytic).abs() / self.analytic.abs())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub sim: SimMetrics,
}

impl ComparisonReport {
    pub const Z_LIMIT: f64 = 3.0;

    pub fn row(&self, quantity: Quantity) -> &ComparisonRow {
        self.rows.iter().find(|r| r.quantity == quantity).expect("all quantities reported")
    }

    pub fn any_flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flagged)
    }
}

fn z_score(analytic: f64, empirical: Option<f64>, se: Option<f64>) -> Option<f64> {
    let e = empirical?;
    let se = se?;
    let diff = e - analytic;
    if se > 0.0 {
        Some(diff / se)
    } else if diff.abs() <= 1e-12 {
        Some(0.0)
    } else {
        Some(f64::INFINITY.copysign(diff))
    }
}

/// Simulates `policy` and lines the estimates up against the closed forms.
/// Refuses unstable configurations, where the closed forms do not exist.
pub fn validate_against_analytic<S: Scalar>(
    params: &SystemParams<S>,
    profile: &SensingProfile<S>,
    policy: &AccessPolicy<S>,
    traffic: &TrafficParams<S>,
    sim: &SimConfig,
) -> Result<ComparisonReport> {
    let model = AccessModel::new(params, profile)?;
    let metrics = model.metrics(policy, traffic)?;
    if !metrics.stable {
        return Err(Error::UnstableQueue { lambda: traffic.lambda_p.as_f64(), mu: metrics.mu_p.as_f64() });
    }
    let measured = simulate(params, profile, policy, traffic, sim)?;
    let pairs = [
        (Quantity::ServiceRate, metrics.mu_p.as_f64(), measured.mu_p_hat, measured.std_error.mu_p),
        (Quantity::SecondaryThroughput, metrics.mu_s.as_f64(), Some(measured.mu_s_hat), measured.std_error.mu_s),
        (
            Quantity::EmptyProbability,
            metrics.p_empty.map_or(f64::NAN, Scalar::as_f64),
            Some(measured.p_empty_hat),
            measured.std_error.p_empty,
        ),
        (Quantity::Delay, metrics.delay_p.map_or(f64::NAN, Scalar::as_f64), measured.delay_hat, measured.std_error.delay),
    ];
    let rows = pairs
        .into_iter()
        .map(|(quantity, analytic, empirical, std_error)| {
            let z = z_score(analytic, empirical, std_error);
            ComparisonRow {
                quantity,
                analytic,
                empirical,
                std_error,
                z,
                flagged: z.is_some_and(|z| z.abs() > ComparisonReport::Z_LIMIT),
            }
        })
        .collect();
    Ok(ComparisonReport { rows, sim: measured })
}

#[cfg(test)]
mod tests {
    use super::*;

    const PP: f64 = 0.532_224_235_394_368_8;
    const PS: f64 = 0.997_899_907_009_757;

    fn reference() -> (SystemParams<f64>, SensingProfile<f64>) {
        (SystemParams::reference(), SensingProfile::table_one(10).unwrap())
    }

    #[test]
    fn config_validation() {
        assert!(SimConfig::new(10, 10, 0).is_err());
        let c = SimConfig::with_default_warmup(1000, 0).unwrap();
        assert_eq!(c.warmup_slots, 50);
        assert_eq!(c.measured_slots(), 950);
    }

    #[test]
    fn never_access_serves_at_link_rate() {
        let (params, profile) = reference();
        let t = TrafficParams::new(0.3).unwrap();
        let sim = SimConfig::with_default_warmup(1_000_000, 5).unwrap();
        let m = simulate(&params, &profile, &AccessPolicy::zeros(10), &t, &sim).unwrap();
        let se = m.std_error.mu_p.unwrap();
        assert!((m.mu_p_hat.unwrap() - PP).abs() <= 3.0 * se);
        assert_eq!(m.secondary_successes, 0);
        assert_eq!(m.collisions, 0);
    }

    #[test]
    fn slot_start_access_with_no_primary_traffic() {
        let (params, profile) = reference();
        let mut policy = AccessPolicy::zeros(10);
        policy.omega_0 = 1.0;
        let t = TrafficParams::new(0.0).unwrap();
        let sim = SimConfig::with_default_warmup(1_000_000, 6).unwrap();
        let m = simulate(&params, &profile, &policy, &t, &sim).unwrap();
        assert_eq!(m.mu_p_hat, None);
        assert_eq!(m.p_empty_hat, 1.0);
        let se = binomial_std_error(m.secondary_successes, m.measured_slots).unwrap();
        assert!((m.mu_s_hat - PS).abs() <= 3.0 * se, "{} vs {PS}", m.mu_s_hat);
    }

    #[test]
    fn always_colliding_queue_grows() {
        let (params, profile) = reference();
        let mut policy = AccessPolicy::zeros(10);
        policy.omega_0 = 1.0;
        let t = TrafficParams::new(0.1).unwrap();
        let sim = SimConfig::new(100_000, 0, 7).unwrap();
        let m = simulate(&params, &profile, &policy, &t, &sim).unwrap();
        assert_eq!(m.primary_successes, 0);
        assert_eq!(m.total_departures, 0);
        assert_eq!(m.final_queue_length as u64, m.total_arrivals);
        assert!((m.final_queue_length as f64 - 10_000.0).abs() < 400.0);
        assert!(validate_against_analytic(&params, &profile, &policy, &t, &sim).is_err());
    }

    #[test]
    fn fixed_seed_is_reproducible() {
        let (params, profile) = reference();
        let policy = AccessPolicy::new(0.05, vec![0.2; 10], vec![0.01; 10]).unwrap();
        let t = TrafficParams::new(0.05).unwrap();
        let sim = SimConfig::with_default_warmup(50_000, 42).unwrap();
        let a = validate_against_analytic(&params, &profile, &policy, &t, &sim).unwrap();
        let b = validate_against_analytic(&params, &profile, &policy, &t, &sim).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_load_empty_probability_is_exact() {
        let (params, profile) = reference();
        let policy = AccessPolicy::new(0.3, vec![0.5; 10], vec![0.1; 10]).unwrap();
        let t = TrafficParams::new(0.0).unwrap();
        let sim = SimConfig::with_default_warmup(20_000, 1).unwrap();
        let r = validate_against_analytic(&params, &profile, &policy, &t, &sim).unwrap();
        let row = r.row(Quantity::EmptyProbability);
        assert_eq!(row.empirical, Some(1.0));
        assert_eq!(row.analytic, 1.0);
        assert_eq!(row.z, Some(0.0));
    }

    #[test]
    fn trace_rows_round_trip() {
        let rec = SlotRecord {
            slot: 12,
            queue_len: 3,
            pu_tx: true,
            su_instant: Some(2),
            sensed_busy: vec![true, false],
            collision: true,
            pu_success: false,
            su_success: false,
            arrival: true,
        };
        assert_eq!(SlotRecord::parse_csv_row(&rec.to_csv_row()), Some(rec));
        assert_eq!(SlotRecord::parse_csv_row("1,2,3"), None);
    }
}
