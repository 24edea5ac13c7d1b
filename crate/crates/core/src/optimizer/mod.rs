//! Maximizes secondary throughput over a variant's access probabilities
//! subject to primary stability (`λ_p < μ_p`) and the delay cap
//! (`D_p <= 𝒟`).
//!
//! Both constraints collapse to `μ_p >= λ_p + (1 - λ_p)/𝒟`, and `μ_p` is
//! non-increasing and affine in every single access probability. The search
//! exploits this: points past the constraint are never evaluated for their
//! objective, and moves that would cross it are pulled back onto it either
//! along the moved coordinate or by lowering one other coordinate.

mod grid;
mod search;
mod variant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{metrics_from_rates, perfect_bound, AccessModel, AccessPolicy, AnalyticMetrics, TrafficParams};
use crate::channel::SystemParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sensing::SensingProfile;

pub use grid::{grid_oracle, GRID_ORACLE_MAX_FREE};
pub use variant::{variant_constraints, ProtocolVariant, UnknownVariant, VariantConstraints};

use search::{Candidate, Problem};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerSettings {
    /// Number of local searches; the first always starts from the
    /// never-access policy.
    pub multistarts: usize,
    pub grid_points_per_dim: usize,
    /// Smallest step of the local search, and the objective band used for
    /// tie-breaking.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub seed: u64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self { multistarts: 64, grid_points_per_dim: 101, tolerance: 1e-9, max_iterations: 200, seed: 1 }
    }
}

impl OptimizerSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |field, reason: &str| Err(Error::InvalidParameter { field, reason: reason.to_string() });
        if self.multistarts == 0 {
            return bad("multistarts", "must be at least 1");
        }
        if self.grid_points_per_dim < 2 {
            return bad("grid_points_per_dim", "must be at least 2");
        }
        if self.max_iterations == 0 {
            return bad("max_iterations", "must be at least 1");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return bad("tolerance", "must be finite and positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizationResult<S = f64> {
    pub policy: AccessPolicy<S>,
    pub mu_s: S,
    pub feasible: bool,
    pub metrics: AnalyticMetrics<S>,
}

impl<S: Scalar> OptimizationResult<S> {
    fn infeasible(model: &AccessModel<S>, lambda_p: S) -> Self {
        let policy = AccessPolicy::zeros(model.num_instants());
        let (mu_p, gain) = model.rates_flat(&policy.to_flat());
        let mut metrics = metrics_from_rates(lambda_p, mu_p, gain);
        metrics.mu_s = S::zero();
        Self { policy, mu_s: S::zero(), feasible: false, metrics }
    }

    fn from_flat(model: &AccessModel<S>, lambda_p: S, flat: &[S]) -> Self {
        let (mu_p, gain) = model.rates_flat(flat);
        let metrics = metrics_from_rates(lambda_p, mu_p, gain);
        let policy = AccessPolicy::from_flat(flat).expect("search stays inside the box");
        Self { policy, mu_s: metrics.mu_s, feasible: true, metrics }
    }
}

/// Stability plus delay cap on a given service rate.
pub(crate) fn meets_constraints<S: Scalar>(lambda_p: S, mu_p: S, delay_cap: S) -> bool {
    lambda_p < mu_p && (S::one() - lambda_p) / (mu_p - lambda_p) <= delay_cap
}

/// Whether `policy` satisfies every constraint of the throughput program.
pub fn is_feasible<S: Scalar>(
    policy: &AccessPolicy<S>,
    traffic: &TrafficParams<S>,
    profile: &SensingProfile<S>,
    params: &SystemParams<S>,
    delay_cap: S,
) -> bool {
    let Ok(model) = AccessModel::new(params, profile) else {
        return false;
    };
    match model.service_rate(policy) {
        Ok(mu_p) => meets_constraints(traffic.lambda_p, mu_p, delay_cap),
        Err(_) => false,
    }
}

fn closed_form_bound<S: Scalar>(
    model: &AccessModel<S>,
    traffic: &TrafficParams<S>,
    params: &SystemParams<S>,
    delay_cap: S,
) -> Result<OptimizationResult<S>> {
    let policy = AccessPolicy::zeros(model.num_instants());
    let mu_p = model.primary_success();
    let mut metrics = metrics_from_rates(traffic.lambda_p, mu_p, S::zero());
    match perfect_bound(traffic, params, delay_cap)? {
        Some(bound) => {
            metrics.mu_s = bound;
            Ok(OptimizationResult { policy, mu_s: bound, feasible: true, metrics })
        }
        None => Ok(OptimizationResult { policy, mu_s: S::zero(), feasible: false, metrics }),
    }
}

fn check_inputs<S: Scalar>(traffic: &TrafficParams<S>, delay_cap: S) -> Result<()> {
    TrafficParams::new(traffic.lambda_p)?;
    // Negated so NaN is rejected too.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    if !(delay_cap > S::one()) {
        return Err(Error::DelayCapTooSmall(delay_cap.as_f64()));
    }
    Ok(())
}

/// Best policy of `variant` found by multistart local search.
///
/// Start 0 is the never-access policy (the most protective point; if it is
/// infeasible nothing is). The others are uniform draws over the free
/// entries, scaled toward zero until feasible. Start `i` draws from stream `i`
/// of a ChaCha generator seeded with `settings.seed`, so results do not depend
/// on how starts are scheduled.
pub fn optimize<S: Scalar>(
    variant: ProtocolVariant,
    traffic: &TrafficParams<S>,
    profile: &SensingProfile<S>,
    params: &SystemParams<S>,
    delay_cap: S,
    settings: &OptimizerSettings,
) -> Result<OptimizationResult<S>> {
    settings.validate()?;
    check_inputs(traffic, delay_cap)?;
    let model = AccessModel::new(params, profile)?;
    if variant == ProtocolVariant::PerfectBound {
        return closed_form_bound(&model, traffic, params, delay_cap);
    }
    let constraints = variant_constraints(variant, model.num_instants());
    let problem = Problem::new(&model, &constraints, traffic.lambda_p, delay_cap);

    let base = constraints.base_point();
    let Some(base_value) = problem.evaluate(&base) else {
        return Ok(OptimizationResult::infeasible(&model, traffic.lambda_p));
    };
    let step_floor = S::lit(settings.tolerance);
    let mut found = vec![problem.local_search(Candidate { point: base, value: base_value }, step_floor, settings.max_iterations)];
    if problem.free().is_empty() {
        return Ok(OptimizationResult::from_flat(&model, traffic.lambda_p, &found[0].point));
    }
    for start in 1..settings.multistarts {
        let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
        rng.set_stream(start as u64);
        if let Some(initial) = problem.random_start(&mut rng) {
            found.push(problem.local_search(initial, step_floor, settings.max_iterations));
        }
    }
    let best = select_best(&found, S::lit(settings.tolerance));
    Ok(OptimizationResult::from_flat(&model, traffic.lambda_p, &best.point))
}

/// Highest objective; within `tolerance` of it, the largest `μ_p`; then the
/// earliest start.
fn select_best<S: Scalar>(found: &[Candidate<S>], tolerance: S) -> &Candidate<S> {
    let top = found.iter().map(|c| c.value.mu_s).fold(S::neg_infinity(), S::max);
    let mut best: Option<&Candidate<S>> = None;
    for c in found.iter().filter(|c| c.value.mu_s >= top - tolerance) {
        if best.is_none_or(|b| c.value.mu_p > b.value.mu_p) {
            best = Some(c);
        }
    }
    best.expect("at least one candidate")
}
