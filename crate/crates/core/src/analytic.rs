//! Closed-form performance of an access policy.
//!
//! Per slot the secondary user runs a cascade: access at the slot start with
//! probability `ω0`; otherwise, at each instant `k = 1..M`, sense and access
//! with `ω_k` when the channel looks idle or `β_k` when it looks busy. Sensing
//! outcomes at different instants are independent given the true primary
//! state, which turns every path probability into a product of per-instant
//! factors:
//!
//! * busy slot, no access at `k`:  `p_md(k) (1 - ω_k) + (1 - p_md(k)) (1 - β_k)`
//! * idle slot, no access at `k`:  `(1 - p_fa(k)) (1 - ω_k) + p_fa(k) (1 - β_k)`
//! * idle slot, access at `k`:     `(1 - p_fa(k)) ω_k + p_fa(k) β_k`
//!
//! The primary is served only when the secondary stays silent all slot long;
//! the secondary delivers only in slots where the primary queue is empty.

use crate::channel::{success_probability, LinkId, SystemParams};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sensing::SensingProfile;

/// Access probabilities `(ω0, ω_1..ω_M, β_1..β_M)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessPolicy<S = f64> {
    pub omega_0: S,
    pub omega: Vec<S>,
    pub beta: Vec<S>,
}

impl<S: Scalar> AccessPolicy<S> {
    pub fn new(omega_0: S, omega: Vec<S>, beta: Vec<S>) -> Result<Self> {
        let policy = Self { omega_0, omega, beta };
        policy.validate()?;
        Ok(policy)
    }

    /// The policy that never accesses.
    pub fn zeros(m: usize) -> Self {
        Self { omega_0: S::zero(), omega: vec![S::zero(); m], beta: vec![S::zero(); m] }
    }

    pub fn num_instants(&self) -> usize {
        self.omega.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.omega.len() != self.beta.len() {
            return Err(Error::LengthMismatch { expected: self.omega.len(), found: self.beta.len() });
        }
        if self.omega.is_empty() {
            return Err(Error::LengthMismatch { expected: 1, found: 0 });
        }
        check_probability("omega_0", self.omega_0)?;
        for &w in &self.omega {
            check_probability("omega", w)?;
        }
        for &b in &self.beta {
            check_probability("beta", b)?;
        }
        Ok(())
    }

    /// Flat layout `[ω0, ω_1..ω_M, β_1..β_M]`.
    pub fn to_flat(&self) -> Vec<S> {
        let mut flat = Vec::with_capacity(1 + 2 * self.omega.len());
        flat.push(self.omega_0);
        flat.extend_from_slice(&self.omega);
        flat.extend_from_slice(&self.beta);
        flat
    }

    pub fn from_flat(flat: &[S]) -> Result<Self> {
        if flat.len() < 3 || flat.len().is_multiple_of(2) {
            return Err(Error::InvalidParameter {
                field: "policy",
                reason: format!("flat vector must have odd length 2M+1 >= 3, got {}", flat.len()),
            });
        }
        let m = (flat.len() - 1) / 2;
        Self::new(flat[0], flat[1..=m].to_vec(), flat[m + 1..].to_vec())
    }
}

fn check_probability<S: Scalar>(what: &'static str, value: S) -> Result<()> {
    if value >= S::zero() && value <= S::one() {
        Ok(())
    } else {
        Err(Error::InvalidProbability { what, value: value.as_f64() })
    }
}

/// Mean primary arrivals per slot (Bernoulli).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrafficParams<S = f64> {
    pub lambda_p: S,
}

impl<S: Scalar> TrafficParams<S> {
    pub fn new(lambda_p: S) -> Result<Self> {
        check_probability("lambda_p", lambda_p)?;
        Ok(Self { lambda_p })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalyticMetrics<S = f64> {
    pub mu_p: S,
    /// Zero when the primary queue is unstable (it is almost never empty),
    /// except with no arrivals at all, where the queue stays empty.
    pub mu_s: S,
    pub delay_p: Option<S>,
    pub p_empty: Option<S>,
    pub stable: bool,
}

/// Per-instant view of the cascade. Index 0 is the slot start.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessBreakdown<S = f64> {
    /// P(secondary accesses at instant k | primary idle).
    pub idle_access: Vec<S>,
    /// P(secondary accesses at instant k | primary busy).
    pub busy_access: Vec<S>,
    /// P(secondary still silent when reaching instant k | primary idle); `idle_reach[0] = 1`.
    pub idle_reach: Vec<S>,
    pub idle_silent: S,
    pub busy_silent: S,
    /// Secondary packet success when accessing at instant k.
    pub secondary_success: Vec<S>,
}

/// Policy-independent pieces of the model: link success probabilities per
/// access instant and the sensing profile.
#[derive(Debug, Clone, PartialEq)]
pub struct AccessModel<S = f64> {
    primary_success: S,
    secondary_success: Vec<S>,
    p_fa: Vec<S>,
    p_md: Vec<S>,
}

impl<S: Scalar> AccessModel<S> {
    pub fn new(params: &SystemParams<S>, profile: &SensingProfile<S>) -> Result<Self> {
        params.validate()?;
        let m = params.num_instants();
        if profile.len() != m {
            return Err(Error::LengthMismatch { expected: m, found: profile.len() });
        }
        let primary_success = success_probability(params, LinkId::Primary, params.slot_seconds)?;
        let secondary_success = (0..=m)
            .map(|k| success_probability(params, LinkId::Secondary, params.transmit_seconds_after(k)))
            .collect::<Result<Vec<_>>>()?;
        let (p_fa, p_md) = profile.entries().iter().map(|r| (r.p_fa, r.p_md)).unzip();
        Ok(Self { primary_success, secondary_success, p_fa, p_md })
    }

    pub fn num_instants(&self) -> usize {
        self.p_fa.len()
    }

    /// Primary success over a full slot without interference.
    pub fn primary_success(&self) -> S {
        self.primary_success
    }

    /// Secondary success when accessing at instant `k` (0 = slot start).
    pub fn secondary_success(&self, k: usize) -> S {
        self.secondary_success[k]
    }

    fn check(&self, policy: &AccessPolicy<S>) -> Result<()> {
        policy.validate()?;
        if policy.num_instants() != self.num_instants() {
            return Err(Error::LengthMismatch {
                expected: self.num_instants(),
                found: policy.num_instants(),
            });
        }
        Ok(())
    }

    /// `(μ_p, G)` for a flat policy `[ω0, ω.., β..]`, where `G` is the
    /// secondary delivery probability in a slot with an empty primary queue.
    /// No validation; the slice must have length `2M + 1`.
    pub fn rates_flat(&self, flat: &[S]) -> (S, S) {
        let m = self.num_instants();
        debug_assert_eq!(flat.len(), 2 * m + 1);
        let one = S::one();
        let omega_0 = flat[0];
        let mut busy_silent = one - omega_0;
        let mut idle_reach = one;
        let mut sensed_gain = S::zero();
        for k in 0..m {
            let (w, b) = (flat[1 + k], flat[1 + m + k]);
            let (fa, md) = (self.p_fa[k], self.p_md[k]);
            busy_silent = busy_silent * (md * (one - w) + (one - md) * (one - b));
            let access = (one - fa) * w + fa * b;
            sensed_gain = sensed_gain + idle_reach * access * self.secondary_success[k + 1];
            idle_reach = idle_reach * ((one - fa) * (one - w) + fa * (one - b));
        }
        let mu_p = self.primary_success * busy_silent;
        let gain = omega_0 * self.secondary_success[0] + (one - omega_0) * sensed_gain;
        (mu_p, gain)
    }

    /// Primary service rate `μ_p`.
    pub fn service_rate(&self, policy: &AccessPolicy<S>) -> Result<S> {
        self.check(policy)?;
        Ok(self.rates_flat(&policy.to_flat()).0)
    }

    /// Secondary delivery probability in a slot where the primary is idle.
    pub fn idle_slot_gain(&self, policy: &AccessPolicy<S>) -> Result<S> {
        self.check(policy)?;
        Ok(self.rates_flat(&policy.to_flat()).1)
    }

    pub fn breakdown(&self, policy: &AccessPolicy<S>) -> Result<AccessBreakdown<S>> {
        self.check(policy)?;
        let m = self.num_instants();
        let one = S::one();
        let mut idle_access = Vec::with_capacity(m + 1);
        let mut busy_access = Vec::with_capacity(m + 1);
        let mut idle_reach = Vec::with_capacity(m + 1);
        idle_access.push(policy.omega_0);
        busy_access.push(policy.omega_0);
        idle_reach.push(one);
        let mut idle = one - policy.omega_0;
        let mut busy = one - policy.omega_0;
        for k in 0..m {
            let (w, b) = (policy.omega[k], policy.beta[k]);
            let (fa, md) = (self.p_fa[k], self.p_md[k]);
            idle_reach.push(idle);
            idle_access.push(idle * ((one - fa) * w + fa * b));
            busy_access.push(busy * (md * w + (one - md) * b));
            idle = idle * ((one - fa) * (one - w) + fa * (one - b));
            busy = busy * (md * (one - w) + (one - md) * (one - b));
        }
        Ok(AccessBreakdown {
            idle_access,
            busy_access,
            idle_reach,
            idle_silent: idle,
            busy_silent: busy,
            secondary_success: self.secondary_success.clone(),
        })
    }

    pub fn metrics(&self, policy: &AccessPolicy<S>, traffic: &TrafficParams<S>) -> Result<AnalyticMetrics<S>> {
        self.check(policy)?;
        let (mu_p, gain) = self.rates_flat(&policy.to_flat());
        Ok(metrics_from_rates(traffic.lambda_p, mu_p, gain))
    }
}

pub(crate) fn metrics_from_rates<S: Scalar>(lambda_p: S, mu_p: S, gain: S) -> AnalyticMetrics<S> {
    let traffic = TrafficParams { lambda_p };
    let stable = is_stable(&traffic, mu_p);
    if lambda_p == S::zero() && !stable {
        // No arrivals: the queue is empty forever even though μ_p = 0.
        return AnalyticMetrics { mu_p, mu_s: gain, delay_p: None, p_empty: Some(S::one()), stable };
    }
    if stable {
        let p_empty = S::one() - lambda_p / mu_p;
        AnalyticMetrics {
            mu_p,
            mu_s: p_empty * gain,
            delay_p: Some((S::one() - lambda_p) / (mu_p - lambda_p)),
            p_empty: Some(p_empty),
            stable,
        }
    } else {
        AnalyticMetrics { mu_p, mu_s: S::zero(), delay_p: None, p_empty: None, stable }
    }
}

/// Average primary service rate `μ_p`.
pub fn primary_service_rate<S: Scalar>(
    policy: &AccessPolicy<S>,
    profile: &SensingProfile<S>,
    params: &SystemParams<S>,
) -> Result<S> {
    AccessModel::new(params, profile)?.service_rate(policy)
}

/// Loynes criterion with strict inequality: `λ_p < μ_p`.
pub fn is_stable<S: Scalar>(traffic: &TrafficParams<S>, mu_p: S) -> bool {
    traffic.lambda_p < mu_p
}

fn require_stable<S: Scalar>(traffic: &TrafficParams<S>, mu_p: S) -> Result<()> {
    if is_stable(traffic, mu_p) {
        Ok(())
    } else {
        Err(Error::UnstableQueue { lambda: traffic.lambda_p.as_f64(), mu: mu_p.as_f64() })
    }
}

/// Probability the primary queue is empty, `1 - λ_p/μ_p`.
pub fn primary_empty_probability<S: Scalar>(traffic: &TrafficParams<S>, mu_p: S) -> Result<S> {
    require_stable(traffic, mu_p)?;
    Ok(S::one() - traffic.lambda_p / mu_p)
}

/// Mean primary sojourn in slots, `(1 - λ_p) / (μ_p - λ_p)`.
pub fn primary_delay<S: Scalar>(traffic: &TrafficParams<S>, mu_p: S) -> Result<S> {
    require_stable(traffic, mu_p)?;
    Ok((S::one() - traffic.lambda_p) / (mu_p - traffic.lambda_p))
}

/// Secondary throughput `μ_s` in packets per slot. Without primary arrivals
/// the queue is always empty, so any `μ_p`, zero included, is accepted.
pub fn secondary_throughput<S: Scalar>(
    policy: &AccessPolicy<S>,
    profile: &SensingProfile<S>,
    params: &SystemParams<S>,
    traffic: &TrafficParams<S>,
) -> Result<S> {
    let model = AccessModel::new(params, profile)?;
    model.check(policy)?;
    let (mu_p, gain) = model.rates_flat(&policy.to_flat());
    if traffic.lambda_p == S::zero() {
        return Ok(gain);
    }
    let p_empty = primary_empty_probability(traffic, mu_p)?;
    Ok(p_empty * gain)
}

fn check_delay_cap<S: Scalar>(delay_cap: S) -> Result<()> {
    if delay_cap > S::one() {
        Ok(())
    } else {
        Err(Error::DelayCapTooSmall(delay_cap.as_f64()))
    }
}

/// Largest arrival rate for which the never-access policy still meets the
/// delay cap: `(P̄_p 𝒟 - 1) / (𝒟 - 1)` clamped to `[0, 1]`. An infinite cap
/// reduces to the stability limit `P̄_p`.
pub fn max_feasible_arrival<S: Scalar>(params: &SystemParams<S>, delay_cap: S) -> Result<S> {
    check_delay_cap(delay_cap)?;
    let p = success_probability(params, LinkId::Primary, params.slot_seconds)?;
    if delay_cap.is_infinite() {
        return Ok(p);
    }
    let limit = (p * delay_cap - S::one()) / (delay_cap - S::one());
    Ok(limit.max(S::zero()).min(S::one()))
}

/// Throughput when the secondary knows idle slots for free and never
/// collides: `(1 - λ_p/P̄_p) P̄_s(T)`, or `None` past the delay-feasible range.
pub fn perfect_bound<S: Scalar>(
    traffic: &TrafficParams<S>,
    params: &SystemParams<S>,
    delay_cap: S,
) -> Result<Option<S>> {
    let limit = max_feasible_arrival(params, delay_cap)?;
    if traffic.lambda_p > limit {
        return Ok(None);
    }
    let pp = success_probability(params, LinkId::Primary, params.slot_seconds)?;
    let ps = success_probability(params, LinkId::Secondary, params.slot_seconds)?;
    Ok(Some((S::one() - traffic.lambda_p / pp) * ps))
}

/// Smallest `μ_p` meeting both stability and the delay cap:
/// `λ_p + (1 - λ_p)/𝒟`.
pub fn required_service_rate<S: Scalar>(lambda_p: S, delay_cap: S) -> S {
    lambda_p + (S::one() - lambda_p) / delay_cap
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const PP: f64 = 0.532_224_235_394_368_8;
    const PS: f64 = 0.997_899_907_009_757;

    fn setup() -> (SystemParams<f64>, SensingProfile<f64>) {
        (SystemParams::reference(), SensingProfile::table_one(10).unwrap())
    }

    fn traffic(l: f64) -> TrafficParams<f64> {
        TrafficParams::new(l).unwrap()
    }

    #[test]
    fn service_rate_extremes() {
        let (params, profile) = setup();
        let zero = AccessPolicy::zeros(10);
        assert_abs_diff_eq!(primary_service_rate(&zero, &profile, &params).unwrap(), PP, epsilon = 1e-12);
        let mut always = AccessPolicy::zeros(10);
        always.omega_0 = 1.0;
        assert_eq!(primary_service_rate(&always, &profile, &params).unwrap(), 0.0);
    }

    #[test]
    fn service_rate_two_instants_half_access() {
        // Each bracket is p_md/2 + (1 - p_md)/2 = 1/2.
        let params = SystemParams::reference().with_sensing_quantum(1.5e-4);
        let profile = SensingProfile::table_one_truncated(2).unwrap();
        let policy = AccessPolicy::new(0.0, vec![0.5, 0.5], vec![0.5, 0.5]).unwrap();
        let mu = primary_service_rate(&policy, &profile, &params).unwrap();
        assert_abs_diff_eq!(mu, PP * 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(mu, 0.1331, epsilon = 1e-3);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let (params, profile) = setup();
        let policy = AccessPolicy::<f64>::zeros(3);
        assert_eq!(
            primary_service_rate(&policy, &profile, &params),
            Err(Error::LengthMismatch { expected: 10, found: 3 })
        );
        let short = SensingProfile::table_one_truncated(4).unwrap();
        assert!(matches!(AccessModel::new(&params, &short), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn empty_probability_and_delay() {
        assert_eq!(primary_empty_probability(&traffic(0.0), 0.4).unwrap(), 1.0);
        assert_abs_diff_eq!(primary_empty_probability(&traffic(0.2), 0.4).unwrap(), 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(primary_empty_probability(&traffic(0.3), 0.5322).unwrap(), 0.4363, epsilon = 1e-3);
        assert_abs_diff_eq!(primary_delay(&traffic(0.0), 0.25).unwrap(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(primary_delay(&traffic(0.3), 0.5322).unwrap(), 3.015, epsilon = 1e-2);
        assert_eq!(primary_delay(&traffic(0.0), 1.0).unwrap(), 1.0);
        assert!(matches!(primary_delay(&traffic(0.5), 0.5), Err(Error::UnstableQueue { .. })));
        assert!(matches!(primary_empty_probability(&traffic(0.6), 0.5), Err(Error::UnstableQueue { .. })));
    }

    #[test]
    fn stability_is_strict() {
        assert!(!is_stable(&traffic(0.5), 0.5));
        assert!(is_stable(&traffic(0.0), 1e-9));
        assert!(is_stable(&traffic(0.3), 0.5322));
    }

    #[test]
    fn secondary_throughput_cases() {
        let (params, profile) = setup();
        let zero = AccessPolicy::zeros(10);
        assert_eq!(secondary_throughput(&zero, &profile, &params, &traffic(0.2)).unwrap(), 0.0);

        let mut start = AccessPolicy::zeros(10);
        start.omega_0 = 1.0;
        assert_abs_diff_eq!(
            secondary_throughput(&start, &profile, &params, &traffic(0.0)).unwrap(),
            PS,
            epsilon = 1e-12
        );
        // Unstable: μ_p = 0.
        assert!(secondary_throughput(&start, &profile, &params, &traffic(0.1)).is_err());

        // M = 1 needs τ > T/2; with τ = 0.6T only the instant-1 term remains.
        let p1 = SystemParams::reference().with_sensing_quantum(2.4e-4);
        let prof1 = SensingProfile::table_one_truncated(1).unwrap();
        let pol = AccessPolicy::new(0.0, vec![1.0], vec![0.0]).unwrap();
        let got = secondary_throughput(&pol, &prof1, &p1, &traffic(0.0)).unwrap();
        let ps_left = success_probability(&p1, LinkId::Secondary, 1.6e-4).unwrap();
        assert_abs_diff_eq!(got, 0.8 * ps_left, epsilon = 1e-12);
    }

    #[test]
    fn single_instant_at_nine_tenths_of_slot() {
        // Access only at instant 1 of 10 after sensing idle.
        let (params, profile) = setup();
        let mut flat = vec![0.0; 21];
        flat[1] = 1.0;
        let model = AccessModel::new(&params, &profile).unwrap();
        let (_, gain) = model.rates_flat(&flat);
        // 0.8 * P̄_s(0.9T), with P̄_s(0.9T) = 0.997643602154362 at 30 digits.
        assert_abs_diff_eq!(gain, 0.8 * 0.997_643_602_154_362, epsilon = 1e-12);
    }

    #[test]
    fn last_instant_contributes_nothing_when_slot_is_used_up() {
        let (params, profile) = setup();
        let model = AccessModel::new(&params, &profile).unwrap();
        assert_eq!(model.secondary_success(10), 0.0);
        let mut policy = AccessPolicy::zeros(10);
        policy.omega[9] = 1.0;
        policy.beta[9] = 1.0;
        assert_eq!(model.idle_slot_gain(&policy).unwrap(), 0.0);
    }

    #[test]
    fn perfect_bound_and_cutoffs() {
        let params = SystemParams::reference();
        assert_abs_diff_eq!(perfect_bound(&traffic(0.0), &params, 100.0).unwrap().unwrap(), PS, epsilon = 1e-12);
        // (P̄_p·𝒟 − 1)/(𝒟 − 1) at 30 digits: 0.527499227671, 0.376298980526.
        let c100 = max_feasible_arrival(&params, 100.0).unwrap();
        let c4 = max_feasible_arrival(&params, 4.0).unwrap();
        assert_abs_diff_eq!(c100, 0.527_499_227_671_079_6, epsilon = 1e-12);
        assert_abs_diff_eq!(c4, 0.376_298_980_525_825, epsilon = 1e-12);
        assert!(perfect_bound(&traffic(0.52), &params, 100.0).unwrap().is_some());
        assert!(perfect_bound(&traffic(0.53), &params, 100.0).unwrap().is_none());
        assert!(perfect_bound(&traffic(0.38), &params, 4.0).unwrap().is_none());
        assert_eq!(perfect_bound(&traffic(0.1), &params, 1.0), Err(Error::DelayCapTooSmall(1.0)));
        assert_abs_diff_eq!(max_feasible_arrival(&params, f64::INFINITY).unwrap(), PP, epsilon = 1e-15);
        assert_abs_diff_eq!(max_feasible_arrival(&params, 1e12).unwrap(), PP, epsilon = 1e-9);
        assert_eq!(max_feasible_arrival(&params, 1.5).unwrap(), 0.0);
    }

    #[test]
    fn metrics_report_instability() {
        let (params, profile) = setup();
        let model = AccessModel::new(&params, &profile).unwrap();
        let m = model.metrics(&AccessPolicy::zeros(10), &traffic(0.6)).unwrap();
        assert!(!m.stable);
        assert_eq!(m.delay_p, None);
        assert_eq!(m.mu_s, 0.0);
        let m = model.metrics(&AccessPolicy::zeros(10), &traffic(0.3)).unwrap();
        assert!(m.stable);
        assert!(m.delay_p.unwrap() >= 1.0);
    }

    #[test]
    fn breakdown_sums_to_one() {
        let (params, profile) = setup();
        let model = AccessModel::new(&params, &profile).unwrap();
        let policy = AccessPolicy::new(0.1, vec![0.3; 10], vec![0.05; 10]).unwrap();
        let b = model.breakdown(&policy).unwrap();
        let idle: f64 = b.idle_access.iter().sum::<f64>() + b.idle_silent;
        let busy: f64 = b.busy_access.iter().sum::<f64>() + b.busy_silent;
        assert_abs_diff_eq!(idle, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(busy, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(b.busy_silent * model.primary_success(), model.service_rate(&policy).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn policy_validation() {
        assert!(AccessPolicy::new(1.1, vec![0.0], vec![0.0]).is_err());
        assert!(AccessPolicy::new(0.0, vec![0.0, 0.2], vec![0.0]).is_err());
        assert!(AccessPolicy::<f64>::new(0.0, vec![], vec![]).is_err());
        let p = AccessPolicy::new(0.1, vec![0.2, 0.3], vec![0.4, 0.5]).unwrap();
        assert_eq!(AccessPolicy::from_flat(&p.to_flat()).unwrap(), p);
    }
}
