use rand::Rng;

use crate::analytic::{metrics_from_rates, required_service_rate, AccessModel};
use crate::scalar::Scalar;

use super::{meets_constraints, VariantConstraints};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Value<S> {
    pub mu_s: S,
    pub mu_p: S,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Candidate<S> {
    pub point: Vec<S>,
    pub value: Value<S>,
}

pub(crate) struct Problem<'a, S> {
    model: &'a AccessModel<S>,
    base: Vec<S>,
    free: Vec<usize>,
    lambda_p: S,
    delay_cap: S,
    target_mu_p: S,
}

impl<'a, S: Scalar> Problem<'a, S> {
    pub fn new(model: &'a AccessModel<S>, constraints: &VariantConstraints<S>, lambda_p: S, delay_cap: S) -> Self {
        Self {
            model,
            base: constraints.base_point(),
            free: constraints.free_indices(),
            lambda_p,
            delay_cap,
            target_mu_p: required_service_rate(lambda_p, delay_cap),
        }
    }

    pub fn free(&self) -> &[usize] {
        &self.free
    }

    fn mu_p(&self, point: &[S]) -> S {
        self.model.rates_flat(point).0
    }

    /// Objective and service rate, or `None` if the point violates a constraint.
    pub fn evaluate(&self, point: &[S]) -> Option<Value<S>> {
        let (mu_p, gain) = self.model.rates_flat(point);
        if !meets_constraints(self.lambda_p, mu_p, self.delay_cap) {
            return None;
        }
        Some(Value { mu_s: metrics_from_rates(self.lambda_p, mu_p, gain).mu_s, mu_p })
    }

    fn feasible(&self, point: &[S]) -> bool {
        meets_constraints(self.lambda_p, self.mu_p(point), self.delay_cap)
    }

    /// Largest value of entry `j` keeping the point feasible, all other entries
    /// held. `μ_p` is affine in a single entry, so the crossing is solved
    /// directly and then nudged down past any rounding.
    pub fn max_feasible_entry(&self, point: &mut [S], j: usize) -> Option<S> {
        let keep = point[j];
        point[j] = S::zero();
        let at_zero = self.mu_p(point);
        let result = if !meets_constraints(self.lambda_p, at_zero, self.delay_cap) {
            None
        } else {
            point[j] = S::one();
            let at_one = self.mu_p(point);
            if meets_constraints(self.lambda_p, at_one, self.delay_cap) {
                Some(S::one())
            } else {
                let mut x = ((at_zero - self.target_mu_p) / (at_zero - at_one)).max(S::zero()).min(S::one());
                let mut found = None;
                for _ in 0..8 {
                    point[j] = x;
                    if self.feasible(point) {
                        found = Some(x);
                        break;
                    }
                    x = (x - (S::epsilon() * S::lit(16.0)).max(x * S::epsilon() * S::lit(16.0))).max(S::zero());
                }
                found.or_else(|| self.bisect_entry(point, j))
            }
        };
        point[j] = keep;
        result
    }

    fn bisect_entry(&self, point: &mut [S], j: usize) -> Option<S> {
        let (mut lo, mut hi) = (S::zero(), S::one());
        for _ in 0..64 {
            let mid = (lo + hi) / S::lit(2.0);
            point[j] = mid;
            if self.feasible(point) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(lo)
    }

    /// Uniform draw over the free entries, scaled toward the base point until
    /// feasible.
    pub fn random_start<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Candidate<S>> {
        let mut point = self.base.clone();
        let raw: Vec<S> = self.free.iter().map(|_| S::lit(rng.random::<f64>())).collect();
        let scaled = |point: &mut Vec<S>, t: S| {
            for (&i, &r) in self.free.iter().zip(&raw) {
                point[i] = r * t;
            }
        };
        scaled(&mut point, S::one());
        if !self.feasible(&point) {
            let (mut lo, mut hi) = (S::zero(), S::one());
            for _ in 0..60 {
                let mid = (lo + hi) / S::lit(2.0);
                scaled(&mut point, mid);
                if self.feasible(&point) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            scaled(&mut point, lo);
        }
        let value = self.evaluate(&point)?;
        Some(Candidate { point, value })
    }

    /// Pattern search over the free entries with moves that slide along the
    /// constraint surface. Halves the step on an unsuccessful poll.
    pub fn local_search(&self, start: Candidate<S>, step_floor: S, max_iterations: usize) -> Candidate<S> {
        let mut current = start;
        let mut step = S::lit(0.25);
        let mut trial = current.point.clone();
        for _ in 0..max_iterations {
            if step < step_floor {
                break;
            }
            let mut best: Option<Candidate<S>> = None;
            let mut consider = |point: &[S], value: Value<S>| {
                let better = match &best {
                    Some(b) => value.mu_s > b.value.mu_s,
                    None => true,
                };
                if better {
                    best = Some(Candidate { point: point.to_vec(), value });
                }
            };
            for &i in &self.free {
                let xi = current.point[i];
                for up in [true, false] {
                    let moved = if up { (xi + step).min(S::one()) } else { (xi - step).max(S::zero()) };
                    if moved == xi {
                        continue;
                    }
                    trial.copy_from_slice(&current.point);
                    trial[i] = moved;
                    if let Some(v) = self.evaluate(&trial) {
                        consider(&trial, v);
                        continue;
                    }
                    if !up {
                        continue;
                    }
                    // Up to the constraint along entry i.
                    if let Some(edge) = self.max_feasible_entry(&mut trial, i) {
                        if edge > xi {
                            trial[i] = edge;
                            if let Some(v) = self.evaluate(&trial) {
                                consider(&trial, v);
                            }
                        }
                    }
                    // Full step on i, paid for by lowering entry j.
                    for &j in &self.free {
                        if j == i || current.point[j] == S::zero() {
                            continue;
                        }
                        trial.copy_from_slice(&current.point);
                        trial[i] = moved;
                        if let Some(xj) = self.max_feasible_entry(&mut trial, j) {
                            if xj < current.point[j] {
                                trial[j] = xj;
                                if let Some(v) = self.evaluate(&trial) {
                                    consider(&trial, v);
                                }
                            }
                        }
                    }
                }
            }
            let threshold = current.value.mu_s + S::epsilon() * current.value.mu_s.abs();
            match best {
                Some(b) if b.value.mu_s > threshold => current = b,
                _ => step = step / S::lit(2.0),
            }
        }
        current
    }
}
