use crate::analytic::{metrics_from_rates, AccessModel, TrafficParams};
use crate::channel::SystemParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::sensing::SensingProfile;

use super::{
    check_inputs, closed_form_bound, meets_constraints, variant_constraints, OptimizationResult, ProtocolVariant,
};

pub const GRID_ORACLE_MAX_FREE: usize = 5;

/// Exhaustive search used to check [`super::optimize`].
///
/// Every point of a `grid_points_per_dim`-per-axis lattice over the free
/// entries is evaluated. Because optima sit on the constraint surface, which
/// a lattice only grazes, each lattice line is also evaluated at its exact
/// crossing with the surface (the service rate is affine along any axis).
/// Ties within `1e-12` go to the larger service rate.
pub fn grid_oracle<S: Scalar>(
    variant: ProtocolVariant,
    traffic: &TrafficParams<S>,
    profile: &SensingProfile<S>,
    params: &SystemParams<S>,
    delay_cap: S,
    grid_points_per_dim: usize,
) -> Result<OptimizationResult<S>> {
    check_inputs(traffic, delay_cap)?;
    if grid_points_per_dim < 2 {
        return Err(Error::InvalidParameter {
            field: "grid_points_per_dim",
            reason: "must be at least 2".to_string(),
        });
    }
    let model = AccessModel::new(params, profile)?;
    if variant == ProtocolVariant::PerfectBound {
        return closed_form_bound(&model, traffic, params, delay_cap);
    }
    let constraints = variant_constraints::<S>(variant, model.num_instants());
    let free = constraints.free_indices();
    if free.len() > GRID_ORACLE_MAX_FREE {
        return Err(Error::TooManyFreeParameters { free: free.len(), max: GRID_ORACLE_MAX_FREE });
    }
    let lambda = traffic.lambda_p;
    let levels: Vec<S> = (0..grid_points_per_dim)
        .map(|i| S::lit(i as f64 / (grid_points_per_dim - 1) as f64))
        .collect();
    let tie = S::lit(1e-12);

    let mut best: Option<(Vec<S>, S, S)> = None;
    let mut offer = |point: &[S]| {
        let (mu_p, gain) = model.rates_flat(point);
        if !meets_constraints(lambda, mu_p, delay_cap) {
            return;
        }
        let mu_s = metrics_from_rates(lambda, mu_p, gain).mu_s;
        let replace = match &best {
            None => true,
            Some((_, b_s, b_p)) => mu_s > *b_s + tie || (mu_s >= *b_s - tie && mu_p > *b_p),
        };
        if replace {
            best = Some((point.to_vec(), mu_s, mu_p));
        }
    };

    let mut point = constraints.base_point();
    let mut digits = vec![0usize; free.len()];
    loop {
        for (&idx, &d) in free.iter().zip(&digits) {
            point[idx] = levels[d];
        }
        offer(&point);
        for (axis, &idx) in free.iter().enumerate() {
            if digits[axis] != 0 {
                continue;
            }
            if let Some(x) = crossing(&model, &mut point, idx, lambda, delay_cap) {
                let keep = point[idx];
                point[idx] = x;
                offer(&point);
                point[idx] = keep;
            }
        }
        // Odometer increment; done once every digit wraps.
        let mut axis = 0;
        while axis < digits.len() {
            digits[axis] += 1;
            if digits[axis] < levels.len() {
                break;
            }
            digits[axis] = 0;
            axis += 1;
        }
        if axis == digits.len() {
            break;
        }
    }

    Ok(match best {
        Some((flat, _, _)) => OptimizationResult::from_flat(&model, lambda, &flat),
        None => OptimizationResult::infeasible(&model, lambda),
    })
}

/// Value of entry `j` where the service rate meets the constraint, if that
/// lies strictly inside `(0, 1)`; rounded down until feasible.
fn crossing<S: Scalar>(model: &AccessModel<S>, point: &mut [S], j: usize, lambda: S, cap: S) -> Option<S> {
    let keep = point[j];
    point[j] = S::zero();
    let at_zero = model.rates_flat(point).0;
    point[j] = S::one();
    let at_one = model.rates_flat(point).0;
    let target = lambda + (S::one() - lambda) / cap;
    let mut out = None;
    if at_zero > target && at_one < target {
        let mut x = (at_zero - target) / (at_zero - at_one);
        for _ in 0..16 {
            point[j] = x;
            if meets_constraints(lambda, model.rates_flat(point).0, cap) {
                out = Some(x);
                break;
            }
            x = x * (S::one() - S::epsilon() * S::lit(64.0));
        }
    }
    point[j] = keep;
    out
}
