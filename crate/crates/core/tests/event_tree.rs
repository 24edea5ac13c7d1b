//! Enumerates every sensing/access path of a slot and checks the product
//! forms of the service rate and secondary throughput against it.

use cogmac::analytic::{primary_service_rate, secondary_throughput};
use cogmac::{AccessPolicy, RocPoint, SensingProfile, SystemParams, TrafficParams};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Outage-free probability written out independently of the crate.
fn link_success(p: &SystemParams<f64>, power: f64, variance: f64, tx: f64) -> f64 {
    if tx <= 1e-15 {
        return 0.0;
    }
    let rate = p.packet_bits / (p.bandwidth_hz * tx);
    (-p.noise_density * (2f64.powf(rate) - 1.0) / (variance * power)).exp()
}

struct Tree<'a> {
    params: &'a SystemParams<f64>,
    policy: &'a AccessPolicy<f64>,
    p_fa: Vec<f64>,
    p_md: Vec<f64>,
}

impl Tree<'_> {
    /// Probability mass of (primary delivered, secondary delivered) summed
    /// over all leaves, for a slot whose primary is `busy`.
    fn walk(&self, busy: bool) -> (f64, f64) {
        let p = self.params;
        let m = self.p_fa.len();
        let mut pu = 0.0;
        let mut su = 0.0;
        // (instant, probability of reaching it silent)
        let mut frontier = vec![(0usize, 1.0f64)];
        while let Some((k, mass)) = frontier.pop() {
            if k == 0 {
                let access = self.policy.omega_0;
                if !busy {
                    su += mass * access * link_success(p, p.power_secondary, p.var_secondary_link, p.slot_seconds);
                }
                frontier.push((1, mass * (1.0 - access)));
                continue;
            }
            if k > m {
                if busy {
                    pu += mass * link_success(p, p.power_primary, p.var_primary_link, p.slot_seconds);
                }
                continue;
            }
            let sensed_busy = if busy { 1.0 - self.p_md[k - 1] } else { self.p_fa[k - 1] };
            let tx = p.slot_seconds - k as f64 * p.sensing_quantum_seconds;
            for (outcome_prob, access) in
                [(sensed_busy, self.policy.beta[k - 1]), (1.0 - sensed_busy, self.policy.omega[k - 1])]
            {
                let branch = mass * outcome_prob;
                if !busy {
                    su += branch * access * link_success(p, p.power_secondary, p.var_secondary_link, tx);
                }
                // Access on a busy slot is a collision: both lost, nothing added.
                frontier.push((k + 1, branch * (1.0 - access)));
            }
        }
        (pu, su)
    }
}

fn random_profile(rng: &mut ChaCha8Rng, m: usize) -> SensingProfile<f64> {
    let mut fa = rng.random_range(0.05..0.5);
    let mut md = rng.random_range(0.05..0.5);
    let rows = (1..=m)
        .map(|k| {
            let row = RocPoint { k, p_fa: fa, p_md: md };
            fa *= rng.random_range(0.3..1.0);
            md *= rng.random_range(0.3..1.0);
            row
        })
        .collect();
    SensingProfile::new(rows).unwrap()
}

#[test]
fn product_forms_match_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for case in 0..100 {
        let m = 1 + case % 3;
        // τ chosen so floor(T/τ) = m with time left after the last instant.
        let tau = match m {
            1 => 2.4e-4,
            2 => 1.5e-4,
            _ => 1.2e-4,
        };
        let params = SystemParams::reference().with_sensing_quantum(tau);
        assert_eq!(params.num_instants(), m);
        let profile = random_profile(&mut rng, m);
        let policy = AccessPolicy::new(
            rng.random::<f64>() * 0.5,
            (0..m).map(|_| rng.random()).collect(),
            (0..m).map(|_| rng.random::<f64>() * 0.5).collect(),
        )
        .unwrap();
        let tree = Tree {
            params: &params,
            policy: &policy,
            p_fa: profile.entries().iter().map(|r| r.p_fa).collect(),
            p_md: profile.entries().iter().map(|r| r.p_md).collect(),
        };
        let (mu_p_tree, _) = tree.walk(true);
        let (_, su_idle) = tree.walk(false);
        let lambda = mu_p_tree * rng.random::<f64>();
        let mu_s_tree = (1.0 - lambda / mu_p_tree) * su_idle;

        let mu_p = primary_service_rate(&policy, &profile, &params).unwrap();
        let mu_s = secondary_throughput(&policy, &profile, &params, &TrafficParams::new(lambda).unwrap()).unwrap();
        worst = worst.max((mu_p - mu_p_tree).abs()).max((mu_s - mu_s_tree).abs());
        assert!((mu_p - mu_p_tree).abs() <= 1e-12, "case {case}: μ_p {mu_p} vs {mu_p_tree}");
        assert!((mu_s - mu_s_tree).abs() <= 1e-12, "case {case}: μ_s {mu_s} vs {mu_s_tree}");
    }
    println!("worst deviation {worst:e}");
}
