use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Access schemes compared against each other. All but `PerfectBound` are
/// restrictions of the full multi-instant policy space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum ProtocolVariant {
    /// Every `ω0, ω_k, β_k` free.
    Proposed,
    /// Proposed with every `β_k = 0`: never access when sensed busy.
    SpHatNoBusyAccess,
    /// Sense once for `τ`; access with `p_f` when idle, `p_b` when busy.
    S1,
    /// Sense once; always access when idle, with `q` when busy.
    S2,
    /// Sense once; access if and only if sensed idle.
    S3,
    /// Random access at the slot start, no sensing.
    S4,
    /// Zero-cost, error-free knowledge of idle slots.
    PerfectBound,
}

impl ProtocolVariant {
    pub const ALL: [ProtocolVariant; 7] = [
        ProtocolVariant::Proposed,
        ProtocolVariant::SpHatNoBusyAccess,
        ProtocolVariant::S1,
        ProtocolVariant::S2,
        ProtocolVariant::S3,
        ProtocolVariant::S4,
        ProtocolVariant::PerfectBound,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolVariant::Proposed => "proposed",
            ProtocolVariant::SpHatNoBusyAccess => "sp-hat",
            ProtocolVariant::S1 => "s1",
            ProtocolVariant::S2 => "s2",
            ProtocolVariant::S3 => "s3",
            ProtocolVariant::S4 => "s4",
            ProtocolVariant::PerfectBound => "perfect",
        }
    }
}

impl fmt::Display for ProtocolVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown protocol variant `{0}` (expected one of proposed, sp-hat, s1, s2, s3, s4, perfect)")]
pub struct UnknownVariant(pub String);

impl FromStr for ProtocolVariant {
    type Err = UnknownVariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ProtocolVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownVariant(s.to_string()))
    }
}

impl TryFrom<String> for ProtocolVariant {
    type Error = UnknownVariant;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<ProtocolVariant> for String {
    fn from(v: ProtocolVariant) -> Self {
        v.name().to_string()
    }
}

/// Which entries of the flat policy `[ω0, ω_1..ω_M, β_1..β_M]` a variant may
/// tune, and the values of the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct VariantConstraints<S = f64> {
    pub free_mask: Vec<bool>,
    /// Value of every entry; only meaningful where `free_mask` is false.
    pub fixed_values: Vec<S>,
    /// Instants (0 = slot start) where access is allowed.
    pub active_instants: Vec<usize>,
}

impl<S: Scalar> VariantConstraints<S> {
    pub fn num_instants(&self) -> usize {
        (self.free_mask.len() - 1) / 2
    }

    pub fn free_indices(&self) -> Vec<usize> {
        self.free_mask.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect()
    }

    pub fn free_count(&self) -> usize {
        self.free_mask.iter().filter(|&&f| f).count()
    }

    /// Flat policy with the fixed values and all free entries set to zero.
    pub fn base_point(&self) -> Vec<S> {
        self.fixed_values
            .iter()
            .zip(&self.free_mask)
            .map(|(&v, &free)| if free { S::zero() } else { v })
            .collect()
    }
}

/// Parameter-space restriction of each variant for `m` sensing instants.
pub fn variant_constraints<S: Scalar>(variant: ProtocolVariant, m: usize) -> VariantConstraints<S> {
    let len = 2 * m + 1;
    let omega = |k: usize| k;
    let beta = |k: usize| m + k;
    let mut free_mask = vec![false; len];
    let mut fixed_values = vec![S::zero(); len];
    let active_instants: Vec<usize> = match variant {
        ProtocolVariant::Proposed => {
            free_mask.iter_mut().for_each(|f| *f = true);
            (0..=m).collect()
        }
        ProtocolVariant::SpHatNoBusyAccess => {
            free_mask[0] = true;
            (1..=m).for_each(|k| free_mask[omega(k)] = true);
            (0..=m).collect()
        }
        ProtocolVariant::S1 => {
            free_mask[omega(1)] = true;
            free_mask[beta(1)] = true;
            vec![1]
        }
        ProtocolVariant::S2 => {
            fixed_values[omega(1)] = S::one();
            free_mask[beta(1)] = true;
            vec![1]
        }
        ProtocolVariant::S3 => {
            fixed_values[omega(1)] = S::one();
            vec![1]
        }
        ProtocolVariant::S4 => {
            free_mask[0] = true;
            vec![0]
        }
        ProtocolVariant::PerfectBound => Vec::new(),
    };
    VariantConstraints { free_mask, fixed_values, active_instants }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_parameter_counts() {
        let count = |v| variant_constraints::<f64>(v, 10).free_count();
        assert_eq!(count(ProtocolVariant::Proposed), 21);
        assert_eq!(count(ProtocolVariant::SpHatNoBusyAccess), 11);
        assert_eq!(count(ProtocolVariant::S1), 2);
        assert_eq!(count(ProtocolVariant::S2), 1);
        assert_eq!(count(ProtocolVariant::S3), 0);
        assert_eq!(count(ProtocolVariant::S4), 1);
        assert_eq!(count(ProtocolVariant::PerfectBound), 0);
    }

    #[test]
    fn inactive_instants_are_pinned_to_zero() {
        for v in ProtocolVariant::ALL {
            let c = variant_constraints::<f64>(v, 4);
            for k in 0..=4 {
                if c.active_instants.contains(&k) {
                    continue;
                }
                let mut idx = vec![k];
                if k > 0 {
                    idx.push(4 + k);
                }
                for i in idx {
                    assert!(!c.free_mask[i], "{v}: entry {i} free");
                    assert_eq!(c.fixed_values[i], 0.0);
                }
            }
            assert!(c.fixed_values.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }
    }

    #[test]
    fn s2_and_s3_always_access_when_idle() {
        let s2 = variant_constraints::<f64>(ProtocolVariant::S2, 3);
        assert_eq!(s2.base_point(), vec![0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(s2.free_indices(), vec![4]);
    }

    #[test]
    fn names_round_trip() {
        for v in ProtocolVariant::ALL {
            assert_eq!(v.name().parse::<ProtocolVariant>().unwrap(), v);
        }
        assert!("s5".parse::<ProtocolVariant>().is_err());
    }
}
