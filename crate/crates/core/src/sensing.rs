//! Detector operating characteristic indexed by accumulated sensing quanta.
//!
//! `p_md` is the probability of *missing* an active primary user; correct
//! detection of a busy channel therefore happens with `1 - p_md`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Built-in operating characteristic for ten quanta; false alarm and
/// misdetection share the same value at every `k`.
pub const TABLE_ONE: [f64; 10] = [0.2, 0.19, 0.17, 0.15, 0.13, 0.12, 0.08, 0.05, 0.01, 0.001];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint<S = f64> {
    /// Number of sensing quanta accumulated, starting at 1.
    pub k: usize,
    pub p_fa: S,
    pub p_md: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RocField {
    FalseAlarm,
    Misdetection,
}

impl fmt::Display for RocField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RocField::FalseAlarm => "p_fa",
            RocField::Misdetection => "p_md",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProfileViolation {
    Empty,
    /// Row `position` (0-based) carries index `found` instead of `expected`.
    IndexGap { position: usize, expected: usize, found: usize },
    OutOfRange { k: usize, field: RocField, value: f64 },
    /// `field` increases from `previous` at `k - 1` to `value` at `k`.
    NotMonotone { k: usize, field: RocField, previous: f64, value: f64 },
}

impl ProfileViolation {
    pub fn is_monotonicity(&self) -> bool {
        matches!(self, ProfileViolation::NotMonotone { .. })
    }
}

impl fmt::Display for ProfileViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProfileViolation::Empty => write!(f, "profile has no rows"),
            ProfileViolation::IndexGap { position, expected, found } => {
                write!(f, "row {position}: expected k={expected}, found k={found}")
            }
            ProfileViolation::OutOfRange { k, field, value } => {
                write!(f, "k={k}: {field}={value} outside [0, 1]")
            }
            ProfileViolation::NotMonotone { k, field, previous, value } => {
                write!(f, "k={k}: {field} increases from {previous} to {value}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensingProfile<S = f64> {
    entries: Vec<RocPoint<S>>,
}

impl<S: Scalar> SensingProfile<S> {
    /// Wraps rows without checking them; see [`SensingProfile::validate`].
    pub fn from_rows_unchecked(entries: Vec<RocPoint<S>>) -> Self {
        Self { entries }
    }

    /// Builds a profile, rejecting any violation.
    pub fn new(entries: Vec<RocPoint<S>>) -> Result<Self> {
        let profile = Self::from_rows_unchecked(entries);
        profile.validate().map_err(Error::InvalidProfile)?;
        Ok(profile)
    }

    /// Builds a profile where increasing error probabilities are tolerated;
    /// they come back as warnings. Index and range violations still fail.
    pub fn new_allow_nonmonotone(
        entries: Vec<RocPoint<S>>,
    ) -> Result<(Self, Vec<ProfileViolation>)> {
        let profile = Self::from_rows_unchecked(entries);
        match profile.validate() {
            Ok(()) => Ok((profile, Vec::new())),
            Err(violations) => {
                let (warnings, errors): (Vec<_>, Vec<_>) =
                    violations.into_iter().partition(ProfileViolation::is_monotonicity);
                if errors.is_empty() {
                    Ok((profile, warnings))
                } else {
                    Err(Error::InvalidProfile(errors))
                }
            }
        }
    }

    /// The built-in table; only `m = 10` is available.
    pub fn table_one(m: usize) -> Result<Self> {
        if m != TABLE_ONE.len() {
            return Err(Error::UnsupportedProfileLength(m));
        }
        let entries = TABLE_ONE
            .iter()
            .enumerate()
            .map(|(i, &p)| RocPoint { k: i + 1, p_fa: S::lit(p), p_md: S::lit(p) })
            .collect();
        Ok(Self { entries })
    }

    /// First `m` rows of the built-in table, for experiments with fewer instants.
    pub fn table_one_truncated(m: usize) -> Result<Self> {
        let mut profile = Self::table_one(TABLE_ONE.len())?;
        if m == 0 || m > TABLE_ONE.len() {
            return Err(Error::UnsupportedProfileLength(m));
        }
        profile.entries.truncate(m);
        Ok(profile)
    }

    /// Collects every invariant violation instead of stopping at the first.
    pub fn validate(&self) -> std::result::Result<(), Vec<ProfileViolation>> {
        let mut out = Vec::new();
        if self.entries.is_empty() {
            out.push(ProfileViolation::Empty);
        }
        for (position, row) in self.entries.iter().enumerate() {
            if row.k != position + 1 {
                out.push(ProfileViolation::IndexGap { position, expected: position + 1, found: row.k });
            }
            for (field, value) in [(RocField::FalseAlarm, row.p_fa), (RocField::Misdetection, row.p_md)] {
                if !(value >= S::zero() && value <= S::one()) {
                    out.push(ProfileViolation::OutOfRange { k: row.k, field, value: value.as_f64() });
                }
            }
        }
        for pair in self.entries.windows(2) {
            let (prev, cur) = (&pair[0], &pair[1]);
            for (field, a, b) in [
                (RocField::FalseAlarm, prev.p_fa, cur.p_fa),
                (RocField::Misdetection, prev.p_md, cur.p_md),
            ] {
                if b > a {
                    out.push(ProfileViolation::NotMonotone {
                        k: cur.k,
                        field,
                        previous: a.as_f64(),
                        value: b.as_f64(),
                    });
                }
            }
        }
        if out.is_empty() {
            Ok(())
        } else {
            Err(out)
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[RocPoint<S>] {
        &self.entries
    }

    /// `(p_fa, p_md)` after `k` quanta, `1 <= k <= M`.
    pub fn roc_at(&self, k: usize) -> Result<(S, S)> {
        if k == 0 || k > self.entries.len() {
            return Err(Error::InstantOutOfRange { k, m: self.entries.len() });
        }
        let row = &self.entries[k - 1];
        Ok((row.p_fa, row.p_md))
    }
}
