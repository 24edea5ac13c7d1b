//! Rayleigh block-fading links and packet success probabilities.
//!
//! A packet of `b` bits sent over `tx` seconds of a `W` Hz channel needs the
//! spectral efficiency `R = b / (W tx)`. It is decoded when the instantaneous
//! capacity `log2(1 + P |g|^2 / N0)` exceeds `R`; with `|g|^2` exponential of
//! mean `σ` this happens with probability `exp(-N0 (2^R - 1) / (σ P))`.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Physical and slot constants shared by both users.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemParams<S = f64> {
    /// Noise power spectral density, W/Hz.
    pub noise_density: S,
    /// Primary transmit power spectral density, W/Hz.
    pub power_primary: S,
    /// Secondary transmit power spectral density, W/Hz.
    pub power_secondary: S,
    pub bandwidth_hz: S,
    /// Slot length `T`.
    pub slot_seconds: S,
    /// Spacing `τ` between secondary decision instants.
    pub sensing_quantum_seconds: S,
    pub packet_bits: S,
    /// Mean of `|g|^2` on the primary link.
    pub var_primary_link: S,
    /// Mean of `|g|^2` on the secondary link.
    pub var_secondary_link: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkId {
    Primary,
    Secondary,
}

impl<S: Scalar> SystemParams<S> {
    /// Parameter set used for the published throughput curves: `N0 = 1e-11`,
    /// `P_s = 9e-10`, `P_p = 3e-12`, `W = 10 MHz`, `T = 0.4 ms`, `τ = T/10`,
    /// `b = 1000`, unit fading variances.
    pub fn reference() -> Self {
        Self {
            noise_density: S::lit(1e-11),
            power_primary: S::lit(3e-12),
            power_secondary: S::lit(9e-10),
            bandwidth_hz: S::lit(1e7),
            slot_seconds: S::lit(4e-4),
            sensing_quantum_seconds: S::lit(4e-5),
            packet_bits: S::lit(1000.0),
            var_primary_link: S::one(),
            var_secondary_link: S::one(),
        }
    }

    /// Returns the reference set with a different sensing quantum.
    pub fn with_sensing_quantum(mut self, tau: S) -> Self {
        self.sensing_quantum_seconds = tau;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("noise_density", self.noise_density),
            ("power_primary", self.power_primary),
            ("power_secondary", self.power_secondary),
            ("bandwidth_hz", self.bandwidth_hz),
            ("slot_seconds", self.slot_seconds),
            ("sensing_quantum_seconds", self.sensing_quantum_seconds),
            ("packet_bits", self.packet_bits),
            ("var_primary_link", self.var_primary_link),
            ("var_secondary_link", self.var_secondary_link),
        ];
        for (field, value) in fields {
            if !(value.is_finite() && value > S::zero()) {
                return Err(Error::InvalidParameter {
                    field,
                    reason: format!("must be finite and strictly positive, got {value}"),
                });
            }
        }
        if self.sensing_quantum_seconds > self.slot_seconds {
            return Err(Error::InvalidParameter {
                field: "sensing_quantum_seconds",
                reason: format!(
                    "{} s exceeds slot length {} s",
                    self.sensing_quantum_seconds, self.slot_seconds
                ),
            });
        }
        Ok(())
    }

    /// Number of sensing decision instants `M = floor(T / τ)`.
    ///
    /// A ratio within a few ulps of an integer is snapped to it, so `τ = T/10`
    /// yields 10 even when the division lands just below.
    pub fn num_instants(&self) -> usize {
        let ratio = self.slot_seconds / self.sensing_quantum_seconds;
        let nearest = ratio.round();
        let tol = S::epsilon() * S::lit(64.0) * nearest.max(S::one());
        let m = if (ratio - nearest).abs() <= tol { nearest } else { ratio.floor() };
        m.to_usize().unwrap_or(0)
    }

    /// Data transmission time left after sensing for `k` quanta, `T - kτ`.
    /// Rounding residue at `kτ = T` is snapped to exactly zero.
    pub fn transmit_seconds_after(&self, k: usize) -> S {
        let sensed = S::from_usize(k).unwrap_or_else(S::infinity) * self.sensing_quantum_seconds;
        let left = self.slot_seconds - sensed;
        if left <= S::epsilon() * S::lit(64.0) * self.slot_seconds {
            S::zero()
        } else {
            left
        }
    }

    pub fn link_power(&self, link: LinkId) -> S {
        match link {
            LinkId::Primary => self.power_primary,
            LinkId::Secondary => self.power_secondary,
        }
    }

    pub fn link_variance(&self, link: LinkId) -> S {
        match link {
            LinkId::Primary => self.var_primary_link,
            LinkId::Secondary => self.var_secondary_link,
        }
    }
}

impl Default for SystemParams<f64> {
    fn default() -> Self {
        Self::reference()
    }
}

fn check_duration<S: Scalar>(tx_seconds: S) -> Result<()> {
    if tx_seconds < S::zero() || tx_seconds.is_nan() {
        return Err(Error::NegativeDuration(tx_seconds.as_f64()));
    }
    Ok(())
}

/// Spectral efficiency `b / (W tx)` in bits/s/Hz. Zero transmission time maps
/// to `S::infinity()`, the infinite-rate sentinel.
pub fn spectral_efficiency<S: Scalar>(params: &SystemParams<S>, tx_seconds: S) -> Result<S> {
    check_duration(tx_seconds)?;
    if tx_seconds == S::zero() {
        return Ok(S::infinity());
    }
    Ok(params.packet_bits / (params.bandwidth_hz * tx_seconds))
}

/// Smallest fading power `|g|^2` that supports the rate needed for
/// `tx_seconds`; `None` when no finite gain suffices.
pub fn gain_threshold<S: Scalar>(
    params: &SystemParams<S>,
    link: LinkId,
    tx_seconds: S,
) -> Result<Option<S>> {
    let rate = spectral_efficiency(params, tx_seconds)?;
    let threshold = params.noise_density * (rate.exp2() - S::one()) / params.link_power(link);
    Ok(threshold.is_finite().then_some(threshold))
}

/// Probability that a packet sent over `tx_seconds` on `link` is not in outage.
pub fn success_probability<S: Scalar>(
    params: &SystemParams<S>,
    link: LinkId,
    tx_seconds: S,
) -> Result<S> {
    Ok(match gain_threshold(params, link, tx_seconds)? {
        Some(threshold) => (-threshold / params.link_variance(link)).exp(),
        None => S::zero(),
    })
}

/// Draws one block-fading realization on `link` and reports whether a packet
/// sent over `tx_seconds` gets through.
pub fn draw_success<S: Scalar, R: Rng + ?Sized>(
    rng: &mut R,
    params: &SystemParams<S>,
    link: LinkId,
    tx_seconds: S,
) -> Result<bool> {
    let threshold = gain_threshold(params, link, tx_seconds)?;
    let fading = FadingLink::new(params.link_variance(link).as_f64())?;
    Ok(fading.decodes(rng, threshold.map(Scalar::as_f64)))
}

/// Exponential `|g|^2` sampler for one link.
#[derive(Debug, Clone, Copy)]
pub struct FadingLink {
    gain: Exp<f64>,
}

impl FadingLink {
    pub fn new(variance: f64) -> Result<Self> {
        let gain = Exp::new(1.0 / variance).map_err(|e| Error::InvalidParameter {
            field: "fading variance",
            reason: e.to_string(),
        })?;
        Ok(Self { gain })
    }

    pub fn sample_gain<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.gain.sample(rng)
    }

    /// `threshold = None` means the rate is unreachable.
    #[inline]
    pub fn decodes<R: Rng + ?Sized>(&self, rng: &mut R, threshold: Option<f64>) -> bool {
        match threshold {
            Some(t) => self.sample_gain(rng) > t,
            None => false,
        }
    }
}
