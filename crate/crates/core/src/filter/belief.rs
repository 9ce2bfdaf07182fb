//! Per-particle, per-neighbor forward recursion over the LOS indicator.
//!
//! For a particle path `v_{1:t}` and one neighbor, `φ_t(z)` is the joint
//! weight of the range history and `z_t = z`:
//!
//! ```text
//! φ_t(1) = p(θ_t | z=1, d_t) · (p11·φ_{t-1}(1) + p01·φ_{t-1}(0))
//! φ_t(0) = p(θ_t | z=0, d_t) · ((1-p11)·φ_{t-1}(1) + (1-p01)·φ_{t-1}(0))
//! ```
//!
//! Summing over `z` gives the particle's marginal likelihood for that link.

use crate::math::log_add_exp;
use crate::model::{nlos_log_likelihood, los_log_likelihood, LosTransition, MixtureParams};
use crate::types::Position;

/// `(ln φ(z=0), ln φ(z=1))` for one particle and one neighbor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeighborBelief {
    pub log_phi0: f64,
    pub log_phi1: f64,
}

impl NeighborBelief {
    pub fn from_linear(phi0: f64, phi1: f64) -> Self {
        NeighborBelief {
            log_phi0: phi0.ln(),
            log_phi1: phi1.ln(),
        }
    }

    /// Belief before any reading: `(1 - π_los, π_los)`.
    pub fn prior(pi_los: f64) -> Self {
        Self::from_linear(1.0 - pi_los, pi_los)
    }

    pub fn phi0(&self) -> f64 {
        self.log_phi0.exp()
    }

    pub fn phi1(&self) -> f64 {
        self.log_phi1.exp()
    }

    /// `ln(φ0 + φ1)`.
    pub fn log_total(&self) -> f64 {
        log_add_exp(self.log_phi0, self.log_phi1)
    }

    /// Divide both entries by their sum. A fully zero belief is returned as is.
    pub fn normalized(&self) -> Self {
        let total = self.log_total();
        if total == f64::NEG_INFINITY {
            return *self;
        }
        NeighborBelief {
            log_phi0: self.log_phi0 - total,
            log_phi1: self.log_phi1 - total,
        }
    }

    /// Propagate through the chain without a reading.
    pub fn mix(&self, trans: &LogTransition) -> Self {
        NeighborBelief {
            log_phi0: log_add_exp(trans.ln_p10 + self.log_phi1, trans.ln_p00 + self.log_phi0),
            log_phi1: log_add_exp(trans.ln_p11 + self.log_phi1, trans.ln_p01 + self.log_phi0),
        }
    }

    /// One step of the recursion given per-mode log-likelihoods of the reading.
    pub fn absorb(&self, trans: &LogTransition, log_lik0: f64, log_lik1: f64) -> Self {
        let mixed = self.mix(trans);
        NeighborBelief {
            log_phi0: log_lik0 + mixed.log_phi0,
            log_phi1: log_lik1 + mixed.log_phi1,
        }
    }
}

/// Transition probabilities in log form, precomputed for the hot loop.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LogTransition {
    pub ln_p00: f64,
    pub ln_p01: f64,
    pub ln_p10: f64,
    pub ln_p11: f64,
}

impl From<&LosTransition> for LogTransition {
    fn from(t: &LosTransition) -> Self {
        LogTransition {
            ln_p00: (1.0 - t.p01()).ln(),
            ln_p01: t.p01().ln(),
            ln_p10: (1.0 - t.p11()).ln(),
            ln_p11: t.p11().ln(),
        }
    }
}

/// Advance a neighbor belief with the reading `theta`, evaluating the range
/// model at the distance between the particle and the neighbor's estimate.
pub fn update_belief(
    belief: &NeighborBelief,
    theta: f64,
    particle_pos: Position,
    neighbor_est: Position,
    trans: &LosTransition,
    params: &MixtureParams,
) -> NeighborBelief {
    let d = particle_pos.distance(&neighbor_est);
    belief.absorb(
        &LogTransition::from(trans),
        nlos_log_likelihood(theta, d, params),
        los_log_likelihood(theta, d, params),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_evaluated_step() {
        let trans = LosTransition::new(0.15, 0.65).unwrap();
        let lt = LogTransition::from(&trans);
        let prior = NeighborBelief::from_linear(0.5, 0.5);
        let next = prior.absorb(&lt, 0.1f64.ln(), 0.8f64.ln());
        assert!((next.phi0() - 0.06).abs() < 1e-15);
        assert!((next.phi1() - 0.32).abs() < 1e-15);
    }

    #[test]
    fn memoryless_chain_forgets_previous_mode() {
        let alpha = 0.3;
        let lt = LogTransition::from(&LosTransition::new(alpha, alpha).unwrap());
        let (l0, l1) = (0.02f64, 1.7f64);
        for prior in [NeighborBelief::from_linear(0.9, 0.1), NeighborBelief::from_linear(0.2, 0.6)] {
            let s = prior.phi0() + prior.phi1();
            let next = prior.absorb(&lt, l0.ln(), l1.ln());
            assert!((next.phi1() - l1 * alpha * s).abs() < 1e-14);
            assert!((next.phi0() - l0 * (1.0 - alpha) * s).abs() < 1e-14);
        }
    }

    #[test]
    fn mixing_preserves_total() {
        let lt = LogTransition::from(&LosTransition::new(0.025, 0.525).unwrap());
        let b = NeighborBelief::from_linear(0.37, 0.11);
        assert!((b.mix(&lt).log_total() - b.log_total()).abs() < 1e-14);
    }

    #[test]
    fn absorbing_chain_keeps_zero_entries_finite_safe() {
        // p01 = 0: ln p01 = -inf must not produce NaN
        let lt = LogTransition::from(&LosTransition::new(0.0, 1.0).unwrap());
        let b = NeighborBelief::from_linear(1.0, 0.0).absorb(&lt, -1.0, -2.0);
        assert!(!b.log_phi0.is_nan() && !b.log_phi1.is_nan());
        assert_eq!(b.log_phi1, f64::NEG_INFINITY);
    }
}
