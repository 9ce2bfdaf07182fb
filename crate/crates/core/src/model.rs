//! Probability kernels for LOS/NLOS mixture ranging and the two-state
//! LOS indicator chain.
//!
//! A range reading between two nodes at true distance `d` is
//!
//! * `d + n` when the link is line-of-sight, `n ~ N(0, σ_los²)`;
//! * `d + ε + n` otherwise, with an exponential excess delay `ε` of mean
//!   `σ_nlos`.
//!
//! The NLOS density is the exponentially-modified Gaussian and is evaluated
//! in log space so that readings far below the hypothesised distance still
//! produce finite log-likelihoods.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_add_exp, log_ndtr, normal_log_pdf};

/// Parameters of the ranging mixture and of the inertial noise.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMixtureParams", into = "RawMixtureParams")]
pub struct MixtureParams {
    alpha: f64,
    sigma_los: f64,
    sigma_nlos: f64,
    sigma_ins: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RawMixtureParams {
    alpha: f64,
    sigma_los: f64,
    sigma_nlos: f64,
    sigma_ins: f64,
}

impl TryFrom<RawMixtureParams> for MixtureParams {
    type Error = Error;
    fn try_from(raw: RawMixtureParams) -> Result<Self> {
        MixtureParams::new(raw.alpha, raw.sigma_los, raw.sigma_nlos, raw.sigma_ins)
    }
}

impl From<MixtureParams> for RawMixtureParams {
    fn from(p: MixtureParams) -> Self {
        RawMixtureParams {
            alpha: p.alpha,
            sigma_los: p.sigma_los,
            sigma_nlos: p.sigma_nlos,
            sigma_ins: p.sigma_ins,
        }
    }
}

impl Default for RawMixtureParams {
    fn default() -> Self {
        MixtureParams::default().into()
    }
}

impl Default for MixtureParams {
    fn default() -> Self {
        MixtureParams {
            alpha: 0.3,
            sigma_los: 0.05,
            sigma_nlos: 5.0,
            sigma_ins: 0.1,
        }
    }
}

impl MixtureParams {
    /// `sigma_ins` may be zero (exact dead reckoning); the ranging sigmas may not.
    pub fn new(alpha: f64, sigma_los: f64, sigma_nlos: f64, sigma_ins: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(sigma_los > 0.0 && sigma_los.is_finite()) {
            return Err(Error::domain(format!("sigma_los must be positive, got {sigma_los}")));
        }
        if !(sigma_nlos > 0.0 && sigma_nlos.is_finite()) {
            return Err(Error::domain(format!("sigma_nlos must be positive, got {sigma_nlos}")));
        }
        if !(sigma_ins >= 0.0 && sigma_ins.is_finite()) {
            return Err(Error::domain(format!("sigma_ins must be non-negative, got {sigma_ins}")));
        }
        Ok(MixtureParams {
            alpha,
            sigma_los,
            sigma_nlos,
            sigma_ins,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sigma_los(&self) -> f64 {
        self.sigma_los
    }

    pub fn sigma_nlos(&self) -> f64 {
        self.sigma_nlos
    }

    pub fn sigma_ins(&self) -> f64 {
        self.sigma_ins
    }

    pub fn with_alpha(self, alpha: f64) -> Result<Self> {
        Self::new(alpha, self.sigma_los, self.sigma_nlos, self.sigma_ins)
    }

    /// Draw a range reading for true distance `d` under mode `z`.
    pub fn sample_range<R: Rng + ?Sized>(&self, d: f64, z: LosIndicator, rng: &mut R) -> f64 {
        let noise = Normal::new(0.0, self.sigma_los).expect("validated sigma").sample(rng);
        match z {
            LosIndicator::Los => d + noise,
            LosIndicator::Nlos => {
                let excess = Exp::new(1.0 / self.sigma_nlos).expect("validated sigma").sample(rng);
                d + excess + noise
            }
        }
    }
}

/// Binary propagation mode of a link.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum LosIndicator {
    Nlos = 0,
    Los = 1,
}

impl LosIndicator {
    pub fn from_bool(los: bool) -> Self {
        if los {
            LosIndicator::Los
        } else {
            LosIndicator::Nlos
        }
    }

    pub fn is_los(self) -> bool {
        self == LosIndicator::Los
    }

    pub fn value(self) -> u8 {
        self as u8
    }
}

impl From<LosIndicator> for u8 {
    fn from(z: LosIndicator) -> u8 {
        z as u8
    }
}

impl TryFrom<u8> for LosIndicator {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            0 => Ok(LosIndicator::Nlos),
            1 => Ok(LosIndicator::Los),
            other => Err(Error::domain(format!("LOS indicator must be 0 or 1, got {other}"))),
        }
    }
}

pub fn los_log_likelihood(theta: f64, d: f64, params: &MixtureParams) -> f64 {
    debug_assert!(d >= 0.0);
    normal_log_pdf(theta, d, params.sigma_los)
}

/// Gaussian density of the reading around the true distance.
pub fn los_likelihood(theta: f64, d: f64, params: &MixtureParams) -> f64 {
    los_log_likelihood(theta, d, params).exp()
}

/// Log of the exponentially-modified Gaussian density
/// `λ·exp(λ(d−θ) + λ²σ²/2)·Φ((θ−d−λσ²)/σ)` with `λ = 1/σ_nlos`, `σ = σ_los`.
pub fn nlos_log_likelihood(theta: f64, d: f64, params: &MixtureParams) -> f64 {
    debug_assert!(d >= 0.0);
    let rate = 1.0 / params.sigma_nlos;
    let sigma = params.sigma_los;
    let excess = theta - d;
    rate.ln() - rate * excess
        + 0.5 * rate * rate * sigma * sigma
        + log_ndtr((excess - rate * sigma * sigma) / sigma)
}

pub fn nlos_likelihood(theta: f64, d: f64, params: &MixtureParams) -> f64 {
    nlos_log_likelihood(theta, d, params).exp()
}

pub fn observation_log_likelihood(theta: f64, d: f64, z: LosIndicator, params: &MixtureParams) -> f64 {
    match z {
        LosIndicator::Los => los_log_likelihood(theta, d, params),
        LosIndicator::Nlos => nlos_log_likelihood(theta, d, params),
    }
}

/// `p(θ | z, d)`.
pub fn observation_likelihood(theta: f64, d: f64, z: LosIndicator, params: &MixtureParams) -> f64 {
    observation_log_likelihood(theta, d, z, params).exp()
}

/// Log of the marginal `α·p(θ|LOS) + (1−α)·p(θ|NLOS)`.
pub fn mixture_log_likelihood(theta: f64, d: f64, params: &MixtureParams) -> f64 {
    let los = params.alpha.ln() + los_log_likelihood(theta, d, params);
    if params.alpha >= 1.0 {
        return los;
    }
    let nlos = (1.0 - params.alpha).ln() + nlos_log_likelihood(theta, d, params);
    log_add_exp(los, nlos)
}

/// Two-state Markov chain over [`LosIndicator`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LosTransition {
    p01: f64,
    p11: f64,
}

impl LosTransition {
    pub fn new(p01: f64, p11: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p01) || !(0.0..=1.0).contains(&p11) {
            return Err(Error::domain(format!(
                "transition probabilities must lie in [0, 1], got p01={p01}, p11={p11}"
            )));
        }
        Ok(LosTransition { p01, p11 })
    }

    /// Solve `α·(1−p11) = (1−α)·p01` for `p11`, so that the chain's stationary
    /// LOS probability is `alpha`.
    pub fn from_alpha(alpha: f64, p01: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::domain(format!("alpha must lie in (0, 1], got {alpha}")));
        }
        if !(0.0..=1.0).contains(&p01) {
            return Err(Error::domain(format!("p01 must lie in [0, 1], got {p01}")));
        }
        if alpha == 1.0 {
            return Ok(LosTransition { p01, p11: 1.0 });
        }
        let max_p01 = (alpha / (1.0 - alpha)).min(1.0);
        if p01 > max_p01 {
            return Err(Error::domain(format!(
                "p01={p01} exceeds {max_p01}, the largest value giving a valid p11 for alpha={alpha}"
            )));
        }
        let p11 = (1.0 - (1.0 - alpha) * p01 / alpha).clamp(0.0, 1.0);
        Ok(LosTransition { p01, p11 })
    }

    /// NLOS → LOS.
    pub fn p01(&self) -> f64 {
        self.p01
    }

    /// LOS → LOS.
    pub fn p11(&self) -> f64 {
        self.p11
    }

    /// `p(z_t = to | z_{t-1} = from)`.
    pub fn prob(&self, from: LosIndicator, to: LosIndicator) -> f64 {
        let p_los = match from {
            LosIndicator::Los => self.p11,
            LosIndicator::Nlos => self.p01,
        };
        match to {
            LosIndicator::Los => p_los,
            LosIndicator::Nlos => 1.0 - p_los,
        }
    }

    /// Advance one step given a uniform draw `u ∈ [0, 1)`.
    pub fn next_state(&self, from: LosIndicator, u: f64) -> LosIndicator {
        LosIndicator::from_bool(u < self.prob(from, LosIndicator::Los))
    }

    pub fn sample_next<R: Rng + ?Sized>(&self, from: LosIndicator, rng: &mut R) -> LosIndicator {
        self.next_state(from, rng.random::<f64>())
    }
}

/// Stationary distribution `(π0, π1)` of the chain, index 1 being LOS.
pub fn stationary_distribution(t: &LosTransition) -> Result<(f64, f64)> {
    let denom = t.p01 + (1.0 - t.p11);
    if denom == 0.0 {
        return Err(Error::UndefinedStationary);
    }
    let pi1 = t.p01 / denom;
    Ok((1.0 - pi1, pi1))
}
