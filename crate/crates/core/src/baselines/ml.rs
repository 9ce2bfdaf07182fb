//! Genie-aided local maximum likelihood.
//!
//! Each node maximises the mixture log-likelihood of its current readings
//! given the *true* neighbor positions, searching a square window around its
//! dead-reckoned position. The objective is multimodal (every LOS reading
//! contributes a thin ridge along a circle), so the search is exhaustive on a
//! grid and then refined locally.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mixture_log_likelihood, MixtureParams};
use crate::types::Position;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlConfig {
    /// Half side of the search window around the dead-reckoned position.
    pub half_width: f64,
    /// Grid spacing of the exhaustive pass.
    pub resolution: f64,
    /// Each round halves the spacing around the incumbent.
    pub refinement_rounds: usize,
}

impl Default for MlConfig {
    fn default() -> Self {
        MlConfig {
            half_width: 3.0,
            resolution: 0.05,
            refinement_rounds: 3,
        }
    }
}

impl MlConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.resolution > 0.0 && self.resolution.is_finite()) {
            return Err(Error::config(format!("ML resolution must be positive, got {}", self.resolution)));
        }
        if !(self.half_width >= 0.0 && self.half_width.is_finite()) {
            return Err(Error::config(format!("ML half_width must be non-negative, got {}", self.half_width)));
        }
        Ok(())
    }
}

/// A reading paired with the (true) position of the node at the other end.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnchoredRange {
    pub neighbor: Position,
    pub theta: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlEstimate {
    pub position: Position,
    /// Objective at `position`; `0` when there were no readings.
    pub log_likelihood: f64,
    /// No readings were available; `position` is the dead-reckoned input.
    pub no_neighbors: bool,
}

/// `Σ_m ln[α·p_los(θ_m | ‖p − v_m‖) + (1−α)·p_nlos(θ_m | ‖p − v_m‖)]`.
pub fn ml_objective(p: Position, ranges: &[AnchoredRange], params: &MixtureParams) -> f64 {
    ranges
        .iter()
        .map(|r| mixture_log_likelihood(r.theta, p.distance(&r.neighbor), params))
        .sum()
}

/// Mixture log-likelihood of one reading sampled on a uniform distance grid,
/// linearly interpolated in between. Only used to rank points of the
/// exhaustive pass; refinement evaluates the exact objective.
struct Profile {
    start: f64,
    inv_step: f64,
    values: Vec<f64>,
}

impl Profile {
    fn new(theta: f64, d_min: f64, d_max: f64, step: f64, params: &MixtureParams) -> Self {
        let n = ((d_max - d_min) / step).ceil() as usize + 2;
        let values = (0..n)
            .map(|i| mixture_log_likelihood(theta, d_min + i as f64 * step, params))
            .collect();
        Profile {
            start: d_min,
            inv_step: 1.0 / step,
            values,
        }
    }

    #[inline]
    fn eval(&self, d: f64) -> f64 {
        let u = ((d - self.start) * self.inv_step).max(0.0);
        let i = (u as usize).min(self.values.len() - 2);
        let frac = (u - i as f64).min(1.0);
        self.values[i] + frac * (self.values[i + 1] - self.values[i])
    }
}

fn better(candidate: (f64, f64), incumbent: (f64, f64)) -> bool {
    // (objective, distance to dead reckoning); near-equal objectives go to the closer point
    let (obj, dist) = candidate;
    let (best_obj, best_dist) = incumbent;
    let tol = 1e-9 * best_obj.abs().max(1.0);
    obj > best_obj + tol || ((obj - best_obj).abs() <= tol && dist < best_dist)
}

/// Local ML position given readings to nodes whose true positions are known.
pub fn genie_ml_estimate(
    ranges: &[AnchoredRange],
    dead_reckoned: Position,
    params: &MixtureParams,
    config: &MlConfig,
) -> Result<MlEstimate> {
    config.validate()?;
    if ranges.is_empty() {
        return Ok(MlEstimate {
            position: dead_reckoned,
            log_likelihood: 0.0,
            no_neighbors: true,
        });
    }
    let h = config.resolution;
    let steps = (config.half_width / h).round() as i64;
    let reach = config.half_width * std::f64::consts::SQRT_2 + h;
    let profiles: Vec<(Position, Profile)> = ranges
        .iter()
        .map(|r| {
            let c = dead_reckoned.distance(&r.neighbor);
            let profile = Profile::new(r.theta, (c - reach).max(0.0), c + reach, h / 5.0, params);
            (r.neighbor, profile)
        })
        .collect();

    let mut best = dead_reckoned;
    let mut best_key = (f64::NEG_INFINITY, f64::INFINITY);
    for i in -steps..=steps {
        for j in -steps..=steps {
            let p = Position::new(dead_reckoned.x + i as f64 * h, dead_reckoned.y + j as f64 * h);
            let obj: f64 = profiles.iter().map(|(v, prof)| prof.eval(p.distance(v))).sum();
            let key = (obj, p.distance(&dead_reckoned));
            if better(key, best_key) {
                best = p;
                best_key = key;
            }
        }
    }

    let mut best_obj = ml_objective(best, ranges, params);
    let mut spacing = h;
    for _ in 0..config.refinement_rounds {
        spacing /= 2.0;
        let center = best;
        for i in -2i32..=2 {
            for j in -2i32..=2 {
                let p = Position::new(center.x + f64::from(i) * spacing, center.y + f64::from(j) * spacing);
                let key = (ml_objective(p, ranges, params), p.distance(&dead_reckoned));
                if better(key, (best_obj, best.distance(&dead_reckoned))) {
                    best = p;
                    best_obj = key.0;
                }
            }
        }
    }
    Ok(MlEstimate {
        position: best,
        log_likelihood: best_obj,
        no_neighbors: false,
    })
}
