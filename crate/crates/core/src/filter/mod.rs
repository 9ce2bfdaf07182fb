//! Per-node particle filter over position, with the LOS indicator of every
//! link marginalised out analytically by a forward recursion carried inside
//! each particle.
//!
//! Particles are proposed from the inertial motion model, so the importance
//! weight update reduces to the range likelihood. With the indicator
//! marginalised, that likelihood for neighbor `m` is `Σ_z φ_t(z)`; the
//! filter stores the `φ` pair renormalised to sum to one and adds the log of
//! the normaliser to the particle's log-weight, which is exactly the
//! incremental marginal likelihood. Readings from different neighbors are
//! conditionally independent given positions, so their increments add.

mod belief;
mod resample;

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

pub use belief::{update_belief, LogTransition, NeighborBelief};
pub use resample::{effective_sample_size, systematic_resample};

use crate::error::{Error, Result};
use crate::math::log_sum_exp;
use crate::model::{
    los_log_likelihood, nlos_log_likelihood, stationary_distribution, LosIndicator, LosTransition,
    MixtureParams,
};
use crate::scenario::InsReading;
use crate::types::{NodeId, Position};

/// How `detect_z` aggregates per-particle beliefs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionWeighting {
    /// `Σ_i w_i φ_i(z)` with normalized importance weights.
    #[default]
    Importance,
    /// `Σ_i φ_i(z)`, ignoring the weights.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FilterConfig {
    pub particle_count: usize,
    /// Resample when ESS drops below this fraction of the particle count.
    pub ess_threshold: f64,
    /// Reset when fewer distinct particles remain; `particle_count / 20` when absent.
    pub reset_distinct_threshold: Option<usize>,
    pub reset_radius: f64,
    pub init_spread: f64,
    pub detection: DetectionWeighting,
    /// Beliefs of neighbors out of range for more steps than this are dropped.
    pub belief_retention: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            particle_count: 900,
            ess_threshold: 0.5,
            reset_distinct_threshold: None,
            reset_radius: 1.0,
            init_spread: 1.0,
            detection: DetectionWeighting::Importance,
            belief_retention: 50,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<()> {
        if self.particle_count == 0 {
            return Err(Error::config("particle_count must be at least 1"));
        }
        if !(self.ess_threshold > 0.0 && self.ess_threshold <= 1.0) {
            return Err(Error::config(format!("ess_threshold must lie in (0, 1], got {}", self.ess_threshold)));
        }
        if !(self.reset_radius > 0.0 && self.reset_radius.is_finite()) {
            return Err(Error::config(format!("reset_radius must be positive, got {}", self.reset_radius)));
        }
        if !(self.init_spread >= 0.0 && self.init_spread.is_finite()) {
            return Err(Error::config(format!("init_spread must be non-negative, got {}", self.init_spread)));
        }
        Ok(())
    }

    pub fn reset_threshold(&self) -> usize {
        self.reset_distinct_threshold
            .unwrap_or(self.particle_count / 20)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Particle {
    pub position: Position,
    /// Normalized so that `Σ exp(log_weight) = 1`.
    pub log_weight: f64,
}

/// Beliefs about one neighbor's link, one entry per particle.
#[derive(Clone, Debug, PartialEq)]
struct NeighborTrack {
    id: NodeId,
    beliefs: Vec<NeighborBelief>,
    idle_steps: usize,
}

/// A reading available to this node at the current step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkReading {
    pub neighbor: NodeId,
    pub theta: f64,
    /// Broadcast estimate of the neighbor (exact position for anchors).
    pub neighbor_est: Position,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    node: NodeId,
    particles: Vec<Particle>,
    /// Sorted by neighbor id.
    neighbors: Vec<NeighborTrack>,
    estimate: Position,
    detections: BTreeMap<NodeId, LosIndicator>,
    step: usize,
    weighting: DetectionWeighting,
}

fn uniform_in_disc<R: Rng + ?Sized>(center: Position, radius: f64, rng: &mut R) -> Position {
    if radius == 0.0 {
        return center;
    }
    let r = radius * rng.random::<f64>().sqrt();
    let a = TAU * rng.random::<f64>();
    Position::new(center.x + r * a.cos(), center.y + r * a.sin())
}

/// `K` particles uniform in a disc of radius `init_spread` around `prior`,
/// equally weighted, with no neighbor beliefs.
pub fn init_filter<R: Rng + ?Sized>(
    node: NodeId,
    prior: Position,
    config: &FilterConfig,
    rng: &mut R,
) -> Result<FilterState> {
    config.validate()?;
    let k = config.particle_count;
    let log_w = -(k as f64).ln();
    let particles = (0..k)
        .map(|_| Particle {
            position: uniform_in_disc(prior, config.init_spread, rng),
            log_weight: log_w,
        })
        .collect();
    let mut state = FilterState {
        node,
        particles,
        neighbors: Vec::new(),
        estimate: prior,
        detections: BTreeMap::new(),
        step: 0,
        weighting: config.detection,
    };
    state.estimate = state.estimate_position();
    Ok(state)
}

impl FilterState {
    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Estimate recorded by the last call to [`FilterState::refresh_estimate`].
    pub fn estimate(&self) -> Position {
        self.estimate
    }

    pub fn detections(&self) -> &BTreeMap<NodeId, LosIndicator> {
        &self.detections
    }

    pub fn weights(&self) -> Vec<f64> {
        self.particles.iter().map(|p| p.log_weight.exp()).collect()
    }

    pub fn tracked_neighbors(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.neighbors.iter().map(|n| n.id)
    }

    pub fn belief(&self, particle: usize, neighbor: NodeId) -> Option<NeighborBelief> {
        self.track(neighbor).map(|t| t.beliefs[particle])
    }

    fn track(&self, neighbor: NodeId) -> Option<&NeighborTrack> {
        self.neighbors
            .binary_search_by_key(&neighbor, |n| n.id)
            .ok()
            .map(|i| &self.neighbors[i])
    }

    /// Replace the particle cloud. Weights are renormalized; beliefs are dropped.
    pub fn set_particles(&mut self, particles: Vec<Particle>) -> Result<()> {
        if particles.is_empty() {
            return Err(Error::EmptyInput("particle set"));
        }
        self.particles = particles;
        self.neighbors.clear();
        self.normalize()
    }

    /// Set the belief every particle holds for `neighbor`.
    pub fn set_belief(&mut self, neighbor: NodeId, belief: NeighborBelief) {
        let k = self.particles.len();
        match self.neighbors.binary_search_by_key(&neighbor, |n| n.id) {
            Ok(i) => self.neighbors[i].beliefs = vec![belief; k],
            Err(i) => self.neighbors.insert(
                i,
                NeighborTrack {
                    id: neighbor,
                    beliefs: vec![belief; k],
                    idle_steps: 0,
                },
            ),
        }
    }

    /// Move every particle by the inertial displacement plus `N(0, σ_ins²)`
    /// per axis. Weights are untouched because the proposal is the motion prior.
    pub fn predict<R: Rng + ?Sized>(&mut self, ins: &InsReading, params: &MixtureParams, rng: &mut R) {
        let sigma = params.sigma_ins();
        if sigma > 0.0 {
            let normal = Normal::new(0.0, sigma).expect("validated sigma");
            for p in &mut self.particles {
                p.position.x += ins.dx + normal.sample(rng);
                p.position.y += ins.dy + normal.sample(rng);
            }
        } else {
            for p in &mut self.particles {
                p.position.x += ins.dx;
                p.position.y += ins.dy;
            }
        }
        self.step = ins.t;
    }

    /// Absorb this step's readings into the neighbor beliefs and the weights.
    ///
    /// Neighbors seen for the first time start from the stationary prior.
    /// Tracked neighbors without a reading are mixed through the chain and
    /// dropped after `belief_retention` idle steps.
    pub fn measurement_update(
        &mut self,
        readings: &[LinkReading],
        trans: &LosTransition,
        params: &MixtureParams,
        belief_retention: usize,
    ) -> Result<()> {
        let log_trans = LogTransition::from(trans);
        let pi_los = stationary_distribution(trans)
            .map(|(_, pi1)| pi1)
            .unwrap_or(params.alpha());
        let k = self.particles.len();

        let mut increments = vec![0.0; k];
        let mut seen = vec![false; self.neighbors.len()];
        let mut fresh: Vec<NeighborTrack> = Vec::new();

        for reading in readings {
            let track = match self.neighbors.binary_search_by_key(&reading.neighbor, |n| n.id) {
                Ok(i) => {
                    seen[i] = true;
                    &mut self.neighbors[i]
                }
                Err(_) => {
                    fresh.push(NeighborTrack {
                        id: reading.neighbor,
                        beliefs: vec![NeighborBelief::prior(pi_los); k],
                        idle_steps: 0,
                    });
                    fresh.last_mut().expect("just pushed")
                }
            };
            track.idle_steps = 0;
            for ((particle, belief), inc) in self
                .particles
                .iter()
                .zip(track.beliefs.iter_mut())
                .zip(increments.iter_mut())
            {
                let d = particle.position.distance(&reading.neighbor_est);
                let before = belief.log_total();
                let next = belief.absorb(
                    &log_trans,
                    nlos_log_likelihood(reading.theta, d, params),
                    los_log_likelihood(reading.theta, d, params),
                );
                let after = next.log_total();
                *inc += after - before;
                *belief = next.normalized();
            }
        }

        for (track, seen) in self.neighbors.iter_mut().zip(&seen) {
            if !seen {
                track.idle_steps += 1;
                for b in &mut track.beliefs {
                    *b = b.mix(&log_trans);
                }
            }
        }
        self.neighbors.retain(|t| t.idle_steps <= belief_retention);
        for track in fresh {
            let at = self
                .neighbors
                .binary_search_by_key(&track.id, |n| n.id)
                .unwrap_or_else(|i| i);
            self.neighbors.insert(at, track);
        }

        for (p, inc) in self.particles.iter_mut().zip(&increments) {
            p.log_weight += inc;
        }
        self.normalize()
    }

    fn normalize(&mut self) -> Result<()> {
        let lw: Vec<f64> = self.particles.iter().map(|p| p.log_weight).collect();
        let total = log_sum_exp(&lw);
        if !total.is_finite() {
            return Err(Error::TotalDegeneracy);
        }
        for p in &mut self.particles {
            p.log_weight -= total;
            if p.log_weight.is_nan() {
                p.log_weight = f64::NEG_INFINITY;
            }
        }
        Ok(())
    }

    /// LOS iff the aggregated `φ(z=1)` strictly exceeds `φ(z=0)`; ties are NLOS.
    pub fn detect_z(&self, neighbor: NodeId) -> Result<LosIndicator> {
        let track = self.track(neighbor).ok_or(Error::UnknownNeighbor(neighbor))?;
        let (mut s0, mut s1) = (0.0, 0.0);
        for (p, b) in self.particles.iter().zip(&track.beliefs) {
            let w = match self.weighting {
                DetectionWeighting::Importance => p.log_weight.exp(),
                DetectionWeighting::Uniform => 1.0,
            };
            let b = b.normalized();
            s0 += w * b.phi0();
            s1 += w * b.phi1();
        }
        Ok(LosIndicator::from_bool(s1 > s0))
    }

    /// Weighted mean of particle positions.
    pub fn estimate_position(&self) -> Position {
        let (mut x, mut y) = (0.0, 0.0);
        for p in &self.particles {
            let w = p.log_weight.exp();
            x += w * p.position.x;
            y += w * p.position.y;
        }
        Position::new(x, y)
    }

    /// Recompute and store the MMSE estimate.
    pub fn refresh_estimate(&mut self) -> Position {
        self.estimate = self.estimate_position();
        self.estimate
    }

    pub fn effective_sample_size(&self) -> f64 {
        effective_sample_size(&self.weights())
    }

    /// Systematic resampling when ESS falls below `ess_threshold · K`.
    /// Returns whether resampling happened.
    pub fn maybe_resample<R: Rng + ?Sized>(&mut self, config: &FilterConfig, rng: &mut R) -> bool {
        let k = self.particles.len();
        if self.effective_sample_size() >= config.ess_threshold * k as f64 {
            return false;
        }
        let ancestors = systematic_resample(&self.weights(), k, rng);
        self.apply_ancestors(&ancestors);
        true
    }

    fn apply_ancestors(&mut self, ancestors: &[usize]) {
        let k = ancestors.len();
        let log_w = -(k as f64).ln();
        self.particles = ancestors
            .iter()
            .map(|&a| Particle {
                position: self.particles[a].position,
                log_weight: log_w,
            })
            .collect();
        for track in &mut self.neighbors {
            track.beliefs = ancestors.iter().map(|&a| track.beliefs[a]).collect();
        }
    }

    pub fn distinct_positions(&self) -> usize {
        let mut keys: Vec<(u64, u64)> = self
            .particles
            .iter()
            .map(|p| (p.position.x.to_bits(), p.position.y.to_bits()))
            .collect();
        keys.sort_unstable();
        keys.dedup();
        keys.len()
    }

    /// Redraw the cloud uniformly in a disc of `reset_radius` around the
    /// current estimate when too few distinct particles remain.
    /// Returns whether a reset happened.
    pub fn maybe_reset<R: Rng + ?Sized>(
        &mut self,
        config: &FilterConfig,
        pi_los: f64,
        rng: &mut R,
    ) -> bool {
        if self.distinct_positions() >= config.reset_threshold() {
            return false;
        }
        let center = self.estimate_position();
        self.reset_around(center, config.reset_radius, pi_los, rng);
        true
    }

    /// Unconditional reset; also the recovery path after total degeneracy.
    pub fn reset_around<R: Rng + ?Sized>(&mut self, center: Position, radius: f64, pi_los: f64, rng: &mut R) {
        let k = self.particles.len();
        let log_w = -(k as f64).ln();
        for p in &mut self.particles {
            p.position = uniform_in_disc(center, radius, rng);
            p.log_weight = log_w;
        }
        let prior = NeighborBelief::prior(pi_los);
        for track in &mut self.neighbors {
            track.beliefs.iter_mut().for_each(|b| *b = prior);
        }
    }

    /// Record detections for the given neighbors, replacing the previous set.
    pub fn refresh_detections(&mut self, neighbors: impl IntoIterator<Item = NodeId>) -> Result<()> {
        let mut out = BTreeMap::new();
        for m in neighbors {
            out.insert(m, self.detect_z(m)?);
        }
        self.detections = out;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn cfg(k: usize) -> FilterConfig {
        FilterConfig {
            particle_count: k,
            ..FilterConfig::default()
        }
    }

    fn state_from(positions: &[(f64, f64)], weights: &[f64]) -> FilterState {
        let mut s = init_filter(NodeId(0), Position::default(), &cfg(positions.len()), &mut rng(0)).unwrap();
        s.set_particles(
            positions
                .iter()
                .zip(weights)
                .map(|(&(x, y), &w)| Particle {
                    position: Position::new(x, y),
                    log_weight: w.ln(),
                })
                .collect(),
        )
        .unwrap();
        s
    }

    #[test]
    fn zero_spread_puts_every_particle_on_the_prior() {
        let c = FilterConfig {
            init_spread: 0.0,
            particle_count: 50,
            ..FilterConfig::default()
        };
        let prior = Position::new(3.0, -2.0);
        let s = init_filter(NodeId(1), prior, &c, &mut rng(1)).unwrap();
        assert!(s.particles().iter().all(|p| p.position == prior));
        assert!(s.estimate().distance(&prior) < 1e-12);
    }

    #[test]
    fn full_particle_count_with_uniform_weights() {
        let s = init_filter(NodeId(0), Position::default(), &FilterConfig::default(), &mut rng(2)).unwrap();
        assert_eq!(s.len(), 900);
        for w in s.weights() {
            assert!((w - 1.0 / 900.0).abs() < 1e-15);
        }
        assert!(s.particles().iter().all(|p| p.position.distance(&Position::default()) <= 1.0));
    }

    #[test]
    fn init_is_seeded() {
        let a = init_filter(NodeId(0), Position::default(), &cfg(20), &mut rng(9)).unwrap();
        let b = init_filter(NodeId(0), Position::default(), &cfg(20), &mut rng(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn noiseless_predict_shifts_exactly() {
        let params = MixtureParams::new(0.3, 0.05, 5.0, 0.0).unwrap();
        let mut s = init_filter(NodeId(0), Position::default(), &cfg(30), &mut rng(3)).unwrap();
        let before = s.clone();
        s.predict(&InsReading { t: 1, k: NodeId(0), dx: 1.0, dy: 0.0 }, &params, &mut rng(4));
        for (a, b) in before.particles().iter().zip(s.particles()) {
            assert_eq!(b.position.x, a.position.x + 1.0);
            assert_eq!(b.position.y, a.position.y);
            assert_eq!(a.log_weight, b.log_weight);
        }
    }

    #[test]
    fn fresh_neighbor_increment_is_the_mixture_density() {
        let params = MixtureParams::new(0.3, 0.05, 5.0, 0.1).unwrap();
        let trans = LosTransition::from_alpha(0.3, 0.15).unwrap();
        let mut s = state_from(&[(0.0, 0.0), (1.0, 0.0)], &[0.5, 0.5]);
        let est = Position::new(4.0, 0.0);
        s.measurement_update(
            &[LinkReading { neighbor: NodeId(7), theta: 3.97, neighbor_est: est }],
            &trans,
            &params,
            50,
        )
        .unwrap();
        let mix = |d: f64| {
            0.3 * crate::model::los_likelihood(3.97, d, &params) + 0.7 * crate::model::nlos_likelihood(3.97, d, &params)
        };
        let (m0, m1) = (mix(4.0), mix(3.0));
        let w = s.weights();
        assert!((w[0] - m0 / (m0 + m1)).abs() < 1e-12);
        assert!((w[1] - m1 / (m0 + m1)).abs() < 1e-12);
    }

    #[test]
    fn no_readings_leave_weights_alone() {
        let params = MixtureParams::default();
        let trans = LosTransition::from_alpha(0.3, 0.15).unwrap();
        let mut s = state_from(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0)], &[0.2, 0.3, 0.5]);
        let before = s.weights();
        s.measurement_update(&[], &trans, &params, 50).unwrap();
        for (a, b) in before.iter().zip(s.weights()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn idle_neighbors_are_mixed_then_dropped() {
        let params = MixtureParams::default();
        let trans = LosTransition::from_alpha(0.3, 0.15).unwrap();
        let mut s = state_from(&[(0.0, 0.0)], &[1.0]);
        let reading = LinkReading { neighbor: NodeId(3), theta: 5.0, neighbor_est: Position::new(5.0, 0.0) };
        s.measurement_update(&[reading], &trans, &params, 2).unwrap();
        let b0 = s.belief(0, NodeId(3)).unwrap();
        s.measurement_update(&[], &trans, &params, 2).unwrap();
        let b1 = s.belief(0, NodeId(3)).unwrap();
        assert_ne!(b0, b1);
        // converges toward the stationary prior
        assert!((b1.phi1() - 0.3).abs() < (b0.phi1() - 0.3).abs());
        s.measurement_update(&[], &trans, &params, 2).unwrap();
        assert!(s.belief(0, NodeId(3)).is_some());
        s.measurement_update(&[], &trans, &params, 2).unwrap();
        assert!(s.belief(0, NodeId(3)).is_none());
    }

    #[test]
    fn vanishing_likelihood_survives_in_log_domain() {
        // both modes underflow in linear space for every particle
        let params = MixtureParams::new(0.5, 1e-3, 5.0, 0.1).unwrap();
        let trans = LosTransition::from_alpha(0.5, 0.25).unwrap();
        let mut s = state_from(&[(0.0, 0.0), (0.1, 0.0)], &[0.5, 0.5]);
        s.measurement_update(
            &[LinkReading { neighbor: NodeId(1), theta: 0.0, neighbor_est: Position::new(1000.0, 0.0) }],
            &trans,
            &params,
            50,
        )
        .unwrap();
        let w = s.weights();
        assert!(w.iter().all(|w| w.is_finite()));
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        // the closer particle explains the (too short) reading better
        assert!(w[1] > w[0]);
    }

    #[test]
    fn non_finite_reading_is_total_degeneracy() {
        let params = MixtureParams::default();
        let trans = LosTransition::from_alpha(0.3, 0.15).unwrap();
        let mut s = state_from(&[(0.0, 0.0), (0.1, 0.0)], &[0.5, 0.5]);
        let r = s.measurement_update(
            &[LinkReading { neighbor: NodeId(1), theta: f64::NAN, neighbor_est: Position::new(3.0, 0.0) }],
            &trans,
            &params,
            50,
        );
        assert!(matches!(r, Err(Error::TotalDegeneracy)));
    }

    #[test]
    fn detection_single_particle_and_tie() {
        let mut s = state_from(&[(0.0, 0.0)], &[1.0]);
        s.set_belief(NodeId(2), NeighborBelief::from_linear(0.4, 0.6));
        assert_eq!(s.detect_z(NodeId(2)).unwrap(), LosIndicator::Los);
        s.set_belief(NodeId(2), NeighborBelief::from_linear(0.6, 0.4));
        assert_eq!(s.detect_z(NodeId(2)).unwrap(), LosIndicator::Nlos);
        s.set_belief(NodeId(2), NeighborBelief::from_linear(0.5, 0.5));
        assert_eq!(s.detect_z(NodeId(2)).unwrap(), LosIndicator::Nlos);
        assert!(matches!(s.detect_z(NodeId(9)), Err(Error::UnknownNeighbor(_))));
    }

    #[test]
    fn weighted_and_uniform_detection_can_disagree() {
        let mut s = state_from(&[(0.0, 0.0), (1.0, 0.0)], &[0.9, 0.1]);
        s.neighbors.push(NeighborTrack {
            id: NodeId(5),
            beliefs: vec![NeighborBelief::from_linear(0.3, 0.7), NeighborBelief::from_linear(0.9, 0.1)],
            idle_steps: 0,
        });
        assert_eq!(s.detect_z(NodeId(5)).unwrap(), LosIndicator::Los);
        s.weighting = DetectionWeighting::Uniform;
        assert_eq!(s.detect_z(NodeId(5)).unwrap(), LosIndicator::Nlos);
    }

    #[test]
    fn estimate_is_weighted_mean() {
        let s = state_from(&[(0.0, 0.0), (2.0, 0.0)], &[0.5, 0.5]);
        assert_eq!(s.estimate_position(), Position::new(1.0, 0.0));
        let s = state_from(&[(0.0, 0.0), (2.0, 3.0)], &[0.0, 1.0]);
        assert_eq!(s.estimate_position(), Position::new(2.0, 3.0));
    }

    #[test]
    fn estimate_matches_hand_computation() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, (i * i) as f64 * 0.5)).collect();
        let raw: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        let total: f64 = raw.iter().sum();
        let w: Vec<f64> = raw.iter().map(|r| r / total).collect();
        let s = state_from(&pts, &w);
        // x = Σ i(i+1) / 55 = 330/55, y = Σ i²(i+1)/2 / 55 = 1155/55
        let e = s.estimate_position();
        assert!((e.x - 6.0).abs() < 1e-12, "{e}");
        assert!((e.y - 21.0).abs() < 1e-12, "{e}");
    }

    #[test]
    fn uniform_weights_skip_resampling() {
        let mut s = init_filter(NodeId(0), Position::default(), &cfg(40), &mut rng(5)).unwrap();
        let before = s.clone();
        assert!(!s.maybe_resample(&cfg(40), &mut rng(6)));
        assert_eq!(s, before);
    }

    #[test]
    fn point_mass_resamples_to_copies_and_carries_beliefs() {
        let mut s = state_from(&[(0.0, 0.0), (1.0, 1.0), (2.0, 2.0)], &[0.0, 1.0, 0.0]);
        s.neighbors.push(NeighborTrack {
            id: NodeId(4),
            beliefs: vec![
                NeighborBelief::from_linear(0.1, 0.9),
                NeighborBelief::from_linear(0.7, 0.3),
                NeighborBelief::from_linear(0.5, 0.5),
            ],
            idle_steps: 0,
        });
        assert!(s.maybe_resample(&cfg(3), &mut rng(7)));
        for i in 0..3 {
            assert_eq!(s.particles()[i].position, Position::new(1.0, 1.0));
            assert_eq!(s.belief(i, NodeId(4)).unwrap(), NeighborBelief::from_linear(0.7, 0.3));
        }
        assert!((s.weights().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn distinct_cloud_is_not_reset() {
        let mut s = init_filter(NodeId(0), Position::default(), &cfg(100), &mut rng(8)).unwrap();
        let before = s.clone();
        assert!(!s.maybe_reset(&cfg(100), 0.3, &mut rng(9)));
        assert_eq!(s, before);
    }

    #[test]
    fn collapsed_cloud_is_redrawn_around_estimate() {
        let pts = vec![(4.0, 4.0); 10];
        let mut s = state_from(&pts, &[0.1; 10]);
        s.set_belief(NodeId(1), NeighborBelief::from_linear(0.01, 0.99));
        let c = FilterConfig {
            particle_count: 10,
            reset_distinct_threshold: Some(2),
            reset_radius: 1.0,
            ..FilterConfig::default()
        };
        assert!(s.maybe_reset(&c, 0.3, &mut rng(10)));
        assert_eq!(s.distinct_positions(), 10);
        for p in s.particles() {
            assert!(p.position.distance(&Position::new(4.0, 4.0)) <= 1.0);
        }
        let b = s.belief(0, NodeId(1)).unwrap();
        assert!((b.phi1() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn invalid_filter_config() {
        let bad = [
            FilterConfig { particle_count: 0, ..FilterConfig::default() },
            FilterConfig { ess_threshold: 0.0, ..FilterConfig::default() },
            FilterConfig { ess_threshold: 1.5, ..FilterConfig::default() },
            FilterConfig { reset_radius: 0.0, ..FilterConfig::default() },
        ];
        for c in bad {
            assert!(c.validate().is_err());
        }
        assert_eq!(FilterConfig::default().reset_threshold(), 45);
    }
}
