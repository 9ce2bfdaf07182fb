//! RANSAC trilateration: hypothesise from 3-subsets of readings, score by
//! inlier count under a residual threshold, refit on the best consensus set.
//! Subsets whose own fit leaves a residual above the threshold are discarded;
//! if none survives the result is [`Error::NoConsensus`].

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::ml::AnchoredRange;
use crate::error::{Error, Result};
use crate::model::MixtureParams;
use crate::rng::StreamRng;
use crate::types::Position;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RansacConfig {
    pub iterations: usize,
    /// Inlier residual threshold in units of `σ_los`.
    pub threshold_sigmas: f64,
    /// Gauss-Newton iterations applied to each hypothesis and to the final refit.
    pub refit_iterations: usize,
}

impl Default for RansacConfig {
    fn default() -> Self {
        RansacConfig {
            iterations: 200,
            threshold_sigmas: 3.0,
            refit_iterations: 10,
        }
    }
}

/// Linearised least squares: subtract the first circle equation from the rest.
fn linear_fit(ranges: &[AnchoredRange]) -> Option<Position> {
    let (first, rest) = ranges.split_first()?;
    let (x0, y0, r0) = (first.neighbor.x, first.neighbor.y, first.theta);
    let (mut a11, mut a12, mut a22, mut b1, mut b2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for r in rest {
        let ax = 2.0 * (r.neighbor.x - x0);
        let ay = 2.0 * (r.neighbor.y - y0);
        let b = r0 * r0 - r.theta * r.theta + r.neighbor.x.powi(2) - x0 * x0 + r.neighbor.y.powi(2) - y0 * y0;
        a11 += ax * ax;
        a12 += ax * ay;
        a22 += ay * ay;
        b1 += ax * b;
        b2 += ay * b;
    }
    let det = a11 * a22 - a12 * a12;
    let scale = (a11 * a22).max(1e-300);
    if det.abs() <= 1e-10 * scale {
        return None;
    }
    Some(Position::new((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det))
}

/// Gauss-Newton on `Σ (‖p − v‖ − θ)²` starting from `start`.
fn refine(start: Position, ranges: &[AnchoredRange], iterations: usize) -> Position {
    let mut p = start;
    for _ in 0..iterations {
        let (mut h11, mut h12, mut h22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for r in ranges {
            let d = p.distance(&r.neighbor).max(1e-12);
            let (jx, jy) = ((p.x - r.neighbor.x) / d, (p.y - r.neighbor.y) / d);
            let res = d - r.theta;
            h11 += jx * jx;
            h12 += jx * jy;
            h22 += jy * jy;
            g1 += jx * res;
            g2 += jy * res;
        }
        let det = h11 * h22 - h12 * h12;
        if det.abs() < 1e-12 {
            break;
        }
        let step = Position::new((h22 * g1 - h12 * g2) / det, (h11 * g2 - h12 * g1) / det);
        p = p - step;
        if step.x.hypot(step.y) < 1e-12 {
            break;
        }
    }
    p
}

fn residual(p: Position, r: &AnchoredRange) -> f64 {
    (p.distance(&r.neighbor) - r.theta).abs()
}

pub fn ransac_estimate(
    ranges: &[AnchoredRange],
    params: &MixtureParams,
    config: &RansacConfig,
    rng: &mut StreamRng,
) -> Result<Position> {
    let n = ranges.len();
    if n < 3 {
        return Err(Error::TooFewNeighbors { needed: 3, got: n });
    }
    let threshold = config.threshold_sigmas * params.sigma_los();

    let subsets: Vec<[usize; 3]> = if n * (n - 1) * (n - 2) / 6 <= config.iterations {
        let mut all = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                for c in b + 1..n {
                    all.push([a, b, c]);
                }
            }
        }
        all
    } else {
        (0..config.iterations)
            .map(|_| {
                let idx = sample(rng, n, 3);
                [idx.index(0), idx.index(1), idx.index(2)]
            })
            .collect()
    };

    // (inliers, residual sum): more inliers first, then smaller residuals
    let mut best: Option<(usize, f64, Vec<usize>, Position)> = None;
    for subset in subsets {
        let minimal: Vec<AnchoredRange> = subset.iter().map(|&i| ranges[i]).collect();
        let Some(start) = linear_fit(&minimal) else {
            continue;
        };
        let hyp = refine(start, &minimal, config.refit_iterations);
        // a subset that cannot explain its own readings is not a hypothesis
        if !hyp.is_finite() || minimal.iter().any(|r| residual(hyp, r) >= threshold) {
            continue;
        }
        let inliers: Vec<usize> = (0..n).filter(|&i| residual(hyp, &ranges[i]) < threshold).collect();
        let cost: f64 = inliers.iter().map(|&i| residual(hyp, &ranges[i])).sum();
        let improves = match &best {
            None => true,
            Some((count, best_cost, _, _)) => inliers.len() > *count || (inliers.len() == *count && cost < *best_cost),
        };
        if improves {
            best = Some((inliers.len(), cost, inliers, hyp));
        }
    }
    let (_, _, inliers, hyp) = best.ok_or(Error::NoConsensus)?;
    let consensus: Vec<AnchoredRange> = inliers.iter().map(|&i| ranges[i]).collect();
    let start = linear_fit(&consensus).unwrap_or(hyp);
    let refit = refine(start, &consensus, config.refit_iterations);
    Ok(if refit.is_finite() { refit } else { hyp })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Purpose};

    fn ranges_to(truth: Position, anchors: &[Position]) -> Vec<AnchoredRange> {
        anchors
            .iter()
            .map(|a| AnchoredRange { neighbor: *a, theta: a.distance(&truth) })
            .collect()
    }

    #[test]
    fn exact_ranges_give_exact_position() {
        let truth = Position::new(3.0, -1.5);
        let anchors = [
            Position::new(0.0, 0.0),
            Position::new(8.0, 0.0),
            Position::new(0.0, 7.0),
            Position::new(6.0, 6.0),
        ];
        let mut rng = substream(1, Purpose::Ransac, 0, 0);
        let p = ransac_estimate(&ranges_to(truth, &anchors), &MixtureParams::default(), &RansacConfig::default(), &mut rng)
            .unwrap();
        assert!(p.distance(&truth) < 1e-9, "{p}");
    }

    #[test]
    fn two_neighbors_is_an_error() {
        let truth = Position::new(1.0, 1.0);
        let mut rng = substream(1, Purpose::Ransac, 0, 0);
        let r = ransac_estimate(
            &ranges_to(truth, &[Position::new(0.0, 0.0), Position::new(5.0, 0.0)]),
            &MixtureParams::default(),
            &RansacConfig::default(),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::TooFewNeighbors { needed: 3, got: 2 })));
    }

    #[test]
    fn inconsistent_readings_have_no_consensus() {
        let anchors = [Position::new(0.0, 0.0), Position::new(1.0, 0.0), Position::new(0.0, 1.0)];
        let ranges: Vec<AnchoredRange> = anchors
            .iter()
            .zip([10.0, 1.0, 25.0])
            .map(|(a, theta)| AnchoredRange { neighbor: *a, theta })
            .collect();
        let mut rng = substream(3, Purpose::Ransac, 0, 0);
        let r = ransac_estimate(&ranges, &MixtureParams::default(), &RansacConfig::default(), &mut rng);
        assert!(matches!(r, Err(Error::NoConsensus)), "{r:?}");
    }

    #[test]
    fn rejects_a_single_biased_reading() {
        let truth = Position::new(2.0, 2.0);
        let anchors = [
            Position::new(0.0, 0.0),
            Position::new(8.0, 0.0),
            Position::new(0.0, 7.0),
            Position::new(6.0, 6.0),
            Position::new(-3.0, 4.0),
        ];
        let mut ranges = ranges_to(truth, &anchors);
        ranges[1].theta += 4.0;
        let mut rng = substream(2, Purpose::Ransac, 0, 0);
        let p = ransac_estimate(&ranges, &MixtureParams::default(), &RansacConfig::default(), &mut rng).unwrap();
        assert!(p.distance(&truth) < 1e-6, "{p}");
    }
}
