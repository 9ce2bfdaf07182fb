//! Independent oracles shared by the integration tests and the acceptance run.
#![allow(dead_code)]

pub mod checks;

use p2ploc::model::{LosIndicator, LosTransition};
use p2ploc::types::{PairKey, Position};

/// Adaptive Simpson quadrature with Richardson correction.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn step(f: &dyn Fn(f64) -> f64, a: f64, b: f64, fa: f64, fm: f64, fb: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        step(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + step(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    step(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Integrate over `[a, b]` split at the given interior points.
pub fn integrate_pieces(f: &dyn Fn(f64) -> f64, knots: &[f64], tol: f64) -> f64 {
    knots.windows(2).map(|w| integrate(f, w[0], w[1], tol)).sum()
}

/// Density of `d + e + n`, `e ~ Exp(mean sn)`, `n ~ N(0, sl²)`, by direct
/// numerical convolution.
pub fn nlos_by_convolution(theta: f64, d: f64, sl: f64, sn: f64) -> f64 {
    let x = theta - d;
    let lo = (x - 12.0 * sl).max(0.0);
    let hi = (x + 12.0 * sl).max(0.0);
    if hi <= lo {
        return 0.0;
    }
    let g = |e: f64| {
        let u = (x - e) / sl;
        (-e / sn).exp() / sn * (-0.5 * u * u).exp() / (sl * (2.0 * std::f64::consts::PI).sqrt())
    };
    integrate(&g, lo, hi, 1e-14)
}

/// Sum over every LOS path of `p(z_1) ∏ p(θ_t | z_t) ∏ p(z_t | z_{t-1})`.
/// `liks[t] = (p(θ_t | z=0), p(θ_t | z=1))`.
pub fn enumerate_z_paths(liks: &[(f64, f64)], trans: &LosTransition, pi_los: f64) -> f64 {
    let n = liks.len();
    let p = |from: u8, to: u8| match (from, to) {
        (0, 0) => 1.0 - trans.p01(),
        (0, 1) => trans.p01(),
        (1, 0) => 1.0 - trans.p11(),
        _ => trans.p11(),
    };
    let mut total = 0.0;
    for mask in 0u32..(1 << n) {
        let z = |t: usize| ((mask >> t) & 1) as u8;
        let mut prob = 1.0;
        for t in 0..n {
            prob *= if t == 0 {
                if z(0) == 1 { pi_los } else { 1.0 - pi_los }
            } else {
                p(z(t - 1), z(t))
            };
            prob *= if z(t) == 1 { liks[t].1 } else { liks[t].0 };
        }
        total += prob;
    }
    total
}

/// O(n²) neighbor pairs, sorted.
pub fn brute_force_pairs(positions: &[Position], radius: f64) -> Vec<PairKey> {
    let mut out = Vec::new();
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            if positions[i].distance(&positions[j]) < radius {
                out.push(PairKey::new(p2ploc::NodeId(i as u32), p2ploc::NodeId(j as u32)));
            }
        }
    }
    out.sort();
    out
}

/// Pearson χ² upper-tail probability.
pub fn chi_square_p_value(observed: &[f64], expected: &[f64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let stat: f64 = observed
        .iter()
        .zip(expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let dof = (observed.len() - 1) as f64;
    1.0 - ChiSquared::new(dof).unwrap().cdf(stat)
}

pub fn los_fraction(states: &[LosIndicator]) -> f64 {
    states.iter().filter(|z| z.is_los()).count() as f64 / states.len() as f64
}
