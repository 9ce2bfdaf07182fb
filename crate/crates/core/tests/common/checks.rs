//! Measured quantities behind the property criteria. Each returns the raw
//! number so the unit tests and the acceptance run share one computation.

use p2ploc::filter::{systematic_resample, update_belief, NeighborBelief};
use p2ploc::model::{
    los_likelihood, mixture_log_likelihood, nlos_likelihood, LosIndicator, LosTransition, MixtureParams,
};
use p2ploc::runtime::{run, Estimator, RuntimeConfig};
use p2ploc::scenario::{AnchorLayout, Scenario, ScenarioConfig};
use p2ploc::Position;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{chi_square_p_value, enumerate_z_paths, integrate_pieces};

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

/// Random instance: chain, params, a fixed particle path and neighbor track, readings.
pub struct Instance {
    pub params: MixtureParams,
    pub trans: LosTransition,
    pub prior: f64,
    pub dists: Vec<f64>,
    pub thetas: Vec<f64>,
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> Instance {
    let alpha: f64 = rng.random_range(0.05..0.95);
    let p01 = rng.random_range(0.01..(alpha / (1.0 - alpha)).min(1.0));
    let params = MixtureParams::new(alpha, rng.random_range(0.05..1.0), rng.random_range(0.5..6.0), 0.1).unwrap();
    let trans = LosTransition::from_alpha(alpha, p01).unwrap();
    let t = rng.random_range(1..=5);
    let dists: Vec<f64> = (0..t).map(|_| rng.random_range(0.5..10.0)).collect();
    let thetas = dists.iter().map(|d| d + rng.random_range(-0.2..3.0)).collect();
    Instance { params, trans, prior: rng.random_range(0.05..0.95), dists, thetas }
}

pub fn oracle(inst: &Instance) -> f64 {
    // leading unit factor for the pre-reading state z_0 ~ prior
    let mut liks = vec![(1.0, 1.0)];
    for (d, th) in inst.dists.iter().zip(&inst.thetas) {
        liks.push((nlos_likelihood(*th, *d, &inst.params), los_likelihood(*th, *d, &inst.params)));
    }
    enumerate_z_paths(&liks, &inst.trans, inst.prior)
}

pub fn recursion(inst: &Instance) -> f64 {
    let mut b = NeighborBelief::prior(inst.prior);
    for (d, th) in inst.dists.iter().zip(&inst.thetas) {
        b = update_belief(&b, *th, Position::new(*d, 0.0), Position::default(), &inst.trans, &inst.params);
    }
    b.log_total().exp()
}

/// Largest relative gap between recursion and enumeration over `n` instances.
pub fn recursion_max_rel_error(n: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let inst = random_instance(&mut rng);
            rel_err(recursion(&inst), oracle(&inst))
        })
        .fold(0.0, f64::max)
}

fn knots(d: f64, p: &MixtureParams) -> Vec<f64> {
    let (sl, sn) = (p.sigma_los(), p.sigma_nlos());
    let mut k = vec![d - 10.0 * sl, d - 3.0 * sl, d, d + 3.0 * sl, d + 10.0 * sl, d + sn, d + 5.0 * sn, d + 20.0 * sn];
    k.sort_by(f64::total_cmp);
    k.dedup();
    k
}

pub fn total_mass(f: &dyn Fn(f64) -> f64, d: f64, p: &MixtureParams) -> f64 {
    integrate_pieces(f, &knots(d, p), 1e-12)
}

/// Quadrature mass of the LOS, NLOS and mixture densities at distance `d`.
pub fn density_masses(p: &MixtureParams, d: f64) -> [f64; 3] {
    [
        total_mass(&|x| los_likelihood(x, d, p), d, p),
        total_mass(&|x| nlos_likelihood(x, d, p), d, p),
        total_mass(&|x| mixture_log_likelihood(x, d, p).exp(), d, p),
    ]
}

/// Largest per-bin relative error of an `n`-sample NLOS histogram against
/// quadrature, over bins with mass above 1e-3, and the number of such bins.
pub fn nlos_histogram_error(p: &MixtureParams, n: usize, seed: u64) -> (f64, usize) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (lo, hi, bins) = (-0.2, 25.0, 50usize);
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for _ in 0..n {
        let x = p.sample_range(0.0, LosIndicator::Nlos, &mut rng);
        if (lo..hi).contains(&x) {
            counts[((x - lo) / width) as usize] += 1;
        }
    }
    let mut worst = 0.0f64;
    let mut checked = 0;
    for (b, &c) in counts.iter().enumerate() {
        let a = lo + b as f64 * width;
        let mass = integrate_pieces(&|x| nlos_likelihood(x, 0.0, p), &[a, a + width], 1e-12);
        if mass > 1e-3 {
            worst = worst.max((c as f64 / n as f64 - mass).abs() / mass);
            checked += 1;
        }
    }
    (worst, checked)
}

/// LOS fraction of one long chain from the stationary start.
pub fn occupancy(alpha: f64, steps: usize, seed: u64) -> f64 {
    let trans = LosTransition::from_alpha(alpha, alpha / 2.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut z = LosIndicator::from_bool(rand::Rng::random::<f64>(&mut rng) < alpha);
    let mut los = 0usize;
    for _ in 0..steps {
        z = trans.sample_next(z, &mut rng);
        los += usize::from(z.is_los());
    }
    los as f64 / steps as f64
}

pub const WEIGHTS: [f64; 10] = [0.02, 0.05, 0.08, 0.1, 0.15, 0.2, 0.12, 0.1, 0.13, 0.05];

/// χ² p-value of total multiplicities over `trials` resamplings of [`WEIGHTS`].
pub fn multiplicity_p_value(trials: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = WEIGHTS.len();
    let mut counts = vec![0.0; k];
    for _ in 0..trials {
        for i in systematic_resample(&WEIGHTS, k, &mut rng) {
            counts[i] += 1.0;
        }
    }
    let expected: Vec<f64> = WEIGHTS.iter().map(|w| w * (k * trials) as f64).collect();
    chi_square_p_value(&counts, &expected)
}

/// A static node ranging to four anchors with every link LOS.
pub fn pure_los_rmse(seed: u64) -> f64 {
    let anchors = vec![
        Position::new(2.0, 2.0),
        Position::new(9.0, 2.0),
        Position::new(2.0, 9.0),
        Position::new(9.0, 9.0),
    ];
    let c = ScenarioConfig {
        n_mobile: 1,
        n_anchor: 4,
        grid_width: 11.0,
        grid_height: 11.0,
        velocity_per_step: 0.0,
        curve_amplitude: 0.0,
        start_fraction: 1.0,
        n_steps: 100,
        params: MixtureParams::new(1.0, 0.05, 5.0, 0.1).unwrap(),
        anchor_layout: AnchorLayout::Explicit { positions: anchors },
        seed,
        ..ScenarioConfig::default()
    };
    let s = Scenario::generate(&c).unwrap();
    let logs = run(&s, &RuntimeConfig::default()).unwrap();
    let errs: Vec<f64> = logs
        .iter()
        .filter(|l| l.t > 50)
        .map(|l| l.records[0].error(Estimator::ParticleFilter).unwrap())
        .collect();
    (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt()
}

