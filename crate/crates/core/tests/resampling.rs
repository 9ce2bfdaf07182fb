mod common;

use common::checks::multiplicity_p_value;
use p2ploc::filter::{effective_sample_size, systematic_resample};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn expected_multiplicity_passes_chi_square() {
    let p = multiplicity_p_value(10_000, 2024);
    assert!(p > 0.01, "p = {p}");
}

#[test]
fn ess_extremes() {
    assert!((effective_sample_size(&[0.25; 4]) - 4.0).abs() < 1e-12);
    assert!((effective_sample_size(&[0.0, 1.0, 0.0]) - 1.0).abs() < 1e-12);
}

proptest! {
    #[test]
    fn multiplicity_is_floor_or_ceil(raw in prop::collection::vec(0.0f64..1.0, 1..40), seed in any::<u64>()) {
        let total: f64 = raw.iter().sum();
        prop_assume!(total > 1e-6);
        let w: Vec<f64> = raw.iter().map(|x| x / total).collect();
        let n = w.len();
        let idx = systematic_resample(&w, n, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(idx.len(), n);
        let mut counts = vec![0usize; n];
        for i in idx {
            counts[i] += 1;
        }
        for (c, wi) in counts.iter().zip(&w) {
            let e = wi * n as f64;
            prop_assert!((*c as f64 - e).abs() < 1.0 + 1e-9);
        }
    }
}
