use rand::Rng;

/// Effective sample size `1 / Σ w²` of normalized weights.
pub fn effective_sample_size(weights: &[f64]) -> f64 {
    1.0 / weights.iter().map(|w| w * w).sum::<f64>()
}

/// Systematic resampling: one uniform offset, `n` evenly spaced pointers.
/// Returns ancestor indices in non-decreasing order.
pub fn systematic_resample<R: Rng + ?Sized>(weights: &[f64], n: usize, rng: &mut R) -> Vec<usize> {
    let mut ancestors = Vec::with_capacity(n);
    if weights.is_empty() || n == 0 {
        return ancestors;
    }
    let step = 1.0 / n as f64;
    let offset = rng.random::<f64>() * step;
    let mut cumulative = weights[0];
    let mut i = 0;
    for j in 0..n {
        let pointer = offset + j as f64 * step;
        while pointer > cumulative && i + 1 < weights.len() {
            i += 1;
            cumulative += weights[i];
        }
        ancestors.push(i);
    }
    ancestors
}
