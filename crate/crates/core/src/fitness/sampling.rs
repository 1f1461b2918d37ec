//! Uniform samplers on the simplex and on the positive part of the unit
//! l1-ball.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Deterministic generator used for every seeded experiment.
pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of a seed, for parallel trials.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Uniform point of the simplex via normalized exponential spacings.
pub fn simplex<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    loop {
        let e: Vec<f64> = (0..m)
            .map(|_| -(1.0 - rng.gen::<f64>()).ln())
            .collect();
        let s: f64 = e.iter().sum();
        if s > 0.0 && s.is_finite() {
            return e.into_iter().map(|v| v / s).collect();
        }
    }
}

/// Uniform point of the simplex interior (all coordinates strictly positive).
pub fn simplex_interior<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    loop {
        let x = simplex(rng, m);
        if x.iter().all(|&c| c > 0.0) {
            return x;
        }
    }
}

/// Uniform point of `{x >= 0, sum x <= 1}`: a simplex point scaled by
/// `U^(1/m)`.
pub fn positive_ball<R: Rng + ?Sized>(rng: &mut R, m: usize) -> Vec<f64> {
    let r = rng.gen::<f64>().powf(1.0 / m as f64);
    simplex(rng, m).into_iter().map(|v| v * r).collect()
}
