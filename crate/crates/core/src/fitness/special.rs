//! Special functions needed by the gamma-product family.

use crate::error::{Error, Result};

/// Switch-over point from upward recurrence to the asymptotic series.
const ASYMPTOTIC_CUTOFF: f64 = 8.0;

/// `B_{2k} / (2k)` for k = 1..=6.
const TAIL: [f64; 6] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
];

/// Digamma function `ψ(t)` for `t > 0`.
///
/// Shifts `t` upward with `ψ(t) = ψ(t+1) - 1/t` until `t >= 8`, then sums
/// `ln t - 1/(2t) - Σ B_{2k} / (2k t^{2k})` over six terms.
pub fn digamma(t: f64) -> Result<f64> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::domain(format!("digamma needs a finite t > 0, got {t}")));
    }
    let mut x = t;
    let mut shift = 0.0;
    while x < ASYMPTOTIC_CUTOFF {
        shift += 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut tail = 0.0;
    for c in TAIL.iter().rev() {
        tail = (tail + c) * inv2;
    }
    Ok(x.ln() - 0.5 / x - tail - shift)
}

/// `Γ(t)` for `t > 0`.
pub fn gamma(t: f64) -> f64 {
    libm::tgamma(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_431;

    #[test]
    fn digamma_at_one_and_two() {
        let p1 = digamma(1.0).unwrap();
        assert!(((p1 + EULER_GAMMA) / EULER_GAMMA).abs() <= 1e-13, "{p1}");
        let p2 = digamma(2.0).unwrap();
        let e2 = 1.0 - EULER_GAMMA;
        assert!(((p2 - e2) / e2).abs() <= 1e-13, "{p2}");
    }

    #[test]
    fn digamma_half() {
        let expect = -EULER_GAMMA - 2.0 * std::f64::consts::LN_2;
        let got = digamma(0.5).unwrap();
        assert!(((got - expect) / expect).abs() <= 1e-13, "{got} vs {expect}");
    }

    #[test]
    fn digamma_rejects_nonpositive() {
        assert!(digamma(0.0).is_err());
        assert!(digamma(-1.5).is_err());
        assert!(digamma(f64::NAN).is_err());
    }

    #[test]
    fn digamma_is_increasing() {
        let mut prev = digamma(0.05).unwrap();
        for i in 2..400 {
            let v = digamma(0.05 * i as f64).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }
}
