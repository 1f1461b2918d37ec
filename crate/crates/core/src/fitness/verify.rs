//! Randomized certificates for fitness maps: the similar-order property,
//! range and bound estimates, and finite-difference gradient checks.

use serde::{Deserialize, Serialize};

use super::potential::CompiledPotential;
use super::sampling;
use super::{FitnessMap, Potential, SAMPLED_BOUND_FACTOR};
use crate::error::{Error, Result};
use crate::simplex::similar_order_witness;

/// Default equality tolerance when comparing order patterns.
pub const SOP_TOL: f64 = 1e-12;

/// Violations kept verbatim in a report.
const MAX_LISTED: usize = 20;

/// Seed and size of the sample behind sampled bounds.
const BOUND_SEED: u64 = 0x5eed_b0d5;
const BOUND_RANDOM_POINTS: usize = 4000;
const BOUND_LATTICE_POINTS: usize = 4000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SopViolation {
    /// "simplex" or "ball".
    pub source: String,
    pub point: Vec<f64>,
    pub value: Vec<f64>,
    /// Offending index pair, 1-based.
    pub pair: (usize, usize),
    /// `x_i - x_j` and `f_i - f_j` at the offending pair.
    pub input_gap: f64,
    pub output_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SopReport {
    pub m: usize,
    pub samples: usize,
    pub seed: u64,
    pub tol: f64,
    pub points_checked: usize,
    pub violation_count: usize,
    pub violations: Vec<SopViolation>,
    pub evaluation_errors: Vec<String>,
    pub min_value: f64,
    pub max_value: f64,
    /// Sampled values outside (0, 1]; only counted for normalized maps.
    pub range_exceedances: usize,
    pub passed: bool,
}

/// Draws `samples` points from the simplex and `samples` from B₊^m and
/// checks `x ≈ F(x)` at each.
pub fn verify_sop(map: &FitnessMap, samples: usize, seed: u64) -> SopReport {
    verify_sop_with_tol(map, samples, seed, SOP_TOL)
}

pub fn verify_sop_with_tol(map: &FitnessMap, samples: usize, seed: u64, tol: f64) -> SopReport {
    let m = map.m();
    let mut rng = sampling::rng(seed);
    let mut report = SopReport {
        m,
        samples,
        seed,
        tol,
        points_checked: 0,
        violation_count: 0,
        violations: Vec::new(),
        evaluation_errors: Vec::new(),
        min_value: f64::INFINITY,
        max_value: f64::NEG_INFINITY,
        range_exceedances: 0,
        passed: false,
    };
    let normalized = map.is_normalized();
    for i in 0..2 * samples {
        let (source, x) = if i % 2 == 0 {
            ("simplex", sampling::simplex(&mut rng, m))
        } else {
            ("ball", sampling::positive_ball(&mut rng, m))
        };
        let f = match map.evaluate(&x) {
            Ok(f) => f,
            Err(e) => {
                if report.evaluation_errors.len() < MAX_LISTED {
                    report.evaluation_errors.push(format!("{source} {x:?}: {e}"));
                }
                continue;
            }
        };
        report.points_checked += 1;
        for &v in &f {
            report.min_value = report.min_value.min(v);
            report.max_value = report.max_value.max(v);
            if normalized && !(v > 0.0 && v <= 1.0) {
                report.range_exceedances += 1;
            }
        }
        if let Ok(Some((a, b))) = similar_order_witness(&x, &f, tol) {
            report.violation_count += 1;
            if report.violations.len() < MAX_LISTED {
                report.violations.push(SopViolation {
                    source: source.to_string(),
                    pair: (a, b),
                    input_gap: x[a - 1] - x[b - 1],
                    output_gap: f[a - 1] - f[b - 1],
                    point: x,
                    value: f,
                });
            }
        }
    }
    report.passed = report.violation_count == 0 && report.evaluation_errors.is_empty();
    report
}

/// Upper bound `M` used for normalization: the declared analytic bound, or
/// the maximum over a lattice of B₊^m with spacing `1/grid` times the safety
/// factor.
pub fn bound_estimate(map: &FitnessMap, grid: usize) -> Result<f64> {
    if grid < 2 {
        return Err(Error::param("bound_estimate needs grid >= 2"));
    }
    if map.bound_kind() == super::BoundKind::Analytic {
        return Ok(map.declared_bound());
    }
    let mut hi = f64::NEG_INFINITY;
    for x in lattice(map.m(), grid) {
        for v in map.evaluate(&x)? {
            hi = hi.max(v);
        }
    }
    Ok(hi * SAMPLED_BOUND_FACTOR)
}

/// All points `n / grid` of B₊^m with nonnegative integer `n`, `Σn ≤ grid`.
pub fn lattice(m: usize, grid: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut n = vec![0usize; m];
    loop {
        out.push(n.iter().map(|&v| v as f64 / grid as f64).collect());
        // odometer over compositions with total <= grid
        let mut k = 0;
        loop {
            if k == m {
                return out;
            }
            let total: usize = n.iter().sum();
            if total < grid {
                n[k] += 1;
                break;
            }
            n[k] = 0;
            k += 1;
        }
    }
}

/// Minimum and maximum component over a fixed lattice plus seeded random
/// points of B₊^m.
pub(crate) fn sampled_range<F>(m: usize, mut eval: F) -> Result<(f64, f64)>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut grid = 2;
    while lattice_size(m, grid + 1) <= BOUND_LATTICE_POINTS {
        grid += 1;
    }
    let mut rng = sampling::rng(BOUND_SEED);
    let mut points = lattice(m, grid);
    for i in 0..BOUND_RANDOM_POINTS {
        points.push(if i % 2 == 0 {
            sampling::simplex(&mut rng, m)
        } else {
            sampling::positive_ball(&mut rng, m)
        });
    }
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in &points {
        for v in eval(x)? {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    Ok((lo, hi))
}

fn lattice_size(m: usize, grid: usize) -> usize {
    // C(grid + m, m)
    let mut c: f64 = 1.0;
    for i in 0..m {
        c = c * (grid + m - i) as f64 / (i + 1) as f64;
    }
    c.min(usize::MAX as f64) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub family: String,
    pub m: usize,
    pub points: usize,
    pub step: f64,
    /// Largest `|fd_k - g_k| / max(‖g‖_∞, floor)` over all points and
    /// components.
    pub max_rel_error: f64,
    pub worst_point: Vec<f64>,
    pub passed: bool,
}

/// Compares each gradient component with a central difference of the
/// potential at seeded interior points of the simplex.
pub fn gradient_check(
    potential: &Potential,
    m: usize,
    points: usize,
    seed: u64,
    rel_tol: f64,
) -> Result<GradientCheck> {
    let p = CompiledPotential::compile(potential, m)?;
    let step = 1e-5;
    let mut rng = sampling::rng(seed);
    let mut worst = (0.0f64, Vec::new());
    for _ in 0..points {
        let x = loop {
            let x = sampling::simplex_interior(&mut rng, m);
            if x.iter().all(|&v| v > 10.0 * step) {
                break x;
            }
        };
        let g = p.gradient(&x);
        let scale = g.iter().fold(1e-300f64, |a, v| a.max(v.abs()));
        for k in 0..m {
            let mut up = x.clone();
            let mut dn = x.clone();
            up[k] += step;
            dn[k] -= step;
            let fd = (p.value(&up) - p.value(&dn)) / (2.0 * step);
            let err = (fd - g[k]).abs() / scale;
            if err > worst.0 || worst.1.is_empty() {
                worst = (err.max(worst.0), x.clone());
            }
        }
    }
    Ok(GradientCheck {
        family: potential.family_name().to_string(),
        m,
        points,
        step,
        max_rel_error: worst.0,
        worst_point: worst.1,
        passed: worst.0 <= rel_tol,
    })
}
