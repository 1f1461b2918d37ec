//! The discrete replicator maps and orbit iteration.
//!
//! Steps are evaluated in a factored form that uses `Σx = 1` to avoid the
//! cancellation in `1 + f_k - ⟨x, F⟩`:
//!
//! * stable: `x_k (f_k + Σ_i x_i g_i)` with `g_i = 1 - f_i`;
//! * zero-sum v1: `x_1 (x_1 + x_2 (1 + f_1) + x_3 g_3)` and cyclically;
//! * zero-sum v2: `x_1 (x_1 + x_2 g_2 + x_3 (1 + f_1))` and cyclically.
//!
//! With `0 ≤ f ≤ 1` every factor is a sum of nonnegative terms, so
//! coordinates keep full relative precision however close they get to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::{sampling, FitnessMap};
use crate::historic::region_of;
use crate::real::Real;
use crate::simplex::SimplexPoint;

/// Range checks accept values up to `1 + RANGE_TOL`.
const RANGE_TOL: f64 = 1e-12;
const RANGE_SAMPLES: usize = 2000;
const RANGE_SEED: u64 = 0x0dd5_eed5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsKind {
    /// `x_k (1 + f_k - ⟨x, F⟩)`.
    Stable,
    /// `x_1 (1 + x_2 f_1 - x_3 f_3)`, `x_2 (1 + x_3 f_2 - x_1 f_1)`,
    /// `x_3 (1 + x_1 f_3 - x_2 f_2)`.
    ZeroSumV1,
    /// `x_1 (1 + x_3 f_1 - x_2 f_2)`, `x_2 (1 + x_1 f_2 - x_3 f_3)`,
    /// `x_3 (1 + x_2 f_3 - x_1 f_1)`.
    ZeroSumV2,
}

impl DynamicsKind {
    pub fn is_zero_sum(self) -> bool {
        !matches!(self, DynamicsKind::Stable)
    }

    /// Default mantissa width for runs of this kind.
    pub fn default_precision(self) -> u32 {
        if self.is_zero_sum() {
            256
        } else {
            53
        }
    }
}

/// A fitness map with a choice of replicator map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicatorSystem {
    fitness: FitnessMap,
    kind: DynamicsKind,
}

/// One step together with its diagnostics.
#[derive(Clone, Debug)]
pub struct Step<R> {
    pub next: SimplexPoint<R>,
    /// `|Σ coords - 1|` before renormalization.
    pub drift: f64,
    /// Components within tolerance below zero that were clamped.
    pub clamped: usize,
}

impl ReplicatorSystem {
    /// Checks dimension and the standing range assumption `0 < f ≤ 1` on
    /// seeded interior sample points.
    pub fn new(fitness: FitnessMap, kind: DynamicsKind) -> Result<Self> {
        let m = fitness.m();
        if m < 2 {
            return Err(Error::param("replicator systems need m >= 2"));
        }
        if kind.is_zero_sum() && m != 3 {
            return Err(Error::Dimension { expected: 3, got: m });
        }
        let mut rng = sampling::rng(RANGE_SEED);
        let center = vec![1.0 / m as f64; m];
        let mut points = vec![center];
        points.extend((0..RANGE_SAMPLES).map(|_| sampling::simplex_interior(&mut rng, m)));
        for x in points {
            let f = fitness.evaluate(&x)?;
            if let Some(k) = f.iter().position(|&v| !(v > 0.0 && v <= 1.0 + RANGE_TOL)) {
                return Err(Error::param(format!(
                    "fitness component {} = {} at {:?} lies outside (0, 1]; normalize the map first",
                    k + 1,
                    f[k],
                    x
                )));
            }
        }
        Ok(ReplicatorSystem { fitness, kind })
    }

    pub fn fitness(&self) -> &FitnessMap {
        &self.fitness
    }

    pub fn kind(&self) -> DynamicsKind {
        self.kind
    }

    pub fn m(&self) -> usize {
        self.fitness.m()
    }

    /// The update factors `ℛ(x)_k / x_k` and the fitness values.
    pub fn factors<R: Real>(&self, x: &SimplexPoint<R>) -> Result<(Vec<R>, Vec<R>)> {
        if x.dim() != self.m() {
            return Err(Error::Dimension {
                expected: self.m(),
                got: x.dim(),
            });
        }
        let (f, g) = self.fitness.evaluate_with_gap(x)?;
        let c = x.coords();
        let one = c[0].lit(1.0);
        let fac = match self.kind {
            DynamicsKind::Stable => {
                let mean_gap = c
                    .iter()
                    .zip(&g)
                    .fold(c[0].zero_like(), |acc, (xi, gi)| acc + xi.clone() * gi.clone());
                f.iter().map(|fk| fk.clone() + mean_gap.clone()).collect()
            }
            DynamicsKind::ZeroSumV1 => {
                let p = |i: usize| one.clone() + f[i].clone();
                vec![
                    c[0].clone() + c[1].clone() * p(0) + c[2].clone() * g[2].clone(),
                    c[0].clone() * g[0].clone() + c[1].clone() + c[2].clone() * p(1),
                    c[0].clone() * p(2) + c[1].clone() * g[1].clone() + c[2].clone(),
                ]
            }
            DynamicsKind::ZeroSumV2 => {
                let p = |i: usize| one.clone() + f[i].clone();
                vec![
                    c[0].clone() + c[1].clone() * g[1].clone() + c[2].clone() * p(0),
                    c[0].clone() * p(1) + c[1].clone() + c[2].clone() * g[2].clone(),
                    c[0].clone() * g[0].clone() + c[1].clone() * p(2) + c[2].clone(),
                ]
            }
        };
        Ok((fac, f))
    }

    /// One application of the map with renormalization. Components below
    /// `-2^(-precision/2)` are an invariant violation; smaller negative
    /// excursions are clamped to zero.
    pub fn step<R: Real>(&self, x: &SimplexPoint<R>) -> Result<Step<R>> {
        self.step_at(x, 0)
    }

    pub(crate) fn step_at<R: Real>(&self, x: &SimplexPoint<R>, index: usize) -> Result<Step<R>> {
        let (fac, _) = self.factors(x).map_err(|e| at_step(e, index))?;
        let tol = tolerance(x.precision());
        let zero = x.coords()[0].zero_like();
        let mut clamped = 0;
        let mut next: Vec<R> = Vec::with_capacity(fac.len());
        for (k, (xk, fk)) in x.coords().iter().zip(fac).enumerate() {
            let v = xk.clone() * fk;
            if !v.is_finite() {
                return Err(Error::Invariant {
                    step: index,
                    msg: format!("component {} is not finite", k + 1),
                });
            }
            if v < zero {
                if v.to_f64() < -tol {
                    return Err(Error::Invariant {
                        step: index,
                        msg: format!(
                            "component {} = {} is negative beyond tolerance {tol:e}; the fitness range leaves (0, 1]",
                            k + 1,
                            v.to_f64()
                        ),
                    });
                }
                clamped += 1;
                next.push(zero.clone());
            } else {
                next.push(v);
            }
        }
        let s = R::sum(&next);
        let drift = (s.clone() - s.lit(1.0)).to_f64().abs();
        if !(s > zero) {
            return Err(Error::Invariant {
                step: index,
                msg: "coordinate sum collapsed to zero".into(),
            });
        }
        let next = next.into_iter().map(|v| v / s.clone()).collect();
        Ok(Step {
            next: SimplexPoint::from_normalized(next),
            drift,
            clamped,
        })
    }

    /// Stable-class step `x_k (1 + f_k - ⟨x, F⟩)`.
    pub fn step_stable<R: Real>(&self, x: &SimplexPoint<R>) -> Result<SimplexPoint<R>> {
        if self.kind != DynamicsKind::Stable {
            return Err(Error::Unsupported("step_stable on a zero-sum system".into()));
        }
        Ok(self.step(x)?.next)
    }

    /// Zero-sum step (either orientation).
    pub fn step_zero_sum<R: Real>(&self, x: &SimplexPoint<R>) -> Result<SimplexPoint<R>> {
        if !self.kind.is_zero_sum() {
            return Err(Error::Unsupported("step_zero_sum on a stable system".into()));
        }
        Ok(self.step(x)?.next)
    }

    /// Density-dependent skew-symmetric payoff matrix at `x`.
    pub fn payoff_matrix<R: Real>(&self, x: &SimplexPoint<R>) -> Result<[[R; 3]; 3]> {
        let f = match self.kind {
            DynamicsKind::Stable => {
                return Err(Error::Unsupported(
                    "payoff matrices are defined for zero-sum systems only".into(),
                ))
            }
            _ => self.fitness.evaluate_point(x)?,
        };
        let z = f[0].zero_like();
        let (f1, f2, f3) = (f[0].clone(), f[1].clone(), f[2].clone());
        Ok(match self.kind {
            DynamicsKind::ZeroSumV1 => [
                [z.clone(), f1.clone(), -f3.clone()],
                [-f1, z.clone(), f2.clone()],
                [f3, -f2, z],
            ],
            _ => [
                [z.clone(), -f2.clone(), f1.clone()],
                [f2, z.clone(), -f3.clone()],
                [-f1, f3, z],
            ],
        })
    }
}

fn at_step(e: Error, index: usize) -> Error {
    match e {
        Error::Numeric { path, msg } => Error::Numeric {
            path,
            msg: format!("{msg} (step {index})"),
        },
        other => other,
    }
}

/// Clamping/drift tolerance `2^(-precision/2)`.
pub fn tolerance(precision: u32) -> f64 {
    2f64.powf(-(precision as f64) / 2.0)
}

/// Per-step diagnostics of an orbit, kept for every step regardless of
/// thinning.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OrbitTrace {
    pub m: usize,
    /// `drift[n]` belongs to the step from state `n` to state `n + 1`.
    pub drift: Vec<f64>,
    /// State coordinates rounded to `f64`, row-major, one row per state.
    pub shadow: Vec<f64>,
    /// `log2` of every coordinate, row-major (`-inf` for exact zeros).
    pub log2: Vec<f64>,
    /// Order region `G_1..G_6` of each state, decided at full precision
    /// (empty unless `m = 3`).
    pub regions: Vec<u8>,
    pub clamped: usize,
    /// Steps whose drift exceeded `2^(-precision/2)`.
    pub flagged_steps: Vec<usize>,
}

impl OrbitTrace {
    /// Number of states.
    pub fn len(&self) -> usize {
        if self.m == 0 {
            0
        } else {
            self.shadow.len() / self.m
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn point(&self, n: usize) -> &[f64] {
        &self.shadow[n * self.m..(n + 1) * self.m]
    }

    pub fn log2_point(&self, n: usize) -> &[f64] {
        &self.log2[n * self.m..(n + 1) * self.m]
    }

    /// `log2` of the smallest coordinate of state `n`.
    pub fn min_log2(&self, n: usize) -> f64 {
        self.log2_point(n).iter().cloned().fold(f64::INFINITY, f64::min)
    }

    pub fn max_drift(&self) -> f64 {
        self.drift.iter().cloned().fold(0.0, f64::max)
    }

    /// Trace of an explicit `f64` state sequence (no drift information).
    /// Regions are decided on the given values.
    pub fn from_points(points: &[Vec<f64>]) -> Result<Self> {
        let m = points.first().map(|p| p.len()).unwrap_or(0);
        let mut t = OrbitTrace {
            m,
            ..Default::default()
        };
        for p in points {
            if p.len() != m {
                return Err(Error::Dimension {
                    expected: m,
                    got: p.len(),
                });
            }
            t.push_state(p);
        }
        t.drift = vec![0.0; points.len().saturating_sub(1)];
        Ok(t)
    }

    fn push_state<R: Real>(&mut self, coords: &[R]) {
        for c in coords {
            self.shadow.push(c.to_f64());
            self.log2.push(c.log2_abs());
        }
        if self.m == 3 {
            self.regions.push(region_of(coords, 0.0) as u8);
        }
    }
}

/// Stored states of an orbit plus its full per-step trace.
#[derive(Clone, Debug)]
pub struct Orbit<R> {
    pub system: ReplicatorSystem,
    pub precision: u32,
    pub thinning: usize,
    pub steps: usize,
    pub states: Vec<SimplexPoint<R>>,
    /// Step index of each stored state.
    pub stored_steps: Vec<usize>,
    pub trace: OrbitTrace,
}

impl<R: Real> Orbit<R> {
    pub fn last(&self) -> &SimplexPoint<R> {
        self.states.last().expect("orbits store the initial state")
    }

    /// Whether every step kept its drift within `2^(-precision/2)`.
    pub fn drift_ok(&self) -> bool {
        self.trace.flagged_steps.is_empty()
    }

    /// CSV with header `n,x1,...,xm,drift`, one row per stored state after
    /// the initial one; the drift column is that of the step producing the
    /// state.
    pub fn to_csv(&self) -> String {
        let m = self.system.m();
        let mut out = String::from("n");
        for k in 1..=m {
            out.push_str(&format!(",x{k}"));
        }
        out.push_str(",drift\n");
        for (state, &n) in self.states.iter().zip(&self.stored_steps).skip(1) {
            out.push_str(&n.to_string());
            for c in state.coords() {
                out.push(',');
                out.push_str(&c.to_decimal());
            }
            out.push(',');
            out.push_str(&crate::real::format_f64(self.trace.drift[n - 1]));
            out.push('\n');
        }
        out
    }
}

/// Iterates `n` steps from `x0`, storing every `thinning`-th state and the
/// final one. Arithmetic runs at the precision carried by `x0`.
pub fn iterate<R: Real>(
    system: &ReplicatorSystem,
    x0: &SimplexPoint<R>,
    n: usize,
    thinning: usize,
) -> Result<Orbit<R>> {
    if n == 0 {
        return Err(Error::param("iterate needs n >= 1"));
    }
    if thinning == 0 {
        return Err(Error::param("thinning must be >= 1"));
    }
    if x0.dim() != system.m() {
        return Err(Error::Dimension {
            expected: system.m(),
            got: x0.dim(),
        });
    }
    let precision = x0.precision();
    let tol = tolerance(precision);
    let m = system.m();
    let mut trace = OrbitTrace {
        m,
        drift: Vec::with_capacity(n),
        shadow: Vec::with_capacity((n + 1) * m),
        log2: Vec::with_capacity((n + 1) * m),
        regions: Vec::with_capacity(if m == 3 { n + 1 } else { 0 }),
        ..Default::default()
    };
    trace.push_state(x0.coords());
    let mut states = vec![x0.clone()];
    let mut stored_steps = vec![0];
    let mut x = x0.clone();
    for i in 0..n {
        let s = system.step_at(&x, i)?;
        trace.drift.push(s.drift);
        trace.clamped += s.clamped;
        if s.drift > tol {
            trace.flagged_steps.push(i);
        }
        x = s.next;
        trace.push_state(x.coords());
        let idx = i + 1;
        if idx % thinning == 0 || idx == n {
            states.push(x.clone());
            stored_steps.push(idx);
        }
    }
    Ok(Orbit {
        system: system.clone(),
        precision,
        thinning,
        steps: n,
        states,
        stored_steps,
        trace,
    })
}
