//! Scalar functions `R₊ → R₊` used by the separable, composite and
//! composition families and by the pre/post composition combinators, plus
//! the positive scalar fields accepted by the affine and conic combinators.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;

/// Declarative description of a strictly increasing scalar function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarFunctionSpec {
    /// `t^q`, q > 1.
    Power { q: f64 },
    /// `exp(scale·t)`, scale > 0.
    Exponential { scale: f64 },
    /// `exp(a·t + b·t²)`, a ≥ 0, b > 0. Strictly log-convex.
    ExpQuadratic { a: f64, b: f64 },
    /// Values at uniform knots of [0, 1]. The derivative is the piecewise
    /// linear interpolant of the midpoint slopes (extended linearly past the
    /// end midpoints) and the function is its integral anchored at
    /// `values[0]`.
    Tabulated { values: Vec<f64> },
}

/// Validated scalar function ready for evaluation.
#[derive(Clone, Debug)]
pub struct ScalarFn {
    spec: ScalarFunctionSpec,
    table: Option<Table>,
}

#[derive(Clone, Debug)]
struct Table {
    v0: f64,
    /// Midpoints of the knot intervals.
    mid: Vec<f64>,
    /// Secant slopes attached to the midpoints.
    slope: Vec<f64>,
    /// Integral of the derivative from 0 to each midpoint.
    acc: Vec<f64>,
}

impl Table {
    fn build(values: &[f64]) -> Result<Self> {
        let n = values.len();
        if n < 3 {
            return Err(Error::param("tabulated function needs at least 3 values"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("tabulated values must be finite"));
        }
        if values[0] < 0.0 {
            return Err(Error::param("tabulated function must be nonnegative at 0"));
        }
        let h = 1.0 / (n - 1) as f64;
        let slope: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]) / h).collect();
        if slope.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param("tabulated values are not strictly convex"));
        }
        let mid: Vec<f64> = (0..n - 1).map(|i| (i as f64 + 0.5) * h).collect();
        let d0 = slope[0] - (slope[1] - slope[0]) / (mid[1] - mid[0]) * mid[0];
        if d0 < 0.0 {
            return Err(Error::param(
                "tabulated function is not increasing on R+ (negative slope at 0)",
            ));
        }
        let mut acc = Vec::with_capacity(n - 1);
        acc.push(0.5 * (d0 + slope[0]) * mid[0]);
        for i in 1..n - 1 {
            let prev = acc[i - 1];
            acc.push(prev + 0.5 * (slope[i - 1] + slope[i]) * (mid[i] - mid[i - 1]));
        }
        Ok(Table {
            v0: values[0],
            mid,
            slope,
            acc,
        })
    }

    fn segment(&self, t: f64) -> usize {
        let last = self.mid.len() - 2;
        let pos = self.mid.partition_point(|&m| m <= t);
        pos.saturating_sub(1).min(last)
    }

    fn curvature(&self, i: usize) -> f64 {
        (self.slope[i + 1] - self.slope[i]) / (self.mid[i + 1] - self.mid[i])
    }

    fn value<R: Real>(&self, t: &R) -> R {
        let i = self.segment(t.to_f64());
        let d = t.clone() - t.lit(self.mid[i]);
        t.lit(self.v0 + self.acc[i])
            + t.lit(self.slope[i]) * d.clone()
            + t.lit(0.5 * self.curvature(i)) * d.clone() * d
    }

    fn deriv<R: Real>(&self, t: &R) -> R {
        let i = self.segment(t.to_f64());
        let d = t.clone() - t.lit(self.mid[i]);
        t.lit(self.slope[i]) + t.lit(self.curvature(i)) * d
    }
}

impl ScalarFunctionSpec {
    /// Validates parameters and precomputes tables.
    pub fn compile(&self) -> Result<ScalarFn> {
        let table = match self {
            ScalarFunctionSpec::Power { q } => {
                if !(q.is_finite() && *q > 1.0) {
                    return Err(Error::param(format!("power exponent q must be > 1, got {q}")));
                }
                None
            }
            ScalarFunctionSpec::Exponential { scale } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::param(format!(
                        "exponential scale must be > 0, got {scale}"
                    )));
                }
                None
            }
            ScalarFunctionSpec::ExpQuadratic { a, b } => {
                if !(a.is_finite() && *a >= 0.0 && b.is_finite() && *b > 0.0) {
                    return Err(Error::param(format!(
                        "exp_quadratic needs a >= 0 and b > 0, got a={a}, b={b}"
                    )));
                }
                None
            }
            ScalarFunctionSpec::Tabulated { values } => Some(Table::build(values)?),
        };
        Ok(ScalarFn {
            spec: self.clone(),
            table,
        })
    }
}

impl ScalarFn {
    pub fn spec(&self) -> &ScalarFunctionSpec {
        &self.spec
    }

    pub fn value<R: Real>(&self, t: &R) -> R {
        match &self.spec {
            ScalarFunctionSpec::Power { q } => t.powf(*q),
            ScalarFunctionSpec::Exponential { scale } => (t.lit(*scale) * t.clone()).exp(),
            ScalarFunctionSpec::ExpQuadratic { a, b } => log_eq(*a, *b, t).exp(),
            ScalarFunctionSpec::Tabulated { .. } => self.table().value(t),
        }
    }

    pub fn deriv<R: Real>(&self, t: &R) -> R {
        match &self.spec {
            ScalarFunctionSpec::Power { q } => t.lit(*q) * t.powf(q - 1.0),
            ScalarFunctionSpec::Exponential { scale } => {
                t.lit(*scale) * (t.lit(*scale) * t.clone()).exp()
            }
            ScalarFunctionSpec::ExpQuadratic { a, b } => {
                (t.lit(*a) + t.lit(2.0 * b) * t.clone()) * log_eq(*a, *b, t).exp()
            }
            ScalarFunctionSpec::Tabulated { .. } => self.table().deriv(t),
        }
    }

    /// `h(u) - h(t)` given `c = u - t >= 0`, avoiding cancellation where a
    /// closed form exists.
    pub fn value_gap<R: Real>(&self, u: f64, t: &R, c: &R) -> R {
        match &self.spec {
            ScalarFunctionSpec::Power { q } if u > 0.0 => {
                let r = -(c.clone() / c.lit(u));
                -(t.lit(u).powf(*q) * (t.lit(*q) * r.ln_1p()).exp_m1())
            }
            ScalarFunctionSpec::Exponential { scale } => {
                let hu = (t.lit(*scale) * t.lit(u)).exp();
                -(hu * (-(t.lit(*scale) * c.clone())).exp_m1())
            }
            ScalarFunctionSpec::ExpQuadratic { a, b } => {
                let hu = log_eq(*a, *b, &t.lit(u)).exp();
                let dl = c.clone() * (t.lit(*a) + t.lit(*b) * (t.lit(u) + t.clone()));
                -(hu * (-dl).exp_m1())
            }
            _ => self.value(&t.lit(u)) - self.value(t),
        }
    }

    /// The value `h(u)` that [`Self::value_gap`] measures against.
    pub fn upper_value<R: Real>(&self, u: f64, like: &R) -> R {
        match &self.spec {
            ScalarFunctionSpec::Power { q } if u > 0.0 => like.lit(u).powf(*q),
            ScalarFunctionSpec::Exponential { scale } => (like.lit(*scale) * like.lit(u)).exp(),
            ScalarFunctionSpec::ExpQuadratic { a, b } => log_eq(*a, *b, &like.lit(u)).exp(),
            _ => self.value(&like.lit(u)),
        }
    }

    /// `h'(1) - h'(t)` given `c = 1 - t >= 0`.
    pub fn deriv_gap_to_one<R: Real>(&self, t: &R, c: &R) -> R {
        match &self.spec {
            ScalarFunctionSpec::Power { q } => {
                -(t.lit(*q) * (t.lit(q - 1.0) * (-c.clone()).ln_1p()).exp_m1())
            }
            ScalarFunctionSpec::Exponential { scale } => {
                let top = t.lit(*scale) * t.lit(*scale).exp();
                -(top * (-(t.lit(*scale) * c.clone())).exp_m1())
            }
            ScalarFunctionSpec::ExpQuadratic { a, b } => {
                let one = t.lit(1.0);
                let l1 = log_eq(*a, *b, &one);
                let dl = c.clone() * (t.lit(*a) + t.lit(*b) * (one + t.clone()));
                let first = -((t.lit(*a) + t.lit(2.0 * b)) * l1.exp() * (-dl).exp_m1());
                first + t.lit(2.0 * b) * c.clone() * log_eq(*a, *b, t).exp()
            }
            ScalarFunctionSpec::Tabulated { .. } => self.deriv(&t.lit(1.0)) - self.deriv(t),
        }
    }

    pub fn value_f64(&self, t: f64) -> f64 {
        self.value(&t)
    }

    pub fn deriv_f64(&self, t: f64) -> f64 {
        self.deriv(&t)
    }

    /// Whether `ln h` is convex on R₊ (strictly when `strict`).
    pub fn log_convex(&self, strict: bool) -> bool {
        match &self.spec {
            ScalarFunctionSpec::Exponential { .. } => !strict,
            ScalarFunctionSpec::ExpQuadratic { .. } => true,
            _ => false,
        }
    }

    fn table(&self) -> &Table {
        self.table.as_ref().expect("tabulated function compiled with a table")
    }
}

fn log_eq<R: Real>(a: f64, b: f64, t: &R) -> R {
    t.lit(a) * t.clone() + t.lit(b) * t.clone() * t.clone()
}

/// Positive scalar field on B₊^m used as a coefficient by the affine and
/// conic combinators.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScalarField {
    /// A constant `value` (≥ 0 for shifts, > 0 for multipliers).
    Constant { value: f64 },
    /// `(1 + Σx)^r`.
    SumPower { r: f64 },
}

impl ScalarField {
    pub fn constant(value: f64) -> Self {
        ScalarField::Constant { value }
    }

    pub fn validate(&self, allow_zero: bool) -> Result<()> {
        match self {
            ScalarField::Constant { value } => {
                let ok = value.is_finite() && (*value > 0.0 || (allow_zero && *value == 0.0));
                if !ok {
                    return Err(Error::param(format!(
                        "scalar field constant must be {}, got {value}",
                        if allow_zero { ">= 0" } else { "> 0" }
                    )));
                }
            }
            ScalarField::SumPower { r } => {
                if !r.is_finite() {
                    return Err(Error::param("sum_power exponent must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn as_constant(&self) -> Option<f64> {
        match self {
            ScalarField::Constant { value } => Some(*value),
            ScalarField::SumPower { r } if *r == 0.0 => Some(1.0),
            _ => None,
        }
    }

    pub fn eval<R: Real>(&self, x: &[R]) -> R {
        match self {
            ScalarField::Constant { value } => x[0].lit(*value),
            ScalarField::SumPower { r } => (x[0].lit(1.0) + R::sum(x)).powf(*r),
        }
    }

    /// Range `[lo, hi]` over B₊^m.
    pub fn range(&self) -> (f64, f64) {
        match self {
            ScalarField::Constant { value } => (*value, *value),
            ScalarField::SumPower { r } => {
                let e = 2f64.powf(*r);
                (e.min(1.0), e.max(1.0))
            }
        }
    }
}
