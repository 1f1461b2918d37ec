//! Symmetric, strictly Schur-convex potentials whose gradients form the
//! primitive fitness families.

use serde::{Deserialize, Serialize};

use super::scalar::{ScalarFn, ScalarFunctionSpec};
use super::special;
use crate::error::{Error, Result};
use crate::real::Real;

/// Potential families. The fitness map is the gradient of the potential.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum Potential {
    /// Complete homogeneous symmetric polynomial of degree `k`.
    CompleteSymmetric { k: usize },
    /// The `p`-norm.
    Gauge { p: f64 },
    /// `∏ Γ(x_i + a)`.
    GammaProduct { a: f64 },
    /// `Σ f(x_i)` for a strictly convex `f`.
    Separable { f: ScalarFunctionSpec },
    /// Elementary symmetric polynomial of degree `k` in `f(x_1), …, f(x_m)`.
    SymmetricComposite { k: usize, f: ScalarFunctionSpec },
    /// Symmetric strictly convex functions with closed-form gradients.
    GeneralConvex { form: ConvexForm },
    /// `ψ(h(x_1), …, h(x_m))` for a potential `ψ` and strictly convex `h`.
    Composition {
        outer: Box<Potential>,
        h: ScalarFunctionSpec,
    },
}

/// Concrete symmetric convex functions for the general-convex family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ConvexForm {
    /// `a/2 Σx² + b/2 (Σx)² + c Σx` with a > 0, b ≥ 0, c ≥ 0.
    Quadratic { a: f64, b: f64, c: f64 },
    /// `(1/β) ln Σ exp(β x_i) + δ/2 Σx²` with β > 0, δ ≥ 0.
    LogSumExp { beta: f64, delta: f64 },
}

impl Potential {
    pub fn family_name(&self) -> &'static str {
        match self {
            Potential::CompleteSymmetric { .. } => "complete_symmetric",
            Potential::Gauge { .. } => "gauge",
            Potential::GammaProduct { .. } => "gamma_product",
            Potential::Separable { .. } => "separable",
            Potential::SymmetricComposite { .. } => "symmetric_composite",
            Potential::GeneralConvex { .. } => "general_convex",
            Potential::Composition { .. } => "composition",
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) enum CompiledPotential {
    CompleteSymmetric { k: usize },
    Gauge { p: f64 },
    GammaProduct { a: f64 },
    Separable { f: ScalarFn },
    SymmetricComposite { k: usize, f: ScalarFn },
    Quadratic { a: f64, b: f64, c: f64 },
    LogSumExp { beta: f64, delta: f64 },
    Composition { outer: Box<CompiledPotential>, h: ScalarFn },
}

impl CompiledPotential {
    pub(crate) fn compile(p: &Potential, m: usize) -> Result<Self> {
        Ok(match p {
            Potential::CompleteSymmetric { k } => {
                if *k < 1 || *k > m {
                    return Err(Error::param(format!(
                        "complete_symmetric degree k must satisfy 1 <= k <= m = {m}, got {k}"
                    )));
                }
                CompiledPotential::CompleteSymmetric { k: *k }
            }
            Potential::Gauge { p } => {
                if !(p.is_finite() && *p > 1.0) {
                    return Err(Error::param(format!("gauge exponent p must be > 1, got {p}")));
                }
                CompiledPotential::Gauge { p: *p }
            }
            Potential::GammaProduct { a } => {
                if !(a.is_finite() && *a >= 1.0) {
                    return Err(Error::param(format!("gamma_product shift a must be >= 1, got {a}")));
                }
                CompiledPotential::GammaProduct { a: *a }
            }
            Potential::Separable { f } => CompiledPotential::Separable { f: f.compile()? },
            Potential::SymmetricComposite { k, f } => {
                if *k < 1 || *k > m {
                    return Err(Error::param(format!(
                        "symmetric_composite degree k must satisfy 1 <= k <= m = {m}, got {k}"
                    )));
                }
                let f = f.compile()?;
                // k = 1 is the separable case and only needs convexity. For
                // 2 <= k < m log-convexity suffices; k = m needs it strictly,
                // otherwise the gradient collapses to equal components.
                if *k >= 2 && !f.log_convex(*k == m) {
                    return Err(Error::param(format!(
                        "symmetric_composite with k = {k}, m = {m} needs a {}log-convex f",
                        if *k == m { "strictly " } else { "" }
                    )));
                }
                CompiledPotential::SymmetricComposite { k: *k, f }
            }
            Potential::GeneralConvex { form } => match form {
                ConvexForm::Quadratic { a, b, c } => {
                    let ok = [a, b, c].iter().all(|v| v.is_finite()) && *a > 0.0 && *b >= 0.0 && *c >= 0.0;
                    if !ok {
                        return Err(Error::param(format!(
                            "quadratic form needs a > 0, b >= 0, c >= 0, got a={a}, b={b}, c={c}"
                        )));
                    }
                    CompiledPotential::Quadratic { a: *a, b: *b, c: *c }
                }
                ConvexForm::LogSumExp { beta, delta } => {
                    let ok = beta.is_finite() && delta.is_finite() && *beta > 0.0 && *delta >= 0.0;
                    if !ok {
                        return Err(Error::param(format!(
                            "log_sum_exp needs beta > 0, delta >= 0, got beta={beta}, delta={delta}"
                        )));
                    }
                    CompiledPotential::LogSumExp {
                        beta: *beta,
                        delta: *delta,
                    }
                }
            },
            Potential::Composition { outer, h } => {
                let outer = CompiledPotential::compile(outer, m)?;
                if let CompiledPotential::GammaProduct { a } = outer {
                    if special::digamma(a)? < 0.0 {
                        return Err(Error::param(
                            "composition needs a nonnegative outer gradient; gamma_product with psi(a) < 0 is not",
                        ));
                    }
                }
                CompiledPotential::Composition {
                    outer: Box::new(outer),
                    h: h.compile()?,
                }
            }
        })
    }

    /// `(lower, upper)` bounds of every gradient component over B₊^m when a
    /// closed form is known.
    pub(crate) fn analytic_bounds(&self, m: usize) -> Result<Option<(f64, f64)>> {
        Ok(Some(match self {
            CompiledPotential::CompleteSymmetric { k } => (if *k == 1 { 1.0 } else { 0.0 }, *k as f64),
            CompiledPotential::Gauge { .. } => (0.0, 1.0),
            CompiledPotential::GammaProduct { a } => {
                let g = special::gamma(*a).powi(m as i32);
                let upper = a * g * special::digamma(a + 1.0)?;
                let psi_a = special::digamma(*a)?;
                let lower = if psi_a >= 0.0 { 0.0 } else { psi_a * a * g };
                (lower, upper)
            }
            CompiledPotential::Separable { f } => (f.deriv_f64(0.0), f.deriv_f64(1.0)),
            CompiledPotential::SymmetricComposite { k, f } => {
                let c = binomial(m - 1, k - 1);
                let kk = (*k - 1) as i32;
                (
                    f.deriv_f64(0.0) * c * f.value_f64(0.0).powi(kk),
                    f.deriv_f64(1.0) * c * f.value_f64(1.0).powi(kk),
                )
            }
            CompiledPotential::Quadratic { a, b, c } => (*c, a + b + c),
            CompiledPotential::LogSumExp { delta, .. } => (0.0, 1.0 + delta),
            CompiledPotential::Composition { .. } => return Ok(None),
        }))
    }

    pub(crate) fn value<R: Real>(&self, x: &[R]) -> R {
        let zero = x[0].zero_like();
        match self {
            CompiledPotential::CompleteSymmetric { k } => complete_homogeneous(x, *k).pop().unwrap(),
            CompiledPotential::Gauge { p } => {
                let s = x.iter().fold(zero, |acc, v| acc + v.powf(*p));
                root(&s, *p)
            }
            CompiledPotential::GammaProduct { a } => gamma_product(x, *a),
            CompiledPotential::Separable { f } => x.iter().fold(zero, |acc, v| acc + f.value(v)),
            CompiledPotential::SymmetricComposite { k, f } => {
                let u: Vec<R> = x.iter().map(|v| f.value(v)).collect();
                elementary(&u, *k).pop().unwrap()
            }
            CompiledPotential::Quadratic { a, b, c } => {
                let s = R::sum(x);
                let sq = x.iter().fold(zero, |acc, v| acc + v.clone() * v.clone());
                s.lit(0.5 * a) * sq + s.lit(0.5 * b) * s.clone() * s.clone() + s.lit(*c) * s
            }
            CompiledPotential::LogSumExp { beta, delta } => {
                let mx = x.iter().cloned().fold(x[0].clone(), R::max_of);
                let z = x
                    .iter()
                    .fold(zero.clone(), |acc, v| acc + (zero.lit(*beta) * (v.clone() - mx.clone())).exp());
                let sq = x.iter().fold(zero.clone(), |acc, v| acc + v.clone() * v.clone());
                mx + z.ln() / zero.lit(*beta) + zero.lit(0.5 * delta) * sq
            }
            CompiledPotential::Composition { outer, h } => {
                let hx: Vec<R> = x.iter().map(|v| h.value(v)).collect();
                outer.value(&hx)
            }
        }
    }

    pub(crate) fn gradient<R: Real>(&self, x: &[R]) -> Vec<R> {
        let zero = x[0].zero_like();
        match self {
            CompiledPotential::CompleteSymmetric { k } => {
                let h = complete_homogeneous(x, *k - 1);
                x.iter()
                    .map(|xj| {
                        let mut acc = h[0].clone();
                        for hr in &h[1..] {
                            acc = acc * xj.clone() + hr.clone();
                        }
                        acc
                    })
                    .collect()
            }
            CompiledPotential::Gauge { p } => {
                let s = x.iter().fold(zero.clone(), |acc, v| acc + v.powf(*p));
                if s.is_zero() {
                    return vec![zero; x.len()];
                }
                let norm = root(&s, *p);
                x.iter().map(|v| (v.clone() / norm.clone()).powf(p - 1.0)).collect()
            }
            CompiledPotential::GammaProduct { a } => {
                let g = gamma_product(x, *a);
                x.iter()
                    .map(|v| g.clone() * (v.clone() + v.lit(*a)).digamma())
                    .collect()
            }
            CompiledPotential::Separable { f } => x.iter().map(|v| f.deriv(v)).collect(),
            CompiledPotential::SymmetricComposite { k, f } => {
                let u: Vec<R> = x.iter().map(|v| f.value(v)).collect();
                (0..x.len())
                    .map(|j| {
                        let rest: Vec<R> = u
                            .iter()
                            .enumerate()
                            .filter(|(i, _)| *i != j)
                            .map(|(_, v)| v.clone())
                            .collect();
                        let e = if rest.is_empty() {
                            if *k == 1 { zero.lit(1.0) } else { zero.clone() }
                        } else {
                            elementary(&rest, *k - 1).pop().unwrap()
                        };
                        f.deriv(&x[j]) * e
                    })
                    .collect()
            }
            CompiledPotential::Quadratic { a, b, c } => {
                let s = R::sum(x);
                let base = s.lit(*b) * s.clone() + s.lit(*c);
                x.iter().map(|v| v.lit(*a) * v.clone() + base.clone()).collect()
            }
            CompiledPotential::LogSumExp { beta, delta } => {
                let mx = x.iter().cloned().fold(x[0].clone(), R::max_of);
                let w: Vec<R> = x
                    .iter()
                    .map(|v| (zero.lit(*beta) * (v.clone() - mx.clone())).exp())
                    .collect();
                let z = R::sum(&w);
                w.into_iter()
                    .zip(x)
                    .map(|(wi, v)| wi / z.clone() + v.lit(*delta) * v.clone())
                    .collect()
            }
            CompiledPotential::Composition { outer, h } => {
                let hx: Vec<R> = x.iter().map(|v| h.value(v)).collect();
                outer
                    .gradient(&hx)
                    .into_iter()
                    .zip(x)
                    .map(|(g, v)| g * h.deriv(v))
                    .collect()
            }
        }
    }

    /// `u - ∂_k φ(x)` computed without cancellation, for the families where
    /// that has a closed form, together with the `u` it is measured
    /// against (at working precision). `slack = 1 - Σx`.
    pub(crate) fn gradient_complement<R: Real>(&self, x: &[R], slack: &R) -> Option<(Vec<R>, R)> {
        match self {
            CompiledPotential::Gauge { p } => {
                let exponent = x[0].lit(p - 1.0) / x[0].lit(*p);
                let c = (0..x.len())
                    .map(|k| {
                        if x[k].is_zero() {
                            return x[k].lit(1.0);
                        }
                        let t = x
                            .iter()
                            .enumerate()
                            .filter(|(j, _)| *j != k)
                            .fold(x[k].zero_like(), |acc, (_, v)| acc + (v.clone() / x[k].clone()).powf(*p));
                        -((-(exponent.clone() * t.ln_1p())).exp_m1())
                    })
                    .collect();
                Some((c, x[0].lit(1.0)))
            }
            CompiledPotential::Separable { f } => {
                let c = (0..x.len())
                    .map(|k| f.deriv_gap_to_one(&x[k], &others(x, k, slack)))
                    .collect();
                Some((c, f.deriv(&x[0].lit(1.0))))
            }
            _ => None,
        }
    }
}

/// `s^(1/p)` with the exponent formed at the precision of `s`.
fn root<R: Real>(s: &R, p: f64) -> R {
    if s.is_zero() {
        return s.clone();
    }
    (s.ln() / s.lit(p)).exp()
}

/// `slack + Σ_{j≠k} x_j`, i.e. `1 - x_k` without cancellation.
pub(crate) fn others<R: Real>(x: &[R], k: usize, slack: &R) -> R {
    x.iter()
        .enumerate()
        .filter(|(j, _)| *j != k)
        .fold(slack.clone(), |acc, (_, v)| acc + v.clone())
}

/// `[h_0, h_1, …, h_k]` of the given variables.
fn complete_homogeneous<R: Real>(x: &[R], k: usize) -> Vec<R> {
    let mut h = vec![x[0].zero_like(); k + 1];
    h[0] = x[0].lit(1.0);
    for v in x {
        for r in 1..=k {
            h[r] = h[r].clone() + v.clone() * h[r - 1].clone();
        }
    }
    h
}

/// `[e_0, e_1, …, e_k]` of the given variables.
fn elementary<R: Real>(u: &[R], k: usize) -> Vec<R> {
    let mut e = vec![u[0].zero_like(); k + 1];
    e[0] = u[0].lit(1.0);
    for v in u {
        for r in (1..=k).rev() {
            e[r] = e[r].clone() + v.clone() * e[r - 1].clone();
        }
    }
    e
}

fn gamma_product<R: Real>(x: &[R], a: f64) -> R {
    x.iter()
        .fold(x[0].lit(1.0), |acc, v| acc * (v.clone() + v.lit(a)).gamma())
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}
