//! Fitness maps `F: B₊^m → R^m` built as expression trees over gradient
//! primitives and order-preserving combinators.
//!
//! A map is described by a serializable [`Expr`] document and compiled into
//! a tree that carries lower/upper component bounds per node. Evaluation is
//! generic over [`Real`]; [`FitnessMap::evaluate_with_gap`] additionally
//! returns `1 - f_k(x)` computed without cancellation, which the replicator
//! steps use near the simplex boundary.

pub mod catalog;
pub mod potential;
pub mod sampling;
pub mod scalar;
pub mod special;
pub mod verify;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::simplex::SimplexPoint;
use potential::{others, CompiledPotential};
pub use potential::{ConvexForm, Potential};
pub use scalar::{ScalarField, ScalarFn, ScalarFunctionSpec};

/// Slack allowed on `Σx ≤ 1` when checking membership of B₊^m.
const BALL_TOL: f64 = 1e-9;

/// Safety factor applied to sampled bounds.
pub const SAMPLED_BOUND_FACTOR: f64 = 1.1;

/// Expression-tree document of a fitness map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Expr {
    /// `F(x) = x`.
    Identity,
    /// `F(x)_k = x_{perm[k]}` (1-based). Order-preserving only for the
    /// identity permutation; kept as a diagnostic counterexample.
    Permutation { perm: Vec<usize> },
    /// Gradient of a catalog potential.
    Gradient { potential: Potential },
    /// `φ(x) F(x) + ψ(x) 𝟙`.
    AffineShift {
        phi: ScalarField,
        psi: ScalarField,
        inner: Box<Expr>,
    },
    /// `φ(x) F(x) + ψ(x) G(x)`.
    ConicCombination {
        phi: ScalarField,
        psi: ScalarField,
        left: Box<Expr>,
        right: Box<Expr>,
    },
    /// `(h(f_1(x)), …, h(f_m(x)))`.
    PostCompose { h: ScalarFunctionSpec, inner: Box<Expr> },
    /// `F(h(x_1), …, h(x_m))`.
    PreCompose { h: ScalarFunctionSpec, inner: Box<Expr> },
    /// `F(G(x))`.
    Compose { outer: Box<Expr>, inner: Box<Expr> },
    /// `F(x) ⊙ G(x)`.
    Hadamard { left: Box<Expr>, right: Box<Expr> },
    /// `(F(x) + ε𝟙) / max(M + ε, 1)` with `M` the declared upper bound of `F`.
    Normalize { epsilon: f64, inner: Box<Expr> },
}

impl Expr {
    pub fn kind_name(&self) -> &'static str {
        match self {
            Expr::Identity => "identity",
            Expr::Permutation { .. } => "permutation",
            Expr::Gradient { .. } => "gradient",
            Expr::AffineShift { .. } => "affine_shift",
            Expr::ConicCombination { .. } => "conic_combination",
            Expr::PostCompose { .. } => "post_compose",
            Expr::PreCompose { .. } => "pre_compose",
            Expr::Compose { .. } => "compose",
            Expr::Hadamard { .. } => "hadamard",
            Expr::Normalize { .. } => "normalize",
        }
    }
}

/// How a bound was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Analytic,
    Sampled,
}

/// JSON document form of a map.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitnessDoc {
    pub m: usize,
    pub expr: Expr,
}

#[derive(Clone, Debug)]
struct Node {
    op: Op,
    lower: f64,
    upper: f64,
    kind: BoundKind,
}

#[derive(Clone, Debug)]
enum Op {
    Identity,
    Permutation(Vec<usize>),
    Gradient(CompiledPotential),
    Affine {
        phi: ScalarField,
        psi: ScalarField,
        inner: Box<Node>,
    },
    Conic {
        phi: ScalarField,
        psi: ScalarField,
        left: Box<Node>,
        right: Box<Node>,
    },
    Post { h: ScalarFn, inner: Box<Node> },
    Pre { h: ScalarFn, inner: Box<Node> },
    Compose { outer: Box<Node>, inner: Box<Node> },
    Hadamard { left: Box<Node>, right: Box<Node> },
    Normalize { epsilon: f64, m1: f64, inner: Box<Node> },
}

/// A compiled fitness map.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "FitnessDoc", into = "FitnessDoc")]
pub struct FitnessMap {
    m: usize,
    expr: Expr,
    root: Node,
}

impl TryFrom<FitnessDoc> for FitnessMap {
    type Error = Error;
    fn try_from(doc: FitnessDoc) -> Result<Self> {
        FitnessMap::new(doc.m, doc.expr)
    }
}

impl From<FitnessMap> for FitnessDoc {
    fn from(map: FitnessMap) -> Self {
        FitnessDoc {
            m: map.m,
            expr: map.expr,
        }
    }
}

impl PartialEq for FitnessMap {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.expr == other.expr
    }
}

impl FitnessMap {
    /// Validates and compiles an expression for dimension `m`.
    pub fn new(m: usize, expr: Expr) -> Result<Self> {
        if m == 0 {
            return Err(Error::param("dimension m must be at least 1"));
        }
        let root = compile(&expr, m, "$")?;
        Ok(FitnessMap { m, expr, root })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FitnessDoc = serde_json::from_str(text)?;
        FitnessMap::try_from(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&FitnessDoc::from(self.clone())).expect("documents serialize")
    }

    pub fn to_doc(&self) -> FitnessDoc {
        FitnessDoc::from(self.clone())
    }

    pub fn identity(m: usize) -> Result<Self> {
        FitnessMap::new(m, Expr::Identity)
    }

    /// Coordinate permutation `F(x)_k = x_{perm[k]}` (1-based).
    pub fn permutation(perm: Vec<usize>) -> Result<Self> {
        let m = perm.len();
        FitnessMap::new(m, Expr::Permutation { perm })
    }

    /// Order-swapping map `(x_2, x_1, x_3, …)`.
    pub fn order_swap(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(Error::param("order swap needs m >= 2"));
        }
        let mut perm: Vec<usize> = (1..=m).collect();
        perm.swap(0, 1);
        FitnessMap::permutation(perm)
    }

    pub fn gradient(m: usize, potential: Potential) -> Result<Self> {
        FitnessMap::new(m, Expr::Gradient { potential })
    }

    pub fn grad_complete_symmetric(k: usize, m: usize) -> Result<Self> {
        FitnessMap::gradient(m, Potential::CompleteSymmetric { k })
    }

    pub fn grad_gauge(p: f64, m: usize) -> Result<Self> {
        FitnessMap::gradient(m, Potential::Gauge { p })
    }

    pub fn grad_gamma_product(a: f64, m: usize) -> Result<Self> {
        FitnessMap::gradient(m, Potential::GammaProduct { a })
    }

    pub fn grad_separable(f: ScalarFunctionSpec, m: usize) -> Result<Self> {
        FitnessMap::gradient(m, Potential::Separable { f })
    }

    pub fn grad_symmetric_composite(k: usize, f: ScalarFunctionSpec, m: usize) -> Result<Self> {
        FitnessMap::gradient(m, Potential::SymmetricComposite { k, f })
    }

    pub fn grad_general_convex(form: ConvexForm, m: usize) -> Result<Self> {
        FitnessMap::gradient(m, Potential::GeneralConvex { form })
    }

    pub fn grad_composition(outer: Potential, h: ScalarFunctionSpec, m: usize) -> Result<Self> {
        FitnessMap::gradient(
            m,
            Potential::Composition {
                outer: Box::new(outer),
                h,
            },
        )
    }

    /// `(F + ε𝟙) / max(M + ε, 1)`.
    pub fn normalize(&self, epsilon: f64) -> Result<Self> {
        FitnessMap::new(
            self.m,
            Expr::Normalize {
                epsilon,
                inner: Box::new(self.expr.clone()),
            },
        )
    }

    pub fn affine_shift(&self, phi: ScalarField, psi: ScalarField) -> Result<Self> {
        FitnessMap::new(
            self.m,
            Expr::AffineShift {
                phi,
                psi,
                inner: Box::new(self.expr.clone()),
            },
        )
    }

    pub fn conic_combination(&self, phi: ScalarField, other: &FitnessMap, psi: ScalarField) -> Result<Self> {
        self.same_dim(other)?;
        FitnessMap::new(
            self.m,
            Expr::ConicCombination {
                phi,
                psi,
                left: Box::new(self.expr.clone()),
                right: Box::new(other.expr.clone()),
            },
        )
    }

    pub fn post_compose(&self, h: ScalarFunctionSpec) -> Result<Self> {
        FitnessMap::new(
            self.m,
            Expr::PostCompose {
                h,
                inner: Box::new(self.expr.clone()),
            },
        )
    }

    pub fn pre_compose(&self, h: ScalarFunctionSpec) -> Result<Self> {
        FitnessMap::new(
            self.m,
            Expr::PreCompose {
                h,
                inner: Box::new(self.expr.clone()),
            },
        )
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &FitnessMap) -> Result<Self> {
        self.same_dim(inner)?;
        FitnessMap::new(
            self.m,
            Expr::Compose {
                outer: Box::new(self.expr.clone()),
                inner: Box::new(inner.expr.clone()),
            },
        )
    }

    pub fn hadamard(&self, other: &FitnessMap) -> Result<Self> {
        self.same_dim(other)?;
        FitnessMap::new(
            self.m,
            Expr::Hadamard {
                left: Box::new(self.expr.clone()),
                right: Box::new(other.expr.clone()),
            },
        )
    }

    fn same_dim(&self, other: &FitnessMap) -> Result<()> {
        if self.m != other.m {
            return Err(Error::Dimension {
                expected: self.m,
                got: other.m,
            });
        }
        Ok(())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    /// Upper bound `M` on every component over B₊^m.
    pub fn declared_bound(&self) -> f64 {
        self.root.upper
    }

    /// Lower bound on every component over B₊^m.
    pub fn lower_bound(&self) -> f64 {
        self.root.lower
    }

    pub fn bound_kind(&self) -> BoundKind {
        self.root.kind
    }

    /// Whether the outermost node is a normalization.
    pub fn is_normalized(&self) -> bool {
        matches!(self.expr, Expr::Normalize { .. })
    }

    /// `(f_1(x), …, f_m(x))` for `x ∈ B₊^m`.
    pub fn evaluate<R: Real>(&self, x: &[R]) -> Result<Vec<R>> {
        self.check_domain(x)?;
        self.root.eval(x, "$")
    }

    /// Evaluation at any point of the nonnegative orthant. Bounds and the
    /// normalization constant are only meaningful on B₊^m.
    pub fn evaluate_on_orthant<R: Real>(&self, x: &[R]) -> Result<Vec<R>> {
        self.check_orthant(x)?;
        self.root.eval(x, "$")
    }

    pub fn evaluate_point<R: Real>(&self, x: &SimplexPoint<R>) -> Result<Vec<R>> {
        self.evaluate(x.coords())
    }

    /// Values `f_k(x)` together with `1 - f_k(x)` evaluated without
    /// cancellation at a simplex point.
    pub fn evaluate_with_gap<R: Real>(&self, x: &SimplexPoint<R>) -> Result<(Vec<R>, Vec<R>)> {
        let c = x.coords();
        self.check_domain(c)?;
        let slack = c[0].zero_like();
        let (f, comp) = self.root.eval_c(c, &slack, "$")?;
        let head = c[0].lit(1.0) - c[0].lit(self.root.upper);
        let gap = comp.into_iter().map(|v| head.clone() + v).collect();
        Ok((f, gap))
    }

    fn check_domain<R: Real>(&self, x: &[R]) -> Result<()> {
        self.check_orthant(x)?;
        let s = R::sum(x).to_f64();
        if s > 1.0 + BALL_TOL {
            return Err(Error::domain(format!(
                "point has l1-norm {s} > 1 and lies outside the positive unit ball"
            )));
        }
        Ok(())
    }

    fn check_orthant<R: Real>(&self, x: &[R]) -> Result<()> {
        if x.len() != self.m {
            return Err(Error::Dimension {
                expected: self.m,
                got: x.len(),
            });
        }
        let zero = x[0].zero_like();
        if let Some(k) = x.iter().position(|v| !v.is_finite() || *v < zero) {
            return Err(Error::domain(format!(
                "coordinate {} = {} is not a finite nonnegative number",
                k + 1,
                x[k].to_f64()
            )));
        }
        Ok(())
    }
}

fn child(path: &str, name: &str) -> String {
    format!("{path}.{name}")
}

fn compile(expr: &Expr, m: usize, path: &str) -> Result<Node> {
    let at = |e: Error| match e {
        Error::Parameter(msg) if !msg.starts_with('$') => Error::Parameter(format!("{path}: {msg}")),
        other => other,
    };
    let node = match expr {
        Expr::Identity => Node {
            op: Op::Identity,
            lower: 0.0,
            upper: 1.0,
            kind: BoundKind::Analytic,
        },
        Expr::Permutation { perm } => {
            if perm.len() != m {
                return Err(at(Error::param(format!(
                    "permutation has length {} but m = {m}",
                    perm.len()
                ))));
            }
            let mut seen = vec![false; m];
            for &p in perm {
                if p < 1 || p > m || seen[p - 1] {
                    return Err(at(Error::param(format!("{perm:?} is not a permutation of 1..={m}"))));
                }
                seen[p - 1] = true;
            }
            Node {
                op: Op::Permutation(perm.iter().map(|p| p - 1).collect()),
                lower: 0.0,
                upper: 1.0,
                kind: BoundKind::Analytic,
            }
        }
        Expr::Gradient { potential } => {
            let p = CompiledPotential::compile(potential, m).map_err(at)?;
            let bounds = p.analytic_bounds(m).map_err(at)?;
            let mut node = Node {
                op: Op::Gradient(p),
                lower: 0.0,
                upper: 0.0,
                kind: BoundKind::Analytic,
            };
            match bounds {
                Some((lo, hi)) => {
                    node.lower = lo;
                    node.upper = hi;
                }
                None => node.sample_bounds(m, path)?,
            }
            node
        }
        Expr::AffineShift { phi, psi, inner } => {
            phi.validate(false).map_err(at)?;
            psi.validate(true).map_err(at)?;
            let inner = compile(inner, m, &child(path, "inner"))?;
            let (pl, ph) = phi.range();
            let (sl, sh) = psi.range();
            Node {
                lower: scale_lower(inner.lower, pl, ph) + sl,
                upper: scale_upper(inner.upper, pl, ph) + sh,
                kind: inner.kind,
                op: Op::Affine {
                    phi: phi.clone(),
                    psi: psi.clone(),
                    inner: Box::new(inner),
                },
            }
        }
        Expr::ConicCombination { phi, psi, left, right } => {
            phi.validate(false).map_err(at)?;
            psi.validate(false).map_err(at)?;
            let left = compile(left, m, &child(path, "left"))?;
            let right = compile(right, m, &child(path, "right"))?;
            let (pl, ph) = phi.range();
            let (sl, sh) = psi.range();
            Node {
                lower: scale_lower(left.lower, pl, ph) + scale_lower(right.lower, sl, sh),
                upper: scale_upper(left.upper, pl, ph) + scale_upper(right.upper, sl, sh),
                kind: join(left.kind, right.kind),
                op: Op::Conic {
                    phi: phi.clone(),
                    psi: psi.clone(),
                    left: Box::new(left),
                    right: Box::new(right),
                },
            }
        }
        Expr::PostCompose { h, inner } => {
            let h = h.compile().map_err(at)?;
            let inner = compile(inner, m, &child(path, "inner"))?;
            nonnegative(&inner, "post_compose", path)?;
            Node {
                lower: h.value_f64(inner.lower),
                upper: h.value_f64(inner.upper),
                kind: inner.kind,
                op: Op::Post {
                    h,
                    inner: Box::new(inner),
                },
            }
        }
        Expr::PreCompose { h, inner } => {
            let h = h.compile().map_err(at)?;
            let inner = compile(inner, m, &child(path, "inner"))?;
            let mut node = Node {
                op: Op::Pre {
                    h,
                    inner: Box::new(inner),
                },
                lower: 0.0,
                upper: 0.0,
                kind: BoundKind::Sampled,
            };
            node.sample_bounds(m, path)?;
            node
        }
        Expr::Compose { outer, inner } => {
            let outer = compile(outer, m, &child(path, "outer"))?;
            let inner = compile(inner, m, &child(path, "inner"))?;
            nonnegative(&inner, "compose", path)?;
            let mut node = Node {
                op: Op::Compose {
                    outer: Box::new(outer),
                    inner: Box::new(inner),
                },
                lower: 0.0,
                upper: 0.0,
                kind: BoundKind::Sampled,
            };
            node.sample_bounds(m, path)?;
            node
        }
        Expr::Hadamard { left, right } => {
            let left = compile(left, m, &child(path, "left"))?;
            let right = compile(right, m, &child(path, "right"))?;
            nonnegative(&left, "hadamard", path)?;
            nonnegative(&right, "hadamard", path)?;
            Node {
                lower: left.lower * right.lower,
                upper: left.upper * right.upper,
                kind: join(left.kind, right.kind),
                op: Op::Hadamard {
                    left: Box::new(left),
                    right: Box::new(right),
                },
            }
        }
        Expr::Normalize { epsilon, inner } => {
            if !(epsilon.is_finite() && *epsilon > 0.0) {
                return Err(Error::param(format!(
                    "{path}.epsilon: normalization epsilon must be > 0, got {epsilon}"
                )));
            }
            let inner = compile(inner, m, &child(path, "inner"))?;
            if !inner.upper.is_finite() {
                return Err(at(Error::param("normalization needs a finite declared bound")));
            }
            if inner.lower + epsilon <= 0.0 {
                return Err(at(Error::param(format!(
                    "normalization needs lower bound + epsilon > 0; lower bound is {}",
                    inner.lower
                ))));
            }
            let m1 = (inner.upper + epsilon).max(1.0);
            Node {
                lower: (inner.lower + epsilon) / m1,
                upper: if inner.upper + epsilon >= 1.0 {
                    1.0
                } else {
                    inner.upper + epsilon
                },
                kind: inner.kind,
                op: Op::Normalize {
                    epsilon: *epsilon,
                    m1,
                    inner: Box::new(inner),
                },
            }
        }
    };
    Ok(node)
}

fn nonnegative(node: &Node, what: &str, path: &str) -> Result<()> {
    if node.lower < 0.0 {
        return Err(Error::param(format!(
            "{path}: {what} needs nonnegative argument maps; lower bound is {}",
            node.lower
        )));
    }
    Ok(())
}

fn join(a: BoundKind, b: BoundKind) -> BoundKind {
    if a == BoundKind::Analytic && b == BoundKind::Analytic {
        BoundKind::Analytic
    } else {
        BoundKind::Sampled
    }
}

fn scale_upper(v: f64, lo: f64, hi: f64) -> f64 {
    if v >= 0.0 {
        v * hi
    } else {
        v * lo
    }
}

fn scale_lower(v: f64, lo: f64, hi: f64) -> f64 {
    if v >= 0.0 {
        v * lo
    } else {
        v * hi
    }
}

fn check_finite<R: Real>(v: &[R], path: &str) -> Result<()> {
    if let Some(k) = v.iter().position(|c| !c.is_finite()) {
        return Err(Error::Numeric {
            path: path.to_string(),
            msg: format!("component {} is not finite", k + 1),
        });
    }
    Ok(())
}

impl Node {
    /// Replaces the bounds by a sampled estimate over B₊^m.
    fn sample_bounds(&mut self, m: usize, path: &str) -> Result<()> {
        let (lo, hi) = verify::sampled_range(m, |x| self.eval(x, path))?;
        self.lower = lo - (SAMPLED_BOUND_FACTOR - 1.0) * lo.abs();
        self.upper = hi + (SAMPLED_BOUND_FACTOR - 1.0) * hi.abs();
        self.kind = BoundKind::Sampled;
        Ok(())
    }

    fn eval<R: Real>(&self, x: &[R], path: &str) -> Result<Vec<R>> {
        let out = match &self.op {
            Op::Identity => x.to_vec(),
            Op::Permutation(p) => p.iter().map(|&i| x[i].clone()).collect(),
            Op::Gradient(pot) => pot.gradient(x),
            Op::Affine { phi, psi, inner } => {
                let f = inner.eval(x, &child(path, "inner"))?;
                let a = phi.eval(x);
                let b = psi.eval(x);
                f.into_iter().map(|v| a.clone() * v + b.clone()).collect()
            }
            Op::Conic { phi, psi, left, right } => {
                let f = left.eval(x, &child(path, "left"))?;
                let g = right.eval(x, &child(path, "right"))?;
                let a = phi.eval(x);
                let b = psi.eval(x);
                f.into_iter()
                    .zip(g)
                    .map(|(u, v)| a.clone() * u + b.clone() * v)
                    .collect()
            }
            Op::Post { h, inner } => inner
                .eval(x, &child(path, "inner"))?
                .iter()
                .map(|v| h.value(v))
                .collect(),
            Op::Pre { h, inner } => {
                let hx: Vec<R> = x.iter().map(|v| h.value(v)).collect();
                check_finite(&hx, path)?;
                inner.eval(&hx, &child(path, "inner"))?
            }
            Op::Compose { outer, inner } => {
                let g = inner.eval(x, &child(path, "inner"))?;
                outer.eval(&g, &child(path, "outer"))?
            }
            Op::Hadamard { left, right } => {
                let f = left.eval(x, &child(path, "left"))?;
                let g = right.eval(x, &child(path, "right"))?;
                f.into_iter().zip(g).map(|(u, v)| u * v).collect()
            }
            Op::Normalize { epsilon, m1, inner } => {
                let f = inner.eval(x, &child(path, "inner"))?;
                let eps = x[0].lit(*epsilon);
                let m1 = x[0].lit(*m1);
                f.into_iter().map(|v| (v + eps.clone()) / m1.clone()).collect()
            }
        };
        check_finite(&out, path)?;
        Ok(out)
    }

    /// Values and complements `upper - f_k`.
    fn eval_c<R: Real>(&self, x: &[R], slack: &R, path: &str) -> Result<(Vec<R>, Vec<R>)> {
        let naive = |f: Vec<R>| {
            let u = x[0].lit(self.upper);
            let c = f.iter().map(|v| u.clone() - v.clone()).collect();
            (f, c)
        };
        let out = match &self.op {
            Op::Identity => {
                let c = (0..x.len()).map(|k| others(x, k, slack)).collect();
                (x.to_vec(), c)
            }
            Op::Gradient(pot) => {
                let f = pot.gradient(x);
                match pot.gradient_complement(x, slack) {
                    Some((c, u)) => {
                        let corr = x[0].lit(self.upper) - u;
                        (f, c.into_iter().map(|v| v + corr.clone()).collect::<Vec<R>>())
                    }
                    None => naive(f),
                }
            }
            Op::Affine { phi, psi, inner } => match (phi.as_constant(), psi.as_constant()) {
                (Some(a), Some(b)) => {
                    let (f, c) = inner.eval_c(x, slack, &child(path, "inner"))?;
                    let (a, b) = (x[0].lit(a), x[0].lit(b));
                    let implied = a.clone() * x[0].lit(inner.upper) + b.clone();
                    let corr = x[0].lit(self.upper) - implied;
                    let f = f.into_iter().map(|v| a.clone() * v + b.clone()).collect();
                    let c = c.into_iter().map(|v| a.clone() * v + corr.clone()).collect();
                    (f, c)
                }
                _ => naive(self.eval(x, path)?),
            },
            Op::Conic { phi, psi, left, right } => match (phi.as_constant(), psi.as_constant()) {
                (Some(a), Some(b)) => {
                    let (f, cf) = left.eval_c(x, slack, &child(path, "left"))?;
                    let (g, cg) = right.eval_c(x, slack, &child(path, "right"))?;
                    let (a, b) = (x[0].lit(a), x[0].lit(b));
                    let v = f
                        .into_iter()
                        .zip(g)
                        .map(|(u, w)| a.clone() * u + b.clone() * w)
                        .collect();
                    let implied = a.clone() * x[0].lit(left.upper) + b.clone() * x[0].lit(right.upper);
                    let corr = x[0].lit(self.upper) - implied;
                    let c = cf
                        .into_iter()
                        .zip(cg)
                        .map(|(u, w)| a.clone() * u + b.clone() * w + corr.clone())
                        .collect();
                    (v, c)
                }
                _ => naive(self.eval(x, path)?),
            },
            Op::Post { h, inner } => {
                let (f, c) = inner.eval_c(x, slack, &child(path, "inner"))?;
                let v: Vec<R> = f.iter().map(|t| h.value(t)).collect();
                let gap = f
                    .iter()
                    .zip(&c)
                    .map(|(t, ct)| h.value_gap(inner.upper, t, ct))
                    .collect::<Vec<R>>();
                let corr = x[0].lit(self.upper) - h.upper_value(inner.upper, &x[0]);
                let gap = gap.into_iter().map(|v| v + corr.clone()).collect();
                (v, gap)
            }
            Op::Hadamard { left, right } => {
                let (f, cf) = left.eval_c(x, slack, &child(path, "left"))?;
                let (g, cg) = right.eval_c(x, slack, &child(path, "right"))?;
                let uf = x[0].lit(left.upper);
                let corr = x[0].lit(self.upper) - uf.clone() * x[0].lit(right.upper);
                let c = (0..f.len())
                    .map(|k| uf.clone() * cg[k].clone() + g[k].clone() * cf[k].clone() + corr.clone())
                    .collect();
                let v = f.into_iter().zip(g).map(|(u, w)| u * w).collect();
                (v, c)
            }
            Op::Normalize { epsilon, m1, inner } => {
                let (f, c) = inner.eval_c(x, slack, &child(path, "inner"))?;
                let eps = x[0].lit(*epsilon);
                let m1 = x[0].lit(*m1);
                // Complements are taken against the declared upper bound, which
                // differs from (U + eps) / m1 by f64 rounding of the constants.
                let corr = x[0].lit(self.upper) * m1.clone() - x[0].lit(inner.upper) - eps.clone();
                let v = f.into_iter().map(|t| (t + eps.clone()) / m1.clone()).collect();
                let c = c.into_iter().map(|t| (t + corr.clone()) / m1.clone()).collect();
                (v, c)
            }
            Op::Permutation(_) | Op::Pre { .. } | Op::Compose { .. } => naive(self.eval(x, path)?),
        };
        check_finite(&out.0, path)?;
        check_finite(&out.1, path)?;
        Ok(out)
    }
}
