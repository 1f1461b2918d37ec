//! The built-in catalog: primitive families with fixed parameterizations,
//! the combinators, and a batch checker used by `replidyn catalog check`.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::verify::{gradient_check, verify_sop, GradientCheck, SopReport};
use super::{sampling, ConvexForm, FitnessMap, Potential, ScalarField, ScalarFunctionSpec};
use crate::error::Result;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyInfo {
    pub name: &'static str,
    pub parameters: &'static str,
    pub description: &'static str,
}

pub const PRIMITIVES: [FamilyInfo; 7] = [
    FamilyInfo {
        name: "complete_symmetric",
        parameters: "{\"k\": integer, 1 <= k <= m}",
        description: "gradient of the complete homogeneous symmetric polynomial of degree k",
    },
    FamilyInfo {
        name: "gauge",
        parameters: "{\"p\": real > 1}",
        description: "gradient of the l_p norm",
    },
    FamilyInfo {
        name: "gamma_product",
        parameters: "{\"a\": real >= 1}",
        description: "gradient of sum ln Gamma(x_k + a), i.e. digamma(x_k + a)",
    },
    FamilyInfo {
        name: "separable",
        parameters: "{\"f\": scalar function, strictly convex increasing}",
        description: "gradient of sum f(x_k)",
    },
    FamilyInfo {
        name: "symmetric_composite",
        parameters: "{\"k\": integer, \"f\": scalar function, log-convex for k >= 2}",
        description: "gradient of the elementary symmetric polynomial of degree k in f(x_1), ..., f(x_m)",
    },
    FamilyInfo {
        name: "general_convex",
        parameters: "{\"form\": {\"type\": \"quadratic\", a > 0, b >= 0, c >= 0} | {\"type\": \"log_sum_exp\", beta > 0, delta >= 0}}",
        description: "gradient of a symmetric strictly convex function",
    },
    FamilyInfo {
        name: "composition",
        parameters: "{\"outer\": potential, \"h\": scalar function}",
        description: "gradient of outer(h(x_1), ..., h(x_m))",
    },
];

pub const COMBINATORS: [FamilyInfo; 6] = [
    FamilyInfo {
        name: "affine_shift",
        parameters: "{\"phi\": scalar field > 0, \"psi\": scalar field >= 0, \"inner\": map}",
        description: "phi(x) F(x) + psi(x) 1",
    },
    FamilyInfo {
        name: "conic_combination",
        parameters: "{\"phi\": scalar field > 0, \"psi\": scalar field > 0, \"left\": map, \"right\": map}",
        description: "phi(x) F(x) + psi(x) G(x)",
    },
    FamilyInfo {
        name: "post_compose",
        parameters: "{\"h\": scalar function, \"inner\": map with nonnegative values}",
        description: "(h(f_1(x)), ..., h(f_m(x)))",
    },
    FamilyInfo {
        name: "pre_compose",
        parameters: "{\"h\": scalar function, \"inner\": map}",
        description: "F(h(x_1), ..., h(x_m))",
    },
    FamilyInfo {
        name: "compose",
        parameters: "{\"outer\": map, \"inner\": map with nonnegative values}",
        description: "F(G(x))",
    },
    FamilyInfo {
        name: "hadamard",
        parameters: "{\"left\": map, \"right\": map, both nonnegative}",
        description: "F(x) * G(x) componentwise",
    },
];

/// Human-readable listing of the catalog.
pub fn listing() -> String {
    let mut out = String::from("primitive families:\n");
    for f in &PRIMITIVES {
        out.push_str(&format!("  {:<20} {}\n  {:<20} parameters: {}\n", f.name, f.description, "", f.parameters));
    }
    out.push_str("combinators:\n");
    for f in &COMBINATORS {
        out.push_str(&format!("  {:<20} {}\n  {:<20} parameters: {}\n", f.name, f.description, "", f.parameters));
    }
    out.push_str("normalization:\n  normalize            (F(x) + eps 1) / max(M + eps, 1), eps > 0\n");
    out
}

/// A named catalog instance.
#[derive(Clone, Debug)]
pub struct Entry {
    pub label: String,
    pub family: String,
    pub map: FitnessMap,
}

/// Two parameterizations of each primitive family on `m` coordinates.
pub fn primitive_potentials(m: usize) -> Vec<(String, Potential)> {
    let k_hi = m.min(3);
    vec![
        ("complete_symmetric(k=2)".into(), Potential::CompleteSymmetric { k: 2.min(m) }),
        (format!("complete_symmetric(k={k_hi})"), Potential::CompleteSymmetric { k: k_hi }),
        ("gauge(p=2)".into(), Potential::Gauge { p: 2.0 }),
        ("gauge(p=3.5)".into(), Potential::Gauge { p: 3.5 }),
        ("gamma_product(a=1)".into(), Potential::GammaProduct { a: 1.0 }),
        ("gamma_product(a=2.5)".into(), Potential::GammaProduct { a: 2.5 }),
        (
            "separable(power q=2)".into(),
            Potential::Separable {
                f: ScalarFunctionSpec::Power { q: 2.0 },
            },
        ),
        (
            "separable(exponential scale=1)".into(),
            Potential::Separable {
                f: ScalarFunctionSpec::Exponential { scale: 1.0 },
            },
        ),
        (
            "symmetric_composite(k=1, power q=3)".into(),
            Potential::SymmetricComposite {
                k: 1,
                f: ScalarFunctionSpec::Power { q: 3.0 },
            },
        ),
        (
            format!("symmetric_composite(k={m}, exp_quadratic a=1 b=0.5)"),
            Potential::SymmetricComposite {
                k: m,
                f: ScalarFunctionSpec::ExpQuadratic { a: 1.0, b: 0.5 },
            },
        ),
        (
            "general_convex(quadratic)".into(),
            Potential::GeneralConvex {
                form: ConvexForm::Quadratic { a: 1.0, b: 0.5, c: 0.1 },
            },
        ),
        (
            "general_convex(log_sum_exp)".into(),
            Potential::GeneralConvex {
                form: ConvexForm::LogSumExp { beta: 2.0, delta: 0.1 },
            },
        ),
        (
            "composition(gauge p=2, power q=2)".into(),
            Potential::Composition {
                outer: Box::new(Potential::Gauge { p: 2.0 }),
                h: ScalarFunctionSpec::Power { q: 2.0 },
            },
        ),
        (
            "composition(complete_symmetric k=2, exponential)".into(),
            Potential::Composition {
                outer: Box::new(Potential::CompleteSymmetric { k: 2.min(m) }),
                h: ScalarFunctionSpec::Exponential { scale: 1.0 },
            },
        ),
    ]
}

pub fn primitives(m: usize) -> Result<Vec<Entry>> {
    primitive_potentials(m)
        .into_iter()
        .map(|(label, p)| {
            Ok(Entry {
                family: p.family_name().to_string(),
                map: FitnessMap::gradient(m, p)?,
                label,
            })
        })
        .collect()
}

/// Every combinator applied to two argument draws from the primitives
/// (seeded). Combinators that need nonnegative arguments draw from the
/// nonnegative primitives only.
pub fn combinator_samples(m: usize, seed: u64) -> Result<Vec<Entry>> {
    let prims = primitives(m)?;
    let nonneg: Vec<&Entry> = prims.iter().filter(|e| e.map.lower_bound() >= 0.0).collect();
    let all: Vec<&Entry> = prims.iter().collect();
    let mut rng = sampling::rng(seed);
    let mut out = Vec::new();
    for draw in 0..2 {
        let a = *all.choose(&mut rng).expect("nonempty catalog");
        let b = *all.choose(&mut rng).expect("nonempty catalog");
        let na = *nonneg.choose(&mut rng).expect("nonnegative primitives exist");
        let nb = *nonneg.choose(&mut rng).expect("nonnegative primitives exist");
        let (phi, psi) = if draw == 0 {
            (ScalarField::constant(2.0), ScalarField::constant(0.5))
        } else {
            (ScalarField::SumPower { r: 1.5 }, ScalarField::SumPower { r: -1.0 })
        };
        let h = if draw == 0 {
            ScalarFunctionSpec::Power { q: 2.0 }
        } else {
            ScalarFunctionSpec::Exponential { scale: 0.5 }
        };
        let mk = |family: &str, label: String, map: FitnessMap| Entry {
            label: format!("{family}[{label}]"),
            family: family.to_string(),
            map,
        };
        out.push(mk(
            "affine_shift",
            a.label.clone(),
            a.map.affine_shift(phi.clone(), psi.clone())?,
        ));
        out.push(mk(
            "conic_combination",
            format!("{}, {}", a.label, b.label),
            a.map.conic_combination(phi, &b.map, psi)?,
        ));
        out.push(mk("post_compose", na.label.clone(), na.map.post_compose(h.clone())?));
        out.push(mk("pre_compose", b.label.clone(), b.map.pre_compose(h)?));
        out.push(mk(
            "compose",
            format!("{} after {}", a.label, nb.label),
            a.map.compose(&nb.map)?,
        ));
        out.push(mk(
            "hadamard",
            format!("{}, {}", na.label, nb.label),
            na.map.hadamard(&nb.map)?,
        ));
    }
    Ok(out)
}

/// A map that swaps the first two coordinates: the negative control of the
/// catalog checker.
pub fn broken_primitive(m: usize) -> Result<Entry> {
    Ok(Entry {
        label: "order_swap".into(),
        family: "broken".into(),
        map: FitnessMap::order_swap(m)?,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryReport {
    pub label: String,
    pub family: String,
    pub m: usize,
    pub sop: SopReport,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatalogReport {
    pub seed: u64,
    pub samples: usize,
    pub dims: Vec<usize>,
    pub entries: Vec<EntryReport>,
    pub gradients: Vec<GradientCheck>,
    pub total_violations: usize,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckOptions {
    pub seed: u64,
    pub samples: usize,
    pub dims: Vec<usize>,
    pub gradient_points: usize,
    pub gradient_tol: f64,
    pub inject_broken: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            seed: 1,
            samples: 10_000,
            dims: vec![2, 3, 5],
            gradient_points: 100,
            gradient_tol: 1e-6,
            inject_broken: false,
        }
    }
}

/// Runs the SOP check over primitives and combinator samples and the
/// gradient check over every primitive potential, for each dimension.
pub fn check(opts: &CheckOptions) -> Result<CatalogReport> {
    use rayon::prelude::*;
    let mut jobs: Vec<Entry> = Vec::new();
    for &m in &opts.dims {
        jobs.extend(primitives(m)?);
        jobs.extend(combinator_samples(m, opts.seed)?);
        if opts.inject_broken {
            jobs.push(broken_primitive(m)?);
        }
    }
    let entries: Vec<EntryReport> = jobs
        .par_iter()
        .map(|e| EntryReport {
            label: e.label.clone(),
            family: e.family.clone(),
            m: e.map.m(),
            sop: verify_sop(&e.map, opts.samples, opts.seed),
        })
        .collect();
    let grad_jobs: Vec<(usize, Potential)> = opts
        .dims
        .iter()
        .flat_map(|&m| primitive_potentials(m).into_iter().map(move |(_, p)| (m, p)))
        .collect();
    let gradients: Vec<GradientCheck> = grad_jobs
        .par_iter()
        .map(|(m, p)| gradient_check(p, *m, opts.gradient_points, opts.seed, opts.gradient_tol))
        .collect::<Result<_>>()?;
    let total_violations = entries.iter().map(|e| e.sop.violation_count).sum();
    let passed = entries.iter().all(|e| e.sop.passed) && gradients.iter().all(|g| g.passed);
    Ok(CatalogReport {
        seed: opts.seed,
        samples: opts.samples,
        dims: opts.dims.clone(),
        entries,
        gradients,
        total_violations,
        passed,
    })
}
