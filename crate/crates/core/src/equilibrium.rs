//! Rest points, Nash tests, empirical stability probes and the folk-theorem
//! certificate for the stable class.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitness::sampling;
use crate::real::{format_f64, Real};
use crate::replicator::{DynamicsKind, ReplicatorSystem};
use crate::simplex::{check_support_in_face, face_center, max_ind, Face, SimplexPoint};

/// Largest ambient dimension for face enumeration.
pub const MAX_ENUMERATION_DIM: usize = 12;
/// Largest ambient dimension accepted by the folk-theorem certificate.
pub const MAX_FOLK_DIM: usize = 8;
/// Tie tolerance for `MaxInd` at the initial point.
pub const TIE_TOL: f64 = 1e-12;
/// Consecutive steps inside the tolerance ball that count as convergence.
pub const CONVERGENCE_RUN: usize = 100;

/// The `2^m - 1` face centers, ordered by face bitmask.
pub fn rest_point_candidates<R: Real>(m: usize, precision: u32) -> Result<Vec<SimplexPoint<R>>> {
    if !(2..=MAX_ENUMERATION_DIM).contains(&m) {
        return Err(Error::param(format!(
            "rest point enumeration needs 2 <= m <= {MAX_ENUMERATION_DIM}, got {m}"
        )));
    }
    Face::all(m)?.iter().map(|f| face_center(f, precision)).collect()
}

/// `‖ℛ(x) - x‖_1`.
pub fn rest_residual<R: Real>(system: &ReplicatorSystem, x: &SimplexPoint<R>) -> Result<f64> {
    let y = system.step(x)?.next;
    Ok(y.l1_distance(x).to_f64())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NashCheck {
    pub is_nash: bool,
    /// `max_k f_k(x) - ⟨x, F(x)⟩`.
    pub residual: f64,
}

fn require_stable(system: &ReplicatorSystem, what: &str) -> Result<()> {
    if system.kind() != DynamicsKind::Stable {
        return Err(Error::Unsupported(format!("{what} is defined for stable systems only")));
    }
    Ok(())
}

/// Nash test by vertex reduction: `⟨y, F(x)⟩` is linear in `y`, so it is
/// maximized at a vertex.
pub fn is_nash<R: Real>(system: &ReplicatorSystem, x: &SimplexPoint<R>, tol: f64) -> Result<NashCheck> {
    require_stable(system, "is_nash")?;
    let f = system.fitness().evaluate_point(x)?;
    let mean = x
        .coords()
        .iter()
        .zip(&f)
        .fold(f[0].zero_like(), |acc, (a, b)| acc + a.clone() * b.clone());
    let top = f.iter().cloned().reduce(R::max_of).expect("m >= 2");
    let residual = (top - mean).to_f64();
    Ok(NashCheck {
        is_nash: residual <= tol,
        residual,
    })
}

/// Strict Nash: `x` lies within `tol` of a vertex `e_k` and `f_k(e_k)`
/// beats every other fitness there by more than `tol`.
pub fn is_strict_nash<R: Real>(system: &ReplicatorSystem, x: &SimplexPoint<R>, tol: f64) -> Result<bool> {
    require_stable(system, "is_strict_nash")?;
    let m = x.dim();
    for k in 1..=m {
        let e = SimplexPoint::<R>::vertex(k, m, x.precision())?;
        if x.l1_distance(&e).to_f64() > tol {
            continue;
        }
        let f = system.fitness().evaluate_point(&e)?;
        let fk = f[k - 1].to_f64();
        return Ok((1..=m).filter(|&i| i != k).all(|i| fk > f[i - 1].to_f64() + tol));
    }
    Ok(false)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stability {
    StableAsymptotic,
    Unstable,
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub radius: f64,
    pub probes: usize,
    pub horizon: usize,
    pub seed: u64,
    /// Convergence tolerance (l1).
    pub tol: f64,
    /// Largest rest residual accepted as a rest point.
    pub rest_tol: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            radius: 1e-3,
            probes: 64,
            horizon: 100_000,
            seed: 0,
            tol: 1e-8,
            rest_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeEvidence {
    pub stability: Stability,
    pub radius: f64,
    pub probes: usize,
    pub horizon: usize,
    pub converged: usize,
    pub escaped: usize,
    /// Largest l1 distance from the rest point seen along any probe orbit.
    pub max_excursion: f64,
    /// Steps until the first escape, if any.
    pub first_escape_step: Option<usize>,
}

enum ProbeOutcome {
    Converged { excursion: f64 },
    Escaped { step: usize, excursion: f64 },
    Lingered { excursion: f64 },
}

/// Point at l1 distance at most `radius` from `x`, drawn along the segment
/// towards a uniform simplex point with radial law `U^(1/(m-1))`.
fn perturb<G: Rng + ?Sized>(rng: &mut G, x: &[f64], radius: f64) -> Vec<f64> {
    let m = x.len();
    loop {
        let z = sampling::simplex_interior(rng, m);
        let d: f64 = z.iter().zip(x).map(|(a, b)| (a - b).abs()).sum();
        if d <= 0.0 {
            continue;
        }
        let s: f64 = rng.gen::<f64>().powf(1.0 / (m - 1) as f64);
        let t = (radius * s / d).min(1.0);
        if t <= 0.0 {
            continue;
        }
        let y: Vec<f64> = x.iter().zip(&z).map(|(a, b)| a + t * (b - a)).collect();
        if y != x {
            return y;
        }
    }
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q).abs()).sum()
}

fn run_probe(system: &ReplicatorSystem, x: &[f64], start: Vec<f64>, cfg: &ProbeConfig) -> Result<ProbeOutcome> {
    let mut y = SimplexPoint::<f64>::new(start)?;
    let shell = 10.0 * cfg.radius;
    let mut excursion = l1(y.coords(), x);
    let mut inside = 0usize;
    for n in 0..cfg.horizon {
        y = system.step_at(&y, n)?.next;
        let d = l1(y.coords(), x);
        excursion = excursion.max(d);
        if d > shell {
            return Ok(ProbeOutcome::Escaped { step: n + 1, excursion });
        }
        if d <= cfg.tol {
            inside += 1;
            if inside >= CONVERGENCE_RUN {
                return Ok(ProbeOutcome::Converged { excursion });
            }
        } else {
            inside = 0;
        }
    }
    Ok(ProbeOutcome::Lingered { excursion })
}

/// Empirical stability verdict from perturbed starts around a rest point.
pub fn probe_stability(
    system: &ReplicatorSystem,
    x: &SimplexPoint<f64>,
    cfg: &ProbeConfig,
) -> Result<ProbeEvidence> {
    if !(cfg.radius > 0.0 && cfg.radius.is_finite()) || cfg.probes == 0 || cfg.horizon == 0 {
        return Err(Error::param("probe radius, count and horizon must be positive"));
    }
    let res = rest_residual(system, x)?;
    if res > cfg.rest_tol {
        return Err(Error::Precondition(format!(
            "probe_stability needs a rest point; residual {res:e} exceeds {:e}",
            cfg.rest_tol
        )));
    }
    let outcomes: Vec<ProbeOutcome> = (0..cfg.probes)
        .into_par_iter()
        .map(|i| {
            let mut rng = sampling::stream_rng(cfg.seed, i as u64);
            let start = perturb(&mut rng, x.coords(), cfg.radius);
            run_probe(system, x.coords(), start, cfg)
        })
        .collect::<Result<_>>()?;
    let mut ev = ProbeEvidence {
        stability: Stability::Undetermined,
        radius: cfg.radius,
        probes: cfg.probes,
        horizon: cfg.horizon,
        converged: 0,
        escaped: 0,
        max_excursion: 0.0,
        first_escape_step: None,
    };
    for o in &outcomes {
        match *o {
            ProbeOutcome::Converged { excursion } => {
                ev.converged += 1;
                ev.max_excursion = ev.max_excursion.max(excursion);
            }
            ProbeOutcome::Escaped { step, excursion } => {
                ev.escaped += 1;
                ev.max_excursion = ev.max_excursion.max(excursion);
                ev.first_escape_step = Some(ev.first_escape_step.map_or(step, |s| s.min(step)));
            }
            ProbeOutcome::Lingered { excursion } => {
                ev.max_excursion = ev.max_excursion.max(excursion);
            }
        }
    }
    ev.stability = if ev.escaped > 0 {
        Stability::Unstable
    } else if ev.converged == cfg.probes && ev.max_excursion <= 3.0 * cfg.radius {
        Stability::StableAsymptotic
    } else {
        Stability::Undetermined
    };
    Ok(ev)
}

/// `c_β` with `β = MaxInd_α(x0)` and `α = supp(x0)`.
pub fn predict_limit<R: Real>(x0: &SimplexPoint<R>) -> Result<SimplexPoint<R>> {
    let beta = max_ind(x0, &x0.support_face(), TIE_TOL)?;
    face_center(&Face::new(beta, x0.dim())?, x0.precision())
}

/// `M_{α,k}(x) = max_{i∈α} x_i - x_k`.
pub fn lyapunov_m<R: Real>(x: &SimplexPoint<R>, face: &Face, k: usize) -> Result<R> {
    if !face.contains(k) {
        return Err(Error::param(format!("index {k} is not in face {:?}", face.indices())));
    }
    check_support_in_face(x, face)?;
    let top = face
        .indices()
        .iter()
        .map(|&i| x.get(i).clone())
        .reduce(R::max_of)
        .expect("faces are nonempty");
    Ok(top - x.get(k).clone())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FolkConfig {
    pub trials: usize,
    pub seed: u64,
    pub horizon: usize,
    /// Convergence tolerance for clause (iv).
    pub tol: f64,
    /// Slack for the Lyapunov monotonicity check.
    pub slack: f64,
    /// Tolerance for rest and Nash residuals.
    pub residual_tol: f64,
    pub probe: ProbeConfig,
}

impl Default for FolkConfig {
    fn default() -> Self {
        FolkConfig {
            trials: 100,
            seed: 1,
            horizon: 100_000,
            tol: 1e-8,
            slack: 1e-12,
            residual_tol: 1e-12,
            probe: ProbeConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateReport {
    /// 1-based indices of the face.
    pub face: Vec<usize>,
    pub rest_residual: f64,
    pub is_rest: bool,
    pub nash_residual: f64,
    pub is_nash: bool,
    pub is_strict_nash: bool,
    pub probe: Option<ProbeEvidence>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub x0: Vec<f64>,
    pub predicted: Vec<f64>,
    pub final_point: Vec<f64>,
    /// First step of the closing run of in-tolerance steps.
    pub converged_at: Option<usize>,
    pub steps_run: usize,
    pub final_distance: f64,
    /// Smallest one-step change of any `M_{α,k}` along the orbit.
    pub min_lyapunov_increment: f64,
    pub lyapunov_ok: bool,
    pub max_ind_constant: bool,
    /// First step where `MaxInd` changed, if any.
    pub max_ind_change: Option<usize>,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClauseReport {
    pub clause: String,
    pub statement: String,
    pub passed: bool,
    pub checked: usize,
    pub witness: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FolkCertificate {
    pub m: usize,
    pub passed: bool,
    pub config: FolkConfig,
    pub clauses: Vec<ClauseReport>,
    pub candidates: Vec<CandidateReport>,
    pub trials: Vec<TrialRecord>,
}

impl FolkCertificate {
    /// CSV of the trial orbits.
    pub fn trials_csv(&self) -> String {
        let m = self.m;
        let mut out = String::from("trial");
        for k in 1..=m {
            out.push_str(&format!(",x0_{k}"));
        }
        for k in 1..=m {
            out.push_str(&format!(",limit_{k}"));
        }
        out.push_str(",converged_at,steps_run,final_distance,min_lyapunov_increment,max_ind_constant,passed\n");
        for t in &self.trials {
            out.push_str(&t.trial.to_string());
            for v in t.x0.iter().chain(&t.predicted) {
                out.push(',');
                out.push_str(&format_f64(*v));
            }
            out.push_str(&format!(
                ",{},{},{},{},{},{}\n",
                t.converged_at.map(|v| v.to_string()).unwrap_or_default(),
                t.steps_run,
                format_f64(t.final_distance),
                format_f64(t.min_lyapunov_increment),
                t.max_ind_constant,
                t.passed
            ));
        }
        out
    }
}

fn run_trial(system: &ReplicatorSystem, trial: usize, cfg: &FolkConfig) -> Result<TrialRecord> {
    let m = system.m();
    let mut rng = sampling::stream_rng(cfg.seed, trial as u64);
    let x0 = SimplexPoint::<f64>::new(sampling::simplex_interior(&mut rng, m))?;
    let predicted = predict_limit(&x0)?;
    let full = Face::full(m)?;
    let beta = max_ind(&x0, &full, TIE_TOL)?;
    let mvals = |x: &SimplexPoint<f64>| -> Vec<f64> {
        let top = x.coords().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        x.coords().iter().map(|v| top - v).collect()
    };
    let mut x = x0.clone();
    let mut prev_m = mvals(&x);
    let mut min_inc = f64::INFINITY;
    let mut max_ind_change = None;
    let mut inside = 0usize;
    let mut converged_at = None;
    let mut steps_run = 0;
    for n in 0..cfg.horizon {
        x = system.step_at(&x, n)?.next;
        steps_run = n + 1;
        let cur = mvals(&x);
        for (a, b) in prev_m.iter().zip(&cur) {
            min_inc = min_inc.min(b - a);
        }
        prev_m = cur;
        if max_ind_change.is_none() && max_ind(&x, &full, TIE_TOL)? != beta {
            max_ind_change = Some(n + 1);
        }
        if l1(x.coords(), predicted.coords()) <= cfg.tol {
            inside += 1;
            if inside >= CONVERGENCE_RUN {
                converged_at = Some(n + 2 - CONVERGENCE_RUN);
                break;
            }
        } else {
            inside = 0;
        }
    }
    let lyapunov_ok = min_inc >= -cfg.slack;
    let max_ind_constant = max_ind_change.is_none();
    Ok(TrialRecord {
        trial,
        final_distance: l1(x.coords(), predicted.coords()),
        x0: x0.to_f64_vec(),
        predicted: predicted.to_f64_vec(),
        final_point: x.to_f64_vec(),
        converged_at,
        steps_run,
        min_lyapunov_increment: min_inc,
        lyapunov_ok,
        max_ind_constant,
        max_ind_change,
        passed: converged_at.is_some() && lyapunov_ok && max_ind_constant,
    })
}

fn fmt_point(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|c| format_f64(*c)).collect();
    format!("({})", parts.join(", "))
}

/// Checks the four folk-theorem clauses on a concrete stable system.
pub fn certify_folk_theorem(system: &ReplicatorSystem, cfg: &FolkConfig) -> Result<FolkCertificate> {
    require_stable(system, "certify_folk_theorem")?;
    let m = system.m();
    if m > MAX_FOLK_DIM {
        return Err(Error::param(format!(
            "certify_folk_theorem supports m <= {MAX_FOLK_DIM}, got {m}"
        )));
    }
    if cfg.trials == 0 || cfg.horizon == 0 {
        return Err(Error::param("trials and horizon must be positive"));
    }
    let faces = Face::all(m)?;
    let candidates: Vec<CandidateReport> = faces
        .par_iter()
        .enumerate()
        .map(|(i, face)| {
            let c: SimplexPoint<f64> = face_center(face, 53)?;
            let rest_residual = rest_residual(system, &c)?;
            let is_rest = rest_residual <= cfg.residual_tol;
            let nash = is_nash(system, &c, cfg.residual_tol)?;
            let strict = is_strict_nash(system, &c, cfg.residual_tol)?;
            let probe = if is_rest {
                let pc = ProbeConfig {
                    seed: cfg.probe.seed ^ ((i as u64 + 1) << 32),
                    rest_tol: cfg.residual_tol,
                    ..cfg.probe
                };
                Some(probe_stability(system, &c, &pc)?)
            } else {
                None
            };
            Ok(CandidateReport {
                face: face.indices().to_vec(),
                rest_residual,
                is_rest,
                nash_residual: nash.residual,
                is_nash: nash.is_nash,
                is_strict_nash: strict,
                probe,
            })
        })
        .collect::<Result<_>>()?;

    let mut clauses = Vec::with_capacity(4);
    let nash: Vec<&CandidateReport> = candidates.iter().filter(|c| c.is_nash).collect();
    let bad = nash.iter().find(|c| !c.is_rest);
    clauses.push(ClauseReport {
        clause: "i".into(),
        statement: "every Nash equilibrium is a rest point".into(),
        passed: bad.is_none(),
        checked: nash.len(),
        witness: bad.map(|c| format!("face {:?}: Nash but rest residual {:e}", c.face, c.rest_residual)),
    });

    let stable: Vec<&CandidateReport> = candidates
        .iter()
        .filter(|c| matches!(&c.probe, Some(p) if p.stability == Stability::StableAsymptotic))
        .collect();
    let bad = stable.iter().find(|c| !c.is_nash);
    clauses.push(ClauseReport {
        clause: "ii".into(),
        statement: "every stable rest point is a Nash equilibrium".into(),
        passed: bad.is_none(),
        checked: stable.len(),
        witness: bad.map(|c| format!("face {:?}: probe-stable but Nash residual {:e}", c.face, c.nash_residual)),
    });

    let strict: Vec<&CandidateReport> = candidates.iter().filter(|c| c.is_strict_nash).collect();
    let bad = strict
        .iter()
        .find(|c| !matches!(&c.probe, Some(p) if p.stability == Stability::StableAsymptotic));
    clauses.push(ClauseReport {
        clause: "iii".into(),
        statement: "every strict Nash equilibrium is asymptotically stable".into(),
        passed: bad.is_none(),
        checked: strict.len(),
        witness: bad.map(|c| {
            format!(
                "face {:?}: strict Nash but probe verdict {:?}",
                c.face,
                c.probe.as_ref().map(|p| p.stability)
            )
        }),
    });

    let trials: Vec<TrialRecord> = (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_trial(system, t, cfg))
        .collect::<Result<_>>()?;
    let bad = trials.iter().find(|t| !t.passed);
    clauses.push(ClauseReport {
        clause: "iv".into(),
        statement: "interior orbits converge to the center of the face spanned by MaxInd".into(),
        passed: bad.is_none(),
        checked: trials.len(),
        witness: bad.map(|t| {
            let mut why = Vec::new();
            if t.converged_at.is_none() {
                why.push(format!(
                    "no convergence to {} within {} steps (final distance {:e}, final point {})",
                    fmt_point(&t.predicted),
                    t.steps_run,
                    t.final_distance,
                    fmt_point(&t.final_point)
                ));
            }
            if !t.lyapunov_ok {
                why.push(format!("Lyapunov decrease {:e}", t.min_lyapunov_increment));
            }
            if let Some(s) = t.max_ind_change {
                why.push(format!("MaxInd changed at step {s}"));
            }
            format!("trial {} from {}: {}", t.trial, fmt_point(&t.x0), why.join("; "))
        }),
    });

    Ok(FolkCertificate {
        m,
        passed: clauses.iter().all(|c| c.passed),
        config: *cfg,
        clauses,
        candidates,
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::FitnessMap;

    fn stable(m: usize) -> ReplicatorSystem {
        ReplicatorSystem::new(FitnessMap::identity(m).unwrap(), DynamicsKind::Stable).unwrap()
    }

    fn pt(v: &[f64]) -> SimplexPoint<f64> {
        SimplexPoint::from_f64(v, 53).unwrap()
    }

    #[test]
    fn candidate_counts() {
        let c2 = rest_point_candidates::<f64>(2, 53).unwrap();
        let pts: Vec<Vec<f64>> = c2.iter().map(|p| p.to_f64_vec()).collect();
        assert_eq!(pts, vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![0.5, 0.5]]);
        let c3 = rest_point_candidates::<f64>(3, 53).unwrap();
        assert_eq!(c3.len(), 7);
        assert!(c3.iter().any(|p| p.to_f64_vec() == vec![1.0 / 3.0; 3]));
        assert_eq!(rest_point_candidates::<f64>(4, 53).unwrap().len(), 15);
        assert!(rest_point_candidates::<f64>(13, 53).is_err());
        assert!(rest_point_candidates::<f64>(1, 53).is_err());
    }

    #[test]
    fn nash_examples() {
        let s = stable(3);
        for c in rest_point_candidates::<f64>(3, 53).unwrap() {
            let r = is_nash(&s, &c, 1e-12).unwrap();
            assert!(r.is_nash && r.residual.abs() < 1e-15, "{r:?}");
        }
        let r = is_nash(&s, &pt(&[0.5, 0.3, 0.2]), 1e-12).unwrap();
        assert!(!r.is_nash);
        assert!((r.residual - (0.5 - 0.38)).abs() < 1e-15);
        assert!(is_nash(&stable(2), &pt(&[1.0, 0.0]), 0.0).unwrap().is_nash);
    }

    #[test]
    fn strict_nash_only_at_vertices() {
        let s = stable(3);
        assert!(is_strict_nash(&s, &pt(&[1.0, 0.0, 0.0]), 1e-12).unwrap());
        assert!(!is_strict_nash(&s, &pt(&[0.5, 0.5, 0.0]), 1e-12).unwrap());
        assert!(!is_strict_nash(&s, &pt(&[1.0 / 3.0; 3]), 1e-12).unwrap());
        assert!(!is_strict_nash(&s, &pt(&[0.5, 0.3, 0.2]), 1e-12).unwrap());
    }

    #[test]
    fn zero_sum_systems_are_rejected_by_nash_tests() {
        let z = ReplicatorSystem::new(FitnessMap::identity(3).unwrap(), DynamicsKind::ZeroSumV1).unwrap();
        assert!(is_nash(&z, &pt(&[1.0 / 3.0; 3]), 0.0).is_err());
    }

    #[test]
    fn limit_prediction() {
        assert_eq!(predict_limit(&pt(&[0.5, 0.3, 0.2])).unwrap().to_f64_vec(), vec![1.0, 0.0, 0.0]);
        assert_eq!(predict_limit(&pt(&[0.4, 0.4, 0.2])).unwrap().to_f64_vec(), vec![0.5, 0.5, 0.0]);
        assert_eq!(predict_limit(&pt(&[1.0 / 3.0; 3])).unwrap().to_f64_vec(), vec![1.0 / 3.0; 3]);
        assert_eq!(predict_limit(&pt(&[0.0, 0.3, 0.7])).unwrap().to_f64_vec(), vec![0.0, 0.0, 1.0]);
    }

    #[test]
    fn lyapunov_examples() {
        let full = Face::full(3).unwrap();
        let x = pt(&[0.5, 0.3, 0.2]);
        assert_eq!(lyapunov_m(&x, &full, 1).unwrap(), 0.0);
        assert!((lyapunov_m(&x, &full, 3).unwrap() - 0.3).abs() < 1e-15);
        let c = pt(&[1.0 / 3.0; 3]);
        for k in 1..=3 {
            assert_eq!(lyapunov_m(&c, &full, k).unwrap(), 0.0);
        }
        let edge = Face::new(vec![1, 2], 3).unwrap();
        assert!(matches!(lyapunov_m(&pt(&[0.5, 0.5, 0.0]), &edge, 3), Err(Error::Parameter(_))));
    }

    #[test]
    fn probe_verdicts() {
        let s = stable(3);
        let cfg = ProbeConfig::default();
        let v = probe_stability(&s, &pt(&[1.0, 0.0, 0.0]), &cfg).unwrap();
        assert_eq!(v.stability, Stability::StableAsymptotic, "{v:?}");
        let c = probe_stability(&s, &pt(&[1.0 / 3.0; 3]), &cfg).unwrap();
        assert_eq!(c.stability, Stability::Unstable, "{c:?}");
        let e = probe_stability(&s, &pt(&[0.5, 0.5, 0.0]), &cfg).unwrap();
        assert_eq!(e.stability, Stability::Unstable, "{e:?}");
        let z = ReplicatorSystem::new(FitnessMap::identity(3).unwrap(), DynamicsKind::ZeroSumV1).unwrap();
        let zc = probe_stability(&z, &pt(&[1.0 / 3.0; 3]), &cfg).unwrap();
        assert_eq!(zc.stability, Stability::Unstable, "{zc:?}");
        assert!(matches!(
            probe_stability(&s, &pt(&[0.5, 0.3, 0.2]), &cfg),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn folk_certificate_identity_and_negative_control() {
        let cfg = FolkConfig {
            trials: 20,
            ..Default::default()
        };
        let cert = certify_folk_theorem(&stable(3), &cfg).unwrap();
        assert!(cert.passed, "{:#?}", cert.clauses);
        assert_eq!(cert.candidates.len(), 7);
        let broken = ReplicatorSystem::new(FitnessMap::order_swap(3).unwrap(), DynamicsKind::Stable).unwrap();
        let cert = certify_folk_theorem(&broken, &cfg).unwrap();
        assert!(!cert.passed);
        assert!(!cert.clauses[3].passed && cert.clauses[3].witness.is_some());
        assert!(certify_folk_theorem(&stable(9), &cfg).is_err());
    }
}
