//! JSON experiment configs and the batch runners behind the CLI
//! subcommands. Every runner writes its artifacts atomically into the output
//! directory and returns an [`Outcome`] carrying the process exit code.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::equilibrium::{certify_folk_theorem, FolkCertificate, FolkConfig, ProbeConfig};
use crate::error::{Error, Result};
use crate::fitness::catalog::{self, CatalogReport, CheckOptions};
use crate::fitness::{sampling, FitnessDoc, FitnessMap};
use crate::historic::{
    divergence_report, gap_certificate, itinerary_certificate, repeated_averages, trapping_runs,
    xi_descent, DivergenceReport, DivergenceThresholds, GapCertificate, ItineraryCertificate,
    RegionPartition, TrappingAnalysis, Verdict, XiDescent,
};
use crate::real::{BigFloat, Precision, Real};
use crate::replicator::{iterate, DynamicsKind, OrbitTrace, ReplicatorSystem};
use crate::simplex::{face_center, Face, SimplexPoint};

/// Process exit codes.
pub mod exit {
    pub const PASS: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const INVARIANT: i32 = 2;
    pub const CERTIFICATE: i32 = 3;
    pub const INSUFFICIENT: i32 = 4;
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Invariant { .. } | Error::Numeric { .. } => exit::INVARIANT,
        Error::InsufficientData(_) => exit::INSUFFICIENT,
        _ => exit::CONFIG,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub fitness: FitnessDoc,
    pub kind: DynamicsKind,
    /// Wraps the fitness in a normalization with this `ε` when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub normalize_epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialState {
    Point { coords: Vec<f64> },
    /// 1-based face indices.
    FaceCenter { face: Vec<usize> },
    /// Seeded uniform interior point; falls back to the top-level seed.
    RandomInterior {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
    },
}

impl Default for InitialState {
    fn default() -> Self {
        InitialState::RandomInterior { seed: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum AnalysisConfig {
    Folk {
        #[serde(default = "default_trials")]
        trials: usize,
        #[serde(default = "default_horizon")]
        horizon: usize,
        #[serde(default = "default_folk_tol")]
        tol: f64,
        #[serde(default = "default_probe_radius")]
        probe_radius: f64,
        #[serde(default = "default_probes")]
        probes: usize,
        #[serde(default = "default_horizon")]
        probe_horizon: usize,
    },
    /// All of the historic diagnostics with default parameters.
    Historic,
    Itinerary,
    XiDescent,
    Averages {
        #[serde(default = "default_s_max")]
        s_max: usize,
        #[serde(default = "default_window")]
        window_fraction: f64,
        #[serde(default)]
        thresholds: Option<DivergenceThresholds>,
    },
    Trapping {
        #[serde(default = "default_delta0")]
        delta0: f64,
    },
}

fn default_trials() -> usize {
    100
}
fn default_horizon() -> usize {
    100_000
}
fn default_folk_tol() -> f64 {
    1e-8
}
fn default_probe_radius() -> f64 {
    1e-3
}
fn default_probes() -> usize {
    64
}
fn default_s_max() -> usize {
    3
}
fn default_window() -> f64 {
    0.5
}
fn default_delta0() -> f64 {
    0.05
}
fn default_steps() -> usize {
    1000
}
fn default_thinning() -> usize {
    1
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default = "default_steps")]
    pub steps: usize,
    /// Defaults to 53 for the stable kind and 256 for the zero-sum kinds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision_bits: Option<u32>,
    #[serde(default = "default_thinning")]
    pub thinning: usize,
    #[serde(default)]
    pub analyses: Vec<AnalysisConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

fn config_err(field: &str, msg: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {msg}"))
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config JSON: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("configs serialize")
    }

    /// Field-level validation; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        if let Some(eps) = self.system.normalize_epsilon {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(config_err("system.normalize_epsilon", format!("must be > 0, got {eps}")));
            }
        }
        if self.steps == 0 {
            return Err(config_err("steps", "must be >= 1"));
        }
        if self.thinning == 0 {
            return Err(config_err("thinning", "must be >= 1"));
        }
        if let Some(bits) = self.precision_bits {
            Precision::new(bits).map_err(|e| config_err("precision_bits", e))?;
        }
        let m = self.system.fitness.m;
        match &self.initial {
            InitialState::Point { coords } if coords.len() != m => {
                return Err(config_err(
                    "initial.coords",
                    format!("expected {m} coordinates, got {}", coords.len()),
                ));
            }
            InitialState::FaceCenter { face } => {
                Face::new(face.clone(), m).map_err(|e| config_err("initial.face", e))?;
            }
            _ => {}
        }
        for (i, a) in self.analyses.iter().enumerate() {
            match a {
                AnalysisConfig::Folk {
                    trials,
                    horizon,
                    tol,
                    probe_radius,
                    probes,
                    probe_horizon,
                } => {
                    if *trials == 0 || *horizon == 0 || *probes == 0 || *probe_horizon == 0 {
                        return Err(config_err(&format!("analyses[{i}]"), "counts must be >= 1"));
                    }
                    if !(*tol > 0.0) || !(*probe_radius > 0.0) {
                        return Err(config_err(&format!("analyses[{i}]"), "tol and probe_radius must be > 0"));
                    }
                }
                AnalysisConfig::Averages {
                    s_max,
                    window_fraction,
                    ..
                } => {
                    if *s_max == 0 {
                        return Err(config_err(&format!("analyses[{i}].s_max"), "must be >= 1"));
                    }
                    if !(*window_fraction > 0.0 && *window_fraction < 1.0) {
                        return Err(config_err(&format!("analyses[{i}].window_fraction"), "must lie in (0, 1)"));
                    }
                }
                AnalysisConfig::Trapping { delta0 } => {
                    if !(delta0.is_finite() && *delta0 > 0.0) {
                        return Err(config_err(&format!("analyses[{i}].delta0"), "must be > 0"));
                    }
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn precision(&self) -> Result<Precision> {
        Precision::new(
            self.precision_bits
                .unwrap_or_else(|| self.system.kind.default_precision()),
        )
    }

    pub fn fitness(&self) -> Result<FitnessMap> {
        let doc = &self.system.fitness;
        let map = FitnessMap::new(doc.m, doc.expr.clone()).map_err(|e| config_err("system.fitness", e))?;
        match self.system.normalize_epsilon {
            Some(eps) => map.normalize(eps).map_err(|e| config_err("system.normalize_epsilon", e)),
            None => Ok(map),
        }
    }

    pub fn build_system(&self) -> Result<ReplicatorSystem> {
        ReplicatorSystem::new(self.fitness()?, self.system.kind).map_err(|e| config_err("system", e))
    }

    pub fn initial_point<R: Real>(&self, precision: u32) -> Result<SimplexPoint<R>> {
        let m = self.system.fitness.m;
        match &self.initial {
            InitialState::Point { coords } => {
                SimplexPoint::from_f64(coords, precision).map_err(|e| config_err("initial.coords", e))
            }
            InitialState::FaceCenter { face } => {
                face_center(&Face::new(face.clone(), m).map_err(|e| config_err("initial.face", e))?, precision)
            }
            InitialState::RandomInterior { seed } => {
                let mut rng = sampling::stream_rng(seed.unwrap_or(self.seed), 0);
                SimplexPoint::from_f64(&sampling::simplex_interior(&mut rng, m), precision)
            }
        }
    }

    /// The config with every default made explicit.
    pub fn resolved(&self) -> Result<ExperimentConfig> {
        let mut c = self.clone();
        c.precision_bits = Some(self.precision()?.bits());
        if let InitialState::RandomInterior { seed: None } = c.initial {
            c.initial = InitialState::RandomInterior { seed: Some(self.seed) };
        }
        Ok(c)
    }

    fn folk_config(&self) -> FolkConfig {
        let mut fc = FolkConfig {
            seed: self.seed,
            ..Default::default()
        };
        fc.probe.seed = self.seed;
        for a in &self.analyses {
            if let AnalysisConfig::Folk {
                trials,
                horizon,
                tol,
                probe_radius,
                probes,
                probe_horizon,
            } = a
            {
                fc.trials = *trials;
                fc.horizon = *horizon;
                fc.tol = *tol;
                fc.probe = ProbeConfig {
                    radius: *probe_radius,
                    probes: *probes,
                    horizon: *probe_horizon,
                    seed: self.seed,
                    tol: *tol,
                    rest_tol: fc.residual_tol,
                };
            }
        }
        fc
    }

    fn historic_params(&self) -> HistoricParams {
        let mut p = HistoricParams::default();
        for a in &self.analyses {
            match a {
                AnalysisConfig::Trapping { delta0 } => p.delta0 = *delta0,
                AnalysisConfig::Averages {
                    s_max,
                    window_fraction,
                    thresholds,
                } => {
                    p.s_max = *s_max;
                    p.window_fraction = *window_fraction;
                    if let Some(t) = thresholds {
                        p.thresholds = *t;
                    }
                }
                _ => {}
            }
        }
        p
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoricParams {
    pub delta0: f64,
    pub s_max: usize,
    pub window_fraction: f64,
    pub thresholds: DivergenceThresholds,
    /// Slack on the one-step increase of `log2 ξ`.
    pub xi_slack_log2: f64,
}

impl Default for HistoricParams {
    fn default() -> Self {
        HistoricParams {
            delta0: 0.05,
            s_max: 3,
            window_fraction: 0.5,
            thresholds: DivergenceThresholds::default(),
            xi_slack_log2: 1e-12,
        }
    }
}

/// Result of a subcommand: the exit code plus the artifacts written.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub code: i32,
    pub message: String,
    pub files: Vec<PathBuf>,
}

/// Writes `contents` to `dir/name` through a temporary file and a rename.
pub fn write_atomic(dir: &Path, name: &str, contents: &[u8]) -> Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let target = dir.join(name);
    let tmp = dir.join(format!(".{name}.tmp"));
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, &target)?;
    Ok(target)
}

fn sidecar(cfg: &ExperimentConfig, command: &str, extra: serde_json::Value) -> Result<Vec<u8>> {
    let ts = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let doc = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "generated_at_unix": ts,
        "config": cfg.resolved()?,
        "result": extra,
    });
    Ok(serde_json::to_vec_pretty(&doc)?)
}

struct Simulated {
    csv: String,
    trace: OrbitTrace,
    last: Vec<f64>,
}

fn simulate_with<R: Real>(cfg: &ExperimentConfig, system: &ReplicatorSystem, bits: u32) -> Result<Simulated> {
    let x0 = cfg.initial_point::<R>(bits)?;
    let orbit = iterate(system, &x0, cfg.steps, cfg.thinning)?;
    Ok(Simulated {
        csv: orbit.to_csv(),
        last: orbit.last().to_f64_vec(),
        trace: orbit.trace,
    })
}

fn simulate(cfg: &ExperimentConfig, system: &ReplicatorSystem) -> Result<Simulated> {
    let prec = cfg.precision()?;
    if prec.is_native() {
        simulate_with::<f64>(cfg, system, 53)
    } else {
        simulate_with::<BigFloat>(cfg, system, prec.bits())
    }
}

/// Output directory: the override if given, else the config's.
fn out_dir(cfg: &ExperimentConfig, out: Option<&Path>) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| cfg.output_dir.clone())
}

/// `simulate`: iterate and write `orbit.csv` plus `orbit.json`.
pub fn run_simulate(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<Outcome> {
    let dir = out_dir(cfg, out);
    let system = cfg.build_system()?;
    let sim = match simulate(cfg, &system) {
        Ok(s) => s,
        Err(e @ (Error::Invariant { .. } | Error::Numeric { .. })) => {
            let side = sidecar(cfg, "simulate", json!({ "error": e.to_string() }))?;
            let f = write_atomic(&dir, "orbit.json", &side)?;
            return Ok(Outcome {
                code: exit::INVARIANT,
                message: e.to_string(),
                files: vec![f],
            });
        }
        Err(e) => return Err(e),
    };
    let mut files = vec![write_atomic(&dir, "orbit.csv", sim.csv.as_bytes())?];
    let flagged = &sim.trace.flagged_steps;
    let result = json!({
        "steps": cfg.steps,
        "rows": sim.csv.lines().count() - 1,
        "final_point": sim.last,
        "max_drift": sim.trace.max_drift(),
        "clamped_components": sim.trace.clamped,
        "drift_violations": flagged.len(),
        "first_drift_violation": flagged.first(),
    });
    files.push(write_atomic(&dir, "orbit.json", &sidecar(cfg, "simulate", result)?)?);
    if let Some(step) = flagged.first() {
        return Ok(Outcome {
            code: exit::INVARIANT,
            message: format!("coordinate-sum drift exceeded tolerance at step {step}"),
            files,
        });
    }
    Ok(Outcome {
        code: exit::PASS,
        message: format!("{} steps written", cfg.steps),
        files,
    })
}

/// `verify-folk`: certificate JSON, trials CSV and sidecar.
pub fn run_verify_folk(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(Outcome, FolkCertificate)> {
    if cfg.system.kind != DynamicsKind::Stable {
        return Err(config_err("system.kind", "verify-folk needs the stable kind"));
    }
    let dir = out_dir(cfg, out);
    let system = cfg.build_system()?;
    let fc = cfg.folk_config();
    let cert = certify_folk_theorem(&system, &fc)?;
    let files = vec![
        write_atomic(&dir, "folk_certificate.json", &serde_json::to_vec_pretty(&cert)?)?,
        write_atomic(&dir, "folk_trials.csv", cert.trials_csv().as_bytes())?,
        write_atomic(
            &dir,
            "folk.json",
            &sidecar(cfg, "verify-folk", json!({ "passed": cert.passed }))?,
        )?,
    ];
    let (code, message) = if cert.passed {
        (exit::PASS, "all four clauses pass".to_string())
    } else {
        let failed: Vec<String> = cert
            .clauses
            .iter()
            .filter(|c| !c.passed)
            .map(|c| format!("clause ({}) failed: {}", c.clause, c.witness.clone().unwrap_or_default()))
            .collect();
        (exit::CERTIFICATE, failed.join("; "))
    };
    Ok((Outcome { code, message, files }, cert))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistoricReport {
    pub params: HistoricParams,
    pub steps: usize,
    pub precision_bits: u32,
    pub max_drift: f64,
    pub drift_violations: usize,
    pub xi_descent: XiDescent,
    pub itinerary: ItineraryCertificate,
    pub trapping: Option<TrappingAnalysis>,
    pub gap: Option<GapCertificate>,
    pub divergence: Option<DivergenceReport>,
    /// Reason the data did not support a verdict.
    pub insufficient: Option<String>,
    pub passed: bool,
}

/// `verify-historic`: ξ-descent, itinerary, trapping and gap, repeated
/// averages and divergence.
pub fn run_verify_historic(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<(Outcome, HistoricReport)> {
    if !cfg.system.kind.is_zero_sum() {
        return Err(config_err("system.kind", "verify-historic needs a zero-sum kind"));
    }
    let dir = out_dir(cfg, out);
    let params = cfg.historic_params();
    let partition = RegionPartition::new(params.delta0).map_err(|e| config_err("delta0", e))?;
    let system = cfg.build_system()?;
    let sim = simulate(cfg, &system)?;
    let trace = &sim.trace;
    let mut files = vec![write_atomic(&dir, "orbit.csv", sim.csv.as_bytes())?];

    let xi = xi_descent(trace, params.xi_slack_log2)?;
    let itinerary = itinerary_certificate(trace, cfg.system.kind, &partition)?;
    let mut insufficient = None;
    let trapping = match trapping_runs(trace, &partition, cfg.system.kind) {
        Ok(t) => Some(t),
        Err(Error::InsufficientData(msg)) => {
            insufficient = Some(msg);
            None
        }
        Err(e) => return Err(e),
    };
    let gap = trapping.as_ref().map(gap_certificate);
    if let Some(t) = &trapping {
        for u in 1..=3u8 {
            files.push(write_atomic(&dir, &format!("trapping_u{u}.csv"), t.csv(u).as_bytes())?);
        }
    }
    let stack = repeated_averages(trace, params.s_max)?;
    files.push(write_atomic(&dir, "averages.csv", stack.csv(cfg.thinning).as_bytes())?);
    let divergence = match divergence_report(&stack, params.window_fraction, params.thresholds) {
        Ok(d) => Some(d),
        Err(Error::Precondition(msg)) => {
            insufficient.get_or_insert(format!("{msg}; raise steps"));
            None
        }
        Err(e) => return Err(e),
    };
    let drift_violations = trace.flagged_steps.len();
    let passed = insufficient.is_none()
        && drift_violations == 0
        && xi.passed
        && itinerary.passed
        && gap.as_ref().is_some_and(|g| g.passed)
        && divergence.as_ref().is_some_and(|d| d.verdict == Verdict::Historic);
    let report = HistoricReport {
        params,
        steps: cfg.steps,
        precision_bits: cfg.precision()?.bits(),
        max_drift: trace.max_drift(),
        drift_violations,
        xi_descent: xi,
        itinerary,
        trapping,
        gap,
        divergence,
        insufficient,
        passed,
    };
    files.push(write_atomic(&dir, "historic_report.json", &serde_json::to_vec_pretty(&report)?)?);
    files.push(write_atomic(
        &dir,
        "historic.json",
        &sidecar(cfg, "verify-historic", json!({ "passed": report.passed }))?,
    )?);
    let (code, message) = if let Some(msg) = &report.insufficient {
        (exit::INSUFFICIENT, msg.clone())
    } else if drift_violations > 0 {
        (
            exit::INVARIANT,
            format!("coordinate-sum drift exceeded tolerance at step {}", trace.flagged_steps[0]),
        )
    } else if report.passed {
        (exit::PASS, "historic behavior certified".to_string())
    } else {
        let mut why = Vec::new();
        if !report.xi_descent.passed {
            why.push("xi increased".to_string());
        }
        if !report.itinerary.passed {
            why.push(format!("itinerary: {}", report.itinerary.reason.clone().unwrap_or_default()));
        }
        if let Some(g) = report.gap.as_ref().filter(|g| !g.passed) {
            why.push(format!("gap: {}", g.reason.clone().unwrap_or_default()));
        }
        if let Some(d) = report.divergence.as_ref().filter(|d| d.verdict != Verdict::Historic) {
            why.push(format!("averages verdict {:?}", d.verdict));
        }
        (exit::CERTIFICATE, why.join("; "))
    };
    Ok((Outcome { code, message, files }, report))
}

/// `catalog check`: SOP and gradient suites over the catalog.
pub fn run_catalog_check(opts: &CheckOptions, out: Option<&Path>) -> Result<(Outcome, CatalogReport)> {
    let report = catalog::check(opts)?;
    let mut files = Vec::new();
    if let Some(dir) = out {
        files.push(write_atomic(dir, "catalog_report.json", &serde_json::to_vec_pretty(&report)?)?);
    }
    let code = if report.passed { exit::PASS } else { exit::CERTIFICATE };
    let message = format!(
        "{} entries, {} SOP violations, {} gradient failures",
        report.entries.len(),
        report.total_violations,
        report.gradients.iter().filter(|g| !g.passed).count()
    );
    Ok((Outcome { code, message, files }, report))
}
