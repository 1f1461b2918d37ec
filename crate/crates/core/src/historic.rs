//! Diagnostics of the zero-sum maps on the 2-simplex: the Lyapunov product
//! `ξ`, the order regions `G_1..G_6` and their unions `U_1..U_3`,
//! trapping-escaping run lengths, sojourn-growth constants, repeated time
//! averages and their oscillation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{format_f64, Real};
use crate::replicator::{DynamicsKind, OrbitTrace, ReplicatorSystem};
use crate::simplex::SimplexPoint;

/// Chains `a ≥ b ≥ c` (0-based) defining `G_1..G_6`.
const CHAINS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [2, 0, 1],
    [2, 1, 0],
    [1, 2, 0],
    [1, 0, 2],
];

/// Violations listed verbatim in certificates.
const MAX_LISTED: usize = 50;

fn need3<R>(x: &[R]) -> Result<()> {
    if x.len() != 3 {
        return Err(Error::Dimension {
            expected: 3,
            got: x.len(),
        });
    }
    Ok(())
}

/// `ξ(x) = x_1 x_2 x_3`.
pub fn xi<R: Real>(x: &SimplexPoint<R>) -> Result<R> {
    need3(x.coords())?;
    let c = x.coords();
    Ok(c[0].clone() * c[1].clone() * c[2].clone())
}

/// One-step factor `ζ(x)` with `ξ(ℛ(x)) = ξ(x) ζ(x)` before renormalization.
pub fn zeta<R: Real>(system: &ReplicatorSystem, x: &SimplexPoint<R>) -> Result<R> {
    if !system.kind().is_zero_sum() {
        return Err(Error::Unsupported("zeta is defined for zero-sum systems only".into()));
    }
    let (fac, _) = system.factors(x)?;
    Ok(fac[0].clone() * fac[1].clone() * fac[2].clone())
}

/// Index `1..=6` of the order region containing `x`; ties within `tie_tol`
/// go to the lowest qualifying index.
pub fn region_of<R: Real>(x: &[R], tie_tol: f64) -> usize {
    debug_assert_eq!(x.len(), 3);
    let ge = |a: usize, b: usize| {
        if tie_tol == 0.0 {
            x[a] >= x[b]
        } else {
            x[a] >= x[b].clone() - x[b].lit(tie_tol)
        }
    };
    CHAINS
        .iter()
        .position(|c| ge(c[0], c[1]) && ge(c[1], c[2]))
        .map(|i| i + 1)
        .expect("every point of R^3 lies in some order region")
}

/// Checked variant of [`region_of`] for simplex points.
pub fn region_of_point<R: Real>(x: &SimplexPoint<R>, tie_tol: f64) -> Result<usize> {
    need3(x.coords())?;
    Ok(region_of(x.coords(), tie_tol))
}

/// Successor of a region along the itinerary of the given map.
pub fn region_successor(kind: DynamicsKind, g: usize) -> usize {
    match kind {
        DynamicsKind::ZeroSumV2 => (g + 4) % 6 + 1,
        _ => g % 6 + 1,
    }
}

/// Successor of `U_i` along the itinerary.
pub fn u_successor(kind: DynamicsKind, u: u8) -> u8 {
    match kind {
        DynamicsKind::ZeroSumV2 => (u + 1) % 3 + 1,
        _ => u % 3 + 1,
    }
}

/// `U_0` is the open l1-ball of radius `delta0` around the center.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionPartition {
    pub delta0: f64,
}

impl Default for RegionPartition {
    fn default() -> Self {
        RegionPartition { delta0: 0.05 }
    }
}

impl RegionPartition {
    pub fn new(delta0: f64) -> Result<Self> {
        if !(delta0.is_finite() && delta0 > 0.0) {
            return Err(Error::param(format!("delta0 must be > 0, got {delta0}")));
        }
        Ok(RegionPartition { delta0 })
    }

    fn label(&self, shadow: &[f64], region: u8) -> u8 {
        let d: f64 = shadow.iter().map(|v| (v - 1.0 / 3.0).abs()).sum();
        if d < self.delta0 {
            0
        } else {
            (region + 1) / 2
        }
    }
}

/// `U`-label in `0..=3` of a point.
pub fn u_membership<R: Real>(x: &SimplexPoint<R>, partition: &RegionPartition) -> Result<u8> {
    let g = region_of_point(x, 0.0)? as u8;
    let third = x.coords()[0].lit(1.0) / x.coords()[0].lit(3.0);
    let d = x
        .coords()
        .iter()
        .fold(third.zero_like(), |acc, v| acc + (v.clone() - third.clone()).abs());
    Ok(if d.to_f64() < partition.delta0 {
        0
    } else {
        (g + 1) / 2
    })
}

/// `U`-labels of every state of a trace.
pub fn u_labels(trace: &OrbitTrace, partition: &RegionPartition) -> Result<Vec<u8>> {
    if trace.m != 3 || trace.regions.len() != trace.len() {
        return Err(Error::Dimension {
            expected: 3,
            got: trace.m,
        });
    }
    Ok((0..trace.len())
        .map(|n| partition.label(trace.point(n), trace.regions[n]))
        .collect())
}

/// Run-length encoding `(value, length)` of a boolean sequence.
pub fn run_lengths(ind: &[bool]) -> Vec<(bool, usize)> {
    let mut out: Vec<(bool, usize)> = Vec::new();
    for &b in ind {
        match out.last_mut() {
            Some((v, n)) if *v == b => *n += 1,
            _ => out.push((b, 1)),
        }
    }
    out
}

/// One trapping block `p` and the escape block `q` that follows it.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Run {
    pub p: usize,
    pub q: usize,
    pub p_complete: bool,
    pub q_complete: bool,
}

/// Trapping-escaping encoding of the indicator of one region.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrappingRecord {
    pub region: u8,
    /// Length of a leading escape block before the first trapping block.
    pub lead: usize,
    pub runs: Vec<Run>,
    /// `min p_{n+1} / Σ_{k≤n} (p_k + q_k)` over complete blocks.
    pub lambda_hat: Option<f64>,
    /// `min q_{n+1} / (Σ_{k≤n} (p_k + q_k) + p_{n+1})` over complete blocks.
    pub mu_hat: Option<f64>,
    /// The indicator never switches after its first trapping block.
    pub degenerate: bool,
}

impl TrappingRecord {
    pub fn from_indicator(region: u8, ind: &[bool]) -> Self {
        let blocks = run_lengths(ind);
        let nb = blocks.len();
        let mut lead = 0;
        let mut i = 0;
        if let Some(&(false, n)) = blocks.first() {
            lead = n;
            i = 1;
        }
        let mut runs = Vec::new();
        while i < nb {
            let p = blocks[i].1;
            let p_complete = i + 1 < nb;
            let (q, q_complete) = if i + 1 < nb {
                (blocks[i + 1].1, i + 2 < nb)
            } else {
                (0, false)
            };
            runs.push(Run {
                p,
                q,
                p_complete,
                q_complete,
            });
            i += 2;
        }
        let mut lambda: Option<f64> = None;
        let mut mu: Option<f64> = None;
        let mut acc = 0usize;
        for n in 0..runs.len() {
            if n > 0 && runs[n].p_complete {
                let r = runs[n].p as f64 / acc as f64;
                lambda = Some(lambda.map_or(r, |v| v.min(r)));
            }
            if n > 0 && runs[n].q_complete {
                let r = runs[n].q as f64 / (acc + runs[n].p) as f64;
                mu = Some(mu.map_or(r, |v| v.min(r)));
            }
            acc += runs[n].p + runs[n].q;
        }
        let degenerate = runs.len() <= 1 && runs.first().map_or(true, |r| r.q == 0);
        TrappingRecord {
            region,
            lead,
            runs,
            lambda_hat: lambda,
            mu_hat: mu,
            degenerate,
        }
    }

    /// Total length covered by the encoding.
    pub fn total(&self) -> usize {
        self.lead + self.runs.iter().map(|r| r.p + r.q).sum::<usize>()
    }
}

/// Consecutive sojourns in `U_1` and the next two regions of the itinerary.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Epoch {
    pub p: usize,
    pub q: usize,
    pub r: usize,
}

/// Trapping analysis of a zero-sum orbit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrappingAnalysis {
    pub partition: RegionPartition,
    pub kind: DynamicsKind,
    /// First analyzed state (first entry into `U_1` from the cycle).
    pub start: usize,
    pub analyzed_len: usize,
    /// Complete epochs in itinerary order.
    pub epochs: Vec<Epoch>,
    /// Region order `[U_1, next, next]` used for the epochs.
    pub order: [u8; 3],
    /// Records for `U_1, U_2, U_3`.
    pub records: Vec<TrappingRecord>,
    /// State indices where the block sequence left the itinerary.
    pub breaks: Vec<usize>,
    /// State indices after `start` that lie in `U_0`.
    pub u0_reentries: Vec<usize>,
    pub degenerate: bool,
}

/// Complete epochs needed before gap statistics are reported.
pub const MIN_EPOCHS: usize = 3;

/// Run-length analysis of the `U`-labels of an orbit.
pub fn trapping_runs(
    trace: &OrbitTrace,
    partition: &RegionPartition,
    kind: DynamicsKind,
) -> Result<TrappingAnalysis> {
    let labels = u_labels(trace, partition)?;
    TrappingAnalysis::from_labels(&labels, kind, *partition)
}

impl TrappingAnalysis {
    pub fn from_labels(labels: &[u8], kind: DynamicsKind, partition: RegionPartition) -> Result<Self> {
        let s1 = u_successor(kind, 1);
        let order = [1, s1, u_successor(kind, s1)];
        let start = (1..labels.len()).find(|&n| labels[n] == 1 && labels[n - 1] >= 2);
        let Some(start) = start else {
            // No completed entry into U_1. A trajectory that settles in one
            // region is degenerate; anything else needs more steps.
            let first = labels.iter().position(|&l| l != 0).unwrap_or(labels.len());
            let tail = &labels[first..];
            if tail.windows(2).all(|w| w[0] == w[1]) {
                let records = (1..=3u8)
                    .map(|u| {
                        let ind: Vec<bool> = tail.iter().map(|&l| l == u).collect();
                        TrappingRecord::from_indicator(u, &ind)
                    })
                    .collect();
                return Ok(TrappingAnalysis {
                    partition,
                    kind,
                    start: first,
                    analyzed_len: tail.len(),
                    epochs: Vec::new(),
                    order,
                    records,
                    breaks: Vec::new(),
                    u0_reentries: Vec::new(),
                    degenerate: true,
                });
            }
            return Err(Error::InsufficientData(format!(
                "the orbit of {} states never completes an entry into U1 from the cycle; raise steps",
                labels.len()
            )));
        };
        let tail = &labels[start..];
        let records: Vec<TrappingRecord> = (1..=3u8)
            .map(|u| {
                let ind: Vec<bool> = tail.iter().map(|&l| l == u).collect();
                TrappingRecord::from_indicator(u, &ind)
            })
            .collect();
        let u0_reentries: Vec<usize> = tail
            .iter()
            .enumerate()
            .filter(|(_, &l)| l == 0)
            .map(|(i, _)| start + i)
            .collect();
        // Block sequence with absolute start indices.
        let mut blocks: Vec<(u8, usize, usize)> = Vec::new();
        for (i, &l) in tail.iter().enumerate() {
            match blocks.last_mut() {
                Some((v, _, n)) if *v == l => *n += 1,
                _ => blocks.push((l, start + i, 1)),
            }
        }
        let mut epochs = Vec::new();
        let mut breaks = Vec::new();
        let mut b = 0;
        'outer: while b + 3 < blocks.len() {
            for j in 0..3 {
                if blocks[b + j].0 != order[j] {
                    breaks.push(blocks[b + j].1);
                    break 'outer;
                }
            }
            epochs.push(Epoch {
                p: blocks[b].2,
                q: blocks[b + 1].2,
                r: blocks[b + 2].2,
            });
            b += 3;
        }
        if breaks.is_empty() {
            // check the trailing partial epoch as well
            for j in 0..(blocks.len() - b).min(3) {
                if blocks[b + j].0 != order[j] {
                    breaks.push(blocks[b + j].1);
                    break;
                }
            }
        }
        if epochs.len() < MIN_EPOCHS && breaks.is_empty() {
            return Err(Error::InsufficientData(format!(
                "only {} complete epochs after the transient (need {MIN_EPOCHS}); raise steps or precision",
                epochs.len()
            )));
        }
        Ok(TrappingAnalysis {
            partition,
            kind,
            start,
            analyzed_len: tail.len(),
            epochs,
            order,
            records,
            breaks,
            u0_reentries,
            degenerate: false,
        })
    }

    /// Label sequence realizing the given epochs, closed by one `U_1` state.
    pub fn from_epochs(epochs: &[Epoch], kind: DynamicsKind) -> Result<Self> {
        let s1 = u_successor(kind, 1);
        let order = [1u8, s1, u_successor(kind, s1)];
        let mut labels = vec![order[2]];
        for e in epochs {
            labels.extend(std::iter::repeat(order[0]).take(e.p));
            labels.extend(std::iter::repeat(order[1]).take(e.q));
            labels.extend(std::iter::repeat(order[2]).take(e.r));
        }
        labels.push(order[0]);
        TrappingAnalysis::from_labels(&labels, kind, RegionPartition::default())
    }

    /// CSV `epoch,p,q,r,lambda_hat,mu_hat` for `U_region`: `p` is the
    /// region's own sojourn and `q`, `r` the following two; the ratios are
    /// those of the epoch against all earlier epochs (blank for the first).
    pub fn csv(&self, region: u8) -> String {
        let mut out = String::from("epoch,p,q,r,lambda_hat,mu_hat\n");
        let offset = self.order.iter().position(|&u| u == region).unwrap_or(0);
        // Rotate the flat block sequence so that the region's block leads.
        let flat: Vec<usize> = self.epochs.iter().flat_map(|e| [e.p, e.q, e.r]).collect();
        let rows = (flat.len().saturating_sub(offset)) / 3;
        let mut acc = 0usize;
        for n in 0..rows {
            let p = flat[offset + 3 * n];
            let q = flat[offset + 3 * n + 1];
            let r = flat[offset + 3 * n + 2];
            let (lam, mu) = if n == 0 {
                (String::new(), String::new())
            } else {
                (
                    format_f64(p as f64 / acc as f64),
                    format_f64((q + r) as f64 / (acc + p) as f64),
                )
            };
            out.push_str(&format!("{},{p},{q},{r},{lam},{mu}\n", n + 1));
            acc += p + q + r;
        }
        out
    }
}

/// Sojourn-growth certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapCertificate {
    pub passed: bool,
    pub reason: Option<String>,
    pub epochs: usize,
    /// Per region `U_1..U_3`.
    pub lambda_hat: Vec<Option<f64>>,
    pub mu_hat: Vec<Option<f64>>,
    /// `min_n p_{n+1} / Σ_{k≤n} (p_k + q_k + r_k)`.
    pub c_hat: Option<f64>,
    /// `min_n q_{n+1} / (Σ_{k≤n} (p_k + q_k + r_k) + p_{n+1})`.
    pub c_q: Option<f64>,
    /// `min_n r_{n+1} / (Σ_{k≤n} (p_k + q_k + r_k) + p_{n+1} + q_{n+1})`.
    pub c_r: Option<f64>,
    /// Epochs `n ≥ 2` with `p_{n+1} ≤ p_n + q_n` (diagnostic).
    pub slow_growth_epochs: Vec<usize>,
}

/// Step-ratio constants from a list of epochs.
pub fn epoch_ratios(epochs: &[Epoch]) -> (Option<f64>, Option<f64>, Option<f64>) {
    let mut out = (None::<f64>, None::<f64>, None::<f64>);
    let mut acc = 0usize;
    let upd = |slot: &mut Option<f64>, v: f64| *slot = Some(slot.map_or(v, |s| s.min(v)));
    for (n, e) in epochs.iter().enumerate() {
        if n > 0 {
            upd(&mut out.0, e.p as f64 / acc as f64);
            upd(&mut out.1, e.q as f64 / (acc + e.p) as f64);
            upd(&mut out.2, e.r as f64 / (acc + e.p + e.q) as f64);
        }
        acc += e.p + e.q + e.r;
    }
    out
}

pub fn gap_certificate(analysis: &TrappingAnalysis) -> GapCertificate {
    let (c_hat, c_q, c_r) = epoch_ratios(&analysis.epochs);
    let lambda_hat: Vec<Option<f64>> = analysis.records.iter().map(|r| r.lambda_hat).collect();
    let mu_hat: Vec<Option<f64>> = analysis.records.iter().map(|r| r.mu_hat).collect();
    let slow_growth_epochs = analysis
        .epochs
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1].p <= w[0].p + w[0].q)
        .map(|(i, _)| i + 1)
        .filter(|&n| n >= 2)
        .collect();
    let reason = if analysis.degenerate {
        Some("degenerate records: the orbit settles in a single region (trailing block never ends)".to_string())
    } else if !analysis.breaks.is_empty() {
        Some(format!(
            "block sequence leaves the itinerary at state {}",
            analysis.breaks[0]
        ))
    } else if analysis.epochs.len() < MIN_EPOCHS {
        Some(format!(
            "only {} complete epochs (need {MIN_EPOCHS})",
            analysis.epochs.len()
        ))
    } else if lambda_hat.iter().chain(&mu_hat).any(|v| !matches!(v, Some(x) if *x > 0.0)) {
        Some("some region has no positive trapping or escaping ratio".to_string())
    } else if !matches!(c_hat, Some(c) if c > 0.0) {
        Some("no positive sojourn-growth constant".to_string())
    } else {
        None
    };
    GapCertificate {
        passed: reason.is_none(),
        reason,
        epochs: analysis.epochs.len(),
        lambda_hat,
        mu_hat,
        c_hat,
        c_q,
        c_r,
        slow_growth_epochs,
    }
}

/// Running repeated time averages `A^{(s)}_n`, `n = 1..N`, with the full
/// history kept for windowed statistics and export.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeAverageStack {
    pub s_max: usize,
    pub m: usize,
    /// Number of averaged states `N`.
    pub n: usize,
    /// `series[(n - 1) * s_max * m + (s - 1) * m + k]`.
    series: Vec<f64>,
}

impl TimeAverageStack {
    /// `A^{(s)}_n` (1-based `s` and `n`).
    pub fn get(&self, s: usize, n: usize) -> &[f64] {
        let base = (n - 1) * self.s_max * self.m + (s - 1) * self.m;
        &self.series[base..base + self.m]
    }

    /// CSV `n,s,a1,...,am` for every `thinning`-th `n` and the last one.
    pub fn csv(&self, thinning: usize) -> String {
        let thinning = thinning.max(1);
        let mut out = String::from("n,s");
        for k in 1..=self.m {
            out.push_str(&format!(",a{k}"));
        }
        out.push('\n');
        for n in 1..=self.n {
            if n % thinning != 0 && n != 1 && n != self.n {
                continue;
            }
            for s in 1..=self.s_max {
                out.push_str(&format!("{n},{s}"));
                for v in self.get(s, n) {
                    out.push(',');
                    out.push_str(&format_f64(*v));
                }
                out.push('\n');
            }
        }
        out
    }
}

/// Builds the stack from a sequence of states in one pass.
pub fn repeated_averages_of<'a, I>(points: I, m: usize, s_max: usize) -> Result<TimeAverageStack>
where
    I: IntoIterator<Item = &'a [f64]>,
{
    if s_max == 0 {
        return Err(Error::param("s_max must be >= 1"));
    }
    let mut sums = vec![0.0f64; s_max * m];
    let mut series = Vec::new();
    let mut n = 0usize;
    for x in points {
        if x.len() != m {
            return Err(Error::Dimension {
                expected: m,
                got: x.len(),
            });
        }
        n += 1;
        let inv = 1.0 / n as f64;
        let mut prev: Vec<f64> = x.to_vec();
        for s in 0..s_max {
            let row = &mut sums[s * m..(s + 1) * m];
            let mut avg = vec![0.0; m];
            for k in 0..m {
                row[k] += prev[k];
                avg[k] = row[k] * inv;
            }
            series.extend_from_slice(&avg);
            prev = avg;
        }
    }
    Ok(TimeAverageStack {
        s_max,
        m,
        n,
        series,
    })
}

pub fn repeated_averages(trace: &OrbitTrace, s_max: usize) -> Result<TimeAverageStack> {
    repeated_averages_of((0..trace.len()).map(|n| trace.point(n)), trace.m, s_max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceThresholds {
    /// Minimum first-order oscillation per coordinate for "historic".
    pub theta: f64,
    /// Maximum first-order oscillation for "convergent".
    pub theta_conv: f64,
    /// Minimum oscillation per coordinate of orders `s ≥ 2` for "historic".
    pub theta_higher: f64,
}

impl Default for DivergenceThresholds {
    fn default() -> Self {
        DivergenceThresholds {
            theta: 0.1,
            theta_conv: 1e-6,
            theta_higher: 0.02,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Historic,
    Convergent,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DivergenceReport {
    pub n: usize,
    pub window_fraction: f64,
    pub window_start: usize,
    pub thresholds: DivergenceThresholds,
    /// `osc[s-1][k]`.
    pub osc: Vec<Vec<f64>>,
    pub verdict: Verdict,
}

/// Oscillation `max - min` of each coordinate of each order over the
/// trailing window `n ∈ [⌈(1-w)N⌉, N]`.
pub fn divergence_report(
    stack: &TimeAverageStack,
    window_fraction: f64,
    thresholds: DivergenceThresholds,
) -> Result<DivergenceReport> {
    if !(window_fraction > 0.0 && window_fraction < 1.0) {
        return Err(Error::param("window_fraction must lie in (0, 1)"));
    }
    if stack.n < 1000 {
        return Err(Error::Precondition(format!(
            "divergence report needs at least 1000 averaged states, got {}",
            stack.n
        )));
    }
    let start = (((1.0 - window_fraction) * stack.n as f64).ceil() as usize).max(1);
    let mut osc = Vec::with_capacity(stack.s_max);
    for s in 1..=stack.s_max {
        let mut lo = vec![f64::INFINITY; stack.m];
        let mut hi = vec![f64::NEG_INFINITY; stack.m];
        for n in start..=stack.n {
            for (k, &v) in stack.get(s, n).iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        osc.push(hi.iter().zip(&lo).map(|(h, l)| h - l).collect::<Vec<f64>>());
    }
    let historic = osc[0].iter().all(|&o| o >= thresholds.theta)
        && osc[1..]
            .iter()
            .all(|row| row.iter().all(|&o| o >= thresholds.theta_higher));
    let convergent = osc[0].iter().all(|&o| o <= thresholds.theta_conv);
    let verdict = if historic {
        Verdict::Historic
    } else if convergent {
        Verdict::Convergent
    } else {
        Verdict::Undetermined
    };
    Ok(DivergenceReport {
        n: stack.n,
        window_fraction,
        window_start: start,
        thresholds,
        osc,
        verdict,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionTransition {
    pub step: usize,
    pub from: usize,
    pub to: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItineraryCertificate {
    pub passed: bool,
    pub reason: Option<String>,
    pub kind: DynamicsKind,
    pub delta0: f64,
    /// First state after the transient, if reached.
    pub transient_end: Option<usize>,
    pub transitions_checked: usize,
    pub region_changes: usize,
    pub violation_count: usize,
    pub violations: Vec<RegionTransition>,
    /// States after the transient that lie in `U_0`.
    pub u0_reentries: usize,
}

/// Checks that after the transient every region change follows the
/// itinerary of `kind`. The transient lasts until the orbit is outside
/// `U_0` and its smallest coordinate is below `δ_0`.
pub fn itinerary_certificate(
    trace: &OrbitTrace,
    kind: DynamicsKind,
    partition: &RegionPartition,
) -> Result<ItineraryCertificate> {
    let labels = u_labels(trace, partition)?;
    let eps_log2 = partition.delta0.log2();
    let transient_end =
        (0..trace.len()).find(|&n| labels[n] != 0 && trace.min_log2(n) < eps_log2);
    let mut cert = ItineraryCertificate {
        passed: false,
        reason: None,
        kind,
        delta0: partition.delta0,
        transient_end,
        transitions_checked: 0,
        region_changes: 0,
        violation_count: 0,
        violations: Vec::new(),
        u0_reentries: 0,
    };
    if trace.len() < 1000 {
        cert.reason = Some(format!("orbit has {} states; at least 1000 are needed", trace.len()));
        return Ok(cert);
    }
    let Some(t0) = transient_end else {
        cert.reason = Some("the orbit never reaches the boundary layer".into());
        return Ok(cert);
    };
    for n in t0..trace.len() - 1 {
        let (a, b) = (trace.regions[n] as usize, trace.regions[n + 1] as usize);
        cert.transitions_checked += 1;
        if labels[n + 1] == 0 {
            cert.u0_reentries += 1;
        }
        if a == b {
            continue;
        }
        cert.region_changes += 1;
        if b != region_successor(kind, a) {
            cert.violation_count += 1;
            if cert.violations.len() < MAX_LISTED {
                cert.violations.push(RegionTransition {
                    step: n,
                    from: a,
                    to: b,
                });
            }
        }
    }
    cert.passed = cert.violation_count == 0;
    if !cert.passed {
        cert.reason = Some(format!("{} off-itinerary transitions", cert.violation_count));
    }
    Ok(cert)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct XiDescent {
    pub passed: bool,
    pub steps_checked: usize,
    /// Largest increase of `log2 ξ` over one step.
    pub max_increase_log2: f64,
    pub first_violation: Option<usize>,
}

/// Checks `log2 ξ(x_{n+1}) ≤ log2 ξ(x_n) + slack` along a trace.
pub fn xi_descent(trace: &OrbitTrace, slack_log2: f64) -> Result<XiDescent> {
    if trace.m != 3 {
        return Err(Error::Dimension {
            expected: 3,
            got: trace.m,
        });
    }
    let lx = |n: usize| trace.log2_point(n).iter().sum::<f64>();
    let mut out = XiDescent {
        passed: true,
        steps_checked: 0,
        max_increase_log2: f64::NEG_INFINITY,
        first_violation: None,
    };
    let mut prev = lx(0);
    for n in 1..trace.len() {
        let cur = lx(n);
        let inc = if cur == f64::NEG_INFINITY && prev == f64::NEG_INFINITY {
            0.0
        } else {
            cur - prev
        };
        out.max_increase_log2 = out.max_increase_log2.max(inc);
        if inc > slack_log2 && out.first_violation.is_none() {
            out.first_violation = Some(n - 1);
            out.passed = false;
        }
        out.steps_checked += 1;
        prev = cur;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fitness::FitnessMap;

    #[test]
    fn xi_examples() {
        let c = SimplexPoint::<f64>::from_f64(&[1.0 / 3.0; 3], 53).unwrap();
        assert!((xi(&c).unwrap() - 1.0 / 27.0).abs() < 1e-17);
        let e = SimplexPoint::<f64>::vertex(1, 3, 53).unwrap();
        assert_eq!(xi(&e).unwrap(), 0.0);
        let x = SimplexPoint::<f64>::from_f64(&[0.5, 0.3, 0.2], 53).unwrap();
        assert!((xi(&x).unwrap() - 0.03).abs() < 1e-17);
        let four = SimplexPoint::<f64>::from_f64(&[0.25; 4], 53).unwrap();
        assert!(xi(&four).is_err());
    }

    #[test]
    fn zeta_examples() {
        let s = ReplicatorSystem::new(FitnessMap::identity(3).unwrap(), DynamicsKind::ZeroSumV1).unwrap();
        let c = SimplexPoint::<f64>::from_f64(&[1.0 / 3.0; 3], 53).unwrap();
        assert!((zeta(&s, &c).unwrap() - 1.0).abs() < 1e-15);
        let x = SimplexPoint::<f64>::from_f64(&[0.5, 0.3, 0.2], 53).unwrap();
        assert!((zeta(&s, &x).unwrap() - 1.11 * 0.81 * 1.01).abs() < 1e-15);
        let st = ReplicatorSystem::new(FitnessMap::identity(3).unwrap(), DynamicsKind::Stable).unwrap();
        assert!(matches!(zeta(&st, &x), Err(Error::Unsupported(_))));
    }

    #[test]
    fn region_examples() {
        assert_eq!(region_of(&[0.5, 0.3, 0.2], 0.0), 1);
        assert_eq!(region_of(&[0.2, 0.5, 0.3], 0.0), 5);
        assert_eq!(region_of(&[1.0 / 3.0; 3], 0.0), 1);
        assert_eq!(region_of(&[0.2, 0.3, 0.5], 0.0), 4);
        assert_eq!(region_of(&[0.3, 0.2, 0.5], 0.0), 3);
        assert_eq!(region_of(&[0.3, 0.5, 0.2], 0.0), 6);
        assert_eq!(region_of(&[0.5, 0.2, 0.3], 0.0), 2);
        // near-tie resolved to the lower index
        assert_eq!(region_of(&[0.5, 0.25, 0.25 + 1e-14], 1e-12), 1);
    }

    #[test]
    fn successors() {
        let v1: Vec<usize> = (1..=6).map(|g| region_successor(DynamicsKind::ZeroSumV1, g)).collect();
        assert_eq!(v1, vec![2, 3, 4, 5, 6, 1]);
        let v2: Vec<usize> = (1..=6).map(|g| region_successor(DynamicsKind::ZeroSumV2, g)).collect();
        assert_eq!(v2, vec![6, 1, 2, 3, 4, 5]);
        assert_eq!(u_successor(DynamicsKind::ZeroSumV1, 1), 2);
        assert_eq!(u_successor(DynamicsKind::ZeroSumV1, 3), 1);
        assert_eq!(u_successor(DynamicsKind::ZeroSumV2, 1), 3);
        assert_eq!(u_successor(DynamicsKind::ZeroSumV2, 2), 1);
    }

    #[test]
    fn u_membership_examples() {
        let p = RegionPartition::new(0.1).unwrap();
        let c = SimplexPoint::<f64>::from_f64(&[1.0 / 3.0; 3], 53).unwrap();
        assert_eq!(u_membership(&c, &p).unwrap(), 0);
        let x = SimplexPoint::<f64>::from_f64(&[0.5, 0.3, 0.2], 53).unwrap();
        assert_eq!(u_membership(&x, &p).unwrap(), 1);
        let y = SimplexPoint::<f64>::from_f64(&[0.2, 0.3, 0.5], 53).unwrap();
        assert_eq!(u_membership(&y, &p).unwrap(), 2);
        assert!(RegionPartition::new(0.0).is_err());
    }

    #[test]
    fn synthetic_indicator_runs() {
        let ind: Vec<bool> = [1, 1, 0, 0, 0, 1, 1, 1, 1, 1].iter().map(|&v| v == 1).collect();
        let r = TrappingRecord::from_indicator(1, &ind);
        assert_eq!(r.runs.len(), 2);
        assert_eq!((r.runs[0].p, r.runs[0].q), (2, 3));
        assert!(r.runs[0].p_complete && r.runs[0].q_complete);
        assert_eq!(r.runs[1].p, 5);
        assert!(!r.runs[1].p_complete);
        assert_eq!(r.total(), ind.len());
        assert_eq!(r.lambda_hat, None);
    }

    #[test]
    fn constant_indicator_is_degenerate() {
        let r = TrappingRecord::from_indicator(1, &[true; 50]);
        assert!(r.degenerate);
        assert_eq!(r.lambda_hat, None);
    }

    #[test]
    fn geometric_epochs_give_closed_form_constant() {
        let epochs: Vec<Epoch> = (1..=8)
            .map(|n| Epoch {
                p: 1 << n,
                q: 1 << n,
                r: 1 << n,
            })
            .collect();
        let a = TrappingAnalysis::from_epochs(&epochs, DynamicsKind::ZeroSumV1).unwrap();
        assert_eq!(a.epochs, epochs);
        let cert = gap_certificate(&a);
        assert!(cert.passed, "{cert:?}");
        // min over n of 2^{n+1} / (3 (2^{n+1} - 2)) is attained at the last n = 7
        let expect = 256.0 / (3.0 * 254.0);
        assert!((cert.c_hat.unwrap() - expect).abs() < 1e-15);
        assert!(cert.c_hat.unwrap() > 1.0 / 3.0);
    }

    #[test]
    fn trapping_csv_rotates_regions() {
        let epochs: Vec<Epoch> = (1..=4).map(|n| Epoch { p: n, q: 10 * n, r: 100 * n }).collect();
        let a = TrappingAnalysis::from_epochs(&epochs, DynamicsKind::ZeroSumV1).unwrap();
        let csv = a.csv(2);
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("epoch,p,q,r,lambda_hat,mu_hat"));
        assert_eq!(lines.next(), Some("1,10,100,2,,"));
        assert_eq!(lines.next().unwrap().split(',').take(4).collect::<Vec<_>>(), ["2", "20", "200", "3"]);
    }

    #[test]
    fn averages_of_constant_and_alternating_orbits() {
        let p = vec![0.2, 0.3, 0.5];
        let pts: Vec<Vec<f64>> = vec![p.clone(); 20];
        let st = repeated_averages_of(pts.iter().map(|v| v.as_slice()), 3, 3).unwrap();
        for s in 1..=3 {
            for n in 1..=20 {
                let a = st.get(s, n);
                for k in 0..3 {
                    assert!((a[k] - p[k]).abs() < 1e-15);
                }
            }
        }
        let alt: Vec<Vec<f64>> = (0..40)
            .map(|i| if i % 2 == 0 { vec![1.0, 0.0, 0.0] } else { vec![0.0, 1.0, 0.0] })
            .collect();
        let st = repeated_averages_of(alt.iter().map(|v| v.as_slice()), 3, 2).unwrap();
        for n in (2..=40).step_by(2) {
            assert_eq!(st.get(1, n), &[0.5, 0.5, 0.0]);
        }
    }

    #[test]
    fn constant_orbit_has_zero_oscillation() {
        let pts: Vec<Vec<f64>> = vec![vec![0.2, 0.3, 0.5]; 2000];
        let st = repeated_averages_of(pts.iter().map(|v| v.as_slice()), 3, 3).unwrap();
        let r = divergence_report(&st, 0.5, DivergenceThresholds::default()).unwrap();
        assert!(r.osc.iter().flatten().all(|&o| o.abs() < 1e-14));
        assert_eq!(r.verdict, Verdict::Convergent);
        let short = repeated_averages_of(pts[..10].iter().map(|v| v.as_slice()), 3, 1).unwrap();
        assert!(divergence_report(&short, 0.5, DivergenceThresholds::default()).is_err());
    }

    #[test]
    fn shuffled_states_break_itinerary() {
        use rand::seq::SliceRandom;
        // a synthetic boundary-hugging cycle visiting G1..G6 in order
        let mut pts = Vec::new();
        for i in 0..1200 {
            let g = (i / 20) % 6;
            let v = match g {
                0 => [0.9, 0.07, 0.03],
                1 => [0.9, 0.03, 0.07],
                2 => [0.07, 0.03, 0.9],
                3 => [0.03, 0.07, 0.9],
                4 => [0.03, 0.9, 0.07],
                _ => [0.07, 0.9, 0.03],
            };
            pts.push(v.to_vec());
        }
        let p = RegionPartition::default();
        let t = OrbitTrace::from_points(&pts).unwrap();
        let c = itinerary_certificate(&t, DynamicsKind::ZeroSumV1, &p).unwrap();
        assert!(c.passed, "{c:?}");
        assert!(c.region_changes > 50);
        let v2 = itinerary_certificate(&t, DynamicsKind::ZeroSumV2, &p).unwrap();
        assert!(!v2.passed);
        let mut rng = crate::fitness::sampling::rng(4);
        pts.shuffle(&mut rng);
        let t = OrbitTrace::from_points(&pts).unwrap();
        let c = itinerary_certificate(&t, DynamicsKind::ZeroSumV1, &p).unwrap();
        assert!(!c.passed && c.violation_count > 0);
    }
}
