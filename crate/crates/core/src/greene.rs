//! Residue criterion along continued-fraction convergents.
//!
//! For each convergent `p_n/q_n` of the target rotation number the minimizing
//! periodic orbit is located, its monodromy trace turned into a residue and a
//! mean residue, and the tail of the mean-residue sequence is compared with 1.
//! A tail maximum above `1 + margin` rules out an invariant curve with that
//! rotation number; a tail entirely below `1 - margin` is reported as
//! consistent with a curve, which is the heuristic (unproved) direction.

use serde::{Deserialize, Serialize};

use crate::action::{default_restarts, minimize_periodic_seeded};
use crate::error::{Error, Result};
use crate::map::GeneratingFunction;
use crate::par;
use crate::spectral::{monodromy_trace, residue_scaled, ResidueRecord};

/// How the target rotation number is specified.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetSpec {
    /// `[0; 1, 1, 1, ...]`, the inverse golden mean.
    Golden,
    /// Explicit partial quotients `[a0; a1, a2, ...]`.
    Coefficients(Vec<u64>),
    /// A float expanded by the Euclidean algorithm.
    Omega(f64),
}

impl TargetSpec {
    /// Parses `golden`, a comma-separated coefficient list, or a number.
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("golden") {
            return Ok(TargetSpec::Golden);
        }
        if s.contains(',') || s.starts_with('[') {
            let body = s.trim_start_matches('[').trim_end_matches(']').replace(';', ",");
            let coeffs = body
                .split(',')
                .filter(|t| !t.trim().is_empty())
                .map(|t| t.trim().parse::<u64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::InvalidInput(format!("bad continued fraction '{s}': {e}")))?;
            return Ok(TargetSpec::Coefficients(coeffs));
        }
        s.parse::<f64>()
            .map(TargetSpec::Omega)
            .map_err(|_| Error::InvalidInput(format!("bad rotation target '{s}'")))
    }

    /// First `n` convergents of the target.
    pub fn resolve(&self, n: usize) -> Result<RotationTarget> {
        match self {
            TargetSpec::Golden => {
                let coeffs: Vec<u64> = std::iter::once(0).chain(std::iter::repeat_n(1, n)).collect();
                let mut t = convergents(&coeffs, n)?;
                t.omega = (5f64.sqrt() - 1.0) / 2.0;
                Ok(t)
            }
            TargetSpec::Coefficients(c) => convergents(c, n),
            TargetSpec::Omega(w) => convergents_from_omega(*w, n),
        }
    }
}

/// Irrational target with its leading convergents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotationTarget {
    pub omega: f64,
    pub cf_coeffs: Vec<u64>,
    pub convergents: Vec<(i64, usize)>,
}

fn cf_value(coeffs: &[u64]) -> f64 {
    coeffs.iter().rev().fold(None, |acc: Option<f64>, &a| {
        Some(match acc {
            None => a as f64,
            Some(0.0) => a as f64,
            Some(v) => a as f64 + 1.0 / v,
        })
    })
    .unwrap_or(f64::NAN)
}

/// Convergents from partial quotients via
/// `p_n = a_n p_{n-1} + p_{n-2}`, `q_n = a_n q_{n-1} + q_{n-2}`.
///
/// The `n` convergents include `a0/1`. Fewer than `n` coefficients means the
/// target is rational at that depth.
pub fn convergents(coeffs: &[u64], n: usize) -> Result<RotationTarget> {
    if coeffs.len() < n {
        return Err(Error::RationalTarget { requested: n, available: coeffs.len() });
    }
    if coeffs.iter().skip(1).take(n.saturating_sub(1)).any(|&a| a == 0) {
        return Err(Error::InvalidInput("partial quotients after a0 must be positive".into()));
    }
    let used = &coeffs[..n];
    let (mut p_prev, mut q_prev) = (1i64, 0i64);
    let (mut p2, mut q2) = (0i64, 1i64);
    let mut out = Vec::with_capacity(n);
    for &a in used {
        let a = a as i64;
        let p = a * p_prev + p2;
        let q = a * q_prev + q2;
        out.push((p, q as usize));
        p2 = p_prev;
        q2 = q_prev;
        p_prev = p;
        q_prev = q;
    }
    Ok(RotationTarget { omega: cf_value(coeffs), cf_coeffs: used.to_vec(), convergents: out })
}

/// Convergents of a float by the Euclidean algorithm.
///
/// Fails with `RationalTarget` when the float is within 1e-12 of one of its
/// first `n - 1` convergents, since the expansion is then exhausted.
pub fn convergents_from_omega(omega: f64, n: usize) -> Result<RotationTarget> {
    if !omega.is_finite() {
        return Err(Error::InvalidInput(format!("rotation number {omega} is not finite")));
    }
    let mut coeffs = Vec::with_capacity(n);
    let mut x = omega;
    let (mut p_prev, mut q_prev) = (1i64, 0i64);
    let (mut p2, mut q2) = (0i64, 1i64);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let a = x.floor();
        coeffs.push(a as u64);
        let p = a as i64 * p_prev + p2;
        let q = a as i64 * q_prev + q2;
        out.push((p, q as usize));
        p2 = p_prev;
        q2 = q_prev;
        p_prev = p;
        q_prev = q;
        let frac = x - a;
        let close = (omega - p as f64 / q as f64).abs() < 1e-12;
        if i + 1 < n && (frac == 0.0 || close) {
            return Err(Error::RationalTarget { requested: n, available: i + 1 });
        }
        x = 1.0 / frac;
    }
    Ok(RotationTarget { omega, cf_coeffs: coeffs, convergents: out })
}

/// Outcome of the tail test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    NoInvariantCurve,
    ConsistentWithCurve,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreeneConfig {
    pub sigma: f64,
    pub margin: f64,
    pub tail_window: usize,
    /// Restarts per convergent; `None` uses `max(8, q)`.
    pub restarts: Option<usize>,
    /// Fractional offset of the restart phases.
    pub phase_offset: f64,
    /// Convergents with larger denominators are skipped.
    pub max_q: usize,
}

impl Default for GreeneConfig {
    fn default() -> Self {
        Self { sigma: 1.01, margin: 0.05, tail_window: 3, restarts: None, phase_offset: 0.0, max_q: 233 }
    }
}

/// Per-convergent residues and the resulting verdict.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreeneReport {
    pub map: String,
    pub k: Option<f64>,
    pub omega: f64,
    pub omega_cf: Vec<u64>,
    pub sigma: f64,
    pub margin: f64,
    pub tail_window: usize,
    pub records: Vec<ResidueRecord>,
    pub failed: Vec<usize>,
    pub verdict: Verdict,
    pub verdict_basis: String,
}

impl GreeneReport {
    /// The last `tail_window` records entering the tail test.
    pub fn tail(&self) -> &[ResidueRecord] {
        let n = self.records.len();
        &self.records[n.saturating_sub(self.tail_window)..]
    }
}

/// Tail test over mean residues.
pub fn decide(records: &[ResidueRecord], tail_window: usize, margin: f64) -> (Verdict, String) {
    let approx = "approximants: continued-fraction convergents";
    if records.len() < tail_window || tail_window == 0 {
        return (
            Verdict::Inconclusive,
            format!("only {} usable records for a tail window of {tail_window}; {approx}", records.len()),
        );
    }
    let tail = &records[records.len() - tail_window..];
    let max = tail.iter().map(|r| r.mean_residue).fold(f64::NEG_INFINITY, f64::max);
    let qs: Vec<String> = tail.iter().map(|r| r.q.to_string()).collect();
    let qs = qs.join(",");
    if max > 1.0 + margin {
        (
            Verdict::NoInvariantCurve,
            format!("max mean residue {max:.6} over q in {{{qs}}} exceeds 1 + {margin}: no invariant curve (theorem); {approx}"),
        )
    } else if tail.iter().all(|r| r.mean_residue < 1.0 - margin) {
        (
            Verdict::ConsistentWithCurve,
            format!(
                "all mean residues over q in {{{qs}}} below 1 - {margin} (max {max:.6}): heuristic (conjectured direction, not a theorem); {approx}"
            ),
        )
    } else {
        (
            Verdict::Inconclusive,
            format!("mean residues over q in {{{qs}}} straddle the dead band 1 +/- {margin} (max {max:.6}); {approx}"),
        )
    }
}

/// Residue record of the minimizing `(p, q)` orbit.
pub fn residue_of_minimizer<G: GeneratingFunction + ?Sized>(
    gf: &G,
    p: i64,
    q: usize,
    restarts: usize,
    phase_offset: f64,
) -> Result<ResidueRecord> {
    let (c, _) = minimize_periodic_seeded(gf, p, q, restarts, phase_offset, &[])?;
    let t = monodromy_trace(gf, &c)?;
    Ok(residue_scaled(t, p, q))
}

/// Scans the convergents of `target` (up to `cfg.max_q`) and applies the
/// tail test. Convergents are processed independently; records keep
/// convergent order. Convergents whose minimization fails are listed in
/// `failed` and left out of the tail.
pub fn greene_scan<G: GeneratingFunction + ?Sized>(
    gf: &G,
    target: &RotationTarget,
    cfg: &GreeneConfig,
) -> Result<GreeneReport> {
    if !(cfg.sigma > 1.0) {
        return Err(Error::InvalidInput(format!("sigma must exceed 1, got {}", cfg.sigma)));
    }
    if !(cfg.margin >= 0.0) {
        return Err(Error::InvalidInput(format!("margin must be nonnegative, got {}", cfg.margin)));
    }
    let jobs: Vec<(i64, usize)> = target.convergents.iter().copied().filter(|&(_, q)| q <= cfg.max_q).collect();
    let nontrivial = jobs.iter().filter(|&&(_, q)| q >= 2).count();
    if nontrivial < cfg.tail_window {
        return Err(Error::InvalidInput(format!(
            "need at least {} convergents with q >= 2, have {nontrivial}",
            cfg.tail_window
        )));
    }
    let results = par::map(&jobs, |&(p, q)| {
        let restarts = cfg.restarts.unwrap_or_else(|| default_restarts(q));
        residue_of_minimizer(gf, p, q, restarts, cfg.phase_offset)
    });
    let mut records = Vec::new();
    let mut failed = Vec::new();
    for ((_, q), res) in jobs.iter().zip(results) {
        match res {
            Ok(r) => records.push(r),
            Err(Error::NoConvergence { .. }) | Err(Error::NotCritical { .. }) => failed.push(*q),
            Err(e) => return Err(e),
        }
    }
    let (verdict, mut verdict_basis) = decide(&records, cfg.tail_window, cfg.margin);
    if !failed.is_empty() {
        verdict_basis.push_str(&format!("; failed convergents excluded: q in {failed:?}"));
    }
    Ok(GreeneReport {
        map: gf.label(),
        k: gf.parameter(),
        omega: target.omega,
        omega_cf: target.cf_coeffs.clone(),
        sigma: cfg.sigma,
        margin: cfg.margin,
        tail_window: cfg.tail_window,
        records,
        failed,
        verdict,
        verdict_basis,
    })
}

/// Checks `lambda + 1/lambda >= 4 sigma^q + 2` (relative slack 1e-6 sigma^q)
/// for every record whose mean residue reaches `sigma`.
pub fn eigenvalue_bound_check(report: &GreeneReport, sigma: f64) -> bool {
    report.records.iter().filter(|r| r.mean_residue >= sigma).all(|r| {
        let Some(lambda) = r.lambda_max else { return false };
        let q = r.q as f64;
        let lhs = lambda + 1.0 / lambda;
        let rhs = (4.0 - 1e-6) * sigma.powf(q) + 2.0;
        if lhs.is_finite() && rhs.is_finite() {
            lhs >= rhs
        } else {
            let ln_rhs = (4.0f64 - 1e-6).ln() + q * sigma.ln();
            let ln_lhs = if lhs.is_finite() { lhs.ln() } else { r.ln_abs_trace };
            ln_lhs >= ln_rhs
        }
    })
}
