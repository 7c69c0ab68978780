//! Periodic discrete action and its minimizers.
//!
//! A `(p, q)` configuration stores `q` lifted angles with the closure
//! `theta_{j+q} = theta_j + p`. Critical points of
//! `W = sum_j S(theta_j, theta_{j+1})` are periodic orbits; ground states
//! (global minimizers) are the Aubry-Mather periodic orbits.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{reduce_angle, GeneratingFunction, LiftPoint};
use crate::par;

/// Gradient sup-norm accepted as a critical point.
pub const GRADIENT_TOL: f64 = 1e-10;
/// Smallest Hessian eigenvalue accepted for a minimizer (zero modes allowed).
pub const HESSIAN_TOL: f64 = -1e-8;
const MAX_NEWTON_STEPS: usize = 500;

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Periodic configuration of rotation number `p/q`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Configuration {
    pub p: i64,
    pub q: usize,
    pub thetas: Vec<f64>,
}

impl Configuration {
    pub fn new(p: i64, q: usize, thetas: Vec<f64>) -> Result<Self> {
        check_rotation(p, q)?;
        if thetas.len() != q {
            return Err(Error::InvalidInput(format!("expected {q} angles, got {}", thetas.len())));
        }
        Ok(Self { p, q, thetas })
    }

    /// Rigid rotation `theta_j = phase + j p / q`.
    pub fn rigid(p: i64, q: usize, phase: f64) -> Result<Self> {
        check_rotation(p, q)?;
        let thetas = (0..q).map(|j| phase + (j as f64) * p as f64 / q as f64).collect();
        Ok(Self { p, q, thetas })
    }

    /// Angle at any index, using the closure relation.
    pub fn theta(&self, j: i64) -> f64 {
        let q = self.q as i64;
        let wraps = j.div_euclid(q);
        self.thetas[j.rem_euclid(q) as usize] + (wraps * self.p) as f64
    }

    /// Re-indexes the orbit so that `theta_0 mod 1` is the smallest angle and
    /// `theta_0` lies in the fundamental domain. Angles within 1e-12 below an
    /// integer count as that integer.
    pub fn canonical(&self) -> Configuration {
        const SNAP: f64 = 1e-12;
        let key = |t: f64| reduce_angle(t + SNAP);
        let start = (0..self.q)
            .min_by(|&a, &b| key(self.thetas[a]).total_cmp(&key(self.thetas[b])))
            .unwrap_or(0);
        let shift = (self.thetas[start] + SNAP).floor();
        let thetas = (0..self.q)
            .map(|j| self.theta((start + j) as i64) - shift)
            .collect();
        Configuration { p: self.p, q: self.q, thetas }
    }

    /// Whether the angles mod 1 visit the circle in the cyclic order of the
    /// rigid rotation by `p/q`. Coincident angles (within 1e-12) are allowed,
    /// since strongly hyperbolic minimizers cluster to round-off.
    pub fn is_monotone_ordered(&self) -> bool {
        let q = self.q as i64;
        if q <= 2 {
            return true;
        }
        // s = p^{-1} mod q steps to the circle-order successor; on the rigid
        // rotation theta_{j+s} = theta_j + m + 1/q with s p = 1 + m q
        let pm = self.p.rem_euclid(q);
        let Some(s) = (1..q).find(|&s| (s * pm) % q == 1) else {
            return false;
        };
        let m = ((s as i128 * self.p as i128 - 1) / q as i128) as f64;
        (0..q).all(|j| self.theta(j + s) - self.theta(j) - m >= -1e-12)
    }

    /// Same orbit seen in the lift with rotation `(p + q)/q`.
    pub fn lift_shift(&self) -> Configuration {
        Configuration {
            p: self.p + self.q as i64,
            q: self.q,
            thetas: self.thetas.iter().enumerate().map(|(j, t)| t + j as f64).collect(),
        }
    }
}

fn check_rotation(p: i64, q: usize) -> Result<()> {
    if q == 0 {
        return Err(Error::InvalidInput("q must be at least 1".into()));
    }
    if gcd(p.unsigned_abs(), q as u64) != 1 {
        return Err(Error::InvalidInput("p,q not coprime".into()));
    }
    Ok(())
}

/// Diagnostics of a minimization run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActionReport {
    pub value: f64,
    pub gradient_inf_norm: f64,
    pub hessian_min_eig: f64,
    pub restarts_used: usize,
}

/// `sum_{j<q} S(theta_j, theta_{j+1})` with `theta_q = theta_0 + p`.
pub fn action<G: GeneratingFunction + ?Sized>(gf: &G, c: &Configuration) -> f64 {
    (0..c.q as i64).map(|j| gf.s(c.theta(j), c.theta(j + 1))).sum()
}

/// Component `j` is `S2(theta_{j-1}, theta_j) + S1(theta_j, theta_{j+1})`.
pub fn action_gradient<G: GeneratingFunction + ?Sized>(gf: &G, c: &Configuration) -> Vec<f64> {
    (0..c.q as i64)
        .map(|j| {
            let (prev, cur, next) = (c.theta(j - 1), c.theta(j), c.theta(j + 1));
            gf.s2(prev, cur) + gf.s1(cur, next)
        })
        .collect()
}

/// Second variation of the periodic action.
pub fn action_hessian<G: GeneratingFunction + ?Sized>(gf: &G, c: &Configuration) -> PeriodicTridiagonal {
    let q = c.q as i64;
    let diag = (0..q)
        .map(|j| {
            let (prev, cur, next) = (c.theta(j - 1), c.theta(j), c.theta(j + 1));
            gf.s22(prev, cur) + gf.s11(cur, next)
        })
        .collect();
    let off = (0..q).map(|j| gf.s12(c.theta(j), c.theta(j + 1))).collect();
    PeriodicTridiagonal { diag, off }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Symmetric periodic tridiagonal matrix.
///
/// `off[j]` couples index `j` with `j + 1 mod q`. For `q = 1` both couplings
/// fold onto the single entry and for `q = 2` the two couplings add up; the
/// matrix products and dense form account for that.
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodicTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl PeriodicTridiagonal {
    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|j| {
                let next = (j + 1) % n;
                let prev = (j + n - 1) % n;
                self.diag[j] * v[j] + self.off[j] * v[next] + self.off[prev] * v[prev]
            })
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut m = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.diag.clone()));
        for j in 0..n {
            let k = (j + 1) % n;
            m[(j, k)] += self.off[j];
            m[(k, j)] += self.off[j];
        }
        // q = 1: the loop added 2 off[0] twice over
        if n == 1 {
            m[(0, 0)] = self.diag[0] + 2.0 * self.off[0];
        }
        m
    }

    pub fn shifted(&self, mu: f64) -> PeriodicTridiagonal {
        PeriodicTridiagonal { diag: self.diag.iter().map(|d| d + mu).collect(), off: self.off.clone() }
    }

    /// Solves `H x = rhs`. Cyclic Thomas with a Sherman-Morrison correction
    /// for `q >= 3`, direct formulas below that.
    pub fn solve(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        match n {
            0 => Some(vec![]),
            1 => {
                let h = self.diag[0] + 2.0 * self.off[0];
                (h != 0.0).then(|| vec![rhs[0] / h])
            }
            2 => {
                let e = self.off[0] + self.off[1];
                let det = self.diag[0] * self.diag[1] - e * e;
                (det != 0.0).then(|| {
                    vec![
                        (self.diag[1] * rhs[0] - e * rhs[1]) / det,
                        (self.diag[0] * rhs[1] - e * rhs[0]) / det,
                    ]
                })
            }
            _ => self.solve_cyclic(rhs),
        }
    }

    fn solve_cyclic(&self, rhs: &[f64]) -> Option<Vec<f64>> {
        let n = self.len();
        let corner = self.off[n - 1];
        let gamma = -self.diag[0];
        let mut main = self.diag.clone();
        main[0] -= gamma;
        main[n - 1] -= corner * corner / gamma;
        let x = thomas(&self.off[..n - 1], &main, rhs)?;
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = corner;
        let z = thomas(&self.off[..n - 1], &main, &u)?;
        let fact = (x[0] + corner * x[n - 1] / gamma) / (1.0 + z[0] + corner * z[n - 1] / gamma);
        if !fact.is_finite() {
            return None;
        }
        Some(x.iter().zip(&z).map(|(a, b)| a - fact * b).collect())
    }

    /// Number of eigenvalues strictly below `tau`, from the signs of the
    /// LDL^T pivots of `H - tau I` (Sylvester inertia). The corner coupling
    /// produces fill only in the last column, so this is O(q).
    pub fn count_below(&self, tau: f64) -> usize {
        let n = self.len();
        match n {
            0 => 0,
            1 | 2 => self.small_eigenvalues().iter().filter(|&&l| l < tau).count(),
            _ => {
                let piv = |d: f64| if d == 0.0 { -1e-300 } else { d };
                let mut count = 0;
                let mut d = self.diag[0] - tau;
                let mut to_next = self.off[0];
                let mut to_last = self.off[n - 1];
                let mut last = self.diag[n - 1] - tau;
                for j in 0..n - 1 {
                    let dj = piv(d);
                    if dj < 0.0 {
                        count += 1;
                    }
                    if j == n - 2 {
                        let g = to_next + to_last;
                        last -= g * g / dj;
                        break;
                    }
                    let next_d = self.diag[j + 1] - tau - to_next * to_next / dj;
                    let fill = -to_next * to_last / dj;
                    last -= to_last * to_last / dj;
                    d = next_d;
                    to_next = self.off[j + 1];
                    to_last = fill;
                }
                if piv(last) < 0.0 {
                    count += 1;
                }
                count
            }
        }
    }

    fn small_eigenvalues(&self) -> Vec<f64> {
        match self.len() {
            1 => vec![self.diag[0] + 2.0 * self.off[0]],
            2 => {
                let e = self.off[0] + self.off[1];
                let (a, b) = (self.diag[0], self.diag[1]);
                let mean = 0.5 * (a + b);
                let rad = (0.25 * (a - b) * (a - b) + e * e).sqrt();
                vec![mean - rad, mean + rad]
            }
            _ => unreachable!(),
        }
    }

    /// Gershgorin interval containing the spectrum.
    pub fn spectrum_bounds(&self) -> (f64, f64) {
        let n = self.len();
        if n <= 2 {
            let ev = self.small_eigenvalues();
            return (ev[0], *ev.last().unwrap());
        }
        (0..n).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), j| {
            let rad = self.off[j].abs() + self.off[(j + n - 1) % n].abs();
            (lo.min(self.diag[j] - rad), hi.max(self.diag[j] + rad))
        })
    }

    /// Smallest eigenvalue by inertia bisection.
    pub fn min_eigenvalue(&self) -> f64 {
        let n = self.len();
        if n <= 2 {
            return self.small_eigenvalues()[0];
        }
        let (mut lo, mut hi) = self.spectrum_bounds();
        let scale = lo.abs().max(hi.abs()).max(1e-300);
        hi += 1e-12 * scale;
        lo -= 1e-12 * scale;
        for _ in 0..200 {
            if hi - lo <= 2.0 * f64::EPSILON * scale {
                break;
            }
            let mid = 0.5 * (lo + hi);
            if self.count_below(mid) >= 1 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Dense symmetric eigenvalues, ascending.
    pub fn dense_eigenvalues(&self) -> Vec<f64> {
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_dense()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }
}

/// Thomas algorithm for a symmetric tridiagonal system with off-diagonal `e`.
fn thomas(e: &[f64], main: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = main.len();
    let mut gam = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut bet = main[0];
    if bet == 0.0 {
        return None;
    }
    x[0] = rhs[0] / bet;
    for j in 1..n {
        gam[j] = e[j - 1] / bet;
        bet = main[j] - e[j - 1] * gam[j];
        if bet == 0.0 {
            return None;
        }
        x[j] = (rhs[j] - e[j - 1] * x[j - 1]) / bet;
    }
    for j in (0..n - 1).rev() {
        let next = x[j + 1];
        x[j] -= gam[j + 1] * next;
    }
    Some(x)
}

/// Outcome of one local descent.
#[derive(Debug, Clone)]
struct LocalRun {
    config: Configuration,
    value: f64,
    gradient_inf_norm: f64,
    hessian_min_eig: f64,
}

/// Damped Newton descent on the periodic action. Indefinite Hessians are
/// shifted until positive definite, which bends the step toward steepest
/// descent; steps are backtracked on the action.
fn descend<G: GeneratingFunction + ?Sized>(gf: &G, start: Configuration) -> LocalRun {
    let mut c = start;
    let mut value = action(gf, &c);
    let mut grad = action_gradient(gf, &c);
    let mut gnorm = inf_norm(&grad);
    for _ in 0..MAX_NEWTON_STEPS {
        if gnorm < 0.1 * GRADIENT_TOL {
            break;
        }
        let hess = action_hessian(gf, &c);
        let (lo, hi) = hess.spectrum_bounds();
        let scale = lo.abs().max(hi.abs()).max(1.0);
        let lmin = hess.min_eigenvalue();
        let mut mu = if lmin >= 1e-8 * scale { 0.0 } else { (1e-8 * scale).max(-2.0 * lmin) };
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let step = loop {
            match hess.shifted(mu).solve(&neg) {
                Some(s) if s.iter().zip(&grad).map(|(a, b)| a * b).sum::<f64>() < 0.0 => break Some(s),
                _ if mu < 1e12 * scale => mu = (mu * 4.0).max(1e-8 * scale),
                _ => break None,
            }
        };
        let Some(step) = step else { break };
        let slope: f64 = step.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial = Configuration {
                p: c.p,
                q: c.q,
                thetas: c.thetas.iter().zip(&step).map(|(t, s)| t + alpha * s).collect(),
            };
            let tv = action(gf, &trial);
            let tg = action_gradient(gf, &trial);
            let tn = inf_norm(&tg);
            let armijo = tv <= value + 1e-4 * alpha * slope;
            // near convergence the action change drowns in rounding
            let flat = tv <= value + 1e-13 * value.abs().max(1.0) && tn < gnorm;
            if armijo || flat {
                c = trial;
                value = tv;
                grad = tg;
                gnorm = tn;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    let hessian_min_eig = action_hessian(gf, &c).min_eigenvalue();
    LocalRun { config: c, value, gradient_inf_norm: gnorm, hessian_min_eig }
}

/// Global minimizer of the `(p, q)` periodic action over a phase sweep of
/// rigid-rotation seeds. See [`minimize_periodic_seeded`].
pub fn minimize_periodic<G: GeneratingFunction + ?Sized>(
    gf: &G,
    p: i64,
    q: usize,
    restarts: usize,
) -> Result<(Configuration, ActionReport)> {
    minimize_periodic_seeded(gf, p, q, restarts, 0.0, &[])
}

/// Runs one damped-Newton descent per seed and keeps the lowest action among
/// accepted minimizers (gradient below 1e-10, Hessian spectrum above -1e-8).
///
/// Seeds are rigid rotations with phases `(m + phase_offset) / (restarts q)`,
/// `m < restarts`, which sweep one orbit spacing, plus any `extra` seeds (for
/// continuation from a neighbouring rotation number). Equal actions (relative
/// 1e-12) are resolved toward the smallest canonical `theta_0`.
pub fn minimize_periodic_seeded<G: GeneratingFunction + ?Sized>(
    gf: &G,
    p: i64,
    q: usize,
    restarts: usize,
    phase_offset: f64,
    extra: &[Configuration],
) -> Result<(Configuration, ActionReport)> {
    check_rotation(p, q)?;
    if restarts == 0 {
        return Err(Error::InvalidInput("restarts must be at least 1".into()));
    }
    let mut seeds = Vec::with_capacity(restarts + extra.len());
    for m in 0..restarts {
        let phase = (m as f64 + phase_offset) / (restarts as f64 * q as f64);
        seeds.push(Configuration::rigid(p, q, phase)?);
    }
    for e in extra {
        if e.p != p || e.q != q {
            return Err(Error::InvalidInput(format!("seed {}/{} does not match {p}/{q}", e.p, e.q)));
        }
        seeds.push(e.clone());
    }
    let runs = par::map(&seeds, |s| descend(gf, s.clone()));
    let mut best: Option<LocalRun> = None;
    for run in runs {
        if !(run.gradient_inf_norm < GRADIENT_TOL && run.hessian_min_eig >= HESSIAN_TOL) {
            continue;
        }
        let run = LocalRun { config: run.config.canonical(), ..run };
        best = match best {
            None => Some(run),
            Some(b) => {
                let tie = 1e-12 * b.value.abs().max(1.0);
                if run.value < b.value - tie
                    || (run.value <= b.value + tie && run.config.thetas[0] < b.config.thetas[0])
                {
                    Some(run)
                } else {
                    Some(b)
                }
            }
        };
    }
    let best = best.ok_or(Error::NoConvergence { p, q })?;
    let report = ActionReport {
        value: best.value,
        gradient_inf_norm: best.gradient_inf_norm,
        hessian_min_eig: best.hessian_min_eig,
        restarts_used: seeds.len(),
    };
    Ok((best.config, report))
}

/// Default number of restarts for denominator `q`.
pub fn default_restarts(q: usize) -> usize {
    q.max(8)
}

/// Phase-space orbit of a critical configuration: `r_j = -S1(theta_j, theta_{j+1})`.
pub fn configuration_to_orbit<G: GeneratingFunction + ?Sized>(
    gf: &G,
    c: &Configuration,
) -> Result<Vec<LiftPoint>> {
    let gradient_inf_norm = inf_norm(&action_gradient(gf, c));
    if !(gradient_inf_norm < 1e-8) {
        return Err(Error::NotCritical { gradient_inf_norm });
    }
    Ok((0..c.q as i64)
        .map(|j| LiftPoint::new(c.theta(j), -gf.s1(c.theta(j), c.theta(j + 1))))
        .collect())
}

/// Minimizing `(p, q)` configuration together with its phase-space orbit.
pub fn minimizing_orbit<G: GeneratingFunction + ?Sized>(
    gf: &G,
    p: i64,
    q: usize,
    restarts: usize,
) -> Result<(Configuration, Vec<LiftPoint>)> {
    let (c, _) = minimize_periodic(gf, p, q, restarts)?;
    let pts = configuration_to_orbit(gf, &c)?;
    Ok((c, pts))
}

/// `(x_n - x_0) / n` over the whole sequence.
pub fn rotation_number(points: &[LiftPoint]) -> f64 {
    let n = points.len().saturating_sub(1);
    if n == 0 {
        return f64::NAN;
    }
    (points[n].x - points[0].x) / n as f64
}
