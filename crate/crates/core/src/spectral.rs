//! Monodromy traces, residues, Green-bundle slopes and Lyapunov exponents.

use serde::{Deserialize, Serialize};

use crate::action::{action_gradient, Configuration};
use crate::error::{Error, Result};
use crate::map::{backward, forward, tangent, tangent_between, GeneratingFunction, LiftPoint, Tangent2x2};

/// Renormalize accumulated products once an entry exceeds this.
const RENORM_AT: f64 = 1e50;
/// Above this magnitude the residue is evaluated in log form.
const LOG_SAFE_AT: f64 = 1e12;
/// Projective pole threshold.
const VERTICAL_EPS: f64 = 1e-14;

/// Trace stored as `mantissa * exp(log_scale)` so that long products of
/// hyperbolic tangents do not overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledTrace {
    pub mantissa: f64,
    pub log_scale: f64,
}

impl ScaledTrace {
    pub fn exact(t: f64) -> Self {
        Self { mantissa: t, log_scale: 0.0 }
    }

    pub fn value(&self) -> f64 {
        if self.log_scale == 0.0 {
            self.mantissa
        } else {
            self.mantissa * self.log_scale.exp()
        }
    }

    pub fn ln_abs(&self) -> f64 {
        self.mantissa.abs().ln() + self.log_scale
    }
}

/// Ordered product `T_{n-1} ... T_0` with its log scale factored out.
pub fn scaled_product<'a>(tangents: impl IntoIterator<Item = &'a Tangent2x2>) -> (Tangent2x2, f64) {
    let mut m = Tangent2x2::IDENTITY;
    let mut log_scale = 0.0;
    for t in tangents {
        m = t.mul(&m);
        let big = m.max_abs();
        if big > RENORM_AT {
            m = m.scale(1.0 / big);
            log_scale += big.ln();
        }
    }
    (m, log_scale)
}

/// Tangents along one period of a critical configuration, `T_j` at orbit
/// point `j`.
pub fn orbit_tangents<G: GeneratingFunction + ?Sized>(gf: &G, c: &Configuration) -> Vec<Tangent2x2> {
    (0..c.q as i64).map(|j| tangent_between(gf, c.theta(j), c.theta(j + 1))).collect()
}

fn ensure_critical<G: GeneratingFunction + ?Sized>(gf: &G, c: &Configuration) -> Result<()> {
    let g = action_gradient(gf, c).iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if g < 1e-8 {
        Ok(())
    } else {
        Err(Error::NotCritical { gradient_inf_norm: g })
    }
}

/// Trace of `DF^q` along the orbit of `c`, starting at orbit point `start`.
pub fn monodromy_trace_from<G: GeneratingFunction + ?Sized>(
    gf: &G,
    c: &Configuration,
    start: usize,
) -> Result<ScaledTrace> {
    ensure_critical(gf, c)?;
    let tangents = orbit_tangents(gf, c);
    let q = c.q;
    let ordered: Vec<Tangent2x2> = (0..q).map(|j| tangents[(start + j) % q]).collect();
    let (m, log_scale) = scaled_product(&ordered);
    Ok(ScaledTrace { mantissa: m.trace(), log_scale })
}

/// Trace of the monodromy `T_{q-1} ... T_0` of a critical configuration.
pub fn monodromy_trace<G: GeneratingFunction + ?Sized>(gf: &G, c: &Configuration) -> Result<ScaledTrace> {
    monodromy_trace_from(gf, c, 0)
}

/// Residue data of one periodic orbit.
///
/// `residue = (2 - trace) / 4`, `mean_residue = |residue|^(1/q)` (0 when the
/// residue vanishes), and `lambda_max` is the eigenvalue of modulus at least
/// one when the monodromy is not elliptic.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidueRecord {
    pub p: i64,
    pub q: usize,
    pub trace: f64,
    pub residue: f64,
    pub mean_residue: f64,
    pub lambda_max: Option<f64>,
    /// `ln |trace|`, kept for comparisons after `trace` overflows.
    #[serde(skip)]
    pub ln_abs_trace: f64,
}

impl ResidueRecord {
    /// `ln (lambda + 1/lambda)` without overflow; `None` when elliptic.
    pub fn ln_lambda_sum(&self) -> Option<f64> {
        self.lambda_max.map(|_| self.ln_abs_trace)
    }
}

/// Residue record from a plain trace value.
pub fn residue(trace: f64, p: i64, q: usize) -> ResidueRecord {
    residue_scaled(ScaledTrace::exact(trace), p, q)
}

/// Residue record from a scaled trace; large traces go through logs.
pub fn residue_scaled(t: ScaledTrace, p: i64, q: usize) -> ResidueRecord {
    let qf = q.max(1) as f64;
    let ln_abs = t.ln_abs();
    let trace = t.value();
    if ln_abs.is_finite() && ln_abs > LOG_SAFE_AT.ln() {
        // |2 - T| = |T| |1 - 2/T|
        let ln_two_minus = ln_abs + (1.0 - 2.0 / trace).abs().ln();
        let ln_res = ln_two_minus - 4f64.ln();
        let residue = if t.mantissa > 0.0 { -ln_res.exp() } else { ln_res.exp() };
        // lambda = |T| (1 + sqrt(1 - 4/T^2)) / 2
        let lambda = (ln_abs + ((1.0 + (1.0 - 4.0 / (trace * trace)).sqrt()) / 2.0).ln()).exp();
        return ResidueRecord {
            p,
            q,
            trace,
            residue,
            mean_residue: (ln_res / qf).exp(),
            lambda_max: Some(lambda),
            ln_abs_trace: ln_abs,
        };
    }
    let residue = (2.0 - trace) / 4.0;
    let mean_residue = if residue == 0.0 { 0.0 } else { (residue.abs().ln() / qf).exp() };
    let abs = trace.abs();
    let lambda_max = (abs >= 2.0).then(|| {
        let disc = ((abs - 2.0) * (abs + 2.0)).sqrt();
        (abs + disc) / 2.0
    });
    ResidueRecord { p, q, trace, residue, mean_residue, lambda_max, ln_abs_trace: ln_abs }
}

/// A line through the origin of the tangent plane: `{(t, t s)}` or the
/// vertical `{0} x R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ProjectiveSlope {
    Finite(f64),
    Vertical,
}

impl ProjectiveSlope {
    pub fn finite(&self) -> Option<f64> {
        match *self {
            ProjectiveSlope::Finite(s) => Some(s),
            ProjectiveSlope::Vertical => None,
        }
    }
}

/// Image of a line under `m`.
pub fn slope_pushforward(m: &Tangent2x2, s: ProjectiveSlope) -> ProjectiveSlope {
    let (den, num) = match s {
        ProjectiveSlope::Finite(s) => (m.a + m.b * s, m.c + m.d * s),
        ProjectiveSlope::Vertical => (m.b, m.d),
    };
    if den.abs() < VERTICAL_EPS {
        ProjectiveSlope::Vertical
    } else {
        ProjectiveSlope::Finite(num / den)
    }
}

/// Finite-depth brackets of the two Green bundles at a point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreenPair {
    pub s_minus: ProjectiveSlope,
    pub s_plus: ProjectiveSlope,
    pub depth: usize,
}

impl GreenPair {
    /// `s_plus - s_minus`, infinite if either slope is vertical.
    pub fn width(&self) -> f64 {
        match (self.s_minus, self.s_plus) {
            (ProjectiveSlope::Finite(a), ProjectiveSlope::Finite(b)) => b - a,
            _ => f64::INFINITY,
        }
    }
}

/// Green slopes from a window of tangents: `before` are the tangents at
/// `f^{-n}(x), ..., f^{-1}(x)` and `after` those at `x, ..., f^{n-1}(x)`.
fn green_from_tangents(before: &[Tangent2x2], after: &[Tangent2x2]) -> GreenPair {
    let s_plus = before
        .iter()
        .fold(ProjectiveSlope::Vertical, |s, t| slope_pushforward(t, s));
    let s_minus = after
        .iter()
        .rev()
        .fold(ProjectiveSlope::Vertical, |s, t| slope_pushforward(&t.symplectic_inverse(), s));
    GreenPair { s_minus, s_plus, depth: before.len() }
}

/// `s_plus` is the vertical at `f^{-n}(center)` pushed forward `n` steps and
/// `s_minus` the vertical at `f^n(center)` pulled back `n` steps.
pub fn green_slopes<G: GeneratingFunction + ?Sized>(gf: &G, center: LiftPoint, n: usize) -> Result<GreenPair> {
    if n == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    let mut past = Vec::with_capacity(n);
    let mut p = center;
    for _ in 0..n {
        p = backward(gf, p)?;
        past.push(tangent(gf, p)?);
    }
    past.reverse();
    let mut future = Vec::with_capacity(n);
    let mut p = center;
    for _ in 0..n {
        let next = forward(gf, p)?;
        future.push(tangent_between(gf, p.x, next.x));
        p = next;
    }
    Ok(green_from_tangents(&past, &future))
}

/// Green slopes at point `index` of a periodic orbit, cycling its tangents
/// instead of iterating the map (iteration drifts off hyperbolic orbits).
pub fn green_slopes_periodic(tangents: &[Tangent2x2], index: usize, n: usize) -> GreenPair {
    let q = tangents.len();
    let at = |k: i64| tangents[k.rem_euclid(q as i64) as usize];
    let i = index as i64;
    let n = n as i64;
    let before: Vec<Tangent2x2> = (i - n..i).map(at).collect();
    let after: Vec<Tangent2x2> = (i..i + n).map(at).collect();
    green_from_tangents(&before, &after)
}

/// Steps between renormalizations of the tangent vector.
const LYAP_RENORM_EVERY: usize = 10;
/// Steps used to align the tangent vector before averaging.
const LYAP_BURN_IN: usize = 100;

/// Finite-time dominant Lyapunov exponent along the orbit of `start`.
///
/// A generic tangent vector is first aligned over a short burn-in, then the
/// log growth is averaged over `n` steps with renormalization every 10
/// steps. The result is clamped at 0, the dominant exponent of a
/// symplectic map being nonnegative.
pub fn lyapunov_exponent<G: GeneratingFunction + ?Sized>(gf: &G, start: LiftPoint, n: usize) -> Result<f64> {
    if n < 100 {
        return Err(Error::InvalidInput(format!("lyapunov needs n >= 100, got {n}")));
    }
    let mut p = start;
    let mut v = (std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2);
    let mut sum = 0.0;
    for step in 0..LYAP_BURN_IN + n {
        let next = forward(gf, p)?;
        v = tangent_between(gf, p.x, next.x).apply(v);
        p = next;
        let counted = step >= LYAP_BURN_IN;
        let at_end = step + 1 == LYAP_BURN_IN + n;
        if (step + 1) % LYAP_RENORM_EVERY == 0 || step + 1 == LYAP_BURN_IN || at_end {
            let norm = v.0.hypot(v.1);
            if counted {
                sum += norm.ln();
            }
            v = (v.0 / norm, v.1 / norm);
        }
    }
    Ok((sum / n as f64).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::minimize_periodic;
    use crate::map::TwistMap;
    use approx::assert_abs_diff_eq;

    #[test]
    fn residue_examples() {
        let r = residue(2.0, 1, 5);
        assert_eq!((r.residue, r.mean_residue, r.lambda_max), (0.0, 0.0, Some(1.0)));
        let r = residue(3.0, 0, 1);
        assert_eq!(r.residue, -0.25);
        assert_abs_diff_eq!(r.mean_residue, 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(r.lambda_max.unwrap(), (3.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(r.lambda_max.unwrap(), 2.6180, epsilon = 1e-4);
        let r = residue(6.0, 1, 2);
        assert_eq!(r.residue, -1.0);
        assert_abs_diff_eq!(r.mean_residue, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.lambda_max.unwrap(), 3.0 + 2.0 * 2f64.sqrt(), epsilon = 1e-14);
        let r = residue(1.0, 1, 3);
        assert_eq!(r.lambda_max, None);
        assert_abs_diff_eq!(r.residue, 0.25, epsilon = 1e-15);
        let r = residue(-3.0, 1, 3);
        let l = r.lambda_max.unwrap();
        assert_abs_diff_eq!(l + 1.0 / l, 3.0, epsilon = 1e-12);
    }

    #[test]
    fn log_safe_residue_matches_direct_formula() {
        for &t in &[2e12, 7.5e15, 3e40, -4e20] {
            let direct = residue(t, 1, 30);
            let scaled = residue_scaled(ScaledTrace { mantissa: t / 1e10, log_scale: 1e10f64.ln() }, 1, 30);
            assert!((direct.residue - scaled.residue).abs() <= 1e-12 * direct.residue.abs());
            assert!((direct.mean_residue - scaled.mean_residue).abs() <= 1e-12);
            let want = (2.0 - t).abs() / 4.0;
            assert!((direct.mean_residue.powi(30) - want).abs() <= 1e-9 * want);
        }
        // beyond f64 range the log form still yields a finite mean residue
        let huge = residue_scaled(ScaledTrace { mantissa: 2.0, log_scale: 800.0 }, 3, 500);
        assert!(huge.trace.is_infinite());
        let want = ((2f64.ln() + 800.0) - 4f64.ln()) / 500.0;
        assert_abs_diff_eq!(huge.mean_residue.ln(), want, epsilon = 1e-12);
    }

    #[test]
    fn monodromy_examples() {
        for &(p, q) in &[(1i64, 2usize), (2, 5), (3, 7)] {
            let (c, _) = minimize_periodic(&TwistMap::Integrable, p, q, 8).unwrap();
            assert_eq!(monodromy_trace(&TwistMap::Integrable, &c).unwrap().value(), 2.0);
        }
        let gf = TwistMap::standard(1.0);
        let c = Configuration::new(0, 1, vec![0.0]).unwrap();
        assert_eq!(monodromy_trace(&gf, &c).unwrap().value(), 3.0);
        let (c, _) = minimize_periodic(&gf, 1, 2, 8).unwrap();
        let a = monodromy_trace_from(&gf, &c, 0).unwrap().value();
        let b = monodromy_trace_from(&gf, &c, 1).unwrap().value();
        assert_abs_diff_eq!(a, b, epsilon = 1e-10);
        assert!(matches!(
            monodromy_trace(&gf, &Configuration::new(0, 1, vec![0.25]).unwrap()),
            Err(Error::NotCritical { .. })
        ));
    }

    #[test]
    fn pushforward_examples() {
        let m = Tangent2x2::new(2.0, 1.0, 1.0, 1.0);
        assert_eq!(slope_pushforward(&m, ProjectiveSlope::Vertical), ProjectiveSlope::Finite(1.0));
        assert_eq!(slope_pushforward(&m, ProjectiveSlope::Finite(0.0)), ProjectiveSlope::Finite(0.5));
        let u = Tangent2x2::new(1.0, 1.0, 0.0, 1.0);
        let mut s = ProjectiveSlope::Vertical;
        for n in 1..=50 {
            s = slope_pushforward(&u, s);
            assert_abs_diff_eq!(s.finite().unwrap(), 1.0 / n as f64, epsilon = 1e-15);
        }
        // pole
        assert_eq!(slope_pushforward(&u, ProjectiveSlope::Finite(-1.0)), ProjectiveSlope::Vertical);
        let shear = Tangent2x2::new(1.0, 0.0, 0.5, 1.0);
        assert_eq!(slope_pushforward(&shear, ProjectiveSlope::Vertical), ProjectiveSlope::Vertical);
    }

    #[test]
    fn green_slopes_examples() {
        for n in [1usize, 7, 30] {
            let g = green_slopes(&TwistMap::Integrable, LiftPoint::new(0.3, 0.2), n).unwrap();
            assert_abs_diff_eq!(g.s_plus.finite().unwrap(), 1.0 / n as f64, epsilon = 1e-12);
            assert_abs_diff_eq!(g.s_minus.finite().unwrap(), -1.0 / n as f64, epsilon = 1e-12);
        }
        let g = green_slopes(&TwistMap::standard(1.0), LiftPoint::new(0.0, 0.0), 30).unwrap();
        assert_abs_diff_eq!(g.s_plus.finite().unwrap(), (5f64.sqrt() - 1.0) / 2.0, epsilon = 1e-6);
        assert_abs_diff_eq!(g.s_minus.finite().unwrap(), -(1.0 + 5f64.sqrt()) / 2.0, epsilon = 1e-6);
    }

    #[test]
    fn green_slopes_nest_with_depth() {
        let gf = TwistMap::standard(1.5);
        let (c, _) = minimize_periodic(&gf, 2, 5, 8).unwrap();
        let tangents = orbit_tangents(&gf, &c);
        for i in 0..5 {
            let shallow = green_slopes_periodic(&tangents, i, 20);
            let deep = green_slopes_periodic(&tangents, i, 40);
            let (sp20, sm20) = (shallow.s_plus.finite().unwrap(), shallow.s_minus.finite().unwrap());
            let (sp40, sm40) = (deep.s_plus.finite().unwrap(), deep.s_minus.finite().unwrap());
            assert!(sp20 >= sp40 - 1e-9 && sp40 >= sm40 - 1e-9 && sm40 >= sm20 - 1e-9);
        }
    }

    #[test]
    fn lyapunov_examples() {
        let l = lyapunov_exponent(&TwistMap::Integrable, LiftPoint::new(0.1, 0.3), 10_000).unwrap();
        assert!(l <= (10_000f64).ln() / 10_000.0 + 1e-3);
        let l = lyapunov_exponent(&TwistMap::standard(1.0), LiftPoint::new(0.0, 0.0), 1000).unwrap();
        assert_abs_diff_eq!(l, ((3.0 + 5f64.sqrt()) / 2.0).ln(), epsilon = 1e-6);
        assert!(lyapunov_exponent(&TwistMap::Integrable, LiftPoint::new(0.0, 0.0), 99).is_err());
    }
}
