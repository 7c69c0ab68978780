//! Twist maps defined by generating functions.
//!
//! A lift `F(x, r) = (X, R)` is given implicitly by `r = -S1(x, X)` and
//! `R = S2(x, X)`. The twist bound `S12 <= -eps` makes `-S1(x, .)` strictly
//! increasing, so both the forward and the backward equations have unique
//! roots that a bracketed Newton iteration always finds.

use std::f64::consts::PI;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * PI;

/// Point of the annulus `T x R`, angle stored in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnnulusPoint {
    pub theta: f64,
    pub r: f64,
}

impl AnnulusPoint {
    pub fn new(theta: f64, r: f64) -> Self {
        Self { theta: reduce_angle(theta), r }
    }

    pub fn lift(self) -> LiftPoint {
        LiftPoint { x: self.theta, r: self.r }
    }
}

/// Point of the universal cover `R^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftPoint {
    pub x: f64,
    pub r: f64,
}

impl LiftPoint {
    pub fn new(x: f64, r: f64) -> Self {
        Self { x, r }
    }

    pub fn project(self) -> AnnulusPoint {
        AnnulusPoint::new(self.x, self.r)
    }

    pub fn translate(self, dx: f64) -> Self {
        Self { x: self.x + dx, r: self.r }
    }
}

/// Floor-based reduction to `[0, 1)`.
pub fn reduce_angle(x: f64) -> f64 {
    let t = x - x.floor();
    // x slightly below an integer can round up to exactly 1.0
    if t >= 1.0 {
        0.0
    } else {
        t
    }
}

/// Signed angular difference `b - a` wrapped to `[-1/2, 1/2)`.
pub fn wrapped_delta(a: f64, b: f64) -> f64 {
    let d = reduce_angle(b - a);
    if d >= 0.5 {
        d - 1.0
    } else {
        d
    }
}

/// Circle distance `min(|d|, 1 - |d|)`.
pub fn circle_distance(a: f64, b: f64) -> f64 {
    wrapped_delta(a, b).abs()
}

/// Euclidean distance on the annulus with the wrapped angular metric.
pub fn annulus_distance(a: AnnulusPoint, b: AnnulusPoint) -> f64 {
    circle_distance(a.theta, b.theta).hypot(a.r - b.r)
}

/// Tangent matrix `(a b; c d)` acting on `(dtheta, dr)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tangent2x2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl Tangent2x2 {
    pub const IDENTITY: Tangent2x2 = Tangent2x2 { a: 1.0, b: 0.0, c: 0.0, d: 1.0 };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Tangent2x2) -> Tangent2x2 {
        Tangent2x2 {
            a: self.a * rhs.a + self.b * rhs.c,
            b: self.a * rhs.b + self.b * rhs.d,
            c: self.c * rhs.a + self.d * rhs.c,
            d: self.c * rhs.b + self.d * rhs.d,
        }
    }

    /// Inverse, assuming unit determinant.
    pub fn symplectic_inverse(&self) -> Tangent2x2 {
        Tangent2x2 { a: self.d, b: -self.b, c: -self.c, d: self.a }
    }

    pub fn apply(&self, v: (f64, f64)) -> (f64, f64) {
        (self.a * v.0 + self.b * v.1, self.c * v.0 + self.d * v.1)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn scale(&self, s: f64) -> Tangent2x2 {
        Tangent2x2 { a: self.a * s, b: self.b * s, c: self.c * s, d: self.d * s }
    }
}

/// Generating function `S(x, X)` of a positive twist map together with its
/// first and second partial derivatives.
///
/// Implementors must satisfy `S(x + 1, X + 1) = S(x, X)` and
/// `S12 <= -twist_bound() < 0`.
pub trait GeneratingFunction: Send + Sync {
    fn s(&self, x: f64, xx: f64) -> f64;
    fn s1(&self, x: f64, xx: f64) -> f64;
    fn s2(&self, x: f64, xx: f64) -> f64;
    fn s11(&self, x: f64, xx: f64) -> f64;
    fn s12(&self, x: f64, xx: f64) -> f64;
    fn s22(&self, x: f64, xx: f64) -> f64;
    fn twist_bound(&self) -> f64;

    /// Short identifier used in reports.
    fn label(&self) -> String {
        "custom".to_string()
    }

    /// Family parameter, when the function belongs to a named family.
    fn parameter(&self) -> Option<f64> {
        None
    }

    /// Optional closed-form forward map; must agree with the implicit solve.
    fn forward_closed_form(&self, _p: LiftPoint) -> Option<LiftPoint> {
        None
    }

    /// Optional closed-form backward map.
    fn backward_closed_form(&self, _p: LiftPoint) -> Option<LiftPoint> {
        None
    }
}

/// Built-in families.
///
/// The standard family uses `S(x, X) = (X - x)^2 / 2 - k / (4 pi^2) cos(2 pi x)`,
/// giving `X = x + r + k/(2 pi) sin(2 pi x)`, `R = X - x`. The integrable map is
/// the `k = 0` member.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "lowercase")]
pub enum TwistMap {
    Integrable,
    Standard { k: f64 },
}

impl TwistMap {
    pub fn standard(k: f64) -> Self {
        TwistMap::Standard { k }
    }

    pub fn from_name(name: &str, k: f64) -> Result<Self> {
        match name {
            "integrable" => Ok(TwistMap::Integrable),
            "standard" => Ok(TwistMap::Standard { k }),
            other => Err(Error::InvalidInput(format!("unknown map family '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TwistMap::Integrable => "integrable",
            TwistMap::Standard { .. } => "standard",
        }
    }

    pub fn k(&self) -> f64 {
        match *self {
            TwistMap::Integrable => 0.0,
            TwistMap::Standard { k } => k,
        }
    }
}

impl fmt::Display for TwistMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TwistMap::Integrable => write!(f, "integrable"),
            TwistMap::Standard { k } => write!(f, "standard(k={k})"),
        }
    }
}

impl GeneratingFunction for TwistMap {
    fn s(&self, x: f64, xx: f64) -> f64 {
        let d = xx - x;
        0.5 * d * d - self.k() / (TWO_PI * TWO_PI) * (TWO_PI * x).cos()
    }

    fn s1(&self, x: f64, xx: f64) -> f64 {
        -(xx - x) + self.k() / TWO_PI * (TWO_PI * x).sin()
    }

    fn s2(&self, x: f64, xx: f64) -> f64 {
        xx - x
    }

    fn s11(&self, x: f64, _xx: f64) -> f64 {
        1.0 + self.k() * (TWO_PI * x).cos()
    }

    fn s12(&self, _x: f64, _xx: f64) -> f64 {
        -1.0
    }

    fn s22(&self, _x: f64, _xx: f64) -> f64 {
        1.0
    }

    fn twist_bound(&self) -> f64 {
        1.0
    }

    fn label(&self) -> String {
        self.name().to_string()
    }

    fn parameter(&self) -> Option<f64> {
        Some(self.k())
    }

    fn forward_closed_form(&self, p: LiftPoint) -> Option<LiftPoint> {
        let rr = p.r + self.k() / TWO_PI * (TWO_PI * p.x).sin();
        Some(LiftPoint { x: p.x + rr, r: rr })
    }

    fn backward_closed_form(&self, p: LiftPoint) -> Option<LiftPoint> {
        let x = p.x - p.r;
        Some(LiftPoint { x, r: p.r - self.k() / TWO_PI * (TWO_PI * x).sin() })
    }
}

type Eval = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// User-supplied generating function given as a record of evaluators.
///
/// Construction validates periodicity, the twist bound and derivative
/// consistency on a fixed sample grid.
pub struct CustomGenerating {
    name: String,
    s: Eval,
    s1: Eval,
    s2: Eval,
    s11: Eval,
    s12: Eval,
    s22: Eval,
    eps: f64,
}

impl fmt::Debug for CustomGenerating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomGenerating").field("name", &self.name).field("eps", &self.eps).finish()
    }
}

impl CustomGenerating {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: impl Into<String>,
        s: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        s1: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        s2: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        s11: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        s12: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        s22: impl Fn(f64, f64) -> f64 + Send + Sync + 'static,
        eps: f64,
    ) -> Result<Self> {
        let gf = CustomGenerating {
            name: name.into(),
            s: Box::new(s),
            s1: Box::new(s1),
            s2: Box::new(s2),
            s11: Box::new(s11),
            s12: Box::new(s12),
            s22: Box::new(s22),
            eps,
        };
        validate(&gf)?;
        Ok(gf)
    }
}

impl GeneratingFunction for CustomGenerating {
    fn s(&self, x: f64, xx: f64) -> f64 {
        (self.s)(x, xx)
    }
    fn s1(&self, x: f64, xx: f64) -> f64 {
        (self.s1)(x, xx)
    }
    fn s2(&self, x: f64, xx: f64) -> f64 {
        (self.s2)(x, xx)
    }
    fn s11(&self, x: f64, xx: f64) -> f64 {
        (self.s11)(x, xx)
    }
    fn s12(&self, x: f64, xx: f64) -> f64 {
        (self.s12)(x, xx)
    }
    fn s22(&self, x: f64, xx: f64) -> f64 {
        (self.s22)(x, xx)
    }
    fn twist_bound(&self) -> f64 {
        self.eps
    }
    fn label(&self) -> String {
        self.name.clone()
    }
}

/// Checks the generating-function contract on a deterministic sample grid:
/// periodicity (1e-12), twist bound, central differences with step 1e-6
/// against the supplied derivatives (1e-5), and symmetry of the mixed
/// derivative (1e-6).
pub fn validate<G: GeneratingFunction + ?Sized>(gf: &G) -> Result<()> {
    const H: f64 = 1e-6;
    let eps = gf.twist_bound();
    if !(eps > 0.0) {
        return Err(Error::InvalidGenerating(format!("twist bound must be positive, got {eps}")));
    }
    let bad = |what: &str, x: f64, xx: f64, got: f64, want: f64| {
        Error::InvalidGenerating(format!("{what} at ({x}, {xx}): {got} vs {want}"))
    };
    for i in 0..12 {
        for j in 0..9 {
            let x = -0.9 + 0.17 * i as f64;
            let xx = x - 2.0 + 0.5 * j as f64;
            let s = gf.s(x, xx);
            let shifted = gf.s(x + 1.0, xx + 1.0);
            if (s - shifted).abs() > 1e-12 * s.abs().max(1.0) {
                return Err(bad("periodicity", x, xx, shifted, s));
            }
            let s12 = gf.s12(x, xx);
            if s12 > -eps {
                return Err(bad("twist bound", x, xx, s12, -eps));
            }
            let fd = |f: &dyn Fn(f64, f64) -> f64, dx: f64, dxx: f64| {
                (f(x + dx, xx + dxx) - f(x - dx, xx - dxx)) / (2.0 * H)
            };
            let checks = [
                ("S1", fd(&|a, b| gf.s(a, b), H, 0.0), gf.s1(x, xx), 1e-5),
                ("S2", fd(&|a, b| gf.s(a, b), 0.0, H), gf.s2(x, xx), 1e-5),
                ("S11", fd(&|a, b| gf.s1(a, b), H, 0.0), gf.s11(x, xx), 1e-5),
                ("S12", fd(&|a, b| gf.s1(a, b), 0.0, H), s12, 1e-6),
                ("S21", fd(&|a, b| gf.s2(a, b), H, 0.0), s12, 1e-5),
                ("S22", fd(&|a, b| gf.s2(a, b), 0.0, H), gf.s22(x, xx), 1e-5),
            ];
            for (what, num, given, tol) in checks {
                if (num - given).abs() > tol * given.abs().max(1.0) {
                    return Err(bad(what, x, xx, given, num));
                }
            }
        }
    }
    Ok(())
}

/// Root of an increasing function `g` (value and derivative) starting from
/// `start`. Brackets by geometric expansion from `step`, then runs Newton
/// safeguarded by bisection. `None` when the bracket leaves `limit`.
fn solve_increasing(g: impl Fn(f64) -> (f64, f64), start: f64, step: f64, limit: f64) -> Option<f64> {
    let (g0, _) = g(start);
    if g0 == 0.0 {
        return Some(start);
    }
    let dir = if g0 < 0.0 { 1.0 } else { -1.0 };
    let mut inner = start;
    let mut width = step.max(1e-12);
    let mut outer = start + dir * width;
    loop {
        let (v, _) = g(outer);
        if v == 0.0 {
            return Some(outer);
        }
        if (v > 0.0) == (dir > 0.0) {
            break;
        }
        inner = outer;
        width *= 2.0;
        if width > limit {
            return None;
        }
        outer = start + dir * width;
    }
    let (mut lo, mut hi) = if dir > 0.0 { (inner, outer) } else { (outer, inner) };
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, dv) = g(x);
        if v == 0.0 {
            return Some(x);
        }
        if v < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mut next = x - v / dv;
        if !(dv > 0.0) || !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        if (next - x).abs() <= 4.0 * f64::EPSILON * x.abs().max(1.0) || hi - lo <= 4.0 * f64::EPSILON * x.abs().max(1.0) {
            return Some(next);
        }
        x = next;
    }
    Some(x)
}

/// Forward map through the implicit relations only, ignoring closed forms.
pub fn forward_implicit<G: GeneratingFunction + ?Sized>(gf: &G, p: LiftPoint) -> Result<LiftPoint> {
    let eps = gf.twist_bound();
    // X solves -S1(x, X) = r; increasing in X with slope >= eps
    let g = |xx: f64| (-gf.s1(p.x, xx) - p.r, -gf.s12(p.x, xx));
    let g0 = g(p.x).0.abs();
    let xx = solve_increasing(g, p.x, g0 / eps, p.r.abs() / eps + g0 / eps + 10.0)
        .ok_or(Error::RootNotBracketed { x: p.x, r: p.r })?;
    Ok(LiftPoint { x: xx, r: gf.s2(p.x, xx) })
}

/// Backward map through the implicit relations only.
pub fn backward_implicit<G: GeneratingFunction + ?Sized>(gf: &G, p: LiftPoint) -> Result<LiftPoint> {
    let eps = gf.twist_bound();
    // x solves S2(x, X) = R; S2 is decreasing in x, so negate
    let g = |x: f64| (p.r - gf.s2(x, p.x), -gf.s12(x, p.x));
    let g0 = g(p.x).0.abs();
    let x = solve_increasing(g, p.x, g0 / eps, p.r.abs() / eps + g0 / eps + 10.0)
        .ok_or(Error::RootNotBracketed { x: p.x, r: p.r })?;
    Ok(LiftPoint { x, r: -gf.s1(x, p.x) })
}

/// One step of the lift `F`.
pub fn forward<G: GeneratingFunction + ?Sized>(gf: &G, p: LiftPoint) -> Result<LiftPoint> {
    match gf.forward_closed_form(p) {
        Some(q) => Ok(q),
        None => forward_implicit(gf, p),
    }
}

/// One step of `F^{-1}`.
pub fn backward<G: GeneratingFunction + ?Sized>(gf: &G, p: LiftPoint) -> Result<LiftPoint> {
    match gf.backward_closed_form(p) {
        Some(q) => Ok(q),
        None => backward_implicit(gf, p),
    }
}

/// Tangent of `F` at `p` from the second derivatives of `S` at `(x, X)`.
pub fn tangent<G: GeneratingFunction + ?Sized>(gf: &G, p: LiftPoint) -> Result<Tangent2x2> {
    let image = forward(gf, p)?;
    Ok(tangent_between(gf, p.x, image.x))
}

/// Tangent of `F` at the point whose orbit passes from angle `x` to `xx`.
pub fn tangent_between<G: GeneratingFunction + ?Sized>(gf: &G, x: f64, xx: f64) -> Tangent2x2 {
    let s11 = gf.s11(x, xx);
    let s12 = gf.s12(x, xx);
    let s22 = gf.s22(x, xx);
    Tangent2x2 {
        a: -s11 / s12,
        b: -1.0 / s12,
        c: s12 - s11 * s22 / s12,
        d: -s22 / s12,
    }
}

/// `|n| + 1` points starting at `p`; negative `n` iterates backward.
pub fn orbit<G: GeneratingFunction + ?Sized>(gf: &G, p: LiftPoint, n: i64) -> Result<Vec<LiftPoint>> {
    let steps = n.unsigned_abs() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(p);
    let mut cur = p;
    for _ in 0..steps {
        cur = if n >= 0 { forward(gf, cur)? } else { backward(gf, cur)? };
        out.push(cur);
    }
    Ok(out)
}
