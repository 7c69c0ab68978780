//! C¹-regularity proxies for invariant sets sampled as point clouds.
//!
//! Two views: secant slopes of nearby cloud points (a finite-radius stand-in
//! for the paratangent cone) and the width of the finite-depth Green bracket
//! along the orbits that make up the cloud.

use serde::{Deserialize, Serialize};

use crate::action::Configuration;
use crate::error::{Error, Result};
use crate::map::{annulus_distance, circle_distance, wrapped_delta, AnnulusPoint, GeneratingFunction, LiftPoint};
use crate::par;
use crate::spectral::{green_slopes, green_slopes_periodic, orbit_tangents};

/// Where the points of a cloud come from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    /// Consecutive iterates of one orbit.
    OrbitSample,
    /// Union of minimizing periodic orbits, kept so Green slopes can cycle
    /// the exact period.
    PeriodicOrbits(Vec<Configuration>),
    /// Samples of a curve with no dynamical meaning.
    CurveSample,
}

impl Provenance {
    pub fn name(&self) -> &'static str {
        match self {
            Provenance::OrbitSample => "orbit-sample",
            Provenance::PeriodicOrbits(_) => "periodic-orbits",
            Provenance::CurveSample => "curve-sample",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub points: Vec<AnnulusPoint>,
    pub provenance: Provenance,
}

impl PointCloud {
    pub fn curve(points: Vec<AnnulusPoint>) -> Self {
        Self { points, provenance: Provenance::CurveSample }
    }

    pub fn orbit(points: &[LiftPoint]) -> Self {
        Self { points: points.iter().map(|p| p.project()).collect(), provenance: Provenance::OrbitSample }
    }

    /// Union of the orbits of critical configurations.
    pub fn periodic<G: GeneratingFunction + ?Sized>(gf: &G, configs: Vec<Configuration>) -> Result<Self> {
        let mut points = Vec::new();
        for c in &configs {
            points.extend(crate::action::configuration_to_orbit(gf, c)?.into_iter().map(|p| p.project()));
        }
        Ok(Self { points, provenance: Provenance::PeriodicOrbits(configs) })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Secant-slope range at one base point and radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeSpread {
    pub base: AnnulusPoint,
    pub delta: f64,
    pub slope_min: f64,
    pub slope_max: f64,
    pub pair_count: usize,
}

impl SlopeSpread {
    pub fn spread(&self) -> f64 {
        self.slope_max - self.slope_min
    }
}

const SAME_THETA: f64 = 1e-12;
const SAME_R: f64 = 1e-9;

/// Largest `|dr| / dtheta` over all pairs (wrapped angular distance).
pub fn lipschitz_graph_check(cloud: &PointCloud) -> Result<f64> {
    let pts = &cloud.points;
    if pts.len() < 2 {
        return Err(Error::InvalidInput("lipschitz check needs at least two points".into()));
    }
    let rows = par::map_range(pts.len(), |i| {
        let mut best = 0.0f64;
        for j in i + 1..pts.len() {
            let dt = circle_distance(pts[i].theta, pts[j].theta);
            let dr = (pts[i].r - pts[j].r).abs();
            if dt < SAME_THETA {
                if dr > SAME_R {
                    return Err(Error::GraphViolation { theta: pts[i].theta, r1: pts[i].r, r2: pts[j].r });
                }
                continue;
            }
            best = best.max(dr / dt);
        }
        Ok(best)
    });
    rows.into_iter().try_fold(0.0f64, |m, r| r.map(|v| m.max(v)))
}

/// Secant slopes `(r_i - r_j) / (theta_i - theta_j)` over pairs of cloud
/// points within `delta` of `base`, one record per delta with at least one
/// pair.
pub fn paratangent_spread(cloud: &PointCloud, base: AnnulusPoint, deltas: &[f64]) -> Vec<SlopeSpread> {
    let mut out = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let near: Vec<AnnulusPoint> =
            cloud.points.iter().copied().filter(|p| annulus_distance(*p, base) <= delta).collect();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        let mut count = 0;
        for i in 0..near.len() {
            for j in i + 1..near.len() {
                let dt = wrapped_delta(near[j].theta, near[i].theta);
                if dt.abs() < SAME_THETA {
                    continue;
                }
                let s = (near[i].r - near[j].r) / dt;
                lo = lo.min(s);
                hi = hi.max(s);
                count += 1;
            }
        }
        if count > 0 {
            out.push(SlopeSpread { base, delta, slope_min: lo, slope_max: hi, pair_count: count });
        }
    }
    out
}

/// Geometric ladder `0.1 * 2^-i`, `i = 0..4`.
pub fn default_deltas() -> Vec<f64> {
    (0..5).map(|i| 0.1 / f64::powi(2.0, i)).collect()
}

fn by_theta(a: &AnnulusPoint, b: &AnnulusPoint) -> std::cmp::Ordering {
    a.theta.total_cmp(&b.theta).then(a.r.total_cmp(&b.r))
}

/// [`paratangent_spread`] at every cloud point, ordered by base theta.
pub fn spread_profile(cloud: &PointCloud, deltas: &[f64]) -> Vec<SlopeSpread> {
    let mut bases = cloud.points.clone();
    bases.sort_by(by_theta);
    par::map(&bases, |b| paratangent_spread(cloud, *b, deltas)).into_iter().flatten().collect()
}

/// Distribution of spreads over bases at one radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpreadSummary {
    pub delta: f64,
    pub bases: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

/// Linear-interpolated quantile of an unsorted sample.
pub fn quantile(values: &[f64], q: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

pub fn median(values: &[f64]) -> f64 {
    quantile(values, 0.5)
}

/// Per-delta quantiles of `slope_max - slope_min`.
pub fn summarize_spreads(records: &[SlopeSpread], deltas: &[f64]) -> Vec<SpreadSummary> {
    deltas
        .iter()
        .map(|&delta| {
            let s: Vec<f64> = records.iter().filter(|r| r.delta == delta).map(|r| r.spread()).collect();
            SpreadSummary {
                delta,
                bases: s.len(),
                q25: quantile(&s, 0.25),
                median: median(&s),
                q75: quantile(&s, 0.75),
            }
        })
        .collect()
}

/// Green-bracket width `s_plus - s_minus` at depth `n` for every cloud point,
/// ordered by theta. Vertical slopes give `+inf`.
///
/// Periodic clouds cycle their exact tangents; orbit samples iterate the map
/// around each point. Curve samples carry no dynamics and are rejected.
pub fn green_gap_profile<G: GeneratingFunction + ?Sized>(
    gf: &G,
    cloud: &PointCloud,
    n: usize,
) -> Result<Vec<(AnnulusPoint, f64)>> {
    if n == 0 {
        return Err(Error::InvalidInput("depth must be at least 1".into()));
    }
    let mut out = match &cloud.provenance {
        Provenance::CurveSample => return Err(Error::ProvenanceMismatch(cloud.provenance.name())),
        Provenance::PeriodicOrbits(configs) => {
            let mut out = Vec::new();
            for c in configs {
                let tangents = orbit_tangents(gf, c);
                let pts = crate::action::configuration_to_orbit(gf, c)?;
                let gaps = par::map_range(c.q, |i| green_slopes_periodic(&tangents, i, n).width());
                out.extend(pts.iter().map(|p| p.project()).zip(gaps));
            }
            out
        }
        Provenance::OrbitSample => {
            let rows = par::map(&cloud.points, |p| green_slopes(gf, p.lift(), n).map(|g| (*p, g.width())));
            rows.into_iter().collect::<Result<Vec<_>>>()?
        }
    };
    out.sort_by(|a, b| by_theta(&a.0, &b.0));
    Ok(out)
}
