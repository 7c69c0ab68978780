//! Convergence-rate classification for orbit-to-set distances.
//!
//! The test statistic for a growth rate `eps` compares `e^{eps n} d_n` over
//! the last window with its values over the first window: a sub-exponential
//! approach makes it diverge for every positive `eps`, an exponential one
//! makes it collapse once `eps` is below the rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::map::{annulus_distance, forward, GeneratingFunction, LiftPoint};
use crate::regularity::PointCloud;

/// Distances `d_k = dist(f^k(start), K)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSeries {
    pub d: Vec<f64>,
    pub start: LiftPoint,
    pub target: String,
}

/// Distances from `n + 1` iterates of `start` to the nearest target point.
pub fn distance_series<G: GeneratingFunction + ?Sized>(
    gf: &G,
    start: LiftPoint,
    target: &PointCloud,
    n: usize,
) -> Result<DistanceSeries> {
    if target.is_empty() {
        return Err(Error::InvalidInput("target set is empty".into()));
    }
    if n < 32 {
        return Err(Error::InvalidInput(format!("distance series needs n >= 32, got {n}")));
    }
    let dist = |p: LiftPoint| {
        let a = p.project();
        target.points.iter().map(|&t| annulus_distance(a, t)).fold(f64::INFINITY, f64::min)
    };
    let mut d = Vec::with_capacity(n + 1);
    let mut p = start;
    d.push(dist(p));
    for _ in 0..n {
        p = forward(gf, p)?;
        d.push(dist(p));
    }
    Ok(DistanceSeries { d, start, target: target.provenance.name().to_string() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateConfig {
    /// Growth rates probed, positive and increasing.
    pub epsilons: Vec<f64>,
    /// Fraction of the series in each comparison window.
    pub window: f64,
    /// Statistic above which `e^{eps n} d_n` counts as diverging.
    pub grow_threshold: f64,
    /// Statistic below which it counts as collapsing.
    pub decay_threshold: f64,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self { epsilons: vec![0.1, 0.3, 0.5], window: 0.25, grow_threshold: 10.0, decay_threshold: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum RateKind {
    Exponential { rate: f64 },
    SubExponential,
    NotConverging,
    /// Decaying, but neither test threshold was met.
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRow {
    pub epsilon: f64,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateVerdict {
    pub kind: RateKind,
    /// Least-squares slope of `ln d_n` over the last half.
    pub slope: f64,
    pub epsilon_table: Vec<EpsilonRow>,
    /// `[first_end, last_start)` bounds of the comparison windows.
    pub windows: (usize, usize),
}

const FLOOR: f64 = 1e-300;

fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Classifies the decay of `d`.
pub fn classify_rate(d: &[f64], cfg: &RateConfig) -> Result<RateVerdict> {
    let n = d.len();
    if n < 32 {
        return Err(Error::InvalidInput(format!("classification needs at least 32 entries, got {n}")));
    }
    if d.iter().any(|x| !(*x >= 0.0)) {
        return Err(Error::InvalidInput("distances must be nonnegative".into()));
    }
    if cfg.epsilons.is_empty()
        || cfg.epsilons.iter().any(|e| !(*e > 0.0))
        || cfg.epsilons.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(Error::InvalidInput("epsilons must be positive and increasing".into()));
    }
    if !(cfg.window > 0.0 && cfg.window <= 0.5) {
        return Err(Error::InvalidInput(format!("window fraction must lie in (0, 0.5], got {}", cfg.window)));
    }
    let mut run = 0;
    let mut longest = 0;
    for &x in d {
        run = if x == 0.0 { run + 1 } else { 0 };
        longest = longest.max(run);
    }
    if longest > n / 2 {
        return Err(Error::DegenerateSeries { zeros: longest, len: n });
    }

    let logs: Vec<f64> = d.iter().map(|&x| x.max(FLOOR).ln()).collect();
    let w = ((n as f64 * cfg.window).floor() as usize).max(1);
    let first = 0..w;
    let last = n - w..n;

    let half = n / 2;
    let xs: Vec<f64> = (half..n).map(|i| i as f64).collect();
    let slope = least_squares_slope(&xs, &logs[half..]);

    let epsilon_table: Vec<EpsilonRow> = cfg
        .epsilons
        .iter()
        .map(|&eps| {
            let weighted = |i: usize| eps * i as f64 + logs[i];
            let late = last.clone().map(weighted).fold(f64::INFINITY, f64::min);
            let early = first.clone().map(weighted).fold(f64::NEG_INFINITY, f64::max);
            EpsilonRow { epsilon: eps, statistic: (late - early).exp() }
        })
        .collect();

    let late_max = last.clone().map(|i| d[i]).fold(f64::NEG_INFINITY, f64::max);
    let early_min = first.clone().map(|i| d[i]).fold(f64::INFINITY, f64::min);
    let kind = if !(late_max < early_min) {
        RateKind::NotConverging
    } else if slope < 0.0 && epsilon_table.iter().any(|r| r.statistic < cfg.decay_threshold) {
        RateKind::Exponential { rate: -slope }
    } else if epsilon_table.iter().all(|r| r.statistic > cfg.grow_threshold) {
        RateKind::SubExponential
    } else {
        RateKind::Inconclusive
    };
    Ok(RateVerdict { kind, slope, epsilon_table, windows: (w, n - w) })
}
