use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use twistlab::action::default_restarts;
use twistlab::greene::residue_of_minimizer;
use twistlab::regularity::{default_deltas, median, spread_profile};
use twistlab::spectral::{green_slopes_periodic, orbit_tangents, residue_scaled};
use twistlab::{
    classify_rate, configuration_to_orbit, distance_series, green_gap_profile, green_slopes, greene_scan,
    lipschitz_graph_check, lyapunov_exponent, minimize_periodic_seeded, monodromy_trace, orbit, par,
    Configuration, GreeneConfig, LiftPoint, PointCloud, ProjectiveSlope, RateConfig, RateKind, ResidueRecord,
    TargetSpec, TwistMap,
};

use crate::args::*;
use crate::output::{emit, num, opt, Csv};
use crate::CliError;

type Res<T> = Result<T, CliError>;

fn usage<T>(msg: impl Into<String>) -> Res<T> {
    Err(CliError::Usage(msg.into()))
}

fn core<T>(what: &str, r: twistlab::Result<T>) -> Res<T> {
    r.map_err(|e| CliError::from_core(what, e))
}

fn build_map(m: &MapArgs) -> Res<TwistMap> {
    if let Some(k) = m.k {
        if !k.is_finite() {
            return usage("k: must be finite");
        }
    }
    match m.map.as_str() {
        "integrable" => Ok(TwistMap::Integrable),
        "standard" => match m.k {
            Some(k) => Ok(TwistMap::standard(k)),
            None => usage("k: required for --map standard"),
        },
        other => usage(format!("map: unknown family '{other}' (expected standard or integrable)")),
    }
}

/// Restart phase offset: 0 for seed 0, otherwise a uniform draw in [0, 1).
pub fn phase_offset(seed: u64) -> f64 {
    if seed == 0 {
        0.0
    } else {
        ChaCha8Rng::seed_from_u64(seed).random::<f64>()
    }
}

fn restarts(r: &RestartArgs, q: usize) -> Res<usize> {
    match r.restarts {
        Some(0) => usage("restarts: must be at least 1"),
        Some(n) => Ok(n),
        None => Ok(default_restarts(q)),
    }
}

fn finite(name: &str, x: f64) -> Res<f64> {
    if x.is_finite() {
        Ok(x)
    } else {
        usage(format!("{name}: must be finite"))
    }
}

fn parse_list(name: &str, s: &str) -> Res<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| match t.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => usage(format!("{name}: bad number '{t}'")),
        })
        .collect()
}

fn parse_orbits(s: &str) -> Res<Vec<(i64, usize)>> {
    let list: Vec<(i64, usize)> = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            let (p, q) = t.split_once('/').ok_or_else(|| CliError::Usage(format!("orbits: expected p/q, got '{t}'")))?;
            let p = p.trim().parse().map_err(|_| CliError::Usage(format!("orbits: bad p in '{t}'")))?;
            let q = q.trim().parse().map_err(|_| CliError::Usage(format!("orbits: bad q in '{t}'")))?;
            Ok((p, q))
        })
        .collect::<Res<_>>()?;
    if list.is_empty() {
        return usage("orbits: empty list");
    }
    Ok(list)
}

fn minimize_all(gf: &TwistMap, orbits: &[(i64, usize)], r: &RestartArgs) -> Res<Vec<Configuration>> {
    let u = phase_offset(r.seed);
    let jobs = orbits.iter().map(|&(p, q)| Ok((p, q, restarts(r, q)?))).collect::<Res<Vec<_>>>()?;
    par::map(&jobs, |&(p, q, n)| {
        core(&format!("minimize {p}/{q}"), minimize_periodic_seeded(gf, p, q, n, u, &[])).map(|(c, _)| c)
    })
    .into_iter()
    .collect()
}

fn slope_text(s: ProjectiveSlope) -> String {
    match s {
        ProjectiveSlope::Finite(x) => num(x),
        ProjectiveSlope::Vertical => "inf".into(),
    }
}

fn residue_header() -> Csv {
    Csv::new(&["p", "q", "trace", "residue", "mean_residue", "lambda_max"])
}

fn residue_cells(r: &ResidueRecord) -> Vec<String> {
    vec![
        r.p.to_string(),
        r.q.to_string(),
        num(r.trace),
        num(r.residue),
        num(r.mean_residue),
        opt(r.lambda_max),
    ]
}

fn json_text(v: &impl serde::Serialize) -> Res<String> {
    serde_json::to_string_pretty(v).map(|s| s + "\n").map_err(|e| CliError::Io(format!("serializing: {e}")))
}

fn emit_opt(path: Option<&Path>, text: impl FnOnce() -> String) -> Res<()> {
    match path {
        Some(p) => emit(Some(p), &text()),
        None => Ok(()),
    }
}

pub fn default_threads(cmd: &Command, cpus: usize) -> usize {
    match cmd {
        Command::Sweep(a) => {
            let cells = a.ks.split(',').filter(|t| !t.trim().is_empty()).count()
                * if a.q.is_some() { 1 } else { a.levels };
            cells.clamp(1, cpus)
        }
        _ => cpus,
    }
}

pub fn dispatch(cmd: &Command) -> Res<()> {
    match cmd {
        Command::Orbit(a) => cmd_orbit(a),
        Command::Minimize(a) => cmd_minimize(a),
        Command::Greene(a) => cmd_greene(a),
        Command::GreenBundles(a) => cmd_green(a),
        Command::Lyapunov(a) => cmd_lyapunov(a),
        Command::Regularity(a) => cmd_regularity(a),
        Command::Rate(a) => cmd_rate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn cmd_orbit(a: &OrbitArgs) -> Res<()> {
    let gf = build_map(&a.map)?;
    let start = LiftPoint::new(finite("x", a.x)?, finite("r", a.r)?);
    let pts = core("orbit", orbit(&gf, start, a.n))?;
    let step = if a.n < 0 { -1 } else { 1 };
    let mut csv = Csv::new(&["n", "x", "r"]);
    for (i, p) in pts.iter().enumerate() {
        csv.row(&[(step * i as i64).to_string(), num(p.x), num(p.r)]);
    }
    emit(a.out.out.as_deref(), &csv.into_string())
}

fn cmd_minimize(a: &MinimizeArgs) -> Res<()> {
    let gf = build_map(&a.map)?;
    let n = restarts(&a.restart, a.q)?;
    let (c, report) = core("minimize", minimize_periodic_seeded(&gf, a.p, a.q, n, phase_offset(a.restart.seed), &[]))?;
    let pts = core("orbit reconstruction", configuration_to_orbit(&gf, &c))?;
    let rec = residue_scaled(core("monodromy", monodromy_trace(&gf, &c))?, c.p, c.q);
    let mut csv = Csv::new(&["j", "theta", "r"]);
    for (j, p) in pts.iter().enumerate() {
        csv.row(&[j.to_string(), num(c.thetas[j]), num(p.r)]);
    }
    emit(a.out.out.as_deref(), &csv.into_string())?;
    emit_opt(a.out.csv.as_deref(), || {
        let mut r = residue_header();
        r.row(&residue_cells(&rec));
        r.into_string()
    })?;
    eprintln!(
        "{}/{}: action {} gradient {:.3e} min eigenvalue {:.6e} residue {}",
        c.p,
        c.q,
        num(report.value),
        report.gradient_inf_norm,
        report.hessian_min_eig,
        num(rec.residue)
    );
    Ok(())
}

fn greene_report(
    gf: &TwistMap,
    omega: &str,
    levels: usize,
    cfg: &GreeneConfig,
) -> Res<twistlab::GreeneReport> {
    if levels == 0 {
        return usage("levels: must be at least 1");
    }
    if cfg.tail_window == 0 {
        return usage("tail-window: must be at least 1");
    }
    let spec = core("omega", TargetSpec::parse(omega)).map_err(|e| match e {
        CliError::Usage(m) => CliError::Usage(format!("omega: {m}")),
        other => other,
    })?;
    let target = core("convergents", spec.resolve(levels))?;
    core("greene scan", greene_scan(gf, &target, cfg))
}

fn cmd_greene(a: &GreeneArgs) -> Res<()> {
    let gf = build_map(&a.map)?;
    if matches!(a.restart.restarts, Some(0)) {
        return usage("restarts: must be at least 1");
    }
    let cfg = GreeneConfig {
        sigma: a.sigma,
        margin: a.margin,
        tail_window: a.tail_window,
        restarts: a.restart.restarts,
        phase_offset: phase_offset(a.restart.seed),
        max_q: a.max_q,
    };
    let report = greene_report(&gf, &a.omega, a.levels, &cfg)?;
    emit(a.out.out.as_deref(), &json_text(&report)?)?;
    emit_opt(a.out.csv.as_deref(), || {
        let mut csv = residue_header();
        for r in &report.records {
            csv.row(&residue_cells(r));
        }
        csv.into_string()
    })
}

fn cmd_green(a: &GreenArgs) -> Res<()> {
    let gf = build_map(&a.map)?;
    if a.depth == 0 {
        return usage("depth: must be at least 1");
    }
    let mut csv = Csv::new(&["j", "theta", "r", "depth", "s_minus", "s_plus", "width"]);
    let mut push = |j: usize, x: f64, r: f64, g: twistlab::GreenPair| {
        csv.row(&[j.to_string(), num(x), num(r), g.depth.to_string(), slope_text(g.s_minus), slope_text(g.s_plus), num(g.width())]);
    };
    match (a.x, a.r, a.p, a.q) {
        (Some(x), Some(r), None, None) => {
            let g = core("green slopes", green_slopes(&gf, LiftPoint::new(finite("x", x)?, finite("r", r)?), a.depth))?;
            push(0, x, r, g);
        }
        (None, None, Some(p), Some(q)) => {
            let c = minimize_all(&gf, &[(p, q)], &a.restart)?.remove(0);
            let pts = core("orbit reconstruction", configuration_to_orbit(&gf, &c))?;
            let tangents = orbit_tangents(&gf, &c);
            let pairs = par::map_range(c.q, |i| green_slopes_periodic(&tangents, i, a.depth));
            for (j, g) in pairs.into_iter().enumerate() {
                push(j, pts[j].x, pts[j].r, g);
            }
        }
        _ => return usage("green-bundles: give either --x and --r, or --p and --q"),
    }
    emit(a.out.out.as_deref(), &csv.into_string())
}

fn cmd_lyapunov(a: &LyapunovArgs) -> Res<()> {
    let gf = build_map(&a.map)?;
    let start = LiftPoint::new(finite("x", a.x)?, finite("r", a.r)?);
    let l = core("lyapunov", lyapunov_exponent(&gf, start, a.n))?;
    let mut csv = Csv::new(&["x", "r", "n", "lyapunov"]);
    csv.row(&[num(a.x), num(a.r), a.n.to_string(), num(l)]);
    emit(a.out.out.as_deref(), &csv.into_string())
}

fn cloud_from(gf: &TwistMap, orbits: Option<&str>, x: Option<f64>, r: Option<f64>, n: usize, ra: &RestartArgs) -> Res<PointCloud> {
    match (orbits, x, r) {
        (Some(list), None, None) => {
            let configs = minimize_all(gf, &parse_orbits(list)?, ra)?;
            core("point cloud", PointCloud::periodic(gf, configs))
        }
        (None, Some(x), Some(r)) => {
            if n == 0 {
                return usage("n: must be at least 1");
            }
            let start = LiftPoint::new(finite("x", x)?, finite("r", r)?);
            let pts = core("orbit", orbit(gf, start, n as i64 - 1))?;
            Ok(PointCloud::orbit(&pts))
        }
        _ => usage("regularity: give either --orbits, or --x and --r"),
    }
}

fn cmd_regularity(a: &RegularityArgs) -> Res<()> {
    let gf = build_map(&a.map)?;
    let deltas = match &a.deltas {
        Some(s) => parse_list("deltas", s)?,
        None => default_deltas(),
    };
    if deltas.is_empty() || deltas.iter().any(|d| *d <= 0.0) {
        return usage("deltas: must be positive");
    }
    if a.depth == 0 {
        return usage("depth: must be at least 1");
    }
    let cloud = cloud_from(&gf, a.orbits.as_deref(), a.x, a.r, a.n, &a.restart)?;
    // unions of symmetric orbits share points on the symmetry line, so a
    // violation is reported rather than fatal
    match lipschitz_graph_check(&cloud) {
        Ok(l) => eprintln!("lipschitz estimate {}", num(l)),
        Err(e @ twistlab::Error::GraphViolation { .. }) => eprintln!("warning: {e}"),
        Err(e) => return Err(CliError::from_core("lipschitz graph check", e)),
    }
    let spreads = spread_profile(&cloud, &deltas);
    let gaps = core("green gap profile", green_gap_profile(&gf, &cloud, a.depth))?;

    let mut csv = Csv::new(&["base_theta", "base_r", "delta", "slope_min", "slope_max", "pair_count"]);
    for s in &spreads {
        csv.row(&[num(s.base.theta), num(s.base.r), num(s.delta), num(s.slope_min), num(s.slope_max), s.pair_count.to_string()]);
    }
    emit(a.out.out.as_deref(), &csv.into_string())?;
    emit_opt(a.out.csv.as_deref(), || {
        let mut csv = Csv::new(&["theta", "r", "green_gap"]);
        for (p, g) in &gaps {
            csv.row(&[num(p.theta), num(p.r), num(*g)]);
        }
        csv.into_string()
    })?;
    let smallest = deltas.iter().copied().fold(f64::INFINITY, f64::min);
    let at_smallest: Vec<f64> =
        spreads.iter().filter(|s| s.delta == smallest && s.pair_count > 0).map(|s| s.spread()).collect();
    let gap_values: Vec<f64> = gaps.iter().map(|g| g.1).collect();
    eprintln!(
        "{} points: median spread at delta {} = {}, median green gap at depth {} = {}",
        cloud.len(),
        num(smallest),
        num(median(&at_smallest)),
        a.depth,
        num(median(&gap_values))
    );
    Ok(())
}

/// Flat JSON form `{kind, rate, slope, epsilon_table, windows}`.
pub fn rate_json(v: &twistlab::RateVerdict) -> Value {
    let (kind, rate) = match v.kind {
        RateKind::Exponential { rate } => ("Exponential", Some(rate)),
        RateKind::SubExponential => ("SubExponential", None),
        RateKind::NotConverging => ("NotConverging", None),
        RateKind::Inconclusive => ("Inconclusive", None),
    };
    json!({
        "kind": kind,
        "rate": rate,
        "slope": v.slope,
        "epsilon_table": v.epsilon_table,
        "windows": [v.windows.0, v.windows.1],
    })
}

fn cmd_rate(a: &RateArgs) -> Res<()> {
    let gf = build_map(&a.map)?;
    let epsilons = parse_list("epsilons", &a.epsilons)?;
    let configs = minimize_all(&gf, &parse_orbits(&a.orbits)?, &a.restart)?;
    let target = core("point cloud", PointCloud::periodic(&gf, configs))?;
    let start = LiftPoint::new(finite("x", a.x)?, finite("r", a.r)?);
    let series = core("distance series", distance_series(&gf, start, &target, a.n))?;
    let cfg = RateConfig { epsilons, ..RateConfig::default() };
    let verdict = core("rate classification", classify_rate(&series.d, &cfg))?;
    emit(a.out.out.as_deref(), &json_text(&rate_json(&verdict))?)?;
    emit_opt(a.out.csv.as_deref(), || {
        let mut csv = Csv::new(&["n", "d_n"]);
        for (i, d) in series.d.iter().enumerate() {
            csv.row(&[i.to_string(), num(*d)]);
        }
        csv.into_string()
    })
}

fn status_code(e: &twistlab::Error) -> &'static str {
    use twistlab::Error as E;
    match e {
        E::RootNotBracketed { .. } => "root_not_bracketed",
        E::NoConvergence { .. } => "no_convergence",
        E::NotCritical { .. } => "not_critical",
        E::RationalTarget { .. } => "rational_target",
        E::GraphViolation { .. } => "graph_violation",
        E::DegenerateSeries { .. } => "degenerate_series",
        E::ProvenanceMismatch(_) => "provenance_mismatch",
        E::InvalidGenerating(_) => "invalid_generating",
        E::InvalidInput(_) => "invalid_input",
    }
}

fn cmd_sweep(a: &SweepArgs) -> Res<()> {
    let ks = parse_list("ks", &a.ks)?;
    let base = MapArgs { map: a.map.clone(), k: Some(0.0) };
    build_map(&base)?;
    let orbits: Vec<(i64, usize)> = match (a.p, a.q) {
        (Some(p), Some(q)) => {
            core("rotation number", Configuration::rigid(p, q, 0.0))?;
            vec![(p, q)]
        }
        (None, None) => {
            if a.levels == 0 {
                return usage("levels: must be at least 1");
            }
            let spec = core("omega", TargetSpec::parse(&a.omega))?;
            let target = core("convergents", spec.resolve(a.levels))?;
            target.convergents.into_iter().filter(|&(_, q)| q <= a.max_q).collect()
        }
        _ => return usage("sweep: give both --p and --q, or neither"),
    };
    if let Some(0) = a.restart.restarts {
        return usage("restarts: must be at least 1");
    }
    let u = phase_offset(a.restart.seed);
    let mut cells: Vec<(f64, i64, usize)> =
        ks.iter().flat_map(|&k| orbits.iter().map(move |&(p, q)| (k, p, q))).collect();
    cells.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.2.cmp(&y.2)));
    let rows = par::map(&cells, |&(k, p, q)| {
        let gf = build_map(&MapArgs { map: a.map.clone(), k: Some(k) }).expect("validated above");
        let n = a.restart.restarts.unwrap_or_else(|| default_restarts(q));
        residue_of_minimizer(&gf, p, q, n, u)
    });
    let mut csv = Csv::new(&["k", "p", "q", "trace", "residue", "mean_residue", "lambda_max", "status"]);
    for (&(k, p, q), row) in cells.iter().zip(rows) {
        let mut cells = vec![num(k), p.to_string(), q.to_string()];
        match row {
            Ok(r) => {
                cells.extend(residue_cells(&r).into_iter().skip(2));
                cells.push("ok".into());
            }
            Err(e) => {
                cells.extend(std::iter::repeat_n(String::new(), 4));
                cells.push(status_code(&e).into());
            }
        }
        csv.row(&cells);
    }
    emit(a.out.out.as_deref(), &csv.into_string())
}
