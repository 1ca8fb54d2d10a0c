//! The plain commands: envelope, operator-eval, check-convexity, dirichlet-1d.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use super::config::Settings;
use super::output::{Check, Sink, Table};
use crate::dirichlet1d::{is_s_convex_on_segment, solve_segment, Field, Profile, SegmentProblem, SegmentReport};
use crate::envelope::{envelope_field, s_concave_envelope, solve_envelope, EnvelopeResult};
use crate::error::{Error, Result};
use crate::geometry::{DirectionSet, Domain, Point};
use crate::kernel::build_quadrature;
use crate::operator::{Evaluator, ExteriorData, GridFunction};

/// What a command reports back besides its files.
#[derive(Debug, Default)]
pub struct Outcome {
    pub checks: Vec<Check>,
    /// `Some(false)` when a solve hit its iteration caps.
    pub converged: Option<bool>,
    pub summary: serde_json::Value,
}

impl Outcome {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

pub(crate) fn solve(settings: &Settings, domain: &Domain, g: &ExteriorData) -> Result<EnvelopeResult> {
    let order = settings.order()?;
    let cfg = settings.solver()?;
    cfg.validate(domain).map_err(|e| Error::Config(e.to_string()))?;
    if settings.bool("concave")? {
        s_concave_envelope(domain, g, order, &cfg)
    } else {
        solve_envelope(domain, g, order, &cfg)
    }
}

pub(crate) fn envelope_summary(r: &EnvelopeResult) -> serde_json::Value {
    let (lo, hi) = r.u.inside_range();
    json!({
        "residual": r.residual,
        "converged": r.converged,
        "sweeps": r.sweeps_used,
        "policy_iterations": r.policy_iterations,
        "inner_iterations": r.inner_iterations,
        "final_change": r.final_change,
        "interior_nodes": r.u.inside_nodes().len(),
        "u_min": lo,
        "u_max": hi,
    })
}

/// One row per lattice node.
pub(crate) fn grid_table(r: &EnvelopeResult, g: &ExteriorData) -> Table {
    let mut t = Table::new(&["i", "j", "x", "y", "inside", "u", "g", "direction"]);
    let lat = r.u.lattice();
    let mut policy = r.policy.iter();
    for idx in 0..lat.len() {
        let (i, j) = lat.coords(idx);
        let p = lat.node_at(idx);
        let inside = r.u.is_inside(idx);
        let dir = if inside { policy.next().map(|&k| r.directions.angle(k)).unwrap_or(f64::NAN) } else { f64::NAN };
        t.push(vec![i as f64, j as f64, p.x, p.y, inside as u8 as f64, r.u.values()[idx], g.eval(&p), dir]);
    }
    t
}

pub fn envelope(settings: &Settings, sink: &mut Sink) -> Result<Outcome> {
    let domain = settings.domain()?;
    let order = settings.order()?;
    let g = settings.datum("g")?.exterior(order, &domain)?;
    let r = solve(settings, &domain, &g)?;
    let table = grid_table(&r, &g);
    sink.csv("envelope.csv", &table)?;
    let cols: &[&str] = if domain.dimension() == 1 { &["x", "u"] } else { &["x", "y", "u"] };
    sink.dat("envelope.dat", &table, cols, Some("j"))?;
    Ok(Outcome {
        checks: vec![Check::flag("converged", r.converged, format!("residual {:.3e}", r.residual))],
        converged: Some(r.converged),
        summary: envelope_summary(&r),
    })
}

/// The function named by `u`: a datum, `g` itself, or the solved envelope.
fn subject(settings: &Settings, domain: &Domain, g: &ExteriorData) -> Result<(Field, Option<EnvelopeResult>)> {
    let order = settings.order()?;
    match settings.get("u") {
        "" => Ok((g.field().clone(), None)),
        "envelope" => {
            let r = solve(settings, domain, g)?;
            Ok((envelope_field(&r, g), Some(r)))
        }
        _ => Ok((settings.datum("u")?.field(order)?, None)),
    }
}

pub(crate) fn random_points(domain: &Domain, count: usize, seed: u64) -> Vec<Point> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| domain.sample_interior(&mut rng)).collect()
}

pub fn operator_eval(settings: &Settings, sink: &mut Sink) -> Result<Outcome> {
    let domain = settings.domain()?;
    let order = settings.order()?;
    let g = settings.datum("g")?.exterior(order, &domain)?;
    let dx = settings.f64("solver.dx")?;
    let (field, solved) = subject(settings, &domain, &g)?;
    let u = match solved {
        Some(r) => r.u,
        None => GridFunction::from_fn(&domain, dx, |p| field(p), &g)?,
    };
    let radius = match settings.f64("operator.radius")? {
        r if r > 0.0 => r,
        _ => domain.diameter(),
    };
    let quad = build_quadrature(order, dx, radius.max(4.0 * dx), settings.operator_normalization()?)?;
    let dirs = DirectionSet::for_domain(&domain, settings.usize("solver.directions")?)?;
    let grid = settings.anisotropy()?;
    let mode = settings.operator_mode()?;
    let points = match settings.get("operator.points") {
        "lattice" => u.inside_nodes().into_iter().map(|i| u.lattice().node_at(i)).collect(),
        _ => random_points(&domain, settings.usize("operator.points")?, settings.u64("operator.seed")?),
    };
    let ev = Evaluator::new(&u, &g, &quad, mode);
    let neg_u = u.negated();
    let neg_g = g.negated();
    let neg = Evaluator::new(&neg_u, &neg_g, &quad, mode);
    let rows: Vec<Result<Vec<f64>>> = points
        .par_iter()
        .map(|p| {
            let vals = ev.directional_all(p, &dirs)?;
            let lam = crate::operator::LambdaValue::from_directional(&vals, &dirs);
            let sup = -neg.lambda_1s(p, &dirs)?.value;
            let ma = if dirs.dimension() == 2 { Some(grid.combine(&vals, &dirs, order)?) } else { None };
            Ok(vec![
                p.x,
                p.y,
                lam.value,
                dirs.angle(lam.argmin),
                sup,
                ma.map_or(f64::NAN, |m| m.value),
                ma.map_or(f64::NAN, |m| m.a),
                ma.map_or(f64::NAN, |m| m.theta),
            ])
        })
        .collect();
    let mut table = Table::new(&["x", "y", "lambda_1s", "argmin_angle", "lambda_ns", "monge_ampere", "ma_a", "ma_theta"]);
    for r in rows {
        table.push(r?);
    }
    sink.csv("operator.csv", &table)?;
    sink.dat("operator.dat", &table, &["x", "y", "lambda_1s"], None)?;
    let finite = table.rows.iter().all(|r| r[2].is_finite() && r[4].is_finite());
    let lam = table.column("lambda_1s").unwrap_or_default();
    Ok(Outcome {
        checks: vec![Check::flag("finite_values", finite, format!("{} points", table.rows.len()))],
        converged: None,
        summary: json!({
            "points": table.rows.len(),
            "lambda_min": lam.iter().copied().fold(f64::INFINITY, f64::min),
            "lambda_max": lam.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }),
    })
}

pub(crate) fn segment_reports(settings: &Settings, domain: &Domain, u: &Field) -> Result<Vec<((Point, Point), SegmentReport)>> {
    let order = settings.order()?;
    let opts = settings.check_options()?;
    let segments = settings.sampling_plan()?.segments(domain);
    let reports: Vec<Result<SegmentReport>> =
        segments.par_iter().map(|(a, b)| is_s_convex_on_segment(u, *a, *b, order, &opts)).collect();
    segments.into_iter().zip(reports).map(|(s, r)| Ok((s, r?))).collect()
}

pub(crate) fn segment_table(reports: &[((Point, Point), SegmentReport)]) -> Table {
    let mut t = Table::new(&["ax", "ay", "bx", "by", "holds", "worst_violation", "location_x", "location_y", "tolerance"]);
    for ((a, b), r) in reports {
        t.push(vec![
            a.x,
            a.y,
            b.x,
            b.y,
            r.holds as u8 as f64,
            r.worst_violation,
            r.location[0],
            r.location[1],
            r.tolerance,
        ]);
    }
    t
}

pub fn check_convexity(settings: &Settings, sink: &mut Sink) -> Result<Outcome> {
    let domain = settings.domain()?;
    let order = settings.order()?;
    let g = settings.datum("g")?.exterior(order, &domain)?;
    let (u, solved) = subject(settings, &domain, &g)?;
    let reports = segment_reports(settings, &domain, &u)?;
    sink.csv("segments.csv", &segment_table(&reports))?;
    let passed = reports.iter().filter(|r| r.1.holds).count();
    let worst = reports.iter().map(|r| r.1.worst_violation).fold(0.0, f64::max);
    let detail = format!("{passed} of {} segments hold", reports.len());
    let mut checks = Vec::new();
    match settings.get("check.expect") {
        "s_convex" => checks.push(Check::flag("s_convex", passed == reports.len(), detail)),
        "not_s_convex" => checks.push(Check::flag("not_s_convex", passed < reports.len(), detail)),
        "none" => {}
        v => return Err(Error::Config(format!("unknown expectation `{v}`"))),
    }
    let converged = solved.as_ref().map(|r| r.converged);
    Ok(Outcome {
        checks,
        converged,
        summary: json!({ "segments": reports.len(), "passed": passed, "worst_violation": worst }),
    })
}

pub fn dirichlet_1d(settings: &Settings, sink: &mut Sink) -> Result<Outcome> {
    let order = settings.order()?;
    let (x, y) = (settings.point("dirichlet.x")?, settings.point("dirichlet.y")?);
    let field = settings.datum("g")?.field(order)?;
    let f = field.clone();
    let profile: Profile = std::sync::Arc::new(move |t| f(x + (y - x) * t));
    let window = settings.f64("dirichlet.window")?;
    let problem = SegmentProblem::on_line(x, y, order, settings.usize("dirichlet.nodes")?, profile.clone())
        .and_then(|p| p.with_window(window))
        .map_err(|e| Error::Config(e.to_string()))?;
    let v = solve_segment(&problem)?;
    let mut table = Table::new(&["t", "x", "y", "v", "g"]);
    for (t, vk) in problem.nodes().into_iter().zip(&v) {
        let p = problem.point_at(t);
        table.push(vec![t, p.x, p.y, *vk, profile(t)]);
    }
    sink.csv("dirichlet.csv", &table)?;
    sink.dat("dirichlet.dat", &table, &["t", "v", "g"], None)?;
    // datum range over the sampled window
    let h = problem.h();
    let m = (window / h).ceil() as i64;
    let n = problem.interior_nodes() as i64;
    let (lo, hi) = (-m..=n + 1 + m)
        .map(|k| profile(k as f64 * h))
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), w| (a.min(w), b.max(w)));
    let slack = 1e-9 * (hi - lo).abs().max(1.0);
    let inside = v.iter().all(|&w| w >= lo - slack && w <= hi + slack);
    let mid = v[v.len() / 2];
    Ok(Outcome {
        checks: vec![Check::flag("maximum_principle", inside, format!("datum range [{lo}, {hi}]"))],
        converged: None,
        summary: json!({ "nodes": v.len(), "h": h, "v_middle_node": mid }),
    })
}
