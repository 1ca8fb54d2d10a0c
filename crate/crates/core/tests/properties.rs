//! Invariants of the operator, the envelope solver and the segment solver.

use std::sync::Arc;

use fracenv::dirichlet1d::{check_s_convexity, solve_segment, CheckOptions, SamplingPlan, SegmentProblem};
use fracenv::envelope::{envelope_field, s_concave_envelope, solve_envelope, Accelerator, SolverConfig, SweepOrder};
use fracenv::geometry::{clip_line, DirectionSet, Domain, Point, Vector};
use fracenv::kernel::{build_quadrature, FractionalOrder, Normalization};
use fracenv::operator::{directional_frac_lap, lambda_1s, lambda_ns, ExteriorData, GridFunction, OperatorMode};
use proptest::prelude::*;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn order(s: f64) -> FractionalOrder {
    FractionalOrder::new(s).unwrap()
}

fn config() -> ProptestConfig {
    ProptestConfig { cases: 6, failure_persistence: None, ..ProptestConfig::default() }
}

/// `c + Σ a_k cos(ω_k·x + φ_k)`, bounded by `|c| + Σ|a_k|`.
fn waves(c: f64, modes: &[(f64, f64, f64, f64)]) -> ExteriorData {
    let m = modes.to_vec();
    let bound = c.abs() + m.iter().map(|w| w.0.abs()).sum::<f64>() + 1e-12;
    let f = move |p: Point| c + m.iter().map(|&(a, wx, wy, ph)| a * (wx * p.x + wy * p.y + ph).cos()).sum::<f64>();
    ExteriorData::new(Arc::new(f), bound).unwrap()
}

fn mode() -> impl Strategy<Value = (f64, f64, f64, f64)> {
    (-0.5f64..0.5, -3.0f64..3.0, -3.0f64..3.0, 0.0f64..std::f64::consts::TAU)
}

fn coarse() -> SolverConfig {
    SolverConfig { dx: 1.0 / 8.0, direction_count: 12, tolerance: 1e-11, ..SolverConfig::default() }
}

fn smooth_grid(domain: &Domain, dx: f64, g: &ExteriorData) -> GridFunction {
    GridFunction::from_fn(domain, dx, |p| (1.3 * p.x).sin() * (0.7 * p.y + 0.2).cos() + 0.3 * p.x * p.y, g).unwrap()
}

#[test]
fn lambda_is_the_minimum_and_the_concave_form_the_maximum() {
    let d = Domain::unit_disk();
    let g = waves(0.1, &[(0.4, 1.0, 2.0, 0.3), (0.3, -2.5, 0.5, 1.0)]);
    let dx = 1.0 / 16.0;
    let u = smooth_grid(&d, dx, &g);
    let q = build_quadrature(order(0.4), dx, 2.0, Normalization::Unnormalized).unwrap();
    let dirs = DirectionSet::half_circle(24).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let nodes = u.inside_nodes();
    for _ in 0..100 {
        let x = u.lattice().node_at(nodes[rng.random_range(0..nodes.len())]);
        let vals: Vec<f64> = dirs
            .directions()
            .iter()
            .map(|z| directional_frac_lap(&u, &g, &x, z, OperatorMode::Full, &q).unwrap())
            .collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let l1 = lambda_1s(&u, &g, &x, &dirs, OperatorMode::Full, &q).unwrap();
        let ln = lambda_ns(&u, &g, &x, &dirs, OperatorMode::Full, &q).unwrap();
        assert_eq!(l1.value, lo);
        assert!((ln.value - hi).abs() <= 1e-12 * hi.abs().max(1.0), "{} vs {hi}", ln.value);
        assert!(vals.iter().all(|v| l1.value <= *v));
    }
}

#[test]
fn antipodal_directions_agree() {
    let d = Domain::ellipse(Point::new(0.0, 0.1), 1.2, 0.8).unwrap();
    let g = waves(0.0, &[(0.5, 1.5, -1.0, 0.0)]);
    let dx = 1.0 / 16.0;
    let u = smooth_grid(&d, dx, &g);
    let q = build_quadrature(order(0.6), dx, 2.0, Normalization::Unnormalized).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..50 {
        let x = d.sample_interior(&mut rng);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let z = Vector::new(a.cos(), a.sin());
        for m in [OperatorMode::Full, OperatorMode::LocalizedUnion, OperatorMode::LocalizedComponent] {
            let p = directional_frac_lap(&u, &g, &x, &z, m, &q).unwrap();
            let n = directional_frac_lap(&u, &g, &x, &(-z), m, &q).unwrap();
            assert!((p - n).abs() <= 1e-10 * p.abs().max(1.0), "{m:?}: {p} vs {n}");
        }
    }
}

#[test]
fn kernel_scaling_keeps_sign_and_argmin() {
    let d = Domain::unit_disk();
    let g = waves(0.0, &[(0.5, 2.0, 1.0, 0.4)]);
    let dx = 1.0 / 16.0;
    let u = smooth_grid(&d, dx, &g);
    let s = order(0.35);
    let plain = build_quadrature(s, dx, 2.0, Normalization::Unnormalized).unwrap();
    let scaled = build_quadrature(s, dx, 2.0, Normalization::Normalized).unwrap();
    let dirs = DirectionSet::half_circle(16).unwrap();
    for idx in u.inside_nodes().into_iter().step_by(7) {
        let x = u.lattice().node_at(idx);
        let a = lambda_1s(&u, &g, &x, &dirs, OperatorMode::Full, &plain).unwrap();
        let b = lambda_1s(&u, &g, &x, &dirs, OperatorMode::Full, &scaled).unwrap();
        assert_eq!(a.argmin, b.argmin);
        assert!((b.value - s.c1s() * a.value).abs() <= 1e-10 * a.value.abs().max(1.0));
    }
}

#[test]
fn convex_domains_clip_to_one_interval() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let d = Domain::square(Point::new(0.3, -0.2), 0.8).unwrap();
    for _ in 0..10_000 {
        let x = d.sample_interior(&mut rng);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let z = Vector::new(a.cos(), a.sin());
        let iv = clip_line(&d, &x, &z).unwrap();
        assert_eq!(iv.len(), 1);
        let back = clip_line(&d, &x, &(-z)).unwrap();
        assert!((back[0].lo + iv[0].hi).abs() < 1e-12 && (back[0].hi + iv[0].lo).abs() < 1e-12);
    }
}

#[test]
fn value_iteration_climbs_monotonically() {
    let d = Domain::unit_disk();
    let g = waves(0.0, &[(0.6, 2.0, 0.0, 0.0), (0.3, 0.0, 3.0, 1.0)]);
    let base = SolverConfig { accelerator: Accelerator::None, ..coarse() };
    let mut prev: Option<(Vec<f64>, f64)> = None;
    for sweeps in 1..8 {
        let c = SolverConfig { max_sweeps: sweeps, ..base.clone() };
        let r = solve_envelope(&d, &g, order(0.5), &c).unwrap();
        let vals = r.u.inside_values();
        assert!(vals.iter().all(|v| *v <= 0.9 + 1e-12));
        if let Some((p, change)) = &prev {
            assert!(vals.iter().zip(p).all(|(a, b)| a >= &(b - 1e-14)));
            assert!(r.final_change <= change + 1e-14);
        }
        prev = Some((vals, r.final_change));
    }
}

#[test]
fn gauss_seidel_runs_are_bit_identical() {
    let d = Domain::unit_disk();
    let g = waves(0.2, &[(0.5, 1.0, -2.0, 0.1)]);
    let c = SolverConfig { sweep_order: SweepOrder::GaussSeidelLexicographic, accelerator: Accelerator::None, ..coarse() };
    let a = solve_envelope(&d, &g, order(0.5), &c).unwrap();
    let b = solve_envelope(&d, &g, order(0.5), &c).unwrap();
    assert!(a.converged);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(a.u.values()), bits(b.u.values()));
    assert_eq!(a.sweeps_used, b.sweeps_used);
}

#[test]
fn envelope_is_s_convex_and_a_fixed_point() {
    let d = Domain::unit_disk();
    let g = waves(0.0, &[(0.5, 2.0, 0.5, 0.0), (0.4, -1.0, 2.5, 2.0)]);
    let s = order(0.5);
    let c = SolverConfig { dx: 1.0 / 16.0, direction_count: 16, ..SolverConfig::default() };
    let r = solve_envelope(&d, &g, s, &c).unwrap();
    assert!(r.converged);
    assert!(r.residual <= c.residual_tolerance * 1.8);
    let field = envelope_field(&r, &g);
    let plan = SamplingPlan::Random { count: 30, seed: 9, min_length: 0.25 };
    let report = check_s_convexity(&field, &d, s, &plan, &CheckOptions::default()).unwrap();
    assert!(report.holds, "worst violation {}", report.worst_violation);
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn ordered_data_give_ordered_envelopes(
        modes in prop::collection::vec(mode(), 1..4),
        lift in 0.0f64..0.3,
        extra in mode(),
        s in 0.2f64..0.8,
    ) {
        let d = Domain::unit_disk();
        let g1 = waves(0.0, &modes);
        // g2 = g1 + lift + |a|(1 + cos(...)) ≥ g1
        let bump = (extra.0.abs(), extra.1, extra.2, extra.3);
        let mut m2 = modes.clone();
        m2.push(bump);
        let g2 = waves(lift + bump.0, &m2);
        let r1 = solve_envelope(&d, &g1, order(s), &coarse()).unwrap();
        let r2 = solve_envelope(&d, &g2, order(s), &coarse()).unwrap();
        prop_assert!(r1.converged && r2.converged);
        for i in r1.u.inside_nodes() {
            prop_assert!(r1.u.values()[i] <= r2.u.values()[i] + 1e-9);
        }
    }

    #[test]
    fn concave_envelope_lies_above_convex(modes in prop::collection::vec(mode(), 1..4), s in 0.2f64..0.8) {
        let d = Domain::unit_disk();
        let g = waves(0.0, &modes);
        let lo = solve_envelope(&d, &g, order(s), &coarse()).unwrap();
        let hi = s_concave_envelope(&d, &g, order(s), &coarse()).unwrap();
        for i in lo.u.inside_nodes() {
            prop_assert!(lo.u.values()[i] <= hi.u.values()[i] + 1e-9);
        }
    }

    #[test]
    fn segment_solution_stays_below_its_data_maximum(
        amp in 0.05f64..1.0,
        centre in 0.2f64..0.8,
        s in 0.1f64..0.9,
    ) {
        // g ≤ 1 everywhere with a dip inside the window
        let p = SegmentProblem::on_line(
            Point::new(0.0, 0.0),
            Point::new(1.0, 0.0),
            order(s),
            63,
            Arc::new(move |t| 1.0 - amp * (-(t - centre - 1.2).powi(2) * 20.0).exp()),
        )
        .unwrap();
        let v = solve_segment(&p).unwrap();
        prop_assert!(v.iter().all(|x| *x < 1.0));
    }
}
