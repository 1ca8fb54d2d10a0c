//! The one-dimensional Dirichlet problem on a segment and the s-convexity
//! test built on it.
//!
//! A segment `[x, y]` is parametrized by `t ↦ x + t (y − x)`; the unknown lives
//! on `(0, 1)` and the datum is prescribed on the rest of the line. The
//! operator is taken in the segment parameter, which only rescales it by a
//! positive factor `|x − y|^{2s}`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{Domain, Point};
use crate::kernel::{build_quadrature, FractionalOrder, Normalization, TailModel, TailRule};

/// A function of the line parameter.
pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A function on the plane (one-dimensional data ignore `y`).
pub type Field = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

const DIRECT_LIMIT: usize = 2048;

#[derive(Clone, Debug)]
pub struct SegmentProblem {
    x: Point,
    y: Point,
    order: FractionalOrder,
    n: usize,
    exterior: ProfileHandle,
    tail: TailModel,
    window: f64,
}

#[derive(Clone)]
struct ProfileHandle(Profile);

impl std::fmt::Debug for ProfileHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Profile(..)")
    }
}

impl SegmentProblem {
    /// Segment problem whose segment must lie in `domain`.
    pub fn new(
        domain: &Domain,
        x: Point,
        y: Point,
        order: FractionalOrder,
        n: usize,
        exterior: Profile,
    ) -> Result<Self> {
        if !domain.contains_segment(&x, &y) {
            return Err(Error::InvalidSegment(format!("segment [{x}, {y}] leaves the domain")));
        }
        Self::on_line(x, y, order, n, exterior)
    }

    /// Segment problem on a bare line, without a domain.
    pub fn on_line(x: Point, y: Point, order: FractionalOrder, n: usize, exterior: Profile) -> Result<Self> {
        if (y - x).norm() == 0.0 {
            return Err(Error::InvalidSegment("segment endpoints coincide".into()));
        }
        if n < 1 {
            return Err(Error::InvalidSegment("need at least one interior node".into()));
        }
        let tail = TailModel::from_profile(exterior.clone(), order, TailRule::default());
        Ok(Self { x, y, order, n, exterior: ProfileHandle(exterior), tail, window: 2.0 })
    }

    /// Replaces the far field beyond the sampled window.
    pub fn with_tail(mut self, tail: TailModel) -> Self {
        self.tail = tail;
        self
    }

    /// Width of the sampled exterior window on each side, in segment parameter.
    pub fn with_window(mut self, window: f64) -> Result<Self> {
        if !(window > 0.0 && window.is_finite()) {
            return Err(Error::InvalidSegment(format!("window {window} must be positive")));
        }
        self.window = window;
        Ok(self)
    }

    pub fn x(&self) -> Point {
        self.x
    }

    pub fn y(&self) -> Point {
        self.y
    }

    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn interior_nodes(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n + 1) as f64
    }

    pub fn window(&self) -> f64 {
        self.window
    }

    pub fn exterior(&self) -> &Profile {
        &self.exterior.0
    }

    pub fn tail(&self) -> &TailModel {
        &self.tail
    }

    /// Parameters `t_k = k h` of the interior nodes.
    pub fn nodes(&self) -> Vec<f64> {
        let h = self.h();
        (1..=self.n).map(|k| k as f64 * h).collect()
    }

    pub fn point_at(&self, t: f64) -> Point {
        self.x + (self.y - self.x) * t
    }

    fn window_nodes(&self) -> usize {
        ((self.window / self.h()).ceil() as usize).max(1)
    }
}

/// Dense system `A v = b` for the interior values.
#[derive(Debug, Clone)]
pub struct SegmentSystem {
    pub matrix: DMatrix<f64>,
    pub rhs: DVector<f64>,
    pub nodes: Vec<f64>,
}

/// Assembles the unnormalized discrete `Δ₁ˢ v = 0` at the interior nodes,
/// written as `mass·v_i − Σ w_ik v_k = Σ w_ij g_j + tail moment`.
pub fn assemble_segment(problem: &SegmentProblem) -> Result<SegmentSystem> {
    let n = problem.n;
    let h = problem.h();
    let order = problem.order;
    let m = problem.window_nodes();
    let reach = ((n + 1 + m) as f64 * h).max(4.0 * h);
    let quad = build_quadrature(order, h, reach, Normalization::Unnormalized)?;
    let g = &problem.exterior.0;
    // exterior nodes: j = -m..=0 and n+1..=n+1+m
    let left: Vec<f64> = (0..=m).map(|k| g(-(k as f64) * h)).collect();
    let right: Vec<f64> = (0..=m).map(|k| g((n + 1 + k) as f64 * h)).collect();
    for (k, v) in left.iter().chain(&right).enumerate() {
        if !v.is_finite() {
            return Err(Error::NonFiniteSample(k));
        }
    }
    let last_left = |i: usize| i + m; // offset of node -m from node i
    let last_right = |i: usize| n + 1 + m - i;
    let mut a = DMatrix::zeros(n, n);
    let mut b = DVector::zeros(n);
    for i in 1..=n {
        let (ll, lr) = (last_left(i), last_right(i));
        let wt = |k: usize, last: usize| if k == last { quad.edge_weight(k) } else { quad.weight(k) };
        let mut mass = 0.0;
        let mut rhs = 0.0;
        for j in 1..=n {
            if j != i {
                let w = wt(i.abs_diff(j), usize::MAX);
                a[(i - 1, j - 1)] = -w;
                mass += w;
            }
        }
        for (k, gv) in left.iter().enumerate() {
            let w = wt(i + k, ll);
            rhs += w * gv;
            mass += w;
        }
        for (k, gv) in right.iter().enumerate() {
            let w = wt(n + 1 + k - i, lr);
            rhs += w * gv;
            mass += w;
        }
        let tc = i as f64 * h;
        let terms = problem.tail.terms(order, tc, ll as f64 * h, lr as f64 * h);
        if !terms.moment.is_finite() {
            return Err(Error::NonFiniteSample(i));
        }
        a[(i - 1, i - 1)] = mass + terms.mass;
        b[i - 1] = rhs + terms.moment;
    }
    Ok(SegmentSystem { matrix: a, rhs: b, nodes: problem.nodes() })
}

/// Interior values of the solution of `Δ₁ˢ v = 0` on `(0, 1)`, `v = g` outside.
pub fn solve_segment(problem: &SegmentProblem) -> Result<Vec<f64>> {
    let sys = assemble_segment(problem)?;
    let v = if problem.n <= DIRECT_LIMIT {
        let chol = sys.matrix.clone().cholesky().ok_or_else(|| {
            Error::SingularSystem("segment matrix is not positive definite".into())
        })?;
        chol.solve(&sys.rhs)
    } else {
        conjugate_gradient(&sys.matrix, &sys.rhs, 1e-13, 10 * problem.n)?
    };
    Ok(v.iter().copied().collect())
}

fn conjugate_gradient(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64, max_iter: usize) -> Result<DVector<f64>> {
    let diag = a.diagonal();
    let mut x = b.component_div(&diag);
    let mut r = b - a * &x;
    let mut z = r.component_div(&diag);
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    let bnorm = b.norm().max(f64::MIN_POSITIVE);
    for _ in 0..max_iter {
        if r.norm() <= tol * bnorm {
            return Ok(x);
        }
        let ap = a * &p;
        let alpha = rz / p.dot(&ap);
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        z = r.component_div(&diag);
        let rz_new = r.dot(&z);
        p = &z + &p * (rz_new / rz);
        rz = rz_new;
    }
    if r.norm() <= 1e-9 * bnorm {
        Ok(x)
    } else {
        Err(Error::SingularSystem("conjugate gradients did not converge".into()))
    }
}

/// Options shared by the segment checkers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckOptions {
    /// Interior nodes per segment.
    pub nodes: usize,
    /// Exterior window in segment parameter.
    pub window: f64,
    /// Fixed tolerance; `None` uses `10·h^{2−2s}·osc(u)`.
    pub tolerance: Option<f64>,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self { nodes: 63, window: 2.0, tolerance: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct SegmentReport {
    pub holds: bool,
    pub worst_violation: f64,
    /// Parameter of the worst node.
    pub location_t: f64,
    pub location: [f64; 2],
    pub tolerance: f64,
}

/// Compares `u` with the solution `v` of the segment problem whose datum is
/// `u` itself; `u` is s-convex along `[x, y]` when `u ≤ v` on `(0, 1)`.
pub fn is_s_convex_on_segment(
    u: &Field,
    x: Point,
    y: Point,
    order: FractionalOrder,
    opts: &CheckOptions,
) -> Result<SegmentReport> {
    let uu = u.clone();
    let profile: Profile = Arc::new(move |t| uu(x + (y - x) * t));
    let problem = SegmentProblem::on_line(x, y, order, opts.nodes, profile.clone())?.with_window(opts.window)?;
    let v = solve_segment(&problem)?;
    let h = problem.h();
    let m = problem.window_nodes() as isize;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for k in -m..=(opts.nodes as isize + 1 + m) {
        let val = profile(k as f64 * h);
        lo = lo.min(val);
        hi = hi.max(val);
    }
    let tol = opts
        .tolerance
        .unwrap_or_else(|| 10.0 * h.powf(2.0 - order.two_s()) * (hi - lo));
    let mut worst = 0.0;
    let mut at = 0.5;
    for (t, vk) in problem.nodes().into_iter().zip(&v) {
        let gap = profile(t) - vk;
        if gap > worst {
            worst = gap;
            at = t;
        }
    }
    let p = problem.point_at(at);
    Ok(SegmentReport {
        holds: worst <= tol,
        worst_violation: worst,
        location_t: at,
        location: [p.x, p.y],
        tolerance: tol,
    })
}

/// Which segments a convexity check visits.
#[derive(Debug, Clone, PartialEq)]
pub enum SamplingPlan {
    /// Random chords with both endpoints in the domain, at least `min_length` apart.
    Random { count: usize, seed: u64, min_length: f64 },
    Explicit(Vec<(Point, Point)>),
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan::Random { count: 200, seed: 42, min_length: 4.0 / 64.0 }
    }
}

impl SamplingPlan {
    pub fn segments(&self, domain: &Domain) -> Vec<(Point, Point)> {
        match self {
            SamplingPlan::Explicit(v) => v.clone(),
            SamplingPlan::Random { count, seed, min_length } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(*count);
                let mut attempts = 0usize;
                while out.len() < *count && attempts < 1000 * count.max(&1) {
                    attempts += 1;
                    let a = domain.sample_interior(&mut rng);
                    let b = domain.sample_interior(&mut rng);
                    if (b - a).norm() >= *min_length && domain.contains_segment(&a, &b) {
                        out.push((a, b));
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvexityReport {
    pub holds: bool,
    pub segments: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub worst_violation: f64,
    pub worst_segment: Option<([f64; 2], [f64; 2])>,
}

/// Runs [`is_s_convex_on_segment`] over a sampling plan, in parallel.
pub fn check_s_convexity(
    u: &Field,
    domain: &Domain,
    order: FractionalOrder,
    plan: &SamplingPlan,
    opts: &CheckOptions,
) -> Result<ConvexityReport> {
    let segments = plan.segments(domain);
    let reports: Vec<Result<SegmentReport>> = segments
        .par_iter()
        .map(|(a, b)| is_s_convex_on_segment(u, *a, *b, order, opts))
        .collect();
    let mut passed = 0;
    let mut worst = 0.0;
    let mut worst_segment = None;
    for (r, (a, b)) in reports.into_iter().zip(&segments) {
        let r = r?;
        if r.holds {
            passed += 1;
        }
        if r.worst_violation > worst || worst_segment.is_none() {
            worst = r.worst_violation.max(worst);
            worst_segment = Some(([a.x, a.y], [b.x, b.y]));
        }
    }
    let count = segments.len();
    Ok(ConvexityReport {
        holds: passed == count,
        segments: count,
        passed,
        pass_rate: if count == 0 { 1.0 } else { passed as f64 / count as f64 },
        worst_violation: worst,
        worst_segment,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn order(s: f64) -> FractionalOrder {
        FractionalOrder::new(s).unwrap()
    }

    fn line(n: usize, s: f64, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> SegmentProblem {
        SegmentProblem::on_line(Point::new(0.0, 0.0), Point::new(1.0, 0.0), order(s), n, Arc::new(g)).unwrap()
    }

    fn bump(t: f64) -> f64 {
        if (2.0..=4.0).contains(&t) {
            (t - 3.0).powi(2)
        } else {
            1.0
        }
    }

    #[test]
    fn constants_are_reproduced() {
        for s in [0.2, 0.5, 0.8] {
            let p = line(40, s, |_| 3.5).with_tail(TailModel::ConstantExterior { left: 3.5, right: 3.5 });
            for v in solve_segment(&p).unwrap() {
                assert!((v - 3.5).abs() < 1e-10, "{s}: {}", v - 3.5);
            }
        }
    }

    #[test]
    fn affine_data_is_harmonic_above_one_half() {
        let p = line(63, 0.75, |t| t).with_tail(TailModel::Affine { slope: 1.0, intercept: 0.0 });
        for (t, v) in p.nodes().iter().zip(solve_segment(&p).unwrap()) {
            assert!((v - t).abs() < 1e-6, "{t}: {v}");
        }
    }

    #[test]
    fn bump_midpoint_drops_below_one() {
        let g = |t: f64| bump(-1.0 + 2.0 * t);
        let p = SegmentProblem::on_line(Point::new(-1.0, 0.0), Point::new(1.0, 0.0), order(0.5), 127, Arc::new(g))
            .unwrap();
        let v = solve_segment(&p).unwrap();
        assert!(v[63] < 1.0 - 1e-3);
    }

    #[test]
    fn rejects_segment_leaving_domain() {
        let d = Domain::canonical_dumbbell();
        let r = SegmentProblem::new(&d, Point::new(-1.5, 0.5), Point::new(1.5, 0.5), order(0.5), 10, Arc::new(|_| 0.0));
        assert!(matches!(r, Err(Error::InvalidSegment(_))));
    }

    #[test]
    fn rejects_non_finite_exterior() {
        let p = line(10, 0.5, |t| if t < -0.5 { f64::NAN } else { 0.0 });
        assert!(matches!(solve_segment(&p), Err(Error::NonFiniteSample(_))));
    }

    #[test]
    fn permuted_solve_agrees() {
        let p = line(50, 0.4, |t| (3.0 * t).sin() + 0.2 * t * t.abs().min(3.0));
        let sys = assemble_segment(&p).unwrap();
        let v = solve_segment(&p).unwrap();
        let n = sys.rhs.len();
        let perm: Vec<usize> = (0..n).map(|i| (i * 17 + 5) % n).collect();
        let pa = DMatrix::from_fn(n, n, |i, j| sys.matrix[(perm[i], perm[j])]);
        let pb = DVector::from_fn(n, |i, _| sys.rhs[perm[i]]);
        let pv = pa.cholesky().unwrap().solve(&pb);
        for i in 0..n {
            assert!((pv[i] - v[perm[i]]).abs() < 1e-12);
        }
    }

    #[test]
    fn conjugate_gradient_matches_cholesky() {
        let p = line(80, 0.3, |t| (5.0 * t).cos());
        let sys = assemble_segment(&p).unwrap();
        let direct = sys.matrix.clone().cholesky().unwrap().solve(&sys.rhs);
        let cg = conjugate_gradient(&sys.matrix, &sys.rhs, 1e-14, 1000).unwrap();
        assert!((direct - cg).amax() < 1e-10);
    }

    #[test]
    fn bump_is_not_s_convex() {
        let u: Field = Arc::new(|p: Point| bump(p.x));
        let r = is_s_convex_on_segment(&u, Point::new(-1.0, 0.0), Point::new(1.0, 0.0), order(0.25), &CheckOptions {
            nodes: 255,
            ..CheckOptions::default()
        })
        .unwrap();
        assert!(!r.holds);
        assert!(r.worst_violation > r.tolerance, "{r:?}");
        eprintln!("{r:?}");
    }

    #[test]
    fn constants_pass_everywhere() {
        let u: Field = Arc::new(|_| 2.0);
        let d = Domain::unit_disk();
        let plan = SamplingPlan::Random { count: 20, seed: 42, min_length: 0.1 };
        let r = check_s_convexity(&u, &d, order(0.5), &plan, &CheckOptions::default()).unwrap();
        assert!(r.holds && r.segments == 20);
        assert!(r.worst_violation < 1e-12);
    }

    fn ordered_data() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (proptest::collection::vec(-2.0f64..2.0, 12), proptest::collection::vec(0.0f64..1.0, 12))
            .prop_map(|(a, d)| {
                let b = a.iter().zip(&d).map(|(x, y)| x + y).collect();
                (a, b)
            })
    }

    fn piecewise(knots: Vec<f64>) -> impl Fn(f64) -> f64 + Send + Sync + 'static {
        // piecewise constant data on [-3, 4], constant beyond
        move |t: f64| {
            let idx = (((t + 3.0) / 7.0 * knots.len() as f64).floor().max(0.0) as usize).min(knots.len() - 1);
            knots[idx]
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn maximum_principle(knots in proptest::collection::vec(-5.0f64..5.0, 10)) {
            let lo = knots.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = knots.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let p = line(31, 0.45, piecewise(knots));
            for v in solve_segment(&p).unwrap() {
                prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
            }
        }

        #[test]
        fn comparison((a, b) in ordered_data()) {
            let va = solve_segment(&line(31, 0.6, piecewise(a))).unwrap();
            let vb = solve_segment(&line(31, 0.6, piecewise(b))).unwrap();
            for (x, y) in va.iter().zip(&vb) {
                prop_assert!(x <= &(y + 1e-12));
            }
        }
    }
}
