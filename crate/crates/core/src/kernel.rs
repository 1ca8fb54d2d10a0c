//! Discretization of the one-dimensional fractional Laplacian
//!
//! ```text
//! Δ₁ˢ w(t) = PV ∫ (w(r) − w(t)) / |r − t|^{1+2s} dr
//! ```
//!
//! on uniformly spaced line samples. The principal value is written in
//! second-difference form; away from the singularity the integrand is
//! reconstructed piecewise linearly between nodes and integrated exactly
//! against `r^{-1-2s}`, while the first cell `[0, h]` pairs the exact moment
//! `∫₀ʰ r^{1-2s} dr` with the discrete second difference. Every weight is
//! nonnegative, so the scheme is monotone in the sampled values.
//!
//! Beyond the sampled window a [`TailModel`] supplies the far field in closed
//! form (constants, affine continuations) or by a mass-mapped Gauss rule of an
//! evaluable datum.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::geometry::{LineSample, NodeKind};

/// The fractional exponent `s ∈ (0, 1)` together with the kernel constants
/// derived from it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalOrder {
    s: f64,
    c1s: f64,
    gamma2s1: f64,
}

impl FractionalOrder {
    pub fn new(s: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0) {
            return Err(Error::InvalidOrder(s));
        }
        let c1s = 4f64.powf(s) * gamma(s + 0.5) / (PI.sqrt() * gamma(-s).abs());
        let gamma2s1 = gamma(2.0 * s + 1.0);
        Ok(Self { s, c1s, gamma2s1 })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    /// `2s`, the decay exponent of the kernel tail.
    pub fn two_s(&self) -> f64 {
        2.0 * self.s
    }

    /// Normalization constant `C(1,s) = 4^s Γ(s+1/2) / (√π |Γ(−s)|)`.
    pub fn c1s(&self) -> f64 {
        self.c1s
    }

    /// `Γ(2s+1)`, the value of the normalized operator on `−(1−t²)₊ˢ` inside `(−1, 1)`.
    pub fn gamma2s1(&self) -> f64 {
        self.gamma2s1
    }

    /// Radius beyond which a bounded tail of oscillation `osc` changes the
    /// operator by less than `tol`: `R = osc · (2s·tol)^{-1/(2s)}`.
    pub fn truncation_radius_for(&self, tol: f64, osc: f64) -> f64 {
        osc.max(1.0) * (2.0 * self.s * tol).powf(-1.0 / (2.0 * self.s))
    }

    /// Kernel mass beyond distance `rho` on one side: `∫_ρ^∞ r^{-1-2s} dr`.
    pub fn tail_mass(&self, rho: f64) -> f64 {
        let p = self.two_s();
        rho.powf(-p) / p
    }
}

impl fmt::Display for FractionalOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s={}", self.s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Multiplied by `C(1,s)`; used for closed-form comparisons.
    Normalized,
    /// Plain kernel `|t|^{-1-2s}`; the zero set is unchanged.
    #[default]
    Unnormalized,
}

/// `∫_a^b r^m dr`, written to keep full relative precision when `b/a → 1`.
fn power_integral(a: f64, b: f64, m: f64) -> f64 {
    let q = m + 1.0;
    let ln = (b / a).ln();
    if q.abs() < 1e-12 {
        ln
    } else {
        a.powf(q) * (q * ln).exp_m1() / q
    }
}

/// Dimensionless hat-function moments on the integer grid (`h = 1`).
fn left_half(k: usize, p: f64) -> f64 {
    if k < 2 {
        return 0.0;
    }
    let a = (k - 1) as f64;
    let b = k as f64;
    (power_integral(a, b, -p) - a * power_integral(a, b, -1.0 - p)).max(0.0)
}

fn right_half(k: usize, p: f64) -> f64 {
    let a = k as f64;
    let b = (k + 1) as f64;
    ((b * power_integral(a, b, -1.0 - p)) - power_integral(a, b, -p)).max(0.0)
}

fn singular_moment(p: f64) -> f64 {
    1.0 / (2.0 - p)
}

/// Near-field weights of the discrete `Δ₁ˢ` on a uniform line grid.
///
/// `weight(k)` multiplies `w(t ± kh) − w(t)` for a node with neighbours on both
/// sides of it; `edge_weight(k)` is used for the last node of a window, where
/// the piecewise-linear reconstruction stops and the tail takes over.
#[derive(Debug, Clone)]
pub struct Quadrature1D {
    order: FractionalOrder,
    h: f64,
    half_width: usize,
    truncation_radius: f64,
    normalization: Normalization,
    scale: f64,
    weights: Vec<f64>,
    edge: Vec<f64>,
}

pub fn build_quadrature(
    order: FractionalOrder,
    h: f64,
    truncation_radius: f64,
    normalization: Normalization,
) -> Result<Quadrature1D> {
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidQuadrature(format!("spacing h = {h} must be positive")));
    }
    if !(truncation_radius >= 4.0 * h) || !truncation_radius.is_finite() {
        return Err(Error::InvalidQuadrature(format!(
            "truncation radius {truncation_radius} is below 4h = {}",
            4.0 * h
        )));
    }
    let half_width = ((truncation_radius / h) + 1e-9).floor() as usize;
    let p = order.two_s();
    let kernel_const = match normalization {
        Normalization::Normalized => order.c1s(),
        Normalization::Unnormalized => 1.0,
    };
    let scale = h.powf(-p) * kernel_const;
    let sigma = singular_moment(p);
    let mut weights = Vec::with_capacity(half_width);
    let mut edge = Vec::with_capacity(half_width);
    for k in 1..=half_width {
        let cell = if k == 1 { sigma } else { 0.0 };
        weights.push(scale * (cell + left_half(k, p) + right_half(k, p)));
        edge.push(scale * (cell + left_half(k, p)));
    }
    Ok(Quadrature1D {
        order,
        h,
        half_width,
        truncation_radius,
        normalization,
        scale,
        weights,
        edge,
    })
}

impl Quadrature1D {
    pub fn order(&self) -> FractionalOrder {
        self.order
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn half_width(&self) -> usize {
        self.half_width
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    pub fn normalization(&self) -> Normalization {
        self.normalization
    }

    /// Factor converting dimensionless moments into weights, `h^{-2s}` times
    /// `C(1,s)` in normalized mode.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Multiplier applied to tail integrals (`C(1,s)` or 1).
    pub fn kernel_constant(&self) -> f64 {
        match self.normalization {
            Normalization::Normalized => self.order.c1s(),
            Normalization::Unnormalized => 1.0,
        }
    }

    /// Interior weights for offsets `1..=half_width`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Weight of offset `k ≥ 1` when the node has a neighbour beyond it.
    pub fn weight(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match self.weights.get(k - 1) {
            Some(w) => *w,
            None => {
                let p = self.order.two_s();
                self.scale * (left_half(k, p) + right_half(k, p))
            }
        }
    }

    /// Weight of offset `k ≥ 1` when it is the last node before the tail.
    pub fn edge_weight(&self, k: usize) -> f64 {
        debug_assert!(k >= 1);
        match self.edge.get(k - 1) {
            Some(w) => *w,
            None => self.scale * left_half(k, self.order.two_s()),
        }
    }

    /// Total kernel mass seen by a node whose window reaches `n_left` and
    /// `n_right` nodes, including the tail beyond the window.
    pub fn total_mass(&self, n_left: usize, n_right: usize) -> f64 {
        let side = |n: usize| -> f64 {
            let near: f64 = (1..n).map(|k| self.weight(k)).sum::<f64>() + self.edge_weight(n);
            near + self.kernel_constant() * self.order.tail_mass(n as f64 * self.h)
        };
        side(n_left) + side(n_right)
    }
}

/// Quadrature rule for far-field integrals `∫_ρ^∞ f(r) r^{-1-2s} dr`.
///
/// The substitution `σ = r^{-2s}` turns the kernel into a uniform measure on
/// `(0, ρ^{-2s}]`; that interval is split into `panels` equal-mass panels with
/// a Gauss–Legendre rule on each, so all weights are positive and constants
/// are integrated exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TailRule {
    panels: usize,
    nodes: Vec<(f64, f64)>,
}

impl TailRule {
    pub fn new(panels: usize, points: usize) -> Self {
        let panels = panels.max(1);
        Self { panels, nodes: gauss_legendre_unit(points.max(1)) }
    }

    pub fn panels(&self) -> usize {
        self.panels
    }

    pub fn points(&self) -> usize {
        self.nodes.len()
    }

    /// Calls `visit(r, weight)` for each node; the weights sum to `ρ^{-p}/p`.
    pub fn for_each_node(&self, rho: f64, p: f64, visit: impl FnMut(f64, f64)) {
        self.scaled(p).for_each_node(rho, visit)
    }

    /// The rule for a fixed exponent, with nodes `r = ρ c_j` and weights
    /// `ρ^{-p} w_j` precomputed.
    pub fn scaled(&self, p: f64) -> ScaledTailRule {
        let mut factors = Vec::with_capacity(self.panels * self.nodes.len());
        let width = 1.0 / self.panels as f64;
        for j in 0..self.panels {
            for &(xi, w) in &self.nodes {
                let sigma = width * (j as f64 + xi);
                factors.push((sigma.powf(-1.0 / p), width * w / p));
            }
        }
        ScaledTailRule { p, factors }
    }
}

/// A [`TailRule`] specialized to one exponent `p = 2s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScaledTailRule {
    p: f64,
    factors: Vec<(f64, f64)>,
}

impl ScaledTailRule {
    pub fn for_each_node(&self, rho: f64, mut visit: impl FnMut(f64, f64)) {
        let mass = rho.powf(-self.p);
        for &(c, w) in &self.factors {
            visit(rho * c, mass * w);
        }
    }
}

impl Default for TailRule {
    fn default() -> Self {
        Self::new(16, 2)
    }
}

/// Gauss–Legendre nodes and weights on `(0, 1)`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    let nf = n as f64;
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pn1 = if n == 1 { 1.0 } else { p0 };
            dp = nf * (x * pn - pn1) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

/// Far-field integral of an evaluable profile, both sides at once:
/// `f(t_center, ρ_left, ρ_right) = ∫_{ρ_r}^∞ w(t_c + r) r^{-1-2s} dr + ∫_{ρ_l}^∞ w(t_c − r) r^{-1-2s} dr`.
pub type FarField = Arc<dyn Fn(f64, f64, f64) -> f64 + Send + Sync>;

/// Far-field moment and kernel mass of a tail: its contribution to `Δ₁ˢ` at a
/// node with value `u` is `moment − mass · u` (both before normalization).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TailTerms {
    pub moment: f64,
    pub mass: f64,
}

/// Description of the sampled function beyond the window.
#[derive(Clone, Default)]
pub enum TailModel {
    /// No far field: the kernel is truncated at the quadrature radius.
    #[default]
    None,
    /// Identically zero beyond the window.
    Zero,
    /// Constant values on each side beyond the window.
    ConstantExterior { left: f64, right: f64 },
    /// `w(t) = slope·t + intercept` beyond the window, `t` the line parameter.
    Affine { slope: f64, intercept: f64 },
    /// Arbitrary far field given by its moments.
    Analytic(FarField),
}

impl fmt::Debug for TailModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailModel::None => write!(f, "None"),
            TailModel::Zero => write!(f, "Zero"),
            TailModel::ConstantExterior { left, right } => {
                write!(f, "ConstantExterior {{ left: {left}, right: {right} }}")
            }
            TailModel::Affine { slope, intercept } => {
                write!(f, "Affine {{ slope: {slope}, intercept: {intercept} }}")
            }
            TailModel::Analytic(_) => write!(f, "Analytic(..)"),
        }
    }
}

impl TailModel {
    /// Tail obtained by integrating an evaluable profile `w(t)` of the line
    /// parameter with a [`TailRule`].
    pub fn from_profile(
        profile: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        order: FractionalOrder,
        rule: TailRule,
    ) -> Self {
        let rule = rule.scaled(order.two_s());
        TailModel::Analytic(Arc::new(move |tc, rho_l, rho_r| {
            let mut acc = 0.0;
            rule.for_each_node(rho_r, |r, w| acc += w * profile(tc + r));
            rule.for_each_node(rho_l, |r, w| acc += w * profile(tc - r));
            acc
        }))
    }

    pub fn is_none(&self) -> bool {
        matches!(self, TailModel::None)
    }

    /// Moment and mass of the far field for a node at parameter `tc` whose
    /// window ends `rho_l` to the left and `rho_r` to the right.
    pub fn terms(&self, order: FractionalOrder, tc: f64, rho_l: f64, rho_r: f64) -> TailTerms {
        let p = order.two_s();
        let (ml, mr) = (order.tail_mass(rho_l), order.tail_mass(rho_r));
        match self {
            TailModel::None => TailTerms::default(),
            TailModel::Zero => TailTerms { moment: 0.0, mass: ml + mr },
            TailModel::ConstantExterior { left, right } => TailTerms {
                moment: left * ml + right * mr,
                mass: ml + mr,
            },
            TailModel::Affine { slope, intercept } => TailTerms {
                moment: (slope * tc + intercept) * (ml + mr)
                    + slope * power_integral(rho_r, rho_l, -p),
                mass: ml + mr,
            },
            TailModel::Analytic(f) => TailTerms { moment: f(tc, rho_l, rho_r), mass: ml + mr },
        }
    }

    /// Contribution `∫_{far} (w(tc ± r) − u) r^{-1-2s} dr`, written so that a
    /// tail equal to `u` gives exactly zero.
    pub fn contribution(
        &self,
        order: FractionalOrder,
        tc: f64,
        u: f64,
        rho_l: f64,
        rho_r: f64,
    ) -> f64 {
        let p = order.two_s();
        let (ml, mr) = (order.tail_mass(rho_l), order.tail_mass(rho_r));
        match self {
            TailModel::None => 0.0,
            TailModel::Zero => -u * (ml + mr),
            TailModel::ConstantExterior { left, right } => (left - u) * ml + (right - u) * mr,
            TailModel::Affine { slope, intercept } => {
                (slope * tc + intercept - u) * (ml + mr) + slope * power_integral(rho_r, rho_l, -p)
            }
            TailModel::Analytic(f) => f(tc, rho_l, rho_r) - u * (ml + mr),
        }
    }
}

/// Which nodes a window evaluation uses on each side of the center, and
/// where the tail starts.
struct Reach {
    left: usize,
    right: usize,
    truncated: bool,
}

fn reach(samples: &LineSample, index: usize, quad: &Quadrature1D, tail: &TailModel) -> Result<Reach> {
    let len = samples.len();
    if index >= len {
        return Err(Error::InvalidQuadrature(format!("index {index} outside window of {len} nodes")));
    }
    if (samples.h() - quad.h()).abs() > 1e-12 * quad.h() {
        return Err(Error::InvalidQuadrature(format!(
            "sample spacing {} differs from quadrature spacing {}",
            samples.h(),
            quad.h()
        )));
    }
    let (left, right) = (index, len - 1 - index);
    if tail.is_none() {
        let k = quad.half_width();
        if left < k || right < k {
            return Err(Error::TooCloseToEdge { index, needed: k });
        }
        Ok(Reach { left: k, right: k, truncated: true })
    } else {
        if left == 0 || right == 0 {
            return Err(Error::TooCloseToEdge { index, needed: 1 });
        }
        Ok(Reach { left, right, truncated: false })
    }
}

fn side_weight(quad: &Quadrature1D, k: usize, last: usize) -> f64 {
    if k == last {
        quad.edge_weight(k)
    } else {
        quad.weight(k)
    }
}

/// Discrete `Δ₁ˢ` at node `index` of a line sample.
///
/// Excluded nodes carry no kernel mass. With [`TailModel::None`] the kernel is
/// truncated at the quadrature radius and the node must have `half_width`
/// neighbours on both sides.
pub fn frac_lap_1d(
    samples: &LineSample,
    index: usize,
    quad: &Quadrature1D,
    tail: &TailModel,
) -> Result<f64> {
    let reach = reach(samples, index, quad, tail)?;
    let values = samples.values();
    let kinds = samples.kinds();
    let uc = values[index];
    if !uc.is_finite() || kinds[index] == NodeKind::Excluded {
        return Err(Error::NonFiniteSample(index));
    }
    let mut acc = 0.0;
    for (n, sign) in [(reach.left, -1isize), (reach.right, 1isize)] {
        for k in 1..=n {
            let j = (index as isize + sign * k as isize) as usize;
            if kinds[j] == NodeKind::Excluded {
                continue;
            }
            let v = values[j];
            if !v.is_finite() {
                return Err(Error::NonFiniteSample(j));
            }
            acc += side_weight(quad, k, n) * (v - uc);
        }
    }
    if !reach.truncated {
        let tc = samples.parameter(index);
        let (rho_l, rho_r) = (reach.left as f64 * quad.h(), reach.right as f64 * quad.h());
        let far = tail.contribution(quad.order(), tc, uc, rho_l, rho_r);
        if !far.is_finite() {
            return Err(Error::NonFiniteSample(index));
        }
        acc += quad.kernel_constant() * far;
    }
    Ok(acc)
}

/// Weighted sum and total mass of a node's stencil, so that
/// `frac_lap_1d = weighted_sum − mass · u(center)` up to rounding. The ratio
/// `weighted_sum / mass` is the nonlocal mean of the neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearForm {
    pub weighted_sum: f64,
    pub mass: f64,
}

impl LinearForm {
    pub fn mean(&self) -> f64 {
        self.weighted_sum / self.mass
    }
}

pub fn linear_form(
    samples: &LineSample,
    index: usize,
    quad: &Quadrature1D,
    tail: &TailModel,
) -> Result<LinearForm> {
    let reach = reach(samples, index, quad, tail)?;
    let values = samples.values();
    let kinds = samples.kinds();
    let (mut sum, mut mass) = (0.0, 0.0);
    for (n, sign) in [(reach.left, -1isize), (reach.right, 1isize)] {
        for k in 1..=n {
            let j = (index as isize + sign * k as isize) as usize;
            if kinds[j] == NodeKind::Excluded {
                continue;
            }
            let v = values[j];
            if !v.is_finite() {
                return Err(Error::NonFiniteSample(j));
            }
            let w = side_weight(quad, k, n);
            sum += w * v;
            mass += w;
        }
    }
    if !reach.truncated {
        let tc = samples.parameter(index);
        let terms = tail.terms(
            quad.order(),
            tc,
            reach.left as f64 * quad.h(),
            reach.right as f64 * quad.h(),
        );
        sum += quad.kernel_constant() * terms.moment;
        mass += quad.kernel_constant() * terms.mass;
    }
    if !(mass > f64::MIN_POSITIVE) {
        return Err(Error::InvalidQuadrature("stencil has no kernel mass".into()));
    }
    Ok(LinearForm { weighted_sum: sum, mass })
}
