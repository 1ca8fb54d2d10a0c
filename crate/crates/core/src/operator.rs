//! Directional fractional Laplacians of gridded functions and the operators
//! built from them: `Λ₁ˢ` (infimum over directions), its localized variants,
//! and the anisotropic Monge–Ampère residual.

use std::sync::Arc;

use crate::dirichlet1d::Field;
use crate::error::{Error, Result};
use crate::geometry::{clip_line, connected_component, DirectionSet, Domain, LineSample, NodeKind, Point, Vector};
use crate::kernel::{frac_lap_1d, FractionalOrder, Quadrature1D, TailModel, TailRule};

/// Uniform lattice covering a domain's bounding box with a one-cell margin.
/// Node coordinates are integer multiples of `dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    origin: Point,
    dx: f64,
    nx: usize,
    ny: usize,
}

impl Lattice {
    pub fn covering(domain: &Domain, dx: f64) -> Result<Self> {
        if !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGeometry(format!("lattice spacing {dx} must be positive")));
        }
        let (lo, hi) = domain.bounding_box();
        let i0 = (lo.x / dx).floor() as i64 - 1;
        let i1 = (hi.x / dx).ceil() as i64 + 1;
        let nx = (i1 - i0 + 1) as usize;
        let (j0, ny) = if domain.dimension() == 1 {
            (0, 1)
        } else {
            let j0 = (lo.y / dx).floor() as i64 - 1;
            let j1 = (hi.y / dx).ceil() as i64 + 1;
            (j0, (j1 - j0 + 1) as usize)
        };
        Ok(Self { origin: Point::new(i0 as f64 * dx, j0 as f64 * dx), dx, nx, ny })
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.nx, idx / self.nx)
    }

    pub fn node(&self, i: usize, j: usize) -> Point {
        self.origin + Vector::new(i as f64 * self.dx, j as f64 * self.dx)
    }

    pub fn node_at(&self, idx: usize) -> Point {
        let (i, j) = self.coords(idx);
        self.node(i, j)
    }

    /// Bilinear stencil of `p`: lattice indices and weights of the four
    /// corners. Weights within `1e-12` of a node are snapped.
    pub fn bilinear(&self, p: &Point) -> [(usize, f64); 4] {
        let snap = |f: f64, n: usize| -> (usize, f64) {
            let hi = n.saturating_sub(2);
            let fl = f.floor();
            let (mut i, mut t) = if fl < 0.0 { (0usize, 0.0) } else { (fl as usize, f - fl) };
            if i > hi {
                i = hi;
                t = (f - hi as f64).clamp(0.0, 1.0);
            }
            if t < 1e-12 {
                t = 0.0;
            } else if t > 1.0 - 1e-12 {
                if i < hi || n == 1 {
                    i = (i + 1).min(n - 1);
                    t = 0.0;
                } else {
                    t = 1.0;
                }
            }
            (i, t)
        };
        let (i, tx) = snap((p.x - self.origin.x) / self.dx, self.nx);
        let (j, ty) = snap((p.y - self.origin.y) / self.dx, self.ny);
        let i1 = if tx > 0.0 { i + 1 } else { i };
        let j1 = if ty > 0.0 { j + 1 } else { j };
        [
            (self.index(i, j), (1.0 - tx) * (1.0 - ty)),
            (self.index(i1, j), tx * (1.0 - ty)),
            (self.index(i, j1), (1.0 - tx) * ty),
            (self.index(i1, j1), tx * ty),
        ]
    }
}

/// Bounded exterior datum `g`.
#[derive(Clone)]
pub struct ExteriorData {
    g: Field,
    bound: f64,
}

impl std::fmt::Debug for ExteriorData {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExteriorData").field("bound", &self.bound).finish_non_exhaustive()
    }
}

impl ExteriorData {
    pub fn new(g: Field, bound: f64) -> Result<Self> {
        if !(bound >= 0.0 && bound.is_finite()) {
            return Err(Error::InvalidConfig(format!("exterior bound {bound} must be finite")));
        }
        Ok(Self { g, bound })
    }

    pub fn constant(c: f64) -> Self {
        Self { g: Arc::new(move |_| c), bound: c.abs() }
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn field(&self) -> &Field {
        &self.g
    }

    pub fn eval(&self, p: &Point) -> f64 {
        (self.g)(*p)
    }

    /// Checked evaluation: finite and within the declared bound.
    pub fn eval_checked(&self, p: &Point) -> Result<f64> {
        let v = (self.g)(*p);
        if !v.is_finite() || v.abs() > self.bound * (1.0 + 1e-12) + 1e-300 {
            return Err(Error::InvalidConfig(format!(
                "exterior datum {v} at ({}, {}) exceeds its bound {}",
                p.x, p.y, self.bound
            )));
        }
        Ok(v)
    }

    pub fn negated(&self) -> Self {
        let g = self.g.clone();
        Self { g: Arc::new(move |p| -g(p)), bound: self.bound }
    }
}

/// Values of `u` on a lattice: free values at nodes inside the domain, the
/// exterior datum at the remaining nodes.
#[derive(Debug, Clone)]
pub struct GridFunction {
    domain: Domain,
    lattice: Lattice,
    values: Vec<f64>,
    inside: Vec<bool>,
}

impl GridFunction {
    /// Samples `u` inside the domain and `g` at lattice nodes outside it.
    pub fn from_fn(domain: &Domain, dx: f64, u: impl Fn(Point) -> f64, g: &ExteriorData) -> Result<Self> {
        let lattice = Lattice::covering(domain, dx)?;
        let mut values = Vec::with_capacity(lattice.len());
        let mut inside = Vec::with_capacity(lattice.len());
        for idx in 0..lattice.len() {
            let p = lattice.node_at(idx);
            let inn = domain.contains(&p);
            let v = if inn { u(p) } else { g.eval_checked(&p)? };
            if !v.is_finite() {
                return Err(Error::NonFiniteSample(idx));
            }
            values.push(v);
            inside.push(inn);
        }
        Ok(Self { domain: domain.clone(), lattice, values, inside })
    }

    /// The exterior datum everywhere, including inside the domain.
    pub fn from_exterior(domain: &Domain, dx: f64, g: &ExteriorData) -> Result<Self> {
        Self::from_fn(domain, dx, |p| g.eval(&p), g)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    /// Dense lattice values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn inside_mask(&self) -> &[bool] {
        &self.inside
    }

    pub fn is_inside(&self, idx: usize) -> bool {
        self.inside[idx]
    }

    /// Lattice indices of the nodes inside the domain.
    pub fn inside_nodes(&self) -> Vec<usize> {
        (0..self.values.len()).filter(|&i| self.inside[i]).collect()
    }

    pub fn inside_values(&self) -> Vec<f64> {
        self.inside_nodes().into_iter().map(|i| self.values[i]).collect()
    }

    pub fn set(&mut self, idx: usize, v: f64) {
        debug_assert!(self.inside[idx]);
        self.values[idx] = v;
    }

    /// Bilinear interpolation over the lattice; corners outside the domain
    /// carry the exterior datum.
    pub fn interpolate(&self, p: &Point) -> f64 {
        self.lattice.bilinear(p).iter().map(|&(k, w)| if w == 0.0 { 0.0 } else { w * self.values[k] }).sum()
    }

    /// Bilinear interpolation from inside corners only, renormalized; `None`
    /// when no corner is inside.
    pub fn interpolate_inside(&self, p: &Point) -> Option<f64> {
        let (mut acc, mut mass) = (0.0, 0.0);
        for (k, w) in self.lattice.bilinear(p) {
            if w > 0.0 && self.inside[k] {
                acc += w * self.values[k];
                mass += w;
            }
        }
        (mass > 1e-12).then(|| acc / mass)
    }

    /// `u` inside the domain, `g` outside.
    pub fn evaluate(&self, p: &Point, g: &ExteriorData) -> f64 {
        if self.domain.contains(p) {
            self.interpolate(p)
        } else {
            g.eval(p)
        }
    }

    /// The function `u` inside, `g` outside, as a shareable field.
    pub fn to_field(&self, g: &ExteriorData) -> Field {
        let me = Arc::new(self.clone());
        let g = g.clone();
        Arc::new(move |p| me.evaluate(&p, &g))
    }

    pub fn negated(&self) -> Self {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v = -*v);
        out
    }

    /// Largest and smallest values over the inside nodes.
    pub fn inside_range(&self) -> (f64, f64) {
        self.values
            .iter()
            .zip(&self.inside)
            .filter(|(_, &i)| i)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| (lo.min(v), hi.max(v)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorMode {
    /// Integrate over the whole line with the exterior datum outside.
    #[default]
    Full,
    /// Integrate only where the line is inside the domain.
    LocalizedUnion,
    /// Integrate only over the chord through the evaluation point.
    LocalizedComponent,
}

impl OperatorMode {
    pub fn is_localized(&self) -> bool {
        !matches!(self, OperatorMode::Full)
    }
}

/// Line-window parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LineConfig {
    /// Extra outside nodes sampled past the last inside node (full mode).
    pub margin: usize,
    pub tail_rule: TailRule,
}

impl Default for LineConfig {
    fn default() -> Self {
        Self { margin: 8, tail_rule: TailRule::default() }
    }
}

/// Node offsets `−left..=right` along a line and their classification.
#[derive(Debug, Clone)]
pub(crate) struct LineLayout {
    pub left: usize,
    pub right: usize,
    pub kinds: Vec<NodeKind>,
}

impl LineLayout {
    pub fn kind(&self, k: isize) -> NodeKind {
        self.kinds[(k + self.left as isize) as usize]
    }
}

pub(crate) fn line_layout(
    domain: &Domain,
    x: &Point,
    z: &Vector,
    h: f64,
    mode: OperatorMode,
    margin: usize,
    half_width: usize,
) -> Result<LineLayout> {
    if !domain.contains(x) {
        return Err(Error::OutsideDomain(x.x, x.y));
    }
    let intervals = clip_line(domain, x, z)?;
    let (left, right) = match mode {
        OperatorMode::Full => {
            let hi = intervals.iter().map(|iv| iv.hi).fold(0.0, f64::max);
            let lo = intervals.iter().map(|iv| iv.lo).fold(0.0, f64::min);
            ((-lo / h).floor() as usize + margin.max(1), (hi / h).floor() as usize + margin.max(1))
        }
        _ => (half_width, half_width),
    };
    let component = match mode {
        OperatorMode::LocalizedComponent => Some(connected_component(&intervals)?),
        _ => None,
    };
    let mut kinds = Vec::with_capacity(left + right + 1);
    for k in -(left as isize)..=(right as isize) {
        let t = k as f64 * h;
        let inside = k == 0 || domain.contains(&(x + z * t));
        let kind = match (mode, inside) {
            (_, true) if component.is_some_and(|c| !c.contains(t)) && k != 0 => NodeKind::Excluded,
            (_, true) => NodeKind::Inside,
            (OperatorMode::Full, false) => NodeKind::Outside,
            (_, false) => NodeKind::Excluded,
        };
        kinds.push(kind);
    }
    Ok(LineLayout { left, right, kinds })
}

/// Everything needed to evaluate the operators on one gridded function.
#[derive(Debug, Clone)]
pub struct Evaluator<'a> {
    pub u: &'a GridFunction,
    pub g: &'a ExteriorData,
    pub quad: &'a Quadrature1D,
    pub mode: OperatorMode,
    pub line: LineConfig,
}

impl<'a> Evaluator<'a> {
    pub fn new(u: &'a GridFunction, g: &'a ExteriorData, quad: &'a Quadrature1D, mode: OperatorMode) -> Self {
        Self { u, g, quad, mode, line: LineConfig::default() }
    }

    /// The line sample and tail used for direction `z` at `x`, with the index
    /// of `x` in it.
    pub fn line_sample(&self, x: &Point, z: &Vector) -> Result<(LineSample, usize, TailModel)> {
        let h = self.quad.h();
        let layout = line_layout(
            self.u.domain(),
            x,
            z,
            h,
            self.mode,
            self.line.margin,
            self.quad.half_width(),
        )?;
        let n = layout.kinds.len();
        let mut values = Vec::with_capacity(n);
        let mut kinds = layout.kinds.clone();
        for (j, kind) in layout.kinds.iter().enumerate() {
            let t = (j as isize - layout.left as isize) as f64 * h;
            let p = x + z * t;
            let v = match (kind, self.mode) {
                (NodeKind::Inside, OperatorMode::Full) => self.u.interpolate(&p),
                (NodeKind::Inside, _) => match self.u.interpolate_inside(&p) {
                    Some(v) => v,
                    None => {
                        kinds[j] = NodeKind::Excluded;
                        0.0
                    }
                },
                (NodeKind::Outside, _) => self.g.eval(&p),
                (NodeKind::Excluded, _) => 0.0,
            };
            values.push(v);
        }
        if kinds[layout.left] == NodeKind::Excluded {
            return Err(Error::OutsideDomain(x.x, x.y));
        }
        let tail = match self.mode {
            OperatorMode::Full => {
                let g = self.g.clone();
                let (x, z) = (*x, *z);
                TailModel::from_profile(Arc::new(move |t| g.eval(&(x + z * t))), self.quad.order(), self.line.tail_rule.clone())
            }
            _ => TailModel::None,
        };
        let sample = LineSample::new(*x, *z, h, -(layout.left as f64) * h, values, kinds)?;
        Ok((sample, layout.left, tail))
    }

    pub fn directional(&self, x: &Point, z: &Vector) -> Result<f64> {
        let (sample, idx, tail) = self.line_sample(x, z)?;
        frac_lap_1d(&sample, idx, self.quad, &tail)
    }

    /// Directional values for every direction of the set.
    pub fn directional_all(&self, x: &Point, dirs: &DirectionSet) -> Result<Vec<f64>> {
        dirs.directions().iter().map(|z| self.directional(x, z)).collect()
    }

    pub fn lambda_1s(&self, x: &Point, dirs: &DirectionSet) -> Result<LambdaValue> {
        let vals = self.directional_all(x, dirs)?;
        Ok(LambdaValue::from_directional(&vals, dirs))
    }

    pub fn monge_ampere(&self, x: &Point, dirs: &DirectionSet, grid: &AnisotropyGrid) -> Result<MongeAmpereValue> {
        if dirs.dimension() != 2 {
            return Err(Error::InvalidConfig("the Monge-Ampère residual needs two dimensions".into()));
        }
        let vals = self.directional_all(x, dirs)?;
        grid.combine(&vals, dirs, self.quad.order())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct LambdaValue {
    pub value: f64,
    pub argmin: usize,
    pub direction: [f64; 2],
}

impl LambdaValue {
    /// Minimum of `values`, ties to the smallest index.
    pub fn from_directional(values: &[f64], dirs: &DirectionSet) -> Self {
        let mut best = 0;
        for (k, v) in values.iter().enumerate() {
            if *v < values[best] {
                best = k;
            }
        }
        let z = dirs.directions()[best];
        Self { value: values[best], argmin: best, direction: [z.x, z.y] }
    }
}

/// Directional `Δ₁ˢ` of `u` at `x` along `z`.
pub fn directional_frac_lap(
    u: &GridFunction,
    g: &ExteriorData,
    x: &Point,
    z: &Vector,
    mode: OperatorMode,
    quad: &Quadrature1D,
) -> Result<f64> {
    Evaluator::new(u, g, quad, mode).directional(x, z)
}

/// `Λ₁ˢ u(x)`: the minimum of the directional values over `dirs`.
pub fn lambda_1s(
    u: &GridFunction,
    g: &ExteriorData,
    x: &Point,
    dirs: &DirectionSet,
    mode: OperatorMode,
    quad: &Quadrature1D,
) -> Result<LambdaValue> {
    Evaluator::new(u, g, quad, mode).lambda_1s(x, dirs)
}

/// The concave counterpart `−Λ₁ˢ(−u)`: the maximum of the directional values.
pub fn lambda_ns(
    u: &GridFunction,
    g: &ExteriorData,
    x: &Point,
    dirs: &DirectionSet,
    mode: OperatorMode,
    quad: &Quadrature1D,
) -> Result<LambdaValue> {
    let (nu, ng) = (u.negated(), g.negated());
    let mut v = Evaluator::new(&nu, &ng, quad, mode).lambda_1s(x, dirs)?;
    v.value = -v.value;
    Ok(v)
}

/// Matrices `A = R(θ) diag(a, 1/a) R(−θ)` over a grid of stretches `a` and
/// angles `θ`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnisotropyGrid {
    pub a_max: f64,
    /// Geometric steps between `1` and `a_max`; the grid mirrors them below 1.
    pub steps: usize,
    /// Angles; `None` uses the angles of the direction set.
    pub thetas: Option<Vec<f64>>,
}

impl Default for AnisotropyGrid {
    fn default() -> Self {
        Self { a_max: 100.0, steps: 8, thetas: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MongeAmpereValue {
    pub value: f64,
    pub sign: i8,
    pub a: f64,
    pub theta: f64,
}

impl AnisotropyGrid {
    pub fn new(a_max: f64, steps: usize) -> Result<Self> {
        let g = Self { a_max, steps, thetas: None };
        g.validate()?;
        Ok(g)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a_max >= 1.0 && self.a_max.is_finite()) {
            return Err(Error::InvalidConfig(format!("a_max = {} must be at least 1", self.a_max)));
        }
        Ok(())
    }

    pub fn stretches(&self) -> Vec<f64> {
        if self.steps == 0 || self.a_max == 1.0 {
            return vec![1.0];
        }
        let l = self.a_max.ln();
        let n = self.steps as isize;
        (-n..=n).map(|k| (l * k as f64 / n as f64).exp()).collect()
    }

    /// Weighted angular sum `Σ_z D_z |A⁻¹z|^{-(2+2s)} / M` for one matrix.
    pub fn weighted_sum(values: &[f64], dirs: &DirectionSet, order: FractionalOrder, a: f64, theta: f64) -> f64 {
        let expo = -(2.0 + order.two_s());
        let w_ang = 1.0 / dirs.len() as f64;
        let (st, ct) = theta.sin_cos();
        values
            .iter()
            .zip(dirs.directions())
            .map(|(d, z)| {
                // coordinates of z in the rotated frame
                let c = ct * z.x + st * z.y;
                let s = -st * z.x + ct * z.y;
                let norm2 = c * c / (a * a) + a * a * s * s;
                w_ang * d * norm2.powf(0.5 * expo)
            })
            .sum()
    }

    pub fn combine(&self, values: &[f64], dirs: &DirectionSet, order: FractionalOrder) -> Result<MongeAmpereValue> {
        self.validate()?;
        let thetas: Vec<f64> = match &self.thetas {
            Some(t) => t.clone(),
            None => (0..dirs.len()).map(|k| dirs.angle(k)).collect(),
        };
        let mut best = MongeAmpereValue { value: f64::INFINITY, sign: 0, a: 1.0, theta: 0.0 };
        for a in self.stretches() {
            for &theta in &thetas {
                let v = Self::weighted_sum(values, dirs, order, a, theta);
                if v < best.value {
                    best = MongeAmpereValue { value: v, sign: 0, a, theta };
                }
            }
        }
        best.sign = if best.value > 0.0 {
            1
        } else if best.value < 0.0 {
            -1
        } else {
            0
        };
        Ok(best)
    }
}

/// Minimum over the anisotropy grid of the weighted directional sums.
pub fn monge_ampere_residual(
    u: &GridFunction,
    g: &ExteriorData,
    x: &Point,
    grid: &AnisotropyGrid,
    dirs: &DirectionSet,
    quad: &Quadrature1D,
) -> Result<MongeAmpereValue> {
    grid.validate()?;
    Evaluator::new(u, g, quad, OperatorMode::Full).monge_ampere(x, dirs, grid)
}
