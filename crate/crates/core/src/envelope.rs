//! The s-convex envelope: the solution of `Λ₁ˢu = 0` in `Ω`, `u = g` outside.
//!
//! On a lattice node `x` and direction `z` the discrete directional operator is
//! affine in the unknowns,
//!
//! ```text
//! L_z u(x) = S_z(u) + C_z − M_z u(x)
//! ```
//!
//! where `S_z` collects the bilinear samples inside `Ω`, `C_z` the samples of
//! `g` outside together with the far field, and `M_z` the total kernel mass.
//! `Λ₁ˢu = min_z L_z u` is a Bellman operator; it is solved by value iteration
//! on the nonlocal mean form or by policy iteration.

use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{DirectionSet, Domain, NodeKind, Point, Vector};
use crate::kernel::{build_quadrature, linear_form, FractionalOrder, Normalization, Quadrature1D};
use crate::operator::{line_layout, Evaluator, ExteriorData, GridFunction, LineConfig, OperatorMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepOrder {
    #[default]
    Jacobi,
    GaussSeidelLexicographic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Accelerator {
    /// Plain value iteration.
    None,
    /// Howard's algorithm: freeze the minimizing directions, solve the linear
    /// system exactly, update the directions.
    PolicyIteration { max_policies: usize, inner_tolerance: f64, max_inner: usize },
}

impl Default for Accelerator {
    fn default() -> Self {
        Accelerator::PolicyIteration { max_policies: 200, inner_tolerance: 1e-13, max_inner: 5000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Lattice spacing; also the spacing of the line samples.
    pub dx: f64,
    pub direction_count: usize,
    /// Sup-norm change per sweep below which iteration stops, relative to `osc(g)`.
    pub tolerance: f64,
    /// Bound on `|Λ₁ˢu|` at interior nodes, relative to `osc(g)`.
    pub residual_tolerance: f64,
    pub max_sweeps: usize,
    pub sweep_order: SweepOrder,
    pub relaxation: f64,
    pub mode: OperatorMode,
    pub accelerator: Accelerator,
    pub normalization: Normalization,
    pub line: LineConfig,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dx: 1.0 / 32.0,
            direction_count: 64,
            tolerance: 1e-8,
            residual_tolerance: 1e-3,
            max_sweeps: 100_000,
            sweep_order: SweepOrder::Jacobi,
            relaxation: 1.0,
            mode: OperatorMode::Full,
            accelerator: Accelerator::default(),
            normalization: Normalization::Unnormalized,
            line: LineConfig::default(),
        }
    }
}

impl SolverConfig {
    pub fn validate(&self, domain: &Domain) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if !(self.dx > 0.0 && self.dx.is_finite()) {
            return bad(format!("dx = {} must be positive", self.dx));
        }
        if !(self.tolerance > 0.0) {
            return bad(format!("tolerance = {} must be positive", self.tolerance));
        }
        if !(self.residual_tolerance > 0.0) {
            return bad(format!("residual tolerance = {} must be positive", self.residual_tolerance));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return bad(format!("relaxation = {} must lie in (0, 1]", self.relaxation));
        }
        if domain.dimension() == 2 && self.direction_count < 8 {
            return bad(format!("direction count {} is below 8", self.direction_count));
        }
        if self.mode.is_localized() {
            return bad("the envelope solver needs the full operator".into());
        }
        if self.line.margin == 0 {
            return bad("line margin must be at least one node".into());
        }
        if let Accelerator::PolicyIteration { max_policies, inner_tolerance, max_inner } = self.accelerator {
            if max_policies == 0 || max_inner == 0 || !(inner_tolerance > 0.0) {
                return bad("policy iteration needs positive limits".into());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EnvelopeResult {
    pub u: GridFunction,
    /// `max |Λ₁ˢu|` over interior nodes.
    pub residual: f64,
    pub sweeps_used: usize,
    pub policy_iterations: usize,
    pub inner_iterations: usize,
    /// Last sup-norm change between iterates.
    pub final_change: f64,
    pub converged: bool,
    /// Minimizing direction index per interior node, in lattice order.
    pub policy: Vec<usize>,
    pub directions: DirectionSet,
    pub order: FractionalOrder,
}

impl EnvelopeResult {
    pub fn interior_nodes(&self) -> Vec<usize> {
        self.u.inside_nodes()
    }
}

/// Fused kernel-times-bilinear weights of one direction, for offsets `−K..=K`.
#[derive(Debug, Clone)]
struct DirTable {
    reach: isize,
    entries: Vec<Entry>,
}

#[derive(Debug, Clone, Copy)]
struct Entry {
    weights: [f64; 4],
    offsets: [i32; 4],
}

impl DirTable {
    fn entry(&self, k: isize) -> &Entry {
        &self.entries[(k + self.reach) as usize]
    }

    fn run(&self, a: i32, b: i32) -> &[Entry] {
        let r = self.reach as i32;
        &self.entries[(a + r) as usize..=(b + r) as usize]
    }
}

/// Geometry of the discrete operator, independent of the exterior datum.
pub struct Discretization {
    domain: Domain,
    order: FractionalOrder,
    config: SolverConfig,
    quad: Quadrature1D,
    dirs: DirectionSet,
    base: GridFunction,
    nodes: Vec<usize>,
    tables: Vec<DirTable>,
    // per (node, direction), index = node * m + d
    mass: Vec<f64>,
    self_w: Vec<f64>,
    window: Vec<(i32, i32)>,
    range_start: Vec<u32>,
    ranges: Vec<(i32, i32)>,
}

impl std::fmt::Debug for Discretization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Discretization")
            .field("nodes", &self.nodes.len())
            .field("directions", &self.dirs.len())
            .field("order", &self.order)
            .finish_non_exhaustive()
    }
}

struct NodeGeometry {
    mass: Vec<f64>,
    self_w: Vec<f64>,
    window: Vec<(i32, i32)>,
    ranges: Vec<Vec<(i32, i32)>>,
}

impl Discretization {
    pub fn new(domain: &Domain, order: FractionalOrder, config: &SolverConfig) -> Result<Self> {
        config.validate(domain)?;
        let h = config.dx;
        let reach = (domain.diameter() / h).ceil() as isize + config.line.margin as isize + 2;
        let quad = build_quadrature(order, h, (reach as f64 * h).max(4.0 * h), config.normalization)?;
        let dirs = DirectionSet::for_domain(domain, config.direction_count)?;
        let base = GridFunction::from_fn(domain, h, |_| 0.0, &ExteriorData::constant(0.0))?;
        let lattice = base.lattice().clone();
        let nodes = base.inside_nodes();
        if nodes.is_empty() {
            return Err(Error::InvalidGeometry("no lattice node lies inside the domain".into()));
        }
        let nx = lattice.nx() as isize;
        let tables: Vec<DirTable> = dirs
            .directions()
            .iter()
            .map(|z| direction_table(z, reach, nx, lattice.ny() == 1, &quad))
            .collect();
        let m = dirs.len();
        let kc = quad.kernel_constant();
        let per_node: Vec<Result<NodeGeometry>> = nodes
            .par_iter()
            .map(|&idx| {
                let x = lattice.node_at(idx);
                let mut g = NodeGeometry {
                    mass: Vec::with_capacity(m),
                    self_w: Vec::with_capacity(m),
                    window: Vec::with_capacity(m),
                    ranges: Vec::with_capacity(m),
                };
                for (d, z) in dirs.directions().iter().enumerate() {
                    let layout = line_layout(domain, &x, z, h, OperatorMode::Full, config.line.margin, 0)?;
                    let (left, right) = (layout.left as isize, layout.right as isize);
                    let mut mass = 0.0;
                    for k in 1..=left as usize {
                        mass += if k == left as usize { quad.edge_weight(k) } else { quad.weight(k) };
                    }
                    for k in 1..=right as usize {
                        mass += if k == right as usize { quad.edge_weight(k) } else { quad.weight(k) };
                    }
                    mass += kc * (order.tail_mass(left as f64 * h) + order.tail_mass(right as f64 * h));
                    let mut runs = Vec::new();
                    let mut start: Option<isize> = None;
                    for k in -left..=right {
                        let inside = k != 0 && layout.kind(k) == NodeKind::Inside;
                        match (inside, start) {
                            (true, None) => start = Some(k),
                            (false, Some(s)) => {
                                runs.push((s as i32, (k - 1) as i32));
                                start = None;
                            }
                            _ => {}
                        }
                    }
                    if let Some(s) = start {
                        runs.push((s as i32, right as i32));
                    }
                    let table = &tables[d];
                    let mut sw = 0.0;
                    for &(a, b) in &runs {
                        for k in a..=b {
                            let e = table.entry(k as isize);
                            for c in 0..4 {
                                if e.offsets[c] == 0 && e.weights[c] != 0.0 {
                                    sw += e.weights[c];
                                }
                            }
                        }
                    }
                    g.mass.push(mass);
                    g.self_w.push(sw);
                    g.window.push((left as i32, right as i32));
                    g.ranges.push(runs);
                }
                Ok(g)
            })
            .collect();
        let n = nodes.len();
        let mut mass = Vec::with_capacity(n * m);
        let mut self_w = Vec::with_capacity(n * m);
        let mut window = Vec::with_capacity(n * m);
        let mut range_start = Vec::with_capacity(n * m + 1);
        let mut ranges = Vec::new();
        for g in per_node {
            let g = g?;
            mass.extend(g.mass);
            self_w.extend(g.self_w);
            window.extend(g.window);
            for r in g.ranges {
                range_start.push(ranges.len() as u32);
                ranges.extend(r);
            }
        }
        range_start.push(ranges.len() as u32);
        Ok(Self {
            domain: domain.clone(),
            order,
            config: config.clone(),
            quad,
            dirs,
            base,
            nodes,
            tables,
            mass,
            self_w,
            window,
            range_start,
            ranges,
        })
    }

    pub fn quadrature(&self) -> &Quadrature1D {
        &self.quad
    }

    pub fn directions(&self) -> &DirectionSet {
        &self.dirs
    }

    pub fn interior_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// Exterior part `C_z` at every (node, direction): outside samples of `g`
    /// plus the far-field moment, and the min/max of every sampled value of `g`.
    fn exterior_terms(&self, g: &ExteriorData) -> (Vec<f64>, f64, f64) {
        let h = self.config.dx;
        let lattice = self.base.lattice();
        let m = self.dirs.len();
        let kc = self.quad.kernel_constant();
        let rule = self.config.line.tail_rule.scaled(self.order.two_s());
        let per_node: Vec<(Vec<f64>, f64, f64)> = self
            .nodes
            .par_iter()
            .enumerate()
            .map(|(i, &idx)| {
                let x = lattice.node_at(idx);
                let mut out = Vec::with_capacity(m);
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for (d, z) in self.dirs.directions().iter().enumerate() {
                    let key = i * m + d;
                    let (left, right) = self.window[key];
                    let runs = &self.ranges[self.range_start[key] as usize..self.range_start[key + 1] as usize];
                    let mut c = 0.0;
                    let mut visit = |k: i32| {
                        let v = g.eval(&(x + z * (k as f64 * h)));
                        lo = lo.min(v);
                        hi = hi.max(v);
                        let ku = k.unsigned_abs() as usize;
                        let last = if k < 0 { left } else { right } as usize;
                        let w = if ku == last { self.quad.edge_weight(ku) } else { self.quad.weight(ku) };
                        c += w * v;
                    };
                    // complement of the inside runs, skipping the centre
                    let mut k = -left;
                    for &(a, b) in runs {
                        while k < a {
                            if k != 0 {
                                visit(k);
                            }
                            k += 1;
                        }
                        k = b + 1;
                    }
                    while k <= right {
                        if k != 0 {
                            visit(k);
                        }
                        k += 1;
                    }
                    let mut moment = 0.0;
                    let mut tail = |r: f64, w: f64| {
                        let v = g.eval(&(x + z * r));
                        lo = lo.min(v);
                        hi = hi.max(v);
                        moment += w * v;
                    };
                    rule.for_each_node(right as f64 * h, &mut tail);
                    rule.for_each_node(left as f64 * h, |r, w| tail(0.0 - r, w));
                    out.push(c + kc * moment);
                }
                (out, lo, hi)
            })
            .collect();
        let mut c = Vec::with_capacity(self.nodes.len() * m);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (v, l, u) in per_node {
            c.extend(v);
            lo = lo.min(l);
            hi = hi.max(u);
        }
        (c, lo, hi)
    }

    /// `S_z` at node `i`: the inside samples, read from dense lattice values.
    #[inline]
    fn inside_sum(&self, i: usize, d: usize, v: &[f64]) -> f64 {
        let key = i * self.dirs.len() + d;
        let base = self.nodes[i] as isize;
        let table = &self.tables[d];
        let mut s = 0.0;
        for &(a, b) in &self.ranges[self.range_start[key] as usize..self.range_start[key + 1] as usize] {
            for e in table.run(a, b) {
                let (w, o) = (&e.weights, &e.offsets);
                s += w[0] * v[(base + o[0] as isize) as usize]
                    + w[1] * v[(base + o[1] as isize) as usize]
                    + w[2] * v[(base + o[2] as isize) as usize]
                    + w[3] * v[(base + o[3] as isize) as usize];
            }
        }
        s
    }

    /// `L_z u` at node `i`.
    #[inline]
    fn directional(&self, i: usize, d: usize, v: &[f64], c: &[f64]) -> f64 {
        let key = i * self.dirs.len() + d;
        self.inside_sum(i, d, v) + c[key] - self.mass[key] * v[self.nodes[i]]
    }

    /// Minimum over directions and the first minimizing index.
    fn bellman(&self, i: usize, v: &[f64], c: &[f64]) -> (f64, usize) {
        let mut best = (f64::INFINITY, 0);
        for d in 0..self.dirs.len() {
            let l = self.directional(i, d, v, c);
            if l < best.0 {
                best = (l, d);
            }
        }
        best
    }

    /// Value of `u_i` making the smallest nonlocal mean, i.e. the root of
    /// `min_z L_z u = 0` in `u_i` with the other values frozen.
    fn mean_update(&self, i: usize, v: &[f64], c: &[f64]) -> f64 {
        let m = self.dirs.len();
        let ui = v[self.nodes[i]];
        let mut best = f64::INFINITY;
        for d in 0..m {
            let key = i * m + d;
            let sw = self.self_w[key];
            let s_excl = self.inside_sum(i, d, v) - sw * ui;
            let mean = (s_excl + c[key]) / (self.mass[key] - sw);
            best = best.min(mean);
        }
        best
    }

    /// Solves for the envelope of `g`.
    pub fn solve(&self, g: &ExteriorData) -> Result<EnvelopeResult> {
        self.solve_from(g, None)
    }

    /// Solves for the envelope, optionally seeding policy iteration with a
    /// direction per interior node.
    pub fn solve_from(&self, g: &ExteriorData, initial_policy: Option<&[usize]>) -> Result<EnvelopeResult> {
        let lattice = self.base.lattice();
        let mut v: Vec<f64> = Vec::with_capacity(lattice.len());
        let mask = self.base.inside_mask();
        let (mut gmin, mut gmax) = (f64::INFINITY, f64::NEG_INFINITY);
        for (idx, &inside) in mask.iter().enumerate() {
            if inside {
                v.push(0.0);
            } else {
                let val = g.eval_checked(&lattice.node_at(idx))?;
                gmin = gmin.min(val);
                gmax = gmax.max(val);
                v.push(val);
            }
        }
        let (c, lo, hi) = self.exterior_terms(g);
        if !(lo.is_finite() && hi.is_finite()) {
            return Err(Error::NonFiniteSample(0));
        }
        gmin = gmin.min(lo);
        gmax = gmax.max(hi);
        let osc = gmax - gmin;
        let scale = if osc > 0.0 { osc } else { gmax.abs().max(1.0) };
        for &idx in &self.nodes {
            v[idx] = gmin;
        }
        let change_tol = self.config.tolerance * scale;
        let residual_tol = self.config.residual_tolerance * scale;
        let mut stats = Stats::default();
        let (residual, policy) = match self.config.accelerator {
            Accelerator::None => {
                self.value_iteration(&mut v, &c, change_tol, residual_tol, &mut stats);
                self.bellman_all(&v, &c)
            }
            Accelerator::PolicyIteration { max_policies, inner_tolerance, max_inner } => self.policy_iteration(
                &mut v,
                &c,
                PolicyLimits { max_policies, inner_tolerance, max_inner, scale, residual_tol },
                initial_policy,
                &mut stats,
            )?,
        };
        let mut u = self.base.clone();
        u.values_mut().copy_from_slice(&v);
        Ok(EnvelopeResult {
            u,
            residual,
            sweeps_used: stats.sweeps,
            policy_iterations: stats.policies,
            inner_iterations: stats.inner,
            final_change: stats.change,
            converged: stats.converged && residual <= residual_tol,
            policy,
            directions: self.dirs.clone(),
            order: self.order,
        })
    }

    /// `max |Λ₁ˢu|` and the minimizing directions.
    fn bellman_all(&self, v: &[f64], c: &[f64]) -> (f64, Vec<usize>) {
        let evals: Vec<(f64, usize)> = (0..self.nodes.len()).into_par_iter().map(|i| self.bellman(i, v, c)).collect();
        let residual = evals.iter().map(|e| e.0.abs()).fold(0.0, f64::max);
        (residual, evals.into_iter().map(|e| e.1).collect())
    }

    fn value_iteration(&self, v: &mut [f64], c: &[f64], change_tol: f64, residual_tol: f64, stats: &mut Stats) {
        let omega = self.config.relaxation;
        let n = self.nodes.len();
        while stats.sweeps < self.config.max_sweeps {
            stats.sweeps += 1;
            let mut change: f64 = 0.0;
            match self.config.sweep_order {
                SweepOrder::Jacobi => {
                    let next: Vec<f64> = (0..n)
                        .into_par_iter()
                        .map(|i| {
                            let old = v[self.nodes[i]];
                            (1.0 - omega) * old + omega * self.mean_update(i, v, c)
                        })
                        .collect();
                    for (i, nv) in next.into_iter().enumerate() {
                        let idx = self.nodes[i];
                        change = change.max((nv - v[idx]).abs());
                        v[idx] = nv;
                    }
                }
                SweepOrder::GaussSeidelLexicographic => {
                    for i in 0..n {
                        let idx = self.nodes[i];
                        let nv = (1.0 - omega) * v[idx] + omega * self.mean_update(i, v, c);
                        change = change.max((nv - v[idx]).abs());
                        v[idx] = nv;
                    }
                }
            }
            stats.change = change;
            if change < change_tol {
                let res = (0..n).into_par_iter().map(|i| self.bellman(i, v, c).0.abs()).reduce(|| 0.0, f64::max);
                if res <= residual_tol {
                    stats.converged = true;
                    return;
                }
            }
        }
    }

    fn policy_iteration(
        &self,
        v: &mut [f64],
        c: &[f64],
        limits: PolicyLimits,
        initial: Option<&[usize]>,
        stats: &mut Stats,
    ) -> Result<(f64, Vec<usize>)> {
        let n = self.nodes.len();
        let start: Vec<(f64, usize)> = (0..n).into_par_iter().map(|i| self.bellman(i, v, c)).collect();
        let mut policy: Vec<usize> = match initial {
            Some(p) if p.len() == n && p.iter().all(|&d| d < self.dirs.len()) => p.to_vec(),
            Some(_) => return Err(Error::InvalidConfig("initial policy does not match the interior nodes".into())),
            None => start.iter().map(|e| e.1).collect(),
        };
        let max_mass = self.mass.iter().copied().fold(0.0, f64::max);
        let tight = limits.inner_tolerance * max_mass * limits.scale;
        // inexact solves while the policy still moves, exact once it settles
        let mut residual = start.iter().map(|e| e.0.abs()).fold(0.0, f64::max);
        let mut loose = true;
        let mut scratch = vec![0.0; v.len()];
        loop {
            stats.policies += 1;
            let tol = if loose { tight.max(1e-2 * residual) } else { tight };
            let before: Vec<f64> = self.nodes.iter().map(|&i| v[i]).collect();
            stats.inner += self.solve_policy(&policy, v, c, tol, limits.max_inner, &mut scratch);
            stats.change = self.nodes.iter().zip(&before).map(|(&i, b)| (v[i] - b).abs()).fold(0.0, f64::max);
            // improvement step; ties keep the current direction
            let evals: Vec<(f64, usize, f64)> = (0..n)
                .into_par_iter()
                .map(|i| {
                    let (best, d) = self.bellman(i, v, c);
                    let cur = self.directional(i, policy[i], v, c);
                    (best, d, cur)
                })
                .collect();
            let mut changed = 0usize;
            residual = 0.0;
            let mut argmin = Vec::with_capacity(n);
            for (i, (best, d, cur)) in evals.into_iter().enumerate() {
                residual = residual.max(best.abs());
                argmin.push(d);
                let slack = 1e-12 * self.mass[i * self.dirs.len() + d] * limits.scale;
                if best < cur - slack {
                    policy[i] = d;
                    changed += 1;
                }
            }
            if changed == 0 && tol <= tight {
                stats.converged = residual <= limits.residual_tol;
                return Ok((residual, argmin));
            }
            if changed == 0 {
                loose = false;
            }
            if stats.policies >= limits.max_policies {
                return Ok((residual, argmin));
            }
        }
    }

    /// `y = A x` for the frozen policy, where `A x_i = (M − self) x_i − S_excl(x)`
    /// with zero exterior values.
    fn apply_policy(&self, policy: &[usize], x: &[f64], dense: &mut [f64], y: &mut [f64]) {
        let m = self.dirs.len();
        for (i, &idx) in self.nodes.iter().enumerate() {
            dense[idx] = x[i];
        }
        let dense = &*dense;
        y.par_iter_mut().enumerate().for_each(|(i, yi)| {
            let d = policy[i];
            let key = i * m + d;
            *yi = self.mass[key] * x[i] - self.inside_sum(i, d, dense);
        });
    }

    /// Solves `L_π u = 0` by BiCGSTAB with a Jacobi preconditioner, warm
    /// started from `v`; returns the iteration count.
    fn solve_policy(
        &self,
        policy: &[usize],
        v: &mut [f64],
        c: &[f64],
        tol: f64,
        max_iter: usize,
        scratch: &mut [f64],
    ) -> usize {
        let n = self.nodes.len();
        let m = self.dirs.len();
        // right-hand side: C plus the exterior corners of the inside samples
        let inside = self.base.inside_mask();
        for (k, s) in scratch.iter_mut().enumerate() {
            *s = if inside[k] { 0.0 } else { v[k] };
        }
        let b: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let d = policy[i];
                c[i * m + d] + self.inside_sum(i, d, scratch)
            })
            .collect();
        scratch.iter_mut().for_each(|s| *s = 0.0);
        let diag: Vec<f64> = (0..n).map(|i| self.mass[i * m + policy[i]] - self.self_w[i * m + policy[i]]).collect();
        let mut x: Vec<f64> = self.nodes.iter().map(|&i| v[i]).collect();
        let mut ax = vec![0.0; n];
        self.apply_policy(policy, &x, scratch, &mut ax);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let r_hat = r.clone();
        let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
        let mut p = vec![0.0; n];
        let mut vv = vec![0.0; n];
        let mut y = vec![0.0; n];
        let mut s = vec![0.0; n];
        let mut zz = vec![0.0; n];
        let mut t = vec![0.0; n];
        let norm_inf = |a: &[f64]| a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
        let mut iters = 0;
        while iters < max_iter && norm_inf(&r) > tol {
            iters += 1;
            let rho_new = dot(&r_hat, &r);
            if rho_new == 0.0 || omega == 0.0 {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            rho = rho_new;
            for i in 0..n {
                p[i] = r[i] + beta * (p[i] - omega * vv[i]);
                y[i] = p[i] / diag[i];
            }
            self.apply_policy(policy, &y, scratch, &mut vv);
            let denom = dot(&r_hat, &vv);
            if denom == 0.0 {
                break;
            }
            alpha = rho / denom;
            for i in 0..n {
                s[i] = r[i] - alpha * vv[i];
            }
            if norm_inf(&s) <= tol {
                for i in 0..n {
                    x[i] += alpha * y[i];
                }
                r.copy_from_slice(&s);
                break;
            }
            for i in 0..n {
                zz[i] = s[i] / diag[i];
            }
            self.apply_policy(policy, &zz, scratch, &mut t);
            let tt = dot(&t, &t);
            omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
            for i in 0..n {
                x[i] += alpha * y[i] + omega * zz[i];
                r[i] = s[i] - omega * t[i];
            }
            if iters % 50 == 0 {
                // refresh the recursive residual
                self.apply_policy(policy, &x, scratch, &mut ax);
                for i in 0..n {
                    r[i] = b[i] - ax[i];
                }
            }
        }
        for (i, &idx) in self.nodes.iter().enumerate() {
            v[idx] = x[i];
        }
        iters
    }
}

#[derive(Debug, Default)]
struct Stats {
    sweeps: usize,
    policies: usize,
    inner: usize,
    change: f64,
    converged: bool,
}

#[derive(Debug, Clone, Copy)]
struct PolicyLimits {
    max_policies: usize,
    inner_tolerance: f64,
    max_inner: usize,
    scale: f64,
    residual_tol: f64,
}

fn direction_table(z: &Vector, reach: isize, nx: isize, one_d: bool, quad: &Quadrature1D) -> DirTable {
    let snap = |f: f64| -> (isize, f64) {
        let fl = f.floor();
        let t = f - fl;
        if t < 1e-12 {
            (fl as isize, 0.0)
        } else if t > 1.0 - 1e-12 {
            (fl as isize + 1, 0.0)
        } else {
            (fl as isize, t)
        }
    };
    let entries = (-reach..=reach)
        .map(|k| {
            if k == 0 {
                return Entry { weights: [0.0; 4], offsets: [0; 4] };
            }
            let (bx, tx) = snap(k as f64 * z.x);
            let (by, ty) = if one_d { (0, 0.0) } else { snap(k as f64 * z.y) };
            let w = quad.weight(k.unsigned_abs());
            let base = bx + by * nx;
            let bil = [(1.0 - tx) * (1.0 - ty), tx * (1.0 - ty), (1.0 - tx) * ty, tx * ty];
            let corner = [base, base + 1, base + nx, base + nx + 1];
            // zero-weight corners point at the base corner so they never leave the lattice
            let mut e = Entry { weights: [0.0; 4], offsets: [base as i32; 4] };
            for c in 0..4 {
                if bil[c] != 0.0 {
                    e.offsets[c] = corner[c] as i32;
                    e.weights[c] = w * bil[c];
                }
            }
            e
        })
        .collect();
    DirTable { reach, entries }
}

/// Solution of `Λ₁ˢu = 0` in `Ω` with `u = g` outside.
pub fn solve_envelope(
    domain: &Domain,
    g: &ExteriorData,
    order: FractionalOrder,
    config: &SolverConfig,
) -> Result<EnvelopeResult> {
    Discretization::new(domain, order, config)?.solve(g)
}

/// The s-concave envelope, `−(s-convex envelope of −g)`.
pub fn s_concave_envelope(
    domain: &Domain,
    g: &ExteriorData,
    order: FractionalOrder,
    config: &SolverConfig,
) -> Result<EnvelopeResult> {
    let mut r = solve_envelope(domain, &g.negated(), order, config)?;
    r.u = r.u.negated();
    Ok(r)
}

/// The value at `x` making the directional operator along `z` vanish with all
/// other samples frozen: a convex combination of the line samples and the
/// far field.
pub fn nonlocal_mean_update(
    u: &GridFunction,
    g: &ExteriorData,
    x: &Point,
    z: &Vector,
    quad: &Quadrature1D,
) -> Result<f64> {
    let ev = Evaluator::new(u, g, quad, OperatorMode::Full);
    let (sample, idx, tail) = ev.line_sample(x, z)?;
    Ok(linear_form(&sample, idx, quad, &tail)?.mean())
}

/// Lower convex hull of planar samples, as a piecewise-linear function.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct LowerHull {
    pub vertices: Vec<(f64, f64)>,
}

impl LowerHull {
    /// Piecewise-linear interpolation between hull vertices; constant beyond.
    pub fn eval(&self, x: f64) -> f64 {
        let v = &self.vertices;
        if x <= v[0].0 {
            return v[0].1;
        }
        let j = v.partition_point(|p| p.0 < x);
        if j >= v.len() {
            return v[v.len() - 1].1;
        }
        let (a, b) = (v[j - 1], v[j]);
        if b.0 == a.0 {
            return a.1.min(b.1);
        }
        a.1 + (b.1 - a.1) * (x - a.0) / (b.0 - a.0)
    }
}

/// Classical convex envelope of one-dimensional samples by a monotone chain.
pub fn classical_convex_envelope_1d(xs: &[f64], ys: &[f64]) -> Result<LowerHull> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidConfig("abscissae and values differ in length".into()));
    }
    if xs.len() < 2 {
        return Err(Error::TooFewPoints(xs.len()));
    }
    let mut pts: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    if pts.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return Err(Error::NonFiniteSample(0));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    pts.dedup_by(|b, a| a.0 == b.0);
    let mut hull: Vec<(f64, f64)> = Vec::with_capacity(pts.len());
    for p in pts {
        while hull.len() >= 2 {
            let (a, b) = (hull[hull.len() - 2], hull[hull.len() - 1]);
            let cross = (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0);
            if cross <= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(p);
    }
    Ok(LowerHull { vertices: hull })
}

/// The envelope as an evaluable field (`u` inside, `g` outside).
pub fn envelope_field(result: &EnvelopeResult, g: &ExteriorData) -> crate::dirichlet1d::Field {
    result.u.to_field(g)
}

/// Convenience for one-dimensional data given as a function of `x`.
pub fn exterior_1d(f: impl Fn(f64) -> f64 + Send + Sync + 'static, bound: f64) -> Result<ExteriorData> {
    ExteriorData::new(Arc::new(move |p: Point| f(p.x)), bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operator::lambda_1s;

    fn order(s: f64) -> FractionalOrder {
        FractionalOrder::new(s).unwrap()
    }

    fn cfg(dx: f64, dirs: usize) -> SolverConfig {
        SolverConfig { dx, direction_count: dirs, ..SolverConfig::default() }
    }

    #[test]
    fn constants_are_fixed_points() {
        let d = Domain::unit_disk();
        let g = ExteriorData::constant(0.7);
        for acc in [Accelerator::None, Accelerator::default()] {
            let c = SolverConfig { accelerator: acc, ..cfg(1.0 / 16.0, 16) };
            let r = solve_envelope(&d, &g, order(0.5), &c).unwrap();
            assert!(r.residual < 1e-10);
            for i in r.u.inside_nodes() {
                assert!((r.u.values()[i] - 0.7).abs() < 1e-12);
            }
            if acc == Accelerator::None {
                assert_eq!(r.sweeps_used, 1);
            }
        }
    }

    #[test]
    fn rejects_bad_configs() {
        let d = Domain::unit_disk();
        let bad = [
            SolverConfig { relaxation: 0.0, ..cfg(0.1, 16) },
            SolverConfig { tolerance: 0.0, ..cfg(0.1, 16) },
            SolverConfig { direction_count: 4, ..cfg(0.1, 16) },
            SolverConfig { mode: OperatorMode::LocalizedUnion, ..cfg(0.1, 16) },
        ];
        for c in bad {
            assert!(matches!(Discretization::new(&d, order(0.5), &c), Err(Error::InvalidConfig(_))));
        }
    }

    fn wavy() -> ExteriorData {
        ExteriorData::new(Arc::new(|p: Point| (2.0 * p.x).sin() + 0.5 * (3.0 * p.y).cos()), 1.5).unwrap()
    }

    #[test]
    fn value_and_policy_iteration_agree() {
        let d = Domain::unit_disk();
        let g = wavy();
        let base = SolverConfig { tolerance: 1e-12, ..cfg(1.0 / 8.0, 8) };
        let disc = Discretization::new(&d, order(0.5), &base).unwrap();
        let pi = disc.solve(&g).unwrap();
        assert!(pi.converged, "{} {}", pi.residual, pi.policy_iterations);
        for order_kind in [SweepOrder::Jacobi, SweepOrder::GaussSeidelLexicographic] {
            let c = SolverConfig { accelerator: Accelerator::None, sweep_order: order_kind, ..base.clone() };
            let vi = solve_envelope(&d, &g, order(0.5), &c).unwrap();
            assert!(vi.converged);
            for i in pi.u.inside_nodes() {
                assert!((pi.u.values()[i] - vi.u.values()[i]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn residual_matches_operator_path() {
        let d = Domain::ellipse(Point::new(0.1, 0.0), 1.0, 0.7).unwrap();
        let g = wavy();
        let c = cfg(1.0 / 16.0, 12);
        let disc = Discretization::new(&d, order(0.4), &c).unwrap();
        let r = disc.solve(&g).unwrap();
        // evaluate at a non-solution too, so the comparison is not all zeros
        let mut w = r.u.clone();
        for (k, i) in w.inside_nodes().into_iter().enumerate() {
            w.values_mut()[i] += 0.01 * ((k % 7) as f64 - 3.0);
        }
        let (cterms, _, _) = disc.exterior_terms(&g);
        for (i, &idx) in disc.nodes.iter().enumerate().step_by(5) {
            let x = w.lattice().node_at(idx);
            let api = lambda_1s(&w, &g, &x, disc.directions(), OperatorMode::Full, disc.quadrature()).unwrap();
            let (fast, arg) = disc.bellman(i, w.values(), &cterms);
            assert!((api.value - fast).abs() < 1e-9 * fast.abs().max(1.0), "{} vs {fast}", api.value);
            assert_eq!(api.argmin, arg);
        }
    }

    #[test]
    fn envelope_lies_between_bounds_and_below_g() {
        let d = Domain::unit_disk();
        let g = wavy();
        let r = solve_envelope(&d, &g, order(0.3), &cfg(1.0 / 16.0, 16)).unwrap();
        assert!(r.converged);
        for i in r.u.inside_nodes() {
            let v = r.u.values()[i];
            assert!((-1.5..=1.5).contains(&v));
            // g itself is a supersolution candidate only when s-convex, so just check bounds
        }
    }

    #[test]
    fn concave_is_negated_convex() {
        let d = Domain::unit_disk();
        let g = wavy();
        let c = cfg(1.0 / 8.0, 8);
        let a = s_concave_envelope(&d, &g, order(0.5), &c).unwrap();
        let b = solve_envelope(&d, &g.negated(), order(0.5), &c).unwrap();
        for i in a.u.inside_nodes() {
            assert_eq!(a.u.values()[i], -b.u.values()[i]);
        }
    }

    #[test]
    fn one_dimensional_envelope_of_constant_plus_bump() {
        let d = Domain::interval(0.0, 1.0).unwrap();
        let g = exterior_1d(
            |t| {
                let r = (t - 1.5) / 0.4;
                if r.abs() < 1.0 {
                    1.0 + (1.0 - 1.0 / (1.0 - r * r)).exp()
                } else {
                    1.0
                }
            },
            2.0,
        )
        .unwrap();
        let r = solve_envelope(&d, &g, order(0.5), &cfg(1.0 / 64.0, 8)).unwrap();
        assert!(r.converged);
        for i in r.u.inside_nodes() {
            assert!(r.u.values()[i] > 1.0);
        }
    }

    #[test]
    fn nonlocal_mean_of_constants() {
        let d = Domain::unit_disk();
        let g = ExteriorData::constant(2.0);
        let u = GridFunction::from_fn(&d, 0.1, |_| 2.0, &g).unwrap();
        let q = build_quadrature(order(0.5), 0.1, 3.0, Normalization::Unnormalized).unwrap();
        let v = nonlocal_mean_update(&u, &g, &Point::new(0.2, 0.1), &Vector::new(0.6, 0.8), &q).unwrap();
        assert!((v - 2.0).abs() < 1e-12);
    }

    #[test]
    fn hull_examples() {
        let xs: Vec<f64> = (0..=20).map(|k| 2.0 + k as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x - 3.0) * (x - 3.0)).collect();
        let h = classical_convex_envelope_1d(&xs, &ys).unwrap();
        assert_eq!(h.vertices.len(), xs.len());
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let h = classical_convex_envelope_1d(&xs, &ys).unwrap();
        for x in &xs {
            assert!((h.eval(*x) - (2.0 * x - 1.0)).abs() < 1e-12);
        }
        assert!(matches!(classical_convex_envelope_1d(&[1.0], &[1.0]), Err(Error::TooFewPoints(1))));
    }
}
