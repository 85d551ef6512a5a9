//! Layer potential evaluation at targets near or on the surface.
//!
//! An [`Evaluator`] holds one quadrature rule and one extrapolation plan and
//! evaluates any number of targets against prepared densities. For a target
//! `y` with closest point `x0`, each regularized integral is split into a far
//! part over nodes with `|x - y| >= 8 max(delta)`, where every shape function
//! equals 1 in double precision and the kernel is the singular one for all
//! `delta_i`, and a near part over the remaining nodes. The far part is shared
//! by all smoothing lengths. Near nodes come from a uniform cell grid visited
//! in a fixed order, so sums are reproducible bit for bit.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::extrapolation::{extrapolate, solve_weights, ExtrapolationPlan, ExtrapolationWeights};
use crate::kernels::{Shape, Smoothing, ROUNDING_SATURATION as SATURATION};
use crate::quadrature::QuadratureRule;
use crate::surface::{closest_point, ImplicitSurface, NearTargetFrame};
use crate::{Result, Vec3};

const FOUR_PI: f64 = 4.0 * PI;
const EIGHT_PI: f64 = 8.0 * PI;

/// Smoothing length of the on-surface formulas, in units of `h`.
pub const ON_SURFACE_RHO: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EvalPath {
    NearExtrapolated,
    OnSurfaceSharp,
    FarUnregularized,
    /// Singular kernels at every node regardless of distance.
    Unregularized,
}

impl EvalPath {
    pub fn label(self) -> &'static str {
        match self {
            EvalPath::NearExtrapolated => "near-extrapolated",
            EvalPath::OnSurfaceSharp => "on-surface-sharp",
            EvalPath::FarUnregularized => "far-unregularized",
            EvalPath::Unregularized => "unregularized",
        }
    }
}

#[derive(Clone, Debug)]
pub struct PotentialResult<T> {
    pub value: T,
    /// Integral for each smoothing length, including any `chi` term.
    pub raw: Vec<T>,
    pub weights: ExtrapolationWeights,
    pub frame: NearTargetFrame,
    pub path: EvalPath,
}

type Field<T> = Arc<dyn Fn(&Vec3, &Vec3) -> T + Send + Sync>;

/// A density on the surface given in closed form as a function of the
/// point and the unit normal there, so it can be sampled at nodes and at
/// closest points alike.
#[derive(Clone)]
pub struct Density<T> {
    field: Field<T>,
}

impl<T> Density<T> {
    pub fn new(f: impl Fn(&Vec3, &Vec3) -> T + Send + Sync + 'static) -> Self {
        Self { field: Arc::new(f) }
    }

    pub fn at(&self, x: &Vec3, n: &Vec3) -> T {
        (self.field)(x, n)
    }
}

impl<T> std::fmt::Debug for Density<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("Density(..)")
    }
}

/// Density values at the nodes multiplied by the quadrature weights.
pub struct PreparedScalar {
    density: Density<f64>,
    wv: Vec<f64>,
}

pub struct PreparedVector {
    density: Density<Vec3>,
    wv: [Vec<f64>; 3],
}

/// Node coordinates, normals and weights as separate arrays.
struct NodeArrays {
    x: [Vec<f64>; 3],
    n: [Vec<f64>; 3],
    w: Vec<f64>,
}

impl NodeArrays {
    fn new(rule: &QuadratureRule) -> Self {
        let m = rule.nodes.len();
        let mut x = [Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m)];
        let mut n = [Vec::with_capacity(m), Vec::with_capacity(m), Vec::with_capacity(m)];
        let mut w = Vec::with_capacity(m);
        for nd in &rule.nodes {
            for d in 0..3 {
                x[d].push(nd.x[d]);
                n[d].push(nd.n[d]);
            }
            w.push(nd.w);
        }
        Self { x, n, w }
    }

    fn len(&self) -> usize {
        self.w.len()
    }

    #[inline]
    fn point(&self, i: usize) -> Vec3 {
        Vec3::new(self.x[0][i], self.x[1][i], self.x[2][i])
    }

    #[inline]
    fn normal(&self, i: usize) -> Vec3 {
        Vec3::new(self.n[0][i], self.n[1][i], self.n[2][i])
    }

    #[inline]
    fn dist2(&self, i: usize, y: &Vec3) -> f64 {
        let dx = self.x[0][i] - y[0];
        let dy = self.x[1][i] - y[1];
        let dz = self.x[2][i] - y[2];
        dx * dx + dy * dy + dz * dz
    }
}

/// Uniform cell grid over the nodes; a query of radius at most the cell
/// size only needs the 27 surrounding cells.
struct CellGrid {
    size: f64,
    cells: HashMap<(i64, i64, i64), Vec<u32>>,
}

impl CellGrid {
    fn new(nodes: &NodeArrays, size: f64) -> Self {
        let mut cells: HashMap<(i64, i64, i64), Vec<u32>> = HashMap::new();
        for i in 0..nodes.len() {
            let key = Self::key_of(size, &nodes.point(i));
            cells.entry(key).or_default().push(i as u32);
        }
        Self { size, cells }
    }

    fn key_of(size: f64, p: &Vec3) -> (i64, i64, i64) {
        (
            (p[0] / size).floor() as i64,
            (p[1] / size).floor() as i64,
            (p[2] / size).floor() as i64,
        )
    }

    /// Indices of nodes with `|x - y|^2 < radius^2`, in a fixed order.
    fn near(&self, nodes: &NodeArrays, y: &Vec3, radius: f64, out: &mut Vec<u32>) {
        assert!(radius <= self.size, "query radius exceeds cell size");
        out.clear();
        let r2 = radius * radius;
        let (cx, cy, cz) = Self::key_of(self.size, y);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(list) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(list.iter().copied().filter(|&i| nodes.dist2(i as usize, y) < r2));
                    }
                }
            }
        }
    }
}

/// Masked sum over all nodes with `|x - y|^2 >= cut2`, in four interleaved
/// lanes. `term(i, d, r2)` receives `d = x_i - y`.
#[inline]
fn far_sum<const K: usize>(
    nodes: &NodeArrays,
    y: &Vec3,
    cut2: f64,
    term: impl Fn(usize, [f64; 3], f64) -> [f64; K],
) -> [f64; K] {
    let m = nodes.len();
    let (xs, ys, zs) = (&nodes.x[0][..m], &nodes.x[1][..m], &nodes.x[2][..m]);
    let mut lanes = [[0.0; K]; 4];
    for i in 0..m {
        let d = [xs[i] - y[0], ys[i] - y[1], zs[i] - y[2]];
        let r2 = d[0] * d[0] + d[1] * d[1] + d[2] * d[2];
        // Masked terms may be non-finite; the select discards them.
        let t = term(i, d, r2);
        let keep = r2 >= cut2;
        let lane = &mut lanes[i & 3];
        for k in 0..K {
            lane[k] += if keep { t[k] } else { 0.0 };
        }
    }
    let mut out = [0.0; K];
    for k in 0..K {
        out[k] = (lanes[0][k] + lanes[1][k]) + (lanes[2][k] + lanes[3][k]);
    }
    out
}

pub struct Evaluator<'a> {
    surface: &'a dyn ImplicitSurface,
    rule: &'a QuadratureRule,
    plan: ExtrapolationPlan,
    nodes: NodeArrays,
    grid: CellGrid,
}

impl<'a> Evaluator<'a> {
    pub fn new(surface: &'a dyn ImplicitSurface, rule: &'a QuadratureRule, plan: ExtrapolationPlan) -> Self {
        let nodes = NodeArrays::new(rule);
        let h = rule.h;
        let size = SATURATION * plan.max_delta(h).max(ON_SURFACE_RHO * h);
        let grid = CellGrid::new(&nodes, size);
        Self {
            surface,
            rule,
            plan,
            nodes,
            grid,
        }
    }

    pub fn plan(&self) -> &ExtrapolationPlan {
        &self.plan
    }

    pub fn rule(&self) -> &QuadratureRule {
        self.rule
    }

    pub fn surface(&self) -> &dyn ImplicitSurface {
        self.surface
    }

    pub fn frame(&self, y: &Vec3) -> Result<NearTargetFrame> {
        closest_point(self.surface, y)
    }

    pub fn prepare_scalar(&self, density: &Density<f64>) -> PreparedScalar {
        let wv = (0..self.nodes.len())
            .map(|i| self.nodes.w[i] * density.at(&self.nodes.point(i), &self.nodes.normal(i)))
            .collect();
        PreparedScalar {
            density: density.clone(),
            wv,
        }
    }

    pub fn prepare_vector(&self, density: &Density<Vec3>) -> PreparedVector {
        let mut wv = [Vec::new(), Vec::new(), Vec::new()];
        for i in 0..self.nodes.len() {
            let v = density.at(&self.nodes.point(i), &self.nodes.normal(i)) * self.nodes.w[i];
            for d in 0..3 {
                wv[d].push(v[d]);
            }
        }
        PreparedVector {
            density: density.clone(),
            wv,
        }
    }

    fn deltas_and_weights(&self, frame: &NearTargetFrame) -> Result<(Vec<Smoothing>, ExtrapolationWeights)> {
        let h = self.rule.h;
        Ok((self.plan.deltas(h), solve_weights(&self.plan, frame.b, h)?))
    }

    fn finish<T>(
        &self,
        frame: NearTargetFrame,
        raw: Vec<T>,
        weights: ExtrapolationWeights,
        path: EvalPath,
    ) -> PotentialResult<T>
    where
        T: Copy + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
    {
        let value = extrapolate(&raw, &weights);
        PotentialResult {
            value,
            raw,
            weights,
            frame,
            path,
        }
    }

    fn single_weights(n: usize) -> ExtrapolationWeights {
        ExtrapolationWeights {
            a: vec![1.0],
            lambda: vec![0.0],
            degenerate_far: n == 0,
        }
    }

    // ---- Laplace single layer ----

    /// `S(y) = int G(x - y) f(x) dS`, `G(r) = -1/(4 pi |r|)`.
    pub fn laplace_single(&self, frame: &NearTargetFrame, f: &PreparedScalar) -> Result<PotentialResult<f64>> {
        let (deltas, weights) = self.deltas_and_weights(frame)?;
        if weights.degenerate_far {
            let v = self.laplace_single_plain(&frame.y, f);
            return Ok(self.finish(*frame, vec![v; deltas.len()], weights, EvalPath::FarUnregularized));
        }
        let raw = self.laplace_single_shapes(frame, f, &deltas, Shape::S1);
        Ok(self.finish(*frame, raw, weights, EvalPath::NearExtrapolated))
    }

    /// On-surface single layer with the `s1 sharp` shape and `delta = 3h`.
    pub fn laplace_single_on(&self, x0: &Vec3, f: &PreparedScalar) -> PotentialResult<f64> {
        let frame = NearTargetFrame::on_surface(self.surface, *x0);
        let deltas = [Smoothing::new(ON_SURFACE_RHO * self.rule.h)];
        let raw = self.laplace_single_shapes(&frame, f, &deltas, Shape::S1Sharp);
        self.finish(frame, raw, Self::single_weights(1), EvalPath::OnSurfaceSharp)
    }

    fn laplace_single_plain(&self, y: &Vec3, f: &PreparedScalar) -> f64 {
        let wv = &f.wv[..self.nodes.len()];
        let [s] = far_sum(&self.nodes, y, f64::MIN_POSITIVE, |i, _, r2| [wv[i] / r2.sqrt()]);
        -s / FOUR_PI
    }

    fn laplace_single_shapes(&self, frame: &NearTargetFrame, f: &PreparedScalar, deltas: &[Smoothing], shape: Shape) -> Vec<f64> {
        let y = &frame.y;
        let dmax = deltas.iter().map(|d| d.delta()).fold(0.0, f64::max);
        let cut = SATURATION * dmax;
        let wv = &f.wv[..self.nodes.len()];
        let [far] = far_sum(&self.nodes, y, cut * cut, |i, _, r2| [wv[i] / r2.sqrt()]);
        let mut near = Vec::new();
        self.grid.near(&self.nodes, y, cut, &mut near);
        deltas
            .iter()
            .map(|&s| {
                let d = s.delta();
                let sat2 = (SATURATION * d) * (SATURATION * d);
                let mut acc = 0.0;
                for &i in &near {
                    let i = i as usize;
                    let r2 = self.nodes.dist2(i, y);
                    let k = if r2 < sat2 {
                        shape.quotient(r2.sqrt() / d) / d
                    } else {
                        1.0 / r2.sqrt()
                    };
                    acc += k * wv[i];
                }
                -(far + acc) / FOUR_PI
            })
            .collect()
    }

    // ---- Laplace double layer ----

    /// `D(y) = int dG(x - y)/dn(x) [g(x) - g(x0)] dS + chi(y) g(x0)`.
    pub fn laplace_double(&self, frame: &NearTargetFrame, g: &PreparedScalar) -> Result<PotentialResult<f64>> {
        let (deltas, weights) = self.deltas_and_weights(frame)?;
        if weights.degenerate_far {
            let v = self.laplace_double_plain(frame, g);
            return Ok(self.finish(*frame, vec![v; deltas.len()], weights, EvalPath::FarUnregularized));
        }
        let raw = self.laplace_double_shapes(frame, g, &deltas, Shape::S2);
        Ok(self.finish(*frame, raw, weights, EvalPath::NearExtrapolated))
    }

    /// On-surface double layer with the `s2 sharp` shape, `delta = 3h` and `chi = 1/2`.
    pub fn laplace_double_on(&self, x0: &Vec3, g: &PreparedScalar) -> PotentialResult<f64> {
        let frame = NearTargetFrame::on_surface(self.surface, *x0);
        let deltas = [Smoothing::new(ON_SURFACE_RHO * self.rule.h)];
        let raw = self.laplace_double_shapes(&frame, g, &deltas, Shape::S2Sharp);
        self.finish(frame, raw, Self::single_weights(1), EvalPath::OnSurfaceSharp)
    }

    fn double_far_terms(&self, y: &Vec3, wv: &[f64], cut2: f64) -> (f64, f64) {
        let (nx, ny, nz, w) = (&self.nodes.n[0], &self.nodes.n[1], &self.nodes.n[2], &self.nodes.w);
        let [a, b] = far_sum(&self.nodes, y, cut2, |i, d, r2| {
            let k = (d[0] * nx[i] + d[1] * ny[i] + d[2] * nz[i]) / (r2 * r2.sqrt());
            [k * wv[i], k * w[i]]
        });
        (a, b)
    }

    fn laplace_double_plain(&self, frame: &NearTargetFrame, g: &PreparedScalar) -> f64 {
        let g0 = g.density.at(&frame.x0, &frame.n0);
        let (a, b) = self.double_far_terms(&frame.y, &g.wv, f64::MIN_POSITIVE);
        (a - g0 * b) / FOUR_PI + frame.chi() * g0
    }

    fn laplace_double_shapes(&self, frame: &NearTargetFrame, g: &PreparedScalar, deltas: &[Smoothing], shape: Shape) -> Vec<f64> {
        let y = &frame.y;
        let g0 = g.density.at(&frame.x0, &frame.n0);
        let dmax = deltas.iter().map(|d| d.delta()).fold(0.0, f64::max);
        let cut = SATURATION * dmax;
        let (a, b) = self.double_far_terms(y, &g.wv, cut * cut);
        let far = a - g0 * b;
        let mut near = Vec::new();
        self.grid.near(&self.nodes, y, cut, &mut near);
        // Subtracted, weighted density and r . n at each near node.
        let pre: Vec<(f64, f64, f64)> = near
            .iter()
            .map(|&i| {
                let i = i as usize;
                let r = self.nodes.point(i) - y;
                (r.norm_squared(), r.dot(&self.nodes.normal(i)), g.wv[i] - self.nodes.w[i] * g0)
            })
            .collect();
        deltas
            .iter()
            .map(|&s| {
                let d = s.delta();
                let sat2 = (SATURATION * d) * (SATURATION * d);
                let mut acc = 0.0;
                for &(r2, rn, wdg) in &pre {
                    let k = if r2 < sat2 {
                        rn * shape.quotient(r2.sqrt() / d) / (d * d * d)
                    } else {
                        rn / (r2 * r2.sqrt())
                    };
                    acc += k * wdg;
                }
                (far + acc) / FOUR_PI + frame.chi() * g0
            })
            .collect()
    }

    // ---- Stokes single layer ----

    /// `u_i(y) = (1/8pi) int S_ij(y, x) [f_j(x) - (f(x0) . n0) n_j(x)] dS`.
    pub fn stokes_single(&self, frame: &NearTargetFrame, f: &PreparedVector) -> Result<PotentialResult<Vec3>> {
        let (deltas, weights) = self.deltas_and_weights(frame)?;
        if weights.degenerate_far {
            let v = self.stokes_single_plain(frame, f);
            return Ok(self.finish(*frame, vec![v; deltas.len()], weights, EvalPath::FarUnregularized));
        }
        let raw = self.stokes_single_shapes(frame, f, &deltas);
        Ok(self.finish(*frame, raw, weights, EvalPath::NearExtrapolated))
    }

    /// Sums of `S (w f)` and `S (w n)` over nodes beyond the cutoff.
    fn stokes_single_far(&self, y: &Vec3, f: &PreparedVector, cut2: f64) -> (Vec3, Vec3) {
        let (nx, ny, nz, w) = (&self.nodes.n[0], &self.nodes.n[1], &self.nodes.n[2], &self.nodes.w);
        let [fx, fy, fz] = [&f.wv[0], &f.wv[1], &f.wv[2]];
        // d = x - y here; the Stokeslet is even in d.
        let s = far_sum(&self.nodes, y, cut2, |i, d, r2| {
            let inv = 1.0 / r2.sqrt();
            let inv3 = inv / r2;
            let df = d[0] * fx[i] + d[1] * fy[i] + d[2] * fz[i];
            let wn = [w[i] * nx[i], w[i] * ny[i], w[i] * nz[i]];
            let dn = d[0] * wn[0] + d[1] * wn[1] + d[2] * wn[2];
            [
                fx[i] * inv + d[0] * df * inv3,
                fy[i] * inv + d[1] * df * inv3,
                fz[i] * inv + d[2] * df * inv3,
                wn[0] * inv + d[0] * dn * inv3,
                wn[1] * inv + d[1] * dn * inv3,
                wn[2] * inv + d[2] * dn * inv3,
            ]
        });
        (Vec3::new(s[0], s[1], s[2]), Vec3::new(s[3], s[4], s[5]))
    }

    fn stokes_single_plain(&self, frame: &NearTargetFrame, f: &PreparedVector) -> Vec3 {
        let fn0 = f.density.at(&frame.x0, &frame.n0).dot(&frame.n0);
        let (p, q) = self.stokes_single_far(&frame.y, f, f64::MIN_POSITIVE);
        (p - q * fn0) / EIGHT_PI
    }

    fn stokes_single_shapes(&self, frame: &NearTargetFrame, f: &PreparedVector, deltas: &[Smoothing]) -> Vec<Vec3> {
        let y = &frame.y;
        let fn0 = f.density.at(&frame.x0, &frame.n0).dot(&frame.n0);
        let dmax = deltas.iter().map(|d| d.delta()).fold(0.0, f64::max);
        let cut = SATURATION * dmax;
        let (p, q) = self.stokes_single_far(y, f, cut * cut);
        let far = p - q * fn0;
        let mut near = Vec::new();
        self.grid.near(&self.nodes, y, cut, &mut near);
        let pre: Vec<(Vec3, f64, Vec3)> = near
            .iter()
            .map(|&i| {
                let i = i as usize;
                let d = y - self.nodes.point(i);
                let wf = Vec3::new(f.wv[0][i], f.wv[1][i], f.wv[2][i]) - self.nodes.normal(i) * (self.nodes.w[i] * fn0);
                (d, d.norm_squared(), wf)
            })
            .collect();
        deltas
            .iter()
            .map(|&s| {
                let dl = s.delta();
                let sat2 = (SATURATION * dl) * (SATURATION * dl);
                let mut acc = Vec3::zeros();
                for (d, r2, wf) in &pre {
                    let (c1, c2) = if *r2 < sat2 {
                        let [q1, q2] = Shape::quotients([Shape::S1, Shape::S2], r2.sqrt() / dl);
                        (q1 / dl, q2 / (dl * dl * dl))
                    } else {
                        let r = r2.sqrt();
                        (1.0 / r, 1.0 / (r * r2))
                    };
                    acc += wf * c1 + d * (c2 * d.dot(wf));
                }
                (far + acc) / EIGHT_PI
            })
            .collect()
    }

    // ---- Stokes double layer ----

    /// `v_i(y) = (1/8pi) int T_ijk(y, x) [q_j(x) - q_j(x0)] n_k(x) dS + chi(y) q_i(x0)`.
    pub fn stokes_double(&self, frame: &NearTargetFrame, q: &PreparedVector) -> Result<PotentialResult<Vec3>> {
        let (deltas, weights) = self.deltas_and_weights(frame)?;
        if weights.degenerate_far {
            let v = self.stokes_double_plain(frame, q);
            return Ok(self.finish(*frame, vec![v; deltas.len()], weights, EvalPath::FarUnregularized));
        }
        let raw = self.stokes_double_shapes(frame, q, &deltas);
        Ok(self.finish(*frame, raw, weights, EvalPath::NearExtrapolated))
    }

    /// `sum T_ijk (w q_j) n_k` and the matrix `sum T_ijk w n_k` beyond the cutoff.
    fn stokes_double_far(&self, y: &Vec3, q: &PreparedVector, cut2: f64) -> (Vec3, nalgebra::Matrix3<f64>) {
        let (nx, ny, nz, w) = (&self.nodes.n[0], &self.nodes.n[1], &self.nodes.n[2], &self.nodes.w);
        let [qx, qy, qz] = [&q.wv[0], &q.wv[1], &q.wv[2]];
        // With d = x - y, T(y, x) = 6 d d d / r^5.
        let s = far_sum(&self.nodes, y, cut2, |i, d, r2| {
            let r5 = r2 * r2 * r2.sqrt();
            let dn = (d[0] * nx[i] + d[1] * ny[i] + d[2] * nz[i]) * 6.0 / r5;
            let dq = d[0] * qx[i] + d[1] * qy[i] + d[2] * qz[i];
            let c = dn * dq;
            let m = dn * w[i];
            [
                d[0] * c,
                d[1] * c,
                d[2] * c,
                d[0] * d[0] * m,
                d[0] * d[1] * m,
                d[0] * d[2] * m,
                d[1] * d[1] * m,
                d[1] * d[2] * m,
                d[2] * d[2] * m,
            ]
        });
        let m = nalgebra::Matrix3::new(s[3], s[4], s[5], s[4], s[6], s[7], s[5], s[7], s[8]);
        (Vec3::new(s[0], s[1], s[2]), m)
    }

    fn stokes_double_plain(&self, frame: &NearTargetFrame, q: &PreparedVector) -> Vec3 {
        let q0 = q.density.at(&frame.x0, &frame.n0);
        let (p, m) = self.stokes_double_far(&frame.y, q, f64::MIN_POSITIVE);
        (p - m * q0) / EIGHT_PI + q0 * frame.chi()
    }

    fn stokes_double_shapes(&self, frame: &NearTargetFrame, q: &PreparedVector, deltas: &[Smoothing]) -> Vec<Vec3> {
        let y = &frame.y;
        let q0 = q.density.at(&frame.x0, &frame.n0);
        let dmax = deltas.iter().map(|d| d.delta()).fold(0.0, f64::max);
        let cut = SATURATION * dmax;
        let (p, m) = self.stokes_double_far(y, q, cut * cut);
        let far = p - m * q0;
        let mut near = Vec::new();
        self.grid.near(&self.nodes, y, cut, &mut near);
        let (b, n0) = (frame.b, frame.n0);
        // Per near node: r^2, r^2 - b^2, and the contracted split numerators of w (q - q0).
        let pre: Vec<(f64, f64, Vec3, Vec3)> = near
            .iter()
            .map(|&i| {
                let i = i as usize;
                let x = self.nodes.point(i);
                let xh = x - frame.x0;
                let wdq = Vec3::new(q.wv[0][i], q.wv[1][i], q.wv[2][i]) - q0 * self.nodes.w[i];
                let (t1, t2) = crate::kernels::split_numerators_applied(&xh, b, &n0, &wdq, &self.nodes.normal(i));
                let excess = xh.norm_squared() - 2.0 * b * xh.dot(&n0);
                ((y - x).norm_squared(), excess, t1, t2 - t1 * excess)
            })
            .collect();
        deltas
            .iter()
            .map(|&s| {
                let dl = s.delta();
                let sat2 = (SATURATION * dl) * (SATURATION * dl);
                let mut acc = Vec3::zeros();
                for (r2, _, t1, t2e) in &pre {
                    let (c1, c2) = if *r2 < sat2 {
                        let [q2, q3] = Shape::quotients([Shape::S2, Shape::S3], r2.sqrt() / dl);
                        (q2 / (dl * dl * dl), q3 / dl.powi(5))
                    } else {
                        let r = r2.sqrt();
                        let r3 = r * r2;
                        (1.0 / r3, 1.0 / (r3 * r2))
                    };
                    acc += (t1 * c1 + t2e * c2) * -6.0;
                }
                (far + acc) / EIGHT_PI + q0 * frame.chi()
            })
            .collect()
    }

    // ---- Baselines and batches ----

    /// The subtracted integrals with singular kernels at every node with `x != y`.
    pub fn laplace_single_unregularized(&self, frame: &NearTargetFrame, f: &PreparedScalar) -> PotentialResult<f64> {
        let v = self.laplace_single_plain(&frame.y, f);
        self.finish(*frame, vec![v], Self::single_weights(1), EvalPath::Unregularized)
    }

    pub fn laplace_double_unregularized(&self, frame: &NearTargetFrame, g: &PreparedScalar) -> PotentialResult<f64> {
        let v = self.laplace_double_plain(frame, g);
        self.finish(*frame, vec![v], Self::single_weights(1), EvalPath::Unregularized)
    }

    pub fn stokes_single_unregularized(&self, frame: &NearTargetFrame, f: &PreparedVector) -> PotentialResult<Vec3> {
        let v = self.stokes_single_plain(frame, f);
        self.finish(*frame, vec![v], Self::single_weights(1), EvalPath::Unregularized)
    }

    pub fn stokes_double_unregularized(&self, frame: &NearTargetFrame, q: &PreparedVector) -> PotentialResult<Vec3> {
        let v = self.stokes_double_plain(frame, q);
        self.finish(*frame, vec![v], Self::single_weights(1), EvalPath::Unregularized)
    }

    /// Applies `eval` to every frame in parallel; results keep the input order.
    pub fn map_targets<T: Send>(
        &self,
        frames: &[NearTargetFrame],
        eval: impl Fn(&NearTargetFrame) -> Result<T> + Sync + Send,
    ) -> Result<Vec<T>> {
        frames.par_iter().map(eval).collect()
    }
}

/// One-off single layer evaluation at `y`; builds the node arrays each call.
pub fn laplace_single(
    y: &Vec3,
    surface: &dyn ImplicitSurface,
    rule: &QuadratureRule,
    f: &Density<f64>,
    plan: &ExtrapolationPlan,
) -> Result<PotentialResult<f64>> {
    let ev = Evaluator::new(surface, rule, plan.clone());
    let frame = ev.frame(y)?;
    ev.laplace_single(&frame, &ev.prepare_scalar(f))
}

pub fn laplace_double(
    y: &Vec3,
    surface: &dyn ImplicitSurface,
    rule: &QuadratureRule,
    g: &Density<f64>,
    plan: &ExtrapolationPlan,
) -> Result<PotentialResult<f64>> {
    let ev = Evaluator::new(surface, rule, plan.clone());
    let frame = ev.frame(y)?;
    ev.laplace_double(&frame, &ev.prepare_scalar(g))
}

pub fn stokes_single(
    y: &Vec3,
    surface: &dyn ImplicitSurface,
    rule: &QuadratureRule,
    f: &Density<Vec3>,
    plan: &ExtrapolationPlan,
) -> Result<PotentialResult<Vec3>> {
    let ev = Evaluator::new(surface, rule, plan.clone());
    let frame = ev.frame(y)?;
    ev.stokes_single(&frame, &ev.prepare_vector(f))
}

pub fn stokes_double(
    y: &Vec3,
    surface: &dyn ImplicitSurface,
    rule: &QuadratureRule,
    q: &Density<Vec3>,
    plan: &ExtrapolationPlan,
) -> Result<PotentialResult<Vec3>> {
    let ev = Evaluator::new(surface, rule, plan.clone());
    let frame = ev.frame(y)?;
    ev.stokes_double(&frame, &ev.prepare_vector(q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::{laplace_double_kernel, laplace_single_kernel, stokeslet_kernel_reg, stresslet_split_reg_applied};
    use crate::quadrature::generate_rule;
    use crate::surface::UnitSphere;

    fn harmonic() -> Density<f64> {
        Density::new(|x: &Vec3, _: &Vec3| 1.75 * (x[0] - 2.0 * x[1]) * (7.5 * x[2] * x[2] - 1.5))
    }

    // Straightforward sums over all nodes, one kernel call per node.
    fn direct_single(rule: &QuadratureRule, f: &Density<f64>, y: &Vec3, s: Smoothing) -> f64 {
        rule.integrate(|nd| laplace_single_kernel(&(nd.x - y), s) * f.at(&nd.x, &nd.n))
    }

    #[test]
    fn split_sums_match_direct_sums() {
        let rule = generate_rule(&UnitSphere, 0.1).unwrap();
        let plan = ExtrapolationPlan::fifth_order();
        let ev = Evaluator::new(&UnitSphere, &rule, plan.clone());
        let f = harmonic();
        let pf = ev.prepare_scalar(&f);
        let qd = Density::new(|x: &Vec3, _: &Vec3| Vec3::new(x[2] * x[0], -x[2], x[1] + 0.3));
        let pq = ev.prepare_vector(&qd);
        for y in [Vec3::new(0.95, 0.1, 0.05), Vec3::new(0.2, -0.3, 1.05)] {
            let frame = ev.frame(&y).unwrap();
            let res = ev.laplace_single(&frame, &pf).unwrap();
            let dres = ev.laplace_double(&frame, &pf).unwrap();
            let sres = ev.stokes_single(&frame, &pq).unwrap();
            let tres = ev.stokes_double(&frame, &pq).unwrap();
            let g0 = f.at(&frame.x0, &frame.n0);
            let q0 = qd.at(&frame.x0, &frame.n0);
            let fn0 = q0.dot(&frame.n0);
            for (k, s) in plan.deltas(rule.h).into_iter().enumerate() {
                let want = direct_single(&rule, &f, &y, s);
                assert!((res.raw[k] - want).abs() < 1e-12, "{} vs {want}", res.raw[k]);
                let want = rule.integrate(|nd| laplace_double_kernel(&(nd.x - y), &nd.n, s) * (f.at(&nd.x, &nd.n) - g0))
                    + frame.chi() * g0;
                assert!((dres.raw[k] - want).abs() < 1e-12);
                let want = rule.integrate_vec(|nd| {
                    stokeslet_kernel_reg(&y, &nd.x, s) * (qd.at(&nd.x, &nd.n) - nd.n * fn0)
                }) / EIGHT_PI;
                assert!((sres.raw[k] - want).norm() < 1e-12);
                let want = rule.integrate_vec(|nd| {
                    stresslet_split_reg_applied(&nd.x, &frame, &(qd.at(&nd.x, &nd.n) - q0), &nd.n, s)
                }) / EIGHT_PI
                    + q0 * frame.chi();
                assert!((tres.raw[k] - want).norm() < 1e-11, "{:?} vs {want:?}", tres.raw[k]);
            }
            let v: f64 = res.raw.iter().zip(&res.weights.a).map(|(r, a)| r * a).sum();
            assert!((v - res.value).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_densities() {
        let rule = generate_rule(&UnitSphere, 0.1).unwrap();
        let ev = Evaluator::new(&UnitSphere, &rule, ExtrapolationPlan::fifth_order());
        let zero = ev.prepare_scalar(&Density::new(|_: &Vec3, _: &Vec3| 0.0));
        let one = ev.prepare_scalar(&Density::new(|_: &Vec3, _: &Vec3| 1.0));
        let q = Vec3::new(0.3, -1.0, 2.0);
        let qc = ev.prepare_vector(&Density::new(move |_: &Vec3, _: &Vec3| q));
        let zv = ev.prepare_vector(&Density::new(|_: &Vec3, _: &Vec3| Vec3::zeros()));
        for y in [Vec3::new(0.97, 0.0, 0.02), Vec3::new(0.0, 0.6, 0.82)] {
            let frame = ev.frame(&y).unwrap();
            assert_eq!(ev.laplace_single(&frame, &zero).unwrap().value, 0.0);
            assert_eq!(ev.laplace_double(&frame, &one).unwrap().value, frame.chi());
            assert_eq!(ev.stokes_single(&frame, &zv).unwrap().value, Vec3::zeros());
            let v = ev.stokes_double(&frame, &qc).unwrap().value;
            assert!((v - q * frame.chi()).norm() < 1e-13);
        }
        let on = ev.laplace_double_on(&Vec3::new(0.0, 0.0, 1.0), &one);
        assert_eq!(on.value, 0.5);
        assert_eq!(on.path, EvalPath::OnSurfaceSharp);
    }

    #[test]
    fn far_targets_take_the_plain_path() {
        let h = 0.05;
        let rule = generate_rule(&UnitSphere, h).unwrap();
        let ev = Evaluator::new(&UnitSphere, &rule, ExtrapolationPlan::fifth_order());
        let pf = ev.prepare_scalar(&harmonic());
        let frame = ev.frame(&Vec3::new(0.0, 0.0, 1.0 + 17.0 * h)).unwrap();
        let res = ev.laplace_single(&frame, &pf).unwrap();
        assert_eq!(res.path, EvalPath::FarUnregularized);
        assert!(res.weights.degenerate_far);
    }
}
