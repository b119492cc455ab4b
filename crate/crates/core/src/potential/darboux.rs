//! Marching solver for the β-system of a rich frame with no algebraic
//! constraints, in Riemann coordinates `w`:
//! `∂_i γ^j = Z_ji^j γ^j − Z_jj^i γ^i` for `i ≠ j`, with `γ^j` prescribed
//! on the coordinate line through the base point in direction `j`.
//!
//! Each `γ^j` is reached from its data line by RK4 sweeps in the other
//! directions.  The sweeps depend on the other components, so the whole
//! grid is iterated (Picard) until it stops changing.

use super::{GridSpec, PotentialError};
use crate::exprlang::{eval_scalar, Expr, Params};
use crate::geometry::{connection_at, is_rich, pullback_z, FrameSpec, RiemannChart};
use crate::systems::{beta_algebraic, generic_rank};
use rayon::prelude::*;
use serde::Serialize;

/// Data `φ_j(w^j)` along one coordinate line.
#[derive(Clone, Debug)]
pub enum BoundaryFn {
    /// Expression in a single variable (index 0).
    Expr { expr: Expr, params: Params },
    /// Samples interpolated by local cubics.
    Table { x: Vec<f64>, y: Vec<f64> },
}

impl BoundaryFn {
    pub fn eval(&self, t: f64) -> Result<f64, PotentialError> {
        match self {
            BoundaryFn::Expr { expr, params } => Ok(eval_scalar(expr, &[t], params)?),
            BoundaryFn::Table { x, y } => {
                if x.len() != y.len() || x.is_empty() {
                    return Err(PotentialError::Invalid("boundary table needs matching, non-empty columns".into()));
                }
                let i = x.partition_point(|&v| v < t);
                let lo = i.saturating_sub(2).min(x.len().saturating_sub(4));
                let hi = (lo + 4).min(x.len());
                Ok(lagrange(&x[lo..hi], &y[lo..hi], t))
            }
        }
    }
}

fn lagrange(x: &[f64], y: &[f64], t: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..x.len() {
        let mut w = 1.0;
        for j in 0..x.len() {
            if i != j {
                w *= (t - x[j]) / (x[i] - x[j]);
            }
        }
        s += w * y[i];
    }
    s
}

/// Uniform `w`-grid containing the base point as a node.
#[derive(Clone, Debug, Serialize)]
pub struct DarbouxGrid {
    pub lo: Vec<f64>,
    pub h: f64,
    pub counts: Vec<usize>,
    pub base: Vec<usize>,
}

impl DarbouxGrid {
    /// Box `[lo, hi]` with spacing `h`; `base_w` is snapped to a node.
    pub fn new(lo: &[f64], hi: &[f64], h: f64, base_w: &[f64]) -> Result<Self, PotentialError> {
        if !(h > 0.0) || lo.len() != hi.len() || lo.len() != base_w.len() {
            return Err(PotentialError::Invalid("grid bounds, spacing and base point are inconsistent".into()));
        }
        let mut counts = Vec::new();
        let mut base = Vec::new();
        for k in 0..lo.len() {
            let c = ((hi[k] - lo[k]) / h).round() as usize + 1;
            let b = (base_w[k] - lo[k]) / h;
            if (b - b.round()).abs() > 1e-9 || b.round() < 0.0 || b.round() as usize >= c {
                return Err(PotentialError::Invalid(format!("base coordinate {} is not a grid node", base_w[k])));
            }
            counts.push(c);
            base.push(b.round() as usize);
        }
        Ok(DarbouxGrid { lo: lo.to_vec(), h, counts, base })
    }

    pub fn spec(&self) -> GridSpec {
        GridSpec {
            axes: self.lo.iter().zip(&self.counts).map(|(&l, &c)| (0..c).map(|i| l + self.h * i as f64).collect()).collect(),
        }
    }

    pub fn base_point(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.base).map(|(l, &b)| l + self.h * b as f64).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DarbouxSolution {
    pub grid: DarbouxGrid,
    /// `gamma[node][j]`, nodes ordered as in [`GridSpec`].
    pub gamma: Vec<Vec<f64>>,
    pub iterations: usize,
    /// Scaled residual of the system from fourth-order central differences.
    pub fd_residual: f64,
}

const MAX_ITER: usize = 200;
const CONVERGED: f64 = 1e-14;

struct Layout {
    n: usize,
    counts: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

impl Layout {
    fn new(counts: &[usize]) -> Self {
        let n = counts.len();
        let mut strides = vec![1; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * counts[k + 1];
        }
        Layout { n, counts: counts.to_vec(), strides, len: counts.iter().product() }
    }

    fn coord(&self, f: usize, k: usize) -> usize {
        (f / self.strides[k]) % self.counts[k]
    }
}

/// Cubic interpolation of `vals` (a grid line) at index `m + 0.5`.
fn half_value(vals: &[f64], m: usize) -> f64 {
    let len = vals.len();
    if len < 4 {
        return 0.5 * (vals[m] + vals[(m + 1).min(len - 1)]);
    }
    let lo = m.saturating_sub(1).min(len - 4);
    let xs: Vec<f64> = (lo..lo + 4).map(|i| i as f64).collect();
    lagrange(&xs, &vals[lo..lo + 4], m as f64 + 0.5)
}

/// Solve on `grid`; `boundary[j]` gives `γ^j` on the line through the base
/// point in direction `j`.
pub fn solve_rich_beta(
    spec: &FrameSpec,
    chart: &RiemannChart,
    boundary: &[BoundaryFn],
    grid: &DarbouxGrid,
) -> Result<DarbouxSolution, PotentialError> {
    let n = spec.n;
    if boundary.len() != n || grid.counts.len() != n {
        return Err(PotentialError::Invalid("need one boundary function and one grid axis per dimension".into()));
    }
    let samples = spec.samples(20, 0);
    if !is_rich(spec, &samples, 1e-8)?.0 {
        return Err(PotentialError::NotRich);
    }
    let systems: Vec<_> = samples.iter().map(|p| connection_at(spec, p).map(|c| beta_algebraic(&c))).collect::<Result<_, _>>()?;
    let rank = generic_rank(&systems, 1e-8);
    if rank != 0 {
        return Err(PotentialError::NotRankZero(rank));
    }
    let lay = Layout::new(&grid.counts);
    let gs = grid.spec();
    let h = grid.h;
    let node = |f: usize| -> Vec<f64> { (0..n).map(|k| gs.axes[k][lay.coord(f, k)]).collect() };
    let idx3 = |i: usize, j: usize, k: usize| (i * n + j) * n + k;
    // Z at nodes and at half steps in every direction
    let zn: Vec<Vec<f64>> = (0..lay.len).into_par_iter().map(|f| pullback_z(spec, chart, &node(f))).collect::<Result<_, _>>()?;
    let zh: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            (0..lay.len)
                .into_par_iter()
                .map(|f| {
                    if lay.coord(f, i) + 1 >= lay.counts[i] {
                        return Ok(Vec::new());
                    }
                    let mut w = node(f);
                    w[i] += 0.5 * h;
                    pullback_z(spec, chart, &w)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<_, _>>()?;
    let on_line = |f: usize, j: usize| (0..n).all(|k| k == j || lay.coord(f, k) == grid.base[k]);
    let mut data = vec![vec![0.0; lay.len]; n];
    for (j, bj) in boundary.iter().enumerate() {
        for f in 0..lay.len {
            if on_line(f, j) {
                data[j][f] = bj.eval(gs.axes[j][lay.coord(f, j)])?;
            }
        }
    }
    // start from the data extended as constants
    let mut old: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            (0..lay.len)
                .map(|f| {
                    let g = f - lay.coord(f, j) * lay.strides[j];
                    let on = (0..n).filter(|&k| k != j).fold(g, |acc, k| acc - lay.coord(f, k) * lay.strides[k] + grid.base[k] * lay.strides[k]);
                    data[j][on + lay.coord(f, j) * lay.strides[j]]
                })
                .collect()
        })
        .collect();
    let mut iterations = 0;
    loop {
        iterations += 1;
        let new: Vec<Vec<f64>> = (0..n)
            .into_par_iter()
            .map(|j| sweep_component(j, &lay, grid, &old, &data[j], &zn, &zh, idx3))
            .collect::<Result<_, _>>()?;
        let mut change: f64 = 0.0;
        for j in 0..n {
            for f in 0..lay.len {
                let d = (new[j][f] - old[j][f]).abs() / new[j][f].abs().max(1.0);
                if !d.is_finite() {
                    return Err(PotentialError::StepFailure(format!("non-finite value at node {:?}", node(f))));
                }
                change = change.max(d);
            }
        }
        old = new;
        if change < CONVERGED {
            break;
        }
        if iterations >= MAX_ITER {
            return Err(PotentialError::StepFailure(format!("no convergence after {MAX_ITER} sweeps (change {change:e})")));
        }
    }
    let fd = fd_residual(&lay, h, &old, &zn, idx3);
    let gamma = (0..lay.len).map(|f| (0..n).map(|j| old[j][f]).collect()).collect();
    Ok(DarbouxSolution { grid: grid.clone(), gamma, iterations, fd_residual: fd })
}

#[allow(clippy::too_many_arguments)]
fn sweep_component(
    j: usize,
    lay: &Layout,
    grid: &DarbouxGrid,
    old: &[Vec<f64>],
    data: &[f64],
    zn: &[Vec<f64>],
    zh: &[Vec<Vec<f64>>],
    idx3: impl Fn(usize, usize, usize) -> usize + Sync,
) -> Result<Vec<f64>, PotentialError> {
    let n = lay.n;
    let h = grid.h;
    let mut val = data.to_vec();
    let mut done = vec![j];
    for i in (0..n).filter(|&i| i != j) {
        // lines along i that start on the already filled set
        let starts: Vec<usize> = (0..lay.len)
            .filter(|&f| lay.coord(f, i) == grid.base[i] && (0..n).all(|k| done.contains(&k) || k == i || lay.coord(f, k) == grid.base[k]))
            .collect();
        let st = lay.strides[i];
        let cnt = lay.counts[i];
        let lines: Vec<(usize, Vec<f64>)> = starts
            .par_iter()
            .map(|&f0| {
                let first = f0 - grid.base[i] * st;
                let nodes: Vec<usize> = (0..cnt).map(|m| first + m * st).collect();
                let g: Vec<f64> = nodes.iter().map(|&f| old[i][f]).collect();
                let a = |z: &[f64]| z[idx3(j, i, j)];
                let b = |z: &[f64]| z[idx3(j, j, i)];
                let rhs = |z: &[f64], y: f64, gv: f64| a(z) * y - b(z) * gv;
                let mut y = vec![0.0; cnt];
                y[grid.base[i]] = val[f0];
                // upward then downward from the base index
                for m in grid.base[i]..cnt - 1 {
                    let (z0, zm, z1) = (&zn[nodes[m]], &zh[i][nodes[m]], &zn[nodes[m + 1]]);
                    let gm = half_value(&g, m);
                    y[m + 1] = rk4(y[m], h, (z0, g[m]), (zm, gm), (z1, g[m + 1]), &rhs);
                }
                for m in (1..=grid.base[i]).rev() {
                    let (z0, zm, z1) = (&zn[nodes[m]], &zh[i][nodes[m - 1]], &zn[nodes[m - 1]]);
                    let gm = half_value(&g, m - 1);
                    y[m - 1] = rk4(y[m], -h, (z0, g[m]), (zm, gm), (z1, g[m - 1]), &rhs);
                }
                (first, y)
            })
            .collect();
        for (first, y) in lines {
            for (m, v) in y.into_iter().enumerate() {
                val[first + m * st] = v;
            }
        }
        done.push(i);
    }
    Ok(val)
}

fn rk4(y: f64, dt: f64, p0: (&[f64], f64), pm: (&[f64], f64), p1: (&[f64], f64), f: &impl Fn(&[f64], f64, f64) -> f64) -> f64 {
    let k1 = f(p0.0, y, p0.1);
    let k2 = f(pm.0, y + 0.5 * dt * k1, pm.1);
    let k3 = f(pm.0, y + 0.5 * dt * k2, pm.1);
    let k4 = f(p1.0, y + dt * k3, p1.1);
    y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

fn fd_residual(lay: &Layout, h: f64, g: &[Vec<f64>], zn: &[Vec<f64>], idx3: impl Fn(usize, usize, usize) -> usize) -> f64 {
    let n = lay.n;
    let mut worst: f64 = 0.0;
    for f in 0..lay.len {
        for i in 0..n {
            let c = lay.coord(f, i);
            if c < 2 || c + 2 >= lay.counts[i] {
                continue;
            }
            let s = lay.strides[i];
            for j in (0..n).filter(|&j| j != i) {
                let y = &g[j];
                let d = (-y[f + 2 * s] + 8.0 * y[f + s] - 8.0 * y[f - s] + y[f - 2 * s]) / (12.0 * h);
                let t1 = zn[f][idx3(j, i, j)] * g[j][f];
                let t2 = zn[f][idx3(j, j, i)] * g[i][f];
                worst = worst.max((d - t1 + t2).abs() / (1.0 + d.abs() + t1.abs() + t2.abs()));
            }
        }
    }
    worst
}
