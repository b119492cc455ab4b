//! Staircase integration: axis-parallel legs from the base point, one
//! coordinate at a time.  Grid fills reuse shared prefixes, so every
//! leg only spans the distance between neighbouring grid values.

use super::quad::{integrate, QuadStats, RULE_NAME};
use super::{MatrixField, PotentialError};
use crate::exprlang::Scalar;
use crate::geometry::FrameSpec;
use crate::systems::{BetaCandidate, LambdaCandidate};
use rayon::prelude::*;
use serde::Serialize;

#[derive(Clone, Debug)]
pub struct StaircaseOptions {
    /// Absolute quadrature tolerance per leg.
    pub abs_tol: f64,
    /// Scaled curl tolerance.
    pub curl_tol: f64,
    pub max_depth: u32,
    /// Repeat the fill with the reversed axis order and record the difference.
    pub check_paths: bool,
}

impl Default for StaircaseOptions {
    fn default() -> Self {
        StaircaseOptions { abs_tol: 1e-10, curl_tol: 1e-7, max_depth: 30, check_paths: true }
    }
}

/// Tensor grid; node index runs with the last axis fastest.
#[derive(Clone, Debug, Serialize)]
pub struct GridSpec {
    pub axes: Vec<Vec<f64>>,
}

impl GridSpec {
    pub fn uniform(domain: &[[f64; 2]], counts: &[usize]) -> Self {
        let axes = domain
            .iter()
            .zip(counts)
            .map(|(d, &c)| {
                if c <= 1 {
                    vec![0.5 * (d[0] + d[1])]
                } else {
                    (0..c).map(|i| d[0] + (d[1] - d[0]) * i as f64 / (c - 1) as f64).collect()
                }
            })
            .collect();
        GridSpec { axes }
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (i, a)| acc * a.len() + i)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut out = vec![0; self.axes.len()];
        for (k, a) in self.axes.iter().enumerate().rev() {
            out[k] = flat % a.len();
            flat /= a.len();
        }
        out
    }

    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.multi_index(flat).iter().zip(&self.axes).map(|(&i, a)| a[i]).collect()
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureInfo {
    pub rule: String,
    pub panels: usize,
    /// Sum of the per-panel error estimates.
    pub error_estimate: f64,
    pub abs_tol: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PotentialGrid {
    pub vars: Vec<String>,
    pub axes: Vec<Vec<f64>>,
    pub base_point: Vec<f64>,
    pub scalar_name: Option<String>,
    pub scalar: Option<Vec<f64>>,
    pub vector_name: Option<String>,
    pub vector: Option<Vec<Vec<f64>>>,
    pub quadrature: QuadratureInfo,
    pub curl_residual: f64,
    /// Largest difference between the two staircase orders (0 when not checked).
    pub path_residual: f64,
    pub symmetry_residual: f64,
}

impl PotentialGrid {
    pub fn grid(&self) -> GridSpec {
        GridSpec { axes: self.axes.clone() }
    }
}

/// One leg: from `p` (with `p[axis] = t0`) to `t1`, updating `state`.
type Leg<'a> = dyn Fn(&[f64], usize, f64, &[f64]) -> Result<(Vec<f64>, QuadStats), PotentialError> + Sync + 'a;

/// March along `axis` from `p` through every target, nearest first.
fn line(p: &[f64], axis: usize, targets: &[f64], state: &[f64], leg: &Leg) -> Result<(Vec<Vec<f64>>, QuadStats), PotentialError> {
    let t0 = p[axis];
    let mut out: Vec<Option<Vec<f64>>> = vec![None; targets.len()];
    let mut stats = QuadStats::default();
    let mut order: Vec<usize> = (0..targets.len()).collect();
    order.sort_by(|&a, &b| targets[a].total_cmp(&targets[b]));
    let (below, above): (Vec<usize>, Vec<usize>) = order.iter().partition(|&&i| targets[i] < t0);
    for side in [above, below.into_iter().rev().collect::<Vec<_>>()] {
        let mut cur = p.to_vec();
        let mut st = state.to_vec();
        for i in side {
            let (next, s) = leg(&cur, axis, targets[i], &st)?;
            stats.merge(s);
            cur[axis] = targets[i];
            st = next;
            out[i] = Some(st.clone());
        }
    }
    Ok((out.into_iter().map(|s| s.expect("every target visited")).collect(), stats))
}

/// States at every grid node, reached along the staircase in `order`.
fn fill(grid: &GridSpec, base: &[f64], order: &[usize], state0: Vec<f64>, leg: &Leg) -> Result<(Vec<Vec<f64>>, QuadStats), PotentialError> {
    let n = grid.axes.len();
    // (indices fixed so far, current point, state)
    let mut front: Vec<(Vec<usize>, Vec<f64>, Vec<f64>)> = vec![(vec![usize::MAX; n], base.to_vec(), state0)];
    let mut stats = QuadStats::default();
    for &axis in order {
        let targets = &grid.axes[axis];
        let parts: Vec<_> = front
            .par_iter()
            .map(|(idx, p, st)| {
                let (states, s) = line(p, axis, targets, st, leg)?;
                let items: Vec<_> = states
                    .into_iter()
                    .enumerate()
                    .map(|(t, st)| {
                        let mut i2 = idx.clone();
                        i2[axis] = t;
                        let mut p2 = p.clone();
                        p2[axis] = targets[t];
                        (i2, p2, st)
                    })
                    .collect();
                Ok::<_, PotentialError>((items, s))
            })
            .collect::<Result<_, _>>()?;
        front = Vec::new();
        for (items, s) in parts {
            stats.merge(s);
            front.extend(items);
        }
    }
    let mut out = vec![Vec::new(); grid.len()];
    for (idx, _, st) in front {
        out[grid.index(&idx)] = st;
    }
    Ok((out, stats))
}

fn reversed(n: usize) -> Vec<usize> {
    (0..n).rev().collect()
}

fn natural(n: usize) -> Vec<usize> {
    (0..n).collect()
}

fn at(p: &[f64], axis: usize, s: f64) -> Vec<f64> {
    let mut q = p.to_vec();
    q[axis] = s;
    q
}

fn column_leg<'a>(m: &'a MatrixField, opts: &'a StaircaseOptions) -> impl Fn(&[f64], usize, f64, &[f64]) -> Result<(Vec<f64>, QuadStats), PotentialError> + Sync + 'a {
    move |p, axis, t1, st| {
        let f = |s: f64| -> Result<Vec<f64>, PotentialError> {
            let v = m.eval(&at(p, axis, s))?;
            Ok((0..m.n).map(|i| v[(i, axis)]).collect())
        };
        let (v, s) = integrate(&f, p[axis], t1, opts.abs_tol, opts.max_depth)?;
        Ok((st.iter().zip(&v).map(|(a, b)| a + b).collect(), s))
    }
}

/// `(Ψ, η)` leg for a Hessian field; `η` uses `∫ (t1 − s) H_dd ds`.
fn hessian_leg<'a>(h: &'a MatrixField, opts: &'a StaircaseOptions) -> impl Fn(&[f64], usize, f64, &[f64]) -> Result<(Vec<f64>, QuadStats), PotentialError> + Sync + 'a {
    move |p, axis, t1, st| {
        let n = h.n;
        let f = |s: f64| -> Result<Vec<f64>, PotentialError> {
            let v = h.eval(&at(p, axis, s))?;
            let mut out: Vec<f64> = (0..n).map(|i| v[(i, axis)]).collect();
            out.push((t1 - s) * v[(axis, axis)]);
            Ok(out)
        };
        let (v, s) = integrate(&f, p[axis], t1, opts.abs_tol, opts.max_depth)?;
        let mut next: Vec<f64> = (0..n).map(|i| st[i] + v[i]).collect();
        next.push(st[n] + (t1 - p[axis]) * st[axis] + v[n]);
        Ok((next, s))
    }
}

fn curl_check(points: &[Vec<f64>], tol: f64, f: impl Fn(&[f64]) -> Result<f64, PotentialError> + Sync) -> Result<f64, PotentialError> {
    let vals: Vec<f64> = points.par_iter().map(|p| f(p)).collect::<Result<_, _>>()?;
    let (i, worst) = vals.iter().enumerate().fold((0, 0.0_f64), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if worst > tol || worst.is_nan() {
        return Err(PotentialError::CurlViolation { point: points[i].clone(), residual: worst });
    }
    Ok(worst)
}

fn max_diff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn info(stats: QuadStats, opts: &StaircaseOptions) -> QuadratureInfo {
    QuadratureInfo { rule: RULE_NAME.into(), panels: stats.panels, error_estimate: stats.error, abs_tol: opts.abs_tol }
}

/// `F(target)` with `DF = M` and `F(base) = 0`, legs taken in `order`.
pub fn integrate_jacobian_ordered(
    m: &MatrixField,
    base: &[f64],
    target: &[f64],
    order: &[usize],
    opts: &StaircaseOptions,
) -> Result<(Vec<f64>, QuadStats), PotentialError> {
    let n = m.n;
    if base.len() != n || target.len() != n {
        return Err(PotentialError::Invalid("points must have the field dimension".into()));
    }
    // corners and leg midpoints of the staircase
    let mut checks = vec![base.to_vec()];
    let mut cur = base.to_vec();
    for &a in order {
        let mut mid = cur.clone();
        mid[a] = 0.5 * (cur[a] + target[a]);
        cur[a] = target[a];
        checks.push(mid);
        checks.push(cur.clone());
    }
    curl_check(&checks, opts.curl_tol, |p| super::curl_residual(m, p))?;
    let leg = column_leg(m, opts);
    let mut st = vec![0.0; n];
    let mut stats = QuadStats::default();
    let mut cur = base.to_vec();
    for &a in order {
        let (next, s) = leg(&cur, a, target[a], &st)?;
        stats.merge(s);
        st = next;
        cur[a] = target[a];
    }
    Ok((st, stats))
}

/// Axis-ordered staircase `x¹` first.
pub fn integrate_jacobian(m: &MatrixField, base: &[f64], target: &[f64], opts: &StaircaseOptions) -> Result<(Vec<f64>, QuadStats), PotentialError> {
    integrate_jacobian_ordered(m, base, target, &natural(m.n), opts)
}

/// `η` and `Ψ = ∇η` on the grid from `D²η = Lᵀ diag(β) L`, gauged so that
/// `η(base) = 0` and `∇η(base) = 0`.
pub fn reconstruct_eta(
    spec: &FrameSpec,
    beta: &BetaCandidate,
    base: &[f64],
    grid: &GridSpec,
    opts: &StaircaseOptions,
) -> Result<PotentialGrid, PotentialError> {
    let n = spec.n;
    let h = MatrixField::hessian(spec, beta)?;
    let points = grid.points();
    let curl = curl_check(&points, opts.curl_tol, |p| super::curl_residual(&h, p))?;
    let sym: Vec<f64> = points
        .par_iter()
        .map(|p| {
            let m = h.eval(p)?;
            Ok::<_, PotentialError>((&m - m.transpose()).abs().max() / m.abs().max().max(1.0))
        })
        .collect::<Result<_, _>>()?;
    let symmetry = sym.iter().copied().fold(0.0, f64::max);
    if symmetry > opts.curl_tol {
        return Err(PotentialError::SymmetryViolation { residual: symmetry });
    }
    let leg = hessian_leg(&h, opts);
    let (states, stats) = fill(grid, base, &natural(n), vec![0.0; n + 1], &leg)?;
    let path = if opts.check_paths { max_diff(&states, &fill(grid, base, &reversed(n), vec![0.0; n + 1], &leg)?.0) } else { 0.0 };
    Ok(PotentialGrid {
        vars: spec.vars.clone(),
        axes: grid.axes.clone(),
        base_point: base.to_vec(),
        scalar_name: Some("eta".into()),
        scalar: Some(states.iter().map(|s| s[n]).collect()),
        vector_name: Some("grad_eta".into()),
        vector: Some(states.iter().map(|s| s[..n].to_vec()).collect()),
        quadrature: info(stats, opts),
        curl_residual: curl,
        path_residual: path,
        symmetry_residual: symmetry,
    })
}

/// `f` on the grid with `Df = R diag(λ) L` and `f(base) = 0`.
pub fn reconstruct_flux(
    spec: &FrameSpec,
    lambda: &LambdaCandidate,
    base: &[f64],
    grid: &GridSpec,
    opts: &StaircaseOptions,
) -> Result<PotentialGrid, PotentialError> {
    let n = spec.n;
    let a = MatrixField::jacobian(spec, lambda)?;
    let curl = curl_check(&grid.points(), opts.curl_tol, |p| super::curl_residual(&a, p))?;
    let leg = column_leg(&a, opts);
    let (states, stats) = fill(grid, base, &natural(n), vec![0.0; n], &leg)?;
    let path = if opts.check_paths { max_diff(&states, &fill(grid, base, &reversed(n), vec![0.0; n], &leg)?.0) } else { 0.0 };
    Ok(PotentialGrid {
        vars: spec.vars.clone(),
        axes: grid.axes.clone(),
        base_point: base.to_vec(),
        scalar_name: None,
        scalar: None,
        vector_name: Some("flux".into()),
        vector: Some(states),
        quadrature: info(stats, opts),
        curl_residual: curl,
        path_residual: path,
        symmetry_residual: 0.0,
    })
}

/// Curl of `G = Ψ · A` at `p` given `Ψ(p)`; `∂_l G_j = Σ_k H_kl A_kj + Ψ_k ∂_l A_kj`.
fn entropy_curl(h: &MatrixField, a: &MatrixField, p: &[f64], psi: &[f64]) -> Result<f64, PotentialError> {
    let n = h.n;
    let hv = h.eval(p)?;
    let s = a.series(p)?;
    let dg = |j: usize, l: usize| -> f64 { (0..n).map(|k| hv[(k, l)] * s[k][j].value() + psi[k] * s[k][j].partial(l).value()).sum() };
    let mut worst: f64 = 0.0;
    let mut size: f64 = 1.0;
    for j in 0..n {
        size = size.max((0..n).map(|k| psi[k] * s[k][j].value()).sum::<f64>().abs());
        for l in (j + 1)..n {
            worst = worst.max((dg(j, l) - dg(l, j)).abs());
        }
    }
    Ok(worst / size)
}

/// Entropy flux `q` with `∇q = ∇η · Df`, `q(base) = 0`.  `η` is
/// reconstructed along the same legs.
pub fn entropy_flux(
    spec: &FrameSpec,
    lambda: &LambdaCandidate,
    beta: &BetaCandidate,
    base: &[f64],
    grid: &GridSpec,
    opts: &StaircaseOptions,
) -> Result<PotentialGrid, PotentialError> {
    let n = spec.n;
    let h = MatrixField::hessian(spec, beta)?;
    let a = MatrixField::jacobian(spec, lambda)?;
    let eta = reconstruct_eta(spec, beta, base, grid, &StaircaseOptions { check_paths: false, ..opts.clone() })?;
    let psi = eta.vector.as_ref().expect("η grid carries its gradient");
    let points = grid.points();
    let curls: Vec<f64> =
        points.par_iter().zip(psi).map(|(p, g)| entropy_curl(&h, &a, p, g)).collect::<Result<_, _>>()?;
    let (iw, curl) = curls.iter().enumerate().fold((0, 0.0_f64), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    if curl > opts.curl_tol || curl.is_nan() {
        return Err(PotentialError::CurlViolation { point: points[iw].clone(), residual: curl });
    }
    let hl = hessian_leg(&h, opts);
    let inner_tol = 0.1 * opts.abs_tol;
    let leg = |p: &[f64], axis: usize, t1: f64, st: &[f64]| -> Result<(Vec<f64>, QuadStats), PotentialError> {
        let (mut next, mut stats) = hl(p, axis, t1, &st[..=n])?;
        let t0 = p[axis];
        let g = |s: f64| -> Result<Vec<f64>, PotentialError> {
            let col = |r: f64| -> Result<Vec<f64>, PotentialError> {
                let v = h.eval(&at(p, axis, r))?;
                Ok((0..n).map(|i| v[(i, axis)]).collect())
            };
            let (dpsi, _) = integrate(&col, t0, s, inner_tol, opts.max_depth)?;
            let av = a.eval(&at(p, axis, s))?;
            Ok(vec![(0..n).map(|k| (st[k] + dpsi[k]) * av[(k, axis)]).sum()])
        };
        let (dq, s) = integrate(&g, t0, t1, opts.abs_tol, opts.max_depth)?;
        stats.merge(s);
        next.push(st[n + 1] + dq[0]);
        Ok((next, stats))
    };
    let (states, stats) = fill(grid, base, &natural(n), vec![0.0; n + 2], &leg)?;
    let path = if opts.check_paths {
        let other = fill(grid, base, &reversed(n), vec![0.0; n + 2], &leg)?.0;
        states.iter().zip(&other).map(|(x, y)| (x[n + 1] - y[n + 1]).abs()).fold(0.0, f64::max)
    } else {
        0.0
    };
    Ok(PotentialGrid {
        vars: spec.vars.clone(),
        axes: grid.axes.clone(),
        base_point: base.to_vec(),
        scalar_name: Some("q".into()),
        scalar: Some(states.iter().map(|s| s[n + 1]).collect()),
        vector_name: None,
        vector: None,
        quadrature: info(stats, opts),
        curl_residual: curl,
        path_residual: path,
        symmetry_residual: eta.symmetry_residual,
    })
}
