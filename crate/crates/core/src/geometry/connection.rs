//! Pointwise connection data and the torsion/curvature identities.

use super::series::singular;
use super::{frame_jacobians, FrameSeries, FrameSpec, GeometryError};
use crate::exprlang::{Scalar, Taylor};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Frame, co-frame and connection coefficients at one point.
#[derive(Clone, Debug, Serialize)]
pub struct ConnectionEval {
    pub n: usize,
    pub point: Vec<f64>,
    /// `r[m][j]`: component `m` of `R_j`.
    pub r: Vec<Vec<f64>>,
    /// `l[k][m]`: row `k` of `L = R^{-1}`.
    pub l: Vec<Vec<f64>>,
    /// `dr[j][m][l] = ∂_l R[m][j]`.
    pub dr: Vec<Vec<Vec<f64>>>,
    /// `Γ_ij^k` at `(i n + j) n + k`.
    pub gamma: Vec<f64>,
    /// `c_ij^k` at `(i n + j) n + k`.
    pub c: Vec<f64>,
    pub torsion_residual: f64,
    pub curvature_residual: f64,
}

impl ConnectionEval {
    #[inline]
    pub fn gamma(&self, i: usize, j: usize, k: usize) -> f64 {
        self.gamma[(i * self.n + j) * self.n + k]
    }

    #[inline]
    pub fn c(&self, i: usize, j: usize, k: usize) -> f64 {
        self.c[(i * self.n + j) * self.n + k]
    }

    /// Largest `|Γ|` at the point.
    pub fn gamma_scale(&self) -> f64 {
        self.gamma.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    /// Largest relative deviation of `L R` from the identity.
    pub fn inverse_residual(&self) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for k in 0..n {
            for j in 0..n {
                let s: f64 = (0..n).map(|m| self.l[k][m] * self.r[m][j]).sum();
                let t = if k == j { 1.0 } else { 0.0 };
                worst = worst.max((s - t).abs());
            }
        }
        worst
    }
}

fn invert_values(r: &[Vec<f64>], point: &[f64]) -> Result<Vec<Vec<f64>>, GeometryError> {
    let n = r.len();
    if singular(r) {
        return Err(GeometryError::SingularFrame { point: point.to_vec() });
    }
    let m = DMatrix::from_fn(n, n, |i, j| r[i][j]);
    let inv = m.try_inverse().ok_or_else(|| GeometryError::SingularFrame { point: point.to_vec() })?;
    Ok((0..n).map(|i| (0..n).map(|j| inv[(i, j)]).collect()).collect())
}

/// `Γ_ij^k = L^k (DR_j) R_i` from exact jet gradients, with the torsion
/// and curvature residuals attached.
pub fn eval_connection(spec: &FrameSpec, point: &[f64]) -> Result<ConnectionEval, GeometryError> {
    let mut ce = connection_at(spec, point)?;
    let res = check_symmetry_flatness(spec, point)?;
    ce.torsion_residual = res.torsion;
    ce.curvature_residual = res.curvature;
    Ok(ce)
}

/// As [`eval_connection`] but without the identity residuals (left at 0).
pub fn connection_at(spec: &FrameSpec, point: &[f64]) -> Result<ConnectionEval, GeometryError> {
    let n = spec.n;
    let (r, dr) = frame_jacobians(spec, point)?;
    let l = invert_values(&r, point)?;
    let mut gamma = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            // (DR_j) R_i
            let v: Vec<f64> = (0..n).map(|m| (0..n).map(|q| dr[j][m][q] * r[q][i]).sum()).collect();
            for k in 0..n {
                gamma[(i * n + j) * n + k] = (0..n).map(|m| l[k][m] * v[m]).sum();
            }
        }
    }
    let mut c = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                c[(i * n + j) * n + k] = gamma[(i * n + j) * n + k] - gamma[(j * n + i) * n + k];
            }
        }
    }
    Ok(ConnectionEval {
        n,
        point: point.to_vec(),
        r,
        l,
        dr,
        gamma,
        c,
        torsion_residual: 0.0,
        curvature_residual: 0.0,
    })
}

/// Structure coefficients from the Lie bracket `[r_i, r_j] = (DR_j)R_i - (DR_i)R_j`,
/// solved in the frame basis by LU.
pub fn structure_coefficients_bracket(spec: &FrameSpec, point: &[f64]) -> Result<Vec<f64>, GeometryError> {
    let n = spec.n;
    let (r, dr) = frame_jacobians(spec, point)?;
    if singular(&r) {
        return Err(GeometryError::SingularFrame { point: point.to_vec() });
    }
    let lu = DMatrix::from_fn(n, n, |i, j| r[i][j]).lu();
    let mut c = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let b = DVector::from_fn(n, |m, _| {
                (0..n).map(|q| dr[j][m][q] * r[q][i] - dr[i][m][q] * r[q][j]).sum::<f64>()
            });
            let x = lu.solve(&b).ok_or_else(|| GeometryError::SingularFrame { point: point.to_vec() })?;
            for k in 0..n {
                c[(i * n + j) * n + k] = x[k];
            }
        }
    }
    Ok(c)
}

/// Normalized identity residuals at a point.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct Residuals {
    pub torsion: f64,
    pub curvature: f64,
}

/// Torsion `Γ_ij^k - Γ_ji^k - c_ij^k` (with `c` from the bracket path) and
/// curvature of the connection, both as maximum normalized violations.
pub fn check_symmetry_flatness(spec: &FrameSpec, point: &[f64]) -> Result<Residuals, GeometryError> {
    let fs = spec.series(point, 2)?;
    let cb = structure_coefficients_bracket(spec, point)?;
    let n = spec.n;
    let mut torsion: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let (a, b) = (fs.g(i, j, k).value(), fs.g(j, i, k).value());
                let cv = cb[(i * n + j) * n + k];
                torsion = torsion.max((a - b - cv).abs() / (1.0 + a.abs() + b.abs() + cv.abs()));
            }
        }
    }
    Ok(Residuals { torsion, curvature: curvature_residual(&fs) })
}

/// Maximum over `(a, b, c, t)` of
/// `r_a(Γ_bc^t) - r_b(Γ_ac^t) + Γ_bc^s Γ_as^t - Γ_ac^s Γ_bs^t - c_ab^s Γ_sc^t`,
/// each normalized by one plus the sum of its term magnitudes.
pub fn curvature_residual(fs: &FrameSeries) -> f64 {
    let n = fs.n;
    let dg: Vec<f64> = (0..n)
        .flat_map(|a| (0..n * n * n).map(move |idx| (a, idx)))
        .map(|(a, idx)| fs.dir(a, &fs.gamma[idx]).value())
        .collect();
    let g = fs.gamma_values();
    let gi = |i: usize, j: usize, k: usize| g[(i * n + j) * n + k];
    let d = |a: usize, i: usize, j: usize, k: usize| dg[a * n * n * n + (i * n + j) * n + k];
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for t in 0..n {
                    let mut sum = d(a, b, c, t) - d(b, a, c, t);
                    let mut mag = d(a, b, c, t).abs() + d(b, a, c, t).abs();
                    for s in 0..n {
                        let cab = gi(a, b, s) - gi(b, a, s);
                        let terms = [gi(b, c, s) * gi(a, s, t), -gi(a, c, s) * gi(b, s, t), -cab * gi(s, c, t)];
                        for x in terms {
                            sum += x;
                            mag += x.abs();
                        }
                    }
                    worst = worst.max(sum.abs() / (1.0 + mag));
                }
            }
        }
    }
    worst
}

/// Same residual for a series whose `Γ` has been modified by the caller.
pub fn curvature_residual_perturbed(fs: &FrameSeries, idx: usize, delta: &Taylor) -> f64 {
    let mut p = fs.clone();
    p.gamma[idx] = p.gamma[idx].add(delta);
    curvature_residual(&p)
}
