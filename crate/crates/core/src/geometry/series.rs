//! Truncated Taylor data of a frame, its inverse and its connection.

use super::GeometryError;
use crate::exprlang::{Scalar, Taylor};
use nalgebra::DMatrix;

/// Frame, co-frame and Christoffel symbols as Taylor series about a point.
///
/// If the frame entries have order `K`, the coefficients `Γ` have order
/// `K - 1`, and each application of [`FrameSeries::dir`] lowers the order
/// by one more.
#[derive(Clone, Debug)]
pub struct FrameSeries {
    pub n: usize,
    pub point: Vec<f64>,
    /// `r[m][j]`: component `m` of `R_j`.
    pub r: Vec<Vec<Taylor>>,
    /// `l[k][m]`: row `k` of `L = R^{-1}`.
    pub l: Vec<Vec<Taylor>>,
    /// `Γ_ij^k` at flat index `(i n + j) n + k`.
    pub gamma: Vec<Taylor>,
}

/// `|det R| < 1e-12 ‖R‖_F^n` counts as singular.
pub(crate) fn singular(r: &[Vec<f64>]) -> bool {
    let n = r.len();
    let m = DMatrix::from_fn(n, n, |i, j| r[i][j]);
    let norm = m.norm();
    !(m.determinant().abs() >= 1e-12 * norm.powi(n as i32)) || norm == 0.0
}

/// Gauss-Jordan inverse with partial pivoting on the value parts.
pub(crate) fn invert<S: Scalar>(a: &[Vec<S>]) -> Vec<Vec<S>> {
    let n = a.len();
    let mut m: Vec<Vec<S>> = a.to_vec();
    let mut inv: Vec<Vec<S>> = (0..n)
        .map(|i| (0..n).map(|j| a[0][0].lift(if i == j { 1.0 } else { 0.0 })).collect())
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| m[x][col].value().abs().total_cmp(&m[y][col].value().abs()))
            .expect("non-empty pivot range");
        m.swap(col, piv);
        inv.swap(col, piv);
        let p = m[col][col].clone();
        for j in 0..n {
            m[col][j] = m[col][j].div(&p);
            inv[col][j] = inv[col][j].div(&p);
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = m[row][col].clone();
            for j in 0..n {
                m[row][j] = m[row][j].sub(&f.mul(&m[col][j]));
                inv[row][j] = inv[row][j].sub(&f.mul(&inv[col][j]));
            }
        }
    }
    inv
}

impl FrameSeries {
    /// Build from columns `cols[j][m]`.
    pub fn from_columns(cols: Vec<Vec<Taylor>>, point: &[f64]) -> Result<Self, GeometryError> {
        let n = cols.len();
        let r: Vec<Vec<Taylor>> = (0..n).map(|m| (0..n).map(|j| cols[j][m].clone()).collect()).collect();
        Self::from_matrix(r, point)
    }

    /// Build from the matrix `r[m][j]`.
    pub fn from_matrix(r: Vec<Vec<Taylor>>, point: &[f64]) -> Result<Self, GeometryError> {
        let n = r.len();
        let vals: Vec<Vec<f64>> = r.iter().map(|row| row.iter().map(|x| x.value()).collect()).collect();
        if singular(&vals) {
            return Err(GeometryError::SingularFrame { point: point.to_vec() });
        }
        let l = invert(&r);
        let mut fs = FrameSeries { n, point: point.to_vec(), r, l, gamma: Vec::new() };
        let mut gamma = Vec::with_capacity(n * n * n);
        for i in 0..n {
            // r_i applied to every frame entry
            let dr: Vec<Vec<Taylor>> = (0..n).map(|m| (0..n).map(|j| fs.dir(i, &fs.r[m][j])).collect()).collect();
            for j in 0..n {
                for k in 0..n {
                    let mut acc = fs.l[k][0].mul(&dr[0][j]);
                    for m in 1..n {
                        acc = acc.add(&fs.l[k][m].mul(&dr[m][j]));
                    }
                    gamma.push(acc);
                }
            }
        }
        fs.gamma = gamma;
        Ok(fs)
    }

    pub fn order(&self) -> usize {
        self.r[0][0].order()
    }

    /// Directional derivative `r_i(f) = Σ_l R[l][i] ∂_l f`.
    pub fn dir(&self, i: usize, f: &Taylor) -> Taylor {
        let mut acc = self.r[0][i].mul(&f.partial(0));
        for l in 1..self.n {
            acc = acc.add(&self.r[l][i].mul(&f.partial(l)));
        }
        acc
    }

    #[inline]
    pub fn g(&self, i: usize, j: usize, k: usize) -> &Taylor {
        &self.gamma[(i * self.n + j) * self.n + k]
    }

    pub fn c(&self, i: usize, j: usize, k: usize) -> Taylor {
        self.g(i, j, k).sub(self.g(j, i, k))
    }

    /// Values of `Γ` at the expansion point.
    pub fn gamma_values(&self) -> Vec<f64> {
        self.gamma.iter().map(|t| t.value()).collect()
    }

    /// Frame with columns `α^j R_j`.
    pub fn scaled(&self, alpha: &[Taylor]) -> Result<FrameSeries, GeometryError> {
        let r = (0..self.n)
            .map(|m| (0..self.n).map(|j| alpha[j].mul(&self.r[m][j])).collect())
            .collect();
        FrameSeries::from_matrix(r, &self.point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_series_matrix() {
        let x = Taylor::seed(&[1.3, 0.4], 4);
        let a = vec![vec![x[0].clone(), x[1].clone()], vec![x[1].mul(&x[1]), x[0].exp()]];
        let inv = invert(&a);
        for i in 0..2 {
            for j in 0..2 {
                let mut s = a[i][0].mul(&inv[0][j]);
                s = s.add(&a[i][1].mul(&inv[1][j]));
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((s.value() - target).abs() < 1e-14);
                assert!(s.partial(0).max_abs() < 1e-12 && s.partial(1).max_abs() < 1e-12);
            }
        }
    }

    #[test]
    fn singular_detection() {
        assert!(singular(&[vec![1.0, 2.0], vec![2.0, 4.0]]));
        assert!(!singular(&[vec![1.0, 0.0], vec![0.0, 1e-3]]));
    }
}
