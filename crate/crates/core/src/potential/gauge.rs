//! Comparison of reconstructed potentials modulo affine functions.

use super::{PotentialError, PotentialGrid};
use crate::exprlang::{eval_scalar, Expr, Params};
use nalgebra::{DMatrix, DVector};

/// Least-squares fit of `values - reference ≈ a·u + b`; returns the
/// largest absolute residual after the fit.
pub fn affine_gauge_compare_values(points: &[Vec<f64>], values: &[f64], reference: &[f64]) -> f64 {
    let m = points.len();
    if m == 0 {
        return 0.0;
    }
    let n = points[0].len();
    let a = DMatrix::from_fn(m, n + 1, |r, c| if c < n { points[r][c] } else { 1.0 });
    let d = DVector::from_iterator(m, values.iter().zip(reference).map(|(v, r)| v - r));
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&d, 1e-12).expect("SVD with both factors computed");
    (d - a * coef).amax()
}

/// Grid scalar against a closed form in the grid variables.
pub fn affine_gauge_compare(grid: &PotentialGrid, closed_form: &Expr, params: &Params) -> Result<f64, PotentialError> {
    let values = grid.scalar.as_ref().ok_or_else(|| PotentialError::Invalid("grid has no scalar field".into()))?;
    let points = grid.grid().points();
    let reference: Vec<f64> = points.iter().map(|p| eval_scalar(closed_form, p, params)).collect::<Result<_, _>>()?;
    Ok(affine_gauge_compare_values(&points, values, &reference))
}
