//! Compatibility of the Darboux-type system for rich frames.
//!
//! In Riemann coordinates the rank-0 β-system becomes
//! `∂_k γ^j = Z_jk^j γ^j - Z_jj^k γ^k`; cross-differentiating in `k, m`
//! yields coefficients of `γ^j, γ^k, γ^m` that must vanish.

use super::SystemsError;
use crate::geometry::{is_rich, pullback_connection, FrameSpec, GeometryError, Pullback, RiemannChart};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct DarbouxReport {
    /// Largest of the three coefficient expressions over distinct `(j, k, m)`.
    pub coefficient_residual: f64,
    pub symmetry: f64,
    pub flatness: f64,
    /// `max |Z_ij^k|` over distinct indices.
    pub offdiag: f64,
    /// Maximum of all of the above.
    pub residual: f64,
}

pub fn darboux_from_pullback(pb: &Pullback) -> DarbouxReport {
    let n = pb.n;
    let (z, dz) = (|i, j, k| pb.z(i, j, k), |a, i, j, k| pb.dz(a, i, j, k));
    let mut coef: f64 = 0.0;
    let mut offdiag: f64 = 0.0;
    for j in 0..n {
        for k in 0..n {
            for m in 0..n {
                if j == k || k == m || j == m {
                    continue;
                }
                offdiag = offdiag.max(z(j, k, m).abs());
                let cj = dz(m, k, j, j) - dz(k, m, j, j);
                let ck = dz(m, j, j, k) + z(j, j, k) * z(m, k, k) + z(j, j, m) * z(m, m, k) - z(m, j, j) * z(j, j, k);
                let cm = dz(k, j, j, m) + z(j, j, m) * z(k, m, m) + z(j, j, k) * z(k, k, m) - z(k, j, j) * z(j, j, m);
                coef = coef.max(cj.abs()).max(ck.abs()).max(cm.abs());
            }
        }
    }
    let symmetry = pb.symmetry_residual();
    let flatness = pb.flatness_residual();
    let residual = coef.max(symmetry).max(flatness).max(offdiag);
    DarbouxReport { coefficient_residual: coef, symmetry, flatness, offdiag, residual }
}

/// Coefficient residual at `w`.  The frame is checked for richness on
/// its own sample set first.
pub fn darboux_compatibility(spec: &FrameSpec, chart: &RiemannChart, w: &[f64]) -> Result<DarbouxReport, SystemsError> {
    let (rich, _) = is_rich(spec, &spec.samples(20, 0), 1e-8)?;
    if !rich {
        return Err(GeometryError::NotRich.into());
    }
    let pb = pullback_connection(spec, chart, w)?;
    Ok(darboux_from_pullback(&pb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exprlang::Params;
    use crate::geometry::halton_points;

    fn cylindrical_with_chart() -> (FrameSpec, RiemannChart) {
        let spec = FrameSpec::parse(
            &["u1", "u2", "u3"],
            Params::new(),
            &[vec!["u1", "u2", "0"], vec!["-u2", "u1", "0"], vec!["0", "0", "1"]],
            vec![[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]],
            vec![1.5, 1.5, 0.5],
        )
        .unwrap();
        let s = |v: &[&str]| v.iter().map(|x| x.to_string()).collect::<Vec<_>>();
        let chart = RiemannChart::parse(
            &spec.vars,
            &s(&["w1", "w2", "w3"]),
            &Params::new(),
            &s(&["0.5*ln(u1^2+u2^2)", "arctan(u2/u1)", "u3"]),
            &s(&["exp(w1)*cos(w2)", "exp(w1)*sin(w2)", "w3"]),
            None,
        )
        .unwrap();
        (spec, chart)
    }

    #[test]
    fn cylindrical_chart_is_compatible() {
        let (spec, chart) = cylindrical_with_chart();
        let ws = halton_points(&[[0.4, 0.9], [0.3, 1.0], [0.0, 1.0]], 20, 0);
        for w in ws {
            let r = darboux_compatibility(&spec, &chart, &w).unwrap();
            assert!(r.residual < 1e-8, "{r:?}");
        }
    }

    #[test]
    fn standard_frame_identity_chart() {
        let spec = FrameSpec::standard(3);
        let r = darboux_compatibility(&spec, &RiemannChart::identity(3), &[0.3, 0.4, 0.5]).unwrap();
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn corrupted_z_is_detected() {
        let (spec, chart) = cylindrical_with_chart();
        let mut pb = pullback_connection(&spec, &chart, &[0.5, 0.6, 0.5]).unwrap();
        pb.z[(0 * 3 + 1) * 3 + 2] += 0.1;
        assert!(darboux_from_pullback(&pb).residual > 0.01);
    }

    #[test]
    fn nonrich_frame_rejected() {
        let spec = FrameSpec::parse(
            &["u1", "u2", "u3"],
            Params::new(),
            &[vec!["-1", "0", "u2+1"], vec!["u3/(u2^2-1)", "-1", "u1"], vec!["1", "0", "1-u2"]],
            vec![[0.0, 1.0], [1.5, 2.5], [0.0, 1.0]],
            vec![0.5, 2.0, 0.5],
        )
        .unwrap();
        let r = darboux_compatibility(&spec, &RiemannChart::identity(3), &[0.5, 2.0, 0.5]);
        assert!(matches!(r, Err(SystemsError::Geometry(GeometryError::NotRich))));
    }
}
