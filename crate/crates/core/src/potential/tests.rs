use super::*;
use crate::exprlang::parse_expression;
use crate::geometry::RiemannChart;

fn s(v: &[&str]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

fn params(kv: &[(&str, f64)]) -> Params {
    kv.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn frame(cols: &[Vec<&str>], domain: Vec<[f64; 2]>, p: Params) -> FrameSpec {
    let base = domain.iter().map(|b| 0.5 * (b[0] + b[1])).collect();
    FrameSpec::parse(&["u1", "u2", "u3"], p, cols, domain, base).unwrap()
}

fn beta(spec: &FrameSpec, p: Params, b: &[&str]) -> BetaCandidate {
    BetaCandidate::parse(&spec.vars, p, &s(b), None).unwrap()
}

fn lambda(spec: &FrameSpec, p: Params, l: &[&str]) -> LambdaCandidate {
    LambdaCandidate::parse(&spec.vars, p, &s(l), None).unwrap()
}

fn expr(src: &str, vars: &[String], p: &Params) -> Expr {
    parse_expression(src, vars, &p.keys().cloned().collect::<Vec<_>>()).unwrap()
}

fn ex6_10() -> FrameSpec {
    frame(&[vec!["0", "u2", "u3"], vec!["u1", "0", "u3"], vec!["1", "1", "0"]], vec![[1.0, 2.0]; 3], Params::new())
}

fn ex6_10_beta(k1: f64, k2: f64) -> BetaCandidate {
    let p = params(&[("K1", k1), ("K2", k2)]);
    beta(&ex6_10(), p, &["(K1-K2)*(u1+u2)", "K2*(u1+u2)", "K1*(u1+u2)/(u1*u2)"])
}

fn ex6_11() -> FrameSpec {
    frame(&[vec!["1", "u2", "u3"], vec!["1", "0", "u3"], vec!["1", "1", "0"]], vec![[1.0, 2.0]; 3], Params::new())
}

fn ex6_6() -> FrameSpec {
    frame(
        &[vec!["-1", "0", "u2+1"], vec!["u3/(u2^2-1)", "-1", "u1"], vec!["1", "0", "1-u2"]],
        vec![[-0.5, 0.5], [1.5, 2.5], [-0.5, 0.5]],
        Params::new(),
    )
}

fn ex6_6_lambda() -> LambdaCandidate {
    lambda(&ex6_6(), params(&[("C1", 1.0), ("C2", 2.0)]), &["C1-2*C2", "C1+(u2-1)*C2", "C1"])
}

fn ex6_6_flux(u: &[f64]) -> Vec<f64> {
    let (c1, c2) = (1.0, 2.0);
    let (u1, u2, u3) = (u[0], u[1], u[2]);
    vec![
        (c1 + c2 * (u2 - 1.0)) * u1 + c2 * u3,
        u2 * (c1 - c2 + 0.5 * c2 * u2),
        c2 * u1 * (1.0 - u2 * u2) - c2 * u2 * u3 + (c1 - c2) * u3,
    ]
}

fn gas() -> (FrameSpec, BetaCandidate, LambdaCandidate) {
    let p = params(&[("gamma", 1.4)]);
    let c = "sqrt(gamma)*exp(S/2)*v^(-(gamma+1)/2)";
    let m = format!("-{c}");
    let cols = vec![vec!["1", c, "0"], vec!["-exp(S)*v^(-gamma)", "0", "-gamma*exp(S)*v^(-gamma-1)"], vec!["1", m.as_str(), "0"]];
    let spec = FrameSpec::parse(&["v", "u", "S"], p.clone(), &cols, vec![[1.0, 2.0], [-1.0, 1.0], [0.0, 1.0]], vec![1.5, 0.0, 0.5]).unwrap();
    let b = BetaCandidate::parse(
        &spec.vars,
        p.clone(),
        &s(&["gamma*exp(S)*v^(-gamma-1)", "0.5*gamma*exp(3*S)*v^(-3*gamma-1)/(gamma-1)", "gamma*exp(S)*v^(-gamma-1)"]),
        None,
    )
    .unwrap();
    let l = LambdaCandidate::parse(&spec.vars, p, &[format!("-{c}"), "0".into(), c.to_string()], None).unwrap();
    (spec, b, l)
}

fn opts() -> StaircaseOptions {
    StaircaseOptions::default()
}

#[test]
fn identity_integrates_to_position() {
    let m = MatrixField::identity(3);
    let (f, _) = integrate_jacobian(&m, &[0.0; 3], &[0.3, -1.2, 2.0], &opts()).unwrap();
    for (a, b) in f.iter().zip([0.3, -1.2, 2.0]) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn hessian_of_closed_form_is_curl_free() {
    let vars = s(&["u1", "u2", "u3"]);
    let p = Params::new();
    // D² of ½u1² + (1−u2) ln u3
    let e = |x: &str| expr(x, &vars, &p);
    let m = MatrixField::explicit(
        vec![vec![e("1"), e("0"), e("0")], vec![e("0"), e("0"), e("-1/u3")], vec![e("0"), e("-1/u3"), e("-(1-u2)/u3^2")]],
        p.clone(),
    )
    .unwrap();
    for pt in ex6_11().samples(10, 0) {
        assert!(curl_residual(&m, &pt).unwrap() < 1e-12);
    }
}

#[test]
fn curl_detects_non_solution() {
    let spec = ex6_10();
    let good = MatrixField::hessian(&spec, &ex6_10_beta(2.0, 1.0)).unwrap();
    let bad = MatrixField::hessian(&spec, &beta(&spec, Params::new(), &["1", "1", "1"])).unwrap();
    let pts = spec.samples(10, 0);
    assert!(pts.iter().all(|p| curl_residual(&good, p).unwrap() < 1e-9));
    assert!(pts.iter().map(|p| curl_residual(&bad, p).unwrap()).fold(0.0, f64::max) > 1e-3);
}

#[test]
fn flux_matches_closed_form_on_both_paths() {
    let spec = ex6_6();
    let m = MatrixField::jacobian(&spec, &ex6_6_lambda()).unwrap();
    let base = spec.base_point.clone();
    let f0 = ex6_6_flux(&base);
    for t in spec.samples(6, 3) {
        let (a, _) = integrate_jacobian(&m, &base, &t, &opts()).unwrap();
        let (b, _) = staircase::integrate_jacobian_ordered(&m, &base, &t, &[2, 1, 0], &opts()).unwrap();
        let exact = ex6_6_flux(&t);
        for i in 0..3 {
            assert!((a[i] - (exact[i] - f0[i])).abs() < 1e-8);
            assert!((a[i] - b[i]).abs() < 1e-8);
        }
    }
}

#[test]
fn flux_grid_for_ex6_6() {
    let spec = ex6_6();
    let grid = GridSpec::uniform(&spec.domain, &[5, 5, 5]);
    let out = reconstruct_flux(&spec, &ex6_6_lambda(), &spec.base_point, &grid, &opts()).unwrap();
    let f0 = ex6_6_flux(&spec.base_point);
    let v = out.vector.as_ref().unwrap();
    for (k, p) in grid.points().iter().enumerate() {
        let e = ex6_6_flux(p);
        for i in 0..3 {
            assert!((v[k][i] - (e[i] - f0[i])).abs() < 1e-8);
        }
    }
    assert!(out.path_residual < 1e-7);
}

#[test]
fn eta_for_ex6_11_matches_closed_form() {
    let spec = ex6_11();
    let b = beta(&spec, params(&[("K", 1.0)]), &["-K*u2", "K*u2", "K"]);
    let grid = GridSpec::uniform(&spec.domain, &[11, 11, 11]);
    let out = reconstruct_eta(&spec, &b, &spec.base_point, &grid, &opts()).unwrap();
    let closed = expr("0.5*u1^2 + (1-u2)*ln(u3)", &spec.vars, &Params::new());
    assert!(affine_gauge_compare(&out, &closed, &Params::new()).unwrap() < 1e-6);
    assert!(out.path_residual < 1e-7);
    assert!(out.symmetry_residual < 1e-8);
    let base = grid.index(&[5, 5, 5]);
    assert_eq!(out.scalar.as_ref().unwrap()[base], 0.0);
    assert!(out.vector.as_ref().unwrap()[base].iter().all(|&x| x == 0.0));
}

#[test]
fn eta_for_ex6_10_matches_closed_form() {
    let spec = ex6_10();
    let grid = GridSpec::uniform(&spec.domain, &[6, 6, 6]);
    let out = reconstruct_eta(&spec, &ex6_10_beta(1.0, 0.0), &spec.base_point, &grid, &opts()).unwrap();
    // the printed display has u3*ln(u3) where the Hessian requires u1*ln(u3)
    let closed = expr("u1*ln(u1) + u2*ln(u2) - u1*ln(u3)", &spec.vars, &Params::new());
    assert!(affine_gauge_compare(&out, &closed, &Params::new()).unwrap() < 1e-6);
    let printed = expr("u1*ln(u1) + u2*ln(u2) - u3*ln(u3)", &spec.vars, &Params::new());
    assert!(affine_gauge_compare(&out, &printed, &Params::new()).unwrap() > 1e-3);
}

#[test]
fn zero_beta_gives_zero_eta() {
    let spec = ex6_10();
    let grid = GridSpec::uniform(&spec.domain, &[3, 3, 3]);
    let out = reconstruct_eta(&spec, &BetaCandidate::zero(3), &spec.base_point, &grid, &opts()).unwrap();
    assert!(out.scalar.unwrap().iter().all(|&x| x.abs() < 1e-14));
}

#[test]
fn trivial_flux_is_a_translate() {
    let spec = ex6_10();
    let grid = GridSpec::uniform(&spec.domain, &[3, 3, 3]);
    let out = reconstruct_flux(&spec, &LambdaCandidate::constant(3, 2.5), &spec.base_point, &grid, &opts()).unwrap();
    for (p, f) in grid.points().iter().zip(out.vector.unwrap()) {
        for i in 0..3 {
            assert!((f[i] - 2.5 * (p[i] - spec.base_point[i])).abs() < 1e-9);
        }
    }
}

#[test]
fn euler_flux_jacobian_has_the_frame_as_eigenvectors() {
    let (spec, _, l) = gas();
    let m = MatrixField::jacobian(&spec, &l).unwrap();
    for p in spec.samples(8, 0) {
        let df = m.eval(&p).unwrap();
        let r = spec.eval_matrix(&p).unwrap();
        let lam = l.values(&p).unwrap();
        for j in 0..3 {
            for i in 0..3 {
                let v: f64 = (0..3).map(|k| df[(i, k)] * r[k][j]).sum();
                assert!((v - lam[j] * r[i][j]).abs() < 1e-7);
            }
        }
        // the physical flux (−u, p, 0) up to a constant
        let (f, _) = integrate_jacobian(&m, &spec.base_point, &p, &opts()).unwrap();
        let pr = |x: &[f64]| (x[2]).exp() * x[0].powf(-1.4);
        assert!((f[0] + (p[1] - spec.base_point[1])).abs() < 1e-8);
        assert!((f[1] - (pr(&p) - pr(&spec.base_point))).abs() < 1e-8);
        assert!(f[2].abs() < 1e-8);
    }
}

#[test]
fn trivial_lambda_gives_scaled_eta_as_entropy_flux() {
    let spec = ex6_11();
    let b = beta(&spec, params(&[("K", 1.0)]), &["-K*u2", "K*u2", "K"]);
    let grid = GridSpec::uniform(&spec.domain, &[4, 4, 4]);
    let eta = reconstruct_eta(&spec, &b, &spec.base_point, &grid, &opts()).unwrap();
    let q = entropy_flux(&spec, &LambdaCandidate::constant(3, 3.0), &b, &spec.base_point, &grid, &opts()).unwrap();
    let pts = grid.points();
    let target: Vec<f64> = eta.scalar.unwrap().iter().map(|e| 3.0 * e).collect();
    assert!(affine_gauge_compare_values(&pts, q.scalar.as_ref().unwrap(), &target) < 1e-8);
}

#[test]
fn euler_entropy_flux_is_velocity_times_pressure() {
    let (spec, b, l) = gas();
    let grid = GridSpec::uniform(&spec.domain, &[3, 3, 3]);
    let q = entropy_flux(&spec, &l, &b, &spec.base_point, &grid, &opts()).unwrap();
    // η = ½(ε + u²/2) for this normalization, so q = ½ u p
    let pts = grid.points();
    let target: Vec<f64> = pts.iter().map(|x| 0.5 * x[1] * x[2].exp() * x[0].powf(-1.4)).collect();
    assert!(affine_gauge_compare_values(&pts, q.scalar.as_ref().unwrap(), &target) < 1e-8);
    assert!(q.path_residual < 1e-7);
}

#[test]
fn entropy_flux_refuses_non_solution() {
    let spec = ex6_11();
    let b = beta(&spec, Params::new(), &["1", "2", "3"]);
    let grid = GridSpec::uniform(&spec.domain, &[3, 3, 3]);
    let l = LambdaCandidate::constant(3, 1.0);
    assert!(matches!(entropy_flux(&spec, &l, &b, &spec.base_point, &grid, &opts()), Err(PotentialError::CurlViolation { .. })));
}

#[test]
fn gauge_fit_absorbs_affine_terms() {
    let grid = GridSpec::uniform(&[[0.0, 1.0], [0.0, 1.0]], &[4, 4]);
    let pts = grid.points();
    let f: Vec<f64> = pts.iter().map(|p| p[0] * p[1] + p[0].sin()).collect();
    assert!(affine_gauge_compare_values(&pts, &f, &f) < 1e-15);
    let g: Vec<f64> = f.iter().zip(&pts).map(|(v, p)| v + 3.0 * p[0] - 7.0).collect();
    assert!(affine_gauge_compare_values(&pts, &g, &f) < 1e-12);
    let h: Vec<f64> = f.iter().zip(&pts).map(|(v, p)| v + p[1] * p[1]).collect();
    assert!(affine_gauge_compare_values(&pts, &h, &f) > 1e-2);
}

#[test]
fn export_formats() {
    let spec = ex6_10();
    let grid = GridSpec::uniform(&spec.domain, &[2, 2, 2]);
    let out = reconstruct_eta(&spec, &ex6_10_beta(1.0, 0.0), &spec.base_point, &grid, &opts()).unwrap();
    let mut csv = Vec::new();
    write_csv(&out, &mut csv).unwrap();
    let text = String::from_utf8(csv).unwrap();
    assert!(text.starts_with("u1,u2,u3,eta,grad_eta_1,grad_eta_2,grad_eta_3\n"));
    assert_eq!(text.lines().count(), 9);
    let mut js = Vec::new();
    write_json(&out, &mut js).unwrap();
    let v: serde_json::Value = serde_json::from_slice(&js).unwrap();
    assert_eq!(v["scalar"].as_array().unwrap().len(), 8);
}

// rich orthogonal frame, polar-type Riemann coordinates
fn polar() -> (FrameSpec, RiemannChart) {
    let spec = frame(
        &[vec!["u1", "u2", "0"], vec!["-u2", "u1", "0"], vec!["0", "0", "1"]],
        vec![[0.5, 2.0], [0.5, 2.0], [0.0, 1.0]],
        Params::new(),
    );
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

fn polar_gamma(w: &[f64]) -> [f64; 3] {
    let e = w[0].exp();
    [e * e * (1.0 + e * e), e * e + e.powi(4) / 3.0 + e * w[1].cos(), 2.0 + w[2].sin()]
}

fn polar_boundary(grid: &DarbouxGrid) -> Vec<BoundaryFn> {
    let b = grid.base_point();
    let t = s(&["t"]);
    let p = params(&[("a", b[0]), ("c", b[1])]);
    let mk = |src: &str| BoundaryFn::Expr { expr: expr(src, &t, &p), params: p.clone() };
    vec![
        mk("exp(2*t)*(1+exp(2*t))"),
        mk("exp(2*a)+exp(4*a)/3+exp(a)*cos(t)"),
        mk("2+sin(t)"),
    ]
}

fn polar_error(h: f64) -> (f64, DarbouxSolution) {
    let (spec, chart) = polar();
    let grid = DarbouxGrid::new(&[0.0, 0.0, 0.0], &[0.5, 0.5, 0.5], h, &[0.25, 0.25, 0.25]).unwrap();
    let sol = solve_rich_beta(&spec, &chart, &polar_boundary(&grid), &grid).unwrap();
    let gs = grid.spec();
    let err = (0..gs.len())
        .map(|f| {
            let exact = polar_gamma(&gs.point(f));
            (0..3).map(|j| (sol.gamma[f][j] - exact[j]).abs()).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    (err, sol)
}

#[test]
fn darboux_reproduces_closed_form() {
    let (err, sol) = polar_error(1.0 / 64.0);
    assert!(err < 1e-6, "error {err:e}");
    assert!(sol.fd_residual < 1e-6);
}

#[test]
fn darboux_converges_at_fourth_order() {
    let (e1, _) = polar_error(1.0 / 16.0);
    let (e2, _) = polar_error(1.0 / 32.0);
    let ratio = e1 / e2;
    assert!((12.0..=20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn darboux_zero_data_gives_zero() {
    let (spec, chart) = polar();
    let grid = DarbouxGrid::new(&[0.0; 3], &[0.5; 3], 0.125, &[0.25; 3]).unwrap();
    let zero = BoundaryFn::Table { x: vec![0.0, 0.25, 0.5], y: vec![0.0; 3] };
    let sol = solve_rich_beta(&spec, &chart, &vec![zero; 3], &grid).unwrap();
    assert!(sol.gamma.iter().flatten().all(|&g| g == 0.0));
}

#[test]
fn darboux_rejects_non_rich_frame() {
    let spec = ex6_10();
    let grid = DarbouxGrid::new(&[0.0; 3], &[0.5; 3], 0.25, &[0.25; 3]).unwrap();
    let zero = BoundaryFn::Table { x: vec![0.0, 1.0], y: vec![0.0; 2] };
    let r = solve_rich_beta(&spec, &RiemannChart::identity(3), &vec![zero; 3], &grid);
    assert!(matches!(r, Err(PotentialError::NotRich)));
}

#[test]
fn boundary_table_interpolates_cubics() {
    let x: Vec<f64> = (0..8).map(|i| i as f64 * 0.5).collect();
    let y: Vec<f64> = x.iter().map(|t| t * t * t - t).collect();
    let b = BoundaryFn::Table { x, y };
    for t in [0.1, 1.3, 3.4] {
        assert!((b.eval(t).unwrap() - (t * t * t - t)).abs() < 1e-12);
    }
}
