//! Coordinate-free reduction of the rank-1 β-system.
//!
//! Quantities are carried as Taylor series at every sample at once, so a
//! vanishing verdict is always taken over the whole sample set.  `None`
//! in a coefficient slot means "structurally zero".

use super::{ClassifyError, TraceEntry};
use crate::exprlang::{Scalar, Taylor};
use crate::geometry::FrameSeries;

/// A function known at every sample.
#[derive(Clone, Debug)]
pub(crate) struct Field(pub Vec<Taylor>);

type Coef = Option<Field>;
/// Linear form in the current unknowns.
type Lin = Vec<Coef>;

fn fadd(a: &Coef, b: &Coef) -> Coef {
    match (a, b) {
        (None, None) => None,
        (Some(x), None) | (None, Some(x)) => Some(x.clone()),
        (Some(x), Some(y)) => Some(Field(x.0.iter().zip(&y.0).map(|(p, q)| p.add(q)).collect())),
    }
}

fn fneg(a: &Coef) -> Coef {
    a.as_ref().map(|x| Field(x.0.iter().map(|p| p.neg()).collect()))
}

fn fsub(a: &Coef, b: &Coef) -> Coef {
    fadd(a, &fneg(b))
}

fn fmul(a: &Coef, b: &Coef) -> Coef {
    match (a, b) {
        (Some(x), Some(y)) => Some(Field(x.0.iter().zip(&y.0).map(|(p, q)| p.mul(q)).collect())),
        _ => None,
    }
}

fn fdiv(a: &Coef, b: &Field) -> Coef {
    a.as_ref().map(|x| Field(x.0.iter().zip(&b.0).map(|(p, q)| p.div(q)).collect()))
}

fn lin_add(a: &Lin, b: &Lin) -> Lin {
    a.iter().zip(b).map(|(x, y)| fadd(x, y)).collect()
}

fn lin_scale(a: &Lin, f: &Coef) -> Lin {
    a.iter().map(|x| fmul(x, f)).collect()
}

fn lin_dot(a: &Lin, v: &Lin) -> Coef {
    a.iter().zip(v).fold(None, |acc, (x, y)| fadd(&acc, &fmul(x, y)))
}

/// An algebraic condition `Σ coef_t y_t = 0`.
#[derive(Clone, Debug)]
pub(crate) struct Row {
    pub coef: Lin,
    /// Power of the sample scale used to make the row dimensionless.
    pub deg: i32,
    pub label: String,
}

/// Prescribed directional derivatives `r_i(y_s) = presc[s][i] · y`,
/// algebraic rows, and the β components in terms of `y`.
#[derive(Clone, Debug)]
pub(crate) struct Stage {
    pub p: usize,
    pub presc: Vec<[Option<Lin>; 3]>,
    pub alg: Vec<Row>,
    pub comps: Vec<Lin>,
}

/// Shape of the solution set found by the reduction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub(crate) enum Outcome {
    Trivial,
    /// `functions` free functions of one variable and `constants` free
    /// constants; `nonzero` β components are not identically zero.
    Free { functions: usize, constants: usize, nonzero: usize },
}

pub(crate) struct Ctx<'a> {
    pub fss: &'a [FrameSeries],
    pub scales: Vec<f64>,
    pub tol: f64,
    pub trace: Vec<TraceEntry>,
}

impl<'a> Ctx<'a> {
    pub fn new(fss: &'a [FrameSeries], tol: f64) -> Self {
        let scales = fss.iter().map(|f| f.gamma_values().iter().fold(1.0_f64, |m, x| m.max(x.abs()))).collect();
        Ctx { fss, scales, tol, trace: Vec::new() }
    }

    pub fn gamma(&self, i: usize, j: usize, k: usize) -> Field {
        Field(self.fss.iter().map(|f| f.g(i, j, k).clone()).collect())
    }

    pub fn c(&self, i: usize, j: usize, k: usize) -> Field {
        Field(self.fss.iter().map(|f| f.c(i, j, k)).collect())
    }

    fn one(&self) -> Field {
        Field(self.fss.iter().map(|f| f.gamma[0].lift(1.0)).collect())
    }

    fn dir(&self, i: usize, f: &Coef) -> Coef {
        f.as_ref().map(|x| Field(x.0.iter().zip(self.fss).map(|(t, fs)| fs.dir(i, t)).collect()))
    }

    /// Largest scaled sample value.
    pub fn magnitude(&self, f: &Coef, deg: i32) -> f64 {
        match f {
            None => 0.0,
            Some(x) => x
                .0
                .iter()
                .zip(&self.scales)
                .map(|(t, g)| t.value().abs() / f64::powi(*g, deg))
                .fold(0.0, f64::max),
        }
    }

    /// Two-threshold vanishing test; `true` means "not identically zero".
    pub fn nonzero(&mut self, f: &Coef, deg: i32, name: &str, record: bool) -> Result<bool, ClassifyError> {
        let m = self.magnitude(f, deg);
        let verdict = if m < self.tol {
            false
        } else if m > 10.0 * self.tol {
            true
        } else {
            return Err(ClassifyError::InconclusiveVanishing { condition: name.to_string(), value: m });
        };
        if record {
            self.trace.push(TraceEntry::new(name, m, if verdict { "nonzero" } else { "vanishes" }));
        }
        Ok(verdict)
    }

    fn prune(&mut self, f: Coef, deg: i32, name: &str) -> Result<Coef, ClassifyError> {
        Ok(if self.nonzero(&f, deg, name, false)? { f } else { None })
    }

    fn prune_lin(&mut self, l: Lin, deg: i32, name: &str) -> Result<Lin, ClassifyError> {
        l.into_iter().map(|c| self.prune(c, deg, name)).collect()
    }

    pub fn note(&mut self, condition: impl Into<String>, verdict: &str) {
        self.trace.push(TraceEntry::new(&condition.into(), f64::NAN, verdict));
    }
}

fn is_one(c: &Coef) -> bool {
    c.as_ref().is_some_and(|f| f.0.iter().all(|t| t.coeffs()[0] == 1.0 && t.coeffs()[1..].iter().all(|x| *x == 0.0)))
}

fn unit(p: usize, t: usize, one: &Field) -> Lin {
    (0..p).map(|s| if s == t { Some(one.clone()) } else { None }).collect()
}

/// Initial stage for a normalized frame with `β¹ = α²β² + α³β³`.
/// Unknowns are `(β², β³)`; `alpha` entries judged zero are `None`.
pub(crate) fn initial_stage(ctx: &mut Ctx, alpha: [Coef; 2]) -> Result<Stage, ClassifyError> {
    let one = ctx.one();
    let a: Lin = alpha.to_vec();
    // β components as linear forms in x
    let comps: Vec<Lin> = vec![a.clone(), unit(2, 0, &one), unit(2, 1, &one)];
    let mut presc: Vec<[Option<Lin>; 3]> = vec![[None, None, None], [None, None, None]];
    // β^j for j = 2, 3: r_i(β^j) = β^j (Γ_ij^j + c_ij^j) - β^i Γ_jj^i
    for s in 0..2 {
        let j = s + 1;
        for i in 0..3 {
            if i == j {
                continue;
            }
            let f = fadd(&Some(ctx.gamma(i, j, j)), &Some(ctx.c(i, j, j)));
            let lin = lin_add(&lin_scale(&comps[j], &f), &lin_scale(&comps[i], &fneg(&Some(ctx.gamma(j, j, i)))));
            presc[s][i] = Some(ctx.prune_lin(lin, 1, "prescription coefficient")?);
        }
    }
    // β¹: r_i(a·x) = (a·x)(Γ_i1^1 + c_i1^1) - x_i Γ_11^i for i = 2, 3
    let mut alg = Vec::new();
    for i in 1..3 {
        let t = i - 1;
        let f = fadd(&Some(ctx.gamma(i, 0, 0)), &Some(ctx.c(i, 0, 0)));
        let mut rhs = lin_add(&lin_scale(&a, &f), &lin_scale(&comps[i], &fneg(&Some(ctx.gamma(0, 0, i)))));
        for (u, au) in a.iter().enumerate() {
            // subtract r_i(a_u) x_u
            rhs[u] = fsub(&rhs[u], &ctx.dir(i, au));
            if u != t && au.is_some() {
                let p = presc[u][i].clone().expect("off-diagonal prescriptions exist");
                rhs = lin_add(&rhs, &lin_scale(&p, &fneg(au)));
            }
        }
        match &a[t] {
            Some(at) => {
                let lin: Lin = rhs.iter().map(|c| fdiv(c, at)).collect();
                presc[t][i] = Some(ctx.prune_lin(lin, 1, "prescription coefficient")?);
            }
            None => {
                let coef = ctx.prune_lin(rhs, 1, "algebraic coefficient")?;
                alg.push(Row { coef, deg: 1, label: format!("derivative of the constraint along R{}", i + 1) });
            }
        }
    }
    Ok(Stage { p: 2, presc, alg, comps })
}

/// Commutator conditions `[r_a, r_b] y_s = Σ_k c_ab^k r_k y_s`.
fn compat_rows(ctx: &mut Ctx, st: &Stage, czero: &[[[bool; 3]; 3]; 3]) -> Result<Vec<Row>, ClassifyError> {
    let mut rows = Vec::new();
    for s in 0..st.p {
        for a in 0..3 {
            for b in (a + 1)..3 {
                let (Some(pa), Some(pb)) = (&st.presc[s][a], &st.presc[s][b]) else { continue };
                match compat_one(ctx, st, s, a, b, pa, pb, czero) {
                    Some(coef) => {
                        let coef = ctx.prune_lin(coef, 2, "compatibility coefficient")?;
                        rows.push(Row { coef, deg: 2, label: format!("[R{},R{}] on unknown {}", a + 1, b + 1, s + 1) });
                    }
                    None => ctx.note(
                        format!("[R{},R{}] on unknown {}: needs an unprescribed derivative", a + 1, b + 1, s + 1),
                        "skipped",
                    ),
                }
            }
        }
    }
    Ok(rows)
}

/// `r_a(P·y)` where `r_a y_t` comes from the prescriptions.
fn apply_dir(ctx: &Ctx, st: &Stage, a: usize, p: &Lin) -> Option<Lin> {
    let mut out: Lin = vec![None; st.p];
    for (t, pt) in p.iter().enumerate() {
        if pt.is_none() {
            continue;
        }
        out[t] = fadd(&out[t], &ctx.dir(a, pt));
        let d = st.presc[t][a].as_ref()?;
        out = lin_add(&out, &lin_scale(d, pt));
    }
    Some(out)
}

#[allow(clippy::too_many_arguments)]
fn compat_one(
    ctx: &Ctx,
    st: &Stage,
    s: usize,
    a: usize,
    b: usize,
    pa: &Lin,
    pb: &Lin,
    czero: &[[[bool; 3]; 3]; 3],
) -> Option<Lin> {
    let lhs_a = apply_dir(ctx, st, a, pb)?;
    let lhs_b = apply_dir(ctx, st, b, pa)?;
    let mut row: Lin = lhs_a.iter().zip(&lhs_b).map(|(x, y)| fsub(x, y)).collect();
    for k in 0..3 {
        if czero[a][b][k] {
            continue;
        }
        let d = st.presc[s][k].as_ref()?;
        row = lin_add(&row, &lin_scale(d, &fneg(&Some(ctx.c(a, b, k)))));
    }
    Some(row)
}

/// Structural-zero table for `c_ab^k`.
pub(crate) fn c_zero_table(ctx: &mut Ctx) -> Result<[[[bool; 3]; 3]; 3], ClassifyError> {
    let mut t = [[[false; 3]; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            for k in 0..3 {
                let f = Some(ctx.c(a, b, k));
                t[a][b][k] = a == b || !ctx.nonzero(&f, 1, "structure coefficient", false)?;
            }
        }
    }
    Ok(t)
}

fn row_values(ctx: &Ctx, r: &Row, sample: usize) -> Vec<f64> {
    let g = ctx.scales[sample].powi(r.deg);
    r.coef.iter().map(|c| c.as_ref().map_or(0.0, |f| f.0[sample].value() / g)).collect()
}

/// Generic rank of the rows (at most 2 unknowns).
fn rank(ctx: &mut Ctx, rows: &[Row], p: usize) -> Result<usize, ClassifyError> {
    let mut any = 0.0_f64;
    let mut sine = 0.0_f64;
    for smp in 0..ctx.scales.len() {
        let vals: Vec<Vec<f64>> = rows.iter().map(|r| row_values(ctx, r, smp)).collect();
        for v in &vals {
            any = any.max(v.iter().fold(0.0, |m, x| m.max(x.abs())));
        }
        if p == 2 {
            let big: Vec<&Vec<f64>> = vals.iter().filter(|v| v[0].hypot(v[1]) > 10.0 * ctx.tol).collect();
            for (i, u) in big.iter().enumerate() {
                for w in &big[i + 1..] {
                    let s = (u[0] * w[1] - u[1] * w[0]).abs() / (u[0].hypot(u[1]) * w[0].hypot(w[1]));
                    sine = sine.max(s);
                }
            }
        }
    }
    let judge = |m: f64, name: &str| -> Result<bool, ClassifyError> {
        if m < ctx.tol {
            Ok(false)
        } else if m > 10.0 * ctx.tol {
            Ok(true)
        } else {
            Err(ClassifyError::InconclusiveVanishing { condition: name.to_string(), value: m })
        }
    };
    let r = if !judge(any, "constraint rows")? {
        0
    } else if p == 2 && judge(sine, "independence of constraint rows")? {
        2
    } else {
        1
    };
    ctx.trace.push(TraceEntry::new(&format!("rank of {} reduced rows in {} unknowns", rows.len(), p), any, &r.to_string()));
    Ok(r)
}

fn column_vanishes(ctx: &mut Ctx, rows: &[Row], col: usize) -> Result<bool, ClassifyError> {
    for r in rows {
        if ctx.nonzero(&r.coef[col], r.deg, "constraint column", false)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Null direction of a generic rank-1 set of rows in two unknowns.
fn null_direction(ctx: &mut Ctx, rows: &[Row]) -> Result<Lin, ClassifyError> {
    let one = ctx.one();
    if column_vanishes(ctx, rows, 1)? {
        ctx.note("second column of the reduced rows vanishes: first unknown is zero", "direction (0,1)");
        return Ok(vec![None, Some(one)]);
    }
    if column_vanishes(ctx, rows, 0)? {
        ctx.note("first column of the reduced rows vanishes: second unknown is zero", "direction (1,0)");
        return Ok(vec![Some(one), None]);
    }
    // dominant row per sample, then divide by the steadier component
    let ns = ctx.scales.len();
    let mut pick = Vec::with_capacity(ns);
    let (mut min0, mut min1) = (f64::INFINITY, f64::INFINITY);
    for smp in 0..ns {
        let (best, v) = rows
            .iter()
            .enumerate()
            .map(|(i, r)| (i, row_values(ctx, r, smp)))
            .max_by(|x, y| x.1[0].hypot(x.1[1]).total_cmp(&y.1[0].hypot(y.1[1])))
            .expect("at least one row");
        let nrm = v[0].hypot(v[1]);
        min0 = min0.min(v[0].abs() / nrm);
        min1 = min1.min(v[1].abs() / nrm);
        pick.push(best);
    }
    let take = |col: usize| -> Field {
        Field(
            (0..ns)
                .map(|smp| match &rows[pick[smp]].coef[col] {
                    Some(f) => f.0[smp].clone(),
                    None => ctx.fss[smp].gamma[0].lift(0.0),
                })
                .collect(),
        )
    };
    let (a, b) = (take(0), take(1));
    // row (A, B) has null direction (-B, A)
    if min0 >= min1 {
        ctx.note("null direction normalized by the first row coefficient", "direction (-B/A, 1)");
        Ok(vec![fdiv(&fneg(&Some(b)), &a), Some(one)])
    } else {
        ctx.note("null direction normalized by the second row coefficient", "direction (1, -A/B)");
        Ok(vec![Some(one), fdiv(&fneg(&Some(a)), &b)])
    }
}

/// Substitute `x = v y` and derive the scalar system for `y`.
fn reduce(ctx: &mut Ctx, st: &Stage, v: &Lin) -> Result<Stage, ClassifyError> {
    let mut alg = Vec::new();
    let mut presc: [Option<Lin>; 3] = [None, None, None];
    // prefer the slot where v is exactly one
    let order: Vec<usize> = {
        let mut o: Vec<usize> = (0..st.p).collect();
        o.sort_by_key(|&s| if is_one(&v[s]) { 0 } else { 1 });
        o
    };
    for i in 0..3 {
        let mut rho: Option<Coef> = None;
        for &s in &order {
            let Some(p) = &st.presc[s][i] else { continue };
            let q = lin_dot(p, v);
            match &v[s] {
                None => {
                    let coef = vec![ctx.prune(q, 1, "reduced coefficient")?];
                    alg.push(Row { coef, deg: 1, label: format!("R{} derivative of a vanishing unknown", i + 1) });
                }
                Some(vs) => {
                    // v_s r_i y + r_i(v_s) y = q y
                    let num = fsub(&q, &ctx.dir(i, &v[s]));
                    match &rho {
                        None => rho = Some(ctx.prune(fdiv(&num, vs), 1, "reduced coefficient")?),
                        Some(r) => {
                            let coef = fsub(&num, &fmul(&v[s], r));
                            let coef = vec![ctx.prune(coef, 1, "reduced coefficient")?];
                            alg.push(Row { coef, deg: 1, label: format!("consistency of R{} derivatives", i + 1) });
                        }
                    }
                }
            }
        }
        presc[i] = rho.map(|r| vec![r]);
    }
    let comps = st.comps.iter().map(|c| vec![lin_dot(c, v)]).collect();
    Ok(Stage { p: 1, presc: vec![presc], alg, comps })
}

/// For one unknown, derive missing directions from commutators whose
/// right-hand side involves exactly one unprescribed direction.
fn complete_scalar(ctx: &mut Ctx, st: &mut Stage, czero: &[[[bool; 3]; 3]; 3]) -> Result<(), ClassifyError> {
    loop {
        let have: Vec<usize> = (0..3).filter(|&i| st.presc[0][i].is_some()).collect();
        if have.len() != 2 {
            return Ok(());
        }
        let (a, b) = (have[0], have[1]);
        let k = 3 - a - b;
        if czero[a][b][k] {
            return Ok(());
        }
        let (pa, pb) = (st.presc[0][a].clone().unwrap(), st.presc[0][b].clone().unwrap());
        let lhs = fsub(&apply_dir(ctx, st, a, &pb).unwrap()[0], &apply_dir(ctx, st, b, &pa).unwrap()[0]);
        let rest = fadd(&fmul(&Some(ctx.c(a, b, a)), &pa[0]), &fmul(&Some(ctx.c(a, b, b)), &pb[0]));
        let ck = ctx.c(a, b, k);
        let rho = fdiv(&fsub(&lhs, &rest), &ck);
        let rho = ctx.prune(rho, 1, "derived coefficient")?;
        ctx.note(format!("R{} derivative obtained from [R{},R{}]", k + 1, a + 1, b + 1), "derived");
        st.presc[0][k] = Some(vec![rho]);
    }
}

fn count_nonzero(ctx: &mut Ctx, comps: &[Lin]) -> Result<usize, ClassifyError> {
    let mut n = 0;
    for (k, c) in comps.iter().enumerate() {
        let mut nz = false;
        for f in c {
            nz |= ctx.nonzero(f, 0, &format!("β{} coefficient", k + 1), false)?;
        }
        ctx.note(format!("β{} in the solution", k + 1), if nz { "present" } else { "identically zero" });
        n += nz as usize;
    }
    Ok(n)
}

fn free_shape(st: &Stage) -> (usize, usize) {
    let mut f = 0;
    let mut c = 0;
    for s in 0..st.p {
        match st.presc[s].iter().filter(|x| x.is_some()).count() {
            3 => c += 1,
            _ => f += 1,
        }
    }
    (f, c)
}

/// Run the reduction to its end.
pub(crate) fn solve(ctx: &mut Ctx, mut st: Stage) -> Result<Outcome, ClassifyError> {
    let czero = c_zero_table(ctx)?;
    loop {
        if st.p == 1 {
            complete_scalar(ctx, &mut st, &czero)?;
        }
        let mut rows = st.alg.clone();
        rows.extend(compat_rows(ctx, &st, &czero)?);
        for row in &rows {
            let m = row.coef.iter().map(|c| ctx.magnitude(c, row.deg)).fold(0.0, f64::max);
            ctx.trace.push(TraceEntry::new(&row.label, m, "constraint row"));
        }
        let r = rank(ctx, &rows, st.p)?;
        if r == st.p {
            return Ok(Outcome::Trivial);
        }
        if r == 0 {
            for s in 0..st.p {
                if st.presc[s].iter().filter(|x| x.is_some()).count() < 2 {
                    return Err(ClassifyError::UnexpectedBranch(format!(
                        "unknown {} has fewer than two prescribed derivatives",
                        s + 1
                    )));
                }
            }
            let (functions, constants) = free_shape(&st);
            let nonzero = count_nonzero(ctx, &st.comps)?;
            return Ok(Outcome::Free { functions, constants, nonzero });
        }
        let v = null_direction(ctx, &rows)?;
        st = reduce(ctx, &st, &v)?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::FrameSpec;

    #[test]
    fn field_ops_follow_structural_zeros() {
        let spec = FrameSpec::standard(3);
        let fss: Vec<_> = spec.samples(3, 0).iter().map(|p| spec.series(p, 3).unwrap()).collect();
        let ctx = Ctx::new(&fss, 1e-8);
        let one = Some(ctx.one());
        assert!(fmul(&one, &None).is_none());
        assert!(fadd(&None, &None).is_none());
        let two = fadd(&one, &one);
        assert_eq!(ctx.magnitude(&two, 0), 2.0);
        assert_eq!(ctx.magnitude(&fsub(&two, &fadd(&one, &one)), 0), 0.0);
    }
}
