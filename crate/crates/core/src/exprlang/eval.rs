//! Evaluation over any [`Scalar`] carrier.

use super::{Builtin, Expr, ExprError, Jet2, Params, Scalar, Taylor};

fn domain(node: &Expr, point: &[f64]) -> ExprError {
    ExprError::Domain { node: node.to_string(), point: point.to_vec() }
}

/// Integer value of a constant exponent, if it is one.
fn integer_exponent(v: f64) -> Option<i64> {
    (v.fract() == 0.0 && v.abs() <= 1.0e6).then_some(v as i64)
}

/// Evaluate `e` with variables bound to `vars`.  `point` is only used for
/// error reports.
pub fn eval_generic<S: Scalar>(e: &Expr, vars: &[S], params: &Params, point: &[f64]) -> Result<S, ExprError> {
    let check = |s: S| if s.all_finite() { Ok(s) } else { Err(domain(e, point)) };
    let proto = || vars.first().map(|v| v.lift(0.0));
    match e {
        Expr::Num(v) => Ok(match proto() {
            Some(p) => p.lift(*v),
            None => return Err(domain(e, point)),
        }),
        Expr::Var(i) => vars.get(*i).cloned().ok_or_else(|| domain(e, point)),
        Expr::Param(p) => {
            let v = params.get(p).ok_or_else(|| ExprError::UnknownIdentifier(p.clone()))?;
            proto().map(|s| s.lift(*v)).ok_or_else(|| domain(e, point))
        }
        Expr::Neg(a) => Ok(eval_generic(a, vars, params, point)?.neg()),
        Expr::Add(a, b) => check(eval_generic(a, vars, params, point)?.add(&eval_generic(b, vars, params, point)?)),
        Expr::Sub(a, b) => check(eval_generic(a, vars, params, point)?.sub(&eval_generic(b, vars, params, point)?)),
        Expr::Mul(a, b) => check(eval_generic(a, vars, params, point)?.mul(&eval_generic(b, vars, params, point)?)),
        Expr::Div(a, b) => {
            let x = eval_generic(a, vars, params, point)?;
            let y = eval_generic(b, vars, params, point)?;
            if y.value() == 0.0 {
                return Err(domain(e, point));
            }
            check(x.div(&y))
        }
        Expr::Pow(a, b) => {
            let base = eval_generic(a, vars, params, point)?;
            if b.is_constant() {
                let k = eval_generic(b, &[0.0f64], params, point)?;
                if let Some(k) = integer_exponent(k) {
                    if k < 0 && base.value() == 0.0 {
                        return Err(domain(e, point));
                    }
                    return check(base.powi(k));
                }
                if base.value() <= 0.0 {
                    return Err(domain(e, point));
                }
                return check(base.ln().scale(k).exp());
            }
            if base.value() <= 0.0 {
                return Err(domain(e, point));
            }
            let ex = eval_generic(b, vars, params, point)?;
            check(ex.mul(&base.ln()).exp())
        }
        Expr::Call(f, a) => {
            let x = eval_generic(a, vars, params, point)?;
            let v = x.value();
            let r = match f {
                Builtin::Sqrt if v < 0.0 => return Err(domain(e, point)),
                Builtin::Ln if v <= 0.0 => return Err(domain(e, point)),
                Builtin::Sqrt => x.sqrt(),
                Builtin::Exp => x.exp(),
                Builtin::Ln => x.ln(),
                Builtin::Sin => x.sin(),
                Builtin::Cos => x.cos(),
                Builtin::Tan => x.tan(),
                Builtin::Arctan => x.atan(),
            };
            check(r)
        }
    }
}

pub fn eval_scalar(e: &Expr, point: &[f64], params: &Params) -> Result<f64, ExprError> {
    if point.is_empty() {
        return eval_generic(e, &[0.0f64], params, point);
    }
    eval_generic(e, point, params, point)
}

pub fn eval_jet2(e: &Expr, point: &[f64], params: &Params) -> Result<Jet2, ExprError> {
    eval_generic(e, &Jet2::seed(point), params, point)
}

/// Taylor expansion of order `k` about `point`.
pub fn eval_taylor(e: &Expr, point: &[f64], params: &Params, k: usize) -> Result<Taylor, ExprError> {
    eval_generic(e, &Taylor::seed(point, k), params, point)
}
