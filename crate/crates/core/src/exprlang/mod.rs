//! A small smooth-expression language.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr  := term (('+'|'-') term)*
//! term  := unary (('*'|'/') unary)*
//! unary := '-' unary | power
//! power := atom ('^' unary)?
//! atom  := NUMBER | IDENT | IDENT '(' expr (',' expr)* ')' | '(' expr ')'
//! ```
//!
//! `^` is right associative and binds tighter than unary minus, so `-u1^2`
//! is `-(u1^2)`.  Builtins: `sqrt exp ln sin cos tan arctan`.
//!
//! A power whose exponent is a constant integer is evaluated by repeated
//! multiplication and accepts negative bases; any other exponent means
//! `exp(e * ln(b))` and requires `b > 0`.

mod eval;
mod jet;
mod lexer;
mod parser;
mod scalar;
mod series;

pub use eval::{eval_generic, eval_jet2, eval_scalar, eval_taylor};
pub use jet::Jet2;
pub use lexer::{tokenize, Tok, Token};
pub use parser::parse_expression;
pub use scalar::Scalar;
pub use series::{Layout, Taylor};

use std::collections::BTreeMap;
use std::fmt;
use thiserror::Error;

/// Parameter bindings (late-bound reals).
pub type Params = BTreeMap<String, f64>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Sqrt,
    Exp,
    Ln,
    Sin,
    Cos,
    Tan,
    Arctan,
}

impl Builtin {
    pub fn from_name(s: &str) -> Option<Builtin> {
        Some(match s {
            "sqrt" => Builtin::Sqrt,
            "exp" => Builtin::Exp,
            "ln" => Builtin::Ln,
            "sin" => Builtin::Sin,
            "cos" => Builtin::Cos,
            "tan" => Builtin::Tan,
            "arctan" => Builtin::Arctan,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Sqrt => "sqrt",
            Builtin::Exp => "exp",
            Builtin::Ln => "ln",
            Builtin::Sin => "sin",
            Builtin::Cos => "cos",
            Builtin::Tan => "tan",
            Builtin::Arctan => "arctan",
        }
    }
}

/// Expression tree.  Variables are resolved to indices at parse time.
#[derive(Clone, Debug, PartialEq)]
pub enum Expr {
    Num(f64),
    Var(usize),
    Param(String),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Builtin, Box<Expr>),
}

#[derive(Clone, Debug, PartialEq, Error)]
pub enum ExprError {
    #[error("illegal character at byte offset {offset}")]
    IllegalCharacter { offset: usize },
    #[error("syntax error at byte offset {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown identifier '{0}'")]
    UnknownIdentifier(String),
    #[error("domain error in '{node}' at {point:?}")]
    Domain { node: String, point: Vec<f64> },
}

impl Expr {
    /// True when no variable occurs in the tree.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) | Expr::Param(_) => true,
            Expr::Var(_) => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Highest variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Num(_) | Expr::Param(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(a) | Expr::Call(_, a) => a.max_var(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.max_var().max(b.max_var())
            }
        }
    }

    /// Parameter names referenced by the tree.
    pub fn params(&self, out: &mut Vec<String>) {
        match self {
            Expr::Param(p) => {
                if !out.contains(p) {
                    out.push(p.clone())
                }
            }
            Expr::Num(_) | Expr::Var(_) => {}
            Expr::Neg(a) | Expr::Call(_, a) => a.params(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.params(out);
                b.params(out);
            }
        }
    }

    /// Render with variable names; fully parenthesized so it reparses to the
    /// same tree.
    pub fn pretty(&self, vars: &[String]) -> String {
        let mut s = String::new();
        self.write(&mut s, vars);
        s
    }

    fn write(&self, s: &mut String, vars: &[String]) {
        use std::fmt::Write;
        let bin = |s: &mut String, a: &Expr, op: &str, b: &Expr| {
            s.push('(');
            a.write(s, vars);
            s.push_str(op);
            b.write(s, vars);
            s.push(')');
        };
        match self {
            Expr::Num(v) => {
                let _ = write!(s, "{v}");
            }
            Expr::Var(i) => match vars.get(*i) {
                Some(name) => s.push_str(name),
                None => {
                    let _ = write!(s, "x{i}");
                }
            },
            Expr::Param(p) => s.push_str(p),
            Expr::Neg(a) => {
                s.push_str("(-");
                a.write(s, vars);
                s.push(')');
            }
            Expr::Add(a, b) => bin(s, a, " + ", b),
            Expr::Sub(a, b) => bin(s, a, " - ", b),
            Expr::Mul(a, b) => bin(s, a, "*", b),
            Expr::Div(a, b) => bin(s, a, "/", b),
            Expr::Pow(a, b) => bin(s, a, "^", b),
            Expr::Call(f, a) => {
                s.push_str(f.name());
                s.push('(');
                a.write(s, vars);
                s.push(')');
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.pretty(&[]))
    }
}
