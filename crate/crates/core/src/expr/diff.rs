//! Symbolic differentiation with light algebraic simplification.
//!
//! The simplifying constructors fold constant subtrees and drop additive
//! zeros and multiplicative ones, which keeps derivative trees of the usual
//! profiles (polynomials, trig, exponentials) small enough to print.

use super::{Expr, Func, Var};

impl Expr {
    /// Exact derivative with respect to `var`.
    pub fn differentiate(&self, var: Var) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(v) => Expr::Const(if *v == var { 1.0 } else { 0.0 }),
            Expr::Neg(a) => neg(a.differentiate(var)),
            Expr::Add(a, b) => add(a.differentiate(var), b.differentiate(var)),
            Expr::Sub(a, b) => sub(a.differentiate(var), b.differentiate(var)),
            Expr::Mul(a, b) => add(
                mul(a.differentiate(var), (**b).clone()),
                mul((**a).clone(), b.differentiate(var)),
            ),
            Expr::Div(a, b) => {
                let da = a.differentiate(var);
                let db = b.differentiate(var);
                sub(
                    div(da, (**b).clone()),
                    div(mul((**a).clone(), db), pow((**b).clone(), 2.0)),
                )
            }
            Expr::Pow(a, p) => mul(
                mul(Expr::Const(*p), pow((**a).clone(), p - 1.0)),
                a.differentiate(var),
            ),
            Expr::Call(func, a) => {
                let inner = (**a).clone();
                let outer = match func {
                    Func::Sin => call(Func::Cos, inner),
                    Func::Cos => neg(call(Func::Sin, inner)),
                    Func::Exp => call(Func::Exp, inner),
                    Func::Log => div(Expr::Const(1.0), inner),
                    Func::Sqrt => div(Expr::Const(0.5), call(Func::Sqrt, inner)),
                };
                mul(outer, a.differentiate(var))
            }
        }
    }
}

fn is_const(e: &Expr, value: f64) -> bool {
    matches!(e, Expr::Const(c) if *c == value)
}

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Const(c) => Expr::Const(-c),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x + y),
        (a, b) if is_const(&a, 0.0) => b,
        (a, b) if is_const(&b, 0.0) => a,
        (a, Expr::Neg(b)) => Expr::Sub(Box::new(a), b),
        (a, b) => Expr::Add(Box::new(a), Box::new(b)),
    }
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x - y),
        (a, b) if is_const(&b, 0.0) => a,
        (a, b) if is_const(&a, 0.0) => neg(b),
        (a, Expr::Neg(b)) => Expr::Add(Box::new(a), b),
        (a, b) => Expr::Sub(Box::new(a), Box::new(b)),
    }
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) => Expr::Const(x * y),
        (a, b) if is_const(&a, 0.0) || is_const(&b, 0.0) => Expr::Const(0.0),
        (a, b) if is_const(&a, 1.0) => b,
        (a, b) if is_const(&b, 1.0) => a,
        (a, b) if is_const(&a, -1.0) => neg(b),
        (a, b) if is_const(&b, -1.0) => neg(a),
        (a, b) => Expr::Mul(Box::new(a), Box::new(b)),
    }
}

pub fn div(a: Expr, b: Expr) -> Expr {
    match (a, b) {
        (Expr::Const(x), Expr::Const(y)) if y != 0.0 => Expr::Const(x / y),
        (a, _) if is_const(&a, 0.0) => Expr::Const(0.0),
        (a, b) if is_const(&b, 1.0) => a,
        (a, b) => Expr::Div(Box::new(a), Box::new(b)),
    }
}

pub fn pow(a: Expr, p: f64) -> Expr {
    match a {
        _ if p == 0.0 => Expr::Const(1.0),
        a if p == 1.0 => a,
        Expr::Const(c) if (c.powf(p)).is_finite() && (c >= 0.0 || p.fract() == 0.0) => {
            Expr::Const(c.powf(p))
        }
        a => Expr::Pow(Box::new(a), p),
    }
}

pub fn call(func: Func, a: Expr) -> Expr {
    Expr::Call(func, Box::new(a))
}
