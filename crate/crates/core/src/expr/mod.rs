//! A small arithmetic expression language for boundary maps and initial
//! profiles.
//!
//! Expressions are built over the variables `r`, `t` and `u1..un`, the
//! operators `+ - * / ^` and the functions `sin cos exp log sqrt`. Exponents
//! must be constants, so every tree is closed under [`Expr::differentiate`].
//!
//! ```
//! use symflow::expr::{parse_expr, Bindings, Var};
//!
//! let e = parse_expr("0.5*u1 + sin(t)", 1).unwrap();
//! let de = e.differentiate(Var::U(1));
//! assert_eq!(de.eval(&Bindings::new().t(0.0).u(&[2.0])).unwrap(), 0.5);
//! ```

mod diff;
mod parse;

use std::fmt;

use thiserror::Error;

pub use parse::parse_expr;

/// Simplifying constructors, the same ones the differentiator uses.
pub mod build {
    pub use super::diff::{add, call, div, mul, neg, pow, sub};
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExprError {
    #[error("syntax error at byte {offset}: {message}")]
    Syntax { offset: usize, message: String },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("unbound variable `{0}`")]
    UnboundVariable(Var),
}

/// Free variable of an expression. `U(i)` is 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Var {
    R,
    T,
    U(usize),
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::R => write!(f, "r"),
            Var::T => write!(f, "t"),
            Var::U(i) => write!(f, "u{i}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
        }
    }

    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(Var),
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, f64),
    Call(Func, Box<Expr>),
}

/// Variable values for [`Expr::eval`]. Unset variables are reported as
/// [`ExprError::UnboundVariable`] when an expression needs them.
#[derive(Debug, Clone, Copy, Default)]
pub struct Bindings<'a> {
    r: Option<f64>,
    t: Option<f64>,
    u: &'a [f64],
}

impl<'a> Bindings<'a> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn r(mut self, r: f64) -> Self {
        self.r = Some(r);
        self
    }

    pub fn t(mut self, t: f64) -> Self {
        self.t = Some(t);
        self
    }

    /// Values of `u1..un`, in order.
    pub fn u(mut self, u: &'a [f64]) -> Self {
        self.u = u;
        self
    }

    fn get(&self, v: Var) -> Result<f64, ExprError> {
        match v {
            Var::R => self.r,
            Var::T => self.t,
            Var::U(i) => self.u.get(i.wrapping_sub(1)).copied(),
        }
        .ok_or(ExprError::UnboundVariable(v))
    }
}

fn checked(value: f64, what: &str) -> Result<f64, ExprError> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ExprError::Domain(format!("{what} produced a non-finite value")))
    }
}

impl Expr {
    pub fn constant(c: f64) -> Self {
        Expr::Const(c)
    }

    pub fn var(v: Var) -> Self {
        Expr::Var(v)
    }

    pub fn eval(&self, env: &Bindings<'_>) -> Result<f64, ExprError> {
        match self {
            Expr::Const(c) => Ok(*c),
            Expr::Var(v) => env.get(*v),
            Expr::Neg(a) => Ok(-a.eval(env)?),
            Expr::Add(a, b) => checked(a.eval(env)? + b.eval(env)?, "addition"),
            Expr::Sub(a, b) => checked(a.eval(env)? - b.eval(env)?, "subtraction"),
            Expr::Mul(a, b) => checked(a.eval(env)? * b.eval(env)?, "multiplication"),
            Expr::Div(a, b) => {
                let num = a.eval(env)?;
                let den = b.eval(env)?;
                if den == 0.0 {
                    return Err(ExprError::Domain("division by zero".into()));
                }
                checked(num / den, "division")
            }
            Expr::Pow(a, p) => {
                let base = a.eval(env)?;
                if base < 0.0 && p.fract() != 0.0 {
                    return Err(ExprError::Domain(format!(
                        "negative base {base} raised to non-integer power {p}"
                    )));
                }
                if base == 0.0 && *p < 0.0 {
                    return Err(ExprError::Domain("zero raised to a negative power".into()));
                }
                let value = if p.fract() == 0.0 && p.abs() <= i32::MAX as f64 {
                    base.powi(*p as i32)
                } else {
                    base.powf(*p)
                };
                checked(value, "power")
            }
            Expr::Call(func, a) => {
                let x = a.eval(env)?;
                let value = match func {
                    Func::Sin => x.sin(),
                    Func::Cos => x.cos(),
                    Func::Exp => x.exp(),
                    Func::Log => {
                        if x <= 0.0 {
                            return Err(ExprError::Domain(format!("log of non-positive {x}")));
                        }
                        x.ln()
                    }
                    Func::Sqrt => {
                        if x < 0.0 {
                            return Err(ExprError::Domain(format!("sqrt of negative {x}")));
                        }
                        x.sqrt()
                    }
                };
                checked(value, func.name())
            }
        }
    }

    /// Free variables, sorted and deduplicated.
    pub fn free_vars(&self) -> Vec<Var> {
        let mut out = Vec::new();
        self.collect_vars(&mut out);
        out.sort();
        out.dedup();
        out
    }

    fn collect_vars(&self, out: &mut Vec<Var>) {
        match self {
            Expr::Const(_) => {}
            Expr::Var(v) => out.push(*v),
            Expr::Neg(a) | Expr::Pow(a, _) | Expr::Call(_, a) => a.collect_vars(out),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.collect_vars(out);
                b.collect_vars(out);
            }
        }
    }

    /// Constant value of a variable-free expression, if it evaluates.
    pub fn as_constant(&self) -> Option<f64> {
        if self.free_vars().is_empty() {
            self.eval(&Bindings::new()).ok()
        } else {
            None
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Add(..) | Expr::Sub(..) => 1,
            Expr::Mul(..) | Expr::Div(..) => 2,
            Expr::Neg(_) => 3,
            Expr::Pow(..) => 4,
            Expr::Const(c) if *c < 0.0 || c.is_sign_negative() => 3,
            Expr::Const(_) | Expr::Var(_) | Expr::Call(..) => 5,
        }
    }
}

fn write_operand(f: &mut fmt::Formatter<'_>, e: &Expr, min_prec: u8) -> fmt::Result {
    if e.precedence() < min_prec {
        write!(f, "({e})")
    } else {
        write!(f, "{e}")
    }
}

fn write_number(f: &mut fmt::Formatter<'_>, c: f64) -> fmt::Result {
    if c.is_sign_negative() {
        write!(f, "-")?;
    }
    let a = c.abs();
    // keep the printed literal inside the grammar (no "inf", no bare "e")
    if a != 0.0 && !(1e-5..1e16).contains(&a) {
        write!(f, "{a:e}")
    } else {
        write!(f, "{a}")
    }
}

/// Prints with the minimal parentheses the grammar needs, so that
/// `parse(print(parse(s))) == parse(s)`.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write_number(f, *c),
            Expr::Var(v) => write!(f, "{v}"),
            Expr::Neg(a) => {
                write!(f, "-")?;
                write_operand(f, a, 3)
            }
            Expr::Add(a, b) => {
                write_operand(f, a, 1)?;
                write!(f, " + ")?;
                write_operand(f, b, 2)
            }
            Expr::Sub(a, b) => {
                write_operand(f, a, 1)?;
                write!(f, " - ")?;
                write_operand(f, b, 2)
            }
            Expr::Mul(a, b) => {
                write_operand(f, a, 2)?;
                write!(f, "*")?;
                write_operand(f, b, 3)
            }
            Expr::Div(a, b) => {
                write_operand(f, a, 2)?;
                write!(f, "/")?;
                write_operand(f, b, 3)
            }
            Expr::Pow(a, p) => {
                write_operand(f, a, 5)?;
                write!(f, "^")?;
                if *p < 0.0 {
                    write!(f, "(")?;
                    write_number(f, *p)?;
                    write!(f, ")")
                } else {
                    write_number(f, *p)
                }
            }
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}
