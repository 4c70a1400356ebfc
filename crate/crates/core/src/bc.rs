//! Boundary maps and initial profiles.
//!
//! A [`BcSpec`] holds the `2 x n` expressions `F[j][i](t, u1..un)`: at the end
//! `r = j` the second fundamental form of the boundary must equal
//! `F[j][i](t, f_1^2, ..., f_n^2)` times `Q` on the `i`-th summand. In terms
//! of the warping functions that reads
//!
//! ```text
//! f_i'(j) = (-1)^(j+1) h(j) F[j][i](t, f(j)^2) / f_i(j)
//! ```
//!
//! [`InitialProfiles`] are expressions in `r` for `h` and every `f_i`,
//! differentiated symbolically once at construction.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::HomogeneousSpaceData;
use crate::expr::{self, parse_expr, Bindings, Expr, ExprError, Var};
use crate::geometry::FlowState;

/// Absolute tolerance of the compatibility gate.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BcError {
    #[error("{context}: {source}")]
    Expr {
        context: String,
        #[source]
        source: ExprError,
    },
    #[error("{context} may only depend on {allowed}, found `{found}`")]
    ForeignVariable { context: String, allowed: &'static str, found: Var },
    #[error("expected {expected} expressions per boundary end, found {found}")]
    Arity { expected: usize, found: usize },
    #[error("initial profile `{0}` is not positive on [0, 1]")]
    NonPositiveProfile(String),
}

fn expr_err(context: impl Into<String>) -> impl FnOnce(ExprError) -> BcError {
    let context = context.into();
    move |source| BcError::Expr { context, source }
}

/// Boundary maps `F[j][i]`, `j` in `{0, 1}`, `i` in `0..n`.
#[derive(Debug, Clone, PartialEq)]
pub struct BcSpec {
    exprs: [Vec<Expr>; 2],
}

impl BcSpec {
    /// Expressions may mention `t` and `u1..un` only.
    pub fn new(exprs: [Vec<Expr>; 2]) -> Result<Self, BcError> {
        let n = exprs[0].len();
        if n == 0 || exprs[1].len() != n {
            return Err(BcError::Arity { expected: n.max(1), found: exprs[1].len() });
        }
        for (j, side) in exprs.iter().enumerate() {
            for (i, e) in side.iter().enumerate() {
                if let Some(v) = e
                    .free_vars()
                    .into_iter()
                    .find(|v| !matches!(v, Var::T) && !matches!(v, Var::U(k) if *k <= n))
                {
                    return Err(BcError::ForeignVariable {
                        context: format!("F[{j}][{}]", i + 1),
                        allowed: "t and u1..un",
                        found: v,
                    });
                }
            }
        }
        Ok(Self { exprs })
    }

    /// Parses `src[j][i]` for `n` summands.
    pub fn parse(src: &[Vec<String>; 2], n: usize) -> Result<Self, BcError> {
        let mut exprs: [Vec<Expr>; 2] = Default::default();
        for j in 0..2 {
            if src[j].len() != n {
                return Err(BcError::Arity { expected: n, found: src[j].len() });
            }
            for (i, s) in src[j].iter().enumerate() {
                exprs[j].push(parse_expr(s, n).map_err(expr_err(format!("F[{j}][{}]", i + 1)))?);
            }
        }
        Self::new(exprs)
    }

    /// `F = 0`: both boundary components totally geodesic.
    pub fn totally_geodesic(n: usize) -> Self {
        Self { exprs: [vec![Expr::Const(0.0); n], vec![Expr::Const(0.0); n]] }
    }

    /// Umbilic boundary `F[j][i] = lambda(t) u_i`.
    pub fn umbilic(lambda: &Expr, n: usize) -> Result<Self, BcError> {
        if let Some(v) = lambda.free_vars().into_iter().find(|v| *v != Var::T) {
            return Err(BcError::ForeignVariable { context: "lambda".into(), allowed: "t", found: v });
        }
        let side: Vec<Expr> = (1..=n)
            .map(|i| Expr::Mul(Box::new(lambda.clone()), Box::new(Expr::Var(Var::U(i)))))
            .collect();
        Self::new([side.clone(), side])
    }

    pub fn n(&self) -> usize {
        self.exprs[0].len()
    }

    pub fn expr(&self, j: usize, i: usize) -> &Expr {
        &self.exprs[j][i]
    }

    /// `F[j][i](t, u)`.
    pub fn eval(&self, j: usize, i: usize, t: f64, u: &[f64]) -> Result<f64, ExprError> {
        self.exprs[j][i].eval(&Bindings::new().t(t).u(u))
    }

    /// True when every map is identically zero.
    pub fn is_zero(&self) -> bool {
        self.exprs.iter().flatten().all(|e| e.as_constant() == Some(0.0))
    }
}

/// Initial profiles with their first and second `r`-derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialProfiles {
    pub h: Expr,
    pub f: Vec<Expr>,
    h_r: Expr,
    f_r: Vec<Expr>,
}

impl InitialProfiles {
    /// Profiles may mention `r` only.
    pub fn new(h: Expr, f: Vec<Expr>) -> Result<Self, BcError> {
        if f.is_empty() {
            return Err(BcError::Arity { expected: 1, found: 0 });
        }
        let check = |e: &Expr, name: String| match e.free_vars().into_iter().find(|v| *v != Var::R) {
            Some(v) => Err(BcError::ForeignVariable { context: name, allowed: "r", found: v }),
            None => Ok(()),
        };
        check(&h, "init.h".into())?;
        for (i, e) in f.iter().enumerate() {
            check(e, format!("init.f[{}]", i + 1))?;
        }
        let h_r = h.differentiate(Var::R);
        let f_r = f.iter().map(|e| e.differentiate(Var::R)).collect();
        Ok(Self { h, f, h_r, f_r })
    }

    pub fn parse(h: &str, f: &[String]) -> Result<Self, BcError> {
        let h = parse_expr(h, 0).map_err(expr_err("init.h"))?;
        let f = f
            .iter()
            .enumerate()
            .map(|(i, s)| parse_expr(s, 0).map_err(expr_err(format!("init.f[{}]", i + 1))))
            .collect::<Result<_, _>>()?;
        Self::new(h, f)
    }

    /// Constant profiles `h = 1`, `f_i = 1`.
    pub fn unit(n: usize) -> Self {
        Self::new(Expr::Const(1.0), vec![Expr::Const(1.0); n]).expect("constants are valid profiles")
    }

    pub fn n(&self) -> usize {
        self.f.len()
    }

    fn at(e: &Expr, r: f64) -> Result<f64, ExprError> {
        e.eval(&Bindings::new().r(r))
    }

    pub fn h_at(&self, r: f64) -> Result<f64, ExprError> {
        Self::at(&self.h, r)
    }

    pub fn h_r_at(&self, r: f64) -> Result<f64, ExprError> {
        Self::at(&self.h_r, r)
    }

    pub fn f_at(&self, i: usize, r: f64) -> Result<f64, ExprError> {
        Self::at(&self.f[i], r)
    }

    pub fn f_r_at(&self, i: usize, r: f64) -> Result<f64, ExprError> {
        Self::at(&self.f_r[i], r)
    }

    /// Samples the profiles on the grid with `n_cells` cells at time 0.
    pub fn sample(&self, n_cells: usize) -> Result<FlowState, BcError> {
        let r = crate::fd::nodes(n_cells);
        let sample = |e: &Expr, name: &str| -> Result<Vec<f64>, BcError> {
            let v = r
                .iter()
                .map(|&x| Self::at(e, x))
                .collect::<Result<Vec<_>, _>>()
                .map_err(expr_err(name))?;
            if v.iter().any(|&x| x <= 0.0) {
                return Err(BcError::NonPositiveProfile(name.to_string()));
            }
            Ok(v)
        };
        let h = sample(&self.h, "init.h")?;
        let f = self
            .f
            .iter()
            .enumerate()
            .map(|(i, e)| sample(e, &format!("init.f[{}]", i + 1)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(FlowState { t: 0.0, h, f })
    }

    /// The fixed gauge field `W = h_r/h^2 - sum_k d_k f_kr/(h f_k)` of the
    /// initial metric and the source `S = -W_r`, both as expressions in `r`.
    pub fn gauge_terms(&self, d: &[usize]) -> (Expr, Expr) {
        use expr::build::{add, div, mul, pow, sub};
        let mut sum = Expr::Const(0.0);
        for (k, (f, fr)) in self.f.iter().zip(&self.f_r).enumerate() {
            let term = div(fr.clone(), mul(self.h.clone(), f.clone()));
            sum = add(sum, mul(Expr::Const(d[k] as f64), term));
        }
        let w = sub(div(self.h_r.clone(), pow(self.h.clone(), 2.0)), sum);
        let s = expr::build::neg(w.differentiate(Var::R));
        (w, s)
    }
}

/// Compatibility residuals `res[j][i]` between the initial profiles and the
/// boundary maps at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompatibilityReport {
    pub residuals: [Vec<f64>; 2],
}

impl CompatibilityReport {
    pub fn max_abs(&self) -> f64 {
        self.residuals.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn compatible(&self) -> bool {
        self.residuals.iter().flatten().all(|v| v.abs() < COMPATIBILITY_TOL)
    }
}

impl std::fmt::Display for CompatibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (j, side) in self.residuals.iter().enumerate() {
            for (i, v) in side.iter().enumerate() {
                if j + i > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "(j={j}, i={}): {v:.3e}", i + 1)?;
            }
        }
        Ok(())
    }
}

/// `res[j][i] = f_i'(j) - (-1)^(j+1) h(j) F[j][i](0, f(j)^2) / f_i(j)`,
/// with the profile derivatives taken symbolically.
pub fn check_compatibility(
    bc: &BcSpec,
    init: &InitialProfiles,
    space: &HomogeneousSpaceData,
) -> Result<CompatibilityReport, BcError> {
    let n = space.n();
    for found in [bc.n(), init.n()] {
        if found != n {
            return Err(BcError::Arity { expected: n, found });
        }
    }
    let mut residuals: [Vec<f64>; 2] = Default::default();
    for (j, side) in residuals.iter_mut().enumerate() {
        let r = j as f64;
        let sign = if j == 0 { -1.0 } else { 1.0 };
        let h = init.h_at(r).map_err(expr_err("init.h"))?;
        let f = (0..n)
            .map(|i| init.f_at(i, r))
            .collect::<Result<Vec<_>, _>>()
            .map_err(expr_err("init.f"))?;
        let u: Vec<f64> = f.iter().map(|v| v * v).collect();
        for i in 0..n {
            let fr = init.f_r_at(i, r).map_err(expr_err(format!("d/dr init.f[{}]", i + 1)))?;
            let big_f = bc.eval(j, i, 0.0, &u).map_err(expr_err(format!("F[{j}][{}]", i + 1)))?;
            side.push(fr - sign * h * big_f / f[i]);
        }
    }
    Ok(CompatibilityReport { residuals })
}
