//! Independent cross-checks.
//!
//! * [`warped_ricci_classical`]: Ricci curvature of the doubly warped
//!   product `h^2 dr^2 + f^2 g_F` over an Einstein fibre, with symbolic
//!   derivatives of expression profiles. It shares no differencing code with
//!   [`crate::geometry::ricci`].
//! * [`fd_check`]: error of the fourth-order derivative stencils against an
//!   analytic derivative.
//! * [`estimate_order`]: convergence order from errors on refined grids.

use serde::Serialize;
use thiserror::Error;

use crate::expr::{Bindings, Expr, ExprError, Var};
use crate::fd;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
}

/// Ricci components of `h^2 dr^2 + f^2 g_F` where `Ric(g_F) = einstein g_F`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WarpedRicci {
    /// Coefficient of `dr^2`.
    pub ric_rr: f64,
    /// Coefficient of `g_F`.
    pub fiber_coeff: f64,
}

/// Classical warped-product formulas
///
/// ```text
/// Ric(dr, dr) = -k (f''/f - h' f'/(h f))
/// Ric|_F      = einstein - f f''/h^2 + f h' f'/h^3 + f'^2/h^2 - k f'^2/h^2
/// ```
///
/// with `k` the fibre dimension and derivatives taken symbolically.
pub fn warped_ricci_classical(
    h: &Expr,
    f: &Expr,
    fiber_dim: usize,
    fiber_einstein: f64,
    r: f64,
) -> Result<WarpedRicci, OracleError> {
    let env = Bindings::new().r(r);
    let h1 = h.differentiate(Var::R);
    let f1 = f.differentiate(Var::R);
    let f2 = f1.differentiate(Var::R);
    let (hv, hp) = (h.eval(&env)?, h1.eval(&env)?);
    let (fv, fp, fpp) = (f.eval(&env)?, f1.eval(&env)?, f2.eval(&env)?);
    let k = fiber_dim as f64;
    let ric_rr = -k * (fpp / fv - hp * fp / (hv * fv));
    let fiber_coeff = fiber_einstein - fv * fpp / (hv * hv) + fv * hp * fp / hv.powi(3) + fp * fp / (hv * hv)
        - k * fp * fp / (hv * hv);
    Ok(WarpedRicci { ric_rr, fiber_coeff })
}

/// Largest difference between the fourth-order stencil derivative of
/// `samples` and `analytic` on the uniform grid.
pub fn fd_check(samples: &[f64], analytic: &[f64]) -> f64 {
    let numeric = fd::d1(samples, fd::spacing(samples.len()));
    numeric.iter().zip(analytic).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

/// Least-squares convergence order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderEstimate {
    pub resolutions: Vec<usize>,
    pub errors: Vec<f64>,
    /// Fitted slope of `log error` against `log (1/N)`.
    pub slope: f64,
}

/// Fits `error ~ C N^{-slope}`. Needs at least three resolutions with
/// positive, finite errors that strictly decrease as `N` grows.
pub fn estimate_order(resolutions: &[usize], errors: &[f64]) -> Result<OrderEstimate, OracleError> {
    let degenerate = |m: String| Err(OracleError::DegenerateFit(m));
    if resolutions.len() != errors.len() {
        return degenerate("resolutions and errors differ in length".into());
    }
    if resolutions.len() < 3 {
        return degenerate(format!("need at least three points, got {}", resolutions.len()));
    }
    if let Some(e) = errors.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return degenerate(format!("error {e} is not positive and finite"));
    }
    if resolutions.windows(2).any(|w| w[1] <= w[0]) {
        return degenerate("resolutions must increase".into());
    }
    if errors.windows(2).any(|w| w[1] >= w[0]) {
        return degenerate(format!("errors do not decrease under refinement: {errors:?}"));
    }
    let xs: Vec<f64> = resolutions.iter().map(|&n| -(n as f64).ln()).collect();
    let ys: Vec<f64> = errors.iter().map(|e| e.ln()).collect();
    let len = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / len;
    let my = ys.iter().sum::<f64>() / len;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    Ok(OrderEstimate { resolutions: resolutions.to_vec(), errors: errors.to_vec(), slope: sxy / sxx })
}
