//! Modified flow `(g, p)` and monotonicity of the `F`-functional.
//!
//! Starting from a Ricci-flow trajectory `g~(t)`, `t` in `[0, T]`:
//!
//! 1. solve the conjugate heat equation backwards from `p~(T) = 1`,
//!    ```text
//!    p~_t = -p~_rr/h^2 - b p~_r + R p~,   b = -h_r/h^3 + sum_k d_k f_kr/(h^2 f_k),
//!    ```
//!    with `p~_r = 0` at both ends;
//! 2. solve `psi_t = p~_rho/(h^2 p~)` at `rho = psi(r, t)`, `psi(r, 0) = r`;
//! 3. set `h = psi_r h~(psi)`, `f_i = f~_i(psi)`, `p = -log p~(psi)`.
//!
//! The pair satisfies `g_t = -2(Ric + Hess p)`, `p_t = -Lap p - R`, and along
//! it `F = int (R + |grad p|^2) e^{-p} dmu` is non-decreasing when the
//! boundary is totally geodesic. [`monotonicity_report`] measures all of
//! this on the grid, together with the boundary terms that appear when the
//! mean curvature does not vanish.

use serde::Serialize;
use thiserror::Error;

use crate::algebra::HomogeneousSpaceData;
use crate::deturck::{integrate_map, pull_back, DeturckError};
use crate::fd;
use crate::geometry::{
    boundary_geometry, f_functional, ricci, ricci_plus_hess, volume_element, FlowState,
    GeometryError,
};

/// Mean curvature above this is reported as a violated hypothesis.
pub const MEAN_CURVATURE_TOL: f64 = 1e-6;
/// Relative drift of the boundary conformal class reported as violated.
pub const CONFORMAL_DRIFT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PerelmanError {
    #[error("need at least three stored times, got {0}")]
    TooFewTimes(usize),
    #[error("the backward potential lost positivity at t = {t}")]
    PositivityLost { t: f64 },
    #[error("time step {dt:.3e} exceeds the explicit stability bound {bound:.3e}")]
    StabilityBound { dt: f64, bound: f64 },
    #[error("gauge map degenerated at t = {t}: min slope {min_slope:.3e}")]
    GaugeDegenerate { t: f64, min_slope: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

impl From<DeturckError> for PerelmanError {
    fn from(e: DeturckError) -> Self {
        match e {
            DeturckError::GaugeDegenerate { t, min_slope } => PerelmanError::GaugeDegenerate { t, min_slope },
            DeturckError::Geometry(g) => PerelmanError::Geometry(g),
            other => unreachable!("gauge helpers only fail on degenerate maps: {other}"),
        }
    }
}

fn check_times(states: &[FlowState]) -> Result<Vec<f64>, PerelmanError> {
    if states.len() < 3 {
        return Err(PerelmanError::TooFewTimes(states.len()));
    }
    Ok(states.iter().map(|s| s.t).collect())
}

/// Per-node time derivative of `field` at stored index `k`.
fn time_derivative(
    times: &[f64],
    k: usize,
    fields: impl Fn(usize) -> Vec<f64>,
) -> Vec<f64> {
    let (start, w) = fd::time_derivative_weights(times, k);
    let mut out = vec![0.0; fields(start).len()];
    for (q, wq) in w.iter().enumerate() {
        for (o, v) in out.iter_mut().zip(fields(start + q)) {
            *o += wq * v;
        }
    }
    out
}

/// Scalar curvature from the flow identity `R = -h_t/h - sum_k d_k f_kt/f_k`,
/// with time derivatives from the stored states. On an exact Ricci flow this
/// equals the spatial trace of [`ricci`]; the gap is a quality diagnostic.
pub fn scalar_from_flow(states: &[FlowState], space: &HomogeneousSpaceData) -> Result<Vec<Vec<f64>>, PerelmanError> {
    let times = check_times(states)?;
    Ok((0..states.len())
        .map(|k| {
            let h_t = time_derivative(&times, k, |q| states[q].h.clone());
            let s = &states[k];
            let mut r: Vec<f64> = h_t.iter().zip(&s.h).map(|(ht, h)| -ht / h).collect();
            for (i, fi) in s.f.iter().enumerate() {
                let f_t = time_derivative(&times, k, |q| states[q].f[i].clone());
                for m in 0..r.len() {
                    r[m] -= space.d[i] as f64 * f_t[m] / fi[m];
                }
            }
            r
        })
        .collect())
}

/// Coefficients of the conjugate heat operator at one stored time:
/// `a = 1/h^2`, `b = -h_r/h^3 + sum d_k f_kr/(h^2 f_k)`, and `R`.
struct HeatCoefficients {
    a: Vec<f64>,
    b: Vec<f64>,
    scalar: Vec<f64>,
}

fn heat_coefficients(s: &FlowState, space: &HomogeneousSpaceData) -> Result<HeatCoefficients, PerelmanError> {
    let dr = s.dr();
    let h_r = fd::d1(&s.h, dr);
    let f_r: Vec<Vec<f64>> = s.f.iter().map(|fi| fd::d1(fi, dr)).collect();
    let scalar = ricci(s, space)?.scalar;
    let len = s.h.len();
    let mut a = vec![0.0; len];
    let mut b = vec![0.0; len];
    for m in 0..len {
        let h = s.h[m];
        a[m] = 1.0 / (h * h);
        let mut acc = 0.0;
        for (k, fk) in s.f.iter().enumerate() {
            acc += space.d[k] as f64 * f_r[k][m] / fk[m];
        }
        b[m] = -h_r[m] / (h * h * h) + acc / (h * h);
    }
    Ok(HeatCoefficients { a, b, scalar })
}

/// Backward conjugate heat equation on the flow, from `p~(T) = 1` at the
/// last stored time down to the first. Returns `p~` at every stored time.
///
/// Solved forward in `s = T - t` with RK4, the Neumann projection of
/// [`fd::project_neumann`] and
/// the operator coefficients interpolated cubically between stored times.
pub fn solve_backward_p(
    states: &[FlowState],
    space: &HomogeneousSpaceData,
    cfl: f64,
) -> Result<Vec<Vec<f64>>, PerelmanError> {
    let times = check_times(states)?;
    let coeffs: Vec<HeatCoefficients> =
        states.iter().map(|s| heat_coefficients(s, space)).collect::<Result<_, _>>()?;
    let (a_all, b_all, r_all): (Vec<_>, Vec<_>, Vec<_>) = coeffs
        .into_iter()
        .map(|c| (c.a, c.b, c.scalar))
        .fold((Vec::new(), Vec::new(), Vec::new()), |mut acc, (a, b, r)| {
            acc.0.push(a);
            acc.1.push(b);
            acc.2.push(r);
            acc
        });
    let len = states[0].h.len();
    let dr = fd::spacing(len);
    let last = times.len() - 1;
    let mut out = vec![Vec::new(); times.len()];
    let mut u = vec![1.0; len];
    out[last] = u.clone();

    let (mut a, mut b, mut r) = (vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let (mut u_r, mut u_rr) = (vec![0.0; len], vec![0.0; len]);
    let mut rate = |t: f64, u: &[f64], out: &mut Vec<f64>| {
        let stencil = fd::TimeStencil::new(&times, t);
        stencil.blend_into(&a_all, &mut a);
        stencil.blend_into(&b_all, &mut b);
        stencil.blend_into(&r_all, &mut r);
        fd::d1_neumann_into(u, dr, [0.0, 0.0], &mut u_r);
        fd::d2_into(u, dr, &mut u_rr);
        out.clear();
        out.extend((0..len).map(|m| a[m] * u_rr[m] + b[m] * u_r[m] - r[m] * u[m]));
    };
    let (mut k1, mut k2, mut k3, mut k4) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for k in (0..last).rev() {
        let mut t = times[k + 1];
        while t > times[k] {
            // moving backwards in t, i.e. forwards in s = T - t
            let min_h2 = a_bounds(&a_all[k], &a_all[k + 1]);
            let bound = cfl * min_h2 * dr * dr;
            let dt = bound.min(t - times[k]);
            let stage = |k: &[f64], c: f64| {
                let mut v = axpy(&u, c, k);
                fd::project_neumann(&mut v, dr, [0.0, 0.0]);
                v
            };
            rate(t, &u, &mut k1);
            let u2 = stage(&k1, 0.5 * dt);
            rate(t - 0.5 * dt, &u2, &mut k2);
            let u3 = stage(&k2, 0.5 * dt);
            rate(t - 0.5 * dt, &u3, &mut k3);
            let u4 = stage(&k3, dt);
            rate(t - dt, &u4, &mut k4);
            for m in 0..len {
                u[m] += dt / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
            }
            fd::project_neumann(&mut u, dr, [0.0, 0.0]);
            t -= dt;
            if t - times[k] <= 1e-12 * times[k + 1].max(1.0) {
                t = times[k];
            }
            if !u.iter().all(|&v| v > 0.0) {
                return Err(PerelmanError::PositivityLost { t });
            }
        }
        out[k] = u.clone();
    }
    Ok(out)
}

/// Smallest `h^2` over two neighbouring stored times, from `a = 1/h^2`.
fn a_bounds(a0: &[f64], a1: &[f64]) -> f64 {
    let max_a = a0.iter().chain(a1).copied().fold(0.0, f64::max);
    1.0 / max_a
}

fn axpy(base: &[f64], c: f64, k: &[f64]) -> Vec<f64> {
    base.iter().zip(k).map(|(b, v)| b + c * v).collect()
}

/// Solves `psi_t = p~_rho/(h^2 p~)` at `rho = psi`, `psi(r, 0) = r`. The
/// velocity vanishes at the ends because `p~_r` does, so `psi(j, t) = j`.
pub fn solve_psi(ptilde: &[Vec<f64>], states: &[FlowState]) -> Result<Vec<Vec<f64>>, PerelmanError> {
    let times = check_times(states)?;
    let velocity: Vec<Vec<f64>> = ptilde
        .iter()
        .zip(states)
        .map(|(p, s)| {
            let mut p_r = vec![0.0; p.len()];
            fd::d1_neumann_into(p, s.dr(), [0.0, 0.0], &mut p_r);
            (0..p.len()).map(|m| p_r[m] / (s.h[m] * s.h[m] * p[m])).collect()
        })
        .collect();
    Ok(integrate_map(&times, &velocity)?)
}

/// The modified-flow pair built from a Ricci-flow trajectory.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrfPair {
    pub times: Vec<f64>,
    /// The input Ricci flow.
    pub flow: Vec<FlowState>,
    pub ptilde: Vec<Vec<f64>>,
    pub psi: Vec<Vec<f64>>,
    /// Assembled metric `h = psi_r h~(psi)`, `f_i = f~_i(psi)`.
    pub g: Vec<FlowState>,
    /// `p = -log p~(psi)`.
    pub p: Vec<Vec<f64>>,
}

pub fn assemble_mrf(
    states: &[FlowState],
    ptilde: &[Vec<f64>],
    psi: &[Vec<f64>],
) -> Result<MrfPair, PerelmanError> {
    let times = check_times(states)?;
    let mut g = Vec::with_capacity(states.len());
    let mut p = Vec::with_capacity(states.len());
    for ((s, pt), x) in states.iter().zip(ptilde).zip(psi) {
        g.push(pull_back(s, x)?);
        p.push(x.iter().map(|&y| -fd::interpolate(pt, y).ln()).collect());
    }
    Ok(MrfPair {
        times,
        flow: states.to_vec(),
        ptilde: ptilde.to_vec(),
        psi: psi.to_vec(),
        g,
        p,
    })
}

/// Runs the three construction steps.
pub fn build_mrf(states: &[FlowState], space: &HomogeneousSpaceData, cfl: f64) -> Result<MrfPair, PerelmanError> {
    let ptilde = solve_backward_p(states, space, cfl)?;
    let psi = solve_psi(&ptilde, states)?;
    assemble_mrf(states, &ptilde, &psi)
}

/// Max-norm residuals of the modified flow per interior stored time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MrfResidual {
    pub times: Vec<f64>,
    /// `h_t + (zeta + p_rr - h_r p_r/h)/h`.
    pub h: Vec<f64>,
    /// `f_it + (ric_i + f_i f_ir p_r/h^2)/f_i`.
    pub f: Vec<Vec<f64>>,
    /// `p_t + Lap p + R`.
    pub p: Vec<f64>,
}

impl MrfResidual {
    pub fn max(&self) -> f64 {
        self.h
            .iter()
            .chain(self.f.iter().flatten())
            .chain(&self.p)
            .fold(0.0, |m, &v| m.max(v))
    }

    pub fn metric_max(&self) -> f64 {
        self.h.iter().chain(self.f.iter().flatten()).fold(0.0, |m, &v| m.max(v))
    }
}

/// Residual of the modified flow on interior nodes, with centered time
/// differences over the interior stored times.
pub fn mrf_residual(pair: &MrfPair, space: &HomogeneousSpaceData) -> Result<MrfResidual, PerelmanError> {
    let times = check_times(&pair.g)?;
    let n = space.n();
    let mut out = MrfResidual { times: Vec::new(), h: Vec::new(), f: vec![Vec::new(); n], p: Vec::new() };
    for k in 1..times.len() - 1 {
        let s = &pair.g[k];
        let p = &pair.p[k];
        let dr = s.dr();
        let rh = ricci_plus_hess(s, p, space)?;
        let scalar = ricci(s, space)?.scalar;
        let h_r = fd::d1(&s.h, dr);
        let f_r: Vec<Vec<f64>> = s.f.iter().map(|fi| fd::d1(fi, dr)).collect();
        let p_r = fd::d1(p, dr);
        let p_rr = fd::d2(p, dr);
        let h_t = time_derivative(&times, k, |q| pair.g[q].h.clone());
        let f_t: Vec<Vec<f64>> = (0..n).map(|i| time_derivative(&times, k, |q| pair.g[q].f[i].clone())).collect();
        let p_t = time_derivative(&times, k, |q| pair.p[q].clone());
        let mut res_h: f64 = 0.0;
        let mut res_f = vec![0.0f64; n];
        let mut res_p: f64 = 0.0;
        for m in 1..s.h.len() - 1 {
            let h = s.h[m];
            res_h = res_h.max((h_t[m] + rh.rr[m] / h).abs());
            let mut lap = p_rr[m] - h_r[m] * p_r[m] / h;
            for i in 0..n {
                res_f[i] = res_f[i].max((f_t[i][m] + rh.coeff[i][m] / s.f[i][m]).abs());
                lap += space.d[i] as f64 * f_r[i][m] * p_r[m] / s.f[i][m];
            }
            lap /= h * h;
            res_p = res_p.max((p_t[m] + lap + scalar[m]).abs());
        }
        out.times.push(times[k]);
        out.h.push(res_h);
        for i in 0..n {
            out.f[i].push(res_f[i]);
        }
        out.p.push(res_p);
    }
    Ok(out)
}

/// `F` along the pair and every quantity entering its time derivative.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MonotonicityReport {
    pub times: Vec<f64>,
    pub f_values: Vec<f64>,
    /// Three-point differences of `f_values` in time.
    pub df_dt_fd: Vec<f64>,
    /// `2 int |Ric + Hess p|^2 e^{-p} dmu`.
    pub df_dt_formula: Vec<f64>,
    /// Boundary term at `r = 0` and `r = 1`; vanishes for totally geodesic
    /// boundaries.
    pub frak_f: [Vec<f64>; 2],
    /// `f_1(j, t)/f_1(j, T/2)`.
    pub xi: [Vec<f64>; 2],
    /// Mean curvature of each boundary component.
    pub mean_curvature: [Vec<f64>; 2],
    /// `df_dt_formula + 2 sum_j (<Ric, II> - H_t) e^{-p} dsigma` at each end.
    pub general_formula_rhs: Vec<f64>,
    /// Slack allowed between consecutive `F` values.
    pub tolerance: f64,
    /// `F(t_{k+1}) >= F(t_k) - tolerance` for every stored pair.
    pub monotone: bool,
    /// Whether the strict hypotheses (zero mean curvature, fixed boundary
    /// conformal class) were checked.
    pub strict: bool,
    pub hypothesis_violated: bool,
    pub violations: Vec<String>,
}

impl MonotonicityReport {
    /// `max_k |fd - formula| / max(1, |formula|)`.
    pub fn formula_mismatch(&self) -> f64 {
        self.df_dt_fd
            .iter()
            .zip(&self.df_dt_formula)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    /// `max_k |fd - general rhs| / max(1, |general rhs|)`.
    pub fn general_mismatch(&self) -> f64 {
        self.df_dt_fd
            .iter()
            .zip(&self.general_formula_rhs)
            .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
            .fold(0.0, f64::max)
    }

    pub fn max_frak_f(&self) -> f64 {
        self.frak_f.iter().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Evaluates `F`, both forms of its derivative and the boundary terms
/// along `pair`. With `strict`, violations of zero mean curvature or of a
/// fixed boundary conformal class are recorded in the report.
///
/// The monotonicity slack is ten times the residual-induced bound
/// `max_res * dt * max(1, |F|)` per stored interval.
pub fn monotonicity_report(
    pair: &MrfPair,
    space: &HomogeneousSpaceData,
    strict: bool,
) -> Result<MonotonicityReport, PerelmanError> {
    let times = check_times(&pair.g)?;
    let len_t = times.len();
    let n = space.n();
    let mut f_values = Vec::with_capacity(len_t);
    let mut df_dt_formula = Vec::with_capacity(len_t);
    let mut mean_curvature: [Vec<f64>; 2] = Default::default();
    let mut ric_ii = [vec![0.0; len_t], vec![0.0; len_t]];
    let mut weight_b = [vec![0.0; len_t], vec![0.0; len_t]];
    let mut zeta_b = [vec![0.0; len_t], vec![0.0; len_t]];
    let mut p_rr_b = [vec![0.0; len_t], vec![0.0; len_t]];
    let mut h_b = [vec![0.0; len_t], vec![0.0; len_t]];
    let mut grad_b = [vec![vec![0.0; len_t]; n], vec![vec![0.0; len_t]; n]];
    for (k, (s, p)) in pair.g.iter().zip(&pair.p).enumerate() {
        f_values.push(f_functional(s, p, space)?);
        let rh = ricci_plus_hess(s, p, space)?;
        let curv = ricci(s, space)?;
        let vol = volume_element(s, space);
        let integrand: Vec<f64> =
            (0..s.h.len()).map(|m| rh.normsq[m] * (-p[m]).exp() * vol.w[m]).collect();
        df_dt_formula.push(2.0 * fd::simpson(&integrand).ok_or(GeometryError::OddGrid { n_cells: s.n_cells() })?);
        let dr = s.dr();
        let p_rr = fd::d2(p, dr);
        for j in 0..2 {
            let m = if j == 0 { 0 } else { s.n_cells() };
            let bg = boundary_geometry(s, space, j)?;
            mean_curvature[j].push(bg.mean_curvature);
            ric_ii[j][k] = (0..n)
                .map(|i| space.d[i] as f64 * curv.ric[i][m] * bg.ii[i] / s.f[i][m].powi(4))
                .sum();
            weight_b[j][k] = (-p[m]).exp() * vol.wb[j];
            zeta_b[j][k] = curv.zeta[m];
            p_rr_b[j][k] = p_rr[m];
            h_b[j][k] = s.h[m];
            for i in 0..n {
                grad_b[j][i][k] = fd::d1(&s.f[i], dr)[m] / (s.h[m] * s.f[i][m]);
            }
        }
    }
    let series_dt = |series: &[f64]| -> Vec<f64> {
        (0..len_t)
            .map(|k| time_derivative(&times, k, |q| vec![series[q]])[0])
            .collect()
    };
    let df_dt_fd = series_dt(&f_values);

    let mut frak_f: [Vec<f64>; 2] = Default::default();
    let mut general_formula_rhs = df_dt_formula.clone();
    let mut xi: [Vec<f64>; 2] = Default::default();
    let half = fd::TimeStencil::new(&times, 0.5 * times[len_t - 1]);
    for j in 0..2 {
        let m = if j == 0 { 0 } else { pair.g[0].n_cells() };
        let sign_j = if j == 0 { 1.0 } else { -1.0 };
        let hh: Vec<f64> = (0..len_t).map(|k| h_b[j][k] * mean_curvature[j][k]).collect();
        let hh_t = series_dt(&hh);
        let mc_t = series_dt(&mean_curvature[j]);
        let log_f_t: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let log_f: Vec<f64> = pair.g.iter().map(|s| s.f[i][m].ln()).collect();
                series_dt(&log_f)
            })
            .collect();
        for k in 0..len_t {
            let h = h_b[j][k];
            let mc = mean_curvature[j][k];
            let mut conformal = 0.0;
            for i in 0..n {
                conformal += space.d[i] as f64 * log_f_t[i][k] * grad_b[j][i][k];
            }
            frak_f[j].push(-zeta_b[j][k] * mc / (h * h) + sign_j * conformal - hh_t[k] / h - p_rr_b[j][k] * mc / (h * h));
            general_formula_rhs[k] += 2.0 * (ric_ii[j][k] - mc_t[k]) * weight_b[j][k];
        }
        let f1: Vec<Vec<f64>> = pair.g.iter().map(|s| vec![s.f[0][m]]).collect();
        let mut mid = [0.0];
        half.blend_into(&f1, &mut mid);
        xi[j] = f1.iter().map(|v| v[0] / mid[0]).collect();
    }

    let residual = mrf_residual(pair, space)?.max();
    let mut tolerance: f64 = 0.0;
    let mut monotone = true;
    for k in 0..len_t - 1 {
        let dt = times[k + 1] - times[k];
        let tol = 10.0 * residual * dt * f_values[k].abs().max(1.0);
        tolerance = tolerance.max(tol);
        if f_values[k + 1] < f_values[k] - tol {
            monotone = false;
        }
    }

    let mut violations = Vec::new();
    if strict {
        for j in 0..2 {
            let worst = mean_curvature[j].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if worst > MEAN_CURVATURE_TOL {
                violations.push(format!("mean curvature at r = {j} reaches {worst:.3e}"));
            }
            let m = if j == 0 { 0 } else { pair.g[0].n_cells() };
            for i in 1..n {
                let ratio = |s: &FlowState| s.f[i][m] / s.f[0][m];
                let r0 = ratio(&pair.g[0]);
                let drift = pair.g.iter().map(|s| (ratio(s) / r0 - 1.0).abs()).fold(0.0, f64::max);
                if drift > CONFORMAL_DRIFT_TOL {
                    violations.push(format!(
                        "conformal class at r = {j} drifts by {drift:.3e} (f{}/f1)",
                        i + 1
                    ));
                }
            }
        }
    }
    Ok(MonotonicityReport {
        times,
        f_values,
        df_dt_fd,
        df_dt_formula,
        frak_f,
        xi,
        mean_curvature,
        general_formula_rhs,
        tolerance,
        monotone,
        strict,
        hypothesis_violated: !violations.is_empty(),
        violations,
    })
}

/// Largest gap between the flow-identity scalar curvature and the spatial
/// trace over all stored times and interior nodes.
pub fn scalar_discrepancy(states: &[FlowState], space: &HomogeneousSpaceData) -> Result<f64, PerelmanError> {
    let from_flow = scalar_from_flow(states, space)?;
    let mut worst: f64 = 0.0;
    for (s, rf) in states.iter().zip(&from_flow) {
        let rs = ricci(s, space)?.scalar;
        for m in 1..rs.len() - 1 {
            worst = worst.max((rs[m] - rf[m]).abs());
        }
    }
    Ok(worst)
}
