//! Gauge-fixed flow, gauge recovery and flow residuals.
//!
//! Ricci flow of the reduced metric is only weakly parabolic: nothing in the
//! equation for `h` diffuses `h`. Adding the Lie derivative along
//! `V dr` with
//!
//! ```text
//! h V = h_r/h^2 - sum_k d_k f_kr/(h f_k) - W,
//! W   = hh_r/hh^2 - sum_k d_k ff_kr/(hh ff_k)     (initial data hh, ff)
//! ```
//!
//! gives the strictly parabolic system solved here (barred variables):
//!
//! ```text
//! h_t   = h_rr/h^2 - 2 h_r^2/h^3 + sum_k d_k f_kr^2/(h f_k^2) - W_r
//! f_it  = f_irr/h^2 - f_ir^2/(h^2 f_i) - beta_i/(2 f_i)
//!         - sum_{k,l} gamma_ik^l (f_i^4 - 2 f_k^4)/(4 f_i f_k^2 f_l^2) - f_ir W/h
//! ```
//!
//! with boundary conditions making `V` vanish at both ends:
//!
//! ```text
//! f_ir(j) = (-1)^(j+1) h F[j][i](t, f(j)^2) / f_i
//! h_r(j)  = (-1)^(j+1) sum_k d_k h^2 F[j][k](t, f(j)^2) / f_k^2 + h^2 W(j)
//! ```
//!
//! `V = 0` initially, so the barred solution starts at the initial metric.
//! The Ricci flow itself is recovered by pulling back along `phi` with
//! `phi_t = -V(phi, t)`, `phi(r, 0) = r`: `h = phi_r h(phi)`, `f = f(phi)`.
//! Since `V` vanishes at the ends, `phi(j, t) = j`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::HomogeneousSpaceData;
use crate::bc::{check_compatibility, BcError, BcSpec, CompatibilityReport, InitialProfiles};
use crate::expr::{Bindings, ExprError};
use crate::fd;
use crate::geometry::{curvature_at, FlowState, GeometryError};

/// Upper bound on fixed-point sweeps of [`DeturckSystem::enforce_bc`].
const BC_ITERATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DeturckError {
    #[error("initial data violate the boundary condition at t = 0: {0}")]
    IncompatibleData(CompatibilityReport),
    #[error("a scale function fell to the positivity floor at t = {t}")]
    PositivityLost { t: f64 },
    #[error("time step {dt:.3e} exceeds the explicit stability bound {bound:.3e}")]
    StabilityBound { dt: f64, bound: f64 },
    #[error("gauge map degenerated at t = {t}: min slope {min_slope:.3e}")]
    GaugeDegenerate { t: f64, min_slope: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("boundary map evaluation failed: {0}")]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Bc(#[from] BcError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn default_cfl() -> f64 {
    0.2
}

fn default_min_scale() -> f64 {
    1e-6
}

/// Grid, horizon and stepping controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub n_cells: usize,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_min_scale")]
    pub min_scale: f64,
    /// Time between stored states. Steps are shortened to land on every
    /// multiple of this interval.
    pub snapshot_interval: f64,
}

impl SolverConfig {
    pub fn new(n_cells: usize, t_end: f64, snapshot_interval: f64) -> Self {
        Self {
            n_cells,
            t_end,
            cfl: default_cfl(),
            min_scale: default_min_scale(),
            snapshot_interval,
        }
    }

    pub fn validate(&self) -> Result<(), DeturckError> {
        let bad = |m: String| Err(DeturckError::Config(m));
        if self.n_cells < fd::MIN_CELLS {
            return bad(format!("n_cells = {} is below {}", self.n_cells, fd::MIN_CELLS));
        }
        if !self.n_cells.is_multiple_of(2) {
            return bad(format!("n_cells = {} must be even", self.n_cells));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if !(self.cfl > 0.0 && self.cfl <= 0.5) {
            return bad(format!("cfl = {} must lie in (0, 0.5]", self.cfl));
        }
        if !(self.min_scale > 0.0) {
            return bad(format!("min_scale = {} must be positive", self.min_scale));
        }
        if !(self.snapshot_interval > 0.0 && self.snapshot_interval <= self.t_end) {
            return bad(format!(
                "snapshot_interval = {} must lie in (0, t_end]",
                self.snapshot_interval
            ));
        }
        Ok(())
    }
}

/// Time derivatives of every unknown.
#[derive(Debug, Clone, PartialEq)]
pub struct Tendency {
    pub h: Vec<f64>,
    pub f: Vec<Vec<f64>>,
}

/// Derivatives at the end nodes implied by the boundary conditions,
/// `[r = 0, r = 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundarySlopes {
    pub h: [f64; 2],
    pub f: Vec<[f64; 2]>,
}

/// The gauge-fixed system for one space, boundary map and initial data.
#[derive(Debug, Clone)]
pub struct DeturckSystem<'a> {
    space: &'a HomogeneousSpaceData,
    bc: &'a BcSpec,
    init: &'a InitialProfiles,
    n_cells: usize,
    /// `W` at the grid nodes.
    w: Vec<f64>,
    /// `-W_r` at the grid nodes.
    source: Vec<f64>,
}

impl<'a> DeturckSystem<'a> {
    pub fn new(
        space: &'a HomogeneousSpaceData,
        bc: &'a BcSpec,
        init: &'a InitialProfiles,
        n_cells: usize,
    ) -> Result<Self, DeturckError> {
        let n = space.n();
        if bc.n() != n || init.n() != n {
            return Err(BcError::Arity { expected: n, found: if bc.n() != n { bc.n() } else { init.n() } }.into());
        }
        if n_cells < fd::MIN_CELLS {
            return Err(GeometryError::GridTooCoarse { n_cells }.into());
        }
        let (w_expr, s_expr) = init.gauge_terms(&space.d);
        let r = fd::nodes(n_cells);
        let sample = |e: &crate::expr::Expr| -> Result<Vec<f64>, ExprError> {
            r.iter().map(|&x| e.eval(&Bindings::new().r(x))).collect()
        };
        Ok(Self {
            space,
            bc,
            init,
            n_cells,
            w: sample(&w_expr)?,
            source: sample(&s_expr)?,
        })
    }

    pub fn space(&self) -> &HomogeneousSpaceData {
        self.space
    }

    /// Initial profiles sampled on the grid.
    pub fn initial_state(&self) -> Result<FlowState, DeturckError> {
        Ok(self.init.sample(self.n_cells)?)
    }

    /// The source term `-W_r` at the grid nodes.
    pub fn source(&self) -> &[f64] {
        &self.source
    }

    /// The initial gauge field `W` at the grid nodes.
    pub fn gauge_field(&self) -> &[f64] {
        &self.w
    }

    /// End-node derivatives prescribed by the boundary conditions at time
    /// `s.t`.
    pub fn apply_bc(&self, s: &FlowState) -> Result<BoundarySlopes, DeturckError> {
        let n = self.space.n();
        let last = s.n_cells();
        let mut h_slope = [0.0; 2];
        let mut f_slope = vec![[0.0; 2]; n];
        let mut u = vec![0.0; n];
        for j in 0..2 {
            let m = if j == 0 { 0 } else { last };
            let sign = if j == 0 { -1.0 } else { 1.0 };
            let h = s.h[m];
            for (ui, fi) in u.iter_mut().zip(&s.f) {
                *ui = fi[m] * fi[m];
            }
            let mut acc = 0.0;
            for i in 0..n {
                let big_f = self.bc.eval(j, i, s.t, &u)?;
                f_slope[i][j] = sign * h * big_f / s.f[i][m];
                acc += self.space.d[i] as f64 * big_f / u[i];
            }
            h_slope[j] = sign * h * h * acc + h * h * self.w[m];
        }
        Ok(BoundarySlopes { h: h_slope, f: f_slope })
    }

    /// Right-hand side of the gauge-fixed system at interior nodes. End-node
    /// entries are zero: those values follow from [`Self::enforce_bc`].
    pub fn rhs(&self, s: &FlowState) -> Result<Tendency, DeturckError> {
        let n = self.space.n();
        let len = s.h.len();
        let dr = s.dr();
        let slopes = self.apply_bc(s)?;
        let mut h_r = vec![0.0; len];
        let mut h_rr = vec![0.0; len];
        fd::d1_neumann_into(&s.h, dr, slopes.h, &mut h_r);
        fd::d2_into(&s.h, dr, &mut h_rr);
        let mut f_r = vec![vec![0.0; len]; n];
        let mut f_rr = vec![vec![0.0; len]; n];
        for i in 0..n {
            fd::d1_neumann_into(&s.f[i], dr, slopes.f[i], &mut f_r[i]);
            fd::d2_into(&s.f[i], dr, &mut f_rr[i]);
        }
        let space = self.space;
        let mut out = Tendency { h: vec![0.0; len], f: vec![vec![0.0; len]; n] };
        let mut f = vec![0.0; n];
        // end values are slaved to the boundary conditions, see `enforce_bc`
        for m in 1..len - 1 {
            let h = s.h[m];
            let h2 = h * h;
            for i in 0..n {
                f[i] = s.f[i][m];
            }
            let mut grad = 0.0;
            for k in 0..n {
                grad += space.d[k] as f64 * (f_r[k][m] / f[k]).powi(2);
            }
            out.h[m] = h_rr[m] / h2 - 2.0 * h_r[m] * h_r[m] / (h2 * h) + grad / h + self.source[m];
            for i in 0..n {
                let fi4 = f[i].powi(4);
                let mut bracket = 0.0;
                for k in 0..n {
                    let fk2 = f[k] * f[k];
                    for l in 0..n {
                        let g = space.gamma[i][k][l];
                        if g != 0.0 {
                            bracket += g * (fi4 - 2.0 * fk2 * fk2) / (4.0 * f[i] * fk2 * f[l] * f[l]);
                        }
                    }
                }
                out.f[i][m] = f_rr[i][m] / h2 - f_r[i][m] * f_r[i][m] / (h2 * f[i])
                    - space.beta[i] / (2.0 * f[i])
                    - bracket
                    - f_r[i][m] * self.w[m] / h;
            }
        }
        Ok(out)
    }

    /// Sets the end values of every unknown so that the one-sided derivatives
    /// match [`Self::apply_bc`]. The slopes depend on the end values
    /// themselves, so the projection is repeated to a fixed point.
    pub fn enforce_bc(&self, s: &mut FlowState) -> Result<(), DeturckError> {
        let dr = s.dr();
        let last = s.n_cells();
        for _ in 0..BC_ITERATIONS {
            let before: Vec<f64> = std::iter::once(&s.h).chain(&s.f).flat_map(|u| [u[0], u[last]]).collect();
            let slopes = self.apply_bc(s)?;
            fd::project_neumann(&mut s.h, dr, slopes.h);
            for (fi, slope) in s.f.iter_mut().zip(&slopes.f) {
                fd::project_neumann(fi, dr, *slope);
            }
            let after = std::iter::once(&s.h).chain(&s.f).flat_map(|u| [u[0], u[last]]);
            if before.iter().zip(after).all(|(a, b)| (a - b).abs() <= 1e-15 * a.abs().max(1.0)) {
                break;
            }
        }
        Ok(())
    }

    /// Largest step the explicit scheme accepts for `s`.
    pub fn stable_dt(&self, s: &FlowState, cfl: f64) -> f64 {
        let min_h = s.h.iter().copied().fold(f64::INFINITY, f64::min);
        let dr = s.dr();
        cfl * min_h * min_h * dr * dr
    }

    /// One classical Runge-Kutta step. Fails with `StabilityBound` when `dt`
    /// exceeds [`Self::stable_dt`] and with `PositivityLost` when any stage
    /// or the result has a scale function at or below `min_scale`.
    pub fn step(&self, s: &FlowState, dt: f64, cfl: f64, min_scale: f64) -> Result<FlowState, DeturckError> {
        let bound = self.stable_dt(s, cfl);
        if dt > bound * (1.0 + 1e-12) {
            return Err(DeturckError::StabilityBound { dt, bound });
        }
        if dt == 0.0 {
            return Ok(s.clone());
        }
        let stage = |base: &FlowState, k: &Tendency, c: f64| -> Result<FlowState, DeturckError> {
            let mut next = FlowState {
                t: s.t + c,
                h: axpy(&base.h, c, &k.h),
                f: base.f.iter().zip(&k.f).map(|(b, kf)| axpy(b, c, kf)).collect(),
            };
            self.enforce_bc(&mut next)?;
            if !(next.min_scale() > min_scale) {
                return Err(DeturckError::PositivityLost { t: s.t + c });
            }
            Ok(next)
        };
        let k1 = self.rhs(s)?;
        let k2 = self.rhs(&stage(s, &k1, 0.5 * dt)?)?;
        let k3 = self.rhs(&stage(s, &k2, 0.5 * dt)?)?;
        let k4 = self.rhs(&stage(s, &k3, dt)?)?;
        let combine = |u: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]| -> Vec<f64> {
            (0..u.len())
                .map(|m| u[m] + dt / 6.0 * (a[m] + 2.0 * b[m] + 2.0 * c[m] + d[m]))
                .collect()
        };
        let mut next = FlowState {
            t: s.t + dt,
            h: combine(&s.h, &k1.h, &k2.h, &k3.h, &k4.h),
            f: (0..s.f.len())
                .map(|i| combine(&s.f[i], &k1.f[i], &k2.f[i], &k3.f[i], &k4.f[i]))
                .collect(),
        };
        self.enforce_bc(&mut next)?;
        if !(next.min_scale() > min_scale) {
            return Err(DeturckError::PositivityLost { t: next.t });
        }
        Ok(next)
    }

    /// Gauge velocity `-V = -h_r/h^3 + sum_k d_k f_kr/(h^2 f_k) + W/h` at every
    /// node. It vanishes at the end nodes by construction of the boundary
    /// conditions and is set to exactly zero there.
    pub fn gauge_velocity(&self, s: &FlowState) -> Result<Vec<f64>, DeturckError> {
        let len = s.h.len();
        let dr = s.dr();
        let slopes = self.apply_bc(s)?;
        let mut h_r = vec![0.0; len];
        fd::d1_neumann_into(&s.h, dr, slopes.h, &mut h_r);
        let mut f_r = vec![vec![0.0; len]; s.f.len()];
        for (i, fi) in s.f.iter().enumerate() {
            fd::d1_neumann_into(fi, dr, slopes.f[i], &mut f_r[i]);
        }
        let mut v = vec![0.0; len];
        for m in 1..len - 1 {
            let h = s.h[m];
            let mut acc = 0.0;
            for (k, fk) in s.f.iter().enumerate() {
                acc += self.space.d[k] as f64 * f_r[k][m] / fk[m];
            }
            v[m] = -h_r[m] / (h * h * h) + acc / (h * h) + self.w[m] / h;
        }
        Ok(v)
    }

    /// Integrates the gauge-fixed system per `config`.
    ///
    /// Losing positivity ends the run early: the trajectory keeps every state
    /// computed so far and records the time of failure in `singular_time`.
    pub fn solve(&self, config: &SolverConfig) -> Result<Trajectory, DeturckError> {
        config.validate()?;
        if config.n_cells != self.n_cells {
            return Err(DeturckError::Config(format!(
                "system built for {} cells, config asks for {}",
                self.n_cells, config.n_cells
            )));
        }
        let report = check_compatibility(self.bc, self.init, self.space)?;
        if !report.compatible() {
            return Err(DeturckError::IncompatibleData(report));
        }
        let mut state = self.initial_state()?;
        self.enforce_bc(&mut state)?;
        let mut traj = Trajectory {
            times: vec![0.0],
            states: vec![state.clone()],
            gauge: None,
            recovered: None,
            singular_time: None,
            steps: 0,
        };
        let n_snaps = (config.t_end / config.snapshot_interval - 1e-9).ceil().max(1.0) as usize;
        'snapshots: for k in 1..=n_snaps {
            let target = (k as f64 * config.snapshot_interval).min(config.t_end);
            while state.t < target {
                let dt = self.stable_dt(&state, config.cfl).min(target - state.t);
                match self.step(&state, dt, config.cfl, config.min_scale) {
                    Ok(mut next) => {
                        if target - next.t <= 1e-12 * target.max(1.0) {
                            next.t = target;
                        }
                        state = next;
                        traj.steps += 1;
                    }
                    Err(DeturckError::PositivityLost { t }) => {
                        traj.singular_time = Some(t);
                        if state.t > *traj.times.last().expect("non-empty") {
                            traj.times.push(state.t);
                            traj.states.push(state.clone());
                        }
                        break 'snapshots;
                    }
                    Err(e) => return Err(e),
                }
            }
            traj.times.push(state.t);
            traj.states.push(state.clone());
        }
        Ok(traj)
    }

    /// Solves the gauge equation along a stored trajectory and fills in
    /// `gauge` and `recovered`.
    pub fn solve_gauge(&self, traj: &Trajectory) -> Result<Trajectory, DeturckError> {
        let velocity: Vec<Vec<f64>> =
            traj.states.iter().map(|s| self.gauge_velocity(s)).collect::<Result<_, _>>()?;
        let phi = integrate_map(&traj.times, &velocity)?;
        let mut recovered = Vec::with_capacity(traj.states.len());
        for (s, p) in traj.states.iter().zip(&phi) {
            recovered.push(pull_back(s, p)?);
        }
        Ok(Trajectory { gauge: Some(phi), recovered: Some(recovered), ..traj.clone() })
    }
}

fn axpy(base: &[f64], c: f64, k: &[f64]) -> Vec<f64> {
    base.iter().zip(k).map(|(b, v)| b + c * v).collect()
}

/// Integrates `x_t = v(x, t)` from `x(r, 0) = r` at every node, where `v` is
/// sampled on the grid at `times`. One RK4 step per stored interval, with
/// cubic interpolation in time and sixth-order interpolation in space. End
/// nodes carry zero velocity and stay fixed.
pub(crate) fn integrate_map(
    times: &[f64],
    velocity: &[Vec<f64>],
) -> Result<Vec<Vec<f64>>, DeturckError> {
    let len = velocity[0].len();
    let mut x = fd::nodes(len - 1);
    let mut out = Vec::with_capacity(times.len());
    out.push(x.clone());
    let mut field = vec![0.0; len];
    let mut eval = |t: f64, at: &[f64], out: &mut Vec<f64>| {
        fd::TimeStencil::new(times, t).blend_into(velocity, &mut field);
        out.clear();
        out.extend(at.iter().map(|&y| fd::interpolate(&field, y)));
        out[0] = 0.0;
        out[len - 1] = 0.0;
    };
    let (mut k1, mut k2, mut k3, mut k4) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for w in times.windows(2) {
        let (t0, dt) = (w[0], w[1] - w[0]);
        eval(t0, &x, &mut k1);
        let x2 = axpy(&x, 0.5 * dt, &k1);
        eval(t0 + 0.5 * dt, &x2, &mut k2);
        let x3 = axpy(&x, 0.5 * dt, &k2);
        eval(t0 + 0.5 * dt, &x3, &mut k3);
        let x4 = axpy(&x, dt, &k3);
        eval(t0 + dt, &x4, &mut k4);
        for m in 0..len {
            x[m] += dt / 6.0 * (k1[m] + 2.0 * k2[m] + 2.0 * k3[m] + k4[m]);
        }
        if let Some(m) = (1..len).find(|&m| !(x[m] > x[m - 1])) {
            return Err(DeturckError::GaugeDegenerate { t: w[1], min_slope: (x[m] - x[m - 1]) * (len - 1) as f64 });
        }
        out.push(x.clone());
    }
    Ok(out)
}

/// `h = x_r h(x)`, `f_i = f_i(x)` for a monotone map `x` of `[0, 1]`.
pub(crate) fn pull_back(s: &FlowState, x: &[f64]) -> Result<FlowState, DeturckError> {
    let slope = fd::d1(x, s.dr());
    let min_slope = slope.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_slope > 0.0) {
        return Err(DeturckError::GaugeDegenerate { t: s.t, min_slope });
    }
    let h = x.iter().zip(&slope).map(|(&y, &dy)| dy * fd::interpolate(&s.h, y)).collect();
    let f = s
        .f
        .iter()
        .map(|fi| x.iter().map(|&y| fd::interpolate(fi, y)).collect())
        .collect();
    Ok(FlowState { t: s.t, h, f })
}

/// Stored solution of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    /// Gauge-fixed states.
    pub states: Vec<FlowState>,
    /// `phi(., t)` per stored time, once the gauge has been solved.
    pub gauge: Option<Vec<Vec<f64>>>,
    /// Ricci-flow states per stored time, once the gauge has been solved.
    pub recovered: Option<Vec<FlowState>>,
    /// Time at which positivity was lost, if the run stopped early.
    pub singular_time: Option<f64>,
    /// Number of accepted time steps.
    pub steps: usize,
}

impl Trajectory {
    /// Recovered states if present, gauge-fixed states otherwise.
    pub fn flow(&self) -> &[FlowState] {
        self.recovered.as_deref().unwrap_or(&self.states)
    }
}

/// Checks compatibility, then integrates the gauge-fixed system.
pub fn solve(
    config: &SolverConfig,
    space: &HomogeneousSpaceData,
    bc: &BcSpec,
    init: &InitialProfiles,
) -> Result<Trajectory, DeturckError> {
    DeturckSystem::new(space, bc, init, config.n_cells)?.solve(config)
}

/// Gauge recovery for a trajectory produced by [`solve`] with the same data.
pub fn solve_gauge(
    traj: &Trajectory,
    space: &HomogeneousSpaceData,
    bc: &BcSpec,
    init: &InitialProfiles,
) -> Result<Trajectory, DeturckError> {
    let n_cells = traj.states[0].n_cells();
    DeturckSystem::new(space, bc, init, n_cells)?.solve_gauge(traj)
}

/// Max-norm residuals of the reduced Ricci flow per interior stored time.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowResidual {
    pub times: Vec<f64>,
    /// `h_t + zeta/h`.
    pub h: Vec<f64>,
    /// `f_it + ric_i/f_i`, one series per summand.
    pub f: Vec<Vec<f64>>,
}

impl FlowResidual {
    /// Largest residual over all times and unknowns.
    pub fn max(&self) -> f64 {
        self.h.iter().chain(self.f.iter().flatten()).fold(0.0, |m, &v| m.max(v))
    }
}

/// Residual of `h_t = -zeta/h`, `f_it = -ric_i/f_i` on stored states, with
/// centered differences in time over the interior stored times and the
/// max-norm taken over interior nodes.
pub fn ricci_flow_residual(states: &[FlowState], space: &HomogeneousSpaceData) -> Result<FlowResidual, DeturckError> {
    if states.len() < 3 {
        return Err(DeturckError::Config("flow residual needs at least three stored times".into()));
    }
    let times: Vec<f64> = states.iter().map(|s| s.t).collect();
    let n = space.n();
    let mut out = FlowResidual { times: Vec::new(), h: Vec::new(), f: vec![Vec::new(); n] };
    let mut ric = vec![0.0; n];
    let (mut f, mut f_r, mut f_rr) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for k in 1..states.len() - 1 {
        let s = &states[k];
        let (start, w) = fd::time_derivative_weights(&times, k);
        let dt_of = |field: &dyn Fn(&FlowState) -> &[f64], m: usize| -> f64 {
            w.iter().enumerate().map(|(q, wq)| wq * field(&states[start + q])[m]).sum()
        };
        let dr = s.dr();
        let h_r = fd::d1(&s.h, dr);
        let fr_all: Vec<Vec<f64>> = s.f.iter().map(|fi| fd::d1(fi, dr)).collect();
        let frr_all: Vec<Vec<f64>> = s.f.iter().map(|fi| fd::d2(fi, dr)).collect();
        let mut res_h: f64 = 0.0;
        let mut res_f = vec![0.0f64; n];
        for m in 1..s.h.len() - 1 {
            for i in 0..n {
                f[i] = s.f[i][m];
                f_r[i] = fr_all[i][m];
                f_rr[i] = frr_all[i][m];
            }
            let (zeta, _) = curvature_at(space, s.h[m], h_r[m], &f, &f_r, &f_rr, &mut ric);
            let h_t = dt_of(&|st: &FlowState| st.h.as_slice(), m);
            res_h = res_h.max((h_t + zeta / s.h[m]).abs());
            for i in 0..n {
                let f_t = dt_of(&|st: &FlowState| st.f[i].as_slice(), m);
                res_f[i] = res_f[i].max((f_t + ric[i] / f[i]).abs());
            }
        }
        out.times.push(s.t);
        out.h.push(res_h);
        for i in 0..n {
            out.f[i].push(res_f[i]);
        }
    }
    Ok(out)
}
