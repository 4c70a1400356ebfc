//! Curvature of the cohomogeneity-one metric
//!
//! ```text
//! g = h(r)^2 dr^2 + sum_i f_i(r)^2 Q|p_i
//! ```
//!
//! on `[0, 1] x G/H`, sampled on a uniform grid. Derivatives in `r` use the
//! fourth-order stencils of [`crate::fd`], one-sided at the ends.
//!
//! The Ricci tensor is diagonal: `zeta dr^2 + sum_i ric_i Q|p_i` with
//!
//! ```text
//! zeta  = -sum_k d_k (f_k''/f_k - h' f_k'/(h f_k))
//! ric_i = beta_i/2 + sum_{k,l} gamma_ik^l (f_i^4 - 2 f_k^4)/(4 f_k^2 f_l^2)
//!         - (f_i f_i'/h) sum_k d_k f_k'/(h f_k)
//!         + f_i'^2/h^2 - f_i f_i''/h^2 + f_i h' f_i'/h^3
//! ```
//!
//! and scalar curvature `R = zeta/h^2 + sum_i d_i ric_i/f_i^2`. The fibre
//! volume `vol(G/H, Q)` is normalized to 1 throughout.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::algebra::HomogeneousSpaceData;
use crate::fd;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeometryError {
    #[error("grid has {n_cells} cells, at least {} are required", fd::MIN_CELLS)]
    GridTooCoarse { n_cells: usize },
    #[error("Simpson quadrature needs an even number of cells, got {n_cells}")]
    OddGrid { n_cells: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{field} is not positive at node {node}")]
    NonPositive { field: String, node: usize },
}

/// Samples of `(h, f_1..f_n)` on the nodes `r_m = m/N` at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub t: f64,
    pub h: Vec<f64>,
    pub f: Vec<Vec<f64>>,
}

impl FlowState {
    /// Checks shapes, grid size and positivity.
    pub fn new(t: f64, h: Vec<f64>, f: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let s = Self { t, h, f };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.h.len() < fd::MIN_CELLS + 1 {
            return Err(GeometryError::GridTooCoarse { n_cells: self.h.len().saturating_sub(1) });
        }
        if self.f.is_empty() {
            return Err(GeometryError::Shape("no warping functions".into()));
        }
        if let Some(i) = self.f.iter().position(|fi| fi.len() != self.h.len()) {
            return Err(GeometryError::Shape(format!(
                "f{} has {} samples, h has {}",
                i + 1,
                self.f[i].len(),
                self.h.len()
            )));
        }
        let fields = std::iter::once(("h".to_string(), &self.h))
            .chain(self.f.iter().enumerate().map(|(i, fi)| (format!("f{}", i + 1), fi)));
        for (name, values) in fields {
            if let Some(node) = values.iter().position(|&v| !(v > 0.0)) {
                return Err(GeometryError::NonPositive { field: name, node });
            }
        }
        Ok(())
    }

    /// Number of grid cells `N`.
    pub fn n_cells(&self) -> usize {
        self.h.len() - 1
    }

    pub fn dr(&self) -> f64 {
        fd::spacing(self.h.len())
    }

    pub fn nodes(&self) -> Vec<f64> {
        fd::nodes(self.n_cells())
    }

    /// Smallest value of any scale function.
    pub fn min_scale(&self) -> f64 {
        self.h.iter().chain(self.f.iter().flatten()).copied().fold(f64::INFINITY, f64::min)
    }

    fn check_space(&self, space: &HomogeneousSpaceData) -> Result<(), GeometryError> {
        if self.n_cells() < fd::MIN_CELLS {
            return Err(GeometryError::GridTooCoarse { n_cells: self.n_cells() });
        }
        if self.f.len() != space.n() {
            return Err(GeometryError::Shape(format!(
                "state has {} warping functions, space has {} summands",
                self.f.len(),
                space.n()
            )));
        }
        Ok(())
    }

    fn jets(&self) -> Jets {
        let dr = self.dr();
        Jets {
            h_r: fd::d1(&self.h, dr),
            f_r: self.f.iter().map(|fi| fd::d1(fi, dr)).collect(),
            f_rr: self.f.iter().map(|fi| fd::d2(fi, dr)).collect(),
        }
    }
}

/// Derivatives of the state needed by the curvature formulas.
struct Jets {
    h_r: Vec<f64>,
    f_r: Vec<Vec<f64>>,
    f_rr: Vec<Vec<f64>>,
}

/// Ricci and scalar curvature on the grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureField {
    /// Coefficient of `dr^2`.
    pub zeta: Vec<f64>,
    /// Coefficient of `Q` on each summand.
    pub ric: Vec<Vec<f64>>,
    pub scalar: Vec<f64>,
}

/// Pointwise curvature at one node. `f`, `f_r`, `f_rr` hold one entry per
/// summand; `ric` receives the fibre coefficients. Returns `(zeta, R)`.
pub fn curvature_at(
    space: &HomogeneousSpaceData,
    h: f64,
    h_r: f64,
    f: &[f64],
    f_r: &[f64],
    f_rr: &[f64],
    ric: &mut [f64],
) -> (f64, f64) {
    let n = space.n();
    let mut zeta = 0.0;
    let mut mean = 0.0;
    for k in 0..n {
        let dk = space.d[k] as f64;
        zeta -= dk * (f_rr[k] / f[k] - h_r * f_r[k] / (h * f[k]));
        mean += dk * f_r[k] / (h * f[k]);
    }
    let mut scalar = zeta / (h * h);
    for i in 0..n {
        let fi4 = f[i].powi(4);
        let mut bracket = 0.0;
        for k in 0..n {
            let fk2 = f[k] * f[k];
            for l in 0..n {
                let g = space.gamma[i][k][l];
                if g != 0.0 {
                    bracket += g * (fi4 - 2.0 * fk2 * fk2) / (4.0 * fk2 * f[l] * f[l]);
                }
            }
        }
        ric[i] = space.beta[i] / 2.0 + bracket - f[i] * f_r[i] / h * mean
            + f_r[i] * f_r[i] / (h * h)
            - f[i] * f_rr[i] / (h * h)
            + f[i] * h_r * f_r[i] / (h * h * h);
        scalar += space.d[i] as f64 * ric[i] / (f[i] * f[i]);
    }
    (zeta, scalar)
}

/// Ricci tensor and scalar curvature of `s`.
pub fn ricci(s: &FlowState, space: &HomogeneousSpaceData) -> Result<CurvatureField, GeometryError> {
    s.check_space(space)?;
    Ok(ricci_with(s, space, &s.jets()))
}

fn ricci_with(s: &FlowState, space: &HomogeneousSpaceData, jets: &Jets) -> CurvatureField {
    let n = space.n();
    let len = s.h.len();
    let mut zeta = vec![0.0; len];
    let mut scalar = vec![0.0; len];
    let mut ric = vec![vec![0.0; len]; n];
    let (mut f, mut f_r, mut f_rr, mut ric_m) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for m in 0..len {
        for i in 0..n {
            f[i] = s.f[i][m];
            f_r[i] = jets.f_r[i][m];
            f_rr[i] = jets.f_rr[i][m];
        }
        let (z, r) = curvature_at(space, s.h[m], jets.h_r[m], &f, &f_r, &f_rr, &mut ric_m);
        zeta[m] = z;
        scalar[m] = r;
        for i in 0..n {
            ric[i][m] = ric_m[i];
        }
    }
    CurvatureField { zeta, ric, scalar }
}

/// Second fundamental form and mean curvature of the boundary component
/// `r = j`, with outward normal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryGeometry {
    /// Coefficient of `Q` on each summand.
    pub ii: Vec<f64>,
    pub mean_curvature: f64,
}

/// `II_i = (-1)^(j+1) f_i f_i'/h` and `H = sum_k (-1)^(j+1) d_k f_k'/(h f_k)`
/// at the end node `r = j`.
pub fn boundary_geometry(
    s: &FlowState,
    space: &HomogeneousSpaceData,
    j: usize,
) -> Result<BoundaryGeometry, GeometryError> {
    s.check_space(space)?;
    let m = if j == 0 { 0 } else { s.n_cells() };
    let sign = if j == 0 { -1.0 } else { 1.0 };
    let dr = s.dr();
    let h = s.h[m];
    let mut ii = Vec::with_capacity(space.n());
    let mut mean_curvature = 0.0;
    for (k, fk) in s.f.iter().enumerate() {
        let fr = fd::d1(fk, dr)[m];
        ii.push(sign * fk[m] * fr / h);
        mean_curvature += sign * space.d[k] as f64 * fr / (h * fk[m]);
    }
    Ok(BoundaryGeometry { ii, mean_curvature })
}

/// Riemannian density relative to `dr dvol_Q`, and the boundary densities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VolumeElement {
    /// `h prod_k f_k^{d_k}` at every node.
    pub w: Vec<f64>,
    /// `prod_k f_k^{d_k}` at `r = 0` and `r = 1`.
    pub wb: [f64; 2],
}

pub fn volume_element(s: &FlowState, space: &HomogeneousSpaceData) -> VolumeElement {
    let fibre = |m: usize| -> f64 {
        s.f.iter()
            .zip(&space.d)
            .map(|(fk, &dk)| fk[m].powi(dk as i32))
            .product()
    };
    let w = (0..s.h.len()).map(|m| s.h[m] * fibre(m)).collect();
    VolumeElement { w, wb: [fibre(0), fibre(s.n_cells())] }
}

/// `F(g, p) = int (R + |grad p|^2) e^{-p} dmu`, by composite Simpson.
pub fn f_functional(
    s: &FlowState,
    p: &[f64],
    space: &HomogeneousSpaceData,
) -> Result<f64, GeometryError> {
    s.check_space(space)?;
    check_potential(s, p)?;
    let curv = ricci(s, space)?;
    let p_r = fd::d1(p, s.dr());
    let vol = volume_element(s, space);
    let integrand: Vec<f64> = (0..s.h.len())
        .map(|m| {
            let grad = p_r[m] / s.h[m];
            (curv.scalar[m] + grad * grad) * (-p[m]).exp() * vol.w[m]
        })
        .collect();
    fd::simpson(&integrand).ok_or(GeometryError::OddGrid { n_cells: s.n_cells() })
}

fn check_potential(s: &FlowState, p: &[f64]) -> Result<(), GeometryError> {
    if p.len() != s.h.len() {
        return Err(GeometryError::Shape(format!(
            "potential has {} samples, state has {}",
            p.len(),
            s.h.len()
        )));
    }
    Ok(())
}

/// Components of `Ric + Hess p` for an invariant potential `p(r)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RicciHess {
    /// `zeta + p'' - h' p'/h`, the `dr^2` coefficient.
    pub rr: Vec<f64>,
    /// `ric_i + f_i f_i' p'/h^2`, the `Q|p_i` coefficients.
    pub coeff: Vec<Vec<f64>>,
    /// `|Ric + Hess p|^2 = (rr/h^2)^2 + sum_i d_i (coeff_i/f_i^2)^2`.
    pub normsq: Vec<f64>,
}

pub fn ricci_plus_hess(
    s: &FlowState,
    p: &[f64],
    space: &HomogeneousSpaceData,
) -> Result<RicciHess, GeometryError> {
    s.check_space(space)?;
    check_potential(s, p)?;
    let jets = s.jets();
    let curv = ricci_with(s, space, &jets);
    let dr = s.dr();
    let p_r = fd::d1(p, dr);
    let p_rr = fd::d2(p, dr);
    let len = s.h.len();
    let rr: Vec<f64> = (0..len)
        .map(|m| curv.zeta[m] + p_rr[m] - jets.h_r[m] * p_r[m] / s.h[m])
        .collect();
    let coeff: Vec<Vec<f64>> = (0..space.n())
        .map(|i| {
            (0..len)
                .map(|m| curv.ric[i][m] + s.f[i][m] * jets.f_r[i][m] * p_r[m] / (s.h[m] * s.h[m]))
                .collect()
        })
        .collect();
    let normsq = (0..len)
        .map(|m| {
            let h2 = s.h[m] * s.h[m];
            let mut acc = (rr[m] / h2).powi(2);
            for i in 0..space.n() {
                let f2 = s.f[i][m] * s.f[i][m];
                acc += space.d[i] as f64 * (coeff[i][m] / f2).powi(2);
            }
            acc
        })
        .collect();
    Ok(RicciHess { rr, coeff, normsq })
}
