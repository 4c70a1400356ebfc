//! Uniform-grid numerics shared by every solver stage: fourth-order
//! difference stencils with one-sided closures, a Neumann projection,
//! composite Simpson quadrature and local Lagrange interpolation.
//!
//! All stencils act on node values `u[0..=N]` of the grid `r_m = m / N`.
//! Interior nodes use centered five-point stencils; the two nodes nearest each
//! end use off-centered stencils of the same order, so `d1` and `d2` are
//! fourth-order everywhere for smooth data.

/// Centered first derivative, offsets -2..=2, scaled by 1/(12 dr).
const D1_CENTER: [f64; 5] = [1.0, -8.0, 0.0, 8.0, -1.0];
/// Left end, node 0, nodes 0..=5, scaled by 1/(60 dr).
const D1_EDGE: [f64; 6] = [-137.0, 300.0, -300.0, 200.0, -75.0, 12.0];
/// Left end, node 1, nodes 0..=5, scaled by 1/(60 dr).
const D1_NEAR: [f64; 6] = [-12.0, -65.0, 120.0, -60.0, 20.0, -3.0];

/// Centered second derivative, offsets -2..=2, scaled by 1/(12 dr^2).
const D2_CENTER: [f64; 5] = [-1.0, 16.0, -30.0, 16.0, -1.0];
/// Left end, node 0, nodes 0..=5.
const D2_EDGE: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
/// Left end, node 1, nodes 0..=5.
const D2_NEAR: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];

/// Smallest grid the fourth-order stencils support.
pub const MIN_CELLS: usize = 8;

/// Number of points in the local interpolation window.
const INTERP_POINTS: usize = 6;

/// Grid spacing for `values.len() == N + 1` nodes on `[0, 1]`.
pub fn spacing(len: usize) -> f64 {
    1.0 / (len - 1) as f64
}

/// Node coordinates of the uniform grid with `n_cells` cells.
pub fn nodes(n_cells: usize) -> Vec<f64> {
    (0..=n_cells).map(|m| m as f64 / n_cells as f64).collect()
}

fn dot(weights: &[f64], values: &[f64]) -> f64 {
    weights.iter().zip(values).map(|(w, v)| w * v).sum()
}

/// Applies a zero-sum stencil to differences from the first value, so that
/// constants are annihilated exactly.
fn apply(weights: &[f64], values: &[f64]) -> f64 {
    let base = values[0];
    weights.iter().zip(values).map(|(w, v)| w * (v - base)).sum()
}

/// [`apply`] with the stencil mirrored onto the right end.
fn apply_rev(weights: &[f64], values: &[f64]) -> f64 {
    let base = values[values.len() - 1];
    weights.iter().zip(values.iter().rev()).map(|(w, v)| w * (v - base)).sum()
}

/// Fourth-order first derivative at every node, written into `out`.
pub fn d1_into(u: &[f64], dr: f64, out: &mut [f64]) {
    let n = u.len() - 1;
    debug_assert!(n >= MIN_CELLS && out.len() == u.len());
    let s = 1.0 / (12.0 * dr);
    let e = 1.0 / (60.0 * dr);
    out[0] = e * apply(&D1_EDGE, &u[0..6]);
    out[1] = e * apply(&D1_NEAR, &u[0..6]);
    for m in 2..n - 1 {
        out[m] = s * apply(&D1_CENTER, &u[m - 2..m + 3]);
    }
    out[n - 1] = -e * apply_rev(&D1_NEAR, &u[n - 5..=n]);
    out[n] = -e * apply_rev(&D1_EDGE, &u[n - 5..=n]);
}

/// Fourth-order second derivative at every node, written into `out`.
pub fn d2_into(u: &[f64], dr: f64, out: &mut [f64]) {
    let n = u.len() - 1;
    debug_assert!(n >= MIN_CELLS && out.len() == u.len());
    let s = 1.0 / (12.0 * dr * dr);
    out[0] = s * apply(&D2_EDGE, &u[0..6]);
    out[1] = s * apply(&D2_NEAR, &u[0..6]);
    for m in 2..n - 1 {
        out[m] = s * apply(&D2_CENTER, &u[m - 2..m + 3]);
    }
    out[n - 1] = s * apply_rev(&D2_NEAR, &u[n - 5..=n]);
    out[n] = s * apply_rev(&D2_EDGE, &u[n - 5..=n]);
}

pub fn d1(u: &[f64], dr: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    d1_into(u, dr, &mut out);
    out
}

pub fn d2(u: &[f64], dr: f64) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    d2_into(u, dr, &mut out);
    out
}

/// Overwrites the end values so that the one-sided first derivative of
/// [`d1_into`] equals `slope[0]` at r=0 and `slope[1]` at r=1. This is the
/// Neumann closure of every parabolic solver here: interior nodes evolve,
/// end nodes follow from the constraint. It keeps the stored boundary slope
/// consistent to the accuracy of the fifth-order edge stencil.
pub fn project_neumann(u: &mut [f64], dr: f64, slope: [f64; 2]) {
    let n = u.len() - 1;
    let c0: f64 = D1_EDGE[1..].iter().sum();
    let base = u[1];
    let left: f64 = D1_EDGE[1..].iter().zip(&u[1..6]).map(|(c, v)| c * (v - base)).sum();
    u[0] = base + (left - 60.0 * dr * slope[0]) / c0;
    let base = u[n - 1];
    let right: f64 = D1_EDGE[1..].iter().zip(u[n - 5..n].iter().rev()).map(|(c, v)| c * (v - base)).sum();
    u[n] = base + (right + 60.0 * dr * slope[1]) / c0;
}

/// First derivative with a prescribed value at both end nodes. Interior
/// nodes use the fourth-order stencils of [`d1_into`].
pub fn d1_neumann_into(u: &[f64], dr: f64, slope: [f64; 2], out: &mut [f64]) {
    d1_into(u, dr, out);
    let n = u.len() - 1;
    out[0] = slope[0];
    out[n] = slope[1];
}

/// Composite Simpson rule over `[0, 1]`. Returns `None` for an odd number of
/// cells.
pub fn simpson(u: &[f64]) -> Option<f64> {
    let n = u.len().checked_sub(1)?;
    if n < 2 || n % 2 != 0 {
        return None;
    }
    let dr = 1.0 / n as f64;
    let mut acc = u[0] + u[n];
    for (m, v) in u.iter().enumerate().take(n).skip(1) {
        acc += if m % 2 == 1 { 4.0 * v } else { 2.0 * v };
    }
    Some(acc * dr / 3.0)
}

/// Composite trapezoid rule over `[0, 1]`.
pub fn trapezoid(u: &[f64]) -> f64 {
    let n = u.len() - 1;
    let dr = 1.0 / n as f64;
    let inner: f64 = u[1..n].iter().sum();
    dr * (0.5 * (u[0] + u[n]) + inner)
}

/// Lagrange basis weights on `nodes` evaluated at `x`.
pub fn lagrange_weights(nodes: &[f64], x: f64, out: &mut [f64]) {
    for (j, w) in out.iter_mut().enumerate().take(nodes.len()) {
        let mut num = 1.0;
        let mut den = 1.0;
        for (k, xk) in nodes.iter().enumerate() {
            if k != j {
                num *= x - xk;
                den *= nodes[j] - xk;
            }
        }
        *w = num / den;
    }
}

/// Weights of the derivative of the Lagrange interpolant on `nodes` at `x`.
pub fn lagrange_derivative_weights(nodes: &[f64], x: f64) -> Vec<f64> {
    let p = nodes.len();
    let mut out = vec![0.0; p];
    for j in 0..p {
        let mut den = 1.0;
        for k in 0..p {
            if k != j {
                den *= nodes[j] - nodes[k];
            }
        }
        let mut sum = 0.0;
        for skip in 0..p {
            if skip == j {
                continue;
            }
            let mut prod = 1.0;
            for k in 0..p {
                if k != j && k != skip {
                    prod *= x - nodes[k];
                }
            }
            sum += prod;
        }
        out[j] = sum / den;
    }
    out
}

/// Index of the first node of the interpolation window around `x` and the
/// clamped abscissa.
fn window(len: usize, x: f64) -> (usize, f64) {
    let n = len - 1;
    let x = x.clamp(0.0, 1.0);
    let cell = ((x * n as f64).floor() as usize).min(n - 1);
    let start = cell.saturating_sub(INTERP_POINTS / 2 - 1).min(len - INTERP_POINTS);
    (start, x)
}

/// Sixth-order local Lagrange interpolation of grid samples at `x`. Points
/// outside `[0, 1]` are clamped; nodes are reproduced exactly.
pub fn interpolate(u: &[f64], x: f64) -> f64 {
    let n = u.len() - 1;
    let (start, x) = window(u.len(), x);
    let mut nodes = [0.0; INTERP_POINTS];
    for (k, node) in nodes.iter_mut().enumerate() {
        *node = (start + k) as f64 / n as f64;
    }
    let mut w = [0.0; INTERP_POINTS];
    lagrange_weights(&nodes, x, &mut w);
    dot(&w, &u[start..start + INTERP_POINTS])
}

/// Interpolation in time between stored snapshots: up to four neighbouring
/// snapshots are combined with cubic Lagrange weights.
#[derive(Debug, Clone)]
pub struct TimeStencil {
    pub start: usize,
    pub weights: Vec<f64>,
}

impl TimeStencil {
    pub fn new(times: &[f64], t: f64) -> Self {
        let k = times.len();
        if k == 1 {
            return Self { start: 0, weights: vec![1.0] };
        }
        let points = k.min(4);
        // interval containing t
        let mut i = match times.iter().position(|&s| s > t) {
            Some(0) => 0,
            Some(p) => p - 1,
            None => k - 2,
        };
        i = i.min(k - 2);
        let start = i.saturating_sub(points / 2 - 1).min(k - points);
        let mut weights = vec![0.0; points];
        lagrange_weights(&times[start..start + points], t, &mut weights);
        Self { start, weights }
    }

    /// Blend the per-snapshot arrays `fields[start..]` into `out`.
    pub fn blend_into(&self, fields: &[Vec<f64>], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (w, field) in self.weights.iter().zip(&fields[self.start..]) {
            for (o, v) in out.iter_mut().zip(field) {
                *o += w * v;
            }
        }
    }
}

/// Time derivative of a sampled series at stored index `k`: three-point
/// centered formula on the interior, three-point one-sided at the ends.
pub fn time_derivative_weights(times: &[f64], k: usize) -> (usize, Vec<f64>) {
    let len = times.len();
    assert!(len >= 3, "time derivative needs at least three samples");
    let start = k.saturating_sub(1).min(len - 3);
    (start, lagrange_derivative_weights(&times[start..start + 3], times[k]))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(coeffs: &[f64], x: f64) -> f64 {
        coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn dpoly(coeffs: &[f64], x: f64) -> f64 {
        let d: Vec<f64> = coeffs.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect();
        poly(&d, x)
    }

    #[test]
    fn first_derivative_exact_on_quartics() {
        let c = [0.3, -1.2, 0.7, 2.0, -0.9];
        for n in [8, 16, 40] {
            let r = nodes(n);
            let u: Vec<f64> = r.iter().map(|&x| poly(&c, x)).collect();
            let du = d1(&u, spacing(u.len()));
            for (x, v) in r.iter().zip(&du) {
                assert!((v - dpoly(&c, *x)).abs() < 1e-10, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn second_derivative_exact_on_quintics() {
        let c = [0.1, 0.4, -0.3, 1.1, -0.5, 0.25];
        let d: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
        for n in [8, 20] {
            let r = nodes(n);
            let u: Vec<f64> = r.iter().map(|&x| poly(&c, x)).collect();
            let ddu = d2(&u, spacing(u.len()));
            for (x, v) in r.iter().zip(&ddu) {
                assert!((v - dpoly(&d, *x)).abs() < 1e-8, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn stencils_annihilate_constants_exactly() {
        let u = vec![0.7318; 33];
        assert!(d1(&u, spacing(33)).iter().all(|v| v.abs() < 1e-9));
        assert!(d2(&u, spacing(33)).iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn projection_matches_prescribed_slope() {
        let r = nodes(16);
        let mut u: Vec<f64> = r.iter().map(|x| (2.0 * x).sin()).collect();
        let dr = spacing(u.len());
        project_neumann(&mut u, dr, [0.5, -1.25]);
        let du = d1(&u, dr);
        assert!((du[0] - 0.5).abs() < 1e-12 && (du[16] + 1.25).abs() < 1e-12);
        let mut flat = vec![0.3; 17];
        project_neumann(&mut flat, dr, [0.0, 0.0]);
        assert!(flat.iter().all(|&v| v == 0.3));
    }

    #[test]
    fn simpson_integrates_cubics_and_rejects_odd_grids() {
        let r = nodes(10);
        let u: Vec<f64> = r.iter().map(|x| x * x * x - x).collect();
        assert!((simpson(&u).unwrap() - (0.25 - 0.5)).abs() < 1e-14);
        assert!(simpson(&u[..10]).is_none());
    }

    #[test]
    fn interpolation_reproduces_nodes_and_quintics() {
        let c = [1.0, -0.5, 0.25, 0.3, -0.2, 0.1];
        let r = nodes(12);
        let u: Vec<f64> = r.iter().map(|&x| poly(&c, x)).collect();
        for (m, x) in r.iter().enumerate() {
            assert_eq!(interpolate(&u, *x), u[m]);
        }
        for x in [0.0, 0.013, 0.37, 0.5, 0.91, 0.999, 1.0] {
            assert!((interpolate(&u, x) - poly(&c, x)).abs() < 1e-13);
        }
    }

    #[test]
    fn time_stencil_is_exact_for_cubics() {
        let times = [0.0, 0.1, 0.25, 0.3, 0.42, 0.5];
        let f = |t: f64| 1.0 + t - 2.0 * t * t + 0.5 * t * t * t;
        let fields: Vec<Vec<f64>> = times.iter().map(|&t| vec![f(t)]).collect();
        for t in [0.0, 0.05, 0.27, 0.44, 0.5] {
            let st = TimeStencil::new(&times, t);
            let mut out = [0.0];
            st.blend_into(&fields, &mut out);
            assert!((out[0] - f(t)).abs() < 1e-13);
        }
    }

    #[test]
    fn time_derivative_exact_for_quadratics() {
        let times = [0.0, 0.1, 0.25, 0.3];
        let f = |t: f64| 2.0 - t + 3.0 * t * t;
        for k in 0..times.len() {
            let (start, w) = time_derivative_weights(&times, k);
            let est: f64 = w.iter().enumerate().map(|(i, w)| w * f(times[start + i])).sum();
            assert!((est - (-1.0 + 6.0 * times[k])).abs() < 1e-12);
        }
    }
}
