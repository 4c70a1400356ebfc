//! Lie-algebra data of the fibre `G/H`.
//!
//! A [`BracketTable`] stores the structure constants `c[a][b][e]` of
//! `[e_a, e_b] = sum_e c[a][b][e] e_e` in a `Q`-orthonormal basis ordered as
//! (isotropy algebra, first summand, ..., last summand). From it
//! [`structure_constants`] extracts the three families of numbers that fix the
//! invariant Ricci tensor: summand dimensions `d_k`, Killing coefficients
//! `beta_k` and bracket overlaps `gamma[i][k][l]`.
//!
//! ```
//! use symflow::algebra::{catalog_lookup, structure_constants};
//!
//! let space = structure_constants(&catalog_lookup("sphere(3)").unwrap()).unwrap();
//! assert_eq!(space.d, vec![3]);
//! assert!((space.beta[0] - 4.0).abs() < 1e-12);
//! ```

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Identity and scalar-restriction checks use this absolute tolerance.
pub const IDENTITY_TOL: f64 = 1e-10;
/// Jacobi identity tolerance for bracket tables.
pub const JACOBI_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum AlgebraError {
    #[error("Killing form restricted to summand {summand} is not a multiple of Q (deviation {deviation:.3e})")]
    NonScalarKilling { summand: usize, deviation: f64 },
    #[error("every Killing coefficient vanishes; the algebra is not of compact semisimple type on the fibre")]
    AllBetaZero,
    #[error("unknown space `{0}`")]
    UnknownSpace(String),
    #[error("invalid bracket table: {0}")]
    InvalidTable(String),
    #[error("invalid space data: {0}")]
    InvalidData(String),
    #[error("cannot read bracket table: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed bracket table JSON: {0}")]
    Json(#[from] serde_json::Error),
}

/// Structure constants in a `Q`-orthonormal basis.
#[derive(Debug, Clone, PartialEq)]
pub struct BracketTable {
    dim_g: usize,
    dim_h: usize,
    summand_dims: Vec<usize>,
    c: Vec<f64>,
}

/// On-disk form: sparse triples with 0-based indices.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct BracketTableFile {
    dim_g: usize,
    dim_h: usize,
    summand_dims: Vec<usize>,
    entries: Vec<(usize, usize, usize, f64)>,
}

impl BracketTable {
    /// Builds a table from a dense array indexed `(a * dim_g + b) * dim_g + e`
    /// and checks antisymmetry, ad-invariance and the Jacobi identity.
    pub fn new(
        dim_g: usize,
        dim_h: usize,
        summand_dims: Vec<usize>,
        c: Vec<f64>,
    ) -> Result<Self, AlgebraError> {
        let table = Self { dim_g, dim_h, summand_dims, c };
        table.validate()?;
        Ok(table)
    }

    pub fn dim_g(&self) -> usize {
        self.dim_g
    }

    pub fn dim_h(&self) -> usize {
        self.dim_h
    }

    pub fn summand_dims(&self) -> &[usize] {
        &self.summand_dims
    }

    /// `c_{ab}^e`.
    pub fn get(&self, a: usize, b: usize, e: usize) -> f64 {
        self.c[(a * self.dim_g + b) * self.dim_g + e]
    }

    /// Basis index ranges of the summands.
    pub fn summand_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = self.dim_h;
        self.summand_dims
            .iter()
            .map(|&d| {
                let range = start..start + d;
                start += d;
                range
            })
            .collect()
    }

    fn validate(&self) -> Result<(), AlgebraError> {
        let n = self.dim_g;
        let bad = |msg: String| Err(AlgebraError::InvalidTable(msg));
        if self.summand_dims.is_empty() || self.summand_dims.contains(&0) {
            return bad("need at least one non-empty summand".into());
        }
        if self.dim_h + self.summand_dims.iter().sum::<usize>() != n {
            return bad(format!(
                "dim_g = {n} differs from dim_h + sum of summand dims = {}",
                self.dim_h + self.summand_dims.iter().sum::<usize>()
            ));
        }
        if self.c.len() != n * n * n {
            return bad(format!("expected {} constants, got {}", n * n * n, self.c.len()));
        }
        if let Some(pos) = self.c.iter().position(|v| !v.is_finite()) {
            return bad(format!("non-finite constant at flat index {pos}"));
        }
        for a in 0..n {
            for b in 0..n {
                for e in 0..n {
                    let v = self.get(a, b, e);
                    if (v + self.get(b, a, e)).abs() > IDENTITY_TOL {
                        return bad(format!("c[{a}][{b}][{e}] is not antisymmetric in a, b"));
                    }
                    if (v + self.get(a, e, b)).abs() > IDENTITY_TOL {
                        return bad(format!(
                            "Q([e_{a}, e_{b}], e_{e}) is not totally antisymmetric"
                        ));
                    }
                }
            }
        }
        // [[a,b],e] + [[b,e],a] + [[e,a],b] = 0, component x
        for a in 0..n {
            for b in 0..n {
                for e in 0..n {
                    for x in 0..n {
                        let mut s = 0.0;
                        for m in 0..n {
                            s += self.get(a, b, m) * self.get(m, e, x)
                                + self.get(b, e, m) * self.get(m, a, x)
                                + self.get(e, a, m) * self.get(m, b, x);
                        }
                        if s.abs() > JACOBI_TOL {
                            return bad(format!(
                                "Jacobi identity fails for ({a}, {b}, {e}) in component {x}: {s:.3e}"
                            ));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Reads the sparse JSON form. An entry `[a, b, e, v]` whose mirror
    /// `[b, a, e, _]` is absent also sets `c[b][a][e] = -v`.
    pub fn from_json(src: &str) -> Result<Self, AlgebraError> {
        let file: BracketTableFile = serde_json::from_str(src)?;
        let n = file.dim_g;
        let mut c = vec![0.0; n * n * n];
        let mut given = vec![false; n * n * n];
        for &(a, b, e, v) in &file.entries {
            if a >= n || b >= n || e >= n {
                return Err(AlgebraError::InvalidTable(format!(
                    "entry [{a}, {b}, {e}] out of range for dim_g = {n}"
                )));
            }
            let idx = (a * n + b) * n + e;
            c[idx] = v;
            given[idx] = true;
        }
        for &(a, b, e, v) in &file.entries {
            let mirror = (b * n + a) * n + e;
            if !given[mirror] {
                c[mirror] = -v;
            }
        }
        Self::new(file.dim_g, file.dim_h, file.summand_dims, c)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self, AlgebraError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Sparse JSON form listing every nonzero constant.
    pub fn to_json(&self) -> String {
        let n = self.dim_g;
        let mut entries = Vec::new();
        for a in 0..n {
            for b in 0..n {
                for e in 0..n {
                    let v = self.get(a, b, e);
                    if v != 0.0 {
                        entries.push((a, b, e, v));
                    }
                }
            }
        }
        let file = BracketTableFile {
            dim_g: n,
            dim_h: self.dim_h,
            summand_dims: self.summand_dims.clone(),
            entries,
        };
        serde_json::to_string_pretty(&file).expect("bracket table serializes")
    }

    /// The same algebra in the basis `e'_a = sum_b o[(a, b)] e_b`, where `o`
    /// is orthogonal. Only block-diagonal `o` (respecting the isotropy algebra
    /// and every summand) keeps the decomposition meaningful.
    pub fn remix(&self, o: &DMatrix<f64>) -> Result<Self, AlgebraError> {
        let n = self.dim_g;
        if o.nrows() != n || o.ncols() != n {
            return Err(AlgebraError::InvalidTable(format!("remix matrix must be {n}x{n}")));
        }
        // contract one index at a time: O(n^4)
        let mut t1 = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for e in 0..n {
                    t1[(a * n + b) * n + e] = (0..n).map(|x| o[(a, x)] * self.get(x, b, e)).sum();
                }
            }
        }
        let mut t2 = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for e in 0..n {
                    t2[(a * n + b) * n + e] = (0..n).map(|x| o[(b, x)] * t1[(a * n + x) * n + e]).sum();
                }
            }
        }
        let mut c = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                for e in 0..n {
                    c[(a * n + b) * n + e] = (0..n).map(|x| o[(e, x)] * t2[(a * n + b) * n + x]).sum();
                }
            }
        }
        Self::new(n, self.dim_h, self.summand_dims.clone(), c)
    }

    /// The table for `Q' = s Q` with the basis rescaled by `s^{-1/2}`.
    pub fn scaled(&self, s: f64) -> Result<Self, AlgebraError> {
        if !(s.is_finite() && s > 0.0) {
            return Err(AlgebraError::InvalidTable(format!("scale must be positive, got {s}")));
        }
        let k = s.sqrt().recip();
        let c = self.c.iter().map(|v| v * k).collect();
        Self::new(self.dim_g, self.dim_h, self.summand_dims.clone(), c)
    }

    /// Builds the table of a matrix Lie algebra with `Q(X, Y) = -kappa tr(XY)`.
    /// The basis must be `Q`-orthonormal and closed under the commutator.
    fn from_matrices(
        basis: &[DMatrix<f64>],
        kappa: f64,
        dim_h: usize,
        summand_dims: Vec<usize>,
    ) -> Result<Self, AlgebraError> {
        let n = basis.len();
        let q = |x: &DMatrix<f64>, y: &DMatrix<f64>| -kappa * (x * y).trace();
        for a in 0..n {
            for b in 0..n {
                let want = if a == b { 1.0 } else { 0.0 };
                if (q(&basis[a], &basis[b]) - want).abs() > 1e-14 {
                    return Err(AlgebraError::InvalidTable(format!(
                        "matrix basis is not Q-orthonormal at ({a}, {b})"
                    )));
                }
            }
        }
        let mut c = vec![0.0; n * n * n];
        for a in 0..n {
            for b in 0..n {
                let bracket = &basis[a] * &basis[b] - &basis[b] * &basis[a];
                let mut residual = bracket.clone();
                for e in 0..n {
                    let v = q(&bracket, &basis[e]);
                    c[(a * n + b) * n + e] = v;
                    residual -= &basis[e] * v;
                }
                if residual.amax() > 1e-13 {
                    return Err(AlgebraError::InvalidTable(format!(
                        "basis is not closed under the bracket at ({a}, {b})"
                    )));
                }
            }
        }
        Self::new(n, dim_h, summand_dims, c)
    }
}

/// The numbers `(n, d_k, beta_k, gamma[i][k][l])` that enter the invariant
/// Ricci tensor. Summand indices are 0-based in code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HomogeneousSpaceData {
    pub label: String,
    pub d: Vec<usize>,
    pub beta: Vec<f64>,
    pub gamma: Vec<Vec<Vec<f64>>>,
}

impl HomogeneousSpaceData {
    /// Checks shapes only; the algebraic identities are the business of
    /// [`validate_identities`].
    pub fn new(
        label: impl Into<String>,
        d: Vec<usize>,
        beta: Vec<f64>,
        gamma: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, AlgebraError> {
        let n = d.len();
        let bad = |msg: &str| Err(AlgebraError::InvalidData(msg.to_string()));
        if n == 0 {
            return bad("need at least one summand");
        }
        if d.contains(&0) {
            return bad("summand dimensions must be positive");
        }
        if beta.len() != n {
            return bad("beta must have one entry per summand");
        }
        if gamma.len() != n || gamma.iter().any(|g| g.len() != n || g.iter().any(|h| h.len() != n)) {
            return bad("gamma must be n x n x n");
        }
        let all_finite = beta.iter().chain(gamma.iter().flatten().flatten()).all(|v| v.is_finite());
        if !all_finite {
            return bad("constants must be finite");
        }
        Ok(Self { label: label.into(), d, beta, gamma })
    }

    /// Number of isotropy summands.
    pub fn n(&self) -> usize {
        self.d.len()
    }

    /// Dimension of the fibre, `sum d_k`.
    pub fn fibre_dim(&self) -> usize {
        self.d.iter().sum()
    }

    /// The same space with `Q` replaced by `s Q`.
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            label: self.label.clone(),
            d: self.d.clone(),
            beta: self.beta.iter().map(|b| b / s).collect(),
            gamma: self
                .gamma
                .iter()
                .map(|g| g.iter().map(|h| h.iter().map(|v| v / s).collect()).collect())
                .collect(),
        }
    }

    /// Einstein constant `beta/2 - gamma/4` of a single-summand fibre with
    /// unit scale.
    pub fn fibre_einstein(&self) -> Option<f64> {
        (self.n() == 1).then(|| self.beta[0] / 2.0 - self.gamma[0][0][0] / 4.0)
    }
}

/// Killing coefficients and bracket overlaps of a bracket table.
pub fn structure_constants(table: &BracketTable) -> Result<HomogeneousSpaceData, AlgebraError> {
    let n_g = table.dim_g;
    let ranges = table.summand_ranges();
    // Killing form P(a, a') = sum_{b,e} c_{ab}^e c_{a'e}^b
    let killing = |a: usize, a2: usize| {
        let mut s = 0.0;
        for b in 0..n_g {
            for e in 0..n_g {
                s += table.get(a, b, e) * table.get(a2, e, b);
            }
        }
        s
    };
    let mut beta = Vec::with_capacity(ranges.len());
    for (k, range) in ranges.iter().enumerate() {
        let dk = range.len() as f64;
        let trace: f64 = range.clone().map(|a| killing(a, a)).sum();
        let b = -trace / dk;
        let mut deviation: f64 = 0.0;
        for a in range.clone() {
            for a2 in range.clone() {
                let want = if a == a2 { -b } else { 0.0 };
                deviation = deviation.max((killing(a, a2) - want).abs());
            }
        }
        if deviation > IDENTITY_TOL {
            return Err(AlgebraError::NonScalarKilling { summand: k, deviation });
        }
        beta.push(if b.abs() <= IDENTITY_TOL { 0.0 } else { b });
    }
    if beta.iter().all(|&b| b == 0.0) {
        return Err(AlgebraError::AllBetaZero);
    }
    let n = ranges.len();
    let mut gamma = vec![vec![vec![0.0; n]; n]; n];
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                let mut s = 0.0;
                for a in ranges[i].clone() {
                    for b in ranges[k].clone() {
                        for e in ranges[l].clone() {
                            s += table.get(a, b, e).powi(2);
                        }
                    }
                }
                gamma[i][k][l] = s / ranges[i].len() as f64;
            }
        }
    }
    HomogeneousSpaceData::new(
        "custom",
        table.summand_dims.clone(),
        beta,
        gamma,
    )
}

/// One checked instance of the index-permutation identities for `gamma`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityResidual {
    pub i: usize,
    pub k: usize,
    pub l: usize,
    /// `|d_i gamma_ik^l - d_k gamma_ki^l|`
    pub swap_ik: f64,
    /// `|d_i gamma_ik^l - d_l gamma_li^k|`
    pub swap_il: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityReport {
    pub residuals: Vec<IdentityResidual>,
    pub max_residual: f64,
    pub positive_beta: bool,
    pub nonnegative: bool,
    pub failures: Vec<String>,
}

impl IdentityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Checks `d_i gamma_ik^l = d_k gamma_ki^l = d_l gamma_li^k`, the sign
/// conditions and the dimension bound. Never fails; the report carries
/// every violation.
pub fn validate_identities(data: &HomogeneousSpaceData) -> IdentityReport {
    let n = data.n();
    let d = |i: usize| data.d[i] as f64;
    let mut residuals = Vec::with_capacity(n * n * n);
    let mut max_residual: f64 = 0.0;
    for i in 0..n {
        for k in 0..n {
            for l in 0..n {
                let base = d(i) * data.gamma[i][k][l];
                let r = IdentityResidual {
                    i,
                    k,
                    l,
                    swap_ik: (base - d(k) * data.gamma[k][i][l]).abs(),
                    swap_il: (base - d(l) * data.gamma[l][i][k]).abs(),
                };
                max_residual = max_residual.max(r.swap_ik).max(r.swap_il);
                residuals.push(r);
            }
        }
    }
    let positive_beta = data.beta.iter().any(|&b| b > 0.0);
    let nonnegative = data
        .beta
        .iter()
        .chain(data.gamma.iter().flatten().flatten())
        .all(|&v| v >= 0.0);
    let mut failures = Vec::new();
    if max_residual >= IDENTITY_TOL {
        let worst = residuals
            .iter()
            .max_by(|a, b| a.swap_ik.max(a.swap_il).total_cmp(&b.swap_ik.max(b.swap_il)))
            .expect("n >= 1");
        failures.push(format!(
            "gamma symmetry residual {max_residual:.3e} at (i, k, l) = ({}, {}, {})",
            worst.i, worst.k, worst.l
        ));
    }
    if !positive_beta {
        failures.push("no positive beta".into());
    }
    if !nonnegative {
        failures.push("negative beta or gamma".into());
    }
    if data.fibre_dim() < 2 {
        failures.push(format!("fibre dimension {} is below 2", data.fibre_dim()));
    }
    IdentityReport { residuals, max_residual, positive_beta, nonnegative, failures }
}

/// Names accepted by [`catalog_lookup`].
pub const CATALOG: [&str; 5] = ["sphere(2)", "sphere(3)", "sphere(4)", "sphere(5)", "su3/t2"];

/// Bracket table of a cataloged space.
///
/// * `sphere(k)`, `k = 2..=5`: `so(k+1)/so(k)` with `Q(X, Y) = -tr(XY)/2`,
///   one summand of dimension `k`. The round unit sphere corresponds to
///   fibre scale 1.
/// * `su3/t2`: the full flag `SU(3)/T^2` with `Q(X, Y) = -Re tr(XY)/2`,
///   three two-dimensional root-space summands.
///
/// Summands of every entry are pairwise inequivalent irreducible modules.
pub fn catalog_lookup(name: &str) -> Result<BracketTable, AlgebraError> {
    let name = name.trim();
    if let Some(k) = name
        .strip_prefix("sphere(")
        .and_then(|rest| rest.strip_suffix(')'))
        .and_then(|k| k.trim().parse::<usize>().ok())
        .filter(|k| (2..=5).contains(k))
    {
        return sphere_table(k);
    }
    if name == "su3/t2" {
        return flag_su3_table();
    }
    Err(AlgebraError::UnknownSpace(name.to_string()))
}

/// Catalog table plus its derived constants, labelled with the catalog name.
pub fn catalog_space(name: &str) -> Result<HomogeneousSpaceData, AlgebraError> {
    let mut data = structure_constants(&catalog_lookup(name)?)?;
    data.label = name.trim().to_string();
    Ok(data)
}

fn sphere_table(k: usize) -> Result<BracketTable, AlgebraError> {
    let m = k + 1;
    let elem = |a: usize, b: usize| {
        let mut x = DMatrix::zeros(m, m);
        x[(a, b)] = 1.0;
        x[(b, a)] = -1.0;
        x
    };
    // isotropy so(k) acts on the first k coordinates; the summand moves the last one
    let mut basis = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            basis.push(elem(a, b));
        }
    }
    let dim_h = basis.len();
    basis.extend((0..k).map(|a| elem(a, k)));
    BracketTable::from_matrices(&basis, 0.5, dim_h, vec![k])
}

fn flag_su3_table() -> Result<BracketTable, AlgebraError> {
    // su(3) realified: A + iB acts on R^6 as [[A, -B], [B, A]], so that
    // -Re tr(XY)/2 = -tr_R(XY)/4.
    let realify = |re: &DMatrix<f64>, im: &DMatrix<f64>| {
        let mut x = DMatrix::zeros(6, 6);
        x.view_mut((0, 0), (3, 3)).copy_from(re);
        x.view_mut((3, 3), (3, 3)).copy_from(re);
        x.view_mut((0, 3), (3, 3)).copy_from(&(-im));
        x.view_mut((3, 0), (3, 3)).copy_from(im);
        x
    };
    let zero = DMatrix::<f64>::zeros(3, 3);
    let diag = |v: [f64; 3]| DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&v));
    let s3 = 3f64.sqrt().recip();
    let mut basis = vec![
        realify(&zero, &diag([1.0, -1.0, 0.0])),
        realify(&zero, &diag([s3, s3, -2.0 * s3])),
    ];
    for (a, b) in [(0, 1), (0, 2), (1, 2)] {
        let mut anti = DMatrix::zeros(3, 3);
        anti[(a, b)] = 1.0;
        anti[(b, a)] = -1.0;
        let mut sym = DMatrix::zeros(3, 3);
        sym[(a, b)] = 1.0;
        sym[(b, a)] = 1.0;
        basis.push(realify(&anti, &zero));
        basis.push(realify(&zero, &sym));
    }
    BracketTable::from_matrices(&basis, 0.25, 2, vec![2, 2, 2])
}
