use nalgebra::DMatrix;
use proptest::prelude::*;
use symflow::algebra::{
    catalog_lookup, catalog_space, structure_constants, validate_identities, AlgebraError, BracketTable,
    HomogeneousSpaceData, CATALOG,
};

/// so(3) with `h = span(e3)` and `[e1, e2] = e3` cyclic, basis ordered
/// `(e3 | e1, e2)`.
fn so3_table() -> BracketTable {
    let mut c = vec![0.0; 27];
    let mut set = |a: usize, b: usize, e: usize| {
        c[(a * 3 + b) * 3 + e] = 1.0;
        c[(b * 3 + a) * 3 + e] = -1.0;
    };
    set(1, 2, 0);
    set(2, 0, 1);
    set(0, 1, 2);
    BracketTable::new(3, 1, vec![2], c).unwrap()
}

/// `ad(e_a)` as a matrix, `ad(e_a)[e][b] = c_ab^e`.
fn ad(table: &BracketTable, a: usize) -> DMatrix<f64> {
    let n = table.dim_g();
    DMatrix::from_fn(n, n, |e, b| table.get(a, b, e))
}

/// `beta_k` from the trace of `ad X ad X` on the first basis vector of each
/// summand, and `gamma` by the triple sum, without touching the library's
/// own contractions.
fn brute_force(table: &BracketTable) -> (Vec<f64>, Vec<Vec<Vec<f64>>>) {
    let ranges = table.summand_ranges();
    let beta = ranges.iter().map(|r| -(ad(table, r.start) * ad(table, r.start)).trace()).collect();
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
    (beta, gamma)
}

fn assert_close(a: &HomogeneousSpaceData, b: &HomogeneousSpaceData, tol: f64) {
    assert_eq!(a.d, b.d);
    for (x, y) in a.beta.iter().zip(&b.beta) {
        assert!((x - y).abs() < tol, "beta {x} vs {y}");
    }
    for (x, y) in a.gamma.iter().flatten().flatten().zip(b.gamma.iter().flatten().flatten()) {
        assert!((x - y).abs() < tol, "gamma {x} vs {y}");
    }
}

#[test]
fn so3_constants_match_trace_oracle() {
    let table = so3_table();
    let data = structure_constants(&table).unwrap();
    let (beta, gamma) = brute_force(&table);
    assert_eq!(data.d, vec![2]);
    assert!((data.beta[0] - 2.0).abs() < 1e-14 && (beta[0] - 2.0).abs() < 1e-14);
    assert_eq!(data.gamma, vec![vec![vec![0.0]]]);
    assert_eq!(gamma, data.gamma);
    assert!(validate_identities(&data).passed());
}

#[test]
fn zero_brackets_have_no_positive_beta() {
    let table = BracketTable::new(3, 1, vec![2], vec![0.0; 27]).unwrap();
    assert!(matches!(structure_constants(&table), Err(AlgebraError::AllBetaZero)));
}

#[test]
fn catalog_matches_trace_oracle() {
    for name in CATALOG {
        let table = catalog_lookup(name).unwrap();
        let data = structure_constants(&table).unwrap();
        let (beta, gamma) = brute_force(&table);
        let oracle = HomogeneousSpaceData::new(name, data.d.clone(), beta, gamma).unwrap();
        assert_close(&data, &oracle, 1e-12);
        let report = validate_identities(&data);
        assert!(report.passed(), "{name}: {:?}", report.failures);
        assert!(report.max_residual < 1e-10);
    }
}

#[test]
fn round_spheres_are_einstein_with_constant_k_minus_one() {
    for k in 2..=5 {
        let data = catalog_space(&format!("sphere({k})")).unwrap();
        assert_eq!(data.d, vec![k]);
        assert!((data.fibre_einstein().unwrap() - (k as f64 - 1.0)).abs() < 1e-12);
    }
}

#[test]
fn flag_manifold_triples() {
    let data = catalog_space("su3/t2").unwrap();
    assert_eq!(data.d, vec![2, 2, 2]);
    for i in 0..3 {
        for k in 0..3 {
            for l in 0..3 {
                let distinct = i != k && k != l && i != l;
                assert_eq!(data.gamma[i][k][l] > 1e-12, distinct, "({i}, {k}, {l})");
            }
        }
    }
    assert!(data.beta.iter().all(|&b| (b - data.beta[0]).abs() < 1e-12 && b > 0.0));
}

#[test]
fn unknown_catalog_name() {
    assert!(matches!(catalog_lookup("sphere(9)"), Err(AlgebraError::UnknownSpace(_))));
    assert!(matches!(catalog_lookup("torus"), Err(AlgebraError::UnknownSpace(_))));
}

#[test]
fn constructed_identity_violation() {
    let mut gamma = vec![vec![vec![0.0; 2]; 2]; 2];
    gamma[0][1][0] = 1.0;
    let data = HomogeneousSpaceData::new("broken", vec![1, 1], vec![1.0, 1.0], gamma).unwrap();
    let report = validate_identities(&data);
    assert!(!report.passed());
    assert!((report.max_residual - 1.0).abs() < 1e-15);
}

#[test]
fn mixed_summand_is_not_scalar() {
    // so(3) + R as a single 4-dimensional summand: Killing is -2 Q on so(3)
    // and 0 on the centre
    let mut c = vec![0.0; 64];
    for (a, b, e) in [(0, 1, 2), (1, 2, 0), (2, 0, 1)] {
        c[(a * 4 + b) * 4 + e] = 1.0;
        c[(b * 4 + a) * 4 + e] = -1.0;
    }
    let table = BracketTable::new(4, 0, vec![4], c).unwrap();
    assert!(matches!(structure_constants(&table), Err(AlgebraError::NonScalarKilling { summand: 0, .. })));
}

#[test]
fn bracket_json_round_trip() {
    for name in CATALOG {
        let table = catalog_lookup(name).unwrap();
        assert_eq!(BracketTable::from_json(&table.to_json()).unwrap(), table);
    }
}

#[test]
fn bracket_json_fills_mirror_entries() {
    let src = r#"{"dim_g": 3, "dim_h": 1, "summand_dims": [2],
                  "entries": [[1, 2, 0, 1.0], [2, 0, 1, 1.0], [0, 1, 2, 1.0]]}"#;
    assert_eq!(BracketTable::from_json(src).unwrap(), so3_table());
}

#[test]
fn bracket_table_rejects_jacobi_failure() {
    let src = r#"{"dim_g": 3, "dim_h": 1, "summand_dims": [2],
                  "entries": [[1, 2, 0, 1.0], [2, 0, 1, 1.0], [0, 1, 2, 2.0]]}"#;
    assert!(matches!(BracketTable::from_json(src), Err(AlgebraError::InvalidTable(_))));
}

/// Orthogonal matrix from the QR factor of `entries`, block-diagonal over
/// `blocks`.
fn block_orthogonal(blocks: &[usize], entries: &[f64]) -> DMatrix<f64> {
    let n: usize = blocks.iter().sum();
    let mut o = DMatrix::zeros(n, n);
    let (mut start, mut used) = (0, 0);
    for &b in blocks {
        let m = DMatrix::from_fn(b, b, |i, j| entries[used + i * b + j] + if i == j { 2.0 } else { 0.0 });
        used += b * b;
        let q = m.qr().q();
        o.view_mut((start, start), (b, b)).copy_from(&q);
        start += b;
    }
    o
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn constants_are_invariant_under_summand_rotations(
        idx in 0usize..CATALOG.len(),
        entries in prop::collection::vec(-1.0f64..1.0, 160),
    ) {
        let name = CATALOG[idx];
        let table = catalog_lookup(name).unwrap();
        let mut blocks = vec![table.dim_h()];
        blocks.extend_from_slice(table.summand_dims());
        let blocks: Vec<usize> = blocks.into_iter().filter(|&b| b > 0).collect();
        let o = block_orthogonal(&blocks, &entries);
        let remixed = table.remix(&o).unwrap();
        let a = structure_constants(&table).unwrap();
        let b = structure_constants(&remixed).unwrap();
        assert_close(&a, &b, 1e-10);
        prop_assert!(validate_identities(&b).passed());
    }

    #[test]
    fn rescaling_q_divides_constants(idx in 0usize..CATALOG.len(), s in 0.1f64..10.0) {
        let table = catalog_lookup(CATALOG[idx]).unwrap();
        let direct = structure_constants(&table.scaled(s).unwrap()).unwrap();
        let predicted = structure_constants(&table).unwrap().scaled(s);
        assert_close(&direct, &predicted, 1e-10);
    }
}
