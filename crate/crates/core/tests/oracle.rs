use proptest::prelude::*;
use symflow::fd;
use symflow::oracle::{estimate_order, fd_check, OracleError};

proptest! {
    #[test]
    fn order_of_exact_power_laws(c in 1e-6f64..1e2, p in 0.5f64..6.0, n0 in 8usize..64) {
        let grids = [n0, 2 * n0, 4 * n0, 8 * n0];
        let errors: Vec<f64> = grids.iter().map(|&n| c * (n as f64).powf(-p)).collect();
        let fit = estimate_order(&grids, &errors).unwrap();
        prop_assert!((fit.slope - p).abs() < 1e-9);
    }

    #[test]
    fn stagnating_errors_are_degenerate(e in 1e-8f64..1.0) {
        let fit = estimate_order(&[32, 64, 128], &[e, e * 1.5, e * 0.5]);
        prop_assert!(matches!(fit, Err(OracleError::DegenerateFit(_))));
    }
}

#[test]
fn derivative_error_shrinks_at_fourth_order() {
    let grids = [32, 64, 128];
    let errors: Vec<f64> = grids
        .iter()
        .map(|&n| {
            let r = fd::nodes(n);
            let u: Vec<f64> = r.iter().map(|x| (3.0 * x).exp()).collect();
            let du: Vec<f64> = r.iter().map(|x| 3.0 * (3.0 * x).exp()).collect();
            fd_check(&u, &du)
        })
        .collect();
    let slope = estimate_order(&grids, &errors).unwrap().slope;
    assert!(slope > 3.8, "{slope} from {errors:?}");
}

#[test]
fn non_finite_errors_are_rejected() {
    assert!(estimate_order(&[8, 16, 32], &[1.0, f64::NAN, 0.1]).is_err());
    assert!(estimate_order(&[8, 16, 32], &[1.0, 0.0, 0.0]).is_err());
    assert!(estimate_order(&[16, 8, 32], &[1.0, 0.5, 0.1]).is_err());
}
