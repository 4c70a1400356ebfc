use proptest::prelude::*;
use symflow::algebra::catalog_space;
use symflow::deturck::{ricci_flow_residual, solve, solve_gauge, DeturckError, DeturckSystem, SolverConfig};
use symflow::expr::parse_expr;
use symflow::geometry::boundary_geometry;
use symflow::oracle::estimate_order;
use symflow::{BcSpec, InitialProfiles};

fn perturbed(profile: &str) -> InitialProfiles {
    InitialProfiles::parse("1", &[profile.to_string()]).unwrap()
}

#[test]
fn homogeneous_sphere_shrinks_linearly_in_area() {
    let space = catalog_space("sphere(2)").unwrap();
    let bc = BcSpec::totally_geodesic(1);
    let init = InitialProfiles::unit(1);
    let traj = solve(&SolverConfig::new(16, 0.6, 0.05), &space, &bc, &init).unwrap();
    for s in traj.states.iter().filter(|s| s.t <= 0.45) {
        for (h, f) in s.h.iter().zip(&s.f[0]) {
            assert_eq!(*h, 1.0);
            assert!((f * f - (1.0 - 2.0 * s.t)).abs() < 1e-10, "t = {}", s.t);
        }
    }
    let t_sing = traj.singular_time.expect("the fibre collapses");
    assert!((t_sing - 0.5).abs() < 0.01, "{t_sing}");
    assert!(traj.times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn snapshots_land_on_the_interval() {
    let space = catalog_space("sphere(3)").unwrap();
    let bc = BcSpec::totally_geodesic(1);
    let traj = solve(&SolverConfig::new(16, 0.1, 0.025), &space, &bc, &perturbed("1 + 0.1*cos(pi*r)")).unwrap();
    assert_eq!(traj.times.len(), 5);
    for (k, t) in traj.times.iter().enumerate() {
        assert!((t - 0.025 * k as f64).abs() < 1e-15);
    }
    assert!(traj.singular_time.is_none());
}

#[test]
fn incompatible_data_is_refused() {
    let space = catalog_space("sphere(2)").unwrap();
    let bc = BcSpec::totally_geodesic(1);
    match solve(&SolverConfig::new(16, 0.1, 0.05), &space, &bc, &perturbed("1 + r")) {
        Err(DeturckError::IncompatibleData(report)) => {
            assert_eq!(report.residuals, [vec![1.0], vec![1.0]]);
            assert_eq!(report.to_string(), "(j=0, i=1): 1.000e0, (j=1, i=1): 1.000e0");
        }
        other => panic!("expected IncompatibleData, got {other:?}"),
    }
}

#[test]
fn invalid_solver_config() {
    let space = catalog_space("sphere(2)").unwrap();
    let bc = BcSpec::totally_geodesic(1);
    let init = InitialProfiles::unit(1);
    for cfg in [
        SolverConfig::new(15, 0.1, 0.05),
        SolverConfig::new(4, 0.1, 0.05),
        SolverConfig::new(16, -1.0, 0.05),
        SolverConfig::new(16, 0.1, 0.5),
        SolverConfig { cfl: 0.9, ..SolverConfig::new(16, 0.1, 0.05) },
    ] {
        assert!(matches!(solve(&cfg, &space, &bc, &init), Err(DeturckError::Config(_)) | Err(DeturckError::Geometry(_))), "{cfg:?}");
    }
}

#[test]
fn oversized_step_is_rejected() {
    let space = catalog_space("sphere(2)").unwrap();
    let bc = BcSpec::totally_geodesic(1);
    let init = InitialProfiles::unit(1);
    let sys = DeturckSystem::new(&space, &bc, &init, 16).unwrap();
    let s = sys.initial_state().unwrap();
    let dt = 2.0 * sys.stable_dt(&s, 0.2);
    assert!(matches!(sys.step(&s, dt, 0.2, 1e-6), Err(DeturckError::StabilityBound { .. })));
}

#[test]
fn gauge_recovery_pins_endpoints_and_stays_monotone() {
    let space = catalog_space("sphere(2)").unwrap();
    let bc = BcSpec::totally_geodesic(1);
    let init = perturbed("1 + 0.05*cos(pi*r)");
    let traj = solve(&SolverConfig::new(32, 0.2, 0.01), &space, &bc, &init).unwrap();
    let traj = solve_gauge(&traj, &space, &bc, &init).unwrap();
    let phi = traj.gauge.as_ref().unwrap();
    for p in phi {
        assert!(p[0].abs() < 1e-10 && (p[32] - 1.0).abs() < 1e-10);
        assert!(p.windows(2).all(|w| w[1] > w[0]));
    }
    assert_eq!(traj.recovered.as_ref().unwrap().len(), traj.states.len());
}

#[test]
fn flow_residual_converges_at_second_order() {
    let space = catalog_space("sphere(2)").unwrap();
    let bc = BcSpec::totally_geodesic(1);
    let init = perturbed("1 + 0.05*cos(pi*r)");
    let grids = [16, 32, 64];
    let errors: Vec<f64> = grids
        .iter()
        .map(|&n| {
            let cfg = SolverConfig::new(n, 0.2, 0.16 / n as f64);
            let traj = solve(&cfg, &space, &bc, &init).unwrap();
            let traj = solve_gauge(&traj, &space, &bc, &init).unwrap();
            ricci_flow_residual(traj.flow(), &space).unwrap().max()
        })
        .collect();
    let order = estimate_order(&grids, &errors).unwrap();
    assert!(order.slope >= 1.7, "{order:?}");
}

#[test]
fn umbilic_boundary_keeps_its_mean_curvature() {
    let space = catalog_space("sphere(2)").unwrap();
    let bc = BcSpec::umbilic(&parse_expr("0.1", 0).unwrap(), 1).unwrap();
    let init = perturbed("1 + 0.1*(r^2 - r)");
    let traj = solve(&SolverConfig::new(32, 0.1, 0.02), &space, &bc, &init).unwrap();
    for s in &traj.states {
        for j in 0..2 {
            let bg = boundary_geometry(s, &space, j).unwrap();
            assert!((bg.mean_curvature - 0.2).abs() < 1e-10, "t = {} j = {j}: {}", s.t, bg.mean_curvature);
        }
    }
}

#[test]
fn runs_are_deterministic() {
    let space = catalog_space("su3/t2").unwrap();
    let bc = BcSpec::totally_geodesic(3);
    let init = InitialProfiles::parse(
        "1",
        &["1 + 0.05*cos(pi*r)".into(), "1.1".into(), "0.9 - 0.02*cos(2*pi*r)".into()],
    )
    .unwrap();
    let cfg = SolverConfig::new(16, 0.05, 0.01);
    let a = solve_gauge(&solve(&cfg, &space, &bc, &init).unwrap(), &space, &bc, &init).unwrap();
    let b = solve_gauge(&solve(&cfg, &space, &bc, &init).unwrap(), &space, &bc, &init).unwrap();
    assert_eq!(a, b);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    /// Data symmetric under `r -> 1 - r` stays symmetric.
    #[test]
    fn reflection_symmetry_is_preserved(a in -0.1f64..0.1, b in -0.1f64..0.1) {
        let space = catalog_space("sphere(3)").unwrap();
        let bc = BcSpec::totally_geodesic(1);
        let init = InitialProfiles::parse(
            &format!("1 + {a}*cos(2*pi*r)"),
            &[format!("1 + {b}*cos(2*pi*r)")],
        ).unwrap();
        let traj = solve(&SolverConfig::new(16, 0.05, 0.025), &space, &bc, &init).unwrap();
        for s in &traj.states {
            for m in 0..=16 {
                prop_assert!((s.h[m] - s.h[16 - m]).abs() < 1e-10);
                prop_assert!((s.f[0][m] - s.f[0][16 - m]).abs() < 1e-10);
            }
        }
    }
}
