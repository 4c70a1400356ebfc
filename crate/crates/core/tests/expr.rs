use proptest::prelude::*;
use symflow::expr::{build, parse_expr, Bindings, Expr, ExprError, Func, Var};

/// Trees over `r`, `t`, `u1`, `u2` that evaluate on the sampling box used
/// below: log and sqrt see `exp(.)`, powers are small integers.
fn arb_expr() -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (0.0f64..4.0).prop_map(|c| Expr::Const((c * 1000.0).round() / 1000.0)),
        Just(Expr::Var(Var::R)),
        Just(Expr::Var(Var::T)),
        Just(Expr::Var(Var::U(1))),
        Just(Expr::Var(Var::U(2))),
    ];
    leaf.prop_recursive(4, 24, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| Expr::Div(Box::new(a), Box::new(Expr::Call(Func::Exp, Box::new(b))))),
            (inner.clone(), 0u8..4).prop_map(|(a, p)| Expr::Pow(Box::new(a), p as f64)),
            inner.clone().prop_map(|a| Expr::Call(Func::Sin, Box::new(a))),
            inner.clone().prop_map(|a| Expr::Call(Func::Cos, Box::new(a))),
            inner.clone().prop_map(|a| {
                Expr::Call(Func::Log, Box::new(Expr::Call(Func::Exp, Box::new(build::mul(Expr::Const(0.25), a)))))
            }),
            inner.prop_map(|a| {
                Expr::Call(Func::Sqrt, Box::new(Expr::Call(Func::Exp, Box::new(build::mul(Expr::Const(0.25), a)))))
            }),
        ]
    })
}

fn eval_at(e: &Expr, x: [f64; 4]) -> Result<f64, ExprError> {
    e.eval(&Bindings::new().r(x[0]).t(x[1]).u(&[x[2], x[3]]))
}

fn point() -> impl Strategy<Value = [f64; 4]> {
    [0.1f64..0.9, 0.0f64..0.5, 0.2f64..1.5, 0.2f64..1.5]
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn printing_is_idempotent(e in arb_expr(), x in point()) {
        let printed = e.to_string();
        let reparsed = parse_expr(&printed, 2).unwrap();
        prop_assert_eq!(reparsed.to_string(), printed.clone());
        if let (Ok(a), Ok(b)) = (eval_at(&e, x), eval_at(&reparsed, x)) {
            prop_assert!(close(a, b, 1e-12), "{} : {} vs {}", printed, a, b);
        }
    }

    #[test]
    fn derivatives_match_central_differences(e in arb_expr(), x in point(), which in 0usize..4) {
        let var = [Var::R, Var::T, Var::U(1), Var::U(2)][which];
        let de = e.differentiate(var);
        let step = 1e-5;
        let mut lo = x;
        let mut hi = x;
        lo[which] -= step;
        hi[which] += step;
        if let (Ok(a), Ok(b), Ok(d)) = (eval_at(&e, lo), eval_at(&e, hi), eval_at(&de, x)) {
            let fd = (b - a) / (2.0 * step);
            let scale = eval_at(&e, x).map(f64::abs).unwrap_or(1.0).max(1.0);
            prop_assume!(d.abs() < 1e6 && scale < 1e6);
            prop_assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs() + scale), "{} d/d{}: {} vs {}", e, var, d, fd);
        }
    }

    #[test]
    fn differentiation_is_linear(a in arb_expr(), b in arb_expr(), k in -3.0f64..3.0, x in point()) {
        let combo = build::add(build::mul(Expr::Const(k), a.clone()), b.clone());
        let lhs = combo.differentiate(Var::R);
        let rhs = build::add(build::mul(Expr::Const(k), a.differentiate(Var::R)), b.differentiate(Var::R));
        if let (Ok(l), Ok(r)) = (eval_at(&lhs, x), eval_at(&rhs, x)) {
            prop_assert!(close(l, r, 1e-10), "{} vs {}", l, r);
        }
    }

    #[test]
    fn constants_differentiate_to_zero(c in -1e3f64..1e3) {
        prop_assert_eq!(Expr::Const(c).differentiate(Var::R).as_constant(), Some(0.0));
    }
}

#[test]
fn worked_examples() {
    let e = parse_expr("2*u1 - u2^2/4", 2).unwrap();
    assert_eq!(eval_at(&e, [0.0, 0.0, 1.5, 2.0]).unwrap(), 2.0);
    let d = e.differentiate(Var::U(2));
    assert_eq!(eval_at(&d, [0.0, 0.0, 1.5, 2.0]).unwrap(), -1.0);
    let e = parse_expr("1 + 0.05*cos(pi*r)", 0).unwrap();
    let v = e.eval(&Bindings::new().r(1.0)).unwrap();
    assert!((v - 0.95).abs() < 1e-15);
}

#[test]
fn parse_errors() {
    assert!(matches!(parse_expr("r +", 0), Err(ExprError::Syntax { .. })));
    assert!(matches!(parse_expr("u3", 2), Err(ExprError::UnknownIdentifier { .. })));
    assert!(matches!(parse_expr("r^t", 0), Err(ExprError::Syntax { .. })));
    assert!(matches!(parse_expr("foo(r)", 0), Err(ExprError::UnknownIdentifier { .. })));
}
