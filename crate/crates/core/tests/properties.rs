use proptest::prelude::*;

use monostab_core::certificates::{apply_psi_transform, certify_path, PATH_GRID};
use monostab_core::delay::{roa_under_delay_t1, roa_under_delay_t2, roa_under_delay_t3, verify_box_invariance};
use monostab_core::homogeneity::{homogeneous_path, test_homogeneous, Dilation};
use monostab_core::integrate::{integrate_dde, integrate_ode};
use monostab_core::linear::{find_positive_w, is_hurwitz, Matrix};
use monostab_core::lyapunov::MaxSepLyap;
use monostab_core::model::eval_field;
use monostab_core::monotone::{fd_jacobian, jacobian, ordering_gap, JacobianSource};
use monostab_core::{
    parse, BoxSet, DelayField, DelayLaw, Env, ExprField, ExprSystem, InitialHistory, IntegratorConfig,
    PathCandidate, ScalingPsi, Var, VariableRoles,
};

fn planar() -> ExprField {
    ExprField::parse(&["-5*x1 + x1*x2^2", "x1 - 2*x2^2"]).unwrap()
}

fn planar_delayed(law: DelayLaw) -> DelayField {
    let sys = ExprSystem::parse(2, &["-5*x1 + x1*y2^2", "y1 - 2*x2^2"], VariableRoles::StateAndDelayed).unwrap();
    DelayField::from_system(&sys, law).unwrap()
}

/// Smooth expressions in `x1, x2` that are defined on the positive orthant.
fn smooth_expr() -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        Just("x1".to_string()),
        Just("x2".to_string()),
        (-3.0f64..3.0).prop_map(|c| format!("({c})")),
    ];
    leaf.prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} + {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} - {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} * {b})")),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| format!("({a} / (1 + ({b})^2))")),
            (inner.clone(), 2u32..4).prop_map(|(a, p)| format!("({a})^{p}")),
            inner.clone().prop_map(|a| format!("exp(({a}) / 10)")),
            inner.clone().prop_map(|a| format!("sqrt(1 + ({a})^2)")),
            inner.prop_map(|a| format!("-({a})")),
        ]
    })
}

fn metzler(n: usize, entries: &[f64], dominance: f64) -> Matrix {
    let mut m = Matrix::zeros(n);
    for i in 0..n {
        let mut row = 0.0;
        for j in 0..n {
            if i != j {
                let v = entries[i * n + j].abs();
                m.set(i, j, v);
                row += v;
            }
        }
        m.set(i, i, -row - dominance);
    }
    m
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, .. ProptestConfig::default() })]

    #[test]
    fn derivative_agrees_with_central_difference(src in smooth_expr(), x1 in 0.1f64..2.0, x2 in 0.1f64..2.0) {
        let e = parse(&src).unwrap();
        for (var, idx) in [(Var::X(0), 0), (Var::X(1), 1)] {
            let d = e.differentiate(var).unwrap();
            let x = [x1, x2];
            let v = d.eval(&Env::state(&x)).unwrap();
            let h = 1e-5;
            let (mut xp, mut xm) = (x, x);
            xp[idx] += h;
            xm[idx] -= h;
            let fd = (e.eval(&Env::state(&xp)).unwrap() - e.eval(&Env::state(&xm)).unwrap()) / (2.0 * h);
            prop_assert!((v - fd).abs() <= 1e-5 * (1.0 + v.abs()), "{src}: d/d{var} = {v}, fd = {fd}");
        }
    }

    #[test]
    fn printing_is_idempotent(src in smooth_expr(), x1 in 0.1f64..2.0, x2 in 0.1f64..2.0) {
        let e = parse(&src).unwrap();
        let printed = e.to_string();
        let reparsed = parse(&printed).unwrap();
        prop_assert_eq!(reparsed.to_string(), printed);
        let x = [x1, x2];
        let (a, b) = (e.eval(&Env::state(&x)).unwrap(), reparsed.eval(&Env::state(&x)).unwrap());
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn parser_never_panics(src in "[-+*/^(),.0-9a-z xy]{0,40}") {
        let _ = parse(&src);
    }

    #[test]
    fn parser_never_panics_on_arbitrary_text(src in "\\PC{0,40}") {
        let _ = parse(&src);
    }

    #[test]
    fn symbolic_and_fd_jacobians_agree(a in smooth_expr(), b in smooth_expr(), x1 in 0.1f64..2.0, x2 in 0.1f64..2.0) {
        // Shift so the origin is an equilibrium.
        let comps = [format!("{a} - ({})", a.replace("x1", "(0)").replace("x2", "(0)")),
                     format!("{b} - ({})", b.replace("x1", "(0)").replace("x2", "(0)"))];
        let f = ExprField::parse(&comps).unwrap();
        let x = [x1, x2];
        let (mut js, mut jf) = ([0.0; 4], [0.0; 4]);
        prop_assert_eq!(jacobian(&f, &x, &mut js).unwrap(), JacobianSource::Symbolic);
        fd_jacobian(&f, &x, &mut jf).unwrap();
        for (s, d) in js.iter().zip(&jf) {
            prop_assert!((s - d).abs() <= 1e-5 * (1.0 + s.abs()), "{js:?} vs {jf:?}");
        }
    }

    #[test]
    fn hurwitz_metzler_has_lp_certificate(n in 1usize..6, entries in prop::collection::vec(-3.0f64..3.0, 36), dom in 0.05f64..2.0) {
        let a = metzler(n, &entries, dom);
        prop_assert!(is_hurwitz(&a).unwrap());
        let w = find_positive_w(&a).unwrap().expect("diagonally dominant Metzler matrix");
        prop_assert!(w.iter().all(|v| *v > 0.0));
        prop_assert!(a.mul_vec(&w).iter().all(|v| *v < 0.0));
    }

    #[test]
    fn eq24_identity_for_cubic_fields(diag in prop::collection::vec(0.5f64..3.0, 2), off in 0.0f64..0.4, w in prop::collection::vec(0.5f64..2.0, 2), s in 1e-3f64..100.0) {
        let f = ExprField::parse(&[
            format!("-{}*x1^3 + {off}*x2^3", diag[0]),
            format!("{off}*x1^3 - {}*x2^3", diag[1]),
        ]).unwrap();
        let fw = eval_field(&f, &w).unwrap();
        let rho: Vec<f64> = w.iter().map(|v| v * s).collect();
        let direct = eval_field(&f, &rho).unwrap();
        for i in 0..2 {
            let scaled = s.powi(3) * fw[i];
            prop_assert!((direct[i] - scaled).abs() <= 1e-9 * scaled.abs().max(1e-300));
        }
        let b = BoxSet::new(vec![3.0, 3.0]).unwrap();
        let dil = Dilation::standard(2, 2.0).unwrap();
        prop_assert!(test_homogeneous(&f, &dil, &b, 50, 7).unwrap().status.passed());
        if fw.iter().all(|v| *v < 0.0) {
            let path = homogeneous_path(&f, &dil, &w, s).unwrap();
            prop_assert!(certify_path(&f, &path, 256).unwrap().certified());
        }
    }

    #[test]
    fn scaling_preserves_sign_pattern(d1 in 0.1f64..10.0, d2 in 0.1f64..10.0, x1 in 0.0f64..4.0, x2 in 0.0f64..2.0) {
        let f = planar();
        let psi = ScalingPsi::parse(&[format!("{d1}*y1"), format!("{d2}*y2")]).unwrap();
        let b = BoxSet::new(vec![4.0, 2.0]).unwrap();
        let h = apply_psi_transform(&f, &psi, &b).unwrap().field;
        let x = [x1, x2];
        let (fx, hx) = (eval_field(&f, &x).unwrap(), eval_field(&h, &x).unwrap());
        for i in 0..2 {
            prop_assert_eq!(fx[i].partial_cmp(&0.0), hx[i].partial_cmp(&0.0));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, .. ProptestConfig::default() })]

    #[test]
    fn integrator_error_tracks_tolerance(a in 0.1f64..3.0, x0 in 0.1f64..5.0) {
        let f = ExprField::parse(&[format!("-{a}*x1")]).unwrap();
        let mut prev = f64::INFINITY;
        for rtol in [1e-6, 1e-9, 1e-12] {
            let cfg = IntegratorConfig::with_horizon(5.0).with_tolerances(rtol, rtol * 1e-3);
            let sim = integrate_ode(&f, &[x0], &cfg).unwrap();
            let exact = x0 * (-a * 5.0).exp();
            let err = (sim.final_state()[0] - exact).abs();
            prop_assert!(err <= 100.0 * rtol * x0, "rtol {rtol}: err {err}");
            prop_assert!(err <= prev.max(1e-15));
            prev = err;
        }
    }

    #[test]
    fn cooperative_linear_flows_preserve_order(n in 1usize..5, entries in prop::collection::vec(-2.0f64..2.0, 25), dom in -0.5f64..1.0, lo in prop::collection::vec(0.0f64..1.0, 4), gap in prop::collection::vec(0.0f64..1.0, 4)) {
        let a = metzler(n, &entries, dom);
        let comps: Vec<String> = (0..n)
            .map(|i| (0..n).map(|j| format!("({})*x{}", a.get(i, j), j + 1)).collect::<Vec<_>>().join(" + "))
            .collect();
        let f = ExprField::parse(&comps).unwrap();
        let x_lo: Vec<f64> = lo[..n].to_vec();
        let x_hi: Vec<f64> = x_lo.iter().zip(&gap).map(|(l, g)| l + g).collect();
        let cfg = IntegratorConfig { divergence_bound: 1e8, ..IntegratorConfig::with_horizon(5.0) };
        let s_lo = integrate_ode(&f, &x_lo, &cfg).unwrap();
        let s_hi = integrate_ode(&f, &x_hi, &cfg).unwrap();
        let (g, _, _) = ordering_gap(&s_lo.trajectory, &s_hi.trajectory);
        let scale = 1.0 + s_hi.max_excursion;
        prop_assert!(g <= 1e-6 * scale, "gap {g}");
        prop_assert!(s_lo.trajectory.min_component() >= -1e-9 * scale);
    }

    #[test]
    fn delayed_flows_preserve_order(tau in 0.0f64..3.0, lo in prop::collection::vec(0.0f64..1.0, 2), frac in prop::collection::vec(0.0f64..1.0, 2)) {
        let g = planar_delayed(DelayLaw::Constant(tau));
        let x_lo = vec![lo[0] * 4.0, lo[1] * 2.0];
        let x_hi: Vec<f64> = x_lo.iter().zip([4.0, 2.0]).zip(&frac).map(|((l, u), f)| l + (u - l) * f).collect();
        let cfg = IntegratorConfig::with_horizon(30.0);
        let a = integrate_dde(&g, &InitialHistory::Constant(x_lo), &cfg).unwrap();
        let b = integrate_dde(&g, &InitialHistory::Constant(x_hi), &cfg).unwrap();
        prop_assert!(ordering_gap(&a.trajectory, &b.trajectory).0 <= 1e-6);
        prop_assert!(a.trajectory.min_component() >= -1e-9);
    }

    #[test]
    fn certified_paths_give_invariant_attracting_boxes(s_bar in 0.05f64..4.0, u1 in 0.0f64..1.0, u2 in 0.0f64..1.0) {
        let f = planar();
        let path = PathCandidate::parse(&["s", "sqrt(s)"], s_bar, Some(&["s", "s"])).unwrap();
        let cert = certify_path(&f, &path, PATH_GRID).unwrap();
        prop_assert!(cert.certified());
        let corner = cert.roa_box.unwrap();
        let x0 = [u1 * corner[0], u2 * corner[1]];
        let sim = integrate_ode(&f, &x0, &IntegratorConfig::default()).unwrap();
        prop_assert!(sim.verdict.is_convergent());
        prop_assert!(sim.trajectory.max_overshoot(&corner) <= 1e-6);
    }

    #[test]
    fn random_diagonal_scalings_keep_convergence(c in prop::collection::vec(0.2f64..3.0, 2), q in prop::collection::vec(0.0f64..2.0, 2), u1 in 0.05f64..1.0, u2 in 0.05f64..1.0) {
        let psi = ScalingPsi::parse(&[
            format!("({} + {}*x1^2)*y1", c[0], q[0]),
            format!("({} + {}*x2)*y2", c[1], q[1]),
        ]).unwrap();
        let b = BoxSet::new(vec![4.0, 2.0]).unwrap();
        let t = apply_psi_transform(&planar(), &psi, &b).unwrap();
        prop_assert!(t.kamke.status.passed());
        let sim = integrate_ode(&t.field, &[4.0 * u1, 2.0 * u2], &IntegratorConfig::default()).unwrap();
        prop_assert!(sim.verdict.is_convergent(), "{:?}", sim.verdict);
        prop_assert!(sim.trajectory.max_overshoot(&[4.0, 2.0]) <= 1e-6);
    }

    #[test]
    fn delay_tests_agree(s_bar in 0.05f64..4.0, gamma in 0.0f64..0.9) {
        let g = planar_delayed(DelayLaw::Proportional(gamma));
        let path = PathCandidate::parse(&["s", "sqrt(s)"], s_bar, Some(&["s", "s"])).unwrap();
        let b2 = roa_under_delay_t2(&g, &path).unwrap();
        let v = MaxSepLyap::closed(vec![parse("s").unwrap(), parse("s^2").unwrap()], vec![s_bar, s_bar.sqrt()]).unwrap();
        let b1 = roa_under_delay_t1(&g, &v, 24).unwrap();
        for (p, q) in b1.upper().iter().zip(b2.upper()) {
            prop_assert!((p - q).abs() <= 1e-9 * (1.0 + q));
        }
        let b3 = roa_under_delay_t3(&g, b2.upper(), &IntegratorConfig::default()).unwrap();
        prop_assert_eq!(b3.upper(), b2.upper());
        let rep = verify_box_invariance(&g, &b2, &InitialHistory::Constant(b2.upper().to_vec()), &IntegratorConfig::with_horizon(100.0)).unwrap();
        prop_assert!(rep.status.passed() && rep.converged());
    }

    #[test]
    fn delayed_trajectories_stay_below_the_corner_run(kind in 0usize..4, p in 0.0f64..1.0, lo in prop::collection::vec(0.0f64..1.0, 2), amp in 0.0f64..1.0) {
        let law = match kind {
            0 => DelayLaw::Constant(3.0 * p),
            1 => DelayLaw::Sinusoid { a: 1.0 + p, b: p, omega: 2.0 },
            2 => DelayLaw::Proportional(0.8 * p),
            _ => DelayLaw::parse_spec(&format!("expr:{p}*t/(1+t)")).unwrap(),
        };
        let g = planar_delayed(law);
        let v = [4.0, 2.0];
        let phi = InitialHistory::Expr(vec![
            parse(&format!("{}*(1 - {amp}*t/(1 + t^2))", v[0] * lo[0] * 0.5)).unwrap(),
            parse(&format!("{}*exp({amp}*t)", v[1] * lo[1])).unwrap(),
        ]);
        let cfg = IntegratorConfig::with_horizon(40.0);
        let below = integrate_dde(&g, &phi, &cfg).unwrap();
        let corner = integrate_dde(&g, &InitialHistory::Constant(v.to_vec()), &cfg).unwrap();
        prop_assert!(ordering_gap(&below.trajectory, &corner.trajectory).0 <= 1e-6);
    }
}
