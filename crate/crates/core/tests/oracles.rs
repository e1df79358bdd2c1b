//! Reference values computed independently (LAPACK eigenvalues, HiGHS LP,
//! an order-8 Runge-Kutta solve at tight tolerances, exact method-of-steps
//! polynomials) and frozen here.

use monostab_core::integrate::{integrate_dde, integrate_ode};
use monostab_core::linear::{eigenvalues, find_positive_w, is_hurwitz, spectral_abscissa, Matrix};
use monostab_core::{
    DelayField, DelayLaw, ExprField, ExprSystem, InitialHistory, IntegratorConfig, VariableRoles,
};

fn sorted_eigs(rows: &[Vec<f64>]) -> Vec<(f64, f64)> {
    let mut ev = eigenvalues(&Matrix::from_rows(rows).unwrap()).unwrap();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

fn assert_eigs(rows: &[Vec<f64>], expected: &[(f64, f64)], tol: f64) {
    let got = sorted_eigs(rows);
    assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(expected) {
        assert!((g.0 - e.0).abs() < tol && (g.1 - e.1).abs() < tol, "{got:?} vs {expected:?}");
    }
}

#[test]
fn eigenvalues_match_reference() {
    assert_eigs(
        &[vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0], vec![-6.0, -11.0, -6.0]],
        &[(-3.0, 0.0), (-2.0, 0.0), (-1.0, 0.0)],
        1e-9,
    );
    assert_eigs(&[vec![-1.0, 2.0], vec![-2.0, -1.0]], &[(-1.0, -2.0), (-1.0, 2.0)], 1e-12);
    assert_eigs(
        &[
            vec![-3.0, 1.0, 0.5, 0.0],
            vec![0.2, -2.0, 0.3, 0.1],
            vec![0.0, 1.0, -4.0, 2.0],
            vec![0.5, 0.0, 0.7, -1.5],
        ],
        &[
            (-4.469143061319027, 0.0),
            (-3.2548383863769477, 0.0),
            (-1.9491010131536428, 0.0),
            (-0.8269175391503799, 0.0),
        ],
        1e-10,
    );
    assert_eigs(&[vec![2.0, 1.0], vec![0.0, 2.0]], &[(2.0, 0.0), (2.0, 0.0)], 1e-7);
    assert_eigs(
        &[
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![6.0, 7.0, 8.0, 9.0, 10.0],
            vec![0.0, 1.0, 2.0, 3.0, 4.0],
            vec![0.0, 0.0, 5.0, 6.0, 7.0],
            vec![0.0, 0.0, 0.0, 8.0, 9.0],
        ],
        &[
            (-0.2062229628870355, -1.1527560950904927),
            (-0.2062229628870355, 1.1527560950904927),
            (0.0, 0.0),
            (8.664166961079472, 0.0),
            (16.74827896469461, 0.0),
        ],
        1e-9,
    );
}

#[test]
fn lp_feasibility_matches_reference() {
    let a = Matrix::from_rows(&[
        vec![-3.0, 1.0, 0.5, 0.0],
        vec![0.2, -2.0, 0.3, 0.1],
        vec![0.0, 1.0, -4.0, 2.0],
        vec![0.5, 0.0, 0.7, -1.5],
    ])
    .unwrap();
    let w = find_positive_w(&a).unwrap().expect("feasible");
    assert!(a.mul_vec(&w).iter().all(|v| *v <= -1.0 + 1e-9));
    assert!((spectral_abscissa(&a).unwrap() + 0.8269175391503799).abs() < 1e-10);

    let b = Matrix::from_rows(&[vec![-1.0, 2.0], vec![2.0, -1.0]]).unwrap();
    assert!(find_positive_w(&b).unwrap().is_none());
    assert!(!is_hurwitz(&b).unwrap());
    assert!((spectral_abscissa(&b).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn example_one_trajectory_matches_reference() {
    let f = ExprField::parse(&["-5*x1 + x1*x2^2", "x1 - 2*x2^2"]).unwrap();
    let cfg = IntegratorConfig::with_horizon(10.0).with_tolerances(1e-11, 1e-14);
    let sim = integrate_ode(&f, &[4.0, 2.0], &cfg).unwrap();
    let reference = [
        (0.5, [0.9577048432983725, 1.0484205122425527]),
        (1.0, [0.10887710288340814, 0.5980721026498599]),
        (2.0, [0.0008700464809205288, 0.2797114111370396]),
        (5.0, [2.905479524333654e-10, 0.10446815955749864]),
        (10.0, [4.145174637767742e-21, 0.0510926296859839]),
    ];
    for (t, x) in reference {
        let got = sim.trajectory.sample_vec(t).unwrap();
        for i in 0..2 {
            assert!((got[i] - x[i]).abs() <= 1e-8 * (1.0 + x[i].abs()), "t={t}: {got:?} vs {x:?}");
        }
    }
}

#[test]
fn constant_delay_matches_method_of_steps() {
    let sys = ExprSystem::parse(1, &["-y1"], VariableRoles::StateAndDelayed).unwrap();
    let g = DelayField::from_system(&sys, DelayLaw::Constant(1.0)).unwrap();
    let cfg = IntegratorConfig {
        clamp_nonnegative: false,
        ..IntegratorConfig::with_horizon(4.0).with_tolerances(1e-11, 1e-13)
    };
    let sim = integrate_dde(&g, &InitialHistory::Constant(vec![1.0]), &cfg).unwrap();
    for (t, x) in [
        (0.5, 0.5),
        (1.5, -0.375),
        (2.5, -0.3958333333333333),
        (3.5, 0.06510416666666667),
        (4.0, 0.20833333333333334),
    ] {
        let got = sim.trajectory.sample_vec(t).unwrap()[0];
        assert!((got - x).abs() < 1e-8, "t={t}: {got} vs {x}");
    }
}
