//! Delay robustness: region-of-attraction boxes that survive arbitrary
//! admissible delays (tests T1, T2, T3), box invariance along delayed
//! trajectories, law sweeps and heterogeneous delays.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::certificates::{certify_path, CertError, PATH_GRID};
use crate::expr::EvalError;
use crate::integrate::{integrate_dde, integrate_ode, IntegrateError, IntegratorConfig, Simulation, Verdict};
use crate::lyapunov::{verify_decrease, LyapError, MaxSepLyap, DEFAULT_MARGIN};
use crate::model::{
    BoxSet, DelayAssignment, DelayField, DelayLaw, InitialHistory, LawCheck, ModelError,
    PathCandidate,
};
use crate::Status;

/// `g_i(w, w)` must be at most `-CORNER_TOL`.
pub const CORNER_TOL: f64 = 1e-12;
/// Allowed overshoot of the invariant box.
pub const INVARIANCE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum T3Stage {
    Negativity,
    Convergence,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DelayError {
    #[error("Lyapunov function is not certified for the delay-free field ({violations} violating grid points)")]
    UncertifiedLyapunov { violations: usize },
    #[error("path is not certified for the delay-free field")]
    UncertifiedPath,
    #[error("condition failed at the {stage:?} stage (component {component}, value {value})")]
    ConditionFailed {
        stage: T3Stage,
        component: usize,
        value: f64,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Certificate(#[from] CertError),
    #[error(transparent)]
    Lyapunov(#[from] LyapError),
}

/// T1: the sublevel box `0 <= x_i <= V_i^{-1}(c)`, `c = min_i V_i(v_i)`, after
/// checking the decrease of `V` along the induced field on its working box.
pub fn roa_under_delay_t1(g: &DelayField, v: &MaxSepLyap, grid: usize) -> Result<BoxSet, DelayError> {
    if v.dim() != g.dim() {
        return Err(DelayError::Precondition("Lyapunov function dimension differs".into()));
    }
    let working = BoxSet::new(v.upper().to_vec())?;
    let report = verify_decrease(v, &g.induced(), &working, grid, DEFAULT_MARGIN)?;
    if !report.status.passed() {
        return Err(DelayError::UncertifiedLyapunov {
            violations: report.violations,
        });
    }
    let c = v.level_of_box()?;
    let corner = (0..v.dim())
        .map(|i| v.component_inverse(i, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(BoxSet::new(corner)?)
}

/// T2: the box `rho(s_bar)` of a path certified for the induced field.
pub fn roa_under_delay_t2(g: &DelayField, path: &PathCandidate) -> Result<BoxSet, DelayError> {
    let cert = certify_path(&g.induced(), path, PATH_GRID)?;
    match cert.roa_box {
        Some(corner) if cert.certified() => Ok(BoxSet::new(corner)?),
        _ => Err(DelayError::UncertifiedPath),
    }
}

/// T3: `g(w, w) < 0` and convergence of the delay-free trajectory from `w`.
pub fn roa_under_delay_t3(
    g: &DelayField,
    w: &[f64],
    cfg: &IntegratorConfig,
) -> Result<BoxSet, DelayError> {
    if w.len() != g.dim() || w.iter().any(|v| !(*v > 0.0)) {
        return Err(DelayError::Precondition("w must be strictly positive".into()));
    }
    let mut gw = vec![0.0; g.dim()];
    g.map().eval(w, w, &mut gw)?;
    if let Some((component, &value)) = gw.iter().enumerate().find(|(_, v)| !(**v <= -CORNER_TOL)) {
        return Err(DelayError::ConditionFailed {
            stage: T3Stage::Negativity,
            component,
            value,
        });
    }
    let sim = integrate_ode(&g.induced(), w, cfg)?;
    if !sim.verdict.is_convergent() {
        let (component, value) = sim
            .final_state()
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, v)| if v > acc.1 { (i, v) } else { acc });
        return Err(DelayError::ConditionFailed {
            stage: T3Stage::Convergence,
            component,
            value,
        });
    }
    Ok(BoxSet::new(w.to_vec())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceReport {
    /// PASS when the trajectory never leaves the box by more than
    /// [`INVARIANCE_TOL`].
    pub status: Status,
    pub verdict: Verdict,
    pub max_overshoot: f64,
    pub max_excursion: f64,
    pub terminal_norm: f64,
    pub t_converge: Option<f64>,
}

impl InvarianceReport {
    pub fn converged(&self) -> bool {
        self.verdict.is_convergent()
    }
}

fn check_history_in_box(phi: &InitialHistory, domain: &BoxSet, tau_max: f64) -> Result<(), DelayError> {
    phi.validate(tau_max)?;
    let mut buf = vec![0.0; domain.dim()];
    for k in 0..=1024 {
        let t = -tau_max * k as f64 / 1024.0;
        phi.eval(t, &mut buf)?;
        if !domain.contains(&buf, 1e-12) {
            return Err(DelayError::Precondition(format!(
                "initial history leaves the box at t = {t}"
            )));
        }
    }
    Ok(())
}

/// Integrate the delayed system from `phi` and measure how far it leaves
/// the box.
pub fn verify_box_invariance(
    g: &DelayField,
    domain: &BoxSet,
    phi: &InitialHistory,
    cfg: &IntegratorConfig,
) -> Result<InvarianceReport, DelayError> {
    if domain.dim() != g.dim() {
        return Err(DelayError::Precondition("box dimension differs".into()));
    }
    let v = domain.upper();
    let mut gv = vec![0.0; g.dim()];
    g.map().eval(v, v, &mut gv)?;
    if gv.iter().any(|x| !(*x < 0.0)) {
        return Err(DelayError::Precondition(format!(
            "g(v, v) is not negative at the box corner: {gv:?}"
        )));
    }
    check_history_in_box(phi, domain, g.tau_max())?;
    let sim = integrate_dde(g, phi, cfg)?;
    Ok(invariance_from(&sim, domain))
}

fn invariance_from(sim: &Simulation, domain: &BoxSet) -> InvarianceReport {
    let max_overshoot = sim.trajectory.max_overshoot(domain.upper());
    InvarianceReport {
        status: Status::from_bool(max_overshoot <= INVARIANCE_TOL),
        verdict: sim.verdict,
        max_overshoot,
        max_excursion: sim.max_excursion,
        terminal_norm: sim.terminal_norm,
        t_converge: sim.verdict.t_converge(),
    }
}

/// Horizon for a law: proportional delays with `gamma >= 0.9` stretch it by
/// `0.1 / (1 - gamma)`.
pub fn horizon_for(law: &DelayLaw, t_end: f64) -> f64 {
    match law {
        DelayLaw::Proportional(g) if *g >= 0.9 => t_end * 0.1 / (1.0 - g),
        _ => t_end,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub law: DelayLaw,
    pub report: InvarianceReport,
}

impl SweepRow {
    pub fn converged(&self) -> bool {
        self.report.converged()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    /// PASS when every law converges; invariance is reported per row.
    pub status: Status,
    pub rows: Vec<SweepRow>,
}

/// One sweep entry; exposed so callers can run laws concurrently.
pub fn sweep_one(
    g: &DelayField,
    domain: &BoxSet,
    law: &DelayLaw,
    phi: &InitialHistory,
    cfg: &IntegratorConfig,
) -> Result<SweepRow, DelayError> {
    let field = g.with_law(law.clone())?;
    let cfg = IntegratorConfig {
        t_end: horizon_for(law, cfg.t_end),
        ..*cfg
    };
    let report = verify_box_invariance(&field, domain, phi, &cfg)?;
    Ok(SweepRow {
        law: law.clone(),
        report,
    })
}

/// Aggregate rows in law order.
pub fn sweep_report(rows: Vec<SweepRow>) -> SweepReport {
    let ok = rows.iter().all(SweepRow::converged);
    SweepReport {
        status: Status::from_bool(ok),
        rows,
    }
}

/// Run [`verify_box_invariance`] for every law. `phi` defaults to the
/// constant box corner, which dominates every history inside the box.
pub fn sweep_delay_laws(
    g: &DelayField,
    domain: &BoxSet,
    laws: &[DelayLaw],
    phi: Option<&InitialHistory>,
    cfg: &IntegratorConfig,
) -> Result<SweepReport, DelayError> {
    for law in laws {
        law.validate(LawCheck::default())?;
    }
    let corner = InitialHistory::Constant(domain.upper().to_vec());
    let phi = phi.unwrap_or(&corner);
    let rows = laws
        .iter()
        .map(|law| sweep_one(g, domain, law, phi, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(sweep_report(rows))
}

/// Build a field whose `g_i` reads `x_j(t - tau_i^j(t))`; `laws` is
/// row-major `n x n`.
pub fn heterogeneous_field(g: &DelayField, laws: Vec<DelayLaw>) -> Result<DelayField, DelayError> {
    Ok(g.with_delays(DelayAssignment::PerPair(laws))?)
}

/// Integrate a field with per-pair delays.
pub fn heterogeneous_delay_sim(
    g: &DelayField,
    phi: &InitialHistory,
    cfg: &IntegratorConfig,
) -> Result<Simulation, DelayError> {
    if !matches!(g.delays(), DelayAssignment::PerPair(_)) {
        return Err(DelayError::Precondition("field has a single shared delay".into()));
    }
    Ok(integrate_dde(g, phi, cfg)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, ExprSystem, VariableRoles};
    use crate::monotone::ordering_gap;

    fn planar_delayed(law: DelayLaw) -> DelayField {
        let sys = ExprSystem::parse(
            2,
            &["-5*x1 + x1*y2^2", "y1 - 2*x2^2"],
            VariableRoles::StateAndDelayed,
        )
        .unwrap();
        DelayField::from_system(&sys, law).unwrap()
    }

    #[test]
    fn t1_t2_t3_boxes() {
        let g = planar_delayed(DelayLaw::Proportional(0.5));
        let v = MaxSepLyap::closed(vec![parse("s").unwrap(), parse("s^2").unwrap()], vec![4.0, 2.0])
            .unwrap();
        let b1 = roa_under_delay_t1(&g, &v, 64).unwrap();
        assert!((b1.upper()[0] - 4.0).abs() < 1e-12 && (b1.upper()[1] - 2.0).abs() < 1e-12);
        let p = PathCandidate::parse(&["s", "sqrt(s)"], 4.0, Some(&["s", "s"])).unwrap();
        assert_eq!(roa_under_delay_t2(&g, &p).unwrap().upper(), &[4.0, 2.0]);
        let p5 = PathCandidate::parse(&["s", "sqrt(s)"], 5.0, Some(&["s", "s"])).unwrap();
        assert!(matches!(roa_under_delay_t2(&g, &p5), Err(DelayError::UncertifiedPath)));
        let cfg = IntegratorConfig::default();
        assert_eq!(roa_under_delay_t3(&g, &[4.0, 2.0], &cfg).unwrap().upper(), &[4.0, 2.0]);
        assert!(matches!(
            roa_under_delay_t3(&g, &[0.0, 2.0], &cfg),
            Err(DelayError::Precondition(_))
        ));
    }

    #[test]
    fn t3_rejects_stalled_scalar() {
        let sys = ExprSystem::parse(1, &["-x1*(y1-1)"], VariableRoles::StateAndDelayed).unwrap();
        let g = DelayField::from_system(&sys, DelayLaw::Constant(1.0)).unwrap();
        assert!(matches!(
            roa_under_delay_t3(&g, &[2.0], &IntegratorConfig::default()),
            Err(DelayError::ConditionFailed {
                stage: T3Stage::Convergence,
                ..
            })
        ));
    }

    #[test]
    fn invariance_under_sinusoidal_delay() {
        let g = planar_delayed(DelayLaw::Sinusoid {
            a: 1.0,
            b: 0.5,
            omega: 1.0,
        });
        let b = BoxSet::new(vec![4.0, 2.0]).unwrap();
        let rep = verify_box_invariance(
            &g,
            &b,
            &InitialHistory::Constant(vec![4.0, 2.0]),
            &IntegratorConfig::with_horizon(100.0),
        )
        .unwrap();
        assert_eq!(rep.status, Status::Pass);
        assert!(rep.converged());
        let bad = BoxSet::new(vec![4.0, 3.0]).unwrap();
        assert!(verify_box_invariance(
            &g,
            &bad,
            &InitialHistory::Constant(vec![1.0, 1.0]),
            &IntegratorConfig::default()
        )
        .is_err());
    }

    #[test]
    fn sweep_guards() {
        let g = planar_delayed(DelayLaw::zero());
        let b = BoxSet::new(vec![4.0, 2.0]).unwrap();
        let empty = sweep_delay_laws(&g, &b, &[], None, &IntegratorConfig::default()).unwrap();
        assert_eq!(empty.status, Status::Pass);
        let t = DelayLaw::from_expr(parse("t").unwrap()).unwrap();
        assert!(matches!(
            sweep_delay_laws(&g, &b, &[t], None, &IntegratorConfig::default()),
            Err(DelayError::Model(ModelError::Assumption1Violated(_)))
        ));
        assert!((horizon_for(&DelayLaw::Proportional(0.95), 200.0) - 400.0).abs() < 1e-9);
    }

    #[test]
    fn heterogeneous_reduces_to_shared() {
        let law = DelayLaw::Constant(1.5);
        let g = planar_delayed(law.clone());
        let het = heterogeneous_field(&g, vec![law; 4]).unwrap();
        let phi = InitialHistory::Constant(vec![4.0, 2.0]);
        let cfg = IntegratorConfig::with_horizon(30.0);
        let a = integrate_dde(&g, &phi, &cfg).unwrap();
        let b = heterogeneous_delay_sim(&het, &phi, &cfg).unwrap();
        let (gap_ab, _, _) = ordering_gap(&a.trajectory, &b.trajectory);
        let (gap_ba, _, _) = ordering_gap(&b.trajectory, &a.trajectory);
        assert!(gap_ab.max(gap_ba) < 1e-7);
        assert!(heterogeneous_delay_sim(&g, &phi, &cfg).is_err());
    }

    #[test]
    fn mixed_per_pair_laws_converge() {
        let g = planar_delayed(DelayLaw::zero());
        let laws = vec![
            DelayLaw::zero(),
            DelayLaw::Proportional(0.3),
            DelayLaw::Constant(2.0),
            DelayLaw::zero(),
        ];
        let het = heterogeneous_field(&g, laws).unwrap();
        let sim = heterogeneous_delay_sim(
            &het,
            &InitialHistory::Constant(vec![4.0, 2.0]),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert!(sim.verdict.is_convergent());
        assert!(sim.trajectory.max_overshoot(&[4.0, 2.0]) <= INVARIANCE_TOL);
        let t = DelayLaw::from_expr(parse("t").unwrap()).unwrap();
        assert!(matches!(
            heterogeneous_field(&g, vec![DelayLaw::zero(), t, DelayLaw::zero(), DelayLaw::zero()]),
            Err(DelayError::Model(ModelError::Assumption1Violated(_)))
        ));
    }
}
