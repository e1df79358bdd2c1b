//! Cooperativity checks: the Kamke condition on a box, its delay analogue,
//! and an empirical ordering test by integration.

use alloc::vec;
use alloc::vec::Vec;

use crate::expr::EvalError;
use crate::integrate::{integrate_ode, IntegrateError, IntegratorConfig, Trajectory};
use crate::model::{BoxSet, DelayMap, VectorField};
use crate::seeding;
use crate::Status;

/// Default grid resolution per axis.
pub const DEFAULT_GRID: usize = 32;
/// Cap on the total number of grid points.
pub const MAX_GRID_POINTS: usize = 1_000_000;
/// Off-diagonal entries above `-JACOBIAN_TOL` count as nonnegative.
pub const JACOBIAN_TOL: f64 = 1e-9;
/// Finite-difference step.
pub const FD_STEP: f64 = 1e-6;
/// Slack on trajectory ordering.
pub const ORDER_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JacobianSource {
    Symbolic,
    FiniteDifference,
}

impl JacobianSource {
    pub fn as_str(self) -> &'static str {
        match self {
            JacobianSource::Symbolic => "symbolic",
            JacobianSource::FiniteDifference => "finite-difference",
        }
    }
}

/// Which argument an entry differentiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Argument {
    X,
    Y,
}

/// Most negative offending entry found.
#[derive(Debug, Clone, PartialEq)]
pub struct JacobianWitness {
    pub x: Vec<f64>,
    /// Delayed argument, for delay checks.
    pub y: Option<Vec<f64>>,
    pub wrt: Argument,
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JacobianReport {
    pub status: Status,
    pub grid_per_axis: usize,
    pub points: usize,
    pub source: JacobianSource,
    /// Set when nonsmooth primitives forced finite differences.
    pub reduced_confidence: bool,
    /// Smallest checked entry over the grid.
    pub min_entry: f64,
    pub witness: Option<JacobianWitness>,
}

/// Central differences, falling back to one-sided ones at the orthant face.
pub fn fd_jacobian<F: VectorField + ?Sized>(
    f: &F,
    x: &[f64],
    jac: &mut [f64],
) -> Result<(), EvalError> {
    let n = f.dim();
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let h = FD_STEP * x[j].abs().max(1.0);
        let lo = if x[j] >= h { x[j] - h } else { x[j] };
        let hi = x[j] + h;
        xp[j] = hi;
        f.eval(&xp, &mut fp)?;
        xp[j] = lo;
        f.eval(&xp, &mut fm)?;
        xp[j] = x[j];
        for i in 0..n {
            jac[i * n + j] = (fp[i] - fm[i]) / (hi - lo);
        }
    }
    Ok(())
}

/// Analytic Jacobian when the field offers one and is smooth, else finite
/// differences.
pub fn jacobian<F: VectorField + ?Sized>(
    f: &F,
    x: &[f64],
    jac: &mut [f64],
) -> Result<JacobianSource, EvalError> {
    if f.is_smooth() {
        if let Some(r) = f.jacobian(x, jac) {
            r?;
            return Ok(JacobianSource::Symbolic);
        }
    }
    fd_jacobian(f, x, jac)?;
    Ok(JacobianSource::FiniteDifference)
}

/// Check `df_i/dx_j >= -tol` for `i != j` on a grid over the box.
pub fn check_kamke<F: VectorField + ?Sized>(
    f: &F,
    domain: &BoxSet,
    grid: usize,
) -> Result<JacobianReport, EvalError> {
    let n = f.dim();
    let r = domain.capped_resolution(grid, MAX_GRID_POINTS);
    let mut jac = vec![0.0; n * n];
    let mut source = JacobianSource::Symbolic;
    let mut min_entry = f64::INFINITY;
    let mut witness: Option<JacobianWitness> = None;
    let mut points = 0;
    for x in domain.grid(r) {
        points += 1;
        if jacobian(f, &x, &mut jac)? == JacobianSource::FiniteDifference {
            source = JacobianSource::FiniteDifference;
        }
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let v = jac[i * n + j];
                if v < min_entry {
                    min_entry = v;
                }
                if v < -JACOBIAN_TOL && witness.as_ref().is_none_or(|w| v < w.value) {
                    witness = Some(JacobianWitness {
                        x: x.clone(),
                        y: None,
                        wrt: Argument::X,
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
    }
    if n == 1 {
        min_entry = 0.0;
    }
    Ok(JacobianReport {
        status: Status::from_bool(witness.is_none()),
        grid_per_axis: r,
        points,
        source,
        reduced_confidence: !f.is_smooth(),
        min_entry,
        witness,
    })
}

fn fd_partials<G: DelayMap + ?Sized>(
    g: &G,
    x: &[f64],
    y: &[f64],
    wrt: Argument,
    jac: &mut [f64],
) -> Result<(), EvalError> {
    let n = g.dim();
    let (mut xp, mut yp) = (x.to_vec(), y.to_vec());
    let mut fp = vec![0.0; n];
    let mut fm = vec![0.0; n];
    for j in 0..n {
        let base = match wrt {
            Argument::X => x[j],
            Argument::Y => y[j],
        };
        let h = FD_STEP * base.abs().max(1.0);
        let lo = if base >= h { base - h } else { base };
        let hi = base + h;
        let slot = |xp: &mut Vec<f64>, yp: &mut Vec<f64>, v: f64| match wrt {
            Argument::X => xp[j] = v,
            Argument::Y => yp[j] = v,
        };
        slot(&mut xp, &mut yp, hi);
        g.eval(&xp, &yp, &mut fp)?;
        slot(&mut xp, &mut yp, lo);
        g.eval(&xp, &yp, &mut fm)?;
        slot(&mut xp, &mut yp, base);
        for i in 0..n {
            jac[i * n + j] = (fp[i] - fm[i]) / (hi - lo);
        }
    }
    Ok(())
}

/// Delay-map partials in `x` or `y`.
pub fn delay_jacobian<G: DelayMap + ?Sized>(
    g: &G,
    x: &[f64],
    y: &[f64],
    wrt: Argument,
    jac: &mut [f64],
) -> Result<JacobianSource, EvalError> {
    if g.is_smooth() {
        let analytic = match wrt {
            Argument::X => g.jacobian_x(x, y, jac),
            Argument::Y => g.jacobian_y(x, y, jac),
        };
        if let Some(r) = analytic {
            r?;
            return Ok(JacobianSource::Symbolic);
        }
    }
    fd_partials(g, x, y, wrt, jac)?;
    Ok(JacobianSource::FiniteDifference)
}

/// Kamke condition in `x` (off-diagonal) and order preservation in `y`
/// (every entry) on a grid of `box x box`.
pub fn check_assumption2<G: DelayMap + ?Sized>(
    g: &G,
    domain: &BoxSet,
    grid: usize,
) -> Result<JacobianReport, EvalError> {
    let n = g.dim();
    let doubled = BoxSet::new(domain.upper().iter().chain(domain.upper()).copied().collect())
        .expect("box corners are valid");
    let r = doubled.capped_resolution(grid, MAX_GRID_POINTS);
    let mut jx = vec![0.0; n * n];
    let mut jy = vec![0.0; n * n];
    let mut source = JacobianSource::Symbolic;
    let mut min_entry = f64::INFINITY;
    let mut witness: Option<JacobianWitness> = None;
    let mut points = 0;
    for z in doubled.grid(r) {
        points += 1;
        let (x, y) = z.split_at(n);
        for (wrt, jac) in [(Argument::X, &mut jx), (Argument::Y, &mut jy)] {
            if delay_jacobian(g, x, y, wrt, jac)? == JacobianSource::FiniteDifference {
                source = JacobianSource::FiniteDifference;
            }
            for i in 0..n {
                for j in 0..n {
                    if wrt == Argument::X && i == j {
                        continue;
                    }
                    let v = jac[i * n + j];
                    min_entry = min_entry.min(v);
                    if v < -JACOBIAN_TOL && witness.as_ref().is_none_or(|w| v < w.value) {
                        witness = Some(JacobianWitness {
                            x: x.to_vec(),
                            y: Some(y.to_vec()),
                            wrt,
                            row: i,
                            col: j,
                            value: v,
                        });
                    }
                }
            }
        }
    }
    Ok(JacobianReport {
        status: Status::from_bool(witness.is_none()),
        grid_per_axis: r,
        points,
        source,
        reduced_confidence: !g.is_smooth(),
        min_entry,
        witness,
    })
}

/// Largest violation of `lower <= upper + 0` over both trajectories' sample
/// times in their common interval: returns `(gap, t, component)` with
/// `gap = max (lower_i - upper_i)`.
pub fn ordering_gap(lower: &Trajectory, upper: &Trajectory) -> (f64, f64, usize) {
    let n = lower.dim();
    let t_hi = lower.t_final().min(upper.t_final());
    let t_lo = lower.t_start().max(upper.t_start());
    let mut worst = (f64::NEG_INFINITY, t_lo, 0);
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    let times = lower.times().iter().chain(upper.times());
    for &t in times.filter(|t| **t >= t_lo && **t <= t_hi) {
        if lower.sample(t, &mut a).is_none() || upper.sample(t, &mut b).is_none() {
            continue;
        }
        for i in 0..n {
            let gap = a[i] - b[i];
            if gap > worst.0 {
                worst = (gap, t, i);
            }
        }
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderingWitness {
    pub lower_x0: Vec<f64>,
    pub upper_x0: Vec<f64>,
    pub t: f64,
    pub component: usize,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalReport {
    pub status: Status,
    pub trials: usize,
    /// Largest `x_i(t, x'_0) - x_i(t, x_0)` seen.
    pub worst_gap: f64,
    pub witness: Option<OrderingWitness>,
}

/// Draw an ordered pair `x' <= x` in the box.
pub fn ordered_pair<R: rand::Rng>(rng: &mut R, domain: &BoxSet) -> (Vec<f64>, Vec<f64>) {
    let upper: Vec<f64> = domain
        .upper()
        .iter()
        .map(|v| seeding::uniform(rng, 0.0, *v))
        .collect();
    let lower = upper
        .iter()
        .map(|v| v * seeding::uniform(rng, 0.0, 1.0))
        .collect();
    (lower, upper)
}

/// Integrate random ordered pairs and check the ordering persists.
pub fn check_monotone_empirical<F: VectorField + ?Sized>(
    f: &F,
    domain: &BoxSet,
    trials: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<EmpiricalReport, IntegrateError> {
    let mut worst_gap = f64::NEG_INFINITY;
    let mut witness = None;
    for k in 0..trials {
        let mut rng = seeding::stream(seed, k as u64);
        let (lo, hi) = ordered_pair(&mut rng, domain);
        let a = integrate_ode(f, &lo, cfg)?;
        let b = integrate_ode(f, &hi, cfg)?;
        let (gap, t, component) = ordering_gap(&a.trajectory, &b.trajectory);
        if gap > worst_gap {
            worst_gap = gap;
            if gap > ORDER_TOL {
                witness = Some(OrderingWitness {
                    lower_x0: lo,
                    upper_x0: hi,
                    t,
                    component,
                    gap,
                });
            }
        }
    }
    Ok(EmpiricalReport {
        status: Status::from_bool(witness.is_none()),
        trials,
        worst_gap: if trials == 0 { 0.0 } else { worst_gap },
        witness,
    })
}
