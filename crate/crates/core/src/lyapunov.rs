//! Max-separable Lyapunov functions `V(x) = max_i V_i(x_i)`: Dini
//! derivatives along a field, sampled decrease verification, and the
//! construction from a single decreasing trajectory.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::expr::{Env, EvalError, Expr, Var};
use crate::integrate::{integrate_ode, IntegrateError, IntegratorConfig, Trajectory};
use crate::interp::{InterpError, MonotoneCubic};
use crate::model::{eval_field, BoxSet, VectorField};
use crate::Status;

/// Relative tolerance for membership in the active set.
pub const TIE_TOL: f64 = 1e-9;
/// Default decrease margin: PASS needs `D+V(x) < -margin * V(x)`.
pub const DEFAULT_MARGIN: f64 = 1e-9;
/// Number of V-level bins in a decrease report.
pub const LEVEL_BINS: usize = 32;
/// Steepest `|dT_i/dx_i|` accepted without a warning flag.
pub const STEEP_GRADIENT: f64 = 1e8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LyapError {
    #[error("V_{component} is not differentiable at x = {x}")]
    NondifferentiablePoint { component: usize, x: f64 },
    #[error("w is not in Omega: f_{component}(w) = {value} is not negative")]
    NotInOmega { component: usize, value: f64 },
    #[error("trajectory from w does not converge to the origin (terminal state {terminal:?})")]
    NoConvergence { terminal: Vec<f64> },
    #[error("component {component} of the trajectory stops decreasing at t = {t}")]
    NonmonotoneComponent { component: usize, t: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid component: {0}")]
    InvalidComponent(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Interp(#[from] InterpError),
}

/// Scalar class-K component `V_i`.
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    /// Closed form in `s` (the coordinate value), with its derivative.
    Closed { v: Expr, dv: Expr },
    /// `x / w`.
    Linear { w: f64 },
    /// `rho^{-1}(x)` for a class-K `rho` on `[0, s_bar]`, so
    /// `V' = 1 / rho'(V)`.
    InversePath { rho: Expr, drho: Expr, s_bar: f64 },
    /// `exp(-T(x))` with `T` tabulated; linear through the origin below
    /// `x_min`.
    Tabulated { t_of_x: MonotoneCubic, x_min: f64 },
}

impl Component {
    /// Closed form from an expression in `s`.
    pub fn closed(v: Expr) -> Result<Self, LyapError> {
        let dv = v
            .differentiate(Var::S)
            .map_err(|e| LyapError::InvalidComponent(format!("{e}")))?;
        Ok(Component::Closed { v, dv })
    }

    /// Inverse of a path component.
    pub fn inverse_path(rho: Expr, s_bar: f64) -> Result<Self, LyapError> {
        let drho = rho
            .differentiate(Var::S)
            .map_err(|e| LyapError::InvalidComponent(format!("{e}")))?;
        Ok(Component::InversePath { rho, drho, s_bar })
    }

    pub fn value(&self, x: f64) -> Result<f64, EvalError> {
        match self {
            Component::Closed { v, .. } => v.eval(&Env::s(x)),
            Component::Linear { w } => Ok(x / w),
            Component::InversePath { rho, s_bar, .. } => invert(|s| rho.eval(&Env::s(s)), x, *s_bar),
            Component::Tabulated { t_of_x, x_min } => Ok(tabulated_value(t_of_x, *x_min, x)),
        }
    }

    pub fn slope(&self, x: f64) -> Result<f64, EvalError> {
        match self {
            Component::Closed { dv, .. } => dv.eval(&Env::s(x)),
            Component::Linear { w } => Ok(1.0 / w),
            Component::InversePath { drho, .. } => {
                let s = self.value(x)?;
                match drho.eval(&Env::s(s)) {
                    Ok(d) if d.is_finite() && d > 0.0 => Ok(1.0 / d),
                    // Infinite slope of rho (e.g. sqrt at 0) inverts to 0.
                    Ok(d) if d.is_infinite() => Ok(0.0),
                    Err(EvalError::Domain { .. }) if s == 0.0 => Ok(0.0),
                    Ok(d) => Err(EvalError::Domain {
                        op: "1/rho'",
                        value: d,
                    }),
                    Err(e) => Err(e),
                }
            }
            Component::Tabulated { t_of_x, x_min } => {
                if x < *x_min {
                    Ok(tabulated_value(t_of_x, *x_min, *x_min) / x_min)
                } else {
                    Ok(-t_of_x.slope(x) * (-t_of_x.eval(x)).exp())
                }
            }
        }
    }

    /// `V_i^{-1}(c)`.
    pub fn inverse(&self, c: f64) -> Result<f64, EvalError> {
        match self {
            Component::Linear { w } => Ok(c * w),
            Component::InversePath { rho, .. } => rho.eval(&Env::s(c)),
            _ => {
                if c <= 0.0 {
                    return Ok(0.0);
                }
                let mut hi = 1.0;
                let mut guard = 0;
                while self.value(hi)? < c {
                    hi *= 2.0;
                    guard += 1;
                    if guard > 1100 {
                        return Err(EvalError::Domain {
                            op: "V^-1",
                            value: c,
                        });
                    }
                }
                bisect(|x| self.value(x), c, 0.0, hi)
            }
        }
    }

    /// Lower edge of the extrapolated region (0 when there is none).
    pub fn extrapolation_edge(&self) -> f64 {
        match self {
            Component::Tabulated { x_min, .. } => *x_min,
            _ => 0.0,
        }
    }
}

fn tabulated_value(t_of_x: &MonotoneCubic, x_min: f64, x: f64) -> f64 {
    if x < x_min {
        (-t_of_x.eval(x_min)).exp() * x / x_min
    } else {
        (-t_of_x.eval(x)).exp()
    }
}

fn bisect(
    f: impl Fn(f64) -> Result<f64, EvalError>,
    target: f64,
    mut lo: f64,
    mut hi: f64,
) -> Result<f64, EvalError> {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid)? < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solve `rho(s) = x` for `s` on `[0, s_bar]`, extending past `s_bar` by
/// doubling if needed.
fn invert(rho: impl Fn(f64) -> Result<f64, EvalError>, x: f64, s_bar: f64) -> Result<f64, EvalError> {
    if x <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = s_bar.max(1e-300);
    let mut guard = 0;
    while rho(hi)? < x {
        hi *= 2.0;
        guard += 1;
        if guard > 1100 {
            return Err(EvalError::Domain {
                op: "rho^-1",
                value: x,
            });
        }
    }
    bisect(rho, x, 0.0, hi)
}

/// `V(x) = max_i V_i(x_i)` on the working box `0 <= x <= upper`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxSepLyap {
    components: Vec<Component>,
    upper: Vec<f64>,
}

impl MaxSepLyap {
    pub fn new(components: Vec<Component>, upper: Vec<f64>) -> Result<Self, LyapError> {
        if components.len() != upper.len() {
            return Err(LyapError::DimensionMismatch {
                expected: components.len(),
                found: upper.len(),
            });
        }
        Ok(MaxSepLyap { components, upper })
    }

    /// `V(x) = max_i x_i / w_i` on the box `w`.
    pub fn linear(w: &[f64]) -> Self {
        MaxSepLyap {
            components: w.iter().map(|&w| Component::Linear { w }).collect(),
            upper: w.to_vec(),
        }
    }

    /// Closed-form components given as expressions in `s`.
    pub fn closed(vs: Vec<Expr>, upper: Vec<f64>) -> Result<Self, LyapError> {
        let components = vs.into_iter().map(Component::closed).collect::<Result<_, _>>()?;
        Self::new(components, upper)
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn with_upper(mut self, upper: Vec<f64>) -> Self {
        self.upper = upper;
        self
    }

    pub fn component_value(&self, i: usize, xi: f64) -> Result<f64, EvalError> {
        self.components[i].value(xi)
    }

    pub fn component_slope(&self, i: usize, xi: f64) -> Result<f64, EvalError> {
        self.components[i].slope(xi)
    }

    pub fn component_inverse(&self, i: usize, c: f64) -> Result<f64, EvalError> {
        self.components[i].inverse(c)
    }

    /// Per-component values.
    pub fn values(&self, x: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.components
            .iter()
            .zip(x)
            .map(|(c, xi)| c.value(*xi))
            .collect()
    }

    pub fn value(&self, x: &[f64]) -> Result<f64, EvalError> {
        Ok(self.values(x)?.into_iter().fold(f64::NEG_INFINITY, f64::max))
    }

    /// Indices `j` with `V(x) - V_j(x_j) <= TIE_TOL (1 + V(x))`.
    pub fn active_set(&self, x: &[f64]) -> Result<Vec<usize>, EvalError> {
        let vals = self.values(x)?;
        let v = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        Ok(active_indices(&vals, v))
    }

    /// `c = min_i V_i(v_i)` over the working box.
    pub fn level_of_box(&self) -> Result<f64, EvalError> {
        let mut c = f64::INFINITY;
        for (comp, v) in self.components.iter().zip(&self.upper) {
            c = c.min(comp.value(*v)?);
        }
        Ok(c)
    }

    /// Class-K envelopes `nu1(r) = min_i V_i(r) <= V_i(r) <= max_i V_i(r) = nu2(r)`.
    pub fn envelopes(&self, r: f64) -> Result<(f64, f64), EvalError> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &self.components {
            let v = c.value(r)?;
            lo = lo.min(v);
            hi = hi.max(v);
        }
        Ok((lo, hi))
    }

    /// True when an active component at `x` sits in its extrapolated region.
    pub fn is_extrapolated(&self, x: &[f64]) -> Result<bool, EvalError> {
        Ok(self
            .active_set(x)?
            .into_iter()
            .any(|j| x[j] < self.components[j].extrapolation_edge()))
    }

    /// Rows `(i, x_i, V_i, dV_i)` on `samples` points of each `[0, v_i]`.
    pub fn table(&self, samples: usize) -> Result<Vec<(usize, f64, f64, f64)>, EvalError> {
        let samples = samples.max(2);
        let mut rows = Vec::with_capacity(self.dim() * samples);
        for (i, (c, v)) in self.components.iter().zip(&self.upper).enumerate() {
            for k in 0..samples {
                let x = v * k as f64 / (samples - 1) as f64;
                rows.push((i, x, c.value(x)?, c.slope(x)?));
            }
        }
        Ok(rows)
    }
}

fn active_indices(vals: &[f64], v: f64) -> Vec<usize> {
    let tol = TIE_TOL * (1.0 + v.abs());
    vals.iter()
        .enumerate()
        .filter(|(_, vj)| v - **vj <= tol)
        .map(|(j, _)| j)
        .collect()
}

/// Upper-right Dini derivative of `V` along `f` at `x`:
/// `max_{j in J(x)} V_j'(x_j) f_j(x)`.
pub fn dini_derivative<F: VectorField + ?Sized>(
    v: &MaxSepLyap,
    f: &F,
    x: &[f64],
) -> Result<f64, LyapError> {
    let fx = eval_field(f, x)?;
    dini_with_field_value(v, x, &fx)
}

fn dini_with_field_value(v: &MaxSepLyap, x: &[f64], fx: &[f64]) -> Result<f64, LyapError> {
    let vals = v.values(x)?;
    let level = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best = f64::NEG_INFINITY;
    for j in active_indices(&vals, level) {
        if let Component::Tabulated { t_of_x, x_min } = &v.components[j] {
            if x[j] == *x_min {
                let left = tabulated_value(t_of_x, *x_min, *x_min) / x_min;
                let right = -t_of_x.slope(*x_min) * (-t_of_x.eval(*x_min)).exp();
                if (left - right).abs() > 1e-6 * (left.abs() + right.abs()) {
                    return Err(LyapError::NondifferentiablePoint {
                        component: j,
                        x: x[j],
                    });
                }
            }
        }
        let term = v.component_slope(j, x[j])? * fx[j];
        best = best.max(term);
    }
    Ok(best)
}

/// Margin estimate over one band of V-levels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelBin {
    pub level_lo: f64,
    pub level_hi: f64,
    /// `min -D+V` over the bin, `None` if no point fell in it.
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecreasePoint {
    pub x: Vec<f64>,
    pub v: f64,
    pub dini: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecreaseReport {
    pub status: Status,
    pub grid_per_axis: usize,
    pub points: usize,
    pub margin: f64,
    pub violations: usize,
    /// Point with the largest `D+V / V`.
    pub worst: Option<DecreasePoint>,
    /// Tabulated margin estimate by V-level.
    pub mu_hat: Vec<LevelBin>,
    /// `min -D+V / V` over points outside any extrapolated region.
    pub min_decay_ratio: f64,
    pub extrapolated_points: usize,
}

/// Sample the box and check `D+V(x) < -margin V(x)` at every `x != 0`.
pub fn verify_decrease<F: VectorField + ?Sized>(
    v: &MaxSepLyap,
    f: &F,
    domain: &BoxSet,
    grid: usize,
    margin: f64,
) -> Result<DecreaseReport, LyapError> {
    if v.dim() != domain.dim() || f.dim() != domain.dim() {
        return Err(LyapError::DimensionMismatch {
            expected: v.dim(),
            found: domain.dim(),
        });
    }
    let r = domain.capped_resolution(grid, crate::monotone::MAX_GRID_POINTS);
    let mut samples = Vec::new();
    let mut fx = vec![0.0; f.dim()];
    let mut max_level = 0.0_f64;
    for x in domain.grid(r) {
        if x.iter().all(|c| *c == 0.0) {
            continue;
        }
        f.eval(&x, &mut fx)?;
        let level = v.value(&x)?;
        let d = dini_with_field_value(v, &x, &fx)?;
        let extrapolated = v.is_extrapolated(&x)?;
        max_level = max_level.max(level);
        samples.push((x, level, d, extrapolated));
    }
    let bins = LEVEL_BINS;
    let width = if max_level > 0.0 { max_level / bins as f64 } else { 1.0 };
    let mut mu_hat: Vec<LevelBin> = (0..bins)
        .map(|k| LevelBin {
            level_lo: width * k as f64,
            level_hi: width * (k + 1) as f64,
            mu: None,
        })
        .collect();
    let mut violations = 0;
    let mut worst: Option<DecreasePoint> = None;
    let mut worst_ratio = f64::NEG_INFINITY;
    let mut min_decay_ratio = f64::INFINITY;
    let mut extrapolated_points = 0;
    for (x, level, d, extrapolated) in &samples {
        if !(*d < -margin * level) {
            violations += 1;
        }
        let ratio = if *level > 0.0 { d / level } else { f64::INFINITY };
        if ratio > worst_ratio || worst.is_none() {
            worst_ratio = ratio;
            worst = Some(DecreasePoint {
                x: x.clone(),
                v: *level,
                dini: *d,
            });
        }
        if *extrapolated {
            extrapolated_points += 1;
        } else {
            min_decay_ratio = min_decay_ratio.min(-ratio);
        }
        let k = ((level / width) as usize).min(bins - 1);
        let mu = &mut mu_hat[k].mu;
        *mu = Some(mu.map_or(-d, |m: f64| m.min(-d)));
    }
    Ok(DecreaseReport {
        status: Status::from_bool(violations == 0),
        grid_per_axis: r,
        points: samples.len(),
        margin,
        violations,
        worst,
        mu_hat,
        min_decay_ratio,
        extrapolated_points,
    })
}

/// Step cap and horizon for the constructing trajectory.
pub const CONSTRUCTION_MAX_STEP: f64 = 0.02;
pub const CONSTRUCTION_HORIZON: f64 = 50.0;

/// Diagnostics from [`construct_from_trajectory`].
#[derive(Debug, Clone, PartialEq)]
pub struct Construction {
    pub lyapunov: MaxSepLyap,
    /// The trajectory `omega(t) = x(t, w)` the tables were built from.
    pub trajectory: Trajectory,
    /// Smallest sampled `V_i'` on `(0, w_i]` per component.
    pub min_slope: Vec<f64>,
    /// Some `|dT_i/dx_i|` exceeded [`STEEP_GRADIENT`].
    pub steep: bool,
}

/// Build `V_i(x_i) = exp(-T_i(x_i))` with `T_i = omega_i^{-1}` from the
/// trajectory through `w`.
pub fn construct_from_trajectory<F: VectorField + ?Sized>(
    f: &F,
    w: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Construction, LyapError> {
    let n = f.dim();
    if w.len() != n {
        return Err(LyapError::DimensionMismatch {
            expected: n,
            found: w.len(),
        });
    }
    let fw = eval_field(f, w)?;
    if let Some((component, &value)) = fw.iter().enumerate().find(|(_, v)| !(**v < 0.0)) {
        return Err(LyapError::NotInOmega { component, value });
    }
    let full = integrate_ode(f, w, cfg)?;
    if !full.verdict.is_convergent() {
        return Err(LyapError::NoConvergence {
            terminal: full.final_state().to_vec(),
        });
    }

    let table_cfg = IntegratorConfig {
        t_end: cfg.t_end.min(CONSTRUCTION_HORIZON),
        max_step: Some(cfg.max_step.map_or(CONSTRUCTION_MAX_STEP, |h| h.min(CONSTRUCTION_MAX_STEP))),
        rtol: cfg.rtol.min(1e-10),
        atol: cfg.atol.min(1e-14),
        eta: cfg.eta.min(1e-12),
        ..*cfg
    };
    let sim = integrate_ode(f, w, &table_cfg)?;
    let traj = sim.trajectory;

    let mut components = Vec::with_capacity(n);
    let mut min_slope = Vec::with_capacity(n);
    let mut steep = false;
    for i in 0..n {
        let mut xs = Vec::new();
        let mut ts = Vec::new();
        let mut ds = Vec::new();
        for k in 0..traj.len() {
            let (t, xi, dxi) = (traj.times()[k], traj.state(k)[i], traj.derivative(k)[i]);
            if let Some(&prev) = xs.last() {
                if !(xi < prev) {
                    if xi > prev || dxi > 0.0 {
                        return Err(LyapError::NonmonotoneComponent { component: i, t });
                    }
                    // Stalled (underflow); the table ends here.
                    break;
                }
            }
            if !(dxi < 0.0) {
                if xi > 0.0 && k + 1 < traj.len() {
                    return Err(LyapError::NonmonotoneComponent { component: i, t });
                }
                break;
            }
            xs.push(xi);
            ts.push(t);
            ds.push(1.0 / dxi);
        }
        if xs.len() < 2 {
            return Err(LyapError::NonmonotoneComponent {
                component: i,
                t: traj.t_final(),
            });
        }
        xs.reverse();
        ts.reverse();
        ds.reverse();
        steep |= ds.iter().any(|d| d.abs() > STEEP_GRADIENT);
        let x_min = xs[0];
        let t_of_x = MonotoneCubic::with_slopes(xs, ts, ds)?;
        let comp = Component::Tabulated { t_of_x, x_min };
        let mut lowest = f64::INFINITY;
        for k in 1..=256 {
            let x = w[i] * k as f64 / 256.0;
            lowest = lowest.min(comp.slope(x)?);
        }
        min_slope.push(lowest);
        components.push(comp);
    }
    Ok(Construction {
        lyapunov: MaxSepLyap::new(components, w.to_vec())?,
        trajectory: traj,
        min_slope,
        steep,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::model::ExprField;

    fn planar() -> ExprField {
        ExprField::parse(&["-5*x1 + x1*x2^2", "x1 - 2*x2^2"]).unwrap()
    }

    fn v_planar() -> MaxSepLyap {
        MaxSepLyap::closed(vec![parse("s").unwrap(), parse("s^2").unwrap()], vec![4.0, 2.0]).unwrap()
    }

    #[test]
    fn dini_hand_values() {
        let v = v_planar();
        let f = planar();
        assert_eq!(v.active_set(&[1.0, 1.0]).unwrap(), vec![0, 1]);
        assert_eq!(dini_derivative(&v, &f, &[1.0, 1.0]).unwrap(), -2.0);
        assert_eq!(v.active_set(&[4.0, 1.0]).unwrap(), vec![0]);
        assert_eq!(dini_derivative(&v, &f, &[4.0, 1.0]).unwrap(), -16.0);
        assert_eq!(dini_derivative(&v, &f, &[0.0, 0.0]).unwrap(), 0.0);
    }

    #[test]
    fn example_one_decreases() {
        let b = BoxSet::new(vec![4.0, 2.0]).unwrap();
        let rep = verify_decrease(&v_planar(), &planar(), &b, 64, DEFAULT_MARGIN).unwrap();
        assert_eq!(rep.status, Status::Pass);
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.points, 64 * 64 - 1);
        assert!(rep.mu_hat.iter().flat_map(|b| b.mu).all(|m| m > 0.0));
    }

    #[test]
    fn zero_field_fails() {
        let b = BoxSet::new(vec![1.0, 1.0]).unwrap();
        let zero = ExprField::parse(&["0", "0"]).unwrap();
        let rep = verify_decrease(&MaxSepLyap::linear(&[1.0, 1.0]), &zero, &b, 5, DEFAULT_MARGIN)
            .unwrap();
        assert_eq!(rep.status, Status::Fail);
        assert_eq!(rep.violations, rep.points);
    }

    #[test]
    fn linear_lyapunov() {
        let f = ExprField::parse(&["-2*x1 + x2", "x1 - 2*x2"]).unwrap();
        let v = MaxSepLyap::linear(&[1.0, 1.0]);
        assert_eq!(dini_derivative(&v, &f, &[1.0, 1.0]).unwrap(), -1.0);
        let v2 = MaxSepLyap::linear(&[2.0, 1.0]);
        assert_eq!(v2.value(&[1.0, 0.25]).unwrap(), 0.5);
        assert_eq!(v2.value(&[0.0, 0.0]).unwrap(), 0.0);
        assert_eq!(v2.component_inverse(0, 0.5).unwrap(), 1.0);
    }

    #[test]
    fn inverse_path_component() {
        let c = Component::inverse_path(parse("sqrt(s)").unwrap(), 4.0).unwrap();
        for x in [0.0, 0.3, 1.0, 2.0] {
            assert!((c.value(x).unwrap() - x * x).abs() < 1e-12);
            assert!((c.slope(x).unwrap() - 2.0 * x).abs() < 1e-9);
        }
        assert_eq!(c.inverse(4.0).unwrap(), 2.0);
        let closed = Component::closed(parse("s^2").unwrap()).unwrap();
        assert!((closed.inverse(4.0).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn scalar_linear_construction_is_identity() {
        let f = ExprField::parse(&["-x1"]).unwrap();
        let c = construct_from_trajectory(&f, &[1.0], &IntegratorConfig::default()).unwrap();
        let v = &c.lyapunov;
        for x in [0.05, 0.2, 0.5, 0.9, 1.0] {
            assert!((v.value(&[x]).unwrap() - x).abs() < 1e-6, "{x}");
        }
        assert!(c.min_slope[0] > 0.0);
    }

    #[test]
    fn stalled_scalar_does_not_converge() {
        let f = ExprField::parse(&["-x1*(x1-1)"]).unwrap();
        assert!(matches!(
            construct_from_trajectory(&f, &[2.0], &IntegratorConfig::default()),
            Err(LyapError::NoConvergence { .. })
        ));
        assert!(matches!(
            construct_from_trajectory(&f, &[0.5], &IntegratorConfig::default()),
            Err(LyapError::NotInOmega { .. })
        ));
    }
}
