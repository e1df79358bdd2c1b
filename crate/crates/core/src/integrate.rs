//! Adaptive Dormand–Prince 5(4) integration of ODEs and of retarded DDEs by
//! the method of steps.
//!
//! Both integrators keep every accepted step together with the derivative at
//! that node and the coefficients of the method's 4th-order continuous
//! extension, so the returned [`Trajectory`] doubles as dense output. The DDE
//! integrator reads retarded arguments from the initial
//! history, from that dense output, or (when the retarded time falls inside
//! the step being taken) from a linear blend of the step's start and the
//! current stage.
//!
//! Derivative discontinuities propagated by the history are not tracked;
//! step control absorbs them.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::expr::EvalError;
use crate::max_norm;
use crate::model::{DelayAssignment, DelayField, InitialHistory, ModelError, VectorField};

/// Lags shorter than this do not cap the DDE step.
pub const MIN_CAPPING_LAG: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IntegrateError {
    #[error("step size underflow at t = {t} (h = {h}); the problem may be stiff")]
    StepSizeUnderflow { t: f64, h: f64 },
    #[error("non-finite state at t = {t}")]
    NonFiniteState { t: f64 },
    #[error("step limit of {limit} exceeded at t = {t}")]
    StepLimit { t: f64, limit: usize },
    #[error("initial state has {found} components, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("initial state is not in the nonnegative orthant")]
    NegativeInitialState,
    #[error("invalid integrator configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("history gap at t = {t}")]
    HistoryGap { t: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(ModelError),
}

impl From<ModelError> for IntegrateError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::HistoryGap { t } => IntegrateError::HistoryGap { t },
            ModelError::Eval(e) => IntegrateError::Eval(e),
            other => IntegrateError::Model(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step; `None` means the horizon.
    pub max_step: Option<f64>,
    pub t_end: f64,
    /// Convergence threshold on the max-norm.
    pub eta: f64,
    /// Minimum length of the trailing window over which `|x| < eta` must hold.
    pub stall_window: f64,
    /// Clamp components that land in `[-tol_pos, 0)` to zero.
    pub clamp_nonnegative: bool,
    pub tol_pos: f64,
    /// Stop when the max-norm exceeds this bound.
    pub divergence_bound: f64,
    pub max_steps: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig {
            rtol: 1e-8,
            atol: 1e-10,
            max_step: None,
            t_end: 200.0,
            eta: 1e-6,
            stall_window: 1.0,
            clamp_nonnegative: true,
            tol_pos: 1e-9,
            divergence_bound: 1e12,
            max_steps: 5_000_000,
        }
    }
}

impl IntegratorConfig {
    pub fn with_horizon(t_end: f64) -> Self {
        IntegratorConfig {
            t_end,
            ..Self::default()
        }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(IntegrateError::InvalidConfig("tolerances must be positive"));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(IntegrateError::InvalidConfig("horizon must be positive and finite"));
        }
        if matches!(self.max_step, Some(h) if !(h > 0.0)) {
            return Err(IntegrateError::InvalidConfig("max step must be positive"));
        }
        if !(self.eta > 0.0) || !(self.stall_window >= 0.0) || !(self.tol_pos >= 0.0) {
            return Err(IntegrateError::InvalidConfig("eta, window and tol_pos must be >= 0"));
        }
        Ok(())
    }
}

/// Accepted steps with node derivatives and per-step dense-output
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    dim: usize,
    times: Vec<f64>,
    states: Vec<f64>,
    derivs: Vec<f64>,
    /// Three coefficient vectors per step (`3 * dim` entries each).
    dense: Vec<f64>,
}

impl Trajectory {
    fn new(dim: usize) -> Self {
        Trajectory {
            dim,
            times: Vec::new(),
            states: Vec::new(),
            derivs: Vec::new(),
            dense: Vec::new(),
        }
    }

    fn push(&mut self, t: f64, x: &[f64], dx: &[f64]) {
        self.times.push(t);
        self.states.extend_from_slice(x);
        self.derivs.extend_from_slice(dx);
    }

    fn push_step(&mut self, t: f64, x: &[f64], dx: &[f64], coeffs: &[f64]) {
        self.push(t, x, dx);
        self.dense.extend_from_slice(coeffs);
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn state(&self, k: usize) -> &[f64] {
        &self.states[k * self.dim..(k + 1) * self.dim]
    }

    pub fn derivative(&self, k: usize) -> &[f64] {
        &self.derivs[k * self.dim..(k + 1) * self.dim]
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_final(&self) -> f64 {
        self.times[self.times.len() - 1]
    }

    pub fn final_state(&self) -> &[f64] {
        self.state(self.len() - 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.times
            .iter()
            .zip(self.states.chunks_exact(self.dim.max(1)))
            .map(|(t, x)| (*t, x))
    }

    /// Dense output at `t`; `None` outside the integrated interval.
    pub fn sample(&self, t: f64, out: &mut [f64]) -> Option<()> {
        let (t0, t1) = (self.t_start(), self.t_final());
        if !(t >= t0 && t <= t1) {
            return None;
        }
        let k = self.times.partition_point(|&s| s <= t);
        if k == 0 {
            out.copy_from_slice(self.state(0));
            return Some(());
        }
        if k == self.len() {
            out.copy_from_slice(self.final_state());
            return Some(());
        }
        let (ta, tb) = (self.times[k - 1], self.times[k]);
        let (xa, xb) = (self.state(k - 1), self.state(k));
        let n = self.dim;
        let r = &self.dense[3 * n * (k - 1)..3 * n * k];
        let theta = if tb > ta { (t - ta) / (tb - ta) } else { 1.0 };
        let theta1 = 1.0 - theta;
        for i in 0..n {
            let (r3, r4, r5) = (r[i], r[n + i], r[2 * n + i]);
            out[i] = xa[i] + theta * ((xb[i] - xa[i]) + theta1 * (r3 + theta * (r4 + theta1 * r5)));
        }
        Some(())
    }

    pub fn sample_vec(&self, t: f64) -> Option<Vec<f64>> {
        let mut out = vec![0.0; self.dim];
        self.sample(t, &mut out).map(|_| out)
    }

    /// Largest max-norm over the stored states.
    pub fn max_excursion(&self) -> f64 {
        self.iter().map(|(_, x)| max_norm(x)).fold(0.0, f64::max)
    }

    /// Largest `x_i - upper_i` over the stored states.
    pub fn max_overshoot(&self, upper: &[f64]) -> f64 {
        self.iter()
            .flat_map(|(_, x)| x.iter().zip(upper).map(|(a, b)| a - b))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Smallest stored component.
    pub fn min_component(&self) -> f64 {
        self.states.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// How a run ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Verdict {
    /// `|x| < eta` held for the whole trailing window; `t_converge` is where
    /// that stretch began.
    Converged { t_converge: f64 },
    /// Horizon reached with `|x(T)| <= 0.9 |x(T/2)|`.
    Decaying,
    /// Horizon reached without evidence of decay to the origin.
    NotConverged,
    /// Max-norm exceeded the divergence bound.
    Diverged { t: f64 },
}

impl Verdict {
    /// Converged or still decaying at the horizon.
    pub fn is_convergent(self) -> bool {
        matches!(self, Verdict::Converged { .. } | Verdict::Decaying)
    }

    pub fn t_converge(self) -> Option<f64> {
        match self {
            Verdict::Converged { t_converge } => Some(t_converge),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Converged { .. } => "converged",
            Verdict::Decaying => "decaying",
            Verdict::NotConverged => "not-converged",
            Verdict::Diverged { .. } => "diverged",
        }
    }
}

/// Ratio `|x(T)| / |x(T/2)|` below which a run counts as decaying.
pub const DECAY_RATIO: f64 = 0.9;

#[derive(Debug, Clone, PartialEq)]
pub struct Simulation {
    pub trajectory: Trajectory,
    pub verdict: Verdict,
    pub terminal_norm: f64,
    pub max_excursion: f64,
    /// Most negative component seen before clamping (0 if none).
    pub worst_undershoot: f64,
    pub accepted_steps: usize,
    pub rejected_steps: usize,
}

impl Simulation {
    pub fn final_state(&self) -> &[f64] {
        self.trajectory.final_state()
    }
}

// Dormand–Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Continuous extension weights (stage 2 has none).
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

/// Right-hand side seen by the stepper. `front` is the last accepted node.
trait Rhs {
    fn dim(&self) -> usize;
    fn eval(
        &self,
        traj: &Trajectory,
        t: f64,
        x: &[f64],
        front: (f64, &[f64]),
        out: &mut [f64],
    ) -> Result<(), IntegrateError>;
    /// Step cap at `t` (lag for delayed problems).
    fn step_cap(&self, _t: f64) -> f64 {
        f64::INFINITY
    }
}

struct OdeRhs<'a, F: ?Sized>(&'a F);

impl<F: VectorField + ?Sized> Rhs for OdeRhs<'_, F> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(
        &self,
        _traj: &Trajectory,
        _t: f64,
        x: &[f64],
        _front: (f64, &[f64]),
        out: &mut [f64],
    ) -> Result<(), IntegrateError> {
        Ok(self.0.eval(x, out)?)
    }
}

struct DdeRhs<'a> {
    field: &'a DelayField,
    history: &'a InitialHistory,
}

impl DdeRhs<'_> {
    /// State at the retarded time `theta` for a stage at `(t, x)`.
    fn retarded(
        &self,
        traj: &Trajectory,
        theta: f64,
        t: f64,
        x: &[f64],
        front: (f64, &[f64]),
        out: &mut [f64],
    ) -> Result<(), IntegrateError> {
        if theta <= 0.0 {
            self.history.eval(theta, out)?;
            return Ok(());
        }
        let (tf, xf) = front;
        if theta <= tf {
            return traj
                .sample(theta, out)
                .ok_or(IntegrateError::HistoryGap { t: theta });
        }
        // Inside the current step: blend the front and the stage state.
        let w = if t > tf { ((theta - tf) / (t - tf)).clamp(0.0, 1.0) } else { 1.0 };
        for i in 0..out.len() {
            out[i] = xf[i] * (1.0 - w) + x[i] * w;
        }
        Ok(())
    }
}

impl Rhs for DdeRhs<'_> {
    fn dim(&self) -> usize {
        self.field.dim()
    }

    fn eval(
        &self,
        traj: &Trajectory,
        t: f64,
        x: &[f64],
        front: (f64, &[f64]),
        out: &mut [f64],
    ) -> Result<(), IntegrateError> {
        let n = self.dim();
        let map = self.field.map();
        let mut y = vec![0.0; n];
        match self.field.delays() {
            DelayAssignment::Shared(law) => {
                let theta = t - law.eval(t)?;
                self.retarded(traj, theta, t, x, front, &mut y)?;
                map.eval(x, &y, out)?;
            }
            DelayAssignment::PerPair(laws) => {
                let mut buf = vec![0.0; n];
                for i in 0..n {
                    for j in 0..n {
                        let theta = t - laws[i * n + j].eval(t)?;
                        self.retarded(traj, theta, t, x, front, &mut buf)?;
                        y[j] = buf[j];
                    }
                    out[i] = map.eval_component(i, x, &y)?;
                }
            }
        }
        Ok(())
    }

    fn step_cap(&self, t: f64) -> f64 {
        let mut cap = f64::INFINITY;
        for law in self.field.delays().laws() {
            if let Ok(tau) = law.eval(t) {
                if tau >= MIN_CAPPING_LAG {
                    cap = cap.min(tau);
                }
            }
        }
        cap
    }
}

/// Integrate `x' = f(x)` from `x0` over `[0, cfg.t_end]`.
pub fn integrate_ode<F: VectorField + ?Sized>(
    f: &F,
    x0: &[f64],
    cfg: &IntegratorConfig,
) -> Result<Simulation, IntegrateError> {
    if x0.len() != f.dim() {
        return Err(IntegrateError::DimensionMismatch {
            expected: f.dim(),
            found: x0.len(),
        });
    }
    if cfg.clamp_nonnegative && x0.iter().any(|v| !(*v >= 0.0)) {
        return Err(IntegrateError::NegativeInitialState);
    }
    run(&OdeRhs(f), x0, cfg, cfg.stall_window)
}

/// Integrate `x'(t) = g(x(t), x(t - tau(t)))` with history `phi` on
/// `[-tau_max, 0]`.
pub fn integrate_dde(
    g: &DelayField,
    phi: &InitialHistory,
    cfg: &IntegratorConfig,
) -> Result<Simulation, IntegrateError> {
    if phi.dim() != g.dim() {
        return Err(IntegrateError::DimensionMismatch {
            expected: g.dim(),
            found: phi.dim(),
        });
    }
    phi.validate(g.tau_max())?;
    let mut x0 = vec![0.0; g.dim()];
    phi.eval(0.0, &mut x0)?;
    let mut tau_end = 0.0_f64;
    for law in g.delays().laws() {
        tau_end = tau_end.max(law.eval(cfg.t_end)?);
    }
    let window = cfg.stall_window.max(1.0).max(tau_end);
    run(&DdeRhs { field: g, history: phi }, &x0, cfg, window)
}

fn error_norm(err: &[f64], x0: &[f64], x1: &[f64], cfg: &IntegratorConfig) -> f64 {
    let n = err.len().max(1) as f64;
    let sum: f64 = err
        .iter()
        .zip(x0.iter().zip(x1))
        .map(|(e, (a, b))| {
            let sc = cfg.atol + cfg.rtol * a.abs().max(b.abs());
            (e / sc) * (e / sc)
        })
        .sum();
    (sum / n).sqrt()
}

fn run<R: Rhs>(
    rhs: &R,
    x0: &[f64],
    cfg: &IntegratorConfig,
    window: f64,
) -> Result<Simulation, IntegrateError> {
    cfg.validate()?;
    let n = rhs.dim();
    let t_end = cfg.t_end;
    let h_max = cfg.max_step.unwrap_or(t_end).min(t_end);

    let mut traj = Trajectory::new(n);
    let mut x = x0.to_vec();
    let mut t = 0.0;
    let mut k: Vec<Vec<f64>> = vec![vec![0.0; n]; 7];
    let mut stage = vec![0.0; n];
    let mut k_out = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    let mut err = vec![0.0; n];
    let mut coeffs = vec![0.0; 3 * n];

    rhs.eval(&traj, t, &x, (t, &x), &mut k[0])?;
    traj.push(t, &x, &k[0]);

    let mut h = initial_step(rhs, &traj, &x, &k[0], cfg, h_max)?;
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    let mut worst_undershoot = 0.0_f64;
    let mut max_excursion = max_norm(&x);
    let mut below_since: Option<f64> = (max_norm(&x) < cfg.eta).then_some(0.0);
    let mut verdict = None;

    while t < t_end {
        if accepted + rejected >= cfg.max_steps {
            return Err(IntegrateError::StepLimit {
                t,
                limit: cfg.max_steps,
            });
        }
        let cap = rhs.step_cap(t);
        h = h.min(h_max).min(cap);
        let last = t + h >= t_end * (1.0 - 1e-14);
        if last {
            h = t_end - t;
        }
        let h_floor = 1e-14 * t.abs().max(1.0);
        if h < h_floor {
            return Err(IntegrateError::StepSizeUnderflow { t, h });
        }

        for s in 1..7 {
            for i in 0..n {
                let mut acc = 0.0;
                for (j, kj) in k.iter().enumerate().take(s) {
                    acc += A[s][j] * kj[i];
                }
                stage[i] = x[i] + h * acc;
            }
            rhs.eval(&traj, t + C[s] * h, &stage, (t, &x), &mut k_out)?;
            k[s].copy_from_slice(&k_out);
        }
        // Stage 7 is evaluated at the 5th-order solution (FSAL).
        x_new.copy_from_slice(&stage);
        for i in 0..n {
            let mut e = 0.0;
            for (j, kj) in k.iter().enumerate() {
                e += E[j] * kj[i];
            }
            err[i] = h * e;
        }

        let finite = x_new.iter().all(|v| v.is_finite()) && err.iter().all(|v| v.is_finite());
        let en = if finite {
            error_norm(&err, &x, &x_new, cfg)
        } else {
            f64::INFINITY
        };

        if en <= 1.0 {
            let mut clamped = false;
            for v in x_new.iter_mut() {
                if *v < 0.0 {
                    worst_undershoot = worst_undershoot.min(*v);
                    if cfg.clamp_nonnegative && *v >= -cfg.tol_pos {
                        *v = 0.0;
                        clamped = true;
                    }
                }
            }
            let t_new = if last { t_end } else { t + h };
            if clamped {
                rhs.eval(&traj, t_new, &x_new, (t, &x), &mut k_out)?;
                k[6].copy_from_slice(&k_out);
            }
            let hs = t_new - t;
            for i in 0..n {
                let ydiff = x_new[i] - x[i];
                let bspl = hs * k[0][i] - ydiff;
                let mut d = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    d += D[j] * kj[i];
                }
                coeffs[i] = bspl;
                coeffs[n + i] = ydiff - hs * k[6][i] - bspl;
                coeffs[2 * n + i] = hs * d;
            }
            traj.push_step(t_new, &x_new, &k[6], &coeffs);
            t = t_new;
            x.copy_from_slice(&x_new);
            k.swap(0, 6);
            accepted += 1;

            let norm = max_norm(&x);
            max_excursion = max_excursion.max(norm);
            if norm > cfg.divergence_bound {
                verdict = Some(Verdict::Diverged { t });
                break;
            }
            if norm < cfg.eta {
                let since = *below_since.get_or_insert(t);
                if t - since >= window {
                    verdict = Some(Verdict::Converged { t_converge: since });
                    break;
                }
            } else {
                below_since = None;
            }

            let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
            h *= fac;
        } else {
            rejected += 1;
            if !finite && h * 0.2 < h_floor {
                return Err(IntegrateError::NonFiniteState { t: t + h });
            }
            let fac = if finite { (0.9 * en.powf(-0.2)).clamp(0.2, 1.0) } else { 0.2 };
            h *= fac;
        }
    }

    let terminal_norm = max_norm(traj.final_state());
    let verdict = verdict.unwrap_or_else(|| {
        if let Some(since) = below_since {
            if t - since >= window {
                return Verdict::Converged { t_converge: since };
            }
        }
        let mid = traj
            .sample_vec(0.5 * traj.t_final())
            .map(|v| max_norm(&v))
            .unwrap_or(f64::INFINITY);
        if terminal_norm < cfg.eta || terminal_norm <= DECAY_RATIO * mid {
            Verdict::Decaying
        } else {
            Verdict::NotConverged
        }
    });
    Ok(Simulation {
        trajectory: traj,
        verdict,
        terminal_norm,
        max_excursion,
        worst_undershoot,
        accepted_steps: accepted,
        rejected_steps: rejected,
    })
}

/// Hairer–Wanner starting step.
fn initial_step<R: Rhs>(
    rhs: &R,
    traj: &Trajectory,
    x: &[f64],
    f0: &[f64],
    cfg: &IntegratorConfig,
    h_max: f64,
) -> Result<f64, IntegrateError> {
    let n = x.len();
    let scale = |i: usize| cfg.atol + cfg.rtol * x[i].abs();
    let rms = |v: &dyn Fn(usize) -> f64| {
        ((0..n).map(|i| v(i) * v(i)).sum::<f64>() / n.max(1) as f64).sqrt()
    };
    let d0 = rms(&|i| x[i] / scale(i));
    let d1 = rms(&|i| f0[i] / scale(i));
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(h_max).min(rhs.step_cap(0.0));
    let x1: Vec<f64> = (0..n).map(|i| x[i] + h0 * f0[i]).collect();
    let mut f1 = vec![0.0; n];
    rhs.eval(traj, h0, &x1, (0.0, x), &mut f1)?;
    let d2 = rms(&|i| (f1[i] - f0[i]) / scale(i)) / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    Ok((100.0 * h0).min(h1).min(h_max).max(1e-12))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{ExprSystem, VariableRoles};
    use crate::model::{DelayLaw, ExprField, FnField};
    use alloc::sync::Arc;

    #[test]
    fn exponential_decay_matches_closed_form() {
        let f = ExprField::parse(&["-x1"]).unwrap();
        let cfg = IntegratorConfig::with_horizon(5.0);
        let sim = integrate_ode(&f, &[1.0], &cfg).unwrap();
        let exact = (-5.0_f64).exp();
        assert!((sim.final_state()[0] - exact).abs() < 1e-8);
        let mid = sim.trajectory.sample_vec(2.345).unwrap()[0];
        assert!((mid - (-2.345_f64).exp()).abs() < 1e-7);
        assert_eq!(sim.trajectory.t_final(), 5.0);
    }

    #[test]
    fn harmonic_oscillator_unclamped() {
        let f = FnField::new(2, |x: &[f64], out: &mut [f64]| {
            out[0] = x[1];
            out[1] = -x[0];
            Ok(())
        });
        let cfg = IntegratorConfig {
            clamp_nonnegative: false,
            ..IntegratorConfig::with_horizon(10.0)
        };
        let sim = integrate_ode(&f, &[1.0, 0.0], &cfg).unwrap();
        let x = sim.final_state();
        assert!((x[0] - 10.0_f64.cos()).abs() < 1e-7);
        assert!((x[1] + 10.0_f64.sin()).abs() < 1e-7);
    }

    #[test]
    fn zero_initial_state_stays_zero() {
        let f = ExprField::parse(&["-5*x1 + x1*x2^2", "x1 - 2*x2^2"]).unwrap();
        let sim = integrate_ode(&f, &[0.0, 0.0], &IntegratorConfig::default()).unwrap();
        assert!(sim.trajectory.iter().all(|(_, x)| x == [0.0, 0.0]));
        assert_eq!(sim.verdict, Verdict::Converged { t_converge: 0.0 });
    }

    #[test]
    fn stalled_scalar_goes_to_one() {
        let f = ExprField::parse(&["-x1*(x1-1)"]).unwrap();
        let sim = integrate_ode(&f, &[2.0], &IntegratorConfig::default()).unwrap();
        assert!((sim.final_state()[0] - 1.0).abs() < 1e-6);
        assert_eq!(sim.verdict, Verdict::NotConverged);
    }

    #[test]
    fn blowup_is_reported() {
        let f = ExprField::parse(&["x1^2"]).unwrap();
        let sim = integrate_ode(&f, &[1.0], &IntegratorConfig::with_horizon(2.0));
        match sim {
            Ok(s) => assert!(matches!(s.verdict, Verdict::Diverged { .. })),
            Err(e) => assert!(matches!(e, IntegrateError::StepSizeUnderflow { .. })),
        }
    }

    #[test]
    fn config_validation() {
        let bad = IntegratorConfig {
            rtol: 0.0,
            ..IntegratorConfig::default()
        };
        let f = ExprField::parse(&["-x1"]).unwrap();
        assert!(matches!(
            integrate_ode(&f, &[1.0], &bad),
            Err(IntegrateError::InvalidConfig(_))
        ));
        assert!(matches!(
            integrate_ode(&f, &[-1.0], &IntegratorConfig::default()),
            Err(IntegrateError::NegativeInitialState)
        ));
    }

    #[test]
    fn constant_delay_linear_dde_matches_steps_solution() {
        // x' = -y, tau = 1, phi = 1: on [0,1] x = 1 - t, on [1,2]
        // x = 1 - t + (t-1)^2/2.
        let sys = ExprSystem::parse(1, &["-y1"], VariableRoles::StateAndDelayed).unwrap();
        let g = DelayField::from_system(&sys, DelayLaw::Constant(1.0)).unwrap();
        let cfg = IntegratorConfig {
            clamp_nonnegative: false,
            ..IntegratorConfig::with_horizon(2.0)
        };
        let sim = integrate_dde(&g, &InitialHistory::Constant(vec![1.0]), &cfg).unwrap();
        let x = |t: f64| sim.trajectory.sample_vec(t).unwrap()[0];
        assert!((x(0.5) - 0.5).abs() < 1e-9);
        assert!((x(1.5) - (1.0 - 1.5 + 0.125)).abs() < 1e-8);
        assert!((x(2.0) - (1.0 - 2.0 + 0.5)).abs() < 1e-8);
    }

    #[test]
    fn zero_delay_reduces_to_ode() {
        let sys = ExprSystem::parse(
            2,
            &["-5*x1 + x1*y2^2", "y1 - 2*x2^2"],
            VariableRoles::StateAndDelayed,
        )
        .unwrap();
        let g = DelayField::from_system(&sys, DelayLaw::zero()).unwrap();
        let cfg = IntegratorConfig::with_horizon(20.0);
        let dde = integrate_dde(&g, &InitialHistory::Constant(vec![4.0, 2.0]), &cfg).unwrap();
        let ode = integrate_ode(&g.induced(), &[4.0, 2.0], &cfg).unwrap();
        for (t, x) in dde.trajectory.iter() {
            let y = ode.trajectory.sample_vec(t).unwrap();
            assert!(max_norm(&[x[0] - y[0], x[1] - y[1]]) < 1e-7);
        }
    }

    #[test]
    fn per_pair_delays() {
        let sys = ExprSystem::parse(
            2,
            &["-x1 + 0.5*y2", "-x2 + 0.5*y1"],
            VariableRoles::StateAndDelayed,
        )
        .unwrap();
        let map = Arc::new(crate::model::ExprDelayMap::new(&sys).unwrap());
        let laws = vec![
            DelayLaw::zero(),
            DelayLaw::Constant(1.0),
            DelayLaw::Constant(2.0),
            DelayLaw::zero(),
        ];
        let g = DelayField::new(map, DelayAssignment::PerPair(laws)).unwrap();
        assert_eq!(g.tau_max(), 2.0);
        let sim = integrate_dde(
            &g,
            &InitialHistory::Constant(vec![1.0, 1.0]),
            &IntegratorConfig::with_horizon(60.0),
        )
        .unwrap();
        assert!(sim.terminal_norm < 1e-6);
    }
}
