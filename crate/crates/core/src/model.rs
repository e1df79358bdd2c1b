//! Evaluable systems, boxes, paths, scalings, delay laws and histories.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::expr::{
    self, Env, EvalError, Expr, ExprSystem, ParseError, SystemError, Var, VariableRoles,
};

/// Tolerance for the origin-equilibrium check `f(0) = 0`.
pub const ORIGIN_TOL: f64 = 1e-12;
/// Margin used for sampled strict-monotonicity checks.
pub const STRICT_MARGIN: f64 = 1e-12;
/// Default number of samples for dense validation grids.
pub const DENSE_GRID: usize = 1024;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("origin is not an equilibrium: component {component} evaluates to {value}")]
    OriginNotEquilibrium { component: usize, value: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("system uses delayed variables where only state variables are allowed")]
    UnexpectedDelayedVariables,
    #[error("delay law violates t - tau(t) -> +inf: {0}")]
    Assumption1Violated(String),
    #[error("delay is negative at t = {t}: tau = {value}")]
    NegativeDelay { t: f64, value: f64 },
    #[error("invalid delay law: {0}")]
    InvalidLaw(String),
    #[error("initial history is not defined at t = {t}")]
    HistoryGap { t: f64 },
    #[error("initial history is negative at t = {t} (component {component}: {value})")]
    NegativeHistory { t: f64, component: usize, value: f64 },
    #[error("invalid box: {0}")]
    InvalidBox(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    System(#[from] SystemError),
    #[error(transparent)]
    Psi(#[from] PsiError),
}

// ---------------------------------------------------------------------------
// Vector fields

/// An evaluable map `f: R^n_+ -> R^n`.
pub trait VectorField: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError>;

    /// Analytic Jacobian, row-major `n x n`, when the field provides one.
    fn jacobian(&self, _x: &[f64], _jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        None
    }

    /// False when the field contains nonsmooth primitives.
    fn is_smooth(&self) -> bool {
        true
    }
}

impl<F: VectorField + ?Sized> VectorField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (**self).eval(x, out)
    }
    fn jacobian(&self, x: &[f64], jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        (**self).jacobian(x, jac)
    }
    fn is_smooth(&self) -> bool {
        (**self).is_smooth()
    }
}

impl<F: VectorField + ?Sized> VectorField for Box<F> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (**self).eval(x, out)
    }
    fn jacobian(&self, x: &[f64], jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        (**self).jacobian(x, jac)
    }
    fn is_smooth(&self) -> bool {
        (**self).is_smooth()
    }
}

/// Evaluate `f(x)` into a fresh vector.
pub fn eval_field<F: VectorField + ?Sized>(f: &F, x: &[f64]) -> Result<Vec<f64>, EvalError> {
    let mut out = vec![0.0; f.dim()];
    f.eval(x, &mut out)?;
    Ok(out)
}

/// Vector field given by parsed expressions in `x1..xn`.
#[derive(Debug, Clone)]
pub struct ExprField {
    components: Vec<Expr>,
    jacobian: Option<Vec<Expr>>,
}

impl ExprField {
    /// Bind a state-only system, checking that the origin is an equilibrium.
    pub fn new(sys: &ExprSystem) -> Result<Self, ModelError> {
        if sys.roles() != VariableRoles::State
            && sys
                .components()
                .iter()
                .any(|e| (0..sys.dim()).any(|i| e.mentions(Var::Y(i))))
        {
            return Err(ModelError::UnexpectedDelayedVariables);
        }
        let field = Self::from_exprs_unchecked(sys.components().to_vec());
        let zero = vec![0.0; sys.dim()];
        let f0 = eval_field(&field, &zero)?;
        check_origin(&f0)?;
        Ok(field)
    }

    /// Parse and bind `sources` as a state-only system.
    pub fn parse<S: AsRef<str>>(sources: &[S]) -> Result<Self, ModelError> {
        let sys = ExprSystem::parse(sources.len(), sources, VariableRoles::State)?;
        Self::new(&sys)
    }

    pub(crate) fn from_exprs_unchecked(components: Vec<Expr>) -> Self {
        let n = components.len();
        let jacobian = components
            .iter()
            .flat_map(|e| (0..n).map(move |j| e.differentiate(Var::X(j))))
            .collect::<Result<Vec<_>, _>>()
            .ok();
        ExprField {
            components,
            jacobian,
        }
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn has_symbolic_jacobian(&self) -> bool {
        self.jacobian.is_some()
    }
}

fn check_origin(f0: &[f64]) -> Result<(), ModelError> {
    for (component, &value) in f0.iter().enumerate() {
        if value.abs() > ORIGIN_TOL {
            return Err(ModelError::OriginNotEquilibrium { component, value });
        }
    }
    Ok(())
}

impl VectorField for ExprField {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let env = Env::state(x);
        for (o, e) in out.iter_mut().zip(&self.components) {
            *o = e.eval(&env)?;
        }
        Ok(())
    }

    fn jacobian(&self, x: &[f64], jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        let entries = self.jacobian.as_ref()?;
        let env = Env::state(x);
        Some((|| {
            for (o, e) in jac.iter_mut().zip(entries) {
                *o = e.eval(&env)?;
            }
            Ok(())
        })())
    }

    fn is_smooth(&self) -> bool {
        self.components.iter().all(Expr::is_smooth)
    }
}

/// A field given by a closure; handy for composing fields in code.
pub struct FnField<F> {
    dim: usize,
    f: F,
}

impl<F> FnField<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync,
{
    pub fn new(dim: usize, f: F) -> Self {
        FnField { dim, f }
    }
}

impl<F> VectorField for FnField<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<(), EvalError> + Send + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        (self.f)(x, out)
    }
}

// ---------------------------------------------------------------------------
// Delay fields

/// An evaluable map `g(x, y)` where `y` is the delayed state.
pub trait DelayMap: Send + Sync {
    fn dim(&self) -> usize;

    fn eval_component(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64, EvalError>;

    fn eval(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.eval_component(i, x, y)?;
        }
        Ok(())
    }

    /// `dg/dx`, row-major, when available.
    fn jacobian_x(&self, _x: &[f64], _y: &[f64], _jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        None
    }

    /// `dg/dy`, row-major, when available.
    fn jacobian_y(&self, _x: &[f64], _y: &[f64], _jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        None
    }

    fn is_smooth(&self) -> bool {
        true
    }
}

/// Delay map given by expressions in `x1..xn, y1..yn`.
#[derive(Debug, Clone)]
pub struct ExprDelayMap {
    components: Vec<Expr>,
    jac_x: Option<Vec<Expr>>,
    jac_y: Option<Vec<Expr>>,
}

impl ExprDelayMap {
    pub fn new(sys: &ExprSystem) -> Result<Self, ModelError> {
        let components = sys.components().to_vec();
        let n = components.len();
        let jac = |mk: fn(usize) -> Var| {
            components
                .iter()
                .flat_map(|e| (0..n).map(move |j| e.differentiate(mk(j))))
                .collect::<Result<Vec<_>, _>>()
                .ok()
        };
        let map = ExprDelayMap {
            jac_x: jac(Var::X),
            jac_y: jac(Var::Y),
            components,
        };
        let zero = vec![0.0; n];
        let mut g0 = vec![0.0; n];
        map.eval(&zero, &zero, &mut g0)?;
        check_origin(&g0)?;
        Ok(map)
    }

    pub fn parse<S: AsRef<str>>(sources: &[S]) -> Result<Self, ModelError> {
        let sys = ExprSystem::parse(sources.len(), sources, VariableRoles::StateAndDelayed)?;
        Self::new(&sys)
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    /// The delay-free field `f(x) = g(x, x)` as expressions.
    pub fn induced_field(&self) -> ExprField {
        let comps = self
            .components
            .iter()
            .map(|e| {
                e.substitute(&|v| match v {
                    Var::Y(i) => Some(Expr::Var(Var::X(i))),
                    _ => None,
                })
            })
            .collect();
        ExprField::from_exprs_unchecked(comps)
    }
}

fn eval_entries(entries: &[Expr], env: &Env<'_>, out: &mut [f64]) -> Result<(), EvalError> {
    for (o, e) in out.iter_mut().zip(entries) {
        *o = e.eval(env)?;
    }
    Ok(())
}

impl DelayMap for ExprDelayMap {
    fn dim(&self) -> usize {
        self.components.len()
    }

    fn eval_component(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        self.components[i].eval(&Env::delayed(x, y))
    }

    fn jacobian_x(&self, x: &[f64], y: &[f64], jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        let entries = self.jac_x.as_ref()?;
        Some(eval_entries(entries, &Env::delayed(x, y), jac))
    }

    fn jacobian_y(&self, x: &[f64], y: &[f64], jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        let entries = self.jac_y.as_ref()?;
        Some(eval_entries(entries, &Env::delayed(x, y), jac))
    }

    fn is_smooth(&self) -> bool {
        self.components.iter().all(Expr::is_smooth)
    }
}

/// `f(x) := g(x, x)` for an arbitrary delay map.
#[derive(Clone)]
pub struct InducedField {
    map: Arc<dyn DelayMap>,
}

impl InducedField {
    pub fn new(map: Arc<dyn DelayMap>) -> Self {
        InducedField { map }
    }
}

impl VectorField for InducedField {
    fn dim(&self) -> usize {
        self.map.dim()
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        self.map.eval(x, x, out)
    }

    fn jacobian(&self, x: &[f64], jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        let mut jy = vec![0.0; jac.len()];
        match (self.map.jacobian_x(x, x, jac), self.map.jacobian_y(x, x, &mut jy)) {
            (Some(Ok(())), Some(Ok(()))) => {
                jac.iter_mut().zip(&jy).for_each(|(a, b)| *a += b);
                Some(Ok(()))
            }
            (Some(Err(e)), _) | (_, Some(Err(e))) => Some(Err(e)),
            _ => None,
        }
    }

    fn is_smooth(&self) -> bool {
        self.map.is_smooth()
    }
}

// ---------------------------------------------------------------------------
// Delay laws

/// Horizon and sample count for the empirical `t - tau(t) -> inf` check.
#[derive(Debug, Clone, Copy)]
pub struct LawCheck {
    pub horizon: f64,
    pub samples: usize,
}

impl Default for LawCheck {
    fn default() -> Self {
        LawCheck {
            horizon: 1e4,
            samples: 100_000,
        }
    }
}

/// A time-varying delay `tau(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayLaw {
    Constant(f64),
    /// `a + b sin(omega t)` with `a >= b >= 0`.
    Sinusoid { a: f64, b: f64, omega: f64 },
    /// `gamma t` with `0 <= gamma < 1`.
    Proportional(f64),
    /// Expression in `t`.
    Expr(Expr),
}

impl DelayLaw {
    pub fn zero() -> Self {
        DelayLaw::Constant(0.0)
    }

    pub fn eval(&self, t: f64) -> Result<f64, EvalError> {
        Ok(match self {
            DelayLaw::Constant(c) => *c,
            DelayLaw::Sinusoid { a, b, omega } => a + b * (omega * t).sin(),
            DelayLaw::Proportional(g) => g * t,
            DelayLaw::Expr(e) => e.eval(&Env::t(t))?,
        })
    }

    /// Parse the compact form used on the command line and in law files:
    /// `const:C`, `sin:A,B,OMEGA`, `prop:GAMMA`, `expr:<expression in t>`.
    pub fn parse_spec(spec: &str) -> Result<Self, ModelError> {
        let spec = spec.trim();
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| ModelError::InvalidLaw(format!("`{spec}`: expected KIND:PARAMS")))?;
        let nums = || -> Result<Vec<f64>, ModelError> {
            rest.split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| ModelError::InvalidLaw(format!("`{spec}`: bad number `{p}`")))
                })
                .collect()
        };
        let law = match kind.trim() {
            "const" => match nums()?.as_slice() {
                [c] => DelayLaw::Constant(*c),
                _ => return Err(ModelError::InvalidLaw(format!("`{spec}`: const takes 1 value"))),
            },
            "sin" => match nums()?.as_slice() {
                [a, b, omega] => DelayLaw::Sinusoid {
                    a: *a,
                    b: *b,
                    omega: *omega,
                },
                _ => return Err(ModelError::InvalidLaw(format!("`{spec}`: sin takes a,b,omega"))),
            },
            "prop" => match nums()?.as_slice() {
                [g] => DelayLaw::Proportional(*g),
                _ => return Err(ModelError::InvalidLaw(format!("`{spec}`: prop takes 1 value"))),
            },
            "expr" => DelayLaw::from_expr(
                expr::parse(rest).map_err(|e| ModelError::InvalidLaw(format!("`{spec}`: {e}")))?,
            )?,
            other => return Err(ModelError::InvalidLaw(format!("unknown law kind `{other}`"))),
        };
        law.check_parameters()?;
        Ok(law)
    }

    pub fn from_expr(e: Expr) -> Result<Self, ModelError> {
        let mut bad = None;
        e.for_each_var(&mut |v| {
            if v != Var::T {
                bad = Some(v);
            }
        });
        match bad {
            Some(v) => Err(ModelError::InvalidLaw(format!(
                "delay expression may only use `t`, found `{v}`"
            ))),
            None => Ok(DelayLaw::Expr(e)),
        }
    }

    fn check_parameters(&self) -> Result<(), ModelError> {
        match *self {
            DelayLaw::Constant(c) if !(c >= 0.0 && c.is_finite()) => {
                Err(ModelError::InvalidLaw(format!("constant delay {c} must be >= 0")))
            }
            DelayLaw::Sinusoid { a, b, omega }
                if !(a >= b && b >= 0.0 && a.is_finite() && omega.is_finite()) =>
            {
                Err(ModelError::InvalidLaw(format!(
                    "sinusoidal delay needs a >= b >= 0 (a = {a}, b = {b})"
                )))
            }
            DelayLaw::Proportional(g) if !(0.0..1.0).contains(&g) => {
                Err(ModelError::Assumption1Violated(format!(
                    "proportional delay gamma*t needs 0 <= gamma < 1 (gamma = {g})"
                )))
            }
            _ => Ok(()),
        }
    }

    /// Check `tau >= 0` and the divergence of `t - tau(t)` on the sampled
    /// horizon; returns `tau_max = -inf (t - tau(t))` over that horizon.
    pub fn validate(&self, check: LawCheck) -> Result<f64, ModelError> {
        self.check_parameters()?;
        let n = check.samples.max(100);
        let mut lags = Vec::with_capacity(n + 1);
        let mut min_lag = f64::INFINITY;
        let mut sample = |t: f64, lags: Option<&mut Vec<f64>>| -> Result<(), ModelError> {
            let tau = self.eval(t)?;
            if !(tau >= 0.0) {
                return Err(ModelError::NegativeDelay { t, value: tau });
            }
            let lag = t - tau;
            min_lag = min_lag.min(lag);
            if let Some(l) = lags {
                l.push(lag);
            }
            Ok(())
        };
        for k in 0..=n {
            sample(check.horizon * k as f64 / n as f64, Some(&mut lags))?;
        }
        // Finer sweep near the start, where the infimum usually sits.
        let early = check.horizon.min(100.0);
        for k in 0..=10_000 {
            sample(early * k as f64 / 10_000.0, None)?;
        }
        // Lower envelope e_k = min_{j >= k} lag_j must increase strictly
        // between checkpoints.
        let mut envelope = lags.clone();
        for k in (0..envelope.len() - 1).rev() {
            envelope[k] = envelope[k].min(envelope[k + 1]);
        }
        let checkpoints = 10;
        for m in 1..checkpoints {
            let prev = envelope[n * (m - 1) / checkpoints];
            let cur = envelope[n * m / checkpoints];
            if !(cur > prev + 1e-9 * (1.0 + prev.abs())) {
                return Err(ModelError::Assumption1Violated(format!(
                    "t - tau(t) stops increasing near t = {}",
                    check.horizon * m as f64 / checkpoints as f64
                )));
            }
        }
        Ok((-min_lag).max(0.0))
    }
}

impl fmt::Display for DelayLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DelayLaw::Constant(c) => write!(f, "const:{c}"),
            DelayLaw::Sinusoid { a, b, omega } => write!(f, "sin:{a},{b},{omega}"),
            DelayLaw::Proportional(g) => write!(f, "prop:{g}"),
            DelayLaw::Expr(e) => write!(f, "expr:{e}"),
        }
    }
}

/// Which delay feeds which retarded argument.
#[derive(Debug, Clone, PartialEq)]
pub enum DelayAssignment {
    /// One `tau(t)` for every coordinate.
    Shared(DelayLaw),
    /// `tau_i^j`, row-major: entry `i * n + j` delays `x_j` inside `g_i`.
    PerPair(Vec<DelayLaw>),
}

impl DelayAssignment {
    pub fn law(&self, i: usize, j: usize, n: usize) -> &DelayLaw {
        match self {
            DelayAssignment::Shared(law) => law,
            DelayAssignment::PerPair(laws) => &laws[i * n + j],
        }
    }

    pub fn laws(&self) -> &[DelayLaw] {
        match self {
            DelayAssignment::Shared(law) => core::slice::from_ref(law),
            DelayAssignment::PerPair(laws) => laws,
        }
    }
}

/// A delay map together with its delays.
#[derive(Clone)]
pub struct DelayField {
    map: Arc<dyn DelayMap>,
    delays: DelayAssignment,
    tau_max: f64,
}

impl fmt::Debug for DelayField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelayField")
            .field("dim", &self.map.dim())
            .field("delays", &self.delays)
            .field("tau_max", &self.tau_max)
            .finish()
    }
}

impl DelayField {
    pub fn new(map: Arc<dyn DelayMap>, delays: DelayAssignment) -> Result<Self, ModelError> {
        Self::with_check(map, delays, LawCheck::default())
    }

    pub fn with_check(
        map: Arc<dyn DelayMap>,
        delays: DelayAssignment,
        check: LawCheck,
    ) -> Result<Self, ModelError> {
        let n = map.dim();
        if let DelayAssignment::PerPair(laws) = &delays {
            if laws.len() != n * n {
                return Err(ModelError::DimensionMismatch {
                    expected: n * n,
                    found: laws.len(),
                });
            }
        }
        let mut tau_max = 0.0_f64;
        for law in delays.laws() {
            tau_max = tau_max.max(law.validate(check)?);
        }
        let zero = vec![0.0; n];
        let mut g0 = vec![0.0; n];
        map.eval(&zero, &zero, &mut g0)?;
        check_origin(&g0)?;
        Ok(DelayField {
            map,
            delays,
            tau_max,
        })
    }

    /// Build from a parsed `x`/`y` system and a shared delay law.
    pub fn from_system(sys: &ExprSystem, law: DelayLaw) -> Result<Self, ModelError> {
        let map = ExprDelayMap::new(sys)?;
        Self::new(Arc::new(map), DelayAssignment::Shared(law))
    }

    pub fn with_law(&self, law: DelayLaw) -> Result<Self, ModelError> {
        Self::new(self.map.clone(), DelayAssignment::Shared(law))
    }

    pub fn with_delays(&self, delays: DelayAssignment) -> Result<Self, ModelError> {
        Self::new(self.map.clone(), delays)
    }

    pub fn dim(&self) -> usize {
        self.map.dim()
    }

    pub fn map(&self) -> &Arc<dyn DelayMap> {
        &self.map
    }

    pub fn delays(&self) -> &DelayAssignment {
        &self.delays
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    /// `f(x) = g(x, x)`.
    pub fn induced(&self) -> InducedField {
        InducedField::new(self.map.clone())
    }
}

// ---------------------------------------------------------------------------
// Boxes

/// The box `{x : 0 <= x <= upper}`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxSet {
    upper: Vec<f64>,
}

impl BoxSet {
    pub fn new(upper: Vec<f64>) -> Result<Self, ModelError> {
        if upper.is_empty() {
            return Err(ModelError::InvalidBox("empty corner".into()));
        }
        if let Some(v) = upper.iter().find(|v| !(**v >= 0.0 && v.is_finite())) {
            return Err(ModelError::InvalidBox(format!("corner entry {v} is not >= 0")));
        }
        Ok(BoxSet { upper })
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn dim(&self) -> usize {
        self.upper.len()
    }

    pub fn is_positive(&self) -> bool {
        self.upper.iter().all(|v| *v > 0.0)
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.iter()
            .zip(&self.upper)
            .all(|(xi, vi)| *xi >= -tol && *xi <= vi + tol)
    }

    /// Per-axis resolution after capping the total at `max_points`.
    pub fn capped_resolution(&self, per_axis: usize, max_points: usize) -> usize {
        let n = self.dim() as i32;
        let mut r = per_axis.max(2);
        while r > 2 && (r as f64).powi(n) > max_points as f64 {
            r -= 1;
        }
        r
    }

    /// Uniform grid including both faces, `per_axis` points per coordinate.
    pub fn grid(&self, per_axis: usize) -> GridIter<'_> {
        GridIter {
            upper: &self.upper,
            per_axis: per_axis.max(2),
            index: vec![0; self.upper.len()],
            done: false,
        }
    }
}

pub struct GridIter<'a> {
    upper: &'a [f64],
    per_axis: usize,
    index: Vec<usize>,
    done: bool,
}

impl Iterator for GridIter<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        if self.done {
            return None;
        }
        let denom = (self.per_axis - 1) as f64;
        let point = self
            .index
            .iter()
            .zip(self.upper)
            .map(|(&k, &v)| v * k as f64 / denom)
            .collect();
        let mut axis = 0;
        loop {
            if axis == self.index.len() {
                self.done = true;
                break;
            }
            self.index[axis] += 1;
            if self.index[axis] < self.per_axis {
                break;
            }
            self.index[axis] = 0;
            axis += 1;
        }
        Some(point)
    }
}

// ---------------------------------------------------------------------------
// Paths

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PathError {
    #[error("s_bar must be positive and finite (got {0})")]
    BadDomain(f64),
    #[error("expected {expected} components, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("path expressions may only use `s` (component {component} uses `{var}`)")]
    InvalidVariable { component: usize, var: Var },
    #[error("rho_{component}(0) = {value}, expected 0")]
    NotZeroAtOrigin { component: usize, value: f64 },
    #[error("rho_{component} is not strictly increasing near s = {s}")]
    NotIncreasing { component: usize, s: f64 },
    #[error("d rho_{component}/ds = {value} at s = {s}; the inverse needs a finite positive slope")]
    BadSlope { component: usize, s: f64, value: f64 },
    #[error("alpha_{component} is not positive at s = {s} (value {value})")]
    AlphaNotPositive { component: usize, s: f64, value: f64 },
    #[error("component {component} fails to evaluate at s = {s}: {source}")]
    Eval {
        component: usize,
        s: f64,
        #[source]
        source: EvalError,
    },
    #[error("component {component}: {source}")]
    Parse {
        component: usize,
        #[source]
        source: ParseError,
    },
}

/// Candidate path `rho: [0, s_bar] -> R^n_+` with margin `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathCandidate {
    rho: Vec<Expr>,
    drho: Vec<Option<Expr>>,
    alpha: Vec<Expr>,
    s_bar: f64,
}

/// Default slope of the margin `alpha_i(s) = eps * s`.
pub const DEFAULT_ALPHA_EPS: f64 = 1e-6;

impl PathCandidate {
    /// `alpha` defaults to `eps * s` in every component.
    pub fn new(rho: Vec<Expr>, s_bar: f64, alpha: Option<Vec<Expr>>) -> Result<Self, PathError> {
        if !(s_bar > 0.0 && s_bar.is_finite()) {
            return Err(PathError::BadDomain(s_bar));
        }
        let n = rho.len();
        let alpha = alpha.unwrap_or_else(|| {
            (0..n)
                .map(|_| expr::mul(Expr::Num(DEFAULT_ALPHA_EPS), Expr::Var(Var::S)))
                .collect()
        });
        if alpha.len() != n {
            return Err(PathError::DimensionMismatch {
                expected: n,
                found: alpha.len(),
            });
        }
        for (component, e) in rho.iter().chain(&alpha).enumerate() {
            let mut bad = None;
            e.for_each_var(&mut |v| {
                if v != Var::S {
                    bad = Some(v);
                }
            });
            if let Some(var) = bad {
                return Err(PathError::InvalidVariable {
                    component: component % n.max(1),
                    var,
                });
            }
        }
        let drho = rho.iter().map(|e| e.differentiate(Var::S).ok()).collect();
        Ok(PathCandidate {
            rho,
            drho,
            alpha,
            s_bar,
        })
    }

    pub fn parse<S: AsRef<str>>(rho: &[S], s_bar: f64, alpha: Option<&[S]>) -> Result<Self, PathError> {
        let parse_all = |srcs: &[S]| -> Result<Vec<Expr>, PathError> {
            srcs.iter()
                .enumerate()
                .map(|(component, s)| {
                    expr::parse(s.as_ref()).map_err(|source| PathError::Parse { component, source })
                })
                .collect()
        };
        let rho = parse_all(rho)?;
        let alpha = alpha.map(parse_all).transpose()?;
        Self::new(rho, s_bar, alpha)
    }

    pub fn dim(&self) -> usize {
        self.rho.len()
    }

    pub fn s_bar(&self) -> f64 {
        self.s_bar
    }

    pub fn rho(&self) -> &[Expr] {
        &self.rho
    }

    pub fn alpha(&self) -> &[Expr] {
        &self.alpha
    }

    pub fn rho_component(&self, i: usize, s: f64) -> Result<f64, PathError> {
        self.rho[i].eval(&Env::s(s)).map_err(|source| PathError::Eval {
            component: i,
            s,
            source,
        })
    }

    pub fn rho_at(&self, s: f64) -> Result<Vec<f64>, PathError> {
        (0..self.dim()).map(|i| self.rho_component(i, s)).collect()
    }

    pub fn alpha_at(&self, s: f64) -> Result<Vec<f64>, PathError> {
        self.alpha
            .iter()
            .enumerate()
            .map(|(component, e)| {
                e.eval(&Env::s(s))
                    .map_err(|source| PathError::Eval { component, s, source })
            })
            .collect()
    }

    /// Slope `d rho_i / ds`, symbolic when possible.
    pub fn slope(&self, i: usize, s: f64) -> Result<f64, PathError> {
        match &self.drho[i] {
            Some(d) => d.eval(&Env::s(s)).map_err(|source| PathError::Eval {
                component: i,
                s,
                source,
            }),
            None => {
                let h = 1e-6 * s.abs().max(1e-3);
                let lo = (s - h).max(0.0);
                let hi = s + h;
                Ok((self.rho_component(i, hi)? - self.rho_component(i, lo)?) / (hi - lo))
            }
        }
    }

    /// The corner `rho(s_bar)`.
    pub fn corner(&self) -> Result<Vec<f64>, PathError> {
        self.rho_at(self.s_bar)
    }

    /// Class-K and inverse-slope checks on a dense grid of `grid` points.
    pub fn validate(&self, grid: usize) -> Result<(), PathError> {
        let grid = grid.max(2);
        for i in 0..self.dim() {
            let r0 = self.rho_component(i, 0.0)?;
            if r0.abs() > ORIGIN_TOL {
                return Err(PathError::NotZeroAtOrigin {
                    component: i,
                    value: r0,
                });
            }
            let mut prev = r0;
            for k in 1..grid {
                let s = self.s_bar * k as f64 / (grid - 1) as f64;
                let r = self.rho_component(i, s)?;
                if !(r - prev > STRICT_MARGIN) {
                    return Err(PathError::NotIncreasing { component: i, s });
                }
                prev = r;
                let slope = self.slope(i, s)?;
                if !(slope > 0.0 && slope.is_finite()) {
                    return Err(PathError::BadSlope {
                        component: i,
                        s,
                        value: slope,
                    });
                }
                let a = self.alpha[i].eval(&Env::s(s)).map_err(|source| PathError::Eval {
                    component: i,
                    s,
                    source,
                })?;
                if !(a > 0.0) {
                    return Err(PathError::AlphaNotPositive {
                        component: i,
                        s,
                        value: a,
                    });
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Scalings

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PsiError {
    #[error("psi_{component} may only use x{n} and y{n} (found `{var}`)", n = component + 1)]
    InvalidVariable { component: usize, var: Var },
    #[error("psi_{component}(x, 0) = {value} at x = {x}, expected 0")]
    NonzeroAtZero { component: usize, x: f64, value: f64 },
    #[error("psi_{component} is not strictly increasing in y at x = {x}, y = {y}")]
    NotIncreasing { component: usize, x: f64, y: f64 },
    #[error("expected {expected} components, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("psi_{component} fails to evaluate: {source}")]
    Eval {
        component: usize,
        #[source]
        source: EvalError,
    },
}

/// Componentwise scaling `psi_i(x_i, y_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalingPsi {
    components: Vec<Expr>,
}

impl ScalingPsi {
    pub fn new(components: Vec<Expr>) -> Result<Self, PsiError> {
        for (component, e) in components.iter().enumerate() {
            let mut bad = None;
            e.for_each_var(&mut |v| {
                if v != Var::X(component) && v != Var::Y(component) {
                    bad = Some(v);
                }
            });
            if let Some(var) = bad {
                return Err(PsiError::InvalidVariable { component, var });
            }
        }
        Ok(ScalingPsi { components })
    }

    pub fn parse<S: AsRef<str>>(sources: &[S]) -> Result<Self, ModelError> {
        let sys = ExprSystem::parse(sources.len(), sources, VariableRoles::StateAndDelayed)?;
        Ok(Self::new(sys.components().to_vec())?)
    }

    /// `psi_i(x, y) = y`.
    pub fn identity(n: usize) -> Self {
        ScalingPsi {
            components: (0..n).map(|i| Expr::Var(Var::Y(i))).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[Expr] {
        &self.components
    }

    pub fn eval_component(&self, i: usize, xi: f64, yi: f64) -> Result<f64, PsiError> {
        let n = self.dim();
        let mut x = vec![0.0; n];
        let mut y = vec![0.0; n];
        x[i] = xi;
        y[i] = yi;
        self.components[i]
            .eval(&Env::delayed(&x, &y))
            .map_err(|source| PsiError::Eval { component: i, source })
    }

    /// Check `psi_i(x_i, 0) = 0` for sampled `x_i in [0, x_upper_i]` and
    /// strict increase in `y_i` over `[y_lo_i, y_hi_i]` for sampled `x_i > 0`.
    pub fn validate(
        &self,
        x_upper: &[f64],
        y_lo: &[f64],
        y_hi: &[f64],
        grid: usize,
    ) -> Result<(), PsiError> {
        let n = self.dim();
        if x_upper.len() != n || y_lo.len() != n || y_hi.len() != n {
            return Err(PsiError::DimensionMismatch {
                expected: n,
                found: x_upper.len(),
            });
        }
        let x_samples = 32;
        let grid = grid.max(2);
        for i in 0..n {
            for kx in 0..=x_samples {
                let xi = x_upper[i] * kx as f64 / x_samples as f64;
                let at_zero = self.eval_component(i, xi, 0.0)?;
                if at_zero.abs() > ORIGIN_TOL {
                    return Err(PsiError::NonzeroAtZero {
                        component: i,
                        x: xi,
                        value: at_zero,
                    });
                }
                if kx == 0 {
                    continue;
                }
                let mut prev = self.eval_component(i, xi, y_lo[i])?;
                for ky in 1..grid {
                    let y = y_lo[i] + (y_hi[i] - y_lo[i]) * ky as f64 / (grid - 1) as f64;
                    let v = self.eval_component(i, xi, y)?;
                    if !(v - prev > STRICT_MARGIN) {
                        return Err(PsiError::NotIncreasing {
                            component: i,
                            x: xi,
                            y,
                        });
                    }
                    prev = v;
                }
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Initial histories

/// Initial function `phi` on `[-tau_max, 0]`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialHistory {
    Constant(Vec<f64>),
    /// One expression in `t` per component.
    Expr(Vec<Expr>),
    /// Piecewise-linear interpolation of samples; `times` ascending, ending at 0.
    Piecewise { times: Vec<f64>, values: Vec<Vec<f64>> },
}

impl InitialHistory {
    pub fn dim(&self) -> usize {
        match self {
            InitialHistory::Constant(v) => v.len(),
            InitialHistory::Expr(e) => e.len(),
            InitialHistory::Piecewise { values, .. } => values.first().map_or(0, Vec::len),
        }
    }

    /// Earliest time the history is defined at (`None` = unbounded).
    pub fn domain_start(&self) -> Option<f64> {
        match self {
            InitialHistory::Piecewise { times, .. } => times.first().copied(),
            _ => None,
        }
    }

    pub fn eval(&self, t: f64, out: &mut [f64]) -> Result<(), ModelError> {
        match self {
            InitialHistory::Constant(v) => out.copy_from_slice(v),
            InitialHistory::Expr(es) => {
                let env = Env::t(t);
                for (o, e) in out.iter_mut().zip(es) {
                    *o = e.eval(&env)?;
                }
            }
            InitialHistory::Piecewise { times, values } => {
                let first = *times.first().ok_or(ModelError::HistoryGap { t })?;
                if t < first - 1e-12 || t > 1e-12 {
                    return Err(ModelError::HistoryGap { t });
                }
                let k = times.partition_point(|&s| s <= t).clamp(1, times.len().max(2) - 1);
                if times.len() == 1 {
                    out.copy_from_slice(&values[0]);
                    return Ok(());
                }
                let (t0, t1) = (times[k - 1], times[k]);
                let w = ((t - t0) / (t1 - t0)).clamp(0.0, 1.0);
                for (j, o) in out.iter_mut().enumerate() {
                    *o = values[k - 1][j] * (1.0 - w) + values[k][j] * w;
                }
            }
        }
        Ok(())
    }

    /// Check the domain covers `[-tau_max, 0]` and `phi >= 0` on it.
    pub fn validate(&self, tau_max: f64) -> Result<(), ModelError> {
        if let InitialHistory::Piecewise { times, values } = self {
            if times.is_empty() || times.len() != values.len() {
                return Err(ModelError::InvalidLaw("history samples are malformed".into()));
            }
            if times.windows(2).any(|w| !(w[1] > w[0])) || times[times.len() - 1] != 0.0 {
                return Err(ModelError::InvalidLaw(
                    "history times must increase strictly and end at 0".into(),
                ));
            }
            if let Some(v) = values.iter().find(|v| v.len() != values[0].len()) {
                return Err(ModelError::DimensionMismatch {
                    expected: values[0].len(),
                    found: v.len(),
                });
            }
            if times[0] > -tau_max + 1e-12 * (1.0 + tau_max) && tau_max > 0.0 {
                return Err(ModelError::HistoryGap { t: -tau_max });
            }
        }
        let mut buf = vec![0.0; self.dim()];
        let samples = DENSE_GRID;
        for k in 0..=samples {
            let t = -tau_max * k as f64 / samples as f64;
            self.eval(t, &mut buf)?;
            if let Some((component, &value)) = buf.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
                return Err(ModelError::NegativeHistory { t, component, value });
            }
        }
        Ok(())
    }
}
