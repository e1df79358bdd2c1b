//! Dilations, homogeneity and sub-homogeneity tests, scaled paths for
//! homogeneous fields, and the monotone upper bound `g_bar` for positive
//! systems `x' = h(x) + d(x(t - tau))` that are not monotone themselves.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::certificates::{search_w, CertError};
use crate::delay::horizon_for;
use crate::expr::{self, EvalError, Expr, Var};
use crate::integrate::{integrate_dde, IntegrateError, IntegratorConfig, Verdict};
use crate::model::{
    eval_field, BoxSet, DelayAssignment, DelayField, DelayLaw, DelayMap, InitialHistory, ModelError,
    PathCandidate, PathError, VectorField,
};
use crate::monotone::{ordering_gap, MAX_GRID_POINTS, ORDER_TOL};
use crate::seeding::{log_uniform, stream, uniform};
use crate::Status;

/// Relative tolerance of the homogeneity identity.
pub const HOMOGENEITY_TOL: f64 = 1e-9;
/// Slack in the sub-homogeneity inequality.
pub const SUB_HOMOGENEITY_SLACK: f64 = 1e-9;
/// Sign tolerance for Assumption 3 items 1 and 2.
pub const SIGN_TOL: f64 = 1e-12;
pub const DEFAULT_BOUND_GRID: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HomogError {
    #[error("dilation weights must be positive and the degree non-negative")]
    InvalidDilation,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("f(w) is not negative in component {component} (value {value})")]
    NegativityFailed { component: usize, value: f64 },
    #[error("Assumption 3 item {item} violated at {witness:?}")]
    Assumption3Violated { item: u8, witness: Vec<f64> },
    #[error("certification failed: {0}")]
    CertificationFailed(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Path(#[from] PathError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Certificate(#[from] CertError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
}

/// `delta_lambda(x) = (lambda^{r_1} x_1, ..., lambda^{r_n} x_n)` with degree `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dilation {
    r: Vec<f64>,
    p: f64,
}

impl Dilation {
    pub fn new(r: Vec<f64>, p: f64) -> Result<Self, HomogError> {
        if r.is_empty() || r.iter().any(|ri| !(*ri > 0.0 && ri.is_finite())) || !(p >= 0.0) {
            return Err(HomogError::InvalidDilation);
        }
        Ok(Dilation { r, p })
    }

    pub fn standard(n: usize, p: f64) -> Result<Self, HomogError> {
        Dilation::new(vec![1.0; n], p)
    }

    pub fn r(&self) -> &[f64] {
        &self.r
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.r.len()
    }

    pub fn r_max(&self) -> f64 {
        self.r.iter().copied().fold(0.0, f64::max)
    }

    pub fn apply(&self, lambda: f64, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.r).map(|(xi, ri)| lambda.powf(*ri) * xi).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogWitness {
    pub x: Vec<f64>,
    pub lambda: f64,
    pub component: usize,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HomogeneityReport {
    pub status: Status,
    pub trials: usize,
    /// Largest `|lhs - rhs| / (1 + |rhs|)` (homogeneity) or
    /// `(lhs - rhs) / (1 + |rhs|)` (sub-homogeneity).
    pub worst: f64,
    pub witness: Option<HomogWitness>,
}

fn check_dim(expected: usize, got: usize) -> Result<(), HomogError> {
    if expected != got {
        return Err(HomogError::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn random_point(rng: &mut crate::seeding::StreamRng, domain: &BoxSet) -> Vec<f64> {
    domain.upper().iter().map(|v| uniform(rng, 0.0, *v)).collect()
}

/// Sample `(x, lambda)` and report the largest residual of
/// `g(x, lambda) = (lhs_i, rhs_i)`.
fn sample_residual<F, G>(
    f: &F,
    domain: &BoxSet,
    trials: usize,
    seed: u64,
    lambda_range: (f64, f64),
    mut pair: G,
    signed: bool,
) -> Result<(f64, Option<HomogWitness>), HomogError>
where
    F: VectorField + ?Sized,
    G: FnMut(&[f64], f64, &[f64]) -> Result<(Vec<f64>, Vec<f64>), EvalError>,
{
    check_dim(f.dim(), domain.dim())?;
    let mut worst = f64::NEG_INFINITY;
    let mut witness = None;
    for k in 0..trials {
        let mut rng = stream(seed, k as u64);
        let x = random_point(&mut rng, domain);
        let lambda = log_uniform(&mut rng, lambda_range.0, lambda_range.1);
        let fx = eval_field(f, &x)?;
        let (lhs, rhs) = pair(&x, lambda, &fx)?;
        for (i, (l, r)) in lhs.iter().zip(&rhs).enumerate() {
            let diff = if signed { l - r } else { (l - r).abs() };
            let res = diff / (1.0 + r.abs());
            if res > worst || res.is_nan() {
                worst = res;
                witness = Some(HomogWitness {
                    x: x.clone(),
                    lambda,
                    component: i,
                    lhs: *l,
                    rhs: *r,
                });
            }
        }
    }
    Ok((worst, witness))
}

fn residual_report(trials: usize, worst: f64, witness: Option<HomogWitness>, tol: f64) -> HomogeneityReport {
    let pass = !(worst > tol);
    HomogeneityReport {
        status: Status::from_bool(pass),
        trials,
        worst: if trials == 0 { 0.0 } else { worst },
        witness: if pass { None } else { witness },
    }
}

fn homogeneity_residual<F: VectorField + ?Sized>(
    f: &F,
    dil: &Dilation,
    domain: &BoxSet,
    trials: usize,
    seed: u64,
) -> Result<(f64, Option<HomogWitness>), HomogError> {
    check_dim(f.dim(), dil.dim())?;
    sample_residual(
        f,
        domain,
        trials,
        seed,
        (0.1, 10.0),
        |x, lambda, fx| {
            let lhs = eval_field(f, &dil.apply(lambda, x))?;
            let lp = lambda.powf(dil.p);
            let rhs = dil.apply(lambda, fx).into_iter().map(|v| lp * v).collect();
            Ok((lhs, rhs))
        },
        false,
    )
}

/// Check `f(delta_lambda(x)) = lambda^p delta_lambda(f(x))` at random `x` in
/// the box and `lambda` in `[0.1, 10]`.
pub fn test_homogeneous<F: VectorField + ?Sized>(
    f: &F,
    dil: &Dilation,
    domain: &BoxSet,
    trials: usize,
    seed: u64,
) -> Result<HomogeneityReport, HomogError> {
    let (worst, witness) = homogeneity_residual(f, dil, domain, trials, seed)?;
    Ok(residual_report(trials, worst, witness, HOMOGENEITY_TOL))
}

/// Check `f(lambda x) <= lambda^p f(x)` at random `x` in the box and
/// `lambda` in `[1, 10]`.
pub fn test_sub_homogeneous<F: VectorField + ?Sized>(
    f: &F,
    p: f64,
    domain: &BoxSet,
    trials: usize,
    seed: u64,
) -> Result<HomogeneityReport, HomogError> {
    if !(p >= 0.0) {
        return Err(HomogError::InvalidDilation);
    }
    let (worst, witness) = sample_residual(
        f,
        domain,
        trials,
        seed,
        (1.0, 10.0),
        |x, lambda, fx| {
            let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
            let lhs = eval_field(f, &scaled)?;
            let lp = lambda.powf(p);
            Ok((lhs, fx.iter().map(|v| lp * v).collect()))
        },
        true,
    )?;
    Ok(residual_report(trials, worst, witness, SUB_HOMOGENEITY_SLACK))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DegreeFit {
    pub p: f64,
    pub residual: f64,
    pub status: Status,
}

/// Best-fitting degree in `[p_lo, p_hi]` for the weights `r`: a uniform
/// sweep of `steps` values followed by golden-section refinement.
pub fn infer_degree<F: VectorField + ?Sized>(
    f: &F,
    r: &[f64],
    domain: &BoxSet,
    range: (f64, f64),
    steps: usize,
    trials: usize,
    seed: u64,
) -> Result<DegreeFit, HomogError> {
    let (lo, hi) = range;
    if !(lo >= 0.0 && hi >= lo) {
        return Err(HomogError::InvalidDilation);
    }
    let residual = |p: f64| -> Result<f64, HomogError> {
        let dil = Dilation::new(r.to_vec(), p)?;
        Ok(homogeneity_residual(f, &dil, domain, trials, seed)?.0)
    };
    let steps = steps.max(2);
    let h = (hi - lo) / (steps - 1) as f64;
    let mut best = (lo, f64::INFINITY);
    for k in 0..steps {
        let p = lo + h * k as f64;
        let res = residual(p)?;
        if res < best.1 {
            best = (p, res);
        }
    }
    let (mut a, mut b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    for _ in 0..60 {
        if b - a < 1e-12 {
            break;
        }
        let c = b - phi * (b - a);
        let d = a + phi * (b - a);
        if residual(c)? <= residual(d)? {
            b = d;
        } else {
            a = c;
        }
    }
    let mid = 0.5 * (a + b);
    let res = residual(mid)?;
    if res < best.1 {
        best = (mid, res);
    }
    Ok(DegreeFit {
        p: best.0,
        residual: best.1,
        status: Status::from_bool(best.1 <= HOMOGENEITY_TOL),
    })
}

/// Path `rho_i(s) = w_i s^{r_i / r_max}` with
/// `alpha_i(s) = -f_i(w) s^{(p + r_i) / r_max}`, which matches
/// `f(rho(s)) = s^{p/r_max} delta_{s^{1/r_max}}(f(w))` exactly.
pub fn homogeneous_path<F: VectorField + ?Sized>(
    f: &F,
    dil: &Dilation,
    w: &[f64],
    s_bar: f64,
) -> Result<PathCandidate, HomogError> {
    check_dim(f.dim(), dil.dim())?;
    check_dim(f.dim(), w.len())?;
    let fw = eval_field(f, w)?;
    if let Some((component, &value)) = fw.iter().enumerate().find(|(_, v)| !(**v < 0.0)) {
        return Err(HomogError::NegativityFailed { component, value });
    }
    let r_max = dil.r_max();
    let s = || Expr::Var(Var::S);
    let power = |e: f64| expr::pow(s(), Expr::num(e));
    let rho = dil
        .r
        .iter()
        .zip(w)
        .map(|(ri, wi)| expr::mul(Expr::num(*wi), power(ri / r_max)))
        .collect();
    let alpha = dil
        .r
        .iter()
        .zip(&fw)
        .map(|(ri, fi)| expr::mul(Expr::num(-fi), power((dil.p + ri) / r_max)))
        .collect();
    Ok(PathCandidate::new(rho, s_bar, Some(alpha))?)
}

// ---------------------------------------------------------------------------
// Comparison bound

/// Tabulated `g_bar_i(x, y) = H_i(x) + D_i(y)` with
/// `H_i(x) = sup { h_i(z) : 0 <= z <= x, z_i = x_i }` and
/// `D_i(y) = sup { d_i(z) : 0 <= z <= y }`, interpolated multilinearly and
/// clamped to the box.
#[derive(Debug, Clone)]
pub struct ComparisonBound {
    upper: Vec<f64>,
    nodes: usize,
    h_sup: Vec<Vec<f64>>,
    d_sup: Vec<Vec<f64>>,
}

struct NodeValues {
    nodes: usize,
    h: Vec<Vec<f64>>,
    d: Vec<Vec<f64>>,
}

fn node_index(flat: usize, nodes: usize, n: usize) -> Vec<usize> {
    let mut k = vec![0; n];
    let mut rem = flat;
    for kj in k.iter_mut() {
        *kj = rem % nodes;
        rem /= nodes;
    }
    k
}

fn node_point(k: &[usize], nodes: usize, upper: &[f64]) -> Vec<f64> {
    let denom = (nodes - 1) as f64;
    k.iter().zip(upper).map(|(&kj, v)| v * kj as f64 / denom).collect()
}

fn prefix_max(table: &mut [f64], nodes: usize, axis: usize) {
    let stride = nodes.pow(axis as u32);
    for idx in 0..table.len() {
        if !(idx / stride).is_multiple_of(nodes) {
            let prev = table[idx - stride];
            if prev > table[idx] {
                table[idx] = prev;
            }
        }
    }
}

fn evaluate_nodes<H, D>(h: &H, d: &D, domain: &BoxSet, grid: usize) -> Result<NodeValues, HomogError>
where
    H: VectorField + ?Sized,
    D: VectorField + ?Sized,
{
    let n = h.dim();
    check_dim(n, d.dim())?;
    check_dim(n, domain.dim())?;
    let nodes = domain.capped_resolution(grid, MAX_GRID_POINTS);
    let total = nodes.pow(n as u32);
    let mut hv = vec![vec![0.0; total]; n];
    let mut dv = vec![vec![0.0; total]; n];
    let mut hx = vec![0.0; n];
    let mut dx = vec![0.0; n];
    for flat in 0..total {
        let k = node_index(flat, nodes, n);
        let x = node_point(&k, nodes, domain.upper());
        h.eval(&x, &mut hx)?;
        d.eval(&x, &mut dx)?;
        for i in 0..n {
            hv[i][flat] = hx[i];
            dv[i][flat] = dx[i];
        }
    }
    Ok(NodeValues { nodes, h: hv, d: dv })
}

/// Items 1 and 2 of Assumption 3 on the grid.
fn check_signs(values: &NodeValues, domain: &BoxSet) -> Result<(), HomogError> {
    let n = domain.dim();
    for flat in 0..values.nodes.pow(n as u32) {
        let k = node_index(flat, values.nodes, n);
        for i in 0..n {
            if k[i] == 0 && values.h[i][flat] < -SIGN_TOL {
                return Err(HomogError::Assumption3Violated {
                    item: 1,
                    witness: node_point(&k, values.nodes, domain.upper()),
                });
            }
        }
    }
    for flat in 0..values.nodes.pow(n as u32) {
        if (0..n).any(|i| values.d[i][flat] < -SIGN_TOL) {
            let k = node_index(flat, values.nodes, n);
            return Err(HomogError::Assumption3Violated {
                item: 2,
                witness: node_point(&k, values.nodes, domain.upper()),
            });
        }
    }
    Ok(())
}

fn build_bound(values: NodeValues, domain: &BoxSet) -> ComparisonBound {
    let n = domain.dim();
    let nodes = values.nodes;
    let mut h_sup = values.h;
    let mut d_sup = values.d;
    for i in 0..n {
        for axis in 0..n {
            if axis != i {
                prefix_max(&mut h_sup[i], nodes, axis);
            }
            prefix_max(&mut d_sup[i], nodes, axis);
        }
    }
    ComparisonBound {
        upper: domain.upper().to_vec(),
        nodes,
        h_sup,
        d_sup,
    }
}

/// Tabulate `g_bar` on a grid of `grid` nodes per axis (capped at
/// [`MAX_GRID_POINTS`] in total) after checking Assumption 3 items 1 and 2.
pub fn comparison_field_bound<H, D>(
    h: &H,
    d: &D,
    domain: &BoxSet,
    grid: usize,
) -> Result<ComparisonBound, HomogError>
where
    H: VectorField + ?Sized,
    D: VectorField + ?Sized,
{
    let values = evaluate_nodes(h, d, domain, grid)?;
    check_signs(&values, domain)?;
    Ok(build_bound(values, domain))
}

impl ComparisonBound {
    pub fn nodes_per_axis(&self) -> usize {
        self.nodes
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn interpolate(&self, table: &[f64], x: &[f64]) -> f64 {
        let n = self.upper.len();
        let last = self.nodes - 1;
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for j in 0..n {
            let u = if self.upper[j] > 0.0 {
                (x[j].max(0.0) / self.upper[j]).min(1.0) * last as f64
            } else {
                0.0
            };
            let k = (u.floor() as usize).min(last - 1);
            base[j] = k;
            frac[j] = u - k as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << n) {
            let mut weight = 1.0;
            let mut flat = 0;
            let mut stride = 1;
            for j in 0..n {
                let up = (corner >> j) & 1 == 1;
                weight *= if up { frac[j] } else { 1.0 - frac[j] };
                flat += (base[j] + up as usize) * stride;
                stride *= self.nodes;
            }
            if weight != 0.0 {
                acc += weight * table[flat];
            }
        }
        acc
    }

    /// `H_i(x)`.
    pub fn h_sup(&self, i: usize, x: &[f64]) -> f64 {
        self.interpolate(&self.h_sup[i], x)
    }

    /// `D_i(y)`.
    pub fn d_sup(&self, i: usize, y: &[f64]) -> f64 {
        self.interpolate(&self.d_sup[i], y)
    }

    /// Rows `(i, node, H_i(node), D_i(node))` for every component and node.
    pub fn table(&self) -> Vec<(usize, Vec<f64>, f64, f64)> {
        let n = self.upper.len();
        let total = self.nodes.pow(n as u32);
        let mut rows = Vec::with_capacity(n * total);
        for i in 0..n {
            for flat in 0..total {
                let k = node_index(flat, self.nodes, n);
                rows.push((
                    i,
                    node_point(&k, self.nodes, &self.upper),
                    self.h_sup[i][flat],
                    self.d_sup[i][flat],
                ));
            }
        }
        rows
    }

    /// Dominating-index condition on the grid: every node `x != 0` has some `i`
    /// with `g_bar_i(x, x) < 0`. Returns the worst `min_i g_bar_i(x, x)`.
    pub fn check_dominating_index(&self) -> Result<f64, HomogError> {
        let n = self.upper.len();
        let total = self.nodes.pow(n as u32);
        let mut worst = f64::NEG_INFINITY;
        for flat in 1..total {
            let best = (0..n)
                .map(|i| self.h_sup[i][flat] + self.d_sup[i][flat])
                .fold(f64::INFINITY, f64::min);
            if !(best < 0.0) {
                let k = node_index(flat, self.nodes, n);
                return Err(HomogError::Assumption3Violated {
                    item: 4,
                    witness: node_point(&k, self.nodes, &self.upper),
                });
            }
            worst = worst.max(best);
        }
        Ok(worst)
    }
}

impl DelayMap for ComparisonBound {
    fn dim(&self) -> usize {
        self.upper.len()
    }

    fn eval_component(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        Ok(self.h_sup(i, x) + self.d_sup(i, y))
    }

    fn is_smooth(&self) -> bool {
        false
    }
}

/// `g(x, y) = h(x) + d(y)`.
#[derive(Clone)]
pub struct SplitDelayMap {
    h: Arc<dyn VectorField>,
    d: Arc<dyn VectorField>,
}

impl SplitDelayMap {
    pub fn new(h: Arc<dyn VectorField>, d: Arc<dyn VectorField>) -> Result<Self, HomogError> {
        check_dim(h.dim(), d.dim())?;
        Ok(SplitDelayMap { h, d })
    }
}

impl DelayMap for SplitDelayMap {
    fn dim(&self) -> usize {
        self.h.dim()
    }

    fn eval_component(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        let mut out = vec![0.0; self.dim()];
        self.eval(x, y, &mut out)?;
        Ok(out[i])
    }

    fn eval(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        let mut dy = vec![0.0; out.len()];
        self.h.eval(x, out)?;
        self.d.eval(y, &mut dy)?;
        for (o, v) in out.iter_mut().zip(dy) {
            *o += v;
        }
        Ok(())
    }

    fn is_smooth(&self) -> bool {
        self.h.is_smooth() && self.d.is_smooth()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assumption3Report {
    pub h_sub_homogeneity: HomogeneityReport,
    pub d_sub_homogeneity: HomogeneityReport,
    /// Worst `min_i g_bar_i(x, x)` over nonzero grid nodes.
    pub dominating_margin: f64,
}

/// Sampling effort for [`check_assumption3`] and
/// [`certify_non_monotone_positive`].
#[derive(Debug, Clone, Copy)]
pub struct NonMonotoneOptions {
    pub grid: usize,
    pub trials: usize,
    pub search_trials: usize,
    pub seed: u64,
}

impl Default for NonMonotoneOptions {
    fn default() -> Self {
        NonMonotoneOptions {
            grid: DEFAULT_BOUND_GRID,
            trials: 1000,
            search_trials: 2000,
            seed: crate::seeding::DEFAULT_SEED,
        }
    }
}

/// Check Assumption 3 items 1 to 4 on the box and return the bound.
pub fn check_assumption3<H, D>(
    h: &H,
    d: &D,
    p: f64,
    domain: &BoxSet,
    opts: &NonMonotoneOptions,
) -> Result<(ComparisonBound, Assumption3Report), HomogError>
where
    H: VectorField + ?Sized,
    D: VectorField + ?Sized,
{
    let values = evaluate_nodes(h, d, domain, opts.grid)?;
    check_signs(&values, domain)?;
    let hs = test_sub_homogeneous(h, p, domain, opts.trials, opts.seed)?;
    let ds = test_sub_homogeneous(d, p, domain, opts.trials, opts.seed ^ 1)?;
    for rep in [&hs, &ds] {
        if !rep.status.passed() {
            return Err(HomogError::Assumption3Violated {
                item: 3,
                witness: rep.witness.as_ref().map(|w| w.x.clone()).unwrap_or_default(),
            });
        }
    }
    let bound = build_bound(values, domain);
    let dominating_margin = bound.check_dominating_index()?;
    Ok((
        bound,
        Assumption3Report {
            h_sub_homogeneity: hs,
            d_sub_homogeneity: ds,
            dominating_margin,
        },
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonMonotoneRow {
    pub law: DelayLaw,
    pub verdict: Verdict,
    pub bound_verdict: Verdict,
    pub terminal_norm: f64,
    /// `max (x_g - x_gbar)` over shared times.
    pub domination_gap: f64,
    pub min_component: f64,
    pub status: Status,
}

#[derive(Debug, Clone)]
pub struct NonMonotoneReport {
    pub status: Status,
    pub assumption3: Assumption3Report,
    pub bound: ComparisonBound,
    /// Certified corner for the delay-free bound.
    pub w: Vec<f64>,
    pub rows: Vec<NonMonotoneRow>,
}

/// Build `g_bar`, certify its delay-free origin with a searched `w`, then
/// simulate `g = h + d` and `g_bar` from `phi` (default: constant `w`) under
/// each law and check positivity, domination and convergence.
pub fn certify_non_monotone_positive(
    h: Arc<dyn VectorField>,
    d: Arc<dyn VectorField>,
    p: f64,
    domain: &BoxSet,
    laws: &[DelayLaw],
    phi: Option<&InitialHistory>,
    cfg: &IntegratorConfig,
    opts: &NonMonotoneOptions,
) -> Result<NonMonotoneReport, HomogError> {
    let (bound, assumption3) = check_assumption3(&*h, &*d, p, domain, opts)?;
    let bound_map: Arc<dyn DelayMap> = Arc::new(bound.clone());
    let induced = crate::model::InducedField::new(bound_map.clone());
    let search = search_w(&induced, domain, opts.search_trials, opts.seed, cfg)?;
    let w = match (search.w, search.certificate) {
        (Some(w), Some(c)) if c.certified() => w,
        _ => {
            return Err(HomogError::CertificationFailed(format!(
                "no certified w for the comparison bound after {} samples",
                search.samples
            )))
        }
    };
    let corner = InitialHistory::Constant(w.clone());
    let phi = phi.unwrap_or(&corner);
    let g_map: Arc<dyn DelayMap> = Arc::new(SplitDelayMap::new(h, d)?);
    let mut rows = Vec::with_capacity(laws.len());
    for law in laws {
        let delays = DelayAssignment::Shared(law.clone());
        let g = DelayField::new(g_map.clone(), delays.clone())?;
        let gbar = DelayField::new(bound_map.clone(), delays)?;
        let cfg = IntegratorConfig {
            t_end: horizon_for(law, cfg.t_end),
            ..*cfg
        };
        let sim = integrate_dde(&g, phi, &cfg)?;
        let upper = integrate_dde(&gbar, phi, &cfg)?;
        let (gap, _, _) = ordering_gap(&sim.trajectory, &upper.trajectory);
        let min_component = sim.trajectory.min_component();
        let ok = sim.verdict.is_convergent() && gap <= ORDER_TOL && min_component >= -cfg.tol_pos;
        rows.push(NonMonotoneRow {
            law: law.clone(),
            verdict: sim.verdict,
            bound_verdict: upper.verdict,
            terminal_norm: sim.terminal_norm,
            domination_gap: gap,
            min_component,
            status: Status::from_bool(ok),
        });
    }
    let status = Status::from_bool(rows.iter().all(|r| r.status.passed()));
    Ok(NonMonotoneReport {
        status,
        assumption3,
        bound,
        w,
        rows,
    })
}
