//! Nonlinear stability certificates: class-K paths with `f(rho(s)) <=
//! -alpha(s)`, single vectors `w` with `f(w) < 0` plus observed convergence,
//! a randomized search for such `w`, and the componentwise scaling
//! transform `x' = psi(x, f(x))`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::expr::{EvalError, Expr, ExprSystem, Var, VariableRoles};
use crate::integrate::{integrate_ode, IntegrateError, IntegratorConfig, Verdict};
use crate::lyapunov::{Component, LyapError, MaxSepLyap};
use crate::model::{
    eval_field, BoxSet, ExprField, ModelError, PathCandidate, PathError, PsiError, ScalingPsi,
    VectorField, DENSE_GRID,
};
use crate::monotone::{check_kamke, JacobianReport, DEFAULT_GRID};
use crate::seeding;

/// Default number of samples on `[0, s_bar]`.
pub const PATH_GRID: usize = 2048;
/// Slack in `f_i(rho(s)) <= -alpha_i(s) + PATH_TOL * max(1, |alpha_i(s)|)`.
pub const PATH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CertError {
    #[error("path domain error: {0}")]
    PathDomain(#[from] PathError),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("psi validation failed: {0}")]
    PsiValidation(#[from] PsiError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lyapunov(#[from] LyapError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertStatus {
    Certified,
    Rejected,
    Inconclusive,
}

impl CertStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            CertStatus::Certified => "CERTIFIED",
            CertStatus::Rejected => "REJECTED",
            CertStatus::Inconclusive => "INCONCLUSIVE",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    /// `f_i(rho(s)) > -alpha_i(s)` (beyond tolerance).
    PathSample {
        s: f64,
        component: usize,
        value: f64,
        bound: f64,
    },
    /// `f_i(w) >= 0`.
    NotNegative { component: usize, value: f64 },
    /// The trajectory from `w` did not reach the origin.
    Terminal { state: Vec<f64>, verdict: Verdict },
}

#[derive(Debug, Clone, PartialEq)]
pub struct CertificateResult {
    pub status: CertStatus,
    /// Region-of-attraction box corner when certified.
    pub roa_box: Option<Vec<f64>>,
    pub witness: Option<Witness>,
    pub lyapunov: Option<MaxSepLyap>,
    /// Number of sampled `s` values (path) or 0.
    pub grid: usize,
    /// `min_{i,s} (-alpha_i(s) - f_i(rho(s)))` for paths, `min_i -f_i(w)` for `w`.
    pub min_margin: f64,
    /// Final state of the verifying trajectory, when one was run.
    pub terminal: Option<Vec<f64>>,
}

impl CertificateResult {
    pub fn certified(&self) -> bool {
        self.status == CertStatus::Certified
    }
}

/// Sample `s` on `[0, s_bar]` and check `f(rho(s)) <= -alpha(s)`.
pub fn certify_path<F: VectorField + ?Sized>(
    f: &F,
    path: &PathCandidate,
    grid: usize,
) -> Result<CertificateResult, CertError> {
    if path.dim() != f.dim() {
        return Err(CertError::Precondition(format!(
            "path has {} components, field has {}",
            path.dim(),
            f.dim()
        )));
    }
    path.validate(DENSE_GRID)?;
    let grid = grid.max(2);
    let n = f.dim();
    let mut fx = vec![0.0; n];
    let mut min_margin = f64::INFINITY;
    let mut witness: Option<(f64, Witness)> = None;
    for k in 0..grid {
        let s = path.s_bar() * k as f64 / (grid - 1) as f64;
        let x = path.rho_at(s)?;
        f.eval(&x, &mut fx)?;
        let alpha = path.alpha_at(s)?;
        for i in 0..n {
            let bound = -alpha[i];
            let slack = bound - fx[i];
            if k > 0 {
                min_margin = min_margin.min(slack);
            }
            let tol = PATH_TOL * alpha[i].abs().max(1.0);
            if fx[i] > bound + tol && witness.as_ref().is_none_or(|(w, _)| -slack > *w) {
                witness = Some((
                    -slack,
                    Witness::PathSample {
                        s,
                        component: i,
                        value: fx[i],
                        bound,
                    },
                ));
            }
        }
    }
    if let Some((_, w)) = witness {
        return Ok(CertificateResult {
            status: CertStatus::Rejected,
            roa_box: None,
            witness: Some(w),
            lyapunov: None,
            grid,
            min_margin,
            terminal: None,
        });
    }
    let corner = path.corner()?;
    let components = path
        .rho()
        .iter()
        .map(|rho| Component::inverse_path(rho.clone(), path.s_bar()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(CertificateResult {
        status: CertStatus::Certified,
        roa_box: Some(corner.clone()),
        witness: None,
        lyapunov: Some(MaxSepLyap::new(components, corner)?),
        grid,
        min_margin,
        terminal: None,
    })
}

/// `f(w) < 0` plus observed convergence of `x(t, w)`.
pub fn certify_by_w<F: VectorField + ?Sized>(
    f: &F,
    w: &[f64],
    cfg: &IntegratorConfig,
) -> Result<CertificateResult, CertError> {
    if w.len() != f.dim() {
        return Err(CertError::Precondition(format!(
            "w has {} components, field has {}",
            w.len(),
            f.dim()
        )));
    }
    if w.iter().any(|v| !(*v > 0.0)) {
        return Err(CertError::Precondition("w must be strictly positive".into()));
    }
    let fw = eval_field(f, w)?;
    let min_margin = fw.iter().fold(f64::INFINITY, |m, v| m.min(-v));
    if let Some((component, &value)) = fw.iter().enumerate().find(|(_, v)| !(**v < 0.0)) {
        return Ok(CertificateResult {
            status: CertStatus::Rejected,
            roa_box: None,
            witness: Some(Witness::NotNegative { component, value }),
            lyapunov: None,
            grid: 0,
            min_margin,
            terminal: None,
        });
    }
    let sim = integrate_ode(f, w, cfg)?;
    let terminal = sim.final_state().to_vec();
    if sim.verdict.is_convergent() {
        Ok(CertificateResult {
            status: CertStatus::Certified,
            roa_box: Some(w.to_vec()),
            witness: None,
            lyapunov: None,
            grid: 0,
            min_margin,
            terminal: Some(terminal),
        })
    } else {
        Ok(CertificateResult {
            status: CertStatus::Inconclusive,
            roa_box: None,
            witness: Some(Witness::Terminal {
                state: terminal.clone(),
                verdict: sim.verdict,
            }),
            lyapunov: None,
            grid: 0,
            min_margin,
            terminal: Some(terminal),
        })
    }
}

/// Outcome of [`search_w`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOutcome {
    pub w: Option<Vec<f64>>,
    pub certificate: Option<CertificateResult>,
    pub samples: usize,
}

/// Largest scaled violation `max_i f_i(w) / (1 + |w_i|)`; negative means
/// `f(w) < 0`.
fn score<F: VectorField + ?Sized>(f: &F, w: &[f64]) -> f64 {
    match eval_field(f, w) {
        Ok(fw) => fw
            .iter()
            .zip(w)
            .map(|(fi, wi)| fi / (1.0 + wi.abs()))
            .fold(f64::NEG_INFINITY, f64::max),
        Err(_) => f64::INFINITY,
    }
}

/// Random sampling plus coordinate descent for `w` in the box with
/// `f(w) < 0`, then bisection on `lambda` to push `lambda * w` outward, and
/// a final [`certify_by_w`] check.
pub fn search_w<F: VectorField + ?Sized>(
    f: &F,
    domain: &BoxSet,
    trials: usize,
    seed: u64,
    cfg: &IntegratorConfig,
) -> Result<SearchOutcome, CertError> {
    let n = f.dim();
    let upper = domain.upper();
    if upper.len() != n || !domain.is_positive() {
        return Err(CertError::Precondition("search box must be positive with matching dimension".into()));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for k in 0..trials.max(1) {
        let mut rng = seeding::stream(seed, k as u64);
        let w: Vec<f64> = upper
            .iter()
            .map(|v| seeding::uniform(&mut rng, 1e-3 * v, *v))
            .collect();
        let sc = score(f, &w);
        if best.as_ref().is_none_or(|(b, _)| sc < *b) {
            best = Some((sc, w));
        }
    }
    let Some((mut sc, mut w)) = best else {
        return Ok(SearchOutcome {
            w: None,
            certificate: None,
            samples: 0,
        });
    };
    // Coordinate descent on the score.
    let mut step = 0.25;
    while step > 1e-6 && sc >= 0.0 {
        let mut improved = false;
        for i in 0..n {
            for dir in [-1.0, 1.0] {
                let mut cand = w.clone();
                cand[i] = (cand[i] + dir * step * upper[i]).clamp(1e-6 * upper[i], upper[i]);
                let c = score(f, &cand);
                if c < sc {
                    sc = c;
                    w = cand;
                    improved = true;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    if sc >= 0.0 {
        return Ok(SearchOutcome {
            w: None,
            certificate: None,
            samples: trials,
        });
    }
    // Push outward along the ray through w while f stays negative.
    let lambda_max = upper
        .iter()
        .zip(&w)
        .map(|(v, wi)| v / wi)
        .fold(f64::INFINITY, f64::min);
    let ray = |l: f64| w.iter().map(|wi| wi * l).collect::<Vec<_>>();
    let mut lambda = if score(f, &ray(lambda_max)) < 0.0 {
        lambda_max
    } else {
        let (mut lo, mut hi) = (1.0, lambda_max);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if score(f, &ray(mid)) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    };
    // Certify, backing off toward the known-good point if needed.
    for _ in 0..8 {
        let cand = ray(lambda);
        let cert = certify_by_w(f, &cand, cfg)?;
        if cert.certified() {
            return Ok(SearchOutcome {
                w: Some(cand),
                certificate: Some(cert),
                samples: trials,
            });
        }
        if lambda <= 1.0 {
            break;
        }
        lambda = 1.0 + 0.5 * (lambda - 1.0);
    }
    Ok(SearchOutcome {
        w: None,
        certificate: None,
        samples: trials,
    })
}

/// Composed field `h(x) = psi(x, f(x))` with its cooperativity report.
#[derive(Debug, Clone)]
pub struct PsiTransform {
    pub field: ExprField,
    pub kamke: JacobianReport,
}

/// Per-component range of `f` over a grid of the box.
pub fn field_range<F: VectorField + ?Sized>(
    f: &F,
    domain: &BoxSet,
    grid: usize,
) -> Result<(Vec<f64>, Vec<f64>), EvalError> {
    let n = f.dim();
    let mut lo = vec![0.0_f64; n];
    let mut hi = vec![0.0_f64; n];
    let mut fx = vec![0.0; n];
    for x in domain.grid(domain.capped_resolution(grid, crate::monotone::MAX_GRID_POINTS)) {
        f.eval(&x, &mut fx)?;
        for i in 0..n {
            lo[i] = lo[i].min(fx[i]);
            hi[i] = hi[i].max(fx[i]);
        }
    }
    Ok((lo, hi))
}

/// Compose `psi` with `f` symbolically and rerun the Kamke check on `domain`.
pub fn apply_psi_transform(
    f: &ExprField,
    psi: &ScalingPsi,
    domain: &BoxSet,
) -> Result<PsiTransform, CertError> {
    let n = f.dim();
    if psi.dim() != n || domain.dim() != n {
        return Err(CertError::Precondition("psi, field and box dimensions differ".into()));
    }
    let (mut lo, mut hi) = field_range(f, domain, DEFAULT_GRID)?;
    for (l, h) in lo.iter_mut().zip(hi.iter_mut()) {
        if *h - *l < 1e-9 {
            *l -= 1.0;
            *h += 1.0;
        }
    }
    psi.validate(domain.upper(), &lo, &hi, 256)?;
    let comps: Vec<Expr> = psi
        .components()
        .iter()
        .map(|p| {
            p.substitute(&|v| match v {
                Var::Y(i) => Some(f.components()[i].clone()),
                _ => None,
            })
        })
        .collect();
    let sys = ExprSystem::new(n, comps, VariableRoles::State).map_err(ModelError::from)?;
    let field = ExprField::new(&sys)?;
    let kamke = check_kamke(&field, domain, DEFAULT_GRID)?;
    Ok(PsiTransform { field, kamke })
}
