//! System configuration files.
//!
//! A config is a TOML document. Every error carries the file name and, when
//! the offending key can be located, its line.

use std::fmt;
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use monostab_core::homogeneity::SplitDelayMap;
use monostab_core::linear::{LinearDelayMap, LinearField, Matrix};
use monostab_core::model::LawCheck;
use monostab_core::{
    parse, BoxSet, DelayAssignment, DelayField, DelayLaw, DelayMap, ExprDelayMap, ExprField,
    InitialHistory, PathCandidate, ScalingPsi, VectorField,
};
use serde::Deserialize;
use toml::Spanned;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub file: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "{}:{}: {}", self.file, line, self.message),
            None => write!(f, "{}: {}", self.file, self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    dimension: Spanned<usize>,
    f: Option<Spanned<Vec<String>>>,
    g: Option<Spanned<Vec<String>>>,
    #[serde(rename = "box")]
    domain: Option<Spanned<Vec<f64>>>,
    w: Option<Spanned<Vec<f64>>>,
    x0: Option<Spanned<Vec<f64>>>,
    psi: Option<Spanned<Vec<String>>>,
    delay: Option<Spanned<RawDelay>>,
    path: Option<Spanned<RawPath>>,
    history: Option<Spanned<RawHistory>>,
    linear: Option<Spanned<RawLinear>>,
    comparison: Option<Spanned<RawComparison>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDelay {
    kind: Option<Spanned<String>>,
    params: Option<Spanned<Vec<f64>>>,
    expr: Option<Spanned<String>>,
    laws: Option<Spanned<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPath {
    rho: Spanned<Vec<String>>,
    sbar: Spanned<f64>,
    alpha: Option<Spanned<Vec<String>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawHistory {
    kind: Spanned<String>,
    values: Option<Spanned<Vec<f64>>>,
    expr: Option<Spanned<Vec<String>>>,
    times: Option<Spanned<Vec<f64>>>,
    samples: Option<Spanned<Vec<Vec<f64>>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLinear {
    #[serde(rename = "A")]
    a: Spanned<Vec<Vec<f64>>>,
    #[serde(rename = "B")]
    b: Option<Spanned<Vec<Vec<f64>>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawComparison {
    h: Spanned<Vec<String>>,
    d: Spanned<Vec<String>>,
    degree: Option<Spanned<f64>>,
}

/// Where the dynamics came from.
#[derive(Clone)]
pub enum Dynamics {
    /// `f = [...]`, or `[linear]` without `B`.
    Ode(Arc<dyn VectorField>),
    /// `g = [...]`, `[comparison]`, or `[linear]` with `B`.
    Delay(DelayField),
}

impl Dynamics {
    /// The delay-free field (`g(x, x)` for delayed systems).
    pub fn field(&self) -> Arc<dyn VectorField> {
        match self {
            Dynamics::Ode(f) => f.clone(),
            Dynamics::Delay(g) => Arc::new(g.induced()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Dynamics::Ode(f) => f.dim(),
            Dynamics::Delay(g) => g.dim(),
        }
    }
}

impl fmt::Debug for Dynamics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dynamics::Ode(field) => write!(f, "Ode(dim {})", field.dim()),
            Dynamics::Delay(g) => write!(f, "Delay({g:?})"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSpec {
    pub a: Matrix,
    pub b: Option<Matrix>,
}

impl LinearSpec {
    /// `A + B`, the delay-free system matrix.
    pub fn combined(&self) -> Matrix {
        match &self.b {
            Some(b) => self.a.add(b).expect("dimensions checked at load"),
            None => self.a.clone(),
        }
    }
}

#[derive(Clone)]
pub struct Comparison {
    pub h: Arc<dyn VectorField>,
    pub d: Arc<dyn VectorField>,
    pub degree: f64,
}

impl fmt::Debug for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Comparison").field("degree", &self.degree).finish()
    }
}

#[derive(Debug, Clone)]
pub struct Config {
    pub file: String,
    pub dimension: usize,
    pub dynamics: Dynamics,
    /// The parsed `f`, kept for the `psi` transform.
    pub f_expr: Option<ExprField>,
    pub domain: Option<BoxSet>,
    pub w: Option<Vec<f64>>,
    pub x0: Option<Vec<f64>>,
    pub psi: Option<ScalingPsi>,
    pub path: Option<PathCandidate>,
    pub history: Option<InitialHistory>,
    pub linear: Option<LinearSpec>,
    pub comparison: Option<Comparison>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, ConfigError> {
        let file = path.display().to_string();
        let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
            file: file.clone(),
            line: None,
            message: e.to_string(),
        })?;
        Config::parse_str(&src, &file)
    }

    /// Parse `src`; `file` is used in error messages.
    pub fn parse_str(src: &str, file: &str) -> Result<Config, ConfigError> {
        let cx = Cx { src, file };
        let raw: RawConfig = toml::from_str(src).map_err(|e| ConfigError {
            file: file.to_string(),
            line: e.span().map(|s| line_of(src, s.start)),
            message: e.message().trim().to_string(),
        })?;
        cx.build(raw)
    }

    /// The configured box, or an error naming what needed it.
    pub fn require_box(&self, purpose: &str) -> Result<&BoxSet, ConfigError> {
        self.domain.as_ref().ok_or_else(|| ConfigError {
            file: self.file.clone(),
            line: None,
            message: format!("`box` is required for {purpose}"),
        })
    }

    /// Error attributed to this config without a line.
    pub fn error(&self, message: impl Into<String>) -> ConfigError {
        ConfigError {
            file: self.file.clone(),
            line: None,
            message: message.into(),
        }
    }

    /// Initial state for delay-free runs: `x0`, else the box corner.
    pub fn initial_state(&self) -> Result<Vec<f64>, ConfigError> {
        self.x0
            .clone()
            .or_else(|| self.domain.as_ref().map(|b| b.upper().to_vec()))
            .ok_or_else(|| self.error("an initial state needs `x0` or `box`"))
    }

    /// Initial history for delayed runs: `[history]`, else constant `x0`,
    /// else the constant box corner.
    pub fn initial_history(&self) -> Result<InitialHistory, ConfigError> {
        match &self.history {
            Some(h) => Ok(h.clone()),
            None => Ok(InitialHistory::Constant(self.initial_state()?)),
        }
    }
}

fn line_of(src: &str, offset: usize) -> usize {
    src.as_bytes()[..offset.min(src.len())]
        .iter()
        .filter(|b| **b == b'\n')
        .count()
        + 1
}

struct Cx<'a> {
    src: &'a str,
    file: &'a str,
}

impl Cx<'_> {
    fn err(&self, span: Range<usize>, message: impl fmt::Display) -> ConfigError {
        ConfigError {
            file: self.file.to_string(),
            line: Some(line_of(self.src, span.start)),
            message: message.to_string(),
        }
    }

    fn expect_len<T>(&self, v: &Spanned<Vec<T>>, key: &str, n: usize) -> Result<(), ConfigError> {
        let found = v.get_ref().len();
        if found != n {
            return Err(self.err(v.span(), format!("`{key}` has {found} entries, expected {n}")));
        }
        Ok(())
    }

    fn positive_vec(&self, v: &Spanned<Vec<f64>>, key: &str, n: usize) -> Result<Vec<f64>, ConfigError> {
        self.expect_len(v, key, n)?;
        if v.get_ref().iter().any(|x| !(*x > 0.0 && x.is_finite())) {
            return Err(self.err(v.span(), format!("`{key}` entries must be positive and finite")));
        }
        Ok(v.get_ref().clone())
    }

    fn matrix(&self, m: &Spanned<Vec<Vec<f64>>>, key: &str, n: usize) -> Result<Matrix, ConfigError> {
        let rows = m.get_ref();
        if rows.len() != n || rows.iter().any(|r| r.len() != n) {
            return Err(self.err(m.span(), format!("`{key}` must be a {n}x{n} matrix")));
        }
        Matrix::from_rows(rows).map_err(|e| self.err(m.span(), e))
    }

    fn build(&self, raw: RawConfig) -> Result<Config, ConfigError> {
        let n = *raw.dimension.get_ref();
        if n == 0 {
            return Err(self.err(raw.dimension.span(), "`dimension` must be positive"));
        }

        let linear = raw
            .linear
            .as_ref()
            .map(|l| -> Result<LinearSpec, ConfigError> {
                let l = l.get_ref();
                Ok(LinearSpec {
                    a: self.matrix(&l.a, "A", n)?,
                    b: l.b.as_ref().map(|b| self.matrix(b, "B", n)).transpose()?,
                })
            })
            .transpose()?;

        let comparison = raw
            .comparison
            .as_ref()
            .map(|c| -> Result<Comparison, ConfigError> {
                let c = c.get_ref();
                let part = |v: &Spanned<Vec<String>>, key: &str| -> Result<Arc<dyn VectorField>, ConfigError> {
                    self.expect_len(v, key, n)?;
                    let f = ExprField::parse(v.get_ref()).map_err(|e| self.err(v.span(), format!("`{key}`: {e}")))?;
                    Ok(Arc::new(f))
                };
                let degree = match &c.degree {
                    Some(p) if !p.get_ref().is_finite() || *p.get_ref() <= 0.0 => {
                        return Err(self.err(p.span(), "`degree` must be positive"))
                    }
                    Some(p) => *p.get_ref(),
                    None => 1.0,
                };
                Ok(Comparison {
                    h: part(&c.h, "h")?,
                    d: part(&c.d, "d")?,
                    degree,
                })
            })
            .transpose()?;

        let delays = raw.delay.as_ref().map(|d| self.delays(d, n)).transpose()?;

        let mut f_expr = None;
        let dynamics = match (&raw.f, &raw.g) {
            (Some(f), Some(g)) => {
                let at = f.span().start.min(g.span().start);
                return Err(self.err(at..at, "give either `f` or `g`, not both"));
            }
            (Some(f), None) => {
                self.expect_len(f, "f", n)?;
                if let Some(d) = &raw.delay {
                    return Err(self.err(d.span(), "`[delay]` needs a delayed system `g`"));
                }
                let field = ExprField::parse(f.get_ref()).map_err(|e| self.err(f.span(), format!("`f`: {e}")))?;
                f_expr = Some(field.clone());
                Dynamics::Ode(Arc::new(field))
            }
            (None, Some(g)) => {
                self.expect_len(g, "g", n)?;
                let map = ExprDelayMap::parse(g.get_ref()).map_err(|e| self.err(g.span(), format!("`g`: {e}")))?;
                self.delay_field(Arc::new(map), delays, raw.delay.as_ref().map(Spanned::span))?
            }
            (None, None) => {
                if let Some(c) = &comparison {
                    let split = SplitDelayMap::new(c.h.clone(), c.d.clone()).map_err(|e| {
                        self.err(raw.comparison.as_ref().map(Spanned::span).unwrap_or(0..0), e)
                    })?;
                    self.delay_field(Arc::new(split), delays, raw.delay.as_ref().map(Spanned::span))?
                } else if let Some(l) = &linear {
                    let span = raw.linear.as_ref().map(Spanned::span).unwrap_or(0..0);
                    match &l.b {
                        Some(b) => {
                            let map = LinearDelayMap::new(l.a.clone(), b.clone()).map_err(|e| self.err(span.clone(), e))?;
                            self.delay_field(Arc::new(map), delays, Some(span))?
                        }
                        None => Dynamics::Ode(Arc::new(LinearField(l.a.clone()))),
                    }
                } else {
                    return Err(ConfigError {
                        file: self.file.to_string(),
                        line: None,
                        message: "no dynamics: give `f`, `g`, `[linear]` or `[comparison]`".into(),
                    });
                }
            }
        };

        let domain = raw
            .domain
            .as_ref()
            .map(|b| {
                let v = self.positive_vec(b, "box", n)?;
                BoxSet::new(v).map_err(|e| self.err(b.span(), e))
            })
            .transpose()?;
        let w = raw.w.as_ref().map(|w| self.positive_vec(w, "w", n)).transpose()?;
        let x0 = raw
            .x0
            .as_ref()
            .map(|x| {
                self.expect_len(x, "x0", n)?;
                if x.get_ref().iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
                    return Err(self.err(x.span(), "`x0` must be nonnegative and finite"));
                }
                Ok(x.get_ref().clone())
            })
            .transpose()?;
        let psi = raw
            .psi
            .as_ref()
            .map(|p| {
                if f_expr.is_none() {
                    return Err(self.err(p.span(), "`psi` needs an expression field `f`"));
                }
                self.expect_len(p, "psi", n)?;
                ScalingPsi::parse(p.get_ref()).map_err(|e| self.err(p.span(), format!("`psi`: {e}")))
            })
            .transpose()?;
        let path = raw.path.as_ref().map(|p| self.path(p.get_ref(), n)).transpose()?;
        let history = raw.history.as_ref().map(|h| self.history(h, n)).transpose()?;

        Ok(Config {
            file: self.file.to_string(),
            dimension: n,
            dynamics,
            f_expr,
            domain,
            w,
            x0,
            psi,
            path,
            history,
            linear,
            comparison,
        })
    }

    fn delay_field(
        &self,
        map: Arc<dyn DelayMap>,
        delays: Option<DelayAssignment>,
        span: Option<Range<usize>>,
    ) -> Result<Dynamics, ConfigError> {
        let delays = delays.unwrap_or(DelayAssignment::Shared(DelayLaw::zero()));
        let g = DelayField::new(map, delays).map_err(|e| match span {
            Some(s) => self.err(s, e),
            None => ConfigError {
                file: self.file.to_string(),
                line: None,
                message: e.to_string(),
            },
        })?;
        Ok(Dynamics::Delay(g))
    }

    fn delays(&self, d: &Spanned<RawDelay>, n: usize) -> Result<DelayAssignment, ConfigError> {
        let raw = d.get_ref();
        if let Some(laws) = &raw.laws {
            if raw.kind.is_some() || raw.params.is_some() || raw.expr.is_some() {
                return Err(self.err(laws.span(), "`laws` cannot be combined with `kind`"));
            }
            self.expect_len(laws, "laws", n * n)?;
            let parsed = laws
                .get_ref()
                .iter()
                .map(|s| self.law_spec(s, laws.span()))
                .collect::<Result<Vec<_>, _>>()?;
            return Ok(DelayAssignment::PerPair(parsed));
        }
        let kind = raw
            .kind
            .as_ref()
            .ok_or_else(|| self.err(d.span(), "`[delay]` needs `kind` or `laws`"))?;
        let params = || -> Result<&[f64], ConfigError> {
            raw.params
                .as_ref()
                .map(|p| p.get_ref().as_slice())
                .ok_or_else(|| self.err(kind.span(), format!("delay kind `{}` needs `params`", kind.get_ref())))
        };
        let arity = |k: usize| -> Result<&[f64], ConfigError> {
            let p = params()?;
            if p.len() != k {
                let span = raw.params.as_ref().map(Spanned::span).unwrap_or(kind.span());
                return Err(self.err(span, format!("delay kind `{}` takes {k} parameter(s)", kind.get_ref())));
            }
            Ok(p)
        };
        let law = match kind.get_ref().as_str() {
            "none" => DelayLaw::zero(),
            "const" => DelayLaw::Constant(arity(1)?[0]),
            "sin" => {
                let p = arity(3)?;
                DelayLaw::Sinusoid {
                    a: p[0],
                    b: p[1],
                    omega: p[2],
                }
            }
            "prop" => DelayLaw::Proportional(arity(1)?[0]),
            "expr" => {
                let e = raw
                    .expr
                    .as_ref()
                    .ok_or_else(|| self.err(kind.span(), "delay kind `expr` needs `expr`"))?;
                let parsed = parse(e.get_ref()).map_err(|err| self.err(e.span(), err))?;
                DelayLaw::from_expr(parsed).map_err(|err| self.err(e.span(), err))?
            }
            other => return Err(self.err(kind.span(), format!("unknown delay kind `{other}`"))),
        };
        law.validate(LawCheck::default()).map_err(|e| self.err(d.span(), e))?;
        Ok(DelayAssignment::Shared(law))
    }

    fn law_spec(&self, s: &str, span: Range<usize>) -> Result<DelayLaw, ConfigError> {
        let law = DelayLaw::parse_spec(s).map_err(|e| self.err(span.clone(), e))?;
        law.validate(LawCheck::default()).map_err(|e| self.err(span, e))?;
        Ok(law)
    }

    fn path(&self, p: &RawPath, n: usize) -> Result<PathCandidate, ConfigError> {
        self.expect_len(&p.rho, "path.rho", n)?;
        if let Some(a) = &p.alpha {
            self.expect_len(a, "path.alpha", n)?;
        }
        let alpha = p.alpha.as_ref().map(|a| a.get_ref().as_slice());
        PathCandidate::parse(p.rho.get_ref(), *p.sbar.get_ref(), alpha)
            .map_err(|e| self.err(p.rho.span(), format!("`path`: {e}")))
    }

    fn history(&self, h: &Spanned<RawHistory>, n: usize) -> Result<InitialHistory, ConfigError> {
        let raw = h.get_ref();
        let missing = |key: &str| self.err(raw.kind.span(), format!("history kind `{}` needs `{key}`", raw.kind.get_ref()));
        let history = match raw.kind.get_ref().as_str() {
            "constant" => {
                let v = raw.values.as_ref().ok_or_else(|| missing("values"))?;
                self.expect_len(v, "history.values", n)?;
                InitialHistory::Constant(v.get_ref().clone())
            }
            "expr" => {
                let e = raw.expr.as_ref().ok_or_else(|| missing("expr"))?;
                self.expect_len(e, "history.expr", n)?;
                let parsed = e
                    .get_ref()
                    .iter()
                    .map(|s| parse(s).map_err(|err| self.err(e.span(), err)))
                    .collect::<Result<Vec<_>, _>>()?;
                InitialHistory::Expr(parsed)
            }
            "piecewise" => {
                let times = raw.times.as_ref().ok_or_else(|| missing("times"))?;
                let samples = raw.samples.as_ref().ok_or_else(|| missing("samples"))?;
                if samples.get_ref().iter().any(|s| s.len() != n) {
                    return Err(self.err(samples.span(), format!("every history sample needs {n} values")));
                }
                InitialHistory::Piecewise {
                    times: times.get_ref().clone(),
                    values: samples.get_ref().clone(),
                }
            }
            other => return Err(self.err(raw.kind.span(), format!("unknown history kind `{other}`"))),
        };
        history.validate(0.0).map_err(|e| self.err(h.span(), e))?;
        Ok(history)
    }
}
