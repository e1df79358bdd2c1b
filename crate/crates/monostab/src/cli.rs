//! Command-line front end.
//!
//! Exit codes: 0 for PASS / CERTIFIED, 1 for FAIL / REJECTED / INCONCLUSIVE,
//! 2 for usage, configuration, IO and numerical errors.

use std::fmt::Display;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::thread;

use clap::{Args, Parser, Subcommand, ValueEnum};
use monostab_core::certificates::{apply_psi_transform, certify_by_w, certify_path, search_w, CertificateResult, Witness, PATH_GRID};
use monostab_core::delay::{
    roa_under_delay_t2, roa_under_delay_t3, sweep_one, sweep_report, DelayError, SweepRow,
};
use monostab_core::homogeneity::{certify_non_monotone_positive, HomogError, NonMonotoneOptions, DEFAULT_BOUND_GRID};
use monostab_core::integrate::{integrate_dde, integrate_ode, Simulation};
use monostab_core::linear::{find_positive_w, is_metzler, linear_decay_rate, linear_max_sep_lyap, spectral_abscissa};
use monostab_core::lyapunov::{construct_from_trajectory, verify_decrease, MaxSepLyap, DEFAULT_MARGIN};
use monostab_core::model::LawCheck;
use monostab_core::monotone::{check_assumption2, check_kamke, check_monotone_empirical, Argument, JacobianReport, DEFAULT_GRID};
use monostab_core::seeding::DEFAULT_SEED;
use monostab_core::{BoxSet, DelayField, DelayLaw, IntegratorConfig, Status};

use crate::config::{Config, ConfigError, Dynamics};
use crate::report::{self, Format, Report, Value};

/// Grid per axis for the decrease check run after a certificate.
pub const DECREASE_GRID: usize = 64;
/// Rows per component in `--emit-lyap` tables.
pub const LYAP_TABLE_SAMPLES: usize = 201;

#[derive(Debug, Parser)]
#[command(name = "monostab", version, about = "Stability certificates for monotone systems")]
pub struct Cli {
    #[command(flatten)]
    pub opts: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Grid points per axis for sampled checks.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    /// Decrease margin for Lyapunov checks.
    #[arg(long, global = true, default_value_t = DEFAULT_MARGIN)]
    pub margin: f64,
    /// Master seed for randomized searches.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
    /// Integration horizon.
    #[arg(long, global = true, default_value_t = 200.0)]
    pub tend: f64,
    #[arg(long, global = true)]
    pub rtol: Option<f64>,
    #[arg(long, global = true)]
    pub atol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Path,
    W,
    Linear,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kamke condition for `f`, or the delayed order conditions for `g`.
    CheckMonotone {
        config: PathBuf,
        /// Also integrate this many random ordered pairs.
        #[arg(long, default_value_t = 0)]
        trials: usize,
    },
    /// Certify asymptotic stability and report a region-of-attraction box.
    Certify {
        config: PathBuf,
        #[arg(long, value_enum)]
        method: Method,
        /// Write the Lyapunov table as CSV.
        #[arg(long)]
        emit_lyap: Option<PathBuf>,
        /// Random samples for the `w` search when `w` is not given.
        #[arg(long, default_value_t = 2000)]
        trials: usize,
    },
    /// Integrate the system and optionally write the trajectory as CSV.
    Simulate {
        config: PathBuf,
        /// Delay law, e.g. `prop:0.5`, `const:2`, `sin:1,0.5,1`, `expr:0.5*t`.
        #[arg(long)]
        law: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the box-invariance check for every law in a file.
    Sweep {
        config: PathBuf,
        /// One law per line; blank lines and `#` comments are skipped.
        #[arg(long)]
        laws: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (default: available parallelism).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Build the monotone comparison system for `g = h + d` and check it
    /// dominates and stabilizes `g`.
    Compare {
        config: PathBuf,
        #[arg(long)]
        laws: Option<PathBuf>,
        /// Write the comparison tables as CSV.
        #[arg(long)]
        table: Option<PathBuf>,
    },
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Analysis(String),
}

fn analysis<E: Display>(e: E) -> CliError {
    CliError::Analysis(e.to_string())
}

fn io_error<E: Display>(path: &Path, e: E) -> CliError {
    CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

/// A finished command: what to print and how to exit.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub report: Report,
    pub code: u8,
}

impl Outcome {
    fn new(report: Report, ok: bool) -> Outcome {
        Outcome {
            report,
            code: if ok { 0 } else { 1 },
        }
    }
}

impl GlobalOpts {
    pub fn integrator(&self) -> Result<IntegratorConfig, CliError> {
        let mut cfg = IntegratorConfig::with_horizon(self.tend);
        if let Some(r) = self.rtol {
            cfg.rtol = r;
        }
        if let Some(a) = self.atol {
            cfg.atol = a;
        }
        cfg.validate()
            .map_err(|e| CliError::Usage(format!("--tend/--rtol/--atol: {e}")))?;
        Ok(cfg)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_error(path, e))
}

fn write_lyap_table(path: &Path, v: &MaxSepLyap) -> Result<(), CliError> {
    let mut out = create(path)?;
    report::write_lyapunov(&mut out, v, LYAP_TABLE_SAMPLES).map_err(|e| io_error(path, e))?;
    out.flush().map_err(|e| io_error(path, e))
}

/// Read a law file: one spec per line, `#` starts a comment.
pub fn read_laws(path: &Path) -> Result<Vec<DelayLaw>, CliError> {
    let src = std::fs::read_to_string(path).map_err(|e| io_error(path, e))?;
    let mut laws = Vec::new();
    for (k, line) in src.lines().enumerate() {
        let spec = line.split('#').next().unwrap_or("").trim();
        if spec.is_empty() {
            continue;
        }
        let err = |message: String| ConfigError {
            file: path.display().to_string(),
            line: Some(k + 1),
            message,
        };
        let law = DelayLaw::parse_spec(spec).map_err(|e| err(e.to_string()))?;
        law.validate(LawCheck::default()).map_err(|e| err(e.to_string()))?;
        laws.push(law);
    }
    Ok(laws)
}

pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let opts = &cli.opts;
    match &cli.command {
        Command::CheckMonotone { config, trials } => check_monotone(&Config::load(config)?, opts, *trials),
        Command::Certify {
            config,
            method,
            emit_lyap,
            trials,
        } => certify(&Config::load(config)?, opts, *method, emit_lyap.as_deref(), *trials),
        Command::Simulate { config, law, out } => simulate(&Config::load(config)?, opts, law.as_deref(), out.as_deref()),
        Command::Sweep {
            config,
            laws,
            out,
            threads,
        } => sweep(&Config::load(config)?, opts, laws, out.as_deref(), *threads),
        Command::Compare { config, laws, table } => {
            compare(&Config::load(config)?, opts, laws.as_deref(), table.as_deref())
        }
    }
}

/// Parse arguments, run, print, and map the result to an exit code.
pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(outcome) => {
            let text = outcome.report.render(cli.opts.format);
            let mut stdout = std::io::stdout().lock();
            if stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()).is_err() {
                return ExitCode::from(2);
            }
            ExitCode::from(outcome.code)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn jacobian_report(r: &mut Report, rep: &JacobianReport, name: &str) {
    r.str("status", rep.status.as_str())
        .str("jacobian", rep.source.as_str())
        .flag("reduced_confidence", rep.reduced_confidence)
        .int("grid", rep.grid_per_axis)
        .int("points", rep.points)
        .num("min_entry", rep.min_entry);
    if let Some(w) = &rep.witness {
        let arg = match w.wrt {
            Argument::X => "x",
            Argument::Y => "y",
        };
        r.str("witness_entry", format!("d {name}{}/d {arg}{}", w.row + 1, w.col + 1))
            .num("witness_value", w.value)
            .vec("witness_x", &w.x);
        if let Some(y) = &w.y {
            r.vec("witness_y", y);
        }
    }
}

fn check_monotone(cfg: &Config, opts: &GlobalOpts, trials: usize) -> Result<Outcome, CliError> {
    let mut r = Report::new("check-monotone");
    if let (Some(lin), None) = (&cfg.linear, &cfg.domain) {
        let a_ok = is_metzler(&lin.a);
        let b_ok = lin.b.as_ref().is_none_or(|b| b.is_nonnegative());
        r.str("condition", "metzler")
            .str("status", Status::from_bool(a_ok && b_ok).as_str())
            .flag("a_metzler", a_ok);
        if lin.b.is_some() {
            r.flag("b_nonnegative", b_ok);
        }
        return Ok(Outcome::new(r, a_ok && b_ok));
    }
    let domain = cfg.require_box("check-monotone")?;
    let grid = opts.grid.unwrap_or(DEFAULT_GRID);
    let mut ok = match &cfg.dynamics {
        Dynamics::Ode(f) => {
            r.str("condition", "kamke");
            let rep = check_kamke(&**f, domain, grid).map_err(analysis)?;
            jacobian_report(&mut r, &rep, "f");
            rep.status.passed()
        }
        Dynamics::Delay(g) => {
            r.str("condition", "assumption2");
            let rep = check_assumption2(&**g.map(), domain, grid).map_err(analysis)?;
            jacobian_report(&mut r, &rep, "g");
            rep.status.passed()
        }
    };
    if let (Some(psi), Some(f)) = (&cfg.psi, &cfg.f_expr) {
        let t = apply_psi_transform(f, psi, domain).map_err(analysis)?;
        r.str("psi_status", t.kamke.status.as_str())
            .num("psi_min_entry", t.kamke.min_entry);
        ok &= t.kamke.status.passed();
        if !t.kamke.status.passed() {
            r.set("status", Value::Str(Status::Fail.as_str().into()));
        }
    }
    if trials > 0 {
        let field = cfg.dynamics.field();
        let rep = check_monotone_empirical(&*field, domain, trials, opts.seed, &opts.integrator()?)
            .map_err(analysis)?;
        r.str("ordering_status", rep.status.as_str())
            .int("ordering_trials", rep.trials)
            .num("ordering_worst_gap", rep.worst_gap);
        ok &= rep.status.passed();
        if !rep.status.passed() {
            r.set("status", Value::Str(Status::Fail.as_str().into()));
        }
    }
    Ok(Outcome::new(r, ok))
}

fn certificate_report(r: &mut Report, cert: &CertificateResult) {
    r.str("status", cert.status.as_str());
    if let Some(b) = &cert.roa_box {
        r.vec("roa_box", b);
    }
    r.num("min_margin", cert.min_margin);
    if cert.grid > 0 {
        r.int("grid", cert.grid);
    }
    if let Some(t) = &cert.terminal {
        r.vec("terminal", t);
    }
    match &cert.witness {
        Some(Witness::PathSample {
            s,
            component,
            value,
            bound,
        }) => {
            r.str("witness", "path-sample")
                .num("witness_s", *s)
                .int("witness_component", component + 1)
                .num("witness_value", *value)
                .num("witness_bound", *bound);
        }
        Some(Witness::NotNegative { component, value }) => {
            r.str("witness", "f(w) not negative")
                .int("witness_component", component + 1)
                .num("witness_value", *value);
        }
        Some(Witness::Terminal { state, verdict }) => {
            r.str("witness", "trajectory from w")
                .str("witness_verdict", verdict.as_str())
                .vec("witness_state", state);
        }
        None => {}
    }
}

fn decrease_report(r: &mut Report, v: &MaxSepLyap, cfg: &Config, opts: &GlobalOpts, domain: &BoxSet) -> Result<(), CliError> {
    let field = cfg.dynamics.field();
    let grid = opts.grid.unwrap_or(DECREASE_GRID);
    let rep = verify_decrease(v, &*field, domain, grid, opts.margin).map_err(analysis)?;
    r.str("decrease_status", rep.status.as_str())
        .int("decrease_grid", rep.grid_per_axis)
        .int("decrease_violations", rep.violations)
        .num("decrease_min_ratio", rep.min_decay_ratio);
    Ok(())
}

fn delay_box_report(r: &mut Report, result: Result<BoxSet, DelayError>) {
    match result {
        Ok(b) => {
            r.vec("delay_roa_box", b.upper());
        }
        Err(e) => {
            r.str("delay_roa_box", format!("unavailable ({e})"));
        }
    }
}

fn certify(
    cfg: &Config,
    opts: &GlobalOpts,
    method: Method,
    emit_lyap: Option<&Path>,
    trials: usize,
) -> Result<Outcome, CliError> {
    let mut r = Report::new("certify");
    match method {
        Method::Path => {
            r.str("method", "path");
            let path = cfg.path.as_ref().ok_or_else(|| cfg.error("`[path]` is required for --method path"))?;
            let field = cfg.dynamics.field();
            let cert = certify_path(&*field, path, opts.grid.unwrap_or(PATH_GRID)).map_err(analysis)?;
            certificate_report(&mut r, &cert);
            if let (Some(v), Some(corner)) = (&cert.lyapunov, &cert.roa_box) {
                let domain = BoxSet::new(corner.clone()).map_err(analysis)?;
                decrease_report(&mut r, v, cfg, opts, &domain)?;
                if let Some(p) = emit_lyap {
                    write_lyap_table(p, v)?;
                    r.str("lyapunov_table", p.display().to_string());
                }
            }
            if let Dynamics::Delay(g) = &cfg.dynamics {
                if cert.certified() {
                    delay_box_report(&mut r, roa_under_delay_t2(g, path));
                }
            }
            Ok(Outcome::new(r, cert.certified()))
        }
        Method::W => {
            r.str("method", "w");
            let field = cfg.dynamics.field();
            let icfg = opts.integrator()?;
            let w = match &cfg.w {
                Some(w) => w.clone(),
                None => {
                    let domain = cfg.require_box("a `w` search")?;
                    let found = search_w(&*field, domain, trials, opts.seed, &icfg).map_err(analysis)?;
                    r.int("search_samples", found.samples);
                    match found.w {
                        Some(w) => w,
                        None => {
                            r.str("status", "INCONCLUSIVE").str("reason", "no w with f(w) < 0 found");
                            return Ok(Outcome::new(r, false));
                        }
                    }
                }
            };
            r.vec("w", &w);
            let cert = certify_by_w(&*field, &w, &icfg).map_err(analysis)?;
            certificate_report(&mut r, &cert);
            if cert.certified() {
                if let Some(p) = emit_lyap {
                    let cons = construct_from_trajectory(&*field, &w, &icfg).map_err(analysis)?;
                    write_lyap_table(p, &cons.lyapunov)?;
                    r.str("lyapunov_table", p.display().to_string());
                }
                if let Dynamics::Delay(g) = &cfg.dynamics {
                    delay_box_report(&mut r, roa_under_delay_t3(g, &w, &icfg));
                }
            }
            Ok(Outcome::new(r, cert.certified()))
        }
        Method::Linear => {
            r.str("method", "linear");
            let lin = cfg
                .linear
                .as_ref()
                .ok_or_else(|| cfg.error("`[linear]` is required for --method linear"))?;
            let m = lin.combined();
            let abscissa = spectral_abscissa(&m).map_err(analysis)?;
            if !is_metzler(&m) {
                r.str("status", "REJECTED")
                    .str("reason", "system matrix is not Metzler")
                    .num("spectral_abscissa", abscissa);
                return Ok(Outcome::new(r, false));
            }
            match find_positive_w(&m).map_err(analysis)? {
                Some(w) => {
                    let v = linear_max_sep_lyap(&m, &w).map_err(analysis)?;
                    r.str("status", "CERTIFIED")
                        .vec("w", &w)
                        .vec("roa_box", &w)
                        .num("decay_rate", linear_decay_rate(&m, &w))
                        .num("spectral_abscissa", abscissa);
                    if let Some(p) = emit_lyap {
                        write_lyap_table(p, &v)?;
                        r.str("lyapunov_table", p.display().to_string());
                    }
                    Ok(Outcome::new(r, true))
                }
                None => {
                    r.str("status", "REJECTED")
                        .str("reason", "no w > 0 with Mw < 0")
                        .num("spectral_abscissa", abscissa);
                    Ok(Outcome::new(r, false))
                }
            }
        }
    }
}

fn simulation_report(r: &mut Report, sim: &Simulation, t_end: f64) {
    r.str("verdict", sim.verdict.as_str())
        .num("t_end", t_end)
        .num("terminal_norm", sim.terminal_norm)
        .num("max_excursion", sim.max_excursion);
    if let Some(t) = sim.verdict.t_converge() {
        r.num("t_converge", t);
    }
    r.vec("final_state", sim.final_state())
        .int("accepted_steps", sim.accepted_steps)
        .int("rejected_steps", sim.rejected_steps);
}

fn simulate(cfg: &Config, opts: &GlobalOpts, law: Option<&str>, out: Option<&Path>) -> Result<Outcome, CliError> {
    let icfg = opts.integrator()?;
    let mut r = Report::new("simulate");
    let sim = match &cfg.dynamics {
        Dynamics::Ode(f) => {
            if law.is_some() {
                return Err(CliError::Usage("--law needs a delayed system (`g`)".into()));
            }
            integrate_ode(&**f, &cfg.initial_state()?, &icfg).map_err(analysis)?
        }
        Dynamics::Delay(g) => {
            let g = match law {
                Some(spec) => {
                    let law = DelayLaw::parse_spec(spec).map_err(analysis)?;
                    let g = g.with_law(law.clone()).map_err(analysis)?;
                    r.str("law", law.to_string());
                    g
                }
                None => g.clone(),
            };
            r.num("tau_max", g.tau_max());
            integrate_dde(&g, &cfg.initial_history()?, &icfg).map_err(analysis)?
        }
    };
    simulation_report(&mut r, &sim, icfg.t_end);
    if let Some(p) = out {
        let mut w = create(p)?;
        report::write_trajectory(&mut w, &sim.trajectory).map_err(|e| io_error(p, e))?;
        w.flush().map_err(|e| io_error(p, e))?;
        r.str("trajectory", p.display().to_string());
    }
    Ok(Outcome::new(r, sim.verdict.is_convergent()))
}

/// Run `sweep_one` for every law on a pool of scoped threads; rows come back
/// in law order whatever the scheduling.
pub fn parallel_sweep(
    g: &DelayField,
    domain: &BoxSet,
    laws: &[DelayLaw],
    phi: &monostab_core::InitialHistory,
    cfg: &IntegratorConfig,
    threads: usize,
) -> Result<Vec<SweepRow>, DelayError> {
    let threads = threads.clamp(1, laws.len().max(1));
    let mut slots: Vec<Option<Result<SweepRow, DelayError>>> = vec![None; laws.len()];
    thread::scope(|s| {
        let workers: Vec<_> = (0..threads)
            .map(|tid| {
                s.spawn(move || {
                    (tid..laws.len())
                        .step_by(threads)
                        .map(|k| (k, sweep_one(g, domain, &laws[k], phi, cfg)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for worker in workers {
            for (k, row) in worker.join().expect("sweep worker panicked") {
                slots[k] = Some(row);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every law is assigned")).collect()
}

fn default_threads() -> usize {
    thread::available_parallelism().map_or(1, |n| n.get())
}

fn sweep(
    cfg: &Config,
    opts: &GlobalOpts,
    laws_path: &Path,
    out: Option<&Path>,
    threads: Option<usize>,
) -> Result<Outcome, CliError> {
    let Dynamics::Delay(g) = &cfg.dynamics else {
        return Err(cfg.error("sweep needs a delayed system (`g`)").into());
    };
    let laws = read_laws(laws_path)?;
    let icfg = opts.integrator()?;
    let domain = cfg.require_box("sweep")?;
    let phi = cfg.initial_history()?;
    let rows = parallel_sweep(g, domain, &laws, &phi, &icfg, threads.unwrap_or_else(default_threads))
        .map_err(analysis)?;
    let rep = sweep_report(rows);
    let mut r = Report::new("sweep");
    r.str("status", rep.status.as_str())
        .int("laws", rep.rows.len())
        .int("converged", rep.rows.iter().filter(|row| row.converged()).count());
    for (k, row) in rep.rows.iter().enumerate() {
        let key = |field: &str| format!("law{}.{field}", k + 1);
        r.str(&key("id"), row.law.to_string())
            .str(&key("verdict"), row.report.verdict.as_str())
            .str(&key("invariance"), row.report.status.as_str())
            .num(&key("max_overshoot"), row.report.max_overshoot)
            .num(&key("terminal_norm"), row.report.terminal_norm);
    }
    if let Some(p) = out {
        let mut w = create(p)?;
        report::write_sweep(&mut w, &rep.rows).map_err(|e| io_error(p, e))?;
        w.flush().map_err(|e| io_error(p, e))?;
        r.str("report", p.display().to_string());
    }
    Ok(Outcome::new(r, rep.status.passed()))
}

fn compare(cfg: &Config, opts: &GlobalOpts, laws: Option<&Path>, table: Option<&Path>) -> Result<Outcome, CliError> {
    let cmp = cfg
        .comparison
        .as_ref()
        .ok_or_else(|| cfg.error("`[comparison]` is required for compare"))?;
    let domain = cfg.require_box("compare")?;
    let laws = match laws {
        Some(p) => read_laws(p)?,
        None => vec![DelayLaw::zero()],
    };
    let icfg = opts.integrator()?;
    let nm = NonMonotoneOptions {
        grid: opts.grid.unwrap_or(DEFAULT_BOUND_GRID),
        seed: opts.seed,
        ..NonMonotoneOptions::default()
    };
    let mut r = Report::new("compare");
    r.num("degree", cmp.degree);
    let rep = match certify_non_monotone_positive(
        cmp.h.clone(),
        cmp.d.clone(),
        cmp.degree,
        domain,
        &laws,
        cfg.history.as_ref(),
        &icfg,
        &nm,
    ) {
        Ok(rep) => rep,
        Err(
            e @ (HomogError::NegativityFailed { .. }
            | HomogError::Assumption3Violated { .. }
            | HomogError::CertificationFailed(_)),
        ) => {
            r.str("status", Status::Fail.as_str()).str("reason", e.to_string());
            return Ok(Outcome::new(r, false));
        }
        Err(e) => return Err(analysis(e)),
    };
    r.str("status", rep.status.as_str())
        .vec("w", &rep.w)
        .num("dominating_margin", rep.assumption3.dominating_margin)
        .int("bound_nodes_per_axis", rep.bound.nodes_per_axis());
    for (k, row) in rep.rows.iter().enumerate() {
        let key = |field: &str| format!("law{}.{field}", k + 1);
        r.str(&key("id"), row.law.to_string())
            .str(&key("status"), row.status.as_str())
            .str(&key("verdict"), row.verdict.as_str())
            .str(&key("bound_verdict"), row.bound_verdict.as_str())
            .num(&key("domination_gap"), row.domination_gap)
            .num(&key("min_component"), row.min_component);
    }
    if let Some(p) = table {
        let mut w = create(p)?;
        report::write_bound(&mut w, &rep.bound).map_err(|e| io_error(p, e))?;
        w.flush().map_err(|e| io_error(p, e))?;
        r.str("bound_table", p.display().to_string());
    }
    Ok(Outcome::new(r, rep.status.passed()))
}
