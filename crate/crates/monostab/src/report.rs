//! Report rendering and CSV export.
//!
//! Text reports round numbers to 6 significant digits; CSV output keeps 17.

use std::fmt::Write as _;
use std::io::{self, Write};

use monostab_core::delay::SweepRow;
use monostab_core::homogeneity::ComparisonBound;
use monostab_core::lyapunov::MaxSepLyap;
use monostab_core::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Text,
    Csv,
}

/// `%g`-style rendering with `digits` significant digits.
pub fn fmt_sig(v: f64, digits: usize) -> String {
    if v.is_nan() {
        return "nan".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if v == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, v);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{}{:02}", trim_zeros(mantissa), if exp < 0 { '-' } else { '+' }, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{v:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Full-precision rendering for CSV (17 significant digits).
pub fn fmt_full(v: f64) -> String {
    if v == 0.0 {
        "0.0000000000000000e0".into()
    } else if v.is_finite() {
        format!("{v:.16e}")
    } else {
        fmt_sig(v, 1)
    }
}

fn fmt_num(v: f64, format: Format) -> String {
    match format {
        Format::Text => fmt_sig(v, 6),
        Format::Csv => fmt_full(v),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Str(String),
    Num(f64),
    Int(u64),
    Vec(Vec<f64>),
    Flag(bool),
}

/// Ordered key/value report printed to stdout.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Report {
    rows: Vec<(String, Value)>,
}

impl Report {
    pub fn new(command: &str) -> Report {
        let mut r = Report::default();
        r.str("command", command);
        r
    }

    pub fn push(&mut self, key: &str, value: Value) -> &mut Self {
        self.rows.push((key.to_string(), value));
        self
    }

    pub fn str(&mut self, key: &str, v: impl Into<String>) -> &mut Self {
        self.push(key, Value::Str(v.into()))
    }

    pub fn num(&mut self, key: &str, v: f64) -> &mut Self {
        self.push(key, Value::Num(v))
    }

    pub fn int(&mut self, key: &str, v: usize) -> &mut Self {
        self.push(key, Value::Int(v as u64))
    }

    pub fn vec(&mut self, key: &str, v: &[f64]) -> &mut Self {
        self.push(key, Value::Vec(v.to_vec()))
    }

    pub fn flag(&mut self, key: &str, v: bool) -> &mut Self {
        self.push(key, Value::Flag(v))
    }

    /// Replaces the first row with `key`, or appends one.
    pub fn set(&mut self, key: &str, value: Value) -> &mut Self {
        match self.rows.iter_mut().find(|(k, _)| k == key) {
            Some((_, v)) => *v = value,
            None => self.rows.push((key.to_string(), value)),
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.rows.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    fn render_value(v: &Value, format: Format) -> String {
        match v {
            Value::Str(s) => s.clone(),
            Value::Num(x) => fmt_num(*x, format),
            Value::Int(i) => i.to_string(),
            Value::Vec(xs) => xs.iter().map(|x| fmt_num(*x, format)).collect::<Vec<_>>().join(" "),
            Value::Flag(b) => b.to_string(),
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Text => {
                let width = self.rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
                let mut out = String::new();
                for (k, v) in &self.rows {
                    let _ = writeln!(out, "{k:<width$}  {}", Self::render_value(v, format));
                }
                out
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["key", "value"]).expect("in-memory write");
                for (k, v) in &self.rows {
                    w.write_record([k.as_str(), &Self::render_value(v, format)])
                        .expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
            }
        }
    }
}

/// `t,x1,...,xn` at every accepted step.
pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.dim()).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (t, x) in traj.iter() {
        let mut row = vec![fmt_full(t)];
        row.extend(x.iter().map(|v| fmt_full(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `i,x_i,V_i,dV_i` on `samples` points per component; `i` starts at 1.
pub fn write_lyapunov<W: Write>(out: W, v: &MaxSepLyap, samples: usize) -> Result<(), ExportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["i", "x_i", "V_i", "dV_i"])?;
    for (i, x, vi, dvi) in v.table(samples).map_err(|e| ExportError::Eval(e.to_string()))? {
        w.write_record([(i + 1).to_string(), fmt_full(x), fmt_full(vi), fmt_full(dvi)])?;
    }
    w.flush()?;
    Ok(())
}

/// `law_id,converged,t_converge,max_excursion,terminal_norm`; `t_converge`
/// is empty when the run did not settle below the threshold.
pub fn write_sweep<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["law_id", "converged", "t_converge", "max_excursion", "terminal_norm"])?;
    for row in rows {
        w.write_record([
            row.law.to_string(),
            row.converged().to_string(),
            row.report.t_converge.map(fmt_full).unwrap_or_default(),
            fmt_full(row.report.max_excursion),
            fmt_full(row.report.terminal_norm),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `i,x1,...,xn,H,D`: the prefix-max tables behind the comparison field.
pub fn write_bound<W: Write>(out: W, bound: &ComparisonBound) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = bound.upper().len();
    let mut header = vec!["i".to_string()];
    header.extend((1..=n).map(|j| format!("x{j}")));
    header.extend(["H".to_string(), "D".to_string()]);
    w.write_record(&header)?;
    for (i, node, h, d) in bound.table() {
        let mut row = vec![(i + 1).to_string()];
        row.extend(node.iter().map(|v| fmt_full(*v)));
        row.extend([fmt_full(h), fmt_full(d)]);
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("evaluation failed: {0}")]
    Eval(String),
}
