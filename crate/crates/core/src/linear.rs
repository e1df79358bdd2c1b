//! Linear positive systems: Metzler and Hurwitz tests, the `Aw < 0` linear
//! program, linear max-separable Lyapunov functions, diagonal-scaling
//! robustness and linear delay systems `x' = Ax + By(t - tau)`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

use crate::expr::EvalError;
use crate::integrate::{integrate_dde, IntegrateError, IntegratorConfig, Verdict};
use crate::lyapunov::MaxSepLyap;
use crate::model::{DelayAssignment, DelayField, DelayLaw, DelayMap, InitialHistory, ModelError, VectorField};
use crate::seeding;
use crate::Status;

/// Off-diagonal entries above `-METZLER_TOL` count as nonnegative.
pub const METZLER_TOL: f64 = 1e-12;
/// Hurwitz means spectral abscissa below `-HURWITZ_TOL`.
pub const HURWITZ_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LinearError {
    #[error("matrix must be square and non-empty")]
    NotSquare,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("QR iteration did not converge")]
    EigenFailure,
    #[error("linear program failed numerically: {0}")]
    LpNumericalFailure(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Integrate(#[from] IntegrateError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Dense square matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    n: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(n: usize) -> Self {
        Matrix {
            n,
            data: vec![0.0; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, LinearError> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(LinearError::NotSquare);
        }
        Ok(Matrix {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn from_row_major(n: usize, data: Vec<f64>) -> Result<Self, LinearError> {
        if n == 0 || data.len() != n * n {
            return Err(LinearError::NotSquare);
        }
        Ok(Matrix { n, data })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.n + j] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.rows()
            .map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix, LinearError> {
        if other.n != self.n {
            return Err(LinearError::DimensionMismatch {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(Matrix {
            n: self.n,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        })
    }

    /// `diag(d) * self`.
    pub fn scale_rows(&self, d: &[f64]) -> Matrix {
        let mut m = self.clone();
        for i in 0..self.n {
            for j in 0..self.n {
                m.data[i * self.n + j] *= d[i];
            }
        }
        m
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|v| *v >= -METZLER_TOL)
    }
}

/// Off-diagonal entries all `>= -1e-12`.
pub fn is_metzler(a: &Matrix) -> bool {
    (0..a.n).all(|i| (0..a.n).all(|j| i == j || a.get(i, j) >= -METZLER_TOL))
}

/// Eigenvalues as `(re, im)` pairs: balancing, Hessenberg reduction and the
/// shifted QR iteration.
pub fn eigenvalues(a: &Matrix) -> Result<Vec<(f64, f64)>, LinearError> {
    let n = a.n;
    // One-based working copy keeps the classical index arithmetic readable.
    let mut h = vec![vec![0.0; n + 1]; n + 1];
    for i in 0..n {
        for j in 0..n {
            h[i + 1][j + 1] = a.get(i, j);
        }
    }
    if h.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LinearError::EigenFailure);
    }
    balance(&mut h, n);
    hessenberg(&mut h, n);
    hqr(&mut h, n)
}

fn balance(a: &mut [Vec<f64>], n: usize) {
    const RADIX: f64 = 2.0;
    let sqrdx = RADIX * RADIX;
    let mut done = false;
    while !done {
        done = true;
        for i in 1..=n {
            let mut r = 0.0;
            let mut c = 0.0;
            for j in 1..=n {
                if j != i {
                    c += a[j][i].abs();
                    r += a[i][j].abs();
                }
            }
            if c != 0.0 && r != 0.0 {
                let mut g = r / RADIX;
                let mut f = 1.0;
                let s = c + r;
                while c < g {
                    f *= RADIX;
                    c *= sqrdx;
                }
                g = r * RADIX;
                while c > g {
                    f /= RADIX;
                    c /= sqrdx;
                }
                if (c + r) / f < 0.95 * s {
                    done = false;
                    let g = 1.0 / f;
                    for j in 1..=n {
                        a[i][j] *= g;
                    }
                    for row in a.iter_mut().take(n + 1).skip(1) {
                        row[i] *= f;
                    }
                }
            }
        }
    }
}

fn hessenberg(a: &mut [Vec<f64>], n: usize) {
    if n < 3 {
        return;
    }
    for m in 2..n {
        let mut x = 0.0;
        let mut i = m;
        for j in m..=n {
            if a[j][m - 1].abs() > x.abs() {
                x = a[j][m - 1];
                i = j;
            }
        }
        if i != m {
            for j in (m - 1)..=n {
                let t = a[i][j];
                a[i][j] = a[m][j];
                a[m][j] = t;
            }
            for row in a.iter_mut().take(n + 1).skip(1) {
                row.swap(i, m);
            }
        }
        if x != 0.0 {
            for i in (m + 1)..=n {
                let mut y = a[i][m - 1];
                if y != 0.0 {
                    y /= x;
                    a[i][m - 1] = y;
                    for j in m..=n {
                        a[i][j] -= y * a[m][j];
                    }
                    for j in 1..=n {
                        a[j][m] += y * a[j][i];
                    }
                }
            }
        }
    }
    for i in 3..=n {
        for j in 1..(i - 1) {
            a[i][j] = 0.0;
        }
    }
}

fn sign(a: f64, b: f64) -> f64 {
    if b >= 0.0 {
        a.abs()
    } else {
        -a.abs()
    }
}

#[allow(clippy::many_single_char_names)]
fn hqr(a: &mut [Vec<f64>], n: usize) -> Result<Vec<(f64, f64)>, LinearError> {
    let mut wr = vec![0.0; n + 1];
    let mut wi = vec![0.0; n + 1];
    let mut anorm = 0.0;
    for i in 1..=n {
        for j in i.saturating_sub(1).max(1)..=n {
            anorm += a[i][j].abs();
        }
    }
    let mut nn = n;
    let mut t = 0.0;
    let (mut p, mut q, mut r): (f64, f64, f64);
    let (mut x, mut y, mut z, mut w);
    while nn >= 1 {
        let mut its = 0;
        loop {
            let mut l = nn;
            while l >= 2 {
                let mut s = a[l - 1][l - 1].abs() + a[l][l].abs();
                if s == 0.0 {
                    s = anorm;
                }
                if a[l][l - 1].abs() + s == s {
                    a[l][l - 1] = 0.0;
                    break;
                }
                l -= 1;
            }
            x = a[nn][nn];
            if l == nn {
                wr[nn] = x + t;
                wi[nn] = 0.0;
                nn -= 1;
                break;
            }
            y = a[nn - 1][nn - 1];
            w = a[nn][nn - 1] * a[nn - 1][nn];
            if l == nn - 1 {
                p = 0.5 * (y - x);
                q = p * p + w;
                z = q.abs().sqrt();
                x += t;
                if q >= 0.0 {
                    z = p + sign(z, p);
                    wr[nn - 1] = x + z;
                    wr[nn] = x + z;
                    if z != 0.0 {
                        wr[nn] = x - w / z;
                    }
                    wi[nn - 1] = 0.0;
                    wi[nn] = 0.0;
                } else {
                    wr[nn - 1] = x + p;
                    wr[nn] = x + p;
                    wi[nn - 1] = -z;
                    wi[nn] = z;
                }
                nn -= 2;
                break;
            }
            if its == 60 {
                return Err(LinearError::EigenFailure);
            }
            if its % 10 == 0 && its > 0 {
                // Exceptional shift.
                t += x;
                for i in 1..=nn {
                    a[i][i] -= x;
                }
                let s = a[nn][nn - 1].abs() + a[nn - 1][nn - 2].abs();
                x = 0.75 * s;
                y = x;
                w = -0.4375 * s * s;
            }
            its += 1;
            let mut m = nn - 2;
            loop {
                z = a[m][m];
                r = x - z;
                let s0 = y - z;
                p = (r * s0 - w) / a[m + 1][m] + a[m][m + 1];
                q = a[m + 1][m + 1] - z - r - s0;
                r = a[m + 2][m + 1];
                let s = p.abs() + q.abs() + r.abs();
                p /= s;
                q /= s;
                r /= s;
                if m == l {
                    break;
                }
                let u = a[m][m - 1].abs() * (q.abs() + r.abs());
                let v = p.abs() * (a[m - 1][m - 1].abs() + z.abs() + a[m + 1][m + 1].abs());
                if u + v == v {
                    break;
                }
                m -= 1;
            }
            for i in (m + 2)..=nn {
                a[i][i - 2] = 0.0;
                if i != m + 2 {
                    a[i][i - 3] = 0.0;
                }
            }
            let mut k = m;
            while k < nn {
                if k != m {
                    p = a[k][k - 1];
                    q = a[k + 1][k - 1];
                    r = 0.0;
                    if k != nn - 1 {
                        r = a[k + 2][k - 1];
                    }
                    x = p.abs() + q.abs() + r.abs();
                    if x != 0.0 {
                        p /= x;
                        q /= x;
                        r /= x;
                    }
                }
                let s = sign((p * p + q * q + r * r).sqrt(), p);
                if s != 0.0 {
                    if k == m {
                        if l != m {
                            a[k][k - 1] = -a[k][k - 1];
                        }
                    } else {
                        a[k][k - 1] = -s * x;
                    }
                    p += s;
                    x = p / s;
                    y = q / s;
                    z = r / s;
                    q /= p;
                    r /= p;
                    for j in k..=nn {
                        p = a[k][j] + q * a[k + 1][j];
                        if k != nn - 1 {
                            p += r * a[k + 2][j];
                            a[k + 2][j] -= p * z;
                        }
                        a[k + 1][j] -= p * y;
                        a[k][j] -= p * x;
                    }
                    let mmin = if nn < k + 3 { nn } else { k + 3 };
                    for i in l..=mmin {
                        p = x * a[i][k] + y * a[i][k + 1];
                        if k != nn - 1 {
                            p += z * a[i][k + 2];
                            a[i][k + 2] -= p * r;
                        }
                        a[i][k + 1] -= p * q;
                        a[i][k] -= p;
                    }
                }
                k += 1;
            }
            if l >= nn - 1 {
                break;
            }
        }
    }
    Ok((1..=n).map(|i| (wr[i], wi[i])).collect())
}

/// Largest real part of the spectrum.
pub fn spectral_abscissa(a: &Matrix) -> Result<f64, LinearError> {
    Ok(eigenvalues(a)?
        .into_iter()
        .map(|(re, _)| re)
        .fold(f64::NEG_INFINITY, f64::max))
}

pub fn is_hurwitz(a: &Matrix) -> Result<bool, LinearError> {
    Ok(spectral_abscissa(a)? < -HURWITZ_TOL)
}

const LP_TOL: f64 = 1e-9;

/// Dense tableau simplex with Bland's rule.
struct Tableau {
    rows: usize,
    cols: usize,
    /// `rows + 1` rows of `cols + 1` entries; last column is the RHS,
    /// last row the reduced costs.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let pv = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= pv;
        }
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = line[col];
            if factor != 0.0 {
                for (v, p) in line.iter_mut().zip(&pivot_row) {
                    *v -= factor * p;
                }
            }
        }
        self.basis[row] = col;
    }

    /// Minimize the objective in the last row over columns `allowed`.
    fn optimize(&mut self, allowed: usize) -> Result<(), LinearError> {
        let max_iter = 50 * (self.rows + self.cols) + 1000;
        for _ in 0..max_iter {
            let obj = &self.t[self.rows];
            let Some(col) = (0..allowed).find(|&j| obj[j] < -LP_TOL) else {
                return Ok(());
            };
            let mut best: Option<(f64, usize)> = None;
            for r in 0..self.rows {
                let a = self.t[r][col];
                if a > LP_TOL {
                    let ratio = self.t[r][self.cols] / a;
                    let better = match best {
                        None => true,
                        Some((br, bi)) => {
                            ratio < br - LP_TOL
                                || ((ratio - br).abs() <= LP_TOL && self.basis[r] < self.basis[bi])
                        }
                    };
                    if better {
                        best = Some((ratio, r));
                    }
                }
            }
            let Some((_, row)) = best else {
                return Err(LinearError::LpNumericalFailure("unbounded objective".into()));
            };
            self.pivot(row, col);
        }
        Err(LinearError::LpNumericalFailure("iteration limit".into()))
    }
}

/// Find `w >= 1` with `Aw <= -1`, minimizing `sum w`; `None` when infeasible.
pub fn find_positive_w(a: &Matrix) -> Result<Option<Vec<f64>>, LinearError> {
    if !is_metzler(a) {
        return Err(LinearError::Precondition("matrix is not Metzler".into()));
    }
    let n = a.n;
    // w = 1 + u, u >= 0:  A u <= b with b = -1 - A 1.
    let b: Vec<f64> = a.rows().map(|r| -1.0 - r.iter().sum::<f64>()).collect();
    let scale = 1.0 + a.as_slice().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    // Columns: u (n), slack/surplus (n), artificial (one per negative b).
    let neg: Vec<usize> = (0..n).filter(|&i| b[i] < 0.0).collect();
    let n_art = neg.len();
    let cols = 2 * n + n_art;
    let mut t = vec![vec![0.0; cols + 1]; n + 1];
    let mut basis = vec![0; n];
    let mut art = 0;
    for i in 0..n {
        let flip = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            t[i][j] = flip * a.get(i, j);
        }
        t[i][n + i] = flip;
        t[i][cols] = flip * b[i];
        if b[i] < 0.0 {
            t[i][2 * n + art] = 1.0;
            basis[i] = 2 * n + art;
            art += 1;
        } else {
            basis[i] = n + i;
        }
    }
    let mut tab = Tableau {
        rows: n,
        cols,
        t,
        basis,
    };
    // Phase 1: minimize the sum of artificials.
    for &i in &neg {
        for j in 0..=cols {
            let v = tab.t[i][j];
            tab.t[n][j] -= v;
        }
        tab.t[n][2 * n + neg.iter().position(|&k| k == i).unwrap()] += 1.0;
    }
    tab.optimize(cols)?;
    let infeasibility = -tab.t[n][cols];
    if infeasibility > LP_TOL * scale * (1.0 + b.iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
        return Ok(None);
    }
    // Drive artificial variables out of the basis where possible.
    for r in 0..n {
        if tab.basis[r] >= 2 * n {
            if let Some(col) = (0..2 * n).find(|&j| tab.t[r][j].abs() > LP_TOL) {
                tab.pivot(r, col);
            }
        }
    }
    // Phase 2: minimize sum u over the original columns.
    for j in 0..=cols {
        tab.t[n][j] = 0.0;
    }
    for j in 0..n {
        tab.t[n][j] = 1.0;
    }
    for r in 0..n {
        let bc = tab.basis[r];
        let cost = tab.t[n][bc];
        if cost != 0.0 {
            for j in 0..=cols {
                let v = tab.t[r][j];
                tab.t[n][j] -= cost * v;
            }
        }
    }
    tab.optimize(2 * n)?;
    let mut w = vec![1.0; n];
    for r in 0..n {
        if tab.basis[r] < n {
            w[tab.basis[r]] += tab.t[r][cols].max(0.0);
        }
    }
    let aw = a.mul_vec(&w);
    let slack = 1e-7 * scale * w.iter().fold(1.0_f64, |m, v| m.max(*v));
    if aw.iter().any(|v| *v > -1.0 + slack) {
        return Err(LinearError::LpNumericalFailure(format!(
            "recovered w violates Aw <= -1 (Aw = {aw:?})"
        )));
    }
    Ok(Some(w))
}

/// `V(x) = max_i x_i / w_i`, valid when `Aw < 0`.
pub fn linear_max_sep_lyap(a: &Matrix, w: &[f64]) -> Result<MaxSepLyap, LinearError> {
    if w.len() != a.n {
        return Err(LinearError::DimensionMismatch {
            expected: a.n,
            found: w.len(),
        });
    }
    if w.iter().any(|v| !(*v > 0.0)) {
        return Err(LinearError::Precondition("w must be positive".into()));
    }
    if a.mul_vec(w).iter().any(|v| !(*v < 0.0)) {
        return Err(LinearError::Precondition("Aw must be negative".into()));
    }
    Ok(MaxSepLyap::linear(w))
}

/// Decay rate certified by `V = max x_i / w_i`: `D+V <= -c V` with
/// `c = min_i -(Aw)_i / w_i`.
pub fn linear_decay_rate(a: &Matrix, w: &[f64]) -> f64 {
    a.mul_vec(w)
        .iter()
        .zip(w)
        .map(|(aw, w)| -aw / w)
        .fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DStabilityReport {
    pub status: Status,
    pub trials: usize,
    /// Largest spectral abscissa seen over the scalings.
    pub worst_abscissa: f64,
    pub counterexample: Option<Vec<f64>>,
}

/// Random diagonal scalings `Delta` with log-uniform entries in
/// `[1e-3, 1e3]`; every `Delta A` must stay Hurwitz.
pub fn check_d_stability_linear(
    a: &Matrix,
    trials: usize,
    seed: u64,
) -> Result<DStabilityReport, LinearError> {
    if !is_metzler(a) {
        return Err(LinearError::Precondition("matrix is not Metzler".into()));
    }
    if !is_hurwitz(a)? {
        return Err(LinearError::Precondition("matrix is not Hurwitz".into()));
    }
    let mut worst = f64::NEG_INFINITY;
    let mut counterexample = None;
    for k in 0..trials {
        let mut rng = seeding::stream(seed, k as u64);
        let d: Vec<f64> = (0..a.n)
            .map(|_| seeding::log_uniform(&mut rng, 1e-3, 1e3))
            .collect();
        let abscissa = spectral_abscissa(&a.scale_rows(&d))?;
        worst = worst.max(abscissa);
        if abscissa >= -HURWITZ_TOL && counterexample.is_none() {
            counterexample = Some(d);
        }
    }
    Ok(DStabilityReport {
        status: Status::from_bool(counterexample.is_none()),
        trials,
        worst_abscissa: worst,
        counterexample,
    })
}

/// `g(x, y) = A x + B y`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearDelayMap {
    pub a: Matrix,
    pub b: Matrix,
}

impl LinearDelayMap {
    pub fn new(a: Matrix, b: Matrix) -> Result<Self, LinearError> {
        if a.n != b.n {
            return Err(LinearError::DimensionMismatch {
                expected: a.n,
                found: b.n,
            });
        }
        Ok(LinearDelayMap { a, b })
    }
}

impl DelayMap for LinearDelayMap {
    fn dim(&self) -> usize {
        self.a.n
    }

    fn eval_component(&self, i: usize, x: &[f64], y: &[f64]) -> Result<f64, EvalError> {
        let n = self.a.n;
        let mut acc = 0.0;
        for j in 0..n {
            acc += self.a.get(i, j) * x[j] + self.b.get(i, j) * y[j];
        }
        Ok(acc)
    }

    fn jacobian_x(&self, _x: &[f64], _y: &[f64], jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        jac.copy_from_slice(self.a.as_slice());
        Some(Ok(()))
    }

    fn jacobian_y(&self, _x: &[f64], _y: &[f64], jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        jac.copy_from_slice(self.b.as_slice());
        Some(Ok(()))
    }
}

/// `x' = A x` as a vector field.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearField(pub Matrix);

impl VectorField for LinearField {
    fn dim(&self) -> usize {
        self.0.n
    }

    fn eval(&self, x: &[f64], out: &mut [f64]) -> Result<(), EvalError> {
        for (i, row) in self.0.rows().enumerate() {
            out[i] = row.iter().zip(x).map(|(a, b)| a * b).sum();
        }
        Ok(())
    }

    fn jacobian(&self, _x: &[f64], jac: &mut [f64]) -> Option<Result<(), EvalError>> {
        jac.copy_from_slice(self.0.as_slice());
        Some(Ok(()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearDelayReport {
    pub status: Status,
    pub verdict: Verdict,
    pub terminal_norm: f64,
    pub t_converge: Option<f64>,
    pub max_excursion: f64,
}

/// Simulate `x' = Ax + B x(t - tau(t))` after checking `A` Metzler,
/// `B >= 0` and `A + B` Hurwitz.
pub fn check_linear_delay_robustness(
    a: &Matrix,
    b: &Matrix,
    law: DelayLaw,
    phi: &InitialHistory,
    cfg: &IntegratorConfig,
) -> Result<LinearDelayReport, LinearError> {
    if !is_metzler(a) {
        return Err(LinearError::Precondition("A is not Metzler".into()));
    }
    if !b.is_nonnegative() {
        return Err(LinearError::Precondition("B has a negative entry".into()));
    }
    if !is_hurwitz(&a.add(b)?)? {
        return Err(LinearError::Precondition("A + B is not Hurwitz".into()));
    }
    let map = Arc::new(LinearDelayMap::new(a.clone(), b.clone())?);
    let g = DelayField::new(map, DelayAssignment::Shared(law))?;
    let sim = integrate_dde(&g, phi, cfg)?;
    Ok(LinearDelayReport {
        status: Status::from_bool(sim.verdict.is_convergent()),
        verdict: sim.verdict,
        terminal_norm: sim.terminal_norm,
        t_converge: sim.verdict.t_converge(),
        max_excursion: sim.max_excursion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> Matrix {
        Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
    }

    fn sorted_re(a: &Matrix) -> Vec<f64> {
        let mut v: Vec<f64> = eigenvalues(a).unwrap().into_iter().map(|e| e.0).collect();
        v.sort_by(|a, b| a.partial_cmp(b).unwrap());
        v
    }

    #[test]
    fn metzler_examples() {
        assert!(is_metzler(&m(&[&[-2.0, 1.0], &[1.0, -2.0]])));
        assert!(!is_metzler(&m(&[&[-1.0, -0.5], &[0.0, -1.0]])));
        assert!(is_metzler(&m(&[&[-7.0]])));
        assert!(Matrix::from_rows(&[vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn eigenvalue_examples() {
        let a = m(&[&[-2.0, 1.0], &[1.0, -2.0]]);
        let ev = sorted_re(&a);
        assert!((ev[0] + 3.0).abs() < 1e-12 && (ev[1] + 1.0).abs() < 1e-12);
        assert!(is_hurwitz(&a).unwrap());
        assert!(!is_hurwitz(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap());
        assert!(!is_hurwitz(&Matrix::zeros(3)).unwrap());
        // Rotation generator: eigenvalues +-i.
        let ev = eigenvalues(&m(&[&[0.0, -1.0], &[1.0, 0.0]])).unwrap();
        assert!(ev.iter().all(|(re, im)| re.abs() < 1e-12 && (im.abs() - 1.0).abs() < 1e-12));
        // Companion matrix of (x-1)(x-2)(x-3)(x-4).
        let c = m(&[
            &[10.0, -35.0, 50.0, -24.0],
            &[1.0, 0.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 1.0, 0.0],
        ]);
        let ev = sorted_re(&c);
        for (k, e) in ev.iter().enumerate() {
            assert!((e - (k + 1) as f64).abs() < 1e-8, "{ev:?}");
        }
    }

    #[test]
    fn lp_examples() {
        let a = m(&[&[-2.0, 1.0], &[1.0, -2.0]]);
        assert_eq!(find_positive_w(&a).unwrap(), Some(vec![1.0, 1.0]));
        assert_eq!(find_positive_w(&m(&[&[0.0, 1.0], &[1.0, 0.0]])).unwrap(), None);
        assert_eq!(find_positive_w(&m(&[&[-1.0]])).unwrap(), Some(vec![1.0]));
        let b = m(&[&[-1.0, 3.0], &[0.0, -1.0]]);
        let w = find_positive_w(&b).unwrap().unwrap();
        assert!(b.mul_vec(&w).iter().all(|v| *v <= -1.0 + 1e-9));
        assert!(w.iter().all(|v| *v >= 1.0));
    }

    #[test]
    fn linear_lyapunov_and_rate() {
        let a = m(&[&[-2.0, 1.0], &[1.0, -2.0]]);
        let v = linear_max_sep_lyap(&a, &[1.0, 1.0]).unwrap();
        assert_eq!(v.value(&[0.3, 0.7]).unwrap(), 0.7);
        assert_eq!(linear_decay_rate(&a, &[1.0, 1.0]), 1.0);
        assert!(linear_max_sep_lyap(&m(&[&[1.0]]), &[1.0]).is_err());
    }

    #[test]
    fn d_stability() {
        let a = m(&[&[-2.0, 1.0], &[1.0, -2.0]]);
        let rep = check_d_stability_linear(&a, 100, 3).unwrap();
        assert_eq!(rep.status, Status::Pass);
        assert!(matches!(
            check_d_stability_linear(&m(&[&[1.0]]), 5, 0),
            Err(LinearError::Precondition(_))
        ));
    }

    #[test]
    fn linear_delay() {
        let a = m(&[&[-3.0, 0.0], &[0.0, -3.0]]);
        let b = m(&[&[0.0, 1.0], &[1.0, 0.0]]);
        let rep = check_linear_delay_robustness(
            &a,
            &b,
            DelayLaw::Proportional(0.5),
            &InitialHistory::Constant(vec![1.0, 1.0]),
            &IntegratorConfig::default(),
        )
        .unwrap();
        assert_eq!(rep.status, Status::Pass);
        assert!(rep.terminal_norm < 1e-3);
        let bad = m(&[&[0.0, 4.0], &[4.0, 0.0]]);
        assert!(matches!(
            check_linear_delay_robustness(
                &a,
                &bad,
                DelayLaw::zero(),
                &InitialHistory::Constant(vec![1.0, 1.0]),
                &IntegratorConfig::default()
            ),
            Err(LinearError::Precondition(_))
        ));
    }
}
