//! Cubic Hermite interpolation, including the monotone (PCHIP) variant.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent f64 methods shadow it when std is linked
use num_traits::Float;

/// Cubic Hermite value on `[t0, t1]` with endpoint values and slopes.
#[inline]
pub fn hermite(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return y0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
    let h10 = s3 - 2.0 * s2 + s;
    let h01 = -2.0 * s3 + 3.0 * s2;
    let h11 = s3 - s2;
    h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1
}

/// Derivative of [`hermite`] with respect to `t`.
#[inline]
pub fn hermite_slope(t0: f64, t1: f64, y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let h = t1 - t0;
    if h == 0.0 {
        return d0;
    }
    let s = (t - t0) / h;
    let s2 = s * s;
    let dh00 = (6.0 * s2 - 6.0 * s) / h;
    let dh10 = 3.0 * s2 - 4.0 * s + 1.0;
    let dh01 = (-6.0 * s2 + 6.0 * s) / h;
    let dh11 = 3.0 * s2 - 2.0 * s;
    dh00 * y0 + dh10 * d0 + dh01 * y1 + dh11 * d1
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum InterpError {
    #[error("need at least two nodes")]
    TooFewNodes,
    #[error("node abscissae must increase strictly")]
    UnorderedNodes,
    #[error("node values must be monotone")]
    NonmonotoneData,
    #[error("length mismatch")]
    LengthMismatch,
}

/// Shape-preserving piecewise cubic through monotone data.
///
/// Outside the node range the curve continues linearly with the end slopes.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    ds: Vec<f64>,
}

impl MonotoneCubic {
    /// Fritsch–Butland slopes (PCHIP).
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self, InterpError> {
        check_nodes(&xs, &ys)?;
        let n = xs.len();
        let secants: Vec<f64> = (0..n - 1)
            .map(|k| (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]))
            .collect();
        let mut ds = Vec::with_capacity(n);
        if n == 2 {
            ds.push(secants[0]);
            ds.push(secants[0]);
            return Ok(MonotoneCubic { xs, ys, ds });
        }
        ds.push(end_slope(xs[1] - xs[0], xs[2] - xs[1], secants[0], secants[1]));
        for k in 1..n - 1 {
            let (d0, d1) = (secants[k - 1], secants[k]);
            if d0 * d1 <= 0.0 {
                ds.push(0.0);
            } else {
                let h0 = xs[k] - xs[k - 1];
                let h1 = xs[k + 1] - xs[k];
                let w1 = 2.0 * h1 + h0;
                let w2 = h1 + 2.0 * h0;
                ds.push((w1 + w2) / (w1 / d0 + w2 / d1));
            }
        }
        ds.push(end_slope(
            xs[n - 1] - xs[n - 2],
            xs[n - 2] - xs[n - 3],
            secants[n - 2],
            secants[n - 3],
        ));
        Ok(MonotoneCubic { xs, ys, ds })
    }

    /// Use the given node slopes, limited so the interpolant stays monotone
    /// (Fritsch–Carlson).
    pub fn with_slopes(xs: Vec<f64>, ys: Vec<f64>, mut ds: Vec<f64>) -> Result<Self, InterpError> {
        check_nodes(&xs, &ys)?;
        if ds.len() != xs.len() {
            return Err(InterpError::LengthMismatch);
        }
        let n = xs.len();
        for k in 0..n - 1 {
            let delta = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
            if delta == 0.0 {
                ds[k] = 0.0;
                ds[k + 1] = 0.0;
                continue;
            }
            if ds[k] / delta < 0.0 {
                ds[k] = 0.0;
            }
            if ds[k + 1] / delta < 0.0 {
                ds[k + 1] = 0.0;
            }
            let a = ds[k] / delta;
            let b = ds[k + 1] / delta;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let tau = 3.0 / r2.sqrt();
                ds[k] = tau * a * delta;
                ds[k + 1] = tau * b * delta;
            }
        }
        Ok(MonotoneCubic { xs, ys, ds })
    }

    pub fn nodes(&self) -> (&[f64], &[f64], &[f64]) {
        (&self.xs, &self.ys, &self.ds)
    }

    pub fn x_range(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    fn segment(&self, x: f64) -> usize {
        let k = self.xs.partition_point(|&v| v <= x);
        k.clamp(1, self.xs.len() - 1) - 1
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ys[0] + self.ds[0] * (x - self.xs[0]);
        }
        if x >= self.xs[n - 1] {
            return self.ys[n - 1] + self.ds[n - 1] * (x - self.xs[n - 1]);
        }
        let k = self.segment(x);
        hermite(
            self.xs[k],
            self.xs[k + 1],
            self.ys[k],
            self.ys[k + 1],
            self.ds[k],
            self.ds[k + 1],
            x,
        )
    }

    pub fn slope(&self, x: f64) -> f64 {
        let n = self.xs.len();
        if x <= self.xs[0] {
            return self.ds[0];
        }
        if x >= self.xs[n - 1] {
            return self.ds[n - 1];
        }
        let k = self.segment(x);
        hermite_slope(
            self.xs[k],
            self.xs[k + 1],
            self.ys[k],
            self.ys[k + 1],
            self.ds[k],
            self.ds[k + 1],
            x,
        )
    }
}

fn check_nodes(xs: &[f64], ys: &[f64]) -> Result<(), InterpError> {
    if xs.len() != ys.len() {
        return Err(InterpError::LengthMismatch);
    }
    if xs.len() < 2 {
        return Err(InterpError::TooFewNodes);
    }
    if xs.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(InterpError::UnorderedNodes);
    }
    let up = ys.windows(2).all(|w| w[1] >= w[0]);
    let down = ys.windows(2).all(|w| w[1] <= w[0]);
    if !(up || down) {
        return Err(InterpError::NonmonotoneData);
    }
    Ok(())
}

fn end_slope(h0: f64, h1: f64, d0: f64, d1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if d.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && d.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |t: f64| t * t * t - 2.0 * t + 1.0;
        let dp = |t: f64| 3.0 * t * t - 2.0;
        for &t in &[0.5, 0.75, 1.2, 2.0] {
            let v = hermite(0.5, 2.0, p(0.5), p(2.0), dp(0.5), dp(2.0), t);
            assert!((v - p(t)).abs() < 1e-12);
            let d = hermite_slope(0.5, 2.0, p(0.5), p(2.0), dp(0.5), dp(2.0), t);
            assert!((d - dp(t)).abs() < 1e-12);
        }
    }

    #[test]
    fn pchip_is_monotone_and_interpolates() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        let ys = vec![0.0, 0.1, 0.1, 2.0, 2.1, 8.0];
        let c = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(c.eval(*x), *y);
        }
        let mut prev = c.eval(0.0);
        for k in 1..=5000 {
            let v = c.eval(5.0 * k as f64 / 5000.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn limiter_keeps_monotone() {
        let xs = vec![0.0, 1.0, 2.0];
        let ys = vec![0.0, 1.0, 1.1];
        let c = MonotoneCubic::with_slopes(xs, ys, vec![10.0, 10.0, 10.0]).unwrap();
        let mut prev = c.eval(0.0);
        for k in 1..=2000 {
            let v = c.eval(2.0 * k as f64 / 2000.0);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
        assert!(MonotoneCubic::new(vec![0.0, 1.0, 2.0], vec![0.0, 1.0, 0.5]).is_err());
        assert!(MonotoneCubic::new(vec![0.0, 0.0], vec![0.0, 1.0]).is_err());
    }
}
