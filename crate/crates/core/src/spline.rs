//! Cubic interpolating spline with not-a-knot end conditions.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    m: Vec<f64>, // second derivatives at the knots
}

impl CubicSpline {
    /// Needs at least 4 strictly increasing abscissae.
    pub fn not_a_knot(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let n = x.len();
        if n != y.len() {
            return Err(Error::InvalidArgument("spline: x and y lengths differ".into()));
        }
        if n < 4 {
            return Err(Error::InvalidArgument("spline: need at least 4 samples".into()));
        }
        if x.windows(2).any(|w| !(w[1] > w[0])) || x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("spline: abscissae must be finite and strictly increasing".into()));
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let d: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();

        // tridiagonal system for M_1..M_{n-2}; M_0 and M_{n-1} eliminated through not-a-knot
        let k = n - 2;
        let mut sub = vec![0.0; k];
        let mut diag = vec![0.0; k];
        let mut sup = vec![0.0; k];
        let mut rhs = vec![0.0; k];
        for j in 0..k {
            let i = j + 1;
            sub[j] = h[i - 1];
            diag[j] = 2.0 * (h[i - 1] + h[i]);
            sup[j] = h[i];
            rhs[j] = 6.0 * (d[i] - d[i - 1]);
        }
        let (h0, h1) = (h[0], h[1]);
        diag[0] += h0 * (h0 + h1) / h1;
        sup[0] -= h0 * h0 / h1;
        let (ha, hb) = (h[n - 3], h[n - 2]);
        diag[k - 1] += hb * (ha + hb) / ha;
        sub[k - 1] -= hb * hb / ha;

        let inner = thomas(&sub, &diag, &sup, &rhs);
        let mut m = vec![0.0; n];
        m[1..n - 1].copy_from_slice(&inner);
        m[0] = ((h0 + h1) * m[1] - h0 * m[2]) / h1;
        m[n - 1] = ((ha + hb) * m[n - 2] - hb * m[n - 3]) / ha;
        Ok(Self { x, y, m })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().unwrap())
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn interval(&self, t: f64) -> usize {
        let n = self.x.len();
        match self.x.partition_point(|&v| v <= t) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = self.x[i + 1] - t;
        let b = t - self.x[i];
        self.m[i] * a * a * a / (6.0 * h)
            + self.m[i + 1] * b * b * b / (6.0 * h)
            + (self.y[i] / h - self.m[i] * h / 6.0) * a
            + (self.y[i + 1] / h - self.m[i + 1] * h / 6.0) * b
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let i = self.interval(t);
        let h = self.x[i + 1] - self.x[i];
        let a = self.x[i + 1] - t;
        let b = t - self.x[i];
        -self.m[i] * a * a / (2.0 * h) + self.m[i + 1] * b * b / (2.0 * h) - (self.y[i] / h - self.m[i] * h / 6.0)
            + (self.y[i + 1] / h - self.m[i + 1] * h / 6.0)
    }

    /// Largest mismatch between the spline slope at interior knots and the centred
    /// difference of the samples, relative to the largest slope. Kinked data scores high.
    pub fn roughness(&self) -> f64 {
        let n = self.x.len();
        let mut worst: f64 = 0.0;
        let mut scale: f64 = 1e-300;
        for i in 1..n - 1 {
            let fd = (self.y[i + 1] - self.y[i - 1]) / (self.x[i + 1] - self.x[i - 1]);
            let s = self.derivative(self.x[i]);
            worst = worst.max((fd - s).abs());
            scale = scale.max(s.abs()).max(fd.abs());
        }
        worst / scale
    }
}

fn thomas(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let den = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / den;
        d[i] = (rhs[i] - sub[i] * d[i - 1]) / den;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_cubic_exactly() {
        let f = |t: f64| 2.0 * t * t * t - t * t + 0.5 * t - 3.0;
        let df = |t: f64| 6.0 * t * t - 2.0 * t + 0.5;
        let x: Vec<f64> = vec![0.0, 0.3, 0.7, 1.0, 1.6, 2.0];
        let y = x.iter().map(|&t| f(t)).collect();
        let s = CubicSpline::not_a_knot(x, y).unwrap();
        for k in 0..=40 {
            let t = k as f64 * 0.05;
            assert!((s.eval(t) - f(t)).abs() < 1e-12);
            assert!((s.derivative(t) - df(t)).abs() < 1e-11);
        }
    }

    #[test]
    fn four_points_is_the_interpolating_cubic() {
        let x = vec![0.0, 1.0, 2.0, 3.0];
        let y = vec![1.0, 2.0, 9.0, 28.0]; // t³ + 1
        let s = CubicSpline::not_a_knot(x, y).unwrap();
        assert!((s.eval(1.5) - 4.375).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CubicSpline::not_a_knot(vec![0.0, 1.0, 2.0], vec![0.0; 3]).is_err());
        assert!(CubicSpline::not_a_knot(vec![0.0, 1.0, 1.0, 2.0], vec![0.0; 4]).is_err());
    }

    #[test]
    fn smooth_data_has_low_roughness_kink_has_high() {
        let x: Vec<f64> = (0..50).map(|k| k as f64 * 0.1).collect();
        let smooth = CubicSpline::not_a_knot(x.clone(), x.iter().map(|t| t.sin()).collect()).unwrap();
        assert!(smooth.roughness() < 1e-2);
        let kink = CubicSpline::not_a_knot(x.clone(), x.iter().map(|t| (t - 2.45).abs()).collect()).unwrap();
        assert!(kink.roughness() > 5e-2);
    }
}
