//! Periodic cubic splines on (possibly non-uniform) knots.
//!
//! The knots `x_0 < x_1 < ... < x_{n-1}` live in one period `[x_0, x_0 + period)`.
//! Several value channels can share one knot vector; the cyclic tridiagonal
//! system for the second derivatives is solved once per channel with the
//! Sherman-Morrison correction.

#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    knots: Vec<f64>,
    period: f64,
    channels: usize,
    /// Values, `knots.len() * channels`, knot-major.
    values: Vec<f64>,
    /// Second derivatives, same layout as `values`.
    second: Vec<f64>,
}

impl PeriodicSpline {
    /// Builds a spline through `values` (knot-major, `channels` per knot).
    ///
    /// Panics if fewer than three knots are given or knots are not strictly
    /// increasing within one period.
    pub fn new(knots: Vec<f64>, period: f64, values: Vec<f64>, channels: usize) -> Self {
        let n = knots.len();
        assert!(n >= 3, "periodic spline needs at least three knots");
        assert_eq!(values.len(), n * channels);
        let widths: Vec<f64> = (0..n)
            .map(|i| {
                if i + 1 < n {
                    knots[i + 1] - knots[i]
                } else {
                    knots[0] + period - knots[n - 1]
                }
            })
            .collect();
        assert!(
            widths.iter().all(|&h| h > 0.0),
            "spline knots must be strictly increasing within one period"
        );

        let mut second = vec![0.0; n * channels];
        let mut rhs = vec![0.0; n];
        for ch in 0..channels {
            for i in 0..n {
                let prev = (i + n - 1) % n;
                let next = (i + 1) % n;
                let yp = values[prev * channels + ch];
                let y = values[i * channels + ch];
                let yn = values[next * channels + ch];
                rhs[i] = 6.0 * ((yn - y) / widths[i] - (y - yp) / widths[prev]);
            }
            let m = solve_cyclic(&widths, &rhs);
            for i in 0..n {
                second[i * channels + ch] = m[i];
            }
        }
        Self {
            knots,
            period,
            channels,
            values,
            second,
        }
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    fn locate(&self, x: f64) -> (usize, f64, f64) {
        let n = self.knots.len();
        let x0 = self.knots[0];
        let mut s = (x - x0).rem_euclid(self.period) + x0;
        if s >= x0 + self.period {
            s = x0;
        }
        let i = self.knots.partition_point(|&k| k <= s).saturating_sub(1);
        let h = if i + 1 < n {
            self.knots[i + 1] - self.knots[i]
        } else {
            x0 + self.period - self.knots[n - 1]
        };
        (i, s - self.knots[i], h)
    }

    /// Value of every channel at `x`.
    pub fn eval_into(&self, x: f64, out: &mut [f64]) {
        let (i, s, h) = self.locate(x);
        let j = (i + 1) % self.knots.len();
        let c = self.channels;
        let t = h - s;
        for (ch, o) in out.iter_mut().enumerate().take(c) {
            let (y0, y1) = (self.values[i * c + ch], self.values[j * c + ch]);
            let (m0, m1) = (self.second[i * c + ch], self.second[j * c + ch]);
            *o = m0 * t * t * t / (6.0 * h)
                + m1 * s * s * s / (6.0 * h)
                + (y0 / h - m0 * h / 6.0) * t
                + (y1 / h - m1 * h / 6.0) * s;
        }
    }

    /// First derivative of every channel at `x`.
    pub fn deriv_into(&self, x: f64, out: &mut [f64]) {
        let (i, s, h) = self.locate(x);
        let j = (i + 1) % self.knots.len();
        let c = self.channels;
        let t = h - s;
        for (ch, o) in out.iter_mut().enumerate().take(c) {
            let (y0, y1) = (self.values[i * c + ch], self.values[j * c + ch]);
            let (m0, m1) = (self.second[i * c + ch], self.second[j * c + ch]);
            *o = -m0 * t * t / (2.0 * h) + m1 * s * s / (2.0 * h) + (y1 - y0) / h
                - (m1 - m0) * h / 6.0;
        }
    }

    pub fn eval(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.eval_into(x, &mut out);
        out
    }

    pub fn deriv(&self, x: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.channels];
        self.deriv_into(x, &mut out);
        out
    }
}

/// Solves the cyclic system
/// `h[i-1] m[i-1] + 2 (h[i-1] + h[i]) m[i] + h[i] m[i+1] = rhs[i]`.
fn solve_cyclic(h: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = h.len();
    let lower: Vec<f64> = (0..n).map(|i| h[(i + n - 1) % n]).collect();
    let diag: Vec<f64> = (0..n).map(|i| 2.0 * (h[(i + n - 1) % n] + h[i])).collect();
    let upper: Vec<f64> = h.to_vec();

    // Corner entries: A[0][n-1] = lower[0], A[n-1][0] = upper[n-1].
    let alpha = upper[n - 1];
    let beta = lower[0];
    let gamma = -diag[0];
    let mut d = diag.clone();
    d[0] -= gamma;
    d[n - 1] -= alpha * beta / gamma;

    let x = thomas(&lower, &d, &upper, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = alpha;
    let z = thomas(&lower, &d, &upper, &u);
    let factor = (x[0] + beta * x[n - 1] / gamma) / (1.0 + z[0] + beta * z[n - 1] / gamma);
    x.iter().zip(&z).map(|(xi, zi)| xi - factor * zi).collect()
}

fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = upper[0] / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - lower[i] * c[i - 1];
        c[i] = upper[i] / m;
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / m;
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
    use std::f64::consts::TAU;

    #[test]
    fn interpolates_knots() {
        let knots = vec![0.0, 0.7, 1.1, 2.5, 4.0, 5.2];
        let values: Vec<f64> = knots.iter().map(|x: &f64| x.sin()).collect();
        let s = PeriodicSpline::new(knots.clone(), TAU, values.clone(), 1);
        for (k, v) in knots.iter().zip(&values) {
            assert!((s.eval(*k)[0] - v).abs() < 1e-13);
        }
    }

    #[test]
    fn periodic_wrap() {
        let n = 32;
        let knots: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
        let values: Vec<f64> = knots.iter().map(|x| x.cos()).collect();
        let s = PeriodicSpline::new(knots, TAU, values, 1);
        assert!((s.eval(0.3)[0] - s.eval(0.3 + TAU)[0]).abs() < 1e-14);
        assert!((s.eval(-0.3)[0] - s.eval(TAU - 0.3)[0]).abs() < 1e-14);
    }

    #[test]
    fn fourth_order_accuracy_on_smooth_data() {
        let err = |n: usize| {
            let knots: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
            let values: Vec<f64> = knots.iter().map(|x| (2.0 * x).sin()).collect();
            let s = PeriodicSpline::new(knots, TAU, values, 1);
            (0..1000)
                .map(|k| {
                    let x = TAU * (k as f64 + 0.5) / 1000.0;
                    (s.eval(x)[0] - (2.0 * x).sin()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(32) / err(64);
        assert!(ratio > 12.0, "ratio {ratio}");
    }

    #[test]
    fn derivative_matches_analytic() {
        let n = 128;
        let knots: Vec<f64> = (0..n).map(|i| TAU * i as f64 / n as f64).collect();
        let values: Vec<f64> = knots.iter().map(|x| x.sin()).collect();
        let s = PeriodicSpline::new(knots, TAU, values, 1);
        for x in [0.1, 1.3, 4.4] {
            assert!((s.deriv(x)[0] - f64::cos(x)).abs() < 1e-5);
        }
    }
}
