//! Polar quadrature on the unit disc: trapezoid in the angle, Gauss-Legendre
//! in the radius.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Gauss-Legendre nodes and weights on `[-1, 1]`, Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Grid resolution for disc (or annulus) integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Trapezoid points in the angle.
    pub angular: usize,
    /// Gauss-Legendre points in the radius.
    pub radial: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            angular: 256,
            radial: 64,
        }
    }
}

impl GridSpec {
    /// Grows the grid so that it integrates the metric of a degree-`k`
    /// harmonic map without aliasing: `4(k + 1)` angles, `k + 1` radii.
    pub fn covering(self, k: usize) -> Self {
        Self {
            angular: self.angular.max(4 * (k + 1)),
            radial: self.radial.max(k + 1),
        }
    }

    pub fn scaled(self, factor: usize) -> Self {
        Self {
            angular: self.angular * factor,
            radial: self.radial * factor,
        }
    }
}

/// A polar grid `{(r_i, theta_j)}` on `inner <= r <= 1` with area weights
/// (the Jacobian `r` is folded into the weights).
#[derive(Debug, Clone)]
pub struct PolarGrid {
    pub radii: Vec<f64>,
    pub radial_weights: Vec<f64>,
    pub angles: Vec<f64>,
    pub angular_weight: f64,
}

impl PolarGrid {
    pub fn disc(spec: GridSpec) -> Self {
        Self::annulus(spec, 0.0)
    }

    pub fn annulus(spec: GridSpec, inner: f64) -> Self {
        let (x, w) = gauss_legendre(spec.radial);
        let half = 0.5 * (1.0 - inner);
        let radii: Vec<f64> = x.iter().map(|x| inner + half * (x + 1.0)).collect();
        let radial_weights = radii.iter().zip(&w).map(|(r, w)| half * w * r).collect();
        let angles = (0..spec.angular)
            .map(|j| TAU * j as f64 / spec.angular as f64)
            .collect();
        Self {
            radii,
            radial_weights,
            angles,
            angular_weight: TAU / spec.angular as f64,
        }
    }

    /// Points in row-major (radius-major) order with their area weights.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.radii
            .iter()
            .zip(&self.radial_weights)
            .flat_map(move |(&r, &wr)| {
                self.angles
                    .iter()
                    .map(move |&t| (r * t.cos(), r * t.sin(), wr * self.angular_weight))
            })
    }

    /// Integrates `f(u, v)` over the grid. Rows are evaluated in parallel and
    /// summed in a fixed order so the result does not depend on thread count.
    pub fn integrate<F>(&self, f: F) -> f64
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        self.integrate_many::<1, _>(|u, v| [f(u, v)])[0]
    }

    /// Integrates several integrands sharing one evaluation per point.
    pub fn integrate_many<const K: usize, F>(&self, f: F) -> [f64; K]
    where
        F: Fn(f64, f64) -> [f64; K] + Sync,
    {
        use rayon::prelude::*;
        let rows: Vec<[f64; K]> = self
            .radii
            .par_iter()
            .zip(self.radial_weights.par_iter())
            .map(|(&r, &wr)| {
                let mut acc = [0.0; K];
                for &t in &self.angles {
                    let vals = f(r * t.cos(), r * t.sin());
                    for k in 0..K {
                        acc[k] += vals[k];
                    }
                }
                let scale = wr * self.angular_weight;
                acc.map(|a| a * scale)
            })
            .collect();
        let mut total = [0.0; K];
        for row in rows {
            for k in 0..K {
                total[k] += row[k];
            }
        }
        total
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(8);
        // degree 15 is the exactness limit for 8 points
        let integral: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(14)).sum();
        assert!((integral - 2.0 / 15.0).abs() < 1e-14);
        let total: f64 = w.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }

    #[test]
    fn odd_point_count_has_center_node() {
        let (x, w) = gauss_legendre(5);
        assert!(x[2].abs() < 1e-15);
        assert!((w[2] - 128.0 / 225.0).abs() < 1e-14);
    }

    #[test]
    fn disc_area() {
        let g = PolarGrid::disc(GridSpec::default());
        assert!((g.integrate(|_, _| 1.0) - PI).abs() < 1e-12);
    }

    #[test]
    fn annulus_area() {
        let g = PolarGrid::annulus(GridSpec::default(), 0.3);
        assert!((g.integrate(|_, _| 1.0) - PI * (1.0 - 0.09)).abs() < 1e-12);
    }
}
