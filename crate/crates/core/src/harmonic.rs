//! Harmonic extension of a boundary trace to the unit disc.
//!
//! Each component is written as the real part of a power series,
//! `x_i = Re f_i(z)`, `f_i(z) = a_0/2 + sum_k (a_k - i b_k) z^k`, so the
//! extension is exactly harmonic and its derivatives are closed-form:
//! `dx_i/du = Re f_i'(z)`, `dx_i/dv = -Im f_i'(z)`.

use crate::error::{PlateauError, Result};
use crate::quadrature::{GridSpec, PolarGrid};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Trigonometric coefficients of a boundary trace in R^n.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FourierBoundary {
    dimension: usize,
    max_degree: usize,
    a0: Vec<f64>,
    /// `a_k` for `k = 1..=max_degree`, degree-major.
    a: Vec<f64>,
    b: Vec<f64>,
    /// Largest reconstruction error at the fitting nodes.
    truncation_error: f64,
}

impl FourierBoundary {
    /// Fits coefficients up to `max_degree` from `N` samples at
    /// `theta_j = 2 pi j / N` (point-major layout).
    pub fn fit(trace: &[f64], dimension: usize, max_degree: usize) -> Result<Self> {
        let n = trace.len() / dimension;
        if n < 2 * max_degree + 1 {
            return Err(PlateauError::Degree {
                samples: n,
                degree: max_degree,
                needed: 2 * max_degree + 1,
            });
        }
        let cos_table: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).cos()).collect();
        let sin_table: Vec<f64> = (0..n).map(|j| (TAU * j as f64 / n as f64).sin()).collect();
        let scale = 2.0 / n as f64;
        let mut a0 = vec![0.0; dimension];
        for p in trace.chunks(dimension) {
            a0.iter_mut().zip(p).for_each(|(a, x)| *a += x);
        }
        a0.iter_mut().for_each(|a| *a *= scale);
        let mut a = vec![0.0; max_degree * dimension];
        let mut b = vec![0.0; max_degree * dimension];
        for k in 1..=max_degree {
            let row = (k - 1) * dimension;
            for (j, p) in trace.chunks(dimension).enumerate() {
                let idx = (j * k) % n;
                let (c, s) = (cos_table[idx], sin_table[idx]);
                for i in 0..dimension {
                    a[row + i] += p[i] * c;
                    b[row + i] += p[i] * s;
                }
            }
            for i in 0..dimension {
                a[row + i] *= scale;
                b[row + i] *= scale;
            }
        }
        let mut fb = Self {
            dimension,
            max_degree,
            a0,
            a,
            b,
            truncation_error: 0.0,
        };
        fb.truncation_error = trace
            .chunks(dimension)
            .enumerate()
            .map(|(j, p)| {
                let q = fb.eval_boundary(TAU * j as f64 / n as f64);
                p.iter().zip(&q).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max);
        Ok(fb)
    }

    pub fn from_coefficients(dimension: usize, a0: Vec<f64>, a: Vec<Vec<f64>>, b: Vec<Vec<f64>>) -> Self {
        let max_degree = a.len().max(b.len());
        let mut fa = vec![0.0; max_degree * dimension];
        let mut fbv = vec![0.0; max_degree * dimension];
        for (k, v) in a.iter().enumerate() {
            fa[k * dimension..(k + 1) * dimension].copy_from_slice(v);
        }
        for (k, v) in b.iter().enumerate() {
            fbv[k * dimension..(k + 1) * dimension].copy_from_slice(v);
        }
        Self {
            dimension,
            max_degree,
            a0,
            a: fa,
            b: fbv,
            truncation_error: 0.0,
        }
    }

    /// Zeroes the top `fraction` of modes.
    pub fn low_pass(mut self, fraction: f64) -> Self {
        let keep = ((1.0 - fraction) * self.max_degree as f64).floor() as usize;
        for k in keep..self.max_degree {
            for i in 0..self.dimension {
                self.a[k * self.dimension + i] = 0.0;
                self.b[k * self.dimension + i] = 0.0;
            }
        }
        self
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn truncation_error(&self) -> f64 {
        self.truncation_error
    }

    /// `a_0`; the trace mean is `a_0 / 2`.
    pub fn a0(&self) -> &[f64] {
        &self.a0
    }

    pub fn a(&self, k: usize) -> &[f64] {
        &self.a[(k - 1) * self.dimension..k * self.dimension]
    }

    pub fn b(&self, k: usize) -> &[f64] {
        &self.b[(k - 1) * self.dimension..k * self.dimension]
    }

    pub fn eval_boundary(&self, theta: f64) -> Vec<f64> {
        let mut out: Vec<f64> = self.a0.iter().map(|a| 0.5 * a).collect();
        for k in 1..=self.max_degree {
            let (c, s) = ((k as f64 * theta).cos(), (k as f64 * theta).sin());
            for ((o, a), b) in out.iter_mut().zip(self.a(k)).zip(self.b(k)) {
                *o += a * c + b * s;
            }
        }
        out
    }

    /// `(pi / 2) sum_k k (|a_k|^2 + |b_k|^2)`.
    pub fn spectral_energy(&self) -> f64 {
        let mut total = 0.0;
        for k in 1..=self.max_degree {
            let s: f64 = self.a(k).iter().chain(self.b(k)).map(|x| x * x).sum();
            total += k as f64 * s;
        }
        0.5 * PI * total
    }

    /// Energy carried by modes above `fraction * max_degree`, relative to the
    /// total. Large values flag boundary data whose extension has
    /// derivatives blowing up near the circle.
    pub fn tail_energy_fraction(&self, fraction: f64) -> f64 {
        let total = self.spectral_energy();
        if total == 0.0 {
            return 0.0;
        }
        let start = ((fraction * self.max_degree as f64).ceil() as usize).max(1);
        let mut tail = 0.0;
        for k in start..=self.max_degree {
            let s: f64 = self.a(k).iter().chain(self.b(k)).map(|x| x * x).sum();
            tail += k as f64 * s;
        }
        0.5 * PI * tail / total
    }
}

/// Fits with the default degree `N/2 - 1`.
pub fn fit_fourier(trace: &[f64], dimension: usize) -> Result<FourierBoundary> {
    let n = trace.len() / dimension;
    if n < 3 {
        return Err(PlateauError::Degree {
            samples: n,
            degree: 1,
            needed: 3,
        });
    }
    FourierBoundary::fit(trace, dimension, n / 2 - 1)
}

/// `E`, `F`, `G` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FirstFundamentalForm {
    pub e: f64,
    pub f: f64,
    pub g: f64,
}

impl FirstFundamentalForm {
    /// `EG - F^2`.
    pub fn det(&self) -> f64 {
        self.e * self.g - self.f * self.f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaResult {
    pub area: f64,
    /// Grid points where `EG - F^2` came out negative and was clipped.
    pub clipped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub u: f64,
    pub v: f64,
    /// `E + G` at the point.
    pub value: f64,
}

/// Harmonic extension of a [`FourierBoundary`] into the unit disc.
#[derive(Debug, Clone)]
pub struct HarmonicDisc {
    boundary: FourierBoundary,
    /// Power-series coefficients, component-major: `coeffs[i][k]`.
    coeffs: Vec<Vec<Complex64>>,
}

impl HarmonicDisc {
    pub fn new(boundary: FourierBoundary) -> Self {
        let n = boundary.dimension;
        let coeffs = (0..n)
            .map(|i| {
                let mut c = vec![Complex64::new(0.5 * boundary.a0[i], 0.0)];
                for k in 1..=boundary.max_degree {
                    c.push(Complex64::new(boundary.a(k)[i], -boundary.b(k)[i]));
                }
                c
            })
            .collect();
        Self { boundary, coeffs }
    }

    pub fn boundary(&self) -> &FourierBoundary {
        &self.boundary
    }

    pub fn dimension(&self) -> usize {
        self.boundary.dimension
    }

    pub fn degree(&self) -> usize {
        self.boundary.max_degree
    }

    /// Power-series coefficients of component `i`.
    pub fn series(&self, i: usize) -> &[Complex64] {
        &self.coeffs[i]
    }

    fn check(u: f64, v: f64) -> Result<()> {
        if u * u + v * v >= 1.0 || !u.is_finite() || !v.is_finite() {
            Err(PlateauError::Domain { u, v })
        } else {
            Ok(())
        }
    }

    pub fn eval(&self, u: f64, v: f64) -> Result<Vec<f64>> {
        Self::check(u, v)?;
        Ok(self.eval_unchecked(u, v))
    }

    /// Evaluation on the closed disc for mesh output; points outside are
    /// pulled back onto the unit circle.
    pub fn sample(&self, u: f64, v: f64) -> Vec<f64> {
        let r = u.hypot(v);
        if r > 1.0 {
            self.eval_unchecked(u / r, v / r)
        } else {
            self.eval_unchecked(u, v)
        }
    }

    pub(crate) fn eval_unchecked(&self, u: f64, v: f64) -> Vec<f64> {
        let z = Complex64::new(u, v);
        self.coeffs
            .iter()
            .map(|c| c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, ck| acc * z + ck).re)
            .collect()
    }

    /// `f_i'(z)` for each component.
    pub(crate) fn holomorphic_derivatives(&self, u: f64, v: f64) -> Vec<Complex64> {
        let z = Complex64::new(u, v);
        self.coeffs
            .iter()
            .map(|c| {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in (1..c.len()).rev() {
                    acc = acc * z + c[k] * k as f64;
                }
                acc
            })
            .collect()
    }

    /// `(dr/du, dr/dv)`.
    pub fn partials(&self, u: f64, v: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        Self::check(u, v)?;
        Ok(self.partials_unchecked(u, v))
    }

    pub(crate) fn partials_unchecked(&self, u: f64, v: f64) -> (Vec<f64>, Vec<f64>) {
        let d = self.holomorphic_derivatives(u, v);
        (d.iter().map(|w| w.re).collect(), d.iter().map(|w| -w.im).collect())
    }

    pub fn first_fundamental_form(&self, u: f64, v: f64) -> Result<FirstFundamentalForm> {
        Self::check(u, v)?;
        Ok(self.metric_unchecked(u, v))
    }

    pub(crate) fn metric_unchecked(&self, u: f64, v: f64) -> FirstFundamentalForm {
        let mut m = FirstFundamentalForm { e: 0.0, f: 0.0, g: 0.0 };
        for w in self.holomorphic_derivatives(u, v) {
            let (ru, rv) = (w.re, -w.im);
            m.e += ru * ru;
            m.f += ru * rv;
            m.g += rv * rv;
        }
        m
    }

    /// Closed-form `1/2 \iint (E + G)`.
    pub fn dirichlet_energy(&self) -> f64 {
        self.boundary.spectral_energy()
    }

    /// The same integral by polar quadrature.
    pub fn dirichlet_energy_quadrature(&self, grid: GridSpec) -> f64 {
        PolarGrid::disc(grid).integrate(|u, v| {
            let m = self.metric_unchecked(u, v);
            0.5 * (m.e + m.g)
        })
    }

    /// `\iint sqrt(EG - F^2)` by polar quadrature.
    pub fn area(&self, grid: GridSpec) -> AreaResult {
        let [area, clipped] = PolarGrid::disc(grid).integrate_many(|u, v| {
            let det = self.metric_unchecked(u, v).det();
            if det < 0.0 {
                [0.0, 1.0]
            } else {
                [det.sqrt(), 0.0]
            }
        });
        // The clipped count was weighted; recount directly.
        let clipped = if clipped > 0.0 {
            PolarGrid::disc(grid)
                .points()
                .filter(|&(u, v, _)| self.metric_unchecked(u, v).det() < 0.0)
                .count()
        } else {
            0
        };
        AreaResult { area, clipped }
    }

    /// Interior local minima of `E + G` below `tol * mean(E + G)`.
    ///
    /// Scans a Cartesian grid (odd size, so the origin is a node) inside
    /// radius 0.95, then refines each candidate by compass search.
    pub fn find_branch_points(&self, tol: f64) -> Vec<BranchPoint> {
        self.find_branch_points_on(tol, 121)
    }

    pub fn find_branch_points_on(&self, tol: f64, size: usize) -> Vec<BranchPoint> {
        use rayon::prelude::*;
        let size = size | 1;
        let h = 2.0 / (size - 1) as f64;
        let limit = 0.95;
        let coord = |i: usize| -1.0 + h * i as f64;
        let values: Vec<Option<f64>> = (0..size * size)
            .into_par_iter()
            .map(|idx| {
                let (u, v) = (coord(idx % size), coord(idx / size));
                (u.hypot(v) <= limit).then(|| {
                    let m = self.metric_unchecked(u, v);
                    m.e + m.g
                })
            })
            .collect();
        let inside: Vec<f64> = values.iter().flatten().copied().collect();
        let mean = inside.iter().sum::<f64>() / inside.len() as f64;
        let threshold = tol * mean;
        let sum_at = |u: f64, v: f64| {
            let m = self.metric_unchecked(u, v);
            m.e + m.g
        };

        let mut found: Vec<BranchPoint> = Vec::new();
        for iy in 1..size - 1 {
            for ix in 1..size - 1 {
                let Some(s) = values[iy * size + ix] else { continue };
                if s >= threshold {
                    continue;
                }
                let mut is_min = true;
                'nb: for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let j = (iy as i64 + dy) as usize * size + (ix as i64 + dx) as usize;
                        match values[j] {
                            Some(t) if t > s => {}
                            _ => {
                                is_min = false;
                                break 'nb;
                            }
                        }
                    }
                }
                if !is_min {
                    continue;
                }
                let (mut u, mut v, mut best) = (coord(ix), coord(iy), s);
                let mut step = 0.5 * h;
                while step > 1e-10 {
                    let mut moved = false;
                    for (du, dv) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
                        let (nu, nv) = (u + du, v + dv);
                        if nu.hypot(nv) >= limit {
                            continue;
                        }
                        let t = sum_at(nu, nv);
                        if t < best {
                            (u, v, best) = (nu, nv, t);
                            moved = true;
                        }
                    }
                    if !moved {
                        step *= 0.5;
                    }
                }
                if found.iter().all(|p| (p.u - u).hypot(p.v - v) > h) {
                    found.push(BranchPoint { u, v, value: best });
                }
            }
        }
        found
    }
}

/// Poisson-integral value of the trace sampled at `theta_j = 2 pi j / N`,
/// evaluated by the trapezoid rule. Used to cross-check the series route.
pub fn poisson_integral(trace: &[f64], dimension: usize, u: f64, v: f64) -> Result<Vec<f64>> {
    if u * u + v * v >= 1.0 {
        return Err(PlateauError::Domain { u, v });
    }
    let n = trace.len() / dimension;
    let (rho, theta) = (u.hypot(v), v.atan2(u));
    let mut out = vec![0.0; dimension];
    for (j, p) in trace.chunks(dimension).enumerate() {
        let t = TAU * j as f64 / n as f64;
        let kernel = (1.0 - rho * rho) / (1.0 - 2.0 * rho * (theta - t).cos() + rho * rho);
        out.iter_mut().zip(p).for_each(|(o, x)| *o += kernel * x);
    }
    out.iter_mut().for_each(|o| *o /= n as f64);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn monomial(k: usize, n: usize) -> HarmonicDisc {
        let trace: Vec<f64> = (0..n)
            .flat_map(|j| {
                let t = TAU * j as f64 / n as f64;
                [(k as f64 * t).cos(), (k as f64 * t).sin()]
            })
            .collect();
        HarmonicDisc::new(fit_fourier(&trace, 2).unwrap())
    }

    fn stretch() -> HarmonicDisc {
        // r(u, v) = (2u, v)
        HarmonicDisc::new(FourierBoundary::from_coefficients(
            2,
            vec![0.0, 0.0],
            vec![vec![2.0, 0.0]],
            vec![vec![0.0, 1.0]],
        ))
    }

    fn constant() -> HarmonicDisc {
        let trace: Vec<f64> = (0..64).flat_map(|_| [0.3, -1.2, 2.0]).collect();
        HarmonicDisc::new(fit_fourier(&trace, 3).unwrap())
    }

    #[test]
    fn fit_circle_coefficients() {
        let h = monomial(1, 256);
        let fb = h.boundary();
        assert_abs_diff_eq!(fb.a(1)[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fb.a(1)[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fb.b(1)[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fb.b(1)[1], 1.0, epsilon = 1e-12);
        for k in 2..=fb.max_degree() {
            assert!(fb.a(k).iter().chain(fb.b(k)).all(|x| x.abs() < 1e-12));
        }
        assert!(fb.a0().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn fit_constant_and_degree_two() {
        let fb = constant().boundary().clone();
        assert_abs_diff_eq!(fb.a0()[0], 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(fb.a0()[2], 4.0, epsilon = 1e-12);
        for k in 1..=fb.max_degree() {
            assert!(fb.a(k).iter().chain(fb.b(k)).all(|x| x.abs() < 1e-12));
        }
        let fb = monomial(2, 64).boundary().clone();
        assert_abs_diff_eq!(fb.a(2)[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fb.b(2)[1], 1.0, epsilon = 1e-12);
        assert!(fb.a(1).iter().chain(fb.b(1)).all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn too_few_samples_is_degree_error() {
        let trace = vec![0.0; 2 * 8];
        assert!(matches!(
            FourierBoundary::fit(&trace, 2, 4),
            Err(PlateauError::Degree { .. })
        ));
    }

    #[test]
    fn eval_examples() {
        let id = monomial(1, 64);
        let p = id.eval(0.0, 0.0).unwrap();
        assert!(p.iter().all(|x| x.abs() < 1e-14));
        let p = id.eval(0.5, 0.0).unwrap();
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(p[1], 0.0, epsilon = 1e-13);
        let sq = monomial(2, 64);
        let (rho, theta) = (0.7_f64, 1.1_f64);
        let p = sq.eval(rho * theta.cos(), rho * theta.sin()).unwrap();
        assert_abs_diff_eq!(p[0], rho * rho * (2.0 * theta).cos(), epsilon = 1e-13);
        assert_abs_diff_eq!(p[1], rho * rho * (2.0 * theta).sin(), epsilon = 1e-13);
        assert!(matches!(id.eval(0.8, 0.6), Err(PlateauError::Domain { .. })));
    }

    #[test]
    fn mean_value_property() {
        let h = constant();
        let p = h.eval(0.0, 0.0).unwrap();
        for (x, a) in p.iter().zip(h.boundary().a0()) {
            assert_eq!(*x, 0.5 * a);
        }
    }

    #[test]
    fn metric_examples() {
        let m = monomial(1, 64).first_fundamental_form(0.3, -0.2).unwrap();
        assert_abs_diff_eq!(m.e, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(m.g, 1.0, epsilon = 1e-13);
        assert_abs_diff_eq!(m.f, 0.0, epsilon = 1e-13);
        // z^2: |d/dz z^2|^2 = 4 rho^2
        let rho = 0.6_f64;
        let m = monomial(2, 64).first_fundamental_form(rho * 0.8, rho * 0.6).unwrap();
        assert_abs_diff_eq!(m.e, 4.0 * rho * rho, epsilon = 1e-12);
        assert_abs_diff_eq!(m.g, 4.0 * rho * rho, epsilon = 1e-12);
        assert_abs_diff_eq!(m.f, 0.0, epsilon = 1e-12);
        let m = constant().first_fundamental_form(0.1, 0.1).unwrap();
        assert!(m.e < 1e-24 && m.f.abs() < 1e-24 && m.g < 1e-24);
    }

    #[test]
    fn energy_examples_spectral_and_quadrature() {
        let grid = GridSpec::default();
        let id = monomial(1, 64);
        assert_abs_diff_eq!(id.dirichlet_energy(), PI, epsilon = 1e-12);
        assert_abs_diff_eq!(id.dirichlet_energy_quadrature(grid), PI, epsilon = 1e-10);
        let sq = monomial(2, 64);
        assert_abs_diff_eq!(sq.dirichlet_energy(), TAU, epsilon = 1e-12);
        assert_abs_diff_eq!(sq.dirichlet_energy_quadrature(grid), TAU, epsilon = 1e-10);
        assert!(constant().dirichlet_energy() < 1e-24);
    }

    #[test]
    fn area_examples() {
        let grid = GridSpec::default();
        assert_abs_diff_eq!(monomial(1, 64).area(grid).area, PI, epsilon = 1e-6);
        assert_abs_diff_eq!(monomial(2, 64).area(grid).area, TAU, epsilon = 1e-4);
        assert!(constant().area(grid).area < 1e-12);
        assert_abs_diff_eq!(stretch().area(grid).area, TAU, epsilon = 1e-10);
    }

    #[test]
    fn branch_points() {
        let bp = monomial(2, 64).find_branch_points(1e-2);
        assert_eq!(bp.len(), 1);
        assert!(bp[0].u.hypot(bp[0].v) < 2.0 / 120.0);
        let bp = monomial(3, 64).find_branch_points(1e-2);
        assert_eq!(bp.len(), 1);
        assert!(bp[0].u.hypot(bp[0].v) < 2.0 / 120.0);
        assert!(monomial(1, 64).find_branch_points(1e-2).is_empty());
    }

    #[test]
    fn poisson_matches_series() {
        let n = 128;
        let trace: Vec<f64> = (0..n)
            .flat_map(|j| {
                let t = TAU * j as f64 / n as f64;
                [t.cos() + 0.3 * (3.0 * t).sin(), 0.5 * (2.0 * t).cos(), t.sin()]
            })
            .collect();
        let h = HarmonicDisc::new(fit_fourier(&trace, 3).unwrap());
        let a = h.eval(0.3, -0.4).unwrap();
        let b = poisson_integral(&trace, 3, 0.3, -0.4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn discrete_laplacian_vanishes() {
        let n = 64;
        let trace: Vec<f64> = (0..n)
            .flat_map(|j| {
                let t = TAU * j as f64 / n as f64;
                [t.cos() + 0.2 * (4.0 * t).cos(), (2.0 * t).sin() - 0.1 * t.cos()]
            })
            .collect();
        let h = HarmonicDisc::new(fit_fourier(&trace, 2).unwrap());
        let step = 1e-3;
        for (u, v) in [(0.1, 0.2), (-0.5, 0.3), (0.0, -0.7)] {
            let c = h.eval(u, v).unwrap();
            let e = h.eval(u + step, v).unwrap();
            let w = h.eval(u - step, v).unwrap();
            let nn = h.eval(u, v + step).unwrap();
            let s = h.eval(u, v - step).unwrap();
            for i in 0..2 {
                let lap = (e[i] + w[i] + nn[i] + s[i] - 4.0 * c[i]) / (step * step);
                assert!(lap.abs() < 1e-4, "laplacian {lap}");
            }
        }
    }

    #[test]
    fn partials_converge_at_second_order() {
        let n = 64;
        let trace: Vec<f64> = (0..n)
            .flat_map(|j| {
                let t = TAU * j as f64 / n as f64;
                [t.cos() + 0.3 * (3.0 * t).sin(), (2.0 * t).sin(), 0.4 * (5.0 * t).cos()]
            })
            .collect();
        let h = HarmonicDisc::new(fit_fourier(&trace, 3).unwrap());
        let (u, v) = (0.35, -0.42);
        let (ru, _) = h.partials(u, v).unwrap();
        let err = |step: f64| {
            let p = h.eval(u + step, v).unwrap();
            let m = h.eval(u - step, v).unwrap();
            (0..3)
                .map(|i| ((p[i] - m[i]) / (2.0 * step) - ru[i]).abs())
                .fold(0.0, f64::max)
        };
        let (e1, e2) = (err(1e-2), err(5e-3));
        let order = (e1 / e2).log2();
        assert!(order > 1.9, "observed order {order}");
    }
}
