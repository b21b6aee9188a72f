//! Two-contour (annulus-type) minimal surfaces.
//!
//! The surface is the harmonic extension to `{rho <= |z| <= 1}` of the
//! traces `g1 o phi1^{-1}` on `|z| = 1` and `g2 o phi2^{-1}` on `|z| = rho`.
//! Its Dirichlet energy is minimized jointly over both correspondences and
//! the modulus `rho`.
//!
//! With outer coefficients `(a_k, b_k)`, inner `(c_k, d_k)` and `q = rho^k`,
//! the energy splits as
//!
//! ```text
//! D = A(g1) + A(g2)
//!   + sum_k pi k / (1 - q^2) [q^2 (|a_k|^2 + |b_k|^2 + |c_k|^2 + |d_k|^2)
//!                             - 2 q (a_k.c_k + b_k.d_k)]
//!   + pi |m1 - m2|^2 / log(1/rho)
//! ```
//!
//! where `A` is the disc functional of each trace and `m1`, `m2` are the
//! trace means. Coefficients come from the same node quadrature as `A`.

use crate::contour::{Contour, ContourSpec};
use crate::diagnostics::{certify_metric, ConformalityDefect};
use crate::douglas::{node_weights, weights_transpose, Anchor, BoundaryNodes, DouglasProblem, Gauge, Reparameterization};
use crate::error::{PlateauError, Result};
use crate::harmonic::FirstFundamentalForm;
use crate::optim::{self, Evaluation, HistoryEntry, StopReason};
use crate::quadrature::PolarGrid;
use crate::solver::SolverConfig;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// Highest mode whose coupling `rho^k` still exceeds `1e-17`, capped by
/// what `n` nodes resolve.
fn coupling_degree(rho: f64, n: usize) -> usize {
    let k = (1e-17f64.ln() / rho.ln()).ceil() as usize;
    k.clamp(1, (n / 2).saturating_sub(1).max(1))
}

/// Coefficients of one trace from the node quadrature: `a_k`, `b_k` for
/// `k = 1..=kmax` (degree-major) and the mean.
struct Coefficients {
    a: Vec<f64>,
    b: Vec<f64>,
    mean: Vec<f64>,
}

fn coefficients(nodes: &BoundaryNodes, angles: &[f64], w: &[f64], kmax: usize) -> Coefficients {
    let dim = nodes.dimension();
    let mut a = vec![0.0; kmax * dim];
    let mut b = vec![0.0; kmax * dim];
    let mut mean = vec![0.0; dim];
    for (j, (&phi, &wj)) in angles.iter().zip(w).enumerate() {
        let p = nodes.point(j);
        let step = Complex64::from_polar(1.0, phi);
        let mut zk = Complex64::new(1.0, 0.0);
        for k in 0..kmax {
            zk *= step;
            for i in 0..dim {
                a[k * dim + i] += wj * p[i] * zk.re;
                b[k * dim + i] += wj * p[i] * zk.im;
            }
        }
        for i in 0..dim {
            mean[i] += wj * p[i];
        }
    }
    a.iter_mut().chain(b.iter_mut()).for_each(|v| *v /= PI);
    mean.iter_mut().for_each(|v| *v /= TAU);
    Coefficients { a, b, mean }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Largest angular span of one node, in units of the uniform spacing,
/// before the discrete functional is treated as unresolved. Beyond it a
/// trace can concentrate into a bubble whose cost the node sums no longer
/// see, and the discrete energy stops bounding the continuous one.
pub const RESOLUTION_LIMIT: f64 = 8.0;

/// Largest modulus whose coupling is carried by well-resolved modes: the
/// coupling of mode `n / 4` must be below `1e-8`. Node-quadrature
/// coefficients lose accuracy near `n / 2`, and closer to `rho = 1` the
/// stiff cross terms amplify that error without bound.
pub fn resolvable_modulus(n: usize) -> f64 {
    1e-8f64.powf(1.0 / (n / 4).max(1) as f64)
}

/// The joint functional for fixed contours and node count. Its value is
/// infinite when a node weight is non-positive or exceeds
/// [`RESOLUTION_LIMIT`] times the uniform spacing.
pub struct AnnulusProblem {
    n: usize,
    outer_nodes: BoundaryNodes,
    inner_nodes: BoundaryNodes,
    outer: DouglasProblem,
    inner: DouglasProblem,
}

/// Value and node-angle gradients of the joint functional.
#[derive(Debug, Clone)]
pub struct AnnulusEvaluation {
    pub energy: f64,
    pub outer_gradient: Vec<f64>,
    pub inner_gradient: Vec<f64>,
    /// Partial derivative in `rho` at fixed correspondences.
    pub rho_derivative: f64,
}

impl AnnulusProblem {
    pub fn new(outer: &Contour, inner: &Contour, n: usize) -> Result<Self> {
        if outer.dimension() != inner.dimension() {
            return Err(PlateauError::Validation(format!(
                "contours live in different dimensions ({} and {})",
                outer.dimension(),
                inner.dimension()
            )));
        }
        let outer_nodes = BoundaryNodes::new(outer, n);
        let inner_nodes = BoundaryNodes::new(inner, n);
        Ok(Self {
            n,
            outer: DouglasProblem::new(&outer_nodes),
            inner: DouglasProblem::new(&inner_nodes),
            outer_nodes,
            inner_nodes,
        })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn evaluate(&self, rho: f64, outer: &[f64], inner: &[f64]) -> AnnulusEvaluation {
        let n = self.n;
        let w1 = node_weights(outer);
        let w2 = node_weights(inner);
        let limit = RESOLUTION_LIMIT * TAU / n as f64;
        let resolved = w1.iter().chain(&w2).all(|&w| w <= limit);
        let (e1, mut g1) = self.outer.energy_and_gradient(outer);
        let (e2, mut g2) = self.inner.energy_and_gradient(inner);
        if !(resolved && e1.is_finite() && e2.is_finite()) {
            return AnnulusEvaluation {
                energy: f64::INFINITY,
                outer_gradient: vec![0.0; n],
                inner_gradient: vec![0.0; n],
                rho_derivative: 0.0,
            };
        }
        let dim = self.outer_nodes.dimension();
        let kmax = coupling_degree(rho, n);
        let c1 = coefficients(&self.outer_nodes, outer, &w1, kmax);
        let c2 = coefficients(&self.inner_nodes, inner, &w2, kmax);

        // Coupling value and its partials in the coefficients.
        let mut coupling = 0.0;
        let mut d_rho = 0.0;
        let mut ga = vec![0.0; kmax * dim];
        let mut gb = vec![0.0; kmax * dim];
        let mut gc = vec![0.0; kmax * dim];
        let mut gd = vec![0.0; kmax * dim];
        for k in 1..=kmax {
            let q = rho.powi(k as i32);
            let den = 1.0 - q * q;
            let alpha = PI * k as f64 * q * q / den;
            let beta = 2.0 * PI * k as f64 * q / den;
            let dalpha = PI * k as f64 * 2.0 * q / (den * den);
            let dbeta = 2.0 * PI * k as f64 * (1.0 + q * q) / (den * den);
            let dq = k as f64 * rho.powi(k as i32 - 1);
            let r = (k - 1) * dim..k * dim;
            let (a, b) = (&c1.a[r.clone()], &c1.b[r.clone()]);
            let (c, d) = (&c2.a[r.clone()], &c2.b[r.clone()]);
            let sq = dot(a, a) + dot(b, b) + dot(c, c) + dot(d, d);
            let cross = dot(a, c) + dot(b, d);
            coupling += alpha * sq - beta * cross;
            d_rho += (dalpha * sq - dbeta * cross) * dq;
            for i in 0..dim {
                let idx = (k - 1) * dim + i;
                ga[idx] = 2.0 * alpha * a[i] - beta * c[i];
                gb[idx] = 2.0 * alpha * b[i] - beta * d[i];
                gc[idx] = 2.0 * alpha * c[i] - beta * a[i];
                gd[idx] = 2.0 * alpha * d[i] - beta * b[i];
            }
        }
        let log_inv = -rho.ln();
        let gamma = PI / log_inv;
        let dm: Vec<f64> = c1.mean.iter().zip(&c2.mean).map(|(x, y)| x - y).collect();
        coupling += gamma * dot(&dm, &dm);
        d_rho += PI / (rho * log_inv * log_inv) * dot(&dm, &dm);
        let gm1: Vec<f64> = dm.iter().map(|v| 2.0 * gamma * v).collect();
        let gm2: Vec<f64> = gm1.iter().map(|v| -v).collect();

        let pull = |nodes: &BoundaryNodes, angles: &[f64], w: &[f64], ga: &[f64], gb: &[f64], gm: &[f64]| {
            // H_j = dC/dw_j, Hp_j = (dC/dphi_j at fixed w) / w_j.
            let per_node: Vec<(f64, f64)> = (0..n)
                .into_par_iter()
                .map(|j| {
                    let p = nodes.point(j);
                    let step = Complex64::from_polar(1.0, angles[j]);
                    let mut zk = Complex64::new(1.0, 0.0);
                    let (mut h, mut hp) = (0.0, 0.0);
                    for k in 0..kmax {
                        zk *= step;
                        let r = k * dim..(k + 1) * dim;
                        let pa = dot(p, &ga[r.clone()]);
                        let pb = dot(p, &gb[r]);
                        h += pa * zk.re + pb * zk.im;
                        hp += (k + 1) as f64 * (pb * zk.re - pa * zk.im);
                    }
                    (h / PI + dot(p, gm) / TAU, hp / PI)
                })
                .collect();
            let hs: Vec<f64> = per_node.iter().map(|v| v.0).collect();
            let back = weights_transpose(&hs);
            (0..n).map(|j| back[j] + w[j] * per_node[j].1).collect::<Vec<f64>>()
        };
        let d1 = pull(&self.outer_nodes, outer, &w1, &ga, &gb, &gm1);
        let d2 = pull(&self.inner_nodes, inner, &w2, &gc, &gd, &gm2);
        g1.iter_mut().zip(&d1).for_each(|(g, d)| *g += d);
        g2.iter_mut().zip(&d2).for_each(|(g, d)| *g += d);
        AnnulusEvaluation {
            energy: e1 + e2 + coupling,
            outer_gradient: g1,
            inner_gradient: g2,
            rho_derivative: d_rho,
        }
    }
}

/// Laurent-type harmonic map on `{rho <= |z| <= 1}`:
/// `x_i = A0 + B0 log r + Re sum_k [(A_k - i B_k) z^k + (C_k + i D_k) z^-k]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusMap {
    pub rho: f64,
    pub dimension: usize,
    pub constant: Vec<f64>,
    pub log_term: Vec<f64>,
    /// Per component: `A_k - i B_k` for `k = 1..`, stored as `[re, im]`.
    pub positive: Vec<Vec<[f64; 2]>>,
    /// Per component: `C_k + i D_k`.
    pub negative: Vec<Vec<[f64; 2]>>,
}

impl AnnulusMap {
    fn build(rho: f64, dim: usize, outer: &Coefficients, inner: &Coefficients, kmax: usize) -> Self {
        let mut positive = vec![Vec::with_capacity(kmax); dim];
        let mut negative = vec![Vec::with_capacity(kmax); dim];
        for k in 1..=kmax {
            let q = rho.powi(k as i32);
            let den = 1.0 - q * q;
            for i in 0..dim {
                let idx = (k - 1) * dim + i;
                let (a, b) = (outer.a[idx], outer.b[idx]);
                let (c, d) = (inner.a[idx], inner.b[idx]);
                let big_a = (a - q * c) / den;
                let big_b = (b - q * d) / den;
                let big_c = q * (c - q * a) / den;
                let big_d = q * (d - q * b) / den;
                positive[i].push([big_a, -big_b]);
                negative[i].push([big_c, big_d]);
            }
        }
        let log_term = outer
            .mean
            .iter()
            .zip(&inner.mean)
            .map(|(m1, m2)| (m2 - m1) / rho.ln())
            .collect();
        Self {
            rho,
            dimension: dim,
            constant: outer.mean.clone(),
            log_term,
            positive,
            negative,
        }
    }

    fn check(&self, u: f64, v: f64) -> Result<()> {
        let r = u.hypot(v);
        if r > 1.0 || r < self.rho || !r.is_finite() {
            return Err(PlateauError::Domain { u, v });
        }
        Ok(())
    }

    pub fn eval(&self, u: f64, v: f64) -> Result<Vec<f64>> {
        self.check(u, v)?;
        Ok(self.eval_unchecked(u, v))
    }

    fn eval_unchecked(&self, u: f64, v: f64) -> Vec<f64> {
        let z = Complex64::new(u, v);
        let zi = z.inv();
        let log_r = 0.5 * (u * u + v * v).ln();
        (0..self.dimension)
            .map(|i| {
                let horner = |coef: &[[f64; 2]], w: Complex64| {
                    coef.iter()
                        .rev()
                        .fold(Complex64::new(0.0, 0.0), |acc, c| (acc + Complex64::new(c[0], c[1])) * w)
                };
                self.constant[i]
                    + self.log_term[i] * log_r
                    + horner(&self.positive[i], z).re
                    + horner(&self.negative[i], zi).re
            })
            .collect()
    }

    /// `(dr/du, dr/dv)`.
    pub fn partials(&self, u: f64, v: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        self.check(u, v)?;
        Ok(self.partials_unchecked(u, v))
    }

    fn partials_unchecked(&self, u: f64, v: f64) -> (Vec<f64>, Vec<f64>) {
        let z = Complex64::new(u, v);
        let zi = z.inv();
        let r2 = u * u + v * v;
        let mut du = Vec::with_capacity(self.dimension);
        let mut dv = Vec::with_capacity(self.dimension);
        for i in 0..self.dimension {
            // F'(z) = sum k P_k z^(k-1) - sum k N_k z^-(k+1)
            let mut pos = Complex64::new(0.0, 0.0);
            for (k, c) in self.positive[i].iter().enumerate().rev() {
                pos = pos * z + Complex64::new(c[0], c[1]) * (k + 1) as f64;
            }
            let mut neg = Complex64::new(0.0, 0.0);
            for (k, c) in self.negative[i].iter().enumerate().rev() {
                neg = neg * zi + Complex64::new(c[0], c[1]) * (k + 1) as f64;
            }
            let fp = pos - neg * zi * zi;
            let b0 = self.log_term[i];
            du.push(fp.re + b0 * u / r2);
            dv.push(-fp.im + b0 * v / r2);
        }
        (du, dv)
    }

    pub fn metric(&self, u: f64, v: f64) -> Result<FirstFundamentalForm> {
        self.check(u, v)?;
        Ok(self.metric_unchecked(u, v))
    }

    fn metric_unchecked(&self, u: f64, v: f64) -> FirstFundamentalForm {
        let (du, dv) = self.partials_unchecked(u, v);
        FirstFundamentalForm {
            e: dot(&du, &du),
            f: dot(&du, &dv),
            g: dot(&dv, &dv),
        }
    }

    pub fn degree(&self) -> usize {
        self.positive.first().map_or(0, Vec::len)
    }

    /// Samples for mesh output; points are clamped into the annulus.
    pub fn sample(&self, u: f64, v: f64) -> Vec<f64> {
        let r = u.hypot(v).clamp(self.rho, 1.0);
        let t = v.atan2(u);
        self.eval_unchecked(r * t.cos(), r * t.sin())
    }
}

const REFINE_LIMIT: usize = 80;

/// Whether a root of the modulus equation is a minimum or a maximum of the
/// energy along `rho`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModulusKind {
    Minimum,
    Maximum,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryModulus {
    pub rho: f64,
    pub energy: f64,
    pub kind: ModulusKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnulusStatus {
    Converged,
    NotConverged,
    ModulusAtBracketEnd,
}

/// One point of the energy-versus-modulus trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModulusSample {
    pub rho: f64,
    pub energy: f64,
    /// `dD/drho` at the minimizing correspondences.
    pub rho_derivative: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    /// Whether the inner minimization reached `grad_tol`.
    pub converged: bool,
    /// Whether `rho` is at most [`resolvable_modulus`] for the node count.
    /// Only converged, resolved samples bracket roots of the modulus
    /// equation or stand in for a bracket end.
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnulusReport {
    pub outer_contour: ContourSpec,
    pub inner_contour: ContourSpec,
    pub config: SolverConfig,
    pub modulus: f64,
    pub energy: f64,
    /// The third equation: `dD/drho` at the reported modulus.
    pub rho_derivative: f64,
    pub dirichlet_quadrature: f64,
    pub area: f64,
    pub gap: f64,
    pub clipped: usize,
    pub defect: ConformalityDefect,
    pub iterations: usize,
    pub grad_norm: f64,
    pub stop_reason: StopReason,
    pub status: AnnulusStatus,
    pub converged: bool,
    /// Every evaluated modulus in increasing `rho` order.
    pub modulus_trace: Vec<ModulusSample>,
    /// All roots of the modulus equation found inside the bracket.
    pub stationary_moduli: Vec<StationaryModulus>,
    pub history: Vec<HistoryEntry>,
    pub outer_reparameterization: Reparameterization,
    pub inner_reparameterization: Reparameterization,
}

#[derive(Debug, Clone)]
pub struct AnnulusSolution {
    pub map: AnnulusMap,
    pub outer: Reparameterization,
    pub inner: Reparameterization,
    pub report: AnnulusReport,
}

impl AnnulusSolution {
    /// Turns the status flags into errors for callers that want them.
    pub fn into_result(self) -> Result<Self> {
        match self.report.status {
            AnnulusStatus::Converged => Ok(self),
            AnnulusStatus::ModulusAtBracketEnd => {
                let [lo, hi] = self.report.config.modulus_bracket;
                Err(PlateauError::ModulusAtBracketEnd {
                    rho: self.report.modulus,
                    lo,
                    hi,
                })
            }
            AnnulusStatus::NotConverged => Err(PlateauError::NotConverged(format!(
                "annulus solve stopped with gradient {:e}",
                self.report.grad_norm
            ))),
        }
    }
}

/// Minimum over both correspondences at one fixed modulus.
#[derive(Debug, Clone)]
struct Candidate {
    rho: f64,
    x: Vec<f64>,
    energy: f64,
    rho_derivative: f64,
    grad_norm: f64,
    iterations: usize,
    stop: StopReason,
    history: Vec<HistoryEntry>,
}

struct Setup<'a> {
    problem: &'a AnnulusProblem,
    outer_gauge: Gauge,
    inner_gauge: Gauge,
    cfg: &'a SolverConfig,
}

impl Setup<'_> {
    fn split<'x>(&self, x: &'x [f64]) -> (&'x [f64], &'x [f64]) {
        x.split_at(self.outer_gauge.len())
    }

    fn angles(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (x1, x2) = self.split(x);
        (self.outer_gauge.angles(x1), self.inner_gauge.angles(x2))
    }

    fn start(&self) -> Vec<f64> {
        let n = self.problem.len();
        let uniform: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
        let mut x = self.outer_gauge.variables(&uniform);
        x.extend(self.inner_gauge.variables(&uniform));
        x
    }

    /// Root of `dD/drho` between two scan candidates of opposite slope by
    /// the Illinois variant of regula falsi, each solve warm-started from
    /// the nearer bracket end. Returns every evaluated candidate, the root
    /// estimate last.
    fn refine(&self, left: &Candidate, right: &Candidate) -> Vec<Candidate> {
        let mut a = left.clone();
        let mut b = right.clone();
        let (mut fa, mut fb) = (a.rho_derivative, b.rho_derivative);
        let mut steps = Vec::new();
        let mut side = 0i8;
        let mut prev = f64::NAN;
        for _ in 0..REFINE_LIMIT {
            let mut rho = (a.rho * fb - b.rho * fa) / (fb - fa);
            if !(rho > a.rho && rho < b.rho) {
                rho = 0.5 * (a.rho + b.rho);
            }
            let warm = if rho - a.rho < b.rho - rho { &a.x } else { &b.x };
            let c = self.minimize(rho, warm.clone());
            let fc = c.rho_derivative;
            steps.push(c.clone());
            if (fc < 0.0) == (fa < 0.0) {
                a = c;
                fa = fc;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = c;
                fb = fc;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
            let width = b.rho - a.rho;
            if fc == 0.0 || width < self.cfg.modulus_tol || (rho - prev).abs() < 0.01 * self.cfg.modulus_tol {
                break;
            }
            prev = rho;
        }
        // The estimate with the smallest slope goes last.
        let best = (0..steps.len())
            .min_by(|&i, &j| steps[i].rho_derivative.abs().total_cmp(&steps[j].rho_derivative.abs()).then(j.cmp(&i)))
            .expect("at least one step");
        let last = steps.remove(best);
        steps.push(last);
        steps
    }

    fn minimize(&self, rho: f64, x0: Vec<f64>) -> Candidate {
        let eval = |x: &[f64]| {
            let (a1, a2) = self.angles(x);
            let r = self.problem.evaluate(rho, &a1, &a2);
            let (x1, x2) = self.split(x);
            let mut gradient = self.outer_gauge.variable_gradient(x1, &r.outer_gradient);
            gradient.extend(self.inner_gauge.variable_gradient(x2, &r.inner_gradient));
            Evaluation {
                value: r.energy,
                gradient,
                stationarity: self
                    .outer_gauge
                    .stationarity(&r.outer_gradient)
                    .max(self.inner_gauge.stationarity(&r.inner_gradient)),
            }
        };
        let opts = self.cfg.optim_options();
        let out = optim::minimize(eval, x0, self.cfg.grad_tol, &opts);
        let (a1, a2) = self.angles(&out.x);
        let rho_derivative = self.problem.evaluate(rho, &a1, &a2).rho_derivative;
        Candidate {
            rho,
            x: out.x,
            energy: out.value,
            rho_derivative,
            grad_norm: out.stationarity,
            iterations: out.iterations,
            stop: out.stop,
            history: out.history,
        }
    }
}

/// Spans two contours by an annulus-type surface. Both contours should be
/// traversed in the same rotational sense; `outer` is placed on `|z| = 1`.
///
/// The modulus is found by a parallel coarse scan of
/// `cfg.modulus_samples` values over the bracket. Every sign change of
/// `dD/drho` between neighbours is refined to `cfg.modulus_tol`; the
/// lowest-energy minimum is returned, or the lowest maximum when the
/// bracket holds no minimum. With no root at all the outcome is
/// [`AnnulusStatus::ModulusAtBracketEnd`] at the lowest-energy scan point.
pub fn solve_two_contours(outer: &Contour, inner: &Contour, cfg: &SolverConfig) -> Result<AnnulusSolution> {
    cfg.validate()?;
    for c in [outer, inner] {
        if c.length() < crate::contour::MIN_LENGTH {
            return Err(PlateauError::DegenerateContour(format!(
                "total length {} is below {}",
                c.length(),
                crate::contour::MIN_LENGTH
            )));
        }
    }
    let n = cfg.nodes;
    let problem = AnnulusProblem::new(outer, inner, n)?;
    let setup = Setup {
        problem: &problem,
        outer_gauge: Gauge::new(n, &[Anchor { node: 0, angle: 0.0 }])?,
        inner_gauge: Gauge::new(n, &[])?,
        cfg,
    };
    let x0 = setup.start();
    let [lo, hi] = cfg.modulus_bracket;
    let m = cfg.modulus_samples;
    let grid: Vec<f64> = (0..m).map(|i| lo + (hi - lo) * i as f64 / (m - 1) as f64).collect();
    let scan: Vec<Candidate> = grid.par_iter().map(|&rho| setup.minimize(rho, x0.clone())).collect();

    let rho_res = resolvable_modulus(n);
    let usable = |c: &Candidate| c.grad_norm < cfg.grad_tol && c.rho <= rho_res;
    // Sign changes of dD/drho between neighbours bracket the roots of the
    // modulus equation; each is refined independently.
    let brackets: Vec<(usize, ModulusKind)> = (0..m - 1)
        .filter_map(|i| {
            let (d0, d1) = (scan[i].rho_derivative, scan[i + 1].rho_derivative);
            if !(usable(&scan[i]) && usable(&scan[i + 1])) {
                None
            } else if d0 < 0.0 && d1 >= 0.0 {
                Some((i, ModulusKind::Minimum))
            } else if d0 > 0.0 && d1 <= 0.0 {
                Some((i, ModulusKind::Maximum))
            } else {
                None
            }
        })
        .collect();
    let refined: Vec<(ModulusKind, Vec<Candidate>)> = brackets
        .par_iter()
        .map(|&(i, kind)| (kind, setup.refine(&scan[i], &scan[i + 1])))
        .collect();

    let mut stationary: Vec<(ModulusKind, Candidate)> = refined
        .iter()
        .map(|(kind, steps)| (*kind, steps.last().expect("refinement evaluates").clone()))
        .collect();
    let lowest = |kind: ModulusKind| {
        stationary
            .iter()
            .enumerate()
            .filter(|(_, s)| s.0 == kind)
            .min_by(|a, b| a.1 .1.energy.total_cmp(&b.1 .1.energy).then(a.0.cmp(&b.0)))
            .map(|(_, s)| s.1.clone())
    };
    let chosen = lowest(ModulusKind::Minimum).or_else(|| lowest(ModulusKind::Maximum));
    let at_end = chosen.is_none() && scan.iter().any(usable);
    let fallback = |only_usable: bool| {
        scan.iter()
            .enumerate()
            .filter(|(_, c)| !only_usable || usable(c))
            .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
            .map(|(_, c)| c.clone())
    };
    let best = chosen
        .or_else(|| fallback(true))
        .or_else(|| fallback(false))
        .expect("non-empty scan");
    stationary.sort_by(|a, b| a.1.rho.total_cmp(&b.1.rho));
    let mut trace: Vec<Candidate> = scan;
    trace.extend(refined.into_iter().flat_map(|(_, steps)| steps));
    trace.sort_by(|a, b| a.rho.total_cmp(&b.rho));

    let (a1, a2) = setup.angles(&best.x);
    let outer_phi = Reparameterization::from_angles(a1, vec![Anchor { node: 0, angle: 0.0 }])?;
    let inner_phi = Reparameterization::from_angles(a2, Vec::new())?;
    let map = annulus_map(&problem, best.rho, &outer_phi, &inner_phi, cfg.degree());
    let grid_spec = cfg.grid.covering(map.degree());
    let cert = certify_metric(&PolarGrid::annulus(grid_spec, best.rho), |u, v| map.metric_unchecked(u, v));
    let met = best.grad_norm < cfg.grad_tol
        && cert.defect.f_defect < cfg.defect_tol
        && cert.defect.eg_defect < cfg.defect_tol;
    let status = if at_end {
        AnnulusStatus::ModulusAtBracketEnd
    } else if met {
        AnnulusStatus::Converged
    } else {
        AnnulusStatus::NotConverged
    };
    let report = AnnulusReport {
        outer_contour: outer.spec().geometry_only(),
        inner_contour: inner.spec().geometry_only(),
        config: cfg.clone(),
        modulus: best.rho,
        energy: best.energy,
        rho_derivative: best.rho_derivative,
        dirichlet_quadrature: cert.chain.dirichlet,
        area: cert.chain.area,
        gap: cert.chain.gap,
        clipped: cert.clipped,
        defect: cert.defect,
        iterations: best.iterations,
        grad_norm: best.grad_norm,
        stop_reason: best.stop,
        status,
        converged: status == AnnulusStatus::Converged,
        modulus_trace: trace
            .iter()
            .map(|c| ModulusSample {
                rho: c.rho,
                energy: c.energy,
                rho_derivative: c.rho_derivative,
                grad_norm: c.grad_norm,
                iterations: c.iterations,
                converged: c.grad_norm < cfg.grad_tol,
                resolved: c.rho <= rho_res,
            })
            .collect(),
        stationary_moduli: stationary
            .iter()
            .map(|(kind, c)| StationaryModulus {
                rho: c.rho,
                energy: c.energy,
                kind: *kind,
            })
            .collect(),
        history: best.history,
        outer_reparameterization: outer_phi.clone(),
        inner_reparameterization: inner_phi.clone(),
    };
    Ok(AnnulusSolution {
        map,
        outer: outer_phi,
        inner: inner_phi,
        report,
    })
}

/// The Laurent map for given correspondences and modulus, with modes up to
/// `degree` (limited by the node count).
pub fn annulus_map(
    problem: &AnnulusProblem,
    rho: f64,
    outer: &Reparameterization,
    inner: &Reparameterization,
    degree: usize,
) -> AnnulusMap {
    let kmax = degree.min(problem.len() / 2 - 1).max(1);
    let w1 = node_weights(outer.angles());
    let w2 = node_weights(inner.angles());
    let c1 = coefficients(&problem.outer_nodes, outer.angles(), &w1, kmax);
    let c2 = coefficients(&problem.inner_nodes, inner.angles(), &w2, kmax);
    AnnulusMap::build(rho, problem.outer_nodes.dimension(), &c1, &c2, kmax)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::ContourSpec;
    use serde_json::json;

    fn circle(radius: f64, z: f64, dim: usize) -> Contour {
        let params = if dim == 3 {
            json!({"radius": radius, "cz": z})
        } else {
            json!({ "radius": radius })
        };
        Contour::from_spec(&ContourSpec::builtin(dim, "circle", params, 512)).unwrap()
    }

    #[test]
    fn concentric_identity_energy() {
        let rho = 0.5;
        let p = AnnulusProblem::new(&circle(1.0, 0.0, 2), &circle(rho, 0.0, 2), 64).unwrap();
        let uniform: Vec<f64> = (0..64).map(|j| TAU * j as f64 / 64.0).collect();
        let r = p.evaluate(rho, &uniform, &uniform);
        assert!((r.energy - PI * (1.0 - rho * rho)).abs() < 1e-10, "{}", r.energy);
        assert!(r.outer_gradient.iter().chain(&r.inner_gradient).all(|g| g.abs() < 1e-10));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let p = AnnulusProblem::new(&circle(1.0, 0.3, 3), &circle(0.8, -0.3, 3), 32).unwrap();
        let n = 32;
        let a1: Vec<f64> = (0..n)
            .map(|j| {
                let t = TAU * j as f64 / n as f64;
                t + 0.1 * t.sin()
            })
            .collect();
        let a2: Vec<f64> = (0..n)
            .map(|j| {
                let t = TAU * j as f64 / n as f64;
                0.2 + t + 0.05 * (2.0 * t).sin()
            })
            .collect();
        let rho = 0.45;
        let r = p.evaluate(rho, &a1, &a2);
        let eps = 1e-6;
        for k in [0, 5, 17] {
            let mut plus = a1.clone();
            plus[k] += eps;
            let mut minus = a1.clone();
            minus[k] -= eps;
            let fd = (p.evaluate(rho, &plus, &a2).energy - p.evaluate(rho, &minus, &a2).energy) / (2.0 * eps);
            assert!((fd - r.outer_gradient[k]).abs() < 1e-6 * (1.0 + fd.abs()), "outer {k}");
            let mut plus = a2.clone();
            plus[k] += eps;
            let mut minus = a2.clone();
            minus[k] -= eps;
            let fd = (p.evaluate(rho, &a1, &plus).energy - p.evaluate(rho, &a1, &minus).energy) / (2.0 * eps);
            assert!((fd - r.inner_gradient[k]).abs() < 1e-6 * (1.0 + fd.abs()), "inner {k}");
        }
        let fd = (p.evaluate(rho + eps, &a1, &a2).energy - p.evaluate(rho - eps, &a1, &a2).energy) / (2.0 * eps);
        assert!((fd - r.rho_derivative).abs() < 1e-6 * (1.0 + fd.abs()));
    }

    #[test]
    fn laurent_map_matches_boundary_traces() {
        let rho = 0.6;
        let p = AnnulusProblem::new(&circle(1.0, 0.0, 2), &circle(rho, 0.0, 2), 64).unwrap();
        let phi = Reparameterization::arclength(64, vec![]).unwrap();
        let map = annulus_map(&p, rho, &phi, &phi, 31);
        for t in [0.0f64, 1.0, 2.5] {
            let outer = map.eval(t.cos(), t.sin()).unwrap();
            assert!((outer[0] - t.cos()).abs() < 1e-12 && (outer[1] - t.sin()).abs() < 1e-12);
            let inner = map.eval(rho * t.cos(), rho * t.sin()).unwrap();
            assert!((inner[0] - rho * t.cos()).abs() < 1e-12);
        }
        let m = map.metric(0.8, 0.0).unwrap();
        assert!((m.e - 1.0).abs() < 1e-12 && m.f.abs() < 1e-12 && (m.g - 1.0).abs() < 1e-12);
        assert!(map.eval(0.1, 0.0).is_err());
    }
}
