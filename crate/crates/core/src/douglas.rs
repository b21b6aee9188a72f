//! The Douglas functional and its relatives on a discrete boundary
//! correspondence.
//!
//! Node `j` of a [`Reparameterization`] sends the angle `phi_j` on the unit
//! circle to the contour parameter `t_j = j / N`. The functional
//!
//! ```text
//! A(g) = 1/(4 pi) \iint |g(theta) - g(phi)|^2 / (4 sin^2((theta - phi)/2)) dtheta dphi
//! ```
//!
//! is evaluated with a tensor trapezoid rule in the contour parameter,
//! weights `w_j ~ h phi'(s_j)` from a sixth-order difference of the node
//! angles (see [`node_weights`]). The diagonal cell uses the limit
//! `|dg/dtheta|^2`; since `dtheta = w_j` per node the diagonal term
//! `w_j^2 |dg/dtheta|^2` reduces to `|g'(t_j)|^2 / N^2`, independent of the
//! angles.

use crate::contour::Contour;
use crate::error::{PlateauError, Result};
use crate::harmonic::FourierBoundary;
use crate::spline::PeriodicSpline;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, TAU};

/// A node pinned to a fixed angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub node: usize,
    pub angle: f64,
}

/// Monotone node map on the circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reparameterization {
    /// `phi_0 < phi_1 < ... < phi_{N-1} < phi_0 + 2 pi`.
    angles: Vec<f64>,
    anchors: Vec<Anchor>,
}

/// The three-point normalization: nodes `floor(kN/3)` pinned at their
/// arclength angles `2 pi floor(kN/3) / N`.
pub fn default_anchors(n: usize) -> Vec<Anchor> {
    (0..3)
        .map(|k| {
            let node = k * n / 3;
            Anchor {
                node,
                angle: TAU * node as f64 / n as f64,
            }
        })
        .collect()
}

impl Reparameterization {
    /// Uniform increments (the arclength start) with the given anchors.
    /// Anchors whose angle differs from the uniform one are honored by
    /// spreading each arc uniformly between its anchors.
    pub fn arclength(n: usize, anchors: Vec<Anchor>) -> Result<Self> {
        let gauge = Gauge::new(n, &anchors)?;
        let angles = gauge.angles(&vec![0.0; gauge.len()]);
        Ok(Self { angles, anchors })
    }

    pub fn from_angles(angles: Vec<f64>, anchors: Vec<Anchor>) -> Result<Self> {
        let n = angles.len();
        if n < 3 {
            return Err(PlateauError::Validation("need at least 3 nodes".into()));
        }
        let monotone = angles.windows(2).all(|w| w[1] > w[0]) && angles[n - 1] < angles[0] + TAU;
        if !monotone {
            return Err(PlateauError::Validation(
                "node angles must be strictly increasing within one turn".into(),
            ));
        }
        for a in &anchors {
            if a.node >= n {
                return Err(PlateauError::Validation(format!("anchor node {} out of range", a.node)));
            }
            let diff = (angles[a.node] - a.angle).rem_euclid(TAU);
            if diff.min(TAU - diff) > 1e-12 {
                return Err(PlateauError::Validation(format!(
                    "node {} is not at its anchored angle",
                    a.node
                )));
            }
        }
        Ok(Self { angles, anchors })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    /// `d_j = phi_j - phi_{j-1}` (with `d_0` closing the loop); sums to 2 pi.
    pub fn increments(&self) -> Vec<f64> {
        let n = self.angles.len();
        (0..n)
            .map(|j| {
                if j == 0 {
                    self.angles[0] + TAU - self.angles[n - 1]
                } else {
                    self.angles[j] - self.angles[j - 1]
                }
            })
            .collect()
    }

    /// Contour parameter of the boundary point at angle `theta`, from a
    /// periodic cubic spline through `(phi_j, j / N)`.
    pub fn inverse_map(&self) -> InverseMap {
        let n = self.angles.len();
        let offset = self.angles[0];
        let knots: Vec<f64> = self.angles.iter().map(|a| a - offset).collect();
        let values: Vec<f64> = knots
            .iter()
            .enumerate()
            .map(|(j, k)| j as f64 / n as f64 - k / TAU)
            .collect();
        InverseMap {
            offset,
            spline: PeriodicSpline::new(knots, TAU, values, 1),
        }
    }
}

/// `theta -> t` for a [`Reparameterization`].
#[derive(Debug, Clone)]
pub struct InverseMap {
    offset: f64,
    spline: PeriodicSpline,
}

impl InverseMap {
    pub fn parameter(&self, theta: f64) -> f64 {
        let s = theta - self.offset;
        (s / TAU + self.spline.eval(s)[0]).rem_euclid(1.0)
    }
}

/// The boundary trace `g o phi^{-1}` sampled at `count` equispaced angles.
pub fn boundary_trace(c: &Contour, phi: &Reparameterization, count: usize) -> Vec<f64> {
    let inv = phi.inverse_map();
    (0..count)
        .flat_map(|m| c.evaluate(inv.parameter(TAU * m as f64 / count as f64)))
        .collect()
}

/// Contour samples at the node parameters `t_j = j / N`.
#[derive(Debug, Clone)]
pub struct BoundaryNodes {
    dimension: usize,
    points: Vec<f64>,
    /// `g'(t_j)` with respect to `t` in `[0, 1)`.
    tangents: Vec<f64>,
}

impl BoundaryNodes {
    pub fn new(c: &Contour, n: usize) -> Self {
        let t = |j: usize| j as f64 / n as f64;
        Self {
            dimension: c.dimension(),
            points: (0..n).flat_map(|j| c.evaluate(t(j))).collect(),
            tangents: (0..n).flat_map(|j| c.derivative(t(j))).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dimension
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dimension..(j + 1) * self.dimension]
    }

    pub fn tangent(&self, j: usize) -> &[f64] {
        &self.tangents[j * self.dimension..(j + 1) * self.dimension]
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Offsets and coefficients of the derivative stencil behind
/// [`node_weights`]: `w_i = sum_m c_m phi_{i+m}`.
const STENCIL: [(isize, f64); 6] = [
    (-3, -1.0 / 60.0),
    (-2, 9.0 / 60.0),
    (-1, -45.0 / 60.0),
    (1, 45.0 / 60.0),
    (2, -9.0 / 60.0),
    (3, 1.0 / 60.0),
];

/// Node angle `phi_{i+m}` continued periodically (`phi_{j+N} = phi_j + 2 pi`).
fn angle_at(angles: &[f64], i: usize, m: isize) -> f64 {
    let n = angles.len() as isize;
    let j = i as isize + m;
    let turns = j.div_euclid(n);
    angles[j.rem_euclid(n) as usize] + TAU * turns as f64
}

/// Quadrature weights `w_j ~ h phi'(s_j)` of the node map, with `phi'` from
/// the sixth-order central difference of the node angles.
pub fn node_weights(angles: &[f64]) -> Vec<f64> {
    (0..angles.len())
        .map(|i| STENCIL.iter().map(|&(m, c)| c * angle_at(angles, i, m)).sum())
        .collect()
}

/// `sum_i x_i dw_i/dphi_k` for every `k`.
pub(crate) fn weights_transpose(x: &[f64]) -> Vec<f64> {
    let n = x.len() as isize;
    (0..n)
        .map(|k| {
            STENCIL
                .iter()
                .map(|&(m, c)| c * x[(k - m).rem_euclid(n) as usize])
                .sum()
        })
        .collect()
}

/// Precomputed pieces of the discrete functional for one contour and node
/// count. Evaluation is `O(N^2)`, parallel over rows with a fixed-order
/// reduction.
#[derive(Debug, Clone)]
pub struct DouglasProblem {
    n: usize,
    /// `|P_i - P_j|^2`, row-major.
    chord_sq: Vec<f64>,
    /// Sum of the diagonal cells, before the `1/(4 pi)` factor.
    diagonal: f64,
}

impl DouglasProblem {
    pub fn new(nodes: &BoundaryNodes) -> Self {
        let n = nodes.len();
        let chord_sq = (0..n * n)
            .into_par_iter()
            .map(|idx| dist_sq(nodes.point(idx / n), nodes.point(idx % n)))
            .collect();
        let diagonal = (0..n)
            .map(|j| dot(nodes.tangent(j), nodes.tangent(j)))
            .sum::<f64>()
            / (n * n) as f64;
        Self { n, chord_sq, diagonal }
    }

    pub fn from_contour(c: &Contour, n: usize) -> Self {
        Self::new(&BoundaryNodes::new(c, n))
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `u_i = sum_{j != i} w_j Q_ij S_ij` for every row.
    fn row_sums(&self, angles: &[f64], weights: &[f64]) -> Vec<f64> {
        let n = self.n;
        let half = half_angles(angles);
        (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &self.chord_sq[i * n..(i + 1) * n];
                let (si, ci) = half[i];
                let mut acc = 0.0;
                for j in 0..n {
                    if j != i {
                        let (sj, cj) = half[j];
                        let s = si * cj - ci * sj;
                        acc += weights[j] * row[j] / (4.0 * s * s);
                    }
                }
                acc
            })
            .collect()
    }

    /// The rule is only meaningful while every weight is positive; outside
    /// that region the energy is reported as infinite.
    pub fn energy(&self, angles: &[f64]) -> f64 {
        let w = node_weights(angles);
        if w.iter().any(|&w| w <= 0.0) {
            return f64::INFINITY;
        }
        let u = self.row_sums(angles, &w);
        let off: f64 = w.iter().zip(&u).map(|(w, u)| w * u).sum();
        (off + self.diagonal) / (4.0 * PI)
    }

    /// Energy and its exact gradient with respect to every node angle.
    pub fn energy_and_gradient(&self, angles: &[f64]) -> (f64, Vec<f64>) {
        let n = self.n;
        let w = node_weights(angles);
        if w.iter().any(|&w| w <= 0.0) {
            return (f64::INFINITY, vec![0.0; n]);
        }
        // Per row: u_i and v_i = sum_j w_j Q_ij dS/dx(phi_i - phi_j).
        let half = half_angles(angles);
        let rows: Vec<(f64, f64)> = (0..n)
            .into_par_iter()
            .map(|i| {
                let row = &self.chord_sq[i * n..(i + 1) * n];
                let (si, ci) = half[i];
                let (mut u, mut v) = (0.0, 0.0);
                for j in 0..n {
                    if j != i {
                        let (sj, cj) = half[j];
                        let (s, c) = (si * cj - ci * sj, ci * cj + si * sj);
                        let s2 = s * s;
                        let wq = w[j] * row[j];
                        u += wq / (4.0 * s2);
                        v -= wq * c / (4.0 * s2 * s);
                    }
                }
                (u, v)
            })
            .collect();
        let off: f64 = w.iter().zip(&rows).map(|(w, (u, _))| w * u).sum();
        let energy = (off + self.diagonal) / (4.0 * PI);
        // dE/dw_i = 2 u_i, pulled back through the stencil.
        let u: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let back = weights_transpose(&u);
        let grad = (0..n)
            .map(|k| (2.0 * w[k] * rows[k].1 + 2.0 * back[k]) / (4.0 * PI))
            .collect();
        (energy, grad)
    }
}

/// `(sin, cos)` of every half angle, so pair differences need no further
/// trigonometry.
fn half_angles(angles: &[f64]) -> Vec<(f64, f64)> {
    angles.iter().map(|a| (0.5 * a).sin_cos()).collect()
}

/// Tensor-trapezoid value of the functional for the given contour and
/// boundary correspondence.
pub fn douglas_energy(c: &Contour, phi: &Reparameterization) -> f64 {
    DouglasProblem::from_contour(c, phi.len()).energy(phi.angles())
}

/// The same rule for an explicit trace: `points[j]` sits at `angles[j]` and
/// `speed_sq[j] = |dg/dtheta|^2` supplies the diagonal limit.
pub fn douglas_energy_samples(angles: &[f64], points: &[f64], dimension: usize, speed_sq: &[f64]) -> f64 {
    let n = angles.len();
    let w = node_weights(angles);
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let pi = &points[i * dimension..(i + 1) * dimension];
            let mut acc = w[i] * w[i] * speed_sq[i];
            for j in 0..n {
                if j != i {
                    let pj = &points[j * dimension..(j + 1) * dimension];
                    let s = (0.5 * (angles[i] - angles[j])).sin();
                    acc += w[i] * w[j] * dist_sq(pi, pj) / (4.0 * s * s);
                }
            }
            acc
        })
        .collect();
    rows.iter().sum::<f64>() / (4.0 * PI)
}

/// `(pi/2) sum_k k (|a_k|^2 + |b_k|^2)`, equal to the functional by the
/// Fourier-side identity.
pub fn douglas_energy_spectral(b: &FourierBoundary) -> f64 {
    b.spectral_energy()
}

/// Gradient with respect to the node angles; anchored components are zero.
pub fn douglas_gradient(c: &Contour, phi: &Reparameterization) -> Vec<f64> {
    let (_, mut g) = DouglasProblem::from_contour(c, phi.len()).energy_and_gradient(phi.angles());
    for a in phi.anchors() {
        g[a.node] = 0.0;
    }
    g
}

/// Gradient with respect to the increments `d_j`, projected so that every
/// arc between consecutive anchors keeps its total angle.
pub fn increment_gradient(angle_gradient: &[f64], phi: &Reparameterization) -> Result<Vec<f64>> {
    let gauge = Gauge::new(phi.len(), phi.anchors())?;
    Ok(gauge.increment_gradient(angle_gradient))
}

/// `K_ij = g_s(t_i) . g_s(t_j)` with `g_s` the derivative in the
/// `2 pi`-periodic parameter `s = 2 pi t`.
#[derive(Debug, Clone)]
pub struct KernelTable {
    n: usize,
    values: Vec<f64>,
}

impl KernelTable {
    pub fn from_contour(c: &Contour, n: usize) -> Self {
        Self::from_nodes(&BoundaryNodes::new(c, n))
    }

    pub fn from_nodes(nodes: &BoundaryNodes) -> Self {
        let n = nodes.len();
        let scale = 1.0 / (TAU * TAU);
        let values = (0..n * n)
            .map(|idx| scale * dot(nodes.tangent(idx / n), nodes.tangent(idx % n)))
            .collect();
        Self { n, values }
    }

    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        Self {
            n,
            values: (0..n * n).map(|idx| f(idx / n, idx % n)).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn all_positive(&self) -> bool {
        self.values.iter().all(|&k| k > 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogSinEnergy {
    pub off_diagonal: f64,
    pub diagonal: f64,
    pub total: f64,
    /// Set when some `K_ij <= 0`; the functional is then not a usable
    /// minimization target.
    pub positivity_warning: bool,
}

/// `-\iint K(t, tau) log sin(|phi(t) - phi(tau)| / 2) dt dtau` with
/// `t, tau` in `[0, 2 pi)` and step `h = 2 pi / N`. The singular diagonal
/// cells are integrated analytically after linearizing `phi`:
/// `\iint_cell log(phi' |x - y| / 2) = h^2 (log(phi' / 2) + log h - 3/2)`.
pub fn log_sin_energy(k: &KernelTable, phi: &Reparameterization) -> LogSinEnergy {
    let n = k.len();
    let h = TAU / n as f64;
    let angles = phi.angles();
    let rows: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut acc = 0.0;
            for j in 0..n {
                if j != i {
                    let s = (0.5 * (angles[i] - angles[j]).abs()).sin();
                    acc += k.get(i, j) * s.ln();
                }
            }
            acc
        })
        .collect();
    let off_diagonal = -h * h * rows.iter().sum::<f64>();
    let w = node_weights(angles);
    let diagonal = -(0..n)
        .map(|i| {
            let slope = w[i] / h;
            k.get(i, i) * h * h * ((0.5 * slope).ln() + h.ln() - 1.5)
        })
        .sum::<f64>();
    LogSinEnergy {
        off_diagonal,
        diagonal,
        total: off_diagonal + diagonal,
        positivity_warning: !k.all_positive(),
    }
}

/// Principal-value trapezoid value of
/// `\int K(t_i, tau) cot((phi(t_i) - phi(tau)) / 2) dtau` at every node,
/// `tau` in `[0, 2 pi)`. The singular node is omitted and the remaining
/// nodes are summed in pairs `i +- m`, symmetric about `t_i`, so the odd
/// part of the kernel cancels. The singular cell then contributes only the
/// finite part of the integrand at `tau = t_i`,
/// `K phi'' / phi'^2 - 2 K_tau / phi'`, which is added with weight `h`
/// (`phi'` and `K_tau` by the sixth-order stencil, `phi''` by the fourth-order
/// second difference).
pub fn el_residual(k: &KernelTable, phi: &Reparameterization) -> Vec<f64> {
    let n = k.len();
    let h = TAU / n as f64;
    let angles = phi.angles();
    let w = node_weights(angles);
    let cot = |i: usize, j: usize| 1.0 / (0.5 * (angles[i] - angles[j])).tan();
    let at = |i: usize, m: isize| (i as isize + m).rem_euclid(n as isize) as usize;
    (0..n)
        .into_par_iter()
        .map(|i| {
            let d1 = w[i] / h;
            let d2 = (-angle_at(angles, i, 2) + 16.0 * angle_at(angles, i, 1) - 30.0 * angles[i]
                + 16.0 * angle_at(angles, i, -1)
                - angle_at(angles, i, -2))
                / (12.0 * h * h);
            let k_tau = STENCIL
                .iter()
                .map(|&(m, c)| c * k.get(i, at(i, m)))
                .sum::<f64>()
                / h;
            let finite_part = k.get(i, i) * d2 / (d1 * d1) - 2.0 * k_tau / d1;
            let mut acc = 0.0;
            for m in 1..=n / 2 {
                let fwd = (i + m) % n;
                let back = (i + n - m) % n;
                if fwd == back {
                    acc += k.get(i, fwd) * cot(i, fwd);
                } else {
                    acc += k.get(i, fwd) * cot(i, fwd) + k.get(i, back) * cot(i, back);
                }
            }
            h * (acc + finite_part)
        })
        .collect()
}

/// Maps unconstrained variables to monotone node angles that respect the
/// anchors.
///
/// Each arc between consecutive anchors owns the increments that end at or
/// before the next anchor; those increments are `total * softmax(x)`. With
/// no anchors the whole circle is one arc and one extra variable carries the
/// rotation `phi_0`.
#[derive(Debug, Clone)]
pub struct Gauge {
    n: usize,
    arcs: Vec<Arc>,
    free_rotation: bool,
}

#[derive(Debug, Clone)]
struct Arc {
    start: usize,
    start_angle: f64,
    len: usize,
    total: f64,
    offset: usize,
}

impl Gauge {
    pub fn new(n: usize, anchors: &[Anchor]) -> Result<Self> {
        if n < 3 {
            return Err(PlateauError::Validation("need at least 3 nodes".into()));
        }
        let mut sorted = anchors.to_vec();
        sorted.sort_by_key(|a| a.node);
        if sorted.windows(2).any(|w| w[0].node == w[1].node) {
            return Err(PlateauError::Config("duplicate anchor node".into()));
        }
        if let Some(a) = sorted.iter().find(|a| a.node >= n) {
            return Err(PlateauError::Config(format!("anchor node {} out of range", a.node)));
        }
        if sorted.is_empty() {
            return Ok(Self {
                n,
                arcs: vec![Arc {
                    start: 0,
                    start_angle: 0.0,
                    len: n,
                    total: TAU,
                    offset: 0,
                }],
                free_rotation: true,
            });
        }
        let mut arcs = Vec::with_capacity(sorted.len());
        let mut offset = 0;
        for (idx, a) in sorted.iter().enumerate() {
            let next = sorted[(idx + 1) % sorted.len()];
            let (len, total) = if sorted.len() == 1 {
                (n, TAU)
            } else if idx + 1 < sorted.len() {
                (next.node - a.node, next.angle - a.angle)
            } else {
                (next.node + n - a.node, next.angle + TAU - a.angle)
            };
            if total <= 0.0 || total > TAU {
                return Err(PlateauError::Config(
                    "anchor angles must increase with node index within one turn".into(),
                ));
            }
            arcs.push(Arc {
                start: a.node,
                start_angle: a.angle,
                len,
                total,
                offset,
            });
            offset += len;
        }
        Ok(Self {
            n,
            arcs,
            free_rotation: false,
        })
    }

    /// Number of unconstrained variables.
    pub fn len(&self) -> usize {
        self.n + usize::from(self.free_rotation)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn softmax(x: &[f64]) -> Vec<f64> {
        let m = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = x.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        e.into_iter().map(|v| v / s).collect()
    }

    /// Node angles, arranged so that `phi_0 <= phi_j < phi_0 + 2 pi`.
    pub fn angles(&self, x: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut raw = vec![0.0; n];
        for arc in &self.arcs {
            let start = if self.free_rotation { x[n] } else { arc.start_angle };
            let frac = Self::softmax(&x[arc.offset..arc.offset + arc.len]);
            raw[arc.start] = start;
            let mut acc = start;
            // The last increment lands on the next anchor, already set.
            for (m, f) in frac.iter().enumerate().take(arc.len - 1) {
                acc += arc.total * f;
                raw[(arc.start + m + 1) % n] = acc;
            }
        }
        // Unwrap so the sequence increases from node 0.
        let base = raw[0];
        let mut out = vec![0.0; n];
        for j in 0..n {
            let mut a = raw[j];
            while a < base {
                a += TAU;
            }
            while a >= base + TAU {
                a -= TAU;
            }
            out[j] = a;
        }
        out
    }

    /// Inverse of [`Gauge::angles`] (up to the softmax shift).
    pub fn variables(&self, angles: &[f64]) -> Vec<f64> {
        let n = self.n;
        let phi = Reparameterization {
            angles: angles.to_vec(),
            anchors: Vec::new(),
        };
        let d = phi.increments();
        let mut x = vec![0.0; self.len()];
        for arc in &self.arcs {
            for m in 0..arc.len {
                let j = (arc.start + m + 1) % n;
                x[arc.offset + m] = (d[j] / arc.total).ln();
            }
        }
        if self.free_rotation {
            x[n] = angles[0];
        }
        x
    }

    /// `dE/dd_j` projected to keep each arc total fixed, indexed by the
    /// increment's end node (`d_j` ends at node `j`).
    pub fn increment_gradient(&self, angle_gradient: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for arc in &self.arcs {
            // d_{start+m+1} moves every node from start+m+1 up to the arc's end.
            let mut suffix = vec![0.0; arc.len];
            let mut acc = 0.0;
            for m in (0..arc.len).rev() {
                let node = (arc.start + m + 1) % n;
                if m + 1 < arc.len {
                    acc += angle_gradient[node];
                }
                suffix[m] = acc;
            }
            let mean = suffix.iter().sum::<f64>() / arc.len as f64;
            for m in 0..arc.len {
                out[(arc.start + m + 1) % n] = suffix[m] - mean;
            }
        }
        out
    }

    /// Stationarity measure: the largest node-angle gradient over the free
    /// nodes, divided by the node spacing `h = 2 pi / N` so that it
    /// approximates the first-variation density and does not shrink as
    /// `N` grows.
    pub fn stationarity(&self, angle_gradient: &[f64]) -> f64 {
        let pinned = |j: usize| !self.free_rotation && self.arcs.iter().any(|a| a.start == j);
        let scale = self.n as f64 / TAU;
        angle_gradient
            .iter()
            .enumerate()
            .filter(|&(j, _)| !pinned(j))
            .fold(0.0f64, |m, (_, g)| m.max(g.abs()))
            * scale
    }

    /// Chain rule from node-angle gradient to variable gradient.
    pub fn variable_gradient(&self, x: &[f64], angle_gradient: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; self.len()];
        for arc in &self.arcs {
            let frac = Self::softmax(&x[arc.offset..arc.offset + arc.len]);
            let mut suffix = vec![0.0; arc.len];
            let mut acc = 0.0;
            for m in (0..arc.len).rev() {
                if m + 1 < arc.len {
                    acc += angle_gradient[(arc.start + m + 1) % n];
                }
                suffix[m] = acc;
            }
            // d_m = total * p_m;  dE/dx_m = total * p_m (g_m - sum_k p_k g_k)
            let avg: f64 = frac.iter().zip(&suffix).map(|(p, g)| p * g).sum();
            for m in 0..arc.len {
                out[arc.offset + m] = arc.total * frac[m] * (suffix[m] - avg);
            }
        }
        if self.free_rotation {
            out[n] = angle_gradient.iter().sum();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::contour::ContourSpec;
    use serde_json::json;

    fn circle(n: usize) -> Contour {
        Contour::from_spec(&ContourSpec::builtin(2, "circle", json!({}), n)).unwrap()
    }

    /// Independent double sum on uniform angles, written out directly.
    fn brute_force(points: &[[f64; 2]], speed_sq: f64) -> f64 {
        let n = points.len();
        let h = TAU / n as f64;
        let mut total = 0.0;
        for i in 0..n {
            for j in 0..n {
                let val = if i == j {
                    speed_sq
                } else {
                    let d = (points[i][0] - points[j][0]).powi(2) + (points[i][1] - points[j][1]).powi(2);
                    let s = ((i as f64 - j as f64) * h / 2.0).sin();
                    d / (4.0 * s * s)
                };
                total += val * h * h;
            }
        }
        total / (4.0 * PI)
    }

    #[test]
    fn circle_identity_value() {
        let n = 256;
        let c = circle(n);
        let phi = Reparameterization::arclength(n, default_anchors(n)).unwrap();
        let e = douglas_energy(&c, &phi);
        let pts: Vec<[f64; 2]> = (0..n)
            .map(|j| {
                let t = TAU * j as f64 / n as f64;
                [t.cos(), t.sin()]
            })
            .collect();
        let oracle = brute_force(&pts, 1.0);
        assert!((oracle - PI).abs() < 1e-10);
        assert!((e - PI).abs() < 1e-6, "energy {e}");
    }

    #[test]
    fn constant_trace_has_zero_energy() {
        let n = 32;
        let angles: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
        let points: Vec<f64> = (0..n).flat_map(|_| [1.5, -2.0, 0.25]).collect();
        assert_eq!(douglas_energy_samples(&angles, &points, 3, &vec![0.0; n]), 0.0);
    }

    #[test]
    fn degree_two_trace_energy() {
        let n = 128;
        let angles: Vec<f64> = (0..n).map(|j| TAU * j as f64 / n as f64).collect();
        let pts: Vec<[f64; 2]> = angles.iter().map(|t| [(2.0 * t).cos(), (2.0 * t).sin()]).collect();
        let flat: Vec<f64> = pts.iter().flatten().copied().collect();
        let e = douglas_energy_samples(&angles, &flat, 2, &vec![4.0; n]);
        assert!((e - TAU).abs() < 1e-5);
        assert!((brute_force(&pts, 4.0) - TAU).abs() < 1e-10);
    }

    #[test]
    fn gradient_vanishes_for_circle_identity() {
        let n = 96;
        let c = circle(n);
        let phi = Reparameterization::arclength(n, default_anchors(n)).unwrap();
        let g = douglas_gradient(&c, &phi);
        let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 1e-8, "norm {norm}");
    }

    #[test]
    fn constraint_violating_direction_has_zero_derivative() {
        let n = 48;
        let c = Contour::from_spec(&ContourSpec::builtin(2, "ellipse", json!({}), n)).unwrap();
        let phi = Reparameterization::arclength(n, default_anchors(n)).unwrap();
        let g = increment_gradient(&douglas_gradient(&c, &phi), &phi).unwrap();
        // Growing every increment of the first arc equally would change its total.
        let arc_end = n / 3;
        let dir: f64 = (1..=arc_end).map(|j| g[j]).sum();
        assert!(dir.abs() < 1e-14, "{dir}");
    }

    #[test]
    fn log_sin_toy_kernel() {
        let n = 4;
        let k = KernelTable::from_fn(n, |_, _| 1.0);
        let phi = Reparameterization::arclength(n, vec![Anchor { node: 0, angle: 0.0 }]).unwrap();
        let r = log_sin_energy(&k, &phi);
        let h = TAU / 4.0;
        let mut expected = 0.0;
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    let d = (i as f64 - j as f64).abs() * h;
                    expected -= (0.5 * d).sin().ln() * h * h;
                }
            }
        }
        assert!((r.off_diagonal - expected).abs() < 1e-13);
        assert!(!r.positivity_warning);
    }

    #[test]
    fn log_sin_flags_circle_kernel() {
        let n = 32;
        let k = KernelTable::from_contour(&circle(n), n);
        // K(t, tau) = cos(t - tau)
        assert!((k.get(0, 8) - 0.0).abs() < 1e-3);
        assert!((k.get(0, 0) - 1.0).abs() < 1e-2);
        let phi = Reparameterization::arclength(n, default_anchors(n)).unwrap();
        assert!(log_sin_energy(&k, &phi).positivity_warning);
        let zero = KernelTable::from_fn(n, |_, _| 0.0);
        assert_eq!(log_sin_energy(&zero, &phi).total, 0.0);
    }

    #[test]
    fn residual_examples() {
        let n = 256;
        let c = circle(n);
        let phi = Reparameterization::arclength(n, default_anchors(n)).unwrap();
        let r = el_residual(&KernelTable::from_contour(&c, n), &phi);
        assert!(r.iter().all(|x| x.abs() < 1e-6));
        let phi8 = Reparameterization::arclength(8, default_anchors(8)).unwrap();
        let r = el_residual(&KernelTable::from_fn(8, |_, _| 0.0), &phi8);
        assert_eq!(r, vec![0.0; 8]);
    }

    #[test]
    fn gauge_round_trip() {
        let n = 30;
        let gauge = Gauge::new(n, &default_anchors(n)).unwrap();
        let x: Vec<f64> = (0..n).map(|i| 0.3 * (i as f64 * 0.7).sin()).collect();
        let angles = gauge.angles(&x);
        let phi = Reparameterization::from_angles(angles.clone(), default_anchors(n)).unwrap();
        assert_eq!(phi.len(), n);
        let back = gauge.angles(&gauge.variables(&angles));
        for (a, b) in angles.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn inverse_map_interpolates_nodes() {
        let n = 40;
        let gauge = Gauge::new(n, &default_anchors(n)).unwrap();
        let x: Vec<f64> = (0..n).map(|i| 0.2 * (i as f64 * 0.3).cos()).collect();
        let phi = Reparameterization::from_angles(gauge.angles(&x), default_anchors(n)).unwrap();
        let inv = phi.inverse_map();
        for (j, a) in phi.angles().iter().enumerate() {
            let t = inv.parameter(*a);
            let expected = j as f64 / n as f64;
            let d = (t - expected).rem_euclid(1.0);
            assert!(d.min(1.0 - d) < 1e-12);
        }
    }
}
