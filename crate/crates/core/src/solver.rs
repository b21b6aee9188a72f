//! Minimization of the Douglas functional and assembly of the certified
//! surface, plus the planar Riemann-mapping mode.

use crate::contour::{Contour, ContourSpec};
use crate::diagnostics::{certify, ConformalityDefect};
use crate::douglas::{
    boundary_trace, default_anchors, el_residual, Anchor, BoundaryNodes, DouglasProblem, Gauge, KernelTable,
    Reparameterization,
};
use crate::error::{PlateauError, Result};
use crate::harmonic::{BranchPoint, FourierBoundary, HarmonicDisc};
use crate::optim::{self, Evaluation, HistoryEntry, LineSearch, StopReason};
use crate::quadrature::GridSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Boundary nodes `N`.
    pub nodes: usize,
    /// Harmonic degree; `None` means `N/2 - 1`.
    pub max_degree: Option<usize>,
    pub max_iters: usize,
    /// Bound on the free-node gradient density (see `Gauge::stationarity`).
    pub grad_tol: f64,
    pub el_tol: f64,
    pub defect_tol: f64,
    pub line_search: LineSearch,
    pub memory: usize,
    pub gradient_descent: bool,
    pub seed: u64,
    /// Extra randomized starts besides the arclength one.
    pub restarts: usize,
    /// Three-point normalization; `None` uses the default triple.
    pub anchors: Option<Vec<Anchor>>,
    pub modulus_bracket: [f64; 2],
    /// Coarse candidates scanned before roots of the modulus equation are
    /// refined.
    pub modulus_samples: usize,
    pub modulus_tol: f64,
    pub grid: GridSpec,
    /// Relative threshold for branch-point detection.
    pub branch_tol: f64,
    /// Fraction of top modes zeroed after fitting (0 disables).
    pub low_pass: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            nodes: 256,
            max_degree: None,
            max_iters: 2000,
            grad_tol: 1e-7,
            el_tol: 1e-3,
            defect_tol: 1e-4,
            line_search: LineSearch::default(),
            memory: 12,
            gradient_descent: false,
            seed: 0,
            restarts: 0,
            anchors: None,
            modulus_bracket: [0.05, 0.95],
            modulus_samples: 12,
            modulus_tol: 1e-8,
            grid: GridSpec::default(),
            branch_tol: 1e-2,
            low_pass: 0.0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PlateauError::Config(m.into()));
        if self.nodes < 8 {
            return bad("nodes must be at least 8");
        }
        for (name, v) in [
            ("grad_tol", self.grad_tol),
            ("el_tol", self.el_tol),
            ("defect_tol", self.defect_tol),
            ("modulus_tol", self.modulus_tol),
            ("branch_tol", self.branch_tol),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PlateauError::Config(format!("{name} must be positive")));
            }
        }
        let ls = self.line_search;
        if !(ls.initial_step > 0.0 && ls.backtrack > 0.0 && ls.backtrack < 1.0) {
            return bad("line search needs initial_step > 0 and 0 < backtrack < 1");
        }
        if !(ls.sufficient_decrease > 0.0 && ls.sufficient_decrease < 1.0) {
            return bad("sufficient_decrease must lie in (0, 1)");
        }
        let [lo, hi] = self.modulus_bracket;
        if !(0.0 < lo && lo < hi && hi < 1.0) {
            return bad("modulus bracket must satisfy 0 < rho_min < rho_max < 1");
        }
        if self.modulus_samples < 3 {
            return bad("modulus_samples must be at least 3");
        }
        if self.memory == 0 {
            return bad("memory must be positive");
        }
        if !(0.0..1.0).contains(&self.low_pass) {
            return bad("low_pass must lie in [0, 1)");
        }
        if let Some(k) = self.max_degree {
            if k == 0 || 2 * k + 1 > 2 * self.nodes {
                return bad("max_degree must lie in 1..=nodes - 1");
            }
        }
        Ok(())
    }

    pub fn degree(&self) -> usize {
        self.max_degree.unwrap_or(self.nodes / 2 - 1)
    }

    pub fn anchors_for(&self, n: usize) -> Vec<Anchor> {
        self.anchors.clone().unwrap_or_else(|| default_anchors(n))
    }

    pub(crate) fn optim_options(&self) -> optim::Options {
        optim::Options {
            memory: self.memory,
            max_iters: self.max_iters,
            line_search: self.line_search,
            gradient_descent: self.gradient_descent,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Geometry of the input, enough to rebuild the contour.
    pub contour: ContourSpec,
    pub config: SolverConfig,
    pub douglas_energy: f64,
    pub initial_douglas_energy: f64,
    /// Spectral value of the harmonic extension.
    pub dirichlet_energy: f64,
    /// Grid value, shared with the area and defects.
    pub dirichlet_quadrature: f64,
    pub area: f64,
    pub gap: f64,
    pub clipped: usize,
    pub defect: ConformalityDefect,
    pub max_el_residual: f64,
    pub branch_points: Vec<BranchPoint>,
    pub truncation_error: f64,
    pub tail_energy_fraction: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub stop_reason: StopReason,
    pub converged: bool,
    /// Index of the start that won (0 is the arclength start).
    pub best_start: usize,
    pub history: Vec<HistoryEntry>,
    pub reparameterization: Reparameterization,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub surface: HarmonicDisc,
    pub reparameterization: Reparameterization,
    pub report: SolveReport,
}

/// Number of equispaced trace samples the harmonic extension is fitted to.
pub fn trace_sample_count(cfg: &SolverConfig) -> usize {
    (2 * cfg.nodes).max(2 * cfg.degree() + 2)
}

/// The trace `g o phi^{-1}` at [`trace_sample_count`] equispaced angles.
pub fn extension_trace(c: &Contour, phi: &Reparameterization, cfg: &SolverConfig) -> Vec<f64> {
    boundary_trace(c, phi, trace_sample_count(cfg))
}

/// Harmonic extension of equispaced trace samples, with the configured
/// degree and low-pass filter.
pub fn extension_from_trace(trace: &[f64], dimension: usize, cfg: &SolverConfig) -> Result<HarmonicDisc> {
    let mut b = FourierBoundary::fit(trace, dimension, cfg.degree())?;
    if cfg.low_pass > 0.0 {
        b = b.low_pass(cfg.low_pass);
    }
    Ok(HarmonicDisc::new(b))
}

/// Harmonic extension of `g o phi^{-1}`.
pub fn harmonic_extension(c: &Contour, phi: &Reparameterization, cfg: &SolverConfig) -> Result<HarmonicDisc> {
    extension_from_trace(&extension_trace(c, phi, cfg), c.dimension(), cfg)
}

/// Outcome of one minimization from a given start.
pub(crate) struct Descent {
    pub angles: Vec<f64>,
    pub energy: f64,
    pub grad_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
    pub history: Vec<HistoryEntry>,
}

fn descend(problem: &DouglasProblem, gauge: &Gauge, x0: Vec<f64>, cfg: &SolverConfig) -> Descent {
    let eval = |x: &[f64]| {
        let angles = gauge.angles(x);
        let (value, grad) = problem.energy_and_gradient(&angles);
        Evaluation {
            value,
            stationarity: gauge.stationarity(&grad),
            gradient: gauge.variable_gradient(x, &grad),
        }
    };
    let out = optim::minimize(eval, x0, cfg.grad_tol, &cfg.optim_options());
    Descent {
        angles: gauge.angles(&out.x),
        energy: out.value,
        grad_norm: out.stationarity,
        iterations: out.iterations,
        stop: out.stop,
        history: out.history,
    }
}

/// Randomized start `k >= 1`: log-increments jittered by up to `0.5`.
pub(crate) fn jittered(x0: &[f64], seed: u64, k: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k as u64));
    x0.iter().map(|v| v + rng.gen_range(-0.5..0.5)).collect()
}

fn check_contour(c: &Contour) -> Result<()> {
    if c.length() < crate::contour::MIN_LENGTH {
        return Err(PlateauError::DegenerateContour(format!(
            "total length {} is below {}",
            c.length(),
            crate::contour::MIN_LENGTH
        )));
    }
    Ok(())
}

/// Minimizes the functional from the arclength start (plus any randomized
/// restarts), then builds and certifies the harmonic surface. A run that
/// misses its tolerances still returns a full report with `converged`
/// false.
pub fn solve_plateau(c: &Contour, cfg: &SolverConfig) -> Result<Solution> {
    cfg.validate()?;
    check_contour(c)?;
    let n = cfg.nodes;
    let anchors = cfg.anchors_for(n);
    let gauge = Gauge::new(n, &anchors)?;
    let start = Reparameterization::arclength(n, anchors.clone())?;
    let nodes = BoundaryNodes::new(c, n);
    let problem = DouglasProblem::new(&nodes);
    let x0 = gauge.variables(start.angles());
    let initial_douglas_energy = problem.energy(start.angles());

    let runs: Vec<Descent> = (0..=cfg.restarts)
        .into_par_iter()
        .map(|k| {
            let x = if k == 0 { x0.clone() } else { jittered(&x0, cfg.seed, k) };
            descend(&problem, &gauge, x, cfg)
        })
        .collect();
    let (best_start, best) = runs
        .into_iter()
        .enumerate()
        .min_by(|a, b| a.1.energy.total_cmp(&b.1.energy).then(a.0.cmp(&b.0)))
        .expect("at least one start");

    let phi = Reparameterization::from_angles(best.angles.clone(), anchors)?;
    let surface = harmonic_extension(c, &phi, cfg)?;
    let cert = certify(&surface, cfg.grid.covering(surface.degree()));
    let kernel = KernelTable::from_nodes(&nodes);
    let max_el_residual = el_residual(&kernel, &phi)
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    let boundary = surface.boundary();
    let converged = best.grad_norm < cfg.grad_tol
        && cert.defect.f_defect < cfg.defect_tol
        && cert.defect.eg_defect < cfg.defect_tol;
    let report = SolveReport {
        contour: c.spec().geometry_only(),
        config: cfg.clone(),
        douglas_energy: best.energy,
        initial_douglas_energy,
        dirichlet_energy: boundary.spectral_energy(),
        dirichlet_quadrature: cert.chain.dirichlet,
        area: cert.chain.area,
        gap: cert.chain.gap,
        clipped: cert.clipped,
        defect: cert.defect,
        max_el_residual,
        branch_points: surface.find_branch_points(cfg.branch_tol),
        truncation_error: boundary.truncation_error(),
        tail_energy_fraction: boundary.tail_energy_fraction(0.1),
        iterations: best.iterations,
        grad_norm: best.grad_norm,
        stop_reason: best.stop,
        converged,
        best_start,
        history: best.history,
        reparameterization: phi.clone(),
    };
    Ok(Solution {
        surface,
        reparameterization: phi,
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingSample {
    /// Preimage point in the disc.
    pub preimage: [f64; 2],
    /// Its image, the target of the winding count.
    pub target: [f64; 2],
    pub winding: i64,
    pub jacobian: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnivalencyReport {
    /// `+1` for a counter-clockwise contour, `-1` otherwise; windings and
    /// Jacobians below are multiplied by it.
    pub orientation: i64,
    pub test_radius: f64,
    pub samples: Vec<WindingSample>,
    pub min_jacobian: f64,
    pub univalent: bool,
    /// Targets whose winding is not 1 or whose Jacobian is not positive.
    pub offending: Vec<[f64; 2]>,
}

/// Signed area of a planar contour by the shoelace formula.
fn signed_area(c: &Contour) -> f64 {
    let m = c.sample_count();
    (0..m)
        .map(|j| {
            let (p, q) = (c.sample(j), c.sample((j + 1) % m));
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
        / 2.0
}

/// Winding number of the closed polyline `curve` about `w`.
pub fn winding_number(curve: &[[f64; 2]], w: [f64; 2]) -> i64 {
    let m = curve.len();
    let mut total = 0.0;
    for j in 0..m {
        let a = curve[j];
        let b = curve[(j + 1) % m];
        let (ax, ay) = (a[0] - w[0], a[1] - w[1]);
        let (bx, by) = (b[0] - w[0], b[1] - w[1]);
        total += (ax * by - ay * bx).atan2(ax * bx + ay * by);
    }
    (total / TAU).round() as i64
}

/// Discrete argument principle on a `grid x grid` lattice of preimages
/// inside radius `0.9`, with the test circle at radius `1 - 0.02`.
pub fn univalency(h: &HarmonicDisc, orientation: i64, grid: usize) -> UnivalencyReport {
    let test_radius = 0.98;
    let loop_points = 2048;
    let curve: Vec<[f64; 2]> = (0..loop_points)
        .map(|j| {
            let t = TAU * j as f64 / loop_points as f64;
            let p = h.eval_unchecked(test_radius * t.cos(), test_radius * t.sin());
            [p[0], p[1]]
        })
        .collect();
    let grid = grid.max(2);
    let lattice: Vec<[f64; 2]> = (0..grid * grid)
        .map(|idx| {
            let s = |i: usize| -0.9 + 1.8 * (i as f64 + 0.5) / grid as f64;
            [s(idx % grid), s(idx / grid)]
        })
        .filter(|p| p[0].hypot(p[1]) < 0.9)
        .collect();
    let samples: Vec<WindingSample> = lattice
        .par_iter()
        .map(|&[u, v]| {
            let p = h.eval_unchecked(u, v);
            let (xu, xv) = h.partials_unchecked(u, v);
            let jac = xu[0] * xv[1] - xv[0] * xu[1];
            let target = [p[0], p[1]];
            WindingSample {
                preimage: [u, v],
                target,
                winding: orientation * winding_number(&curve, target),
                jacobian: orientation as f64 * jac,
            }
        })
        .collect();
    let offending: Vec<[f64; 2]> = samples
        .iter()
        .filter(|s| s.winding != 1 || s.jacobian <= 0.0)
        .map(|s| s.target)
        .collect();
    let min_jacobian = samples.iter().map(|s| s.jacobian).fold(f64::INFINITY, f64::min);
    UnivalencyReport {
        orientation,
        test_radius,
        univalent: offending.is_empty(),
        min_jacobian,
        samples,
        offending,
    }
}

#[derive(Debug, Clone)]
pub struct RiemannMap {
    pub solution: Solution,
    pub univalency: UnivalencyReport,
}

impl RiemannMap {
    /// Fails with the offending targets when the univalency check did.
    pub fn into_result(self) -> Result<Self> {
        if self.univalency.univalent {
            Ok(self)
        } else {
            Err(PlateauError::UnivalencyFailure {
                offending: self.univalency.offending.clone(),
            })
        }
    }
}

/// The `n = 2` specialization: solve, then check univalency on a
/// `grid x grid` lattice. Failure of the check is reported in
/// `univalency.univalent`, not as an error, so callers keep the surface.
pub fn riemann_map(c: &Contour, cfg: &SolverConfig, grid: usize) -> Result<RiemannMap> {
    if c.dimension() != 2 {
        return Err(PlateauError::Validation(format!(
            "Riemann mapping needs a planar contour, got dimension {}",
            c.dimension()
        )));
    }
    let solution = solve_plateau(c, cfg)?;
    let orientation = if signed_area(c) >= 0.0 { 1 } else { -1 };
    let univalency = univalency(&solution.surface, orientation, grid);
    Ok(RiemannMap { solution, univalency })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn winding_of_square() {
        let sq = [[1.0, 1.0], [-1.0, 1.0], [-1.0, -1.0], [1.0, -1.0]];
        assert_eq!(winding_number(&sq, [0.0, 0.0]), 1);
        assert_eq!(winding_number(&sq, [2.0, 0.0]), 0);
        let rev: Vec<_> = sq.iter().rev().copied().collect();
        assert_eq!(winding_number(&rev, [0.3, -0.2]), -1);
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let mut cfg = SolverConfig {
            grad_tol: 0.0,
            ..SolverConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.grad_tol = 1e-6;
        cfg.modulus_bracket = [0.5, 0.4];
        assert!(cfg.validate().is_err());
    }
}
