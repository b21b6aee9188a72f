//! Solver-independent certification of a harmonic disc: the two
//! conformality defects, the energy/area gap, report comparison and
//! re-verification of stored reports.
//!
//! The defects and the gap are computed on one shared polar grid so that the
//! AM-GM equality case `(E + G)/2 = sqrt(EG - F^2)` iff `E = G, F = 0` is
//! reflected consistently in both.

use crate::annulus::AnnulusReport;
use crate::contour::Contour;
use crate::douglas::{el_residual, BoundaryNodes, DouglasProblem, KernelTable};
use crate::error::{PlateauError, Result};
use crate::harmonic::{FirstFundamentalForm, HarmonicDisc};
use crate::optim::ROUNDOFF;
use crate::quadrature::{GridSpec, PolarGrid};
use crate::solver::{extension_from_trace, SolveReport};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConformalityDefect {
    /// `\iint |F|`
    pub f_defect: f64,
    /// `\iint (sqrt E - sqrt G)^2`
    pub eg_defect: f64,
}

impl ConformalityDefect {
    pub fn total(&self) -> f64 {
        self.f_defect + self.eg_defect
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyAreaChain {
    /// `1/2 \iint (E + G)` on the grid.
    pub dirichlet: f64,
    pub area: f64,
    /// `dirichlet - area`; non-negative up to quadrature error.
    pub gap: f64,
}

/// Both certificates from a single pass over the grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certificate {
    pub defect: ConformalityDefect,
    pub chain: EnergyAreaChain,
    /// Grid points where `EG - F^2 < 0` was clipped to zero.
    pub clipped: usize,
}

pub fn certify(h: &HarmonicDisc, grid: GridSpec) -> Certificate {
    certify_metric(&PolarGrid::disc(grid), |u, v| h.metric_unchecked(u, v))
}

/// Both certificates for any surface given by its metric on a polar grid
/// (disc or annulus).
pub fn certify_metric<M>(polar: &PolarGrid, metric: M) -> Certificate
where
    M: Fn(f64, f64) -> FirstFundamentalForm + Sync,
{
    let [f_defect, eg_defect, energy, area, clipped] = polar.integrate_many(|u, v| {
        let m = metric(u, v);
        let det = m.det();
        let d = m.e.sqrt() - m.g.sqrt();
        [
            m.f.abs(),
            d * d,
            0.5 * (m.e + m.g),
            det.max(0.0).sqrt(),
            f64::from(u8::from(det < 0.0)),
        ]
    });
    Certificate {
        defect: ConformalityDefect { f_defect, eg_defect },
        chain: EnergyAreaChain {
            dirichlet: energy,
            area,
            gap: energy - area,
        },
        // The weighted sum above is only a flag; count exactly.
        clipped: if clipped > 0.0 {
            polar.points().filter(|&(u, v, _)| metric(u, v).det() < 0.0).count()
        } else {
            0
        },
    }
}

pub fn conformality_defect(h: &HarmonicDisc, grid: GridSpec) -> ConformalityDefect {
    certify(h, grid).defect
}

pub fn energy_area_chain(h: &HarmonicDisc, grid: GridSpec) -> EnergyAreaChain {
    certify(h, grid).chain
}

/// Writes `u,v,E,F,G` on the polar grid as CSV, for external plotting.
pub fn write_metric_grid<W: Write>(h: &HarmonicDisc, grid: GridSpec, mut out: W) -> Result<()> {
    writeln!(out, "u,v,E,F,G")?;
    for (u, v, _) in PolarGrid::disc(grid).points() {
        let m = h.metric_unchecked(u, v);
        writeln!(
            out,
            "{},{},{},{},{}",
            crate::io::fmt_f64(u),
            crate::io::fmt_f64(v),
            crate::io::fmt_f64(m.e),
            crate::io::fmt_f64(m.f),
            crate::io::fmt_f64(m.g)
        )?;
    }
    Ok(())
}

/// Differences between two reports on the same contour (`b - a`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub douglas_energy_diff: f64,
    pub dirichlet_energy_diff: f64,
    pub area_diff: f64,
    pub f_defect_diff: f64,
    pub eg_defect_diff: f64,
    /// Tolerance the energy difference is judged against.
    pub tolerance: f64,
    /// True when the energies differ by more than `tolerance`.
    pub distinct: bool,
}

/// The fields of a report that comparisons look at.
struct Summary {
    grad_tol: f64,
    energy: f64,
    dirichlet: f64,
    area: f64,
    defect: ConformalityDefect,
}

fn compare(a: Summary, b: Summary) -> Comparison {
    let tolerance = 10.0 * (a.grad_tol + b.grad_tol) + a.defect.total() + b.defect.total();
    let douglas_energy_diff = b.energy - a.energy;
    Comparison {
        douglas_energy_diff,
        dirichlet_energy_diff: b.dirichlet - a.dirichlet,
        area_diff: b.area - a.area,
        f_defect_diff: b.defect.f_defect - a.defect.f_defect,
        eg_defect_diff: b.defect.eg_defect - a.defect.eg_defect,
        tolerance,
        distinct: douglas_energy_diff.abs() > tolerance,
    }
}

/// Compares two reports. Energies further apart than the combined
/// tolerances (`10 grad_tol` each plus both defect levels) flag distinct
/// stationary points.
pub fn compare_solutions(a: &SolveReport, b: &SolveReport) -> Result<Comparison> {
    if a.contour != b.contour {
        return Err(PlateauError::MismatchedContour(
            "contour descriptions differ".into(),
        ));
    }
    let summary = |r: &SolveReport| Summary {
        grad_tol: r.config.grad_tol,
        energy: r.douglas_energy,
        dirichlet: r.dirichlet_energy,
        area: r.area,
        defect: r.defect,
    };
    Ok(compare(summary(a), summary(b)))
}

/// [`compare_solutions`] for two-contour reports, e.g. solves of the same
/// pair of circles with different modulus brackets.
pub fn compare_annulus(a: &AnnulusReport, b: &AnnulusReport) -> Result<Comparison> {
    if a.outer_contour != b.outer_contour || a.inner_contour != b.inner_contour {
        return Err(PlateauError::MismatchedContour(
            "contour descriptions differ".into(),
        ));
    }
    let summary = |r: &AnnulusReport| Summary {
        grad_tol: r.config.grad_tol,
        energy: r.energy,
        dirichlet: r.dirichlet_quadrature,
        area: r.area,
        defect: r.defect,
    };
    Ok(compare(summary(a), summary(b)))
}

/// Relative tolerance for quantities that a check recomputes exactly as the
/// solver did (up to summation order and grid refinement).
pub const RECOMPUTE_TOL: f64 = 1e-6;

/// One line of a report check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub stored: f64,
    pub recomputed: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn equal(name: &str, stored: f64, recomputed: f64) -> Self {
        let tolerance = RECOMPUTE_TOL * stored.abs().max(1.0);
        Self {
            name: name.into(),
            stored,
            recomputed,
            tolerance,
            passed: (stored - recomputed).abs() <= tolerance,
        }
    }

    /// `value <= bound`.
    fn below(name: &str, value: f64, bound: f64) -> Self {
        Self {
            name: name.into(),
            stored: value,
            recomputed: value,
            tolerance: bound,
            passed: value <= bound,
        }
    }
}

/// Re-derives a stored solve from its report and the equispaced boundary
/// trace the surface was fitted to.
///
/// Recomputed here: the functional at the stored correspondence, the
/// Euler-Lagrange residual, the spectral energy of the refitted trace, and
/// the grid certificates on the covering grid refined `grid_scale` times.
/// Each must match its stored value within [`RECOMPUTE_TOL`] (relative)
/// or, for defects, within `defect_tol`. Invariants checked on top: the
/// energy/area gap is non-negative, and a report marked converged has
/// defects and gap below `defect_tol`, a residual below `el_tol`, a
/// stationarity below `grad_tol` and a non-increasing history.
pub fn verify_report(report: &SolveReport, trace: &[f64], grid_scale: usize) -> Result<Vec<Check>> {
    let cfg = &report.config;
    let contour = Contour::from_spec(&report.contour)?;
    let phi = &report.reparameterization;
    if phi.len() != cfg.nodes {
        return Err(PlateauError::Validation(format!(
            "reparameterization has {} nodes, config says {}",
            phi.len(),
            cfg.nodes
        )));
    }
    let dim = contour.dimension();
    if !trace.len().is_multiple_of(dim) {
        return Err(PlateauError::Validation(
            "boundary trace length is not a multiple of the dimension".into(),
        ));
    }
    let mut checks = Vec::new();
    let nodes = BoundaryNodes::new(&contour, cfg.nodes);
    let energy = DouglasProblem::new(&nodes).energy(phi.angles());
    checks.push(Check::equal("douglas_energy", report.douglas_energy, energy));
    let el = el_residual(&KernelTable::from_nodes(&nodes), phi)
        .iter()
        .fold(0.0f64, |m, r| m.max(r.abs()));
    checks.push(Check::equal("max_el_residual", report.max_el_residual, el));

    let disc = extension_from_trace(trace, dim, cfg)?;
    checks.push(Check::equal(
        "dirichlet_energy",
        report.dirichlet_energy,
        disc.boundary().spectral_energy(),
    ));
    let grid = cfg.grid.covering(disc.degree()).scaled(grid_scale.max(1));
    let cert = certify(&disc, grid);
    checks.push(Check::equal("dirichlet_quadrature", report.dirichlet_quadrature, cert.chain.dirichlet));
    checks.push(Check::equal("area", report.area, cert.chain.area));
    let defect_match = |name: &str, stored: f64, recomputed: f64| Check {
        name: name.into(),
        stored,
        recomputed,
        tolerance: cfg.defect_tol,
        passed: (stored - recomputed).abs() <= cfg.defect_tol,
    };
    checks.push(defect_match("gap", report.gap, cert.chain.gap));
    checks.push(defect_match("f_defect", report.defect.f_defect, cert.defect.f_defect));
    checks.push(defect_match("eg_defect", report.defect.eg_defect, cert.defect.eg_defect));
    checks.push(Check::below("gap_nonnegative", -cert.chain.gap, GAP_FLOOR));

    if report.converged {
        checks.push(Check::below("converged_f_defect", cert.defect.f_defect, cfg.defect_tol));
        checks.push(Check::below("converged_eg_defect", cert.defect.eg_defect, cfg.defect_tol));
        checks.push(Check::below("converged_gap", cert.chain.gap, cfg.defect_tol));
        checks.push(Check::below("converged_el_residual", el, cfg.el_tol));
        checks.push(Check::below("converged_grad_norm", report.grad_norm, cfg.grad_tol));
        let rise = report
            .history
            .windows(2)
            .map(|w| (w[1].energy - w[0].energy) / w[0].energy.abs().max(1.0))
            .fold(0.0f64, f64::max);
        checks.push(Check::below("history_non_increasing", rise, ROUNDOFF));
    }
    Ok(checks)
}

/// Largest negative gap still attributed to quadrature round-off.
pub const GAP_FLOOR: f64 = 1e-8;
