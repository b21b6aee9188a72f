use crate::config::{resolve, Overrides};
use crate::output::{read_trace, trace_rows, OutputDir};
use plateau_core::annulus::{solve_two_contours, AnnulusStatus};
use plateau_core::contour::{Contour, ContourSpec};
use plateau_core::diagnostics::{verify_report, write_metric_grid, Check, RECOMPUTE_TOL};
use plateau_core::mesh::{annulus_mesh, disc_mesh, read_obj_vertices};
use plateau_core::optim::HistoryEntry;
use plateau_core::solver::{extension_from_trace, extension_trace, riemann_map, solve_plateau, SolveReport, Solution};
use plateau_core::{PlateauError, Result};
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NOT_CONVERGED: u8 = 2;
pub const EXIT_NOT_UNIVALENT: u8 = 3;
pub const EXIT_BRACKET_END: u8 = 4;
pub const EXIT_CHECK_FAILED: u8 = 5;

pub fn exit_code(e: &PlateauError) -> u8 {
    match e {
        PlateauError::NotConverged(_) => EXIT_NOT_CONVERGED,
        PlateauError::UnivalencyFailure { .. } => EXIT_NOT_UNIVALENT,
        PlateauError::ModulusAtBracketEnd { .. } => EXIT_BRACKET_END,
        _ => EXIT_INPUT,
    }
}

fn load(path: &Path) -> Result<(ContourSpec, Contour)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PlateauError::Parse(format!("{}: {e}", path.display())))?;
    let spec = ContourSpec::parse(&text).map_err(|e| match e {
        PlateauError::Parse(m) => PlateauError::Parse(format!("{}: {m}", path.display())),
        other => other,
    })?;
    let contour = Contour::from_spec(&spec)?;
    Ok((spec, contour))
}

fn history_rows(history: &[HistoryEntry]) -> impl Iterator<Item = Vec<f64>> + '_ {
    history
        .iter()
        .map(|h| vec![h.iteration as f64, h.energy, h.grad_norm])
}

/// Writes the outputs shared by `solve` and `map2d`.
fn write_disc(out: &mut OutputDir, contour: &Contour, sol: &Solution, metric_grid: bool) -> Result<()> {
    let cfg = &sol.report.config;
    for p in disc_mesh(&sol.surface).save(&out.path("surface.obj"))? {
        out.record(&p);
    }
    let dim = contour.dimension();
    let (header, rows) = trace_rows(&extension_trace(contour, &sol.reparameterization, cfg), dim);
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    out.csv("surface.boundary.csv", &header, rows)?;
    out.json("report.json", &sol.report)?;
    out.csv("history.csv", &["iteration", "energy", "grad_norm"], history_rows(&sol.report.history))?;
    if metric_grid {
        let p = out.path("metric_grid.csv");
        write_metric_grid(
            &sol.surface,
            cfg.grid.covering(sol.surface.degree()),
            BufWriter::new(File::create(&p)?),
        )?;
        out.record(&p);
    }
    Ok(())
}

fn not_converged(report: &SolveReport) -> u8 {
    eprintln!(
        "warning: not converged (stop: {:?}, gradient {:e}, defects {:e}/{:e}); partial results written",
        report.stop_reason, report.grad_norm, report.defect.f_defect, report.defect.eg_defect
    );
    EXIT_NOT_CONVERGED
}

pub fn solve(contour: &Path, out: &Path, flags: &Overrides, metric_grid: bool) -> Result<u8> {
    let (spec, c) = load(contour)?;
    let cfg = resolve(&[&spec], flags, None)?;
    let mut dir = OutputDir::create(out)?;
    let sol = solve_plateau(&c, &cfg)?;
    write_disc(&mut dir, &c, &sol, metric_grid)?;
    dir.finish("solve", &[contour], &cfg, sol.report.iterations)?;
    if sol.report.converged {
        Ok(EXIT_OK)
    } else {
        Ok(not_converged(&sol.report))
    }
}

/// `G` or `GxG`.
pub fn parse_grid(s: &str) -> std::result::Result<usize, String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    let nums = parts
        .iter()
        .map(|p| p.trim().parse::<usize>().map_err(|e| format!("bad grid size {p:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match nums[..] {
        [g] | [g, _] if nums.iter().all(|&n| n == g) => {
            if g < 2 {
                Err("grid needs at least 2 points per side".into())
            } else {
                Ok(g)
            }
        }
        [_, _] => Err("only square grids GxG are supported".into()),
        _ => Err(format!("expected G or GxG, got {s:?}")),
    }
}

/// `a,b` with `0 < a < b < 1` (range checked by the config validation).
pub fn parse_bracket(s: &str) -> std::result::Result<[f64; 2], String> {
    let nums = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad bracket value {p:?}: {e}")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    match nums[..] {
        [a, b] => Ok([a, b]),
        _ => Err(format!("expected a,b, got {s:?}")),
    }
}

pub fn map2d(contour: &Path, out: &Path, flags: &Overrides, grid: usize, metric_grid: bool) -> Result<u8> {
    let (spec, c) = load(contour)?;
    let cfg = resolve(&[&spec], flags, None)?;
    let mut dir = OutputDir::create(out)?;
    let map = riemann_map(&c, &cfg, grid)?;
    write_disc(&mut dir, &c, &map.solution, metric_grid)?;
    dir.json("univalency.json", &map.univalency)?;
    dir.csv(
        "image_grid.csv",
        &["u", "v", "x", "y"],
        map.univalency
            .samples
            .iter()
            .map(|s| vec![s.preimage[0], s.preimage[1], s.target[0], s.target[1]]),
    )?;
    dir.finish("map2d", &[contour], &cfg, map.solution.report.iterations)?;
    match map.into_result() {
        Err(e) => {
            eprintln!("error: {e}");
            Ok(EXIT_NOT_UNIVALENT)
        }
        Ok(m) if !m.solution.report.converged => Ok(not_converged(&m.solution.report)),
        Ok(_) => Ok(EXIT_OK),
    }
}

pub fn annulus(
    contour1: &Path,
    contour2: &Path,
    out: &Path,
    flags: &Overrides,
    bracket: Option<[f64; 2]>,
) -> Result<u8> {
    let (spec1, c1) = load(contour1)?;
    let (spec2, c2) = load(contour2)?;
    let cfg = resolve(&[&spec1, &spec2], flags, bracket)?;
    let mut dir = OutputDir::create(out)?;
    let sol = solve_two_contours(&c1, &c2, &cfg)?;
    for p in annulus_mesh(&sol.map).save(&dir.path("annulus.obj"))? {
        dir.record(&p);
    }
    let r = &sol.report;
    dir.csv(
        "modulus_trace.csv",
        &["rho", "energy", "rho_derivative", "grad_norm", "converged", "resolved"],
        r.modulus_trace.iter().map(|s| {
            vec![
                s.rho,
                s.energy,
                s.rho_derivative,
                s.grad_norm,
                f64::from(u8::from(s.converged)),
                f64::from(u8::from(s.resolved)),
            ]
        }),
    )?;
    dir.json("report.json", r)?;
    dir.csv("history.csv", &["iteration", "energy", "grad_norm"], history_rows(&r.history))?;
    dir.finish("annulus", &[contour1, contour2], &cfg, r.iterations)?;
    match r.status {
        AnnulusStatus::Converged => Ok(EXIT_OK),
        AnnulusStatus::NotConverged => {
            eprintln!(
                "warning: not converged (stop: {:?}, gradient {:e}); partial results written",
                r.stop_reason, r.grad_norm
            );
            Ok(EXIT_NOT_CONVERGED)
        }
        AnnulusStatus::ModulusAtBracketEnd => {
            let [lo, hi] = cfg.modulus_bracket;
            eprintln!(
                "advisory: the energy has no stationary modulus in [{lo}, {hi}]; the best sample rho = {} \
                 lies at the bracket end. The contours may be too far apart to bound a connected minimal \
                 annulus (the minimum is then two separate discs); otherwise widen --modulus-bracket.",
                r.modulus
            );
            Ok(EXIT_BRACKET_END)
        }
    }
}

/// Largest coordinate difference between the stored OBJ and a mesh
/// resampled from the refitted surface.
fn vertex_check(obj: &Path, report: &SolveReport, trace: &[f64], dim: usize) -> Result<Check> {
    let stored = read_obj_vertices(&std::fs::read_to_string(obj)?)?;
    let mesh = disc_mesh(&extension_from_trace(trace, dim, &report.config)?);
    let scale = mesh.vertices.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let tolerance = RECOMPUTE_TOL * scale;
    if stored.len() != mesh.vertex_count() {
        return Ok(Check {
            name: "surface_vertices".into(),
            stored: stored.len() as f64,
            recomputed: mesh.vertex_count() as f64,
            tolerance: 0.0,
            passed: false,
        });
    }
    let diff = stored.iter().enumerate().fold(0.0f64, |m, (i, p)| {
        let q = mesh.vertex(i);
        (0..3).fold(m, |m, k| m.max((p[k] - q.get(k).copied().unwrap_or(0.0)).abs()))
    });
    Ok(Check {
        name: "surface_vertices".into(),
        stored: diff,
        recomputed: diff,
        tolerance,
        passed: diff <= tolerance,
    })
}

pub fn check(report_path: &Path, surface: &Path, grid_scale: usize) -> Result<u8> {
    let text = std::fs::read_to_string(report_path)
        .map_err(|e| PlateauError::Parse(format!("{}: {e}", report_path.display())))?;
    let report: SolveReport = serde_json::from_str(&text)
        .map_err(|e| PlateauError::Parse(format!("{}: {e}", report_path.display())))?;
    let is_obj = surface.extension().is_some_and(|e| e.eq_ignore_ascii_case("obj"));
    let trace_path: PathBuf = if is_obj {
        surface.with_extension("boundary.csv")
    } else {
        surface.to_path_buf()
    };
    let (trace, dim) = read_trace(&trace_path)?;
    if dim != report.contour.dimension {
        return Err(PlateauError::Validation(format!(
            "boundary trace has dimension {dim}, the report's contour {}",
            report.contour.dimension
        )));
    }
    let mut checks = verify_report(&report, &trace, grid_scale)?;
    if is_obj {
        checks.push(vertex_check(surface, &report, &trace, dim)?);
    }
    for c in &checks {
        println!(
            "{} {}: stored {:e}, recomputed {:e}, tolerance {:e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.stored,
            c.recomputed,
            c.tolerance
        );
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    if failed.is_empty() {
        Ok(EXIT_OK)
    } else {
        eprintln!("violated: {}", failed.join(", "));
        Ok(EXIT_CHECK_FAILED)
    }
}
