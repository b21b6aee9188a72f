use plateau_core::annulus::{solve_two_contours, AnnulusStatus, ModulusKind};
use plateau_core::contour::{Contour, ContourSpec};
use plateau_core::error::PlateauError;
use plateau_core::solver::SolverConfig;
use serde_json::json;
use std::f64::consts::PI;

fn circle(dim: usize, radius: f64, z: f64) -> Contour {
    let params = if dim == 3 {
        json!({"radius": radius, "cz": z})
    } else {
        json!({ "radius": radius })
    };
    Contour::from_spec(&ContourSpec::builtin(dim, "circle", params, 1024)).unwrap()
}

/// Roots of `c cosh(h / c) = 1` by bisection on a fine scan.
fn catenoid_parameters(h: f64) -> Vec<f64> {
    let f = |c: f64| c * (h / c).cosh() - 1.0;
    let mut roots = Vec::new();
    let m = 20_000;
    for i in 1..m {
        let (mut a, mut b) = (i as f64 / m as f64, (i + 1) as f64 / m as f64);
        if f(a).signum() == f(b).signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if f(a).signum() == f(mid).signum() {
                a = mid;
            } else {
                b = mid;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

/// Area of the catenoid `r(z) = c cosh(z / c)` over `|z| <= h` by Simpson's rule
/// on `2 pi r sqrt(1 + r'^2)`.
fn catenoid_area(c: f64, h: f64) -> f64 {
    let m = 20_000;
    let dz = 2.0 * h / m as f64;
    let g = |z: f64| {
        let r = c * (z / c).cosh();
        let rp = (z / c).sinh();
        2.0 * PI * r * (1.0 + rp * rp).sqrt()
    };
    let mut s = g(-h) + g(h);
    for i in 1..m {
        let z = -h + i as f64 * dz;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * g(z);
    }
    s * dz / 3.0
}

fn config(nodes: usize) -> SolverConfig {
    SolverConfig {
        nodes,
        ..SolverConfig::default()
    }
}

#[test]
fn oracle_has_two_catenoids_below_critical_height_and_none_above() {
    assert_eq!(catenoid_parameters(0.4).len(), 2);
    assert_eq!(catenoid_parameters(0.66).len(), 2);
    assert!(catenoid_parameters(0.67).is_empty());
    assert!(catenoid_parameters(0.8).is_empty());
}

#[test]
fn coaxial_circles_span_the_fat_catenoid() {
    let h = 0.4;
    let fat = catenoid_parameters(h).into_iter().fold(0.0, f64::max);
    let area = catenoid_area(fat, h);
    let sol = solve_two_contours(&circle(3, 1.0, h), &circle(3, 1.0, -h), &config(128)).unwrap();
    let r = &sol.report;
    assert_eq!(r.status, AnnulusStatus::Converged);
    assert!((r.area - area).abs() < 0.01 * area, "{} vs {area}", r.area);
    assert!((r.area - area).abs() < 1e-6, "{} vs {area}", r.area);
    // The conformal catenoid has modulus exp(-2h/c).
    assert!((r.modulus - (-2.0 * h / fat).exp()).abs() < 1e-6);
    assert!(r.defect.f_defect < 1e-6 && r.defect.eg_defect < 1e-6);
    assert!(r.rho_derivative.abs() < 1e-5);
}

#[test]
fn narrow_catenoid_is_a_maximum_of_the_modulus_trace() {
    let h = 0.4;
    let narrow = catenoid_parameters(h).into_iter().fold(1.0, f64::min);
    let mut cfg = config(128);
    cfg.modulus_bracket = [0.002, 0.05];
    let sol = solve_two_contours(&circle(3, 1.0, h), &circle(3, 1.0, -h), &cfg).unwrap();
    let r = &sol.report;
    assert_eq!(r.status, AnnulusStatus::Converged);
    assert_eq!(r.stationary_moduli.len(), 1);
    assert_eq!(r.stationary_moduli[0].kind, ModulusKind::Maximum);
    assert!((r.modulus - (-2.0 * h / narrow).exp()).abs() < 1e-6);
    assert!((r.area - catenoid_area(narrow, h)).abs() < 1e-4);
}

#[test]
fn separated_circles_end_at_the_bracket() {
    let sol = solve_two_contours(&circle(3, 1.0, 0.8), &circle(3, 1.0, -0.8), &config(128)).unwrap();
    let r = &sol.report;
    assert_eq!(r.status, AnnulusStatus::ModulusAtBracketEnd);
    assert!(r.stationary_moduli.is_empty());
    assert_eq!(r.modulus, r.config.modulus_bracket[0]);
    // Energy decreases toward the small-modulus end.
    let usable: Vec<_> = r.modulus_trace.iter().filter(|s| s.converged && s.resolved).collect();
    assert!(usable.windows(2).all(|w| w[0].energy < w[1].energy));
    assert!(matches!(
        sol.into_result(),
        Err(PlateauError::ModulusAtBracketEnd { .. })
    ));
}

#[test]
fn concentric_planar_circles_recover_the_modulus() {
    for rho in [0.3, 0.5] {
        let sol = solve_two_contours(&circle(2, 1.0, 0.0), &circle(2, rho, 0.0), &config(128)).unwrap();
        let r = &sol.report;
        assert_eq!(r.status, AnnulusStatus::Converged, "rho {rho}");
        assert!((r.modulus - rho).abs() < 1e-6, "{} vs {rho}", r.modulus);
        let exact = PI * (1.0 - rho * rho);
        assert!((r.energy - exact).abs() < 1e-8, "{} vs {exact}", r.energy);
        assert!((r.area - exact).abs() < 1e-8);
        let z = sol.map.eval(0.0, 0.7).unwrap();
        assert!(z[0].abs() < 1e-9 && (z[1] - 0.7).abs() < 1e-9);
    }
}

#[test]
fn mismatched_dimensions_are_rejected() {
    let r = solve_two_contours(&circle(2, 1.0, 0.0), &circle(3, 1.0, 0.0), &config(64));
    assert!(matches!(r, Err(PlateauError::Validation(_))));
}
