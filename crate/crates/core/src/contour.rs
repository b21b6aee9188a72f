//! Closed contours in R^n: parsing, validation and chord-length resampling.
//!
//! A [`Contour`] is parameterized by `t` in `[0, 1)`, proportional to
//! cumulative chord length. Smooth sources are resampled to `M` points with
//! equal chords and interpolated by a periodic cubic spline; polygon sources
//! keep their vertices and interpolate linearly.

use crate::error::{PlateauError, Result};
use crate::spline::PeriodicSpline;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use std::f64::consts::TAU;
use std::path::Path;

pub const MIN_SAMPLES: usize = 8;
pub const DEFAULT_SAMPLES: usize = 1024;
pub const MIN_LENGTH: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Linear,
    Cubic,
}

/// On-disk contour description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourSpec {
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<Map<String, Value>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub interpolation: Option<Interpolation>,
    /// Optional solver settings; consumed by the command-line front end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<Value>,
}

impl ContourSpec {
    pub fn parse(text: &str) -> Result<Self> {
        let spec: ContourSpec = serde_json::from_str(text)?;
        match (&spec.points, &spec.builtin) {
            (Some(_), Some(_)) => Err(PlateauError::Parse(
                "contour spec must give either \"points\" or \"builtin\", not both".into(),
            )),
            (None, None) => Err(PlateauError::Parse(
                "contour spec needs \"points\" or \"builtin\"".into(),
            )),
            _ => Ok(spec),
        }
    }

    pub fn builtin(dimension: usize, name: &str, params: Value, samples: usize) -> Self {
        let params = match params {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Self {
            dimension,
            points: None,
            builtin: Some(name.to_string()),
            params: Some(params),
            samples: Some(samples),
            interpolation: None,
            config: None,
        }
    }

    pub fn from_points(dimension: usize, points: Vec<Vec<f64>>, interpolation: Interpolation) -> Self {
        Self {
            dimension,
            points: Some(points),
            builtin: None,
            params: None,
            samples: None,
            interpolation: Some(interpolation),
            config: None,
        }
    }

    /// Copy with the solver config block removed, for embedding in reports.
    pub fn geometry_only(&self) -> Self {
        Self {
            config: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone)]
enum Interpolant {
    Linear {
        /// Vertices, knot-major.
        knots: Vec<f64>,
        /// Normalized cumulative chord length at each vertex, plus 1.0 at the end.
        params: Vec<f64>,
    },
    Cubic(PeriodicSpline),
}

/// A validated closed curve in R^n.
#[derive(Debug, Clone)]
pub struct Contour {
    dimension: usize,
    samples: Vec<f64>,
    arc_lengths: Vec<f64>,
    spec: ContourSpec,
    interpolant: Interpolant,
}

pub fn load_contour(path: impl AsRef<Path>) -> Result<Contour> {
    let text = std::fs::read_to_string(path.as_ref())?;
    let spec = ContourSpec::parse(&text)?;
    Contour::from_spec(&spec)
}

impl Contour {
    pub fn from_spec(spec: &ContourSpec) -> Result<Self> {
        let n = spec.dimension;
        if n < 2 {
            return Err(PlateauError::Validation(format!(
                "dimension must be at least 2, got {n}"
            )));
        }
        let m = spec.samples.unwrap_or(DEFAULT_SAMPLES);
        if m < MIN_SAMPLES {
            return Err(PlateauError::Validation(format!(
                "need at least {MIN_SAMPLES} samples, got {m}"
            )));
        }
        if let Some(points) = &spec.points {
            let flat = flatten_points(points, n)?;
            let interp = spec.interpolation.unwrap_or(Interpolation::Linear);
            Self::from_knots(spec.clone(), flat, n, m, interp)
        } else {
            let name = spec.builtin.as_deref().unwrap_or_default();
            let params = spec.params.clone().unwrap_or_default();
            let family = Builtin::parse(name, &params, n)?;
            match family {
                Builtin::Polygon(vertices) => {
                    Self::from_knots(spec.clone(), vertices, n, m, Interpolation::Linear)
                }
                smooth => {
                    let samples = equal_chord_samples(|s, out| smooth.eval(s, out), n, m);
                    Self::finish_cubic(spec.clone(), samples, n)
                }
            }
        }
    }

    fn from_knots(
        spec: ContourSpec,
        mut knots: Vec<f64>,
        n: usize,
        m: usize,
        interp: Interpolation,
    ) -> Result<Self> {
        let mut count = knots.len() / n;
        // An explicit closing point equal to the first is dropped.
        if count > 1 && knots[..n] == knots[(count - 1) * n..] {
            knots.truncate((count - 1) * n);
            count -= 1;
        }
        if count < 3 {
            return Err(PlateauError::Validation(format!(
                "a closed contour needs at least 3 distinct points, got {count}"
            )));
        }
        validate_points(&knots, n)?;
        let params = chord_params(&knots, n);
        match interp {
            Interpolation::Linear => {
                let interpolant = Interpolant::Linear { knots, params };
                let samples: Vec<f64> = (0..m)
                    .flat_map(|j| eval_interpolant(&interpolant, n, j as f64 / m as f64))
                    .collect();
                validate_points(&samples, n)?;
                let arc_lengths = cumulative_chords(&samples, n);
                let contour = Self {
                    dimension: n,
                    samples,
                    arc_lengths,
                    spec,
                    interpolant,
                };
                contour.check_length()?;
                Ok(contour)
            }
            Interpolation::Cubic => {
                let spline = PeriodicSpline::new(params[..count].to_vec(), 1.0, knots, n);
                let samples = equal_chord_samples(|s, out| spline.eval_into(s, out), n, m);
                Self::finish_cubic(spec, samples, n)
            }
        }
    }

    fn finish_cubic(spec: ContourSpec, samples: Vec<f64>, n: usize) -> Result<Self> {
        validate_points(&samples, n)?;
        let m = samples.len() / n;
        let arc_lengths = cumulative_chords(&samples, n);
        let total = arc_lengths[m];
        // Chords are equal to resampling precision, so the cumulative chord
        // parameter of sample j is j / m up to roundoff.
        let knots: Vec<f64> = arc_lengths[..m].iter().map(|c| c / total).collect();
        let spline = PeriodicSpline::new(knots, 1.0, samples.clone(), n);
        let contour = Self {
            dimension: n,
            samples,
            arc_lengths,
            spec,
            interpolant: Interpolant::Cubic(spline),
        };
        contour.check_length()?;
        Ok(contour)
    }

    fn check_length(&self) -> Result<()> {
        if self.length() < MIN_LENGTH {
            return Err(PlateauError::DegenerateContour(format!(
                "total length {} is below {MIN_LENGTH}",
                self.length()
            )));
        }
        Ok(())
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn sample_count(&self) -> usize {
        self.samples.len() / self.dimension
    }

    pub fn sample(&self, j: usize) -> &[f64] {
        &self.samples[j * self.dimension..(j + 1) * self.dimension]
    }

    /// Samples, point-major.
    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    /// Cumulative chord lengths `[0, c_1, ..., L]` (`M + 1` entries).
    pub fn arc_lengths(&self) -> &[f64] {
        &self.arc_lengths
    }

    /// Total chord length `L`.
    pub fn length(&self) -> f64 {
        *self.arc_lengths.last().unwrap()
    }

    pub fn spec(&self) -> &ContourSpec {
        &self.spec
    }

    pub fn interpolation(&self) -> Interpolation {
        match self.interpolant {
            Interpolant::Linear { .. } => Interpolation::Linear,
            Interpolant::Cubic(_) => Interpolation::Cubic,
        }
    }

    /// Point at parameter `t` (taken modulo 1).
    pub fn evaluate(&self, t: f64) -> Vec<f64> {
        if t == 0.0 {
            return self.sample(0).to_vec();
        }
        eval_interpolant(&self.interpolant, self.dimension, t)
    }

    /// Derivative with respect to `t` in `[0, 1)`.
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        match &self.interpolant {
            Interpolant::Cubic(s) => s.deriv(t),
            Interpolant::Linear { knots, params } => {
                let n = self.dimension;
                let (i, _) = locate_linear(params, t);
                let count = params.len() - 1;
                let j = (i + 1) % count;
                let dt = params[i + 1] - params[i];
                (0..n).map(|c| (knots[j * n + c] - knots[i * n + c]) / dt).collect()
            }
        }
    }

    /// Resamples onto `m` points along the same interpolant.
    pub fn resample(&self, m: usize) -> Result<Contour> {
        let spec = ContourSpec {
            samples: Some(m),
            ..self.spec.clone()
        };
        match &self.interpolant {
            Interpolant::Cubic(s) => {
                let samples = equal_chord_samples(|t, out| s.eval_into(t, out), self.dimension, m);
                Self::finish_cubic(spec, samples, self.dimension)
            }
            Interpolant::Linear { .. } => Contour::from_spec(&spec),
        }
    }

    /// A copy moved by `point -> scale * rotation * point + shift`, with the
    /// rotation given as a row-major `n x n` matrix.
    pub fn transformed(&self, rotation: &[f64], scale: f64, shift: &[f64]) -> Result<Contour> {
        let n = self.dimension;
        let map = |p: &[f64]| -> Vec<f64> {
            (0..n)
                .map(|r| scale * (0..n).map(|c| rotation[r * n + c] * p[c]).sum::<f64>() + shift[r])
                .collect()
        };
        let points: Vec<Vec<f64>> = match &self.interpolant {
            Interpolant::Linear { knots, .. } => knots.chunks(n).map(map).collect(),
            Interpolant::Cubic(_) => self.samples.chunks(n).map(map).collect(),
        };
        let spec = ContourSpec {
            samples: Some(self.sample_count()),
            ..ContourSpec::from_points(n, points, self.interpolation())
        };
        Contour::from_spec(&spec)
    }
}

fn flatten_points(points: &[Vec<f64>], n: usize) -> Result<Vec<f64>> {
    let mut flat = Vec::with_capacity(points.len() * n);
    for (i, p) in points.iter().enumerate() {
        if p.len() != n {
            return Err(PlateauError::Validation(format!(
                "point {i} has {} coordinates, expected {n}",
                p.len()
            )));
        }
        if p.iter().any(|x| !x.is_finite()) {
            return Err(PlateauError::Validation(format!("point {i} is not finite")));
        }
        flat.extend_from_slice(p);
    }
    Ok(flat)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn cumulative_chords(points: &[f64], n: usize) -> Vec<f64> {
    let m = points.len() / n;
    let mut out = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for j in 0..m {
        let k = (j + 1) % m;
        acc += dist(&points[j * n..(j + 1) * n], &points[k * n..(k + 1) * n]);
        out.push(acc);
    }
    out
}

fn chord_params(points: &[f64], n: usize) -> Vec<f64> {
    let cum = cumulative_chords(points, n);
    let total = *cum.last().unwrap();
    cum.iter().map(|c| c / total).collect()
}

fn locate_linear(params: &[f64], t: f64) -> (usize, f64) {
    let t = t.rem_euclid(1.0);
    let count = params.len() - 1;
    let i = params.partition_point(|&p| p <= t).saturating_sub(1).min(count - 1);
    (i, (t - params[i]) / (params[i + 1] - params[i]))
}

fn eval_interpolant(interp: &Interpolant, n: usize, t: f64) -> Vec<f64> {
    match interp {
        Interpolant::Cubic(s) => s.eval(t),
        Interpolant::Linear { knots, params } => {
            let (i, frac) = locate_linear(params, t);
            let count = params.len() - 1;
            let j = (i + 1) % count;
            (0..n)
                .map(|c| knots[i * n + c] + frac * (knots[j * n + c] - knots[i * n + c]))
                .collect()
        }
    }
}

/// Samples `curve` (periodic on `[0, 1)`) at `m` points with equal chords,
/// the first point fixed at `curve(0)`.
fn equal_chord_samples<F>(curve: F, n: usize, m: usize) -> Vec<f64>
where
    F: Fn(f64, &mut [f64]),
{
    let mut params: Vec<f64> = (0..m).map(|j| j as f64 / m as f64).collect();
    let mut points = vec![0.0; m * n];
    for _ in 0..200 {
        for (j, &s) in params.iter().enumerate() {
            curve(s, &mut points[j * n..(j + 1) * n]);
        }
        let cum = cumulative_chords(&points, n);
        let total = cum[m];
        let mut next = vec![0.0; m];
        let mut seg = 0;
        for (j, slot) in next.iter_mut().enumerate().skip(1) {
            let target = total * j as f64 / m as f64;
            while cum[seg + 1] < target {
                seg += 1;
            }
            let s0 = params[seg];
            let s1 = if seg + 1 < m { params[seg + 1] } else { 1.0 };
            let frac = (target - cum[seg]) / (cum[seg + 1] - cum[seg]);
            *slot = s0 + frac * (s1 - s0);
        }
        let change = params
            .iter()
            .zip(&next)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        params = next;
        if change < 1e-15 {
            break;
        }
    }
    for (j, &s) in params.iter().enumerate() {
        curve(s, &mut points[j * n..(j + 1) * n]);
    }
    points
}

fn validate_points(points: &[f64], n: usize) -> Result<()> {
    let m = points.len() / n;
    let p = |i: usize| &points[i * n..(i + 1) * n];
    for i in 0..m {
        if p(i) == p((i + 1) % m) {
            return Err(PlateauError::Validation(format!(
                "points {i} and {} are identical",
                (i + 1) % m
            )));
        }
    }
    if n == 2 {
        check_simple_polygon(points)?;
    } else {
        let mut order: Vec<usize> = (0..m).collect();
        order.sort_by(|&a, &b| p(a).partial_cmp(p(b)).unwrap());
        for w in order.windows(2) {
            if p(w[0]) == p(w[1]) {
                return Err(PlateauError::Validation(format!(
                    "points {} and {} are identical",
                    w[0], w[1]
                )));
            }
        }
    }
    Ok(())
}

/// O(M^2) test that no two non-adjacent chords of a planar polygon meet.
fn check_simple_polygon(points: &[f64]) -> Result<()> {
    let m = points.len() / 2;
    let pt = |i: usize| (points[2 * (i % m)], points[2 * (i % m) + 1]);
    let orient = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0)
    };
    let on_segment = |a: (f64, f64), b: (f64, f64), c: (f64, f64)| {
        c.0 >= a.0.min(b.0) && c.0 <= a.0.max(b.0) && c.1 >= a.1.min(b.1) && c.1 <= a.1.max(b.1)
    };
    for i in 0..m {
        let (a, b) = (pt(i), pt(i + 1));
        for j in i + 2..m {
            if i == 0 && j == m - 1 {
                continue;
            }
            let (c, d) = (pt(j), pt(j + 1));
            let d1 = orient(c, d, a);
            let d2 = orient(c, d, b);
            let d3 = orient(a, b, c);
            let d4 = orient(a, b, d);
            let crosses = ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
                && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0));
            let touches = (d1 == 0.0 && on_segment(c, d, a))
                || (d2 == 0.0 && on_segment(c, d, b))
                || (d3 == 0.0 && on_segment(a, b, c))
                || (d4 == 0.0 && on_segment(a, b, d));
            if crosses || touches {
                return Err(PlateauError::Validation(format!(
                    "contour self-intersects: chord {i} meets chord {j}"
                )));
            }
        }
    }
    Ok(())
}

/// Analytic contour families.
#[derive(Debug, Clone)]
enum Builtin {
    Ellipse {
        a: f64,
        b: f64,
        center: Vec<f64>,
        tilt: f64,
    },
    Fourier {
        offset: Vec<f64>,
        cos: Vec<Vec<f64>>,
        sin: Vec<Vec<f64>>,
    },
    Polygon(Vec<f64>),
}

fn num(params: &Map<String, Value>, key: &str, default: f64) -> Result<f64> {
    match params.get(key) {
        None => Ok(default),
        Some(v) => v
            .as_f64()
            .ok_or_else(|| PlateauError::Parse(format!("parameter \"{key}\" must be a number"))),
    }
}

fn vectors(params: &Map<String, Value>, key: &str, n: usize) -> Result<Vec<Vec<f64>>> {
    let Some(v) = params.get(key) else {
        return Ok(Vec::new());
    };
    let parsed: Vec<Vec<f64>> = serde_json::from_value(v.clone())
        .map_err(|e| PlateauError::Parse(format!("parameter \"{key}\": {e}")))?;
    if parsed.iter().any(|row| row.len() != n) {
        return Err(PlateauError::Parse(format!(
            "parameter \"{key}\" rows must have {n} entries"
        )));
    }
    Ok(parsed)
}

fn center(params: &Map<String, Value>, n: usize) -> Result<Vec<f64>> {
    if let Some(v) = params.get("center") {
        let c: Vec<f64> = serde_json::from_value(v.clone())
            .map_err(|e| PlateauError::Parse(format!("parameter \"center\": {e}")))?;
        if c.len() != n {
            return Err(PlateauError::Parse(format!("\"center\" must have {n} entries")));
        }
        return Ok(c);
    }
    let mut c = vec![0.0; n];
    for (i, key) in ["cx", "cy", "cz"].iter().enumerate().take(n) {
        c[i] = num(params, key, 0.0)?;
    }
    Ok(c)
}

impl Builtin {
    fn parse(name: &str, params: &Map<String, Value>, n: usize) -> Result<Self> {
        let positive = |v: f64, key: &str| {
            if v > 0.0 && v.is_finite() {
                Ok(v)
            } else {
                Err(PlateauError::Validation(format!("\"{key}\" must be positive")))
            }
        };
        match name {
            "circle" => {
                let r = positive(num(params, "radius", 1.0)?, "radius")?;
                Ok(Builtin::Ellipse {
                    a: r,
                    b: r,
                    center: center(params, n)?,
                    tilt: 0.0,
                })
            }
            "ellipse" => Ok(Builtin::Ellipse {
                a: positive(num(params, "a", 2.0)?, "a")?,
                b: positive(num(params, "b", 1.0)?, "b")?,
                center: center(params, n)?,
                tilt: 0.0,
            }),
            "tilted_circle" => {
                if n < 3 {
                    return Err(PlateauError::Validation(
                        "tilted_circle needs dimension at least 3".into(),
                    ));
                }
                let r = positive(num(params, "radius", 1.0)?, "radius")?;
                Ok(Builtin::Ellipse {
                    a: r,
                    b: r,
                    center: center(params, n)?,
                    tilt: num(params, "tilt", std::f64::consts::FRAC_PI_6)?,
                })
            }
            "skew_quad" => {
                if n < 3 {
                    return Err(PlateauError::Validation(
                        "skew_quad needs dimension at least 3".into(),
                    ));
                }
                let s = positive(num(params, "size", 1.0)?, "size")?;
                let h = num(params, "height", 0.5)?;
                let mut v = vec![0.0; 4 * n];
                let corners = [(s, 0.0, h), (0.0, s, -h), (-s, 0.0, h), (0.0, -s, -h)];
                for (i, (x, y, z)) in corners.iter().enumerate() {
                    v[i * n] = *x;
                    v[i * n + 1] = *y;
                    v[i * n + 2] = *z;
                }
                Ok(Builtin::Polygon(v))
            }
            "fourier_curve" => {
                let offset = match params.get("offset") {
                    Some(_) => center(
                        &Map::from_iter([("center".to_string(), params["offset"].clone())]),
                        n,
                    )?,
                    None => vec![0.0; n],
                };
                let cos = vectors(params, "cos", n)?;
                let sin = vectors(params, "sin", n)?;
                if cos.is_empty() && sin.is_empty() {
                    return Err(PlateauError::Validation(
                        "fourier_curve needs \"cos\" or \"sin\" coefficients".into(),
                    ));
                }
                Ok(Builtin::Fourier { offset, cos, sin })
            }
            other => Err(PlateauError::Parse(format!("unknown builtin contour \"{other}\""))),
        }
    }

    fn eval(&self, s: f64, out: &mut [f64]) {
        let theta = TAU * s;
        match self {
            Builtin::Ellipse { a, b, center, tilt } => {
                out.copy_from_slice(center);
                let (x, y) = (a * theta.cos(), b * theta.sin());
                out[0] += x;
                if *tilt == 0.0 {
                    out[1] += y;
                } else {
                    out[1] += y * tilt.cos();
                    out[2] += y * tilt.sin();
                }
            }
            Builtin::Fourier { offset, cos, sin } => {
                out.copy_from_slice(offset);
                for (k, c) in cos.iter().enumerate() {
                    let w = ((k + 1) as f64 * theta).cos();
                    out.iter_mut().zip(c).for_each(|(o, c)| *o += c * w);
                }
                for (k, c) in sin.iter().enumerate() {
                    let w = ((k + 1) as f64 * theta).sin();
                    out.iter_mut().zip(c).for_each(|(o, c)| *o += c * w);
                }
            }
            Builtin::Polygon(_) => unreachable!("polygons are interpolated linearly"),
        }
    }
}
