//! Polar-grid surface meshes and Wavefront OBJ output.

use crate::annulus::AnnulusMap;
use crate::error::{PlateauError, Result};
use crate::harmonic::HarmonicDisc;
use crate::io::fmt_f64;
use std::io::Write;
use std::path::Path;

/// Ring and spoke counts used for exported surfaces.
pub const DEFAULT_RINGS: usize = 24;
pub const DEFAULT_SPOKES: usize = 96;

/// Triangulated image of a polar grid on the disc or an annulus.
#[derive(Debug, Clone)]
pub struct PolarMesh {
    pub dimension: usize,
    /// Vertex positions in R^n, vertex-major.
    pub vertices: Vec<f64>,
    /// Parameter-domain coordinates `(u, v)` of each vertex.
    pub params: Vec<[f64; 2]>,
    /// Zero-based triangle indices.
    pub triangles: Vec<[usize; 3]>,
}

impl PolarMesh {
    /// Samples `surface` on `rings x spokes`. With `inner == 0` the centre
    /// is a single vertex and the first ring is a fan; otherwise the rings
    /// run from `inner` to `outer`.
    pub fn sample<F>(surface: F, dimension: usize, inner: f64, outer: f64, rings: usize, spokes: usize) -> Self
    where
        F: Fn(f64, f64) -> Vec<f64>,
    {
        let mut vertices = Vec::new();
        let mut params = Vec::new();
        let mut triangles = Vec::new();
        let spokes = spokes.max(3);
        let rings = rings.max(1);
        let mut push = |u: f64, v: f64| {
            vertices.extend(surface(u, v));
            params.push([u, v]);
        };
        let fan = inner == 0.0;
        if fan {
            push(0.0, 0.0);
        }
        let ring_radius = |r: usize| {
            if fan {
                outer * r as f64 / rings as f64
            } else {
                inner + (outer - inner) * r as f64 / rings as f64
            }
        };
        let first_ring = usize::from(fan);
        for r in first_ring..=rings {
            let rho = ring_radius(r);
            for s in 0..spokes {
                let t = std::f64::consts::TAU * s as f64 / spokes as f64;
                push(rho * t.cos(), rho * t.sin());
            }
        }
        let index = |r: usize, s: usize| {
            let base = if fan { 1 + (r - 1) * spokes } else { r * spokes };
            base + s % spokes
        };
        if fan {
            for s in 0..spokes {
                triangles.push([0, index(1, s), index(1, s + 1)]);
            }
        }
        let start = if fan { 1 } else { 0 };
        for r in start..rings {
            for s in 0..spokes {
                let (a, b) = (index(r, s), index(r, s + 1));
                let (c, d) = (index(r + 1, s), index(r + 1, s + 1));
                triangles.push([a, c, d]);
                triangles.push([a, d, b]);
            }
        }
        Self {
            dimension,
            vertices,
            params,
            triangles,
        }
    }

    pub fn vertex(&self, i: usize) -> &[f64] {
        &self.vertices[i * self.dimension..(i + 1) * self.dimension]
    }

    pub fn vertex_count(&self) -> usize {
        self.params.len()
    }

    /// OBJ text: `v x y z` lines (first three coordinates, zero-padded for
    /// planar surfaces) then one-based `f i j k` lines.
    pub fn write_obj<W: Write>(&self, mut out: W) -> Result<()> {
        for i in 0..self.vertex_count() {
            let p = self.vertex(i);
            let c = |k: usize| p.get(k).copied().unwrap_or(0.0);
            writeln!(out, "v {} {} {}", fmt_f64(c(0)), fmt_f64(c(1)), fmt_f64(c(2)))?;
        }
        for t in &self.triangles {
            writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1)?;
        }
        Ok(())
    }

    /// Sidecar CSV with the parameter point and all `n` coordinates.
    pub fn write_coordinates_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let mut header = vec!["u".to_string(), "v".to_string()];
        header.extend((1..=self.dimension).map(|k| format!("x{k}")));
        writeln!(out, "{}", header.join(","))?;
        for i in 0..self.vertex_count() {
            let mut cells = vec![fmt_f64(self.params[i][0]), fmt_f64(self.params[i][1])];
            cells.extend(self.vertex(i).iter().map(|x| fmt_f64(*x)));
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// Writes `path` and, for `n > 3`, `path` with extension `csv` carrying
    /// every coordinate. Returns the files written.
    pub fn save(&self, path: &Path) -> Result<Vec<std::path::PathBuf>> {
        let mut written = vec![path.to_path_buf()];
        self.write_obj(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        if self.dimension > 3 {
            let side = path.with_extension("csv");
            self.write_coordinates_csv(std::io::BufWriter::new(std::fs::File::create(&side)?))?;
            written.push(side);
        }
        Ok(written)
    }
}

/// Exported mesh of a disc-type surface.
pub fn disc_mesh(h: &HarmonicDisc) -> PolarMesh {
    PolarMesh::sample(|u, v| h.sample(u, v), h.dimension(), 0.0, 1.0, DEFAULT_RINGS, DEFAULT_SPOKES)
}

/// Exported mesh of an annulus-type surface over `rho <= |z| <= 1`.
pub fn annulus_mesh(map: &AnnulusMap) -> PolarMesh {
    PolarMesh::sample(|u, v| map.sample(u, v), map.dimension, map.rho, 1.0, DEFAULT_RINGS, DEFAULT_SPOKES)
}

/// The `v` lines of an OBJ file.
pub fn read_obj_vertices(text: &str) -> Result<Vec<[f64; 3]>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| l.starts_with("v "))
        .map(|(i, l)| {
            let nums: Vec<f64> = l[2..]
                .split_whitespace()
                .map(str::parse)
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| PlateauError::Parse(format!("OBJ line {}: {e}", i + 1)))?;
            match nums[..] {
                [x, y, z] => Ok([x, y, z]),
                _ => Err(PlateauError::Parse(format!("OBJ line {}: expected three coordinates", i + 1))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disc_mesh_counts() {
        let m = PolarMesh::sample(|u, v| vec![u, v], 2, 0.0, 1.0, 4, 8);
        assert_eq!(m.vertex_count(), 1 + 4 * 8);
        assert_eq!(m.triangles.len(), 8 + 3 * 8 * 2);
        let mut buf = Vec::new();
        m.write_obj(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().filter(|l| l.starts_with("v ")).count(), 33);
        assert!(text.lines().any(|l| l == "f 1 2 3"));
        let back = read_obj_vertices(&text).unwrap();
        assert_eq!(back.len(), 33);
        assert_eq!(back[1], [m.vertex(1)[0], m.vertex(1)[1], 0.0]);
        assert!(read_obj_vertices("v 1 2\n").is_err());
    }

    #[test]
    fn annulus_mesh_counts() {
        let m = PolarMesh::sample(|u, v| vec![u, v, 0.0, 1.0], 4, 0.5, 1.0, 3, 6);
        assert_eq!(m.vertex_count(), 4 * 6);
        assert_eq!(m.triangles.len(), 3 * 6 * 2);
        let mut buf = Vec::new();
        m.write_coordinates_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("u,v,x1,x2,x3,x4\n"));
    }
}
