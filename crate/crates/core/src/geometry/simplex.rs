use serde::{Deserialize, Serialize};

use super::linalg::{dot, edge_det, hyperplane_normal};
use super::Halfspace;
use crate::error::{Error, Result};

/// Relative determinant threshold below which a simplex counts as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Convex hull of `n + 1` points in ℝⁿ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simplex {
    pub vertices: Vec<Vec<f64>>,
}

impl Simplex {
    pub fn new(vertices: Vec<Vec<f64>>) -> Result<Self> {
        let n = vertices.first().map_or(0, Vec::len);
        if n == 0 || vertices.len() != n + 1 || vertices.iter().any(|v| v.len() != n) {
            return Err(Error::Invalid(format!(
                "simplex needs n+1 points in ℝⁿ, got {} points",
                vertices.len()
            )));
        }
        Ok(Self { vertices })
    }

    /// Standard simplex `conv{0, e_1, …, e_n}`.
    pub fn standard(n: usize) -> Self {
        let mut vertices = vec![vec![0.0; n]];
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            vertices.push(e);
        }
        Self { vertices }
    }

    pub fn dim(&self) -> usize {
        self.vertices[0].len()
    }

    pub fn det(&self) -> f64 {
        edge_det(&self.vertices)
    }

    pub fn volume(&self) -> f64 {
        let n = self.dim();
        self.det().abs() / (1..=n).map(|k| k as f64).product::<f64>()
    }

    fn max_edge(&self) -> f64 {
        let mut m = 0.0f64;
        for (i, a) in self.vertices.iter().enumerate() {
            for b in &self.vertices[i + 1..] {
                let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                m = m.max(d.sqrt());
            }
        }
        m
    }

    /// `|det| ≤ tol · (longest edge)ⁿ`.
    pub fn is_degenerate(&self) -> bool {
        let e = self.max_edge();
        e == 0.0 || self.det().abs() <= DEGENERACY_TOL * e.powi(self.dim() as i32)
    }

    pub fn centroid(&self) -> Vec<f64> {
        let k = self.vertices.len() as f64;
        (0..self.dim())
            .map(|j| self.vertices.iter().map(|v| v[j]).sum::<f64>() / k)
            .collect()
    }

    /// Facet halfspaces, oriented so the simplex lies on the `≤` side.
    pub fn halfspaces(&self) -> Result<Vec<Halfspace>> {
        if self.is_degenerate() {
            return Err(Error::DegenerateSimplex(self.det()));
        }
        let c = self.centroid();
        let mut out = Vec::with_capacity(self.vertices.len());
        for skip in 0..self.vertices.len() {
            let pts: Vec<&[f64]> = self
                .vertices
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != skip)
                .map(|(_, v)| v.as_slice())
                .collect();
            let normal = hyperplane_normal(&pts, 1e-14).ok_or(Error::DegenerateSimplex(0.0))?;
            let offset = dot(&normal, pts[0]);
            let h = Halfspace { normal, offset };
            out.push(if h.eval(&c) > 0.0 { h.flipped() } else { h });
        }
        Ok(out)
    }

    /// Point from barycentric coordinates.
    pub fn point(&self, lambda: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.dim()];
        for (l, v) in lambda.iter().zip(&self.vertices) {
            for (xi, vi) in x.iter_mut().zip(v) {
                *xi += l * vi;
            }
        }
        x
    }

    pub fn bounding_box(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.dim();
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for v in &self.vertices {
            for j in 0..n {
                lo[j] = lo[j].min(v[j]);
                hi[j] = hi[j].max(v[j]);
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standard_simplex_volume() {
        assert!((Simplex::standard(2).volume() - 0.5).abs() < 1e-15);
        assert!((Simplex::standard(3).volume() - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn facets_contain_simplex() {
        let s = Simplex::new(vec![vec![0.0, 0.0], vec![2.0, 0.1], vec![0.3, 1.0]]).unwrap();
        let hs = s.halfspaces().unwrap();
        assert_eq!(hs.len(), 3);
        for v in &s.vertices {
            assert!(hs.iter().all(|h| h.eval(v) <= 1e-12));
        }
        let c = s.centroid();
        assert!(hs.iter().all(|h| h.eval(&c) < 0.0));
    }

    #[test]
    fn flat_simplex_is_degenerate() {
        let s = Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(s.is_degenerate());
        assert!(s.halfspaces().is_err());
    }
}
