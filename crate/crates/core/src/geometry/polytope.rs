//! Bounded convex polytopes kept in both vertex and halfspace form.
//!
//! Each vertex records the sorted indices of the halfspaces that are tight at
//! it. Splitting by a hyperplane uses the combinatorial adjacency test: two
//! vertices span an edge iff they share at least `n − 1` tight constraints
//! and no third vertex is tight on all of the shared ones.

use super::linalg::{dot, norm};
use super::triangulate::triangulate_convex;
use super::{HPolytope, Halfspace, Simplex};
use crate::error::Result;
use crate::model::AxisBox;

/// Distance below which a point counts as lying on a cutting hyperplane, and
/// below which a sliver cut off by a hyperplane is ignored.
pub const SLIVER_TOL: f64 = 1e-11;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvexPolytope {
    dim: usize,
    halfspaces: Vec<Halfspace>,
    vertices: Vec<Vec<f64>>,
    tight: Vec<Vec<u32>>,
}

/// Outcome of cutting a polytope with `normal·x = offset`.
#[derive(Clone, Debug)]
pub struct SplitResult {
    /// Part with `normal·x ≤ offset`.
    pub below: Option<ConvexPolytope>,
    /// Part with `normal·x ≥ offset`.
    pub above: Option<ConvexPolytope>,
}

fn intersect_sorted(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                out.push(a[i]);
                i += 1;
                j += 1;
            }
        }
    }
}

fn is_subset_sorted(small: &[u32], big: &[u32]) -> bool {
    let mut j = 0;
    for s in small {
        while j < big.len() && big[j] < *s {
            j += 1;
        }
        if j == big.len() || big[j] != *s {
            return false;
        }
        j += 1;
    }
    true
}

impl ConvexPolytope {
    pub fn from_box(b: &AxisBox) -> Self {
        let n = b.dim();
        let halfspaces = HPolytope::from_box(b).halfspaces;
        let mut vertices = Vec::with_capacity(1 << n);
        let mut tight = Vec::with_capacity(1 << n);
        for mask in 0..(1usize << n) {
            let mut v = Vec::with_capacity(n);
            let mut t = Vec::with_capacity(n);
            for i in 0..n {
                if mask >> i & 1 == 1 {
                    v.push(b.upper[i]);
                    t.push((2 * i + 1) as u32);
                } else {
                    v.push(b.lower[i]);
                    t.push((2 * i) as u32);
                }
            }
            vertices.push(v);
            tight.push(t);
        }
        Self {
            dim: n,
            halfspaces,
            vertices,
            tight,
        }
    }

    /// Facet `i` of the result is opposite vertex `i`.
    pub fn from_simplex(s: &Simplex) -> Result<Self> {
        let halfspaces = s.halfspaces()?;
        let k = s.vertices.len();
        let tight = (0..k)
            .map(|v| (0..k as u32).filter(|&f| f as usize != v).collect())
            .collect();
        Ok(Self {
            dim: s.dim(),
            halfspaces,
            vertices: s.vertices.clone(),
            tight,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Vec<f64>] {
        &self.vertices
    }

    pub fn halfspaces(&self) -> &[Halfspace] {
        &self.halfspaces
    }

    /// Halfspaces that are tight on at least `n` vertices.
    pub fn facet_halfspaces(&self) -> Vec<Halfspace> {
        let mut count = vec![0usize; self.halfspaces.len()];
        for t in &self.tight {
            for &i in t {
                count[i as usize] += 1;
            }
        }
        self.halfspaces
            .iter()
            .zip(count)
            .filter(|(_, c)| *c >= self.dim)
            .map(|(h, _)| h.clone())
            .collect()
    }

    pub fn to_hpolytope(&self) -> HPolytope {
        HPolytope::new(self.halfspaces.clone())
    }

    pub fn centroid(&self) -> Vec<f64> {
        let k = self.vertices.len() as f64;
        (0..self.dim)
            .map(|j| self.vertices.iter().map(|v| v[j]).sum::<f64>() / k)
            .collect()
    }

    /// Range of `a·x + c` over the polytope.
    pub fn affine_range(&self, a: &[f64], c: f64) -> (f64, f64) {
        self.vertices.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
            let z = dot(a, v) + c;
            (lo.min(z), hi.max(z))
        })
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        self.halfspaces.iter().all(|h| h.contains(x, tol))
    }

    pub fn triangulate(&self) -> Vec<Vec<Vec<f64>>> {
        triangulate_convex(&self.vertices)
    }

    pub fn volume(&self) -> f64 {
        let nf: f64 = (1..=self.dim).map(|k| k as f64).product();
        self.triangulate()
            .iter()
            .map(|s| super::linalg::edge_det(s).abs() / nf)
            .sum()
    }

    /// Cuts with the hyperplane `normal·x = offset`. A side whose vertices all
    /// lie within [`SLIVER_TOL`] of the hyperplane is reported as `None`.
    pub fn split(&self, normal: &[f64], offset: f64) -> SplitResult {
        let nn = norm(normal);
        if nn == 0.0 {
            let keep_below = offset >= 0.0;
            return SplitResult {
                below: keep_below.then(|| self.clone()),
                above: (!keep_below).then(|| self.clone()),
            };
        }
        let tol = SLIVER_TOL * nn;
        let s: Vec<f64> = self.vertices.iter().map(|v| dot(normal, v) - offset).collect();
        let max = s.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = s.iter().cloned().fold(f64::INFINITY, f64::min);
        if max <= tol {
            return SplitResult {
                below: Some(self.clone()),
                above: None,
            };
        }
        if min >= -tol {
            return SplitResult {
                below: None,
                above: Some(self.clone()),
            };
        }

        let k = self.halfspaces.len() as u32;
        let mut below_v = Vec::new();
        let mut below_t = Vec::new();
        let mut above_v = Vec::new();
        let mut above_t = Vec::new();
        for (i, v) in self.vertices.iter().enumerate() {
            if s[i].abs() <= tol {
                let mut t = self.tight[i].clone();
                t.push(k);
                below_v.push(v.clone());
                below_t.push(t.clone());
                above_v.push(v.clone());
                above_t.push(t);
            } else if s[i] < 0.0 {
                below_v.push(v.clone());
                below_t.push(self.tight[i].clone());
            } else {
                above_v.push(v.clone());
                above_t.push(self.tight[i].clone());
            }
        }

        let need = self.dim.saturating_sub(1);
        let mut common = Vec::new();
        for u in 0..self.vertices.len() {
            if s[u] >= -tol {
                continue;
            }
            for w in 0..self.vertices.len() {
                if s[w] <= tol {
                    continue;
                }
                intersect_sorted(&self.tight[u], &self.tight[w], &mut common);
                if common.len() < need {
                    continue;
                }
                let blocked = (0..self.vertices.len())
                    .any(|z| z != u && z != w && is_subset_sorted(&common, &self.tight[z]));
                if blocked {
                    continue;
                }
                let t = s[u] / (s[u] - s[w]);
                let p: Vec<f64> = self.vertices[u]
                    .iter()
                    .zip(&self.vertices[w])
                    .map(|(a, b)| a + t * (b - a))
                    .collect();
                let mut tt = common.clone();
                tt.push(k);
                below_v.push(p.clone());
                below_t.push(tt.clone());
                above_v.push(p);
                above_t.push(tt);
            }
        }

        let h = Halfspace {
            normal: normal.to_vec(),
            offset,
        };
        let mut below_h = self.halfspaces.clone();
        below_h.push(h.clone());
        let mut above_h = self.halfspaces.clone();
        above_h.push(h.flipped());
        SplitResult {
            below: Some(Self {
                dim: self.dim,
                halfspaces: below_h,
                vertices: below_v,
                tight: below_t,
            }),
            above: Some(Self {
                dim: self.dim,
                halfspaces: above_h,
                vertices: above_v,
                tight: above_t,
            }),
        }
    }

    /// Intersection with `h`; `None` when the result has no volume.
    pub fn clip(&self, h: &Halfspace) -> Option<Self> {
        self.split(&h.normal, h.offset).below
    }
}
