//! Piecewise-constant upper and lower bounds of an input density on a
//! simplicial partition of its support box.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact_cdf::{bisect_simplex, kuhn_simplices};
use crate::geometry::Simplex;
use crate::model::{AxisBox, InputDistribution};

pub const DEFAULT_VERTEX_BUDGET: usize = 50_000;

/// Simplices covering a box, with the number of distinct vertices.
#[derive(Clone, Debug)]
pub struct SimplicialPartition {
    pub domain: AxisBox,
    pub simplices: Vec<Simplex>,
    pub vertex_count: usize,
}

fn vertex_key(v: &[f64]) -> Vec<u64> {
    v.iter().map(|x| (x + 0.0).to_bits()).collect()
}

fn distinct_vertices(simplices: &[Simplex]) -> HashSet<Vec<u64>> {
    simplices
        .iter()
        .flat_map(|s| s.vertices.iter().map(|v| vertex_key(v)))
        .collect()
}

/// Largest `k` with `(k+1)^n ≤ budget`.
pub fn max_cells_per_axis(dim: usize, budget: usize) -> usize {
    let mut k = 0usize;
    while (k as u128 + 2).checked_pow(dim as u32).is_some_and(|v| v <= budget as u128) {
        k += 1;
    }
    k
}

/// Kuhn triangulation of a regular `k^n` grid.
pub fn partition_box(domain: &AxisBox, cells_per_axis: usize, budget: usize) -> Result<SimplicialPartition> {
    if cells_per_axis == 0 {
        return Err(Error::Invalid("cells per axis must be at least 1".into()));
    }
    let n = domain.dim() as u32;
    let vertices = (cells_per_axis as u128 + 1).checked_pow(n).unwrap_or(u128::MAX);
    if vertices > budget as u128 {
        return Err(Error::Budget {
            what: format!("{vertices} partition vertices"),
            limit: budget,
        });
    }
    Ok(SimplicialPartition {
        domain: domain.clone(),
        simplices: kuhn_simplices(domain, cells_per_axis),
        vertex_count: vertices as usize,
    })
}

impl SimplicialPartition {
    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn volume(&self) -> f64 {
        self.simplices.iter().map(Simplex::volume).sum()
    }
}

/// Constant bounds `lo_i ≤ φ ≤ hi_i` on simplex `i` of a partition.
#[derive(Clone, Debug)]
pub struct PdfBoundsPair {
    pub partition: SimplicialPartition,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl PdfBoundsPair {
    pub fn lower_mass(&self) -> f64 {
        self.partition
            .simplices
            .iter()
            .zip(&self.lo)
            .map(|(s, l)| l * s.volume())
            .sum()
    }

    pub fn upper_mass(&self) -> f64 {
        self.partition
            .simplices
            .iter()
            .zip(&self.hi)
            .map(|(s, h)| h * s.volume())
            .sum()
    }

    /// `Σ (hi_i − lo_i)·vol_i`.
    pub fn gap_mass(&self) -> f64 {
        self.partition
            .simplices
            .iter()
            .enumerate()
            .map(|(i, s)| (self.hi[i] - self.lo[i]) * s.volume())
            .sum()
    }

    /// Bounds at `x` (first simplex containing it).
    pub fn bounds_at(&self, x: &[f64]) -> Option<(f64, f64)> {
        self.partition
            .simplices
            .iter()
            .position(|s| crate::exact_cdf::simplex_contains(s, x))
            .map(|i| (self.lo[i], self.hi[i]))
    }
}

fn simplex_bounds(dist: &InputDistribution, s: &Simplex) -> Result<(f64, f64)> {
    let support = dist.support();
    let (lo, hi) = s.bounding_box();
    let lower: Vec<f64> = lo.iter().zip(&support.lower).map(|(a, b)| a.max(*b)).collect();
    let upper: Vec<f64> = hi.iter().zip(&support.upper).map(|(a, b)| a.min(*b)).collect();
    let r = dist.density_range(&AxisBox { lower, upper })?;
    if !(r.lo.is_finite() && r.hi.is_finite()) {
        return Err(Error::UnsupportedDensity("density is unbounded on the support".into()));
    }
    Ok((r.lo.max(0.0), r.hi.max(0.0)))
}

pub fn bound_pdf(dist: &InputDistribution, part: &SimplicialPartition) -> Result<PdfBoundsPair> {
    if part.domain != dist.support() {
        return Err(Error::Invalid("partition box differs from the distribution's support".into()));
    }
    let bounds: Vec<(f64, f64)> = part
        .simplices
        .par_iter()
        .map(|s| simplex_bounds(dist, s))
        .collect::<Result<_>>()?;
    Ok(PdfBoundsPair {
        partition: part.clone(),
        lo: bounds.iter().map(|b| b.0).collect(),
        hi: bounds.iter().map(|b| b.1).collect(),
    })
}

struct Entry {
    gap: f64,
    key: Vec<u64>,
    index: usize,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.gap
            .total_cmp(&other.gap)
            .then_with(|| other.key.cmp(&self.key))
            .then_with(|| other.index.cmp(&self.index))
    }
}

fn entry(pair: &PdfBoundsPair, i: usize) -> Entry {
    let s = &pair.partition.simplices[i];
    Entry {
        gap: (pair.hi[i] - pair.lo[i]) * s.volume(),
        key: s.vertices.iter().flat_map(|v| vertex_key(v)).collect(),
        index: i,
    }
}

/// Bisects the simplices with the largest gap mass first until another split
/// would exceed `budget` vertices. Child bounds are intersected with the
/// parent's, so bounds never loosen at any point.
pub fn refine(dist: &InputDistribution, pair: &PdfBoundsPair, budget: usize) -> Result<PdfBoundsPair> {
    let mut out = pair.clone();
    let mut seen = distinct_vertices(&out.partition.simplices);
    let mut heap: BinaryHeap<Entry> = (0..out.partition.len()).map(|i| entry(&out, i)).collect();
    while let Some(top) = heap.pop() {
        if top.gap <= 0.0 {
            break;
        }
        let i = top.index;
        let (a, b) = bisect_simplex(&out.partition.simplices[i]);
        let mid = a
            .vertices
            .iter()
            .find(|v| !out.partition.simplices[i].vertices.contains(v))
            .expect("bisection adds a midpoint")
            .clone();
        let key = vertex_key(&mid);
        let fresh = !seen.contains(&key);
        if fresh && out.partition.vertex_count + 1 > budget {
            break;
        }
        if fresh {
            seen.insert(key);
            out.partition.vertex_count += 1;
        }
        let (plo, phi) = (out.lo[i], out.hi[i]);
        let (alo, ahi) = simplex_bounds(dist, &a)?;
        let (blo, bhi) = simplex_bounds(dist, &b)?;
        out.partition.simplices[i] = a;
        out.lo[i] = alo.max(plo);
        out.hi[i] = ahi.min(phi);
        out.partition.simplices.push(b);
        out.lo.push(blo.max(plo));
        out.hi.push(bhi.min(phi));
        let j = out.partition.len() - 1;
        heap.push(entry(&out, i));
        heap.push(entry(&out, j));
    }
    Ok(out)
}
