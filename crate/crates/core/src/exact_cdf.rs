//! Exact cdf of a piecewise-linear network output under a piecewise-polynomial
//! input density.
//!
//! Every activation cell is intersected with every pdf simplex and
//! triangulated once. For a query `y` each resulting simplex contributes
//! nothing (its output is above `y` everywhere), its full integral (below `y`
//! everywhere), or the integral over its intersection with the halfspaces
//! `{V x + c ≤ y}`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::linalg::dot;
use crate::geometry::{
    triangulate_convex, ConvexPolytope, Polynomial, Simplex, SimplexIntegrator, Term,
};
use crate::model::AxisBox;
use crate::regions::{for_each_cell, ActivationCell, PlNetwork};

/// One simplex of a piecewise-polynomial density.
#[derive(Clone, Debug, PartialEq)]
pub struct PdfPiece {
    pub simplex: Simplex,
    pub poly: Polynomial,
}

/// Density that is polynomial on each simplex of a partition of its support box.
#[derive(Clone, Debug, PartialEq)]
pub struct PiecewisePolynomialPdf {
    pub support: AxisBox,
    pub pieces: Vec<PdfPiece>,
}

/// Kuhn triangulation of a regular grid with `k` cells per axis: every grid
/// cell is split into `n!` simplices along the permutations of the axes.
pub fn kuhn_simplices(domain: &AxisBox, k: usize) -> Vec<Simplex> {
    let n = domain.dim();
    let mut perms: Vec<Vec<usize>> = vec![vec![]];
    for _ in 0..n {
        perms = perms
            .into_iter()
            .flat_map(|p| {
                let free: Vec<usize> = (0..n).filter(|i| !p.contains(i)).collect();
                free.into_iter().map(move |i| {
                    let mut q = p.clone();
                    q.push(i);
                    q
                })
            })
            .collect();
    }
    let step: Vec<f64> = (0..n).map(|i| (domain.upper[i] - domain.lower[i]) / k as f64).collect();
    let coord = |i: usize, g: usize| {
        if g == k {
            domain.upper[i]
        } else {
            domain.lower[i] + g as f64 * step[i]
        }
    };
    let mut out = Vec::with_capacity(k.pow(n as u32) * perms.len());
    let mut cell = vec![0usize; n];
    loop {
        for p in &perms {
            let mut g = cell.clone();
            let mut verts = Vec::with_capacity(n + 1);
            verts.push((0..n).map(|i| coord(i, g[i])).collect::<Vec<f64>>());
            for &axis in p {
                g[axis] += 1;
                verts.push((0..n).map(|i| coord(i, g[i])).collect());
            }
            out.push(Simplex { vertices: verts });
        }
        let mut i = 0;
        loop {
            if i == n {
                return out;
            }
            cell[i] += 1;
            if cell[i] < k {
                break;
            }
            cell[i] = 0;
            i += 1;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawPiece {
    vertices: Vec<Vec<f64>>,
    terms: Vec<Term>,
}

impl PiecewisePolynomialPdf {
    pub fn new(support: AxisBox, pieces: Vec<PdfPiece>) -> Result<Self> {
        let n = support.dim();
        for p in &pieces {
            if p.simplex.dim() != n || p.poly.dim() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: p.simplex.dim().max(p.poly.dim()),
                });
            }
            for v in &p.simplex.vertices {
                if !support.contains(v) {
                    return Err(Error::Invalid(format!("pdf simplex vertex {v:?} outside support")));
                }
            }
        }
        let covered: f64 = pieces.iter().map(|p| p.simplex.volume()).sum();
        let vol = support.volume();
        if (covered - vol).abs() > 1e-6 * vol {
            return Err(Error::Invalid(format!(
                "pdf simplices cover volume {covered}, support has {vol}"
            )));
        }
        Ok(Self { support, pieces })
    }

    /// The same polynomial on every simplex of a Kuhn split of the support.
    pub fn global(support: AxisBox, poly: Polynomial) -> Result<Self> {
        let pieces = kuhn_simplices(&support, 1)
            .into_iter()
            .map(|simplex| PdfPiece {
                simplex,
                poly: poly.clone(),
            })
            .collect();
        Self::new(support, pieces)
    }

    pub fn dim(&self) -> usize {
        self.support.dim()
    }

    pub fn total_mass(&self) -> f64 {
        self.pieces
            .iter()
            .map(|p| SimplexIntegrator::new(&p.poly).integrate(&p.simplex.vertices))
            .sum()
    }

    /// Density at `x` (first simplex containing it; 0 outside the support).
    pub fn density(&self, x: &[f64]) -> f64 {
        for p in &self.pieces {
            if simplex_contains(&p.simplex, x) {
                return p.poly.eval(x);
            }
        }
        0.0
    }

    /// Splits every simplex at the midpoint of its longest edge.
    pub fn bisected(&self) -> Self {
        let pieces = self
            .pieces
            .iter()
            .flat_map(|p| {
                let (a, b) = bisect_simplex(&p.simplex);
                [
                    PdfPiece {
                        simplex: a,
                        poly: p.poly.clone(),
                    },
                    PdfPiece {
                        simplex: b,
                        poly: p.poly.clone(),
                    },
                ]
            })
            .collect();
        Self {
            support: self.support.clone(),
            pieces,
        }
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let pieces: Vec<RawPiece> = self
            .pieces
            .iter()
            .map(|p| RawPiece {
                vertices: p.simplex.vertices.clone(),
                terms: p.poly.to_terms(),
            })
            .collect();
        serde_json::json!({ "pieces": pieces })
    }

    pub fn from_json_value(support: AxisBox, v: &serde_json::Value) -> Result<Self> {
        let raw: Vec<RawPiece> = serde_json::from_value(v["pieces"].clone())
            .map_err(|e| Error::Parse(format!("explicit pdf pieces: {e}")))?;
        let n = support.dim();
        let pieces = raw
            .into_iter()
            .map(|r| {
                Ok(PdfPiece {
                    simplex: Simplex::new(r.vertices)?,
                    poly: Polynomial::from_terms(
                        n,
                        r.terms.into_iter().map(|t| (t.exponents, t.coeff)),
                    ),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for p in &pieces {
            if p.poly.terms().any(|(e, _)| e.len() != n) {
                return Err(Error::Parse("exponent vector of wrong length".into()));
            }
        }
        Self::new(support, pieces)
    }
}

pub(crate) fn simplex_contains(s: &Simplex, x: &[f64]) -> bool {
    match s.halfspaces() {
        Ok(hs) => hs.iter().all(|h| h.eval(x) <= 1e-12),
        Err(_) => false,
    }
}

/// Halves of a simplex split at the midpoint of its longest edge.
pub fn bisect_simplex(s: &Simplex) -> (Simplex, Simplex) {
    let k = s.vertices.len();
    let mut best = (0, 1, -1.0);
    for i in 0..k {
        for j in i + 1..k {
            let d: f64 = s.vertices[i]
                .iter()
                .zip(&s.vertices[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d > best.2 {
                best = (i, j, d);
            }
        }
    }
    let (i, j, _) = best;
    let mid: Vec<f64> = s.vertices[i]
        .iter()
        .zip(&s.vertices[j])
        .map(|(a, b)| 0.5 * (a + b))
        .collect();
    let mut a = s.vertices.clone();
    a[j] = mid.clone();
    let mut b = s.vertices.clone();
    b[i] = mid;
    (Simplex { vertices: a }, Simplex { vertices: b })
}

#[derive(Clone, Debug)]
enum Density {
    Constant(f64),
    Poly(Box<SimplexIntegrator>),
}

impl Density {
    fn from_poly(p: &Polynomial) -> Self {
        match p.as_constant() {
            Some(c) => Density::Constant(c),
            None => Density::Poly(Box::new(SimplexIntegrator::new(p))),
        }
    }

    fn integrate(&self, verts: &[Vec<f64>]) -> f64 {
        match self {
            Density::Constant(c) => {
                let n = verts[0].len();
                let nf: f64 = (1..=n).map(|k| k as f64).product();
                c * crate::geometry::linalg::edge_det(verts).abs() / nf
            }
            Density::Poly(p) => p.integrate(verts),
        }
    }
}

/// Output selection and per-simplex densities for one [`PieceSet`].
#[derive(Clone, Debug)]
pub struct PieceView {
    pub outputs: Vec<usize>,
    pub densities: Vec<Polynomial>,
}

#[derive(Clone, Copy, Debug)]
struct Record {
    density: u32,
    map: u32,
    full: f64,
}

/// Triangulated integration pieces: each simplex carries a density and the
/// affine output map of the cell it came from.
#[derive(Clone, Debug)]
pub struct PieceSet {
    dim: usize,
    out_dim: usize,
    densities: Vec<Density>,
    /// Per cell: `out_dim` rows of `[a_1, …, a_n, c]`.
    maps: Vec<f64>,
    /// Flattened simplex vertices, `(n+1)·n` values per record.
    coords: Vec<f64>,
    /// `[lo_1, hi_1, …]` output ranges per record.
    ranges: Vec<f64>,
    records: Vec<Record>,
    cells: usize,
}

/// Neumaier-compensated running sum.
#[derive(Default, Clone, Copy)]
struct Compensated {
    sum: f64,
    c: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.c += (self.sum - t) + v;
        } else {
            self.c += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.c
    }
}

impl PieceSet {
    fn empty(dim: usize, out_dim: usize) -> Self {
        Self {
            dim,
            out_dim,
            densities: Vec::new(),
            maps: Vec::new(),
            coords: Vec::new(),
            ranges: Vec::new(),
            records: Vec::new(),
            cells: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn output_dim(&self) -> usize {
        self.out_dim
    }

    /// Number of triangulated simplices.
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of (cell ∩ pdf simplex) pieces.
    pub fn num_cells(&self) -> usize {
        self.cells
    }

    fn push_cell(&mut self, poly: &ConvexPolytope, map_rows: &[Vec<f64>], density: u32) {
        let simplices = triangulate_convex(poly.vertices());
        self.push_simplices(&simplices, map_rows, density);
    }

    fn push_simplices(&mut self, simplices: &[Vec<Vec<f64>>], map_rows: &[Vec<f64>], density: u32) {
        if simplices.is_empty() {
            return;
        }
        if let Density::Constant(c) = self.densities[density as usize] {
            if c == 0.0 {
                return;
            }
        }
        let map_idx = (self.maps.len() / (self.out_dim * (self.dim + 1))) as u32;
        for r in map_rows {
            self.maps.extend_from_slice(r);
        }
        self.cells += 1;
        let n = self.dim;
        for s in simplices {
            let full = self.densities[density as usize].integrate(s);
            for row in map_rows {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for v in s {
                    let z = dot(&row[..n], v) + row[n];
                    lo = lo.min(z);
                    hi = hi.max(z);
                }
                self.ranges.push(lo);
                self.ranges.push(hi);
            }
            for v in s {
                self.coords.extend_from_slice(v);
            }
            self.records.push(Record {
                density,
                map: map_idx,
                full,
            });
        }
    }

    /// Intersects precomputed activation cells with the pdf simplices.
    pub fn from_cells(cells: &[ActivationCell], pdf: &PiecewisePolynomialPdf) -> Result<Self> {
        let n = pdf.dim();
        let out_dim = cells.first().map_or(1, |c| c.map.output_dim());
        let mut set = Self::empty(n, out_dim);
        for c in cells {
            if c.polytope.dim() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: c.polytope.dim(),
                });
            }
        }
        for piece in &pdf.pieces {
            set.densities.push(Density::from_poly(&piece.poly));
            let density = (set.densities.len() - 1) as u32;
            let hs = piece.simplex.halfspaces()?;
            let (slo, shi) = piece.simplex.bounding_box();
            for cell in cells {
                let overlaps = cell.polytope.vertices().iter().fold(
                    (vec![f64::INFINITY; n], vec![f64::NEG_INFINITY; n]),
                    |(mut lo, mut hi), v| {
                        for j in 0..n {
                            lo[j] = lo[j].min(v[j]);
                            hi[j] = hi[j].max(v[j]);
                        }
                        (lo, hi)
                    },
                );
                if (0..n).any(|j| overlaps.0[j] > shi[j] || overlaps.1[j] < slo[j]) {
                    continue;
                }
                let mut clipped = Some(cell.polytope.clone());
                for h in &hs {
                    clipped = clipped.and_then(|p| p.clip(h));
                }
                if let Some(p) = clipped {
                    let rows = map_rows(&cell.map.matrix, &cell.map.offset);
                    set.push_cell(&p, &rows, density);
                }
            }
        }
        Ok(set)
    }

    /// Enumerates the cells of `net` separately inside every pdf simplex.
    pub fn from_network(net: &PlNetwork, pdf: &PiecewisePolynomialPdf, budget: usize) -> Result<Self> {
        let simplices: Vec<Simplex> = pdf.pieces.iter().map(|p| p.simplex.clone()).collect();
        let view = PieceView {
            outputs: (0..net.output_dim()).collect(),
            densities: pdf.pieces.iter().map(|p| p.poly.clone()).collect(),
        };
        let mut sets = Self::from_network_views(net, &simplices, &[view], budget)?;
        Ok(sets.remove(0))
    }

    /// One enumeration of `net` inside every simplex, shared by several
    /// views that differ in output selection and density.
    pub fn from_network_views(
        net: &PlNetwork,
        simplices: &[Simplex],
        views: &[PieceView],
        budget: usize,
    ) -> Result<Vec<Self>> {
        let n = net.input_dim();
        for s in simplices {
            if s.dim() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: s.dim(),
                });
            }
        }
        let mut sets: Vec<Self> = views
            .iter()
            .map(|v| {
                if v.densities.len() != simplices.len() {
                    return Err(Error::Invalid("one density per simplex is required".into()));
                }
                if let Some(&k) = v.outputs.iter().find(|&&k| k >= net.output_dim()) {
                    return Err(Error::Dimension {
                        expected: net.output_dim(),
                        got: k + 1,
                    });
                }
                Ok(Self::empty(n, v.outputs.len()))
            })
            .collect::<Result<_>>()?;
        let mut count = 0usize;
        for (i, simplex) in simplices.iter().enumerate() {
            if simplex.is_degenerate() {
                continue;
            }
            let mut live = Vec::new();
            for (set, view) in sets.iter_mut().zip(views) {
                let d = Density::from_poly(&view.densities[i]);
                let zero = matches!(d, Density::Constant(c) if c == 0.0);
                set.densities.push(d);
                live.push(!zero);
            }
            if !live.iter().any(|l| *l) {
                continue;
            }
            let region = ConvexPolytope::from_simplex(simplex)?;
            for_each_cell(net, region, |cell| {
                count += 1;
                if count > budget {
                    return Err(Error::Budget {
                        what: "integration pieces".into(),
                        limit: budget,
                    });
                }
                let rows = map_rows(&cell.map.matrix, &cell.map.offset);
                let tri = triangulate_convex(cell.polytope.vertices());
                for ((set, view), on) in sets.iter_mut().zip(views).zip(&live) {
                    if *on {
                        let selected: Vec<Vec<f64>> = view.outputs.iter().map(|&k| rows[k].clone()).collect();
                        let density = (set.densities.len() - 1) as u32;
                        set.push_simplices(&tri, &selected, density);
                    }
                }
                Ok(())
            })?;
        }
        Ok(sets)
    }

    fn simplex(&self, r: usize) -> Vec<Vec<f64>> {
        let n = self.dim;
        let base = r * (n + 1) * n;
        (0..=n)
            .map(|k| self.coords[base + k * n..base + (k + 1) * n].to_vec())
            .collect()
    }

    fn contribution(&self, r: usize, y: &[f64]) -> f64 {
        let rec = self.records[r];
        let rg = &self.ranges[r * 2 * self.out_dim..(r + 1) * 2 * self.out_dim];
        let mut cut = Vec::new();
        for t in 0..self.out_dim {
            if rg[2 * t] > y[t] {
                return 0.0;
            }
            if rg[2 * t + 1] > y[t] {
                cut.push(t);
            }
        }
        if cut.is_empty() {
            return rec.full;
        }
        let n = self.dim;
        let stride = self.out_dim * (n + 1);
        let maps = &self.maps[rec.map as usize * stride..(rec.map as usize + 1) * stride];
        let mut pieces = vec![self.simplex(r)];
        for t in cut {
            let row = &maps[t * (n + 1)..(t + 1) * (n + 1)];
            let offset = y[t] - row[n];
            pieces = pieces
                .into_iter()
                .flat_map(|s| clip_simplex(&s, &row[..n], offset))
                .collect();
            if pieces.is_empty() {
                return 0.0;
            }
        }
        let density = &self.densities[rec.density as usize];
        pieces.iter().map(|s| density.integrate(s)).sum()
    }

    /// Unclamped `Σ ∫ φ` over `{x : NN(x) ≤ y}`.
    pub fn cdf_raw(&self, y: &[f64]) -> Result<f64> {
        if y.len() != self.out_dim {
            return Err(Error::Dimension {
                expected: self.out_dim,
                got: y.len(),
            });
        }
        let mut acc = Compensated::default();
        for r in 0..self.records.len() {
            let v = self.contribution(r, y);
            if v != 0.0 {
                acc.add(v);
            }
        }
        Ok(acc.value())
    }

    pub fn cdf(&self, y: &[f64]) -> Result<f64> {
        Ok(self.cdf_raw(y)?.clamp(0.0, 1.0))
    }

    pub fn cdf_curve_raw(&self, grid: &[Vec<f64>]) -> Result<Vec<f64>> {
        grid.par_iter().map(|y| self.cdf_raw(y)).collect()
    }

    pub fn cdf_curve(&self, grid: &[Vec<f64>]) -> Result<Vec<f64>> {
        grid.par_iter().map(|y| self.cdf(y)).collect()
    }

    pub fn total_mass(&self) -> f64 {
        let mut acc = Compensated::default();
        for r in &self.records {
            acc.add(r.full);
        }
        acc.value()
    }

    /// Total measure of the integration region.
    pub fn volume(&self) -> f64 {
        let nf: f64 = (1..=self.dim).map(|k| k as f64).product();
        (0..self.records.len())
            .map(|r| crate::geometry::linalg::edge_det(&self.simplex(r)).abs() / nf)
            .sum()
    }

    /// Hull of all output values over the integration region.
    pub fn output_range(&self) -> Vec<(f64, f64)> {
        (0..self.out_dim)
            .map(|t| {
                self.ranges
                    .chunks(2 * self.out_dim)
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), rg| {
                        (lo.min(rg[2 * t]), hi.max(rg[2 * t + 1]))
                    })
            })
            .collect()
    }
}

fn map_rows(matrix: &[Vec<f64>], offset: &[f64]) -> Vec<Vec<f64>> {
    matrix
        .iter()
        .zip(offset)
        .map(|(row, c)| {
            let mut r = row.clone();
            r.push(*c);
            r
        })
        .collect()
}

/// Part of a simplex with `a·x ≤ offset`, triangulated. Every vertex pair of
/// a simplex is an edge, so the cut polytope's vertices are the kept vertices
/// plus one crossing point per (kept, dropped) pair.
fn clip_simplex(s: &[Vec<f64>], a: &[f64], offset: f64) -> Vec<Vec<Vec<f64>>> {
    let vals: Vec<f64> = s.iter().map(|v| dot(a, v) - offset).collect();
    let inside: Vec<usize> = (0..s.len()).filter(|&i| vals[i] <= 0.0).collect();
    if inside.len() == s.len() {
        return vec![s.to_vec()];
    }
    if inside.is_empty() {
        return Vec::new();
    }
    let mut pts: Vec<Vec<f64>> = inside.iter().map(|&i| s[i].clone()).collect();
    for &i in &inside {
        for j in 0..s.len() {
            if vals[j] > 0.0 {
                let t = vals[i] / (vals[i] - vals[j]);
                pts.push(s[i].iter().zip(&s[j]).map(|(p, q)| p + t * (q - p)).collect());
            }
        }
    }
    triangulate_convex(&pts)
}

/// `F(y) = P(NN(X) ≤ y)` for cells covering the pdf's support.
pub fn exact_cdf_at(
    cells: &[ActivationCell],
    pdf: &PiecewisePolynomialPdf,
    y: &[f64],
) -> Result<f64> {
    PieceSet::from_cells(cells, pdf)?.cdf(y)
}

/// `(y, F(y))` over a grid, in grid order.
pub fn exact_cdf_curve(
    cells: &[ActivationCell],
    pdf: &PiecewisePolynomialPdf,
    grid: &[Vec<f64>],
) -> Result<Vec<(Vec<f64>, f64)>> {
    let set = PieceSet::from_cells(cells, pdf)?;
    let values = set.cdf_curve(grid)?;
    Ok(grid.iter().cloned().zip(values).collect())
}
