use std::collections::HashMap;

use super::linalg::{dot, hyperplane_normal, norm, sub};
use super::Simplex;
use crate::error::{Error, Result};

/// Result of triangulating a point set.
#[derive(Clone, Debug, Default)]
pub struct Triangulation {
    pub simplices: Vec<Simplex>,
    /// Set when the points span less than the full dimension; the
    /// simplex list is then empty and the hull has zero measure.
    pub degenerate: bool,
}

impl Triangulation {
    pub fn volume(&self) -> f64 {
        self.simplices.iter().map(Simplex::volume).sum()
    }
}

fn scale_of(points: &[Vec<f64>]) -> f64 {
    let n = points[0].len();
    let mut s = 0.0f64;
    for j in 0..n {
        let lo = points.iter().map(|p| p[j]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[j]).fold(f64::NEG_INFINITY, f64::max);
        s = s.max(hi - lo);
    }
    s
}

/// Triangulates the convex hull of `points`.
///
/// Points are inserted in lexicographic order; each point outside the current
/// hull is coned to the boundary facets it sees (a placing triangulation).
/// The lexicographic order makes ties between cospherical or coplanar
/// configurations deterministic.
pub fn triangulate(points: &[Vec<f64>]) -> Result<Triangulation> {
    let Some(first) = points.first() else {
        return Ok(Triangulation {
            simplices: Vec::new(),
            degenerate: true,
        });
    };
    let n = first.len();
    if n == 0 || points.iter().any(|p| p.len() != n) {
        return Err(Error::Invalid("points of inconsistent dimension".into()));
    }
    Ok(match placing(points) {
        Some(simplices) => Triangulation {
            simplices: simplices
                .into_iter()
                .map(|idx| Simplex {
                    vertices: idx.into_iter().map(|i| points[i].clone()).collect(),
                })
                .collect(),
            degenerate: false,
        },
        None => Triangulation {
            simplices: Vec::new(),
            degenerate: true,
        },
    })
}

struct Facet {
    verts: Vec<usize>,
    normal: Vec<f64>,
    offset: f64,
    alive: bool,
}

fn make_facet(points: &[Vec<f64>], verts: Vec<usize>, interior: &[f64]) -> Option<Facet> {
    let refs: Vec<&[f64]> = verts.iter().map(|&i| points[i].as_slice()).collect();
    let mut normal = hyperplane_normal(&refs, 1e-13)?;
    let mut offset = dot(&normal, refs[0]);
    if dot(&normal, interior) > offset {
        normal.iter_mut().for_each(|v| *v = -*v);
        offset = -offset;
    }
    Some(Facet {
        verts,
        normal,
        offset,
        alive: true,
    })
}

/// Index lists of a placing triangulation, or `None` if the points are not
/// full-dimensional.
fn placing(points: &[Vec<f64>]) -> Option<Vec<Vec<usize>>> {
    let n = points[0].len();
    let scale = scale_of(points);
    if scale == 0.0 {
        return None;
    }
    let eps = 1e-12 * scale;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .iter()
            .zip(&points[b])
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });

    let mut chosen = vec![order[0]];
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for &i in &order[1..] {
        if chosen.len() == n + 1 {
            break;
        }
        let mut v = sub(&points[i], &points[order[0]]);
        for b in &basis {
            let proj = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= proj * bi);
        }
        let len = norm(&v);
        if len > 1e-10 * scale {
            basis.push(v.iter().map(|x| x / len).collect());
            chosen.push(i);
        }
    }
    if chosen.len() < n + 1 {
        return None;
    }
    let interior: Vec<f64> = (0..n)
        .map(|j| chosen.iter().map(|&i| points[i][j]).sum::<f64>() / (n + 1) as f64)
        .collect();
    let mut facets = Vec::new();
    for skip in 0..=n {
        let mut verts: Vec<usize> = chosen
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != skip)
            .map(|(_, &i)| i)
            .collect();
        verts.sort_unstable();
        facets.push(make_facet(points, verts, &interior)?);
    }
    let mut simplices = vec![chosen.clone()];

    for &p in &order {
        if chosen.contains(&p) {
            continue;
        }
        let x = &points[p];
        let visible: Vec<usize> = facets
            .iter()
            .enumerate()
            .filter(|(_, f)| f.alive && dot(&f.normal, x) - f.offset > eps)
            .map(|(i, _)| i)
            .collect();
        if visible.is_empty() {
            continue;
        }
        let mut ridges: HashMap<Vec<usize>, usize> = HashMap::new();
        for &fi in &visible {
            let f = &facets[fi];
            let mut s = f.verts.clone();
            s.push(p);
            simplices.push(s);
            for skip in 0..f.verts.len() {
                let r: Vec<usize> = f
                    .verts
                    .iter()
                    .enumerate()
                    .filter(|(k, _)| *k != skip)
                    .map(|(_, &v)| v)
                    .collect();
                *ridges.entry(r).or_insert(0) += 1;
            }
        }
        for &fi in &visible {
            facets[fi].alive = false;
        }
        let mut horizon: Vec<Vec<usize>> = ridges
            .into_iter()
            .filter(|(_, c)| *c == 1)
            .map(|(r, _)| r)
            .collect();
        horizon.sort();
        for mut r in horizon {
            r.push(p);
            r.sort_unstable();
            if let Some(f) = make_facet(points, r, &interior) {
                facets.push(f);
            }
        }
    }
    Some(simplices)
}

/// Triangulation of points in convex position (vertices of a convex
/// polytope), with cheap paths for dimensions one and two.
pub(crate) fn triangulate_convex(points: &[Vec<f64>]) -> Vec<Vec<Vec<f64>>> {
    let Some(first) = points.first() else {
        return Vec::new();
    };
    match first.len() {
        1 => {
            let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
            let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
            if hi > lo {
                vec![vec![vec![lo], vec![hi]]]
            } else {
                Vec::new()
            }
        }
        2 => {
            if points.len() < 3 {
                return Vec::new();
            }
            let ordered = order_polygon(points);
            (1..ordered.len() - 1)
                .map(|i| {
                    vec![
                        ordered[0].clone(),
                        ordered[i].clone(),
                        ordered[i + 1].clone(),
                    ]
                })
                .collect()
        }
        _ => match placing(points) {
            Some(s) => s
                .into_iter()
                .map(|idx| idx.into_iter().map(|i| points[i].clone()).collect())
                .collect(),
            None => Vec::new(),
        },
    }
}

/// Counter-clockwise order of a convex polygon's vertices.
pub(crate) fn order_polygon(points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let k = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / k;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / k;
    let mut keyed: Vec<(f64, &Vec<f64>)> = points
        .iter()
        .map(|p| ((p[1] - cy).atan2(p[0] - cx), p))
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0));
    keyed.into_iter().map(|(_, p)| p.clone()).collect()
}
