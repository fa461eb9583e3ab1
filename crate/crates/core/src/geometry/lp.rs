//! LP-based polytope hygiene: emptiness, Chebyshev radius, redundancy.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::linalg::norm;
use super::{ConvexPolytope, HPolytope, Halfspace};
use crate::error::{Error, Result};
use crate::model::AxisBox;

/// Feasibility tolerance for the LP tests.
pub const LP_TOL: f64 = 1e-9;
/// Intersections whose inscribed ball is smaller than this are empty.
pub const MIN_RADIUS: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub enum Intersection {
    Empty,
    Polytope(HPolytope),
}

enum LpOutcome {
    Optimal(f64, Vec<f64>),
    Infeasible,
    Unbounded,
}

fn solve(
    dim: usize,
    objective: &[f64],
    extra_var: Option<(f64, (f64, f64))>,
    rows: &[(Vec<f64>, f64, f64)],
    direction: OptimizationDirection,
) -> Result<LpOutcome> {
    let mut lp = Problem::new(direction);
    let vars: Vec<_> = objective
        .iter()
        .map(|c| lp.add_var(*c, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    let extra = extra_var.map(|(c, bounds)| lp.add_var(c, bounds));
    for (coeffs, extra_coeff, rhs) in rows {
        let mut terms: Vec<_> = vars.iter().copied().zip(coeffs.iter().copied()).collect();
        if let Some(e) = extra {
            terms.push((e, *extra_coeff));
        }
        lp.add_constraint(terms.as_slice(), ComparisonOp::Le, *rhs);
    }
    match lp.solve() {
        Ok(outcome) => {
            let sol = outcome
                .into_solution()
                .map_err(|_| Error::Lp("solver interrupted".into()))?;
            let mut x: Vec<f64> = vars.iter().map(|v| sol.var_value(*v)).collect();
            if let Some(e) = extra {
                x.push(sol.var_value(e));
            }
            debug_assert_eq!(x.len(), dim + extra.is_some() as usize);
            Ok(LpOutcome::Optimal(sol.objective(), x))
        }
        Err(microlp::Error::Infeasible) => Ok(LpOutcome::Infeasible),
        Err(microlp::Error::Unbounded) => Ok(LpOutcome::Unbounded),
        Err(e) => Err(Error::Lp(e.to_string())),
    }
}

fn dim_of(hs: &[Halfspace]) -> Option<usize> {
    hs.first().map(Halfspace::dim)
}

/// Largest inscribed ball `(center, radius)`; `None` if infeasible. The radius
/// is capped at `1e6` for unbounded sets.
pub fn chebyshev_radius(poly: &HPolytope) -> Result<Option<(Vec<f64>, f64)>> {
    let Some(n) = dim_of(&poly.halfspaces) else {
        return Ok(None);
    };
    let rows: Vec<_> = poly
        .halfspaces
        .iter()
        .map(|h| (h.normal.clone(), norm(&h.normal), h.offset))
        .collect();
    match solve(
        n,
        &vec![0.0; n],
        Some((1.0, (0.0, 1e6))),
        &rows,
        OptimizationDirection::Maximize,
    )? {
        LpOutcome::Optimal(r, x) => Ok(Some((x[..n].to_vec(), r))),
        LpOutcome::Infeasible => Ok(None),
        LpOutcome::Unbounded => Err(Error::Lp("Chebyshev LP unbounded".into())),
    }
}

/// Drops every halfspace implied by the remaining ones (one LP each).
pub fn remove_redundant(poly: &HPolytope) -> Result<HPolytope> {
    let mut keep: Vec<bool> = vec![true; poly.len()];
    for i in 0..poly.len() {
        let h = &poly.halfspaces[i];
        let hn = h.normalized();
        let mut rows: Vec<_> = poly
            .halfspaces
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != i && keep[*j])
            .map(|(_, g)| {
                let g = g.normalized();
                (g.normal, 0.0, g.offset)
            })
            .collect();
        rows.push((hn.normal.clone(), 0.0, hn.offset + 1.0));
        match solve(h.dim(), &hn.normal, None, &rows, OptimizationDirection::Maximize)? {
            LpOutcome::Optimal(v, _) => {
                if v <= hn.offset + LP_TOL {
                    keep[i] = false;
                }
            }
            LpOutcome::Infeasible => {}
            LpOutcome::Unbounded => {}
        }
    }
    Ok(HPolytope::new(
        poly.halfspaces
            .iter()
            .zip(keep)
            .filter(|(_, k)| *k)
            .map(|(h, _)| h.clone())
            .collect(),
    ))
}

/// `poly ∩ extra` with redundant halfspaces removed, or `Empty` when the
/// intersection has no interior.
pub fn intersect(poly: &HPolytope, extra: &[Halfspace]) -> Result<Intersection> {
    let mut all = poly.halfspaces.clone();
    all.extend_from_slice(extra);
    let all = HPolytope::new(all);
    if all.is_empty() {
        return Ok(Intersection::Polytope(all));
    }
    match chebyshev_radius(&all)? {
        Some((_, r)) if r > MIN_RADIUS => Ok(Intersection::Polytope(remove_redundant(&all)?)),
        _ => Ok(Intersection::Empty),
    }
}

fn lp_bounding_box(poly: &HPolytope) -> Result<Option<AxisBox>> {
    let n = dim_of(&poly.halfspaces).ok_or(Error::Unbounded)?;
    let rows: Vec<_> = poly
        .halfspaces
        .iter()
        .map(|h| (h.normal.clone(), 0.0, h.offset))
        .collect();
    let mut lower = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        let mut obj = vec![0.0; n];
        obj[i] = 1.0;
        for (dir, slot) in [
            (OptimizationDirection::Minimize, &mut lower),
            (OptimizationDirection::Maximize, &mut upper),
        ] {
            match solve(n, &obj, None, &rows, dir)? {
                LpOutcome::Optimal(v, _) => slot[i] = v,
                LpOutcome::Infeasible => return Ok(None),
                LpOutcome::Unbounded => return Err(Error::Unbounded),
            }
        }
    }
    for i in 0..n {
        let pad = 1.0 + (upper[i] - lower[i]).abs();
        lower[i] -= pad;
        upper[i] += pad;
    }
    Ok(Some(AxisBox { lower, upper }))
}

/// Vertices of `poly ∩ domain`, sorted lexicographically. Without a domain
/// the polytope must be bounded.
pub fn vertices(poly: &HPolytope, domain: Option<&AxisBox>) -> Result<Vec<Vec<f64>>> {
    let owned;
    let b = match domain {
        Some(b) => b,
        None => match lp_bounding_box(poly)? {
            Some(b) => {
                owned = b;
                &owned
            }
            None => return Ok(Vec::new()),
        },
    };
    if let Some(n) = dim_of(&poly.halfspaces) {
        if n != b.dim() {
            return Err(Error::Dimension {
                expected: b.dim(),
                got: n,
            });
        }
    }
    let mut cur = ConvexPolytope::from_box(b);
    for h in &poly.halfspaces {
        match cur.clip(h) {
            Some(p) => cur = p,
            None => return Ok(Vec::new()),
        }
    }
    let mut v = cur.vertices().to_vec();
    v.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(n: &[f64], c: f64) -> Halfspace {
        Halfspace::new(n.to_vec(), c).unwrap()
    }

    #[test]
    fn square_cut_to_triangle() {
        let sq = HPolytope::from_box(&AxisBox::unit(2));
        let Intersection::Polytope(tri) = intersect(&sq, &[h(&[1.0, 1.0], 0.5)]).unwrap() else {
            panic!("expected nonempty");
        };
        assert_eq!(tri.len(), 3);
        let v = vertices(&tri, None).unwrap();
        assert_eq!(v.len(), 3);
        let expected = [[0.0, 0.0], [0.0, 0.5], [0.5, 0.0]];
        for (got, want) in v.iter().zip(expected) {
            assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn disjoint_is_empty() {
        let sq = HPolytope::from_box(&AxisBox::unit(2));
        assert_eq!(
            intersect(&sq, &[h(&[-1.0, 0.0], -2.0)]).unwrap(),
            Intersection::Empty
        );
    }

    #[test]
    fn interval_vertices() {
        let p = HPolytope::new(vec![h(&[1.0], 1.0), h(&[-1.0], 0.0)]);
        let v = vertices(&p, None).unwrap();
        assert_eq!(v.len(), 2);
        assert!(v[0][0].abs() < 1e-12 && (v[1][0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn unbounded_without_box_errors() {
        let p = HPolytope::new(vec![h(&[1.0], 1.0)]);
        assert!(matches!(vertices(&p, None), Err(Error::Unbounded)));
        let b = AxisBox::new(vec![-3.0], vec![3.0]).unwrap();
        assert_eq!(vertices(&p, Some(&b)).unwrap().len(), 2);
    }
}
