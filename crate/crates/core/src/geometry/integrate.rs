//! Exact integration of polynomials over simplices.
//!
//! Writing `x = Σ λ_i v_i` in barycentric coordinates, every monomial `x^α`
//! expands into barycentric monomials, and
//! `∫_s λ^β dx = n!·vol(s)·∏β_i! / (|β|+n)!`. Collecting the expansion gives
//! `∫_s x^α = |det E|·α!/(|α|+n)! · Σ ∏_i (|k_i|!/k_i!) v_i^{k_i}` where the sum
//! runs over splittings `α = k_0 + … + k_n` and `E` is the edge matrix.

use std::collections::HashMap;
use std::ops::{Add, Div, Mul, Sub};

use num_rational::BigRational;
use num_traits::{FromPrimitive, Signed, Zero};

use super::{Polynomial, Simplex};
use crate::error::{Error, Result};

/// Arithmetic needed by the barycentric formula.
pub trait Field:
    Clone
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
{
    fn zero() -> Self;
    fn from_u64(v: u64) -> Self;
    fn from_f64(v: f64) -> Self;
    fn abs(&self) -> Self;
}

impl Field for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_u64(v: u64) -> Self {
        v as f64
    }
    fn from_f64(v: f64) -> Self {
        v
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
}

impl Field for BigRational {
    fn zero() -> Self {
        <BigRational as Zero>::zero()
    }
    fn from_u64(v: u64) -> Self {
        <BigRational as FromPrimitive>::from_u64(v).unwrap()
    }
    fn from_f64(v: f64) -> Self {
        BigRational::from_float(v).expect("finite value")
    }
    fn abs(&self) -> Self {
        Signed::abs(self)
    }
}

fn factorial(k: u32) -> u64 {
    (1..=k as u64).product()
}

/// Multi-indices of `n` variables with total degree ≤ `d` and the convolution
/// pairs `(α, k, α − k)` for every `k ≤ α`.
#[derive(Debug, Clone)]
struct MomentTable {
    indices: Vec<Vec<u32>>,
    lookup: HashMap<Vec<u32>, usize>,
    pairs: Vec<(usize, usize, usize)>,
    /// `|k|! / k!` per index.
    multinomial: Vec<u64>,
}

impl MomentTable {
    fn new(n: usize, d: u32) -> Self {
        let mut indices = Vec::new();
        let mut cur = vec![0u32; n];
        fn rec(pos: usize, left: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
            if pos == cur.len() {
                out.push(cur.clone());
                return;
            }
            for k in 0..=left {
                cur[pos] = k;
                rec(pos + 1, left - k, cur, out);
            }
            cur[pos] = 0;
        }
        rec(0, d, &mut cur, &mut indices);
        indices.sort_by_key(|e| (e.iter().sum::<u32>(), e.clone()));
        let lookup: HashMap<Vec<u32>, usize> =
            indices.iter().enumerate().map(|(i, e)| (e.clone(), i)).collect();
        let mut pairs = Vec::new();
        for (ai, a) in indices.iter().enumerate() {
            for (ki, k) in indices.iter().enumerate() {
                if k.iter().zip(a).all(|(x, y)| x <= y) {
                    let rest: Vec<u32> = a.iter().zip(k).map(|(x, y)| x - y).collect();
                    pairs.push((ai, ki, lookup[&rest]));
                }
            }
        }
        let multinomial = indices
            .iter()
            .map(|k| factorial(k.iter().sum()) / k.iter().map(|&e| factorial(e)).product::<u64>())
            .collect();
        Self {
            indices,
            lookup,
            pairs,
            multinomial,
        }
    }

    /// `Σ_{k_0+…+k_n=α} ∏ w_i(k_i)` for every `α` in the table.
    fn splitting_sums<S: Field>(&self, vertices: &[Vec<S>]) -> Vec<S> {
        let mut acc: Option<Vec<S>> = None;
        for v in vertices {
            let w: Vec<S> = self
                .indices
                .iter()
                .zip(&self.multinomial)
                .map(|(k, m)| {
                    let mut t = S::from_u64(*m);
                    for (e, x) in k.iter().zip(v) {
                        for _ in 0..*e {
                            t = t * x.clone();
                        }
                    }
                    t
                })
                .collect();
            acc = Some(match acc {
                None => w,
                Some(prev) => {
                    let mut next = vec![S::zero(); self.indices.len()];
                    for &(a, k, rest) in &self.pairs {
                        next[a] = next[a].clone() + prev[rest].clone() * w[k].clone();
                    }
                    next
                }
            });
        }
        acc.unwrap()
    }
}

fn det_generic<S: Field>(mut m: Vec<Vec<S>>) -> S {
    let n = m.len();
    let mut d = S::from_u64(1);
    let mut negate = false;
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| m[r][col] != S::zero()) else {
            return S::zero();
        };
        if p != col {
            m.swap(p, col);
            negate = !negate;
        }
        let pv = m[col][col].clone();
        d = d * pv.clone();
        for r in col + 1..n {
            let f = m[r][col].clone() / pv.clone();
            if f != S::zero() {
                for c in col..n {
                    let t = m[col][c].clone() * f.clone();
                    m[r][c] = m[r][c].clone() - t;
                }
            }
        }
    }
    if negate {
        S::zero() - d
    } else {
        d
    }
}

/// Barycentric integrator for a fixed polynomial, reusable across simplices.
#[derive(Debug, Clone)]
pub struct SimplexIntegrator {
    dim: usize,
    constant: Option<f64>,
    table: MomentTable,
    /// `(table index, c_α · α!/(|α|+n)!)`.
    coeffs: Vec<(usize, f64)>,
}

impl SimplexIntegrator {
    pub fn new(p: &Polynomial) -> Self {
        let n = p.dim();
        let d = p.degree();
        let table = MomentTable::new(n, d);
        let coeffs = p
            .terms()
            .map(|(e, c)| {
                let deg: u32 = e.iter().sum();
                let num: f64 = e.iter().map(|&k| factorial(k) as f64).product();
                let den = factorial(deg + n as u32) as f64;
                (table.lookup[e], c * num / den)
            })
            .collect();
        Self {
            dim: n,
            constant: p.as_constant(),
            table,
            coeffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Integral over the simplex with the given `n + 1` vertices; no
    /// degeneracy check (flat simplices integrate to ~0).
    pub fn integrate(&self, vertices: &[Vec<f64>]) -> f64 {
        let det = super::linalg::edge_det(vertices).abs();
        if let Some(c) = self.constant {
            let nf: f64 = (1..=self.dim).map(|k| k as f64).product();
            return c * det / nf;
        }
        det * self.dot(&self.table.splitting_sums(vertices))
    }

    fn dot(&self, sums: &[f64]) -> f64 {
        self.coeffs.iter().map(|(i, c)| c * sums[*i]).sum()
    }
}

fn check(p: &Polynomial, s: &Simplex) -> Result<()> {
    if p.dim() != s.dim() {
        return Err(Error::Dimension {
            expected: s.dim(),
            got: p.dim(),
        });
    }
    Ok(())
}

/// `∫_s p(x) dx` in floating point.
pub fn integrate_polynomial_over_simplex(p: &Polynomial, s: &Simplex) -> Result<f64> {
    check(p, s)?;
    if s.is_degenerate() {
        return Err(Error::DegenerateSimplex(s.det()));
    }
    Ok(SimplexIntegrator::new(p).integrate(&s.vertices))
}

/// `∫_s p(x) dx` in exact rational arithmetic. Coefficients and vertex
/// coordinates are converted from `f64` without rounding.
pub fn integrate_polynomial_over_simplex_exact(p: &Polynomial, s: &Simplex) -> Result<BigRational> {
    check(p, s)?;
    let verts: Vec<Vec<BigRational>> = s
        .vertices
        .iter()
        .map(|v| v.iter().map(|x| <BigRational as Field>::from_f64(*x)).collect())
        .collect();
    integrate_exact(p, &verts)
}

/// Exact integral over a simplex given by rational vertices.
pub fn integrate_exact(p: &Polynomial, vertices: &[Vec<BigRational>]) -> Result<BigRational> {
    let n = p.dim();
    let edges: Vec<Vec<BigRational>> = vertices[1..]
        .iter()
        .map(|v| v.iter().zip(&vertices[0]).map(|(a, b)| a - b).collect())
        .collect();
    let det = Field::abs(&det_generic(edges));
    if det == <BigRational as Field>::zero() {
        return Err(Error::DegenerateSimplex(0.0));
    }
    let table = MomentTable::new(n, p.degree());
    let sums = table.splitting_sums(vertices);
    let mut total = <BigRational as Field>::zero();
    for (e, c) in p.terms() {
        let deg: u32 = e.iter().sum();
        let num: u64 = e.iter().map(|&k| factorial(k)).product();
        let den = factorial(deg + n as u32);
        let w = <BigRational as Field>::from_f64(c) * <BigRational as Field>::from_u64(num)
            / <BigRational as Field>::from_u64(den);
        total += w * sums[table.lookup[e]].clone();
    }
    Ok(total * det)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_over_standard_triangle() {
        let v = integrate_polynomial_over_simplex(&Polynomial::constant(2, 1.0), &Simplex::standard(2))
            .unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn first_moment_over_standard_triangle() {
        let v = integrate_polynomial_over_simplex(&Polynomial::variable(2, 0), &Simplex::standard(2))
            .unwrap();
        assert!((v - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn exact_mode_gives_rationals() {
        let p = Polynomial::from_terms(2, [(vec![2, 1], 3.0)]);
        let v = integrate_polynomial_over_simplex_exact(&p, &Simplex::standard(2)).unwrap();
        // ∫ x²y over the standard triangle = 2!·1!/5! = 1/60
        assert_eq!(v, BigRational::new(3.into(), 60.into()));
    }

    #[test]
    fn float_and_exact_modes_agree() {
        let p = Polynomial::from_terms(2, [(vec![2, 1], 1.5), (vec![0, 3], -0.5), (vec![1, 0], 2.0)]);
        let s = Simplex::new(vec![vec![0.3, 0.2], vec![1.1, 0.4], vec![0.5, 1.3]]).unwrap();
        let f = integrate_polynomial_over_simplex(&p, &s).unwrap();
        let e = integrate_polynomial_over_simplex_exact(&p, &s).unwrap();
        let ef: f64 = num_traits::ToPrimitive::to_f64(&e).unwrap();
        assert!((f - ef).abs() < 1e-13 * ef.abs().max(1.0));
    }

    #[test]
    fn degenerate_and_mismatched_inputs() {
        let flat = Simplex::new(vec![vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 2.0]]).unwrap();
        assert!(matches!(
            integrate_polynomial_over_simplex(&Polynomial::constant(2, 1.0), &flat),
            Err(Error::DegenerateSimplex(_))
        ));
        assert!(matches!(
            integrate_polynomial_over_simplex(&Polynomial::constant(3, 1.0), &Simplex::standard(2)),
            Err(Error::Dimension { .. })
        ));
    }
}
