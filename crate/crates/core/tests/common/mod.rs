#![allow(dead_code)]

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::Rng;

use cdfbound::geometry::{Polynomial, Simplex};
use cdfbound::model::{Activation, FeedforwardNetwork, Layer};

pub fn random_net<R: Rng>(rng: &mut R, dims: &[usize], hidden: Activation, gain: f64) -> FeedforwardNetwork {
    let last = dims.len() - 2;
    let layers = (0..dims.len() - 1)
        .map(|l| {
            let (i, o) = (dims[l], dims[l + 1]);
            let s = gain / (i as f64).sqrt();
            let w = (0..o).map(|_| (0..i).map(|_| rng.random_range(-s..s)).collect()).collect();
            let b = (0..o).map(|_| rng.random_range(-0.5..0.5)).collect();
            Layer::new(w, b, if l < last { hidden } else { Activation::Identity })
        })
        .collect();
    FeedforwardNetwork::new(layers).unwrap()
}

pub fn random_point<R: Rng>(rng: &mut R, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    lo.iter().zip(hi).map(|(a, b)| rng.random_range(*a..=*b)).collect()
}

/// Gauss–Legendre nodes and weights on `[0, 1]` by Newton iteration.
pub fn gauss_legendre(m: usize) -> Vec<(f64, f64)> {
    (1..=m)
        .map(|i| {
            let mut x = (std::f64::consts::PI * (i as f64 - 0.25) / (m as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (mut p0, mut p1) = (1.0, x);
                for k in 2..=m {
                    let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                    p0 = p1;
                    p1 = p2;
                }
                dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
                let dx = p1 / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            (0.5 * (x + 1.0), 0.5 * w)
        })
        .collect()
}

/// Collapsed-coordinate tensor Gauss quadrature over a simplex.
pub fn quadrature<F: Fn(&[f64]) -> f64>(f: F, s: &Simplex, m: usize) -> f64 {
    let n = s.dim();
    let rule = gauss_legendre(m);
    let v0 = &s.vertices[0];
    let edges: Vec<Vec<f64>> = s.vertices[1..]
        .iter()
        .map(|v| v.iter().zip(v0).map(|(a, b)| a - b).collect())
        .collect();
    let det = cdfbound::geometry::linalg::det(
        (0..n).map(|r| (0..n).map(|c| edges[c][r]).collect()).collect(),
    )
    .abs();
    let mut idx = vec![0usize; n];
    let mut total = 0.0;
    loop {
        let mut lambda = vec![0.0; n];
        let mut rest = 1.0;
        let mut weight = 1.0;
        for k in 0..n {
            let (u, w) = rule[idx[k]];
            lambda[k] = rest * u;
            // Jacobian factor of the collapsed map: ∏_{j<k} (1 − u_j).
            weight *= w * rest;
            rest *= 1.0 - u;
        }
        let x: Vec<f64> = (0..n)
            .map(|d| v0[d] + (0..n).map(|k| lambda[k] * edges[k][d]).sum::<f64>())
            .collect();
        total += weight * f(&x);
        let mut k = 0;
        loop {
            if k == n {
                return total * det;
            }
            idx[k] += 1;
            if idx[k] < m {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

type RatPoly = BTreeMap<Vec<u32>, BigRational>;

fn rat(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite")
}

fn rat_mul(a: &RatPoly, b: &RatPoly) -> RatPoly {
    let mut out = RatPoly::new();
    for (ea, ca) in a {
        for (eb, cb) in b {
            let e: Vec<u32> = ea.iter().zip(eb).map(|(x, y)| x + y).collect();
            let entry = out.entry(e).or_insert_with(BigRational::zero);
            *entry += ca * cb;
        }
    }
    out.retain(|_, c| !c.is_zero());
    out
}

fn factorial(k: u32) -> BigRational {
    let mut f = BigRational::one();
    for i in 2..=k {
        f *= BigRational::from_integer(i.into());
    }
    f
}

/// Exact integral by substituting barycentric coordinates and applying the
/// Dirichlet moment formula `∫_Δ λ^α = α!/(|α|+n)!` term by term.
pub fn symbolic_integral(p: &Polynomial, vertices: &[Vec<BigRational>]) -> BigRational {
    let n = vertices.len() - 1;
    let v0 = &vertices[0];
    // x_d = v0_d + Σ_k λ_k (v_k − v0)_d as polynomials in λ.
    let coords: Vec<RatPoly> = (0..n)
        .map(|d| {
            let mut q = RatPoly::new();
            if !v0[d].is_zero() {
                q.insert(vec![0; n], v0[d].clone());
            }
            for k in 0..n {
                let c = &vertices[k + 1][d] - &v0[d];
                if !c.is_zero() {
                    let mut e = vec![0; n];
                    e[k] = 1;
                    q.insert(e, c);
                }
            }
            q
        })
        .collect();
    let mut total = BigRational::zero();
    for (exps, c) in p.terms() {
        let mut term: RatPoly = [(vec![0; n], rat(c))].into_iter().collect();
        for (d, &e) in exps.iter().enumerate() {
            for _ in 0..e {
                term = rat_mul(&term, &coords[d]);
            }
        }
        for (alpha, coeff) in term {
            let num = alpha.iter().fold(BigRational::one(), |acc, &a| acc * factorial(a));
            let deg: u32 = alpha.iter().sum();
            total += coeff * num / factorial(deg + n as u32);
        }
    }
    let m: Vec<Vec<BigRational>> = (0..n)
        .map(|r| (0..n).map(|k| &vertices[k + 1][r] - &v0[r]).collect())
        .collect();
    total * rational_det(m).abs()
}

fn rational_det(mut m: Vec<Vec<BigRational>>) -> BigRational {
    let n = m.len();
    let mut det = BigRational::one();
    for col in 0..n {
        let Some(p) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if p != col {
            m.swap(p, col);
            det = -det;
        }
        let pivot = m[col][col].clone();
        det *= &pivot;
        for r in col + 1..n {
            let f = &m[r][col] / &pivot;
            for c in col..n {
                let v = &f * &m[col][c];
                m[r][c] -= v;
            }
        }
    }
    det
}

pub fn to_rational(v: &[Vec<f64>]) -> Vec<Vec<BigRational>> {
    v.iter().map(|p| p.iter().map(|x| rat(*x)).collect()).collect()
}

pub fn random_polynomial<R: Rng>(rng: &mut R, dim: usize, degree: u32, terms: usize) -> Polynomial {
    let mut p = Polynomial::zero(dim);
    for _ in 0..terms {
        let mut e = vec![0u32; dim];
        let mut left = rng.random_range(0..=degree);
        while left > 0 {
            e[rng.random_range(0..dim)] += 1;
            left -= 1;
        }
        p.add_term(e, rng.random_range(-1.0..1.0));
    }
    p
}

pub fn abs_coefficients(p: &Polynomial) -> Polynomial {
    Polynomial::from_terms(p.dim(), p.terms().map(|(e, c)| (e.to_vec(), c.abs())))
}

pub fn random_simplex<R: Rng>(rng: &mut R, dim: usize) -> Simplex {
    loop {
        let v: Vec<Vec<f64>> = (0..=dim)
            .map(|_| (0..dim).map(|_| rng.random_range(0.0..2.0)).collect())
            .collect();
        let s = Simplex { vertices: v };
        if s.volume() > 1e-3 {
            return s;
        }
    }
}
