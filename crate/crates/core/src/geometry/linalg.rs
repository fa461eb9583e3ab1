//! Small dense helpers for the low-dimensional geometry code.

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Determinant by Gaussian elimination with partial pivoting. `m` is consumed.
pub fn det(mut m: Vec<Vec<f64>>) -> f64 {
    let n = m.len();
    let mut d = 1.0;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))
            .unwrap();
        if m[pivot][col] == 0.0 {
            return 0.0;
        }
        if pivot != col {
            m.swap(pivot, col);
            d = -d;
        }
        let p = m[col][col];
        d *= p;
        for r in col + 1..n {
            let f = m[r][col] / p;
            if f != 0.0 {
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    d
}

/// Signed determinant of the edge matrix `[v_1 − v_0, …, v_n − v_0]`.
pub fn edge_det(vertices: &[Vec<f64>]) -> f64 {
    let v0 = &vertices[0];
    match v0.len() {
        1 => vertices[1][0] - v0[0],
        2 => {
            let (a0, a1) = (vertices[1][0] - v0[0], vertices[1][1] - v0[1]);
            let (b0, b1) = (vertices[2][0] - v0[0], vertices[2][1] - v0[1]);
            a0 * b1 - a1 * b0
        }
        _ => det(vertices[1..].iter().map(|v| sub(v, v0)).collect()),
    }
}

/// Unit normal of the hyperplane through `points` (exactly `n` points in ℝⁿ).
///
/// Returns `None` if the points are affinely dependent within `tol`.
pub fn hyperplane_normal(points: &[&[f64]], tol: f64) -> Option<Vec<f64>> {
    let n = points[0].len();
    debug_assert_eq!(points.len(), n);
    if n == 1 {
        return Some(vec![1.0]);
    }
    let rows: Vec<Vec<f64>> = points[1..].iter().map(|p| sub(p, points[0])).collect();
    let normal = nullspace_vector(rows, tol)?;
    let len = norm(&normal);
    Some(normal.iter().map(|v| v / len).collect())
}

/// One vector spanning the nullspace of an `(n−1) × n` matrix of full row rank.
pub fn nullspace_vector(mut m: Vec<Vec<f64>>, tol: f64) -> Option<Vec<f64>> {
    let rows = m.len();
    let cols = m[0].len();
    let scale = m
        .iter()
        .flatten()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let mut pivot_cols = Vec::with_capacity(rows);
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let p = (r..rows)
            .max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs()))
            .unwrap();
        if m[p][c].abs() <= tol * scale {
            continue;
        }
        m.swap(p, r);
        let pv = m[r][c];
        for v in m[r].iter_mut() {
            *v /= pv;
        }
        for rr in 0..rows {
            if rr != r {
                let f = m[rr][c];
                if f != 0.0 {
                    for cc in 0..cols {
                        m[rr][cc] -= f * m[r][cc];
                    }
                }
            }
        }
        pivot_cols.push(c);
        r += 1;
    }
    if r < rows {
        return None;
    }
    let free = (0..cols).find(|c| !pivot_cols.contains(c))?;
    let mut x = vec![0.0; cols];
    x[free] = 1.0;
    for (row, &pc) in pivot_cols.iter().enumerate() {
        x[pc] = -m[row][free];
    }
    Some(x)
}

/// Affine rank of a point set (number of independent directions).
pub fn affine_rank(points: &[Vec<f64>], tol: f64) -> usize {
    if points.len() < 2 {
        return 0;
    }
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for p in &points[1..] {
        let mut v = sub(p, &points[0]);
        let len0 = norm(&v);
        for b in &basis {
            let proj = dot(&v, b);
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= proj * bi;
            }
        }
        let len = norm(&v);
        if len > tol * len0.max(1.0) {
            basis.push(v.iter().map(|x| x / len).collect());
        }
    }
    basis.len()
}
