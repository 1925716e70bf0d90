//! Exact dense linear algebra over the rationals.

use num_rational::BigRational;
use num_traits::{One, Zero};

pub type QMatrix = Vec<Vec<BigRational>>;

pub fn identity(n: usize) -> QMatrix {
    (0..n)
        .map(|i| {
            (0..n)
                .map(|j| if i == j { BigRational::one() } else { BigRational::zero() })
                .collect()
        })
        .collect()
}

pub fn zeros(rows: usize, cols: usize) -> QMatrix {
    vec![vec![BigRational::zero(); cols]; rows]
}

pub fn transpose(a: &QMatrix) -> QMatrix {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j].clone()).collect())
        .collect()
}

pub fn matmul(a: &QMatrix, b: &QMatrix) -> QMatrix {
    let cols = b.first().map_or(0, Vec::len);
    let mut out = zeros(a.len(), cols);
    for (i, row) in a.iter().enumerate() {
        for (l, x) in row.iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for j in 0..cols {
                if !b[l][j].is_zero() {
                    out[i][j] += x * &b[l][j];
                }
            }
        }
    }
    out
}

pub fn sub(a: &QMatrix, b: &QMatrix) -> QMatrix {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect())
        .collect()
}

/// Determinant by Gaussian elimination with exact rationals.
pub fn det(a: &QMatrix) -> BigRational {
    let n = a.len();
    let mut m = a.clone();
    let mut result = BigRational::one();
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| !m[r][col].is_zero()) else {
            return BigRational::zero();
        };
        if piv != col {
            m.swap(piv, col);
            result = -result;
        }
        let p = m[col][col].clone();
        result *= &p;
        for r in col + 1..n {
            if m[r][col].is_zero() {
                continue;
            }
            let f = &m[r][col] / &p;
            let (top, bottom) = m.split_at_mut(r);
            for c in col..n {
                if !top[col][c].is_zero() {
                    let t = &f * &top[col][c];
                    bottom[0][c] -= t;
                }
            }
        }
    }
    result
}

/// Solves `a x = b` for square nonsingular `a`; `None` if singular.
pub fn solve(a: &QMatrix, b: &[BigRational]) -> Option<Vec<BigRational>> {
    let n = a.len();
    let mut m: QMatrix = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(piv, col);
        let p = m[col][col].clone();
        for c in col..=n {
            m[col][c] = &m[col][c] / &p;
        }
        for r in 0..n {
            if r == col || m[r][col].is_zero() {
                continue;
            }
            let f = m[r][col].clone();
            for c in col..=n {
                let t = &f * &m[col][c];
                m[r][c] -= t;
            }
        }
    }
    Some(m.into_iter().map(|mut r| r.pop().unwrap()).collect())
}

/// Inverse of a square matrix, or `None` if singular.
pub fn inverse(a: &QMatrix) -> Option<QMatrix> {
    let n = a.len();
    let id = identity(n);
    let cols: Option<Vec<Vec<BigRational>>> = (0..n)
        .map(|j| {
            let e: Vec<BigRational> = id.iter().map(|r| r[j].clone()).collect();
            solve(a, &e)
        })
        .collect();
    cols.map(|c| transpose(&c))
}

/// Leading principal minors `det(a[..k, ..k])` for `k = 1..=n`.
pub fn leading_minors(a: &QMatrix) -> Vec<BigRational> {
    (1..=a.len())
        .map(|k| {
            let sub: QMatrix = a[..k].iter().map(|r| r[..k].to_vec()).collect();
            det(&sub)
        })
        .collect()
}

pub fn is_symmetric(a: &QMatrix) -> bool {
    (0..a.len()).all(|i| (0..i).all(|j| a[i][j] == a[j][i]))
}
