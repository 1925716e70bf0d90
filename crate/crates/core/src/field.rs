//! Arithmetic and dense linear algebra over the prime field `F_p`,
//! `p = 2^61 - 1`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::ToPrimitive;

pub const PRIME: u64 = (1 << 61) - 1;

#[inline]
pub fn reduce(x: u128) -> u64 {
    // Mersenne reduction: x = hi * 2^61 + lo = hi + lo (mod p).
    let lo = (x as u64) & PRIME;
    let hi = (x >> 61) as u64;
    let s = lo + (hi & PRIME) + (hi >> 61);
    let s = (s & PRIME) + (s >> 61);
    if s >= PRIME {
        s - PRIME
    } else {
        s
    }
}

#[inline]
pub fn add(a: u64, b: u64) -> u64 {
    let s = a + b;
    if s >= PRIME {
        s - PRIME
    } else {
        s
    }
}

#[inline]
pub fn sub(a: u64, b: u64) -> u64 {
    if a >= b {
        a - b
    } else {
        a + PRIME - b
    }
}

#[inline]
pub fn neg(a: u64) -> u64 {
    if a == 0 {
        0
    } else {
        PRIME - a
    }
}

#[inline]
pub fn mul(a: u64, b: u64) -> u64 {
    reduce(a as u128 * b as u128)
}

pub fn pow(mut b: u64, mut e: u64) -> u64 {
    let mut r = 1;
    while e > 0 {
        if e & 1 == 1 {
            r = mul(r, b);
        }
        b = mul(b, b);
        e >>= 1;
    }
    r
}

/// Multiplicative inverse; `a` must be nonzero.
pub fn inv(a: u64) -> u64 {
    debug_assert!(a != 0);
    pow(a, PRIME - 2)
}

pub fn from_i64(x: i64) -> u64 {
    if x >= 0 {
        x as u64 % PRIME
    } else {
        neg((x.unsigned_abs()) % PRIME)
    }
}

pub fn from_bigint(x: &BigInt) -> u64 {
    let p = BigInt::from(PRIME);
    x.mod_floor(&p).to_u64().unwrap()
}

/// Image of a rational in `F_p`, or `None` if `p` divides the denominator.
pub fn from_rational(x: &BigRational) -> Option<u64> {
    let d = from_bigint(x.denom());
    if d == 0 {
        return None;
    }
    Some(mul(from_bigint(x.numer()), inv(d)))
}

/// Recovers `n/d` with `|n|, d < sqrt(p/2)` from its image in `F_p`.
pub fn rational_reconstruct(a: u64) -> Option<BigRational> {
    let bound = (PRIME as f64 / 2.0).sqrt() as i128;
    let (mut r0, mut r1) = (PRIME as i128, a as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 >= bound {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if t1 == 0 || t1.abs() >= bound {
        return None;
    }
    let (n, d) = if t1 < 0 { (-r1, -t1) } else { (r1, t1) };
    let q = BigRational::new(BigInt::from(n), BigInt::from(d));
    (from_rational(&q) == Some(a)).then_some(q)
}

/// Signed representative in `(-p/2, p/2]`, for display.
pub fn signed(a: u64) -> i64 {
    if a > PRIME / 2 {
        -((PRIME - a) as i64)
    } else {
        a as i64
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic pseudo-random field element keyed by a seed, an index and
/// a list of strings. Stable across platforms and builds.
pub fn hash_element(seed: u64, index: u64, parts: &[&str]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &byte in part.as_bytes() {
            h ^= byte as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        h ^= 0xff;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let z = splitmix(splitmix(h ^ splitmix(seed)) ^ index);
    // Rejection-free: 61 bits folded into the field.
    reduce(z as u128)
}

pub type Matrix = Vec<Vec<u64>>;

/// Determinant by Gaussian elimination; consumes its input.
pub fn det(mut m: Matrix) -> u64 {
    let n = m.len();
    let mut result = 1u64;
    for col in 0..n {
        let Some(piv) = (col..n).find(|&r| m[r][col] != 0) else {
            return 0;
        };
        if piv != col {
            m.swap(piv, col);
            result = neg(result);
        }
        let p = m[col][col];
        result = mul(result, p);
        let pinv = inv(p);
        for r in col + 1..n {
            if m[r][col] == 0 {
                continue;
            }
            let f = mul(m[r][col], pinv);
            let (top, bottom) = m.split_at_mut(r);
            let pivot_row = &top[col];
            let row = &mut bottom[0];
            for c in col..n {
                row[c] = sub(row[c], mul(f, pivot_row[c]));
            }
        }
    }
    result
}

/// Reduced row echelon form in place; returns the pivot columns.
pub fn row_reduce(m: &mut Matrix, cols: usize) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut row = 0;
    for col in 0..cols {
        if row == m.len() {
            break;
        }
        let Some(piv) = (row..m.len()).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(piv, row);
        let pinv = inv(m[row][col]);
        for c in col..cols {
            m[row][c] = mul(m[row][c], pinv);
        }
        for r in 0..m.len() {
            if r == row || m[r][col] == 0 {
                continue;
            }
            let f = m[r][col];
            let (pr, rr) = if r < row {
                let (a, b) = m.split_at_mut(row);
                (&b[0], &mut a[r])
            } else {
                let (a, b) = m.split_at_mut(r);
                (&a[row], &mut b[0])
            };
            for c in col..cols {
                if pr[c] != 0 {
                    rr[c] = sub(rr[c], mul(f, pr[c]));
                }
            }
        }
        pivots.push(col);
        row += 1;
    }
    pivots
}

/// Rank by forward elimination only.
pub fn rank(mut m: Matrix, cols: usize) -> usize {
    let mut row = 0;
    for col in 0..cols {
        if row == m.len() {
            break;
        }
        let Some(piv) = (row..m.len()).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(piv, row);
        let pinv = inv(m[row][col]);
        let (top, bottom) = m.split_at_mut(row + 1);
        let pivot_row = &top[row];
        for r in bottom.iter_mut() {
            if r[col] == 0 {
                continue;
            }
            let f = mul(r[col], pinv);
            for c in col..cols {
                if pivot_row[c] != 0 {
                    r[c] = sub(r[c], mul(f, pivot_row[c]));
                }
            }
        }
        row += 1;
    }
    row
}

/// Basis of the right nullspace `{x : m x = 0}`.
pub fn nullspace(mut m: Matrix, cols: usize) -> Vec<Vec<u64>> {
    let pivots = row_reduce(&mut m, cols);
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut x = vec![0u64; cols];
            x[f] = 1;
            for (r, &pc) in pivots.iter().enumerate() {
                x[pc] = neg(m[r][f]);
            }
            x
        })
        .collect()
}

/// Inverse of a square matrix, or `None` if singular.
pub fn inverse(m: &Matrix) -> Option<Matrix> {
    let n = m.len();
    if n == 0 {
        return Some(Vec::new());
    }
    let mut aug: Matrix = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| u64::from(i == j)));
            r
        })
        .collect();
    let pivots = row_reduce(&mut aug, 2 * n);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(aug.into_iter().map(|r| r[n..].to_vec()).collect())
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let k = b.len();
    let m = if k == 0 { 0 } else { b[0].len() };
    let mut out = vec![vec![0u64; m]; n];
    for i in 0..n {
        for l in 0..k {
            let x = a[i][l];
            if x == 0 {
                continue;
            }
            for j in 0..m {
                out[i][j] = add(out[i][j], mul(x, b[l][j]));
            }
        }
    }
    out
}

pub fn transpose(a: &Matrix) -> Matrix {
    if a.is_empty() {
        return Vec::new();
    }
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}
