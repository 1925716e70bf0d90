//! Polynomial identity testing by evaluation at pseudo-random points of
//! `F_p`, `p = 2^61 - 1`.
//!
//! Every point assigns each variable `σ_vw` a value derived from the seed,
//! the point index and the two names, so the same variable gets the same
//! value in every fingerprint taken with one seed. Two distinct polynomials
//! of degree `d` agree at one random point with probability at most `d/p`;
//! with 16 points and `d ≤ 14` a false "equal" is below `2^-900`. A false
//! "different" never happens.

use serde::{Deserialize, Serialize};

use super::Var;
use crate::error::{Error, Result};
use crate::field::{self, PRIME};
use crate::graph::Name;

pub const DEFAULT_POINTS: usize = 16;

/// Anything that can be evaluated at a point of `F_p`.
pub trait Evaluate {
    fn eval_mod(&self, point: &dyn Fn(&Var) -> u64) -> u64;
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fingerprint {
    pub values: Vec<u64>,
    pub prime: u64,
    pub seed: u64,
}

/// Value of `σ_{a,b}` at point `k`; symmetric in `a` and `b`.
pub fn point_value(seed: u64, k: usize, a: &str, b: &str) -> u64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    field::hash_element(seed, k as u64, &[lo, hi])
}

pub fn fingerprint<E: Evaluate + ?Sized>(e: &E, seed: u64) -> Fingerprint {
    fingerprint_relabeled(e, seed, &|n: &Name| n.clone())
}

/// Fingerprint of `e` after renaming every model variable through `rename`.
pub fn fingerprint_relabeled<E: Evaluate + ?Sized>(
    e: &E,
    seed: u64,
    rename: &dyn Fn(&Name) -> Name,
) -> Fingerprint {
    let values = (0..DEFAULT_POINTS)
        .map(|k| {
            let point = |v: &Var| point_value(seed, k, &rename(v.lo()), &rename(v.hi()));
            e.eval_mod(&point)
        })
        .collect();
    Fingerprint {
        values,
        prime: PRIME,
        seed,
    }
}

impl Fingerprint {
    fn check(&self, o: &Fingerprint) -> Result<()> {
        if self.prime != o.prime || self.seed != o.seed || self.values.len() != o.values.len() {
            Err(Error::FingerprintMismatch)
        } else {
            Ok(())
        }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0)
    }

    /// `true` iff `self = c · o` pointwise for one nonzero field scalar `c`.
    pub fn equal_up_to_scalar(&self, o: &Fingerprint) -> Result<bool> {
        self.check(o)?;
        Ok(self.scalar_to(o)?.is_some())
    }

    /// The scalar `c` with `self = c · o`, if one exists. Both zero gives `1`.
    pub fn scalar_to(&self, o: &Fingerprint) -> Result<Option<u64>> {
        self.check(o)?;
        let mut c: Option<u64> = None;
        for (&a, &b) in self.values.iter().zip(&o.values) {
            match (a == 0, b == 0) {
                (true, true) => continue,
                (true, false) | (false, true) => return Ok(None),
                (false, false) => {
                    let r = field::mul(a, field::inv(b));
                    match c {
                        None => c = Some(r),
                        Some(prev) if prev != r => return Ok(None),
                        _ => {}
                    }
                }
            }
        }
        Ok(Some(c.unwrap_or(1)))
    }

    /// `true` iff the two fingerprints agree up to a sign.
    pub fn equal_up_to_sign(&self, o: &Fingerprint) -> Result<bool> {
        Ok(matches!(self.scalar_to(o)?, Some(c) if c == 1 || c == PRIME - 1))
    }

    /// Pointwise product; the fingerprint of the product polynomial.
    pub fn mul(&self, o: &Fingerprint) -> Result<Fingerprint> {
        self.check(o)?;
        Ok(Fingerprint {
            values: self
                .values
                .iter()
                .zip(&o.values)
                .map(|(&a, &b)| field::mul(a, b))
                .collect(),
            prime: self.prime,
            seed: self.seed,
        })
    }

    /// Fingerprint of the constant polynomial `1`.
    pub fn one(seed: u64) -> Fingerprint {
        Fingerprint {
            values: vec![1; DEFAULT_POINTS],
            prime: PRIME,
            seed,
        }
    }

    /// Values scaled so that the first nonzero entry is `1`; a canonical
    /// representative of the class of `self` up to scalar.
    pub fn normalized(&self) -> Vec<u64> {
        match self.values.iter().find(|&&v| v != 0) {
            None => self.values.clone(),
            Some(&first) => {
                let inv = field::inv(first);
                self.values.iter().map(|&v| field::mul(v, inv)).collect()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{parse_poly, PatternMatrix};
    use num_rational::BigRational;

    fn tetrad_matrix() -> PatternMatrix {
        let s = |a: &str, b: &str| Some(Var::new(a, b));
        PatternMatrix::from_entries(vec![
            vec![s("a", "b"), s("a", "c")],
            vec![s("c", "b"), s("c", "c")],
        ])
    }

    #[test]
    fn matrix_and_expansion_agree() {
        let m = tetrad_matrix();
        let p = m.det_expand(8).unwrap();
        assert_eq!(fingerprint(&m, 7), fingerprint(&p, 7));
    }

    #[test]
    fn scalar_multiples() {
        let p = parse_poly("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]");
        let p7 = p.scale(&BigRational::from_integer(7.into()));
        assert!(fingerprint(&p, 1).equal_up_to_scalar(&fingerprint(&p7, 1)).unwrap());
        assert!(!fingerprint(&p, 1).equal_up_to_sign(&fingerprint(&p7, 1)).unwrap());
        assert!(fingerprint(&p, 1).equal_up_to_sign(&fingerprint(&-&p, 1)).unwrap());
    }

    #[test]
    fn one_flipped_sign_is_detected() {
        let p = parse_poly("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]");
        let q = parse_poly("+1 s[a,b] s[c,c] +1 s[a,c] s[b,c]");
        assert!(!fingerprint(&p, 3).equal_up_to_scalar(&fingerprint(&q, 3)).unwrap());
    }

    #[test]
    fn mismatched_seeds_are_rejected() {
        let p = parse_poly("+1 s[a,b]");
        assert!(matches!(
            fingerprint(&p, 1).equal_up_to_scalar(&fingerprint(&p, 2)),
            Err(Error::FingerprintMismatch)
        ));
    }

    #[test]
    fn relabeling_matches_renamed_polynomial() {
        let p = parse_poly("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]");
        let swap = |n: &Name| -> Name {
            match n.as_ref() {
                "a" => "c".into(),
                "c" => "a".into(),
                _ => n.clone(),
            }
        };
        assert_eq!(
            fingerprint_relabeled(&p, 5, &swap),
            fingerprint(&p.renamed(&swap), 5)
        );
    }

    #[test]
    fn product_fingerprint() {
        let a = parse_poly("+1 s[a,a]");
        let b = parse_poly("+1 s[a,b] -1 s[c,c]");
        let ab = &a * &b;
        assert_eq!(
            fingerprint(&a, 9).mul(&fingerprint(&b, 9)).unwrap(),
            fingerprint(&ab, 9)
        );
    }
}
