use std::collections::HashMap;

use num_rational::BigRational;

use super::{Evaluate, Monomial, Polynomial, Var};
use crate::error::{Error, Result};
use crate::field;
use crate::graph::Name;

/// Default largest dimension [`PatternMatrix::det_expand`] will expand.
pub const DEFAULT_EXPANSION_CAP: usize = 8;

/// A square symbolic matrix whose entries are `σ_vw` or zero.
///
/// Rows and columns are indexed by `(constraint node id, label element)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PatternMatrix {
    pub rows: Vec<(String, Name)>,
    pub cols: Vec<(String, Name)>,
    pub entries: Vec<Vec<Option<Var>>>,
}

impl PatternMatrix {
    /// Matrix with anonymous row and column ids, mainly for tests.
    pub fn from_entries(entries: Vec<Vec<Option<Var>>>) -> Self {
        let rows = (0..entries.len())
            .map(|i| (format!("r{i}"), Name::from("")))
            .collect();
        let cols = (0..entries.first().map_or(0, Vec::len))
            .map(|j| (format!("c{j}"), Name::from("")))
            .collect();
        PatternMatrix {
            rows,
            cols,
            entries,
        }
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn is_square(&self) -> bool {
        self.rows.len() == self.cols.len()
    }

    /// Entries after substituting a value for every variable.
    pub fn instantiate<T: Clone>(&self, zero: T, value: impl Fn(&Var) -> T) -> Vec<Vec<T>> {
        self.entries
            .iter()
            .map(|r| {
                r.iter()
                    .map(|e| e.as_ref().map_or_else(|| zero.clone(), &value))
                    .collect()
            })
            .collect()
    }

    /// Symbolic determinant under the stored row and column order.
    ///
    /// Dynamic programming over rows with the set of used columns as state,
    /// so the cost is `O(2^n · n)` polynomial updates instead of `n!`.
    pub fn det_expand(&self, cap: usize) -> Result<Polynomial> {
        if !self.is_square() {
            return Err(Error::NonSquare {
                rows: self.rows.len(),
                cols: self.cols.len(),
            });
        }
        let n = self.dim();
        if n > cap {
            return Err(Error::ExpansionCap { dim: n, cap });
        }
        let mut layer: HashMap<u32, HashMap<Monomial, i128>> = HashMap::new();
        layer.insert(0, HashMap::from([(Monomial::one(), 1i128)]));
        for row in &self.entries {
            let mut next: HashMap<u32, HashMap<Monomial, i128>> = HashMap::new();
            for (mask, poly) in &layer {
                for (j, e) in row.iter().enumerate() {
                    let Some(v) = e else { continue };
                    if mask >> j & 1 == 1 {
                        continue;
                    }
                    // Inversions added by placing column j after the used ones.
                    let flips = (mask >> (j + 1)).count_ones();
                    let sign = if flips % 2 == 0 { 1 } else { -1 };
                    let target = next.entry(mask | 1 << j).or_default();
                    let factor = Monomial::var(v.clone());
                    for (m, c) in poly {
                        *target.entry(m.mul(&factor)).or_insert(0) += sign * c;
                    }
                }
            }
            for poly in next.values_mut() {
                poly.retain(|_, c| *c != 0);
            }
            next.retain(|_, p| !p.is_empty());
            layer = next;
        }
        let full = if n == 0 { 0 } else { (1u32 << n) - 1 };
        Ok(Polynomial::from_terms(
            layer
                .remove(&full)
                .unwrap_or_default()
                .into_iter()
                .map(|(m, c)| (m, BigRational::from_integer(c.into()))),
        ))
    }

    /// Determinant over `F_p` at the given point, without expansion.
    pub fn det_mod(&self, point: &dyn Fn(&Var) -> u64) -> u64 {
        if !self.is_square() {
            return 0;
        }
        field::det(self.instantiate(0u64, point))
    }
}

impl Evaluate for PatternMatrix {
    fn eval_mod(&self, point: &dyn Fn(&Var) -> u64) -> u64 {
        self.det_mod(point)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::parse_poly;
    use proptest::prelude::*;

    fn s(a: &str, b: &str) -> Option<Var> {
        Some(Var::new(a, b))
    }

    /// Laplace expansion along the first row; independent of the DP.
    fn cofactor_det(m: &[Vec<Option<Var>>]) -> Polynomial {
        let n = m.len();
        if n == 0 {
            return Polynomial::one();
        }
        let mut total = Polynomial::zero();
        for j in 0..n {
            let Some(v) = &m[0][j] else { continue };
            let minor: Vec<Vec<Option<Var>>> = m[1..]
                .iter()
                .map(|r| {
                    r.iter()
                        .enumerate()
                        .filter(|(k, _)| *k != j)
                        .map(|(_, e)| e.clone())
                        .collect()
                })
                .collect();
            let term = &Polynomial::var(v.clone()) * &cofactor_det(&minor);
            total = if j % 2 == 0 {
                &total + &term
            } else {
                &total - &term
            };
        }
        total
    }

    #[test]
    fn tetrad_determinant() {
        let m = PatternMatrix::from_entries(vec![
            vec![s("a", "b"), s("a", "c")],
            vec![s("c", "b"), s("c", "c")],
        ]);
        let d = m.det_expand(DEFAULT_EXPANSION_CAP).unwrap();
        assert_eq!(d, parse_poly("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]"));
    }

    #[test]
    fn bow_free_determinant_has_four_cubic_terms() {
        let m = PatternMatrix::from_entries(vec![
            vec![s("c", "b"), s("c", "d"), None],
            vec![s("a", "b"), s("a", "d"), s("a", "a")],
            vec![s("b", "b"), s("b", "d"), s("b", "a")],
        ]);
        let d = m.det_expand(DEFAULT_EXPANSION_CAP).unwrap();
        assert_eq!(d.len(), 4);
        assert_eq!(d.degree(), Some(3));
        assert!(d.is_homogeneous());
    }

    #[test]
    fn one_by_one_and_empty() {
        let m = PatternMatrix::from_entries(vec![vec![s("a", "b")]]);
        assert_eq!(m.det_expand(8).unwrap(), Polynomial::sigma("a", "b"));
        let e = PatternMatrix::from_entries(Vec::new());
        assert_eq!(e.det_expand(8).unwrap(), Polynomial::one());
    }

    #[test]
    fn cap_and_shape_errors() {
        let m = PatternMatrix::from_entries(vec![vec![s("a", "a"); 3]; 3]);
        assert!(matches!(
            m.det_expand(2),
            Err(Error::ExpansionCap { dim: 3, cap: 2 })
        ));
        let r = PatternMatrix::from_entries(vec![vec![s("a", "a"); 3]; 2]);
        assert!(matches!(r.det_expand(8), Err(Error::NonSquare { .. })));
    }

    fn random_pattern() -> impl Strategy<Value = Vec<Vec<Option<Var>>>> {
        let names = ["a", "b", "c", "d"];
        prop::collection::vec(
            prop::collection::vec(
                prop::option::weighted(0.7, (0..4usize, 0..4usize)),
                4,
            ),
            4,
        )
        .prop_map(move |rows| {
            rows.into_iter()
                .map(|r| {
                    r.into_iter()
                        .map(|e| e.map(|(i, j)| Var::new(names[i], names[j])))
                        .collect()
                })
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn det_expand_matches_cofactor_oracle(pattern in random_pattern()) {
            let m = PatternMatrix::from_entries(pattern.clone());
            prop_assert_eq!(m.det_expand(8).unwrap(), cofactor_det(&pattern));
        }
    }
}
