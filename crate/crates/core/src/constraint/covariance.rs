use std::fmt::Write as _;
use std::str::FromStr;

use num_rational::BigRational;
use num_traits::{Signed, Zero};

use crate::error::{Error, Result};
use crate::graph::Name;
use crate::linalg::{self, QMatrix};

/// A symmetric matrix of exact rationals indexed by model variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CovarianceMatrix {
    names: Vec<Name>,
    values: QMatrix,
}

impl CovarianceMatrix {
    /// Checks shape, symmetry and positivity of the diagonal.
    pub fn new(names: Vec<Name>, values: QMatrix) -> Result<Self> {
        let n = names.len();
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidCovariance(format!(
                "expected a {n}x{n} matrix"
            )));
        }
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != n {
            return Err(Error::InvalidCovariance("duplicate variable name".into()));
        }
        if !linalg::is_symmetric(&values) {
            return Err(Error::InvalidCovariance("matrix is not symmetric".into()));
        }
        if let Some(i) = (0..n).find(|&i| !values[i][i].is_positive()) {
            return Err(Error::InvalidCovariance(format!(
                "diagonal entry for `{}` is not positive",
                names[i]
            )));
        }
        Ok(CovarianceMatrix { names, values })
    }

    pub fn names(&self) -> &[Name] {
        &self.names
    }

    pub fn values(&self) -> &QMatrix {
        &self.values
    }

    pub fn index(&self, v: &str) -> Result<usize> {
        self.names
            .iter()
            .position(|n| n.as_ref() == v)
            .ok_or_else(|| Error::MissingVariable(v.to_string()))
    }

    pub fn get(&self, a: &str, b: &str) -> Result<&BigRational> {
        Ok(&self.values[self.index(a)?][self.index(b)?])
    }

    /// `true` iff every leading principal minor is positive.
    pub fn is_positive_definite(&self) -> bool {
        linalg::leading_minors(&self.values)
            .iter()
            .all(|m| m.is_positive())
    }

    /// Whitespace-separated text: a header of names, then one row of
    /// rationals `p/q` per variable.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
            .filter(|(_, l)| !l.is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 0,
            msg: "missing header row".into(),
        })?;
        let names: Vec<Name> = header.split_whitespace().map(Name::from).collect();
        let mut values = Vec::new();
        for (line, row) in lines {
            let parsed = row
                .split_whitespace()
                .map(|tok| {
                    BigRational::from_str(tok).map_err(|_| Error::Parse {
                        line,
                        msg: format!("bad rational `{tok}`"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            if parsed.len() != names.len() {
                return Err(Error::Parse {
                    line,
                    msg: format!("expected {} entries, found {}", names.len(), parsed.len()),
                });
            }
            values.push(parsed);
        }
        Self::new(names, values)
    }

    pub fn to_text(&self) -> String {
        let mut out = self.names.join(" ");
        out.push('\n');
        for row in &self.values {
            let cells: Vec<String> = row.iter().map(|x| x.to_string()).collect();
            writeln!(out, "{}", cells.join(" ")).unwrap();
        }
        out
    }

    /// Entries that are exactly zero off the diagonal, as name pairs.
    pub fn zero_pairs(&self) -> Vec<(Name, Name)> {
        let n = self.names.len();
        let mut out = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                if self.values[i][j].is_zero() {
                    out.push((self.names[i].clone(), self.names[j].clone()));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn parse_round_trip() {
        let text = "a b\n2 1/3\n1/3 5\n";
        let c = CovarianceMatrix::parse(text).unwrap();
        assert_eq!(c.get("b", "a").unwrap(), &q(1, 3));
        assert_eq!(c.to_text(), text);
        assert!(c.is_positive_definite());
        assert!(matches!(c.get("z", "a"), Err(Error::MissingVariable(_))));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            CovarianceMatrix::parse("a b\n1 2\n3 1\n"),
            Err(Error::InvalidCovariance(_))
        ));
        assert!(matches!(
            CovarianceMatrix::parse("a b\n1 x\n0 1\n"),
            Err(Error::Parse { line: 2, .. })
        ));
        assert!(matches!(
            CovarianceMatrix::parse("a b\n0 0\n0 1\n"),
            Err(Error::InvalidCovariance(_))
        ));
        assert!(matches!(
            CovarianceMatrix::parse("a b\n1 0\n"),
            Err(Error::InvalidCovariance(_))
        ));
    }

    #[test]
    fn indefinite_matrix_detected() {
        let c = CovarianceMatrix::parse("a b\n1 2\n2 1\n").unwrap();
        assert!(!c.is_positive_definite());
    }
}
