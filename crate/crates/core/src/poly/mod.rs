//! Exact multivariate polynomials in the covariance entries `σ_vw`.
//!
//! `σ_vw` and `σ_wv` are the same variable. Terms are kept in graded
//! lexicographic order with variables ordered by their sorted index pair;
//! iteration yields the leading term first.

mod fingerprint;
mod matrix;

pub use fingerprint::{fingerprint, fingerprint_relabeled, point_value, Evaluate, Fingerprint, DEFAULT_POINTS};
pub use matrix::{PatternMatrix, DEFAULT_EXPANSION_CAP};

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::field;
use crate::graph::Name;

/// The covariance entry `σ_{lo,hi}` with `lo <= hi`.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var {
    lo: Name,
    hi: Name,
}

impl Var {
    pub fn new(a: &str, b: &str) -> Var {
        Var::from_names(Name::from(a), Name::from(b))
    }

    pub fn from_names(a: Name, b: Name) -> Var {
        if a <= b {
            Var { lo: a, hi: b }
        } else {
            Var { lo: b, hi: a }
        }
    }

    pub fn lo(&self) -> &Name {
        &self.lo
    }

    pub fn hi(&self) -> &Name {
        &self.hi
    }

    pub fn is_diagonal(&self) -> bool {
        self.lo == self.hi
    }

    /// Variable after renaming both indices.
    pub fn renamed(&self, f: &dyn Fn(&Name) -> Name) -> Var {
        Var::from_names(f(&self.lo), f(&self.hi))
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "s[{},{}]", self.lo, self.hi)
    }
}

impl fmt::Debug for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// A product of variables, stored as sorted `(variable, exponent)` pairs.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<(Var, u32)>);

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(v: Var) -> Self {
        Monomial(vec![(v, 1)])
    }

    pub fn from_factors<I: IntoIterator<Item = Var>>(vars: I) -> Self {
        vars.into_iter()
            .fold(Monomial::one(), |m, v| m.mul(&Monomial::var(v)))
    }

    pub fn factors(&self) -> &[(Var, u32)] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().map(|(_, e)| e).sum()
    }

    pub fn is_one(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_diagonal(&self) -> bool {
        self.0.iter().all(|(v, _)| v.is_diagonal())
    }

    pub fn mul(&self, o: &Monomial) -> Monomial {
        let mut out = Vec::with_capacity(self.0.len() + o.0.len());
        let (mut i, mut j) = (0, 0);
        while i < self.0.len() && j < o.0.len() {
            match self.0[i].0.cmp(&o.0[j].0) {
                Ordering::Less => {
                    out.push(self.0[i].clone());
                    i += 1;
                }
                Ordering::Greater => {
                    out.push(o.0[j].clone());
                    j += 1;
                }
                Ordering::Equal => {
                    out.push((self.0[i].0.clone(), self.0[i].1 + o.0[j].1));
                    i += 1;
                    j += 1;
                }
            }
        }
        out.extend_from_slice(&self.0[i..]);
        out.extend_from_slice(&o.0[j..]);
        Monomial(out)
    }

    /// `Some(self / d)` when `d` divides `self`.
    pub fn div(&self, d: &Monomial) -> Option<Monomial> {
        let mut out = Vec::with_capacity(self.0.len());
        let mut j = 0;
        for (v, e) in &self.0 {
            if j < d.0.len() && d.0[j].0 < *v {
                return None;
            }
            if j < d.0.len() && d.0[j].0 == *v {
                let de = d.0[j].1;
                j += 1;
                match e.cmp(&de) {
                    Ordering::Less => return None,
                    Ordering::Equal => continue,
                    Ordering::Greater => out.push((v.clone(), e - de)),
                }
            } else {
                out.push((v.clone(), *e));
            }
        }
        (j == d.0.len()).then_some(Monomial(out))
    }

    /// Occurrences of each model variable among the indices, `σ_vv` counting twice.
    pub fn multidegree(&self) -> BTreeMap<Name, u32> {
        let mut out = BTreeMap::new();
        for (v, e) in &self.0 {
            *out.entry(v.lo.clone()).or_insert(0) += e;
            *out.entry(v.hi.clone()).or_insert(0) += e;
        }
        out
    }

    pub fn renamed(&self, f: &dyn Fn(&Name) -> Name) -> Monomial {
        Monomial::from_factors(
            self.0
                .iter()
                .flat_map(|(v, e)| std::iter::repeat_n(v.renamed(f), *e as usize)),
        )
    }

    pub fn eval_mod(&self, point: &dyn Fn(&Var) -> u64) -> u64 {
        self.0
            .iter()
            .fold(1, |acc, (v, e)| field::mul(acc, field::pow(point(v), *e as u64)))
    }
}

impl Ord for Monomial {
    /// Graded lexicographic: total degree first, then the exponent of the
    /// smallest variable decides.
    fn cmp(&self, o: &Self) -> Ordering {
        match self.degree().cmp(&o.degree()) {
            Ordering::Equal => {}
            ord => return ord,
        }
        for (a, b) in self.0.iter().zip(&o.0) {
            match a.0.cmp(&b.0) {
                Ordering::Less => return Ordering::Greater,
                Ordering::Greater => return Ordering::Less,
                Ordering::Equal => match a.1.cmp(&b.1) {
                    Ordering::Equal => {}
                    ord => return ord,
                },
            }
        }
        self.0.len().cmp(&o.0.len())
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "1");
        }
        for (i, (v, e)) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{v}")?;
            if *e > 1 {
                write!(f, "^{e}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[derive(Clone, PartialEq, Eq, Default)]
pub struct Polynomial {
    terms: BTreeMap<Monomial, BigRational>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial::default()
    }

    pub fn one() -> Self {
        Polynomial::constant(BigRational::one())
    }

    pub fn constant(c: BigRational) -> Self {
        Polynomial::from_terms([(Monomial::one(), c)])
    }

    pub fn var(v: Var) -> Self {
        Polynomial::from_terms([(Monomial::var(v), BigRational::one())])
    }

    /// Shorthand for `σ_ab`.
    pub fn sigma(a: &str, b: &str) -> Self {
        Polynomial::var(Var::new(a, b))
    }

    pub fn from_terms<I: IntoIterator<Item = (Monomial, BigRational)>>(terms: I) -> Self {
        let mut p = Polynomial::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: BigRational) {
        if c.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += c;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Number of terms.
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in canonical order, leading term first.
    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &BigRational)> {
        self.terms.iter().rev()
    }

    pub fn leading_term(&self) -> Option<(&Monomial, &BigRational)> {
        self.terms.iter().next_back()
    }

    pub fn coefficient(&self, m: &Monomial) -> BigRational {
        self.terms.get(m).cloned().unwrap_or_else(BigRational::zero)
    }

    /// Maximal total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.leading_term().map(|(m, _)| m.degree())
    }

    pub fn is_homogeneous(&self) -> bool {
        let mut degs = self.terms.keys().map(Monomial::degree);
        match degs.next() {
            None => true,
            Some(d) => degs.all(|e| e == d),
        }
    }

    pub fn scale(&self, c: &BigRational) -> Polynomial {
        if c.is_zero() {
            return Polynomial::zero();
        }
        Polynomial {
            terms: self.terms.iter().map(|(m, x)| (m.clone(), x * c)).collect(),
        }
    }

    pub fn mul_monomial(&self, m: &Monomial, c: &BigRational) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(t, x)| (t.mul(m), x * c)))
    }

    pub fn pow(&self, e: u32) -> Polynomial {
        (0..e).fold(Polynomial::one(), |acc, _| &acc * self)
    }

    /// Fixes the sign so that the leading coefficient is positive.
    pub fn normalize_sign(&self) -> Polynomial {
        match self.leading_term() {
            Some((_, c)) if c.is_negative() => -self,
            _ => self.clone(),
        }
    }

    /// Divides out the leading coefficient.
    pub fn monic(&self) -> Polynomial {
        match self.leading_term() {
            Some((_, c)) => self.scale(&c.recip()),
            None => Polynomial::zero(),
        }
    }

    pub fn variables(&self) -> Vec<Var> {
        let mut vs: Vec<Var> = self
            .terms
            .keys()
            .flat_map(|m| m.0.iter().map(|(v, _)| v.clone()))
            .collect();
        vs.sort();
        vs.dedup();
        vs
    }

    /// Model variables (node names) occurring in any index.
    pub fn nodes(&self) -> Vec<Name> {
        let mut ns: Vec<Name> = self
            .variables()
            .into_iter()
            .flat_map(|v| [v.lo, v.hi])
            .collect();
        ns.sort();
        ns.dedup();
        ns
    }

    pub fn renamed(&self, f: &dyn Fn(&Name) -> Name) -> Polynomial {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| (m.renamed(f), c.clone())))
    }

    /// `Some(h)` with `self = q · h` if `q` divides `self` exactly.
    ///
    /// If `q | p` then the leading monomial of `q` divides that of `p`, so
    /// the first failure of that test proves non-divisibility.
    pub fn divide_exact(&self, q: &Polynomial) -> Result<Option<Polynomial>> {
        let (lq, lc) = q.leading_term().ok_or(Error::DivisionByZero)?;
        let (lq, lc) = (lq.clone(), lc.clone());
        let mut rem = self.clone();
        let mut quot = Polynomial::zero();
        while let Some((lp, cp)) = rem.leading_term() {
            let Some(m) = lp.div(&lq) else {
                return Ok(None);
            };
            let c = cp / &lc;
            rem = &rem - &q.mul_monomial(&m, &c);
            quot.add_term(m, c);
        }
        Ok(Some(quot))
    }

    /// The per-model-variable index count shared by every term.
    pub fn homogeneity_signature(&self) -> Result<BTreeMap<Name, u32>> {
        let mut it = self.terms.keys();
        let first = it
            .next()
            .ok_or_else(|| Error::Unsupported("zero polynomial has no signature".into()))?;
        let sig = first.multidegree();
        for m in it {
            if m.multidegree() != sig {
                return Err(Error::NotHomogeneous {
                    first: first.to_string(),
                    second: m.to_string(),
                });
            }
        }
        Ok(sig)
    }

    /// The unique term built only from diagonal entries `σ_vv`, if any.
    pub fn diagonal_monomial(&self) -> Result<Option<(Monomial, BigRational)>> {
        self.homogeneity_signature()?;
        Ok(self
            .terms
            .iter()
            .find(|(m, _)| m.is_diagonal())
            .map(|(m, c)| (m.clone(), c.clone())))
    }

    pub fn eval_rational(&self, point: &dyn Fn(&Var) -> BigRational) -> BigRational {
        let mut total = BigRational::zero();
        for (m, c) in &self.terms {
            let mut t = c.clone();
            for (v, e) in &m.0 {
                let x = point(v);
                for _ in 0..*e {
                    t *= &x;
                }
            }
            total += t;
        }
        total
    }
}

impl Evaluate for Polynomial {
    fn eval_mod(&self, point: &dyn Fn(&Var) -> u64) -> u64 {
        self.terms.iter().fold(0, |acc, (m, c)| {
            let c = field::from_rational(c).expect("coefficient denominator divisible by p");
            field::add(acc, field::mul(c, m.eval_mod(point)))
        })
    }
}

impl Add for &Polynomial {
    type Output = Polynomial;
    fn add(self, o: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl Sub for &Polynomial {
    type Output = Polynomial;
    fn sub(self, o: &Polynomial) -> Polynomial {
        let mut out = self.clone();
        for (m, c) in &o.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl Neg for &Polynomial {
    type Output = Polynomial;
    fn neg(self) -> Polynomial {
        Polynomial {
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c.clone())).collect(),
        }
    }
}

impl Mul for &Polynomial {
    type Output = Polynomial;
    fn mul(self, o: &Polynomial) -> Polynomial {
        let mut out = Polynomial::zero();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                out.add_term(m1.mul(m2), c1 * c2);
            }
        }
        out
    }
}

fn fmt_coeff(c: &BigRational) -> String {
    let sign = if c.is_negative() { '-' } else { '+' };
    let a = c.abs();
    if a.is_integer() {
        format!("{sign}{}", a.numer())
    } else {
        format!("{sign}{}/{}", a.numer(), a.denom())
    }
}

impl fmt::Display for Polynomial {
    /// `+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]`; the zero polynomial is `0`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        for (i, (m, c)) in self.terms().enumerate() {
            if i > 0 {
                write!(f, " ")?;
            }
            write!(f, "{}", fmt_coeff(c))?;
            if !m.is_one() {
                write!(f, " {m}")?;
            }
        }
        Ok(())
    }
}

impl fmt::Debug for Polynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

fn parse_coeff(tok: &str) -> Option<BigRational> {
    let (neg, body) = match tok.as_bytes().first()? {
        b'+' => (false, &tok[1..]),
        b'-' => (true, &tok[1..]),
        _ => return None,
    };
    let q = match body.split_once('/') {
        Some((n, d)) => {
            let d: BigInt = d.parse().ok()?;
            if d.is_zero() {
                return None;
            }
            BigRational::new(n.parse().ok()?, d)
        }
        None => BigRational::from_integer(body.parse().ok()?),
    };
    Some(if neg { -q } else { q })
}

fn parse_var(tok: &str) -> Option<(Var, u32)> {
    let (base, exp) = match tok.split_once('^') {
        Some((b, e)) => (b, e.parse().ok().filter(|&e: &u32| e > 0)?),
        None => (tok, 1),
    };
    let inner = base.strip_prefix("s[")?.strip_suffix(']')?;
    let (a, b) = inner.split_once(',')?;
    let (a, b) = (a.trim(), b.trim());
    if a.is_empty() || b.is_empty() {
        return None;
    }
    Some((Var::new(a, b), exp))
}

impl FromStr for Polynomial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Polynomial> {
        let s = s.trim();
        if s == "0" {
            return Ok(Polynomial::zero());
        }
        let bad = |msg: String| Error::Parse { line: 1, msg };
        let mut out = Polynomial::zero();
        let mut current: Option<(BigRational, Monomial)> = None;
        for tok in s.split_whitespace() {
            if let Some(c) = parse_coeff(tok) {
                if let Some((c0, m0)) = current.take() {
                    out.add_term(m0, c0);
                }
                current = Some((c, Monomial::one()));
            } else if let Some((v, e)) = parse_var(tok) {
                let (_, m) = current
                    .as_mut()
                    .ok_or_else(|| bad(format!("variable `{tok}` before any coefficient")))?;
                let f = Monomial(vec![(v, e)]);
                *m = m.mul(&f);
            } else {
                return Err(bad(format!("unrecognised token `{tok}`")));
            }
        }
        if let Some((c, m)) = current {
            out.add_term(m, c);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn p(s: &str) -> Polynomial {
        s.parse().unwrap()
    }

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    #[test]
    fn symmetric_variables() {
        assert_eq!(Var::new("b", "a"), Var::new("a", "b"));
        assert_eq!(Polynomial::sigma("c", "b"), p("+1 s[b,c]"));
    }

    #[test]
    fn grlex_leading_term() {
        let f = p("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]");
        assert_eq!(f.to_string(), "+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]");
        let g = p("-1 s[a,c] s[b,c] +1 s[c,c] s[a,b]");
        assert_eq!(f, g);
        assert_eq!(g.to_string(), f.to_string());
        // degree dominates
        let h = p("+1 s[d,d] +1 s[a,a] s[b,b]");
        assert_eq!(h.leading_term().unwrap().0.degree(), 2);
    }

    #[test]
    fn display_parse_round_trip() {
        for s in [
            "0",
            "+1 s[a,a] s[b,b] -1 s[a,b]^2",
            "-3/2 s[a,b] +7",
            "+2 s[a,b]^3 s[c,d]",
        ] {
            assert_eq!(p(s).to_string(), s);
        }
        assert!("s[a,b]".parse::<Polynomial>().is_err());
        assert!("+1 x".parse::<Polynomial>().is_err());
    }

    #[test]
    fn divide_exact_examples() {
        let f = p("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]");
        assert_eq!(f.divide_exact(&f).unwrap(), Some(Polynomial::one()));
        let saa = Polynomial::sigma("a", "a");
        let prod = &saa * &f;
        assert_eq!(prod.divide_exact(&saa).unwrap(), Some(f.clone()));
        assert_eq!(f.divide_exact(&saa).unwrap(), None);
        assert!(matches!(
            f.divide_exact(&Polynomial::zero()),
            Err(Error::DivisionByZero)
        ));
    }

    #[test]
    fn non_divisibility_confirmed_by_evaluation() {
        // At σ_aa = 0 the candidate divisor vanishes while f does not,
        // so σ_aa cannot divide f.
        let f = p("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]");
        let at = |v: &Var| -> BigRational {
            match (v.lo().as_ref(), v.hi().as_ref()) {
                ("a", "a") => q(0),
                ("a", "b") => q(1),
                ("c", "c") => q(1),
                _ => q(0),
            }
        };
        assert!(Polynomial::sigma("a", "a").eval_rational(&at).is_zero());
        assert_eq!(f.eval_rational(&at), q(1));
    }

    #[test]
    fn homogeneity_signature_examples() {
        let f = p("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]");
        let sig = f.homogeneity_signature().unwrap();
        let expect: BTreeMap<Name, u32> =
            [("a", 1), ("b", 1), ("c", 2)].into_iter().map(|(k, v)| (Name::from(k), v)).collect();
        assert_eq!(sig, expect);
        assert!(matches!(
            p("+1 s[a,b] +1 s[c,c]").homogeneity_signature(),
            Err(Error::NotHomogeneous { .. })
        ));
    }

    #[test]
    fn diagonal_monomial_examples() {
        assert_eq!(
            p("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]").diagonal_monomial().unwrap(),
            None
        );
        let (m, c) = p("+1 s[a,a] s[b,b] -1 s[a,b] s[a,b]")
            .diagonal_monomial()
            .unwrap()
            .unwrap();
        assert_eq!(m.to_string(), "s[a,a] s[b,b]");
        assert_eq!(c, q(1));
        assert!(p("+1 s[a,a] +1 s[a,b]").diagonal_monomial().is_err());
    }

    #[test]
    fn sign_normalization() {
        let f = p("-1 s[a,b] +1 s[c,c]");
        assert_eq!(f.normalize_sign().to_string(), "+1 s[a,b] -1 s[c,c]");
    }
}

#[cfg(test)]
pub(crate) use tests::p as parse_poly;
