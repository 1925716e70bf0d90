//! Graphical constraints: labelled bipartite graphs standing for the
//! determinant, up to sign, of a pattern matrix in the covariances.
//!
//! Node `a` of part A contributes one row per element of its label, node
//! `b` of part B one column per element. The entry in row `(a, v)` and
//! column `(b, w)` is `σ_vw` when `a` and `b` are adjacent, zero otherwise.

mod covariance;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

pub use covariance::CovarianceMatrix;

use crate::error::{Error, Result};
use crate::graph::Name;
use crate::linalg;
use crate::poly::{fingerprint, Fingerprint, PatternMatrix, Polynomial, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    A,
    B,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::A => Side::B,
            Side::B => Side::A,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConstraintNode {
    pub id: String,
    /// Sorted, duplicate-free, nonempty.
    pub label: Vec<Name>,
}

impl ConstraintNode {
    pub fn new<S: AsRef<str>>(id: impl Into<String>, label: &[S]) -> Self {
        let mut label: Vec<Name> = label.iter().map(|s| Name::from(s.as_ref())).collect();
        label.sort();
        label.dedup();
        ConstraintNode {
            id: id.into(),
            label,
        }
    }
}

/// Edges are stored as `(index in part A, index in part B)`, sorted.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct GraphicalConstraint {
    pub part_a: Vec<ConstraintNode>,
    pub part_b: Vec<ConstraintNode>,
    pub edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct ConstraintJson {
    #[serde(rename = "partA")]
    part_a: Vec<ConstraintNode>,
    #[serde(rename = "partB")]
    part_b: Vec<ConstraintNode>,
    edges: Vec<(String, String)>,
}

impl GraphicalConstraint {
    pub fn empty() -> Self {
        GraphicalConstraint {
            part_a: Vec::new(),
            part_b: Vec::new(),
            edges: Vec::new(),
        }
    }

    /// Validated constructor: nonempty labels, unique ids, edges in range.
    pub fn new(
        part_a: Vec<ConstraintNode>,
        part_b: Vec<ConstraintNode>,
        edges: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let mut gc = GraphicalConstraint {
            part_a,
            part_b,
            edges,
        };
        gc.edges.sort_unstable();
        gc.edges.dedup();
        gc.validate()?;
        Ok(gc)
    }

    /// Shorthand for tests and examples: ids `a0, a1, …` and `b0, b1, …`.
    pub fn from_labels(a: &[&[&str]], b: &[&[&str]], edges: &[(usize, usize)]) -> Result<Self> {
        let part_a = a
            .iter()
            .enumerate()
            .map(|(i, l)| ConstraintNode::new(format!("a{i}"), l))
            .collect();
        let part_b = b
            .iter()
            .enumerate()
            .map(|(i, l)| ConstraintNode::new(format!("b{i}"), l))
            .collect();
        Self::new(part_a, part_b, edges.to_vec())
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for node in self.part_a.iter().chain(&self.part_b) {
            if node.label.is_empty() {
                return Err(Error::InvalidConstraint(format!(
                    "node `{}` has an empty label",
                    node.id
                )));
            }
            if node.label.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConstraint(format!(
                    "label of `{}` is not sorted and duplicate-free",
                    node.id
                )));
            }
            if !ids.insert(node.id.as_str()) {
                return Err(Error::InvalidConstraint(format!("duplicate id `{}`", node.id)));
            }
        }
        if let Some(&(a, b)) = self
            .edges
            .iter()
            .find(|&&(a, b)| a >= self.part_a.len() || b >= self.part_b.len())
        {
            return Err(Error::InvalidConstraint(format!("edge ({a}, {b}) out of range")));
        }
        Ok(())
    }

    pub fn part(&self, side: Side) -> &[ConstraintNode] {
        match side {
            Side::A => &self.part_a,
            Side::B => &self.part_b,
        }
    }

    pub fn node_count(&self) -> usize {
        self.part_a.len() + self.part_b.len()
    }

    /// Total row slots, `Σ_{a∈A} |label(a)|`.
    pub fn row_count(&self) -> usize {
        self.part_a.iter().map(|n| n.label.len()).sum()
    }

    pub fn col_count(&self) -> usize {
        self.part_b.iter().map(|n| n.label.len()).sum()
    }

    pub fn is_square(&self) -> bool {
        self.row_count() == self.col_count()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a, b)).is_ok()
    }

    /// Sorted neighbours of node `i` of `side`, as indices into the other part.
    pub fn neighbors(&self, side: Side, i: usize) -> Vec<usize> {
        match side {
            Side::A => self.edges.iter().filter(|e| e.0 == i).map(|e| e.1).collect(),
            Side::B => {
                let mut v: Vec<usize> =
                    self.edges.iter().filter(|e| e.1 == i).map(|e| e.0).collect();
                v.sort_unstable();
                v
            }
        }
    }

    /// Index of the node with this id.
    pub fn find(&self, id: &str) -> Option<(Side, usize)> {
        if let Some(i) = self.part_a.iter().position(|n| n.id == id) {
            return Some((Side::A, i));
        }
        self.part_b
            .iter()
            .position(|n| n.id == id)
            .map(|i| (Side::B, i))
    }

    /// All model variables appearing in labels.
    pub fn variables(&self) -> BTreeSet<Name> {
        self.part_a
            .iter()
            .chain(&self.part_b)
            .flat_map(|n| n.label.iter().cloned())
            .collect()
    }

    /// Appends a node and returns its index in its part.
    pub fn add_node(&mut self, side: Side, node: ConstraintNode) -> usize {
        let part = match side {
            Side::A => &mut self.part_a,
            Side::B => &mut self.part_b,
        };
        part.push(node);
        part.len() - 1
    }

    pub fn add_edge(&mut self, a: usize, b: usize) {
        if let Err(pos) = self.edges.binary_search(&(a, b)) {
            self.edges.insert(pos, (a, b));
        }
    }

    pub fn remove_edge(&mut self, a: usize, b: usize) -> bool {
        match self.edges.binary_search(&(a, b)) {
            Ok(pos) => {
                self.edges.remove(pos);
                true
            }
            Err(_) => false,
        }
    }

    /// Removes node `i` of `side`, reindexing edges.
    pub fn remove_node(&mut self, side: Side, i: usize) {
        let shift = |x: usize| if x > i { x - 1 } else { x };
        match side {
            Side::A => {
                self.part_a.remove(i);
                self.edges = self
                    .edges
                    .iter()
                    .filter(|e| e.0 != i)
                    .map(|&(a, b)| (shift(a), b))
                    .collect();
            }
            Side::B => {
                self.part_b.remove(i);
                self.edges = self
                    .edges
                    .iter()
                    .filter(|e| e.1 != i)
                    .map(|&(a, b)| (a, shift(b)))
                    .collect();
            }
        }
        self.edges.sort_unstable();
    }

    /// Pattern matrix with part A as rows, nodes in stored order, labels
    /// sorted.
    pub fn build_matrix(&self) -> Result<PatternMatrix> {
        let (rows, cols) = (self.row_count(), self.col_count());
        if rows != cols {
            return Err(Error::NonSquare { rows, cols });
        }
        let slots = |part: &[ConstraintNode]| -> Vec<(usize, String, Name)> {
            part.iter()
                .enumerate()
                .flat_map(|(i, n)| n.label.iter().map(move |v| (i, n.id.clone(), v.clone())))
                .collect()
        };
        let r = slots(&self.part_a);
        let c = slots(&self.part_b);
        let entries = r
            .iter()
            .map(|(a, _, v)| {
                c.iter()
                    .map(|(b, _, w)| {
                        self.has_edge(*a, *b)
                            .then(|| Var::from_names(v.clone(), w.clone()))
                    })
                    .collect()
            })
            .collect();
        Ok(PatternMatrix {
            rows: r.into_iter().map(|(_, id, v)| (id, v)).collect(),
            cols: c.into_iter().map(|(_, id, v)| (id, v)).collect(),
            entries,
        })
    }

    /// The represented polynomial, expanded symbolically.
    pub fn polynomial(&self, cap: usize) -> Result<Polynomial> {
        self.build_matrix()?.det_expand(cap)
    }

    pub fn fingerprint(&self, seed: u64) -> Result<Fingerprint> {
        Ok(fingerprint(&self.build_matrix()?, seed))
    }

    /// `true` iff the determinant vanishes identically (checked by
    /// fingerprint; a nonzero determinant is never reported as zero).
    pub fn is_degenerate(&self) -> Result<bool> {
        Ok(self.fingerprint(0x5eed)?.is_zero() && self.fingerprint(0xd00d)?.is_zero())
    }

    /// Exact test of `det M(Σ) = 0`.
    pub fn satisfies(&self, sigma: &CovarianceMatrix) -> Result<bool> {
        for v in self.variables() {
            sigma.index(&v)?;
        }
        let m = self.build_matrix()?;
        let values = m.instantiate(num_rational::BigRational::zero(), |v| {
            sigma.get(v.lo(), v.hi()).expect("checked above").clone()
        });
        Ok(linalg::det(&values).is_zero())
    }

    /// Merges same-neighbourhood pairs within a part until none remain.
    /// Pairs whose labels overlap are left alone: their union would drop a
    /// slot and change the matrix.
    pub fn normal_form(&self) -> GraphicalConstraint {
        let mut gc = self.clone();
        'outer: loop {
            for side in [Side::A, Side::B] {
                let k = gc.part(side).len();
                let nbrs: Vec<Vec<usize>> = (0..k).map(|i| gc.neighbors(side, i)).collect();
                for i in 0..k {
                    for j in i + 1..k {
                        if nbrs[i] != nbrs[j] {
                            continue;
                        }
                        let (li, lj) = (&gc.part(side)[i].label, &gc.part(side)[j].label);
                        if li.iter().any(|v| lj.contains(v)) {
                            continue;
                        }
                        let mut label: Vec<Name> = li.iter().chain(lj).cloned().collect();
                        label.sort();
                        match side {
                            Side::A => gc.part_a[i].label = label,
                            Side::B => gc.part_b[i].label = label,
                        }
                        gc.remove_node(side, j);
                        continue 'outer;
                    }
                }
            }
            return gc;
        }
    }

    pub fn is_normal(&self) -> bool {
        self.normal_form().node_count() == self.node_count()
    }

    /// Adjacency over the unified index space: A nodes first, then B.
    fn adjacency(&self) -> Vec<Vec<usize>> {
        let na = self.part_a.len();
        let mut adj = vec![Vec::new(); self.node_count()];
        for &(a, b) in &self.edges {
            adj[a].push(na + b);
            adj[na + b].push(a);
        }
        adj
    }

    /// Unified indices reachable from `start`, ignoring the edge `skip`.
    fn component(&self, start: usize, skip: Option<(usize, usize)>) -> Vec<usize> {
        let na = self.part_a.len();
        let adj = self.adjacency();
        let skip = skip.map(|(a, b)| (a, na + b));
        let mut seen = vec![false; self.node_count()];
        let mut stack = vec![start];
        seen[start] = true;
        let mut out = Vec::new();
        while let Some(u) = stack.pop() {
            out.push(u);
            for &w in &adj[u] {
                if skip == Some((u.min(w), u.max(w))) || seen[w] {
                    continue;
                }
                seen[w] = true;
                stack.push(w);
            }
        }
        out.sort_unstable();
        out
    }

    pub fn is_connected(&self) -> bool {
        self.node_count() == 0 || self.component(0, None).len() == self.node_count()
    }

    pub fn is_tree(&self) -> bool {
        self.node_count() > 0 && self.edges.len() + 1 == self.node_count() && self.is_connected()
    }

    /// The number of entries from the block of edge `a—b` in every term of
    /// the determinant: row slots minus column slots on the side of `a`
    /// once the edge is removed.
    pub fn edge_weight(&self, a: usize, b: usize) -> Result<usize> {
        if !self.is_tree() {
            return Err(Error::NotATree);
        }
        if !self.has_edge(a, b) {
            return Err(Error::InvalidConstraint(format!("no edge ({a}, {b})")));
        }
        if !self.is_square() {
            return Err(Error::NonSquare {
                rows: self.row_count(),
                cols: self.col_count(),
            });
        }
        let na = self.part_a.len();
        let (mut rows, mut cols) = (0i64, 0i64);
        for u in self.component(a, Some((a, b))) {
            if u < na {
                rows += self.part_a[u].label.len() as i64;
            } else {
                cols += self.part_b[u - na].label.len() as i64;
            }
        }
        let w = rows - cols;
        let cap = self.part_a[a].label.len().min(self.part_b[b].label.len()) as i64;
        if w < 0 || w > cap {
            return Err(Error::Degenerate);
        }
        Ok(w as usize)
    }

    /// Splits into connected components, each as its own constraint.
    pub fn components(&self) -> Vec<GraphicalConstraint> {
        let na = self.part_a.len();
        let mut seen = vec![false; self.node_count()];
        let mut out = Vec::new();
        for start in 0..self.node_count() {
            if seen[start] {
                continue;
            }
            let comp = self.component(start, None);
            let mut sub = GraphicalConstraint::empty();
            let mut map = BTreeMap::new();
            for &u in &comp {
                seen[u] = true;
                if u < na {
                    map.insert(u, sub.add_node(Side::A, self.part_a[u].clone()));
                } else {
                    map.insert(u, sub.add_node(Side::B, self.part_b[u - na].clone()));
                }
            }
            for &(a, b) in &self.edges {
                if let (Some(&x), Some(&y)) = (map.get(&a), map.get(&(na + b))) {
                    sub.add_edge(x, y);
                }
            }
            out.push(sub);
        }
        out
    }

    /// Labels renamed through `f`; node ids and shape are kept.
    pub fn relabeled(&self, f: &dyn Fn(&Name) -> Name) -> GraphicalConstraint {
        let ren = |n: &ConstraintNode| {
            let mut label: Vec<Name> = n.label.iter().map(f).collect();
            label.sort();
            ConstraintNode {
                id: n.id.clone(),
                label,
            }
        };
        GraphicalConstraint {
            part_a: self.part_a.iter().map(ren).collect(),
            part_b: self.part_b.iter().map(ren).collect(),
            edges: self.edges.clone(),
        }
    }

    /// Ids replaced by `t1, t2, …` in order A then B.
    pub fn renumbered(&self) -> GraphicalConstraint {
        let mut gc = self.clone();
        for (k, node) in gc.part_a.iter_mut().chain(gc.part_b.iter_mut()).enumerate() {
            node.id = format!("t{}", k + 1);
        }
        gc
    }

    /// Same labelled bipartite graph up to node ids, allowing the two
    /// parts to be swapped.
    pub fn is_isomorphic(&self, o: &GraphicalConstraint) -> bool {
        self.iso_same_sides(o) || self.iso_same_sides(&o.swapped())
    }

    /// Parts exchanged; the determinant is that of the transpose.
    pub fn swapped(&self) -> GraphicalConstraint {
        let mut edges: Vec<(usize, usize)> = self.edges.iter().map(|&(a, b)| (b, a)).collect();
        edges.sort_unstable();
        GraphicalConstraint {
            part_a: self.part_b.clone(),
            part_b: self.part_a.clone(),
            edges,
        }
    }

    fn iso_same_sides(&self, o: &GraphicalConstraint) -> bool {
        if self.part_a.len() != o.part_a.len()
            || self.part_b.len() != o.part_b.len()
            || self.edges.len() != o.edges.len()
        {
            return false;
        }
        let mut ma = vec![usize::MAX; self.part_a.len()];
        let mut mb = vec![usize::MAX; self.part_b.len()];
        self.iso_search(o, 0, &mut ma, &mut mb)
    }

    fn iso_search(
        &self,
        o: &GraphicalConstraint,
        k: usize,
        ma: &mut Vec<usize>,
        mb: &mut Vec<usize>,
    ) -> bool {
        let na = self.part_a.len();
        if k == self.node_count() {
            return self
                .edges
                .iter()
                .all(|&(a, b)| o.has_edge(ma[a], mb[b]));
        }
        let (side, i) = if k < na { (Side::A, k) } else { (Side::B, k - na) };
        let used: Vec<usize> = match side {
            Side::A => ma.clone(),
            Side::B => mb.clone(),
        };
        for j in 0..o.part(side).len() {
            if used.contains(&j) || o.part(side)[j].label != self.part(side)[i].label {
                continue;
            }
            if self.neighbors(side, i).len() != o.neighbors(side, j).len() {
                continue;
            }
            match side {
                Side::A => ma[i] = j,
                Side::B => mb[i] = j,
            }
            // Edges to already-mapped A nodes must be preserved.
            let consistent = side == Side::A
                || (0..na).all(|a| self.has_edge(a, i) == o.has_edge(ma[a], j));
            if consistent && self.iso_search(o, k + 1, ma, mb) {
                return true;
            }
            match side {
                Side::A => ma[i] = usize::MAX,
                Side::B => mb[i] = usize::MAX,
            }
        }
        false
    }

    /// Row slots plus column slots labelled with each variable; equals the
    /// homogeneity signature of a nonzero determinant.
    pub fn slot_signature(&self) -> BTreeMap<Name, u32> {
        let mut sig = BTreeMap::new();
        for node in self.part_a.iter().chain(&self.part_b) {
            for v in &node.label {
                *sig.entry(v.clone()).or_insert(0) += 1;
            }
        }
        sig
    }

    pub fn to_json(&self) -> String {
        let j = ConstraintJson {
            part_a: self.part_a.clone(),
            part_b: self.part_b.clone(),
            edges: self
                .edges
                .iter()
                .map(|&(a, b)| (self.part_a[a].id.clone(), self.part_b[b].id.clone()))
                .collect(),
        };
        serde_json::to_string(&j).expect("constraint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let j: ConstraintJson = serde_json::from_str(text)?;
        let mut part_a = j.part_a;
        let mut part_b = j.part_b;
        for n in part_a.iter_mut().chain(part_b.iter_mut()) {
            n.label.sort();
        }
        let probe = GraphicalConstraint {
            part_a: part_a.clone(),
            part_b: part_b.clone(),
            edges: Vec::new(),
        };
        let mut edges = Vec::new();
        for (x, y) in &j.edges {
            let e = match (probe.find(x), probe.find(y)) {
                (Some((Side::A, a)), Some((Side::B, b))) => (a, b),
                (Some((Side::B, b)), Some((Side::A, a))) => (a, b),
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidConstraint(format!(
                        "edge `{x}`–`{y}` joins nodes of the same part"
                    )))
                }
                _ => {
                    return Err(Error::InvalidConstraint(format!(
                        "edge `{x}`–`{y}` names an unknown node"
                    )))
                }
            };
            edges.push(e);
        }
        Self::new(part_a, part_b, edges)
    }

    /// Human-readable sketch: the two parts on two lines, then the edges.
    pub fn render_text(&self) -> String {
        let show = |n: &ConstraintNode| format!("{}{{{}}}", n.id, n.label.join(","));
        let mut out = String::new();
        let a: Vec<String> = self.part_a.iter().map(show).collect();
        let b: Vec<String> = self.part_b.iter().map(show).collect();
        writeln!(out, "A: {}", a.join("  ")).unwrap();
        writeln!(out, "B: {}", b.join("  ")).unwrap();
        for &(x, y) in &self.edges {
            writeln!(out, "   {} -- {}", self.part_a[x].id, self.part_b[y].id).unwrap();
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Permutations;
    use crate::poly::parse_poly;
    use num_rational::BigRational;
    use proptest::prelude::*;

    pub(crate) fn tetrad() -> GraphicalConstraint {
        GraphicalConstraint::from_labels(&[&["a", "c"]], &[&["b", "c"]], &[(0, 0)]).unwrap()
    }

    pub(crate) fn cyclic_constraint() -> GraphicalConstraint {
        GraphicalConstraint::from_labels(
            &[&["d"], &["a", "b"]],
            &[&["a", "c"], &["d"]],
            &[(0, 0), (1, 0), (1, 1)],
        )
        .unwrap()
    }

    pub(crate) fn bow_free_constraint() -> GraphicalConstraint {
        GraphicalConstraint::from_labels(
            &[&["c"], &["a", "b"]],
            &[&["b", "d"], &["a"]],
            &[(0, 0), (1, 0), (1, 1)],
        )
        .unwrap()
    }

    fn s(a: &str, b: &str) -> Option<Var> {
        Some(Var::new(a, b))
    }

    fn q(n: i64) -> BigRational {
        BigRational::from_integer(n.into())
    }

    fn sigma(pairs: &[(&str, &str, i64)], names: &[&str]) -> CovarianceMatrix {
        let n = names.len();
        let mut m = vec![vec![q(0); n]; n];
        for i in 0..n {
            m[i][i] = q(1);
        }
        for &(a, b, x) in pairs {
            let i = names.iter().position(|&v| v == a).unwrap();
            let j = names.iter().position(|&v| v == b).unwrap();
            m[i][j] = q(x);
            m[j][i] = q(x);
        }
        CovarianceMatrix::new(names.iter().map(|&v| Name::from(v)).collect(), m).unwrap()
    }

    #[test]
    fn tetrad_matrix() {
        let m = tetrad().build_matrix().unwrap();
        assert_eq!(m.entries, vec![vec![s("a", "b"), s("a", "c")], vec![s("c", "b"), s("c", "c")]]);
        let d = m.det_expand(8).unwrap();
        assert_eq!(d, parse_poly("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]"));
    }

    #[test]
    fn cyclic_constraint_matrix() {
        let m = cyclic_constraint().build_matrix().unwrap();
        assert_eq!(
            m.entries,
            vec![
                vec![s("d", "a"), s("d", "c"), None],
                vec![s("a", "a"), s("a", "c"), s("a", "d")],
                vec![s("b", "a"), s("b", "c"), s("b", "d")],
            ]
        );
    }

    #[test]
    fn bow_free_constraint_matrix() {
        let m = bow_free_constraint().build_matrix().unwrap();
        assert_eq!(
            m.entries,
            vec![
                vec![s("c", "b"), s("c", "d"), None],
                vec![s("a", "b"), s("a", "d"), s("a", "a")],
                vec![s("b", "b"), s("b", "d"), s("b", "a")],
            ]
        );
        assert_eq!(m.rows[0], ("a0".to_string(), Name::from("c")));
        let d = m.det_expand(8).unwrap();
        assert_eq!((d.len(), d.degree()), (4, Some(3)));
    }

    #[test]
    fn non_square_reports_both_totals() {
        let gc = GraphicalConstraint::from_labels(&[&["a", "b"]], &[&["c"]], &[(0, 0)]).unwrap();
        assert!(matches!(gc.build_matrix(), Err(Error::NonSquare { rows: 2, cols: 1 })));
    }

    #[test]
    fn validation() {
        assert!(GraphicalConstraint::from_labels(&[&[]], &[&["a"]], &[(0, 0)]).is_err());
        assert!(GraphicalConstraint::from_labels(&[&["a"]], &[&["a"]], &[(0, 1)]).is_err());
    }

    #[test]
    fn normal_form_merges_twin_leaves() {
        let gc = GraphicalConstraint::from_labels(
            &[&["a"], &["b"]],
            &[&["x", "y"]],
            &[(0, 0), (1, 0)],
        )
        .unwrap();
        let nf = gc.normal_form();
        assert_eq!(nf.part_a.len(), 1);
        assert_eq!(nf.part_a[0].label, vec![Name::from("a"), Name::from("b")]);
        assert_eq!(nf.edges, vec![(0, 0)]);
        assert!(bow_free_constraint().is_normal());
        assert_eq!(bow_free_constraint().normal_form(), bow_free_constraint());

        let star = GraphicalConstraint::from_labels(
            &[&["a", "b", "c"]],
            &[&["x"], &["y"]],
            &[(0, 0), (0, 1)],
        )
        .unwrap();
        let nf = star.normal_form();
        assert_eq!(nf.part_b.len(), 1);
        assert_eq!(nf.part_b[0].label, vec![Name::from("x"), Name::from("y")]);
    }

    #[test]
    fn normal_form_preserves_polynomial_up_to_sign() {
        let gc = GraphicalConstraint::from_labels(
            &[&["b"], &["a"], &["c"]],
            &[&["a", "c"], &["d"]],
            &[(0, 0), (1, 0), (2, 0), (2, 1)],
        )
        .unwrap();
        let nf = gc.normal_form();
        assert_eq!(nf.part_a.len(), 2);
        let (p, r) = (gc.polynomial(8).unwrap(), nf.polynomial(8).unwrap());
        assert!(p == r || p == -&r);
    }

    #[test]
    fn satisfies_examples() {
        let gc = tetrad();
        let names = ["a", "b", "c"];
        let on = sigma(&[("a", "b", 2), ("a", "c", 2), ("b", "c", 3)], &names);
        // σ_cc must be 3 for σ_ab σ_cc = σ_ac σ_bc.
        let mut v = on.values().clone();
        v[2][2] = q(3);
        let on = CovarianceMatrix::new(on.names().to_vec(), v).unwrap();
        assert!(gc.satisfies(&on).unwrap());
        assert!(gc.satisfies(&sigma(&[], &names)).unwrap());
        assert!(!gc.satisfies(&sigma(&[("a", "b", 1)], &names)).unwrap());
        assert!(matches!(
            gc.satisfies(&sigma(&[], &["a", "b"])),
            Err(Error::MissingVariable(_))
        ));
    }

    #[test]
    fn edge_weight_examples() {
        let gc = bow_free_constraint();
        assert_eq!(gc.edge_weight(0, 0).unwrap(), 1);
        assert_eq!(gc.edge_weight(1, 0).unwrap(), 1);
        assert_eq!(gc.edge_weight(1, 1).unwrap(), 1);
        assert_eq!(tetrad().edge_weight(0, 0).unwrap(), 2);
        assert!(matches!(gc.edge_weight(0, 1), Err(Error::InvalidConstraint(_))));
        let cyc = GraphicalConstraint::from_labels(
            &[&["a"], &["b"]],
            &[&["c"], &["d"]],
            &[(0, 0), (0, 1), (1, 0), (1, 1)],
        )
        .unwrap();
        assert!(matches!(cyc.edge_weight(0, 0), Err(Error::NotATree)));
        // A leaf with more rows than its neighbour has columns.
        let bad = GraphicalConstraint::from_labels(
            &[&["a", "b"], &["c"]],
            &[&["x"], &["y", "z"]],
            &[(0, 0), (1, 0), (1, 1)],
        )
        .unwrap();
        assert!(matches!(bad.edge_weight(0, 0), Err(Error::Degenerate)));
        assert!(bad.is_degenerate().unwrap());
    }

    /// Counts, over every structurally nonzero permutation, the entries
    /// taken from the block of each edge.
    fn permutation_weights(gc: &GraphicalConstraint) -> Option<BTreeMap<(usize, usize), usize>> {
        let m = gc.build_matrix().unwrap();
        let row_node: Vec<usize> = gc
            .part_a
            .iter()
            .enumerate()
            .flat_map(|(i, n)| std::iter::repeat(i).take(n.label.len()))
            .collect();
        let col_node: Vec<usize> = gc
            .part_b
            .iter()
            .enumerate()
            .flat_map(|(i, n)| std::iter::repeat(i).take(n.label.len()))
            .collect();
        let mut common: Option<BTreeMap<(usize, usize), usize>> = None;
        for perm in Permutations::new(m.dim()) {
            if (0..m.dim()).any(|r| m.entries[r][perm[r]].is_none()) {
                continue;
            }
            let mut counts: BTreeMap<(usize, usize), usize> =
                gc.edges.iter().map(|&e| (e, 0)).collect();
            for r in 0..m.dim() {
                *counts.get_mut(&(row_node[r], col_node[perm[r]])).unwrap() += 1;
            }
            match &common {
                None => common = Some(counts),
                Some(c) => assert_eq!(c, &counts, "weights differ between terms"),
            }
        }
        common
    }

    fn random_tree() -> impl Strategy<Value = GraphicalConstraint> {
        // Prüfer-free construction: node k attaches to an earlier node of the
        // other part; labels drawn from a small alphabet.
        let names = ["a", "b", "c", "d", "e"];
        (2usize..6, prop::collection::vec((0usize..100, 1usize..3, 0usize..5), 5))
            .prop_map(move |(size, spec)| {
                let mut gc = GraphicalConstraint::empty();
                let mut sides = Vec::new();
                for (k, &(parent, len, start)) in spec.iter().take(size).enumerate() {
                    let label: Vec<&str> = (0..len).map(|i| names[(start + i) % 5]).collect();
                    let side = if k == 0 {
                        Side::A
                    } else {
                        let (ps, _) = sides[parent % k];
                        match ps {
                            Side::A => Side::B,
                            Side::B => Side::A,
                        }
                    };
                    let idx = gc.add_node(side, ConstraintNode::new(format!("t{k}"), &label));
                    if k > 0 {
                        let (ps, pi) = sides[parent % k];
                        match ps {
                            Side::A => gc.add_edge(pi, idx),
                            Side::B => gc.add_edge(idx, pi),
                        }
                    }
                    sides.push((side, idx));
                }
                gc
            })
            .prop_filter("square", |gc| gc.is_square() && gc.row_count() <= 5)
    }

    #[test]
    fn edge_weights_match_permutation_oracle_on_worked_examples() {
        for gc in [tetrad(), cyclic_constraint(), bow_free_constraint()] {
            let w = permutation_weights(&gc).unwrap();
            for (&(a, b), &count) in &w {
                assert_eq!(gc.edge_weight(a, b).unwrap(), count);
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn edge_weight_matches_permutation_oracle(gc in random_tree()) {
            match permutation_weights(&gc) {
                Some(w) => {
                    for (&(a, b), &count) in &w {
                        prop_assert_eq!(gc.edge_weight(a, b).unwrap(), count);
                    }
                }
                None => prop_assert!(gc.is_degenerate().unwrap()),
            }
        }

        #[test]
        fn homogeneity_matches_slots(gc in random_tree()) {
            let p = gc.polynomial(8).unwrap();
            if !p.is_zero() {
                let sig = p.homogeneity_signature().unwrap();
                prop_assert_eq!(sig, gc.slot_signature());
            }
        }

        #[test]
        fn normal_form_preserves_satisfaction(gc in random_tree(), seed in 0u64..1000) {
            let names: Vec<Name> = ["a", "b", "c", "d", "e"].iter().map(|&v| Name::from(v)).collect();
            let n = names.len();
            let mut m = vec![vec![q(0); n]; n];
            for i in 0..n {
                for j in i..n {
                    let x = q(((seed as i64 + 7 * i as i64 + 13 * j as i64) % 5) - 2);
                    m[i][j] = x.clone();
                    m[j][i] = x;
                }
                m[i][i] = q(3);
            }
            let sigma = CovarianceMatrix::new(names, m).unwrap();
            prop_assert_eq!(gc.satisfies(&sigma).unwrap(), gc.normal_form().satisfies(&sigma).unwrap());
        }
    }

    #[test]
    fn row_order_changes_sign_only() {
        let gc = cyclic_constraint();
        let p = gc.polynomial(8).unwrap();
        let mut flipped = gc.clone();
        flipped.part_a.swap(0, 1);
        flipped.edges = gc.edges.iter().map(|&(a, b)| (1 - a, b)).collect();
        flipped.edges.sort_unstable();
        let r = flipped.polynomial(8).unwrap();
        assert!(p == r || p == -&r);
        assert!(gc.is_isomorphic(&flipped));
        let t = gc.swapped().polynomial(8).unwrap();
        assert!(p == t || p == -&t);
    }

    #[test]
    fn isomorphism_ignores_ids_but_not_labels() {
        let a = bow_free_constraint();
        let b = a.renumbered().swapped();
        assert!(a.is_isomorphic(&b));
        assert!(!a.is_isomorphic(&cyclic_constraint()));
    }

    #[test]
    fn json_round_trip() {
        let gc = bow_free_constraint().renumbered();
        let text = gc.to_json();
        assert!(text.starts_with(r#"{"partA":[{"id":"t1","label":["c"]}"#));
        assert_eq!(GraphicalConstraint::from_json(&text).unwrap(), gc);
        assert!(GraphicalConstraint::from_json(
            r#"{"partA":[{"id":"x","label":["a"]}],"partB":[],"edges":[["x","y"]]}"#
        )
        .is_err());
    }

    #[test]
    fn components_split() {
        let gc = GraphicalConstraint::from_labels(
            &[&["a"], &["b"]],
            &[&["a"], &["b"]],
            &[(0, 0), (1, 1)],
        )
        .unwrap();
        let parts = gc.components();
        assert_eq!(parts.len(), 2);
        let prod = &parts[0].polynomial(8).unwrap() * &parts[1].polynomial(8).unwrap();
        assert_eq!(prod, gc.polynomial(8).unwrap());
    }
}

#[cfg(test)]
pub(crate) use tests::{tetrad, cyclic_constraint, bow_free_constraint};
