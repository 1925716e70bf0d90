//! Mixed graphs `G = (V, D, B)`: directed edges carry structural coefficients,
//! bidirected edges carry noise correlations.
//!
//! Nodes are named by strings but stored as dense indices assigned in sorted
//! name order, so every downstream matrix has a reproducible row order.

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

pub type Name = Arc<str>;

/// Largest node count representable by [`NodeSet`].
pub const MAX_NODES: usize = 64;

/// Largest node count accepted by [`MixedGraph::canonical_form`].
pub const CANONICAL_MAX_NODES: usize = 7;

/// A set of node indices, one bit per node.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct NodeSet(pub u64);

impl NodeSet {
    pub const EMPTY: NodeSet = NodeSet(0);

    pub fn single(i: usize) -> Self {
        NodeSet(1 << i)
    }

    pub fn from_indices<I: IntoIterator<Item = usize>>(it: I) -> Self {
        it.into_iter().fold(NodeSet::EMPTY, |s, i| s.with(i))
    }

    pub fn contains(self, i: usize) -> bool {
        self.0 >> i & 1 == 1
    }

    pub fn with(self, i: usize) -> Self {
        NodeSet(self.0 | 1 << i)
    }

    pub fn without(self, i: usize) -> Self {
        NodeSet(self.0 & !(1 << i))
    }

    pub fn union(self, o: Self) -> Self {
        NodeSet(self.0 | o.0)
    }

    pub fn intersect(self, o: Self) -> Self {
        NodeSet(self.0 & o.0)
    }

    pub fn minus(self, o: Self) -> Self {
        NodeSet(self.0 & !o.0)
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_subset(self, o: Self) -> bool {
        self.0 & !o.0 == 0
    }

    /// Indices in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let i = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(i)
            }
        })
    }
}

impl fmt::Debug for NodeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

#[derive(Clone, PartialEq, Eq)]
pub struct MixedGraph {
    names: Vec<Name>,
    directed: Vec<(usize, usize)>,
    bidirected: Vec<(usize, usize)>,
    parents: Vec<NodeSet>,
    children: Vec<NodeSet>,
    siblings: Vec<NodeSet>,
    htr: Vec<NodeSet>,
}

impl fmt::Debug for MixedGraph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MixedGraph({:?})", self.to_text())
    }
}

impl MixedGraph {
    /// Builds a graph from node names and edge lists given by name.
    pub fn new<S: AsRef<str>>(
        nodes: &[S],
        directed: &[(S, S)],
        bidirected: &[(S, S)],
    ) -> Result<Self> {
        let mut names: Vec<Name> = nodes.iter().map(|s| Name::from(s.as_ref())).collect();
        names.sort();
        names.dedup();
        for name in &names {
            check_name(name).map_err(Error::Unsupported)?;
        }
        let lookup = |s: &S| -> Result<usize> {
            names
                .binary_search_by(|n| (**n).cmp(s.as_ref()))
                .map_err(|_| Error::UnknownNode(s.as_ref().to_string()))
        };
        let mut d = Vec::with_capacity(directed.len());
        for (t, h) in directed {
            d.push((lookup(t)?, lookup(h)?));
        }
        let mut b = Vec::with_capacity(bidirected.len());
        for (x, y) in bidirected {
            b.push((lookup(x)?, lookup(y)?));
        }
        Self::from_indices(names, d, b)
    }

    /// Builds a graph over already-sorted `names` with edges given by index.
    pub fn from_indices(
        names: Vec<Name>,
        mut directed: Vec<(usize, usize)>,
        bidirected: Vec<(usize, usize)>,
    ) -> Result<Self> {
        let n = names.len();
        if n > MAX_NODES {
            return Err(Error::Unsupported(format!(
                "{n} nodes exceed the limit of {MAX_NODES}"
            )));
        }
        debug_assert!(names.windows(2).all(|w| w[0] < w[1]));
        for &(t, h) in &directed {
            if t == h {
                return Err(Error::InvalidGraph(format!(
                    "self-loop on `{}`",
                    names[t]
                )));
            }
        }
        let mut bi: Vec<(usize, usize)> = bidirected
            .into_iter()
            .map(|(x, y)| (x.min(y), x.max(y)))
            .collect();
        if let Some(&(x, _)) = bi.iter().find(|(x, y)| x == y) {
            return Err(Error::InvalidGraph(format!(
                "bidirected self-loop on `{}`",
                names[x]
            )));
        }
        directed.sort_unstable();
        directed.dedup();
        bi.sort_unstable();
        bi.dedup();

        let mut parents = vec![NodeSet::EMPTY; n];
        let mut children = vec![NodeSet::EMPTY; n];
        let mut siblings = vec![NodeSet::EMPTY; n];
        for &(t, h) in &directed {
            parents[h] = parents[h].with(t);
            children[t] = children[t].with(h);
        }
        for &(x, y) in &bi {
            siblings[x] = siblings[x].with(y);
            siblings[y] = siblings[y].with(x);
        }
        let htr = (0..n)
            .map(|v| {
                // First step: any child or sibling. Afterwards only directed edges.
                let mut reach = children[v].union(siblings[v]);
                loop {
                    let next = reach
                        .iter()
                        .fold(reach, |acc, u| acc.union(children[u]));
                    if next == reach {
                        break reach;
                    }
                    reach = next;
                }
            })
            .collect();
        Ok(MixedGraph {
            names,
            directed,
            bidirected: bi,
            parents,
            children,
            siblings,
            htr,
        })
    }

    /// Parses the line-oriented graph file format.
    pub fn parse(text: &str) -> Result<Self> {
        let mut nodes: Option<(Vec<String>, usize)> = None;
        let mut dir: Vec<(String, String, usize)> = Vec::new();
        let mut bi: Vec<(String, String, usize)> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut toks = line.split_whitespace();
            let kw = toks.next().unwrap_or_default();
            let args: Vec<&str> = toks.collect();
            let perr = |msg: String| Error::Parse { line: line_no, msg };
            match kw {
                "nodes" => {
                    if nodes.is_some() {
                        return Err(perr("duplicate `nodes` line".into()));
                    }
                    if !dir.is_empty() || !bi.is_empty() {
                        return Err(perr("`nodes` must come before edges".into()));
                    }
                    let mut seen = BTreeSet::new();
                    for a in &args {
                        check_name(a).map_err(perr)?;
                        if !seen.insert(*a) {
                            return Err(Error::Parse {
                                line: line_no,
                                msg: format!("duplicate node `{a}`"),
                            });
                        }
                    }
                    nodes = Some((args.iter().map(|s| s.to_string()).collect(), line_no));
                }
                "dir" | "bi" => {
                    if nodes.is_none() {
                        return Err(perr("first line must declare `nodes`".into()));
                    }
                    if args.len() != 2 {
                        return Err(perr(format!("`{kw}` takes exactly two nodes")));
                    }
                    if args[0] == args[1] {
                        return Err(perr(format!("self-loop on `{}`", args[0])));
                    }
                    let declared = &nodes.as_ref().unwrap().0;
                    for a in &args {
                        if !declared.iter().any(|d| d == a) {
                            return Err(perr(format!("unknown node `{a}`")));
                        }
                    }
                    let e = (args[0].to_string(), args[1].to_string(), line_no);
                    if kw == "dir" {
                        dir.push(e);
                    } else {
                        bi.push(e);
                    }
                }
                other => return Err(perr(format!("unrecognised keyword `{other}`"))),
            }
        }
        let (names, _) = nodes.ok_or(Error::Parse {
            line: 0,
            msg: "missing `nodes` line".into(),
        })?;
        let d: Vec<(String, String)> = dir.into_iter().map(|(a, b, _)| (a, b)).collect();
        let b: Vec<(String, String)> = bi.into_iter().map(|(a, b, _)| (a, b)).collect();
        Self::new(&names, &d, &b)
    }

    /// Serializes to the graph file format: nodes sorted, then sorted `dir`
    /// lines, then sorted `bi` lines.
    pub fn to_text(&self) -> String {
        let mut out = String::from("nodes");
        for n in &self.names {
            out.push(' ');
            out.push_str(n);
        }
        out.push('\n');
        for &(t, h) in &self.directed {
            out.push_str(&format!("dir {} {}\n", self.names[t], self.names[h]));
        }
        for &(x, y) in &self.bidirected {
            out.push_str(&format!("bi {} {}\n", self.names[x], self.names[y]));
        }
        out
    }

    pub fn n(&self) -> usize {
        self.names.len()
    }

    pub fn names(&self) -> &[Name] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &Name {
        &self.names[i]
    }

    pub fn index(&self, name: &str) -> Result<usize> {
        self.names
            .binary_search_by(|n| (**n).cmp(name))
            .map_err(|_| Error::UnknownNode(name.to_string()))
    }

    pub fn all_nodes(&self) -> NodeSet {
        if self.n() == 64 {
            NodeSet(u64::MAX)
        } else {
            NodeSet((1u64 << self.n()) - 1)
        }
    }

    pub fn directed_edges(&self) -> &[(usize, usize)] {
        &self.directed
    }

    pub fn bidirected_edges(&self) -> &[(usize, usize)] {
        &self.bidirected
    }

    pub fn edge_count(&self) -> usize {
        self.directed.len() + self.bidirected.len()
    }

    pub fn parents(&self, v: usize) -> NodeSet {
        self.parents[v]
    }

    pub fn children(&self, v: usize) -> NodeSet {
        self.children[v]
    }

    pub fn siblings(&self, v: usize) -> NodeSet {
        self.siblings[v]
    }

    pub fn has_directed(&self, t: usize, h: usize) -> bool {
        self.parents[h].contains(t)
    }

    pub fn has_bidirected(&self, x: usize, y: usize) -> bool {
        self.siblings[x].contains(y)
    }

    /// Nodes reachable from `v` by a nonempty half-trek. `v` itself belongs
    /// to the set only when some half-trek returns to it through a directed
    /// cycle.
    pub fn htr(&self, v: usize) -> NodeSet {
        self.htr[v]
    }

    pub fn parents_of(&self, v: &str) -> Result<Vec<Name>> {
        let i = self.index(v)?;
        Ok(self.names_of(self.parents(i)))
    }

    pub fn htr_of(&self, v: &str) -> Result<Vec<Name>> {
        let i = self.index(v)?;
        Ok(self.names_of(self.htr(i)))
    }

    pub fn names_of(&self, set: NodeSet) -> Vec<Name> {
        set.iter().map(|i| self.names[i].clone()).collect()
    }

    pub fn set_of<S: AsRef<str>>(&self, names: &[S]) -> Result<NodeSet> {
        names
            .iter()
            .try_fold(NodeSet::EMPTY, |s, n| Ok(s.with(self.index(n.as_ref())?)))
    }

    /// Strict directed descendants of every node.
    pub fn descendants(&self) -> Vec<NodeSet> {
        (0..self.n())
            .map(|v| {
                let mut reach = self.children[v];
                loop {
                    let next = reach
                        .iter()
                        .fold(reach, |acc, u| acc.union(self.children[u]));
                    if next == reach {
                        break reach;
                    }
                    reach = next;
                }
            })
            .collect()
    }

    /// A topological order of the directed part, or `None` if it has a cycle.
    /// Among available nodes the smallest index goes first.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let n = self.n();
        let mut indeg: Vec<usize> = (0..n).map(|v| self.parents[v].len()).collect();
        let mut done = NodeSet::EMPTY;
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n).find(|&v| !done.contains(v) && indeg[v] == 0)?;
            done = done.with(next);
            order.push(next);
            for c in self.children[next].iter() {
                indeg[c] -= 1;
            }
        }
        Some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    pub fn is_bow_free(&self) -> bool {
        (0..self.n()).all(|v| {
            self.siblings[v]
                .intersect(self.parents[v].union(self.children[v]))
                .is_empty()
        })
    }

    /// Acyclic, no bidirected edge between a node and one of its ancestors,
    /// and `pa(v) ∩ htr(v) = ∅` for every `v`.
    pub fn is_ancestral(&self) -> bool {
        if !self.is_acyclic() {
            return false;
        }
        let de = self.descendants();
        for &(x, y) in &self.bidirected {
            if de[x].contains(y) || de[y].contains(x) {
                return false;
            }
        }
        (0..self.n()).all(|v| self.parents[v].intersect(self.htr[v]).is_empty())
    }

    /// Same structure with node `i` renamed to `names[perm[i]]`; `names`
    /// must be sorted.
    pub fn relabel(&self, perm: &[usize], names: Vec<Name>) -> Result<Self> {
        let d = self.directed.iter().map(|&(t, h)| (perm[t], perm[h])).collect();
        let b = self
            .bidirected
            .iter()
            .map(|&(x, y)| (perm[x], perm[y]))
            .collect();
        Self::from_indices(names, d, b)
    }

    /// Structural code of the graph after mapping node `i` to `perm[i]`.
    fn code_under(&self, perm: &[usize]) -> u128 {
        let n = self.n();
        let mut code = 0u128;
        for &(t, h) in &self.directed {
            code |= 1u128 << (perm[t] * n + perm[h]);
        }
        for &(x, y) in &self.bidirected {
            let (a, b) = (perm[x].min(perm[y]), perm[x].max(perm[y]));
            code |= 1u128 << (n * n + pair_index(n, a, b));
        }
        code
    }

    /// Canonical label: equal for two graphs iff some node bijection maps
    /// one's directed and bidirected edges onto the other's. Brute force
    /// over all permutations, so limited to small graphs.
    pub fn canonical_form(&self) -> Result<String> {
        let (code, _) = self.canonical_code()?;
        Ok(format!("{}:{:x}", self.n(), code))
    }

    /// Minimal structural code and a permutation attaining it.
    pub fn canonical_code(&self) -> Result<(u128, Vec<usize>)> {
        let n = self.n();
        if n > CANONICAL_MAX_NODES {
            return Err(Error::Unsupported(format!(
                "canonical form needs n <= {CANONICAL_MAX_NODES}, got {n}"
            )));
        }
        let mut best: Option<(u128, Vec<usize>)> = None;
        for perm in Permutations::new(n) {
            let c = self.code_under(&perm);
            if best.as_ref().is_none_or(|(b, _)| c < *b) {
                best = Some((c, perm));
            }
        }
        Ok(best.unwrap_or((0, Vec::new())))
    }
}

fn check_name(s: &str) -> std::result::Result<(), String> {
    if s.is_empty() || s.chars().any(|c| c.is_whitespace() || "#,[]\"".contains(c)) {
        Err(format!("invalid node name `{s}`"))
    } else {
        Ok(())
    }
}

/// Index of the unordered pair `a < b` among the `C(n, 2)` pairs in
/// lexicographic order.
pub fn pair_index(n: usize, a: usize, b: usize) -> usize {
    debug_assert!(a < b && b < n);
    a * (2 * n - a - 1) / 2 + (b - a - 1)
}

/// Default node names `a, b, c, ...` for `n ≤ 26` nodes, sorted.
pub fn default_names(n: usize) -> Vec<Name> {
    (0..n)
        .map(|i| Name::from(((b'a' + i as u8) as char).to_string()))
        .collect()
}

/// All permutations of `0..n` in lexicographic order.
pub struct Permutations {
    next: Option<Vec<usize>>,
}

impl Permutations {
    pub fn new(n: usize) -> Self {
        Permutations {
            next: Some((0..n).collect()),
        }
    }
}

impl Iterator for Permutations {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let cur = self.next.take()?;
        let mut p = cur.clone();
        let n = p.len();
        if n > 1 {
            if let Some(i) = (0..n - 1).rev().find(|&i| p[i] < p[i + 1]) {
                let j = (i + 1..n).rev().find(|&j| p[j] > p[i]).unwrap();
                p.swap(i, j);
                p[i + 1..].reverse();
                self.next = Some(p);
            }
        }
        Some(cur)
    }
}

/// Which mixed graphs an enumeration emits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EnumerationSpec {
    pub nodes: usize,
    pub edges: usize,
    pub allow_bows: bool,
    pub allow_cycles: bool,
}

// Per unordered pair {i < j}: bit 0 is i -> j, bit 1 is j -> i, bit 2 is i <-> j.
const PAIR_STATES: [u8; 8] = [0, 1, 2, 4, 3, 5, 6, 7];

impl EnumerationSpec {
    fn allowed_states(&self) -> Vec<u8> {
        PAIR_STATES
            .iter()
            .copied()
            .filter(|&s| self.allow_cycles || s & 3 != 3)
            .filter(|&s| self.allow_bows || s & 4 == 0 || s & 3 == 0)
            .collect()
    }

    /// Size of the index space walked by the enumerator.
    pub fn index_space(&self) -> u64 {
        let pairs = self.nodes * self.nodes.saturating_sub(1) / 2;
        (self.allowed_states().len() as u64).pow(pairs as u32)
    }

    /// All labelled graphs (nodes `a, b, ...`) with exactly `edges` edges.
    pub fn iter(&self) -> GraphEnumeration {
        self.shard(0, self.index_space())
    }

    /// Graphs whose enumeration index lies in `start..end`. Shards over
    /// disjoint ranges partition the full enumeration.
    pub fn shard(&self, start: u64, end: u64) -> GraphEnumeration {
        GraphEnumeration {
            spec: *self,
            states: self.allowed_states(),
            names: default_names(self.nodes),
            pos: start,
            end: end.min(self.index_space()),
        }
    }
}

/// Deterministic stream of labelled mixed graphs.
pub struct GraphEnumeration {
    spec: EnumerationSpec,
    states: Vec<u8>,
    names: Vec<Name>,
    pos: u64,
    end: u64,
}

impl GraphEnumeration {
    fn decode(&self, mut idx: u64) -> Option<MixedGraph> {
        let n = self.spec.nodes;
        let radix = self.states.len() as u64;
        let mut d = Vec::new();
        let mut b = Vec::new();
        let mut count = 0;
        for i in 0..n {
            for j in i + 1..n {
                let s = self.states[(idx % radix) as usize];
                idx /= radix;
                count += s.count_ones() as usize;
                if count > self.spec.edges {
                    return None;
                }
                if s & 1 != 0 {
                    d.push((i, j));
                }
                if s & 2 != 0 {
                    d.push((j, i));
                }
                if s & 4 != 0 {
                    b.push((i, j));
                }
            }
        }
        if count != self.spec.edges {
            return None;
        }
        let g = MixedGraph::from_indices(self.names.clone(), d, b).ok()?;
        if !self.spec.allow_cycles && !g.is_acyclic() {
            return None;
        }
        Some(g)
    }
}

impl Iterator for GraphEnumeration {
    type Item = MixedGraph;

    fn next(&mut self) -> Option<MixedGraph> {
        while self.pos < self.end {
            let idx = self.pos;
            self.pos += 1;
            if let Some(g) = self.decode(idx) {
                return Some(g);
            }
        }
        None
    }
}

/// Convenience wrapper over [`EnumerationSpec::iter`].
pub fn enumerate_graphs(
    nodes: usize,
    edges: usize,
    allow_bows: bool,
    allow_cycles: bool,
) -> GraphEnumeration {
    EnumerationSpec {
        nodes,
        edges,
        allow_bows,
        allow_cycles,
    }
    .iter()
}


#[cfg(test)]
pub(crate) use tests::{cyclic_graph, bow_free_graph};
