//! Half-trek criterion: admissible sets `Y_v`, identifying families and
//! the node pairs that carry a constraint.
//!
//! `Y_v` is admissible for `v` when `|Y_v| = |pa(v)|`, `Y_v` avoids `v` and
//! its siblings, and there is a system of half-treks from `Y_v` to `pa(v)`
//! whose right sides are pairwise disjoint. A family is identifying when in
//! addition some total order puts every `y ∈ Y_v ∩ htr(v)` before `v`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{MixedGraph, NodeSet};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IdentifyingFamily {
    /// `sets[v]` is `Y_v`.
    pub sets: Vec<NodeSet>,
    /// Identification order, a permutation of the node indices.
    pub order: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct FamilyJson {
    order: Vec<String>,
    sets: BTreeMap<String, Vec<String>>,
}

impl IdentifyingFamily {
    /// `Y_v = pa(v)` for every node, with an order honouring the
    /// half-trek dependencies, if one exists.
    pub fn parents(g: &MixedGraph) -> Option<IdentifyingFamily> {
        let sets: Vec<NodeSet> = (0..g.n()).map(|v| g.parents(v)).collect();
        let order = dependency_order(g, &sets)?;
        Some(IdentifyingFamily { sets, order })
    }

    pub fn from_names(g: &MixedGraph, sets: &[(&str, &[&str])], order: &[&str]) -> Result<Self> {
        let mut out = vec![None; g.n()];
        for (v, ys) in sets {
            let i = g.index(v)?;
            if out[i].is_some() {
                return Err(Error::InvalidFamily(format!("duplicate entry for `{v}`")));
            }
            out[i] = Some(g.set_of(ys)?);
        }
        let sets = out
            .into_iter()
            .enumerate()
            .map(|(i, s)| {
                s.ok_or_else(|| Error::InvalidFamily(format!("no set for `{}`", g.name(i))))
            })
            .collect::<Result<Vec<_>>>()?;
        let order = order.iter().map(|v| g.index(v)).collect::<Result<Vec<_>>>()?;
        Ok(IdentifyingFamily { sets, order })
    }

    pub fn to_json(&self, g: &MixedGraph) -> String {
        let j = FamilyJson {
            order: self.order.iter().map(|&v| g.name(v).to_string()).collect(),
            sets: (0..g.n())
                .map(|v| {
                    (
                        g.name(v).to_string(),
                        self.sets[v].iter().map(|y| g.name(y).to_string()).collect(),
                    )
                })
                .collect(),
        };
        serde_json::to_string(&j).expect("family serializes")
    }

    pub fn from_json(g: &MixedGraph, text: &str) -> Result<Self> {
        let j: FamilyJson = serde_json::from_str(text)?;
        let sets: Vec<(&str, Vec<&str>)> = j
            .sets
            .iter()
            .map(|(k, v)| (k.as_str(), v.iter().map(String::as_str).collect()))
            .collect();
        let borrowed: Vec<(&str, &[&str])> =
            sets.iter().map(|(k, v)| (*k, v.as_slice())).collect();
        let order: Vec<&str> = j.order.iter().map(String::as_str).collect();
        Self::from_names(g, &borrowed, &order)
    }

    /// Position of every node in the identification order.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![usize::MAX; self.order.len()];
        for (i, &v) in self.order.iter().enumerate() {
            pos[v] = i;
        }
        pos
    }
}

/// A total order putting each `y ∈ sets[v] ∩ htr(v)` before `v`; smallest
/// available index first. `None` if the dependencies are cyclic.
pub fn dependency_order(g: &MixedGraph, sets: &[NodeSet]) -> Option<Vec<usize>> {
    let n = g.n();
    let deps: Vec<NodeSet> = (0..n).map(|v| sets[v].intersect(g.htr(v))).collect();
    let mut done = NodeSet::EMPTY;
    let mut order = Vec::with_capacity(n);
    while order.len() < n {
        let v = (0..n).find(|&v| !done.contains(v) && deps[v].is_subset(done))?;
        done = done.with(v);
        order.push(v);
    }
    Some(order)
}

/// Unit-capacity flow network for half-trek systems.
struct FlowNet {
    cap: Vec<Vec<u8>>,
}

impl FlowNet {
    fn max_flow(&mut self, s: usize, t: usize) -> usize {
        let n = self.cap.len();
        let mut flow = 0;
        loop {
            let mut prev = vec![usize::MAX; n];
            prev[s] = s;
            let mut stack = vec![s];
            while let Some(u) = stack.pop() {
                if u == t {
                    break;
                }
                for w in 0..n {
                    if prev[w] == usize::MAX && self.cap[u][w] > 0 {
                        prev[w] = u;
                        stack.push(w);
                    }
                }
            }
            if prev[t] == usize::MAX {
                return flow;
            }
            let mut w = t;
            while w != s {
                let u = prev[w];
                self.cap[u][w] -= 1;
                self.cap[w][u] += 1;
                w = u;
            }
            flow += 1;
        }
    }
}

/// Maximum number of half-treks with pairwise disjoint right sides from
/// distinct nodes of `sources` to distinct nodes of `targets`, and the set of
/// sources used by one maximum system.
pub fn max_half_trek_system(g: &MixedGraph, sources: NodeSet, targets: NodeSet) -> (usize, NodeSet) {
    let n = g.n();
    // 0: source, 1: sink, L(w) = 2 + w, Rin(w) = 2 + n + w, Rout(w) = 2 + 2n + w.
    let (s, t) = (0, 1);
    let l = |w: usize| 2 + w;
    let rin = |w: usize| 2 + n + w;
    let rout = |w: usize| 2 + 2 * n + w;
    let size = 2 + 3 * n;
    let mut net = FlowNet {
        cap: vec![vec![0; size]; size],
    };
    for y in sources.iter() {
        net.cap[s][l(y)] = 1;
    }
    for w in 0..n {
        net.cap[l(w)][rin(w)] = 1;
        for u in g.siblings(w).iter() {
            net.cap[l(w)][rin(u)] = 1;
        }
        net.cap[rin(w)][rout(w)] = 1;
        for u in g.children(w).iter() {
            net.cap[rout(w)][rin(u)] = 1;
        }
    }
    for p in targets.iter() {
        net.cap[rout(p)][t] = 1;
    }
    let flow = net.max_flow(s, t);
    // A source carries flow iff its source edge is saturated.
    let used = NodeSet::from_indices(sources.iter().filter(|&y| net.cap[s][l(y)] == 0));
    (flow, used)
}

/// Admissibility of `y` as `Y_v`, ignoring the identification order.
pub fn is_admissible(g: &MixedGraph, v: usize, y: NodeSet) -> bool {
    let pa = g.parents(v);
    if y.len() != pa.len() || y.contains(v) || !y.intersect(g.siblings(v)).is_empty() {
        return false;
    }
    max_half_trek_system(g, y, pa).0 == pa.len()
}

/// All `k`-subsets of `pool` in lexicographic order of their sorted elements.
pub fn subsets_of_size(pool: NodeSet, k: usize) -> Vec<NodeSet> {
    let elems: Vec<usize> = pool.iter().collect();
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    if k > elems.len() {
        return out;
    }
    loop {
        out.push(NodeSet::from_indices(idx.iter().map(|&i| elems[i])));
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + elems.len() - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Every admissible `Y_v`: `pa(v)` first when admissible, the rest in
/// lexicographic order.
pub fn admissible_sets(g: &MixedGraph, v: usize) -> Vec<NodeSet> {
    let pa = g.parents(v);
    let pool = g.all_nodes().without(v).minus(g.siblings(v));
    let mut out: Vec<NodeSet> = Vec::new();
    if is_admissible(g, v, pa) {
        out.push(pa);
    }
    out.extend(
        subsets_of_size(pool, pa.len())
            .into_iter()
            .filter(|&y| y != pa && is_admissible(g, v, y)),
    );
    out
}

/// Checks every invariant of an identifying family against `g`.
pub fn validate_family(g: &MixedGraph, fam: &IdentifyingFamily) -> Result<bool> {
    let n = g.n();
    if fam.sets.len() != n {
        return Err(Error::InvalidFamily(format!(
            "{} sets for {n} nodes",
            fam.sets.len()
        )));
    }
    let mut seen = NodeSet::EMPTY;
    for &v in &fam.order {
        if v >= n || seen.contains(v) {
            return Err(Error::InvalidFamily("order is not a permutation of the nodes".into()));
        }
        seen = seen.with(v);
    }
    if seen != g.all_nodes() {
        return Err(Error::InvalidFamily("order is not a permutation of the nodes".into()));
    }
    if fam.sets.iter().any(|s| !s.is_subset(g.all_nodes())) {
        return Ok(false);
    }
    let pos = fam.positions();
    for v in 0..n {
        let y = fam.sets[v];
        if !is_admissible(g, v, y) {
            return Ok(false);
        }
        if y.intersect(g.htr(v)).iter().any(|w| pos[w] > pos[v]) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Greedy search: repeatedly solve any node whose admissible set can be
/// drawn from already-solved nodes or nodes outside its `htr`. Prefers
/// `Y_v = pa(v)`, otherwise the lexicographically smallest admissible set.
pub fn find_identifying_family(g: &MixedGraph) -> Option<IdentifyingFamily> {
    let n = g.n();
    let mut sets = vec![NodeSet::EMPTY; n];
    let mut solved = NodeSet::EMPTY;
    let mut order = Vec::with_capacity(n);
    loop {
        let mut progress = false;
        for v in 0..n {
            if solved.contains(v) {
                continue;
            }
            let pa = g.parents(v);
            let allowed = g
                .all_nodes()
                .without(v)
                .minus(g.siblings(v))
                .minus(g.htr(v).minus(solved));
            let chosen = if pa.is_subset(allowed) {
                Some(pa)
            } else if max_half_trek_system(g, allowed, pa).0 < pa.len() {
                None
            } else {
                subsets_of_size(allowed, pa.len())
                    .into_iter()
                    .find(|&y| is_admissible(g, v, y))
            };
            if let Some(y) = chosen {
                sets[v] = y;
                solved = solved.with(v);
                order.push(v);
                progress = true;
            }
        }
        if order.len() == n {
            return Some(IdentifyingFamily { sets, order });
        }
        if !progress {
            return None;
        }
    }
}

pub fn is_htc_identifiable(g: &MixedGraph) -> bool {
    find_identifying_family(g).is_some()
}

/// Pairs `v < w` with no `v ↔ w`, `v ∉ Y_w` and `w ∉ Y_v`.
pub fn constraint_pairs(g: &MixedGraph, fam: &IdentifyingFamily) -> Vec<(usize, usize)> {
    let n = g.n();
    let mut out = Vec::new();
    for v in 0..n {
        for w in v + 1..n {
            if !g.has_bidirected(v, w) && !fam.sets[w].contains(v) && !fam.sets[v].contains(w) {
                out.push((v, w));
            }
        }
    }
    out
}

/// Distinct identifying families in a deterministic order, at most `limit`.
pub fn enumerate_identifying_families(
    g: &MixedGraph,
    limit: usize,
) -> impl Iterator<Item = IdentifyingFamily> + '_ {
    let candidates: Vec<Vec<NodeSet>> = (0..g.n()).map(|v| admissible_sets(g, v)).collect();
    let exhausted = candidates.iter().any(Vec::is_empty);
    let mut odometer = vec![0usize; g.n()];
    let mut done = exhausted;
    std::iter::from_fn(move || {
        while !done {
            let sets: Vec<NodeSet> = odometer
                .iter()
                .zip(&candidates)
                .map(|(&i, c)| c[i])
                .collect();
            // advance
            let mut k = odometer.len();
            loop {
                if k == 0 {
                    done = true;
                    break;
                }
                k -= 1;
                odometer[k] += 1;
                if odometer[k] < candidates[k].len() {
                    break;
                }
                odometer[k] = 0;
            }
            if let Some(order) = dependency_order(g, &sets) {
                return Some(IdentifyingFamily { sets, order });
            }
        }
        None
    })
    .take(limit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_graphs, cyclic_graph, bow_free_graph};

    fn fam(g: &MixedGraph, sets: &[(&str, &[&str])], order: &[&str]) -> IdentifyingFamily {
        IdentifyingFamily::from_names(g, sets, order).unwrap()
    }

    pub(crate) fn cyclic_family(g: &MixedGraph) -> IdentifyingFamily {
        fam(
            g,
            &[("a", &["c", "d"]), ("b", &["d"]), ("c", &["d"]), ("d", &[])],
            &["d", "b", "c", "a"],
        )
    }

    #[test]
    fn bow_free_parent_family() {
        let g = bow_free_graph();
        let found = find_identifying_family(&g).unwrap();
        let pa = IdentifyingFamily::parents(&g).unwrap();
        assert_eq!(found.sets, pa.sets);
        assert!(validate_family(&g, &found).unwrap());
        assert_eq!(g.names_of(found.sets[3]).len(), 1);
    }

    #[test]
    fn cyclic_greedy_family_is_valid() {
        let g = cyclic_graph();
        let found = find_identifying_family(&g).unwrap();
        assert!(validate_family(&g, &found).unwrap());
        // pa(c) = {a} sits in htr(c); b precedes d lexicographically.
        assert_eq!(g.names_of(found.sets[2]), g.names_of(NodeSet::single(1)));
        assert!(validate_family(&g, &cyclic_family(&g)).unwrap());
    }

    #[test]
    fn empty_graph_family() {
        let g = MixedGraph::parse("nodes a b c").unwrap();
        let f = find_identifying_family(&g).unwrap();
        assert!(f.sets.iter().all(|s| s.is_empty()));
        assert_eq!(enumerate_identifying_families(&g, 10).count(), 1);
    }

    #[test]
    fn validate_rejects_bad_families() {
        let g = bow_free_graph();
        let mut f = IdentifyingFamily::parents(&g).unwrap();
        f.sets[1] = NodeSet::single(1);
        assert!(!validate_family(&g, &f).unwrap());

        let g = cyclic_graph();
        let bad_order = fam(
            &g,
            &[("a", &["c", "d"]), ("b", &["d"]), ("c", &["d"]), ("d", &[])],
            &["a", "b", "c", "d"],
        );
        assert!(g.htr(0).contains(2));
        assert!(!validate_family(&g, &bad_order).unwrap());

        let short = IdentifyingFamily {
            sets: vec![NodeSet::EMPTY; 2],
            order: vec![0, 1],
        };
        assert!(matches!(validate_family(&g, &short), Err(Error::InvalidFamily(_))));
    }

    #[test]
    fn constraint_pair_examples() {
        let g = bow_free_graph();
        let f = IdentifyingFamily::parents(&g).unwrap();
        assert_eq!(constraint_pairs(&g, &f), vec![(2, 3)]);
        let g = cyclic_graph();
        assert_eq!(constraint_pairs(&g, &cyclic_family(&g)), vec![(1, 2)]);
        let g = MixedGraph::parse("nodes a b c\nbi a b\nbi a c\nbi b c").unwrap();
        let f = find_identifying_family(&g).unwrap();
        assert!(constraint_pairs(&g, &f).is_empty());
    }

    #[test]
    fn enumeration_contains_known_families() {
        let g = bow_free_graph();
        let pa = IdentifyingFamily::parents(&g).unwrap();
        let all: Vec<_> = enumerate_identifying_families(&g, 100).collect();
        assert_eq!(all[0].sets, pa.sets);
        let g = cyclic_graph();
        let target = cyclic_family(&g).sets;
        assert!(enumerate_identifying_families(&g, 100).any(|f| f.sets == target));
    }

    #[test]
    fn json_round_trip() {
        let g = cyclic_graph();
        let f = cyclic_family(&g);
        let text = f.to_json(&g);
        assert_eq!(
            text,
            r#"{"order":["d","b","c","a"],"sets":{"a":["c","d"],"b":["d"],"c":["d"],"d":[]}}"#
        );
        assert_eq!(IdentifyingFamily::from_json(&g, &text).unwrap(), f);
        assert!(IdentifyingFamily::from_json(&g, r#"{"order":[],"sets":{"z":[]}}"#).is_err());
    }

    #[test]
    fn subsets_in_lexicographic_order() {
        let s = subsets_of_size(NodeSet::from_indices([0, 2, 3]), 2);
        assert_eq!(
            s,
            vec![
                NodeSet::from_indices([0, 2]),
                NodeSet::from_indices([0, 3]),
                NodeSet::from_indices([2, 3])
            ]
        );
        assert_eq!(subsets_of_size(NodeSet::EMPTY, 0), vec![NodeSet::EMPTY]);
        assert!(subsets_of_size(NodeSet::single(1), 2).is_empty());
    }

    /// Exhaustive oracle: try every assignment of same-size sets avoiding
    /// `v ∪ sib(v)` and every order.
    fn exhaustive_htc(g: &MixedGraph) -> bool {
        let n = g.n();
        let cands: Vec<Vec<NodeSet>> = (0..n)
            .map(|v| {
                subsets_of_size(
                    g.all_nodes().without(v).minus(g.siblings(v)),
                    g.parents(v).len(),
                )
                .into_iter()
                .filter(|&y| is_admissible(g, v, y))
                .collect()
            })
            .collect();
        let mut idx = vec![0; n];
        if cands.iter().any(Vec::is_empty) {
            return false;
        }
        loop {
            let sets: Vec<NodeSet> = idx.iter().zip(&cands).map(|(&i, c)| c[i]).collect();
            for perm in crate::graph::Permutations::new(n) {
                let f = IdentifyingFamily {
                    sets: sets.clone(),
                    order: perm,
                };
                if validate_family(g, &f).unwrap() {
                    return true;
                }
            }
            let mut k = n;
            loop {
                if k == 0 {
                    return false;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < cands[k].len() {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    #[test]
    fn greedy_search_agrees_with_exhaustive_search_on_three_nodes() {
        let mut non_identifiable = 0;
        for m in 0..=9 {
            for g in enumerate_graphs(3, m, true, true) {
                let greedy = find_identifying_family(&g);
                assert_eq!(greedy.is_some(), exhaustive_htc(&g), "{}", g.to_text());
                if let Some(f) = greedy {
                    assert!(validate_family(&g, &f).unwrap());
                } else {
                    non_identifiable += 1;
                }
            }
        }
        assert!(non_identifiable > 0);
        // A concrete witness: the bow a -> b, a <-> b is not identifiable.
        let g = MixedGraph::parse("nodes a b\ndir a b\nbi a b").unwrap();
        assert!(find_identifying_family(&g).is_none());
    }

    #[test]
    fn parents_family_valid_on_bow_free_acyclic_graphs() {
        for m in 0..=6 {
            for g in enumerate_graphs(4, m, false, false) {
                let mut f = IdentifyingFamily::parents(&g).unwrap();
                f.order = g.topological_order().unwrap();
                assert!(validate_family(&g, &f).unwrap(), "{}", g.to_text());
            }
        }
    }

    #[test]
    fn emitted_families_validate() {
        for g in enumerate_graphs(3, 3, true, true) {
            for f in enumerate_identifying_families(&g, 20) {
                assert!(validate_family(&g, &f).unwrap());
            }
        }
    }
}

#[cfg(test)]
pub(crate) use tests::cyclic_family;
