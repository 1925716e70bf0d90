//! Brute-force search for graphical constraints with a given determinant.
//!
//! Candidates are square, connected, normal-form bipartite constraints over
//! a variable set, bounded by node count and matrix dimension, emitted once
//! per isomorphism class (part swap and node renaming), trees first.

use std::collections::{BTreeMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraint::{ConstraintNode, GraphicalConstraint};
use crate::error::{Error, Result};
use crate::graph::Name;
use crate::poly::{fingerprint, Fingerprint, Polynomial};

/// Seeds of the two fingerprints every reported match must agree on.
pub const MATCH_SEEDS: [u64; 2] = [0x5ea4c4, 0x2ee0];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bounds {
    pub max_nodes: usize,
    pub max_slots: usize,
    pub trees_only: bool,
}

impl Default for Bounds {
    fn default() -> Self {
        Bounds {
            max_nodes: 6,
            max_slots: 6,
            trees_only: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MatchMode {
    Exact,
    UpToScalar,
}

/// A polynomial to look for, known by fingerprints at [`MATCH_SEEDS`] and
/// its homogeneity signature.
#[derive(Clone, Debug)]
pub struct Target {
    pub fingerprints: Vec<Fingerprint>,
    pub signature: BTreeMap<Name, u32>,
}

impl Target {
    pub fn from_polynomial(p: &Polynomial) -> Result<Target> {
        Ok(Target {
            fingerprints: MATCH_SEEDS.iter().map(|&s| fingerprint(p, s)).collect(),
            signature: p.homogeneity_signature()?,
        })
    }

    pub fn from_constraint(gc: &GraphicalConstraint) -> Result<Target> {
        Ok(Target {
            fingerprints: MATCH_SEEDS
                .iter()
                .map(|&s| gc.fingerprint(s))
                .collect::<Result<_>>()?,
            signature: gc.slot_signature(),
        })
    }
}

fn all_labels(vars: &[Name]) -> Vec<Vec<Name>> {
    let n = vars.len();
    let mut out: Vec<Vec<Name>> = (1u32..1 << n)
        .map(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| vars[i].clone()).collect())
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

/// Multisets of labels (indices, nondecreasing) using exactly `slots`
/// slots, at most `nodes` labels and at most `budget[v]` copies of each
/// variable. With `exhaust`, the budget must be used up exactly.
fn label_multisets(
    labels: &[Vec<usize>],
    budget: &[u32],
    slots: usize,
    nodes: usize,
    exhaust: bool,
) -> Vec<Vec<usize>> {
    fn go(
        labels: &[Vec<usize>],
        budget: &mut Vec<u32>,
        from: usize,
        slots: usize,
        nodes: usize,
        exhaust: bool,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if slots == 0 {
            if !exhaust || budget.iter().all(|&b| b == 0) {
                out.push(chosen.clone());
            }
            return;
        }
        if nodes == 0 {
            return;
        }
        for k in from..labels.len() {
            let l = &labels[k];
            if l.len() > slots || l.iter().any(|&v| budget[v] == 0) {
                continue;
            }
            for &v in l {
                budget[v] -= 1;
            }
            chosen.push(k);
            go(labels, budget, k, slots - l.len(), nodes - 1, exhaust, chosen, out);
            chosen.pop();
            for &v in l {
                budget[v] += 1;
            }
        }
    }
    let mut out = Vec::new();
    go(
        labels,
        &mut budget.to_vec(),
        0,
        slots,
        nodes,
        exhaust,
        &mut Vec::new(),
        &mut out,
    );
    out
}

fn permutations_within_groups(keys: &[usize]) -> Vec<Vec<usize>> {
    // Positions are sorted by key; only equal keys may be permuted.
    let mut out = vec![Vec::new()];
    let mut i = 0;
    while i < keys.len() {
        let mut j = i;
        while j < keys.len() && keys[j] == keys[i] {
            j += 1;
        }
        let group: Vec<usize> = (i..j).collect();
        let perms = permutations(&group);
        out = out
            .into_iter()
            .flat_map(|p| {
                perms.iter().map(move |q| {
                    let mut r = p.clone();
                    r.extend(q);
                    r
                })
            })
            .collect();
        i = j;
    }
    out
}

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &x) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// A string equal for two constraints iff they are isomorphic up to node
/// ids and part swap.
pub fn canonical_code(gc: &GraphicalConstraint) -> String {
    let side_code = |gc: &GraphicalConstraint| -> String {
        let mut a: Vec<usize> = (0..gc.part_a.len()).collect();
        let mut b: Vec<usize> = (0..gc.part_b.len()).collect();
        a.sort_by(|&x, &y| gc.part_a[x].label.cmp(&gc.part_a[y].label));
        b.sort_by(|&x, &y| gc.part_b[x].label.cmp(&gc.part_b[y].label));
        let rank = |labels: Vec<&Vec<Name>>| -> Vec<usize> {
            let mut r = Vec::with_capacity(labels.len());
            for k in 0..labels.len() {
                r.push(if k > 0 && labels[k] == labels[k - 1] { r[k - 1] } else { k });
            }
            r
        };
        let ka = rank(a.iter().map(|&i| &gc.part_a[i].label).collect());
        let kb = rank(b.iter().map(|&i| &gc.part_b[i].label).collect());
        let pb = permutations_within_groups(&kb);
        let mut best: Option<Vec<(usize, usize)>> = None;
        for pa in permutations_within_groups(&ka) {
            // pos_a[node] = position in canonical order.
            let mut pos_a = vec![0; a.len()];
            for (p, &k) in pa.iter().enumerate() {
                pos_a[a[k]] = p;
            }
            for q in &pb {
                let mut pos_b = vec![0; b.len()];
                for (p, &k) in q.iter().enumerate() {
                    pos_b[b[k]] = p;
                }
                let mut edges: Vec<(usize, usize)> =
                    gc.edges.iter().map(|&(x, y)| (pos_a[x], pos_b[y])).collect();
                edges.sort_unstable();
                if best.as_ref().is_none_or(|e| edges < *e) {
                    best = Some(edges);
                }
            }
        }
        let la: Vec<String> = a.iter().map(|&i| gc.part_a[i].label.join(",")).collect();
        let lb: Vec<String> = b.iter().map(|&i| gc.part_b[i].label.join(",")).collect();
        format!("{}|{}|{:?}", la.join(";"), lb.join(";"), best.unwrap_or_default())
    };
    let x = side_code(gc);
    let y = side_code(&gc.swapped());
    x.min(y)
}

fn build(labels: &[Vec<Name>], a: &[usize], b: &[usize], edges: &[(usize, usize)]) -> GraphicalConstraint {
    let node = |prefix: &str, k: usize, l: usize| ConstraintNode::new(format!("{prefix}{k}"), &labels[l]);
    GraphicalConstraint {
        part_a: a.iter().enumerate().map(|(k, &l)| node("a", k, l)).collect(),
        part_b: b.iter().enumerate().map(|(k, &l)| node("b", k, l)).collect(),
        edges: edges.to_vec(),
    }
}

fn candidates_for(
    vars: &[Name],
    signature: Option<&BTreeMap<Name, u32>>,
    bounds: Bounds,
) -> Result<Vec<GraphicalConstraint>> {
    if bounds.max_nodes < 2 || bounds.max_slots == 0 || vars.is_empty() {
        return Err(Error::Unsupported("search bounds must be positive".into()));
    }
    if vars.len() > 16 {
        return Err(Error::Unsupported("too many variables".into()));
    }
    let labels = all_labels(vars);
    let index: BTreeMap<&Name, usize> = vars.iter().enumerate().map(|(i, v)| (v, i)).collect();
    let label_idx: Vec<Vec<usize>> = labels
        .iter()
        .map(|l| l.iter().map(|v| index[v]).collect())
        .collect();
    let (dims, full_budget): (Vec<usize>, Vec<u32>) = match signature {
        Some(sig) => {
            let mut budget = vec![0u32; vars.len()];
            for (v, &c) in sig {
                let Some(&i) = index.get(v) else { return Ok(Vec::new()) };
                budget[i] = c;
            }
            let total: u32 = budget.iter().sum();
            if total % 2 == 1 || total as usize / 2 > bounds.max_slots {
                return Ok(Vec::new());
            }
            (vec![total as usize / 2], budget)
        }
        None => (
            (1..=bounds.max_slots).collect(),
            vec![2 * bounds.max_slots as u32; vars.len()],
        ),
    };

    let mut shapes = Vec::new();
    for &d in &dims {
        for a in label_multisets(&label_idx, &full_budget, d, bounds.max_nodes - 1, false) {
            let mut rest = full_budget.clone();
            for &l in &a {
                for &v in &label_idx[l] {
                    rest[v] -= 1;
                }
            }
            let exhaust = signature.is_some();
            for b in label_multisets(&label_idx, &rest, d, bounds.max_nodes - a.len(), exhaust) {
                shapes.push((a.clone(), b));
            }
        }
    }

    let mut found: Vec<(bool, usize, String, GraphicalConstraint)> = shapes
        .par_iter()
        .flat_map_iter(|(a, b)| {
            let pairs: Vec<(usize, usize)> = (0..a.len())
                .flat_map(|i| (0..b.len()).map(move |j| (i, j)))
                .collect();
            let need = a.len() + b.len() - 1;
            let max_edges = if bounds.trees_only { need } else { pairs.len() };
            let mut local = Vec::new();
            let mut seen = HashSet::new();
            if pairs.len() < 64 {
                for mask in 0u64..1 << pairs.len() {
                    let k = mask.count_ones() as usize;
                    if k < need || k > max_edges {
                        continue;
                    }
                    let edges: Vec<(usize, usize)> = (0..pairs.len())
                        .filter(|i| mask >> i & 1 == 1)
                        .map(|i| pairs[i])
                        .collect();
                    let gc = build(&labels, a, b, &edges);
                    if !gc.is_connected() || !gc.is_normal() {
                        continue;
                    }
                    let code = canonical_code(&gc);
                    if seen.insert(code.clone()) {
                        let d: usize = gc.row_count();
                        local.push((!gc.is_tree(), d, code, gc));
                    }
                }
            }
            local
        })
        .collect();
    found.sort_by(|x, y| (x.0, x.1, &x.2).cmp(&(y.0, y.1, &y.2)));
    found.dedup_by(|x, y| x.2 == y.2);
    Ok(found.into_iter().map(|(_, _, _, gc)| gc).collect())
}

/// All candidates over `vars` within `bounds`, trees first, then by
/// dimension and canonical code.
pub fn enumerate_candidates(vars: &[Name], bounds: Bounds) -> Result<Vec<GraphicalConstraint>> {
    candidates_for(vars, None, bounds)
}

/// Candidates whose determinant equals the target (exactly or up to a
/// scalar) at both match seeds. Only candidates with the target's slot
/// signature are generated.
pub fn match_target(
    target: &Target,
    vars: &[Name],
    bounds: Bounds,
    mode: MatchMode,
) -> Result<Vec<GraphicalConstraint>> {
    if target.fingerprints.len() != MATCH_SEEDS.len() {
        return Err(Error::FingerprintMismatch);
    }
    let candidates = candidates_for(vars, Some(&target.signature), bounds)?;
    let hits: Vec<Option<GraphicalConstraint>> = candidates
        .into_par_iter()
        .map(|gc| -> Result<Option<GraphicalConstraint>> {
            for (k, &seed) in MATCH_SEEDS.iter().enumerate() {
                let fp = gc.fingerprint(seed)?;
                let t = &target.fingerprints[k];
                let ok = !fp.is_zero()
                    && match mode {
                        MatchMode::Exact => fp == *t,
                        MatchMode::UpToScalar => fp.equal_up_to_scalar(t)?,
                    };
                if !ok {
                    return Ok(None);
                }
            }
            Ok(Some(gc))
        })
        .collect::<Result<_>>()?;
    Ok(hits.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{tetrad, bow_free_constraint};
    use crate::poly::parse_poly;

    fn vars(v: &[&str]) -> Vec<Name> {
        v.iter().map(|&s| Name::from(s)).collect()
    }

    fn small() -> Bounds {
        Bounds {
            max_nodes: 4,
            max_slots: 3,
            trees_only: false,
        }
    }

    #[test]
    fn two_variables_contain_the_single_edge() {
        let b = Bounds {
            max_slots: 2,
            ..small()
        };
        let all = enumerate_candidates(&vars(&["a", "b"]), b).unwrap();
        let edge = GraphicalConstraint::from_labels(&[&["a"]], &[&["b"]], &[(0, 0)]).unwrap();
        assert!(all.iter().any(|gc| gc.is_isomorphic(&edge)));
    }

    /// Independent count: every labelled shape and edge set, filtered,
    /// then grouped by pairwise isomorphism.
    fn brute_force_classes(vs: &[Name], b: Bounds) -> Vec<GraphicalConstraint> {
        let labels = all_labels(vs);
        let mut reps: Vec<GraphicalConstraint> = Vec::new();
        let lists = |d: usize| -> Vec<Vec<usize>> {
            // Ordered label sequences with total size d; order is redundant
            // on purpose.
            let mut out = Vec::new();
            let mut stack: Vec<(Vec<usize>, usize)> = vec![(vec![], 0)];
            while let Some((seq, used)) = stack.pop() {
                if used == d {
                    out.push(seq.clone());
                    continue;
                }
                for (k, l) in labels.iter().enumerate() {
                    if used + l.len() <= d {
                        let mut s = seq.clone();
                        s.push(k);
                        stack.push((s, used + l.len()));
                    }
                }
            }
            out
        };
        for d in 1..=b.max_slots {
            let seqs = lists(d);
            for a in &seqs {
                for bb in &seqs {
                    if a.len() + bb.len() > b.max_nodes {
                        continue;
                    }
                    let pairs: Vec<(usize, usize)> = (0..a.len())
                        .flat_map(|i| (0..bb.len()).map(move |j| (i, j)))
                        .collect();
                    for mask in 0u64..1 << pairs.len() {
                        let edges: Vec<(usize, usize)> = (0..pairs.len())
                            .filter(|i| mask >> i & 1 == 1)
                            .map(|i| pairs[i])
                            .collect();
                        let gc = build(&labels, a, bb, &edges);
                        if gc.is_connected()
                            && gc.is_normal()
                            && !reps.iter().any(|r| r.is_isomorphic(&gc))
                        {
                            reps.push(gc);
                        }
                    }
                }
            }
        }
        reps
    }

    #[test]
    fn counts_match_pairwise_isomorphism_oracle() {
        let vs = vars(&["a", "b"]);
        let ours = enumerate_candidates(&vs, small()).unwrap();
        let oracle = brute_force_classes(&vs, small());
        assert_eq!(ours.len(), oracle.len());
        for (i, x) in ours.iter().enumerate() {
            for y in &ours[i + 1..] {
                assert!(!x.is_isomorphic(y));
            }
        }
        // Trees come first.
        let first_non_tree = ours.iter().position(|g| !g.is_tree()).unwrap_or(ours.len());
        assert!(ours[first_non_tree..].iter().all(|g| !g.is_tree()));
    }

    #[test]
    fn canonical_code_ignores_ids_and_sides() {
        let x = bow_free_constraint();
        let y = bow_free_constraint().swapped().renumbered();
        assert_eq!(canonical_code(&x), canonical_code(&y));
        assert_ne!(canonical_code(&x), canonical_code(&tetrad()));
    }

    #[test]
    fn three_variables_contain_tetrad() {
        let b = Bounds {
            max_nodes: 3,
            max_slots: 2,
            trees_only: false,
        };
        let all = enumerate_candidates(&vars(&["a", "b", "c"]), b).unwrap();
        assert!(all.iter().any(|gc| gc.is_isomorphic(&tetrad())));
    }

    #[test]
    fn finds_targets() {
        let t = Target::from_polynomial(&parse_poly("+1 s[a,b] s[c,c] -1 s[a,c] s[b,c]")).unwrap();
        let hits = match_target(&t, &vars(&["a", "b", "c"]), small(), MatchMode::UpToScalar).unwrap();
        assert!(hits.iter().any(|gc| gc.is_isomorphic(&tetrad())));

        let t = Target::from_polynomial(&Polynomial::sigma("a", "b")).unwrap();
        let hits = match_target(&t, &vars(&["a", "b", "c"]), small(), MatchMode::Exact).unwrap();
        assert_eq!(hits.len(), 1);
        assert_eq!(hits[0].node_count(), 2);

        let p = bow_free_constraint().polynomial(8).unwrap();
        let t = Target::from_polynomial(&p).unwrap();
        let b = Bounds {
            max_nodes: 5,
            max_slots: 3,
            trees_only: false,
        };
        let hits = match_target(&t, &vars(&["a", "b", "c", "d"]), b, MatchMode::UpToScalar).unwrap();
        assert!(hits.iter().any(|gc| gc.is_isomorphic(&bow_free_constraint())));
        for gc in &hits {
            let q = gc.polynomial(8).unwrap();
            assert_eq!(q.monic(), p.monic());
        }
    }

    #[test]
    fn absent_signature_gives_nothing() {
        let t = Target::from_polynomial(&Polynomial::sigma("a", "z")).unwrap();
        assert!(match_target(&t, &vars(&["a", "b"]), small(), MatchMode::UpToScalar)
            .unwrap()
            .is_empty());
    }
}
