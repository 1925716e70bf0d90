//! Rewriting tree constraints so that spurious factors split off.
//!
//! Take a central node `R` with two neighbours `left` (label `X ∪ A`) and
//! `right` (label `X ∪ B`), where `X` is the shared part of the labels. If
//! every subtree hanging off `right` has an identical copy hanging off
//! `left`, and the edge `R—left` has weight `|A|`, then deleting that edge,
//! relabelling `left` as `X` and `right` as `X ∪ A ∪ B` preserves the
//! determinant up to sign. The deletion disconnects the tree, so the
//! determinant factors through the two components.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraint::{GraphicalConstraint, Side};
use crate::error::{Error, Result};
use crate::graph::Name;
use crate::poly::Fingerprint;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transformation {
    /// Part holding `left` and `right`; `central` is in the other part.
    pub side: Side,
    pub central: usize,
    pub left: usize,
    pub right: usize,
}

fn edge(side: Side, own: usize, central: usize) -> (usize, usize) {
    match side {
        Side::A => (own, central),
        Side::B => (central, own),
    }
}

/// Canonical string of the labelled subtree rooted at `(side, i)` and
/// hanging away from `parent`.
pub fn subtree_code(
    gc: &GraphicalConstraint,
    side: Side,
    i: usize,
    parent: Option<usize>,
) -> String {
    let mut kids: Vec<String> = gc
        .neighbors(side, i)
        .into_iter()
        .filter(|&j| Some(j) != parent)
        .map(|j| subtree_code(gc, side.other(), j, Some(i)))
        .collect();
    kids.sort();
    format!("{}({})", gc.part(side)[i].label.join(","), kids.concat())
}

/// Canonical form of a tree constraint up to node ids and exchange of the
/// two parts: the smallest rooted code over all roots.
pub fn tree_code(gc: &GraphicalConstraint) -> Option<String> {
    if !gc.is_tree() {
        return None;
    }
    let mut best: Option<String> = None;
    for side in [Side::A, Side::B] {
        for i in 0..gc.part(side).len() {
            let code = subtree_code(gc, side, i, None);
            if best.as_ref().map_or(true, |b| code < *b) {
                best = Some(code);
            }
        }
    }
    best
}

fn label_split(left: &[Name], right: &[Name]) -> (Vec<Name>, Vec<Name>, Vec<Name>) {
    let l: BTreeSet<&Name> = left.iter().collect();
    let r: BTreeSet<&Name> = right.iter().collect();
    let x = l.intersection(&r).map(|&n| n.clone()).collect();
    let a = l.difference(&r).map(|&n| n.clone()).collect();
    let b = r.difference(&l).map(|&n| n.clone()).collect();
    (x, a, b)
}

/// Every subtree at `right` (away from `central`) has a distinct identical
/// copy at `left`.
fn copies_present(gc: &GraphicalConstraint, t: &Transformation) -> bool {
    let codes = |own: usize| -> BTreeMap<String, usize> {
        let mut m = BTreeMap::new();
        for j in gc.neighbors(t.side, own) {
            if j != t.central {
                *m.entry(subtree_code(gc, t.side.other(), j, Some(own))).or_insert(0) += 1;
            }
        }
        m
    };
    let at_left = codes(t.left);
    codes(t.right)
        .iter()
        .all(|(c, k)| at_left.get(c).is_some_and(|have| have >= k))
}

fn preconditions_hold(gc: &GraphicalConstraint, t: &Transformation) -> Result<bool> {
    let part = gc.part(t.side);
    if t.left == t.right || t.left >= part.len() || t.right >= part.len() {
        return Ok(false);
    }
    if t.central >= gc.part(t.side.other()).len() {
        return Ok(false);
    }
    let (l, r) = (edge(t.side, t.left, t.central), edge(t.side, t.right, t.central));
    if !gc.has_edge(l.0, l.1) || !gc.has_edge(r.0, r.1) {
        return Ok(false);
    }
    let (_, a, _) = label_split(&part[t.left].label, &part[t.right].label);
    if a.is_empty() || !copies_present(gc, t) {
        return Ok(false);
    }
    match gc.edge_weight(l.0, l.1) {
        Ok(w) => Ok(w == a.len()),
        Err(Error::Degenerate) => Ok(false),
        Err(e) => Err(e),
    }
}

/// All applicable triples, smallest `(side, central, left, right)` first.
pub fn find_transformations(gc: &GraphicalConstraint) -> Result<Vec<Transformation>> {
    if !gc.is_tree() {
        return Err(Error::NotATree);
    }
    let mut out = Vec::new();
    for side in [Side::A, Side::B] {
        for central in 0..gc.part(side.other()).len() {
            let nbrs = gc.neighbors(side.other(), central);
            for &left in &nbrs {
                for &right in &nbrs {
                    let t = Transformation {
                        side,
                        central,
                        left,
                        right,
                    };
                    if preconditions_hold(gc, &t)? {
                        out.push(t);
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Applies one rewrite. The result is in normal form and usually has two
/// components whose determinants multiply to the original's, up to sign.
pub fn apply_transformation(
    gc: &GraphicalConstraint,
    t: &Transformation,
) -> Result<GraphicalConstraint> {
    if !gc.is_tree() {
        return Err(Error::NotATree);
    }
    if !preconditions_hold(gc, t)? {
        return Err(Error::InvalidTransformation(format!("{t:?} does not apply")));
    }
    let (x, a, b) = {
        let part = gc.part(t.side);
        label_split(&part[t.left].label, &part[t.right].label)
    };
    let mut out = gc.clone();
    let (ea, eb) = edge(t.side, t.left, t.central);
    out.remove_edge(ea, eb);
    let mut merged: Vec<Name> = x.iter().chain(&a).chain(&b).cloned().collect();
    merged.sort();
    let part = match t.side {
        Side::A => &mut out.part_a,
        Side::B => &mut out.part_b,
    };
    part[t.right].label = merged;
    part[t.left].label = x.clone();
    if x.is_empty() {
        out.remove_node(t.side, t.left);
    }
    let out = out.normal_form();
    if out.components().iter().any(|c| !c.is_square()) {
        return Err(Error::InvalidTransformation(
            "rewrite produced a non-square component".into(),
        ));
    }
    Ok(out)
}

/// Polynomial of a possibly disconnected constraint: the product over
/// components, as a fingerprint.
pub fn product_fingerprint(parts: &[GraphicalConstraint], seed: u64) -> Result<Fingerprint> {
    parts
        .iter()
        .try_fold(Fingerprint::one(seed), |acc, c| acc.mul(&c.fingerprint(seed)?))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Simplified {
    pub core: GraphicalConstraint,
    pub factors: Vec<GraphicalConstraint>,
}

impl Simplified {
    pub fn all(&self) -> Vec<GraphicalConstraint> {
        std::iter::once(self.core.clone())
            .chain(self.factors.iter().cloned())
            .collect()
    }
}

/// Core is the component with the most rows; ties go to the earliest.
fn split_core(mut parts: Vec<GraphicalConstraint>) -> Simplified {
    let best = (0..parts.len())
        .max_by_key(|&i| (parts[i].row_count(), std::cmp::Reverse(i)))
        .unwrap_or(0);
    let core = if parts.is_empty() {
        GraphicalConstraint::empty()
    } else {
        parts.remove(best)
    };
    Simplified {
        core,
        factors: parts,
    }
}

/// Components after greedily applying the first applicable rewrite until
/// none applies.
pub fn simplify_components(gc: &GraphicalConstraint) -> Result<Vec<GraphicalConstraint>> {
    let mut work = gc.normal_form().components();
    work.reverse();
    let mut done = Vec::new();
    while let Some(c) = work.pop() {
        if !c.is_tree() {
            done.push(c);
            continue;
        }
        let mut next = None;
        for t in find_transformations(&c)? {
            if let Ok(r) = apply_transformation(&c, &t) {
                next = Some(r);
                break;
            }
        }
        match next {
            Some(r) => {
                let mut parts = r.components();
                parts.reverse();
                work.extend(parts);
            }
            None => done.push(c),
        }
    }
    Ok(done)
}

pub fn simplify(gc: &GraphicalConstraint) -> Result<Simplified> {
    Ok(split_core(simplify_components(gc)?))
}

fn state_key(parts: &[GraphicalConstraint]) -> Vec<String> {
    let mut keys: Vec<String> = parts
        .iter()
        .map(|c| tree_code(c).unwrap_or_else(|| c.renumbered().to_json()))
        .collect();
    keys.sort();
    keys
}

/// Every fixpoint reachable by applying rewrites in any order, at most
/// `limit`, each as a list of components.
pub fn simplify_all_orders(
    gc: &GraphicalConstraint,
    limit: usize,
) -> Result<Vec<Vec<GraphicalConstraint>>> {
    let start = gc.normal_form().components();
    let mut seen = BTreeSet::new();
    let mut found = BTreeMap::new();
    let mut stack = vec![start];
    while let Some(parts) = stack.pop() {
        if found.len() >= limit {
            break;
        }
        if !seen.insert(state_key(&parts)) {
            continue;
        }
        let mut moved = false;
        for (k, c) in parts.iter().enumerate() {
            if !c.is_tree() {
                continue;
            }
            for t in find_transformations(c)? {
                let Ok(r) = apply_transformation(c, &t) else { continue };
                let mut next: Vec<GraphicalConstraint> = parts[..k].to_vec();
                next.extend(r.components());
                next.extend(parts[k + 1..].iter().cloned());
                stack.push(next);
                moved = true;
            }
        }
        if !moved {
            found.entry(state_key(&parts)).or_insert(parts);
        }
    }
    Ok(found.into_values().collect())
}
