//! Graphical constraints from half-trek identifying families.
//!
//! Two seed nodes `{v}` and `{w}` are joined by an edge and expanded.
//! Expanding a node labelled `{u}` relabels it `{u} ∪ pa(u)`, attaches one
//! new node `{y}` per `y ∈ Y_u`, and expands those new nodes whose `y` lies
//! in `htr(u)`. The result is brought into normal form.

use crate::constraint::{ConstraintNode, GraphicalConstraint, Side};
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, Name};
use crate::htc::{self, IdentifyingFamily};

/// A derived constraint together with the expansions that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Derivation {
    pub constraint: GraphicalConstraint,
    /// Nodes expanded below the seeds, in expansion order.
    pub expanded: Vec<usize>,
}

struct Builder<'a> {
    g: &'a MixedGraph,
    fam: &'a IdentifyingFamily,
    pos: Vec<usize>,
    gc: GraphicalConstraint,
    next_id: usize,
    expanded: Vec<usize>,
}

impl<'a> Builder<'a> {
    fn new(g: &'a MixedGraph, fam: &'a IdentifyingFamily) -> Self {
        Builder {
            g,
            fam,
            pos: fam.positions(),
            gc: GraphicalConstraint::empty(),
            next_id: 1,
            expanded: Vec::new(),
        }
    }

    fn node(&mut self, side: Side, v: usize) -> usize {
        let id = format!("t{}", self.next_id);
        self.next_id += 1;
        self.gc
            .add_node(side, ConstraintNode::new(id, &[self.g.name(v).as_ref()]))
    }

    fn link(&mut self, side: Side, i: usize, j: usize) {
        match side {
            Side::A => self.gc.add_edge(i, j),
            Side::B => self.gc.add_edge(j, i),
        }
    }

    fn expand(&mut self, side: Side, i: usize, v: usize) -> Result<()> {
        let label: Vec<&str> = self
            .g
            .parents(v)
            .with(v)
            .iter()
            .map(|u| self.g.name(u).as_ref())
            .collect();
        let id = self.gc.part(side)[i].id.clone();
        let node = ConstraintNode::new(id, &label);
        match side {
            Side::A => self.gc.part_a[i] = node,
            Side::B => self.gc.part_b[i] = node,
        }
        let children: Vec<(usize, usize)> = self.fam.sets[v]
            .iter()
            .map(|y| {
                let c = self.node(side.other(), y);
                self.link(side, i, c);
                (y, c)
            })
            .collect();
        for (y, c) in children {
            if !self.g.htr(v).contains(y) {
                continue;
            }
            if self.pos[y] >= self.pos[v] {
                return Err(Error::CycleInIdentification {
                    node: self.g.name(v).to_string(),
                });
            }
            self.expanded.push(y);
            self.expand(side.other(), c, y)?;
        }
        Ok(())
    }
}

fn check_family(g: &MixedGraph, fam: &IdentifyingFamily) -> Result<()> {
    if htc::validate_family(g, fam)? {
        Ok(())
    } else {
        Err(Error::InvalidFamily("family fails the half-trek criterion".into()))
    }
}

/// Runs the construction for the pair `{v, w}`, recording expansions.
pub fn derive_traced(
    g: &MixedGraph,
    fam: &IdentifyingFamily,
    pair: (usize, usize),
) -> Result<Derivation> {
    check_family(g, fam)?;
    let (v, w) = (pair.0.min(pair.1), pair.0.max(pair.1));
    if !htc::constraint_pairs(g, fam).contains(&(v, w)) {
        return Err(Error::InvalidConstraint(format!(
            "pair {{{}, {}}} carries no constraint under this family",
            g.name(v),
            g.name(w)
        )));
    }
    let mut b = Builder::new(g, fam);
    let t1 = b.node(Side::A, v);
    let t2 = b.node(Side::B, w);
    b.link(Side::A, t1, t2);
    b.expand(Side::A, t1, v)?;
    b.expand(Side::B, t2, w)?;
    Ok(Derivation {
        constraint: b.gc.normal_form(),
        expanded: b.expanded,
    })
}

pub fn derive_constraint(
    g: &MixedGraph,
    fam: &IdentifyingFamily,
    pair: (usize, usize),
) -> Result<GraphicalConstraint> {
    derive_traced(g, fam, pair).map(|d| d.constraint)
}

/// Same as [`derive_constraint`] with the pair given by node names.
pub fn derive_named(
    g: &MixedGraph,
    fam: &IdentifyingFamily,
    v: &str,
    w: &str,
) -> Result<GraphicalConstraint> {
    derive_constraint(g, fam, (g.index(v)?, g.index(w)?))
}

/// One constraint per constraint pair, in sorted pair order.
pub fn derive_all(g: &MixedGraph, fam: &IdentifyingFamily) -> Result<Vec<GraphicalConstraint>> {
    check_family(g, fam)?;
    htc::constraint_pairs(g, fam)
        .into_iter()
        .map(|p| derive_constraint(g, fam, p))
        .collect()
}

/// The constraint for the determinant of the linear system identifying the
/// parents of `v`: a single node `{v}` expanded, with `v` then dropped from
/// its label.
pub fn a_minor_constraint(
    g: &MixedGraph,
    fam: &IdentifyingFamily,
    v: usize,
) -> Result<GraphicalConstraint> {
    check_family(g, fam)?;
    if g.parents(v).is_empty() {
        return Err(Error::TrivialFactor {
            node: g.name(v).to_string(),
        });
    }
    let mut b = Builder::new(g, fam);
    let t = b.node(Side::A, v);
    b.expand(Side::A, t, v)?;
    let name: Name = g.name(v).clone();
    b.gc.part_a[t].label.retain(|u| *u != name);
    Ok(b.gc.normal_form())
}
