//! Certificates for how harmless the extra factors of a derived constraint
//! are.
//!
//! A constraint is PD-certified when its polynomial is the class core times
//! principal minors only: minors never vanish on positive definite
//! matrices. It is I-certified when every identifying-system determinant it
//! was multiplied by contains a monomial made of diagonal entries only, so
//! no diagonal covariance matrix satisfies it.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::constraint::GraphicalConstraint;
use crate::construct::{a_minor_constraint, derive_traced};
use crate::error::{Error, Result};
use crate::graph::{MixedGraph, Name};
use crate::htc::IdentifyingFamily;
use crate::poly::{fingerprint, Fingerprint, PatternMatrix, Polynomial, Var};

/// Seeds used by the sampled certificate route.
pub const CERTIFICATE_SEEDS: [u64; 2] = [0xc0ffee, 0xbeef];

/// Most principal-minor decompositions the sampled route will try.
pub const DECOMPOSITION_LIMIT: usize = 20_000;

/// `Σ` restricted to `vars`, as a pattern matrix.
pub fn principal_minor_matrix(vars: &[Name]) -> PatternMatrix {
    let ids: Vec<(String, Name)> = vars.iter().map(|v| ("m".to_string(), v.clone())).collect();
    PatternMatrix {
        rows: ids.clone(),
        cols: ids,
        entries: vars
            .iter()
            .map(|v| {
                vars.iter()
                    .map(|w| Some(Var::from_names(v.clone(), w.clone())))
                    .collect()
            })
            .collect(),
    }
}

pub fn principal_minor_poly(vars: &[Name], cap: usize) -> Result<Polynomial> {
    if vars.is_empty() {
        return Err(Error::Unsupported("principal minor of the empty set".into()));
    }
    principal_minor_matrix(vars).det_expand(cap)
}

/// All nonempty subsets of `nodes`, smallest first, then lexicographic.
fn subsets(nodes: &[Name]) -> Vec<Vec<Name>> {
    let n = nodes.len();
    let mut out: Vec<Vec<Name>> = (1u32..1 << n)
        .map(|mask| {
            (0..n)
                .filter(|i| mask >> i & 1 == 1)
                .map(|i| nodes[i].clone())
                .collect()
        })
        .collect();
    out.sort_by(|a, b| a.len().cmp(&b.len()).then(a.cmp(b)));
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Peeled {
    pub minor: Vec<Name>,
    pub multiplicity: u32,
}

/// Divides out every principal minor over the variables of `p` as often
/// as it divides. `p = core · Π minor^multiplicity` exactly.
pub fn peel_principal_minors(p: &Polynomial, cap: usize) -> Result<(Polynomial, Vec<Peeled>)> {
    if p.is_zero() {
        return Err(Error::DivisionByZero);
    }
    let nodes = p.nodes();
    let mut core = p.clone();
    let mut peeled = Vec::new();
    for vars in subsets(&nodes) {
        if vars.len() > cap {
            continue;
        }
        let minor = principal_minor_poly(&vars, cap)?;
        let mut k = 0;
        while let Some(q) = core.divide_exact(&minor)? {
            core = q;
            k += 1;
        }
        if k > 0 {
            peeled.push(Peeled {
                minor: vars,
                multiplicity: k,
            });
        }
    }
    Ok((core, peeled))
}

/// The minimal known constraint of a class.
#[derive(Clone, Debug)]
pub enum CoreRef {
    Exact(Polynomial),
    /// Fingerprints at [`CERTIFICATE_SEEDS`] and the homogeneity signature.
    Sampled {
        fingerprints: Vec<Fingerprint>,
        signature: BTreeMap<Name, u32>,
    },
}

impl CoreRef {
    fn fingerprints(&self) -> Vec<Fingerprint> {
        match self {
            CoreRef::Exact(p) => CERTIFICATE_SEEDS.iter().map(|&s| fingerprint(p, s)).collect(),
            CoreRef::Sampled { fingerprints, .. } => fingerprints.clone(),
        }
    }

    fn signature(&self) -> Result<BTreeMap<Name, u32>> {
        match self {
            CoreRef::Exact(p) => p.homogeneity_signature(),
            CoreRef::Sampled { signature, .. } => Ok(signature.clone()),
        }
    }

    /// Reference taken from a nondegenerate constraint.
    pub fn from_constraint(gc: &GraphicalConstraint) -> Result<CoreRef> {
        Ok(CoreRef::Sampled {
            fingerprints: CERTIFICATE_SEEDS
                .iter()
                .map(|&s| gc.fingerprint(s))
                .collect::<Result<_>>()?,
            signature: gc.slot_signature(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum PdVerdict {
    Certified { peeled: Vec<Peeled> },
    RefutedByResidual,
    Unknown { reason: String },
}

impl PdVerdict {
    pub fn is_certified(&self) -> bool {
        matches!(self, PdVerdict::Certified { .. })
    }
}

/// Every way of writing `target` as a sum of subset indicators, each a list
/// of subset indices in nondecreasing order; `None` past `limit`.
fn indicator_decompositions(
    target: &[u32],
    sets: &[Vec<usize>],
    limit: usize,
) -> Option<Vec<Vec<usize>>> {
    fn go(
        rest: &mut Vec<u32>,
        sets: &[Vec<usize>],
        from: usize,
        chosen: &mut Vec<usize>,
        out: &mut Vec<Vec<usize>>,
        limit: usize,
    ) -> bool {
        if rest.iter().all(|&x| x == 0) {
            out.push(chosen.clone());
            return out.len() <= limit;
        }
        // The first nonzero coordinate must be covered by some later set.
        let first = rest.iter().position(|&x| x > 0).unwrap();
        for k in from..sets.len() {
            let s = &sets[k];
            if s[0] != first || s.iter().any(|&i| rest[i] == 0) {
                continue;
            }
            for &i in s {
                rest[i] -= 1;
            }
            chosen.push(k);
            let ok = go(rest, sets, k, chosen, out, limit);
            chosen.pop();
            for &i in s {
                rest[i] += 1;
            }
            if !ok {
                return false;
            }
        }
        true
    }
    // Sets sorted by smallest element, so nondecreasing picks stay canonical
    // while the first uncovered coordinate only moves forward.
    let mut order: Vec<usize> = (0..sets.len()).collect();
    order.sort_by_key(|&k| sets[k][0]);
    let sorted: Vec<Vec<usize>> = order.iter().map(|&k| sets[k].clone()).collect();
    let mut out = Vec::new();
    let mut rest = target.to_vec();
    go(&mut rest, &sorted, 0, &mut Vec::new(), &mut out, limit).then(|| {
        out.into_iter()
            .map(|d| d.into_iter().map(|k| order[k]).collect())
            .collect()
    })
}

fn sampled_certificate(gc: &GraphicalConstraint, core: &CoreRef) -> Result<PdVerdict> {
    let raw_sig = gc.slot_signature();
    let core_sig = core.signature()?;
    let nodes: Vec<Name> = raw_sig
        .keys()
        .chain(core_sig.keys())
        .cloned()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut half = Vec::with_capacity(nodes.len());
    for v in &nodes {
        let r = raw_sig.get(v).copied().unwrap_or(0);
        let c = core_sig.get(v).copied().unwrap_or(0);
        if r < c || (r - c) % 2 == 1 {
            return Ok(PdVerdict::RefutedByResidual);
        }
        half.push((r - c) / 2);
    }
    // Subsets as sorted index lists, so each starts at its smallest element.
    let sets: Vec<Vec<usize>> = (1u32..1 << nodes.len())
        .map(|m| (0..nodes.len()).filter(|i| m >> i & 1 == 1).collect())
        .collect();
    let Some(options) = indicator_decompositions(&half, &sets, DECOMPOSITION_LIMIT) else {
        return Ok(PdVerdict::Unknown {
            reason: "too many principal-minor decompositions".into(),
        });
    };
    let raw_fps: Vec<Fingerprint> = CERTIFICATE_SEEDS
        .iter()
        .map(|&s| gc.fingerprint(s))
        .collect::<Result<_>>()?;
    let core_fps = core.fingerprints();
    let mut minor_fps: BTreeMap<usize, Vec<Fingerprint>> = BTreeMap::new();
    for option in options {
        let mut ok = true;
        for (k, &seed) in CERTIFICATE_SEEDS.iter().enumerate() {
            let mut prod = core_fps[k].clone();
            for &s in &option {
                let fps = minor_fps.entry(s).or_insert_with(|| {
                    let vars: Vec<Name> = sets[s].iter().map(|&i| nodes[i].clone()).collect();
                    let m = principal_minor_matrix(&vars);
                    CERTIFICATE_SEEDS.iter().map(|&z| fingerprint(&m, z)).collect()
                });
                prod = prod.mul(&fps[k])?;
            }
            debug_assert_eq!(prod.seed, seed);
            if !raw_fps[k].equal_up_to_scalar(&prod)? {
                ok = false;
                break;
            }
        }
        if ok {
            let mut counts: BTreeMap<usize, u32> = BTreeMap::new();
            for s in option {
                *counts.entry(s).or_insert(0) += 1;
            }
            let mut peeled: Vec<Peeled> = counts
                .into_iter()
                .map(|(s, k)| Peeled {
                    minor: sets[s].iter().map(|&i| nodes[i].clone()).collect(),
                    multiplicity: k,
                })
                .collect();
            peeled.sort_by(|a, b| a.minor.len().cmp(&b.minor.len()).then(a.minor.cmp(&b.minor)));
            return Ok(PdVerdict::Certified { peeled });
        }
    }
    Ok(PdVerdict::RefutedByResidual)
}

/// Certified iff the polynomial of `gc` is the core times principal minors,
/// up to a scalar. Expands symbolically when the dimension is at most `cap`
/// and the core is exact, otherwise compares fingerprints against every
/// product of minors with the right homogeneity signature.
pub fn pd_primary_certificate(
    gc: &GraphicalConstraint,
    core: &CoreRef,
    cap: usize,
) -> Result<PdVerdict> {
    if gc.is_degenerate()? {
        return Err(Error::Degenerate);
    }
    if let (CoreRef::Exact(c), true) = (core, gc.row_count() <= cap) {
        let p = gc.polynomial(cap)?;
        let (residual, peeled) = peel_principal_minors(&p, cap)?;
        return Ok(if residual.monic() == c.monic() {
            PdVerdict::Certified { peeled }
        } else {
            PdVerdict::RefutedByResidual
        });
    }
    sampled_certificate(gc, core)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "verdict", rename_all = "kebab-case")]
pub enum IVerdict {
    Certified,
    Unknown { node: String },
}

/// Whether the determinant has a term made of diagonal entries only.
/// Past the expansion cap: the determinant with every off-diagonal entry
/// set to zero is exactly the sum of those terms, tested at random points.
pub fn has_diagonal_monomial(gc: &GraphicalConstraint, cap: usize) -> Result<bool> {
    let m = gc.build_matrix()?;
    if m.dim() <= cap {
        return Ok(m.det_expand(cap)?.diagonal_monomial()?.is_some());
    }
    for seed in CERTIFICATE_SEEDS {
        for k in 0..4 {
            let point = |v: &Var| {
                if v.is_diagonal() {
                    crate::poly::point_value(seed, k, v.lo(), v.hi())
                } else {
                    0
                }
            };
            if m.det_mod(&point) != 0 {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Every node expanded while deriving the constraint of `pair`, seeds
/// included, has an identifying-system constraint whose polynomial
/// contains a diagonal-only monomial.
pub fn i_primary_certificate(
    g: &MixedGraph,
    fam: &IdentifyingFamily,
    pair: (usize, usize),
    cap: usize,
) -> Result<IVerdict> {
    let d = derive_traced(g, fam, pair)?;
    for u in [pair.0, pair.1].into_iter().chain(d.expanded) {
        if g.parents(u).is_empty() {
            continue;
        }
        let minor = a_minor_constraint(g, fam, u)?;
        if !has_diagonal_monomial(&minor, cap)? {
            return Ok(IVerdict::Unknown {
                node: g.name(u).to_string(),
            });
        }
    }
    Ok(IVerdict::Certified)
}
