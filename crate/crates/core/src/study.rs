//! Census of the mixed graphs on a few nodes whose models impose exactly
//! one polynomial constraint.
//!
//! A model imposing one constraint is an irreducible hypersurface, cut out
//! by a single irreducible generator. Its codimension comes from the rank
//! of the parametrization's Jacobian at a random point of `F_p`; the
//! generator is interpolated from model points, one multidegree block at a
//! time, smallest total degree first. Two graphs share a class when one's
//! generator, after some relabeling, vanishes on the other's model. Each
//! class is then scored by the best graphical constraints known for it:
//! derived over all members and identifying families, simplified by
//! rewrites, and optionally found by brute-force search.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io::{BufRead, Write as _};
use std::path::Path;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::{
    i_primary_certificate, pd_primary_certificate, CoreRef, IVerdict, CERTIFICATE_SEEDS,
};
use crate::constraint::GraphicalConstraint;
use crate::construct::derive_traced;
use crate::error::{Error, Result};
use crate::field::{self, Matrix};
use crate::graph::{default_names, enumerate_graphs, MixedGraph, Name, Permutations};
use crate::htc::{
    constraint_pairs, enumerate_identifying_families, find_identifying_family, validate_family,
    IdentifyingFamily,
};
use crate::oracle;
use crate::poly::{fingerprint, fingerprint_relabeled, Monomial, Polynomial, Var, DEFAULT_EXPANSION_CAP};
use crate::search::{match_target, Bounds, MatchMode, Target};
use crate::transform::{simplify, simplify_all_orders};

/// Model points used to decide class membership.
const CHECK_POINTS: u64 = 3;
/// Extra rows beyond the block size when interpolating.
const OVERSAMPLE: usize = 4;
/// Fixpoints explored when the greedy rewrite order fails to certify.
const ORDER_LIMIT: usize = 64;

// ---------------------------------------------------------------------------
// Model points over F_p

/// `Σ` at the `k`-th random parameter point, or `None` if `I - Λ` is
/// singular there.
pub fn model_point(g: &MixedGraph, seed: u64, k: u64) -> Option<Matrix> {
    let n = g.n();
    let value = |tag: &str, a: usize, b: usize| {
        field::hash_element(seed, k, &[tag, g.name(a).as_ref(), g.name(b).as_ref()])
    };
    let mut i_minus_lambda: Matrix = (0..n)
        .map(|i| (0..n).map(|j| u64::from(i == j)).collect())
        .collect();
    for &(u, v) in g.directed_edges() {
        i_minus_lambda[u][v] = field::neg(value("l", u, v));
    }
    let m = field::inverse(&i_minus_lambda)?;
    let mut omega = vec![vec![0u64; n]; n];
    for (i, row) in omega.iter_mut().enumerate() {
        row[i] = value("w", i, i);
    }
    for &(u, v) in g.bidirected_edges() {
        let x = value("w", u, v);
        omega[u][v] = x;
        omega[v][u] = x;
    }
    Some(field::matmul(&field::transpose(&m), &field::matmul(&omega, &m)))
}

/// Points `0, 1, …` skipping singular draws.
fn model_points(g: &MixedGraph, seed: u64, count: usize) -> Vec<Matrix> {
    (0..)
        .filter_map(|k| model_point(g, seed, k))
        .take(count)
        .collect()
}

/// Number of independent constraints: dimension of the covariance space
/// minus the generic rank of the parametrization's Jacobian.
pub fn codimension(g: &MixedGraph, seed: u64) -> usize {
    let n = g.n();
    let (m, sigma) = (0..)
        .find_map(|k| {
            let sigma = model_point(g, seed, k)?;
            // Recompute (I - Λ)^{-1} for the same draw.
            let mut iml: Matrix = (0..n)
                .map(|i| (0..n).map(|j| u64::from(i == j)).collect())
                .collect();
            for &(u, v) in g.directed_edges() {
                iml[u][v] = field::neg(field::hash_element(
                    seed,
                    k,
                    &["l", g.name(u).as_ref(), g.name(v).as_ref()],
                ));
            }
            Some((field::inverse(&iml)?, sigma))
        })
        .expect("a random point is nonsingular");
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    let mut columns: Vec<Vec<u64>> = Vec::new();
    for &(u, v) in g.directed_edges() {
        columns.push(
            pairs
                .iter()
                .map(|&(i, j)| {
                    field::add(field::mul(m[v][i], sigma[u][j]), field::mul(sigma[i][u], m[v][j]))
                })
                .collect(),
        );
    }
    for u in 0..n {
        columns.push(pairs.iter().map(|&(i, j)| field::mul(m[u][i], m[u][j])).collect());
    }
    for &(u, v) in g.bidirected_edges() {
        columns.push(
            pairs
                .iter()
                .map(|&(i, j)| field::add(field::mul(m[u][i], m[v][j]), field::mul(m[v][i], m[u][j])))
                .collect(),
        );
    }
    let rank = field::rank(columns, pairs.len());
    pairs.len() - rank
}

// ---------------------------------------------------------------------------
// Generators

/// A polynomial compiled against node indices for fast evaluation.
#[derive(Clone, Debug)]
struct Compiled {
    terms: Vec<(Vec<(usize, usize, u32)>, u64)>,
}

impl Compiled {
    fn new(p: &Polynomial, names: &[Name]) -> Compiled {
        let idx = |n: &Name| names.iter().position(|x| x == n).expect("variable of the graph");
        Compiled {
            terms: p
                .terms()
                .map(|(m, c)| {
                    let vars = m
                        .factors()
                        .iter()
                        .map(|(v, e)| (idx(v.lo()), idx(v.hi()), *e))
                        .collect();
                    (vars, field::from_rational(c).expect("coefficient invertible mod p"))
                })
                .collect(),
        }
    }

    /// Value at `σ'` with `σ'_{ij} = sigma[perm[i]][perm[j]]`.
    fn eval(&self, sigma: &Matrix, perm: &[usize]) -> u64 {
        self.terms.iter().fold(0, |acc, (vars, c)| {
            let t = vars.iter().fold(*c, |t, &(i, j, e)| {
                field::mul(t, field::pow(sigma[perm[i]][perm[j]], e as u64))
            });
            field::add(acc, t)
        })
    }
}

/// Exponent vectors over the pairs `i ≤ j` whose multidegree is `sig`.
fn block_monomials(n: usize, sig: &[u32]) -> Vec<Vec<u32>> {
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect();
    fn go(
        pairs: &[(usize, usize)],
        k: usize,
        rest: &mut Vec<u32>,
        exps: &mut Vec<u32>,
        out: &mut Vec<Vec<u32>>,
    ) {
        if k == pairs.len() {
            if rest.iter().all(|&r| r == 0) {
                out.push(exps.clone());
            }
            return;
        }
        let (i, j) = pairs[k];
        // Once every pair touching `i` is past, its budget must be spent.
        let max = if i == j { rest[i] / 2 } else { rest[i].min(rest[j]) };
        for e in 0..=max {
            if i == j {
                rest[i] -= 2 * e;
            } else {
                rest[i] -= e;
                rest[j] -= e;
            }
            exps[k] = e;
            let dead = (k + 1 == pairs.len() || pairs[k + 1].0 != i) && rest[i] != 0;
            if !dead {
                go(pairs, k + 1, rest, exps, out);
            }
            if i == j {
                rest[i] += 2 * e;
            } else {
                rest[i] += e;
                rest[j] += e;
            }
        }
        exps[k] = 0;
    }
    let mut out = Vec::new();
    go(&pairs, 0, &mut sig.to_vec(), &mut vec![0; pairs.len()], &mut out);
    out
}

/// Multidegrees with even positive sum at most `2 * max_degree`, bounded
/// componentwise by `bound`, by total degree then lexicographically.
fn candidate_signatures(n: usize, bound: Option<&[u32]>, max_degree: u32) -> Vec<Vec<u32>> {
    let cap: Vec<u32> = match bound {
        Some(b) => b.to_vec(),
        None => vec![2 * max_degree; n],
    };
    let limit = 2 * max_degree;
    let mut out = Vec::new();
    let mut cur = vec![0u32; n];
    fn go(k: usize, cap: &[u32], limit: u32, sum: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if k == cap.len() {
            if sum > 0 && sum % 2 == 0 {
                out.push(cur.clone());
            }
            return;
        }
        for x in 0..=cap[k].min(limit - sum) {
            cur[k] = x;
            go(k + 1, cap, limit, sum + x, cur, out);
        }
        cur[k] = 0;
    }
    go(0, &cap, limit, 0, &mut cur, &mut out);
    out.sort_by_key(|s| (s.iter().sum::<u32>(), s.clone()));
    out
}

fn exps_to_monomial(exps: &[u32], names: &[Name]) -> Monomial {
    let n = names.len();
    let pairs = (0..n).flat_map(|i| (i..n).map(move |j| (i, j)));
    Monomial::from_factors(pairs.zip(exps).flat_map(|((i, j), &e)| {
        std::iter::repeat_n(Var::from_names(names[i].clone(), names[j].clone()), e as usize)
    }))
}

/// Powers `σ_ij^e` for every pair `i ≤ j` and `e ≤ max`, pair-major.
fn power_table(sigma: &Matrix, max: u32) -> Vec<Vec<u64>> {
    let n = sigma.len();
    (0..n)
        .flat_map(|i| (i..n).map(move |j| (i, j)))
        .map(|(i, j)| {
            let mut row = Vec::with_capacity(max as usize + 1);
            let mut x = 1;
            for _ in 0..=max {
                row.push(x);
                x = field::mul(x, sigma[i][j]);
            }
            row
        })
        .collect()
}

fn exps_value(exps: &[u32], powers: &[Vec<u64>]) -> u64 {
    exps.iter()
        .zip(powers)
        .fold(1, |acc, (&e, row)| if e == 0 { acc } else { field::mul(acc, row[e as usize]) })
}

/// Integer-coefficient polynomial from a null vector mod p, or `None` if
/// some coefficient has no small rational preimage.
fn lift(null: &[u64], monos: &[Vec<u32>], names: &[Name]) -> Option<Polynomial> {
    let first = null.iter().copied().find(|&c| c != 0)?;
    let scale = field::inv(first);
    let mut coeffs = Vec::new();
    for (c, e) in null.iter().zip(monos) {
        if *c == 0 {
            continue;
        }
        coeffs.push((field::rational_reconstruct(field::mul(*c, scale))?, e));
    }
    let lcm = coeffs
        .iter()
        .fold(BigInt::one(), |l, (c, _)| l.lcm(c.denom()));
    let ints: Vec<(BigInt, &Vec<u32>)> = coeffs
        .iter()
        .map(|(c, e)| ((c * BigRational::from_integer(lcm.clone())).to_integer(), *e))
        .collect();
    let gcd = ints.iter().fold(BigInt::zero(), |g, (c, _)| g.gcd(c));
    let p = Polynomial::from_terms(ints.into_iter().map(|(c, e)| {
        (exps_to_monomial(e, names), BigRational::from_integer(c / &gcd))
    }));
    Some(p.normalize_sign())
}

/// Checks exactly, at rational model points, that `p` vanishes.
fn vanishes_exactly(p: &Polynomial, g: &MixedGraph, seed: u64, trials: u64) -> Result<bool> {
    for t in 0..trials {
        let params = oracle::sample_parameters(g, oracle::derive_seed(seed, t))?;
        let sigma = oracle::covariance(g, &params)?;
        let value = p.eval_rational(&|v: &Var| {
            sigma.get(v.lo(), v.hi()).expect("variable of the graph").clone()
        });
        if !value.is_zero() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// The irreducible generator of a one-constraint model: the nonzero
/// polynomial of least total degree vanishing on it. Models imposing more
/// constraints are not detected reliably; check the codimension first. `bound` limits its
/// multidegree (any constraint of the model gives one); without it, total
/// degree is capped by `max_degree`.
pub fn interpolate_generator(
    g: &MixedGraph,
    bound: Option<&BTreeMap<Name, u32>>,
    max_degree: u32,
    seed: u64,
) -> Result<Option<Polynomial>> {
    let n = g.n();
    let bound_vec: Option<Vec<u32>> =
        bound.map(|b| g.names().iter().map(|v| b.get(v).copied().unwrap_or(0)).collect());
    let max_degree = match &bound_vec {
        Some(b) => b.iter().sum::<u32>() / 2,
        None => max_degree,
    };
    let mut points: Vec<Vec<Vec<u64>>> = Vec::new();
    let mut next_k = 0u64;
    for sig in candidate_signatures(n, bound_vec.as_deref(), max_degree) {
        let monos = block_monomials(n, &sig);
        if monos.is_empty() {
            continue;
        }
        let rows = monos.len() + OVERSAMPLE;
        while points.len() < rows {
            if let Some(p) = model_point(g, seed ^ 0x1a7e, next_k) {
                points.push(power_table(&p, max_degree));
            }
            next_k += 1;
        }
        let matrix: Matrix = points[..rows]
            .iter()
            .map(|s| monos.iter().map(|e| exps_value(e, s)).collect())
            .collect();
        if field::rank(matrix.clone(), monos.len()) == monos.len() {
            continue;
        }
        let null = field::nullspace(matrix, monos.len());
        match null.len() {
            0 => continue,
            1 => {
                let p = lift(&null[0], &monos, g.names()).ok_or_else(|| {
                    Error::Interpolation("coefficients have no small rational preimage".into())
                })?;
                if !vanishes_exactly(&p, g, seed, 2)? {
                    return Err(Error::Interpolation(
                        "interpolated polynomial does not vanish exactly".into(),
                    ));
                }
                return Ok(Some(p));
            }
            k => {
                return Err(Error::Interpolation(format!(
                    "{k} independent polynomials of least degree; the model imposes more than one constraint"
                )))
            }
        }
    }
    Ok(None)
}

// ---------------------------------------------------------------------------
// Class signatures from derived constraints

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClassSignature {
    NonHtc(String),
    Cores(Vec<Vec<u64>>),
}

/// The multiset of simplified and peeled core constraints derived with one
/// family, as normalized fingerprints, minimized over relabelings of the
/// nodes onto `a, b, …`.
pub fn class_signature(g: &MixedGraph, seed: u64) -> Result<ClassSignature> {
    let Some(fam) = find_identifying_family(g) else {
        return Ok(ClassSignature::NonHtc(g.canonical_form()?));
    };
    let mut cores: Vec<Polynomial> = Vec::new();
    let mut sampled: Vec<GraphicalConstraint> = Vec::new();
    for pair in constraint_pairs(g, &fam) {
        let raw = derive_traced(g, &fam, pair)?.constraint;
        let s = simplify(&raw)?;
        let core = vanishing_component(&s.all(), g, seed).unwrap_or(s.core);
        if core.row_count() <= DEFAULT_EXPANSION_CAP {
            let p = core.polynomial(DEFAULT_EXPANSION_CAP)?;
            let (residual, _) = crate::classify::peel_principal_minors(&p, DEFAULT_EXPANSION_CAP)?;
            cores.push(residual);
        } else {
            sampled.push(core);
        }
    }
    let canon = default_names(g.n());
    let mut best: Option<Vec<Vec<u64>>> = None;
    for perm in Permutations::new(g.n()) {
        let rename = |v: &Name| -> Name {
            let i = g.names().iter().position(|x| x == v).expect("graph variable");
            canon[perm[i]].clone()
        };
        let mut fps: Vec<Vec<u64>> = cores
            .iter()
            .map(|p| fingerprint_relabeled(p, seed, &rename).normalized())
            .collect();
        for gc in &sampled {
            let m = gc.build_matrix()?;
            fps.push(fingerprint_relabeled(&m, seed, &rename).normalized());
        }
        fps.sort();
        if best.as_ref().is_none_or(|b| fps < *b) {
            best = Some(fps);
        }
    }
    Ok(ClassSignature::Cores(best.unwrap_or_default()))
}

/// First component whose determinant vanishes at model points of `g`.
fn vanishing_component(
    parts: &[GraphicalConstraint],
    g: &MixedGraph,
    seed: u64,
) -> Option<GraphicalConstraint> {
    let points = model_points(g, seed ^ 0xc0c0, 2);
    parts
        .iter()
        .find(|c| constraint_vanishes(c, g, &points).unwrap_or(false))
        .cloned()
}

fn constraint_vanishes(gc: &GraphicalConstraint, g: &MixedGraph, points: &[Matrix]) -> Result<bool> {
    let m = gc.build_matrix()?;
    for sigma in points {
        let point = |v: &Var| {
            let i = g.index(v.lo()).expect("graph variable");
            let j = g.index(v.hi()).expect("graph variable");
            sigma[i][j]
        };
        if m.det_mod(&point) != 0 {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Census

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeMode {
    Exact,
    AtLeast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilyChoice {
    /// `Y_v = pa(v)` when that is a valid family, else the default search.
    Parents,
    /// Every identifying family, up to the limit.
    All,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusConfig {
    pub nodes: usize,
    pub edges: usize,
    pub edge_mode: EdgeMode,
    pub allow_bows: bool,
    pub allow_cycles: bool,
    pub families: FamilyChoice,
    pub family_limit: usize,
    /// Degree cap when interpolating generators of graphs without an
    /// identifying family.
    pub max_degree: u32,
    pub search: Option<Bounds>,
    /// Stop after this many isomorphism classes of graphs.
    pub graph_budget: Option<usize>,
    pub seed: u64,
}

impl CensusConfig {
    pub fn new(nodes: usize, edges: usize, edge_mode: EdgeMode) -> Self {
        CensusConfig {
            nodes,
            edges,
            edge_mode,
            allow_bows: true,
            allow_cycles: true,
            families: FamilyChoice::All,
            family_limit: 32,
            max_degree: 14,
            search: None,
            graph_budget: None,
            seed: 1,
        }
    }
}

/// Best graphical form known for a class.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FormStatus {
    Tree,
    Nontree,
    /// Exhaustive search within bounds covering the degree found nothing.
    None,
    Unknown,
}

impl FormStatus {
    pub fn label(self) -> &'static str {
        match self {
            FormStatus::Tree => "tree",
            FormStatus::Nontree => "nontree",
            FormStatus::None => "none",
            FormStatus::Unknown => "?",
        }
    }

    fn of(gc: &GraphicalConstraint) -> FormStatus {
        if gc.is_tree() {
            FormStatus::Tree
        } else {
            FormStatus::Nontree
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassReport {
    pub id: usize,
    pub representative: String,
    pub members: usize,
    pub htc_members: usize,
    pub edge_counts: Vec<usize>,
    pub degree: u32,
    pub generator: String,
    pub derived: usize,
    /// Member and family combinations whose raw output is not PD-certified.
    pub raw_pd_failures: usize,
    /// The same after rewriting, counting only those no rewrite order fixes.
    pub simplified_pd_failures: usize,
    pub i_unknown: usize,
    pub guard_trips: usize,
    pub primary: FormStatus,
    pub pd_primary: FormStatus,
    pub best_constraint: Option<serde_json::Value>,
    pub violations: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableRow {
    pub primary: String,
    pub pd_primary: String,
    pub classes: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusReport {
    pub config: CensusConfig,
    pub labelled_graphs: usize,
    pub graph_classes: usize,
    pub codimensions: BTreeMap<usize, usize>,
    pub one_constraint_graphs: usize,
    pub unresolved: Vec<String>,
    pub coverage: String,
    pub classes: Vec<ClassReport>,
    pub table: Vec<TableRow>,
    pub total: usize,
    pub invariants_ok: bool,
}

impl CensusReport {
    /// Classes with a member whose raw output was not PD-certified.
    pub fn raw_failure_classes(&self) -> usize {
        self.classes.iter().filter(|c| c.raw_pd_failures > 0).count()
    }

    pub fn simplified_failure_classes(&self) -> usize {
        self.classes
            .iter()
            .filter(|c| c.simplified_pd_failures > 0)
            .count()
    }

    pub fn count(&self, primary: FormStatus, pd: FormStatus) -> usize {
        self.classes
            .iter()
            .filter(|c| c.primary == primary && c.pd_primary == pd)
            .count()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum Checkpoint {
    Codimension { graph: String, codim: usize },
    Class { key: String, report: ClassReport },
}

struct Store {
    codims: BTreeMap<String, usize>,
    classes: BTreeMap<String, ClassReport>,
    out: Option<std::fs::File>,
}

impl Store {
    fn open(path: Option<&Path>) -> Result<Store> {
        let mut store = Store {
            codims: BTreeMap::new(),
            classes: BTreeMap::new(),
            out: None,
        };
        let Some(path) = path else { return Ok(store) };
        if path.exists() {
            let file = std::fs::File::open(path)?;
            for line in std::io::BufReader::new(file).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str(&line)? {
                    Checkpoint::Codimension { graph, codim } => {
                        store.codims.insert(graph, codim);
                    }
                    Checkpoint::Class { key, report } => {
                        store.classes.insert(key, report);
                    }
                }
            }
        }
        store.out = Some(
            std::fs::OpenOptions::new()
                .create(true)
                .append(true)
                .open(path)?,
        );
        Ok(store)
    }

    fn append(&mut self, record: &Checkpoint) -> Result<()> {
        if let Some(f) = &mut self.out {
            writeln!(f, "{}", serde_json::to_string(record)?)?;
        }
        Ok(())
    }
}

struct Member {
    graph: MixedGraph,
    /// Node `i` of the class representative corresponds to node `perm[i]`.
    perm: Vec<usize>,
    htc: bool,
}

struct Class {
    generator: Polynomial,
    compiled: Compiled,
    members: Vec<Member>,
}

fn perm_inverse(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (i, &p) in perm.iter().enumerate() {
        inv[p] = i;
    }
    inv
}

/// Renames representative variables to member variables.
fn to_member(rep: &MixedGraph, member: &Member) -> impl Fn(&Name) -> Name {
    let names = member.graph.names().to_vec();
    let rep_names = rep.names().to_vec();
    let perm = member.perm.clone();
    move |v: &Name| {
        let i = rep_names.iter().position(|x| x == v).expect("representative variable");
        names[perm[i]].clone()
    }
}

fn edge_range(cfg: &CensusConfig) -> Vec<usize> {
    let n = cfg.nodes;
    let pairs = n * (n.saturating_sub(1)) / 2;
    let per_pair = match (cfg.allow_bows, cfg.allow_cycles) {
        (true, true) => 3,
        (true, false) | (false, true) => 2,
        (false, false) => 1,
    };
    match cfg.edge_mode {
        EdgeMode::Exact => vec![cfg.edges],
        EdgeMode::AtLeast => (cfg.edges..=pairs * per_pair).collect(),
    }
}

/// Every graph within the configuration, one per isomorphism class, in
/// canonical labelling, sorted by edge count and canonical code.
fn canonical_graphs(cfg: &CensusConfig) -> Result<(usize, Vec<MixedGraph>)> {
    let names = default_names(cfg.nodes);
    let mut labelled = 0;
    let mut reps: BTreeMap<(usize, u128), MixedGraph> = BTreeMap::new();
    for m in edge_range(cfg) {
        let graphs: Vec<MixedGraph> =
            enumerate_graphs(cfg.nodes, m, cfg.allow_bows, cfg.allow_cycles).collect();
        labelled += graphs.len();
        let canon: Vec<(u128, MixedGraph)> = graphs
            .par_iter()
            .map(|g| {
                let (code, perm) = g.canonical_code()?;
                Ok((code, g.relabel(&perm, names.clone())?))
            })
            .collect::<Result<_>>()?;
        for (code, g) in canon {
            reps.entry((m, code)).or_insert(g);
        }
    }
    Ok((labelled, reps.into_values().collect()))
}

fn families_of(g: &MixedGraph, cfg: &CensusConfig) -> Vec<IdentifyingFamily> {
    match cfg.families {
        FamilyChoice::Parents => IdentifyingFamily::parents(g)
            .filter(|f| validate_family(g, f).unwrap_or(false))
            .or_else(|| find_identifying_family(g))
            .into_iter()
            .collect(),
        FamilyChoice::All => enumerate_identifying_families(g, cfg.family_limit).collect(),
    }
}

/// Smallest slot signature over the derived constraints of one family.
fn raw_bound(g: &MixedGraph) -> Option<BTreeMap<Name, u32>> {
    let fam = find_identifying_family(g)?;
    constraint_pairs(g, &fam)
        .into_iter()
        .filter_map(|p| derive_traced(g, &fam, p).ok())
        .map(|d| d.constraint.slot_signature())
        .min_by_key(|s| s.values().sum::<u32>())
}

fn assign_classes(
    graphs: Vec<MixedGraph>,
    cfg: &CensusConfig,
    unresolved: &mut Vec<String>,
) -> Result<Vec<Class>> {
    let perms: Vec<Vec<usize>> = Permutations::new(cfg.nodes).collect();
    let mut classes: Vec<Class> = Vec::new();
    for g in graphs {
        let htc = find_identifying_family(&g).is_some();
        let points = model_points(&g, cfg.seed ^ 0xc1a55, CHECK_POINTS as usize);
        let found = classes.iter().enumerate().find_map(|(c, class)| {
            perms
                .iter()
                .find(|perm| points.iter().all(|s| class.compiled.eval(s, perm) == 0))
                .map(|perm| (c, perm.clone()))
        });
        if let Some((c, perm)) = found {
            classes[c].members.push(Member { graph: g, perm, htc });
            continue;
        }
        let bound = if htc { raw_bound(&g) } else { None };
        match interpolate_generator(&g, bound.as_ref(), cfg.max_degree, cfg.seed) {
            Ok(Some(generator)) => {
                let compiled = Compiled::new(&generator, g.names());
                classes.push(Class {
                    generator,
                    compiled,
                    members: vec![Member {
                        perm: (0..g.n()).collect(),
                        graph: g,
                        htc,
                    }],
                });
            }
            Ok(None) => unresolved.push(format!("{} (no generator up to degree {})", g.to_text().replace('\n', "; "), cfg.max_degree)),
            Err(e) => unresolved.push(format!("{} ({e})", g.to_text().replace('\n', "; "))),
        }
    }
    Ok(classes)
}

struct Candidate {
    gc: GraphicalConstraint,
    member: usize,
}

fn score_class(id: usize, class: &Class, cfg: &CensusConfig) -> Result<ClassReport> {
    let rep = &class.members[0].graph;
    let degree = class.generator.degree().unwrap_or(0);
    let mut report = ClassReport {
        id,
        representative: rep.to_text().replace('\n', "; "),
        members: class.members.len(),
        htc_members: class.members.iter().filter(|m| m.htc).count(),
        edge_counts: class
            .members
            .iter()
            .map(|m| m.graph.edge_count())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect(),
        degree,
        generator: class.generator.to_string(),
        derived: 0,
        raw_pd_failures: 0,
        simplified_pd_failures: 0,
        i_unknown: 0,
        guard_trips: 0,
        primary: FormStatus::Unknown,
        pd_primary: FormStatus::Unknown,
        best_constraint: None,
        violations: Vec::new(),
    };
    let mut primary: Vec<Candidate> = Vec::new();
    let mut pd: Vec<Candidate> = Vec::new();
    let mut first_raw: Option<(usize, GraphicalConstraint)> = None;

    for (mi, member) in class.members.iter().enumerate() {
        if !member.htc {
            continue;
        }
        let g = &member.graph;
        let rename = to_member(rep, member);
        let target = class.generator.renamed(&rename);
        let core_ref = CoreRef::Sampled {
            fingerprints: CERTIFICATE_SEEDS.iter().map(|&s| fingerprint(&target, s)).collect(),
            signature: target.homogeneity_signature()?,
        };
        let is_primary = |gc: &GraphicalConstraint| -> Result<bool> {
            for (k, &s) in CERTIFICATE_SEEDS.iter().enumerate() {
                let fp = gc.fingerprint(s)?;
                let CoreRef::Sampled { fingerprints, .. } = &core_ref else { unreachable!() };
                if !fp.equal_up_to_scalar(&fingerprints[k])? {
                    return Ok(false);
                }
            }
            Ok(true)
        };
        let certified = |gc: &GraphicalConstraint| -> Result<bool> {
            Ok(pd_primary_certificate(gc, &core_ref, DEFAULT_EXPANSION_CAP)?.is_certified())
        };
        let points = model_points(g, cfg.seed ^ 0x7e57, 2);
        for fam in families_of(g, cfg) {
            for pair in constraint_pairs(g, &fam) {
                let raw = match derive_traced(g, &fam, pair) {
                    Ok(d) => d.constraint,
                    Err(Error::CycleInIdentification { .. }) => {
                        report.guard_trips += 1;
                        continue;
                    }
                    Err(e) => return Err(e),
                };
                report.derived += 1;
                if !constraint_vanishes(&raw, g, &points)? {
                    report
                        .violations
                        .push(format!("derived constraint does not vanish on {}", g.to_text()));
                    continue;
                }
                if first_raw.is_none() {
                    first_raw = Some((mi, raw.clone()));
                }
                if let IVerdict::Unknown { .. } =
                    i_primary_certificate(g, &fam, pair, DEFAULT_EXPANSION_CAP)?
                {
                    report.i_unknown += 1;
                }
                let raw_ok = certified(&raw)?;
                if raw_ok {
                    pd.push(Candidate { gc: raw.clone(), member: mi });
                    if is_primary(&raw)? {
                        primary.push(Candidate { gc: raw.clone(), member: mi });
                    }
                } else {
                    report.raw_pd_failures += 1;
                }
                let greedy = simplify(&raw)?;
                let mut outcomes = vec![greedy.all()];
                let greedy_core = vanishing_component(&greedy.all(), g, cfg.seed);
                let greedy_ok = match &greedy_core {
                    Some(c) => certified(c)?,
                    None => false,
                };
                if !greedy_ok {
                    outcomes.extend(simplify_all_orders(&raw, ORDER_LIMIT)?);
                }
                let mut fixed = raw_ok;
                for parts in outcomes {
                    let Some(core) = vanishing_component(&parts, g, cfg.seed) else {
                        report
                            .violations
                            .push(format!("rewrite lost the vanishing factor on {}", g.to_text()));
                        continue;
                    };
                    if certified(&core)? {
                        fixed = true;
                        if is_primary(&core)? {
                            primary.push(Candidate { gc: core.clone(), member: mi });
                        }
                        pd.push(Candidate { gc: core, member: mi });
                    }
                }
                if !fixed {
                    report.simplified_pd_failures += 1;
                }
            }
        }
    }

    let best = |cands: &[Candidate]| -> Option<(FormStatus, GraphicalConstraint)> {
        cands
            .iter()
            .map(|c| {
                let inv = perm_inverse(&class.members[c.member].perm);
                let member = &class.members[c.member].graph;
                let back = |v: &Name| -> Name {
                    let i = member.names().iter().position(|x| x == v).expect("member variable");
                    rep.names()[inv[i]].clone()
                };
                (FormStatus::of(&c.gc), c.gc.relabeled(&back).renumbered())
            })
            .min_by_key(|(s, gc)| (*s, gc.row_count(), gc.node_count(), gc.to_json()))
    };
    let best_primary = best(&primary);
    let best_pd = best(&pd);
    if let Some((s, _)) = &best_pd {
        report.pd_primary = *s;
    }
    if let Some((s, _)) = &best_primary {
        report.primary = *s;
    }
    let mut shown = best_primary.or(best_pd).map(|(_, gc)| gc);

    if report.primary == FormStatus::Unknown {
        if let Some(bounds) = cfg.search {
            let target = Target::from_polynomial(&class.generator)?;
            let hits = match_target(&target, rep.names(), bounds, MatchMode::UpToScalar)?;
            if let Some(hit) = hits.first() {
                report.primary = FormStatus::of(hit);
                if report.pd_primary == FormStatus::Unknown || report.pd_primary > report.primary {
                    report.pd_primary = report.primary;
                }
                shown = Some(hit.renumbered());
            } else if !bounds.trees_only
                && bounds.max_slots >= degree as usize
                && bounds.max_nodes >= 2 * degree as usize
            {
                report.primary = FormStatus::None;
            }
        }
    }
    report.best_constraint = shown
        .map(|gc| serde_json::from_str(&gc.to_json()))
        .transpose()?;

    // Cross-vanishing: the first derived constraint, moved to another
    // member's variables, holds exactly on that member's model.
    if let Some((m0, raw)) = first_raw {
        let inv0 = perm_inverse(&class.members[m0].perm);
        let g0 = &class.members[m0].graph;
        for (mi, member) in class.members.iter().enumerate().filter(|(i, _)| *i != m0).take(4) {
            let moved = raw.relabeled(&|v: &Name| {
                let i = g0.names().iter().position(|x| x == v).expect("member variable");
                member.graph.names()[member.perm[inv0[i]]].clone()
            });
            for t in 0..2 {
                let params = oracle::sample_parameters(&member.graph, oracle::derive_seed(cfg.seed, t))?;
                let sigma = oracle::covariance(&member.graph, &params)?;
                if !moved.satisfies(&sigma)? {
                    report.violations.push(format!(
                        "class {id}: constraint of member 0 fails on member {mi}"
                    ));
                }
            }
        }
    }
    Ok(report)
}

/// Rows in the order the summary table lists them; any other observed
/// combination follows.
const FIXED_ROWS: [(FormStatus, FormStatus); 5] = [
    (FormStatus::Tree, FormStatus::Tree),
    (FormStatus::Nontree, FormStatus::Tree),
    (FormStatus::None, FormStatus::Tree),
    (FormStatus::Unknown, FormStatus::Tree),
    (FormStatus::Unknown, FormStatus::Unknown),
];

fn table(classes: &[ClassReport]) -> Vec<TableRow> {
    let mut counts: BTreeMap<(FormStatus, FormStatus), usize> = BTreeMap::new();
    for c in classes {
        *counts.entry((c.primary, c.pd_primary)).or_insert(0) += 1;
    }
    let mut rows: Vec<TableRow> = FIXED_ROWS
        .iter()
        .map(|&(p, d)| TableRow {
            primary: p.label().into(),
            pd_primary: d.label().into(),
            classes: counts.remove(&(p, d)).unwrap_or(0),
        })
        .collect();
    rows.extend(counts.into_iter().map(|((p, d), k)| TableRow {
        primary: p.label().into(),
        pd_primary: d.label().into(),
        classes: k,
    }));
    rows
}

/// Runs the census. With a checkpoint path, codimensions and finished
/// class reports are appended as JSON lines and reused on the next run.
pub fn census(cfg: &CensusConfig, checkpoint: Option<&Path>) -> Result<CensusReport> {
    if cfg.nodes < 2 || cfg.nodes > 5 {
        return Err(Error::Unsupported("census supports 2 to 5 nodes".into()));
    }
    let mut store = Store::open(checkpoint)?;
    let (labelled, mut graphs) = canonical_graphs(cfg)?;
    let mut coverage = format!("all {} graph classes", graphs.len());
    if let Some(budget) = cfg.graph_budget {
        if graphs.len() > budget {
            coverage = format!("first {budget} of {} graph classes", graphs.len());
            graphs.truncate(budget);
        }
    }
    let graph_classes = graphs.len();

    let keys: Vec<String> = graphs
        .iter()
        .map(|g| g.canonical_form())
        .collect::<Result<_>>()?;
    let codims: Vec<usize> = graphs
        .par_iter()
        .zip(&keys)
        .map(|(g, k)| store.codims.get(k).copied().unwrap_or_else(|| codimension(g, cfg.seed)))
        .collect();
    for (k, &c) in keys.iter().zip(&codims) {
        if !store.codims.contains_key(k) {
            store.append(&Checkpoint::Codimension { graph: k.clone(), codim: c })?;
        }
    }
    let mut histogram = BTreeMap::new();
    for &c in &codims {
        *histogram.entry(c).or_insert(0) += 1;
    }
    let (mut htc, mut other): (Vec<MixedGraph>, Vec<MixedGraph>) = graphs
        .into_iter()
        .zip(&codims)
        .filter(|(_, &c)| c == 1)
        .map(|(g, _)| g)
        .partition(|g| find_identifying_family(g).is_some());
    let one_constraint = htc.len() + other.len();
    htc.append(&mut other);

    let mut unresolved = Vec::new();
    let classes = assign_classes(htc, cfg, &mut unresolved)?;
    let class_keys: Vec<String> = classes
        .iter()
        .map(|c| c.members[0].graph.canonical_form())
        .collect::<Result<_>>()?;
    let reports: Vec<ClassReport> = classes
        .par_iter()
        .enumerate()
        .map(|(i, c)| match store.classes.get(&class_keys[i]) {
            Some(r) if r.members == c.members.len() => Ok(ClassReport { id: i, ..r.clone() }),
            _ => score_class(i, c, cfg),
        })
        .collect::<Result<_>>()?;
    for (k, r) in class_keys.iter().zip(&reports) {
        if !store.classes.contains_key(k) {
            store.append(&Checkpoint::Class {
                key: k.clone(),
                report: r.clone(),
            })?;
        }
    }
    let invariants_ok = reports.iter().all(|r| r.violations.is_empty());
    Ok(CensusReport {
        config: cfg.clone(),
        labelled_graphs: labelled,
        graph_classes,
        codimensions: histogram,
        one_constraint_graphs: one_constraint,
        unresolved,
        coverage,
        table: table(&reports),
        total: reports.len(),
        classes: reports,
        invariants_ok,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Text,
}

pub fn report_render(report: &CensusReport, format: ReportFormat) -> Result<String> {
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)?),
        ReportFormat::Text => Ok(render_text(report)),
    }
}

pub fn report_parse(text: &str) -> Result<CensusReport> {
    Ok(serde_json::from_str(text)?)
}

fn render_text(r: &CensusReport) -> String {
    let c = &r.config;
    let mut s = String::new();
    let mode = match c.edge_mode {
        EdgeMode::Exact => "exactly",
        EdgeMode::AtLeast => "at least",
    };
    let _ = writeln!(
        s,
        "{} nodes, {mode} {} edges, bows {}, cycles {}",
        c.nodes,
        c.edges,
        if c.allow_bows { "allowed" } else { "excluded" },
        if c.allow_cycles { "allowed" } else { "excluded" },
    );
    let _ = writeln!(
        s,
        "graphs: {} labelled, {} up to isomorphism ({}), {} imposing one constraint",
        r.labelled_graphs, r.graph_classes, r.coverage, r.one_constraint_graphs
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<10}{:<12}{:>8}", "primary", "PD-primary", "classes");
    for row in &r.table {
        let _ = writeln!(s, "{:<10}{:<12}{:>8}", row.primary, row.pd_primary, row.classes);
    }
    let _ = writeln!(s, "{:<22}{:>8}", "total", r.total);
    let _ = writeln!(s);
    let _ = writeln!(
        s,
        "classes with non-PD-certified raw output: {}, after rewriting: {}",
        r.raw_failure_classes(),
        r.simplified_failure_classes()
    );
    if !r.unresolved.is_empty() {
        let _ = writeln!(s, "graphs without a generator: {}", r.unresolved.len());
    }
    let _ = writeln!(s, "invariant checks: {}", if r.invariants_ok { "passed" } else { "FAILED" });
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::bow_free_graph;
    use crate::poly::parse_poly;

    #[test]
    fn codimension_matches_parameter_count_for_identifiable_graphs() {
        // 4 nodes: 10 covariances, 4 variances plus one per edge.
        assert_eq!(codimension(&bow_free_graph(), 3), 10 - 4 - 5);
        let g = MixedGraph::parse("nodes a b").unwrap();
        assert_eq!(codimension(&g, 3), 1);
        // Saturated: no constraint.
        let g = MixedGraph::parse("nodes a b c\ndir a b\ndir b c\ndir a c").unwrap();
        assert_eq!(codimension(&g, 3), 0);
        // Unidentifiable: a bow on two nodes has 4 parameters for 3 entries.
        let g = MixedGraph::parse("nodes a b\ndir a b\nbi a b").unwrap();
        assert_eq!(codimension(&g, 3), 0);
    }

    #[test]
    fn block_monomials_by_brute_force() {
        let sig = [2, 1, 1];
        let monos = block_monomials(3, &sig);
        // σ_aa σ_bc, σ_ab σ_ac.
        assert_eq!(monos.len(), 2);
        for sig in [[2u32, 2, 0], [1, 1, 2], [2, 2, 2], [4, 0, 0]] {
            let ours = block_monomials(3, &sig).len();
            // Oracle: all exponent vectors of bounded size.
            let mut count = 0;
            let total: u32 = sig.iter().sum::<u32>() / 2;
            for e in exponent_vectors(6, total) {
                let mut d = [0u32; 3];
                let pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)];
                for (k, &(i, j)) in pairs.iter().enumerate() {
                    d[i] += e[k];
                    d[j] += e[k];
                }
                if d == sig {
                    count += 1;
                }
            }
            assert_eq!(ours, count, "{sig:?}");
        }
    }

    fn exponent_vectors(len: usize, max: u32) -> Vec<Vec<u32>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|v: Vec<u32>| {
                    (0..=max).map(move |x| {
                        let mut w = v.clone();
                        w.push(x);
                        w
                    })
                })
                .collect();
        }
        out
    }

    #[test]
    fn interpolates_known_generators() {
        let g = MixedGraph::parse("nodes a b").unwrap();
        let f = interpolate_generator(&g, None, 4, 1).unwrap().unwrap();
        assert_eq!(f, Polynomial::sigma("a", "b"));

        // Chain a -> b -> c: σ_ac σ_bb - σ_ab σ_bc.
        let g = MixedGraph::parse("nodes a b c\ndir a b\ndir b c").unwrap();
        let f = interpolate_generator(&g, None, 4, 1).unwrap().unwrap();
        let expected = parse_poly("+1 s[a,c] s[b,b] -1 s[a,b] s[b,c]");
        assert_eq!(f.monic(), expected.monic());

        // The derived constraint of this graph has no spurious factor.
        let f = interpolate_generator(&bow_free_graph(), None, 4, 1).unwrap().unwrap();
        assert_eq!(f.monic(), crate::constraint::bow_free_constraint().polynomial(8).unwrap().monic());
        let bound = crate::constraint::bow_free_constraint().slot_signature();
        let g = interpolate_generator(&bow_free_graph(), Some(&bound), 0, 1).unwrap().unwrap();
        assert_eq!(f, g);
    }

    #[test]
    fn signatures_ignore_renaming_and_separate_saturated_graphs() {
        let g = bow_free_graph();
        let h = MixedGraph::parse(&g.to_text().replace(" a", " x").replace(" b", " a").replace(" x", " b"))
            .unwrap();
        assert_ne!(g.to_text(), h.to_text());
        assert_eq!(class_signature(&g, 5).unwrap(), class_signature(&h, 5).unwrap());
        let sat = MixedGraph::parse("nodes a b c\ndir a b\ndir b c\ndir a c").unwrap();
        assert_eq!(class_signature(&sat, 5).unwrap(), ClassSignature::Cores(vec![]));
        assert_ne!(class_signature(&g, 5).unwrap(), class_signature(&sat, 5).unwrap());
    }

    fn small(n: usize) -> CensusConfig {
        let mut cfg = CensusConfig::new(n, 0, EdgeMode::AtLeast);
        cfg.family_limit = 8;
        cfg
    }

    #[test]
    fn two_node_census() {
        let r = census(&small(2), None).unwrap();
        // The empty graph imposes σ_ab = 0; every other graph imposes nothing.
        assert_eq!(r.total, 1);
        assert!(r.codimensions[&0] > 0);
        assert_eq!(r.classes[0].generator, "+1 s[a,b]");
        assert_eq!(r.classes[0].primary, FormStatus::Tree);
        assert!(r.invariants_ok);
        for fmt in [ReportFormat::Json, ReportFormat::Text] {
            let text = report_render(&r, fmt).unwrap();
            assert!(!text.is_empty());
        }
        let json = report_render(&r, ReportFormat::Json).unwrap();
        let back = report_parse(&json).unwrap();
        assert_eq!(back, r);
        assert_eq!(report_render(&back, ReportFormat::Json).unwrap(), json);
    }

    #[test]
    fn three_node_census_is_deterministic_and_checkpointed() {
        let cfg = small(3);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("census.jsonl");
        let first = census(&cfg, Some(&path)).unwrap();
        let resumed = census(&cfg, Some(&path)).unwrap();
        assert_eq!(first, resumed);
        let plain = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| census(&cfg, None).unwrap());
        assert_eq!(first, plain);
        assert!(first.invariants_ok);
        assert_eq!(first.table.iter().map(|r| r.classes).sum::<usize>(), first.total);
        let text = report_render(&first, ReportFormat::Text).unwrap();
        let total_line = text.lines().find(|l| l.starts_with("total")).unwrap();
        assert!(total_line.ends_with(&first.total.to_string()));
    }
}
