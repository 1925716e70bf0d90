//! Exact ground truth: parameter sampling, model covariances,
//! identification of the edge weights from a covariance matrix, and
//! vanishing tests for constraints.
//!
//! Nothing here uses floating point. A constraint "vanishes" when the exact
//! rational determinant is zero.

use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constraint::{CovarianceMatrix, GraphicalConstraint};
use crate::error::{Error, Result};
use crate::field;
use crate::graph::MixedGraph;
use crate::htc::IdentifyingFamily;
use crate::linalg::{self, QMatrix};

/// Resampling budget for `I - Λ` singular.
pub const RESAMPLE_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Parameters {
    /// `lambda[u][v]` is the weight of `u → v`.
    pub lambda: QMatrix,
    pub omega: QMatrix,
}

/// Independent seed for trial `index` of a run seeded with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    field::hash_element(seed, index, &["trial"])
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// `k/8` with `k ∈ [-16, 16] \ {0}`.
fn small_rational(rng: &mut ChaCha8Rng) -> BigRational {
    let k = rng.gen_range(1..=16) * if rng.gen_bool(0.5) { 1 } else { -1 };
    q(k, 8)
}

pub fn sample_parameters(g: &MixedGraph, seed: u64) -> Result<Parameters> {
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..RESAMPLE_LIMIT {
        let mut lambda = linalg::zeros(n, n);
        for &(u, v) in g.directed_edges() {
            lambda[u][v] = small_rational(&mut rng);
        }
        if linalg::det(&linalg::sub(&linalg::identity(n), &lambda)).is_zero() {
            continue;
        }
        let mut omega = linalg::zeros(n, n);
        for &(u, v) in g.bidirected_edges() {
            let x = small_rational(&mut rng);
            omega[u][v] = x.clone();
            omega[v][u] = x;
        }
        for i in 0..n {
            let off: BigRational = omega[i].iter().map(|x| x.abs()).sum();
            omega[i][i] = BigRational::one() + off;
        }
        return Ok(Parameters { lambda, omega });
    }
    Err(Error::ResampleExhausted(RESAMPLE_LIMIT))
}

/// `Σ = (I - Λ)^{-T} Ω (I - Λ)^{-1}`.
pub fn covariance(g: &MixedGraph, p: &Parameters) -> Result<CovarianceMatrix> {
    let n = g.n();
    let m = linalg::inverse(&linalg::sub(&linalg::identity(n), &p.lambda))
        .ok_or(Error::SingularSystem)?;
    let sigma = linalg::matmul(&linalg::matmul(&linalg::transpose(&m), &p.omega), &m);
    CovarianceMatrix::new(g.names().to_vec(), sigma)
}

/// A generic positive definite matrix `RᵀR + I` over the graph's nodes.
pub fn off_model_covariance(g: &MixedGraph, seed: u64) -> CovarianceMatrix {
    let n = g.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x0ff_0ff);
    let r: QMatrix = (0..n)
        .map(|_| (0..n).map(|_| small_rational(&mut rng)).collect())
        .collect();
    let mut s = linalg::matmul(&linalg::transpose(&r), &r);
    for (i, row) in s.iter_mut().enumerate() {
        row[i] += BigRational::one();
    }
    CovarianceMatrix::new(g.names().to_vec(), s).expect("RᵀR + I is positive definite")
}

/// `Σ` re-indexed by graph node order.
fn aligned(g: &MixedGraph, sigma: &CovarianceMatrix) -> Result<QMatrix> {
    let idx = g
        .names()
        .iter()
        .map(|v| sigma.index(v))
        .collect::<Result<Vec<_>>>()?;
    Ok(idx
        .iter()
        .map(|&i| idx.iter().map(|&j| sigma.values()[i][j].clone()).collect())
        .collect())
}

/// Row `y` of `(I - Λ)ᵀ Σ`, using only column `y` of `Λ`.
fn corrected_row(lambda: &QMatrix, s: &QMatrix, y: usize) -> Vec<BigRational> {
    let n = s.len();
    let mut row = s[y].clone();
    for k in 0..n {
        if lambda[k][y].is_zero() {
            continue;
        }
        for (c, x) in row.iter_mut().enumerate() {
            *x -= &lambda[k][y] * &s[k][c];
        }
    }
    row
}

/// The system `A x = b` for the parent weights of `v`, given the columns of
/// `Λ` already identified for the nodes of `Y_v ∩ htr(v)`.
fn system_for(
    g: &MixedGraph,
    fam: &IdentifyingFamily,
    s: &QMatrix,
    lambda: &QMatrix,
    v: usize,
) -> (QMatrix, Vec<BigRational>) {
    let pa: Vec<usize> = g.parents(v).iter().collect();
    let mut a = Vec::new();
    let mut b = Vec::new();
    for y in fam.sets[v].iter() {
        let row = if g.htr(v).contains(y) {
            corrected_row(lambda, s, y)
        } else {
            s[y].clone()
        };
        a.push(pa.iter().map(|&p| row[p].clone()).collect());
        b.push(row[v].clone());
    }
    (a, b)
}

/// `Λ` recovered from `Σ` by solving one linear system per node in the
/// family's order.
pub fn identify_lambda(
    g: &MixedGraph,
    fam: &IdentifyingFamily,
    sigma: &CovarianceMatrix,
) -> Result<QMatrix> {
    let s = aligned(g, sigma)?;
    let n = g.n();
    let mut lambda = linalg::zeros(n, n);
    for &v in &fam.order {
        let pa: Vec<usize> = g.parents(v).iter().collect();
        if pa.is_empty() {
            continue;
        }
        let (a, b) = system_for(g, fam, &s, &lambda, v);
        let x = linalg::solve(&a, &b).ok_or_else(|| Error::IdentificationUndefined {
            node: g.name(v).to_string(),
        })?;
        for (p, val) in pa.into_iter().zip(x) {
            lambda[p][v] = val;
        }
    }
    Ok(lambda)
}

/// `det A` of the identifying system of `v` at `Σ`; `1` when `v` has no
/// parents.
pub fn a_matrix_det(
    g: &MixedGraph,
    fam: &IdentifyingFamily,
    sigma: &CovarianceMatrix,
    v: usize,
) -> Result<BigRational> {
    let s = aligned(g, sigma)?;
    let lambda = identify_lambda(g, fam, sigma)?;
    let (a, _) = system_for(g, fam, &s, &lambda, v);
    Ok(linalg::det(&a))
}

/// `(I - Λ)ᵀ Σ (I - Λ)` with `Λ` identified from `Σ`.
pub fn residual_matrix(
    g: &MixedGraph,
    fam: &IdentifyingFamily,
    sigma: &CovarianceMatrix,
) -> Result<QMatrix> {
    let lambda = identify_lambda(g, fam, sigma)?;
    let s = aligned(g, sigma)?;
    let m = linalg::sub(&linalg::identity(g.n()), &lambda);
    Ok(linalg::matmul(&linalg::matmul(&linalg::transpose(&m), &s), &m))
}

/// Entry `(v, w)` of [`residual_matrix`]: the rational constraint of the pair.
pub fn rational_constraint_value(
    g: &MixedGraph,
    fam: &IdentifyingFamily,
    sigma: &CovarianceMatrix,
    pair: (usize, usize),
) -> Result<BigRational> {
    Ok(residual_matrix(g, fam, sigma)?[pair.0][pair.1].clone())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BatteryReport {
    pub trials: usize,
    pub model_pass: usize,
    pub offmodel_reject: usize,
    /// Trial indices where a model covariance did not satisfy the constraint.
    pub model_failures: Vec<usize>,
}

/// Tests `gc` on `trials` model covariances of `g` and on `trials` generic
/// positive definite matrices.
pub fn vanishing_battery(
    gc: &GraphicalConstraint,
    g: &MixedGraph,
    trials: usize,
    seed: u64,
) -> Result<BatteryReport> {
    let model: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let p = sample_parameters(g, derive_seed(seed, t as u64))?;
            gc.satisfies(&covariance(g, &p)?)
        })
        .collect::<Result<_>>()?;
    let off: Vec<bool> = (0..trials)
        .into_par_iter()
        .map(|t| gc.satisfies(&off_model_covariance(g, derive_seed(seed, (trials + t) as u64))))
        .collect::<Result<_>>()?;
    Ok(BatteryReport {
        trials,
        model_pass: model.iter().filter(|&&x| x).count(),
        offmodel_reject: off.iter().filter(|&&x| !x).count(),
        model_failures: (0..trials).filter(|&t| !model[t]).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraint::{cyclic_constraint, bow_free_constraint};
    use crate::construct::{derive_all, derive_traced};
    use crate::graph::{enumerate_graphs, cyclic_graph, bow_free_graph, Name};
    use crate::htc::{constraint_pairs, enumerate_identifying_families, cyclic_family};

    #[test]
    fn empty_graph_gives_diagonal_sigma() {
        let g = MixedGraph::parse("nodes a b c").unwrap();
        let p = sample_parameters(&g, 1).unwrap();
        assert!(p.lambda.iter().flatten().all(|x| x.is_zero()));
        let s = covariance(&g, &p).unwrap();
        assert_eq!(s.values(), &p.omega);
        assert_eq!(s.zero_pairs().len(), 3);
    }

    #[test]
    fn omega_support_follows_bidirected_edges() {
        let g = bow_free_graph();
        for seed in 0..10 {
            let p = sample_parameters(&g, seed).unwrap();
            for i in 0..4 {
                for j in 0..4 {
                    let expected = i == j || g.has_bidirected(i, j);
                    assert_eq!(!p.omega[i][j].is_zero(), expected);
                    let d = g.has_directed(i, j);
                    assert_eq!(!p.lambda[i][j].is_zero(), d);
                }
            }
            assert!(linalg::leading_minors(&p.omega).iter().all(|m| m.is_positive()));
        }
    }

    #[test]
    fn cyclic_graph_has_invertible_system() {
        let g = cyclic_graph();
        for seed in 0..25 {
            let p = sample_parameters(&g, seed).unwrap();
            let m = linalg::sub(&linalg::identity(4), &p.lambda);
            assert!(!linalg::det(&m).is_zero());
        }
        // a -> b -> a with weights forced to product 1 is rejected by the check.
        let g = MixedGraph::parse("nodes a b\ndir a b\ndir b a").unwrap();
        let mut lam = linalg::zeros(2, 2);
        lam[0][1] = q(2, 1);
        lam[1][0] = q(1, 2);
        let p = Parameters {
            lambda: lam,
            omega: linalg::identity(2),
        };
        assert!(matches!(covariance(&g, &p), Err(Error::SingularSystem)));
    }

    #[test]
    fn single_edge_covariance() {
        let g = MixedGraph::parse("nodes a b\ndir a b").unwrap();
        let l = q(3, 8);
        let mut lambda = linalg::zeros(2, 2);
        lambda[0][1] = l.clone();
        let p = Parameters {
            lambda,
            omega: linalg::identity(2),
        };
        let s = covariance(&g, &p).unwrap();
        assert_eq!(s.get("a", "a").unwrap(), &q(1, 1));
        assert_eq!(s.get("a", "b").unwrap(), &l);
        assert_eq!(s.get("b", "b").unwrap(), &(q(1, 1) + &l * &l));
    }

    #[test]
    fn covariance_is_symmetric_positive_definite() {
        for g in [cyclic_graph(), bow_free_graph()] {
            for seed in 0..10 {
                let s = covariance(&g, &sample_parameters(&g, seed).unwrap()).unwrap();
                assert!(linalg::is_symmetric(s.values()));
                assert!(s.is_positive_definite());
            }
        }
    }

    fn round_trip(g: &MixedGraph, fam: &IdentifyingFamily, seeds: u64) {
        for seed in 0..seeds {
            let p = sample_parameters(g, seed).unwrap();
            let s = covariance(g, &p).unwrap();
            assert_eq!(identify_lambda(g, fam, &s).unwrap(), p.lambda);
            assert_eq!(residual_matrix(g, fam, &s).unwrap(), p.omega);
        }
    }

    #[test]
    fn identification_round_trips() {
        let g = bow_free_graph();
        round_trip(&g, &IdentifyingFamily::parents(&g).unwrap(), 25);
        let g = cyclic_graph();
        round_trip(&g, &cyclic_family(&g), 25);
    }

    #[test]
    fn identity_sigma_gives_zero_lambda() {
        let g = bow_free_graph();
        let fam = IdentifyingFamily::parents(&g).unwrap();
        let names: Vec<Name> = g.names().to_vec();
        let s = CovarianceMatrix::new(names, linalg::identity(4)).unwrap();
        let lam = identify_lambda(&g, &fam, &s).unwrap();
        assert!(lam.iter().flatten().all(|x| x.is_zero()));
    }

    #[test]
    fn singular_system_reports_node() {
        let g = bow_free_graph();
        let fam = IdentifyingFamily::parents(&g).unwrap();
        // With σ_aa = σ_ab = σ_bb the system of d, [σ_bb - λ_ab σ_ab], is zero.
        let s = CovarianceMatrix::parse("a b c d\n1 1 0 0\n1 1 0 0\n0 0 1 0\n0 0 0 1\n").unwrap();
        assert!(matches!(
            identify_lambda(&g, &fam, &s),
            Err(Error::IdentificationUndefined { node }) if node == "d"
        ));
    }

    #[test]
    fn rational_constraint_examples() {
        let g = MixedGraph::parse("nodes a b").unwrap();
        let fam = IdentifyingFamily::parents(&g).unwrap();
        let s = CovarianceMatrix::parse("a b\n2 1/3\n1/3 1\n").unwrap();
        assert_eq!(rational_constraint_value(&g, &fam, &s, (0, 1)).unwrap(), q(1, 3));

        let g = bow_free_graph();
        let fam = IdentifyingFamily::parents(&g).unwrap();
        let s = covariance(&g, &sample_parameters(&g, 3).unwrap()).unwrap();
        assert!(rational_constraint_value(&g, &fam, &s, (2, 3)).unwrap().is_zero());
        let off = off_model_covariance(&g, 3);
        assert!(!rational_constraint_value(&g, &fam, &off, (2, 3)).unwrap().is_zero());
    }

    #[test]
    fn batteries_on_worked_examples() {
        let r = vanishing_battery(&bow_free_constraint(), &bow_free_graph(), 25, 11).unwrap();
        assert_eq!((r.model_pass, r.offmodel_reject), (25, 25));
        let r = vanishing_battery(&cyclic_constraint(), &cyclic_graph(), 25, 11).unwrap();
        assert_eq!((r.model_pass, r.offmodel_reject), (25, 25));
        let mut full = String::from("nodes a b c d\n");
        for (x, y) in [("a", "b"), ("a", "c"), ("a", "d"), ("b", "c"), ("b", "d"), ("c", "d")] {
            full.push_str(&format!("bi {x} {y}\n"));
        }
        let saturated = MixedGraph::parse(&full).unwrap();
        let r = vanishing_battery(&bow_free_constraint(), &saturated, 25, 11).unwrap();
        assert_eq!(r.model_pass, 0);
    }

    /// The determinant equals the rational constraint times the determinant
    /// of every identifying system the construction expanded, up to sign.
    #[test]
    fn determinant_factors_through_expansions() {
        let mut checked = 0;
        for m in 0..=6 {
            for g in enumerate_graphs(3, m, true, true).chain(
                [cyclic_graph(), bow_free_graph()].into_iter().filter(|_| m == 0),
            ) {
                for fam in enumerate_identifying_families(&g, 10) {
                    for (v, w) in constraint_pairs(&g, &fam) {
                        let d = derive_traced(&g, &fam, (v, w)).unwrap();
                        for seed in 0..3 {
                            let s = off_model_covariance(&g, seed);
                            let raw = linalg::det(&d.constraint.build_matrix().unwrap().instantiate(
                                BigRational::zero(),
                                |x| s.get(x.lo(), x.hi()).unwrap().clone(),
                            ));
                            let mut rhs = rational_constraint_value(&g, &fam, &s, (v, w)).unwrap();
                            for u in [v, w].into_iter().chain(d.expanded.iter().copied()) {
                                rhs *= a_matrix_det(&g, &fam, &s, u).unwrap();
                            }
                            assert!(raw == rhs || raw == -rhs, "{}", g.to_text());
                            checked += 1;
                        }
                    }
                }
            }
        }
        assert!(checked > 50);
    }

    #[test]
    fn derived_constraints_vanish_on_three_node_models() {
        for m in 0..=9 {
            for g in enumerate_graphs(3, m, true, true) {
                for fam in enumerate_identifying_families(&g, 5) {
                    for gc in derive_all(&g, &fam).unwrap() {
                        let r = vanishing_battery(&gc, &g, 5, 1).unwrap();
                        assert_eq!(r.model_pass, 5, "{}", g.to_text());
                    }
                }
            }
        }
    }
}
