//! Past/future annihilation and the condition-(C) certificate.
//!
//! Past annihilation picks a signed index set F on which every supplied
//! functional is nearly constant, so signed sums cancel.  Two strategies:
//! `bucket` is a pigeonhole argument (nested half-open
//! buckets of width eta/(2m)), `best_pair` optimizes over pairs for m = 1.
//! Future annihilation picks a large index set on which a fixed functional
//! has small restricted predual norm — greedy by ascending magnitude, with
//! the feasibility comparison done in exact rational arithmetic so
//! threshold-exact budgets are not lost to float accumulation.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Signed;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::exact::{rat, to_f64};
use crate::opnorm::restricted_predual_norm;
use crate::seqspace::{Exp, Side, SpaceError, SpaceKind, VecRep};

#[derive(Debug, Error)]
pub enum AnnihilateError {
    #[error("no admissible index family of size {want} meets eta = {eta} (have {have} indices)")]
    InsufficientIndices { want: usize, have: usize, eta: f64 },
    #[error("no subset of size {min_keep} has restricted norm <= {eta}{}",
            .row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    BudgetExhausted {
        min_keep: usize,
        eta: f64,
        row: Option<usize>,
    },
    #[error("need {need} pairwise disjoint sets, got {got}")]
    NotEnoughSets { need: usize, got: usize },
    #[error("strategy best_pair requires m = 1, got m = {0}")]
    BestPairNeedsM1(usize),
    #[error("eta must be positive, got {0}")]
    BadEta(f64),
    #[error(transparent)]
    Space(#[from] SpaceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PastStrategy {
    Bucket,
    BestPair,
}

impl PastStrategy {
    /// Default per the construction: optimize for pairs, pigeonhole otherwise.
    pub fn default_for(m: usize) -> PastStrategy {
        if m == 1 {
            PastStrategy::BestPair
        } else {
            PastStrategy::Bucket
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PastCertificate {
    pub f_set: BTreeSet<usize>,
    pub signs: BTreeMap<usize, i8>,
    pub achieved: f64,
    pub eta: f64,
    pub functional_count: usize,
}

impl PastCertificate {
    /// Worst discrepancy of the functionals over ALL zero-sum sign patterns
    /// on F, not just the stored one.  |F| = 2m and each functional varies by
    /// at most `spread` on F, so any pattern with m pluses and m minuses is
    /// bounded by m * spread; we return the exact per-pattern max for small F
    /// and the spread bound otherwise.
    pub fn worst_over_sign_patterns(&self, functionals: &[Vec<f64>]) -> f64 {
        if self.f_set.len() <= 8 {
            crate::oracle::brute_zero_sum_worst(&self.f_set, functionals)
        } else {
            let m = self.f_set.len() / 2;
            let spread = functionals
                .iter()
                .map(|v| {
                    let vals: Vec<f64> = self.f_set.iter().map(|&k| v[k - 1]).collect();
                    let lo = vals.iter().fold(f64::INFINITY, |a, &b| a.min(b));
                    let hi = vals.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                    hi - lo
                })
                .fold(0.0f64, f64::max);
            m as f64 * spread
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FutureCertificate {
    pub a_set: BTreeSet<usize>,
    pub achieved: f64,
    pub eta: f64,
    pub phi: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConditionCCertificate {
    pub sets: Vec<BTreeSet<usize>>,
    pub coefficients: Vec<(i64, i64)>,
    pub theta: f64,
    /// rounded view of `achieved_exact`
    pub achieved: f64,
    /// sup norm of the combined vector as exact numerator/denominator strings
    pub achieved_exact: (String, String),
}

impl ConditionCCertificate {
    pub fn achieved_rat(&self) -> BigRational {
        let num: BigInt = self.achieved_exact.0.parse().expect("bad numerator");
        let den: BigInt = self.achieved_exact.1.parse().expect("bad denominator");
        BigRational::new(num, den)
    }
}

fn functional_coords(functionals: &[VecRep]) -> Result<Vec<Vec<f64>>, AnnihilateError> {
    if let Some(first) = functionals.first() {
        for f in functionals {
            if f.space != first.space {
                return Err(SpaceError::SpaceMismatch.into());
            }
        }
    }
    Ok(functionals.iter().map(|f| f.coords.clone()).collect())
}

/// Past annihilation: find F subseteq lambda0 with |F| = 2m and signs
/// summing to zero such that every supplied functional has signed sum at
/// most eta in absolute value — for every zero-sum sign pattern, not only
/// the returned one.
pub fn past_annihilate(
    lambda0: &BTreeSet<usize>,
    functionals: &[VecRep],
    m: usize,
    eta: f64,
    strategy: PastStrategy,
) -> Result<PastCertificate, AnnihilateError> {
    let coords = functional_coords(functionals)?;
    past_annihilate_coords(lambda0, &coords, m, eta, strategy)
}

pub(crate) fn past_annihilate_coords(
    lambda0: &BTreeSet<usize>,
    functionals: &[Vec<f64>],
    m: usize,
    eta: f64,
    strategy: PastStrategy,
) -> Result<PastCertificate, AnnihilateError> {
    if eta <= 0.0 {
        return Err(AnnihilateError::BadEta(eta));
    }
    if lambda0.len() < 2 * m {
        return Err(AnnihilateError::InsufficientIndices {
            want: 2 * m,
            have: lambda0.len(),
            eta,
        });
    }
    match strategy {
        PastStrategy::BestPair => {
            if m != 1 {
                return Err(AnnihilateError::BestPairNeedsM1(m));
            }
            best_pair(lambda0, functionals, eta)
        }
        PastStrategy::Bucket => bucket(lambda0, functionals, m, eta),
    }
}

fn certificate(
    f_vec: Vec<usize>,
    functionals: &[Vec<f64>],
    eta: f64,
) -> PastCertificate {
    // fixed pattern: +1 on the first half (smaller indices), -1 on the rest
    let m = f_vec.len() / 2;
    let mut sorted = f_vec;
    sorted.sort_unstable();
    let mut signs = BTreeMap::new();
    for (pos, &k) in sorted.iter().enumerate() {
        signs.insert(k, if pos < m { 1i8 } else { -1i8 });
    }
    let achieved = functionals
        .iter()
        .map(|v| {
            sorted
                .iter()
                .map(|&k| f64::from(signs[&k]) * v[k - 1])
                .sum::<f64>()
                .abs()
        })
        .fold(0.0f64, f64::max);
    PastCertificate {
        f_set: sorted.into_iter().collect(),
        signs,
        achieved,
        eta,
        functional_count: functionals.len(),
    }
}

/// Scan pairs in lexicographic order keeping the best worst-case
/// discrepancy; early exit on an exact zero (common when functionals vanish
/// on the admissible set).  Certifies the winner against eta for every
/// zero-sum pattern — for a pair that is just the +/- discrepancy itself.
fn best_pair(
    lambda0: &BTreeSet<usize>,
    functionals: &[Vec<f64>],
    eta: f64,
) -> Result<PastCertificate, AnnihilateError> {
    let idx: Vec<usize> = lambda0.iter().copied().collect();
    let mut best: Option<(usize, usize, f64)> = None;
    'outer: for a in 0..idx.len() {
        for b in a + 1..idx.len() {
            let (k0, k1) = (idx[a], idx[b]);
            let worst = functionals
                .iter()
                .map(|v| (v[k0 - 1] - v[k1 - 1]).abs())
                .fold(0.0f64, f64::max);
            if best.map(|(_, _, w)| worst < w).unwrap_or(true) {
                best = Some((k0, k1, worst));
                if worst == 0.0 {
                    break 'outer;
                }
            }
        }
    }
    let (k0, k1, worst) = best.unwrap();
    if worst > eta {
        return Err(AnnihilateError::InsufficientIndices {
            want: 2,
            have: lambda0.len(),
            eta,
        });
    }
    Ok(certificate(vec![k0, k1], functionals, eta))
}

/// Pigeonhole selection: bucket indices by the functional values in
/// half-open cells of width eta/(2m), nesting over the functionals; any
/// bucket chain holding 2m indices yields F, and within a bucket every
/// zero-sum signed sum is at most m * (cell width) <= eta/2 per functional.
fn bucket(
    lambda0: &BTreeSet<usize>,
    functionals: &[Vec<f64>],
    m: usize,
    eta: f64,
) -> Result<PastCertificate, AnnihilateError> {
    let width = eta / (2 * m) as f64;
    // cell of index k: the vector of bucket numbers over all functionals
    let mut cells: BTreeMap<Vec<i64>, Vec<usize>> = BTreeMap::new();
    for &k in lambda0 {
        let cell: Vec<i64> = functionals
            .iter()
            .map(|v| (v[k - 1] / width).floor() as i64)
            .collect();
        cells.entry(cell).or_default().push(k);
    }
    // lexicographically smallest F among cells that can host 2m indices
    let winner = cells
        .values()
        .filter(|ks| ks.len() >= 2 * m)
        .map(|ks| {
            let mut v = ks.clone();
            v.sort_unstable();
            v.truncate(2 * m);
            v
        })
        .min();
    let f_vec = winner.ok_or(AnnihilateError::InsufficientIndices {
        want: 2 * m,
        have: lambda0.len(),
        eta,
    })?;
    let cert = certificate(f_vec, functionals, eta);
    debug_assert!(cert.achieved <= eta + 1e-12);
    Ok(cert)
}

/// Past annihilation against the row-`row` coordinate
/// slices of two-parameter vectors.  Indices in `lambda0` and in the
/// certificate are inner (column) indices of that row.
pub fn past_annihilate_2d(
    row: usize,
    lambda0: &BTreeSet<usize>,
    vectors: &[VecRep],
    m: usize,
    eta: f64,
    strategy: PastStrategy,
) -> Result<PastCertificate, AnnihilateError> {
    let slices: Result<Vec<Vec<f64>>, SpaceError> = vectors
        .iter()
        .map(|y| {
            let inner = y.space.inner_dim();
            (1..=inner)
                .map(|j| Ok(y.coords[y.space.flat_index(row, j)?]))
                .collect()
        })
        .collect();
    past_annihilate_coords(lambda0, &slices?, m, eta, strategy)
}

/// Future annihilation: the largest A subseteq lambda with
/// restricted_predual_norm(phi, A) <= eta, greedy by ascending |phi_k| with
/// smaller index first on ties.  For sup-norm dual spaces the budget is the
/// l^1 mass of the restriction and greedy is exactly optimal; feasibility is
/// decided in exact rational arithmetic.  The asymptotic "infinitely many
/// indices survive" statement becomes the `min_keep` cardinality guarantee.
pub fn future_annihilate(
    lambda: &BTreeSet<usize>,
    phi: &VecRep,
    eta: f64,
    min_keep: usize,
) -> Result<FutureCertificate, AnnihilateError> {
    if eta <= 0.0 {
        return Err(AnnihilateError::BadEta(eta));
    }
    let space = &phi.space;
    let sup_dual = space.is_sup_norm(Side::Dual);
    let mut order: Vec<usize> = lambda.iter().copied().collect();
    order.sort_by(|&a, &b| {
        phi.coords[a - 1]
            .abs()
            .partial_cmp(&phi.coords[b - 1].abs())
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut a_set: BTreeSet<usize> = BTreeSet::new();
    if sup_dual {
        // exact l^1 budget
        let budget = rat(eta);
        let mut mass = rat(0.0);
        for &k in &order {
            let next = &mass + rat(phi.coords[k - 1]).abs();
            if next <= budget {
                mass = next;
                a_set.insert(k);
            } else {
                break;
            }
        }
    } else {
        // general space: grow while the exact restricted norm stays in budget
        for &k in &order {
            a_set.insert(k);
            let v = restricted_predual_norm(phi, &a_set, space)?;
            if v > eta {
                a_set.remove(&k);
                break;
            }
        }
    }
    let achieved = restricted_predual_norm(phi, &a_set, space)?;
    if a_set.len() < min_keep {
        return Err(AnnihilateError::BudgetExhausted {
            min_keep,
            eta,
            row: None,
        });
    }
    Ok(FutureCertificate {
        a_set,
        achieved,
        eta,
        phi: phi.coords.clone(),
    })
}

/// Per-row future annihilation: one future certificate per outer row, built from
/// phi's row slice against the row's inner space.  All rows must satisfy
/// the bound; a failing row is reported in the error.
pub fn future_annihilate_2d(
    lambdas: &BTreeMap<usize, BTreeSet<usize>>,
    phi: &VecRep,
    eta: f64,
    min_keep: usize,
) -> Result<BTreeMap<usize, FutureCertificate>, AnnihilateError> {
    let space = phi.space.clone();
    let inner = space
        .inner_space()
        .ok_or(SpaceError::NotTwoParam)?
        .clone();
    let inner_dim = inner.total_dim();
    let mut out = BTreeMap::new();
    for (&row, lambda) in lambdas {
        let mut slice = vec![0.0; inner_dim];
        for (j, s) in slice.iter_mut().enumerate() {
            *s = phi.coords[space.flat_index(row, j + 1)?];
        }
        let phi_row = VecRep::new(slice, inner.clone(), Side::Dual)?;
        let cert = future_annihilate(lambda, &phi_row, eta, min_keep).map_err(|e| match e {
            AnnihilateError::BudgetExhausted { min_keep, eta, .. } => {
                AnnihilateError::BudgetExhausted {
                    min_keep,
                    eta,
                    row: Some(row),
                }
            }
            other => other,
        })?;
        out.insert(row, cert);
    }
    Ok(out)
}

/// Averaged disjoint-support certificate on l^inf: N = ceil(1/theta), a_j = 1/N for the
/// first N sets, and the combined vector sum_j a_j P_{A_j} x_j has sup norm
/// at most 1/N <= theta — exactly, since the sets are disjoint and each
/// |x_j|_inf <= 1.  Coefficients are returned as exact fractions.
pub fn condition_c_certificate_linf(
    sets: &[BTreeSet<usize>],
    vectors: &[VecRep],
    theta: f64,
) -> Result<ConditionCCertificate, AnnihilateError> {
    assert_eq!(sets.len(), vectors.len());
    for (i, a) in sets.iter().enumerate() {
        for b in sets.iter().skip(i + 1) {
            assert!(a.is_disjoint(b), "condition (C) needs disjoint sets");
        }
    }
    for x in vectors {
        debug_assert!(matches!(
            &x.space.kind,
            SpaceKind::Lp { p: Exp::Inf, .. }
        ));
        debug_assert!(x.norm() <= 1.0 + 1e-12);
    }
    let n = (1.0 / theta).ceil() as usize;
    if sets.len() < n {
        return Err(AnnihilateError::NotEnoughSets {
            need: n,
            got: sets.len(),
        });
    }
    let dim = vectors
        .first()
        .map(|v| v.coords.len())
        .unwrap_or(0);
    let nrat = BigRational::from_integer(BigInt::from(n as i64));
    let mut combined: Vec<BigRational> =
        vec![BigRational::from_integer(BigInt::from(0)); dim];
    for (a, x) in sets.iter().zip(vectors).take(n) {
        for &k in a {
            combined[k - 1] += rat(x.coords[k - 1]) / &nrat;
        }
    }
    let achieved_exact = combined
        .iter()
        .map(|v| v.abs())
        .max()
        .unwrap_or_else(|| BigRational::from_integer(BigInt::from(0)));
    // each coordinate is a single |x_jk|/N with |x_jk| <= 1
    debug_assert!(achieved_exact <= BigRational::new(BigInt::from(1), BigInt::from(n as i64)));
    let coefficients = (0..sets.len())
        .map(|j| if j < n { (1i64, n as i64) } else { (0, 1) })
        .collect();
    Ok(ConditionCCertificate {
        sets: sets.to_vec(),
        coefficients,
        theta,
        achieved: to_f64(&achieved_exact),
        achieved_exact: (
            achieved_exact.numer().to_string(),
            achieved_exact.denom().to_string(),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqspace::SpaceSpec;

    fn linf(dim: usize) -> SpaceSpec {
        SpaceSpec::linf(dim).unwrap()
    }

    fn dual(coords: Vec<f64>, space: &SpaceSpec) -> VecRep {
        VecRep::new(coords, space.clone(), Side::Dual).unwrap()
    }

    #[test]
    fn equal_coordinates_cancel() {
        let s = linf(5);
        let f = dual(vec![1.0; 5], &s);
        let lambda: BTreeSet<usize> = (1..=5).collect();
        for strat in [PastStrategy::BestPair, PastStrategy::Bucket] {
            let c = past_annihilate(&lambda, &[f.clone()], 1, 1e-12, strat).unwrap();
            assert_eq!(c.achieved, 0.0);
            assert_eq!(c.f_set.len(), 2);
            assert_eq!(c.signs.values().map(|&s| s as i32).sum::<i32>(), 0);
        }
    }

    #[test]
    fn best_pair_minimizes_worst_gap() {
        // closest pair of these coordinates is (3,4) at gap 0.01
        let s = linf(5);
        let f = dual(vec![0.10, 0.12, 0.50, 0.51, 0.90], &s);
        let lambda: BTreeSet<usize> = (1..=5).collect();
        let c = past_annihilate(&lambda, &[f.clone()], 1, 0.05, PastStrategy::BestPair).unwrap();
        let (pair, achieved) =
            crate::oracle::brute_best_pair(&lambda, &[f.coords.clone()]).unwrap();
        assert_eq!(c.f_set, [pair.0, pair.1].into_iter().collect());
        assert!((c.achieved - achieved).abs() < 1e-15);
        assert!((c.achieved - 0.01).abs() < 1e-15);
    }

    #[test]
    fn spread_out_coordinates_fail() {
        let s = linf(10);
        let f = dual((0..10).map(|k| k as f64 * 0.1).collect(), &s);
        let lambda: BTreeSet<usize> = (1..=10).collect();
        for strat in [PastStrategy::BestPair, PastStrategy::Bucket] {
            let r = past_annihilate(&lambda, &[f.clone()], 1, 0.05, strat);
            assert!(matches!(r, Err(AnnihilateError::InsufficientIndices { .. })), "{strat:?}");
        }
    }

    #[test]
    fn bucket_certifies_all_sign_patterns() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let s = linf(40);
        let lambda: BTreeSet<usize> = (1..=40).collect();
        for m in [1usize, 2, 3] {
            for _ in 0..30 {
                let fs: Vec<VecRep> = (0..2)
                    .map(|_| dual((0..40).map(|_| rng.gen_range(0.0..0.3)).collect(), &s))
                    .collect();
                let eta = 0.4;
                if let Ok(c) = past_annihilate(&lambda, &fs, m, eta, PastStrategy::Bucket) {
                    assert_eq!(c.f_set.len(), 2 * m);
                    let coords: Vec<Vec<f64>> = fs.iter().map(|f| f.coords.clone()).collect();
                    let worst = c.worst_over_sign_patterns(&coords);
                    assert!(worst <= eta + 1e-12, "m={m} worst={worst}");
                }
            }
        }
    }

    #[test]
    fn past_2d_uses_row_slice() {
        let inner = linf(3);
        let s = SpaceSpec::lp_sum(Exp::ONE, 2, inner).unwrap();
        // row 2 slice (0.3, 0.3, 0.9): best pair is {1,2}
        let y = dual(vec![0.5, 0.6, 0.7, 0.3, 0.3, 0.9], &s);
        let lambda: BTreeSet<usize> = (1..=3).collect();
        let c = past_annihilate_2d(2, &lambda, &[y], 1, 1e-9, PastStrategy::BestPair).unwrap();
        assert_eq!(c.f_set, [1, 2].into_iter().collect());
        assert_eq!(c.achieved, 0.0);
    }

    #[test]
    fn past_2d_m2_equal_slice() {
        let inner = linf(4);
        let s = SpaceSpec::lp_sum(Exp::ONE, 1, inner).unwrap();
        let y = dual(vec![0.4; 4], &s);
        let lambda: BTreeSet<usize> = (1..=4).collect();
        let c = past_annihilate_2d(1, &lambda, &[y], 2, 1e-9, PastStrategy::Bucket).unwrap();
        assert_eq!(c.f_set, (1..=4).collect());
        assert_eq!(c.achieved, 0.0);
    }

    #[test]
    fn future_zero_functional_keeps_everything() {
        let s = linf(6);
        let phi = dual(vec![0.0; 6], &s);
        let lambda: BTreeSet<usize> = (1..=6).collect();
        let c = future_annihilate(&lambda, &phi, 0.1, 6).unwrap();
        assert_eq!(c.a_set, lambda);
        assert_eq!(c.achieved, 0.0);
    }

    #[test]
    fn future_greedy_hits_exact_budget() {
        // greedy reaches the full eta budget only if the comparison is exact:
        // the float partial sums overshoot 0.05 by one ulp
        let s = linf(6);
        let phi = dual(vec![0.9, 0.05, 0.02, 0.01, 0.01, 0.01], &s);
        let lambda: BTreeSet<usize> = (2..=6).collect();
        let c = future_annihilate(&lambda, &phi, 0.05, 3).unwrap();
        assert_eq!(c.a_set, (3..=6).collect());
        assert!((c.achieved - 0.05).abs() < 1e-15);
        assert_eq!(
            c.a_set.len(),
            crate::oracle::brute_future_max_card(&lambda, &phi.coords, 0.05)
        );
    }

    #[test]
    fn future_budget_exhausted() {
        let s = linf(3);
        let phi = dual(vec![1.0; 3], &s);
        let lambda: BTreeSet<usize> = (1..=3).collect();
        let r = future_annihilate(&lambda, &phi, 0.5, 1);
        assert!(matches!(r, Err(AnnihilateError::BudgetExhausted { .. })));
        // min_keep = 0 succeeds with an empty set
        let c = future_annihilate(&lambda, &phi, 0.5, 0).unwrap();
        assert!(c.a_set.is_empty());
    }

    #[test]
    fn future_greedy_is_max_cardinality() {
        use rand::Rng;
        use rand_chacha::rand_core::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let s = linf(12);
        let lambda: BTreeSet<usize> = (1..=12).collect();
        for _ in 0..200 {
            let phi = dual((0..12).map(|_| rng.gen_range(0.0..0.4)).collect(), &s);
            let eta = rng.gen_range(0.1..1.0);
            let c = future_annihilate(&lambda, &phi, eta, 0).unwrap();
            assert_eq!(
                c.a_set.len(),
                crate::oracle::brute_future_max_card(&lambda, &phi.coords, eta),
                "phi={:?} eta={eta}",
                phi.coords
            );
            assert!(c.achieved <= eta + 1e-15);
        }
    }

    #[test]
    fn future_2d_per_row() {
        let inner = linf(4);
        let s = SpaceSpec::lp_sum(Exp::ONE, 2, inner).unwrap();
        let phi = dual(
            vec![0.9, 0.01, 0.01, 0.01, 0.5, 0.5, 0.001, 0.001],
            &s,
        );
        let mut lambdas = BTreeMap::new();
        lambdas.insert(1usize, (1..=4).collect::<BTreeSet<usize>>());
        lambdas.insert(2usize, (1..=4).collect());
        let certs = future_annihilate_2d(&lambdas, &phi, 0.03, 2).unwrap();
        // exact arithmetic caps row 1 at two indices: three copies of the
        // double nearest 0.01 sum to strictly more than the double nearest
        // 0.03 (float accumulation cancels the excess and would accept all
        // three); the exhaustive oracle agrees
        assert_eq!(certs[&1].a_set, [2, 3].into_iter().collect());
        assert_eq!(certs[&2].a_set, [3, 4].into_iter().collect());
        assert_eq!(
            crate::oracle::brute_future_max_card(
                &(1..=4).collect(),
                &[0.9, 0.01, 0.01, 0.01],
                0.03
            ),
            2
        );
        // failing row is tagged
        let r = future_annihilate_2d(&lambdas, &phi, 0.03, 3);
        match r {
            Err(AnnihilateError::BudgetExhausted { row: Some(1), .. }) => {}
            other => panic!("expected row-1 failure, got {other:?}"),
        }
    }

    #[test]
    fn condition_c_examples() {
        let s = linf(8);
        let ones = |a: &BTreeSet<usize>| {
            let mut v = vec![0.0; 8];
            for &k in a {
                v[k - 1] = 1.0;
            }
            dual(v, &s)
        };
        let a1: BTreeSet<usize> = [1, 2].into_iter().collect();
        let a2: BTreeSet<usize> = [3, 4].into_iter().collect();
        let a3: BTreeSet<usize> = [5, 6].into_iter().collect();

        let c = condition_c_certificate_linf(
            &[a1.clone(), a2.clone()],
            &[ones(&a1), ones(&a2)],
            0.5,
        )
        .unwrap();
        assert_eq!(c.coefficients, vec![(1, 2), (1, 2)]);
        assert!((c.achieved - 0.5).abs() < 1e-15);

        let c = condition_c_certificate_linf(&[a1.clone()], &[ones(&a1)], 1.0).unwrap();
        assert_eq!(c.coefficients, vec![(1, 1)]);
        assert!(c.achieved <= 1.0);

        let r = condition_c_certificate_linf(
            &[a1.clone(), a2.clone(), a3.clone()],
            &[ones(&a1), ones(&a2), ones(&a3)],
            0.25,
        );
        assert!(matches!(r, Err(AnnihilateError::NotEnoughSets { need: 4, got: 3 })));
    }

    #[test]
    fn condition_c_exact_at_awkward_theta() {
        // theta = 0.01 -> N = 100, achieved must be exactly 1/100 in rationals
        let dim = 200;
        let s = linf(dim);
        let sets: Vec<BTreeSet<usize>> = (0..100)
            .map(|j| [2 * j + 1, 2 * j + 2].into_iter().collect())
            .collect();
        let vecs: Vec<VecRep> = sets
            .iter()
            .map(|a| {
                let mut v = vec![0.0; dim];
                for &k in a {
                    v[k - 1] = 1.0;
                }
                dual(v, &s)
            })
            .collect();
        let c = condition_c_certificate_linf(&sets, &vecs, 0.01).unwrap();
        assert_eq!(c.coefficients[0], (1, 100));
        assert_eq!(
            c.achieved_rat(),
            BigRational::new(BigInt::from(1), BigInt::from(100))
        );
        // the float view rounds to the nearest double, which is not 1/100
        assert_eq!(c.achieved, 0.01);
    }
}
