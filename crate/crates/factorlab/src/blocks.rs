//! Inductive block-basis construction, interleaving past and future
//! annihilation under the eta budget.
//!
//! Each step i picks a pair B_i = {k0 < k1} from the current admissible set
//! so that all previously built images T b_j* are nearly constant on it
//! (past), then shrinks the admissible set so the new functional T* b_i is
//! small on everything that remains (future).  The budget eta_i = 4^{-i-1}/K_u
//! is consumed by both bounds, and its total 1/(12 K_u) is what the
//! downstream 1/3-defect argument spends.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::annihilate::{
    future_annihilate, future_annihilate_2d, past_annihilate_2d, past_annihilate_coords,
    AnnihilateError, FutureCertificate, PastCertificate, PastStrategy,
};
use crate::opnorm::{restricted_predual_norm, OperatorRep};
use crate::seqspace::{precede_unrank, Side, SpaceError, SpaceSpec, VecRep};

#[derive(Debug, Error)]
pub enum BlockError {
    #[error("target_blocks must be >= 1")]
    TargetTooSmall,
    #[error("dimension {dim} too small; {need} coordinates would suffice")]
    DimensionTooSmall { dim: usize, need: usize },
    #[error("outer dimension {outer} too small for {target} blocks; need {need} rows")]
    OuterDimTooSmall {
        outer: usize,
        target: usize,
        need: usize,
    },
    #[error("step {step}{}: {source}", .row.map(|r| format!(" (row {r})")).unwrap_or_default())]
    Step {
        step: usize,
        row: Option<usize>,
        source: AnnihilateError,
    },
    #[error(transparent)]
    Space(#[from] SpaceError),
}

/// eta_i = K_u^{-1} 4^{-i-1}; the series sums to 1/(12 K_u).
#[derive(Debug, Clone, Copy)]
pub struct EtaSchedule {
    pub k_u: f64,
}

impl EtaSchedule {
    pub fn new(k_u: f64) -> EtaSchedule {
        assert!(k_u >= 1.0);
        EtaSchedule { k_u }
    }

    pub fn eta(&self, i: usize) -> f64 {
        assert!(i >= 1);
        0.25f64.powi(i as i32 + 1) / self.k_u
    }

    pub fn total(&self) -> f64 {
        1.0 / (12.0 * self.k_u)
    }
}

#[derive(Debug, Clone)]
pub struct BudgetPlan {
    pub target_blocks: usize,
    pub reserve: usize,
    /// min_keep\[i-1\] constrains the admissible set left after step i.
    pub min_keep: Vec<usize>,
}

/// Per-step minimum admissible-set sizes: each remaining step consumes two
/// coordinates, plus a flat reserve so future annihilation has room to
/// discard.  The relevant dimension is the inner one for two-parameter
/// spaces (the exclusion of used indices is global across rows).
pub fn plan_budget(
    space: &SpaceSpec,
    target_blocks: usize,
    reserve: Option<usize>,
) -> Result<BudgetPlan, BlockError> {
    if target_blocks == 0 {
        return Err(BlockError::TargetTooSmall);
    }
    let reserve = reserve.unwrap_or(4 * target_blocks);
    let dim = if space.is_two_param() {
        space.inner_dim()
    } else {
        space.total_dim()
    };
    let need = 2 * target_blocks + reserve;
    if dim < need {
        return Err(BlockError::DimensionTooSmall { dim, need });
    }
    let min_keep = (1..=target_blocks)
        .map(|i| 2 * (target_blocks - i) + reserve)
        .collect();
    Ok(BudgetPlan {
        target_blocks,
        reserve,
        min_keep,
    })
}

#[derive(Debug, Clone)]
pub struct BlockSystem {
    pub space: SpaceSpec,
    /// index pairs (k0, k1) with k0 < k1, in construction order
    pub pairs: Vec<(usize, usize)>,
    pub b: Vec<VecRep>,
    pub b_star: Vec<VecRep>,
    /// A_1, ..., A_{n+1}
    pub admissible: Vec<BTreeSet<usize>>,
    pub past_certs: Vec<PastCertificate>,
    pub future_certs: Vec<FutureCertificate>,
    pub eta: EtaSchedule,
}

#[derive(Debug, Clone)]
pub struct Block2D {
    pub rank: usize,
    pub row: usize,
    /// inner index pair (j0, j1), j0 < j1
    pub inner: (usize, usize),
}

#[derive(Debug, Clone)]
pub struct BlockSystem2D {
    pub space: SpaceSpec,
    pub blocks: Vec<Block2D>,
    pub b: Vec<VecRep>,
    pub b_star: Vec<VecRep>,
    /// J_1, ..., J_{n+1}: per-row admissible inner-index families
    pub admissible: Vec<BTreeMap<usize, BTreeSet<usize>>>,
    pub past_certs: Vec<PastCertificate>,
    pub future_certs: Vec<BTreeMap<usize, FutureCertificate>>,
    pub eta: EtaSchedule,
}

fn signed_pair_coords(dim: usize, p0: usize, p1: usize) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    c[p0 - 1] = 1.0;
    c[p1 - 1] = -1.0;
    c
}

fn column_diff(t: &OperatorRep, p0: usize, p1: usize) -> Vec<f64> {
    (0..t.matrix.nrows())
        .map(|r| t.matrix[[r, p0 - 1]] - t.matrix[[r, p1 - 1]])
        .collect()
}

fn row_diff(t: &OperatorRep, p0: usize, p1: usize) -> Vec<f64> {
    (0..t.matrix.ncols())
        .map(|c| t.matrix[[p0 - 1, c]] - t.matrix[[p1 - 1, c]])
        .collect()
}

pub fn build_blocks_1d(
    t: &OperatorRep,
    space: &SpaceSpec,
    target_blocks: usize,
) -> Result<BlockSystem, BlockError> {
    build_blocks_1d_with(t, space, target_blocks, PastStrategy::BestPair)
}

pub fn build_blocks_1d_with(
    t: &OperatorRep,
    space: &SpaceSpec,
    target_blocks: usize,
    strategy: PastStrategy,
) -> Result<BlockSystem, BlockError> {
    let plan = plan_budget(space, target_blocks, None)?;
    let dim = space.total_dim();
    let eta = EtaSchedule::new(space.k_u);
    let mut admissible = vec![(1..=dim).collect::<BTreeSet<usize>>()];
    let mut pairs = Vec::new();
    let mut b = Vec::new();
    let mut b_star = Vec::new();
    let mut past_certs = Vec::new();
    let mut future_certs = Vec::new();
    let mut past_images: Vec<Vec<f64>> = Vec::new();
    let mut global_max = 0usize;

    for i in 1..=target_blocks {
        let eta_i = eta.eta(i);
        // split the budget across the past functionals so their SUM of
        // discrepancies stays within eta_i
        let eta_pair = eta_i / (i.max(2) - 1) as f64;
        let a_i = admissible.last().unwrap().clone();
        // keep the top of the admissible set out of the pair pool so the
        // future candidate set cannot be exhausted by a high pair
        let keep_future = plan.min_keep[i - 1];
        let pool: BTreeSet<usize> = a_i
            .iter()
            .take(a_i.len().saturating_sub(keep_future))
            .copied()
            .collect();
        let cert = past_annihilate_coords(&pool, &past_images, 1, eta_pair, strategy)
            .map_err(|source| BlockError::Step {
                step: i,
                row: None,
                source,
            })?;
        let mut it = cert.f_set.iter();
        let (k0, k1) = (*it.next().unwrap(), *it.next().unwrap());
        debug_assert!({
            let sum: f64 = past_images
                .iter()
                .map(|v| (v[k0 - 1] - v[k1 - 1]).abs())
                .sum();
            sum <= eta_i + 1e-12
        });
        pairs.push((k0, k1));
        b.push(VecRep::new(
            signed_pair_coords(dim, k0, k1),
            space.clone(),
            Side::Predual,
        )?);
        b_star.push(VecRep::new(
            signed_pair_coords(dim, k0, k1),
            space.clone(),
            Side::Dual,
        )?);
        past_certs.push(cert);
        past_images.push(column_diff(t, k0, k1));

        global_max = global_max.max(k1);
        let lambda: BTreeSet<usize> = a_i.into_iter().filter(|&k| k > global_max).collect();
        let phi = VecRep::new(row_diff(t, k0, k1), space.clone(), Side::Predual)?;
        let fut = future_annihilate(&lambda, &phi, eta_i, plan.min_keep[i - 1]).map_err(
            |source| BlockError::Step {
                step: i,
                row: None,
                source,
            },
        )?;
        admissible.push(fut.a_set.clone());
        future_certs.push(fut);
    }
    Ok(BlockSystem {
        space: space.clone(),
        pairs,
        b,
        b_star,
        admissible,
        past_certs,
        future_certs,
        eta,
    })
}

pub fn build_blocks_2d(
    t: &OperatorRep,
    space: &SpaceSpec,
    target_blocks: usize,
) -> Result<BlockSystem2D, BlockError> {
    build_blocks_2d_with(t, space, target_blocks, PastStrategy::BestPair)
}

pub fn build_blocks_2d_with(
    t: &OperatorRep,
    space: &SpaceSpec,
    target_blocks: usize,
    strategy: PastStrategy,
) -> Result<BlockSystem2D, BlockError> {
    let plan = plan_budget(space, target_blocks, None)?;
    let outer = space.outer_dim();
    let inner = space.inner_dim();
    let dim = space.total_dim();
    // rows consumed by ranks 1..=target must exist
    let rows_needed = (1..=target_blocks)
        .map(|k| precede_unrank(k).i)
        .max()
        .unwrap();
    if rows_needed > outer {
        return Err(BlockError::OuterDimTooSmall {
            outer,
            target: target_blocks,
            need: rows_needed,
        });
    }
    let eta = EtaSchedule::new(space.k_u);
    let full: BTreeMap<usize, BTreeSet<usize>> = (1..=outer)
        .map(|r| (r, (1..=inner).collect()))
        .collect();
    let mut admissible = vec![full];
    let mut blocks = Vec::new();
    let mut b = Vec::new();
    let mut b_star = Vec::new();
    let mut past_certs = Vec::new();
    let mut future_certs = Vec::new();
    let mut past_image_vecs: Vec<VecRep> = Vec::new();
    let mut global_max_inner = 0usize;

    for k in 1..=target_blocks {
        let eta_k = eta.eta(k);
        let eta_pair = eta_k / (k.max(2) - 1) as f64;
        let row = precede_unrank(k).i;
        let j_k = admissible.last().unwrap().clone();
        let lambda_row: BTreeSet<usize> = j_k[&row]
            .iter()
            .copied()
            .filter(|&j| j > global_max_inner)
            .collect();
        // as in the flat builder, keep headroom above the pair for future
        // candidates in every row
        let keep_future = plan.min_keep[k - 1];
        let pool: BTreeSet<usize> = lambda_row
            .iter()
            .take(lambda_row.len().saturating_sub(keep_future))
            .copied()
            .collect();
        let cert = past_annihilate_2d(
            row,
            &pool,
            &past_image_vecs,
            1,
            eta_pair,
            strategy,
        )
        .map_err(|source| BlockError::Step {
            step: k,
            row: Some(row),
            source,
        })?;
        let mut it = cert.f_set.iter();
        let (j0, j1) = (*it.next().unwrap(), *it.next().unwrap());
        let (p0, p1) = (space.flat_index(row, j0)? + 1, space.flat_index(row, j1)? + 1);
        blocks.push(Block2D {
            rank: k,
            row,
            inner: (j0, j1),
        });
        b.push(VecRep::new(
            signed_pair_coords(dim, p0, p1),
            space.clone(),
            Side::Predual,
        )?);
        b_star.push(VecRep::new(
            signed_pair_coords(dim, p0, p1),
            space.clone(),
            Side::Dual,
        )?);
        past_certs.push(cert);
        past_image_vecs.push(VecRep::new(
            column_diff(t, p0, p1),
            space.clone(),
            Side::Dual,
        )?);

        global_max_inner = global_max_inner.max(j1);
        let lambdas: BTreeMap<usize, BTreeSet<usize>> = j_k
            .iter()
            .map(|(&r, js)| {
                (
                    r,
                    js.iter().copied().filter(|&j| j > global_max_inner).collect(),
                )
            })
            .collect();
        let phi = VecRep::new(row_diff(t, p0, p1), space.clone(), Side::Predual)?;
        let certs = future_annihilate_2d(&lambdas, &phi, eta_k, plan.min_keep[k - 1]).map_err(
            |source| BlockError::Step {
                step: k,
                row: Some(row),
                source,
            },
        )?;
        admissible.push(certs.iter().map(|(&r, c)| (r, c.a_set.clone())).collect());
        future_certs.push(certs);
    }
    Ok(BlockSystem2D {
        space: space.clone(),
        blocks,
        b,
        b_star,
        admissible,
        past_certs,
        future_certs,
        eta,
    })
}

/// Independent recheck of the off-diagonal past sums from the finished
/// system: returns sum_{j<i} |<b_i, T b_j*>| for every i (must be <= eta_i).
pub fn off_diag_past_sums(b: &[VecRep], b_star: &[VecRep], t: &OperatorRep) -> Vec<f64> {
    let images: Vec<Vec<f64>> = b_star.iter().map(|bs| t.apply(&bs.coords)).collect();
    (0..b.len())
        .map(|i| {
            (0..i)
                .map(|j| {
                    b[i].coords
                        .iter()
                        .zip(&images[j])
                        .map(|(x, y)| x * y)
                        .sum::<f64>()
                        .abs()
                })
                .sum()
        })
        .collect()
}

/// Independent recheck of the future bounds: the restricted predual norm of
/// T* b_i on A_{i+1} (1-d).
pub fn future_bound_recheck(sys: &BlockSystem, t: &OperatorRep) -> Result<Vec<f64>, SpaceError> {
    sys.pairs
        .iter()
        .zip(&sys.admissible[1..])
        .map(|(&(k0, k1), a_next)| {
            let phi = VecRep::new(row_diff(t, k0, k1), sys.space.clone(), Side::Predual)?;
            restricted_predual_norm(&phi, a_next, &sys.space)
        })
        .collect()
}
