//! Assembly of the factorization Id = N . H . M from a block system.
//!
//! All operators touching the factored copy are stored compactly in block
//! coordinates: the copy space is spanned by the normalized retained blocks
//! u_t = b_t*/||b_t*||, and since the u_t have disjoint supports, the maps
//! embedding the copy into the ambient space (block synthesis and the
//! coordinate picker behind M and N) are isometries.  Operator norms
//! computed on the compact matrices therefore equal the norms of the full
//! ambient compositions, without ever materializing dim x dim products.

use std::collections::BTreeMap;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks::{BlockSystem, BlockSystem2D};
use crate::opnorm::{op_norm, NormEstimate, OpError, OperatorRep};
use crate::seqspace::{Side, SpaceError, SpaceKind, SpaceSpec};

#[derive(Debug, Error)]
pub enum FactorError {
    #[error(
        "neither branch retains {min_retained} blocks (T keeps {left}, Id-T keeps {right})"
    )]
    RetentionImpossible {
        min_retained: usize,
        left: usize,
        right: usize,
    },
    #[error("Neumann defect {defect} is not < 1; the eta budget was violated")]
    DefectTooLarge { defect: f64 },
    #[error("PHJ is numerically singular")]
    Singular,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error(transparent)]
    Op(#[from] OpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HTag {
    T,
    IdMinusT,
}

/// Uniform view of a 1-d or 2-d block system: flat coordinate pairs plus
/// the construction row each block lives in (always 1 for flat spaces).
#[derive(Debug, Clone)]
pub struct BlockView {
    pub space: SpaceSpec,
    /// 1-based flat coordinate pairs (p0 < p1), construction order
    pub flats: Vec<(usize, usize)>,
    pub rows: Vec<usize>,
}

impl BlockView {
    pub fn from_1d(sys: &BlockSystem) -> BlockView {
        BlockView {
            space: sys.space.clone(),
            flats: sys.pairs.clone(),
            rows: vec![1; sys.pairs.len()],
        }
    }

    pub fn from_2d(sys: &BlockSystem2D) -> Result<BlockView, SpaceError> {
        let flats = sys
            .blocks
            .iter()
            .map(|blk| {
                Ok((
                    sys.space.flat_index(blk.row, blk.inner.0)? + 1,
                    sys.space.flat_index(blk.row, blk.inner.1)? + 1,
                ))
            })
            .collect::<Result<_, SpaceError>>()?;
        Ok(BlockView {
            space: sys.space.clone(),
            flats,
            rows: sys.blocks.iter().map(|blk| blk.row).collect(),
        })
    }

    fn b_star_norm(&self, t: usize) -> f64 {
        let mut c = vec![0.0; self.space.total_dim()];
        let (p0, p1) = self.flats[t];
        c[p0 - 1] = 1.0;
        c[p1 - 1] = -1.0;
        self.space.norm_coords(&c, Side::Dual)
    }

    /// <b_s, T b_t*> read off four entries of T's matrix.
    fn t4(&self, t: &OperatorRep, s: usize, u: usize) -> f64 {
        let (a0, a1) = self.flats[s];
        let (c0, c1) = self.flats[u];
        let m = &t.matrix;
        m[[a0 - 1, c0 - 1]] - m[[a0 - 1, c1 - 1]] - m[[a1 - 1, c0 - 1]] + m[[a1 - 1, c1 - 1]]
    }

    fn h4(&self, t: &OperatorRep, tag: HTag, s: usize, u: usize) -> f64 {
        let tv = self.t4(t, s, u);
        match tag {
            HTag::T => tv,
            HTag::IdMinusT => if s == u { 2.0 - tv } else { -tv },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RetainedBlock {
    /// 1-based construction index (the rank for 2-d systems)
    pub index: usize,
    pub flat: (usize, usize),
    pub row: usize,
    /// d = <b, H b*> for the selected branch; |d| >= 1
    pub d: f64,
    pub b_star_norm: f64,
}

/// Coordinates of the factored copy.  For flat spaces the copy is l^q_r;
/// for two-parameter spaces it is the lp-sum over the rows that carry
/// retained blocks, padded to the widest row (padding slots are never
/// written and hold identity on the diagonal where one is needed).
#[derive(Debug, Clone)]
pub struct CopyLayout {
    pub space: SpaceSpec,
    /// retained block t -> 0-based flat coordinate in the copy space
    pub slots: Vec<usize>,
    /// retained block t -> 1-based ambient coordinate read by M / written by N
    pub anchors: Vec<usize>,
}

impl CopyLayout {
    fn new(view: &BlockView, retained: &[usize]) -> CopyLayout {
        let anchors: Vec<usize> = retained.iter().map(|&t| view.flats[t].0).collect();
        match &view.space.kind {
            SpaceKind::Lp { p, .. } => {
                let mut space = SpaceSpec::lp_unchecked(*p, retained.len());
                space.k_u = view.space.k_u;
                space.k_s = view.space.k_s;
                CopyLayout {
                    space,
                    slots: (0..retained.len()).collect(),
                    anchors,
                }
            }
            SpaceKind::LpSum { p_outer, inner, .. } => {
                let inner_p = match &inner.kind {
                    SpaceKind::Lp { p, .. } => *p,
                    SpaceKind::LpSum { .. } => unreachable!("one nesting level"),
                };
                let mut rows_used: Vec<usize> = retained.iter().map(|&t| view.rows[t]).collect();
                rows_used.sort_unstable();
                rows_used.dedup();
                let row_pos: BTreeMap<usize, usize> =
                    rows_used.iter().enumerate().map(|(i, &r)| (r, i)).collect();
                let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
                let mut slots = Vec::with_capacity(retained.len());
                for &t in retained {
                    let c = counts.entry(view.rows[t]).or_insert(0);
                    slots.push((*c, view.rows[t]));
                    *c += 1;
                }
                let width = counts.values().copied().max().unwrap_or(1);
                let slots = slots
                    .into_iter()
                    .map(|(pos, row)| row_pos[&row] * width + pos)
                    .collect();
                let space = SpaceSpec {
                    kind: SpaceKind::LpSum {
                        p_outer: *p_outer,
                        outer_dim: rows_used.len(),
                        inner: Box::new(SpaceSpec::lp_unchecked(inner_p, width)),
                    },
                    k_u: view.space.k_u,
                    k_s: view.space.k_s,
                };
                CopyLayout {
                    space,
                    slots,
                    anchors,
                }
            }
        }
    }
}

/// One measured bound against its theoretical constant.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub measured: NormEstimate,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerificationReport {
    pub h_tag: HTag,
    pub retained_count: usize,
    pub diag_values: Vec<f64>,
    /// ||N.H.M - Id|| on the factored copy
    pub residual_identity: f64,
    /// ||PHJ - Id_Y||, recomputed from the final matrices
    pub neumann_defect: NormEstimate,
    pub inverse_norm: NormEstimate,
    pub crucial_identity_dev: f64,
    pub bq_idempotence_dev: f64,
    pub norm_bounds: Vec<BoundCheck>,
    pub verdict: bool,
}

#[derive(Debug, Clone)]
pub struct FactorBundle {
    pub h_tag: HTag,
    pub retained: Vec<RetainedBlock>,
    pub copy: CopyLayout,
    /// compact operators; ambient embeddings are isometric and implicit
    pub b_op: OperatorRep,
    pub q_op: OperatorRep,
    pub p_op: OperatorRep,
    pub j_op: OperatorRep,
    pub v_op: OperatorRep,
    pub qy_op: OperatorRep,
    pub m_op: OperatorRep,
    pub n_op: OperatorRep,
    /// PHJ and its inverse in copy coordinates
    pub g: OperatorRep,
    pub g_inv: OperatorRep,
}

/// Branch selection: d_j = <b_j, T b_j*> and <b_j, (Id-T)b_j*> = 2 - d_j,
/// so one of |d_j|, |2 - d_j| is >= 1 for every block.  The T branch is
/// tested first and equality ties count for it.
pub fn select_h(
    t: &OperatorRep,
    view: &BlockView,
    min_retained: usize,
) -> Result<(HTag, Vec<usize>), FactorError> {
    let d: Vec<f64> = (0..view.flats.len()).map(|j| view.t4(t, j, j)).collect();
    let left: Vec<usize> = (0..d.len()).filter(|&j| d[j].abs() >= 1.0).collect();
    if left.len() >= min_retained {
        return Ok((HTag::T, left));
    }
    let right: Vec<usize> = (0..d.len()).filter(|&j| (2.0 - d[j]).abs() >= 1.0).collect();
    if right.len() >= min_retained {
        return Ok((HTag::IdMinusT, right));
    }
    Err(FactorError::RetentionImpossible {
        min_retained,
        left: left.len(),
        right: right.len(),
    })
}

fn lu_invert(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::eye(n);
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, m[[r, col]].abs()))
            .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
        if mag < 1e-300 {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap([piv, k], [col, k]);
                inv.swap([piv, k], [col, k]);
            }
        }
        let p = m[[col, col]];
        for k in 0..n {
            m[[col, k]] /= p;
            inv[[col, k]] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[[r, col]];
                if f != 0.0 {
                    for k in 0..n {
                        m[[r, k]] -= f * m[[col, k]];
                        inv[[r, k]] -= f * inv[[col, k]];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Inverts PHJ (given in copy coordinates) and reports the Neumann defect
/// ||PHJ - Id||.  Errors if the defect is not < 1.
pub fn invert_phj(
    g: &OperatorRep,
) -> Result<(OperatorRep, NormEstimate), FactorError> {
    let n = g.matrix.nrows();
    let defect_mat = &g.matrix - &Array2::<f64>::eye(n);
    let defect = op_norm(&OperatorRep::new(
        defect_mat,
        g.domain.clone(),
        g.codomain.clone(),
    )?);
    if defect.upper > 1.0 - 1e-6 {
        return Err(FactorError::DefectTooLarge {
            defect: defect.upper,
        });
    }
    let inv = lu_invert(&g.matrix).ok_or(FactorError::Singular)?;
    let g_inv = OperatorRep::new(inv, g.codomain.clone(), g.domain.clone())?;
    Ok((g_inv, defect))
}

/// Evaluates both sides of the off-diagonal expansion of PHy - y on random
/// y in the span of the retained b_j* and returns the worst coefficient
/// deviation.  The left side goes through the assembled block matrix; the
/// right side re-derives each term from T's columns, so the two paths share
/// no intermediate results.
pub fn crucial_identity_check(
    t: &OperatorRep,
    view: &BlockView,
    retained: &[usize],
    tag: HTag,
    samples: usize,
    seed: u64,
) -> f64 {
    let r = retained.len();
    let n = view.space.total_dim();
    let mut w = Array2::zeros((r, r));
    for (s, &bs) in retained.iter().enumerate() {
        let ds = view.h4(t, tag, bs, bs);
        for (u, &bu) in retained.iter().enumerate() {
            w[[s, u]] = view.h4(t, tag, bs, bu) / ds;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let c: Vec<f64> = (0..r).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // left side: (W - I) c via the assembled matrix
        let lhs: Vec<f64> = (0..r)
            .map(|s| (0..r).map(|u| w[[s, u]] * c[u]).sum::<f64>() - c[s])
            .collect();
        // right side: past sum entrywise, future sum through an actual
        // vector H(sum_{j>i} c_j b_j*) accumulated from T's columns
        for (s, &bs) in retained.iter().enumerate() {
            let past: f64 = (0..s).map(|u| c[u] * w[[s, u]]).sum();
            let mut hv = vec![0.0; n];
            for (u, &bu) in retained.iter().enumerate().skip(s + 1) {
                let (c0, c1) = view.flats[bu];
                for row in 0..n {
                    hv[row] += c[u] * (t.matrix[[row, c0 - 1]] - t.matrix[[row, c1 - 1]]);
                }
            }
            if tag == HTag::IdMinusT {
                // H v = v - T v: negate the accumulated T v, add back v
                for x in hv.iter_mut() {
                    *x = -*x;
                }
                for (u, &bu) in retained.iter().enumerate().skip(s + 1) {
                    let (c0, c1) = view.flats[bu];
                    hv[c0 - 1] += c[u];
                    hv[c1 - 1] -= c[u];
                }
            }
            let (a0, a1) = view.flats[bs];
            let ds = view.h4(t, tag, bs, bs);
            let future = (hv[a0 - 1] - hv[a1 - 1]) / ds;
            let rhs = past + future;
            worst = worst.max((lhs[s] - rhs).abs());
        }
    }
    worst
}

pub fn assemble(
    t: &OperatorRep,
    view: &BlockView,
    min_retained: Option<usize>,
) -> Result<(FactorBundle, VerificationReport), FactorError> {
    let nblocks = view.flats.len();
    let min_retained = min_retained.unwrap_or(nblocks.div_ceil(2));
    let (tag, kept) = select_h(t, view, min_retained)?;
    let retained: Vec<RetainedBlock> = kept
        .iter()
        .map(|&j| RetainedBlock {
            index: j + 1,
            flat: view.flats[j],
            row: view.rows[j],
            d: view.h4(t, tag, j, j),
            b_star_norm: view.b_star_norm(j),
        })
        .collect();
    let copy = CopyLayout::new(view, &kept);
    let n = view.space.total_dim();
    let cdim = copy.space.total_dim();
    let space = view.space.clone();

    let mut b_mat = Array2::zeros((cdim, n));
    let mut q_mat = Array2::zeros((cdim, n));
    let mut p_mat = Array2::zeros((cdim, n));
    let mut emb = Array2::zeros((n, cdim));
    for (t_idx, rb) in retained.iter().enumerate() {
        let slot = copy.slots[t_idx];
        let (p0, p1) = rb.flat;
        b_mat[[slot, copy.anchors[t_idx] - 1]] = 1.0;
        q_mat[[slot, p0 - 1]] = rb.b_star_norm / 2.0;
        q_mat[[slot, p1 - 1]] = -rb.b_star_norm / 2.0;
        p_mat[[slot, p0 - 1]] = rb.b_star_norm / rb.d;
        p_mat[[slot, p1 - 1]] = -rb.b_star_norm / rb.d;
        emb[[p0 - 1, slot]] = 1.0 / rb.b_star_norm;
        emb[[p1 - 1, slot]] = -1.0 / rb.b_star_norm;
    }

    // PHJ in copy coordinates; padding slots carry an identity diagonal
    let mut g_mat = Array2::eye(cdim);
    for (s, rbs) in retained.iter().enumerate() {
        for (u, rbu) in retained.iter().enumerate() {
            g_mat[[copy.slots[s], copy.slots[u]]] = rbs.b_star_norm / rbu.b_star_norm
                * view.h4(t, tag, kept[s], kept[u])
                / rbs.d;
        }
    }

    let b_op = OperatorRep::new(b_mat, space.clone(), copy.space.clone())?;
    let q_op = OperatorRep::new(q_mat, space.clone(), copy.space.clone())?;
    let p_op = OperatorRep::new(p_mat, space.clone(), copy.space.clone())?;
    let j_op = OperatorRep::new(emb, copy.space.clone(), space.clone())?;
    let qy_op = q_op.compose(&j_op)?;
    let g = OperatorRep::new(g_mat, copy.space.clone(), copy.space.clone())?;
    let (g_inv, defect) = invert_phj(&g)?;
    let v_op = g_inv.compose(&p_op)?;
    let m_op = b_op.clone();
    let n_op = v_op.clone();

    // Independent residual: rebuild PH(embedding) by applying H to the
    // embedded blocks through T's matrix, then compare N.H.M with Id.
    let mut h_emb = Array2::zeros((n, cdim));
    for (t_idx, rb) in retained.iter().enumerate() {
        let slot = copy.slots[t_idx];
        let (p0, p1) = rb.flat;
        for row in 0..n {
            let tcol = (t.matrix[[row, p0 - 1]] - t.matrix[[row, p1 - 1]]) / rb.b_star_norm;
            h_emb[[row, slot]] = match tag {
                HTag::T => tcol,
                HTag::IdMinusT => emb_entry(rb, row, p0, p1) - tcol,
            };
        }
    }
    let ph = p_op.matrix.dot(&h_emb);
    let mut residual_mat = g_inv.matrix.dot(&ph) - Array2::<f64>::eye(cdim);
    // padding slots are not part of the copy; they formally carry the identity
    for k in 0..cdim {
        if !copy.slots.contains(&k) {
            residual_mat[[k, k]] += 1.0;
        }
    }
    let residual = op_norm(&OperatorRep::new(
        residual_mat,
        copy.space.clone(),
        copy.space.clone(),
    )?);

    let inverse_norm = op_norm(&g_inv);
    let crucial = crucial_identity_check(t, view, &kept, tag, 100, 0xc0ffee);
    // (BQ)^2 - BQ = Emb (Q|Y - Id) Q with isometric Emb
    let mut qy_dev = qy_op.matrix.clone();
    for k in 0..cdim {
        qy_dev[[k, k]] -= if copy.slots.contains(&k) { 1.0 } else { 0.0 };
    }
    let bq_dev = op_norm(&OperatorRep::new(
        qy_dev,
        copy.space.clone(),
        copy.space.clone(),
    )?)
    .upper
        * op_norm(&q_op).upper
        * op_norm(&j_op).upper;

    let (nb, nq, np) = (op_norm(&b_op), op_norm(&q_op), op_norm(&p_op));
    let (nj, nv, nqy) = (op_norm(&j_op), op_norm(&v_op), op_norm(&qy_op));
    let (nm, nn) = (op_norm(&m_op), op_norm(&n_op));
    let (ku, ks) = (space.k_u, space.k_s);
    let product = |a: NormEstimate, b: NormEstimate| NormEstimate {
        lower: a.lower * b.lower,
        upper: a.upper * b.upper,
        exact: a.exact && b.exact,
    };
    let rel = 1e-6;
    let check = |name: &str, measured: NormEstimate, bound: f64| BoundCheck {
        name: name.to_string(),
        measured,
        bound,
        pass: measured.upper <= bound * (1.0 + rel),
    };
    let norm_bounds = vec![
        check("B", nb, 2.0 * ku.powi(2) * ks),
        check("Q", nq, 2.0 * ks * ku),
        check("P", np, 8.0 * ku.powi(4) * ks.powi(2)),
        check("B*Q|Y", product(nb, nqy), 4.0 * ku.powi(3) * ks.powi(2)),
        check("J*V", product(nj, nv), 12.0 * ku.powi(4) * ks.powi(2)),
        check("M*N", product(nm, nn), 48.0 * ku.powi(7) * ks.powi(4)),
    ];

    let defect_ok = defect.upper <= 1.0 / 3.0 + 1e-6;
    let inverse_ok = inverse_norm.upper <= 1.5 + 1e-6;
    let verdict = residual.upper <= 1e-9
        && defect_ok
        && inverse_ok
        && crucial <= 1e-10
        && bq_dev <= 1e-10
        && norm_bounds.iter().all(|c| c.pass);

    let report = VerificationReport {
        h_tag: tag,
        retained_count: retained.len(),
        diag_values: retained.iter().map(|rb| rb.d).collect(),
        residual_identity: residual.upper,
        neumann_defect: defect,
        inverse_norm,
        crucial_identity_dev: crucial,
        bq_idempotence_dev: bq_dev,
        norm_bounds,
        verdict,
    };
    let bundle = FactorBundle {
        h_tag: tag,
        retained,
        copy,
        b_op,
        q_op,
        p_op,
        j_op,
        v_op,
        qy_op,
        m_op,
        n_op,
        g,
        g_inv,
    };
    Ok((bundle, report))
}

fn emb_entry(rb: &RetainedBlock, row: usize, p0: usize, p1: usize) -> f64 {
    if row == p0 - 1 {
        1.0 / rb.b_star_norm
    } else if row == p1 - 1 {
        -1.0 / rb.b_star_norm
    } else {
        0.0
    }
}
