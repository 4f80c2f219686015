//! Truncated sequence spaces, their norms and coordinate bookkeeping.
//!
//! All index sets exposed by this module are 1-based, matching the usual
//! basis indexing `e_1, e_2, ...`.  Two-parameter coordinates `(i, j)` are
//! flattened row-major: flat = (i-1) * inner_dim + (j-1).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpaceError {
    #[error("exponent must lie in [1, inf], got {0}")]
    BadExponent(f64),
    #[error("dimension too small: {0} (need at least 2)")]
    DimTooSmall(usize),
    #[error("outer dimension must be >= 1")]
    OuterDimTooSmall,
    #[error("coordinate length {got} does not match space dimension {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("index {0} out of range 1..={1}")]
    IndexOutOfRange(usize, usize),
    #[error("pair ({0}, {1}) outside the index grid")]
    PairOutOfRange(usize, usize),
    #[error("vectors live in different spaces")]
    SpaceMismatch,
    #[error("pairing requires one predual-side and one dual-side vector")]
    SideMismatch,
    #[error("operation requires a two-parameter (lp-sum) space")]
    NotTwoParam,
    #[error("cannot parse space description {0:?}")]
    Parse(String),
}

/// An exponent p in [1, inf].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exp {
    Finite(f64),
    Inf,
}

impl Exp {
    pub const ONE: Exp = Exp::Finite(1.0);
    pub const TWO: Exp = Exp::Finite(2.0);

    pub fn new(p: f64) -> Result<Exp, SpaceError> {
        if p.is_infinite() && p > 0.0 {
            Ok(Exp::Inf)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exp::Finite(p))
        } else {
            Err(SpaceError::BadExponent(p))
        }
    }

    /// Conjugate exponent, with the convention 1' = inf and inf' = 1.
    pub fn conjugate(self) -> Exp {
        match self {
            Exp::Inf => Exp::Finite(1.0),
            Exp::Finite(p) if p == 1.0 => Exp::Inf,
            Exp::Finite(p) => Exp::Finite(p / (p - 1.0)),
        }
    }

    pub fn is_one(self) -> bool {
        matches!(self, Exp::Finite(p) if p == 1.0)
    }

    pub fn is_inf(self) -> bool {
        matches!(self, Exp::Inf)
    }

    pub fn is_two(self) -> bool {
        matches!(self, Exp::Finite(p) if p == 2.0)
    }
}

impl fmt::Display for Exp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Exp::Inf => write!(f, "inf"),
            Exp::Finite(p) if p.fract() == 0.0 => write!(f, "{}", *p as u64),
            Exp::Finite(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for Exp {
    type Err = SpaceError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "inf" | "infinity" | "oo" => Ok(Exp::Inf),
            _ => {
                let p: f64 = s.parse().map_err(|_| SpaceError::Parse(s.to_string()))?;
                Exp::new(p)
            }
        }
    }
}

impl Serialize for Exp {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Exp {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Which side of the duality a coordinate array represents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    /// Element of S* (the space the operators act on); normed by the declared exponents.
    Dual,
    /// Element of the predual S; normed by the conjugate exponents.
    Predual,
}

impl Side {
    pub fn flip(self) -> Side {
        match self {
            Side::Dual => Side::Predual,
            Side::Predual => Side::Dual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SpaceKind {
    Lp {
        p: Exp,
        dim: usize,
    },
    LpSum {
        p_outer: Exp,
        outer_dim: usize,
        inner: Box<SpaceSpec>,
    },
}

/// A truncated sequence space together with its basis constants.
///
/// The unit vector basis of l^p is 1-unconditional and 1-subsymmetric, so
/// `K_u = K_s = 1` for every space built by the public constructors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpaceSpec {
    pub kind: SpaceKind,
    pub k_u: f64,
    pub k_s: f64,
}

impl SpaceSpec {
    pub fn lp(p: Exp, dim: usize) -> Result<SpaceSpec, SpaceError> {
        if dim < 2 {
            return Err(SpaceError::DimTooSmall(dim));
        }
        Ok(SpaceSpec::lp_unchecked(p, dim))
    }

    /// Internal constructor that admits dim = 1 (used for factored-copy spaces).
    pub(crate) fn lp_unchecked(p: Exp, dim: usize) -> SpaceSpec {
        SpaceSpec {
            kind: SpaceKind::Lp { p, dim },
            k_u: 1.0,
            k_s: 1.0,
        }
    }

    pub fn lp_sum(p_outer: Exp, outer_dim: usize, inner: SpaceSpec) -> Result<SpaceSpec, SpaceError> {
        if outer_dim < 1 {
            return Err(SpaceError::OuterDimTooSmall);
        }
        Ok(SpaceSpec {
            k_u: inner.k_u,
            k_s: inner.k_s,
            kind: SpaceKind::LpSum {
                p_outer,
                outer_dim,
                inner: Box::new(inner),
            },
        })
    }

    pub fn linf(dim: usize) -> Result<SpaceSpec, SpaceError> {
        SpaceSpec::lp(Exp::Inf, dim)
    }

    pub fn total_dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Lp { dim, .. } => *dim,
            SpaceKind::LpSum { outer_dim, inner, .. } => outer_dim * inner.total_dim(),
        }
    }

    /// Inner dimension: for flat spaces the dimension itself.
    pub fn inner_dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Lp { dim, .. } => *dim,
            SpaceKind::LpSum { inner, .. } => inner.total_dim(),
        }
    }

    pub fn outer_dim(&self) -> usize {
        match &self.kind {
            SpaceKind::Lp { .. } => 1,
            SpaceKind::LpSum { outer_dim, .. } => *outer_dim,
        }
    }

    pub fn is_two_param(&self) -> bool {
        matches!(self.kind, SpaceKind::LpSum { .. })
    }

    pub fn inner_space(&self) -> Option<&SpaceSpec> {
        match &self.kind {
            SpaceKind::Lp { .. } => None,
            SpaceKind::LpSum { inner, .. } => Some(inner),
        }
    }

    /// True when the dual-side norm is a plain sup over coordinates.
    pub fn is_sup_norm(&self, side: Side) -> bool {
        match &self.kind {
            SpaceKind::Lp { p, .. } => effective(*p, side).is_inf(),
            SpaceKind::LpSum { p_outer, inner, .. } => {
                effective(*p_outer, side).is_inf() && inner.is_sup_norm(side)
            }
        }
    }

    /// Flat (i, j) -> 0-based storage offset.  1-based inputs.
    pub fn flat_index(&self, i: usize, j: usize) -> Result<usize, SpaceError> {
        match &self.kind {
            SpaceKind::Lp { .. } => Err(SpaceError::NotTwoParam),
            SpaceKind::LpSum { outer_dim, inner, .. } => {
                let n = inner.total_dim();
                if i == 0 || i > *outer_dim || j == 0 || j > n {
                    return Err(SpaceError::PairOutOfRange(i, j));
                }
                Ok((i - 1) * n + (j - 1))
            }
        }
    }

    pub fn norm_coords(&self, coords: &[f64], side: Side) -> f64 {
        debug_assert_eq!(coords.len(), self.total_dim());
        norm_rec(coords, self, side)
    }
}

fn effective(p: Exp, side: Side) -> Exp {
    match side {
        Side::Dual => p,
        Side::Predual => p.conjugate(),
    }
}

fn lp_norm(coords: &[f64], p: Exp) -> f64 {
    match p {
        Exp::Inf => coords.iter().fold(0.0, |m, x| m.max(x.abs())),
        Exp::Finite(p) if p == 1.0 => coords.iter().map(|x| x.abs()).sum(),
        Exp::Finite(p) if p == 2.0 => coords.iter().map(|x| x * x).sum::<f64>().sqrt(),
        Exp::Finite(p) => coords
            .iter()
            .map(|x| x.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p),
    }
}

fn lp_agg(values: &[f64], p: Exp) -> f64 {
    lp_norm(values, p)
}

fn norm_rec(coords: &[f64], space: &SpaceSpec, side: Side) -> f64 {
    match &space.kind {
        SpaceKind::Lp { p, .. } => lp_norm(coords, effective(*p, side)),
        SpaceKind::LpSum { p_outer, inner, .. } => {
            let n = inner.total_dim();
            let inner_norms: Vec<f64> = coords
                .chunks(n)
                .map(|chunk| norm_rec(chunk, inner, side))
                .collect();
            lp_agg(&inner_norms, effective(*p_outer, side))
        }
    }
}

/// A coordinate vector living in a truncated space on one side of the duality.
#[derive(Debug, Clone, PartialEq)]
pub struct VecRep {
    pub coords: Vec<f64>,
    pub space: SpaceSpec,
    pub side: Side,
}

impl VecRep {
    pub fn new(coords: Vec<f64>, space: SpaceSpec, side: Side) -> Result<VecRep, SpaceError> {
        if coords.len() != space.total_dim() {
            return Err(SpaceError::DimensionMismatch {
                got: coords.len(),
                want: space.total_dim(),
            });
        }
        Ok(VecRep { coords, space, side })
    }

    pub fn zero(space: SpaceSpec, side: Side) -> VecRep {
        let coords = vec![0.0; space.total_dim()];
        VecRep { coords, space, side }
    }

    /// Unit basis vector e_k (1-based).
    pub fn basis(space: SpaceSpec, side: Side, k: usize) -> Result<VecRep, SpaceError> {
        let dim = space.total_dim();
        if k == 0 || k > dim {
            return Err(SpaceError::IndexOutOfRange(k, dim));
        }
        let mut v = VecRep::zero(space, side);
        v.coords[k - 1] = 1.0;
        Ok(v)
    }

    pub fn norm(&self) -> f64 {
        self.space.norm_coords(&self.coords, self.side)
    }
}

/// Norm of `v` in its own space and side.
pub fn norm(v: &VecRep) -> f64 {
    v.norm()
}

/// Coordinate pairing of a predual-side vector with a dual-side functional.
pub fn pair(x: &VecRep, f: &VecRep) -> Result<f64, SpaceError> {
    if x.space != f.space {
        return Err(SpaceError::SpaceMismatch);
    }
    if x.side == f.side {
        return Err(SpaceError::SideMismatch);
    }
    Ok(dot(&x.coords, &f.coords))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// P_A: zero all coordinates outside the (1-based) index set A.
pub fn coord_projection(a: &BTreeSet<usize>, v: &VecRep) -> Result<VecRep, SpaceError> {
    let dim = v.space.total_dim();
    for &k in a {
        if k == 0 || k > dim {
            return Err(SpaceError::IndexOutOfRange(k, dim));
        }
    }
    let mut out = v.clone();
    for (idx, c) in out.coords.iter_mut().enumerate() {
        if !a.contains(&(idx + 1)) {
            *c = 0.0;
        }
    }
    Ok(out)
}

/// R_K: keep exactly the grid coordinates in K (1-based pairs), for lp-sum spaces.
pub fn rect_projection(k: &BTreeSet<(usize, usize)>, y: &VecRep) -> Result<VecRep, SpaceError> {
    if !y.space.is_two_param() {
        return Err(SpaceError::NotTwoParam);
    }
    let mut keep = vec![false; y.space.total_dim()];
    for &(i, j) in k {
        keep[y.space.flat_index(i, j)?] = true;
    }
    let mut out = y.clone();
    for (idx, c) in out.coords.iter_mut().enumerate() {
        if !keep[idx] {
            *c = 0.0;
        }
    }
    Ok(out)
}

/// A position in the two-parameter grid, 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TwoParamIndex {
    pub i: usize,
    pub j: usize,
}

impl TwoParamIndex {
    pub fn new(i: usize, j: usize) -> TwoParamIndex {
        assert!(i >= 1 && j >= 1, "two-parameter indices are 1-based");
        TwoParamIndex { i, j }
    }

    /// Sort key of the `precede` order: (i + j, i) lexicographically.
    pub fn key(self) -> (usize, usize) {
        (self.i + self.j, self.i)
    }
}

/// Rank of (i, j) in the order that sorts N^2 by (i + j, i) lexicographically.
///
/// Closed form: pairs with a smaller coordinate sum s contribute
/// (s - 1)(s - 2) / 2, and within the anti-diagonal the rank offset is i.
pub fn precede_rank(idx: TwoParamIndex) -> usize {
    let s = idx.i + idx.j;
    (s - 1) * (s - 2) / 2 + idx.i
}

/// Inverse of [`precede_rank`]; total on k >= 1.
pub fn precede_unrank(k: usize) -> TwoParamIndex {
    assert!(k >= 1);
    // find the anti-diagonal: largest s with (s-1)(s-2)/2 < k
    let mut s = 2usize;
    while s * (s - 1) / 2 < k {
        s += 1;
    }
    // now (s-1)(s-2)/2 < k <= s(s-1)/2
    let i = k - (s - 1) * (s - 2) / 2;
    TwoParamIndex::new(i, s - i)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(coords: &[f64], space: SpaceSpec, side: Side) -> VecRep {
        VecRep::new(coords.to_vec(), space, side).unwrap()
    }

    #[test]
    fn norm_basis_vector_is_one() {
        for p in [Exp::ONE, Exp::TWO, Exp::Finite(3.5), Exp::Inf] {
            let s = SpaceSpec::lp(p, 5).unwrap();
            let e1 = VecRep::basis(s, Side::Dual, 1).unwrap();
            assert_eq!(e1.norm(), 1.0);
        }
    }

    #[test]
    fn norm_examples() {
        let linf2 = SpaceSpec::linf(2).unwrap();
        assert_eq!(v(&[1.0, 1.0], linf2, Side::Dual).norm(), 1.0);
        let l2 = SpaceSpec::lp(Exp::TWO, 2).unwrap();
        assert_eq!(v(&[3.0, 4.0], l2, Side::Dual).norm(), 5.0);
    }

    #[test]
    fn predual_of_linf_is_l1() {
        let linf = SpaceSpec::linf(3).unwrap();
        let x = v(&[1.0, -2.0, 3.0], linf, Side::Predual);
        assert_eq!(x.norm(), 6.0);
    }

    #[test]
    fn lpsum_mixed_norm() {
        // l^1(l^inf), 2 rows of 3
        let inner = SpaceSpec::linf(3).unwrap();
        let s = SpaceSpec::lp_sum(Exp::ONE, 2, inner).unwrap();
        let y = v(&[1.0, -2.0, 0.0, 0.5, 0.25, 0.0], s.clone(), Side::Dual);
        assert_eq!(y.norm(), 2.0 + 0.5);
        // predual side: l^inf(l^1)
        let x = v(&[1.0, -2.0, 0.0, 0.5, 0.25, 0.0], s, Side::Predual);
        assert_eq!(x.norm(), 3.0);
    }

    #[test]
    fn pairing_biorthogonality() {
        let s = SpaceSpec::linf(4).unwrap();
        let e1 = VecRep::basis(s.clone(), Side::Predual, 1).unwrap();
        let f1 = VecRep::basis(s.clone(), Side::Dual, 1).unwrap();
        let f2 = VecRep::basis(s.clone(), Side::Dual, 2).unwrap();
        assert_eq!(pair(&e1, &f1).unwrap(), 1.0);
        assert_eq!(pair(&e1, &f2).unwrap(), 0.0);
        let x = v(&[1.0, -1.0, 0.0, 0.0], s.clone(), Side::Predual);
        let f = v(&[2.0, 3.0, 7.0, 0.0], s, Side::Dual);
        assert_eq!(pair(&x, &f).unwrap(), -1.0);
    }

    #[test]
    fn pairing_rejects_same_side() {
        let s = SpaceSpec::linf(2).unwrap();
        let a = VecRep::basis(s.clone(), Side::Dual, 1).unwrap();
        let b = VecRep::basis(s, Side::Dual, 2).unwrap();
        assert!(pair(&a, &b).is_err());
    }

    #[test]
    fn coord_projection_examples() {
        let s = SpaceSpec::lp(Exp::ONE, 3).unwrap();
        let x = v(&[5.0, 7.0, 9.0], s, Side::Dual);
        let all: BTreeSet<usize> = [1, 2, 3].into_iter().collect();
        assert_eq!(coord_projection(&all, &x).unwrap(), x);
        let empty = BTreeSet::new();
        assert_eq!(coord_projection(&empty, &x).unwrap().coords, vec![0.0; 3]);
        let two: BTreeSet<usize> = [2].into_iter().collect();
        assert_eq!(coord_projection(&two, &x).unwrap().coords, vec![0.0, 7.0, 0.0]);
        let bad: BTreeSet<usize> = [4].into_iter().collect();
        assert!(coord_projection(&bad, &x).is_err());
    }

    #[test]
    fn rect_projection_examples() {
        let inner = SpaceSpec::linf(3).unwrap();
        let s = SpaceSpec::lp_sum(Exp::ONE, 2, inner).unwrap();
        let y = v(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], s.clone(), Side::Dual);
        let full: BTreeSet<(usize, usize)> =
            (1..=2).flat_map(|i| (1..=3).map(move |j| (i, j))).collect();
        assert_eq!(rect_projection(&full, &y).unwrap(), y);
        let k: BTreeSet<(usize, usize)> = [(1, 1), (1, 2)].into_iter().collect();
        assert_eq!(
            rect_projection(&k, &y).unwrap().coords,
            vec![1.0, 2.0, 0.0, 0.0, 0.0, 0.0]
        );
        let empty = BTreeSet::new();
        assert_eq!(rect_projection(&empty, &y).unwrap().coords, vec![0.0; 6]);
        let bad: BTreeSet<(usize, usize)> = [(3, 1)].into_iter().collect();
        assert!(rect_projection(&bad, &y).is_err());
    }

    #[test]
    fn rect_composition_is_intersection() {
        let inner = SpaceSpec::linf(2).unwrap();
        let s = SpaceSpec::lp_sum(Exp::Inf, 2, inner).unwrap();
        let y = v(&[1.0, 2.0, 3.0, 4.0], s, Side::Dual);
        let k1: BTreeSet<(usize, usize)> = [(1, 1), (1, 2), (2, 1)].into_iter().collect();
        let k2: BTreeSet<(usize, usize)> = [(1, 2), (2, 1), (2, 2)].into_iter().collect();
        let cap: BTreeSet<(usize, usize)> = k1.intersection(&k2).cloned().collect();
        let lhs = rect_projection(&k1, &rect_projection(&k2, &y).unwrap()).unwrap();
        assert_eq!(lhs, rect_projection(&cap, &y).unwrap());
    }

    #[test]
    fn precede_rank_examples() {
        assert_eq!(precede_rank(TwoParamIndex::new(1, 1)), 1);
        assert_eq!(precede_rank(TwoParamIndex::new(1, 2)), 2);
        assert_eq!(precede_rank(TwoParamIndex::new(2, 1)), 3);
        assert_eq!(precede_rank(TwoParamIndex::new(3, 1)), 6);
    }

    #[test]
    fn precede_rank_is_bijective_on_grid() {
        let mut seen = BTreeSet::new();
        for i in 1..=50 {
            for j in 1..=50 {
                let idx = TwoParamIndex::new(i, j);
                let r = precede_rank(idx);
                assert_eq!(precede_unrank(r), idx);
                seen.insert(r);
            }
        }
        assert_eq!(seen.len(), 2500);
        // ranks of the full triangle below the grid's anti-diagonal are gap-free
        let triangle: BTreeSet<usize> = (1..=50)
            .flat_map(|i| (1..=50 - i + 1).map(move |j| precede_rank(TwoParamIndex::new(i, j))))
            .collect();
        let count = triangle.len();
        assert_eq!(triangle, (1..=count).collect::<BTreeSet<_>>());
    }

    #[test]
    fn precede_order_preserving() {
        for a in 1..200 {
            for b in (a + 1)..200 {
                let (x, y) = (precede_unrank(a), precede_unrank(b));
                assert!(x.key() < y.key());
            }
        }
    }

    #[test]
    fn conjugate_convention() {
        assert_eq!(Exp::ONE.conjugate(), Exp::Inf);
        assert_eq!(Exp::Inf.conjugate(), Exp::ONE);
        assert_eq!(Exp::TWO.conjugate(), Exp::TWO);
        match Exp::Finite(4.0).conjugate() {
            Exp::Finite(q) => assert!((q - 4.0 / 3.0).abs() < 1e-15),
            _ => panic!(),
        }
    }

    proptest! {
        #[test]
        fn projection_idempotent(coords in prop::collection::vec(-10.0f64..10.0, 6),
                                 mask in prop::collection::vec(any::<bool>(), 6)) {
            let s = SpaceSpec::lp(Exp::TWO, 6).unwrap();
            let x = VecRep::new(coords, s, Side::Dual).unwrap();
            let a: BTreeSet<usize> = mask.iter().enumerate()
                .filter(|(_, &m)| m).map(|(i, _)| i + 1).collect();
            let once = coord_projection(&a, &x).unwrap();
            let twice = coord_projection(&a, &once).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn projection_nonexpansive_and_selfadjoint(
            xc in prop::collection::vec(-5.0f64..5.0, 6),
            fc in prop::collection::vec(-5.0f64..5.0, 6),
            mask in prop::collection::vec(any::<bool>(), 6),
            pick in 0usize..4)
        {
            let p = [Exp::ONE, Exp::Finite(1.5), Exp::TWO, Exp::Inf][pick];
            let s = SpaceSpec::lp(p, 6).unwrap();
            let x = VecRep::new(xc, s.clone(), Side::Predual).unwrap();
            let f = VecRep::new(fc, s, Side::Dual).unwrap();
            let a: BTreeSet<usize> = mask.iter().enumerate()
                .filter(|(_, &m)| m).map(|(i, _)| i + 1).collect();
            let pf = coord_projection(&a, &f).unwrap();
            prop_assert!(pf.norm() <= f.norm() + 1e-12);
            let px = coord_projection(&a, &x).unwrap();
            let lhs = pair(&px, &f).unwrap();
            let rhs = pair(&x, &pf).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9);
        }

        #[test]
        fn hoelder_inequality(
            xc in prop::collection::vec(-5.0f64..5.0, 5),
            fc in prop::collection::vec(-5.0f64..5.0, 5),
            pick in 0usize..4)
        {
            let p = [Exp::ONE, Exp::Finite(3.0), Exp::TWO, Exp::Inf][pick];
            let s = SpaceSpec::lp(p, 5).unwrap();
            let x = VecRep::new(xc, s.clone(), Side::Predual).unwrap();
            let f = VecRep::new(fc, s, Side::Dual).unwrap();
            prop_assert!(pair(&x, &f).unwrap().abs() <= x.norm() * f.norm() + 1e-9);
        }

        #[test]
        fn rank_unrank_roundtrip(k in 1usize..100_000) {
            prop_assert_eq!(precede_rank(precede_unrank(k)), k);
        }
    }
}
