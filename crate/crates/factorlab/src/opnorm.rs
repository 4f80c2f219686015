//! Operator norms between truncated sequence spaces.
//!
//! Policy: exact values wherever a closed form exists (l^1 domains by
//! column reduction, sup-norm codomains by row reduction, l^2 -> l^2 by the
//! largest singular value, outer-l^1 sums by recursion on the coordinate
//! blocks), certified lower/upper brackets everywhere else.  The brackets
//! are what the factorization bound checks consume; `exact` is set only
//! when both sides provably coincide.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seqspace::{Exp, Side, SpaceError, SpaceKind, SpaceSpec, VecRep};

#[derive(Debug, Error)]
pub enum OpError {
    #[error("matrix is {rows}x{cols} but codomain/domain dimensions are {out}x{inp}")]
    ShapeMismatch {
        rows: usize,
        cols: usize,
        out: usize,
        inp: usize,
    },
    #[error("operators have incompatible shapes for composition")]
    ComposeMismatch,
    #[error(transparent)]
    Space(#[from] SpaceError),
    #[error("cannot parse matrix text: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A dense operator acting on dual-side coordinate vectors.
///
/// Rows index output coordinates, columns index input coordinates.  For
/// lp-sum spaces the flattening is row-major (i, j).
#[derive(Debug, Clone)]
pub struct OperatorRep {
    pub matrix: Array2<f64>,
    pub domain: SpaceSpec,
    pub codomain: SpaceSpec,
}

impl OperatorRep {
    pub fn new(
        matrix: Array2<f64>,
        domain: SpaceSpec,
        codomain: SpaceSpec,
    ) -> Result<OperatorRep, OpError> {
        let (rows, cols) = matrix.dim();
        if rows != codomain.total_dim() || cols != domain.total_dim() {
            return Err(OpError::ShapeMismatch {
                rows,
                cols,
                out: codomain.total_dim(),
                inp: domain.total_dim(),
            });
        }
        Ok(OperatorRep {
            matrix,
            domain,
            codomain,
        })
    }

    pub fn identity(space: SpaceSpec) -> OperatorRep {
        let n = space.total_dim();
        OperatorRep {
            matrix: Array2::eye(n),
            domain: space.clone(),
            codomain: space,
        }
    }

    pub fn zero(space: SpaceSpec) -> OperatorRep {
        let n = space.total_dim();
        OperatorRep {
            matrix: Array2::zeros((n, n)),
            domain: space.clone(),
            codomain: space,
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.matrix.ncols());
        self.matrix
            .axis_iter(Axis(0))
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// A^T x, i.e. the coefficients of the functional x . A on the domain.
    pub fn apply_transpose(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.matrix.nrows());
        let mut out = vec![0.0; self.matrix.ncols()];
        for (r, row) in self.matrix.axis_iter(Axis(0)).enumerate() {
            let xr = x[r];
            if xr != 0.0 {
                for (c, a) in row.iter().enumerate() {
                    out[c] += a * xr;
                }
            }
        }
        out
    }

    pub fn compose(&self, rhs: &OperatorRep) -> Result<OperatorRep, OpError> {
        if self.domain != rhs.codomain {
            return Err(OpError::ComposeMismatch);
        }
        Ok(OperatorRep {
            matrix: self.matrix.dot(&rhs.matrix),
            domain: rhs.domain.clone(),
            codomain: self.codomain.clone(),
        })
    }
}

/// A certified bracket around an operator norm.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormEstimate {
    pub lower: f64,
    pub upper: f64,
    pub exact: bool,
}

impl NormEstimate {
    fn exact(v: f64) -> NormEstimate {
        NormEstimate {
            lower: v,
            upper: v,
            exact: true,
        }
    }

    fn bracket(lower: f64, upper: f64) -> NormEstimate {
        let lower = lower.min(upper);
        if upper - lower <= 1e-12 * upper.max(1.0) {
            NormEstimate {
                lower,
                upper,
                exact: true,
            }
        } else {
            NormEstimate {
                lower,
                upper,
                exact: false,
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct OpNormOptions {
    /// Random restarts for the lower-bound searches.
    pub restarts: usize,
    /// Relative tolerance of the l^2 power iteration.
    pub tol: f64,
    pub seed: u64,
}

impl Default for OpNormOptions {
    fn default() -> Self {
        OpNormOptions {
            restarts: 8,
            tol: 1e-10,
            seed: 0x6f70_6e6f_726d,
        }
    }
}

pub fn op_norm(a: &OperatorRep) -> NormEstimate {
    op_norm_with(a, &OpNormOptions::default())
}

pub fn op_norm_with(a: &OperatorRep, opts: &OpNormOptions) -> NormEstimate {
    norm_dispatch(a.matrix.view(), &a.domain, &a.codomain, opts)
}

fn norm_dispatch(
    m: ArrayView2<'_, f64>,
    domain: &SpaceSpec,
    codomain: &SpaceSpec,
    opts: &OpNormOptions,
) -> NormEstimate {
    if m.is_empty() {
        return NormEstimate::exact(0.0);
    }
    // l^2 -> l^2: largest singular value, reported exact at tolerance `tol`.
    if let (SpaceKind::Lp { p: pd, .. }, SpaceKind::Lp { p: pc, .. }) =
        (&domain.kind, &codomain.kind)
    {
        if pd.is_two() && pc.is_two() {
            return NormEstimate::exact(sigma_max(m, opts));
        }
    }
    // l^1-atomic domain: exact, the max over columns of the codomain norm.
    if is_flat_with(domain, |p| p.is_one()) {
        let best = m
            .axis_iter(Axis(1))
            .map(|col| codomain.norm_coords(col.as_slice().unwrap_or(&col.to_vec()), Side::Dual))
            .fold(0.0f64, f64::max);
        return NormEstimate::exact(best);
    }
    // sup-norm codomain: exact, the max over rows of the domain's dual norm.
    if codomain.is_sup_norm(Side::Dual) {
        let best = m
            .axis_iter(Axis(0))
            .map(|row| {
                let r: Vec<f64> = row.to_vec();
                domain.norm_coords(&r, Side::Predual)
            })
            .fold(0.0f64, f64::max);
        return NormEstimate::exact(best);
    }
    // Outer l^1 sum domain: the unit ball is the convex hull of the inner
    // balls, so the norm is the max over coordinate blocks.
    if let SpaceKind::LpSum {
        p_outer,
        outer_dim,
        inner,
    } = &domain.kind
    {
        if p_outer.is_one() {
            let n = inner.total_dim();
            let mut est = NormEstimate::exact(0.0);
            for i in 0..*outer_dim {
                let sub = m.slice(ndarray::s![.., i * n..(i + 1) * n]);
                let part = norm_dispatch(sub, inner, codomain, opts);
                est = NormEstimate {
                    lower: est.lower.max(part.lower),
                    upper: est.upper.max(part.upper),
                    exact: est.exact && part.exact,
                };
            }
            return est;
        }
    }
    // General case: certified bracket.
    let upper = upper_bound(m, domain, codomain);
    let lower = lower_bound(m, domain, codomain, opts);
    NormEstimate::bracket(lower.min(upper), upper)
}

fn is_flat_with(space: &SpaceSpec, pred: impl Fn(Exp) -> bool + Copy) -> bool {
    match &space.kind {
        SpaceKind::Lp { p, .. } => pred(*p),
        SpaceKind::LpSum { p_outer, inner, .. } => pred(*p_outer) && is_flat_with(inner, pred),
    }
}

/// Entrywise upper bound: |(Ax)_o| <= sum_k |A_ok| whenever ||x||_inf <= 1,
/// and every norm here dominates the sup norm.  For flat equal exponents the
/// Riesz-Thorin interpolation bound is also applied.
fn upper_bound(m: ArrayView2<'_, f64>, domain: &SpaceSpec, codomain: &SpaceSpec) -> f64 {
    let c: Vec<f64> = m
        .axis_iter(Axis(0))
        .map(|row| row.iter().map(|x| x.abs()).sum())
        .collect();
    let mut upper = codomain.norm_coords(&c, Side::Dual);
    if let (SpaceKind::Lp { p: pd, .. }, SpaceKind::Lp { p: pc, .. }) =
        (&domain.kind, &codomain.kind)
    {
        if pd == pc {
            if let Exp::Finite(p) = pd {
                let n1 = m
                    .axis_iter(Axis(1))
                    .map(|col| col.iter().map(|x| x.abs()).sum::<f64>())
                    .fold(0.0f64, f64::max);
                let ninf = c.iter().fold(0.0f64, |a, &b| a.max(b));
                let theta = 1.0 / p;
                upper = upper.min(n1.powf(theta) * ninf.powf(1.0 - theta));
            }
        }
    }
    upper
}

fn lower_bound(
    m: ArrayView2<'_, f64>,
    domain: &SpaceSpec,
    codomain: &SpaceSpec,
    opts: &OpNormOptions,
) -> f64 {
    let ncols = m.ncols();
    let mut best = 0.0f64;
    let mut eval = |x: &[f64]| {
        let nx = domain.norm_coords(x, Side::Dual);
        if nx > 0.0 {
            let y: Vec<f64> = m
                .axis_iter(Axis(0))
                .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
                .collect();
            let v = codomain.norm_coords(&y, Side::Dual) / nx;
            if v > best {
                best = v;
            }
        }
    };
    // per-row norming vectors (exact achievers of single output coordinates)
    for row in m.axis_iter(Axis(0)) {
        let r: Vec<f64> = row.to_vec();
        if let Some(x) = norming_vector(&r, domain) {
            eval(&x);
        }
    }
    // dominant-sign vector: per column, the sign of the largest-magnitude entry
    let mut dom_sign = vec![1.0f64; ncols];
    for c in 0..ncols {
        let mut mag = 0.0;
        for r in 0..m.nrows() {
            let v = m[[r, c]];
            if v.abs() > mag {
                mag = v.abs();
                dom_sign[c] = if v >= 0.0 { 1.0 } else { -1.0 };
            }
        }
    }
    eval(&dom_sign);
    // seeded random directions
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    for _ in 0..opts.restarts {
        let x: Vec<f64> = (0..ncols).map(|_| rng.gen_range(-1.0..1.0)).collect();
        eval(&x);
        let s: Vec<f64> = x.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        eval(&s);
    }
    best
}

/// A unit vector of `space` (dual side) maximizing the pairing with `f`.
fn norming_vector(f: &[f64], space: &SpaceSpec) -> Option<Vec<f64>> {
    match &space.kind {
        SpaceKind::Lp { p, .. } => {
            let mut x = vec![0.0; f.len()];
            match p {
                Exp::Inf => {
                    for (xi, fi) in x.iter_mut().zip(f) {
                        *xi = if *fi >= 0.0 { 1.0 } else { -1.0 };
                    }
                }
                Exp::Finite(p) if *p == 1.0 => {
                    let (k, _) = f
                        .iter()
                        .enumerate()
                        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())?;
                    x[k] = if f[k] >= 0.0 { 1.0 } else { -1.0 };
                }
                Exp::Finite(p) => {
                    // |f_k|^{p'-1} sign(f_k), then normalize
                    let q = p / (p - 1.0);
                    for (xi, fi) in x.iter_mut().zip(f) {
                        *xi = fi.signum() * fi.abs().powf(q - 1.0);
                    }
                    let n = space.norm_coords(&x, Side::Dual);
                    if n > 0.0 {
                        for xi in x.iter_mut() {
                            *xi /= n;
                        }
                    }
                }
            }
            Some(x)
        }
        SpaceKind::LpSum {
            p_outer,
            outer_dim,
            inner,
        } => {
            let n = inner.total_dim();
            let mut parts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(*outer_dim);
            for i in 0..*outer_dim {
                let fi = &f[i * n..(i + 1) * n];
                let xi = norming_vector(fi, inner)?;
                let gain = crate::seqspace::dot(&xi, fi).abs();
                parts.push((xi, gain));
            }
            let gains: Vec<f64> = parts.iter().map(|(_, g)| *g).collect();
            let w = norming_vector(&gains, &SpaceSpec::lp_unchecked(*p_outer, *outer_dim))?;
            let mut x = vec![0.0; f.len()];
            for (i, (xi, _)) in parts.iter().enumerate() {
                for (k, v) in xi.iter().enumerate() {
                    x[i * n + k] = w[i] * v;
                }
            }
            Some(x)
        }
    }
}

/// Largest singular value by power iteration on A^T A.
fn sigma_max(m: ArrayView2<'_, f64>, opts: &OpNormOptions) -> f64 {
    let n = m.ncols();
    if n == 0 {
        return 0.0;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0x5157);
    let mut best = 0.0f64;
    for restart in 0..opts.restarts.max(1) {
        let mut x: Vec<f64> = if restart == 0 {
            vec![1.0; n]
        } else {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        normalize_l2(&mut x);
        let mut prev = 0.0;
        for _ in 0..10_000 {
            let y: Vec<f64> = m
                .axis_iter(Axis(0))
                .map(|row| row.iter().zip(&x).map(|(a, b)| a * b).sum())
                .collect();
            // x <- A^T y
            let mut xt = vec![0.0; n];
            for (r, row) in m.axis_iter(Axis(0)).enumerate() {
                let yr = y[r];
                if yr != 0.0 {
                    for (c, a) in row.iter().enumerate() {
                        xt[c] += a * yr;
                    }
                }
            }
            let lambda = normalize_l2(&mut xt);
            x = xt;
            let sigma = lambda.sqrt();
            if (sigma - prev).abs() <= opts.tol * sigma.max(1e-300) {
                prev = sigma;
                break;
            }
            prev = sigma;
        }
        best = best.max(prev);
    }
    best
}

fn normalize_l2(x: &mut [f64]) -> f64 {
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n > 0.0 {
        for v in x.iter_mut() {
            *v /= n;
        }
    }
    n
}

/// sup over the unit ball of the dual space of |<phi, P_A x*>|: the predual
/// norm of phi restricted to the (1-based) index set A.  Exact.
pub fn restricted_predual_norm(
    phi: &VecRep,
    a: &BTreeSet<usize>,
    space: &SpaceSpec,
) -> Result<f64, SpaceError> {
    let dim = space.total_dim();
    if phi.coords.len() != dim {
        return Err(SpaceError::DimensionMismatch {
            got: phi.coords.len(),
            want: dim,
        });
    }
    for &k in a {
        if k == 0 || k > dim {
            return Err(SpaceError::IndexOutOfRange(k, dim));
        }
    }
    let mut r = vec![0.0; dim];
    for &k in a {
        r[k - 1] = phi.coords[k - 1];
    }
    Ok(space.norm_coords(&r, Side::Predual))
}

// --- matrix text format: first line "rows cols", then row-major decimals ---

pub fn matrix_to_text(m: &Array2<f64>) -> String {
    let mut s = String::new();
    let (rows, cols) = m.dim();
    let _ = writeln!(s, "{rows} {cols}");
    for row in m.axis_iter(Axis(0)) {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    s
}

pub fn matrix_from_text(text: &str) -> Result<Array2<f64>, OpError> {
    let mut tokens = text.split_whitespace();
    let rows: usize = tokens
        .next()
        .ok_or_else(|| OpError::Parse("empty input".into()))?
        .parse()
        .map_err(|e| OpError::Parse(format!("bad row count: {e}")))?;
    let cols: usize = tokens
        .next()
        .ok_or_else(|| OpError::Parse("missing column count".into()))?
        .parse()
        .map_err(|e| OpError::Parse(format!("bad column count: {e}")))?;
    let mut data = Vec::with_capacity(rows * cols);
    for t in tokens {
        let v: f64 = t
            .parse()
            .map_err(|e| OpError::Parse(format!("bad entry {t:?}: {e}")))?;
        data.push(v);
    }
    if data.len() != rows * cols {
        return Err(OpError::Parse(format!(
            "expected {} entries, got {}",
            rows * cols,
            data.len()
        )));
    }
    Array2::from_shape_vec((rows, cols), data).map_err(|e| OpError::Parse(e.to_string()))
}

pub fn matrix_from_file(path: &Path) -> Result<Array2<f64>, OpError> {
    let text = std::fs::read_to_string(path)?;
    matrix_from_text(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqspace::Exp;
    use ndarray::array;

    fn lp(p: Exp, dim: usize) -> SpaceSpec {
        SpaceSpec::lp(p, dim).unwrap()
    }

    #[test]
    fn identity_norm_is_one() {
        for p in [Exp::ONE, Exp::TWO, Exp::Finite(3.0), Exp::Inf] {
            let s = lp(p, 4);
            let id = OperatorRep::identity(s);
            let e = op_norm(&id);
            assert!((e.lower - 1.0).abs() < 1e-9 && (e.upper - 1.0).abs() < 1e-9, "{e:?}");
        }
    }

    #[test]
    fn diag_on_linf_is_max_entry() {
        let s = lp(Exp::Inf, 2);
        let a = OperatorRep::new(array![[3.0, 0.0], [0.0, 1.0]], s.clone(), s).unwrap();
        let e = op_norm(&a);
        assert!(e.exact);
        assert_eq!(e.upper, 3.0);
    }

    #[test]
    fn all_ones_on_l1_is_max_column_sum() {
        let s = lp(Exp::ONE, 2);
        let a = OperatorRep::new(array![[1.0, 1.0], [1.0, 1.0]], s.clone(), s).unwrap();
        let e = op_norm(&a);
        assert!(e.exact);
        assert_eq!(e.upper, 2.0);
    }

    #[test]
    fn l2_norm_is_sigma_max() {
        let s = lp(Exp::TWO, 2);
        let a = OperatorRep::new(array![[3.0, 0.0], [4.0, 0.0]], s.clone(), s).unwrap();
        let e = op_norm(&a);
        assert!((e.upper - 5.0).abs() < 1e-8, "{e:?}");
    }

    #[test]
    fn projection_matrix_has_norm_one() {
        for p in [Exp::ONE, Exp::TWO, Exp::Finite(4.0), Exp::Inf] {
            let s = lp(p, 5);
            let mut m = Array2::zeros((5, 5));
            for k in [0usize, 2, 4] {
                m[[k, k]] = 1.0;
            }
            let a = OperatorRep::new(m, s.clone(), s).unwrap();
            let e = op_norm(&a);
            assert!(e.lower <= 1.0 + 1e-9 && e.upper >= 1.0 - 1e-9, "{e:?}");
            assert!(e.upper <= 1.0 + 1e-9, "{e:?}");
        }
    }

    #[test]
    fn mixed_l1_linf_block_reduction() {
        // l^1(l^inf_2) with 2 rows; operator mapping each row atom to a
        // disjointly supported +/- pattern has norm exactly 1.
        let inner = SpaceSpec::linf(2).unwrap();
        let s = SpaceSpec::lp_sum(Exp::ONE, 2, inner).unwrap();
        let m = array![
            [1.0, 0.0, 0.0, 0.0],
            [-1.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 0.0],
            [0.0, 0.0, -1.0, 0.0],
        ];
        let a = OperatorRep::new(m, s.clone(), s).unwrap();
        let e = op_norm(&a);
        assert!(e.exact, "{e:?}");
        assert!((e.upper - 1.0).abs() < 1e-12);
    }

    #[test]
    fn bracket_contains_brute_force() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for p in [Exp::ONE, Exp::Finite(1.5), Exp::TWO, Exp::Finite(3.0), Exp::Inf] {
            let s = lp(p, 4);
            let m = Array2::from_shape_fn((4, 4), |_| rng.gen_range(-2.0..2.0));
            let a = OperatorRep::new(m, s.clone(), s.clone()).unwrap();
            let e = op_norm(&a);
            let brute = crate::oracle::brute_op_norm_lower(&a, 100_000, 99);
            // random sampling can undershoot the certified lower bound a
            // little, but must never exceed the certified upper bound
            assert!(
                brute >= e.lower * (1.0 - 1e-3) - 1e-9 && brute <= e.upper + 1e-9,
                "p={p}, est={e:?}, brute={brute}"
            );
        }
    }

    #[test]
    fn submultiplicative_upper() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let s = lp(Exp::Finite(3.0), 4);
        for _ in 0..20 {
            let a = OperatorRep::new(
                Array2::from_shape_fn((4, 4), |_| rng.gen_range(-1.0..1.0)),
                s.clone(),
                s.clone(),
            )
            .unwrap();
            let b = OperatorRep::new(
                Array2::from_shape_fn((4, 4), |_| rng.gen_range(-1.0..1.0)),
                s.clone(),
                s.clone(),
            )
            .unwrap();
            let ab = a.compose(&b).unwrap();
            assert!(op_norm(&ab).upper <= op_norm(&a).upper * op_norm(&b).upper + 1e-9);
        }
    }

    #[test]
    fn restricted_predual_examples() {
        let linf4 = SpaceSpec::linf(4).unwrap();
        let phi = VecRep::new(vec![1.0, 0.5, 0.02, 0.03], linf4.clone(), Side::Dual).unwrap();
        let a: BTreeSet<usize> = [3, 4].into_iter().collect();
        let v = restricted_predual_norm(&phi, &a, &linf4).unwrap();
        assert!((v - 0.05).abs() < 1e-12);
        assert_eq!(restricted_predual_norm(&phi, &BTreeSet::new(), &linf4).unwrap(), 0.0);

        let l2 = SpaceSpec::lp(Exp::TWO, 3).unwrap();
        let phi = VecRep::new(vec![0.0, 3.0, 4.0], l2.clone(), Side::Dual).unwrap();
        let a: BTreeSet<usize> = [2, 3].into_iter().collect();
        assert!((restricted_predual_norm(&phi, &a, &l2).unwrap() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn restricted_predual_monotone_in_a() {
        let linf = SpaceSpec::linf(10).unwrap();
        let phi = VecRep::new(
            (0..10).map(|k| ((k * 37 % 11) as f64 - 5.0) / 7.0).collect(),
            linf.clone(),
            Side::Dual,
        )
        .unwrap();
        for bits in 0u32..1024 {
            let a: BTreeSet<usize> = (0..10).filter(|k| bits >> k & 1 == 1).map(|k| k + 1).collect();
            let va = restricted_predual_norm(&phi, &a, &linf).unwrap();
            for add in 1..=10usize {
                if !a.contains(&add) {
                    let mut b = a.clone();
                    b.insert(add);
                    let vb = restricted_predual_norm(&phi, &b, &linf).unwrap();
                    assert!(vb >= va - 1e-15);
                }
            }
        }
    }

    #[test]
    fn matrix_text_roundtrip() {
        let m = array![[1.0, -2.5], [0.25, 1e-9], [3.0, 4.0]];
        let s = matrix_to_text(&m);
        let back = matrix_from_text(&s).unwrap();
        assert_eq!(m, back);
        assert!(matrix_from_text("2 2 1 2 3").is_err());
    }
}
