//! Operator generators behind a name-keyed registry.
//!
//! Each generator is a trait object looked up by the `name` field of the
//! config, so new operator families can be added without touching the
//! driver.  Everything is deterministic in (space, params, seed).

use ndarray::Array2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::config::GeneratorConfig;
use crate::opnorm::{matrix_from_file, op_norm, OpError, OperatorRep};
use crate::seqspace::SpaceSpec;

#[derive(Debug, Error)]
pub enum GeneratorError {
    #[error("unknown generator {0:?}")]
    Unknown(String),
    #[error("generator {name} requires parameter {param}")]
    MissingParam {
        name: &'static str,
        param: &'static str,
    },
    #[error("generator {name}: {reason}")]
    BadParam { name: &'static str, reason: String },
    #[error("could not build a rank-{k} projection with condition <= {cap} in {tries} attempts")]
    ConditionCap { k: usize, cap: f64, tries: usize },
    #[error(transparent)]
    Op(#[from] OpError),
}

pub trait OperatorGenerator: Sync {
    fn name(&self) -> &'static str;
    fn generate(
        &self,
        space: &SpaceSpec,
        params: &GeneratorConfig,
        seed: u64,
    ) -> Result<OperatorRep, GeneratorError>;
}

struct Identity;
struct Zero;
struct CoordinateProjection;
struct RandomRankKProjection;
struct ScaledIdentity;
struct RandomContraction;
struct FromFile;

impl OperatorGenerator for Identity {
    fn name(&self) -> &'static str {
        "identity"
    }
    fn generate(
        &self,
        space: &SpaceSpec,
        _params: &GeneratorConfig,
        _seed: u64,
    ) -> Result<OperatorRep, GeneratorError> {
        Ok(OperatorRep::identity(space.clone()))
    }
}

impl OperatorGenerator for Zero {
    fn name(&self) -> &'static str {
        "zero"
    }
    fn generate(
        &self,
        space: &SpaceSpec,
        _params: &GeneratorConfig,
        _seed: u64,
    ) -> Result<OperatorRep, GeneratorError> {
        Ok(OperatorRep::zero(space.clone()))
    }
}

impl OperatorGenerator for CoordinateProjection {
    fn name(&self) -> &'static str {
        "coordinate_projection"
    }
    fn generate(
        &self,
        space: &SpaceSpec,
        params: &GeneratorConfig,
        seed: u64,
    ) -> Result<OperatorRep, GeneratorError> {
        let density = params.density.ok_or(GeneratorError::MissingParam {
            name: "coordinate_projection",
            param: "density",
        })?;
        if !(0.0..=1.0).contains(&density) {
            return Err(GeneratorError::BadParam {
                name: "coordinate_projection",
                reason: format!("density {density} not in [0, 1]"),
            });
        }
        let n = space.total_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Array2::zeros((n, n));
        for k in 0..n {
            if rng.gen_range(0.0..1.0) < density {
                m[[k, k]] = 1.0;
            }
        }
        Ok(OperatorRep::new(m, space.clone(), space.clone())?)
    }
}

impl OperatorGenerator for RandomRankKProjection {
    fn name(&self) -> &'static str {
        "random_rank_k_projection"
    }
    fn generate(
        &self,
        space: &SpaceSpec,
        params: &GeneratorConfig,
        seed: u64,
    ) -> Result<OperatorRep, GeneratorError> {
        let k = params.k.ok_or(GeneratorError::MissingParam {
            name: "random_rank_k_projection",
            param: "k",
        })?;
        let n = space.total_dim();
        if k == 0 || k > n {
            return Err(GeneratorError::BadParam {
                name: "random_rank_k_projection",
                reason: format!("rank {k} not in 1..={n}"),
            });
        }
        const COND_CAP: f64 = 1e3;
        const TRIES: usize = 64;
        for attempt in 0..TRIES {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(attempt as u64));
            let x = Array2::from_shape_fn((n, k), |_| rng.gen_range(-1.0..1.0));
            let y = Array2::from_shape_fn((n, k), |_| rng.gen_range(-1.0..1.0));
            // oblique projection X (Y^T X)^{-1} Y^T; accept when Y^T X is
            // well conditioned so the projection stays numerically exact
            let core = y.t().dot(&x);
            if let Some(cond) = condition_estimate(&core) {
                if cond <= COND_CAP {
                    let inv = invert_small(&core).expect("well-conditioned core");
                    let m = x.dot(&inv).dot(&y.t());
                    return Ok(OperatorRep::new(m, space.clone(), space.clone())?);
                }
            }
        }
        Err(GeneratorError::ConditionCap {
            k,
            cap: COND_CAP,
            tries: TRIES,
        })
    }
}

impl OperatorGenerator for ScaledIdentity {
    fn name(&self) -> &'static str {
        "scaled_identity"
    }
    fn generate(
        &self,
        space: &SpaceSpec,
        params: &GeneratorConfig,
        _seed: u64,
    ) -> Result<OperatorRep, GeneratorError> {
        let c = params.c.ok_or(GeneratorError::MissingParam {
            name: "scaled_identity",
            param: "c",
        })?;
        let mut op = OperatorRep::identity(space.clone());
        op.matrix *= c;
        Ok(op)
    }
}

impl OperatorGenerator for RandomContraction {
    fn name(&self) -> &'static str {
        "random_contraction"
    }
    fn generate(
        &self,
        space: &SpaceSpec,
        params: &GeneratorConfig,
        seed: u64,
    ) -> Result<OperatorRep, GeneratorError> {
        let cap = params.norm_cap.unwrap_or(1.0);
        if cap <= 0.0 {
            return Err(GeneratorError::BadParam {
                name: "random_contraction",
                reason: format!("norm_cap {cap} must be positive"),
            });
        }
        let n = space.total_dim();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = Array2::from_shape_fn((n, n), |_| rng.gen_range(-1.0..1.0));
        let mut op = OperatorRep::new(m, space.clone(), space.clone())?;
        let upper = op_norm(&op).upper;
        if upper > 0.0 {
            op.matrix *= cap / upper;
        }
        Ok(op)
    }
}

impl OperatorGenerator for FromFile {
    fn name(&self) -> &'static str {
        "from_file"
    }
    fn generate(
        &self,
        space: &SpaceSpec,
        params: &GeneratorConfig,
        _seed: u64,
    ) -> Result<OperatorRep, GeneratorError> {
        let path = params.path.as_ref().ok_or(GeneratorError::MissingParam {
            name: "from_file",
            param: "path",
        })?;
        let m = matrix_from_file(std::path::Path::new(path))?;
        Ok(OperatorRep::new(m, space.clone(), space.clone())?)
    }
}

static REGISTRY: &[&dyn OperatorGenerator] = &[
    &Identity,
    &Zero,
    &CoordinateProjection,
    &RandomRankKProjection,
    &ScaledIdentity,
    &RandomContraction,
    &FromFile,
];

pub fn lookup(name: &str) -> Option<&'static dyn OperatorGenerator> {
    REGISTRY.iter().copied().find(|g| g.name() == name)
}

pub fn generator_names() -> Vec<&'static str> {
    REGISTRY.iter().map(|g| g.name()).collect()
}

pub fn generate_operator(
    space: &SpaceSpec,
    params: &GeneratorConfig,
    seed: u64,
) -> Result<OperatorRep, GeneratorError> {
    lookup(&params.name)
        .ok_or_else(|| GeneratorError::Unknown(params.name.clone()))?
        .generate(space, params, seed)
}

fn invert_small(a: &Array2<f64>) -> Option<Array2<f64>> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut inv = Array2::eye(n);
    for col in 0..n {
        let (piv, mag) = (col..n)
            .map(|r| (r, m[[r, col]].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if mag < 1e-300 {
            return None;
        }
        if piv != col {
            for kk in 0..n {
                m.swap([piv, kk], [col, kk]);
                inv.swap([piv, kk], [col, kk]);
            }
        }
        let p = m[[col, col]];
        for kk in 0..n {
            m[[col, kk]] /= p;
            inv[[col, kk]] /= p;
        }
        for r in 0..n {
            if r != col {
                let f = m[[r, col]];
                if f != 0.0 {
                    for kk in 0..n {
                        m[[r, kk]] -= f * m[[col, kk]];
                        inv[[r, kk]] -= f * inv[[col, kk]];
                    }
                }
            }
        }
    }
    Some(inv)
}

/// Spectral condition estimate sigma_max(A) * sigma_max(A^{-1}).
fn condition_estimate(a: &Array2<f64>) -> Option<f64> {
    let inv = invert_small(a)?;
    let s = |m: &Array2<f64>| {
        m.iter().map(|v| v * v).sum::<f64>().sqrt() // Frobenius upper bound
    };
    Some(s(a) * s(&inv))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seqspace::Exp;

    fn linf(dim: usize) -> SpaceSpec {
        SpaceSpec::linf(dim).unwrap()
    }

    fn params(name: &str) -> GeneratorConfig {
        GeneratorConfig {
            name: name.into(),
            ..Default::default()
        }
    }

    #[test]
    fn registry_knows_all_names() {
        for name in [
            "identity",
            "zero",
            "coordinate_projection",
            "random_rank_k_projection",
            "scaled_identity",
            "random_contraction",
            "from_file",
        ] {
            assert!(lookup(name).is_some(), "{name}");
        }
        assert!(lookup("banana").is_none());
        assert_eq!(generator_names().len(), 7);
    }

    #[test]
    fn identity_and_density_one_projection() {
        let s = linf(8);
        let id = generate_operator(&s, &params("identity"), 0).unwrap();
        let mut p = params("coordinate_projection");
        p.density = Some(1.0);
        let proj = generate_operator(&s, &p, 0).unwrap();
        assert_eq!(id.matrix, proj.matrix);
    }

    #[test]
    fn determinism_bit_for_bit() {
        let s = linf(16);
        let mut p = params("coordinate_projection");
        p.density = Some(0.5);
        let a = generate_operator(&s, &p, 42).unwrap();
        let b = generate_operator(&s, &p, 42).unwrap();
        assert_eq!(a.matrix, b.matrix);
        let c = generate_operator(&s, &p, 43).unwrap();
        assert_ne!(a.matrix, c.matrix);

        let mut rc = params("random_contraction");
        rc.norm_cap = Some(0.5);
        let a = generate_operator(&s, &rc, 7).unwrap();
        let b = generate_operator(&s, &rc, 7).unwrap();
        assert_eq!(a.matrix, b.matrix);
    }

    #[test]
    fn rank_k_projection_is_idempotent() {
        let s = SpaceSpec::lp(Exp::TWO, 12).unwrap();
        let mut p = params("random_rank_k_projection");
        p.k = Some(3);
        let proj = generate_operator(&s, &p, 5).unwrap();
        let sq = proj.compose(&proj).unwrap();
        let dev = (&sq.matrix - &proj.matrix)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(dev < 1e-9, "projection defect {dev}");
    }

    #[test]
    fn contraction_respects_cap() {
        let s = linf(10);
        let mut p = params("random_contraction");
        p.norm_cap = Some(0.25);
        let op = generate_operator(&s, &p, 1).unwrap();
        assert!(op_norm(&op).upper <= 0.25 + 1e-12);
    }

    #[test]
    fn scaled_identity_and_missing_params() {
        let s = linf(4);
        let mut p = params("scaled_identity");
        p.c = Some(0.5);
        let op = generate_operator(&s, &p, 0).unwrap();
        assert_eq!(op.matrix[[0, 0]], 0.5);
        assert!(matches!(
            generate_operator(&s, &params("scaled_identity"), 0),
            Err(GeneratorError::MissingParam { .. })
        ));
        assert!(matches!(
            generate_operator(&s, &params("nope"), 0),
            Err(GeneratorError::Unknown(_))
        ));
    }

    #[test]
    fn from_file_roundtrip() {
        use crate::opnorm::matrix_to_text;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.txt");
        let s = linf(3);
        let m = ndarray::array![[1.0, 0.0, 2.0], [0.0, -1.0, 0.0], [0.5, 0.0, 0.25]];
        std::fs::write(&path, matrix_to_text(&m)).unwrap();
        let mut p = params("from_file");
        p.path = Some(path.to_string_lossy().into_owned());
        let op = generate_operator(&s, &p, 0).unwrap();
        assert_eq!(op.matrix, m);
    }
}
