//! The pipeline driver: plan -> generate -> build blocks -> assemble ->
//! verify, with every failure captured in the report under its stage tag.

use std::time::Instant;

use thiserror::Error;

use super::config::{ConfigError, RunConfig, SCHEMA_VERSION};
use super::generators::generate_operator;
use super::report::{summarize, BatchSummary, BlockSummary, RunReport, StageFailure};
use crate::blocks::{build_blocks_1d_with, build_blocks_2d_with, plan_budget};
use crate::exact::{rat, rat_abs_sum};
use crate::factor::{assemble, BlockView, VerificationReport};
use crate::opnorm::OperatorRep;
use crate::seqspace::Side;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

fn fail(report: &mut RunReport, stage: &str, message: impl ToString) {
    report.failure = Some(StageFailure {
        stage: stage.to_string(),
        message: message.to_string(),
    });
    report.verdict = false;
}

/// Exact rational recheck of the past bounds: sum_{j<i} |<b_i, T b_j*>|
/// <= eta_i with every pairing and the sum evaluated in BigRational.
fn exact_past_recheck(
    view: &BlockView,
    t: &OperatorRep,
    etas: &[f64],
) -> bool {
    let images: Vec<Vec<f64>> = view
        .flats
        .iter()
        .map(|&(p0, p1)| {
            (0..t.matrix.nrows())
                .map(|r| t.matrix[[r, p0 - 1]] - t.matrix[[r, p1 - 1]])
                .collect()
        })
        .collect();
    view.flats.iter().enumerate().all(|(i, &(a0, a1))| {
        let sum: num_rational::BigRational = (0..i)
            .map(|j| {
                let v = &images[j];
                num_traits::Signed::abs(&(rat(v[a0 - 1]) - rat(v[a1 - 1])))
            })
            .sum();
        sum <= rat(etas[i])
    })
}

fn apply_tolerances(ver: &VerificationReport, cfg: &RunConfig) -> bool {
    let tol = cfg.tolerances;
    ver.residual_identity <= tol.residual
        && ver.neumann_defect.upper <= 1.0 / 3.0 + tol.norm_rel
        && ver.inverse_norm.upper <= 1.5 + tol.norm_rel
        && ver.crucial_identity_dev <= tol.crucial_identity
        && ver.bq_idempotence_dev <= tol.crucial_identity
        && ver
            .norm_bounds
            .iter()
            .all(|c| c.measured.upper <= c.bound * (1.0 + tol.norm_rel))
}

pub fn run(config: &RunConfig) -> RunReport {
    let started = Instant::now();
    let mut report = RunReport {
        schema_version: SCHEMA_VERSION,
        config: config.clone(),
        failure: None,
        blocks: None,
        verification: None,
        exact_recheck: None,
        verdict: false,
        wall_time_ms: 0,
    };
    macro_rules! stage {
        ($name:literal, $expr:expr) => {
            match $expr {
                Ok(v) => v,
                Err(e) => {
                    fail(&mut report, $name, e);
                    report.wall_time_ms = started.elapsed().as_millis();
                    return report;
                }
            }
        };
    }

    let space = stage!("space", config.space.to_space());
    stage!("plan", plan_budget(&space, config.target_blocks, None));
    let t = stage!(
        "generator",
        generate_operator(&space, &config.generator, config.seed)
    );

    let (view, summary, exact_future_ok) = if space.is_two_param() {
        let sys = stage!(
            "blocks",
            build_blocks_2d_with(&t, &space, config.target_blocks, config.strategy)
        );
        let view = stage!("blocks", BlockView::from_2d(&sys));
        let summary = BlockSummary {
            pairs: view.flats.clone(),
            rows: view.rows.clone(),
            etas: (1..=sys.blocks.len()).map(|k| sys.eta.eta(k)).collect(),
            past_achieved: sys.past_certs.iter().map(|c| c.achieved).collect(),
            future_achieved: sys
                .future_certs
                .iter()
                .map(|certs| {
                    certs
                        .values()
                        .map(|c| c.achieved)
                        .fold(0.0f64, f64::max)
                })
                .collect(),
        };
        let exact_ok = !config.exact
            || sys.future_certs.iter().enumerate().all(|(k, certs)| {
                certs.values().all(|c| {
                    let mass: Vec<f64> =
                        c.a_set.iter().map(|&j| c.phi[j - 1]).collect();
                    rat_abs_sum(&mass) <= rat(sys.eta.eta(k + 1))
                })
            });
        (view, summary, exact_ok)
    } else {
        let sys = stage!(
            "blocks",
            build_blocks_1d_with(&t, &space, config.target_blocks, config.strategy)
        );
        let view = BlockView::from_1d(&sys);
        let summary = BlockSummary {
            pairs: sys.pairs.clone(),
            rows: vec![1; sys.pairs.len()],
            etas: (1..=sys.pairs.len()).map(|i| sys.eta.eta(i)).collect(),
            past_achieved: sys.past_certs.iter().map(|c| c.achieved).collect(),
            future_achieved: sys.future_certs.iter().map(|c| c.achieved).collect(),
        };
        let exact_ok = !config.exact
            || (space.is_sup_norm(Side::Dual)
                && sys.future_certs.iter().enumerate().all(|(i, c)| {
                    let mass: Vec<f64> =
                        c.a_set.iter().map(|&j| c.phi[j - 1]).collect();
                    rat_abs_sum(&mass) <= rat(sys.eta.eta(i + 1))
                }));
        (view, summary, exact_ok)
    };
    report.blocks = Some(summary);

    let (_bundle, verification) = stage!(
        "assemble",
        assemble(&t, &view, config.min_retained)
    );
    let mut verdict = apply_tolerances(&verification, config);
    report.verification = Some(verification);

    if config.exact {
        let etas: Vec<f64> = (1..=view.flats.len())
            .map(|i| crate::blocks::EtaSchedule::new(space.k_u).eta(i))
            .collect();
        let exact_ok = exact_future_ok && exact_past_recheck(&view, &t, &etas);
        report.exact_recheck = Some(exact_ok);
        verdict = verdict && exact_ok;
    }
    report.verdict = verdict;
    report.wall_time_ms = started.elapsed().as_millis();
    report
}

/// Runs every config, continuing past failures; the summary is reduced in
/// config order.
pub fn batch(configs: &[RunConfig]) -> (Vec<RunReport>, BatchSummary) {
    let reports: Vec<RunReport> = configs.iter().map(run).collect();
    let summary = summarize(&reports);
    (reports, summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{GeneratorConfig, SpaceConfig, Tolerances};
    use crate::seqspace::Exp;

    fn base_config() -> RunConfig {
        RunConfig {
            schema_version: SCHEMA_VERSION,
            space: SpaceConfig::Lp {
                p: Exp::Inf,
                dim: 256,
            },
            generator: GeneratorConfig::default(),
            target_blocks: 8,
            min_retained: None,
            seed: 0,
            strategy: crate::annihilate::PastStrategy::BestPair,
            tolerances: Tolerances::default(),
            exact: false,
        }
    }

    #[test]
    fn identity_run_passes() {
        let report = run(&base_config());
        assert!(report.verdict, "{:?}", report.failure);
        let ver = report.verification.unwrap();
        assert!(ver.residual_identity <= 1e-9);
        let blocks = report.blocks.unwrap();
        assert_eq!(blocks.pairs.len(), 8);
    }

    #[test]
    fn too_many_blocks_fails_in_plan_stage() {
        let mut cfg = base_config();
        cfg.target_blocks = 100;
        let report = run(&cfg);
        assert!(!report.verdict);
        let f = report.failure.unwrap();
        assert_eq!(f.stage, "plan");
        assert!(f.message.contains("suffice"));
    }

    #[test]
    fn unknown_generator_fails_in_generator_stage() {
        let mut cfg = base_config();
        cfg.generator.name = "banana".into();
        let report = run(&cfg);
        assert_eq!(report.failure.unwrap().stage, "generator");
    }

    #[test]
    fn replay_is_byte_identical() {
        let mut cfg = base_config();
        cfg.generator = GeneratorConfig {
            name: "coordinate_projection".into(),
            density: Some(0.5),
            ..Default::default()
        };
        cfg.seed = 1234;
        let a = run(&cfg).to_json();
        let b = run(&cfg).to_json();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_recheck_passes_on_projection() {
        let mut cfg = base_config();
        cfg.generator = GeneratorConfig {
            name: "coordinate_projection".into(),
            density: Some(0.3),
            ..Default::default()
        };
        cfg.exact = true;
        let report = run(&cfg);
        assert!(report.verdict, "{:?}", report.failure);
        assert_eq!(report.exact_recheck, Some(true));
    }

    #[test]
    fn batch_continues_past_failures() {
        let good = base_config();
        let mut bad = base_config();
        bad.target_blocks = 100;
        let (reports, summary) = batch(&[good, bad.clone(), bad]);
        assert_eq!(reports.len(), 3);
        assert_eq!(summary.total, 3);
        assert_eq!(summary.passed, 1);
        assert_eq!(summary.failed_runs, vec![1, 2]);
        assert!(summary.worst_residual.unwrap() <= 1e-9);
    }

    #[test]
    fn two_param_run_passes() {
        let mut cfg = base_config();
        cfg.space = SpaceConfig::LpSum {
            p_outer: Exp::ONE,
            outer_dim: 4,
            inner_p: Exp::Inf,
            inner_dim: 64,
        };
        cfg.target_blocks = 6;
        let report = run(&cfg);
        assert!(report.verdict, "{:?}", report.failure);
    }
}
