mod common;

use embpred_core::ingest::generate_synthetic;
use embpred_core::preprocess::{
    keep_first_encounter, run_pipeline, transform_and_standardize, CatSpec, ContSpec, EncodedMatrix, FoldPlan,
    Standardizer,
};
use embpred_core::schema::DatasetSchema;
use proptest::prelude::*;

#[test]
fn standardized_synthetic_columns_have_zero_mean_unit_std() {
    let (mean, std, _) = common::prep::standardization(3000, 21);
    assert!(mean < 1e-9, "|mean| = {mean:e}");
    assert!(std < 1e-6, "|std - 1| = {std:e}");
}

#[test]
fn dedup_keeps_first_encounter_per_patient() {
    for seed in 0..3 {
        let (before, after) = common::prep::dedup(2500, seed).unwrap();
        assert!(after < before, "synthetic data should contain repeat patients");
    }
}

#[test]
fn diabetes_filter_agrees_with_regex_on_fuzzed_codes() {
    let (codes, kept) = common::prep::diabetes_fuzz(10_000, 4).unwrap();
    assert_eq!(codes, 10_000);
    assert!(kept > 1000 && kept < 9000, "fuzz corpus is unbalanced: {kept}");
}

#[test]
fn dedup_is_idempotent() {
    let schema = DatasetSchema::uci_diabetes();
    let raw = generate_synthetic(&schema, 800, 0.112, 2).unwrap();
    let once = keep_first_encounter(&raw, &schema).unwrap();
    let twice = keep_first_encounter(&once, &schema).unwrap();
    assert_eq!(once.rows, twice.rows);
}

#[test]
fn pipeline_step_counts_never_grow() {
    let schema = DatasetSchema::uci_diabetes();
    let raw = generate_synthetic(&schema, 1500, 0.112, 8).unwrap();
    let p = run_pipeline(&raw, &schema).unwrap();
    assert_eq!(p.report.steps[0].rows_in, 1500);
    for s in &p.report.steps {
        assert!(s.rows_out <= s.rows_in, "{} grew", s.step);
    }
    for w in p.report.steps.windows(2) {
        assert_eq!(w[0].rows_out, w[1].rows_in);
    }
    assert_eq!(p.matrix.n_rows(), p.report.positives + p.report.negatives);
    assert!(p.matrix.cont.iter().all(|v| v.is_finite()));
    p.matrix.validate().unwrap();
}

fn matrix_strategy() -> impl Strategy<Value = EncodedMatrix> {
    (2usize..40, 1usize..5).prop_flat_map(|(n, k)| {
        (
            prop::collection::vec(prop_oneof![-1e3f64..1e3, Just(7.0)], n * k),
            prop::collection::vec(0u8..2, n),
            Just((n, k)),
        )
            .prop_map(|(cont, target, (n, k))| {
                let mut m = EncodedMatrix::empty(
                    vec![CatSpec {
                        name: "c".into(),
                        cardinality: 1,
                    }],
                    (0..k)
                        .map(|j| ContSpec {
                            name: format!("x{j}"),
                            log1p: false,
                        })
                        .collect(),
                );
                for r in 0..n {
                    m.push_row(&[0], &cont[r * k..(r + 1) * k], &vec![false; k], target[r]);
                }
                m
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn standardization_invariants_hold_for_random_columns(m in matrix_strategy()) {
        let (z, s) = transform_and_standardize(&m).unwrap();
        let (n, k) = (z.n_rows(), z.n_cont());
        for j in 0..k {
            let col: Vec<f64> = (0..n).map(|r| z.cont[r * k + j]).collect();
            let mean = col.iter().sum::<f64>() / n as f64;
            prop_assert!(mean.abs() < 1e-9, "mean {}", mean);
            if s.stats[j].std > 1e-12 {
                let std = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
                prop_assert!((std - 1.0).abs() < 1e-6, "std {}", std);
            }
        }
    }

    #[test]
    fn scaling_fits_on_training_rows_only(m in matrix_strategy(), seed in any::<u64>()) {
        prop_assume!(m.n_rows() >= 4);
        let plan = FoldPlan::new(m.n_rows(), 2, seed).unwrap();
        let train = plan.training_rows(0);
        let a = Standardizer::fit(&m, &train).unwrap();
        let mut changed = m.clone();
        for r in plan.validation_rows(0) {
            for v in &mut changed.cont[r * m.n_cont()..(r + 1) * m.n_cont()] {
                *v += 1e4;
            }
        }
        let b = Standardizer::fit(&changed, &train).unwrap();
        prop_assert_eq!(a.stats, b.stats);
    }

    #[test]
    fn stratified_folds_partition_and_balance(targets in prop::collection::vec(0u8..2, 12..200), k in 2usize..7, seed in any::<u64>()) {
        let plan = FoldPlan::stratified(&targets, k, seed).unwrap();
        let mut seen = vec![0; targets.len()];
        for f in 0..k {
            for r in plan.validation_rows(f) {
                seen[r] += 1;
            }
            let mut all = plan.training_rows(f);
            all.extend(plan.validation_rows(f));
            prop_assert_eq!(all.len(), targets.len());
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for class in 0..2u8 {
            let per: Vec<usize> = (0..k)
                .map(|f| plan.validation_rows(f).iter().filter(|&&r| targets[r] == class).count())
                .collect();
            prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
        }
    }
}
