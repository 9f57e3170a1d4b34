use std::collections::BTreeSet;

use drbounds::collider_bounds::{estimate_bounds, DEFAULT_MAX_SUBSETS};
use drbounds::data::Dataset;
use drbounds::estimators::{estimate, EstimatorConfig, Method};
use drbounds::learners::LearnerSpec;
use drbounds::simlab::{generate, DgpSpec, LinearGaussian};

fn cfg() -> EstimatorConfig {
    EstimatorConfig { outcome_learner: LearnerSpec::Linear, ..Default::default() }
}

fn data(noise: usize, n: usize, seed: u64) -> Dataset {
    let spec = DgpSpec::LinearGaussian(LinearGaussian {
        tau: 1.0,
        outcome_coefs: vec![1.0, -0.5],
        treatment_coefs: vec![0.6, 0.3],
        outcome_intercept: 0.0,
        treatment_intercept: 0.0,
        noise_sd: 1.0,
        noise_columns: noise,
    });
    generate(&spec, n, seed).unwrap().0
}

#[test]
fn full_adjustment_lies_within_the_range() {
    let ds = data(1, 600, 1);
    let res = estimate_bounds(&ds, 2, &cfg(), &BTreeSet::new(), DEFAULT_MAX_SUBSETS, None).unwrap();
    assert_eq!(res.entries.len(), 7);
    let full = res.entry(&[]).unwrap().estimate.point;
    assert!(res.point_bounds[0] <= full && full <= res.point_bounds[1]);
    assert!(res.outer_ci[0] <= res.point_bounds[0] && res.point_bounds[1] <= res.outer_ci[1]);
    assert_eq!(res.entry(res.argmin.excluded()).unwrap().estimate.point, res.point_bounds[0]);
    assert_eq!(res.entry(res.argmax.excluded()).unwrap().estimate.point, res.point_bounds[1]);
}

#[test]
fn zero_cap_is_a_single_full_adjustment() {
    let ds = data(0, 300, 2);
    let res = estimate_bounds(&ds, 0, &cfg(), &BTreeSet::new(), DEFAULT_MAX_SUBSETS, None).unwrap();
    assert_eq!(res.entries.len(), 1);
    assert_eq!(res.point_bounds[0], res.point_bounds[1]);
    assert_eq!(res.point_bounds[0], estimate(&ds, &cfg(), None).unwrap().point);
}

#[test]
fn full_cap_includes_the_unadjusted_contrast() {
    let ds = data(0, 400, 3);
    let res = estimate_bounds(&ds, 2, &cfg(), &BTreeSet::new(), DEFAULT_MAX_SUBSETS, None).unwrap();
    let none = res.entry(&[0, 1]).unwrap();
    assert!(none.estimate.point.is_finite());
    assert_eq!(none.excluded_names, ["x1", "x2"]);
}

#[test]
fn known_non_colliders_never_widen_the_range() {
    let ds = data(1, 500, 4);
    let wide = estimate_bounds(&ds, 1, &cfg(), &BTreeSet::new(), DEFAULT_MAX_SUBSETS, None).unwrap();
    let narrow = estimate_bounds(&ds, 1, &cfg(), &BTreeSet::from([1]), DEFAULT_MAX_SUBSETS, None).unwrap();
    assert_eq!(narrow.entries.len(), 3);
    for e in &narrow.entries {
        assert_eq!(wide.entry(e.excluded.excluded()).unwrap(), e);
    }
    assert!(wide.point_bounds[0] <= narrow.point_bounds[0] && narrow.point_bounds[1] <= wide.point_bounds[1]);
}

#[test]
fn results_do_not_depend_on_thread_count() {
    let ds = data(1, 400, 5);
    let c = EstimatorConfig { method: Method::Plugin, bootstrap_replicates: 20, ..cfg() };
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_bounds(&ds, 2, &c, &BTreeSet::new(), DEFAULT_MAX_SUBSETS, None).unwrap())
    };
    let (a, b) = (run(1), run(4));
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
}

#[test]
fn noise_covariate_leaves_the_target_unchanged() {
    // d = 1 with a pure-noise covariate: both entries estimate the same β
    let reps = 60;
    let mut diffs = Vec::new();
    for r in 0..reps {
        let spec = DgpSpec::LinearGaussian(LinearGaussian {
            tau: 1.0,
            outcome_coefs: vec![],
            treatment_coefs: vec![],
            outcome_intercept: 0.0,
            treatment_intercept: 0.0,
            noise_sd: 1.0,
            noise_columns: 1,
        });
        let ds = generate(&spec, 400, 100 + r).unwrap().0;
        let res = estimate_bounds(&ds, 1, &cfg(), &BTreeSet::new(), DEFAULT_MAX_SUBSETS, None).unwrap();
        diffs.push(res.entry(&[]).unwrap().estimate.point - res.entry(&[0]).unwrap().estimate.point);
    }
    let m = diffs.iter().sum::<f64>() / reps as f64;
    let sd = (diffs.iter().map(|d| (d - m).powi(2)).sum::<f64>() / (reps - 1) as f64).sqrt();
    assert!(m.abs() <= 3.0 * sd / (reps as f64).sqrt(), "mean diff {m}, sd {sd}");
}

#[test]
fn subset_errors_name_the_subset() {
    let ds = data(0, 30, 6);
    let oracle = LearnerSpec::Oracle { rate: 0.0, amplitude: 0.0, seed: 0 };
    let bad = EstimatorConfig { outcome_learner: oracle, ..cfg() };
    let err = estimate_bounds(&ds, 1, &bad, &BTreeSet::new(), DEFAULT_MAX_SUBSETS, None).unwrap_err();
    assert!(err.to_string().contains("subset excluding"), "{err}");
}
