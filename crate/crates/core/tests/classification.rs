//! Cohort-level classification checks on planted synthetic data.
//!
//! The generator plants a class contrast by giving the two groups
//! different total flows; the full encode-and-classify stack must detect
//! it, stay near chance when the contrast is absent, and behave
//! deterministically.

use fundusflow::bohf::BohfModel;
use fundusflow::kmeans::KMeansConfig;
use fundusflow::loocv::{loocv, CvConfig};
use fundusflow::synth::{generate_cohort, SynthCohort, SynthSpec};

/// Reduced search grid so the whole suite stays fast on one core; the
/// contracts under test do not depend on grid size.
fn fast_cfg(seed: u64) -> CvConfig<f64> {
    CvConfig {
        k_grid: vec![2, 4],
        lambda_grid: vec![1e-2, 1.0, 1e2],
        kmeans: KMeansConfig {
            restarts: 6,
            max_iter: 120,
        },
        seed,
        n_permutations: 0,
    }
}

fn planted_cohort(n_per_class: usize, depth: usize, qt: [f64; 2], seed: u64) -> SynthCohort<f64> {
    let base = SynthSpec::new(depth);
    generate_cohort(n_per_class, qt, &base, seed).expect("cohort generation")
}

#[test]
fn planted_flow_contrast_is_detected() {
    let cohort = planted_cohort(10, 4, [30.0, 80.0], 2024);
    let report = loocv(&cohort.features, &cohort.labels, &fast_cfg(7)).expect("loocv");
    assert!(
        report.auc >= 0.9,
        "planted contrast missed: AUC = {}",
        report.auc
    );
    assert!(
        report.accuracy >= 0.9,
        "planted contrast missed: accuracy = {}",
        report.accuracy
    );
    assert_eq!(report.folds.len(), 20);
}

#[test]
fn indistinguishable_classes_score_near_chance() {
    let cohort = planted_cohort(8, 3, [45.6, 45.6], 99);
    let report = loocv(&cohort.features, &cohort.labels, &fast_cfg(3)).expect("loocv");
    assert!(
        report.auc > 0.1 && report.auc < 0.9,
        "identical classes should not separate cleanly: AUC = {}",
        report.auc
    );
}

#[test]
fn permutation_aucs_straddle_chance_while_real_auc_leads() {
    let cohort = planted_cohort(6, 3, [30.0, 80.0], 41);
    let mut cfg = fast_cfg(5);
    cfg.n_permutations = 10;
    let report = loocv(&cohort.features, &cohort.labels, &cfg).expect("loocv");

    assert_eq!(report.permutation_aucs.len(), 10);
    let mean = report.permutation_mean().unwrap();
    assert!(
        (0.25..=0.75).contains(&mean),
        "permutation mean AUC = {mean}"
    );
    assert!(report.auc >= 0.9, "real AUC = {}", report.auc);
    let p = report.permutation_p().unwrap();
    assert!(p <= 0.5, "permutation p-value = {p}");
}

#[test]
fn loocv_is_deterministic_across_runs() {
    let cohort = planted_cohort(5, 3, [30.0, 80.0], 10);
    let cfg = fast_cfg(11);
    let a = loocv(&cohort.features, &cohort.labels, &cfg).expect("first run");
    let b = loocv(&cohort.features, &cohort.labels, &cfg).expect("second run");
    assert_eq!(a.auc, b.auc);
    assert_eq!(a.accuracy, b.accuracy);
    for (fa, fb) in a.folds.iter().zip(&b.folds) {
        assert_eq!(fa.score, fb.score);
        assert_eq!(fa.k_per_class, fb.k_per_class);
        assert_eq!(fa.lambda, fb.lambda);
        assert_eq!(fa.model.classifier.beta, fb.model.classifier.beta);
    }
}

/// Swapping two codewords of one class while permuting the classifier
/// weights (and the histogram standardization) the same way must leave
/// every subject's score unchanged.
#[test]
fn scores_are_invariant_under_consistent_code_permutation() {
    let cohort = planted_cohort(6, 2, [30.0, 80.0], 123);
    let kcfg = KMeansConfig {
        restarts: 6,
        max_iter: 120,
    };
    let model = BohfModel::fit(&cohort.features, &cohort.labels, 2, 1.0, &kcfg, 77).expect("fit");

    // Swap codes 0 and 1 (both belong to class -1) and apply the same swap
    // to every code-indexed quantity.
    let mut permuted = model.clone();
    permuted.codebook.codes.swap(0, 1);
    permuted.code_mean.swap(0, 1);
    permuted.code_std.swap(0, 1);
    permuted.classifier.beta.swap(0, 1);

    for fs in &cohort.features {
        let a = model.score(fs);
        let b = permuted.score(fs);
        let scale = a.abs().max(1e-12);
        assert!(
            (a - b).abs() / scale <= 1e-12,
            "score changed under code permutation: {a} vs {b}"
        );
        assert_eq!(model.predict(fs), permuted.predict(fs));
    }
}

#[test]
fn class_contrast_shows_in_the_encoded_histograms() {
    // With distinct flows the two classes occupy different regions of
    // feature space, so each subject's histogram should lean toward its
    // own class's half of the codebook.
    let cohort = planted_cohort(8, 3, [30.0, 80.0], 7);
    let kcfg = KMeansConfig {
        restarts: 6,
        max_iter: 120,
    };
    let model = BohfModel::fit(&cohort.features, &cohort.labels, 3, 1.0, &kcfg, 19).expect("fit");
    let k = model.codebook.k_per_class;

    let mut correct_side = 0usize;
    for (fs, &label) in cohort.features.iter().zip(&cohort.labels) {
        let counts = fundusflow::bohf::encode(&model.codebook, fs);
        let low: f64 = counts[..k].iter().sum();
        let high: f64 = counts[k..].iter().sum();
        let leans_negative = low >= high;
        if (label == -1) == leans_negative {
            correct_side += 1;
        }
    }
    assert!(
        correct_side >= 14,
        "only {correct_side}/16 subjects lean toward their own class codes"
    );
}
