//! Leave-one-out cross-validated evaluation of the BoHF classifier.
//!
//! Every subject is scored once by a model that never saw it: for each
//! fold, the held-out subject is removed, hyperparameters `(k, lambda)` are
//! chosen on a stratified 25% validation split of the remaining subjects
//! (scanning `k` then `lambda` in ascending order; only a strictly better
//! validation accuracy replaces the incumbent), the model is refitted on
//! the full remainder with the winning pair, and the held-out subject is
//! scored. Significance comes from label permutations: the whole procedure
//! is re-run on shuffled labels to estimate the null AUC distribution.
//!
//! Randomness is scoped per fold and per permutation through
//! [`derive_seed`], so reports are reproducible and folds are independent
//! (they can run in parallel without changing results).

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::bohf::BohfModel;
use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::kmeans::KMeansConfig;
use crate::scalar::Real;
use crate::seed::derive_seed;

/// Fraction of each class reserved for validation during selection.
pub const VALIDATION_FRACTION: f64 = 0.25;

/// Cross-validation protocol parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct CvConfig<T> {
    /// Codebook sizes per class to scan, ascending.
    pub k_grid: Vec<usize>,
    /// Regularization strengths to scan, ascending.
    pub lambda_grid: Vec<T>,
    pub kmeans: KMeansConfig,
    pub seed: u64,
    /// Label permutations for the null AUC distribution.
    pub n_permutations: usize,
}

impl<T: Real> CvConfig<T> {
    /// The standard protocol: `k` in `2..=15`, `lambda` in `10^-3..10^5`.
    pub fn standard(seed: u64) -> Self {
        CvConfig {
            k_grid: (2..=15).collect(),
            lambda_grid: (-3..=5).map(|e| T::from_f64_lossy(10f64.powi(e))).collect(),
            kmeans: KMeansConfig::default(),
            seed,
            n_permutations: 0,
        }
    }
}

/// Outcome of one leave-one-out fold.
#[derive(Debug, Clone, PartialEq)]
pub struct FoldRecord<T> {
    pub test_index: usize,
    pub label: i8,
    /// Selected codebook size per class.
    pub k_per_class: usize,
    /// Selected regularization strength.
    pub lambda: T,
    pub score: T,
    pub predicted: i8,
    pub model: BohfModel<T>,
}

/// Full cross-validation report.
#[derive(Debug, Clone, PartialEq)]
pub struct CvReport<T> {
    pub folds: Vec<FoldRecord<T>>,
    pub accuracy: T,
    pub auc: T,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    /// Null AUCs from label permutations, in permutation order.
    pub permutation_aucs: Vec<T>,
}

impl<T: Real> CvReport<T> {
    pub fn permutation_mean(&self) -> Option<T> {
        crate::scalar::mean(&self.permutation_aucs)
    }

    /// One-sided permutation p-value `(1 + #{perm >= auc}) / (1 + n)`.
    pub fn permutation_p(&self) -> Option<T> {
        if self.permutation_aucs.is_empty() {
            return None;
        }
        let ge = self
            .permutation_aucs
            .iter()
            .filter(|&&a| a >= self.auc)
            .count();
        Some(T::from_usize_lossy(1 + ge) / T::from_usize_lossy(1 + self.permutation_aucs.len()))
    }
}

/// Area under the ROC curve by the Mann-Whitney statistic with midranks
/// for ties. Labels must contain both classes; higher scores should favor
/// class `+1`.
pub fn mann_whitney_auc<T: Real>(scores: &[T], labels: &[i8]) -> Result<T> {
    if scores.is_empty() || scores.len() != labels.len() {
        return Err(Error::InsufficientData(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::InvalidField("scores must be finite".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::EmptyGroup(
            "AUC requires both classes present".into(),
        ));
    }
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_pos_sum = T::zero();
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        // 1-based midrank of the tie group spanning sorted positions i..=j.
        let midrank = T::from_f64_lossy((i + j) as f64 / 2.0 + 1.0);
        for &orig in &idx[i..=j] {
            if labels[orig] == 1 {
                rank_pos_sum += midrank;
            }
        }
        i = j + 1;
    }
    let np = T::from_usize_lossy(n_pos);
    let u = rank_pos_sum - np * (np + T::one()) / T::from_f64_lossy(2.0);
    Ok(u / (np * T::from_usize_lossy(n_neg)))
}

/// Stratified fit/validation split of `idx` (indices into the cohort).
/// Each class contributes `min(max(1, round(f n_c)), n_c - 1)` validation
/// subjects, drawn by seeded shuffle; both returned lists are ascending.
fn stratified_split(
    idx: &[usize],
    labels: &[i8],
    fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for class in [-1i8, 1] {
        let mut members: Vec<usize> = idx
            .iter()
            .copied()
            .filter(|&i| labels[i] == class)
            .collect();
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        // val_n = min(max(1, round(f n)), n - 1): zero for singleton
        // classes, otherwise at least one on each side of the split.
        let take = (fraction * members.len() as f64).round().max(1.0) as usize;
        let take = take.min(members.len() - 1);
        val.extend(members.drain(..take));
        fit.extend(members);
    }
    fit.sort_unstable();
    val.sort_unstable();
    (fit, val)
}

fn gather<T: Real>(
    features: &[FeatureSet<T>],
    labels: &[i8],
    idx: &[usize],
) -> (Vec<FeatureSet<T>>, Vec<i8>) {
    (
        idx.iter().map(|&i| features[i].clone()).collect(),
        idx.iter().map(|&i| labels[i]).collect(),
    )
}

/// Pick `(k, lambda)` for a training pool by validation-split accuracy.
fn select_hyperparams<T: Real>(
    features: &[FeatureSet<T>],
    labels: &[i8],
    train_idx: &[usize],
    cfg: &CvConfig<T>,
    seed: u64,
) -> Result<(usize, T)> {
    let (fit_idx, val_idx) = stratified_split(
        train_idx,
        labels,
        VALIDATION_FRACTION,
        derive_seed(seed, "val-split", 0),
    );
    let (fit_f, fit_l) = gather(features, labels, &fit_idx);
    let mut best: Option<(usize, T, usize)> = None; // (k, lambda, correct)
    let mut trial = 0u64;
    for &k in &cfg.k_grid {
        for &lambda in &cfg.lambda_grid {
            let fitted = BohfModel::fit(
                &fit_f,
                &fit_l,
                k,
                lambda,
                &cfg.kmeans,
                derive_seed(seed, "select", trial),
            );
            trial += 1;
            let model = match fitted {
                Ok(m) => m,
                // Too few elements for this k; larger ks will fail too, but
                // keep scanning lambdas of smaller ks already accepted.
                Err(Error::InsufficientData(_)) => continue,
                Err(e) => return Err(e),
            };
            let correct = val_idx
                .iter()
                .filter(|&&i| model.predict(&features[i]) == labels[i])
                .count();
            let better = match best {
                None => true,
                Some((_, _, c)) => correct > c,
            };
            if better {
                best = Some((k, lambda, correct));
            }
        }
    }
    best.map(|(k, l, _)| (k, l))
        .ok_or_else(|| Error::SolveFailure("no hyperparameter candidate could be fitted".into()))
}

fn run_fold<T: Real>(
    features: &[FeatureSet<T>],
    labels: &[i8],
    test_index: usize,
    cfg: &CvConfig<T>,
) -> Result<FoldRecord<T>> {
    let train_idx: Vec<usize> = (0..features.len()).filter(|&j| j != test_index).collect();
    let fold_seed = derive_seed(cfg.seed, "fold", test_index as u64);
    let (k, lambda) = select_hyperparams(features, labels, &train_idx, cfg, fold_seed)?;
    let (tf, tl) = gather(features, labels, &train_idx);
    let model = BohfModel::fit(
        &tf,
        &tl,
        k,
        lambda,
        &cfg.kmeans,
        derive_seed(fold_seed, "refit", 0),
    )?;
    let score = model.score(&features[test_index]);
    Ok(FoldRecord {
        test_index,
        label: labels[test_index],
        k_per_class: k,
        lambda,
        score,
        predicted: if score >= T::zero() { 1 } else { -1 },
        model,
    })
}

fn check_cohort<T: Real>(features: &[FeatureSet<T>], labels: &[i8]) -> Result<()> {
    if features.len() != labels.len() {
        return Err(Error::InsufficientData(format!(
            "{} subjects but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if features.len() < 3 {
        return Err(Error::InsufficientData(
            "leave-one-out evaluation needs at least 3 subjects".into(),
        ));
    }
    for class in [-1i8, 1] {
        let n = labels.iter().filter(|&&l| l == class).count();
        if n < 2 {
            return Err(Error::FoldError(format!(
                "class {class} has {n} subject(s); every training fold must \
                 retain both classes"
            )));
        }
    }
    Ok(())
}

/// Run the full leave-one-out protocol, plus the permutation test when
/// `cfg.n_permutations > 0`.
pub fn loocv<T: Real>(
    features: &[FeatureSet<T>],
    labels: &[i8],
    cfg: &CvConfig<T>,
) -> Result<CvReport<T>> {
    check_cohort(features, labels)?;
    let folds: Vec<FoldRecord<T>> = (0..features.len())
        .into_par_iter()
        .map(|i| run_fold(features, labels, i, cfg))
        .collect::<Result<_>>()?;

    let scores: Vec<T> = folds.iter().map(|f| f.score).collect();
    let auc = mann_whitney_auc(&scores, labels)?;
    let (mut tp, mut tn, mut fp, mut fn_) = (0, 0, 0, 0);
    for f in &folds {
        match (f.label, f.predicted) {
            (1, 1) => tp += 1,
            (-1, -1) => tn += 1,
            (-1, 1) => fp += 1,
            _ => fn_ += 1,
        }
    }
    let accuracy = T::from_usize_lossy(tp + tn) / T::from_usize_lossy(folds.len());

    let permutation_aucs: Vec<T> = (0..cfg.n_permutations)
        .map(|p| {
            let perm_seed = derive_seed(cfg.seed, "perm", p as u64);
            let mut shuffled = labels.to_vec();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
            let inner = CvConfig {
                n_permutations: 0,
                seed: perm_seed,
                ..cfg.clone()
            };
            loocv(features, &shuffled, &inner).map(|r| r.auc)
        })
        .collect::<Result<_>>()?;

    Ok(CvReport {
        folds,
        accuracy,
        auc,
        tp,
        tn,
        fp,
        fn_,
        permutation_aucs,
    })
}

/// Fit one deployable model on the whole cohort.
///
/// Hyperparameters are chosen by the same validation-split scan used
/// inside each cross-validation fold, but over all subjects; the winning
/// `(k, lambda)` is then refitted on the full cohort. Returns the chosen
/// pair together with the model.
pub fn fit_final<T: Real>(
    features: &[FeatureSet<T>],
    labels: &[i8],
    cfg: &CvConfig<T>,
) -> Result<(usize, T, BohfModel<T>)> {
    check_cohort(features, labels)?;
    let all: Vec<usize> = (0..features.len()).collect();
    let final_seed = derive_seed(cfg.seed, "final", 0);
    let (k, lambda) = select_hyperparams(features, labels, &all, cfg, final_seed)?;
    let model = BohfModel::fit(
        features,
        labels,
        k,
        lambda,
        &cfg.kmeans,
        derive_seed(final_seed, "refit", 0),
    )?;
    Ok((k, lambda, model))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureElement, FeatureSet, N_FEATURES};
    use crate::graph::GraphElementKind;

    fn subject(center: f64, n: usize, wobble: f64) -> FeatureSet<f64> {
        FeatureSet {
            elements: (0..n)
                .map(|i| FeatureElement {
                    tree: 0,
                    kind: GraphElementKind::Segment,
                    id: i,
                    radius_cm: 1e-3,
                    f: [center + wobble * ((i * 37 % 11) as f64 - 5.0); N_FEATURES],
                })
                .collect(),
        }
    }

    fn cohort(n_per_class: usize) -> (Vec<FeatureSet<f64>>, Vec<i8>) {
        let mut fs = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n_per_class {
            fs.push(subject(0.0 + 0.2 * i as f64, 10 + i, 0.3));
            labels.push(-1);
            fs.push(subject(8.0 + 0.2 * i as f64, 9 + i, 0.3));
            labels.push(1);
        }
        (fs, labels)
    }

    fn small_cfg(seed: u64) -> CvConfig<f64> {
        CvConfig {
            k_grid: vec![1, 2],
            lambda_grid: vec![0.1, 10.0],
            kmeans: KMeansConfig {
                restarts: 5,
                max_iter: 100,
            },
            seed,
            n_permutations: 0,
        }
    }

    #[test]
    fn auc_of_perfectly_ordered_scores_is_one() {
        let scores = [0.1, 0.2, 0.9, 1.4];
        let labels = [-1, -1, 1, 1];
        assert_eq!(mann_whitney_auc(&scores, &labels).unwrap(), 1.0);
        let flipped = [1, 1, -1, -1];
        assert_eq!(mann_whitney_auc(&scores, &flipped).unwrap(), 0.0);
    }

    #[test]
    fn auc_uses_midranks_for_ties() {
        let scores = [1.0, 1.0, 2.0, 2.0];
        let labels = [-1, 1, -1, 1];
        assert_eq!(mann_whitney_auc(&scores, &labels).unwrap(), 0.5);
        // Mixed case: one tie pair across classes.
        let scores = [0.3, 0.5, 0.5, 0.9];
        let labels = [-1, -1, 1, 1];
        // Ranks 1, 2.5, 2.5, 4; R+ = 6.5; AUC = (6.5 - 3) / 4.
        assert_eq!(mann_whitney_auc(&scores, &labels).unwrap(), 0.875);
    }

    #[test]
    fn auc_rejects_degenerate_inputs() {
        assert!(matches!(
            mann_whitney_auc(&[0.1, 0.2], &[1, 1]),
            Err(Error::EmptyGroup(_))
        ));
        assert!(matches!(
            mann_whitney_auc(&[0.1], &[1, -1]),
            Err(Error::InsufficientData(_))
        ));
        assert!(matches!(
            mann_whitney_auc(&[f64::NAN, 0.2], &[1, -1]),
            Err(Error::InvalidField(_))
        ));
    }

    #[test]
    fn stratified_split_is_disjoint_and_proportional() {
        let labels: Vec<i8> = vec![-1; 8].into_iter().chain(vec![1; 4]).collect();
        let idx: Vec<usize> = (0..12).collect();
        let (fit, val) = stratified_split(&idx, &labels, 0.25, 42);
        assert_eq!(fit.len() + val.len(), 12);
        let val_neg = val.iter().filter(|&&i| labels[i] == -1).count();
        let val_pos = val.len() - val_neg;
        assert_eq!(val_neg, 2); // round(0.25 * 8)
        assert_eq!(val_pos, 1); // round(0.25 * 4)
        let mut all: Vec<usize> = fit.iter().chain(&val).copied().collect();
        all.sort_unstable();
        assert_eq!(all, idx);
    }

    #[test]
    fn two_member_classes_keep_one_subject_on_each_side() {
        let labels = vec![-1i8, -1, 1, 1];
        let idx = vec![0, 1, 2, 3];
        let (fit, val) = stratified_split(&idx, &labels, 0.25, 7);
        for class in [-1i8, 1] {
            assert_eq!(fit.iter().filter(|&&i| labels[i] == class).count(), 1);
            assert_eq!(val.iter().filter(|&&i| labels[i] == class).count(), 1);
        }
    }

    #[test]
    fn separable_cohort_is_classified_perfectly() {
        let (fs, labels) = cohort(5);
        let report = loocv(&fs, &labels, &small_cfg(3)).unwrap();
        assert_eq!(report.accuracy, 1.0);
        assert_eq!(report.auc, 1.0);
        assert_eq!(report.tp, 5);
        assert_eq!(report.tn, 5);
        assert_eq!(report.fp + report.fn_, 0);
        assert_eq!(report.folds.len(), 10);
        for (i, f) in report.folds.iter().enumerate() {
            assert_eq!(f.test_index, i);
            assert_eq!(f.predicted, f.label);
        }
    }

    #[test]
    fn report_is_deterministic_for_a_seed() {
        let (fs, labels) = cohort(4);
        let a = loocv(&fs, &labels, &small_cfg(11)).unwrap();
        let b = loocv(&fs, &labels, &small_cfg(11)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn test_subject_label_does_not_influence_its_score() {
        // Flipping a held-out subject's label must leave that fold's model
        // and score untouched: the label is only consumed by the metrics.
        let (fs, mut labels) = cohort(4);
        let before = loocv(&fs, &labels, &small_cfg(5)).unwrap();
        labels[0] = -labels[0];
        let after = loocv(&fs, &labels, &small_cfg(5)).unwrap();
        assert_eq!(before.folds[0].score, after.folds[0].score);
        assert_eq!(before.folds[0].k_per_class, after.folds[0].k_per_class);
        assert_eq!(before.folds[0].model, after.folds[0].model);
    }

    #[test]
    fn final_model_fits_the_whole_cohort_deterministically() {
        let (fs, labels) = cohort(4);
        let cfg = small_cfg(23);
        let (k, lambda, model) = fit_final(&fs, &labels, &cfg).unwrap();
        assert!(cfg.k_grid.contains(&k));
        assert!(cfg.lambda_grid.contains(&lambda));
        let correct = fs
            .iter()
            .zip(&labels)
            .filter(|(f, &l)| model.predict(f) == l)
            .count();
        assert_eq!(correct, fs.len(), "separable cohort must be refit cleanly");
        let (k2, lambda2, model2) = fit_final(&fs, &labels, &cfg).unwrap();
        assert_eq!((k, lambda), (k2, lambda2));
        assert_eq!(model, model2);
    }

    #[test]
    fn permutations_break_the_association() {
        let (fs, labels) = cohort(4);
        let mut cfg = small_cfg(17);
        cfg.n_permutations = 4;
        let report = loocv(&fs, &labels, &cfg).unwrap();
        assert_eq!(report.permutation_aucs.len(), 4);
        for &a in &report.permutation_aucs {
            assert!((0.0..=1.0).contains(&a));
        }
        let mean = report.permutation_mean().unwrap();
        assert!(mean < report.auc, "null mean {mean} vs auc {}", report.auc);
        let p = report.permutation_p().unwrap();
        assert!((0.0..=1.0).contains(&p));
    }

    #[test]
    fn degenerate_cohorts_are_rejected() {
        let (fs, mut labels) = cohort(3);
        labels[1] = -1;
        labels[3] = -1;
        labels[5] = -1; // one positive subject left
        assert!(matches!(
            loocv(&fs, &labels, &small_cfg(0)),
            Err(Error::FoldError(_))
        ));
        let (fs, labels) = cohort(1);
        assert!(matches!(
            loocv(&fs, &labels, &small_cfg(0)),
            Err(Error::InsufficientData(_))
        ));
    }
}
