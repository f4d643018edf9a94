//! Bag-of-hemodynamic-features encoding and the end-to-end classifier.
//!
//! Subjects carry variable numbers of feature elements, so they are made
//! comparable through a learned vocabulary: the pooled training elements
//! are standardized dimension-wise, clustered per class into `k` centroids
//! each (class `-1` first, then `+1`, giving `2k` codes), and every subject
//! is encoded as the histogram of nearest-code assignments — its
//! bag-of-hemodynamic-features vector, whose entries always sum to the
//! subject's element count. Encoded vectors are standardized with training
//! statistics and classified by L2-regularized logistic regression.

use crate::error::{Error, Result};
use crate::features::{FeatureSet, N_FEATURES};
use crate::kmeans::{kmeans, nearest, KMeansConfig};
use crate::logreg::{self, LogReg};
use crate::scalar::Real;
use crate::seed::derive_seed;

/// Learned feature vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T> {
    /// Codes per class; `codes.len() == 2 * k_per_class`.
    pub k_per_class: usize,
    /// Class `-1` centroids first, then class `+1`, in standardized space.
    pub codes: Vec<[T; N_FEATURES]>,
    /// Dimension-wise mean of the pooled training elements.
    pub feat_mean: [T; N_FEATURES],
    /// Dimension-wise population standard deviation; exact zeros replaced
    /// by one so standardization stays finite.
    pub feat_std: [T; N_FEATURES],
}

fn check_cohort<T: Real>(features: &[FeatureSet<T>], labels: &[i8]) -> Result<()> {
    if features.is_empty() {
        return Err(Error::EmptyInput("no subjects".into()));
    }
    if features.len() != labels.len() {
        return Err(Error::InsufficientData(format!(
            "{} subjects but {} labels",
            features.len(),
            labels.len()
        )));
    }
    if labels.iter().any(|&l| l != -1 && l != 1) {
        return Err(Error::InsufficientData("labels must be -1 or +1".into()));
    }
    for (i, fs) in features.iter().enumerate() {
        if fs.is_empty() {
            return Err(Error::EmptyInput(format!("subject {i} has no elements")));
        }
    }
    for class in [-1i8, 1] {
        if !labels.contains(&class) {
            return Err(Error::EmptyGroup(format!("no subjects with label {class}")));
        }
    }
    Ok(())
}

fn pooled_stats<T: Real>(features: &[FeatureSet<T>]) -> ([T; N_FEATURES], [T; N_FEATURES]) {
    let mut mean = [T::zero(); N_FEATURES];
    let mut n = T::zero();
    for fs in features {
        for el in &fs.elements {
            for (m, v) in mean.iter_mut().zip(el.f) {
                *m += v;
            }
            n += T::one();
        }
    }
    for m in mean.iter_mut() {
        *m /= n;
    }
    let mut var = [T::zero(); N_FEATURES];
    for fs in features {
        for el in &fs.elements {
            for ((s, v), m) in var.iter_mut().zip(el.f).zip(mean) {
                let d = v - m;
                *s += d * d;
            }
        }
    }
    let mut std = [T::zero(); N_FEATURES];
    for (s, v) in std.iter_mut().zip(var) {
        let sd = (v / n).sqrt();
        *s = if sd > T::zero() { sd } else { T::one() };
    }
    (mean, std)
}

fn standardize<T: Real>(
    f: &[T; N_FEATURES],
    mean: &[T; N_FEATURES],
    std: &[T; N_FEATURES],
) -> [T; N_FEATURES] {
    let mut out = [T::zero(); N_FEATURES];
    for i in 0..N_FEATURES {
        out[i] = (f[i] - mean[i]) / std[i];
    }
    out
}

/// Build the per-class codebook from a labeled training cohort.
pub fn build_codebook<T: Real>(
    features: &[FeatureSet<T>],
    labels: &[i8],
    k_per_class: usize,
    kmeans_cfg: &KMeansConfig,
    seed: u64,
) -> Result<Codebook<T>> {
    check_cohort(features, labels)?;
    let (feat_mean, feat_std) = pooled_stats(features);
    let mut codes = Vec::with_capacity(2 * k_per_class);
    for (ci, class) in [-1i8, 1].into_iter().enumerate() {
        let points: Vec<[T; N_FEATURES]> = features
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == class)
            .flat_map(|(fs, _)| {
                fs.elements
                    .iter()
                    .map(|el| standardize(&el.f, &feat_mean, &feat_std))
            })
            .collect();
        let km = kmeans(
            &points,
            k_per_class,
            kmeans_cfg,
            derive_seed(seed, "codebook-class", ci as u64),
        )?;
        codes.extend(km.centroids);
    }
    Ok(Codebook {
        k_per_class,
        codes,
        feat_mean,
        feat_std,
    })
}

/// Encode a subject as its histogram of nearest-code counts. The entries
/// sum to the subject's element count.
pub fn encode<T: Real>(codebook: &Codebook<T>, fs: &FeatureSet<T>) -> Vec<T> {
    let mut counts = vec![T::zero(); codebook.codes.len()];
    for el in &fs.elements {
        let z = standardize(&el.f, &codebook.feat_mean, &codebook.feat_std);
        counts[nearest(&z, &codebook.codes)] += T::one();
    }
    counts
}

/// The complete fitted pipeline: vocabulary, encoding statistics, and the
/// logistic classifier over standardized code histograms.
#[derive(Debug, Clone, PartialEq)]
pub struct BohfModel<T> {
    pub codebook: Codebook<T>,
    /// Mean of the training code histograms, per code.
    pub code_mean: Vec<T>,
    /// Population standard deviation of the training histograms; zeros
    /// replaced by one.
    pub code_std: Vec<T>,
    pub classifier: LogReg<T>,
}

impl<T: Real> BohfModel<T> {
    /// Fit codebook, encoding statistics, and classifier on a training
    /// cohort.
    pub fn fit(
        features: &[FeatureSet<T>],
        labels: &[i8],
        k_per_class: usize,
        lambda: T,
        kmeans_cfg: &KMeansConfig,
        seed: u64,
    ) -> Result<Self> {
        let codebook = build_codebook(
            features,
            labels,
            k_per_class,
            kmeans_cfg,
            derive_seed(seed, "codebook", 0),
        )?;
        let histograms: Vec<Vec<T>> = features.iter().map(|fs| encode(&codebook, fs)).collect();
        let d = codebook.codes.len();
        let n = T::from_usize_lossy(histograms.len());
        let mut code_mean = vec![T::zero(); d];
        for h in &histograms {
            for (m, v) in code_mean.iter_mut().zip(h) {
                *m += *v;
            }
        }
        for m in code_mean.iter_mut() {
            *m /= n;
        }
        let mut code_std = vec![T::zero(); d];
        for h in &histograms {
            for ((s, v), m) in code_std.iter_mut().zip(h).zip(&code_mean) {
                let dv = *v - *m;
                *s += dv * dv;
            }
        }
        for s in code_std.iter_mut() {
            let sd = (*s / n).sqrt();
            *s = if sd > T::zero() { sd } else { T::one() };
        }
        let x: Vec<Vec<T>> = histograms
            .iter()
            .map(|h| {
                h.iter()
                    .zip(&code_mean)
                    .zip(&code_std)
                    .map(|((&v, &m), &s)| (v - m) / s)
                    .collect()
            })
            .collect();
        let classifier = logreg::fit(&x, labels, lambda)?;
        Ok(BohfModel {
            codebook,
            code_mean,
            code_std,
            classifier,
        })
    }

    /// Standardized code histogram of a subject.
    pub fn encode_standardized(&self, fs: &FeatureSet<T>) -> Vec<T> {
        encode(&self.codebook, fs)
            .into_iter()
            .zip(&self.code_mean)
            .zip(&self.code_std)
            .map(|((v, &m), &s)| (v - m) / s)
            .collect()
    }

    /// Decision value; positive favors class `+1`.
    pub fn score(&self, fs: &FeatureSet<T>) -> T {
        self.classifier.score(&self.encode_standardized(fs))
    }

    pub fn predict(&self, fs: &FeatureSet<T>) -> i8 {
        if self.score(fs) >= T::zero() {
            1
        } else {
            -1
        }
    }
}
