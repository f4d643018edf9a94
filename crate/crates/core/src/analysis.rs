//! Descriptive statistics over solved cohorts.
//!
//! Reproduces the exploratory analyses that accompany the classifier:
//! rank correlation between vessel radius and simulated flow, an
//! exponential fit of flow against radius, and the two cohort tables
//! (per-subject demographics and per-measurement hemodynamics). All
//! spreads in the tables use the sample convention (divide by `n - 1`).

use crate::error::{Error, Result};
use crate::features::{FeatureSet, N_FEATURES};
use crate::graph::GraphElementKind;
use crate::scalar::{mean_std_sample, Real};

/// Whether a subject is a glaucoma case (`+1`) or a control (`-1`).
pub fn label_name(label: i8) -> &'static str {
    if label == 1 {
        "glaucoma"
    } else {
        "control"
    }
}

/// Subject-level metadata accompanying a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectInfo {
    pub id: String,
    /// `+1` glaucoma, `-1` control.
    pub label: i8,
    pub age: Option<f64>,
    pub sex: Option<Sex>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sex {
    Male,
    Female,
}

impl Sex {
    pub fn as_str(self) -> &'static str {
        match self {
            Sex::Male => "M",
            Sex::Female => "F",
        }
    }

    pub fn parse(s: &str) -> Option<Sex> {
        match s.trim() {
            "M" | "m" => Some(Sex::Male),
            "F" | "f" => Some(Sex::Female),
            _ => None,
        }
    }
}

/// One measurement row: a feature element tagged with its subject.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord<T> {
    pub subject_id: String,
    pub label: i8,
    pub tree: usize,
    pub kind: GraphElementKind,
    pub element_id: usize,
    pub radius_cm: T,
    /// `[Q, P, v, R, Re, WSS]`.
    pub f: [T; N_FEATURES],
}

/// Flatten a cohort into measurement rows, subjects in order and elements
/// in their feature-set order.
pub fn measurements<T: Real>(
    subjects: &[SubjectInfo],
    features: &[FeatureSet<T>],
) -> Result<Vec<MeasurementRecord<T>>> {
    if subjects.len() != features.len() {
        return Err(Error::InsufficientData(format!(
            "{} subjects but {} feature sets",
            subjects.len(),
            features.len()
        )));
    }
    let mut out = Vec::new();
    for (info, fs) in subjects.iter().zip(features) {
        for el in &fs.elements {
            out.push(MeasurementRecord {
                subject_id: info.id.clone(),
                label: info.label,
                tree: el.tree,
                kind: el.kind,
                element_id: el.id,
                radius_cm: el.radius_cm,
                f: el.f,
            });
        }
    }
    Ok(out)
}

fn midranks<T: Real>(xs: &[T]) -> Vec<T> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    let mut ranks = vec![T::zero(); xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let mid = T::from_f64_lossy((i + j) as f64 / 2.0 + 1.0);
        for &orig in &idx[i..=j] {
            ranks[orig] = mid;
        }
        i = j + 1;
    }
    ranks
}

/// Pearson correlation coefficient.
pub fn pearson<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation needs two same-length series, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidField(
            "correlation inputs must be finite".into(),
        ));
    }
    let n = T::from_usize_lossy(x.len());
    let mx = x.iter().copied().sum::<T>() / n;
    let my = y.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut syy = T::zero();
    let mut sxy = T::zero();
    for (&a, &b) in x.iter().zip(y) {
        let dx = a - mx;
        let dy = b - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if !(sxx > T::zero()) || !(syy > T::zero()) {
        return Err(Error::UndefinedCorrelation(
            "a series with zero variance has no correlation".into(),
        ));
    }
    Ok(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Spearman rank correlation: Pearson over midranks.
pub fn spearman<T: Real>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "correlation needs two same-length series, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidField(
            "correlation inputs must be finite".into(),
        ));
    }
    pearson(&midranks(x), &midranks(y))
}

/// Least-squares fit of `y = a e^(b x)` via linear regression on `ln y`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpFit<T> {
    pub a: T,
    pub b: T,
}

pub fn fit_exponential<T: Real>(x: &[T], y: &[T]) -> Result<ExpFit<T>> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "exponential fit needs two same-length series, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    if y.iter().any(|&v| !(v.is_finite() && v > T::zero())) {
        return Err(Error::InvalidField(
            "exponential fit requires positive ordinates".into(),
        ));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidField("abscissae must be finite".into()));
    }
    let n = T::from_usize_lossy(x.len());
    let ly: Vec<T> = y.iter().map(|&v| v.ln()).collect();
    let mx = x.iter().copied().sum::<T>() / n;
    let ml = ly.iter().copied().sum::<T>() / n;
    let mut sxx = T::zero();
    let mut sxl = T::zero();
    for (&a, &l) in x.iter().zip(&ly) {
        let dx = a - mx;
        sxx += dx * dx;
        sxl += dx * (l - ml);
    }
    if !(sxx > T::zero()) {
        return Err(Error::UndefinedCorrelation(
            "exponential fit needs varying abscissae".into(),
        ));
    }
    let b = sxl / sxx;
    let a = (ml - b * mx).exp();
    Ok(ExpFit { a, b })
}

/// `n`, mean, sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStat<T> {
    pub n: usize,
    pub mean: T,
    pub std: T,
}

fn group_stat<T: Real>(xs: &[T]) -> Option<GroupStat<T>> {
    mean_std_sample(xs).map(|(mean, std)| GroupStat {
        n: xs.len(),
        mean,
        std,
    })
}

/// One row of the per-subject table.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectRow<T> {
    pub subject_id: String,
    pub label: i8,
    pub n_segments: usize,
    pub n_bifurcations: usize,
    pub n_terminals: usize,
    pub age: Option<f64>,
    pub sex: Option<Sex>,
    /// Mean pressure drop from the inlet over this subject's measurements,
    /// mmHg.
    pub mean_dp_mmhg: T,
}

/// Demographics of one class.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupDemographics<T> {
    pub label: i8,
    pub n_subjects: usize,
    pub age: Option<GroupStat<T>>,
    pub n_male: usize,
    pub n_female: usize,
}

/// Per-measurement hemodynamics of one class (or of the pooled cohort when
/// `label` is `None`): pressure drop from the inlet and velocity.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMeasurements<T> {
    pub label: Option<i8>,
    pub n_measurements: usize,
    pub dp_mmhg: GroupStat<T>,
    pub v_cm_s: GroupStat<T>,
}

/// The two descriptive tables.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortSummary<T> {
    pub subjects: Vec<SubjectRow<T>>,
    pub demographics: Vec<GroupDemographics<T>>,
    pub measurements: Vec<GroupMeasurements<T>>,
}

/// Build both tables. `p0_mmhg` anchors the per-measurement pressure drop.
pub fn cohort_summary<T: Real>(
    subjects: &[SubjectInfo],
    features: &[FeatureSet<T>],
    p0_mmhg: T,
) -> Result<CohortSummary<T>> {
    if subjects.is_empty() {
        return Err(Error::EmptyInput("no subjects to summarize".into()));
    }
    if subjects.len() != features.len() {
        return Err(Error::InsufficientData(format!(
            "{} subjects but {} feature sets",
            subjects.len(),
            features.len()
        )));
    }
    for class in [-1i8, 1] {
        if !subjects.iter().any(|s| s.label == class) {
            return Err(Error::EmptyGroup(format!(
                "cohort tables need both classes; no {} subjects",
                label_name(class)
            )));
        }
    }

    let mut rows = Vec::with_capacity(subjects.len());
    for (info, fs) in subjects.iter().zip(features) {
        if fs.is_empty() {
            return Err(Error::EmptyInput(format!(
                "subject {} has no measurements",
                info.id
            )));
        }
        let dps: Vec<T> = fs.elements.iter().map(|el| p0_mmhg - el.f[1]).collect();
        rows.push(SubjectRow {
            subject_id: info.id.clone(),
            label: info.label,
            n_segments: fs.count_kind(GraphElementKind::Segment),
            n_bifurcations: fs.count_kind(GraphElementKind::Bifurcation),
            n_terminals: fs.count_kind(GraphElementKind::Terminal),
            age: info.age,
            sex: info.sex,
            mean_dp_mmhg: crate::scalar::mean(&dps).unwrap(),
        });
    }

    let mut demographics = Vec::new();
    for class in [-1i8, 1] {
        let members: Vec<&SubjectInfo> = subjects.iter().filter(|s| s.label == class).collect();
        let ages: Vec<T> = members
            .iter()
            .filter_map(|s| s.age.map(T::from_f64_lossy))
            .collect();
        demographics.push(GroupDemographics {
            label: class,
            n_subjects: members.len(),
            age: group_stat(&ages),
            n_male: members.iter().filter(|s| s.sex == Some(Sex::Male)).count(),
            n_female: members
                .iter()
                .filter(|s| s.sex == Some(Sex::Female))
                .count(),
        });
    }

    let mut tables = Vec::new();
    for class in [Some(-1i8), Some(1), None] {
        let mut dps = Vec::new();
        let mut vs = Vec::new();
        for (info, fs) in subjects.iter().zip(features) {
            if class.map(|c| c == info.label).unwrap_or(true) {
                for el in &fs.elements {
                    dps.push(p0_mmhg - el.f[1]);
                    vs.push(el.f[2]);
                }
            }
        }
        tables.push(GroupMeasurements {
            label: class,
            n_measurements: dps.len(),
            dp_mmhg: group_stat(&dps).unwrap(),
            v_cm_s: group_stat(&vs).unwrap(),
        });
    }

    Ok(CohortSummary {
        subjects: rows,
        demographics,
        measurements: tables,
    })
}
