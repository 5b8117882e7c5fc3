//! Slowness likelihoods and per-frame re-timing signals.
//!
//! A [`SlownessMatrix`] holds one probability row per between-frame
//! position. Column `j` is the likelihood that the position plays at
//! `1 / 2^(k - j)` of its natural speed, so column `j` allows a skip of at
//! most `2^(k - j)` frames: column 0 is the slowest footage (skip `2^k`
//! allowed) and column `k` is footage that must stay at original speed.

use std::fmt;
use std::str::FromStr;

use crate::error::{Result, RetimeError};
use crate::interp;
use crate::scalar::Scalar;

/// Row-sum tolerance for a valid probability row.
pub const ROW_SUM_TOLERANCE: f64 = 1e-6;
/// Probabilities are clamped to this floor before taking logarithms.
pub const PROB_FLOOR: f64 = 1e-12;
/// Default confidence gap targeted by [`sharpen`].
pub const DEFAULT_GAP_THRESHOLD: f64 = 0.975;
/// Maximum number of temperature halvings in [`sharpen`].
pub const SHARPEN_MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct SlownessMatrix<T> {
    probs: Vec<T>,
    rows: usize,
    k: u32,
}

impl<T: Scalar> SlownessMatrix<T> {
    /// Builds a matrix from row vectors, each of length `k + 1`.
    pub fn from_rows(k: u32, rows: &[Vec<T>]) -> Result<Self> {
        if k == 0 {
            return Err(RetimeError::invalid("slowness k must be at least 1"));
        }
        let classes = k as usize + 1;
        let mut probs = Vec::with_capacity(rows.len() * classes);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != classes {
                return Err(RetimeError::invalid(format!(
                    "slowness row {i} has {} columns, expected {classes} for k={k}",
                    row.len()
                )));
            }
            probs.extend_from_slice(row);
        }
        Self::from_flat(k, probs)
    }

    /// Builds a matrix from row-major storage.
    pub fn from_flat(k: u32, probs: Vec<T>) -> Result<Self> {
        if k == 0 {
            return Err(RetimeError::invalid("slowness k must be at least 1"));
        }
        let classes = k as usize + 1;
        if probs.is_empty() || !probs.len().is_multiple_of(classes) {
            return Err(RetimeError::invalid(format!(
                "slowness storage of length {} is not a non-empty multiple of {classes}",
                probs.len()
            )));
        }
        let m = SlownessMatrix { rows: probs.len() / classes, probs, k };
        m.validate()?;
        Ok(m)
    }

    /// One-hot rows; `classes_per_row[i]` is the hot column of row `i`.
    pub fn one_hot(k: u32, classes_per_row: &[usize]) -> Result<Self> {
        let classes = k as usize + 1;
        let mut probs = vec![T::zero(); classes_per_row.len() * classes];
        for (i, &j) in classes_per_row.iter().enumerate() {
            if j >= classes {
                return Err(RetimeError::invalid(format!("class {j} out of range for k={k}")));
            }
            probs[i * classes + j] = T::one();
        }
        Self::from_flat(k, probs)
    }

    fn validate(&self) -> Result<()> {
        let tol = T::lit(ROW_SUM_TOLERANCE);
        for (i, row) in self.iter_rows().enumerate() {
            if let Some(v) = row.iter().find(|v| !(**v >= T::zero() && **v <= T::one())) {
                return Err(RetimeError::invalid(format!("slowness row {i} has entry {v} outside [0, 1]")));
            }
            let s: T = row.iter().copied().sum();
            if (s - T::one()).abs() > tol {
                return Err(RetimeError::invalid(format!("slowness row {i} sums to {s}, expected 1")));
            }
        }
        Ok(())
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn classes(&self) -> usize {
        self.k as usize + 1
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn row(&self, i: usize) -> &[T] {
        let c = self.classes();
        &self.probs[i * c..(i + 1) * c]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[T]> {
        self.probs.chunks_exact(self.classes())
    }

    pub fn get(&self, row: usize, class: usize) -> T {
        self.probs[row * self.classes() + class]
    }

    pub fn as_flat(&self) -> &[T] {
        &self.probs
    }

    /// Skip ceiling `2^(k - j)` associated with column `j`.
    pub fn class_skip(&self, class: usize) -> T {
        class_skip(self.k, class)
    }

    pub fn column(&self, class: usize) -> Vec<T> {
        self.iter_rows().map(|r| r[class]).collect()
    }

    /// Global max entry minus global min entry.
    pub fn confidence_gap(&self) -> T {
        let (lo, hi) =
            self.probs.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        hi - lo
    }

    /// Index of the strictly largest entry of row `i`, or `None` on ties.
    pub fn unique_argmax(&self, i: usize) -> Option<usize> {
        unique_argmax(self.row(i))
    }
}

pub(crate) fn class_skip<T: Scalar>(k: u32, class: usize) -> T {
    T::lit(2.0).powi(k as i32 - class as i32)
}

pub(crate) fn unique_argmax<T: Scalar>(row: &[T]) -> Option<usize> {
    let mut best = 0;
    for j in 1..row.len() {
        if row[j] > row[best] {
            best = j;
        }
    }
    let ties = row.iter().filter(|&&v| v == row[best]).count();
    (ties == 1).then_some(best)
}

/// Which end of the normalized range marks frames that must not be sped up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Orientation {
    /// `0` marks a frame to keep at original speed; `1` allows the most speed-up.
    #[default]
    ZeroMeansNoSpeedup,
    /// Inverted: `1` marks a frame to keep.
    OneMeansNoSpeedup,
}

impl Orientation {
    pub fn as_str(self) -> &'static str {
        match self {
            Orientation::ZeroMeansNoSpeedup => "zero_slow",
            Orientation::OneMeansNoSpeedup => "one_slow",
        }
    }
}

impl fmt::Display for Orientation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Orientation {
    type Err = RetimeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "zero_slow" => Ok(Orientation::ZeroMeansNoSpeedup),
            "one_slow" => Ok(Orientation::OneMeansNoSpeedup),
            other => Err(RetimeError::Parse(format!("unknown orientation {other:?} (expected zero_slow or one_slow)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetimeSignal<T> {
    raw: Vec<T>,
    normalized: Vec<T>,
    orientation: Orientation,
}

impl<T: Scalar> RetimeSignal<T> {
    pub fn raw(&self) -> &[T] {
        &self.raw
    }

    pub fn normalized(&self) -> &[T] {
        &self.normalized
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    /// True when the raw signal carries no variation.
    pub fn is_constant(&self) -> bool {
        self.raw.iter().all(|&v| v == self.raw[0])
    }

    pub fn with_orientation(mut self, orientation: Orientation) -> Self {
        self.orientation = orientation;
        self
    }

    /// Normalized signal oriented so that `0` means "keep original speed".
    /// A constant signal yields all zeros under either orientation.
    pub fn speedup_allowance(&self) -> Vec<T> {
        match self.orientation {
            Orientation::ZeroMeansNoSpeedup => self.normalized.clone(),
            Orientation::OneMeansNoSpeedup if self.is_constant() => self.normalized.clone(),
            Orientation::OneMeansNoSpeedup => self.normalized.iter().map(|&v| T::one() - v).collect(),
        }
    }

    /// Mean of [`Self::speedup_allowance`].
    pub fn mean_allowance(&self) -> T {
        let a = self.speedup_allowance();
        a.iter().copied().sum::<T>() / T::from_count(a.len())
    }
}

/// Min-max normalization to `[0, 1]`. Constant input normalizes to zeros.
pub fn normalize_signal<T: Scalar>(raw: &[T]) -> Result<RetimeSignal<T>> {
    if raw.len() < 2 {
        return Err(RetimeError::invalid(format!("signal needs at least 2 samples, got {}", raw.len())));
    }
    if let Some(v) = raw.iter().find(|v| !v.is_finite()) {
        return Err(RetimeError::invalid(format!("signal contains non-finite value {v}")));
    }
    let lo = raw.iter().copied().fold(T::infinity(), T::min);
    let hi = raw.iter().copied().fold(T::neg_infinity(), T::max);
    let span = hi - lo;
    let normalized = if span > T::zero() {
        raw.iter().map(|&v| ((v - lo) / span).max(T::zero()).min(T::one())).collect()
    } else {
        vec![T::zero(); raw.len()]
    };
    Ok(RetimeSignal { raw: raw.to_vec(), normalized, orientation: Orientation::ZeroMeansNoSpeedup })
}

/// Linearly resamples every column of `p` to `target_rows` rows.
pub fn interpolate_rows<T: Scalar>(p: &SlownessMatrix<T>, target_rows: usize) -> Result<SlownessMatrix<T>> {
    if p.rows() < 2 {
        return Err(RetimeError::invalid(format!("row interpolation needs at least 2 source rows, got {}", p.rows())));
    }
    if target_rows < 2 {
        return Err(RetimeError::invalid(format!("row interpolation needs at least 2 target rows, got {target_rows}")));
    }
    if target_rows == p.rows() {
        return Ok(p.clone());
    }
    let classes = p.classes();
    let columns: Vec<Vec<T>> = (0..classes).map(|j| interp::resample(&p.column(j), target_rows)).collect();
    let mut probs = Vec::with_capacity(target_rows * classes);
    for r in 0..target_rows {
        let s: T = columns.iter().map(|c| c[r]).sum();
        probs.extend(columns.iter().map(|c| (c[r] / s).min(T::one())));
    }
    Ok(SlownessMatrix { probs, rows: target_rows, k: p.k })
}

fn softmax_tempered<T: Scalar>(row: &[T], inv_temperature: T, out: &mut [T]) {
    let floor = T::lit(PROB_FLOOR);
    for (o, &v) in out.iter_mut().zip(row) {
        *o = v.max(floor).min(T::one()).ln() * inv_temperature;
    }
    let m = out.iter().copied().fold(T::neg_infinity(), T::max);
    let mut z = T::zero();
    for o in out.iter_mut() {
        *o = (*o - m).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

/// Lowers the softmax temperature of `p` until the global confidence gap
/// exceeds `gap_threshold`.
///
/// The temperature halves from 1 for at most [`SHARPEN_MAX_HALVINGS`]
/// rounds; if the gap is never reached the sharpest iterate is returned.
/// Matrices already past the threshold are returned unchanged.
pub fn sharpen<T: Scalar>(p: &SlownessMatrix<T>, gap_threshold: T) -> SlownessMatrix<T> {
    if p.confidence_gap() > gap_threshold {
        return p.clone();
    }
    let classes = p.classes();
    let mut out = p.clone();
    let mut inv_t = T::one();
    for _ in 0..=SHARPEN_MAX_HALVINGS {
        for (src, dst) in p.probs.chunks_exact(classes).zip(out.probs.chunks_exact_mut(classes)) {
            softmax_tempered(src, inv_t, dst);
        }
        if out.confidence_gap() > gap_threshold {
            break;
        }
        inv_t *= T::lit(2.0);
    }
    out
}

/// Expected skip `s_i = sum_j p[i, j] * 2^(k - j)` per row, normalized.
/// Raw values lie in `[1, 2^k]`; larger values allow more speed-up.
pub fn speediness_to_signal<T: Scalar>(p: &SlownessMatrix<T>) -> Result<RetimeSignal<T>> {
    let skips: Vec<T> = (0..p.classes()).map(|j| p.class_skip(j)).collect();
    let raw: Vec<T> = p.iter_rows().map(|row| row.iter().zip(&skips).map(|(&q, &s)| q * s).sum()).collect();
    if raw.len() < 2 {
        return Err(RetimeError::invalid("speediness signal needs at least 2 slowness rows"));
    }
    normalize_signal(&raw)
}

/// Cosine similarity between consecutive feature vectors (length `n - 1`).
/// Highly similar neighbours allow more speed-up.
pub fn cosine_similarity_signal<T: Scalar>(features: &[Vec<T>]) -> Result<RetimeSignal<T>> {
    if features.len() < 3 {
        // n - 1 >= 2 samples are needed for normalization.
        return Err(RetimeError::invalid(format!(
            "cosine signal needs at least 3 feature vectors, got {}",
            features.len()
        )));
    }
    let dim = features[0].len();
    if dim == 0 {
        return Err(RetimeError::invalid("feature vectors are empty"));
    }
    let mut norms = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        if f.len() != dim {
            return Err(RetimeError::invalid(format!("feature vector {i} has dimension {}, expected {dim}", f.len())));
        }
        let norm = f.iter().map(|&v| v * v).sum::<T>().sqrt();
        if !(norm > T::zero()) || !norm.is_finite() {
            return Err(RetimeError::invalid(format!("feature vector {i} has zero or non-finite norm")));
        }
        norms.push(norm);
    }
    let raw: Vec<T> = features
        .windows(2)
        .zip(norms.windows(2))
        .map(|(f, nrm)| {
            let dot: T = f[0].iter().zip(&f[1]).map(|(&a, &b)| a * b).sum();
            (dot / (nrm[0] * nrm[1])).max(-T::one()).min(T::one())
        })
        .collect();
    normalize_signal(&raw)
}
