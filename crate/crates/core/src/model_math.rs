//! Training-side math of the slowness classifier that needs no network:
//! class-weighted cross-entropy and temporal-difference augmentation.

use crate::error::{Result, RetimeError};
use crate::scalar::Scalar;
use crate::signals::{SlownessMatrix, PROB_FLOOR};

pub const CLASS_WEIGHT_BASE: f64 = 1.25;

/// `w[y] = 1.25^(k - y)` for `y = 0..=k`; slower classes weigh more.
pub fn class_weights<T: Scalar>(k: u32) -> Vec<T> {
    let base = T::lit(CLASS_WEIGHT_BASE);
    (0..=k).map(|y| base.powi((k - y) as i32)).collect()
}

/// `-sum_j w[y_j] * log(max(p[j, y_j], 1e-12))`.
pub fn weighted_ce_loss<T: Scalar>(probs: &SlownessMatrix<T>, labels: &[u32]) -> Result<T> {
    weighted_ce_loss_with(probs, labels, &class_weights(probs.k()))
}

/// Same loss with caller-provided weights (one per class).
pub fn weighted_ce_loss_with<T: Scalar>(probs: &SlownessMatrix<T>, labels: &[u32], weights: &[T]) -> Result<T> {
    if labels.len() != probs.rows() {
        return Err(RetimeError::invalid(format!("{} labels for {} rows", labels.len(), probs.rows())));
    }
    if weights.len() != probs.classes() {
        return Err(RetimeError::invalid(format!("{} weights for {} classes", weights.len(), probs.classes())));
    }
    let floor = T::lit(PROB_FLOOR);
    let mut total = T::zero();
    for (row, &y) in probs.iter_rows().zip(labels) {
        let p =
            *row.get(y as usize).ok_or_else(|| RetimeError::invalid(format!("label {y} outside 0..={}", probs.k())))?;
        total -= weights[y as usize] * p.max(floor).ln();
    }
    Ok(total)
}

/// Activations over `frames` time steps, stored row-major as
/// `[time][height][width][channel]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationBlock<T> {
    values: Vec<T>,
    shape: [usize; 4],
}

impl<T: Scalar> ActivationBlock<T> {
    pub fn new(values: Vec<T>, shape: [usize; 4]) -> Result<Self> {
        if shape.contains(&0) {
            return Err(RetimeError::invalid(format!("activation shape {shape:?} has a zero dimension")));
        }
        let expected: usize = shape.iter().product();
        if values.len() != expected {
            return Err(RetimeError::invalid(format!(
                "{} values do not fill shape {shape:?} ({expected})",
                values.len()
            )));
        }
        Ok(ActivationBlock { values, shape })
    }

    pub fn from_fn(shape: [usize; 4], mut f: impl FnMut([usize; 4]) -> T) -> Result<Self> {
        let [t, h, w, c] = shape;
        let mut values = Vec::with_capacity(t * h * w * c);
        for ti in 0..t {
            for hi in 0..h {
                for wi in 0..w {
                    for ci in 0..c {
                        values.push(f([ti, hi, wi, ci]));
                    }
                }
            }
        }
        Self::new(values, shape)
    }

    pub fn shape(&self) -> [usize; 4] {
        self.shape
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn get(&self, idx: [usize; 4]) -> T {
        let [_, h, w, c] = self.shape;
        self.values[((idx[0] * h + idx[1]) * w + idx[2]) * c + idx[3]]
    }

    fn frame(&self, t: usize) -> &[T] {
        let len = self.shape[1] * self.shape[2] * self.shape[3];
        &self.values[t * len..(t + 1) * len]
    }
}

/// Maps `(t+1, h, w, c)` to `(t, h, w, 2c)`: each output step holds
/// `a[i]` followed by `a[i+1] - a[i]` along the channel axis.
pub fn temporal_difference_concat<T: Scalar>(a: &ActivationBlock<T>) -> Result<ActivationBlock<T>> {
    let [frames, h, w, c] = a.shape();
    if frames < 2 {
        return Err(RetimeError::invalid("temporal difference needs at least two time steps"));
    }
    let mut out = Vec::with_capacity((frames - 1) * h * w * 2 * c);
    for t in 0..frames - 1 {
        let (cur, next) = (a.frame(t), a.frame(t + 1));
        for (x, y) in cur.chunks_exact(c).zip(next.chunks_exact(c)) {
            out.extend_from_slice(x);
            out.extend(x.iter().zip(y).map(|(&x0, &x1)| x1 - x0));
        }
    }
    ActivationBlock::new(out, [frames - 1, h, w, 2 * c])
}
