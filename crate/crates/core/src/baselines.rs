//! Reference re-timing methods.
//!
//! [`uniform_retime`] speeds every frame up by `n / l`. [`speednet_retime`]
//! reconstructs the per-source-frame scheme: optimize a speed-up factor for
//! every source frame so their mean hits a target, then integrate the
//! field to pick frames. The slowness matrix is read at fixed source
//! positions, so the number of emitted frames depends on how the speed-up
//! is laid out in time and is only indirectly controlled by the target.
//! [`speednet_sweep`] tries a geometric ladder of targets and keeps the
//! one closest to ground truth (an evaluation-only oracle).

use crate::adam::{Adam, AdamParams};
use crate::error::{Result, RetimeError};
use crate::eval::mae;
use crate::optimizer::{SkipSequence, SKIP_FLOOR};
use crate::scalar::Scalar;
use crate::signals::{self, SlownessMatrix};

/// Number of targets tried by [`speednet_sweep`].
pub const SWEEP_TARGETS: usize = 11;
/// Ratio between consecutive sweep targets.
pub const SWEEP_RATIO: f64 = 1.05;

/// `d = [n / l; l]`.
pub fn uniform_retime<T: Scalar>(n: usize, l: usize) -> Result<SkipSequence<T>> {
    if l >= n {
        return Err(RetimeError::InvalidTarget { source_frames: n, target: l });
    }
    if l < 2 {
        return Err(RetimeError::invalid(format!("target length must be at least 2, got {l}")));
    }
    SkipSequence::new(vec![T::from_count(n) / T::from_count(l); l])
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupConfig<T> {
    /// Weight of `(mean(u) - target)^2`.
    pub lambda_avg: T,
    pub lambda_smooth: T,
    pub adam: AdamParams<T>,
    pub steps: usize,
}

impl<T: Scalar> Default for SpeedupConfig<T> {
    fn default() -> Self {
        SpeedupConfig { lambda_avg: T::lit(10.0), lambda_smooth: T::one(), adam: AdamParams::default(), steps: 4000 }
    }
}

/// Per-source-frame speed-up factors, all `>= SKIP_FLOOR`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupField<T>(Vec<T>);

impl<T: Scalar> SpeedupField<T> {
    pub fn new(u: Vec<T>) -> Result<Self> {
        if u.is_empty() {
            return Err(RetimeError::invalid("speed-up field is empty"));
        }
        let floor = T::lit(SKIP_FLOOR);
        if let Some(v) = u.iter().find(|v| !v.is_finite() || **v < floor) {
            return Err(RetimeError::invalid(format!("speed-up {v} is below the floor {SKIP_FLOOR}")));
        }
        Ok(SpeedupField(u))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn mean(&self) -> T {
        self.0.iter().copied().sum::<T>() / T::from_count(self.0.len())
    }

    /// Integration walk `t_0 = 0`, `t_{s+1} = t_s + u[round(t_s)]` while
    /// `t < n`; returns the visited positions.
    pub fn walk(&self, n: usize) -> Vec<T> {
        let n_t = T::from_count(n);
        let last = self.0.len() - 1;
        let mut t = T::zero();
        let mut out = Vec::new();
        while t < n_t {
            out.push(t);
            let idx = t.round().to_usize().unwrap_or(last).min(last);
            t += self.0[idx];
        }
        out
    }
}

/// Output of one per-frame speed-up run.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedupRetime<T> {
    pub field: SpeedupField<T>,
    /// Positions emitted by the integration walk.
    pub positions: Vec<T>,
    /// Consecutive differences of `positions`.
    pub skips: Vec<T>,
}

/// Optimizes one speed-up factor per source frame and integrates it.
pub fn speednet_retime<T: Scalar>(
    p: &SlownessMatrix<T>,
    n: usize,
    target_speedup: T,
    config: &SpeedupConfig<T>,
) -> Result<SpeedupRetime<T>> {
    if !(target_speedup >= T::one()) || !target_speedup.is_finite() {
        return Err(RetimeError::invalid(format!("target speed-up must be >= 1, got {target_speedup}")));
    }
    if n < 2 {
        return Err(RetimeError::invalid("need at least 2 source frames"));
    }
    if config.steps == 0 {
        return Err(RetimeError::invalid("steps must be at least 1"));
    }
    let resampled;
    let p = if p.rows() == n || p.rows() < 2 {
        p
    } else {
        resampled = signals::interpolate_rows(p, n)?;
        &resampled
    };
    let field = optimize_field(p, n, target_speedup, config);
    let positions = field.walk(n);
    let skips = positions.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(SpeedupRetime { field, positions, skips })
}

fn optimize_field<T: Scalar>(p: &SlownessMatrix<T>, m: usize, target: T, config: &SpeedupConfig<T>) -> SpeedupField<T> {
    let two = T::lit(2.0);
    let caps: Vec<T> = (0..p.classes()).map(|j| p.class_skip(j)).collect();
    let m_t = T::from_count(m);
    let floor = T::lit(SKIP_FLOOR);
    let mut u = vec![target; m];
    let mut grad = vec![T::zero(); m];
    let mut adam = Adam::new(config.adam, m);
    for _ in 0..config.steps {
        let mean = u.iter().copied().sum::<T>() / m_t;
        let g_avg = config.lambda_avg * two * (mean - target) / m_t;
        for i in 0..m {
            let row = p.row(i.min(p.rows() - 1));
            let mut g = g_avg;
            for (&w, &cap) in row.iter().zip(&caps) {
                g += two * w * (u[i] - cap).max(T::zero());
            }
            grad[i] = g;
        }
        for i in 0..m.saturating_sub(1) {
            let diff = u[i + 1] - u[i];
            grad[i] -= config.lambda_smooth * two * diff;
            grad[i + 1] += config.lambda_smooth * two * diff;
        }
        adam.step(&mut u, &grad);
        for x in u.iter_mut() {
            *x = x.max(floor);
        }
    }
    SpeedupField(u)
}

/// Truncates or pads (with the final skip) to exactly `l` entries. An
/// empty input becomes `l` copies of `fallback`.
pub fn fit_length<T: Scalar>(skips: &[T], l: usize, fallback: T) -> Vec<T> {
    let fill = skips.last().copied().unwrap_or(fallback);
    let mut out: Vec<T> = skips.iter().copied().take(l).collect();
    out.resize(l, fill);
    out
}

/// Geometric ladder `(n / l) * 1.05^t`, `t = 0..=10`.
pub fn sweep_targets<T: Scalar>(n: usize, l: usize) -> Vec<T> {
    let base = T::from_count(n) / T::from_count(l);
    let ratio = T::lit(SWEEP_RATIO);
    (0..SWEEP_TARGETS as i32).map(|t| base * ratio.powi(t)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCandidate<T> {
    pub target_speedup: T,
    /// Skips emitted by the walk before length fitting.
    pub emitted: usize,
    pub skips: Vec<T>,
    pub mae: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome<T> {
    /// Every candidate, in target order.
    pub candidates: Vec<SweepCandidate<T>>,
    pub best: usize,
}

impl<T: Scalar> SweepOutcome<T> {
    pub fn best(&self) -> &SweepCandidate<T> {
        &self.candidates[self.best]
    }

    pub fn targets(&self) -> Vec<T> {
        self.candidates.iter().map(|c| c.target_speedup).collect()
    }
}

/// Runs [`speednet_retime`] for every sweep target, fits each result to
/// length `l`, and keeps the one with the lowest MAE against `ground_truth`.
pub fn speednet_sweep<T: Scalar>(
    p: &SlownessMatrix<T>,
    n: usize,
    l: usize,
    ground_truth: &[T],
    config: &SpeedupConfig<T>,
) -> Result<SweepOutcome<T>> {
    if ground_truth.len() != l {
        return Err(RetimeError::invalid(format!("ground truth has {} skips, expected l = {l}", ground_truth.len())));
    }
    if l == 0 || l >= n {
        return Err(RetimeError::InvalidTarget { source_frames: n, target: l });
    }
    let targets = sweep_targets::<T>(n, l);
    let mut candidates = Vec::with_capacity(targets.len());
    for &target in &targets {
        let run = speednet_retime(p, n, target, config)?;
        let skips = fit_length(&run.skips, l, T::from_count(n));
        let err = mae(&skips, ground_truth)?;
        candidates.push(SweepCandidate { target_speedup: target, emitted: run.skips.len(), skips, mae: err });
    }
    let best = candidates
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.mae.partial_cmp(&b.1.mae).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    Ok(SweepOutcome { candidates, best })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn uniform_examples() {
        assert_eq!(uniform_retime::<f64>(100, 25).unwrap().as_slice(), &[4.0; 25]);
        assert_eq!(uniform_retime::<f64>(90, 60).unwrap().as_slice(), &[1.5; 60]);
        assert!(matches!(uniform_retime::<f64>(10, 10), Err(RetimeError::InvalidTarget { .. })));
        assert!((uniform_retime::<f64>(97, 13).unwrap().total() - 97.0).abs() < 1e-12);
    }

    #[test]
    fn walk_example() {
        let u = SpeedupField::new(vec![2.0_f64; 8]).unwrap();
        assert_eq!(u.walk(8), vec![0.0, 2.0, 4.0, 6.0]);
    }

    #[test]
    fn walk_length_depends_on_layout() {
        // Same mean speed-up 2.5, different placement in time.
        let n = 40;
        let front: Vec<f64> = (0..n).map(|i| if i < 20 { 4.0 } else { 1.0 }).collect();
        let back: Vec<f64> = (0..n).map(|i| if i < 20 { 1.0 } else { 4.0 }).collect();
        let a = SpeedupField::new(front).unwrap();
        let b = SpeedupField::new(back).unwrap();
        assert_eq!(a.mean(), b.mean());
        // Front: 5 steps of 4 reach 20, then 20 steps of 1. Back: 20 + 5.
        assert_eq!(a.walk(n).len(), 25);
        assert_eq!(b.walk(n).len(), 25);
        let spiky: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 4.0 } else { 1.0 }).collect();
        let c = SpeedupField::new(spiky).unwrap();
        assert_eq!(c.mean(), 2.5);
        // Landing only on even frames sees 4 every time.
        assert_eq!(c.walk(n).len(), 10);
    }

    #[test]
    fn feasible_constant_optimum() {
        let p = SlownessMatrix::<f64>::one_hot(2, &vec![0; 64]).unwrap();
        let r = speednet_retime(&p, 64, 4.0, &SpeedupConfig::default()).unwrap();
        assert!(r.field.as_slice().iter().all(|&u| (u - 4.0).abs() < 1e-9));
        assert_eq!(r.skips, vec![4.0; 15]);
    }

    #[test]
    fn rejects_target_below_one() {
        let p = SlownessMatrix::<f64>::one_hot(2, &[0; 8]).unwrap();
        assert!(speednet_retime(&p, 8, 0.5, &SpeedupConfig::default()).is_err());
    }

    #[test]
    fn fit_length_truncates_and_pads() {
        assert_eq!(fit_length(&[1.0, 2.0, 3.0], 2, 9.0), vec![1.0, 2.0]);
        assert_eq!(fit_length(&[1.0, 2.0], 4, 9.0), vec![1.0, 2.0, 2.0, 2.0]);
        assert_eq!(fit_length(&[], 2, 9.0), vec![9.0, 9.0]);
    }

    #[test]
    fn sweep_ladder() {
        let t = sweep_targets::<f64>(200, 100);
        assert_eq!(t.len(), 11);
        assert_eq!(t[0], 2.0);
        assert_abs_diff_eq!(t[1], 2.1, epsilon = 1e-12);
        assert_abs_diff_eq!(t[2], 2.205, epsilon = 1e-12);
        assert_abs_diff_eq!(t[10], 2.0 * 1.05f64.powi(10), epsilon = 1e-12);
        assert_abs_diff_eq!(t[10], 3.2578, epsilon = 1e-4);
    }

    #[test]
    fn sweep_picks_minimum() {
        let skips = vec![4u32, 4, 2, 2, 1, 1, 2, 4, 4, 4];
        let classes: Vec<usize> =
            skips.iter().flat_map(|&s| std::iter::repeat_n(2 - s.trailing_zeros() as usize, s as usize)).collect();
        let n = classes.len();
        let p = SlownessMatrix::<f64>::one_hot(2, &classes).unwrap();
        let gt: Vec<f64> = skips.iter().map(|&s| s as f64).collect();
        let cfg = SpeedupConfig { steps: 300, ..SpeedupConfig::default() };
        let out = speednet_sweep(&p, n, skips.len(), &gt, &cfg).unwrap();
        assert_eq!(out.candidates.len(), 11);
        let best = out.best().mae;
        assert!(out.candidates.iter().all(|c| best <= c.mae));
        assert!(out.candidates.iter().all(|c| c.skips.len() == skips.len()));
    }
}
