//! Duration-exact re-timing by penalty-based gradient descent.
//!
//! The variable is the real-valued skip sequence `d` (one entry per output
//! frame). Output frame positions are the prefix sums
//! `nu = [0, d_1, d_1 + d_2, ..., sum(d)]`, and the guidance (slowness
//! matrix or re-timing signal) is read at `nu_i` by linear interpolation.
//! The total objective is
//!
//! ```text
//! L = L_guide + w_sum * (sum(d) - n)^2
//!             + w_min * sum max(0, 1 - d_i)
//!             + w_smooth * sum (d_{i+1} - d_i)^2
//! ```
//!
//! where `L_guide` is either the slowness hinge
//! `sum_i sum_j p[nu_i, j] * max(0, d_i - 2^(k - j))^2` or the signal hinge
//! `sum_i max(0, d_i - lambda * s[nu_i] - 1)^2`, both over `i < l`.
//!
//! Because `nu_i` depends on every `d_t` with `t <= i`, the guide term
//! contributes to `d_t` through all later positions. The gradient collects
//! `dL/dnu_i` first and folds it back with one reverse cumulative sum.

use serde::{Deserialize, Serialize};

use crate::adam::{Adam, AdamParams};
use crate::error::{Result, RetimeError};
use crate::interp;
use crate::scalar::Scalar;
use crate::signals::{self, RetimeSignal, SlownessMatrix};

/// Lower bound every skip is projected onto after each descent step.
pub const SKIP_FLOOR: f64 = 0.1;

/// Skip sequence between consecutive output frames.
#[derive(Debug, Clone, PartialEq)]
pub struct SkipSequence<T>(Vec<T>);

impl<T: Scalar> SkipSequence<T> {
    /// Requires at least two entries, all finite and `>= SKIP_FLOOR`.
    pub fn new(d: Vec<T>) -> Result<Self> {
        if d.len() < 2 {
            return Err(RetimeError::invalid(format!("skip sequence needs length >= 2, got {}", d.len())));
        }
        let floor = T::lit(SKIP_FLOOR);
        if let Some(v) = d.iter().find(|v| !v.is_finite() || **v < floor) {
            return Err(RetimeError::invalid(format!("skip {v} is below the floor {SKIP_FLOOR}")));
        }
        Ok(SkipSequence(d))
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> T {
        self.0.iter().copied().sum()
    }

    /// `[0, d_1, d_1 + d_2, ..., sum(d)]`.
    pub fn positions(&self) -> Vec<T> {
        positions(&self.0)
    }
}

pub fn positions<T: Scalar>(d: &[T]) -> Vec<T> {
    let mut nu = Vec::with_capacity(d.len() + 1);
    let mut acc = T::zero();
    nu.push(acc);
    for &x in d {
        acc += x;
        nu.push(acc);
    }
    nu
}

/// Whether the guide term is differentiated through the lookup positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexGradient {
    /// Differentiate through the interpolation weights as well.
    Full,
    /// Treat `p[nu_i]` (or `s[nu_i]`) as constant. Descent with the full
    /// gradient tends to stall on piecewise-constant guides, where the
    /// position slopes at block edges pile up along the prefix sums.
    #[default]
    Stop,
}

/// Strength `lambda` of a re-timing signal.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SignalStrength<T> {
    /// `lambda = (n / l) / mean(s)`.
    #[default]
    Auto,
    Fixed(T),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetimeConfig<T> {
    pub lambda_sum: T,
    pub lambda_min: T,
    pub lambda_smooth: T,
    pub signal_strength: SignalStrength<T>,
    pub adam: AdamParams<T>,
    pub steps: usize,
    pub gap_threshold: T,
    pub index_gradient: IndexGradient,
}

impl<T: Scalar> Default for RetimeConfig<T> {
    fn default() -> Self {
        RetimeConfig {
            lambda_sum: T::one(),
            lambda_min: T::lit(10.0),
            lambda_smooth: T::one(),
            signal_strength: SignalStrength::Auto,
            adam: AdamParams::default(),
            steps: 4000,
            gap_threshold: T::lit(signals::DEFAULT_GAP_THRESHOLD),
            index_gradient: IndexGradient::Stop,
        }
    }
}

impl<T: Scalar> RetimeConfig<T> {
    pub fn validate(&self) -> Result<()> {
        let weights =
            [("lambda_sum", self.lambda_sum), ("lambda_min", self.lambda_min), ("lambda_smooth", self.lambda_smooth)];
        for (name, w) in weights {
            if !w.is_finite() || w < T::zero() {
                return Err(RetimeError::invalid(format!("{name} must be finite and non-negative, got {w}")));
            }
        }
        if let SignalStrength::Fixed(l) = self.signal_strength {
            if !l.is_finite() || l <= T::zero() {
                return Err(RetimeError::invalid(format!("signal strength must be positive, got {l}")));
            }
        }
        let a = &self.adam;
        if !a.learning_rate.is_finite() || a.learning_rate <= T::zero() {
            return Err(RetimeError::invalid("learning rate must be positive"));
        }
        let unit = |b: T| b >= T::zero() && b < T::one();
        if !unit(a.beta1) || !unit(a.beta2) {
            return Err(RetimeError::invalid("adam betas must lie in [0, 1)"));
        }
        if !(a.epsilon > T::zero()) {
            return Err(RetimeError::invalid("adam epsilon must be positive"));
        }
        if self.steps == 0 {
            return Err(RetimeError::invalid("steps must be at least 1"));
        }
        if !(self.gap_threshold > T::zero() && self.gap_threshold < T::one()) {
            return Err(RetimeError::invalid("gap threshold must lie in (0, 1)"));
        }
        Ok(())
    }
}

/// What steers the per-frame speed-up.
#[derive(Debug, Clone, Copy)]
pub enum Guide<'a, T> {
    Slowness(&'a SlownessMatrix<T>),
    Signal(&'a RetimeSignal<T>),
}

/// Final value of each objective term, unweighted, plus the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub guide: f64,
    pub sum: f64,
    pub min: f64,
    pub smooth: f64,
    pub total: f64,
}

/// `|sum(d) - n|^2`.
pub fn loss_sum<T: Scalar>(d: &[T], n: usize) -> T {
    let e = d.iter().copied().sum::<T>() - T::from_count(n);
    e * e
}

/// `sum max(0, 1 - d_i)`.
pub fn loss_min<T: Scalar>(d: &[T]) -> T {
    d.iter().map(|&x| (T::one() - x).max(T::zero())).sum()
}

/// `sum (d_{i+1} - d_i)^2`.
pub fn loss_smooth<T: Scalar>(d: &[T]) -> T {
    d.windows(2).map(|w| (w[1] - w[0]) * (w[1] - w[0])).sum()
}

/// Slowness hinge, reading `p` at the running positions of `d`. A matrix
/// whose row count is neither `n` nor `n - 1` is first resampled to `n - 1`.
pub fn loss_speediness<T: Scalar>(d: &[T], p: &SlownessMatrix<T>, n: usize) -> Result<T> {
    let p = rows_for_source(p, n)?;
    let term = GuideTerm::slowness(&p);
    Ok(term.value(d))
}

/// Signal hinge for the zero-means-no-speedup allowance of `signal`.
pub fn loss_signal<T: Scalar>(d: &[T], signal: &RetimeSignal<T>, lambda: T) -> T {
    GuideTerm::Signal { allowance: signal.speedup_allowance(), lambda }.value(d)
}

/// Default signal strength `(n / l) / mean(s)`.
pub fn default_lambda<T: Scalar>(n: usize, l: usize, signal: &RetimeSignal<T>) -> Result<T> {
    lambda_for_mean(n, l, signal.mean_allowance())
}

fn lambda_for_mean<T: Scalar>(n: usize, l: usize, mean: T) -> Result<T> {
    if l == 0 {
        return Err(RetimeError::invalid("target length must be positive"));
    }
    if !(mean > T::zero()) {
        return Err(RetimeError::DegenerateSignal(
            "normalized signal has zero mean, so no frame may be sped up; use uniform re-timing or another signal"
                .into(),
        ));
    }
    Ok(T::from_count(n) / T::from_count(l) / mean)
}

fn rows_for_source<T: Scalar>(p: &SlownessMatrix<T>, n: usize) -> Result<SlownessMatrix<T>> {
    if p.rows() == n || p.rows() + 1 == n || p.rows() < 2 || n < 3 {
        Ok(p.clone())
    } else {
        signals::interpolate_rows(p, n - 1)
    }
}

fn samples_for_source<T: Scalar>(s: Vec<T>, n: usize) -> Vec<T> {
    if s.len() == n || s.len() + 1 == n || s.len() < 2 || n < 3 {
        s
    } else {
        interp::resample(&s, n - 1)
    }
}

/// Guide term with its lookup tables laid out per column.
#[derive(Debug, Clone)]
enum GuideTerm<T> {
    Slowness { columns: Vec<Vec<T>>, caps: Vec<T> },
    Signal { allowance: Vec<T>, lambda: T },
}

impl<T: Scalar> GuideTerm<T> {
    fn slowness(p: &SlownessMatrix<T>) -> Self {
        GuideTerm::Slowness {
            columns: (0..p.classes()).map(|j| p.column(j)).collect(),
            caps: (0..p.classes()).map(|j| p.class_skip(j)).collect(),
        }
    }

    fn value(&self, d: &[T]) -> T {
        let mut nu = T::zero();
        let mut total = T::zero();
        for &di in d.iter().take(d.len().saturating_sub(1)) {
            nu += di;
            total += self.at(di, nu).0;
        }
        total
    }

    /// Term value at one position with partials w.r.t. `d_i` and `nu_i`.
    fn at(&self, di: T, nu: T) -> (T, T, T) {
        let two = T::lit(2.0);
        match self {
            GuideTerm::Slowness { columns, caps } => {
                let (mut v, mut gd, mut gnu) = (T::zero(), T::zero(), T::zero());
                for (col, &cap) in columns.iter().zip(caps) {
                    let h = (di - cap).max(T::zero());
                    if h > T::zero() {
                        let (w, slope) = interp::sample(col, nu);
                        v += w * h * h;
                        gd += two * w * h;
                        gnu += slope * h * h;
                    }
                }
                (v, gd, gnu)
            }
            GuideTerm::Signal { allowance, lambda } => {
                let (s, slope) = interp::sample(allowance, nu);
                let h = (di - *lambda * s - T::one()).max(T::zero());
                (h * h, two * h, -two * h * *lambda * slope)
            }
        }
    }
}

/// Objective bound to one problem instance.
#[derive(Debug, Clone)]
pub struct Objective<T> {
    guide: GuideTerm<T>,
    n: usize,
    lambda_sum: T,
    lambda_min: T,
    lambda_smooth: T,
    index_gradient: IndexGradient,
    signal_lambda: Option<T>,
}

impl<T: Scalar> Objective<T> {
    /// Binds the guide as given (no sharpening). `l` is only used to
    /// resolve an automatic signal strength.
    pub fn new(guide: Guide<'_, T>, n: usize, l: usize, config: &RetimeConfig<T>) -> Result<Self> {
        config.validate()?;
        let (guide, signal_lambda) = match guide {
            Guide::Slowness(p) => (GuideTerm::slowness(&rows_for_source(p, n)?), None),
            Guide::Signal(s) => {
                let allowance = samples_for_source(s.speedup_allowance(), n);
                let lambda = match config.signal_strength {
                    SignalStrength::Fixed(v) => v,
                    SignalStrength::Auto => default_lambda(n, l, s)?,
                };
                (GuideTerm::Signal { allowance, lambda }, Some(lambda))
            }
        };
        Ok(Objective {
            guide,
            n,
            lambda_sum: config.lambda_sum,
            lambda_min: config.lambda_min,
            lambda_smooth: config.lambda_smooth,
            index_gradient: config.index_gradient,
            signal_lambda,
        })
    }

    /// Signal strength in effect, when the guide is a signal.
    pub fn signal_lambda(&self) -> Option<T> {
        self.signal_lambda
    }

    pub fn value(&self, d: &[T]) -> T {
        self.terms(d).3
    }

    fn terms(&self, d: &[T]) -> (T, T, T, T, T) {
        let guide = self.guide.value(d);
        let sum = loss_sum(d, self.n);
        let min = loss_min(d);
        let smooth = loss_smooth(d);
        let total = guide + self.lambda_sum * sum + self.lambda_min * min + self.lambda_smooth * smooth;
        (guide, sum, min, total, smooth)
    }

    pub fn term_values(&self, d: &[T]) -> LossTerms {
        let (guide, sum, min, total, smooth) = self.terms(d);
        LossTerms {
            guide: guide.as_f64(),
            sum: sum.as_f64(),
            min: min.as_f64(),
            smooth: smooth.as_f64(),
            total: total.as_f64(),
        }
    }

    /// Total loss; writes `dL/dd` into `grad`.
    pub fn value_and_gradient(&self, d: &[T], grad: &mut [T]) -> T {
        let l = d.len();
        assert_eq!(grad.len(), l);
        let two = T::lit(2.0);
        grad.iter_mut().for_each(|g| *g = T::zero());

        // Guide term: direct partials into grad, position partials into a
        // running suffix sum walked backwards.
        let mut guide = T::zero();
        let mut nu = T::zero();
        let mut nu_partials = vec![T::zero(); l];
        for i in 0..l.saturating_sub(1) {
            nu += d[i];
            let (v, gd, gnu) = self.guide.at(d[i], nu);
            guide += v;
            grad[i] += gd;
            nu_partials[i] = gnu;
        }
        if self.index_gradient == IndexGradient::Full {
            let mut suffix = T::zero();
            for i in (0..l).rev() {
                suffix += nu_partials[i];
                grad[i] += suffix;
            }
        }

        let total_d: T = d.iter().copied().sum();
        let miss = total_d - T::from_count(self.n);
        let g_sum = self.lambda_sum * two * miss;
        let mut min = T::zero();
        for (g, &x) in grad.iter_mut().zip(d) {
            *g += g_sum;
            if x < T::one() {
                min += T::one() - x;
                *g -= self.lambda_min;
            }
        }
        let mut smooth = T::zero();
        for i in 0..l.saturating_sub(1) {
            let diff = d[i + 1] - d[i];
            smooth += diff * diff;
            grad[i] -= self.lambda_smooth * two * diff;
            grad[i + 1] += self.lambda_smooth * two * diff;
        }
        guide + self.lambda_sum * miss * miss + self.lambda_min * min + self.lambda_smooth * smooth
    }
}

/// Total objective and its gradient for `d` (the guide is used as given).
pub fn total_loss_and_gradient<T: Scalar>(
    d: &[T],
    guide: Guide<'_, T>,
    n: usize,
    config: &RetimeConfig<T>,
) -> Result<(T, Vec<T>)> {
    let obj = Objective::new(guide, n, d.len(), config)?;
    let mut grad = vec![T::zero(); d.len()];
    let v = obj.value_and_gradient(d, &mut grad);
    Ok((v, grad))
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetimeResult<T> {
    pub d_hat: Vec<T>,
    /// `[0, d_1, ..., sum(d)]`, length `l + 1`.
    pub nu: Vec<T>,
    pub frame_indices: Vec<usize>,
    /// Total loss before every step, then once after the last.
    pub loss_trace: Vec<T>,
    pub term_values: LossTerms,
    /// `|sum(d) - n|`.
    pub duration_error: T,
    pub signal_lambda: Option<T>,
}

/// Optimizes `l` skips over `n` source frames, starting from the uniform
/// subsampling `n / l`. Slowness guides are sharpened once beforehand.
pub fn optimize<T: Scalar>(
    guide: Guide<'_, T>,
    n: usize,
    l: usize,
    config: &RetimeConfig<T>,
) -> Result<RetimeResult<T>> {
    if l >= n {
        return Err(RetimeError::InvalidTarget { source_frames: n, target: l });
    }
    if l < 2 {
        return Err(RetimeError::invalid(format!("target length must be at least 2, got {l}")));
    }
    config.validate()?;
    let sharpened;
    let guide = match guide {
        Guide::Slowness(p) => {
            sharpened = signals::sharpen(p, config.gap_threshold);
            Guide::Slowness(&sharpened)
        }
        g => g,
    };
    let obj = Objective::new(guide, n, l, config)?;

    let floor = T::lit(SKIP_FLOOR);
    let mut d = vec![T::from_count(n) / T::from_count(l); l];
    let mut grad = vec![T::zero(); l];
    let mut adam = Adam::new(config.adam, l);
    let mut loss_trace = Vec::with_capacity(config.steps + 1);
    for _ in 0..config.steps {
        loss_trace.push(obj.value_and_gradient(&d, &mut grad));
        adam.step(&mut d, &grad);
        for x in d.iter_mut() {
            *x = x.max(floor);
        }
    }
    loss_trace.push(obj.value(&d));

    let nu = positions(&d);
    let frame_indices = to_frame_indices(&nu, n);
    let duration_error = (nu[l] - T::from_count(n)).abs();
    Ok(RetimeResult {
        term_values: obj.term_values(&d),
        signal_lambda: obj.signal_lambda(),
        d_hat: d,
        nu,
        frame_indices,
        loss_trace,
        duration_error,
    })
}

/// Rounds positions to frame numbers in `[0, n - 1]`, kept non-decreasing.
pub fn to_frame_indices<T: Scalar>(nu: &[T], n: usize) -> Vec<usize> {
    let last = n.saturating_sub(1);
    let mut prev = 0usize;
    nu.iter()
        .map(|&x| {
            let r = x.round().max(T::zero()).to_usize().unwrap_or(last).min(last);
            prev = prev.max(r);
            prev
        })
        .collect()
}
