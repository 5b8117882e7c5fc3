//! Synthetic ground truth: Markov-chain frame-skip sequences and the
//! slowness matrices a perfect speed predictor would emit for them.

use rand::distributions::{Distribution, Uniform};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RetimeError};
use crate::scalar::Scalar;
use crate::signals::SlownessMatrix;

/// Upper end of the change-probability prior `sigma ~ U[0, SIGMA_MAX]`.
pub const SIGMA_MAX: f64 = 0.1;
/// Default number of skip doublings (skips in {1, 2, 4}).
pub const DEFAULT_K: u32 = 2;
pub const DEFAULT_FPS: u32 = 30;

/// Seeded generator used everywhere randomness is needed.
pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent stream `stream` of `seed`; results do not depend on the
/// order streams are consumed in.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

pub fn sample_sigma<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.gen_range(0.0..=SIGMA_MAX)
}

/// Samples `m` skips from the chain over `{2^0, ..., 2^k}`: the first
/// state is uniform, later states stay with probability `1 - sigma` and
/// move to each other value with probability `sigma / k`.
pub fn sample_skips<R: Rng + ?Sized>(m: usize, k: u32, sigma: f64, rng: &mut R) -> Result<Vec<u32>> {
    if m == 0 {
        return Err(RetimeError::invalid("skip sequence length must be at least 1"));
    }
    if k == 0 || k > 30 {
        return Err(RetimeError::invalid(format!("k must be in 1..=30, got {k}")));
    }
    if !(0.0..=1.0).contains(&sigma) {
        return Err(RetimeError::invalid(format!("sigma must lie in [0, 1], got {sigma}")));
    }
    let mut chain = MarkovSkips::new(k, sigma);
    Ok((0..m).map(|_| chain.next_skip(rng)).collect())
}

/// Stateful walk over the skip chain; states are exponents `0..=k`.
struct MarkovSkips {
    k: u32,
    sigma: f64,
    state: Option<u32>,
    other: Uniform<u32>,
}

impl MarkovSkips {
    fn new(k: u32, sigma: f64) -> Self {
        MarkovSkips { k, sigma, state: None, other: Uniform::new(0, k) }
    }

    fn next_exponent<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u32 {
        let next = match self.state {
            None => rng.gen_range(0..=self.k),
            Some(cur) => {
                if rng.gen::<f64>() < self.sigma {
                    // Uniform over the k exponents other than `cur`.
                    let j = self.other.sample(rng);
                    if j >= cur {
                        j + 1
                    } else {
                        j
                    }
                } else {
                    cur
                }
            }
        };
        self.state = Some(next);
        next
    }

    fn next_skip<R: Rng + ?Sized>(&mut self, rng: &mut R) -> u32 {
        1 << self.next_exponent(rng)
    }
}

/// Frame indices `rho + [0, d1, d1 + d2, ...]` with a uniform random offset
/// `rho` in `[0, n_source - sum(skips)]`. The last index is `< n_source`
/// whenever there is slack; with zero slack it equals `sum(skips)`.
pub fn skips_to_indices<R: Rng + ?Sized>(skips: &[u32], n_source: usize, rng: &mut R) -> Result<Vec<usize>> {
    let total: usize = skips.iter().map(|&s| s as usize).sum();
    if n_source < total {
        return Err(RetimeError::invalid(format!("skips cover {total} frames but the source only has {n_source}")));
    }
    let rho = rng.gen_range(0..=n_source - total);
    let mut idx = Vec::with_capacity(skips.len() + 1);
    let mut pos = rho;
    idx.push(pos);
    for &s in skips {
        pos += s as usize;
        idx.push(pos);
    }
    Ok(idx)
}

/// Ground-truth class labels `log2(d_i)`.
pub fn skip_labels(skips: &[u32]) -> Vec<u32> {
    skips.iter().map(|s| s.trailing_zeros()).collect()
}

/// A synthetic re-timing problem with a known answer.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthCase<T> {
    pub seed: u64,
    pub k: u32,
    pub sigma: f64,
    pub skips: Vec<u32>,
    pub labels: Vec<u32>,
    /// Source frame count, `sum(skips)`.
    pub n: usize,
    /// Target frame count, `skips.len()`.
    pub l: usize,
    /// Perfect one-hot slowness, one row per source frame.
    pub slowness: SlownessMatrix<T>,
}

impl<T: Scalar> GroundTruthCase<T> {
    /// Builds a case from explicit skips. Source frames consumed by step
    /// `i` are one-hot at the column `j` with `2^(k - j) = skips[i]`.
    pub fn from_skips(skips: Vec<u32>, k: u32, seed: u64, sigma: f64) -> Result<Self> {
        if skips.is_empty() {
            return Err(RetimeError::invalid("case needs at least one skip"));
        }
        let top = 1u32.checked_shl(k).ok_or_else(|| RetimeError::invalid("k too large"))?;
        if let Some(bad) = skips.iter().find(|&&s| !s.is_power_of_two() || s > top) {
            return Err(RetimeError::invalid(format!("skip {bad} is not a power of two in [1, {top}]")));
        }
        let labels = skip_labels(&skips);
        let classes: Vec<usize> =
            skips.iter().zip(&labels).flat_map(|(&s, &y)| std::iter::repeat_n((k - y) as usize, s as usize)).collect();
        let slowness = SlownessMatrix::one_hot(k, &classes)?;
        let n = classes.len();
        let l = skips.len();
        Ok(GroundTruthCase { seed, k, sigma, skips, labels, n, l, slowness })
    }

    pub fn skips_real(&self) -> Vec<T> {
        self.skips.iter().map(|&s| T::from_count(s as usize)).collect()
    }

    pub fn to_record(&self) -> CaseRecord {
        CaseRecord {
            seed: self.seed,
            k: self.k,
            skips: self.skips.clone(),
            labels: self.labels.clone(),
            n: self.n,
            l: self.l,
        }
    }
}

/// Case with `l` Markov skips, `sigma` fixed.
pub fn make_case<T: Scalar>(l: usize, k: u32, sigma: f64, seed: u64) -> Result<GroundTruthCase<T>> {
    if l < 2 {
        return Err(RetimeError::invalid(format!("case needs l >= 2, got {l}")));
    }
    let mut rng = seeded_rng(seed);
    let skips = sample_skips(l, k, sigma, &mut rng)?;
    GroundTruthCase::from_skips(skips, k, seed, sigma)
}

/// Case covering exactly `n_source` frames. Skips are drawn until the next
/// one would overshoot; the remainder is then filled with the largest
/// powers of two that fit, so every skip stays in `{2^0, ..., 2^k}`.
/// `sigma = None` draws it from the `U[0, 0.1]` prior.
pub fn make_case_for_frames<T: Scalar>(
    n_source: usize,
    k: u32,
    sigma: Option<f64>,
    seed: u64,
) -> Result<GroundTruthCase<T>> {
    if n_source < 3 {
        return Err(RetimeError::invalid(format!("need at least 3 source frames, got {n_source}")));
    }
    if k == 0 || k > 30 {
        return Err(RetimeError::invalid(format!("k must be in 1..=30, got {k}")));
    }
    let mut rng = seeded_rng(seed);
    let sigma = match sigma {
        Some(s) if (0.0..=1.0).contains(&s) => s,
        Some(s) => return Err(RetimeError::invalid(format!("sigma must lie in [0, 1], got {s}"))),
        None => sample_sigma(&mut rng),
    };
    let mut chain = MarkovSkips::new(k, sigma);
    let mut skips = Vec::new();
    let mut covered = 0usize;
    while covered < n_source {
        let mut s = chain.next_skip(&mut rng);
        let remaining = n_source - covered;
        if s as usize > remaining {
            s = 1 << (usize::BITS - 1 - remaining.leading_zeros());
        }
        covered += s as usize;
        skips.push(s);
    }
    if skips.len() < 2 {
        // Only reachable when n_source <= 2^k: split the single skip.
        let s = skips.pop().unwrap_or(1);
        skips.extend([s / 2, s / 2]);
    }
    GroundTruthCase::from_skips(skips, k, seed, sigma)
}

/// Case for a clip of `seconds` at `fps`.
pub fn make_case_for_duration<T: Scalar>(
    seconds: f64,
    fps: u32,
    k: u32,
    sigma: Option<f64>,
    seed: u64,
) -> Result<GroundTruthCase<T>> {
    if !(seconds > 0.0) || fps == 0 {
        return Err(RetimeError::invalid(format!("duration and fps must be positive, got {seconds} s at {fps} fps")));
    }
    let n = (seconds * fps as f64).round() as usize;
    make_case_for_frames(n, k, sigma, seed)
}

/// On-disk form of a case; the slowness matrix is stored separately.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CaseRecord {
    pub seed: u64,
    pub k: u32,
    pub skips: Vec<u32>,
    pub labels: Vec<u32>,
    pub n: usize,
    pub l: usize,
}

impl CaseRecord {
    /// Checks the record's internal consistency and rebuilds the case.
    pub fn into_case<T: Scalar>(self) -> Result<GroundTruthCase<T>> {
        let case = GroundTruthCase::<T>::from_skips(self.skips.clone(), self.k, self.seed, f64::NAN)?;
        if case.labels != self.labels || case.n != self.n || case.l != self.l {
            return Err(RetimeError::invalid("case record labels, n or l disagree with its skips"));
        }
        Ok(case)
    }
}
