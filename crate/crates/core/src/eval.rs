//! Re-timing accuracy experiment: synthetic ground truth, every method on
//! the same cases, mean absolute skip error per clip duration.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::adam::AdamParams;
use crate::baselines::{self, SpeedupConfig};
use crate::error::{Result, RetimeError};
use crate::optimizer::{self, Guide, RetimeConfig};
use crate::scalar::Scalar;
use crate::synth::{self, GroundTruthCase};

/// `(1 / l) * sum |a_i - b_i|`.
pub fn mae<T: Scalar>(predicted: &[T], truth: &[T]) -> Result<T> {
    if predicted.len() != truth.len() {
        return Err(RetimeError::invalid(format!(
            "MAE needs equal lengths, got {} and {}",
            predicted.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(RetimeError::invalid("MAE of empty sequences"));
    }
    let total: T = predicted.iter().zip(truth).map(|(&a, &b)| (a - b).abs()).sum();
    Ok(total / T::from_count(truth.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// The prefix-sum penalty optimizer.
    Ours,
    SpeednetSweep,
    Uniform,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Ours, Method::SpeednetSweep, Method::Uniform];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Ours => "ours",
            Method::SpeednetSweep => "speednet_sweep",
            Method::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = RetimeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "ours" => Ok(Method::Ours),
            "speednet_sweep" | "speednet" => Ok(Method::SpeednetSweep),
            "uniform" => Ok(Method::Uniform),
            other => {
                Err(RetimeError::Parse(format!("unknown method {other:?} (expected ours, speednet_sweep or uniform)")))
            }
        }
    }
}

/// Relative duration tolerance `|sum(d) - n| <= DURATION_TOLERANCE * n`.
pub const DURATION_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SuiteConfig {
    pub durations_seconds: Vec<f64>,
    pub cases_per_duration: usize,
    pub fps: u32,
    pub k: u32,
    pub methods: Vec<Method>,
    pub seed: u64,
    /// Fixed change probability; `None` samples it per case.
    pub sigma: Option<f64>,
    pub lambda_sum: f64,
    pub lambda_min: f64,
    pub lambda_smooth: f64,
    pub learning_rate: f64,
    pub steps: usize,
    pub baseline_lambda_avg: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            durations_seconds: vec![20.0, 60.0, 180.0],
            cases_per_duration: 50,
            fps: synth::DEFAULT_FPS,
            k: synth::DEFAULT_K,
            methods: Method::ALL.to_vec(),
            seed: 0,
            sigma: None,
            lambda_sum: 1.0,
            lambda_min: 10.0,
            lambda_smooth: 1.0,
            learning_rate: 0.01,
            steps: 4000,
            baseline_lambda_avg: 10.0,
        }
    }
}

impl SuiteConfig {
    pub fn validate(&self) -> Result<()> {
        if self.durations_seconds.is_empty() {
            return Err(RetimeError::invalid("suite needs at least one duration"));
        }
        if let Some(d) = self.durations_seconds.iter().find(|d| !(**d > 0.0) || !d.is_finite()) {
            return Err(RetimeError::invalid(format!("duration {d} must be positive")));
        }
        if self.cases_per_duration == 0 {
            return Err(RetimeError::invalid("cases_per_duration must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(RetimeError::invalid("suite needs at least one method"));
        }
        if self.fps == 0 {
            return Err(RetimeError::invalid("fps must be positive"));
        }
        self.retime_config::<f64>().validate()
    }

    pub fn retime_config<T: Scalar>(&self) -> RetimeConfig<T> {
        let defaults = RetimeConfig::<T>::default();
        RetimeConfig {
            lambda_sum: T::lit(self.lambda_sum),
            lambda_min: T::lit(self.lambda_min),
            lambda_smooth: T::lit(self.lambda_smooth),
            adam: AdamParams { learning_rate: T::lit(self.learning_rate), ..defaults.adam },
            steps: self.steps,
            ..defaults
        }
    }

    pub fn speedup_config<T: Scalar>(&self) -> SpeedupConfig<T> {
        SpeedupConfig {
            lambda_avg: T::lit(self.baseline_lambda_avg),
            lambda_smooth: T::lit(self.lambda_smooth),
            adam: AdamParams { learning_rate: T::lit(self.learning_rate), ..AdamParams::default() },
            steps: self.steps,
        }
    }

    /// Seed for case `index` of duration slot `slot`; independent of
    /// evaluation order.
    pub fn case_seed(&self, slot: usize, index: usize) -> u64 {
        use rand::RngCore;
        let stream = ((slot as u64) << 32) | index as u64;
        synth::stream_rng(self.seed, stream).next_u64()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub method: Method,
    pub duration_seconds: f64,
    pub case_index: usize,
    pub seed: u64,
    pub sigma: f64,
    pub n: usize,
    pub l: usize,
    pub mae: f64,
    /// `|sum(d_hat) - n|` of the length-`l` prediction.
    pub duration_error: f64,
    pub within_duration_tolerance: bool,
    /// Frames emitted by the method before any length fitting.
    pub emitted_skips: usize,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub duration_seconds: f64,
    pub cases: usize,
    pub mean_mae: f64,
    pub mean_duration_error: f64,
    /// Fraction of cases with `|sum(d_hat) - n| > 0.01 n`.
    pub duration_violation_rate: f64,
    pub mean_wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: SuiteConfig,
    pub summaries: Vec<MethodSummary>,
    pub cases: Vec<CaseResult>,
}

impl ExperimentReport {
    /// Aggregates per-case rows into per-(method, duration) summaries.
    pub fn from_cases(config: &SuiteConfig, cases: Vec<CaseResult>) -> Self {
        let mut summaries = Vec::new();
        let mut durations: Vec<f64> = Vec::new();
        for c in &cases {
            if !durations.contains(&c.duration_seconds) {
                durations.push(c.duration_seconds);
            }
        }
        for seconds in durations {
            for &method in &config.methods {
                let rows: Vec<&CaseResult> =
                    cases.iter().filter(|c| c.method == method && c.duration_seconds == seconds).collect();
                let count = rows.len() as f64;
                let mean = |f: fn(&CaseResult) -> f64| rows.iter().map(|c| f(c)).sum::<f64>() / count;
                summaries.push(MethodSummary {
                    method,
                    duration_seconds: seconds,
                    cases: rows.len(),
                    mean_mae: mean(|c| c.mae),
                    mean_duration_error: mean(|c| c.duration_error),
                    duration_violation_rate: mean(|c| if c.within_duration_tolerance { 0.0 } else { 1.0 }),
                    mean_wall_time_ms: mean(|c| c.wall_time_ms),
                });
            }
        }
        ExperimentReport { config: config.clone(), summaries, cases }
    }

    pub fn summary(&self, method: Method, duration_seconds: f64) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method && s.duration_seconds == duration_seconds)
    }

    pub fn mean_mae(&self, method: Method, duration_seconds: f64) -> Option<f64> {
        self.summary(method, duration_seconds).map(|s| s.mean_mae)
    }

    /// `method,duration_seconds,cases,mean_mae,mean_duration_error,duration_violation_rate,mean_wall_time_ms`
    pub fn summary_csv(&self) -> String {
        let mut out = String::from(
            "method,duration_seconds,cases,mean_mae,mean_duration_error,duration_violation_rate,mean_wall_time_ms\n",
        );
        for s in &self.summaries {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                s.method,
                s.duration_seconds,
                s.cases,
                s.mean_mae,
                s.mean_duration_error,
                s.duration_violation_rate,
                s.mean_wall_time_ms
            ));
        }
        out
    }

    /// Report with wall times zeroed, for reproducibility comparisons.
    pub fn without_timings(&self) -> ExperimentReport {
        let mut r = self.clone();
        r.cases.iter_mut().for_each(|c| c.wall_time_ms = 0.0);
        r.summaries.iter_mut().for_each(|s| s.mean_wall_time_ms = 0.0);
        r
    }
}

/// Prediction of one method on one case, before scoring.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutput<T> {
    pub skips: Vec<T>,
    pub emitted_skips: usize,
}

/// Runs `method` on `case`.
pub fn run_method<T: Scalar>(
    method: Method,
    case: &GroundTruthCase<T>,
    config: &SuiteConfig,
) -> Result<MethodOutput<T>> {
    let (n, l) = (case.n, case.l);
    match method {
        Method::Uniform => {
            let d = baselines::uniform_retime::<T>(n, l)?.into_vec();
            Ok(MethodOutput { emitted_skips: d.len(), skips: d })
        }
        Method::Ours => {
            let r = optimizer::optimize(Guide::Slowness(&case.slowness), n, l, &config.retime_config())?;
            Ok(MethodOutput { emitted_skips: r.d_hat.len(), skips: r.d_hat })
        }
        Method::SpeednetSweep => {
            let truth = case.skips_real();
            let out = baselines::speednet_sweep(&case.slowness, n, l, &truth, &config.speedup_config())?;
            let best = out.best();
            Ok(MethodOutput { emitted_skips: best.emitted, skips: best.skips.clone() })
        }
    }
}

/// Scores every configured method on one case. `duration_seconds` and
/// `case_index` only label the rows.
pub fn evaluate_case<T: Scalar>(
    case: &GroundTruthCase<T>,
    config: &SuiteConfig,
    duration_seconds: f64,
    case_index: usize,
) -> Result<Vec<CaseResult>> {
    let truth = case.skips_real();
    config
        .methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let out = run_method(method, case, config)?;
            let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;
            let err = mae(&out.skips, &truth)?.as_f64();
            let total: f64 = out.skips.iter().map(|v| v.as_f64()).sum();
            let duration_error = (total - case.n as f64).abs();
            Ok(CaseResult {
                method,
                duration_seconds,
                case_index,
                seed: case.seed,
                sigma: case.sigma,
                n: case.n,
                l: case.l,
                mae: err,
                duration_error,
                within_duration_tolerance: duration_error <= DURATION_TOLERANCE * case.n as f64,
                emitted_skips: out.emitted_skips,
                wall_time_ms,
            })
        })
        .collect()
}

/// Runs every configured method on `cases_per_duration` synthetic clips per
/// duration. Cases are generated once and shared by all methods; per-case
/// seeds derive from `(seed, duration slot, case index)`, so results do not
/// depend on scheduling.
pub fn run_suite<T: Scalar>(config: &SuiteConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let jobs: Vec<(usize, usize)> = (0..config.durations_seconds.len())
        .flat_map(|slot| (0..config.cases_per_duration).map(move |i| (slot, i)))
        .collect();
    let per_case: Vec<Vec<CaseResult>> = jobs
        .par_iter()
        .map(|&(slot, index)| {
            let seconds = config.durations_seconds[slot];
            let seed = config.case_seed(slot, index);
            let case = synth::make_case_for_duration::<T>(seconds, config.fps, config.k, config.sigma, seed)?;
            evaluate_case(&case, config, seconds, index)
        })
        .collect::<Result<_>>()?;
    Ok(ExperimentReport::from_cases(config, per_case.into_iter().flatten().collect()))
}
