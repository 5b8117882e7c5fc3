//! `retime`: command-line front end for retime-core.
//!
//! Exit codes: 0 on success, 2 on invalid input, 3 when the target length
//! is not shorter than the source.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use retime_core::eval::{evaluate_case, ExperimentReport, SuiteConfig};
use retime_core::io::{self, RetimeOutput};
use retime_core::optimizer::{optimize, Guide, IndexGradient, RetimeConfig, SignalStrength};
use retime_core::signals::{self, Orientation, RetimeSignal};
use retime_core::{synth, Method, RetimeError};

const EXIT_INPUT: u8 = 2;
const EXIT_INFEASIBLE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "retime", version, about = "Re-time videos by optimizing frame skips against a target duration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Optimize frame skips for a slowness matrix or a re-timing signal.
    Retime(RetimeArgs),
    /// Generate a synthetic ground-truth case and its one-hot slowness matrix.
    Synth(SynthArgs),
    /// Compare re-timing methods on synthetic ground truth.
    Eval(EvalArgs),
    /// Build a normalized re-timing signal from features or slowness.
    Signal(SignalArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum GuideMode {
    Slowness,
    Signal,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum IndexGradientArg {
    Stop,
    Full,
}

#[derive(Args, Debug)]
struct RetimeArgs {
    /// Guide type.
    #[arg(long, value_enum, default_value_t = GuideMode::Slowness)]
    mode: GuideMode,
    /// Slowness matrix, CSV (`# slowness k=<k>` header) or JSON (required in slowness mode).
    #[arg(long)]
    slowness: Option<PathBuf>,
    /// Signal CSV, one value per line (required in signal mode).
    #[arg(long)]
    signal: Option<PathBuf>,
    /// Case JSON from `retime synth`; supplies source and target frame counts.
    #[arg(long)]
    case: Option<PathBuf>,
    /// Source frame count n (required unless --case is given).
    #[arg(long)]
    source_frames: Option<usize>,
    /// Target skip count l, must be below n (required unless --case is given).
    #[arg(long)]
    target_frames: Option<usize>,
    /// Signal strength in signal mode: `auto` or a positive number.
    #[arg(long, default_value = "auto")]
    lambda: String,
    /// Weight of the total-duration penalty.
    #[arg(long, default_value_t = 1.0)]
    lambda_sum: f64,
    /// Weight of the minimum-skip penalty.
    #[arg(long, default_value_t = 10.0)]
    lambda_min: f64,
    /// Weight of the skip smoothness penalty.
    #[arg(long, default_value_t = 1.0)]
    lambda_smooth: f64,
    /// Adam learning rate.
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    /// Adam steps.
    #[arg(long, default_value_t = 4000)]
    steps: usize,
    /// Global confidence gap that slowness sharpening aims for.
    #[arg(long, default_value_t = 0.975)]
    gap_threshold: f64,
    /// Whether the guide term is differentiated through the frame positions.
    #[arg(long, value_enum, default_value_t = IndexGradientArg::Stop)]
    index_gradient: IndexGradientArg,
    /// Result JSON path [default: standard output].
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Clip duration in seconds.
    #[arg(long)]
    duration_seconds: f64,
    /// Frames per second.
    #[arg(long, default_value_t = 30)]
    fps: u32,
    /// Random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Speed-change probability in [0, 0.1] [default: sampled uniformly].
    #[arg(long)]
    sigma: Option<f64>,
    /// Number of speed-up classes beyond 1x.
    #[arg(long, default_value_t = 2)]
    k: u32,
    /// Case JSON output path.
    #[arg(long, default_value = "case.json")]
    case_output: PathBuf,
    /// Slowness CSV output path.
    #[arg(long, default_value = "slowness.csv")]
    slowness_output: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Suite configuration JSON; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Evaluate a single case JSON from `retime synth` instead of a generated suite.
    #[arg(long)]
    case: Option<PathBuf>,
    /// Comma-separated durations in seconds [default: 20,60,180].
    #[arg(long, value_delimiter = ',')]
    durations: Option<Vec<f64>>,
    /// Cases per duration [default: 50].
    #[arg(long)]
    cases: Option<usize>,
    /// Frames per second [default: 30].
    #[arg(long)]
    fps: Option<u32>,
    /// Speed-up classes [default: 2].
    #[arg(long)]
    k: Option<u32>,
    /// Suite seed [default: 0].
    #[arg(long)]
    seed: Option<u64>,
    /// Fixed speed-change probability [default: sampled per case].
    #[arg(long)]
    sigma: Option<f64>,
    /// Comma-separated methods: ours, speednet_sweep, uniform [default: all].
    #[arg(long, value_delimiter = ',')]
    methods: Option<Vec<Method>>,
    /// Adam steps for both optimizers [default: 4000].
    #[arg(long)]
    steps: Option<usize>,
    /// Adam learning rate for both optimizers [default: 0.01].
    #[arg(long)]
    learning_rate: Option<f64>,
    /// Report JSON path [default: standard output].
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Summary CSV path (method, duration, mean MAE, ...) [default: not written].
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum SignalType {
    /// Cosine similarity of consecutive feature vectors.
    Cosine,
    /// Expected skip under a slowness matrix.
    Speediness,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum OrientationArg {
    /// 0 means no speed-up allowed.
    ZeroSlow,
    /// 1 means no speed-up allowed.
    OneSlow,
}

#[derive(Args, Debug)]
struct SignalArgs {
    /// Signal construction.
    #[arg(long = "type", value_enum)]
    kind: SignalType,
    /// Feature CSV, one comma-separated vector per frame (cosine).
    #[arg(long)]
    features: Option<PathBuf>,
    /// Slowness matrix CSV or JSON (speediness).
    #[arg(long)]
    slowness: Option<PathBuf>,
    /// Orientation written to the header.
    #[arg(long, value_enum, default_value_t = OrientationArg::ZeroSlow)]
    orientation: OrientationArg,
    /// Signal CSV path [default: standard output].
    #[arg(long, short)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Retime(a) => cmd_retime(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Signal(a) => cmd_signal(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", describe(&err));
            let infeasible =
                err.chain().any(|e| matches!(e.downcast_ref::<RetimeError>(), Some(RetimeError::InvalidTarget { .. })));
            ExitCode::from(if infeasible { EXIT_INFEASIBLE } else { EXIT_INPUT })
        }
    }
}

/// The error chain joined by `: `, skipping causes already quoted by
/// their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut msg = err.to_string();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !msg.contains(&text) {
            msg = format!("{msg}: {text}");
        }
    }
    msg
}

fn emit(path: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => io::write_text(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn required<'a>(path: &'a Option<PathBuf>, flag: &str, why: &str) -> anyhow::Result<&'a Path> {
    path.as_deref().with_context(|| format!("{flag} is required {why}"))
}

fn read_case(path: &Path) -> anyhow::Result<retime_core::CaseRecord> {
    io::parse_case_json(&io::read_text(path)?).with_context(|| format!("reading case {}", path.display()))
}

fn cmd_retime(a: RetimeArgs) -> anyhow::Result<()> {
    let (case_n, case_l) = match &a.case {
        Some(p) => {
            let c = read_case(p)?;
            (Some(c.n), Some(c.l))
        }
        None => (None, None),
    };
    let n = a.source_frames.or(case_n).context("--source-frames (or --case) is required")?;
    let l = a.target_frames.or(case_l).context("--target-frames (or --case) is required")?;

    let signal_strength = match a.lambda.trim() {
        "auto" => SignalStrength::Auto,
        v => match v.parse::<f64>() {
            Ok(x) if x > 0.0 && x.is_finite() => SignalStrength::Fixed(x),
            _ => bail!("--lambda must be `auto` or a positive number, got {v:?}"),
        },
    };
    let config = RetimeConfig {
        lambda_sum: a.lambda_sum,
        lambda_min: a.lambda_min,
        lambda_smooth: a.lambda_smooth,
        signal_strength,
        steps: a.steps,
        gap_threshold: a.gap_threshold,
        index_gradient: match a.index_gradient {
            IndexGradientArg::Stop => IndexGradient::Stop,
            IndexGradientArg::Full => IndexGradient::Full,
        },
        adam: retime_core::adam::AdamParams { learning_rate: a.learning_rate, ..Default::default() },
    };

    let (result, mode) = match a.mode {
        GuideMode::Slowness => {
            let p = io::read_slowness::<f64>(required(&a.slowness, "--slowness", "in slowness mode")?)?;
            (optimize(Guide::Slowness(&p), n, l, &config)?, "slowness")
        }
        GuideMode::Signal => {
            let s: RetimeSignal<f64> = io::read_signal(required(&a.signal, "--signal", "in signal mode")?)?;
            if s.is_constant() {
                eprintln!("warning: signal is constant; it carries no timing information");
            }
            (optimize(Guide::Signal(&s), n, l, &config)?, "signal")
        }
    };
    let out = RetimeOutput::from_result(&result, mode, n);
    emit(a.output.as_deref(), &(serde_json::to_string_pretty(&out)? + "\n"))
}

fn cmd_synth(a: SynthArgs) -> anyhow::Result<()> {
    let case = synth::make_case_for_duration::<f64>(a.duration_seconds, a.fps, a.k, a.sigma, a.seed)?;
    io::write_text(&a.case_output, &(io::format_case_json(&case.to_record()) + "\n"))?;
    io::write_text(&a.slowness_output, &io::format_slowness_csv(&case.slowness))?;
    eprintln!(
        "wrote case n={} l={} sigma={:.4} to {} and slowness to {}",
        case.n,
        case.l,
        case.sigma,
        a.case_output.display(),
        a.slowness_output.display()
    );
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> anyhow::Result<()> {
    let mut config = match &a.config {
        Some(p) => serde_json::from_str::<SuiteConfig>(&io::read_text(p)?)
            .with_context(|| format!("malformed suite config {}", p.display()))?,
        None => SuiteConfig::default(),
    };
    if let Some(v) = a.durations {
        config.durations_seconds = v;
    }
    if let Some(v) = a.cases {
        config.cases_per_duration = v;
    }
    if let Some(v) = a.fps {
        config.fps = v;
    }
    if let Some(v) = a.k {
        config.k = v;
    }
    if let Some(v) = a.seed {
        config.seed = v;
    }
    if a.sigma.is_some() {
        config.sigma = a.sigma;
    }
    if let Some(v) = a.methods {
        config.methods = v;
    }
    if let Some(v) = a.steps {
        config.steps = v;
    }
    if let Some(v) = a.learning_rate {
        config.learning_rate = v;
    }
    config.validate()?;

    let report = match &a.case {
        Some(p) => {
            let case = read_case(p)?.into_case::<f64>()?;
            let seconds = case.n as f64 / config.fps as f64;
            ExperimentReport::from_cases(&config, evaluate_case(&case, &config, seconds, 0)?)
        }
        None => retime_core::run_suite::<f64>(&config)?,
    };
    if let Some(p) = &a.csv {
        io::write_text(p, &report.summary_csv())?;
    }
    emit(a.output.as_deref(), &(serde_json::to_string_pretty(&report)? + "\n"))
}

fn cmd_signal(a: SignalArgs) -> anyhow::Result<()> {
    let signal: RetimeSignal<f64> = match a.kind {
        SignalType::Cosine => {
            let path = required(&a.features, "--features", "for --type cosine")?;
            signals::cosine_similarity_signal(&io::read_features(path)?)
                .with_context(|| format!("building cosine signal from {}", path.display()))?
        }
        SignalType::Speediness => {
            let path = required(&a.slowness, "--slowness", "for --type speediness")?;
            signals::speediness_to_signal(&io::read_slowness(path)?)
                .with_context(|| format!("building speediness signal from {}", path.display()))?
        }
    };
    if signal.is_constant() {
        eprintln!("warning: degenerate signal: raw values are constant, normalized output is all zeros");
    }
    let signal = signal.with_orientation(match a.orientation {
        OrientationArg::ZeroSlow => Orientation::ZeroMeansNoSpeedup,
        OrientationArg::OneSlow => Orientation::OneMeansNoSpeedup,
    });
    emit(a.output.as_deref(), &io::format_signal_csv(&signal))
}
