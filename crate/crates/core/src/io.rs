//! Text file formats.
//!
//! * Slowness CSV: header `# slowness k=<k>`, then one row of `k + 1`
//!   comma-separated probabilities per between-frame position.
//! * Slowness JSON: `{"k": <k>, "probs": [[...], ...]}`.
//! * Signal CSV: optional header `# orientation=<zero_slow|one_slow>`, then
//!   one value per line.
//! * Feature CSV: one comma-separated vector per frame.
//! * Case JSON: [`CaseRecord`].
//! * Result JSON: [`RetimeOutput`].
//!
//! Blank lines are ignored everywhere; other `#` lines are comments.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Result, RetimeError};
use crate::optimizer::{LossTerms, RetimeResult};
use crate::scalar::Scalar;
use crate::signals::{normalize_signal, Orientation, RetimeSignal, SlownessMatrix};
use crate::synth::CaseRecord;

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| RetimeError::Io { path: path.display().to_string(), source })
}

pub fn write_text(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| RetimeError::Io { path: path.display().to_string(), source })
}

fn parse_floats<T: Scalar>(line: &str, lineno: usize) -> Result<Vec<T>> {
    line.split(',')
        .map(|field| {
            let field = field.trim();
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(T::lit)
                .ok_or_else(|| RetimeError::Parse(format!("line {lineno}: {field:?} is not a finite number")))
        })
        .collect()
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn header_value<'a>(text: &'a str, key: &str) -> Option<&'a str> {
    text.lines()
        .map(str::trim)
        .filter_map(|l| l.strip_prefix('#'))
        .flat_map(str::split_whitespace)
        .find_map(|tok| tok.strip_prefix(key).and_then(|rest| rest.strip_prefix('=')))
}

pub fn parse_slowness_csv<T: Scalar>(text: &str) -> Result<SlownessMatrix<T>> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty()).unwrap_or("");
    if !first.starts_with("# slowness") {
        return Err(RetimeError::Parse("slowness CSV must start with `# slowness k=<k>`".into()));
    }
    let k: u32 = header_value(first, "k")
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| RetimeError::Parse("slowness header lacks a valid `k=<k>`".into()))?;
    let rows = data_lines(text).map(|(no, l)| parse_floats(l, no)).collect::<Result<Vec<_>>>()?;
    SlownessMatrix::from_rows(k, &rows)
}

pub fn format_slowness_csv<T: Scalar>(p: &SlownessMatrix<T>) -> String {
    let mut out = format!("# slowness k={}\n", p.k());
    for row in p.iter_rows() {
        let cells: Vec<String> = row.iter().map(|v| v.as_f64().to_string()).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlownessJson {
    k: u32,
    probs: Vec<Vec<f64>>,
}

pub fn parse_slowness_json<T: Scalar>(text: &str) -> Result<SlownessMatrix<T>> {
    let raw: SlownessJson = serde_json::from_str(text).map_err(|e| RetimeError::Parse(e.to_string()))?;
    let rows: Vec<Vec<T>> = raw.probs.iter().map(|r| r.iter().map(|&v| T::lit(v)).collect()).collect();
    SlownessMatrix::from_rows(raw.k, &rows)
}

pub fn format_slowness_json<T: Scalar>(p: &SlownessMatrix<T>) -> String {
    let raw = SlownessJson { k: p.k(), probs: p.iter_rows().map(|r| r.iter().map(|v| v.as_f64()).collect()).collect() };
    serde_json::to_string(&raw).expect("slowness serializes")
}

/// Reads CSV or JSON, chosen by the first non-blank character.
pub fn parse_slowness<T: Scalar>(text: &str) -> Result<SlownessMatrix<T>> {
    if text.trim_start().starts_with('{') {
        parse_slowness_json(text)
    } else {
        parse_slowness_csv(text)
    }
}

pub fn read_slowness<T: Scalar>(path: &Path) -> Result<SlownessMatrix<T>> {
    parse_slowness(&read_text(path)?).map_err(|e| with_path(e, path))
}

/// Parses raw signal values and normalizes them; the header, when present,
/// sets the orientation.
pub fn parse_signal_csv<T: Scalar>(text: &str) -> Result<RetimeSignal<T>> {
    let orientation = match header_value(text, "orientation") {
        Some(v) => v.parse()?,
        None => Orientation::default(),
    };
    let mut raw = Vec::new();
    for (no, line) in data_lines(text) {
        let vals: Vec<T> = parse_floats(line, no)?;
        if vals.len() != 1 {
            return Err(RetimeError::Parse(format!("line {no}: expected one value per line")));
        }
        raw.push(vals[0]);
    }
    Ok(normalize_signal(&raw)?.with_orientation(orientation))
}

/// Normalized values with an orientation header.
pub fn format_signal_csv<T: Scalar>(signal: &RetimeSignal<T>) -> String {
    let mut out = format!("# orientation={}\n", signal.orientation());
    for v in signal.normalized() {
        out.push_str(&v.as_f64().to_string());
        out.push('\n');
    }
    out
}

pub fn read_signal<T: Scalar>(path: &Path) -> Result<RetimeSignal<T>> {
    parse_signal_csv(&read_text(path)?).map_err(|e| with_path(e, path))
}

pub fn parse_features_csv<T: Scalar>(text: &str) -> Result<Vec<Vec<T>>> {
    let rows = data_lines(text).map(|(no, l)| parse_floats(l, no)).collect::<Result<Vec<Vec<T>>>>()?;
    if let Some(first) = rows.first() {
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != first.len()) {
            return Err(RetimeError::Parse(format!(
                "feature row {i} has {} values, expected {}",
                r.len(),
                first.len()
            )));
        }
    }
    Ok(rows)
}

pub fn read_features<T: Scalar>(path: &Path) -> Result<Vec<Vec<T>>> {
    parse_features_csv(&read_text(path)?).map_err(|e| with_path(e, path))
}

pub fn parse_case_json(text: &str) -> Result<CaseRecord> {
    serde_json::from_str(text).map_err(|e| RetimeError::Parse(e.to_string()))
}

pub fn format_case_json(case: &CaseRecord) -> String {
    serde_json::to_string(case).expect("case serializes")
}

fn with_path(err: RetimeError, path: &Path) -> RetimeError {
    match err {
        RetimeError::Parse(m) => RetimeError::Parse(format!("{}: {m}", path.display())),
        RetimeError::InvalidInput(m) => RetimeError::InvalidInput(format!("{}: {m}", path.display())),
        other => other,
    }
}

/// Serialized form of a [`RetimeResult`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetimeOutput {
    pub d: Vec<f64>,
    pub nu: Vec<f64>,
    pub frame_indices: Vec<usize>,
    pub duration_error: f64,
    pub loss_trace: Vec<f64>,
    pub term_values: LossTerms,
    pub metadata: RetimeMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetimeMetadata {
    pub mode: String,
    pub source_frames: usize,
    pub target_frames: usize,
    /// Signal strength actually used (signal mode only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
}

impl RetimeOutput {
    pub fn from_result<T: Scalar>(r: &RetimeResult<T>, mode: &str, source_frames: usize) -> Self {
        let f = |v: &[T]| v.iter().map(|x| x.as_f64()).collect::<Vec<_>>();
        RetimeOutput {
            d: f(&r.d_hat),
            nu: f(&r.nu),
            frame_indices: r.frame_indices.clone(),
            duration_error: r.duration_error.as_f64(),
            loss_trace: f(&r.loss_trace),
            term_values: r.term_values,
            metadata: RetimeMetadata {
                mode: mode.to_string(),
                source_frames,
                target_frames: r.d_hat.len(),
                lambda: r.signal_lambda.map(|v| v.as_f64()),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn slowness_csv_parses() {
        let text = "# slowness k=2\n0.2,0.3,0.5\n\n1,0,0\n";
        let p: SlownessMatrix<f64> = parse_slowness(text).unwrap();
        assert_eq!(p.rows(), 2);
        assert_eq!(p.row(1), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn slowness_csv_errors() {
        assert!(parse_slowness::<f64>("0.2,0.3,0.5\n").is_err());
        assert!(parse_slowness::<f64>("# slowness\n0.2,0.3,0.5\n").is_err());
        assert!(parse_slowness::<f64>("# slowness k=2\n0.2,0.8\n").is_err());
        assert!(parse_slowness::<f64>("# slowness k=2\n0.2,x,0.8\n").is_err());
        assert!(parse_slowness::<f64>("# slowness k=2\n0.2,0.2,0.2\n").is_err());
    }

    #[test]
    fn slowness_json_parses() {
        let p: SlownessMatrix<f64> = parse_slowness(r#"{"k": 1, "probs": [[0.25, 0.75], [1, 0]]}"#).unwrap();
        assert_eq!(p.k(), 1);
        assert_eq!(p.get(0, 1), 0.75);
        assert!(parse_slowness::<f64>(r#"{"k": 1, "probs": [[0.25, 0.75]], "x": 1}"#).is_err());
    }

    #[test]
    fn signal_csv_orientation() {
        let s: RetimeSignal<f64> = parse_signal_csv("# orientation=one_slow\n2\n4\n6\n").unwrap();
        assert_eq!(s.orientation(), Orientation::OneMeansNoSpeedup);
        assert_eq!(s.normalized(), &[0.0, 0.5, 1.0]);
        let plain: RetimeSignal<f64> = parse_signal_csv("1\n3\n").unwrap();
        assert_eq!(plain.orientation(), Orientation::ZeroMeansNoSpeedup);
        assert!(parse_signal_csv::<f64>("# orientation=sideways\n1\n2\n").is_err());
        assert!(parse_signal_csv::<f64>("1,2\n3,4\n").is_err());
        assert!(parse_signal_csv::<f64>("1\n").is_err());
    }

    #[test]
    fn features_csv() {
        let f: Vec<Vec<f64>> = parse_features_csv("1,0\n0,1\n").unwrap();
        assert_eq!(f, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(parse_features_csv::<f64>("1,0\n0\n").is_err());
    }

    #[test]
    fn missing_file_names_path() {
        let err = read_slowness::<f64>(Path::new("/nonexistent/p.csv")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/p.csv"));
    }

    proptest! {
        #[test]
        fn slowness_formats_round_trip(rows in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 3), 1..20)) {
            let rows: Vec<Vec<f64>> = rows
                .into_iter()
                .map(|r| { let s: f64 = r.iter().sum(); r.into_iter().map(|v| v / s).collect() })
                .collect();
            let p = SlownessMatrix::from_rows(2, &rows).unwrap();
            prop_assert_eq!(&parse_slowness::<f64>(&format_slowness_csv(&p)).unwrap(), &p);
            prop_assert_eq!(&parse_slowness::<f64>(&format_slowness_json(&p)).unwrap(), &p);
        }

        #[test]
        fn signal_format_round_trip(raw in prop::collection::vec(-10f64..10.0, 2..30)) {
            let s = normalize_signal(&raw).unwrap().with_orientation(Orientation::OneMeansNoSpeedup);
            let back: RetimeSignal<f64> = parse_signal_csv(&format_signal_csv(&s)).unwrap();
            prop_assert_eq!(back.orientation(), s.orientation());
            if !s.is_constant() {
                for (a, b) in back.normalized().iter().zip(s.normalized()) {
                    prop_assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }
}
