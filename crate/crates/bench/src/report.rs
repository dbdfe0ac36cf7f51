use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::Epsilon;
use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointStatus {
    Ok,
    /// A fit ran past the time limit; the point's remaining repetitions were skipped.
    Timeout,
    /// Fitting, sampling or a metric returned an error.
    Failed,
}

impl PointStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            PointStatus::Ok => "ok",
            PointStatus::Timeout => "timeout",
            PointStatus::Failed => "failed",
        }
    }
}

/// One metric aggregated over the `m * s` synthetic tables of a point, or a
/// metric-less row marking a timed-out or failed point.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub dataset: String,
    pub model: String,
    pub epsilon: Epsilon,
    pub n: usize,
    pub d: usize,
    pub metric: Option<String>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    /// Number of synthetic tables behind `mean` and `std`.
    pub count: usize,
    pub fit_minutes: Option<f64>,
    pub sample_minutes: Option<f64>,
    pub status: PointStatus,
    pub note: String,
}

pub const HEADER: [&str; 13] = [
    "dataset",
    "model",
    "epsilon",
    "n",
    "d",
    "metric",
    "mean",
    "std",
    "count",
    "fit_minutes",
    "sample_minutes",
    "status",
    "note",
];

/// `x` rounded to six significant digits, without trailing zeros; `inf`, `-inf` and `nan` for non-finite values.
pub fn format_sig(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        let decimals = (5 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

impl ReportRow {
    pub fn record(&self) -> [String; 13] {
        [
            self.dataset.clone(),
            self.model.clone(),
            self.epsilon.to_string(),
            self.n.to_string(),
            self.d.to_string(),
            self.metric.clone().unwrap_or_default(),
            opt(self.mean),
            opt(self.std),
            self.count.to_string(),
            opt(self.fit_minutes),
            opt(self.sample_minutes),
            self.status.as_str().to_string(),
            self.note.clone(),
        ]
    }
}

pub fn write_csv<W: Write>(rows: &[ReportRow], writer: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(writer);
    let io = |e: csv::Error| BenchError::Io(e.to_string());
    w.write_record(HEADER).map_err(io)?;
    for row in rows {
        w.write_record(row.record()).map_err(io)?;
    }
    w.flush().map_err(|e| BenchError::Io(e.to_string()))
}

/// Writes `rows` to `path` as CSV with a header, creating parent directories.
pub fn emit_csv(rows: &[ReportRow], path: &Path) -> Result<(), BenchError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)
            .map_err(|e| BenchError::Io(format!("{}: {e}", dir.display())))?;
    }
    let file = std::fs::File::create(path)
        .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
    write_csv(rows, std::io::BufWriter::new(file))
}
