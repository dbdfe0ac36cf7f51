use std::fmt;
use std::path::{Path, PathBuf};

use dpsynth::datagen::GaussFamily;
use dpsynth::domain::{ColumnDomain, Schema};
use dpsynth::privacy::PrivacySpec;
use dpsynth::synth::ModelSpec;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::BenchError;

/// A privacy level: positive and finite, or unbounded (written `"inf"`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Epsilon(pub f64);

impl Epsilon {
    pub fn is_infinite(&self) -> bool {
        self.0.is_infinite()
    }

    pub fn spec(&self, delta: f64) -> dpsynth::Result<PrivacySpec> {
        if self.is_infinite() {
            Ok(PrivacySpec::non_private())
        } else {
            PrivacySpec::new(self.0, delta)
        }
    }
}

impl fmt::Display for Epsilon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            f.write_str("inf")
        } else {
            f.write_str(&crate::report::format_sig(self.0))
        }
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Epsilon {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Epsilon;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a positive number or \"inf\"")
            }

            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Epsilon, E> {
                if v > 0.0 {
                    Ok(Epsilon(v))
                } else {
                    Err(E::custom(format!("epsilon must be positive, got {v}")))
                }
            }

            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Epsilon, E> {
                self.visit_f64(v as f64)
            }

            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Epsilon, E> {
                self.visit_f64(v as f64)
            }

            fn visit_str<E: de::Error>(self, v: &str) -> Result<Epsilon, E> {
                match v {
                    "inf" | "infinity" | "∞" => Ok(Epsilon(f64::INFINITY)),
                    other => other
                        .parse::<f64>()
                        .map_err(|_| E::custom(format!("cannot read `{other}` as an epsilon")))
                        .and_then(|x| self.visit_f64(x)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Values are training-set row counts.
    Rows,
    /// Values are column counts.
    Cols,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub axis: SweepAxis,
    pub values: Vec<usize>,
}

/// Public column metadata for a CSV dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub columns: Vec<ColumnDomain>,
    /// Name of the categorical column used as the classification target.
    #[serde(default)]
    pub target: Option<String>,
}

impl SchemaConfig {
    pub fn from_schema(schema: &Schema) -> Self {
        Self {
            columns: schema.columns().to_vec(),
            target: schema.target().map(|t| schema.column(t).name.clone()),
        }
    }

    pub fn to_schema(&self) -> dpsynth::Result<Schema> {
        let target = match &self.target {
            None => None,
            Some(name) => Some(
                self.columns
                    .iter()
                    .position(|c| &c.name == name)
                    .ok_or_else(|| {
                        dpsynth::Error::Input(format!(
                            "target column `{name}` is not in the schema"
                        ))
                    })?,
            ),
        };
        Schema::new(self.columns.clone(), target)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DatasetConfig {
    /// A synthetic Gaussian family. The sweep supplies whichever of `n`, `d`
    /// it varies; the other must be given here.
    Gauss {
        family: GaussFamily,
        #[serde(default)]
        n: Option<usize>,
        #[serde(default)]
        d: Option<usize>,
    },
    /// A CSV file with a header row. A rows sweep takes seeded row subsets of
    /// the training split; a cols sweep keeps the first `d` columns (plus the target).
    Csv {
        path: PathBuf,
        columns: Vec<ColumnDomain>,
        /// Name of the categorical target column.
        #[serde(default)]
        target: Option<String>,
    },
}

impl DatasetConfig {
    pub fn id(&self) -> String {
        match self {
            DatasetConfig::Gauss { family, .. } => family.name().to_string(),
            DatasetConfig::Csv { path, .. } => path
                .file_stem()
                .map_or_else(|| "csv".to_string(), |s| s.to_string_lossy().into_owned()),
        }
    }
}

fn default_m() -> usize {
    5
}

fn default_s() -> usize {
    5
}

fn default_time_limit() -> f64 {
    60.0
}

fn default_delta() -> f64 {
    1e-5
}

fn default_test_fraction() -> f64 {
    0.2
}

fn default_bins() -> usize {
    dpsynth::domain::DEFAULT_BINS
}

fn default_clusters() -> usize {
    6
}

/// One benchmark sweep: every model at every epsilon and every sweep value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: DatasetConfig,
    pub sweep: Sweep,
    pub epsilons: Vec<Epsilon>,
    pub models: Vec<ModelSpec>,
    /// Trainings per point.
    #[serde(default = "default_m")]
    pub m: usize,
    /// Synthetic tables sampled per training.
    #[serde(default = "default_s")]
    pub s: usize,
    #[serde(default = "default_time_limit")]
    pub time_limit_minutes: f64,
    /// Delta used at every finite epsilon.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub seed: u64,
    /// Share of rows held out as the real test set.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    /// Bins for discretizing marginal models and similarity metrics.
    #[serde(default = "default_bins")]
    pub bins: usize,
    /// Mixture components for the clustering metric.
    #[serde(default = "default_clusters")]
    pub clusters: usize,
    #[serde(default)]
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, BenchError> {
        let config: Self = toml::from_str(text).map_err(|e| BenchError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| BenchError::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            BenchError::Config(msg) => BenchError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String, BenchError> {
        toml::to_string(self).map_err(|e| BenchError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), BenchError> {
        let fail = |field: &str, msg: &str| Err(BenchError::Config(format!("{field}: {msg}")));
        if self.m == 0 {
            return fail("m", "must be at least 1");
        }
        if self.s == 0 {
            return fail("s", "must be at least 1");
        }
        if self.sweep.values.is_empty() {
            return fail("sweep.values", "must not be empty");
        }
        if self.sweep.values.contains(&0) {
            return fail("sweep.values", "must be positive");
        }
        if self.epsilons.is_empty() {
            return fail("epsilons", "must not be empty");
        }
        if self.models.is_empty() {
            return fail("models", "must not be empty");
        }
        if !(self.time_limit_minutes >= 0.0) {
            return fail("time_limit_minutes", "must be non-negative");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return fail("delta", "must lie in (0, 1)");
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return fail("test_fraction", "must lie in (0, 1)");
        }
        if self.bins < 2 {
            return fail("bins", "must be at least 2");
        }
        if self.clusters < 2 {
            return fail("clusters", "must be at least 2");
        }
        for (i, model) in self.models.iter().enumerate() {
            if let ModelSpec::DpWgan(c) | ModelSpec::PateGan(c) = model {
                // Row-count checks happen per point; this catches the rest early.
                if let Err(e) = c.validate(usize::MAX) {
                    return fail(&format!("models[{i}]"), &e.to_string());
                }
            }
        }
        match &self.dataset {
            DatasetConfig::Gauss { n, d, .. } => match self.sweep.axis {
                SweepAxis::Rows if d.is_none() => fail("dataset.d", "required when sweeping rows"),
                SweepAxis::Cols if n.is_none() => fail("dataset.n", "required when sweeping cols"),
                _ => Ok(()),
            },
            DatasetConfig::Csv {
                columns, target, ..
            } => SchemaConfig {
                columns: columns.clone(),
                target: target.clone(),
            }
            .to_schema()
            .map(|_| ())
            .map_err(|e| BenchError::Config(format!("dataset.columns: {e}"))),
        }
    }
}
