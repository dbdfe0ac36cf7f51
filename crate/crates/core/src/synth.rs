//! The uniform fit/sample contract shared by every generative model.
//!
//! Fitting reads the private training table only through the mechanisms in
//! [`crate::privacy`]. A fitted model owns nothing but its noisy statistics or
//! network weights, so sampling is pure post-processing.

use serde::{Deserialize, Serialize};

use crate::domain::{discretize, undiscretize, Schema, Table, DEFAULT_BINS};
use crate::error::{Error, Result};
use crate::gan::{dpwgan_fit, pategan_fit, GanConfig};
use crate::marginal::{default_degree, independent_fit, mst_fit, privbayes_fit};
use crate::privacy::{BudgetLedger, PrivacySpec};

/// A trained generator.
pub trait Synthesizer: Send + Sync {
    /// Schema of the sampled tables.
    fn schema(&self) -> &Schema;

    /// Every privacy spend made while fitting.
    fn ledger(&self) -> &BudgetLedger;

    /// Draws `n` synthetic rows. Deterministic in `seed`.
    fn sample(&self, n: usize, seed: u64) -> Result<Table>;
}

/// Model selection plus hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Independent,
    #[serde(rename = "privbayes")]
    PrivBayes {
        #[serde(default)]
        degree: Option<usize>,
    },
    Mst,
    #[serde(rename = "dpwgan")]
    DpWgan(#[serde(default)] GanConfig),
    #[serde(rename = "pategan")]
    PateGan(#[serde(default)] GanConfig),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Independent => "independent",
            ModelSpec::PrivBayes { .. } => "privbayes",
            ModelSpec::Mst => "mst",
            ModelSpec::DpWgan(_) => "dpwgan",
            ModelSpec::PateGan(_) => "pategan",
        }
    }

    /// Marginal models work on discretized tables.
    pub fn needs_discrete(&self) -> bool {
        matches!(
            self,
            ModelSpec::Independent | ModelSpec::PrivBayes { .. } | ModelSpec::Mst
        )
    }
}

/// A fitted model that samples tables in the schema of the table it was fitted on.
///
/// Marginal models are fitted on a `bins`-discretized copy; their samples are
/// mapped back to bin midpoints.
pub struct FittedSynthesizer {
    inner: Box<dyn Synthesizer>,
    output_schema: Schema,
    discretized: bool,
}

impl std::fmt::Debug for FittedSynthesizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("FittedSynthesizer")
            .field("output_schema", &self.output_schema)
            .field("discretized", &self.discretized)
            .finish_non_exhaustive()
    }
}

impl FittedSynthesizer {
    pub fn ledger(&self) -> &BudgetLedger {
        self.inner.ledger()
    }

    pub fn schema(&self) -> &Schema {
        &self.output_schema
    }

    pub fn inner(&self) -> &dyn Synthesizer {
        self.inner.as_ref()
    }

    pub fn sample(&self, n: usize, seed: u64) -> Result<Table> {
        let raw = self.inner.sample(n, seed)?;
        if self.discretized {
            undiscretize(&raw, &self.output_schema)
        } else {
            Ok(raw)
        }
    }
}

/// Fits `model` on `train`, discretizing to `bins` bins first for marginal models.
pub fn fit(
    model: &ModelSpec,
    train: &Table,
    spec: PrivacySpec,
    seed: u64,
    bins: usize,
) -> Result<FittedSynthesizer> {
    let discretized = model.needs_discrete() && !train.schema().is_all_categorical();
    let discrete;
    let input = if model.needs_discrete() {
        discrete = discretize(train, bins)?.table;
        &discrete
    } else {
        train
    };
    let inner: Box<dyn Synthesizer> = match model {
        ModelSpec::Independent => Box::new(independent_fit(input, spec, seed)?),
        ModelSpec::PrivBayes { degree } => {
            let degree = degree.unwrap_or_else(|| default_degree(input.n_cols()));
            Box::new(privbayes_fit(input, spec, degree, seed)?)
        }
        ModelSpec::Mst => Box::new(mst_fit(input, spec, seed)?),
        ModelSpec::DpWgan(config) => Box::new(dpwgan_fit(train, spec, config, seed)?),
        ModelSpec::PateGan(config) => Box::new(pategan_fit(train, spec, config, seed)?),
    };
    if !inner.ledger().within_budget() {
        return Err(Error::Internal(format!(
            "{} overspent its budget: epsilon {} of {}",
            model.name(),
            inner.ledger().epsilon_spent(),
            spec.epsilon()
        )));
    }
    Ok(FittedSynthesizer {
        inner,
        output_schema: train.schema().clone(),
        discretized,
    })
}

/// [`fit`] with the default 20-bin discretization.
pub fn fit_default(
    model: &ModelSpec,
    train: &Table,
    spec: PrivacySpec,
    seed: u64,
) -> Result<FittedSynthesizer> {
    fit(model, train, spec, seed, DEFAULT_BINS)
}
