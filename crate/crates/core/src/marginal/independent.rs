use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{check_sample_size, draw, require_discrete, table_from_codes};
use crate::domain::{marginal, to_distribution, MarginalTable, Schema, Table};
use crate::error::Result;
use crate::privacy::{laplace_mechanism, BudgetLedger, PrivacySpec};
use crate::synth::Synthesizer;

/// Product of independently measured 1-way marginals.
#[derive(Debug, Clone)]
pub struct IndependentModel {
    schema: Schema,
    measured: Vec<MarginalTable>,
    distributions: Vec<Vec<f64>>,
    ledger: BudgetLedger,
}

impl IndependentModel {
    /// Noisy 1-way counts before clamping.
    pub fn measured(&self) -> &[MarginalTable] {
        &self.measured
    }

    pub fn distributions(&self) -> &[Vec<f64>] {
        &self.distributions
    }
}

/// Measures every 1-way marginal with the Laplace mechanism at `epsilon / d` each.
pub fn independent_fit(train: &Table, spec: PrivacySpec, seed: u64) -> Result<IndependentModel> {
    require_discrete(train)?;
    let d = train.n_cols();
    let per_column = spec.epsilon() / d as f64;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut ledger = BudgetLedger::new(spec);
    let mut measured = Vec::with_capacity(d);
    let mut distributions = Vec::with_capacity(d);
    for j in 0..d {
        let exact = marginal(train, &[j])?;
        let noisy = exact.with_counts(laplace_mechanism(
            exact.counts(),
            1.0,
            per_column,
            &mut rng,
        )?)?;
        ledger.spend(
            format!("independent/measure/{}", train.schema().column(j).name),
            per_column,
            0.0,
        )?;
        distributions.push(to_distribution(&noisy).into_counts());
        measured.push(noisy);
    }
    Ok(IndependentModel {
        schema: train.schema().clone(),
        measured,
        distributions,
        ledger,
    })
}

impl Synthesizer for IndependentModel {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    fn sample(&self, n: usize, seed: u64) -> Result<Table> {
        check_sample_size(n)?;
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let columns = self
            .distributions
            .iter()
            .map(|p| (0..n).map(|_| draw(p, rng.random()) as u32).collect())
            .collect();
        table_from_codes(&self.schema, columns)
    }
}
