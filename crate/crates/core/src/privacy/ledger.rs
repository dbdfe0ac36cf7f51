use serde::{Deserialize, Serialize};

use super::PrivacySpec;
use crate::error::{Error, Result};

/// Slack for floating-point splits such as `d` spends of `epsilon / d`.
const REL_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub label: String,
    pub epsilon: f64,
    pub delta: f64,
}

/// Append-only record of every privacy spend made during one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetLedger {
    total: PrivacySpec,
    entries: Vec<LedgerEntry>,
}

impl BudgetLedger {
    pub fn new(total: PrivacySpec) -> Self {
        Self {
            total,
            entries: Vec::new(),
        }
    }

    pub fn total(&self) -> PrivacySpec {
        self.total
    }

    pub fn entries(&self) -> &[LedgerEntry] {
        &self.entries
    }

    pub fn epsilon_spent(&self) -> f64 {
        self.entries.iter().map(|e| e.epsilon).sum()
    }

    pub fn delta_spent(&self) -> f64 {
        self.entries.iter().map(|e| e.delta).sum()
    }

    pub fn epsilon_remaining(&self) -> f64 {
        (self.total.epsilon() - self.epsilon_spent()).max(0.0)
    }

    /// Records a spend, refusing it if the cumulative totals would exceed the budget.
    pub fn spend(&mut self, label: impl Into<String>, epsilon: f64, delta: f64) -> Result<()> {
        let label = label.into();
        if !(epsilon >= 0.0 && delta >= 0.0) {
            return Err(Error::Input(format!(
                "spend `{label}` must be non-negative, got epsilon={epsilon}, delta={delta}"
            )));
        }
        let epsilon_after = self.epsilon_spent() + epsilon;
        let delta_after = self.delta_spent() + delta;
        if exceeds(epsilon_after, self.total.epsilon()) || exceeds(delta_after, self.total.delta())
        {
            return Err(Error::BudgetExhausted {
                label,
                epsilon_after,
                delta_after,
                epsilon_total: self.total.epsilon(),
                delta_total: self.total.delta(),
            });
        }
        self.entries.push(LedgerEntry {
            label,
            epsilon,
            delta,
        });
        Ok(())
    }

    /// True when the recorded totals respect the budget.
    pub fn within_budget(&self) -> bool {
        !exceeds(self.epsilon_spent(), self.total.epsilon())
            && !exceeds(self.delta_spent(), self.total.delta())
    }
}

fn exceeds(spent: f64, total: f64) -> bool {
    if total.is_infinite() {
        return spent.is_nan();
    }
    !(spent <= total * (1.0 + REL_SLACK))
}
