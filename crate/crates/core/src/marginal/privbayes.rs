//! PrivBayes: a differentially private Bayesian network.
//!
//! Half of the budget learns the network structure: starting from a random
//! root, each further attribute joins with the parent set chosen by the
//! exponential mechanism scored on mutual information. The other half
//! measures the `d` (child, parents) contingency tables with Laplace noise.
//! Both halves are split evenly over `d` steps, so every ledger entry is
//! `epsilon / 2d`. The root's share is charged even though the root itself is
//! drawn without looking at the data.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{check_sample_size, draw, normalize_or_uniform, require_discrete, table_from_codes};
use crate::domain::{marginal, MarginalTable, Schema, Table};
use crate::error::{input, Error, Result};
use crate::privacy::{exponential_mechanism, laplace_mechanism, BudgetLedger, PrivacySpec};
use crate::synth::Synthesizer;

/// Cap on the parent sets through the newest attribute added per step. When
/// all such sets fit under the cap every one is a candidate; otherwise this
/// many are drawn at random.
pub const MAX_NEW_PARENT_SETS: usize = 512;

/// Network degree: 3 up to 100 columns, 2 beyond.
pub fn default_degree(d: usize) -> usize {
    if d <= 100 {
        3
    } else {
        2
    }
}

/// Sensitivity (in bits) of empirical mutual information on `n` records:
/// `log2(n) / n + (n - 1) / n * log2(n / (n - 1))`.
pub fn mi_sensitivity(n: usize) -> f64 {
    if n <= 1 {
        return 1.0;
    }
    let n = n as f64;
    n.log2() / n + (n - 1.0) / n * (n / (n - 1.0)).log2()
}

/// Attribute order plus each attribute's parents, all of which precede it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BayesNetwork {
    order: Vec<usize>,
    parents: Vec<Vec<usize>>,
}

impl BayesNetwork {
    pub fn new(order: Vec<usize>, parents: Vec<Vec<usize>>) -> Result<Self> {
        let d = parents.len();
        let mut position = vec![usize::MAX; d];
        for (pos, &a) in order.iter().enumerate() {
            if a >= d || position[a] != usize::MAX {
                return input("network order must be a permutation of the attributes");
            }
            position[a] = pos;
        }
        if order.len() != d {
            return input("network order must be a permutation of the attributes");
        }
        for (child, ps) in parents.iter().enumerate() {
            if ps.iter().any(|&p| p >= d || position[p] >= position[child]) {
                return input(format!(
                    "parents of attribute {child} must precede it in the order"
                ));
            }
        }
        Ok(Self { order, parents })
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn parents(&self, attr: usize) -> &[usize] {
        &self.parents[attr]
    }

    pub fn max_in_degree(&self) -> usize {
        self.parents.iter().map(Vec::len).max().unwrap_or(0)
    }
}

/// `P(child | parents)` stored parent-configuration-major.
#[derive(Debug, Clone)]
struct Conditional {
    child: usize,
    parents: Vec<usize>,
    parent_strides: Vec<usize>,
    card: usize,
    probs: Vec<f64>,
}

impl Conditional {
    fn from_counts(m: &MarginalTable) -> Self {
        let k = m.attrs().len();
        let child = m.attrs()[k - 1];
        let card = m.shape()[k - 1];
        let parents = m.attrs()[..k - 1].to_vec();
        let parent_shape = &m.shape()[..k - 1];
        let mut parent_strides = vec![1; parent_shape.len()];
        for i in (0..parent_shape.len().saturating_sub(1)).rev() {
            parent_strides[i] = parent_strides[i + 1] * parent_shape[i + 1];
        }
        let mut probs: Vec<f64> = m.counts().iter().map(|c| c.max(0.0)).collect();
        probs.chunks_mut(card).for_each(normalize_or_uniform);
        Self {
            child,
            parents,
            parent_strides,
            card,
            probs,
        }
    }

    fn row(&self, sampled: &[u32]) -> &[f64] {
        let cfg: usize = self
            .parents
            .iter()
            .zip(&self.parent_strides)
            .map(|(&p, s)| sampled[p] as usize * s)
            .sum();
        &self.probs[cfg * self.card..(cfg + 1) * self.card]
    }
}

#[derive(Debug, Clone)]
pub struct PrivBayesModel {
    schema: Schema,
    network: BayesNetwork,
    conditionals: Vec<Conditional>,
    measured: Vec<MarginalTable>,
    ledger: BudgetLedger,
}

impl PrivBayesModel {
    pub fn network(&self) -> &BayesNetwork {
        &self.network
    }

    /// Noisy (parents..., child) counts, one per attribute in network order.
    pub fn measured(&self) -> &[MarginalTable] {
        &self.measured
    }
}

/// Plug-in mutual information between a parent set and many children,
/// grouping rows by parent configuration once per parent set.
struct MiScorer<'a> {
    columns: Vec<&'a [u32]>,
    cards: Vec<usize>,
    n: usize,
    x_ln_x: Vec<f64>,
    child_sum: Vec<f64>,
    perm: Vec<u32>,
    bounds: Vec<usize>,
    keys: Vec<u64>,
    slots: Vec<u32>,
    buf: Vec<u32>,
    touched: Vec<u32>,
}

impl<'a> MiScorer<'a> {
    fn new(table: &'a Table, cards: Vec<usize>) -> Result<Self> {
        let n = table.n_rows();
        let columns = (0..table.n_cols())
            .map(|j| table.codes(j))
            .collect::<Result<Vec<_>>>()?;
        let x_ln_x: Vec<f64> = (0..=n)
            .map(|c| {
                if c == 0 {
                    0.0
                } else {
                    c as f64 * (c as f64).ln()
                }
            })
            .collect();
        let child_sum = columns
            .iter()
            .zip(&cards)
            .map(|(col, &k)| {
                let mut counts = vec![0usize; k];
                col.iter().for_each(|&c| counts[c as usize] += 1);
                counts.iter().map(|&c| x_ln_x[c]).sum()
            })
            .collect();
        let max_card = cards.iter().copied().max().unwrap_or(2);
        Ok(Self {
            columns,
            cards,
            n,
            x_ln_x,
            child_sum,
            perm: vec![0; n],
            bounds: Vec::new(),
            keys: vec![0; n],
            slots: Vec::new(),
            buf: vec![0; max_card],
            touched: Vec::with_capacity(max_card),
        })
    }

    /// Sorts rows by parent configuration; returns `sum c ln c` over configurations.
    fn group(&mut self, parents: &[usize]) -> f64 {
        let mut space: u64 = 1;
        self.keys.iter_mut().for_each(|k| *k = 0);
        for &p in parents {
            let card = self.cards[p] as u64;
            for (k, &c) in self.keys.iter_mut().zip(self.columns[p]) {
                *k = *k * card + c as u64;
            }
            space = space.saturating_mul(card);
        }
        self.bounds.clear();
        if space <= 1 << 22 {
            // counting sort on the dense key space
            let space = space as usize;
            self.slots.clear();
            self.slots.resize(space + 1, 0);
            for &k in &self.keys {
                self.slots[k as usize + 1] += 1;
            }
            for i in 0..space {
                self.slots[i + 1] += self.slots[i];
            }
            for i in 0..space {
                if self.slots[i + 1] > self.slots[i] {
                    self.bounds.push(self.slots[i] as usize);
                }
            }
            for (r, &k) in self.keys.iter().enumerate() {
                let slot = &mut self.slots[k as usize];
                self.perm[*slot as usize] = r as u32;
                *slot += 1;
            }
        } else {
            for (r, p) in self.perm.iter_mut().enumerate() {
                *p = r as u32;
            }
            let keys = &self.keys;
            self.perm.sort_unstable_by_key(|&r| keys[r as usize]);
            for i in 0..self.n {
                if i == 0 || keys[self.perm[i] as usize] != keys[self.perm[i - 1] as usize] {
                    self.bounds.push(i);
                }
            }
        }
        self.bounds.push(self.n);
        self.bounds
            .windows(2)
            .map(|w| self.x_ln_x[w[1] - w[0]])
            .sum()
    }

    /// Mutual information in bits between each child and the parent set.
    fn score(&mut self, parents: &[usize], children: &[usize]) -> Vec<f64> {
        let parent_sum = self.group(parents);
        let ln_n = (self.n as f64).ln();
        children
            .iter()
            .map(|&child| {
                let col = self.columns[child];
                let mut joint_sum = 0.0;
                for w in self.bounds.windows(2) {
                    for &r in &self.perm[w[0]..w[1]] {
                        let v = col[r as usize];
                        if self.buf[v as usize] == 0 {
                            self.touched.push(v);
                        }
                        self.buf[v as usize] += 1;
                    }
                    for &v in &self.touched {
                        joint_sum += self.x_ln_x[self.buf[v as usize] as usize];
                        self.buf[v as usize] = 0;
                    }
                    self.touched.clear();
                }
                let nats = ln_n + (joint_sum - self.child_sum[child] - parent_sum) / self.n as f64;
                (nats / std::f64::consts::LN_2).max(0.0)
            })
            .collect()
    }
}

/// Number of parent sets through `newest` with up to `degree` members drawn
/// from `others` more attributes, saturating.
fn subset_count(others: usize, degree: usize) -> usize {
    let mut total = 0usize;
    let mut binom = 1usize;
    for k in 0..degree.min(others + 1) {
        total = total.saturating_add(binom);
        binom = binom.saturating_mul(others - k) / (k + 1);
    }
    total
}

/// All subsets of `placed` that contain `newest`, with between 1 and `degree` members.
fn subsets_with(newest: usize, others: &[usize], degree: usize) -> Vec<Vec<usize>> {
    let mut out = vec![vec![newest]];
    let mut frontier = vec![(vec![newest], 0usize)];
    while let Some((set, start)) = frontier.pop() {
        if set.len() == degree {
            continue;
        }
        for (i, &o) in others.iter().enumerate().skip(start) {
            let mut next = set.clone();
            next.push(o);
            out.push(next.clone());
            frontier.push((next, i + 1));
        }
    }
    for s in out.iter_mut() {
        s.sort_unstable();
    }
    out.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    out
}

struct Candidate {
    child: usize,
    set: usize,
    score: f64,
}

fn learn_structure(
    train: &Table,
    cards: &[usize],
    degree: usize,
    per_step: f64,
    ledger: &mut BudgetLedger,
    rng: &mut ChaCha20Rng,
) -> Result<BayesNetwork> {
    let d = cards.len();
    let names = |a: usize| train.schema().column(a).name.clone();
    let sensitivity = mi_sensitivity(train.n_rows());
    let mut scorer = MiScorer::new(train, cards.to_vec())?;

    let root = rng.random_range(0..d);
    ledger.spend(format!("privbayes/select/{}", names(root)), per_step, 0.0)?;
    let mut order = vec![root];
    let mut placed = vec![false; d];
    placed[root] = true;
    let mut parents = vec![Vec::new(); d];
    let mut sets: Vec<Vec<usize>> = Vec::new();
    let mut candidates: Vec<Candidate> = Vec::new();
    let mut newest = root;

    while order.len() < d {
        candidates.retain(|c| c.child != newest);
        let unplaced: Vec<usize> = (0..d).filter(|&a| !placed[a]).collect();
        let others: Vec<usize> = order.iter().copied().filter(|&a| a != newest).collect();
        let new_sets = if subset_count(others.len(), degree) <= MAX_NEW_PARENT_SETS {
            subsets_with(newest, &others, degree)
        } else {
            // Data-independent sample of parent sets through the newest attribute.
            let size = degree.min(order.len()) - 1;
            let mut drawn: Vec<Vec<usize>> = (0..MAX_NEW_PARENT_SETS)
                .map(|_| {
                    let mut s: Vec<usize> = index::sample(rng, others.len(), size)
                        .into_iter()
                        .map(|i| others[i])
                        .collect();
                    s.push(newest);
                    s.sort_unstable();
                    s
                })
                .collect();
            drawn.sort();
            drawn.dedup();
            drawn
        };
        for set in new_sets {
            let scores = scorer.score(&set, &unplaced);
            let id = sets.len();
            sets.push(set);
            candidates.extend(
                unplaced
                    .iter()
                    .zip(scores)
                    .map(|(&child, score)| Candidate {
                        child,
                        set: id,
                        score,
                    }),
            );
        }

        let scores: Vec<f64> = candidates.iter().map(|c| c.score).collect();
        let pick = exponential_mechanism(&scores, sensitivity, per_step, rng)?;
        let chosen = &candidates[pick];
        let child = chosen.child;
        parents[child] = sets[chosen.set].clone();
        ledger.spend(format!("privbayes/select/{}", names(child)), per_step, 0.0)?;
        placed[child] = true;
        order.push(child);
        newest = child;
    }
    BayesNetwork::new(order, parents)
}

/// Fits PrivBayes with at most `degree` parents per attribute.
pub fn privbayes_fit(
    train: &Table,
    spec: PrivacySpec,
    degree: usize,
    seed: u64,
) -> Result<PrivBayesModel> {
    let cards = require_discrete(train)?;
    if degree == 0 {
        return input("network degree must be at least 1");
    }
    let d = cards.len();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut ledger = BudgetLedger::new(spec);
    let name = |a: usize| train.schema().column(a).name.clone();

    let (network, per_measure) = if d == 1 {
        // A single column: nothing to learn, the whole budget measures it.
        (
            BayesNetwork::new(vec![0], vec![Vec::new()])?,
            spec.epsilon(),
        )
    } else {
        let per_step = spec.epsilon() / (2 * d) as f64;
        let net = learn_structure(train, &cards, degree, per_step, &mut ledger, &mut rng)?;
        (net, per_step)
    };

    let mut measured = Vec::with_capacity(d);
    let mut conditionals = Vec::with_capacity(d);
    for &child in network.order() {
        let attrs: Vec<usize> = network
            .parents(child)
            .iter()
            .copied()
            .chain([child])
            .collect();
        let exact = marginal(train, &attrs)?;
        let noisy = exact.with_counts(laplace_mechanism(
            exact.counts(),
            1.0,
            per_measure,
            &mut rng,
        )?)?;
        ledger.spend(
            format!("privbayes/measure/{}", name(child)),
            per_measure,
            0.0,
        )?;
        conditionals.push(Conditional::from_counts(&noisy));
        measured.push(noisy);
    }
    if !ledger.within_budget() {
        return Err(Error::Internal(
            "PrivBayes ledger exceeds its budget".into(),
        ));
    }
    Ok(PrivBayesModel {
        schema: train.schema().clone(),
        network,
        conditionals,
        measured,
        ledger,
    })
}

impl Synthesizer for PrivBayesModel {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    /// Ancestral sampling in network order.
    fn sample(&self, n: usize, seed: u64) -> Result<Table> {
        check_sample_size(n)?;
        let d = self.schema.len();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut columns = vec![Vec::with_capacity(n); d];
        let mut row = vec![0u32; d];
        for _ in 0..n {
            for cond in &self.conditionals {
                row[cond.child] = draw(cond.row(&row), rng.random()) as u32;
            }
            for (col, &v) in columns.iter_mut().zip(&row) {
                col.push(v);
            }
        }
        table_from_codes(&self.schema, columns)
    }
}
