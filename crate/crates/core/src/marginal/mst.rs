//! MST: measure all 1-way marginals, privately grow a maximum spanning tree
//! over pairwise dependence, measure the tree's 2-way marginals, then fit a
//! consistent tree-structured distribution by iterative proportional fitting.
//!
//! A third of epsilon pays for edge selection, two thirds for measurement.
//! The `2d - 1` Gaussian measurements share the measurement budget and delta
//! evenly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{check_sample_size, draw, normalize_or_uniform, require_discrete, table_from_codes};
use crate::domain::{marginal, MarginalTable, Schema, Table};
use crate::error::{input, Error, Result};
use crate::privacy::{exponential_mechanism, gaussian_mechanism, BudgetLedger, PrivacySpec};
use crate::synth::Synthesizer;

pub const MST_DEFAULT_DELTA: f64 = 1e-5;
/// Largest L1 gap allowed between a fitted 2-way's projection and its 1-way target.
pub const IPF_TOLERANCE: f64 = 1e-6;
pub const IPF_MAX_ROUNDS: usize = 500;

/// Mass mixed in from the product of targets when finite-epsilon tables are fitted,
/// so proportional fitting always has full support to work with.
const PRODUCT_BLEND: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct MstModel {
    schema: Schema,
    oneways: Vec<MarginalTable>,
    edges: Vec<(usize, usize)>,
    twoways: Vec<MarginalTable>,
    fitted: Vec<MarginalTable>,
    targets: Vec<Vec<f64>>,
    ledger: BudgetLedger,
}

impl MstModel {
    /// Noisy 1-way counts, one per attribute.
    pub fn measured_oneways(&self) -> &[MarginalTable] {
        &self.oneways
    }

    /// Tree edges `(i, j)` with `i < j`, in selection order.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Noisy 2-way counts, aligned with [`MstModel::edges`].
    pub fn measured_twoways(&self) -> &[MarginalTable] {
        &self.twoways
    }

    /// Fitted pairwise distributions, aligned with [`MstModel::edges`].
    pub fn fitted(&self) -> &[MarginalTable] {
        &self.fitted
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        self.0[ra.max(rb)] = ra.min(rb);
    }
}

/// L1 gap between the true 2-way counts of `(i, j)` and the product of the
/// measured 1-ways scaled to `total`.
fn independence_gap(
    train: &Table,
    i: usize,
    j: usize,
    pi: &[f64],
    pj: &[f64],
    total: f64,
) -> Result<f64> {
    let exact = marginal(train, &[i, j])?;
    let kj = pj.len();
    Ok(exact
        .counts()
        .iter()
        .enumerate()
        .map(|(c, &v)| (v - total * pi[c / kj] * pj[c % kj]).abs())
        .sum())
}

/// Grows a spanning tree Kruskal-style, each edge chosen by the exponential
/// mechanism at `epsilon / (d - 1)` among edges joining two components.
///
/// The independence estimate uses only the noisy `measured_oneways`,
/// including for its scale, so each weight has sensitivity 1.
pub fn mst_select<R: Rng + ?Sized>(
    train: &Table,
    measured_oneways: &[MarginalTable],
    epsilon: f64,
    ledger: &mut BudgetLedger,
    rng: &mut R,
) -> Result<Vec<(usize, usize)>> {
    let d = train.n_cols();
    if d < 2 {
        return input("MST needs at least two attributes");
    }
    if measured_oneways.len() != d {
        return input("one measured 1-way marginal per attribute is required");
    }
    let dists: Vec<Vec<f64>> = measured_oneways
        .iter()
        .map(|m| {
            let mut p: Vec<f64> = m.counts().iter().map(|c| c.max(0.0)).collect();
            normalize_or_uniform(&mut p);
            p
        })
        .collect();
    let total = (measured_oneways
        .iter()
        .map(MarginalTable::total)
        .sum::<f64>()
        / d as f64)
        .max(1.0);

    let mut pairs = Vec::with_capacity(d * (d - 1) / 2);
    let mut weights = Vec::with_capacity(pairs.capacity());
    for i in 0..d {
        for j in i + 1..d {
            pairs.push((i, j));
            weights.push(independence_gap(train, i, j, &dists[i], &dists[j], total)?);
        }
    }

    let per_edge = epsilon / (d - 1) as f64;
    let name = |a: usize| train.schema().column(a).name.clone();
    let mut components = UnionFind((0..d).collect());
    let mut edges = Vec::with_capacity(d - 1);
    while edges.len() < d - 1 {
        let open: Vec<usize> = (0..pairs.len())
            .filter(|&e| components.find(pairs[e].0) != components.find(pairs[e].1))
            .collect();
        let scores: Vec<f64> = open.iter().map(|&e| weights[e]).collect();
        let (i, j) = pairs[open[exponential_mechanism(&scores, 1.0, per_edge, rng)?]];
        ledger.spend(format!("mst/select/{}-{}", name(i), name(j)), per_edge, 0.0)?;
        components.union(i, j);
        edges.push((i, j));
    }
    Ok(edges)
}

fn measure<R: Rng + ?Sized>(
    exact: MarginalTable,
    epsilon: f64,
    delta: f64,
    rng: &mut R,
) -> Result<MarginalTable> {
    if epsilon.is_infinite() {
        return Ok(exact);
    }
    let noisy = gaussian_mechanism(exact.counts(), 1.0, epsilon, delta, rng)?;
    exact.with_counts(noisy)
}

/// Scales the rows and columns of `table` (shape `rows.len() x cols.len()`) in
/// turn until both projections are within `IPF_TOLERANCE / 2` of the targets.
fn ipf(table: &mut [f64], rows: &[f64], cols: &[f64]) -> Result<()> {
    let (kr, kc) = (rows.len(), cols.len());
    let gap = |t: &[f64]| -> f64 {
        let r: f64 = (0..kr)
            .map(|a| (t[a * kc..(a + 1) * kc].iter().sum::<f64>() - rows[a]).abs())
            .sum();
        let c: f64 = (0..kc)
            .map(|b| ((0..kr).map(|a| t[a * kc + b]).sum::<f64>() - cols[b]).abs())
            .sum();
        r + c
    };
    for _ in 0..IPF_MAX_ROUNDS {
        if gap(table) <= IPF_TOLERANCE / 2.0 {
            return Ok(());
        }
        for a in 0..kr {
            let row = &mut table[a * kc..(a + 1) * kc];
            let mass: f64 = row.iter().sum();
            if mass > 0.0 {
                let f = rows[a] / mass;
                row.iter_mut().for_each(|x| *x *= f);
            }
        }
        for b in 0..kc {
            let mass: f64 = (0..kr).map(|a| table[a * kc + b]).sum();
            if mass > 0.0 {
                let f = cols[b] / mass;
                (0..kr).for_each(|a| table[a * kc + b] *= f);
            }
        }
    }
    if gap(table) <= IPF_TOLERANCE / 2.0 {
        return Ok(());
    }
    Err(Error::Convergence(format!(
        "proportional fitting did not converge in {IPF_MAX_ROUNDS} rounds"
    )))
}

/// Consistent pairwise distributions for the tree.
///
/// Each attribute's target is the average of its normalized 1-way measurement
/// and the projections of its normalized incident 2-way measurements. Every
/// edge table is then fitted to its two targets.
fn fit_tree(
    oneways: &[MarginalTable],
    edges: &[(usize, usize)],
    twoways: &[MarginalTable],
    blend: bool,
) -> Result<(Vec<MarginalTable>, Vec<Vec<f64>>)> {
    let normalized = |m: &MarginalTable| {
        let mut p: Vec<f64> = m.counts().iter().map(|c| c.max(0.0)).collect();
        normalize_or_uniform(&mut p);
        p
    };
    let mut targets: Vec<Vec<f64>> = oneways.iter().map(normalized).collect();
    let mut weight = vec![1.0; oneways.len()];
    let pairs: Vec<Vec<f64>> = twoways.iter().map(normalized).collect();
    for (&(i, j), p) in edges.iter().zip(&pairs) {
        let kj = targets[j].len();
        for (c, &v) in p.iter().enumerate() {
            targets[i][c / kj] += v;
            targets[j][c % kj] += v;
        }
        weight[i] += 1.0;
        weight[j] += 1.0;
    }
    for (t, w) in targets.iter_mut().zip(&weight) {
        t.iter_mut().for_each(|x| *x /= w);
    }

    let mut fitted = Vec::with_capacity(edges.len());
    for ((&(i, j), mut p), m) in edges.iter().zip(pairs).zip(twoways) {
        let (ti, tj) = (&targets[i], &targets[j]);
        let kj = tj.len();
        if blend {
            for (c, x) in p.iter_mut().enumerate() {
                *x = (1.0 - PRODUCT_BLEND) * *x + PRODUCT_BLEND * ti[c / kj] * tj[c % kj];
            }
        }
        ipf(&mut p, ti, tj)?;
        fitted.push(m.with_counts(p)?);
    }
    Ok((fitted, targets))
}

/// Fits MST; `spec.delta()` must be positive unless epsilon is infinite.
pub fn mst_fit(train: &Table, spec: PrivacySpec, seed: u64) -> Result<MstModel> {
    let cards = require_discrete(train)?;
    let d = cards.len();
    if d < 2 {
        return input("MST needs at least two attributes");
    }
    let (epsilon, delta) = (spec.epsilon(), spec.delta());
    if epsilon.is_finite() && delta <= 0.0 {
        return Err(Error::Budget(
            "MST measures with the Gaussian mechanism and needs delta > 0".into(),
        ));
    }
    let eps_select = epsilon / 3.0;
    let eps_measure = 2.0 * epsilon / 3.0;
    let measurements = (2 * d - 1) as f64;
    let (eps_each, delta_each) = (eps_measure / measurements, delta / measurements);

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut ledger = BudgetLedger::new(spec);
    let name = |a: usize| train.schema().column(a).name.clone();

    let mut oneways = Vec::with_capacity(d);
    for a in 0..d {
        oneways.push(measure(
            marginal(train, &[a])?,
            eps_each,
            delta_each,
            &mut rng,
        )?);
        ledger.spend(format!("mst/measure/{}", name(a)), eps_each, delta_each)?;
    }
    let edges = mst_select(train, &oneways, eps_select, &mut ledger, &mut rng)?;
    let mut twoways = Vec::with_capacity(d - 1);
    for &(i, j) in &edges {
        twoways.push(measure(
            marginal(train, &[i, j])?,
            eps_each,
            delta_each,
            &mut rng,
        )?);
        ledger.spend(
            format!("mst/measure/{}-{}", name(i), name(j)),
            eps_each,
            delta_each,
        )?;
    }
    if !ledger.within_budget() {
        return Err(Error::Internal("MST ledger exceeds its budget".into()));
    }

    let (fitted, targets) = fit_tree(&oneways, &edges, &twoways, epsilon.is_finite())?;
    Ok(MstModel {
        schema: train.schema().clone(),
        oneways,
        edges,
        twoways,
        fitted,
        targets,
        ledger,
    })
}

/// `P(child | parent)` rows, parent-major, from a fitted edge table.
fn conditional(table: &MarginalTable, parent: usize) -> Vec<f64> {
    let (kr, kc) = (table.shape()[0], table.shape()[1]);
    let counts = table.counts();
    let mut out = if table.attrs()[0] == parent {
        counts.to_vec()
    } else {
        let mut t = vec![0.0; kr * kc];
        for a in 0..kr {
            for b in 0..kc {
                t[b * kr + a] = counts[a * kc + b];
            }
        }
        t
    };
    let child_card = if table.attrs()[0] == parent { kc } else { kr };
    out.chunks_mut(child_card).for_each(normalize_or_uniform);
    out
}

impl Synthesizer for MstModel {
    fn schema(&self) -> &Schema {
        &self.schema
    }

    fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    /// Ancestral sampling from the tree rooted at attribute 0.
    fn sample(&self, n: usize, seed: u64) -> Result<Table> {
        check_sample_size(n)?;
        let d = self.schema.len();
        let mut adjacency = vec![Vec::new(); d];
        for (e, &(i, j)) in self.edges.iter().enumerate() {
            adjacency[i].push((j, e));
            adjacency[j].push((i, e));
        }
        // (child, parent, conditional rows) in breadth-first order
        let mut steps = Vec::with_capacity(d - 1);
        let mut seen = vec![false; d];
        seen[0] = true;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(p) = queue.pop_front() {
            for &(c, e) in &adjacency[p] {
                if !seen[c] {
                    seen[c] = true;
                    steps.push((c, p, conditional(&self.fitted[e], p)));
                    queue.push_back(c);
                }
            }
        }
        let mut root = self.targets[0].clone();
        normalize_or_uniform(&mut root);

        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut columns = vec![vec![0u32; n]; d];
        for r in 0..n {
            columns[0][r] = draw(&root, rng.random()) as u32;
            for (c, p, probs) in &steps {
                let k = self.targets[*c].len();
                let pv = columns[*p][r] as usize;
                columns[*c][r] = draw(&probs[pv * k..(pv + 1) * k], rng.random()) as u32;
            }
        }
        table_from_codes(&self.schema, columns)
    }
}
