use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::{ColumnData, ColumnDomain, Schema, Table, DEFAULT_BINS};
use crate::error::{input, Error, Result};

/// Declared bounds of every generated continuous column.
pub const GAUSS_BOUNDS: (f64, f64) = (-6.0, 6.0);
/// Correlation between neighbouring columns of the correlated family.
pub const NEIGHBOR_CORRELATION: f64 = 0.5;
pub const RING_COMPONENTS: usize = 6;
pub const RING_RADIUS: f64 = 5.0;
pub const RING_COMPONENT_STD: f64 = 0.5;
/// Label of each ring position. Consecutive labels sit two positions apart,
/// so no pair of adjacent components shares neighbouring labels.
pub const RING_LABELS: [u32; RING_COMPONENTS] = [0, 3, 1, 4, 2, 5];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GaussFamily {
    Eye,
    Corr,
    MixUnsup,
    MixSup,
}

impl GaussFamily {
    pub fn name(&self) -> &'static str {
        match self {
            GaussFamily::Eye => "eye",
            GaussFamily::Corr => "corr",
            GaussFamily::MixUnsup => "mix_unsup",
            GaussFamily::MixSup => "mix_sup",
        }
    }
}

impl std::str::FromStr for GaussFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eye" => Ok(GaussFamily::Eye),
            "corr" => Ok(GaussFamily::Corr),
            "mix_unsup" | "mix" => Ok(GaussFamily::MixUnsup),
            "mix_sup" => Ok(GaussFamily::MixSup),
            other => input(format!(
                "unknown dataset family `{other}` (expected eye, corr, mix_unsup or mix_sup)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussSpec {
    pub family: GaussFamily,
    pub n: usize,
    pub d: usize,
    pub seed: u64,
}

impl GaussSpec {
    pub fn new(family: GaussFamily, n: usize, d: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return input("n must be at least 1");
        }
        if d < 2 {
            return input(format!("d must be at least 2, got {d}"));
        }
        Ok(Self { family, n, d, seed })
    }
}

/// Generates the dataset described by `spec`.
pub fn generate(spec: &GaussSpec) -> Result<Table> {
    match spec.family {
        GaussFamily::Eye => gen_eye_gauss(spec),
        GaussFamily::Corr => gen_corr_gauss(spec),
        GaussFamily::MixUnsup | GaussFamily::MixSup => gen_mix_gauss(spec),
    }
}

fn continuous_schema(d: usize, target: bool) -> Result<Schema> {
    let mut columns: Vec<ColumnDomain> = (0..d)
        .map(|j| {
            ColumnDomain::continuous(
                format!("x{j}"),
                GAUSS_BOUNDS.0,
                GAUSS_BOUNDS.1,
                DEFAULT_BINS,
            )
        })
        .collect::<Result<_>>()?;
    let target = if target {
        columns.push(ColumnDomain::categorical("label", RING_COMPONENTS)?);
        Some(d)
    } else {
        None
    };
    Schema::new(columns, target)
}

fn check_family(spec: &GaussSpec, allowed: &[GaussFamily]) -> Result<()> {
    if !allowed.contains(&spec.family) {
        return input(format!(
            "generator does not produce family `{}`",
            spec.family.name()
        ));
    }
    GaussSpec::new(spec.family, spec.n, spec.d, spec.seed).map(|_| ())
}

fn normal(rng: &mut ChaCha20Rng) -> f64 {
    rng.sample(StandardNormal)
}

fn table_from_columns(schema: Schema, columns: Vec<Vec<f64>>) -> Result<Table> {
    Table::new(
        schema,
        columns.into_iter().map(ColumnData::Values).collect(),
    )
}

/// `n x d` independent standard normals.
pub fn gen_eye_gauss(spec: &GaussSpec) -> Result<Table> {
    check_family(spec, &[GaussFamily::Eye])?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut cols = vec![Vec::with_capacity(spec.n); spec.d];
    for _ in 0..spec.n {
        for col in cols.iter_mut() {
            col.push(normal(&mut rng));
        }
    }
    table_from_columns(continuous_schema(spec.d, false)?, cols)
}

/// Cholesky factor of the tridiagonal covariance with unit diagonal and
/// `rho` on the first off-diagonals. The factor is lower bidiagonal:
/// returns `(diag, sub)` with `sub[i]` the entry at `(i, i - 1)` (`sub[0] = 0`).
pub fn tridiagonal_cholesky(d: usize, rho: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut diag = vec![0.0; d];
    let mut sub = vec![0.0; d];
    for i in 0..d {
        if i > 0 {
            sub[i] = rho / diag[i - 1];
        }
        let pivot = 1.0 - sub[i] * sub[i];
        if !(pivot > 0.0) {
            return Err(Error::Internal(format!(
                "covariance with off-diagonal {rho} is not positive definite at row {i}"
            )));
        }
        diag[i] = pivot.sqrt();
    }
    Ok((diag, sub))
}

/// Zero-mean multivariate normal whose neighbouring columns have correlation 0.5.
pub fn gen_corr_gauss(spec: &GaussSpec) -> Result<Table> {
    check_family(spec, &[GaussFamily::Corr])?;
    let (diag, sub) = tridiagonal_cholesky(spec.d, NEIGHBOR_CORRELATION)?;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut cols = vec![Vec::with_capacity(spec.n); spec.d];
    let mut z = vec![0.0; spec.d];
    for _ in 0..spec.n {
        for zi in z.iter_mut() {
            *zi = normal(&mut rng);
        }
        for i in 0..spec.d {
            let prev = if i > 0 { sub[i] * z[i - 1] } else { 0.0 };
            cols[i].push(prev + diag[i] * z[i]);
        }
    }
    table_from_columns(continuous_schema(spec.d, false)?, cols)
}

/// Mean of ring component `k`.
pub fn ring_mean(k: usize) -> (f64, f64) {
    let angle = 2.0 * PI * k as f64 / RING_COMPONENTS as f64;
    (RING_RADIUS * angle.cos(), RING_RADIUS * angle.sin())
}

/// Columns 0-1: equal-weight mixture of six Gaussians on a ring; the rest
/// independent standard normals. The supervised family appends a `label`
/// column with the component's label from [`RING_LABELS`].
pub fn gen_mix_gauss(spec: &GaussSpec) -> Result<Table> {
    check_family(spec, &[GaussFamily::MixUnsup, GaussFamily::MixSup])?;
    let supervised = spec.family == GaussFamily::MixSup;
    let mut rng = ChaCha20Rng::seed_from_u64(spec.seed);
    let mut cols = vec![Vec::with_capacity(spec.n); spec.d];
    let mut labels = Vec::with_capacity(if supervised { spec.n } else { 0 });
    for _ in 0..spec.n {
        let k = rng.random_range(0..RING_COMPONENTS);
        let (mx, my) = ring_mean(k);
        cols[0].push(mx + RING_COMPONENT_STD * normal(&mut rng));
        cols[1].push(my + RING_COMPONENT_STD * normal(&mut rng));
        for col in cols.iter_mut().skip(2) {
            col.push(normal(&mut rng));
        }
        if supervised {
            labels.push(RING_LABELS[k]);
        }
    }
    let schema = continuous_schema(spec.d, supervised)?;
    let mut data: Vec<ColumnData> = cols.into_iter().map(ColumnData::Values).collect();
    if supervised {
        data.push(ColumnData::Codes(labels));
    }
    Table::new(schema, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn corr(a: &[f64], b: &[f64]) -> f64 {
        let (ma, mb) = (mean(a), mean(b));
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn eye_moments() {
        let t = generate(&GaussSpec::new(GaussFamily::Eye, 100_000, 8, 1).unwrap()).unwrap();
        for j in 0..8 {
            let v = t.values(j).unwrap();
            let m = mean(v);
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
            assert!(m.abs() < 0.02);
            assert!((var - 1.0).abs() < 0.03);
        }
        for i in 0..8 {
            for j in i + 1..8 {
                assert!(corr(t.values(i).unwrap(), t.values(j).unwrap()).abs() < 0.02);
            }
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = GaussSpec::new(GaussFamily::Corr, 500, 5, 42).unwrap();
        assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
        let other = GaussSpec { seed: 43, ..spec };
        assert_ne!(generate(&spec).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn corr_structure() {
        let t = generate(&GaussSpec::new(GaussFamily::Corr, 100_000, 6, 2).unwrap()).unwrap();
        for i in 0..6 {
            let v = t.values(i).unwrap();
            let m = mean(v);
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64;
            assert!((var - 1.0).abs() < 0.03, "var {var}");
            for j in i + 1..6 {
                let c = corr(v, t.values(j).unwrap());
                let want = if j == i + 1 { 0.5 } else { 0.0 };
                assert!((c - want).abs() < 0.02, "({i},{j}) {c}");
            }
        }
    }

    #[test]
    fn cholesky_factor_reproduces_covariance() {
        let (diag, sub) = tridiagonal_cholesky(10, 0.5).unwrap();
        for i in 0..10 {
            let var = diag[i].powi(2) + sub[i].powi(2);
            assert!((var - 1.0).abs() < 1e-12);
            if i > 0 {
                assert!((sub[i] * diag[i - 1] - 0.5).abs() < 1e-12);
            }
        }
        assert!(tridiagonal_cholesky(50, 0.9).is_err());
    }

    #[test]
    fn mixture_components_and_labels() {
        let n = 60_000;
        let t = generate(&GaussSpec::new(GaussFamily::MixSup, n, 4, 5).unwrap()).unwrap();
        assert_eq!(t.n_cols(), 5);
        assert_eq!(t.schema().target(), Some(4));
        let labels = t.codes(4).unwrap();
        let (x, y) = (t.values(0).unwrap(), t.values(1).unwrap());
        let mut sums = [(0.0, 0.0, 0usize); RING_COMPONENTS];
        for i in 0..n {
            let k = RING_LABELS.iter().position(|&l| l == labels[i]).unwrap();
            sums[k].0 += x[i];
            sums[k].1 += y[i];
            sums[k].2 += 1;
        }
        for (k, (sx, sy, c)) in sums.iter().enumerate() {
            let (mx, my) = ring_mean(k);
            assert!((sx / *c as f64 - mx).abs() < 0.05);
            assert!((sy / *c as f64 - my).abs() < 0.05);
            assert!((*c as f64 / n as f64 - 1.0 / 6.0).abs() < 0.01);
        }
        for j in 2..4 {
            assert!(corr(t.values(j).unwrap(), x).abs() < 0.02);
            assert!(corr(t.values(j).unwrap(), y).abs() < 0.02);
        }
    }

    #[test]
    fn unsupervised_has_no_target() {
        let t = generate(&GaussSpec::new(GaussFamily::MixUnsup, 100, 3, 5).unwrap()).unwrap();
        assert_eq!(t.n_cols(), 3);
        assert_eq!(t.schema().target(), None);
    }

    #[test]
    fn spec_validation() {
        assert!(GaussSpec::new(GaussFamily::Eye, 0, 3, 0).is_err());
        assert!(GaussSpec::new(GaussFamily::Eye, 10, 1, 0).is_err());
        let spec = GaussSpec::new(GaussFamily::Eye, 10, 3, 0).unwrap();
        assert!(gen_corr_gauss(&spec).is_err());
        assert_eq!(
            "mix_sup".parse::<GaussFamily>().unwrap(),
            GaussFamily::MixSup
        );
        assert!("ring".parse::<GaussFamily>().is_err());
    }
}
