//! Synthetic Gaussian dataset families, CSV ingestion and train/test splitting.

mod csv_io;
mod gauss;

pub use csv_io::{load_csv, read_csv, save_csv, write_csv};
pub use gauss::{
    gen_corr_gauss, gen_eye_gauss, gen_mix_gauss, generate, ring_mean, tridiagonal_cholesky,
    GaussFamily, GaussSpec, GAUSS_BOUNDS, NEIGHBOR_CORRELATION, RING_COMPONENTS,
    RING_COMPONENT_STD, RING_LABELS, RING_RADIUS,
};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::domain::Table;
use crate::error::{input, Result};

/// Seeded shuffle split; the test side receives `round(n * test_fraction)` rows.
pub fn split(table: &Table, test_fraction: f64, seed: u64) -> Result<(Table, Table)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return input(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        ));
    }
    let n = table.n_rows();
    let n_test = (n as f64 * test_fraction).round() as usize;
    if n_test == 0 || n_test == n {
        return input(format!(
            "splitting {n} rows at fraction {test_fraction} leaves one side empty"
        ));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    let (test_idx, train_idx) = order.split_at(n_test);
    Ok((table.select_rows(train_idx)?, table.select_rows(test_idx)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{ColumnDomain, Schema};

    fn numbered(n: usize) -> Table {
        let schema = Schema::new(
            vec![ColumnDomain::continuous("i", 0.0, 1e6, 2).unwrap()],
            None,
        )
        .unwrap();
        Table::from_rows(schema, &(0..n).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn eighty_twenty() {
        let (train, test) = split(&numbered(10), 0.2, 1).unwrap();
        assert_eq!((train.n_rows(), test.n_rows()), (8, 2));
        let mut all: Vec<f64> = train.values(0).unwrap().to_vec();
        all.extend_from_slice(test.values(0).unwrap());
        all.sort_by(f64::total_cmp);
        assert_eq!(all, (0..10).map(|i| i as f64).collect::<Vec<_>>());
    }

    #[test]
    fn seeded() {
        let t = numbered(100);
        let a = split(&t, 0.3, 7).unwrap();
        let b = split(&t, 0.3, 7).unwrap();
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn empty_side_rejected() {
        assert!(split(&numbered(3), 0.1, 0).is_err());
        assert!(split(&numbered(3), 0.0, 0).is_err());
        assert!(split(&numbered(3), 1.0, 0).is_err());
    }
}
