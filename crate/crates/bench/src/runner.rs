use std::time::Instant;

use dpsynth::datagen::{generate, load_csv, split, GaussSpec};
use dpsynth::domain::Table;
use dpsynth::synth::{fit, ModelSpec};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::config::{DatasetConfig, Epsilon, ExperimentConfig, SchemaConfig, SweepAxis};
use crate::metrics::MetricContext;
use crate::report::{PointStatus, ReportRow};
use crate::BenchError;

const TEST_SEED_SALT: u64 = 0x5EED_7E57;

/// Wall-clock duration of one named section.
#[derive(Debug, Clone, PartialEq)]
pub struct Timing {
    pub label: String,
    pub minutes: f64,
}

/// Runs `action` and measures its wall-clock time on a monotonic clock.
pub fn time_section<T>(label: &str, action: impl FnOnce() -> T) -> (T, Timing) {
    let start = Instant::now();
    let out = action();
    let minutes = start.elapsed().as_secs_f64() / 60.0;
    (
        out,
        Timing {
            label: label.to_string(),
            minutes,
        },
    )
}

/// Seed of the `j`-th synthetic table sampled from the model fitted with `fit_seed`.
pub fn sample_seed(fit_seed: u64, j: usize) -> u64 {
    fit_seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(j as u64 + 1)
}

/// Real train and test tables for one sweep value.
pub fn prepare_data(config: &ExperimentConfig, value: usize) -> Result<(Table, Table), BenchError> {
    let f = config.test_fraction;
    match &config.dataset {
        DatasetConfig::Gauss { family, n, d } => {
            let (n, d) = match config.sweep.axis {
                SweepAxis::Rows => (value, d.unwrap_or_default()),
                SweepAxis::Cols => (n.unwrap_or_default(), value),
            };
            let n_test = ((n as f64 * f / (1.0 - f)).round() as usize).max(1);
            let train = generate(&GaussSpec::new(*family, n, d, config.seed)?)?;
            let test = generate(&GaussSpec::new(
                *family,
                n_test,
                d,
                config.seed ^ TEST_SEED_SALT,
            )?)?;
            Ok((train, test))
        }
        DatasetConfig::Csv {
            path,
            columns,
            target,
        } => {
            let schema = SchemaConfig {
                columns: columns.clone(),
                target: target.clone(),
            }
            .to_schema()?;
            let table = load_csv(path, &schema)?;
            let (train, test) = split(&table, f, config.seed)?;
            match config.sweep.axis {
                SweepAxis::Rows => {
                    if value > train.n_rows() {
                        return Err(BenchError::Data(dpsynth::Error::Input(format!(
                            "sweep asks for {value} rows but the training split has {}",
                            train.n_rows()
                        ))));
                    }
                    let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
                    let mut rows = index::sample(&mut rng, train.n_rows(), value).into_vec();
                    rows.sort_unstable();
                    Ok((train.select_rows(&rows)?, test))
                }
                SweepAxis::Cols => {
                    let features: Vec<usize> = (0..schema.len())
                        .filter(|&j| Some(j) != schema.target())
                        .collect();
                    if value > features.len() {
                        return Err(BenchError::Data(dpsynth::Error::Input(format!(
                            "sweep asks for {value} columns but the dataset has {} feature columns",
                            features.len()
                        ))));
                    }
                    let mut keep = features[..value].to_vec();
                    keep.extend(schema.target());
                    keep.sort_unstable();
                    Ok((train.select_columns(&keep)?, test.select_columns(&keep)?))
                }
            }
        }
    }
}

struct Point<'a> {
    model: &'a ModelSpec,
    epsilon: Epsilon,
    value_index: usize,
}

#[derive(Default)]
struct Outcome {
    metrics: Vec<Vec<f64>>,
    fit_minutes: Vec<f64>,
    sample_minutes: Vec<f64>,
    status: Option<(PointStatus, String)>,
}

fn run_point(config: &ExperimentConfig, ctx: &MetricContext, point: &Point) -> Outcome {
    let mut out = Outcome::default();
    if config.time_limit_minutes <= 0.0 {
        out.status = Some((PointStatus::Timeout, "time limit is zero".into()));
        return out;
    }
    let spec = match point.epsilon.spec(config.delta) {
        Ok(s) => s,
        Err(e) => {
            out.status = Some((PointStatus::Failed, e.to_string()));
            return out;
        }
    };
    let train = ctx.train();
    for i in 0..config.m {
        let fit_seed = config.seed.wrapping_add(i as u64);
        let (fitted, timing) = time_section("fit", || {
            fit(point.model, train, spec, fit_seed, config.bins)
        });
        out.fit_minutes.push(timing.minutes);
        let fitted = match fitted {
            Ok(f) => f,
            Err(e) => {
                out.status = Some((PointStatus::Failed, format!("fit {i}: {e}")));
                return out;
            }
        };
        if timing.minutes > config.time_limit_minutes {
            out.status = Some((
                PointStatus::Timeout,
                format!("fit {i} took {:.3} minutes", timing.minutes),
            ));
            return out;
        }
        for j in 0..config.s {
            let (synth, timing) = time_section("sample", || {
                fitted.sample(train.n_rows(), sample_seed(fit_seed, j))
            });
            out.sample_minutes.push(timing.minutes);
            match synth.and_then(|t| ctx.evaluate(&t)) {
                Ok(values) => out.metrics.push(values),
                Err(e) => {
                    out.status = Some((PointStatus::Failed, format!("fit {i} sample {j}: {e}")));
                    return out;
                }
            }
        }
    }
    out
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let std = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn mean_of(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Runs every (model, epsilon, sweep value) point on one worker.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ReportRow>, BenchError> {
    run_experiment_with_jobs(config, 1)
}

/// Runs the sweep with up to `jobs` points in parallel.
///
/// Rows come out ordered by model, then epsilon, then sweep value, whatever
/// the number of jobs. Timing columns are only comparable across points when
/// `jobs == 1`.
pub fn run_experiment_with_jobs(
    config: &ExperimentConfig,
    jobs: usize,
) -> Result<Vec<ReportRow>, BenchError> {
    config.validate()?;
    let contexts = config
        .sweep
        .values
        .iter()
        .map(|&v| {
            let (train, test) = prepare_data(config, v)?;
            Ok(MetricContext::new(
                train,
                test,
                config.bins,
                config.clusters,
                config.seed,
            )?)
        })
        .collect::<Result<Vec<_>, BenchError>>()?;
    let points: Vec<Point> = config
        .models
        .iter()
        .flat_map(|model| {
            config.epsilons.iter().flat_map(move |&epsilon| {
                (0..config.sweep.values.len()).map(move |value_index| Point {
                    model,
                    epsilon,
                    value_index,
                })
            })
        })
        .collect();
    let run = |p: &Point| run_point(config, &contexts[p.value_index], p);
    let outcomes: Vec<Outcome> = if jobs <= 1 {
        points.iter().map(run).collect()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build()
            .map_err(|e| BenchError::Io(e.to_string()))?
            .install(|| points.par_iter().map(run).collect())
    };

    let dataset = config.dataset.id();
    let mut rows = Vec::new();
    for (point, outcome) in points.iter().zip(outcomes) {
        let ctx = &contexts[point.value_index];
        let base = ReportRow {
            dataset: dataset.clone(),
            model: point.model.name().to_string(),
            epsilon: point.epsilon,
            n: ctx.train().n_rows(),
            d: ctx.train().n_cols(),
            metric: None,
            mean: None,
            std: None,
            count: 0,
            fit_minutes: mean_of(&outcome.fit_minutes),
            sample_minutes: mean_of(&outcome.sample_minutes),
            status: PointStatus::Ok,
            note: String::new(),
        };
        if let Some((status, note)) = outcome.status {
            rows.push(ReportRow {
                status,
                note,
                ..base
            });
            continue;
        }
        for (k, name) in ctx.metric_names().into_iter().enumerate() {
            let values: Vec<f64> = outcome.metrics.iter().map(|m| m[k]).collect();
            let (mean, std) = mean_std(&values);
            rows.push(ReportRow {
                metric: Some(name.to_string()),
                mean: Some(mean),
                std: Some(std),
                count: values.len(),
                ..base.clone()
            });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(m: usize, s: usize) -> ExperimentConfig {
        ExperimentConfig::from_toml(&format!(
            r#"
epsilons = [1.0, "inf"]
models = [{{ kind = "independent" }}]
m = {m}
s = {s}
seed = 3

[dataset]
source = "gauss"
family = "mix_sup"
d = 3

[sweep]
axis = "rows"
values = [300]
"#
        ))
        .unwrap()
    }

    #[test]
    fn repetitions_per_point() {
        let rows = run_experiment(&config(2, 3)).unwrap();
        assert!(rows
            .iter()
            .all(|r| r.count == 6 && r.status == PointStatus::Ok));
        // 2 epsilons x (marginal, mi, mean, corr x2, silhouette, accuracy, f1)
        assert_eq!(rows.len(), 2 * 8);
        assert!(rows.iter().all(|r| r.n == 300 && r.d == 4));
    }

    #[test]
    fn zero_time_limit_times_out_everything() {
        let mut c = config(1, 1);
        c.time_limit_minutes = 0.0;
        let rows = run_experiment(&c).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows
            .iter()
            .all(|r| r.status == PointStatus::Timeout && r.mean.is_none()));
    }

    #[test]
    fn failures_are_recorded() {
        let mut c = config(1, 1);
        c.epsilons = vec![Epsilon(0.01), Epsilon(f64::INFINITY)];
        c.models = vec![ModelSpec::DpWgan(dpsynth::gan::GanConfig {
            noise_dim: 4,
            hidden: vec![8],
            batch_size: 30,
            epochs: 1,
            ..Default::default()
        })];
        let rows = run_experiment(&c).unwrap();
        assert_eq!(rows[0].status, PointStatus::Failed);
        assert!(rows[0].mean.is_none() && !rows[0].note.is_empty());
        assert!(rows[1..].iter().all(|r| r.status == PointStatus::Ok));
    }

    #[test]
    fn jobs_do_not_change_metrics() {
        let c = config(1, 2);
        let a = run_experiment(&c).unwrap();
        let b = run_experiment_with_jobs(&c, 3).unwrap();
        let metrics = |rows: &[ReportRow]| {
            rows.iter()
                .map(|r| (r.metric.clone(), r.mean, r.std))
                .collect::<Vec<_>>()
        };
        assert_eq!(metrics(&a), metrics(&b));
    }

    #[test]
    fn timing_is_non_negative() {
        let ((), t) = time_section("noop", || ());
        assert!(t.minutes >= 0.0 && t.minutes < 0.001);
        assert_eq!(t.label, "noop");
    }
}
