use ndarray::{concatenate, Array2, Axis};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::{
    gaussian_batch, generate, DenseNet, Encoder, GanConfig, GanModel, Optimizer, TrainingReport,
};
use crate::domain::Table;
use crate::error::{input, Error, Result};
use crate::privacy::{pate_accountant_epsilon, sample_laplace, BudgetLedger, PrivacySpec};

/// Seeded partition of `0..n` into `t` disjoint shards whose sizes differ by at most one.
pub fn shard_indices(n: usize, t: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if t < 2 || n < t {
        return input(format!("cannot split {n} rows among {t} teachers"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha20Rng::seed_from_u64(seed));
    Ok((0..t)
        .map(|k| order[k * n / t..(k + 1) * n / t].to_vec())
        .collect())
}

/// Noisy plurality of `t` binary votes: 1 when the Laplace-noised count of
/// ones beats the noised count of zeros. `scale = 0` disables the noise.
pub fn aggregate_votes<R: Rng + ?Sized>(ones: usize, t: usize, scale: f64, rng: &mut R) -> u8 {
    let (mut yes, mut no) = (ones as f64, (t - ones) as f64);
    if scale > 0.0 {
        yes += sample_laplace(scale, rng);
        no += sample_laplace(scale, rng);
    }
    u8::from(yes > no)
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// One logistic-loss step of `net` on `x` with 0/1 `labels`.
fn classifier_step(
    net: &mut DenseNet,
    opt: &mut Optimizer,
    x: &Array2<f64>,
    labels: &[f64],
) -> Result<()> {
    let cache = net.forward(x)?;
    let rows = labels.len() as f64;
    let grad = Array2::from_shape_fn((labels.len(), 1), |(r, _)| {
        (sigmoid(cache.output()[[r, 0]]) - labels[r]) / rows
    });
    let (g, _) = net.backward(&cache, &grad)?;
    opt.step(net, &g);
    Ok(())
}

fn stack(a: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    concatenate(Axis(0), &[a.view(), b.view()]).map_err(|e| Error::Internal(e.to_string()))
}

/// Trains PATE-GAN.
///
/// Every epoch, each teacher makes one pass over its own shard, telling real
/// rows from fakes. The student then takes as many steps as one teacher did,
/// each on a batch of fakes labeled by noisy teacher votes, and the generator
/// takes one step against the student after each of them. Each labeled fake
/// is a query costing `2 / vote_noise_scale`; training stops before the
/// composed cost would exceed the target epsilon.
pub fn pategan_fit(
    train: &Table,
    spec: PrivacySpec,
    config: &GanConfig,
    seed: u64,
) -> Result<GanModel> {
    let n = train.n_rows();
    let t = config.teachers;
    let shards = shard_indices(n, t, seed)?;
    config.validate(n)?;
    let private = spec.epsilon().is_finite();
    if private && spec.delta() <= 0.0 {
        return Err(Error::Budget(
            "PATE-GAN's composition bound needs delta > 0".into(),
        ));
    }
    let scale = if private {
        config.vote_noise_scale
    } else {
        0.0
    };
    let per_query = 2.0 / config.vote_noise_scale;
    let batch = config.batch_size;

    let encoder = Encoder::new(train.schema());
    let data = encoder.encode(train)?;
    let width = encoder.width();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut gen = config.generator(width, &mut rng)?;
    let mut student = config.discriminator(width, &mut rng)?;
    let mut opt_g = Optimizer::new(config.optimizer, config.learning_rate, &gen);
    let mut opt_s = Optimizer::new(config.optimizer, config.learning_rate, &student);

    // Each teacher owns its network, optimizer and random stream.
    let mut teacher_rngs: Vec<ChaCha20Rng> = (0..t)
        .map(|k| {
            let mut r = ChaCha20Rng::seed_from_u64(seed);
            r.set_stream(k as u64 + 1);
            r
        })
        .collect();
    let mut teachers = teacher_rngs
        .iter_mut()
        .map(|r| config.discriminator(width, r))
        .collect::<Result<Vec<_>>>()?;
    let mut opt_t: Vec<Optimizer> = teachers
        .iter()
        .map(|net| Optimizer::new(config.optimizer, config.learning_rate, net))
        .collect();
    let shard_data: Vec<Array2<f64>> = shards.iter().map(|s| data.select(Axis(0), s)).collect();
    let student_steps = shards[0].len().div_ceil(batch);

    let mut report = TrainingReport::default();
    'epochs: for _ in 0..config.epochs {
        for k in 0..t {
            let rows = shard_data[k].nrows();
            let mut order: Vec<usize> = (0..rows).collect();
            order.shuffle(&mut teacher_rngs[k]);
            for chunk in order.chunks(batch) {
                let real = shard_data[k].select(Axis(0), chunk);
                let z = gaussian_batch(chunk.len(), config.noise_dim, &mut teacher_rngs[k]);
                let (_, fake) = generate(&gen, &encoder, &z)?;
                let labels: Vec<f64> = (0..2 * chunk.len())
                    .map(|r| f64::from(u8::from(r < chunk.len())))
                    .collect();
                classifier_step(
                    &mut teachers[k],
                    &mut opt_t[k],
                    &stack(&real, &fake)?,
                    &labels,
                )?;
            }
        }

        for _ in 0..student_steps {
            if private
                && pate_accountant_epsilon(report.queries + batch as u64, per_query, spec.delta())?
                    > spec.epsilon()
            {
                report.stopped_early = true;
                break 'epochs;
            }
            let z = gaussian_batch(batch, config.noise_dim, &mut rng);
            let (_, fake) = generate(&gen, &encoder, &z)?;
            let mut ones = vec![0usize; batch];
            for teacher in &teachers {
                let scores = teacher.predict(&fake)?;
                for (o, s) in ones.iter_mut().zip(scores.column(0)) {
                    *o += usize::from(*s > 0.0);
                }
            }
            let labels: Vec<f64> = ones
                .iter()
                .map(|&o| f64::from(aggregate_votes(o, t, scale, &mut rng)))
                .collect();
            report.queries += batch as u64;
            classifier_step(&mut student, &mut opt_s, &fake, &labels)?;

            // Generator step: push the student's belief that fakes are real.
            let z = gaussian_batch(batch, config.noise_dim, &mut rng);
            let (gcache, fake) = generate(&gen, &encoder, &z)?;
            let scache = student.forward(&fake)?;
            let up = scache.output().mapv(|s| -(1.0 - sigmoid(s)) / batch as f64);
            let (_, d_fake) = student.backward(&scache, &up)?;
            let d_logits = encoder.activate_backward(&fake, &d_fake);
            let (ggrad, _) = gen.backward(&gcache, &d_logits)?;
            opt_g.step(&mut gen, &ggrad);
            report.generator_steps += 1;
            report.critic_steps += 1;
        }
    }

    let mut ledger = BudgetLedger::new(spec);
    let spent = if !private {
        f64::INFINITY
    } else if report.queries == 0 {
        0.0
    } else {
        pate_accountant_epsilon(report.queries, per_query, spec.delta())?
    };
    ledger.spend(
        "pategan/teacher-votes",
        spent,
        if report.queries > 0 {
            spec.delta()
        } else {
            0.0
        },
    )?;

    Ok(GanModel {
        encoder,
        generator: gen,
        discriminator: student,
        noise_dim: config.noise_dim,
        ledger,
        report,
        teachers,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate as gen_data, GaussFamily, GaussSpec};
    use crate::domain::{ColumnData, Table};
    use crate::synth::Synthesizer;

    fn small() -> GanConfig {
        GanConfig {
            noise_dim: 8,
            hidden: vec![16],
            batch_size: 16,
            epochs: 2,
            teachers: 4,
            ..Default::default()
        }
    }

    #[test]
    fn plurality_without_noise() {
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert_eq!(aggregate_votes(7, 10, 0.0, &mut rng), 1);
        assert_eq!(aggregate_votes(3, 10, 0.0, &mut rng), 0);
        assert_eq!(aggregate_votes(5, 10, 0.0, &mut rng), 0);
    }

    #[test]
    fn shards_partition_rows() {
        let shards = shard_indices(103, 10, 4).unwrap();
        let mut all: Vec<usize> = shards.concat();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
        assert!(shards.iter().all(|s| s.len() == 10 || s.len() == 11));
        assert!(shard_indices(5, 10, 0).is_err());
        assert!(shard_indices(5, 1, 0).is_err());
    }

    #[test]
    fn teacher_depends_only_on_its_shard() {
        let t = gen_data(&GaussSpec::new(GaussFamily::Corr, 256, 3, 5).unwrap()).unwrap();
        let config = GanConfig {
            epochs: 1,
            ..small()
        };
        let shards = shard_indices(256, 4, 11).unwrap();
        let victim = shards[2][0];
        let mut cols: Vec<Vec<f64>> = (0..3).map(|j| t.values(j).unwrap().to_vec()).collect();
        cols[1][victim] = 3.25;
        let changed = Table::new(
            t.schema().clone(),
            cols.into_iter().map(ColumnData::Values).collect(),
        )
        .unwrap();
        let spec = PrivacySpec::non_private();
        let a = pategan_fit(&t, spec, &config, 11).unwrap();
        let b = pategan_fit(&changed, spec, &config, 11).unwrap();
        for k in [0, 1, 3] {
            assert_eq!(a.teachers()[k], b.teachers()[k]);
        }
        assert_ne!(a.teachers()[2], b.teachers()[2]);
    }

    #[test]
    fn budget_stops_training() {
        let t = gen_data(&GaussSpec::new(GaussFamily::Eye, 640, 2, 6).unwrap()).unwrap();
        let config = GanConfig {
            epochs: 50,
            ..small()
        };
        let spec = PrivacySpec::new(1.0, 1e-5).unwrap();
        let model = pategan_fit(&t, spec, &config, 1).unwrap();
        let r = model.report();
        assert!(r.stopped_early);
        assert!(model.ledger().epsilon_spent() <= 1.0);
        let next = pate_accountant_epsilon(r.queries + 16, 0.2, 1e-5).unwrap();
        assert!(next > 1.0);
        assert_eq!(model.sample(20, 0).unwrap().n_rows(), 20);
    }

    #[test]
    fn sampling_contract() {
        let t = gen_data(&GaussSpec::new(GaussFamily::MixSup, 256, 2, 3).unwrap()).unwrap();
        let model = pategan_fit(&t, PrivacySpec::non_private(), &small(), 4).unwrap();
        let a = model.sample(100, 5).unwrap();
        assert_eq!(a, model.sample(100, 5).unwrap());
        assert!(a.codes(2).unwrap().iter().all(|&c| c < 6));
        assert!(pategan_fit(&t, PrivacySpec::pure(1.0).unwrap(), &small(), 4).is_err());
    }
}
