use ndarray::{concatenate, Array2, Axis};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use super::{
    gaussian_batch, generate, ClipAudit, Encoder, GanConfig, GanModel, Gradients, Optimizer,
    TrainingReport,
};
use crate::domain::Table;
use crate::error::{Error, Result};
use crate::privacy::{
    calibrate_noise_multiplier, sgd_accountant_epsilon, BudgetLedger, PrivacySpec,
};

/// Trains a Wasserstein GAN whose critic is updated with DP-SGD.
///
/// Each critic step draws `batch_size` real rows and as many fakes; the
/// critic gradient of every (real, fake) pair is clipped to `clip_norm`, the
/// clipped sum gets N(0, (sigma * clip_norm)^2) noise, and sigma is
/// calibrated so that `epochs * ceil(n / batch_size)` steps at sampling rate
/// `batch_size / n` meet the target. The generator learns only through the
/// critic.
pub fn dpwgan_fit(
    train: &Table,
    spec: PrivacySpec,
    config: &GanConfig,
    seed: u64,
) -> Result<GanModel> {
    let n = train.n_rows();
    config.validate(n)?;
    let batch = config.batch_size;
    let steps = (config.epochs * n.div_ceil(batch)) as u64;
    let rate = batch as f64 / n as f64;
    let private = spec.epsilon().is_finite();
    let sigma = if private {
        if spec.delta() <= 0.0 {
            return Err(Error::Budget("DP-WGAN needs delta > 0".into()));
        }
        calibrate_noise_multiplier(spec, rate, steps)?
    } else {
        0.0
    };
    let mut ledger = BudgetLedger::new(spec);
    let spent = if private {
        sgd_accountant_epsilon(sigma, rate, steps, spec.delta())?
    } else {
        f64::INFINITY
    };
    ledger.spend("dpwgan/critic-dp-sgd", spent, spec.delta())?;

    let encoder = Encoder::new(train.schema());
    let data = encoder.encode(train)?;
    let width = encoder.width();
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut gen = config.generator(width, &mut rng)?;
    let mut critic = config.discriminator(width, &mut rng)?;
    critic.clip_weights(config.weight_clip);
    let mut opt_g = Optimizer::new(config.optimizer, config.learning_rate, &gen);
    let mut opt_c = Optimizer::new(config.optimizer, config.learning_rate, &critic);

    // Row i (real) and row batch + i (fake) form one clipped example.
    let groups: Vec<Vec<usize>> = (0..batch).map(|i| vec![i, batch + i]).collect();
    let mut grad_out = Array2::zeros((2 * batch, 1));
    grad_out.slice_mut(ndarray::s![..batch, ..]).fill(-1.0);
    grad_out.slice_mut(ndarray::s![batch.., ..]).fill(1.0);
    let mut audit = config.audit_clipping.then(ClipAudit::default);
    let mut report = TrainingReport {
        noise_multiplier: sigma,
        ..Default::default()
    };

    for step in 0..steps {
        let idx = index::sample(&mut rng, n, batch).into_vec();
        let real = data.select(Axis(0), &idx);
        let z = gaussian_batch(batch, config.noise_dim, &mut rng);
        let (_, fake) = generate(&gen, &encoder, &z)?;
        let x = concatenate(Axis(0), &[real.view(), fake.view()])
            .map_err(|e| Error::Internal(e.to_string()))?;
        let cache = critic.forward(&x)?;

        let mut grad = if private {
            let clipped = critic.clipped_backward(&cache, &grad_out, &groups, config.clip_norm)?;
            if let Some(a) = audit.as_mut() {
                for (g, norm) in critic
                    .group_gradients(&cache, &grad_out, &groups)?
                    .into_iter()
                    .zip(&clipped.norms)
                {
                    let mut g = g;
                    if *norm > config.clip_norm {
                        g.scale(config.clip_norm / norm);
                    }
                    let clipped_norm = g.norm();
                    a.contributions += 1;
                    if clipped_norm > config.clip_norm * (1.0 + 1e-9) {
                        a.violations += 1;
                    }
                    a.max_clipped_norm = a.max_clipped_norm.max(clipped_norm);
                }
            }
            let mut sum: Gradients = clipped.sum;
            sum.add_gaussian_noise(sigma * config.clip_norm, &mut rng);
            sum
        } else {
            critic.backward(&cache, &grad_out)?.0
        };
        grad.scale(1.0 / batch as f64);
        opt_c.step(&mut critic, &grad);
        critic.clip_weights(config.weight_clip);
        report.critic_steps += 1;

        if (step + 1) % config.critic_iters as u64 == 0 {
            let z = gaussian_batch(batch, config.noise_dim, &mut rng);
            let (gcache, fake) = generate(&gen, &encoder, &z)?;
            let ccache = critic.forward(&fake)?;
            let up = Array2::from_elem((batch, 1), -1.0 / batch as f64);
            let (_, d_fake) = critic.backward(&ccache, &up)?;
            let d_logits = encoder.activate_backward(&fake, &d_fake);
            let (ggrad, _) = gen.backward(&gcache, &d_logits)?;
            opt_g.step(&mut gen, &ggrad);
            report.generator_steps += 1;
        }
    }
    report.clip_audit = audit;

    Ok(GanModel {
        encoder,
        generator: gen,
        discriminator: critic,
        noise_dim: config.noise_dim,
        ledger,
        report,
        teachers: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate as gen_data, GaussFamily, GaussSpec};
    use crate::synth::Synthesizer;

    fn small() -> GanConfig {
        GanConfig {
            noise_dim: 8,
            hidden: vec![16],
            batch_size: 32,
            epochs: 2,
            ..Default::default()
        }
    }

    #[test]
    fn accounting_and_audit() {
        let t = gen_data(&GaussSpec::new(GaussFamily::Corr, 320, 3, 1).unwrap()).unwrap();
        let config = GanConfig {
            audit_clipping: true,
            ..small()
        };
        let spec = PrivacySpec::new(1.0, 1e-5).unwrap();
        let model = dpwgan_fit(&t, spec, &config, 2).unwrap();
        let report = model.report();
        assert_eq!(report.critic_steps, 20);
        assert_eq!(report.generator_steps, 4);
        let audit = report.clip_audit.unwrap();
        assert_eq!(audit.contributions, 20 * 32);
        assert_eq!(audit.violations, 0);
        assert!(model.ledger().epsilon_spent() <= 1.0);
        assert!(model.generator().max_abs_weight().is_finite());
        assert!(model.discriminator().max_abs_weight() <= config.weight_clip);
    }

    #[test]
    fn calibration_failure_is_reported_before_training() {
        let t = gen_data(&GaussSpec::new(GaussFamily::Eye, 320, 2, 1).unwrap()).unwrap();
        let err = dpwgan_fit(&t, PrivacySpec::new(0.01, 1e-5).unwrap(), &small(), 0).unwrap_err();
        assert!(matches!(err, Error::Calibration(_)), "{err}");
        assert!(dpwgan_fit(&t, PrivacySpec::pure(1.0).unwrap(), &small(), 0).is_err());
    }

    #[test]
    fn sampling_contract() {
        let t = gen_data(&GaussSpec::new(GaussFamily::MixSup, 256, 2, 3).unwrap()).unwrap();
        let model = dpwgan_fit(&t, PrivacySpec::non_private(), &small(), 4).unwrap();
        let a = model.sample(100, 5).unwrap();
        assert_eq!(a, model.sample(100, 5).unwrap());
        assert!(a.codes(2).unwrap().iter().all(|&c| c < 6));
        for j in 0..2 {
            assert!(a
                .values(j)
                .unwrap()
                .iter()
                .all(|v| (-6.0..=6.0).contains(v)));
        }
    }
}
