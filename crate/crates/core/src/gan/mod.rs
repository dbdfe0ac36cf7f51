//! Feed-forward networks with hand-written backpropagation, and the two
//! private GAN trainers built on them: DP-WGAN (a Wasserstein critic trained
//! with DP-SGD) and PATE-GAN (a student discriminator trained on noisy votes
//! of teacher discriminators that each see one disjoint shard).

mod dpwgan;
mod encoding;
mod net;
mod optim;
mod pategan;

pub use dpwgan::dpwgan_fit;
pub use encoding::Encoder;
pub use net::{
    per_example_clip, Activation, ClippedGradients, DenseNet, ForwardCache, Gradients, Layer,
};
pub use optim::{Optimizer, OptimizerKind};
pub use pategan::{aggregate_votes, pategan_fit, shard_indices};

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::domain::{Schema, Table};
use crate::error::{input, Result};
use crate::privacy::BudgetLedger;
use crate::synth::Synthesizer;

/// Hyperparameters shared by both GANs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GanConfig {
    pub noise_dim: usize,
    pub hidden: Vec<usize>,
    pub batch_size: usize,
    pub epochs: usize,
    /// Per-example L2 clip for DP-SGD.
    pub clip_norm: f64,
    /// Critic parameters are clamped to `[-weight_clip, weight_clip]`.
    pub weight_clip: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    /// Critic steps per generator step in DP-WGAN.
    pub critic_iters: usize,
    pub teachers: usize,
    /// Laplace scale `b` on PATE vote counts; each query costs `2 / b`.
    pub vote_noise_scale: f64,
    /// Materialize every per-example critic gradient and check its clipped norm.
    pub audit_clipping: bool,
}

impl Default for GanConfig {
    fn default() -> Self {
        Self {
            noise_dim: 64,
            hidden: vec![128, 128],
            batch_size: 64,
            epochs: 100,
            clip_norm: 1.0,
            weight_clip: 0.01,
            learning_rate: 5e-5,
            optimizer: OptimizerKind::RmsProp,
            critic_iters: 5,
            teachers: 10,
            vote_noise_scale: 10.0,
            audit_clipping: false,
        }
    }
}

impl GanConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let counts = [
            ("noise_dim", self.noise_dim),
            ("batch_size", self.batch_size),
            ("epochs", self.epochs),
            ("critic_iters", self.critic_iters),
            ("teachers", self.teachers),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return input(format!("{name} must be positive"));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return input("hidden layer sizes must be non-empty and positive");
        }
        let reals = [
            ("clip_norm", self.clip_norm),
            ("weight_clip", self.weight_clip),
            ("learning_rate", self.learning_rate),
            ("vote_noise_scale", self.vote_noise_scale),
        ];
        if let Some((name, v)) = reals.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return input(format!("{name} must be positive and finite, got {v}"));
        }
        if self.batch_size > n {
            return input(format!(
                "batch size {} exceeds the {n} training rows",
                self.batch_size
            ));
        }
        Ok(())
    }

    fn sizes(&self, first: usize, last: usize) -> Vec<usize> {
        std::iter::once(first)
            .chain(self.hidden.iter().copied())
            .chain([last])
            .collect()
    }

    fn activations(&self, hidden: Activation) -> Vec<Activation> {
        vec![hidden; self.hidden.len()]
            .into_iter()
            .chain([Activation::Identity])
            .collect()
    }

    pub(crate) fn generator<R: Rng + ?Sized>(&self, width: usize, rng: &mut R) -> Result<DenseNet> {
        DenseNet::new(
            &self.sizes(self.noise_dim, width),
            &self.activations(Activation::Relu),
            rng,
        )
    }

    pub(crate) fn discriminator<R: Rng + ?Sized>(
        &self,
        width: usize,
        rng: &mut R,
    ) -> Result<DenseNet> {
        DenseNet::new(
            &self.sizes(width, 1),
            &self.activations(Activation::LeakyRelu),
            rng,
        )
    }
}

/// Per-example clipping audit gathered under [`GanConfig::audit_clipping`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ClipAudit {
    pub contributions: u64,
    pub violations: u64,
    pub max_clipped_norm: f64,
}

/// What happened during training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingReport {
    pub critic_steps: u64,
    pub generator_steps: u64,
    /// DP-SGD noise multiplier; zero when not private.
    pub noise_multiplier: f64,
    /// Teacher-vote queries answered (PATE-GAN).
    pub queries: u64,
    /// Training halted early because the next batch of queries would overspend.
    pub stopped_early: bool,
    pub clip_audit: Option<ClipAudit>,
}

/// A trained generator together with the row encoding it emits.
#[derive(Debug, Clone)]
pub struct GanModel {
    encoder: Encoder,
    generator: DenseNet,
    discriminator: DenseNet,
    noise_dim: usize,
    ledger: BudgetLedger,
    report: TrainingReport,
    teachers: Vec<DenseNet>,
}

impl GanModel {
    pub fn generator(&self) -> &DenseNet {
        &self.generator
    }

    /// The DP-WGAN critic or the PATE-GAN student.
    pub fn discriminator(&self) -> &DenseNet {
        &self.discriminator
    }

    pub fn report(&self) -> &TrainingReport {
        &self.report
    }

    /// PATE-GAN teacher discriminators; empty for DP-WGAN.
    pub fn teachers(&self) -> &[DenseNet] {
        &self.teachers
    }
}

pub(crate) fn gaussian_batch<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || StandardNormal.sample(rng))
}

/// Generator forward pass followed by the output head.
pub(crate) fn generate(
    gen: &DenseNet,
    encoder: &Encoder,
    z: &Array2<f64>,
) -> Result<(ForwardCache, Array2<f64>)> {
    let cache = gen.forward(z)?;
    let out = encoder.activate(cache.output());
    Ok((cache, out))
}

const SAMPLE_CHUNK: usize = 4096;

impl Synthesizer for GanModel {
    fn schema(&self) -> &Schema {
        self.encoder.schema()
    }

    fn ledger(&self) -> &BudgetLedger {
        &self.ledger
    }

    fn sample(&self, n: usize, seed: u64) -> Result<Table> {
        if n == 0 {
            return input("sample size must be at least 1");
        }
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut out = Array2::zeros((0, self.encoder.width()));
        let mut left = n;
        while left > 0 {
            let rows = left.min(SAMPLE_CHUNK);
            let z = gaussian_batch(rows, self.noise_dim, &mut rng);
            let (_, y) = generate(&self.generator, &self.encoder, &z)?;
            out.append(ndarray::Axis(0), y.view())
                .map_err(|e| crate::Error::Internal(e.to_string()))?;
            left -= rows;
        }
        self.encoder.decode(&out)
    }
}
