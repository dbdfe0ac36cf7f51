use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{input, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    /// Slope 0.2 on the negative side.
    LeakyRelu,
    Tanh,
    Identity,
}

const LEAKY_SLOPE: f64 = 0.2;

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::LeakyRelu => {
                if z > 0.0 {
                    z
                } else {
                    LEAKY_SLOPE * z
                }
            }
            Activation::Tanh => z.tanh(),
            Activation::Identity => z,
        }
    }

    /// Derivative, given both the pre-activation `z` and the output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu => {
                if z > 0.0 {
                    1.0
                } else {
                    LEAKY_SLOPE
                }
            }
            Activation::Tanh => 1.0 - a * a,
            Activation::Identity => 1.0,
        }
    }
}

/// Affine map `x W + b` followed by an activation. `W` is `inputs x outputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

/// Fully connected feed-forward network over row batches.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Layer inputs and pre-activations recorded by [`DenseNet::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    inputs: Vec<Array2<f64>>,
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
}

impl ForwardCache {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn batch_size(&self) -> usize {
        self.output.nrows()
    }
}

/// One gradient (or update) per layer, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub bias: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Self {
            weights: net
                .layers
                .iter()
                .map(|l| Array2::zeros(l.weights.raw_dim()))
                .collect(),
            bias: net
                .layers
                .iter()
                .map(|l| Array1::zeros(l.bias.len()))
                .collect(),
        }
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.bias)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
            .collect()
    }

    pub fn norm(&self) -> f64 {
        self.weights
            .iter()
            .map(|w| w.iter().map(|x| x * x).sum::<f64>())
            .chain(
                self.bias
                    .iter()
                    .map(|b| b.iter().map(|x| x * x).sum::<f64>()),
            )
            .sum::<f64>()
            .sqrt()
    }

    pub fn scale(&mut self, f: f64) {
        self.weights.iter_mut().for_each(|w| *w *= f);
        self.bias.iter_mut().for_each(|b| *b *= f);
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        self.weights
            .iter_mut()
            .zip(&other.weights)
            .for_each(|(a, b)| *a += b);
        self.bias
            .iter_mut()
            .zip(&other.bias)
            .for_each(|(a, b)| *a += b);
    }

    /// Adds i.i.d. N(0, std^2) to every entry.
    pub fn add_gaussian_noise<R: Rng + ?Sized>(&mut self, std: f64, rng: &mut R) {
        if std == 0.0 {
            return;
        }
        let mut noise = |x: &mut f64| {
            *x += std * {
                let v: f64 = StandardNormal.sample(rng);
                v
            }
        };
        self.weights
            .iter_mut()
            .for_each(|w| w.iter_mut().for_each(&mut noise));
        self.bias
            .iter_mut()
            .for_each(|b| b.iter_mut().for_each(&mut noise));
    }
}

/// Scales each gradient vector by `min(1, c / ||g||)`.
pub fn per_example_clip(grads: &[Vec<f64>], c: f64) -> Result<Vec<Vec<f64>>> {
    if !(c > 0.0) {
        return input(format!("clip norm must be positive, got {c}"));
    }
    Ok(grads
        .iter()
        .map(|g| {
            let norm = g.iter().map(|x| x * x).sum::<f64>().sqrt();
            let f = clip_factor(norm, c);
            g.iter().map(|x| x * f).collect()
        })
        .collect())
}

fn clip_factor(norm: f64, c: f64) -> f64 {
    if norm > c {
        c / norm
    } else {
        1.0
    }
}

/// Output of [`DenseNet::clipped_backward`].
#[derive(Debug, Clone)]
pub struct ClippedGradients {
    /// Sum over groups of each group's clipped gradient.
    pub sum: Gradients,
    /// Unclipped L2 norm of each group's gradient.
    pub norms: Vec<f64>,
}

impl DenseNet {
    /// Random initialization: N(0, 2 / fan_in) weights for rectifier layers,
    /// N(0, 1 / fan_in) otherwise; zero biases.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || activations.len() != sizes.len() - 1 {
            return input("a network needs at least two layer sizes and one activation per layer");
        }
        if sizes.contains(&0) {
            return input("layer sizes must be positive");
        }
        let layers = sizes
            .windows(2)
            .zip(activations)
            .map(|(w, &activation)| {
                let gain = match activation {
                    Activation::Relu | Activation::LeakyRelu => 2.0,
                    _ => 1.0,
                };
                let std = (gain / w[0] as f64).sqrt();
                Layer {
                    weights: Array2::from_shape_simple_fn((w[0], w[1]), || {
                        std * {
                            let v: f64 = StandardNormal.sample(rng);
                            v
                        }
                    }),
                    bias: Array1::zeros(w[1]),
                    activation,
                }
            })
            .collect();
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return input("a network needs at least one layer");
        }
        for (k, l) in layers.iter().enumerate() {
            if l.bias.len() != l.weights.ncols() {
                return input(format!("layer {k}: bias length differs from output width"));
            }
            if k > 0 && layers[k - 1].weights.ncols() != l.weights.nrows() {
                return input(format!(
                    "layer {k}: input width differs from previous output width"
                ));
            }
            if l.weights
                .iter()
                .chain(l.bias.iter())
                .any(|x| !x.is_finite())
            {
                return input(format!("layer {k}: parameters must be finite"));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_width(&self) -> usize {
        self.layers[0].weights.nrows()
    }

    pub fn output_width(&self) -> usize {
        self.layers[self.layers.len() - 1].weights.ncols()
    }

    pub fn n_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<ForwardCache> {
        if x.ncols() != self.input_width() {
            return input(format!(
                "input has {} columns, network expects {}",
                x.ncols(),
                self.input_width()
            ));
        }
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut a = x.clone();
        for l in &self.layers {
            let z = a.dot(&l.weights) + &l.bias;
            let act = l.activation;
            let next = z.mapv(|v| act.apply(v));
            inputs.push(std::mem::replace(&mut a, next));
            pre.push(z);
        }
        Ok(ForwardCache {
            inputs,
            pre,
            output: a,
        })
    }

    pub fn predict(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        Ok(self.forward(x)?.output)
    }

    fn check_cache(&self, cache: &ForwardCache, grad_out: &Array2<f64>) -> Result<()> {
        if cache.inputs.len() != self.layers.len()
            || cache
                .inputs
                .iter()
                .zip(&self.layers)
                .any(|(a, l)| a.ncols() != l.weights.nrows())
        {
            return Err(Error::Input(
                "forward cache does not belong to this network".into(),
            ));
        }
        if grad_out.dim() != cache.output.dim() {
            return input(format!(
                "output gradient has shape {:?}, forward output {:?}",
                grad_out.dim(),
                cache.output.dim()
            ));
        }
        Ok(())
    }

    /// Gradients of the pre-activations of every layer, last layer first
    /// reversed back into layer order, plus the gradient w.r.t. the input.
    fn delta_chain(
        &self,
        cache: &ForwardCache,
        grad_out: &Array2<f64>,
    ) -> (Vec<Array2<f64>>, Array2<f64>) {
        let mut deltas = vec![Array2::zeros((0, 0)); self.layers.len()];
        let mut upstream = grad_out.clone();
        for k in (0..self.layers.len()).rev() {
            let l = &self.layers[k];
            let out = if k + 1 < self.layers.len() {
                &cache.inputs[k + 1]
            } else {
                &cache.output
            };
            let mut dz = upstream;
            let act = l.activation;
            Zip::from(&mut dz)
                .and(&cache.pre[k])
                .and(out)
                .for_each(|g, &z, &a| *g *= act.derivative(z, a));
            upstream = dz.dot(&l.weights.t());
            deltas[k] = dz;
        }
        (deltas, upstream)
    }

    /// Reverse-mode gradients of `sum(grad_out * output)` w.r.t. every parameter,
    /// and w.r.t. the input batch.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        grad_out: &Array2<f64>,
    ) -> Result<(Gradients, Array2<f64>)> {
        self.check_cache(cache, grad_out)?;
        let (deltas, grad_in) = self.delta_chain(cache, grad_out);
        let weights = cache
            .inputs
            .iter()
            .zip(&deltas)
            .map(|(a, dz)| a.t().dot(dz))
            .collect();
        let bias = deltas.iter().map(|dz| dz.sum_axis(Axis(0))).collect();
        Ok((Gradients { weights, bias }, grad_in))
    }

    /// Per-group gradients, each clipped to L2 norm `c`, then summed.
    ///
    /// `groups` lists the batch rows whose contributions form one example's
    /// gradient. Norms come from inner products of layer inputs and deltas, so
    /// no per-example gradient is materialized.
    pub fn clipped_backward(
        &self,
        cache: &ForwardCache,
        grad_out: &Array2<f64>,
        groups: &[Vec<usize>],
        c: f64,
    ) -> Result<ClippedGradients> {
        self.check_cache(cache, grad_out)?;
        if !(c > 0.0) {
            return input(format!("clip norm must be positive, got {c}"));
        }
        let rows = cache.batch_size();
        let mut owner = vec![usize::MAX; rows];
        for (g, members) in groups.iter().enumerate() {
            for &r in members {
                if r >= rows || owner[r] != usize::MAX {
                    return input("clipping groups must be disjoint batch rows");
                }
                owner[r] = g;
            }
        }
        let (deltas, _) = self.delta_chain(cache, grad_out);
        let mut sq = vec![0.0; groups.len()];
        for (a, dz) in cache.inputs.iter().zip(&deltas) {
            for (g, members) in groups.iter().enumerate() {
                for &r in members {
                    for &s in members {
                        let aa = a.row(r).dot(&a.row(s));
                        let dd = dz.row(r).dot(&dz.row(s));
                        sq[g] += (aa + 1.0) * dd;
                    }
                }
            }
        }
        let norms: Vec<f64> = sq.iter().map(|s| s.max(0.0).sqrt()).collect();
        let factors: Vec<f64> = (0..rows)
            .map(|r| match owner[r] {
                usize::MAX => 0.0,
                g => clip_factor(norms[g], c),
            })
            .collect();
        let scale = Array1::from(factors).insert_axis(Axis(1));
        let weights = cache
            .inputs
            .iter()
            .zip(&deltas)
            .map(|(a, dz)| a.t().dot(&(dz * &scale)))
            .collect();
        let bias = deltas
            .iter()
            .map(|dz| (dz * &scale).sum_axis(Axis(0)))
            .collect();
        Ok(ClippedGradients {
            sum: Gradients { weights, bias },
            norms,
        })
    }

    /// Materialized gradient of each group. Slow; used to audit clipping.
    pub fn group_gradients(
        &self,
        cache: &ForwardCache,
        grad_out: &Array2<f64>,
        groups: &[Vec<usize>],
    ) -> Result<Vec<Gradients>> {
        self.check_cache(cache, grad_out)?;
        let (deltas, _) = self.delta_chain(cache, grad_out);
        Ok(groups
            .iter()
            .map(|members| {
                let idx = members.as_slice();
                let weights = cache
                    .inputs
                    .iter()
                    .zip(&deltas)
                    .map(|(a, dz)| a.select(Axis(0), idx).t().dot(&dz.select(Axis(0), idx)))
                    .collect();
                let bias = deltas
                    .iter()
                    .map(|dz| dz.select(Axis(0), idx).sum_axis(Axis(0)))
                    .collect();
                Gradients { weights, bias }
            })
            .collect())
    }

    /// `params += update`.
    pub fn apply(&mut self, update: &Gradients) {
        for ((l, w), b) in self
            .layers
            .iter_mut()
            .zip(&update.weights)
            .zip(&update.bias)
        {
            l.weights += w;
            l.bias += b;
        }
    }

    /// Clamps every weight and bias into `[-c, c]`.
    pub fn clip_weights(&mut self, c: f64) {
        for l in &mut self.layers {
            l.weights.mapv_inplace(|x| x.clamp(-c, c));
            l.bias.mapv_inplace(|x| x.clamp(-c, c));
        }
    }

    pub fn max_abs_weight(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(l.bias.iter()))
            .fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn identity_layer_passes_input_through() {
        let net = DenseNet::from_layers(vec![Layer {
            weights: Array2::eye(3),
            bias: Array1::zeros(3),
            activation: Activation::Identity,
        }])
        .unwrap();
        let x = array![[1.0, -2.0, 3.5], [0.0, 4.0, -1.0]];
        assert_eq!(net.predict(&x).unwrap(), x);
    }

    #[test]
    fn zero_network_outputs_zero() {
        let net = DenseNet::from_layers(vec![Layer {
            weights: Array2::zeros((2, 4)),
            bias: Array1::zeros(4),
            activation: Activation::Tanh,
        }])
        .unwrap();
        assert!(net
            .predict(&array![[3.0, -7.0]])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn hand_computed_two_layer() {
        // h = relu([1, 2] W1 + b1) = relu([1*1 + 2*3 + 0.5, 1*(-2) + 2*1 - 1]) = [7.5, 0]
        // y = h W2 + b2 = 7.5 * 2 + 0 * 5 - 1 = 14
        let net = DenseNet::from_layers(vec![
            Layer {
                weights: array![[1.0, -2.0], [3.0, 1.0]],
                bias: array![0.5, -1.0],
                activation: Activation::Relu,
            },
            Layer {
                weights: array![[2.0], [5.0]],
                bias: array![-1.0],
                activation: Activation::Identity,
            },
        ])
        .unwrap();
        assert_eq!(net.predict(&array![[1.0, 2.0]]).unwrap(), array![[14.0]]);
        assert!(net.predict(&array![[1.0, 2.0, 3.0]]).is_err());
    }

    #[test]
    fn zero_and_scaled_upstream() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let net = DenseNet::new(
            &[3, 5, 2],
            &[Activation::Tanh, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let x = Array2::from_shape_fn((4, 3), |(i, j)| (i as f64 - j as f64) * 0.3);
        let cache = net.forward(&x).unwrap();
        let (g0, _) = net.backward(&cache, &Array2::zeros((4, 2))).unwrap();
        assert!(g0.flatten().iter().all(|&v| v == 0.0));
        let up = Array2::from_shape_fn((4, 2), |(i, j)| 0.1 * (i + j) as f64 - 0.2);
        let (g1, _) = net.backward(&cache, &up).unwrap();
        let (g2, _) = net.backward(&cache, &(&up * 2.0)).unwrap();
        for (a, b) in g1.flatten().iter().zip(g2.flatten()) {
            assert!((2.0 * a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn foreign_cache_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let a = DenseNet::new(
            &[3, 4, 1],
            &[Activation::Relu, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let b = DenseNet::new(
            &[2, 4, 1],
            &[Activation::Relu, Activation::Identity],
            &mut rng,
        )
        .unwrap();
        let cache = b.forward(&Array2::zeros((2, 2))).unwrap();
        assert!(a.backward(&cache, &Array2::zeros((2, 1))).is_err());
    }

    #[test]
    fn clip_examples() {
        let g = vec![vec![6.0, 8.0], vec![0.3, 0.4]];
        let out = per_example_clip(&g, 1.0).unwrap();
        assert!((out[0][0] - 0.6).abs() < 1e-15 && (out[0][1] - 0.8).abs() < 1e-15);
        assert_eq!(out[1], g[1]);
        assert!(per_example_clip(&g, 0.0).is_err());
    }

    #[test]
    fn clipped_backward_matches_materialized() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let net = DenseNet::new(
            &[4, 6, 5, 2],
            &[
                Activation::LeakyRelu,
                Activation::Tanh,
                Activation::Identity,
            ],
            &mut rng,
        )
        .unwrap();
        let x = Array2::from_shape_fn((6, 4), |(i, j)| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let cache = net.forward(&x).unwrap();
        let up = Array2::from_shape_fn((6, 2), |(i, j)| if (i + j) % 2 == 0 { 1.5 } else { -0.7 });
        let groups = vec![vec![0, 3], vec![1, 4], vec![2, 5]];
        let c = 0.8;
        let clipped = net.clipped_backward(&cache, &up, &groups, c).unwrap();
        let per = net.group_gradients(&cache, &up, &groups).unwrap();
        let mut want = Gradients::zeros_like(&net);
        for (g, norm) in per.iter().zip(&clipped.norms) {
            assert!((g.norm() - norm).abs() < 1e-9 * norm.max(1.0));
            let mut g = g.clone();
            g.scale(clip_factor(g.norm(), c));
            assert!(g.norm() <= c * (1.0 + 1e-12));
            want.add_assign(&g);
        }
        for (a, b) in clipped.sum.flatten().iter().zip(want.flatten()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    fn perturbed(layers: &[Layer], l: usize, bias: bool, i: usize, h: f64) -> DenseNet {
        let mut layers = layers.to_vec();
        if bias {
            layers[l].bias[i] += h;
        } else {
            let cols = layers[l].weights.ncols();
            layers[l].weights[[i / cols, i % cols]] += h;
        }
        DenseNet::from_layers(layers).unwrap()
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let kinds = [
            Activation::Tanh,
            Activation::LeakyRelu,
            Activation::Relu,
            Activation::Identity,
        ];
        let h = 1e-4;
        let close = |fd: f64, g: f64| (fd - g).abs() <= 1e-4 * fd.abs().max(g.abs()).max(1e-2);
        for _ in 0..20 {
            let sizes: Vec<usize> = (0..4).map(|_| rng.random_range(1..6)).collect();
            let acts: Vec<Activation> = (0..3)
                .map(|_| kinds[rng.random_range(0..kinds.len())])
                .collect();
            let mut net = DenseNet::new(&sizes, &acts, &mut rng).unwrap();
            for layer in &mut net.layers {
                layer.bias.mapv_inplace(|_| rng.random_range(-0.5..0.5));
            }
            let x = Array2::from_shape_simple_fn((3, sizes[0]), || rng.random_range(-2.0..2.0));
            let up = Array2::from_shape_simple_fn((3, sizes[3]), || rng.random_range(-1.0..1.0));
            let loss = |n: &DenseNet, x: &Array2<f64>| (n.predict(x).unwrap() * &up).sum();
            let (grads, grad_x) = net.backward(&net.forward(&x).unwrap(), &up).unwrap();
            for l in 0..3 {
                for (bias, count) in [
                    (false, net.layers[l].weights.len()),
                    (true, net.layers[l].bias.len()),
                ] {
                    for i in 0..count {
                        let fd = (loss(&perturbed(&net.layers, l, bias, i, h), &x)
                            - loss(&perturbed(&net.layers, l, bias, i, -h), &x))
                            / (2.0 * h);
                        let g = if bias {
                            grads.bias[l][i]
                        } else {
                            let cols = grads.weights[l].ncols();
                            grads.weights[l][[i / cols, i % cols]]
                        };
                        assert!(close(fd, g), "layer {l} bias {bias} #{i}: {fd} vs {g}");
                    }
                }
            }
            for ((r, c), g) in grad_x.indexed_iter() {
                let mut plus = x.clone();
                plus[[r, c]] += h;
                let mut minus = x.clone();
                minus[[r, c]] -= h;
                let fd = (loss(&net, &plus) - loss(&net, &minus)) / (2.0 * h);
                assert!(close(fd, *g), "input ({r},{c}): {fd} vs {g}");
            }
        }
    }
}
