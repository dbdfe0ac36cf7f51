use ndarray::Zip;
use serde::{Deserialize, Serialize};

use super::net::{DenseNet, Gradients};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    RmsProp,
    /// Adam with beta1 = 0.5, beta2 = 0.9.
    Adam,
}

const RMS_DECAY: f64 = 0.99;
const ADAM_BETA1: f64 = 0.5;
const ADAM_BETA2: f64 = 0.9;
const STABILITY: f64 = 1e-8;

/// Descent state for one network. Updates only read the (already privatized) gradient.
#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    first: Gradients,
    second: Gradients,
    steps: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, lr: f64, net: &DenseNet) -> Self {
        Self {
            kind,
            lr,
            first: Gradients::zeros_like(net),
            second: Gradients::zeros_like(net),
            steps: 0,
        }
    }

    /// Moves `net` against `grad`.
    pub fn step(&mut self, net: &mut DenseNet, grad: &Gradients) {
        self.steps += 1;
        let lr = self.lr;
        let mut update = grad.clone();
        match self.kind {
            OptimizerKind::Sgd => update.scale(-lr),
            OptimizerKind::RmsProp => {
                let each = |u: &mut f64, v: &mut f64| {
                    *v = RMS_DECAY * *v + (1.0 - RMS_DECAY) * *u * *u;
                    *u = -lr * *u / (v.sqrt() + STABILITY);
                };
                for (u, v) in update.weights.iter_mut().zip(&mut self.second.weights) {
                    Zip::from(u).and(v).for_each(each);
                }
                for (u, v) in update.bias.iter_mut().zip(&mut self.second.bias) {
                    Zip::from(u).and(v).for_each(each);
                }
            }
            OptimizerKind::Adam => {
                let c1 = 1.0 - ADAM_BETA1.powi(self.steps);
                let c2 = 1.0 - ADAM_BETA2.powi(self.steps);
                let each = |u: &mut f64, m: &mut f64, v: &mut f64| {
                    *m = ADAM_BETA1 * *m + (1.0 - ADAM_BETA1) * *u;
                    *v = ADAM_BETA2 * *v + (1.0 - ADAM_BETA2) * *u * *u;
                    *u = -lr * (*m / c1) / ((*v / c2).sqrt() + STABILITY);
                };
                for ((u, m), v) in update
                    .weights
                    .iter_mut()
                    .zip(&mut self.first.weights)
                    .zip(&mut self.second.weights)
                {
                    Zip::from(u).and(m).and(v).for_each(each);
                }
                for ((u, m), v) in update
                    .bias
                    .iter_mut()
                    .zip(&mut self.first.bias)
                    .zip(&mut self.second.bias)
                {
                    Zip::from(u).and(m).and(v).for_each(each);
                }
            }
        }
        net.apply(&update);
    }
}
