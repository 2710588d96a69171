//! Softmax linear readout trained with Adam on mean cross-entropy.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Max-subtracted softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn log_sum_exp<T: Real>(logits: &[T]) -> T {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    max + logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln()
}

/// Index of the largest entry; ties go to the lowest index.
fn argmax<T: Real>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel<T> {
    pub classes: usize,
    pub features: usize,
    /// Row-major `classes × features`.
    pub weights: Vec<T>,
    pub bias: Vec<T>,
}

impl<T: Real> LinearModel<T> {
    pub fn zeros(classes: usize, features: usize) -> Self {
        Self {
            classes,
            features,
            weights: vec![T::zero(); classes * features],
            bias: vec![T::zero(); classes],
        }
    }

    pub fn logits(&self, x: &[T]) -> Vec<T> {
        (0..self.classes)
            .map(|c| {
                let row = &self.weights[c * self.features..(c + 1) * self.features];
                row.iter().zip(x).fold(self.bias[c], |acc, (w, v)| acc + *w * *v)
            })
            .collect()
    }

    pub fn predict_proba(&self, x: &[T]) -> Vec<T> {
        softmax(&self.logits(x))
    }

    pub fn predict(&self, x: &[T]) -> usize {
        argmax(&self.logits(x))
    }

    fn params_len(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

fn check_dataset<T: Real>(features: &[Vec<T>], labels: Option<&[usize]>, model: &LinearModel<T>) -> Result<()> {
    if features.is_empty() {
        return Err(Error::Empty("dataset"));
    }
    if let Some(bad) = features.iter().find(|x| x.len() != model.features) {
        return Err(Error::DimensionMismatch {
            what: "feature vector",
            expected: model.features,
            found: bad.len(),
        });
    }
    if let Some(labels) = labels {
        if labels.len() != features.len() {
            return Err(Error::DimensionMismatch {
                what: "labels",
                expected: features.len(),
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= model.classes) {
            return Err(Error::param("labels", format!("label {bad} out of range for {} classes", model.classes)));
        }
    }
    Ok(())
}

/// Mean cross-entropy and its gradient with respect to `(weights, bias)`.
pub fn loss_and_gradient<T: Real>(model: &LinearModel<T>, features: &[Vec<T>], labels: &[usize]) -> (T, LinearModel<T>) {
    let mut grad = LinearModel::zeros(model.classes, model.features);
    let mut loss = T::zero();
    let inv = T::from_count(features.len()).recip();
    for (x, &y) in features.iter().zip(labels) {
        let z = model.logits(x);
        loss += log_sum_exp(&z) - z[y];
        let p = softmax(&z);
        let rows = grad.weights.chunks_mut(model.features);
        for (c, ((&pc, b), row)) in p.iter().zip(grad.bias.iter_mut()).zip(rows).enumerate() {
            let delta = (pc - if c == y { T::one() } else { T::zero() }) * inv;
            *b += delta;
            for (g, v) in row.iter_mut().zip(x) {
                *g += delta * *v;
            }
        }
    }
    (loss * inv, grad)
}

pub fn cross_entropy<T: Real>(model: &LinearModel<T>, features: &[Vec<T>], labels: &[usize]) -> Result<T> {
    check_dataset(features, Some(labels), model)?;
    let total: T = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| {
            let z = model.logits(x);
            log_sum_exp(&z) - z[y]
        })
        .sum();
    Ok(total / T::from_count(features.len()))
}

/// Mean over samples of the largest class probability.
pub fn confidence<T: Real>(model: &LinearModel<T>, features: &[Vec<T>]) -> Result<T> {
    check_dataset(features, None, model)?;
    let total: T = features
        .iter()
        .map(|x| model.predict_proba(x).into_iter().fold(T::zero(), T::max))
        .sum();
    Ok(total / T::from_count(features.len()))
}

/// Fraction of samples whose argmax class matches the label.
pub fn accuracy<T: Real>(model: &LinearModel<T>, features: &[Vec<T>], labels: &[usize]) -> Result<T> {
    check_dataset(features, Some(labels), model)?;
    let hits = features.iter().zip(labels).filter(|(x, &y)| model.predict(x) == y).count();
    Ok(T::from_count(hits) / T::from_count(features.len()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<T> {
    pub epochs: usize,
    pub learning_rate: T,
    pub batch_size: usize,
    pub beta1: T,
    pub beta2: T,
    pub epsilon: T,
    pub seed: u64,
}

impl<T: Real> Default for TrainConfig<T> {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: T::lit(0.05),
            batch_size: 256,
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            epsilon: T::lit(1e-8),
            seed: 0,
        }
    }
}

impl<T: Real> TrainConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::param("epochs", "at least one epoch"));
        }
        if !(self.learning_rate >= T::zero()) {
            return Err(Error::param("learning_rate", "must be non-negative"));
        }
        if self.batch_size < 1 {
            return Err(Error::param("batch_size", "at least one sample per batch"));
        }
        if !(self.beta1 >= T::zero() && self.beta1 < T::one() && self.beta2 >= T::zero() && self.beta2 < T::one()) {
            return Err(Error::param("beta", "Adam moment decays must lie in [0, 1)"));
        }
        Ok(())
    }
}

struct Adam<T> {
    m: Vec<T>,
    v: Vec<T>,
    step: i32,
}

impl<T: Real> Adam<T> {
    fn new(len: usize) -> Self {
        Self {
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }

    fn update(&mut self, model: &mut LinearModel<T>, grad: &LinearModel<T>, cfg: &TrainConfig<T>) {
        self.step += 1;
        let c1 = T::one() - cfg.beta1.powi(self.step);
        let c2 = T::one() - cfg.beta2.powi(self.step);
        let params = model.weights.iter_mut().chain(model.bias.iter_mut());
        let grads = grad.weights.iter().chain(grad.bias.iter());
        for (((p, g), m), v) in params.zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = cfg.beta1 * *m + (T::one() - cfg.beta1) * *g;
            *v = cfg.beta2 * *v + (T::one() - cfg.beta2) * *g * *g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.epsilon);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scores<T> {
    pub loss: T,
    pub accuracy: T,
    pub confidence: T,
}

impl<T: Real> Scores<T> {
    pub fn evaluate(model: &LinearModel<T>, features: &[Vec<T>], labels: &[usize]) -> Result<Self> {
        Ok(Self {
            loss: cross_entropy(model, features, labels)?,
            accuracy: accuracy(model, features, labels)?,
            confidence: confidence(model, features)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics<T> {
    pub epoch: usize,
    pub train: Scores<T>,
    /// Scores on the held-out set, when one was supplied.
    pub eval: Option<Scores<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOutcome<T> {
    pub model: LinearModel<T>,
    pub history: Vec<EpochMetrics<T>>,
}

impl<T: Real> TrainOutcome<T> {
    /// Scores averaged over the last `n` epochs; held-out scores when available.
    pub fn final_average(&self, n: usize) -> Scores<T> {
        let tail = &self.history[self.history.len().saturating_sub(n.max(1))..];
        let count = T::from_count(tail.len());
        let mut acc = Scores {
            loss: T::zero(),
            accuracy: T::zero(),
            confidence: T::zero(),
        };
        for m in tail {
            let s = m.eval.unwrap_or(m.train);
            acc.loss += s.loss;
            acc.accuracy += s.accuracy;
            acc.confidence += s.confidence;
        }
        Scores {
            loss: acc.loss / count,
            accuracy: acc.accuracy / count,
            confidence: acc.confidence / count,
        }
    }
}

/// Held-out data scored after every epoch.
pub type EvalSet<'a, T> = (&'a [Vec<T>], &'a [usize]);

/// Trains a zero-initialized model on shuffled mini-batches.
pub fn train<T: Real>(
    features: &[Vec<T>],
    labels: &[usize],
    classes: usize,
    config: &TrainConfig<T>,
    eval: Option<EvalSet<'_, T>>,
) -> Result<TrainOutcome<T>> {
    config.validate()?;
    if classes == 0 {
        return Err(Error::param("classes", "at least one class"));
    }
    let width = features.first().ok_or(Error::Empty("dataset"))?.len();
    let mut model = LinearModel::zeros(classes, width);
    check_dataset(features, Some(labels), &model)?;
    if let Some((ef, el)) = eval {
        check_dataset(ef, Some(el), &model)?;
    }
    let mut adam = Adam::new(model.params_len());
    let mut order: Vec<usize> = (0..features.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut batch_x = Vec::with_capacity(config.batch_size);
    let mut batch_y = Vec::with_capacity(config.batch_size);
    for epoch in 0..config.epochs {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch_x.clear();
            batch_y.clear();
            batch_x.extend(chunk.iter().map(|&i| features[i].clone()));
            batch_y.extend(chunk.iter().map(|&i| labels[i]));
            let (_, grad) = loss_and_gradient(&model, &batch_x, &batch_y);
            adam.update(&mut model, &grad, config);
        }
        history.push(EpochMetrics {
            epoch: epoch + 1,
            train: Scores::evaluate(&model, features, labels)?,
            eval: eval.map(|(ef, el)| Scores::evaluate(&model, ef, el)).transpose()?,
        });
    }
    Ok(TrainOutcome { model, history })
}
