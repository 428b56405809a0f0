use std::rc::Rc;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

use super::VariationalClassifier;
use crate::error::{Error, Result};
use crate::ndcalc::{one_hot, Tape, Tensor};
use crate::rng::StreamRng;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Reparametrized ELBO.
    Elbo,
    /// Cross-entropy of the network with head weights fixed at their means.
    Deterministic,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainSchedule {
    pub epochs: usize,
    pub lr: f64,
    pub plateau_patience: usize,
    pub lr_factor: f64,
    pub batch_size: usize,
    pub objective: Objective,
    /// KL multiplier; `None` means `1 / N_train`.
    pub kl_weight: Option<f64>,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 1e-2,
            plateau_patience: 50,
            lr_factor: 0.5,
            batch_size: 32,
            objective: Objective::Elbo,
            kl_weight: None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub train_loss: Vec<f64>,
    pub val_accuracy: Vec<f64>,
    pub lr: Vec<f64>,
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam<S> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: i32,
    m: Vec<Tensor<S>>,
    v: Vec<Tensor<S>>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(shapes: &[&[usize]]) -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
            v: shapes.iter().map(|s| Tensor::zeros(s)).collect(),
        }
    }

    pub fn step(&mut self, params: Vec<&mut Tensor<S>>, grads: &[Tensor<S>], lr: f64) {
        self.t += 1;
        let (b1, b2) = (S::lit(self.beta1), S::lit(self.beta2));
        let c1 = S::one() - b1.powi(self.t);
        let c2 = S::one() - b2.powi(self.t);
        let (lr, eps) = (S::lit(lr), S::lit(self.eps));
        for (((p, g), m), v) in params.into_iter().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((p, &g), m), v) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *m = b1 * *m + (S::one() - b1) * g;
                *v = b2 * *v + (S::one() - b2) * g * g;
                *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            }
        }
    }
}

fn mean_head_accuracy<S: Scalar>(model: &VariationalClassifier<S>, x: &Tensor<S>, y: &[usize]) -> Result<f64> {
    let p = model.predict_mean(&model.features(x)?)?;
    let hits = p.argmax_rows().iter().zip(y).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / y.len() as f64)
}

/// Minibatch training with plateau-based learning-rate decay on
/// validation accuracy. Validation uses the mean-weight network.
pub fn train<S: Scalar>(
    model: &mut VariationalClassifier<S>,
    x: &Tensor<S>,
    labels: &[usize],
    val: Option<(&Tensor<S>, &[usize])>,
    schedule: &TrainSchedule,
    rng: &mut impl Rng,
) -> Result<History> {
    let n = labels.len();
    if n == 0 || x.rows() != n {
        return Err(Error::Parameter(format!(
            "training needs matching nonempty inputs, got {} rows and {n} labels",
            x.rows()
        )));
    }
    if schedule.batch_size == 0 || !(schedule.lr > 0.0) || !(schedule.lr_factor > 0.0) {
        return Err(Error::Parameter(format!("invalid schedule {schedule:?}")));
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= model.classes()) {
        return Err(Error::Parameter(format!("label {bad} out of range")));
    }
    let mut order_rng = StreamRng::seed_from_u64(rng.random());
    let mut noise_rng = StreamRng::seed_from_u64(rng.random());

    let input = model.prepare(x)?;
    let targets = one_hot::<S>(labels, model.classes());
    let kl_weight = S::lit(schedule.kl_weight.unwrap_or(1.0 / n as f64));
    let shapes: Vec<Vec<usize>> = model.params().iter().map(|t| t.shape().to_vec()).collect();
    let shape_refs: Vec<&[usize]> = shapes.iter().map(|s| s.as_slice()).collect();
    let mut adam = Adam::new(&shape_refs);

    let mut lr = schedule.lr;
    let mut best = f64::NEG_INFINITY;
    let mut stale = 0;
    let mut history = History::default();
    let mut order: Vec<usize> = (0..n).collect();
    let fail = |epoch: usize, message: String| Error::Training { epoch, message };

    for epoch in 0..schedule.epochs {
        order.shuffle(&mut order_rng);
        let mut total = 0.0;
        for batch in order.chunks(schedule.batch_size) {
            let tape = Tape::new();
            let vars = model.bind(&tape);
            let xb = input.select(batch);
            let yb = Rc::new(targets.select_rows(batch));
            let loss = match schedule.objective {
                Objective::Elbo => {
                    let noise = model.sample_noise(batch.len(), &mut noise_rng);
                    model.elbo_on(&tape, &vars, &xb, yb, kl_weight, &noise)
                }
                Objective::Deterministic => model
                    .extract_on(&tape, &vars, &xb)
                    .and_then(|z| model.head_mean_on(&vars, z))
                    .and_then(|p| p.cross_entropy(yb)),
            }
            .map_err(|e| fail(epoch, format!("loss evaluation failed at lr {lr}: {e}")))?;
            let value = loss.value().data()[0].to_f64_lossy();
            total += value * batch.len() as f64;
            let grads = tape.backward(loss).map_err(|e| fail(epoch, e.to_string()))?;
            let g: Vec<Tensor<S>> = vars.iter().map(|&v| grads.of(v)).collect();
            adam.step(model.params_mut(), &g, lr);
            if !model.params_finite() {
                return Err(fail(epoch, format!("non-finite parameters after step, loss {value}, lr {lr}")));
            }
        }
        history.train_loss.push(total / n as f64);
        history.lr.push(lr);
        if let Some((vx, vy)) = val {
            let acc = mean_head_accuracy(model, vx, vy)?;
            history.val_accuracy.push(acc);
            if acc > best {
                best = acc;
                stale = 0;
            } else {
                stale += 1;
                if stale >= schedule.plateau_patience {
                    lr *= schedule.lr_factor;
                    stale = 0;
                }
            }
        }
    }
    Ok(history)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bnn::{InputShape, ModelSpec};
    use crate::rng::stream;

    #[test]
    fn zero_epochs_leaves_model_untouched() {
        let spec = ModelSpec::new(InputShape::Vector(2), 2);
        let mut m = VariationalClassifier::<f64>::new(spec, 7).unwrap();
        let before = m.clone();
        let x = Tensor::from_fn(&[4, 2], |i| i as f64);
        let sched = TrainSchedule {
            epochs: 0,
            ..Default::default()
        };
        let h = train(&mut m, &x, &[0, 1, 0, 1], None, &sched, &mut stream(1, "t", 0)).unwrap();
        assert_eq!(m, before);
        assert!(h.train_loss.is_empty());
    }

    #[test]
    fn plateau_halves_rate() {
        let spec = ModelSpec::new(InputShape::Vector(2), 2);
        let mut m = VariationalClassifier::<f64>::new(spec, 7).unwrap();
        let x = Tensor::from_fn(&[4, 2], |i| i as f64);
        let y = [0, 1, 0, 1];
        let sched = TrainSchedule {
            epochs: 12,
            lr: 1e-9,
            plateau_patience: 3,
            ..Default::default()
        };
        let h = train(&mut m, &x, &y, Some((&x, &y)), &sched, &mut stream(1, "t", 0)).unwrap();
        // accuracy never moves at this rate: decay after epochs 3, 6, 9
        assert_eq!(h.lr[0], 1e-9);
        assert_eq!(h.lr[4], 0.5e-9);
        assert_eq!(h.lr[11], 0.125e-9);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let mut p = Tensor::vector(vec![1.0, -1.0]);
        let mut adam = Adam::<f64>::new(&[&[2]]);
        adam.step(vec![&mut p], &[Tensor::vector(vec![3.0, -0.5])], 0.1);
        assert!((p.data()[0] - 0.9).abs() < 1e-6);
        assert!((p.data()[1] + 0.9).abs() < 1e-6);
    }
}
