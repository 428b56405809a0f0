//! Deterministic feature extractor followed by a mean-field Gaussian
//! variational head.
//!
//! Head weights carry a mean `μ` and a pre-scale `ρ` with `σ = softplus(ρ)`;
//! the prior is a standard normal per weight. Training uses the local
//! reparametrization of the sampled pre-activations, so every example in a
//! minibatch sees its own weight draw. Inference draws whole weight sets
//! `ω_t = μ + σ·ε` and averages the resulting softmax outputs.

mod checkpoint;
mod train;
mod uncertainty;

use std::rc::Rc;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

pub use checkpoint::{
    decode_checkpoint, decode_features, encode_checkpoint, encode_features, read_checkpoint, read_features,
    write_checkpoint, write_features, FeatureManifest, FeatureMatrix, CHECKPOINT_MAGIC, FEATURE_MAGIC,
};
pub use train::{train, Adam, History, Objective, TrainSchedule};
pub use uncertainty::{decompose, mean_draw, summarize_rows, PredictiveSummary};

use crate::error::{dim_err, Error, Result};
use crate::ndcalc::{matmul, softmax_rows, softplus, softplus_inv, Tape, Tensor, Var};
use crate::rng::stream;
use crate::scalar::Scalar;

/// Rows processed per tape when running inference over large sets.
const INFERENCE_CHUNK: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    fn apply_var<'t, S: Scalar>(self, v: Var<'t, S>) -> Result<Var<'t, S>> {
        match self {
            Activation::Relu => v.relu(),
            Activation::Identity => Ok(v),
        }
    }

    fn apply(self, t: &mut Tensor<impl Scalar>) {
        if self == Activation::Relu {
            for v in t.data_mut() {
                *v = v.max(num_traits::zero());
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InputShape {
    Image { height: usize, width: usize },
    Vector(usize),
}

impl InputShape {
    pub fn len(&self) -> usize {
        match *self {
            InputShape::Image { height, width } => height * width,
            InputShape::Vector(d) => d,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Architecture and initialization settings.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub input: InputShape,
    pub classes: usize,
    pub feature_dim: usize,
    pub hidden_width: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    pub pool: usize,
    /// Hidden width of the dense extractor used for vector inputs.
    pub extractor_hidden: usize,
    pub init_sigma: f64,
    pub init_mu_std: f64,
}

impl ModelSpec {
    pub fn new(input: InputShape, classes: usize) -> Self {
        Self {
            input,
            classes,
            feature_dim: 32,
            hidden_width: 32,
            conv_filters: 4,
            conv_kernel: 3,
            pool: 2,
            extractor_hidden: 32,
            init_sigma: 1e-3,
            init_mu_std: 0.05,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.classes < 2 || self.feature_dim == 0 || self.hidden_width == 0 || self.input.is_empty() {
            return Err(Error::Parameter(format!("invalid model spec {self:?}")));
        }
        if let InputShape::Image { height, width } = self.input {
            let k = self.conv_kernel;
            if k == 0 || height < k + self.pool - 1 || width < k + self.pool - 1 || self.pool == 0 {
                return Err(Error::Parameter("image too small for the conv stage".into()));
            }
        }
        if !(self.init_sigma > 0.0) {
            return Err(Error::Parameter("initial sigma must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseLayer<S> {
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
    pub activation: Activation,
}

/// Valid `k×k` convolution, ReLU and non-overlapping max pooling.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvStage<S> {
    pub height: usize,
    pub width: usize,
    pub kernel: usize,
    pub pool: usize,
    /// `[k·k × filters]`
    pub weight: Tensor<S>,
    pub bias: Tensor<S>,
}

impl<S: Scalar> ConvStage<S> {
    fn out_hw(&self) -> (usize, usize) {
        (self.height - self.kernel + 1, self.width - self.kernel + 1)
    }

    fn pooled_len(&self) -> usize {
        let (oh, ow) = self.out_hw();
        (oh / self.pool) * (ow / self.pool) * self.weight.cols()
    }

    /// Patch matrix `[n·oh·ow × k·k]` for `n` flattened images.
    fn im2col(&self, x: &Tensor<S>) -> Tensor<S> {
        let n = x.rows();
        let (oh, ow) = self.out_hw();
        let k = self.kernel;
        let mut data = Vec::with_capacity(n * oh * ow * k * k);
        for img in 0..n {
            let px = x.row(img);
            for y in 0..oh {
                for xx in 0..ow {
                    for dy in 0..k {
                        let base = (y + dy) * self.width + xx;
                        data.extend_from_slice(&px[base..base + k]);
                    }
                }
            }
        }
        Tensor::matrix(n * oh * ow, k * k, data).expect("patch extent arithmetic")
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Extractor<S> {
    pub conv: Option<ConvStage<S>>,
    pub dense: Vec<DenseLayer<S>>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct VariationalLayer<S> {
    pub w_mu: Tensor<S>,
    pub w_rho: Tensor<S>,
    pub b_mu: Tensor<S>,
    pub b_rho: Tensor<S>,
    pub activation: Activation,
}

impl<S: Scalar> VariationalLayer<S> {
    pub fn w_sigma(&self) -> Tensor<S> {
        self.w_rho.map(softplus)
    }

    pub fn b_sigma(&self) -> Tensor<S> {
        self.b_rho.map(softplus)
    }

    pub fn out_dim(&self) -> usize {
        self.w_mu.cols()
    }
}

/// Network input after the fixed, parameter-free preprocessing (patch
/// extraction for images).
#[derive(Clone, Debug)]
pub struct Prepared<S> {
    rows_per_item: usize,
    data: Tensor<S>,
}

impl<S: Scalar> Prepared<S> {
    pub fn items(&self) -> usize {
        self.data.rows() / self.rows_per_item
    }

    pub fn select(&self, idx: &[usize]) -> Self {
        let r = self.rows_per_item;
        let rows: Vec<usize> = idx.iter().flat_map(|&i| i * r..(i + 1) * r).collect();
        Self {
            rows_per_item: r,
            data: self.data.select_rows(&rows),
        }
    }
}

/// One concrete weight draw of the head.
#[derive(Clone, Debug, PartialEq)]
pub struct HeadSample<S> {
    pub layers: Vec<DenseLayer<S>>,
}

impl<S: Scalar> HeadSample<S> {
    /// Class probabilities `[n×C]` for features `[n×F]`.
    pub fn forward(&self, z: &Tensor<S>) -> Result<Tensor<S>> {
        let mut h = z.clone();
        for l in &self.layers {
            h = matmul(&h, &l.weight)?;
            let n = h.cols();
            for row in h.data_mut().chunks_mut(n) {
                for (v, &b) in row.iter_mut().zip(l.bias.data()) {
                    *v += b;
                }
            }
            l.activation.apply(&mut h);
        }
        Ok(softmax_rows(&h))
    }
}

/// Frozen per-example noise for the head pre-activations, one `[n×out]`
/// tensor per head layer.
#[derive(Clone, Debug)]
pub struct HeadNoise<S> {
    pub layers: Vec<Rc<Tensor<S>>>,
}

fn normal_tensor<S: Scalar>(shape: &[usize], std: f64, rng: &mut impl Rng) -> Tensor<S> {
    Tensor::from_fn(shape, |_| {
        let z: f64 = StandardNormal.sample(rng);
        S::lit(z * std)
    })
}

/// Extractor plus variational head.
#[derive(Clone, Debug, PartialEq)]
pub struct VariationalClassifier<S> {
    pub spec: ModelSpec,
    pub seed: u64,
    pub extractor: Extractor<S>,
    pub head: Vec<VariationalLayer<S>>,
}

impl<S: Scalar> VariationalClassifier<S> {
    /// Fresh model initialized from the `(seed, "init")` stream.
    pub fn new(spec: ModelSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = stream(seed, "init", 0);
        let he = |fan_in: usize| (2.0 / fan_in as f64).sqrt();

        let (conv, mut width) = match spec.input {
            InputShape::Image { height, width } => {
                let k = spec.conv_kernel;
                let mut stage = ConvStage {
                    height,
                    width,
                    kernel: k,
                    pool: spec.pool,
                    weight: normal_tensor(&[k * k, spec.conv_filters], he(k * k), &mut rng),
                    bias: Tensor::zeros(&[spec.conv_filters]),
                };
                let pooled = stage.pooled_len();
                stage.bias = Tensor::zeros(&[spec.conv_filters]);
                (Some(stage), pooled)
            }
            InputShape::Vector(d) => (None, d),
        };
        let mut dense = Vec::new();
        let dims: Vec<usize> = if conv.is_some() {
            vec![spec.feature_dim]
        } else {
            vec![spec.extractor_hidden, spec.feature_dim]
        };
        for out in dims {
            dense.push(DenseLayer {
                weight: normal_tensor(&[width, out], he(width), &mut rng),
                bias: Tensor::zeros(&[out]),
                activation: Activation::Relu,
            });
            width = out;
        }

        let rho0 = softplus_inv(S::lit(spec.init_sigma));
        let mut head = Vec::new();
        let widths = [spec.hidden_width, spec.hidden_width, spec.classes];
        for (i, &out) in widths.iter().enumerate() {
            head.push(VariationalLayer {
                w_mu: normal_tensor(&[width, out], spec.init_mu_std, &mut rng),
                w_rho: Tensor::full(&[width, out], rho0),
                b_mu: normal_tensor(&[out], spec.init_mu_std, &mut rng),
                b_rho: Tensor::full(&[out], rho0),
                activation: if i + 1 < widths.len() {
                    Activation::Relu
                } else {
                    Activation::Identity
                },
            });
            width = out;
        }
        Ok(Self {
            spec,
            seed,
            extractor: Extractor { conv, dense },
            head,
        })
    }

    pub fn classes(&self) -> usize {
        self.spec.classes
    }

    pub fn feature_dim(&self) -> usize {
        self.extractor
            .dense
            .last()
            .map_or(self.spec.input.len(), |l| l.weight.cols())
    }

    fn extractor_param_count(&self) -> usize {
        2 * self.extractor.dense.len() + if self.extractor.conv.is_some() { 2 } else { 0 }
    }

    /// Parameters in binding order: conv, dense extractor layers, head
    /// layers as `(w_mu, w_rho, b_mu, b_rho)`.
    pub fn params(&self) -> Vec<&Tensor<S>> {
        let mut p = Vec::new();
        if let Some(c) = &self.extractor.conv {
            p.push(&c.weight);
            p.push(&c.bias);
        }
        for l in &self.extractor.dense {
            p.push(&l.weight);
            p.push(&l.bias);
        }
        for l in &self.head {
            p.extend([&l.w_mu, &l.w_rho, &l.b_mu, &l.b_rho]);
        }
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<S>> {
        let mut p = Vec::new();
        if let Some(c) = &mut self.extractor.conv {
            p.push(&mut c.weight);
            p.push(&mut c.bias);
        }
        for l in &mut self.extractor.dense {
            p.push(&mut l.weight);
            p.push(&mut l.bias);
        }
        for l in &mut self.head {
            p.extend([&mut l.w_mu, &mut l.w_rho, &mut l.b_mu, &mut l.b_rho]);
        }
        p
    }

    pub fn params_finite(&self) -> bool {
        self.params().iter().all(|t| t.is_finite())
    }

    /// Records every parameter as a tape leaf.
    pub fn bind<'t>(&self, tape: &'t Tape<S>) -> Vec<Var<'t, S>> {
        self.params().into_iter().map(|t| tape.leaf(t.clone())).collect()
    }

    /// Applies the parameter-free preprocessing to `[n × input]` rows.
    pub fn prepare(&self, x: &Tensor<S>) -> Result<Prepared<S>> {
        if x.shape().len() != 2 || x.cols() != self.spec.input.len() {
            return dim_err(format!(
                "model expects rows of length {}, got shape {:?}",
                self.spec.input.len(),
                x.shape()
            ));
        }
        Ok(match &self.extractor.conv {
            Some(c) => {
                let (oh, ow) = c.out_hw();
                Prepared {
                    rows_per_item: oh * ow,
                    data: c.im2col(x),
                }
            }
            None => Prepared {
                rows_per_item: 1,
                data: x.clone(),
            },
        })
    }

    /// Features `z` on the tape.
    pub fn extract_on<'t>(&self, tape: &'t Tape<S>, vars: &[Var<'t, S>], input: &Prepared<S>) -> Result<Var<'t, S>> {
        let mut i = 0;
        let mut h = tape.leaf(input.data.clone());
        if let Some(c) = &self.extractor.conv {
            let (oh, ow) = c.out_hw();
            h = h
                .matmul(vars[0])?
                .add_bias(vars[1])?
                .relu()?
                .max_pool(input.items(), oh, ow, c.pool)?;
            i = 2;
        }
        for l in &self.extractor.dense {
            h = l.activation.apply_var(h.matmul(vars[i])?.add_bias(vars[i + 1])?)?;
            i += 2;
        }
        Ok(h)
    }

    /// Deterministic features `z = f(x)` for `[n × input]` rows.
    pub fn features(&self, x: &Tensor<S>) -> Result<Tensor<S>> {
        let f = self.feature_dim();
        let mut out = Vec::with_capacity(x.rows() * f);
        let n = x.rows();
        let mut start = 0;
        while start < n {
            let end = (start + INFERENCE_CHUNK).min(n);
            let idx: Vec<usize> = (start..end).collect();
            let chunk = x.select_rows(&idx);
            let tape = Tape::new();
            let vars: Vec<_> = self.params()[..self.extractor_param_count()]
                .iter()
                .map(|t| tape.leaf((*t).clone()))
                .collect();
            let z = self.extract_on(&tape, &vars, &self.prepare(&chunk)?)?;
            out.extend_from_slice(z.value().data());
            start = end;
        }
        Tensor::matrix(n, f, out)
    }

    /// Fresh head noise for `n` examples.
    pub fn sample_noise(&self, n: usize, rng: &mut impl Rng) -> HeadNoise<S> {
        HeadNoise {
            layers: self
                .head
                .iter()
                .map(|l| Rc::new(normal_tensor(&[n, l.out_dim()], 1.0, rng)))
                .collect(),
        }
    }

    /// Head probabilities under local reparametrization with frozen noise.
    pub fn head_on<'t>(&self, vars: &[Var<'t, S>], z: Var<'t, S>, noise: &HeadNoise<S>) -> Result<Var<'t, S>> {
        let mut i = self.extractor_param_count();
        let mut h = z;
        for (l, eps) in self.head.iter().zip(&noise.layers) {
            let (w_mu, w_rho, b_mu, b_rho) = (vars[i], vars[i + 1], vars[i + 2], vars[i + 3]);
            let mean = h.matmul(w_mu)?.add_bias(b_mu)?;
            let w_var = w_rho.softplus()?.square()?;
            let b_var = b_rho.softplus()?.square()?;
            let std = h.square()?.matmul(w_var)?.add_bias(b_var)?.sqrt()?;
            h = l.activation.apply_var(mean.add(std.mul_const(Rc::clone(eps))?)?)?;
            i += 4;
        }
        h.softmax()
    }

    /// Head probabilities at the variational means.
    pub fn head_mean_on<'t>(&self, vars: &[Var<'t, S>], z: Var<'t, S>) -> Result<Var<'t, S>> {
        let mut i = self.extractor_param_count();
        let mut h = z;
        for l in &self.head {
            h = l.activation.apply_var(h.matmul(vars[i])?.add_bias(vars[i + 2])?)?;
            i += 4;
        }
        h.softmax()
    }

    /// `Σ 0.5·(μ² + σ² − 1 − ln σ²)` over all head weights and biases.
    pub fn kl_on<'t>(&self, vars: &[Var<'t, S>]) -> Result<Var<'t, S>> {
        let start = self.extractor_param_count();
        let mut total: Option<Var<'t, S>> = None;
        for (mu, rho) in self
            .head
            .iter()
            .enumerate()
            .flat_map(|(k, _)| [(start + 4 * k, start + 4 * k + 1), (start + 4 * k + 2, start + 4 * k + 3)])
        {
            let var = vars[rho].softplus()?.square()?;
            let term = vars[mu]
                .square()?
                .add(var)?
                .sub(var.ln()?)?
                .add_scalar(-S::one())?
                .sum()?
                .scale(S::lit(0.5))?;
            total = Some(match total {
                Some(t) => t.add(term)?,
                None => term,
            });
        }
        total.ok_or_else(|| Error::Parameter("model has no head".into()))
    }

    /// Closed-form KL divergence of the head posterior from the prior.
    pub fn kl_mean_field(&self) -> Result<S> {
        let tape = Tape::new();
        let vars = self.bind(&tape);
        let kl = self.kl_on(&vars)?;
        let v = kl.value().data()[0];
        Ok(v)
    }

    /// Batch ELBO loss: mean cross-entropy of one reparametrized draw per
    /// example plus `kl_weight · KL`.
    #[allow(clippy::too_many_arguments)]
    pub fn elbo_on<'t>(
        &self,
        tape: &'t Tape<S>,
        vars: &[Var<'t, S>],
        input: &Prepared<S>,
        targets: Rc<Tensor<S>>,
        kl_weight: S,
        noise: &HeadNoise<S>,
    ) -> Result<Var<'t, S>> {
        let z = self.extract_on(tape, vars, input)?;
        let nll = self.head_on(vars, z, noise)?.cross_entropy(targets)?;
        if kl_weight == S::zero() {
            return Ok(nll);
        }
        nll.add(self.kl_on(vars)?.scale(kl_weight)?)
    }

    /// ELBO loss on raw rows with `KL / n_train` weighting.
    pub fn elbo_loss(&self, x: &Tensor<S>, labels: &[usize], n_train: usize, noise: &HeadNoise<S>) -> Result<S> {
        if labels.is_empty() || n_train < labels.len() {
            return Err(Error::Parameter("batch must be nonempty and no larger than the training set".into()));
        }
        let tape = Tape::new();
        let vars = self.bind(&tape);
        let targets = Rc::new(crate::ndcalc::one_hot(labels, self.classes()));
        let loss = self.elbo_on(
            &tape,
            &vars,
            &self.prepare(x)?,
            targets,
            S::one() / S::from_count(n_train),
            noise,
        )?;
        let v = loss.value().data()[0];
        Ok(v)
    }

    /// Head with weights at their means.
    pub fn mean_head(&self) -> HeadSample<S> {
        HeadSample {
            layers: self
                .head
                .iter()
                .map(|l| DenseLayer {
                    weight: l.w_mu.clone(),
                    bias: l.b_mu.clone(),
                    activation: l.activation,
                })
                .collect(),
        }
    }

    /// One weight draw `ω = μ + σ·ε` of the head.
    pub fn sample_head(&self, rng: &mut impl Rng) -> HeadSample<S> {
        HeadSample {
            layers: self
                .head
                .iter()
                .map(|l| {
                    let draw = |mu: &Tensor<S>, sig: Tensor<S>, rng: &mut _| {
                        let eps: Tensor<S> = normal_tensor(mu.shape(), 1.0, rng);
                        let noisy = sig.zip_map(&eps, |s, e| s * e).expect("same shape");
                        mu.zip_map(&noisy, |m, d| m + d).expect("same shape")
                    };
                    DenseLayer {
                        weight: draw(&l.w_mu, l.w_sigma(), rng),
                        bias: draw(&l.b_mu, l.b_sigma(), rng),
                        activation: l.activation,
                    }
                })
                .collect(),
        }
    }

    /// `p(y | z, ω_t)` for one head draw, rows of `z` sharing the draw.
    pub fn sample_forward(&self, z: &Tensor<S>, rng: &mut impl Rng) -> Result<Tensor<S>> {
        self.sample_head(rng).forward(z)
    }

    /// `T` draws of `[n×C]` probabilities over features `z`.
    pub fn mc_draws(&self, z: &Tensor<S>, samples: usize, rng: &mut impl Rng) -> Result<Vec<Tensor<S>>> {
        if samples == 0 {
            return Err(Error::Parameter("at least one Monte Carlo sample is required".into()));
        }
        (0..samples).map(|_| self.sample_forward(z, rng)).collect()
    }

    /// Monte Carlo predictive mean `[n×C]` over features.
    pub fn predict_proba_features(&self, z: &Tensor<S>, samples: usize, rng: &mut impl Rng) -> Result<Tensor<S>> {
        let draws = self.mc_draws(z, samples, rng)?;
        let mut acc = Tensor::zeros(draws[0].shape());
        for d in &draws {
            for (a, &v) in acc.data_mut().iter_mut().zip(d.data()) {
                *a += v;
            }
        }
        let t = S::from_count(samples);
        Ok(acc.map(|v| v / t))
    }

    /// Monte Carlo predictive mean `[n×C]` for raw rows.
    pub fn predict_proba(&self, x: &Tensor<S>, samples: usize, rng: &mut impl Rng) -> Result<Tensor<S>> {
        self.predict_proba_features(&self.features(x)?, samples, rng)
    }

    /// Predictive summaries for raw rows.
    pub fn decompose_uncertainty(
        &self,
        x: &Tensor<S>,
        samples: usize,
        rng: &mut impl Rng,
    ) -> Result<Vec<PredictiveSummary<S>>> {
        let draws = self.mc_draws(&self.features(x)?, samples, rng)?;
        summarize_rows(&draws, false)
    }

    /// `T` draws of `[n×C]` probabilities where each item gets independent
    /// weights from its own `(seed, "mc", id)` stream.
    ///
    /// Each layer's pre-activations are sampled directly from their Gaussian
    /// law given the layer input, which for a single item is the same
    /// distribution as pushing it through a fresh weight draw.
    pub fn mc_item_draws(&self, z: &Tensor<S>, ids: &[u32], samples: usize, seed: u64) -> Result<Vec<Tensor<S>>> {
        if samples == 0 {
            return Err(Error::Parameter("at least one Monte Carlo sample is required".into()));
        }
        if z.rows() != ids.len() || z.shape().len() != 2 {
            return dim_err(format!("{} feature rows for {} ids", z.rows(), ids.len()));
        }
        let n = ids.len();
        let widths: Vec<usize> = self.head.iter().map(|l| l.out_dim()).collect();
        let per_draw: usize = widths.iter().sum();
        // eps[i] holds item i's normals for all draws, draw-major then layer
        let eps: Vec<Vec<S>> = ids
            .iter()
            .map(|&id| {
                let mut rng = stream(seed, "mc", u64::from(id));
                (0..samples * per_draw)
                    .map(|_| {
                        let e: f64 = StandardNormal.sample(&mut rng);
                        S::lit(e)
                    })
                    .collect()
            })
            .collect();

        let rows = n * samples;
        let mut h = Tensor::matrix(
            rows,
            z.cols(),
            (0..samples).flat_map(|_| z.data().iter().copied()).collect(),
        )?;
        let mut offset = 0;
        for (l, &out) in self.head.iter().zip(&widths) {
            let w_var = l.w_sigma().map(|s| s * s);
            let b_var = l.b_sigma().map(|s| s * s);
            let mean = matmul(&h, &l.w_mu)?;
            let var = matmul(&h.map(|v| v * v), &w_var)?;
            let mut next = mean.into_data();
            let var = var.into_data();
            for r in 0..rows {
                let (t, i) = (r / n, r % n);
                let e = &eps[i][t * per_draw + offset..t * per_draw + offset + out];
                for c in 0..out {
                    let k = r * out + c;
                    let sd = (var[k] + b_var.data()[c]).sqrt();
                    next[k] += l.b_mu.data()[c] + sd * e[c];
                }
            }
            h = Tensor::matrix(rows, out, next)?;
            l.activation.apply(&mut h);
            offset += out;
        }
        let p = softmax_rows(&h);
        let c = p.cols();
        Ok((0..samples)
            .map(|t| Tensor::matrix(n, c, p.data()[t * n * c..(t + 1) * n * c].to_vec()).expect("draw block"))
            .collect())
    }

    /// Probabilities at the variational means.
    pub fn predict_mean(&self, z: &Tensor<S>) -> Result<Tensor<S>> {
        self.mean_head().forward(z)
    }
}
