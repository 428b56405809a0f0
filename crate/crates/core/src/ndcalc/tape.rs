use std::cell::RefCell;
use std::rc::Rc;

use super::tensor::{matmul_nt_into, matmul_tn_into, Tensor};
use crate::error::{dim_err, Error, Result};
use crate::scalar::Scalar;

/// Probability floor applied inside logarithms.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug)]
enum Op<S> {
    Leaf,
    MatMul(usize, usize),
    AddBias(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    MulConst(usize, Rc<Tensor<S>>),
    Scale(usize, S),
    AddScalar(usize),
    Square(usize),
    Sqrt(usize),
    Ln(usize),
    Relu(usize),
    Softplus(usize),
    Sum(usize),
    SoftmaxRows(usize),
    CrossEntropy(usize, Rc<Tensor<S>>),
    MaxPool(usize, Vec<usize>),
}

#[derive(Debug)]
struct Node<S> {
    value: Rc<Tensor<S>>,
    op: Op<S>,
}

/// Recording of primitive ops for reverse-mode differentiation.
///
/// Node ids are assigned in creation order, so reverse id order is a valid
/// reverse topological order for the backward sweep.
#[derive(Debug, Default)]
pub struct Tape<S> {
    nodes: RefCell<Vec<Node<S>>>,
}

/// Handle to a node recorded on a [`Tape`].
#[derive(Clone, Copy, Debug)]
pub struct Var<'t, S> {
    tape: &'t Tape<S>,
    id: usize,
}

/// Accumulated gradients, one slot per node.
#[derive(Debug)]
pub struct Gradients<S> {
    grads: Vec<Option<Tensor<S>>>,
    shapes: Vec<Vec<usize>>,
}

impl<S: Scalar> Gradients<S> {
    /// Gradient of the loss with respect to `v`; zeros when `v` did not
    /// contribute.
    pub fn of(&self, v: Var<'_, S>) -> Tensor<S> {
        match &self.grads[v.id] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[v.id]),
        }
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn push(&self, value: Tensor<S>, op: Op<S>) -> Result<Var<'_, S>> {
        if !value.is_finite() {
            return Err(Error::Evaluation(format!(
                "non-finite result from {}",
                op_name(&op)
            )));
        }
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op,
        });
        Ok(Var {
            tape: self,
            id: nodes.len() - 1,
        })
    }

    /// Records an input (parameter or constant).
    pub fn leaf(&self, value: Tensor<S>) -> Var<'_, S> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            op: Op::Leaf,
        });
        Var {
            tape: self,
            id: nodes.len() - 1,
        }
    }

    fn value(&self, id: usize) -> Rc<Tensor<S>> {
        Rc::clone(&self.nodes.borrow()[id].value)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_, S>) -> Result<Gradients<S>> {
        let nodes = self.nodes.borrow();
        if nodes[loss.id].value.len() != 1 {
            return dim_err(format!(
                "backward needs a scalar loss, got shape {:?}",
                nodes[loss.id].value.shape()
            ));
        }
        let mut grads: Vec<Option<Tensor<S>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(Tensor::full(nodes[loss.id].value.shape(), S::one()));

        for id in (0..=loss.id).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &nodes[id];
            let out = &node.value;
            match &node.op {
                Op::Leaf => {
                    grads[id] = Some(g);
                    continue;
                }
                Op::MatMul(a, b) => {
                    let (av, bv) = (&nodes[*a].value, &nodes[*b].value);
                    let (m, k, n) = (av.shape()[0], av.shape()[1], bv.shape()[1]);
                    let mut ga = vec![S::zero(); m * k];
                    matmul_nt_into(g.data(), bv.data(), &mut ga, m, k, n);
                    let mut gb = vec![S::zero(); k * n];
                    matmul_tn_into(av.data(), g.data(), &mut gb, m, k, n);
                    accumulate(&mut grads, *a, Tensor::new(av.shape().to_vec(), ga)?)?;
                    accumulate(&mut grads, *b, Tensor::new(bv.shape().to_vec(), gb)?)?;
                }
                Op::AddBias(a, b) => {
                    let n = out.cols();
                    let mut gb = vec![S::zero(); n];
                    for i in 0..g.rows() {
                        for (acc, &v) in gb.iter_mut().zip(g.row(i)) {
                            *acc += v;
                        }
                    }
                    let bshape = nodes[*b].value.shape().to_vec();
                    accumulate(&mut grads, *b, Tensor::new(bshape, gb)?)?;
                    accumulate(&mut grads, *a, g)?;
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone())?;
                    accumulate(&mut grads, *a, g)?;
                }
                Op::Sub(a, b) => {
                    accumulate(&mut grads, *b, g.map(|v| -v))?;
                    accumulate(&mut grads, *a, g)?;
                }
                Op::Mul(a, b) => {
                    let ga = g.zip_map(&nodes[*b].value, |gv, bv| gv * bv)?;
                    let gb = g.zip_map(&nodes[*a].value, |gv, av| gv * av)?;
                    accumulate(&mut grads, *a, ga)?;
                    accumulate(&mut grads, *b, gb)?;
                }
                Op::MulConst(a, c) => {
                    accumulate(&mut grads, *a, g.zip_map(c, |gv, cv| gv * cv)?)?;
                }
                Op::Scale(a, c) => {
                    let c = *c;
                    accumulate(&mut grads, *a, g.map(|gv| gv * c))?;
                }
                Op::AddScalar(a) => accumulate(&mut grads, *a, g)?,
                Op::Square(a) => {
                    let ga = g.zip_map(&nodes[*a].value, |gv, x| gv * (x + x))?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Sqrt(a) => {
                    let two = S::lit(2.0);
                    let ga = g.zip_map(out, |gv, y| gv / (two * y))?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Ln(a) => {
                    let ga = g.zip_map(&nodes[*a].value, |gv, x| gv / x)?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Relu(a) => {
                    let ga = g.zip_map(&nodes[*a].value, |gv, x| {
                        if x > S::zero() {
                            gv
                        } else {
                            S::zero()
                        }
                    })?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Softplus(a) => {
                    let ga = g.zip_map(&nodes[*a].value, |gv, x| gv * sigmoid(x))?;
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::Sum(a) => {
                    let gv = g.data()[0];
                    let ga = Tensor::full(nodes[*a].value.shape(), gv);
                    accumulate(&mut grads, *a, ga)?;
                }
                Op::SoftmaxRows(a) => {
                    let c = out.cols();
                    let mut ga = vec![S::zero(); out.len()];
                    for i in 0..out.rows() {
                        let y = out.row(i);
                        let gr = g.row(i);
                        let dot: S = y.iter().zip(gr).map(|(&yv, &gv)| yv * gv).sum();
                        for j in 0..c {
                            ga[i * c + j] = y[j] * (gr[j] - dot);
                        }
                    }
                    let shape = out.shape().to_vec();
                    accumulate(&mut grads, *a, Tensor::new(shape, ga)?)?;
                }
                Op::CrossEntropy(p, targets) => {
                    let pv = &nodes[*p].value;
                    let n = S::from_count(pv.rows());
                    let floor = S::lit(LOG_FLOOR);
                    let scale = g.data()[0] / n;
                    let ga = pv.zip_map(targets, |pc, yc| {
                        if pc > floor {
                            -scale * yc / pc
                        } else {
                            S::zero()
                        }
                    })?;
                    accumulate(&mut grads, *p, ga)?;
                }
                Op::MaxPool(a, argmax) => {
                    let av = &nodes[*a].value;
                    let mut ga = vec![S::zero(); av.len()];
                    for (&src, &gv) in argmax.iter().zip(g.data()) {
                        ga[src] += gv;
                    }
                    accumulate(&mut grads, *a, Tensor::new(av.shape().to_vec(), ga)?)?;
                }
            }
        }
        let shapes = nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate<S: Scalar>(grads: &mut [Option<Tensor<S>>], id: usize, g: Tensor<S>) -> Result<()> {
    match &mut grads[id] {
        Some(existing) => {
            if existing.shape() != g.shape() {
                return dim_err("gradient shape mismatch during accumulation");
            }
            for (e, v) in existing.data_mut().iter_mut().zip(g.data()) {
                *e += *v;
            }
        }
        slot @ None => *slot = Some(g),
    }
    Ok(())
}

fn op_name<S>(op: &Op<S>) -> &'static str {
    match op {
        Op::Leaf => "leaf",
        Op::MatMul(..) => "matmul",
        Op::AddBias(..) => "add_bias",
        Op::Add(..) => "add",
        Op::Sub(..) => "sub",
        Op::Mul(..) => "mul",
        Op::MulConst(..) => "mul_const",
        Op::Scale(..) => "scale",
        Op::AddScalar(..) => "add_scalar",
        Op::Square(..) => "square",
        Op::Sqrt(..) => "sqrt",
        Op::Ln(..) => "ln",
        Op::Relu(..) => "relu",
        Op::Softplus(..) => "softplus",
        Op::Sum(..) => "sum",
        Op::SoftmaxRows(..) => "softmax",
        Op::CrossEntropy(..) => "cross_entropy",
        Op::MaxPool(..) => "max_pool",
    }
}

pub(crate) fn sigmoid<S: Scalar>(x: S) -> S {
    if x >= S::zero() {
        S::one() / (S::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (S::one() + e)
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<S: Scalar>(x: S) -> S {
    x.max(S::zero()) + (-x.abs()).exp().ln_1p()
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inv<S: Scalar>(y: S) -> S {
    // ln(e^y - 1) = y + ln(1 - e^-y)
    y + (-(-y).exp()).ln_1p()
}

/// Row-wise softmax with max subtraction. 1-D tensors are one row.
pub fn softmax_rows<S: Scalar>(t: &Tensor<S>) -> Tensor<S> {
    let c = t.cols();
    let mut out = Vec::with_capacity(t.len());
    for i in 0..t.rows() {
        let row = t.row(i);
        let m = row.iter().copied().fold(S::neg_infinity(), S::max);
        let start = out.len();
        let mut z = S::zero();
        for &v in row {
            let e = (v - m).exp();
            z += e;
            out.push(e);
        }
        for v in &mut out[start..start + c] {
            *v /= z;
        }
    }
    Tensor::new(t.shape().to_vec(), out).expect("shape preserved")
}

fn same_shape<S: Scalar>(a: &Tensor<S>, b: &Tensor<S>, what: &str) -> Result<()> {
    if a.shape() != b.shape() {
        return dim_err(format!(
            "{what}: shapes differ {:?} vs {:?}",
            a.shape(),
            b.shape()
        ));
    }
    Ok(())
}

impl<'t, S: Scalar> Var<'t, S> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn value(&self) -> Rc<Tensor<S>> {
        self.tape.value(self.id)
    }

    pub fn shape(&self) -> Vec<usize> {
        self.value().shape().to_vec()
    }

    fn check_tape(&self, other: &Var<'t, S>) {
        assert!(
            std::ptr::eq(self.tape, other.tape),
            "vars recorded on different tapes"
        );
    }

    pub fn matmul(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.check_tape(&other);
        let v = super::tensor::matmul(&self.value(), &other.value())?;
        self.tape.push(v, Op::MatMul(self.id, other.id))
    }

    /// Adds a bias vector of length `n` to every row of an `[m×n]` matrix.
    pub fn add_bias(self, bias: Var<'t, S>) -> Result<Var<'t, S>> {
        self.check_tape(&bias);
        let (a, b) = (self.value(), bias.value());
        let n = a.cols();
        if a.shape().len() != 2 || b.len() != n {
            return dim_err(format!(
                "bias of shape {:?} does not fit rows of {:?}",
                b.shape(),
                a.shape()
            ));
        }
        let mut data = a.data().to_vec();
        for row in data.chunks_mut(n) {
            for (x, &bv) in row.iter_mut().zip(b.data()) {
                *x += bv;
            }
        }
        let v = Tensor::new(a.shape().to_vec(), data)?;
        self.tape.push(v, Op::AddBias(self.id, bias.id))
    }

    pub fn add(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.check_tape(&other);
        let (a, b) = (self.value(), other.value());
        same_shape(&a, &b, "add")?;
        let v = a.zip_map(&b, |x, y| x + y)?;
        self.tape.push(v, Op::Add(self.id, other.id))
    }

    pub fn sub(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.check_tape(&other);
        let (a, b) = (self.value(), other.value());
        same_shape(&a, &b, "sub")?;
        let v = a.zip_map(&b, |x, y| x - y)?;
        self.tape.push(v, Op::Sub(self.id, other.id))
    }

    pub fn mul(self, other: Var<'t, S>) -> Result<Var<'t, S>> {
        self.check_tape(&other);
        let (a, b) = (self.value(), other.value());
        same_shape(&a, &b, "mul")?;
        let v = a.zip_map(&b, |x, y| x * y)?;
        self.tape.push(v, Op::Mul(self.id, other.id))
    }

    /// Elementwise product with a constant tensor (no gradient flows to it).
    pub fn mul_const(self, c: Rc<Tensor<S>>) -> Result<Var<'t, S>> {
        let a = self.value();
        same_shape(&a, &c, "mul_const")?;
        let v = a.zip_map(&c, |x, y| x * y)?;
        self.tape.push(v, Op::MulConst(self.id, c))
    }

    pub fn scale(self, c: S) -> Result<Var<'t, S>> {
        let v = self.value().map(|x| x * c);
        self.tape.push(v, Op::Scale(self.id, c))
    }

    pub fn add_scalar(self, c: S) -> Result<Var<'t, S>> {
        let v = self.value().map(|x| x + c);
        self.tape.push(v, Op::AddScalar(self.id))
    }

    pub fn square(self) -> Result<Var<'t, S>> {
        let v = self.value().map(|x| x * x);
        self.tape.push(v, Op::Square(self.id))
    }

    pub fn sqrt(self) -> Result<Var<'t, S>> {
        let a = self.value();
        if a.data().iter().any(|&x| x <= S::zero()) {
            return Err(Error::Evaluation("sqrt of a non-positive entry".into()));
        }
        self.tape.push(a.map(|x| x.sqrt()), Op::Sqrt(self.id))
    }

    pub fn ln(self) -> Result<Var<'t, S>> {
        let a = self.value();
        if a.data().iter().any(|&x| x <= S::zero()) {
            return Err(Error::Evaluation("log of a non-positive entry".into()));
        }
        self.tape.push(a.map(|x| x.ln()), Op::Ln(self.id))
    }

    pub fn relu(self) -> Result<Var<'t, S>> {
        let v = self.value().map(|x| x.max(S::zero()));
        self.tape.push(v, Op::Relu(self.id))
    }

    pub fn softplus(self) -> Result<Var<'t, S>> {
        let v = self.value().map(softplus);
        self.tape.push(v, Op::Softplus(self.id))
    }

    pub fn sum(self) -> Result<Var<'t, S>> {
        let v = Tensor::scalar(self.value().sum());
        self.tape.push(v, Op::Sum(self.id))
    }

    pub fn softmax(self) -> Result<Var<'t, S>> {
        let v = softmax_rows(&self.value());
        self.tape.push(v, Op::SoftmaxRows(self.id))
    }

    /// Mean over rows of `-Σ_c y_c ln(max(p_c, 1e-12))`.
    pub fn cross_entropy(self, targets: Rc<Tensor<S>>) -> Result<Var<'t, S>> {
        let p = self.value();
        same_shape(&p, &targets, "cross_entropy")?;
        let floor = S::lit(LOG_FLOOR);
        let mut total = S::zero();
        for (&pc, &yc) in p.data().iter().zip(targets.data()) {
            if yc != S::zero() {
                total -= yc * pc.max(floor).ln();
            }
        }
        let v = Tensor::scalar(total / S::from_count(p.rows()));
        self.tape.push(v, Op::CrossEntropy(self.id, targets))
    }

    /// Non-overlapping `pool×pool` max pooling of a stacked feature map.
    ///
    /// The input holds `images·height·width` rows (row-major over pixel
    /// positions per image) and one column per channel. The output has one
    /// row per image, flattened as `(pooled_y, pooled_x, channel)`. Trailing
    /// rows/columns that do not fill a window are dropped.
    pub fn max_pool(self, images: usize, height: usize, width: usize, pool: usize) -> Result<Var<'t, S>> {
        let a = self.value();
        let ch = a.cols();
        if a.shape().len() != 2 || a.rows() != images * height * width {
            return dim_err(format!(
                "max_pool expects {} rows, got shape {:?}",
                images * height * width,
                a.shape()
            ));
        }
        if pool == 0 || height < pool || width < pool {
            return dim_err("max_pool window larger than feature map");
        }
        let (ph, pw) = (height / pool, width / pool);
        let per_image = ph * pw * ch;
        let mut out = Vec::with_capacity(images * per_image);
        let mut argmax = Vec::with_capacity(images * per_image);
        let data = a.data();
        for img in 0..images {
            for py in 0..ph {
                for px in 0..pw {
                    for c in 0..ch {
                        let mut best_idx = usize::MAX;
                        let mut best = S::neg_infinity();
                        for dy in 0..pool {
                            for dx in 0..pool {
                                let r = img * height * width + (py * pool + dy) * width + px * pool + dx;
                                let idx = r * ch + c;
                                if data[idx] > best {
                                    best = data[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        out.push(best);
                        argmax.push(best_idx);
                    }
                }
            }
        }
        let v = Tensor::matrix(images, per_image, out)?;
        self.tape.push(v, Op::MaxPool(self.id, argmax))
    }
}
