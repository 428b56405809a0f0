use std::rc::Rc;

use focal::ndcalc::{
    cross_entropy, grad_check, grad_check_many, matmul, one_hot, softmax, Tape, Tensor, Var, FD_STEP,
};
use focal::rng::stream;
use focal::Result;
use proptest::prelude::*;
use rand::Rng;

fn uniform(shape: &[usize], lo: f64, hi: f64, seed: u64) -> Tensor<f64> {
    let mut rng = stream(seed, "ndcalc-test", shape.iter().product::<usize>() as u64);
    Tensor::from_fn(shape, |_| rng.random_range(lo..hi))
}

/// Scalar probe `Σ c ⊙ out` so every output entry feeds the check.
fn probe<'t>(v: Var<'t, f64>, seed: u64) -> Result<Var<'t, f64>> {
    let c = Rc::new(uniform(&v.shape(), 0.5, 1.5, seed ^ 0x5eed));
    v.mul_const(c)?.sum()
}

fn check_unary(op: impl for<'t> Fn(Var<'t, f64>) -> Result<Var<'t, f64>>, x: &Tensor<f64>, seed: u64) -> f64 {
    grad_check(|_, v| probe(op(v)?, seed), x).unwrap()
}

fn check_binary(
    op: impl for<'t> Fn(Var<'t, f64>, Var<'t, f64>) -> Result<Var<'t, f64>>,
    a: &Tensor<f64>,
    b: &Tensor<f64>,
    seed: u64,
) -> f64 {
    grad_check_many(|_, v| probe(op(v[0], v[1])?, seed), &[a.clone(), b.clone()], FD_STEP).unwrap()
}

fn away_from_zero(t: Tensor<f64>) -> Tensor<f64> {
    t.map(|v| if v.abs() < 0.05 { v + 0.1 } else { v })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn primitive_gradients_match_central_differences(seed in 0u64..10_000, m in 1usize..4, k in 1usize..4, n in 1usize..4) {
        let tol = 1e-4;
        let a = uniform(&[m, k], -2.0, 2.0, seed);
        let b = uniform(&[k, n], -2.0, 2.0, seed + 1);
        let c = uniform(&[m, k], -2.0, 2.0, seed + 2);
        let bias = uniform(&[k], -2.0, 2.0, seed + 3);
        let pos = uniform(&[m, k], 0.2, 2.0, seed + 4);

        prop_assert!(check_binary(|x, y| x.matmul(y), &a, &b, seed) < tol);
        prop_assert!(check_binary(|x, y| x.add_bias(y), &a, &bias, seed) < tol);
        prop_assert!(check_binary(|x, y| x.add(y), &a, &c, seed) < tol);
        prop_assert!(check_binary(|x, y| x.sub(y), &a, &c, seed) < tol);
        prop_assert!(check_binary(|x, y| x.mul(y), &a, &c, seed) < tol);
        let konst = Rc::new(c.clone());
        prop_assert!(check_unary(|x| x.mul_const(Rc::clone(&konst)), &a, seed) < tol);
        prop_assert!(check_unary(|x| x.scale(-1.7), &a, seed) < tol);
        prop_assert!(check_unary(|x| x.add_scalar(0.3), &a, seed) < tol);
        prop_assert!(check_unary(|x| x.square(), &a, seed) < tol);
        prop_assert!(check_unary(|x| x.sqrt(), &pos, seed) < tol);
        prop_assert!(check_unary(|x| x.ln(), &pos, seed) < tol);
        prop_assert!(check_unary(|x| x.relu(), &away_from_zero(a.clone()), seed) < tol);
        prop_assert!(check_unary(|x| x.softplus(), &a, seed) < tol);
        prop_assert!(check_unary(|x| x.sum(), &a, seed) < tol);
        prop_assert!(check_unary(|x| x.softmax(), &a, seed) < tol);
        let targets = Rc::new(one_hot::<f64>(&(0..m).map(|i| i % k).collect::<Vec<_>>(), k));
        prop_assert!(grad_check(|_, v| v.softmax()?.cross_entropy(Rc::clone(&targets)), &a).unwrap() < tol);
    }

    #[test]
    fn max_pool_gradient(seed in 0u64..10_000) {
        // distinct values keep the window maxima unique under the FD step
        let mut rng = stream(seed, "pool", 0);
        let mut vals: Vec<f64> = (0..2 * 4 * 4 * 2).map(|i| i as f64 * 0.05 - 1.6).collect();
        for i in (1..vals.len()).rev() {
            vals.swap(i, rng.random_range(0..=i));
        }
        let x = Tensor::matrix(32, 2, vals).unwrap();
        let err = grad_check(|_, v| probe(v.max_pool(2, 4, 4, 2)?, seed), &x).unwrap();
        prop_assert!(err < 1e-4);
    }

    #[test]
    fn softmax_sums_to_one_at_extremes(xs in prop::collection::vec(-1e4f64..1e4, 1..12)) {
        let p = softmax(&Tensor::vector(xs));
        prop_assert!((p.sum() - 1.0).abs() <= 1e-12);
        prop_assert!(p.data().iter().all(|v| v.is_finite() && *v >= 0.0));
    }
}

#[test]
fn matmul_gradients_on_a_3x4_by_4x2_product() {
    let a = uniform(&[3, 4], -1.0, 1.0, 7);
    let b = uniform(&[4, 2], -1.0, 1.0, 8);
    let err = check_binary(|x, y| x.matmul(y), &a, &b, 9);
    assert!(err < 1e-6, "{err}");
}

#[test]
fn cross_entropy_softmax_affine_chain() {
    let x = uniform(&[5, 3], -2.0, 2.0, 11);
    let w = uniform(&[3, 4], -1.0, 1.0, 12);
    let b = uniform(&[4], -1.0, 1.0, 13);
    let y = Rc::new(one_hot::<f64>(&[0, 3, 1, 2, 3], 4));
    let err = grad_check_many(
        |tape, v| {
            tape.leaf(x.clone())
                .matmul(v[0])?
                .add_bias(v[1])?
                .softmax()?
                .cross_entropy(Rc::clone(&y))
        },
        &[w, b],
        FD_STEP,
    )
    .unwrap();
    assert!(err < 1e-4, "{err}");
}

#[test]
fn reused_node_accumulates_gradient() {
    let tape = Tape::new();
    let x = tape.leaf(Tensor::vector(vec![1.0, -2.0, 0.5]));
    let y = x.mul(x).unwrap().add(x).unwrap().sum().unwrap();
    let g = tape.backward(y).unwrap();
    assert_eq!(g.of(x).data(), &[3.0, -3.0, 2.0]);
}

#[test]
fn examples() {
    let i2 = Tensor::identity(2);
    let m = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
    assert_eq!(matmul(&i2, &m).unwrap(), m);
    assert!(matmul(&m, &Tensor::zeros(&[3, 1])).is_err());
    let p = softmax(&Tensor::vector(vec![1f64.ln(), 2f64.ln(), 3f64.ln()]));
    for (v, e) in p.data().iter().zip([1.0 / 6.0, 2.0 / 6.0, 3.0 / 6.0]) {
        assert!((v - e).abs() < 1e-12);
    }
    let ce: f64 = cross_entropy(&Tensor::vector(vec![0.0, 1.0]), &Tensor::vector(vec![1.0, 0.0])).unwrap();
    assert!((ce - 27.631021115928547).abs() < 1e-9);
}
