mod common;

use focal::ood::{OodIndex, OOD_SCALE};
use focal::rng::{stream, StreamRng};
use focal::Tensor;
use proptest::prelude::*;
use rand::Rng;

fn tensor(points: &[Vec<f64>]) -> Tensor {
    let d = points[0].len();
    Tensor::matrix(points.len(), d, points.concat()).unwrap()
}

fn queries(points: &[Vec<f64>], d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut qs = common::random_points(3, d, rng);
    qs.push(points[0].clone());
    qs.push(points.iter().map(|p| p.iter().map(|v| v * 4.0).collect::<Vec<_>>()).next().unwrap());
    qs
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn lof_matches_the_naive_definition(seed in 0u64..1_000_000, n_raw in 11usize..=200, d in 1usize..=16, ki in 0usize..3) {
        let k = [2, 5, 10][ki];
        let mut rng = stream(seed, "lof", 0);
        let n = n_raw.max(k + 1);
        let points = common::random_points(n, d, &mut rng);
        let index = OodIndex::build(tensor(&points), k).unwrap();
        for q in queries(&points, d, &mut rng) {
            let got = index.lof(&q).unwrap();
            let want = common::naive_lof(&points, k, &q);
            prop_assert!(close(got, want), "{} vs {}", got, want);
            prop_assert_eq!(index.score(&q).unwrap(), OOD_SCALE * got);
        }
    }

    #[test]
    fn lof_with_ties_matches_the_naive_definition(seed in 0u64..1_000_000, n in 11usize..60, d in 1usize..4, ki in 0usize..3) {
        // integer coordinates give exact, frequently tied distances
        let k = [2, 5, 10][ki];
        let mut rng = stream(seed, "ties", 0);
        let grid = |rng: &mut StreamRng| -> Vec<f64> { (0..d).map(|_| rng.random_range(0..4) as f64).collect() };
        let points: Vec<Vec<f64>> = (0..n).map(|_| grid(&mut rng)).collect();
        let index = OodIndex::build(tensor(&points), k).unwrap();
        for _ in 0..4 {
            let q = grid(&mut rng);
            let got = index.lof(&q).unwrap();
            let want = common::naive_lof(&points, k, &q);
            prop_assert!(close(got, want), "{} vs {}", got, want);
        }
    }

    #[test]
    fn lof_is_invariant_to_rigid_motion_and_scaling(seed in 0u64..1_000_000, n in 11usize..=120, d in 1usize..=8, ki in 0usize..3, c in 0.01f64..100.0) {
        let k = [2, 5, 10][ki];
        let mut rng = stream(seed, "invariance", 0);
        let points = common::random_points(n, d, &mut rng);
        let rot = common::random_rotation(d, &mut rng);
        let shift: Vec<f64> = (0..d).map(|_| rng.random_range(-10.0..10.0)).collect();
        let moved: Vec<Vec<f64>> = points.iter().map(|p| common::apply(&rot, &shift, p)).collect();
        let scaled: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|v| v * c).collect()).collect();
        let base = OodIndex::build(tensor(&points), k).unwrap();
        let rigid = OodIndex::build(tensor(&moved), k).unwrap();
        let scale = OodIndex::build(tensor(&scaled), k).unwrap();
        for q in queries(&points, d, &mut rng) {
            let want = base.lof(&q).unwrap();
            let got = rigid.lof(&common::apply(&rot, &shift, &q)).unwrap();
            prop_assert!(close(got, want), "rigid {} vs {}", got, want);
            let got = scale.lof(&q.iter().map(|v| v * c).collect::<Vec<_>>()).unwrap();
            prop_assert!(close(got, want), "scaled {} vs {}", got, want);
        }
    }
}

#[test]
fn query_inside_a_tight_uniform_cluster() {
    let points: Vec<Vec<f64>> = (0..20).map(|i| vec![(i % 5) as f64 * 0.01, (i / 5) as f64 * 0.01]).collect();
    let index = OodIndex::build(tensor(&points), 5).unwrap();
    for q in [&points[6], &points[7], &points[12]] {
        let lof = index.lof(q).unwrap();
        assert!((0.8..=1.2).contains(&lof), "{lof}");
        assert!(close(lof, common::naive_lof(&points, 5, q)));
    }
}

#[test]
fn far_query_on_a_line() {
    let points: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
    let index = OodIndex::build(tensor(&points), 2).unwrap();
    let lof = index.lof(&[100.0]).unwrap();
    assert!(lof > 10.0, "{lof}");
    assert!(close(lof, common::naive_lof(&points, 2, &[100.0])));
}

#[test]
fn duplicates_give_unit_lof() {
    let points = vec![vec![1.5, -2.0]; 12];
    let index = OodIndex::build(tensor(&points), 10).unwrap();
    let lof = index.lof(&[1.5, -2.0]).unwrap();
    assert_eq!(lof, 1.0);
    assert!(index.local_densities().iter().all(|v| v.is_finite()));
}

#[test]
fn score_is_monotone_in_lof() {
    let points: Vec<Vec<f64>> = (0..30).map(|i| vec![(i % 6) as f64, (i / 6) as f64]).collect();
    let index = OodIndex::build(tensor(&points), 5).unwrap();
    let near = [2.5, 2.0];
    let far = [40.0, -3.0];
    assert!(index.lof(&far).unwrap() > index.lof(&near).unwrap());
    assert!(index.score(&far).unwrap() > index.score(&near).unwrap());
    let rows = Tensor::matrix(2, 2, vec![near[0], near[1], far[0], far[1]]).unwrap();
    assert_eq!(
        index.score_rows(&rows).unwrap(),
        vec![index.score(&near).unwrap(), index.score(&far).unwrap()]
    );
}

#[test]
fn build_preconditions() {
    let points: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64]).collect();
    assert!(OodIndex::build(tensor(&points), 5).is_err());
    assert!(OodIndex::build(tensor(&points), 0).is_err());
    assert!(OodIndex::build(tensor(&points), 4).is_ok());
}
