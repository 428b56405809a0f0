//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use rand::Rng;

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

/// k-distance of `p` among `points`, skipping index `skip`.
fn k_distance(points: &[Vec<f64>], p: &[f64], skip: Option<usize>, k: usize) -> f64 {
    let mut d = Vec::new();
    for (j, q) in points.iter().enumerate() {
        if Some(j) != skip {
            d.push(euclid(p, q));
        }
    }
    d.sort_by(|a, b| a.partial_cmp(b).unwrap());
    d[k - 1]
}

fn neighborhood(points: &[Vec<f64>], p: &[f64], skip: Option<usize>, k: usize) -> Vec<usize> {
    let kd = k_distance(points, p, skip, k);
    let mut out = Vec::new();
    for (j, q) in points.iter().enumerate() {
        if Some(j) != skip && euclid(p, q) <= kd {
            out.push(j);
        }
    }
    out
}

fn lrd(points: &[Vec<f64>], p: &[f64], skip: Option<usize>, k: usize) -> f64 {
    let nb = neighborhood(points, p, skip, k);
    let mut reach = 0.0;
    for &o in &nb {
        let kd_o = k_distance(points, &points[o], Some(o), k);
        reach += f64::max(kd_o, euclid(p, &points[o]));
    }
    1.0 / f64::max(reach / nb.len() as f64, 1e-12)
}

/// Local outlier factor of `q` with respect to `points`, written straight
/// from the definition with nested loops and no caching.
pub fn naive_lof(points: &[Vec<f64>], k: usize, q: &[f64]) -> f64 {
    let nb = neighborhood(points, q, None, k);
    let own = lrd(points, q, None, k);
    let mut total = 0.0;
    for &o in &nb {
        total += lrd(points, &points[o], Some(o), k) / own;
    }
    total / nb.len() as f64
}

/// Quadratic-weighted kappa from the textbook formula with explicit
/// weight, observed and expected matrices (all normalized to proportions).
pub fn kappa_direct(o: &[Vec<usize>]) -> f64 {
    let c = o.len();
    let n: f64 = o.iter().flatten().map(|&v| v as f64).sum();
    let mut w = vec![vec![0.0; c]; c];
    let mut obs = vec![vec![0.0; c]; c];
    let mut hist_true = vec![0.0; c];
    let mut hist_pred = vec![0.0; c];
    for i in 0..c {
        for j in 0..c {
            w[i][j] = ((i as f64 - j as f64) / (c as f64 - 1.0)).powi(2);
            obs[i][j] = o[i][j] as f64 / n;
            hist_true[i] += o[i][j] as f64 / n;
            hist_pred[j] += o[i][j] as f64 / n;
        }
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..c {
        for j in 0..c {
            num += w[i][j] * obs[i][j];
            den += w[i][j] * hist_true[i] * hist_pred[j];
        }
    }
    1.0 - num / den
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues(m: &[Vec<f64>]) -> Vec<f64> {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    for _ in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

/// Half-sample symmetric reflection: -1 → 0, n → n-1.
fn mirror(i: i64, n: i64) -> usize {
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Direct 2-D convolution of an `h×w` image with the outer product of a
/// normalized Gaussian of radius `ceil(3σ)` and itself.
pub fn dense_gaussian_blur(img: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as i64;
    let g: Vec<f64> = (-r..=r).map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let total: f64 = g.iter().sum::<f64>().powi(2);
    let mut out = vec![0.0; h * w];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let mut acc = 0.0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let k = g[(dy + r) as usize] * g[(dx + r) as usize] / total;
                    acc += k * img[mirror(y + dy, h as i64) * w + mirror(x + dx, w as i64)];
                }
            }
            out[y as usize * w + x as usize] = acc;
        }
    }
    out
}

/// Random probability vector with entries bounded away from zero.
pub fn random_simplex(c: usize, rng: &mut impl Rng) -> Vec<f64> {
    let raw: Vec<f64> = (0..c).map(|_| rng.random_range(0.01..1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / s).collect()
}

/// `T` random draws over `C` classes, sometimes very peaked.
pub fn random_draws(c: usize, t: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..t)
        .map(|_| {
            let mut p = random_simplex(c, rng);
            if rng.random_bool(0.3) {
                let k = rng.random_range(0..c);
                for (i, v) in p.iter_mut().enumerate() {
                    *v = if i == k { 1.0 - 1e-9 * (c - 1) as f64 } else { 1e-9 };
                }
            }
            p
        })
        .collect()
}

/// Random confusion matrix with occasional empty rows or columns.
pub fn random_confusion(c: usize, rng: &mut impl Rng) -> Vec<Vec<usize>> {
    loop {
        let mut o = vec![vec![0usize; c]; c];
        for row in o.iter_mut() {
            for v in row.iter_mut() {
                *v = if rng.random_bool(0.2) { 0 } else { rng.random_range(0..30) };
            }
        }
        let n: usize = o.iter().flatten().sum();
        let rows_used = o.iter().filter(|r| r.iter().sum::<usize>() > 0).count();
        let cols_used = (0..c).filter(|&j| o.iter().any(|r| r[j] > 0)).count();
        if n > 0 && rows_used > 1 && cols_used > 1 {
            return o;
        }
    }
}

pub fn random_points(n: usize, d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
        .collect()
}

/// Random rotation from a product of Givens rotations.
pub fn random_rotation(d: usize, rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let mut r: Vec<Vec<f64>> = (0..d).map(|i| (0..d).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    for p in 0..d {
        for q in p + 1..d {
            let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let (c, s) = (a.cos(), a.sin());
            for row in r.iter_mut() {
                let (x, y) = (row[p], row[q]);
                row[p] = c * x - s * y;
                row[q] = s * x + c * y;
            }
        }
    }
    r
}

pub fn apply(rot: &[Vec<f64>], shift: &[f64], p: &[f64]) -> Vec<f64> {
    (0..p.len())
        .map(|i| (0..p.len()).map(|j| rot[i][j] * p[j]).sum::<f64>() + shift[i])
        .collect()
}
