//! Image perturbations that stand in for slide artifacts (ink, blur) and
//! label ambiguity (blended classes).

use rand::seq::index::sample;
use rand::Rng;

use super::{Item, Perturbation};
use crate::error::{Error, Result};
use crate::Tensor;

fn image_dims(item: &Item) -> Result<(usize, usize)> {
    match item.pixels.shape() {
        [h, w] => Ok((*h, *w)),
        s => Err(Error::Parameter(format!(
            "perturbation needs a grayscale image, got shape {s:?}"
        ))),
    }
}

/// Sets `round(fraction·H·W)` distinct, uniformly chosen pixels to 0.
pub fn perturb_black_dots(item: &Item, fraction: f64, rng: &mut impl Rng) -> Result<Item> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Parameter(format!(
            "black-dot fraction {fraction} outside [0, 1]"
        )));
    }
    let (h, w) = image_dims(item)?;
    let n = h * w;
    let count = (fraction * n as f64).round() as usize;
    let mut out = item.clone();
    let data = out.pixels.data_mut();
    for pos in sample(rng, n, count) {
        data[pos] = 0.0;
    }
    out.perturbation = Perturbation::BlackDots;
    Ok(out)
}

/// Half-sample symmetric reflection of `i` into `[0, n)`.
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Normalized 1-D Gaussian taps over `[-ceil(3σ), ceil(3σ)]`.
pub(crate) fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let r = (3.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-r..=r)
        .map(|x| (-(x * x) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let s: f64 = k.iter().sum();
    for v in &mut k {
        *v /= s;
    }
    k
}

/// Separable Gaussian blur with symmetric reflection at the borders.
pub fn perturb_gaussian_blur(item: &Item, sigma: f64) -> Result<Item> {
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::Parameter(format!("blur sigma {sigma} must be positive")));
    }
    let (h, w) = image_dims(item)?;
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as isize;
    let src = item.pixels.data();

    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * src[y * w + reflect(x as isize + t as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, kv)| kv * tmp[reflect(y as isize + t as isize - r, h) * w + x])
                .sum::<f64>()
                .clamp(0.0, 1.0);
        }
    }
    let mut res = item.clone();
    res.pixels = Tensor::matrix(h, w, out)?;
    res.perturbation = Perturbation::GaussianBlur;
    Ok(res)
}

/// `α·a + (1-α)·b` with `α ~ U(alpha_range)`, keeping `a`'s label.
pub fn perturb_merge(a: &Item, b: &Item, alpha_range: (f64, f64), rng: &mut impl Rng) -> Result<Item> {
    if a.ground_truth() == b.ground_truth() {
        return Err(Error::Parameter(format!(
            "merge partners share class {}",
            a.ground_truth()
        )));
    }
    let (lo, hi) = alpha_range;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(Error::Parameter(format!(
            "blend range [{lo}, {hi}] must lie in [0, 1]"
        )));
    }
    if a.pixels.shape() != b.pixels.shape() {
        return Err(Error::Dimension("merge partners differ in shape".into()));
    }
    let alpha = if lo == hi { lo } else { rng.random_range(lo..=hi) };
    let mut out = a.clone();
    out.pixels = a
        .pixels
        .zip_map(&b.pixels, |x, y| alpha * x + (1.0 - alpha) * y)?;
    out.perturbation = Perturbation::Merged;
    Ok(out)
}
