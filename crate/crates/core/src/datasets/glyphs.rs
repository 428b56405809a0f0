//! Procedural handwritten-style digits.
//!
//! Each digit is a set of strokes in a unit box. A sample applies a random
//! affine map, a smooth low-frequency warp and a random pen width, then
//! rasterizes with an anti-aliased distance falloff. The digit box covers
//! the central 20/28 of the canvas, as in MNIST.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Item;
use crate::Tensor;

type Pt = (f64, f64);

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64) -> Vec<Pt> {
    let steps = (((to_deg - from_deg).abs() / 10.0).ceil() as usize).max(2);
    (0..=steps)
        .map(|i| {
            let t = (from_deg + (to_deg - from_deg) * i as f64 / steps as f64) * PI / 180.0;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

fn strokes(digit: usize, variant: bool) -> Vec<Vec<Pt>> {
    match digit {
        0 => vec![arc(0.5, 0.5, 0.3, 0.45, 0.0, 360.0)],
        1 => {
            let mut s = vec![vec![(0.52, 0.05), (0.48, 0.95)]];
            if variant {
                s.push(vec![(0.34, 0.22), (0.52, 0.05)]);
            }
            s
        }
        2 => {
            let mut top = arc(0.5, 0.3, 0.28, 0.25, 200.0, 400.0);
            top.push((0.18, 0.95));
            top.push((0.85, 0.95));
            vec![top]
        }
        3 => vec![
            arc(0.5, 0.28, 0.27, 0.23, 200.0, 450.0),
            arc(0.5, 0.73, 0.3, 0.22, 270.0, 520.0),
        ],
        4 => vec![vec![(0.62, 0.95), (0.62, 0.05), (0.15, 0.65), (0.85, 0.65)]],
        5 => {
            let mut s = vec![(0.8, 0.05), (0.3, 0.05), (0.27, 0.45)];
            s.extend(arc(0.5, 0.68, 0.3, 0.27, 225.0, 500.0));
            vec![s]
        }
        6 => {
            let mut s = vec![(0.72, 0.05), (0.45, 0.25), (0.27, 0.6)];
            s.extend(arc(0.5, 0.72, 0.24, 0.22, 180.0, 540.0));
            vec![s]
        }
        7 => {
            let mut s = vec![vec![(0.15, 0.05), (0.85, 0.05), (0.4, 0.95)]];
            if variant {
                s.push(vec![(0.42, 0.5), (0.78, 0.5)]);
            }
            s
        }
        8 => vec![
            arc(0.5, 0.27, 0.22, 0.21, 0.0, 360.0),
            arc(0.5, 0.72, 0.27, 0.23, 0.0, 360.0),
        ],
        _ => vec![
            arc(0.5, 0.3, 0.25, 0.23, 0.0, 360.0),
            vec![(0.75, 0.3), (0.62, 0.95)],
        ],
    }
}

fn seg_dist(p: Pt, a: Pt, b: Pt) -> f64 {
    let (vx, vy) = (b.0 - a.0, b.1 - a.1);
    let (wx, wy) = (p.0 - a.0, p.1 - a.1);
    let len2 = vx * vx + vy * vy;
    let t = if len2 > 0.0 {
        ((wx * vx + wy * vy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (dx, dy) = (wx - t * vx, wy - t * vy);
    (dx * dx + dy * dy).sqrt()
}

/// Renders one `side×side` sample of `digit` (0–9).
pub fn render_digit(digit: usize, side: usize, rng: &mut impl Rng) -> Tensor {
    let jitter = Normal::new(0.0, 1.0).expect("unit normal");
    let s = side as f64;
    let box_size = s * 20.0 / 28.0;

    let rot = 0.15 * jitter.sample(rng);
    let shear = 0.15 * jitter.sample(rng);
    let sx = rng.random_range(0.75..1.1);
    let sy = rng.random_range(0.85..1.05);
    let tx = rng.random_range(-0.07..0.07) * s;
    let ty = rng.random_range(-0.07..0.07) * s;
    let warp: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            (
                0.035 * jitter.sample(rng),
                rng.random_range(0.0..2.0 * PI),
                rng.random_range(1.0..3.0),
            )
        })
        .collect();
    let pen = rng.random_range(0.055..0.11) * box_size;
    let soft = 0.9 * s / 28.0;
    let variant = rng.random_bool(0.5);

    let (cr, sr) = (rot.cos(), rot.sin());
    let map = |(x, y): Pt| -> Pt {
        let wx = x + warp[0].0 * (warp[0].2 * PI * y + warp[0].1).sin()
            + warp[1].0 * (warp[1].2 * PI * x + warp[1].1).sin();
        let wy = y + warp[2].0 * (warp[2].2 * PI * x + warp[2].1).sin()
            + warp[3].0 * (warp[3].2 * PI * y + warp[3].1).sin();
        let (u, v) = ((wx - 0.5) * sx + shear * (wy - 0.5), (wy - 0.5) * sy);
        let (u, v) = (cr * u - sr * v, sr * u + cr * v);
        (s / 2.0 + tx + u * box_size, s / 2.0 + ty + v * box_size)
    };

    let segs: Vec<(Pt, Pt)> = strokes(digit, variant)
        .into_iter()
        .flat_map(|poly| {
            let pts: Vec<Pt> = poly.into_iter().map(map).collect();
            pts.windows(2).map(|w| (w[0], w[1])).collect::<Vec<_>>()
        })
        .collect();

    let reach = pen / 2.0 + soft;
    let mut data = vec![0.0f64; side * side];
    for (a, b) in &segs {
        let x0 = (a.0.min(b.0) - reach).floor().max(0.0) as usize;
        let x1 = ((a.0.max(b.0) + reach).ceil() as usize).min(side);
        let y0 = (a.1.min(b.1) - reach).floor().max(0.0) as usize;
        let y1 = ((a.1.max(b.1) + reach).ceil() as usize).min(side);
        for py in y0..y1 {
            for px in x0..x1 {
                let d = seg_dist((px as f64 + 0.5, py as f64 + 0.5), *a, *b);
                let v = (1.0 - (d - pen / 2.0).max(0.0) / soft).clamp(0.0, 1.0);
                let cell = &mut data[py * side + px];
                *cell = (*cell).max(v);
            }
        }
    }
    Tensor::matrix(side, side, data).expect("square canvas")
}

/// `count` digits cycling through 0–9, labeled by digit.
pub fn render_digits(count: usize, side: usize, rng: &mut impl Rng) -> Vec<Item> {
    (0..count)
        .map(|i| Item::new(i as u32, render_digit(i % 10, side, rng), i % 10))
        .collect()
}
