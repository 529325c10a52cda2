//! Volume of a Euclidean ball intersected with an axis-aligned box.
//!
//! One and two dimensions are closed form; higher dimensions integrate the
//! two-dimensional formula over the remaining axes, split at every radius where
//! the sliced ball starts touching a face or corner of the sliced box.

use quadrature::double_exponential;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// How the ball/box intersection volume is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum OverlapMode {
    /// Exact up to roundoff (N ≤ 2) or adaptive quadrature (N ≥ 3).
    #[default]
    Exact,
    /// Midpoint sampling with `k^N` subcells in every cell cut by the sphere.
    Subsample(u32),
}

/// `|B_r(c) ∩ Π [lo_i, hi_i]|`.
pub fn ball_box_volume(center: &[f64], r: f64, lo: &[f64], hi: &[f64], mode: OverlapMode) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let n = center.len();
    // shift so the ball sits at the origin
    let mut a = Vec::with_capacity(n);
    let mut b = Vec::with_capacity(n);
    let mut near2 = 0.0;
    let mut far2 = 0.0;
    for i in 0..n {
        let (l, h) = (lo[i] - center[i], hi[i] - center[i]);
        if h <= l || l >= r || h <= -r {
            return 0.0;
        }
        a.push(l.max(-r));
        b.push(h.min(r));
        let dn = if l > 0.0 { l } else if h < 0.0 { -h } else { 0.0 };
        near2 += dn * dn;
        let df = l.abs().max(h.abs());
        far2 += df * df;
    }
    if near2 >= r * r {
        return 0.0;
    }
    if far2 <= r * r {
        return a.iter().zip(&b).map(|(l, h)| h - l).product();
    }
    match mode {
        OverlapMode::Exact => exact(&a, &b, r),
        OverlapMode::Subsample(k) => subsample(&a, &b, r, k.max(1)),
    }
}

fn exact(a: &[f64], b: &[f64], r: f64) -> f64 {
    match a.len() {
        1 => b[0] - a[0],
        2 => rect_disk(a[0], b[0], a[1], b[1], r),
        n => {
            let (lo, hi) = (a[n - 1], b[n - 1]);
            let (ra, rb) = (&a[..n - 1], &b[..n - 1]);
            // radii of the slice ball at which the slice volume has a kink
            let mut q: Vec<f64> = Vec::new();
            let mut sums = vec![0.0];
            for i in 0..n - 1 {
                let mut next = Vec::new();
                for s in &sums {
                    next.push(*s);
                    next.push(s + ra[i] * ra[i]);
                    next.push(s + rb[i] * rb[i]);
                }
                sums = next;
            }
            for s in sums {
                if s > 0.0 && s < r * r {
                    q.push((r * r - s).sqrt());
                }
            }
            let mut cuts = vec![lo, hi, 0.0];
            for v in q {
                cuts.push(v);
                cuts.push(-v);
            }
            cuts.retain(|c| *c >= lo && *c <= hi);
            cuts.sort_by(|x, y| x.partial_cmp(y).unwrap());
            cuts.dedup();
            let f = |s: f64| {
                let rr = (r * r - s * s).max(0.0).sqrt();
                slice_volume(ra, rb, rr)
            };
            let scale: f64 = ra.iter().zip(rb).map(|(l, h)| h - l).product::<f64>() * (hi - lo);
            cuts.windows(2)
                .filter(|w| w[1] > w[0])
                .map(|w| double_exponential::integrate(f, w[0], w[1], 1e-13 * scale.max(1e-300)).integral)
                .sum()
        }
    }
}

fn slice_volume(a: &[f64], b: &[f64], r: f64) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    let c = vec![0.0; a.len()];
    ball_box_volume(&c, r, a, b, OverlapMode::Exact)
}

fn subsample(a: &[f64], b: &[f64], r: f64, k: u32) -> f64 {
    let n = a.len();
    let k = k as usize;
    let total = k.pow(n as u32);
    let cell: f64 = a.iter().zip(b).map(|(l, h)| (h - l) / k as f64).product();
    let mut count = 0usize;
    let mut idx = vec![0usize; n];
    for _ in 0..total {
        let mut d2 = 0.0;
        for i in 0..n {
            let x = a[i] + (b[i] - a[i]) * (idx[i] as f64 + 0.5) / k as f64;
            d2 += x * x;
        }
        if d2 < r * r {
            count += 1;
        }
        for i in 0..n {
            idx[i] += 1;
            if idx[i] < k {
                break;
            }
            idx[i] = 0;
        }
    }
    count as f64 * cell
}

/// `∫ sqrt(r² - x²) dx`.
fn prim(x: f64, r: f64) -> f64 {
    let x = x.clamp(-r, r);
    0.5 * (x * (r * r - x * x).max(0.0).sqrt() + r * r * (x / r).asin())
}

/// Area of the disk part with `y > b`.
fn half_plane(b: f64, r: f64) -> f64 {
    if b >= r {
        0.0
    } else if b <= -r {
        PI * r * r
    } else {
        2.0 * (prim(r, r) - prim(b, r))
    }
}

/// Area of the disk part with `x > a` and `y > b`.
fn corner(a: f64, b: f64, r: f64) -> f64 {
    if a < 0.0 {
        return half_plane(b, r) - corner(-a, b, r);
    }
    if b < 0.0 {
        return half_plane(a, r) - corner(a, -b, r);
    }
    if a * a + b * b >= r * r {
        return 0.0;
    }
    let xm = (r * r - b * b).sqrt();
    (prim(xm, r) - prim(a, r) - b * (xm - a)).max(0.0)
}

fn rect_disk(x0: f64, x1: f64, y0: f64, y1: f64, r: f64) -> f64 {
    let v = corner(x0, y0, r) - corner(x1, y0, r) - corner(x0, y1, r) + corner(x1, y1, r);
    v.clamp(0.0, (x1 - x0) * (y1 - y0))
}
