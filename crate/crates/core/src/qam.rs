//! Gray-labelled QAM constellations and their BER over AWGN.
//!
//! Square orders (4, 16, 64, 256) use independent Gray labels on the two axes.
//! The 128-point cross constellation starts from a 16 x 8 Gray-labelled
//! rectangle; the four outer columns (`|x| in {13, 15}`) are folded onto new
//! rows above and below, `(x, y) -> (y, sign(x) (24 - |x|))`, which keeps most
//! nearest neighbours one bit apart.
//!
//! The closed-form BER sums, over all ordered pairs of points, the Hamming
//! distance times the probability that the noise lands in the nearest-point
//! decision region of the second point. Square QAM regions are rectangles.
//! In the cross constellation the sixteen cells next to a missing corner are
//! cut by the diagonal `|x| = |y|`; their probability is a rectangle term plus
//! a one-dimensional integral over the wedge, so the result is exact up to
//! quadrature error.

use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use statrs::function::erf::erfc;

use crate::{Complex64, Error, Result};

#[derive(Debug, Clone)]
pub struct Constellation {
    order: usize,
    bits: u32,
    /// Integer grid coordinates (odd integers).
    grid: Vec<(i32, i32)>,
    labels: Vec<u32>,
    /// Unit average energy points.
    points: Vec<Complex64>,
    scale: f64,
    lookup: HashMap<(i32, i32), usize>,
    /// Decision rectangles in grid units, `(x_lo, x_hi, y_lo, y_hi)`.
    regions: Vec<(f64, f64, f64, f64)>,
    /// Corner cells of the cross constellation.
    wedges: Vec<Option<Wedge>>,
    energy: f64,
}

/// Cell `{a <= X < b, 6 <= Y < max(8, X)}` in the frame
/// `(X, Y) = (sx x, sy y)`, or `(sy y, sx x)` when `swap` is set.
#[derive(Debug, Clone, Copy)]
struct Wedge {
    sx: i32,
    sy: i32,
    swap: bool,
    a: f64,
    b: f64,
}

impl Wedge {
    fn of(x: i32, y: i32) -> Option<Self> {
        let (ax, ay) = (x.abs(), y.abs());
        let (sx, sy) = (x.signum(), y.signum());
        let span = |far: i32| if far == 9 { (8.0, 10.0) } else { (10.0, f64::INFINITY) };
        match (ax, ay) {
            (9 | 11, 7) => {
                let (a, b) = span(ax);
                Some(Self { sx, sy, swap: false, a, b })
            }
            (7, 9 | 11) => {
                let (a, b) = span(ay);
                Some(Self { sx, sy, swap: true, a, b })
            }
            _ => None,
        }
    }

    fn frame(&self, x: i32, y: i32) -> (f64, f64) {
        let (fx, fy) = ((self.sx * x) as f64, (self.sy * y) as f64);
        if self.swap {
            (fy, fx)
        } else {
            (fx, fy)
        }
    }
}

fn gray(i: u32) -> u32 {
    i ^ (i >> 1)
}

fn axis_level(i: usize, count: usize) -> i32 {
    2 * i as i32 - (count as i32 - 1)
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        let (grid, labels) = match order {
            4 | 16 | 64 | 256 => {
                let side = (order as f64).sqrt() as usize;
                let half = side.trailing_zeros();
                let mut grid = Vec::with_capacity(order);
                let mut labels = Vec::with_capacity(order);
                for ix in 0..side {
                    for iy in 0..side {
                        grid.push((axis_level(ix, side), axis_level(iy, side)));
                        labels.push((gray(ix as u32) << half) | gray(iy as u32));
                    }
                }
                (grid, labels)
            }
            128 => {
                let mut grid = Vec::with_capacity(order);
                let mut labels = Vec::with_capacity(order);
                for ix in 0..16 {
                    for iy in 0..8 {
                        let x = axis_level(ix, 16);
                        let y = axis_level(iy, 8);
                        let p = if x.abs() >= 13 { (y, x.signum() * (24 - x.abs())) } else { (x, y) };
                        grid.push(p);
                        labels.push((gray(ix as u32) << 3) | gray(iy as u32));
                    }
                }
                (grid, labels)
            }
            _ => return Err(Error::Unsupported(format!("QAM order {order}"))),
        };
        let energy = grid
            .iter()
            .map(|&(x, y)| (x * x + y * y) as f64)
            .sum::<f64>()
            / order as f64;
        let scale = 1.0 / energy.sqrt();
        let points = grid
            .iter()
            .map(|&(x, y)| Complex64::new(x as f64 * scale, y as f64 * scale))
            .collect();
        let lookup: HashMap<(i32, i32), usize> = grid.iter().enumerate().map(|(k, &p)| (p, k)).collect();
        let wedges = grid
            .iter()
            .map(|&(x, y)| if order == 128 { Wedge::of(x, y) } else { None })
            .collect();
        let regions = grid
            .iter()
            .map(|&(x, y)| {
                let along = |dx: i32, dy: i32| -> f64 {
                    // distance to the nearest point in this direction, halved
                    let mut step = 1;
                    while step <= 32 {
                        if lookup.contains_key(&(x + dx * 2 * step, y + dy * 2 * step)) {
                            return step as f64;
                        }
                        step += 1;
                    }
                    f64::INFINITY
                };
                (
                    x as f64 - along(-1, 0),
                    x as f64 + along(1, 0),
                    y as f64 - along(0, -1),
                    y as f64 + along(0, 1),
                )
            })
            .collect();
        Ok(Self {
            order,
            bits: order.trailing_zeros(),
            grid,
            labels,
            points,
            scale,
            lookup,
            regions,
            wedges,
            energy,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits
    }

    pub fn points(&self) -> &[Complex64] {
        &self.points
    }

    pub fn label(&self, index: usize) -> u32 {
        self.labels[index]
    }

    pub fn bit_errors(&self, sent: usize, detected: usize) -> u32 {
        (self.labels[sent] ^ self.labels[detected]).count_ones()
    }

    /// Average energy of the integer grid before normalization.
    pub fn grid_energy(&self) -> f64 {
        self.energy
    }

    /// Nearest constellation point.
    pub fn detect(&self, y: Complex64) -> usize {
        let gx = y.re / self.scale;
        let gy = y.im / self.scale;
        let limit = self.grid.iter().map(|p| p.0.abs().max(p.1.abs())).max().unwrap();
        let snap = |v: f64| -> i32 {
            let k = (v / 2.0).floor() as i32 * 2 + 1;
            k.clamp(-limit, limit)
        };
        if let Some(&k) = self.lookup.get(&(snap(gx), snap(gy))) {
            return k;
        }
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (k, p) in self.points.iter().enumerate() {
            let d = (y - p).norm_sqr();
            if d < best_d {
                best_d = d;
                best = k;
            }
        }
        best
    }

    /// Closed-form BER at symbol SNR `gamma` (unit symbol energy, noise
    /// variance `1 / gamma`).
    pub fn ber(&self, gamma: f64) -> f64 {
        if !(gamma > 0.0) {
            return 0.5;
        }
        if gamma.is_infinite() {
            return 0.0;
        }
        // per-axis noise std in grid units
        let sigma = (1.0 / (2.0 * gamma)).sqrt() / self.scale;
        // region boundaries sit at even grid offsets, so tails are tabulated
        const SPAN: i32 = 48;
        let table: Vec<f64> = (-SPAN..=SPAN)
            .map(|t| 0.5 * erfc(t as f64 / (std::f64::consts::SQRT_2 * sigma)))
            .collect();
        let tail = |t: f64| -> f64 {
            if t == f64::INFINITY {
                0.0
            } else if t == f64::NEG_INFINITY {
                1.0
            } else {
                table[(t as i32 + SPAN) as usize]
            }
        };
        let mut total = 0.0;
        for (i, &(xi, yi)) in self.grid.iter().enumerate() {
            for (j, &(xl, xh, yl, yh)) in self.regions.iter().enumerate() {
                let ham = self.bit_errors(i, j);
                if ham == 0 {
                    continue;
                }
                let p = match &self.wedges[j] {
                    None => {
                        let px = tail(xl - xi as f64) - tail(xh - xi as f64);
                        let py = tail(yl - yi as f64) - tail(yh - yi as f64);
                        px * py
                    }
                    Some(w) => {
                        let (qx, qy) = w.frame(xi, yi);
                        let px = tail(w.a - qx) - tail(w.b - qx);
                        px * (tail(6.0 - qy) - tail(8.0 - qy)) + wedge_integral(w.a, w.b, qx, qy, sigma, px * tail(8.0 - qy))
                    }
                };
                total += ham as f64 * p;
            }
        }
        total / (self.order as f64 * self.bits as f64)
    }

    pub fn random_indices(&self, rng: &mut impl Rng, count: usize) -> Vec<usize> {
        (0..count).map(|_| rng.random_range(0..self.order)).collect()
    }
}

/// `int_a^b phi(X - qx) [Phi(X - qy) - Phi(8 - qy)] dX` for per-axis noise
/// `sigma`, by composite Simpson over `qx +- 9 sigma`. `bound` is an upper
/// bound on the result; negligible wedges are skipped.
fn wedge_integral(a: f64, b: f64, qx: f64, qy: f64, sigma: f64, bound: f64) -> f64 {
    if bound < 1e-22 {
        return 0.0;
    }
    let lo = a.max(qx - 9.0 * sigma);
    let hi = b.min(qx + 9.0 * sigma);
    if !(hi > lo) {
        return 0.0;
    }
    let cdf = |t: f64| 0.5 * erfc(-t / (std::f64::consts::SQRT_2 * sigma));
    let base = cdf(8.0 - qy);
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    let f = |x: f64| norm * (-(x - qx).powi(2) / (2.0 * sigma * sigma)).exp() * (cdf(x - qy) - base);
    const N: usize = 96;
    let h = (hi - lo) / N as f64;
    let mut sum = f(lo) + f(hi);
    for k in 1..N {
        sum += f(lo + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// BER of Gray-labelled QAM over AWGN at symbol SNR `gamma`.
pub fn ber_awgn(gamma: f64, order: usize) -> Result<f64> {
    Ok(Constellation::new(order)?.ber(gamma))
}

/// Counts bit errors of nearest-point detection over AWGN.
pub fn monte_carlo_ber_awgn(constellation: &Constellation, gamma: f64, symbols: usize, rng: &mut impl Rng) -> (u64, u64) {
    let std = (1.0 / (2.0 * gamma)).sqrt();
    let mut errors = 0u64;
    for _ in 0..symbols {
        let k = rng.random_range(0..constellation.order());
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        let y = constellation.points()[k] + Complex64::new(re * std, im * std);
        errors += constellation.bit_errors(k, constellation.detect(y)) as u64;
    }
    (errors, symbols as u64 * constellation.bits_per_symbol() as u64)
}
