//! Low-discrepancy sequences and seeded random band-limited test data.

use crate::fields::{Axis, Chart, Field};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::sync::Arc;

/// Radical inverse of `index` in the given base (Halton sequence component).
pub fn halton(mut index: usize, base: usize) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while index > 0 {
        f /= base as f64;
        r += f * (index % base) as f64;
        index /= base;
    }
    r
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random complex field with Fourier modes |k_i| ≤ kmax on every periodic axis.
///
/// Amplitudes decay like 1/(1+|k|²) so products stay well resolved.
pub fn band_limited(chart: &Arc<Chart>, kmax: i64, rng: &mut impl Rng) -> Field {
    assert!(chart.is_grid(), "band_limited needs a grid chart");
    let ranges: Vec<Vec<i64>> = chart
        .axes()
        .iter()
        .map(|a| match a {
            Axis::Periodic { .. } => (-kmax..=kmax).collect(),
            _ => vec![0],
        })
        .collect();
    let mut modes: Vec<(Vec<usize>, C64)> = Vec::new();
    let mut idx = vec![0usize; ranges.len()];
    loop {
        let k2: i64 = idx.iter().zip(&ranges).map(|(&i, r)| r[i] * r[i]).sum();
        let amp = 1.0 / (1.0 + k2 as f64);
        let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * amp;
        modes.push((idx.clone(), c));
        let mut d = 0;
        loop {
            if d == idx.len() {
                break;
            }
            idx[d] += 1;
            if idx[d] < ranges[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == idx.len() {
            break;
        }
    }
    // e^{2πi k x/L} per axis, mode and node; the field is a sum of separable products
    let tables: Vec<Vec<Vec<C64>>> = chart
        .axes()
        .iter()
        .zip(&ranges)
        .map(|(a, ks)| {
            let l = match a {
                Axis::Periodic { length, .. } => *length,
                _ => 1.0,
            };
            ks.iter()
                .map(|&k| (0..a.nodes()).map(|i| C64::new(0.0, 2.0 * std::f64::consts::PI * k as f64 * a.coord(i) / l).exp()).collect())
                .collect()
        })
        .collect();
    let shape: Vec<usize> = chart.axes().iter().map(|a| a.nodes()).collect();
    let data = (0..chart.nnodes())
        .into_par_iter()
        .map(|node| {
            let mut pos = vec![0usize; shape.len()];
            let mut rest = node;
            for d in (0..shape.len()).rev() {
                pos[d] = rest % shape[d];
                rest /= shape[d];
            }
            modes
                .iter()
                .map(|(k, c)| k.iter().enumerate().fold(*c, |acc, (d, &kd)| acc * tables[d][kd][pos[d]]))
                .sum()
        })
        .collect();
    Field::new(chart, data, 0)
}

/// Real part of [`band_limited`].
pub fn band_limited_real(chart: &Arc<Chart>, kmax: i64, rng: &mut impl Rng) -> Field {
    band_limited(chart, kmax, rng).re()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halton_base_two() {
        assert_eq!(halton(1, 2), 0.5);
        assert_eq!(halton(2, 2), 0.25);
        assert_eq!(halton(3, 2), 0.75);
    }

    #[test]
    fn band_limited_is_seeded() {
        let c = Chart::periodic3([8; 3], [1.0; 3]).unwrap();
        let a = band_limited(&c, 2, &mut rng(7));
        let b = band_limited(&c, 2, &mut rng(7));
        assert_eq!(a.data(), b.data());
    }
}
