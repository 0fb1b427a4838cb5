//! Oracles and helpers shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;

use mnslab::fft::GridFft;
use mnslab::geometry::Grid;
use rustfft::num_complex::Complex64;

/// Nodes and weights of `n`-point Gauss-Hermite quadrature for the weight `e^{-x²}`,
/// by Newton iteration on the orthonormal Hermite recurrence.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let pim4 = PI.powf(-0.25);
    let mut z = 0.0f64;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * n as f64 + 1.0).sqrt() - 1.85575 * (2.0 * n as f64 + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * (n as f64).powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = pim4;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / (j as f64 + 1.0)).sqrt() * p2 - (j as f64 / (j as f64 + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * n as f64).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

/// Spectral derivative `∂_axis f` of a periodic grid field.
pub fn spectral_d(fft: &GridFft, f: &[f64], axis: usize) -> Vec<f64> {
    let grid = *fft.grid();
    let mut hat = fft.forward_real(f);
    let mut xi = vec![0.0; grid.d];
    let mut idx = vec![0; grid.d];
    for (k, c) in hat.iter_mut().enumerate() {
        grid.unflat(k, &mut idx);
        // the Nyquist mode has no odd counterpart
        if grid.m.is_multiple_of(2) && idx[axis] == grid.m / 2 {
            *c = Complex64::new(0.0, 0.0);
            continue;
        }
        fft.wave_vector(k, &mut xi);
        *c *= Complex64::new(0.0, xi[axis]);
    }
    fft.inverse_real(hat)
}

/// Least-squares slope of `y` against `x`.
pub fn slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Samples a periodic kernel at node offsets: node `j` holds `k(min_image(x_j))`.
pub fn sample_offsets<F: Fn(&[f64]) -> f64>(grid: &Grid, k: F) -> Vec<f64> {
    let dom = grid.domain();
    grid.sample(|x| {
        let y: Vec<f64> = x.iter().map(|&xi| dom.min_image(xi)).collect();
        k(&y)
    })
}
