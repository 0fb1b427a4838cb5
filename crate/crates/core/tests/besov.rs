mod common;

use std::f64::consts::PI;

use common::sup_diff;
use mnslab::besov::{build_partition, distribution_distance, norm, NormFamily, NormSpec};
use mnslab::geometry::Grid;
use mnslab::noise::rng_for;
use mnslab::particles::ParticleState;
use mnslab::spde::FieldState;
use rand::Rng;

fn grid() -> Grid {
    Grid::new(2, 64, 2.0 * PI)
}

/// Random trigonometric polynomial with modes `kmin ≤ |k|∞ ≤ kmax`.
fn random_field(g: &Grid, seed: u64, kmin: i32, kmax: i32) -> Vec<f64> {
    let mut rng = rng_for(seed, &[]);
    let mut f = vec![0.0; g.len()];
    for a in -kmax..=kmax {
        for b in 0..=kmax {
            if a.abs().max(b) < kmin {
                continue;
            }
            let (c, ph): (f64, f64) = (rng.random::<f64>() - 0.5, rng.random::<f64>() * 2.0 * PI);
            let mut x = [0.0; 2];
            for (k, v) in f.iter_mut().enumerate() {
                g.node(k, &mut x);
                *v += c * (a as f64 * x[0] + b as f64 * x[1] + ph).cos();
            }
        }
    }
    f
}

#[test]
fn blocks_resum_to_the_field() {
    let g = grid();
    let part = build_partition(1.3, &g).unwrap();
    let f = random_field(&g, 1, 0, 12);
    let mut sum = vec![0.0; g.len()];
    for b in part.blocks(&f) {
        sum.iter_mut().zip(&b).for_each(|(s, v)| *s += v);
    }
    assert!(sup_diff(&sum, &f) < 1e-10);
}

#[test]
fn norm_axioms() {
    let g = grid();
    let part = build_partition(1.3, &g).unwrap();
    let f = random_field(&g, 2, 0, 10);
    let h = random_field(&g, 3, 0, 10);
    for spec in [NormSpec::besov(-1.5, 2.0, 2.0), NormSpec::besov(0.5, 3.0, 1.5), NormSpec::triebel_lizorkin(1.0, 2.0, 3.0)] {
        let nf = norm(&f, &spec, &part).unwrap();
        let scaled: Vec<f64> = f.iter().map(|v| -2.5 * v).collect();
        assert!((norm(&scaled, &spec, &part).unwrap() - 2.5 * nf).abs() < 1e-12 * nf);
        let sum: Vec<f64> = f.iter().zip(&h).map(|(a, b)| a + b).collect();
        assert!(norm(&sum, &spec, &part).unwrap() <= nf + norm(&h, &spec, &part).unwrap() * (1.0 + 1e-12));
        assert_eq!(norm(&vec![0.0; g.len()], &spec, &part).unwrap(), 0.0);
    }
}

#[test]
fn monotone_in_smoothness_without_low_modes() {
    // with no energy in the χ block every weight 2^{js}, j ≥ 0, grows with s
    let g = grid();
    let part = build_partition(1.3, &g).unwrap();
    let f = random_field(&g, 4, 2, 14);
    assert!(part.block(&f, -1).unwrap().iter().all(|v| v.abs() < 1e-12));
    let mut last = 0.0;
    for s in [-3.0, -1.0, 0.0, 0.5, 2.0] {
        let n = norm(&f, &NormSpec::besov(s, 2.0, 2.0), &part).unwrap();
        assert!(n >= last, "s = {s}");
        last = n;
    }
}

#[test]
fn equivalent_to_sobolev_norm() {
    // B^s_{2,2} and H^s are equivalent with constants depending on s and λ only
    let g = grid();
    let part = build_partition(1.3, &g).unwrap();
    let h = 2.0 * PI / 64.0;
    for s in [-2.5f64, 1.0] {
        let mut ratios = Vec::new();
        for k in 1..30 {
            let f = g.sample(|x| (k as f64 * x[0]).cos());
            let l2 = (f.iter().map(|v| v * v).sum::<f64>() * h * h).sqrt();
            let hs = (1.0 + (k * k) as f64).powf(s / 2.0) * l2;
            ratios.push(norm(&f, &NormSpec::besov(s, 2.0, 2.0), &part).unwrap() / hs);
        }
        let (lo, hi) = ratios.iter().fold((f64::MAX, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
        // the annuli span a factor 2λ², bounding the spread of 2^{js}/|ξ|^s
        let bound = (2.0 * 1.3f64 * 1.3 * 2.0).powf(s.abs());
        assert!(hi / lo <= bound, "s = {s}: ratio spread {}", hi / lo);
    }
}

#[test]
fn constant_and_single_mode_values() {
    let g = grid();
    let part = build_partition(1.3, &g).unwrap();
    let l = 2.0 * PI;
    for s in [-1.0, 0.0, 2.0] {
        let c = vec![-0.7; g.len()];
        let expected = 2f64.powf(-s) * 0.7 * l;
        assert!((norm(&c, &NormSpec::besov(s, 2.0, 2.0), &part).unwrap() - expected).abs() < 1e-12 * expected);
    }
    // |k| = 11 lies where block 3 is identically one
    let f = g.sample(|x| (11.0 * x[1]).sin());
    let l2 = (f.iter().map(|v| v * v).sum::<f64>()).sqrt() * l / 64.0;
    for s in [-2.0, 1.5] {
        let n = norm(&f, &NormSpec::besov(s, 2.0, 2.0), &part).unwrap();
        assert!((n - 2f64.powf(3.0 * s) * l2).abs() < 1e-10 * n);
    }
}

fn uniform_field(g: Grid, u: [f64; 2]) -> FieldState {
    let rho = 1.0 / (g.length * g.length);
    FieldState::constant(g, rho, &u)
}

#[test]
fn lattice_replica_has_zero_distance() {
    // one particle per node reproduces the uniform density and momentum exactly
    let g = Grid::new(2, 32, 8.0);
    let part = build_partition(1.3, &g).unwrap();
    let f = uniform_field(g, [0.3, -0.1]);
    let mut x = Vec::new();
    let mut node = [0.0; 2];
    for k in 0..g.len() {
        g.node(k, &mut node);
        x.extend_from_slice(&node);
    }
    let v = [0.3, -0.1].repeat(g.len());
    let s = ParticleState::new(2, x, v, 0.0).unwrap();
    let d = distribution_distance(&s, &f, 2.5, 2.0, NormFamily::Besov, &part).unwrap();
    assert!(d.density < 1e-13 && d.momentum < 1e-13, "{d:?}");
}

#[test]
fn point_mass_distance_decreases_in_alpha() {
    let g = Grid::new(2, 32, 8.0);
    let part = build_partition(1.3, &g).unwrap();
    let f = FieldState::constant(g, 0.0, &[0.0, 0.0]);
    let s = ParticleState::new(2, vec![4.0, 4.0], vec![0.0, 0.0], 0.0).unwrap();
    // direct DFT oracle: the deposited point mass δ/h² has |f̂_k| h² = 1 in every bin
    let energy = |j: i32| part.weights(j).unwrap().iter().map(|x| x * x).sum::<f64>() / (g.length * g.length);
    let oracle = |alpha: f64| (-1..=part.j_max).map(|j| 2f64.powf(-2.0 * alpha * j as f64) * energy(j)).sum::<f64>().sqrt();
    // the χ block carries the weight 2^{α}, so only the j ≥ 0 part must decrease in α
    let mut last = f64::INFINITY;
    for alpha in [2.5, 4.0, 6.0] {
        let d = distribution_distance(&s, &f, alpha, 2.0, NormFamily::Besov, &part).unwrap();
        assert!((d.density - oracle(alpha)).abs() < 1e-10 * oracle(alpha), "{} vs {}", d.density, oracle(alpha));
        assert!(d.density.is_finite());
        assert_eq!(d.momentum, 0.0);
        let high = (d.density.powi(2) - 2f64.powf(2.0 * alpha) * energy(-1)).sqrt();
        assert!(high < last, "alpha {alpha}: {high} !< {last}");
        last = high;
    }
    assert!(distribution_distance(&s, &f, 2.0, 2.0, NormFamily::Besov, &part).is_err());
}

#[test]
fn momentum_distance_tracks_density_distance() {
    // V^k = c for all k and υ ≡ c: V^N - ρυ = c (S^N - ρ), so the distances differ by |c|
    let g = Grid::new(2, 32, 8.0);
    let part = build_partition(1.3, &g).unwrap();
    let c = [0.6, -0.8];
    let f = uniform_field(g, c);
    let mut rng = rng_for(9, &[]);
    let n = 500;
    let x = (0..2 * n).map(|_| rng.random::<f64>() * 8.0).collect();
    let s = ParticleState::new(2, x, c.repeat(n), 0.0).unwrap();
    let d = distribution_distance(&s, &f, 2.5, 2.0, NormFamily::Besov, &part).unwrap();
    assert!((d.momentum - 1.0 * d.density).abs() < 1e-12 * d.density, "{d:?}");
}
