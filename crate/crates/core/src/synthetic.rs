//! Seeded synthetic datasets for tests and smoke runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::Dataset;

/// `n` points in `[0, 1]^d` labelled by which of `k` bands of `x0 + x1`
/// they fall in. Points within `margin` of a band edge are redrawn, so the
/// classes are linearly separable with a gap.
pub fn separable(n: usize, k: usize, d: usize, margin: f64, seed: u64) -> Dataset {
    assert!(d >= 2 && k >= 2);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    let width = 2.0 / k as f64;
    while rows.len() < n {
        let x: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let s = x[0] + x[1];
        let class = ((s / width) as usize).min(k - 1);
        let near_edge = (1..k).any(|b| (s - b as f64 * width).abs() < margin);
        if near_edge {
            continue;
        }
        rows.push(x);
        labels.push(class);
    }
    // make sure every class occurs at least once
    for c in 0..k {
        if !labels.contains(&c) {
            let s = (c as f64 + 0.5) * width;
            let mut x = vec![0.5; d];
            x[0] = s / 2.0;
            x[1] = s / 2.0;
            rows[c] = x;
            labels[c] = c;
        }
    }
    Dataset::with_numeric_labels(&rows, labels, k).expect("valid synthetic data")
}

/// Two Gaussian classes in `d` dimensions with unit variance and means
/// `±separation/2` along every axis. Class 1 has prior `p1`.
pub fn two_gaussians(n: usize, d: usize, separation: f64, p1: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let y = usize::from(rng.random::<f64>() < p1);
        let mean = if y == 1 { separation / 2.0 } else { -separation / 2.0 };
        let x: Vec<f64> = (0..d)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                mean + e
            })
            .collect();
        rows.push(x);
        labels.push(y);
    }
    if labels.iter().all(|&y| y == labels[0]) {
        labels[0] = 1 - labels[0];
    }
    Dataset::with_numeric_labels(&rows, labels, 2).expect("valid synthetic data")
}

/// `k` overlapping Gaussian blobs with random centres in `[-spread, spread]^d`.
pub fn blobs(n: usize, k: usize, d: usize, spread: f64, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centres: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-spread..spread)).collect())
        .collect();
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let y = if i < k { i } else { rng.random_range(0..k) };
        let x: Vec<f64> = centres[y]
            .iter()
            .map(|&c| {
                let e: f64 = StandardNormal.sample(&mut rng);
                c + e
            })
            .collect();
        rows.push(x);
        labels.push(y);
    }
    Dataset::with_numeric_labels(&rows, labels, k).expect("valid synthetic data")
}
