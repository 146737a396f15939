//! Independent oracles shared by the property and acceptance suites.
//!
//! Each `check_*` routine panics with a description of the first mismatch.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use rboost::boost::{grads_abc, grads_plain, hessian_diagnostics, softmax_row};
use rboost::data::{build_sorted_index, Dataset};
use rboost::tree::{find_best_split, gain_from_sums, SplitCandidate, WorkingSample};

// ---- direct weighted squared-error oracle ----

pub fn weighted_se(items: &[(f64, f64)]) -> f64 {
    let sw: f64 = items.iter().map(|&(_, w)| w).sum();
    let mean = items.iter().map(|&(z, w)| z * w).sum::<f64>() / sw;
    items.iter().map(|&(z, w)| w * (z - mean) * (z - mean)).sum()
}

/// Best `(feature, threshold, gain)` by trying every cut between distinct
/// values of every feature and computing `SE_T − SE_L − SE_R` from means.
pub fn brute_force_split(columns: &[Vec<f64>], z: &[f64], w: &[f64]) -> Option<(usize, f64, f64)> {
    let mut best: Option<(usize, f64, f64)> = None;
    for (d, col) in columns.iter().enumerate() {
        let mut distinct: Vec<f64> = col.clone();
        distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
        distinct.dedup();
        for pair in distinct.windows(2) {
            let cut = 0.5 * (pair[0] + pair[1]);
            let gain = direct_gain_at(columns, z, w, d, cut);
            if best.is_none_or(|b| gain > b.2) {
                best = Some((d, cut, gain));
            }
        }
    }
    best
}

pub fn direct_gain_at(columns: &[Vec<f64>], z: &[f64], w: &[f64], feature: usize, threshold: f64) -> f64 {
    let all: Vec<(f64, f64)> = z.iter().copied().zip(w.iter().copied()).collect();
    let (l, r): (Vec<_>, Vec<_>) = (0..z.len()).partition(|&i| columns[feature][i] <= threshold);
    let pick = |ix: &[usize]| ix.iter().map(|&i| (z[i], w[i])).collect::<Vec<_>>();
    weighted_se(&all) - weighted_se(&pick(&l)) - weighted_se(&pick(&r))
}

pub fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, Vec<f64>, Vec<f64>) {
    let n = rng.random_range(2..=64);
    let d = rng.random_range(1..=4);
    // coarse grids in some features so ties are exercised
    let columns: Vec<Vec<f64>> = (0..d)
        .map(|_| {
            let levels = if rng.random_bool(0.5) { rng.random_range(2..8) } else { 0 };
            (0..n)
                .map(|_| {
                    let x: f64 = rng.random();
                    if levels > 0 {
                        (x * levels as f64).floor()
                    } else {
                        x
                    }
                })
                .collect()
        })
        .collect();
    let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(rng)).collect();
    let w: Vec<f64> = (0..n).map(|_| rng.random_range(1e-3..1.0)).collect();
    (columns, z, w)
}

pub fn dataset_from_columns(columns: &[Vec<f64>]) -> Dataset {
    let n = columns[0].len();
    let rows: Vec<Vec<f64>> = (0..n).map(|i| columns.iter().map(|c| c[i]).collect()).collect();
    let labels = (0..n).map(|i| i % 2).collect();
    Dataset::with_numeric_labels(&rows, labels, 2).unwrap()
}

pub fn root_split(ds: &Dataset, samples: &[WorkingSample]) -> Option<SplitCandidate> {
    let index = build_sorted_index(ds);
    let runs: Vec<&[u32]> = (0..ds.n_features()).map(|d| index.permutation(d)).collect();
    find_best_split(ds, &runs, samples, 1)
}

/// Random weighted instances against the brute-force maximizer, gains
/// within `1e-9` relative. Returns the number of instances with a split.
pub fn check_split_oracle(instances: usize, seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut compared = 0;
    for _ in 0..instances {
        let (columns, z, w) = random_instance(&mut rng);
        let ds = dataset_from_columns(&columns);
        let samples: Vec<WorkingSample> = z.iter().zip(&w).map(|(&z, &w)| WorkingSample::from_response(z, w)).collect();
        let found = root_split(&ds, &samples);
        let oracle = brute_force_split(&columns, &z, &w);
        match (found, oracle) {
            (Some(f), Some((_, _, best))) => {
                let tol = 1e-9 * best.abs().max(1e-12);
                assert!((f.gain - best).abs() <= tol, "gain {} vs oracle {best}", f.gain);
                let direct = direct_gain_at(&columns, &z, &w, f.feature, f.threshold);
                assert!((direct - best).abs() <= tol, "chosen split has gain {direct}, oracle {best}");
                assert!(f.gain >= -1e-12);
                compared += 1;
            }
            (None, Some((_, _, best))) => {
                // only a noise-level improvement may be rejected
                let all: Vec<(f64, f64)> = z.iter().copied().zip(w.iter().copied()).collect();
                assert!(best <= 1e-9 * weighted_se(&all).max(1e-12), "missed split with gain {best}");
            }
            (Some(f), None) => panic!("split {f:?} where no cut exists"),
            (None, None) => {}
        }
    }
    compared
}

/// With unit weights the grouped gain is the mart criterion, bit for bit.
pub fn check_unit_weight_criterion(instances: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..instances {
        let n = rng.random_range(2..=64);
        let s = rng.random_range(1..n);
        let r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let left: f64 = r[..s].iter().sum();
        let right: f64 = r[s..].iter().sum();
        let (sf, nf) = (s as f64, n as f64);
        let mart = left * left / sf + right * right / (nf - sf) - (left + right) * (left + right) / nf;
        assert_eq!(gain_from_sums(left, sf, right, nf - sf).unwrap(), mart);
    }
    // and the search reports that value at the cut it picks
    for _ in 0..instances {
        let (columns, z, _) = random_instance(&mut rng);
        let ds = dataset_from_columns(&columns);
        let samples: Vec<WorkingSample> = z.iter().map(|&z| WorkingSample::new(z, 1.0)).collect();
        let Some(f) = root_split(&ds, &samples) else { continue };
        let (mut sl, mut sr, mut nl) = (0.0, 0.0, 0usize);
        for (i, &x) in columns[f.feature].iter().enumerate() {
            if x <= f.threshold {
                sl += z[i];
                nl += 1;
            } else {
                sr += z[i];
            }
        }
        let n = z.len() as f64;
        let mart = sl * sl / nl as f64 + sr * sr / (n - nl as f64) - (sl + sr) * (sl + sr) / n;
        assert!((f.gain - mart).abs() <= 1e-12 * mart.abs().max(1.0), "{} vs {mart}", f.gain);
        assert_eq!(nl, f.left_count);
    }
}

// ---- derivatives ----

pub fn nll(scores: &[f64], y: usize) -> f64 {
    -softmax_row(scores)[y].ln()
}

fn random_state(rng: &mut ChaCha8Rng) -> (Vec<f64>, usize) {
    let k = rng.random_range(2..=8);
    let scores = (0..k)
        .map(|_| {
            let e: f64 = StandardNormal.sample(rng);
            2.0 * e
        })
        .collect();
    (scores, rng.random_range(0..k))
}

fn indicator(y: usize, k: usize) -> f64 {
    if y == k {
        1.0
    } else {
        0.0
    }
}

/// Central differences of the loss against the per-class derivatives.
pub fn check_plain_derivatives(states: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..states {
        let (f, y) = random_state(&mut rng);
        let p = softmax_row(&f);
        let at = |k: usize, t: f64| {
            let mut g = f.clone();
            g[k] += t;
            nll(&g, y)
        };
        for k in 0..f.len() {
            let (g, hess) = grads_plain(indicator(y, k), p[k]);
            let h = 1e-5;
            let fd = (at(k, h) - at(k, -h)) / (2.0 * h);
            assert!((fd + g).abs() <= 1e-6, "first derivative {fd} vs {}", -g);
            let h2 = 1e-4;
            let fd2 = (at(k, h2) - 2.0 * at(k, 0.0) + at(k, -h2)) / (h2 * h2);
            assert!((fd2 - hess).abs() <= 1e-6, "second derivative {fd2} vs {hess}");
        }
    }
}

/// Same with the base score tied to minus the sum of the others.
pub fn check_sum_to_zero_derivatives(states: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..states {
        let (mut f, y) = random_state(&mut rng);
        let kc = f.len();
        let b = rng.random_range(0..kc);
        let others: f64 = (0..kc).filter(|&k| k != b).map(|k| f[k]).sum();
        f[b] = -others;
        let p = softmax_row(&f);
        // moving F_k by t forces F_b by −t
        let along = |k: usize, t: f64| {
            let mut g = f.clone();
            g[k] += t;
            g[b] -= t;
            nll(&g, y)
        };
        for k in (0..kc).filter(|&k| k != b) {
            let (g, hess) = grads_abc(indicator(y, b), p[b], indicator(y, k), p[k]);
            let h = 1e-5;
            let fd = (along(k, h) - along(k, -h)) / (2.0 * h);
            assert!((fd + g).abs() <= 1e-4, "first derivative {fd} vs {}", -g);
            let h2 = 1e-4;
            let fd2 = (along(k, h2) - 2.0 * along(k, 0.0) + along(k, -h2)) / (h2 * h2);
            assert!((fd2 - hess).abs() <= 1e-4, "second derivative {fd2} vs {hess}");
        }
    }
}

// ---- Hessian determinants ----

pub fn simplex_point(rng: &mut ChaCha8Rng) -> [f64; 3] {
    let e: [f64; 3] = std::array::from_fn(|_| -(1.0 - rng.random::<f64>()).ln());
    let s: f64 = e.iter().sum();
    [e[0] / s, e[1] / s, e[2] / s]
}

/// Closed-form determinant of the reduced 2 × 2 Hessian.
pub fn determinant_polynomial(p: [f64; 3]) -> f64 {
    let [a, b, c] = p;
    a * b + a * c + b * c - a * b * b - a * c * c - b * c * c - c * b * b - b * a * a - c * a * a + 6.0 * a * b * c
}

pub fn check_hessians(points: usize, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..points {
        let p = simplex_point(&mut rng);
        let dets: Vec<(f64, f64)> = (0..3).map(|b| hessian_diagnostics(p, b).unwrap()).collect();
        let poly = determinant_polynomial(p);
        for &(full, reduced) in &dets {
            assert!(full.abs() <= 1e-12, "full determinant {full} at {p:?}");
            assert!((reduced - dets[0].1).abs() <= 1e-12, "base dependence at {p:?}");
            assert!((reduced - poly).abs() <= 1e-12, "{reduced} vs {poly} at {p:?}");
        }
    }
    let u = [1.0 / 3.0; 3];
    assert!((determinant_polynomial(u) - 1.0 / 3.0).abs() <= 1e-15);
    for b in 0..3 {
        let (full, reduced) = hessian_diagnostics(u, b).unwrap();
        assert!(full.abs() <= 1e-15);
        assert!((reduced - 1.0 / 3.0).abs() <= 1e-15, "uniform point gives {reduced}");
    }
}
