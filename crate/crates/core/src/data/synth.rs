//! Generators for the three synthetic regimes: arbitrary rate matrices,
//! MNL qualities on the simplex, and Blade-Chest embeddings on the unit circle.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use rand::seq::index;
use rand::Rng;

use super::rng_from_seed;
use crate::axioms::{Partition, Tournament};
use crate::ctmc::RateMatrix;
use crate::luce::MnlModel;
use crate::param::{BladeChest, BladeChestVariant};

/// A random rate matrix together with how many pairs needed rescaling to
/// satisfy `q_ij + q_ji >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct RandomQ {
    pub q: RateMatrix,
    pub repaired_pairs: usize,
}

/// Draws every `q_ij` i.i.d. from `U[0, 1)`, then rescales each pair whose
/// sum falls below one by `1 / (q_ij + q_ji)`.
pub fn gen_random_q(n: usize, seed: u64) -> RandomQ {
    let mut rng = rng_from_seed(seed);
    let mut rates = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rates[i * n + j] = rng.gen::<f64>();
            }
        }
    }
    let mut repaired_pairs = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            let sum = rates[i * n + j] + rates[j * n + i];
            if sum < 1.0 {
                repaired_pairs += 1;
                if sum > 0.0 {
                    rates[i * n + j] /= sum;
                    rates[j * n + i] /= sum;
                } else {
                    rates[i * n + j] = 0.5;
                    rates[j * n + i] = 0.5;
                }
            }
        }
    }
    RandomQ {
        q: RateMatrix::new(n, rates).expect("draws are finite and nonnegative"),
        repaired_pairs,
    }
}

/// Qualities uniform on the simplex, via normalized standard exponentials.
pub fn gen_mnl_simplex(n: usize, seed: u64) -> MnlModel {
    let mut rng = rng_from_seed(seed);
    let gamma: Vec<f64> = (0..n)
        .map(|_| {
            // 1 - u lies in (0, 1], keeping the logarithm finite; the tiny
            // floor keeps every quality strictly positive.
            let u: f64 = rng.gen();
            (-libm::log(1.0 - u)).max(f64::MIN_POSITIVE)
        })
        .collect();
    MnlModel::new(gamma).expect("exponential draws are positive")
}

/// Blades and chests at independent uniform angles on the unit circle,
/// distance variant, `d = 2`.
pub fn gen_bladechest_circle(n: usize, seed: u64) -> BladeChest {
    let mut rng = rng_from_seed(seed);
    let mut point = || {
        let theta = rng.gen::<f64>() * 2.0 * PI;
        vec![libm::cos(theta), libm::sin(theta)]
    };
    let blades: Vec<Vec<f64>> = (0..n).map(|_| point()).collect();
    let chests: Vec<Vec<f64>> = (0..n).map(|_| point()).collect();
    BladeChest::new(blades, chests, BladeChestVariant::Distance).expect("finite unit vectors")
}

/// Every `k`-subset of `0..n` in lexicographic order.
pub fn all_subsets_of_size(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == n - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            return out;
        }
        idx[pos - 1] += 1;
        for p in pos..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
}

/// `count` distinct triplets drawn uniformly without replacement from all
/// triplets of `0..n`; every triplet when fewer than `count` exist.
pub fn random_triplets(n: usize, count: usize, seed: u64) -> Vec<Vec<usize>> {
    let all = all_subsets_of_size(n, 3);
    if count >= all.len() {
        return all;
    }
    let mut rng = rng_from_seed(seed);
    index::sample(&mut rng, all.len(), count)
        .into_iter()
        .map(|k| all[k].clone())
        .collect()
}

/// Tournament with every pair oriented by a fair coin.
pub fn random_tournament(n: usize, seed: u64) -> Tournament {
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            edges.push(if rng.gen::<bool>() { (i, j) } else { (j, i) });
        }
    }
    Tournament::new(n, &edges).expect("one edge per pair")
}

fn canonical_pair<R: Rng>(rng: &mut R) -> (f64, f64) {
    let (a, b) = (rng.gen::<f64>(), rng.gen::<f64>());
    let sum = a + b;
    if sum >= 1.0 {
        (a, b)
    } else if sum > 0.0 {
        (a / sum, b / sum)
    } else {
        (0.5, 0.5)
    }
}

/// Two canonical rate matrices sharing a contractible partition (between 2
/// and `max_blocks` blocks of 1 to `max_block_size` items) and its block
/// rates, with independently drawn rates inside each block.
pub fn gen_contractible_pair(
    seed: u64,
    max_blocks: usize,
    max_block_size: usize,
) -> (RateMatrix, RateMatrix, Partition) {
    let mut rng = rng_from_seed(seed);
    let k = rng.gen_range(2..=max_blocks.max(2));
    let sizes: Vec<usize> = (0..k)
        .map(|_| rng.gen_range(1..=max_block_size.max(1)))
        .collect();
    let n: usize = sizes.iter().sum();
    let mut block_of = Vec::with_capacity(n);
    for (b, &size) in sizes.iter().enumerate() {
        block_of.extend(core::iter::repeat_n(b, size));
    }
    let mut lambda = vec![0.0; k * k];
    for a in 0..k {
        for b in (a + 1)..k {
            let (x, y) = canonical_pair(&mut rng);
            lambda[a * k + b] = x;
            lambda[b * k + a] = y;
        }
    }
    let draw = |rng: &mut super::SeededRng| {
        let mut rates = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let (bi, bj) = (block_of[i], block_of[j]);
                let (x, y) = if bi == bj {
                    canonical_pair(rng)
                } else {
                    (lambda[bi * k + bj], lambda[bj * k + bi])
                };
                rates[i * n + j] = x;
                rates[j * n + i] = y;
            }
        }
        RateMatrix::new(n, rates).expect("finite nonnegative rates")
    };
    let q = draw(&mut rng);
    let q2 = draw(&mut rng);
    let mut start = 0;
    let blocks = sizes
        .iter()
        .map(|&size| {
            let block: Vec<usize> = (start..start + size).collect();
            start += size;
            block
        })
        .collect();
    (q, q2, Partition::new(n, blocks).expect("blocks cover 0..n"))
}
