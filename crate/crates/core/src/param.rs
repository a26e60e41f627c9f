//! Parameterizations of the rate matrix: BTL qualities, arbitrary pairwise
//! probability matrices (`Q = P^T`), and Blade-Chest embeddings.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution as _, StandardNormal};

use crate::ctmc::{self, check_subset, Distribution, RateMatrix};
use crate::data::{self, derive_seed, rng_from_seed, ChoiceDataset};
use crate::error::{Error, Result};
use crate::model::{ChoiceModel, FittedModel};
use crate::optim::{forward_difference, lbfgs_minimize, OptimOptions};
use crate::pcmc::{FitConfig, FitReport, SetLikelihood};

/// Tolerance on `p_ij + p_ji = 1`.
pub const TOL_PAIRWISE: f64 = 1e-10;

/// Pairwise probabilities `p_ij` that `i` is chosen over `j`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairwiseMatrix {
    n: usize,
    p: Vec<f64>,
}

impl PairwiseMatrix {
    /// Row-major `n * n` entries; the diagonal is ignored and stored as zero.
    pub fn new(n: usize, mut p: Vec<f64>) -> Result<Self> {
        if p.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: p.len(),
            });
        }
        for i in 0..n {
            p[i * n + i] = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let (pij, pji) = (p[i * n + j], p[j * n + i]);
                if !(0.0..=1.0).contains(&pij) || (pij + pji - 1.0).abs() > TOL_PAIRWISE {
                    return Err(Error::InvalidPairwise { row: i, col: j });
                }
            }
        }
        Ok(Self { n, p })
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    p[i * n + j] = f(i, j);
                }
            }
        }
        Self::new(n, p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[i * self.n + j]
    }
}

/// Rate matrix with `q_ji = gamma_i / (gamma_i + gamma_j)`, whose PCMC
/// probabilities coincide with the MNL model on `gamma`.
pub fn q_from_btl(gamma: &[f64]) -> Result<RateMatrix> {
    for (index, &value) in gamma.iter().enumerate() {
        if !(value > 0.0 && value.is_finite()) {
            return Err(Error::NonpositiveGamma { index, value });
        }
    }
    RateMatrix::from_fn(gamma.len(), |i, j| gamma[j] / (gamma[i] + gamma[j]))
}

/// `Q = P^T`: `q_ij = p_ji`.
pub fn q_from_pairwise(p: &PairwiseMatrix) -> RateMatrix {
    RateMatrix::from_fn(p.n, |i, j| p.get(j, i)).expect("pairwise entries lie in [0, 1]")
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BladeChestVariant {
    /// `p_ij = sigmoid(|b_i - c_j|^2 - |b_j - c_i|^2)`
    Distance,
    /// `p_ij = sigmoid(b_i . c_j - b_j . c_i)`
    Inner,
}

impl BladeChestVariant {
    pub fn name(self) -> &'static str {
        match self {
            BladeChestVariant::Distance => "distance",
            BladeChestVariant::Inner => "inner",
        }
    }
}

/// Blade and chest embeddings in `d` dimensions (quality offsets omitted).
#[derive(Debug, Clone, PartialEq)]
pub struct BladeChest {
    blades: Vec<Vec<f64>>,
    chests: Vec<Vec<f64>>,
    variant: BladeChestVariant,
}

impl BladeChest {
    pub fn new(
        blades: Vec<Vec<f64>>,
        chests: Vec<Vec<f64>>,
        variant: BladeChestVariant,
    ) -> Result<Self> {
        if blades.is_empty() {
            return Err(Error::EmptySubset);
        }
        if blades.len() != chests.len() {
            return Err(Error::DimensionMismatch {
                expected: blades.len(),
                found: chests.len(),
            });
        }
        let d = blades[0].len();
        if d == 0 {
            return Err(Error::InvalidConfig(
                "embedding dimension must be at least 1",
            ));
        }
        for v in blades.iter().chain(&chests) {
            if v.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidConfig("embedding coordinates must be finite"));
            }
        }
        Ok(Self {
            blades,
            chests,
            variant,
        })
    }

    pub fn d(&self) -> usize {
        self.blades[0].len()
    }

    pub fn blades(&self) -> &[Vec<f64>] {
        &self.blades
    }

    pub fn chests(&self) -> &[Vec<f64>] {
        &self.chests
    }

    pub fn variant(&self) -> BladeChestVariant {
        self.variant
    }

    fn logit(&self, i: usize, j: usize) -> f64 {
        let (bi, bj, ci, cj) = (
            &self.blades[i],
            &self.blades[j],
            &self.chests[i],
            &self.chests[j],
        );
        match self.variant {
            BladeChestVariant::Distance => {
                let sq = |a: &[f64], b: &[f64]| -> f64 {
                    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
                };
                sq(bi, cj) - sq(bj, ci)
            }
            BladeChestVariant::Inner => {
                let dot =
                    |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
                dot(bi, cj) - dot(bj, ci)
            }
        }
    }

    pub fn pairwise_matrix(&self) -> PairwiseMatrix {
        let n = self.blades.len();
        let mut p = vec![0.0; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let pij = sigmoid(self.logit(i, j));
                p[i * n + j] = pij;
                p[j * n + i] = 1.0 - pij;
            }
        }
        PairwiseMatrix { n, p }
    }

    /// The PCMC rate matrix `Q = P^T` of this embedding.
    pub fn rate_matrix(&self) -> RateMatrix {
        q_from_pairwise(&self.pairwise_matrix())
    }
}

impl ChoiceModel for BladeChest {
    fn n_items(&self) -> usize {
        self.blades.len()
    }

    fn probabilities(&self, set: &[usize]) -> Result<Distribution> {
        check_subset(self.n_items(), set)?;
        let p = self.pairwise_matrix();
        ctmc::stationary_on(&q_from_pairwise(&p), set)
    }
}

/// Blade-Chest pairwise probability that `i` is chosen over `j`.
pub fn bladechest_pair(bc: &BladeChest, i: usize, j: usize) -> Result<f64> {
    check_subset(bc.n_items(), &[i])?;
    check_subset(bc.n_items(), &[j])?;
    if i == j {
        return Err(Error::SameItem(i));
    }
    Ok(sigmoid(bc.logit(i, j)))
}

fn unpack(n: usize, d: usize, x: &[f64], variant: BladeChestVariant) -> BladeChest {
    let vecs = |offset: usize| -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| x[offset + i * d..offset + (i + 1) * d].to_vec())
            .collect()
    };
    BladeChest {
        blades: vecs(0),
        chests: vecs(n * d),
        variant,
    }
}

/// Fits Blade-Chest embeddings (`2dn` parameters) through the smoothed PCMC
/// likelihood of `Q = P(b, c)^T`, with L-BFGS on forward-difference
/// gradients and `cfg.restarts` seeded starts drawn i.i.d. `N(0, 1/d)`.
pub fn fit_bladechest(
    data: &ChoiceDataset,
    d: usize,
    variant: BladeChestVariant,
    cfg: &FitConfig,
) -> Result<FitReport<BladeChest>> {
    cfg.validate()?;
    if d == 0 {
        return Err(Error::InvalidConfig(
            "embedding dimension must be at least 1",
        ));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.n();
    let t = data::smooth(&data::counts(data), cfg.smoothing_alpha)?;
    let like = SetLikelihood::new(&t);
    let total = like.total();
    let objective = |x: &[f64]| -> f64 {
        let q = unpack(n, d, x, variant).rate_matrix();
        -like.loglik(|i, j| q.get(i, j)) / total
    };
    let opts = OptimOptions {
        max_iters: cfg.max_iters,
        ftol: cfg.ftol,
        pgtol: 1e-8,
        stall_iters: 3,
    };
    let scale = 1.0 / libm::sqrt(d as f64);

    let mut best: Option<crate::optim::OptimResult> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut rng = rng_from_seed(derive_seed(cfg.seed, restart as u64));
        let x0: Vec<f64> = (0..2 * d * n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            })
            .collect();
        let fg = |x: &[f64]| {
            let fx = objective(x);
            (fx, forward_difference(objective, x, fx, cfg.grad_step))
        };
        let Some(result) = lbfgs_minimize(&x0, fg, &opts) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| result.f < b.f) {
            best = Some(result);
        }
    }
    let best = best.ok_or_else(|| Error::OptimizerFailure {
        reason: "Blade-Chest objective not finite at any start".into(),
        best: None,
    })?;
    let model = unpack(n, d, &best.x, variant);
    if !best.f.is_finite() {
        return Err(Error::OptimizerFailure {
            reason: "non-finite Blade-Chest likelihood".into(),
            best: Some(Box::new(FittedModel::BladeChest(model))),
        });
    }
    Ok(FitReport {
        params: model,
        loglik: -best.f * total,
        initial_loglik: -best.f_initial * total,
        iterations: best.iterations,
        converged: best.converged,
        constraint_violation: 0.0,
    })
}
