//! Luce-family baselines: BTL pairwise probabilities, the multinomial logit
//! (MNL), and finite mixtures of MNL components (MMNL).
//!
//! MNL estimation uses iterative Luce spectral ranking: the estimate is the
//! stationary distribution of a Markov chain whose rate from `j` to `i`
//! accumulates, over observations where `i` was chosen from a set `S`
//! containing `j`, the weight `1 / sum_{k in S} gamma_k`. The fixed point of
//! that map satisfies the MNL likelihood equations.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution as _, StandardNormal};

use crate::ctmc::{self, check_subset, Distribution, RateMatrix};
use crate::data::{self, derive_seed, rng_from_seed, ChoiceDataset, CountTables};
use crate::error::{Error, Result};
use crate::model::{log_likelihood_counts, ChoiceModel, FittedModel};
use crate::optim::{lbfgs_minimize, OptimOptions};
use crate::pcmc::{FitConfig, FitReport};

/// Multinomial logit model with qualities normalized to sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct MnlModel {
    gamma: Vec<f64>,
}

impl MnlModel {
    /// Rejects non-positive or non-finite qualities, then normalizes.
    /// Vectors already summing to one within rounding are kept as given, so
    /// saved models reload bit for bit.
    pub fn new(gamma: Vec<f64>) -> Result<Self> {
        if gamma.is_empty() {
            return Err(Error::EmptySubset);
        }
        for (index, &value) in gamma.iter().enumerate() {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::NonpositiveGamma { index, value });
            }
        }
        let total: f64 = gamma.iter().sum();
        if (total - 1.0).abs() <= 4.0 * f64::EPSILON * gamma.len() as f64 {
            return Ok(Self { gamma });
        }
        Ok(Self {
            gamma: gamma.into_iter().map(|g| g / total).collect(),
        })
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }
}

impl ChoiceModel for MnlModel {
    fn n_items(&self) -> usize {
        self.gamma.len()
    }

    fn probabilities(&self, set: &[usize]) -> Result<Distribution> {
        mnl_probabilities(self, set)
    }
}

/// BTL probability that `i` is chosen over `j`.
pub fn btl_pair(m: &MnlModel, i: usize, j: usize) -> Result<f64> {
    check_subset(m.n_items(), &[i])?;
    check_subset(m.n_items(), &[j])?;
    if i == j {
        return Err(Error::SameItem(i));
    }
    Ok(m.gamma[i] / (m.gamma[i] + m.gamma[j]))
}

/// `p_iS = gamma_i / sum_{j in S} gamma_j`.
pub fn mnl_probabilities(m: &MnlModel, set: &[usize]) -> Result<Distribution> {
    check_subset(m.n_items(), set)?;
    let weights = set.iter().map(|&i| m.gamma[i]).collect();
    Ok(Distribution::from_weights(set.to_vec(), weights))
}

/// Finite mixture of MNL components.
#[derive(Debug, Clone, PartialEq)]
pub struct MmnlModel {
    components: Vec<MnlModel>,
    weights: Vec<f64>,
}

impl MmnlModel {
    pub fn new(components: Vec<MnlModel>, weights: Vec<f64>) -> Result<Self> {
        if components.is_empty() || components.len() != weights.len() {
            return Err(Error::InvalidWeights);
        }
        let n = components[0].n_items();
        if let Some(c) = components.iter().find(|c| c.n_items() != n) {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.n_items(),
            });
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidWeights);
        }
        Ok(Self {
            components,
            weights,
        })
    }

    pub fn components(&self) -> &[MnlModel] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }
}

impl ChoiceModel for MmnlModel {
    fn n_items(&self) -> usize {
        self.components[0].n_items()
    }

    fn probabilities(&self, set: &[usize]) -> Result<Distribution> {
        mmnl_probabilities(self, set)
    }
}

/// Mixture-weighted average of the component distributions on `set`.
pub fn mmnl_probabilities(m: &MmnlModel, set: &[usize]) -> Result<Distribution> {
    check_subset(m.n_items(), set)?;
    let mut mass = vec![0.0; set.len()];
    for (comp, &w) in m.components.iter().zip(&m.weights) {
        let p = mnl_probabilities(comp, set)?;
        for (acc, v) in mass.iter_mut().zip(p.mass()) {
            *acc += w * v;
        }
    }
    Ok(Distribution::from_weights(set.to_vec(), mass))
}

/// Iteration cap for spectral MNL fitting.
pub const MNL_MAX_ITERS: usize = 10_000;

/// Maximum-likelihood MNL fit of unsmoothed data by iterative Luce
/// spectral ranking, iterated until successive estimates differ by less
/// than `tol` in L1.
pub fn fit_mnl(data: &ChoiceDataset, tol: f64) -> Result<MnlModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    fit_mnl_counts(&data::counts(data), tol, MNL_MAX_ITERS)
}

/// MNL fit with `alpha` added to every observed count.
pub fn fit_mnl_smoothed(data: &ChoiceDataset, tol: f64, alpha: f64) -> Result<MnlModel> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    fit_mnl_counts(
        &data::smooth(&data::counts(data), alpha)?,
        tol,
        MNL_MAX_ITERS,
    )
}

/// The data-weighted chain whose stationary distribution is the next
/// spectral iterate.
pub fn lsr_chain(t: &CountTables, gamma: &[f64]) -> RateMatrix {
    let n = t.n;
    let mut rates = vec![0.0; n * n];
    for (set, c) in &t.c_is {
        let denom: f64 = set.iter().map(|&k| gamma[k]).sum();
        for (a, &i) in set.iter().enumerate() {
            if c[a] == 0.0 {
                continue;
            }
            let w = c[a] / denom;
            for &j in set.iter().filter(|&&j| j != i) {
                rates[j * n + i] += w;
            }
        }
    }
    RateMatrix::new(n, rates).expect("counts and qualities are nonnegative")
}

/// Spectral MNL fit from count tables. Alternatives that never appear in
/// any observed set are given the mean quality of the others; they do not
/// affect the likelihood.
pub fn fit_mnl_counts(t: &CountTables, tol: f64, max_iters: usize) -> Result<MnlModel> {
    if t.c_is.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = t.n;
    let mut used = vec![false; n];
    for set in t.c_is.keys() {
        for &i in set {
            used[i] = true;
        }
    }
    let active: Vec<usize> = (0..n).filter(|&i| used[i]).collect();
    if active.len() < n {
        log::warn!(
            "{} alternatives never appear in a choice set",
            n - active.len()
        );
    }

    let mut gamma = vec![0.0; n];
    for &i in &active {
        gamma[i] = 1.0 / active.len() as f64;
    }
    for iteration in 0..max_iters {
        let chain = lsr_chain(t, &gamma);
        let g = ctmc::restrict(&chain, &active)?;
        let classes = ctmc::closed_classes(&g);
        if classes.len() != 1 || classes[0].len() != active.len() {
            return Err(Error::NotConnected);
        }
        let pi = ctmc::stationary(&g)?;
        let mut next = vec![0.0; n];
        for (&i, &p) in pi.support().iter().zip(pi.mass()) {
            next[i] = p;
        }
        let diff: f64 = next.iter().zip(&gamma).map(|(a, b)| (a - b).abs()).sum();
        gamma = next;
        if diff < tol {
            log::debug!("spectral MNL converged after {} iterations", iteration + 1);
            return finish_gamma(gamma, &active);
        }
    }
    Err(Error::NoConvergence {
        iterations: max_iters,
    })
}

fn finish_gamma(mut gamma: Vec<f64>, active: &[usize]) -> Result<MnlModel> {
    let mean = active.iter().map(|&i| gamma[i]).sum::<f64>() / active.len() as f64;
    for g in gamma.iter_mut() {
        if *g <= 0.0 {
            *g = mean;
        }
    }
    MnlModel::new(gamma)
}

/// Smallest `k` for which a `k`-component mixture (`k(n+1) - 1` free
/// parameters) has strictly more parameters than a general PCMC rate
/// matrix (`n(n-1)`).
pub fn default_mmnl_k(n: usize) -> usize {
    let target = n * n.saturating_sub(1);
    let mut k = 1;
    while k * (n + 1) - 1 <= target {
        k += 1;
    }
    k
}

/// Mixture negative log-likelihood per unit count and its gradient in the
/// unconstrained coordinates `[eta_1..eta_k, theta_{1,*}, .., theta_{k,*}]`
/// (softmax weights, log-qualities).
struct MixtureObjective<'a> {
    t: &'a CountTables,
    n: usize,
    k: usize,
    total: f64,
}

fn softmax_in_place(v: &mut [f64]) {
    let max = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut s = 0.0;
    for x in v.iter_mut() {
        *x = libm::exp(*x - max);
        s += *x;
    }
    for x in v.iter_mut() {
        *x /= s;
    }
}

impl MixtureObjective<'_> {
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (n, k) = (self.n, self.k);
        let mut w = x[..k].to_vec();
        softmax_in_place(&mut w);
        let mut grad = vec![0.0; x.len()];
        let mut f = 0.0;
        let mut comp = vec![Vec::new(); k];
        for (set, counts) in &self.t.c_is {
            for (c, pc) in comp.iter_mut().enumerate() {
                let theta = &x[k + c * n..k + (c + 1) * n];
                *pc = set.iter().map(|&i| theta[i]).collect();
                softmax_in_place(pc);
            }
            for (a, &count) in counts.iter().enumerate() {
                if count == 0.0 {
                    continue;
                }
                let p: f64 = (0..k).map(|c| w[c] * comp[c][a]).sum();
                let p = p.max(f64::MIN_POSITIVE);
                f -= count * libm::log(p);
                for c in 0..k {
                    let r = w[c] * comp[c][a] / p;
                    // d log p / d eta_c = w_c (p_c / p - 1)
                    grad[c] -= count * (r - w[c]);
                    let base = k + c * n;
                    for (b, &m) in set.iter().enumerate() {
                        let indicator = if b == a { 1.0 } else { 0.0 };
                        grad[base + m] -= count * r * (indicator - comp[c][b]);
                    }
                }
            }
        }
        for g in grad.iter_mut() {
            *g /= self.total;
        }
        (f / self.total, grad)
    }

    fn model(&self, x: &[f64]) -> Result<MmnlModel> {
        let (n, k) = (self.n, self.k);
        let mut w = x[..k].to_vec();
        softmax_in_place(&mut w);
        let components = (0..k)
            .map(|c| {
                let mut g = x[k + c * n..k + (c + 1) * n].to_vec();
                softmax_in_place(&mut g);
                // Keep qualities strictly positive after extreme logits.
                MnlModel::new(g.into_iter().map(|v| v.max(1e-300)).collect())
            })
            .collect::<Result<Vec<_>>>()?;
        let total: f64 = w.iter().sum();
        MmnlModel::new(components, w.into_iter().map(|v| v / total).collect())
    }
}

/// Fits a `k`-component mixture by L-BFGS on the smoothed likelihood over
/// softmax weights and log-qualities.
///
/// The first start places every component at the spectral MNL estimate, so
/// the result is never worse than the single-component fit; the remaining
/// `cfg.restarts - 1` starts perturb that point with seeded Gaussian noise.
pub fn fit_mmnl(data: &ChoiceDataset, k: usize, cfg: &FitConfig) -> Result<FitReport<MmnlModel>> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidConfig("mixture needs at least one component"));
    }
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.n();
    let t = data::smooth(&data::counts(data), cfg.smoothing_alpha)?;
    let objective = MixtureObjective {
        t: &t,
        n,
        k,
        total: t.total(),
    };

    let base: Vec<f64> = match fit_mnl_counts(&t, 1e-10, MNL_MAX_ITERS) {
        Ok(m) => m.gamma().iter().map(|&g| libm::log(g)).collect(),
        Err(e) => {
            log::warn!("spectral MNL start unavailable ({e}); starting from uniform qualities");
            vec![0.0; n]
        }
    };
    let opts = OptimOptions {
        max_iters: cfg.max_iters,
        ftol: cfg.ftol,
        pgtol: 1e-9,
        stall_iters: 3,
    };

    let mut best: Option<crate::optim::OptimResult> = None;
    for restart in 0..cfg.restarts.max(1) {
        let mut x0 = vec![0.0; k];
        let mut rng = rng_from_seed(derive_seed(cfg.seed, restart as u64));
        for _ in 0..k {
            for &b in &base {
                let noise: f64 = if restart == 0 {
                    0.0
                } else {
                    StandardNormal.sample(&mut rng)
                };
                x0.push(b + noise);
            }
        }
        let Some(result) = lbfgs_minimize(&x0, |x| objective.eval(x), &opts) else {
            continue;
        };
        if best.as_ref().is_none_or(|b| result.f < b.f) {
            best = Some(result);
        }
    }
    let best = best.ok_or_else(|| Error::OptimizerFailure {
        reason: "mixture objective not finite at any start".into(),
        best: None,
    })?;
    let model = objective.model(&best.x)?;
    let loglik = log_likelihood_counts(&model, &t)?;
    if !loglik.is_finite() {
        return Err(Error::OptimizerFailure {
            reason: "non-finite mixture likelihood".into(),
            best: Some(alloc::boxed::Box::new(FittedModel::Mmnl(model))),
        });
    }
    Ok(FitReport {
        params: model,
        loglik,
        initial_loglik: -best.f_initial * t.total(),
        iterations: best.iterations,
        converged: best.converged,
        constraint_violation: 0.0,
    })
}
