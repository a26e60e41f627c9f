//! The pairwise choice Markov chain model.
//!
//! Selection probabilities on a set `S` are the stationary masses of the
//! chain obtained by restricting the rate matrix to `S`. Inference maximizes
//! the smoothed log-likelihood over the raw off-diagonal rates subject to
//! `q_ij >= 0` and `q_ij + q_ji >= 1`, with forward-difference gradients and
//! a spectral projected-gradient method. The constraints decouple by
//! unordered pair, so projection is a closed-form two-dimensional problem.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use crate::ctmc::{self, Distribution, RateMatrix, RestrictedGenerator};
use crate::data::{self, ChoiceDataset, CountTables};
use crate::error::{Error, Result};
use crate::model::{self, ChoiceModel, FittedModel, PROB_FLOOR};
use crate::optim::{spg_minimize, OptimOptions};

/// A PCMC model over a canonical rate matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PcmcModel {
    q: RateMatrix,
}

impl PcmcModel {
    /// Rejects rate matrices that violate `q_ij + q_ji >= 1` beyond tolerance.
    pub fn new(q: RateMatrix) -> Result<Self> {
        if !q.is_canonical() {
            return Err(Error::InvalidConfig(
                "rate matrix violates q_ij + q_ji >= 1 (non-canonical)",
            ));
        }
        Ok(Self { q })
    }

    pub fn q(&self) -> &RateMatrix {
        &self.q
    }

    pub fn into_q(self) -> RateMatrix {
        self.q
    }
}

impl ChoiceModel for PcmcModel {
    fn n_items(&self) -> usize {
        self.q.n()
    }

    fn probabilities(&self, set: &[usize]) -> Result<Distribution> {
        choice_probabilities(self, set)
    }
}

/// `p_iS = pi_S(i)` for the chain restricted to `set`.
pub fn choice_probabilities(m: &PcmcModel, set: &[usize]) -> Result<Distribution> {
    ctmc::stationary_on(&m.q, set)
}

/// Unsmoothed log-likelihood of `data`; probabilities are floored at
/// [`PROB_FLOOR`] inside the logarithm.
pub fn log_likelihood(m: &PcmcModel, data: &ChoiceDataset) -> Result<f64> {
    model::log_likelihood(m, data)
}

/// Starting point for inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    /// Every rate 0.5.
    UniformHalf,
    /// `q_ji` set to the Laplace-smoothed share of observations in which `i`
    /// was chosen from a set also containing `j`, so each pair sums to one.
    #[default]
    EmpiricalPairs,
}

/// Settings shared by the likelihood-based fitting routines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub max_iters: usize,
    /// Relative objective decrease below which iterations count as stalled.
    pub ftol: f64,
    /// Forward-difference step, relative to `max(1, |x|)`.
    pub grad_step: f64,
    /// Added to every observed `C_iS` in the objective.
    pub smoothing_alpha: f64,
    pub seed: u64,
    pub init: Init,
    /// Number of starts for the non-convex mixture and embedding fits.
    pub restarts: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iters: 1000,
            ftol: 1e-10,
            grad_step: 1e-6,
            smoothing_alpha: 0.1,
            seed: 0,
            init: Init::EmpiricalPairs,
            restarts: 5,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters < 1 {
            return Err(Error::InvalidConfig("max_iters must be at least 1"));
        }
        if !(self.ftol > 0.0) {
            return Err(Error::InvalidConfig("ftol must be positive"));
        }
        if !(self.grad_step > 0.0) {
            return Err(Error::InvalidConfig("grad_step must be positive"));
        }
        if !(self.smoothing_alpha >= 0.0) || !self.smoothing_alpha.is_finite() {
            return Err(Error::NegativeAlpha(self.smoothing_alpha));
        }
        Ok(())
    }
}

/// Outcome of a likelihood fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitReport<M> {
    pub params: M,
    /// Smoothed log-likelihood at `params`.
    pub loglik: f64,
    /// Smoothed log-likelihood at the starting point.
    pub initial_loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    /// `max(0, 1 - q_ij - q_ji)` over all pairs; zero for unconstrained families.
    pub constraint_violation: f64,
}

/// Position of the ordered pair `(i, j)`, `i != j`, in the parameter vector.
#[inline]
pub(crate) fn param_index(n: usize, i: usize, j: usize) -> usize {
    i * (n - 1) + if j < i { j } else { j - 1 }
}

pub(crate) fn rates_from_params(n: usize, x: &[f64]) -> Vec<f64> {
    let mut rates = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                rates[i * n + j] = x[param_index(n, i, j)];
            }
        }
    }
    rates
}

/// Nearest point of `{(a, b) : a >= 0, b >= 0, a + b >= 1}`.
pub(crate) fn project_pair(a: f64, b: f64) -> (f64, f64) {
    if a >= 0.0 && b >= 0.0 && a + b >= 1.0 {
        return (a, b);
    }
    let dist = |p: (f64, f64)| (p.0 - a) * (p.0 - a) + (p.1 - b) * (p.1 - b);
    // Boundary pieces: the ray a = 0, b >= 1; the segment a + b = 1 with
    // a, b in [0, 1]; the ray b = 0, a >= 1.
    let t = ((a - b + 1.0) / 2.0).clamp(0.0, 1.0);
    let candidates = [(0.0, b.max(1.0)), (t, 1.0 - t), (a.max(1.0), 0.0)];
    let mut best = candidates[0];
    for c in &candidates[1..] {
        if dist(*c) < dist(best) {
            best = *c;
        }
    }
    best
}

pub(crate) fn project_params(n: usize, x: &mut [f64]) {
    for i in 0..n {
        for j in (i + 1)..n {
            let (ij, ji) = (param_index(n, i, j), param_index(n, j, i));
            let (a, b) = project_pair(x[ij], x[ji]);
            x[ij] = a;
            x[ji] = b;
        }
    }
}

/// Per-set decomposition of the negative smoothed log-likelihood.
pub(crate) struct SetLikelihood {
    n: usize,
    sets: Vec<Vec<usize>>,
    counts: Vec<Vec<f64>>,
    total: f64,
}

impl SetLikelihood {
    pub(crate) fn new(t: &CountTables) -> Self {
        let (sets, counts) = t.c_is.iter().map(|(s, c)| (s.clone(), c.clone())).unzip();
        Self {
            n: t.n,
            sets,
            counts,
            total: t.total(),
        }
    }

    pub(crate) fn total(&self) -> f64 {
        self.total
    }

    /// `sum_i C_iS log p_iS` for set `s` under rates given by `rate(i, j)`;
    /// negative infinity when the stationary solve fails.
    pub(crate) fn set_loglik(&self, s: usize, rate: impl Fn(usize, usize) -> f64) -> f64 {
        let g = RestrictedGenerator::from_rates(&self.sets[s], rate);
        match ctmc::stationary(&g) {
            Ok(pi) => pi
                .mass()
                .iter()
                .zip(&self.counts[s])
                .filter(|(_, &c)| c != 0.0)
                .map(|(&p, &c)| c * libm::log(p.max(PROB_FLOOR)))
                .sum(),
            Err(_) => f64::NEG_INFINITY,
        }
    }

    pub(crate) fn loglik(&self, rate: impl Fn(usize, usize) -> f64 + Copy) -> f64 {
        (0..self.sets.len()).map(|s| self.set_loglik(s, rate)).sum()
    }
}

/// Objective in raw rate coordinates with sparse forward differences: a
/// perturbation of `q_ij` only changes sets containing both `i` and `j`.
struct PcmcObjective {
    like: SetLikelihood,
    pair_sets: Vec<Vec<usize>>,
    grad_step: f64,
}

impl PcmcObjective {
    fn new(t: &CountTables, grad_step: f64) -> Self {
        let like = SetLikelihood::new(t);
        let n = like.n;
        let mut pair_sets = vec![Vec::new(); n * n.saturating_sub(1)];
        for (s, set) in like.sets.iter().enumerate() {
            for &i in set {
                for &j in set {
                    if i != j {
                        pair_sets[param_index(n, i, j)].push(s);
                    }
                }
            }
        }
        Self {
            like,
            pair_sets,
            grad_step,
        }
    }

    fn per_set(&self, x: &[f64]) -> Vec<f64> {
        let n = self.like.n;
        (0..self.like.sets.len())
            .map(|s| self.like.set_loglik(s, |i, j| x[param_index(n, i, j)]))
            .collect()
    }

    /// Negative log-likelihood per unit count.
    fn value(&self, x: &[f64]) -> f64 {
        -self.per_set(x).iter().sum::<f64>() / self.like.total
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let n = self.like.n;
        let base = self.per_set(x);
        let mut probe = x.to_vec();
        let mut grad = vec![0.0; x.len()];
        for (p, sets) in self.pair_sets.iter().enumerate() {
            if sets.is_empty() {
                continue;
            }
            let h = self.grad_step * x[p].abs().max(1.0);
            probe[p] = x[p] + h;
            let delta: f64 = sets
                .iter()
                .map(|&s| self.like.set_loglik(s, |i, j| probe[param_index(n, i, j)]) - base[s])
                .sum();
            probe[p] = x[p];
            grad[p] = -delta / (h * self.like.total);
        }
        grad
    }
}

fn initial_params(n: usize, t: &CountTables, init: Init) -> Vec<f64> {
    let mut x = vec![0.5; n * n.saturating_sub(1)];
    if init == Init::EmpiricalPairs {
        let mut wins = vec![0.0; n * n];
        for (set, c) in &t.c_is {
            for (a, &i) in set.iter().enumerate() {
                for &j in set.iter().filter(|&&j| j != i) {
                    wins[i * n + j] += c[a];
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let p_ij = (wins[i * n + j] + 1.0) / (wins[i * n + j] + wins[j * n + i] + 2.0);
                    x[param_index(n, j, i)] = p_ij;
                }
            }
        }
    }
    x
}

/// Constrained maximum-likelihood fit of a PCMC model.
///
/// Alternatives that never appear in an observed set keep their initial
/// rates; they cannot influence the likelihood.
pub fn fit(data: &ChoiceDataset, cfg: &FitConfig) -> Result<FitReport<PcmcModel>> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = data.n();
    if n < 2 {
        return Err(Error::InvalidConfig("need at least two alternatives"));
    }
    let unused = data.unused_items();
    if !unused.is_empty() {
        log::warn!("alternatives {unused:?} never appear in a choice set and are left at their initial rates");
    }
    let t = data::smooth(&data::counts(data), cfg.smoothing_alpha)?;
    fit_counts(n, &t, cfg)
}

/// Fit from (already smoothed) count tables.
pub fn fit_counts(n: usize, t: &CountTables, cfg: &FitConfig) -> Result<FitReport<PcmcModel>> {
    let objective = PcmcObjective::new(t, cfg.grad_step);
    let x0 = initial_params(n, t, cfg.init);
    let opts = OptimOptions {
        max_iters: cfg.max_iters,
        ftol: cfg.ftol,
        pgtol: 1e-9,
        stall_iters: 5,
    };
    let result = spg_minimize(
        &x0,
        |x| objective.value(x),
        |x, _| objective.gradient(x),
        |x| project_params(n, x),
        &opts,
    )
    .ok_or_else(|| Error::OptimizerFailure {
        reason: "objective is not finite at the starting point".into(),
        best: None,
    })?;

    let q = RateMatrix::new(n, rates_from_params(n, &result.x))?;
    let constraint_violation = q.constraint_violation();
    let total = objective.like.total();
    let model = PcmcModel { q };
    if !result.f.is_finite() || constraint_violation > 1e-6 {
        return Err(Error::OptimizerFailure {
            reason: "optimizer left the feasible region".into(),
            best: Some(Box::new(FittedModel::Pcmc(model))),
        });
    }
    Ok(FitReport {
        params: model,
        loglik: -result.f * total,
        initial_loglik: -result.f_initial * total,
        iterations: result.iterations,
        converged: result.converged,
        constraint_violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{all_subsets_of_size, gen_random_q, sample};
    use crate::param::q_from_btl;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rps(alpha: f64) -> PcmcModel {
        let q = RateMatrix::new(
            3,
            vec![
                0.0,
                1.0 - alpha,
                alpha,
                alpha,
                0.0,
                1.0 - alpha,
                1.0 - alpha,
                alpha,
                0.0,
            ],
        )
        .unwrap();
        PcmcModel::new(q).unwrap()
    }

    #[test]
    fn choice_probability_examples() {
        let m = rps(0.9);
        // Two-state chain: p_i{i,j} = q_ji / (q_ij + q_ji), so r beats p and s beats r.
        let p = choice_probabilities(&m, &[0, 1]).unwrap();
        assert!((p.prob(0) - 0.9).abs() < 1e-12);
        let p = choice_probabilities(&m, &[0, 2]).unwrap();
        assert!((p.prob(2) - 0.9).abs() < 1e-12);

        let btl = PcmcModel::new(q_from_btl(&[2.0, 1.0]).unwrap()).unwrap();
        let p = choice_probabilities(&btl, &[0, 1]).unwrap();
        assert!((p.prob(0) - 2.0 / 3.0).abs() < 1e-12 && (p.prob(1) - 1.0 / 3.0).abs() < 1e-12);

        assert_eq!(choice_probabilities(&m, &[1]).unwrap().mass(), &[1.0]);
    }

    #[test]
    fn non_canonical_rejected() {
        let q = RateMatrix::new(2, vec![0.0, 0.2, 0.3, 0.0]).unwrap();
        assert!(PcmcModel::new(q).is_err());
    }

    #[test]
    fn log_likelihood_examples() {
        // q_10 / (q_01 + q_10) = 0.75
        let m = PcmcModel::new(RateMatrix::new(2, vec![0.0, 0.25, 0.75, 0.0]).unwrap()).unwrap();
        let mut obs = vec![(0usize, vec![0usize, 1]); 3];
        obs.push((1, vec![0, 1]));
        let d = ChoiceDataset::from_pairs(2, obs).unwrap();
        let want = 3.0 * libm::log(0.75) + libm::log(0.25);
        assert!((log_likelihood(&m, &d).unwrap() - want).abs() < 1e-12);
        assert!((want + 2.2493).abs() < 1e-4);

        let d = ChoiceDataset::from_pairs(
            3,
            [(0, vec![0, 1, 2]), (1, vec![0, 1, 2]), (2, vec![0, 1, 2])],
        )
        .unwrap();
        let ll = log_likelihood(&rps(0.9), &d).unwrap();
        assert!((ll - 3.0 * libm::log(1.0 / 3.0)).abs() < 1e-12);
        assert!((ll + 3.2958).abs() < 1e-4);
    }

    #[test]
    fn log_likelihood_of_certain_choices_is_zero() {
        // q_10 = 1, q_01 = 0: item 0 absorbs all mass on {0, 1}.
        let m = PcmcModel::new(RateMatrix::new(2, vec![0.0, 0.0, 1.0, 0.0]).unwrap()).unwrap();
        let d = ChoiceDataset::from_pairs(2, [(0, vec![0, 1]), (0, vec![0, 1])]).unwrap();
        assert_eq!(log_likelihood(&m, &d).unwrap(), 0.0);
    }

    #[test]
    fn empty_dataset_rejected() {
        let d = ChoiceDataset::new(2, Vec::new()).unwrap();
        assert_eq!(log_likelihood(&rps(0.6), &d), Err(Error::EmptyDataset));
        assert_eq!(
            fit(&d, &FitConfig::default()).unwrap_err(),
            Error::EmptyDataset
        );
    }

    #[test]
    fn projection_lands_on_feasible_nearest_point() {
        assert_eq!(project_pair(0.3, 0.9), (0.3, 0.9));
        assert_eq!(project_pair(0.2, 0.2), (0.5, 0.5));
        assert_eq!(project_pair(-2.0, 1.5), (0.0, 1.5));
        assert_eq!(project_pair(3.0, -1.0), (3.0, 0.0));
        assert_eq!(project_pair(-1.0, -1.0), (0.5, 0.5));
        let (a, b) = project_pair(-0.5, 0.8);
        assert_eq!((a, b), (0.0, 1.0));
    }

    #[test]
    fn param_index_is_a_bijection() {
        let n = 5;
        let mut seen = vec![false; n * (n - 1)];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let p = param_index(n, i, j);
                    assert!(!seen[p]);
                    seen[p] = true;
                }
            }
        }
        assert!(seen.into_iter().all(|s| s));
    }

    #[test]
    fn finite_difference_gradient_matches_centered_oracle() {
        let truth = gen_random_q(4, 3).q;
        let sets: Vec<Vec<usize>> = all_subsets_of_size(4, 2)
            .into_iter()
            .chain(all_subsets_of_size(4, 3))
            .chain([vec![0, 1, 2, 3]])
            .collect();
        let d = sample(&PcmcModel::new(truth).unwrap(), &sets, 2_000, 17).unwrap();
        let t = data::smooth(&data::counts(&d), 0.1).unwrap();
        let h = 1e-6;
        let obj = PcmcObjective::new(&t, h);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..20 {
            let mut x: Vec<f64> = (0..12).map(|_| 0.1 + 2.0 * rng.gen::<f64>()).collect();
            project_params(4, &mut x);
            let g = obj.gradient(&x);
            let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            for p in 0..x.len() {
                // Centered oracle over the full objective at half the step.
                let hp = 0.5 * h * x[p].abs().max(1.0);
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[p] += hp;
                xm[p] -= hp;
                let oracle = (obj.value(&xp) - obj.value(&xm)) / (2.0 * hp);
                let err = (g[p] - oracle).abs() / oracle.abs().max(1e-3 * scale);
                assert!(err < 1e-3, "coord {p}: {} vs {oracle}", g[p]);
            }
        }
    }

    #[test]
    fn fit_symmetric_pair() {
        let mut obs = vec![(0usize, vec![0usize, 1]); 500];
        obs.extend(vec![(1usize, vec![0usize, 1]); 500]);
        let d = ChoiceDataset::from_pairs(2, obs).unwrap();
        let r = fit(&d, &FitConfig::default()).unwrap();
        let p = choice_probabilities(&r.params, &[0, 1]).unwrap();
        assert!((p.prob(0) - 0.5).abs() < 0.01);
        assert!(r.constraint_violation <= 1e-6);
    }

    #[test]
    fn fit_recovers_rps() {
        let truth = rps(0.7);
        let sets = vec![vec![0, 1], vec![1, 2], vec![0, 2], vec![0, 1, 2]];
        let d = sample(&truth, &sets, 50_000, 4).unwrap();
        let r = fit(&d, &FitConfig::default()).unwrap();
        assert!(r.loglik >= r.initial_loglik);
        assert!(r.constraint_violation <= 1e-6);
        for s in &sets {
            let got = choice_probabilities(&r.params, s).unwrap();
            let want = choice_probabilities(&truth, s).unwrap();
            assert!(
                got.l1_distance(&want) < 0.02,
                "{s:?}: {:?} vs {:?}",
                got.mass(),
                want.mass()
            );
        }
    }

    #[test]
    fn fit_recovers_btl_triple() {
        let truth = PcmcModel::new(q_from_btl(&[0.6, 0.3, 0.1]).unwrap()).unwrap();
        let d = sample(&truth, &[vec![0, 1, 2]], 50_000, 6).unwrap();
        let r = fit(&d, &FitConfig::default()).unwrap();
        let got = choice_probabilities(&r.params, &[0, 1, 2]).unwrap();
        let l1: f64 = got
            .mass()
            .iter()
            .zip([0.6, 0.3, 0.1])
            .map(|(a, b)| (a - b).abs())
            .sum();
        assert!(l1 < 0.02, "{:?}", got.mass());
    }

    #[test]
    fn fit_uniform_init_also_feasible() {
        let truth = PcmcModel::new(gen_random_q(4, 8).q).unwrap();
        let sets = all_subsets_of_size(4, 3);
        let d = sample(&truth, &sets, 3_000, 1).unwrap();
        let cfg = FitConfig {
            init: Init::UniformHalf,
            ..FitConfig::default()
        };
        let r = fit(&d, &cfg).unwrap();
        assert!(r.params.q().is_canonical());
        assert!(r.loglik >= r.initial_loglik);
    }
}
