//! Prediction error against held-out data and the learning-curve harness.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::ctmc::{check_subset, Distribution};
use crate::data::{self, derive_seed, ChoiceDataset, CountTables};
use crate::error::{Error, Result};
use crate::luce::{default_mmnl_k, fit_mmnl, fit_mnl_smoothed};
use crate::model::{ChoiceModel, FittedModel};
use crate::param::{fit_bladechest, BladeChestVariant};
use crate::pcmc::{self, FitConfig};

/// Convergence tolerance used for MNL fits inside the harness.
pub const MNL_TOL: f64 = 1e-10;

fn sorted(set: &[usize]) -> Vec<usize> {
    let mut key = set.to_vec();
    key.sort_unstable();
    key
}

fn empirical_from_counts(t: &CountTables, set: &[usize]) -> Result<Distribution> {
    let key = sorted(set);
    let c = t.c_is.get(&key).ok_or(Error::UnseenSet)?;
    let total = t.c_s[&key];
    let mass = set
        .iter()
        .map(|i| c[key.binary_search(i).expect("same members")] / total)
        .collect();
    Distribution::new(set.to_vec(), mass)
}

/// Observed choice frequencies on `set` in `test`.
pub fn empirical_distribution(test: &ChoiceDataset, set: &[usize]) -> Result<Distribution> {
    check_subset(test.n(), set)?;
    empirical_from_counts(&data::counts(test), set)
}

/// Choice frequencies of a dataset, answering only for sets it contains.
#[derive(Debug, Clone)]
pub struct EmpiricalModel {
    counts: CountTables,
}

impl EmpiricalModel {
    pub fn new(d: &ChoiceDataset) -> Self {
        Self {
            counts: data::counts(d),
        }
    }
}

impl ChoiceModel for EmpiricalModel {
    fn n_items(&self) -> usize {
        self.counts.n
    }

    fn probabilities(&self, set: &[usize]) -> Result<Distribution> {
        check_subset(self.counts.n, set)?;
        empirical_from_counts(&self.counts, set)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    /// Mean over test observations of the L1 distance on their set.
    pub error: f64,
    pub per_set_errors: BTreeMap<Vec<usize>, f64>,
    pub n_test: usize,
}

/// `(1/|T|) sum_{(i,S) in T} sum_{j in S} |p_jS(m) - p~_jS(T)|`.
pub fn prediction_error<M: ChoiceModel + ?Sized>(
    m: &M,
    test: &ChoiceDataset,
) -> Result<ErrorReport> {
    if test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let t = data::counts(test);
    let mut per_set_errors = BTreeMap::new();
    let mut weighted = 0.0;
    for (set, c) in &t.c_is {
        let c_s = t.c_s[set];
        let p = m.probabilities(set)?;
        let l1: f64 = p
            .mass()
            .iter()
            .zip(c)
            .map(|(&model, &count)| (model - count / c_s).abs())
            .sum();
        weighted += c_s * l1;
        per_set_errors.insert(set.clone(), l1);
    }
    Ok(ErrorReport {
        error: weighted / test.len() as f64,
        per_set_errors,
        n_test: test.len(),
    })
}

/// A model family and its structural hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FitSpec {
    Pcmc,
    Mnl,
    /// `None` picks [`default_mmnl_k`].
    Mmnl {
        k: Option<usize>,
    },
    BladeChest {
        d: usize,
        variant: BladeChestVariant,
    },
}

impl FitSpec {
    pub fn name(&self) -> &'static str {
        match self {
            FitSpec::Pcmc => "pcmc",
            FitSpec::Mnl => "mnl",
            FitSpec::Mmnl { .. } => "mmnl",
            FitSpec::BladeChest { .. } => "bladechest",
        }
    }
}

/// Fits one model family; every family uses `cfg.smoothing_alpha`.
pub fn fit_model(spec: FitSpec, d: &ChoiceDataset, cfg: &FitConfig) -> Result<FittedModel> {
    Ok(match spec {
        FitSpec::Pcmc => FittedModel::Pcmc(pcmc::fit(d, cfg)?.params),
        FitSpec::Mnl => FittedModel::Mnl(fit_mnl_smoothed(d, MNL_TOL, cfg.smoothing_alpha)?),
        FitSpec::Mmnl { k } => {
            let k = k.unwrap_or_else(|| default_mmnl_k(d.n()));
            FittedModel::Mmnl(fit_mmnl(d, k, cfg)?.params)
        }
        FitSpec::BladeChest { d: dim, variant } => {
            FittedModel::BladeChest(fit_bladechest(d, dim, variant, cfg)?.params)
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveConfig {
    /// Shares of the training split used for fitting, each in `(0, 1]`.
    pub fractions: Vec<f64>,
    pub permutations: usize,
    pub seed: u64,
    pub train_fraction: f64,
    pub fit: FitConfig,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self {
            fractions: vec![0.2, 0.4, 0.6, 0.8, 1.0],
            permutations: 10,
            seed: 0,
            train_fraction: 0.75,
            fit: FitConfig::default(),
        }
    }
}

/// Errors indexed `[model][fraction]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub models: Vec<String>,
    pub fractions: Vec<f64>,
    /// Mean over permutations whose fit succeeded; NaN when none did.
    pub mean_errors: Vec<Vec<f64>>,
    /// Sample standard deviation; zero with a single success.
    pub std_errors: Vec<Vec<f64>>,
    /// Permutations whose fit or evaluation failed.
    pub failures: Vec<Vec<usize>>,
    pub permutations: usize,
}

/// For each permutation: split the data, fit every model on growing prefixes
/// of the training part, and score it on the test part. Permutation `p` uses
/// seed `derive_seed(cfg.seed, p)` for both the split and the fits.
pub fn learning_curve(
    d: &ChoiceDataset,
    specs: &[FitSpec],
    cfg: &CurveConfig,
) -> Result<LearningCurve> {
    if cfg.permutations == 0 {
        return Err(Error::InvalidConfig("permutations must be at least 1"));
    }
    if cfg.fractions.is_empty() || cfg.fractions.iter().any(|&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::InvalidConfig("fractions must lie in (0, 1]"));
    }
    cfg.fit.validate()?;
    let (m, f) = (specs.len(), cfg.fractions.len());
    let mut samples = vec![vec![Vec::with_capacity(cfg.permutations); f]; m];
    let mut failures = vec![vec![0usize; f]; m];

    for p in 0..cfg.permutations {
        let seed = derive_seed(cfg.seed, p as u64);
        let (train, test) = data::split(d, cfg.train_fraction, seed)?;
        let fit_cfg = FitConfig { seed, ..cfg.fit };
        for (fi, &fraction) in cfg.fractions.iter().enumerate() {
            let size = ((fraction * train.len() as f64) as usize).clamp(1, train.len());
            let subset = train.prefix(size);
            for (mi, &spec) in specs.iter().enumerate() {
                let outcome = fit_model(spec, &subset, &fit_cfg)
                    .and_then(|model| prediction_error(&model, &test));
                match outcome {
                    Ok(report) => samples[mi][fi].push(report.error),
                    Err(e) => {
                        log::warn!(
                            "{} fit failed (permutation {p}, fraction {fraction}): {e}",
                            spec.name()
                        );
                        failures[mi][fi] += 1;
                    }
                }
            }
        }
    }

    let stats = |xs: &[f64]| -> (f64, f64) {
        if xs.is_empty() {
            return (f64::NAN, f64::NAN);
        }
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        if xs.len() < 2 {
            return (mean, 0.0);
        }
        let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64;
        (mean, libm::sqrt(var))
    };
    let mut mean_errors = vec![vec![0.0; f]; m];
    let mut std_errors = vec![vec![0.0; f]; m];
    for mi in 0..m {
        for fi in 0..f {
            (mean_errors[mi][fi], std_errors[mi][fi]) = stats(&samples[mi][fi]);
        }
    }
    Ok(LearningCurve {
        models: specs.iter().map(|s| String::from(s.name())).collect(),
        fractions: cfg.fractions.clone(),
        mean_errors,
        std_errors,
        failures,
        permutations: cfg.permutations,
    })
}
