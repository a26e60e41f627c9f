//! The shared choice-model interface and likelihood evaluation.

use crate::ctmc::Distribution;
use crate::data::{ChoiceDataset, CountTables};
use crate::error::{Error, Result};
use crate::luce::{MmnlModel, MnlModel};
use crate::param::BladeChest;
use crate::pcmc::PcmcModel;

/// Probabilities below this floor are clamped inside the logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

/// Anything that assigns a probability distribution to each choice set.
pub trait ChoiceModel {
    /// Size of the universe of alternatives.
    fn n_items(&self) -> usize;

    /// Selection probabilities on `set`; the support follows the order of `set`.
    fn probabilities(&self, set: &[usize]) -> Result<Distribution>;
}

impl<M: ChoiceModel + ?Sized> ChoiceModel for &M {
    fn n_items(&self) -> usize {
        (**self).n_items()
    }

    fn probabilities(&self, set: &[usize]) -> Result<Distribution> {
        (**self).probabilities(set)
    }
}

/// `sum_S sum_i C_iS log max(p_iS, PROB_FLOOR)` over the observed sets.
pub fn log_likelihood_counts<M: ChoiceModel + ?Sized>(m: &M, t: &CountTables) -> Result<f64> {
    if t.c_is.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut total = 0.0;
    for (set, c) in &t.c_is {
        let dist = m.probabilities(set)?;
        for (&p, &count) in dist.mass().iter().zip(c) {
            if count != 0.0 {
                total += count * libm::log(p.max(PROB_FLOOR));
            }
        }
    }
    Ok(total)
}

/// Unsmoothed log-likelihood of a dataset.
pub fn log_likelihood<M: ChoiceModel + ?Sized>(m: &M, data: &ChoiceDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    log_likelihood_counts(m, &crate::data::counts(data))
}

/// Any of the fitted model families.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedModel {
    Pcmc(PcmcModel),
    Mnl(MnlModel),
    Mmnl(MmnlModel),
    BladeChest(BladeChest),
}

impl FittedModel {
    pub fn family(&self) -> &'static str {
        match self {
            FittedModel::Pcmc(_) => "pcmc",
            FittedModel::Mnl(_) => "mnl",
            FittedModel::Mmnl(_) => "mmnl",
            FittedModel::BladeChest(_) => "bladechest",
        }
    }
}

impl ChoiceModel for FittedModel {
    fn n_items(&self) -> usize {
        match self {
            FittedModel::Pcmc(m) => m.n_items(),
            FittedModel::Mnl(m) => m.n_items(),
            FittedModel::Mmnl(m) => m.n_items(),
            FittedModel::BladeChest(m) => m.n_items(),
        }
    }

    fn probabilities(&self, set: &[usize]) -> Result<Distribution> {
        match self {
            FittedModel::Pcmc(m) => m.probabilities(set),
            FittedModel::Mnl(m) => m.probabilities(set),
            FittedModel::Mmnl(m) => m.probabilities(set),
            FittedModel::BladeChest(m) => m.probabilities(set),
        }
    }
}
