//! Choice datasets, count statistics, smoothing, splitting, and sampling.
//!
//! All randomness comes from [`ChaCha8Rng`](rand_chacha::ChaCha8Rng)
//! (`rand_chacha` 0.3) seeded with [`SeedableRng::seed_from_u64`], so a
//! seed reproduces the same draws on every platform.

mod synth;

pub use synth::{
    all_subsets_of_size, gen_bladechest_circle, gen_contractible_pair, gen_mnl_simplex,
    gen_random_q, random_tournament, random_triplets, RandomQ,
};

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ctmc::Distribution;
use crate::error::{Error, Result};
use crate::model::ChoiceModel;

/// The generator used for every seeded pipeline.
pub type SeededRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SeededRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Derives an independent seed for sub-task `index` of a run seeded by `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index.wrapping_add(0x9E37_79B9_7F4A_7C15)))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// One observed choice: `chosen` was selected from `set` (sorted ascending).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Observation {
    pub chosen: usize,
    pub set: Vec<usize>,
}

impl Observation {
    /// Sorts `set` and checks it has at least two distinct members below `n`
    /// that include `chosen`.
    pub fn new(n: usize, chosen: usize, mut set: Vec<usize>) -> Result<Self> {
        set.sort_unstable();
        if set.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidSet("duplicate member"));
        }
        if set.len() < 2 {
            return Err(Error::InvalidSet("fewer than two alternatives"));
        }
        if let Some(&last) = set.last() {
            if last >= n {
                return Err(Error::IndexOutOfRange { index: last, n });
            }
        }
        if set.binary_search(&chosen).is_err() {
            return Err(Error::InvalidChoice { chosen });
        }
        Ok(Self { chosen, set })
    }
}

/// A multiset of choice observations over a universe of `n` alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceDataset {
    n: usize,
    observations: Vec<Observation>,
    labels: Option<Vec<String>>,
}

impl ChoiceDataset {
    pub fn new(n: usize, observations: Vec<Observation>) -> Result<Self> {
        for obs in &observations {
            if obs.set.iter().any(|&i| i >= n) || obs.set.binary_search(&obs.chosen).is_err() {
                return Err(Error::InvalidChoice { chosen: obs.chosen });
            }
        }
        Ok(Self {
            n,
            observations,
            labels: None,
        })
    }

    /// Convenience constructor from `(chosen, set)` pairs.
    pub fn from_pairs<I, S>(n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, S)>,
        S: Into<Vec<usize>>,
    {
        let observations = pairs
            .into_iter()
            .map(|(chosen, set)| Observation::new(n, chosen, set.into()))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, observations)
    }

    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                found: labels.len(),
            });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    /// The first `count` observations, keeping the universe and labels.
    pub fn prefix(&self, count: usize) -> Self {
        Self {
            n: self.n,
            observations: self.observations[..count.min(self.len())].to_vec(),
            labels: self.labels.clone(),
        }
    }

    fn with_observations(&self, observations: Vec<Observation>) -> Self {
        Self {
            n: self.n,
            observations,
            labels: self.labels.clone(),
        }
    }

    /// Alternatives that never appear in any observed set.
    pub fn unused_items(&self) -> Vec<usize> {
        let mut seen = vec![false; self.n];
        for obs in &self.observations {
            for &i in &obs.set {
                seen[i] = true;
            }
        }
        (0..self.n).filter(|&i| !seen[i]).collect()
    }
}

/// Tallies derived from a dataset.
///
/// `c_is[S][k]` counts choices of `S[k]` from `S`; counts are real-valued so
/// that additive smoothing can be represented.
#[derive(Debug, Clone, PartialEq)]
pub struct CountTables {
    pub n: usize,
    pub c_is: BTreeMap<Vec<usize>, Vec<f64>>,
    pub c_s: BTreeMap<Vec<usize>, f64>,
    /// Number of observations whose set contains both `i` and `j`; zero diagonal.
    pub cooccurrence: Vec<Vec<u64>>,
    pub set_size_histogram: BTreeMap<usize, u64>,
}

impl CountTables {
    /// Sum of all choice counts.
    pub fn total(&self) -> f64 {
        self.c_s.values().sum()
    }

    /// Counts of `item` chosen from `set` (sorted), zero when unobserved.
    pub fn count(&self, item: usize, set: &[usize]) -> f64 {
        self.c_is
            .get(set)
            .and_then(|counts| set.iter().position(|&i| i == item).map(|k| counts[k]))
            .unwrap_or(0.0)
    }
}

/// Exact tallies of a dataset.
pub fn counts(d: &ChoiceDataset) -> CountTables {
    let n = d.n();
    let mut c_is: BTreeMap<Vec<usize>, Vec<f64>> = BTreeMap::new();
    let mut cooccurrence = vec![vec![0u64; n]; n];
    let mut set_size_histogram = BTreeMap::new();
    for obs in d.observations() {
        let entry = c_is
            .entry(obs.set.clone())
            .or_insert_with(|| vec![0.0; obs.set.len()]);
        let k = obs
            .set
            .binary_search(&obs.chosen)
            .expect("validated on construction");
        entry[k] += 1.0;
        for (a, &i) in obs.set.iter().enumerate() {
            for &j in &obs.set[a + 1..] {
                cooccurrence[i][j] += 1;
                cooccurrence[j][i] += 1;
            }
        }
        *set_size_histogram.entry(obs.set.len()).or_insert(0) += 1;
    }
    let c_s = c_is
        .iter()
        .map(|(s, c)| (s.clone(), c.iter().sum()))
        .collect();
    CountTables {
        n,
        c_is,
        c_s,
        cooccurrence,
        set_size_histogram,
    }
}

/// Adds `alpha` to every `C_iS` of every observed set and recomputes `C_S`.
pub fn smooth(t: &CountTables, alpha: f64) -> Result<CountTables> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::NegativeAlpha(alpha));
    }
    let mut out = t.clone();
    for counts in out.c_is.values_mut() {
        for c in counts.iter_mut() {
            *c += alpha;
        }
    }
    out.c_s = out
        .c_is
        .iter()
        .map(|(s, c)| (s.clone(), c.iter().sum()))
        .collect();
    Ok(out)
}

/// Seeded random permutation followed by a cut at `floor(train_fraction * N)`.
pub fn split(
    d: &ChoiceDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(ChoiceDataset, ChoiceDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::InvalidConfig("train fraction must lie in (0, 1)"));
    }
    let total = d.len();
    let n_train = libm::floor(train_fraction * total as f64) as usize;
    if n_train == 0 || n_train == total {
        return Err(Error::DegenerateSplit {
            train: n_train,
            test: total - n_train,
        });
    }
    let mut order: Vec<usize> = (0..total).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let pick = |idx: &[usize]| idx.iter().map(|&k| d.observations[k].clone()).collect();
    Ok((
        d.with_observations(pick(&order[..n_train])),
        d.with_observations(pick(&order[n_train..])),
    ))
}

/// Draws `count` observations: a set uniformly from `sets`, then a choice
/// from the model's distribution on that set.
pub fn sample<M: ChoiceModel + ?Sized>(
    m: &M,
    sets: &[Vec<usize>],
    count: usize,
    seed: u64,
) -> Result<ChoiceDataset> {
    if count == 0 {
        return Err(Error::InvalidConfig("sample count must be at least 1"));
    }
    if sets.is_empty() {
        return Err(Error::InvalidSet("no choice sets to sample from"));
    }
    let n = m.n_items();
    let sorted: Vec<Vec<usize>> = sets
        .iter()
        .map(|s| {
            let mut s = s.clone();
            s.sort_unstable();
            s
        })
        .collect();
    let dists: Vec<Distribution> = sorted
        .iter()
        .map(|s| m.probabilities(s))
        .collect::<Result<_>>()?;
    let mut rng = rng_from_seed(seed);
    let mut observations = Vec::with_capacity(count);
    for _ in 0..count {
        let k = rng.gen_range(0..sorted.len());
        let dist = &dists[k];
        let chosen = draw(dist, rng.gen::<f64>());
        observations.push(Observation::new(n, chosen, sorted[k].clone())?);
    }
    ChoiceDataset::new(n, observations)
}

/// Inverse-CDF draw from a distribution given a uniform `u` in `[0, 1)`.
fn draw(dist: &Distribution, u: f64) -> usize {
    let mut acc = 0.0;
    let mut last = dist.support()[0];
    for (&item, &p) in dist.support().iter().zip(dist.mass()) {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = item;
        if u < acc {
            return item;
        }
    }
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::luce::MnlModel;

    fn pair_data(a: usize, b: usize) -> ChoiceDataset {
        let mut obs = vec![(0usize, vec![0usize, 1]); a];
        obs.extend(vec![(1usize, vec![0usize, 1]); b]);
        ChoiceDataset::from_pairs(2, obs).unwrap()
    }

    #[test]
    fn observation_validation() {
        assert_eq!(
            Observation::new(3, 2, vec![0, 1]),
            Err(Error::InvalidChoice { chosen: 2 })
        );
        assert!(matches!(
            Observation::new(3, 0, vec![0]),
            Err(Error::InvalidSet(_))
        ));
        assert!(matches!(
            Observation::new(3, 0, vec![0, 0]),
            Err(Error::InvalidSet(_))
        ));
        assert!(matches!(
            Observation::new(3, 0, vec![0, 3]),
            Err(Error::IndexOutOfRange { index: 3, n: 3 })
        ));
        assert_eq!(Observation::new(3, 1, vec![2, 1]).unwrap().set, vec![1, 2]);
    }

    #[test]
    fn counts_single_observation() {
        let d = ChoiceDataset::from_pairs(3, [(1, vec![0, 1, 2])]).unwrap();
        let t = counts(&d);
        assert_eq!(t.c_s.len(), 1);
        assert_eq!(t.c_s[&vec![0, 1, 2]], 1.0);
        assert_eq!(t.c_is[&vec![0, 1, 2]], vec![0.0, 1.0, 0.0]);
        assert_eq!(t.set_size_histogram[&3], 1);
        assert_eq!(t.cooccurrence[0][2], 1);
        assert_eq!(t.cooccurrence[1][1], 0);
    }

    #[test]
    fn counts_conservation_and_symmetry() {
        let d = ChoiceDataset::from_pairs(
            4,
            [
                (0, vec![0, 1]),
                (1, vec![0, 1, 2]),
                (3, vec![2, 3]),
                (2, vec![0, 1, 2]),
                (0, vec![0, 1]),
            ],
        )
        .unwrap();
        let t = counts(&d);
        assert_eq!(t.total(), 5.0);
        for (s, c) in &t.c_is {
            assert_eq!(c.iter().sum::<f64>(), t.c_s[s]);
        }
        for i in 0..4 {
            assert_eq!(t.cooccurrence[i][i], 0);
            for j in 0..4 {
                assert_eq!(t.cooccurrence[i][j], t.cooccurrence[j][i]);
            }
        }
        assert_eq!(t.cooccurrence[0][1], 4);
        assert_eq!(t.count(0, &[0, 1]), 2.0);
    }

    #[test]
    fn smoothing() {
        let t = counts(&pair_data(3, 1));
        assert_eq!(smooth(&t, 0.0).unwrap(), t);
        let s = smooth(&t, 5.0).unwrap();
        assert_eq!(s.c_is[&vec![0, 1]], vec![8.0, 6.0]);
        assert_eq!(s.c_s[&vec![0, 1]], 14.0);
        assert_eq!(smooth(&t, -1.0), Err(Error::NegativeAlpha(-1.0)));
    }

    #[test]
    fn split_sizes_and_determinism() {
        let d = pair_data(3, 1);
        let (train, test) = split(&d, 0.75, 9).unwrap();
        assert_eq!((train.len(), test.len()), (3, 1));
        assert_eq!(split(&d, 0.75, 9).unwrap(), (train, test));
        assert_eq!(
            split(&d, 0.1, 9),
            Err(Error::DegenerateSplit { train: 0, test: 4 })
        );
    }

    #[test]
    fn split_is_a_disjoint_cover() {
        let d = ChoiceDataset::from_pairs(3, (0..20).map(|k| (k % 3, vec![0, 1, 2]))).unwrap();
        let (train, test) = split(&d, 0.6, 1).unwrap();
        assert_eq!(train.len(), 12);
        let mut all: Vec<usize> = train
            .observations()
            .iter()
            .chain(test.observations())
            .map(|o| o.chosen)
            .collect();
        all.sort_unstable();
        let mut want: Vec<usize> = (0..20).map(|k| k % 3).collect();
        want.sort_unstable();
        assert_eq!(all, want);
    }

    #[test]
    fn sample_symmetric_mnl() {
        let m = MnlModel::new(vec![1.0, 1.0]).unwrap();
        let d = sample(&m, &[vec![0, 1]], 10_000, 3).unwrap();
        let frac = counts(&d).count(0, &[0, 1]) / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "{frac}");
        assert_eq!(sample(&m, &[vec![0, 1]], 10_000, 3).unwrap(), d);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
        assert_eq!(derive_seed(5, 3), derive_seed(5, 3));
    }
}
