//! Audits of choice-theoretic properties: regularity, uniform expansion,
//! contractibility, and cyclic triplets in the majority tournament.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::ctmc::{self, check_subset, Distribution, RateMatrix};
use crate::data::all_subsets_of_size;
use crate::error::{Error, Result};
use crate::model::ChoiceModel;

/// Slack allowed before `p_iA < p_iB` counts as a regularity violation.
pub const TOL_REG: f64 = 1e-9;

/// Disjoint nonempty blocks covering `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    n: usize,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// Each block is sorted; block order is kept as given.
    pub fn new(n: usize, mut blocks: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for block in &mut blocks {
            if block.is_empty() {
                return Err(Error::InvalidPartition("empty block"));
            }
            block.sort_unstable();
            for &i in block.iter() {
                if i >= n {
                    return Err(Error::IndexOutOfRange { index: i, n });
                }
                if seen[i] {
                    return Err(Error::InvalidPartition("blocks overlap"));
                }
                seen[i] = true;
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidPartition("blocks do not cover every item"));
        }
        Ok(Self { n, blocks })
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            n,
            blocks: (0..n).map(|i| vec![i]).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Total mass of each block under `pi`.
    pub fn block_masses(&self, pi: &Distribution) -> Vec<f64> {
        self.blocks.iter().map(|b| pi.mass_of(b)).collect()
    }
}

/// Block-level description of a contractible partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ContractionSummary {
    /// `lambda[a][b]` is the common rate from block `a` to block `b`; zero diagonal.
    pub lambda: Vec<Vec<f64>>,
    pub block_sizes: Vec<usize>,
    /// Stationary distribution over block indices of the chain with rates
    /// `|A_b| * lambda[a][b]`.
    pub contracted_pi: Distribution,
}

impl ContractionSummary {
    /// Largest `|lambda_ab - other.lambda_ab|`.
    pub fn max_lambda_diff(&self, other: &ContractionSummary) -> f64 {
        self.lambda
            .iter()
            .flatten()
            .zip(other.lambda.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

fn check_partition(q: &RateMatrix, part: &Partition) -> Result<()> {
    if q.n() != part.n {
        return Err(Error::DimensionMismatch {
            expected: q.n(),
            found: part.n,
        });
    }
    Ok(())
}

/// Returns the block rates when every cross-block rate between each pair of
/// blocks agrees within `tol`, and `None` otherwise.
pub fn check_contractible(
    q: &RateMatrix,
    part: &Partition,
    tol: f64,
) -> Result<Option<ContractionSummary>> {
    check_partition(q, part)?;
    let k = part.len();
    let mut lambda = vec![vec![0.0; k]; k];
    for (a, block_a) in part.blocks.iter().enumerate() {
        for (b, block_b) in part.blocks.iter().enumerate() {
            if a == b {
                continue;
            }
            let (mut lo, mut hi, mut sum) = (f64::INFINITY, f64::NEG_INFINITY, 0.0);
            for &x in block_a {
                for &y in block_b {
                    let r = q.get(x, y);
                    lo = lo.min(r);
                    hi = hi.max(r);
                    sum += r;
                }
            }
            if hi - lo > tol {
                return Ok(None);
            }
            lambda[a][b] = sum / (block_a.len() * block_b.len()) as f64;
        }
    }
    let block_sizes: Vec<usize> = part.blocks.iter().map(Vec::len).collect();
    let contracted = RateMatrix::from_fn(k, |a, b| block_sizes[b] as f64 * lambda[a][b])?;
    let all: Vec<usize> = (0..k).collect();
    let contracted_pi = ctmc::stationary_on(&contracted, &all)?;
    Ok(Some(ContractionSummary {
        lambda,
        block_sizes,
        contracted_pi,
    }))
}

/// Checks that two chains sharing a contractible partition and its block
/// rates put the same mass on every block.
pub fn contraction_invariance(
    q: &RateMatrix,
    q2: &RateMatrix,
    part: &Partition,
    tol: f64,
) -> Result<bool> {
    check_partition(q2, part)?;
    let s1 = check_contractible(q, part, tol)?.ok_or(Error::NotContractible)?;
    let s2 = check_contractible(q2, part, tol)?.ok_or(Error::NotContractible)?;
    let max_diff = s1.max_lambda_diff(&s2);
    if max_diff > tol {
        return Err(Error::LambdaMismatch { max_diff });
    }
    let all: Vec<usize> = (0..q.n()).collect();
    let m1 = part.block_masses(&ctmc::stationary_on(q, &all)?);
    let m2 = part.block_masses(&ctmc::stationary_on(q2, &all)?);
    Ok(m1.iter().zip(&m2).all(|(a, b)| (a - b).abs() <= tol))
}

/// Replaces every item `m` by `k` copies, indexed `m * k + j`. Copies keep
/// the rates of their original towards every non-copy and use `within_rate`
/// in both directions among themselves.
pub fn expand_copies(
    q: &RateMatrix,
    k: usize,
    within_rate: f64,
) -> Result<(RateMatrix, Partition)> {
    if k == 0 {
        return Err(Error::InvalidK);
    }
    if !(within_rate >= 0.5) || !within_rate.is_finite() {
        return Err(Error::InvalidConfig(
            "within_rate must be finite and at least 0.5",
        ));
    }
    let n = q.n();
    let expanded = RateMatrix::from_fn(n * k, |x, y| {
        let (m, m2) = (x / k, y / k);
        if m == m2 {
            within_rate
        } else {
            q.get(m, m2)
        }
    })?;
    let blocks = (0..n).map(|m| (m * k..(m + 1) * k).collect()).collect();
    Ok((expanded, Partition { n: n * k, blocks }))
}

/// Largest gap between `p_mU` and the total mass of `m`'s `k` copies in the
/// expanded universe.
pub fn uniform_expansion_deviation(q: &RateMatrix, k: usize) -> Result<f64> {
    let (expanded, part) = expand_copies(q, k, 0.5)?;
    let original = ctmc::stationary_on(q, &(0..q.n()).collect::<Vec<_>>())?;
    let full = ctmc::stationary_on(&expanded, &(0..expanded.n()).collect::<Vec<_>>())?;
    Ok(part
        .block_masses(&full)
        .iter()
        .zip(original.mass())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// True when uniform expansion by `k` copies holds within `tol`.
pub fn verify_uniform_expansion(q: &RateMatrix, k: usize, tol: f64) -> Result<bool> {
    Ok(uniform_expansion_deviation(q, k)? <= tol)
}

/// An item whose probability rises when alternatives are added.
#[derive(Debug, Clone, PartialEq)]
pub struct RegularityViolation {
    pub item: usize,
    pub a: Vec<usize>,
    pub b: Vec<usize>,
    pub p_a: f64,
    pub p_b: f64,
}

impl RegularityViolation {
    pub fn margin(&self) -> f64 {
        self.p_b - self.p_a
    }
}

/// Every `(i, A, B)` with `p_iA < p_iB - TOL_REG` over the given nestings.
pub fn regularity_violations<M: ChoiceModel + ?Sized>(
    m: &M,
    pairs: &[(Vec<usize>, Vec<usize>)],
) -> Result<Vec<RegularityViolation>> {
    let n = m.n_items();
    let mut out = Vec::new();
    for (a, b) in pairs {
        check_subset(n, a)?;
        check_subset(n, b)?;
        if a.iter().any(|i| !b.contains(i)) {
            return Err(Error::BadNesting);
        }
        let pa = m.probabilities(a)?;
        let pb = m.probabilities(b)?;
        for &i in a {
            let (p_a, p_b) = (pa.prob(i), pb.prob(i));
            if p_a < p_b - TOL_REG {
                out.push(RegularityViolation {
                    item: i,
                    a: a.clone(),
                    b: b.clone(),
                    p_a,
                    p_b,
                });
            }
        }
    }
    Ok(out)
}

/// Pairs `(A, A + x)` for every `A` with `2 <= |A| < max_size` and `x` not in
/// `A`. Regularity holds on all nestings iff it holds on these, since any
/// `A < B` is a chain of one-item additions.
pub fn one_step_nestings(n: usize, max_size: usize) -> Vec<(Vec<usize>, Vec<usize>)> {
    let mut out = Vec::new();
    for size in 2..max_size.min(n) {
        for a in all_subsets_of_size(n, size) {
            for x in (0..n).filter(|x| !a.contains(x)) {
                let mut b = a.clone();
                b.push(x);
                b.sort_unstable();
                out.push((a.clone(), b));
            }
        }
    }
    out
}

/// Majority tournament: exactly one directed edge per unordered pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tournament {
    n: usize,
    wins: Vec<bool>,
    ties: Vec<(usize, usize)>,
}

impl Tournament {
    /// Builds from edges `(i, j)` meaning `i` beats `j`.
    pub fn new(n: usize, beats: &[(usize, usize)]) -> Result<Self> {
        let mut wins = vec![false; n * n];
        for &(i, j) in beats {
            check_subset(n, &[i, j])?;
            if wins[j * n + i] || wins[i * n + j] {
                return Err(Error::InvalidConfig("pair listed more than once"));
            }
            wins[i * n + j] = true;
        }
        if beats.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::InvalidConfig("every pair needs exactly one edge"));
        }
        Ok(Self {
            n,
            wins,
            ties: Vec::new(),
        })
    }

    /// `i` beats `j` when `p(i, j) > 0.5`; exact ties go to the lower index
    /// and are recorded.
    pub fn from_pairwise(n: usize, p: impl Fn(usize, usize) -> f64) -> Self {
        let mut wins = vec![false; n * n];
        let mut ties = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let pij = p(i, j);
                if pij == 0.5 {
                    ties.push((i, j));
                }
                if pij >= 0.5 {
                    wins[i * n + j] = true;
                } else {
                    wins[j * n + i] = true;
                }
            }
        }
        Self { n, wins, ties }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn beats(&self, i: usize, j: usize) -> bool {
        self.wins[i * self.n + j]
    }

    /// All edges `(i, j)` with `i` beating `j`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let n = self.n;
        (0..n * n)
            .filter(|&k| self.wins[k])
            .map(|k| (k / n, k % n))
            .collect()
    }

    /// Pairs resolved by the tie rule.
    pub fn ties(&self) -> &[(usize, usize)] {
        &self.ties
    }

    pub fn out_degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.beats(i, j)).count()
    }

    /// Triples forming a directed 3-cycle, each listed ascending.
    pub fn cyclic_triples(&self) -> Vec<[usize; 3]> {
        let n = self.n;
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                for k in (j + 1)..n {
                    let forward = self.beats(i, j) && self.beats(j, k) && self.beats(k, i);
                    let backward = self.beats(j, i) && self.beats(k, j) && self.beats(i, k);
                    if forward || backward {
                        out.push([i, j, k]);
                    }
                }
            }
        }
        out
    }
}

/// Tournament of the pairwise probabilities `q_ji / (q_ij + q_ji)`.
pub fn tournament_from_rates(q: &RateMatrix) -> Tournament {
    Tournament::from_pairwise(q.n(), |i, j| q.pairwise_probability(i, j))
}

/// Tournament of a model's two-item choice probabilities.
pub fn tournament_from_model<M: ChoiceModel + ?Sized>(m: &M) -> Result<Tournament> {
    let n = m.n_items();
    let mut p = vec![0.5; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let pij = m.probabilities(&[i, j])?.prob(i);
            p[i * n + j] = pij;
            p[j * n + i] = 1.0 - pij;
        }
    }
    Ok(Tournament::from_pairwise(n, |i, j| p[i * n + j]))
}

fn choose2(x: u64) -> u64 {
    x * x.saturating_sub(1) / 2
}

/// `C(n, 3) - sum_i C(outdeg_i, 2)`.
pub fn cyclic_triplets(t: &Tournament) -> u64 {
    let n = t.n as u64;
    let total = n * n.saturating_sub(1) * n.saturating_sub(2) / 6;
    let transitive: u64 = (0..t.n).map(|i| choose2(t.out_degree(i) as u64)).sum();
    total - transitive
}

/// Most cyclic triples any tournament on `n` vertices can have.
pub fn max_cyclic_triplets(n: usize) -> u64 {
    let n = n as u64;
    if n < 3 {
        0
    } else if n % 2 == 1 {
        (n * n * n - n) / 24
    } else {
        (n * n * n - 4 * n) / 24
    }
}

/// Evidence attached to a failed audit check.
#[derive(Debug, Clone, PartialEq)]
pub enum Witness {
    Regularity(RegularityViolation),
    CyclicTriple([usize; 3]),
    Tie(usize, usize),
    Pair { i: usize, j: usize, shortfall: f64 },
}

/// Outcome of one audit check; `margin` is the check's worst-case quantity.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub margin: f64,
    pub witnesses: Vec<Witness>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditReport {
    pub checks: Vec<CheckResult>,
}

impl AuditReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditConfig {
    /// Copies per item for the uniform-expansion check.
    pub expand_k: usize,
    pub expansion_tol: f64,
    /// Largest superset considered by the regularity check.
    pub max_nesting_size: usize,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            expand_k: 2,
            expansion_tol: 1e-8,
            max_nesting_size: 8,
        }
    }
}

/// Runs the regularity and tournament checks on `m`, plus the rate-matrix
/// checks (constraint, uniform expansion) when `q` is given.
pub fn audit<M: ChoiceModel + ?Sized>(
    m: &M,
    q: Option<&RateMatrix>,
    cfg: &AuditConfig,
) -> Result<AuditReport> {
    let n = m.n_items();
    let mut checks = Vec::new();

    if let Some(q) = q {
        let mut witnesses = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let shortfall = 1.0 - q.get(i, j) - q.get(j, i);
                if shortfall > ctmc::TOL_CONSTRAINT {
                    witnesses.push(Witness::Pair { i, j, shortfall });
                }
            }
        }
        checks.push(CheckResult {
            name: "rate_constraint".into(),
            passed: witnesses.is_empty(),
            margin: q.constraint_violation(),
            witnesses,
        });
    }

    let nestings = one_step_nestings(n, cfg.max_nesting_size.max(3));
    let violations = regularity_violations(m, &nestings)?;
    checks.push(CheckResult {
        name: "regularity".into(),
        passed: violations.is_empty(),
        margin: violations
            .iter()
            .map(RegularityViolation::margin)
            .fold(0.0, f64::max),
        witnesses: violations.into_iter().map(Witness::Regularity).collect(),
    });

    if let Some(q) = q {
        let deviation = uniform_expansion_deviation(q, cfg.expand_k)?;
        checks.push(CheckResult {
            name: "uniform_expansion".into(),
            passed: deviation <= cfg.expansion_tol,
            margin: deviation,
            witnesses: Vec::new(),
        });
    }

    let t = tournament_from_model(m)?;
    let triples = t.cyclic_triples();
    let mut witnesses: Vec<Witness> = triples.iter().map(|&c| Witness::CyclicTriple(c)).collect();
    witnesses.extend(t.ties().iter().map(|&(i, j)| Witness::Tie(i, j)));
    checks.push(CheckResult {
        name: "cyclic_triplets".into(),
        passed: triples.is_empty(),
        margin: triples.len() as f64,
        witnesses,
    });

    Ok(AuditReport { checks })
}
