//! Continuous-time Markov chain machinery: rate matrices, restriction to a
//! subset of states, communicating-class analysis, and stationary solves.
//!
//! A [`RateMatrix`] holds the off-diagonal transition rates `q_ij` over a
//! universe of `n` alternatives. Restricting it to a subset `S` yields a
//! [`RestrictedGenerator`] whose diagonal is the negated row sum, and the
//! stationary distribution of that generator is a [`Distribution`] over `S`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Rates at or below this value are treated as structural zeros when
/// building the transition graph.
pub const TOL_EDGE: f64 = 1e-12;

/// Slack allowed on `q_ij + q_ji >= 1` before a matrix is flagged non-canonical.
pub const TOL_CONSTRAINT: f64 = 1e-9;

/// Off-diagonal transition rates over a universe of `n` alternatives.
///
/// Stored row-major with the diagonal fixed at zero; the generator diagonal
/// is only materialized by [`restrict`].
#[derive(Debug, Clone, PartialEq)]
pub struct RateMatrix {
    n: usize,
    rates: Vec<f64>,
}

impl RateMatrix {
    /// Builds a rate matrix from `n * n` row-major entries. Diagonal entries
    /// are ignored and stored as zero.
    pub fn new(n: usize, mut rates: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::EmptySubset);
        }
        if rates.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: rates.len(),
            });
        }
        for i in 0..n {
            for j in 0..n {
                let v = rates[i * n + j];
                if i == j {
                    rates[i * n + j] = 0.0;
                } else if !(v.is_finite() && v >= 0.0) {
                    return Err(Error::InvalidRate {
                        row: i,
                        col: j,
                        value: v,
                    });
                }
            }
        }
        Ok(Self { n, rates })
    }

    /// Builds a rate matrix by evaluating `f(i, j)` on every off-diagonal pair.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut rates = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    rates[i * n + j] = f(i, j);
                }
            }
        }
        Self::new(n, rates)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rates[i * self.n + j]
    }

    /// Row-major entries, diagonal zero.
    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    /// Every rate multiplied by `c`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.n, self.rates.iter().map(|q| q * c).collect())
    }

    /// Largest shortfall `max(0, 1 - q_ij - q_ji)` over all pairs.
    pub fn constraint_violation(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                worst = worst.max(1.0 - self.get(i, j) - self.get(j, i));
            }
        }
        worst
    }

    /// True when `q_ij + q_ji >= 1 - TOL_CONSTRAINT` for every pair.
    pub fn is_canonical(&self) -> bool {
        self.constraint_violation() <= TOL_CONSTRAINT
    }

    /// Pairwise selection probability `p_ij = q_ji / (q_ij + q_ji)` implied by
    /// the two-state chain on `{i, j}`. Returns 0.5 when both rates vanish.
    pub fn pairwise_probability(&self, i: usize, j: usize) -> f64 {
        let total = self.get(i, j) + self.get(j, i);
        if total > 0.0 {
            self.get(j, i) / total
        } else {
            0.5
        }
    }
}

/// Generator of the chain restricted to an ordered subset of alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedGenerator {
    subset: Vec<usize>,
    matrix: Vec<f64>,
}

impl RestrictedGenerator {
    /// Builds the generator on `subset` from a rate lookup by alternative
    /// index; callers guarantee a valid subset and nonnegative rates.
    pub(crate) fn from_rates(subset: &[usize], rate: impl Fn(usize, usize) -> f64) -> Self {
        let m = subset.len();
        let mut matrix = vec![0.0; m * m];
        for (a, &i) in subset.iter().enumerate() {
            let mut row_sum = 0.0;
            for (b, &j) in subset.iter().enumerate() {
                if a != b {
                    let v = rate(i, j);
                    matrix[a * m + b] = v;
                    row_sum += v;
                }
            }
            matrix[a * m + a] = -row_sum;
        }
        Self {
            subset: subset.to_vec(),
            matrix,
        }
    }

    pub fn subset(&self) -> &[usize] {
        &self.subset
    }

    pub fn len(&self) -> usize {
        self.subset.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subset.is_empty()
    }

    /// Entry at local positions `(a, b)`, including the diagonal.
    #[inline]
    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.matrix[a * self.subset.len() + b]
    }

    /// Row-major `|S| x |S|` entries.
    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Infinity norm of `pi^T G` for a vector indexed by local position.
    pub fn residual(&self, pi: &[f64]) -> f64 {
        let m = self.len();
        (0..m)
            .map(|b| (0..m).map(|a| pi[a] * self.get(a, b)).sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    fn edge(&self, a: usize, b: usize) -> bool {
        a != b && self.get(a, b) > TOL_EDGE
    }
}

/// A probability distribution over an ordered list of alternatives.
#[derive(Debug, Clone, PartialEq)]
pub struct Distribution {
    support: Vec<usize>,
    mass: Vec<f64>,
}

impl Distribution {
    /// Builds a distribution, rejecting negative masses or totals away from 1.
    pub fn new(support: Vec<usize>, mass: Vec<f64>) -> Result<Self> {
        if support.len() != mass.len() {
            return Err(Error::DimensionMismatch {
                expected: support.len(),
                found: mass.len(),
            });
        }
        if support.is_empty() {
            return Err(Error::EmptySubset);
        }
        let total: f64 = mass.iter().sum();
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) || (total - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidWeights);
        }
        Ok(Self { support, mass })
    }

    /// Normalizes nonnegative weights; callers guarantee a positive total.
    pub(crate) fn from_weights(support: Vec<usize>, mut weights: Vec<f64>) -> Self {
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Self {
            support,
            mass: weights,
        }
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    /// Mass on `item`, zero when the item is outside the support.
    pub fn prob(&self, item: usize) -> f64 {
        self.support
            .iter()
            .position(|&s| s == item)
            .map_or(0.0, |k| self.mass[k])
    }

    /// Total mass on a set of items.
    pub fn mass_of(&self, items: &[usize]) -> f64 {
        items.iter().map(|&i| self.prob(i)).sum()
    }

    /// L1 distance, matching entries by alternative index.
    pub fn l1_distance(&self, other: &Distribution) -> f64 {
        let mut d: f64 = self
            .support
            .iter()
            .zip(&self.mass)
            .map(|(&i, &m)| (m - other.prob(i)).abs())
            .sum();
        for (&i, &m) in other.support.iter().zip(&other.mass) {
            if !self.support.contains(&i) {
                d += m;
            }
        }
        d
    }
}

/// Validates that `set` is a nonempty, duplicate-free subset of `0..n`.
pub fn check_subset(n: usize, set: &[usize]) -> Result<()> {
    if set.is_empty() {
        return Err(Error::EmptySubset);
    }
    for (k, &i) in set.iter().enumerate() {
        if i >= n {
            return Err(Error::IndexOutOfRange { index: i, n });
        }
        if set[..k].contains(&i) {
            return Err(Error::DuplicateIndex(i));
        }
    }
    Ok(())
}

/// Restricts `q` to the ordered subset `set`, setting each diagonal entry to
/// the negated sum of its row.
pub fn restrict(q: &RateMatrix, set: &[usize]) -> Result<RestrictedGenerator> {
    check_subset(q.n(), set)?;
    Ok(RestrictedGenerator::from_rates(set, |i, j| q.get(i, j)))
}

/// Local positions reachable from `start` (including `start`).
fn reachable(g: &RestrictedGenerator, start: usize) -> Vec<bool> {
    let m = g.len();
    let mut seen = vec![false; m];
    let mut stack = vec![start];
    seen[start] = true;
    while let Some(a) = stack.pop() {
        for (b, seen_b) in seen.iter_mut().enumerate() {
            if !*seen_b && g.edge(a, b) {
                *seen_b = true;
                stack.push(b);
            }
        }
    }
    seen
}

/// Closed communicating classes as lists of local positions, each sorted,
/// ordered by their first position.
fn closed_classes_local(g: &RestrictedGenerator) -> Vec<Vec<usize>> {
    let m = g.len();
    let reach: Vec<Vec<bool>> = (0..m).map(|a| reachable(g, a)).collect();
    let mut assigned = vec![false; m];
    let mut classes = Vec::new();
    for a in 0..m {
        if assigned[a] {
            continue;
        }
        // `a` is recurrent iff every state it reaches can reach it back.
        let closed = (0..m).all(|b| !reach[a][b] || reach[b][a]);
        if closed {
            let class: Vec<usize> = (0..m).filter(|&b| reach[a][b]).collect();
            for &b in &class {
                assigned[b] = true;
            }
            classes.push(class);
        }
    }
    classes
}

/// All closed communicating classes of the transition graph (edge `i -> j`
/// iff `q_ij > TOL_EDGE`), reported as alternative indices. States outside
/// their union are transient.
pub fn closed_classes(g: &RestrictedGenerator) -> Vec<Vec<usize>> {
    closed_classes_local(g)
        .into_iter()
        .map(|class| {
            let mut items: Vec<usize> = class.into_iter().map(|a| g.subset[a]).collect();
            items.sort_unstable();
            items
        })
        .collect()
}

/// Solves `pi^T G = 0`, `sum(pi) = 1` for an irreducible generator given as a
/// dense row-major matrix.
fn solve_irreducible(m: usize, gen: &[f64]) -> Result<Vec<f64>> {
    if m == 1 {
        return Ok(vec![1.0]);
    }
    let scale = gen.iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    let residual = |pi: &[f64]| -> f64 {
        (0..m)
            .map(|b| (0..m).map(|a| pi[a] * gen[a * m + b]).sum::<f64>().abs())
            .fold(0.0, f64::max)
    };

    // Transposed balance equations with the last one replaced by normalization.
    let mut a = DMatrix::<f64>::from_fn(m, m, |r, c| gen[c * m + r]);
    for c in 0..m {
        a[(m - 1, c)] = 1.0;
    }
    let mut rhs = DVector::<f64>::zeros(m);
    rhs[m - 1] = 1.0;

    let accept = |pi: Vec<f64>| -> Option<Vec<f64>> {
        if pi.iter().all(|v| v.is_finite()) && residual(&pi) <= 1e-9 * scale {
            Some(pi)
        } else {
            None
        }
    };

    if let Some(x) = a.lu().solve(&rhs) {
        if let Some(pi) = accept(x.iter().copied().collect()) {
            return Ok(pi);
        }
    }

    // Least squares on the full stacked system [G^T; 1^T].
    let stacked =
        DMatrix::<f64>::from_fn(m + 1, m, |r, c| if r < m { gen[c * m + r] } else { 1.0 });
    let mut b = DVector::<f64>::zeros(m + 1);
    b[m] = 1.0;
    let x = stacked
        .svd(true, true)
        .solve(&b, 1e-14)
        .map_err(|_| Error::SingularSystem {
            residual: f64::INFINITY,
        })?;
    let pi: Vec<f64> = x.iter().copied().collect();
    let r = residual(&pi);
    accept(pi).ok_or(Error::SingularSystem { residual: r })
}

/// Stationary distribution of a generator with exactly one closed class.
///
/// The balance equations are solved on the closed class alone and transient
/// states receive zero mass. The support keeps the generator's subset order.
pub fn stationary(g: &RestrictedGenerator) -> Result<Distribution> {
    let classes = closed_classes_local(g);
    if classes.len() != 1 {
        return Err(Error::MultipleClosedClasses(classes.len()));
    }
    let class = &classes[0];
    let k = class.len();
    let mut sub = vec![0.0; k * k];
    for (r, &a) in class.iter().enumerate() {
        let mut row_sum = 0.0;
        for (c, &b) in class.iter().enumerate() {
            if r != c {
                let v = g.get(a, b);
                sub[r * k + c] = v;
                row_sum += v;
            }
        }
        sub[r * k + r] = -row_sum;
    }
    let pi_class = solve_irreducible(k, &sub)?;

    let mut mass = vec![0.0; g.len()];
    for (r, &a) in class.iter().enumerate() {
        // Rounding can leave tiny negative entries.
        mass[a] = pi_class[r].max(0.0);
    }
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) {
        return Err(Error::SingularSystem {
            residual: f64::INFINITY,
        });
    }
    for v in &mut mass {
        *v /= total;
    }
    Ok(Distribution {
        support: g.subset.clone(),
        mass,
    })
}

/// Stationary distribution of `q` restricted to `set`.
pub fn stationary_on(q: &RateMatrix, set: &[usize]) -> Result<Distribution> {
    stationary(&restrict(q, set)?)
}
