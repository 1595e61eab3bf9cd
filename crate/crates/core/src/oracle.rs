//! Hash-free ground truth for the fill-count process.
//!
//! After `t` distinct arrivals the fill count `L_t` is a Markov chain that
//! steps up with probability `q_{L+1}` and otherwise stays. Equivalently the
//! waiting times between fills are independent geometric variables with
//! success probabilities `q_k`. This module evaluates the chain exactly by a
//! dynamic program and samples it both ways.

use rand::Rng;
use rand_distr::{Distribution, Geometric};

use crate::dimensioning::RateTable;
use crate::error::{Error, Result};

/// Default cap on `n * (m + 1)` cell updates for the dynamic program.
pub const DEFAULT_CELL_BUDGET: u128 = 1_000_000_000;

const UNDERFLOW: f64 = 1e-300;

/// Exact distribution of the fill count after `n` distinct arrivals.
#[derive(Debug, Clone, PartialEq)]
pub struct FillDistribution {
    probs: Vec<f64>,
    n: u64,
}

impl FillDistribution {
    pub fn arrivals(&self) -> u64 {
        self.n
    }

    /// Probabilities over fill levels `0..=m`.
    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn total_mass(&self) -> f64 {
        self.probs.iter().sum()
    }

    /// Probability that the fill count exceeds the truncation level.
    pub fn truncation_mass(&self, rates: &RateTable) -> f64 {
        self.probs[rates.params().truncation() + 1..].iter().sum()
    }

    /// Mean and variance of the shipped estimator `t[min(L, b_max)]`.
    pub fn estimator_moments(&self, rates: &RateTable) -> (f64, f64) {
        let trunc = rates.params().truncation();
        let (mut m1, mut m2) = (0.0, 0.0);
        for (level, &p) in self.probs.iter().enumerate() {
            let t = rates.expected_wait(level.min(trunc));
            m1 += p * t;
            m2 += p * t * t;
        }
        (m1, m2 - m1 * m1)
    }

    /// Exact relative RMSE `sqrt(E(t_B/n - 1)^2)` of the shipped estimator.
    pub fn estimator_rrmse(&self, rates: &RateTable) -> f64 {
        let n = self.n as f64;
        let trunc = rates.params().truncation();
        self.probs
            .iter()
            .enumerate()
            .map(|(level, &p)| p * (rates.expected_wait(level.min(trunc)) / n - 1.0).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

pub fn exact_fill_distribution(n: u64, rates: &RateTable) -> Result<FillDistribution> {
    exact_fill_distribution_with_budget(n, rates, DEFAULT_CELL_BUDGET)
}

/// Forward recursion `P_t(l) = P_{t-1}(l)(1 - q_{l+1}) + P_{t-1}(l-1) q_l`.
pub fn exact_fill_distribution_with_budget(
    n: u64,
    rates: &RateTable,
    budget: u128,
) -> Result<FillDistribution> {
    let m = rates.bits();
    let cells = u128::from(n) * (m as u128 + 1);
    if cells > budget {
        return Err(Error::ResourceLimit { cells, budget });
    }
    let q = rates.fill_probabilities();
    let mut probs = vec![0.0; m + 1];
    probs[0] = 1.0;
    let mut top = 0usize;
    for _ in 0..n {
        if top < m {
            top += 1;
        }
        for level in (1..=top).rev() {
            let stay = if level < m { 1.0 - q[level] } else { 1.0 };
            let v = probs[level] * stay + probs[level - 1] * q[level - 1];
            probs[level] = if v < UNDERFLOW { 0.0 } else { v };
        }
        let v = probs[0] * (1.0 - q[0]);
        probs[0] = if v < UNDERFLOW { 0.0 } else { v };
    }
    Ok(FillDistribution { probs, n })
}

/// One draw of `L_n` by stepping the chain through `n` arrivals.
pub fn chain_simulate<R: Rng + ?Sized>(n: u64, rates: &RateTable, rng: &mut R) -> usize {
    let q = rates.fill_probabilities();
    let m = rates.bits();
    let mut level = 0usize;
    for _ in 0..n {
        if level < m && rng.gen::<f64>() < q[level] {
            level += 1;
        }
    }
    level
}

fn geometric_trials<R: Rng + ?Sized>(q: f64, rng: &mut R) -> u64 {
    if q >= 1.0 {
        return 1;
    }
    Geometric::new(q)
        .expect("fill probability in (0, 1)")
        .sample(rng)
        .saturating_add(1)
}

/// One draw of the waiting index `T_b` as a sum of geometric gaps.
pub fn sample_waiting_time<R: Rng + ?Sized>(level: usize, rates: &RateTable, rng: &mut R) -> u64 {
    rates.fill_probabilities()[..level]
        .iter()
        .fold(0u64, |acc, &q| acc.saturating_add(geometric_trials(q, rng)))
}

/// One draw of `L_n` as `max{b : T_b <= n}`.
pub fn waiting_time_simulate<R: Rng + ?Sized>(n: u64, rates: &RateTable, rng: &mut R) -> usize {
    let mut elapsed = 0u64;
    for (level, &q) in rates.fill_probabilities().iter().enumerate() {
        elapsed = elapsed.saturating_add(geometric_trials(q, rng));
        if elapsed > n {
            return level;
        }
    }
    rates.bits()
}
