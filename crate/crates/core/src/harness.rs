//! Monte-Carlo evaluation: relative error sweeps over a grid of cardinalities,
//! scale-invariance summaries and analytic memory tables.

use std::io::Write;

use rayon::prelude::*;

use crate::dimensioning::{hll_memory_model, required_memory};
use crate::error::{invalid, Result};
use crate::hashing::mix_seed;
use crate::DistinctCounter;

pub const DEFAULT_REPLICATES: usize = 300;

/// Cardinalities below this are left out of invariance ratios.
pub const INVARIANCE_MIN_N: u64 = 100;

/// Synthetic item: 16 bytes, namespaced by `(replicate, n)` and indexed.
#[inline]
pub fn synthetic_item(replicate: u32, n: u32, index: u64) -> [u8; 16] {
    let mut item = [0u8; 16];
    item[..4].copy_from_slice(&replicate.to_le_bytes());
    item[4..8].copy_from_slice(&n.to_le_bytes());
    item[8..].copy_from_slice(&index.to_le_bytes());
    item
}

/// Powers of two from `2^4` up to `min(N, 2^20)`.
pub fn default_grid(max_cardinality: u64) -> Vec<u64> {
    let top = max_cardinality.min(1 << 20);
    (4..=20).map(|e| 1u64 << e).take_while(|&n| n <= top).collect()
}

/// Error metrics over replicates for one cardinality.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialReport {
    pub n: u64,
    pub replicates: usize,
    pub mean_estimate: f64,
    /// Standard error of `mean_estimate`.
    pub std_error: f64,
    /// Mean of `|n̂/n - 1|`.
    pub l1: f64,
    /// `sqrt(mean((n̂/n - 1)^2))`.
    pub rrmse: f64,
    /// 99% quantile of `|n̂/n - 1|`.
    pub q99: f64,
    pub theoretical_rrmse: Option<f64>,
}

impl TrialReport {
    pub fn from_estimates(n: u64, estimates: &[f64], theoretical_rrmse: Option<f64>) -> Result<Self> {
        if estimates.len() < 2 {
            return Err(invalid("need at least two replicates"));
        }
        if n == 0 {
            return Err(invalid("true cardinality must be positive"));
        }
        let nf = n as f64;
        let r = estimates.len() as f64;
        let mut errs: Vec<f64> = estimates.iter().map(|e| (e / nf - 1.0).abs()).collect();
        let l1 = errs.iter().sum::<f64>() / r;
        let rrmse = (errs.iter().map(|e| e * e).sum::<f64>() / r).sqrt();
        errs.sort_by(f64::total_cmp);
        let mean = estimates.iter().sum::<f64>() / r;
        let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (r - 1.0);
        Ok(Self {
            n,
            replicates: estimates.len(),
            mean_estimate: mean,
            std_error: (var / r).sqrt(),
            l1,
            rrmse,
            q99: quantile_sorted(&errs, 0.99),
            theoretical_rrmse,
        })
    }

    /// z-score of the RRMSE against the theoretical value, treating
    /// `R rrmse² / ε²` as chi-square with `R` degrees of freedom.
    pub fn chi_square_z(&self) -> Option<f64> {
        let eps = self.theoretical_rrmse?;
        let r = self.replicates as f64;
        Some((r * (self.rrmse / eps).powi(2) - r) / (2.0 * r).sqrt())
    }
}

/// Linear interpolation between order statistics.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Raw per-replicate estimates for one sweep point.
pub fn replicate_estimates<S, F>(factory: &F, n: u64, replicates: usize, seed: u64) -> Vec<f64>
where
    S: DistinctCounter,
    F: Fn(u64) -> S + Sync,
{
    (0..replicates)
        .into_par_iter()
        .map(|rep| {
            let mut sketch = factory(mix_seed(seed, rep as u64));
            for i in 0..n {
                sketch.insert(&synthetic_item(rep as u32, n as u32, i));
            }
            sketch.estimate()
        })
        .collect()
}

/// Runs `replicates` independent sketches per grid point and aggregates
/// their errors. The sketch for replicate `i` is built from
/// `mix_seed(seed, i)` and fed `n` fresh synthetic items.
pub fn rrmse_sweep<S, F>(factory: F, n_grid: &[u64], replicates: usize, seed: u64) -> Result<Vec<TrialReport>>
where
    S: DistinctCounter,
    F: Fn(u64) -> S + Sync,
{
    if n_grid.is_empty() {
        return Err(invalid("empty cardinality grid"));
    }
    if replicates < 2 {
        return Err(invalid("need at least two replicates"));
    }
    let probe = factory(seed);
    if let Some(cap) = probe.capacity() {
        if let Some(&n) = n_grid.iter().find(|&&n| n > cap) {
            return Err(invalid(format!("grid value {n} exceeds sketch capacity {cap}")));
        }
    }
    if let Some(&n) = n_grid.iter().find(|&&n| n == 0 || n > u64::from(u32::MAX)) {
        return Err(invalid(format!("grid value {n} out of range")));
    }
    let theory = probe.theoretical_rrmse();
    n_grid
        .iter()
        .map(|&n| {
            let estimates = replicate_estimates(&factory, n, replicates, seed);
            TrialReport::from_estimates(n, &estimates, theory)
        })
        .collect()
}

pub fn write_reports_csv<W: Write>(reports: &[TrialReport], mut out: W) -> std::io::Result<()> {
    writeln!(out, "n,replicates,mean,l1,rrmse,q99,theory")?;
    for r in reports {
        let theory = r.theoretical_rrmse.map(|t| format!("{t:.6}")).unwrap_or_default();
        writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6},{:.6},{}",
            r.n, r.replicates, r.mean_estimate, r.l1, r.rrmse, r.q99, theory
        )?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct InvarianceSummary {
    /// max/min empirical RRMSE over grid points with `n >= 100`.
    pub ratio: f64,
    pub min_rrmse: f64,
    pub max_rrmse: f64,
    /// `(n, z)` for every report carrying a theoretical RRMSE.
    pub z_scores: Vec<(u64, f64)>,
}

pub fn invariance_report(reports: &[TrialReport]) -> Result<InvarianceSummary> {
    if reports.len() < 2 {
        return Err(invalid("need at least two reports"));
    }
    let lo = reports.iter().map(|r| r.n).min().unwrap_or(0);
    let hi = reports.iter().map(|r| r.n).max().unwrap_or(0);
    if lo == 0 || hi / lo < 100 {
        return Err(invalid("reports must span at least two decades of n"));
    }
    let kept: Vec<f64> = reports
        .iter()
        .filter(|r| r.n >= INVARIANCE_MIN_N)
        .map(|r| r.rrmse)
        .collect();
    if kept.len() < 2 {
        return Err(invalid("fewer than two reports with n >= 100"));
    }
    let min_rrmse = kept.iter().copied().fold(f64::INFINITY, f64::min);
    let max_rrmse = kept.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(InvarianceSummary {
        ratio: max_rrmse / min_rrmse,
        min_rrmse,
        max_rrmse,
        z_scores: reports
            .iter()
            .filter_map(|r| r.chi_square_z().map(|z| (r.n, z)))
            .collect(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MemoryRow {
    pub epsilon: f64,
    pub max_cardinality: u64,
    pub sbitmap_bits: usize,
    pub hll_bits: f64,
    /// `hll_bits / sbitmap_bits`.
    pub ratio: f64,
}

pub fn memory_table(epsilons: &[f64], max_cardinalities: &[u64]) -> Result<Vec<MemoryRow>> {
    let mut rows = Vec::with_capacity(epsilons.len() * max_cardinalities.len());
    for &epsilon in epsilons {
        for &n in max_cardinalities {
            let sbitmap_bits = required_memory(epsilon, n)?;
            let hll_bits = hll_memory_model(epsilon, n)?;
            rows.push(MemoryRow {
                epsilon,
                max_cardinality: n,
                sbitmap_bits,
                hll_bits,
                ratio: hll_bits / sbitmap_bits as f64,
            });
        }
    }
    Ok(rows)
}

pub fn write_memory_csv<W: Write>(rows: &[MemoryRow], mut out: W) -> std::io::Result<()> {
    writeln!(out, "epsilon,N,sbitmap_bits,hll_bits,ratio")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.1},{:.4}",
            r.epsilon, r.max_cardinality, r.sbitmap_bits, r.hll_bits, r.ratio
        )?;
    }
    Ok(())
}
