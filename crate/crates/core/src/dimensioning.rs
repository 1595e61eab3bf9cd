//! Dimensioning: from a memory budget `m` and a maximum cardinality `N` to the
//! precision constant `C` and the sequential sampling rates.
//!
//! The capacity equation links the three quantities:
//!
//! ```text
//! m = C/2 + ln(1 + 2N/C) / ln(1 + 2/(C-1))
//! ```
//!
//! Its right-hand side is strictly increasing in `C`, so for fixed `(m, N)`
//! there is exactly one root, found here by bisection. The theoretical relative
//! error is `(C-1)^(-1/2)`.

use crate::error::{invalid, Error, Result};

const MIN_BITS: usize = 8;
const BISECTION_MAX_ITER: usize = 200;
const BISECTION_REL_TOL: f64 = 1e-12;
const C_UPPER: f64 = 1e12;
// RRMSE below 100% requires C > 2.
const C_LOWER: f64 = 2.0;

/// Right-hand side of the capacity equation: bits needed for precision `c`
/// over cardinalities up to `max_cardinality`.
pub fn capacity_bits(c: f64, max_cardinality: f64) -> f64 {
    c / 2.0 + (2.0 * max_cardinality / c).ln_1p() / (2.0 / (c - 1.0)).ln_1p()
}

/// The dimensioning tuple for one sketch family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CapacityParams {
    max_cardinality: u64,
    bits: usize,
    precision: f64,
    epsilon: f64,
    ratio: f64,
    truncation: usize,
}

impl CapacityParams {
    /// Maximum supported cardinality `N`.
    pub fn max_cardinality(&self) -> u64 {
        self.max_cardinality
    }

    /// Bitmap size `m` in bits.
    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Precision constant `C`.
    pub fn precision(&self) -> f64 {
        self.precision
    }

    /// Theoretical RRMSE `(C-1)^(-1/2)`.
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Geometric ratio `r = 1 - 2/(C+1)`.
    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    /// Truncation fill level `floor(m - C/2)`.
    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Closed form of the expected waiting index `t_b = (C/2)(r^-b - 1)`.
    pub fn expected_wait(&self, level: usize) -> f64 {
        let c = self.precision;
        let log_growth = (2.0 / (c - 1.0)).ln_1p();
        c / 2.0 * (level as f64 * log_growth).exp_m1()
    }

    fn from_precision(bits: usize, max_cardinality: u64, precision: f64) -> Result<Self> {
        let trunc = (bits as f64 - precision / 2.0).floor();
        if trunc < 1.0 {
            return Err(invalid(format!(
                "m={bits} bits is oversized for N={max_cardinality}: truncation level would be {trunc}"
            )));
        }
        Ok(Self {
            max_cardinality,
            bits,
            precision,
            epsilon: (precision - 1.0).sqrt().recip(),
            ratio: 1.0 - 2.0 / (precision + 1.0),
            truncation: (trunc as usize).min(bits),
        })
    }
}

/// Solves the capacity equation for `C` given `m` bits and maximum cardinality `N`.
pub fn solve_capacity(bits: usize, max_cardinality: u64) -> Result<CapacityParams> {
    if bits < MIN_BITS {
        return Err(invalid(format!("m must be at least {MIN_BITS} bits, got {bits}")));
    }
    if max_cardinality == 0 {
        return Err(invalid("N must be at least 1"));
    }
    let n = max_cardinality as f64;
    let target = bits as f64;

    if capacity_bits(C_LOWER, n) > target {
        return Err(Error::NoSolution {
            bits,
            max_cardinality,
            min_bits: capacity_bits(C_LOWER, n).ceil() as usize,
        });
    }
    if capacity_bits(C_UPPER, n) < target {
        return Err(invalid(format!("m={bits} exceeds the supported precision range")));
    }

    let (mut lo, mut hi) = (C_LOWER, C_UPPER);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if capacity_bits(mid, n) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= BISECTION_REL_TOL * lo {
            break;
        }
    }
    CapacityParams::from_precision(bits, max_cardinality, 0.5 * (lo + hi))
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(invalid(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    Ok(())
}

/// Bits needed for RRMSE `epsilon` over `1..=N`, rounded up.
pub fn required_memory(epsilon: f64, max_cardinality: u64) -> Result<usize> {
    check_epsilon(epsilon)?;
    if max_cardinality == 0 {
        return Err(invalid("N must be at least 1"));
    }
    let c = 1.0 + epsilon.powi(-2);
    Ok(capacity_bits(c, max_cardinality as f64).ceil() as usize)
}

/// Closed-form approximation `½ε⁻²(1 + ln(1 + 2Nε²))` of [`required_memory`].
///
/// Agrees with the exact value within a few percent once `Nε² ≥ 1`.
pub fn approx_memory(epsilon: f64, max_cardinality: u64) -> Result<f64> {
    check_epsilon(epsilon)?;
    if max_cardinality == 0 {
        return Err(invalid("N must be at least 1"));
    }
    let e2 = epsilon * epsilon;
    Ok(0.5 / e2 * (1.0 + (2.0 * max_cardinality as f64 * e2).ln_1p()))
}

/// Register-count multiplier `α = k + 1` for `2^(2^k) ≤ N < 2^(2^(k+1))`.
fn loglog_alpha(max_cardinality: u64) -> Result<f64> {
    if !(1u64 << 8..1u64 << 32).contains(&max_cardinality) {
        return Err(invalid(format!(
            "log-family memory model supports 2^8 <= N < 2^32, got {max_cardinality}"
        )));
    }
    let log2 = 63 - max_cardinality.leading_zeros();
    let k = 31 - log2.leading_zeros();
    Ok(f64::from(k + 1))
}

fn log_family_memory(constant: f64, epsilon: f64, max_cardinality: u64) -> Result<f64> {
    check_epsilon(epsilon)?;
    let alpha = loglog_alpha(max_cardinality)?;
    Ok(constant * constant * alpha / (epsilon * epsilon))
}

/// Analytic HyperLogLog memory `1.04² α ε⁻²` in bits.
pub fn hll_memory_model(epsilon: f64, max_cardinality: u64) -> Result<f64> {
    log_family_memory(1.04, epsilon, max_cardinality)
}

/// Analytic LogLog memory `1.30² α ε⁻²` in bits.
pub fn loglog_memory_model(epsilon: f64, max_cardinality: u64) -> Result<f64> {
    log_family_memory(1.30, epsilon, max_cardinality)
}

/// Sampling-rate schedule, unconditional fill probabilities and the
/// expectation table for one [`CapacityParams`].
///
/// Levels are 1-based: `sampling_rate(k)` is the rate applied when `k-1`
/// buckets are already filled.
#[derive(Debug, Clone)]
pub struct RateTable {
    params: CapacityParams,
    rates: Vec<f64>,
    fill_probs: Vec<f64>,
    waits: Vec<f64>,
}

impl RateTable {
    pub fn new(params: CapacityParams) -> Self {
        build_rate_table(params)
    }

    pub fn params(&self) -> &CapacityParams {
        &self.params
    }

    pub fn bits(&self) -> usize {
        self.params.bits
    }

    /// `p_k` for `k` in `1..=m`.
    pub fn sampling_rate(&self, level: usize) -> f64 {
        self.rates[level - 1]
    }

    /// `q_k = (1 - (k-1)/m) p_k` for `k` in `1..=m`.
    pub fn fill_probability(&self, level: usize) -> f64 {
        self.fill_probs[level - 1]
    }

    /// `t_b` for `b` in `0..=m`.
    pub fn expected_wait(&self, level: usize) -> f64 {
        self.waits[level]
    }

    pub fn sampling_rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn fill_probabilities(&self) -> &[f64] {
        &self.fill_probs
    }

    pub fn expected_waits(&self) -> &[f64] {
        &self.waits
    }

    /// Writes `k,p,q,t` rows for every fill level.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "k,p,q,t")?;
        for k in 1..=self.bits() {
            writeln!(
                out,
                "{},{:e},{:e},{:e}",
                k,
                self.sampling_rate(k),
                self.fill_probability(k),
                self.expected_wait(k)
            )?;
        }
        Ok(())
    }
}

/// Builds the schedule `p_k = m/(m+1-k) (1 + 1/C) r^k`, held constant at
/// `p_{b_max}` for levels past the truncation index.
pub fn build_rate_table(params: CapacityParams) -> RateTable {
    let m = params.bits;
    let c = params.precision;
    let trunc = params.truncation;
    let log_r = -(2.0 / (c - 1.0)).ln_1p();
    let scale = 1.0 + c.recip();
    let mf = m as f64;

    let mut rates = Vec::with_capacity(m);
    for k in 1..=m {
        let p = if k <= trunc {
            mf / (mf + 1.0 - k as f64) * scale * (k as f64 * log_r).exp()
        } else {
            rates[trunc - 1]
        };
        rates.push(p);
    }

    let fill_probs: Vec<f64> = rates
        .iter()
        .enumerate()
        .map(|(i, p)| (1.0 - i as f64 / mf) * p)
        .collect();

    let mut waits = Vec::with_capacity(m + 1);
    waits.push(0.0);
    for b in 1..=m {
        let t = if b <= trunc {
            params.expected_wait(b)
        } else {
            waits[b - 1] + fill_probs[b - 1].recip()
        };
        waits.push(t);
    }

    RateTable {
        params,
        rates,
        fill_probs,
        waits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_precision_constants() {
        let cases = [
            (4000, 1u64 << 20, 915.6, 0.033),
            (1800, 1 << 20, 373.7, 0.052),
            (8000, 1_000_000, 2026.55, 0.022),
        ];
        for (m, n, c, eps) in cases {
            let p = solve_capacity(m, n).unwrap();
            assert!((p.precision() - c).abs() < 0.5, "m={m}: C={}", p.precision());
            assert!((p.epsilon() - eps).abs() < 0.0006, "m={m}: eps={}", p.epsilon());
        }
        // the exact root is 9431.7, i.e. ε ≈ 1.03%, not 1e4
        let p = solve_capacity(30_000, 1_000_000).unwrap();
        assert!((p.epsilon() - 0.01).abs() < 0.0005, "eps={}", p.epsilon());
    }

    #[test]
    fn solver_residual_is_tiny() {
        for &(m, n) in &[(8usize, 10u64), (256, 2000), (4000, 1 << 20), (100_000, 1 << 30)] {
            let p = solve_capacity(m, n).unwrap();
            let resid = (capacity_bits(p.precision(), n as f64) - m as f64) / m as f64;
            assert!(resid.abs() < 1e-9, "m={m} n={n} resid={resid}");
        }
    }

    #[test]
    fn derived_fields_follow_precision() {
        let p = solve_capacity(4000, 1 << 20).unwrap();
        let c = p.precision();
        assert_eq!(p.epsilon(), (c - 1.0).powf(-0.5));
        assert!((p.ratio() - (1.0 - 2.0 / (c + 1.0))).abs() < 1e-15);
        assert_eq!(p.truncation(), (4000.0 - c / 2.0).floor() as usize);
    }

    #[test]
    fn infeasible_demand_reports_minimal_bits() {
        match solve_capacity(8, 1_000_000_000) {
            Err(Error::NoSolution { min_bits, .. }) => {
                assert!(min_bits > 8);
                assert!(solve_capacity(min_bits, 1_000_000_000).is_ok());
            }
            other => panic!("expected NoSolution, got {other:?}"),
        }
    }

    #[test]
    fn rejects_out_of_range_input() {
        assert!(matches!(solve_capacity(7, 100), Err(Error::InvalidInput(_))));
        assert!(matches!(solve_capacity(100, 0), Err(Error::InvalidInput(_))));
        assert!(matches!(required_memory(0.0, 100), Err(Error::InvalidInput(_))));
        assert!(matches!(required_memory(1.0, 100), Err(Error::InvalidInput(_))));
        assert!(matches!(approx_memory(-0.1, 100), Err(Error::InvalidInput(_))));
        assert!(matches!(hll_memory_model(0.01, 255), Err(Error::InvalidInput(_))));
        assert!(matches!(hll_memory_model(0.01, 1 << 32), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn required_memory_matches_table_values() {
        // hundreds of bits
        let cases = [(0.01, 1_000_000u64, 315.2), (0.03, 1000, 11.3), (0.09, 10_000_000, 8.1)];
        for (eps, n, hundreds) in cases {
            let m = required_memory(eps, n).unwrap() as f64 / 100.0;
            assert!((m / hundreds - 1.0).abs() < 0.02, "eps={eps} N={n}: {m}");
        }
    }

    #[test]
    fn approximation_tracks_exact_memory() {
        let a = approx_memory(0.01, 1_000_000).unwrap();
        let direct = 0.5 * 1e4 * (1.0 + 201f64.ln());
        assert!((a - direct).abs() < 1e-9 * direct);
        assert!((a / required_memory(0.01, 1_000_000).unwrap() as f64 - 1.0).abs() < 0.02);
        let b = approx_memory(0.09, 10_000_000).unwrap();
        assert!((b / 810.0 - 1.0).abs() < 0.02, "{b}");
        for &eps in &[0.01, 0.03, 0.09] {
            for &n in &[1000u64, 10_000, 100_000, 1_000_000, 10_000_000] {
                if n as f64 * eps * eps >= 1.0 {
                    let exact = required_memory(eps, n).unwrap() as f64;
                    let approx = approx_memory(eps, n).unwrap();
                    assert!((approx / exact - 1.0).abs() < 0.05, "eps={eps} n={n}");
                }
            }
        }
    }

    #[test]
    fn hll_model_bands() {
        assert!((hll_memory_model(0.01, 1000).unwrap() - 43264.0).abs() < 1e-6);
        assert!((hll_memory_model(0.03, 100_000).unwrap() / 6009.0 - 1.0).abs() < 0.001);
        assert!((hll_memory_model(0.09, 10_000).unwrap() / 534.0 - 1.0).abs() < 0.001);
        assert_eq!(loglog_alpha(1 << 8).unwrap(), 4.0);
        assert_eq!(loglog_alpha((1 << 16) - 1).unwrap(), 4.0);
        assert_eq!(loglog_alpha(1 << 16).unwrap(), 5.0);
        assert_eq!(loglog_alpha(u64::from(u32::MAX)).unwrap(), 5.0);
        let ratio = loglog_memory_model(0.03, 1 << 20).unwrap() / hll_memory_model(0.03, 1 << 20).unwrap();
        assert!((ratio - 1.5625).abs() < 1e-12);
    }

    #[test]
    fn first_level_values() {
        for &(m, n) in &[(256usize, 2000u64), (4000, 1 << 20), (31_520, 1_000_000)] {
            let table = build_rate_table(solve_capacity(m, n).unwrap());
            let c = table.params().precision();
            assert!((table.sampling_rate(1) - (c - 1.0) / c).abs() < 1e-14);
            assert!((table.expected_wait(1) / (c / (c - 1.0)) - 1.0).abs() < 1e-12);
            assert_eq!(table.expected_wait(0), 0.0);
        }
    }

    #[test]
    fn rates_are_strictly_decreasing_then_flat() {
        let table = build_rate_table(solve_capacity(1800, 1 << 20).unwrap());
        let trunc = table.params().truncation();
        for k in 1..trunc {
            assert!(table.sampling_rate(k) > table.sampling_rate(k + 1), "k={k}");
        }
        for k in trunc..=table.bits() {
            assert_eq!(table.sampling_rate(k), table.sampling_rate(trunc));
        }
        for w in table.expected_waits().windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn truncation_level_covers_range() {
        let p = solve_capacity(8000, 1_000_000).unwrap();
        let table = build_rate_table(p);
        let top = table.expected_wait(p.truncation());
        let n = p.max_cardinality() as f64;
        assert!(top <= n * (1.0 + 1e-9));
        assert!(top >= p.ratio() * n - 1.0);
        assert!((top / n - 1.0).abs() < 0.01);
    }

    #[test]
    fn csv_dump_has_one_row_per_level() {
        let table = build_rate_table(solve_capacity(64, 500).unwrap());
        let mut buf = Vec::new();
        table.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("k,p,q,t"));
        assert_eq!(lines.count(), 64);
    }
}
