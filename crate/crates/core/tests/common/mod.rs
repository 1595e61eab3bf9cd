#![allow(dead_code)]

use statrs::distribution::{ChiSquared, ContinuousCDF};

const MIN_EXPECTED: f64 = 5.0;

/// Upper critical value of chi-square with `df` degrees of freedom.
pub fn chi_square_critical(df: usize, level: f64) -> f64 {
    ChiSquared::new(df as f64).unwrap().inverse_cdf(level)
}

/// Groups adjacent cells so every group has expected count at least 5.
fn pooled_groups(expected: &[f64]) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    let mut acc = 0.0;
    for (i, &e) in expected.iter().enumerate() {
        acc += e;
        if acc >= MIN_EXPECTED {
            groups.push(start..i + 1);
            start = i + 1;
            acc = 0.0;
        }
    }
    if start < expected.len() {
        match groups.last_mut() {
            Some(last) => last.end = expected.len(),
            None => groups.push(0..expected.len()),
        }
    }
    groups
}

/// Goodness-of-fit statistic of `observed` counts against `probs`.
/// Returns `(statistic, degrees of freedom)`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64]) -> (f64, usize) {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let expected: Vec<f64> = probs.iter().map(|p| p * total as f64).collect();
    let groups = pooled_groups(&expected);
    let stat = groups
        .iter()
        .map(|g| {
            let o: u64 = observed[g.clone()].iter().sum();
            let e: f64 = expected[g.clone()].iter().sum();
            (o as f64 - e).powi(2) / e
        })
        .sum();
    (stat, groups.len() - 1)
}

/// Two-sample homogeneity statistic for histograms with equal totals.
pub fn chi_square_two_sample(a: &[u64], b: &[u64]) -> (f64, usize) {
    assert_eq!(a.len(), b.len());
    assert_eq!(a.iter().sum::<u64>(), b.iter().sum::<u64>());
    let pooled: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x + y) as f64 / 2.0).collect();
    let groups = pooled_groups(&pooled);
    let stat = groups
        .iter()
        .map(|g| {
            let x: u64 = a[g.clone()].iter().sum();
            let y: u64 = b[g.clone()].iter().sum();
            (x as f64 - y as f64).powi(2) / (x + y) as f64
        })
        .sum();
    (stat, groups.len() - 1)
}

pub fn histogram(values: impl IntoIterator<Item = usize>, bins: usize) -> Vec<u64> {
    let mut h = vec![0u64; bins];
    for v in values {
        h[v] += 1;
    }
    h
}
