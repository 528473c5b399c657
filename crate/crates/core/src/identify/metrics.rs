use crate::error::{Error, Result};

use super::IdentResult;

/// Fraction of queries whose genuine record sits within the first `n_prime`
/// candidates; `ranks` are zero-based.
pub fn hit_rate(ranks: &[usize], n_prime: usize) -> f64 {
    if ranks.is_empty() {
        return 0.0;
    }
    ranks.iter().filter(|&&r| r < n_prime).count() as f64 / ranks.len() as f64
}

pub fn hit_rate_curve(ranks: &[usize], n_primes: &[usize]) -> Vec<(usize, f64)> {
    n_primes.iter().map(|&n| (n, hit_rate(ranks, n))).collect()
}

/// Mean `N'` over accepted queries; `None` when nothing was accepted.
pub fn avg_exact_computations(results: &[IdentResult]) -> Option<f64> {
    let accepted: Vec<usize> =
        results.iter().filter(|r| r.decision.is_accepted()).map(|r| r.exact_computations).collect();
    (!accepted.is_empty()).then(|| accepted.iter().sum::<usize>() as f64 / accepted.len() as f64)
}

/// Equal error rate for distances (accept when `d <= t`). Sweeps `t` over the
/// pooled scores and interpolates linearly where `FAR - FRR` changes sign.
pub fn eer(genuine: &[u64], impostor: &[u64]) -> Result<f64> {
    if genuine.is_empty() || impostor.is_empty() {
        return Err(Error::EmptyScores);
    }
    let mut g = genuine.to_vec();
    let mut im = impostor.to_vec();
    g.sort_unstable();
    im.sort_unstable();
    let rates = |t: Option<u64>| -> (f64, f64) {
        let (acc_g, acc_i) = match t {
            None => (0, 0),
            Some(t) => (g.partition_point(|&d| d <= t), im.partition_point(|&d| d <= t)),
        };
        (acc_i as f64 / im.len() as f64, 1.0 - acc_g as f64 / g.len() as f64)
    };
    let mut support: Vec<u64> = g.iter().chain(&im).copied().collect();
    support.sort_unstable();
    support.dedup();
    let mut prev = rates(None);
    for t in support {
        let cur = rates(Some(t));
        let (d0, d1) = (prev.0 - prev.1, cur.0 - cur.1);
        if d1 >= 0.0 {
            if d1 == 0.0 || d0 == d1 {
                return Ok((cur.0 + cur.1) / 2.0);
            }
            let lambda = -d0 / (d1 - d0);
            let far = prev.0 + lambda * (cur.0 - prev.0);
            let frr = prev.1 + lambda * (cur.1 - prev.1);
            return Ok((far + frr) / 2.0);
        }
        prev = cur;
    }
    unreachable!("FAR reaches 1 and FRR reaches 0 at the largest threshold")
}

/// Mean and median wall time per score, in microseconds.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Timing {
    pub mean_us: f64,
    pub median_us: f64,
}

impl Timing {
    pub fn from_samples(samples_us: &[f64]) -> Self {
        if samples_us.is_empty() {
            return Self::default();
        }
        let mut s = samples_us.to_vec();
        s.sort_by(f64::total_cmp);
        let mid = s.len() / 2;
        let median_us = if s.len() % 2 == 0 { (s[mid - 1] + s[mid]) / 2.0 } else { s[mid] };
        Self { mean_us: s.iter().sum::<f64>() / s.len() as f64, median_us }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsReport {
    pub hit_rate_curve: Vec<(usize, f64)>,
    pub avg_exact: Option<f64>,
    pub eer: Option<f64>,
    pub exact_timing: Timing,
    pub approx_timing: Timing,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eer_edges() {
        assert_eq!(eer(&[1, 2, 3], &[10, 11]).unwrap(), 0.0);
        assert!((eer(&[1, 2, 3], &[1, 2, 3]).unwrap() - 0.5).abs() < 1e-12);
        assert!((eer(&[5, 5], &[5, 5]).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(eer(&[], &[1]), Err(Error::EmptyScores)));
    }

    #[test]
    fn eer_overlap_interpolates() {
        // t=1: FAR 0, FRR 1/2; t=3: FAR 1/2, FRR 0
        let e = eer(&[1, 3], &[3, 4]).unwrap();
        assert!((e - 0.25).abs() < 1e-12, "{e}");
    }

    #[test]
    fn hit_rate_edges() {
        let ranks = [0, 3, 1, 7];
        assert_eq!(hit_rate(&ranks, 0), 0.0);
        assert_eq!(hit_rate(&ranks, 8), 1.0);
        assert_eq!(hit_rate(&ranks, 2), 0.5);
    }
}
