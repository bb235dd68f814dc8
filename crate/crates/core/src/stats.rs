//! Goodness-of-fit for outcome histograms.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square test of `counts` against the uniform distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquare {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

pub fn chi_square_uniform(counts: &[u64]) -> ChiSquare {
    assert!(counts.len() >= 2, "need at least two categories");
    let total: u64 = counts.iter().sum();
    let expected = total as f64 / counts.len() as f64;
    let statistic = if total == 0 {
        0.0
    } else {
        counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum()
    };
    let dof = counts.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    ChiSquare {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfectly_uniform() {
        let t = chi_square_uniform(&[25, 25, 25, 25]);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 3);
        assert!((t.p_value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn matches_reference_survival_function() {
        // Reference: scipy.stats.chi2.sf(2.0, 3).
        let t = chi_square_uniform(&[30, 20, 25, 25]);
        assert!((t.statistic - 2.0).abs() < 1e-12);
        assert!((t.p_value - 0.5724067044708798).abs() < 1e-12);
    }

    #[test]
    fn skewed_counts_rejected() {
        assert!(chi_square_uniform(&[1000, 0, 0, 0]).p_value < 1e-6);
    }
}
