//! One-sided paired comparisons between policies evaluated on shared seeds.

use statrs::distribution::{ContinuousCDF, StudentsT};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairedTest {
    pub n: usize,
    pub mean_diff: f64,
    pub std_diff: f64,
    pub t: f64,
    /// p-value of the alternative "mean(a - b) < 0".
    pub p_less: f64,
}

impl PairedTest {
    /// Rejects "a >= b" in favour of "a < b" at level `alpha`.
    pub fn less_at(&self, alpha: f64) -> bool {
        self.p_less < alpha
    }

    /// Rejects "a <= b" in favour of "a > b" at level `alpha`.
    pub fn greater_at(&self, alpha: f64) -> bool {
        1.0 - self.p_less < alpha && self.mean_diff > 0.0
    }
}

/// Paired t-test on `a[i] - b[i]`.
pub fn paired_t(a: &[f64], b: &[f64]) -> PairedTest {
    assert_eq!(a.len(), b.len(), "paired samples need equal lengths");
    let n = a.len();
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let (mean_diff, std_diff) = super::metrics::mean_std(diffs.iter().copied());
    if n < 2 || std_diff == 0.0 {
        let p_less = if mean_diff < 0.0 {
            0.0
        } else if mean_diff > 0.0 {
            1.0
        } else {
            0.5
        };
        let t = if mean_diff == 0.0 { 0.0 } else { mean_diff.signum() * f64::INFINITY };
        return PairedTest {
            n,
            mean_diff,
            std_diff,
            t,
            p_less,
        };
    }
    let t = mean_diff / (std_diff / (n as f64).sqrt());
    let dist = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("n >= 2");
    PairedTest {
        n,
        mean_diff,
        std_diff,
        t,
        p_less: dist.cdf(t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clear_difference_is_significant() {
        let a: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
        let b: Vec<f64> = a.iter().enumerate().map(|(i, x)| x + 1.0 + (i % 3) as f64 * 0.1).collect();
        let t = paired_t(&a, &b);
        assert!(t.less_at(0.05));
        assert!(!t.greater_at(0.05));
        assert!(paired_t(&b, &a).greater_at(0.05));
    }

    #[test]
    fn t_statistic_matches_hand_value() {
        // diffs -1, -2, -3: mean -2, sd 1, t = -2 * sqrt(3)
        let t = paired_t(&[0.0, 0.0, 0.0], &[1.0, 2.0, 3.0]);
        assert!((t.t + 2.0 * 3f64.sqrt()).abs() < 1e-12);
        // t_{2} cdf at -3.4641 is 0.03709
        assert!((t.p_less - 0.03709).abs() < 1e-4);
    }

    #[test]
    fn identical_samples() {
        let t = paired_t(&[1.0, 2.0], &[1.0, 2.0]);
        assert_eq!(t.p_less, 0.5);
        assert!(!t.less_at(0.05));
    }
}
