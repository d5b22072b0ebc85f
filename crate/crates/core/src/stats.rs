//! Small order-statistic helpers shared across modules.

/// Median with the mean-of-middles convention for even sizes.
///
/// Returns `None` on empty input. NaNs are not expected and sort last.
pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    Some(median_of_sorted(&sorted))
}

pub fn median_of_sorted(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample standard deviation (n - 1 denominator); zero for fewer than two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let m = values.iter().sum::<f64>() / n as f64;
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (n - 1) as f64).sqrt()
}

/// Histogram of small non-negative integer counts, used to take medians over
/// large multisets of zero counts without materialising them.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CountHistogram {
    bins: Vec<u64>,
    total: u64,
}

impl CountHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, value: u32, multiplicity: u64) {
        let v = value as usize;
        if self.bins.len() <= v {
            self.bins.resize(v + 1, 0);
        }
        self.bins[v] += multiplicity;
        self.total += multiplicity;
    }

    pub fn merge(&mut self, other: &CountHistogram) {
        if self.bins.len() < other.bins.len() {
            self.bins.resize(other.bins.len(), 0);
        }
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += *b;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Value of the k-th order statistic (0-based).
    fn order_stat(&self, k: u64) -> u32 {
        let mut seen = 0;
        for (v, &c) in self.bins.iter().enumerate() {
            seen += c;
            if seen > k {
                return v as u32;
            }
        }
        unreachable!("order statistic {k} out of range {}", self.total)
    }

    pub fn median(&self) -> Option<f64> {
        let n = self.total;
        if n == 0 {
            return None;
        }
        if n % 2 == 1 {
            Some(self.order_stat(n / 2) as f64)
        } else {
            let lo = self.order_stat(n / 2 - 1) as f64;
            let hi = self.order_stat(n / 2) as f64;
            Some(0.5 * (lo + hi))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn odd_and_even_medians() {
        assert_eq!(median(&[4.0, 5.0, 6.0, 6.0, 7.0]), Some(6.0));
        assert_eq!(median(&[4.0, 6.0]), Some(5.0));
        assert_eq!(median(&[]), None);
    }

    #[test]
    fn sample_sd_known_value() {
        let sd = sample_sd(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert!((sd - 2.138_089_935_299_395).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn histogram_median_matches_sort(values in proptest::collection::vec(0u32..40, 1..200)) {
            let mut h = CountHistogram::new();
            for &v in &values {
                h.add(v, 1);
            }
            let as_f: Vec<f64> = values.iter().map(|&v| v as f64).collect();
            prop_assert_eq!(h.median(), median(&as_f));
        }
    }
}
