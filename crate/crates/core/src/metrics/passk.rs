use super::MetricsError;

fn binomial(n: usize, k: usize) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

const EXACT_LIMIT: u128 = 1 << 53;

/// Unbiased pass@k: `1 - C(n-c, k) / C(n, k)`.
///
/// When both binomials are exactly representable the result is a single
/// correctly rounded division; otherwise the product form
/// `1 - prod_{i=n-c+1}^{n} (1 - k/i)` is used.
pub fn pass_at_k(n: usize, c: usize, k: usize) -> Result<f64, MetricsError> {
    if c > n || k == 0 || k > n {
        return Err(MetricsError::InvalidPassAtK { n, c, k });
    }
    if n - c < k {
        return Ok(1.0);
    }
    if let (Some(total), Some(miss)) = (binomial(n, k), binomial(n - c, k)) {
        if total < EXACT_LIMIT {
            return Ok((total - miss) as f64 / total as f64);
        }
    }
    let miss: f64 = ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product();
    Ok(1.0 - miss)
}

/// Mean pass@k over tasks given `(n, c)` per task.
pub fn mean_pass_at_k(tasks: &[(usize, usize)], k: usize) -> Result<f64, MetricsError> {
    if tasks.is_empty() {
        return Err(MetricsError::NoSamples);
    }
    let mut total = 0.0;
    for &(n, c) in tasks {
        total += pass_at_k(n, c, k)?;
    }
    Ok(total / tasks.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(pass_at_k(1, 1, 1).unwrap(), 1.0);
        assert_eq!(pass_at_k(2, 1, 1).unwrap(), 0.5);
        assert_eq!(pass_at_k(5, 2, 5).unwrap(), 1.0);
        assert_eq!(pass_at_k(10, 0, 3).unwrap(), 0.0);
    }

    #[test]
    fn invalid_inputs() {
        assert!(pass_at_k(3, 4, 1).is_err());
        assert!(pass_at_k(3, 1, 0).is_err());
        assert!(pass_at_k(3, 1, 4).is_err());
        assert!(mean_pass_at_k(&[], 1).is_err());
    }

    #[test]
    fn large_n_uses_product_form() {
        // C(200, 100) overflows the exact path
        let p = pass_at_k(200, 10, 100).unwrap();
        let product: f64 = (191..=200).map(|i| 1.0 - 100.0 / i as f64).product();
        assert!((p - (1.0 - product)).abs() < 1e-15);
        assert!(p > 0.99 && p < 1.0);
    }

    #[test]
    fn product_form_matches_exact_path() {
        for n in 1..40usize {
            for c in 0..=n {
                for k in 1..=n {
                    let exact = pass_at_k(n, c, k).unwrap();
                    let product = if n - c < k {
                        1.0
                    } else {
                        1.0 - ((n - c + 1)..=n).map(|i| 1.0 - k as f64 / i as f64).product::<f64>()
                    };
                    assert!((exact - product).abs() < 1e-12, "{n} {c} {k}");
                }
            }
        }
    }

    #[test]
    fn mean_over_tasks() {
        let m = mean_pass_at_k(&[(2, 1), (2, 2), (2, 0)], 1).unwrap();
        assert!((m - 0.5).abs() < 1e-15);
    }
}
