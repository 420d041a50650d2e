use super::ProtocolError;

/// Nearest-rank quantile: the `⌈q·n⌉`-th smallest error.
pub fn q_quantile(errors: &[f64], q: f64) -> Result<f64, ProtocolError> {
    if errors.is_empty() {
        return Err(ProtocolError::EmptyInput);
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(ProtocolError::BadQuantile(q));
    }
    let n = errors.len();
    // q·n is a rational with a small denominator; the slack absorbs rounding.
    let rank = ((q * n as f64 - 1e-9).ceil() as usize).clamp(1, n);
    let mut sorted = errors.to_vec();
    let (_, v, _) = sorted.select_nth_unstable_by(rank - 1, f64::total_cmp);
    Ok(*v)
}

/// Relative improvement `1 − after / initial`.
pub fn gain(q90_initial: f64, q90_after: f64) -> Result<f64, ProtocolError> {
    if !(q90_initial > 0.0) {
        return Err(ProtocolError::ZeroInitialError);
    }
    Ok(1.0 - q90_after / q90_initial)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use rand::Rng;

    /// Smallest value whose count of `≤` elements reaches `percent/100 · n`.
    fn scan_oracle(errors: &[f64], percent: usize) -> f64 {
        let n = errors.len();
        let mut best = f64::INFINITY;
        for &v in errors {
            let count = errors.iter().filter(|&&x| x <= v).count();
            if count * 100 >= percent * n && v < best {
                best = v;
            }
        }
        best
    }

    #[test]
    fn examples() {
        let e: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(q_quantile(&e, 0.9).unwrap(), 9.0);
        assert_eq!(q_quantile(&[4.2], 0.3).unwrap(), 4.2);
        assert_eq!(q_quantile(&[4.2], 1.0).unwrap(), 4.2);
        assert!(matches!(q_quantile(&[], 0.9), Err(ProtocolError::EmptyInput)));
        assert!(q_quantile(&[1.0], 0.0).is_err());
    }

    #[test]
    fn matches_scan_oracle() {
        let mut rng = seed::rng(77);
        for _ in 0..200 {
            let n = rng.random_range(1..60);
            let v: Vec<f64> = (0..n).map(|_| f64::from(rng.random_range(0u8..15))).collect();
            for p in [10, 50, 90, 99, 100] {
                assert_eq!(q_quantile(&v, p as f64 / 100.0).unwrap(), scan_oracle(&v, p));
            }
        }
        let v: Vec<f64> = (0..25).map(|_| rng.random_range(0.0..20.0)).collect();
        assert_eq!(q_quantile(&v, 0.9).unwrap(), scan_oracle(&v, 90));
    }

    #[test]
    fn gain_values() {
        assert!((gain(10.0, 8.0).unwrap() - 0.2).abs() < 1e-15);
        assert_eq!(gain(10.0, 10.0).unwrap(), 0.0);
        assert!(matches!(gain(0.0, 1.0), Err(ProtocolError::ZeroInitialError)));
    }
}
