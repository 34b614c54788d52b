use crate::error::{Error, Result};

/// Binary predictive entropy in nats, with `0 ln 0 = 0`.
pub fn predictive_entropy(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Argument(format!("probability {p} outside [0, 1]")));
    }
    let term = |q: f64| if q > 0.0 { -q * q.ln() } else { 0.0 };
    Ok(term(p) + term(1.0 - p))
}

/// Counts of `values` in `bins` equal-width intervals over `[lo, hi]`;
/// values outside the range are dropped.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Vec<usize> {
    let mut counts = vec![0; bins];
    if bins == 0 || hi <= lo {
        return counts;
    }
    for &v in values {
        if v < lo || v > hi || !v.is_finite() {
            continue;
        }
        let b = (((v - lo) / (hi - lo)) * bins as f64) as usize;
        counts[b.min(bins - 1)] += 1;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entropy_fixtures() {
        assert!((predictive_entropy(0.5).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(predictive_entropy(0.0).unwrap(), 0.0);
        assert_eq!(predictive_entropy(1.0).unwrap(), 0.0);
        assert!((predictive_entropy(0.75).unwrap() - 0.562335144618).abs() < 1e-10);
        assert!(predictive_entropy(1.5).is_err());
    }

    #[test]
    fn histogram_drops_out_of_range_values() {
        assert_eq!(
            histogram(&[0.05, 0.1, 0.55, 1.0, 1.2], 0.1, 1.0, 3),
            vec![1, 1, 1]
        );
    }
}
