use crate::error::{Error, Result};

pub const DEFAULT_BINS: usize = 10;

/// Running totals for one confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BinTotals {
    pub confidence_sum: f64,
    pub hit_count: usize,
    pub sample_count: usize,
}

/// Equal-width confidence bins over `[0, 1]`. Bin `b` holds confidences in
/// `(b/n, (b+1)/n]`; bin 0 also holds exactly 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityBins {
    bins: Vec<BinTotals>,
}

impl ReliabilityBins {
    pub fn new(n_bins: usize) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Argument("at least one bin is required".into()));
        }
        Ok(ReliabilityBins {
            bins: vec![BinTotals::default(); n_bins],
        })
    }

    pub fn from_totals(bins: Vec<BinTotals>) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::Argument("at least one bin is required".into()));
        }
        if bins.iter().any(|b| b.hit_count > b.sample_count) {
            return Err(Error::Argument("bin has more hits than samples".into()));
        }
        Ok(ReliabilityBins { bins })
    }

    pub fn n_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn totals(&self) -> &[BinTotals] {
        &self.bins
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.sample_count).sum()
    }

    /// Upper edge `(b+1)/n`, computed by division so edges like 0.7 are exact.
    pub fn upper_edge(&self, b: usize) -> f64 {
        (b + 1) as f64 / self.bins.len() as f64
    }

    pub fn lower_edge(&self, b: usize) -> f64 {
        b as f64 / self.bins.len() as f64
    }

    pub fn midpoint(&self, b: usize) -> f64 {
        (b as f64 + 0.5) / self.bins.len() as f64
    }

    pub fn bin_of(&self, confidence: f64) -> usize {
        let n = self.bins.len();
        let mut b = ((confidence * n as f64).ceil() as usize)
            .saturating_sub(1)
            .min(n - 1);
        while b > 0 && confidence <= self.lower_edge(b) {
            b -= 1;
        }
        while b + 1 < n && confidence > self.upper_edge(b) {
            b += 1;
        }
        b
    }

    pub fn record(&mut self, confidence: f64, hit: bool) -> Result<()> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::Argument(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        let b = self.bin_of(confidence);
        let bin = &mut self.bins[b];
        bin.confidence_sum += confidence;
        bin.sample_count += 1;
        bin.hit_count += usize::from(hit);
        Ok(())
    }

    /// Mean confidence per bin; `None` for empty bins.
    pub fn mean_confidence(&self, b: usize) -> Option<f64> {
        let bin = self.bins[b];
        (bin.sample_count > 0).then(|| bin.confidence_sum / bin.sample_count as f64)
    }

    pub fn accuracy(&self, b: usize) -> Option<f64> {
        let bin = self.bins[b];
        (bin.sample_count > 0).then(|| bin.hit_count as f64 / bin.sample_count as f64)
    }

    /// Sample-weighted mean of `|accuracy - confidence|`.
    pub fn ece(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        (0..self.bins.len())
            .filter_map(|b| {
                let gap = (self.accuracy(b)? - self.mean_confidence(b)?).abs();
                Some(self.bins[b].sample_count as f64 / total as f64 * gap)
            })
            .sum()
    }

    /// `c:h:n` triples joined by `;`, with confidence sums in round-trip form.
    pub fn encode(&self) -> String {
        self.bins
            .iter()
            .map(|b| format!("{}:{}:{}", b.confidence_sum, b.hit_count, b.sample_count))
            .collect::<Vec<_>>()
            .join(";")
    }

    pub fn decode(text: &str) -> Result<Self> {
        let bad = || Error::Argument(format!("malformed reliability bins `{text}`"));
        let bins = text
            .split(';')
            .map(|part| {
                let mut it = part.split(':');
                let (c, h, n) = (it.next(), it.next(), it.next());
                match (c, h, n, it.next()) {
                    (Some(c), Some(h), Some(n), None) => Ok(BinTotals {
                        confidence_sum: c.parse().map_err(|_| bad())?,
                        hit_count: h.parse().map_err(|_| bad())?,
                        sample_count: n.parse().map_err(|_| bad())?,
                    }),
                    _ => Err(bad()),
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_totals(bins)
    }
}

/// Binary prediction: class 1 when `p >= 0.5`, confidence `max(p, 1 - p)`.
pub fn binary_confidence(p: f64) -> (bool, f64) {
    (p >= 0.5, p.max(1.0 - p))
}

/// Expected calibration error of binary probabilities against 0/1 labels.
pub fn ece(probs: &[f64], labels: &[bool], n_bins: usize) -> Result<(f64, ReliabilityBins)> {
    if probs.len() != labels.len() {
        return Err(Error::Argument(format!(
            "{} probabilities but {} labels",
            probs.len(),
            labels.len()
        )));
    }
    if probs.is_empty() {
        return Err(Error::Argument("ECE needs at least one prediction".into()));
    }
    let mut bins = ReliabilityBins::new(n_bins)?;
    for (&p, &y) in probs.iter().zip(labels) {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Argument(format!("probability {p} outside [0, 1]")));
        }
        let (class, confidence) = binary_confidence(p);
        bins.record(confidence, class == y)?;
    }
    Ok((bins.ece(), bins))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_three_point_case() {
        let (e, bins) = ece(&[0.9, 0.8, 0.3], &[true, false, false], 10).unwrap();
        assert!((e - 0.4).abs() < 1e-15);
        assert_eq!(bins.totals()[6].sample_count, 1);
        assert_eq!(bins.totals()[7].sample_count, 1);
        assert_eq!(bins.totals()[8].sample_count, 1);
    }

    #[test]
    fn certain_and_correct_is_calibrated() {
        let (e, _) = ece(&[1.0, 0.0, 1.0], &[true, false, true], 10).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn upper_edges_are_closed() {
        let bins = ReliabilityBins::new(10).unwrap();
        assert_eq!(bins.bin_of(0.7), 6);
        assert_eq!(bins.bin_of(0.70000001), 7);
        assert_eq!(bins.bin_of(0.0), 0);
        assert_eq!(bins.bin_of(1.0), 9);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        assert!(matches!(ece(&[0.5], &[], 10), Err(Error::Argument(_))));
    }

    #[test]
    fn encoding_round_trips() {
        let (_, bins) = ece(&[0.91, 0.33, 0.6], &[true, true, false], 5).unwrap();
        assert_eq!(ReliabilityBins::decode(&bins.encode()).unwrap(), bins);
    }
}
