use serde::{Deserialize, Serialize};

use super::{Checkpoint, HarnessError, Modality, ReplicateRecord};

/// Box-plot statistics of one sample.
///
/// Quantiles use linear interpolation between order statistics (type 7):
/// `h = (n - 1) q`, `Q(q) = x[⌊h⌋] + (h - ⌊h⌋) (x[⌊h⌋ + 1] - x[⌊h⌋])`.
/// Whiskers sit at `Q1 - 1.5 IQR` and `Q3 + 1.5 IQR`, clamped to the data
/// range; outliers are the points strictly outside the whiskers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation (n - 1); 0 when `n == 1`.
    pub std: f64,
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub iqr: f64,
    pub whisker_low: f64,
    pub whisker_high: f64,
    pub outliers: Vec<f64>,
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn box_stats(values: &[f64]) -> Result<BoxStats, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Argument("cannot summarize an empty group".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(HarnessError::Argument("group contains non-finite values".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    let std =
        if n > 1 { (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt() } else { 0.0 };
    let q1 = quantile_sorted(&sorted, 0.25);
    let median = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let iqr = q3 - q1;
    let whisker_low = (q1 - 1.5 * iqr).max(sorted[0]);
    let whisker_high = (q3 + 1.5 * iqr).min(sorted[n - 1]);
    let outliers = sorted.iter().copied().filter(|&v| v < whisker_low || v > whisker_high).collect();
    Ok(BoxStats { n, mean, std, median, q1, q3, iqr, whisker_low, whisker_high, outliers })
}

/// Selects records; `None` fields match everything.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct GroupKey {
    pub layout: Option<String>,
    pub modality: Option<Modality>,
    pub molecule: Option<String>,
    pub checkpoint: Checkpoint,
}

impl GroupKey {
    fn matches(&self, r: &ReplicateRecord) -> bool {
        self.layout.as_ref().is_none_or(|l| *l == r.layout)
            && self.modality.is_none_or(|m| m == r.modality)
            && self.molecule.as_ref().is_none_or(|m| *m == r.molecule)
    }
}

/// Statistics of the kcal/mol deviations of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    /// `*` when pooled over all layouts (likewise for the other keys).
    pub layout: String,
    pub modality: String,
    pub molecule: String,
    pub checkpoint: Checkpoint,
    #[serde(flatten)]
    pub stats: BoxStats,
}

pub fn summarize(records: &[ReplicateRecord], key: &GroupKey) -> Result<StatsSummary, HarnessError> {
    let values: Vec<f64> = records.iter().filter(|r| key.matches(r)).map(|r| r.deviation(key.checkpoint)).collect();
    Ok(StatsSummary {
        layout: key.layout.clone().unwrap_or_else(|| "*".into()),
        modality: key.modality.map_or_else(|| "*".into(), |m| m.to_string()),
        molecule: key.molecule.clone().unwrap_or_else(|| "*".into()),
        checkpoint: key.checkpoint,
        stats: box_stats(&values)?,
    })
}

/// One summary per (layout, modality, molecule, checkpoint), followed by the
/// groups pooled over layouts.
pub fn summarize_all(records: &[ReplicateRecord]) -> Result<Vec<StatsSummary>, HarnessError> {
    let mut layouts: Vec<&str> = Vec::new();
    let mut molecules: Vec<&str> = Vec::new();
    for r in records {
        if !layouts.contains(&r.layout.as_str()) {
            layouts.push(&r.layout);
        }
        if !molecules.contains(&r.molecule.as_str()) {
            molecules.push(&r.molecule);
        }
    }
    layouts.sort_unstable();
    let mut layout_keys: Vec<Option<String>> = layouts.iter().map(|l| Some(l.to_string())).collect();
    layout_keys.push(None);

    let mut out = Vec::new();
    for layout in &layout_keys {
        for modality in [Modality::Parallel, Modality::Serial] {
            for molecule in &molecules {
                for checkpoint in Checkpoint::ALL {
                    let key = GroupKey {
                        layout: layout.clone(),
                        modality: Some(modality),
                        molecule: Some(molecule.to_string()),
                        checkpoint,
                    };
                    if records.iter().any(|r| key.matches(r)) {
                        out.push(summarize(records, &key)?);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_points() {
        let s = box_stats(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!((s.median, s.q1, s.q3, s.iqr), (3.0, 2.0, 4.0, 2.0));
        assert_eq!((s.whisker_low, s.whisker_high), (1.0, 5.0));
        assert!(s.outliers.is_empty());
        assert_eq!(s.mean, 3.0);
        assert!((s.std - 2.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn flat_with_outlier() {
        let s = box_stats(&[1.0, 1.0, 1.0, 1.0, 100.0]).unwrap();
        assert_eq!(s.iqr, 0.0);
        assert_eq!((s.whisker_low, s.whisker_high), (1.0, 1.0));
        assert_eq!(s.outliers, vec![100.0]);
    }

    #[test]
    fn singleton_and_empty() {
        let s = box_stats(&[2.5]).unwrap();
        assert_eq!((s.n, s.mean, s.median, s.std), (1, 2.5, 2.5, 0.0));
        assert!(box_stats(&[]).is_err());
    }

    #[test]
    fn interpolated_quartiles() {
        let s = box_stats(&[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3), (1.75, 2.5, 3.25));
    }
}
