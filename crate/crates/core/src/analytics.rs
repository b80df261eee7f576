//! Hour-of-day histograms and crime/density correlation.

use serde::{Deserialize, Serialize};

use crate::trace_io::{CrimeRecord, DensitySample};
use crate::{Error, Result};

/// Rounding slack tolerated before clamping `|r|` to 1.
const CLAMP_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct HourlyHistogram(pub [f64; 24]);

impl Default for HourlyHistogram {
    fn default() -> Self {
        HourlyHistogram([0.0; 24])
    }
}

impl HourlyHistogram {
    pub fn bins(&self) -> &[f64; 24] {
        &self.0
    }

    /// Hour of the largest bin; ties go to the earliest hour.
    pub fn peak_hour(&self) -> u8 {
        let mut best = 0;
        for h in 1..24 {
            if self.0[h] > self.0[best] {
                best = h;
            }
        }
        best as u8
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }
}

/// Unweighted crime counts per hour of day.
pub fn crime_histogram(records: &[CrimeRecord]) -> HourlyHistogram {
    let mut h = HourlyHistogram::default();
    for r in records {
        h.0[r.hour() as usize] += 1.0;
    }
    h
}

/// Summed active-user counts per hour bin.
pub fn density_histogram(samples: &[DensitySample]) -> HourlyHistogram {
    let mut h = HourlyHistogram::default();
    for s in samples {
        h.0[s.hour_bin as usize % 24] += s.count as f64;
    }
    h
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::UndefinedCorrelation("series lengths differ"));
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation("need at least two points"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("constant series"));
    }
    let r = sxy / (sxx.sqrt() * syy.sqrt());
    debug_assert!(r.abs() <= 1.0 + CLAMP_EPS, "pearson out of range: {r}");
    Ok(r.clamp(-1.0, 1.0))
}

/// Average ranks (1-based), ties sharing their mean rank.
fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = avg;
        }
        i = j + 1;
    }
    out
}

/// Spearman rank correlation (Pearson over average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::UndefinedCorrelation("series lengths differ"));
    }
    pearson(&ranks(x), &ranks(y))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub n_bins: usize,
    pub peak_crime_hour: u8,
    pub peak_density_hour: u8,
    pub crime_histogram: HourlyHistogram,
    pub density_histogram: HourlyHistogram,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spearman_r: Option<f64>,
}

pub fn correlation_report(
    crimes: &[CrimeRecord],
    density: &[DensitySample],
) -> Result<CorrelationReport> {
    let c = crime_histogram(crimes);
    let d = density_histogram(density);
    if c.total() == 0.0 {
        return Err(Error::UndefinedCorrelation("crime log is empty"));
    }
    if d.total() == 0.0 {
        return Err(Error::UndefinedCorrelation("density series is empty"));
    }
    Ok(CorrelationReport {
        pearson_r: pearson(&c.0, &d.0)?,
        n_bins: 24,
        peak_crime_hour: c.peak_hour(),
        peak_density_hour: d.peak_hour(),
        crime_histogram: c,
        density_histogram: d,
        spearman_r: None,
    })
}

impl CorrelationReport {
    pub fn with_spearman(mut self) -> Result<Self> {
        self.spearman_r = Some(spearman(
            &self.crime_histogram.0,
            &self.density_histogram.0,
        )?);
        Ok(self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::LocationId;
    use proptest::prelude::*;

    /// Definitional oracle: covariance over product of standard deviations,
    /// each computed from scratch with population normalisation.
    fn oracle(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
        let (mx, my) = (mean(x), mean(y));
        let cov = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>()
            / n;
        let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
        let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
        cov / (sx * sy)
    }

    fn rec(ts: u64) -> CrimeRecord {
        CrimeRecord {
            timestamp: ts,
            location: LocationId(0),
            crime_type: "T".into(),
            severity: 0,
        }
    }

    #[test]
    fn histogram_basics() {
        assert_eq!(crime_histogram(&[]).0, [0.0; 24]);
        let h = crime_histogram(&[rec(23 * 3600), rec(23 * 3600 + 5), rec(86340)]);
        assert_eq!(h.0[23], 3.0);
        assert_eq!(h.peak_hour(), 23);
    }

    #[test]
    fn pearson_identities() {
        let x: Vec<f64> = (0..24)
            .map(|i| (i as f64 * 0.7).sin() + i as f64 * 0.1)
            .collect();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert!((pearson(&x, &x).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&x, &neg).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_three_points() {
        // means 2,2; deviations (-1,0,1) and (-1,1,0): cov sum 1, var sums 2 and 2 -> 1/2
        let r = pearson(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
        assert!((r - 0.5).abs() < 1e-15);
        assert!((oracle(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn pearson_errors() {
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0], &[1.0]).is_err());
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn spearman_monotone_is_one() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| v.powi(3)).collect();
        assert!((spearman(&x, &y).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(ranks(&[3.0, 1.0, 3.0]), vec![2.5, 1.0, 2.5]);
    }

    #[test]
    fn proportional_density_is_perfect() {
        let crimes: Vec<CrimeRecord> = (0..24u64)
            .flat_map(|h| (0..(h % 5 + 1)).map(move |_| rec(h * 3600)))
            .collect();
        let density: Vec<DensitySample> = (0..24u8)
            .map(|h| DensitySample {
                hour_bin: h,
                count: 10 * (h as u64 % 5 + 1),
            })
            .collect();
        let r = correlation_report(&crimes, &density).unwrap();
        assert!((r.pearson_r - 1.0).abs() < 1e-12);
        assert_eq!(r.n_bins, 24);
        assert_eq!(r.peak_crime_hour, 4);
        assert_eq!(r.peak_density_hour, 4);
        assert!(correlation_report(&[], &density).is_err());
    }

    fn vec24() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1e3f64..1e3, 24)
    }

    proptest! {
        #[test]
        fn matches_oracle(x in vec24(), y in vec24()) {
            let r = pearson(&x, &y).unwrap();
            prop_assert!((r - oracle(&x, &y)).abs() < 1e-12);
            prop_assert!(r.abs() <= 1.0);
            prop_assert!((r - pearson(&y, &x).unwrap()).abs() < 1e-15);
        }

        #[test]
        fn affine_invariance(x in vec24(), y in vec24(), a in 0.1f64..10.0, b in -50.0f64..50.0,
                             c in 0.1f64..10.0, d in -50.0f64..50.0, flip_a: bool, flip_c: bool) {
            let a = if flip_a { -a } else { a };
            let c = if flip_c { -c } else { c };
            let xs: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            let ys: Vec<f64> = y.iter().map(|v| c * v + d).collect();
            let sign = (a * c).signum();
            prop_assert!((pearson(&xs, &ys).unwrap() - sign * pearson(&x, &y).unwrap()).abs() < 1e-9);
        }
    }
}
