//! Estimating `Ḡ` from recorded detector intensities.
//!
//! The estimator is the plug-in ratio of sample means,
//! `mean(I_i I_j) / (mean(I_i) mean(I_j))`, averaged over active pairs. Its
//! standard error comes from splitting the shots into contiguous batches and
//! taking the spread of the per-batch estimates.

use std::io::BufRead;

use serde::Serialize;

use crate::report::{CorrelationReport, PairRatio, Provenance};
use crate::{Error, Result};

/// Minimum number of shots accepted by [`estimate_gbar_from_records`].
pub const MIN_RECORDS: usize = 100;

/// Number of batches used for the standard error.
pub const BATCHES: usize = 100;

/// One experimental run: the intensity read at every detector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShotRecord {
    pub id: u64,
    pub intensities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GbarEstimate {
    pub gbar: f64,
    pub stderr: f64,
    pub shots: usize,
    pub active_detectors: Vec<usize>,
    pub intensity_means: Vec<f64>,
    pub pair_ratios: Vec<PairRatio>,
}

impl GbarEstimate {
    pub fn into_report(self) -> CorrelationReport {
        CorrelationReport {
            detectors: (0..self.intensity_means.len()).collect(),
            intensity_means: self.intensity_means,
            active_detectors: self.active_detectors,
            pair_ratios: self.pair_ratios,
            gbar: self.gbar,
            stderr: Some(self.stderr),
            provenance: Provenance::Measured,
        }
    }
}

/// Running first and second moments of a block of shots. Accumulators from
/// different blocks merge by summation.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct MomentAccumulator {
    detectors: usize,
    count: usize,
    sum: Vec<f64>,
    /// Row-major `detectors × detectors`, only `a < b` entries used.
    cross: Vec<f64>,
}

impl MomentAccumulator {
    pub(crate) fn new(detectors: usize) -> Self {
        Self { detectors, count: 0, sum: vec![0.0; detectors], cross: vec![0.0; detectors * detectors] }
    }

    pub(crate) fn push(&mut self, intensities: &[f64]) {
        debug_assert_eq!(intensities.len(), self.detectors);
        let m = self.detectors;
        for a in 0..m {
            self.sum[a] += intensities[a];
            for b in a + 1..m {
                self.cross[a * m + b] += intensities[a] * intensities[b];
            }
        }
        self.count += 1;
    }

    pub(crate) fn merge(&mut self, other: &Self) {
        self.count += other.count;
        for (x, y) in self.sum.iter_mut().zip(&other.sum) {
            *x += y;
        }
        for (x, y) in self.cross.iter_mut().zip(&other.cross) {
            *x += y;
        }
    }

    fn means(&self) -> Vec<f64> {
        self.sum.iter().map(|s| s / self.count as f64).collect()
    }

    fn cross_mean(&self, a: usize, b: usize) -> f64 {
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        self.cross[a * self.detectors + b] / self.count as f64
    }

    /// Pools the batches in order and attaches the batch-means standard error.
    pub(crate) fn summarize(batches: &[Self], detectors: Vec<usize>) -> Result<CorrelationReport> {
        let m = detectors.len();
        let mut total = Self::new(m);
        for b in batches {
            total.merge(b);
        }
        if total.count == 0 {
            return Err(Error::InsufficientSamples { got: 0, need: 1 });
        }
        let mut report =
            CorrelationReport::assemble(detectors, total.means(), Provenance::Measured, |a, b| total.cross_mean(a, b))?;

        // active positions within the detector list
        let active: Vec<usize> = report
            .active_detectors
            .iter()
            .map(|d| report.detectors.iter().position(|x| x == d).expect("active detector listed"))
            .collect();
        let estimates: Vec<f64> = batches
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| {
                let means = b.means();
                let mut acc = 0.0;
                let mut pairs = 0usize;
                for (x, &p) in active.iter().enumerate() {
                    for &q in &active[x + 1..] {
                        acc += b.cross_mean(p, q) / (means[p] * means[q]);
                        pairs += 1;
                    }
                }
                acc / pairs as f64
            })
            .collect();
        report.stderr = batch_stderr(&estimates);
        Ok(report)
    }
}

fn batch_stderr(estimates: &[f64]) -> Option<f64> {
    let n = estimates.len();
    if n < 2 || estimates.iter().any(|g| !g.is_finite()) {
        return None;
    }
    let mean = estimates.iter().sum::<f64>() / n as f64;
    let var = estimates.iter().map(|g| (g - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Some((var / n as f64).sqrt())
}

/// Plug-in `Ḡ` estimate with a 100-batch standard error.
pub fn estimate_gbar_from_records(records: &[ShotRecord]) -> Result<GbarEstimate> {
    if records.len() < MIN_RECORDS {
        return Err(Error::InsufficientSamples { got: records.len(), need: MIN_RECORDS });
    }
    let m = records[0].intensities.len();
    for r in records {
        if r.intensities.len() != m {
            return Err(Error::DegenerateData(format!(
                "shot {} has {} intensities, expected {m}",
                r.id,
                r.intensities.len()
            )));
        }
        if r.intensities.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::DegenerateData(format!("shot {} has a negative or non-finite intensity", r.id)));
        }
    }
    let n = records.len();
    let batches: Vec<MomentAccumulator> = (0..BATCHES)
        .map(|b| {
            let mut acc = MomentAccumulator::new(m);
            for r in &records[b * n / BATCHES..(b + 1) * n / BATCHES] {
                acc.push(&r.intensities);
            }
            acc
        })
        .collect();
    let report = match MomentAccumulator::summarize(&batches, (0..m).collect()) {
        Ok(r) => r,
        Err(Error::DegenerateSetup { active }) => {
            return Err(Error::DegenerateData(format!("only {active} detector(s) received light")))
        }
        Err(e) => return Err(e),
    };
    Ok(GbarEstimate {
        gbar: report.gbar,
        stderr: report.stderr.unwrap_or(0.0),
        shots: n,
        active_detectors: report.active_detectors,
        intensity_means: report.intensity_means,
        pair_ratios: report.pair_ratios,
    })
}

/// Records read from delimiter-separated text.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRecords {
    pub labels: Option<Vec<String>>,
    pub records: Vec<ShotRecord>,
    /// Lines dropped for missing, unparsable, negative or extra fields.
    pub rejected: usize,
}

#[derive(Debug, Clone, Copy)]
enum Delimiter {
    Char(char),
    Whitespace,
}

impl Delimiter {
    fn detect(line: &str) -> Self {
        [',', '\t', ';']
            .into_iter()
            .find(|c| line.contains(*c))
            .map_or(Delimiter::Whitespace, Delimiter::Char)
    }

    fn split<'a>(&self, line: &'a str) -> Vec<&'a str> {
        match self {
            Delimiter::Char(c) => line.split(*c).map(str::trim).collect(),
            Delimiter::Whitespace => line.split_whitespace().collect(),
        }
    }
}

/// Parses one shot per line, one column per detector. Blank lines and lines
/// starting with `#` are skipped; a first line with any non-numeric field is
/// taken as a header of detector labels.
pub fn read_records(reader: impl BufRead) -> Result<ParsedRecords> {
    let mut delimiter = None;
    let mut labels = None;
    let mut width = None;
    let mut records = Vec::new();
    let mut rejected = 0;
    let mut data_lines = 0u64;
    for line in reader.lines() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let delim = *delimiter.get_or_insert_with(|| Delimiter::detect(trimmed));
        let fields = delim.split(trimmed);
        let parsed: Option<Vec<f64>> = fields.iter().map(|f| f.parse::<f64>().ok()).collect();
        if width.is_none() {
            match parsed {
                None => {
                    width = Some(fields.len());
                    labels = Some(fields.iter().map(|s| s.to_string()).collect());
                    continue;
                }
                Some(ref v) => width = Some(v.len()),
            }
        }
        let id = data_lines;
        data_lines += 1;
        match parsed {
            Some(v) if Some(v.len()) == width && v.iter().all(|x| x.is_finite() && *x >= 0.0) => {
                records.push(ShotRecord { id, intensities: v })
            }
            _ => rejected += 1,
        }
    }
    Ok(ParsedRecords { labels, records, rejected })
}

pub fn parse_records(text: &str) -> Result<ParsedRecords> {
    read_records(text.as_bytes())
}

impl ParsedRecords {
    /// Delimiter-separated rendering that [`parse_records`] reads back.
    pub fn to_csv(records: &[ShotRecord], labels: Option<&[String]>) -> String {
        let mut out = String::new();
        if let Some(l) = labels {
            out.push_str(&l.join(","));
            out.push('\n');
        }
        for r in records {
            let row: Vec<String> = r.intensities.iter().map(|x| format!("{x:.17e}")).collect();
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn constant(n: usize, values: &[f64]) -> Vec<ShotRecord> {
        (0..n).map(|k| ShotRecord { id: k as u64, intensities: values.to_vec() }).collect()
    }

    #[test]
    fn constant_intensities_are_uncorrelated() {
        let est = estimate_gbar_from_records(&constant(500, &[1.0, 2.5, 0.3])).unwrap();
        assert_abs_diff_eq!(est.gbar, 1.0, epsilon = 1e-12);
        assert!(est.stderr <= 1e-12);
        assert_eq!(est.shots, 500);
    }

    #[test]
    fn anticorrelated_shots() {
        // light leaves through exactly one of two ports each shot
        let recs: Vec<ShotRecord> = (0..1000)
            .map(|k| ShotRecord { id: k, intensities: if k % 2 == 0 { vec![2.0, 0.0] } else { vec![0.0, 2.0] } })
            .collect();
        let est = estimate_gbar_from_records(&recs).unwrap();
        assert_eq!(est.gbar, 0.0);
    }

    #[test]
    fn rescaling_is_invisible() {
        let recs: Vec<ShotRecord> = (0..400)
            .map(|k| {
                let x = (k as f64 * 0.37).sin().abs();
                ShotRecord { id: k, intensities: vec![x, 1.0 - 0.5 * x, (k % 7) as f64] }
            })
            .collect();
        let scaled: Vec<ShotRecord> = recs
            .iter()
            .map(|r| ShotRecord { id: r.id, intensities: r.intensities.iter().map(|x| 7.3 * x).collect() })
            .collect();
        let a = estimate_gbar_from_records(&recs).unwrap();
        let b = estimate_gbar_from_records(&scaled).unwrap();
        assert_abs_diff_eq!(a.gbar, b.gbar, epsilon = 1e-12);
        assert_abs_diff_eq!(a.stderr, b.stderr, epsilon = 1e-12);
    }

    #[test]
    fn estimation_errors() {
        assert!(matches!(
            estimate_gbar_from_records(&constant(99, &[1.0, 1.0])),
            Err(Error::InsufficientSamples { got: 99, need: 100 })
        ));
        assert!(matches!(
            estimate_gbar_from_records(&constant(200, &[1.0, 0.0])),
            Err(Error::DegenerateData(_))
        ));
        let mut bad = constant(200, &[1.0, 1.0]);
        bad[3].intensities.pop();
        assert!(matches!(estimate_gbar_from_records(&bad), Err(Error::DegenerateData(_))));
    }

    #[test]
    fn parse_with_header_and_rejects() {
        let text = "# lab run 7\nd1,d2,d3\n1,2,3\n4,,6\n7,8,9\n1,2\n-1,0,0\n\n0.5, 0.25 ,1e-3\n";
        let p = parse_records(text).unwrap();
        assert_eq!(p.labels.as_deref(), Some(&["d1".to_string(), "d2".into(), "d3".into()][..]));
        assert_eq!(p.records.len(), 3);
        assert_eq!(p.rejected, 3);
        assert_eq!(p.records[2].intensities, vec![0.5, 0.25, 1e-3]);
        assert_eq!(p.records[1].id, 2);
    }

    #[test]
    fn parse_whitespace_and_tabs() {
        let p = parse_records("1 2\n3   4\n").unwrap();
        assert!(p.labels.is_none());
        assert_eq!(p.records[1].intensities, vec![3.0, 4.0]);
        let p = parse_records("a\tb\n1\t2\n").unwrap();
        assert_eq!(p.records.len(), 1);
    }

    #[test]
    fn csv_round_trip() {
        let recs = vec![ShotRecord { id: 0, intensities: vec![0.1, 1.0 / 3.0] }, ShotRecord { id: 1, intensities: vec![2.0, 0.0] }];
        let labels = vec!["a".to_string(), "b".to_string()];
        let p = parse_records(&ParsedRecords::to_csv(&recs, Some(&labels))).unwrap();
        assert_eq!(p.records, recs);
        assert_eq!(p.labels, Some(labels));
    }
}
