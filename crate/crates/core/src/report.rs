//! Correlation reports shared by every engine.

use std::fmt::Write as _;

use serde::Serialize;

use crate::{Error, Result};

/// Detectors whose mean intensity falls below this fraction of the brightest
/// detector are left out of the pair average.
pub const EXCLUSION_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic,
    MonteCarlo,
    Oracle,
    Measured,
}

impl std::fmt::Display for Provenance {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Provenance::Analytic => "analytic",
            Provenance::MonteCarlo => "monte-carlo",
            Provenance::Oracle => "oracle",
            Provenance::Measured => "measured",
        })
    }
}

/// `⟨I_i I_j⟩ / (⟨I_i⟩⟨I_j⟩)` for one detector pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairRatio {
    pub i: usize,
    pub j: usize,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationReport {
    /// Output index of every considered detector, parallel to
    /// `intensity_means`.
    pub detectors: Vec<usize>,
    pub intensity_means: Vec<f64>,
    /// Subset of `detectors` that passed the exclusion threshold.
    pub active_detectors: Vec<usize>,
    pub pair_ratios: Vec<PairRatio>,
    pub gbar: f64,
    pub stderr: Option<f64>,
    pub provenance: Provenance,
}

/// Indices (into `means`) of detectors above the relative exclusion threshold.
pub(crate) fn active_indices(means: &[f64]) -> Vec<usize> {
    let brightest = means.iter().copied().fold(0.0f64, f64::max);
    if brightest <= 0.0 {
        return Vec::new();
    }
    (0..means.len())
        .filter(|&k| means[k] >= EXCLUSION_THRESHOLD * brightest)
        .collect()
}

/// `(a, b, ratio)` for positions `a < b`.
type PairEntry = (usize, usize, f64);

/// Pair ratios and their average over the active detectors.
///
/// `ratio(a, b)` receives positions into `means`, never equal.
pub(crate) fn pair_average(
    active: &[usize],
    mut ratio: impl FnMut(usize, usize) -> f64,
) -> Result<(Vec<PairEntry>, f64)> {
    if active.len() < 2 {
        return Err(Error::DegenerateSetup { active: active.len() });
    }
    let mut pairs = Vec::with_capacity(active.len() * (active.len() - 1) / 2);
    for (x, &a) in active.iter().enumerate() {
        for &b in &active[x + 1..] {
            pairs.push((a, b, ratio(a, b)));
        }
    }
    let gbar = pairs.iter().map(|p| p.2).sum::<f64>() / pairs.len() as f64;
    Ok((pairs, gbar))
}

impl CorrelationReport {
    /// Assembles a report from per-detector means and a pair correlator.
    pub(crate) fn assemble(
        detectors: Vec<usize>,
        intensity_means: Vec<f64>,
        provenance: Provenance,
        mut correlator: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let means = intensity_means.clone();
        Self::assemble_ratios(detectors, intensity_means, provenance, |a, b| correlator(a, b) / (means[a] * means[b]))
    }

    /// Like [`Self::assemble`], from the excess `⟨I_a I_b⟩ − ⟨I_a⟩⟨I_b⟩`.
    /// Forming the ratio as `1 + excess / (⟨I_a⟩⟨I_b⟩)` avoids cancellation.
    pub(crate) fn assemble_excess(
        detectors: Vec<usize>,
        intensity_means: Vec<f64>,
        provenance: Provenance,
        mut excess: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let means = intensity_means.clone();
        Self::assemble_ratios(detectors, intensity_means, provenance, |a, b| 1.0 + excess(a, b) / (means[a] * means[b]))
    }

    fn assemble_ratios(
        detectors: Vec<usize>,
        intensity_means: Vec<f64>,
        provenance: Provenance,
        ratio: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let active = active_indices(&intensity_means);
        let (pairs, gbar) = pair_average(&active, ratio)?;
        Ok(Self {
            active_detectors: active.iter().map(|&k| detectors[k]).collect(),
            pair_ratios: pairs
                .into_iter()
                .map(|(a, b, ratio)| PairRatio { i: detectors[a], j: detectors[b], ratio })
                .collect(),
            detectors,
            intensity_means,
            gbar,
            stderr: None,
            provenance,
        })
    }

    /// Ratio for the pair `(i, j)` of output indices, if both were active.
    pub fn ratio(&self, i: usize, j: usize) -> Option<f64> {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.pair_ratios.iter().find(|p| p.i == i && p.j == j).map(|p| p.ratio)
    }

    /// Tab-separated pair table (`i j ratio`) followed by `#`-prefixed
    /// summary lines.
    pub fn to_table(&self) -> String {
        let mut out = String::from("i\tj\tratio\n");
        for p in &self.pair_ratios {
            let _ = writeln!(out, "{}\t{}\t{:.17e}", p.i, p.j, p.ratio);
        }
        let _ = writeln!(out, "# gbar\t{:.17e}", self.gbar);
        match self.stderr {
            Some(s) => {
                let _ = writeln!(out, "# stderr\t{s:.17e}");
            }
            None => out.push_str("# stderr\tnone\n"),
        }
        let _ = writeln!(out, "# provenance\t{}", self.provenance);
        out
    }
}
