//! Thresholds on `Ḡ` and the verdicts drawn from them.
//!
//! * classical minimum over all independent stochastic sources and linear
//!   evolutions, for `N` sources and `M` detectors:
//!   `1 − (N−1)/(N(M−1))` if `N ≤ M`, `1 − 1/M` otherwise;
//! * minimum with `m` identical quantum inputs of parameter `η`:
//!   `1 − (1+η)/M`;
//! * minimum for an interferometer split into two independent blocks:
//!   `1 − (1+η)(m−2)/(m(m−1))`.
//!
//! A value strictly below a threshold certifies the corresponding property.
//! Values at the threshold are attainable and never certify anything.

use serde::{Deserialize, Serialize};

use crate::quantum::QuantumSetup;
use crate::{Error, Result};

/// Number of standard errors a margin must exceed to certify.
pub const DEFAULT_SIGMAS: f64 = 3.0;

fn check_detectors(m: usize) -> Result<()> {
    if m < 2 {
        return Err(Error::InvalidDimension(format!("Ḡ needs at least 2 detectors, got {m}")));
    }
    Ok(())
}

fn check_eta(eta: f64) -> Result<()> {
    if !eta.is_finite() || eta > 1.0 {
        return Err(Error::InvalidStatistics(format!("eta = {eta} is impossible for photon-number statistics")));
    }
    Ok(())
}

/// Lowest `Ḡ` reachable classically with `sources` sources and `detectors`
/// detectors.
pub fn classical_min(sources: usize, detectors: usize) -> Result<f64> {
    check_detectors(detectors)?;
    if sources == 0 {
        return Err(Error::InvalidDimension("at least one source is required".into()));
    }
    let (n, m) = (sources as f64, detectors as f64);
    Ok(if sources <= detectors { 1.0 - (n - 1.0) / (n * (m - 1.0)) } else { 1.0 - 1.0 / m })
}

/// Lowest `Ḡ` for identical inputs of parameter `eta` on every port, reached
/// by the Fourier interferometer.
pub fn symmetric_quantum_min(detectors: usize, eta: f64) -> Result<f64> {
    check_detectors(detectors)?;
    check_eta(eta)?;
    Ok(1.0 - (1.0 + eta) / detectors as f64)
}

/// Lowest `Ḡ` achievable by an `m`-mode interferometer made of two
/// independent blocks, fully monitored, with identical inputs.
pub fn divisibility_threshold(modes: usize, eta: f64) -> Result<f64> {
    check_detectors(modes)?;
    check_eta(eta)?;
    let m = modes as f64;
    Ok(1.0 - (1.0 + eta) * (m - 2.0) / (m * (m - 1.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Classification {
    ClassicalCompatible,
    Nonclassical,
    IndivisibleCertified,
    Inconclusive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WitnessVerdict {
    pub gbar: f64,
    pub threshold: f64,
    /// `threshold − gbar`; positive means below the threshold.
    pub margin: f64,
    pub stderr: Option<f64>,
    pub classification: Classification,
    /// `margin / stderr`, when a nonzero standard error is known.
    pub confidence_sigmas: Option<f64>,
}

impl WitnessVerdict {
    pub fn certified(&self) -> bool {
        matches!(self.classification, Classification::Nonclassical | Classification::IndivisibleCertified)
    }

    /// One-line human-readable summary.
    pub fn summary(&self) -> String {
        let what = match self.classification {
            Classification::ClassicalCompatible => "compatible with the bound",
            Classification::Nonclassical => "NONCLASSICAL",
            Classification::IndivisibleCertified => "INDIVISIBLE",
            Classification::Inconclusive => "inconclusive",
        };
        let sigma = match (self.stderr, self.confidence_sigmas) {
            (Some(se), Some(k)) => format!(" ± {se:.3e} ({k:+.2} σ)"),
            (Some(se), None) => format!(" ± {se:.3e}"),
            _ => String::new(),
        };
        format!("Ḡ = {:.6}{sigma} vs threshold {:.6}: {what} (margin {:+.6})", self.gbar, self.threshold, self.margin)
    }
}

/// Margins up to this size count as sitting on the threshold, so values that
/// reproduce a bound up to round-off are never certified.
pub const BOUNDARY_TOLERANCE: f64 = 1e-12;

/// Statistical rule for certifying from noisy estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WitnessRule {
    pub sigmas: f64,
}

impl Default for WitnessRule {
    fn default() -> Self {
        Self { sigmas: DEFAULT_SIGMAS }
    }
}

impl WitnessRule {
    /// Compares `gbar` against `threshold`; `positive` is the classification
    /// used when the value is convincingly below it.
    pub fn judge(&self, gbar: f64, threshold: f64, stderr: Option<f64>, positive: Classification) -> WitnessVerdict {
        let margin = threshold - gbar;
        // a zero standard error carries no uncertainty and falls back to the exact rule
        let stderr = stderr.filter(|s| s.is_finite());
        let noisy = stderr.filter(|s| *s > 0.0);
        let classification = match noisy {
            Some(se) if margin.abs() <= self.sigmas * se => Classification::Inconclusive,
            _ if margin > BOUNDARY_TOLERANCE => positive,
            _ => Classification::ClassicalCompatible,
        };
        WitnessVerdict {
            gbar,
            threshold,
            margin,
            stderr,
            classification,
            confidence_sigmas: noisy.map(|se| margin / se),
        }
    }

    pub fn nonclassicality(&self, gbar: f64, sources: usize, detectors: usize, stderr: Option<f64>) -> Result<WitnessVerdict> {
        let threshold = classical_min(sources, detectors)?;
        Ok(self.judge(gbar, threshold, stderr, Classification::Nonclassical))
    }

    pub fn divisibility(&self, gbar: f64, modes: usize, eta: f64, stderr: Option<f64>) -> Result<WitnessVerdict> {
        if eta < 0.0 {
            return Err(Error::Precondition(format!(
                "divisibility criterion requires inputs with eta >= 0, got {eta}"
            )));
        }
        let threshold = divisibility_threshold(modes, eta)?;
        Ok(self.judge(gbar, threshold, stderr, Classification::IndivisibleCertified))
    }
}

/// Tests `gbar` against the classical minimum with the default 3σ rule.
pub fn nonclassicality_witness(gbar: f64, sources: usize, detectors: usize, stderr: Option<f64>) -> Result<WitnessVerdict> {
    WitnessRule::default().nonclassicality(gbar, sources, detectors, stderr)
}

/// Tests `gbar` against the divisibility threshold with the default 3σ rule.
pub fn divisibility_witness(gbar: f64, modes: usize, eta: f64, stderr: Option<f64>) -> Result<WitnessVerdict> {
    WitnessRule::default().divisibility(gbar, modes, eta, stderr)
}

/// Common `η` of a setup whose inputs are all the same statistics.
pub fn symmetric_eta(setup: &QuantumSetup) -> Result<f64> {
    let stats = setup.stats();
    let first = &stats[0];
    if stats.iter().any(|q| q != first) {
        return Err(Error::Precondition("inputs are not identical on every port".into()));
    }
    first.eta()
}

/// Runs the divisibility witness on a quantum setup, refusing configurations
/// outside the criterion's scope (partial monitoring, non-identical inputs,
/// `η < 0`).
pub fn divisibility_witness_for(setup: &QuantumSetup, rule: &WitnessRule) -> Result<WitnessVerdict> {
    if !setup.monitors_all_outputs() {
        return Err(Error::Precondition("divisibility criterion requires every output to be monitored".into()));
    }
    let eta = symmetric_eta(setup)?;
    let report = setup.gbar()?;
    if report.active_detectors.len() != setup.modes() {
        return Err(Error::Precondition("divisibility criterion requires every output to receive light".into()));
    }
    rule.divisibility(report.gbar, setup.modes(), eta, None)
}
