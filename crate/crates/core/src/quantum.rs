//! Quantum photon-statistics model.
//!
//! Each input port carries a phase-averaged state `Σ_n q_α(n) |n⟩⟨n|` in a
//! shared pulse mode, and the output modes are `b̂_i = Σ_α U_{iα} â_α`. For
//! such product states
//!
//! ```text
//! ⟨Î_i⟩     = 𝓔 Σ_α |U_{iα}|² ⟨n̂_α⟩
//! ⟨Î_i Î_j⟩ = ⟨Î_i⟩⟨Î_j⟩
//!           + 𝓔² Σ_{α≠β} U_{iα} U*_{iβ} U_{jβ} U*_{jα} ⟨n̂_α⟩⟨n̂_β⟩
//!           + 𝓔² Σ_α |U_{iα}|² |U_{jα}|² (Var n̂_α − ⟨n̂_α⟩)
//! ```
//!
//! The `− ⟨n̂_α⟩` term, absent classically, comes from `⟨n|â†²â²|n⟩ = n(n−1)`.
//! [`FockOracle`] evaluates the same expectation values by acting with the
//! output operators on explicit number states.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::interferometer::UnitaryMatrix;
use crate::par::Execution;
use crate::report::{CorrelationReport, Provenance};
use crate::sources::PhotonStatistics;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct QuantumSetup {
    unitary: UnitaryMatrix,
    stats: Vec<PhotonStatistics>,
    detectors: Vec<usize>,
    energy_scale: f64,
    /// `(⟨n̂⟩, Var n̂)` per input port.
    moments: Vec<(f64, f64)>,
}

impl QuantumSetup {
    /// All outputs monitored. Ports beyond `stats.len()` receive vacuum.
    pub fn new(unitary: UnitaryMatrix, mut stats: Vec<PhotonStatistics>) -> Result<Self> {
        let m = unitary.dim();
        if stats.len() > m {
            return Err(Error::InvalidDimension(format!(
                "{} input states for a {m}-mode interferometer",
                stats.len()
            )));
        }
        stats.resize(m, PhotonStatistics::vacuum());
        let moments = stats.iter().map(|q| (q.mean(), q.variance())).collect();
        Ok(Self { unitary, stats, detectors: (0..m).collect(), energy_scale: 1.0, moments })
    }

    /// Restricts the monitored outputs.
    pub fn with_detectors(mut self, detectors: Vec<usize>) -> Result<Self> {
        let m = self.unitary.dim();
        for (k, &d) in detectors.iter().enumerate() {
            if d >= m {
                return Err(Error::IndexOutOfRange { index: d, len: m });
            }
            if detectors[..k].contains(&d) {
                return Err(Error::Precondition(format!("detector {d} listed twice")));
            }
        }
        if detectors.len() < 2 {
            return Err(Error::DegenerateSetup { active: detectors.len() });
        }
        self.detectors = detectors;
        Ok(self)
    }

    pub fn with_energy_scale(mut self, energy_scale: f64) -> Result<Self> {
        if !(energy_scale.is_finite() && energy_scale > 0.0) {
            return Err(Error::Precondition(format!("energy scale must be positive, got {energy_scale}")));
        }
        self.energy_scale = energy_scale;
        Ok(self)
    }

    pub fn unitary(&self) -> &UnitaryMatrix {
        &self.unitary
    }

    pub fn stats(&self) -> &[PhotonStatistics] {
        &self.stats
    }

    pub fn detectors(&self) -> &[usize] {
        &self.detectors
    }

    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    pub fn modes(&self) -> usize {
        self.unitary.dim()
    }

    pub fn monitors_all_outputs(&self) -> bool {
        self.detectors.len() == self.modes()
    }

    /// Number of non-vacuum inputs.
    pub fn active_sources(&self) -> usize {
        self.moments.iter().filter(|(n, _)| *n > 0.0).count()
    }

    fn mean_at(&self, i: usize) -> f64 {
        let s: f64 = self
            .moments
            .iter()
            .enumerate()
            .map(|(a, (n, _))| self.unitary.get(i, a).norm_sqr() * n)
            .sum();
        self.energy_scale * s
    }

    /// `⟨Î_i⟩` for every monitored output, in monitoring order.
    pub fn intensity_means(&self) -> Vec<f64> {
        self.detectors.iter().map(|&i| self.mean_at(i)).collect()
    }

    /// `⟨Î_i Î_j⟩` for two distinct monitored outputs.
    pub fn pair_correlator(&self, i: usize, j: usize) -> Result<f64> {
        let m = self.modes();
        for idx in [i, j] {
            if idx >= m {
                return Err(Error::IndexOutOfRange { index: idx, len: m });
            }
            if !self.detectors.contains(&idx) {
                return Err(Error::Precondition(format!("output {idx} is not monitored")));
            }
        }
        if i == j {
            return Err(Error::Precondition("pair correlator needs two distinct detectors".into()));
        }
        Ok(self.correlator_unchecked(i, j))
    }

    fn correlator_unchecked(&self, i: usize, j: usize) -> f64 {
        self.mean_at(i) * self.mean_at(j) + self.excess_unchecked(i, j)
    }

    /// `⟨Î_i Î_j⟩ − ⟨Î_i⟩⟨Î_j⟩`.
    fn excess_unchecked(&self, i: usize, j: usize) -> f64 {
        let u = &self.unitary;
        let m = self.modes();
        let w: Vec<Complex64> = (0..m).map(|a| u.get(i, a) * u.get(j, a).conj()).collect();
        let mut interference = 0.0;
        let mut quantized = 0.0;
        for a in 0..m {
            let (na, var_a) = self.moments[a];
            quantized += w[a].norm_sqr() * (var_a - na);
            if na == 0.0 {
                continue;
            }
            for b in 0..m {
                if b != a {
                    interference += (w[a] * w[b].conj()).re * na * self.moments[b].0;
                }
            }
        }
        let e2 = self.energy_scale * self.energy_scale;
        e2 * (interference + quantized)
    }

    /// Closed-form `Ḡ` over the monitored outputs that receive light.
    pub fn gbar(&self) -> Result<CorrelationReport> {
        let dets = self.detectors.clone();
        CorrelationReport::assemble_excess(dets.clone(), self.intensity_means(), Provenance::Analytic, |a, b| {
            self.excess_unchecked(dets[a], dets[b])
        })
    }
}

/// Default photon budget for [`FockOracle`].
pub const DEFAULT_ORACLE_LIMIT: usize = 6;

/// Joint probability below which product configurations are skipped.
pub const DEFAULT_PRUNE: f64 = 1e-14;

type FockState = BTreeMap<Vec<u8>, Complex64>;

/// An occupation pattern with its joint probability.
type Weighted = (Vec<usize>, f64);

/// Brute-force evaluation of intensity moments on number states.
#[derive(Debug, Clone, Copy)]
pub struct FockOracle {
    pub limit: usize,
    pub energy_scale: f64,
    pub prune: f64,
    pub execution: Execution,
}

impl Default for FockOracle {
    fn default() -> Self {
        Self { limit: DEFAULT_ORACLE_LIMIT, energy_scale: 1.0, prune: DEFAULT_PRUNE, execution: Execution::default() }
    }
}

/// Oracle value averaged over a product distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleAverage {
    pub value: f64,
    /// Total probability of the skipped configurations.
    pub pruned_mass: f64,
}

fn lower(u: &UnitaryMatrix, output: usize, state: &FockState) -> FockState {
    let mut out = FockState::new();
    for (occ, amp) in state {
        for (a, &n) in occ.iter().enumerate() {
            if n == 0 {
                continue;
            }
            let coeff = u.get(output, a) * (n as f64).sqrt();
            if coeff == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut next = occ.clone();
            next[a] -= 1;
            *out.entry(next).or_insert(Complex64::new(0.0, 0.0)) += amp * coeff;
        }
    }
    out
}

fn norm_sqr(state: &FockState) -> f64 {
    state.values().map(|z| z.norm_sqr()).sum()
}

impl FockOracle {
    fn number_state(&self, u: &UnitaryMatrix, occupation: &[usize]) -> Result<FockState> {
        if occupation.len() != u.dim() {
            return Err(Error::InvalidDimension(format!(
                "occupation lists {} modes, interferometer has {}",
                occupation.len(),
                u.dim()
            )));
        }
        let photons: usize = occupation.iter().sum();
        if photons > self.limit {
            return Err(Error::OracleLimit { photons, limit: self.limit });
        }
        let key = occupation.iter().map(|&n| n as u8).collect();
        Ok(FockState::from([(key, Complex64::new(1.0, 0.0))]))
    }

    fn check_output(u: &UnitaryMatrix, i: usize) -> Result<()> {
        if i >= u.dim() {
            return Err(Error::IndexOutOfRange { index: i, len: u.dim() });
        }
        Ok(())
    }

    /// `𝓔 ‖b̂_i |n⃗⟩‖²`.
    pub fn intensity(&self, u: &UnitaryMatrix, occupation: &[usize], i: usize) -> Result<f64> {
        Self::check_output(u, i)?;
        let state = self.number_state(u, occupation)?;
        Ok(self.energy_scale * norm_sqr(&lower(u, i, &state)))
    }

    /// `𝓔² ‖b̂_i b̂_j |n⃗⟩‖² = 𝓔² ⟨n⃗| b̂_i† b̂_j† b̂_i b̂_j |n⃗⟩`.
    pub fn pair_correlator(&self, u: &UnitaryMatrix, occupation: &[usize], i: usize, j: usize) -> Result<f64> {
        Self::check_output(u, i)?;
        Self::check_output(u, j)?;
        if i == j {
            return Err(Error::Precondition("pair correlator needs two distinct detectors".into()));
        }
        let state = self.number_state(u, occupation)?;
        let lowered = lower(u, i, &lower(u, j, &state));
        Ok(self.energy_scale * self.energy_scale * norm_sqr(&lowered))
    }

    /// Product configurations of `stats` with joint probability at least
    /// `prune`, in lexicographic order, plus the skipped mass.
    fn configurations(&self, stats: &[PhotonStatistics]) -> Result<(Vec<Weighted>, f64)> {
        let mut out = Vec::new();
        let mut pruned = 0.0;
        let mut current = Vec::with_capacity(stats.len());
        self.enumerate(stats, 1.0, &mut current, &mut out, &mut pruned)?;
        Ok((out, pruned))
    }

    fn enumerate(
        &self,
        stats: &[PhotonStatistics],
        weight: f64,
        current: &mut Vec<usize>,
        out: &mut Vec<(Vec<usize>, f64)>,
        pruned: &mut f64,
    ) -> Result<()> {
        let depth = current.len();
        if depth == stats.len() {
            let photons: usize = current.iter().sum();
            if photons > self.limit {
                return Err(Error::OracleLimit { photons, limit: self.limit });
            }
            out.push((current.clone(), weight));
            return Ok(());
        }
        for (n, &p) in stats[depth].pmf().iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let w = weight * p;
            if w < self.prune {
                *pruned += w;
                continue;
            }
            current.push(n);
            self.enumerate(stats, w, current, out, pruned)?;
            current.pop();
        }
        Ok(())
    }

    /// Pair correlator for mixed product inputs, averaged over the joint
    /// photon-number distribution.
    pub fn mixed_pair_correlator(
        &self,
        u: &UnitaryMatrix,
        stats: &[PhotonStatistics],
        i: usize,
        j: usize,
    ) -> Result<OracleAverage> {
        let (configs, pruned_mass) = self.configurations(stats)?;
        let values = self
            .execution
            .map_indexed(configs.len(), |k| self.pair_correlator(u, &configs[k].0, i, j).map(|v| v * configs[k].1));
        let mut value = 0.0;
        for v in values {
            value += v?;
        }
        Ok(OracleAverage { value, pruned_mass })
    }

    /// `Ḡ` of a quantum setup evaluated entirely with the oracle.
    pub fn gbar(&self, setup: &QuantumSetup) -> Result<(CorrelationReport, f64)> {
        let oracle = FockOracle { energy_scale: setup.energy_scale(), ..*self };
        let u = setup.unitary();
        let dets = setup.detectors();
        let d = dets.len();
        let (configs, pruned_mass) = oracle.configurations(setup.stats())?;
        let per_config = oracle.execution.map_indexed(configs.len(), |k| -> Result<(Vec<f64>, Vec<f64>)> {
            let occ = &configs[k].0;
            let means = dets.iter().map(|&i| oracle.intensity(u, occ, i)).collect::<Result<Vec<_>>>()?;
            let mut cross = vec![0.0; d * d];
            for a in 0..d {
                for b in a + 1..d {
                    cross[a * d + b] = oracle.pair_correlator(u, occ, dets[a], dets[b])?;
                }
            }
            Ok((means, cross))
        });
        let mut means = vec![0.0; d];
        let mut cross = vec![0.0; d * d];
        for (k, item) in per_config.into_iter().enumerate() {
            let (m, c) = item?;
            let w = configs[k].1;
            means.iter_mut().zip(&m).for_each(|(x, y)| *x += w * y);
            cross.iter_mut().zip(&c).for_each(|(x, y)| *x += w * y);
        }
        let report = CorrelationReport::assemble(dets.to_vec(), means, Provenance::Oracle, |a, b| {
            cross[a.min(b) * d + a.max(b)]
        })?;
        Ok((report, pruned_mass))
    }
}

/// [`FockOracle::pair_correlator`] with the default photon budget and
/// `𝓔 = 1`.
pub fn fock_oracle_pair_correlator(u: &UnitaryMatrix, occupation: &[usize], i: usize, j: usize) -> Result<f64> {
    FockOracle::default().pair_correlator(u, occupation, i, j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classical::ClassicalSetup;
    use crate::interferometer::{direct_sum, ftm, random_unitary};
    use crate::sources::ClassicalSource;
    use approx::assert_abs_diff_eq;

    fn fock(ns: &[usize]) -> Vec<PhotonStatistics> {
        ns.iter().map(|&n| PhotonStatistics::fock(n)).collect()
    }

    #[test]
    fn hom_dip() {
        let s = QuantumSetup::new(ftm(2).unwrap(), fock(&[1, 1])).unwrap();
        let means = s.intensity_means();
        assert_abs_diff_eq!(means[0], 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.pair_correlator(0, 1).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.gbar().unwrap().gbar, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn single_photon_cannot_fire_two_detectors() {
        let s = QuantumSetup::new(ftm(2).unwrap(), fock(&[1])).unwrap();
        assert_abs_diff_eq!(s.pair_correlator(0, 1).unwrap(), 0.0, epsilon = 1e-15);
        assert_eq!(fock_oracle_pair_correlator(&ftm(2).unwrap(), &[1, 0], 0, 1).unwrap(), 0.0);
        assert!(fock_oracle_pair_correlator(&ftm(2).unwrap(), &[1, 1], 0, 1).unwrap() < 1e-30);
    }

    #[test]
    fn identity_means() {
        let s = QuantumSetup::new(UnitaryMatrix::identity(2).unwrap(), fock(&[2, 0])).unwrap();
        assert_eq!(s.intensity_means(), vec![2.0, 0.0]);
    }

    #[test]
    fn coherent_matches_classical() {
        let u = ftm(2).unwrap();
        let q = QuantumSetup::new(u.clone(), vec![PhotonStatistics::coherent(1.0, 30).unwrap(); 2]).unwrap();
        let c = ClassicalSetup::new(u.into_complex(), vec![ClassicalSource::fixed(1.0).unwrap(); 2]).unwrap();
        assert_abs_diff_eq!(q.pair_correlator(0, 1).unwrap(), c.pair_correlator(0, 1).unwrap(), epsilon = 1e-12);
        let (qm, cm) = (q.intensity_means(), c.intensity_means());
        assert_abs_diff_eq!(qm[1], cm[1], epsilon = 1e-12);
    }

    #[test]
    fn symmetric_minimum() {
        for m in 2..=8 {
            let u = ftm(m).unwrap();
            let single = QuantumSetup::new(u.clone(), fock(&vec![1; m])).unwrap();
            assert_abs_diff_eq!(single.gbar().unwrap().gbar, 1.0 - 2.0 / m as f64, epsilon = 1e-12);
            let thermal = QuantumSetup::new(u, vec![PhotonStatistics::thermal(1.0, 60).unwrap(); m]).unwrap();
            assert_abs_diff_eq!(thermal.gbar().unwrap().gbar, 1.0, epsilon = 1e-6);
        }
        let coh = QuantumSetup::new(ftm(4).unwrap(), vec![PhotonStatistics::coherent(1.0, 30).unwrap(); 4]).unwrap();
        assert_abs_diff_eq!(coh.gbar().unwrap().gbar, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn blocks_do_not_correlate_across() {
        let u = direct_sum(&ftm(2).unwrap(), &ftm(2).unwrap());
        let s = QuantumSetup::new(u, fock(&[1, 1, 1, 1])).unwrap();
        assert_abs_diff_eq!(s.pair_correlator(0, 2).unwrap(), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(s.pair_correlator(0, 1).unwrap(), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn partial_monitoring() {
        let s = QuantumSetup::new(ftm(3).unwrap(), fock(&[1, 1, 1])).unwrap().with_detectors(vec![2, 0]).unwrap();
        let r = s.gbar().unwrap();
        assert_eq!(r.detectors, vec![2, 0]);
        assert_eq!(r.pair_ratios.len(), 1);
        assert!(matches!(s.pair_correlator(0, 1), Err(Error::Precondition(_))));
        assert!(QuantumSetup::new(ftm(3).unwrap(), vec![]).unwrap().with_detectors(vec![0, 0]).is_err());
        assert!(QuantumSetup::new(ftm(3).unwrap(), vec![]).unwrap().with_detectors(vec![0, 3]).is_err());
        assert!(QuantumSetup::new(ftm(2).unwrap(), fock(&[1, 1, 1])).is_err());
    }

    #[test]
    fn oracle_matches_formula_on_number_states() {
        let oracle = FockOracle::default();
        for seed in 0..40u64 {
            let m = 2 + (seed % 2) as usize;
            let u = random_unitary(m, seed).unwrap();
            let occ: Vec<usize> = (0..m).map(|a| ((seed as usize) / (a + 1) + a) % 3).collect();
            let s = QuantumSetup::new(u.clone(), fock(&occ)).unwrap();
            let formula = s.pair_correlator(0, 1).unwrap();
            let brute = oracle.pair_correlator(&u, &occ, 0, 1).unwrap();
            assert!((formula - brute).abs() <= 1e-10 * brute.abs().max(1.0), "{occ:?}: {formula} vs {brute}");
            let mean = oracle.intensity(&u, &occ, 1).unwrap();
            assert_abs_diff_eq!(mean, s.intensity_means()[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn oracle_mixed_inputs() {
        let u = random_unitary(3, 17).unwrap();
        let stats = vec![
            PhotonStatistics::custom(vec![0.2, 0.5, 0.3]).unwrap(),
            PhotonStatistics::custom(vec![0.6, 0.4]).unwrap(),
            PhotonStatistics::fock(1),
        ];
        let s = QuantumSetup::new(u.clone(), stats.clone()).unwrap();
        let avg = FockOracle::default().mixed_pair_correlator(&u, &stats, 1, 2).unwrap();
        assert_eq!(avg.pruned_mass, 0.0);
        assert_abs_diff_eq!(avg.value, s.pair_correlator(1, 2).unwrap(), epsilon = 1e-12);

        let (report, _) = FockOracle::default().gbar(&s).unwrap();
        assert_eq!(report.provenance, Provenance::Oracle);
        assert_abs_diff_eq!(report.gbar, s.gbar().unwrap().gbar, epsilon = 1e-12);
    }

    #[test]
    fn oracle_pruning_and_limits() {
        let u = ftm(2).unwrap();
        let tiny = PhotonStatistics::custom(vec![1.0 - 1e-15, 1e-15]).unwrap();
        let avg = FockOracle::default().mixed_pair_correlator(&u, &[tiny, PhotonStatistics::fock(1)], 0, 1).unwrap();
        assert!(avg.pruned_mass > 0.0 && avg.pruned_mass < 1e-14);

        assert!(matches!(
            fock_oracle_pair_correlator(&ftm(3).unwrap(), &[3, 3, 1], 0, 1),
            Err(Error::OracleLimit { photons: 7, limit: 6 })
        ));
        let coh = PhotonStatistics::coherent(1.0, 30).unwrap();
        assert!(FockOracle::default().mixed_pair_correlator(&u, &[coh.clone(), coh], 0, 1).is_err());
        assert!(fock_oracle_pair_correlator(&u, &[1], 0, 1).is_err());
        assert!(fock_oracle_pair_correlator(&u, &[1, 1], 0, 0).is_err());
    }
}
