//! Classical stochastic-field model.
//!
//! Each source emits `A_α e^{iφ}` with `|A_α|` drawn from its ensemble and
//! `φ` uniform, independently per pulse. Fields reach the detectors through
//! the transfer matrix `T` and the recorded intensity is
//! `I_i = 𝓔 |Σ_α T_{iα} A_α|²`. Phase randomness gives `⟨A_α⟩ = ⟨A_α A_β⟩ = 0`
//! and `⟨A*_α A_β⟩ = δ_{αβ} ⟨|A_α|²⟩`, from which
//!
//! ```text
//! ⟨I_i I_j⟩ = ⟨I_i⟩⟨I_j⟩
//!           + 𝓔² Σ_{α≠β} T_{iα} T*_{iβ} T_{jβ} T*_{jα} |V_{αβ}|² ⟨|A_α|²⟩⟨|A_β|²⟩
//!           + 𝓔² Σ_α |T_{iα}|² |T_{jα}|² (⟨|A_α|⁴⟩ − ⟨|A_α|²⟩²)
//! ```
//!
//! where `V` is the optional mode-overlap matrix (`V ≡ 1` when absent).

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingestion::{MomentAccumulator, ShotRecord};
use crate::interferometer::ComplexMatrix;
use crate::par::Execution;
use crate::report::{CorrelationReport, Provenance};
use crate::sources::{ClassicalSource, OverlapMatrix};
use crate::{Error, Result};

/// Number of batches used for Monte Carlo standard errors.
pub const DEFAULT_BATCHES: usize = 100;

#[derive(Debug, Clone)]
pub struct ClassicalSetup {
    transfer: ComplexMatrix,
    sources: Vec<ClassicalSource>,
    overlap: Option<OverlapMatrix>,
    energy_scale: f64,
    moments: Vec<(f64, f64)>,
}

impl ClassicalSetup {
    pub fn new(transfer: ComplexMatrix, sources: Vec<ClassicalSource>) -> Result<Self> {
        if transfer.cols() != sources.len() {
            return Err(Error::InvalidDimension(format!(
                "transfer matrix has {} columns but {} sources were given",
                transfer.cols(),
                sources.len()
            )));
        }
        let moments = sources.iter().map(ClassicalSource::moments).collect();
        Ok(Self { transfer, sources, overlap: None, energy_scale: 1.0, moments })
    }

    pub fn with_overlap(mut self, overlap: OverlapMatrix) -> Result<Self> {
        if overlap.dim() != self.sources.len() {
            return Err(Error::InvalidDimension(format!(
                "overlap matrix is {0}x{0} but there are {1} sources",
                overlap.dim(),
                self.sources.len()
            )));
        }
        self.overlap = Some(overlap);
        Ok(self)
    }

    pub fn with_energy_scale(mut self, energy_scale: f64) -> Result<Self> {
        if !(energy_scale.is_finite() && energy_scale > 0.0) {
            return Err(Error::Precondition(format!("energy scale must be positive, got {energy_scale}")));
        }
        self.energy_scale = energy_scale;
        Ok(self)
    }

    pub fn transfer(&self) -> &ComplexMatrix {
        &self.transfer
    }

    pub fn sources(&self) -> &[ClassicalSource] {
        &self.sources
    }

    pub fn overlap(&self) -> Option<&OverlapMatrix> {
        self.overlap.as_ref()
    }

    pub fn energy_scale(&self) -> f64 {
        self.energy_scale
    }

    pub fn detectors(&self) -> usize {
        self.transfer.rows()
    }

    /// `(⟨|A_α|²⟩, ⟨|A_α|⁴⟩)` per source.
    pub fn source_moments(&self) -> &[(f64, f64)] {
        &self.moments
    }

    /// `⟨I_i⟩ = 𝓔 Σ_α |T_{iα}|² ⟨|A_α|²⟩` for every detector.
    pub fn intensity_means(&self) -> Vec<f64> {
        (0..self.detectors()).map(|i| self.mean_at(i)).collect()
    }

    fn mean_at(&self, i: usize) -> f64 {
        let s: f64 = self
            .moments
            .iter()
            .enumerate()
            .map(|(a, (m2, _))| self.transfer.get(i, a).norm_sqr() * m2)
            .sum();
        self.energy_scale * s
    }

    fn visibility(&self, a: usize, b: usize) -> f64 {
        self.overlap.as_ref().map_or(1.0, |v| v.visibility(a, b))
    }

    /// `⟨I_i I_j⟩` for two distinct detectors.
    pub fn pair_correlator(&self, i: usize, j: usize) -> Result<f64> {
        let m = self.detectors();
        for idx in [i, j] {
            if idx >= m {
                return Err(Error::IndexOutOfRange { index: idx, len: m });
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

    /// `⟨I_i I_j⟩ − ⟨I_i⟩⟨I_j⟩`.
    fn excess_unchecked(&self, i: usize, j: usize) -> f64 {
        let t = &self.transfer;
        let n = self.sources.len();
        // w_α = T_{iα} T*_{jα}, so Re(T_iα T*_iβ T_jβ T*_jα) = Re(w_α w*_β)
        let w: Vec<Complex64> = (0..n).map(|a| t.get(i, a) * t.get(j, a).conj()).collect();
        let mut interference = 0.0;
        let mut fluctuation = 0.0;
        for a in 0..n {
            let (m2a, m4a) = self.moments[a];
            fluctuation += w[a].norm_sqr() * (m4a - m2a * m2a);
            for b in 0..n {
                if b != a {
                    interference += (w[a] * w[b].conj()).re * self.visibility(a, b) * m2a * self.moments[b].0;
                }
            }
        }
        let e2 = self.energy_scale * self.energy_scale;
        e2 * (interference + fluctuation)
    }

    /// Closed-form `Ḡ` over all detectors above the exclusion threshold.
    pub fn gbar(&self) -> Result<CorrelationReport> {
        CorrelationReport::assemble_excess(
            (0..self.detectors()).collect(),
            self.intensity_means(),
            Provenance::Analytic,
            |a, b| self.excess_unchecked(a, b),
        )
    }

    /// Detector intensities of shot `k`, drawn from a stream that depends on
    /// `(seed, k)` only.
    pub fn sample_shot(&self, seed: u64, shot: u64, out: &mut [f64]) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(shot);
        let fields: Vec<Complex64> = self
            .sources
            .iter()
            .map(|s| {
                let magnitude = s.amplitude_at(rng.random::<f64>());
                let phase = TAU * rng.random::<f64>();
                Complex64::from_polar(magnitude, phase)
            })
            .collect();
        let t = &self.transfer;
        match &self.overlap {
            None => {
                for (i, slot) in out.iter_mut().enumerate() {
                    let e: Complex64 = fields.iter().enumerate().map(|(a, f)| t.get(i, a) * f).sum();
                    *slot = self.energy_scale * e.norm_sqr();
                }
            }
            Some(v) => {
                let modes = v.mode_vectors();
                let dim = modes.ncols();
                for (i, slot) in out.iter_mut().enumerate() {
                    let mut total = 0.0;
                    for k in 0..dim {
                        let e: Complex64 = fields
                            .iter()
                            .enumerate()
                            .map(|(a, f)| t.get(i, a) * f * modes[(a, k)])
                            .sum();
                        total += e.norm_sqr();
                    }
                    *slot = self.energy_scale * total;
                }
            }
        }
    }

    /// Synthetic measurement records drawn from the Monte Carlo sampler.
    pub fn simulate_records(&self, shots: usize, seed: u64) -> Vec<ShotRecord> {
        let m = self.detectors();
        Execution::default().map_indexed(shots, |k| {
            let mut intensities = vec![0.0; m];
            self.sample_shot(seed, k as u64, &mut intensities);
            ShotRecord { id: k as u64, intensities }
        })
    }
}

/// Monte Carlo run parameters.
#[derive(Debug, Clone, Copy)]
pub struct MonteCarlo {
    pub shots: usize,
    pub seed: u64,
    pub batches: usize,
    pub execution: Execution,
}

impl MonteCarlo {
    pub fn new(shots: usize, seed: u64) -> Self {
        Self { shots, seed, batches: DEFAULT_BATCHES, execution: Execution::default() }
    }

    pub fn with_execution(mut self, execution: Execution) -> Self {
        self.execution = execution;
        self
    }

    /// Sample-mean estimate of every `⟨I_i⟩`, `⟨I_i I_j⟩` and of `Ḡ`, with a
    /// batch-means standard error. Bit-reproducible for fixed
    /// `(seed, shots, batches)` under either execution strategy.
    pub fn run(&self, setup: &ClassicalSetup) -> Result<CorrelationReport> {
        if self.shots < 2 {
            return Err(Error::InsufficientSamples { got: self.shots, need: 2 });
        }
        let batches = self.batches.clamp(1, self.shots);
        let m = setup.detectors();
        let (shots, seed) = (self.shots, self.seed);
        let per_batch = self.execution.map_indexed(batches, |b| {
            let (lo, hi) = (b * shots / batches, (b + 1) * shots / batches);
            let mut acc = MomentAccumulator::new(m);
            let mut buf = vec![0.0; m];
            for k in lo..hi {
                setup.sample_shot(seed, k as u64, &mut buf);
                acc.push(&buf);
            }
            acc
        });
        let mut report = MomentAccumulator::summarize(&per_batch, (0..m).collect())?;
        report.provenance = Provenance::MonteCarlo;
        Ok(report)
    }
}

/// [`MonteCarlo::run`] with the default batch count and execution strategy.
pub fn mc_estimate_gbar(setup: &ClassicalSetup, shots: usize, seed: u64) -> Result<CorrelationReport> {
    MonteCarlo::new(shots, seed).run(setup)
}
