//! Pair-intensity correlations in multiport interferometers.
//!
//! The central quantity is the normalized average
//!
//! ```text
//!   Ḡ = (1 / C(M,2)) Σ_{i<j} ⟨I_i I_j⟩ / (⟨I_i⟩⟨I_j⟩)
//! ```
//!
//! over all pairs of monitored detectors. The crate evaluates Ḡ for
//! independent, phase-randomized classical fields ([`classical`]) and for
//! phase-averaged product photon-number states ([`quantum`]); provides the
//! closed-form thresholds separating the two regimes ([`bounds`]); searches
//! the classical minimum numerically ([`optimizer`]); and estimates Ḡ from
//! recorded intensities ([`ingestion`]).
//!
//! Matrix and detector indices are 0-based throughout the API. Formulas in
//! doc comments use the 1-based form where that is the customary notation.

pub mod bounds;
pub mod classical;
mod error;
pub mod ingestion;
pub mod interferometer;
pub mod optimizer;
pub mod par;
pub mod quantum;
pub mod report;
pub mod sources;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use bounds::{
    classical_min, divisibility_threshold, divisibility_witness, nonclassicality_witness,
    symmetric_quantum_min, Classification, WitnessRule, WitnessVerdict,
};
pub use classical::{mc_estimate_gbar, ClassicalSetup};
pub use ingestion::{estimate_gbar_from_records, GbarEstimate, ShotRecord};
pub use interferometer::{direct_sum, ftm, random_unitary, ComplexMatrix, UnitaryMatrix};
pub use optimizer::{
    check_trace_inequalities, gbar_objective, minimize, minimize_classical_gbar, MinimizeOptions,
    PsiConfiguration,
};
pub use par::Execution;
pub use quantum::{fock_oracle_pair_correlator, QuantumSetup};
pub use report::{CorrelationReport, PairRatio, Provenance};
pub use sources::{ClassicalSource, OverlapMatrix, PhotonStatistics};
