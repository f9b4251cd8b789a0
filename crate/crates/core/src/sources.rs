//! Light-source models.
//!
//! Quantum sources are described by the phase-averaged photon-number
//! distribution of each port ([`PhotonStatistics`]). Classical sources are a
//! finite ensemble of amplitude magnitudes, each pulse carrying an independent
//! uniform random phase ([`ClassicalSource`]). Pulses from different sources
//! may live in partially overlapping modes ([`OverlapMatrix`]).

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::interferometer::ComplexMatrix;
use crate::{Error, Result};

/// Largest tail mass a truncated distribution may drop.
pub const MAX_TAIL_MASS: f64 = 1e-10;

/// Tolerance on `Σ p = 1` for user-supplied distributions.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-12;

/// Phase-averaged photon-number distribution `q(n)`, `n = 0..=cutoff`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhotonStatistics {
    pmf: Vec<f64>,
}

impl PhotonStatistics {
    /// Validates an explicit distribution.
    pub fn custom(pmf: Vec<f64>) -> Result<Self> {
        if pmf.is_empty() {
            return Err(Error::InvalidStatistics("empty photon-number distribution".into()));
        }
        if let Some((n, p)) = pmf.iter().enumerate().find(|(_, p)| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidStatistics(format!("q({n}) = {p} is not a probability")));
        }
        let total: f64 = pmf.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidStatistics(format!("probabilities sum to {total}, not 1")));
        }
        Ok(Self { pmf })
    }

    /// Number state `|n⟩`.
    pub fn fock(n: usize) -> Self {
        let mut pmf = vec![0.0; n + 1];
        pmf[n] = 1.0;
        Self { pmf }
    }

    pub fn vacuum() -> Self {
        Self::fock(0)
    }

    /// Phase-randomized coherent state: Poisson distribution with the given
    /// mean.
    pub fn coherent(mean: f64, cutoff: usize) -> Result<Self> {
        check_parameter("mean", mean)?;
        let mut pmf = Vec::with_capacity(cutoff + 1);
        let mut term = (-mean).exp();
        for n in 0..=cutoff {
            pmf.push(term);
            term *= mean / (n + 1) as f64;
        }
        truncated(pmf, cutoff)
    }

    /// Thermal (Bose–Einstein) state, `q(n) ∝ (n̄ / (1 + n̄))ⁿ`.
    pub fn thermal(mean: f64, cutoff: usize) -> Result<Self> {
        check_parameter("mean", mean)?;
        let ratio = mean / (1.0 + mean);
        let pmf = (0..=cutoff)
            .map(|n| (1.0 - ratio) * ratio.powi(n as i32))
            .collect();
        truncated(pmf, cutoff)
    }

    /// Single-mode squeezed vacuum with squeezing parameter `r`; only even
    /// photon numbers are populated.
    pub fn squeezed_vacuum(r: f64, cutoff: usize) -> Result<Self> {
        check_parameter("squeezing", r)?;
        let t = r.tanh().powi(2);
        let scale = 1.0 / r.cosh();
        let mut pmf = vec![0.0; cutoff + 1];
        // c_k = (2k)! / (4^k (k!)^2)
        let mut c = 1.0;
        let mut tk = 1.0;
        for k in 0..=cutoff / 2 {
            pmf[2 * k] = c * tk * scale;
            c *= (2 * k + 1) as f64 / (2 * k + 2) as f64;
            tk *= t;
        }
        truncated(pmf, cutoff)
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn cutoff(&self) -> usize {
        self.pmf.len() - 1
    }

    /// `⟨n̂⟩`.
    pub fn mean(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    /// `⟨n̂²⟩`.
    pub fn second_moment(&self) -> f64 {
        self.pmf.iter().enumerate().map(|(n, p)| (n * n) as f64 * p).sum()
    }

    /// `⟨n̂²⟩ − ⟨n̂⟩²`, accumulated as a central moment.
    pub fn variance(&self) -> f64 {
        let mean = self.mean();
        self.pmf
            .iter()
            .enumerate()
            .map(|(n, p)| p * (n as f64 - mean).powi(2))
            .sum()
    }

    /// `η = −(Var − ⟨n̂⟩) / ⟨n̂⟩²`: 1 for {0,1}-supported states, 0 for
    /// Poissonian, negative for super-Poissonian statistics. Not clamped.
    pub fn eta(&self) -> Result<f64> {
        let mean = self.mean();
        if mean <= 0.0 {
            return Err(Error::UndefinedEta);
        }
        Ok((mean - self.variance()) / (mean * mean))
    }

    /// `Var ≤ ⟨n̂⟩`, non-strict, with a rounding allowance so that
    /// Poissonian inputs land on the satisfied side.
    pub fn is_sub_poissonian(&self) -> bool {
        self.variance() - self.mean() <= 1e-12 * (1.0 + self.second_moment())
    }

    /// Highest photon number with nonzero probability.
    pub fn max_support(&self) -> usize {
        self.pmf.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

fn check_parameter(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() || value < 0.0 {
        return Err(Error::InvalidStatistics(format!("{name} must be finite and >= 0, got {value}")));
    }
    Ok(())
}

fn truncated(mut pmf: Vec<f64>, cutoff: usize) -> Result<PhotonStatistics> {
    let kept: f64 = pmf.iter().sum();
    let tail = (1.0 - kept).max(0.0);
    if tail > MAX_TAIL_MASS {
        return Err(Error::Truncation { cutoff, tail });
    }
    for p in &mut pmf {
        *p /= kept;
    }
    Ok(PhotonStatistics { pmf })
}

/// Serializable description of a [`PhotonStatistics`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhotonSpec {
    Fock { n: usize },
    Coherent { mean: f64, cutoff: usize },
    Thermal { mean: f64, cutoff: usize },
    Squeezed { r: f64, cutoff: usize },
    Custom { pmf: Vec<f64> },
}

impl PhotonSpec {
    pub fn build(&self) -> Result<PhotonStatistics> {
        match self {
            PhotonSpec::Fock { n } => Ok(PhotonStatistics::fock(*n)),
            PhotonSpec::Coherent { mean, cutoff } => PhotonStatistics::coherent(*mean, *cutoff),
            PhotonSpec::Thermal { mean, cutoff } => PhotonStatistics::thermal(*mean, *cutoff),
            PhotonSpec::Squeezed { r, cutoff } => PhotonStatistics::squeezed_vacuum(*r, *cutoff),
            PhotonSpec::Custom { pmf } => PhotonStatistics::custom(pmf.clone()),
        }
    }
}

/// One possible pulse of a classical source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Realization {
    pub probability: f64,
    /// `|A|`; the phase is drawn uniformly per pulse.
    pub amplitude: f64,
}

/// Stochastic classical source: a finite set of amplitude magnitudes with
/// their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassicalSource {
    realizations: Vec<Realization>,
    #[serde(skip)]
    cumulative: Vec<f64>,
}

impl ClassicalSource {
    pub fn new(realizations: Vec<Realization>) -> Result<Self> {
        if realizations.is_empty() {
            return Err(Error::InvalidStatistics("classical source without realizations".into()));
        }
        for (k, r) in realizations.iter().enumerate() {
            if !r.probability.is_finite() || r.probability < 0.0 {
                return Err(Error::InvalidStatistics(format!(
                    "realization {k}: probability {} is not valid",
                    r.probability
                )));
            }
            if !r.amplitude.is_finite() || r.amplitude < 0.0 {
                return Err(Error::InvalidStatistics(format!(
                    "realization {k}: amplitude magnitude {} is not valid",
                    r.amplitude
                )));
            }
        }
        let total: f64 = realizations.iter().map(|r| r.probability).sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(Error::InvalidStatistics(format!("probabilities sum to {total}, not 1")));
        }
        let mut acc = 0.0;
        let cumulative = realizations
            .iter()
            .map(|r| {
                acc += r.probability;
                acc
            })
            .collect();
        Ok(Self { realizations, cumulative })
    }

    /// Non-fluctuating source with `|A| = amplitude`.
    pub fn fixed(amplitude: f64) -> Result<Self> {
        Self::new(vec![Realization { probability: 1.0, amplitude }])
    }

    /// Pseudo-thermal source: exponentially distributed intensity with the
    /// given mean, discretized by `nodes`-point Gauss–Laguerre quadrature.
    ///
    /// The intensity moments `⟨|A|²⟩ = mean` and `⟨|A|⁴⟩ = 2 mean²` are exact
    /// for `nodes ≥ 2`.
    pub fn pseudo_thermal(mean_intensity: f64, nodes: usize) -> Result<Self> {
        check_parameter("mean intensity", mean_intensity)?;
        if nodes == 0 {
            return Err(Error::InvalidStatistics("quadrature needs at least one node".into()));
        }
        let (x, w) = gauss_laguerre(nodes);
        let total: f64 = w.iter().sum();
        let realizations = x
            .iter()
            .zip(&w)
            .map(|(x, w)| Realization {
                probability: w / total,
                amplitude: (mean_intensity * x.max(0.0)).sqrt(),
            })
            .collect();
        Self::new(realizations)
    }

    pub fn realizations(&self) -> &[Realization] {
        &self.realizations
    }

    /// `(⟨|A|²⟩, ⟨|A|⁴⟩)`.
    pub fn moments(&self) -> (f64, f64) {
        self.realizations.iter().fold((0.0, 0.0), |(m2, m4), r| {
            let i = r.amplitude * r.amplitude;
            (m2 + r.probability * i, m4 + r.probability * i * i)
        })
    }

    /// Amplitude magnitude selected by a uniform draw `u ∈ [0, 1)`.
    #[inline]
    pub fn amplitude_at(&self, u: f64) -> f64 {
        let total = *self.cumulative.last().expect("non-empty");
        let target = u * total;
        let idx = self.cumulative.partition_point(|c| *c <= target);
        self.realizations[idx.min(self.realizations.len() - 1)].amplitude
    }
}

/// Nodes and weights of the `n`-point Gauss–Laguerre rule for `∫₀^∞ e^{−x} f(x) dx`
/// (Golub–Welsch).
fn gauss_laguerre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let jacobi = DMatrix::from_fn(n, n, |r, c| {
        if r == c {
            (2 * r + 1) as f64
        } else if r + 1 == c || c + 1 == r {
            r.max(c) as f64
        } else {
            0.0
        }
    });
    let eig = jacobi.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| (eig.eigenvalues[k], eig.eigenvectors[(0, k)].powi(2)))
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

/// Serializable description of a [`ClassicalSource`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ClassicalSpec {
    Fixed {
        amplitude: f64,
    },
    Thermal {
        mean_intensity: f64,
        #[serde(default = "default_nodes")]
        nodes: usize,
    },
    /// `[probability, amplitude]` pairs.
    Custom {
        realizations: Vec<[f64; 2]>,
    },
}

fn default_nodes() -> usize {
    16
}

impl ClassicalSpec {
    pub fn build(&self) -> Result<ClassicalSource> {
        match self {
            ClassicalSpec::Fixed { amplitude } => ClassicalSource::fixed(*amplitude),
            ClassicalSpec::Thermal { mean_intensity, nodes } => {
                ClassicalSource::pseudo_thermal(*mean_intensity, *nodes)
            }
            ClassicalSpec::Custom { realizations } => ClassicalSource::new(
                realizations
                    .iter()
                    .map(|[p, a]| Realization { probability: *p, amplitude: *a })
                    .collect(),
            ),
        }
    }
}

const OVERLAP_TOLERANCE: f64 = 1e-12;

/// Hermitian Gram matrix `V_{αβ} = ⟨χ_α|χ_β⟩` of the (normalized) pulse
/// modes of the sources.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapMatrix {
    gram: DMatrix<Complex64>,
    /// Row `α` holds the components of `|χ_α⟩`.
    modes: DMatrix<Complex64>,
}

impl OverlapMatrix {
    pub fn new(gram: DMatrix<Complex64>) -> Result<Self> {
        let n = gram.nrows();
        if n == 0 || gram.ncols() != n {
            return Err(Error::InvalidDimension(format!(
                "overlap matrix must be square and non-empty, got {}x{}",
                gram.nrows(),
                gram.ncols()
            )));
        }
        for a in 0..n {
            let d = gram[(a, a)];
            if (d - Complex64::new(1.0, 0.0)).norm() > OVERLAP_TOLERANCE {
                return Err(Error::InvalidMatrix(format!("overlap diagonal ({a},{a}) = {d}, expected 1")));
            }
            for b in 0..n {
                let v = gram[(a, b)];
                if !v.re.is_finite() || !v.im.is_finite() {
                    return Err(Error::InvalidMatrix(format!("non-finite overlap at ({a},{b})")));
                }
                if (v - gram[(b, a)].conj()).norm() > OVERLAP_TOLERANCE {
                    return Err(Error::InvalidMatrix(format!("overlap matrix not Hermitian at ({a},{b})")));
                }
                if v.norm() > 1.0 + OVERLAP_TOLERANCE {
                    return Err(Error::InvalidMatrix(format!("|V({a},{b})| = {} exceeds 1", v.norm())));
                }
            }
        }
        let lower = semidefinite_cholesky(&gram)?;
        Ok(Self { modes: lower.map(|z| z.conj()), gram })
    }

    /// Fully indistinguishable pulses (`V ≡ 1`).
    pub fn indistinguishable(n: usize) -> Result<Self> {
        Self::new(DMatrix::from_element(n, n, Complex64::new(1.0, 0.0)))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::new(DMatrix::identity(n, n))
    }

    /// Real symmetric overlap from row-major entries.
    pub fn from_real(n: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != n * n {
            return Err(Error::InvalidDimension(format!("expected {} overlap entries, got {}", n * n, entries.len())));
        }
        Self::new(DMatrix::from_row_iterator(n, n, entries.iter().map(|x| Complex64::new(*x, 0.0))))
    }

    pub fn from_matrix(m: &ComplexMatrix) -> Result<Self> {
        Self::new(m.as_matrix().clone())
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.gram[(a, b)]
    }

    /// `|V_{αβ}|²`, the factor by which the interference between two sources
    /// is reduced.
    #[inline]
    pub fn visibility(&self, a: usize, b: usize) -> f64 {
        self.gram[(a, b)].norm_sqr()
    }

    /// Mode vectors whose Gram matrix is `V`: row `α` is `|χ_α⟩`.
    pub fn mode_vectors(&self) -> &DMatrix<Complex64> {
        &self.modes
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.gram
    }
}

/// `V = L L†` for a positive-semidefinite Hermitian `V`, with zero columns at
/// vanishing pivots.
fn semidefinite_cholesky(v: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    const PIVOT_TOL: f64 = 1e-12;
    const RESIDUAL_TOL: f64 = 1e-8;
    let n = v.nrows();
    let mut l = DMatrix::<Complex64>::zeros(n, n);
    for k in 0..n {
        let d = v[(k, k)].re - (0..k).map(|p| l[(k, p)].norm_sqr()).sum::<f64>();
        if d < -PIVOT_TOL {
            return Err(Error::InvalidMatrix("overlap matrix is not positive semidefinite".into()));
        }
        if d <= PIVOT_TOL {
            for i in k + 1..n {
                let r = v[(i, k)] - (0..k).map(|p| l[(i, p)] * l[(k, p)].conj()).sum::<Complex64>();
                if r.norm() > RESIDUAL_TOL {
                    return Err(Error::InvalidMatrix("overlap matrix is not positive semidefinite".into()));
                }
            }
            continue;
        }
        let pivot = d.sqrt();
        l[(k, k)] = Complex64::new(pivot, 0.0);
        for i in k + 1..n {
            let r = v[(i, k)] - (0..k).map(|p| l[(i, p)] * l[(k, p)].conj()).sum::<Complex64>();
            l[(i, k)] = r / pivot;
        }
    }
    Ok(l)
}
