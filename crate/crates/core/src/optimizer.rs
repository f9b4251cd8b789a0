//! Numerical minimization of the classical `Ḡ`.
//!
//! With non-fluctuating sources, `Ḡ` depends on the interferometer and the
//! source intensities only through `M` unit vectors `ψ_i ∈ ℂᴺ`,
//! `ψ_i(α) = T*_{iα} √(𝓔⟨|A_α|²⟩ / ⟨I_i⟩)`:
//!
//! ```text
//! Ḡ = 1 + (1 / C(M,2)) Σ_{i<j} [ |ψ_i† ψ_j|² − Σ_α |ψ_i(α)|² |ψ_j(α)|² ]
//! ```
//!
//! [`minimize_classical_gbar`] runs a multistart projected gradient descent
//! on the product of unit spheres.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::classical::ClassicalSetup;
use crate::par::Execution;
use crate::report::active_indices;
use crate::{Error, Result};

/// Accepted deviation of `‖ψ_i‖` from 1.
pub const NORM_TOLERANCE: f64 = 1e-10;

/// `M` unit vectors in `ℂᴺ`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PsiConfiguration {
    dim: usize,
    vectors: Vec<Vec<Complex64>>,
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

impl PsiConfiguration {
    pub fn new(vectors: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = Self::check_shape(&vectors)?;
        for (i, v) in vectors.iter().enumerate() {
            let n = norm(v);
            if (n - 1.0).abs() > NORM_TOLERANCE {
                return Err(Error::Precondition(format!("vector {i} has norm {n}, expected 1")));
            }
        }
        Ok(Self { dim, vectors })
    }

    /// Rescales every vector to unit norm.
    pub fn normalized(mut vectors: Vec<Vec<Complex64>>) -> Result<Self> {
        let dim = Self::check_shape(&vectors)?;
        for (i, v) in vectors.iter_mut().enumerate() {
            let n = norm(v);
            if !(n.is_finite() && n > 0.0) {
                return Err(Error::Precondition(format!("vector {i} cannot be normalized")));
            }
            v.iter_mut().for_each(|z| *z /= n);
        }
        Ok(Self { dim, vectors })
    }

    fn check_shape(vectors: &[Vec<Complex64>]) -> Result<usize> {
        let dim = vectors.first().map(Vec::len).unwrap_or(0);
        if dim == 0 {
            return Err(Error::InvalidDimension("configuration needs at least one non-empty vector".into()));
        }
        if vectors.iter().any(|v| v.len() != dim) {
            return Err(Error::InvalidDimension("vectors must share one dimension".into()));
        }
        Ok(dim)
    }

    /// Configuration that attains the classical minimum for `sources`
    /// sources and `detectors` detectors:
    /// `ψ_i(α) = ω_M^{iα} / √min(M,N)` for `α < M`, zero otherwise
    /// (0-based indices, `ω_M = e^{2πi/M}`).
    pub fn saturating(sources: usize, detectors: usize) -> Result<Self> {
        if sources == 0 || detectors == 0 {
            return Err(Error::InvalidDimension("saturating configuration needs N, M >= 1".into()));
        }
        let scale = 1.0 / (sources.min(detectors) as f64).sqrt();
        let vectors = (0..detectors)
            .map(|i| {
                (0..sources)
                    .map(|a| {
                        if a < detectors {
                            let k = (i * a) % detectors;
                            Complex64::from_polar(scale, TAU * k as f64 / detectors as f64)
                        } else {
                            Complex64::new(0.0, 0.0)
                        }
                    })
                    .collect()
            })
            .collect();
        Self::new(vectors)
    }

    /// Vectors of a classical setup with the given transfer matrix and source
    /// intensities, over its active detectors.
    pub fn from_classical(setup: &ClassicalSetup) -> Result<Self> {
        let means = setup.intensity_means();
        let t = setup.transfer();
        let e = setup.energy_scale();
        let vectors = active_indices(&means)
            .into_iter()
            .map(|i| {
                setup
                    .source_moments()
                    .iter()
                    .enumerate()
                    .map(|(a, (m2, _))| t.get(i, a).conj() * (e * m2 / means[i]).sqrt())
                    .collect()
            })
            .collect::<Vec<Vec<Complex64>>>();
        if vectors.is_empty() {
            return Err(Error::DegenerateSetup { active: 0 });
        }
        Self::normalized(vectors)
    }

    /// Number of vectors (`M`).
    pub fn count(&self) -> usize {
        self.vectors.len()
    }

    /// Vector dimension (`N`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vectors(&self) -> &[Vec<Complex64>] {
        &self.vectors
    }
}

/// Raw bracket sum `Σ_{i<j} [|ψ_i†ψ_j|² − Σ_α |ψ_i(α)ψ_j(α)|²]`, defined for
/// any vectors.
fn bracket_sum(vectors: &[Vec<Complex64>]) -> f64 {
    let mut total = 0.0;
    for (i, vi) in vectors.iter().enumerate() {
        for vj in &vectors[i + 1..] {
            let overlap = inner(vi, vj).norm_sqr();
            let local: f64 = vi.iter().zip(vj).map(|(a, b)| a.norm_sqr() * b.norm_sqr()).sum();
            total += overlap - local;
        }
    }
    total
}

fn pair_count(m: usize) -> f64 {
    (m * (m - 1) / 2) as f64
}

fn objective_raw(vectors: &[Vec<Complex64>]) -> f64 {
    let m = vectors.len();
    if m < 2 {
        return 1.0;
    }
    1.0 + bracket_sum(vectors) / pair_count(m)
}

/// Classical `Ḡ` as a function of the vectors (1 when fewer than two).
pub fn gbar_objective(config: &PsiConfiguration) -> f64 {
    objective_raw(&config.vectors)
}

/// Gradient of the objective with respect to the real and imaginary parts of
/// every component: entry `(i, α)` holds `∂/∂Re ψ_i(α) + i ∂/∂Im ψ_i(α)`.
/// The vectors are treated as unconstrained.
pub fn objective_gradient(vectors: &[Vec<Complex64>]) -> Vec<Vec<Complex64>> {
    let m = vectors.len();
    let dim = vectors.first().map_or(0, Vec::len);
    let mut grad = vec![vec![Complex64::new(0.0, 0.0); dim]; m];
    if m < 2 {
        return grad;
    }
    let scale = 2.0 / pair_count(m);
    for k in 0..m {
        for j in 0..m {
            if j == k {
                continue;
            }
            // ⟨ψ_j|ψ_k⟩
            let s = inner(&vectors[j], &vectors[k]);
            for a in 0..dim {
                grad[k][a] += scale * (vectors[j][a] * s - vectors[j][a].norm_sqr() * vectors[k][a]);
            }
        }
    }
    grad
}

/// Settings for [`minimize`].
#[derive(Debug, Clone, Copy)]
pub struct MinimizeOptions {
    pub restarts: usize,
    pub seed: u64,
    pub max_iterations: usize,
    /// Stop once the objective improves by less than this over `window`
    /// iterations.
    pub tolerance: f64,
    pub window: usize,
    pub execution: Execution,
    pub trace: bool,
}

impl MinimizeOptions {
    pub fn new(restarts: usize, seed: u64) -> Self {
        Self {
            restarts,
            seed,
            max_iterations: 200_000,
            tolerance: 1e-12,
            window: 50,
            execution: Execution::default(),
            trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Minimum {
    pub value: f64,
    pub config: PsiConfiguration,
    /// Index of the winning restart.
    pub restart: usize,
    pub iterations: usize,
    /// `(iteration, objective)` of the winning restart, when requested.
    pub trace: Vec<(usize, f64)>,
}

fn random_start(sources: usize, detectors: usize, seed: u64, restart: usize) -> Vec<Vec<Complex64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    (0..detectors)
        .map(|_| {
            let mut v: Vec<Complex64> = (0..sources)
                .map(|_| {
                    let re: f64 = StandardNormal.sample(&mut rng);
                    let im: f64 = StandardNormal.sample(&mut rng);
                    Complex64::new(re, im)
                })
                .collect();
            let n = norm(&v);
            v.iter_mut().for_each(|z| *z /= n);
            v
        })
        .collect()
}

/// Final point, value, iteration count and trace of one descent.
type Descent = (Vec<Vec<Complex64>>, f64, usize, Vec<(usize, f64)>);

fn descend(mut x: Vec<Vec<Complex64>>, opts: &MinimizeOptions) -> Descent {
    let mut f = objective_raw(&x);
    let mut step: f64 = 0.1;
    let mut history = vec![f];
    let mut trace = Vec::new();
    if opts.trace {
        trace.push((0, f));
    }
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        let mut g = objective_gradient(&x);
        // drop the radial component; the renormalization removes it anyway
        for (gi, xi) in g.iter_mut().zip(&x) {
            let radial = inner(xi, gi).re;
            gi.iter_mut().zip(xi).for_each(|(gz, xz)| *gz -= radial * xz);
        }
        let gnorm2: f64 = g.iter().flatten().map(|z| z.norm_sqr()).sum();
        if gnorm2 < 1e-30 {
            break;
        }
        step *= 2.0;
        let accepted = loop {
            let mut y = x.clone();
            for (yi, gi) in y.iter_mut().zip(&g) {
                yi.iter_mut().zip(gi).for_each(|(yz, gz)| *yz -= step * gz);
                let n = norm(yi);
                yi.iter_mut().for_each(|z| *z /= n);
            }
            let fy = objective_raw(&y);
            if fy < f {
                break Some((y, fy));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((y, fy)) = accepted else { break };
        x = y;
        f = fy;
        iterations += 1;
        history.push(f);
        if opts.trace {
            trace.push((iterations, f));
        }
        if iterations >= opts.window && history[iterations - opts.window] - f < opts.tolerance {
            break;
        }
    }
    (x, f, iterations, trace)
}

/// Multistart projected gradient descent over `M` unit vectors in `ℂᴺ`.
/// The lowest value wins; ties go to the lower restart index.
pub fn minimize(sources: usize, detectors: usize, opts: &MinimizeOptions) -> Result<Minimum> {
    if sources == 0 {
        return Err(Error::InvalidDimension("at least one source is required".into()));
    }
    if detectors < 2 {
        return Err(Error::InvalidDimension(format!("Ḡ needs at least 2 detectors, got {detectors}")));
    }
    if opts.restarts == 0 {
        return Err(Error::Precondition("at least one restart is required".into()));
    }
    let runs = opts.execution.map_indexed(opts.restarts, |r| {
        descend(random_start(sources, detectors, opts.seed, r), opts)
    });
    let (restart, (x, value, iterations, trace)) = runs
        .into_iter()
        .enumerate()
        .reduce(|best, cand| if cand.1 .1 < best.1 .1 { cand } else { best })
        .expect("restarts >= 1");
    Ok(Minimum { value, config: PsiConfiguration::normalized(x)?, restart, iterations, trace })
}

/// [`minimize`] with default iteration controls; returns the best value and
/// its argmin.
pub fn minimize_classical_gbar(sources: usize, detectors: usize, restarts: usize, seed: u64) -> Result<(f64, PsiConfiguration)> {
    let best = minimize(sources, detectors, &MinimizeOptions::new(restarts, seed))?;
    Ok((best.value, best.config))
}

/// Both sides of the two trace inequalities behind the classical bound,
/// for `H = Σ_i |ψ_i⟩⟨ψ_i|`:
/// `Σ_α ⟨α|H|α⟩² ≤ Tr H²` and `Tr H² ≥ (Tr H)² / min(M, N)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceInequalities {
    pub diagonal_square_sum: f64,
    pub trace: f64,
    pub trace_of_square: f64,
    pub rank_bound: usize,
    /// `Tr H² − Σ_α ⟨α|H|α⟩²`.
    pub first_slack: f64,
    /// `Tr H² − (Tr H)² / min(M, N)`.
    pub second_slack: f64,
}

impl TraceInequalities {
    pub fn hold(&self, tolerance: f64) -> bool {
        self.first_slack >= -tolerance && self.second_slack >= -tolerance
    }
}

pub fn check_trace_inequalities(config: &PsiConfiguration) -> TraceInequalities {
    let n = config.dim();
    let mut h = vec![Complex64::new(0.0, 0.0); n * n];
    for v in config.vectors() {
        for a in 0..n {
            for b in 0..n {
                h[a * n + b] += v[a] * v[b].conj();
            }
        }
    }
    let diagonal_square_sum: f64 = (0..n).map(|a| h[a * n + a].re.powi(2)).sum();
    let trace: f64 = (0..n).map(|a| h[a * n + a].re).sum();
    let trace_of_square: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    let rank_bound = config.count().min(n);
    TraceInequalities {
        diagonal_square_sum,
        trace,
        trace_of_square,
        rank_bound,
        first_slack: trace_of_square - diagonal_square_sum,
        second_slack: trace_of_square - trace * trace / rank_bound as f64,
    }
}
