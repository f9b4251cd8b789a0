//! Transfer matrices and unitaries.
//!
//! A classical interferometer is any complex `M × N` transfer matrix mapping
//! source fields to detector fields. A quantum interferometer is an `m × m`
//! unitary acting on the mode annihilation operators. Both are immutable
//! once built.

use std::f64::consts::PI;
use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::{Error, Result};

/// Maximum entrywise deviation of `U†U` from the identity accepted for a
/// unitary.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

/// A finite complex matrix with at least one row and one column.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix(DMatrix<Complex64>);

impl ComplexMatrix {
    /// Builds a matrix from row-major entries.
    pub fn from_row_major(rows: usize, cols: usize, entries: &[Complex64]) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::InvalidDimension(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if entries.len() != rows * cols {
            return Err(Error::InvalidMatrix(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                entries.len()
            )));
        }
        Self::try_from(DMatrix::from_row_slice(rows, cols, entries))
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimension("identity of size 0".into()));
        }
        Ok(Self(DMatrix::identity(n, n)))
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0[(row, col)]
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<Complex64> {
        self.0
    }

    /// Max-norm distance of `A†A` from the identity (requires a square matrix
    /// to be meaningful as a unitarity check).
    pub fn unitarity_defect(&self) -> f64 {
        let gram = self.0.adjoint() * &self.0;
        let n = gram.nrows();
        let mut worst = 0.0f64;
        for r in 0..n {
            for c in 0..n {
                let target = if r == c { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) };
                worst = worst.max((gram[(r, c)] - target).norm());
            }
        }
        worst
    }

    /// Serializes to the text format: a `rows cols` line followed by one line
    /// per row of whitespace-separated `re im` pairs, printed with 17
    /// significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} {}\n", self.rows(), self.cols());
        for r in 0..self.rows() {
            for c in 0..self.cols() {
                let z = self.get(r, c);
                if c > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{:.16e} {:.16e}", z.re, z.im);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut tokens = text.split_whitespace();
        let mut dim = |what: &str| -> Result<usize> {
            tokens
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {what} count")))?
                .parse::<usize>()
                .map_err(|e| Error::Parse(format!("bad {what} count: {e}")))
        };
        let rows = dim("row")?;
        let cols = dim("column")?;
        let values = tokens
            .map(|t| t.parse::<f64>().map_err(|e| Error::Parse(format!("bad number {t:?}: {e}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != 2 * rows * cols {
            return Err(Error::Parse(format!(
                "expected {} numbers for a {rows}x{cols} complex matrix, found {}",
                2 * rows * cols,
                values.len()
            )));
        }
        let entries: Vec<Complex64> = values
            .chunks_exact(2)
            .map(|p| Complex64::new(p[0], p[1]))
            .collect();
        Self::from_row_major(rows, cols, &entries)
    }
}

impl TryFrom<DMatrix<Complex64>> for ComplexMatrix {
    type Error = Error;

    fn try_from(m: DMatrix<Complex64>) -> Result<Self> {
        if m.nrows() == 0 || m.ncols() == 0 {
            return Err(Error::InvalidDimension(format!(
                "matrix must be at least 1x1, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if let Some((idx, z)) = m.iter().enumerate().find(|(_, z)| !z.re.is_finite() || !z.im.is_finite()) {
            let (r, c) = (idx % m.nrows(), idx / m.nrows());
            return Err(Error::InvalidMatrix(format!("non-finite entry {z} at ({r}, {c})")));
        }
        Ok(Self(m))
    }
}

/// A square matrix satisfying `‖U†U − 𝟙‖_max ≤ 1e-12`.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryMatrix(ComplexMatrix);

impl UnitaryMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        if m.rows() != m.cols() {
            return Err(Error::InvalidDimension(format!(
                "unitary must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        let defect = m.unitarity_defect();
        if defect > UNITARITY_TOLERANCE {
            return Err(Error::NotUnitary { defect });
        }
        Ok(Self(m))
    }

    pub fn identity(n: usize) -> Result<Self> {
        Ok(Self(ComplexMatrix::identity(n)?))
    }

    /// Number of modes.
    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.0.get(row, col)
    }

    pub fn as_complex(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_complex(self) -> ComplexMatrix {
        self.0
    }
}

impl AsRef<ComplexMatrix> for UnitaryMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}

/// The `M × M` Fourier-transform matrix with (1-based) entries
/// `exp(2πi (j−1)(α−1)/M) / √M`.
pub fn ftm(m: usize) -> Result<UnitaryMatrix> {
    if m == 0 {
        return Err(Error::InvalidDimension("Fourier matrix of size 0".into()));
    }
    let scale = 1.0 / (m as f64).sqrt();
    let entries = DMatrix::from_fn(m, m, |j, a| {
        // reduce the exponent before taking the angle to keep the phases exact
        let k = (j * a) % m;
        Complex64::from_polar(scale, 2.0 * PI * k as f64 / m as f64)
    });
    UnitaryMatrix::new(ComplexMatrix(entries))
}

/// Block-diagonal `U1 ⊕ U2`.
pub fn direct_sum(first: &UnitaryMatrix, second: &UnitaryMatrix) -> UnitaryMatrix {
    let (m1, m2) = (first.dim(), second.dim());
    let mut out = DMatrix::zeros(m1 + m2, m1 + m2);
    out.view_mut((0, 0), (m1, m1)).copy_from(first.0.as_matrix());
    out.view_mut((m1, m1), (m2, m2)).copy_from(second.0.as_matrix());
    // both blocks are unitary, so the sum is too
    UnitaryMatrix(ComplexMatrix(out))
}

/// Haar-random `m × m` unitary, deterministic in `seed`.
///
/// A complex Ginibre matrix is QR-factorized and the columns of `Q` are
/// rephased by `R_jj / |R_jj|`, which makes the distribution exactly Haar.
pub fn random_unitary(m: usize, seed: u64) -> Result<UnitaryMatrix> {
    if m == 0 {
        return Err(Error::InvalidDimension("random unitary of size 0".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ginibre = DMatrix::from_fn(m, m, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        Complex64::new(re, im) / 2f64.sqrt()
    });
    let qr = ginibre.qr();
    let (mut q, r) = qr.unpack();
    for j in 0..m {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..m {
            q[(i, j)] *= phase;
        }
    }
    UnitaryMatrix::new(ComplexMatrix(q))
}

/// Outcome of [`validate_transfer`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferValidation {
    pub largest_singular_value: f64,
    /// `T†T ≤ 𝟙` fails, i.e. some input pattern would be amplified.
    pub super_unitary: bool,
}

impl TransferValidation {
    pub fn is_physical(&self) -> bool {
        !self.super_unitary
    }
}

/// Checks whether a transfer matrix is passive (`T†T ≤ 𝟙`).
///
/// Any finite matrix is accepted by the classical engine; a super-unitary
/// matrix is only flagged. Non-finite entries are an error.
pub fn validate_transfer(t: &DMatrix<Complex64>) -> Result<TransferValidation> {
    let t = ComplexMatrix::try_from(t.clone())?;
    Ok(t.validate())
}

impl ComplexMatrix {
    /// See [`validate_transfer`].
    pub fn validate(&self) -> TransferValidation {
        let sv = self.0.clone().singular_values();
        let largest = sv.iter().copied().fold(0.0f64, f64::max);
        TransferValidation {
            largest_singular_value: largest,
            super_unitary: largest > 1.0 + UNITARITY_TOLERANCE,
        }
    }
}
