//! Pointwise inequalities between the complex Hessian, its determinant and
//! its inverse trace.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used by the matrix checks.
pub const MATRIX_TOLERANCE: f64 = 1e-9;

/// A Hermitian matrix sampled at one point, e.g. `u_{ab}` of a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianSample {
    entries: DMatrix<Complex64>,
    positive_definite: bool,
}

impl HermitianSample {
    /// Accepts a square matrix equal to its conjugate transpose up to round-off.
    pub fn new(entries: DMatrix<Complex64>) -> Result<Self> {
        let n = entries.nrows();
        if n == 0 || n != entries.ncols() {
            return Err(Error::invalid("entries", "matrix must be square and non-empty"));
        }
        let scale = entries
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        for i in 0..n {
            for j in 0..n {
                let d = (entries[(i, j)] - entries[(j, i)].conj()).norm();
                if d > 1e-12 * scale {
                    return Err(Error::invalid("entries", format!("not Hermitian at ({i}, {j})")));
                }
            }
        }
        let positive_definite = real_embedding(&entries).cholesky().is_some();
        Ok(HermitianSample {
            entries,
            positive_definite,
        })
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<Complex64> {
        &self.entries
    }

    pub fn is_positive_definite(&self) -> bool {
        self.positive_definite
    }
}

/// `[[Re H, -Im H], [Im H, Re H]]`; each eigenvalue of `H` appears twice.
pub fn real_embedding(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = h[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// Outcome of `n det(H)^{1/n} <= tr H <= n det(H) (tr H^{-1})^{n-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaplacianVerdict {
    /// `tr H - n det(H)^{1/n}`.
    pub lower_margin: f64,
    /// `n det(H) (tr H^{-1})^{n-1} - tr H`.
    pub upper_margin: f64,
    pub determinant: f64,
    pub trace: f64,
    pub inverse_trace: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Evaluates both trace inequalities for a positive definite sample.
pub fn check_laplacian_inequality(h: &HermitianSample) -> Result<LaplacianVerdict> {
    if !h.is_positive_definite() {
        return Err(Error::NotPositiveDefinite);
    }
    let n = h.dim();
    let emb = real_embedding(h.entries());
    let chol = emb.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
    // det(emb) = det(H)^2 and log det(emb) = 2 sum log L_ii
    let log_det_emb: f64 = chol.l_dirty().diagonal().iter().take(2 * n).map(|d| 2.0 * d.ln()).sum();
    let determinant = (0.5 * log_det_emb).exp();
    let trace = 0.5 * emb.trace();
    let mut inverse_trace = 0.0;
    for k in 0..2 * n {
        let mut e = DVector::zeros(2 * n);
        e[k] = 1.0;
        inverse_trace += chol.solve(&e)[k];
    }
    inverse_trace *= 0.5;

    let nf = n as f64;
    let lower_margin = trace - nf * determinant.powf(1.0 / nf);
    let upper = nf * determinant * inverse_trace.powi(n as i32 - 1);
    let upper_margin = upper - trace;
    let tolerance = MATRIX_TOLERANCE * trace.max(upper);
    Ok(LaplacianVerdict {
        lower_margin,
        upper_margin,
        determinant,
        trace,
        inverse_trace,
        tolerance,
        passed: lower_margin >= -tolerance && upper_margin >= -tolerance,
    })
}
