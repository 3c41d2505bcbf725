//! State representations: sine-mode coefficient vectors and collocation grids.
//!
//! Everything lives on [0,1] with homogeneous Dirichlet data. The working
//! basis is the orthonormal family `e_k(x) = sqrt(2) sin(k pi x)`, so that
//! `|u|_2^2 = sum a_k^2` and `|u'|_2^2 = sum (k pi a_k)^2` hold exactly.
//! (The common non-normalized convention `sqrt(2/pi) sin(k pi x)` does not
//! give Parseval on the unit interval; all sigma_k intensities here refer to
//! the orthonormal basis.)

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// A function in the span of the first `n` orthonormal sine modes.
///
/// `coeffs[k-1]` is the coefficient of `sqrt(2) sin(k pi x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Self {
        Self { coeffs }
    }

    pub fn zeros(n_modes: usize) -> Self {
        Self { coeffs: vec![0.0; n_modes] }
    }

    /// A single mode `amplitude * sqrt(2) sin(k pi x)` in an `n_modes` field.
    pub fn single_mode(n_modes: usize, k: usize, amplitude: f64) -> Self {
        assert!(k >= 1 && k <= n_modes, "mode {k} out of range 1..={n_modes}");
        let mut coeffs = vec![0.0; n_modes];
        coeffs[k - 1] = amplitude;
        Self { coeffs }
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of mode `k` (1-based).
    pub fn coeff(&self, k: usize) -> f64 {
        self.coeffs[k - 1]
    }

    /// L2 norm via Parseval.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|a| a * a).sum::<f64>().sqrt()
    }

    /// H1_0 seminorm |d/dx u|_2 = sqrt(sum (k pi a_k)^2).
    pub fn h1_seminorm(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let kp = (i + 1) as f64 * PI;
                (kp * a) * (kp * a)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Evaluate the sine series at a point (O(n); for diagnostics and tests).
    pub fn eval(&self, x: f64) -> f64 {
        let s2 = std::f64::consts::SQRT_2;
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, a)| a * s2 * ((i + 1) as f64 * PI * x).sin())
            .sum()
    }

    /// Truncate or zero-pad to exactly `n` modes (the projection P_n).
    pub fn project(&self, n: usize) -> Self {
        let mut coeffs = vec![0.0; n];
        let keep = n.min(self.coeffs.len());
        coeffs[..keep].copy_from_slice(&self.coeffs[..keep]);
        Self { coeffs }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|a| a * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_same_size(other)?;
        Ok(Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a + b).collect(),
        })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_same_size(other)?;
        Ok(Self {
            coeffs: self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn distance(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.l2_norm())
    }

    fn check_same_size(&self, other: &Self) -> Result<()> {
        if self.coeffs.len() != other.coeffs.len() {
            return Err(Error::DimensionMismatch {
                left: self.coeffs.len(),
                right: other.coeffs.len(),
            });
        }
        Ok(())
    }
}

/// Point values at the uniform interior nodes `x_j = j/(m+1)`, `j = 1..=m`.
///
/// The endpoint values are implicitly zero (Dirichlet). Quadrature against
/// this grid uses the uniform weight `1/(m+1)`, which integrates products of
/// sine/cosine modes exactly as long as no frequency reaches `2(m+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    values: Vec<f64>,
}

impl GridField {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn m(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Node coordinate x_j = j/(m+1) for j = 1..=m.
    pub fn node(&self, j: usize) -> f64 {
        j as f64 / (self.values.len() as f64 + 1.0)
    }

    /// Quadrature L2 norm: sqrt( (1/(m+1)) sum g_j^2 ).
    pub fn quadrature_l2(&self) -> f64 {
        let w = 1.0 / (self.values.len() as f64 + 1.0);
        (self.values.iter().map(|g| g * g).sum::<f64>() * w).sqrt()
    }
}
