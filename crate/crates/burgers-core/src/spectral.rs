//! Sine-basis transforms, the heat semigroup and the Burgers nonlinearity.
//!
//! Two interchangeable routes compute `P_n[ d/dx (a b) ]`:
//!
//! * pseudospectral: evaluate on the interior grid `x_j = j/(m+1)`, multiply
//!   pointwise, read the cosine coefficients of the product and differentiate
//!   in coefficient space. With `m = 2n+1` the quadrature is exact for the
//!   quadratic product of two n-mode fields (all frequencies stay below
//!   `2(m+1)`), so this is a dealiased evaluation, not an approximation;
//! * direct O(n^2) convolution from `sin A sin B = [cos(A-B) - cos(A+B)]/2`.
//!
//! The pseudospectral route is the production default; the convolution is
//! kept as an independent cross-check oracle.

use std::f64::consts::{PI, SQRT_2};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::field::{GridField, SpectralField};

/// Precomputed trig tables for one (n_modes, grid) pair.
///
/// All methods are pure with respect to the engine; an engine is immutable
/// after construction and can be shared freely across threads.
#[derive(Debug)]
pub struct SpectralEngine {
    n_modes: usize,
    grid_m: usize,
    /// sin(k pi j / (m+1)) for k = 1..=n, j = 1..=m, row-major in j.
    sin_table: Vec<f64>,
    /// cos(k pi j / (m+1)) for k = 1..=n, j = 1..=m, row-major in j.
    cos_table: Vec<f64>,
}

/// Grid size that evaluates quadratic products of n-mode fields exactly.
pub fn dealias_grid_size(n_modes: usize) -> usize {
    2 * n_modes + 1
}

impl SpectralEngine {
    pub fn new(n_modes: usize, dealias: bool) -> Arc<Self> {
        let grid_m = if dealias { dealias_grid_size(n_modes) } else { n_modes };
        let denom = (grid_m + 1) as f64;
        let mut sin_table = Vec::with_capacity(n_modes * grid_m);
        let mut cos_table = Vec::with_capacity(n_modes * grid_m);
        for k in 1..=n_modes {
            for j in 1..=grid_m {
                let arg = k as f64 * PI * j as f64 / denom;
                sin_table.push(arg.sin());
                cos_table.push(arg.cos());
            }
        }
        Arc::new(Self { n_modes, grid_m, sin_table, cos_table })
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn grid_m(&self) -> usize {
        self.grid_m
    }

    fn sin_row(&self, k: usize) -> &[f64] {
        &self.sin_table[(k - 1) * self.grid_m..k * self.grid_m]
    }

    fn cos_row(&self, k: usize) -> &[f64] {
        &self.cos_table[(k - 1) * self.grid_m..k * self.grid_m]
    }

    /// Synthesis: grid values of `sum_k a_k sqrt(2) sin(k pi x)` at the
    /// engine's interior nodes.
    pub fn to_grid_into(&self, coeffs: &[f64], out: &mut [f64]) {
        debug_assert_eq!(coeffs.len(), self.n_modes);
        debug_assert_eq!(out.len(), self.grid_m);
        out.fill(0.0);
        for (k, &a) in coeffs.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let c = SQRT_2 * a;
            for (o, s) in out.iter_mut().zip(self.sin_row(k + 1)) {
                *o += c * s;
            }
        }
    }

    /// Analysis: quadrature projection of grid values onto the first
    /// `n_modes` sine modes. Exact inverse of `to_grid_into` because the
    /// discrete sine family is orthogonal on the interior nodes.
    pub fn from_grid_into(&self, values: &[f64], coeffs: &mut [f64]) {
        debug_assert_eq!(values.len(), self.grid_m);
        debug_assert_eq!(coeffs.len(), self.n_modes);
        let w = SQRT_2 / (self.grid_m as f64 + 1.0);
        for k in 1..=self.n_modes {
            let mut acc = 0.0;
            for (g, s) in values.iter().zip(self.sin_row(k)) {
                acc += g * s;
            }
            coeffs[k - 1] = w * acc;
        }
    }

    /// Pseudospectral `P_n[ d/dx (a b) ]` for two n-mode fields.
    ///
    /// The product `ab` of two odd-extended sine series is even, i.e. a
    /// finite cosine series `c_0/2 + sum c_l cos(l pi x)`; differentiating
    /// gives `-sum l pi c_l sin(l pi x)`. The cosine coefficients are read
    /// off the product grid by quadrature (endpoints vanish since a, b do).
    pub fn dx_product_into(&self, a: &[f64], b: &[f64], out: &mut [f64], scratch: &mut FluxScratch) {
        self.to_grid_into(a, &mut scratch.grid_a);
        if std::ptr::eq(a, b) {
            for (p, &ga) in scratch.prod.iter_mut().zip(scratch.grid_a.iter()) {
                *p = ga * ga;
            }
        } else {
            self.to_grid_into(b, &mut scratch.grid_b);
            for ((p, &ga), &gb) in
                scratch.prod.iter_mut().zip(scratch.grid_a.iter()).zip(scratch.grid_b.iter())
            {
                *p = ga * gb;
            }
        }
        let w = 2.0 / (self.grid_m as f64 + 1.0);
        for l in 1..=self.n_modes {
            let mut acc = 0.0;
            for (p, c) in scratch.prod.iter().zip(self.cos_row(l)) {
                acc += p * c;
            }
            let c_l = w * acc;
            out[l - 1] = -(l as f64) * PI * c_l / SQRT_2;
        }
    }

    /// Burgers nonlinearity `N(u) = (1/2) P_n d/dx(u^2)`.
    pub fn nonlinearity_into(&self, u: &[f64], out: &mut [f64], scratch: &mut FluxScratch) {
        self.dx_product_into(u, u, out, scratch);
        for o in out.iter_mut() {
            *o *= 0.5;
        }
    }

    /// L4 norm by grid quadrature; exact on the dealiased grid since `u^4`
    /// has no frequency at or above `2(m+1)`.
    pub fn l4_norm(&self, coeffs: &[f64], scratch: &mut FluxScratch) -> f64 {
        self.to_grid_into(coeffs, &mut scratch.grid_a);
        let w = 1.0 / (self.grid_m as f64 + 1.0);
        let s: f64 = scratch.grid_a.iter().map(|g| g * g * g * g).sum();
        (w * s).powf(0.25)
    }

    /// Max |u| over the interior nodes (diagnostic for the advective CFL).
    pub fn grid_max_abs(&self, coeffs: &[f64], scratch: &mut FluxScratch) -> f64 {
        self.to_grid_into(coeffs, &mut scratch.grid_a);
        scratch.grid_a.iter().fold(0.0f64, |m, g| m.max(g.abs()))
    }

    pub fn scratch(&self) -> FluxScratch {
        FluxScratch {
            grid_a: vec![0.0; self.grid_m],
            grid_b: vec![0.0; self.grid_m],
            prod: vec![0.0; self.grid_m],
        }
    }
}

/// Reusable grid buffers for the pseudospectral product.
#[derive(Debug, Clone)]
pub struct FluxScratch {
    grid_a: Vec<f64>,
    grid_b: Vec<f64>,
    prod: Vec<f64>,
}

/// Evaluate an n-mode field at `m >= n` interior nodes.
pub fn to_grid(u: &SpectralField, m: usize) -> Result<GridField> {
    let n = u.n_modes();
    if m < n {
        return Err(Error::GridTooCoarse { m, n });
    }
    let denom = (m + 1) as f64;
    let mut values = vec![0.0; m];
    for (i, &a) in u.coeffs().iter().enumerate() {
        if a == 0.0 {
            continue;
        }
        let k = (i + 1) as f64;
        let c = SQRT_2 * a;
        for (j, v) in values.iter_mut().enumerate() {
            *v += c * (k * PI * (j + 1) as f64 / denom).sin();
        }
    }
    Ok(GridField::new(values))
}

/// Project grid values onto the first `n <= m` sine modes.
pub fn from_grid(g: &GridField, n: usize) -> Result<SpectralField> {
    let m = g.m();
    if n > m {
        return Err(Error::ProjectionTooFine { n, m });
    }
    let denom = (m + 1) as f64;
    let w = SQRT_2 / denom;
    let mut coeffs = vec![0.0; n];
    for (i, c) in coeffs.iter_mut().enumerate() {
        let k = (i + 1) as f64;
        let mut acc = 0.0;
        for (j, v) in g.values().iter().enumerate() {
            acc += v * (k * PI * (j + 1) as f64 / denom).sin();
        }
        *c = w * acc;
    }
    Ok(SpectralField::new(coeffs))
}

/// `P_n[(1/2) d/dx u^2]`, pseudospectral (dealiased grid when `dealias`).
pub fn nonlinearity(u: &SpectralField, dealias: bool) -> SpectralField {
    let engine = SpectralEngine::new(u.n_modes(), dealias);
    let mut scratch = engine.scratch();
    let mut out = vec![0.0; u.n_modes()];
    engine.nonlinearity_into(u.coeffs(), &mut out, &mut scratch);
    SpectralField::new(out)
}

/// `P_n[(1/2) d/dx u^2]` by direct coefficient convolution (the oracle).
pub fn nonlinearity_direct(u: &SpectralField) -> SpectralField {
    let mut out = vec![0.0; u.n_modes()];
    dx_product_direct_into(u.coeffs(), u.coeffs(), &mut out);
    for o in out.iter_mut() {
        *o *= 0.5;
    }
    SpectralField::new(out)
}

/// `P_n[d/dx (a b)]` by direct convolution.
///
/// With unnormalized series `a = sum p_k sin(k pi x)` the product telescopes
/// through `sin sin = [cos - cos]/2`; collecting sine terms of the derivative
/// gives, in the orthonormal basis,
/// `out_m = (m pi / sqrt(2)) [ sum_{k+l=m} a_k b_l - sum_j (a_{j+m} b_j + a_j b_{j+m}) ]`.
pub fn dx_product_direct_into(a: &[f64], b: &[f64], out: &mut [f64]) {
    let n = a.len();
    debug_assert_eq!(b.len(), n);
    debug_assert_eq!(out.len(), n);
    for m in 1..=n {
        let mut conv = 0.0;
        for k in 1..m {
            conv += a[k - 1] * b[m - k - 1];
        }
        let mut corr = 0.0;
        for j in 1..=(n - m) {
            corr += a[j + m - 1] * b[j - 1] + a[j - 1] * b[j + m - 1];
        }
        out[m - 1] = m as f64 * PI / SQRT_2 * (conv - corr);
    }
}

/// Heat semigroup `T_nu(t) = exp(t nu Laplacian)`: `a_k -> exp(-nu pi^2 k^2 t) a_k`.
pub fn semigroup_apply(u: &SpectralField, t: f64, nu: f64) -> Result<SpectralField> {
    if t < 0.0 || !t.is_finite() {
        return Err(Error::NegativeDuration(t));
    }
    let coeffs = u
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            let k = (i + 1) as f64;
            a * (-nu * PI * PI * k * k * t).exp()
        })
        .collect();
    Ok(SpectralField::new(coeffs))
}

/// Decay factors of one semigroup application, mode by mode.
pub fn semigroup_factors(n_modes: usize, t: f64, nu: f64) -> Vec<f64> {
    (1..=n_modes).map(|k| (-nu * PI * PI * (k * k) as f64 * t).exp()).collect()
}
