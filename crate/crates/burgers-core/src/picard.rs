//! Independent fixed-point solver of the mild (variation-of-constants) form
//! `u(t) = T(t-t0) u0 + (1/2) int_{t0}^t T(t-s) dx u^2(s) ds + W(t0, t)`.
//!
//! This is the existence/uniqueness surrogate the time stepper is checked
//! against: a different route to the same object (global trapezoidal
//! quadrature of the whole history with exact semigroup weights, iterated to
//! a fixed point, direct-convolution nonlinearity) rather than local
//! stepping with dealiased products. It is only meant for short horizons
//! where the iteration contracts.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::noise::{NoisePath, NoiseSpec, OuProcess};
use crate::solver::SolverConfig;
use crate::spectral::dx_product_direct_into;

#[derive(Debug, Clone)]
pub struct PicardResult {
    pub endpoint: SpectralField,
    /// sup-in-t fixed-point residual after each iteration
    pub residuals: Vec<f64>,
    /// Richardson estimate of the quadrature error plus the final residual
    pub error_estimate: f64,
}

/// Iterate the mild-solution map on the noise slot grid of `[t0, t1]`.
///
/// The horizon must stay at desk scale (<= 0.5 time units); beyond that the
/// iteration need not contract and the oracle refuses rather than guessing.
pub fn picard_mild_oracle(
    u0: &SpectralField,
    t0: f64,
    t1: f64,
    path: &NoisePath,
    spec: &NoiseSpec,
    cfg: &SolverConfig,
    iterations: usize,
) -> Result<PicardResult> {
    cfg.validate()?;
    if iterations == 0 {
        return Err(Error::InvalidConfig("need at least one iteration".into()));
    }
    if t1 - t0 > 0.5 + 1e-12 {
        return Err(Error::InvalidConfig(format!(
            "oracle horizon {} exceeds the contraction desk scale 0.5",
            t1 - t0
        )));
    }
    let s0 = path.slot_of(t0)?;
    let s1 = path.slot_of(t1)?;
    if s0 >= s1 {
        return Err(Error::InvalidConfig(format!("need t0 < t1, got [{t0}, {t1}]")));
    }
    let n = cfg.n_modes;
    let nq = (s1 - s0) as usize;
    let hq = path.h();
    let spec_n = spec.truncated(n);
    let mu: Vec<f64> = (1..=n).map(|k| cfg.nu * PI * PI * (k * k) as f64).collect();

    // exact convolution at every grid point
    let ou = OuProcess::new(&spec_n, cfg.nu, hq);
    let mut conv = Vec::with_capacity(nq + 1);
    let mut w = vec![0.0; n];
    conv.push(w.clone());
    for j in 0..nq {
        ou.step_into(&mut w, path, s0 + j as i64);
        conv.push(w.clone());
    }

    // semigroup powers: decay[d][k] = exp(-mu_k d hq)
    let step_factor: Vec<f64> = mu.iter().map(|m| (-m * hq).exp()).collect();
    let mut decay = Vec::with_capacity(nq + 1);
    decay.push(vec![1.0; n]);
    for d in 1..=nq {
        let prev = &decay[d - 1];
        decay.push(prev.iter().zip(&step_factor).map(|(p, f)| p * f).collect());
    }

    let u0n = u0.project(n).into_coeffs();
    let free_term = |i: usize| -> Vec<f64> {
        (0..n).map(|k| decay[i][k] * u0n[k] + conv[i][k]).collect()
    };

    let mut iterate: Vec<Vec<f64>> = (0..=nq).map(free_term).collect();
    let mut flux: Vec<Vec<f64>> = vec![vec![0.0; n]; nq + 1];
    let mut residuals = Vec::with_capacity(iterations);
    let scale = u0.l2_norm().max(1.0);

    let assemble = |flux: &[Vec<f64>], i: usize, coarsen: bool| -> Vec<f64> {
        // trapezoid of T(t_i - s) N(u(s)) over s = t_0..t_i
        let stride = if coarsen { 2 } else { 1 };
        let w_h = hq * stride as f64;
        let mut acc = vec![0.0; n];
        let mut j = 0;
        while j + stride <= i {
            for k in 0..n {
                acc[k] += 0.5
                    * w_h
                    * (decay[i - j][k] * flux[j][k] + decay[i - j - stride][k] * flux[j + stride][k]);
            }
            j += stride;
        }
        if j < i {
            // odd leftover interval at the end
            let w_r = hq * (i - j) as f64;
            for k in 0..n {
                acc[k] += 0.5 * w_r * (decay[i - j][k] * flux[j][k] + flux[i][k]);
            }
        }
        acc
    };

    for it in 0..iterations {
        for (uf, fl) in iterate.iter().zip(flux.iter_mut()) {
            dx_product_direct_into(uf, uf, fl);
            for f in fl.iter_mut() {
                *f *= 0.5;
            }
        }
        let mut max_delta = 0.0f64;
        let mut next = Vec::with_capacity(nq + 1);
        for i in 0..=nq {
            let mut un = free_term(i);
            let integral = assemble(&flux, i, false);
            for k in 0..n {
                un[k] += integral[k];
            }
            let delta: f64 = un
                .iter()
                .zip(&iterate[i])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            max_delta = max_delta.max(delta);
            next.push(un);
        }
        iterate = next;
        residuals.push(max_delta);
        if it >= 2 {
            let prev = residuals[it - 1];
            let before = residuals[it - 2];
            if max_delta > prev && prev > before && max_delta > 1e-12 * scale {
                return Err(Error::OracleDivergence { prev, next: max_delta });
            }
        }
        if max_delta < 1e-14 * scale {
            break;
        }
    }

    // quadrature estimate at the endpoint: full vs half resolution
    for (uf, fl) in iterate.iter().zip(flux.iter_mut()) {
        dx_product_direct_into(uf, uf, fl);
        for f in fl.iter_mut() {
            *f *= 0.5;
        }
    }
    let fine = assemble(&flux, nq, false);
    let coarse = assemble(&flux, nq, true);
    let richardson: f64 =
        fine.iter().zip(&coarse).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let error_estimate = richardson + residuals.last().copied().unwrap_or(0.0);

    Ok(PicardResult {
        endpoint: SpectralField::new(iterate[nq].clone()),
        residuals,
        error_estimate,
    })
}
