//! Closed-form results at the main quantum resonance `β = 1`.
//!
//! There the free phase is identically one, the propagator is a pure kick,
//! and momentum space behaves as a tight-binding lattice with band
//! `ε(q) = (K₀/ħ) cos(q + iy)`. The imaginary shift tilts the hopping,
//! which both amplifies the wavepacket and makes it drift.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::bessel::bessel_j_orders;
use crate::error::{Error, Result};
use crate::model::{gauge_form, minus_i_pow, RotorParams};

/// Largest number of node doublings tried by the quadrature.
pub const MAX_DOUBLINGS: usize = 6;
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, Serialize)]
pub struct Dispersion {
    /// `(q, εT)` on a uniform grid over `[-π, π)`.
    pub samples: Vec<(f64, Complex64)>,
    /// Saddle point `q₀ = -π/2` where `Im ε` peaks.
    pub q0: f64,
    /// `v_g = dε/dq` at `q₀`, in sites per kick.
    pub group_velocity: f64,
    /// `ε''` at `q₀`.
    pub eps2: Complex64,
    /// `Im ε(q₀)`, growth rate of the amplitude per kick.
    pub max_growth: f64,
}

fn require_main_resonance(params: &RotorParams) -> Result<()> {
    if params.beta().is_main_resonance() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "main-resonance analytics need beta = 1 (mod 1), got {}",
            params.beta().value()
        )))
    }
}

/// `εT(q) = (K₀/ħ) cos(q + iy)`.
pub fn band_energy(params: &RotorParams, q: f64) -> Complex64 {
    let g = gauge_form(params);
    Complex64::new(q, g.y).cos() * g.k0_scaled
}

pub fn dispersion(params: &RotorParams, q_count: usize) -> Result<Dispersion> {
    require_main_resonance(params)?;
    let g = gauge_form(params);
    let samples = (0..q_count)
        .map(|j| {
            let q = -PI + 2.0 * PI * j as f64 / q_count as f64;
            (q, band_energy(params, q))
        })
        .collect();
    let sinh = g.k0_scaled * g.y.sinh();
    Ok(Dispersion {
        samples,
        q0: -PI / 2.0,
        group_velocity: g.k0_scaled * g.y.cosh(),
        eps2: Complex64::new(0.0, -sinh),
        max_growth: sinh,
    })
}

/// `ψ_l(n)` for `l ∈ [-N_s, N_s]` from `ψ_0 = δ_{l,0}`, by trapezoidal
/// quadrature of `(1/2π) ∫ exp[iql - iε(q)n] dq`.
///
/// The node count starts at `16⌈nKe^y/π⌉ + 64` (at least `2N_s + 1`, rounded
/// up to a power of two) and doubles until no amplitude moves by more than
/// `1e-10` of the largest one.
pub fn exact_resonance_state(params: &RotorParams, n: usize) -> Result<Vec<Complex64>> {
    require_main_resonance(params)?;
    let ns = params.truncation();
    let g = gauge_form(params);
    let band = n as f64 * params.kick_strength() * g.y.exp() / PI;
    let start = (16 * band.ceil() as usize + 64).max(2 * ns + 1).next_power_of_two();
    let mut nodes = start;
    let mut previous = quadrature(params, n, nodes);
    for _ in 0..MAX_DOUBLINGS {
        nodes *= 2;
        let current = quadrature(params, n, nodes);
        let scale = current.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let change = current
            .iter()
            .zip(&previous)
            .map(|(a, b)| (a.norm() - b.norm()).abs())
            .fold(0.0, f64::max)
            / scale;
        if change <= QUADRATURE_TOLERANCE {
            return Ok(current);
        }
        previous = current;
        if nodes >= start << MAX_DOUBLINGS {
            return Err(Error::QuadratureUnresolved { nodes, change });
        }
    }
    unreachable!("loop returns within MAX_DOUBLINGS iterations")
}

fn quadrature(params: &RotorParams, n: usize, nodes: usize) -> Vec<Complex64> {
    let ns = params.truncation() as i64;
    let t = n as f64;
    let mut f: Vec<Complex64> = (0..nodes)
        .map(|j| {
            let q = -PI + 2.0 * PI * j as f64 / nodes as f64;
            (-Complex64::i() * band_energy(params, q) * t).exp()
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(nodes).process(&mut f);
    let scale = 1.0 / nodes as f64;
    (-ns..=ns)
        .map(|l| {
            let sign = if l.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            f[l.rem_euclid(nodes as i64) as usize] * (sign * scale)
        })
        .collect()
}

/// `ψ_l(n) = e^{yl} (-i)^l J_l(K₀n/ħ)` for `l ∈ [-N_s, N_s]`.
///
/// Shifting the integration contour by `iy` removes the complex argument,
/// leaving a real-argument Bessel function times the gauge factor.
pub fn closed_form_state(params: &RotorParams, n: usize) -> Result<Vec<Complex64>> {
    require_main_resonance(params)?;
    let ns = params.truncation();
    let g = gauge_form(params);
    let j = bessel_j_orders(g.k0_scaled * n as f64, ns);
    Ok((-(ns as i64)..=ns as i64)
        .map(|l| {
            let m = l.unsigned_abs() as usize;
            let mut jl = j[m];
            if l < 0 && m % 2 == 1 {
                jl = -jl;
            }
            let mag = if jl == 0.0 { 0.0 } else { jl * (g.y * l as f64).exp() };
            minus_i_pow(l) * mag
        })
        .collect())
}

/// `ln|ψ_l(n)|²` from the closed form, usable where `|ψ|²` itself would
/// overflow. Entries whose Bessel factor underflows are `-∞`.
pub fn closed_form_log_abs2(params: &RotorParams, n: usize) -> Result<Vec<f64>> {
    require_main_resonance(params)?;
    let ns = params.truncation();
    let g = gauge_form(params);
    let j = bessel_j_orders(g.k0_scaled * n as f64, ns);
    Ok((-(ns as i64)..=ns as i64)
        .map(|l| 2.0 * j[l.unsigned_abs() as usize].abs().ln() + 2.0 * g.y * l as f64)
        .collect())
}

/// Gaussian saddle-point form
/// `|ψ_l|² ≈ (2π|ε''|n)⁻¹ exp(2 Im ε(q₀) n) exp[-(l - v_g n)²/(|ε''| n)]`,
/// valid for `n ≫ 1`.
pub fn asymptotic_profile(params: &RotorParams, l: f64, n: f64) -> Result<f64> {
    Ok(asymptotic_log_profile(params, l, n)?.exp())
}

pub fn asymptotic_log_profile(params: &RotorParams, l: f64, n: f64) -> Result<f64> {
    require_main_resonance(params)?;
    if n <= 0.0 {
        return Err(Error::InvalidParameter("asymptotic profile needs n > 0".into()));
    }
    let d = dispersion(params, 0)?;
    let c = d.eps2.norm();
    if c == 0.0 {
        return Err(Error::InvalidParameter(
            "asymptotic profile is singular in the Hermitian limit".into(),
        ));
    }
    let x = l - d.group_velocity * n;
    Ok(-(2.0 * PI * c * n).ln() + 2.0 * d.max_growth * n - x * x / (c * n))
}

/// Mass, mean and spread of a distribution given as `ln w_l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogMoments {
    pub log_mass: f64,
    pub mean: f64,
    pub spread: f64,
}

/// Moments of `w_l = exp(log_w[i])` with `l = i - N_s`.
pub fn log_moments(log_w: &[f64]) -> LogMoments {
    let ns = (log_w.len() / 2) as f64;
    let top = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut m0, mut m1) = (0.0, 0.0);
    for (i, lw) in log_w.iter().enumerate() {
        let w = (lw - top).exp();
        m0 += w;
        m1 += (i as f64 - ns) * w;
    }
    let mean = m1 / m0;
    let mut var = 0.0;
    for (i, lw) in log_w.iter().enumerate() {
        let d = i as f64 - ns - mean;
        var += d * d * (lw - top).exp();
    }
    LogMoments {
        log_mass: top + m0.ln(),
        mean,
        spread: (var / m0).sqrt(),
    }
}
