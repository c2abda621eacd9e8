//! Dimensionless model of the kicked rotor with the complex sinusoidal
//! potential `V(x)/ħ = K [cos(2πx/a) + iλ sin(2πx/a)]`.
//!
//! Time is measured in kick periods and energies as `εT`, so the whole model
//! is fixed by the kick strength `K`, the non-Hermiticity `λ`, the effective
//! kicking parameter `β` and the momentum truncation `N_s`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::bessel::bessel_j_orders;
use crate::error::{Error, Result};

/// Coefficients at `|n| = n_max` must fall below this.
pub const DROP_TOLERANCE: f64 = 1e-12;

/// Oversampling of the x-grid used by the sampled route.
pub const OVERSAMPLING: usize = 8;

/// Effective kicking parameter, reduced modulo one.
///
/// The free-propagation phase `exp(-2πiβn²)` is unchanged by `β → β + 1`, so
/// only the fractional part matters. The reduced value lives in `(0, 1]`;
/// `β = 1` is kept as `1` (the main resonance) rather than folded onto `0`.
/// Rational values are kept exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Beta {
    raw: f64,
    value: f64,
    ratio: Option<(u64, u64)>,
}

impl Beta {
    pub fn new(raw: f64) -> Result<Self> {
        if !raw.is_finite() || raw <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "beta must be finite and positive, got {raw}"
            )));
        }
        let mut value = raw.rem_euclid(1.0);
        if value == 0.0 {
            value = 1.0;
        }
        Ok(Beta {
            raw,
            value,
            ratio: None,
        })
    }

    /// Builds `β` from the `2πβ` convention.
    pub fn from_two_pi(two_pi_beta: f64) -> Result<Self> {
        Self::new(two_pi_beta / (2.0 * PI))
    }

    /// Exact rational `β = numerator / denominator`.
    pub fn rational(numerator: u64, denominator: u64) -> Result<Self> {
        if denominator == 0 || numerator == 0 {
            return Err(Error::InvalidParameter(format!(
                "rational beta needs positive numerator and denominator, got {numerator}/{denominator}"
            )));
        }
        let mut n = numerator % denominator;
        let mut m = denominator;
        if n == 0 {
            n = 1;
            m = 1;
        }
        Ok(Beta {
            raw: numerator as f64 / denominator as f64,
            value: n as f64 / m as f64,
            ratio: Some((n, m)),
        })
    }

    /// The value as supplied, before reduction.
    pub fn raw(&self) -> f64 {
        self.raw
    }

    /// The reduced value in `(0, 1]`.
    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn two_pi(&self) -> f64 {
        2.0 * PI * self.value
    }

    /// `(N, M)` for an exact rational value, reduced modulo one.
    pub fn ratio(&self) -> Option<(u64, u64)> {
        self.ratio
    }

    pub fn is_main_resonance(&self) -> bool {
        self.value == 1.0
    }

    /// `exp(-2πiβl²)`.
    pub fn free_phase(&self, l: i64) -> Complex64 {
        match self.ratio {
            Some((n, m)) => {
                let l2 = (l as i128 * l as i128) as u128;
                let r = (n as u128 * (l2 % m as u128)) % m as u128;
                turn_phase(r as u64, m)
            }
            None => {
                let l2 = (l as f64) * (l as f64);
                let t = (self.value * l2).rem_euclid(1.0);
                Complex64::cis(-2.0 * PI * t)
            }
        }
    }

    /// `exp(-2πiβ(l+δ)²)` for a Bloch quasi-momentum offset `δ`.
    pub fn free_phase_shifted(&self, l: i64, delta: f64) -> Complex64 {
        if delta == 0.0 {
            return self.free_phase(l);
        }
        let p = l as f64 + delta;
        let t = (self.value * p * p).rem_euclid(1.0);
        Complex64::cis(-2.0 * PI * t)
    }
}

/// `exp(-2πi r/m)`, exact on quarter turns.
fn turn_phase(r: u64, m: u64) -> Complex64 {
    if (4 * r) % m == 0 {
        match (4 * r / m) % 4 {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, -1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, 1.0),
        }
    } else {
        Complex64::cis(-2.0 * PI * r as f64 / m as f64)
    }
}

/// The dimensionless rotor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RotorParams {
    kick_strength: f64,
    nonhermiticity: f64,
    beta: Beta,
    truncation: usize,
}

impl RotorParams {
    pub fn new(kick_strength: f64, nonhermiticity: f64, beta: Beta, truncation: usize) -> Result<Self> {
        if !(kick_strength.is_finite() && kick_strength > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "kick strength K must be positive, got {kick_strength}"
            )));
        }
        if !(0.0..1.0).contains(&nonhermiticity) {
            return Err(Error::InvalidParameter(format!(
                "non-Hermiticity must lie in [0, 1), got {nonhermiticity}"
            )));
        }
        if truncation == 0 {
            return Err(Error::InvalidParameter("truncation N_s must be at least 1".into()));
        }
        Ok(RotorParams {
            kick_strength,
            nonhermiticity,
            beta,
            truncation,
        })
    }

    pub fn kick_strength(&self) -> f64 {
        self.kick_strength
    }

    pub fn nonhermiticity(&self) -> f64 {
        self.nonhermiticity
    }

    pub fn beta(&self) -> Beta {
        self.beta
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Number of momentum sites, `2 N_s + 1`.
    pub fn dim(&self) -> usize {
        2 * self.truncation + 1
    }

    pub fn with_nonhermiticity(&self, nonhermiticity: f64) -> Result<Self> {
        Self::new(self.kick_strength, nonhermiticity, self.beta, self.truncation)
    }

    pub fn with_truncation(&self, truncation: usize) -> Result<Self> {
        Self::new(self.kick_strength, self.nonhermiticity, self.beta, truncation)
    }

    pub fn with_beta(&self, beta: Beta) -> Self {
        RotorParams { beta, ..*self }
    }

    /// The Hermitian rotor with kick strength `K √(1 - λ²)` that this one is
    /// gauge-equivalent to.
    pub fn hermitian_partner(&self) -> Self {
        RotorParams {
            kick_strength: gauge_form(self).k0_scaled,
            nonhermiticity: 0.0,
            ..*self
        }
    }
}

/// The potential written as a displaced cosine, `K₀ cos[2π(x - i x₀)/a]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaugeForm {
    /// `K₀/ħ = K √(1 - λ²)`.
    pub k0_scaled: f64,
    /// Imaginary displacement `y = 2πx₀/a = atanh λ`.
    pub y: f64,
}

pub fn gauge_form(params: &RotorParams) -> GaugeForm {
    let lambda = params.nonhermiticity;
    GaugeForm {
        k0_scaled: params.kick_strength * (1.0 - lambda * lambda).sqrt(),
        y: lambda.atanh(),
    }
}

/// `V(x)/ħ` at `x/a`.
pub fn potential_value(x_over_a: f64, params: &RotorParams) -> Complex64 {
    let (s, c) = (2.0 * PI * x_over_a).sin_cos();
    Complex64::new(
        params.kick_strength * c,
        params.kick_strength * params.nonhermiticity * s,
    )
}

/// Which computation produced a set of kick coefficients.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum KickRoute {
    /// Discrete Fourier analysis of sampled `exp[-iV(x)/ħ]`.
    Sampled,
    /// Jacobi–Anger form `(-i)^n J_n(K₀/ħ) e^{n y}`.
    ClosedForm,
}

/// Fourier coefficients `W_n` of the one-kick factor `exp[-iV(x)/ħ]`,
/// for `n ∈ [-n_max, n_max]`.
#[derive(Clone, Debug)]
pub struct KickCoefficients {
    n_max: usize,
    w: Vec<Complex64>,
    potential: [Complex64; 2],
    route: KickRoute,
}

impl KickCoefficients {
    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn route(&self) -> KickRoute {
        self.route
    }

    /// `W_n`; zero outside the stored band.
    pub fn w(&self, n: i64) -> Complex64 {
        if n.unsigned_abs() as usize > self.n_max {
            Complex64::new(0.0, 0.0)
        } else {
            self.w[(n + self.n_max as i64) as usize]
        }
    }

    /// `(n, W_n)` in increasing `n`.
    pub fn iter(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let off = self.n_max as i64;
        self.w.iter().enumerate().map(move |(i, &w)| (i as i64 - off, w))
    }

    /// Fourier coefficient `V_n` of `V(x)/ħ`; only `n = ±1` are nonzero.
    pub fn potential(&self, n: i64) -> Complex64 {
        match n {
            1 => self.potential[0],
            -1 => self.potential[1],
            _ => Complex64::new(0.0, 0.0),
        }
    }

    /// `max(|W_{-n_max}|, |W_{n_max}|)`.
    pub fn tail(&self) -> f64 {
        self.w[0].norm().max(self.w[2 * self.n_max].norm())
    }

    /// `Σ |W_n|²`.
    pub fn total_weight(&self) -> f64 {
        self.w.iter().map(|w| w.norm_sqr()).sum()
    }

    fn checked(self) -> Result<Self> {
        let tail = self.tail();
        if tail > DROP_TOLERANCE || !tail.is_finite() {
            return Err(Error::TailNotDecayed {
                n_max: self.n_max,
                tail,
                tolerance: DROP_TOLERANCE,
            });
        }
        Ok(self)
    }
}

/// `max(32, ⌈4 K e^y⌉)`.
pub fn default_n_max(params: &RotorParams) -> usize {
    let g = gauge_form(params);
    let band = (4.0 * params.kick_strength * g.y.exp()).ceil() as usize;
    band.max(32)
}

fn potential_pair(params: &RotorParams) -> [Complex64; 2] {
    let half = 0.5 * params.kick_strength;
    let lambda = params.nonhermiticity;
    [
        Complex64::new(half * (1.0 + lambda), 0.0),
        Complex64::new(half * (1.0 - lambda), 0.0),
    ]
}

/// Kick coefficients by sampling `exp[-iV(x)/ħ]` on a uniform grid of at
/// least `8 (2 n_max + 1)` points and taking its discrete Fourier transform.
pub fn kick_coefficients(params: &RotorParams, n_max: usize) -> Result<KickCoefficients> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let grid = (OVERSAMPLING * (2 * n_max + 1)).next_power_of_two();
    let mut samples: Vec<Complex64> = (0..grid)
        .map(|j| (-Complex64::i() * potential_value(j as f64 / grid as f64, params)).exp())
        .collect();
    FftPlanner::new().plan_fft_forward(grid).process(&mut samples);
    let scale = 1.0 / grid as f64;
    let w = (-(n_max as i64)..=n_max as i64)
        .map(|n| samples[n.rem_euclid(grid as i64) as usize] * scale)
        .collect();
    KickCoefficients {
        n_max,
        w,
        potential: potential_pair(params),
        route: KickRoute::Sampled,
    }
    .checked()
}

/// Kick coefficients from the Jacobi–Anger expansion of the displaced
/// cosine: `W_n = (-i)^n J_n(K₀/ħ) e^{n y}`.
pub fn kick_coefficients_closed_form(params: &RotorParams, n_max: usize) -> Result<KickCoefficients> {
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let g = gauge_form(params);
    let j = bessel_j_orders(g.k0_scaled, n_max);
    let w = (-(n_max as i64)..=n_max as i64)
        .map(|n| {
            let m = n.unsigned_abs() as usize;
            let mut jn = j[m];
            if n < 0 && m % 2 == 1 {
                jn = -jn;
            }
            // J underflows long before e^{ny} overflows
            let mag = if jn == 0.0 { 0.0 } else { jn * (n as f64 * g.y).exp() };
            minus_i_pow(n) * mag
        })
        .collect();
    KickCoefficients {
        n_max,
        w,
        potential: potential_pair(params),
        route: KickRoute::ClosedForm,
    }
    .checked()
}

/// `(-i)^n`.
pub(crate) fn minus_i_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, -1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, 1.0),
    }
}
