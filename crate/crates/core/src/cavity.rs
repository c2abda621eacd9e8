//! Optical emulation of the kicked rotor in a Fabry–Perot cavity.
//!
//! A broad beam circulates between two mirrors. Each round trip it diffracts
//! over the mirror spacing and then crosses a phase grating `A cos(2πx/a)`
//! and a loss grating `Aλ[1 - sin(2πx/a)]`. Writing the transverse wave
//! number as `2π(l + δ)/a`, one round trip acts on the diffraction orders
//! `l` exactly as one kick of the rotor with `K = A` and `β = λ₀L/a²`, up
//! to a uniform loss `exp(-Aλ)`. A lens maps the orders onto a row of
//! focal-plane peaks spaced by `λ₀f/a`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::config::{parse_flat, parse_length};
use crate::dynamics::{EvolveOptions, Evolution, KickPropagator, MomentumState};
use crate::error::{Error, Result};
use crate::model::{Beta, RotorParams};

/// Fraction of the grid at each end that the beam must stay out of.
pub const WINDOW_FRACTION: f64 = 0.05;
pub const WINDOW_TOLERANCE: f64 = 1e-8;
/// Minimum transverse sampling accepted by validation.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 16.0;

/// Physical description of the cavity. Lengths are in metres.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CavityConfig {
    /// Phase-grating depth `A` in radians; plays the role of `K`.
    pub grating_amplitude: f64,
    /// Loss-to-phase ratio `λ`.
    pub nonhermiticity: f64,
    /// Grating period `a`.
    pub period: f64,
    /// Wavelength `λ₀`.
    pub wavelength: f64,
    /// Mirror spacing `L`.
    pub mirror_spacing: f64,
    /// Focal length `f` of the imaging lens.
    pub focal_length: f64,
    /// Waist `w₀` of the injected Gaussian `exp(-x²/w₀²)`.
    pub waist: f64,
    /// Width of the periodic transverse window.
    pub extent: f64,
    /// Transverse samples; a power of two.
    pub points: usize,
    pub round_trips: usize,
}

impl CavityConfig {
    /// Mirror spacing that realizes `β`.
    pub fn mirror_spacing_for(beta: f64, period: f64, wavelength: f64) -> f64 {
        beta * period * period / wavelength
    }

    fn preset(beta: f64) -> Self {
        let period = 300e-6;
        let wavelength = 780e-9;
        CavityConfig {
            grating_amplitude: 3.0,
            nonhermiticity: 1.0 / 30.0,
            period,
            wavelength,
            mirror_spacing: Self::mirror_spacing_for(beta, period, wavelength),
            focal_length: 5e-2,
            waist: 100.0 / PI * period,
            // a whole number of periods, so every order lands on a bin
            extent: 382.0 * period,
            points: 1 << 16,
            round_trips: 20,
        }
    }

    /// Localized regime, `β = 1/(4π)`.
    pub fn fig6() -> Self {
        Self::preset(1.0 / (4.0 * PI))
    }

    /// Resonant ratchet regime, `β = 1/12`.
    pub fn fig7() -> Self {
        Self::preset(1.0 / 12.0)
    }

    /// `β = λ₀L/a²`.
    pub fn beta(&self) -> f64 {
        self.wavelength * self.mirror_spacing / (self.period * self.period)
    }

    /// `γ = Aλ`.
    pub fn gamma(&self) -> f64 {
        self.grating_amplitude * self.nonhermiticity
    }

    /// Focal-plane distance between adjacent orders, `λ₀f/a`.
    pub fn peak_spacing(&self) -> f64 {
        self.wavelength * self.focal_length / self.period
    }

    pub fn dx(&self) -> f64 {
        self.extent / self.points as f64
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        let lengths = [
            ("period", self.period),
            ("wavelength", self.wavelength),
            ("mirror_spacing", self.mirror_spacing),
            ("focal_length", self.focal_length),
            ("waist", self.waist),
            ("extent", self.extent),
        ];
        for (name, v) in lengths {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be a positive length, got {v}"));
            }
        }
        if !(self.grating_amplitude.is_finite() && self.grating_amplitude >= 0.0) {
            return bad(format!("grating amplitude must be non-negative, got {}", self.grating_amplitude));
        }
        if !(0.0..1.0).contains(&self.nonhermiticity) {
            return bad(format!("non-Hermiticity must lie in [0, 1), got {}", self.nonhermiticity));
        }
        if !self.points.is_power_of_two() || self.points < 16 {
            return bad(format!("points must be a power of two >= 16, got {}", self.points));
        }
        if self.extent < 6.0 * self.waist {
            return bad(format!(
                "grid extent {:.4e} m is below six waists ({:.4e} m)",
                self.extent,
                6.0 * self.waist
            ));
        }
        let per_period = self.period / self.dx();
        if per_period < MIN_SAMPLES_PER_PERIOD {
            return bad(format!("only {per_period:.2} samples per grating period; need 16"));
        }
        Ok(())
    }

    /// Applies one `key = value` setting. Lengths accept `nm`, `um`/`μm`,
    /// `mm`, `cm` and `m` suffixes. `beta` sets the mirror spacing and
    /// `waist_over_period` the waist, from the current period and wavelength.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a number"));
        match key {
            "A" | "grating_amplitude" => self.grating_amplitude = num(value)?,
            "lambda" | "nonhermiticity" => self.nonhermiticity = parse_fraction(value)?,
            "period" | "a" => self.period = parse_length(value)?,
            "wavelength" => self.wavelength = parse_length(value)?,
            "mirror_spacing" | "L" => self.mirror_spacing = parse_length(value)?,
            "beta" => {
                let b = parse_beta_value(value)?;
                self.mirror_spacing = Self::mirror_spacing_for(b, self.period, self.wavelength);
            }
            "focal_length" | "f" => self.focal_length = parse_length(value)?,
            "waist" | "w0" => self.waist = parse_length(value)?,
            "waist_over_period" => self.waist = num(value)? * self.period,
            "extent" => self.extent = parse_length(value)?,
            "extent_periods" => self.extent = num(value)? * self.period,
            "points" => {
                self.points = value
                    .trim()
                    .parse()
                    .map_err(|_| format!("`{value}` is not a point count"))?
            }
            "round_trips" | "trips" => {
                self.round_trips = value
                    .trim()
                    .parse()
                    .map_err(|_| format!("`{value}` is not a trip count"))?
            }
            _ => return Err(format!("unknown cavity key `{key}`")),
        }
        Ok(())
    }

    /// Applies a flat configuration text on top of `self`.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for e in parse_flat(text)? {
            self.set(&e.key, &e.value).map_err(|message| Error::Config {
                line: e.line,
                message,
            })?;
        }
        Ok(())
    }

    /// The rotor this cavity emulates, with momentum truncation `N_s`.
    pub fn rotor_params(&self, truncation: usize) -> Result<RotorParams> {
        RotorParams::new(
            self.grating_amplitude,
            self.nonhermiticity,
            Beta::new(self.beta())?,
            truncation,
        )
    }
}

fn parse_fraction(v: &str) -> Result<f64, String> {
    let v = v.trim();
    if let Some((n, d)) = v.split_once('/') {
        let n: f64 = n.trim().parse().map_err(|_| format!("`{v}` is not a fraction"))?;
        let d: f64 = d.trim().parse().map_err(|_| format!("`{v}` is not a fraction"))?;
        Ok(n / d)
    } else {
        v.parse().map_err(|_| format!("`{v}` is not a number"))
    }
}

/// `0.0833`, `1/12` or `1/4pi`.
fn parse_beta_value(v: &str) -> Result<f64, String> {
    let t = v.trim();
    if let Some((n, d)) = t.split_once('/') {
        let n: f64 = n.trim().parse().map_err(|_| format!("`{v}` is not a beta"))?;
        let d = d.trim();
        let denom = match d.strip_suffix("pi") {
            Some(c) if c.trim().is_empty() => PI,
            Some(c) => c.trim().parse::<f64>().map_err(|_| format!("`{v}` is not a beta"))? * PI,
            None => d.parse::<f64>().map_err(|_| format!("`{v}` is not a beta"))?,
        };
        Ok(n / denom)
    } else {
        parse_fraction(t)
    }
}

/// Derived physical scales.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UnitReport {
    /// Talbot length `a²/λ₀`, metres.
    pub talbot_length: f64,
    pub beta: f64,
    pub mirror_spacing: f64,
    /// `λ₀f/a`, metres.
    pub peak_spacing: f64,
    pub waist: f64,
    pub waist_over_period: f64,
    pub gamma: f64,
}

pub fn physical_units(config: &CavityConfig) -> UnitReport {
    UnitReport {
        talbot_length: config.period * config.period / config.wavelength,
        beta: config.beta(),
        mirror_spacing: config.mirror_spacing,
        peak_spacing: config.peak_spacing(),
        waist: config.waist,
        waist_over_period: config.waist / config.period,
        gamma: config.gamma(),
    }
}

/// Complex transverse field on the grid `x_j = (j - N/2) dx`.
#[derive(Clone, Debug)]
pub struct TransverseField {
    pub samples: Vec<Complex64>,
    pub round_trip: usize,
}

impl TransverseField {
    /// `exp(-x²/w₀²)`.
    pub fn gaussian(config: &CavityConfig) -> Self {
        let samples = positions(config)
            .map(|x| Complex64::new((-(x * x) / (config.waist * config.waist)).exp(), 0.0))
            .collect();
        TransverseField {
            samples,
            round_trip: 0,
        }
    }

    /// `∫|ψ|² dx`.
    pub fn power(&self, dx: f64) -> f64 {
        self.samples.iter().map(|c| c.norm_sqr()).sum::<f64>() * dx
    }

    /// Power fraction within [`WINDOW_FRACTION`] of either grid edge.
    pub fn edge_fraction(&self) -> f64 {
        let n = self.samples.len();
        let band = ((WINDOW_FRACTION * n as f64).ceil() as usize).max(1);
        let total: f64 = self.samples.iter().map(|c| c.norm_sqr()).sum();
        let edge: f64 = self.samples[..band]
            .iter()
            .chain(&self.samples[n - band..])
            .map(|c| c.norm_sqr())
            .sum();
        edge / total
    }
}

fn positions(config: &CavityConfig) -> impl Iterator<Item = f64> {
    let dx = config.dx();
    let half = (config.points / 2) as f64;
    (0..config.points).map(move |j| (j as f64 - half) * dx)
}

/// `k` of FFT bin `m` (unshifted order).
fn wavenumber(m: usize, n: usize, extent: f64) -> f64 {
    let signed = if m < n / 2 { m as i64 } else { m as i64 - n as i64 };
    2.0 * PI * signed as f64 / extent
}

/// Round-trip operator for one configuration, with cached transforms.
pub struct Cavity {
    config: CavityConfig,
    propagator: Vec<Complex64>,
    transmission: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Cavity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cavity")
            .field("config", &self.config)
            .finish_non_exhaustive()
    }
}

impl Cavity {
    pub fn new(config: &CavityConfig) -> Result<Self> {
        config.validate()?;
        let n = config.points;
        let k0 = 2.0 * PI / config.wavelength;
        let diffraction = config.mirror_spacing / k0;
        let propagator = (0..n)
            .map(|m| {
                let k = wavenumber(m, n, config.extent);
                Complex64::cis(-diffraction * k * k)
            })
            .collect();
        let a = config.grating_amplitude;
        let lambda = config.nonhermiticity;
        let transmission = positions(config)
            .map(|x| {
                let (s, c) = (2.0 * PI * x / config.period).sin_cos();
                let theta1 = a * c;
                let theta2 = a * lambda * (1.0 - s);
                Complex64::new(-theta2, -theta1).exp()
            })
            .collect();
        let mut planner = FftPlanner::new();
        Ok(Cavity {
            config: config.clone(),
            propagator,
            transmission,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn config(&self) -> &CavityConfig {
        &self.config
    }

    /// Diffraction over `L`, then both gratings. Fails once the beam
    /// reaches the edges of the window.
    pub fn roundtrip(&self, field: &mut TransverseField) -> Result<()> {
        let n = self.config.points;
        if field.samples.len() != n {
            return Err(Error::MismatchedParams(format!(
                "field has {} samples, cavity grid {}",
                field.samples.len(),
                n
            )));
        }
        self.forward.process(&mut field.samples);
        let scale = 1.0 / n as f64;
        for (f, p) in field.samples.iter_mut().zip(&self.propagator) {
            *f *= p * scale;
        }
        self.inverse.process(&mut field.samples);
        for (f, t) in field.samples.iter_mut().zip(&self.transmission) {
            *f *= t;
        }
        field.round_trip += 1;
        let edge = field.edge_fraction();
        if !(edge < WINDOW_TOLERANCE) {
            return Err(Error::WindowOverflow {
                round_trip: field.round_trip,
                edge_fraction: edge,
            });
        }
        Ok(())
    }

    /// Focal-plane intensity of `field`.
    pub fn far_field(&self, field: &TransverseField) -> FarField {
        far_field(field, &self.config)
    }
}

/// Integrated power in one diffraction order.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Peak {
    pub order: i64,
    /// Focal-plane position of the intensity maximum, metres.
    pub position: f64,
    pub power: f64,
}

/// Focal-plane intensity on `X = (λ₀f/2π) k_x`, ascending in `X`.
#[derive(Clone, Debug)]
pub struct FarField {
    pub positions: Vec<f64>,
    /// Power density per unit `X`, normalized so that `Σ I ΔX` equals the
    /// near-field power `∫|ψ|² dx`.
    pub intensity: Vec<f64>,
    pub spacing: f64,
    pub peaks: Vec<Peak>,
}

impl FarField {
    pub fn total_power(&self) -> f64 {
        let dx_far = self.positions[1] - self.positions[0];
        self.intensity.iter().sum::<f64>() * dx_far
    }

    /// `⟨X⟩` and `⟨ΔX⟩` over the whole window, in units of the spacing.
    pub fn moments(&self) -> (f64, f64) {
        let (mut m0, mut m1) = (0.0, 0.0);
        for (x, i) in self.positions.iter().zip(&self.intensity) {
            m0 += i;
            m1 += x / self.spacing * i;
        }
        let mean = m1 / m0;
        let var = self
            .positions
            .iter()
            .zip(&self.intensity)
            .map(|(x, i)| (x / self.spacing - mean).powi(2) * i)
            .sum::<f64>()
            / m0;
        (mean, var.sqrt())
    }

    pub fn peak(&self, order: i64) -> Option<&Peak> {
        self.peaks.iter().find(|p| p.order == order)
    }
}

/// Transforms `field` with kernel `exp(-ik_x x)` and bins the intensity into
/// orders: order `l` collects every `X` within half a spacing of `l λ₀f/a`.
pub fn far_field(field: &TransverseField, config: &CavityConfig) -> FarField {
    let n = field.samples.len();
    let mut spec = field.samples.clone();
    FftPlanner::new().plan_fft_forward(n).process(&mut spec);
    let dx = config.extent / n as f64;
    let dk = 2.0 * PI / config.extent;
    let x_per_k = config.wavelength * config.focal_length / (2.0 * PI);
    // |F̃(k)|²/2π with F̃ = dx·DFT integrates to the near-field power over k
    let density = dx * dx / (2.0 * PI) / x_per_k;
    let half = n / 2;
    let mut positions = Vec::with_capacity(n);
    let mut intensity = Vec::with_capacity(n);
    for i in 0..n {
        let m = (i + half) % n;
        positions.push(wavenumber(m, n, config.extent) * x_per_k);
        intensity.push(spec[m].norm_sqr() * density);
    }
    let spacing = config.peak_spacing();
    let dxf = dk * x_per_k;
    let mut peaks: Vec<Peak> = Vec::new();
    let mut top = 0.0;
    for (x, &i) in positions.iter().zip(&intensity) {
        let order = (x / spacing).round() as i64;
        match peaks.last_mut() {
            Some(p) if p.order == order => {
                p.power += i * dxf;
                if i > top {
                    top = i;
                    p.position = *x;
                }
            }
            _ => {
                top = i;
                peaks.push(Peak {
                    order,
                    position: *x,
                    power: i * dxf,
                })
            }
        }
    }
    FarField {
        positions,
        intensity,
        spacing,
        peaks,
    }
}

/// Observables after one round trip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TripRecord {
    pub round_trip: usize,
    /// Power relative to the injected beam.
    pub power: f64,
    /// `⟨X⟩` in units of `λ₀f/a`.
    pub mean_x: f64,
    /// `⟨ΔX⟩` in units of `λ₀f/a`.
    pub std_x: f64,
}

#[derive(Clone, Debug)]
pub struct DecayRun {
    pub records: Vec<TripRecord>,
    /// Far field after each trip, starting with the injected beam.
    pub far_fields: Vec<FarField>,
    pub final_field: TransverseField,
}

/// Injects `exp(-x²/w₀²)` and follows it for `config.round_trips` trips.
pub fn run_decay(config: &CavityConfig) -> Result<DecayRun> {
    let cavity = Cavity::new(config)?;
    let mut field = TransverseField::gaussian(config);
    let p0 = field.power(config.dx());
    let mut records = Vec::with_capacity(config.round_trips + 1);
    let mut far_fields = Vec::with_capacity(config.round_trips + 1);
    let mut record = |field: &TransverseField| {
        let ff = cavity.far_field(field);
        let (mean_x, std_x) = ff.moments();
        records.push(TripRecord {
            round_trip: field.round_trip,
            power: field.power(config.dx()) / p0,
            mean_x,
            std_x,
        });
        far_fields.push(ff);
    };
    record(&field);
    for _ in 0..config.round_trips {
        cavity.roundtrip(&mut field)?;
        record(&field);
    }
    Ok(DecayRun {
        records,
        far_fields,
        final_field: field,
    })
}

/// Peak-by-peak comparison at one round trip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TripComparison {
    pub round_trip: usize,
    /// Largest `|cavity/rotor - 1|` over peaks holding more than 1% of the
    /// power.
    pub worst_relative: f64,
    pub compared_peaks: usize,
    /// Cavity `⟨X⟩`, in spacings.
    pub centroid_cavity: f64,
    /// Rotor `⟨l⟩`.
    pub centroid_rotor: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EquivalenceReport {
    pub trips: Vec<TripComparison>,
    pub worst_relative: f64,
    pub worst_centroid: f64,
}

/// Share of the total power a peak needs to be compared.
pub const COMPARED_PEAK_SHARE: f64 = 0.01;

/// Rotor prediction per trip: order powers and the centroid in spacings.
struct Reference {
    abs2: Vec<Vec<f64>>,
    centroids: Vec<f64>,
}

fn compare(run: &DecayRun, gamma: f64, reference: &Reference, truncation: usize) -> EquivalenceReport {
    let ns = truncation as i64;
    let p0 = run.far_fields[0].total_power();
    let mut trips = Vec::new();
    for (n, (ff, rotor)) in run.far_fields.iter().zip(&reference.abs2).enumerate() {
        let total: f64 = ff.peaks.iter().map(|p| p.power).sum();
        let loss = (-2.0 * gamma * n as f64).exp();
        let mut worst: f64 = 0.0;
        let mut compared = 0;
        for p in &ff.peaks {
            if p.power <= COMPARED_PEAK_SHARE * total {
                continue;
            }
            let expected = if p.order.abs() <= ns {
                rotor[(p.order + ns) as usize] * loss
            } else {
                0.0
            };
            worst = worst.max((p.power / p0 / expected - 1.0).abs());
            compared += 1;
        }
        trips.push(TripComparison {
            round_trip: n,
            worst_relative: worst,
            compared_peaks: compared,
            centroid_cavity: run.records[n].mean_x,
            centroid_rotor: reference.centroids[n],
        });
    }
    let worst_relative = trips.iter().map(|t| t.worst_relative).fold(0.0, f64::max);
    let worst_centroid = trips
        .iter()
        .map(|t| (t.centroid_cavity - t.centroid_rotor).abs())
        .fold(0.0, f64::max);
    EquivalenceReport {
        trips,
        worst_relative,
        worst_centroid,
    }
}

fn check_match(config: &CavityConfig, params: &RotorParams) -> Result<()> {
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0);
    let beta_cavity = Beta::new(config.beta())?.value();
    if !close(params.kick_strength(), config.grating_amplitude)
        || !close(params.nonhermiticity(), config.nonhermiticity)
        || !close(params.beta().value(), beta_cavity)
    {
        return Err(Error::MismatchedParams(format!(
            "cavity (A = {}, λ = {}, β = {}) vs rotor (K = {}, λ = {}, β = {})",
            config.grating_amplitude,
            config.nonhermiticity,
            beta_cavity,
            params.kick_strength(),
            params.nonhermiticity(),
            params.beta().value()
        )));
    }
    Ok(())
}

/// Compares the cavity's far-field peaks with a rotor trajectory started
/// from `δ_{l,0}`: the power of order `l` after `n` trips, over the injected
/// power, against `|ψ_l(n)|² exp(-2γn)`.
///
/// The rotor run must cover every trip with a snapshot.
pub fn rotor_equivalence(config: &CavityConfig, run: &DecayRun, rotor: &Evolution) -> Result<EquivalenceReport> {
    let params = rotor_params_of(rotor)?;
    check_match(config, &params)?;
    let trips = run.far_fields.len();
    let mut reference = Vec::with_capacity(trips);
    for n in 0..trips {
        let snap = rotor
            .snapshots
            .iter()
            .find(|s| s.kick == n)
            .ok_or_else(|| Error::MismatchedParams(format!("rotor run has no snapshot at kick {n}")))?;
        reference.push(snap.abs2.clone());
    }
    let ns = params.truncation() as i64;
    let centroids = reference
        .iter()
        .map(|w| {
            let m0: f64 = w.iter().sum();
            let m1: f64 = w.iter().enumerate().map(|(i, p)| (i as i64 - ns) as f64 * p).sum();
            m1 / m0
        })
        .collect();
    let reference = Reference {
        abs2: reference,
        centroids,
    };
    Ok(compare(run, config.gamma(), &reference, params.truncation()))
}

fn rotor_params_of(rotor: &Evolution) -> Result<RotorParams> {
    if rotor.quasi_momentum != 0.0 {
        return Err(Error::MismatchedParams(format!(
            "rotor run has quasi-momentum {}, expected 0",
            rotor.quasi_momentum
        )));
    }
    Ok(rotor.params)
}

/// Rotor trajectory matching a cavity run, with a snapshot at every trip.
pub fn matching_rotor_run(config: &CavityConfig, truncation: usize) -> Result<Evolution> {
    let params = config.rotor_params(truncation)?;
    let options = EvolveOptions {
        snapshots: (0..=config.round_trips).collect(),
        ..Default::default()
    };
    crate::dynamics::evolve(&params, config.round_trips, &options)
}

/// Same comparison against the quasi-momentum average of rotors.
///
/// The injected beam spans a narrow range of transverse wave numbers
/// around each order, `k = 2π(l + δ)/a`. Each `δ` evolves as a rotor with
/// free phase `exp[-2πiβ(l+δ)²]`; weighting these by the beam's spectrum
/// reproduces the cavity exactly, up to the transform roundoff.
pub fn bloch_equivalence(config: &CavityConfig, run: &DecayRun, truncation: usize) -> Result<EquivalenceReport> {
    let params = config.rotor_params(truncation)?;
    let spectrum = &run.far_fields[0];
    let spacing = spectrum.spacing;
    let top = spectrum.intensity.iter().copied().fold(0.0, f64::max);
    let total: f64 = spectrum.intensity.iter().sum();
    let trips = config.round_trips;
    let mut reference = vec![vec![0.0; params.dim()]; trips + 1];
    let mut moments = vec![(0.0, 0.0); trips + 1];
    let ns = truncation as i64;
    for (x, w) in spectrum.positions.iter().zip(&spectrum.intensity) {
        let delta = x / spacing;
        if delta.abs() >= 0.5 || *w < 1e-16 * top {
            continue;
        }
        let weight = w / total;
        let mut prop = KickPropagator::with_quasi_momentum(&params, delta);
        let mut state = MomentumState::delta(truncation);
        for (n, (slot, m)) in reference.iter_mut().zip(&mut moments).enumerate() {
            if n > 0 {
                prop.step(&mut state)?;
            }
            for (l, (r, c)) in (-ns..).zip(slot.iter_mut().zip(state.amplitudes())) {
                let p = weight * c.norm_sqr();
                *r += p;
                m.0 += p;
                m.1 += (l as f64 + delta) * p;
            }
        }
    }
    let reference = Reference {
        abs2: reference,
        centroids: moments.iter().map(|(m0, m1)| m1 / m0).collect(),
    };
    Ok(compare(run, config.gamma(), &reference, truncation))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(beta: f64) -> CavityConfig {
        CavityConfig {
            waist: 6.0 * 300e-6,
            extent: 64.0 * 300e-6,
            points: 4096,
            round_trips: 6,
            ..CavityConfig::preset(beta)
        }
    }

    #[test]
    fn unit_report_matches_the_worked_numbers() {
        let r6 = physical_units(&CavityConfig::fig6());
        let r7 = physical_units(&CavityConfig::fig7());
        let sig4 = |v: f64, target: f64| ((v - target) / target).abs() < 5e-4;
        assert!(sig4(r6.talbot_length, 0.1154));
        assert!(sig4(r6.mirror_spacing, 9.182e-3));
        assert!(sig4(r7.mirror_spacing, 9.615e-3));
        assert!(sig4(r6.peak_spacing, 130e-6));
        assert!(sig4(r6.waist, 9.549e-3));
        assert!((r6.gamma - 0.1).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(CavityConfig::fig6().validate().is_ok());
        let mut c = small(0.1);
        c.points = 1000;
        assert!(c.validate().is_err());
        let mut c = small(0.1);
        c.points = 512;
        assert!(c.validate().is_err());
        let mut c = small(0.1);
        c.extent = 5.0 * c.waist;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_text() {
        let mut c = CavityConfig::fig6();
        c.apply_text("A = 2.5\nbeta = 1/12\nwavelength = 0.78um\nlambda = 1/30\n").unwrap();
        assert_eq!(c.grating_amplitude, 2.5);
        assert!((c.beta() - 1.0 / 12.0).abs() < 1e-12);
        c.apply_text("beta = 1/4pi").unwrap();
        assert!((c.beta() - 1.0 / (4.0 * PI)).abs() < 1e-12);
        match c.apply_text("A = 1\ncolour = red\n") {
            Err(Error::Config { line: 2, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn far_field_preserves_power() {
        let c = small(0.1);
        let field = TransverseField::gaussian(&c);
        let ff = far_field(&field, &c);
        let near = field.power(c.dx());
        assert!((ff.total_power() - near).abs() < 1e-12 * near);
        let peaks: f64 = ff.peaks.iter().map(|p| p.power).sum();
        assert!((peaks - near).abs() < 1e-12 * near);
        assert!(ff.peak(0).unwrap().power > 0.999999 * near);
        assert_eq!(ff.peak(0).unwrap().position, 0.0);
        let (m, _) = ff.moments();
        assert!(m.abs() < 1e-12);
    }

    #[test]
    fn lossless_gratings_conserve_power() {
        let mut c = small(0.1);
        c.nonhermiticity = 0.0;
        let run = run_decay(&c).unwrap();
        for r in &run.records {
            assert!((r.power - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn round_trip_is_a_lossy_kick_on_periodic_fields() {
        // a grating-periodic input lives on the orders alone, so one trip is
        // e^{-γ} times one rotor kick
        let c = small(0.1);
        let cavity = Cavity::new(&c).unwrap();
        let params = c.rotor_params(40).unwrap();
        let nper = 64.0;
        let coeffs: Vec<(i64, Complex64)> = vec![
            (0, Complex64::new(1.0, 0.0)),
            (1, Complex64::new(0.3, -0.2)),
            (-2, Complex64::new(0.0, 0.5)),
        ];
        let samples = positions(&c)
            .map(|x| {
                coeffs
                    .iter()
                    .map(|(l, a)| a * Complex64::cis(2.0 * PI * *l as f64 * x / c.period))
                    .sum()
            })
            .collect();
        // the periodic field fills the window, so skip the edge guard
        let mut field = TransverseField {
            samples,
            round_trip: 0,
        };
        let _ = cavity.roundtrip(&mut field);
        let mut amps = vec![Complex64::new(0.0, 0.0); 81];
        for (l, a) in &coeffs {
            amps[(l + 40) as usize] = *a;
        }
        let mut state = MomentumState::from_amplitudes(amps).unwrap();
        KickPropagator::new(&params).step(&mut state).unwrap();
        let mut spec = field.samples.clone();
        FftPlanner::new().plan_fft_forward(c.points).process(&mut spec);
        let loss = (-c.gamma()).exp();
        // DFT bin of order l is l·(extent/period); phase of x₀ = -extent/2 cancels for whole periods
        for l in -40i64..=40 {
            let m = (l * nper as i64).rem_euclid(c.points as i64) as usize;
            let x0_phase = Complex64::cis(2.0 * PI * l as f64 * (c.extent / 2.0) / c.period);
            let cav = spec[m] / c.points as f64 * x0_phase;
            assert!((cav - state.amplitude(l) * loss).norm() < 1e-8, "l = {l}");
        }
    }

    #[test]
    fn free_gaussian_diffraction() {
        let mut c = small(0.1);
        c.grating_amplitude = 0.0;
        let run = run_decay(&c).unwrap();
        let k0 = 2.0 * PI / c.wavelength;
        let z = 2.0 * c.mirror_spacing * c.round_trips as f64;
        let s = Complex64::new(c.waist * c.waist, 2.0 * z / k0);
        let pre = (Complex64::new(c.waist * c.waist, 0.0) / s).sqrt();
        for (x, got) in positions(&c).zip(&run.final_field.samples) {
            let exact = pre * (-(x * x) / s).exp();
            assert!((got - exact).norm() < 1e-6);
        }
        let last = run.far_fields.last().unwrap();
        let total: f64 = last.peaks.iter().map(|p| p.power).sum();
        assert!(last.peak(0).unwrap().power > (1.0 - 1e-12) * total);
    }

    #[test]
    fn bloch_average_reproduces_the_cavity() {
        let c = small(1.0 / 12.0);
        let run = run_decay(&c).unwrap();
        let report = bloch_equivalence(&c, &run, 60).unwrap();
        assert!(report.worst_relative < 1e-9, "{}", report.worst_relative);
        assert!(report.trips.iter().skip(1).all(|t| t.compared_peaks > 1));
    }

    #[test]
    fn mismatched_rotor_is_rejected() {
        let c = small(0.1);
        let run = run_decay(&c).unwrap();
        let mut other = c.clone();
        other.grating_amplitude = 2.0;
        let rotor = matching_rotor_run(&other, 40).unwrap();
        assert!(matches!(rotor_equivalence(&c, &run, &rotor), Err(Error::MismatchedParams(_))));
    }
}
