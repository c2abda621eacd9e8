//! Kick-by-kick evolution in momentum space.
//!
//! Each step applies the free phase `exp(-2πiβl²)` and then the kick, which
//! is applied on an x-grid: the amplitudes are synthesized into `ψ(x)`,
//! multiplied by `exp[-iV(x)/ħ]` and analysed back. The norm is never
//! restored, since its growth is the signal of broken PT symmetry.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{default_n_max, potential_value, RotorParams};

/// Spill limit for the outer tenth of the momentum window.
pub const SPILL_TOLERANCE: f64 = 1e-8;
pub const SPILL_FRACTION: f64 = 0.1;

/// Amplitudes `ψ_l` for `l = -N_s ..= N_s` after `kick_count` kicks.
#[derive(Clone, Debug, PartialEq)]
pub struct MomentumState {
    amplitudes: Vec<Complex64>,
    kick_count: usize,
}

impl MomentumState {
    /// `ψ_l = δ_{l,0}`.
    pub fn delta(truncation: usize) -> Self {
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 2 * truncation + 1];
        amplitudes[truncation] = Complex64::new(1.0, 0.0);
        MomentumState {
            amplitudes,
            kick_count: 0,
        }
    }

    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() % 2 == 0 || amplitudes.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "a momentum state needs 2 N_s + 1 >= 3 amplitudes, got {}",
                amplitudes.len()
            )));
        }
        Ok(MomentumState {
            amplitudes,
            kick_count: 0,
        })
    }

    pub fn truncation(&self) -> usize {
        self.amplitudes.len() / 2
    }

    pub fn kick_count(&self) -> usize {
        self.kick_count
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// `ψ_l`, zero outside the window.
    pub fn amplitude(&self, l: i64) -> Complex64 {
        let ns = self.truncation() as i64;
        if l.abs() > ns {
            Complex64::new(0.0, 0.0)
        } else {
            self.amplitudes[(l + ns) as usize]
        }
    }

    pub fn abs2(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    /// `l` values matching [`amplitudes`](Self::amplitudes).
    pub fn momenta(&self) -> impl Iterator<Item = i64> {
        let ns = self.truncation() as i64;
        -ns..=ns
    }

    /// `P = Σ|ψ_l|²`.
    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|c| c.norm_sqr()).sum()
    }

    /// Fraction of the norm on sites with `|l| > (1 - fraction) N_s`.
    pub fn spill(&self, fraction: f64) -> f64 {
        let ns = self.truncation() as i64;
        let cut = (1.0 - fraction) * ns as f64;
        let mut total = 0.0;
        let mut outer = 0.0;
        for (l, c) in self.momenta().zip(&self.amplitudes) {
            let w = c.norm_sqr();
            total += w;
            if l.abs() as f64 > cut {
                outer += w;
            }
        }
        outer / total
    }

    pub fn observe(&self) -> Observation {
        let mut p = 0.0;
        let mut m1 = 0.0;
        let mut m2 = 0.0;
        for (l, c) in self.momenta().zip(&self.amplitudes) {
            let w = c.norm_sqr();
            let l = l as f64;
            p += w;
            m1 += l * w;
            m2 += l * l * w;
        }
        let mean_l = m1 / p;
        let mut var = 0.0;
        for (l, c) in self.momenta().zip(&self.amplitudes) {
            let d = l as f64 - mean_l;
            var += d * d * c.norm_sqr();
        }
        Observation {
            kick: self.kick_count,
            norm: p,
            mean_l,
            spread: (var / p).sqrt(),
            raw_spread: (m2 / p).sqrt(),
        }
    }
}

/// Observables after one kick.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Observation {
    pub kick: usize,
    /// `P(n) = Σ|ψ_l|²`.
    pub norm: f64,
    /// `⟨l⟩ = Σ l|ψ_l|² / P`.
    pub mean_l: f64,
    /// `⟨Δl⟩ = √(Σ(l - ⟨l⟩)²|ψ_l|² / P)`.
    pub spread: f64,
    /// `√(Σ l²|ψ_l|² / P)`, without mean subtraction.
    pub raw_spread: f64,
}

/// Split-step propagator for one parameter set. Owns its transform plans
/// and scratch space, so each trajectory needs its own.
pub struct KickPropagator {
    params: RotorParams,
    grid: usize,
    free: Vec<Complex64>,
    kick: Vec<Complex64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    buffer: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl std::fmt::Debug for KickPropagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("KickPropagator")
            .field("params", &self.params)
            .field("grid", &self.grid)
            .finish_non_exhaustive()
    }
}

impl KickPropagator {
    pub fn new(params: &RotorParams) -> Self {
        Self::with_quasi_momentum(params, 0.0)
    }

    /// Propagator for the Bloch component with quasi-momentum offset `δ`,
    /// whose free phase is `exp[-2πiβ(l+δ)²]`.
    pub fn with_quasi_momentum(params: &RotorParams, delta: f64) -> Self {
        let ns = params.truncation();
        let dim = params.dim();
        // the kick band must not wrap onto the window either
        let grid = (4 * dim).max(dim + 2 * default_n_max(params)).next_power_of_two();
        let beta = params.beta();
        let free = (-(ns as i64)..=ns as i64)
            .map(|l| beta.free_phase_shifted(l, delta))
            .collect();
        let kick = (0..grid)
            .map(|j| (-Complex64::i() * potential_value(j as f64 / grid as f64, params)).exp())
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(grid);
        let inverse = planner.plan_fft_inverse(grid);
        let scratch_len = forward
            .get_inplace_scratch_len()
            .max(inverse.get_inplace_scratch_len());
        KickPropagator {
            params: *params,
            grid,
            free,
            kick,
            forward,
            inverse,
            buffer: vec![Complex64::new(0.0, 0.0); grid],
            scratch: vec![Complex64::new(0.0, 0.0); scratch_len],
        }
    }

    pub fn params(&self) -> &RotorParams {
        &self.params
    }

    pub fn grid(&self) -> usize {
        self.grid
    }

    /// One period: free phase, then kick. Fails once more than
    /// [`SPILL_TOLERANCE`] of the norm reaches the outer tenth of the window.
    pub fn step(&mut self, state: &mut MomentumState) -> Result<()> {
        let ns = self.params.truncation();
        if state.truncation() != ns {
            return Err(Error::MismatchedParams(format!(
                "state has N_s = {}, propagator {}",
                state.truncation(),
                ns
            )));
        }
        let g = self.grid as i64;
        self.buffer.fill(Complex64::new(0.0, 0.0));
        for (i, (psi, phase)) in state.amplitudes.iter().zip(&self.free).enumerate() {
            let l = i as i64 - ns as i64;
            self.buffer[l.rem_euclid(g) as usize] = psi * phase;
        }
        self.inverse
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        for (b, k) in self.buffer.iter_mut().zip(&self.kick) {
            *b *= k;
        }
        self.forward
            .process_with_scratch(&mut self.buffer, &mut self.scratch);
        let scale = 1.0 / self.grid as f64;
        for (i, psi) in state.amplitudes.iter_mut().enumerate() {
            let l = i as i64 - ns as i64;
            *psi = self.buffer[l.rem_euclid(g) as usize] * scale;
        }
        state.kick_count += 1;

        let norm = state.norm();
        if !norm.is_finite() {
            return Err(Error::NormOverflow {
                kick: state.kick_count,
            });
        }
        let spill = state.spill(SPILL_FRACTION);
        if spill >= SPILL_TOLERANCE {
            return Err(Error::SpillExceeded {
                kick: state.kick_count,
                spill,
                tolerance: SPILL_TOLERANCE,
            });
        }
        Ok(())
    }
}

/// Applies one period to `state`. Convenience wrapper that plans the
/// transforms afresh; use [`KickPropagator`] for repeated steps.
pub fn kick_step(state: &MomentumState, params: &RotorParams) -> Result<MomentumState> {
    let mut next = state.clone();
    KickPropagator::new(params).step(&mut next)?;
    Ok(next)
}

pub const DEFAULT_SNAPSHOTS: [usize; 8] = [0, 5, 10, 20, 50, 100, 500, 1000];

#[derive(Clone, Debug)]
pub struct EvolveOptions {
    /// Kicks at which `|ψ_l|²` is stored.
    pub snapshots: Vec<usize>,
    /// Also keep the complex amplitudes in each snapshot.
    pub keep_states: bool,
    /// Starting state; `δ_{l,0}` when absent.
    pub initial: Option<MomentumState>,
    /// Bloch quasi-momentum offset `δ`.
    pub quasi_momentum: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        EvolveOptions {
            snapshots: DEFAULT_SNAPSHOTS.to_vec(),
            keep_states: false,
            initial: None,
            quasi_momentum: 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Snapshot {
    pub kick: usize,
    pub abs2: Vec<f64>,
    pub state: Option<Vec<Complex64>>,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct ObservableSeries {
    pub records: Vec<Observation>,
}

impl ObservableSeries {
    pub fn kicks(&self) -> impl Iterator<Item = usize> + '_ {
        self.records.iter().map(|r| r.kick)
    }

    pub fn at(&self, kick: usize) -> Option<&Observation> {
        self.records.iter().find(|r| r.kick == kick)
    }
}

#[derive(Clone, Debug)]
pub struct Evolution {
    pub series: ObservableSeries,
    pub snapshots: Vec<Snapshot>,
    pub final_state: MomentumState,
    pub params: RotorParams,
    pub quasi_momentum: f64,
}

/// Iterates `n_kicks` periods, recording observables after every kick
/// (and for the initial state).
pub fn evolve(params: &RotorParams, n_kicks: usize, options: &EvolveOptions) -> Result<Evolution> {
    let mut state = match &options.initial {
        Some(s) => s.clone(),
        None => MomentumState::delta(params.truncation()),
    };
    let mut prop = KickPropagator::with_quasi_momentum(params, options.quasi_momentum);
    let mut series = ObservableSeries {
        records: Vec::with_capacity(n_kicks + 1),
    };
    let mut snapshots = Vec::new();
    let mut record = |state: &MomentumState, series: &mut ObservableSeries| {
        series.records.push(state.observe());
        if options.snapshots.contains(&state.kick_count) {
            snapshots.push(Snapshot {
                kick: state.kick_count,
                abs2: state.abs2(),
                state: options.keep_states.then(|| state.amplitudes.clone()),
            });
        }
    };
    record(&state, &mut series);
    for _ in 0..n_kicks {
        prop.step(&mut state)?;
        record(&state, &mut series);
    }
    Ok(Evolution {
        series,
        snapshots,
        final_state: state,
        params: *params,
        quasi_momentum: options.quasi_momentum,
    })
}

/// Least-squares line `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DegenerateFit(format!("need at least two points, got {}", xs.len())));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || !sxy.is_finite() {
        return Err(Error::DegenerateFit("abscissae do not vary".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// Records of `series` with kick numbers in `[lo, hi]`.
fn window(series: &ObservableSeries, lo: usize, hi: usize) -> Vec<&Observation> {
    series.records.iter().filter(|r| r.kick >= lo && r.kick <= hi).collect()
}

/// Slope of `log⟨Δl⟩` against `log n` over kicks in `[lo, hi]`.
pub fn spreading_exponent(series: &ObservableSeries, lo: usize, hi: usize) -> Result<f64> {
    let pts = window(series, lo.max(1), hi);
    if pts.iter().any(|r| !(r.spread > 0.0) || !r.spread.is_finite()) {
        return Err(Error::DegenerateFit("spread vanishes inside the fit window".into()));
    }
    let xs: Vec<f64> = pts.iter().map(|r| (r.kick as f64).ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|r| r.spread.ln()).collect();
    if ys.windows(2).all(|w| w[0] == w[1]) {
        return Err(Error::DegenerateFit("spread is constant on the fit window".into()));
    }
    Ok(linear_fit(&xs, &ys)?.0)
}

/// Slope of `log P(n)` against `n` over kicks in `[lo, hi]`.
pub fn norm_growth_rate(series: &ObservableSeries, lo: usize, hi: usize) -> Result<f64> {
    let pts = window(series, lo, hi);
    let xs: Vec<f64> = pts.iter().map(|r| r.kick as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|r| r.norm.ln()).collect();
    Ok(linear_fit(&xs, &ys)?.0)
}

/// Slope of `⟨l(n)⟩` against `n` over kicks in `[lo, hi]`.
pub fn drift_velocity(series: &ObservableSeries, lo: usize, hi: usize) -> Result<f64> {
    let pts = window(series, lo, hi);
    let xs: Vec<f64> = pts.iter().map(|r| r.kick as f64).collect();
    let ys: Vec<f64> = pts.iter().map(|r| r.mean_l).collect();
    Ok(linear_fit(&xs, &ys)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::floquet::FloquetMatrix;
    use crate::model::{gauge_form, Beta};
    use proptest::prelude::*;

    fn params(k: f64, lambda: f64, beta: Beta, ns: usize) -> RotorParams {
        RotorParams::new(k, lambda, beta, ns).unwrap()
    }

    #[test]
    fn zero_kicks() {
        let p = params(3.0, 0.1, Beta::new(0.3).unwrap(), 20);
        let e = evolve(&p, 0, &EvolveOptions::default()).unwrap();
        assert_eq!(e.series.records.len(), 1);
        let r = e.series.records[0];
        assert_eq!((r.kick, r.norm, r.mean_l, r.spread), (0, 1.0, 0.0, 0.0));
        assert_eq!(e.snapshots.len(), 1);
    }

    #[test]
    fn hermitian_norm_is_conserved_per_step() {
        let p = params(3.0, 0.0, Beta::from_two_pi(0.7).unwrap(), 80);
        let mut prop = KickPropagator::new(&p);
        let mut s = MomentumState::delta(80);
        for _ in 0..50 {
            let before = s.norm();
            prop.step(&mut s).unwrap();
            assert!((s.norm() - before).abs() < 1e-12);
        }
    }

    #[test]
    fn main_resonance_step_is_a_pure_convolution() {
        let p = params(3.0, 0.2, Beta::rational(1, 1).unwrap(), 40);
        let w = crate::model::kick_coefficients_closed_form(&p, 60).unwrap();
        let s = kick_step(&MomentumState::delta(40), &p).unwrap();
        for l in -40i64..=40 {
            assert!((s.amplitude(l) - w.w(l)).norm() < 1e-13);
        }
    }

    #[test]
    fn split_step_matches_matrix_powers() {
        for (beta, lambda) in [(Beta::from_two_pi(0.7).unwrap(), 0.3), (Beta::rational(1, 3).unwrap(), 0.1)] {
            let p = params(3.0, lambda, beta, 48);
            let u = FloquetMatrix::build(&p).unwrap();
            let mut prop = KickPropagator::new(&p);
            let mut amps: Vec<Complex64> = (0..97)
                .map(|i| {
                    let l = i as f64 - 48.0;
                    Complex64::new((-l * l / 8.0).exp(), 0.3 * l / 10.0 * (-l * l / 8.0).exp())
                })
                .collect();
            let mut s = MomentumState::from_amplitudes(amps.clone()).unwrap();
            for _ in 0..10 {
                amps = u.apply(&amps);
                // spill checks are irrelevant for this comparison
                let _ = prop.step(&mut s);
            }
            let scale = amps.iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in amps.iter().zip(s.amplitudes()) {
                assert!((a - b).norm() < 1e-9 * scale);
            }
        }
    }

    #[test]
    fn gauge_mapping_of_trajectories() {
        let p = params(3.0, 0.05, Beta::from_two_pi(0.7).unwrap(), 150);
        let y = gauge_form(&p).y;
        assert!((2.0 * y * 150.0).exp() < 1e8);
        let h = p.hermitian_partner();
        let opts = EvolveOptions {
            snapshots: vec![30],
            keep_states: true,
            ..Default::default()
        };
        let a = evolve(&p, 30, &opts).unwrap();
        let b = evolve(&h, 30, &opts).unwrap();
        let sa = a.snapshots[0].state.as_ref().unwrap();
        let sb = b.snapshots[0].state.as_ref().unwrap();
        for (i, (x, z)) in sa.iter().zip(sb).enumerate() {
            let l = i as f64 - 150.0;
            assert!((x - z * (y * l).exp()).norm() < 1e-6);
        }
    }

    #[test]
    fn spill_guard_trips_on_ballistic_growth() {
        let p = params(3.0, 0.0, Beta::rational(1, 1).unwrap(), 30);
        match evolve(&p, 50, &EvolveOptions::default()) {
            Err(Error::SpillExceeded { kick, .. }) => assert!(kick < 15),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn fits() {
        let (s, c) = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-15 && (c - 1.0).abs() < 1e-15);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        let flat = ObservableSeries {
            records: (0..10)
                .map(|k| Observation {
                    kick: k,
                    norm: 1.0,
                    mean_l: 0.0,
                    spread: if k == 0 { 0.0 } else { 2.0 },
                    raw_spread: 2.0,
                })
                .collect(),
        };
        assert!(matches!(spreading_exponent(&flat, 2, 9), Err(Error::DegenerateFit(_))));
        let zero = ObservableSeries {
            records: flat.records.iter().map(|r| Observation { spread: 0.0, ..*r }).collect(),
        };
        assert!(matches!(spreading_exponent(&zero, 2, 9), Err(Error::DegenerateFit(_))));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn antiresonance_revives_any_state(
            lambda in 0.0f64..0.95,
            re in proptest::collection::vec(-1.0f64..1.0, 9),
            im in proptest::collection::vec(-1.0f64..1.0, 9),
        ) {
            let p = params(3.0, lambda, Beta::rational(1, 2).unwrap(), 64);
            let mut amps = vec![Complex64::new(0.0, 0.0); 129];
            for k in 0..9 {
                amps[60 + k] = Complex64::new(re[k], im[k]);
            }
            prop_assume!(amps.iter().any(|c| c.norm() > 1e-3));
            let s0 = MomentumState::from_amplitudes(amps).unwrap();
            let mut prop_ = KickPropagator::new(&p);
            let mut s = s0.clone();
            prop_.step(&mut s).unwrap();
            prop_.step(&mut s).unwrap();
            let scale = s0.amplitudes().iter().map(|c| c.norm()).fold(0.0, f64::max);
            for (a, b) in s.amplitudes().iter().zip(s0.amplitudes()) {
                prop_assert!((a - b).norm() < 1e-10 * scale.max(1.0));
            }
        }

        #[test]
        fn observables_are_shift_covariant(shift in -5i64..5, k in 0.5f64..4.0) {
            let ns = 20usize;
            let mut amps = vec![Complex64::new(0.0, 0.0); 2 * ns + 1];
            for (i, a) in amps.iter_mut().enumerate() {
                let l = i as f64 - ns as f64 - shift as f64;
                *a = Complex64::new((-l * l / k).exp(), 0.0);
            }
            let o = MomentumState::from_amplitudes(amps).unwrap().observe();
            prop_assert!((o.mean_l - shift as f64).abs() < 1e-9);
            prop_assert!(o.raw_spread * o.raw_spread + 1e-9 >= o.spread * o.spread + o.mean_l * o.mean_l);
        }
    }
}
