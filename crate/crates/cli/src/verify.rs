//! Cross-module checks, one line per check.

use std::f64::consts::PI;
use std::time::Instant;

use num_complex::Complex64;
use pt_rotor::bessel::bessel_j;
use pt_rotor::cavity::{self, CavityConfig};
use pt_rotor::dynamics::{self, EvolveOptions, KickPropagator, MomentumState};
use pt_rotor::floquet::{self, FloquetMatrix, ThresholdConfig, ThresholdOutcome};
use pt_rotor::model::{self, Beta, RotorParams};
use pt_rotor::resonance;

use crate::Level;

type Check = (&'static str, fn() -> pt_rotor::Result<(bool, String)>);

const FAST: &[Check] = &[
    ("kick coefficients: sampled vs Bessel", kick_routes),
    ("similarity to the Hermitian matrix", similarity),
    ("antiresonance spectrum and revival", antiresonance),
    ("Hermitian norm conservation", unitarity),
    ("beta = 1 quadrature vs split-step", resonance_oracle),
    ("beta = 1 Hermitian Bessel profile", resonance_bessel),
    ("resonance band counts and flatness", bands),
    ("beta = 1/12 broken at lambda = 0.05", broken_at_resonance),
    ("cavity unit report", cavity_units),
    ("cavity vs quasi-momentum rotor average", cavity_bloch),
];

const FULL: &[Check] = &[
    ("threshold at 2πβ = 0.7 and truncation shift", threshold),
    ("beta = 1 drift and gain", ratchet),
];

/// Runs the checks for `level`; true if all pass.
pub fn run(level: Level) -> bool {
    let mut checks: Vec<&Check> = FAST.iter().collect();
    if level == Level::Full {
        checks.extend(FULL);
    }
    let mut failed = 0;
    for (name, f) in checks {
        let t = Instant::now();
        let (ok, detail) = match f() {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} [{:.1} s]",
            if ok { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64()
        );
    }
    println!("{failed} failed");
    failed == 0
}

fn kick_routes() -> pt_rotor::Result<(bool, String)> {
    let mut worst: f64 = 0.0;
    for k in [1.0, 3.0, 6.0] {
        for lambda in [0.0, 1.0 / 30.0, 0.5] {
            let p = RotorParams::new(k, lambda, Beta::new(0.3)?, 1)?;
            let n = model::default_n_max(&p);
            let a = model::kick_coefficients(&p, n)?;
            let b = model::kick_coefficients_closed_form(&p, n)?;
            let top = b.iter().map(|(_, w)| w.norm()).fold(0.0, f64::max);
            for (m, w) in b.iter() {
                worst = worst.max((a.w(m) - w).norm() / top);
            }
        }
    }
    Ok((worst <= 1e-10, format!("max |ΔW|/max|W| = {worst:.2e}")))
}

fn similarity() -> pt_rotor::Result<(bool, String)> {
    let p = RotorParams::new(3.0, 0.3, Beta::from_two_pi(0.7)?, 40)?;
    let u = FloquetMatrix::build(&p)?;
    let h = FloquetMatrix::build(&p.hermitian_partner())?;
    let y = model::gauge_form(&p).y;
    let ns = p.truncation() as i64;
    let mut worst: f64 = 0.0;
    for l in -ns..=ns {
        for n in -ns..=ns {
            let expect = h.get(l, n) * (y * (l - n) as f64).exp();
            let scale = expect.norm().max(1.0);
            worst = worst.max((u.get(l, n) - expect).norm() / scale);
        }
    }
    Ok((worst <= 1e-12, format!("worst entry error {worst:.2e}")))
}

fn antiresonance() -> pt_rotor::Result<(bool, String)> {
    let mut worst_eps: f64 = 0.0;
    let mut worst_revival: f64 = 0.0;
    for lambda in [0.0, 0.3, 0.9] {
        let p = RotorParams::new(3.0, lambda, Beta::rational(1, 2)?, 100)?;
        let s = floquet::filter_edge_states(floquet::quasi_energy_spectrum(&FloquetMatrix::build(&p)?)?, 0.1)?;
        for m in s.retained() {
            let d = m.eps_t.norm().min(Complex64::new(m.eps_t.re.abs() - PI, m.eps_t.im).norm());
            worst_eps = worst_eps.max(d);
        }
        let p = p.with_truncation(200)?;
        let mut state = MomentumState::delta(200);
        let mut prop = KickPropagator::new(&p);
        prop.step(&mut state)?;
        prop.step(&mut state)?;
        for (l, c) in state.momenta().zip(state.amplitudes()) {
            let target = if l == 0 { 1.0 } else { 0.0 };
            worst_revival = worst_revival.max((c - target).norm());
        }
    }
    let ok = worst_eps <= 1e-8 && worst_revival <= 1e-10;
    Ok((ok, format!("εT off {{0, π}} by {worst_eps:.2e}, revival error {worst_revival:.2e}")))
}

fn unitarity() -> pt_rotor::Result<(bool, String)> {
    let p = RotorParams::new(3.0, 0.0, Beta::from_two_pi(0.7)?, 200)?;
    let evo = dynamics::evolve(&p, 1000, &EvolveOptions::default())?;
    let worst = evo
        .series
        .records
        .iter()
        .map(|r| (r.norm - 1.0).abs())
        .fold(0.0, f64::max);
    Ok((worst <= 1e-10, format!("max |P - 1| = {worst:.2e} over 1000 kicks")))
}

fn resonance_oracle() -> pt_rotor::Result<(bool, String)> {
    let p = RotorParams::new(3.0, 1.0 / 30.0, Beta::rational(1, 1)?, 400)?;
    let opts = EvolveOptions {
        snapshots: (0..=50).collect(),
        keep_states: true,
        ..Default::default()
    };
    let evo = dynamics::evolve(&p, 50, &opts)?;
    let mut worst: f64 = 0.0;
    for snap in evo.snapshots.iter().filter(|s| s.kick % 10 == 0) {
        let exact = resonance::exact_resonance_state(&p, snap.kick)?;
        let got = snap.state.as_ref().expect("states kept");
        for (a, b) in got.iter().zip(&exact) {
            worst = worst.max((a - b).norm());
        }
    }
    Ok((worst <= 1e-8, format!("max |Δψ| = {worst:.2e} at n ≤ 50")))
}

fn resonance_bessel() -> pt_rotor::Result<(bool, String)> {
    let p = RotorParams::new(3.0, 0.0, Beta::rational(1, 1)?, 300)?;
    let mut worst: f64 = 0.0;
    for n in [1usize, 10, 50] {
        let psi = resonance::exact_resonance_state(&p, n)?;
        for (l, c) in p_momenta(&p).zip(&psi) {
            worst = worst.max((c.norm() - bessel_j(l, 3.0 * n as f64).abs()).abs());
        }
    }
    Ok((worst <= 1e-10, format!("max ||ψ_l| - |J_l(nK)|| = {worst:.2e}")))
}

fn p_momenta(p: &RotorParams) -> impl Iterator<Item = i64> {
    let ns = p.truncation() as i64;
    -ns..=ns
}

fn bands() -> pt_rotor::Result<(bool, String)> {
    let mut flat: f64 = 0.0;
    for lambda in [0.0, 0.3, 0.9] {
        let p = RotorParams::new(3.0, lambda, Beta::rational(1, 2)?, 1)?;
        let b = floquet::resonance_bands(&p, 33)?;
        for band in &b.bands {
            for e in band {
                flat = flat.max(e.norm().min(Complex64::new(e.re.abs() - PI, e.im).norm()));
            }
        }
    }
    let p = RotorParams::new(3.0, 0.3, Beta::rational(1, 12)?, 1)?;
    let b = floquet::resonance_bands(&p, 21)?;
    let max_im = b.bands.iter().flatten().map(|e| e.im.abs()).fold(0.0, f64::max);
    let ok = flat <= 1e-8 && b.m == 12 && max_im > 1e-3;
    Ok((ok, format!("β=1/2 off {{0, π}} by {flat:.2e}; β=1/12 has {} bands, max |Im| {max_im:.3}", b.m)))
}

fn broken_at_resonance() -> pt_rotor::Result<(bool, String)> {
    let p = RotorParams::new(3.0, 0.0, Beta::rational(1, 12)?, 500)?;
    let d = floquet::detector(&p, 0.05, 0.1)?;
    Ok((d > 1e-3, format!("mean |Im εT| = {d:.3e} at N_s = 500")))
}

fn cavity_units() -> pt_rotor::Result<(bool, String)> {
    let u6 = cavity::physical_units(&CavityConfig::fig6());
    let u7 = cavity::physical_units(&CavityConfig::fig7());
    let sig4 = |v: f64, t: f64| ((v - t) / t).abs() < 5e-4;
    let ok = sig4(u6.talbot_length, 0.1154)
        && sig4(u6.mirror_spacing, 9.182e-3)
        && sig4(u7.mirror_spacing, 9.615e-3)
        && sig4(u6.peak_spacing, 130e-6)
        && sig4(u6.waist, 9.549e-3);
    Ok((
        ok,
        format!(
            "L_T = {:.4} cm, L = {:.4}/{:.4} mm, spacing {:.1} μm, w0 = {:.3} mm",
            u6.talbot_length * 1e2,
            u6.mirror_spacing * 1e3,
            u7.mirror_spacing * 1e3,
            u6.peak_spacing * 1e6,
            u6.waist * 1e3
        ),
    ))
}

fn cavity_bloch() -> pt_rotor::Result<(bool, String)> {
    let mut c = CavityConfig::fig7();
    c.waist = 6.0 * c.period;
    c.extent = 64.0 * c.period;
    c.points = 4096;
    c.round_trips = 8;
    let run = cavity::run_decay(&c)?;
    let report = cavity::bloch_equivalence(&c, &run, 80)?;
    Ok((
        report.worst_relative <= 1e-9,
        format!("worst peak mismatch {:.2e} over {} trips", report.worst_relative, c.round_trips),
    ))
}

fn threshold() -> pt_rotor::Result<(bool, String)> {
    let p = RotorParams::new(3.0, 0.0, Beta::from_two_pi(0.7)?, 500)?;
    let r = floquet::threshold_convergence(&p, &ThresholdConfig::default(), 0.05)?;
    let l = r.coarse.lambda_pt;
    let ok = r.coarse.outcome == ThresholdOutcome::Crossing && (l - 0.27).abs() <= 0.05 && r.shift < 0.02;
    Ok((
        ok,
        format!("λ_PT = {l:.4} (N_s = 500), {:.4} (N_s = 1000)", r.fine.lambda_pt),
    ))
}

fn ratchet() -> pt_rotor::Result<(bool, String)> {
    let p = RotorParams::new(3.0, 1.0 / 30.0, Beta::rational(1, 1)?, 9000)?;
    let evo = dynamics::evolve(
        &p,
        1000,
        &EvolveOptions {
            snapshots: Vec::new(),
            ..Default::default()
        },
    )?;
    let v = dynamics::drift_velocity(&evo.series, 100, 1000)?;
    let g = dynamics::norm_growth_rate(&evo.series, 100, 1000)?;
    let ok = (v / 3.0 - 1.0).abs() <= 0.02 && (g / 0.2 - 1.0).abs() <= 0.02;
    Ok((ok, format!("drift {v:.4} per kick, log-norm growth {g:.4} per kick")))
}
