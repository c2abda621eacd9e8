//! Large-n behaviour at the main resonance, from the exact solution.

use pt_rotor::dynamics::linear_fit;
use pt_rotor::floquet::resonance_bands;
use pt_rotor::model::{Beta, RotorParams};
use pt_rotor::resonance::{
    asymptotic_log_profile, closed_form_log_abs2, dispersion, exact_resonance_state, log_moments,
};

fn params(ns: usize) -> RotorParams {
    RotorParams::new(3.0, 1.0 / 30.0, Beta::rational(1, 1).unwrap(), ns).unwrap()
}

fn log_profile(p: &RotorParams, n: usize) -> Vec<f64> {
    closed_form_log_abs2(p, n).unwrap()
}

#[test]
fn drift_follows_the_group_velocity() {
    let p = params(4000);
    let ns: Vec<usize> = (100..=1000).step_by(50).collect();
    let means: Vec<f64> = ns.iter().map(|&n| log_moments(&log_profile(&p, n)).mean).collect();
    let xs: Vec<f64> = ns.iter().map(|&n| n as f64).collect();
    let (slope, _) = linear_fit(&xs, &means).unwrap();
    assert!((slope / 3.0 - 1.0).abs() < 0.02, "{slope}");
}

#[test]
fn log_mass_grows_at_twice_the_gain() {
    // finite differences cancel the n^{-1/2} prefactor up to ln 2 / (2Δn)
    let p = params(2000);
    let mass = |n: usize| log_moments(&log_profile(&p, n)).log_mass;
    let slope = (mass(400) - mass(200)) / 200.0;
    assert!((slope / 0.2 - 1.0).abs() < 0.02, "{slope}");

    let ns = p.truncation() as i64;
    let asym_mass = |n: usize| {
        let logs: Vec<f64> = (-ns..=ns)
            .map(|l| asymptotic_log_profile(&p, l as f64, n as f64).unwrap())
            .collect();
        log_moments(&logs).log_mass
    };
    let slope = (asym_mass(400) - asym_mass(200)) / 200.0;
    assert!((slope / 0.2 - 1.0).abs() < 0.02, "{slope}");
}

#[test]
fn quadrature_norm_matches_closed_form() {
    let p = params(1000);
    for n in [200usize, 400] {
        let psi = exact_resonance_state(&p, n).unwrap();
        let log_p = psi.iter().map(|c| c.norm_sqr()).sum::<f64>().ln();
        let closed = log_moments(&log_profile(&p, n)).log_mass;
        assert!((log_p - closed).abs() < 1e-9 * closed.abs(), "n = {n}");
    }
}

#[test]
fn saddle_peak_error_shrinks_with_n() {
    // the peak sits at the turning point of J_l(K0 n), where the cubic term of
    // the dispersion still matters at these n; the Gaussian form only
    // converges slowly
    let p = params(4000);
    let ns = p.truncation() as i64;
    let mut errors = Vec::new();
    for n in [200usize, 400, 1000] {
        let exact = log_profile(&p, n);
        let (i, peak) = exact
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |a, (i, &v)| if v > a.1 { (i, v) } else { a });
        let l = i as i64 - ns;
        let asym = asymptotic_log_profile(&p, l as f64, n as f64).unwrap();
        errors.push(((asym - peak).exp() - 1.0).abs());
    }
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn floquet_band_matches_dispersion() {
    let p = params(1);
    let d = dispersion(&p, 64).unwrap();
    let b = resonance_bands(&p, 64).unwrap();
    assert_eq!(b.m, 1);
    for (q, e) in b.q_grid.iter().zip(&b.bands[0]) {
        let expect = pt_rotor::resonance::band_energy(&p, *q);
        assert!((e - expect).norm() < 1e-10, "q = {q}");
    }
    assert!((d.group_velocity - 3.0).abs() < 1e-12);
    assert!((d.max_growth - 0.1).abs() < 1e-12);
    assert!(d.eps2.im < 0.0);
}
