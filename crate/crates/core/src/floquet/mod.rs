//! The one-period propagator in momentum space and everything computed from
//! its spectrum.

mod bands;
mod spectrum;
mod threshold;

pub use bands::{resonance_bands, BandStructure};
pub use spectrum::{
    edge_rule, eps_from_eigenvalue, filter_edge_states, mean_im_quasienergy, participation_ratio,
    quasi_energy_spectrum, FloquetMode, QuasiEnergySpectrum,
};
pub use threshold::{
    detector, estimate_threshold_small_lambda, pt_threshold, pt_threshold_bracketed, scan_detector,
    threshold_convergence, ConvergenceReport, SmallLambdaEstimate, ThresholdConfig,
    ThresholdOutcome, ThresholdResult,
};

use faer::Mat;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{default_n_max, kick_coefficients_closed_form, KickCoefficients, RotorParams};

/// Truncated Floquet matrix `U_{l,n} = W_{l-n} exp(-2πiβn²)` on
/// `l, n ∈ [-N_s, N_s]`.
#[derive(Clone, Debug)]
pub struct FloquetMatrix {
    entries: Mat<Complex64>,
    params: RotorParams,
}

impl FloquetMatrix {
    /// Assembles the matrix from the Jacobi–Anger kick coefficients, using a
    /// band of at least `2 N_s` so every `W_{l-n}` in range is resolved.
    pub fn build(params: &RotorParams) -> Result<Self> {
        let n_max = default_n_max(params).max(2 * params.truncation());
        let w = kick_coefficients_closed_form(params, n_max)?;
        Self::from_coefficients(params, &w)
    }

    pub fn from_coefficients(params: &RotorParams, w: &KickCoefficients) -> Result<Self> {
        let ns = params.truncation();
        if w.n_max() < 2 * ns {
            return Err(Error::InsufficientCoefficients {
                needed: 2 * ns,
                available: w.n_max(),
            });
        }
        if let Some((n, _)) = w.iter().find(|(_, v)| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "kick coefficient W({n}) is not finite; non-Hermiticity too large for this K"
            )));
        }
        let beta = params.beta();
        let phases: Vec<Complex64> = (-(ns as i64)..=ns as i64).map(|n| beta.free_phase(n)).collect();
        let dim = params.dim();
        let entries = Mat::from_fn(dim, dim, |i, j| w.w(i as i64 - j as i64) * phases[j]);
        Ok(FloquetMatrix {
            entries,
            params: *params,
        })
    }

    pub fn params(&self) -> &RotorParams {
        &self.params
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> faer::MatRef<'_, Complex64> {
        self.entries.as_ref()
    }

    /// `U_{l,n}` by momentum index.
    pub fn get(&self, l: i64, n: i64) -> Complex64 {
        let ns = self.params.truncation() as i64;
        self.entries[((l + ns) as usize, (n + ns) as usize)]
    }

    /// `U ψ` for amplitudes ordered by `l = -N_s ..= N_s`.
    pub fn apply(&self, psi: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(psi.len(), self.dim(), "state length does not match the matrix");
        let dim = self.dim();
        let mut out = vec![Complex64::new(0.0, 0.0); dim];
        for (j, &p) in psi.iter().enumerate() {
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = self.entries.col(j);
            for (o, &u) in out.iter_mut().zip(col.iter()) {
                *o += u * p;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{gauge_form, Beta};

    #[test]
    fn hermitian_interior_columns_are_orthonormal() {
        let p = RotorParams::new(3.0, 0.0, Beta::from_two_pi(0.7).unwrap(), 50).unwrap();
        let u = FloquetMatrix::build(&p).unwrap();
        let mut worst: f64 = 0.0;
        for a in -30i64..=30 {
            for b in -30i64..=30 {
                let mut g = Complex64::new(0.0, 0.0);
                for l in -50i64..=50 {
                    g += u.get(l, a).conj() * u.get(l, b);
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((g - target).norm());
            }
        }
        assert!(worst < 1e-10, "Gram deviation {worst:e}");
    }

    #[test]
    fn similarity_to_hermitian_partner() {
        let p = RotorParams::new(3.0, 0.3, Beta::from_two_pi(0.7).unwrap(), 40).unwrap();
        let y = gauge_form(&p).y;
        assert!(40.0 * y <= 30.0);
        let u = FloquetMatrix::build(&p).unwrap();
        let h = FloquetMatrix::build(&p.hermitian_partner()).unwrap();
        for l in -40i64..=40 {
            for n in -40i64..=40 {
                let expected = h.get(l, n) * ((l - n) as f64 * y).exp();
                let scale = expected.norm().max(1e-300);
                let err = (u.get(l, n) - expected).norm();
                assert!(err <= 1e-12 * scale.max(1.0), "({l},{n}): {err:e}");
            }
        }
    }

    #[test]
    fn beta_periodicity_is_bitwise() {
        for (b0, b1) in [
            (Beta::new(0.375).unwrap(), Beta::new(1.375).unwrap()),
            (Beta::rational(1, 12).unwrap(), Beta::rational(13, 12).unwrap()),
        ] {
            let p0 = RotorParams::new(3.0, 0.2, b0, 20).unwrap();
            let p1 = p0.with_beta(b1);
            let u0 = FloquetMatrix::build(&p0).unwrap();
            let u1 = FloquetMatrix::build(&p1).unwrap();
            assert!(u0.entries() == u1.entries());
        }
    }

    #[test]
    fn short_band_is_rejected() {
        let p = RotorParams::new(3.0, 0.0, Beta::new(0.3).unwrap(), 40).unwrap();
        let w = kick_coefficients_closed_form(&p, 40).unwrap();
        match FloquetMatrix::from_coefficients(&p, &w) {
            Err(Error::InsufficientCoefficients { needed: 80, available: 40 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }
}
