use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;

use super::eps_from_eigenvalue;
use crate::error::{Error, Result};
use crate::model::{default_n_max, kick_coefficients_closed_form, RotorParams};

/// Quasi-energy bands at rational `β = N/M`.
#[derive(Clone, Debug)]
pub struct BandStructure {
    pub m: usize,
    /// Uniform grid over `[-π/M, π/M)`.
    pub q_grid: Vec<f64>,
    /// `bands[b][j]` is band `b` at `q_grid[j]`; at each `q` the `M` values
    /// are ordered by real part, then imaginary part.
    pub bands: Vec<Vec<Complex64>>,
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Eigenvalues of the `M × M` Bloch matrix
/// `S_{l,n}(q) = Σ_α W_{l-αM-n} exp[iq(αM+n-l) - 2πiβn²]`.
pub fn resonance_bands(params: &RotorParams, q_count: usize) -> Result<BandStructure> {
    let (num, m) = params.beta().ratio().ok_or_else(|| {
        Error::InvalidParameter("band structure needs an exact rational beta N/M".into())
    })?;
    if gcd(num, m) != 1 {
        return Err(Error::NotCoprime {
            numerator: num,
            denominator: m,
        });
    }
    if q_count == 0 {
        return Err(Error::InvalidParameter("q_count must be at least 1".into()));
    }
    let m = m as usize;
    let w = kick_coefficients_closed_form(params, default_n_max(params))?;
    let n_max = w.n_max() as i64;
    let mi = m as i64;
    let beta = params.beta();
    let phases: Vec<Complex64> = (0..mi).map(|n| beta.free_phase(n)).collect();

    let q_grid: Vec<f64> = (0..q_count)
        .map(|j| -PI / m as f64 + 2.0 * PI * j as f64 / (m as f64 * q_count as f64))
        .collect();
    let mut bands = vec![Vec::with_capacity(q_count); m];
    for &q in &q_grid {
        let s = Mat::from_fn(m, m, |l, n| {
            let (l, n) = (l as i64, n as i64);
            let mut acc = Complex64::new(0.0, 0.0);
            // W_{l-n-αM} vanishes beyond the stored band
            let a_lo = (l - n - n_max).div_euclid(mi);
            let a_hi = (l - n + n_max).div_euclid(mi) + 1;
            for alpha in a_lo..=a_hi {
                let k = l - alpha * mi - n;
                if k.abs() > n_max {
                    continue;
                }
                acc += w.w(k) * Complex64::cis(q * (alpha * mi + n - l) as f64);
            }
            acc * phases[n as usize]
        });
        let mut eps: Vec<Complex64> = if m == 1 {
            vec![eps_from_eigenvalue(s[(0, 0)])]
        } else {
            s.eigenvalues()
                .map_err(|e| Error::EigenFailure(format!("{e:?}")))?
                .into_iter()
                .map(eps_from_eigenvalue)
                .collect()
        };
        eps.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        for (band, e) in bands.iter_mut().zip(eps) {
            band.push(e);
        }
    }
    Ok(BandStructure { m, q_grid, bands })
}
