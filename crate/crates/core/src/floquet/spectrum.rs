use std::f64::consts::PI;

use num_complex::Complex64;

use super::FloquetMatrix;
use crate::error::{Error, Result};
use crate::model::RotorParams;

/// One eigenpair of the Floquet matrix.
#[derive(Clone, Debug)]
pub struct FloquetMode {
    /// Quasi-energy `εT`, `Re ∈ (-π, π]`.
    pub eps_t: Complex64,
    /// Eigenvalue `μ = exp(-iεT)`.
    pub eigenvalue: Complex64,
    /// Unit-norm amplitudes over `l = -N_s ..= N_s`.
    pub eigenvector: Vec<Complex64>,
    pub participation_ratio: f64,
    /// Intensity-weighted mean of `l`.
    pub center: f64,
    pub edge_flagged: bool,
}

#[derive(Clone, Debug)]
pub struct QuasiEnergySpectrum {
    pub modes: Vec<FloquetMode>,
    pub params: RotorParams,
}

impl QuasiEnergySpectrum {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn retained(&self) -> impl Iterator<Item = &FloquetMode> {
        self.modes.iter().filter(|m| !m.edge_flagged)
    }

    pub fn flagged_count(&self) -> usize {
        self.modes.iter().filter(|m| m.edge_flagged).count()
    }
}

/// `εT = i Log μ` on the principal branch, with `Re εT ∈ (-π, π]`.
pub fn eps_from_eigenvalue(mu: Complex64) -> Complex64 {
    let mut re = -mu.arg();
    if re <= -PI {
        re = PI;
    }
    Complex64::new(re, mu.norm().ln())
}

/// `(Σ|φ|²)² / Σ|φ|⁴`.
pub fn participation_ratio(v: &[Complex64]) -> Result<f64> {
    let scale = v.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::ZeroVector);
    }
    let (mut s2, mut s4) = (0.0, 0.0);
    for c in v {
        let a = (c / scale).norm_sqr();
        s2 += a;
        s4 += a * a;
    }
    Ok(s2 * s2 / s4)
}

fn center_of(v: &[Complex64], ns: i64) -> f64 {
    let mut total = 0.0;
    let mut first = 0.0;
    for (i, c) in v.iter().enumerate() {
        let w = c.norm_sqr();
        total += w;
        first += (i as i64 - ns) as f64 * w;
    }
    first / total
}

/// The geometric part of the edge criterion: the mode's center lies beyond
/// `(1 - edge_fraction) N_s`, or more than half of its weight sits on the
/// sites with `|l| > (1 - edge_fraction) N_s`.
pub fn edge_rule(v: &[Complex64], edge_fraction: f64) -> bool {
    let ns = (v.len() / 2) as i64;
    let cut = (1.0 - edge_fraction) * ns as f64;
    let mut total = 0.0;
    let mut outer = 0.0;
    let mut first = 0.0;
    for (i, c) in v.iter().enumerate() {
        let l = i as i64 - ns;
        let w = c.norm_sqr();
        total += w;
        first += l as f64 * w;
        if (l.abs() as f64) > cut {
            outer += w;
        }
    }
    (first / total).abs() > cut || outer > 0.5 * total
}

/// Eigen-decomposition of the truncated propagator. Modes come sorted by
/// `Re εT`, ties broken by `Im εT`.
pub fn quasi_energy_spectrum(matrix: &FloquetMatrix) -> Result<QuasiEnergySpectrum> {
    let eig = matrix
        .entries()
        .eigen()
        .map_err(|e| Error::EigenFailure(format!("{e:?}")))?;
    let values = eig.S().column_vector();
    let vectors = eig.U();
    let dim = matrix.dim();
    let ns = matrix.params().truncation() as i64;
    let mut modes = Vec::with_capacity(dim);
    for k in 0..dim {
        let mu = values[k];
        if !(mu.re.is_finite() && mu.im.is_finite()) {
            return Err(Error::EigenFailure(format!("non-finite eigenvalue {mu}")));
        }
        let mut v: Vec<Complex64> = vectors.col(k).iter().copied().collect();
        let norm = v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::EigenFailure(format!("degenerate eigenvector for {mu}")));
        }
        for c in &mut v {
            *c /= norm;
        }
        modes.push(FloquetMode {
            eps_t: eps_from_eigenvalue(mu),
            eigenvalue: mu,
            participation_ratio: participation_ratio(&v)?,
            center: center_of(&v, ns),
            eigenvector: v,
            edge_flagged: false,
        });
    }
    modes.sort_by(|a, b| {
        a.eps_t
            .re
            .total_cmp(&b.eps_t.re)
            .then(a.eps_t.im.total_cmp(&b.eps_t.im))
    });
    Ok(QuasiEnergySpectrum {
        modes,
        params: *matrix.params(),
    })
}

/// Flags truncation artifacts without removing them.
///
/// A mode is flagged when it satisfies [`edge_rule`] and does not grow
/// (`Im εT ≤ 0`). The truncated matrix is similar to a compressed unitary,
/// so boundary artifacts can only decay; a growing mode pinned to the edge
/// is the amplified skin of a broken-phase state and is kept.
pub fn filter_edge_states(
    mut spectrum: QuasiEnergySpectrum,
    edge_fraction: f64,
) -> Result<QuasiEnergySpectrum> {
    if !(edge_fraction > 0.0 && edge_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "edge fraction must lie in (0, 1), got {edge_fraction}"
        )));
    }
    for m in &mut spectrum.modes {
        m.edge_flagged = m.eps_t.im <= 0.0 && edge_rule(&m.eigenvector, edge_fraction);
    }
    if spectrum.retained().next().is_none() {
        return Err(Error::AllFiltered {
            total: spectrum.len(),
        });
    }
    Ok(spectrum)
}

/// Mean of `|Im εT|` over unflagged modes.
pub fn mean_im_quasienergy(spectrum: &QuasiEnergySpectrum) -> Result<f64> {
    let (sum, count) = spectrum
        .retained()
        .fold((0.0, 0usize), |(s, c), m| (s + m.eps_t.im.abs(), c + 1));
    if count == 0 {
        return Err(Error::AllFiltered {
            total: spectrum.len(),
        });
    }
    Ok(sum / count as f64)
}

impl FloquetMatrix {
    /// `‖Uφ - μφ‖ / ‖φ‖`.
    pub fn residual(&self, mode: &FloquetMode) -> f64 {
        let u_phi = self.apply(&mode.eigenvector);
        let num: f64 = u_phi
            .iter()
            .zip(&mode.eigenvector)
            .map(|(a, b)| (a - mode.eigenvalue * b).norm_sqr())
            .sum();
        let den: f64 = mode.eigenvector.iter().map(|c| c.norm_sqr()).sum();
        (num / den).sqrt()
    }
}
