use serde::Serialize;

use super::{filter_edge_states, mean_im_quasienergy, quasi_energy_spectrum, FloquetMatrix};
use crate::error::{Error, Result};
use crate::model::RotorParams;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ThresholdConfig {
    /// `η`: the phase counts as broken once mean `|Im εT|` exceeds this.
    pub detector_tolerance: f64,
    /// Bisection stops once the bracket is narrower than this.
    pub bisection_tolerance: f64,
    /// Spacing of the coarse scan `λ = step, 2 step, ...` below one.
    pub scan_step: f64,
    pub edge_fraction: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        ThresholdConfig {
            detector_tolerance: 1e-4,
            bisection_tolerance: 1e-3,
            scan_step: 0.1,
            edge_fraction: 0.1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdOutcome {
    /// A crossing was bracketed and bisected.
    Crossing,
    /// Broken already at the smallest probed `λ`; reported as `0`.
    AlreadyBroken,
    /// Unbroken across the whole bracket; reported as the largest double
    /// below one.
    Unbroken,
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdResult {
    pub lambda_pt: f64,
    pub outcome: ThresholdOutcome,
    /// `(λ, mean |Im εT|)` from the coarse scan.
    pub scan: Vec<(f64, f64)>,
    /// `(λ, mean |Im εT|)` at each bisection midpoint.
    pub bisection: Vec<(f64, f64)>,
}

/// Mean `|Im εT|` over unflagged modes at the given `λ`.
pub fn detector(params: &RotorParams, lambda: f64, edge_fraction: f64) -> Result<f64> {
    let p = params.with_nonhermiticity(lambda)?;
    let matrix = FloquetMatrix::build(&p)?;
    let spectrum = filter_edge_states(quasi_energy_spectrum(&matrix)?, edge_fraction)?;
    mean_im_quasienergy(&spectrum)
}

pub fn scan_detector(params: &RotorParams, lambdas: &[f64], edge_fraction: f64) -> Result<Vec<(f64, f64)>> {
    lambdas
        .iter()
        .map(|&l| detector(params, l, edge_fraction).map(|d| (l, d)))
        .collect()
}

fn scan_grid(step: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 1;
    loop {
        let l = k as f64 * step;
        if l >= 1.0 - 1e-9 {
            break;
        }
        out.push(l);
        k += 1;
    }
    out
}

/// Smallest `λ` at which mean `|Im εT|` exceeds `η`, for the `K`, `β` and
/// `N_s` of `params` (its `λ` is ignored).
///
/// A coarse scan over `λ = step, 2 step, ...` locates the first broken
/// point; the detector must switch on once and stay on across the scan.
/// The bracket is then bisected.
pub fn pt_threshold(params: &RotorParams, config: &ThresholdConfig) -> Result<ThresholdResult> {
    validate(config)?;
    let grid = scan_grid(config.scan_step);
    let scan = scan_detector(params, &grid, config.edge_fraction)?;
    let broken: Vec<bool> = scan.iter().map(|&(_, d)| d > config.detector_tolerance).collect();
    let first = broken.iter().position(|&b| b);
    if let Some(i) = first {
        if broken[i..].iter().any(|&b| !b) {
            return Err(Error::NonMonotoneDetector { scan });
        }
    }
    match first {
        None => Ok(ThresholdResult {
            lambda_pt: 1.0f64.next_down(),
            outcome: ThresholdOutcome::Unbroken,
            scan,
            bisection: Vec::new(),
        }),
        Some(0) => Ok(ThresholdResult {
            lambda_pt: 0.0,
            outcome: ThresholdOutcome::AlreadyBroken,
            scan,
            bisection: Vec::new(),
        }),
        Some(i) => {
            let (lambda_pt, bisection) = bisect(params, config, grid[i - 1], grid[i])?;
            Ok(ThresholdResult {
                lambda_pt,
                outcome: ThresholdOutcome::Crossing,
                scan,
                bisection,
            })
        }
    }
}

/// Bisection inside a caller-supplied bracket `[lo, hi]`, which must be
/// unbroken at `lo` and broken at `hi`. Used to refine a known threshold at
/// a larger truncation without repeating the coarse scan.
pub fn pt_threshold_bracketed(
    params: &RotorParams,
    config: &ThresholdConfig,
    lo: f64,
    hi: f64,
) -> Result<ThresholdResult> {
    validate(config)?;
    if !(0.0 <= lo && lo < hi && hi < 1.0) {
        return Err(Error::InvalidParameter(format!("bad bracket [{lo}, {hi}]")));
    }
    let scan = scan_detector(params, &[lo, hi], config.edge_fraction)?;
    let eta = config.detector_tolerance;
    if scan[0].1 > eta || scan[1].1 <= eta {
        return Err(Error::NonMonotoneDetector { scan });
    }
    let (lambda_pt, bisection) = bisect(params, config, lo, hi)?;
    Ok(ThresholdResult {
        lambda_pt,
        outcome: ThresholdOutcome::Crossing,
        scan,
        bisection,
    })
}

fn bisect(params: &RotorParams, config: &ThresholdConfig, mut lo: f64, mut hi: f64) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut steps = Vec::new();
    while hi - lo > config.bisection_tolerance {
        let mid = 0.5 * (lo + hi);
        let d = detector(params, mid, config.edge_fraction)?;
        steps.push((mid, d));
        if d > config.detector_tolerance {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((0.5 * (lo + hi), steps))
}

fn validate(config: &ThresholdConfig) -> Result<()> {
    let ok = config.detector_tolerance > 0.0
        && config.bisection_tolerance > 0.0
        && config.scan_step > 0.0
        && config.scan_step < 1.0
        && config.edge_fraction > 0.0
        && config.edge_fraction < 1.0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("invalid threshold configuration {config:?}")))
    }
}

/// Threshold at `N_s` and `2 N_s`.
#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceReport {
    pub coarse: ThresholdResult,
    pub fine: ThresholdResult,
    pub shift: f64,
}

/// Runs the full search at the truncation of `params`, then refines at twice
/// that truncation within `±window` of the first answer.
pub fn threshold_convergence(
    params: &RotorParams,
    config: &ThresholdConfig,
    window: f64,
) -> Result<ConvergenceReport> {
    let coarse = pt_threshold(params, config)?;
    let doubled = params.with_truncation(2 * params.truncation())?;
    let fine = if coarse.outcome == ThresholdOutcome::Crossing {
        let lo = (coarse.lambda_pt - window).max(0.0);
        let hi = (coarse.lambda_pt + window).min(1.0f64.next_down());
        pt_threshold_bracketed(&doubled, config, lo, hi)?
    } else {
        pt_threshold(&doubled, config)?
    };
    let shift = (fine.lambda_pt - coarse.lambda_pt).abs();
    Ok(ConvergenceReport { coarse, fine, shift })
}

/// Order-of-magnitude scales for weak non-Hermiticity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SmallLambdaEstimate {
    /// `4/K²`: the scale below which the localized phase is expected to
    /// stay unbroken. A bound, not a prediction.
    pub lambda_bound: f64,
    /// Localization length `K²/4` in momentum sites.
    pub localization_length: f64,
}

pub fn estimate_threshold_small_lambda(params: &RotorParams) -> SmallLambdaEstimate {
    let k2 = params.kick_strength() * params.kick_strength();
    SmallLambdaEstimate {
        lambda_bound: 4.0 / k2,
        localization_length: k2 / 4.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Beta;

    #[test]
    fn scan_grid_stops_below_one() {
        let g = scan_grid(0.1);
        assert_eq!(g.len(), 9);
        assert!((g[8] - 0.9).abs() < 1e-12);
        assert_eq!(scan_grid(0.25), vec![0.25, 0.5, 0.75]);
    }

    #[test]
    fn estimate_examples() {
        let p = RotorParams::new(3.0, 0.0, Beta::new(0.3).unwrap(), 1).unwrap();
        let e = estimate_threshold_small_lambda(&p);
        assert!((e.lambda_bound - 4.0 / 9.0).abs() < 1e-15);
        assert_eq!(e.localization_length, 2.25);
        let p = RotorParams::new(2.0, 0.0, Beta::new(0.3).unwrap(), 1).unwrap();
        assert_eq!(estimate_threshold_small_lambda(&p).lambda_bound, 1.0);
    }

    #[test]
    fn bad_config_is_rejected() {
        let p = RotorParams::new(3.0, 0.0, Beta::new(0.3).unwrap(), 5).unwrap();
        let c = ThresholdConfig {
            scan_step: 0.0,
            ..Default::default()
        };
        assert!(pt_threshold(&p, &c).is_err());
    }
}
