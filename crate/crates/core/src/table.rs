//! CSV tables with a header row and 17 significant digits per float.

use std::io::Write;

use crate::cavity::{FarField, TripRecord};
use crate::dynamics::{ObservableSeries, Snapshot};
use crate::error::Result;
use crate::floquet::{BandStructure, QuasiEnergySpectrum, ThresholdResult};
use crate::resonance::Dispersion;

/// Round-trips every finite double.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn table<W: Write, const C: usize>(out: W, header: [&str; C], rows: impl Iterator<Item = [String; C]>) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_spectrum<W: Write>(out: W, spectrum: &QuasiEnergySpectrum) -> Result<()> {
    table(
        out,
        ["re_epsT", "im_epsT", "R", "center", "edge_flagged"],
        spectrum.modes.iter().map(|m| {
            [
                fmt_f64(m.eps_t.re),
                fmt_f64(m.eps_t.im),
                fmt_f64(m.participation_ratio),
                fmt_f64(m.center),
                m.edge_flagged.to_string(),
            ]
        }),
    )
}

/// Coarse scan followed by the bisection midpoints.
pub fn write_threshold_scan<W: Write>(out: W, result: &ThresholdResult) -> Result<()> {
    table(
        out,
        ["lambda", "mean_abs_im"],
        result
            .scan
            .iter()
            .chain(&result.bisection)
            .map(|&(l, d)| [fmt_f64(l), fmt_f64(d)]),
    )
}

/// One row per `β`: `(2πβ, β, λ_PT, outcome)`.
pub fn write_threshold_sweep<W: Write>(out: W, rows: &[(f64, ThresholdResult)]) -> Result<()> {
    table(
        out,
        ["two_pi_beta", "beta", "lambda_pt", "outcome"],
        rows.iter().map(|(beta, r)| {
            let outcome = match r.outcome {
                crate::floquet::ThresholdOutcome::Crossing => "crossing",
                crate::floquet::ThresholdOutcome::AlreadyBroken => "already_broken",
                crate::floquet::ThresholdOutcome::Unbroken => "unbroken",
            };
            [
                fmt_f64(2.0 * std::f64::consts::PI * beta),
                fmt_f64(*beta),
                fmt_f64(r.lambda_pt),
                outcome.to_string(),
            ]
        }),
    )
}

pub fn write_series<W: Write>(out: W, series: &ObservableSeries) -> Result<()> {
    table(
        out,
        ["n", "P", "mean_l", "spread", "raw_spread"],
        series.records.iter().map(|r| {
            [
                r.kick.to_string(),
                fmt_f64(r.norm),
                fmt_f64(r.mean_l),
                fmt_f64(r.spread),
                fmt_f64(r.raw_spread),
            ]
        }),
    )
}

pub fn write_snapshot<W: Write>(out: W, snapshot: &Snapshot) -> Result<()> {
    let ns = (snapshot.abs2.len() / 2) as i64;
    table(
        out,
        ["l", "abs2"],
        snapshot
            .abs2
            .iter()
            .enumerate()
            .map(|(i, p)| [(i as i64 - ns).to_string(), fmt_f64(*p)]),
    )
}

pub fn write_dispersion<W: Write>(out: W, dispersion: &Dispersion) -> Result<()> {
    table(
        out,
        ["q", "re_eps", "im_eps"],
        dispersion
            .samples
            .iter()
            .map(|(q, e)| [fmt_f64(*q), fmt_f64(e.re), fmt_f64(e.im)]),
    )
}

/// `(l, |ψ_l|² exact, |ψ_l|² asymptotic)`.
pub fn write_comparison<W: Write>(out: W, rows: &[(i64, f64, f64)]) -> Result<()> {
    table(
        out,
        ["l", "abs2_exact", "abs2_asymptotic"],
        rows.iter()
            .map(|(l, e, a)| [l.to_string(), fmt_f64(*e), fmt_f64(*a)]),
    )
}

/// Long format: one row per `(band, q)`.
pub fn write_bands<W: Write>(out: W, bands: &BandStructure) -> Result<()> {
    table(
        out,
        ["band", "q", "re_epsT", "im_epsT"],
        bands.bands.iter().enumerate().flat_map(|(b, band)| {
            bands
                .q_grid
                .iter()
                .zip(band)
                .map(move |(q, e)| [b.to_string(), fmt_f64(*q), fmt_f64(e.re), fmt_f64(e.im)])
        }),
    )
}

pub fn write_trips<W: Write>(out: W, records: &[TripRecord]) -> Result<()> {
    table(
        out,
        ["n", "power", "meanX_over_spacing", "stdX_over_spacing"],
        records.iter().map(|r| {
            [
                r.round_trip.to_string(),
                fmt_f64(r.power),
                fmt_f64(r.mean_x),
                fmt_f64(r.std_x),
            ]
        }),
    )
}

pub fn write_far_field<W: Write>(out: W, far: &FarField) -> Result<()> {
    table(
        out,
        ["X", "intensity"],
        far.positions
            .iter()
            .zip(&far.intensity)
            .map(|(x, i)| [fmt_f64(*x), fmt_f64(*i)]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{evolve, EvolveOptions};
    use crate::model::{Beta, RotorParams};

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }

    #[test]
    fn series_layout() {
        let p = RotorParams::new(1.0, 0.0, Beta::new(0.3).unwrap(), 20).unwrap();
        let evo = evolve(&p, 3, &EvolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        write_series(&mut buf, &evo.series).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,P,mean_l,spread,raw_spread");
        assert_eq!(lines.len(), 5);
        assert!(lines[1].starts_with("0,1.0000000000000000e0,"));

        let mut buf = Vec::new();
        write_snapshot(&mut buf, &evo.snapshots[0]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 42);
        assert!(text.contains("\n0,1.0000000000000000e0\n"));
        assert!(text.lines().nth(1).unwrap().starts_with("-20,"));
    }
}
