use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use pt_rotor::{cavity, dynamics, floquet, resonance, table};

mod manifest;
mod presets;
mod settings;
mod verify;

use manifest::Run;
use settings::{Layer, Settings};

#[derive(Parser)]
#[command(name = "pt-rotor", version, about = "Non-Hermitian kicked rotor experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Quasi-energy spectrum of the truncated Floquet matrix.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Symmetry-breaking threshold for one or more values of beta.
    Threshold {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        kick_strength: Option<String>,
        /// Comma-separated list.
        #[arg(long)]
        beta: Option<String>,
        /// Comma-separated list of 2πβ values.
        #[arg(long = "two-pi-beta")]
        two_pi_beta: Option<String>,
        #[arg(long = "Ns")]
        truncation: Option<String>,
        /// Parallel workers for the beta sweep [default: available cores].
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Band structure at a rational resonance.
    Bands {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long = "q-points")]
        q_points: Option<String>,
    },
    /// Kick-by-kick evolution from the zero-momentum state.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        model: ModelFlags,
        #[arg(long)]
        kicks: Option<String>,
        /// Comma-separated kick numbers for momentum snapshots.
        #[arg(long)]
        snapshots: Option<String>,
    },
    /// Exact and asymptotic results at beta = 1.
    Resonance {
        #[command(flatten)]
        common: Common,
        #[arg(long = "K")]
        kick_strength: Option<String>,
        #[arg(long)]
        lambda: Option<String>,
        #[arg(long = "Ns")]
        truncation: Option<String>,
        #[arg(long)]
        kicks: Option<String>,
        #[arg(long = "q-points")]
        q_points: Option<String>,
    },
    /// Round trips of a beam in the grating cavity.
    Cavity {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trips: Option<String>,
    },
    /// Runs the cross-checks of every module.
    Verify {
        #[arg(long, value_enum, default_value_t = Level::Fast)]
        level: Level,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Level {
    Fast,
    Full,
}

#[derive(Args)]
struct Common {
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(presets::PRESETS))]
    preset: Option<String>,
    /// Flat `key = value` file; may be repeated, later files win.
    #[arg(long)]
    config: Vec<PathBuf>,
    /// Extra `key=value` assignment, applied after every file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Output directory [default: results/<command>].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelFlags {
    #[arg(long = "K")]
    kick_strength: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    /// `N/M`, a decimal, or `x/2pi`.
    #[arg(long, group = "beta_source")]
    beta: Option<String>,
    #[arg(long = "two-pi-beta", group = "beta_source")]
    two_pi_beta: Option<String>,
    #[arg(long = "beta-rational", group = "beta_source", value_name = "N/M")]
    beta_rational: Option<String>,
    #[arg(long = "Ns")]
    truncation: Option<String>,
}

impl ModelFlags {
    fn pairs(&self) -> Result<Vec<(&'static str, String)>> {
        let mut out = Vec::new();
        push(&mut out, "K", &self.kick_strength);
        push(&mut out, "lambda", &self.lambda);
        push(&mut out, "beta", &self.beta);
        push(&mut out, "two_pi_beta", &self.two_pi_beta);
        if let Some(r) = &self.beta_rational {
            let ok = r
                .split_once('/')
                .is_some_and(|(n, m)| n.trim().parse::<u64>().is_ok() && m.trim().parse::<u64>().is_ok());
            if !ok {
                return Err(anyhow!("--beta-rational expects N/M with integers, got `{r}`"));
            }
            out.push(("beta", r.clone()));
        }
        push(&mut out, "Ns", &self.truncation);
        Ok(out)
    }
}

fn push(out: &mut Vec<(&'static str, String)>, key: &'static str, v: &Option<String>) {
    if let Some(v) = v {
        out.push((key, v.clone()));
    }
}

/// Everything needed to resolve one subcommand's settings.
struct Invocation<'a> {
    command: &'static str,
    common: &'a Common,
    flags: Vec<(&'static str, String)>,
}

impl Invocation<'_> {
    fn layers(&self) -> Result<Vec<Layer>> {
        let mut layers = Vec::new();
        if let Some(p) = &self.common.preset {
            layers.push(presets::layer(self.command, p)?);
        }
        layers.extend(settings::file_layers(self.command, &self.common.config)?);
        let mut flags: Vec<(&str, String)> = self.flags.clone();
        for s in &self.common.set {
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("--set expects KEY=VALUE, got `{s}`"))?;
            flags.push((k.trim(), v.trim().to_string()));
        }
        if !flags.is_empty() {
            layers.push(Layer::from_pairs("command line", &flags));
        }
        Ok(layers)
    }

    fn start<S: Settings>(&self, defaults: S, workers: usize) -> Result<(S, Run)> {
        let layers = self.layers()?;
        let resolved = settings::resolve(defaults, &layers)?;
        let dir = self
            .common
            .out
            .clone()
            .unwrap_or_else(|| Path::new("results").join(self.command));
        let run = Run::new(
            &dir,
            self.command,
            self.common.preset.as_deref(),
            layers.iter().map(|l| l.source.clone()).collect(),
            settings::digest(&layers),
            workers,
            &resolved,
        )?;
        Ok((resolved, run))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Spectrum { common, model } => {
            let inv = Invocation {
                command: "spectrum",
                common: &common,
                flags: model.pairs()?,
            };
            cmd_spectrum(&inv)?;
        }
        Command::Threshold {
            common,
            kick_strength,
            beta,
            two_pi_beta,
            truncation,
            workers,
        } => {
            let mut flags = Vec::new();
            push(&mut flags, "K", &kick_strength);
            push(&mut flags, "betas", &beta);
            push(&mut flags, "two_pi_betas", &two_pi_beta);
            push(&mut flags, "Ns", &truncation);
            let inv = Invocation {
                command: "threshold",
                common: &common,
                flags,
            };
            let workers = workers
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
                .max(1);
            cmd_threshold(&inv, workers)?;
        }
        Command::Bands {
            common,
            model,
            q_points,
        } => {
            let mut flags = model.pairs()?;
            push(&mut flags, "q_points", &q_points);
            cmd_bands(&Invocation {
                command: "bands",
                common: &common,
                flags,
            })?;
        }
        Command::Evolve {
            common,
            model,
            kicks,
            snapshots,
        } => {
            let mut flags = model.pairs()?;
            push(&mut flags, "kicks", &kicks);
            push(&mut flags, "snapshots", &snapshots);
            cmd_evolve(&Invocation {
                command: "evolve",
                common: &common,
                flags,
            })?;
        }
        Command::Resonance {
            common,
            kick_strength,
            lambda,
            truncation,
            kicks,
            q_points,
        } => {
            let mut flags = Vec::new();
            push(&mut flags, "K", &kick_strength);
            push(&mut flags, "lambda", &lambda);
            push(&mut flags, "Ns", &truncation);
            push(&mut flags, "kicks", &kicks);
            push(&mut flags, "q_points", &q_points);
            cmd_resonance(&Invocation {
                command: "resonance",
                common: &common,
                flags,
            })?;
        }
        Command::Cavity { common, trips } => {
            let mut flags = Vec::new();
            push(&mut flags, "round_trips", &trips);
            cmd_cavity(&Invocation {
                command: "cavity",
                common: &common,
                flags,
            })?;
        }
        Command::Verify { level } => {
            let ok = verify::run(level);
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn err(e: String) -> anyhow::Error {
    anyhow!(e)
}

#[derive(Serialize)]
struct SpectrumSummary {
    modes: usize,
    retained: usize,
    flagged: usize,
    mean_abs_im_eps_t: f64,
}

fn cmd_spectrum(inv: &Invocation) -> Result<()> {
    let (s, mut run) = inv.start(settings::SpectrumSettings::default(), 1)?;
    let params = s.model.params().map_err(err)?;
    let matrix = run.time("build", || floquet::FloquetMatrix::build(&params))?;
    let spectrum = run.time("eigensolve", || floquet::quasi_energy_spectrum(&matrix))?;
    let spectrum = floquet::filter_edge_states(spectrum, s.edge_fraction)?;
    let summary = SpectrumSummary {
        modes: spectrum.len(),
        retained: spectrum.len() - spectrum.flagged_count(),
        flagged: spectrum.flagged_count(),
        mean_abs_im_eps_t: floquet::mean_im_quasienergy(&spectrum)?,
    };
    run.write("spectrum.csv", |w| table::write_spectrum(w, &spectrum))?;
    run.write_json("summary.json", &summary)?;
    println!(
        "{} modes, {} retained, mean |Im εT| = {:.6e}",
        summary.modes, summary.retained, summary.mean_abs_im_eps_t
    );
    let path = run.finish()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_threshold(inv: &Invocation, workers: usize) -> Result<()> {
    let (s, mut run) = inv.start(settings::ThresholdSettings::default(), workers)?;
    let config = s.config();
    let k = s.kick_strength.expect("checked by finish");
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .context("building worker pool")?;
    let mut results = run.time("sweep", || {
        pool.install(|| {
            s.betas
                .par_iter()
                .map(|b| {
                    let p = pt_rotor::model::RotorParams::new(k, 0.0, b.beta, s.truncation)?;
                    floquet::pt_threshold(&p, &config).map(|r| (b.beta.value(), r))
                })
                .collect::<pt_rotor::Result<Vec<_>>>()
        })
    })?;
    results.sort_by(|a, b| a.0.total_cmp(&b.0));
    run.write("threshold.csv", |w| table::write_threshold_sweep(w, &results))?;
    for (i, (beta, r)) in results.iter().enumerate() {
        run.write(&format!("scan_{i:02}.csv"), |w| table::write_threshold_scan(w, r))?;
        println!(
            "2πβ = {:.6}: λ_PT = {:.4} ({:?})",
            2.0 * std::f64::consts::PI * beta,
            r.lambda_pt,
            r.outcome
        );
    }
    let path = run.finish()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_bands(inv: &Invocation) -> Result<()> {
    let (s, mut run) = inv.start(settings::BandsSettings::default(), 1)?;
    let params = s.model.params().map_err(err)?;
    let bands = run.time("bands", || floquet::resonance_bands(&params, s.q_points))?;
    run.write("bands.csv", |w| table::write_bands(w, &bands))?;
    let max_im = bands
        .bands
        .iter()
        .flatten()
        .map(|e| e.im.abs())
        .fold(0.0, f64::max);
    println!("{} bands over {} quasi-momenta, max |Im εT| = {max_im:.6e}", bands.m, bands.q_grid.len());
    let path = run.finish()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_evolve(inv: &Invocation) -> Result<()> {
    let (s, mut run) = inv.start(settings::EvolveSettings::default(), 1)?;
    let params = s.model.params().map_err(err)?;
    let options = dynamics::EvolveOptions {
        snapshots: s.snapshots.clone(),
        quasi_momentum: s.quasi_momentum,
        ..Default::default()
    };
    let evo = run.time("evolve", || dynamics::evolve(&params, s.kicks, &options))?;
    run.write("series.csv", |w| table::write_series(w, &evo.series))?;
    for snap in &evo.snapshots {
        run.write(&format!("snapshot_n{:05}.csv", snap.kick), |w| table::write_snapshot(w, snap))?;
    }
    if let Some(last) = evo.series.records.last() {
        println!(
            "n = {}: P = {:.6e}, <l> = {:.6}, Δl = {:.6}",
            last.kick, last.norm, last.mean_l, last.spread
        );
    }
    let path = run.finish()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

#[derive(Serialize)]
struct SaddleSummary {
    q0: f64,
    group_velocity: f64,
    eps2_re: f64,
    eps2_im: f64,
    max_growth: f64,
}

fn cmd_resonance(inv: &Invocation) -> Result<()> {
    let (s, mut run) = inv.start(settings::ResonanceSettings::default(), 1)?;
    let params = s.params().map_err(err)?;
    let disp = run.time("dispersion", || resonance::dispersion(&params, s.q_points))?;
    let n = s.kicks;
    let exact = run.time("quadrature", || resonance::exact_resonance_state(&params, n))?;
    let ns = params.truncation() as i64;
    let rows = (-ns..=ns)
        .zip(&exact)
        .map(|(l, psi)| {
            let asym = if n == 0 {
                f64::NAN
            } else {
                resonance::asymptotic_profile(&params, l as f64, n as f64)?
            };
            Ok((l, psi.norm_sqr(), asym))
        })
        .collect::<pt_rotor::Result<Vec<_>>>()?;
    run.write("dispersion.csv", |w| table::write_dispersion(w, &disp))?;
    run.write(&format!("comparison_n{n:05}.csv"), |w| table::write_comparison(w, &rows))?;
    let saddle = SaddleSummary {
        q0: disp.q0,
        group_velocity: disp.group_velocity,
        eps2_re: disp.eps2.re,
        eps2_im: disp.eps2.im,
        max_growth: disp.max_growth,
    };
    run.write_json("saddle.json", &saddle)?;
    println!(
        "v_g = {:.6}, max growth = {:.6}, ε'' = {:.6} {:+.6}i",
        saddle.group_velocity, saddle.max_growth, saddle.eps2_re, saddle.eps2_im
    );
    let path = run.finish()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn cmd_cavity(inv: &Invocation) -> Result<()> {
    let (s, mut run) = inv.start(settings::CavitySettings::default(), 1)?;
    let decay = run.time("round_trips", || cavity::run_decay(&s.config))?;
    run.write("trips.csv", |w| table::write_trips(w, &decay.records))?;
    for &n in &s.far_field_trips {
        run.write(&format!("far_field_n{n:03}.csv"), |w| table::write_far_field(w, &decay.far_fields[n]))?;
    }
    let units = cavity::physical_units(&s.config);
    run.write_json("units.json", &units)?;
    if let Some(last) = decay.records.last() {
        println!(
            "trip {}: power = {:.6e}, <X> = {:.4} spacings, ΔX = {:.4} spacings",
            last.round_trip, last.power, last.mean_x, last.std_x
        );
    }
    let path = run.finish()?;
    eprintln!("wrote {}", path.display());
    Ok(())
}
