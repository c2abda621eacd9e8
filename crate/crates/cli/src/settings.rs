//! Layered `key = value` settings for each subcommand.
//!
//! Layers are applied in order: built-in defaults, preset, the default
//! config directory, `--config` files, then command-line flags. A later
//! assignment wins. Unknown keys are an error in every layer.

use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use pt_rotor::config::{parse_flat, Entry};
use pt_rotor::model::{Beta, RotorParams};
use serde::{Serialize, Serializer};
use sha2::{Digest, Sha256};

/// Environment variable naming a directory of `<command>.conf` files.
pub const CONFIG_DIR_ENV: &str = "PT_ROTOR_CONFIG_DIR";

pub trait Settings: Serialize {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String>;
    /// Checks required keys and fills values derived from others.
    fn finish(&mut self) -> Result<(), String> {
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub source: String,
    pub entries: Vec<Entry>,
}

impl Layer {
    pub fn from_pairs(source: &str, pairs: &[(&str, String)]) -> Self {
        Layer {
            source: source.to_string(),
            entries: pairs
                .iter()
                .enumerate()
                .map(|(i, (k, v))| Entry {
                    line: i + 1,
                    key: k.to_string(),
                    value: v.clone(),
                })
                .collect(),
        }
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let entries = parse_flat(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        Ok(Layer {
            source: path.display().to_string(),
            entries,
        })
    }
}

/// Layers for `command` from the config directory and explicit files.
pub fn file_layers(command: &str, explicit: &[PathBuf]) -> Result<Vec<Layer>> {
    let mut out = Vec::new();
    if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
        let path = Path::new(&dir).join(format!("{command}.conf"));
        if path.is_file() {
            out.push(Layer::from_file(&path)?);
        }
    }
    for p in explicit {
        out.push(Layer::from_file(p)?);
    }
    Ok(out)
}

pub fn resolve<S: Settings>(mut settings: S, layers: &[Layer]) -> Result<S> {
    for layer in layers {
        for e in &layer.entries {
            settings
                .set(&e.key, &e.value)
                .map_err(|m| anyhow!("{}:{}: {m}", layer.source, e.line))?;
        }
    }
    settings.finish().map_err(|m| anyhow!("{m}"))?;
    Ok(settings)
}

/// SHA-256 over every applied assignment, in order.
pub fn digest(layers: &[Layer]) -> String {
    let mut h = Sha256::new();
    for layer in layers {
        h.update(layer.source.as_bytes());
        h.update(b"\n");
        for e in &layer.entries {
            h.update(format!("{}={}\n", e.key, e.value).as_bytes());
        }
    }
    hex::encode(h.finalize())
}

/// `β` as typed, with its parsed value.
#[derive(Clone, Debug, PartialEq)]
pub struct BetaSpec {
    pub text: String,
    pub beta: Beta,
}

impl fmt::Display for BetaSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.text)
    }
}

impl Serialize for BetaSpec {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct View<'a> {
            text: &'a str,
            beta: f64,
            two_pi_beta: f64,
            rational: Option<String>,
        }
        View {
            text: &self.text,
            beta: self.beta.value(),
            two_pi_beta: self.beta.two_pi(),
            rational: self.beta.ratio().map(|(n, m)| format!("{n}/{m}")),
        }
        .serialize(s)
    }
}

/// Accepts `N/M` (kept exact), decimals, and `x/2pi` or `1/4pi` forms.
pub fn parse_beta(text: &str) -> Result<BetaSpec, String> {
    let t = text.trim();
    let err = || format!("cannot read `{t}` as beta (expected N/M, a decimal, or x/2pi)");
    let beta = match t.split_once('/') {
        Some((num, den)) => {
            let (num, den) = (num.trim(), den.trim());
            if let Some(c) = den.strip_suffix("pi") {
                let c = c.trim();
                let c: f64 = if c.is_empty() { 1.0 } else { c.parse().map_err(|_| err())? };
                let x: f64 = num.parse().map_err(|_| err())?;
                Beta::new(x / (c * PI))
            } else if let (Ok(n), Ok(m)) = (num.parse::<u64>(), den.parse::<u64>()) {
                if m == 0 {
                    return Err(err());
                }
                Beta::rational(n, m)
            } else {
                let x: f64 = num.parse().map_err(|_| err())?;
                let y: f64 = den.parse().map_err(|_| err())?;
                Beta::new(x / y)
            }
        }
        None => Beta::new(t.parse().map_err(|_| err())?),
    }
    .map_err(|e| e.to_string())?;
    Ok(BetaSpec {
        text: t.to_string(),
        beta,
    })
}

pub fn parse_f64(v: &str) -> Result<f64, String> {
    let v = v.trim();
    let x = match v.split_once('/') {
        Some((a, b)) => {
            let a: f64 = a.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
            let b: f64 = b.trim().parse().map_err(|_| format!("`{v}` is not a number"))?;
            a / b
        }
        None => v.parse().map_err(|_| format!("`{v}` is not a number"))?,
    };
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("`{v}` is not finite"))
    }
}

pub fn parse_usize(v: &str) -> Result<usize, String> {
    v.trim().parse().map_err(|_| format!("`{v}` is not a non-negative integer"))
}

pub fn parse_list<T>(v: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    v.split(',').filter(|s| !s.trim().is_empty()).map(item).collect()
}

fn required<T: Clone>(v: &Option<T>, key: &str) -> Result<T, String> {
    v.clone().ok_or_else(|| format!("missing required setting `{key}`"))
}

/// `K`, `λ`, `β` and `N_s`, shared by the rotor subcommands.
#[derive(Clone, Debug, Serialize)]
pub struct ModelSettings {
    #[serde(rename = "K")]
    pub kick_strength: Option<f64>,
    pub lambda: f64,
    pub beta: Option<BetaSpec>,
    #[serde(rename = "Ns")]
    pub truncation: usize,
}

impl ModelSettings {
    pub fn with_truncation(truncation: usize) -> Self {
        ModelSettings {
            kick_strength: None,
            lambda: 0.0,
            beta: None,
            truncation,
        }
    }

    fn set(&mut self, key: &str, value: &str) -> Option<Result<(), String>> {
        let r = match key {
            "K" => parse_f64(value).map(|v| self.kick_strength = Some(v)),
            "lambda" => parse_f64(value).map(|v| self.lambda = v),
            "beta" => parse_beta(value).map(|b| self.beta = Some(b)),
            "two_pi_beta" => parse_beta(&format!("{}/2pi", value.trim())).map(|b| self.beta = Some(b)),
            "Ns" => parse_usize(value).map(|v| self.truncation = v),
            _ => return None,
        };
        Some(r)
    }

    fn finish(&mut self) -> Result<(), String> {
        required(&self.kick_strength, "K")?;
        required(&self.beta, "beta")?;
        self.params().map(|_| ())
    }

    pub fn params(&self) -> Result<RotorParams, String> {
        let k = required(&self.kick_strength, "K")?;
        let b = required(&self.beta, "beta")?;
        RotorParams::new(k, self.lambda, b.beta, self.truncation).map_err(|e| e.to_string())
    }
}

fn unknown(key: &str) -> Result<(), String> {
    Err(format!("unknown key `{key}`"))
}

#[derive(Clone, Debug, Serialize)]
pub struct SpectrumSettings {
    #[serde(flatten)]
    pub model: ModelSettings,
    pub edge_fraction: f64,
}

impl Default for SpectrumSettings {
    fn default() -> Self {
        SpectrumSettings {
            model: ModelSettings::with_truncation(500),
            edge_fraction: 0.1,
        }
    }
}

impl Settings for SpectrumSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if let Some(r) = self.model.set(key, value) {
            return r;
        }
        match key {
            "edge_fraction" => self.edge_fraction = parse_f64(value)?,
            _ => return unknown(key),
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), String> {
        self.model.finish()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ThresholdSettings {
    #[serde(rename = "K")]
    pub kick_strength: Option<f64>,
    pub betas: Vec<BetaSpec>,
    #[serde(rename = "Ns")]
    pub truncation: usize,
    pub detector_tolerance: f64,
    pub bisection_tolerance: f64,
    pub scan_step: f64,
    pub edge_fraction: f64,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        let c = pt_rotor::floquet::ThresholdConfig::default();
        ThresholdSettings {
            kick_strength: None,
            betas: Vec::new(),
            truncation: 500,
            detector_tolerance: c.detector_tolerance,
            bisection_tolerance: c.bisection_tolerance,
            scan_step: c.scan_step,
            edge_fraction: c.edge_fraction,
        }
    }
}

impl ThresholdSettings {
    pub fn config(&self) -> pt_rotor::floquet::ThresholdConfig {
        pt_rotor::floquet::ThresholdConfig {
            detector_tolerance: self.detector_tolerance,
            bisection_tolerance: self.bisection_tolerance,
            scan_step: self.scan_step,
            edge_fraction: self.edge_fraction,
        }
    }
}

impl Settings for ThresholdSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "K" => self.kick_strength = Some(parse_f64(value)?),
            "beta" | "betas" => self.betas = parse_list(value, parse_beta)?,
            "two_pi_beta" | "two_pi_betas" => {
                self.betas = parse_list(value, |v| parse_beta(&format!("{}/2pi", v.trim())))?
            }
            "Ns" => self.truncation = parse_usize(value)?,
            "detector_tolerance" => self.detector_tolerance = parse_f64(value)?,
            "bisection_tolerance" => self.bisection_tolerance = parse_f64(value)?,
            "scan_step" => self.scan_step = parse_f64(value)?,
            "edge_fraction" => self.edge_fraction = parse_f64(value)?,
            _ => return unknown(key),
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), String> {
        let k = required(&self.kick_strength, "K")?;
        if self.betas.is_empty() {
            return Err("missing required setting `beta`".into());
        }
        RotorParams::new(k, 0.0, self.betas[0].beta, self.truncation).map_err(|e| e.to_string())?;
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BandsSettings {
    #[serde(flatten)]
    pub model: ModelSettings,
    pub q_points: usize,
}

impl Default for BandsSettings {
    fn default() -> Self {
        BandsSettings {
            model: ModelSettings::with_truncation(1),
            q_points: 201,
        }
    }
}

impl Settings for BandsSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if key == "Ns" {
            return Err("`Ns` does not apply to band calculations".into());
        }
        if let Some(r) = self.model.set(key, value) {
            return r;
        }
        match key {
            "q_points" => self.q_points = parse_usize(value)?,
            _ => return unknown(key),
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), String> {
        self.model.finish()?;
        if self.model.beta.as_ref().and_then(|b| b.beta.ratio()).is_none() {
            return Err("bands need a rational beta written as N/M".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EvolveSettings {
    #[serde(flatten)]
    pub model: ModelSettings,
    pub kicks: usize,
    pub snapshots: Vec<usize>,
    pub quasi_momentum: f64,
}

impl Default for EvolveSettings {
    fn default() -> Self {
        EvolveSettings {
            model: ModelSettings::with_truncation(500),
            kicks: 1000,
            snapshots: pt_rotor::dynamics::DEFAULT_SNAPSHOTS.to_vec(),
            quasi_momentum: 0.0,
        }
    }
}

impl Settings for EvolveSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        if let Some(r) = self.model.set(key, value) {
            return r;
        }
        match key {
            "kicks" => self.kicks = parse_usize(value)?,
            "snapshots" => self.snapshots = parse_list(value, parse_usize)?,
            "quasi_momentum" => self.quasi_momentum = parse_f64(value)?,
            _ => return unknown(key),
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), String> {
        self.model.finish()?;
        self.snapshots.retain(|&n| n <= self.kicks);
        self.snapshots.sort_unstable();
        self.snapshots.dedup();
        Ok(())
    }
}

/// The main resonance `β = 1`; `N_s` defaults to a size that holds the
/// ballistic front after `kicks` kicks.
#[derive(Clone, Debug, Serialize)]
pub struct ResonanceSettings {
    #[serde(rename = "K")]
    pub kick_strength: f64,
    pub lambda: f64,
    pub kicks: usize,
    pub q_points: usize,
    #[serde(rename = "Ns")]
    pub truncation: Option<usize>,
}

impl Default for ResonanceSettings {
    fn default() -> Self {
        ResonanceSettings {
            kick_strength: 3.0,
            lambda: 1.0 / 30.0,
            kicks: 200,
            q_points: 1024,
            truncation: None,
        }
    }
}

impl ResonanceSettings {
    pub fn params(&self) -> Result<RotorParams, String> {
        let ns = self.truncation.ok_or("truncation unresolved")?;
        RotorParams::new(self.kick_strength, self.lambda, Beta::rational(1, 1).unwrap(), ns)
            .map_err(|e| e.to_string())
    }
}

impl Settings for ResonanceSettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "K" => self.kick_strength = parse_f64(value)?,
            "lambda" => self.lambda = parse_f64(value)?,
            "kicks" => self.kicks = parse_usize(value)?,
            "q_points" => self.q_points = parse_usize(value)?,
            "Ns" => self.truncation = Some(parse_usize(value)?),
            "beta" => {
                let b = parse_beta(value)?;
                if !b.beta.is_main_resonance() {
                    return Err(format!("resonance runs need beta = 1, got `{}`", b.text));
                }
            }
            _ => return unknown(key),
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), String> {
        if self.truncation.is_none() {
            let y = self.lambda.atanh();
            let front = self.kick_strength * y.exp() * self.kicks as f64;
            self.truncation = Some((1.5 * front).ceil() as usize + 64);
        }
        self.params().map(|_| ())
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CavitySettings {
    #[serde(flatten)]
    pub config: pt_rotor::cavity::CavityConfig,
    /// Round trips at which the full far field is written.
    pub far_field_trips: Vec<usize>,
}

impl Default for CavitySettings {
    fn default() -> Self {
        CavitySettings {
            config: pt_rotor::cavity::CavityConfig::fig6(),
            far_field_trips: Vec::new(),
        }
    }
}

impl Settings for CavitySettings {
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "far_field_trips" => self.far_field_trips = parse_list(value, parse_usize)?,
            _ => self.config.set(key, value)?,
        }
        Ok(())
    }

    fn finish(&mut self) -> Result<(), String> {
        self.config.validate().map_err(|e| e.to_string())?;
        if self.far_field_trips.is_empty() {
            self.far_field_trips = vec![0, self.config.round_trips];
        }
        self.far_field_trips.retain(|&n| n <= self.config.round_trips);
        self.far_field_trips.sort_unstable();
        self.far_field_trips.dedup();
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_grammar() {
        let b = parse_beta("1/12").unwrap();
        assert_eq!(b.beta.ratio(), Some((1, 12)));
        let b = parse_beta("0.7/2pi").unwrap();
        assert!((b.beta.two_pi() - 0.7).abs() < 1e-15);
        let b = parse_beta("1/4pi").unwrap();
        assert!((b.beta.value() - 1.0 / (4.0 * PI)).abs() < 1e-15);
        let b = parse_beta("0.25").unwrap();
        assert_eq!(b.beta.value(), 0.25);
        assert_eq!(parse_beta("1").unwrap().beta.value(), 1.0);
        assert!(parse_beta("1/0").is_err());
        assert!(parse_beta("x").is_err());
        assert!(parse_beta("-0.5").is_err());
    }

    #[test]
    fn later_layers_win_and_unknown_keys_fail() {
        let layers = vec![
            Layer::from_pairs("a", &[("K", "2".into()), ("beta", "1/2".into())]),
            Layer::from_pairs("b", &[("K", "3".into())]),
        ];
        let s = resolve(SpectrumSettings::default(), &layers).unwrap();
        assert_eq!(s.model.kick_strength, Some(3.0));
        let bad = vec![Layer::from_pairs("c", &[("K", "3".into()), ("colour", "red".into())])];
        let err = resolve(SpectrumSettings::default(), &bad).unwrap_err().to_string();
        assert!(err.starts_with("c:2:"), "{err}");
        let missing = vec![Layer::from_pairs("d", &[("K", "3".into())])];
        assert!(resolve(SpectrumSettings::default(), &missing).is_err());
    }

    #[test]
    fn digest_depends_on_order() {
        let a = Layer::from_pairs("x", &[("K", "1".into())]);
        let b = Layer::from_pairs("x", &[("K", "2".into())]);
        assert_ne!(digest(&[a.clone(), b.clone()]), digest(&[b, a]));
    }
}
