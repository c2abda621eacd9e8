//! Named parameter sets for the published figures.

use anyhow::{bail, Result};

use crate::settings::Layer;

pub const PRESETS: [&str; 7] = ["fig1a", "fig1b", "fig2", "fig3", "fig4", "fig6", "fig7"];

fn pairs(command: &str, preset: &str) -> Option<&'static [(&'static str, &'static str)]> {
    let p: &[(&str, &str)] = match (preset, command) {
        ("fig1a", "spectrum") => &[("K", "3"), ("beta", "0.7/2pi"), ("lambda", "0.1"), ("Ns", "1000")],
        ("fig1a", "threshold") => &[("K", "3"), ("betas", "0.7/2pi"), ("Ns", "500")],
        ("fig1b", "threshold") => &[
            ("K", "3"),
            ("betas", "0.5/2pi,0.7/2pi,0.9/2pi,1.1/2pi,1.3/2pi"),
            ("Ns", "500"),
        ],
        ("fig2", "spectrum") => &[("K", "3"), ("beta", "1/12"), ("lambda", "0.05"), ("Ns", "500")],
        ("fig2", "threshold") => &[("K", "3"), ("betas", "1/12"), ("Ns", "500")],
        ("fig2", "bands") => &[("K", "3"), ("beta", "1/12"), ("lambda", "0.3"), ("q_points", "201")],
        ("fig3", "evolve") => &[
            ("K", "3"),
            ("beta", "1/4pi"),
            ("lambda", "1/30"),
            ("Ns", "400"),
            ("kicks", "1000"),
        ],
        ("fig4", "evolve") => &[
            ("K", "3"),
            ("beta", "1/12"),
            ("lambda", "1/30"),
            ("Ns", "3000"),
            ("kicks", "1000"),
        ],
        ("fig6", "cavity") => &[("beta", "1/4pi")],
        ("fig7", "cavity") => &[("beta", "1/12")],
        _ => return None,
    };
    Some(p)
}

/// The preset as a settings layer for `command`.
pub fn layer(command: &str, preset: &str) -> Result<Layer> {
    if !PRESETS.contains(&preset) {
        bail!("unknown preset `{preset}` (known: {})", PRESETS.join(", "));
    }
    let Some(p) = pairs(command, preset) else {
        bail!("preset `{preset}` does not apply to `{command}`");
    };
    let owned: Vec<(&str, String)> = p.iter().map(|(k, v)| (*k, v.to_string())).collect();
    Ok(Layer::from_pairs(&format!("preset {preset}"), &owned))
}
