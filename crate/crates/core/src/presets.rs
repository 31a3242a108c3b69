//! Bundled scenarios for the 201, 301 and 404 km links.

use crate::config::{parse_config, ScenarioConfig};
use crate::source::{PhaseMatchParams, SourceSpec};
use crate::{Error, Result};

pub const PRESET_NAMES: [&str; 3] = ["201km", "301km", "404km"];

pub fn preset_text(name: &str) -> Option<&'static str> {
    match name.trim_end_matches(".cfg") {
        "201km" => Some(include_str!("../presets/201km.cfg")),
        "301km" => Some(include_str!("../presets/301km.cfg")),
        "404km" => Some(include_str!("../presets/404km.cfg")),
        _ => None,
    }
}

pub fn preset(name: &str) -> Result<ScenarioConfig> {
    let text = preset_text(name)
        .ok_or_else(|| Error::domain(format!("unknown preset {name:?} (have {})", PRESET_NAMES.join(", "))))?;
    parse_config(text)
}

/// The source shared by all presets.
pub fn default_source() -> SourceSpec {
    let cfg = preset("301km").expect("bundled preset parses");
    source_from_config(&cfg).expect("bundled source calibrates")
}

pub fn source_from_config(cfg: &ScenarioConfig) -> Result<SourceSpec> {
    let s = &cfg.source;
    let w = &s.waveguide;
    let spec = SourceSpec {
        pump_wavelength_nm: s.pump_wavelength_nm,
        pump_power_mw: s.pump_power_mw,
        brightness: s.brightness_pairs_per_s_per_mw,
        spectral_brightness: s.spectral_brightness_pairs_per_s_per_nm_per_mw,
        coincidence_efficiency: s.coincidence_efficiency,
        waveguide: PhaseMatchParams::calibrated(
            w.grating_length_mm,
            w.poling_period_um,
            w.temperature_c,
            w.degenerate_temperature_c,
            s.pump_wavelength_nm,
            w.tuning_slope_nm_per_c,
        )?,
    };
    spec.validate()?;
    Ok(spec)
}
