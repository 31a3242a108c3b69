//! Scenario configuration: schema, validating parser and canonical emitter.

mod parse;
mod schema;

pub use schema::*;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{Error, Result};

/// One problem found while validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfigIssue {
    /// Dotted location, e.g. `link.arm_a.segments[0].length_km`.
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Parses and validates a scenario. All issues are reported together.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    parse::parse(text).map_err(Error::Config)
}

/// Canonical TOML form; `parse_config(&emit_config(c)?)` gives back `c`.
pub fn emit_config(config: &ScenarioConfig) -> Result<String> {
    toml::to_string(config).map_err(|e| Error::Format(e.to_string()))
}

/// SHA-256 of the canonical form, hex encoded.
pub fn config_hash(config: &ScenarioConfig) -> Result<String> {
    let text = emit_config(config)?;
    Ok(hex::encode(Sha256::digest(text.as_bytes())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset_text;
    use proptest::prelude::*;

    fn issues(text: &str) -> Vec<ConfigIssue> {
        match parse_config(text) {
            Err(Error::Config(v)) => v,
            other => panic!("expected config issues, got {other:?}"),
        }
    }

    #[test]
    fn empty_file_names_every_required_section() {
        let paths: Vec<String> = issues("").into_iter().map(|i| i.path).collect();
        for s in ["source", "channels", "catalog", "link", "detection", "analysis"] {
            assert!(paths.contains(&s.to_string()), "{s} missing from {paths:?}");
        }
        assert_eq!(paths.len(), 6);
    }

    #[test]
    fn negative_length_gives_one_targeted_issue() {
        let text = preset_text("301km").unwrap().replacen("length_km = 200.0", "length_km = -200.0", 1);
        let v = issues(&text);
        assert_eq!(v.len(), 1, "{v:?}");
        assert_eq!(v[0].path, "link.arm_a.segments[0].length_km");
    }

    #[test]
    fn unit_strings_convert_and_mismatches_are_reported() {
        let base = preset_text("301km").unwrap();
        let cfg = parse_config(&base.replacen("length_km = 200.0", "length_km = \"200000 m\"", 1)).unwrap();
        assert!((cfg.link.arm_a.segments[0].length_km - 200.0).abs() < 1e-9);
        let v = issues(&base.replacen("length_km = 200.0", "length_km = \"200 ps\"", 1));
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("unit"), "{}", v[0].message);
    }

    #[test]
    fn unknown_keys_and_type_errors_are_all_collected() {
        let base = preset_text("201km").unwrap();
        let text = base
            .replacen("[detection]", "[detection]\nfoo = 1", 1)
            .replacen("e_pol = 0.0219", "e_pol = \"high\"", 1)
            .replacen("fe = 1.09", "fe = [1]", 1);
        let paths: Vec<String> = issues(&text).into_iter().map(|i| i.path).collect();
        assert!(paths.contains(&"detection.foo".to_string()));
        assert!(paths.contains(&"detection.e_pol".to_string()));
        assert!(paths.contains(&"analysis.fe".to_string()));
    }

    #[test]
    fn row_counts_must_match_reference_channels() {
        let base = preset_text("201km").unwrap();
        let text = base.replacen("rows_ps = [-221.5, ", "rows_ps = [", 1);
        let v = issues(&text);
        assert_eq!(v[0].path, "catalog.dcf.rows_ps");
    }

    #[test]
    fn optional_sections_default() {
        let base = preset_text("201km").unwrap();
        let cut = base.find("[simulation]").unwrap();
        let cfg = parse_config(&base[..cut]).unwrap();
        assert_eq!(cfg.optimizer.rate_points, 25);
        assert!((cfg.bell.visibility - (1.0 - 2.0 * 0.0219)).abs() < 1e-12);
    }

    #[test]
    fn syntax_errors_carry_a_location() {
        let v = issues("[source\n");
        assert!(v[0].path.starts_with("line 1"), "{:?}", v[0]);
    }

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = parse_config(preset_text("201km").unwrap()).unwrap();
        let mut b = a.clone();
        assert_eq!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
        b.detection.e_pol = 0.03;
        assert_ne!(config_hash(&a).unwrap(), config_hash(&b).unwrap());
    }

    proptest! {
        #[test]
        fn parser_never_panics(text in "\\PC{0,200}") {
            let _ = parse_config(&text);
        }

        #[test]
        fn parser_never_panics_on_mutated_presets(pos in 0usize..4000, junk in "[\\[\\]=\"a-z0-9 .\\n-]{0,12}") {
            let base = preset_text("404km").unwrap();
            let mut p = pos.min(base.len());
            while !base.is_char_boundary(p) { p -= 1; }
            let text = format!("{}{}{}", &base[..p], junk, &base[p..]);
            let _ = parse_config(&text);
        }

        #[test]
        fn emit_then_parse_is_identity(e_pol in 0.0f64..0.5, len in 0.0f64..500.0, seed in 0u64..(i64::MAX as u64), d in 1e-3f64..1e4) {
            let mut c = parse_config(preset_text("301km").unwrap()).unwrap();
            c.detection.e_pol = e_pol;
            c.link.arm_b.segments[0].length_km = len;
            c.simulation.seed = seed;
            c.analysis.acquisition_time_s = d;
            let back = parse_config(&emit_config(&c).unwrap()).unwrap();
            prop_assert_eq!(back, c);
        }
    }
}
