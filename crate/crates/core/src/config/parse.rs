//! TOML text to [`ScenarioConfig`], collecting every problem instead of
//! stopping at the first.

use toml::{Table, Value};

use super::schema::*;
use super::ConfigIssue;
use crate::link::DeviceKind;
use crate::security::NuXiOrder;

/// Unit multipliers into the canonical unit named by a key suffix.
fn unit_factor(canonical: &str, given: &str) -> Option<f64> {
    let g = given.trim();
    let table: &[(&str, f64)] = match canonical {
        "km" => &[("km", 1.0), ("m", 1e-3)],
        "nm" => &[("nm", 1.0), ("um", 1e3), ("µm", 1e3)],
        "um" => &[("um", 1.0), ("µm", 1.0), ("nm", 1e-3)],
        "mm" => &[("mm", 1.0), ("cm", 10.0), ("um", 1e-3)],
        "ps" => &[("ps", 1.0), ("ns", 1e3), ("fs", 1e-3)],
        "s" => &[("s", 1.0), ("ms", 1e-3), ("min", 60.0), ("h", 3600.0)],
        "mw" => &[("mW", 1.0), ("uW", 1e-3), ("µW", 1e-3), ("W", 1e3)],
        "ghz" => &[("GHz", 1.0), ("THz", 1e3)],
        "db" => &[("dB", 1.0)],
        "c" => &[("C", 1.0), ("°C", 1.0), ("degC", 1.0)],
        "cps" => &[("cps", 1.0), ("Hz", 1.0), ("/s", 1.0)],
        _ => &[],
    };
    table.iter().find(|(u, _)| *u == g).map(|(_, f)| *f)
}

/// The canonical unit implied by a key, e.g. `length_km` -> `km`.
fn key_unit(key: &str) -> Option<&'static str> {
    const SUFFIXES: &[(&str, &str)] = &[
        ("_km", "km"),
        ("_nm", "nm"),
        ("_um", "um"),
        ("_mm", "mm"),
        ("_ps", "ps"),
        ("_s", "s"),
        ("_mw", "mw"),
        ("_ghz", "ghz"),
        ("_db", "db"),
        ("_c", "c"),
        ("_cps", "cps"),
    ];
    SUFFIXES.iter().find(|(s, _)| key.ends_with(s)).map(|(_, u)| *u)
}

struct Ctx {
    issues: Vec<ConfigIssue>,
}

fn join(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Need {
    Required,
    Optional,
}
use Need::*;

#[derive(Clone, Copy)]
enum Range {
    Any,
    Positive,
    NonNegative,
    Fraction,
}

impl Ctx {
    fn err(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue { path: path.into(), message: message.into() });
    }

    fn known(&mut self, t: &Table, path: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.err(join(path, k), "unknown key");
            }
        }
    }

    fn table<'t>(&mut self, t: &'t Table, key: &str, path: &str, need: Need) -> Option<&'t Table> {
        match t.get(key) {
            None => {
                if need == Required {
                    self.err(join(path, key), "missing required section");
                }
                None
            }
            Some(Value::Table(inner)) => Some(inner),
            Some(_) => {
                self.err(join(path, key), "expected a table");
                None
            }
        }
    }

    fn num(&mut self, t: &Table, key: &str, path: &str, need: Need, range: Range) -> Option<f64> {
        let p = join(path, key);
        let v = match t.get(key) {
            None => {
                if need == Required {
                    self.err(p, "missing required field");
                }
                return None;
            }
            Some(Value::Float(f)) => *f,
            Some(Value::Integer(i)) => *i as f64,
            Some(Value::String(s)) => {
                let Some(unit) = key_unit(key) else {
                    self.err(p, "expected a number");
                    return None;
                };
                let s = s.trim();
                let split = s.find(|c: char| !(c.is_ascii_digit() || "+-.eE".contains(c))).unwrap_or(s.len());
                let (num, given) = s.split_at(split);
                let Ok(x) = num.trim().parse::<f64>() else {
                    self.err(p, format!("cannot read a number from {s:?}"));
                    return None;
                };
                match unit_factor(unit, given) {
                    Some(f) if !given.trim().is_empty() => x * f,
                    _ => {
                        self.err(p, format!("unit {:?} does not match the key's unit {unit}", given.trim()));
                        return None;
                    }
                }
            }
            Some(_) => {
                self.err(p, "expected a number");
                return None;
            }
        };
        let ok = match range {
            Range::Any => v.is_finite(),
            Range::Positive => v.is_finite() && v > 0.0,
            Range::NonNegative => v.is_finite() && v >= 0.0,
            Range::Fraction => (0.0..=1.0).contains(&v),
        };
        if !ok {
            let what = match range {
                Range::Any => "must be finite",
                Range::Positive => "must be positive",
                Range::NonNegative => "must be non-negative",
                Range::Fraction => "must lie in [0, 1]",
            };
            self.err(p, format!("{what} (got {v})"));
            return None;
        }
        Some(v)
    }

    fn int(&mut self, t: &Table, key: &str, path: &str, need: Need, min: i64) -> Option<u64> {
        let p = join(path, key);
        match t.get(key) {
            None => {
                if need == Required {
                    self.err(p, "missing required field");
                }
                None
            }
            Some(Value::Integer(i)) if *i >= min => Some(*i as u64),
            Some(Value::Integer(i)) => {
                self.err(p, format!("must be at least {min} (got {i})"));
                None
            }
            Some(Value::String(s)) => match s.trim().parse::<u64>() {
                Ok(v) if v as i128 >= min as i128 => Some(v),
                _ => {
                    self.err(p, "expected a non-negative integer");
                    None
                }
            },
            Some(_) => {
                self.err(p, "expected an integer");
                None
            }
        }
    }

    fn string(&mut self, t: &Table, key: &str, path: &str, need: Need, choices: &[&str]) -> Option<String> {
        let p = join(path, key);
        match t.get(key) {
            None => {
                if need == Required {
                    self.err(p, "missing required field");
                }
                None
            }
            Some(Value::String(s)) if choices.is_empty() || choices.contains(&s.as_str()) => Some(s.clone()),
            Some(Value::String(s)) => {
                self.err(p, format!("{s:?} is not one of {}", choices.join(", ")));
                None
            }
            Some(_) => {
                self.err(p, "expected a string");
                None
            }
        }
    }

    fn array<'t>(&mut self, t: &'t Table, key: &str, path: &str, need: Need) -> Option<&'t Vec<Value>> {
        match t.get(key) {
            None => {
                if need == Required {
                    self.err(join(path, key), "missing required field");
                }
                None
            }
            Some(Value::Array(a)) => Some(a),
            Some(_) => {
                self.err(join(path, key), "expected an array");
                None
            }
        }
    }

    fn num_list(&mut self, t: &Table, key: &str, path: &str, need: Need, range: Range) -> Option<Vec<f64>> {
        let arr = self.array(t, key, path, need)?;
        let mut out = Vec::with_capacity(arr.len());
        let mut ok = true;
        for (i, v) in arr.iter().enumerate() {
            let mut probe = Table::new();
            probe.insert(key.to_string(), v.clone());
            let before = self.issues.len();
            match self.num(&probe, key, path, Required, range) {
                Some(x) => out.push(x),
                None => {
                    ok = false;
                    for issue in &mut self.issues[before..] {
                        issue.path = format!("{}[{i}]", join(path, key));
                    }
                }
            }
        }
        ok.then_some(out)
    }

    fn str_list(&mut self, t: &Table, key: &str, path: &str, need: Need) -> Option<Vec<String>> {
        let arr = self.array(t, key, path, need)?;
        let mut out = Vec::new();
        for (i, v) in arr.iter().enumerate() {
            match v {
                Value::String(s) => out.push(s.clone()),
                _ => self.err(format!("{}[{i}]", join(path, key)), "expected a string"),
            }
        }
        (out.len() == arr.len()).then_some(out)
    }

    fn tables<'t>(&mut self, t: &'t Table, key: &str, path: &str) -> Vec<(String, &'t Table)> {
        let Some(arr) = self.array(t, key, path, Optional) else { return Vec::new() };
        let mut out = Vec::new();
        for (i, v) in arr.iter().enumerate() {
            let p = format!("{}[{i}]", join(path, key));
            match v {
                Value::Table(inner) => out.push((p, inner)),
                _ => self.err(p, "expected a table"),
            }
        }
        out
    }
}

fn source(cx: &mut Ctx, root: &Table) -> Option<SourceConfig> {
    let p = "source";
    let t = cx.table(root, p, "", Required)?;
    cx.known(
        t,
        p,
        &[
            "pump_wavelength_nm",
            "pump_power_mw",
            "brightness_pairs_per_s_per_mw",
            "spectral_brightness_pairs_per_s_per_nm_per_mw",
            "coincidence_efficiency",
            "waveguide",
        ],
    );
    let pump = cx.num(t, "pump_wavelength_nm", p, Required, Range::Positive);
    let power = cx.num(t, "pump_power_mw", p, Required, Range::NonNegative);
    let bright = cx.num(t, "brightness_pairs_per_s_per_mw", p, Required, Range::Positive);
    let spec = cx.num(t, "spectral_brightness_pairs_per_s_per_nm_per_mw", p, Required, Range::Positive);
    let eta = cx.num(t, "coincidence_efficiency", p, Required, Range::Fraction);
    if eta == Some(0.0) {
        cx.err("source.coincidence_efficiency", "must be positive");
    }
    let wp = "source.waveguide";
    let w = cx.table(t, "waveguide", p, Required);
    let wg = w.and_then(|w| {
        cx.known(
            w,
            wp,
            &["grating_length_mm", "poling_period_um", "degenerate_temperature_c", "temperature_c", "tuning_slope_nm_per_c"],
        );
        let l = cx.num(w, "grating_length_mm", wp, Required, Range::Positive);
        let period = cx.num(w, "poling_period_um", wp, Required, Range::Positive);
        let td = cx.num(w, "degenerate_temperature_c", wp, Required, Range::Any);
        let temp = cx.num(w, "temperature_c", wp, Required, Range::Any);
        let slope = cx.num(w, "tuning_slope_nm_per_c", wp, Optional, Range::Positive).unwrap_or(10.0);
        Some(WaveguideConfig {
            grating_length_mm: l?,
            poling_period_um: period?,
            degenerate_temperature_c: td?,
            temperature_c: temp?,
            tuning_slope_nm_per_c: slope,
        })
    });
    Some(SourceConfig {
        pump_wavelength_nm: pump?,
        pump_power_mw: power?,
        brightness_pairs_per_s_per_mw: bright?,
        spectral_brightness_pairs_per_s_per_nm_per_mw: spec?,
        coincidence_efficiency: eta.filter(|e| *e > 0.0)?,
        waveguide: wg?,
    })
}

fn label_ok(label: &str) -> bool {
    let b = label.as_bytes();
    let side = |s: &[u8], c: u8| s.len() == 3 && s[0] == c && s[1].is_ascii_digit() && s[2].is_ascii_digit();
    match b.len() {
        3 => side(b, b'C'),
        6 => side(&b[..3], b'C') && side(&b[3..], b'L'),
        _ => false,
    }
}

fn channels(cx: &mut Ctx, root: &Table) -> Option<ChannelsConfig> {
    let p = "channels";
    let t = cx.table(root, p, "", Required)?;
    cx.known(t, p, &["grid_spacing_ghz", "channel_fwhm_nm", "pairs", "threshold", "wl_min_nm", "wl_max_nm", "wl_step_nm"]);
    let spacing = cx.num(t, "grid_spacing_ghz", p, Required, Range::Positive);
    let fwhm = cx.num(t, "channel_fwhm_nm", p, Required, Range::Positive);
    let pairs = cx.str_list(t, "pairs", p, Optional).unwrap_or_default();
    for (i, l) in pairs.iter().enumerate() {
        if !label_ok(l) {
            cx.err(format!("channels.pairs[{i}]"), format!("{l:?} is not a channel label like C42 or C42L00"));
        }
    }
    let threshold = cx.num(t, "threshold", p, Optional, Range::Fraction).unwrap_or(0.1);
    let lo = cx.num(t, "wl_min_nm", p, Optional, Range::Positive).unwrap_or(1450.0);
    let hi = cx.num(t, "wl_max_nm", p, Optional, Range::Positive).unwrap_or(1700.0);
    let step = cx.num(t, "wl_step_nm", p, Optional, Range::Positive).unwrap_or(0.05);
    if hi <= lo {
        cx.err("channels.wl_max_nm", "must exceed wl_min_nm");
    }
    Some(ChannelsConfig {
        grid_spacing_ghz: spacing?,
        channel_fwhm_nm: fwhm?,
        pairs,
        threshold,
        wl_min_nm: lo,
        wl_max_nm: hi,
        wl_step_nm: step,
    })
}

fn catalog_device(cx: &mut Ctx, t: &Table, key: &str, path: &str) -> Option<CatalogDeviceConfig> {
    let p = join(path, key);
    let d = cx.table(t, key, path, Required)?;
    cx.known(d, &p, &["rows_ps", "units", "insertion_loss_db"]);
    let rows = cx.num_list(d, "rows_ps", &p, Required, Range::Any);
    let units = cx.int(d, "units", &p, Required, 1);
    let il = cx.num(d, "insertion_loss_db", &p, Required, Range::NonNegative);
    Some(CatalogDeviceConfig { rows_ps: rows?, units: units? as usize, insertion_loss_db: il? })
}

fn catalog(cx: &mut Ctx, root: &Table) -> Option<CatalogConfig> {
    let p = "catalog";
    let t = cx.table(root, p, "", Required)?;
    cx.known(t, p, &["reference_channels", "outlier_threshold_ps", "max_per_kind", "residual_threshold_ps", "dcm", "dcf"]);
    let refs = cx.str_list(t, "reference_channels", p, Required);
    if let Some(r) = &refs {
        if r.len() < 2 {
            cx.err("catalog.reference_channels", "at least two channels are needed for a fit");
        }
        for (i, l) in r.iter().enumerate() {
            if !label_ok(l) {
                cx.err(format!("catalog.reference_channels[{i}]"), format!("{l:?} is not a channel label"));
            }
        }
    }
    let outlier = cx.num(t, "outlier_threshold_ps", p, Optional, Range::Positive).unwrap_or(5.0);
    let max = cx.int(t, "max_per_kind", p, Optional, 0).unwrap_or(6) as usize;
    let thr = cx.num(t, "residual_threshold_ps", p, Optional, Range::Positive).unwrap_or(50.0);
    let dcm = catalog_device(cx, t, "dcm", p);
    let dcf = catalog_device(cx, t, "dcf", p);
    if let (Some(r), Some(m), Some(f)) = (&refs, &dcm, &dcf) {
        for (name, d) in [("dcm", m), ("dcf", f)] {
            if d.rows_ps.len() != r.len() {
                cx.err(
                    format!("catalog.{name}.rows_ps"),
                    format!("has {} rows but {} reference channels are listed", d.rows_ps.len(), r.len()),
                );
            }
        }
    }
    Some(CatalogConfig {
        reference_channels: refs?,
        outlier_threshold_ps: outlier,
        max_per_kind: max,
        residual_threshold_ps: thr,
        dcm: dcm?,
        dcf: dcf?,
    })
}

fn arm(cx: &mut Ctx, link: &Table, key: &str) -> Option<ArmConfig> {
    let p = join("link", key);
    let t = cx.table(link, key, "link", Required)?;
    cx.known(t, &p, &["source_share_db", "pam_db", "snspd_db", "wdm_db", "segments", "devices"]);
    let src = cx.num(t, "source_share_db", &p, Required, Range::NonNegative);
    let pam = cx.num(t, "pam_db", &p, Required, Range::NonNegative);
    let snspd = cx.num(t, "snspd_db", &p, Required, Range::NonNegative);
    let wdm = cx.num(t, "wdm_db", &p, Optional, Range::NonNegative).unwrap_or(0.0);
    let mut segments = Some(Vec::new());
    for (sp, s) in cx.tables(t, "segments", &p) {
        cx.known(
            s,
            &sp,
            &["length_km", "attenuation_db_per_km", "d0_ps_per_nm_km", "s0_ps_per_nm2_km", "lambda0_nm", "connector_loss_db"],
        );
        let len = cx.num(s, "length_km", &sp, Required, Range::NonNegative);
        let att = cx.num(s, "attenuation_db_per_km", &sp, Optional, Range::Positive).unwrap_or(0.165);
        let d0 = cx.num(s, "d0_ps_per_nm_km", &sp, Optional, Range::Any).unwrap_or(17.0);
        let s0 = cx.num(s, "s0_ps_per_nm2_km", &sp, Optional, Range::Any).unwrap_or(0.06);
        let l0 = cx.num(s, "lambda0_nm", &sp, Optional, Range::Positive).unwrap_or(1550.0);
        let con = cx.num(s, "connector_loss_db", &sp, Optional, Range::NonNegative).unwrap_or(0.0);
        match (len, segments.as_mut()) {
            (Some(length_km), Some(v)) => v.push(SegmentConfig {
                length_km,
                attenuation_db_per_km: att,
                d0_ps_per_nm_km: d0,
                s0_ps_per_nm2_km: s0,
                lambda0_nm: l0,
                connector_loss_db: con,
            }),
            _ => segments = None,
        }
    }
    let mut devices = Some(Vec::new());
    for (dp, d) in cx.tables(t, "devices", &p) {
        cx.known(d, &dp, &["kind", "units", "insertion_loss_db"]);
        let kind = cx.string(d, "kind", &dp, Required, &["DCM", "DCF"]);
        let units = cx.num(d, "units", &dp, Optional, Range::Positive).unwrap_or(1.0);
        let il = cx.num(d, "insertion_loss_db", &dp, Required, Range::NonNegative);
        match (kind, il, devices.as_mut()) {
            (Some(kind), Some(insertion_loss_db), Some(v)) => v.push(DeviceConfig { kind, units, insertion_loss_db }),
            _ => devices = None,
        }
    }
    Some(ArmConfig {
        source_share_db: src?,
        pam_db: pam?,
        snspd_db: snspd?,
        wdm_db: wdm,
        segments: segments?,
        devices: devices?,
    })
}

fn link(cx: &mut Ctx, root: &Table) -> Option<LinkConfig> {
    let t = cx.table(root, "link", "", Required)?;
    cx.known(t, "link", &["group_delay_ps_per_km", "arm_a", "arm_b"]);
    let gd = cx.num(t, "group_delay_ps_per_km", "link", Optional, Range::NonNegative).unwrap_or(4.9e6);
    let a = arm(cx, t, "arm_a");
    let b = arm(cx, t, "arm_b");
    Some(LinkConfig { group_delay_ps_per_km: gd, arm_a: a?, arm_b: b? })
}

fn detection(cx: &mut Ctx, root: &Table) -> Option<DetectionConfig> {
    let p = "detection";
    let t = cx.table(root, p, "", Required)?;
    cx.known(t, p, &["jitter_fwhm_ps", "dark_rate_a_cps", "dark_rate_b_cps", "e_pol", "gate_fwhm_multiple"]);
    let j = cx.num(t, "jitter_fwhm_ps", p, Required, Range::Positive);
    let da = cx.num(t, "dark_rate_a_cps", p, Required, Range::NonNegative);
    let db = cx.num(t, "dark_rate_b_cps", p, Required, Range::NonNegative);
    let e = cx.num(t, "e_pol", p, Required, Range::Fraction);
    let g = cx.num(t, "gate_fwhm_multiple", p, Optional, Range::Positive).unwrap_or(1.0);
    Some(DetectionConfig { jitter_fwhm_ps: j?, dark_rate_a_cps: da?, dark_rate_b_cps: db?, e_pol: e?, gate_fwhm_multiple: g })
}

fn analysis(cx: &mut Ctx, root: &Table) -> Option<AnalysisConfig> {
    let p = "analysis";
    let t = cx.table(root, p, "", Required)?;
    cx.known(t, p, &["mode", "fe", "security_exponent", "acquisition_time_s", "block_mode", "nu_xi_order", "measured"]);
    let mode = cx.string(t, "mode", p, Optional, &["finite", "asymptotic"]).unwrap_or_else(|| "finite".into());
    let fe = cx.num(t, "fe", p, Optional, Range::Positive).unwrap_or(1.09);
    if fe < 1.0 {
        cx.err("analysis.fe", "error-correction inefficiency must be >= 1");
    }
    let s = cx.int(t, "security_exponent", p, Optional, 1).unwrap_or(9);
    if s > 300 {
        cx.err("analysis.security_exponent", "must be at most 300");
    }
    let acq = cx.num(t, "acquisition_time_s", p, Required, Range::Positive);
    let block = cx.string(t, "block_mode", p, Optional, &["pooled", "per_channel", "auto"]).unwrap_or_else(|| "pooled".into());
    let order = cx.string(t, "nu_xi_order", p, Optional, &["swapped", "printed"]).unwrap_or_else(|| "swapped".into());
    let measured = cx.table(t, "measured", p, Optional).and_then(|m| {
        let mp = "analysis.measured";
        cx.known(m, mp, &["raw_key_bits", "qber"]);
        let raw = cx.int(m, "raw_key_bits", mp, Required, 0);
        let q = cx.num(m, "qber", mp, Required, Range::Fraction);
        Some(MeasuredConfig { raw_key_bits: raw?, qber: q? })
    });
    Some(AnalysisConfig {
        mode,
        fe,
        security_exponent: s.min(300) as u32,
        acquisition_time_s: acq?,
        block_mode: block,
        nu_xi_order: order,
        measured,
    })
}

fn simulation(cx: &mut Ctx, root: &Table) -> SimulationConfig {
    let p = "simulation";
    let empty = Table::new();
    let t = cx.table(root, p, "", Optional).unwrap_or(&empty);
    cx.known(t, p, &["duration_s", "seed", "bin_width_ps", "span_ps", "loss_offset_db"]);
    let bin = cx.num(t, "bin_width_ps", p, Optional, Range::Positive).unwrap_or(10.0);
    let span = cx.num(t, "span_ps", p, Optional, Range::Positive).unwrap_or(4000.0);
    if span < bin {
        cx.err("simulation.span_ps", "must be at least one bin wide");
    }
    SimulationConfig {
        duration_s: cx.num(t, "duration_s", p, Optional, Range::Positive).unwrap_or(1.0),
        seed: cx.int(t, "seed", p, Optional, 0).unwrap_or(1),
        bin_width_ps: bin,
        span_ps: span,
        loss_offset_db: cx.num(t, "loss_offset_db", p, Optional, Range::Any).unwrap_or(0.0),
    }
}

fn optimizer(cx: &mut Ctx, root: &Table) -> OptimizerConfig {
    let p = "optimizer";
    let empty = Table::new();
    let t = cx.table(root, p, "", Optional).unwrap_or(&empty);
    cx.known(t, p, &["rate_min_pairs_per_s", "rate_max_pairs_per_s", "rate_points", "gate_widths_ps", "delta_t_ps", "objective"]);
    let lo = cx.num(t, "rate_min_pairs_per_s", p, Optional, Range::Positive).unwrap_or(1e7);
    let hi = cx.num(t, "rate_max_pairs_per_s", p, Optional, Range::Positive).unwrap_or(1e10);
    if hi < lo {
        cx.err("optimizer.rate_max_pairs_per_s", "must not be below rate_min_pairs_per_s");
    }
    let widths = cx
        .num_list(t, "gate_widths_ps", p, Optional, Range::Positive)
        .unwrap_or_else(|| vec![40.0, 65.0, 80.0, 100.0, 130.0, 160.0]);
    if widths.is_empty() {
        cx.err("optimizer.gate_widths_ps", "must not be empty");
    }
    OptimizerConfig {
        rate_min_pairs_per_s: lo,
        rate_max_pairs_per_s: hi,
        rate_points: cx.int(t, "rate_points", p, Optional, 1).unwrap_or(25) as usize,
        gate_widths_ps: widths,
        delta_t_ps: cx.num(t, "delta_t_ps", p, Optional, Range::NonNegative).unwrap_or(0.0),
        objective: cx.string(t, "objective", p, Optional, &["asymptotic", "finite"]).unwrap_or_else(|| "asymptotic".into()),
    }
}

fn bell(cx: &mut Ctx, root: &Table, e_pol: Option<f64>) -> BellConfig {
    let p = "bell";
    let empty = Table::new();
    let t = cx.table(root, p, "", Optional).unwrap_or(&empty);
    cx.known(t, p, &["visibility", "pairs_per_setting"]);
    let v = cx.num(t, "visibility", p, Optional, Range::Fraction);
    BellConfig {
        visibility: v.unwrap_or_else(|| 1.0 - 2.0 * e_pol.unwrap_or(0.0)),
        pairs_per_setting: cx.int(t, "pairs_per_setting", p, Optional, 1).unwrap_or(100_000),
    }
}

fn cross_checks(cx: &mut Ctx, c: &ScenarioConfig) {
    for (arm, a) in [("arm_a", &c.link.arm_a), ("arm_b", &c.link.arm_b)] {
        for (i, d) in a.devices.iter().enumerate() {
            if d.kind.parse::<DeviceKind>().is_err() {
                cx.err(format!("link.{arm}.devices[{i}].kind"), "unknown device kind");
            }
        }
    }
    if c.analysis.nu_xi_order.parse::<NuXiOrder>().is_err() {
        cx.err("analysis.nu_xi_order", "unknown ordering");
    }
    if c.simulation.seed > i64::MAX as u64 {
        cx.err("simulation.seed", "seeds above 2^63 - 1 cannot be written back as TOML integers");
    }
}

pub(super) fn parse(text: &str) -> Result<ScenarioConfig, Vec<ConfigIssue>> {
    let root: Table = match text.parse::<Table>() {
        Ok(t) => t,
        Err(e) => {
            let at = e.span().map(|s| line_col(text, s.start)).unwrap_or_default();
            return Err(vec![ConfigIssue { path: at, message: e.message().to_string() }]);
        }
    };
    let mut cx = Ctx { issues: Vec::new() };
    cx.known(
        &root,
        "",
        &["name", "source", "channels", "catalog", "link", "detection", "analysis", "simulation", "optimizer", "bell"],
    );
    let name = cx.string(&root, "name", "", Optional, &[]).unwrap_or_else(|| "scenario".into());
    let src = source(&mut cx, &root);
    let ch = channels(&mut cx, &root);
    let cat = catalog(&mut cx, &root);
    let ln = link(&mut cx, &root);
    let det = detection(&mut cx, &root);
    let an = analysis(&mut cx, &root);
    let sim = simulation(&mut cx, &root);
    let opt = optimizer(&mut cx, &root);
    let bl = bell(&mut cx, &root, det.as_ref().map(|d| d.e_pol));
    let config = match (src, ch, cat, ln, det, an) {
        (Some(source), Some(channels), Some(catalog), Some(link), Some(detection), Some(analysis)) if cx.issues.is_empty() => {
            ScenarioConfig { name, source, channels, catalog, link, detection, analysis, simulation: sim, optimizer: opt, bell: bl }
        }
        _ => {
            if cx.issues.is_empty() {
                cx.err("", "configuration incomplete");
            }
            return Err(cx.issues);
        }
    };
    cross_checks(&mut cx, &config);
    if cx.issues.is_empty() {
        Ok(config)
    } else {
        Err(cx.issues)
    }
}

fn line_col(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    format!("line {line}, column {col}")
}
