//! A configured link end to end: calibrated source, channel plan, fitted
//! compensation catalog, and the analytic rate / QBER / key-rate chain.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::detection::{
    calibrate_e_pol, coincidence_rates, dark_coincidence_rate, predict_qber, sifted_bits, DetectorSpec, QberBreakdown,
};
use crate::link::{
    fit_device_coefficients, link_loss_budget, timing_profile, ArmPlan, CatalogEntry, ChannelDispersion, DeviceFit,
    DeviceKind, EndpointLosses, FiberSegment, LinkPlan, LossBudget, TimingBudget,
};
use crate::presets::source_from_config;
use crate::security::{asymptotic_key, finite_key, FiniteKey, FiniteKeyProblem, KeyRateInputs, NuXiOrder};
use crate::source::{channel_pair_rate, channelize, spdc_spectrum, ChannelPlan, SourceSpec};
use crate::units::db_to_transmittance;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub source: SourceSpec,
    pub plan: ChannelPlan,
    pub dcm_fit: DeviceFit,
    pub dcf_fit: DeviceFit,
    pub link: LinkPlan,
}

fn arm_plan(cfg: &crate::config::ArmConfig, dcm: &DeviceFit, dcf: &DeviceFit) -> Result<ArmPlan> {
    let segments = cfg
        .segments
        .iter()
        .map(|s| FiberSegment {
            length_km: s.length_km,
            attenuation_db_per_km: s.attenuation_db_per_km,
            d0_ps_per_nm_km: s.d0_ps_per_nm_km,
            s0_ps_per_nm2_km: s.s0_ps_per_nm2_km,
            lambda0_nm: s.lambda0_nm,
            connector_loss_db: s.connector_loss_db,
        })
        .collect();
    let devices = cfg
        .devices
        .iter()
        .map(|d| {
            let unit = match d.kind.parse::<DeviceKind>()? {
                DeviceKind::Dcm => &dcm.device,
                DeviceKind::Dcf => &dcf.device,
            };
            Ok(unit.scaled(d.units, d.insertion_loss_db))
        })
        .collect::<Result<Vec<_>>>()?;
    let arm = ArmPlan {
        segments,
        devices,
        endpoint_losses: EndpointLosses {
            source_share_db: cfg.source_share_db,
            pam_db: cfg.pam_db,
            snspd_db: cfg.snspd_db,
            wdm_db: cfg.wdm_db,
        },
    };
    arm.validate()?;
    Ok(arm)
}

/// Plan from explicit labels, or carved out of the computed spectrum.
pub fn channel_plan(cfg: &ScenarioConfig, source: &SourceSpec) -> Result<ChannelPlan> {
    let ch = &cfg.channels;
    if !ch.pairs.is_empty() {
        let labels: Vec<&str> = ch.pairs.iter().map(String::as_str).collect();
        return ChannelPlan::from_labels(source.pump_wavelength_nm, ch.grid_spacing_ghz, ch.channel_fwhm_nm, &labels);
    }
    let spectrum = spdc_spectrum(
        source.pump_wavelength_nm,
        source.waveguide.temperature_c,
        &source.waveguide,
        &wavelength_grid(ch.wl_min_nm, ch.wl_max_nm, ch.wl_step_nm),
    )?;
    channelize(&spectrum, source.pump_wavelength_nm, ch.grid_spacing_ghz, ch.channel_fwhm_nm, ch.threshold)
}

pub fn wavelength_grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step).floor() as usize;
    (0..=n).map(|i| lo + step * i as f64).collect()
}

impl Scenario {
    pub fn from_config(config: &ScenarioConfig) -> Result<Self> {
        let source = source_from_config(config)?;
        let plan = channel_plan(config, &source)?;
        let cat = &config.catalog;
        let refs: Vec<&str> = cat.reference_channels.iter().map(String::as_str).collect();
        let reference =
            ChannelPlan::from_labels(source.pump_wavelength_nm, config.channels.grid_spacing_ghz, 1.0, &refs)?;
        // Rows follow the listed order; the plan is sorted by frequency.
        let wl: Vec<f64> = refs
            .iter()
            .map(|r| {
                let p = reference.pairs.iter().find(|p| p.label.starts_with(&r[..3])).expect("reference resolved");
                p.signal_nm()
            })
            .collect();
        let fwhm = config.channels.channel_fwhm_nm;
        let fit = |kind, d: &crate::config::CatalogDeviceConfig| {
            fit_device_coefficients(kind, &wl, &d.rows_ps, fwhm, d.units, d.insertion_loss_db, Some(cat.outlier_threshold_ps))
        };
        let dcm_fit = fit(DeviceKind::Dcm, &cat.dcm)?;
        let dcf_fit = fit(DeviceKind::Dcf, &cat.dcf)?;
        let link = LinkPlan {
            arm_a: arm_plan(&config.link.arm_a, &dcm_fit, &dcf_fit)?,
            arm_b: arm_plan(&config.link.arm_b, &dcm_fit, &dcf_fit)?,
        };
        link.validate()?;
        Ok(Self { config: config.clone(), source, plan, dcm_fit, dcf_fit, link })
    }

    /// Restricts the plan to the named channels.
    pub fn with_channels(mut self, labels: &[String]) -> Result<Self> {
        if !labels.is_empty() {
            self.plan = self.plan.select(labels)?;
        }
        Ok(self)
    }

    /// One catalog unit of each kind, as the planner sees them.
    pub fn catalog(&self) -> Vec<CatalogEntry> {
        let max = self.config.catalog.max_per_kind;
        vec![
            CatalogEntry { device: self.dcm_fit.device.clone(), max_count: max },
            CatalogEntry { device: self.dcf_fit.device.clone(), max_count: max },
        ]
    }

    /// The link with every compensation device removed.
    pub fn bare_link(&self) -> LinkPlan {
        let mut l = self.link.clone();
        l.arm_a.devices.clear();
        l.arm_b.devices.clear();
        l
    }

    pub fn loss_budget(&self) -> LossBudget {
        link_loss_budget(&self.link.arm_a, &self.link.arm_b)
    }

    pub fn timing(&self) -> Result<Vec<(ChannelDispersion, TimingBudget)>> {
        timing_profile(&self.plan, &self.link, self.config.detection.jitter_fwhm_ps)
    }

    pub fn pair_rate(&self) -> f64 {
        channel_pair_rate(&self.source, self.plan.channel_fwhm_nm)
    }

    /// Detectors of arm A and B; efficiency is the SNSPD share of the budget.
    pub fn detectors(&self) -> (DetectorSpec, DetectorSpec) {
        let d = &self.config.detection;
        let spec = |arm: &ArmPlan, dark| DetectorSpec {
            efficiency: db_to_transmittance(arm.endpoint_losses.snspd_db),
            dark_rate_cps: dark,
            jitter_fwhm_ps: d.jitter_fwhm_ps,
        };
        (spec(&self.link.arm_a, d.dark_rate_a_cps), spec(&self.link.arm_b, d.dark_rate_b_cps))
    }

    /// Transmittance of each arm up to (not including) the detector.
    pub fn transmittances(&self) -> (f64, f64) {
        (
            db_to_transmittance(self.link.arm_a.transmission_loss_db()),
            db_to_transmittance(self.link.arm_b.transmission_loss_db()),
        )
    }

    /// Per-channel analytic rates at the configured operating point.
    pub fn channel_rates(&self) -> Result<Vec<ChannelRates>> {
        let g = self.config.detection.gate_fwhm_multiple;
        self.timing()?
            .iter()
            .map(|(d, t)| channel_rates_at(self, &d.label, self.pair_rate(), t.delta_t_ps, g * t.delta_t_ps))
            .collect()
    }

    pub fn analytic(&self) -> Result<AnalyticSummary> {
        let channels = self.channel_rates()?;
        let t = self.config.analysis.acquisition_time_s;
        let (tr, ac, dk) = channels
            .iter()
            .fold((0.0, 0.0, 0.0), |s, c| (s.0 + c.true_rate, s.1 + c.accidental_rate, s.2 + c.dark_rate));
        let qber = predict_qber(tr, ac, dk, self.config.detection.e_pol)?;
        let total = tr + ac + dk;
        Ok(AnalyticSummary {
            channels,
            coincidence_rate: total,
            raw_bits: total * t,
            sifted_bits: 0.5 * total * t,
            qber,
        })
    }

    /// `e_pol` making the pooled predicted QBER equal `target`.
    pub fn calibrated_e_pol(&self, target: f64) -> Result<f64> {
        let rates: Vec<_> =
            self.channel_rates()?.iter().map(|c| (c.true_rate, c.accidental_rate, c.dark_rate)).collect();
        calibrate_e_pol(&rates, target)
    }

    pub fn key_report(&self, mode: KeyMode) -> Result<KeyRateReport> {
        key_report(self, mode)
    }
}

/// Rates of one channel at pair rate `pair_rate`, coincidence width
/// `delta_t_ps` and gate `gate_ps`.
pub fn channel_rates_at(s: &Scenario, label: &str, pair_rate: f64, delta_t_ps: f64, gate_ps: f64) -> Result<ChannelRates> {
    let (da, db) = s.detectors();
    let (ta, tb) = s.transmittances();
    let sa = pair_rate * ta * da.efficiency;
    let sb = pair_rate * tb * db.efficiency;
    let c = coincidence_rates(pair_rate, ta, tb, da.efficiency, db.efficiency, sa, sb, gate_ps, delta_t_ps)?;
    let dark = dark_coincidence_rate(da.dark_rate_cps, db.dark_rate_cps, sa, sb, gate_ps);
    let qber = predict_qber(c.true_rate, c.accidental_rate, dark, s.config.detection.e_pol)?;
    Ok(ChannelRates {
        label: label.to_string(),
        delta_t_ps,
        gate_ps,
        singles_a: sa + da.dark_rate_cps,
        singles_b: sb + db.dark_rate_cps,
        true_rate: c.true_rate,
        accidental_rate: c.accidental_rate,
        dark_rate: dark,
        total_rate: c.true_rate + c.accidental_rate + dark,
        qber,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRates {
    pub label: String,
    pub delta_t_ps: f64,
    pub gate_ps: f64,
    /// Detected singles including dark counts, per arm.
    pub singles_a: f64,
    pub singles_b: f64,
    pub true_rate: f64,
    pub accidental_rate: f64,
    pub dark_rate: f64,
    pub total_rate: f64,
    pub qber: QberBreakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalyticSummary {
    pub channels: Vec<ChannelRates>,
    /// Summed over channels, per second.
    pub coincidence_rate: f64,
    /// Over the configured acquisition time.
    pub raw_bits: f64,
    pub sifted_bits: f64,
    /// Pooled over channels.
    pub qber: QberBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyMode {
    Finite,
    Asymptotic,
}

impl std::str::FromStr for KeyMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "finite" => Ok(KeyMode::Finite),
            "asymptotic" => Ok(KeyMode::Asymptotic),
            _ => Err(Error::domain(format!("unknown key mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockMode {
    /// One finite-key block over all channels.
    Pooled,
    /// One block per channel.
    PerChannel,
    /// Per channel, falling back to pooled when that leaves no key.
    Auto,
}

impl std::str::FromStr for BlockMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pooled" => Ok(BlockMode::Pooled),
            "per_channel" => Ok(BlockMode::PerChannel),
            "auto" => Ok(BlockMode::Auto),
            _ => Err(Error::domain(format!("unknown block mode {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelKey {
    pub label: String,
    pub raw_bits: u64,
    pub sifted_bits: u64,
    pub qber: f64,
    pub asymptotic_bits: f64,
    /// Finite-key bits when this channel is its own block.
    pub finite_bits: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyAggregate {
    pub raw: u64,
    pub sifted: u64,
    pub qber: f64,
    /// Under the report's mode.
    pub secure: f64,
    pub skr_bits_per_s: f64,
    pub finite_secure: u64,
    pub finite_skr_bits_per_s: f64,
    pub asymptotic_secure: f64,
    pub asymptotic_skr_bits_per_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    pub name: String,
    pub mode: KeyMode,
    /// Block mode actually used for the finite key.
    pub block_mode: BlockMode,
    /// Whether raw key and QBER come from recorded data or the model.
    pub measured: bool,
    pub loss_db: f64,
    pub acquisition_time_s: f64,
    pub per_channel: Vec<ChannelKey>,
    pub aggregate: KeyAggregate,
    /// Model QBER decomposition, percentage points.
    pub e_pol_pp: f64,
    pub e_acc_pp: f64,
    pub e_dark_pp: f64,
    pub total_pp: f64,
}

/// Splits `total` into `n` blocks differing by at most one, larger first.
fn split_even(total: u64, n: usize) -> Vec<u64> {
    let (q, r) = (total / n as u64, (total % n as u64) as usize);
    (0..n).map(|i| q + u64::from(i < r)).collect()
}

struct FiniteSolver {
    s: u32,
    fe: f64,
    order: NuXiOrder,
    cache: HashMap<(u64, u64), FiniteKey>,
}

impl FiniteSolver {
    fn solve(&mut self, m: u64, delta: f64) -> Result<u64> {
        let key = (m, delta.to_bits());
        if let Some(k) = self.cache.get(&key) {
            return Ok(k.secure_bits);
        }
        let p = FiniteKeyProblem { m, delta, s: self.s, leak_factor: self.fe, order: self.order };
        let k = finite_key(&p)?;
        let bits = k.secure_bits;
        self.cache.insert(key, k);
        Ok(bits)
    }
}

fn key_report(s: &Scenario, mode: KeyMode) -> Result<KeyRateReport> {
    let a = &s.config.analysis;
    let t = a.acquisition_time_s;
    let summary = s.analytic()?;
    let labels: Vec<String> = s.plan.pairs.iter().map(|p| p.label.clone()).collect();
    if labels.is_empty() {
        return Err(Error::domain("the channel plan is empty"));
    }
    // (raw, qber) per channel.
    let measured = a.measured.as_ref();
    let rows: Vec<(u64, f64)> = match measured {
        Some(m) => split_even(m.raw_key_bits, labels.len()).into_iter().map(|r| (r, m.qber)).collect(),
        None => summary.channels.iter().map(|c| ((c.total_rate * t).round() as u64, c.qber.total())).collect(),
    };
    let raw: u64 = rows.iter().map(|r| r.0).sum();
    let sifted: u64 = match measured {
        Some(m) => sifted_bits(m.raw_key_bits),
        None => rows.iter().map(|r| sifted_bits(r.0)).sum(),
    };
    let qber = match measured {
        Some(m) => m.qber,
        None => summary.qber.total(),
    };
    let mut solver = FiniteSolver { s: a.security_exponent, fe: a.fe, order: a.nu_xi_order.parse()?, cache: HashMap::new() };
    let block_cfg: BlockMode = a.block_mode.parse()?;
    // Sifted blocks follow the pooled sifted count so the per-channel rows
    // add up to the aggregate.
    let sifted_rows = split_even(sifted, labels.len());
    let mut per_channel = Vec::with_capacity(labels.len());
    let mut per_channel_total = 0u64;
    let want_blocks = block_cfg != BlockMode::Pooled;
    for ((label, (raw_i, q)), &m) in labels.iter().zip(&rows).zip(&sifted_rows) {
        let m = if measured.is_some() { m } else { sifted_bits(*raw_i) };
        let asym = asymptotic_key(&KeyRateInputs::pooled(m as f64, *q, a.fe, t))?.secure_bits;
        let finite_bits = if want_blocks { Some(solver.solve(m, *q)?) } else { None };
        per_channel_total += finite_bits.unwrap_or(0);
        per_channel.push(ChannelKey {
            label: label.clone(),
            raw_bits: *raw_i,
            sifted_bits: m,
            qber: *q,
            asymptotic_bits: asym,
            finite_bits,
        });
    }
    let (block_mode, finite_secure) = match block_cfg {
        BlockMode::PerChannel => (BlockMode::PerChannel, per_channel_total),
        BlockMode::Auto if per_channel_total > 0 => (BlockMode::PerChannel, per_channel_total),
        _ => (BlockMode::Pooled, solver.solve(sifted, qber)?),
    };
    let asym = asymptotic_key(&KeyRateInputs::pooled(sifted as f64, qber, a.fe, t))?;
    let secure = match mode {
        KeyMode::Finite => finite_secure as f64,
        KeyMode::Asymptotic => asym.secure_bits,
    };
    Ok(KeyRateReport {
        name: s.config.name.clone(),
        mode,
        block_mode,
        measured: measured.is_some(),
        loss_db: s.loss_budget().total_db,
        acquisition_time_s: t,
        per_channel,
        aggregate: KeyAggregate {
            raw,
            sifted,
            qber,
            secure,
            skr_bits_per_s: secure / t,
            finite_secure,
            finite_skr_bits_per_s: finite_secure as f64 / t,
            asymptotic_secure: asym.secure_bits,
            asymptotic_skr_bits_per_s: asym.rate_bits_per_s,
        },
        e_pol_pp: summary.qber.e_pol_pp,
        e_acc_pp: summary.qber.e_acc_pp,
        e_dark_pp: summary.qber.e_dark_pp,
        total_pp: summary.qber.total_pp,
    })
}

fn fmt_rate(v: f64) -> String {
    if v != 0.0 && v.abs() < 0.01 {
        format!("{v:.2e}")
    } else {
        format!("{v:.2}")
    }
}

type Cell = dyn Fn(&KeyRateReport) -> String;

/// Key-analysis table, one column per report.
pub fn key_table_csv(columns: &[(String, KeyRateReport)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let fmt = |e: csv::Error| Error::Format(e.to_string());
    let mut header = vec!["Item".to_string()];
    header.extend(columns.iter().map(|c| c.0.clone()));
    w.write_record(&header).map_err(fmt)?;
    let rows: [(&str, &Cell); 9] = [
        ("Loss (dB)", &|r| format!("{}", r.loss_db.round())),
        ("Data acquisition time (min)", &|r| format!("{:.1}", r.acquisition_time_s / 60.0)),
        ("QBER (%)", &|r| format!("{:.2}", 100.0 * r.aggregate.qber)),
        ("Raw key (bit)", &|r| r.aggregate.raw.to_string()),
        ("Sifted key (bit)", &|r| r.aggregate.sifted.to_string()),
        ("Secure key (bit)", &|r| r.aggregate.finite_secure.to_string()),
        ("Secure key rate (bit/s)", &|r| fmt_rate(r.aggregate.finite_skr_bits_per_s)),
        ("Asymptotic key (bit)", &|r| format!("{:.0}", r.aggregate.asymptotic_secure)),
        ("Asymptotic key rate (bit/s)", &|r| fmt_rate(r.aggregate.asymptotic_skr_bits_per_s)),
    ];
    for (item, f) in rows {
        let mut rec = vec![item.to_string()];
        rec.extend(columns.iter().map(|c| f(&c.1)));
        w.write_record(&rec).map_err(fmt)?;
    }
    String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?).map_err(|e| Error::Format(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets::preset;

    fn scenario(name: &str) -> Scenario {
        Scenario::from_config(&preset(name).unwrap()).unwrap()
    }

    #[test]
    fn blocks_split_evenly() {
        assert_eq!(split_even(676_519, 9), [75169, 75169, 75169, 75169, 75169, 75169, 75169, 75168, 75168]);
        assert_eq!(split_even(5, 1), [5]);
    }

    #[test]
    fn loss_totals() {
        for (name, total) in [("201km", 62.0), ("301km", 84.0), ("404km", 110.0)] {
            let b = scenario(name).loss_budget();
            assert!((b.total_db - total).abs() < 1e-9, "{name}: {}", b.total_db);
        }
    }

    #[test]
    fn dcf_outlier_is_dropped_from_the_fit() {
        let s = scenario("301km");
        assert_eq!(s.dcf_fit.outliers, vec![0]);
        assert!(s.dcm_fit.outliers.is_empty());
    }

    #[test]
    fn asymptotic_never_below_finite() {
        for name in ["201km", "301km", "404km"] {
            let r = scenario(name).key_report(KeyMode::Finite).unwrap();
            assert!(r.aggregate.finite_secure as f64 <= r.aggregate.asymptotic_secure, "{name}");
        }
    }

    #[test]
    fn model_report_without_measured_data() {
        let mut cfg = preset("201km").unwrap();
        cfg.analysis.measured = None;
        let s = Scenario::from_config(&cfg).unwrap();
        let r = s.key_report(KeyMode::Asymptotic).unwrap();
        assert!(!r.measured);
        assert_eq!(r.per_channel.len(), 9);
        let sum: u64 = r.per_channel.iter().map(|c| c.sifted_bits).sum();
        assert_eq!(sum, r.aggregate.sifted);
        assert!((r.aggregate.qber * 100.0 - r.total_pp).abs() < 1e-9);
    }

    #[test]
    fn auto_channelization_covers_the_band() {
        let mut cfg = preset("201km").unwrap();
        cfg.channels.pairs.clear();
        let s = Scenario::from_config(&cfg).unwrap();
        assert!(s.plan.pairs.len() >= 9, "{}", s.plan.pairs.len());
        s.plan.check().unwrap();
    }
}
