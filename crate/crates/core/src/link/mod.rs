//! Fiber arms: loss budgets, chromatic dispersion and its compensation,
//! timing uncertainty.
//!
//! Arm A carries the short-wavelength (signal) photon and, by convention,
//! all compensation devices; arm B carries the idler.

mod fit;
mod plan;

pub use fit::{fit_device_coefficients, DeviceFit};
pub use plan::{plan_compensation, CatalogEntry, CompensationPlan};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::source::{ChannelPair, ChannelPlan};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiberSegment {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    /// Dispersion at `lambda0_nm`, ps/nm/km.
    pub d0_ps_per_nm_km: f64,
    /// Dispersion slope, ps/nm^2/km.
    pub s0_ps_per_nm2_km: f64,
    pub lambda0_nm: f64,
    /// Lumped adapter/splice loss of the segment.
    pub connector_loss_db: f64,
}

impl FiberSegment {
    /// Ultra-low-loss fiber with the standard dispersion parameters.
    pub fn ullf(length_km: f64) -> Self {
        Self {
            length_km,
            attenuation_db_per_km: 0.165,
            d0_ps_per_nm_km: 17.0,
            s0_ps_per_nm2_km: 0.06,
            lambda0_nm: 1550.0,
            connector_loss_db: 0.0,
        }
    }

    pub fn loss_db(&self) -> f64 {
        self.attenuation_db_per_km * self.length_km + self.connector_loss_db
    }

    pub fn dispersion(&self, wavelength_nm: f64) -> f64 {
        self.length_km * (self.d0_ps_per_nm_km + self.s0_ps_per_nm2_km * (wavelength_nm - self.lambda0_nm))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DeviceKind {
    Dcm,
    Dcf,
}

impl DeviceKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DeviceKind::Dcm => "DCM",
            DeviceKind::Dcf => "DCF",
        }
    }
}

impl std::str::FromStr for DeviceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DCM" => Ok(DeviceKind::Dcm),
            "DCF" => Ok(DeviceKind::Dcf),
            _ => Err(Error::domain(format!("unknown device kind {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompensationDevice {
    pub kind: DeviceKind,
    /// Total dispersion at `lambda0_nm`, ps/nm (negative for a compensator).
    pub d0_ps_per_nm: f64,
    /// Total dispersion slope, ps/nm^2.
    pub s0_ps_per_nm2: f64,
    pub lambda0_nm: f64,
    pub insertion_loss_db: f64,
}

impl CompensationDevice {
    pub fn dispersion(&self, wavelength_nm: f64) -> f64 {
        self.d0_ps_per_nm + self.s0_ps_per_nm2 * (wavelength_nm - self.lambda0_nm)
    }

    /// The same device with its dispersion scaled by `units`.
    pub fn scaled(&self, units: f64, insertion_loss_db: f64) -> Self {
        Self {
            d0_ps_per_nm: self.d0_ps_per_nm * units,
            s0_ps_per_nm2: self.s0_ps_per_nm2 * units,
            insertion_loss_db,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EndpointLosses {
    pub source_share_db: f64,
    pub pam_db: f64,
    pub snspd_db: f64,
    pub wdm_db: f64,
}

impl EndpointLosses {
    pub fn total_db(&self) -> f64 {
        self.source_share_db + self.pam_db + self.snspd_db + self.wdm_db
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ArmPlan {
    pub segments: Vec<FiberSegment>,
    pub devices: Vec<CompensationDevice>,
    pub endpoint_losses: EndpointLosses,
}

impl ArmPlan {
    pub fn validate(&self) -> Result<()> {
        for s in &self.segments {
            if !(s.length_km >= 0.0) {
                return Err(Error::domain("fiber length must be non-negative"));
            }
            if !(s.attenuation_db_per_km > 0.0) {
                return Err(Error::domain("fiber attenuation must be positive"));
            }
            if !(s.connector_loss_db >= 0.0) {
                return Err(Error::domain("connector loss must be non-negative"));
            }
        }
        for d in &self.devices {
            if !(d.insertion_loss_db >= 0.0) {
                return Err(Error::domain("device insertion loss must be non-negative"));
            }
        }
        let e = &self.endpoint_losses;
        if [e.source_share_db, e.pam_db, e.snspd_db, e.wdm_db].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::domain("endpoint losses must be non-negative"));
        }
        Ok(())
    }

    pub fn length_km(&self) -> f64 {
        self.segments.iter().map(|s| s.length_km).sum()
    }

    pub fn fiber_loss_db(&self) -> f64 {
        self.segments.iter().map(FiberSegment::loss_db).sum()
    }

    pub fn device_loss_db(&self) -> f64 {
        self.devices.iter().map(|d| d.insertion_loss_db).sum()
    }

    pub fn total_loss_db(&self) -> f64 {
        self.fiber_loss_db() + self.device_loss_db() + self.endpoint_losses.total_db()
    }

    /// Loss seen by a photon before it reaches the detector, i.e. everything
    /// except the detector's own share.
    pub fn transmission_loss_db(&self) -> f64 {
        self.total_loss_db() - self.endpoint_losses.snspd_db
    }

    pub fn fiber_dispersion(&self, wavelength_nm: f64) -> f64 {
        self.segments.iter().map(|s| s.dispersion(wavelength_nm)).sum()
    }

    pub fn device_dispersion(&self, wavelength_nm: f64) -> f64 {
        self.devices.iter().map(|d| d.dispersion(wavelength_nm)).sum()
    }

    pub fn count(&self, kind: DeviceKind) -> usize {
        self.devices.iter().filter(|d| d.kind == kind).count()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinkPlan {
    pub arm_a: ArmPlan,
    pub arm_b: ArmPlan,
}

impl LinkPlan {
    pub fn validate(&self) -> Result<()> {
        self.arm_a.validate()?;
        self.arm_b.validate()
    }

    pub fn total_length_km(&self) -> f64 {
        self.arm_a.length_km() + self.arm_b.length_km()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBudget {
    /// (item, two-photon dB) in table order.
    pub items: Vec<(String, f64)>,
    pub total_db: f64,
}

/// Two-photon loss table: each item summed over both arms.
pub fn link_loss_budget(arm_a: &ArmPlan, arm_b: &ArmPlan) -> LossBudget {
    let both = |f: &dyn Fn(&ArmPlan) -> f64| f(arm_a) + f(arm_b);
    let mut items = vec![
        ("Entanglement source".to_string(), both(&|a| a.endpoint_losses.source_share_db)),
        ("Fiber".to_string(), both(&|a| a.fiber_loss_db())),
        ("SNSPD".to_string(), both(&|a| a.endpoint_losses.snspd_db)),
        ("PAM".to_string(), both(&|a| a.endpoint_losses.pam_db)),
    ];
    let wdm = both(&|a| a.endpoint_losses.wdm_db);
    if wdm != 0.0 {
        items.push(("WDM".to_string(), wdm));
    }
    items.push(("Dispersion compensation".to_string(), both(&|a| a.device_loss_db())));
    let total_db = items.iter().map(|(_, v)| v).sum();
    LossBudget { items, total_db }
}

/// Accumulated dispersion of one arm, ps/nm.
pub fn accumulated_dispersion(wavelength_nm: f64, arm: &ArmPlan) -> f64 {
    arm.fiber_dispersion(wavelength_nm) + arm.device_dispersion(wavelength_nm)
}

/// Timing spread contributions of one channel pair, ps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDispersion {
    pub label: String,
    /// Fiber spread on arm A (signal).
    pub sigma_da_ps: f64,
    /// Fiber spread on arm B (idler).
    pub sigma_db_ps: f64,
    /// Compensation spread per device kind, arm A then arm B devices.
    pub dcf_ps: f64,
    pub dcm_ps: f64,
    pub residual_ps: f64,
}

impl ChannelDispersion {
    pub fn sigma_c_ps(&self) -> f64 {
        self.dcf_ps + self.dcm_ps
    }
}

fn kind_dispersion(arm: &ArmPlan, kind: DeviceKind, wavelength_nm: f64) -> f64 {
    arm.devices.iter().filter(|d| d.kind == kind).map(|d| d.dispersion(wavelength_nm)).sum()
}

/// Per-kind breakdown of [`residual_dispersion_per_channel`].
pub fn channel_dispersion(pair: &ChannelPair, link: &LinkPlan, channel_fwhm_nm: f64) -> ChannelDispersion {
    let (ls, li) = (pair.signal_nm(), pair.idler_nm());
    let (a, b) = (&link.arm_a, &link.arm_b);
    let per_kind = |k| (kind_dispersion(a, k, ls) + kind_dispersion(b, k, li)) * channel_fwhm_nm;
    let sigma_da_ps = a.fiber_dispersion(ls) * channel_fwhm_nm;
    let sigma_db_ps = b.fiber_dispersion(li) * channel_fwhm_nm;
    let dcf_ps = per_kind(DeviceKind::Dcf);
    let dcm_ps = per_kind(DeviceKind::Dcm);
    ChannelDispersion {
        label: pair.label.clone(),
        sigma_da_ps,
        sigma_db_ps,
        dcf_ps,
        dcm_ps,
        residual_ps: residual_dispersion_per_channel(pair, link, channel_fwhm_nm),
    }
}

/// Net dispersion spread of a channel pair across its optical bandwidth, ps.
pub fn residual_dispersion_per_channel(pair: &ChannelPair, link: &LinkPlan, channel_fwhm_nm: f64) -> f64 {
    (accumulated_dispersion(pair.signal_nm(), &link.arm_a) + accumulated_dispersion(pair.idler_nm(), &link.arm_b))
        * channel_fwhm_nm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingBudget {
    pub sigma0_ps: f64,
    pub sigma_da_ps: f64,
    pub sigma_db_ps: f64,
    pub sigma_c_ps: f64,
    pub delta_t_ps: f64,
}

/// `dT = sqrt(s0^2 + (sDA + sDB + sC)^2)`.
pub fn timing_uncertainty(sigma0_ps: f64, sigma_da_ps: f64, sigma_db_ps: f64, sigma_c_ps: f64) -> Result<TimingBudget> {
    if !(sigma0_ps > 0.0) {
        return Err(Error::domain("baseline jitter must be positive"));
    }
    let net = sigma_da_ps + sigma_db_ps + sigma_c_ps;
    Ok(TimingBudget {
        sigma0_ps,
        sigma_da_ps,
        sigma_db_ps,
        sigma_c_ps,
        delta_t_ps: sigma0_ps.hypot(net),
    })
}

/// Timing budget of every pair in the plan.
pub fn timing_profile(plan: &ChannelPlan, link: &LinkPlan, sigma0_ps: f64) -> Result<Vec<(ChannelDispersion, TimingBudget)>> {
    plan.pairs
        .iter()
        .map(|p| {
            let d = channel_dispersion(p, link, plan.channel_fwhm_nm);
            let t = timing_uncertainty(sigma0_ps, d.sigma_da_ps, d.sigma_db_ps, d.sigma_c_ps())?;
            Ok((d, t))
        })
        .collect()
}

/// Broadened two-photon correlation time `sqrt(s^4 + g^2) / s` for a net
/// group-delay dispersion `gvd_sum_ps2 = bA LA + bB LB`.
pub fn nonlocal_broadening(sigma_cor_ps: f64, gvd_sum_ps2: f64) -> Result<f64> {
    if !(sigma_cor_ps > 0.0) {
        return Err(Error::domain("correlation time must be positive"));
    }
    let s2 = sigma_cor_ps * sigma_cor_ps;
    Ok((s2 * s2 + gvd_sum_ps2 * gvd_sum_ps2).sqrt() / sigma_cor_ps)
}

pub fn pmd_bound(total_length_km: f64, pmd_coeff_ps_per_sqrt_km: f64) -> Result<f64> {
    if !(total_length_km >= 0.0) {
        return Err(Error::domain("length must be non-negative"));
    }
    Ok(pmd_coeff_ps_per_sqrt_km * total_length_km.sqrt())
}

/// Dispersion table: one column per channel.
pub fn dispersion_table_csv(rows: &[(ChannelDispersion, TimingBudget)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["DWDM channel".to_string()];
    header.extend(rows.iter().map(|(d, _)| d.label.clone()));
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    type Getter = fn(&(ChannelDispersion, TimingBudget)) -> f64;
    let lines: [(&str, Getter); 5] = [
        ("Fiber chromatic dispersion", |r| r.0.sigma_da_ps + r.0.sigma_db_ps),
        ("DCF", |r| r.0.dcf_ps),
        ("DCM", |r| r.0.dcm_ps),
        ("Residual chromatic dispersion", |r| r.0.residual_ps),
        ("Timing uncertainty (analysis)", |r| r.1.delta_t_ps),
    ];
    for (name, get) in lines {
        let mut rec = vec![name.to_string()];
        rec.extend(rows.iter().map(|r| format!("{:.1}", get(r))));
        w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

/// Loss table: one column per link.
pub fn loss_table_csv(columns: &[(String, LossBudget)]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["Item".to_string()];
    header.extend(columns.iter().map(|(n, _)| n.clone()));
    w.write_record(&header).map_err(|e| Error::Format(e.to_string()))?;
    let mut names: Vec<&str> = Vec::new();
    for (_, b) in columns {
        for (n, _) in &b.items {
            if !names.contains(&n.as_str()) {
                names.push(n);
            }
        }
    }
    for name in names {
        let mut rec = vec![name.to_string()];
        for (_, b) in columns {
            let v = b.items.iter().find(|(n, _)| n == name).map_or(0.0, |(_, v)| *v);
            rec.push(fmt_db(v));
        }
        w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
    }
    let mut rec = vec!["Total".to_string()];
    rec.extend(columns.iter().map(|(_, b)| fmt_db(b.total_db)));
    w.write_record(&rec).map_err(|e| Error::Format(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn fmt_db(v: f64) -> String {
    // integers print without a trailing ".0", matching the published layout
    if (v - v.round()).abs() < 1e-9 {
        format!("{}", v.round())
    } else {
        format!("{v:.2}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn pair(signal_nm: f64, idler_nm: f64) -> ChannelPair {
        ChannelPair {
            signal_thz: crate::units::nm_to_thz(signal_nm),
            idler_thz: crate::units::nm_to_thz(idler_nm),
            label: "X".into(),
        }
    }

    #[test]
    fn fiber_dispersion_examples() {
        let arm = ArmPlan { segments: vec![FiberSegment::ullf(100.0)], ..Default::default() };
        assert_relative_eq!(accumulated_dispersion(1550.0, &arm), 1700.0);
        let arm = ArmPlan { segments: vec![FiberSegment::ullf(200.0)], ..Default::default() };
        assert_relative_eq!(accumulated_dispersion(1540.0, &arm), 200.0 * (17.0 - 0.6), max_relative = 1e-14);
    }

    #[test]
    fn empty_budget_is_zero() {
        let b = link_loss_budget(&ArmPlan::default(), &ArmPlan::default());
        assert_eq!(b.total_db, 0.0);
        assert!(b.items.iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn budget_adds_every_item() {
        let mut a = ArmPlan {
            segments: vec![FiberSegment::ullf(50.0)],
            endpoint_losses: EndpointLosses { source_share_db: 1.0, pam_db: 2.0, snspd_db: 0.5, wdm_db: 0.25 },
            ..Default::default()
        };
        a.devices.push(CompensationDevice {
            kind: DeviceKind::Dcm,
            d0_ps_per_nm: -800.0,
            s0_ps_per_nm2: -3.0,
            lambda0_nm: 1550.0,
            insertion_loss_db: 3.0,
        });
        let b = link_loss_budget(&a, &ArmPlan::default());
        let items: f64 = b.items.iter().map(|(_, v)| v).sum();
        assert_eq!(items, b.total_db);
        assert_relative_eq!(b.total_db, a.total_loss_db(), max_relative = 1e-15);
        assert!(b.items.iter().any(|(n, _)| n == "WDM"));
    }

    #[test]
    fn exact_cancellation_gives_zero_residual() {
        let fiber = FiberSegment::ullf(80.0);
        let dev = CompensationDevice {
            kind: DeviceKind::Dcf,
            d0_ps_per_nm: -fiber.length_km * fiber.d0_ps_per_nm_km,
            s0_ps_per_nm2: -fiber.length_km * fiber.s0_ps_per_nm2_km,
            lambda0_nm: 1550.0,
            insertion_loss_db: 1.0,
        };
        let link = LinkPlan {
            arm_a: ArmPlan { segments: vec![fiber], devices: vec![dev], ..Default::default() },
            arm_b: ArmPlan::default(),
        };
        let r = residual_dispersion_per_channel(&pair(1543.0, 1577.0), &link, 1.25);
        assert!(r.abs() < 1e-9, "{r}");
    }

    #[test]
    fn timing_examples() {
        let t = timing_uncertainty(60.0, 0.0, 0.0, -90.7).unwrap();
        assert!((t.delta_t_ps - 108.8).abs() < 0.1);
        assert_eq!(timing_uncertainty(60.0, 0.0, 0.0, 0.0).unwrap().delta_t_ps, 60.0);
        assert!((timing_uncertainty(60.0, 113.6, 0.0, 0.0).unwrap().delta_t_ps - 128.5).abs() < 0.05);
        assert!(timing_uncertainty(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn broadening_examples() {
        assert_eq!(nonlocal_broadening(6.0, 0.0).unwrap(), 6.0);
        assert_relative_eq!(nonlocal_broadening(6.0, 36.0).unwrap(), 6.0 * 2f64.sqrt(), max_relative = 1e-14);
        assert!(nonlocal_broadening(0.0, 1.0).is_err());
    }

    #[test]
    fn pmd_examples() {
        assert_relative_eq!(pmd_bound(400.0, 0.04).unwrap(), 0.8, max_relative = 1e-14);
        assert_eq!(pmd_bound(0.0, 0.04).unwrap(), 0.0);
        assert_relative_eq!(pmd_bound(100.0, 0.04).unwrap(), 0.4, max_relative = 1e-14);
        assert!(pmd_bound(-1.0, 0.04).is_err());
    }

    #[test]
    fn negative_length_is_rejected() {
        let arm = ArmPlan { segments: vec![FiberSegment::ullf(-1.0)], ..Default::default() };
        assert!(arm.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn quadrature_identity(s0 in 1.0f64..200.0, a in -500.0f64..500.0, b in -500.0f64..500.0, c in -500.0f64..500.0) {
            let t = timing_uncertainty(s0, a, b, c).unwrap();
            let net = a + b + c;
            proptest::prop_assert!(t.delta_t_ps >= s0);
            proptest::prop_assert!(((t.delta_t_ps.powi(2) - s0 * s0) - net * net).abs() <= 1e-9 * (net * net).max(1.0));
        }

        #[test]
        fn broadening_grows_with_gvd(s in 0.5f64..50.0, g1 in 0.0f64..1e4, dg in 0.0f64..1e4) {
            let lo = nonlocal_broadening(s, g1).unwrap();
            let hi = nonlocal_broadening(s, g1 + dg).unwrap();
            proptest::prop_assert!(hi >= lo);
            proptest::prop_assert!((nonlocal_broadening(s, -g1).unwrap() - lo).abs() < 1e-12 * lo);
        }
    }
}
