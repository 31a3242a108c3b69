//! Scenario configuration as written in a `.cfg` file. Key suffixes carry
//! the unit (`_km`, `_db`, `_ps`, ...); see the README for the grammar.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    pub source: SourceConfig,
    pub channels: ChannelsConfig,
    pub catalog: CatalogConfig,
    pub link: LinkConfig,
    pub detection: DetectionConfig,
    pub analysis: AnalysisConfig,
    pub simulation: SimulationConfig,
    pub optimizer: OptimizerConfig,
    pub bell: BellConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub pump_wavelength_nm: f64,
    pub pump_power_mw: f64,
    pub brightness_pairs_per_s_per_mw: f64,
    pub spectral_brightness_pairs_per_s_per_nm_per_mw: f64,
    pub coincidence_efficiency: f64,
    pub waveguide: WaveguideConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveguideConfig {
    pub grating_length_mm: f64,
    pub poling_period_um: f64,
    pub degenerate_temperature_c: f64,
    pub temperature_c: f64,
    pub tuning_slope_nm_per_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelsConfig {
    pub grid_spacing_ghz: f64,
    pub channel_fwhm_nm: f64,
    /// Explicit pair labels; when empty the plan is carved from the spectrum.
    pub pairs: Vec<String>,
    pub threshold: f64,
    pub wl_min_nm: f64,
    pub wl_max_nm: f64,
    pub wl_step_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogConfig {
    /// Channels of the reference compensation table the rows refer to.
    pub reference_channels: Vec<String>,
    pub outlier_threshold_ps: f64,
    pub max_per_kind: usize,
    pub residual_threshold_ps: f64,
    pub dcm: CatalogDeviceConfig,
    pub dcf: CatalogDeviceConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogDeviceConfig {
    /// Per-channel spread contributed by `units` devices, ps.
    pub rows_ps: Vec<f64>,
    pub units: usize,
    pub insertion_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkConfig {
    pub group_delay_ps_per_km: f64,
    pub arm_a: ArmConfig,
    pub arm_b: ArmConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmConfig {
    pub source_share_db: f64,
    pub pam_db: f64,
    pub snspd_db: f64,
    pub wdm_db: f64,
    pub segments: Vec<SegmentConfig>,
    pub devices: Vec<DeviceConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentConfig {
    pub length_km: f64,
    pub attenuation_db_per_km: f64,
    pub d0_ps_per_nm_km: f64,
    pub s0_ps_per_nm2_km: f64,
    pub lambda0_nm: f64,
    pub connector_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviceConfig {
    /// `DCM` or `DCF`.
    pub kind: String,
    /// Dispersion in multiples of the catalogue unit of that kind.
    pub units: f64,
    pub insertion_loss_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Baseline two-photon timing uncertainty (FWHM).
    pub jitter_fwhm_ps: f64,
    pub dark_rate_a_cps: f64,
    pub dark_rate_b_cps: f64,
    pub e_pol: f64,
    /// Coincidence gate width in units of the channel's timing uncertainty.
    pub gate_fwhm_multiple: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// `finite` or `asymptotic`.
    pub mode: String,
    pub fe: f64,
    pub security_exponent: u32,
    /// Acquisition time per channel (channels run in parallel).
    pub acquisition_time_s: f64,
    /// `pooled`, `per_channel` or `auto`.
    pub block_mode: String,
    /// `swapped` or `printed`.
    pub nu_xi_order: String,
    pub measured: Option<MeasuredConfig>,
}

/// Published totals for the link, used as key-rate input when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasuredConfig {
    pub raw_key_bits: u64,
    pub qber: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub duration_s: f64,
    pub seed: u64,
    pub bin_width_ps: f64,
    pub span_ps: f64,
    /// Added to every arm's loss; negative values make the run denser.
    pub loss_offset_db: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub rate_min_pairs_per_s: f64,
    pub rate_max_pairs_per_s: f64,
    pub rate_points: usize,
    pub gate_widths_ps: Vec<f64>,
    /// Fixed coincidence FWHM for the sweep; 0 uses each channel's own.
    pub delta_t_ps: f64,
    /// "asymptotic", or "finite" with the block collected over the
    /// analysis acquisition time.
    pub objective: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellConfig {
    pub visibility: f64,
    pub pairs_per_setting: u64,
}
