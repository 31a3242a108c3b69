//! SPDC source model: photon energetics, pair rates, the phase-matched
//! spectrum and its division into conjugate DWDM channel pairs.

mod channels;
mod phase_matching;

pub use channels::{channel_label, channelize, ChannelPair, ChannelPlan, ItuGrid};
pub use phase_matching::{
    lobe_fwhm_nm, peak_wavelength, phase_mismatch, spdc_spectrum, usable_span_nm, PhaseMatchParams,
    Sellmeier, SpectrumSample,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{PLANCK, SPEED_OF_LIGHT};

/// Configuration of the entangled-pair source.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceSpec {
    pub pump_wavelength_nm: f64,
    pub pump_power_mw: f64,
    /// Pair generation rate per pump power, pairs/s/mW.
    pub brightness: f64,
    /// Spectral generation rate, pairs/s/nm/mW.
    pub spectral_brightness: f64,
    /// Average single-photon coincidence efficiency.
    pub coincidence_efficiency: f64,
    pub waveguide: PhaseMatchParams,
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.pump_wavelength_nm > 0.0) {
            return Err(Error::domain("pump wavelength must be positive"));
        }
        if !(self.pump_power_mw >= 0.0) {
            return Err(Error::domain("pump power must be non-negative"));
        }
        if !(self.coincidence_efficiency > 0.0 && self.coincidence_efficiency <= 1.0) {
            return Err(Error::domain("coincidence efficiency must lie in (0, 1]"));
        }
        if !(self.brightness > 0.0 && self.spectral_brightness > 0.0) {
            return Err(Error::domain("brightness constants must be positive"));
        }
        self.waveguide.validate()
    }

    pub fn pump_thz(&self) -> f64 {
        crate::units::nm_to_thz(self.pump_wavelength_nm)
    }
}

/// Photon energy h c / lambda in joules.
pub fn photon_energy(wavelength_nm: f64) -> Result<f64> {
    if !(wavelength_nm > 0.0) {
        return Err(Error::domain(format!(
            "wavelength must be positive, got {wavelength_nm} nm"
        )));
    }
    Ok(PLANCK * SPEED_OF_LIGHT / (wavelength_nm * 1e-9))
}

/// Pair generation rate `G = Rc / eta^2` from a raw coincidence rate.
pub fn pair_generation_rate(raw_coincidence_rate: f64, efficiency: f64) -> Result<f64> {
    if !(efficiency > 0.0 && efficiency <= 1.0) {
        return Err(Error::domain(format!(
            "efficiency must lie in (0, 1], got {efficiency}"
        )));
    }
    if !(raw_coincidence_rate >= 0.0) {
        return Err(Error::domain("coincidence rate must be non-negative"));
    }
    Ok(raw_coincidence_rate / (efficiency * efficiency))
}

/// Optical power carried by the emitted pairs, in nW. Both photons of each
/// pair contribute their energy.
pub fn emitted_optical_power(
    pump_power_mw: f64,
    brightness: f64,
    signal_nm: f64,
    idler_nm: f64,
) -> Result<f64> {
    if !(pump_power_mw >= 0.0 && brightness > 0.0) {
        return Err(Error::domain("pump power and brightness must be positive"));
    }
    let pair_energy = photon_energy(signal_nm)? + photon_energy(idler_nm)?;
    Ok(brightness * pump_power_mw * pair_energy * 1e9)
}

/// Idler wavelength conjugate to `signal_nm` under energy conservation
/// `1/lp = 1/l1 + 1/l2`.
pub fn conjugate_wavelength(pump_nm: f64, signal_nm: f64) -> Result<f64> {
    if !(pump_nm > 0.0) {
        return Err(Error::domain("pump wavelength must be positive"));
    }
    if !(signal_nm > pump_nm) {
        return Err(Error::domain(format!(
            "signal wavelength {signal_nm} nm must exceed the pump wavelength {pump_nm} nm"
        )));
    }
    Ok(pump_nm * signal_nm / (signal_nm - pump_nm))
}

/// Pair rate inside one channel of optical bandwidth `channel_fwhm_nm`.
pub fn channel_pair_rate(spec: &SourceSpec, channel_fwhm_nm: f64) -> f64 {
    spec.spectral_brightness * channel_fwhm_nm * spec.pump_power_mw
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn photon_energy_matches_power_meter_figure() {
        let e = photon_energy(1560.0).unwrap();
        assert_relative_eq!(e, 1.27e-19, max_relative = 0.01);
        let half = photon_energy(780.0).unwrap();
        assert_relative_eq!(half, 2.0 * e, max_relative = 1e-15);
        // hand value: 6.62607015e-34 * 299792458 / 1550e-9
        assert_relative_eq!(
            photon_energy(1550.0).unwrap(),
            1.281_577_972_354_147_5e-19,
            max_relative = 1e-14
        );
    }

    #[test]
    fn photon_energy_rejects_non_positive() {
        assert!(photon_energy(0.0).is_err());
        assert!(photon_energy(-3.0).is_err());
    }

    #[test]
    fn generation_rate_examples() {
        let g = pair_generation_rate(5.1e6, 0.105).unwrap();
        assert_relative_eq!(g, 4.6e8, max_relative = 0.02);
        assert_eq!(pair_generation_rate(0.0, 0.3).unwrap(), 0.0);
        let g2 = pair_generation_rate(8.0e4, 0.107).unwrap();
        assert_relative_eq!(g2, 6.987_509_826e6, max_relative = 1e-9);
        // per nm per mW with the 1.25 nm filter at 7 uW
        assert_relative_eq!(g2 / 1.25 / 0.007, 8.0e8, max_relative = 0.01);
        assert!(pair_generation_rate(1.0, 0.0).is_err());
    }

    #[test]
    fn emitted_power_examples() {
        let p = emitted_optical_power(3.2, 2.4e10, 1540.0, 1580.0).unwrap();
        assert_relative_eq!(p, 19.2, max_relative = 0.05);
        assert_eq!(emitted_optical_power(0.0, 2.4e10, 1540.0, 1580.0).unwrap(), 0.0);
        let p10 = emitted_optical_power(10.0, 2.4e10, 1540.0, 1580.0).unwrap();
        assert_relative_eq!(p10 / p, 10.0 / 3.2, max_relative = 1e-12);
        assert_relative_eq!(2.4e10 * 10.0, 2.4e11);
    }

    #[test]
    fn conjugate_examples() {
        assert_relative_eq!(conjugate_wavelength(780.0, 1560.0).unwrap(), 1560.0);
        let idler = conjugate_wavelength(780.0, 1540.0).unwrap();
        assert_relative_eq!(1.0 / idler, 1.0 / 780.0 - 1.0 / 1540.0, max_relative = 1e-14);
        assert_relative_eq!(idler, 1_580.526_315_789_473_7, max_relative = 1e-13);
        let back = conjugate_wavelength(780.0, idler).unwrap();
        assert_relative_eq!(back, 1540.0, max_relative = 1e-14);
        assert!(conjugate_wavelength(780.0, 780.0).is_err());
        assert!(conjugate_wavelength(780.0, 700.0).is_err());
    }

    #[test]
    fn channel_rate_examples() {
        let mut spec = crate::presets::default_source();
        spec.pump_power_mw = 0.55;
        assert_relative_eq!(channel_pair_rate(&spec, 1.25), 5.5e8, max_relative = 1e-12);
        spec.pump_power_mw = 0.0;
        assert_eq!(channel_pair_rate(&spec, 1.25), 0.0);
        spec.pump_power_mw = 0.007;
        let via_channel = channel_pair_rate(&spec, 1.25);
        let via_rc = pair_generation_rate(8.0e4, 0.107).unwrap();
        assert_relative_eq!(via_channel, via_rc, max_relative = 0.01);
    }

    proptest::proptest! {
        #[test]
        fn conjugation_is_an_involution(pump in 700.0f64..800.0, offset in 1.0f64..900.0) {
            let signal = pump + offset;
            let idler = conjugate_wavelength(pump, signal).unwrap();
            let back = conjugate_wavelength(pump, idler).unwrap();
            proptest::prop_assert!(((back - signal) / signal).abs() < 1e-13);
        }

        #[test]
        fn rates_are_linear(rc in 0.0f64..1e8, eta in 0.01f64..1.0, k in 0.1f64..10.0) {
            let a = pair_generation_rate(rc, eta).unwrap();
            let b = pair_generation_rate(k * rc, eta).unwrap();
            proptest::prop_assert!((b - k * a).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }
}
