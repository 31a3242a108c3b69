//! Quasi-phase-matched type-0 SPDC in a PPLN waveguide.
//!
//! The bulk index comes from a temperature-dependent Sellmeier fit for
//! congruent lithium niobate (extraordinary ray). Two calibration terms turn
//! it into an effective waveguide model:
//!
//! * `phase_offset_per_um`, a wavelength-independent correction to the
//!   grating vector, chosen so that the degenerate point phase-matches at the
//!   degenerate temperature `T_d` with the fabricated poling period;
//! * `thermal_scale`, a multiplier on the temperature excursion from `T_d`
//!   that sets the tuning slope of the emission peaks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::C_NM_THZ;

/// Temperature-dependent Sellmeier equation of the form
///
/// `n^2 = a1 + b1 f + (a2 + b2 f) / (l^2 - (a3 + b3 f)^2) + (a4 + b4 f) / (l^2 - a5^2) - a6 l^2`
///
/// with `f = (T - t0)(T + t1)` and `l` in micrometres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sellmeier {
    pub a: [f64; 6],
    pub b: [f64; 4],
    pub t0: f64,
    pub t1: f64,
    /// Validity range of the fit in micrometres.
    pub valid_um: (f64, f64),
}

impl Sellmeier {
    /// Congruent LiNbO3, extraordinary index (Jundt 1997).
    pub fn congruent_ln() -> Self {
        Self {
            a: [5.35583, 0.100473, 0.20692, 100.0, 11.34927, 1.5334e-2],
            b: [4.629e-7, 3.862e-8, -0.89e-8, 2.657e-5],
            t0: 24.5,
            t1: 570.82,
            valid_um: (0.4, 5.0),
        }
    }

    pub fn index(&self, wavelength_um: f64, temperature_c: f64) -> Result<f64> {
        let (lo, hi) = self.valid_um;
        if !(wavelength_um >= lo && wavelength_um <= hi) {
            return Err(Error::domain(format!(
                "wavelength {:.1} nm outside refractive-index model range {:.0}-{:.0} nm",
                wavelength_um * 1e3,
                lo * 1e3,
                hi * 1e3
            )));
        }
        let [a1, a2, a3, a4, a5, a6] = self.a;
        let [b1, b2, b3, b4] = self.b;
        let f = (temperature_c - self.t0) * (temperature_c + self.t1);
        let l2 = wavelength_um * wavelength_um;
        let pole = a3 + b3 * f;
        let n2 = a1 + b1 * f + (a2 + b2 * f) / (l2 - pole * pole) + (a4 + b4 * f) / (l2 - a5 * a5)
            - a6 * l2;
        if !(n2 > 1.0) {
            return Err(Error::domain("refractive index model returned n <= 1"));
        }
        Ok(n2.sqrt())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMatchParams {
    pub grating_length_mm: f64,
    pub poling_period_um: f64,
    /// Operating temperature.
    pub temperature_c: f64,
    pub degenerate_temperature_c: f64,
    pub sellmeier: Sellmeier,
    pub thermal_scale: f64,
    /// Waveguide correction to the grating vector, rad/um.
    pub phase_offset_per_um: f64,
}

const DETUNING_QUANTUM_THZ: f64 = 1e-9;

impl PhaseMatchParams {
    /// Uncalibrated parameters (`thermal_scale = 1`, zero offset).
    pub fn new(grating_length_mm: f64, poling_period_um: f64, temperature_c: f64, degenerate_temperature_c: f64) -> Self {
        Self {
            grating_length_mm,
            poling_period_um,
            temperature_c,
            degenerate_temperature_c,
            sellmeier: Sellmeier::congruent_ln(),
            thermal_scale: 1.0,
            phase_offset_per_um: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grating_length_mm > 0.0) {
            return Err(Error::domain("grating length must be positive"));
        }
        if !(self.poling_period_um > 0.0) {
            return Err(Error::domain("poling period must be positive"));
        }
        if !(self.thermal_scale > 0.0) {
            return Err(Error::domain("thermal scale must be positive"));
        }
        Ok(())
    }

    fn effective_temperature(&self, temperature_c: f64) -> f64 {
        self.degenerate_temperature_c
            + self.thermal_scale * (temperature_c - self.degenerate_temperature_c)
    }

    /// Sets the grating offset so the degenerate wavelength `2 * pump`
    /// phase-matches exactly at `T_d`.
    pub fn calibrate_degeneracy(&mut self, pump_nm: f64) -> Result<()> {
        self.phase_offset_per_um = 0.0;
        let raw = phase_mismatch(pump_nm, 2.0 * pump_nm, self.degenerate_temperature_c, self)?;
        self.phase_offset_per_um = -raw;
        Ok(())
    }

    /// Mean shift of the long-wavelength emission peak between `T_d + 1` and
    /// `T_d + 5`, nm per degree.
    pub fn tuning_slope(&self, pump_nm: f64) -> Result<f64> {
        let td = self.degenerate_temperature_c;
        let p1 = peak_wavelength(pump_nm, td + 1.0, self)?;
        let p5 = peak_wavelength(pump_nm, td + 5.0, self)?;
        Ok((p5 - p1) / 4.0)
    }

    /// Bisection on the thermal scale so that [`Self::tuning_slope`] equals
    /// `target_nm_per_c`. Calibrates the degeneracy first.
    pub fn calibrate_thermal_scale(&mut self, pump_nm: f64, target_nm_per_c: f64) -> Result<()> {
        self.calibrate_degeneracy(pump_nm)?;
        let slope_at = |scale: f64, base: &Self| -> Result<f64> {
            let mut p = base.clone();
            p.thermal_scale = scale;
            p.tuning_slope(pump_nm)
        };
        let (mut lo, mut hi) = (0.05, 20.0);
        let s_lo = slope_at(lo, self)?;
        let s_hi = slope_at(hi, self)?;
        if !(s_lo <= target_nm_per_c && target_nm_per_c <= s_hi) {
            return Err(Error::Fit(format!(
                "tuning slope {target_nm_per_c} nm/C unreachable (range {s_lo:.2}-{s_hi:.2})"
            )));
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if slope_at(mid, self)? < target_nm_per_c {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.thermal_scale = 0.5 * (lo + hi);
        Ok(())
    }

    /// Builds calibrated parameters: degeneracy at `T_d`, tuning slope as given.
    pub fn calibrated(
        grating_length_mm: f64,
        poling_period_um: f64,
        temperature_c: f64,
        degenerate_temperature_c: f64,
        pump_nm: f64,
        slope_nm_per_c: f64,
    ) -> Result<Self> {
        let mut p = Self::new(grating_length_mm, poling_period_um, temperature_c, degenerate_temperature_c);
        p.calibrate_thermal_scale(pump_nm, slope_nm_per_c)?;
        Ok(p)
    }
}

/// Phase mismatch `dk = 2 pi (np/lp - n1/l1 - n2/l2 - 1/period)` in rad/um
/// (plus the waveguide offset), with the idler fixed by energy conservation.
///
/// The pair is evaluated through its detuning from the half pump frequency,
/// so a wavelength and its conjugate give bit-identical results.
pub fn phase_mismatch(pump_nm: f64, signal_nm: f64, temperature_c: f64, params: &PhaseMatchParams) -> Result<f64> {
    if !(signal_nm > pump_nm && pump_nm > 0.0) {
        return Err(Error::domain(format!(
            "signal wavelength {signal_nm} nm must exceed pump {pump_nm} nm"
        )));
    }
    let nu_p = C_NM_THZ / pump_nm;
    let half = 0.5 * nu_p;
    let detuning = ((C_NM_THZ / signal_nm - half).abs() / DETUNING_QUANTUM_THZ).round() * DETUNING_QUANTUM_THZ;
    let l_hi = C_NM_THZ / (half + detuning) * 1e-3;
    let l_lo = C_NM_THZ / (half - detuning) * 1e-3;
    let lp = pump_nm * 1e-3;
    let t = params.effective_temperature(temperature_c);
    let n = &params.sellmeier;
    let np = n.index(lp, t)?;
    let n_hi = n.index(l_hi, t)?;
    let n_lo = n.index(l_lo, t)?;
    let two_pi = 2.0 * std::f64::consts::PI;
    Ok(two_pi * (np / lp - n_hi / l_hi - n_lo / l_lo - 1.0 / params.poling_period_um)
        + params.phase_offset_per_um)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub wavelength_nm: f64,
    pub relative_intensity: f64,
}

fn sinc_squared(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 3.0
    } else {
        let s = x.sin() / x;
        s * s
    }
}

/// Relative emission `sinc^2(L dk / 2)` on `wl_grid`, normalized to the
/// largest sample.
pub fn spdc_spectrum(
    pump_nm: f64,
    temperature_c: f64,
    params: &PhaseMatchParams,
    wl_grid: &[f64],
) -> Result<Vec<SpectrumSample>> {
    if wl_grid.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Contract("wavelength grid must be sorted".into()));
    }
    let half_len_um = 0.5 * params.grating_length_mm * 1e3;
    let raw = wl_grid
        .iter()
        .map(|&wl| Ok(sinc_squared(half_len_um * phase_mismatch(pump_nm, wl, temperature_c, params)?)))
        .collect::<Result<Vec<f64>>>()?;
    let peak = raw.iter().cloned().fold(0.0, f64::max);
    Ok(wl_grid
        .iter()
        .zip(raw)
        .map(|(&wavelength_nm, r)| SpectrumSample {
            wavelength_nm,
            relative_intensity: if peak > 0.0 { r / peak } else { 0.0 },
        })
        .collect())
}

/// Long-wavelength root of `dk = 0`, i.e. the idler-side emission peak.
/// Returns the degenerate wavelength when the two lobes have not split.
pub fn peak_wavelength(pump_nm: f64, temperature_c: f64, params: &PhaseMatchParams) -> Result<f64> {
    let degenerate = 2.0 * pump_nm;
    let mut lo = degenerate + 1e-6;
    let mut hi = params.sellmeier.valid_um.1.min(2.4) * 1e3;
    let f = |wl: f64| phase_mismatch(pump_nm, wl, temperature_c, params);
    let f_lo = f(lo)?;
    if f_lo <= 0.0 {
        return Ok(degenerate);
    }
    if f(hi)? > 0.0 {
        return Err(Error::domain("emission peak beyond the index model range"));
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if f(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// FWHM of the lobe containing the largest sample on the long-wavelength
/// side of `split_nm`, with linear interpolation at the half-maximum crossings.
pub fn lobe_fwhm_nm(samples: &[SpectrumSample], split_nm: f64) -> Option<f64> {
    let (imax, smax) = samples
        .iter()
        .enumerate()
        .filter(|(_, s)| s.wavelength_nm >= split_nm)
        .max_by(|a, b| a.1.relative_intensity.total_cmp(&b.1.relative_intensity))?;
    let half = 0.5 * smax.relative_intensity;
    if half <= 0.0 {
        return None;
    }
    let cross = |a: &SpectrumSample, b: &SpectrumSample| {
        let t = (half - a.relative_intensity) / (b.relative_intensity - a.relative_intensity);
        a.wavelength_nm + t * (b.wavelength_nm - a.wavelength_nm)
    };
    let mut left = None;
    for i in (0..imax).rev() {
        if samples[i].relative_intensity < half {
            left = Some(cross(&samples[i], &samples[i + 1]));
            break;
        }
    }
    let mut right = None;
    for i in imax + 1..samples.len() {
        if samples[i].relative_intensity < half {
            right = Some(cross(&samples[i - 1], &samples[i]));
            break;
        }
    }
    Some(right? - left?)
}

/// Distance between the outermost samples at or above `threshold`.
pub fn usable_span_nm(samples: &[SpectrumSample], threshold: f64) -> f64 {
    let above = |s: &&SpectrumSample| s.relative_intensity >= threshold;
    match (samples.iter().find(above), samples.iter().rev().find(above)) {
        (Some(first), Some(last)) => last.wavelength_nm - first.wavelength_nm,
        _ => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PUMP: f64 = 780.3;

    fn params() -> PhaseMatchParams {
        PhaseMatchParams::calibrated(48.0, 16.4, 51.0, 50.0, PUMP, 10.0).unwrap()
    }

    fn grid(lo: f64, hi: f64, step: f64) -> Vec<f64> {
        let n = ((hi - lo) / step).round() as usize;
        (0..=n).map(|i| lo + step * i as f64).collect()
    }

    #[test]
    fn index_is_physical_over_band() {
        let s = Sellmeier::congruent_ln();
        for wl in [0.78, 1.45, 1.56, 1.65] {
            for t in [50.0, 56.0] {
                let n = s.index(wl, t).unwrap();
                assert!(n > 2.0 && n < 2.3, "n({wl}, {t}) = {n}");
            }
        }
        assert!(s.index(0.2, 50.0).is_err());
    }

    #[test]
    fn degenerate_point_phase_matches_at_td() {
        let p = params();
        let dk = phase_mismatch(PUMP, 2.0 * PUMP, p.degenerate_temperature_c, &p).unwrap();
        assert!(dk.abs() < 1e-9);
    }

    #[test]
    fn mismatch_vanishes_at_the_peak() {
        let p = params();
        let peak = peak_wavelength(PUMP, 52.0, &p).unwrap();
        let dk = phase_mismatch(PUMP, peak, 52.0, &p).unwrap();
        assert!(dk.abs() < 1e-9, "dk at peak = {dk}");
    }

    #[test]
    fn roots_straddle_degeneracy_symmetrically_in_frequency() {
        let p = params();
        let t = p.degenerate_temperature_c + 0.5;
        // independent bisection on the short-wavelength side
        let f = |wl: f64| phase_mismatch(PUMP, wl, t, &p).unwrap();
        let (mut lo, mut hi) = (1400.0, 2.0 * PUMP - 1e-6);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        let short_root = 0.5 * (lo + hi);
        let long_root = peak_wavelength(PUMP, t, &p).unwrap();
        assert!(short_root < 2.0 * PUMP && long_root > 2.0 * PUMP);
        let nu_sum = C_NM_THZ / short_root + C_NM_THZ / long_root;
        assert!((nu_sum - C_NM_THZ / PUMP).abs() < 1e-6, "{nu_sum}");
    }

    #[test]
    fn tuning_slope_is_calibrated() {
        let p = params();
        let slope = p.tuning_slope(PUMP).unwrap();
        assert!((slope - 10.0).abs() < 1e-6, "{slope}");
    }

    #[test]
    fn spectrum_is_symmetric_for_conjugates() {
        let p = params();
        let wls = grid(1500.0, 1625.0, 0.37);
        let spec = spdc_spectrum(PUMP, 51.0, &p, &wls).unwrap();
        let conj: Vec<f64> = wls
            .iter()
            .map(|&w| crate::source::conjugate_wavelength(PUMP, w).unwrap())
            .collect();
        let mut sorted = conj.clone();
        sorted.sort_by(f64::total_cmp);
        let spec_c = spdc_spectrum(PUMP, 51.0, &p, &sorted).unwrap();
        let peak_a = wls
            .iter()
            .map(|&w| phase_mismatch(PUMP, w, 51.0, &p).unwrap())
            .collect::<Vec<_>>();
        for (i, &c) in conj.iter().enumerate() {
            let db = phase_mismatch(PUMP, c, 51.0, &p).unwrap();
            assert_eq!(peak_a[i], db);
        }
        // both grids normalize to (nearly) the same peak; compare raw values
        let max_a = spec.iter().map(|s| s.relative_intensity).fold(0.0, f64::max);
        assert_eq!(max_a, 1.0);
        assert!(spec_c.iter().all(|s| s.relative_intensity <= 1.0));
    }

    #[test]
    fn emission_spans_more_than_sixty_nm() {
        let p = params();
        let wls = grid(1450.0, 1700.0, 0.1);
        let spec = spdc_spectrum(PUMP, p.degenerate_temperature_c + 1.0, &p, &wls).unwrap();
        assert!(usable_span_nm(&spec, 0.01) > 60.0);
    }

    #[test]
    fn lobes_narrow_with_temperature() {
        let p = params();
        let wls = grid(1400.0, 1760.0, 0.05);
        let td = p.degenerate_temperature_c;
        let widths: Vec<f64> = (1..=5)
            .map(|k| {
                let s = spdc_spectrum(PUMP, td + k as f64, &p, &wls).unwrap();
                lobe_fwhm_nm(&s, 2.0 * PUMP).unwrap()
            })
            .collect();
        assert!(widths.windows(2).all(|w| w[1] <= w[0]), "{widths:?}");
        assert!(widths[0] > 30.0, "{widths:?}");
        assert!(widths[4] < 0.5 * widths[0], "{widths:?}");
    }

    #[test]
    fn empty_grid_gives_empty_spectrum() {
        assert!(spdc_spectrum(PUMP, 51.0, &params(), &[]).unwrap().is_empty());
    }

    #[test]
    fn out_of_band_wavelength_is_a_domain_error() {
        assert!(phase_mismatch(PUMP, 5200.0, 51.0, &params()).is_err());
    }
}
