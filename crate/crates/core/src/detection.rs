//! Analytic detection chain: jitter, singles, coincidences, QBER.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorSpec {
    pub efficiency: f64,
    /// Dark counts per second summed over the arm's detectors.
    pub dark_rate_cps: f64,
    pub jitter_fwhm_ps: f64,
}

impl DetectorSpec {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::domain("detector efficiency must lie in [0, 1]"));
        }
        if !(self.dark_rate_cps >= 0.0 && self.jitter_fwhm_ps >= 0.0) {
            return Err(Error::domain("dark rate and jitter must be non-negative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct JitterChain {
    pub components: Vec<(String, f64)>,
}

impl JitterChain {
    pub fn from_fwhms(fwhms: &[f64]) -> Self {
        Self {
            components: fwhms.iter().enumerate().map(|(i, &f)| (format!("c{i}"), f)).collect(),
        }
    }
}

/// Root-sum-square of the component FWHMs.
pub fn combine_jitter(chain: &JitterChain) -> Result<f64> {
    if chain.components.is_empty() {
        return Err(Error::domain("jitter chain is empty"));
    }
    Ok(chain.components.iter().map(|(_, f)| f * f).sum::<f64>().sqrt())
}

pub fn singles_rate(pair_rate: f64, arm_transmittance: f64, arm_efficiency: f64, dark_rate: f64) -> f64 {
    pair_rate * arm_transmittance * arm_efficiency + dark_rate
}

/// Fraction of a Gaussian coincidence peak of FWHM `delta_t_ps` inside a
/// centred gate of width `window_ps`.
pub fn window_fraction(window_ps: f64, delta_t_ps: f64) -> f64 {
    if delta_t_ps <= 0.0 {
        return if window_ps > 0.0 { 1.0 } else { 0.0 };
    }
    libm::erf(window_ps * std::f64::consts::LN_2.sqrt() / delta_t_ps)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceRates {
    pub true_rate: f64,
    pub accidental_rate: f64,
}

/// True and accidental coincidence rates for one channel pair. Singles here
/// are photon singles (dark counts excluded; see [`dark_coincidence_rate`]).
#[allow(clippy::too_many_arguments)]
pub fn coincidence_rates(
    pair_rate: f64,
    trans_a: f64,
    trans_b: f64,
    eff_a: f64,
    eff_b: f64,
    singles_a: f64,
    singles_b: f64,
    window_ps: f64,
    delta_t_ps: f64,
) -> Result<CoincidenceRates> {
    if !(window_ps > 0.0) {
        return Err(Error::domain("coincidence window must be positive"));
    }
    let w = window_ps * 1e-12;
    Ok(CoincidenceRates {
        true_rate: pair_rate * trans_a * trans_b * eff_a * eff_b * window_fraction(window_ps, delta_t_ps),
        accidental_rate: singles_a * singles_b * w,
    })
}

/// Coincidences involving at least one dark count.
pub fn dark_coincidence_rate(dark_a: f64, dark_b: f64, singles_a: f64, singles_b: f64, window_ps: f64) -> f64 {
    (dark_a * singles_b + dark_b * singles_a + dark_a * dark_b) * window_ps * 1e-12
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QberBreakdown {
    pub e_pol_pp: f64,
    pub e_acc_pp: f64,
    pub e_dark_pp: f64,
    pub total_pp: f64,
}

impl QberBreakdown {
    pub fn total(&self) -> f64 {
        self.total_pp / 100.0
    }
}

/// Uncorrelated coincidences are wrong half the time; true ones with
/// probability `e_pol`.
pub fn predict_qber(true_rate: f64, accidental_rate: f64, dark_coinc_rate: f64, e_pol: f64) -> Result<QberBreakdown> {
    if !(true_rate >= 0.0 && accidental_rate >= 0.0 && dark_coinc_rate >= 0.0) {
        return Err(Error::domain("rates must be non-negative"));
    }
    if !(0.0..=1.0).contains(&e_pol) {
        return Err(Error::domain("e_pol must lie in [0, 1]"));
    }
    let total = true_rate + accidental_rate + dark_coinc_rate;
    if total <= 0.0 {
        return Err(Error::domain("QBER undefined without coincidences"));
    }
    let e_pol_pp = 100.0 * e_pol * true_rate / total;
    let e_acc_pp = 100.0 * 0.5 * accidental_rate / total;
    let e_dark_pp = 100.0 * 0.5 * dark_coinc_rate / total;
    Ok(QberBreakdown { e_pol_pp, e_acc_pp, e_dark_pp, total_pp: e_pol_pp + e_acc_pp + e_dark_pp })
}

/// `e_pol` that brings the pooled QBER of the given channel rates to `target`.
pub fn calibrate_e_pol(rates: &[(f64, f64, f64)], target: f64) -> Result<f64> {
    let (t, a, d) = rates.iter().fold((0.0, 0.0, 0.0), |s, r| (s.0 + r.0, s.1 + r.1, s.2 + r.2));
    if !(t > 0.0) {
        return Err(Error::domain("no true coincidences to calibrate against"));
    }
    let e = (target * (t + a + d) - 0.5 * (a + d)) / t;
    if !(0.0..=1.0).contains(&e) {
        return Err(Error::Fit(format!("target QBER {target} unreachable (e_pol would be {e:.4})")));
    }
    Ok(e)
}

/// Passive 50:50 basis choice on both sides.
pub fn sifted_fraction() -> f64 {
    0.5
}

pub fn sifted_bits(raw: u64) -> u64 {
    raw / 2
}
