//! Monte Carlo run of a scenario: timetags per channel, coincidence
//! tallies, peak fits, and the analytic prediction for the same settings.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::scenario::{channel_rates_at, ChannelRates, Scenario};
use crate::timetag::{
    find_coincidences, fit_coincidence_peak, simulate_channel, tally_outcomes, ChannelSim, OutcomeSummary, TimetagStream,
};
use crate::{Error, Result};

/// Off-peak offset used to count accidentals, ps.
pub const ACCIDENTAL_PROBE_PS: i64 = 200_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimChannelReport {
    pub label: String,
    pub events_a: usize,
    pub events_b: usize,
    pub window_ps: u64,
    pub offset_ps: i64,
    pub summary: OutcomeSummary,
    /// Coincidences in an equal window far from the peak.
    pub off_peak: u64,
    pub predicted: ChannelRates,
    pub predicted_fwhm_ps: f64,
    pub fit_fwhm_ps: Option<f64>,
    pub fit_center_ps: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimAggregate {
    pub raw: u64,
    pub sifted: u64,
    pub sifted_fraction: f64,
    pub errors: u64,
    pub qber: Option<f64>,
    pub predicted_qber: f64,
    pub off_peak: u64,
    /// Predicted uncorrelated (accidental + dark) coincidences per window.
    pub predicted_off_peak: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub duration_s: f64,
    pub seed: u64,
    pub loss_offset_db: f64,
    pub channels: Vec<SimChannelReport>,
    pub aggregate: SimAggregate,
}

/// The scenario with the two-photon loss shifted by the simulation's offset
/// and shared equally between the arms.
///
/// Accidental-to-true ratios depend only on the product of the arm
/// transmittances, so balancing costs nothing in fidelity and minimizes the
/// number of singles needed for a given coincidence count.
pub fn scaled_scenario(s: &Scenario) -> Scenario {
    let mut scaled = s.clone();
    let (la, lb) = (s.link.arm_a.total_loss_db(), s.link.arm_b.total_loss_db());
    let each = 0.5 * (la + lb + s.config.simulation.loss_offset_db);
    scaled.link.arm_a.endpoint_losses.wdm_db += each - la;
    scaled.link.arm_b.endpoint_losses.wdm_db += each - lb;
    scaled
}

/// Per-channel Monte Carlo inputs and the analytic rates they should reproduce.
pub fn channel_sims(s: &Scenario) -> Result<Vec<(ChannelSim, ChannelRates)>> {
    let scaled = scaled_scenario(s);
    let (da, db) = scaled.detectors();
    let (ta, tb) = scaled.transmittances();
    let d = &s.config.detection;
    let gd = s.config.link.group_delay_ps_per_km;
    let delay = (gd * (s.link.arm_b.length_km() - s.link.arm_a.length_km())).round() as i64;
    scaled
        .timing()?
        .into_iter()
        .enumerate()
        .map(|(i, (disp, t))| {
            let net = t.sigma_da_ps + t.sigma_db_ps + t.sigma_c_ps;
            let (ja, jb) = ChannelSim::split_jitter(t.sigma0_ps, net);
            let sim = ChannelSim {
                label: disp.label.clone(),
                index: i as u32,
                pair_rate: scaled.pair_rate(),
                detect_a: ta * da.efficiency,
                detect_b: tb * db.efficiency,
                dark_a: d.dark_rate_a_cps,
                dark_b: d.dark_rate_b_cps,
                jitter_a_fwhm_ps: ja,
                jitter_b_fwhm_ps: jb,
                delay_b_ps: delay,
                e_pol: d.e_pol,
            };
            let gate = (d.gate_fwhm_multiple * t.delta_t_ps).round();
            let rates = channel_rates_at(&scaled, &disp.label, scaled.pair_rate(), t.delta_t_ps, gate)?;
            Ok((sim, rates))
        })
        .collect()
}

/// Runs every channel in parallel; results depend only on `(scenario, seed)`.
pub fn simulate(s: &Scenario, seed: u64) -> Result<(SimReport, Vec<(TimetagStream, TimetagStream)>)> {
    let cfg = &s.config.simulation;
    let duration = cfg.duration_s;
    let sims = channel_sims(s)?;
    let out: Vec<(SimChannelReport, (TimetagStream, TimetagStream))> = sims
        .par_iter()
        .map(|(sim, rates)| {
            let (a, b) = simulate_channel(sim, duration, seed)?;
            let window = rates.gate_ps as u64;
            let offset = sim.delay_b_ps;
            let tally = find_coincidences(&a, &b, window, offset)?;
            let off = find_coincidences(&a, &b, window, offset + ACCIDENTAL_PROBE_PS)?;
            let fit = fit_coincidence_peak(&a, &b, cfg.bin_width_ps, cfg.span_ps, offset).ok();
            let report = SimChannelReport {
                label: sim.label.clone(),
                events_a: a.events.len(),
                events_b: b.events.len(),
                window_ps: window,
                offset_ps: offset,
                summary: tally_outcomes(&tally),
                off_peak: off.total(),
                predicted: rates.clone(),
                predicted_fwhm_ps: rates.delta_t_ps,
                fit_fwhm_ps: fit.as_ref().map(|f| f.fit_fwhm_ps),
                fit_center_ps: fit.as_ref().map(|f| f.fit_center_ps),
            };
            Ok((report, (a, b)))
        })
        .collect::<Result<_>>()?;
    let (channels, streams): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    let raw: u64 = channels.iter().map(|c| c.summary.raw).sum();
    let sifted: u64 = channels.iter().map(|c| c.summary.sifted).sum();
    let errors: u64 = channels.iter().map(|c| c.summary.errors_z + c.summary.errors_x).sum();
    let (mut err, mut tot) = (0.0, 0.0);
    for c in &channels {
        err += c.predicted.qber.total() * c.predicted.total_rate;
        tot += c.predicted.total_rate;
    }
    if !(tot > 0.0) {
        return Err(Error::domain("no coincidences expected; check the link"));
    }
    let predicted_off_peak = channels
        .iter()
        .map(|c| (c.predicted.accidental_rate + c.predicted.dark_rate) * duration)
        .sum();
    let aggregate = SimAggregate {
        raw,
        sifted,
        sifted_fraction: if raw > 0 { sifted as f64 / raw as f64 } else { 0.0 },
        errors,
        qber: (sifted > 0).then(|| errors as f64 / sifted as f64),
        predicted_qber: err / tot,
        off_peak: channels.iter().map(|c| c.off_peak).sum(),
        predicted_off_peak,
    };
    Ok((SimReport { duration_s: duration, seed, loss_offset_db: cfg.loss_offset_db, channels, aggregate }, streams))
}
