//! Pair-rate / gate-width sweep of the key rate, and what-if comparisons
//! between two scenarios.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detection::{coincidence_rates, dark_coincidence_rate, predict_qber};
use crate::scenario::{channel_rates_at, Scenario};
use crate::security::{binary_entropy, finite_key, FiniteKeyProblem, NuXiOrder};
use crate::{Error, Result};

/// Photon transport of one channel, independent of the pair rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelLink {
    pub label: String,
    pub trans_a: f64,
    pub trans_b: f64,
    pub eff_a: f64,
    pub eff_b: f64,
    pub dark_a: f64,
    pub dark_b: f64,
    pub delta_t_ps: f64,
}

/// What the sweep maximizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    Asymptotic,
    /// Finite-key rate of one block pooled over all channels and collected
    /// for `duration_s`.
    Finite { duration_s: f64, s: u32, order: NuXiOrder },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Pair rates per channel, pairs/s.
    pub rates: Vec<f64>,
    pub widths_ps: Vec<f64>,
    pub channels: Vec<ChannelLink>,
    pub e_pol: f64,
    pub fe: f64,
    pub objective: Objective,
}

impl SweepSpec {
    /// Log-spaced rate grid with the scenario's links; `delta_t_ps > 0`
    /// overrides every channel's coincidence width.
    pub fn from_scenario(s: &Scenario) -> Result<Self> {
        let o = &s.config.optimizer;
        let (da, db) = s.detectors();
        let (ta, tb) = s.transmittances();
        let channels = s
            .timing()?
            .into_iter()
            .map(|(d, t)| ChannelLink {
                label: d.label,
                trans_a: ta,
                trans_b: tb,
                eff_a: da.efficiency,
                eff_b: db.efficiency,
                dark_a: da.dark_rate_cps,
                dark_b: db.dark_rate_cps,
                delta_t_ps: if o.delta_t_ps > 0.0 { o.delta_t_ps } else { t.delta_t_ps },
            })
            .collect();
        let a = &s.config.analysis;
        let objective = match o.objective.as_str() {
            "asymptotic" => Objective::Asymptotic,
            "finite" => Objective::Finite { duration_s: a.acquisition_time_s, s: a.security_exponent, order: a.nu_xi_order.parse()? },
            other => return Err(Error::domain(format!("unknown sweep objective {other:?}"))),
        };
        Ok(Self {
            rates: log_grid(o.rate_min_pairs_per_s, o.rate_max_pairs_per_s, o.rate_points),
            widths_ps: o.gate_widths_ps.clone(),
            channels,
            e_pol: s.config.detection.e_pol,
            fe: a.fe,
            objective,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.rates.is_empty() || self.widths_ps.is_empty() || self.channels.is_empty() {
            return Err(Error::domain("sweep grids and channel list must be non-empty"));
        }
        if self.rates.iter().chain(&self.widths_ps).any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::domain("rates and widths must be positive"));
        }
        if let Objective::Finite { duration_s, .. } = self.objective {
            if !(duration_s > 0.0 && duration_s.is_finite()) {
                return Err(Error::domain("finite-key sweeps need a positive acquisition time"));
            }
        }
        Ok(())
    }
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![lo];
    }
    let (a, b) = (lo.log10(), hi.log10());
    (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub rate: f64,
    pub width_ps: f64,
    /// Pooled over channels.
    pub qber: f64,
    /// Summed over channels, bits/s.
    pub skr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rates: Vec<f64>,
    pub widths_ps: Vec<f64>,
    /// Rate-major: `points[i * widths.len() + j]`.
    pub points: Vec<SweepPoint>,
    pub argmax: SweepPoint,
}

impl SweepResult {
    pub fn at(&self, rate_index: usize, width_index: usize) -> &SweepPoint {
        &self.points[rate_index * self.widths_ps.len() + width_index]
    }

    pub fn surface_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt = |e: csv::Error| Error::Format(e.to_string());
        w.write_record(["rate", "width", "qber", "skr"]).map_err(fmt)?;
        for p in &self.points {
            w.write_record([p.rate.to_string(), p.width_ps.to_string(), p.qber.to_string(), p.skr.to_string()])
                .map_err(fmt)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Format(e.to_string()))?)
            .map_err(|e| Error::Format(e.to_string()))
    }
}

/// `(skr, qber)` of all channels at one grid point.
fn evaluate(spec: &SweepSpec, rate: f64, width: f64) -> Result<(f64, f64)> {
    let (mut skr, mut err, mut total) = (0.0, 0.0, 0.0);
    for c in &spec.channels {
        let sa = rate * c.trans_a * c.eff_a;
        let sb = rate * c.trans_b * c.eff_b;
        let r = coincidence_rates(rate, c.trans_a, c.trans_b, c.eff_a, c.eff_b, sa, sb, width, c.delta_t_ps)
            .expect("validated width");
        let dark = dark_coincidence_rate(c.dark_a, c.dark_b, sa, sb, width);
        let n = r.true_rate + r.accidental_rate + dark;
        let Ok(q) = predict_qber(r.true_rate, r.accidental_rate, dark, spec.e_pol) else { continue };
        let q = q.total();
        let h = binary_entropy(q.min(1.0)).unwrap_or(1.0);
        skr += n * 0.5 * (1.0 - spec.fe * h - h).max(0.0);
        err += q * n;
        total += n;
    }
    let qber = if total > 0.0 { err / total } else { 0.0 };
    if let Objective::Finite { duration_s, s, order } = spec.objective {
        // half the coincidences survive sifting
        let m = (0.5 * total * duration_s).floor() as u64;
        if qber >= 0.5 {
            return Ok((0.0, qber));
        }
        let p = FiniteKeyProblem { m, delta: qber, s, leak_factor: spec.fe, order };
        skr = finite_key(&p)?.secure_bits as f64 / duration_s;
    }
    Ok((skr, qber))
}

/// Full grid evaluation. The argmax is the largest SKR, ties going to the
/// smaller rate and then the smaller width.
pub fn sweep_skr(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut rates = spec.rates.clone();
    let mut widths = spec.widths_ps.clone();
    rates.sort_by(f64::total_cmp);
    rates.dedup();
    widths.sort_by(f64::total_cmp);
    widths.dedup();
    let points: Vec<SweepPoint> = (0..rates.len() * widths.len())
        .into_par_iter()
        .map(|k| {
            let (rate, width_ps) = (rates[k / widths.len()], widths[k % widths.len()]);
            let (skr, qber) = evaluate(spec, rate, width_ps)?;
            Ok(SweepPoint { rate, width_ps, qber, skr })
        })
        .collect::<Result<_>>()?;
    let mut argmax = points[0];
    for p in &points[1..] {
        if p.skr > argmax.skr {
            argmax = *p;
        }
    }
    Ok(SweepResult { rates, widths_ps: widths, points, argmax })
}

/// Number of sign changes of the discrete derivative along the rate axis
/// at one width (zero steps ignored).
pub fn rate_slope_sign_changes(result: &SweepResult, width_index: usize) -> usize {
    let col: Vec<f64> = (0..result.rates.len()).map(|i| result.at(i, width_index).skr).collect();
    let signs: Vec<f64> = col.windows(2).map(|w| w[1] - w[0]).filter(|d| *d != 0.0).map(f64::signum).collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelDelta {
    pub label: String,
    pub base_skr: f64,
    pub edited_skr: f64,
    pub delta: f64,
    pub base_residual_ps: f64,
    pub edited_residual_ps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIf {
    /// At each scenario's configured pair rate and gate.
    pub per_channel: Vec<ChannelDelta>,
    pub base_skr: f64,
    pub edited_skr: f64,
    pub delta_skr: f64,
    pub base_optimum: SweepPoint,
    pub edited_optimum: SweepPoint,
}

fn operating_skr(s: &Scenario) -> Result<Vec<(String, f64, f64)>> {
    let fe = s.config.analysis.fe;
    let g = s.config.detection.gate_fwhm_multiple;
    s.timing()?
        .iter()
        .map(|(d, t)| {
            let c = channel_rates_at(s, &d.label, s.pair_rate(), t.delta_t_ps, g * t.delta_t_ps)?;
            let h = binary_entropy(c.qber.total())?;
            Ok((d.label.clone(), c.total_rate * 0.5 * (1.0 - fe * h - h).max(0.0), d.residual_ps))
        })
        .collect()
}

/// Compares an edited scenario against a base, channel by channel (matched
/// by label) and at both sweep optima.
pub fn what_if(base: &Scenario, edited: &Scenario) -> Result<WhatIf> {
    let b = operating_skr(base)?;
    let e = operating_skr(edited)?;
    let per_channel: Vec<ChannelDelta> = b
        .iter()
        .filter_map(|(label, bs, br)| {
            e.iter().find(|x| &x.0 == label).map(|(_, es, er)| ChannelDelta {
                label: label.clone(),
                base_skr: *bs,
                edited_skr: *es,
                delta: es - bs,
                base_residual_ps: *br,
                edited_residual_ps: *er,
            })
        })
        .collect();
    let base_skr: f64 = b.iter().map(|x| x.1).sum();
    let edited_skr: f64 = e.iter().map(|x| x.1).sum();
    Ok(WhatIf {
        per_channel,
        base_skr,
        edited_skr,
        delta_skr: edited_skr - base_skr,
        base_optimum: sweep_skr(&SweepSpec::from_scenario(base)?)?.argmax,
        edited_optimum: sweep_skr(&SweepSpec::from_scenario(edited)?)?.argmax,
    })
}
