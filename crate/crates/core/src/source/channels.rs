//! Conjugate DWDM channel pairs on the ITU frequency grid.
//!
//! Channel names follow the convention used with the source: a C-side
//! (short-wavelength, high-frequency) channel `Cnn` sits at
//! `190.0 + 0.1 nn` THz; the conjugate L-side channel `Lnn` sits at
//! `180.0 + 0.1 nn` THz modulo 10 THz, so `L00` = 190.0 THz and
//! `L84` = 188.4 THz. A pair is named by concatenation, e.g. `C42L00`.

use serde::{Deserialize, Serialize};

use super::SpectrumSample;
use crate::error::{Error, Result};
use crate::units::{nm_to_thz, C_NM_THZ};

const LABEL_ANCHOR_THZ: f64 = 190.0;
const LABEL_STEP_THZ: f64 = 0.1;

/// Frequency grid `anchor + k * spacing`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItuGrid {
    pub anchor_thz: f64,
    pub spacing_ghz: f64,
}

impl ItuGrid {
    pub fn new(spacing_ghz: f64) -> Result<Self> {
        if !(spacing_ghz > 0.0) {
            return Err(Error::domain("grid spacing must be positive"));
        }
        Ok(Self { anchor_thz: LABEL_ANCHOR_THZ, spacing_ghz })
    }

    pub fn step_thz(&self) -> f64 {
        self.spacing_ghz * 1e-3
    }

    fn index_of(&self, f_thz: f64) -> i64 {
        ((f_thz - self.anchor_thz) / self.step_thz()).round() as i64
    }

    fn freq(&self, k: i64) -> f64 {
        // round to 0.1 GHz so labels and equality are stable
        ((self.anchor_thz + k as f64 * self.step_thz()) * 1e4).round() / 1e4
    }

    pub fn nearest(&self, f_thz: f64) -> f64 {
        self.freq(self.index_of(f_thz))
    }
}

/// Label for one channel centre: `Cnn` above the half pump frequency,
/// `Lnn` below. Frequencies outside the two-digit label range get a
/// plain frequency label.
pub fn channel_label(freq_thz: f64, half_pump_thz: f64) -> String {
    let steps = ((freq_thz - LABEL_ANCHOR_THZ) / LABEL_STEP_THZ).round() as i64;
    if freq_thz >= half_pump_thz {
        if (0..100).contains(&steps) {
            return format!("C{steps:02}");
        }
    } else if (-100..0).contains(&steps) || steps == 0 {
        return format!("L{:02}", steps.rem_euclid(100));
    }
    format!("{freq_thz:.1}THz")
}

fn parse_side(label: &str, prefix: char) -> Option<i64> {
    let rest = label.strip_prefix(prefix)?;
    if rest.len() == 2 && rest.bytes().all(|b| b.is_ascii_digit()) {
        rest.parse().ok()
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPair {
    pub signal_thz: f64,
    pub idler_thz: f64,
    pub label: String,
}

impl ChannelPair {
    pub fn signal_nm(&self) -> f64 {
        C_NM_THZ / self.signal_thz
    }

    pub fn idler_nm(&self) -> f64 {
        C_NM_THZ / self.idler_thz
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelPlan {
    pub grid_spacing_ghz: f64,
    pub channel_fwhm_nm: f64,
    pub pump_thz: f64,
    /// Ordered by ascending signal frequency.
    pub pairs: Vec<ChannelPair>,
}

#[derive(Serialize)]
struct PairRecord<'a> {
    signal_thz: f64,
    idler_thz: f64,
    label: &'a str,
}

impl ChannelPlan {
    fn grid(&self) -> Result<ItuGrid> {
        ItuGrid::new(self.grid_spacing_ghz)
    }

    /// Builds a plan from explicit pair labels such as `C42L00`. The idler is
    /// placed on the grid point nearest the exact conjugate of the signal; an
    /// L-side label, if present, must name that point.
    pub fn from_labels(pump_nm: f64, grid_spacing_ghz: f64, channel_fwhm_nm: f64, labels: &[&str]) -> Result<Self> {
        let grid = ItuGrid::new(grid_spacing_ghz)?;
        let pump_thz = nm_to_thz(pump_nm);
        let mut pairs = Vec::with_capacity(labels.len());
        for &label in labels {
            let (c, l) = label.split_at(label.find('L').unwrap_or(label.len()));
            let nn = parse_side(c, 'C')
                .ok_or_else(|| Error::domain(format!("unrecognised channel label {label:?}")))?;
            let signal_thz = grid.nearest(LABEL_ANCHOR_THZ + LABEL_STEP_THZ * nn as f64);
            let idler_thz = grid.nearest(pump_thz - signal_thz);
            let expected = channel_label(idler_thz, 0.5 * pump_thz);
            if !l.is_empty() && l != expected {
                return Err(Error::domain(format!(
                    "channel {label:?}: conjugate of {c} is {expected} for this pump"
                )));
            }
            pairs.push(ChannelPair { signal_thz, idler_thz, label: format!("{c}{expected}") });
        }
        pairs.sort_by(|a, b| a.signal_thz.total_cmp(&b.signal_thz));
        let plan = Self { grid_spacing_ghz, channel_fwhm_nm, pump_thz, pairs };
        plan.check()?;
        Ok(plan)
    }

    /// Keeps only the named pairs, in plan order. Labels may name the C side
    /// only (`C50`) or the full pair (`C50L92`).
    pub fn select(&self, labels: &[String]) -> Result<Self> {
        let mut keep = Vec::new();
        for l in labels {
            if !self.pairs.iter().any(|p| &p.label == l || p.label.starts_with(l.as_str()) && l.len() == 3) {
                return Err(Error::domain(format!("channel {l:?} is not in the plan")));
            }
        }
        for p in &self.pairs {
            if labels.iter().any(|l| &p.label == l || l.len() == 3 && p.label.starts_with(l.as_str())) {
                keep.push(p.clone());
            }
        }
        Ok(Self { pairs: keep, ..self.clone() })
    }

    /// Pair closest to the middle of the plan (lower of the two for even sizes).
    pub fn central(&self) -> Option<&ChannelPair> {
        if self.pairs.is_empty() {
            None
        } else {
            Some(&self.pairs[(self.pairs.len() - 1) / 2])
        }
    }

    /// Frequency conservation within half a grid step and no shared grid
    /// slots on either arm.
    pub fn check(&self) -> Result<()> {
        let half_step = 0.5 * self.grid()?.step_thz() + 1e-9;
        for p in &self.pairs {
            if (p.signal_thz + p.idler_thz - self.pump_thz).abs() > half_step {
                return Err(Error::Contract(format!("pair {} violates frequency conservation", p.label)));
            }
        }
        let min_sep = self.grid()?.step_thz() - 1e-6;
        let mut sig: Vec<f64> = self.pairs.iter().map(|p| p.signal_thz).collect();
        let mut idl: Vec<f64> = self.pairs.iter().map(|p| p.idler_thz).collect();
        sig.sort_by(f64::total_cmp);
        idl.sort_by(f64::total_cmp);
        for arm in [&sig, &idl] {
            if arm.windows(2).any(|w| w[1] - w[0] < min_sep) {
                return Err(Error::Contract("channels overlap on one arm".into()));
            }
        }
        if let (Some(s), Some(i)) = (sig.first(), idl.last()) {
            if s - i < min_sep {
                return Err(Error::Contract("signal and idler channels overlap".into()));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let recs: Vec<PairRecord> = self
            .pairs
            .iter()
            .map(|p| PairRecord { signal_thz: p.signal_thz, idler_thz: p.idler_thz, label: &p.label })
            .collect();
        serde_json::to_string_pretty(&recs).expect("plain records serialize")
    }
}

fn intensity_at(samples: &[SpectrumSample], wl: f64) -> f64 {
    let i = samples.partition_point(|s| s.wavelength_nm < wl);
    if i == 0 || i == samples.len() {
        return match samples.get(i) {
            Some(s) if s.wavelength_nm == wl => s.relative_intensity,
            _ => 0.0,
        };
    }
    let (a, b) = (&samples[i - 1], &samples[i]);
    let t = (wl - a.wavelength_nm) / (b.wavelength_nm - a.wavelength_nm);
    a.relative_intensity + t * (b.relative_intensity - a.relative_intensity)
}

/// Carves conjugate pairs out of a sampled spectrum: every grid slot above
/// the half pump frequency whose centre and conjugate centre both carry at
/// least `threshold` of the peak intensity.
pub fn channelize(
    spectrum: &[SpectrumSample],
    pump_nm: f64,
    grid_spacing_ghz: f64,
    channel_fwhm_nm: f64,
    threshold: f64,
) -> Result<ChannelPlan> {
    let grid = ItuGrid::new(grid_spacing_ghz)?;
    if spectrum.is_empty() {
        return Err(Error::domain("cannot channelize an empty spectrum"));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::domain("threshold must lie in [0, 1]"));
    }
    let pump_thz = nm_to_thz(pump_nm);
    let half = 0.5 * pump_thz;
    let peak = spectrum.iter().map(|s| s.relative_intensity).fold(0.0, f64::max);
    let level = threshold * peak;
    let f_max = spectrum.iter().map(|s| C_NM_THZ / s.wavelength_nm).fold(f64::MIN, f64::max);
    let step = grid.step_thz();

    let mut pairs = Vec::new();
    let mut k = grid.index_of(half);
    loop {
        let signal_thz = grid.freq(k);
        k += 1;
        if signal_thz > f_max {
            break;
        }
        let idler_thz = grid.nearest(pump_thz - signal_thz);
        if signal_thz - idler_thz < step - 1e-9 {
            continue;
        }
        let ok = intensity_at(spectrum, C_NM_THZ / signal_thz) >= level
            && intensity_at(spectrum, C_NM_THZ / idler_thz) >= level;
        if ok && level > 0.0 {
            let label = format!("{}{}", channel_label(signal_thz, half), channel_label(idler_thz, half));
            pairs.push(ChannelPair { signal_thz, idler_thz, label });
        }
    }
    let plan = ChannelPlan { grid_spacing_ghz, channel_fwhm_nm, pump_thz, pairs };
    plan.check()?;
    Ok(plan)
}
