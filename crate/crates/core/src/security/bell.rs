use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coincidence counts for one pair of analyser settings; `+`/`-` are the
/// two outcomes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationCounts {
    pub n_pp: u64,
    pub n_pm: u64,
    pub n_mp: u64,
    pub n_mm: u64,
}

impl CorrelationCounts {
    pub fn total(&self) -> u64 {
        self.n_pp + self.n_pm + self.n_mp + self.n_mm
    }
}

pub fn correlation_e(c: &CorrelationCounts) -> Result<f64> {
    let total = c.total();
    if total == 0 {
        return Err(Error::domain("correlation undefined without counts"));
    }
    Ok(((c.n_pp + c.n_mm) as f64 - (c.n_pm + c.n_mp) as f64) / total as f64)
}

/// Analyser angles `(phi1, phi2)` for `(a,b), (a,b'), (a',b), (a',b')` and the
/// correlation measured at each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BellSettings {
    pub angles: [(f64, f64); 4],
    pub e: [f64; 4],
}

pub const CHSH_SETTINGS: [(f64, f64); 4] = [
    (0.0, std::f64::consts::FRAC_PI_8),
    (0.0, 3.0 * std::f64::consts::FRAC_PI_8),
    (std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_8),
    (std::f64::consts::FRAC_PI_4, 3.0 * std::f64::consts::FRAC_PI_8),
];

impl BellSettings {
    /// Correlations of a Phi+ state with fringe visibility `v`.
    pub fn phi_plus(angles: [(f64, f64); 4], v: f64) -> Self {
        Self { angles, e: angles.map(|(a, b)| phi_plus_correlation(a, b, v)) }
    }
}

/// `E = V cos 2(phi1 - phi2)`.
pub fn phi_plus_correlation(phi1: f64, phi2: f64, visibility: f64) -> f64 {
    visibility * (2.0 * (phi1 - phi2)).cos()
}

/// `S = |E(a,b) - E(a,b') + E(a',b) + E(a',b')|`.
pub fn chsh_s(s: &BellSettings) -> f64 {
    let [ab, abp, apb, apbp] = s.e;
    (ab - abp + apb + apbp).abs()
}

/// `(correct - error) / (correct + error)` in one basis.
pub fn visibility(correct: u64, error: u64) -> Result<f64> {
    let total = correct + error;
    if total == 0 {
        return Err(Error::domain("visibility undefined without counts"));
    }
    Ok((correct as f64 - error as f64) / total as f64)
}

/// Multinomial sample of `pairs` coincidences with `P(++) = P(--) = (1+E)/4`.
pub fn sample_bell_counts(e: f64, pairs: u64, seed: u64) -> CorrelationCounts {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p_same = 0.5 * (1.0 + e);
    let mut c = CorrelationCounts::default();
    for _ in 0..pairs {
        let same = rng.gen_bool(p_same.clamp(0.0, 1.0));
        let first = rng.gen_bool(0.5);
        match (same, first) {
            (true, true) => c.n_pp += 1,
            (true, false) => c.n_mm += 1,
            (false, true) => c.n_pm += 1,
            (false, false) => c.n_mp += 1,
        }
    }
    c
}
