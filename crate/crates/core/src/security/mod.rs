//! Key-rate accounting (asymptotic and finite-key) and entanglement
//! figures of merit.

mod bell;
mod finite;

pub use bell::{
    chsh_s, correlation_e, phi_plus_correlation, sample_bell_counts, visibility, BellSettings, CorrelationCounts,
    CHSH_SETTINGS,
};
pub use finite::{finite_key, Certificate, Evaluation, FiniteKey, FiniteKeyProblem, NuXiOrder};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Base-2 binary entropy, with `h2(0) = h2(1) = 0`.
pub fn binary_entropy(x: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("binary entropy argument {x} outside [0, 1]")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateInputs {
    pub sifted_z: f64,
    pub sifted_x: f64,
    pub qber_z: f64,
    pub qber_x: f64,
    /// Error-correction inefficiency.
    pub fe: f64,
    pub acquisition_time_s: f64,
}

impl KeyRateInputs {
    /// Splits pooled sifted bits 50/50 between the bases and uses the pooled
    /// QBER for both, for data published without a per-basis breakdown.
    pub fn pooled(sifted: f64, qber: f64, fe: f64, acquisition_time_s: f64) -> Self {
        Self {
            sifted_z: 0.5 * sifted,
            sifted_x: 0.5 * sifted,
            qber_z: qber,
            qber_x: qber,
            fe,
            acquisition_time_s,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sifted_z >= 0.0 && self.sifted_x >= 0.0) {
            return Err(Error::domain("sifted counts must be non-negative"));
        }
        if !(self.fe >= 1.0) {
            return Err(Error::domain("error-correction inefficiency must be >= 1"));
        }
        if !(self.acquisition_time_s > 0.0) {
            return Err(Error::domain("acquisition time must be positive"));
        }
        binary_entropy(self.qber_z)?;
        binary_entropy(self.qber_x)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticKey {
    pub secure_bits: f64,
    pub rate_bits_per_s: f64,
}

/// `R = Q_Z [1 - fe h(E_Z) - h(E_X)] + Q_X [1 - fe h(E_X) - h(E_Z)]`, each basis
/// clamped at zero.
pub fn asymptotic_key(inputs: &KeyRateInputs) -> Result<AsymptoticKey> {
    inputs.validate()?;
    let hz = binary_entropy(inputs.qber_z)?;
    let hx = binary_entropy(inputs.qber_x)?;
    let rz = inputs.sifted_z * (1.0 - inputs.fe * hz - hx).max(0.0);
    let rx = inputs.sifted_x * (1.0 - inputs.fe * hx - hz).max(0.0);
    let secure_bits = rz + rx;
    Ok(AsymptoticKey { secure_bits, rate_bits_per_s: secure_bits / inputs.acquisition_time_s })
}

/// Fraction of sifted bits that survive asymptotically at a pooled QBER.
pub fn asymptotic_fraction(qber: f64, fe: f64) -> Result<f64> {
    let h = binary_entropy(qber)?;
    Ok((1.0 - (fe + 1.0) * h).max(0.0))
}
