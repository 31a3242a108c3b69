//! Monte Carlo timetags, coincidence finding, histogram fitting.

mod coincidence;
mod fit;
mod io;
mod sim;

pub use coincidence::{find_coincidences, tally_outcomes, CoincidenceTally, OutcomeSummary};
pub use fit::{fit_coincidence_peak, histogram, histogram_csv, HistogramFit};
pub use io::{read_stream, write_stream, StreamHeader};
pub use sim::{simulate_channel, ChannelSim};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Arm {
    A,
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Basis {
    Z,
    X,
}

/// One of the eight logical detectors of a channel pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DetectorId {
    pub arm: Arm,
    pub basis: Basis,
    pub outcome: u8,
}

impl DetectorId {
    pub fn new(arm: Arm, basis: Basis, outcome: u8) -> Self {
        Self { arm, basis, outcome: outcome & 1 }
    }

    /// Packed as `arm << 2 | basis << 1 | outcome`.
    pub fn code(self) -> u8 {
        ((self.arm as u8) << 2) | ((self.basis as u8) << 1) | self.outcome
    }

    pub fn from_code(code: u8) -> Result<Self> {
        if code > 7 {
            return Err(Error::Format(format!("detector code {code} out of range")));
        }
        let arm = if code & 4 == 0 { Arm::A } else { Arm::B };
        let basis = if code & 2 == 0 { Basis::Z } else { Basis::X };
        Ok(Self::new(arm, basis, code & 1))
    }

    /// Row/column index `basis * 2 + outcome` within one arm.
    pub fn local_index(self) -> usize {
        ((self.basis as usize) << 1) | self.outcome as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Event {
    pub time_ps: u64,
    pub detector: DetectorId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimetagStream {
    pub events: Vec<Event>,
    pub duration_s: f64,
    pub channel: String,
}

impl TimetagStream {
    pub fn is_sorted(&self) -> bool {
        self.events.windows(2).all(|w| w[0].time_ps <= w[1].time_ps)
    }

    pub fn duration_ps(&self) -> u64 {
        (self.duration_s * 1e12).round() as u64
    }

    /// Sorted and inside `[0, duration)`.
    pub fn is_legal(&self) -> bool {
        let end = self.duration_ps();
        self.is_sorted() && self.events.iter().all(|e| e.time_ps < end)
    }

    pub fn rate(&self) -> f64 {
        self.events.len() as f64 / self.duration_s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn detector_codes_round_trip() {
        for code in 0..8u8 {
            assert_eq!(DetectorId::from_code(code).unwrap().code(), code);
        }
        assert!(DetectorId::from_code(8).is_err());
        assert_eq!(DetectorId::new(Arm::B, Basis::X, 1).code(), 7);
    }
}
