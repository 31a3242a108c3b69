use serde::{Deserialize, Serialize};

use super::TimetagStream;
use crate::error::{Error, Result};

/// Coincidence counts indexed `[basis_a * 2 + outcome_a][basis_b * 2 + outcome_b]`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CoincidenceTally {
    pub counts: [[u64; 4]; 4],
    pub window_ps: u64,
    pub offset_ps: i64,
}

impl CoincidenceTally {
    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Element-wise sum; tallies of different channels aggregate in any order.
    pub fn merge(&mut self, other: &CoincidenceTally) {
        for (r, o) in self.counts.iter_mut().zip(&other.counts) {
            for (c, v) in r.iter_mut().zip(o) {
                *c += v;
            }
        }
    }
}

/// Greedy nearest-neighbour matching: A events are taken in time order and
/// each claims the closest still-unclaimed B event with
/// `|tB - tA - offset| <= window / 2` (earlier B on a tie).
pub fn find_coincidences(a: &TimetagStream, b: &TimetagStream, window_ps: u64, offset_ps: i64) -> Result<CoincidenceTally> {
    if !a.is_sorted() || !b.is_sorted() {
        return Err(Error::Contract("timetag streams must be sorted".into()));
    }
    let mut tally = CoincidenceTally { window_ps, offset_ps, ..Default::default() };
    let bt: Vec<i128> = b.events.iter().map(|e| e.time_ps as i128 - offset_ps as i128).collect();
    let mut used = vec![false; bt.len()];
    let w = window_ps as i128;
    let mut lo = 0usize;
    for ea in &a.events {
        let ta = ea.time_ps as i128;
        while lo < bt.len() && 2 * (ta - bt[lo]) > w {
            lo += 1;
        }
        let mut best: Option<(i128, usize)> = None;
        let mut j = lo;
        while j < bt.len() && 2 * (bt[j] - ta) <= w {
            if !used[j] {
                let d = (bt[j] - ta).abs();
                if best.is_none_or(|(bd, _)| d < bd) {
                    best = Some((d, j));
                }
            }
            j += 1;
        }
        if let Some((_, j)) = best {
            used[j] = true;
            let eb = &b.events[j];
            tally.counts[ea.detector.local_index()][eb.detector.local_index()] += 1;
        }
    }
    Ok(tally)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutcomeSummary {
    pub raw: u64,
    pub sifted: u64,
    pub sifted_z: u64,
    pub sifted_x: u64,
    pub errors_z: u64,
    pub errors_x: u64,
    /// `None` when the basis has no sifted events.
    pub qber_z: Option<f64>,
    pub qber_x: Option<f64>,
    pub qber_total: Option<f64>,
}

/// Raw, sifted and error counts. For Phi+ both bases correlate, so errors
/// are the anti-correlated same-basis entries.
pub fn tally_outcomes(t: &CoincidenceTally) -> OutcomeSummary {
    let c = &t.counts;
    let sifted_z = c[0][0] + c[0][1] + c[1][0] + c[1][1];
    let sifted_x = c[2][2] + c[2][3] + c[3][2] + c[3][3];
    let errors_z = c[0][1] + c[1][0];
    let errors_x = c[2][3] + c[3][2];
    let ratio = |e: u64, s: u64| if s == 0 { None } else { Some(e as f64 / s as f64) };
    OutcomeSummary {
        raw: t.total(),
        sifted: sifted_z + sifted_x,
        sifted_z,
        sifted_x,
        errors_z,
        errors_x,
        qber_z: ratio(errors_z, sifted_z),
        qber_x: ratio(errors_x, sifted_x),
        qber_total: ratio(errors_z + errors_x, sifted_z + sifted_x),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Arm, Basis, DetectorId, Event};
    use super::*;

    fn stream(times: &[u64], arm: Arm) -> TimetagStream {
        TimetagStream {
            events: times.iter().map(|&t| Event { time_ps: t, detector: DetectorId::new(arm, Basis::Z, 0) }).collect(),
            duration_s: 1.0,
            channel: "t".into(),
        }
    }

    #[test]
    fn identical_streams_match_fully() {
        let t = [5, 100, 2_000, 2_001, 9_000];
        let tally = find_coincidences(&stream(&t, Arm::A), &stream(&t, Arm::B), 1, 0).unwrap();
        assert_eq!(tally.total(), t.len() as u64);
    }

    #[test]
    fn nearest_unclaimed_partner_wins() {
        let a = stream(&[100, 104], Arm::A);
        let b = stream(&[101, 103], Arm::B);
        // A@100 claims 101, A@104 claims 103
        let tally = find_coincidences(&a, &b, 10, 0).unwrap();
        assert_eq!(tally.total(), 2);
        let b = stream(&[103], Arm::B);
        assert_eq!(find_coincidences(&a, &b, 10, 0).unwrap().total(), 1);
    }

    #[test]
    fn window_edge_is_inclusive() {
        let a = stream(&[1000], Arm::A);
        assert_eq!(find_coincidences(&a, &stream(&[1050], Arm::B), 100, 0).unwrap().total(), 1);
        assert_eq!(find_coincidences(&a, &stream(&[1051], Arm::B), 100, 0).unwrap().total(), 0);
    }

    #[test]
    fn unsorted_input_is_rejected() {
        let a = stream(&[5, 1], Arm::A);
        assert!(matches!(find_coincidences(&a, &stream(&[1], Arm::B), 10, 0), Err(Error::Contract(_))));
    }

    #[test]
    fn empty_sifting_is_signalled() {
        let mut t = CoincidenceTally::default();
        t.counts[0][2] = 9; // cross-basis only
        let s = tally_outcomes(&t);
        assert_eq!(s.raw, 9);
        assert_eq!(s.sifted, 0);
        assert!(s.qber_total.is_none());
    }

    #[test]
    fn perfect_correlation_has_zero_qber() {
        let mut t = CoincidenceTally::default();
        t.counts[0][0] = 10;
        t.counts[3][3] = 7;
        let s = tally_outcomes(&t);
        assert_eq!(s.qber_total, Some(0.0));
        assert_eq!(s.sifted, 17);
    }
}
