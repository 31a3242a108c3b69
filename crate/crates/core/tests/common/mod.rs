//! Test-side oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use wdmqkd::security::{binary_entropy, Certificate, FiniteKeyProblem};
use wdmqkd::timetag::{Arm, Basis, DetectorId, Event, TimetagStream};

pub fn random_stream(rng: &mut impl Rng, arm: Arm, n: usize, span: u64) -> TimetagStream {
    let mut events: Vec<Event> = (0..n)
        .map(|_| Event {
            time_ps: rng.gen_range(0..span),
            detector: DetectorId::new(arm, if rng.gen() { Basis::Z } else { Basis::X }, rng.gen_range(0..2)),
        })
        .collect();
    events.sort();
    TimetagStream { events, duration_s: span as f64 * 1e-12, channel: "t".into() }
}

/// Quadratic reference for the greedy matcher.
pub fn brute_force(a: &TimetagStream, b: &TimetagStream, window: u64, offset: i64) -> [[u64; 4]; 4] {
    let mut used = vec![false; b.events.len()];
    let mut counts = [[0u64; 4]; 4];
    for ea in &a.events {
        let mut best: Option<(i128, usize)> = None;
        for (j, eb) in b.events.iter().enumerate() {
            let d = eb.time_ps as i128 - offset as i128 - ea.time_ps as i128;
            if used[j] || 2 * d.abs() > window as i128 {
                continue;
            }
            if best.is_none_or(|(bd, _)| d.abs() < bd) {
                best = Some((d.abs(), j));
            }
        }
        if let Some((_, j)) = best {
            used[j] = true;
            counts[ea.detector.local_index()][b.events[j].detector.local_index()] += 1;
        }
    }
    counts
}

/// Independent check that a returned certificate satisfies every constraint.
pub fn replay(p: &FiniteKeyProblem, ell: u64, c: &Certificate) -> bool {
    let m = p.m as f64;
    let (beta, nu, xi) = (c.beta, c.nu, c.xi);
    let k = (beta * m).floor();
    let n = m - k;
    let m_err = (m * (p.delta + xi)).ceil();
    let gamma = f64::max(1.0 / (n + 1.0) + 1.0 / (k + 1.0), 1.0 / (m_err + 1.0) + 1.0 / (m - m_err + 1.0));
    let nup = nu - xi;
    let eps_pe = ((-2.0 * m * k * xi * xi / (n + 1.0)).exp() + (-2.0 * gamma * (n * n * nup * nup - 1.0)).exp()).sqrt();
    let t = (p.s as f64 + 2.0) * 10f64.log2();
    let r = 1.09 * binary_entropy(p.delta).unwrap() * n;
    let eps_pa = 0.5 * (2f64.powf(-n * (1.0 - binary_entropy(p.delta + nu).unwrap()) + r + t + ell as f64)).sqrt();
    let eps = 10f64.powi(-(p.s as i32));
    let shape = beta > 0.0 && beta <= 0.5 && 0.0 < xi && xi < nu && nu < 0.5 - p.delta && n * n * nup * nup > 1.0;
    shape && (c.alpha * m).floor() as u64 == ell && 2f64.powf(-t) + 2.0 * eps_pe + eps_pa <= eps
}
