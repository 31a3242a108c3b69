use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{Arm, Basis, DetectorId, Event, TimetagStream};
use crate::error::{Error, Result};
use crate::units::fwhm_to_sigma;

/// Everything the Monte Carlo needs for one channel pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelSim {
    pub label: String,
    /// Index used to derive the channel's random substreams.
    pub index: u32,
    pub pair_rate: f64,
    /// Probability that a photon is detected on each arm (transmittance times
    /// detector efficiency).
    pub detect_a: f64,
    pub detect_b: f64,
    /// Dark counts per second over all four detectors of an arm.
    pub dark_a: f64,
    pub dark_b: f64,
    /// Per-arm Gaussian timing spread (FWHM), ps.
    pub jitter_a_fwhm_ps: f64,
    pub jitter_b_fwhm_ps: f64,
    /// Arrival delay of arm B relative to arm A, ps.
    pub delay_b_ps: i64,
    pub e_pol: f64,
}

impl ChannelSim {
    pub fn validate(&self) -> Result<()> {
        let p = [self.detect_a, self.detect_b, self.e_pol];
        if p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::domain("probabilities must lie in [0, 1]"));
        }
        let r = [self.pair_rate, self.dark_a, self.dark_b, self.jitter_a_fwhm_ps, self.jitter_b_fwhm_ps];
        if r.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::domain("rates and jitters must be finite and non-negative"));
        }
        Ok(())
    }

    /// Splits a two-photon FWHM budget between the arms: the baseline
    /// jitter half-and-half, the dispersion spread on arm A.
    pub fn split_jitter(sigma0_ps: f64, residual_ps: f64) -> (f64, f64) {
        let half = 0.5 * sigma0_ps * sigma0_ps;
        ((half + residual_ps * residual_ps).sqrt(), half.sqrt())
    }
}

// Event classes; each (channel, class) pair owns one random substream.
const CLASS_PAIRS: u64 = 0;
const CLASS_ONLY_A: u64 = 1;
const CLASS_ONLY_B: u64 = 2;
const CLASS_DARK: u64 = 3; // + detector code

fn substream(seed: u64, channel: u32, class: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((channel as u64) << 16) | class);
    rng
}

fn poisson_times(rng: &mut ChaCha8Rng, rate: f64, end_ps: u64) -> Vec<u64> {
    let mean = rate * end_ps as f64 * 1e-12;
    if !(mean > 0.0) || end_ps == 0 {
        return Vec::new();
    }
    let n = Poisson::new(mean).expect("positive mean").sample(rng) as usize;
    (0..n).map(|_| rng.gen_range(0..end_ps)).collect()
}

fn random_basis(rng: &mut ChaCha8Rng) -> Basis {
    if rng.gen_bool(0.5) {
        Basis::X
    } else {
        Basis::Z
    }
}

struct Sink {
    end: u64,
    events: Vec<Event>,
}

impl Sink {
    /// Emission time plus a (rounded) signed shift; drops events that land
    /// outside the acquisition window.
    fn push(&mut self, t: u64, shift_ps: f64, detector: DetectorId) {
        let t = t as i128 + shift_ps.round() as i128;
        if t >= 0 && t < self.end as i128 {
            self.events.push(Event { time_ps: t as u64, detector });
        }
    }
}

/// Generates both arms' timetags for one channel pair.
///
/// Pairs are a Poisson process; independent survival on each arm thins it
/// into three independent Poisson processes (both detected, only A, only
/// B), which are sampled directly. Same-basis outcomes of a detected pair
/// agree with probability `1 - e_pol`; cross-basis outcomes are uniform.
pub fn simulate_channel(sim: &ChannelSim, duration_s: f64, seed: u64) -> Result<(TimetagStream, TimetagStream)> {
    sim.validate()?;
    if !(duration_s > 0.0) {
        return Err(Error::domain("duration must be positive"));
    }
    let end = (duration_s * 1e12).round() as u64;
    let mut a = Sink { end, events: Vec::new() };
    let mut b = Sink { end, events: Vec::new() };
    let normal = |fwhm: f64| Normal::new(0.0, fwhm_to_sigma(fwhm)).expect("finite jitter");
    let (ja, jb) = (normal(sim.jitter_a_fwhm_ps), normal(sim.jitter_b_fwhm_ps));
    let delay = sim.delay_b_ps as f64;
    let (pa, pb) = (sim.detect_a, sim.detect_b);

    let mut rng = substream(seed, sim.index, CLASS_PAIRS);
    for t in poisson_times(&mut rng, sim.pair_rate * pa * pb, end) {
        let (basis_a, basis_b) = (random_basis(&mut rng), random_basis(&mut rng));
        let out_a = rng.gen_range(0..2u8);
        let out_b = if basis_a == basis_b {
            out_a ^ u8::from(rng.gen_bool(sim.e_pol))
        } else {
            rng.gen_range(0..2u8)
        };
        a.push(t, ja.sample(&mut rng), DetectorId::new(Arm::A, basis_a, out_a));
        b.push(t, delay + jb.sample(&mut rng), DetectorId::new(Arm::B, basis_b, out_b));
    }

    let singles = [
        (CLASS_ONLY_A, sim.pair_rate * pa * (1.0 - pb), Arm::A),
        (CLASS_ONLY_B, sim.pair_rate * (1.0 - pa) * pb, Arm::B),
    ];
    for (class, rate, arm) in singles {
        let mut rng = substream(seed, sim.index, class);
        for t in poisson_times(&mut rng, rate, end) {
            let basis = random_basis(&mut rng);
            let det = DetectorId::new(arm, basis, rng.gen_range(0..2u8));
            match arm {
                Arm::A => a.push(t, ja.sample(&mut rng), det),
                Arm::B => b.push(t, delay + jb.sample(&mut rng), det),
            }
        }
    }

    for code in 0..8u8 {
        let det = DetectorId::from_code(code)?;
        let rate = 0.25 * if det.arm == Arm::A { sim.dark_a } else { sim.dark_b };
        let mut rng = substream(seed, sim.index, CLASS_DARK + code as u64);
        for t in poisson_times(&mut rng, rate, end) {
            match det.arm {
                Arm::A => a.push(t, 0.0, det),
                Arm::B => b.push(t, 0.0, det),
            }
        }
    }

    let finish = |mut s: Sink| {
        s.events.sort_unstable();
        TimetagStream { events: s.events, duration_s, channel: sim.label.clone() }
    };
    Ok((finish(a), finish(b)))
}
