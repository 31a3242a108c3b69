mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use wdmqkd::detection::coincidence_rates;
use wdmqkd::link::{link_loss_budget, residual_dispersion_per_channel};
use wdmqkd::optimizer::{sweep_skr, SweepSpec};
use wdmqkd::presets::preset;
use wdmqkd::scenario::Scenario;
use wdmqkd::security::{asymptotic_fraction, finite_key, FiniteKeyProblem};
use wdmqkd::source::{conjugate_wavelength, spdc_spectrum};
use wdmqkd::timetag::{find_coincidences, simulate_channel, Arm, ChannelSim};

fn base() -> Scenario {
    Scenario::from_config(&preset("301km").unwrap()).unwrap()
}

fn sim(pair_rate: f64, jitter: f64, delay: i64) -> ChannelSim {
    ChannelSim {
        label: "C50L92".into(),
        index: 0,
        pair_rate,
        detect_a: 0.3,
        detect_b: 0.2,
        dark_a: 500.0,
        dark_b: 800.0,
        jitter_a_fwhm_ps: jitter,
        jitter_b_fwhm_ps: 0.5 * jitter,
        delay_b_ps: delay,
        e_pol: 0.02,
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn loss_total_is_the_sum_of_items(la in 0.0..400.0f64, lb in 0.0..400.0f64, att in 0.1..0.3f64, extra in 0.0..20.0f64) {
        let mut link = base().link;
        link.arm_a.segments[0].length_km = la;
        link.arm_a.segments[0].attenuation_db_per_km = att;
        link.arm_b.segments[0].length_km = lb;
        link.arm_b.endpoint_losses.wdm_db = extra;
        let b = link_loss_budget(&link.arm_a, &link.arm_b);
        let sum: f64 = b.items.iter().map(|(_, v)| v).sum();
        prop_assert!((b.total_db - sum).abs() <= 1e-9 * sum.abs().max(1.0));
    }

    #[test]
    fn residual_is_affine_in_device_count(idx in 0usize..9, n in 0usize..5) {
        let s = base();
        let pair = &s.plan.pairs[idx];
        let fwhm = s.plan.channel_fwhm_nm;
        let unit = s.catalog()[0].device.clone();
        let with = |k: usize| {
            let mut link = s.bare_link();
            link.arm_a.devices.extend(std::iter::repeat_n(unit.clone(), k));
            residual_dispersion_per_channel(pair, &link, fwhm)
        };
        let (r0, r1, rn) = (with(0), with(1), with(n));
        prop_assert!((rn - (r0 + n as f64 * (r1 - r0))).abs() < 1e-6);
    }

    #[test]
    fn spectrum_is_symmetric_in_conjugates(offset in 0.5..40.0f64, dt in 0.0..5.0f64) {
        let s = base();
        let pump = s.source.pump_wavelength_nm;
        let l1 = 2.0 * pump - offset;
        let l2 = conjugate_wavelength(pump, l1).unwrap();
        let t = s.source.waveguide.degenerate_temperature_c + dt;
        let spec = spdc_spectrum(pump, t, &s.source.waveguide, &[l1, l2]).unwrap();
        prop_assert!((spec[0].relative_intensity - spec[1].relative_intensity).abs() < 1e-12);
    }

    #[test]
    fn matcher_equals_brute_force(seed in any::<u64>(), na in 0usize..300, nb in 0usize..300, window in 0u64..5_000, offset in -3_000i64..3_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::random_stream(&mut rng, Arm::A, na, 100_000);
        let b = common::random_stream(&mut rng, Arm::B, nb, 100_000);
        prop_assert_eq!(find_coincidences(&a, &b, window, offset).unwrap().counts, common::brute_force(&a, &b, window, offset));
    }

    #[test]
    fn streams_are_legal_and_seeded(seed in any::<u64>(), rate in 1e4..3e6f64, jitter in 1.0..300.0f64, delay in -2_000_000i64..2_000_000) {
        let c = sim(rate, jitter, delay);
        let (a, b) = simulate_channel(&c, 1e-3, seed).unwrap();
        prop_assert!(a.is_legal() && b.is_legal());
        let (a2, b2) = simulate_channel(&c, 1e-3, seed).unwrap();
        prop_assert_eq!(a, a2);
        prop_assert_eq!(b, b2);
    }

    #[test]
    fn accidentals_linear_and_truths_monotone_in_window(w in 1.0..500.0f64, dt in 10.0..200.0f64) {
        let r1 = coincidence_rates(1e9, 1e-3, 1e-2, 0.8, 0.8, 1e5, 2e5, w, dt).unwrap();
        let r2 = coincidence_rates(1e9, 1e-3, 1e-2, 0.8, 0.8, 1e5, 2e5, 2.0 * w, dt).unwrap();
        prop_assert!((r2.accidental_rate - 2.0 * r1.accidental_rate).abs() <= 1e-12 * r2.accidental_rate);
        prop_assert!(r2.true_rate >= r1.true_rate);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 12, ..ProptestConfig::default() })]

    #[test]
    fn finite_key_is_certified_and_below_asymptotic(m in 2_000u64..2_000_000, delta in 0.0..0.11f64) {
        let p = FiniteKeyProblem::new(m, delta);
        let k = finite_key(&p).unwrap();
        prop_assert!(k.secure_bits as f64 <= m as f64 * asymptotic_fraction(delta, p.leak_factor).unwrap());
        match &k.certificate {
            Some(c) => prop_assert!(common::replay(&p, k.secure_bits, c)),
            None => prop_assert_eq!(k.secure_bits, 0),
        }
    }
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let spec = SweepSpec::from_scenario(&base()).unwrap();
    let many = sweep_skr(&spec).unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap().install(|| sweep_skr(&spec).unwrap());
    assert_eq!(many, one);
}

#[test]
fn simulation_is_independent_of_thread_count() {
    let mut cfg = preset("201km").unwrap();
    cfg.simulation.duration_s = 0.01;
    cfg.channels.pairs.truncate(3);
    let s = Scenario::from_config(&cfg).unwrap();
    let many = wdmqkd::simulate::simulate(&s, 3).unwrap();
    let one = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| wdmqkd::simulate::simulate(&s, 3).unwrap());
    assert_eq!(many, one);
}
