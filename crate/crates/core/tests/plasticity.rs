use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use soen_core::plasticity::{
    homeostatic_offset, retention_experiment, short_term_filter, stdp_update, synapse_rng,
    BehavioralSynapse, BoundMode, Direction, EventStream, RetentionSpec, ShortTermState,
    StdpKernel,
};

fn bound() -> impl Strategy<Value = BoundMode> {
    prop_oneof![Just(BoundMode::Hard), Just(BoundMode::Soft)]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn weight_stays_on_grid(levels in 1u32..=64, q in 0.0f64..=1.0, b in bound(), seed in any::<u64>()) {
        let mut s = BehavioralSynapse::new(levels, q, b).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut hi = 0u32;
        for _ in 0..1_000_000 {
            let dir = if rng.random_bool(0.5) { Direction::Potentiate } else { Direction::Depress };
            s.apply_candidate_event(dir, &mut rng);
            hi = hi.max(s.level());
        }
        prop_assert!(hi <= levels);
        let w = s.w();
        prop_assert!((0.0..=1.0).contains(&w));
        prop_assert!((w * levels as f64 - s.level() as f64).abs() < 1e-9);
    }

    #[test]
    fn soft_bound_step_shrinks_toward_bound(levels in 2u32..=64, q in 0.01f64..=1.0) {
        let mut near = BehavioralSynapse::new(levels, q, BoundMode::Soft).unwrap();
        let mut mid = near.clone();
        near.set_level((0.9 * levels as f64).ceil() as u32);
        mid.set_level(levels / 2);
        prop_assert!(near.expected_step(Direction::Potentiate) <= mid.expected_step(Direction::Potentiate));
        let mut low = near.clone();
        low.set_level(((0.1 * levels as f64).floor()) as u32);
        prop_assert!(low.expected_step(Direction::Depress) <= mid.expected_step(Direction::Depress));
    }

    #[test]
    fn metaplastic_update_leaves_weight(
        level in 0u32..=16,
        rung in 0usize..4,
        dirs in proptest::collection::vec(any::<bool>(), 0..40),
    ) {
        let mut s = BehavioralSynapse::with_ladder(16, vec![0.1, 0.25, 0.5, 1.0], rung, BoundMode::Hard).unwrap();
        s.set_level(level);
        for up in dirs {
            s.metaplastic_update(if up { Direction::Potentiate } else { Direction::Depress });
            prop_assert_eq!(s.level(), level);
            prop_assert_eq!(s.q, s.ladder[s.rung]);
        }
    }

    #[test]
    fn stdp_update_is_clamped_and_signed(level in 0u32..=8, dt in -120e-9f64..120e-9) {
        let delays: Vec<f64> = (0..=10).map(|k| k as f64 * 10e-9).collect();
        let k = StdpKernel::exponential(0.5, 0.5, 20e-9, &delays).unwrap();
        let mut s = BehavioralSynapse::new(8, 1.0, BoundMode::Hard).unwrap();
        s.set_level(level);
        stdp_update(&mut s, &k, 0.0, dt);
        prop_assert!(s.level() <= 8);
        if dt > 0.0 {
            prop_assert!(s.level() >= level);
        } else if dt < 0.0 {
            prop_assert!(s.level() <= level);
        }
    }
}

#[test]
fn hard_bound_blocks_at_top() {
    let mut s = BehavioralSynapse::new(4, 1.0, BoundMode::Hard).unwrap();
    s.set_level(4);
    let mut rng = synapse_rng(1, 0);
    assert!(!s.apply_candidate_event(Direction::Potentiate, &mut rng));
    assert_eq!(s.w(), 1.0);
}

#[test]
fn binary_synapse_switches_on_one_event() {
    let mut s = BehavioralSynapse::new(1, 1.0, BoundMode::Hard).unwrap();
    let mut rng = synapse_rng(1, 0);
    assert!(s.apply_candidate_event(Direction::Potentiate, &mut rng));
    assert_eq!(s.w(), 1.0);
}

#[test]
fn update_fraction_matches_q() {
    let mut s = BehavioralSynapse::new(1_000_000, 0.25, BoundMode::Hard).unwrap();
    s.set_level(500_000);
    let mut rng = synapse_rng(3, 0);
    let n = 100_000;
    let mut moved = 0;
    for i in 0..n {
        let dir = if i % 2 == 0 { Direction::Potentiate } else { Direction::Depress };
        moved += s.apply_candidate_event(dir, &mut rng) as u32;
    }
    let frac = moved as f64 / n as f64;
    // Binomial sd is 0.0014; the stated band is +/- 0.01.
    assert!((frac - 0.25).abs() < 0.01, "{frac}");
}

#[test]
fn zero_q_gives_flat_snr() {
    let spec = RetentionSpec {
        population: 2000,
        levels: 4,
        q: 0.0,
        bound: BoundMode::Hard,
        stream: EventStream::new(1.0, 0.5, 0.5).unwrap(),
        t_grid: vec![0.0, 1.0, 10.0, 100.0],
        seed: 2,
    };
    let c = retention_experiment(&spec, 0).unwrap();
    assert!(c.degenerate);
    assert!(c.snr.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn binary_retention_decays_exponentially() {
    // Two-state chain: the memory trace relaxes at q r (f+ + f-).
    let spec = RetentionSpec {
        population: 20_000,
        levels: 1,
        q: 0.5,
        bound: BoundMode::Hard,
        stream: EventStream::new(2.0, 0.5, 0.5).unwrap(),
        t_grid: vec![0.0, 0.5, 1.0, 2.0],
        seed: 4,
    };
    let c = retention_experiment(&spec, 0).unwrap();
    let rate = spec.q * spec.stream.rate * (spec.stream.f_plus + spec.stream.f_minus);
    for (k, t) in spec.t_grid.iter().enumerate() {
        let expected = c.signal[0] * (-rate * t).exp();
        let err = (c.signal[k] - expected).abs();
        assert!(err < 4.0 * c.signal_stderr[k] + 1e-3, "t={t}: {} vs {expected}", c.signal[k]);
    }
}

#[test]
fn retention_is_reproducible_across_jobs() {
    let spec = RetentionSpec {
        population: 1500,
        levels: 8,
        q: 0.6,
        bound: BoundMode::Soft,
        stream: EventStream::new(1.0, 0.55, 0.4).unwrap(),
        t_grid: (0..30).map(|i| i as f64).collect(),
        seed: 77,
    };
    let a = retention_experiment(&spec, 1).unwrap();
    let b = retention_experiment(&spec, 3).unwrap();
    assert_eq!(a, b);
}

#[test]
fn event_stream_rejects_bad_split() {
    assert!(EventStream::new(1.0, 0.7, 0.4).is_err());
    assert!(EventStream::new(-1.0, 0.5, 0.5).is_err());
}

#[test]
fn short_term_traces_cancel_when_matched() {
    let st = ShortTermState::new(5.0, 5.0, 0.1, 0.1).unwrap();
    let spikes = [1.0, 2.0, 2.5, 7.0];
    let grid: Vec<f64> = (0..100).map(|i| i as f64 * 0.1).collect();
    for v in short_term_filter(0.4, &st, &spikes, &grid) {
        assert!((v - 0.4).abs() < 1e-12);
    }
}

#[test]
fn facilitation_only_matches_closed_form() {
    let tau = 3.0;
    let g = 0.05;
    let st = ShortTermState::new(tau, 1.0, g, 0.0).unwrap();
    let spikes = [0.5, 1.0, 4.0];
    let grid: Vec<f64> = (0..60).map(|i| i as f64 * 0.2).collect();
    let got = short_term_filter(0.2, &st, &spikes, &grid);
    for (t, v) in grid.iter().zip(got) {
        let sf: f64 = spikes
            .iter()
            .filter(|&&s| s <= *t)
            .map(|s| (-(t - s) / tau).exp())
            .sum();
        assert!((v - (0.2 + g * sf).min(1.0)).abs() < 1e-12, "t={t}");
    }
}

#[test]
fn homeostatic_offset_steady_state() {
    let (g, tau, rate) = (0.01, 200.0, 0.5);
    let spikes: Vec<f64> = (0..4000).map(|k| k as f64 / rate).collect();
    // Average over one inter-spike interval, well after the onset.
    let t0 = 3000.0 / rate;
    let n = 50;
    let avg: f64 = (0..n)
        .map(|i| homeostatic_offset(g, tau, &spikes, t0 + i as f64 / (rate * n as f64)))
        .sum::<f64>()
        / n as f64;
    let expected = -g * rate * tau;
    assert!(((avg - expected) / expected).abs() < 0.05, "{avg} vs {expected}");
    assert!(avg < 0.0);
}

#[test]
fn kernel_csv_round_trip() {
    let delays: Vec<f64> = [0.0, 5.0, 10.0, 25.0, 50.0].iter().map(|d| d * 1e-9).collect();
    let k = StdpKernel::exponential(0.3, 0.2, 15e-9, &delays).unwrap();
    let text = k.to_csv(38e-6);
    let back = StdpKernel::from_csv(&text, 38e-6).unwrap();
    for dt in [-30e-9, -10e-9, -1e-9, 1e-9, 7e-9, 40e-9] {
        assert!((k.dw(dt) - back.dw(dt)).abs() < 1e-8, "dt={dt}");
    }
    assert_eq!(k.dw(1e-6), 0.0);
    assert!(StdpKernel::from_csv("a,b,c\n", 38e-6).is_err());
}
