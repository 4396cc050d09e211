use proptest::prelude::*;

use soen_core::engine::{assemble, run_transient_with, RunOptions};
use soen_core::experiments::{binary_pulse_response, multistable_staircase};
use soen_core::presets::multistable_ramp_spec;
use soen_core::synapse::{
    build_binary_cell, hebbian_event, BinaryCellSpec, DriveSchedule, EventTiming,
    HebbianCircuitSpec, MultiStableCellSpec,
};

/// Pulse schedule on a 2 ns grid from a list of slot codes
/// (0 = none, 1 = potentiate, 2 = depress).
fn schedule(codes: &[u8], period: f64) -> DriveSchedule {
    let mut d = DriveSchedule::default();
    for (k, c) in codes.iter().enumerate() {
        let t = (k + 1) as f64 * period;
        match c {
            1 => d.potentiate.push(t),
            2 => d.depress.push(t),
            _ => {}
        }
    }
    d
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn binary_cell_has_two_levels(codes in proptest::collection::vec(0u8..3, 1..8)) {
        let mut spec = BinaryCellSpec::default();
        spec.drive = schedule(&codes, spec.pulse.period);
        prop_assume!(!spec.drive.potentiate.is_empty() || !spec.drive.depress.is_empty());
        let r = binary_pulse_response(&spec, 1e-12).unwrap();
        for l in &r.levels {
            prop_assert!((l - 1e-6).abs() < 0.1e-6 || (l - 3e-6).abs() < 0.3e-6, "level {l}");
        }
    }

    #[test]
    fn multistable_never_exceeds_saturation(codes in proptest::collection::vec(prop_oneof![Just(1u8), Just(1), Just(1), Just(2), Just(0)], 60..120)) {
        let mut spec = MultiStableCellSpec::preset_20n();
        spec.drive = schedule(&codes, spec.pulse.period);
        let s = multistable_staircase(&spec, 10e-12).unwrap();
        let step = (FLUX_STEP_20N).abs();
        let max = s.isy.iter().cloned().fold(f64::MIN, f64::max);
        prop_assert!(max <= SATURATED_20N + step, "max {max}");
    }
}

/// Saturated I_sy of the 20 nH preset and its per-pulse step, measured with
/// a long ramp in `saturated_level_reference`.
const SATURATED_20N: f64 = 3.2e-6;
const FLUX_STEP_20N: f64 = 25e-9;

#[test]
fn saturated_level_reference() {
    let spec = multistable_ramp_spec(MultiStableCellSpec::preset_20n(), 120, 0);
    let s = multistable_staircase(&spec, 10e-12).unwrap();
    let top = *s.isy.last().unwrap();
    let step = (s.isy[1] - s.isy[0]).abs();
    assert!((top - SATURATED_20N).abs() < 0.1e-6, "top {top}");
    assert!((step - FLUX_STEP_20N).abs() < 5e-9, "step {step}");
}

#[test]
fn fluxon_count_matches_phase_advance() {
    let mut spec = BinaryCellSpec::default();
    spec.drive = schedule(&[1, 2, 1, 0, 2], spec.pulse.period);
    let sys = assemble(&build_binary_cell(&spec).unwrap()).unwrap();
    let t = run_transient_with(&sys, &RunOptions::new(14e-9, 1e-12)).unwrap();
    for j in sys.junction_names() {
        let (a, b) = t.junction_phase_endpoints(j).unwrap();
        let n = ((b - a) / (2.0 * std::f64::consts::PI)).round() as i64;
        assert_eq!(n, t.net_fluxons_between(j, f64::MIN, f64::MAX), "{j}");
    }
}

#[test]
fn halving_step_keeps_loop_currents() {
    let mut spec = MultiStableCellSpec::preset_20n();
    spec.drive = schedule(&[1, 1, 1, 2, 1], spec.pulse.period);
    let sys = assemble(&soen_core::synapse::build_multistable_cell(&spec).unwrap()).unwrap();
    let run = |dt: f64| run_transient_with(&sys, &RunOptions::new(14e-9, dt)).unwrap();
    let (a, b) = (run(10e-12), run(5e-12));
    for label in ["I(Lsy)", "I(L1)"] {
        let x = *a.series(label).unwrap().last().unwrap();
        let y = *b.series(label).unwrap().last().unwrap();
        assert!(((x - y) / y).abs() < 5e-3, "{label}: {x} vs {y}");
    }
}

#[test]
fn hebbian_update_is_quantized() {
    let mut spec = HebbianCircuitSpec::default();
    spec.receiver.i_spd = 10e-6;
    let ev = hebbian_event(&spec, 5e-9, &EventTiming::default()).unwrap();
    assert!(ev.fluxons > 0);
    let q = ev.fluxons as f64 * spec.fluxon_current();
    assert!(((ev.delta_i_ss - q) / q).abs() < 0.02, "{} vs {q}", ev.delta_i_ss);
}
