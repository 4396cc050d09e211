//! Ready-to-run demonstration circuits: builder specs with drive schedules
//! and a transient directive attached.

use crate::circuit::{Netlist, TransientSpec};
use crate::synapse::{
    build_binary_cell, build_hebbian_circuit, build_multistable_cell, build_stdp_circuit,
    BinaryCellSpec, DriveSchedule, HebbianCircuitSpec, MultiStableCellSpec, StdpCircuitSpec,
    SynapseError,
};

/// Quiet time before the first photon in receiver circuits.
pub const RECEIVER_SETTLE: f64 = 400e-9;

/// Spacing between STDP update events.
pub const STDP_EVENT_GAP: f64 = 200e-9;

fn with_tran(mut n: Netlist, dt_max: f64, t_stop: f64, output_step: f64) -> Netlist {
    n.analysis = TransientSpec {
        dt_max,
        t_stop,
        output_step,
    };
    n
}

/// Binary cell: two potentiating pulses, then two depressing pulses.
pub fn binary_toggle_spec() -> BinaryCellSpec {
    BinaryCellSpec {
        drive: DriveSchedule {
            potentiate: vec![1e-9, 3e-9],
            depress: vec![5e-9, 7e-9],
        },
        ..BinaryCellSpec::default()
    }
}

pub fn binary_toggle() -> Result<Netlist, SynapseError> {
    Ok(with_tran(build_binary_cell(&binary_toggle_spec())?, 1e-12, 9e-9, 5e-12))
}

/// Multi-stable cell with `plus` potentiating pulses followed by `minus`
/// depressing pulses on the standard 2 ns grid.
pub fn multistable_ramp_spec(base: MultiStableCellSpec, plus: usize, minus: usize) -> MultiStableCellSpec {
    let t0 = 2e-9;
    let period = base.pulse.period;
    let potentiate: Vec<f64> = (0..plus).map(|k| t0 + k as f64 * period).collect();
    let start_minus = t0 + plus as f64 * period + 4e-9;
    let depress: Vec<f64> = (0..minus).map(|k| start_minus + k as f64 * period).collect();
    MultiStableCellSpec {
        drive: DriveSchedule {
            potentiate,
            depress,
        },
        ..base
    }
}

pub fn multistable_ramp(base: MultiStableCellSpec, plus: usize, minus: usize) -> Result<Netlist, SynapseError> {
    let spec = multistable_ramp_spec(base, plus, minus);
    let t_stop = 2e-9 + (plus + minus) as f64 * spec.pulse.period + 8e-9;
    Ok(with_tran(build_multistable_cell(&spec)?, 10e-12, t_stop, 50e-12))
}

/// Hebbian circuit with one photon pair `delta_t` apart at bias `i_spd`.
pub fn hebbian_pair_spec(i_spd: f64, delta_t: f64) -> HebbianCircuitSpec {
    let mut spec = HebbianCircuitSpec::default();
    spec.receiver.i_spd = i_spd;
    spec.photons_pre = vec![RECEIVER_SETTLE];
    spec.photons_post = vec![RECEIVER_SETTLE + delta_t];
    spec
}

pub fn hebbian_pair(i_spd: f64, delta_t: f64) -> Result<Netlist, SynapseError> {
    let t_stop = RECEIVER_SETTLE + delta_t + 100e-9;
    Ok(with_tran(build_hebbian_circuit(&hebbian_pair_spec(i_spd, delta_t))?, 10e-12, t_stop, 0.5e-9))
}

/// Signed STDP events: positive delays strengthen, negative delays weaken.
pub const STDP_SEQUENCE: [f64; 4] = [20e-9, -10e-9, -25e-9, 5e-9];

/// STDP circuit running `events` (signed delays), one every
/// [`STDP_EVENT_GAP`] after the settle time.
pub fn stdp_sequence_spec(base: StdpCircuitSpec, events: &[f64]) -> StdpCircuitSpec {
    let mut spec = base;
    for (k, &d) in events.iter().enumerate() {
        let t = RECEIVER_SETTLE + k as f64 * STDP_EVENT_GAP;
        if d >= 0.0 {
            spec.photons.strengthen(t, d);
        } else {
            spec.photons.weaken(t, -d);
        }
    }
    spec
}

pub fn stdp_sequence(base: StdpCircuitSpec, events: &[f64]) -> Result<Netlist, SynapseError> {
    let t_stop = RECEIVER_SETTLE + events.len() as f64 * STDP_EVENT_GAP;
    Ok(with_tran(build_stdp_circuit(&stdp_sequence_spec(base, events))?, 10e-12, t_stop, 1e-9))
}

/// File names and netlists of the circuits shipped under `circuits/`.
pub fn golden_circuits() -> Result<Vec<(&'static str, Netlist)>, SynapseError> {
    Ok(vec![
        ("fig2_binary.cir", binary_toggle()?),
        ("fig4_multistable_20n.cir", multistable_ramp(MultiStableCellSpec::preset_20n(), 10, 10)?),
        ("fig4_multistable_200n.cir", multistable_ramp(MultiStableCellSpec::preset_200n(), 10, 10)?),
        ("fig6_hebbian.cir", hebbian_pair(7e-6, 0.0)?),
        ("fig8_stdp.cir", stdp_sequence(StdpCircuitSpec::default(), &STDP_SEQUENCE)?),
        ("fig9_full.cir", stdp_sequence(StdpCircuitSpec::with_buffer(), &STDP_SEQUENCE)?),
    ])
}
