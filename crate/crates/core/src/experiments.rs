//! Simulation runs that reduce a trace to synapse-level numbers: quiescent
//! `I_sy` levels, storage-loop staircases and STDP update steps.

use crate::engine::{RunOptions, Trace};
use crate::presets::{stdp_sequence_spec, RECEIVER_SETTLE, STDP_EVENT_GAP};
use crate::synapse::{
    build_binary_cell, build_multistable_cell, build_stdp_circuit, isy_between, simulate,
    BinaryCellSpec, DrivePulse, MultiStableCellSpec, StdpCircuitSpec, SynapseError,
};

/// Quiescent `I_sy` before the first pulse and after each pulse, in time
/// order, for a binary cell with the standard drive.
#[derive(Debug, Clone)]
pub struct PulseResponse {
    pub trace: Trace,
    /// Pulse start times in order, with `+1` for potentiating, `-1` for
    /// depressing.
    pub pulses: Vec<(f64, i32)>,
    /// `levels[0]` precedes all pulses; `levels[k + 1]` follows pulse `k`.
    pub levels: Vec<f64>,
}

fn merged_pulses(potentiate: &[f64], depress: &[f64]) -> Vec<(f64, i32)> {
    let mut p: Vec<(f64, i32)> = potentiate
        .iter()
        .map(|&t| (t, 1))
        .chain(depress.iter().map(|&t| (t, -1)))
        .collect();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    p
}

/// Mean `I_sy` over the `window` before each of `times`.
fn levels_before(trace: &Trace, times: &[f64], window: f64) -> Result<Vec<f64>, SynapseError> {
    times
        .iter()
        .map(|&t| isy_between(trace, t - window, t))
        .collect()
}

pub fn binary_pulse_response(spec: &BinaryCellSpec, dt_max: f64) -> Result<PulseResponse, SynapseError> {
    let pulses = merged_pulses(&spec.drive.potentiate, &spec.drive.depress);
    let width = spec.pulse.width();
    let settle = 0.8e-9;
    let t_stop = pulses.last().map_or(2e-9, |p| p.0 + width + settle);
    let mut opts = RunOptions::new(t_stop, dt_max);
    opts.output_step = 2e-12;
    let trace = simulate(&build_binary_cell(spec)?, &opts)?;
    let first = pulses.first().map_or(t_stop, |p| p.0);
    let mut sample_at = vec![first];
    sample_at.extend(pulses.iter().map(|p| p.0 + width + settle));
    let levels = levels_before(&trace, &sample_at, 0.2e-9)?;
    Ok(PulseResponse {
        trace,
        pulses,
        levels,
    })
}

/// Binary cell driven by `cycles` potentiate/depress pairs with the fast
/// pulse, one pair every 50 ps (depress 25 ps after potentiate).
pub fn binary_fast_toggle(cycles: usize) -> Result<(BinaryCellSpec, Trace), SynapseError> {
    let mut spec = BinaryCellSpec {
        pulse: DrivePulse::fast(),
        ..BinaryCellSpec::default()
    };
    let start = 20e-12;
    spec.drive.potentiate = (0..cycles).map(|k| start + 50e-12 * k as f64).collect();
    spec.drive.depress = (0..cycles).map(|k| start + 25e-12 + 50e-12 * k as f64).collect();
    let t_stop = start + 50e-12 * cycles as f64 + 80e-12;
    let mut opts = RunOptions::new(t_stop, 0.2e-12);
    opts.output_step = 1e-12;
    let trace = simulate(&build_binary_cell(&spec)?, &opts)?;
    Ok((spec, trace))
}

/// Storage-loop current and `I_sy` sampled in the quiet gap before every
/// pulse and once after the last one.
#[derive(Debug, Clone)]
pub struct Staircase {
    pub t: Vec<f64>,
    pub isy: Vec<f64>,
    pub iss: Vec<f64>,
    pub fluxon_events: usize,
}

impl Staircase {
    /// CSV `t_ns,isy_uA,iss_uA`.
    pub fn to_csv(&self) -> String {
        let f = crate::engine::fmt_sig9;
        let mut out = String::from("t_ns,isy_uA,iss_uA\n");
        for i in 0..self.t.len() {
            out.push_str(&format!(
                "{},{},{}\n",
                f(self.t[i] * 1e9),
                f(self.isy[i] * 1e6),
                f(self.iss[i] * 1e6)
            ));
        }
        out
    }
}

pub fn multistable_staircase(spec: &MultiStableCellSpec, dt_max: f64) -> Result<Staircase, SynapseError> {
    let pulses = merged_pulses(&spec.drive.potentiate, &spec.drive.depress);
    let width = spec.pulse.width();
    let tail = 1.5e-9;
    let t_stop = pulses.last().map_or(3e-9, |p| p.0 + width + tail);
    let mut opts = RunOptions::new(t_stop, dt_max);
    opts.output_step = 20e-12;
    let trace = simulate(&build_multistable_cell(spec)?, &opts)?;
    let mut t: Vec<f64> = pulses.iter().map(|p| p.0 - 0.05e-9).collect();
    t.push(t_stop);
    let window = 0.3e-9;
    let isy = levels_before(&trace, &t, window)?;
    let iss = t
        .iter()
        .map(|&x| {
            trace
                .mean_between("I(L1)", x - window, x)
                .ok_or_else(|| SynapseError::MissingProbe("I(L1)".into()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Staircase {
        t,
        isy,
        iss,
        fluxon_events: trace.fluxon_events.len(),
    })
}

/// Quiescent `I_sy` before each STDP event and after the last one.
#[derive(Debug, Clone)]
pub struct StdpRun {
    pub trace: Trace,
    /// Signed delays as run (positive strengthen, negative weaken).
    pub events: Vec<f64>,
    pub levels: Vec<f64>,
}

impl StdpRun {
    /// `I_sy` change across each event.
    pub fn steps(&self) -> Vec<f64> {
        self.levels.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

pub fn stdp_run(base: &StdpCircuitSpec, events: &[f64], dt_max: f64) -> Result<StdpRun, SynapseError> {
    let spec = stdp_sequence_spec(base.clone(), events);
    let t_stop = RECEIVER_SETTLE + events.len() as f64 * STDP_EVENT_GAP;
    let mut opts = RunOptions::new(t_stop, dt_max);
    opts.output_step = 0.5e-9;
    let trace = simulate(&build_stdp_circuit(&spec)?, &opts)?;
    let times: Vec<f64> = (0..=events.len())
        .map(|k| RECEIVER_SETTLE + k as f64 * STDP_EVENT_GAP - 1e-9)
        .collect();
    let levels = levels_before(&trace, &times, 10e-9)?;
    Ok(StdpRun {
        trace,
        events: events.to_vec(),
        levels,
    })
}
