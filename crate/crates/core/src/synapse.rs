//! Builders for the synapse circuit families and helpers that turn traces
//! into synapse-level quantities.

use thiserror::Error;

use crate::circuit::{
    make_junction, validate_netlist, Coupling, JosephsonJunctionParams, ModelError, Netlist, Probe,
    SpdParams, SquareTrain, Waveform, FLUX_QUANTUM,
};
use crate::engine::{assemble, run_transient_with, EngineError, RunOptions, Trace};

#[derive(Debug, Error)]
pub enum SynapseError {
    #[error("invalid spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("probe {0} missing from trace")]
    MissingProbe(String),
    #[error("sweep point dt={delta_t:e} s, i_su={i_su:e} A: {source}")]
    SweepPoint {
        delta_t: f64,
        i_su: f64,
        #[source]
        source: Box<SynapseError>,
    },
}

fn spec_err(msg: impl Into<String>) -> SynapseError {
    SynapseError::Spec(msg.into())
}

/// Name of the inductor carrying the synapse bias current in every builder.
pub const ISY_INDUCTOR: &str = "Lsy";

/// Junction parameters shared by all builders.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JunctionSpec {
    pub critical_current: f64,
    pub beta_c: f64,
    pub shunt_resistance: f64,
}

impl Default for JunctionSpec {
    fn default() -> Self {
        Self {
            critical_current: 40e-6,
            beta_c: 0.95,
            shunt_resistance: 5.0,
        }
    }
}

impl JunctionSpec {
    pub fn params(&self) -> Result<JosephsonJunctionParams, ModelError> {
        make_junction(self.critical_current, self.beta_c, self.shunt_resistance)
    }

    pub fn with_ic(&self, ic: f64) -> Result<JosephsonJunctionParams, ModelError> {
        make_junction(ic, self.beta_c, self.shunt_resistance)
    }
}

/// Drive pulse shape used for I+ / I- inputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivePulse {
    pub amplitude: f64,
    pub rise_time: f64,
    pub fall_time: f64,
    pub high_duration: f64,
    pub period: f64,
}

impl DrivePulse {
    /// 10 uA, 100 ps edges, 1 ns plateau, 2 ns period.
    pub fn standard() -> Self {
        Self {
            amplitude: 10e-6,
            rise_time: 100e-12,
            fall_time: 100e-12,
            high_duration: 1e-9,
            period: 2e-9,
        }
    }

    /// Short pulses for 50 ps toggling.
    pub fn fast() -> Self {
        Self {
            amplitude: 10e-6,
            rise_time: 2e-12,
            fall_time: 2e-12,
            high_duration: 19e-12,
            period: 50e-12,
        }
    }

    pub fn train(&self, start: f64, count: u64) -> Waveform {
        if count == 0 {
            return Waveform::Dc(0.0);
        }
        Waveform::SquareTrain(SquareTrain {
            amplitude: self.amplitude,
            rise_time: self.rise_time,
            fall_time: self.fall_time,
            high_duration: self.high_duration,
            period: self.period,
            start,
            count,
        })
    }

    /// Single pulses at arbitrary start times, as a piecewise-linear waveform.
    pub fn at_times(&self, starts: &[f64]) -> Waveform {
        if starts.is_empty() {
            return Waveform::Dc(0.0);
        }
        let mut pts = vec![(starts[0].min(0.0) - 1e-12, 0.0)];
        for &t in starts {
            let t1 = t + self.rise_time;
            let t2 = t1 + self.high_duration;
            let t3 = t2 + self.fall_time;
            pts.extend_from_slice(&[(t, 0.0), (t1, self.amplitude), (t2, self.amplitude), (t3, 0.0)]);
        }
        pts.dedup_by(|b, a| b.0 <= a.0);
        Waveform::PiecewiseLinear(pts)
    }

    /// Time from pulse start until the drive is back at zero.
    pub fn width(&self) -> f64 {
        self.rise_time + self.high_duration + self.fall_time
    }
}

/// Drive schedule for a supervised cell: `I+` and `I-` pulse start times.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DriveSchedule {
    pub potentiate: Vec<f64>,
    pub depress: Vec<f64>,
}

/// Single-fluxon memory cell coupled to the synapse bias loop.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryCellSpec {
    /// Storage loop inductance in series with the coupling inductor `l1`.
    pub l_ss: f64,
    pub i_b1: f64,
    pub i_b2: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    /// Load inductance of the synapse port.
    pub l_sy: f64,
    /// Coupling factor between storage loop (L1) and bias loop (L2).
    pub k12: f64,
    /// Coupling factor between bias loop (L3) and the shared bias line (L4).
    pub k34: f64,
    pub i1: f64,
    pub junction: JunctionSpec,
    pub pulse: DrivePulse,
    pub drive: DriveSchedule,
}

impl Default for BinaryCellSpec {
    fn default() -> Self {
        Self {
            l_ss: 90e-12,
            i_b1: 38e-6,
            i_b2: 20e-6,
            l1: 45e-12,
            l2: 45e-12,
            l3: 18e-12,
            l4: 18e-12,
            l_sy: 10e-12,
            k12: -0.249,
            k34: -0.116,
            i1: 27e-6,
            junction: JunctionSpec::default(),
            pulse: DrivePulse::standard(),
            drive: DriveSchedule::default(),
        }
    }
}

impl BinaryCellSpec {
    /// `L_ss * Ic / Phi0`.
    pub fn beta_l_over_2pi(&self) -> f64 {
        self.l_ss * self.junction.critical_current / FLUX_QUANTUM
    }

    fn check(&self) -> Result<(), SynapseError> {
        for (name, v) in [
            ("l_ss", self.l_ss),
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("l4", self.l4),
            ("l_sy", self.l_sy),
        ] {
            if !(v > 0.0) {
                return Err(spec_err(format!("{name} must be positive")));
            }
        }
        if self.k12.abs() >= 1.0 || self.k34.abs() >= 1.0 {
            return Err(spec_err("coupling factors must satisfy |k| < 1"));
        }
        let b = self.beta_l_over_2pi();
        if !(1.0..3.0).contains(&b) {
            return Err(spec_err(format!(
                "storage loop beta_L/2pi = {b:.2} does not hold exactly one fluxon"
            )));
        }
        Ok(())
    }
}

fn add_bias_loop(
    n: &mut Netlist,
    l2: f64,
    l3: f64,
    l4: f64,
    l_sy: f64,
    i1: f64,
    k12: f64,
    k34: f64,
) {
    n.inductor("L2", "0", "sb1", l2)
        .inductor("L3", "sb1", "sb2", l3)
        .inductor(ISY_INDUCTOR, "sb2", "0", l_sy)
        .inductor("L4", "i1", "0", l4)
        .source("I1", "i1", Waveform::Dc(i1))
        .mutual("K12", "L1", "L2", Coupling::Factor(k12))
        .mutual("K34", "L3", "L4", Coupling::Factor(k34));
}

/// Builds the binary memory cell. Potentiation pulses drive `Jsu`, depression
/// pulses drive `Jss`.
pub fn build_binary_cell(spec: &BinaryCellSpec) -> Result<Netlist, SynapseError> {
    spec.check()?;
    let j = spec.junction.params()?;
    let mut n = Netlist::new();
    n.junction("Jsu", "x", "0", j)
        .junction("Jss", "y", "0", j)
        .source("Ib1", "x", Waveform::Dc(spec.i_b1))
        .source("Ib2", "y", Waveform::Dc(spec.i_b2))
        .inductor("Lss", "x", "m", spec.l_ss)
        .inductor("L1", "m", "y", spec.l1)
        .source("Iplus", "x", spec.pulse.at_times(&spec.drive.potentiate))
        .source("Iminus", "y", spec.pulse.at_times(&spec.drive.depress));
    add_bias_loop(
        &mut n, spec.l2, spec.l3, spec.l4, spec.l_sy, spec.i1, spec.k12, spec.k34,
    );
    n.probe(Probe::Current(ISY_INDUCTOR.into()))
        .probe(Probe::Current("L1".into()))
        .probe(Probe::NodePhase("x".into()))
        .probe(Probe::NodePhase("y".into()));
    finish(n)
}

fn finish(n: Netlist) -> Result<Netlist, SynapseError> {
    let d = validate_netlist(&n);
    if !d.is_empty() {
        let msg: Vec<String> = d.iter().map(|d| d.to_string()).collect();
        return Err(spec_err(msg.join("; ")));
    }
    Ok(n)
}

/// Multi-fluxon storage loop written by two DC-to-SFQ converters.
///
/// Each converter is an input junction `J1`, edge-coupled to its drive
/// through `conv_l1` and `conv_r_in`, followed by `conv_l2` and an output
/// junction that is also the storage junction of the loop. `conv_l3` joins
/// the output junction to the storage inductor, so the loop holds
/// `l_ss + l1 + 2 conv_l3`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiStableCellSpec {
    pub l_ss: f64,
    pub conv_l1: f64,
    pub conv_l2: f64,
    pub conv_l3: f64,
    pub conv_r_in: f64,
    /// Total bias of one converter; `i_ss_b` of it goes to the storage
    /// junction and the remainder to the input junction.
    pub i_dc: f64,
    pub i_ss_b: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l_sy: f64,
    pub k12: f64,
    pub k34: f64,
    pub i1: f64,
    pub junction: JunctionSpec,
    pub pulse: DrivePulse,
    pub drive: DriveSchedule,
}

impl MultiStableCellSpec {
    pub fn preset_20n() -> Self {
        Self {
            l_ss: 20e-9,
            conv_l1: 80e-12,
            conv_l2: 60e-12,
            conv_l3: 300e-12,
            conv_r_in: 0.57,
            i_dc: 73e-6,
            i_ss_b: 34e-6,
            l1: 18e-12,
            l2: 190e-12,
            l3: 18e-12,
            l4: 18e-12,
            l_sy: 10e-12,
            k12: -0.9,
            k34: -0.9,
            i1: 27e-6,
            junction: JunctionSpec::default(),
            pulse: DrivePulse::standard(),
            drive: DriveSchedule::default(),
        }
    }

    pub fn preset_200n() -> Self {
        Self {
            l_ss: 200e-9,
            ..Self::preset_20n()
        }
    }

    /// Inductance of the storage loop.
    pub fn loop_inductance(&self) -> f64 {
        self.l_ss + self.l1 + 2.0 * self.conv_l3
    }

    fn check(&self) -> Result<(), SynapseError> {
        for (name, v) in [
            ("l_ss", self.l_ss),
            ("conv_l1", self.conv_l1),
            ("conv_l2", self.conv_l2),
            ("conv_l3", self.conv_l3),
            ("conv_r_in", self.conv_r_in),
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("l4", self.l4),
            ("l_sy", self.l_sy),
        ] {
            if !(v > 0.0) {
                return Err(spec_err(format!("{name} must be positive")));
            }
        }
        if !(self.i_dc > self.i_ss_b) {
            return Err(spec_err("i_dc must exceed i_ss_b"));
        }
        if self.k12.abs() >= 1.0 || self.k34.abs() >= 1.0 {
            return Err(spec_err("coupling factors must satisfy |k| < 1"));
        }
        Ok(())
    }
}

fn add_converter(
    n: &mut Netlist,
    spec: &MultiStableCellSpec,
    j: JosephsonJunctionParams,
    tag: &str,
    output: &str,
    drive: Waveform,
) {
    let d = format!("{tag}d");
    let a = format!("{tag}a");
    let s = format!("s{tag}");
    n.source(&format!("I{tag}"), &d, drive)
        .inductor(&format!("L{tag}1"), &d, "0", spec.conv_l1)
        .resistor(&format!("R{tag}in"), &d, &a, spec.conv_r_in)
        .junction(&format!("J{tag}1"), &a, "0", j)
        .source(&format!("I{tag}dc"), &a, Waveform::Dc(spec.i_dc - spec.i_ss_b))
        .inductor(&format!("L{tag}2"), &a, &s, spec.conv_l2)
        .junction(&format!("Jss{tag}"), &s, "0", j)
        .source(&format!("Issb{tag}"), &s, Waveform::Dc(spec.i_ss_b))
        .inductor(&format!("L{tag}3"), &s, output, spec.conv_l3);
}

/// Builds the multi-stable cell. Converter `p` writes fluxons through
/// storage junction `Jssp`, converter `m` through `Jssm`.
pub fn build_multistable_cell(spec: &MultiStableCellSpec) -> Result<Netlist, SynapseError> {
    spec.check()?;
    let j = spec.junction.params()?;
    let mut n = Netlist::new();
    add_converter(&mut n, spec, j, "p", "lp", spec.pulse.at_times(&spec.drive.potentiate));
    add_converter(&mut n, spec, j, "m", "lm", spec.pulse.at_times(&spec.drive.depress));
    n.inductor("Lss", "lp", "sc", spec.l_ss)
        .inductor("L1", "sc", "lm", spec.l1);
    add_bias_loop(
        &mut n, spec.l2, spec.l3, spec.l4, spec.l_sy, spec.i1, spec.k12, spec.k34,
    );
    n.probe(Probe::Current(ISY_INDUCTOR.into()))
        .probe(Probe::Current("L1".into()));
    finish(n)
}

/// Photon detector model shared by the unsupervised circuits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec {
    pub hotspot_resistance: f64,
    pub hotspot_duration: f64,
}

impl Default for DetectorSpec {
    fn default() -> Self {
        Self {
            hotspot_resistance: 5e3,
            hotspot_duration: 200e-12,
        }
    }
}

impl DetectorSpec {
    fn params(&self, photons: &[f64]) -> Result<SpdParams, ModelError> {
        SpdParams::new(self.hotspot_resistance, self.hotspot_duration, photons.to_vec())
    }
}

/// Two-photon correlation receiver driving an update junction.
///
/// The bias `i_spd` rests in the `spd1 - l1` branch. A photon on SPD1 sends
/// it through `r1` into the `spd2 - l2` branch, from which it returns with
/// `l1 / r1`. A photon on SPD2 inside that window pushes the current through
/// `r2` and `l3` into the update junction, which then slips once per fluxon
/// written into the storage loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReceiverSpec {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub i_spd: f64,
    /// Bias of the update junction.
    pub i_su: f64,
    pub detector: DetectorSpec,
    pub junction: JunctionSpec,
}

impl Default for ReceiverSpec {
    fn default() -> Self {
        Self {
            l1: 1.25e-6,
            l2: 12.5e-9,
            l3: 125e-9,
            tau1: 50e-9,
            tau2: 5e-9,
            i_spd: 10e-6,
            i_su: 38e-6,
            detector: DetectorSpec::default(),
            junction: JunctionSpec::default(),
        }
    }
}

impl ReceiverSpec {
    pub fn r1(&self) -> f64 {
        self.l1 / self.tau1
    }

    pub fn r2(&self) -> f64 {
        self.l2 / self.tau2
    }

    fn check(&self) -> Result<(), SynapseError> {
        for (name, v) in [
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("tau1", self.tau1),
            ("tau2", self.tau2),
        ] {
            if !(v > 0.0) {
                return Err(spec_err(format!("{name} must be positive")));
            }
        }
        if self.l3 < 10.0 * self.l2 || self.l1 < 10.0 * self.l3 {
            return Err(spec_err("receiver needs l2 << l3 << l1 (ratios of at least 10)"));
        }
        if !(self.i_spd >= 0.0 && self.i_su >= 0.0) {
            return Err(spec_err("bias currents must be non-negative"));
        }
        Ok(())
    }
}

/// Adds one receiver. `tag` suffixes every element and node; `out` is the
/// node where the update junction `Jsu{tag}` sits. `first` and `second` are
/// the photon times for the steady-state biased detector and the other one.
fn add_receiver(
    n: &mut Netlist,
    spec: &ReceiverSpec,
    tag: &str,
    out: &str,
    first: &[f64],
    second: &[f64],
) -> Result<(), SynapseError> {
    let j = spec.junction.params()?;
    let name = |s: &str| format!("{s}{tag}");
    let (nn, n1, m, m2, p) = (name("n"), name("n1"), name("m"), name("m2"), name("p"));
    n.source(&name("Ispd"), &nn, Waveform::Dc(spec.i_spd))
        .spd(&name("S1"), &nn, &n1, spec.detector.params(first)?)
        .inductor(&name("L1"), &n1, "0", spec.l1)
        .resistor(&name("R1"), &nn, &m, spec.r1())
        .spd(&name("S2"), &m, &m2, spec.detector.params(second)?)
        .inductor(&name("L2"), &m2, "0", spec.l2)
        .resistor(&name("R2"), &m, &p, spec.r2())
        .inductor(&name("L3"), &p, out, spec.l3)
        .junction(&name("Jsu"), out, "0", j)
        .source(&name("Isu"), out, Waveform::Dc(spec.i_su));
    Ok(())
}

/// Hebbian circuit: one receiver writing into a storage loop closed by a
/// biased storage junction.
#[derive(Debug, Clone, PartialEq)]
pub struct HebbianCircuitSpec {
    pub receiver: ReceiverSpec,
    pub i_ss_b: f64,
    pub l_ss: f64,
    /// Photon arrival times at SPD1 (pre-synaptic).
    pub photons_pre: Vec<f64>,
    /// Photon arrival times at SPD2 (post-synaptic).
    pub photons_post: Vec<f64>,
}

impl Default for HebbianCircuitSpec {
    fn default() -> Self {
        Self {
            receiver: ReceiverSpec::default(),
            i_ss_b: 38e-6,
            l_ss: 1e-6,
            photons_pre: Vec::new(),
            photons_post: Vec::new(),
        }
    }
}

impl HebbianCircuitSpec {
    /// `L_ss * Ic / Phi0`.
    pub fn beta_l_over_2pi(&self) -> f64 {
        self.l_ss * self.receiver.junction.critical_current / FLUX_QUANTUM
    }

    /// One storage-loop flux quantum expressed as loop current.
    pub fn fluxon_current(&self) -> f64 {
        FLUX_QUANTUM / self.l_ss
    }

    fn check(&self) -> Result<(), SynapseError> {
        self.receiver.check()?;
        if !(self.l_ss > 0.0) {
            return Err(spec_err("l_ss must be positive"));
        }
        if !(self.i_ss_b >= 0.0) {
            return Err(spec_err("bias currents must be non-negative"));
        }
        Ok(())
    }
}

/// Builds the Hebbian circuit: receiver, update junction `Jsu` at node `x`,
/// storage inductor `Lss` from `x` to `y` and storage junction `Jss` at `y`.
pub fn build_hebbian_circuit(spec: &HebbianCircuitSpec) -> Result<Netlist, SynapseError> {
    spec.check()?;
    let j = spec.receiver.junction.params()?;
    let mut n = Netlist::new();
    add_receiver(&mut n, &spec.receiver, "", "x", &spec.photons_pre, &spec.photons_post)?;
    n.inductor("Lss", "x", "y", spec.l_ss)
        .junction("Jss", "y", "0", j)
        .source("Issb", "y", Waveform::Dc(spec.i_ss_b));
    n.probe(Probe::Current("Lss".into()))
        .probe(Probe::Current("L1".into()))
        .probe(Probe::Current("L2".into()))
        .probe(Probe::Current("L3".into()));
    finish(n)
}

/// Synaptic buffer and firing-junction stub fed by `I_sy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BufferSpec {
    pub ic_b1: f64,
    pub ic_b2: f64,
    pub ic_sf: f64,
    pub l_sf: f64,
}

impl Default for BufferSpec {
    fn default() -> Self {
        Self {
            ic_b1: 10e-6,
            ic_b2: 40e-6,
            ic_sf: 10e-6,
            l_sf: 10e-12,
        }
    }
}

/// Photon times for the four STDP ports.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StdpPhotons {
    pub strengthen_pre: Vec<f64>,
    pub strengthen_post: Vec<f64>,
    pub weaken_post: Vec<f64>,
    pub weaken_pre: Vec<f64>,
}

impl StdpPhotons {
    /// Appends a strengthening event: pre at `t`, post at `t + dt`.
    pub fn strengthen(&mut self, t: f64, dt: f64) -> &mut Self {
        self.strengthen_pre.push(t);
        self.strengthen_post.push(t + dt);
        self
    }

    /// Appends a weakening event: post at `t`, pre at `t + dt`.
    pub fn weaken(&mut self, t: f64, dt: f64) -> &mut Self {
        self.weaken_post.push(t);
        self.weaken_pre.push(t + dt);
        self
    }
}

/// Strengthening and weakening receivers on opposite ends of one storage
/// loop, whose current is read out through the bias loop.
///
/// The strengthening update junction `Jsup` sits at `x` and the weakening one
/// `Jsum` at `y`; `Lss` runs from `x` to `y`, so their fluxons circulate in
/// opposite directions. Each update junction also bounds the loop current
/// written by the other one.
#[derive(Debug, Clone, PartialEq)]
pub struct StdpCircuitSpec {
    pub strengthen: ReceiverSpec,
    pub weaken: ReceiverSpec,
    pub l_ss: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l4: f64,
    pub l_sy: f64,
    pub k12: f64,
    pub k34: f64,
    pub i1: f64,
    /// When set, `I_sy` continues through the buffer into a firing junction.
    pub buffer: Option<BufferSpec>,
    pub photons: StdpPhotons,
}

impl Default for StdpCircuitSpec {
    fn default() -> Self {
        let ms = MultiStableCellSpec::preset_20n();
        Self {
            strengthen: ReceiverSpec::default(),
            weaken: ReceiverSpec::default(),
            l_ss: 200e-9,
            l1: ms.l1,
            l2: ms.l2,
            l3: ms.l3,
            l4: ms.l4,
            l_sy: ms.l_sy,
            k12: ms.k12,
            k34: ms.k34,
            i1: ms.i1,
            buffer: None,
            photons: StdpPhotons::default(),
        }
    }
}

impl StdpCircuitSpec {
    /// Default circuit with the buffer chain. `I1` is raised so the extra
    /// Josephson inductance of the chain leaves quiescent `I_sy` unchanged.
    pub fn with_buffer() -> Self {
        let b = BufferSpec::default();
        let lj = |ic: f64| FLUX_QUANTUM / (2.0 * std::f64::consts::PI * ic);
        let base = Self::default();
        let l_sb = base.l2 + base.l3 + base.l_sy;
        let l_buf = lj(b.ic_b1) + lj(b.ic_b2) + lj(b.ic_sf) + b.l_sf;
        Self {
            i1: base.i1 * (l_sb + l_buf) / l_sb,
            buffer: Some(b),
            ..base
        }
    }

    /// One storage-loop flux quantum expressed as loop current.
    pub fn fluxon_current(&self) -> f64 {
        FLUX_QUANTUM / (self.l_ss + self.l1)
    }

    fn check(&self) -> Result<(), SynapseError> {
        self.strengthen.check()?;
        self.weaken.check()?;
        for (name, v) in [
            ("l_ss", self.l_ss),
            ("l1", self.l1),
            ("l2", self.l2),
            ("l3", self.l3),
            ("l4", self.l4),
            ("l_sy", self.l_sy),
        ] {
            if !(v > 0.0) {
                return Err(spec_err(format!("{name} must be positive")));
            }
        }
        if self.k12.abs() >= 1.0 || self.k34.abs() >= 1.0 {
            return Err(spec_err("coupling factors must satisfy |k| < 1"));
        }
        Ok(())
    }
}

/// Builds the STDP circuit, with the buffer chain when `spec.buffer` is set.
pub fn build_stdp_circuit(spec: &StdpCircuitSpec) -> Result<Netlist, SynapseError> {
    spec.check()?;
    let ph = &spec.photons;
    let mut n = Netlist::new();
    add_receiver(&mut n, &spec.strengthen, "p", "x", &ph.strengthen_pre, &ph.strengthen_post)?;
    add_receiver(&mut n, &spec.weaken, "m", "y", &ph.weaken_post, &ph.weaken_pre)?;
    n.inductor("Lss", "x", "sc", spec.l_ss)
        .inductor("L1", "sc", "y", spec.l1);
    match spec.buffer {
        None => add_bias_loop(
            &mut n, spec.l2, spec.l3, spec.l4, spec.l_sy, spec.i1, spec.k12, spec.k34,
        ),
        Some(b) => {
            let jb = spec.strengthen.junction;
            n.inductor("L2", "0", "sb1", spec.l2)
                .inductor("L3", "sb1", "sb2", spec.l3)
                .inductor(ISY_INDUCTOR, "sb2", "b0", spec.l_sy)
                .junction("Jb2", "b0", "b1", jb.with_ic(b.ic_b2)?)
                .junction("Jb1", "b1", "f", jb.with_ic(b.ic_b1)?)
                .inductor("Lsf", "f", "f1", b.l_sf)
                .junction("Jsf", "f1", "0", jb.with_ic(b.ic_sf)?)
                .inductor("L4", "i1", "0", spec.l4)
                .source("I1", "i1", Waveform::Dc(spec.i1))
                .mutual("K12", "L1", "L2", Coupling::Factor(spec.k12))
                .mutual("K34", "L3", "L4", Coupling::Factor(spec.k34));
        }
    }
    n.probe(Probe::Current(ISY_INDUCTOR.into()))
        .probe(Probe::Current("L1".into()))
        .probe(Probe::Current("L3p".into()))
        .probe(Probe::Current("L3m".into()));
    finish(n)
}

/// Timing of a single Hebbian update simulation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventTiming {
    /// Quiet time before the first photon, long enough for the bias ramp
    /// current in `r1` to die out.
    pub settle: f64,
    /// Time simulated after the second photon.
    pub tail: f64,
    pub dt_max: f64,
}

impl Default for EventTiming {
    fn default() -> Self {
        Self {
            settle: 400e-9,
            tail: 100e-9,
            dt_max: 10e-12,
        }
    }
}

/// Outcome of one Hebbian update event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateEvent {
    pub delta_i_ss: f64,
    /// Net fluxons written into the storage loop (update junction slips
    /// minus storage junction slips).
    pub fluxons: i64,
}

fn loop_fluxons(trace: &Trace) -> i64 {
    trace
        .fluxon_events
        .iter()
        .map(|e| match e.element.as_str() {
            "Jsu" => e.polarity as i64,
            "Jss" => -(e.polarity as i64),
            _ => 0,
        })
        .sum()
}

/// Runs one pre/post photon pair `delta_t` apart from quiescence.
pub fn hebbian_event(
    spec: &HebbianCircuitSpec,
    delta_t: f64,
    timing: &EventTiming,
) -> Result<UpdateEvent, SynapseError> {
    if !(delta_t >= 0.0) {
        return Err(spec_err("delta_t must be non-negative"));
    }
    let t_pre = timing.settle;
    let spec = HebbianCircuitSpec {
        photons_pre: vec![t_pre],
        photons_post: vec![t_pre + delta_t],
        ..spec.clone()
    };
    let net = build_hebbian_circuit(&spec)?;
    let t_stop = t_pre + delta_t + timing.tail;
    let mut opts = RunOptions::new(t_stop, timing.dt_max);
    opts.output_step = 0.5e-9;
    let tr = simulate(&net, &opts)?;
    let mean = |t0: f64, t1: f64| {
        tr.mean_between("I(Lss)", t0, t1)
            .ok_or_else(|| SynapseError::MissingProbe("I(Lss)".into()))
    };
    let before = mean(t_pre - 20e-9, t_pre - 1e-9)?;
    let after = mean(t_stop - 10e-9, t_stop)?;
    Ok(UpdateEvent {
        delta_i_ss: after - before,
        fluxons: loop_fluxons(&tr),
    })
}

/// Drives the storage loop with back-to-back coincident photon pairs and
/// returns the largest stored current reached. Filling stops either when an
/// event adds less than one fluxon or when the storage junction switches and
/// the stored current falls back.
pub fn hebbian_saturation_current(
    spec: &HebbianCircuitSpec,
    timing: &EventTiming,
    max_events: usize,
) -> Result<f64, SynapseError> {
    let period = 300e-9;
    let times: Vec<f64> = (0..max_events)
        .map(|k| timing.settle + k as f64 * period)
        .collect();
    let spec = HebbianCircuitSpec {
        photons_pre: times.clone(),
        photons_post: times,
        ..spec.clone()
    };
    let net = build_hebbian_circuit(&spec)?;
    let t_stop = timing.settle + max_events as f64 * period;
    let mut opts = RunOptions::new(t_stop, timing.dt_max);
    opts.output_step = 1e-9;
    let tr = simulate(&net, &opts)?;
    let plateau = |k: usize| {
        let t = timing.settle + k as f64 * period;
        tr.mean_between("I(Lss)", t - 20e-9, t - 1e-9)
            .ok_or_else(|| SynapseError::MissingProbe("I(Lss)".into()))
    };
    let mut prev = plateau(0)?;
    for k in 1..=max_events {
        let cur = plateau(k)?;
        if cur - prev < spec.fluxon_current() {
            return Ok(prev.max(cur));
        }
        prev = cur;
    }
    Err(spec_err(format!(
        "storage loop still filling after {max_events} events"
    )))
}

/// One row of a Hebbian kernel sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelRow {
    pub delta_t: f64,
    pub i_su: f64,
    pub delta_i_ss: f64,
    pub fluxons: i64,
    /// `delta_i_ss / I_ss_sat`.
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KernelTable {
    pub i_ss_sat: f64,
    /// Rows ordered by `i_su`, then `delta_t`, each ascending as given.
    pub rows: Vec<KernelRow>,
}

impl KernelTable {
    /// Rows for one update-junction bias, in `delta_t` order.
    pub fn curve(&self, i_su: f64) -> Vec<KernelRow> {
        self.rows
            .iter()
            .filter(|r| (r.i_su - i_su).abs() < 1e-12)
            .copied()
            .collect()
    }

    /// Trapezoid integral of `fraction` over `delta_t` for one bias.
    pub fn integral(&self, i_su: f64) -> f64 {
        let c = self.curve(i_su);
        c.windows(2)
            .map(|w| 0.5 * (w[0].fraction + w[1].fraction) * (w[1].delta_t - w[0].delta_t))
            .sum()
    }

    /// CSV with columns `delta_t_ns,i_su_uA,delta_i_ss_nA,fluxons,fraction`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("delta_t_ns,i_su_uA,delta_i_ss_nA,fluxons,fraction\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                crate::engine::fmt_sig9(r.delta_t * 1e9),
                crate::engine::fmt_sig9(r.i_su * 1e6),
                crate::engine::fmt_sig9(r.delta_i_ss * 1e9),
                r.fluxons,
                crate::engine::fmt_sig9(r.fraction)
            ));
        }
        out
    }
}

/// Measures `I_ss_sat` at the circuit's own `i_su`, then runs one event per
/// `(i_su, delta_t)` point, spread over `jobs` workers.
pub fn sweep_hebbian_kernel(
    spec: &HebbianCircuitSpec,
    delta_ts: &[f64],
    i_sus: &[f64],
    timing: &EventTiming,
    jobs: usize,
) -> Result<KernelTable, SynapseError> {
    let i_ss_sat = hebbian_saturation_current(spec, timing, 20)?;
    let points: Vec<(f64, f64)> = i_sus
        .iter()
        .flat_map(|&i| delta_ts.iter().map(move |&d| (i, d)))
        .collect();
    let results = crate::par::map(&points, jobs, |&(i_su, delta_t)| {
        let mut s = spec.clone();
        s.receiver.i_su = i_su;
        hebbian_event(&s, delta_t, timing)
            .map(|ev| KernelRow {
                delta_t,
                i_su,
                delta_i_ss: ev.delta_i_ss,
                fluxons: ev.fluxons,
                fraction: ev.delta_i_ss / i_ss_sat,
            })
            .map_err(|e| SynapseError::SweepPoint {
                delta_t,
                i_su,
                source: Box::new(e),
            })
    });
    let rows = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(KernelTable { i_ss_sat, rows })
}

/// Synapse bias current series of a trace.
pub fn measure_isy(trace: &Trace) -> Result<&[f64], SynapseError> {
    trace
        .series(&format!("I({ISY_INDUCTOR})"))
        .ok_or_else(|| SynapseError::MissingProbe(format!("I({ISY_INDUCTOR})")))
}

/// Mean of `I_sy` over `[t0, t1]`.
pub fn isy_between(trace: &Trace, t0: f64, t1: f64) -> Result<f64, SynapseError> {
    measure_isy(trace)?;
    trace
        .mean_between(&format!("I({ISY_INDUCTOR})"), t0, t1)
        .ok_or_else(|| spec_err(format!("no samples between {t0:e} and {t1:e}")))
}

/// Assembles and runs a netlist with the given options.
pub fn simulate(netlist: &Netlist, opts: &RunOptions) -> Result<Trace, SynapseError> {
    let sys = assemble(netlist)?;
    Ok(run_transient_with(&sys, opts)?)
}
