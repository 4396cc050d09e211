//! Circuit data model: physical constants, element types, drive waveforms and
//! the netlist container consumed by the parser, the engine and the builders.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::PI;
use std::fmt;

use thiserror::Error;

/// Magnetic flux quantum h/2e in webers.
pub const FLUX_QUANTUM: f64 = 2.067833848e-15;

/// Name of the ground node.
pub const GROUND: &str = "0";

/// Default edge time of the SPD hotspot resistance toggle.
pub const DEFAULT_SPD_EDGE: f64 = 1e-12;

/// Default junction shunt resistance when only `Ic` and `betac` are given.
pub const DEFAULT_SHUNT_RESISTANCE: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub flux_quantum: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            flux_quantum: FLUX_QUANTUM,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("{field} must be positive (got {value})")]
    NonPositive { field: &'static str, value: f64 },
    #[error("{field} must be finite")]
    NonFinite { field: &'static str },
    #[error("inconsistent junction parameters: betac {given} does not match {computed} from Ic, R, C")]
    InconsistentJunction { given: f64, computed: f64 },
    #[error("invalid waveform: {0}")]
    Waveform(String),
    #[error("invalid SPD parameters: {0}")]
    Spd(String),
}

fn positive(field: &'static str, value: f64) -> Result<f64, ModelError> {
    if !value.is_finite() {
        return Err(ModelError::NonFinite { field });
    }
    if value <= 0.0 {
        return Err(ModelError::NonPositive { field, value });
    }
    Ok(value)
}

/// RCSJ junction parameters. `C` is always consistent with `Ic`, `betac` and `R`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JosephsonJunctionParams {
    pub critical_current: f64,
    pub stewart_mccumber: f64,
    pub shunt_resistance: f64,
    pub capacitance: f64,
}

impl JosephsonJunctionParams {
    /// Builds a junction from `Ic`, `betac` and `R`, deriving
    /// `C = betac * Phi0 / (2 pi Ic R^2)`.
    pub fn new(critical_current: f64, beta_c: f64, resistance: f64) -> Result<Self, ModelError> {
        let ic = positive("critical_current", critical_current)?;
        let bc = positive("stewart_mccumber", beta_c)?;
        let r = positive("shunt_resistance", resistance)?;
        Ok(Self {
            critical_current: ic,
            stewart_mccumber: bc,
            shunt_resistance: r,
            capacitance: bc * FLUX_QUANTUM / (2.0 * PI * ic * r * r),
        })
    }

    /// Builds a junction from all four values, rejecting inconsistent sets.
    pub fn from_all(ic: f64, beta_c: f64, r: f64, c: f64) -> Result<Self, ModelError> {
        let j = Self::new(ic, beta_c, r)?;
        positive("capacitance", c)?;
        let computed = 2.0 * PI * ic * r * r * c / FLUX_QUANTUM;
        if ((computed - beta_c) / beta_c).abs() > 1e-9 {
            return Err(ModelError::InconsistentJunction {
                given: beta_c,
                computed,
            });
        }
        Ok(Self { capacitance: c, ..j })
    }

    /// `2 pi Ic R^2 C / Phi0`, recomputed from the stored values.
    pub fn beta_c_from_parts(&self) -> f64 {
        2.0 * PI * self.critical_current * self.shunt_resistance.powi(2) * self.capacitance
            / FLUX_QUANTUM
    }

    /// Small-signal Josephson inductance `Phi0 / (2 pi Ic)`.
    pub fn josephson_inductance(&self) -> f64 {
        FLUX_QUANTUM / (2.0 * PI * self.critical_current)
    }
}

/// Convenience alias for [`JosephsonJunctionParams::new`].
pub fn make_junction(
    critical_current: f64,
    beta_c: f64,
    resistance: f64,
) -> Result<JosephsonJunctionParams, ModelError> {
    JosephsonJunctionParams::new(critical_current, beta_c, resistance)
}

/// Single-photon detector modeled as a timed resistance toggle.
///
/// Outside hotspot windows the element is a zero-resistance short. Each photon
/// arrival opens a window of `hotspot_duration` at `hotspot_resistance`, with
/// linear edges of `edge_time` on both sides.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdParams {
    pub hotspot_resistance: f64,
    pub hotspot_duration: f64,
    pub photon_arrival_times: Vec<f64>,
    pub edge_time: f64,
}

impl SpdParams {
    pub fn new(
        hotspot_resistance: f64,
        hotspot_duration: f64,
        photon_arrival_times: Vec<f64>,
    ) -> Result<Self, ModelError> {
        let p = Self {
            hotspot_resistance,
            hotspot_duration,
            photon_arrival_times,
            edge_time: DEFAULT_SPD_EDGE,
        };
        p.check()?;
        Ok(p)
    }

    pub fn check(&self) -> Result<(), ModelError> {
        positive("hotspot_resistance", self.hotspot_resistance)?;
        positive("hotspot_duration", self.hotspot_duration)?;
        positive("edge_time", self.edge_time)?;
        if self.photon_arrival_times.iter().any(|t| !t.is_finite()) {
            return Err(ModelError::Spd("non-finite photon arrival time".into()));
        }
        if self
            .photon_arrival_times
            .windows(2)
            .any(|w| w[1] <= w[0])
        {
            return Err(ModelError::Spd(
                "photon arrival times must be strictly increasing".into(),
            ));
        }
        Ok(())
    }

    /// Resistance at time `t`.
    pub fn resistance_at(&self, t: f64) -> f64 {
        let mut r: f64 = 0.0;
        let e = self.edge_time;
        for &ta in &self.photon_arrival_times {
            if t <= ta {
                break;
            }
            let end = ta + self.hotspot_duration;
            let frac = if t < ta + e {
                (t - ta) / e
            } else if t <= end {
                1.0
            } else if t < end + e {
                1.0 - (t - end) / e
            } else {
                0.0
            };
            r = r.max(frac * self.hotspot_resistance);
        }
        r
    }

    pub fn breakpoints(&self) -> Vec<f64> {
        let e = self.edge_time;
        self.photon_arrival_times
            .iter()
            .flat_map(|&ta| {
                let end = ta + self.hotspot_duration;
                [ta, ta + e, end, end + e]
            })
            .collect()
    }
}

/// Periodic trapezoidal pulse train.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SquareTrain {
    pub amplitude: f64,
    pub rise_time: f64,
    pub fall_time: f64,
    pub high_duration: f64,
    pub period: f64,
    pub start: f64,
    pub count: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Waveform {
    Dc(f64),
    SquareTrain(SquareTrain),
    PiecewiseLinear(Vec<(f64, f64)>),
}

impl Waveform {
    /// Standard drive pulse train: 100 ps edges, 1 ns plateau, 2 ns period.
    pub fn drive_train(amplitude: f64, start: f64, count: u64) -> Self {
        Waveform::SquareTrain(SquareTrain {
            amplitude,
            rise_time: 100e-12,
            fall_time: 100e-12,
            high_duration: 1e-9,
            period: 2e-9,
            start,
            count,
        })
    }

    pub fn check(&self) -> Result<(), ModelError> {
        match self {
            Waveform::Dc(v) => {
                if !v.is_finite() {
                    return Err(ModelError::NonFinite { field: "dc level" });
                }
            }
            Waveform::SquareTrain(s) => {
                positive("rise_time", s.rise_time)?;
                positive("fall_time", s.fall_time)?;
                if !(s.high_duration >= 0.0) || !s.amplitude.is_finite() || !s.start.is_finite() {
                    return Err(ModelError::Waveform(
                        "square train needs finite amplitude/start and high_duration >= 0".into(),
                    ));
                }
                if s.count == 0 {
                    return Err(ModelError::Waveform("square train count must be >= 1".into()));
                }
                if s.count > 1 && s.period <= s.rise_time + s.high_duration + s.fall_time {
                    return Err(ModelError::Waveform(
                        "period must exceed rise + high + fall for repeated pulses".into(),
                    ));
                }
            }
            Waveform::PiecewiseLinear(points) => {
                if points.is_empty() {
                    return Err(ModelError::Waveform("pwl needs at least one point".into()));
                }
                if points.iter().any(|(t, v)| !t.is_finite() || !v.is_finite()) {
                    return Err(ModelError::Waveform("pwl point not finite".into()));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(ModelError::Waveform(
                        "pwl times must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn value_at(&self, t: f64) -> f64 {
        match self {
            Waveform::Dc(v) => *v,
            Waveform::SquareTrain(s) => {
                if t < s.start {
                    return 0.0;
                }
                let k = ((t - s.start) / s.period).floor();
                if k >= s.count as f64 {
                    return 0.0;
                }
                let tau = t - s.start - k * s.period;
                let (r, h, f) = (s.rise_time, s.high_duration, s.fall_time);
                if tau < r {
                    s.amplitude * tau / r
                } else if tau <= r + h {
                    s.amplitude
                } else if tau < r + h + f {
                    s.amplitude * (1.0 - (tau - r - h) / f)
                } else {
                    0.0
                }
            }
            Waveform::PiecewiseLinear(points) => {
                let first = points[0];
                if t <= first.0 {
                    return first.1;
                }
                for w in points.windows(2) {
                    let ((t0, v0), (t1, v1)) = (w[0], w[1]);
                    if t <= t1 {
                        return v0 + (v1 - v0) * (t - t0) / (t1 - t0);
                    }
                }
                points[points.len() - 1].1
            }
        }
    }

    /// Corner times of the waveform in `[from, to]`.
    pub fn breakpoints(&self, from: f64, to: f64) -> Vec<f64> {
        let mut out = Vec::new();
        match self {
            Waveform::Dc(_) => {}
            Waveform::SquareTrain(s) => {
                if s.period > 0.0 && to >= s.start {
                    let first = (((from - s.start) / s.period).floor().max(0.0)) as u64;
                    let last = (((to - s.start) / s.period).ceil().max(0.0) as u64).min(s.count);
                    for k in first..last {
                        let t0 = s.start + k as f64 * s.period;
                        out.extend_from_slice(&[
                            t0,
                            t0 + s.rise_time,
                            t0 + s.rise_time + s.high_duration,
                            t0 + s.rise_time + s.high_duration + s.fall_time,
                        ]);
                    }
                }
            }
            Waveform::PiecewiseLinear(points) => out.extend(points.iter().map(|p| p.0)),
        }
        out.retain(|&t| t >= from && t <= to);
        out
    }
}

/// Mutual coupling strength, either absolute (H) or as a coupling factor `k`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Coupling {
    Mutual(f64),
    Factor(f64),
}

impl Coupling {
    pub fn mutual_inductance(&self, la: f64, lb: f64) -> f64 {
        match *self {
            Coupling::Mutual(m) => m,
            Coupling::Factor(k) => k * (la * lb).sqrt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Device {
    Junction(JosephsonJunctionParams),
    Inductor(f64),
    Resistor(f64),
    CurrentSource(Waveform),
    Spd(SpdParams),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ElementKind {
    /// A device between two nodes. Currents are positive from `pos` to `neg`
    /// through the device; a current source pushes its value from `pos`
    /// through itself into `neg`.
    TwoTerminal {
        pos: String,
        neg: String,
        device: Device,
    },
    /// Coupling between two inductors named in the same netlist. Positive
    /// `M` links positive current in `inductor_a` to positive flux in
    /// `inductor_b` with the terminal order defining the dot.
    Mutual {
        inductor_a: String,
        inductor_b: String,
        coupling: Coupling,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub kind: ElementKind,
}

impl Element {
    pub fn two_terminal(name: &str, pos: &str, neg: &str, device: Device) -> Self {
        Self {
            name: name.to_string(),
            kind: ElementKind::TwoTerminal {
                pos: pos.to_string(),
                neg: neg.to_string(),
                device,
            },
        }
    }

    pub fn terminals(&self) -> Option<(&str, &str)> {
        match &self.kind {
            ElementKind::TwoTerminal { pos, neg, .. } => Some((pos, neg)),
            ElementKind::Mutual { .. } => None,
        }
    }

    pub fn device(&self) -> Option<&Device> {
        match &self.kind {
            ElementKind::TwoTerminal { device, .. } => Some(device),
            ElementKind::Mutual { .. } => None,
        }
    }

    pub fn inductance(&self) -> Option<f64> {
        match self.device() {
            Some(Device::Inductor(l)) => Some(*l),
            _ => None,
        }
    }

    pub fn is_junction(&self) -> bool {
        matches!(self.device(), Some(Device::Junction(_)))
    }
}

/// Quantity recorded in a trace.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Probe {
    /// Phase of a node relative to ground (rad).
    NodePhase(String),
    /// Node voltage `Phi0/2pi * dphi/dt` (V).
    NodeVoltage(String),
    /// Branch current of a two-terminal element, positive from `pos` to `neg` (A).
    Current(String),
}

impl Probe {
    pub fn label(&self) -> String {
        match self {
            Probe::NodePhase(n) => format!("P({n})"),
            Probe::NodeVoltage(n) => format!("V({n})"),
            Probe::Current(e) => format!("I({e})"),
        }
    }

    pub fn parse_label(s: &str) -> Option<Self> {
        let s = s.trim();
        let (head, rest) = s.split_at(s.find('(')?);
        let inner = rest.strip_prefix('(')?.strip_suffix(')')?.trim();
        if inner.is_empty() || inner.contains(char::is_whitespace) {
            return None;
        }
        match head.to_ascii_uppercase().as_str() {
            "P" => Some(Probe::NodePhase(inner.to_string())),
            "V" => Some(Probe::NodeVoltage(inner.to_string())),
            "I" => Some(Probe::Current(inner.to_string())),
            _ => None,
        }
    }
}

impl fmt::Display for Probe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Transient analysis directive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransientSpec {
    pub dt_max: f64,
    pub t_stop: f64,
    /// Minimum spacing between recorded samples; 0 records every accepted step.
    pub output_step: f64,
}

impl Default for TransientSpec {
    fn default() -> Self {
        Self {
            dt_max: 1e-12,
            t_stop: 1e-9,
            output_step: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub nodes: BTreeSet<String>,
    pub elements: Vec<Element>,
    pub analysis: TransientSpec,
    pub probes: Vec<Probe>,
}

impl Default for Netlist {
    fn default() -> Self {
        Self::new()
    }
}

impl Netlist {
    /// Empty netlist holding only the ground node.
    pub fn new() -> Self {
        Self {
            nodes: BTreeSet::from([GROUND.to_string()]),
            elements: Vec::new(),
            analysis: TransientSpec::default(),
            probes: Vec::new(),
        }
    }

    pub fn declare_node(&mut self, node: &str) {
        if !self.nodes.contains(node) {
            self.nodes.insert(node.to_string());
        }
    }

    /// Appends an element, declaring its terminal nodes.
    pub fn push(&mut self, element: Element) -> &mut Self {
        if let Some((a, b)) = element.terminals() {
            let (a, b) = (a.to_string(), b.to_string());
            self.declare_node(&a);
            self.declare_node(&b);
        }
        self.elements.push(element);
        self
    }

    pub fn add(&mut self, name: &str, pos: &str, neg: &str, device: Device) -> &mut Self {
        self.push(Element::two_terminal(name, pos, neg, device))
    }

    pub fn inductor(&mut self, name: &str, pos: &str, neg: &str, l: f64) -> &mut Self {
        self.add(name, pos, neg, Device::Inductor(l))
    }

    pub fn resistor(&mut self, name: &str, pos: &str, neg: &str, r: f64) -> &mut Self {
        self.add(name, pos, neg, Device::Resistor(r))
    }

    pub fn junction(
        &mut self,
        name: &str,
        pos: &str,
        neg: &str,
        params: JosephsonJunctionParams,
    ) -> &mut Self {
        self.add(name, pos, neg, Device::Junction(params))
    }

    /// Current source pushing `waveform` into node `into` from ground.
    pub fn source(&mut self, name: &str, into: &str, waveform: Waveform) -> &mut Self {
        self.add(name, GROUND, into, Device::CurrentSource(waveform))
    }

    pub fn spd(&mut self, name: &str, pos: &str, neg: &str, params: SpdParams) -> &mut Self {
        self.add(name, pos, neg, Device::Spd(params))
    }

    pub fn mutual(&mut self, name: &str, a: &str, b: &str, coupling: Coupling) -> &mut Self {
        self.push(Element {
            name: name.to_string(),
            kind: ElementKind::Mutual {
                inductor_a: a.to_string(),
                inductor_b: b.to_string(),
                coupling,
            },
        })
    }

    pub fn probe(&mut self, probe: Probe) -> &mut Self {
        if !self.probes.contains(&probe) {
            self.probes.push(probe);
        }
        self
    }

    pub fn element(&self, name: &str) -> Option<&Element> {
        self.elements.iter().find(|e| e.name == name)
    }

    pub fn element_mut(&mut self, name: &str) -> Option<&mut Element> {
        self.elements.iter_mut().find(|e| e.name == name)
    }

    /// Replaces the waveform of a current source. Returns false if `name` is
    /// not a current source.
    pub fn set_waveform(&mut self, name: &str, waveform: Waveform) -> bool {
        match self.element_mut(name).map(|e| &mut e.kind) {
            Some(ElementKind::TwoTerminal {
                device: Device::CurrentSource(w),
                ..
            }) => {
                *w = waveform;
                true
            }
            _ => false,
        }
    }

    /// Replaces the photon arrival schedule of an SPD.
    pub fn set_photons(&mut self, name: &str, times: Vec<f64>) -> bool {
        match self.element_mut(name).map(|e| &mut e.kind) {
            Some(ElementKind::TwoTerminal {
                device: Device::Spd(p),
                ..
            }) => {
                p.photon_arrival_times = times;
                true
            }
            _ => false,
        }
    }

    pub fn non_ground_nodes(&self) -> impl Iterator<Item = &String> {
        self.nodes.iter().filter(|n| n.as_str() != GROUND)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum DiagnosticKind {
    UndeclaredNode,
    MissingGround,
    DuplicateName,
    InvalidValue,
    UnknownInductor,
    UnphysicalCoupling,
    Disconnected,
    UnknownProbe,
    /// First letter of the name does not select the element's kind.
    NameKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub kind: DiagnosticKind,
    pub element: Option<String>,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.element {
            Some(e) => write!(f, "{e}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

fn device_check(device: &Device) -> Result<(), ModelError> {
    match device {
        Device::Junction(j) => {
            positive("critical_current", j.critical_current)?;
            positive("stewart_mccumber", j.stewart_mccumber)?;
            positive("shunt_resistance", j.shunt_resistance)?;
            positive("capacitance", j.capacitance)?;
            Ok(())
        }
        Device::Inductor(l) => positive("inductance", *l).map(|_| ()),
        Device::Resistor(r) => positive("resistance", *r).map(|_| ()),
        Device::CurrentSource(w) => w.check(),
        Device::Spd(p) => p.check(),
    }
}

/// Returns every violation found in `netlist`, in element order. An empty
/// vector means the netlist is valid.
pub fn validate_netlist(netlist: &Netlist) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let diag = |kind, element: Option<&str>, message: String| Diagnostic {
        kind,
        element: element.map(str::to_string),
        message,
    };
    if !netlist.nodes.contains(GROUND) {
        out.push(diag(
            DiagnosticKind::MissingGround,
            None,
            "ground node 0 not declared".into(),
        ));
    }
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for e in &netlist.elements {
        let count = seen.entry(e.name.as_str()).or_default();
        *count += 1;
        if *count == 2 {
            out.push(diag(
                DiagnosticKind::DuplicateName,
                Some(&e.name),
                format!("duplicate element name {}", e.name),
            ));
        }
    }
    for e in &netlist.elements {
        let first = e.name.chars().next().map(|c| c.to_ascii_uppercase());
        let ok = match (&e.kind, first) {
            (ElementKind::Mutual { .. }, Some('K')) => true,
            (ElementKind::TwoTerminal { device, .. }, Some(c)) => matches!(
                (device, c),
                (Device::Junction(_), 'B' | 'J')
                    | (Device::Inductor(_), 'L')
                    | (Device::Resistor(_), 'R')
                    | (Device::CurrentSource(_), 'I')
                    | (Device::Spd(_), 'S')
            ),
            _ => false,
        };
        if !ok {
            out.push(diag(
                DiagnosticKind::NameKind,
                Some(&e.name),
                format!("name {:?} does not start with the letter of its element kind", e.name),
            ));
        }
    }
    let inductors: HashMap<&str, f64> = netlist
        .elements
        .iter()
        .filter_map(|e| e.inductance().map(|l| (e.name.as_str(), l)))
        .collect();

    for e in &netlist.elements {
        match &e.kind {
            ElementKind::TwoTerminal { pos, neg, device } => {
                for node in [pos, neg] {
                    if !netlist.nodes.contains(node) {
                        out.push(diag(
                            DiagnosticKind::UndeclaredNode,
                            Some(&e.name),
                            format!("undeclared node {node}"),
                        ));
                    }
                }
                if let Err(err) = device_check(device) {
                    out.push(diag(DiagnosticKind::InvalidValue, Some(&e.name), err.to_string()));
                }
            }
            ElementKind::Mutual {
                inductor_a,
                inductor_b,
                coupling,
            } => {
                let la = inductors.get(inductor_a.as_str());
                let lb = inductors.get(inductor_b.as_str());
                for (name, l) in [(inductor_a, la), (inductor_b, lb)] {
                    if l.is_none() {
                        out.push(diag(
                            DiagnosticKind::UnknownInductor,
                            Some(&e.name),
                            format!("mutual references unknown inductor {name}"),
                        ));
                    }
                }
                if inductor_a == inductor_b {
                    out.push(diag(
                        DiagnosticKind::InvalidValue,
                        Some(&e.name),
                        "mutual couples an inductor to itself".into(),
                    ));
                }
                let value = match coupling {
                    Coupling::Mutual(m) | Coupling::Factor(m) => *m,
                };
                if !value.is_finite() {
                    out.push(diag(
                        DiagnosticKind::InvalidValue,
                        Some(&e.name),
                        "coupling must be finite".into(),
                    ));
                } else if let (Some(&la), Some(&lb)) = (la, lb) {
                    let m = coupling.mutual_inductance(la, lb);
                    if la > 0.0 && lb > 0.0 && m.abs() > (la * lb).sqrt() * (1.0 + 1e-12) {
                        out.push(diag(
                            DiagnosticKind::UnphysicalCoupling,
                            Some(&e.name),
                            format!(
                                "unphysical coupling: |M| = {:.4e} exceeds sqrt(La*Lb) = {:.4e}",
                                m.abs(),
                                (la * lb).sqrt()
                            ),
                        ));
                    }
                }
            }
        }
    }

    // Connectivity to ground through element terminals.
    let index: BTreeMap<&str, usize> = netlist
        .nodes
        .iter()
        .enumerate()
        .map(|(i, n)| (n.as_str(), i))
        .collect();
    let mut parent: Vec<usize> = (0..index.len()).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    for e in &netlist.elements {
        if let Some((a, b)) = e.terminals() {
            if let (Some(&ia), Some(&ib)) = (index.get(a), index.get(b)) {
                let (ra, rb) = (find(&mut parent, ia), find(&mut parent, ib));
                parent[ra] = rb;
            }
        }
    }
    if let Some(&g) = index.get(GROUND) {
        let root = find(&mut parent, g);
        for (node, &i) in &index {
            if find(&mut parent, i) != root {
                out.push(diag(
                    DiagnosticKind::Disconnected,
                    None,
                    format!("node {node} is not connected to ground"),
                ));
            }
        }
    }

    let names: BTreeSet<&str> = netlist.elements.iter().map(|e| e.name.as_str()).collect();
    for p in &netlist.probes {
        let ok = match p {
            Probe::NodePhase(n) | Probe::NodeVoltage(n) => netlist.nodes.contains(n),
            Probe::Current(e) => {
                names.contains(e.as_str())
                    && netlist.element(e).is_some_and(|el| el.terminals().is_some())
            }
        };
        if !ok {
            out.push(diag(
                DiagnosticKind::UnknownProbe,
                None,
                format!("probe {p} references an unknown node or element"),
            ));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn junction_capacitance_from_beta_c() {
        let j = make_junction(40e-6, 0.95, 5.0).unwrap();
        // C = betac * Phi0 / (2 pi Ic R^2), evaluated by hand: 0.3127 pF
        assert_relative_eq!(j.capacitance, 0.3127e-12, max_relative = 1e-3);
        assert_relative_eq!(j.beta_c_from_parts(), 0.95, max_relative = 1e-9);
        let small = make_junction(10e-6, 0.95, 5.0).unwrap();
        assert_relative_eq!(small.capacitance, 1.251e-12, max_relative = 1e-3);
        assert_relative_eq!(small.capacitance / j.capacitance, 4.0, max_relative = 1e-12);
    }

    #[test]
    fn junction_rejects_non_positive_inputs() {
        assert_eq!(
            make_junction(0.0, 0.95, 5.0).unwrap_err(),
            ModelError::NonPositive {
                field: "critical_current",
                value: 0.0
            }
        );
        assert!(matches!(
            make_junction(40e-6, -1.0, 5.0),
            Err(ModelError::NonPositive {
                field: "stewart_mccumber",
                ..
            })
        ));
        assert!(matches!(
            make_junction(40e-6, 0.95, 0.0),
            Err(ModelError::NonPositive {
                field: "shunt_resistance",
                ..
            })
        ));
        let j = make_junction(40e-6, 0.95, 5.0).unwrap();
        assert!(JosephsonJunctionParams::from_all(40e-6, 0.95, 5.0, j.capacitance).is_ok());
        assert!(JosephsonJunctionParams::from_all(40e-6, 0.95, 5.0, 2.0 * j.capacitance).is_err());
    }

    #[test]
    fn square_train_shape() {
        let w = Waveform::SquareTrain(SquareTrain {
            amplitude: 10e-6,
            rise_time: 100e-12,
            fall_time: 100e-12,
            high_duration: 1e-9,
            period: 2e-9,
            start: 1e-9,
            count: 3,
        });
        assert_eq!(w.value_at(0.5e-9), 0.0);
        assert_eq!(w.value_at(1e-9 - 1e-15), 0.0);
        // plateau centre of the second pulse
        assert_eq!(w.value_at(1e-9 + 2e-9 + 100e-12 + 0.5e-9), 10e-6);
        assert_relative_eq!(w.value_at(1e-9 + 50e-12), 5e-6, max_relative = 1e-9);
        assert_eq!(w.value_at(1e-9 + 3.0 * 2e-9 + 0.5e-9), 0.0);
        let bps = w.breakpoints(0.0, 1.0);
        assert_eq!(bps.len(), 12);
        assert!(w.check().is_ok());
        let bad = Waveform::SquareTrain(SquareTrain {
            period: 1e-9,
            ..match w {
                Waveform::SquareTrain(s) => s,
                _ => unreachable!(),
            }
        });
        assert!(bad.check().is_err());
    }

    #[test]
    fn pwl_and_spd_windows() {
        let w = Waveform::PiecewiseLinear(vec![(0.0, 0.0), (1e-9, 2.0), (2e-9, 0.0)]);
        assert_relative_eq!(w.value_at(0.5e-9), 1.0);
        assert_eq!(w.value_at(5e-9), 0.0);
        assert!(Waveform::PiecewiseLinear(vec![(1.0, 0.0), (1.0, 1.0)])
            .check()
            .is_err());

        let spd = SpdParams::new(5e3, 200e-12, vec![10e-9]).unwrap();
        assert_eq!(spd.resistance_at(9e-9), 0.0);
        assert_eq!(spd.resistance_at(10.1e-9), 5e3);
        assert_relative_eq!(spd.resistance_at(10e-9 + 0.5e-12), 2.5e3, max_relative = 1e-6);
        assert_eq!(spd.resistance_at(10.3e-9), 0.0);
        assert!(SpdParams::new(5e3, 200e-12, vec![2e-9, 1e-9]).is_err());
    }

    fn cell() -> Netlist {
        let mut n = Netlist::new();
        let j = make_junction(40e-6, 0.95, 5.0).unwrap();
        n.junction("B1", "1", "0", j)
            .inductor("L1", "1", "2", 45e-12)
            .inductor("L2", "3", "0", 45e-12)
            .resistor("R1", "2", "0", 1.0)
            .inductor("L3", "2", "3", 10e-12)
            .mutual("K1", "L1", "L2", Coupling::Factor(0.5))
            .source("I1", "1", Waveform::Dc(20e-6));
        n
    }

    #[test]
    fn valid_netlist_has_no_diagnostics() {
        assert!(validate_netlist(&cell()).is_empty());
    }

    #[test]
    fn reports_undeclared_node_and_duplicates() {
        let mut n = cell();
        n.elements.push(Element::two_terminal(
            "R9",
            "n9",
            "0",
            Device::Resistor(1.0),
        ));
        n.elements.push(Element::two_terminal(
            "R1",
            "1",
            "0",
            Device::Resistor(-1.0),
        ));
        let d = validate_netlist(&n);
        assert!(d.iter().any(|d| d.message == "undeclared node n9"));
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::DuplicateName));
        assert!(d.iter().any(|d| d.kind == DiagnosticKind::InvalidValue));
        // pure
        assert_eq!(d, validate_netlist(&n));
    }

    #[test]
    fn reports_unphysical_coupling() {
        let mut n = cell();
        let m = 1.1 * (45e-12f64 * 45e-12).sqrt();
        n.mutual("K2", "L1", "L2", Coupling::Mutual(m));
        let d = validate_netlist(&n);
        assert!(d
            .iter()
            .any(|d| d.kind == DiagnosticKind::UnphysicalCoupling
                && d.message.starts_with("unphysical coupling")));
        let mut n = cell();
        n.mutual("K3", "L1", "Lx", Coupling::Factor(0.1));
        assert!(validate_netlist(&n)
            .iter()
            .any(|d| d.kind == DiagnosticKind::UnknownInductor));
    }

    #[test]
    fn reports_disconnected_island() {
        let mut n = cell();
        n.inductor("L8", "a", "b", 1e-12);
        let d = validate_netlist(&n);
        assert_eq!(
            d.iter()
                .filter(|d| d.kind == DiagnosticKind::Disconnected)
                .count(),
            2
        );
    }

    #[test]
    fn probe_labels_round_trip() {
        for p in [
            Probe::NodePhase("x1".into()),
            Probe::NodeVoltage("3".into()),
            Probe::Current("Lsy".into()),
        ] {
            assert_eq!(Probe::parse_label(&p.label()), Some(p));
        }
        assert_eq!(Probe::parse_label("Q(3)"), None);
    }
}
