//! Node-phase transient solver.
//!
//! Unknowns are the phases of all non-ground nodes (`phi = 2 pi / Phi0 * int V dt`)
//! plus one branch current per SPD. Inductor networks are merged into blocks
//! of mutually coupled inductors whose currents are `Phi0/2pi * Gamma * dphi`,
//! with `Gamma` the inverse inductance matrix of the block. Each step is a
//! trapezoidal (or, right after a waveform corner, backward Euler) update
//! solved with Newton iteration on a dense Jacobian.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::circuit::{
    validate_netlist, Device, Diagnostic, ElementKind, JosephsonJunctionParams, Netlist, Probe,
    SpdParams, Waveform, FLUX_QUANTUM, GROUND,
};

/// `Phi0 / 2 pi`.
pub const PHI_SCALE: f64 = FLUX_QUANTUM / (2.0 * PI);

/// Rows are scaled by this (A or V to micro-units) before the linear solve.
const ROW_SCALE: f64 = 1e6;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("netlist is invalid: {}", join_diags(.0))]
    Invalid(Vec<Diagnostic>),
    #[error("singular inductance block {0}")]
    SingularInductanceBlock(String),
    #[error("integration failed at t = {time:.6e} s: {reason}")]
    Integration { time: f64, reason: String },
    #[error("non-finite state at t = {time:.6e} s")]
    NonFinite { time: f64 },
    #[error("unknown element {0}")]
    UnknownElement(String),
    #[error("{0} is not recorded in this trace")]
    NotProbed(String),
    #[error("invalid run options: {0}")]
    Options(String),
}

fn join_diags(d: &[Diagnostic]) -> String {
    d.iter().map(|d| d.to_string()).collect::<Vec<_>>().join("; ")
}

/// Node index, `None` for ground.
type Node = Option<usize>;

#[derive(Debug, Clone)]
struct JunctionBranch {
    name: String,
    a: Node,
    b: Node,
    params: JosephsonJunctionParams,
}

#[derive(Debug, Clone)]
struct ResistorBranch {
    a: Node,
    b: Node,
    g: f64,
}

#[derive(Debug, Clone)]
struct InductorBlock {
    names: Vec<String>,
    ends: Vec<(Node, Node)>,
    inductance: DMatrix<f64>,
    gamma: DMatrix<f64>,
}

#[derive(Debug, Clone)]
struct SourceBranch {
    a: Node,
    b: Node,
    waveform: Waveform,
}

#[derive(Debug, Clone)]
struct SpdBranch {
    a: Node,
    b: Node,
    params: SpdParams,
}

#[derive(Debug, Clone, Copy)]
enum BranchRef {
    Junction(usize),
    Resistor(usize),
    Inductor { block: usize, index: usize },
    Source(usize),
    Spd(usize),
}

/// Assembled circuit equations.
#[derive(Debug, Clone)]
pub struct SimSystem {
    node_names: Vec<String>,
    node_index: HashMap<String, usize>,
    junctions: Vec<JunctionBranch>,
    resistors: Vec<ResistorBranch>,
    blocks: Vec<InductorBlock>,
    sources: Vec<SourceBranch>,
    spds: Vec<SpdBranch>,
    branches: BTreeMap<String, BranchRef>,
    default_probes: Vec<Probe>,
    analysis: crate::circuit::TransientSpec,
}

fn union_find_root(p: &mut [usize], mut i: usize) -> usize {
    while p[i] != i {
        p[i] = p[p[i]];
        i = p[i];
    }
    i
}

/// Builds the equation system for a valid netlist.
pub fn assemble(netlist: &Netlist) -> Result<SimSystem, EngineError> {
    let diags = validate_netlist(netlist);
    if !diags.is_empty() {
        return Err(EngineError::Invalid(diags));
    }
    let node_names: Vec<String> = netlist.non_ground_nodes().cloned().collect();
    let node_index: HashMap<String, usize> = node_names
        .iter()
        .enumerate()
        .map(|(i, n)| (n.clone(), i))
        .collect();
    let node = |n: &str| -> Node {
        if n == GROUND {
            None
        } else {
            Some(node_index[n])
        }
    };

    let mut sys = SimSystem {
        node_names: node_names.clone(),
        node_index: node_index.clone(),
        junctions: Vec::new(),
        resistors: Vec::new(),
        blocks: Vec::new(),
        sources: Vec::new(),
        spds: Vec::new(),
        branches: BTreeMap::new(),
        default_probes: netlist.probes.clone(),
        analysis: netlist.analysis,
    };

    let mut inductors: Vec<(String, Node, Node, f64)> = Vec::new();
    for e in &netlist.elements {
        let ElementKind::TwoTerminal { pos, neg, device } = &e.kind else {
            continue;
        };
        let (a, b) = (node(pos), node(neg));
        let r = match device {
            Device::Junction(p) => {
                sys.junctions.push(JunctionBranch {
                    name: e.name.clone(),
                    a,
                    b,
                    params: *p,
                });
                BranchRef::Junction(sys.junctions.len() - 1)
            }
            Device::Resistor(r) => {
                sys.resistors.push(ResistorBranch { a, b, g: 1.0 / r });
                BranchRef::Resistor(sys.resistors.len() - 1)
            }
            Device::CurrentSource(w) => {
                sys.sources.push(SourceBranch {
                    a,
                    b,
                    waveform: w.clone(),
                });
                BranchRef::Source(sys.sources.len() - 1)
            }
            Device::Spd(p) => {
                sys.spds.push(SpdBranch {
                    a,
                    b,
                    params: p.clone(),
                });
                BranchRef::Spd(sys.spds.len() - 1)
            }
            Device::Inductor(l) => {
                inductors.push((e.name.clone(), a, b, *l));
                continue;
            }
        };
        sys.branches.insert(e.name.clone(), r);
    }

    // Group inductors linked by mutual couplings.
    let ind_pos: HashMap<&str, usize> = inductors
        .iter()
        .enumerate()
        .map(|(i, l)| (l.0.as_str(), i))
        .collect();
    let mut parent: Vec<usize> = (0..inductors.len()).collect();
    let mut mutuals: Vec<(usize, usize, f64)> = Vec::new();
    for e in &netlist.elements {
        if let ElementKind::Mutual {
            inductor_a,
            inductor_b,
            coupling,
        } = &e.kind
        {
            let (i, j) = (ind_pos[inductor_a.as_str()], ind_pos[inductor_b.as_str()]);
            let m = coupling.mutual_inductance(inductors[i].3, inductors[j].3);
            mutuals.push((i, j, m));
            let (ri, rj) = (
                union_find_root(&mut parent, i),
                union_find_root(&mut parent, j),
            );
            parent[ri] = rj;
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..inductors.len() {
        let r = union_find_root(&mut parent, i);
        groups.entry(r).or_default().push(i);
    }
    let mut groups: Vec<Vec<usize>> = groups.into_values().collect();
    groups.sort_by_key(|g| g[0]);
    for members in groups {
        let local: HashMap<usize, usize> =
            members.iter().enumerate().map(|(k, &i)| (i, k)).collect();
        let n = members.len();
        let mut l = DMatrix::zeros(n, n);
        for (k, &i) in members.iter().enumerate() {
            l[(k, k)] = inductors[i].3;
        }
        for &(i, j, m) in &mutuals {
            if let (Some(&p), Some(&q)) = (local.get(&i), local.get(&j)) {
                l[(p, q)] += m;
                l[(q, p)] += m;
            }
        }
        let names: Vec<String> = members.iter().map(|&i| inductors[i].0.clone()).collect();
        let singular = || EngineError::SingularInductanceBlock(format!("[{}]", names.join(", ")));
        let chol = l.clone().cholesky().ok_or_else(singular)?;
        // Reject numerically singular blocks that still factor due to rounding.
        let factor = chol.l();
        for k in 0..n {
            if factor[(k, k)].powi(2) < 1e-9 * l[(k, k)] {
                return Err(singular());
            }
        }
        let gamma = chol.inverse();
        let block = sys.blocks.len();
        for (index, &i) in members.iter().enumerate() {
            sys.branches
                .insert(inductors[i].0.clone(), BranchRef::Inductor { block, index });
        }
        sys.blocks.push(InductorBlock {
            ends: members
                .iter()
                .map(|&i| (inductors[i].1, inductors[i].2))
                .collect(),
            names,
            inductance: l,
            gamma,
        });
    }
    Ok(sys)
}

impl SimSystem {
    /// Number of unknowns (node phases plus SPD branch currents).
    pub fn unknown_count(&self) -> usize {
        self.node_names.len() + self.spds.len()
    }

    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn junction_names(&self) -> Vec<&str> {
        self.junctions.iter().map(|j| j.name.as_str()).collect()
    }

    /// Inductance matrix and member names of every coupled inductor block.
    pub fn inductance_blocks(&self) -> Vec<(Vec<String>, DMatrix<f64>)> {
        self.blocks
            .iter()
            .map(|b| (b.names.clone(), b.inductance.clone()))
            .collect()
    }

    pub fn analysis(&self) -> crate::circuit::TransientSpec {
        self.analysis
    }

    fn check_probe(&self, p: &Probe) -> Result<(), EngineError> {
        match p {
            Probe::NodePhase(n) | Probe::NodeVoltage(n) => {
                if n == GROUND || self.node_index.contains_key(n) {
                    Ok(())
                } else {
                    Err(EngineError::UnknownElement(n.clone()))
                }
            }
            Probe::Current(e) => {
                if self.branches.contains_key(e) {
                    Ok(())
                } else {
                    Err(EngineError::UnknownElement(e.clone()))
                }
            }
        }
    }
}

/// Integration controls.
#[derive(Debug, Clone)]
pub struct RunOptions {
    pub t_stop: f64,
    pub dt_max: f64,
    pub dt_min: f64,
    /// Sources are scaled linearly from 0 to 1 over this interval before t = 0.
    pub ramp: f64,
    /// Minimum spacing of recorded samples; 0 records every accepted step.
    pub output_step: f64,
    /// Per-step local truncation error target for node phases (rad).
    pub phase_tolerance: f64,
    /// Largest accepted change of any junction phase in one step (rad).
    pub max_phase_step: f64,
    /// Probes recorded in addition to those declared in the netlist.
    pub extra_probes: Vec<Probe>,
    /// Initial currents of named inductors (A), stored as trapped flux.
    pub initial_currents: Vec<(String, f64)>,
}

impl RunOptions {
    pub fn new(t_stop: f64, dt_max: f64) -> Self {
        Self {
            t_stop,
            dt_max,
            dt_min: 1e-18,
            ramp: 5e-9,
            output_step: 0.0,
            phase_tolerance: 2e-5,
            max_phase_step: PI / 8.0,
            extra_probes: Vec::new(),
            initial_currents: Vec::new(),
        }
    }

    /// Options taken from the netlist's `.tran` directive.
    pub fn from_system(system: &SimSystem) -> Self {
        let a = system.analysis;
        let mut o = Self::new(a.t_stop, a.dt_max);
        o.output_step = a.output_step;
        o
    }

    pub fn probe(mut self, p: Probe) -> Self {
        self.extra_probes.push(p);
        self
    }
}

/// A detected 2 pi phase slip of a junction.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxonEvent {
    pub element: String,
    pub time: f64,
    /// +1 when the branch phase (pos minus neg) increases through an odd
    /// multiple of pi, -1 when it decreases.
    pub polarity: i32,
}

/// Complete solver state at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub time: f64,
    pub phases: Vec<f64>,
    pub phase_rates: Vec<f64>,
    pub phase_accels: Vec<f64>,
    pub spd_currents: Vec<f64>,
}

/// Recorded simulation output.
#[derive(Debug, Clone)]
pub struct Trace {
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub columns: Vec<Vec<f64>>,
    /// Largest node voltage magnitude over the steps leading to each sample.
    pub max_voltage: Vec<f64>,
    pub fluxon_events: Vec<FluxonEvent>,
    junction_phase_start: BTreeMap<String, f64>,
    junction_phase_end: BTreeMap<String, f64>,
    pub final_state: SimState,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
}

impl Trace {
    pub fn series(&self, label: &str) -> Option<&[f64]> {
        self.labels
            .iter()
            .position(|l| l == label)
            .map(|i| self.columns[i].as_slice())
    }

    pub fn probe_series(&self, probe: &Probe) -> Result<&[f64], EngineError> {
        self.series(&probe.label())
            .ok_or_else(|| EngineError::NotProbed(probe.label()))
    }

    /// Value of a series at the last sample with time <= `t`.
    pub fn sample_at(&self, label: &str, t: f64) -> Option<f64> {
        let s = self.series(label)?;
        let idx = self.times.partition_point(|&x| x <= t);
        s.get(idx.saturating_sub(1)).copied()
    }

    /// Mean of a series over samples in `[t0, t1]`.
    pub fn mean_between(&self, label: &str, t0: f64, t1: f64) -> Option<f64> {
        let s = self.series(label)?;
        let lo = self.times.partition_point(|&x| x < t0);
        let hi = self.times.partition_point(|&x| x <= t1);
        if hi <= lo {
            return None;
        }
        // Time-weighted (trapezoid) average.
        if hi - lo == 1 {
            return Some(s[lo]);
        }
        let mut acc = 0.0;
        for i in lo..hi - 1 {
            acc += 0.5 * (s[i] + s[i + 1]) * (self.times[i + 1] - self.times[i]);
        }
        Some(acc / (self.times[hi - 1] - self.times[lo]))
    }

    /// True if every node voltage stays below `threshold` over `[t - window, t]`.
    pub fn is_quiescent(&self, t: f64, window: f64, threshold: f64) -> bool {
        let lo = self.times.partition_point(|&x| x < t - window);
        let hi = self.times.partition_point(|&x| x <= t);
        hi > lo && self.max_voltage[lo..hi].iter().all(|&v| v < threshold)
    }

    /// Junction branch phase at t = 0 and at the end of the run.
    pub fn junction_phase_endpoints(&self, element: &str) -> Option<(f64, f64)> {
        Some((
            *self.junction_phase_start.get(element)?,
            *self.junction_phase_end.get(element)?,
        ))
    }

    /// Fluxon events of one junction within `[t0, t1]`, summed by polarity.
    pub fn net_fluxons_between(&self, element: &str, t0: f64, t1: f64) -> i64 {
        self.fluxon_events
            .iter()
            .filter(|e| e.element == element && e.time >= t0 && e.time <= t1)
            .map(|e| e.polarity as i64)
            .sum()
    }

    /// CSV with header `time,<labels>`, 9 significant digits.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for l in &self.labels {
            out.push(',');
            out.push_str(l);
        }
        out.push('\n');
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(out, "{}", fmt_sig9(*t));
            for c in &self.columns {
                let _ = write!(out, ",{}", fmt_sig9(c[i]));
            }
            out.push('\n');
        }
        out
    }

    /// CSV `element,time,polarity`.
    pub fn events_csv(&self) -> String {
        let mut out = String::from("element,time,polarity\n");
        for e in &self.fluxon_events {
            let _ = writeln!(out, "{},{},{}", e.element, fmt_sig9(e.time), e.polarity);
        }
        out
    }

    pub fn write_csv(&self, trace_path: &Path, events_path: &Path) -> io::Result<()> {
        std::fs::write(trace_path, self.to_csv())?;
        std::fs::write(events_path, self.events_csv())
    }
}

pub fn fmt_sig9(v: f64) -> String {
    if v == 0.0 {
        "0".to_string()
    } else {
        format!("{v:.8e}")
    }
}

/// Net number of 2 pi windings of a junction over the recorded interval.
pub fn count_fluxons(trace: &Trace, element: &str) -> Result<i64, EngineError> {
    if !trace.junction_phase_start.contains_key(element) {
        return Err(EngineError::UnknownElement(element.to_string()));
    }
    Ok(trace.net_fluxons_between(element, f64::NEG_INFINITY, f64::INFINITY))
}

/// Branch current of a probed inductor.
pub fn loop_current<'a>(trace: &'a Trace, inductor: &str) -> Result<&'a [f64], EngineError> {
    trace.probe_series(&Probe::Current(inductor.to_string()))
}

#[inline]
fn diff(x: &[f64], a: Node, b: Node) -> f64 {
    a.map_or(0.0, |i| x[i]) - b.map_or(0.0, |i| x[i])
}

/// Newton linear system in scaled units.
struct Stamp<'a> {
    res: &'a mut DVector<f64>,
    jac: &'a mut DMatrix<f64>,
}

impl Stamp<'_> {
    /// Adds a current `i` flowing from `a` to `b` with derivative `g` with
    /// respect to the branch phase difference.
    fn branch(&mut self, a: Node, b: Node, i: f64, g: f64) {
        if let Some(a) = a {
            self.res[a] += i;
            self.jac[(a, a)] += g;
            if let Some(b) = b {
                self.jac[(a, b)] -= g;
            }
        }
        if let Some(b) = b {
            self.res[b] -= i;
            self.jac[(b, b)] += g;
            if let Some(a) = a {
                self.jac[(b, a)] -= g;
            }
        }
    }
}

struct Integrator<'a> {
    sys: &'a SimSystem,
    offsets: Vec<DVector<f64>>,
    n: usize,
    ramp: f64,
}

impl Integrator<'_> {
    fn source_scale(&self, t: f64) -> f64 {
        if self.ramp <= 0.0 || t >= 0.0 {
            1.0
        } else {
            ((t + self.ramp) / self.ramp).clamp(0.0, 1.0)
        }
    }

    fn source_value(&self, s: &SourceBranch, t: f64) -> f64 {
        self.source_scale(t) * s.waveform.value_at(t)
    }

    fn block_currents(&self, k: usize, phases: &[f64]) -> DVector<f64> {
        let b = &self.sys.blocks[k];
        let dphi = DVector::from_iterator(b.ends.len(), b.ends.iter().map(|&(a, c)| diff(phases, a, c)));
        &self.offsets[k] + (&b.gamma * dphi) * PHI_SCALE
    }

    /// Residual and Jacobian of the step equations at trial `x`.
    #[allow(clippy::too_many_arguments)]
    fn evaluate(
        &self,
        x: &DVector<f64>,
        prev: &SimState,
        t: f64,
        c1: f64,
        trapezoid: bool,
        res: &mut DVector<f64>,
        jac: &mut DMatrix<f64>,
    ) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let phases = &x.as_slice()[..n];
        let (u, a) = self.derivatives(phases, prev, c1, trapezoid);
        res.fill(0.0);
        jac.fill(0.0);
        let mut st = Stamp { res, jac };
        for j in &self.sys.junctions {
            let p = &j.params;
            let d = diff(phases, j.a, j.b);
            let i = p.critical_current * d.sin()
                + PHI_SCALE * (diff(&u, j.a, j.b) / p.shunt_resistance + p.capacitance * diff(&a, j.a, j.b));
            let g = p.critical_current * d.cos()
                + PHI_SCALE * (c1 / p.shunt_resistance + p.capacitance * c1 * c1);
            st.branch(j.a, j.b, i, g);
        }
        for r in &self.sys.resistors {
            let i = PHI_SCALE * r.g * diff(&u, r.a, r.b);
            st.branch(r.a, r.b, i, PHI_SCALE * r.g * c1);
        }
        for (k, b) in self.sys.blocks.iter().enumerate() {
            let cur = self.block_currents(k, phases);
            for (p, &(pa, pb)) in b.ends.iter().enumerate() {
                if let Some(ia) = pa {
                    st.res[ia] += cur[p];
                }
                if let Some(ib) = pb {
                    st.res[ib] -= cur[p];
                }
                for (q, &(qa, qb)) in b.ends.iter().enumerate() {
                    let g = PHI_SCALE * b.gamma[(p, q)];
                    if g == 0.0 {
                        continue;
                    }
                    // d I_p / d phi for phi at the ends of branch q
                    for (row, sr) in [(pa, 1.0), (pb, -1.0)] {
                        let Some(row) = row else { continue };
                        if let Some(c) = qa {
                            st.jac[(row, c)] += sr * g;
                        }
                        if let Some(c) = qb {
                            st.jac[(row, c)] -= sr * g;
                        }
                    }
                }
            }
        }
        for s in &self.sys.sources {
            let i = self.source_value(s, t);
            if let Some(ia) = s.a {
                st.res[ia] += i;
            }
            if let Some(ib) = s.b {
                st.res[ib] -= i;
            }
        }
        for (k, s) in self.sys.spds.iter().enumerate() {
            let col = n + k;
            let i = x[col] / ROW_SCALE;
            if let Some(ia) = s.a {
                st.res[ia] += i;
                st.jac[(ia, col)] += 1.0 / ROW_SCALE;
            }
            if let Some(ib) = s.b {
                st.res[ib] -= i;
                st.jac[(ib, col)] -= 1.0 / ROW_SCALE;
            }
            let r = s.params.resistance_at(t);
            st.res[col] = PHI_SCALE * diff(&u, s.a, s.b) - r * i;
            if let Some(ia) = s.a {
                st.jac[(col, ia)] += PHI_SCALE * c1;
            }
            if let Some(ib) = s.b {
                st.jac[(col, ib)] -= PHI_SCALE * c1;
            }
            st.jac[(col, col)] = -r / ROW_SCALE;
        }
        *st.res *= ROW_SCALE;
        *st.jac *= ROW_SCALE;
        (u, a)
    }

    fn derivatives(
        &self,
        phases: &[f64],
        prev: &SimState,
        c1: f64,
        trapezoid: bool,
    ) -> (Vec<f64>, Vec<f64>) {
        let mut u = Vec::with_capacity(self.n);
        let mut a = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut ui = c1 * (phases[i] - prev.phases[i]);
            if trapezoid {
                ui -= prev.phase_rates[i];
            }
            let mut ai = c1 * (ui - prev.phase_rates[i]);
            if trapezoid {
                ai -= prev.phase_accels[i];
            }
            u.push(ui);
            a.push(ai);
        }
        (u, a)
    }

    /// Solves one step from `prev` to `t`. Returns `None` if Newton fails.
    fn step(&self, prev: &SimState, guess: &[f64], t: f64, h: f64, trapezoid: bool) -> Option<SimState> {
        let n = self.n;
        let m = n + self.sys.spds.len();
        let c1 = if trapezoid { 2.0 / h } else { 1.0 / h };
        let mut x = DVector::from_iterator(
            m,
            guess
                .iter()
                .copied()
                .chain(prev.spd_currents.iter().map(|i| i * ROW_SCALE)),
        );
        let mut res = DVector::zeros(m);
        let mut jac = DMatrix::zeros(m, m);
        for _ in 0..30 {
            self.evaluate(&x, prev, t, c1, trapezoid, &mut res, &mut jac);
            let delta = jac.clone().lu().solve(&res)?;
            let mut worst: f64 = 0.0;
            for i in 0..m {
                let d = delta[i];
                if !d.is_finite() {
                    return None;
                }
                x[i] -= d;
                let scale = if i < n { 1.0 } else { 1.0 + x[i].abs() };
                worst = worst.max(d.abs() / scale);
            }
            if worst < 1e-10 {
                let phases: Vec<f64> = x.as_slice()[..n].to_vec();
                let (u, a) = self.derivatives(&phases, prev, c1, trapezoid);
                return Some(SimState {
                    time: t,
                    phases,
                    phase_rates: u,
                    phase_accels: a,
                    spd_currents: x.as_slice()[n..].iter().map(|v| v / ROW_SCALE).collect(),
                });
            }
        }
        None
    }

    fn branch_current(&self, r: BranchRef, s: &SimState) -> f64 {
        let ph = &s.phases;
        match r {
            BranchRef::Junction(k) => {
                let j = &self.sys.junctions[k];
                let p = &j.params;
                p.critical_current * diff(ph, j.a, j.b).sin()
                    + PHI_SCALE
                        * (diff(&s.phase_rates, j.a, j.b) / p.shunt_resistance
                            + p.capacitance * diff(&s.phase_accels, j.a, j.b))
            }
            BranchRef::Resistor(k) => {
                let rb = &self.sys.resistors[k];
                PHI_SCALE * rb.g * diff(&s.phase_rates, rb.a, rb.b)
            }
            BranchRef::Inductor { block, index } => self.block_currents(block, ph)[index],
            BranchRef::Source(k) => self.source_value(&self.sys.sources[k], s.time),
            BranchRef::Spd(k) => s.spd_currents[k],
        }
    }
}

fn node_value(x: &[f64], idx: &HashMap<String, usize>, n: &str) -> f64 {
    idx.get(n).map_or(0.0, |&i| x[i])
}

/// Integrates with the `.tran` settings of the source netlist.
pub fn run_transient(system: &SimSystem, t_stop: f64, dt_max: f64) -> Result<Trace, EngineError> {
    let mut o = RunOptions::from_system(system);
    o.t_stop = t_stop;
    o.dt_max = dt_max;
    run_transient_with(system, &o)
}

pub fn run_transient_with(system: &SimSystem, opts: &RunOptions) -> Result<Trace, EngineError> {
    if !(opts.dt_max > 0.0) || !(opts.t_stop > 0.0) || !(opts.dt_min > 0.0) {
        return Err(EngineError::Options(
            "t_stop, dt_max and dt_min must be positive".into(),
        ));
    }
    if opts.ramp < 0.0 || opts.output_step < 0.0 {
        return Err(EngineError::Options("ramp and output_step must be >= 0".into()));
    }
    let mut probes: Vec<Probe> = system.default_probes.clone();
    for p in &opts.extra_probes {
        if !probes.contains(p) {
            probes.push(p.clone());
        }
    }
    for p in &probes {
        system.check_probe(p)?;
    }
    let mut offsets: Vec<DVector<f64>> = system
        .blocks
        .iter()
        .map(|b| DVector::zeros(b.names.len()))
        .collect();
    for (name, i0) in &opts.initial_currents {
        match system.branches.get(name) {
            Some(BranchRef::Inductor { block, index }) => offsets[*block][*index] = *i0,
            _ => return Err(EngineError::UnknownElement(name.clone())),
        }
    }
    let n = system.node_names.len();
    let integ = Integrator {
        sys: system,
        offsets,
        n,
        ramp: opts.ramp,
    };
    let t_start = -opts.ramp;

    // Breakpoints: ramp corners, waveform corners, SPD window edges.
    let mut bps: Vec<f64> = vec![0.0, opts.t_stop];
    for s in &system.sources {
        bps.extend(s.waveform.breakpoints(t_start, opts.t_stop));
    }
    for s in &system.spds {
        bps.extend(s.params.breakpoints());
    }
    bps.retain(|&t| t > t_start && t <= opts.t_stop);
    bps.sort_by(f64::total_cmp);
    bps.dedup_by(|a, b| (*a - *b).abs() < 1e-21);

    let mut state = SimState {
        time: t_start,
        phases: vec![0.0; n],
        phase_rates: vec![0.0; n],
        phase_accels: vec![0.0; n],
        spd_currents: vec![0.0; system.spds.len()],
    };
    // Consistent SPD currents at the start: solve with a tiny backward Euler step.
    if !system.spds.is_empty() || opts.ramp == 0.0 {
        let h = opts.dt_min.max(1e-16);
        if let Some(s) = integ.step(&state, &state.phases.clone(), t_start, h, false) {
            state.spd_currents = s.spd_currents;
            if opts.ramp == 0.0 {
                state.phases = s.phases;
            }
        }
    }

    let junction_phase = |s: &SimState, k: usize| {
        let j = &system.junctions[k];
        diff(&s.phases, j.a, j.b)
    };

    let labels: Vec<String> = probes.iter().map(Probe::label).collect();
    let mut trace = Trace {
        times: Vec::new(),
        labels,
        columns: vec![Vec::new(); probes.len()],
        max_voltage: Vec::new(),
        fluxon_events: Vec::new(),
        junction_phase_start: BTreeMap::new(),
        junction_phase_end: BTreeMap::new(),
        final_state: state.clone(),
        steps_accepted: 0,
        steps_rejected: 0,
    };
    let probe_value = |p: &Probe, s: &SimState, prev: &SimState| -> f64 {
        match p {
            Probe::NodePhase(nm) => node_value(&s.phases, &system.node_index, nm),
            Probe::NodeVoltage(nm) => {
                let h = s.time - prev.time;
                if h > 0.0 {
                    PHI_SCALE
                        * (node_value(&s.phases, &system.node_index, nm)
                            - node_value(&prev.phases, &system.node_index, nm))
                        / h
                } else {
                    PHI_SCALE * node_value(&s.phase_rates, &system.node_index, nm)
                }
            }
            Probe::Current(e) => integ.branch_current(system.branches[e], s),
        }
    };
    let mut last_recorded = f64::NEG_INFINITY;
    let mut pending_vmax: f64 = 0.0;
    let record = |trace: &mut Trace, s: &SimState, prev: &SimState, vmax: f64| {
        trace.times.push(s.time);
        for (c, p) in trace.columns.iter_mut().zip(&probes) {
            c.push(probe_value(p, s, prev));
        }
        trace.max_voltage.push(vmax);
    };

    if t_start >= 0.0 {
        for k in 0..system.junctions.len() {
            trace
                .junction_phase_start
                .insert(system.junctions[k].name.clone(), junction_phase(&state, k));
        }
        record(&mut trace, &state, &state, 0.0);
        last_recorded = state.time;
    }

    let mut h = opts.dt_max.min(1e-13);
    let mut bp_idx = 0;
    let mut after_break = 2usize;
    // recent accepted (time, phases) for the error estimate and predictor
    let mut history: Vec<(f64, Vec<f64>)> = vec![(state.time, state.phases.clone())];
    let mut prev_state;
    let eps_t = 1e-21;

    while state.time < opts.t_stop - eps_t {
        while bp_idx < bps.len() && bps[bp_idx] <= state.time + eps_t {
            bp_idx += 1;
        }
        let next_bp = bps.get(bp_idx).copied().unwrap_or(opts.t_stop);
        h = h.min(opts.dt_max).max(opts.dt_min);
        let mut hits_bp = false;
        if state.time + h >= next_bp - eps_t {
            h = next_bp - state.time;
            hits_bp = true;
        } else if state.time + 2.0 * h > next_bp {
            // avoid leaving a sliver before the breakpoint
            h = 0.5 * (next_bp - state.time);
        }
        let t_new = if hits_bp { next_bp } else { state.time + h };
        let trapezoid = after_break == 0;

        // Predictor: linear extrapolation of the last two accepted points.
        let guess: Vec<f64> = if history.len() >= 2 {
            let (t1, p1) = &history[history.len() - 1];
            let (t0, p0) = &history[history.len() - 2];
            let r = h / (t1 - t0);
            p1.iter().zip(p0).map(|(a, b)| a + r * (a - b)).collect()
        } else {
            state.phases.clone()
        };

        let outcome = integ.step(&state, &guess, t_new, h, trapezoid);
        let Some(new_state) = outcome else {
            trace.steps_rejected += 1;
            h *= 0.25;
            if h < opts.dt_min {
                return Err(EngineError::Integration {
                    time: state.time,
                    reason: "Newton iteration did not converge at minimum step".into(),
                });
            }
            continue;
        };
        if new_state.phases.iter().any(|v| !v.is_finite())
            || new_state.spd_currents.iter().any(|v| !v.is_finite())
        {
            return Err(EngineError::NonFinite { time: t_new });
        }
        // Junction phase advance limit.
        let mut max_adv: f64 = 0.0;
        for k in 0..system.junctions.len() {
            max_adv = max_adv.max((junction_phase(&new_state, k) - junction_phase(&state, k)).abs());
        }
        if max_adv > opts.max_phase_step && h > opts.dt_min * 2.0 {
            trace.steps_rejected += 1;
            h *= 0.5;
            continue;
        }
        // Local error estimate from the third divided difference of phases.
        let mut err: f64 = 0.0;
        if history.len() >= 3 && after_break == 0 {
            let k = history.len();
            let pts = [
                (&history[k - 3].0, &history[k - 3].1),
                (&history[k - 2].0, &history[k - 2].1),
                (&history[k - 1].0, &history[k - 1].1),
                (&t_new, &new_state.phases),
            ];
            for i in 0..n {
                let f = |j: usize| pts[j].1[i];
                let t = |j: usize| *pts[j].0;
                let d01 = (f(1) - f(0)) / (t(1) - t(0));
                let d12 = (f(2) - f(1)) / (t(2) - t(1));
                let d23 = (f(3) - f(2)) / (t(3) - t(2));
                let d012 = (d12 - d01) / (t(2) - t(0));
                let d123 = (d23 - d12) / (t(3) - t(1));
                let d3 = (d123 - d012) / (t(3) - t(0));
                err = err.max(0.5 * h * h * h * d3.abs());
            }
            if err > 8.0 * opts.phase_tolerance && h > 16.0 * opts.dt_min {
                trace.steps_rejected += 1;
                h *= (opts.phase_tolerance / err).cbrt().clamp(0.2, 0.5);
                continue;
            }
        }

        // Accept.
        trace.steps_accepted += 1;
        let mut vmax: f64 = 0.0;
        for i in 0..n {
            vmax = vmax.max((PHI_SCALE * (new_state.phases[i] - state.phases[i]) / h).abs());
        }
        if new_state.time >= 0.0 {
            for k in 0..system.junctions.len() {
                let (p0, p1) = (junction_phase(&state, k), junction_phase(&new_state, k));
                let (w0, w1) = (
                    ((p0 / (2.0 * PI)) + 0.5).floor() as i64,
                    ((p1 / (2.0 * PI)) + 0.5).floor() as i64,
                );
                if w1 != w0 {
                    let step = (w1 - w0).signum();
                    let mut w = w0;
                    while w != w1 {
                        // crossing level (2w+1)pi going up, (2w-1)pi going down
                        let level = if step > 0 {
                            (2 * w + 1) as f64 * PI
                        } else {
                            (2 * w - 1) as f64 * PI
                        };
                        let frac = ((level - p0) / (p1 - p0)).clamp(0.0, 1.0);
                        trace.fluxon_events.push(FluxonEvent {
                            element: system.junctions[k].name.clone(),
                            time: state.time + frac * h,
                            polarity: step as i32,
                        });
                        w += step;
                    }
                }
            }
        }
        let crossing_zero = state.time < 0.0 && new_state.time >= 0.0;
        prev_state = std::mem::replace(&mut state, new_state);
        if crossing_zero {
            for k in 0..system.junctions.len() {
                trace
                    .junction_phase_start
                    .insert(system.junctions[k].name.clone(), junction_phase(&state, k));
            }
        }
        history.push((state.time, state.phases.clone()));
        if history.len() > 4 {
            history.remove(0);
        }
        if state.time >= 0.0 {
            pending_vmax = pending_vmax.max(vmax);
            let is_last = state.time >= opts.t_stop - eps_t;
            if crossing_zero || is_last || state.time - last_recorded >= opts.output_step {
                record(&mut trace, &state, &prev_state, pending_vmax);
                last_recorded = state.time;
                pending_vmax = 0.0;
            }
        }

        // Next step size.
        if hits_bp {
            after_break = 2;
            history.clear();
            history.push((state.time, state.phases.clone()));
            h = h.min(1e-13);
        } else {
            after_break = after_break.saturating_sub(1);
            let grow = if err > 0.0 {
                (0.9 * (opts.phase_tolerance / err).cbrt()).clamp(0.3, 2.0)
            } else {
                2.0
            };
            let grow = if max_adv > 0.0 {
                grow.min(0.9 * opts.max_phase_step / max_adv).max(0.3)
            } else {
                grow
            };
            h *= grow;
        }
    }
    for k in 0..system.junctions.len() {
        trace
            .junction_phase_end
            .insert(system.junctions[k].name.clone(), junction_phase(&state, k));
    }
    trace.final_state = state;
    Ok(trace)
}

/// Total stored energy: inductive, Josephson and capacitive.
pub fn stored_energy(system: &SimSystem, state: &SimState, initial_currents: &[(String, f64)]) -> f64 {
    let mut e = 0.0;
    for b in &system.blocks {
        let dphi = DVector::from_iterator(
            b.ends.len(),
            b.ends.iter().map(|&(a, c)| diff(&state.phases, a, c)),
        );
        let mut cur = (&b.gamma * dphi) * PHI_SCALE;
        for (name, i0) in initial_currents {
            if let Some(p) = b.names.iter().position(|n| n == name) {
                cur[p] += i0;
            }
        }
        e += 0.5 * cur.dot(&(&b.inductance * &cur));
    }
    for j in &system.junctions {
        let p = &j.params;
        let d = diff(&state.phases, j.a, j.b);
        let v = PHI_SCALE * diff(&state.phase_rates, j.a, j.b);
        e += PHI_SCALE * p.critical_current * (1.0 - d.cos()) + 0.5 * p.capacitance * v * v;
    }
    e
}

/// One superconducting loop made of inductors and junctions.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopFlux {
    /// Elements around the loop with their traversal sign.
    pub elements: Vec<(String, i8)>,
    /// Total flux in units of `Phi0`.
    pub flux_quanta: f64,
}

/// Flux around every independent loop of the inductor/junction subgraph.
///
/// Inductor flux is `sum(L * I)` including mutual terms, computed from the
/// branch currents; junction flux is `Phi0/2pi` times the branch phase
/// wrapped into `(-pi, pi]`. In a quantized state each total is an integer.
pub fn loop_fluxes(system: &SimSystem, state: &SimState) -> Vec<LoopFlux> {
    // Edges: (name, a, b, flux contribution along a->b in Wb)
    let mut edges: Vec<(String, usize, usize, f64)> = Vec::new();
    let gnd = system.node_names.len();
    let id = |n: Node| n.unwrap_or(gnd);
    for b in &system.blocks {
        let dphi = DVector::from_iterator(
            b.ends.len(),
            b.ends.iter().map(|&(a, c)| diff(&state.phases, a, c)),
        );
        let cur = (&b.gamma * dphi) * PHI_SCALE;
        let flux = &b.inductance * cur;
        for (p, &(a, c)) in b.ends.iter().enumerate() {
            edges.push((b.names[p].clone(), id(a), id(c), flux[p]));
        }
    }
    for j in &system.junctions {
        let d = diff(&state.phases, j.a, j.b);
        let wrapped = d - 2.0 * PI * ((d / (2.0 * PI)) + 0.5).floor();
        edges.push((j.name.clone(), id(j.a), id(j.b), PHI_SCALE * wrapped));
    }
    // Spanning forest by BFS, then one fundamental cycle per chord.
    let nv = gnd + 1;
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); nv];
    for (k, e) in edges.iter().enumerate() {
        adj[e.1].push((e.2, k));
        adj[e.2].push((e.1, k));
    }
    let mut parent: Vec<Option<(usize, usize)>> = vec![None; nv];
    let mut depth = vec![usize::MAX; nv];
    let mut tree_edge = vec![false; edges.len()];
    for root in (0..nv).rev() {
        if depth[root] != usize::MAX {
            continue;
        }
        depth[root] = 0;
        let mut queue = std::collections::VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &(w, k) in &adj[v] {
                if depth[w] == usize::MAX {
                    depth[w] = depth[v] + 1;
                    parent[w] = Some((v, k));
                    tree_edge[k] = true;
                    queue.push_back(w);
                }
            }
        }
    }
    let mut out = Vec::new();
    for (k, e) in edges.iter().enumerate() {
        if tree_edge[k] {
            continue;
        }
        // cycle: a -> b via chord, then b back to a via tree
        let mut elements = vec![(e.0.clone(), 1i8)];
        let mut flux = e.3;
        let (mut x, mut y) = (e.2, e.1);
        let mut up_from_x = Vec::new();
        let mut down_to_y = Vec::new();
        while x != y {
            if depth[x] >= depth[y] {
                let (p, k2) = parent[x].unwrap();
                up_from_x.push((k2, x, p));
                x = p;
            } else {
                let (p, k2) = parent[y].unwrap();
                down_to_y.push((k2, p, y));
                y = p;
            }
        }
        for (k2, from, to) in up_from_x.into_iter().chain(down_to_y.into_iter().rev()) {
            let ed = &edges[k2];
            let sign: i8 = if ed.1 == from && ed.2 == to { 1 } else { -1 };
            flux += sign as f64 * ed.3;
            elements.push((ed.0.clone(), sign));
        }
        out.push(LoopFlux {
            elements,
            flux_quanta: flux / FLUX_QUANTUM,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{make_junction, Coupling};
    use crate::netlist::parse;

    #[test]
    fn single_junction_has_one_unknown() {
        let n = parse("B1 1 0 ic=40u betac=0.95\nI1 0 1 dc(20u)").unwrap();
        let s = assemble(&n).unwrap();
        assert_eq!(s.unknown_count(), 1);
    }

    #[test]
    fn perfect_coupling_is_singular() {
        let n = parse("L1 1 0 10p\nL2 2 0 40p\nK1 L1 L2 m=20p\nR1 1 2 1").unwrap();
        let err = assemble(&n).unwrap_err();
        assert!(err.to_string().starts_with("singular inductance block"), "{err}");
        let ok = parse("L1 1 0 10p\nL2 2 0 40p\nK1 L1 L2 k=0.5\nR1 1 2 1").unwrap();
        assert!(assemble(&ok).is_ok());
    }

    #[test]
    fn subcritical_junction_is_static() {
        let mut n = Netlist::new();
        n.junction("B1", "1", "0", make_junction(40e-6, 0.95, 5.0).unwrap())
            .source("I1", "1", Waveform::Dc(20e-6));
        let s = assemble(&n).unwrap();
        let t = run_transient_with(&s, &RunOptions::new(100e-12, 1e-12).probe(Probe::NodeVoltage("1".into())))
            .unwrap();
        let v = t.mean_between("V(1)", 50e-12, 100e-12).unwrap();
        assert!(v.abs() < 1e-9, "{v}");
        let (p0, p1) = t.junction_phase_endpoints("B1").unwrap();
        assert!((p1 - (0.5f64).asin()).abs() < 1e-3, "{p0} {p1}");
    }

    #[test]
    fn coupled_inductor_currents_follow_inverse_matrix() {
        // Two coupled inductors driven by one DC source through a shared node.
        let mut n = Netlist::new();
        n.inductor("L1", "1", "0", 10e-12)
            .inductor("L2", "2", "0", 20e-12)
            .resistor("R1", "2", "0", 1.0)
            .mutual("K1", "L1", "L2", Coupling::Factor(0.5))
            .source("I1", "1", Waveform::Dc(10e-6));
        let s = assemble(&n).unwrap();
        let mut o = RunOptions::new(2e-9, 1e-12);
        o.extra_probes = vec![Probe::Current("L1".into()), Probe::Current("L2".into())];
        let t = run_transient_with(&s, &o).unwrap();
        let i1 = *t.series("I(L1)").unwrap().last().unwrap();
        let i2 = *t.series("I(L2)").unwrap().last().unwrap();
        // Once the secondary current has decayed through R1, L1 carries the source.
        assert!((i1 - 10e-6).abs() < 1e-9, "{i1}");
        assert!(i2.abs() < 1e-9, "{i2}");
        let loops = loop_fluxes(&s, &t.final_state);
        assert_eq!(loops.len(), 0);
    }
}
