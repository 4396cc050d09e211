//! Netlist simulation and the figure-reproduction experiments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use thiserror::Error;

use soen_core::circuit::FLUX_QUANTUM;
use soen_core::engine::{assemble, fmt_sig9, run_transient_with, RunOptions, Trace};
use soen_core::experiments::{
    binary_fast_toggle, binary_pulse_response, multistable_staircase, stdp_run,
};
use soen_core::netlist::parse;
use soen_core::plasticity::{
    retention_experiment, BoundMode, EventStream, RetentionSpec, StdpKernel,
};
use soen_core::presets::{binary_toggle_spec, hebbian_pair_spec, multistable_ramp_spec};
use soen_core::synapse::{
    build_hebbian_circuit, simulate, sweep_hebbian_kernel, DriveSchedule, EventTiming,
    MultiStableCellSpec, StdpCircuitSpec,
};

use crate::artifacts::{Plot, RunOutput, RunSummary};
use crate::config::{ExperimentConfig, ExperimentId};

/// Errors that map to dedicated exit codes.
#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}")]
    Missing {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: invalid netlist\n{diagnostics}")]
    InvalidNetlist { path: PathBuf, diagnostics: String },
}

pub fn read_input(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| {
        InputError::Missing {
            path: path.to_path_buf(),
            source,
        }
        .into()
    })
}

/// Writes `trace.csv`, `fluxons.csv` and `manifest.json` for one netlist.
/// `t_stop` and `dt_max` override the netlist's `.tran` when given.
pub fn cmd_sim(path: &Path, t_stop: Option<f64>, dt_max: Option<f64>, out: &Path) -> Result<RunSummary> {
    let text = read_input(path)?;
    let invalid = |diagnostics: String| InputError::InvalidNetlist {
        path: path.to_path_buf(),
        diagnostics,
    };
    let net = parse(&text).map_err(|d| {
        invalid(d.iter().map(|d| format!("  {d}")).collect::<Vec<_>>().join("\n"))
    })?;
    let sys = assemble(&net).map_err(|e| invalid(format!("  {e}")))?;
    let mut opts = RunOptions::from_system(&sys);
    if let Some(t) = t_stop {
        opts.t_stop = t;
    }
    if let Some(d) = dt_max {
        opts.dt_max = d;
    }
    if !(opts.t_stop > 0.0 && opts.dt_max > 0.0) {
        bail!("t_stop and dt_max must be positive (give .tran or --tstop/--dtmax)");
    }
    let trace = run_transient_with(&sys, &opts).context("simulation failed")?;
    let mut o = RunOutput::create(out)?;
    o.write("trace.csv", &trace.to_csv())?;
    o.write("fluxons.csv", &trace.events_csv())?;
    let config = serde_json::json!({
        "netlist": path.display().to_string(),
        "t_stop": opts.t_stop,
        "dt_max": opts.dt_max,
        "output_step": opts.output_step,
    });
    o.finish("sim", config)
}

/// Selected trace columns, scaled, as CSV. Each entry is
/// `(trace label, csv header, scale)`.
fn columns_csv(trace: &Trace, t_header: &str, t_scale: f64, cols: &[(&str, &str, f64)]) -> Result<String> {
    let mut data = Vec::new();
    for (label, _, scale) in cols {
        let s = trace
            .series(label)
            .with_context(|| format!("trace has no {label}"))?;
        data.push((s, *scale));
    }
    let mut out = String::from(t_header);
    for (_, h, _) in cols {
        out.push(',');
        out.push_str(h);
    }
    out.push('\n');
    for (i, t) in trace.times.iter().enumerate() {
        out.push_str(&fmt_sig9(t * t_scale));
        for (s, k) in &data {
            let _ = write!(out, ",{}", fmt_sig9(s[i] * k));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Compact number for file and assertion names.
fn short(x: f64) -> String {
    format!("{}", (x * 1e6).round() / 1e6)
}

fn within(x: f64, target: f64, rel: f64) -> bool {
    (x - target).abs() <= rel * target.abs()
}

pub fn cmd_experiment(cfg: &ExperimentConfig) -> Result<RunSummary> {
    let mut o = RunOutput::create(&cfg.out_dir)?;
    match cfg.id {
        ExperimentId::Fig3 => fig3(cfg, &mut o),
        ExperimentId::Fig5a => fig5a(cfg, &mut o),
        ExperimentId::Fig5bc => fig5bc(cfg, &mut o),
        ExperimentId::Fig6b => fig6b(cfg, &mut o),
        ExperimentId::Fig7 => fig7(cfg, &mut o),
        ExperimentId::Fig8 => fig8(cfg, &mut o),
        ExperimentId::Retention => retention(cfg, &mut o),
        ExperimentId::Custom => {
            let p = &cfg.params;
            let path = PathBuf::from(p.str("netlist")?);
            if path.as_os_str().is_empty() {
                bail!("[custom] netlist is required");
            }
            let pos = |x: f64| (x > 0.0).then_some(x);
            return cmd_sim(
                &path,
                pos(p.f64("tstop_ns")? * 1e-9),
                pos(p.f64("dt_max_ps")? * 1e-12),
                &cfg.out_dir,
            );
        }
    }
    .with_context(|| format!("experiment {}", cfg.id))?;
    o.finish(&format!("experiment {}", cfg.id), cfg.to_json())
}

fn fig3(cfg: &ExperimentConfig, o: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let spec = binary_toggle_spec();
    let r = binary_pulse_response(&spec, 1e-12)?;
    let mut csv = String::from("step,t_ns,pulse,isy_uA\n");
    for (k, level) in r.levels.iter().enumerate() {
        let (t, kind) = match k {
            0 => (0.0, "none"),
            _ => {
                let (t, s) = r.pulses[k - 1];
                (t, if s > 0 { "plus" } else { "minus" })
            }
        };
        let _ = writeln!(csv, "{k},{},{kind},{}", fmt_sig9(t * 1e9), fmt_sig9(level * 1e6));
    }
    o.write("levels.csv", &csv)?;
    o.write(
        "slow_trace.csv",
        &columns_csv(&r.trace, "t_ns", 1e9, &[("I(Lsy)", "isy_uA", 1e6)])?,
    )?;
    let two_levels = r
        .levels
        .iter()
        .all(|&l| within(l, 1e-6, 0.1) || within(l, 3e-6, 0.1));
    o.check(
        "two_quiescent_levels",
        two_levels,
        format!("levels uA: {:?}", r.levels.iter().map(|l| (l * 1e7).round() / 10.0).collect::<Vec<_>>()),
    );
    let idem = r.levels.len() == 5
        && (r.levels[2] - r.levels[1]).abs() < 0.05e-6
        && (r.levels[4] - r.levels[3]).abs() < 0.05e-6;
    o.check("repeated_pulse_idempotent", idem, "second pulse on the same port leaves I_sy unchanged");

    let cycles = p.usize("cycles")?;
    let (fspec, trace) = binary_fast_toggle(cycles)?;
    o.write(
        "fast_trace.csv",
        &columns_csv(&trace, "t_ps", 1e12, &[("I(Lsy)", "isy_uA", 1e6)])?,
    )?;
    o.write("fast_fluxons.csv", &trace.events_csv())?;
    let mut ok = true;
    for k in 0..cycles {
        let t0 = fspec.drive.potentiate[k];
        let slips = |el: &str| trace.net_fluxons_between(el, t0, t0 + 50e-12);
        ok &= slips("Jsu") == 1 && slips("Jss") == 1;
    }
    let t_end = *trace.times.last().unwrap_or(&0.0);
    let final_isy = trace.mean_between("I(Lsy)", t_end - 20e-12, t_end).unwrap_or(f64::NAN);
    o.check(
        "full_cycle_within_50ps",
        ok && within(final_isy, 1e-6, 0.1),
        format!("{cycles} cycles, one Jsu and one Jss slip per 50 ps; final I_sy {:.3} uA", final_isy * 1e6),
    );
    o.plot(Plot::new("Binary cell, slow drive", "t (ns)", "I_sy (uA)").series("I_sy", "slow_trace.csv", "t_ns", "isy_uA"));
    o.plot(Plot::new("Binary cell, 50 ps toggle", "t (ps)", "I_sy (uA)").series("I_sy", "fast_trace.csv", "t_ps", "isy_uA"));
    Ok(())
}

fn preset(l_ss_nh: f64) -> MultiStableCellSpec {
    MultiStableCellSpec {
        l_ss: l_ss_nh * 1e-9,
        ..MultiStableCellSpec::preset_20n()
    }
}

/// Index of the first sample after which `isy` stays within `tol` of its
/// final value.
pub fn settle_index(isy: &[f64], tol: f64) -> usize {
    let last = *isy.last().unwrap_or(&0.0);
    isy.iter().rposition(|v| (v - last).abs() > tol).map_or(0, |i| i + 1)
}

fn fig5a(cfg: &ExperimentConfig, o: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let base = preset(p.f64("l_ss_nH")?);
    let n = p.usize("pulses")?;
    if n < 2 {
        bail!("pulses must be at least 2");
    }
    let spec = multistable_ramp_spec(base, n, 0);
    let s = multistable_staircase(&spec, p.f64("dt_max_ps")? * 1e-12)?;
    o.write("staircase.csv", &s.to_csv())?;
    let d_iss = s.iss[1] - s.iss[0];
    let d_isy = s.isy[1] - s.isy[0];
    let expected = FLUX_QUANTUM / spec.l_ss;
    o.check(
        "delta_iss_per_pulse",
        within(d_iss, expected, 0.05),
        format!("{:.3} nA vs Phi0/L_ss = {:.3} nA", d_iss * 1e9, expected * 1e9),
    );
    let isy_target = 2.5e-9 * 200e-9 / spec.l_ss;
    o.check(
        "delta_isy_per_pulse",
        within(d_isy, isy_target, 0.15),
        format!("{:.3} nA vs {:.3} nA", d_isy * 1e9, isy_target * 1e9),
    );
    let final_isy = *s.isy.last().unwrap();
    o.check(
        "saturates_just_above_3uA",
        (3.0e-6..=3.4e-6).contains(&final_isy),
        format!("final I_sy {:.4} uA", final_isy * 1e6),
    );
    let k = settle_index(&s.isy, 0.5 * d_isy.abs());
    o.check(
        "pulses_to_saturation",
        (400..=650).contains(&k) || (spec.l_ss - 200e-9).abs() > 1e-12,
        format!("{k} pulses"),
    );
    o.plot(Plot::new("Multi-stable staircase", "t (ns)", "current (uA)")
        .series("I_sy", "staircase.csv", "t_ns", "isy_uA")
        .series("I_ss", "staircase.csv", "t_ns", "iss_uA"));
    Ok(())
}

/// Drive for `cycles` of (up ramp, hold, down ramp, hold) on the 2 ns grid.
pub fn cyclic_drive(spec: &MultiStableCellSpec, ramp: usize, hold: usize, cycles: usize) -> DriveSchedule {
    let period = spec.pulse.period;
    let mut d = DriveSchedule::default();
    let mut slot = 1usize;
    for _ in 0..cycles {
        for _ in 0..ramp {
            d.potentiate.push(slot as f64 * period);
            slot += 1;
        }
        slot += hold;
        for _ in 0..ramp {
            d.depress.push(slot as f64 * period);
            slot += 1;
        }
        slot += hold;
    }
    d
}

/// Quiescent `I_sy` at the end of every hold period of a cyclic run:
/// `(maxima, minima)`.
pub fn cycle_extrema(s: &soen_core::experiments::Staircase, spec: &MultiStableCellSpec, ramp: usize, hold: usize) -> (Vec<f64>, Vec<f64>) {
    let period = spec.pulse.period;
    let level_at = |slot: usize| {
        let t = slot as f64 * period;
        let i = s.t.iter().position(|&x| x > t - 0.1e-9).unwrap_or(s.t.len() - 1);
        s.isy[i]
    };
    let cycles = spec.drive.potentiate.len() / ramp.max(1);
    let per = 2 * (ramp + hold);
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for c in 0..cycles {
        let start = 1 + c * per;
        maxima.push(level_at(start + ramp + hold));
        minima.push(level_at(start + per));
    }
    (maxima, minima)
}

fn fig5bc(cfg: &ExperimentConfig, o: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let mut spec = preset(p.f64("l_ss_nH")?);
    let (ramp, hold, cycles) = (p.usize("pulses_per_ramp")?, p.usize("hold_pulses")?, p.usize("cycles")?);
    if ramp == 0 || cycles == 0 {
        bail!("pulses_per_ramp and cycles must be positive");
    }
    spec.drive = cyclic_drive(&spec, ramp, hold, cycles);
    let s = multistable_staircase(&spec, p.f64("dt_max_ps")? * 1e-12)?;
    o.write("cycles.csv", &s.to_csv())?;
    let d_iss = s.iss[1] - s.iss[0];
    let d_isy = (s.isy[1] - s.isy[0]).abs();
    let expected = FLUX_QUANTUM / spec.l_ss;
    o.check(
        "delta_iss_per_pulse",
        within(d_iss, expected, 0.05),
        format!("{:.2} nA vs Phi0/L_ss = {:.2} nA", d_iss * 1e9, expected * 1e9),
    );
    let (maxima, minima) = cycle_extrema(&s, &spec, ramp, hold);
    let floor = *minima.last().unwrap();
    o.check(
        "depressed_floor",
        within(floor, 0.8e-6, 0.15),
        format!("floor {:.3} uA", floor * 1e6),
    );
    let spread = |v: &[f64]| {
        v.iter().cloned().fold(f64::MIN, f64::max) - v.iter().cloned().fold(f64::MAX, f64::min)
    };
    o.check(
        "no_cycle_drift",
        spread(&maxima) <= d_isy * 1.01 && spread(&minima) <= d_isy * 1.01,
        format!(
            "max spread {:.2} nA, min spread {:.2} nA, step {:.2} nA",
            spread(&maxima) * 1e9,
            spread(&minima) * 1e9,
            d_isy * 1e9
        ),
    );
    o.plot(Plot::new("Multi-stable cycling", "t (ns)", "I_sy (uA)").series("I_sy", "cycles.csv", "t_ns", "isy_uA"));
    Ok(())
}

fn timing(p: &crate::config::Params) -> Result<EventTiming> {
    Ok(EventTiming {
        dt_max: p.f64("dt_max_ps")? * 1e-12,
        ..EventTiming::default()
    })
}

/// Checks shared by kernel experiments: quantization of every row and
/// monotone decay per bias. Returns false on any failure.
pub fn kernel_checks(table: &soen_core::synapse::KernelTable, i_sus: &[f64], fluxon: f64) -> (bool, bool) {
    let quantized = table.rows.iter().all(|r| {
        let q = r.fluxons as f64 * fluxon;
        if r.fluxons == 0 {
            r.delta_i_ss.abs() < 0.5 * fluxon
        } else {
            within(r.delta_i_ss, q, 0.02) && r.delta_i_ss >= 0.0
        }
    });
    let monotone = i_sus.iter().all(|&i| {
        table
            .curve(i)
            .windows(2)
            .all(|w| w[1].fluxons <= w[0].fluxons + 1)
    });
    (quantized, monotone)
}

fn fig6b(cfg: &ExperimentConfig, o: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let mut spec = soen_core::synapse::HebbianCircuitSpec::default();
    spec.receiver.i_spd = p.f64("i_spd_uA")? * 1e-6;
    let i_sus: Vec<f64> = p.f64_list("i_su_uA")?.iter().map(|x| x * 1e-6).collect();
    let mut dts: Vec<f64> = p.f64_list("delta_t_ns")?.iter().map(|x| x * 1e-9).collect();
    dts.sort_by(f64::total_cmp);
    let table = sweep_hebbian_kernel(&spec, &dts, &i_sus, &timing(p)?, cfg.jobs)?;
    o.write("kernel.csv", &table.to_csv())?;
    let mut wide = String::from("delta_t_ns");
    for i in &i_sus {
        let _ = write!(wide, ",pct_{}uA", short(i * 1e6));
    }
    wide.push('\n');
    for (k, d) in dts.iter().enumerate() {
        wide.push_str(&fmt_sig9(d * 1e9));
        for &i in &i_sus {
            let c = table.curve(i);
            let _ = write!(wide, ",{}", fmt_sig9(100.0 * c[k].fraction));
        }
        wide.push('\n');
    }
    o.write("kernel_wide.csv", &wide)?;
    let (quantized, monotone) = kernel_checks(&table, &i_sus, spec.fluxon_current());
    o.check("quantized_updates", quantized, "every dI_ss = fluxons * Phi0 / L_ss within 2%");
    o.check("kernel_non_increasing", monotone, "fluxon count never rises with delay by more than one");
    let top = i_sus.iter().cloned().fold(f64::MIN, f64::max);
    let top_int = table.integral(top);
    let mut summary = String::from("i_su_uA,integral_ns,ratio_to_max\n");
    for &i in &i_sus {
        let r = if top_int > 0.0 { table.integral(i) / top_int } else { 0.0 };
        let _ = writeln!(summary, "{},{},{}", fmt_sig9(i * 1e6), fmt_sig9(table.integral(i) * 1e9), fmt_sig9(r));
        let band = match (i * 1e6).round() as i64 {
            35 => Some((0.01, 0.10)),
            36 => Some((0.08, 0.28)),
            37 => Some((0.38, 0.58)),
            _ => None,
        };
        if let (Some((lo, hi)), true) = (band, (top * 1e6 - 38.0).abs() < 1e-9) {
            o.check(
                &format!("integral_ratio_{}uA", (i * 1e6).round()),
                (lo..=hi).contains(&r),
                format!("{r:.3} (accept {lo}..{hi})"),
            );
        }
    }
    o.write("integrals.csv", &summary)?;
    if let Ok(k) = StdpKernel::from_sweep(&table, top) {
        o.write("stdp_kernel.csv", &k.to_csv(top))?;
    }
    let mut plot = Plot::new("Hebbian kernel", "delta t (ns)", "dI_ss / I_ss_sat (%)");
    for i in &i_sus {
        let col = format!("pct_{}uA", short(i * 1e6));
        plot = plot.series(&format!("I_su = {} uA", short(i * 1e6)), "kernel_wide.csv", "delta_t_ns", &col);
    }
    o.plot(plot);
    Ok(())
}

fn fig7(cfg: &ExperimentConfig, o: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let i_spd = p.f64("i_spd_uA")? * 1e-6;
    let i_su = p.f64("i_su_uA")? * 1e-6;
    let dt_max = p.f64("dt_max_ps")? * 1e-12;
    let mut counts = String::from("delta_t_ns,fluxons,delta_i_ss_nA\n");
    let mut plot = Plot::new("Hebbian update events", "t (ns)", "current (uA)");
    for d in p.f64_list("delta_t_ns")? {
        let mut spec = hebbian_pair_spec(i_spd, d * 1e-9);
        spec.receiver.i_su = i_su;
        let t_pre = spec.photons_pre[0];
        let t_stop = t_pre + d * 1e-9 + 100e-9;
        let mut opts = RunOptions::new(t_stop, dt_max);
        opts.output_step = 0.1e-9;
        let tr = simulate(&build_hebbian_circuit(&spec)?, &opts)?;
        let name = format!("event_dt{}ns.csv", short(d));
        let csv = columns_csv(
            &tr,
            "t_ns",
            1e9,
            &[("I(L1)", "i1_uA", 1e6), ("I(L2)", "i2_uA", 1e6), ("I(L3)", "i3_uA", 1e6), ("I(Lss)", "iss_uA", 1e6)],
        )?;
        o.write(&name, &csv)?;
        let n = tr.net_fluxons_between("Jsu", t_pre - 1e-9, t_stop) - tr.net_fluxons_between("Jss", t_pre - 1e-9, t_stop);
        let before = tr.mean_between("I(Lss)", t_pre - 20e-9, t_pre - 1e-9).unwrap_or(0.0);
        let after = tr.mean_between("I(Lss)", t_stop - 10e-9, t_stop).unwrap_or(0.0);
        let _ = writeln!(counts, "{},{n},{}", fmt_sig9(d), fmt_sig9((after - before) * 1e9));
        let quantum = spec.fluxon_current();
        o.check(
            &format!("quantized_dt{}ns", short(d)),
            if n == 0 { (after - before).abs() < 0.5 * quantum } else { within(after - before, n as f64 * quantum, 0.02) },
            format!("{n} fluxons, dI_ss {:.1} nA", (after - before) * 1e9),
        );
        let paper = (i_spd - 7e-6).abs() < 1e-12 && (i_su - 38e-6).abs() < 1e-12;
        if paper && d == 0.0 {
            o.check("fluxons_dt0", (85..=127).contains(&n), format!("{n} (accept 85..127)"));
        }
        if paper && d == 25.0 {
            o.check("fluxons_dt25ns", (10..=16).contains(&n), format!("{n} (accept 10..16)"));
        }
        for (col, label) in [("i1_uA", "I1"), ("i2_uA", "I2"), ("i3_uA", "I3"), ("iss_uA", "I_ss")] {
            plot = plot.series(&format!("{label}, dt = {d} ns"), &name, "t_ns", col);
        }
    }
    o.write("counts.csv", &counts)?;
    o.plot(plot);
    Ok(())
}

fn fig8(cfg: &ExperimentConfig, o: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let mut spec = if p.bool("buffer")? {
        StdpCircuitSpec::with_buffer()
    } else {
        StdpCircuitSpec::default()
    };
    spec.l_ss = p.f64("l_ss_nH")? * 1e-9;
    spec.strengthen.i_spd = p.f64("i_spd_uA")? * 1e-6;
    spec.weaken.i_spd = spec.strengthen.i_spd;
    let delays: Vec<f64> = p.f64_list("delays_ns")?.iter().map(|d| d * 1e-9).collect();
    let run = stdp_run(&spec, &delays, p.f64("dt_max_ps")? * 1e-12)?;
    o.write(
        "trace.csv",
        &columns_csv(
            &run.trace,
            "t_ns",
            1e9,
            &[("I(Lsy)", "isy_uA", 1e6), ("I(L3p)", "i_plus_uA", 1e6), ("I(L3m)", "i_minus_uA", 1e6)],
        )?,
    )?;
    let steps = run.steps();
    let mut csv = String::from("event,delay_ns,kind,delta_isy_nA\n");
    for (k, (d, s)) in delays.iter().zip(&steps).enumerate() {
        let kind = if *d >= 0.0 { "strengthen" } else { "weaken" };
        let _ = writeln!(csv, "{k},{},{kind},{}", fmt_sig9(d * 1e9), fmt_sig9(s * 1e9));
    }
    o.write("steps.csv", &csv)?;
    let signs_ok = delays.iter().zip(&steps).all(|(d, s)| if *d >= 0.0 { *s > 0.0 } else { *s < 0.0 });
    o.check(
        "step_signs",
        signs_ok,
        format!("steps nA: {:?}", steps.iter().map(|s| (s * 1e10).round() / 10.0).collect::<Vec<_>>()),
    );
    let find = |x: f64| delays.iter().position(|d| (d - x).abs() < 1e-12);
    if let (Some(a), Some(b)) = (find(-10e-9), find(-25e-9)) {
        o.check(
            "weakening_decays_with_delay",
            steps[a].abs() > steps[b].abs(),
            format!("|d(10 ns)| = {:.1} nA, |d(25 ns)| = {:.1} nA", steps[a].abs() * 1e9, steps[b].abs() * 1e9),
        );
    }
    o.plot(Plot::new("STDP sequence", "t (ns)", "current (uA)")
        .series("I_sy", "trace.csv", "t_ns", "isy_uA")
        .series("I+", "trace.csv", "t_ns", "i_plus_uA")
        .series("I-", "trace.csv", "t_ns", "i_minus_uA"));
    Ok(())
}

/// Retention grid: 0 followed by `points` log-spaced times up to `t_max`.
pub fn retention_grid(t_max: f64, points: usize) -> Vec<f64> {
    let lo = (t_max * 1e-4).ln();
    let hi = t_max.ln();
    let mut g = vec![0.0];
    g.extend((0..points).map(|i| (lo + (hi - lo) * i as f64 / (points.max(2) - 1) as f64).exp()));
    g
}

pub fn retention_spec(p: &crate::config::Params, levels: u32, seed: u64) -> Result<RetentionSpec> {
    let bound = match p.str("bound")? {
        "hard" => BoundMode::Hard,
        "soft" => BoundMode::Soft,
        b => bail!("bound must be \"hard\" or \"soft\", found {b:?}"),
    };
    Ok(RetentionSpec {
        population: p.usize("population")?,
        levels,
        q: p.f64("q")?,
        bound,
        stream: EventStream::new(p.f64("rate")?, p.f64("f_plus")?, p.f64("f_minus")?)?,
        t_grid: retention_grid(p.f64("t_max")?, p.usize("points")?),
        seed,
    })
}

fn retention(cfg: &ExperimentConfig, o: &mut RunOutput) -> Result<()> {
    let p = &cfg.params;
    let levels: Vec<u32> = p
        .f64_list("levels")?
        .iter()
        .map(|&l| if l >= 1.0 && l.fract() == 0.0 { Ok(l as u32) } else { bail!("levels must be positive integers") })
        .collect::<Result<_>>()?;
    let mut summary = String::from("levels,lifetime,snr0,power_exponent,degenerate\n");
    let mut lifetimes = Vec::new();
    let mut plot = Plot::new("Memory retention", "t (1/r)", "SNR");
    plot.log_x = true;
    for &n in &levels {
        let spec = retention_spec(p, n, cfg.seed)?;
        let c = retention_experiment(&spec, cfg.jobs)?;
        let name = format!("snr_levels{n}.csv");
        o.write(&name, &c.to_csv())?;
        plot = plot.series(&format!("1/alpha = {n}"), &name, "t", "snr");
        let _ = writeln!(
            summary,
            "{n},{},{},{},{}",
            c.lifetime.map_or("none".into(), fmt_sig9),
            fmt_sig9(c.snr[0]),
            c.power_law_exponent().map_or("none".into(), fmt_sig9),
            c.degenerate
        );
        if c.degenerate {
            let flat = c.snr.windows(2).all(|w| w[0] == w[1]);
            o.check(&format!("degenerate_flat_levels{n}"), flat, "no candidate events: SNR must stay constant");
        }
        lifetimes.push((n, c.lifetime));
    }
    o.write("lifetimes.csv", &summary)?;
    let get = |n: u32| lifetimes.iter().find(|l| l.0 == n).and_then(|l| l.1);
    if levels.contains(&8) && levels.contains(&64) {
        let (a, b) = (get(8), get(64));
        let ratio = match (a, b) {
            (Some(a), Some(b)) if a > 0.0 => b / a,
            _ => f64::NAN,
        };
        o.check(
            "lifetime_scales_with_levels",
            (4.0..=16.0).contains(&ratio),
            format!("lifetime(64)/lifetime(8) = {ratio:.2}"),
        );
    }
    o.plot(plot);
    Ok(())
}
