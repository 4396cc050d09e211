//! Behavioral (non-circuit) plasticity: multi-level bounded synapses driven by
//! stochastic candidate events, STDP kernels, short-term and homeostatic
//! modulation, and metaplastic learning-rate ladders.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::synapse::KernelTable;

#[derive(Debug, Error, PartialEq)]
pub enum PlasticityError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("kernel file line {line}: {message}")]
    KernelFormat { line: usize, message: String },
}

fn param_err(msg: impl Into<String>) -> PlasticityError {
    PlasticityError::Param(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Potentiate,
    Depress,
}

impl Direction {
    pub fn sign(self) -> i64 {
        match self {
            Direction::Potentiate => 1,
            Direction::Depress => -1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMode {
    Hard,
    /// Update probability scales with the distance to the bound being
    /// approached, so the expected step shrinks near saturation while `w`
    /// stays on the grid.
    Soft,
}

/// Random stream for synapse `index` of an experiment seeded with `seed`.
/// Streams depend only on `(seed, index)`, never on how work is split.
pub fn synapse_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Weight held as a level index `k` out of `levels`, so `w = k / levels`.
#[derive(Debug, Clone, PartialEq)]
pub struct BehavioralSynapse {
    level: u32,
    levels: u32,
    pub q: f64,
    pub bound: BoundMode,
    /// Learning-rate ladder for metaplasticity; empty when unused.
    pub ladder: Vec<f64>,
    pub rung: usize,
}

impl BehavioralSynapse {
    /// `levels = 1/alpha`; `w` starts at 0.
    pub fn new(levels: u32, q: f64, bound: BoundMode) -> Result<Self, PlasticityError> {
        if levels == 0 {
            return Err(param_err("1/alpha must be at least 1"));
        }
        if !(q >= 0.0 && q <= 1.0) {
            return Err(param_err(format!("q = {q} outside [0, 1]")));
        }
        Ok(Self {
            level: 0,
            levels,
            q,
            bound,
            ladder: Vec::new(),
            rung: 0,
        })
    }

    /// Synapse whose `q` is read from `ladder[rung]`.
    pub fn with_ladder(
        levels: u32,
        ladder: Vec<f64>,
        rung: usize,
        bound: BoundMode,
    ) -> Result<Self, PlasticityError> {
        let q = *ladder
            .get(rung)
            .ok_or_else(|| param_err(format!("rung {rung} outside ladder of {}", ladder.len())))?;
        let mut s = Self::new(levels, q, bound)?;
        s.ladder = ladder;
        s.rung = rung;
        Ok(s)
    }

    pub fn w(&self) -> f64 {
        self.level as f64 / self.levels as f64
    }

    pub fn alpha(&self) -> f64 {
        1.0 / self.levels as f64
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    pub fn set_level(&mut self, level: u32) {
        self.level = level.min(self.levels);
    }

    /// Probability that a candidate event in `dir` moves the weight one level.
    pub fn step_probability(&self, dir: Direction) -> f64 {
        step_probability(self.level, self.levels, self.q, self.bound, dir)
    }

    /// Expected `|dw|` of one candidate event in `dir`.
    pub fn expected_step(&self, dir: Direction) -> f64 {
        self.step_probability(dir) * self.alpha()
    }

    /// One candidate event. Returns true when the weight changed.
    pub fn apply_candidate_event<R: Rng + ?Sized>(&mut self, dir: Direction, rng: &mut R) -> bool {
        // Always draw so the stream position does not depend on the state.
        let u: f64 = rng.random();
        self.apply_with_uniform(dir, u)
    }

    /// Candidate event decided by the uniform variate `u`.
    fn apply_with_uniform(&mut self, dir: Direction, u: f64) -> bool {
        if u >= self.step_probability(dir) {
            return false;
        }
        match dir {
            Direction::Potentiate => self.level += 1,
            Direction::Depress => self.level -= 1,
        }
        true
    }

    /// Moves the learning-rate rung one step, saturating at the ends. The
    /// weight is untouched.
    pub fn metaplastic_update(&mut self, dir: Direction) {
        if self.ladder.is_empty() {
            return;
        }
        self.rung = match dir {
            Direction::Potentiate => (self.rung + 1).min(self.ladder.len() - 1),
            Direction::Depress => self.rung.saturating_sub(1),
        };
        self.q = self.ladder[self.rung];
    }
}

fn step_probability(level: u32, levels: u32, q: f64, bound: BoundMode, dir: Direction) -> f64 {
    let room = match dir {
        Direction::Potentiate => levels - level,
        Direction::Depress => level,
    };
    if room == 0 {
        return 0.0;
    }
    match bound {
        BoundMode::Hard => q,
        BoundMode::Soft => q * room as f64 / levels as f64,
    }
}

/// Candidate plasticity events arriving as a Poisson process of rate `rate`;
/// each is potentiating with probability `f_plus`, depressing with
/// `f_minus`, and otherwise has no effect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EventStream {
    pub rate: f64,
    pub f_plus: f64,
    pub f_minus: f64,
}

impl EventStream {
    pub fn new(rate: f64, f_plus: f64, f_minus: f64) -> Result<Self, PlasticityError> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(param_err(format!("rate = {rate} must be finite and non-negative")));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(f_plus) && unit(f_minus) && f_plus + f_minus <= 1.0 + 1e-12) {
            return Err(param_err("need f_plus, f_minus in [0, 1] with f_plus + f_minus <= 1"));
        }
        Ok(Self {
            rate,
            f_plus,
            f_minus,
        })
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<Direction> {
        let u: f64 = rng.random();
        if u < self.f_plus {
            Some(Direction::Potentiate)
        } else if u < self.f_plus + self.f_minus {
            Some(Direction::Depress)
        } else {
            None
        }
    }
}

/// Stationary level distribution of a synapse under `stream` (a birth-death
/// chain, so detailed balance gives it directly).
pub fn stationary_distribution(levels: u32, q: f64, bound: BoundMode, stream: &EventStream) -> Vec<f64> {
    let n = levels as usize;
    let mut pi = vec![1.0; n + 1];
    for k in 0..n {
        let up = stream.f_plus * step_probability(k as u32, levels, q, bound, Direction::Potentiate);
        let down =
            stream.f_minus * step_probability(k as u32 + 1, levels, q, bound, Direction::Depress);
        pi[k + 1] = if down > 0.0 { pi[k] * up / down } else if up > 0.0 { f64::INFINITY } else { 0.0 };
    }
    if pi.iter().any(|p| !p.is_finite()) {
        // Depression never happens: everything ends at the top level.
        let mut v = vec![0.0; n + 1];
        v[n] = 1.0;
        return v;
    }
    let total: f64 = pi.iter().sum();
    if total == 0.0 {
        let mut v = vec![0.0; n + 1];
        v[0] = 1.0;
        return v;
    }
    pi.iter().map(|p| p / total).collect()
}

fn sample_level<R: Rng + ?Sized>(dist: &[f64], rng: &mut R) -> u32 {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in dist.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as u32;
        }
    }
    (dist.len() - 1) as u32
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetentionSpec {
    pub population: usize,
    /// `1/alpha`.
    pub levels: u32,
    pub q: f64,
    pub bound: BoundMode,
    pub stream: EventStream,
    /// Sample times, ascending, starting at or after 0.
    pub t_grid: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RetentionCurve {
    pub t: Vec<f64>,
    /// Mean pattern overlap `(1/N) sum xi_i (w_i - mu)`, estimated against a
    /// control copy of each synapse.
    pub signal: Vec<f64>,
    /// Monte Carlo standard error of `signal`.
    pub signal_stderr: Vec<f64>,
    pub snr: Vec<f64>,
    /// Mean and standard deviation of `w` in the stationary state.
    pub mu: f64,
    pub sigma: f64,
    /// First grid time with `snr < 1`, if any.
    pub lifetime: Option<f64>,
    /// No candidate events can occur (`rate = 0` or `q = 0`).
    pub degenerate: bool,
}

impl RetentionCurve {
    /// CSV with columns `t,snr`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,snr\n");
        for (t, s) in self.t.iter().zip(&self.snr) {
            out.push_str(&format!(
                "{},{}\n",
                crate::engine::fmt_sig9(*t),
                crate::engine::fmt_sig9(*s)
            ));
        }
        out
    }

    /// Least-squares slope of `ln snr` against `ln t` over points with
    /// `t > 0` and `snr > 0`. Reported, not asserted.
    pub fn power_law_exponent(&self) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .t
            .iter()
            .zip(&self.snr)
            .filter(|(t, s)| **t > 0.0 && **s > 0.0)
            .map(|(t, s)| (t.ln(), s.ln()))
            .collect();
        if pts.len() < 2 {
            return None;
        }
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        (sxx > 0.0).then(|| sxy / sxx)
    }
}

/// Signed level difference `pattern * (k_memory - k_control)` of one
/// synapse of a retention run, sampled on the grid.
///
/// The synapse starts from the stationary distribution and receives one
/// candidate event in the direction of its pattern bit at `t = 0` (the
/// tracked memory), then ongoing events from the stream. A control copy
/// starts at the same level, skips the memory event and sees the same
/// ongoing events and variates. The control is stationary and independent of
/// the pattern, so the difference has the same mean as `pattern * (k - mean)`
/// with far less spread.
fn retention_track(spec: &RetentionSpec, dist: &[f64], index: u64) -> Vec<i64> {
    let mut rng = synapse_rng(spec.seed, index);
    let pattern: i64 = if rng.random_bool(0.5) { 1 } else { -1 };
    let mut syn = BehavioralSynapse {
        level: sample_level(dist, &mut rng),
        levels: spec.levels,
        q: spec.q,
        bound: spec.bound,
        ladder: Vec::new(),
        rung: 0,
    };
    let mut control = syn.clone();
    let dir = if pattern > 0 {
        Direction::Potentiate
    } else {
        Direction::Depress
    };
    syn.apply_candidate_event(dir, &mut rng);
    let mut out = Vec::with_capacity(spec.t_grid.len());
    let gap = (spec.stream.rate > 0.0).then(|| Exp::new(spec.stream.rate).expect("positive rate"));
    let mut t_next = gap.map_or(f64::INFINITY, |g| g.sample(&mut rng));
    for &t in &spec.t_grid {
        while t_next <= t {
            if let Some(d) = spec.stream.draw(&mut rng) {
                let u: f64 = rng.random();
                syn.apply_with_uniform(d, u);
                control.apply_with_uniform(d, u);
            }
            t_next += gap.expect("finite event time implies a rate").sample(&mut rng);
        }
        out.push(pattern * (syn.level as i64 - control.level as i64));
    }
    out
}

/// Tracks one stored memory through ongoing plasticity across a population,
/// split over `jobs` workers. Output is independent of `jobs`.
pub fn retention_experiment(spec: &RetentionSpec, jobs: usize) -> Result<RetentionCurve, PlasticityError> {
    if spec.population == 0 {
        return Err(param_err("population must be positive"));
    }
    if spec.levels == 0 {
        return Err(param_err("1/alpha must be at least 1"));
    }
    if !(0.0..=1.0).contains(&spec.q) {
        return Err(param_err(format!("q = {} outside [0, 1]", spec.q)));
    }
    if spec.t_grid.windows(2).any(|w| w[1] < w[0]) || spec.t_grid.first().is_some_and(|t| *t < 0.0) {
        return Err(param_err("t_grid must be ascending and non-negative"));
    }
    let dist = stationary_distribution(spec.levels, spec.q, spec.bound, &spec.stream);
    let alpha = 1.0 / spec.levels as f64;
    let mu: f64 = dist.iter().enumerate().map(|(k, p)| p * k as f64 * alpha).sum();
    let var: f64 = dist
        .iter()
        .enumerate()
        .map(|(k, p)| p * (k as f64 * alpha - mu).powi(2))
        .sum();
    let sigma = var.sqrt();

    let indices: Vec<u64> = (0..spec.population as u64).collect();
    // Chunks keep per-task overhead low; each synapse still owns its stream.
    let chunks: Vec<&[u64]> = indices.chunks(256).collect();
    // Per chunk: sums of the signed level difference and of its square.
    let partial: Vec<(Vec<i64>, Vec<i64>)> = crate::par::map(&chunks, jobs, |chunk| {
        let mut sum = vec![0i64; spec.t_grid.len()];
        let mut sq = vec![0i64; spec.t_grid.len()];
        for &i in chunk.iter() {
            for ((s, q), d) in sum.iter_mut().zip(sq.iter_mut()).zip(retention_track(spec, &dist, i)) {
                *s += d;
                *q += d * d;
            }
        }
        (sum, sq)
    });
    let n = spec.population as f64;
    // Integer sums, so the result does not depend on how work was split.
    let mut sum = vec![0i64; spec.t_grid.len()];
    let mut sq = vec![0i64; spec.t_grid.len()];
    for (s, q) in &partial {
        for k in 0..sum.len() {
            sum[k] += s[k];
            sq[k] += q[k];
        }
    }
    let signal: Vec<f64> = sum.iter().map(|&s| s as f64 * alpha / n).collect();
    let signal_stderr: Vec<f64> = sum
        .iter()
        .zip(&sq)
        .map(|(&s, &q)| {
            let m = s as f64 / n;
            let var = (q as f64 / n - m * m).max(0.0);
            alpha * (var / n).sqrt()
        })
        .collect();
    let noise = sigma / n.sqrt();
    let snr: Vec<f64> = signal
        .iter()
        .map(|s| if noise > 0.0 { s / noise } else { 0.0 })
        .collect();
    let lifetime = spec
        .t_grid
        .iter()
        .zip(&snr)
        .find(|(_, s)| **s < 1.0)
        .map(|(t, _)| *t);
    Ok(RetentionCurve {
        t: spec.t_grid.clone(),
        signal,
        signal_stderr,
        snr,
        mu,
        sigma,
        lifetime,
        degenerate: spec.stream.rate == 0.0 || spec.q == 0.0,
    })
}

/// Tabulated STDP kernel. `delta_t = t_post - t_pre`; positive delays use the
/// strengthening side, negative delays the weakening side. Outside the
/// tabulated range the kernel is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct StdpKernel {
    /// `(delay >= 0, dw >= 0)`, ascending in delay.
    pub strengthen: Vec<(f64, f64)>,
    /// `(|delay| >= 0, dw <= 0)`, ascending in `|delay|`.
    pub weaken: Vec<(f64, f64)>,
}

fn interpolate(table: &[(f64, f64)], x: f64) -> f64 {
    match table {
        [] => 0.0,
        [(x0, y0)] => {
            if x == *x0 {
                *y0
            } else {
                0.0
            }
        }
        _ => {
            if x < table[0].0 || x > table[table.len() - 1].0 {
                return 0.0;
            }
            let i = table.partition_point(|p| p.0 <= x).clamp(1, table.len() - 1);
            let (xa, ya) = table[i - 1];
            let (xb, yb) = table[i];
            if xb == xa {
                return yb;
            }
            ya + (yb - ya) * (x - xa) / (xb - xa)
        }
    }
}

impl StdpKernel {
    pub fn new(strengthen: Vec<(f64, f64)>, weaken: Vec<(f64, f64)>) -> Result<Self, PlasticityError> {
        for (side, table, sign) in [("strengthen", &strengthen, 1.0), ("weaken", &weaken, -1.0)] {
            if table.windows(2).any(|w| w[1].0 <= w[0].0) {
                return Err(param_err(format!("{side} delays must be strictly ascending")));
            }
            if table.iter().any(|p| p.0 < 0.0 || p.1 * sign < 0.0) {
                return Err(param_err(format!(
                    "{side} side needs non-negative delays and dw of sign {sign}"
                )));
            }
        }
        Ok(Self { strengthen, weaken })
    }

    /// Mirror-symmetric kernel from one measured sweep curve: the
    /// strengthening side is `fraction` vs `delta_t` at `i_su`, the weakening
    /// side its negative.
    pub fn from_sweep(table: &KernelTable, i_su: f64) -> Result<Self, PlasticityError> {
        let side: Vec<(f64, f64)> = table
            .curve(i_su)
            .iter()
            .map(|r| (r.delta_t, r.fraction.max(0.0)))
            .collect();
        if side.is_empty() {
            return Err(param_err(format!("no sweep rows at i_su = {i_su:e}")));
        }
        let neg = side.iter().map(|&(d, w)| (d, -w)).collect();
        Self::new(side, neg)
    }

    /// `a * exp(-|dt| / tau)` on each side, tabulated on `delays`, with the
    /// last point forced to zero so the kernel has finite support.
    pub fn exponential(a_plus: f64, a_minus: f64, tau: f64, delays: &[f64]) -> Result<Self, PlasticityError> {
        let side = |a: f64| -> Vec<(f64, f64)> {
            let last = delays.len().saturating_sub(1);
            delays
                .iter()
                .enumerate()
                .map(|(i, &d)| (d, if i == last { 0.0 } else { a * (-d / tau).exp() }))
                .collect()
        };
        Self::new(side(a_plus), side(-a_minus))
    }

    pub fn dw(&self, delta_t: f64) -> f64 {
        if delta_t >= 0.0 {
            let s = interpolate(&self.strengthen, delta_t);
            if delta_t == 0.0 && s == 0.0 {
                return interpolate(&self.weaken, 0.0);
            }
            s
        } else {
            interpolate(&self.weaken, -delta_t)
        }
    }

    /// CSV `delta_t_ns,i_su_uA,delta_w` with weakening delays negative. The
    /// weakening value at zero delay is written as `-0`.
    pub fn to_csv(&self, i_su: f64) -> String {
        let mut out = String::from("delta_t_ns,i_su_uA,delta_w\n");
        let f = crate::engine::fmt_sig9;
        for &(d, w) in self.weaken.iter().rev() {
            let t = if d > 0.0 { f(-d * 1e9) } else { "-0".to_string() };
            out.push_str(&format!("{},{},{}\n", t, f(i_su * 1e6), f(w)));
        }
        for &(d, w) in &self.strengthen {
            out.push_str(&format!("{},{},{}\n", f(d * 1e9), f(i_su * 1e6), f(w)));
        }
        out
    }

    /// Reads the rows for `i_su` (within 1 pA) from a kernel CSV.
    pub fn from_csv(text: &str, i_su: f64) -> Result<Self, PlasticityError> {
        let mut lines = text.lines().enumerate();
        match lines.next() {
            Some((_, h)) if h.trim() == "delta_t_ns,i_su_uA,delta_w" => {}
            _ => {
                return Err(PlasticityError::KernelFormat {
                    line: 1,
                    message: "expected header delta_t_ns,i_su_uA,delta_w".into(),
                })
            }
        }
        let mut strengthen = Vec::new();
        let mut weaken = Vec::new();
        for (i, line) in lines {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            let bad = |message: String| PlasticityError::KernelFormat { line: i + 1, message };
            if fields.len() != 3 {
                return Err(bad(format!("expected 3 fields, found {}", fields.len())));
            }
            let mut v = [0.0; 3];
            for (slot, f) in v.iter_mut().zip(&fields) {
                *slot = f.parse().map_err(|_| bad(format!("not a number: {f:?}")))?;
            }
            if (v[1] * 1e-6 - i_su).abs() > 1e-12 {
                continue;
            }
            let d = v[0] * 1e-9;
            if d.is_sign_negative() {
                weaken.push((-d, v[2]));
            } else {
                strengthen.push((d, v[2]));
            }
        }
        weaken.sort_by(|a, b| a.0.total_cmp(&b.0));
        if weaken.first().is_none_or(|p| p.0 > 0.0) {
            if let Some(&(0.0, w)) = strengthen.first() {
                weaken.insert(0, (0.0, -w));
            }
        }
        Self::new(strengthen, weaken)
    }
}

/// Applies the kernel to one pre/post spike pair. The change is rounded to
/// whole levels toward zero and clamped to `[0, 1]`.
pub fn stdp_update(syn: &mut BehavioralSynapse, kernel: &StdpKernel, t_pre: f64, t_post: f64) {
    let dw = kernel.dw(t_post - t_pre);
    let steps = (dw * syn.levels as f64 + 1e-9 * dw.signum()).trunc() as i64;
    let level = (syn.level as i64 + steps).clamp(0, syn.levels as i64);
    syn.level = level as u32;
}

/// Short-term facilitation and depression traces.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShortTermState {
    pub sf: f64,
    pub sd: f64,
    pub tau_sf: f64,
    pub tau_sd: f64,
    pub g_sf: f64,
    pub g_sd: f64,
}

impl ShortTermState {
    pub fn new(tau_sf: f64, tau_sd: f64, g_sf: f64, g_sd: f64) -> Result<Self, PlasticityError> {
        if !(tau_sf > 0.0 && tau_sd > 0.0) {
            return Err(param_err("short-term time constants must be positive"));
        }
        if !(g_sf >= 0.0 && g_sd >= 0.0) {
            return Err(param_err("short-term gains must be non-negative"));
        }
        Ok(Self {
            sf: 0.0,
            sd: 0.0,
            tau_sf,
            tau_sd,
            g_sf,
            g_sd,
        })
    }

    fn decay(&mut self, dt: f64) {
        self.sf *= (-dt / self.tau_sf).exp();
        self.sd *= (-dt / self.tau_sd).exp();
    }

    pub fn effective_weight(&self, w: f64) -> f64 {
        (w + self.g_sf * self.sf - self.g_sd * self.sd).clamp(0.0, 1.0)
    }
}

/// Effective weight sampled at `t_grid` for spikes at `spikes` (both
/// ascending). A spike at exactly a grid time is counted before sampling.
pub fn short_term_filter(w: f64, state: &ShortTermState, spikes: &[f64], t_grid: &[f64]) -> Vec<f64> {
    let mut st = *state;
    let mut now = t_grid.first().copied().unwrap_or(0.0).min(spikes.first().copied().unwrap_or(0.0));
    let mut next = 0;
    let mut out = Vec::with_capacity(t_grid.len());
    for &t in t_grid {
        while next < spikes.len() && spikes[next] <= t {
            st.decay(spikes[next] - now);
            now = spikes[next];
            st.sf += 1.0;
            st.sd += 1.0;
            next += 1;
        }
        st.decay(t - now);
        now = t;
        out.push(st.effective_weight(w));
    }
    out
}

/// Homeostatic weight offset `-g_h * sum exp(-(t - t_i) / tau_h)` over post
/// spikes `t_i <= t`.
pub fn homeostatic_offset(g_h: f64, tau_h: f64, post_spikes: &[f64], t: f64) -> f64 {
    -g_h.abs()
        * post_spikes
            .iter()
            .filter(|&&ti| ti <= t)
            .map(|&ti| (-(t - ti) / tau_h).exp())
            .sum::<f64>()
}

/// Relative learning rates for a family of update-junction biases, from the
/// kernel integrals of a sweep, normalised to the largest.
pub fn q_ladder(table: &KernelTable, i_sus: &[f64]) -> Vec<f64> {
    let ints: Vec<f64> = i_sus.iter().map(|&i| table.integral(i).max(0.0)).collect();
    let max = ints.iter().cloned().fold(0.0, f64::max);
    if max == 0.0 {
        return vec![0.0; ints.len()];
    }
    ints.iter().map(|v| v / max).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn soft_bound_probability_shrinks_near_top() {
        let mut s = BehavioralSynapse::new(10, 1.0, BoundMode::Soft).unwrap();
        s.set_level(9);
        let near = s.expected_step(Direction::Potentiate);
        s.set_level(5);
        let mid = s.expected_step(Direction::Potentiate);
        assert!(near <= mid);
    }

    #[test]
    fn interpolation_is_zero_outside_support() {
        let t = [(0.0, 1.0), (1.0, 0.0)];
        assert_eq!(interpolate(&t, 2.0), 0.0);
        assert_eq!(interpolate(&t, 0.5), 0.5);
    }
}
