//! Line-oriented netlist text format.
//!
//! ```text
//! * comment
//! L1 1 0 90p
//! B1 2 0 ic=40u betac=0.95 r=5
//! K1 L1 L2 k=0.5
//! I1 0 2 dc(20u)
//! I2 0 2 pulse(10u,100p,100p,1n,2n,5n,1)
//! S1 3 4 rh=5k th=200p events=(10n,35n)
//! .tran 1p 20n
//! .probe I(L1) P(2)
//! .end
//! ```

use std::collections::HashMap;
use std::fmt;

use crate::circuit::{
    validate_netlist, Coupling, Device, Diagnostic, Element, ElementKind,
    JosephsonJunctionParams, Netlist, Probe, SpdParams, SquareTrain, TransientSpec, Waveform,
    DEFAULT_SHUNT_RESISTANCE, DEFAULT_SPD_EDGE,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SourceSpan {
    pub line: usize,
    pub column: usize,
    pub length: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParseDiagnostic {
    pub span: SourceSpan,
    pub severity: Severity,
    pub message: String,
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(
            f,
            "line {}, column {}: {sev}: {}",
            self.span.line, self.span.column, self.message
        )
    }
}

#[derive(Debug, Clone)]
struct Token<'a> {
    text: &'a str,
    span: SourceSpan,
}

/// Splits a line on whitespace and on commas outside parentheses.
fn tokenize<'a>(line: &'a str, line_no: usize) -> Vec<Token<'a>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start: Option<usize> = None;
    let push = |out: &mut Vec<Token<'a>>, s: usize, e: usize| {
        let column = line[..s].chars().count() + 1;
        out.push(Token {
            text: &line[s..e],
            span: SourceSpan {
                line: line_no,
                column,
                length: line[s..e].chars().count(),
            },
        });
    };
    for (i, c) in line.char_indices() {
        let sep = depth == 0 && (c.is_whitespace() || c == ',');
        match c {
            '(' => depth += 1,
            ')' => depth -= 1,
            _ => {}
        }
        if sep {
            if let Some(s) = start.take() {
                push(&mut out, s, i);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        push(&mut out, s, line.len());
    }
    out
}

fn suffix_exponent(suffix: &str) -> Option<i32> {
    match suffix.to_ascii_lowercase().as_str() {
        "" => Some(0),
        "f" => Some(-15),
        "p" => Some(-12),
        "n" => Some(-9),
        "u" => Some(-6),
        "m" => Some(-3),
        "k" => Some(3),
        "meg" => Some(6),
        _ => None,
    }
}

/// Parses a number with an optional SI suffix. The suffix is folded into the
/// decimal exponent before conversion, so `90p` and `90e-12` give the same bits.
pub fn parse_value(text: &str) -> Result<f64, String> {
    let bytes = text.as_bytes();
    let mut i = 0;
    if i < bytes.len() && (bytes[i] == b'+' || bytes[i] == b'-') {
        i += 1;
    }
    let mut digits = 0;
    while i < bytes.len() && bytes[i].is_ascii_digit() {
        i += 1;
        digits += 1;
    }
    if i < bytes.len() && bytes[i] == b'.' {
        i += 1;
        while i < bytes.len() && bytes[i].is_ascii_digit() {
            i += 1;
            digits += 1;
        }
    }
    if digits == 0 {
        return Err(format!("malformed number {text}"));
    }
    let mantissa = &text[..i];
    let mut exponent: i32 = 0;
    if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
        let mut j = i + 1;
        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
            j += 1;
        }
        let exp_digits_start = j;
        while j < bytes.len() && bytes[j].is_ascii_digit() {
            j += 1;
        }
        if j > exp_digits_start {
            exponent = text[i + 1..j]
                .parse()
                .map_err(|_| format!("malformed number {text}"))?;
            i = j;
        }
    }
    let suffix = &text[i..];
    if !suffix.chars().all(|c| c.is_ascii_alphabetic()) {
        return Err(format!("malformed number {text}"));
    }
    let scale = suffix_exponent(suffix).ok_or_else(|| format!("unknown unit suffix {suffix}"))?;
    let value: f64 = format!("{mantissa}e{}", exponent + scale)
        .parse()
        .map_err(|_| format!("malformed number {text}"))?;
    if !value.is_finite() {
        return Err(format!("number out of range {text}"));
    }
    Ok(value)
}

/// Formats a value with an SI suffix and 6 significant digits. If 6 digits
/// do not reproduce the exact `f64`, the shortest exact representation is used.
pub fn format_value(value: f64) -> String {
    if value == 0.0 {
        return "0".to_string();
    }
    let short = format!("{value:.5e}");
    let repr = if short.parse::<f64>() == Ok(value) {
        short
    } else {
        format!("{value:e}")
    };
    let (mant, exp) = repr.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mant) = match mant.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mant),
    };
    let digits: String = mant.chars().filter(|c| *c != '.').collect();
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let suffix_exp = ((exp as f64 / 3.0).floor() as i32 * 3).clamp(-15, 6);
    let shift = exp - suffix_exp;
    if shift < 0 {
        return format!("{sign}{}e{exp}", place_point(digits, 1));
    }
    let suffix = match suffix_exp {
        -15 => "f",
        -12 => "p",
        -9 => "n",
        -6 => "u",
        -3 => "m",
        0 => "",
        3 => "k",
        _ => "meg",
    };
    format!("{sign}{}{suffix}", place_point(digits, (shift + 1) as usize))
}

fn place_point(digits: &str, int_len: usize) -> String {
    if digits.len() <= int_len {
        let mut s = digits.to_string();
        s.extend(std::iter::repeat_n('0', int_len - digits.len()));
        s
    } else {
        format!("{}.{}", &digits[..int_len], &digits[int_len..])
    }
}

struct Parser {
    diags: Vec<ParseDiagnostic>,
}

impl Parser {
    fn error(&mut self, span: SourceSpan, message: impl Into<String>) {
        self.diags.push(ParseDiagnostic {
            span,
            severity: Severity::Error,
            message: message.into(),
        });
    }

    fn value(&mut self, tok: &Token<'_>, text: &str) -> Option<f64> {
        match parse_value(text) {
            Ok(v) => Some(v),
            Err(msg) => {
                self.error(tok.span, msg);
                None
            }
        }
    }

    /// Parses `key=value` parameters into a map keyed by lowercase name.
    fn params<'a>(&mut self, toks: &[Token<'a>]) -> HashMap<String, (Token<'a>, &'a str)> {
        let mut map = HashMap::new();
        for t in toks {
            match t.text.split_once('=') {
                Some((k, v)) if !k.is_empty() => {
                    let key = k.to_ascii_lowercase();
                    if map.insert(key.clone(), (t.clone(), v)).is_some() {
                        self.error(t.span, format!("repeated parameter {key}"));
                    }
                }
                _ => self.error(t.span, format!("expected key=value, found {}", t.text)),
            }
        }
        map
    }

    fn take_param(
        &mut self,
        map: &mut HashMap<String, (Token<'_>, &str)>,
        key: &str,
        line_span: SourceSpan,
        name: &str,
    ) -> Option<f64> {
        match map.remove(key) {
            Some((tok, v)) => self.value(&tok, v),
            None => {
                self.error(line_span, format!("{name}: missing parameter {key}="));
                None
            }
        }
    }

    fn reject_extra(&mut self, map: HashMap<String, (Token<'_>, &str)>) {
        let mut rest: Vec<_> = map.into_iter().collect();
        rest.sort_by_key(|(_, (t, _))| t.span.column);
        for (k, (t, _)) in rest {
            self.error(t.span, format!("unknown parameter {k}"));
        }
    }

    fn call_args<'a>(&mut self, tok: &Token<'a>, body: &'a str) -> Option<Vec<&'a str>> {
        let inner = body.strip_prefix('(').and_then(|b| b.strip_suffix(')'));
        match inner {
            Some(s) if s.trim().is_empty() => Some(Vec::new()),
            Some(s) => Some(s.split(',').map(str::trim).collect()),
            None => {
                self.error(tok.span, format!("expected parenthesized arguments in {}", tok.text));
                None
            }
        }
    }

    fn values(&mut self, tok: &Token<'_>, args: &[&str]) -> Option<Vec<f64>> {
        let mut out = Vec::with_capacity(args.len());
        let mut ok = true;
        for a in args {
            match self.value(tok, a) {
                Some(v) => out.push(v),
                None => ok = false,
            }
        }
        ok.then_some(out)
    }

    fn waveform(&mut self, tok: &Token<'_>) -> Option<Waveform> {
        let text = tok.text;
        let lower = text.to_ascii_lowercase();
        let head_len = text.find('(').unwrap_or(text.len());
        let head = &lower[..head_len];
        match head {
            "dc" => {
                let args = self.call_args(tok, &text[head_len..])?;
                let v = self.values(tok, &args)?;
                if v.len() != 1 {
                    self.error(tok.span, "dc() takes one argument");
                    return None;
                }
                Some(Waveform::Dc(v[0]))
            }
            "pulse" => {
                let args = self.call_args(tok, &text[head_len..])?;
                if args.len() != 7 {
                    self.error(
                        tok.span,
                        "pulse() takes amplitude, rise, fall, high, period, start, count",
                    );
                    return None;
                }
                let v = self.values(tok, &args[..6])?;
                let count = match args[6].parse::<u64>() {
                    Ok(c) => c,
                    Err(_) => {
                        self.error(tok.span, format!("malformed pulse count {}", args[6]));
                        return None;
                    }
                };
                Some(Waveform::SquareTrain(SquareTrain {
                    amplitude: v[0],
                    rise_time: v[1],
                    fall_time: v[2],
                    high_duration: v[3],
                    period: v[4],
                    start: v[5],
                    count,
                }))
            }
            "pwl" => {
                let args = self.call_args(tok, &text[head_len..])?;
                let v = self.values(tok, &args)?;
                if v.is_empty() || v.len() % 2 != 0 {
                    self.error(tok.span, "pwl() takes time/value pairs");
                    return None;
                }
                Some(Waveform::PiecewiseLinear(
                    v.chunks(2).map(|c| (c[0], c[1])).collect(),
                ))
            }
            _ if !text.contains('(') => self.value(tok, text).map(Waveform::Dc),
            _ => {
                self.error(tok.span, format!("unknown waveform {head}"));
                None
            }
        }
    }

    fn element(&mut self, toks: &[Token<'_>]) -> Option<Element> {
        let name_tok = &toks[0];
        let name = name_tok.text;
        let letter = match name.chars().next().unwrap().to_ascii_uppercase() {
            'J' => 'B',
            c => c,
        };
        let line_span = SourceSpan {
            length: name_tok.span.length,
            ..name_tok.span
        };
        if !matches!(letter, 'L' | 'R' | 'B' | 'K' | 'I' | 'S') {
            self.error(name_tok.span, format!("unknown element letter {}", &name[..1]));
            return None;
        }
        if toks.len() < 3 {
            let span = toks.last().unwrap().span;
            self.error(span, format!("{name}: missing terminal"));
            return None;
        }
        let (a, b) = (toks[1].text, toks[2].text);
        let rest = &toks[3..];
        if letter == 'K' {
            let mut map = self.params(rest);
            let m = map.remove("m");
            let k = map.remove("k");
            self.reject_extra(map);
            let coupling = match (m, k) {
                (Some((t, v)), None) => Coupling::Mutual(self.value(&t, v)?),
                (None, Some((t, v))) => Coupling::Factor(self.value(&t, v)?),
                (Some((t, _)), Some(_)) => {
                    self.error(t.span, format!("{name}: give either m= or k=, not both"));
                    return None;
                }
                (None, None) => {
                    self.error(line_span, format!("{name}: missing m= or k="));
                    return None;
                }
            };
            return Some(Element {
                name: name.to_string(),
                kind: ElementKind::Mutual {
                    inductor_a: a.to_string(),
                    inductor_b: b.to_string(),
                    coupling,
                },
            });
        }
        let device = match letter {
            'L' | 'R' => {
                if rest.len() != 1 {
                    let span = rest.get(1).map_or(line_span, |t| t.span);
                    self.error(span, format!("{name}: expected exactly one value"));
                    return None;
                }
                let v = self.value(&rest[0], rest[0].text)?;
                if letter == 'L' {
                    Device::Inductor(v)
                } else {
                    Device::Resistor(v)
                }
            }
            'B' => {
                let mut map = self.params(rest);
                let ic = self.take_param(&mut map, "ic", line_span, name);
                let bc = self.take_param(&mut map, "betac", line_span, name);
                let r = match map.remove("r") {
                    Some((t, v)) => self.value(&t, v),
                    None => Some(DEFAULT_SHUNT_RESISTANCE),
                };
                let c = map.remove("c");
                self.reject_extra(map);
                let (ic, bc, r) = (ic?, bc?, r?);
                let params = match c {
                    Some((t, v)) => {
                        let c = self.value(&t, v)?;
                        JosephsonJunctionParams::from_all(ic, bc, r, c)
                    }
                    None => JosephsonJunctionParams::new(ic, bc, r),
                };
                match params {
                    Ok(p) => Device::Junction(p),
                    Err(e) => {
                        self.error(line_span, format!("{name}: {e}"));
                        return None;
                    }
                }
            }
            'I' => {
                if rest.len() != 1 {
                    let span = rest.get(1).map_or(line_span, |t| t.span);
                    self.error(span, format!("{name}: expected exactly one waveform"));
                    return None;
                }
                Device::CurrentSource(self.waveform(&rest[0])?)
            }
            'S' => {
                let mut map = self.params(rest);
                let rh = self.take_param(&mut map, "rh", line_span, name);
                let th = self.take_param(&mut map, "th", line_span, name);
                let edge = match map.remove("edge") {
                    Some((t, v)) => self.value(&t, v),
                    None => Some(DEFAULT_SPD_EDGE),
                };
                let events = match map.remove("events") {
                    Some((t, v)) => {
                        let args = self.call_args(&t, v);
                        args.and_then(|a| self.values(&t, &a))
                    }
                    None => Some(Vec::new()),
                };
                self.reject_extra(map);
                Device::Spd(SpdParams {
                    hotspot_resistance: rh?,
                    hotspot_duration: th?,
                    photon_arrival_times: events?,
                    edge_time: edge?,
                })
            }
            _ => unreachable!(),
        };
        Some(Element::two_terminal(name, a, b, device))
    }
}

/// Parses netlist text. Semantic checks (values, connectivity, coupling
/// bounds) are left to [`validate_netlist`].
pub fn parse(text: &str) -> Result<Netlist, Vec<ParseDiagnostic>> {
    let mut p = Parser { diags: Vec::new() };
    let mut netlist = Netlist::new();
    let mut names: HashMap<String, SourceSpan> = HashMap::new();
    let mut seen_tran = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let toks = tokenize(raw, line_no);
        let Some(first) = toks.first() else { continue };
        if first.text.starts_with('*') {
            continue;
        }
        if let Some(directive) = first.text.strip_prefix('.') {
            match directive.to_ascii_lowercase().as_str() {
                "tran" => {
                    if seen_tran {
                        p.error(first.span, "repeated .tran directive");
                    }
                    seen_tran = true;
                    if !(3..=4).contains(&toks.len()) {
                        p.error(first.span, ".tran takes dt_max t_stop [output_step]");
                        continue;
                    }
                    let vals: Vec<Option<f64>> =
                        toks[1..].iter().map(|t| p.value(t, t.text)).collect();
                    if let (Some(dt), Some(ts)) = (vals[0], vals[1]) {
                        let out = vals.get(2).copied().flatten().unwrap_or(0.0);
                        netlist.analysis = TransientSpec {
                            dt_max: dt,
                            t_stop: ts,
                            output_step: out,
                        };
                    }
                }
                "probe" => {
                    for t in &toks[1..] {
                        match Probe::parse_label(t.text) {
                            Some(pr) => {
                                netlist.probe(pr);
                            }
                            None => p.error(t.span, format!("malformed probe {}", t.text)),
                        }
                    }
                }
                "end" => break,
                other => p.error(first.span, format!("unknown directive .{other}")),
            }
            continue;
        }
        if let Some(el) = p.element(&toks) {
            if let Some(prev) = names.get(&el.name) {
                let msg = format!(
                    "duplicate name {} (first defined on line {})",
                    el.name, prev.line
                );
                p.error(first.span, msg);
                continue;
            }
            names.insert(el.name.clone(), first.span);
            netlist.push(el);
        }
    }
    if p.diags.is_empty() {
        Ok(netlist)
    } else {
        Err(p.diags)
    }
}

fn waveform_text(w: &Waveform) -> String {
    match w {
        Waveform::Dc(v) => format!("dc({})", format_value(*v)),
        Waveform::SquareTrain(s) => format!(
            "pulse({},{},{},{},{},{},{})",
            format_value(s.amplitude),
            format_value(s.rise_time),
            format_value(s.fall_time),
            format_value(s.high_duration),
            format_value(s.period),
            format_value(s.start),
            s.count
        ),
        Waveform::PiecewiseLinear(points) => {
            let body: Vec<String> = points
                .iter()
                .flat_map(|(t, v)| [format_value(*t), format_value(*v)])
                .collect();
            format!("pwl({})", body.join(","))
        }
    }
}

fn element_line(e: &Element) -> String {
    match &e.kind {
        ElementKind::Mutual {
            inductor_a,
            inductor_b,
            coupling,
        } => {
            let c = match coupling {
                Coupling::Mutual(m) => format!("m={}", format_value(*m)),
                Coupling::Factor(k) => format!("k={}", format_value(*k)),
            };
            format!("{} {inductor_a} {inductor_b} {c}", e.name)
        }
        ElementKind::TwoTerminal { pos, neg, device } => {
            let tail = match device {
                Device::Inductor(l) => format_value(*l),
                Device::Resistor(r) => format_value(*r),
                Device::Junction(j) => format!(
                    "ic={} betac={} r={}",
                    format_value(j.critical_current),
                    format_value(j.stewart_mccumber),
                    format_value(j.shunt_resistance)
                ),
                Device::CurrentSource(w) => waveform_text(w),
                Device::Spd(s) => {
                    let ev: Vec<String> =
                        s.photon_arrival_times.iter().map(|t| format_value(*t)).collect();
                    let mut t = format!(
                        "rh={} th={} events=({})",
                        format_value(s.hotspot_resistance),
                        format_value(s.hotspot_duration),
                        ev.join(",")
                    );
                    if s.edge_time != DEFAULT_SPD_EDGE {
                        t.push_str(&format!(" edge={}", format_value(s.edge_time)));
                    }
                    t
                }
            };
            format!("{} {pos} {neg} {tail}", e.name)
        }
    }
}

/// Canonical text form: elements sorted by name, then `.tran` and `.probe`.
/// Invalid netlists are refused with their diagnostics.
pub fn serialize(netlist: &Netlist) -> Result<String, Vec<Diagnostic>> {
    let diags = validate_netlist(netlist);
    if !diags.is_empty() {
        return Err(diags);
    }
    let mut elements: Vec<&Element> = netlist.elements.iter().collect();
    elements.sort_by(|a, b| a.name.cmp(&b.name));
    let mut out = String::new();
    for e in elements {
        out.push_str(&element_line(e));
        out.push('\n');
    }
    let a = &netlist.analysis;
    out.push_str(&format!(".tran {} {}", format_value(a.dt_max), format_value(a.t_stop)));
    if a.output_step != 0.0 {
        out.push_str(&format!(" {}", format_value(a.output_step)));
    }
    out.push('\n');
    if !netlist.probes.is_empty() {
        let labels: Vec<String> = netlist.probes.iter().map(Probe::label).collect();
        out.push_str(&format!(".probe {}\n", labels.join(" ")));
    }
    Ok(out)
}

/// Returns a copy with elements in canonical (name) order, as produced by a
/// serialize/parse round trip.
pub fn canonical(netlist: &Netlist) -> Netlist {
    let mut n = netlist.clone();
    n.elements.sort_by(|a, b| a.name.cmp(&b.name));
    n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::make_junction;

    #[test]
    fn parses_inductor_with_suffix() {
        let n = parse("L1 1 0 90p\n").unwrap();
        let e = n.element("L1").unwrap();
        assert_eq!(e.terminals(), Some(("1", "0")));
        assert_eq!(e.inductance(), Some(90e-12));
    }

    #[test]
    fn parses_junction() {
        let n = parse("B1 2 0 ic=40u betac=0.95 r=5").unwrap();
        match n.element("B1").unwrap().device() {
            Some(Device::Junction(j)) => {
                assert_eq!(j.critical_current, 40e-6);
                assert_eq!(*j, make_junction(40e-6, 0.95, 5.0).unwrap());
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_suffix_reported_with_span() {
        let d = parse("L1 1 0 90x").unwrap_err();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].message, "unknown unit suffix x");
        assert_eq!(d[0].span.line, 1);
        assert_eq!(d[0].span.column, 8);
        assert_eq!(d[0].span.length, 3);
    }

    #[test]
    fn grammar_errors() {
        let d = parse("Q1 1 0 5\nL2 1\nL3 1 0 1p\nL3 2 0 1p\nR1 1 0 1..2").unwrap_err();
        let msgs: Vec<&str> = d.iter().map(|d| d.message.as_str()).collect();
        assert!(msgs[0].starts_with("unknown element letter Q"));
        assert!(msgs[1].contains("missing terminal"));
        assert_eq!(d[1].span.line, 2);
        assert!(msgs[2].starts_with("duplicate name L3"));
        assert_eq!(d[2].span.line, 4);
        assert!(msgs[3].contains("malformed number"));
    }

    #[test]
    fn suffixes_are_case_insensitive_and_exact() {
        assert_eq!(parse_value("5MEG").unwrap(), 5e6);
        assert_eq!(parse_value("5k").unwrap(), 5e3);
        assert_eq!(parse_value("5K").unwrap(), 5e3);
        assert_eq!(parse_value("2.5u").unwrap(), 2.5e-6);
        assert_eq!(parse_value("-1.5e3p").unwrap(), -1.5e-9);
        assert_eq!(parse_value("0.95").unwrap(), 0.95);
        assert!(parse_value("1,5").is_err());
        assert!(parse_value("p").is_err());
    }

    #[test]
    fn formats_with_si_suffixes() {
        assert_eq!(format_value(45e-12), "45p");
        assert_eq!(format_value(1.25e-6), "1.25u");
        assert_eq!(format_value(5e3), "5k");
        assert_eq!(format_value(0.95), "950m");
        assert_eq!(format_value(5.0), "5");
        assert_eq!(format_value(-18e-12), "-18p");
        assert_eq!(format_value(2e9), "2000meg");
        assert_eq!(format_value(1e-18), "1e-18");
        assert_eq!(format_value(1.0 / 3.0), "333.3333333333333m");
        for v in [1.0 / 3.0, 45e-12, 0.1 + 0.2, 1e-18, 123456.789e-9] {
            assert_eq!(parse_value(&format_value(v)).unwrap(), v);
        }
    }

    #[test]
    fn sources_spd_and_directives() {
        let text = "I1 0 1 pulse(10u, 100p, 100p, 1n, 2n, 5n, 3)\n\
                    I2 0 1 dc(20u)\n\
                    I3 0 1 pwl(0,0,1n,5u)\n\
                    S1 1 2 rh=5k, th=200p, events=(10n,35n)\n\
                    R1 2 0 1\n\
                    L1 1 0 1n\n\
                    .tran 1p 20n 10p\n\
                    .probe I(L1) P(1) V(2)\n\
                    .end\n\
                    garbage after end";
        let n = parse(text).unwrap();
        assert_eq!(n.analysis.t_stop, 20e-9);
        assert_eq!(n.analysis.output_step, 10e-12);
        assert_eq!(n.probes.len(), 3);
        match n.element("S1").unwrap().device() {
            Some(Device::Spd(s)) => assert_eq!(s.photon_arrival_times, vec![10e-9, 35e-9]),
            other => panic!("{other:?}"),
        }
        match n.element("I1").unwrap().device() {
            Some(Device::CurrentSource(Waveform::SquareTrain(s))) => assert_eq!(s.count, 3),
            other => panic!("{other:?}"),
        }
        let again = parse(&serialize(&n).unwrap()).unwrap();
        assert_eq!(again, canonical(&n));
    }

    #[test]
    fn serialize_empty_and_invalid() {
        let n = Netlist::new();
        let text = serialize(&n).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(text.starts_with(".tran"));
        let bad = parse("L1 1 2 1p").unwrap();
        assert!(serialize(&bad).is_err());
    }

    #[test]
    fn comments_and_blank_lines() {
        let n = parse("* header\n\n   \nL1 1 0 1p\n").unwrap();
        assert_eq!(n.elements.len(), 1);
    }
}
