//! Netlist representation, text parser and serializer.
//!
//! Text format, one component per line, `#` starts a comment, kind letters
//! and keys are case-insensitive, numbers accept the suffixes
//! `f p n u m k meg g t`:
//!
//! ```text
//! V<name> <n+> <n-> DC <volts>
//! V<name> <n+> <n-> SIN <offset> <amplitude> <hz>
//! V<name> <n+> <n-> PWL <t1> <v1> <t2> <v2> ...
//! V<name> <n+> <n-> STEP <v_before> <v_after> <t_edge>
//! R<name> <n1> <n2> <ohms>
//! C<name> <n1> <n2> <farads> [IC=<coulombs>]
//! M<name> <n+> <n-> STATES=<G> R=<r0,...> TAUUP=<...> VUP=<...> TAUDOWN=<...> VDOWN=<...> [STATE=<i>]
//! ```
//!
//! Rate-parameter lists take either `G-1` entries or a single entry that is
//! replicated. Node `0` is ground.

use std::collections::HashMap;
use std::fmt::{self, Write as _};

use thiserror::Error;

use super::waveform::Waveform;
use crate::device::MemristorModel;

pub const GROUND: &str = "0";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetlistError {
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("no components")]
    NoComponents,
    #[error("no component is connected to ground node \"0\"")]
    NoGround,
    #[error("floating node(s) not connected to ground: {}", .0.join(", "))]
    FloatingNodes(Vec<String>),
    #[error("duplicate component name {0}")]
    DuplicateName(String),
    #[error("component {name}: {message}")]
    InvalidComponent { name: String, message: String },
    #[error("no voltage source and not every capacitor has an initial charge")]
    Undriven,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Element {
    VoltageSource(Waveform),
    Resistor(f64),
    Capacitor {
        capacitance: f64,
        initial_charge: Option<f64>,
    },
    Memristor {
        model: MemristorModel,
        initial_state: Option<usize>,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Component {
    pub name: String,
    /// Positive terminal node index.
    pub pos: usize,
    /// Negative terminal node index.
    pub neg: usize,
    pub element: Element,
}

/// A validated circuit. Node 0 is always ground.
#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    nodes: Vec<String>,
    components: Vec<Component>,
    memristors: Vec<usize>,
    capacitors: Vec<usize>,
    sources: Vec<usize>,
}

/// Memristor states, capacitor charges and time.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitState {
    pub memristor_states: Vec<usize>,
    pub capacitor_charges: Vec<f64>,
    pub time: f64,
}

impl Netlist {
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    /// Number of nodes excluding ground.
    pub fn node_count(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn components(&self) -> &[Component] {
        &self.components
    }

    /// Component indices of the memristors, in netlist order.
    pub fn memristor_indices(&self) -> &[usize] {
        &self.memristors
    }

    pub fn capacitor_indices(&self) -> &[usize] {
        &self.capacitors
    }

    pub fn source_indices(&self) -> &[usize] {
        &self.sources
    }

    pub fn memristor_model(&self, m: usize) -> &MemristorModel {
        match &self.components[self.memristors[m]].element {
            Element::Memristor { model, .. } => model,
            _ => unreachable!("memristor index points at a memristor"),
        }
    }

    pub fn capacitance(&self, k: usize) -> f64 {
        match &self.components[self.capacitors[k]].element {
            Element::Capacitor { capacitance, .. } => *capacitance,
            _ => unreachable!("capacitor index points at a capacitor"),
        }
    }

    pub fn source_waveform(&self, s: usize) -> &Waveform {
        match &self.components[self.sources[s]].element {
            Element::VoltageSource(w) => w,
            _ => unreachable!("source index points at a source"),
        }
    }

    /// State from the `STATE=` and `IC=` annotations (defaults 0) at `t = 0`.
    pub fn initial_state(&self) -> CircuitState {
        let memristor_states = self
            .memristors
            .iter()
            .map(|&c| match &self.components[c].element {
                Element::Memristor { initial_state, .. } => initial_state.unwrap_or(0),
                _ => unreachable!(),
            })
            .collect();
        let capacitor_charges = self
            .capacitors
            .iter()
            .map(|&c| match &self.components[c].element {
                Element::Capacitor { initial_charge, .. } => initial_charge.unwrap_or(0.0),
                _ => unreachable!(),
            })
            .collect();
        CircuitState {
            memristor_states,
            capacitor_charges,
            time: 0.0,
        }
    }

    pub fn check_state(&self, state: &CircuitState) -> Result<(), String> {
        if state.memristor_states.len() != self.memristors.len() {
            return Err(format!(
                "state lists {} memristors, netlist has {}",
                state.memristor_states.len(),
                self.memristors.len()
            ));
        }
        if state.capacitor_charges.len() != self.capacitors.len() {
            return Err(format!(
                "state lists {} capacitor charges, netlist has {}",
                state.capacitor_charges.len(),
                self.capacitors.len()
            ));
        }
        for (m, &s) in state.memristor_states.iter().enumerate() {
            let g = self.memristor_model(m).num_states();
            if s >= g {
                return Err(format!(
                    "memristor {} in state {s}, model has {g} states",
                    self.components[self.memristors[m]].name
                ));
            }
        }
        if let Some(q) = state.capacitor_charges.iter().find(|q| !q.is_finite()) {
            return Err(format!("non-finite capacitor charge {q}"));
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }

    /// Canonical source / memristor / capacitor series loop:
    /// `V n1 0`, `M n1 n2`, `C n2 0`.
    pub fn series_mc(
        model: MemristorModel,
        capacitance: f64,
        waveform: Waveform,
    ) -> Result<Netlist, NetlistError> {
        let mut b = NetlistBuilder::new();
        b.voltage_source("V1", "n1", GROUND, waveform);
        b.memristor("M1", "n1", "n2", model, None);
        b.capacitor("C1", "n2", GROUND, capacitance, None);
        b.build()
    }
}

impl fmt::Display for Netlist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.components {
            let (a, b) = (&self.nodes[c.pos], &self.nodes[c.neg]);
            write!(f, "{} {a} {b}", c.name)?;
            match &c.element {
                Element::VoltageSource(w) => match w {
                    Waveform::Constant(v) => write!(f, " DC {}", num(*v))?,
                    Waveform::Sine {
                        offset,
                        amplitude,
                        frequency,
                    } => write!(
                        f,
                        " SIN {} {} {}",
                        num(*offset),
                        num(*amplitude),
                        num(*frequency)
                    )?,
                    Waveform::Step {
                        initial,
                        final_value,
                        at,
                    } => write!(
                        f,
                        " STEP {} {} {}",
                        num(*initial),
                        num(*final_value),
                        num(*at)
                    )?,
                    Waveform::PiecewiseLinear(points) => {
                        write!(f, " PWL")?;
                        for (t, v) in points {
                            write!(f, " {} {}", num(*t), num(*v))?;
                        }
                    }
                },
                Element::Resistor(r) => write!(f, " {}", num(*r))?,
                Element::Capacitor {
                    capacitance,
                    initial_charge,
                } => {
                    write!(f, " {}", num(*capacitance))?;
                    if let Some(q) = initial_charge {
                        write!(f, " IC={}", num(*q))?;
                    }
                }
                Element::Memristor {
                    model,
                    initial_state,
                } => {
                    write!(
                        f,
                        " STATES={} R={} TAUUP={} VUP={} TAUDOWN={} VDOWN={}",
                        model.num_states(),
                        list(model.resistances()),
                        list(model.tau_up()),
                        list(model.v_up()),
                        list(model.tau_down()),
                        list(model.v_down()),
                    )?;
                    if let Some(s) = initial_state {
                        write!(f, " STATE={s}")?;
                    }
                }
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn list(xs: &[f64]) -> String {
    let mut s = String::new();
    for (k, x) in xs.iter().enumerate() {
        if k > 0 {
            s.push(',');
        }
        let _ = write!(s, "{}", num(*x));
    }
    s
}

/// Incremental construction with validation deferred to [`NetlistBuilder::build`].
#[derive(Debug, Default)]
pub struct NetlistBuilder {
    nodes: Vec<String>,
    node_index: HashMap<String, usize>,
    components: Vec<Component>,
}

impl NetlistBuilder {
    pub fn new() -> Self {
        let mut b = Self::default();
        b.node(GROUND);
        b
    }

    fn node(&mut self, name: &str) -> usize {
        if let Some(&i) = self.node_index.get(name) {
            return i;
        }
        let i = self.nodes.len();
        self.nodes.push(name.to_string());
        self.node_index.insert(name.to_string(), i);
        i
    }

    pub fn add(&mut self, name: &str, pos: &str, neg: &str, element: Element) -> &mut Self {
        let pos = self.node(pos);
        let neg = self.node(neg);
        self.components.push(Component {
            name: name.to_string(),
            pos,
            neg,
            element,
        });
        self
    }

    pub fn voltage_source(&mut self, name: &str, pos: &str, neg: &str, w: Waveform) -> &mut Self {
        self.add(name, pos, neg, Element::VoltageSource(w))
    }

    pub fn resistor(&mut self, name: &str, a: &str, b: &str, ohms: f64) -> &mut Self {
        self.add(name, a, b, Element::Resistor(ohms))
    }

    pub fn capacitor(
        &mut self,
        name: &str,
        a: &str,
        b: &str,
        farads: f64,
        initial_charge: Option<f64>,
    ) -> &mut Self {
        self.add(
            name,
            a,
            b,
            Element::Capacitor {
                capacitance: farads,
                initial_charge,
            },
        )
    }

    pub fn memristor(
        &mut self,
        name: &str,
        pos: &str,
        neg: &str,
        model: MemristorModel,
        initial_state: Option<usize>,
    ) -> &mut Self {
        self.add(
            name,
            pos,
            neg,
            Element::Memristor {
                model,
                initial_state,
            },
        )
    }

    pub fn build(&self) -> Result<Netlist, NetlistError> {
        if self.components.is_empty() {
            return Err(NetlistError::NoComponents);
        }
        let mut seen = HashMap::new();
        for c in &self.components {
            if seen.insert(c.name.to_ascii_uppercase(), ()).is_some() {
                return Err(NetlistError::DuplicateName(c.name.clone()));
            }
            validate_component(c)?;
        }

        let n = self.nodes.len();
        let mut uf = UnionFind::new(n);
        for c in &self.components {
            uf.union(c.pos, c.neg);
        }
        if !self.components.iter().any(|c| c.pos == 0 || c.neg == 0) {
            return Err(NetlistError::NoGround);
        }
        let root = uf.find(0);
        let floating: Vec<String> = (1..n)
            .filter(|&i| uf.find(i) != root)
            .map(|i| self.nodes[i].clone())
            .collect();
        if !floating.is_empty() {
            return Err(NetlistError::FloatingNodes(floating));
        }

        let pick = |f: fn(&Element) -> bool| -> Vec<usize> {
            self.components
                .iter()
                .enumerate()
                .filter(|(_, c)| f(&c.element))
                .map(|(i, _)| i)
                .collect()
        };
        let sources = pick(|e| matches!(e, Element::VoltageSource(_)));
        let capacitors = pick(|e| matches!(e, Element::Capacitor { .. }));
        let memristors = pick(|e| matches!(e, Element::Memristor { .. }));

        if sources.is_empty() {
            let all_ic = !capacitors.is_empty()
                && capacitors.iter().all(|&i| {
                    matches!(
                        self.components[i].element,
                        Element::Capacitor {
                            initial_charge: Some(_),
                            ..
                        }
                    )
                });
            if !all_ic {
                return Err(NetlistError::Undriven);
            }
        }

        Ok(Netlist {
            nodes: self.nodes.clone(),
            components: self.components.clone(),
            memristors,
            capacitors,
            sources,
        })
    }
}

fn validate_component(c: &Component) -> Result<(), NetlistError> {
    let invalid = |message: &str| NetlistError::InvalidComponent {
        name: c.name.clone(),
        message: message.to_string(),
    };
    if c.pos == c.neg {
        return Err(invalid("both terminals on the same node"));
    }
    match &c.element {
        Element::Resistor(r) if !(*r > 0.0 && r.is_finite()) => {
            Err(invalid("resistance must be positive"))
        }
        Element::Capacitor { capacitance, .. }
            if !(*capacitance > 0.0 && capacitance.is_finite()) =>
        {
            Err(invalid("capacitance must be positive"))
        }
        Element::Capacitor {
            initial_charge: Some(q),
            ..
        } if !q.is_finite() => Err(invalid("initial charge must be finite")),
        Element::Memristor {
            model,
            initial_state: Some(s),
        } if *s >= model.num_states() => Err(invalid("initial state exceeds number of states")),
        _ => Ok(()),
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        Self((0..n).collect())
    }

    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[rb] = ra;
        }
    }
}

// ---------------------------------------------------------------------------
// parser

struct Token<'a> {
    text: &'a str,
    column: usize,
}

struct LineCtx {
    line: usize,
}

impl LineCtx {
    fn err(&self, column: usize, message: impl Into<String>) -> NetlistError {
        NetlistError::Parse {
            line: self.line,
            column,
            message: message.into(),
        }
    }
}

fn tokenize(line: &str) -> Vec<Token<'_>> {
    let mut tokens = Vec::new();
    let mut start: Option<usize> = None;
    let mut column = 0;
    let mut start_col = 0;
    for (byte, ch) in line.char_indices() {
        column += 1;
        if ch.is_whitespace() {
            if let Some(s) = start.take() {
                tokens.push(Token {
                    text: &line[s..byte],
                    column: start_col,
                });
            }
        } else if start.is_none() {
            start = Some(byte);
            start_col = column;
        }
    }
    if let Some(s) = start {
        tokens.push(Token {
            text: &line[s..],
            column: start_col,
        });
    }
    tokens
}

/// Parses a number with an optional SI suffix (`1u`, `2.2k`, `3meg`, `1e-6`).
pub fn parse_value(text: &str) -> Result<f64, String> {
    let lower = text.to_ascii_lowercase();
    match lower.as_str() {
        "inf" | "+inf" | "infinity" => return Ok(f64::INFINITY),
        "-inf" | "-infinity" => return Ok(f64::NEG_INFINITY),
        _ => {}
    }
    let bytes = lower.as_bytes();
    let mut end = 0;
    if end < bytes.len() && (bytes[end] == b'+' || bytes[end] == b'-') {
        end += 1;
    }
    let mantissa_start = end;
    while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
        end += 1;
    }
    if end == mantissa_start {
        return Err(format!("non-numeric value \"{text}\""));
    }
    if end < bytes.len() && bytes[end] == b'e' {
        let mut k = end + 1;
        if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
            k += 1;
        }
        if k < bytes.len() && bytes[k].is_ascii_digit() {
            while k < bytes.len() && bytes[k].is_ascii_digit() {
                k += 1;
            }
            end = k;
        }
    }
    let base: f64 = lower[..end]
        .parse()
        .map_err(|_| format!("non-numeric value \"{text}\""))?;
    let scale = match &lower[end..] {
        "" => 1.0,
        "f" => 1e-15,
        "p" => 1e-12,
        "n" => 1e-9,
        "u" => 1e-6,
        "m" => 1e-3,
        "k" => 1e3,
        "meg" => 1e6,
        "g" => 1e9,
        "t" => 1e12,
        _ => return Err(format!("non-numeric value \"{text}\"")),
    };
    Ok(base * scale)
}

/// Parses the netlist text format described in the module docs.
pub fn parse_netlist(text: &str) -> Result<Netlist, NetlistError> {
    let mut builder = NetlistBuilder::new();
    let mut names: HashMap<String, usize> = HashMap::new();

    for (idx, raw) in text.lines().enumerate() {
        let ctx = LineCtx { line: idx + 1 };
        let content = match raw.find('#') {
            Some(p) => &raw[..p],
            None => raw,
        };
        let tokens = tokenize(content);
        if tokens.is_empty() {
            continue;
        }
        let name = tokens[0].text;
        let kind = name.chars().next().map(|c| c.to_ascii_uppercase());
        if kind == Some('L') {
            return Err(ctx.err(tokens[0].column, "inductors not supported"));
        }
        if !matches!(kind, Some('V' | 'R' | 'C' | 'M')) {
            return Err(ctx.err(
                tokens[0].column,
                format!("unknown component kind \"{name}\""),
            ));
        }
        if let Some(prev) = names.insert(name.to_ascii_uppercase(), ctx.line) {
            return Err(ctx.err(
                tokens[0].column,
                format!("duplicate component name {name} (first defined on line {prev})"),
            ));
        }
        if tokens.len() < 3 {
            let column = tokens.last().map_or(1, |t| t.column + t.text.len());
            return Err(ctx.err(column, "expected two node names"));
        }
        for t in &tokens[1..3] {
            if t.text.contains('=') {
                return Err(ctx.err(t.column, format!("invalid node name \"{}\"", t.text)));
            }
        }
        let (pos, neg) = (tokens[1].text, tokens[2].text);
        if pos == neg {
            return Err(ctx.err(tokens[2].column, "both terminals on the same node"));
        }
        let rest = &tokens[3..];
        let end_col = tokens
            .last()
            .map_or(1, |t| t.column + t.text.chars().count());
        let element = match kind {
            Some('V') => parse_source(&ctx, rest, end_col)?,
            Some('R') => {
                let [value] = rest else {
                    return Err(ctx.err(
                        rest.get(1).map_or(end_col, |t| t.column),
                        "resistor takes exactly one value",
                    ));
                };
                let r = number(&ctx, value)?;
                if !(r > 0.0 && r.is_finite()) {
                    return Err(ctx.err(value.column, "resistance must be positive"));
                }
                Element::Resistor(r)
            }
            Some('C') => parse_capacitor(&ctx, rest, end_col)?,
            Some('M') => parse_memristor(&ctx, rest, end_col)?,
            _ => unreachable!(),
        };
        builder.add(name, pos, neg, element);
    }
    builder.build()
}

fn number(ctx: &LineCtx, tok: &Token<'_>) -> Result<f64, NetlistError> {
    parse_value(tok.text).map_err(|m| ctx.err(tok.column, m))
}

fn parse_source(
    ctx: &LineCtx,
    rest: &[Token<'_>],
    end_col: usize,
) -> Result<Element, NetlistError> {
    let Some(kind) = rest.first() else {
        return Err(ctx.err(end_col, "voltage source needs DC, SIN, PWL or STEP"));
    };
    let args = &rest[1..];
    let values = args
        .iter()
        .map(|t| number(ctx, t))
        .collect::<Result<Vec<_>, _>>()?;
    let arity = |n: usize| -> Result<(), NetlistError> {
        if values.len() != n {
            let column = args.get(n).map_or(end_col, |t| t.column);
            Err(ctx.err(
                column,
                format!("{} takes {n} value(s), got {}", kind.text, values.len()),
            ))
        } else {
            Ok(())
        }
    };
    let wf = match kind.text.to_ascii_uppercase().as_str() {
        "DC" => {
            arity(1)?;
            Ok(Waveform::Constant(values[0]))
        }
        "SIN" => {
            arity(3)?;
            Waveform::sine(values[0], values[1], values[2])
        }
        "STEP" => {
            arity(3)?;
            Waveform::step(values[0], values[1], values[2])
        }
        "PWL" => {
            if values.is_empty() || values.len() % 2 != 0 {
                return Err(ctx.err(kind.column, "PWL takes time/value pairs"));
            }
            Waveform::pwl(values.chunks(2).map(|c| (c[0], c[1])).collect())
        }
        _ => {
            return Err(ctx.err(
                kind.column,
                format!("unknown source kind \"{}\"", kind.text),
            ))
        }
    };
    wf.map(Element::VoltageSource)
        .map_err(|e| ctx.err(kind.column, e.to_string()))
}

fn split_key<'a>(ctx: &LineCtx, tok: &Token<'a>) -> Result<(String, &'a str), NetlistError> {
    match tok.text.split_once('=') {
        Some((k, v)) if !k.is_empty() && !v.is_empty() => Ok((k.to_ascii_uppercase(), v)),
        _ => Err(ctx.err(
            tok.column,
            format!("expected KEY=VALUE, got \"{}\"", tok.text),
        )),
    }
}

fn parse_capacitor(
    ctx: &LineCtx,
    rest: &[Token<'_>],
    end_col: usize,
) -> Result<Element, NetlistError> {
    let Some(value) = rest.first() else {
        return Err(ctx.err(end_col, "capacitor needs a capacitance"));
    };
    let capacitance = number(ctx, value)?;
    if !(capacitance > 0.0 && capacitance.is_finite()) {
        return Err(ctx.err(value.column, "capacitance must be positive"));
    }
    let mut initial_charge = None;
    for tok in &rest[1..] {
        let (key, v) = split_key(ctx, tok)?;
        match key.as_str() {
            "IC" => {
                let q = parse_value(v).map_err(|m| ctx.err(tok.column, m))?;
                if !q.is_finite() {
                    return Err(ctx.err(tok.column, "initial charge must be finite"));
                }
                initial_charge = Some(q);
            }
            _ => return Err(ctx.err(tok.column, format!("unknown capacitor parameter {key}"))),
        }
    }
    Ok(Element::Capacitor {
        capacitance,
        initial_charge,
    })
}

fn parse_memristor(
    ctx: &LineCtx,
    rest: &[Token<'_>],
    end_col: usize,
) -> Result<Element, NetlistError> {
    let mut params: HashMap<String, (&str, usize)> = HashMap::new();
    for tok in rest {
        let (key, v) = split_key(ctx, tok)?;
        if !matches!(
            key.as_str(),
            "STATES" | "R" | "TAUUP" | "VUP" | "TAUDOWN" | "VDOWN" | "STATE"
        ) {
            return Err(ctx.err(tok.column, format!("unknown memristor parameter {key}")));
        }
        if params.insert(key.clone(), (v, tok.column)).is_some() {
            return Err(ctx.err(tok.column, format!("parameter {key} given twice")));
        }
    }
    let required = |key: &str| {
        params
            .get(key)
            .copied()
            .ok_or_else(|| ctx.err(end_col, format!("memristor missing {key}=")))
    };
    let (states_text, states_col) = required("STATES")?;
    let g: usize = states_text.parse().map_err(|_| {
        ctx.err(
            states_col,
            format!("STATES must be an integer, got \"{states_text}\""),
        )
    })?;
    if g < 2 {
        return Err(ctx.err(states_col, "STATES must be at least 2"));
    }
    let values = |key: &str, want: usize| -> Result<Vec<f64>, NetlistError> {
        let (text, col) = required(key)?;
        let vals = text
            .split(',')
            .map(|s| parse_value(s).map_err(|m| ctx.err(col, format!("{key}: {m}"))))
            .collect::<Result<Vec<_>, _>>()?;
        match vals.len() {
            n if n == want => Ok(vals),
            1 if key != "R" => Ok(vec![vals[0]; want]),
            n => Err(ctx.err(col, format!("{key} needs {want} value(s), got {n}"))),
        }
    };
    let resistances = values("R", g)?;
    let tau_up = values("TAUUP", g - 1)?;
    let v_up = values("VUP", g - 1)?;
    let tau_down = values("TAUDOWN", g - 1)?;
    let v_down = values("VDOWN", g - 1)?;
    let model = MemristorModel::new(resistances, tau_up, v_up, tau_down, v_down)
        .map_err(|e| ctx.err(rest.first().map_or(end_col, |t| t.column), e.to_string()))?;
    let initial_state = match params.get("STATE") {
        Some((text, col)) => {
            let s: usize = text
                .parse()
                .map_err(|_| ctx.err(*col, format!("STATE must be an integer, got \"{text}\"")))?;
            if s >= g {
                return Err(ctx.err(*col, format!("STATE={s} out of range for {g} states")));
            }
            Some(s)
        }
        None => None,
    };
    Ok(Element::Memristor {
        model,
        initial_state,
    })
}
