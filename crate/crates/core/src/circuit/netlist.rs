//! Line-based text form of a circuit. Lossless: print → parse → print is
//! the identity.
//!
//! ```text
//! HOPCIRC v1 width=8 p=3
//! region 0 d_std scalar products
//! region 1 d_oplus row sum
//! 0 input
//! 1 input
//! 2 const0
//! 3 and 0 1 r0
//! 4 macro:exp:g0:b0 0 1 2 3 4 5 6 7 r1
//! inputs 0 1
//! outputs 3
//! ```
//!
//! Gate lines appear in id order: `<id> <kind> <fanins…> [r<region>]`.
//! Macro-bit kinds spell out their tag, group, and bit; every sibling of a
//! group repeats the group's full fan-in, so the file needs no separate
//! group table.

use super::{Circuit, GateKind, MacroGroup, MacroTag, RegionInfo, Violation, REGION_NONE};
use crate::encoding;
use crate::fp::Precision;
use std::fmt::Write as _;
use thiserror::Error;

pub const NETLIST_MAGIC: &str = "HOPCIRC v1";

#[derive(Debug, Error)]
pub enum NetlistError {
    #[error("missing or malformed header (expected `{NETLIST_MAGIC} width=N p=P`)")]
    BadHeader,
    #[error("line {line}: {msg}")]
    BadLine { line: usize, msg: String },
    #[error("gates must appear in id order without gaps (line {line})")]
    GateOrder { line: usize },
}

fn kind_token(c: &Circuit, g: u32) -> String {
    match c.kind(g) {
        GateKind::Input => "input".into(),
        GateKind::Const(false) => "const0".into(),
        GateKind::Const(true) => "const1".into(),
        GateKind::Not => "not".into(),
        GateKind::And => "and".into(),
        GateKind::Or => "or".into(),
        GateKind::Majority => "maj".into(),
        GateKind::MacroBit { group, bit } => {
            let tag = c.macro_groups[group as usize].tag.as_str();
            format!("macro:{tag}:g{group}:b{bit}")
        }
    }
}

impl Circuit {
    pub fn to_netlist(&self) -> String {
        let mut s = String::new();
        writeln!(
            s,
            "{NETLIST_MAGIC} width={} p={}",
            self.value_width(),
            self.precision()
        )
        .unwrap();
        for (i, r) in self.regions.iter().enumerate() {
            if r.label.is_empty() {
                writeln!(s, "region {i} {}", r.charge).unwrap();
            } else {
                writeln!(s, "region {i} {} {}", r.charge, r.label).unwrap();
            }
        }
        for g in 0..self.num_gates() as u32 {
            write!(s, "{g} {}", kind_token(self, g)).unwrap();
            for f in self.fanins(g) {
                write!(s, " {f}").unwrap();
            }
            if let Some(r) = self.region(g) {
                write!(s, " r{r}").unwrap();
            }
            writeln!(s).unwrap();
        }
        write!(s, "inputs").unwrap();
        for i in &self.inputs {
            write!(s, " {i}").unwrap();
        }
        writeln!(s).unwrap();
        write!(s, "outputs").unwrap();
        for o in &self.outputs {
            write!(s, " {o}").unwrap();
        }
        writeln!(s).unwrap();
        s
    }

    /// Parse a netlist. Only structural line-format errors are reported
    /// here; semantic well-formedness is the job of [`Circuit::validate`],
    /// which callers should run on anything they did not emit themselves.
    pub fn from_netlist(text: &str) -> Result<Circuit, NetlistError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(NetlistError::BadHeader)?;
        let header_fields: Vec<&str> = header.split_whitespace().collect();
        if header_fields.len() != 4
            || header_fields[0] != "HOPCIRC"
            || header_fields[1] != "v1"
        {
            return Err(NetlistError::BadHeader);
        }
        let width: usize = header_fields[2]
            .strip_prefix("width=")
            .and_then(|v| v.parse().ok())
            .ok_or(NetlistError::BadHeader)?;
        let p: Precision = header_fields[3]
            .strip_prefix("p=")
            .and_then(|v| v.parse().ok())
            .ok_or(NetlistError::BadHeader)?;
        if width != encoding::width(p) {
            return Err(NetlistError::BadHeader);
        }

        let mut c = Circuit::new(p);
        let mut next_gate: u32 = 0;
        let mut saw_inputs_line = false;
        let mut parsed_inputs: Vec<u32> = Vec::new();
        let bad = |line: usize, msg: &str| NetlistError::BadLine {
            line: line + 1,
            msg: msg.to_string(),
        };

        for (line_no, line) in lines {
            let mut fields = line.split_whitespace();
            let head = fields.next().unwrap();
            match head {
                "region" => {
                    let id: usize = fields
                        .next()
                        .and_then(|v| v.parse().ok())
                        .ok_or_else(|| bad(line_no, "region needs an id"))?;
                    if id != c.regions.len() {
                        return Err(bad(line_no, "regions must appear in id order"));
                    }
                    let charge_tok = fields
                        .next()
                        .ok_or_else(|| bad(line_no, "region needs a charge"))?;
                    let charge = charge_tok
                        .parse()
                        .map_err(|e| bad(line_no, &format!("{e}")))?;
                    let label = fields.collect::<Vec<_>>().join(" ");
                    c.regions.push(RegionInfo { charge, label });
                }
                "inputs" => {
                    saw_inputs_line = true;
                    for tok in fields {
                        parsed_inputs.push(
                            tok.parse()
                                .map_err(|_| bad(line_no, "bad input id"))?,
                        );
                    }
                }
                "outputs" => {
                    for tok in fields {
                        let o = tok
                            .parse()
                            .map_err(|_| bad(line_no, "bad output id"))?;
                        c.outputs.push(o);
                    }
                }
                id_tok => {
                    let id: u32 = id_tok
                        .parse()
                        .map_err(|_| bad(line_no, "expected a gate id"))?;
                    if id != next_gate {
                        return Err(NetlistError::GateOrder { line: line_no + 1 });
                    }
                    next_gate += 1;
                    let kind_tok = fields
                        .next()
                        .ok_or_else(|| bad(line_no, "gate needs a kind"))?;
                    let rest: Vec<&str> = fields.collect();
                    let (region, fanin_toks) = match rest.last() {
                        Some(last) if last.starts_with('r') => {
                            let r: u32 = last[1..]
                                .parse()
                                .map_err(|_| bad(line_no, "bad region tag"))?;
                            (r, &rest[..rest.len() - 1])
                        }
                        _ => (REGION_NONE, rest.as_slice()),
                    };
                    let mut fanins = Vec::with_capacity(fanin_toks.len());
                    for tok in fanin_toks {
                        fanins.push(
                            tok.parse::<u32>()
                                .map_err(|_| bad(line_no, "bad fan-in id"))?,
                        );
                    }
                    let kind = parse_kind(kind_tok)
                        .ok_or_else(|| bad(line_no, &format!("unknown gate kind {kind_tok:?}")))?;
                    if let GateKind::MacroBit { group, bit } = kind {
                        let tag = macro_tag_of(kind_tok).unwrap();
                        match c.macro_groups.get(group as usize) {
                            None => {
                                if group as usize != c.macro_groups.len() {
                                    return Err(bad(line_no, "macro groups must appear in order"));
                                }
                                c.macro_groups.push(MacroGroup {
                                    tag,
                                    fanin: fanins.clone(),
                                    width: tag.output_width(p),
                                });
                            }
                            Some(mg) => {
                                if mg.tag != tag {
                                    return Err(bad(line_no, "macro tag disagrees with its group"));
                                }
                            }
                        }
                        let _ = bit;
                    }
                    if matches!(kind, GateKind::Const(b) if c.const_cache[b as usize].is_none()) {
                        if let GateKind::Const(b) = kind {
                            c.const_cache[b as usize] = Some(id);
                        }
                    }
                    c.kinds.push(kind);
                    c.fanin_dat.extend_from_slice(&fanins);
                    c.fanin_off.push(c.fanin_dat.len() as u32);
                    c.region_of.push(region);
                    if matches!(kind, GateKind::Input) {
                        c.inputs.push(id);
                    }
                }
            }
        }
        if saw_inputs_line {
            c.inputs = parsed_inputs;
        }
        Ok(c)
    }

    /// Parse and insist on well-formedness, for loading files of unknown
    /// provenance.
    pub fn from_netlist_validated(text: &str) -> Result<Circuit, NetlistLoadError> {
        let c = Circuit::from_netlist(text)?;
        let violations = c.validate();
        if !violations.is_empty() {
            return Err(NetlistLoadError::Invalid(violations));
        }
        Ok(c)
    }
}

#[derive(Debug, Error)]
pub enum NetlistLoadError {
    #[error(transparent)]
    Parse(#[from] NetlistError),
    #[error("netlist is not well-formed: {}", format_violations(.0))]
    Invalid(Vec<Violation>),
}

fn format_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn parse_kind(tok: &str) -> Option<GateKind> {
    Some(match tok {
        "input" => GateKind::Input,
        "const0" => GateKind::Const(false),
        "const1" => GateKind::Const(true),
        "not" => GateKind::Not,
        "and" => GateKind::And,
        "or" => GateKind::Or,
        "maj" => GateKind::Majority,
        _ => {
            let mut parts = tok.split(':');
            if parts.next()? != "macro" {
                return None;
            }
            let _tag = MacroTag::parse(parts.next()?)?;
            let group: u32 = parts.next()?.strip_prefix('g')?.parse().ok()?;
            let bit: u32 = parts.next()?.strip_prefix('b')?.parse().ok()?;
            if parts.next().is_some() {
                return None;
            }
            GateKind::MacroBit { group, bit }
        }
    })
}

fn macro_tag_of(tok: &str) -> Option<MacroTag> {
    MacroTag::parse(tok.split(':').nth(1)?)
}
