//! Threshold-circuit intermediate representation with symbolic depth
//! accounting.
//!
//! Gates compute single bits: inputs, constants, NOT, AND, OR, and strict
//! MAJORITY (true iff more than half of the fan-in bits are true). On top
//! of that sit *macro gates*: opaque multi-bit operations (exp, division,
//! square root, iterated product — and, above the gate-level precision cap,
//! the ordinary scalar ops too) that the depth model charges as single
//! stages. A macro op appears as a group of sibling single-bit gates, one
//! per output wire, all sharing the identical fan-in list; evaluation
//! decodes the operand bundles, runs the exact p-bit operation once per
//! group, and hands each sibling its bit.
//!
//! Depth is measured symbolically through *regions*: every non-input gate
//! belongs to a region carrying a [`DepthExpr`] charge (e.g. one scalar-add
//! stage is a region charged `d_std`, no matter how many gate levels its
//! adder needs). Regions must condense to a DAG — a path that leaves a
//! region and re-enters it has no consistent stage reading and is reported
//! as a violation. The measured depth of a region is its charge plus the
//! coefficientwise maximum over its predecessors' depths, which makes the
//! result the least symbolic upper bound over all region paths; it is exact
//! whenever parallel paths charge comparable expressions, which holds for
//! every construct this crate emits. Gate-level concrete depth (every gate
//! counts 1) and gate count are measured alongside.
//!
//! Structural rule: a gate's fan-ins always point to strictly smaller gate
//! ids, so storage order is a topological order.

pub mod depth;
pub mod netlist;

pub use depth::{DepthExpr, DEPTH_VARS};

use crate::encoding;
use crate::fp::{self, FpError, FpFlags, FpNum, Precision};
use std::collections::HashMap;
use std::fmt;
use thiserror::Error;

pub type GateId = u32;
pub type RegionId = u32;

pub const REGION_NONE: RegionId = u32::MAX;

/// Opaque multi-bit operations the depth model treats as single stages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MacroTag {
    Exp,
    Div,
    Sqrt,
    IterMul,
    /// Scalar ops lowered as macros above the gate-level precision cap.
    Add,
    Mul,
    Cmp,
    IterAdd,
}

impl MacroTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            MacroTag::Exp => "exp",
            MacroTag::Div => "div",
            MacroTag::Sqrt => "sqrt",
            MacroTag::IterMul => "iter_mul",
            MacroTag::Add => "add",
            MacroTag::Mul => "mul",
            MacroTag::Cmp => "cmp",
            MacroTag::IterAdd => "iter_add",
        }
    }

    pub fn parse(s: &str) -> Option<MacroTag> {
        Some(match s {
            "exp" => MacroTag::Exp,
            "div" => MacroTag::Div,
            "sqrt" => MacroTag::Sqrt,
            "iter_mul" => MacroTag::IterMul,
            "add" => MacroTag::Add,
            "mul" => MacroTag::Mul,
            "cmp" => MacroTag::Cmp,
            "iter_add" => MacroTag::IterAdd,
            _ => return None,
        })
    }

    /// Fixed operand count, or None for variadic (iterated) ops.
    pub fn operand_count(&self) -> Option<usize> {
        match self {
            MacroTag::Exp | MacroTag::Sqrt => Some(1),
            MacroTag::Div | MacroTag::Add | MacroTag::Mul | MacroTag::Cmp => Some(2),
            MacroTag::IterMul | MacroTag::IterAdd => None,
        }
    }

    /// Output wires: one encoded value, except compare which produces the
    /// two order bits [less, greater].
    pub fn output_width(&self, p: Precision) -> u32 {
        match self {
            MacroTag::Cmp => 2,
            _ => encoding::width(p) as u32,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Input,
    Const(bool),
    Not,
    And,
    Or,
    Majority,
    /// Bit `bit` of macro group `group`.
    MacroBit { group: u32, bit: u32 },
}

/// One macro operation: tag, flat fan-in (operands concatenated, each an
/// encoded value), and output width.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroGroup {
    pub tag: MacroTag,
    pub fanin: Vec<GateId>,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegionInfo {
    pub charge: DepthExpr,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Violation {
    ForwardFanin { gate: GateId, fanin: GateId },
    BadArity { gate: GateId, expected: String, got: usize },
    UnknownRegion { gate: GateId, region: RegionId },
    UnregionedGate { gate: GateId },
    RegionCycle { region: RegionId },
    BadMacroRef { gate: GateId },
    MacroFaninMismatch { gate: GateId },
    MacroWidth { group: u32, expected: u32, got: u32 },
    UnregisteredInput { gate: GateId },
    BadOutput { output: GateId },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::ForwardFanin { gate, fanin } => {
                write!(f, "gate {gate} reads from non-earlier gate {fanin}")
            }
            Violation::BadArity { gate, expected, got } => {
                write!(f, "gate {gate} has {got} fan-ins, expected {expected}")
            }
            Violation::UnknownRegion { gate, region } => {
                write!(f, "gate {gate} is marked with undefined region {region}")
            }
            Violation::UnregionedGate { gate } => {
                write!(f, "gate {gate} carries no depth region")
            }
            Violation::RegionCycle { region } => {
                write!(f, "region {region} sits on a cycle (re-entered stage)")
            }
            Violation::BadMacroRef { gate } => {
                write!(f, "gate {gate} references a macro group that does not exist")
            }
            Violation::MacroFaninMismatch { gate } => {
                write!(f, "gate {gate} disagrees with its macro group's fan-in")
            }
            Violation::MacroWidth { group, expected, got } => {
                write!(f, "macro group {group} has width {got}, expected {expected}")
            }
            Violation::UnregisteredInput { gate } => {
                write!(f, "input gate {gate} is not in the circuit's input list")
            }
            Violation::BadOutput { output } => {
                write!(f, "output {output} is not a gate")
            }
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("expected {expected} input bits, got {got}")]
    InputCount { expected: usize, got: usize },
    #[error("macro group {group} operand is not a valid encoded value: {source}")]
    Decode { group: u32, source: FpError },
    #[error("macro group {group} failed: {source}")]
    MacroOp { group: u32, source: FpError },
    #[error("circuit is not well-formed: {0} violations")]
    Invalid(usize),
}

/// Results of measuring a circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasureReport {
    /// Symbolic depth: least upper bound over region paths.
    pub depth: DepthExpr,
    /// Longest gate-level path, every non-input/const gate counting 1.
    pub concrete_depth: u64,
    /// Number of gates, inputs and constants excluded.
    pub size: u64,
}

/// The circuit arena. Gates live in one flat array in topological order.
#[derive(Debug, Clone)]
pub struct Circuit {
    p: Precision,
    kinds: Vec<GateKind>,
    fanin_off: Vec<u32>,
    fanin_dat: Vec<GateId>,
    region_of: Vec<RegionId>,
    pub regions: Vec<RegionInfo>,
    pub macro_groups: Vec<MacroGroup>,
    pub inputs: Vec<GateId>,
    pub outputs: Vec<GateId>,
    const_cache: [Option<GateId>; 2],
}

impl Circuit {
    pub fn new(p: Precision) -> Self {
        Circuit {
            p,
            kinds: Vec::new(),
            fanin_off: vec![0],
            fanin_dat: Vec::new(),
            region_of: Vec::new(),
            regions: Vec::new(),
            macro_groups: Vec::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            const_cache: [None, None],
        }
    }

    pub fn precision(&self) -> Precision {
        self.p
    }

    /// Wires per encoded value.
    pub fn value_width(&self) -> usize {
        encoding::width(self.p)
    }

    pub fn num_gates(&self) -> usize {
        self.kinds.len()
    }

    pub fn kind(&self, g: GateId) -> GateKind {
        self.kinds[g as usize]
    }

    pub fn fanins(&self, g: GateId) -> &[GateId] {
        let (a, b) = (self.fanin_off[g as usize], self.fanin_off[g as usize + 1]);
        &self.fanin_dat[a as usize..b as usize]
    }

    pub fn region(&self, g: GateId) -> Option<RegionId> {
        match self.region_of[g as usize] {
            REGION_NONE => None,
            r => Some(r),
        }
    }

    /// Declare a depth stage. Gates are attached at push time.
    pub fn add_region(&mut self, charge: DepthExpr, label: impl Into<String>) -> RegionId {
        self.regions.push(RegionInfo {
            charge,
            label: label.into(),
        });
        (self.regions.len() - 1) as RegionId
    }

    /// Append a gate. Fan-ins must already exist; logic gates must carry a
    /// region (inputs and constants must not).
    pub fn push(
        &mut self,
        kind: GateKind,
        fanins: &[GateId],
        region: Option<RegionId>,
    ) -> GateId {
        let id = self.kinds.len() as GateId;
        for &f in fanins {
            assert!(f < id, "gate {id} would read from non-earlier gate {f}");
        }
        match kind {
            GateKind::Input | GateKind::Const(_) => {
                assert!(fanins.is_empty(), "source gates take no fan-in");
                assert!(region.is_none(), "source gates carry no region");
            }
            _ => {
                let r = region.expect("logic gates must carry a region");
                assert!((r as usize) < self.regions.len(), "undefined region {r}");
            }
        }
        self.kinds.push(kind);
        self.fanin_dat.extend_from_slice(fanins);
        self.fanin_off.push(self.fanin_dat.len() as u32);
        self.region_of.push(region.unwrap_or(REGION_NONE));
        if let GateKind::Input = kind {
            self.inputs.push(id);
        }
        id
    }

    pub fn input(&mut self) -> GateId {
        self.push(GateKind::Input, &[], None)
    }

    /// One encoded value's worth of fresh input wires.
    pub fn input_bundle(&mut self) -> Vec<GateId> {
        (0..self.value_width()).map(|_| self.input()).collect()
    }

    /// Constant wire, deduplicated per circuit.
    pub fn constant(&mut self, b: bool) -> GateId {
        if let Some(id) = self.const_cache[b as usize] {
            return id;
        }
        let id = self.push(GateKind::Const(b), &[], None);
        self.const_cache[b as usize] = id.into();
        id
    }

    pub fn not(&mut self, x: GateId, r: RegionId) -> GateId {
        self.push(GateKind::Not, &[x], Some(r))
    }

    pub fn and(&mut self, xs: &[GateId], r: RegionId) -> GateId {
        self.push(GateKind::And, xs, Some(r))
    }

    pub fn or(&mut self, xs: &[GateId], r: RegionId) -> GateId {
        self.push(GateKind::Or, xs, Some(r))
    }

    pub fn maj(&mut self, xs: &[GateId], r: RegionId) -> GateId {
        self.push(GateKind::Majority, xs, Some(r))
    }

    /// Emit one macro operation: `operands` are encoded-value bundles (or,
    /// for variadic tags, any number of them). Returns the output wires,
    /// bit 0 first.
    pub fn macro_op(
        &mut self,
        tag: MacroTag,
        operands: &[&[GateId]],
        r: RegionId,
    ) -> Vec<GateId> {
        let w = self.value_width();
        if let Some(k) = tag.operand_count() {
            assert_eq!(operands.len(), k, "{} takes {k} operands", tag.as_str());
        } else {
            assert!(!operands.is_empty(), "{} needs at least one operand", tag.as_str());
        }
        let mut fanin = Vec::with_capacity(operands.len() * w);
        for op in operands {
            assert_eq!(op.len(), w, "operand bundle must be {w} wires");
            fanin.extend_from_slice(op);
        }
        let width = tag.output_width(self.p);
        let group = self.macro_groups.len() as u32;
        self.macro_groups.push(MacroGroup { tag, fanin: fanin.clone(), width });
        (0..width)
            .map(|bit| self.push(GateKind::MacroBit { group, bit }, &fanin, Some(r)))
            .collect()
    }

    pub fn mark_output(&mut self, g: GateId) {
        self.outputs.push(g);
    }

    pub fn mark_outputs(&mut self, gs: &[GateId]) {
        self.outputs.extend_from_slice(gs);
    }

    /// Structural well-formedness. Returns every violation found; an empty
    /// list means the circuit is safe to evaluate and measure.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let n = self.num_gates() as GateId;
        let mut inputs_seen: HashMap<GateId, usize> = HashMap::new();
        for (pos, &g) in self.inputs.iter().enumerate() {
            inputs_seen.insert(g, pos);
        }
        for g in 0..n {
            let fanins = self.fanins(g);
            for &f in fanins {
                if f >= g {
                    out.push(Violation::ForwardFanin { gate: g, fanin: f });
                }
            }
            if let Some(r) = self.region(g) {
                if r as usize >= self.regions.len() {
                    out.push(Violation::UnknownRegion { gate: g, region: r });
                }
            }
            match self.kind(g) {
                GateKind::Input => {
                    if !fanins.is_empty() {
                        out.push(Violation::BadArity {
                            gate: g,
                            expected: "0".into(),
                            got: fanins.len(),
                        });
                    }
                    if !inputs_seen.contains_key(&g) {
                        out.push(Violation::UnregisteredInput { gate: g });
                    }
                }
                GateKind::Const(_) => {
                    if !fanins.is_empty() {
                        out.push(Violation::BadArity {
                            gate: g,
                            expected: "0".into(),
                            got: fanins.len(),
                        });
                    }
                }
                GateKind::Not => {
                    if fanins.len() != 1 {
                        out.push(Violation::BadArity {
                            gate: g,
                            expected: "1".into(),
                            got: fanins.len(),
                        });
                    }
                }
                GateKind::And | GateKind::Or | GateKind::Majority => {
                    if fanins.is_empty() {
                        out.push(Violation::BadArity {
                            gate: g,
                            expected: "≥1".into(),
                            got: fanins.len(),
                        });
                    }
                }
                GateKind::MacroBit { group, bit } => {
                    match self.macro_groups.get(group as usize) {
                        None => out.push(Violation::BadMacroRef { gate: g }),
                        Some(mg) => {
                            if bit >= mg.width {
                                out.push(Violation::BadMacroRef { gate: g });
                            }
                            if fanins != mg.fanin.as_slice() {
                                out.push(Violation::MacroFaninMismatch { gate: g });
                            }
                        }
                    }
                }
            }
        }
        let w = self.value_width();
        for (gi, mg) in self.macro_groups.iter().enumerate() {
            let expected = mg.tag.output_width(self.p);
            if mg.width != expected {
                out.push(Violation::MacroWidth {
                    group: gi as u32,
                    expected,
                    got: mg.width,
                });
            }
            let ok_len = match mg.tag.operand_count() {
                Some(k) => mg.fanin.len() == k * w,
                None => mg.fanin.len() % w == 0 && !mg.fanin.is_empty(),
            };
            if !ok_len {
                out.push(Violation::BadArity {
                    gate: *self
                        .macro_gate_ids(gi as u32)
                        .first()
                        .unwrap_or(&u32::MAX),
                    expected: format!("{} whole operands", mg.tag.as_str()),
                    got: mg.fanin.len(),
                });
            }
        }
        for &o in &self.outputs {
            if o as usize >= self.num_gates() {
                out.push(Violation::BadOutput { output: o });
            }
        }
        out
    }

    fn macro_gate_ids(&self, group: u32) -> Vec<GateId> {
        (0..self.num_gates() as GateId)
            .filter(|&g| matches!(self.kind(g), GateKind::MacroBit { group: gr, .. } if gr == group))
            .collect()
    }

    /// Run the circuit. `input_bits` follow the registered input order; the
    /// result follows the output order. Macro groups evaluate their p-bit
    /// operation exactly once. Out-of-range macro results clamp exactly as
    /// the scalar ops do (the sticky flags are internal to the gate).
    pub fn evaluate(&self, input_bits: &[bool]) -> Result<Vec<bool>, EvalError> {
        if input_bits.len() != self.inputs.len() {
            return Err(EvalError::InputCount {
                expected: self.inputs.len(),
                got: input_bits.len(),
            });
        }
        let mut input_pos: HashMap<GateId, usize> = HashMap::new();
        for (i, &g) in self.inputs.iter().enumerate() {
            input_pos.insert(g, i);
        }
        let n = self.num_gates();
        let mut vals = vec![false; n];
        let mut group_out: Vec<Option<Vec<bool>>> = vec![None; self.macro_groups.len()];
        for g in 0..n as GateId {
            let v = match self.kind(g) {
                GateKind::Input => input_bits[input_pos[&g]],
                GateKind::Const(b) => b,
                GateKind::Not => !vals[self.fanins(g)[0] as usize],
                GateKind::And => self.fanins(g).iter().all(|&f| vals[f as usize]),
                GateKind::Or => self.fanins(g).iter().any(|&f| vals[f as usize]),
                GateKind::Majority => {
                    let fanins = self.fanins(g);
                    let ones = fanins.iter().filter(|&&f| vals[f as usize]).count();
                    ones >= (fanins.len() + 2) / 2
                }
                GateKind::MacroBit { group, bit } => {
                    if group_out[group as usize].is_none() {
                        let bits = self.eval_macro(group, &vals)?;
                        group_out[group as usize] = Some(bits);
                    }
                    group_out[group as usize].as_ref().unwrap()[bit as usize]
                }
            };
            vals[g as usize] = v;
        }
        Ok(self.outputs.iter().map(|&o| vals[o as usize]).collect())
    }

    fn eval_macro(&self, group: u32, vals: &[bool]) -> Result<Vec<bool>, EvalError> {
        let mg = &self.macro_groups[group as usize];
        let w = self.value_width();
        let operand_bits: Vec<bool> = mg.fanin.iter().map(|&f| vals[f as usize]).collect();
        let operands: Vec<FpNum> = operand_bits
            .chunks(w)
            .map(|c| encoding::decode(c, self.p))
            .collect::<Result<_, _>>()
            .map_err(|source| EvalError::Decode { group, source })?;
        let mut fl = FpFlags::new();
        let bits = match mg.tag {
            MacroTag::Exp => encoding::encode(&fp::fp_exp(&operands[0], &mut fl)),
            MacroTag::Sqrt => encoding::encode(
                &fp::fp_sqrt(&operands[0], &mut fl)
                    .map_err(|source| EvalError::MacroOp { group, source })?,
            ),
            MacroTag::Div => encoding::encode(
                &fp::fp_div(&operands[0], &operands[1], &mut fl)
                    .map_err(|source| EvalError::MacroOp { group, source })?,
            ),
            MacroTag::Add => encoding::encode(&fp::fp_add(&operands[0], &operands[1], &mut fl)),
            MacroTag::Mul => encoding::encode(&fp::fp_mul(&operands[0], &operands[1], &mut fl)),
            MacroTag::IterAdd => encoding::encode(&fp::iter_add(self.p, &operands, &mut fl)),
            MacroTag::IterMul => encoding::encode(&fp::iter_mul(self.p, &operands, &mut fl)),
            MacroTag::Cmp => {
                let ord = operands[0].compare(&operands[1]);
                vec![ord == std::cmp::Ordering::Less, ord == std::cmp::Ordering::Greater]
            }
        };
        Ok(bits)
    }

    /// Measure symbolic depth, concrete depth, and size. Fails with the
    /// full violation list if the circuit is structurally broken, contains
    /// unregioned logic gates, or its regions do not condense to a DAG.
    pub fn measure(&self) -> Result<MeasureReport, Vec<Violation>> {
        let mut violations = self.validate();
        let n = self.num_gates();
        for g in 0..n as GateId {
            match self.kind(g) {
                GateKind::Input | GateKind::Const(_) => {}
                _ => {
                    if self.region(g).is_none() {
                        violations.push(Violation::UnregionedGate { gate: g });
                    }
                }
            }
        }
        if !violations.is_empty() {
            return Err(violations);
        }

        // Region DAG edges from bit-level wires that cross regions.
        let nr = self.regions.len();
        let mut preds: Vec<Vec<u32>> = vec![Vec::new(); nr];
        for g in 0..n as GateId {
            let Some(r) = self.region(g) else { continue };
            for &f in self.fanins(g) {
                if let Some(rf) = self.region(f) {
                    if rf != r && !preds[r as usize].contains(&rf) {
                        preds[r as usize].push(rf);
                    }
                }
            }
        }
        let mut indeg = vec![0usize; nr];
        let mut succs: Vec<Vec<u32>> = vec![Vec::new(); nr];
        for (r, ps) in preds.iter().enumerate() {
            indeg[r] = ps.len();
            for &p in ps {
                succs[p as usize].push(r as u32);
            }
        }
        let mut queue: Vec<u32> = (0..nr as u32).filter(|&r| indeg[r as usize] == 0).collect();
        let mut topo = Vec::with_capacity(nr);
        while let Some(r) = queue.pop() {
            topo.push(r);
            for &s in &succs[r as usize] {
                indeg[s as usize] -= 1;
                if indeg[s as usize] == 0 {
                    queue.push(s);
                }
            }
        }
        if topo.len() != nr {
            for r in 0..nr as u32 {
                if indeg[r as usize] > 0 {
                    violations.push(Violation::RegionCycle { region: r });
                }
            }
            return Err(violations);
        }

        let mut region_depth = vec![DepthExpr::ZERO; nr];
        for &r in &topo {
            let mut d = DepthExpr::ZERO;
            for &p in &preds[r as usize] {
                d = d.max(&region_depth[p as usize]);
            }
            region_depth[r as usize] = d.add(&self.regions[r as usize].charge);
        }
        let mut depth = DepthExpr::ZERO;
        for &o in &self.outputs {
            if let Some(r) = self.region(o) {
                depth = depth.max(&region_depth[r as usize]);
            }
        }

        let mut level = vec![0u64; n];
        let mut size = 0u64;
        for g in 0..n as GateId {
            let cost = match self.kind(g) {
                GateKind::Input | GateKind::Const(_) => 0,
                _ => {
                    size += 1;
                    1
                }
            };
            let base = self
                .fanins(g)
                .iter()
                .map(|&f| level[f as usize])
                .max()
                .unwrap_or(0);
            level[g as usize] = base + cost;
        }
        let concrete_depth = self.outputs.iter().map(|&o| level[o as usize]).max().unwrap_or(0);

        Ok(MeasureReport {
            depth,
            concrete_depth,
            size,
        })
    }
}
