//! NOT, AND and OR as integer arithmetic on `{0, 1}`.
//!
//! Each connective has a direct evaluator and a compiled [`GateProgram`].
//! Constants enter programs as auxiliary registers prepared in `|1⟩`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::gates::{run_program, GateKind, GateProgram};
use crate::hilbert::MultiKet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(into = "i64")]
pub struct Bit(bool);

impl Bit {
    pub const ZERO: Bit = Bit(false);
    pub const ONE: Bit = Bit(true);
    pub const ALL: [Bit; 2] = [Bit::ZERO, Bit::ONE];

    pub fn new(value: i64) -> Result<Self> {
        match value {
            0 => Ok(Bit::ZERO),
            1 => Ok(Bit::ONE),
            v => Err(Error::NotABit(v)),
        }
    }

    pub fn value(self) -> i64 {
        self.0 as i64
    }
}

impl From<Bit> for i64 {
    fn from(b: Bit) -> i64 {
        b.value()
    }
}

impl TryFrom<i64> for Bit {
    type Error = Error;

    fn try_from(v: i64) -> Result<Self> {
        Bit::new(v)
    }
}

impl fmt::Display for Bit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

/// `1 − p`.
pub fn not_(p: Bit) -> Bit {
    Bit::new(1 - p.value()).expect("closed on bits")
}

/// `p · q`.
pub fn and_(p: Bit, q: Bit) -> Bit {
    Bit::new(p.value() * q.value()).expect("closed on bits")
}

/// `p + q − p · q`.
pub fn or_(p: Bit, q: Bit) -> Bit {
    let (p, q) = (p.value(), q.value());
    Bit::new(p + q - p * q).expect("closed on bits")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum LogicOp {
    Not,
    And,
    Or,
}

impl LogicOp {
    pub const ALL: [LogicOp; 3] = [LogicOp::Not, LogicOp::And, LogicOp::Or];

    pub fn arity(self) -> usize {
        match self {
            LogicOp::Not => 1,
            LogicOp::And | LogicOp::Or => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LogicOp::Not => "NOT",
            LogicOp::And => "AND",
            LogicOp::Or => "OR",
        }
    }

    /// Direct arithmetic evaluation from raw integers.
    pub fn eval(self, args: &[i64]) -> Result<Bit> {
        if args.len() != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                found: args.len(),
            });
        }
        let bits = args
            .iter()
            .map(|&v| Bit::new(v))
            .collect::<Result<Vec<_>>>()?;
        Ok(match self {
            LogicOp::Not => not_(bits[0]),
            LogicOp::And => and_(bits[0], bits[1]),
            LogicOp::Or => or_(bits[0], bits[1]),
        })
    }

    pub fn compile(self) -> LogicProgram {
        let mut program = GateProgram::new();
        match self {
            // [p, 1, 0]: out = 0 + 1, then out = 1 - p
            LogicOp::Not => {
                program
                    .push(GateKind::Plus, &[1, 2])
                    .push(GateKind::Minus, &[0, 2]);
                LogicProgram {
                    op: self,
                    program,
                    prepared: vec![1, 0],
                    output: 2,
                }
            }
            // [p, q, 0]: anc = pq
            LogicOp::And => {
                program.push(GateKind::TimesReversible, &[0, 1, 2]);
                LogicProgram {
                    op: self,
                    program,
                    prepared: vec![0],
                    output: 2,
                }
            }
            // [p, q, 0]: anc = pq, q = p + q, q = q - pq
            LogicOp::Or => {
                program
                    .push(GateKind::TimesReversible, &[0, 1, 2])
                    .push(GateKind::Plus, &[0, 1])
                    .push(GateKind::Minus, &[2, 1]);
                LogicProgram {
                    op: self,
                    program,
                    prepared: vec![0],
                    output: 1,
                }
            }
        }
    }

    /// Evaluation by running the compiled program on the simulator.
    pub fn eval_gates(self, args: &[i64]) -> Result<Bit> {
        self.compile().run(args)
    }
}

impl fmt::Display for LogicOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LogicOp {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "NOT" => Ok(LogicOp::Not),
            "AND" => Ok(LogicOp::And),
            "OR" => Ok(LogicOp::Or),
            _ => Err(Error::Parse(format!("unknown logic operation '{s}'"))),
        }
    }
}

/// A connective as a gate program: inputs occupy the first registers, then
/// the `prepared` auxiliary labels follow.
#[derive(Clone, Debug, PartialEq)]
pub struct LogicProgram {
    pub op: LogicOp,
    pub program: GateProgram,
    pub prepared: Vec<i64>,
    pub output: usize,
}

impl LogicProgram {
    pub fn initial_state(&self, args: &[i64]) -> Result<MultiKet> {
        if args.len() != self.op.arity() {
            return Err(Error::ArityMismatch {
                expected: self.op.arity(),
                found: args.len(),
            });
        }
        for &v in args {
            Bit::new(v)?;
        }
        let labels: Vec<i64> = args.iter().chain(&self.prepared).copied().collect();
        Ok(MultiKet::basis(&labels))
    }

    pub fn run(&self, args: &[i64]) -> Result<Bit> {
        let out = run_program(&self.program, &self.initial_state(args)?)?;
        Bit::new(out.basis_labels()?[self.output])
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TruthRow {
    pub inputs: Vec<Bit>,
    pub arithmetic: Bit,
    pub gates: Bit,
}

/// Rows in lexicographic input order, each evaluated both ways.
pub fn truth_table(op: LogicOp) -> Result<Vec<TruthRow>> {
    let inputs: Vec<Vec<Bit>> = match op.arity() {
        1 => Bit::ALL.iter().map(|&p| vec![p]).collect(),
        _ => Bit::ALL
            .iter()
            .flat_map(|&p| Bit::ALL.iter().map(move |&q| vec![p, q]))
            .collect(),
    };
    inputs
        .into_iter()
        .map(|inputs| {
            let raw: Vec<i64> = inputs.iter().map(|b| b.value()).collect();
            Ok(TruthRow {
                arithmetic: op.eval(&raw)?,
                gates: op.eval_gates(&raw)?,
                inputs,
            })
        })
        .collect()
}

/// Fixed-width table with columns `p`, `q` (binary ops only) and `result`.
pub fn format_truth_table(op: LogicOp, rows: &[TruthRow]) -> String {
    let mut out = String::new();
    if op.arity() == 1 {
        out.push_str(&format!("{:>3} {:>6}\n", "p", "result"));
    } else {
        out.push_str(&format!("{:>3} {:>3} {:>6}\n", "p", "q", "result"));
    }
    for row in rows {
        for b in &row.inputs {
            out.push_str(&format!("{:>3} ", b.value()));
        }
        out.push_str(&format!("{:>6}\n", row.arithmetic.value()));
    }
    out
}
