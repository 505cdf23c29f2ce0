//! Composed operations over the free variable `M0`, addition `P` (`M1`) and
//! multiplication `T` (`M2`).
//!
//! Terms are sorted into classes: class 0 holds `M0`, `P(M0,M0)` and
//! `T(M0,M0)`; any other node has class `1 + max` over its non-free children.
//! Every term gets a global index: classes are laid out one after another and
//! each class is ordered by `(operator, index of left, index of right)`. Class
//! 1 then lists `M3 = P(M0,P(M0,M0))` through `M18 = T(T(M0,M0),T(M0,M0))`.
//!
//! Two independent routes compute positions: [`enumerate_class`] builds
//! classes by nested iteration over lower classes, while [`index_of`] and
//! [`term_of`] rank and unrank arithmetically from class sizes alone.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::gates::{run_program, GateKind, GateProgram};
use crate::hilbert::MultiKet;

/// Global index of a term.
pub type Index = u128;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Op {
    Plus,
    Times,
}

impl Op {
    fn symbol(self) -> char {
        match self {
            Op::Plus => 'P',
            Op::Times => 'T',
        }
    }

    fn rank(self) -> u128 {
        match self {
            Op::Plus => 0,
            Op::Times => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum OpTerm {
    Free,
    Node(Op, Arc<OpTerm>, Arc<OpTerm>),
}

impl OpTerm {
    pub fn node(op: Op, left: OpTerm, right: OpTerm) -> Self {
        OpTerm::Node(op, Arc::new(left), Arc::new(right))
    }

    pub fn plus(left: OpTerm, right: OpTerm) -> Self {
        Self::node(Op::Plus, left, right)
    }

    pub fn times(left: OpTerm, right: OpTerm) -> Self {
        Self::node(Op::Times, left, right)
    }

    /// `P(M0,M0)`, i.e. `M1`.
    pub fn m1() -> Self {
        Self::plus(OpTerm::Free, OpTerm::Free)
    }

    /// `T(M0,M0)`, i.e. `M2`.
    pub fn m2() -> Self {
        Self::times(OpTerm::Free, OpTerm::Free)
    }

    pub fn is_free(&self) -> bool {
        matches!(self, OpTerm::Free)
    }

    /// Number of free-variable leaves.
    pub fn arity(&self) -> usize {
        match self {
            OpTerm::Free => 1,
            OpTerm::Node(_, l, r) => l.arity() + r.arity(),
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            OpTerm::Free => 0,
            OpTerm::Node(_, l, r) => 1 + l.node_count() + r.node_count(),
        }
    }

    /// Infix rendering with variables named in leaf order; multiplication is
    /// juxtaposition, e.g. `(n+m)+(kl)`.
    pub fn infix(&self) -> String {
        let names = variable_names(self.arity());
        let sep = if names.iter().any(|n| n.len() > 1) {
            "·"
        } else {
            ""
        };
        let mut next = 0;
        let mut out = String::new();
        self.write_infix(&names, sep, &mut next, true, &mut out);
        out
    }

    fn write_infix(
        &self,
        names: &[String],
        sep: &str,
        next: &mut usize,
        top: bool,
        out: &mut String,
    ) {
        match self {
            OpTerm::Free => {
                out.push_str(&names[*next]);
                *next += 1;
            }
            OpTerm::Node(op, l, r) => {
                if !top {
                    out.push('(');
                }
                l.write_infix(names, sep, next, false, out);
                out.push_str(match op {
                    Op::Plus => "+",
                    Op::Times => sep,
                });
                r.write_infix(names, sep, next, false, out);
                if !top {
                    out.push(')');
                }
            }
        }
    }
}

fn variable_names(count: usize) -> Vec<String> {
    const LETTERS: [&str; 16] = [
        "n", "m", "k", "l", "p", "q", "r", "s", "u", "v", "w", "x", "y", "z", "a", "b",
    ];
    if count <= LETTERS.len() {
        LETTERS[..count].iter().map(|s| s.to_string()).collect()
    } else {
        (1..=count).map(|i| format!("x{i}")).collect()
    }
}

impl fmt::Display for OpTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OpTerm::Free => f.write_str("M0"),
            OpTerm::Node(op, l, r) => write!(f, "{}({l},{r})", op.symbol()),
        }
    }
}

impl Serialize for OpTerm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl FromStr for OpTerm {
    type Err = Error;

    /// Accepts `M0`, `P(a,b)`, `T(a,b)` and the shorthands `M1`, `M2`.
    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser {
            src: s.as_bytes(),
            pos: 0,
        };
        let t = p.term()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.error("trailing input"));
        }
        Ok(t)
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
}

impl Parser<'_> {
    fn error(&self, what: &str) -> Error {
        Error::Parse(format!("{what} at offset {} in term", self.pos))
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn expect(&mut self, c: u8) -> Result<()> {
        self.skip_ws();
        if self.src.get(self.pos) == Some(&c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(&format!("expected '{}'", c as char)))
        }
    }

    fn term(&mut self) -> Result<OpTerm> {
        self.skip_ws();
        match self.src.get(self.pos) {
            Some(b'M') => {
                self.pos += 1;
                let t = match self.src.get(self.pos) {
                    Some(b'0') => OpTerm::Free,
                    Some(b'1') => OpTerm::m1(),
                    Some(b'2') => OpTerm::m2(),
                    _ => return Err(self.error("expected M0, M1 or M2")),
                };
                self.pos += 1;
                if self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                    return Err(self.error("only M0, M1 and M2 are elementary"));
                }
                Ok(t)
            }
            Some(&c @ (b'P' | b'T')) => {
                self.pos += 1;
                self.expect(b'(')?;
                let l = self.term()?;
                self.expect(b',')?;
                let r = self.term()?;
                self.expect(b')')?;
                let op = if c == b'P' { Op::Plus } else { Op::Times };
                Ok(OpTerm::node(op, l, r))
            }
            _ => Err(self.error("expected a term")),
        }
    }
}

/// Class of a term: 0 for `M0` and for a node over two free variables,
/// otherwise one more than the largest class among its non-free children.
pub fn class_of(term: &OpTerm) -> usize {
    match term {
        OpTerm::Free => 0,
        OpTerm::Node(_, l, r) => {
            if l.is_free() && r.is_free() {
                0
            } else {
                let cl = if l.is_free() { 0 } else { class_of(l) };
                let cr = if r.is_free() { 0 } else { class_of(r) };
                1 + cl.max(cr)
            }
        }
    }
}

/// Number of terms in class `k`, or `None` if it does not fit an [`Index`].
pub fn class_size(k: usize) -> Option<Index> {
    let (below, floor) = class_bounds(k)?;
    if k == 0 {
        return Some(3);
    }
    let span = below
        .checked_mul(below)?
        .checked_sub(floor.checked_mul(floor)?)?;
    span.checked_mul(2)
}

/// Global index of the first class-`k` term.
pub fn class_offset(k: usize) -> Option<Index> {
    (0..k).try_fold(0u128, |acc, j| acc.checked_add(class_size(j)?))
}

/// For class `k ≥ 1`: number of terms below class `k` (all usable children)
/// and the length of the prefix of those whose pairs fall below class `k`.
fn class_bounds(k: usize) -> Option<(Index, Index)> {
    match k {
        0 => Some((0, 0)),
        1 => Some((3, 1)),
        _ => Some((class_offset(k)?, class_offset(k - 1)?)),
    }
}

fn offsets_for(k: usize) -> Result<(Index, Index, Index, Index)> {
    let overflow = || Error::IndexOverflow { class: k };
    let offset = class_offset(k).ok_or_else(overflow)?;
    let size = class_size(k).ok_or_else(overflow)?;
    let (below, floor) = class_bounds(k).ok_or_else(overflow)?;
    Ok((offset, size, below, floor))
}

/// Rank of a term in the global order.
pub fn index_of(term: &OpTerm) -> Result<Index> {
    let k = class_of(term);
    let OpTerm::Node(op, l, r) = term else {
        return Ok(0);
    };
    if k == 0 {
        return Ok(1 + op.rank());
    }
    let (offset, size, below, floor) = offsets_for(k)?;
    let a = index_of(l)?;
    let b = index_of(r)?;
    let rows_before = if a < floor {
        a * (below - floor)
    } else {
        floor * (below - floor) + (a - floor) * below
    };
    let within = if a < floor { b - floor } else { b };
    Ok(offset + op.rank() * (size / 2) + rows_before + within)
}

/// Top operator and child indices of a class-`k ≥ 1` index.
fn decompose_in_class(k: usize, local: Index) -> Result<(Op, Index, Index)> {
    let (_, size, below, floor) = offsets_for(k)?;
    let per_op = size / 2;
    let op = if local < per_op { Op::Plus } else { Op::Times };
    let rest = local % per_op;
    let narrow = floor * (below - floor);
    let (a, b) = if rest < narrow {
        let w = below - floor;
        (rest / w, floor + rest % w)
    } else {
        let rest = rest - narrow;
        (floor + rest / below, rest % below)
    };
    Ok((op, a, b))
}

/// Class containing a given index.
pub fn class_of_index(delta: Index) -> Result<usize> {
    let mut k = 0;
    loop {
        let end = class_offset(k + 1).ok_or(Error::IndexOverflow { class: k + 1 })?;
        if delta < end {
            return Ok(k);
        }
        k += 1;
    }
}

/// Splits an index `δ` into `(operator, index of left, index of right)`.
/// Returns `None` for `M0`.
pub fn decompose(delta: Index) -> Result<Option<(Op, Index, Index)>> {
    match delta {
        0 => Ok(None),
        1 => Ok(Some((Op::Plus, 0, 0))),
        2 => Ok(Some((Op::Times, 0, 0))),
        _ => {
            let k = class_of_index(delta)?;
            let offset = class_offset(k).ok_or(Error::IndexOverflow { class: k })?;
            decompose_in_class(k, delta - offset).map(Some)
        }
    }
}

/// Inverse of [`index_of`].
pub fn term_of(delta: Index) -> Result<OpTerm> {
    Ok(match decompose(delta)? {
        None => OpTerm::Free,
        Some((op, a, b)) => OpTerm::node(op, term_of(a)?, term_of(b)?),
    })
}

/// A term with its class and global index.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IndexedOp {
    pub term: OpTerm,
    pub klass: usize,
    pub delta: Index,
}

/// Terms of classes `0..=k`, built by nested iteration: class `j ≥ 1` takes
/// every operator, then every left child, then every right child, skipping
/// pairs that belong to a lower class.
fn build_classes(k: usize) -> Vec<Vec<OpTerm>> {
    let mut classes: Vec<Vec<OpTerm>> = vec![vec![OpTerm::Free, OpTerm::m1(), OpTerm::m2()]];
    for j in 1..=k {
        let lower: Vec<&OpTerm> = classes.iter().flatten().collect();
        // positions whose pairs alone would sit below class j
        let low = if j == 1 {
            1
        } else {
            classes[..j - 1].iter().map(Vec::len).sum()
        };
        let mut this = Vec::new();
        for op in [Op::Plus, Op::Times] {
            for (a, l) in lower.iter().enumerate() {
                for (b, r) in lower.iter().enumerate() {
                    if a < low && b < low {
                        continue;
                    }
                    this.push(OpTerm::Node(
                        op,
                        Arc::new((*l).clone()),
                        Arc::new((*r).clone()),
                    ));
                }
            }
        }
        classes.push(this);
    }
    classes
}

/// Class-`k` terms in canonical order, truncated to `limit`.
pub fn enumerate_class(k: usize, limit: usize) -> Vec<IndexedOp> {
    if k == 0 {
        return build_classes(0)
            .remove(0)
            .into_iter()
            .take(limit)
            .enumerate()
            .map(|(i, term)| IndexedOp {
                term,
                klass: 0,
                delta: i as Index,
            })
            .collect();
    }
    let classes = build_classes(k - 1);
    let low = if k == 1 {
        1
    } else {
        classes[..k - 1].iter().map(Vec::len).sum()
    };
    let lower: Vec<OpTerm> = classes.into_iter().flatten().collect();
    let offset = lower.len() as Index;
    let mut out = Vec::new();
    'outer: for op in [Op::Plus, Op::Times] {
        for (a, l) in lower.iter().enumerate() {
            for (b, r) in lower.iter().enumerate() {
                if a < low && b < low {
                    continue;
                }
                if out.len() >= limit {
                    break 'outer;
                }
                let term = OpTerm::node(op, l.clone(), r.clone());
                out.push(IndexedOp {
                    term,
                    klass: k,
                    delta: offset + out.len() as Index,
                });
            }
        }
    }
    out
}

/// Every term of class at most `max_class`, in global order.
pub fn enumerate_up_to(max_class: usize) -> Vec<OpTerm> {
    build_classes(max_class).into_iter().flatten().collect()
}

/// Exact evaluation with big integers. Leaves bind `args` left to right.
pub fn evaluate_oracle(term: &OpTerm, args: &[i64]) -> Result<BigInt> {
    if args.len() != term.arity() {
        return Err(Error::ArityMismatch {
            expected: term.arity(),
            found: args.len(),
        });
    }
    fn go(t: &OpTerm, args: &[i64], next: &mut usize) -> BigInt {
        match t {
            OpTerm::Free => {
                let v = BigInt::from(args[*next]);
                *next += 1;
                v
            }
            OpTerm::Node(op, l, r) => {
                let a = go(l, args, next);
                let b = go(r, args, next);
                match op {
                    Op::Plus => a + b,
                    Op::Times => a * b,
                }
            }
        }
    }
    Ok(go(term, args, &mut 0))
}

/// A term compiled to gates: arguments occupy registers `0..arity`, each
/// multiplication gets a fresh `|0⟩` ancilla, and the result ends up in
/// `output`.
#[derive(Clone, Debug, PartialEq)]
pub struct CompiledTerm {
    pub program: GateProgram,
    pub registers: usize,
    pub output: usize,
    pub arity: usize,
}

impl CompiledTerm {
    pub fn initial_state(&self, args: &[i64]) -> Result<MultiKet> {
        if args.len() != self.arity {
            return Err(Error::ArityMismatch {
                expected: self.arity,
                found: args.len(),
            });
        }
        let mut labels = args.to_vec();
        labels.resize(self.registers, 0);
        Ok(MultiKet::basis(&labels))
    }

    /// Runs the program on the basis state of `args` and reads the output label.
    pub fn run(&self, args: &[i64]) -> Result<i64> {
        let out = run_program(&self.program, &self.initial_state(args)?)?;
        Ok(out.basis_labels()?[self.output])
    }
}

/// Post-order compilation. Addition `PLUS [l, r]` overwrites the right
/// operand's register with the sum; multiplication writes into an ancilla
/// with `TIMES_REVERSIBLE [l, r, anc]`.
pub fn compile(term: &OpTerm) -> CompiledTerm {
    let arity = term.arity();
    let mut program = GateProgram::new();
    let mut next_leaf = 0;
    let mut next_ancilla = arity;
    fn go(t: &OpTerm, p: &mut GateProgram, leaf: &mut usize, anc: &mut usize) -> usize {
        match t {
            OpTerm::Free => {
                *leaf += 1;
                *leaf - 1
            }
            OpTerm::Node(op, l, r) => {
                let a = go(l, p, leaf, anc);
                let b = go(r, p, leaf, anc);
                match op {
                    Op::Plus => {
                        p.push(GateKind::Plus, &[a, b]);
                        b
                    }
                    Op::Times => {
                        let c = *anc;
                        *anc += 1;
                        p.push(GateKind::TimesReversible, &[a, b, c]);
                        c
                    }
                }
            }
        }
    }
    let output = go(term, &mut program, &mut next_leaf, &mut next_ancilla);
    CompiledTerm {
        program,
        registers: next_ancilla,
        output,
        arity,
    }
}

fn ser_bigint<S: Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v.to_i64() {
        Some(x) => s.serialize_i64(x),
        None => s.collect_str(v),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalReport {
    pub term: OpTerm,
    pub args: Vec<i64>,
    pub gate_result: i64,
    #[serde(serialize_with = "ser_bigint")]
    pub oracle_result: BigInt,
    pub agree: bool,
}

/// Evaluates `term` on the gate simulator and against the exact oracle.
pub fn evaluate_gates(term: &OpTerm, args: &[i64]) -> Result<EvalReport> {
    evaluate_compiled(term, &compile(term), args)
}

pub fn evaluate_compiled(
    term: &OpTerm,
    compiled: &CompiledTerm,
    args: &[i64],
) -> Result<EvalReport> {
    let oracle_result = evaluate_oracle(term, args)?;
    let gate_result = compiled.run(args)?;
    Ok(EvalReport {
        term: term.clone(),
        args: args.to_vec(),
        gate_result,
        agree: BigInt::from(gate_result) == oracle_result,
        oracle_result,
    })
}

/// A round-trip or uniqueness violation.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Falsification {
    pub term: String,
    pub index: Option<Index>,
    pub partner: Option<String>,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BijectionReport {
    pub max_class: usize,
    pub counts_per_class: BTreeMap<usize, u64>,
    pub total: u64,
    pub collisions: u64,
    pub falsifications: Vec<Falsification>,
}

impl BijectionReport {
    pub fn ok(&self) -> bool {
        self.collisions == 0 && self.falsifications.is_empty()
    }
}

/// Largest class [`bijection_report`] will enumerate exhaustively.
pub const MAX_REPORT_CLASS: usize = 2;

/// Exhaustively checks, over every term of class at most `max_class`, that
/// `index_of` is injective, that `term_of` inverts it, and that each index
/// determines its top operator and argument indices.
pub fn bijection_report(max_class: usize) -> Result<BijectionReport> {
    if max_class > MAX_REPORT_CLASS {
        return Err(Error::Config(format!(
            "max_class {max_class} exceeds bound {MAX_REPORT_CLASS}"
        )));
    }
    let classes = build_classes(max_class);
    let mut seen: BTreeMap<Index, OpTerm> = BTreeMap::new();
    let mut counts = BTreeMap::new();
    let mut falsifications = Vec::new();
    let mut collisions = 0;
    let mut position: Index = 0;
    for (k, terms) in classes.iter().enumerate() {
        counts.insert(k, terms.len() as u64);
        for term in terms {
            let record =
                |reason: String, index: Option<Index>, partner: Option<&OpTerm>| Falsification {
                    term: term.to_string(),
                    index,
                    partner: partner.map(|p| p.to_string()),
                    reason,
                };
            if class_of(term) != k {
                falsifications.push(record(
                    format!("generated in class {k}, class_of says {}", class_of(term)),
                    None,
                    None,
                ));
            }
            let idx = index_of(term)?;
            if idx != position {
                falsifications.push(record(
                    format!("enumerated at position {position}"),
                    Some(idx),
                    None,
                ));
            }
            position += 1;
            if let Some(prev) = seen.get(&idx) {
                collisions += 1;
                falsifications.push(record("index collision".into(), Some(idx), Some(prev)));
                continue;
            }
            let back = term_of(idx)?;
            if &back != term {
                falsifications.push(record(
                    "term_of does not invert index_of".into(),
                    Some(idx),
                    Some(&back),
                ));
            }
            if let OpTerm::Node(op, l, r) = term {
                let expected = (*op, index_of(l)?, index_of(r)?);
                if decompose(idx)? != Some(expected) {
                    falsifications.push(record(
                        "index does not determine (i, a, b)".into(),
                        Some(idx),
                        None,
                    ));
                }
            }
            seen.insert(idx, term.clone());
        }
    }
    Ok(BijectionReport {
        max_class,
        total: counts.values().sum(),
        counts_per_class: counts,
        collisions,
        falsifications,
    })
}
