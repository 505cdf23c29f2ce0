//! Arithmetic gates as injective maps on basis labels, extended linearly.
//!
//! `PLUS` sends `|n⟩|m⟩` to `|n⟩|n+m⟩` and `MINUS` is its inverse. The
//! multiplier comes in two forms: `TIMES_STRICT` sends `|n⟩|m⟩` to `|n⟩|nm⟩`
//! and refuses `n = 0`, where the map stops being injective; `TIMES_REVERSIBLE`
//! writes the product into a third register prepared in `|0⟩`, which is
//! injective for every input. Gates act as partial isometries on the
//! simulated support; no unitary completion outside the image is built.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{Label, MultiKet, TwoRegisterKet};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum GateKind {
    Plus,
    Minus,
    TimesStrict,
    TimesReversible,
}

impl GateKind {
    pub const ALL: [GateKind; 4] = [
        GateKind::Plus,
        GateKind::Minus,
        GateKind::TimesStrict,
        GateKind::TimesReversible,
    ];

    /// Number of registers the gate touches.
    pub fn arity(self) -> usize {
        match self {
            GateKind::TimesReversible => 3,
            _ => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GateKind::Plus => "PLUS",
            GateKind::Minus => "MINUS",
            GateKind::TimesStrict => "TIMES_STRICT",
            GateKind::TimesReversible => "TIMES_REVERSIBLE",
        }
    }

    /// The gate's action on one basis tuple, restricted to its role registers.
    pub fn map_labels(self, labels: &[Label]) -> Result<Vec<Label>> {
        match (self, labels) {
            (GateKind::Plus, &[n, m]) => {
                let (n, m) = plus_labels(n, m)?;
                Ok(vec![n, m])
            }
            (GateKind::Minus, &[n, m]) => {
                let (n, m) = minus_labels(n, m)?;
                Ok(vec![n, m])
            }
            (GateKind::TimesStrict, &[n, m]) => {
                let (n, m) = times_strict_labels(n, m)?;
                Ok(vec![n, m])
            }
            (GateKind::TimesReversible, &[n, m, c]) => {
                if c != Label(0) {
                    return Err(Error::AncillaNotZero {
                        register: 2,
                        label: c.0,
                    });
                }
                Ok(vec![n, m, n.checked_mul(m)?])
            }
            _ => Err(Error::RegisterMismatch {
                expected: self.arity(),
                found: labels.len(),
            }),
        }
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for GateKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GateKind::ALL
            .into_iter()
            .find(|g| g.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown gate {s:?}")))
    }
}

pub fn plus_labels(n: Label, m: Label) -> Result<(Label, Label)> {
    Ok((n, n.checked_add(m)?))
}

pub fn minus_labels(n: Label, m: Label) -> Result<(Label, Label)> {
    Ok((n, m.checked_sub(n)?))
}

pub fn times_strict_labels(n: Label, m: Label) -> Result<(Label, Label)> {
    if n == Label(0) {
        return Err(Error::TimesDomain { label: 0 });
    }
    Ok((n, n.checked_mul(m)?))
}

/// `|n⟩|m⟩ ↦ |n⟩|n+m⟩`.
pub fn apply_plus(state: &TwoRegisterKet) -> Result<TwoRegisterKet> {
    state.map_keys(|&(n, m)| plus_labels(n, m))
}

/// `|n⟩|m⟩ ↦ |n⟩|m−n⟩`, the exact inverse of [`apply_plus`].
pub fn apply_minus(state: &TwoRegisterKet) -> Result<TwoRegisterKet> {
    state.map_keys(|&(n, m)| minus_labels(n, m))
}

/// `|n⟩|m⟩ ↦ |n⟩|nm⟩`. Fails on any component with first label 0.
pub fn apply_times_strict(state: &TwoRegisterKet) -> Result<TwoRegisterKet> {
    state.map_keys(|&(n, m)| times_strict_labels(n, m))
}

/// `|n⟩|m⟩|0⟩ ↦ |n⟩|m⟩|nm⟩` on a three-register ket.
pub fn apply_times_reversible(state: &MultiKet) -> Result<MultiKet> {
    if state.width() != 3 {
        return Err(Error::RegisterMismatch {
            expected: 3,
            found: state.width(),
        });
    }
    state.map_keys(|k| GateKind::TimesReversible.map_labels(k))
}

/// Multiplier in either mode. Strict mode wants two registers, reversible mode
/// three (a two-register input gets a fresh `|0⟩` ancilla appended).
pub fn apply_times(state: &MultiKet, mode: GateKind) -> Result<MultiKet> {
    match mode {
        GateKind::TimesStrict => {
            let two = TwoRegisterKet::try_from(state)?;
            Ok(MultiKet::from(&apply_times_strict(&two)?))
        }
        GateKind::TimesReversible if state.width() == 2 => {
            apply_times_reversible(&state.with_register(0))
        }
        GateKind::TimesReversible => apply_times_reversible(state),
        other => Err(Error::Parse(format!("{other} is not a multiplier mode"))),
    }
}

/// Applies [`apply_plus`] `count` times: `|n⟩|m⟩ ↦ |n⟩|count·n + m⟩`.
pub fn iterate_plus(state: &TwoRegisterKet, count: u64) -> Result<TwoRegisterKet> {
    let mut s = state.clone();
    for _ in 0..count {
        s = apply_plus(&s)?;
    }
    Ok(s)
}

/// One gate application with its register roles. For `PLUS`, `MINUS` and
/// `TIMES_STRICT` the roles are `[control, target]`; for `TIMES_REVERSIBLE`
/// they are `[left, right, ancilla]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub gate: GateKind,
    pub roles: Vec<usize>,
}

impl Step {
    pub fn new(gate: GateKind, roles: &[usize]) -> Self {
        Self {
            gate,
            roles: roles.to_vec(),
        }
    }

    fn check_roles(&self, width: usize) -> Result<()> {
        let distinct = self
            .roles
            .iter()
            .enumerate()
            .all(|(i, r)| !self.roles[..i].contains(r));
        if self.roles.len() != self.gate.arity()
            || !distinct
            || self.roles.iter().any(|&r| r >= width)
        {
            return Err(Error::BadRoles {
                gate: self.gate,
                expected: self.gate.arity(),
                width,
                roles: self.roles.clone(),
            });
        }
        Ok(())
    }

    pub fn apply(&self, state: &MultiKet) -> Result<MultiKet> {
        self.check_roles(state.width())?;
        let mut picked = Vec::with_capacity(self.roles.len());
        state.map_keys(|k| {
            picked.clear();
            picked.extend(self.roles.iter().map(|&r| k[r]));
            let out = self.gate.map_labels(&picked).map_err(|e| match e {
                Error::AncillaNotZero { label, .. } => Error::AncillaNotZero {
                    register: self.roles[2],
                    label,
                },
                other => other,
            })?;
            let mut k = k.clone();
            for (&r, l) in self.roles.iter().zip(out) {
                k[r] = l;
            }
            Ok(k)
        })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateProgram {
    pub steps: Vec<Step>,
}

impl GateProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, gate: GateKind, roles: &[usize]) -> &mut Self {
        self.steps.push(Step::new(gate, roles));
        self
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Highest register index referenced plus one.
    pub fn min_width(&self) -> usize {
        self.steps
            .iter()
            .flat_map(|s| s.roles.iter())
            .map(|&r| r + 1)
            .max()
            .unwrap_or(0)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("program serialization")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

/// Runs the steps left to right. Errors carry the index of the failing step.
pub fn run_program(prog: &GateProgram, state: &MultiKet) -> Result<MultiKet> {
    let mut s = state.clone();
    for (index, step) in prog.steps.iter().enumerate() {
        s = step.apply(&s).map_err(|e| Error::Step {
            index,
            source: Box::new(e),
        })?;
    }
    Ok(s)
}
