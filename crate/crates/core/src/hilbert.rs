//! Sparse states over the integer-labelled computational basis.
//!
//! A state is a finite map from basis labels to complex amplitudes. The same
//! container backs single-register kets (`Ket`), two-register kets
//! (`TwoRegisterKet`) and kets over any number of registers (`MultiKet`).
//! Amplitudes whose squared magnitude falls below [`PRUNE_THRESHOLD`] are
//! dropped whenever arithmetic produces them, so supports stay finite.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Amplitude = Complex64;

/// Squared magnitude below which a stored amplitude is discarded.
pub const PRUNE_THRESHOLD: f64 = 1e-30;

/// Allowed deviation of `Σ|a|²` from one for a state to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// A whole-number basis label. Arithmetic is checked; it never wraps.
#[derive(
    Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Label(pub i64);

impl Label {
    pub fn value(self) -> i64 {
        self.0
    }

    pub fn checked_add(self, rhs: Label) -> Result<Label> {
        self.0
            .checked_add(rhs.0)
            .map(Label)
            .ok_or(Error::LabelOverflow {
                lhs: self.0,
                op: '+',
                rhs: rhs.0,
            })
    }

    pub fn checked_sub(self, rhs: Label) -> Result<Label> {
        self.0
            .checked_sub(rhs.0)
            .map(Label)
            .ok_or(Error::LabelOverflow {
                lhs: self.0,
                op: '-',
                rhs: rhs.0,
            })
    }

    pub fn checked_mul(self, rhs: Label) -> Result<Label> {
        self.0
            .checked_mul(rhs.0)
            .map(Label)
            .ok_or(Error::LabelOverflow {
                lhs: self.0,
                op: '*',
                rhs: rhs.0,
            })
    }
}

impl From<i64> for Label {
    fn from(v: i64) -> Self {
        Label(v)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

fn check_finite(a: Amplitude) -> Result<Amplitude> {
    if a.re.is_finite() && a.im.is_finite() {
        Ok(a)
    } else {
        Err(Error::NonFiniteAmplitude { re: a.re, im: a.im })
    }
}

/// Finite-support amplitude map keyed by `K`. Iteration is in ascending key
/// order, which makes every serialized form byte-stable.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseState<K: Ord> {
    amps: BTreeMap<K, Amplitude>,
}

impl<K: Ord> Default for SparseState<K> {
    fn default() -> Self {
        Self {
            amps: BTreeMap::new(),
        }
    }
}

pub type Ket = SparseState<Label>;
pub type TwoRegisterKet = SparseState<(Label, Label)>;

impl<K: Ord + Clone> SparseState<K> {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn basis(key: K) -> Self {
        let mut amps = BTreeMap::new();
        amps.insert(key, Amplitude::new(1.0, 0.0));
        Self { amps }
    }

    /// Builds a state from `(key, amplitude)` pairs. Repeated keys are summed.
    pub fn from_terms<I>(terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, Amplitude)>,
    {
        let mut amps = BTreeMap::new();
        for (k, a) in terms {
            let a = check_finite(a)?;
            *amps.entry(k).or_insert(Amplitude::new(0.0, 0.0)) += a;
        }
        let mut s = Self { amps };
        s.prune();
        Ok(s)
    }

    fn prune(&mut self) {
        self.amps.retain(|_, a| a.norm_sqr() >= PRUNE_THRESHOLD);
    }

    pub fn amplitude(&self, key: &K) -> Amplitude {
        self.amps.get(key).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &Amplitude)> {
        self.amps.iter()
    }

    pub fn keys(&self) -> impl Iterator<Item = &K> {
        self.amps.keys()
    }

    pub fn len(&self) -> usize {
        self.amps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amps.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_normalized(&self) -> bool {
        (self.norm_sqr() - 1.0).abs() <= NORM_TOLERANCE
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &Self) -> Amplitude {
        let (small, large, conj_small) = if self.len() <= other.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        small
            .amps
            .iter()
            .filter_map(|(k, a)| {
                large.amps.get(k).map(|b| {
                    if conj_small {
                        a.conj() * b
                    } else {
                        b.conj() * a
                    }
                })
            })
            .sum()
    }

    /// Euclidean distance `‖self − other‖`.
    pub fn distance(&self, other: &Self) -> f64 {
        let mut acc = 0.0;
        for (k, a) in &self.amps {
            acc += (a - other.amplitude(k)).norm_sqr();
        }
        for (k, b) in &other.amps {
            if !self.amps.contains_key(k) {
                acc += b.norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn scale(&self, c: Amplitude) -> Self {
        let mut s = Self {
            amps: self.amps.iter().map(|(k, a)| (k.clone(), a * c)).collect(),
        };
        s.prune();
        s
    }

    /// `self + c·other`, left unnormalized.
    pub fn add_scaled(&self, c: Amplitude, other: &Self) -> Self {
        let mut amps = self.amps.clone();
        for (k, b) in &other.amps {
            *amps.entry(k.clone()).or_insert(Amplitude::new(0.0, 0.0)) += c * b;
        }
        let mut s = Self { amps };
        s.prune();
        s
    }

    pub fn normalize(&self) -> Result<Self> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::DegenerateState);
        }
        Ok(self.scale(Amplitude::new(1.0 / n, 0.0)))
    }

    /// Relabels every basis component through `f`, summing amplitudes whose
    /// images coincide. For an injective `f` amplitudes move untouched.
    pub fn map_keys<J, F>(&self, mut f: F) -> Result<SparseState<J>>
    where
        J: Ord + Clone,
        F: FnMut(&K) -> Result<J>,
    {
        let mut amps: BTreeMap<J, Amplitude> = BTreeMap::new();
        let mut collided = false;
        for (k, a) in &self.amps {
            let j = f(k)?;
            match amps.get_mut(&j) {
                Some(slot) => {
                    *slot += a;
                    collided = true;
                }
                None => {
                    amps.insert(j, *a);
                }
            }
        }
        let mut s = SparseState { amps };
        if collided {
            s.prune();
        }
        Ok(s)
    }

    /// The unique key of a single-term state.
    pub fn basis_key(&self) -> Result<&K> {
        match self.amps.len() {
            1 => Ok(self.amps.keys().next().expect("one key")),
            n => Err(Error::NotBasis { support: n }),
        }
    }
}

pub fn basis_ket(n: impl Into<Label>) -> Ket {
    Ket::basis(n.into())
}

pub fn inner<K: Ord + Clone>(a: &SparseState<K>, b: &SparseState<K>) -> Amplitude {
    a.inner(b)
}

pub fn distance<K: Ord + Clone>(a: &SparseState<K>, b: &SparseState<K>) -> f64 {
    a.distance(b)
}

pub fn norm<K: Ord + Clone>(a: &SparseState<K>) -> f64 {
    a.norm()
}

pub fn normalize<K: Ord + Clone>(a: &SparseState<K>) -> Result<SparseState<K>> {
    a.normalize()
}

pub fn add_scaled<K: Ord + Clone>(
    a: &SparseState<K>,
    c: Amplitude,
    b: &SparseState<K>,
) -> SparseState<K> {
    a.add_scaled(c, b)
}

/// Tensor product: amplitude at `(n, m)` is `a(n)·b(m)`.
pub fn tensor(a: &Ket, b: &Ket) -> TwoRegisterKet {
    let mut amps = BTreeMap::new();
    for (n, x) in a.iter() {
        for (m, y) in b.iter() {
            amps.insert((*n, *m), x * y);
        }
    }
    let mut s = TwoRegisterKet { amps };
    s.prune();
    s
}

/// Ket over a fixed number of registers, keyed by label tuples.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiKet {
    width: usize,
    state: SparseState<Vec<Label>>,
}

impl MultiKet {
    pub fn new(width: usize, state: SparseState<Vec<Label>>) -> Result<Self> {
        if let Some(bad) = state.keys().find(|k| k.len() != width) {
            return Err(Error::RegisterMismatch {
                expected: width,
                found: bad.len(),
            });
        }
        Ok(Self { width, state })
    }

    pub fn basis(labels: &[i64]) -> Self {
        Self {
            width: labels.len(),
            state: SparseState::basis(labels.iter().copied().map(Label).collect()),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn state(&self) -> &SparseState<Vec<Label>> {
        &self.state
    }

    pub fn into_state(self) -> SparseState<Vec<Label>> {
        self.state
    }

    /// Appends a register prepared in `|label⟩`.
    pub fn with_register(&self, label: i64) -> Self {
        let state = self
            .state
            .map_keys(|k| {
                let mut k = k.clone();
                k.push(Label(label));
                Ok(k)
            })
            .expect("appending a register cannot fail");
        Self {
            width: self.width + 1,
            state,
        }
    }

    /// Labels of a basis-state ket.
    pub fn basis_labels(&self) -> Result<Vec<i64>> {
        Ok(self.state.basis_key()?.iter().map(|l| l.0).collect())
    }

    /// Relabels components; `f` receives and must return tuples of `width` labels.
    pub fn map_keys<F>(&self, f: F) -> Result<Self>
    where
        F: FnMut(&Vec<Label>) -> Result<Vec<Label>>,
    {
        Ok(Self {
            width: self.width,
            state: self.state.map_keys(f)?,
        })
    }
}

impl From<&Ket> for MultiKet {
    fn from(k: &Ket) -> Self {
        let state = k.map_keys(|l| Ok(vec![*l])).expect("infallible");
        Self { width: 1, state }
    }
}

impl From<&TwoRegisterKet> for MultiKet {
    fn from(k: &TwoRegisterKet) -> Self {
        let state = k.map_keys(|(a, b)| Ok(vec![*a, *b])).expect("infallible");
        Self { width: 2, state }
    }
}

impl TryFrom<&MultiKet> for TwoRegisterKet {
    type Error = Error;

    fn try_from(k: &MultiKet) -> Result<Self> {
        if k.width != 2 {
            return Err(Error::RegisterMismatch {
                expected: 2,
                found: k.width,
            });
        }
        k.state.map_keys(|v| Ok((v[0], v[1])))
    }
}

/// On-disk JSON form of a state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    pub registers: usize,
    pub terms: Vec<TermEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermEntry {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<i64>>,
    pub re: f64,
    pub im: f64,
}

impl StateFile {
    pub fn from_ket(k: &MultiKet) -> Self {
        let terms = k
            .state
            .iter()
            .map(|(labels, a)| {
                let raw: Vec<i64> = labels.iter().map(|l| l.0).collect();
                let (label, labels) = if k.width == 1 {
                    (Some(raw[0]), None)
                } else {
                    (None, Some(raw))
                };
                TermEntry {
                    label,
                    labels,
                    re: a.re,
                    im: a.im,
                }
            })
            .collect();
        Self {
            registers: k.width,
            terms,
        }
    }

    pub fn to_ket(&self) -> Result<MultiKet> {
        if self.registers == 0 {
            return Err(Error::Parse("registers must be at least 1".into()));
        }
        let mut terms = Vec::with_capacity(self.terms.len());
        for (i, t) in self.terms.iter().enumerate() {
            let labels = match (&t.label, &t.labels) {
                (Some(l), None) if self.registers == 1 => vec![*l],
                (None, Some(ls)) if ls.len() == self.registers => ls.clone(),
                _ => {
                    return Err(Error::Parse(format!(
                        "term {i} does not carry exactly {} label(s)",
                        self.registers
                    )))
                }
            };
            terms.push((
                labels.into_iter().map(Label).collect(),
                Amplitude::new(t.re, t.im),
            ));
        }
        MultiKet::new(self.registers, SparseState::from_terms(terms)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("state serialization")
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Amplitude {
        Amplitude::new(re, 0.0)
    }

    fn sup(terms: &[(i64, f64)]) -> Ket {
        Ket::from_terms(terms.iter().map(|&(n, a)| (Label(n), c(a)))).unwrap()
    }

    #[test]
    fn basis_kets() {
        let k = basis_ket(0);
        assert_eq!(k.len(), 1);
        assert_eq!(k.amplitude(&Label(0)), c(1.0));
        let k = basis_ket(-7);
        assert_eq!(k.amplitude(&Label(-7)), c(1.0));
        assert_eq!(norm(&basis_ket(5)), 1.0);
    }

    #[test]
    fn inner_products() {
        assert_eq!(inner(&basis_ket(3), &basis_ket(3)), c(1.0));
        assert_eq!(inner(&basis_ket(3), &basis_ket(4)), c(0.0));
        assert_eq!(inner(&sup(&[(1, 0.6), (2, 0.8)]), &basis_ket(2)), c(0.8));
    }

    #[test]
    fn inner_is_conjugate_linear_in_first_argument() {
        let a = Ket::from_terms([(Label(1), Amplitude::new(0.0, 1.0))]).unwrap();
        let b = basis_ket(1);
        assert_eq!(a.inner(&b), Amplitude::new(0.0, -1.0));
        assert_eq!(b.inner(&a), Amplitude::new(0.0, 1.0));
    }

    #[test]
    fn tensor_products() {
        let t = tensor(&basis_ket(1), &basis_ket(2));
        assert_eq!(t.len(), 1);
        assert_eq!(t.amplitude(&(Label(1), Label(2))), c(1.0));

        let t = tensor(&sup(&[(1, 0.6), (2, 0.8)]), &basis_ket(0));
        assert_eq!(t.amplitude(&(Label(1), Label(0))), c(0.6));
        assert_eq!(t.amplitude(&(Label(2), Label(0))), c(0.8));
    }

    #[test]
    fn distances() {
        for (n, m) in [(0, 1), (-4, 9), (100, -100)] {
            assert!((distance(&basis_ket(n), &basis_ket(m)) - 2f64.sqrt()).abs() < 1e-15);
        }
        assert_eq!(distance(&basis_ket(3), &basis_ket(3)), 0.0);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = sup(&[(0, h), (1, h)]);
        let expected = (2.0 - 2f64.sqrt()).sqrt();
        assert!((distance(&basis_ket(0), &plus) - expected).abs() < 1e-15);
    }

    #[test]
    fn norm_and_scaling() {
        assert!((norm(&sup(&[(1, 0.6), (2, 0.8)])) - 1.0).abs() < 1e-15);
        assert_eq!(normalize(&sup(&[(3, 2.0)])).unwrap(), basis_ket(3));
        let doubled = add_scaled(&basis_ket(1), c(1.0), &basis_ket(1));
        assert_eq!(doubled, sup(&[(1, 2.0)]));
        assert!(!doubled.is_normalized());
    }

    #[test]
    fn zero_state_cannot_be_normalized() {
        assert_eq!(Ket::zero().normalize(), Err(Error::DegenerateState));
        let cancelled = add_scaled(&basis_ket(4), c(-1.0), &basis_ket(4));
        assert!(cancelled.is_empty());
        assert_eq!(cancelled.normalize(), Err(Error::DegenerateState));
    }

    #[test]
    fn dust_is_pruned() {
        let k = sup(&[(1, 1.0), (2, 1e-16)]);
        assert_eq!(k.len(), 1);
        let k = sup(&[(1, 1.0), (2, 1e-14)]);
        assert_eq!(k.len(), 2);
    }

    #[test]
    fn non_finite_amplitudes_are_rejected() {
        let r = Ket::from_terms([(Label(0), Amplitude::new(f64::NAN, 0.0))]);
        assert!(matches!(r, Err(Error::NonFiniteAmplitude { .. })));
    }

    #[test]
    fn label_arithmetic_never_wraps() {
        assert!(Label(i64::MAX).checked_add(Label(1)).is_err());
        assert!(Label(i64::MIN).checked_sub(Label(1)).is_err());
        assert!(Label(1 << 40).checked_mul(Label(1 << 40)).is_err());
        assert_eq!(Label(-3).checked_mul(Label(4)), Ok(Label(-12)));
    }

    #[test]
    fn orthonormal_window() {
        for n in -16..=16 {
            for m in -16..=16 {
                let expected = if n == m { 1.0 } else { 0.0 };
                assert_eq!(inner(&basis_ket(n), &basis_ket(m)), c(expected));
            }
        }
    }

    #[test]
    fn sum_of_distinct_sums_is_not_the_target_ket() {
        // |n+m> versus |(n-k)+m> + |k+m>
        for n in -6i64..=6 {
            for m in -3i64..=3 {
                for k in -6i64..=6 {
                    if k == 0 {
                        continue;
                    }
                    let target = basis_ket(n + m);
                    let split = add_scaled(&basis_ket(n - k + m), c(1.0), &basis_ket(k + m));
                    assert!(distance(&target, &split) > 0.0);
                    // norm is sqrt(2) for distinct labels, 2 when they coincide
                    assert!((split.norm() - 1.0).abs() > 0.4);
                }
            }
        }
    }

    #[test]
    fn json_orders_terms() {
        let k = MultiKet::new(
            2,
            SparseState::from_terms([
                (vec![Label(2), Label(0)], c(0.8)),
                (vec![Label(1), Label(5)], c(0.6)),
            ])
            .unwrap(),
        )
        .unwrap();
        let f = StateFile::from_ket(&k);
        assert_eq!(f.terms[0].labels, Some(vec![1, 5]));
        assert_eq!(f.terms[1].labels, Some(vec![2, 0]));
        let back = StateFile::parse(&f.to_json()).unwrap().to_ket().unwrap();
        assert_eq!(back, k);
    }

    #[test]
    fn json_rejects_wrong_label_count() {
        let text = r#"{"registers":2,"terms":[{"label":3,"re":1.0,"im":0.0}]}"#;
        assert!(matches!(
            StateFile::parse(text).unwrap().to_ket(),
            Err(Error::Parse(_))
        ));
        assert!(StateFile::parse("{nope").is_err());
    }
}
