//! Time-resolved adder: register `A` in `|n⟩` drives register `B` from `|m⟩`
//! to `|n+m⟩` under `H_A⊗1 + 1⊗H_B + V_A⊗V_B` (with ħ = 1).
//!
//! Register `B` lives on a ring of `D` labels. `V_B` is the Hermitian
//! generator of the unit cyclic shift, diagonal in the discrete Fourier basis
//! with eigenphases in `(−π, π]`, so `exp(−i V_B)` is exactly one step of the
//! shift. `V_A` is diagonal with `v_{An} = n`. While the interaction is
//! switched on, `B` is translated by `n·t` labels; at `t = 1` the translation
//! is exactly `n`. The interaction acts for one gate time and is then off, so
//! the register holds `|n+m⟩` afterwards.
//!
//! Two propagation routes are provided for the block of `B` conditioned on
//! `A = |n⟩`: a closed-form Fourier propagator (used whenever `H_B = 0`) and a
//! dense Hermitian eigendecomposition (used for the reduced equation of `B`
//! alone and whenever `H_B ≠ 0`). A fourth-order Runge–Kutta integrator
//! serves as an independent numerical check.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{Amplitude, Ket, Label, TwoRegisterKet};

pub const HBAR: f64 = 1.0;
pub const MIN_WINDOW: usize = 8;
pub const MAX_DT: f64 = 0.01;
pub const DEFAULT_SAMPLES: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianModel {
    window: usize,
    va: BTreeMap<i64, f64>,
    ha: BTreeMap<i64, f64>,
    hb: BTreeMap<i64, f64>,
    gate_time: Option<f64>,
}

/// Model on a ring of `window` labels with the default operators.
pub fn build_model(window: usize) -> Result<HamiltonianModel> {
    HamiltonianModel::new(window)
}

impl HamiltonianModel {
    pub fn new(window: usize) -> Result<Self> {
        if window < MIN_WINDOW || !window.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "window D must be even and at least {MIN_WINDOW}, got {window}"
            )));
        }
        Ok(Self {
            window,
            va: BTreeMap::new(),
            ha: BTreeMap::new(),
            hb: BTreeMap::new(),
            gate_time: Some(1.0),
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    pub fn hbar(&self) -> f64 {
        HBAR
    }

    fn half(&self) -> i64 {
        (self.window / 2) as i64
    }

    /// Duration of the interaction, or `None` if it never switches off.
    pub fn gate_time(&self) -> Option<f64> {
        self.gate_time
    }

    pub fn with_gate_time(mut self, gate_time: Option<f64>) -> Result<Self> {
        if let Some(g) = gate_time {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::Config(format!(
                    "gate time must be positive, got {g}"
                )));
            }
        }
        self.gate_time = gate_time;
        Ok(self)
    }

    /// Overrides the eigenvalue of `V_A` on `|n⟩`. The spectrum must stay
    /// nondegenerate over the active window.
    pub fn with_va(mut self, n: i64, value: f64) -> Result<Self> {
        self.va.insert(n, value);
        self.check_va()?;
        Ok(self)
    }

    pub fn with_ha(mut self, n: i64, value: f64) -> Self {
        self.ha.insert(n, value);
        self
    }

    pub fn with_hb(mut self, label: i64, value: f64) -> Self {
        self.hb.insert(self.ring_label(Label(label)).0, value);
        self
    }

    fn check_va(&self) -> Result<()> {
        let mut seen: Vec<(f64, i64)> = self
            .active_labels()
            .map(|n| (self.va(Label(n)), n))
            .collect();
        seen.sort_by(|a, b| a.0.total_cmp(&b.0));
        for w in seen.windows(2) {
            if w[0].0 == w[1].0 {
                return Err(Error::Config(format!(
                    "V_A is degenerate: labels {} and {} share eigenvalue {}",
                    w[0].1, w[1].1, w[0].0
                )));
            }
        }
        Ok(())
    }

    fn active_labels(&self) -> impl Iterator<Item = i64> {
        let h = self.half();
        (-h + 1)..=h
    }

    pub fn va(&self, n: Label) -> f64 {
        self.va.get(&n.0).copied().unwrap_or(n.0 as f64)
    }

    pub fn ha(&self, n: Label) -> f64 {
        self.ha.get(&n.0).copied().unwrap_or(0.0)
    }

    pub fn hb(&self, label: Label) -> f64 {
        self.hb
            .get(&self.ring_label(label).0)
            .copied()
            .unwrap_or(0.0)
    }

    fn hb_is_zero(&self) -> bool {
        self.hb.values().all(|&v| v == 0.0)
    }

    /// Representative of `label` on the ring, in `(−D/2, D/2]`.
    pub fn ring_label(&self, label: Label) -> Label {
        Label(self.label_of(self.index_of(label)))
    }

    fn index_of(&self, label: Label) -> usize {
        label.0.rem_euclid(self.window as i64) as usize
    }

    fn label_of(&self, index: usize) -> i64 {
        let i = index as i64;
        if i <= self.half() {
            i
        } else {
            i - self.window as i64
        }
    }

    /// Eigenphase of `V_B` for Fourier mode `k` (ring index). The branch is
    /// the one in `(−π, π]`.
    fn mode_phase(&self, k: usize) -> f64 {
        let kk = self.label_of(k);
        if kk == self.half() {
            PI
        } else {
            -2.0 * PI * kk as f64 / self.window as f64
        }
    }

    /// Eigenvalues of `V_B`, ascending.
    pub fn shift_generator_spectrum(&self) -> Vec<f64> {
        let mut s: Vec<f64> = (0..self.window).map(|k| self.mode_phase(k)).collect();
        s.sort_by(f64::total_cmp);
        s
    }

    fn roots(&self) -> Vec<Complex64> {
        let d = self.window as f64;
        (0..self.window)
            .map(|j| Complex64::from_polar(1.0, 2.0 * PI * j as f64 / d))
            .collect()
    }

    /// `V_B` in the position basis, indexed by ring index.
    pub fn shift_generator_matrix(&self) -> DMatrix<Complex64> {
        let d = self.window;
        let roots = self.roots();
        DMatrix::from_fn(d, d, |x, y| {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..d {
                // φ_k(x) φ_k(y)* = e^{−2πik(x−y)/D} / D
                let j = (k * ((y + d - x) % d)) % d;
                acc += roots[j] * self.mode_phase(k);
            }
            acc / d as f64
        })
    }

    /// Block Hamiltonian of `B` given `A = |n⟩`, with or without the coupling.
    pub fn block_hamiltonian(&self, n: Label, interacting: bool) -> DMatrix<Complex64> {
        let d = self.window;
        let mut h = if interacting && self.va(n) != 0.0 {
            self.shift_generator_matrix() * Complex64::new(self.va(n), 0.0)
        } else {
            DMatrix::zeros(d, d)
        };
        let ha = self.ha(n);
        for x in 0..d {
            h[(x, x)] += ha + self.hb(Label(self.label_of(x)));
        }
        h
    }

    /// Splits `t` into the time spent with the coupling on and off.
    fn phases(&self, t: f64) -> (f64, f64) {
        match self.gate_time {
            Some(g) if t > g => (g, t - g),
            _ => (t, 0.0),
        }
    }

    fn guard(&self, n: Label, m: Label) -> Result<()> {
        let span = n.0.unsigned_abs().saturating_add(m.0.unsigned_abs());
        let half = self.half();
        if span >= half as u64 {
            return Err(Error::Aliasing {
                span: span.min(i64::MAX as u64) as i64,
                half,
            });
        }
        Ok(())
    }

    fn dense_column(&self, column: &[(Label, Amplitude)]) -> Vec<Complex64> {
        let mut psi = vec![Complex64::new(0.0, 0.0); self.window];
        for (l, a) in column {
            psi[self.index_of(*l)] += a;
        }
        psi
    }

    fn fourier_block(&self, n: Label, psi: &[Complex64], t: f64) -> Vec<Complex64> {
        let d = self.window;
        let roots = self.roots();
        let norm = 1.0 / (d as f64).sqrt();
        let (t_on, _) = self.phases(t);
        let a_phase = self.ha(n) * t / HBAR;
        let v_t = self.va(n) * t_on / HBAR;
        let coeffs: Vec<Complex64> = (0..d)
            .map(|k| {
                let mut c = Complex64::new(0.0, 0.0);
                for (x, p) in psi.iter().enumerate() {
                    if p.norm_sqr() > 0.0 {
                        c += roots[(k * x) % d] * p;
                    }
                }
                c * norm * Complex64::from_polar(1.0, -(a_phase + v_t * self.mode_phase(k)))
            })
            .collect();
        (0..d)
            .map(|x| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (k, c) in coeffs.iter().enumerate() {
                    acc += roots[(d - (k * x) % d) % d] * c;
                }
                acc * norm
            })
            .collect()
    }

    fn dense_block(&self, n: Label, psi: &[Complex64], t: f64) -> Vec<Complex64> {
        let (t_on, t_off) = self.phases(t);
        let mut v = DVector::from_column_slice(psi);
        v = expm_apply(&self.block_hamiltonian(n, true), &v, t_on / HBAR);
        if t_off > 0.0 {
            v = expm_apply(&self.block_hamiltonian(n, false), &v, t_off / HBAR);
        }
        v.iter().copied().collect()
    }

    fn to_ket(&self, psi: &[Complex64]) -> Result<Ket> {
        Ket::from_terms(
            psi.iter()
                .enumerate()
                .map(|(x, a)| (Label(self.label_of(x)), *a)),
        )
    }
}

fn check_time(t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!(
            "time must be finite and non-negative, got {t}"
        )))
    }
}

/// `exp(−i H t)·v` through the eigendecomposition of Hermitian `H`.
fn expm_apply(h: &DMatrix<Complex64>, v: &DVector<Complex64>, t: f64) -> DVector<Complex64> {
    if t == 0.0 {
        return v.clone();
    }
    let eig = SymmetricEigen::new(h.clone());
    let u = &eig.eigenvectors;
    let mut c = u.adjoint() * v;
    for (ck, &lambda) in c.iter_mut().zip(eig.eigenvalues.iter()) {
        *ck *= Complex64::from_polar(1.0, -lambda * t);
    }
    u * c
}

/// Propagates a two-register state by the full (super-system) evolution. `A`
/// stays in its eigenbasis, so each `A` label evolves its own `B` block.
pub fn evolve_state(
    model: &HamiltonianModel,
    state: &TwoRegisterKet,
    t: f64,
) -> Result<TwoRegisterKet> {
    check_time(t)?;
    let mut columns: BTreeMap<Label, Vec<(Label, Amplitude)>> = BTreeMap::new();
    for (&(n, m), &a) in state.iter() {
        model.guard(n, m)?;
        columns.entry(n).or_default().push((m, a));
    }
    if t == 0.0 {
        return Ok(state.clone());
    }
    let mut terms = Vec::new();
    for (n, column) in columns {
        let psi = model.dense_column(&column);
        let out = if model.hb_is_zero() {
            model.fourier_block(n, &psi, t)
        } else {
            model.dense_block(n, &psi, t)
        };
        terms.extend(
            out.into_iter()
                .enumerate()
                .map(|(x, a)| ((n, Label(model.label_of(x))), a)),
        );
    }
    TwoRegisterKet::from_terms(terms)
}

/// `|n⟩|m⟩` evolved for time `t`.
pub fn evolve_exact(model: &HamiltonianModel, n: i64, m: i64, t: f64) -> Result<TwoRegisterKet> {
    evolve_state(model, &TwoRegisterKet::basis((Label(n), Label(m))), t)
}

/// Evolves `B` alone under the reduced equation `(h_A(n) + H_B + v_{An} V_B) ψ = i dψ/dt`.
pub fn subsystem_evolve(model: &HamiltonianModel, n: i64, m: i64, t: f64) -> Result<Ket> {
    check_time(t)?;
    model.guard(Label(n), Label(m))?;
    let psi = model.dense_column(&[(Label(m), Amplitude::new(1.0, 0.0))]);
    model.to_ket(&model.dense_block(Label(n), &psi, t))
}

/// `⟨n|ψ⟩`: the `B` factor of a two-register state for `A = |n⟩`.
pub fn project_first(state: &TwoRegisterKet, n: i64) -> Result<Ket> {
    Ket::from_terms(
        state
            .iter()
            .filter(|((a, _), _)| a.0 == n)
            .map(|(&(_, b), &amp)| (b, amp)),
    )
}

struct Rk4<'a> {
    model: &'a HamiltonianModel,
    on: DMatrix<Complex64>,
    off: DMatrix<Complex64>,
    dt: f64,
    max_norm_deviation: f64,
}

impl<'a> Rk4<'a> {
    fn new(model: &'a HamiltonianModel, n: Label, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(Error::StepSize { dt, max: MAX_DT });
        }
        Ok(Self {
            model,
            on: model.block_hamiltonian(n, true) / Complex64::new(HBAR, 0.0),
            off: model.block_hamiltonian(n, false) / Complex64::new(HBAR, 0.0),
            dt,
            max_norm_deviation: 0.0,
        })
    }

    fn integrate(&mut self, h: &DMatrix<Complex64>, psi: &mut DVector<Complex64>, span: f64) {
        if span <= 0.0 {
            return;
        }
        let steps = (span / self.dt).ceil().max(1.0) as usize;
        let step = span / steps as f64;
        let mi = Complex64::new(0.0, -1.0);
        let half = Complex64::new(step / 2.0, 0.0);
        let full = Complex64::new(step, 0.0);
        for _ in 0..steps {
            let k1 = h * &*psi * mi;
            let k2 = h * (&*psi + &k1 * half) * mi;
            let k3 = h * (&*psi + &k2 * half) * mi;
            let k4 = h * (&*psi + &k3 * full) * mi;
            *psi += (k1 + k2 * Complex64::new(2.0, 0.0) + k3 * Complex64::new(2.0, 0.0) + k4)
                * (full / 6.0);
            let dev = (psi.norm() - 1.0).abs();
            self.max_norm_deviation = self.max_norm_deviation.max(dev);
        }
    }

    /// Advances `psi` from `t0` to `t1`, splitting at the gate time.
    fn advance(&mut self, psi: &mut DVector<Complex64>, t0: f64, t1: f64) {
        let switch = self.model.gate_time.unwrap_or(f64::INFINITY);
        let on = self.on.clone();
        let off = self.off.clone();
        if t0 < switch {
            let end = t1.min(switch);
            self.integrate(&on, psi, end - t0);
        }
        if t1 > switch {
            self.integrate(&off, psi, t1 - t0.max(switch));
        }
    }
}

/// Result of a Runge–Kutta run with the largest norm excursion seen at any step.
#[derive(Clone, Debug, PartialEq)]
pub struct NumericRun {
    pub state: TwoRegisterKet,
    pub max_norm_deviation: f64,
}

/// Fourth-order Runge–Kutta integration of `B` with `A` fixed at `|n⟩`.
pub fn evolve_numeric(
    model: &HamiltonianModel,
    n: i64,
    m: i64,
    t: f64,
    dt: f64,
) -> Result<TwoRegisterKet> {
    Ok(evolve_numeric_run(model, n, m, t, dt)?.state)
}

pub fn evolve_numeric_run(
    model: &HamiltonianModel,
    n: i64,
    m: i64,
    t: f64,
    dt: f64,
) -> Result<NumericRun> {
    check_time(t)?;
    model.guard(Label(n), Label(m))?;
    let mut rk = Rk4::new(model, Label(n), dt)?;
    let mut psi = DVector::from_vec(model.dense_column(&[(Label(m), Amplitude::new(1.0, 0.0))]));
    rk.advance(&mut psi, 0.0, t);
    let b = model.to_ket(psi.as_slice())?;
    let state = TwoRegisterKet::from_terms(b.iter().map(|(l, a)| ((Label(n), *l), *a)))?;
    Ok(NumericRun {
        state,
        max_norm_deviation: rk.max_norm_deviation,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Propagator {
    Exact,
    Numeric { dt: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions {
    pub epsilon: f64,
    pub t_max: f64,
    pub samples: usize,
    pub propagator: Propagator,
}

impl TraceOptions {
    pub fn new(epsilon: f64, t_max: f64) -> Self {
        Self {
            epsilon,
            t_max,
            samples: DEFAULT_SAMPLES,
            propagator: Propagator::Exact,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvolutionTrace {
    pub n: i64,
    pub m: i64,
    pub window: usize,
    pub epsilon: f64,
    pub t_max: f64,
    pub propagator: Propagator,
    pub times: Vec<f64>,
    /// `|⟨n+m|ψ_B(t)⟩|²`
    pub fidelity: Vec<f64>,
    /// Probability on every label other than `n+m`.
    pub leakage: Vec<f64>,
    /// Largest probability on a single label other than `n+m`.
    pub max_off_target: Vec<f64>,
    pub stopping_time: Option<f64>,
    pub min_fidelity_after_stop: Option<f64>,
    pub max_off_target_after_stop: Option<f64>,
}

impl EvolutionTrace {
    /// Spacing of the sample grid.
    pub fn grid_step(&self) -> f64 {
        if self.times.len() < 2 {
            0.0
        } else {
            self.t_max / (self.times.len() - 1) as f64
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,fidelity,leakage\n");
        for ((t, f), l) in self.times.iter().zip(&self.fidelity).zip(&self.leakage) {
            out.push_str(&format!("{},{},{}\n", sig12(*t), sig12(*f), sig12(*l)));
        }
        out
    }

    pub fn sidecar(&self) -> TraceSidecar {
        TraceSidecar {
            n: self.n,
            m: self.m,
            window: self.window,
            epsilon: self.epsilon,
            stopping_time: self.stopping_time,
            t_max: self.t_max,
            samples: self.times.len(),
            propagator: self.propagator,
            min_fidelity_after_stop: self.min_fidelity_after_stop,
            max_off_target_after_stop: self.max_off_target_after_stop,
        }
    }
}

/// Twelve significant digits in scientific notation.
pub fn sig12(x: f64) -> String {
    format!("{x:.11e}")
}

/// Parameters and detected stopping time, written alongside the CSV trace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceSidecar {
    pub n: i64,
    pub m: i64,
    #[serde(rename = "D")]
    pub window: usize,
    pub epsilon: f64,
    #[serde(rename = "T")]
    pub stopping_time: Option<f64>,
    pub t_max: f64,
    pub samples: usize,
    pub propagator: Propagator,
    pub min_fidelity_after_stop: Option<f64>,
    pub max_off_target_after_stop: Option<f64>,
}

/// Samples the evolution of `|n⟩|m⟩` on a uniform grid over `[0, t_max]` and
/// reports the first grid time after which the fidelity with `|n+m⟩` stays
/// at or above `1 − ε` through `t_max`.
pub fn detect_stopping_time(
    model: &HamiltonianModel,
    n: i64,
    m: i64,
    epsilon: f64,
    t_max: f64,
) -> Result<EvolutionTrace> {
    detect_stopping_time_with(model, n, m, &TraceOptions::new(epsilon, t_max))
}

pub fn detect_stopping_time_with(
    model: &HamiltonianModel,
    n: i64,
    m: i64,
    opts: &TraceOptions,
) -> Result<EvolutionTrace> {
    if !(opts.epsilon > 0.0 && opts.epsilon < 0.5) {
        return Err(Error::Config(format!(
            "epsilon must lie in (0, 0.5), got {}",
            opts.epsilon
        )));
    }
    if !(opts.t_max.is_finite() && opts.t_max > 0.0) || opts.samples < 2 {
        return Err(Error::Config(
            "trace needs t_max > 0 and at least two samples".into(),
        ));
    }
    model.guard(Label(n), Label(m))?;
    let target = model.index_of(Label(n + m));
    let times: Vec<f64> = (0..opts.samples)
        .map(|i| opts.t_max * i as f64 / (opts.samples - 1) as f64)
        .collect();

    let profiles: Vec<Vec<f64>> = match opts.propagator {
        Propagator::Exact => times
            .iter()
            .map(|&t| {
                let s = evolve_exact(model, n, m, t)?;
                let b = model.dense_column(
                    &project_first(&s, n)?
                        .iter()
                        .map(|(l, a)| (*l, *a))
                        .collect::<Vec<_>>(),
                );
                Ok(b.iter().map(|a| a.norm_sqr()).collect())
            })
            .collect::<Result<_>>()?,
        Propagator::Numeric { dt } => {
            let mut rk = Rk4::new(model, Label(n), dt)?;
            let mut psi =
                DVector::from_vec(model.dense_column(&[(Label(m), Amplitude::new(1.0, 0.0))]));
            let mut prev = 0.0;
            let mut out = Vec::with_capacity(times.len());
            for &t in &times {
                rk.advance(&mut psi, prev, t);
                prev = t;
                out.push(psi.iter().map(|a| a.norm_sqr()).collect());
            }
            out
        }
    };

    let mut fidelity = Vec::with_capacity(times.len());
    let mut leakage = Vec::with_capacity(times.len());
    let mut max_off_target = Vec::with_capacity(times.len());
    for p in &profiles {
        fidelity.push(p[target]);
        leakage.push(
            p.iter()
                .enumerate()
                .filter(|&(x, _)| x != target)
                .map(|(_, q)| q)
                .sum(),
        );
        max_off_target.push(
            p.iter()
                .enumerate()
                .filter(|&(x, _)| x != target)
                .map(|(_, q)| *q)
                .fold(0.0, f64::max),
        );
    }

    let threshold = 1.0 - opts.epsilon;
    let start = fidelity
        .iter()
        .rposition(|&f| f < threshold)
        .map_or(0, |i| i + 1);
    let (stopping_time, min_after, max_off_after) = if start < times.len() {
        (
            Some(times[start]),
            Some(
                fidelity[start..]
                    .iter()
                    .copied()
                    .fold(f64::INFINITY, f64::min),
            ),
            Some(max_off_target[start..].iter().copied().fold(0.0, f64::max)),
        )
    } else {
        (None, None, None)
    };

    Ok(EvolutionTrace {
        n,
        m,
        window: model.window,
        epsilon: opts.epsilon,
        t_max: opts.t_max,
        propagator: opts.propagator,
        times,
        fidelity,
        leakage,
        max_off_target,
        stopping_time,
        min_fidelity_after_stop: min_after,
        max_off_target_after_stop: max_off_after,
    })
}

/// One row of the `T(n−k,m) + T(k,m) ≥ T(n,m)` table. This is a measured
/// property of the model, not a guarantee.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuperadditivityRow {
    pub n: i64,
    pub k: i64,
    pub m: i64,
    pub t_n_minus_k: Option<f64>,
    pub t_k: Option<f64>,
    pub t_n: Option<f64>,
    pub holds: bool,
}

/// Measures the table for all `|n| ≤ n_max`, `|k| < |n|` and each `m`.
pub fn superadditivity_report(
    model: &HamiltonianModel,
    n_max: i64,
    ms: &[i64],
    epsilon: f64,
    t_max: f64,
) -> Result<Vec<SuperadditivityRow>> {
    let mut cache: HashMap<(i64, i64), Option<f64>> = HashMap::new();
    let mut stop = |n: i64, m: i64| -> Result<Option<f64>> {
        if let Some(t) = cache.get(&(n, m)) {
            return Ok(*t);
        }
        let t = detect_stopping_time(model, n, m, epsilon, t_max)?.stopping_time;
        cache.insert((n, m), t);
        Ok(t)
    };
    let mut rows = Vec::new();
    for &m in ms {
        for n in -n_max..=n_max {
            for k in (-n.abs() + 1)..n.abs() {
                let t_n_minus_k = stop(n - k, m)?;
                let t_k = stop(k, m)?;
                let t_n = stop(n, m)?;
                let holds = match (t_n_minus_k, t_k, t_n) {
                    (Some(a), Some(b), Some(c)) => a + b >= c,
                    _ => false,
                };
                rows.push(SuperadditivityRow {
                    n,
                    k,
                    m,
                    t_n_minus_k,
                    t_k,
                    t_n,
                    holds,
                });
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fidelity(state: &TwoRegisterKet, n: i64, target: i64) -> f64 {
        state.amplitude(&(Label(n), Label(target))).norm_sqr()
    }

    #[test]
    fn window_validation() {
        assert!(build_model(6).is_err());
        assert!(build_model(9).is_err());
        assert!(build_model(8).is_ok());
    }

    #[test]
    fn spectrum_is_symmetric_fourier_grid() {
        let model = build_model(16).unwrap();
        let spectrum = model.shift_generator_spectrum();
        let expected: Vec<f64> = (-7..=8).map(|k| 2.0 * PI * k as f64 / 16.0).collect();
        for (a, b) in spectrum.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-15, "{a} vs {b}");
        }
    }

    #[test]
    fn generator_matrix_is_hermitian_and_diagonalized_by_fourier_modes() {
        let model = build_model(16).unwrap();
        let v = model.shift_generator_matrix();
        assert!((&v - v.adjoint()).norm() < 1e-13);
        let d = 16;
        for k in 0..d {
            // plane wave e^{−2πikx/D}/√D
            let phi = DVector::from_fn(d, |x, _| {
                Complex64::from_polar(1.0 / 4.0, -2.0 * PI * (k * x) as f64 / 16.0)
            });
            let lhs = &v * &phi;
            let rhs = &phi * Complex64::new(model.mode_phase(k), 0.0);
            assert!((lhs - rhs).norm() < 1e-12);
        }
    }

    #[test]
    fn one_unit_of_evolution_is_one_shift() {
        let model = build_model(16).unwrap();
        let s = evolve_exact(&model, 1, 0, 1.0).unwrap();
        assert!((fidelity(&s, 1, 1) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn initial_condition_and_adder() {
        let model = build_model(16).unwrap();
        let s = evolve_exact(&model, 2, 3, 0.0).unwrap();
        assert_eq!(s, TwoRegisterKet::basis((Label(2), Label(3))));
        let s = evolve_exact(&model, 2, 3, 1.0).unwrap();
        assert!((fidelity(&s, 2, 5) - 1.0).abs() < 1e-9);
        assert!((s.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn partial_shift_spreads_over_neighbours() {
        let model = build_model(16).unwrap();
        // n·t = 0.5: halfway between labels 3 and 4
        let s = evolve_exact(&model, 2, 3, 0.25).unwrap();
        let f = fidelity(&s, 2, 5);
        assert!(f > 0.0 && f < 1.0, "{f}");
        assert!(fidelity(&s, 2, 3) > 0.3 && fidelity(&s, 2, 4) > 0.3);
        // n·t = 1 lands exactly on the intermediate label
        let s = evolve_exact(&model, 2, 3, 0.5).unwrap();
        assert!((fidelity(&s, 2, 4) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn inert_for_zero_control() {
        let model = build_model(16).unwrap();
        for t in [0.0, 0.37, 1.0, 2.5] {
            let s = evolve_exact(&model, 0, 5, t).unwrap();
            assert!((fidelity(&s, 0, 5) - 1.0).abs() < 1e-12);
            let b = subsystem_evolve(&model, 0, 5, t).unwrap();
            assert!((b.amplitude(&Label(5)).norm_sqr() - 1.0).abs() < 1e-12);
            let r = evolve_numeric(&model, 0, 5, t, 0.005).unwrap();
            assert!((fidelity(&r, 0, 5) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn state_holds_after_gate_time() {
        let model = build_model(32).unwrap();
        for t in [1.0, 1.2, 3.0] {
            let s = evolve_exact(&model, -4, 7, t).unwrap();
            assert!((fidelity(&s, -4, 3) - 1.0).abs() < 1e-9);
        }
        // with a permanent coupling the register keeps moving
        let always_on = build_model(32).unwrap().with_gate_time(None).unwrap();
        let s = evolve_exact(&always_on, 2, 3, 1.5).unwrap();
        assert!(fidelity(&s, 2, 5) < 1e-9);
        assert!((fidelity(&s, 2, 6) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn aliasing_guard() {
        let model = build_model(32).unwrap();
        assert_eq!(
            evolve_exact(&model, 20, 20, 1.0).unwrap_err(),
            Error::Aliasing { span: 40, half: 16 }
        );
        assert!(evolve_exact(&model, 8, -8, 1.0).is_err());
        assert!(evolve_exact(&model, 8, -7, 1.0).is_ok());
        assert!(subsystem_evolve(&model, 0, 16, 0.1).is_err());
        assert!(evolve_numeric(&model, 16, 0, 0.1, 0.005).is_err());
    }

    #[test]
    fn step_size_guard() {
        let model = build_model(16).unwrap();
        assert!(matches!(
            evolve_numeric(&model, 1, 1, 1.0, 0.02),
            Err(Error::StepSize { .. })
        ));
        assert!(matches!(
            evolve_numeric(&model, 1, 1, 1.0, 0.0),
            Err(Error::StepSize { .. })
        ));
    }

    #[test]
    fn runge_kutta_tracks_exact_propagator() {
        let model = build_model(16).unwrap();
        let run = evolve_numeric_run(&model, 2, 3, 1.0, 0.005).unwrap();
        let exact = evolve_exact(&model, 2, 3, 1.0).unwrap();
        assert!(run.state.distance(&exact) <= 1e-6);
        assert!(run.max_norm_deviation <= 1e-6);
    }

    #[test]
    fn subsystem_matches_super_system() {
        let model = build_model(32).unwrap();
        let sup = evolve_exact(&model, 3, 1, 0.7).unwrap();
        let sub = subsystem_evolve(&model, 3, 1, 0.7).unwrap();
        assert!(project_first(&sup, 3).unwrap().distance(&sub) <= 1e-9);
        assert_eq!(
            subsystem_evolve(&model, 3, 1, 0.0).unwrap(),
            Ket::basis(Label(1))
        );
    }

    #[test]
    fn nonzero_local_terms_use_dense_route() {
        let model = build_model(16)
            .unwrap()
            .with_hb(2, 0.3)
            .with_hb(-1, -0.2)
            .with_ha(2, 0.5);
        let sup = evolve_exact(&model, 2, 1, 0.8).unwrap();
        let sub = subsystem_evolve(&model, 2, 1, 0.8).unwrap();
        assert!(project_first(&sup, 2).unwrap().distance(&sub) <= 1e-9);
        let num = evolve_numeric(&model, 2, 1, 0.8, 0.002).unwrap();
        assert!(num.distance(&sup) <= 1e-6);
        assert!((sup.norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn superposed_control_entangles() {
        let model = build_model(16).unwrap();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let input = TwoRegisterKet::from_terms([
            ((Label(1), Label(2)), Amplitude::new(h, 0.0)),
            ((Label(3), Label(2)), Amplitude::new(h, 0.0)),
        ])
        .unwrap();
        let out = evolve_state(&model, &input, 1.0).unwrap();
        assert!((out.amplitude(&(Label(1), Label(3))).norm_sqr() - 0.5).abs() < 1e-9);
        assert!((out.amplitude(&(Label(3), Label(5))).norm_sqr() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn degenerate_coupling_rejected() {
        let model = build_model(16).unwrap();
        assert!(model.clone().with_va(3, 4.0).is_err());
        assert!(model.with_va(3, 3.5).is_ok());
    }

    #[test]
    fn stopping_time_for_example_pair() {
        let model = build_model(32).unwrap();
        let trace = detect_stopping_time(&model, 2, 3, 1e-3, 1.2).unwrap();
        let t = trace.stopping_time.unwrap();
        assert!((t - 1.0).abs() <= trace.grid_step(), "{t}");
        assert!(trace.min_fidelity_after_stop.unwrap() >= 1.0 - 1e-3);
        assert!(trace.max_off_target_after_stop.unwrap() <= 1e-3);
        let loose = detect_stopping_time(&model, 2, 3, 0.49, 1.2).unwrap();
        assert!(loose.stopping_time.unwrap() <= t);
        for (f, l) in trace.fidelity.iter().zip(&trace.leakage) {
            assert!((f + l - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn stopping_time_absent_without_switch_off() {
        let model = build_model(32).unwrap().with_gate_time(None).unwrap();
        let trace = detect_stopping_time(&model, 2, 3, 1e-3, 1.2).unwrap();
        assert_eq!(trace.stopping_time, None);
    }

    #[test]
    fn trivial_adder_stops_immediately() {
        let model = build_model(32).unwrap();
        let trace = detect_stopping_time(&model, 0, 5, 1e-3, 1.5).unwrap();
        assert_eq!(trace.stopping_time, Some(0.0));
    }

    #[test]
    fn numeric_trace_agrees_with_exact_trace() {
        let model = build_model(32).unwrap();
        let mut opts = TraceOptions::new(1e-3, 1.2);
        let exact = detect_stopping_time_with(&model, 2, 3, &opts).unwrap();
        opts.propagator = Propagator::Numeric { dt: 0.005 };
        let numeric = detect_stopping_time_with(&model, 2, 3, &opts).unwrap();
        for (a, b) in exact.fidelity.iter().zip(&numeric.fidelity) {
            assert!((a - b).abs() < 1e-6);
        }
        assert_eq!(exact.stopping_time, numeric.stopping_time);
    }

    #[test]
    fn trace_option_validation() {
        let model = build_model(32).unwrap();
        assert!(detect_stopping_time(&model, 1, 1, 0.0, 1.0).is_err());
        assert!(detect_stopping_time(&model, 1, 1, 0.5, 1.0).is_err());
        assert!(detect_stopping_time(&model, 1, 1, 0.1, 0.0).is_err());
        assert!(matches!(
            detect_stopping_time(&model, 10, 10, 0.1, 1.0),
            Err(Error::Aliasing { .. })
        ));
    }

    #[test]
    fn csv_format() {
        let model = build_model(16).unwrap();
        let mut opts = TraceOptions::new(1e-3, 1.0);
        opts.samples = 3;
        let trace = detect_stopping_time_with(&model, 1, 2, &opts).unwrap();
        let csv = trace.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "t,fidelity,leakage");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0.00000000000e0,0.00000000000e0,1.00000000000e0"));
        let json = serde_json::to_string(&trace.sidecar()).unwrap();
        assert!(json.contains("\"D\":16"));
        assert!(json.contains("\"T\":1.0"));
    }

    #[test]
    fn superadditivity_small_grid() {
        let model = build_model(32).unwrap();
        let rows = superadditivity_report(&model, 3, &[0], 1e-3, 1.2).unwrap();
        assert!(rows.iter().all(|r| r.holds));
        // |k| < |n| for n in -3..=3: 5 + 3 + 1 + 0 + 1 + 3 + 5
        assert_eq!(rows.len(), 18);
    }
}
