//! Property suites behind `qm-arith verify`.
//!
//! Every suite is deterministic for a given [`Config`] and seed: randomized
//! inputs come from a ChaCha stream and results are collected in a fixed
//! order, so two runs produce byte-identical JSON. Reports carry no timings.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::Value;

use crate::config::Config;
use crate::dynamics::{
    detect_stopping_time, evolve_exact, evolve_numeric_run, project_first, subsystem_evolve,
    superadditivity_report, TraceOptions,
};
use crate::error::{Error, Result};
use crate::gates::{
    apply_minus, apply_plus, apply_times_reversible, apply_times_strict, iterate_plus, GateKind,
};
use crate::hilbert::{basis_ket, tensor, Ket, Label, MultiKet, SparseState, TwoRegisterKet};
use crate::logic::{and_, not_, or_, truth_table, Bit, LogicOp};
use crate::termalg::{
    bijection_report, compile, enumerate_class, enumerate_up_to, evaluate_compiled, index_of,
    term_of, OpTerm, MAX_REPORT_CLASS,
};

/// Expected class-1 table, indices 3 through 18.
pub const GOLDEN_CLASS_ONE: [&str; 16] = [
    "P(M0,P(M0,M0))",
    "P(M0,T(M0,M0))",
    "P(P(M0,M0),M0)",
    "P(P(M0,M0),P(M0,M0))",
    "P(P(M0,M0),T(M0,M0))",
    "P(T(M0,M0),M0)",
    "P(T(M0,M0),P(M0,M0))",
    "P(T(M0,M0),T(M0,M0))",
    "T(M0,P(M0,M0))",
    "T(M0,T(M0,M0))",
    "T(P(M0,M0),M0)",
    "T(P(M0,M0),P(M0,M0))",
    "T(P(M0,M0),T(M0,M0))",
    "T(T(M0,M0),M0)",
    "T(T(M0,M0),P(M0,M0))",
    "T(T(M0,M0),T(M0,M0))",
];

/// Total number of dual-evaluation cases drawn over all terms.
pub const SWEEP_CAP: u64 = 50_000;
pub const SWEEP_RANGE: (i64, i64) = (-3, 3);
pub const RANDOM_STATES: usize = 100;
pub const MAX_SUPPORT: usize = 50;
const MAX_LISTED_FAILURES: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    Hilbert,
    Gates,
    Dynamics,
    Logic,
    Termalg,
    All,
}

impl Suite {
    pub const NAMES: [&'static str; 6] =
        ["hilbert", "gates", "dynamics", "logic", "termalg", "all"];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Hilbert => "hilbert",
            Suite::Gates => "gates",
            Suite::Dynamics => "dynamics",
            Suite::Logic => "logic",
            Suite::Termalg => "termalg",
            Suite::All => "all",
        }
    }

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Hilbert,
                Suite::Gates,
                Suite::Dynamics,
                Suite::Logic,
                Suite::Termalg,
            ],
            s => vec![s],
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "hilbert" => Suite::Hilbert,
            "gates" => Suite::Gates,
            "dynamics" => Suite::Dynamics,
            "logic" => Suite::Logic,
            "termalg" => Suite::Termalg,
            "all" => Suite::All,
            _ => {
                return Err(Error::Parse(format!(
                    "unknown suite '{s}', expected one of {}",
                    Suite::NAMES.join(", ")
                )))
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PropertyResult {
    pub suite: &'static str,
    pub name: &'static str,
    pub passed: bool,
    pub cases: u64,
    pub failures: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub worst: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub examples: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub suite: String,
    pub seed: u64,
    pub config: Config,
    pub passed: bool,
    pub failed: Vec<String>,
    pub properties: Vec<PropertyResult>,
}

impl Report {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

struct Check {
    suite: &'static str,
    name: &'static str,
    cases: u64,
    failures: u64,
    examples: Vec<String>,
    worst: Option<f64>,
    tolerance: Option<f64>,
    note: Option<&'static str>,
    detail: Option<Value>,
}

impl Check {
    fn new(suite: &'static str, name: &'static str) -> Self {
        Self {
            suite,
            name,
            cases: 0,
            failures: 0,
            examples: Vec::new(),
            worst: None,
            tolerance: None,
            note: None,
            detail: None,
        }
    }

    fn with_tolerance(mut self, tol: f64) -> Self {
        self.tolerance = Some(tol);
        self
    }

    fn case(&mut self, ok: bool, describe: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.fail(describe());
        }
    }

    fn fail(&mut self, what: String) {
        self.failures += 1;
        if self.examples.len() < MAX_LISTED_FAILURES {
            self.examples.push(what);
        }
    }

    /// Records a measured error against the tolerance.
    fn within(&mut self, value: f64, describe: impl FnOnce() -> String) {
        let tol = self.tolerance.expect("tolerance set");
        self.worst = Some(self.worst.map_or(value, |w| w.max(value)));
        self.case(value <= tol, || {
            format!("{} ({value:e} > {tol:e})", describe())
        });
    }

    /// Counts a case whose computation failed outright.
    fn result<T>(&mut self, r: Result<T>, describe: impl FnOnce() -> String) -> Option<T> {
        match r {
            Ok(v) => Some(v),
            Err(e) => {
                self.cases += 1;
                self.fail(format!("{}: {e}", describe()));
                None
            }
        }
    }

    fn finish(self) -> PropertyResult {
        PropertyResult {
            suite: self.suite,
            name: self.name,
            passed: self.failures == 0 && self.cases > 0,
            cases: self.cases,
            failures: self.failures,
            worst: self.worst,
            tolerance: self.tolerance,
            examples: self.examples,
            note: self.note,
            detail: self.detail,
        }
    }
}

/// Runs a suite and assembles its report.
pub fn run_suite(suite: Suite, cfg: &Config, seed: u64) -> Result<Report> {
    cfg.validate()?;
    let mut properties = Vec::new();
    for s in suite.members() {
        // each suite draws from its own stream so suites are reproducible alone
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(s as u64);
        properties.extend(match s {
            Suite::Hilbert => hilbert_suite(cfg, &mut rng),
            Suite::Gates => gates_suite(cfg, &mut rng),
            Suite::Dynamics => dynamics_suite(cfg)?,
            Suite::Logic => logic_suite(),
            Suite::Termalg => termalg_suite(cfg, seed)?,
            Suite::All => unreachable!(),
        });
    }
    let failed: Vec<String> = properties
        .iter()
        .filter(|p| !p.passed)
        .map(|p| format!("{}.{}", p.suite, p.name))
        .collect();
    Ok(Report {
        suite: suite.name().into(),
        seed,
        config: cfg.clone(),
        passed: failed.is_empty(),
        failed,
        properties,
    })
}

fn random_amplitude(rng: &mut impl Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

/// A normalized random state with between 1 and `MAX_SUPPORT` terms whose
/// keys come from `key`.
fn random_state<K: Ord + Clone, R: Rng>(
    rng: &mut R,
    mut key: impl FnMut(&mut R) -> K,
) -> SparseState<K> {
    loop {
        let support = rng.gen_range(1..=MAX_SUPPORT);
        let terms: Vec<(K, Complex64)> = (0..support)
            .map(|_| (key(rng), random_amplitude(rng)))
            .collect();
        if let Ok(s) = SparseState::from_terms(terms).and_then(|s| s.normalize()) {
            return s;
        }
    }
}

fn random_ket(rng: &mut impl Rng) -> Ket {
    random_state(rng, |r| Label(r.gen_range(-40..=40)))
}

fn random_pair_state(rng: &mut impl Rng, nonzero_first: bool) -> TwoRegisterKet {
    random_state(rng, |r| loop {
        let n: i64 = r.gen_range(-40..=40);
        if !(nonzero_first && n == 0) {
            return (Label(n), Label(r.gen_range(-40..=40)));
        }
    })
}

fn hilbert_suite(cfg: &Config, rng: &mut ChaCha8Rng) -> Vec<PropertyResult> {
    const S: &str = "hilbert";
    let window = 16i64;
    let mut out = Vec::new();

    let mut c = Check::new(S, "orthonormality");
    for n in -window..=window {
        for m in -window..=window {
            let ip = basis_ket(n).inner(&basis_ket(m));
            let expected = if n == m {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            };
            c.case(ip == expected, || format!("<{n}|{m}> = {ip}"));
        }
    }
    out.push(c.finish());

    let mut c = Check::new(S, "distance_constancy").with_tolerance(cfg.tolerance("norm"));
    for n in -window..=window {
        for m in -window..=window {
            if n != m {
                let d = basis_ket(n).distance(&basis_ket(m));
                c.within((d - SQRT_2).abs(), || format!("|{n}>,|{m}>"));
            }
        }
    }
    out.push(c.finish());

    let mut c = Check::new(S, "non_decomposability");
    c.note = Some("|n+m> differs from |(n-k)+m> + |k+m> for k != 0");
    for n in -6i64..=6 {
        for m in -6i64..=6 {
            for k in (-6i64..=6).filter(|&k| k != 0) {
                let whole = basis_ket(n + m);
                let split =
                    basis_ket(n - k + m).add_scaled(Complex64::new(1.0, 0.0), &basis_ket(k + m));
                let differs = whole.distance(&split) > 0.0;
                let lhs = n - k + m;
                let off_target = lhs != n + m && k + m != n + m;
                let norm_ok = !off_target || (split.norm() - 1.0).abs() > 0.4;
                c.case(differs && norm_ok, || format!("n={n} m={m} k={k}"));
            }
        }
    }
    out.push(c.finish());

    let mut c = Check::new(S, "tensor_inner_compatibility").with_tolerance(cfg.tolerance("inner"));
    for i in 0..RANDOM_STATES {
        let (a, b, x, y) = (
            random_ket(rng),
            random_ket(rng),
            random_ket(rng),
            random_ket(rng),
        );
        let lhs = tensor(&a, &b).inner(&tensor(&x, &y));
        let rhs = a.inner(&x) * b.inner(&y);
        c.within((lhs - rhs).norm(), || format!("sample {i}"));
        let n = tensor(&a, &b).norm();
        c.within((n - a.norm() * b.norm()).abs(), || {
            format!("sample {i} norm")
        });
    }
    out.push(c.finish());

    let mut c = Check::new(S, "normalization").with_tolerance(cfg.tolerance("norm"));
    for i in 0..RANDOM_STATES {
        let s = random_ket(rng).scale(Complex64::new(
            rng.gen_range(0.1..10.0),
            rng.gen_range(-3.0..3.0),
        ));
        match s.normalize() {
            Ok(u) => c.within((u.norm() - 1.0).abs(), || format!("sample {i}")),
            Err(e) => c.fail(format!("sample {i}: {e}")),
        }
    }
    let zero = Ket::zero().normalize();
    c.case(zero == Err(Error::DegenerateState), || {
        "zero state normalized".into()
    });
    out.push(c.finish());

    out
}

fn apply_any(gate: GateKind, s: &MultiKet) -> Result<MultiKet> {
    if gate == GateKind::TimesReversible {
        return apply_times_reversible(s);
    }
    let pair = TwoRegisterKet::try_from(s)?;
    let out = match gate {
        GateKind::Plus => apply_plus(&pair),
        GateKind::Minus => apply_minus(&pair),
        _ => apply_times_strict(&pair),
    }?;
    Ok(MultiKet::from(&out))
}

fn random_gate_input(gate: GateKind, rng: &mut impl Rng) -> MultiKet {
    let pair = random_pair_state(rng, gate == GateKind::TimesStrict);
    let m = MultiKet::from(&pair);
    if gate == GateKind::TimesReversible {
        m.with_register(0)
    } else {
        m
    }
}

fn gates_suite(cfg: &Config, rng: &mut ChaCha8Rng) -> Vec<PropertyResult> {
    const S: &str = "gates";
    let mut out = Vec::new();

    let mut c = Check::new(S, "label_maps");
    for n in -32i64..=32 {
        for m in -32i64..=32 {
            let (n128, m128) = (n as i128, m as i128);
            let input = tensor(&basis_ket(n), &basis_ket(m));
            let key = |s: Result<TwoRegisterKet>| {
                s.ok()
                    .and_then(|s| s.basis_key().ok().map(|&(a, b)| (a.0 as i128, b.0 as i128)))
            };
            c.case(key(apply_plus(&input)) == Some((n128, n128 + m128)), || {
                format!("PLUS ({n},{m})")
            });
            c.case(
                key(apply_minus(&input)) == Some((n128, m128 - n128)),
                || format!("MINUS ({n},{m})"),
            );
            if n == 0 {
                let e = apply_times_strict(&input);
                c.case(e == Err(Error::TimesDomain { label: 0 }), || {
                    format!("TIMES_STRICT ({n},{m}) accepted")
                });
            } else {
                c.case(
                    key(apply_times_strict(&input)) == Some((n128, n128 * m128)),
                    || format!("TIMES_STRICT ({n},{m})"),
                );
            }
            let triple =
                apply_times_reversible(&MultiKet::basis(&[n, m, 0])).and_then(|s| s.basis_labels());
            c.case(triple == Ok(vec![n, m, n * m]), || {
                format!("TIMES_REVERSIBLE ({n},{m},0)")
            });
        }
    }
    out.push(c.finish());

    let tol = cfg.tolerance("norm");
    let mut unitarity = Check::new(S, "norm_preservation").with_tolerance(tol);
    let mut linearity = Check::new(S, "linearity").with_tolerance(cfg.tolerance("linearity"));
    for gate in GateKind::ALL {
        for i in 0..RANDOM_STATES {
            let x = random_gate_input(gate, rng);
            let y = random_gate_input(gate, rng);
            let (a, b) = (random_amplitude(rng), random_amplitude(rng));
            let Some(gx) = unitarity.result(apply_any(gate, &x), || format!("{gate} sample {i}"))
            else {
                continue;
            };
            unitarity.within((gx.state().norm() - 1.0).abs(), || {
                format!("{gate} sample {i}")
            });
            let combo = MultiKet::new(x.width(), x.state().scale(a).add_scaled(b, y.state()));
            let lhs = combo.and_then(|c| apply_any(gate, &c));
            let rhs = apply_any(gate, &y).map(|gy| gx.state().scale(a).add_scaled(b, gy.state()));
            match (lhs, rhs) {
                (Ok(l), Ok(r)) => {
                    linearity.within(l.state().distance(&r), || format!("{gate} sample {i}"))
                }
                (Err(e), _) | (_, Err(e)) => linearity.fail(format!("{gate} sample {i}: {e}")),
            }
        }
    }
    out.push(unitarity.finish());
    out.push(linearity.finish());

    let mut c = Check::new(S, "inverse_pair").with_tolerance(tol);
    for i in 0..RANDOM_STATES {
        let x = random_pair_state(rng, false);
        match apply_plus(&x).and_then(|y| apply_minus(&y)) {
            Ok(back) => c.within(back.distance(&x), || format!("sample {i}")),
            Err(e) => c.fail(format!("sample {i}: {e}")),
        }
    }
    out.push(c.finish());

    let mut c = Check::new(S, "iterated_adder");
    c.note = Some("U+^(n-1)|m>|m> = |m>|nm>");
    for n in 1u64..=20 {
        for m in -20i64..=20 {
            let start = tensor(&basis_ket(m), &basis_ket(m));
            let got = iterate_plus(&start, n - 1);
            let expected = tensor(&basis_ket(m), &basis_ket(n as i64 * m));
            c.case(got.as_ref() == Ok(&expected), || format!("n={n} m={m}"));
        }
    }
    out.push(c.finish());

    out
}

/// `(n, m)` pairs with `|n| + |m| < D/2`.
pub fn window_pairs(window: usize) -> Vec<(i64, i64)> {
    let half = (window / 2) as i64;
    let mut pairs = Vec::new();
    for n in -half..=half {
        for m in -half..=half {
            if n.abs() + m.abs() < half {
                pairs.push((n, m));
            }
        }
    }
    pairs
}

/// The 10×10×5 grid used for the subsystem check, restricted to the window.
pub fn subsystem_grid(window: usize) -> Vec<(i64, i64, f64)> {
    const TIMES: [f64; 5] = [0.1, 0.35, 0.7, 1.0, 1.3];
    let half = (window / 2) as i64;
    let mut grid = Vec::new();
    for n in -5i64..=4 {
        for m in -4i64..=5 {
            if n.abs() + m.abs() < half {
                grid.extend(TIMES.iter().map(|&t| (n, m, t)));
            }
        }
    }
    grid
}

pub const SUPERADDITIVITY_N_MAX: i64 = 6;
pub const SUPERADDITIVITY_MS: [i64; 3] = [-3, 0, 3];

fn dynamics_suite(cfg: &Config) -> Result<Vec<PropertyResult>> {
    const S: &str = "dynamics";
    let model = cfg.model()?;
    let mut out = Vec::new();
    let pairs = window_pairs(cfg.window);

    let mut fid =
        Check::new(S, "exact_adder_fidelity").with_tolerance(cfg.tolerance("exact_fidelity"));
    let mut leak =
        Check::new(S, "exact_adder_leakage").with_tolerance(cfg.tolerance("exact_leakage"));
    let mut norm = Check::new(S, "exact_norm").with_tolerance(cfg.tolerance("exact_norm"));
    for &(n, m) in &pairs {
        let Some(s) = fid.result(evolve_exact(&model, n, m, 1.0), || format!("({n},{m})")) else {
            continue;
        };
        let f = s.amplitude(&(Label(n), Label(n + m))).norm_sqr();
        fid.within(1.0 - f, || format!("({n},{m})"));
        leak.within(s.norm_sqr() - f, || format!("({n},{m})"));
        norm.within((s.norm() - 1.0).abs(), || format!("({n},{m})"));
    }
    out.extend([fid.finish(), leak.finish(), norm.finish()]);

    let mut rk = Check::new(S, "numeric_agreement").with_tolerance(cfg.tolerance("numeric"));
    rk.note =
        Some("fourth-order Runge-Kutta at the configured dt against the exact propagator, t = 1");
    let mut rk_norm = Check::new(S, "numeric_norm").with_tolerance(cfg.tolerance("numeric"));
    for &(n, m) in &pairs {
        let exact = evolve_exact(&model, n, m, 1.0);
        let numeric = evolve_numeric_run(&model, n, m, 1.0, cfg.dt);
        match (exact, numeric) {
            (Ok(e), Ok(run)) => {
                rk.within(run.state.distance(&e), || format!("({n},{m})"));
                rk_norm.within(run.max_norm_deviation, || format!("({n},{m})"));
            }
            (Err(e), _) | (_, Err(e)) => rk.fail(format!("({n},{m}): {e}")),
        }
    }
    out.extend([rk.finish(), rk_norm.finish()]);

    let mut c = Check::new(S, "subsystem_agreement").with_tolerance(cfg.tolerance("subsystem"));
    for (n, m, t) in subsystem_grid(cfg.window) {
        let sup = evolve_exact(&model, n, m, t).and_then(|s| project_first(&s, n));
        match (sup, subsystem_evolve(&model, n, m, t)) {
            (Ok(a), Ok(b)) => c.within(a.distance(&b), || format!("({n},{m},{t})")),
            (Err(e), _) | (_, Err(e)) => c.fail(format!("({n},{m},{t}): {e}")),
        }
    }
    out.push(c.finish());

    let opts = TraceOptions {
        samples: cfg.samples,
        ..TraceOptions::new(cfg.epsilon, cfg.t_max)
    };
    let mut stop = Check::new(S, "stopping_time");
    stop.note = Some(
        "T within one grid step of 1.0 for n != 0; fidelity >= 1-eps and off-target <= eps past T",
    );
    let mut book =
        Check::new(S, "probability_bookkeeping").with_tolerance(cfg.tolerance("exact_fidelity"));
    let mut stop_pairs = Vec::new();
    for &m in &SUPERADDITIVITY_MS {
        for n in -SUPERADDITIVITY_N_MAX..=SUPERADDITIVITY_N_MAX {
            if n != 0 && n.abs() + m.abs() < (cfg.window / 2) as i64 {
                stop_pairs.push((n, m));
            }
        }
    }
    for (n, m) in stop_pairs {
        let trace = crate::dynamics::detect_stopping_time_with(&model, n, m, &opts);
        let Some(trace) = stop.result(trace, || format!("({n},{m})")) else {
            continue;
        };
        let step = trace.grid_step();
        match trace.stopping_time {
            Some(t) => {
                let after_ok = trace
                    .min_fidelity_after_stop
                    .is_some_and(|f| f >= 1.0 - cfg.epsilon)
                    && trace
                        .max_off_target_after_stop
                        .is_some_and(|o| o <= cfg.epsilon);
                stop.case((t - 1.0).abs() <= step && after_ok, || {
                    format!("({n},{m}): T = {t:.6}, step {step:.6}")
                });
            }
            None => stop.fail(format!("({n},{m}): no stopping time")),
        }
        for (i, (&f, &l)) in trace.fidelity.iter().zip(&trace.leakage).enumerate() {
            book.within((f + l - 1.0).abs(), || format!("({n},{m}) sample {i}"));
        }
    }
    out.extend([stop.finish(), book.finish()]);

    let mut c = Check::new(S, "superadditivity");
    c.note = Some("measured property of the chosen model: T(n-k,m) + T(k,m) >= T(n,m)");
    let ms: Vec<i64> = SUPERADDITIVITY_MS
        .iter()
        .copied()
        .filter(|m| SUPERADDITIVITY_N_MAX + m.abs() < (cfg.window / 2) as i64)
        .collect();
    let rows = superadditivity_report(&model, SUPERADDITIVITY_N_MAX, &ms, cfg.epsilon, cfg.t_max)?;
    for r in &rows {
        c.case(r.holds, || format!("n={} k={} m={}", r.n, r.k, r.m));
    }
    c.detail = Some(serde_json::to_value(&rows).expect("rows serialize"));
    out.push(c.finish());

    let mut c = Check::new(S, "looser_threshold_monotone");
    for &(n, m) in &[(2, 3), (1, 0), (-3, 2)] {
        let tight =
            detect_stopping_time(&model, n, m, cfg.epsilon, cfg.t_max).map(|t| t.stopping_time);
        let loose = detect_stopping_time(&model, n, m, 0.49, cfg.t_max).map(|t| t.stopping_time);
        let ok = matches!((tight, loose), (Ok(Some(a)), Ok(Some(b))) if b <= a);
        c.case(ok, || format!("({n},{m})"));
    }
    out.push(c.finish());

    Ok(out)
}

fn logic_suite() -> Vec<PropertyResult> {
    const S: &str = "logic";
    let mut out = Vec::new();

    let mut c = Check::new(S, "truth_tables");
    c.note = Some("each row checked by arithmetic and by the compiled gate program");
    for op in LogicOp::ALL {
        match truth_table(op) {
            Ok(rows) => {
                for r in rows {
                    let v: Vec<i64> = r.inputs.iter().map(|b| b.value()).collect();
                    let expected = match v.as_slice() {
                        [p] => 1 - p,
                        [p, q] if op == LogicOp::And => p * q,
                        [p, q] => p + q - p * q,
                        _ => unreachable!(),
                    };
                    c.case(r.arithmetic.value() == expected, || {
                        format!("{op} {v:?} arithmetic")
                    });
                    c.case(r.gates.value() == expected, || format!("{op} {v:?} gates"));
                }
            }
            Err(e) => c.fail(format!("{op}: {e}")),
        }
    }
    out.push(c.finish());

    let mut c = Check::new(S, "de_morgan");
    for p in Bit::ALL {
        for q in Bit::ALL {
            c.case(not_(and_(p, q)) == or_(not_(p), not_(q)), || {
                format!("({p},{q})")
            });
        }
    }
    out.push(c.finish());

    let mut c = Check::new(S, "non_bits_rejected");
    for v in [-1i64, 2, 5] {
        for op in LogicOp::ALL {
            let args = vec![v; op.arity()];
            c.case(op.eval(&args) == Err(Error::NotABit(v)), || {
                format!("{op} {v} arithmetic")
            });
            c.case(op.eval_gates(&args) == Err(Error::NotABit(v)), || {
                format!("{op} {v} gates")
            });
        }
    }
    out.push(c.finish());

    out
}

/// All argument tuples over `range` for `arity` leaves in lexicographic order,
/// addressed by position.
fn tuple_at(range: (i64, i64), arity: usize, mut index: u64) -> Vec<i64> {
    let base = (range.1 - range.0 + 1) as u64;
    let mut out = vec![0; arity];
    for slot in out.iter_mut().rev() {
        *slot = range.0 + (index % base) as i64;
        index /= base;
    }
    out
}

/// Planned dual-evaluation cases: `(term position, arguments)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepPlan {
    pub cases: Vec<(usize, Vec<i64>)>,
    pub full_product: u128,
    pub exhaustive_terms: usize,
    pub sampled_terms: usize,
}

/// Chooses argument tuples from `range` for every term.
///
/// When the full product fits in `cap` every tuple is used. Otherwise the cap
/// is shared out: terms are visited from fewest to most tuples, each taking
/// at most an even share of what is left, so small terms run exhaustively and
/// the rest are sampled without replacement from a seeded stream.
pub fn sweep_plan(terms: &[OpTerm], range: (i64, i64), cap: u64, seed: u64) -> SweepPlan {
    let base = (range.1 - range.0 + 1) as u128;
    let products: Vec<u128> = terms.iter().map(|t| base.pow(t.arity() as u32)).collect();
    let full_product: u128 = products.iter().sum();
    let mut order: Vec<usize> = (0..terms.len()).collect();
    order.sort_by_key(|&i| (products[i], i));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut budget = cap as u128;
    let mut per_term: Vec<Vec<Vec<i64>>> = vec![Vec::new(); terms.len()];
    let (mut exhaustive_terms, mut sampled_terms) = (0, 0);
    for (visited, &i) in order.iter().enumerate() {
        let arity = terms[i].arity();
        let share = if full_product <= cap as u128 {
            products[i]
        } else {
            budget / (terms.len() - visited) as u128
        };
        let take = products[i].min(share.max(1));
        budget = budget.saturating_sub(take);
        if take == products[i] {
            exhaustive_terms += 1;
            per_term[i] = (0..products[i] as u64)
                .map(|k| tuple_at(range, arity, k))
                .collect();
        } else {
            sampled_terms += 1;
            let mut picks = sample(&mut rng, products[i] as usize, take as usize).into_vec();
            picks.sort_unstable();
            per_term[i] = picks
                .into_iter()
                .map(|k| tuple_at(range, arity, k as u64))
                .collect();
        }
    }
    let cases = per_term
        .into_iter()
        .enumerate()
        .flat_map(|(i, v)| v.into_iter().map(move |a| (i, a)))
        .collect();
    SweepPlan {
        cases,
        full_product,
        exhaustive_terms,
        sampled_terms,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepSummary {
    pub terms: usize,
    pub cases: usize,
    pub full_product: String,
    pub exhaustive_terms: usize,
    pub sampled_terms: usize,
    pub disagreements: usize,
}

/// Gate-vs-oracle evaluation over a plan; returns the summary and the
/// descriptions of any disagreements.
pub fn dual_evaluation_sweep(terms: &[OpTerm], plan: &SweepPlan) -> (SweepSummary, Vec<String>) {
    let compiled: Vec<_> = terms.iter().map(compile).collect();
    let mut bad = Vec::new();
    for (i, args) in &plan.cases {
        match evaluate_compiled(&terms[*i], &compiled[*i], args) {
            Ok(r) if r.agree => {}
            Ok(r) => bad.push(format!(
                "{} {args:?}: gate {} oracle {}",
                terms[*i], r.gate_result, r.oracle_result
            )),
            Err(e) => bad.push(format!("{} {args:?}: {e}", terms[*i])),
        }
    }
    let summary = SweepSummary {
        terms: terms.len(),
        cases: plan.cases.len(),
        full_product: plan.full_product.to_string(),
        exhaustive_terms: plan.exhaustive_terms,
        sampled_terms: plan.sampled_terms,
        disagreements: bad.len(),
    };
    (summary, bad)
}

fn termalg_suite(cfg: &Config, seed: u64) -> Result<Vec<PropertyResult>> {
    const S: &str = "termalg";
    let bound = cfg.class_bound.min(MAX_REPORT_CLASS);
    let mut out = Vec::new();

    let mut c = Check::new(S, "golden_class_one");
    let got = enumerate_class(1, 16);
    c.case(got.len() == 16, || format!("{} entries", got.len()));
    for (i, (entry, want)) in got.iter().zip(GOLDEN_CLASS_ONE).enumerate() {
        let delta = i as u128 + 3;
        c.case(
            entry.term.to_string() == want && entry.delta == delta && entry.klass == 1,
            || format!("M{delta}: got {} at {}", entry.term, entry.delta),
        );
    }
    let zero: Vec<String> = enumerate_class(0, 10)
        .iter()
        .map(|e| e.term.to_string())
        .collect();
    c.case(zero == ["M0", "P(M0,M0)", "T(M0,M0)"], || {
        format!("class 0 = {zero:?}")
    });
    out.push(c.finish());

    let mut c = Check::new(S, "bijection");
    let report = bijection_report(bound)?;
    c.cases = report.total;
    c.failures = report.collisions + report.falsifications.len() as u64;
    c.examples = report
        .falsifications
        .iter()
        .take(MAX_LISTED_FAILURES)
        .map(|f| format!("{f:?}"))
        .collect();
    c.detail = Some(serde_json::json!({
        "max_class": report.max_class,
        "counts_per_class": report.counts_per_class,
        "total": report.total,
        "collisions": report.collisions,
    }));
    out.push(c.finish());

    let mut c = Check::new(S, "unrank_round_trip");
    for d in 0u128..=10_000 {
        let back = term_of(d).and_then(|t| index_of(&t));
        c.case(back == Ok(d), || format!("{d} -> {back:?}"));
    }
    out.push(c.finish());

    let mut c = Check::new(S, "distinct_terms_equal_values");
    let (m3, m5) = (term_of(3)?, term_of(5)?);
    c.case(m3 != m5, || "M3 == M5 structurally".into());
    for k in 0..343 {
        let args = tuple_at(SWEEP_RANGE, 3, k);
        let same = crate::termalg::evaluate_oracle(&m3, &args)?
            == crate::termalg::evaluate_oracle(&m5, &args)?;
        c.case(same, || format!("{args:?}"));
    }
    out.push(c.finish());

    let mut c = Check::new(S, "dual_evaluation_class_le_1");
    let small = enumerate_up_to(1.min(bound));
    let plan = sweep_plan(&small, SWEEP_RANGE, u64::MAX, seed);
    let (summary, bad) = dual_evaluation_sweep(&small, &plan);
    c.cases = summary.cases as u64;
    for b in bad {
        c.fail(b);
    }
    out.push(c.finish());

    let mut c = Check::new(S, "dual_evaluation_sweep");
    c.note = Some("class <= bound, arguments in -3..=3, at most 50000 cases shared over all terms");
    let terms = enumerate_up_to(bound);
    let plan = sweep_plan(&terms, SWEEP_RANGE, SWEEP_CAP, seed);
    let (summary, bad) = dual_evaluation_sweep(&terms, &plan);
    c.cases = summary.cases as u64;
    for b in bad {
        c.fail(b);
    }
    c.detail = Some(serde_json::to_value(&summary).expect("summary serialize"));
    out.push(c.finish());

    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        for name in Suite::NAMES {
            assert_eq!(name.parse::<Suite>().unwrap().name(), name);
        }
        assert!(matches!("bogus".parse::<Suite>(), Err(Error::Parse(_))));
    }

    #[test]
    fn tuples_are_lexicographic() {
        assert_eq!(tuple_at((-3, 3), 2, 0), [-3, -3]);
        assert_eq!(tuple_at((-3, 3), 2, 1), [-3, -2]);
        assert_eq!(tuple_at((-3, 3), 2, 48), [3, 3]);
    }

    #[test]
    fn plan_is_exhaustive_under_cap() {
        let terms = enumerate_up_to(0);
        let plan = sweep_plan(&terms, (-3, 3), 1000, 0);
        assert_eq!(plan.cases.len(), 7 + 49 + 49);
        assert_eq!(plan.sampled_terms, 0);
    }

    #[test]
    fn plan_respects_cap_and_seed() {
        let terms = enumerate_up_to(1);
        let a = sweep_plan(&terms, (-3, 3), 2000, 7);
        let b = sweep_plan(&terms, (-3, 3), 2000, 7);
        let c = sweep_plan(&terms, (-3, 3), 2000, 8);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.cases.len() <= 2000);
        let covered: std::collections::BTreeSet<usize> = a.cases.iter().map(|(i, _)| *i).collect();
        assert_eq!(covered.len(), terms.len());
    }

    #[test]
    fn logic_suite_passes() {
        assert!(logic_suite().iter().all(|p| p.passed));
    }
}
