//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed check or internal error, 2 bad input
//! (syntax, unknown names, invalid configuration), 3 gate domain error,
//! 4 aliasing guard violation.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::Config;
use crate::dynamics::{detect_stopping_time_with, Propagator, TraceOptions};
use crate::error::Error;
use crate::gates::{GateKind, Step};
use crate::hilbert::{MultiKet, StateFile};
use crate::logic::{format_truth_table, truth_table, LogicOp};
use crate::termalg::{enumerate_class, evaluate_gates, term_of, OpTerm};
use crate::verify::{run_suite, Suite};

#[derive(Debug, Parser)]
#[command(
    name = "qm-arith",
    version,
    about = "Quantum-mechanical arithmetic simulator and term algebra"
)]
pub struct Cli {
    #[command(flatten)]
    pub overrides: Overrides,

    #[command(subcommand)]
    pub command: Command,
}

/// Settings that override the config file.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// JSON config file; flags take precedence over its values
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Ring size D of the target register
    #[arg(short = 'D', long = "window", global = true)]
    pub window: Option<usize>,

    #[arg(long, global = true)]
    pub epsilon: Option<f64>,

    /// Runge-Kutta step
    #[arg(long, global = true)]
    pub dt: Option<f64>,

    #[arg(long, global = true)]
    pub t_max: Option<f64>,

    /// Number of trace samples
    #[arg(long, global = true)]
    pub samples: Option<usize>,

    #[arg(long, global = true)]
    pub class_bound: Option<usize>,

    /// Time after which the interaction is switched off
    #[arg(long, global = true, conflicts_with = "always_on")]
    pub gate_time: Option<f64>,

    /// Keep the interaction on for the whole trace
    #[arg(long, global = true)]
    pub always_on: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Apply one gate to a state file and print the result
    Apply {
        /// PLUS, MINUS, TIMES_STRICT or TIMES_REVERSIBLE
        gate: String,
        state: PathBuf,
    },
    /// Fidelity trace of the Hamiltonian adder
    Evolve {
        #[arg(allow_negative_numbers = true)]
        n: i64,
        #[arg(allow_negative_numbers = true)]
        m: i64,
        /// Use the Runge-Kutta integrator instead of the exact propagator
        #[arg(long)]
        numeric: bool,
        /// Write PREFIX.csv and PREFIX.json instead of stdout/stderr
        #[arg(long, value_name = "PREFIX")]
        out: Option<PathBuf>,
    },
    /// List terms of one class with their indices
    Enumerate {
        class: usize,
        limit: Option<usize>,
        #[arg(long)]
        json: bool,
    },
    /// Evaluate a term (syntax or index) by gates and by exact arithmetic
    Eval {
        term: String,
        #[arg(allow_negative_numbers = true)]
        args: Vec<i64>,
        #[arg(long)]
        json: bool,
    },
    /// Truth table of NOT, AND or OR
    TruthTable { op: String },
    /// Run a property suite and print a JSON report
    Verify {
        #[arg(default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Failure with its exit code; the message goes to the error stream.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure {
            code: exit_code(&e),
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure {
            code: 1,
            message: e.to_string(),
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e.root() {
        Error::Parse(_)
        | Error::Config(_)
        | Error::StepSize { .. }
        | Error::ArityMismatch { .. }
        | Error::NotABit(_)
        | Error::RegisterMismatch { .. }
        | Error::BadRoles { .. }
        | Error::NonFiniteAmplitude { .. }
        | Error::DegenerateState => 2,
        Error::TimesDomain { .. } | Error::AncillaNotZero { .. } | Error::LabelOverflow { .. } => 3,
        Error::Aliasing { .. } => 4,
        _ => 1,
    }
}

/// Resolves defaults, then the config file, then flags.
pub fn resolve_config(o: &Overrides) -> Result<Config, Error> {
    let mut cfg = match &o.config {
        Some(path) => Config::load(path)?,
        None => Config::default(),
    };
    if let Some(v) = o.window {
        cfg.window = v;
    }
    if let Some(v) = o.epsilon {
        cfg.epsilon = v;
    }
    if let Some(v) = o.dt {
        cfg.dt = v;
    }
    if let Some(v) = o.t_max {
        cfg.t_max = v;
    }
    if let Some(v) = o.samples {
        cfg.samples = v;
    }
    if let Some(v) = o.class_bound {
        cfg.class_bound = v;
    }
    if o.gate_time.is_some() {
        cfg.gate_time = o.gate_time;
    }
    if o.always_on {
        cfg.gate_time = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path).map_err(|e| Failure {
        code: 2,
        message: format!("cannot read {}: {e}", path.display()),
    })
}

/// Parses arguments and runs the command. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 {
                out.write_all(text.as_bytes())
            } else {
                err.write_all(text.as_bytes())
            };
            return code;
        }
    };
    match execute(&cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}

fn execute(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match &cli.command {
        Command::Apply { gate, state } => {
            let gate: GateKind = gate.parse()?;
            let ket = StateFile::parse(&read(state)?)?.to_ket()?;
            let result = apply_gate(gate, &ket)?;
            writeln!(out, "{}", StateFile::from_ket(&result).to_json())?;
            Ok(0)
        }
        Command::Evolve {
            n,
            m,
            numeric,
            out: prefix,
        } => {
            let cfg = resolve_config(&cli.overrides)?;
            let model = cfg.model()?;
            let propagator = if *numeric {
                Propagator::Numeric { dt: cfg.dt }
            } else {
                Propagator::Exact
            };
            let opts = TraceOptions {
                samples: cfg.samples,
                propagator,
                ..TraceOptions::new(cfg.epsilon, cfg.t_max)
            };
            let trace = detect_stopping_time_with(&model, *n, *m, &opts)?;
            let sidecar =
                serde_json::to_string_pretty(&trace.sidecar()).expect("sidecar serialization");
            match prefix {
                Some(p) => {
                    std::fs::write(with_suffix(p, "csv"), trace.to_csv())?;
                    std::fs::write(with_suffix(p, "json"), sidecar + "\n")?;
                }
                None => {
                    out.write_all(trace.to_csv().as_bytes())?;
                    writeln!(err, "{sidecar}")?;
                }
            }
            Ok(0)
        }
        Command::Enumerate { class, limit, json } => {
            let cfg = resolve_config(&cli.overrides)?;
            if *class > cfg.class_bound {
                return Err(Error::Config(format!(
                    "class {class} exceeds class_bound {}",
                    cfg.class_bound
                ))
                .into());
            }
            let entries = enumerate_class(*class, limit.unwrap_or(usize::MAX));
            if *json {
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string_pretty(&entries).expect("entries serialization")
                )?;
            } else {
                for e in &entries {
                    writeln!(out, "M{:<6} {}  {}", e.delta, e.term, e.term.infix())?;
                }
            }
            Ok(0)
        }
        Command::Eval { term, args, json } => {
            let term = parse_term_or_index(term)?;
            let report = evaluate_gates(&term, args)?;
            if *json {
                writeln!(
                    out,
                    "{}",
                    serde_json::to_string_pretty(&report).expect("report serialization")
                )?;
            } else {
                writeln!(out, "term   {}  {}", report.term, report.term.infix())?;
                writeln!(out, "args   {:?}", report.args)?;
                writeln!(out, "gate   {}", report.gate_result)?;
                writeln!(out, "oracle {}", report.oracle_result)?;
                writeln!(out, "agree  {}", report.agree)?;
            }
            Ok(if report.agree { 0 } else { 1 })
        }
        Command::TruthTable { op } => {
            let op: LogicOp = op.parse()?;
            let rows = truth_table(op)?;
            out.write_all(format_truth_table(op, &rows).as_bytes())?;
            let disagree: Vec<_> = rows.iter().filter(|r| r.arithmetic != r.gates).collect();
            for r in &disagree {
                writeln!(err, "gate program disagrees on {:?}", r.inputs)?;
            }
            Ok(if disagree.is_empty() { 0 } else { 1 })
        }
        Command::Verify { suite, seed } => {
            let suite: Suite = suite.parse()?;
            let cfg = resolve_config(&cli.overrides)?;
            let report = run_suite(suite, &cfg, *seed)?;
            writeln!(out, "{}", report.to_json())?;
            if !report.passed {
                writeln!(err, "failed: {}", report.failed.join(", "))?;
            }
            Ok(if report.passed { 0 } else { 1 })
        }
    }
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// `TIMES_REVERSIBLE` on a two-register state gets a fresh `|0⟩` ancilla.
pub fn apply_gate(gate: GateKind, ket: &MultiKet) -> Result<MultiKet, Error> {
    let input = if gate == GateKind::TimesReversible && ket.width() == 2 {
        ket.with_register(0)
    } else {
        ket.clone()
    };
    let roles: Vec<usize> = (0..gate.arity()).collect();
    if input.width() != gate.arity() {
        return Err(Error::RegisterMismatch {
            expected: gate.arity(),
            found: input.width(),
        });
    }
    Step::new(gate, &roles).apply(&input)
}

/// A decimal index or the `M0`/`P(..)`/`T(..)` syntax.
pub fn parse_term_or_index(text: &str) -> Result<OpTerm, Error> {
    let text = text.trim();
    if text.chars().all(|c| c.is_ascii_digit()) && !text.is_empty() {
        let index: u128 = text
            .parse()
            .map_err(|e| Error::Parse(format!("index '{text}': {e}")))?;
        term_of(index).map_err(|e| Error::Parse(e.to_string()))
    } else {
        text.parse()
    }
}
