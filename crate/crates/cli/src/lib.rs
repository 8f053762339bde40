//! `hcplus`: parse → desugar → (translate) → ground → {emit | plan | validate | dump}.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use hybrid_cplus::desugar::{expand_abbreviations, DesugarError};
use hybrid_cplus::emit::{emit_script, EmitError};
use hybrid_cplus::frontend::{parse_description, parse_ha, print_program, ParseError};
use hybrid_cplus::ground::{build_Dm, complete, CompletedSystem, GroundError};
use hybrid_cplus::ir::automaton::{Flow, HybridAutomaton};
use hybrid_cplus::ir::formula::Formula;
use hybrid_cplus::ir::law::Program;
use hybrid_cplus::ir::plan::{Plan, PlanJsonError};
use hybrid_cplus::ir::value::{parse_rat, parse_value, Value};
use hybrid_cplus::lraplan::{plan, plan_table, PlanError};
use hybrid_cplus::odecheck::{validate_ha, validate_plan, OdeError, OdeOptions, Verdict};
use hybrid_cplus::translate::{translate, TranslateError, TranslationOptions, Variant};
use thiserror::Error;

#[derive(Debug, Parser)]
#[command(name = "hcplus", version, about = "Hybrid automata in C+ modulo ODE")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a dReal SMT-LIB script for the bounded query.
    Emit {
        #[command(flatten)]
        input: Input,
        /// Output file; stdout by default.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Find a plan exactly (linear flows only).
    Plan {
        #[command(flatten)]
        input: Input,
        /// Also write the plan as JSON.
        #[arg(long, value_name = "FILE")]
        plan_json: Option<PathBuf>,
    },
    /// Check a plan numerically against the description.
    Validate {
        #[command(flatten)]
        input: Input,
        /// Plan JSON file.
        #[arg(long, value_name = "FILE")]
        plan: PathBuf,
        /// Tolerance on equalities and invariant margins.
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
        /// Fixed RK4 step; derived from each duration by default.
        #[arg(long)]
        h: Option<f64>,
        /// Per-sample trajectory CSV.
        #[arg(long, value_name = "FILE")]
        trace: Option<PathBuf>,
        /// Print the report as JSON.
        #[arg(long)]
        json: bool,
        /// Check the description's constraints only.
        #[arg(long)]
        ignore_query: bool,
    },
    /// Print an intermediate form.
    Dump {
        #[arg(value_enum)]
        what: DumpKind,
        #[command(flatten)]
        input: Input,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DumpKind {
    /// The description in `.cp` syntax.
    Cplus,
    /// Basic causal laws after abbreviation expansion.
    Basic,
    /// Time-stamped ground rules of the horizon.
    Aspmt,
    /// Completion constraints of the horizon.
    Completion,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum VariantArg {
    Linear,
    Witness,
    Ode,
}

#[derive(Debug, Args)]
struct Input {
    /// `.cp` action description or `.json` hybrid automaton.
    input: PathBuf,
    /// `NAME=VALUE` for a symbolic constant, `maxstep` or `query`.
    #[arg(short = 'c', value_name = "NAME=VALUE")]
    consts: Vec<String>,
    /// Translation of a `.json` automaton; follows its flow form by default.
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Upper bound on `duration` in translated automata.
    #[arg(long, value_name = "R")]
    dur_bound: Option<String>,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read { path: String, source: std::io::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Desugar(#[from] DesugarError),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Ground(#[from] GroundError),
    #[error(transparent)]
    Emit(#[from] EmitError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error(transparent)]
    PlanJson(#[from] PlanJsonError),
    #[error(transparent)]
    Ode(#[from] OdeError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Write { .. } | CliError::Plan(PlanError::Internal(_)) => 3,
            CliError::Emit(EmitError::UnboundParam(_)) => 2,
            CliError::Emit(_) => 3,
            CliError::Ode(OdeError::UnknownLabel(_) | OdeError::Dimension(_) | OdeError::NonFluent(_) | OdeError::MissingFlow(_)) => 2,
            CliError::Ode(_) => 3,
            _ => 2,
        }
    }
}

/// Result of a successful command: 0 for found/valid/emitted, 1 for unsat/invalid.
type Status = Result<i32, CliError>;

/// Runs `hcplus` with `args` (program name first) and returns the exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match execute(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

/// The loaded input with `-c` settings applied.
struct Loaded {
    program: Program,
    automaton: Option<HybridAutomaton>,
    values: BTreeMap<String, Value>,
    query_label: Option<String>,
    maxstep: Option<u32>,
}

impl Loaded {
    fn query(&self) -> Result<Vec<Formula>, CliError> {
        match (&self.query_label, self.program.queries.is_empty()) {
            (None, true) => Ok(vec![]),
            (label, _) => match self.program.query(label.as_deref()) {
                Some(q) => Ok(q.constraints.clone()),
                None => Err(CliError::Usage(format!(
                    "no query labelled `{}`; available: {}",
                    label.as_deref().unwrap_or_default(),
                    list(self.program.queries.iter().map(|q| q.label.clone()))
                ))),
            },
        }
    }

    fn maxstep(&self) -> Result<u32, CliError> {
        let from_query = self.program.query(self.query_label.as_deref()).and_then(|q| q.maxstep);
        self.maxstep.or(from_query).ok_or_else(|| CliError::Usage("no horizon; supply -c maxstep=N".into()))
    }

    /// Requires every symbolic constant to have a value.
    fn require_values(&self) -> Result<(), CliError> {
        let missing: Vec<String> = self.program.params().into_iter().filter(|p| !self.values.contains_key(p)).collect();
        if missing.is_empty() {
            Ok(())
        } else {
            Err(CliError::Usage(format!("no value for symbolic constants {}; supply -c NAME=VALUE", missing.join(", "))))
        }
    }

    fn system(&self) -> Result<(CompletedSystem, Vec<Formula>), CliError> {
        self.require_values()?;
        let query = self.query()?;
        let b = expand_abbreviations(&self.program.description)?;
        Ok((complete(&build_Dm(&b, self.maxstep()?))?, query))
    }
}

fn list(it: impl Iterator<Item = String>) -> String {
    let v: Vec<String> = it.collect();
    if v.is_empty() {
        "(none)".into()
    } else {
        v.join(", ")
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.display().to_string(), source })
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Write { path: path.display().to_string(), source })
}

fn load(input: &Input) -> Result<Loaded, CliError> {
    let text = read(&input.input)?;
    let file = input.input.display().to_string();
    let is_json = input.input.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    let (program, automaton) = if is_json {
        let h = parse_ha(&text, &file)?;
        let variant = match input.variant {
            Some(VariantArg::Linear) => Variant::Linear,
            Some(VariantArg::Witness) => Variant::Witness,
            Some(VariantArg::Ode) => Variant::Ode,
            None if matches!(h.flow, Flow::Ode(_)) => Variant::Ode,
            None => Variant::Linear,
        };
        let dur_bound = match &input.dur_bound {
            Some(s) => Some(parse_rat(s).ok_or_else(|| CliError::Usage(format!("--dur-bound `{s}` is not a rational")))?),
            None => None,
        };
        let opts = TranslationOptions { variant, include_init: true, dur_bound };
        (translate(&h, &opts)?, Some(h))
    } else {
        if input.variant.is_some() || input.dur_bound.is_some() {
            return Err(CliError::Usage("--variant and --dur-bound apply to .json automata only".into()));
        }
        (parse_description(&text, &file)?, None)
    };
    let declared = program.params();
    let mut loaded = Loaded { program, automaton, values: BTreeMap::new(), query_label: None, maxstep: None };
    for c in &input.consts {
        let Some((name, value)) = c.split_once('=') else {
            return Err(CliError::Usage(format!("-c expects NAME=VALUE, got `{c}`")));
        };
        let (name, value) = (name.trim(), value.trim());
        match name {
            "maxstep" => {
                let n = value.parse().map_err(|_| CliError::Usage(format!("maxstep `{value}` is not a natural number")))?;
                loaded.maxstep = Some(n);
            }
            "query" => loaded.query_label = Some(value.to_string()),
            _ if declared.contains(name) => {
                if value.is_empty() || !(parse_rat(value).is_some() || value.chars().all(|ch| ch.is_alphanumeric() || ch == '_')) {
                    return Err(CliError::Usage(format!("value `{value}` of {name} is neither a rational nor an identifier")));
                }
                loaded.values.insert(name.to_string(), parse_value(value));
            }
            _ => {
                return Err(CliError::Usage(format!(
                    "unknown constant `{name}`; declared symbols: {} (and maxstep, query)",
                    list(declared.iter().cloned())
                )))
            }
        }
    }
    loaded.program = loaded.program.substitute_params(&loaded.values);
    loaded.automaton = loaded.automaton.map(|h| h.substitute_params(&loaded.values));
    Ok(loaded)
}

fn write_out(out: &mut dyn Write, text: &str) -> Result<(), CliError> {
    out.write_all(text.as_bytes()).map_err(|source| CliError::Write { path: "stdout".into(), source })
}

fn execute(command: Command, out: &mut dyn Write, err: &mut dyn Write) -> Status {
    match command {
        Command::Emit { input, output } => {
            let l = load(&input)?;
            let (cs, query) = l.system()?;
            let script = emit_script(&cs, &query)?.to_string();
            match output {
                Some(p) => write_file(&p, &script)?,
                None => write_out(out, &script)?,
            }
            Ok(0)
        }
        Command::Plan { input, plan_json } => {
            let l = load(&input)?;
            let (cs, query) = l.system()?;
            let res = plan(&cs, &query)?;
            let _ = writeln!(err, "candidates: {}, solver calls: {}", res.stats.candidates, res.stats.solver_calls);
            match res.plan() {
                Some(p) => {
                    write_out(out, &plan_table(p))?;
                    if let Some(path) = plan_json {
                        let text = serde_json::to_string_pretty(&p.to_json()).expect("plan JSON serializes");
                        write_file(&path, &(text + "\n"))?;
                    }
                    Ok(0)
                }
                None => {
                    write_out(out, "unsat\n")?;
                    Ok(1)
                }
            }
        }
        Command::Validate { input, plan: plan_path, delta, h, trace, json, ignore_query } => {
            let l = load(&input)?;
            let text = read(&plan_path)?;
            let value: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("{}: {e}", plan_path.display())))?;
            let p = Plan::from_json(&value)?;
            if delta.is_nan() || delta < 0.0 || h.is_some_and(|h| h.is_nan() || h <= 0.0) {
                return Err(CliError::Usage("--delta must be non-negative and --h positive".into()));
            }
            let opts = OdeOptions { h, ..OdeOptions::new(delta) };
            let report = match &l.automaton {
                Some(ha) => {
                    l.require_values()?;
                    let goals = match &ha.query {
                        Some(q) if !ignore_query => q.constraints.clone(),
                        _ => vec![],
                    };
                    validate_ha(ha, &p, &goals, &opts)?
                }
                None => {
                    let mut l = l;
                    let n = p.steps.len() as u32;
                    l.maxstep = Some(n);
                    let (cs, mut query) = l.system()?;
                    if ignore_query {
                        query.clear();
                    }
                    let (query, beyond): (Vec<Formula>, Vec<Formula>) =
                        query.into_iter().partition(|f| f.constants().iter().all(|c| c.step.is_none_or(|i| i <= n)));
                    for f in beyond {
                        let _ = writeln!(err, "warning: skipping query constraint `{f}` beyond the plan horizon {n}");
                    }
                    validate_plan(&cs, &p, &query, &opts)?
                }
            };
            if let Some(path) = trace {
                let mut buf = vec![];
                report.write_trace(&mut buf)?;
                write_file(&path, &String::from_utf8_lossy(&buf))?;
            }
            if json {
                let text = serde_json::to_string_pretty(&report.to_json()).expect("report JSON serializes");
                write_out(out, &(text + "\n"))?;
            } else {
                write_out(out, &report.to_string())?;
            }
            Ok(if report.verdict == Verdict::Valid { 0 } else { 1 })
        }
        Command::Dump { what, input } => {
            let l = load(&input)?;
            let text = match what {
                DumpKind::Cplus => print_program(&l.program),
                DumpKind::Basic => expand_abbreviations(&l.program.description)?.to_string(),
                DumpKind::Aspmt => {
                    let g = build_Dm(&expand_abbreviations(&l.program.description)?, l.maxstep()?);
                    g.rules.iter().map(|r| format!("{r}\n")).collect()
                }
                DumpKind::Completion => l.system()?.0.to_string(),
            };
            write_out(out, &text)?;
            Ok(0)
        }
    }
}
