//! Run configuration: TOML text with `[problem]`, `[grid]`, `[initial]`,
//! `[solver]`, `[output]` and `[sweep]` sections. Unknown keys are rejected.

use std::path::PathBuf;
use std::sync::Arc;

use evalexpr::{build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, HashMapContext, Value};
use nrrd_core::experiments::SWEEP_AXES;
use nrrd_core::grid::Axis;
use nrrd_core::{Grid, Params, SolverOptions};
use serde::Deserialize;
use toml::Spanned;

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Eig,
    Steady,
    Evolve,
    Threshold1,
    Threshold2,
    Sweep,
    Check,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::Eig,
        Command::Steady,
        Command::Evolve,
        Command::Threshold1,
        Command::Threshold2,
        Command::Sweep,
        Command::Check,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Eig => "eig",
            Command::Steady => "steady",
            Command::Evolve => "evolve",
            Command::Threshold1 => "threshold1",
            Command::Threshold2 => "threshold2",
            Command::Sweep => "sweep",
            Command::Check => "check",
        }
    }

    fn parse(s: &str) -> Option<Command> {
        Command::ALL.into_iter().find(|c| c.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// `(lo, hi)` per axis; the dimension is the number of axes.
    pub extents: Vec<(f64, f64)>,
    pub n: Vec<usize>,
}

impl GridSpec {
    pub fn build(&self) -> nrrd_core::Result<Arc<Grid>> {
        let axes = self
            .extents
            .iter()
            .zip(&self.n)
            .map(|(&(lo, hi), &n)| Axis::new(lo, hi, n))
            .collect::<nrrd_core::Result<Vec<_>>>()?;
        Grid::new(&axes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialSpec {
    Zero,
    ScaledSteady { l1: f64, l2: f64 },
    File(PathBuf),
    /// Expressions in `x`, `y` (and `pi`), e.g. `math::sin(pi * x)`.
    Expression { u1: String, u2: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: String,
    pub values: Vec<f64>,
    pub l1: f64,
    pub l2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub params: Params,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    pub options: SolverOptions,
    /// Length of the integration window for `evolve`.
    pub t_end: f64,
    pub output_dir: PathBuf,
    /// Every k-th sample goes to `series.csv` (the last one always does).
    pub sample_stride: usize,
    pub sweep: Option<SweepSpec>,
}

pub const DEFAULT_T_END: f64 = 100.0;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    problem: Option<RawProblem>,
    grid: Option<RawGrid>,
    initial: Option<RawInitial>,
    solver: Option<RawSolver>,
    output: Option<RawOutput>,
    sweep: Option<RawSweep>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProblem {
    command: Spanned<String>,
    a: Spanned<f64>,
    b: Spanned<f64>,
    alpha: Spanned<f64>,
    beta: Spanned<f64>,
    gamma: Spanned<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    n: Spanned<Vec<usize>>,
    extents: Option<Spanned<Vec<[f64; 2]>>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    kind: Spanned<String>,
    l1: Option<f64>,
    l2: Option<f64>,
    path: Option<Spanned<String>>,
    u1: Option<Spanned<String>>,
    u2: Option<Spanned<String>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSolver {
    tol_residual: Option<f64>,
    max_iter: Option<usize>,
    relax_omega: Option<f64>,
    newton_tol: Option<f64>,
    dt_init: Option<f64>,
    dt_min: Option<f64>,
    dt_max: Option<f64>,
    blowup_threshold: Option<f64>,
    decay_threshold: Option<f64>,
    sample_interval: Option<f64>,
    cutoff: Option<f64>,
    t_end: Option<Spanned<f64>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    dir: Option<String>,
    sample_stride: Option<Spanned<usize>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    axis: Spanned<String>,
    values: Vec<f64>,
    l1: f64,
    l2: f64,
}

/// 1-based line and column of a byte offset.
fn position(text: &str, offset: usize) -> (usize, usize) {
    let offset = offset.min(text.len());
    let before = &text[..offset];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

fn at<T>(text: &str, item: &Spanned<T>, message: impl Into<String>) -> CliError {
    let (line, column) = position(text, item.span().start);
    CliError::Config { line: Some(line), column: Some(column), message: message.into() }
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let (line, column) = e.span().map(|s| position(text, s.start)).unzip();
        CliError::Config { line, column, message: e.message().to_string() }
    })?;
    let problem = raw.problem.ok_or_else(|| CliError::config("missing [problem] section"))?;
    let command = Command::parse(problem.command.get_ref()).ok_or_else(|| {
        let names: Vec<&str> = Command::ALL.iter().map(|c| c.name()).collect();
        at(text, &problem.command, format!("command: unknown command {:?}; expected one of {names:?}", problem.command.get_ref()))
    })?;
    let params = Params::new(
        *problem.a.get_ref(),
        *problem.b.get_ref(),
        *problem.alpha.get_ref(),
        *problem.beta.get_ref(),
        *problem.gamma.get_ref(),
    )
    .map_err(|e| {
        // point at the first offending coefficient
        let fields = [
            (&problem.a, *problem.a.get_ref() > 0.0),
            (&problem.b, *problem.b.get_ref() > 0.0),
            (&problem.alpha, *problem.alpha.get_ref() >= 0.0),
            (&problem.beta, *problem.beta.get_ref() > 0.0),
            (&problem.gamma, *problem.gamma.get_ref() >= 2.0),
        ];
        let span = fields
            .iter()
            .find(|(s, ok)| !ok || !s.get_ref().is_finite())
            .map_or(&problem.a, |(s, _)| *s);
        at(text, span, e.to_string())
    })?;

    let raw_grid = raw.grid.ok_or_else(|| CliError::config("missing [grid] section"))?;
    let n = raw_grid.n.get_ref().clone();
    let extents: Vec<(f64, f64)> = match &raw_grid.extents {
        Some(e) => e.get_ref().iter().map(|p| (p[0], p[1])).collect(),
        None => vec![(0.0, 1.0); n.len()],
    };
    if !(1..=2).contains(&n.len()) {
        return Err(at(text, &raw_grid.n, format!("n: need 1 or 2 axes, got {}", n.len())));
    }
    if extents.len() != n.len() {
        let span = raw_grid.extents.as_ref().expect("defaults match n");
        return Err(at(text, span, format!("extents: {} axes given, n has {}", extents.len(), n.len())));
    }
    let grid = GridSpec { extents, n };
    grid.build().map_err(|e| at(text, &raw_grid.n, format!("grid: {e}")))?;

    let initial = match raw.initial {
        None => InitialSpec::Zero,
        Some(init) => parse_initial(text, init)?,
    };

    let mut options = SolverOptions::default();
    let mut t_end = DEFAULT_T_END;
    if let Some(s) = raw.solver {
        macro_rules! set {
            ($($f:ident),*) => { $( if let Some(v) = s.$f { options.$f = v; } )* };
        }
        set!(tol_residual, max_iter, relax_omega, newton_tol, dt_init, dt_min, dt_max, blowup_threshold, decay_threshold, sample_interval);
        options.cutoff = s.cutoff;
        if let Some(t) = &s.t_end {
            if !(*t.get_ref() > 0.0 && t.get_ref().is_finite()) {
                return Err(at(text, t, format!("t_end: must be positive, got {}", t.get_ref())));
            }
            t_end = *t.get_ref();
        }
    }
    options.validate().map_err(|e| CliError::config(format!("[solver]: {e}")))?;

    let (mut output_dir, mut sample_stride) = (PathBuf::from("out"), 1);
    if let Some(o) = raw.output {
        if let Some(d) = o.dir {
            output_dir = PathBuf::from(d);
        }
        if let Some(k) = o.sample_stride {
            if *k.get_ref() == 0 {
                return Err(at(text, &k, "sample_stride: must be ≥ 1"));
            }
            sample_stride = *k.get_ref();
        }
    }

    let sweep = match raw.sweep {
        None => None,
        Some(s) => {
            if !SWEEP_AXES.contains(&s.axis.get_ref().as_str()) {
                return Err(at(text, &s.axis, format!("axis: unknown sweep axis {:?}; expected one of {SWEEP_AXES:?}", s.axis.get_ref())));
            }
            if s.values.iter().chain([&s.l1, &s.l2]).any(|v| !v.is_finite()) {
                return Err(CliError::config("[sweep]: values and scalings must be finite"));
            }
            Some(SweepSpec { axis: s.axis.into_inner(), values: s.values, l1: s.l1, l2: s.l2 })
        }
    };

    match command {
        Command::Threshold1 | Command::Threshold2 if !matches!(initial, InitialSpec::ScaledSteady { .. }) => {
            return Err(CliError::config(format!(
                "{} needs [initial] kind = \"scaled_steady\" with l1 and l2",
                command.name()
            )));
        }
        Command::Sweep if sweep.is_none() => return Err(CliError::config("sweep needs a [sweep] section")),
        _ => {}
    }

    Ok(RunConfig { command, params, grid, initial, options, t_end, output_dir, sample_stride, sweep })
}

fn parse_initial(text: &str, init: RawInitial) -> Result<InitialSpec> {
    let kind = init.kind.get_ref().as_str();
    let require = |v: Option<f64>, name: &str| {
        v.filter(|x| x.is_finite() && *x > 0.0)
            .ok_or_else(|| at(text, &init.kind, format!("{name}: kind {kind:?} needs a positive {name}")))
    };
    let spec = match kind {
        "zero" => InitialSpec::Zero,
        "scaled_steady" => InitialSpec::ScaledSteady { l1: require(init.l1, "l1")?, l2: require(init.l2, "l2")? },
        "file" => {
            let path = init.path.as_ref().ok_or_else(|| at(text, &init.kind, "path: kind \"file\" needs a path"))?;
            let p = PathBuf::from(path.get_ref());
            if !p.is_file() {
                return Err(at(text, path, format!("path: no such file {}", p.display())));
            }
            InitialSpec::File(p)
        }
        "expression" => {
            let mut exprs = Vec::new();
            for (name, e) in [("u1", &init.u1), ("u2", &init.u2)] {
                let e = e.as_ref().ok_or_else(|| at(text, &init.kind, format!("{name}: kind \"expression\" needs {name}")))?;
                let tree = build_operator_tree::<DefaultNumericTypes>(e.get_ref())
                    .map_err(|err| at(text, e, format!("{name}: {err}")))?;
                // catches unknown variables and functions
                tree.eval_number_with_context(&expression_context(0.0, 0.0))
                    .map_err(|err| at(text, e, format!("{name}: {err}")))?;
                exprs.push(e.get_ref().clone());
            }
            let u2 = exprs.pop().expect("two expressions");
            let u1 = exprs.pop().expect("two expressions");
            InitialSpec::Expression { u1, u2 }
        }
        other => {
            return Err(at(
                text,
                &init.kind,
                format!("kind: unknown initial condition {other:?}; expected zero, scaled_steady, file or expression"),
            ))
        }
    };
    Ok(spec)
}

/// Variables visible to initial-condition expressions.
pub(crate) fn expression_context(x: f64, y: f64) -> HashMapContext<DefaultNumericTypes> {
    let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
    for (k, v) in [("x", x), ("y", y), ("pi", std::f64::consts::PI)] {
        ctx.set_value(k.into(), Value::from_float(v)).expect("plain float variables");
    }
    ctx
}

/// Canonical text: every section and key written explicitly, keys sorted.
pub fn to_canonical_string(config: &RunConfig) -> String {
    use toml::{Table, Value};
    let f = Value::Float;
    let mut problem = Table::new();
    problem.insert("command".into(), Value::String(config.command.name().into()));
    let p = &config.params;
    for (k, v) in [("a", p.a()), ("b", p.b()), ("alpha", p.alpha()), ("beta", p.beta()), ("gamma", p.gamma())] {
        problem.insert(k.into(), f(v));
    }
    let mut grid = Table::new();
    grid.insert("n".into(), Value::Array(config.grid.n.iter().map(|&n| Value::Integer(n as i64)).collect()));
    grid.insert(
        "extents".into(),
        Value::Array(config.grid.extents.iter().map(|&(a, b)| Value::Array(vec![f(a), f(b)])).collect()),
    );
    let mut initial = Table::new();
    match &config.initial {
        InitialSpec::Zero => {
            initial.insert("kind".into(), Value::String("zero".into()));
        }
        InitialSpec::ScaledSteady { l1, l2 } => {
            initial.insert("kind".into(), Value::String("scaled_steady".into()));
            initial.insert("l1".into(), f(*l1));
            initial.insert("l2".into(), f(*l2));
        }
        InitialSpec::File(path) => {
            initial.insert("kind".into(), Value::String("file".into()));
            initial.insert("path".into(), Value::String(path.to_string_lossy().into_owned()));
        }
        InitialSpec::Expression { u1, u2 } => {
            initial.insert("kind".into(), Value::String("expression".into()));
            initial.insert("u1".into(), Value::String(u1.clone()));
            initial.insert("u2".into(), Value::String(u2.clone()));
        }
    }
    let o = &config.options;
    let mut solver = Table::new();
    for (k, v) in [
        ("tol_residual", o.tol_residual),
        ("relax_omega", o.relax_omega),
        ("newton_tol", o.newton_tol),
        ("dt_init", o.dt_init),
        ("dt_min", o.dt_min),
        ("dt_max", o.dt_max),
        ("blowup_threshold", o.blowup_threshold),
        ("decay_threshold", o.decay_threshold),
        ("sample_interval", o.sample_interval),
        ("t_end", config.t_end),
    ] {
        solver.insert(k.into(), f(v));
    }
    solver.insert("max_iter".into(), Value::Integer(o.max_iter as i64));
    if let Some(m) = o.cutoff {
        solver.insert("cutoff".into(), f(m));
    }
    let mut output = Table::new();
    output.insert("dir".into(), Value::String(config.output_dir.to_string_lossy().into_owned()));
    output.insert("sample_stride".into(), Value::Integer(config.sample_stride as i64));

    let mut root = Table::new();
    root.insert("problem".into(), Value::Table(problem));
    root.insert("grid".into(), Value::Table(grid));
    root.insert("initial".into(), Value::Table(initial));
    root.insert("solver".into(), Value::Table(solver));
    root.insert("output".into(), Value::Table(output));
    if let Some(s) = &config.sweep {
        let mut sweep = Table::new();
        sweep.insert("axis".into(), Value::String(s.axis.clone()));
        sweep.insert("values".into(), Value::Array(s.values.iter().map(|&v| f(v)).collect()));
        sweep.insert("l1".into(), f(s.l1));
        sweep.insert("l2".into(), f(s.l2));
        root.insert("sweep".into(), Value::Table(sweep));
    }
    toml::to_string(&root).expect("plain tables serialize")
}
