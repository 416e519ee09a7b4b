//! Experiment configuration, result tables and the sweep drivers behind the
//! `epgauss` command line tool.
//!
//! A configuration is a flat JSON object. Every experiment has a fixed key
//! schema with defaults; unknown keys, and keys that belong to a different
//! experiment, are rejected. Sweeps evaluate independent points in parallel
//! and merge them by grid index, so the output never depends on scheduling.

use std::f64::consts::SQRT_2;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map, Value};

use crate::chain::{build_system, initial_squeezed_cm, params_from_epsilon, quasistable_reference, ChainParams, EpsilonPoint, Frame};
use crate::epmap::{self, EpBranch};
use crate::gaussian::{CovarianceMatrix, Propagator};
use crate::metrics::{self, Channel, Trace};
use crate::{Error, Result, C64};

pub const TOOL_NAME: &str = "epgauss";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Branch outputs with `|f|` above this next to `ε = 0` are flagged as the
/// vertical asymptote of the inner-minus branches.
const ASYMPTOTE_THRESHOLD: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Evolve,
    Epmap,
    Stabilize,
    ResetGrid,
    ResetTime,
    ResetSqueeze,
    Bounds,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Evolve,
        Experiment::Epmap,
        Experiment::Stabilize,
        Experiment::ResetGrid,
        Experiment::ResetTime,
        Experiment::ResetSqueeze,
        Experiment::Bounds,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Evolve => "evolve",
            Experiment::Epmap => "epmap",
            Experiment::Stabilize => "stabilize",
            Experiment::ResetGrid => "reset-grid",
            Experiment::ResetTime => "reset-time",
            Experiment::ResetSqueeze => "reset-squeeze",
            Experiment::Bounds => "bounds",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment {s:?}")))
    }
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Num,
    Int,
    Bool,
    Text,
    NumList,
    TextList,
}

#[derive(Debug, Clone, Copy)]
enum Fallback {
    Num(f64),
    Int(i64),
    Bool(bool),
    Text(&'static str),
    NumList(&'static [f64]),
    TextList(&'static [&'static str]),
    /// Absent unless given; echoed as `null`.
    Optional,
}

#[derive(Debug, Clone, Copy)]
struct KeySpec {
    name: &'static str,
    kind: Kind,
    default: Fallback,
}

const fn key(name: &'static str, kind: Kind, default: Fallback) -> KeySpec {
    KeySpec { name, kind, default }
}

const KAPPA1: KeySpec = key("kappa1", Kind::Num, Fallback::Num(1e-3));
const OMEGA1: KeySpec = key("omega1", Kind::Num, Fallback::Num(5000.0));
const FRAME: KeySpec = key("frame", Kind::Text, Fallback::Text("rotating"));
const SEED: KeySpec = key("seed", Kind::Int, Fallback::Optional);

fn schema(e: Experiment) -> Vec<KeySpec> {
    use Fallback as D;
    use Kind as K;
    let mut keys = match e {
        Experiment::Evolve => vec![
            KAPPA1,
            key("eps2", K::Num, D::Optional),
            key("kappa2", K::Num, D::Optional),
            key("eps2_im", K::Num, D::Num(0.0)),
            key("eps3", K::Num, D::Num(0.0)),
            key("eps3_im", K::Num, D::Num(0.0)),
            key("r", K::Num, D::Num(1.0)),
            key("t_max", K::Num, D::Num(20.0)),
            key("dt", K::Num, D::Num(0.01)),
            OMEGA1,
            FRAME,
        ],
        Experiment::Epmap => vec![
            KAPPA1,
            key("axis", K::Text, D::Text("real")),
            key("eps_min", K::Num, D::Num(0.0)),
            key("eps_max", K::Num, D::Num(6.0)),
            key("eps_steps", K::Int, D::Int(121)),
            key("branches", K::TextList, D::TextList(&["++", "-+", "+-", "--"])),
        ],
        Experiment::Stabilize => vec![
            KAPPA1,
            key("r", K::Num, D::Num(1.0)),
            key("kappa2_min", K::Num, D::Num(2.0)),
            key("kappa2_max", K::Num, D::Num(12.0)),
            key("kappa2_steps", K::Int, D::Int(41)),
            key("t_max", K::Num, D::Num(60.0)),
            key("dt", K::Num, D::Num(0.01)),
            key("sigma", K::Num, D::Num(1e-5)),
            key("reference", K::Text, D::Text("plateau")),
            key("y_r1", K::Num, D::Num(metrics::Y_R1)),
            key("y_e13", K::Num, D::Num(metrics::Y_E13)),
            key("z_r1", K::Num, D::Num(metrics::Z_R1)),
            key("z_e13", K::Num, D::Num(metrics::Z_E13)),
            OMEGA1,
            FRAME,
        ],
        Experiment::ResetGrid => vec![
            KAPPA1,
            key("r", K::Num, D::Num(1.0)),
            key("tau_s", K::NumList, D::NumList(&[0.0, 8.0])),
            key("tau_r", K::NumList, D::NumList(&[2.0, 6.0])),
            key("eps3_min", K::Num, D::Num(0.0)),
            key("eps3_max", K::Num, D::Num(6.0)),
            key("eps3_steps", K::Int, D::Int(101)),
            key("eps2_min", K::Num, D::Num(0.0)),
            key("eps2_max", K::Num, D::Num(5.0)),
            key("eps2_steps", K::Int, D::Int(101)),
            key("overlay", K::Bool, D::Bool(true)),
            OMEGA1,
            FRAME,
        ],
        Experiment::ResetTime => vec![
            KAPPA1,
            key("tau_s", K::NumList, D::NumList(&[0.0, 8.0])),
            key("r_list", K::NumList, D::NumList(&[1.0, 2.0])),
            key("tau_r_min", K::Num, D::Num(0.0)),
            key("tau_r_max", K::Num, D::Num(10.0)),
            key("tau_r_steps", K::Int, D::Int(101)),
            OMEGA1,
            FRAME,
        ],
        Experiment::ResetSqueeze => vec![
            key("kappa1_list", K::NumList, D::NumList(&[1e-3, 1e-1])),
            key("tau_s", K::Num, D::Num(8.0)),
            key("tau_r", K::NumList, D::NumList(&[2.0, 4.0, 6.0])),
            key("r_min", K::Num, D::Num(0.0)),
            key("r_max", K::Num, D::Num(3.0)),
            key("r_steps", K::Int, D::Int(61)),
            OMEGA1,
            FRAME,
        ],
        Experiment::Bounds => vec![
            key("kappa1_list", K::NumList, D::NumList(&[1e-6, 1e-3, 1e-1])),
            key("r_min", K::Num, D::Num(0.0)),
            key("r_max", K::Num, D::Num(2.0)),
            key("r_steps", K::Int, D::Int(21)),
            key("t_max", K::Num, D::Num(20.0)),
            key("dt", K::Num, D::Num(0.01)),
            OMEGA1,
            FRAME,
        ],
    };
    keys.push(SEED);
    keys
}

/// Fully resolved configuration of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    experiment: Experiment,
    entries: Vec<(&'static str, Value)>,
}

impl ExperimentConfig {
    /// Resolves `given` against the experiment's schema, filling defaults.
    /// An `"experiment"` entry is accepted if it names the same experiment.
    pub fn new(experiment: Experiment, given: &Map<String, Value>) -> Result<Self> {
        let spec = schema(experiment);
        for (k, v) in given {
            if k == "experiment" {
                let named = v.as_str().ok_or_else(|| Error::Config("\"experiment\" must be a string".into()))?;
                if named.parse::<Experiment>()? != experiment {
                    return Err(Error::Config(format!("config is for {named:?}, not {:?}", experiment.name())));
                }
            } else if !spec.iter().any(|s| s.name == k) {
                let owner = Experiment::ALL.into_iter().find(|e| schema(*e).iter().any(|s| s.name == k));
                return Err(Error::Config(match owner {
                    Some(o) => format!("key {k:?} does not apply to {} (it belongs to {o})", experiment.name()),
                    None => format!("unknown key {k:?}"),
                }));
            }
        }
        let entries = spec
            .iter()
            .map(|s| {
                let value = match given.get(s.name) {
                    Some(Value::Null) | None => default_value(s.default),
                    Some(v) => coerce(s, v)?,
                };
                Ok((s.name, value))
            })
            .collect::<Result<Vec<_>>>()?;
        let cfg = ExperimentConfig { experiment, entries };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn defaults(experiment: Experiment) -> Result<Self> {
        Self::new(experiment, &Map::new())
    }

    pub fn from_json_str(experiment: Experiment, text: &str) -> Result<Self> {
        match serde_json::from_str::<Value>(text) {
            Ok(Value::Object(map)) => Self::new(experiment, &map),
            Ok(_) => Err(Error::Config("config must be a flat JSON object".into())),
            Err(e) => Err(Error::Config(format!("config is not valid JSON: {e}"))),
        }
    }

    pub fn experiment(&self) -> Experiment {
        self.experiment
    }

    /// The effective configuration in schema order, `experiment` first.
    pub fn echo(&self) -> Map<String, Value> {
        let mut m = Map::new();
        m.insert("experiment".into(), Value::String(self.experiment.name().into()));
        for (k, v) in &self.entries {
            m.insert((*k).into(), v.clone());
        }
        m
    }

    fn get(&self, k: &str) -> &Value {
        &self.entries.iter().find(|(name, _)| *name == k).expect("key in schema").1
    }

    fn num(&self, k: &str) -> f64 {
        self.get(k).as_f64().expect("validated number")
    }

    fn opt_num(&self, k: &str) -> Option<f64> {
        self.get(k).as_f64()
    }

    fn int(&self, k: &str) -> i64 {
        self.get(k).as_i64().expect("validated integer")
    }

    fn boolean(&self, k: &str) -> bool {
        self.get(k).as_bool().expect("validated bool")
    }

    fn text(&self, k: &str) -> &str {
        self.get(k).as_str().expect("validated string")
    }

    fn nums(&self, k: &str) -> Vec<f64> {
        self.get(k).as_array().expect("validated list").iter().map(|v| v.as_f64().expect("number")).collect()
    }

    fn texts(&self, k: &str) -> Vec<String> {
        self.get(k).as_array().expect("validated list").iter().map(|v| v.as_str().expect("string").to_string()).collect()
    }

    fn has(&self, k: &str) -> bool {
        self.entries.iter().any(|(name, _)| *name == k)
    }

    fn seed(&self) -> Option<u64> {
        self.get("seed").as_i64().map(|s| s as u64)
    }

    fn frame(&self) -> Frame {
        match self.text("frame") {
            "lab" => Frame::Lab { omega1: self.num("omega1") },
            _ => Frame::RotatingAtOmega1,
        }
    }

    fn grid(&self, prefix: &str) -> Vec<f64> {
        linspace(self.num(&format!("{prefix}_min")), self.num(&format!("{prefix}_max")), self.int(&format!("{prefix}_steps")) as usize)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (k, v) in &self.entries {
            let positive = ["t_max", "dt", "sigma"];
            if positive.contains(k) && !(v.as_f64().unwrap_or(0.0) > 0.0) {
                return bad(format!("{k} must be > 0"));
            }
            let non_negative = ["kappa1", "r", "tau_s", "tau_r", "r_list", "kappa1_list", "r_min", "tau_r_min", "omega1"];
            let values: Vec<f64> = match v {
                Value::Array(a) => a.iter().filter_map(Value::as_f64).collect(),
                other => other.as_f64().into_iter().collect(),
            };
            if non_negative.contains(k) && values.iter().any(|x| *x < 0.0) {
                return bad(format!("{k} must be ≥ 0"));
            }
            if k.ends_with("_steps") && v.as_i64().unwrap_or(0) < 1 {
                return bad(format!("{k} must be ≥ 1"));
            }
            if matches!(v, Value::Array(a) if a.is_empty()) {
                return bad(format!("{k} must not be empty"));
            }
        }
        for prefix in ["eps", "kappa2", "eps3", "eps2", "tau_r", "r"] {
            let min = format!("{prefix}_min");
            if self.has(&min) {
                let (lo, hi, n) = (self.num(&min), self.num(&format!("{prefix}_max")), self.int(&format!("{prefix}_steps")));
                if n > 1 && !(lo < hi) {
                    return bad(format!("{prefix}_min must be < {prefix}_max"));
                }
                if n == 1 && lo > hi {
                    return bad(format!("{prefix}_min must be ≤ {prefix}_max"));
                }
            }
        }
        if self.has("frame") && !matches!(self.text("frame"), "rotating" | "lab") {
            return bad("frame must be \"rotating\" or \"lab\"".into());
        }
        if self.has("axis") && !matches!(self.text("axis"), "real" | "imaginary") {
            return bad("axis must be \"real\" or \"imaginary\"".into());
        }
        if self.has("reference") && !matches!(self.text("reference"), "plateau" | "bound") {
            return bad("reference must be \"plateau\" or \"bound\"".into());
        }
        if self.has("branches") {
            for b in self.texts("branches") {
                b.parse::<EpBranch>().map_err(|_| Error::Config(format!("unknown branch {b:?}")))?;
            }
        }
        if self.experiment == Experiment::Evolve {
            match (self.opt_num("eps2"), self.opt_num("kappa2")) {
                (None, None) => return bad("evolve requires eps2 or kappa2".into()),
                (Some(_), Some(_)) => return bad("give either eps2 or kappa2, not both".into()),
                _ => {}
            }
        }
        if let Some(s) = self.get("seed").as_i64() {
            if s < 0 {
                return bad("seed must be ≥ 0".into());
            }
        }
        Ok(())
    }
}

/// Splits a `key=value` override; the value is read as JSON when possible and
/// as a bare string otherwise.
pub fn parse_set(arg: &str) -> Result<(String, Value)> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("--set expects key=value, got {arg:?}")))?;
    let k = k.trim();
    if k.is_empty() {
        return Err(Error::Config(format!("empty key in {arg:?}")));
    }
    let v = v.trim();
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.to_string(), value))
}

fn default_value(d: Fallback) -> Value {
    match d {
        Fallback::Num(x) => json!(x),
        Fallback::Int(x) => json!(x),
        Fallback::Bool(x) => json!(x),
        Fallback::Text(x) => json!(x),
        Fallback::NumList(x) => json!(x),
        Fallback::TextList(x) => json!(x),
        Fallback::Optional => Value::Null,
    }
}

fn coerce(spec: &KeySpec, v: &Value) -> Result<Value> {
    let err = || Error::Config(format!("key {:?} expects {}, got {v}", spec.name, kind_name(spec.kind)));
    let finite = |x: f64| if x.is_finite() { Ok(x) } else { Err(err()) };
    match spec.kind {
        Kind::Num => Ok(json!(finite(v.as_f64().ok_or_else(err)?)?)),
        Kind::Int => match (v.as_i64(), v.as_f64()) {
            (Some(i), _) => Ok(json!(i)),
            (None, Some(x)) if x.fract() == 0.0 && x.abs() < 9e15 => Ok(json!(x as i64)),
            _ => Err(err()),
        },
        Kind::Bool => v.as_bool().map(Value::Bool).ok_or_else(err),
        Kind::Text => v.as_str().map(|s| json!(s)).ok_or_else(err),
        Kind::NumList => {
            let items: Vec<&Value> = match v {
                Value::Array(a) => a.iter().collect(),
                single => vec![single],
            };
            let nums = items.into_iter().map(|x| x.as_f64().ok_or_else(err).and_then(finite)).collect::<Result<Vec<_>>>()?;
            Ok(json!(nums))
        }
        Kind::TextList => {
            let items: Vec<&Value> = match v {
                Value::Array(a) => a.iter().collect(),
                single => vec![single],
            };
            let texts = items.into_iter().map(|x| x.as_str().map(String::from).ok_or_else(err)).collect::<Result<Vec<_>>>()?;
            Ok(json!(texts))
        }
    }
}

fn kind_name(k: Kind) -> &'static str {
    match k {
        Kind::Num => "a number",
        Kind::Int => "an integer",
        Kind::Bool => "true or false",
        Kind::Text => "a string",
        Kind::NumList => "a number or a list of numbers",
        Kind::TextList => "a string or a list of strings",
    }
}

/// `n` evenly spaced points with exact endpoints.
pub fn linspace(min: f64, max: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![min],
        _ => (0..n).map(|k| if k + 1 == n { max } else { min + (max - min) * k as f64 / (n - 1) as f64 }).collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(i64),
    Text(String),
    Empty,
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Num(x) if x.is_finite() => format!("{x}"),
            Cell::Num(_) | Cell::Empty => String::new(),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Num(x) if x.is_finite() => json!(x),
            Cell::Num(_) | Cell::Empty => Value::Null,
            Cell::Int(i) => json!(i),
            Cell::Text(s) => json!(s),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            Cell::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Text(s) => Some(s),
            _ => None,
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

/// Rectangular table of results plus the effective configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultTable {
    columns: Vec<Column>,
    rows: Vec<Vec<Cell>>,
    experiment: Experiment,
    config: Map<String, Value>,
}

impl ResultTable {
    fn new(cfg: &ExperimentConfig, columns: Vec<Column>) -> Self {
        ResultTable { columns, rows: Vec::new(), experiment: cfg.experiment, config: cfg.echo() }
    }

    fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Values of a column, `None` for empty or non-numeric cells.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }

    pub fn metadata(&self) -> Value {
        let units: Map<String, Value> = self.columns.iter().map(|c| (c.name.to_string(), json!(c.unit))).collect();
        json!({
            "tool": TOOL_NAME,
            "version": TOOL_VERSION,
            "experiment": self.experiment.name(),
            "units": units,
            "config": self.config,
        })
    }

    /// CSV with a `#`-prefixed JSON metadata line.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "#{}", self.metadata())?;
        let header: Vec<&str> = self.columns.iter().map(|c| c.name).collect();
        writeln!(w, "{}", header.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            writeln!(w, "{}", cells.join(","))?;
        }
        Ok(())
    }

    /// JSON lines: one metadata object, then one object per row.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", json!({ "metadata": self.metadata() }))?;
        for row in &self.rows {
            let obj: Map<String, Value> = self.columns.iter().zip(row).map(|(c, v)| (c.name.to_string(), v.json())).collect();
            writeln!(w, "{}", Value::Object(obj))?;
        }
        Ok(())
    }
}

/// Runs the configured experiment.
pub fn run(cfg: &ExperimentConfig) -> Result<ResultTable> {
    match cfg.experiment {
        Experiment::Evolve => cmd_evolve(cfg),
        Experiment::Epmap => cmd_epmap(cfg),
        Experiment::Stabilize => cmd_stabilize(cfg),
        Experiment::ResetGrid => cmd_reset_grid(cfg),
        Experiment::ResetTime => cmd_reset_time(cfg),
        Experiment::ResetSqueeze => cmd_reset_squeeze(cfg),
        Experiment::Bounds => cmd_bounds(cfg),
    }
}

/// Evaluates `f(0..n)` in parallel (in a seed-dependent order if a seed is
/// given) and returns the results by index. The first error by index wins.
fn par_indexed<T: Send>(n: usize, seed: Option<u64>, f: impl Fn(usize) -> Result<T> + Sync) -> Result<Vec<T>> {
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(s) = seed {
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(s));
    }
    let mut out: Vec<(usize, Result<T>)> = order.into_par_iter().map(|i| (i, f(i))).collect();
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, r)| r).collect()
}

fn expect(cfg: &ExperimentConfig, e: Experiment) -> Result<()> {
    if cfg.experiment != e {
        return Err(Error::Config(format!("{} config passed to the {} driver", cfg.experiment, e)));
    }
    Ok(())
}

fn steps_for(t_max: f64, dt: f64) -> usize {
    ((t_max / dt).round() as usize).max(1)
}

/// EP-2 used for preparation and stabilization: `κ₂ = κ₁ + 4√2`, `κ₃ = κ₁`.
fn ep2_params(kappa1: f64, frame: Frame) -> Result<ChainParams> {
    params_from_epsilon(kappa1, EpsilonPoint::real(2.0, 0.0), frame)
}

/// EP-3 used for the reset: `κ₂ = κ₁ + 2√2`, `κ₃ = κ₁ + 4√2`.
fn ep3_params(kappa1: f64, frame: Frame) -> Result<ChainParams> {
    params_from_epsilon(kappa1, EpsilonPoint::real(1.0, 2.0), frame)
}

fn evolve_to(p: &ChainParams, v0: &CovarianceMatrix, t: f64) -> Result<CovarianceMatrix> {
    Propagator::new(&build_system(p))?.at(v0, t)
}

/// State after squeezing R3 by `r` and waiting `tau_s` at the EP-2.
pub fn prepared_state(kappa1: f64, r: f64, tau_s: f64, frame: Frame) -> Result<CovarianceMatrix> {
    evolve_to(&ep2_params(kappa1, frame)?, &initial_squeezed_cm(r)?, tau_s)
}

/// Trajectory of the chain from `V₀(r)`, sampled every `dt` up to `t_max`.
pub fn simulate_trace(p: &ChainParams, r: f64, t_max: f64, dt: f64) -> Result<Trace> {
    let states = Propagator::new(&build_system(p))?.sample(&initial_squeezed_cm(r)?, dt, steps_for(t_max, dt))?;
    Trace::from_states(&states, dt)
}

pub fn cmd_evolve(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect(cfg, Experiment::Evolve)?;
    let kappa1 = cfg.num("kappa1");
    let eps2_re = match (cfg.opt_num("eps2"), cfg.opt_num("kappa2")) {
        (Some(e), _) => e,
        (None, Some(k2)) => (k2 - kappa1) / (2.0 * SQRT_2),
        (None, None) => unreachable!("validated"),
    };
    let ep = EpsilonPoint::new(C64::new(eps2_re, cfg.num("eps2_im")), C64::new(cfg.num("eps3"), cfg.num("eps3_im")));
    let p = params_from_epsilon(kappa1, ep, cfg.frame())?;
    let trace = simulate_trace(&p, cfg.num("r"), cfg.num("t_max"), cfg.num("dt"))?;
    let mut columns = vec![col("t", "1/g")];
    let units = ["1", "quanta", "1", "quanta", "1", "quanta", "ebit", "ebit", "ebit", "1"];
    columns.extend(Channel::ALL.iter().zip(units).map(|(c, u)| col(c.name(), u)));
    let mut table = ResultTable::new(cfg, columns);
    for (k, t) in trace.times().iter().enumerate() {
        let mut row = vec![Cell::Num(*t)];
        row.extend(Channel::ALL.iter().map(|c| Cell::Num(trace.channel(*c)[k])));
        table.push(row);
    }
    Ok(table)
}

pub fn cmd_epmap(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect(cfg, Experiment::Epmap)?;
    let kappa1 = cfg.num("kappa1");
    let imaginary = cfg.text("axis") == "imaginary";
    let branches: Vec<EpBranch> = cfg.texts("branches").iter().map(|b| b.parse()).collect::<Result<_>>()?;
    let grid = cfg.grid("eps");
    let to_eps = |s: f64| if imaginary { C64::new(0.0, s) } else { C64::new(s, 0.0) };
    let columns = vec![
        col("eps", "1"),
        col("branch", ""),
        col("f_re", "1"),
        col("f_im", "1"),
        col("h1_re", "1"),
        col("h1_im", "1"),
        col("h2_re", "1"),
        col("h2_im", "1"),
        col("abs_delta", "1"),
        col("ep_order", ""),
        col("status", ""),
    ];
    let mut table = ResultTable::new(cfg, columns);
    let points: Vec<(EpBranch, f64)> = branches.iter().flat_map(|b| grid.iter().map(move |s| (*b, *s))).collect();
    let rows = par_indexed(points.len(), cfg.seed(), |i| {
        let (b, s) = points[i];
        Ok(epmap_row(kappa1, to_eps(s), s, b))
    })?;
    rows.into_iter().for_each(|r| table.push(r));
    let (lo, hi) = (grid[0], grid[grid.len() - 1]);
    for p in epmap::enumerate_ep3(kappa1)? {
        let on_axis = if imaginary { p.eps3.re == 0.0 } else { p.eps3.im == 0.0 };
        let s = if imaginary { p.eps3.im } else { p.eps3.re };
        if on_axis && s >= lo && s <= hi && branches.contains(&p.branch) {
            let mut row = epmap_row(kappa1, p.eps3, s, p.branch);
            row[2] = Cell::Num(p.eps2.re);
            row[3] = Cell::Num(p.eps2.im);
            row[10] = "ep3_marker".into();
            table.push(row);
        }
    }
    Ok(table)
}

fn epmap_row(kappa1: f64, eps: C64, s: f64, b: EpBranch) -> Vec<Cell> {
    let mut row = vec![Cell::Num(s), Cell::Text(b.label())];
    let f = match epmap::branch_f(eps, b) {
        Ok(f) => f,
        Err(Error::DivergentBranch) => {
            row.extend(std::iter::repeat_n(Cell::Empty, 8));
            row.push("divergent".into());
            return row;
        }
        Err(_) => {
            row.extend(std::iter::repeat_n(Cell::Empty, 8));
            row.push("error".into());
            return row;
        }
    };
    row.push(f.re.into());
    row.push(f.im.into());
    let ep = EpsilonPoint::new(f, eps);
    let mut status = "ok";
    match epmap::mode_h_at(ep) {
        Ok((h1, h2)) => row.extend([h1.re, h1.im, h2.re, h2.im].map(Cell::Num)),
        Err(_) => {
            row.extend(std::iter::repeat_n(Cell::Empty, 4));
            status = "singular";
        }
    }
    row.push(Cell::from(epmap::normalized_discriminant(kappa1, ep).ok().map(|d| d.delta.norm())));
    match epmap::classify_ep_default(&epmap::effective_hamiltonian_eps(kappa1, ep)) {
        Ok(order) => row.push(Cell::Int(order as i64)),
        Err(_) => {
            row.push(Cell::Empty);
            status = "ambiguous";
        }
    }
    if b.inner == epmap::Sign::Minus && f.norm() > ASYMPTOTE_THRESHOLD {
        status = "asymptote";
    }
    row.push(status.into());
    row
}

/// Quasistabilization times of `r₁` and `E₁₃` for one EP-2-family chain.
#[derive(Debug, Clone, PartialEq)]
pub struct StabilizationPoint {
    pub kappa2: f64,
    pub t_r1: Result<f64>,
    pub t_e13: Result<f64>,
    pub estimate_r1: f64,
    pub estimate_e13: f64,
    pub rates: epmap::EffectiveRates,
}

/// Settings of [`stabilization_point`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilizationSettings {
    pub kappa1: f64,
    pub r: f64,
    pub t_max: f64,
    pub dt: f64,
    pub sigma: f64,
    /// Measure against the slow-mode plateau (`true`) or against `α* e^{−yκ₁t}`.
    pub plateau: bool,
    pub y: [f64; 2],
    pub z: [f64; 2],
    pub frame: Frame,
}

impl Default for StabilizationSettings {
    fn default() -> Self {
        StabilizationSettings {
            kappa1: 1e-3,
            r: 1.0,
            t_max: 60.0,
            dt: 0.01,
            sigma: 1e-5,
            plateau: true,
            y: [metrics::Y_R1, metrics::Y_E13],
            z: [metrics::Z_R1, metrics::Z_E13],
            frame: Frame::RotatingAtOmega1,
        }
    }
}

pub fn stabilization_point(kappa2: f64, s: &StabilizationSettings) -> Result<StabilizationPoint> {
    let p = epmap::ep2_family(s.kappa1, kappa2, s.frame)?;
    let trace = simulate_trace(&p, s.r, s.t_max, s.dt)?;
    let bounds = metrics::quasistable_bounds(s.r)?;
    let rates = epmap::effective_mode_rates(kappa2, s.kappa1);
    let stars = [bounds.r_star, bounds.e13_star];
    let channels = [Channel::R1, Channel::E13];
    let times: Vec<Result<f64>> = if s.plateau {
        let refs = quasistable_reference(&p, &initial_squeezed_cm(s.r)?, s.dt, trace.len() - 1)?;
        let ref_trace = Trace::from_states(&refs, s.dt)?;
        channels
            .iter()
            .map(|c| metrics::quasistabilization_time_to(&trace, *c, ref_trace.channel(*c), s.sigma))
            .collect()
    } else {
        (0..2)
            .map(|k| metrics::quasistabilization_time(&trace, channels[k], stars[k], s.y[k], s.kappa1, s.sigma))
            .collect()
    };
    let estimate = |k: usize| metrics::estimate_qstab_time(stars[k], s.sigma, s.y[k], s.z[k], s.kappa1, rates.kappa_pm[1]);
    Ok(StabilizationPoint {
        kappa2,
        t_r1: times[0].clone(),
        t_e13: times[1].clone(),
        estimate_r1: estimate(0)?,
        estimate_e13: estimate(1)?,
        rates,
    })
}

pub fn cmd_stabilize(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect(cfg, Experiment::Stabilize)?;
    let settings = StabilizationSettings {
        kappa1: cfg.num("kappa1"),
        r: cfg.num("r"),
        t_max: cfg.num("t_max"),
        dt: cfg.num("dt"),
        sigma: cfg.num("sigma"),
        plateau: cfg.text("reference") == "plateau",
        y: [cfg.num("y_r1"), cfg.num("y_e13")],
        z: [cfg.num("z_r1"), cfg.num("z_e13")],
        frame: cfg.frame(),
    };
    if settings.r == 0.0 {
        return Err(Error::Config("stabilize needs r > 0 (the bounds vanish at r = 0)".into()));
    }
    let grid = cfg.grid("kappa2");
    let points = par_indexed(grid.len(), cfg.seed(), |i| stabilization_point(grid[i], &settings))?;
    let columns = vec![
        col("kappa2", "g"),
        col("t_r1", "1/g"),
        col("t_E13", "1/g"),
        col("estimate_r1", "1/g"),
        col("estimate_E13", "1/g"),
        col("delta_minus_eff", "g"),
        col("kappa_plus_eff", "g"),
        col("kappa_minus_eff", "g"),
        col("status", ""),
    ];
    let mut table = ResultTable::new(cfg, columns);
    for p in points {
        let status = match (&p.t_r1, &p.t_e13) {
            (Ok(_), Ok(_)) => "ok",
            (Err(_), Ok(_)) => "not_converged_r1",
            (Ok(_), Err(_)) => "not_converged_E13",
            (Err(_), Err(_)) => "not_converged",
        };
        table.push(vec![
            p.kappa2.into(),
            p.t_r1.ok().into(),
            p.t_e13.ok().into(),
            p.estimate_r1.into(),
            p.estimate_e13.into(),
            p.rates.delta_pm[1].into(),
            p.rates.kappa_pm[0].into(),
            p.rates.kappa_pm[1].into(),
            status.into(),
        ]);
    }
    Ok(table)
}

/// Reset infidelity after preparing for `tau_s` at the EP-2 and relaxing for
/// `tau_r` with offsets `(ε₂, ε₃)` (real, degenerate frequencies).
pub fn reset_infidelity(prepared: &CovarianceMatrix, kappa1: f64, eps2: f64, eps3: f64, tau_r: f64, frame: Frame) -> Result<f64> {
    let p = params_from_epsilon(kappa1, EpsilonPoint::real(eps2, eps3), frame)?;
    Ok(metrics::reset_fidelity(&evolve_to(&p, prepared, tau_r)?).infidelity)
}

pub fn cmd_reset_grid(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect(cfg, Experiment::ResetGrid)?;
    let (kappa1, r, frame) = (cfg.num("kappa1"), cfg.num("r"), cfg.frame());
    let (tau_s, tau_r) = (cfg.nums("tau_s"), cfg.nums("tau_r"));
    let (e3, e2) = (cfg.grid("eps3"), cfg.grid("eps2"));
    let prepared = tau_s.iter().map(|t| prepared_state(kappa1, r, *t, frame)).collect::<Result<Vec<_>>>()?;
    let per_tau = e3.len() * e2.len();
    let n = tau_s.len() * tau_r.len() * per_tau;
    let values = par_indexed(n, cfg.seed(), |i| {
        let (ts, rest) = (i / (tau_r.len() * per_tau), i % (tau_r.len() * per_tau));
        let (tr, cell) = (rest / per_tau, rest % per_tau);
        reset_infidelity(&prepared[ts], kappa1, e2[cell % e2.len()], e3[cell / e2.len()], tau_r[tr], frame)
    })?;
    let columns = vec![
        col("kind", ""),
        col("eps3", "1"),
        col("eps2", "1"),
        col("tau_s", "1/g"),
        col("tau_r", "1/g"),
        col("I_ss", "1"),
        col("label", ""),
    ];
    let mut table = ResultTable::new(cfg, columns);
    for (i, value) in values.into_iter().enumerate() {
        let (ts, rest) = (i / (tau_r.len() * per_tau), i % (tau_r.len() * per_tau));
        let (tr, cell) = (rest / per_tau, rest % per_tau);
        table.push(vec![
            "grid".into(),
            e3[cell / e2.len()].into(),
            e2[cell % e2.len()].into(),
            tau_s[ts].into(),
            tau_r[tr].into(),
            value.into(),
            Cell::Empty,
        ]);
    }
    if cfg.boolean("overlay") {
        let (lo, hi) = (e2[0], e2[e2.len() - 1]);
        for b in [EpBranch::PP, EpBranch::PM, EpBranch::MM] {
            for &x in &e3 {
                if let Ok(f) = epmap::branch_f(C64::new(x, 0.0), b) {
                    if f.re >= lo && f.re <= hi {
                        table.push(vec!["branch".into(), x.into(), f.re.into(), Cell::Empty, Cell::Empty, Cell::Empty, Cell::Text(b.label())]);
                    }
                }
            }
        }
        table.push(vec!["ep3".into(), 2.0.into(), 1.0.into(), Cell::Empty, Cell::Empty, Cell::Empty, "EP-3".into()]);
    }
    Ok(table)
}

pub fn cmd_reset_time(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect(cfg, Experiment::ResetTime)?;
    let (kappa1, frame) = (cfg.num("kappa1"), cfg.frame());
    let (tau_s, r_list, tau_r) = (cfg.nums("tau_s"), cfg.nums("r_list"), cfg.grid("tau_r"));
    let ep3 = ep3_params(kappa1, frame)?;
    let pairs: Vec<(f64, f64)> = tau_s.iter().flat_map(|t| r_list.iter().map(move |r| (*t, *r))).collect();
    let prepared = pairs.iter().map(|(t, r)| prepared_state(kappa1, *r, *t, frame)).collect::<Result<Vec<_>>>()?;
    let propagator = Propagator::new(&build_system(&ep3))?;
    let values = par_indexed(pairs.len() * tau_r.len(), cfg.seed(), |i| {
        let v = propagator.at(&prepared[i / tau_r.len()], tau_r[i % tau_r.len()])?;
        Ok(metrics::reset_fidelity(&v).infidelity)
    })?;
    let mut table = ResultTable::new(cfg, vec![col("tau_s", "1/g"), col("r", "1"), col("tau_r", "1/g"), col("I_ss", "1")]);
    for (i, value) in values.into_iter().enumerate() {
        let (ts, r) = pairs[i / tau_r.len()];
        table.push(vec![ts.into(), r.into(), tau_r[i % tau_r.len()].into(), value.into()]);
    }
    Ok(table)
}

pub fn cmd_reset_squeeze(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect(cfg, Experiment::ResetSqueeze)?;
    let frame = cfg.frame();
    let (kappas, tau_s, tau_r, r_grid) = (cfg.nums("kappa1_list"), cfg.num("tau_s"), cfg.nums("tau_r"), cfg.grid("r"));
    let n = kappas.len() * tau_r.len() * r_grid.len();
    let index = |i: usize| {
        let per_k = tau_r.len() * r_grid.len();
        (i / per_k, (i % per_k) / r_grid.len(), i % r_grid.len())
    };
    let values = par_indexed(n, cfg.seed(), |i| {
        let (k, tr, ri) = index(i);
        let prepared = prepared_state(kappas[k], r_grid[ri], tau_s, frame)?;
        let v = evolve_to(&ep3_params(kappas[k], frame)?, &prepared, tau_r[tr])?;
        Ok(metrics::reset_fidelity(&v).infidelity)
    })?;
    let mut table = ResultTable::new(cfg, vec![col("kappa1", "g"), col("tau_r", "1/g"), col("r", "1"), col("I_ss", "1")]);
    for (i, value) in values.into_iter().enumerate() {
        let (k, tr, ri) = index(i);
        table.push(vec![kappas[k].into(), tau_r[tr].into(), r_grid[ri].into(), value.into()]);
    }
    Ok(table)
}

/// Maxima of `r₁`, `N̄₁` and `E₁₃` over a trajectory at the EP-2.
pub fn ep2_maxima(kappa1: f64, r: f64, t_max: f64, dt: f64, frame: Frame) -> Result<[f64; 3]> {
    let trace = simulate_trace(&ep2_params(kappa1, frame)?, r, t_max, dt)?;
    let max = |c| trace.channel(c).iter().copied().fold(0.0, f64::max);
    Ok([max(Channel::R1), max(Channel::NBar1), max(Channel::E13)])
}

pub fn cmd_bounds(cfg: &ExperimentConfig) -> Result<ResultTable> {
    expect(cfg, Experiment::Bounds)?;
    let (kappas, r_grid, frame) = (cfg.nums("kappa1_list"), cfg.grid("r"), cfg.frame());
    let (t_max, dt) = (cfg.num("t_max"), cfg.num("dt"));
    let maxima = par_indexed(kappas.len() * r_grid.len(), cfg.seed(), |i| {
        ep2_maxima(kappas[i / r_grid.len()], r_grid[i % r_grid.len()], t_max, dt, frame)
    })?;
    let columns = vec![
        col("kappa1", "g"),
        col("r", "1"),
        col("r1_max", "1"),
        col("n_bar1_max", "quanta"),
        col("E13_max", "ebit"),
        col("r_star", "1"),
        col("n_bar_star", "quanta"),
        col("E13_star", "ebit"),
    ];
    let mut table = ResultTable::new(cfg, columns);
    for (i, m) in maxima.into_iter().enumerate() {
        let r = r_grid[i % r_grid.len()];
        let b = metrics::quasistable_bounds(r)?;
        table.push(vec![
            kappas[i / r_grid.len()].into(),
            r.into(),
            m[0].into(),
            m[1].into(),
            m[2].into(),
            b.r_star.into(),
            b.n_bar_star.into(),
            b.e13_star.into(),
        ]);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(e: Experiment, pairs: &[(&str, Value)]) -> Result<ExperimentConfig> {
        let m: Map<String, Value> = pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect();
        ExperimentConfig::new(e, &m)
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
        }
        assert!("fly".parse::<Experiment>().is_err());
    }

    #[test]
    fn defaults_are_echoed_in_order() {
        let c = ExperimentConfig::defaults(Experiment::Bounds).unwrap();
        let keys: Vec<String> = c.echo().keys().cloned().collect();
        assert_eq!(keys, ["experiment", "kappa1_list", "r_min", "r_max", "r_steps", "t_max", "dt", "omega1", "frame", "seed"]);
        assert_eq!(c.echo()["seed"], Value::Null);
    }

    #[test]
    fn unknown_and_foreign_keys_are_errors() {
        let e = cfg(Experiment::Bounds, &[("kapa1", json!(1.0))]).unwrap_err();
        assert!(e.to_string().contains("unknown key"));
        let e = cfg(Experiment::Bounds, &[("sigma", json!(1.0))]).unwrap_err();
        assert!(e.to_string().contains("stabilize"));
        assert!(cfg(Experiment::Bounds, &[("experiment", json!("evolve"))]).is_err());
    }

    #[test]
    fn evolve_requires_exactly_one_r2_key() {
        assert!(ExperimentConfig::defaults(Experiment::Evolve).is_err());
        assert!(cfg(Experiment::Evolve, &[("eps2", json!(2.0)), ("kappa2", json!(5.0))]).is_err());
        assert!(cfg(Experiment::Evolve, &[("kappa2", json!(5.0))]).is_ok());
    }

    #[test]
    fn ranges_are_checked() {
        assert!(cfg(Experiment::Bounds, &[("t_max", json!(0.0))]).is_err());
        assert!(cfg(Experiment::Bounds, &[("r_min", json!(3.0))]).is_err());
        assert!(cfg(Experiment::Bounds, &[("r_steps", json!(0))]).is_err());
        assert!(cfg(Experiment::Bounds, &[("frame", json!("moving"))]).is_err());
        assert!(cfg(Experiment::Bounds, &[("r_steps", json!(2.5))]).is_err());
        assert!(cfg(Experiment::Epmap, &[("branches", json!(["+x"]))]).is_err());
        assert!(cfg(Experiment::Bounds, &[("kappa1_list", json!([]))]).is_err());
    }

    #[test]
    fn scalars_coerce_to_lists() {
        let c = cfg(Experiment::ResetTime, &[("tau_s", json!(4)), ("r_list", json!(0.5))]).unwrap();
        assert_eq!(c.nums("tau_s"), vec![4.0]);
        assert_eq!(c.echo()["r_list"], json!([0.5]));
    }

    #[test]
    fn set_parsing() {
        assert_eq!(parse_set("kappa1=1e-3").unwrap(), ("kappa1".into(), json!(1e-3)));
        assert_eq!(parse_set("frame=lab").unwrap(), ("frame".into(), json!("lab")));
        assert_eq!(parse_set("tau_r=[2,6]").unwrap(), ("tau_r".into(), json!([2, 6])));
        assert!(parse_set("novalue").is_err());
        assert!(parse_set("=3").is_err());
    }

    #[test]
    fn linspace_endpoints() {
        assert_eq!(linspace(0.0, 6.0, 4), vec![0.0, 2.0, 4.0, 6.0]);
        assert_eq!(linspace(1.0, 2.0, 1), vec![1.0]);
        let g = linspace(0.0, 0.3, 7);
        assert_eq!(g[6], 0.3);
    }

    #[test]
    fn csv_layout() {
        let c = cfg(Experiment::Bounds, &[("kappa1_list", json!([1e-3])), ("r_steps", json!(2)), ("t_max", json!(0.5))]).unwrap();
        let t = cmd_bounds(&c).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        let meta: Value = serde_json::from_str(&lines.next().unwrap()[1..]).unwrap();
        assert_eq!(meta["config"], Value::Object(c.echo()));
        assert_eq!(meta["tool"], json!("epgauss"));
        assert_eq!(lines.next().unwrap(), "kappa1,r,r1_max,n_bar1_max,E13_max,r_star,n_bar_star,E13_star");
        assert_eq!(lines.count(), 2);
        let mut buf = Vec::new();
        t.write_jsonl(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 3);
    }

    #[test]
    fn config_round_trips_through_metadata() {
        let c = cfg(Experiment::Stabilize, &[("kappa2_steps", json!(3)), ("seed", json!(7))]).unwrap();
        let again = ExperimentConfig::new(Experiment::Stabilize, &c.echo()).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn vacuum_evolution_stays_vacuum() {
        let c = cfg(Experiment::Evolve, &[("eps2", json!(2.0)), ("r", json!(0.0)), ("t_max", json!(2.0))]).unwrap();
        let t = cmd_evolve(&c).unwrap();
        assert_eq!(t.rows().len(), 201);
        for name in ["r1", "r2", "r3", "E12", "E13", "E23", "I_ss"] {
            assert!(t.column(name).unwrap().iter().all(|x| x.unwrap().abs() <= 1e-10), "{name}");
        }
    }

    #[test]
    fn unphysical_offsets_are_parameter_errors() {
        let c = cfg(Experiment::Evolve, &[("eps2", json!(-3.0))]).unwrap();
        let err = cmd_evolve(&c).unwrap_err();
        assert!(err.is_parameter_error());
    }

    #[test]
    fn epmap_flags_divergence_and_markers() {
        let c = ExperimentConfig::defaults(Experiment::Epmap).unwrap();
        let t = cmd_epmap(&c).unwrap();
        let status = t.column_index("status").unwrap();
        let branch = t.column_index("branch").unwrap();
        let first_pp = t.rows().iter().find(|r| r[branch].as_str() == Some("++")).unwrap();
        assert_eq!(first_pp[2].as_f64(), Some(2.0));
        let divergent = t.rows().iter().filter(|r| r[status].as_str() == Some("divergent")).count();
        assert_eq!(divergent, 2);
        assert!(t.rows().iter().any(|r| r[status].as_str() == Some("asymptote")));
        let markers: Vec<_> = t.rows().iter().filter(|r| r[status].as_str() == Some("ep3_marker")).collect();
        assert_eq!(markers.len(), 1);
        assert_eq!(markers[0][0].as_f64(), Some(2.0));

        let c = cfg(Experiment::Epmap, &[("axis", json!("imaginary")), ("eps_min", json!(-2.0)), ("eps_max", json!(2.0))]).unwrap();
        let t = cmd_epmap(&c).unwrap();
        let markers = t.rows().iter().filter(|r| r[status].as_str() == Some("ep3_marker")).count();
        assert_eq!(markers, 4);
    }

    #[test]
    fn seeded_order_does_not_change_output() {
        let base = [("kappa1", json!(1e-3)), ("r_list", json!([1.0])), ("tau_r_steps", json!(5)), ("tau_s", json!([0.0]))];
        let a = cmd_reset_time(&cfg(Experiment::ResetTime, &base).unwrap()).unwrap();
        let mut seeded = base.to_vec();
        seeded.push(("seed", json!(42)));
        let b = cmd_reset_time(&cfg(Experiment::ResetTime, &seeded).unwrap()).unwrap();
        assert_eq!(a.rows(), b.rows());
    }

    #[test]
    fn reset_grid_without_reset_time_is_flat() {
        let c = cfg(
            Experiment::ResetGrid,
            &[("tau_s", json!([8.0])), ("tau_r", json!([0.0])), ("eps3_steps", json!(4)), ("eps2_steps", json!(3)), ("overlay", json!(false))],
        )
        .unwrap();
        let t = cmd_reset_grid(&c).unwrap();
        let values: Vec<f64> = t.column("I_ss").unwrap().into_iter().map(Option::unwrap).collect();
        assert_eq!(values.len(), 12);
        assert!(values.iter().all(|v| (v - values[0]).abs() < 1e-14));
    }
}
