//! Model, solution and policy files.

use std::io::Read;
use std::sync::OnceLock;

use ctmdp_core::average::AverageSolution;
use ctmdp_core::builtins::{build_potlach, BuiltinSpec, PotlachAction, PotlachProcess};
use ctmdp_core::model::{
    validate_model, ActionSets, CtmdpModel, LyapunovData, Provenance, RateKernel, RewardTable, StateSpace,
    StationaryPolicy,
};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::args::ModelArgs;
use crate::Failure;

/// Model file: `{"kind": "builtin", ...}` or `{"kind": "explicit", ...}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFile {
    Builtin(BuiltinFile),
    Explicit(ExplicitFile),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BuiltinFile {
    pub name: String,
    #[serde(default)]
    pub params: Value,
    #[serde(default)]
    pub truncation: Option<usize>,
    #[serde(default)]
    pub action_grid: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitFile {
    pub states: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Vec<Vec<i64>>>,
    pub actions: Vec<Vec<Vec<f64>>>,
    pub rates: Vec<RateEntry>,
    pub rewards: Vec<RewardEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub x: usize,
    pub a: usize,
    pub entries: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardEntry {
    pub x: usize,
    pub a: usize,
    pub r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovFile {
    pub w: Vec<f64>,
    pub c: f64,
    pub b: f64,
    #[serde(rename = "Mq")]
    pub m_q: f64,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wprime: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cprime: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bprime: Option<f64>,
    #[serde(rename = "Mprime", default, skip_serializing_if = "Option::is_none")]
    pub mprime: Option<f64>,
}

/// A resolved model: its echoable source plus what it builds to.
pub struct LoadedModel {
    pub source: Value,
    pub builtin: Option<BuiltinSpec>,
    pub kind: ModelKind,
}

pub enum ModelKind {
    Table(Box<CtmdpModel>),
    Potlach(PotlachProcess),
}

impl LoadedModel {
    /// The tabulated model, rejecting invalid generators (exit 2).
    pub fn table(&self) -> Result<&CtmdpModel, Failure> {
        match &self.kind {
            ModelKind::Table(m) => {
                let rep = validate_model(m);
                if !rep.ok {
                    let first: Vec<String> = rep
                        .violations
                        .iter()
                        .take(5)
                        .map(|v| match v.a {
                            Some(a) => format!("state {} action {a}: {}", v.x, v.message),
                            None => format!("state {}: {}", v.x, v.message),
                        })
                        .collect();
                    return Err(Failure::input(format!(
                        "model fails validation ({} violations): {}",
                        rep.violations.len(),
                        first.join("; ")
                    )));
                }
                Ok(m)
            }
            ModelKind::Potlach(_) => {
                Err(Failure::input("potlach is simulation-only; this command needs a tabulated model".into()))
            }
        }
    }
}

static STDIN: OnceLock<Result<String, String>> = OnceLock::new();

fn stdin_text() -> Result<String, Failure> {
    STDIN
        .get_or_init(|| {
            let mut s = String::new();
            std::io::stdin().read_to_string(&mut s).map(|_| s).map_err(|e| e.to_string())
        })
        .clone()
        .map_err(|e| Failure::input(format!("reading stdin: {e}")))
}

/// Text of `-` (stdin), an inline JSON document, or a file.
pub fn read_text(spec: &str, what: &str) -> Result<String, Failure> {
    if spec == "-" {
        return stdin_text();
    }
    let t = spec.trim_start();
    if t.starts_with('{') || t.starts_with('[') {
        return Ok(spec.to_string());
    }
    std::fs::read_to_string(spec).map_err(|e| Failure::input(format!("{what} {spec}: {e}")))
}

fn parse_value(text: &str, what: &str) -> Result<Value, Failure> {
    serde_json::from_str(text).map_err(|e| Failure::input(format!("{what}: malformed JSON: {e}")))
}

/// A report produced by this tool carries `format_version`.
fn is_report(v: &Value) -> bool {
    v.get("format_version").is_some()
}

pub fn load_model(args: &ModelArgs) -> Result<LoadedModel, Failure> {
    let file = if let Some(spec) = &args.model {
        let text = read_text(spec, "model")?;
        let v = parse_value(&text, "model")?;
        if is_report(&v) {
            let src = v
                .pointer("/config/model")
                .ok_or_else(|| Failure::input("report has no embedded model (config.model)".into()))?;
            serde_json::from_value::<ModelFile>(src.clone())
                .map_err(|e| Failure::input(format!("embedded model: {e}")))?
        } else {
            // Re-parse from text so errors carry line and column.
            serde_json::from_str::<ModelFile>(&text).map_err(|e| Failure::input(format!("model: {e}")))?
        }
    } else if let Some(name) = &args.builtin {
        let params = match &args.params {
            Some(p) => parse_value(&read_text(p, "params")?, "params")?,
            None => Value::Object(Default::default()),
        };
        ModelFile::Builtin(BuiltinFile { name: name.clone(), params, truncation: None, action_grid: None })
    } else {
        return Err(Failure::input("give --model FILE or --builtin NAME".into()));
    };
    let file = match file {
        ModelFile::Builtin(mut b) => {
            if args.truncation.is_some() {
                b.truncation = args.truncation;
            }
            if args.action_grid.is_some() {
                b.action_grid = args.action_grid;
            }
            ModelFile::Builtin(b)
        }
        other => other,
    };
    build(file)
}

fn build(file: ModelFile) -> Result<LoadedModel, Failure> {
    match file {
        ModelFile::Builtin(b) => {
            let params = if b.params.is_null() { Value::Object(Default::default()) } else { b.params.clone() };
            let tagged = serde_json::json!({ "name": b.name, "params": params });
            let mut spec: BuiltinSpec = serde_json::from_value(tagged)
                .map_err(|e| Failure::input(format!("builtin {}: {e}", b.name)))?;
            if let Some(n) = b.truncation {
                spec.set_truncation(n);
            }
            if let Some(g) = b.action_grid {
                spec.set_grid(g);
            }
            let resolved = serde_json::to_value(&spec).map_err(|e| Failure::input(e.to_string()))?;
            let source = serde_json::json!({
                "kind": "builtin",
                "name": spec.name(),
                "params": resolved["params"].clone(),
                "truncation": spec.truncation(),
                "action_grid": b.action_grid,
            });
            let kind = match &spec {
                BuiltinSpec::Potlach(p) => ModelKind::Potlach(build_potlach(p).map_err(Failure::from_core)?),
                _ => ModelKind::Table(Box::new(spec.build().map_err(Failure::from_core)?)),
            };
            Ok(LoadedModel { source, builtin: Some(spec), kind })
        }
        ModelFile::Explicit(e) => {
            let source = serde_json::to_value(ModelFile::Explicit(e.clone())).map_err(|e| Failure::input(e.to_string()))?;
            Ok(LoadedModel { source, builtin: None, kind: ModelKind::Table(Box::new(explicit_model(e)?)) })
        }
    }
}

fn explicit_model(e: ExplicitFile) -> Result<CtmdpModel, Failure> {
    let n = e.states;
    if e.actions.len() != n {
        return Err(Failure::input(format!("actions has {} entries, expected {n}", e.actions.len())));
    }
    let mut rows: Vec<Vec<Vec<(usize, f64)>>> = e.actions.iter().map(|a| vec![Vec::new(); a.len()]).collect();
    let mut rewards: Vec<Vec<Option<f64>>> = e.actions.iter().map(|a| vec![None; a.len()]).collect();
    let slot = |x: usize, a: usize, what: &str| -> Result<(), Failure> {
        if x >= n || a >= e.actions[x].len() {
            return Err(Failure::input(format!("{what} entry for (x={x}, a={a}) is out of range")));
        }
        Ok(())
    };
    for r in &e.rates {
        slot(r.x, r.a, "rates")?;
        rows[r.x][r.a].extend_from_slice(&r.entries);
    }
    for r in &e.rewards {
        slot(r.x, r.a, "rewards")?;
        if rewards[r.x][r.a].replace(r.r).is_some() {
            return Err(Failure::input(format!("duplicate reward for (x={}, a={})", r.x, r.a)));
        }
    }
    let mut table = Vec::with_capacity(n);
    for (x, rs) in rewards.into_iter().enumerate() {
        let mut row = Vec::with_capacity(rs.len());
        for (a, r) in rs.into_iter().enumerate() {
            row.push(r.ok_or_else(|| Failure::input(format!("missing reward for (x={x}, a={a})")))?);
        }
        table.push(row);
    }
    let lyapunov = e.lyapunov.map(|l| LyapunovData {
        w: l.w,
        c: l.c,
        b: l.b,
        m_q: l.m_q,
        m: l.m,
        wprime: l.wprime,
        cprime: l.cprime,
        bprime: l.bprime,
        mprime: l.mprime,
    });
    CtmdpModel::new(
        StateSpace { size: n, labels: e.labels, truncation_level: None },
        ActionSets::new(e.actions),
        RateKernel::new(rows),
        RewardTable { r: table },
        lyapunov,
        Provenance::Explicit,
    )
    .map_err(Failure::from_core)
}

/// A solution from `solve-average`: the report, its `result`, or the bare object.
pub fn load_solution(spec: &str) -> Result<AverageSolution, Failure> {
    let text = read_text(spec, "solution")?;
    let v = parse_value(&text, "solution")?;
    let body = if is_report(&v) { v.get("result").cloned().unwrap_or(Value::Null) } else { v };
    serde_json::from_value(body).map_err(|e| Failure::input(format!("solution: {e}")))
}

/// Policy: `first`, a JSON array of action indices, `{"actions": [...]}`, or
/// a report / solution carrying a `policy`.
pub fn load_policy(spec: &str, model: &CtmdpModel) -> Result<StationaryPolicy, Failure> {
    if spec == "first" {
        return Ok(StationaryPolicy::first(model));
    }
    let v = parse_value(&read_text(spec, "policy")?, "policy")?;
    let v = if is_report(&v) { v.get("result").cloned().unwrap_or(Value::Null) } else { v };
    let v = match v.get("policy") {
        Some(p) => p.clone(),
        None => v,
    };
    let f: StationaryPolicy = if v.is_array() {
        StationaryPolicy::new(serde_json::from_value(v).map_err(|e| Failure::input(format!("policy: {e}")))?)
    } else {
        serde_json::from_value(v).map_err(|e| Failure::input(format!("policy: {e}")))?
    };
    f.check(model).map_err(Failure::from_core)?;
    Ok(f)
}

pub fn load_potlach_action(spec: Option<&str>, process: &PotlachProcess) -> Result<PotlachAction, Failure> {
    let a = match spec {
        None => PotlachAction { matrix: 0, q: process.params.q_star.clone() },
        Some(s) => serde_json::from_value(parse_value(&read_text(s, "action")?, "action")?)
            .map_err(|e| Failure::input(format!("action: {e}")))?,
    };
    process.check_action(&a).map_err(Failure::from_core)?;
    Ok(a)
}
