//! Deterministic JSON output: sorted keys, floats with 17 significant
//! digits, non-finite values as `null`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::Failure;

pub const FORMAT_VERSION: &str = "ctmdp-report/1";

pub fn to_value<T: Serialize>(v: &T) -> Result<Value, Failure> {
    serde_json::to_value(v).map_err(|e| Failure::input(format!("serializing report: {e}")))
}

/// `{format_version, command, config: {model, options}, result}`.
pub fn envelope(command: &str, model: Option<&Value>, options: Value, result: Value) -> Value {
    let mut config = serde_json::Map::new();
    if let Some(m) = model {
        config.insert("model".into(), m.clone());
    }
    config.insert("options".into(), options);
    serde_json::json!({
        "format_version": FORMAT_VERSION,
        "command": command,
        "config": Value::Object(config),
        "result": result,
    })
}

pub fn render(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                let _ = write!(out, "{i}");
            } else if let Some(u) = n.as_u64() {
                let _ = write!(out, "{u}");
            } else {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if f.is_finite() {
                    let _ = write!(out, "{f:.16e}");
                } else {
                    out.push_str("null");
                }
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(a) => {
            if a.is_empty() {
                out.push_str("[]");
                return;
            }
            // Scalar arrays stay on one line.
            if a.iter().all(|x| !x.is_array() && !x.is_object()) {
                out.push('[');
                for (i, x) in a.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    write_value(out, x, depth + 1);
                }
                out.push(']');
                return;
            }
            out.push_str("[\n");
            for (i, x) in a.iter().enumerate() {
                indent(out, depth + 1);
                write_value(out, x, depth + 1);
                out.push_str(if i + 1 < a.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(m) => {
            if m.is_empty() {
                out.push_str("{}");
                return;
            }
            out.push_str("{\n");
            // serde_json's default map is ordered by key.
            for (i, (k, x)) in m.iter().enumerate() {
                indent(out, depth + 1);
                out.push_str(&Value::String(k.clone()).to_string());
                out.push_str(": ");
                write_value(out, x, depth + 1);
                out.push_str(if i + 1 < m.len() { ",\n" } else { "\n" });
            }
            indent(out, depth);
            out.push('}');
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

pub fn emit(v: &Value, out: Option<&Path>) -> Result<(), Failure> {
    let text = render(v);
    match out {
        Some(p) => std::fs::write(p, text).map_err(|e| Failure::input(format!("writing {}: {e}", p.display()))),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes()).and_then(|_| so.flush()).map_err(|e| Failure::input(format!("stdout: {e}")))
        }
    }
}

/// A CSV cell: integers plain, other finite values with 17 significant
/// digits, non-finite values empty.
pub enum Cell {
    Int(u64),
    Num(f64),
}

/// Writes a CSV series with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), Failure> {
    let io = |e: csv::Error| Failure::input(format!("writing {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r.iter().map(|c| match c {
            Cell::Int(i) => i.to_string(),
            Cell::Num(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Num(_) => String::new(),
        }))
        .map_err(io)?;
    }
    w.flush().map_err(|e| Failure::input(format!("writing {}: {e}", path.display())))
}
