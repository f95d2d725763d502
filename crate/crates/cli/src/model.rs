//! Model loading for `--model`, which takes either a file path or an
//! inline JSON descriptor. Validation reports every bad field at once.

use std::path::Path;

use hawkes_deviations::kernel::{KernelDescriptor, ModelDescriptor};
use hawkes_deviations::HawkesModel;
use serde_json::{Map, Value};

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read model file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("model JSON does not parse: {0}")]
    Syntax(String),
    #[error("invalid model descriptor:\n  - {}", .0.join("\n  - "))]
    Fields(Vec<String>),
}

pub fn load(arg: &str) -> Result<HawkesModel, ModelError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(Path::new(arg)).map_err(|source| ModelError::Io {
            path: arg.to_string(),
            source,
        })?
    };
    let value: Value = serde_json::from_str(&text).map_err(|e| ModelError::Syntax(e.to_string()))?;
    let desc = validate(&value).map_err(ModelError::Fields)?;
    HawkesModel::from_descriptor(&desc).map_err(|e| ModelError::Fields(vec![e.to_string()]))
}

fn number(map: &Map<String, Value>, key: &str, at: &str, issues: &mut Vec<String>) -> Option<f64> {
    match map.get(key) {
        None => {
            issues.push(format!("{at}{key}: missing"));
            None
        }
        Some(v) => match v.as_f64() {
            Some(x) if x.is_finite() => Some(x),
            _ => {
                issues.push(format!("{at}{key}: expected a finite number, got {v}"));
                None
            }
        },
    }
}

fn unknown_keys(map: &Map<String, Value>, allowed: &[&str], at: &str, issues: &mut Vec<String>) {
    for k in map.keys().filter(|k| !allowed.contains(&k.as_str())) {
        issues.push(format!("{at}{k}: unknown field"));
    }
}

/// Checks the descriptor shape and value ranges, collecting every problem.
pub fn validate(value: &Value) -> Result<ModelDescriptor, Vec<String>> {
    let mut issues = Vec::new();
    let Some(top) = value.as_object() else {
        return Err(vec!["model: expected a JSON object".into()]);
    };
    unknown_keys(top, &["nu", "kernel"], "", &mut issues);
    let nu = number(top, "nu", "", &mut issues);
    if let Some(nu) = nu {
        if nu <= 0.0 {
            issues.push(format!("nu: must be > 0, got {nu}"));
        }
    }
    let kernel = match top.get("kernel") {
        None => {
            issues.push("kernel: missing".into());
            None
        }
        Some(k) => kernel(k, &mut issues),
    };
    match (nu, kernel) {
        (Some(nu), Some(kernel)) if issues.is_empty() => Ok(ModelDescriptor { nu, kernel }),
        _ => Err(issues),
    }
}

fn kernel(value: &Value, issues: &mut Vec<String>) -> Option<KernelDescriptor> {
    let Some(map) = value.as_object() else {
        issues.push("kernel: expected a JSON object".into());
        return None;
    };
    match map.get("type").and_then(Value::as_str) {
        Some("finite") => {
            unknown_keys(map, &["type", "weights"], "kernel.", issues);
            let Some(raw) = map.get("weights") else {
                issues.push("kernel.weights: missing".into());
                return None;
            };
            let Some(items) = raw.as_array() else {
                issues.push(format!("kernel.weights: expected an array, got {raw}"));
                return None;
            };
            let before = issues.len();
            let weights: Vec<f64> = items
                .iter()
                .enumerate()
                .map(|(i, w)| match w.as_f64() {
                    Some(x) if x.is_finite() && x >= 0.0 => x,
                    _ => {
                        issues.push(format!("kernel.weights[{i}]: expected a finite number ≥ 0, got {w}"));
                        0.0
                    }
                })
                .collect();
            let total: f64 = weights.iter().sum();
            if issues.len() == before && total >= 1.0 {
                issues.push(format!("kernel.weights: ℓ¹ norm {total} must be < 1"));
            }
            (issues.len() == before).then_some(KernelDescriptor::Finite { weights })
        }
        Some("geometric") => {
            unknown_keys(map, &["type", "a", "r"], "kernel.", issues);
            let before = issues.len();
            let a = number(map, "a", "kernel.", issues);
            let r = number(map, "r", "kernel.", issues);
            if let Some(a) = a {
                if a < 0.0 {
                    issues.push(format!("kernel.a: must be ≥ 0, got {a}"));
                }
            }
            if let Some(r) = r {
                if !(r > 0.0 && r < 1.0) {
                    issues.push(format!("kernel.r: must lie in (0, 1), got {r}"));
                }
            }
            if let (Some(a), Some(r)) = (a, r) {
                if issues.len() == before && a * r / (1.0 - r) >= 1.0 {
                    issues.push(format!("kernel: ℓ¹ norm a·r/(1−r) = {} must be < 1", a * r / (1.0 - r)));
                }
            }
            match (a, r) {
                (Some(a), Some(r)) if issues.len() == before => Some(KernelDescriptor::Geometric { a, r }),
                _ => None,
            }
        }
        Some(other) => {
            issues.push(format!("kernel.type: expected \"finite\" or \"geometric\", got \"{other}\""));
            None
        }
        None => {
            issues.push("kernel.type: missing".into());
            None
        }
    }
}
