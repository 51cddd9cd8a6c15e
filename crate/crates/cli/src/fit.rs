//! Groups records into size series and fits their scaling.

use serde::Serialize;
use serde_json::{Map, Value};

use splitgap::scaling::{fit_stretched, FitModel, FitReport, ScalingDataset, ScalingPoint};

use crate::record::{canonical, RunRecord};

/// One fitted series, i.e. one row of the scaling-class table.
#[derive(Debug, Clone, Serialize)]
pub struct SeriesFit {
    pub series: String,
    pub command: String,
    /// Record inputs without `L`.
    pub inputs: Value,
    pub fit: FitReport,
    /// `(1 + alpha) / 2`.
    pub expected_p: f64,
    pub class: String,
    pub expected_class: Option<String>,
    pub matches: Option<bool>,
    pub sizes: Vec<usize>,
}

/// `stretched` when `p` is closer to `(1 + alpha)/2` than to 1.
pub fn classify(p: f64, alpha: f64) -> &'static str {
    let stretched = 0.5 * (1.0 + alpha);
    if (p - stretched).abs() < (p - 1.0).abs() {
        "stretched"
    } else {
        "exponential"
    }
}

/// Scaling class the model is known to have, where one is known.
pub fn expected_class(command: &str, inputs: &Value) -> Option<&'static str> {
    match command {
        "ed" | "rotor" => Some("stretched"),
        "toy" => match inputs.get("choice").and_then(Value::as_str)? {
            "sigma-xx" => Some("exponential"),
            c if c == "sigma-x" || c.starts_with("mixed:") => Some("stretched"),
            _ => None,
        },
        _ => None,
    }
}

fn label(command: &str, inputs: &Value) -> String {
    let s = |k: &str| inputs.get(k).and_then(Value::as_str).unwrap_or("?").to_string();
    let n = |k: &str| inputs.get(k).map_or("?".into(), Value::to_string);
    // lambda and alpha keep series from different sweep points apart
    let point = format!("lambda={}, alpha={}", n("lambda"), n("alpha"));
    match command {
        "ed" => format!("spin chain ({}, {point})", s("coupling")),
        "rotor" => format!("rotor chain ({}, {point})", s("coupling")),
        "toy" => format!("toy model ({}, {}, {point})", s("choice"), s("route")),
        other => other.to_string(),
    }
}

/// Fits every series with at least three usable sizes. Returns the fits and
/// notes about skipped records or series.
pub fn fit_records(records: &[RunRecord], model: FitModel) -> (Vec<SeriesFit>, Vec<String>) {
    let mut notes = Vec::new();
    // group by command + inputs without L, in order of first appearance
    let mut groups: Vec<(String, String, Value, Vec<ScalingPoint>)> = Vec::new();
    for r in records {
        let Some(log_delta) = r.log_delta().filter(|v| v.is_finite()) else {
            notes.push(format!("skipping {} record {} without log_delta", r.command, r.hash));
            continue;
        };
        let Some(l) = r.inputs.get("L").and_then(Value::as_u64) else {
            notes.push(format!("skipping {} record {} without L", r.command, r.hash));
            continue;
        };
        let mut rest: Map<String, Value> = r.inputs.as_object().cloned().unwrap_or_default();
        rest.remove("L");
        let rest = Value::Object(rest);
        let key = format!("{}|{}", r.command, canonical(&rest));
        let point = ScalingPoint {
            l: l as usize,
            log_delta,
            err: 0.0,
        };
        match groups.iter_mut().find(|g| g.0 == key) {
            Some(g) => {
                if g.3.iter().any(|p| p.l == point.l) {
                    notes.push(format!("duplicate L = {l} in series {}; keeping the first", label(&r.command, &rest)));
                } else {
                    g.3.push(point);
                }
            }
            None => groups.push((key, r.command.clone(), rest, vec![point])),
        }
    }
    let mut fits = Vec::new();
    for (_, command, inputs, points) in groups {
        let name = label(&command, &inputs);
        if points.len() < 3 {
            notes.push(format!("series {name}: {} sizes, need at least 3", points.len()));
            continue;
        }
        let sizes: Vec<usize> = {
            let mut s: Vec<usize> = points.iter().map(|p| p.l).collect();
            s.sort_unstable();
            s
        };
        let report = ScalingDataset::new(points, name.clone()).and_then(|d| fit_stretched(&d, model));
        let report = match report {
            Ok(r) => r,
            Err(e) => {
                notes.push(format!("series {name}: {e}"));
                continue;
            }
        };
        let alpha = inputs.get("alpha").and_then(Value::as_f64).unwrap_or(f64::NAN);
        let class = classify(report.p, alpha).to_string();
        let expected = expected_class(&command, &inputs).map(str::to_string);
        fits.push(SeriesFit {
            series: name,
            matches: expected.as_ref().map(|e| *e == class),
            expected_class: expected,
            class,
            expected_p: 0.5 * (1.0 + alpha),
            command,
            inputs,
            fit: report,
            sizes,
        });
    }
    (fits, notes)
}

/// Rows `series, L, minus_log_delta, fit` for plotting.
pub fn plot_rows(records: &[RunRecord], fits: &[SeriesFit]) -> Vec<Value> {
    let mut rows = Vec::new();
    for f in fits {
        for r in records {
            if r.command != f.command {
                continue;
            }
            let mut rest = r.inputs.as_object().cloned().unwrap_or_default();
            let l = rest.remove("L").and_then(|v| v.as_u64());
            if Value::Object(rest) != f.inputs {
                continue;
            }
            if let (Some(l), Some(ld)) = (l, r.log_delta()) {
                rows.push(serde_json::json!({
                    "series": f.series,
                    "L": l,
                    "minus_log_delta": -ld,
                    "fit": f.fit.predict(l as f64),
                }));
            }
        }
    }
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn rec(command: &str, l: usize, choice: &str, log_delta: f64) -> RunRecord {
        RunRecord::new(
            command,
            json!({"L": l, "alpha": 0.5, "choice": choice}),
            json!({"log_delta": log_delta}),
        )
    }

    #[test]
    fn classification_rule() {
        assert_eq!(classify(0.75, 0.5), "stretched");
        assert_eq!(classify(0.85, 0.5), "stretched");
        assert_eq!(classify(0.9, 0.5), "exponential");
        assert_eq!(classify(1.02, 0.5), "exponential");
    }

    #[test]
    fn series_are_separated() {
        let mut records = Vec::new();
        for l in [16usize, 32, 64, 128] {
            let lf = l as f64;
            records.push(rec("toy", l, "sigma-x", -2.0 * lf.powf(0.75)));
            records.push(rec("toy", l, "sigma-xx", -0.35 * lf));
        }
        records.push(RunRecord::new("toy", json!({"L": 8}), json!({})));
        let (fits, notes) = fit_records(&records, FitModel::PurePower);
        assert_eq!(fits.len(), 2);
        assert!((fits[0].fit.p - 0.75).abs() < 1e-9);
        assert_eq!(fits[0].matches, Some(true));
        assert!((fits[1].fit.p - 1.0).abs() < 1e-9);
        assert_eq!(fits[1].class, "exponential");
        assert_eq!(notes.len(), 1);
        let rows = plot_rows(&records, &fits);
        assert_eq!(rows.len(), 8);
        for r in rows {
            let a = r["minus_log_delta"].as_f64().unwrap();
            assert!((a - r["fit"].as_f64().unwrap()).abs() < 1e-8 * a);
        }
    }
}
