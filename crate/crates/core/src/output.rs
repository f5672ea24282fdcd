//! JSON documents and text tables for produce outputs.

use serde_json::{json, Map, Number, Value};

use crate::realapp::{ContributionsOutput, ExamplesOutput, ImportanceOutput};
use crate::tabular::{format_number, Cell};
use crate::transform::{AuditAction, AuditEvent, ExplanationStep};

fn number(x: f64) -> Value {
    Number::from_f64(x).map(Value::Number).unwrap_or(Value::Null)
}

pub fn cell_json(c: &Cell) -> Value {
    match c {
        Cell::Numeric(x) => number(*x),
        Cell::Categorical(s) => Value::String(s.clone()),
        Cell::Boolean(b) => Value::String(b.to_string()),
        Cell::Missing => Value::Null,
        Cell::Any => Value::String("(any)".into()),
    }
}

pub fn audit_json(e: &AuditEvent) -> Value {
    json!({
        "transformer": format!("{}#{}", e.transformer, e.index),
        "step": match e.step {
            ExplanationStep::Inverse => "inverse",
            ExplanationStep::Forward => "forward",
        },
        "action": match e.action {
            AuditAction::Skipped => "skipped",
            AuditAction::Stopped => "stopped",
            AuditAction::Warning => "warning",
        },
        "message": e.message,
    })
}

pub fn contributions_json(out: &ContributionsOutput) -> Value {
    let rows: Map<String, Value> = out
        .rows
        .iter()
        .map(|(id, records)| {
            let list = records
                .iter()
                .map(|r| json!({ "feature": r.feature, "value": cell_json(&r.value), "contribution": number(r.contribution) }))
                .collect();
            (id.clone(), Value::Array(list))
        })
        .collect();
    json!({
        "type": "feature_contributions",
        "space": out.space.to_string(),
        "base_value": number(out.base_value),
        "rows": rows,
        "audit": out.audit.iter().map(audit_json).collect::<Vec<_>>(),
    })
}

pub fn importance_json(out: &ImportanceOutput) -> Value {
    json!({
        "type": "feature_importance",
        "entries": out
            .entries
            .iter()
            .map(|e| json!({ "feature": e.feature, "importance": number(e.importance) }))
            .collect::<Vec<_>>(),
    })
}

pub fn examples_json(out: &ExamplesOutput) -> Value {
    let rows: Map<String, Value> = out
        .rows
        .iter()
        .map(|(id, records)| {
            let list = records
                .iter()
                .map(|r| {
                    let example: Map<String, Value> =
                        r.example.iter().map(|(k, v)| (k.clone(), cell_json(v))).collect();
                    json!({ "example": example, "target": cell_json(&r.target), "distance": number(r.distance) })
                })
                .collect();
            (id.clone(), Value::Array(list))
        })
        .collect();
    json!({ "type": "similar_examples", "rows": rows })
}

/// Pretty-printed JSON with a trailing newline.
pub fn render_json(doc: &Value) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("JSON values always serialize");
    s.push('\n');
    s
}

/// Left-aligned fixed-width columns separated by two spaces.
fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells
            .zip(&widths)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        out.push_str(parts.join("  ").trim_end());
        out.push('\n');
    };
    line(&mut header.iter().copied());
    for row in rows {
        line(&mut row.iter().map(String::as_str));
    }
    out
}

fn cell_text(c: &Cell) -> String {
    match c {
        Cell::Missing => "null".into(),
        Cell::Any => "(any)".into(),
        c => c.render().into_owned(),
    }
}

pub fn contributions_table(out: &ContributionsOutput) -> String {
    let mut s = format!("space: {}\nbase value: {}\n", out.space, format_number(out.base_value));
    for (id, records) in &out.rows {
        let mut sorted: Vec<_> = records.iter().collect();
        sorted.sort_by(|a, b| b.contribution.abs().total_cmp(&a.contribution.abs()));
        let rows: Vec<Vec<String>> = sorted
            .iter()
            .map(|r| vec![r.feature.clone(), cell_text(&r.value), format_number(r.contribution)])
            .collect();
        s.push_str(&format!("\nrow {id}\n"));
        s.push_str(&aligned(&["feature", "value", "contribution"], &rows));
    }
    for e in &out.audit {
        s.push_str(&format!("audit: {e}\n"));
    }
    s
}

pub fn importance_table(out: &ImportanceOutput) -> String {
    let mut sorted: Vec<_> = out.entries.iter().collect();
    sorted.sort_by(|a, b| b.importance.abs().total_cmp(&a.importance.abs()));
    let rows: Vec<Vec<String>> = sorted
        .iter()
        .map(|e| vec![e.feature.clone(), format_number(e.importance)])
        .collect();
    aligned(&["feature", "importance"], &rows)
}

pub fn examples_table(out: &ExamplesOutput) -> String {
    let mut s = String::new();
    for (id, records) in &out.rows {
        s.push_str(&format!("row {id}\n"));
        let features: Vec<&str> = records
            .first()
            .map(|r| r.example.keys().map(String::as_str).collect())
            .unwrap_or_default();
        let mut header = vec!["example", "distance", "target"];
        header.extend(&features);
        let rows: Vec<Vec<String>> = records
            .iter()
            .map(|r| {
                let mut row = vec![r.id.clone(), format_number(r.distance), cell_text(&r.target)];
                row.extend(r.example.values().map(cell_text));
                row
            })
            .collect();
        s.push_str(&aligned(&header, &rows));
        s.push('\n');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explanation::FeatureSpace;
    use crate::realapp::{ContributionRecord, ImportanceRecord};
    use indexmap::IndexMap;

    fn contributions() -> ContributionsOutput {
        let mut rows = IndexMap::new();
        rows.insert(
            "a".to_string(),
            vec![
                ContributionRecord { feature: "x".into(), value: Cell::Numeric(1.5), contribution: 0.25 },
                ContributionRecord { feature: "flag".into(), value: Cell::Boolean(true), contribution: -2.0 },
                ContributionRecord { feature: "gone".into(), value: Cell::Missing, contribution: 0.0 },
                ContributionRecord { feature: "free".into(), value: Cell::Any, contribution: 1.0 },
            ],
        );
        ContributionsOutput {
            space: FeatureSpace::Interpretable,
            base_value: 3.0,
            rows,
            audit: Vec::new(),
            stopped: false,
        }
    }

    #[test]
    fn contributions_json_golden() {
        let got = serde_json::to_string(&contributions_json(&contributions())).unwrap();
        let want = r#"{"type":"feature_contributions","space":"interpretable","base_value":3.0,"rows":{"a":[{"feature":"x","value":1.5,"contribution":0.25},{"feature":"flag","value":"true","contribution":-2.0},{"feature":"gone","value":null,"contribution":0.0},{"feature":"free","value":"(any)","contribution":1.0}]},"audit":[]}"#;
        assert_eq!(got, want);
    }

    #[test]
    fn shortest_round_trip_numbers() {
        assert_eq!(serde_json::to_string(&number(0.1 + 0.2)).unwrap(), "0.30000000000000004");
        assert_eq!(serde_json::to_string(&number(1e-7)).unwrap(), "1e-7");
    }

    #[test]
    fn table_sorted_by_magnitude() {
        let text = contributions_table(&contributions());
        let order: Vec<&str> = text
            .lines()
            .skip_while(|l| !l.starts_with("feature"))
            .skip(1)
            .map(|l| l.split_whitespace().next().unwrap())
            .collect();
        assert_eq!(order, vec!["flag", "free", "x", "gone"]);
    }

    #[test]
    fn importance_json_golden() {
        let out = ImportanceOutput {
            space: FeatureSpace::Interpretable,
            entries: vec![ImportanceRecord { feature: "a".into(), importance: 0.5 }],
            audit: Vec::new(),
            stopped: false,
        };
        assert_eq!(
            serde_json::to_string(&importance_json(&out)).unwrap(),
            r#"{"type":"feature_importance","entries":[{"feature":"a","importance":0.5}]}"#
        );
    }
}
