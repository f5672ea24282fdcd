use std::collections::HashMap;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::{is_additive, map_additive, map_pool, not_fitted, require_column, Outcome, TransformBehavior, UnsupportedMode};
use crate::error::{Error, Result};
use crate::explanation::{feature_positions, Explanation, MappedFeature};
use crate::tabular::{Cell, Column, DType, Table};

const NAME: &str = "mapping_encoder";

/// One lookup key component. Numbers become integers scaled by
/// 10^precision so lookups don't format a string per row.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum KeyPart {
    Scaled(i64),
    Text(String),
}

fn default_precision() -> usize {
    2
}

fn default_label() -> String {
    "unknown".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingEntry {
    pub key: Vec<Cell>,
    pub label: String,
}

/// Replaces a tuple of source columns with one categorical column looked up
/// from a fixed table (for example latitude/longitude to neighborhood).
/// Numeric source values are rounded to `key_precision` decimals before
/// lookup; unmatched tuples get `default_label`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MappingEncoder {
    pub source_columns: Vec<String>,
    pub target_column: String,
    pub lookup: Vec<MappingEntry>,
    #[serde(default = "default_label")]
    pub default_label: String,
    #[serde(default = "default_precision")]
    pub key_precision: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    fitted: bool,
    #[serde(skip)]
    index: OnceLock<HashMap<Vec<KeyPart>, String>>,
}

impl MappingEncoder {
    pub fn new(
        source_columns: Vec<String>,
        target_column: impl Into<String>,
        lookup: Vec<MappingEntry>,
        default_label: impl Into<String>,
        key_precision: usize,
    ) -> Result<Self> {
        let t = MappingEncoder {
            source_columns,
            target_column: target_column.into(),
            lookup,
            default_label: default_label.into(),
            key_precision,
            fitted: false,
            index: OnceLock::new(),
        };
        t.check()?;
        Ok(t)
    }

    fn check(&self) -> Result<()> {
        if self.source_columns.is_empty() {
            return Err(Error::Config("mapping_encoder needs at least one source column".into()));
        }
        if self.source_columns.contains(&self.target_column) {
            return Err(Error::Config(format!(
                "mapping_encoder target column {:?} is also a source column",
                self.target_column
            )));
        }
        let mut seen = HashMap::new();
        for entry in &self.lookup {
            if entry.key.len() != self.source_columns.len() {
                return Err(Error::Config(format!(
                    "mapping_encoder key {:?} has {} values for {} source columns",
                    entry.label,
                    entry.key.len(),
                    self.source_columns.len()
                )));
            }
            let key = self.key(entry.key.iter());
            if let Some(prev) = seen.insert(key, &entry.label) {
                if prev != &entry.label {
                    return Err(Error::Config(format!(
                        "mapping_encoder key maps to both {prev:?} and {:?}",
                        entry.label
                    )));
                }
            }
        }
        Ok(())
    }

    fn key_part(&self, cell: &Cell) -> KeyPart {
        match cell {
            Cell::Numeric(x) => {
                // Fast path when rounding the scaled value can't disagree with
                // decimal formatting: not near a tie and well inside f64 precision.
                if self.key_precision <= 15 {
                    let y = x * 10f64.powi(self.key_precision as i32);
                    if y.abs() < (1u64 << 40) as f64 && ((y - y.trunc()).abs() - 0.5).abs() > 1e-3 {
                        return KeyPart::Scaled(y.round() as i64);
                    }
                }
                let s = format!("{:.*}", self.key_precision, x);
                match s.replace('.', "").parse::<i64>() {
                    // -0.00 parses to 0, the same key as 0.00
                    Ok(v) => KeyPart::Scaled(v),
                    Err(_) => KeyPart::Text(s),
                }
            }
            other => KeyPart::Text(other.render().into_owned()),
        }
    }

    fn key<'c>(&self, cells: impl Iterator<Item = &'c Cell>) -> Vec<KeyPart> {
        cells.map(|c| self.key_part(c)).collect()
    }

    fn index(&self) -> &HashMap<Vec<KeyPart>, String> {
        self.index.get_or_init(|| {
            self.lookup
                .iter()
                .map(|e| (self.key(e.key.iter()), e.label.clone()))
                .collect()
        })
    }

    /// Label for one tuple of source values.
    pub fn label_for(&self, values: &[Cell]) -> &str {
        self.index()
            .get(&self.key(values.iter()))
            .map(String::as_str)
            .unwrap_or(&self.default_label)
    }
}

impl TransformBehavior for MappingEncoder {
    fn name(&self) -> &'static str {
        NAME
    }

    fn fit(&mut self, data: &Table) -> Result<()> {
        self.check()?;
        for s in &self.source_columns {
            require_column(data, NAME, s)?;
        }
        self.fitted = true;
        Ok(())
    }

    fn is_fitted(&self) -> bool {
        self.fitted
    }

    fn transform_data(&self, data: &Table) -> Result<Table> {
        if !self.fitted {
            return Err(not_fitted(NAME));
        }
        let sources: Vec<&Column> = self
            .source_columns
            .iter()
            .map(|s| require_column(data, NAME, s))
            .collect::<Result<_>>()?;
        if data.has_column(&self.target_column) {
            return Err(Error::transform(
                NAME,
                format!("target column {:?} already exists", self.target_column),
            ));
        }
        let index = self.index();
        let mut key = Vec::with_capacity(sources.len());
        let cells = (0..data.n_rows())
            .map(|r| {
                key.clear();
                key.extend(sources.iter().map(|c| self.key_part(&c.cells()[r])));
                Cell::categorical(index.get(&key).unwrap_or(&self.default_label).clone())
            })
            .collect();
        let mut target = Some(Column::new(self.target_column.clone(), DType::Categorical, cells)?);
        let mut columns = Vec::with_capacity(data.n_cols());
        for c in data.columns() {
            if self.source_columns.iter().any(|s| s == c.name()) {
                if let Some(t) = target.take() {
                    columns.push(t);
                }
            } else {
                columns.push(c.clone());
            }
        }
        data.with_columns(columns)
    }

    fn inverse_explanation(&self, e: Explanation, _context: Option<&Table>) -> Result<Outcome> {
        Ok(Outcome::Unsupported {
            explanation: e,
            reason: "a many-to-one mapping cannot be inverted".into(),
        })
    }

    fn forward_explanation(&self, e: Explanation, context: Option<&Table>) -> Result<Outcome> {
        if !self.fitted {
            return Err(not_fitted(NAME));
        }
        if is_additive(&e) {
            let e = map_additive(e, context, |features| {
                let positions = feature_positions(features);
                let sources: Vec<usize> = self
                    .source_columns
                    .iter()
                    .filter_map(|s| positions.get(s.as_str()).copied())
                    .collect();
                let first = sources.iter().min().copied();
                let mut map = Vec::with_capacity(features.len());
                for (i, f) in features.iter().enumerate() {
                    if Some(i) == first {
                        let mut sorted = sources.clone();
                        sorted.sort_unstable();
                        map.push(MappedFeature {
                            name: self.target_column.clone(),
                            sources: sorted,
                        });
                    } else if !sources.contains(&i) {
                        map.push(MappedFeature { name: f.clone(), sources: vec![i] });
                    }
                }
                Ok(map)
            })?;
            return Ok(Outcome::applied(e));
        }
        map_pool(e, |pool| Ok((self.transform_data(&pool)?, Vec::new())))
    }

    fn default_unsupported_mode(&self) -> UnsupportedMode {
        UnsupportedMode::Break
    }
}
