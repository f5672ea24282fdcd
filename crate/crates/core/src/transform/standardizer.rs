use serde::{Deserialize, Serialize};

use super::{is_additive, map_pool, not_fitted, require_column, Outcome, TransformBehavior, UnsupportedMode};
use crate::error::{Error, Result};
use crate::explanation::Explanation;
use crate::tabular::{Cell, Column, DType, Table};

const NAME: &str = "standardizer";

/// `(x - mean) / std` per column, with the population standard deviation.
/// A zero-variance column maps every value to 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Standardizer {
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    stats: Option<Vec<Stats>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
}

impl Stats {
    fn forward(self, x: f64) -> f64 {
        if self.std == 0.0 {
            0.0
        } else {
            (x - self.mean) / self.std
        }
    }

    fn inverse(self, z: f64) -> f64 {
        z * self.std + self.mean
    }
}

impl Standardizer {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Standardizer {
            columns: columns.into_iter().map(Into::into).collect(),
            stats: None,
        }
    }

    pub fn stats(&self, column: &str) -> Option<Stats> {
        let i = self.columns.iter().position(|c| c == column)?;
        self.stats.as_ref().map(|s| s[i])
    }

    fn map(&self, data: &Table, f: fn(Stats, f64) -> f64) -> Result<Table> {
        let stats = self.stats.as_ref().ok_or_else(|| not_fitted(NAME))?;
        let mut columns = data.columns().to_vec();
        for (name, s) in self.columns.iter().zip(stats) {
            let i = data
                .column_index(name)
                .ok_or_else(|| Error::missing_column(NAME, name))?;
            let col = &data.columns()[i];
            if col.dtype() != DType::Numeric {
                return Err(not_numeric(name));
            }
            let cells = col
                .cells()
                .iter()
                .map(|c| match c {
                    Cell::Numeric(x) => Cell::Numeric(f(*s, *x)),
                    other => other.clone(),
                })
                .collect();
            columns[i] = Column::new(name.clone(), DType::Numeric, cells)?;
        }
        data.with_columns(columns)
    }
}

fn not_numeric(column: &str) -> Error {
    Error::transform(NAME, format!("column {column:?} is not numeric"))
}

impl TransformBehavior for Standardizer {
    fn name(&self) -> &'static str {
        NAME
    }

    fn fit(&mut self, data: &Table) -> Result<()> {
        let mut stats = Vec::with_capacity(self.columns.len());
        for name in &self.columns {
            let col = require_column(data, NAME, name)?;
            if col.dtype() != DType::Numeric {
                return Err(not_numeric(name));
            }
            let xs: Vec<f64> = col.cells().iter().filter_map(|c| match c {
                Cell::Numeric(x) => Some(*x),
                _ => None,
            }).collect();
            let n = xs.len() as f64;
            let (mean, std) = if xs.is_empty() {
                (0.0, 0.0)
            } else {
                let mean = xs.iter().sum::<f64>() / n;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
                (mean, var.sqrt())
            };
            stats.push(Stats { mean, std });
        }
        self.stats = Some(stats);
        Ok(())
    }

    fn is_fitted(&self) -> bool {
        self.stats.is_some()
    }

    fn transform_data(&self, data: &Table) -> Result<Table> {
        self.map(data, Stats::forward)
    }

    fn inverse_explanation(&self, e: Explanation, _context: Option<&Table>) -> Result<Outcome> {
        if is_additive(&e) {
            return Ok(Outcome::applied(e));
        }
        map_pool(e, |pool| Ok((self.map(&pool, Stats::inverse)?, Vec::new())))
    }

    fn forward_explanation(&self, e: Explanation, _context: Option<&Table>) -> Result<Outcome> {
        if is_additive(&e) {
            return Ok(Outcome::applied(e));
        }
        map_pool(e, |pool| Ok((self.map(&pool, Stats::forward)?, Vec::new())))
    }

    fn default_unsupported_mode(&self) -> UnsupportedMode {
        UnsupportedMode::Skip
    }
}
