use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{not_fitted, require_column, Outcome, TransformBehavior, UnsupportedMode};
use crate::error::{Error, Result};
use crate::explanation::Explanation;
use crate::tabular::{Cell, Column, DType, Table};

const NAME: &str = "imputer";

/// Fills Missing cells: column mean for numeric columns, mode for
/// categorical and boolean columns (ties go to the lexicographically
/// smallest value).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Imputer {
    /// Columns to impute; all columns when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub columns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fills: Option<Vec<Fill>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Fill {
    column: String,
    value: Cell,
}

impl Imputer {
    pub fn new() -> Self {
        Imputer::default()
    }

    pub fn for_columns<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        Imputer {
            columns: Some(columns.into_iter().map(Into::into).collect()),
            fills: None,
        }
    }

    pub fn fill_value(&self, column: &str) -> Option<&Cell> {
        self.fills
            .as_ref()?
            .iter()
            .find(|f| f.column == column)
            .map(|f| &f.value)
    }
}

fn fill_for(col: &Column) -> Result<Cell> {
    let present = col.cells().iter().filter(|c| !matches!(c, Cell::Missing | Cell::Any));
    match col.dtype() {
        DType::Numeric => {
            let (sum, n) = present
                .filter_map(Cell::as_f64)
                .fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
            if n == 0 {
                return Err(all_missing(col));
            }
            Ok(Cell::Numeric(sum / n as f64))
        }
        DType::Categorical | DType::Boolean => {
            let mut counts: HashMap<String, (usize, &Cell)> = HashMap::new();
            for c in present {
                counts.entry(c.render().into_owned()).or_insert((0, c)).0 += 1;
            }
            counts
                .into_iter()
                .max_by(|(ka, (na, _)), (kb, (nb, _))| na.cmp(nb).then_with(|| kb.cmp(ka)))
                .map(|(_, (_, c))| c.clone())
                .ok_or_else(|| all_missing(col))
        }
    }
}

fn all_missing(col: &Column) -> Error {
    Error::transform(NAME, format!("column {:?} has no values to impute from", col.name()))
}

impl TransformBehavior for Imputer {
    fn name(&self) -> &'static str {
        NAME
    }

    fn fit(&mut self, data: &Table) -> Result<()> {
        let columns: Vec<&Column> = match &self.columns {
            Some(names) => names
                .iter()
                .map(|n| require_column(data, NAME, n))
                .collect::<Result<_>>()?,
            None => data.columns().iter().collect(),
        };
        let fills = columns
            .into_iter()
            .map(|c| {
                Ok(Fill {
                    column: c.name().to_string(),
                    value: fill_for(c)?,
                })
            })
            .collect::<Result<_>>()?;
        self.fills = Some(fills);
        Ok(())
    }

    fn is_fitted(&self) -> bool {
        self.fills.is_some()
    }

    fn transform_data(&self, data: &Table) -> Result<Table> {
        let fills = self.fills.as_ref().ok_or_else(|| not_fitted(NAME))?;
        if self.columns.is_some() {
            for f in fills {
                require_column(data, NAME, &f.column)?;
            }
        }
        let columns = data
            .columns()
            .iter()
            .map(|col| match fills.iter().find(|f| f.column == col.name()) {
                Some(f) if col.cells().iter().any(Cell::is_missing) => {
                    let cells = col
                        .cells()
                        .iter()
                        .map(|c| if c.is_missing() { f.value.clone() } else { c.clone() })
                        .collect();
                    Column::new(col.name(), col.dtype(), cells)
                }
                _ => Ok(col.clone()),
            })
            .collect::<Result<_>>()?;
        data.with_columns(columns)
    }

    fn inverse_explanation(&self, e: Explanation, _context: Option<&Table>) -> Result<Outcome> {
        Ok(Outcome::applied(e))
    }

    fn forward_explanation(&self, e: Explanation, _context: Option<&Table>) -> Result<Outcome> {
        Ok(Outcome::applied(e))
    }

    fn default_unsupported_mode(&self) -> UnsupportedMode {
        UnsupportedMode::Skip
    }
}
