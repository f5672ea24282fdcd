use serde::{Deserialize, Serialize};

use super::{
    is_additive, map_additive, map_pool, not_fitted, rename_in_map, require_column, Outcome,
    TransformBehavior, UnsupportedMode,
};
use crate::error::{Error, Result};
use crate::explanation::Explanation;
use crate::tabular::{format_number, Cell, Column, DType, Table};

const NAME: &str = "numeric_binner";

/// Replaces a numeric column with a categorical `{column}_binned` column
/// holding the label of the half-open interval each value falls in. Values
/// outside `[t0, tm)` go to the first or last bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericBinner {
    pub column: String,
    pub thresholds: Vec<f64>,
    pub labels: Vec<String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    fitted: bool,
}

impl NumericBinner {
    pub fn new<S: Into<String>>(
        column: impl Into<String>,
        thresholds: Vec<f64>,
        labels: impl IntoIterator<Item = S>,
    ) -> Result<Self> {
        let t = NumericBinner {
            column: column.into(),
            thresholds,
            labels: labels.into_iter().map(Into::into).collect(),
            fitted: false,
        };
        t.check()?;
        Ok(t)
    }

    pub fn output_column(&self) -> String {
        format!("{}_binned", self.column)
    }

    fn check(&self) -> Result<()> {
        if self.thresholds.len() < 2 {
            return Err(Error::Config("numeric_binner needs at least two thresholds".into()));
        }
        if self.thresholds.iter().any(|t| !t.is_finite()) || self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("numeric_binner thresholds must be finite and strictly ascending".into()));
        }
        if self.labels.len() != self.thresholds.len() - 1 {
            return Err(Error::Config(format!(
                "numeric_binner has {} labels for {} intervals",
                self.labels.len(),
                self.thresholds.len() - 1
            )));
        }
        Ok(())
    }

    fn bin(&self, x: f64) -> usize {
        // number of interior thresholds <= x
        let inner = &self.thresholds[1..self.thresholds.len() - 1];
        inner.partition_point(|t| *t <= x)
    }

    /// Label with its interval, as shown for example-based explanations.
    pub fn interval_label(&self, label: &str) -> Option<String> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(format!(
            "{label} [{}, {})",
            format_number(self.thresholds[i]),
            format_number(self.thresholds[i + 1])
        ))
    }
}

impl TransformBehavior for NumericBinner {
    fn name(&self) -> &'static str {
        NAME
    }

    fn fit(&mut self, data: &Table) -> Result<()> {
        self.check()?;
        let col = require_column(data, NAME, &self.column)?;
        if col.dtype() != DType::Numeric {
            return Err(Error::transform(NAME, format!("column {:?} is not numeric", self.column)));
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
        let col = require_column(data, NAME, &self.column)?;
        if col.dtype() != DType::Numeric {
            return Err(Error::transform(NAME, format!("column {:?} is not numeric", self.column)));
        }
        let cells = col
            .cells()
            .iter()
            .map(|c| match c {
                Cell::Numeric(x) => Cell::categorical(self.labels[self.bin(*x)].clone()),
                other => other.clone(),
            })
            .collect();
        let binned = Column::new(self.output_column(), DType::Categorical, cells)?;
        let columns = data
            .columns()
            .iter()
            .map(|c| if c.name() == self.column { binned.clone() } else { c.clone() })
            .collect();
        data.with_columns(columns)
    }

    fn inverse_explanation(&self, e: Explanation, context: Option<&Table>) -> Result<Outcome> {
        if !self.fitted {
            return Err(not_fitted(NAME));
        }
        let out = self.output_column();
        if is_additive(&e) {
            let e = map_additive(e, context, |f| Ok(rename_in_map(f, &out, &self.column)))?;
            return Ok(Outcome::applied(e));
        }
        map_pool(e, |pool| {
            let columns = pool
                .columns()
                .iter()
                .map(|c| {
                    if c.name() != out {
                        return Ok(c.clone());
                    }
                    let cells = c
                        .cells()
                        .iter()
                        .map(|cell| match cell {
                            Cell::Categorical(l) => {
                                Cell::categorical(self.interval_label(l).unwrap_or_else(|| l.clone()))
                            }
                            other => other.clone(),
                        })
                        .collect();
                    Column::new(self.column.clone(), DType::Categorical, cells)
                })
                .collect::<Result<_>>()?;
            Ok((pool.with_columns(columns)?, Vec::new()))
        })
    }

    fn forward_explanation(&self, e: Explanation, context: Option<&Table>) -> Result<Outcome> {
        if !self.fitted {
            return Err(not_fitted(NAME));
        }
        if is_additive(&e) {
            let out = self.output_column();
            let e = map_additive(e, context, |f| Ok(rename_in_map(f, &self.column, &out)))?;
            return Ok(Outcome::applied(e));
        }
        map_pool(e, |pool| Ok((self.transform_data(&pool)?, Vec::new())))
    }

    fn default_unsupported_mode(&self) -> UnsupportedMode {
        UnsupportedMode::Break
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::explanation::{ExampleSet, FeatureContributions, FeatureSpace, Neighbor};
    use crate::tabular::RowIds;

    fn binner() -> NumericBinner {
        let mut t = NumericBinner::new("age", vec![0.0, 10.0, 20.0], ["low", "high"]).unwrap();
        t.fit(&ages(&[1.0])).unwrap();
        t
    }

    fn ages(v: &[f64]) -> Table {
        Table::with_sequential_ids(vec![Column::numeric("age", v.iter().copied())]).unwrap()
    }

    #[test]
    fn bins_half_open_and_clamps() {
        let out = binner().transform_data(&ages(&[12.0, 10.0, 9.999, -5.0, 20.0, 99.0])).unwrap();
        let col = out.column("age_binned").unwrap();
        let labels: Vec<_> = col.cells().iter().map(|c| c.render().into_owned()).collect();
        assert_eq!(labels, vec!["high", "high", "low", "low", "high", "high"]);
        assert!(!out.has_column("age"));
    }

    #[test]
    fn bad_specs() {
        assert!(NumericBinner::new("a", vec![0.0, 1.0], ["x", "y"]).is_err());
        assert!(NumericBinner::new("a", vec![1.0, 0.0], ["x"]).is_err());
        let mut t = NumericBinner::new("c", vec![0.0, 1.0], ["x"]).unwrap();
        let data = Table::with_sequential_ids(vec![Column::categorical("c", ["q"])]).unwrap();
        assert!(t.fit(&data).is_err());
    }

    #[test]
    fn additive_inverse_carries_original_value() {
        let t = binner();
        let e = Explanation::Contributions(FeatureContributions {
            row_ids: vec!["0".into()],
            features: vec!["age_binned".into()],
            contributions: vec![vec![0.3]],
            values: vec![vec![Cell::categorical("high")]],
            base_value: 0.0,
            space: FeatureSpace::Algorithm,
            predictions: None,
        });
        let out = t.inverse_explanation(e, Some(&ages(&[12.0]))).unwrap().into_explanation();
        let c = out.as_contributions().unwrap();
        assert_eq!(c.features, vec!["age"]);
        assert_eq!(c.values, vec![vec![Cell::Numeric(12.0)]]);
        assert_eq!(c.contributions, vec![vec![0.3]]);
    }

    #[test]
    fn example_inverse_keeps_bin_with_interval() {
        let t = binner();
        let e = Explanation::SimilarExamples(ExampleSet {
            query_ids: vec!["q".into()],
            neighbors: vec![vec![Neighbor { pool_row: 0, target: Cell::Missing, distance: 0.0 }]],
            pool: vec![Column::categorical("age_binned", ["high"])],
            pool_ids: RowIds::Sequential(1),
            space: FeatureSpace::Algorithm,
        });
        let out = t.inverse_explanation(e, None).unwrap().into_explanation();
        assert_eq!(out.as_examples().unwrap().pool[0].cells(), &[Cell::categorical("high [10, 20)")]);
    }
}
