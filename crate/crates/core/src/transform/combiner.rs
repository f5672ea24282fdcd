use std::sync::atomic::{AtomicBool, Ordering};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{
    is_additive, map_additive, map_pool, not_fitted, rename_column, rename_in_map, require_column,
    Outcome, TransformBehavior, UnsupportedMode,
};
use crate::error::{Error, Result};
use crate::explanation::Explanation;
use crate::tabular::{Cell, Column, DType, Table};

const NAME: &str = "category_combiner";

/// Maps child categories to parent categories, writing the result to a
/// `{column}_group` column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CategoryCombiner {
    pub column: String,
    pub child_to_parent: IndexMap<String, String>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    fitted: bool,
}

static WARNED_UNSEEN: AtomicBool = AtomicBool::new(false);

impl CategoryCombiner {
    pub fn new(column: impl Into<String>, child_to_parent: IndexMap<String, String>) -> Self {
        CategoryCombiner {
            column: column.into(),
            child_to_parent,
            fitted: false,
        }
    }

    pub fn output_column(&self) -> String {
        format!("{}_group", self.column)
    }

    fn check_categorical<'t>(&self, data: &'t Table) -> Result<&'t Column> {
        let col = require_column(data, NAME, &self.column)?;
        if col.dtype() != DType::Categorical {
            return Err(Error::transform(NAME, format!("column {:?} is not categorical", self.column)));
        }
        Ok(col)
    }
}

impl TransformBehavior for CategoryCombiner {
    fn name(&self) -> &'static str {
        NAME
    }

    fn fit(&mut self, data: &Table) -> Result<()> {
        let col = self.check_categorical(data)?;
        let mut unmapped: Vec<&str> = col
            .cells()
            .iter()
            .filter_map(|c| match c {
                Cell::Categorical(s) if !self.child_to_parent.contains_key(s) => Some(s.as_str()),
                _ => None,
            })
            .collect();
        unmapped.sort_unstable();
        unmapped.dedup();
        if !unmapped.is_empty() {
            return Err(Error::transform(
                NAME,
                format!("no parent category for {:?} in column {:?}", unmapped, self.column),
            ));
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
        let col = self.check_categorical(data)?;
        let cells = col
            .cells()
            .iter()
            .map(|c| match c {
                Cell::Categorical(s) => match self.child_to_parent.get(s) {
                    Some(p) => Cell::categorical(p.clone()),
                    None => {
                        if !WARNED_UNSEEN.swap(true, Ordering::Relaxed) {
                            log::warn!("{NAME}: unseen category {s:?} in {:?} kept as is", self.column);
                        }
                        c.clone()
                    }
                },
                other => other.clone(),
            })
            .collect();
        let grouped = Column::new(self.output_column(), DType::Categorical, cells)?;
        let columns = data
            .columns()
            .iter()
            .map(|c| if c.name() == self.column { grouped.clone() } else { c.clone() })
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
        map_pool(e, |pool| Ok((rename_column(pool, &out, &self.column)?, Vec::new())))
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

    fn animals(v: &[&str]) -> Table {
        Table::with_sequential_ids(vec![Column::categorical("animal", v.iter().copied())]).unwrap()
    }

    fn combiner() -> CategoryCombiner {
        let map = [("poodle", "dog"), ("husky", "dog")]
            .into_iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect();
        let mut t = CategoryCombiner::new("animal", map);
        t.fit(&animals(&["poodle", "husky"])).unwrap();
        t
    }

    #[test]
    fn maps_child_to_parent() {
        let out = combiner().transform_data(&animals(&["poodle", "cat"])).unwrap();
        assert_eq!(
            out.column("animal_group").unwrap().cells(),
            &[Cell::categorical("dog"), Cell::categorical("cat")]
        );
    }

    #[test]
    fn map_must_cover_fitted_categories() {
        let mut t = CategoryCombiner::new("animal", IndexMap::new());
        assert!(t.fit(&animals(&["poodle"])).is_err());
    }

    #[test]
    fn additive_inverse_uses_original_child() {
        let e = Explanation::Contributions(FeatureContributions {
            row_ids: vec!["0".into()],
            features: vec!["animal_group".into()],
            contributions: vec![vec![0.2]],
            values: vec![vec![Cell::categorical("dog")]],
            base_value: 0.0,
            space: FeatureSpace::Algorithm,
            predictions: None,
        });
        let out = combiner().inverse_explanation(e, Some(&animals(&["poodle"]))).unwrap().into_explanation();
        let c = out.as_contributions().unwrap();
        assert_eq!(c.features, vec!["animal"]);
        assert_eq!(c.values, vec![vec![Cell::categorical("poodle")]]);
        assert_eq!(c.contributions, vec![vec![0.2]]);
    }

    #[test]
    fn example_inverse_keeps_parent() {
        let e = Explanation::SimilarExamples(ExampleSet {
            query_ids: vec!["q".into()],
            neighbors: vec![vec![Neighbor { pool_row: 0, target: Cell::Missing, distance: 0.0 }]],
            pool: vec![Column::categorical("animal_group", ["dog"])],
            pool_ids: RowIds::Sequential(1),
            space: FeatureSpace::Algorithm,
        });
        let out = combiner().inverse_explanation(e, None).unwrap().into_explanation();
        let x = out.as_examples().unwrap();
        assert_eq!(x.pool[0].name(), "animal");
        assert_eq!(x.pool[0].cells(), &[Cell::categorical("dog")]);
    }
}
