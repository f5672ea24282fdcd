use serde::{Deserialize, Serialize};

use super::{is_additive, map_additive, map_pool, not_fitted, require_column, Outcome, TransformBehavior, UnsupportedMode};
use crate::error::Result;
use crate::explanation::{feature_positions, Explanation, MappedFeature};
use crate::tabular::{Cell, Column, DType, Table};

const NAME: &str = "feature_selector";

/// Projects onto `keep`, in `keep` order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSelector {
    pub keep: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<Vec<(String, DType)>>,
}

impl FeatureSelector {
    pub fn new<S: Into<String>>(keep: impl IntoIterator<Item = S>) -> Self {
        FeatureSelector {
            keep: keep.into_iter().map(Into::into).collect(),
            input: None,
        }
    }

    fn input(&self) -> Result<&[(String, DType)]> {
        self.input.as_deref().ok_or_else(|| not_fitted(NAME))
    }
}

impl TransformBehavior for FeatureSelector {
    fn name(&self) -> &'static str {
        NAME
    }

    fn fit(&mut self, data: &Table) -> Result<()> {
        for k in &self.keep {
            require_column(data, NAME, k)?;
        }
        self.input = Some(
            data.columns()
                .iter()
                .map(|c| (c.name().to_string(), c.dtype()))
                .collect(),
        );
        Ok(())
    }

    fn is_fitted(&self) -> bool {
        self.input.is_some()
    }

    fn transform_data(&self, data: &Table) -> Result<Table> {
        self.input()?;
        let columns = self
            .keep
            .iter()
            .map(|k| require_column(data, NAME, k).cloned())
            .collect::<Result<_>>()?;
        data.with_columns(columns)
    }

    fn inverse_explanation(&self, e: Explanation, context: Option<&Table>) -> Result<Outcome> {
        let input = self.input()?;
        if is_additive(&e) {
            let e = map_additive(e, context, |features| {
                let positions = feature_positions(features);
                let mut map: Vec<MappedFeature> = input
                    .iter()
                    .map(|(name, _)| MappedFeature {
                        name: name.clone(),
                        sources: positions.get(name.as_str()).map(|&p| vec![p]).unwrap_or_default(),
                    })
                    .collect();
                for (i, f) in features.iter().enumerate() {
                    if !input.iter().any(|(n, _)| n == f) {
                        map.push(MappedFeature { name: f.clone(), sources: vec![i] });
                    }
                }
                Ok(map)
            })?;
            return Ok(Outcome::applied(e));
        }
        map_pool(e, |pool| {
            let n = pool.n_rows();
            let mut columns: Vec<Column> = input
                .iter()
                .map(|(name, dtype)| match pool.column(name) {
                    Some(c) => Ok(c.clone()),
                    None => Column::new(name.clone(), *dtype, vec![Cell::Any; n]),
                })
                .collect::<Result<_>>()?;
            for c in pool.columns() {
                if !input.iter().any(|(n, _)| n == c.name()) {
                    columns.push(c.clone());
                }
            }
            Ok((pool.with_columns(columns)?, Vec::new()))
        })
    }

    fn forward_explanation(&self, e: Explanation, context: Option<&Table>) -> Result<Outcome> {
        self.input()?;
        if is_additive(&e) {
            let e = map_additive(e, context, |features| {
                let positions = feature_positions(features);
                Ok(self
                    .keep
                    .iter()
                    .filter_map(|k| {
                        positions.get(k.as_str()).map(|&p| MappedFeature { name: k.clone(), sources: vec![p] })
                    })
                    .collect())
            })?;
            return Ok(Outcome::applied(e));
        }
        map_pool(e, |pool| Ok((self.transform_data(&pool)?, Vec::new())))
    }

    fn default_unsupported_mode(&self) -> UnsupportedMode {
        UnsupportedMode::Skip
    }
}
