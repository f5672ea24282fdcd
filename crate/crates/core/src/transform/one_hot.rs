use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::{
    is_additive, map_additive, map_pool, not_fitted, require_column, Outcome, TransformBehavior,
    UnsupportedMode,
};
use crate::error::Result;
use crate::explanation::{feature_positions, Explanation, MappedFeature, ScoreMap};
use crate::tabular::{Cell, Column, DType, Table};

const NAME: &str = "one_hot_encoder";

/// Replaces each listed categorical column with one boolean column per
/// fitted category, named `{column}_{category}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OneHotEncoder {
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    groups: Option<Vec<Group>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Group {
    column: String,
    dtype: DType,
    categories: Vec<Cell>,
}

impl Group {
    fn member(&self, category: &Cell) -> String {
        format!("{}_{}", self.column, category.render())
    }

    fn members(&self) -> Vec<String> {
        self.categories.iter().map(|c| self.member(c)).collect()
    }
}

impl OneHotEncoder {
    pub fn new<S: Into<String>>(columns: impl IntoIterator<Item = S>) -> Self {
        OneHotEncoder {
            columns: columns.into_iter().map(Into::into).collect(),
            groups: None,
        }
    }

    /// Fitted categories of `column`, in first-seen order.
    pub fn categories(&self, column: &str) -> Option<&[Cell]> {
        self.groups
            .as_ref()?
            .iter()
            .find(|g| g.column == column)
            .map(|g| g.categories.as_slice())
    }

    fn fitted(&self) -> Result<&[Group]> {
        self.groups.as_deref().ok_or_else(|| not_fitted(NAME))
    }

    fn inverse_map(&self, groups: &[Group], features: &[String]) -> ScoreMap {
        let positions = feature_positions(features);
        let mut owner: HashMap<usize, usize> = HashMap::new();
        let mut sources: Vec<Vec<usize>> = vec![Vec::new(); groups.len()];
        for (g, group) in groups.iter().enumerate() {
            for m in group.members() {
                if let Some(&p) = positions.get(m.as_str()) {
                    owner.insert(p, g);
                    sources[g].push(p);
                }
            }
        }
        let mut emitted = HashSet::new();
        let mut map = Vec::new();
        for (i, f) in features.iter().enumerate() {
            match owner.get(&i) {
                Some(&g) => {
                    if emitted.insert(g) {
                        map.push(MappedFeature {
                            name: groups[g].column.clone(),
                            sources: sources[g].clone(),
                        });
                    }
                }
                None => map.push(MappedFeature {
                    name: f.clone(),
                    sources: vec![i],
                }),
            }
        }
        map
    }

    fn decode(&self, groups: &[Group], pool: Table) -> Result<(Table, Vec<String>)> {
        let mut member_of: HashMap<String, (usize, usize)> = HashMap::new();
        for (g, group) in groups.iter().enumerate() {
            for (k, m) in group.members().into_iter().enumerate() {
                member_of.insert(m, (g, k));
            }
        }
        let n = pool.n_rows();
        let mut warnings = Vec::new();
        let mut done = HashSet::new();
        let mut out = Vec::with_capacity(pool.n_cols());
        for col in pool.columns() {
            let Some(&(g, _)) = member_of.get(col.name()) else {
                out.push(col.clone());
                continue;
            };
            if !done.insert(g) {
                continue;
            }
            let group = &groups[g];
            let members: Vec<Option<&Column>> = group.members().iter().map(|m| pool.column(m)).collect();
            let mut undecodable = 0;
            let cells = (0..n)
                .map(|r| {
                    let mut hot = members
                        .iter()
                        .enumerate()
                        .filter(|(_, c)| matches!(c.map(|c| &c.cells()[r]), Some(Cell::Boolean(true))))
                        .map(|(k, _)| k);
                    match (hot.next(), hot.next()) {
                        (Some(k), None) => group.categories[k].clone(),
                        _ => {
                            undecodable += 1;
                            Cell::Missing
                        }
                    }
                })
                .collect();
            if undecodable > 0 {
                warnings.push(format!(
                    "{undecodable} example row(s) of {:?} have zero or several active categories; shown as missing",
                    group.column
                ));
            }
            out.push(Column::new(group.column.clone(), group.dtype, cells)?);
        }
        Ok((pool.with_columns(out)?, warnings))
    }
}

impl TransformBehavior for OneHotEncoder {
    fn name(&self) -> &'static str {
        NAME
    }

    fn fit(&mut self, data: &Table) -> Result<()> {
        let mut groups = Vec::with_capacity(self.columns.len());
        for name in &self.columns {
            let col = require_column(data, NAME, name)?;
            let mut seen = HashSet::new();
            let mut categories = Vec::new();
            for cell in col.cells() {
                if matches!(cell, Cell::Missing | Cell::Any) {
                    continue;
                }
                if seen.insert(cell.render().into_owned()) {
                    categories.push(cell.clone());
                }
            }
            groups.push(Group {
                column: name.clone(),
                dtype: col.dtype(),
                categories,
            });
        }
        self.groups = Some(groups);
        Ok(())
    }

    fn is_fitted(&self) -> bool {
        self.groups.is_some()
    }

    fn transform_data(&self, data: &Table) -> Result<Table> {
        let groups = self.fitted()?;
        for g in groups {
            require_column(data, NAME, &g.column)?;
        }
        let mut out = Vec::with_capacity(data.n_cols());
        for col in data.columns() {
            let Some(group) = groups.iter().find(|g| g.column == col.name()) else {
                out.push(col.clone());
                continue;
            };
            let index: HashMap<String, usize> = group
                .categories
                .iter()
                .enumerate()
                .map(|(k, c)| (c.render().into_owned(), k))
                .collect();
            let hot: Vec<Option<usize>> = col
                .cells()
                .iter()
                .map(|c| match c {
                    Cell::Missing | Cell::Any => None,
                    c => index.get(c.render().as_ref()).copied(),
                })
                .collect();
            for (k, category) in group.categories.iter().enumerate() {
                out.push(Column::boolean(
                    group.member(category),
                    hot.iter().map(|h| *h == Some(k)),
                ));
            }
        }
        data.with_columns(out)
    }

    fn inverse_explanation(&self, e: Explanation, context: Option<&Table>) -> Result<Outcome> {
        let groups = self.fitted()?;
        if is_additive(&e) {
            let e = map_additive(e, context, |f| Ok(self.inverse_map(groups, f)))?;
            return Ok(Outcome::applied(e));
        }
        map_pool(e, |pool| self.decode(groups, pool))
    }

    fn forward_explanation(&self, e: Explanation, _context: Option<&Table>) -> Result<Outcome> {
        Ok(Outcome::Unsupported {
            explanation: e,
            reason: "one-hot encoding has no forward explanation transform".into(),
        })
    }

    fn default_unsupported_mode(&self) -> UnsupportedMode {
        UnsupportedMode::Break
    }
}
