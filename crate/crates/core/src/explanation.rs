//! Hierarchical explanation types.
//!
//! ```text
//! Explanation
//! ├── feature-based
//! │   ├── AdditiveFeatureContributions   (local)
//! │   └── AdditiveFeatureImportance      (global)
//! └── example-based
//!     ├── SimilarExamples
//!     └── Counterfactual                 (type only)
//! ```
//!
//! Transformers operate on these values to move explanations between
//! feature spaces; see [`crate::transform`].

use std::collections::{HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::tabular::{Cell, Column, RowIds, Table};

/// Absolute tolerance for the efficiency check, scaled by `max(1, |prediction|)`.
pub const EFFICIENCY_TOLERANCE: f64 = 1e-9;

/// Feature-name → human-readable description.
pub type Descriptions = IndexMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureSpace {
    Original,
    Algorithm,
    Model,
    Interpretable,
    /// Part-way through explanation step 3 or 4, after the given transformer.
    Partial { step: u8, after: usize },
}

impl fmt::Display for FeatureSpace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureSpace::Original => f.write_str("original"),
            FeatureSpace::Algorithm => f.write_str("algorithm"),
            FeatureSpace::Model => f.write_str("model"),
            FeatureSpace::Interpretable => f.write_str("interpretable"),
            FeatureSpace::Partial { step, after } => {
                write!(f, "partial(step {step}, after transformer {after})")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExplanationFamily {
    FeatureBased,
    ExampleBased,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExplanationKind {
    AdditiveFeatureContributions,
    AdditiveFeatureImportance,
    SimilarExamples,
    Counterfactual,
}

impl ExplanationKind {
    pub fn family(self) -> ExplanationFamily {
        match self {
            ExplanationKind::AdditiveFeatureContributions
            | ExplanationKind::AdditiveFeatureImportance => ExplanationFamily::FeatureBased,
            ExplanationKind::SimilarExamples | ExplanationKind::Counterfactual => {
                ExplanationFamily::ExampleBased
            }
        }
    }

    pub fn is_local(self) -> bool {
        self != ExplanationKind::AdditiveFeatureImportance
    }
}

/// Local additive contributions. Storage is column-major: `contributions[f][r]`
/// is the contribution of `features[f]` to row `row_ids[r]`, and
/// `values[f][r]` the displayed feature value.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureContributions {
    pub row_ids: Vec<String>,
    pub features: Vec<String>,
    pub contributions: Vec<Vec<f64>>,
    pub values: Vec<Vec<Cell>>,
    /// Mean model prediction over the background sample.
    pub base_value: f64,
    pub space: FeatureSpace,
    /// Model predictions for each row. Present only when the producing
    /// algorithm is exact, which makes efficiency checkable.
    pub predictions: Option<Vec<f64>>,
}

/// Global per-feature importance scores. May be negative.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureImportance {
    pub features: Vec<String>,
    pub importances: Vec<f64>,
    pub space: FeatureSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Neighbor {
    /// Row index into [`ExampleSet::pool`].
    pub pool_row: usize,
    pub target: Cell,
    pub distance: f64,
}

/// Example-based explanation. Example rows are stored once in `pool`
/// (keyed by their training row ids) and referenced from each query.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleSet {
    pub query_ids: Vec<String>,
    pub neighbors: Vec<Vec<Neighbor>>,
    pub pool: Vec<Column>,
    pub pool_ids: RowIds,
    pub space: FeatureSpace,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Explanation {
    Contributions(FeatureContributions),
    Importance(FeatureImportance),
    SimilarExamples(ExampleSet),
    Counterfactual(ExampleSet),
}

impl Explanation {
    pub fn kind(&self) -> ExplanationKind {
        match self {
            Explanation::Contributions(_) => ExplanationKind::AdditiveFeatureContributions,
            Explanation::Importance(_) => ExplanationKind::AdditiveFeatureImportance,
            Explanation::SimilarExamples(_) => ExplanationKind::SimilarExamples,
            Explanation::Counterfactual(_) => ExplanationKind::Counterfactual,
        }
    }

    pub fn space(&self) -> FeatureSpace {
        match self {
            Explanation::Contributions(c) => c.space,
            Explanation::Importance(i) => i.space,
            Explanation::SimilarExamples(e) | Explanation::Counterfactual(e) => e.space,
        }
    }

    pub fn set_space(&mut self, space: FeatureSpace) {
        match self {
            Explanation::Contributions(c) => c.space = space,
            Explanation::Importance(i) => i.space = space,
            Explanation::SimilarExamples(e) | Explanation::Counterfactual(e) => e.space = space,
        }
    }

    /// Feature names in explanation order.
    pub fn features(&self) -> Vec<&str> {
        match self {
            Explanation::Contributions(c) => c.features.iter().map(String::as_str).collect(),
            Explanation::Importance(i) => i.features.iter().map(String::as_str).collect(),
            Explanation::SimilarExamples(e) | Explanation::Counterfactual(e) => {
                e.pool.iter().map(Column::name).collect()
            }
        }
    }

    pub fn as_contributions(&self) -> Option<&FeatureContributions> {
        match self {
            Explanation::Contributions(c) => Some(c),
            _ => None,
        }
    }

    pub fn as_importance(&self) -> Option<&FeatureImportance> {
        match self {
            Explanation::Importance(i) => Some(i),
            _ => None,
        }
    }

    pub fn as_examples(&self) -> Option<&ExampleSet> {
        match self {
            Explanation::SimilarExamples(e) | Explanation::Counterfactual(e) => Some(e),
            _ => None,
        }
    }

    pub fn validate(&self) -> std::result::Result<(), Vec<String>> {
        validate(self)
    }
}

/// One output feature of a [`ScoreMap`], defined as the sum of the scores of
/// the listed input features. An empty source list yields a zero score.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedFeature {
    pub name: String,
    pub sources: Vec<usize>,
}

/// Linear relabeling of additive scores. Every explanation transform on
/// additive explanations (group sums, zero-fills, renames) is one of these.
pub type ScoreMap = Vec<MappedFeature>;

impl FeatureContributions {
    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.features.iter().position(|f| f == name)
    }

    /// Applies a [`ScoreMap`]. Values for each output feature come from the
    /// matching column of `context` when given (the transformer's input data
    /// for the same rows), else from the single source feature, else Missing.
    pub fn remap(self, map: &ScoreMap, context: Option<&Table>) -> FeatureContributions {
        let n = self.n_rows();
        let context = context.filter(|t| t.n_rows() == n);
        let mut scores: Vec<Option<Vec<f64>>> = self.contributions.into_iter().map(Some).collect();
        let mut values: Vec<Option<Vec<Cell>>> = self.values.into_iter().map(Some).collect();
        let mut uses = vec![0usize; scores.len()];
        for out in map {
            for &s in &out.sources {
                uses[s] += 1;
            }
        }
        let mut features = Vec::with_capacity(map.len());
        let mut contributions = Vec::with_capacity(map.len());
        let mut new_values = Vec::with_capacity(map.len());
        for out in map {
            let score = match out.sources.as_slice() {
                [] => vec![0.0; n],
                [s] => take_or_clone(&mut scores, &mut uses, *s),
                many => {
                    let mut acc = vec![0.0; n];
                    for &s in many {
                        let col = scores[s].as_ref().expect("score column consumed");
                        for (a, v) in acc.iter_mut().zip(col) {
                            *a += v;
                        }
                    }
                    acc
                }
            };
            let value = match context.and_then(|t| t.column(&out.name)) {
                Some(col) => col.cells().to_vec(),
                None => match out.sources.as_slice() {
                    [s] if values[*s].is_some() => {
                        if uses[*s] == 0 {
                            values[*s].take().expect("checked")
                        } else {
                            values[*s].clone().expect("checked")
                        }
                    }
                    _ => vec![Cell::Missing; n],
                },
            };
            features.push(out.name.clone());
            contributions.push(score);
            new_values.push(value);
        }
        FeatureContributions {
            row_ids: self.row_ids,
            features,
            contributions,
            values: new_values,
            base_value: self.base_value,
            space: self.space,
            predictions: self.predictions,
        }
    }
}

fn take_or_clone<T: Clone>(slots: &mut [Option<Vec<T>>], uses: &mut [usize], i: usize) -> Vec<T> {
    uses[i] -= 1;
    if uses[i] == 0 {
        slots[i].take().expect("column consumed twice")
    } else {
        slots[i].clone().expect("column consumed")
    }
}

impl FeatureImportance {
    pub fn remap(self, map: &ScoreMap) -> FeatureImportance {
        FeatureImportance {
            features: map.iter().map(|m| m.name.clone()).collect(),
            importances: map
                .iter()
                .map(|m| m.sources.iter().map(|&s| self.importances[s]).sum())
                .collect(),
            space: self.space,
        }
    }
}

impl ExampleSet {
    pub fn pool_table(&self) -> Result<Table> {
        Table::new(self.pool.clone(), self.pool_ids.clone())
    }

    pub fn into_pool_table(self) -> Result<(Table, ExampleShell)> {
        let table = Table::new(self.pool, self.pool_ids)?;
        Ok((
            table,
            ExampleShell {
                query_ids: self.query_ids,
                neighbors: self.neighbors,
                space: self.space,
            },
        ))
    }

    pub fn pool_row_id(&self, pool_row: usize) -> String {
        self.pool_ids.get(pool_row).into_owned()
    }
}

/// An [`ExampleSet`] with its pool taken out, so the pool can be run
/// through table transforms and put back.
#[derive(Debug, Clone)]
pub struct ExampleShell {
    pub query_ids: Vec<String>,
    pub neighbors: Vec<Vec<Neighbor>>,
    pub space: FeatureSpace,
}

impl ExampleShell {
    pub fn with_pool(self, pool: Table) -> ExampleSet {
        let pool_ids = pool.row_ids().clone();
        ExampleSet {
            query_ids: self.query_ids,
            neighbors: self.neighbors,
            pool: pool.into_columns(),
            pool_ids,
            space: self.space,
        }
    }
}

fn duplicates<'a>(names: impl IntoIterator<Item = &'a str>) -> Vec<&'a str> {
    let mut seen = HashSet::new();
    let mut dups = Vec::new();
    for n in names {
        if !seen.insert(n) && !dups.contains(&n) {
            dups.push(n);
        }
    }
    dups
}

/// Checks every type invariant; violations are returned as data.
pub fn validate(e: &Explanation) -> std::result::Result<(), Vec<String>> {
    check(e, true)
}

/// [`validate`] minus row-id uniqueness, for explanations whose row ids were
/// copied from a [`Table`](crate::tabular::Table), which already enforces it.
pub(crate) fn validate_from_table(e: &Explanation) -> std::result::Result<(), Vec<String>> {
    check(e, false)
}

fn check(e: &Explanation, row_ids: bool) -> std::result::Result<(), Vec<String>> {
    let mut v = Vec::new();
    match e {
        Explanation::Contributions(c) => {
            for d in duplicates(c.features.iter().map(String::as_str)) {
                v.push(format!("duplicate feature {d:?}"));
            }
            if row_ids {
                for d in duplicates(c.row_ids.iter().map(String::as_str)) {
                    v.push(format!("duplicate row id {d:?}"));
                }
            }
            let n = c.n_rows();
            if c.contributions.len() != c.features.len() || c.values.len() != c.features.len() {
                v.push("feature, contribution and value lists differ in length".into());
            } else {
                for (f, (scores, values)) in c.features.iter().zip(c.contributions.iter().zip(&c.values)) {
                    if scores.len() != n || values.len() != n {
                        v.push(format!("feature {f:?} does not cover every row"));
                    } else if let Some(r) = scores.iter().position(|s| !s.is_finite()) {
                        v.push(format!("non-finite contribution for {f:?} in row {:?}", c.row_ids[r]));
                    }
                }
                if let Some(pred) = &c.predictions {
                    if pred.len() != n {
                        v.push("prediction count does not match rows".into());
                    } else {
                        for (r, p) in pred.iter().enumerate() {
                            let total: f64 = c.base_value + c.contributions.iter().map(|s| s[r]).sum::<f64>();
                            if (total - p).abs() > EFFICIENCY_TOLERANCE * p.abs().max(1.0) {
                                v.push(format!(
                                    "efficiency violated in row {:?}: base + sum = {total}, prediction = {p}",
                                    c.row_ids[r]
                                ));
                            }
                        }
                    }
                }
            }
        }
        Explanation::Importance(i) => {
            for d in duplicates(i.features.iter().map(String::as_str)) {
                v.push(format!("duplicate feature {d:?}"));
            }
            if i.features.len() != i.importances.len() {
                v.push("feature and importance lists differ in length".into());
            }
            for (f, s) in i.features.iter().zip(&i.importances) {
                if !s.is_finite() {
                    v.push(format!("non-finite importance for {f:?}"));
                }
            }
        }
        Explanation::SimilarExamples(x) | Explanation::Counterfactual(x) => {
            for d in duplicates(x.pool.iter().map(Column::name)) {
                v.push(format!("duplicate feature {d:?}"));
            }
            if row_ids {
                for d in duplicates(x.query_ids.iter().map(String::as_str)) {
                    v.push(format!("duplicate row id {d:?}"));
                }
            }
            let pool_rows = x.pool_ids.len();
            if x.pool.iter().any(|c| c.len() != pool_rows) {
                v.push("example pool columns differ in length".into());
            }
            if x.neighbors.len() != x.query_ids.len() {
                v.push("neighbor lists do not match query rows".into());
            }
            for (q, list) in x.query_ids.iter().zip(&x.neighbors) {
                if list.iter().any(|n| !(n.distance >= 0.0) || !n.distance.is_finite()) {
                    v.push(format!("negative or non-finite distance for row {q:?}"));
                }
                if list.windows(2).any(|w| w[0].distance > w[1].distance) {
                    v.push(format!("examples for row {q:?} not sorted by distance"));
                }
                if list.iter().any(|n| n.pool_row >= pool_rows) {
                    v.push(format!("example for row {q:?} references a missing pool row"));
                }
            }
        }
    }
    if v.is_empty() {
        Ok(())
    } else {
        Err(v)
    }
}

/// Sum of contributions for one row.
pub fn total_contribution(e: &FeatureContributions, row_id: &str) -> Result<f64> {
    let r = e
        .row_ids
        .iter()
        .position(|id| id == row_id)
        .ok_or_else(|| Error::Lookup(row_id.to_string()))?;
    Ok(e.contributions.iter().map(|s| s[r]).sum())
}

/// Replaces every feature name that has a description. Unknown names pass
/// through. Collisions are left in place for [`validate`] to report.
pub fn rename_features(e: Explanation, descriptions: &Descriptions) -> Explanation {
    if descriptions.is_empty() {
        return e;
    }
    let rename = |name: String| descriptions.get(&name).cloned().unwrap_or(name);
    match e {
        Explanation::Contributions(mut c) => {
            c.features = c.features.into_iter().map(rename).collect();
            Explanation::Contributions(c)
        }
        Explanation::Importance(mut i) => {
            i.features = i.features.into_iter().map(rename).collect();
            Explanation::Importance(i)
        }
        Explanation::SimilarExamples(x) => Explanation::SimilarExamples(rename_pool(x, &rename)),
        Explanation::Counterfactual(x) => Explanation::Counterfactual(rename_pool(x, &rename)),
    }
}

fn rename_pool(mut x: ExampleSet, rename: &impl Fn(String) -> String) -> ExampleSet {
    x.pool = x
        .pool
        .into_iter()
        .map(|c| {
            let name = rename(c.name().to_string());
            c.renamed(name)
        })
        .collect();
    x
}

/// Name → position lookup used when building score maps.
pub(crate) fn feature_positions(features: &[String]) -> HashMap<&str, usize> {
    features.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect()
}
