//! Explanation algorithms and the fit/produce orchestration around them.
//!
//! Algorithms run in the algorithm-ready space. Whenever they need model
//! output they route their (possibly perturbed) rows through
//! [`TransformPipeline::algorithm_to_model_space`] first.

mod linear;
mod neighbors;
mod permutation;
mod shapley;

use std::borrow::Cow;
use std::collections::HashMap;
use std::fmt;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explanation::{rename_features, validate_from_table, Descriptions, Explanation};
use crate::model::{Model, Task};
use crate::tabular::{Cell, Column, Table};
use crate::transform::{Audit, TransformPipeline};

pub use linear::linear_contributions;
pub use neighbors::{similar_examples, FeatureStats};
pub use permutation::{permutation_for, permutation_importance};
pub use shapley::{coalition_weight, exact_shapley, MAX_EXACT_FEATURES};

pub const DEFAULT_BACKGROUND_CAP: usize = 100;
pub const DEFAULT_REPEATS: usize = 5;
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplainerKind {
    FeatureContributions,
    FeatureImportance,
    SimilarExamples,
}

impl ExplainerKind {
    pub const ALL: [ExplainerKind; 3] = [
        ExplainerKind::FeatureContributions,
        ExplainerKind::FeatureImportance,
        ExplainerKind::SimilarExamples,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ExplainerKind::FeatureContributions => "feature_contributions",
            ExplainerKind::FeatureImportance => "feature_importance",
            ExplainerKind::SimilarExamples => "similar_examples",
        }
    }
}

impl fmt::Display for ExplainerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Mse,
    /// Predictions ≥ 0.5 count as class 1.
    Accuracy,
}

impl Metric {
    pub fn for_task(task: Task) -> Metric {
        match task {
            Task::Regression => Metric::Mse,
            Task::BinaryProbability => Metric::Accuracy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainerOptions {
    pub background_cap: usize,
    pub repeats: usize,
    /// Defaults to the metric matching the model's task.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metric: Option<Metric>,
}

impl Default for ExplainerOptions {
    fn default() -> Self {
        ExplainerOptions {
            background_cap: DEFAULT_BACKGROUND_CAP,
            repeats: DEFAULT_REPEATS,
            metric: None,
        }
    }
}

/// Reference rows for the interventional value function.
#[derive(Debug, Clone, PartialEq)]
pub struct BackgroundSample {
    /// Rows in the algorithm-ready space.
    pub rows: Table,
    /// Positions of the rows in the training table, ascending.
    pub indices: Vec<usize>,
    pub cap: usize,
    pub seed: u64,
}

/// Seeded sample of `min(cap, n)` row positions, without replacement, in
/// ascending order.
pub fn sample_background(n: usize, cap: usize, seed: u64) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = rand::seq::index::sample(&mut rng, n, cap).into_vec();
    picked.sort_unstable();
    picked
}

/// A model plus the pipeline that feeds it, seen from the algorithm space.
#[derive(Clone, Copy)]
pub struct Predictor<'a> {
    pub model: &'a Model,
    pub pipeline: &'a TransformPipeline,
}

impl<'a> Predictor<'a> {
    pub fn new(model: &'a Model, pipeline: &'a TransformPipeline) -> Self {
        Predictor { model, pipeline }
    }

    /// Predictions for algorithm-space rows.
    pub fn predict(&self, rows: &Table) -> Result<Vec<f64>> {
        let model_rows: Cow<'_, Table> = self.pipeline.algorithm_to_model_route(rows)?;
        self.model.predict(&model_rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FittedExplainer {
    pub kind: ExplainerKind,
    /// Training data in the algorithm-ready space.
    pub train: Table,
    pub background: BackgroundSample,
    /// Mean prediction over the background rows.
    pub base_value: f64,
    /// Per-feature standardization for similar examples.
    pub stats: Option<Vec<FeatureStats>>,
    pub seed: u64,
    pub options: ExplainerOptions,
}

pub fn fit_explainer(
    kind: ExplainerKind,
    pipeline: &TransformPipeline,
    model: &Model,
    train: &Table,
    seed: u64,
    options: &ExplainerOptions,
) -> Result<FittedExplainer> {
    let n = train.n_rows();
    let indices = sample_background(n, options.background_cap, seed);
    fit_with_background(kind, pipeline, model, train, seed, options, indices)
}

/// Same as [`fit_explainer`] with a given background (used when reloading).
pub fn fit_with_background(
    kind: ExplainerKind,
    pipeline: &TransformPipeline,
    model: &Model,
    train: &Table,
    seed: u64,
    options: &ExplainerOptions,
    indices: Vec<usize>,
) -> Result<FittedExplainer> {
    if train.n_rows() == 0 {
        return Err(Error::Data("cannot fit an explainer on an empty training table".into()));
    }
    if let Some(&i) = indices.iter().find(|&&i| i >= train.n_rows()) {
        return Err(Error::Data(format!("background row {i} is out of range")));
    }
    let algorithm_train = pipeline.to_algorithm_space(train)?;
    let rows = algorithm_train.take_rows(&indices);
    let predictions = Predictor::new(model, pipeline).predict(&rows)?;
    let base_value = mean(&predictions);
    let stats = match kind {
        ExplainerKind::SimilarExamples => Some(neighbors::fit_stats(&algorithm_train)),
        _ => None,
    };
    Ok(FittedExplainer {
        kind,
        train: algorithm_train,
        background: BackgroundSample {
            rows,
            indices,
            cap: options.background_cap,
            seed,
        },
        base_value,
        stats,
        seed,
        options: options.clone(),
    })
}

pub(crate) fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Local contributions in the algorithm space, using the linear closed form
/// when the model is linear and sees algorithm-space features directly,
/// exact enumeration otherwise.
pub fn contributions(f: &FittedExplainer, predictor: Predictor<'_>, x: &Table) -> Result<Explanation> {
    let c = match predictor.model.as_linear() {
        Some(m) if !predictor.pipeline.has_model_only_transforms() => {
            linear_contributions(f, m, x)?
        }
        _ => exact_shapley(f, predictor, x)?,
    };
    Ok(Explanation::Contributions(c))
}

/// Per-call inputs for [`produce_interpretable`].
#[derive(Debug, Clone, Copy)]
pub struct ProduceContext<'a> {
    pub descriptions: &'a Descriptions,
    /// Training targets, aligned with the fitted training table.
    pub targets: &'a [f64],
    /// Neighbours per row for similar examples.
    pub k: usize,
}

/// Runs the five-step process for one explanation kind and returns the
/// explanation with its audit trail. A Break-mode stop is reported in the
/// audit and leaves the explanation in a partial space.
pub fn produce_interpretable(
    f: &FittedExplainer,
    pipeline: &TransformPipeline,
    model: &Model,
    x: &Table,
    ctx: ProduceContext<'_>,
) -> Result<(Explanation, Audit)> {
    let predictor = Predictor::new(model, pipeline);
    let mut interpretable_x = None;
    let explanation = match f.kind {
        ExplainerKind::FeatureContributions => {
            let (algorithm_x, interpretable) = pipeline.algorithm_and_interpretable_routes(x)?;
            interpretable_x = Some(interpretable);
            contributions(f, predictor, &algorithm_x)?
        }
        ExplainerKind::FeatureImportance => {
            let metric = f.options.metric.unwrap_or_else(|| Metric::for_task(model.task()));
            Explanation::Importance(permutation_importance(
                f,
                predictor,
                &f.train,
                ctx.targets,
                metric,
                f.options.repeats,
                f.seed,
            )?)
        }
        ExplainerKind::SimilarExamples => {
            let algorithm_x = pipeline.algorithm_route(x)?;
            let targets: Vec<Cell> = ctx.targets.iter().map(|&t| Cell::Numeric(t)).collect();
            Explanation::SimilarExamples(similar_examples(f, &algorithm_x, ctx.k, &targets)?)
        }
    };
    let (explanation, audit) = pipeline.explanation_to_interpretable(explanation)?;
    let explanation = match explanation {
        Explanation::Contributions(mut c) if !audit.stopped => {
            let interpretable = match interpretable_x {
                Some(t) => t?,
                None => pipeline.interpretable_route(x)?,
            };
            let mut columns: HashMap<String, Column> = interpretable
                .into_owned()
                .into_columns()
                .into_iter()
                .map(|col| (col.name().to_string(), col))
                .collect();
            for (feature, values) in c.features.iter().zip(c.values.iter_mut()) {
                if let Some(col) = columns.remove(feature) {
                    *values = col.into_cells();
                }
            }
            Explanation::Contributions(c)
        }
        other => other,
    };
    let explanation = rename_features(explanation, ctx.descriptions);
    if let Err(violations) = validate_from_table(&explanation) {
        return Err(Error::Validation(violations.join("; ")));
    }
    Ok((explanation, audit))
}

/// Numeric view of an algorithm-space cell used by the closed-form and
/// distance computations.
pub(crate) fn numeric_cell(cell: &Cell, feature: &str, row: &str) -> Result<f64> {
    match cell {
        Cell::Missing | Cell::Any => Err(Error::Data(format!(
            "feature {feature:?} is missing in row {row:?}"
        ))),
        c => c
            .as_f64()
            .ok_or_else(|| Error::Contract(format!("feature {feature:?} is not numeric"))),
    }
}

pub(crate) fn check_columns(expected: &Table, got: &Table) -> Result<()> {
    let a = expected.column_names();
    let b = got.column_names();
    if a != b {
        return Err(Error::Schema(format!(
            "explained rows have columns [{}], expected [{}]",
            b.join(", "),
            a.join(", ")
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests;
