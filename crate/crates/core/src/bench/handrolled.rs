//! A straight-line interpretable path for the housing fixture, written
//! without the transformer machinery: encode the data by hand, run the
//! algorithm, then sum one-hot groups, sum the mapped source columns and
//! rename. The benchmark checks the engine against it.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::explainer::{
    contributions, permutation_importance, similar_examples, FittedExplainer, Metric, Predictor,
};
use crate::explanation::{
    Descriptions, ExampleSet, Explanation, FeatureContributions, FeatureImportance, FeatureSpace,
};
use crate::model::Model;
use crate::tabular::{Cell, Column, DType, RowIds, Table};
use crate::transform::TransformPipeline;

#[derive(Debug, Clone)]
pub struct HandRolled {
    fills: HashMap<String, Cell>,
    one_hot: String,
    categories: Vec<String>,
    sources: [String; 2],
    target: String,
    lookup: HashMap<(i64, i64), String>,
    default_label: String,
    descriptions: Descriptions,
    /// Encoded training data, for permutation importance.
    pub encoded_train: Table,
    targets: Vec<f64>,
    empty: TransformPipeline,
}

fn key(a: f64, b: f64) -> (i64, i64) {
    ((a * 100.0).round() as i64, (b * 100.0).round() as i64)
}

impl HandRolled {
    #[allow(clippy::too_many_arguments)]
    pub fn fit(
        train: &Table,
        targets: &[f64],
        one_hot: &str,
        sources: [&str; 2],
        target: &str,
        lookup: &[(f64, f64, String)],
        default_label: &str,
        descriptions: Descriptions,
    ) -> Result<HandRolled> {
        let mut fills = HashMap::new();
        for col in train.columns() {
            let present: Vec<&Cell> = col.cells().iter().filter(|c| !c.is_missing()).collect();
            let fill = match col.dtype() {
                DType::Numeric => {
                    let xs: Vec<f64> = present.iter().filter_map(|c| c.as_f64()).collect();
                    Cell::Numeric(xs.iter().sum::<f64>() / xs.len() as f64)
                }
                _ => {
                    let mut counts: HashMap<String, usize> = HashMap::new();
                    for c in &present {
                        *counts.entry(c.render().into_owned()).or_default() += 1;
                    }
                    let best = counts
                        .iter()
                        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                        .map(|(v, _)| v.clone())
                        .unwrap_or_default();
                    present.iter().find(|c| c.render() == best).map(|c| (*c).clone()).unwrap_or(Cell::Missing)
                }
            };
            fills.insert(col.name().to_string(), fill);
        }
        let mut categories: Vec<String> = Vec::new();
        let oh = train
            .column(one_hot)
            .ok_or_else(|| Error::Schema(format!("no column {one_hot:?}")))?;
        for c in oh.cells() {
            let c = if c.is_missing() { &fills[one_hot] } else { c };
            let v = c.render().into_owned();
            if !categories.contains(&v) {
                categories.push(v);
            }
        }
        let mut hand = HandRolled {
            fills,
            one_hot: one_hot.to_string(),
            categories,
            sources: [sources[0].to_string(), sources[1].to_string()],
            target: target.to_string(),
            lookup: lookup.iter().map(|(a, b, l)| (key(*a, *b), l.clone())).collect(),
            default_label: default_label.to_string(),
            descriptions,
            encoded_train: Table::with_sequential_ids(Vec::new())?,
            targets: targets.to_vec(),
            empty: TransformPipeline::default(),
        };
        hand.encoded_train = hand.encode(train)?;
        Ok(hand)
    }

    fn impute(&self, col: &Column) -> Result<Column> {
        let fill = &self.fills[col.name()];
        let cells = col
            .cells()
            .iter()
            .map(|c| if c.is_missing() { fill.clone() } else { c.clone() })
            .collect();
        Column::new(col.name(), col.dtype(), cells)
    }

    /// Imputed and one-hot encoded data, as the model sees it.
    pub fn encode(&self, x: &Table) -> Result<Table> {
        let mut columns = Vec::new();
        for col in x.columns() {
            let col = self.impute(col)?;
            if col.name() == self.one_hot {
                for cat in &self.categories {
                    let bits = col.cells().iter().map(|c| c.render() == cat.as_str());
                    columns.push(Column::boolean(format!("{}_{cat}", self.one_hot), bits));
                }
            } else {
                columns.push(col);
            }
        }
        x.with_columns(columns)
    }

    fn label(&self, a: &Cell, b: &Cell) -> String {
        match (a.as_f64(), b.as_f64()) {
            (Some(a), Some(b)) => self.lookup.get(&key(a, b)).cloned().unwrap_or_else(|| self.default_label.clone()),
            _ => self.default_label.clone(),
        }
    }

    fn name(&self, feature: &str) -> String {
        self.descriptions.get(feature).cloned().unwrap_or_else(|| feature.to_string())
    }

    fn is_group(&self, feature: &str) -> bool {
        feature
            .strip_prefix(self.one_hot.as_str())
            .and_then(|rest| rest.strip_prefix('_'))
            .is_some_and(|cat| self.categories.iter().any(|c| c == cat))
    }

    /// Interpretable feature order, with each entry listing the encoded
    /// columns it sums.
    fn groups(&self, encoded: &[String]) -> Vec<(String, Vec<usize>)> {
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        let mut push = |name: &str, i: usize| match out.iter_mut().find(|(n, _)| n == name) {
            Some((_, v)) => v.push(i),
            None => out.push((name.to_string(), vec![i])),
        };
        for (i, f) in encoded.iter().enumerate() {
            if self.is_group(f) {
                push(&self.one_hot, i);
            } else if self.sources.contains(f) {
                push(&self.target, i);
            } else {
                push(f, i);
            }
        }
        out
    }

    /// Interpretable values of `x` for each interpretable feature.
    fn display_values(&self, x: &Table, feature: &str) -> Result<Vec<Cell>> {
        if feature == self.target {
            let a = self.impute(x.column(&self.sources[0]).ok_or_else(|| Error::Schema(self.sources[0].clone()))?)?;
            let b = self.impute(x.column(&self.sources[1]).ok_or_else(|| Error::Schema(self.sources[1].clone()))?)?;
            return Ok(a
                .cells()
                .iter()
                .zip(b.cells())
                .map(|(a, b)| Cell::Categorical(self.label(a, b)))
                .collect());
        }
        let col = x.column(feature).ok_or_else(|| Error::Schema(feature.to_string()))?;
        Ok(self.impute(col)?.into_cells())
    }

    fn predictor<'a>(&'a self, model: &'a Model) -> Predictor<'a> {
        Predictor::new(model, &self.empty)
    }

    pub fn feature_contributions(&self, f: &FittedExplainer, model: &Model, x: &Table) -> Result<Explanation> {
        let encoded = self.encode(x)?;
        let raw = match contributions(f, self.predictor(model), &encoded)? {
            Explanation::Contributions(c) => c,
            _ => unreachable!("contributions returns contributions"),
        };
        let mut features = Vec::new();
        let mut scores = Vec::new();
        let mut values = Vec::new();
        for (name, members) in self.groups(&raw.features) {
            let mut total = vec![0.0; raw.row_ids.len()];
            for &m in &members {
                for (t, s) in total.iter_mut().zip(&raw.contributions[m]) {
                    *t += s;
                }
            }
            values.push(self.display_values(x, &name)?);
            features.push(self.name(&name));
            scores.push(total);
        }
        Ok(Explanation::Contributions(FeatureContributions {
            row_ids: raw.row_ids,
            features,
            contributions: scores,
            values,
            base_value: raw.base_value,
            space: FeatureSpace::Interpretable,
            predictions: raw.predictions,
        }))
    }

    pub fn feature_importance(&self, f: &FittedExplainer, model: &Model) -> Result<Explanation> {
        let metric = f.options.metric.unwrap_or_else(|| Metric::for_task(model.task()));
        let raw = permutation_importance(
            f,
            self.predictor(model),
            &self.encoded_train,
            &self.targets,
            metric,
            f.options.repeats,
            f.seed,
        )?;
        let (features, importances) = self
            .groups(&raw.features)
            .into_iter()
            .map(|(name, members)| (self.name(&name), members.iter().map(|&m| raw.importances[m]).sum::<f64>()))
            .unzip();
        Ok(Explanation::Importance(FeatureImportance {
            features,
            importances,
            space: FeatureSpace::Interpretable,
        }))
    }

    pub fn similar_examples(&self, f: &FittedExplainer, x: &Table, k: usize) -> Result<Explanation> {
        let encoded = self.encode(x)?;
        let targets: Vec<Cell> = self.targets.iter().map(|&t| Cell::Numeric(t)).collect();
        let raw = similar_examples(f, &encoded, k, &targets)?;
        let names: Vec<String> = raw.pool.iter().map(|c| c.name().to_string()).collect();
        let n = raw.pool_ids.len();
        let mut pool = Vec::new();
        for (name, members) in self.groups(&names) {
            let cells: Vec<Cell> = if name == self.one_hot {
                (0..n)
                    .map(|r| {
                        let on: Vec<usize> = members
                            .iter()
                            .copied()
                            .filter(|&m| raw.pool[m].cells()[r] == Cell::Boolean(true))
                            .collect();
                        match on.as_slice() {
                            [m] => Cell::categorical(&names[*m][self.one_hot.len() + 1..]),
                            _ => Cell::Missing,
                        }
                    })
                    .collect()
            } else if name == self.target {
                let (a, b) = (&raw.pool[members[0]], &raw.pool[members[1]]);
                (0..n)
                    .map(|r| Cell::Categorical(self.label(&a.cells()[r], &b.cells()[r])))
                    .collect()
            } else {
                raw.pool[members[0]].cells().to_vec()
            };
            pool.push(Column::from_cells(self.name(&name), cells)?);
        }
        Ok(Explanation::SimilarExamples(ExampleSet {
            query_ids: raw.query_ids,
            neighbors: raw.neighbors,
            pool,
            pool_ids: RowIds::named(raw.pool_ids.to_vec())?,
            space: FeatureSpace::Interpretable,
        }))
    }
}
