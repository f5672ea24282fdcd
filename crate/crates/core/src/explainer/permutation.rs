use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{FittedExplainer, Metric, Predictor};
use crate::error::{Error, Result};
use crate::explanation::{FeatureImportance, FeatureSpace};
use crate::model::Task;
use crate::tabular::{Column, Table};

/// The shuffle used for `feature` on repeat `repeat`. Each (seed, feature,
/// repeat) triple has its own random stream.
pub fn permutation_for(seed: u64, feature: usize, repeat: usize, n: usize) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((feature as u64) << 32) | repeat as u64);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    order
}

fn score(metric: Metric, predictions: &[f64], targets: &[f64]) -> f64 {
    let n = targets.len() as f64;
    match metric {
        Metric::Mse => predictions.iter().zip(targets).map(|(p, y)| (p - y).powi(2)).sum::<f64>() / n,
        Metric::Accuracy => {
            let hits = predictions
                .iter()
                .zip(targets)
                .filter(|(p, y)| (**p >= 0.5) == (**y >= 0.5))
                .count();
            hits as f64 / n
        }
    }
}

/// Permutation importance: how much the metric worsens when one feature's
/// column is shuffled. MSE importance is the mean increase in error,
/// accuracy importance the mean drop in accuracy. Either may be negative.
pub fn permutation_importance(
    _f: &FittedExplainer,
    predictor: Predictor<'_>,
    eval: &Table,
    targets: &[f64],
    metric: Metric,
    repeats: usize,
    seed: u64,
) -> Result<FeatureImportance> {
    match (predictor.model.task(), metric) {
        (Task::Regression, Metric::Mse) | (Task::BinaryProbability, Metric::Accuracy) => {}
        (task, metric) => {
            return Err(Error::Config(format!("metric {metric:?} does not apply to a {task:?} model")));
        }
    }
    if eval.n_rows() == 0 {
        return Err(Error::Data("permutation importance needs at least one row".into()));
    }
    if targets.len() != eval.n_rows() {
        return Err(Error::Data(format!(
            "{} targets for {} rows",
            targets.len(),
            eval.n_rows()
        )));
    }
    if repeats == 0 {
        return Err(Error::Config("permutation importance needs at least one repeat".into()));
    }
    let baseline = score(metric, &predictor.predict(eval)?, targets);
    let n = eval.n_rows();
    let mut importances = Vec::with_capacity(eval.n_cols());
    for (i, col) in eval.columns().iter().enumerate() {
        let mut total = 0.0;
        for r in 0..repeats {
            let order = permutation_for(seed, i, r, n);
            let shuffled = Column::new(
                col.name(),
                col.dtype(),
                order.iter().map(|&k| col.cells()[k].clone()).collect(),
            )?;
            let mut columns = eval.columns().to_vec();
            columns[i] = shuffled;
            let e = score(metric, &predictor.predict(&eval.with_columns(columns)?)?, targets);
            total += match metric {
                Metric::Mse => e - baseline,
                Metric::Accuracy => baseline - e,
            };
        }
        importances.push(total / repeats as f64);
    }
    Ok(FeatureImportance {
        features: eval.column_names().into_iter().map(String::from).collect(),
        importances,
        space: FeatureSpace::Algorithm,
    })
}
