use super::{check_columns, mean, numeric_cell, FittedExplainer};
use crate::error::{Error, Result};
use crate::explanation::{FeatureContributions, FeatureSpace};
use crate::model::LinearModel;
use crate::tabular::Table;

/// Closed-form Shapley values of a linear model: `w_i (x_i - mean_B(x_i))`.
///
/// Only valid when the model consumes algorithm-space features directly;
/// callers check that no transformer sits between the two spaces.
pub fn linear_contributions(f: &FittedExplainer, model: &LinearModel, x: &Table) -> Result<FeatureContributions> {
    check_columns(&f.train, x)?;
    if let Some(missing) = model.weights.keys().find(|k| !x.has_column(k)) {
        return Err(Error::Contract(format!("model feature {missing:?} is not in the algorithm space")));
    }
    let background = &f.background.rows;
    let n = x.n_rows();
    let mut contributions = Vec::with_capacity(x.n_cols());
    for (col, bcol) in x.columns().iter().zip(background.columns()) {
        let w = model.weights.get(col.name()).copied().unwrap_or(0.0);
        if w == 0.0 {
            contributions.push(vec![0.0; n]);
            continue;
        }
        let bg: Vec<f64> = bcol
            .cells()
            .iter()
            .enumerate()
            .map(|(r, c)| numeric_cell(c, col.name(), &background.row_id(r)))
            .collect::<Result<_>>()?;
        let mu = mean(&bg);
        let phi = col
            .cells()
            .iter()
            .enumerate()
            .map(|(r, c)| Ok(w * (numeric_cell(c, col.name(), &x.row_id(r))? - mu)))
            .collect::<Result<_>>()?;
        contributions.push(phi);
    }
    let mut predictions = vec![model.intercept; n];
    for (name, w) in &model.weights {
        let col = x.column(name).expect("checked above");
        for (r, (p, c)) in predictions.iter_mut().zip(col.cells()).enumerate() {
            *p += w * numeric_cell(c, name, &x.row_id(r))?;
        }
    }
    Ok(FeatureContributions {
        row_ids: x.row_ids().to_vec(),
        features: x.column_names().into_iter().map(String::from).collect(),
        contributions,
        values: x.columns().iter().map(|c| c.cells().to_vec()).collect(),
        base_value: f.base_value,
        space: FeatureSpace::Algorithm,
        predictions: Some(predictions),
    })
}
