use super::{check_columns, mean, FittedExplainer, Predictor};
use crate::error::{Error, Result};
use crate::explanation::{FeatureContributions, FeatureSpace};
use crate::tabular::{Cell, Column, RowIds, Table};

/// Largest feature count exact enumeration accepts (2^12 coalitions).
pub const MAX_EXACT_FEATURES: usize = 12;

/// Rows per batched prediction call.
const CHUNK_ROWS: usize = 16_384;

/// `|S|! (n - |S| - 1)! / n!`
pub fn coalition_weight(size: usize, n: usize) -> f64 {
    assert!(size < n, "coalition must leave one feature out");
    let fact = |k: usize| (1..=k).map(|i| i as f64).product::<f64>();
    fact(size) * fact(n - size - 1) / fact(n)
}

/// Exact interventional Shapley values by enumerating every coalition.
///
/// `v(S)` is the mean prediction over the background rows with the features
/// in `S` taken from the explained row.
pub fn exact_shapley(f: &FittedExplainer, predictor: Predictor<'_>, x: &Table) -> Result<FeatureContributions> {
    check_columns(&f.train, x)?;
    let d = x.n_cols();
    if d > MAX_EXACT_FEATURES {
        return Err(Error::Capability(format!(
            "exact Shapley values support at most {MAX_EXACT_FEATURES} algorithm-space features, got {d}; \
             use a linear model with matching spaces or reduce the feature count"
        )));
    }
    let background = &f.background.rows;
    let nb = background.n_rows();
    if nb == 0 {
        return Err(Error::Data("background sample is empty".into()));
    }
    let n_coalitions = 1usize << d;
    let per_chunk = (CHUNK_ROWS / nb).max(1);
    let weights: Vec<f64> = (0..d).map(|s| coalition_weight(s, d)).collect();
    let predictions = predictor.predict(x)?;

    let mut contributions = vec![vec![0.0; x.n_rows()]; d];
    let mut values = vec![0.0; n_coalitions];
    for r in 0..x.n_rows() {
        for start in (0..n_coalitions).step_by(per_chunk) {
            let masks = start..(start + per_chunk).min(n_coalitions);
            let rows = masks.len() * nb;
            let columns = x
                .columns()
                .iter()
                .zip(background.columns())
                .enumerate()
                .map(|(j, (xc, bc))| {
                    let mut cells: Vec<Cell> = Vec::with_capacity(rows);
                    for m in masks.clone() {
                        if m >> j & 1 == 1 {
                            cells.extend(std::iter::repeat_n(xc.cells()[r].clone(), nb));
                        } else {
                            cells.extend_from_slice(bc.cells());
                        }
                    }
                    Column::new(xc.name(), xc.dtype(), cells)
                })
                .collect::<Result<Vec<_>>>()?;
            let batch = Table::new(columns, RowIds::Sequential(rows))?;
            let preds = predictor.predict(&batch)?;
            for (c, m) in masks.enumerate() {
                values[m] = mean(&preds[c * nb..(c + 1) * nb]);
            }
        }
        for (i, phi) in contributions.iter_mut().enumerate() {
            let bit = 1usize << i;
            phi[r] = (0..n_coalitions)
                .filter(|m| m & bit == 0)
                .map(|m| weights[m.count_ones() as usize] * (values[m | bit] - values[m]))
                .sum();
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
