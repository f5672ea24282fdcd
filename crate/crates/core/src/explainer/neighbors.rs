use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{check_columns, FittedExplainer};
use crate::error::{Error, Result};
use crate::explanation::{ExampleSet, FeatureSpace, Neighbor};
use crate::tabular::{Cell, Column, DType, Table};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub feature: String,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

pub(crate) fn fit_stats(train: &Table) -> Vec<FeatureStats> {
    train
        .columns()
        .iter()
        .filter(|c| c.dtype() == DType::Numeric)
        .map(|c| {
            let xs: Vec<f64> = c.cells().iter().filter_map(present).collect();
            let n = xs.len().max(1) as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            FeatureStats {
                feature: c.name().to_string(),
                mean,
                std: var.sqrt(),
            }
        })
        .collect()
}

fn present(c: &Cell) -> Option<f64> {
    match c {
        Cell::Numeric(x) => Some(*x),
        _ => None,
    }
}

const MISSING_CODE: u32 = 0;
const UNSEEN_CODE: u32 = u32::MAX;

enum Encoded {
    /// z-scores; NaN marks a missing value.
    Scores { mean: f64, std: f64, z: Vec<f64> },
    Codes { index: HashMap<String, u32>, codes: Vec<u32> },
}

impl Encoded {
    fn z(mean: f64, std: f64, c: &Cell) -> f64 {
        match present(c) {
            None => f64::NAN,
            Some(_) if std == 0.0 => 0.0,
            Some(x) => (x - mean) / std,
        }
    }

    fn code(index: &HashMap<String, u32>, c: &Cell) -> u32 {
        match c {
            Cell::Missing | Cell::Any => MISSING_CODE,
            c => index.get(c.render().as_ref()).copied().unwrap_or(UNSEEN_CODE),
        }
    }

    fn build(col: &Column, stats: &[FeatureStats]) -> Result<Encoded> {
        if col.dtype() == DType::Numeric {
            let s = stats
                .iter()
                .find(|s| s.feature == col.name())
                .ok_or_else(|| Error::Contract(format!("no fitted statistics for {:?}", col.name())))?;
            let z = col.cells().iter().map(|c| Encoded::z(s.mean, s.std, c)).collect();
            return Ok(Encoded::Scores { mean: s.mean, std: s.std, z });
        }
        let mut index = HashMap::new();
        let codes = col
            .cells()
            .iter()
            .map(|c| match c {
                Cell::Missing | Cell::Any => MISSING_CODE,
                c => {
                    let next = index.len() as u32 + 1;
                    *index.entry(c.render().into_owned()).or_insert(next)
                }
            })
            .collect();
        Ok(Encoded::Codes { index, codes })
    }

    /// Query cell in the same encoding as the training column.
    fn encode(&self, query: &Cell) -> f64 {
        match self {
            Encoded::Scores { mean, std, .. } => Encoded::z(*mean, *std, query),
            Encoded::Codes { index, .. } => Encoded::code(index, query) as f64,
        }
    }

    /// Squared-distance term between training row `t` and an encoded query value.
    fn term(&self, t: usize, q: f64) -> f64 {
        match self {
            Encoded::Scores { z, .. } => {
                let a = z[t];
                match (a.is_nan(), q.is_nan()) {
                    (true, true) => 0.0,
                    (false, false) => (a - q).powi(2),
                    _ => 1.0,
                }
            }
            Encoded::Codes { codes, .. } => {
                if codes[t] as f64 == q {
                    0.0
                } else {
                    1.0
                }
            }
        }
    }
}

/// The `k` training rows nearest each query row. Numeric features are
/// compared on fitted z-scores, other features by 0/1 mismatch. Ties keep
/// training order.
pub fn similar_examples(f: &FittedExplainer, x: &Table, k: usize, targets: &[Cell]) -> Result<ExampleSet> {
    if k == 0 {
        return Err(Error::Config("k must be at least 1".into()));
    }
    let train = &f.train;
    check_columns(train, x)?;
    if targets.len() != train.n_rows() {
        return Err(Error::Data(format!(
            "{} targets for {} training rows",
            targets.len(),
            train.n_rows()
        )));
    }
    let stats = f
        .stats
        .as_deref()
        .ok_or_else(|| Error::Contract("explainer was not fitted for similar examples".into()))?;
    let encoded: Vec<Encoded> = train
        .columns()
        .iter()
        .map(|c| Encoded::build(c, stats))
        .collect::<Result<_>>()?;
    let n = train.n_rows();
    let keep = k.min(n);

    let mut nearest_all: Vec<Vec<(f64, usize)>> = Vec::with_capacity(x.n_rows());
    let mut query = Vec::with_capacity(x.n_cols());
    for r in 0..x.n_rows() {
        query.clear();
        query.extend(encoded.iter().zip(x.columns()).map(|(e, c)| e.encode(&c.cells()[r])));
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(keep + 1);
        for t in 0..n {
            let d2: f64 = encoded.iter().zip(&query).map(|(e, &q)| e.term(t, q)).sum();
            if best.len() == keep && d2 >= best[keep - 1].0 {
                continue;
            }
            let at = best.partition_point(|(d, _)| *d <= d2);
            best.insert(at, (d2, t));
            best.truncate(keep);
        }
        nearest_all.push(best);
    }

    let mut used: Vec<usize> = nearest_all.iter().flatten().map(|(_, t)| *t).collect();
    used.sort_unstable();
    used.dedup();
    let position: HashMap<usize, usize> = used.iter().enumerate().map(|(p, &t)| (t, p)).collect();
    let pool = train.take_rows(&used);
    let neighbors = nearest_all
        .into_iter()
        .map(|list| {
            list.into_iter()
                .map(|(d2, t)| Neighbor {
                    pool_row: position[&t],
                    target: targets[t].clone(),
                    distance: d2.sqrt(),
                })
                .collect()
        })
        .collect();
    let pool_ids = pool.row_ids().clone();
    Ok(ExampleSet {
        query_ids: x.row_ids().to_vec(),
        neighbors,
        pool: pool.into_columns(),
        pool_ids,
        space: FeatureSpace::Algorithm,
    })
}
