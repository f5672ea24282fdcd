//! Seeded housing-like data: five numerics (one with gaps), one categorical,
//! and a latitude/longitude pair that maps to neighborhood labels.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::config::{ProjectConfig, CONFIG_VERSION};
use crate::error::Result;
use crate::tabular::{Cell, Column, DType, Table};

pub const TARGET: &str = "median_house_value";
pub const OCEAN_PROXIMITY: &str = "ocean_proximity";
pub const OCEAN: [&str; 5] = ["<1H OCEAN", "INLAND", "NEAR BAY", "NEAR OCEAN", "ISLAND"];
const OCEAN_EFFECT: [f64; 5] = [0.4, -0.8, 0.6, 0.5, 1.5];
const GRID: usize = 8;
pub const DEFAULT_LABEL: &str = "unknown";

fn latitude(i: usize) -> f64 {
    // Two decimals, matching the mapping key precision.
    (3250 + 50 * i as i64) as f64 / 100.0
}

fn longitude(j: usize) -> f64 {
    (-12400 + 50 * j as i64) as f64 / 100.0
}

/// Grid cells with a neighborhood label. About one cell in seven is left
/// unmapped so the default label shows up.
pub fn neighborhood_lookup() -> Vec<(f64, f64, String)> {
    let mut out = Vec::new();
    for i in 0..GRID {
        for j in 0..GRID {
            if (i + j) % 7 != 3 {
                out.push((latitude(i), longitude(j), format!("zone {i}-{j}")));
            }
        }
    }
    out
}

/// `n` rows of features (ids `h0`, `h1`, ...) with the target included as
/// a column.
pub fn housing(n: usize, seed: u64) -> Table {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut income = Vec::with_capacity(n);
    let mut age = Vec::with_capacity(n);
    let mut rooms = Vec::with_capacity(n);
    let mut lat = Vec::with_capacity(n);
    let mut lon = Vec::with_capacity(n);
    let mut ocean = Vec::with_capacity(n);
    let mut target = Vec::with_capacity(n);
    for r in 0..n {
        let inc: f64 = rng.random_range(0.5..15.0);
        let a = rng.random_range(1..=52) as f64;
        let rm: f64 = rng.random_range(1.0..10.0);
        let i = rng.random_range(0..GRID);
        let j = rng.random_range(0..GRID);
        // Skewed towards the first categories; ISLAND stays rare.
        let o = match rng.random_range(0..100) {
            0..=39 => 0,
            40..=69 => 1,
            70..=84 => 2,
            85..=98 => 3,
            _ => 4,
        };
        let noise: f64 = rng.random_range(-0.25..0.25);
        let y = 0.45 * inc + 0.012 * a + 0.08 * rm - 0.15 * (latitude(i) - 34.0) + OCEAN_EFFECT[o] + noise;
        // Every 50th row has no income, plus a random 1%.
        let missing = r % 50 == 7 || rng.random_range(0..100) == 0;
        income.push(if missing { Cell::Missing } else { Cell::Numeric(round(inc, 4)) });
        age.push(Cell::Numeric(a));
        rooms.push(Cell::Numeric(round(rm, 3)));
        lat.push(Cell::Numeric(latitude(i)));
        lon.push(Cell::Numeric(longitude(j)));
        ocean.push(Cell::categorical(OCEAN[o]));
        target.push(Cell::Numeric(round(y, 5)));
    }
    let col = |name: &str, dtype, cells| Column::new(name, dtype, cells).expect("cells match dtype");
    Table::with_named_ids(
        vec![
            col("med_income", DType::Numeric, income),
            col("house_age", DType::Numeric, age),
            col("rooms", DType::Numeric, rooms),
            col("latitude", DType::Numeric, lat),
            col("longitude", DType::Numeric, lon),
            col(OCEAN_PROXIMITY, DType::Categorical, ocean),
            col(TARGET, DType::Numeric, target),
        ],
        (0..n).map(|r| format!("h{r}")).collect(),
    )
    .expect("columns have equal length")
}

fn round(x: f64, digits: i32) -> f64 {
    let p = 10f64.powi(digits);
    (x * p).round() / p
}

pub fn descriptions() -> Value {
    json!({
        "med_income": "Median Income",
        "house_age": "House Age",
        "rooms": "Average Rooms",
        "neighborhood": "Neighborhood",
        "ocean_proximity": "Ocean Proximity",
    })
}

/// Project config over a CSV at `data_path` (with an `id` column): impute
/// everywhere, one-hot encode for the model only, and map latitude/longitude
/// to a neighborhood for people only. The model is fitted by least squares.
pub fn housing_config(data_path: &str, seed: u64) -> Value {
    let lookup: Vec<Value> = neighborhood_lookup()
        .into_iter()
        .map(|(la, lo, label)| json!({ "key": [la, lo], "label": label }))
        .collect();
    json!({
        "version": CONFIG_VERSION,
        "data": { "path": data_path, "id_column": "id", "target_column": TARGET },
        "model": { "fit": "linear" },
        "transformers": [
            { "type": "imputer", "params": {}, "model": true, "interpret": true },
            { "type": "one_hot_encoder", "params": { "columns": [OCEAN_PROXIMITY] }, "model": true, "interpret": false },
            {
                "type": "mapping_encoder",
                "params": {
                    "source_columns": ["latitude", "longitude"],
                    "target_column": "neighborhood",
                    "lookup": lookup,
                    "default_label": DEFAULT_LABEL,
                    "key_precision": 2
                },
                "model": false,
                "interpret": true
            }
        ],
        "feature_descriptions": descriptions(),
        "seed": seed
    })
}

pub fn housing_project(seed: u64) -> Result<ProjectConfig> {
    let text = housing_config("housing.csv", seed).to_string();
    ProjectConfig::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeded_and_shaped() {
        let a = housing(300, 4);
        assert_eq!(a, housing(300, 4));
        assert_ne!(a, housing(300, 5));
        assert_eq!(a.n_rows(), 300);
        let income = a.column("med_income").unwrap();
        assert!(income.cells().iter().any(Cell::is_missing));
        let ocean = a.column(OCEAN_PROXIMITY).unwrap();
        assert!(OCEAN.iter().take(4).all(|o| ocean.cells().contains(&Cell::categorical(*o))));
    }

    #[test]
    fn config_parses() {
        let cfg = housing_project(1).unwrap();
        assert_eq!(cfg.build_transformers().unwrap().len(), 3);
    }
}
