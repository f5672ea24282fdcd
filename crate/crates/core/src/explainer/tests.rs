use proptest::prelude::*;

use super::*;
use crate::explanation::FeatureSpace;
use crate::model::{numeric_table, LinearModel, TreeModel, TreeNode};
use crate::tabular::{Column, DType};
use crate::transform::{FeatureSpaceFlags, Imputer, OneHotEncoder, Standardizer, Transformer};

fn linear(weights: &[(&str, f64)], intercept: f64) -> Model {
    Model::linear(LinearModel::new(
        weights.iter().map(|(n, w)| (n.to_string(), *w)),
        intercept,
    ))
}

fn empty() -> TransformPipeline {
    TransformPipeline::new(vec![])
}

fn fit(kind: ExplainerKind, p: &TransformPipeline, m: &Model, train: &Table) -> FittedExplainer {
    fit_explainer(kind, p, m, train, 7, &ExplainerOptions::default()).unwrap()
}

/// `x1 * x2` on {0, 1} inputs.
fn product_tree() -> Model {
    let leaf = |value| TreeNode::Leaf { value };
    let split = |feature: &str, left, right| TreeNode::Internal {
        feature: feature.into(),
        threshold: 0.5,
        left,
        right,
    };
    let nodes = vec![split("x1", 1, 2), leaf(0.0), split("x2", 3, 4), leaf(0.0), leaf(1.0)];
    Model::tree(TreeModel::new(nodes, 0).unwrap(), Task::Regression).unwrap()
}

fn grid(n: usize, d: usize, seed: u64) -> Table {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let columns = (0..d)
        .map(|j| Column::numeric(format!("f{j}"), (0..n).map(|_| rng.random_range(-3.0..3.0))))
        .collect();
    Table::with_sequential_ids(columns).unwrap()
}

fn phi(c: &crate::explanation::FeatureContributions, feature: &str, row: usize) -> f64 {
    c.contributions[c.feature_index(feature).unwrap()][row]
}

#[test]
fn background_takes_all_rows_below_cap() {
    let train = grid(50, 2, 1);
    let m = linear(&[("f0", 1.0)], 0.0);
    let f = fit(ExplainerKind::FeatureContributions, &empty(), &m, &train);
    assert_eq!(f.background.indices, (0..50).collect::<Vec<_>>());
}

#[test]
fn background_sample_is_seeded() {
    let a = sample_background(1000, 100, 3);
    assert_eq!(a.len(), 100);
    assert_eq!(a, sample_background(1000, 100, 3));
    assert_ne!(a, sample_background(1000, 100, 4));
    assert!(a.windows(2).all(|w| w[0] < w[1]));
}

#[test]
fn constant_model_base_value() {
    let train = grid(20, 2, 1);
    let f = fit(ExplainerKind::FeatureContributions, &empty(), &linear(&[], 4.5), &train);
    assert_eq!(f.base_value, 4.5);
}

#[test]
fn linear_closed_form_through_enumeration() {
    let train = numeric_table(&[("a", &[-1.0, 1.0]), ("b", &[-1.0, 1.0])]).unwrap();
    let m = linear(&[("a", 2.0), ("b", 3.0)], 0.0);
    let p = empty();
    let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
    let x = numeric_table(&[("a", &[1.0]), ("b", &[1.0])]).unwrap();
    let c = exact_shapley(&f, Predictor::new(&m, &p), &x).unwrap();
    assert!((phi(&c, "a", 0) - 2.0).abs() < 1e-12);
    assert!((phi(&c, "b", 0) - 3.0).abs() < 1e-12);
}

#[test]
fn product_oracle() {
    // By hand: v({}) = v({1}) = v({2}) = 0 and v({1,2}) = 1, so each
    // feature gets 1/2 (v({1}) - v({})) + 1/2 (v({1,2}) - v({2})) = 1/2.
    let oracle = |v: [f64; 4]| 0.5 * (v[1] - v[0]) + 0.5 * (v[3] - v[2]);
    let expected = oracle([0.0, 0.0, 0.0, 1.0]);
    let m = product_tree();
    let p = empty();
    let train = numeric_table(&[("x1", &[0.0]), ("x2", &[0.0])]).unwrap();
    let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
    let x = numeric_table(&[("x1", &[1.0]), ("x2", &[1.0])]).unwrap();
    let c = exact_shapley(&f, Predictor::new(&m, &p), &x).unwrap();
    assert_eq!(phi(&c, "x1", 0), expected);
    assert_eq!(phi(&c, "x2", 0), expected);
    assert_eq!(expected, 0.5);
}

#[test]
fn unconsumed_feature_gets_zero() {
    let m = product_tree();
    let p = empty();
    let train = grid(30, 3, 5).with_columns(
        ["x1", "x2", "unused"]
            .iter()
            .zip(grid(30, 3, 5).into_columns())
            .map(|(n, c)| c.renamed(*n))
            .collect(),
    )
    .unwrap();
    let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
    let x = train.take_rows(&[0, 1, 2, 3]);
    let c = exact_shapley(&f, Predictor::new(&m, &p), &x).unwrap();
    for r in 0..4 {
        assert_eq!(phi(&c, "unused", r), 0.0);
    }
}

#[test]
fn coalition_weights_sum_to_one() {
    for n in 1..=MAX_EXACT_FEATURES {
        // each coalition size s occurs C(n-1, s) times among subsets excluding i
        let mut total = 0.0;
        let mut binom = 1.0;
        for s in 0..n {
            total += binom * coalition_weight(s, n);
            binom = binom * (n - 1 - s) as f64 / (s + 1) as f64;
        }
        assert!((total - 1.0).abs() < 1e-12, "n = {n}: {total}");
    }
}

#[test]
fn enumeration_guard() {
    let train = grid(5, 13, 1);
    let m = linear(&[("f0", 1.0)], 0.0);
    let p = empty();
    let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
    let err = exact_shapley(&f, Predictor::new(&m, &p), &train.take_rows(&[0])).unwrap_err();
    assert!(matches!(err, Error::Capability(_)));
}

#[test]
fn linear_direct_formula() {
    let train = numeric_table(&[("a", &[0.0, 2.0])]).unwrap();
    let m = linear(&[("a", 2.0)], 1.0);
    let f = fit(ExplainerKind::FeatureContributions, &empty(), &m, &train);
    let x = numeric_table(&[("a", &[3.0, 1.0])]).unwrap();
    let c = linear_contributions(&f, m.as_linear().unwrap(), &x).unwrap();
    assert_eq!(c.contributions, vec![vec![4.0, 0.0]]);
    assert_eq!(c.base_value, 3.0);
}

#[test]
fn dispatch_uses_enumeration_across_model_only_transforms() {
    let train = Table::with_sequential_ids(vec![
        Column::numeric("a", [1.0, 2.0, 3.0]),
        Column::categorical("c", ["x", "y", "x"]),
    ])
    .unwrap();
    let mut p = TransformPipeline::new(vec![Transformer::new(
        OneHotEncoder::new(["c"]),
        FeatureSpaceFlags::new(true, Some(false), false),
    )]);
    p.fit(&train).unwrap();
    let m = linear(&[("a", 1.0), ("c_x", 2.0), ("c_y", -1.0)], 0.0);
    let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
    let e = contributions(&f, Predictor::new(&m, &p), &p.to_algorithm_space(&train).unwrap()).unwrap();
    let c = e.as_contributions().unwrap();
    assert_eq!(c.features, vec!["a", "c"]);
    assert_eq!(validate(&e), Ok(()));
}

fn validate(e: &Explanation) -> std::result::Result<(), Vec<String>> {
    e.validate()
}

#[test]
fn permutation_dummy_is_exactly_zero_and_seeded() {
    let train = grid(40, 3, 2);
    let y: Vec<f64> = (0..40).map(|i| i as f64).collect();
    let m = linear(&[("f0", 1.5), ("f1", -2.0)], 0.0);
    let p = empty();
    let f = fit(ExplainerKind::FeatureImportance, &p, &m, &train);
    let imp = permutation_importance(&f, Predictor::new(&m, &p), &train, &y, Metric::Mse, 5, 11).unwrap();
    assert_eq!(imp.importances[2], 0.0);
    let again = permutation_importance(&f, Predictor::new(&m, &p), &train, &y, Metric::Mse, 5, 11).unwrap();
    assert_eq!(imp, again);
}

#[test]
fn permutation_three_row_oracle() {
    // y = 2a. Permuting a by π gives MSE = (1/3) Σ (2 a_π(r) - 2 a_r)^2.
    let a = [1.0, 2.0, 4.0];
    let train = numeric_table(&[("a", &a)]).unwrap();
    let y: Vec<f64> = a.iter().map(|v| 2.0 * v).collect();
    let m = linear(&[("a", 2.0)], 0.0);
    let p = empty();
    let f = fit(ExplainerKind::FeatureImportance, &p, &m, &train);
    let repeats = 5;
    let imp = permutation_importance(&f, Predictor::new(&m, &p), &train, &y, Metric::Mse, repeats, 3).unwrap();

    let perms: [[usize; 3]; 6] = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let mse = |pi: &[usize]| (0..3).map(|r| (2.0 * a[pi[r]] - y[r]).powi(2)).sum::<f64>() / 3.0;
    let table: Vec<f64> = perms.iter().map(|pi| mse(pi)).collect();
    let expected = (0..repeats)
        .map(|r| {
            let pi = permutation_for(3, 0, r, 3);
            let k = perms.iter().position(|q| q[..] == pi[..]).unwrap();
            table[k] - 0.0
        })
        .sum::<f64>()
        / repeats as f64;
    assert!((imp.importances[0] - expected).abs() <= 1e-12);
    let exhaustive = table.iter().sum::<f64>() / 6.0;
    assert!(exhaustive > 0.0);
}

#[test]
fn metric_task_mismatch_is_config_error() {
    let train = grid(5, 1, 2);
    let m = linear(&[("f0", 1.0)], 0.0);
    let p = empty();
    let f = fit(ExplainerKind::FeatureImportance, &p, &m, &train);
    let err = permutation_importance(&f, Predictor::new(&m, &p), &train, &[0.0; 5], Metric::Accuracy, 1, 0);
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn nearest_neighbors() {
    let train = numeric_table(&[("a", &[0.0, 10.0])]).unwrap();
    let m = linear(&[("a", 1.0)], 0.0);
    let f = fit(ExplainerKind::SimilarExamples, &empty(), &m, &train);
    let targets = [Cell::Numeric(5.0), Cell::Numeric(6.0)];
    // z-scores: mean 5, std 5, so a=1 is at -0.8 against -1 and 1
    let x = numeric_table(&[("a", &[1.0])]).unwrap();
    let e = similar_examples(&f, &x, 1, &targets).unwrap();
    assert_eq!(e.neighbors[0].len(), 1);
    assert_eq!(e.pool_row_id(e.neighbors[0][0].pool_row), "0");
    assert!((e.neighbors[0][0].distance - 0.2).abs() < 1e-12);
    assert_eq!(e.neighbors[0][0].target, Cell::Numeric(5.0));

    let e = similar_examples(&f, &train.take_rows(&[1]), 5, &targets).unwrap();
    assert_eq!(e.neighbors[0].len(), 2);
    assert_eq!(e.pool_row_id(e.neighbors[0][0].pool_row), "1");
    assert_eq!(e.neighbors[0][0].distance, 0.0);
}

#[test]
fn neighbor_ties_keep_training_order() {
    let train = Table::with_sequential_ids(vec![Column::categorical("c", ["x", "y", "y", "x"])]).unwrap();
    let m = linear(&[], 0.0);
    let f = fit(ExplainerKind::SimilarExamples, &empty(), &m, &train);
    let targets: Vec<Cell> = (0..4).map(|i| Cell::Numeric(i as f64)).collect();
    let x = Table::with_sequential_ids(vec![Column::categorical("c", ["y"])]).unwrap();
    let e = similar_examples(&f, &x, 3, &targets).unwrap();
    let ids: Vec<String> = e.neighbors[0].iter().map(|n| e.pool_row_id(n.pool_row)).collect();
    assert_eq!(ids, vec!["1", "2", "0"]);
    let d: Vec<f64> = e.neighbors[0].iter().map(|n| n.distance).collect();
    assert_eq!(d, vec![0.0, 0.0, 1.0]);
}

fn ctx<'a>(d: &'a Descriptions, y: &'a [f64]) -> ProduceContext<'a> {
    ProduceContext { descriptions: d, targets: y, k: 2 }
}

#[test]
fn empty_pipeline_produce_matches_algorithm_space() {
    let train = grid(10, 3, 9);
    let m = linear(&[("f0", 1.0), ("f2", 0.5)], 0.1);
    let p = empty();
    let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
    let x = train.take_rows(&[2, 3]);
    let raw = contributions(&f, Predictor::new(&m, &p), &x).unwrap();
    let d = Descriptions::new();
    let (e, audit) = produce_interpretable(&f, &p, &m, &x, ctx(&d, &[])).unwrap();
    assert!(audit.events.is_empty());
    let (a, b) = (raw.as_contributions().unwrap(), e.as_contributions().unwrap());
    assert_eq!(a.features, b.features);
    assert_eq!(a.contributions, b.contributions);
    assert_eq!(a.values, b.values);
    assert_eq!(b.space, FeatureSpace::Interpretable);
}

#[test]
fn standardizer_only_pipeline_shows_raw_values() {
    let train = numeric_table(&[("a", &[0.0, 2.0, 4.0]), ("b", &[1.0, 1.0, 4.0])]).unwrap();
    let mut p = TransformPipeline::new(vec![Transformer::new(
        Standardizer::new(["a", "b"]),
        FeatureSpaceFlags::new(true, None, false),
    )]);
    p.fit(&train).unwrap();
    let model_train = p.to_model_space(&train).unwrap();
    let m = linear(&[("a", 1.0), ("b", 2.0)], 0.0);
    let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
    let x = train.take_rows(&[2]);
    let d = Descriptions::new();
    let (e, _) = produce_interpretable(&f, &p, &m, &x, ctx(&d, &[])).unwrap();
    let c = e.as_contributions().unwrap();
    let raw = contributions(&f, Predictor::new(&m, &p), &model_train.take_rows(&[2])).unwrap();
    assert_eq!(c.contributions, raw.as_contributions().unwrap().contributions);
    assert_eq!(c.values, vec![vec![Cell::Numeric(4.0)], vec![Cell::Numeric(4.0)]]);
}

#[test]
fn similar_examples_unstandardized() {
    let train = numeric_table(&[("a", &[0.0, 10.0, 20.0])]).unwrap();
    let mut p = TransformPipeline::new(vec![Transformer::new(
        Standardizer::new(["a"]),
        FeatureSpaceFlags::new(true, None, false),
    )]);
    p.fit(&train).unwrap();
    let m = linear(&[("a", 1.0)], 0.0);
    let f = fit(ExplainerKind::SimilarExamples, &p, &m, &train);
    let d = Descriptions::new();
    let y = [1.0, 2.0, 3.0];
    let (e, _) = produce_interpretable(&f, &p, &m, &train.take_rows(&[1]), ctx(&d, &y)).unwrap();
    let x = e.as_examples().unwrap();
    let first = x.neighbors[0][0].pool_row;
    let pool = x.pool_table().unwrap();
    assert_eq!(pool.column("a").unwrap().cells()[first], Cell::Numeric(10.0));
    assert_eq!(x.neighbors[0][0].target, Cell::Numeric(2.0));
}

#[test]
fn housing_shape_in_produce() {
    let train = Table::with_sequential_ids(vec![
        Column::new("med_income", DType::Numeric, vec![Cell::Numeric(8.0), Cell::Missing, Cell::Numeric(4.0), Cell::Numeric(6.0)]).unwrap(),
        Column::categorical("ocean_proximity", ["near bay", "inland", "inland", "near bay"]),
    ])
    .unwrap();
    let mut p = TransformPipeline::new(vec![
        Transformer::new(Imputer::new(), FeatureSpaceFlags::new(true, None, true)),
        Transformer::new(OneHotEncoder::new(["ocean_proximity"]), FeatureSpaceFlags::new(true, None, false)),
    ]);
    p.fit(&train).unwrap();
    let m = linear(&[("med_income", 0.5), ("ocean_proximity_near bay", 1.0), ("ocean_proximity_inland", -1.0)], 0.0);
    let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
    let d: Descriptions = [("ocean_proximity".to_string(), "Ocean Proximity".to_string())].into();
    let (e, _) = produce_interpretable(&f, &p, &m, &train, ctx(&d, &[])).unwrap();
    let c = e.as_contributions().unwrap();
    assert_eq!(c.features, vec!["med_income", "Ocean Proximity"]);
    assert_eq!(c.values[1][0], Cell::categorical("near bay"));
    assert_eq!(c.values[0][1], Cell::Numeric(6.0));
    assert_eq!(c.row_ids, train.row_ids().to_vec());
}

fn fixture(seed: u64, d: usize) -> (Table, Vec<(String, f64)>, Vec<(String, f64)>) {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let t = grid(50, d, seed);
    let w = |rng: &mut ChaCha8Rng| -> Vec<(String, f64)> {
        (0..d).map(|j| (format!("f{j}"), rng.random_range(-2.0..2.0))).collect()
    };
    let a = w(&mut rng);
    let b = w(&mut rng);
    (t, a, b)
}

fn linear_of(w: &[(String, f64)], intercept: f64) -> Model {
    Model::linear(LinearModel::new(w.iter().cloned(), intercept))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn efficiency_and_linear_agreement(seed in 0u64..1000, d in 2usize..=8) {
        let (train, w, _) = fixture(seed, d);
        let m = linear_of(&w, 0.3);
        let p = empty();
        let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
        let x = train.take_rows(&[0, 7, 19]);
        let exact = exact_shapley(&f, Predictor::new(&m, &p), &x).unwrap();
        let closed = linear_contributions(&f, m.as_linear().unwrap(), &x).unwrap();
        for (a, b) in exact.contributions.iter().flatten().zip(closed.contributions.iter().flatten()) {
            prop_assert!((a - b).abs() <= 1e-9);
        }
        prop_assert_eq!(Explanation::Contributions(exact).validate(), Ok(()));
    }

    #[test]
    fn shapley_linearity(seed in 0u64..1000, d in 2usize..=5) {
        let (train, wa, wb) = fixture(seed, d);
        let sum: Vec<(String, f64)> = wa.iter().zip(&wb).map(|((n, a), (_, b))| (n.clone(), a + b)).collect();
        let p = empty();
        let x = train.take_rows(&[3]);
        let run = |w: &[(String, f64)], c: f64| {
            let m = linear_of(w, c);
            let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
            exact_shapley(&f, Predictor::new(&m, &p), &x).unwrap()
        };
        let (fa, fb, fs) = (run(&wa, 1.0), run(&wb, -1.0), run(&sum, 0.0));
        for j in 0..d {
            prop_assert!((fs.contributions[j][0] - fa.contributions[j][0] - fb.contributions[j][0]).abs() <= 1e-9);
        }
    }

    #[test]
    fn symmetric_features(seed in 0u64..1000) {
        let base = grid(30, 2, seed);
        let dup = base.columns()[0].clone().renamed("f0_copy");
        let mut cols = base.into_columns();
        cols.push(dup);
        let train = Table::with_sequential_ids(cols).unwrap();
        let m = linear(&[("f0", 1.25), ("f0_copy", 1.25), ("f1", -0.5)], 0.0);
        let p = empty();
        let f = fit(ExplainerKind::FeatureContributions, &p, &m, &train);
        let c = exact_shapley(&f, Predictor::new(&m, &p), &train.take_rows(&[0, 1, 2])).unwrap();
        for r in 0..3 {
            prop_assert!((phi(&c, "f0", r) - phi(&c, "f0_copy", r)).abs() <= 1e-12);
        }
    }
}
