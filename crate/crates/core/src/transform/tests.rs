use indexmap::IndexMap;
use proptest::prelude::*;

use super::*;
use crate::tabular::{Column, DType};

fn flags(model: bool, algorithm: Option<bool>, interpret: bool) -> FeatureSpaceFlags {
    FeatureSpaceFlags::new(model, algorithm, interpret)
}

fn housing() -> Table {
    Table::with_sequential_ids(vec![
        Column::new(
            "med_income",
            DType::Numeric,
            vec![Cell::Numeric(8.3), Cell::Missing, Cell::Numeric(5.6)],
        )
        .unwrap(),
        Column::numeric("latitude", [37.73, 37.88, 38.5]),
        Column::numeric("longitude", [-122.41, -122.23, -121.0]),
        Column::categorical("ocean_proximity", ["near bay", "inland", "near bay"]),
    ])
    .unwrap()
}

fn neighborhoods() -> MappingEncoder {
    MappingEncoder::new(
        vec!["latitude".into(), "longitude".into()],
        "neighborhood",
        vec![
            MappingEntry {
                key: vec![Cell::Numeric(37.73), Cell::Numeric(-122.41)],
                label: "San Bruno".into(),
            },
            MappingEntry {
                key: vec![Cell::Numeric(37.88), Cell::Numeric(-122.23)],
                label: "Berkeley".into(),
            },
        ],
        "unknown",
        2,
    )
    .unwrap()
}

fn fig3() -> TransformPipeline {
    let mut p = TransformPipeline::new(vec![
        Transformer::new(Imputer::new(), flags(true, None, true)),
        Transformer::new(OneHotEncoder::new(["ocean_proximity"]), flags(true, None, false)),
        Transformer::new(neighborhoods(), flags(false, None, true)),
    ]);
    p.fit(&housing()).unwrap();
    p
}

fn fitted(transformers: Vec<Transformer>, train: &Table) -> TransformPipeline {
    let mut p = TransformPipeline::new(transformers);
    p.fit(train).unwrap();
    p
}

fn additive(table: &Table, scores: &[f64]) -> Explanation {
    Explanation::Contributions(FeatureContributions {
        row_ids: table.row_ids().to_vec(),
        features: names(table),
        contributions: scores.iter().map(|s| vec![*s; table.n_rows()]).collect(),
        values: table.columns().iter().map(|c| c.cells().to_vec()).collect(),
        base_value: 0.0,
        space: FeatureSpace::Algorithm,
        predictions: None,
    })
}

fn single(features: &[(&str, f64)]) -> Explanation {
    Explanation::Contributions(FeatureContributions {
        row_ids: vec!["0".into()],
        features: features.iter().map(|(f, _)| f.to_string()).collect(),
        contributions: features.iter().map(|(_, s)| vec![*s]).collect(),
        values: features.iter().map(|_| vec![Cell::Missing]).collect(),
        base_value: 0.0,
        space: FeatureSpace::Algorithm,
        predictions: None,
    })
}

fn scores(e: &Explanation) -> Vec<(String, f64)> {
    let c = e.as_contributions().unwrap();
    c.features.iter().cloned().zip(c.contributions.iter().map(|s| s[0])).collect()
}

#[test]
fn flag_default() {
    assert!(flags(true, None, false).algorithm());
    assert!(!flags(false, None, true).algorithm());
    assert!(!flags(true, Some(false), false).algorithm());
}

#[test]
fn empty_pipeline_is_identity() {
    let p = fitted(vec![], &housing());
    let t = housing();
    assert_eq!(p.to_model_space(&t).unwrap(), t);
    assert_eq!(p.to_algorithm_space(&t).unwrap(), t);
    assert_eq!(p.algorithm_to_model_space(&t).unwrap(), t);
    assert_eq!(p.to_interpretable_space(&t).unwrap(), t);
    let report = p.validate(&t);
    assert!(report.all_passed(), "{report}");
}

#[test]
fn fig3_model_space() {
    let p = fig3();
    let m = p.to_model_space(&housing()).unwrap();
    assert_eq!(
        m.column_names(),
        vec!["med_income", "latitude", "longitude", "ocean_proximity_near bay", "ocean_proximity_inland"]
    );
    assert_eq!(m.column("med_income").unwrap().cells()[1], Cell::Numeric((8.3 + 5.6) / 2.0));
}

#[test]
fn fig3_interpretable_space() {
    let p = fig3();
    let i = p.to_interpretable_space(&housing()).unwrap();
    assert_eq!(i.column_names(), vec!["med_income", "neighborhood", "ocean_proximity"]);
    assert_eq!(
        i.column("neighborhood").unwrap().cells(),
        &[Cell::categorical("San Bruno"), Cell::categorical("Berkeley"), Cell::categorical("unknown")]
    );
    assert!(!i.column("med_income").unwrap().cells().iter().any(Cell::is_missing));
}

#[test]
fn standardizer_model_route() {
    let train = Table::with_sequential_ids(vec![Column::numeric("a", [0.0, 2.0])]).unwrap();
    let p = fitted(vec![Transformer::new(Standardizer::new(["a"]), flags(true, None, false))], &train);
    let t = Table::with_sequential_ids(vec![Column::numeric("a", [3.0])]).unwrap();
    assert_eq!(p.to_model_space(&t).unwrap().column("a").unwrap().cells(), &[Cell::Numeric(2.0)]);
}

#[test]
fn imputer_interpretable_route() {
    let train = Table::with_sequential_ids(vec![Column::new("a", DType::Numeric, vec![Cell::Numeric(1.0), Cell::Missing]).unwrap()]).unwrap();
    let p = fitted(vec![Transformer::new(Imputer::new(), flags(false, None, true))], &train);
    let out = p.to_interpretable_space(&train).unwrap();
    assert_eq!(out.column("a").unwrap().cells(), &[Cell::Numeric(1.0), Cell::Numeric(1.0)]);
}

#[test]
fn categorical_algorithm_space() {
    let p = fitted(
        vec![Transformer::new(OneHotEncoder::new(["ocean_proximity"]), flags(true, Some(false), false))],
        &housing(),
    );
    let a = p.to_algorithm_space(&housing()).unwrap();
    assert_eq!(a.column("ocean_proximity").unwrap().dtype(), DType::Categorical);
    let m = p.algorithm_to_model_space(&a).unwrap();
    assert_eq!(m.column("ocean_proximity_inland").unwrap().dtype(), DType::Boolean);
    assert_eq!(m, p.to_model_space(&housing()).unwrap());
}

#[test]
fn model_only_transforms_apply_in_order() {
    let train = Table::with_sequential_ids(vec![Column::numeric("age", [5.0, 15.0])]).unwrap();
    let p = fitted(
        vec![
            Transformer::new(
                NumericBinner::new("age", vec![0.0, 10.0, 20.0], ["low", "high"]).unwrap(),
                flags(true, Some(false), false),
            ),
            Transformer::new(OneHotEncoder::new(["age_binned"]), flags(true, Some(false), false)),
        ],
        &train,
    );
    let m = p.algorithm_to_model_space(&p.to_algorithm_space(&train).unwrap()).unwrap();
    assert_eq!(m.column_names(), vec!["age_binned_low", "age_binned_high"]);
}

#[test]
fn fit_error_names_transformer() {
    let mut p = TransformPipeline::new(vec![
        Transformer::new(Imputer::new(), flags(true, None, true)),
        Transformer::new(FeatureSelector::new(["z"]), flags(true, None, true)),
    ]);
    match p.fit(&housing()) {
        Err(Error::MissingColumn { transformer, column }) => {
            assert_eq!(transformer, "feature_selector#1");
            assert_eq!(column, "z");
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn use_before_fit_is_error() {
    let p = TransformPipeline::new(vec![Transformer::new(Imputer::new(), flags(true, None, true))]);
    assert!(p.to_model_space(&housing()).is_err());
}

#[test]
fn one_hot_sum_through_pipeline() {
    let train = Table::with_sequential_ids(vec![Column::categorical("c", ["x", "y"])]).unwrap();
    let p = fitted(vec![Transformer::new(OneHotEncoder::new(["c"]), flags(true, None, false))], &train);
    let (out, audit) = p.explanation_to_interpretable(single(&[("c_x", 0.1), ("c_y", 0.25)])).unwrap();
    assert!(audit.events.is_empty() && !audit.stopped);
    let s = scores(&out);
    assert_eq!(s[0].0, "c");
    assert!((s[0].1 - 0.35).abs() < 1e-15);
    assert_eq!(out.space(), FeatureSpace::Interpretable);
}

#[test]
fn standardizer_additive_identity_through_pipeline() {
    let train = Table::with_sequential_ids(vec![Column::numeric("a", [0.0, 2.0])]).unwrap();
    let p = fitted(vec![Transformer::new(Standardizer::new(["a"]), flags(true, None, false))], &train);
    let e = single(&[("a", 0.7)]);
    let (out, _) = p.explanation_to_interpretable(e.clone()).unwrap();
    assert_eq!(scores(&out), scores(&e));
}

#[test]
fn mapping_forward_through_pipeline() {
    let p = fitted(vec![Transformer::new(neighborhoods(), flags(false, None, true))], &housing());
    let (out, _) = p
        .explanation_to_interpretable(single(&[("latitude", 0.2), ("longitude", -0.05)]))
        .unwrap();
    let s = scores(&out);
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].0, "neighborhood");
    assert!((s[0].1 - 0.15).abs() < 1e-15);
}

#[test]
fn fig3_explanation_route() {
    let p = fig3();
    let a = p.to_algorithm_space(&housing()).unwrap();
    let (out, audit) = p.explanation_to_interpretable(additive(&a, &[0.1, 0.2, -0.05, 0.3, 0.4])).unwrap();
    assert!(!audit.stopped);
    let s = scores(&out);
    let names: Vec<_> = s.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, vec!["med_income", "neighborhood", "ocean_proximity"]);
    assert!((s[1].1 - 0.15).abs() < 1e-15);
    assert!((s[2].1 - 0.7).abs() < 1e-15);
}

fn break_skip_pipeline(mode: UnsupportedMode) -> (TransformPipeline, Table) {
    let train = Table::with_sequential_ids(vec![
        Column::categorical("c", ["x", "y"]),
        Column::numeric("u", [1.0, 2.0]),
    ])
    .unwrap();
    let mapping = MappingEncoder::new(vec!["u".into()], "v", vec![], "unknown", 2).unwrap();
    let p = fitted(
        vec![
            Transformer::new(OneHotEncoder::new(["c"]), flags(true, None, false)),
            Transformer::new(mapping, flags(true, None, false)).with_mode(mode),
        ],
        &train,
    );
    (p, train)
}

#[test]
fn break_stops_at_first_unsupported() {
    let (p, _) = break_skip_pipeline(UnsupportedMode::Break);
    let (out, audit) = p.explanation_to_interpretable(single(&[("c_x", 0.1), ("c_y", 0.2), ("v", 0.3)])).unwrap();
    assert!(audit.stopped);
    assert_eq!(audit.events.len(), 1);
    assert_eq!(audit.events[0].action, AuditAction::Stopped);
    assert_eq!(audit.events[0].index, 1);
    // the one-hot group was never summed
    assert_eq!(out.features(), vec!["c_x", "c_y", "v"]);
    assert_eq!(out.space(), FeatureSpace::Algorithm);
}

#[test]
fn skip_continues() {
    let (p, _) = break_skip_pipeline(UnsupportedMode::Skip);
    let (out, audit) = p.explanation_to_interpretable(single(&[("c_x", 0.1), ("c_y", 0.2), ("v", 0.3)])).unwrap();
    assert!(!audit.stopped);
    assert_eq!(audit.events.len(), 1);
    assert_eq!(audit.events[0].action, AuditAction::Skipped);
    assert_eq!(out.features(), vec!["c", "v"]);
}

#[test]
fn default_modes() {
    let b = UnsupportedMode::Break;
    let s = UnsupportedMode::Skip;
    let t = |spec: TransformerSpec| Transformer::new(spec, flags(true, None, true)).on_unsupported;
    assert_eq!(t(OneHotEncoder::new(["c"]).into()), b);
    assert_eq!(t(neighborhoods().into()), b);
    assert_eq!(t(NumericBinner::new("a", vec![0.0, 1.0], ["x"]).unwrap().into()), b);
    assert_eq!(t(CategoryCombiner::new("a", IndexMap::new()).into()), b);
    assert_eq!(t(Standardizer::new(["a"]).into()), s);
    assert_eq!(t(Imputer::new().into()), s);
    assert_eq!(t(FeatureSelector::new(["a"]).into()), s);
}

#[test]
fn one_hot_example_decode_warning_reaches_audit() {
    let train = Table::with_sequential_ids(vec![Column::categorical("c", ["x", "y"])]).unwrap();
    let p = fitted(vec![Transformer::new(OneHotEncoder::new(["c"]), flags(true, None, false))], &train);
    let e = Explanation::SimilarExamples(ExampleSet {
        query_ids: vec!["q".into()],
        neighbors: vec![vec![Neighbor { pool_row: 0, target: Cell::Missing, distance: 0.0 }]],
        pool: vec![Column::boolean("c_x", [false]), Column::boolean("c_y", [false])],
        pool_ids: RowIds::Sequential(1),
        space: FeatureSpace::Algorithm,
    });
    let (out, audit) = p.explanation_to_interpretable(e).unwrap();
    assert_eq!(audit.events.len(), 1);
    assert_eq!(audit.events[0].action, AuditAction::Warning);
    assert_eq!(out.as_examples().unwrap().pool[0].cells(), &[Cell::Missing]);
}

#[test]
fn validate_fig3() {
    let report = fig3().validate(&housing());
    assert!(report.all_passed(), "{report}");
    assert_eq!(
        report.route(Route::Interpretable).unwrap().columns,
        vec!["med_income", "neighborhood", "ocean_proximity"]
    );
}

#[test]
fn validate_reports_interpretable_failure() {
    // The mapping needs latitude/longitude, which the interpret-only selector drops.
    // Fitting fails for the same reason, so build the fitted transformers separately.
    let train = housing();
    let mut selector = Transformer::new(FeatureSelector::new(["med_income"]), flags(false, None, true));
    selector.fit(&train).unwrap();
    let mut mapping = Transformer::new(neighborhoods(), flags(false, None, true));
    mapping.fit(&train).unwrap();
    let p = TransformPipeline::new(vec![selector, mapping]);
    let report = p.validate(&train);
    assert!(!report.all_passed());
    let r = report.route(Route::Interpretable).unwrap();
    assert!(!r.ok);
    assert!(r.error.as_ref().unwrap().contains("latitude"));
    assert!(report.route(Route::Model).unwrap().ok);
}

#[test]
fn fit_and_validate_names_the_failing_route() {
    let train = housing();
    let mut p = TransformPipeline::new(vec![
        Transformer::new(FeatureSelector::new(["med_income"]), flags(false, None, true)),
        Transformer::new(neighborhoods(), flags(false, None, true)),
    ]);
    let report = p.fit_and_validate(&train);
    let r = report.route(Route::Interpretable).unwrap();
    assert!(!r.ok);
    let err = r.error.as_ref().unwrap();
    assert!(err.contains("mapping_encoder#1") && err.contains("latitude"), "{err}");
    assert!(report.route(Route::Model).unwrap().error.as_ref().unwrap().starts_with("not checked"));
}

#[test]
fn validate_reports_break_without_failing() {
    let (p, train) = break_skip_pipeline(UnsupportedMode::Break);
    let report = p.validate(&train);
    assert!(report.all_passed(), "{report}");
    let r = report.route(Route::AdditiveExplanation).unwrap();
    assert!(r.stopped);
    assert_eq!(r.events.len(), 1);
}

#[test]
fn bundle_form_round_trips() {
    let p = fig3();
    let json = serde_json::to_string(&p).unwrap();
    let back: TransformPipeline = serde_json::from_str(&json).unwrap();
    assert_eq!(back.to_model_space(&housing()).unwrap(), p.to_model_space(&housing()).unwrap());
    assert_eq!(
        back.to_interpretable_space(&housing()).unwrap(),
        p.to_interpretable_space(&housing()).unwrap()
    );
}

// Random pipelines over a fixed schema: a, b numeric; c, d categorical.

fn schema_table(rows: &[(f64, f64, u8, u8)]) -> Table {
    let cat = |k: u8| ["p", "q", "r"][k as usize % 3].to_string();
    Table::with_sequential_ids(vec![
        Column::numeric("a", rows.iter().map(|r| r.0)),
        Column::numeric("b", rows.iter().map(|r| r.1)),
        Column::categorical("c", rows.iter().map(|r| cat(r.2))),
        Column::categorical("d", rows.iter().map(|r| cat(r.3))),
    ])
    .unwrap()
}

fn rows() -> impl Strategy<Value = Vec<(f64, f64, u8, u8)>> {
    proptest::collection::vec((-50.0f64..50.0, -50.0f64..50.0, 0u8..3, 0u8..3), 2..12)
}

/// Candidate transformer for slot `k`, valid whatever subset precedes it.
fn candidate(k: usize, model: bool, interpret: bool) -> Transformer {
    let f = flags(model, None, interpret);
    match k {
        0 => Transformer::new(Imputer::new(), f),
        1 => Transformer::new(Standardizer::new(["a"]), f),
        2 => Transformer::new(
            NumericBinner::new("b", vec![-50.0, 0.0, 50.0], ["neg", "pos"]).unwrap(),
            f,
        ),
        3 => Transformer::new(OneHotEncoder::new(["c"]), f),
        _ => Transformer::new(
            CategoryCombiner::new(
                "d",
                [("p", "pq"), ("q", "pq"), ("r", "r")]
                    .into_iter()
                    .map(|(a, b)| (a.to_string(), b.to_string()))
                    .collect(),
            ),
            f,
        ),
    }
}

proptest! {
    #[test]
    fn flag_default_law(data in rows(), picks in proptest::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 5)) {
        let train = schema_table(&data);
        let transformers: Vec<Transformer> = picks
            .iter()
            .enumerate()
            .filter(|(_, p)| p.0)
            .map(|(k, p)| candidate(k, p.1, p.2))
            .collect();
        let p = fitted(transformers, &train);
        prop_assert_eq!(p.to_algorithm_space(&train).unwrap(), p.to_model_space(&train).unwrap());
    }

    #[test]
    fn route_composition(data in rows(), picks in proptest::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 5)) {
        let train = schema_table(&data);
        // model-only slots are applied after the algorithm route
        let transformers: Vec<Transformer> = picks
            .iter()
            .enumerate()
            .filter(|(_, p)| p.0)
            .map(|(k, p)| {
                let mut t = candidate(k, true, false);
                t.flags.algorithm = Some(p.1);
                t
            })
            .collect();
        let p = fitted(transformers, &train);
        let report = p.validate(&train);
        prop_assume!(report.all_passed());
        let composed = p.algorithm_to_model_space(&p.to_algorithm_space(&train).unwrap()).unwrap();
        prop_assert_eq!(composed, p.to_model_space(&train).unwrap());
    }

    #[test]
    fn one_hot_round_trip(data in rows()) {
        let train = schema_table(&data);
        let mut t = OneHotEncoder::new(["c", "d"]);
        t.fit(&train).unwrap();
        let encoded = t.transform_data(&train).unwrap();
        let e = Explanation::SimilarExamples(ExampleSet {
            query_ids: vec!["q".into()],
            neighbors: vec![vec![]],
            pool: encoded.columns().to_vec(),
            pool_ids: encoded.row_ids().clone(),
            space: FeatureSpace::Algorithm,
        });
        let out = t.inverse_explanation(e, None).unwrap().into_explanation();
        let pool = out.as_examples().unwrap().pool_table().unwrap();
        prop_assert_eq!(pool, train);
    }

    #[test]
    fn additivity_preserved(data in rows(), s in proptest::collection::vec(-5.0f64..5.0, 16)) {
        let train = schema_table(&data);
        let p = fitted(
            vec![
                candidate(2, true, false),
                candidate(4, true, false),
                Transformer::new(FeatureSelector::new(["b_binned", "c", "d_group"]), flags(true, None, false)),
                candidate(3, true, false),
                Transformer::new(
                    MappingEncoder::new(vec!["a".into(), "b".into()], "ab", vec![], "unknown", 2).unwrap(),
                    flags(false, None, true),
                ),
            ],
            &train,
        );
        let a = p.to_algorithm_space(&train).unwrap();
        let n = a.n_cols();
        let e = additive(&a.take_rows(&[0]), &s[..n]);
        let before: f64 = s[..n].iter().sum();
        let (out, audit) = p.explanation_to_interpretable(e).unwrap();
        prop_assert!(!audit.stopped);
        let after: f64 = out.as_contributions().unwrap().contributions.iter().map(|c| c[0]).sum();
        prop_assert!((after - before).abs() <= 1e-12);
    }

    #[test]
    fn break_and_skip_semantics(kinds in proptest::collection::vec(any::<bool>(), 1..7), skip in any::<bool>()) {
        // true = one-hot on its own column (supported), false = mapping (unsupported inverse)
        let mut columns = Vec::new();
        let mut transformers = Vec::new();
        for (i, &onehot) in kinds.iter().enumerate() {
            let mode = if skip { UnsupportedMode::Skip } else { UnsupportedMode::Break };
            let f = flags(true, None, false);
            if onehot {
                columns.push(Column::categorical(format!("c{i}"), ["x", "y"]));
                transformers.push(Transformer::new(OneHotEncoder::new([format!("c{i}")]), f).with_mode(mode));
            } else {
                columns.push(Column::numeric(format!("u{i}"), [0.0, 1.0]));
                let m = MappingEncoder::new(vec![format!("u{i}")], format!("v{i}"), vec![], "unknown", 2).unwrap();
                transformers.push(Transformer::new(m, f).with_mode(mode));
            }
        }
        let train = Table::with_sequential_ids(columns).unwrap();
        let p = fitted(transformers, &train);
        let a = p.to_algorithm_space(&train).unwrap();
        let e = additive(&a.take_rows(&[0]), &vec![1.0; a.n_cols()]);
        let (out, audit) = p.explanation_to_interpretable(e).unwrap();
        let features = out.features();
        let first_unsupported = kinds.iter().rposition(|k| !k);
        for (i, &onehot) in kinds.iter().enumerate() {
            if !onehot {
                continue;
            }
            let expect_applied = skip || first_unsupported.is_none_or(|u| i > u);
            let name = format!("c{i}");
            prop_assert_eq!(features.contains(&name.as_str()), expect_applied);
        }
        match (skip, first_unsupported) {
            (_, None) => prop_assert!(audit.events.is_empty()),
            (true, Some(_)) => {
                prop_assert!(!audit.stopped);
                prop_assert_eq!(audit.events.len(), kinds.iter().filter(|k| !**k).count());
            }
            (false, Some(u)) => {
                prop_assert!(audit.stopped);
                prop_assert_eq!(audit.events.len(), 1);
                prop_assert_eq!(audit.events[0].index, u);
            }
        }
    }
}
