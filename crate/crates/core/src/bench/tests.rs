use super::*;
use crate::explanation::{FeatureContributions, FeatureSpace};

fn lfc(features: &[&str], scores: &[f64]) -> Explanation {
    Explanation::Contributions(FeatureContributions {
        row_ids: vec!["r".into()],
        features: features.iter().map(|f| f.to_string()).collect(),
        contributions: scores.iter().map(|s| vec![*s]).collect(),
        values: features.iter().map(|_| vec![Cell::Numeric(1.0)]).collect(),
        base_value: 0.0,
        space: FeatureSpace::Interpretable,
        predictions: None,
    })
}

#[test]
fn percent_change_formula() {
    assert!((percent_change(2.0, 2.1) - 5.0).abs() < 1e-12);
    assert_eq!(percent_change(4.0, 3.0), -25.0);
    assert_eq!(percent_change(1.0, 1.0), 0.0);
}

#[test]
fn mean_and_sample_std() {
    let (m, s) = mean_std(&[1.0, 2.0, 3.0, 4.0]);
    assert_eq!(m, 2.5);
    assert!((s - (5.0f64 / 3.0).sqrt()).abs() < 1e-15);
    assert_eq!(mean_std(&[7.0]), (7.0, 0.0));
}

#[test]
fn equivalence_diffs() {
    let a = lfc(&["x", "y"], &[1.0, 2.0]);
    assert!(assert_equivalence(&a, &a.clone(), 1e-9).is_ok());

    let b = lfc(&["x", "y"], &[1.0, 2.0 + 1e-6]);
    let diff = assert_equivalence(&a, &b, 1e-9).unwrap_err();
    assert_eq!(diff.lines.len(), 1);
    assert!(diff.lines[0].contains("\"y\""), "{diff}");

    let c = lfc(&["x", "z"], &[1.0, 2.0]);
    let diff = assert_equivalence(&a, &c, 1e-9).unwrap_err();
    assert!(diff.lines[0].contains("[\"y\"]") && diff.lines[0].contains("[\"z\"]"), "{diff}");

    // Order does not matter.
    let d = lfc(&["y", "x"], &[2.0, 1.0]);
    assert!(assert_equivalence(&a, &d, 1e-9).is_ok());
}

#[test]
fn condition_feature_spaces() {
    let fx = Fixture::housing(300, 3, 20, 3).unwrap();
    let model_cols = fx.app.pipeline().to_model_space(&fx.x).unwrap();
    let (raw, _) = run_condition(Condition::Raw, ExplainerKind::FeatureContributions, &fx).unwrap();
    let raw = raw.explanation().unwrap().features().into_iter().map(String::from).collect::<Vec<_>>();
    assert_eq!(raw, model_cols.column_names());

    let (engine, _) = run_condition(Condition::Engine, ExplainerKind::FeatureContributions, &fx).unwrap();
    assert_eq!(
        engine.explanation().unwrap().features(),
        vec!["Median Income", "House Age", "Average Rooms", "Neighborhood", "Ocean Proximity"]
    );
}

#[test]
fn engine_matches_hand_rolled_on_small_fixture() {
    let fx = Fixture::housing(400, 11, 30, 4).unwrap();
    for kind in ExplainerKind::ALL {
        check_equivalence(kind, &fx).unwrap();
    }
}

#[test]
fn small_report_structure() {
    let cfg = BenchConfig {
        sizes: vec![120, 150],
        repeats: 2,
        se_query_rows: 10,
        ..BenchConfig::default()
    };
    let report = run_benchmark(&cfg).unwrap();
    assert_eq!(report.version, REPORT_VERSION);
    assert_eq!(report.timings.len(), 4 * 3 * 2);
    assert!(report.timings.iter().all(|t| t.runs == 2 && t.run_seconds.len() == 2));
    assert_eq!(report.equivalence.len(), 6);
    assert!(report
        .percent_change(ExplainerKind::FeatureContributions, 120, Condition::HandRolled, Condition::Engine)
        .is_some());
    assert_eq!(report.config.repeats, 2);
    assert!(report.notes[0].contains("algorithm-ready"));
}

#[test]
fn config_parsing() {
    let cfg = BenchConfig::from_json(r#"{"sizes":[500],"kinds":["feature_importance"],"repeats":3,"seed":9}"#).unwrap();
    assert_eq!(cfg.sizes, vec![500]);
    assert_eq!(cfg.kinds, vec![ExplainerKind::FeatureImportance]);
    assert!(BenchConfig::from_json(r#"{"repeats":0}"#).is_err());
    assert!(BenchConfig::from_json(r#"{"sizes":[10],"extra":1}"#).is_err());
}
