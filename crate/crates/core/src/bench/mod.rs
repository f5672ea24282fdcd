//! Runtime comparison of four ways to produce an explanation, with an
//! equivalence gate between the engine and the hand-rolled path.

pub mod handrolled;
pub mod synthetic;

use std::hint::black_box;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explainer::{
    contributions, permutation_importance, produce_interpretable, similar_examples, ExplainerKind, Metric,
    Predictor, ProduceContext,
};
use crate::explanation::Explanation;
use crate::realapp::RealApp;
use crate::tabular::{Cell, Table};

use handrolled::HandRolled;

pub const REPORT_VERSION: &str = "realpipe-bench/1";
pub const DATASET: &str = "synthetic_housing";
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-9;

pub const SE_NOTE: &str = "similar examples without the engine (raw) are the nearest rows \
in the algorithm-ready space, returned without converting them to the interpretable space";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// Algorithm on pre-encoded data; raw explanation.
    Raw,
    /// Hand-rolled encoding and explanation clean-up.
    HandRolled,
    /// The engine's interpretable explanation.
    Engine,
    /// The engine plus row-keyed record formatting.
    EngineFormat,
}

impl Condition {
    pub const ALL: [Condition; 4] = [
        Condition::Raw,
        Condition::HandRolled,
        Condition::Engine,
        Condition::EngineFormat,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub sizes: Vec<usize>,
    pub kinds: Vec<ExplainerKind>,
    pub repeats: usize,
    pub seed: u64,
    /// Rows explained per similar-examples run.
    pub se_query_rows: usize,
    pub k: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            version: None,
            sizes: vec![10_000, 20_000],
            kinds: ExplainerKind::ALL.to_vec(),
            repeats: 10,
            seed: 0,
            se_query_rows: 100,
            k: 5,
        }
    }
}

impl BenchConfig {
    pub fn from_json(text: &str) -> Result<BenchConfig> {
        let cfg: BenchConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid bench config: {e}")))?;
        if let Some(v) = &cfg.version {
            if v != REPORT_VERSION {
                return Err(Error::Config(format!("unsupported bench config version {v:?}")));
            }
        }
        if cfg.repeats == 0 || cfg.sizes.is_empty() || cfg.kinds.is_empty() || cfg.k == 0 {
            return Err(Error::Config("bench needs repeats, k, sizes and kinds to be non-empty".into()));
        }
        if let Some(&s) = cfg.sizes.iter().find(|&&s| s < 2) {
            return Err(Error::Config(format!("bench size {s} is too small")));
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub condition: Condition,
    pub kind: ExplainerKind,
    pub dataset: String,
    pub rows: usize,
    pub runs: usize,
    pub mean_seconds: f64,
    /// Sample standard deviation over the runs.
    pub std_seconds: f64,
    pub run_seconds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PercentChange {
    pub kind: ExplainerKind,
    pub rows: usize,
    pub from: Condition,
    pub to: Condition,
    pub percent: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceCheck {
    pub kind: ExplainerKind,
    pub rows: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub os: String,
    pub arch: String,
    pub logical_cpus: usize,
    pub build: String,
    pub version: String,
}

impl Environment {
    pub fn current() -> Environment {
        Environment {
            os: std::env::consts::OS.to_string(),
            arch: std::env::consts::ARCH.to_string(),
            logical_cpus: std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
            build: if cfg!(debug_assertions) { "debug" } else { "release" }.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub version: String,
    pub config: BenchConfig,
    pub environment: Environment,
    pub notes: Vec<String>,
    pub timings: Vec<Timing>,
    pub percent_changes: Vec<PercentChange>,
    pub equivalence: Vec<EquivalenceCheck>,
}

impl BenchReport {
    pub fn timing(&self, condition: Condition, kind: ExplainerKind, rows: usize) -> Option<&Timing> {
        self.timings
            .iter()
            .find(|t| t.condition == condition && t.kind == kind && t.rows == rows)
    }

    pub fn percent_change(&self, kind: ExplainerKind, rows: usize, from: Condition, to: Condition) -> Option<f64> {
        self.percent_changes
            .iter()
            .find(|p| p.kind == kind && p.rows == rows && p.from == from && p.to == to)
            .map(|p| p.percent)
    }
}

pub fn percent_change(a: f64, b: f64) -> f64 {
    (b - a) / a * 100.0
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Differences between two explanations; empty when they agree.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diff {
    pub lines: Vec<String>,
}

impl Diff {
    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    fn push(&mut self, line: String) {
        self.lines.push(line);
    }
}

impl std::fmt::Display for Diff {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        Ok(())
    }
}

fn cells_equal(a: &Cell, b: &Cell, tol: f64) -> bool {
    match (a, b) {
        (Cell::Numeric(x), Cell::Numeric(y)) => (x - y).abs() <= tol,
        _ => a == b,
    }
}

fn feature_sets(diff: &mut Diff, a: &[String], b: &[String]) -> bool {
    let only_a: Vec<&String> = a.iter().filter(|f| !b.contains(f)).collect();
    let only_b: Vec<&String> = b.iter().filter(|f| !a.contains(f)).collect();
    if only_a.is_empty() && only_b.is_empty() && a.len() == b.len() {
        return true;
    }
    diff.push(format!("feature sets differ: only in first {only_a:?}, only in second {only_b:?}"));
    false
}

/// Compares two explanations of the same kind: feature sets, scores within
/// `tol`, and cell values (numbers within `tol`).
pub fn assert_equivalence(a: &Explanation, b: &Explanation, tol: f64) -> std::result::Result<(), Diff> {
    let mut diff = Diff::default();
    match (a, b) {
        (Explanation::Contributions(x), Explanation::Contributions(y)) => {
            if x.row_ids != y.row_ids {
                diff.push("row ids differ".into());
            }
            if (x.base_value - y.base_value).abs() > tol {
                diff.push(format!("base value {} vs {}", x.base_value, y.base_value));
            }
            if feature_sets(&mut diff, &x.features, &y.features) && diff.is_empty() {
                for (i, f) in x.features.iter().enumerate() {
                    let j = y.features.iter().position(|g| g == f).expect("same sets");
                    let worst = x.contributions[i]
                        .iter()
                        .zip(&y.contributions[j])
                        .map(|(p, q)| (p - q).abs())
                        .fold(0.0, f64::max);
                    if !(worst <= tol) {
                        diff.push(format!("feature {f:?}: contributions differ by up to {worst:e}"));
                    }
                    let bad = x.values[i]
                        .iter()
                        .zip(&y.values[j])
                        .position(|(p, q)| !cells_equal(p, q, tol));
                    if let Some(r) = bad {
                        diff.push(format!(
                            "feature {f:?}: value in row {:?} is {} vs {}",
                            x.row_ids[r], x.values[i][r], y.values[j][r]
                        ));
                    }
                }
            }
        }
        (Explanation::Importance(x), Explanation::Importance(y)) => {
            if feature_sets(&mut diff, &x.features, &y.features) {
                for (i, f) in x.features.iter().enumerate() {
                    let j = y.features.iter().position(|g| g == f).expect("same sets");
                    let d = (x.importances[i] - y.importances[j]).abs();
                    if !(d <= tol) {
                        diff.push(format!("feature {f:?}: importance {} vs {}", x.importances[i], y.importances[j]));
                    }
                }
            }
        }
        (Explanation::SimilarExamples(x), Explanation::SimilarExamples(y)) => {
            let fx: Vec<String> = x.pool.iter().map(|c| c.name().to_string()).collect();
            let fy: Vec<String> = y.pool.iter().map(|c| c.name().to_string()).collect();
            if x.query_ids != y.query_ids {
                diff.push("query ids differ".into());
            } else if feature_sets(&mut diff, &fx, &fy) {
                for (q, (lx, ly)) in x.query_ids.iter().zip(x.neighbors.iter().zip(&y.neighbors)) {
                    if lx.len() != ly.len() {
                        diff.push(format!("row {q:?}: {} vs {} examples", lx.len(), ly.len()));
                        continue;
                    }
                    for (rank, (nx, ny)) in lx.iter().zip(ly).enumerate() {
                        let (idx, idy) = (x.pool_row_id(nx.pool_row), y.pool_row_id(ny.pool_row));
                        if idx != idy {
                            diff.push(format!("row {q:?} example {rank}: {idx:?} vs {idy:?}"));
                            continue;
                        }
                        if !((nx.distance - ny.distance).abs() <= tol) || !cells_equal(&nx.target, &ny.target, tol) {
                            diff.push(format!("row {q:?} example {rank}: distance or target differs"));
                        }
                        for (i, f) in fx.iter().enumerate() {
                            let j = fy.iter().position(|g| g == f).expect("same sets");
                            let (p, v) = (&x.pool[i].cells()[nx.pool_row], &y.pool[j].cells()[ny.pool_row]);
                            if !cells_equal(p, v, tol) {
                                diff.push(format!("row {q:?} example {rank} feature {f:?}: {p} vs {v}"));
                            }
                        }
                    }
                }
            }
        }
        (a, b) => diff.push(format!("kinds differ: {:?} vs {:?}", a.kind(), b.kind())),
    }
    if diff.is_empty() {
        Ok(())
    } else {
        Err(diff)
    }
}

/// Everything a timed run needs, built outside the timer.
pub struct Fixture {
    pub app: RealApp,
    pub hand: HandRolled,
    /// Rows to explain, original space.
    pub x: Table,
    /// The same rows, algorithm-ready.
    pub x_algorithm: Table,
    pub k: usize,
}

impl Fixture {
    /// Housing fixture with `n` training rows. `queries` rows are explained.
    pub fn housing(n: usize, seed: u64, queries: usize, k: usize) -> Result<Fixture> {
        let data = synthetic::housing(n, seed);
        let project = synthetic::housing_project(seed)?;
        let dir = tempdir_for(&data)?;
        let app = project.build_app(dir.path())?;
        let (train, targets) = crate::config::split_target(&data, synthetic::TARGET)?;
        let descriptions = app.descriptions().clone();
        let hand = HandRolled::fit(
            &train,
            &targets,
            synthetic::OCEAN_PROXIMITY,
            ["latitude", "longitude"],
            "neighborhood",
            &synthetic::neighborhood_lookup(),
            synthetic::DEFAULT_LABEL,
            descriptions,
        )?;
        let positions: Vec<usize> = (0..queries.min(n)).collect();
        let x = train.take_rows(&positions);
        let x_algorithm = app.pipeline().to_algorithm_space(&x)?;
        for kind in ExplainerKind::ALL {
            app.explainer(kind)?;
        }
        Ok(Fixture {
            app,
            hand,
            x,
            x_algorithm,
            k,
        })
    }

    fn context(&self) -> ProduceContext<'_> {
        ProduceContext {
            descriptions: self.app.descriptions(),
            targets: self.app.targets(),
            k: self.k,
        }
    }
}

/// A scratch directory holding `data` as `housing.csv`.
fn tempdir_for(data: &Table) -> Result<ScratchDir> {
    let dir = ScratchDir::new()?;
    std::fs::write(dir.path().join("housing.csv"), data.to_csv(true))?;
    Ok(dir)
}

struct ScratchDir(std::path::PathBuf);

impl ScratchDir {
    fn new() -> Result<ScratchDir> {
        use std::sync::atomic::{AtomicUsize, Ordering};
        static NEXT: AtomicUsize = AtomicUsize::new(0);
        let path = std::env::temp_dir().join(format!(
            "realpipe-bench-{}-{}",
            std::process::id(),
            NEXT.fetch_add(1, Ordering::SeqCst)
        ));
        std::fs::create_dir_all(&path)?;
        Ok(ScratchDir(path))
    }

    fn path(&self) -> &std::path::Path {
        &self.0
    }
}

impl Drop for ScratchDir {
    fn drop(&mut self) {
        let _ = std::fs::remove_dir_all(&self.0);
    }
}

/// Output of one condition run.
#[derive(Debug)]
pub enum ConditionOutput {
    Explanation(Explanation),
    Contributions(crate::realapp::ContributionsOutput),
    Importance(crate::realapp::ImportanceOutput),
    Examples(crate::realapp::ExamplesOutput),
}

impl ConditionOutput {
    pub fn explanation(&self) -> Option<&Explanation> {
        match self {
            ConditionOutput::Explanation(e) => Some(e),
            _ => None,
        }
    }
}

/// Runs one condition once and times only the explanation work.
pub fn run_condition(c: Condition, kind: ExplainerKind, fx: &Fixture) -> Result<(ConditionOutput, Duration)> {
    let app = &fx.app;
    let f = app.explainer(kind)?;
    let start = Instant::now();
    let out = match (c, kind) {
        (Condition::Raw, ExplainerKind::FeatureContributions) => {
            let p = Predictor::new(app.model(), app.pipeline());
            ConditionOutput::Explanation(contributions(&f, p, &fx.x_algorithm)?)
        }
        (Condition::Raw, ExplainerKind::FeatureImportance) => {
            let p = Predictor::new(app.model(), app.pipeline());
            let metric = f.options.metric.unwrap_or_else(|| Metric::for_task(app.model().task()));
            ConditionOutput::Explanation(Explanation::Importance(permutation_importance(
                &f,
                p,
                &f.train,
                app.targets(),
                metric,
                f.options.repeats,
                f.seed,
            )?))
        }
        (Condition::Raw, ExplainerKind::SimilarExamples) => {
            let targets: Vec<Cell> = app.targets().iter().map(|&t| Cell::Numeric(t)).collect();
            ConditionOutput::Explanation(Explanation::SimilarExamples(similar_examples(
                &f,
                &fx.x_algorithm,
                fx.k,
                &targets,
            )?))
        }
        (Condition::HandRolled, ExplainerKind::FeatureContributions) => {
            ConditionOutput::Explanation(fx.hand.feature_contributions(&f, app.model(), &fx.x)?)
        }
        (Condition::HandRolled, ExplainerKind::FeatureImportance) => {
            ConditionOutput::Explanation(fx.hand.feature_importance(&f, app.model())?)
        }
        (Condition::HandRolled, ExplainerKind::SimilarExamples) => {
            ConditionOutput::Explanation(fx.hand.similar_examples(&f, &fx.x, fx.k)?)
        }
        (Condition::Engine, _) => {
            let (e, _) = produce_interpretable(&f, app.pipeline(), app.model(), &fx.x, fx.context())?;
            ConditionOutput::Explanation(e)
        }
        (Condition::EngineFormat, ExplainerKind::FeatureContributions) => {
            ConditionOutput::Contributions(app.produce_feature_contributions(&fx.x)?)
        }
        (Condition::EngineFormat, ExplainerKind::FeatureImportance) => {
            ConditionOutput::Importance(app.produce_feature_importance()?)
        }
        (Condition::EngineFormat, ExplainerKind::SimilarExamples) => {
            ConditionOutput::Examples(app.produce_similar_examples(&fx.x, fx.k)?)
        }
    };
    let elapsed = start.elapsed();
    Ok((black_box(out), elapsed))
}

/// Checks the engine against the hand-rolled path for one kind.
pub fn check_equivalence(kind: ExplainerKind, fx: &Fixture) -> Result<()> {
    let (engine, _) = run_condition(Condition::Engine, kind, fx)?;
    let (hand, _) = run_condition(Condition::HandRolled, kind, fx)?;
    let (engine, hand) = (engine.explanation().expect("explanation"), hand.explanation().expect("explanation"));
    assert_equivalence(engine, hand, EQUIVALENCE_TOLERANCE).map_err(|diff| {
        Error::Equivalence(format!(
            "{} on {} rows: engine and hand-rolled outputs differ\n{diff}",
            kind,
            fx.app.train().n_rows()
        ))
    })
}

pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchReport> {
    let mut timings = Vec::new();
    let mut percent_changes = Vec::new();
    let mut equivalence = Vec::new();
    for &rows in &cfg.sizes {
        let queries = |kind| match kind {
            ExplainerKind::SimilarExamples => cfg.se_query_rows,
            _ => rows,
        };
        for &kind in &cfg.kinds {
            let fx = Fixture::housing(rows, cfg.seed, queries(kind), cfg.k)?;
            check_equivalence(kind, &fx)?;
            equivalence.push(EquivalenceCheck { kind, rows, passed: true });
            // One untimed warm-up per condition, then the timed runs in
            // round-robin order so drift on the machine hits every condition.
            for c in Condition::ALL {
                run_condition(c, kind, &fx)?;
            }
            let mut runs: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.repeats); Condition::ALL.len()];
            for _ in 0..cfg.repeats {
                for (i, &c) in Condition::ALL.iter().enumerate() {
                    let (_, d) = run_condition(c, kind, &fx)?;
                    runs[i].push(d.as_secs_f64());
                }
            }
            let mut means = std::collections::HashMap::new();
            for (c, runs) in Condition::ALL.into_iter().zip(runs) {
                let (mean, std) = mean_std(&runs);
                means.insert(c, mean);
                log::info!("{kind} {rows} rows {c:?}: mean {mean:.6}s sd {std:.6}s");
                timings.push(Timing {
                    condition: c,
                    kind,
                    dataset: DATASET.to_string(),
                    rows,
                    runs: cfg.repeats,
                    mean_seconds: mean,
                    std_seconds: std,
                    run_seconds: runs,
                });
            }
            for (from, to) in [
                (Condition::Raw, Condition::Engine),
                (Condition::HandRolled, Condition::Engine),
                (Condition::Engine, Condition::EngineFormat),
            ] {
                percent_changes.push(PercentChange {
                    kind,
                    rows,
                    from,
                    to,
                    percent: percent_change(means[&from], means[&to]),
                });
            }
        }
    }
    Ok(BenchReport {
        version: REPORT_VERSION.to_string(),
        config: cfg.clone(),
        environment: Environment::current(),
        notes: vec![SE_NOTE.to_string()],
        timings,
        percent_changes,
        equivalence,
    })
}

#[cfg(test)]
mod tests;
