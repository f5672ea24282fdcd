//! The application object: models, fitted pipeline, training data and
//! descriptions behind one set of produce calls.

use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use indexmap::IndexMap;

use crate::error::{Error, Result};
use crate::explainer::{
    fit_explainer, fit_with_background, produce_interpretable, ExplainerKind, ExplainerOptions,
    FittedExplainer, ProduceContext, DEFAULT_K,
};
use crate::explanation::{Descriptions, Explanation, FeatureSpace};
use crate::model::Model;
use crate::tabular::{Cell, Table};
use crate::transform::{Audit, AuditEvent, Transformer, TransformPipeline, ValidationReport};

#[derive(Debug, Clone, PartialEq)]
pub struct ContributionRecord {
    pub feature: String,
    pub value: Cell,
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContributionsOutput {
    pub space: FeatureSpace,
    pub base_value: f64,
    /// Records per input row id, in input order.
    pub rows: IndexMap<String, Vec<ContributionRecord>>,
    pub audit: Vec<AuditEvent>,
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceRecord {
    pub feature: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportanceOutput {
    pub space: FeatureSpace,
    pub entries: Vec<ImportanceRecord>,
    pub audit: Vec<AuditEvent>,
    pub stopped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleRecord {
    /// Training row id of the example.
    pub id: String,
    pub example: IndexMap<String, Cell>,
    pub target: Cell,
    pub distance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExamplesOutput {
    pub space: FeatureSpace,
    pub rows: IndexMap<String, Vec<ExampleRecord>>,
    pub audit: Vec<AuditEvent>,
    pub stopped: bool,
}

pub struct RealApp {
    models: IndexMap<String, Model>,
    active: String,
    pipeline: TransformPipeline,
    train: Table,
    targets: Vec<f64>,
    descriptions: Descriptions,
    id_column: Option<String>,
    seed: u64,
    options: ExplainerOptions,
    report: ValidationReport,
    /// Background rows to reuse per kind, keyed by training row id.
    preset_backgrounds: HashMap<ExplainerKind, Vec<usize>>,
    cache: Mutex<HashMap<ExplainerKind, Arc<FittedExplainer>>>,
    fits: AtomicUsize,
}

impl std::fmt::Debug for RealApp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RealApp")
            .field("models", &self.models.keys().collect::<Vec<_>>())
            .field("active", &self.active)
            .field("rows", &self.train.n_rows())
            .field("seed", &self.seed)
            .finish_non_exhaustive()
    }
}

/// Everything a [`RealApp`] is made of, with the pipeline already fitted.
pub struct AppParts {
    pub models: IndexMap<String, Model>,
    pub active: String,
    pub pipeline: TransformPipeline,
    pub train: Table,
    pub targets: Vec<f64>,
    pub descriptions: Descriptions,
    pub id_column: Option<String>,
    pub seed: u64,
    pub options: ExplainerOptions,
    /// Stored background row ids per kind, when reloading.
    pub backgrounds: HashMap<ExplainerKind, Vec<String>>,
}

impl RealApp {
    /// Fits the transformers on `train`, then validates the pipeline.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        models: IndexMap<String, Model>,
        active: impl Into<String>,
        transformers: Vec<Transformer>,
        train: Table,
        targets: Vec<f64>,
        descriptions: Descriptions,
        id_column: Option<String>,
        seed: u64,
    ) -> Result<RealApp> {
        let mut pipeline = TransformPipeline::new(transformers);
        pipeline.fit(&train)?;
        RealApp::from_parts(AppParts {
            models,
            active: active.into(),
            pipeline,
            train,
            targets,
            descriptions,
            id_column,
            seed,
            options: ExplainerOptions::default(),
            backgrounds: HashMap::new(),
        })
    }

    pub fn from_parts(parts: AppParts) -> Result<RealApp> {
        let AppParts {
            models,
            active,
            pipeline,
            train,
            targets,
            descriptions,
            id_column,
            seed,
            options,
            backgrounds,
        } = parts;
        if !models.contains_key(&active) {
            return Err(Error::Config(format!("unknown active model id {active:?}")));
        }
        if !pipeline.is_fitted() {
            return Err(Error::Config("pipeline is not fitted".into()));
        }
        if targets.len() != train.n_rows() {
            return Err(Error::Data(format!(
                "{} targets for {} training rows",
                targets.len(),
                train.n_rows()
            )));
        }
        if train.n_rows() == 0 {
            return Err(Error::Data("training table has no rows".into()));
        }
        let report = pipeline.validate(&train);
        if !report.all_passed() {
            return Err(Error::Validation(report.to_string()));
        }
        let model_row = pipeline.to_model_space(&train.take_rows(&[0]))?;
        for (id, m) in &models {
            m.predict(&model_row).map_err(|e| match e {
                Error::Contract(msg) => Error::Contract(format!("model {id:?}: {msg}")),
                other => other,
            })?;
        }
        let mut preset = HashMap::new();
        for (kind, ids) in backgrounds {
            let indices = ids
                .iter()
                .map(|id| train.row_ids().position(id).ok_or_else(|| Error::Lookup(id.clone())))
                .collect::<Result<Vec<_>>>()?;
            preset.insert(kind, indices);
        }
        Ok(RealApp {
            models,
            active,
            pipeline,
            train,
            targets,
            descriptions,
            id_column,
            seed,
            options,
            report,
            preset_backgrounds: preset,
            cache: Mutex::new(HashMap::new()),
            fits: AtomicUsize::new(0),
        })
    }

    pub fn model(&self) -> &Model {
        &self.models[&self.active]
    }

    pub fn models(&self) -> &IndexMap<String, Model> {
        &self.models
    }

    pub fn active_model_id(&self) -> &str {
        &self.active
    }

    /// Switches the active model. Cached explainers are dropped.
    pub fn set_active_model(&mut self, id: &str) -> Result<()> {
        if !self.models.contains_key(id) {
            return Err(Error::Config(format!("unknown model id {id:?}")));
        }
        self.active = id.to_string();
        self.preset_backgrounds.clear();
        self.cache.get_mut().expect("cache lock poisoned").clear();
        Ok(())
    }

    pub fn pipeline(&self) -> &TransformPipeline {
        &self.pipeline
    }

    pub fn train(&self) -> &Table {
        &self.train
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn descriptions(&self) -> &Descriptions {
        &self.descriptions
    }

    pub fn id_column(&self) -> Option<&str> {
        self.id_column.as_deref()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn options(&self) -> &ExplainerOptions {
        &self.options
    }

    pub fn validation_report(&self) -> &ValidationReport {
        &self.report
    }

    /// Number of explainer fits performed so far.
    pub fn fit_count(&self) -> usize {
        self.fits.load(Ordering::SeqCst)
    }

    /// The fitted explainer for `kind`, fitting it on first use.
    pub fn explainer(&self, kind: ExplainerKind) -> Result<Arc<FittedExplainer>> {
        let mut cache = self.cache.lock().expect("cache lock poisoned");
        if let Some(f) = cache.get(&kind) {
            return Ok(Arc::clone(f));
        }
        let fitted = match self.preset_backgrounds.get(&kind) {
            Some(indices) => fit_with_background(
                kind,
                &self.pipeline,
                self.model(),
                &self.train,
                self.seed,
                &self.options,
                indices.clone(),
            )?,
            None => fit_explainer(kind, &self.pipeline, self.model(), &self.train, self.seed, &self.options)?,
        };
        self.fits.fetch_add(1, Ordering::SeqCst);
        let fitted = Arc::new(fitted);
        cache.insert(kind, Arc::clone(&fitted));
        Ok(fitted)
    }

    /// Input rows reordered to the training column order. The column sets
    /// must match.
    fn align(&self, x: &Table) -> Result<Table> {
        let expected = self.train.column_names();
        let mut got = x.column_names();
        let mut want = expected.clone();
        got.sort_unstable();
        want.sort_unstable();
        if got != want {
            return Err(Error::Schema(format!(
                "input columns [{}] do not match training columns [{}]",
                x.column_names().join(", "),
                expected.join(", ")
            )));
        }
        let columns = expected
            .iter()
            .map(|n| x.column(n).expect("checked").clone())
            .collect();
        x.with_columns(columns)
    }

    fn context(&self, k: usize) -> ProduceContext<'_> {
        ProduceContext {
            descriptions: &self.descriptions,
            targets: &self.targets,
            k,
        }
    }

    /// Runs one explanation kind through the five-step process.
    pub fn explain(&self, kind: ExplainerKind, x: Option<&Table>, k: usize) -> Result<(Explanation, Audit)> {
        let f = self.explainer(kind)?;
        let aligned;
        let x = match x {
            Some(x) => {
                aligned = self.align(x)?;
                &aligned
            }
            None => &self.train,
        };
        produce_interpretable(&f, &self.pipeline, self.model(), x, self.context(k))
    }

    pub fn produce_feature_contributions(&self, x: &Table) -> Result<ContributionsOutput> {
        let (e, audit) = self.explain(ExplainerKind::FeatureContributions, Some(x), DEFAULT_K)?;
        let c = e
            .as_contributions()
            .ok_or_else(|| Error::Contract("explainer returned a non-contribution explanation".into()))?;
        let rows = c
            .row_ids
            .iter()
            .enumerate()
            .map(|(r, id)| {
                let records = c
                    .features
                    .iter()
                    .zip(c.contributions.iter().zip(&c.values))
                    .map(|(f, (s, v))| ContributionRecord {
                        feature: f.clone(),
                        value: v[r].clone(),
                        contribution: s[r],
                    })
                    .collect();
                (id.clone(), records)
            })
            .collect();
        Ok(ContributionsOutput {
            space: c.space,
            base_value: c.base_value,
            rows,
            audit: audit.events,
            stopped: audit.stopped,
        })
    }

    pub fn produce_feature_importance(&self) -> Result<ImportanceOutput> {
        let (e, audit) = self.explain(ExplainerKind::FeatureImportance, None, DEFAULT_K)?;
        let i = e
            .as_importance()
            .ok_or_else(|| Error::Contract("explainer returned a non-importance explanation".into()))?;
        Ok(ImportanceOutput {
            space: i.space,
            entries: i
                .features
                .iter()
                .zip(&i.importances)
                .map(|(f, s)| ImportanceRecord {
                    feature: f.clone(),
                    importance: *s,
                })
                .collect(),
            audit: audit.events,
            stopped: audit.stopped,
        })
    }

    pub fn produce_similar_examples(&self, x: &Table, k: usize) -> Result<ExamplesOutput> {
        let (e, audit) = self.explain(ExplainerKind::SimilarExamples, Some(x), k)?;
        let set = e
            .as_examples()
            .ok_or_else(|| Error::Contract("explainer returned a non-example explanation".into()))?;
        let rows = set
            .query_ids
            .iter()
            .zip(&set.neighbors)
            .map(|(q, list)| {
                let records = list
                    .iter()
                    .map(|n| ExampleRecord {
                        id: set.pool_row_id(n.pool_row),
                        example: set
                            .pool
                            .iter()
                            .map(|c| (c.name().to_string(), c.cells()[n.pool_row].clone()))
                            .collect(),
                        target: n.target.clone(),
                        distance: n.distance,
                    })
                    .collect();
                (q.clone(), records)
            })
            .collect();
        Ok(ExamplesOutput {
            space: set.space,
            rows,
            audit: audit.events,
            stopped: audit.stopped,
        })
    }
}
