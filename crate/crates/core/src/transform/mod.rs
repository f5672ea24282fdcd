//! Transformers and the feature-space routing built on them.
//!
//! A pipeline is an ordered list of transformers, each flagged with the
//! feature spaces it contributes to:
//!
//! * `model`: applied when routing original data to the model-ready space.
//! * `algorithm`: applied when routing original data to the algorithm-ready
//!   space. Defaults to the `model` flag when unset.
//! * `interpret`: applied when routing original data to the interpretable
//!   space.
//!
//! Explanations produced in the algorithm-ready space reach the
//! interpretable space in two steps: inverse explanation transforms of every
//! `algorithm && !interpret` transformer in reverse order, then forward
//! explanation transforms of every `interpret && !algorithm` transformer in
//! list order.

mod binner;
mod combiner;
mod imputer;
mod mapping;
mod one_hot;
mod selector;
mod standardizer;

use std::borrow::Cow;
use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::explanation::{
    Explanation, ExampleSet, FeatureContributions, FeatureImportance, FeatureSpace, Neighbor,
    ScoreMap,
};
use crate::tabular::{Cell, RowIds, Table};

pub use binner::NumericBinner;
pub use combiner::CategoryCombiner;
pub use imputer::Imputer;
pub use mapping::{MappingEncoder, MappingEntry};
pub use one_hot::OneHotEncoder;
pub use selector::FeatureSelector;
pub use standardizer::Standardizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureSpaceFlags {
    pub model: bool,
    #[serde(rename = "algo", default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<bool>,
    pub interpret: bool,
}

impl FeatureSpaceFlags {
    pub fn new(model: bool, algorithm: Option<bool>, interpret: bool) -> Self {
        FeatureSpaceFlags {
            model,
            algorithm,
            interpret,
        }
    }

    /// Resolved algorithm flag: explicit value, else the model flag.
    pub fn algorithm(&self) -> bool {
        self.algorithm.unwrap_or(self.model)
    }
}

/// What to do when a transformer has no transform for an explanation kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnsupportedMode {
    /// Stop transforming and return the explanation as it stands.
    Break,
    /// Record the event and continue with the next transformer.
    Skip,
}

/// Result of asking a transformer to move an explanation.
#[derive(Debug)]
pub enum Outcome {
    Applied {
        explanation: Explanation,
        warnings: Vec<String>,
    },
    /// The explanation is handed back untouched.
    Unsupported {
        explanation: Explanation,
        reason: String,
    },
}

impl Outcome {
    fn applied(explanation: Explanation) -> Self {
        Outcome::Applied {
            explanation,
            warnings: Vec::new(),
        }
    }

    pub fn into_explanation(self) -> Explanation {
        match self {
            Outcome::Applied { explanation, .. } | Outcome::Unsupported { explanation, .. } => {
                explanation
            }
        }
    }

    pub fn is_supported(&self) -> bool {
        matches!(self, Outcome::Applied { .. })
    }
}

/// The three-way transform contract every transformer implements.
pub trait TransformBehavior {
    fn name(&self) -> &'static str;
    fn fit(&mut self, data: &Table) -> Result<()>;
    fn is_fitted(&self) -> bool;
    /// Data from this transformer's input space to its output space.
    fn transform_data(&self, data: &Table) -> Result<Table>;
    /// Explanation from the output space back to the input space.
    /// `context` optionally holds the transformer's input data for the
    /// explained rows, used to fill displayed values.
    fn inverse_explanation(&self, e: Explanation, context: Option<&Table>) -> Result<Outcome>;
    /// Explanation from the input space to the output space.
    fn forward_explanation(&self, e: Explanation, context: Option<&Table>) -> Result<Outcome>;
    fn default_unsupported_mode(&self) -> UnsupportedMode;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params", rename_all = "snake_case")]
pub enum TransformerSpec {
    OneHotEncoder(OneHotEncoder),
    Imputer(Imputer),
    Standardizer(Standardizer),
    FeatureSelector(FeatureSelector),
    NumericBinner(NumericBinner),
    CategoryCombiner(CategoryCombiner),
    MappingEncoder(MappingEncoder),
}

pub const TRANSFORMER_TYPES: [&str; 7] = [
    "one_hot_encoder",
    "imputer",
    "standardizer",
    "feature_selector",
    "numeric_binner",
    "category_combiner",
    "mapping_encoder",
];

impl TransformerSpec {
    pub fn behavior(&self) -> &dyn TransformBehavior {
        match self {
            TransformerSpec::OneHotEncoder(t) => t,
            TransformerSpec::Imputer(t) => t,
            TransformerSpec::Standardizer(t) => t,
            TransformerSpec::FeatureSelector(t) => t,
            TransformerSpec::NumericBinner(t) => t,
            TransformerSpec::CategoryCombiner(t) => t,
            TransformerSpec::MappingEncoder(t) => t,
        }
    }

    fn behavior_mut(&mut self) -> &mut dyn TransformBehavior {
        match self {
            TransformerSpec::OneHotEncoder(t) => t,
            TransformerSpec::Imputer(t) => t,
            TransformerSpec::Standardizer(t) => t,
            TransformerSpec::FeatureSelector(t) => t,
            TransformerSpec::NumericBinner(t) => t,
            TransformerSpec::CategoryCombiner(t) => t,
            TransformerSpec::MappingEncoder(t) => t,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transformer {
    pub spec: TransformerSpec,
    pub flags: FeatureSpaceFlags,
    pub on_unsupported: UnsupportedMode,
}

impl Transformer {
    /// Transformer with the default unsupported mode for its type.
    pub fn new(spec: impl Into<TransformerSpec>, flags: FeatureSpaceFlags) -> Self {
        let spec = spec.into();
        let on_unsupported = spec.behavior().default_unsupported_mode();
        Transformer {
            spec,
            flags,
            on_unsupported,
        }
    }

    pub fn with_mode(mut self, mode: UnsupportedMode) -> Self {
        self.on_unsupported = mode;
        self
    }

    pub fn name(&self) -> &'static str {
        self.spec.behavior().name()
    }

    pub fn is_fitted(&self) -> bool {
        self.spec.behavior().is_fitted()
    }

    pub fn fit(&mut self, data: &Table) -> Result<()> {
        self.spec.behavior_mut().fit(data)
    }

    pub fn transform_data(&self, data: &Table) -> Result<Table> {
        self.spec.behavior().transform_data(data)
    }

    pub fn inverse_explanation(&self, e: Explanation, context: Option<&Table>) -> Result<Outcome> {
        self.spec.behavior().inverse_explanation(e, context)
    }

    pub fn forward_explanation(&self, e: Explanation, context: Option<&Table>) -> Result<Outcome> {
        self.spec.behavior().forward_explanation(e, context)
    }
}

macro_rules! spec_from {
    ($($ty:ident),*) => {
        $(impl From<$ty> for TransformerSpec {
            fn from(t: $ty) -> Self {
                TransformerSpec::$ty(t)
            }
        })*
    };
}
spec_from!(
    OneHotEncoder,
    Imputer,
    Standardizer,
    FeatureSelector,
    NumericBinner,
    CategoryCombiner,
    MappingEncoder
);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExplanationStep {
    /// Step 3: undoing transforms that reduced interpretability.
    Inverse,
    /// Step 4: moving into the interpretable space.
    Forward,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AuditAction {
    Skipped,
    Stopped,
    Warning,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditEvent {
    pub index: usize,
    pub transformer: String,
    pub step: ExplanationStep,
    pub action: AuditAction,
    pub message: String,
}

impl fmt::Display for AuditEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let step = match self.step {
            ExplanationStep::Inverse => "inverse",
            ExplanationStep::Forward => "forward",
        };
        let action = match self.action {
            AuditAction::Skipped => "skipped",
            AuditAction::Stopped => "stopped",
            AuditAction::Warning => "warning",
        };
        write!(f, "{action}: {}#{} ({step}): {}", self.transformer, self.index, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Audit {
    pub events: Vec<AuditEvent>,
    /// True when a Break-mode transformer ended the explanation transforms.
    pub stopped: bool,
}

fn relabel(err: Error, index: usize, name: &str) -> Error {
    let label = format!("{name}#{index}");
    match err {
        Error::MissingColumn { column, .. } => Error::MissingColumn {
            transformer: label,
            column,
        },
        Error::Transform { message, .. } => Error::Transform {
            transformer: label,
            message,
        },
        other => other,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TransformPipeline {
    transformers: Vec<Transformer>,
}

impl TransformPipeline {
    pub fn new(transformers: Vec<Transformer>) -> Self {
        TransformPipeline { transformers }
    }

    pub fn transformers(&self) -> &[Transformer] {
        &self.transformers
    }

    pub fn is_empty(&self) -> bool {
        self.transformers.is_empty()
    }

    pub fn is_fitted(&self) -> bool {
        self.transformers.iter().all(Transformer::is_fitted)
    }

    /// True when some transformer is applied for the model but not for the
    /// algorithm, i.e. the algorithm-ready space differs from model-ready.
    pub fn has_model_only_transforms(&self) -> bool {
        self.transformers
            .iter()
            .any(|t| t.flags.model && !t.flags.algorithm())
    }

    /// Fits each transformer on the training data as it appears in that
    /// transformer's input space.
    pub fn fit(&mut self, train: &Table) -> Result<()> {
        self.fit_indexed(train).map_err(|(_, e)| e)
    }

    /// Fits, then validates. A fit failure is reported against each route
    /// that contains the failing transformer; the other routes are marked
    /// as not checked.
    pub fn fit_and_validate(&mut self, train: &Table) -> ValidationReport {
        let (i, err) = match self.fit_indexed(train) {
            Ok(()) => return self.validate(train),
            Err(failure) => failure,
        };
        let flags = self.transformers[i].flags;
        let label = format!("{}#{i}", self.transformers[i].name());
        let routes = [
            (Route::Model, flags.model),
            (Route::Algorithm, flags.algorithm()),
            (Route::AlgorithmToModel, flags.model && !flags.algorithm()),
            (Route::Interpretable, flags.interpret),
        ]
        .into_iter()
        .map(|(route, touched)| {
            if touched {
                RouteCheck::failed(route, format!("fit failed: {err}"))
            } else {
                RouteCheck::failed(route, format!("not checked: fit failed at {label}"))
            }
        })
        .collect();
        ValidationReport { routes }
    }

    fn fit_indexed(&mut self, train: &Table) -> std::result::Result<(), (usize, Error)> {
        let mut algorithm = Cow::Borrowed(train);
        let mut model = Cow::Borrowed(train);
        let mut interpret = Cow::Borrowed(train);
        for (i, t) in self.transformers.iter_mut().enumerate() {
            let name = t.name();
            let flags = t.flags;
            let input: &Table = if flags.algorithm() {
                &algorithm
            } else if flags.model {
                &model
            } else {
                &interpret
            };
            t.fit(input).map_err(|e| (i, relabel(e, i, name)))?;
            let step = |data: &Table| t.transform_data(data).map_err(|e| (i, relabel(e, i, name)));
            if flags.algorithm() {
                algorithm = Cow::Owned(step(&algorithm)?);
            }
            if flags.model {
                model = Cow::Owned(step(&model)?);
            }
            if flags.interpret {
                interpret = Cow::Owned(step(&interpret)?);
            }
        }
        Ok(())
    }

    fn ensure_fitted(&self) -> Result<()> {
        match self.transformers.iter().enumerate().find(|(_, t)| !t.is_fitted()) {
            Some((i, t)) => Err(Error::transform(
                format!("{}#{i}", t.name()),
                "transformer used before fit",
            )),
            None => Ok(()),
        }
    }

    fn route<'a>(&self, data: &'a Table, include: impl Fn(&FeatureSpaceFlags) -> bool) -> Result<Cow<'a, Table>> {
        self.ensure_fitted()?;
        let mut current = Cow::Borrowed(data);
        for (i, t) in self.transformers.iter().enumerate() {
            if include(&t.flags) {
                let next = t.transform_data(&current).map_err(|e| relabel(e, i, t.name()))?;
                current = Cow::Owned(next);
            }
        }
        Ok(current)
    }

    pub(crate) fn model_route<'a>(&self, data: &'a Table) -> Result<Cow<'a, Table>> {
        self.route(data, |f| f.model)
    }

    pub(crate) fn algorithm_route<'a>(&self, data: &'a Table) -> Result<Cow<'a, Table>> {
        self.route(data, FeatureSpaceFlags::algorithm)
    }

    pub(crate) fn algorithm_to_model_route<'a>(&self, data: &'a Table) -> Result<Cow<'a, Table>> {
        self.route(data, |f| f.model && !f.algorithm())
    }

    pub(crate) fn interpretable_route<'a>(&self, data: &'a Table) -> Result<Cow<'a, Table>> {
        self.route(data, |f| f.interpret)
    }

    /// Both the algorithm and interpretable routes of `data`, running the
    /// leading transformers the two share only once. The interpretable
    /// result is kept separate so callers that never need it can ignore
    /// its error.
    pub(crate) fn algorithm_and_interpretable_routes<'a>(
        &self,
        data: &'a Table,
    ) -> Result<(Cow<'a, Table>, Result<Cow<'a, Table>>)> {
        self.ensure_fitted()?;
        let shared = self
            .transformers
            .iter()
            .take_while(|t| t.flags.algorithm() && t.flags.interpret)
            .count();
        let mut prefix = Cow::Borrowed(data);
        for (i, t) in self.transformers[..shared].iter().enumerate() {
            prefix = Cow::Owned(t.transform_data(&prefix).map_err(|e| relabel(e, i, t.name()))?);
        }
        let rest = |include: fn(&FeatureSpaceFlags) -> bool| -> Result<Option<Table>> {
            let mut current: Option<Table> = None;
            for (i, t) in self.transformers.iter().enumerate().skip(shared) {
                if include(&t.flags) {
                    let input = current.as_ref().unwrap_or(&prefix);
                    current = Some(t.transform_data(input).map_err(|e| relabel(e, i, t.name()))?);
                }
            }
            Ok(current)
        };
        let algorithm = rest(FeatureSpaceFlags::algorithm)?;
        let interpretable = rest(|f| f.interpret);
        // Only clone the shared prefix when both routes end on it.
        let (algorithm, interpretable) = match (algorithm, interpretable) {
            (Some(a), Ok(Some(b))) => (Cow::Owned(a), Ok(Cow::Owned(b))),
            (Some(a), Ok(None)) => (Cow::Owned(a), Ok(prefix)),
            (None, Ok(Some(b))) => (prefix, Ok(Cow::Owned(b))),
            (None, Ok(None)) => (prefix.clone(), Ok(prefix)),
            (Some(a), Err(e)) => (Cow::Owned(a), Err(e)),
            (None, Err(e)) => (prefix, Err(e)),
        };
        Ok((algorithm, interpretable))
    }

    pub fn to_model_space(&self, data: &Table) -> Result<Table> {
        self.model_route(data).map(Cow::into_owned)
    }

    pub fn to_algorithm_space(&self, data: &Table) -> Result<Table> {
        self.algorithm_route(data).map(Cow::into_owned)
    }

    pub fn algorithm_to_model_space(&self, data: &Table) -> Result<Table> {
        self.algorithm_to_model_route(data).map(Cow::into_owned)
    }

    pub fn to_interpretable_space(&self, data: &Table) -> Result<Table> {
        self.interpretable_route(data).map(Cow::into_owned)
    }

    /// Moves an algorithm-space explanation to the interpretable space.
    pub fn explanation_to_interpretable(&self, e: Explanation) -> Result<(Explanation, Audit)> {
        self.ensure_fitted()?;
        let mut audit = Audit::default();
        let mut e = e;

        let undo = self
            .transformers
            .iter()
            .enumerate()
            .rev()
            .filter(|(_, t)| t.flags.algorithm() && !t.flags.interpret);
        for (i, t) in undo {
            let outcome = t.inverse_explanation(e, None).map_err(|err| relabel(err, i, t.name()))?;
            match self.record(outcome, i, t, ExplanationStep::Inverse, &mut audit) {
                Ok(next) => {
                    e = next;
                    e.set_space(FeatureSpace::Partial { step: 3, after: i });
                }
                Err(stopped) => return Ok((stopped, audit)),
            }
        }
        e.set_space(FeatureSpace::Original);

        let forward = self
            .transformers
            .iter()
            .enumerate()
            .filter(|(_, t)| t.flags.interpret && !t.flags.algorithm());
        for (i, t) in forward {
            let outcome = t.forward_explanation(e, None).map_err(|err| relabel(err, i, t.name()))?;
            match self.record(outcome, i, t, ExplanationStep::Forward, &mut audit) {
                Ok(next) => {
                    e = next;
                    e.set_space(FeatureSpace::Partial { step: 4, after: i });
                }
                Err(stopped) => return Ok((stopped, audit)),
            }
        }
        e.set_space(FeatureSpace::Interpretable);
        Ok((e, audit))
    }

    /// `Err` carries the explanation when a Break-mode transformer stops the process.
    fn record(
        &self,
        outcome: Outcome,
        index: usize,
        t: &Transformer,
        step: ExplanationStep,
        audit: &mut Audit,
    ) -> std::result::Result<Explanation, Explanation> {
        let event = |action, message| AuditEvent {
            index,
            transformer: t.name().to_string(),
            step,
            action,
            message,
        };
        match outcome {
            Outcome::Applied { explanation, warnings } => {
                audit
                    .events
                    .extend(warnings.into_iter().map(|w| event(AuditAction::Warning, w)));
                Ok(explanation)
            }
            Outcome::Unsupported { explanation, reason } => match t.on_unsupported {
                UnsupportedMode::Skip => {
                    audit.events.push(event(AuditAction::Skipped, reason));
                    Ok(explanation)
                }
                UnsupportedMode::Break => {
                    audit.events.push(event(AuditAction::Stopped, reason));
                    audit.stopped = true;
                    Err(explanation)
                }
            },
        }
    }

    /// Dry-runs every route on the first training row.
    pub fn validate(&self, train: &Table) -> ValidationReport {
        validate_pipeline(self, train)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Model,
    Algorithm,
    AlgorithmToModel,
    Interpretable,
    AdditiveExplanation,
    ExampleExplanation,
}

impl fmt::Display for Route {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Route::Model => "original -> model",
            Route::Algorithm => "original -> algorithm",
            Route::AlgorithmToModel => "algorithm -> model",
            Route::Interpretable => "original -> interpretable",
            Route::AdditiveExplanation => "additive explanation -> interpretable",
            Route::ExampleExplanation => "example explanation -> interpretable",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RouteCheck {
    pub route: Route,
    pub ok: bool,
    pub columns: Vec<String>,
    pub error: Option<String>,
    pub events: Vec<AuditEvent>,
    pub stopped: bool,
    pub notes: Vec<String>,
}

impl RouteCheck {
    fn failed(route: Route, error: impl Into<String>) -> Self {
        RouteCheck {
            route,
            ok: false,
            columns: Vec::new(),
            error: Some(error.into()),
            events: Vec::new(),
            stopped: false,
            notes: Vec::new(),
        }
    }

    fn passed(route: Route, columns: Vec<String>) -> Self {
        RouteCheck {
            route,
            ok: true,
            columns,
            error: None,
            events: Vec::new(),
            stopped: false,
            notes: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub routes: Vec<RouteCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.routes.iter().all(|r| r.ok)
    }

    pub fn route(&self, route: Route) -> Option<&RouteCheck> {
        self.routes.iter().find(|r| r.route == route)
    }

    pub fn failures(&self) -> Vec<String> {
        self.routes
            .iter()
            .filter(|r| !r.ok)
            .map(|r| format!("{}: {}", r.route, r.error.as_deref().unwrap_or("failed")))
            .collect()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.routes {
            let status = match (r.ok, r.stopped) {
                (false, _) => "FAIL",
                (true, true) => "STOP",
                (true, false) => "ok",
            };
            write!(f, "[{status:>4}] {}", r.route)?;
            if let Some(err) = &r.error {
                write!(f, ": {err}")?;
            } else {
                write!(f, ": [{}]", r.columns.join(", "))?;
            }
            writeln!(f)?;
            for e in &r.events {
                writeln!(f, "         {e}")?;
            }
            for n in &r.notes {
                writeln!(f, "         note: {n}")?;
            }
        }
        Ok(())
    }
}

fn names(t: &Table) -> Vec<String> {
    t.column_names().into_iter().map(String::from).collect()
}

/// Synthetic zero-valued explanations over one algorithm-space row.
fn zero_explanations(row: &Table) -> (Explanation, Explanation) {
    let ids = row.row_ids().to_vec();
    let contributions = Explanation::Contributions(FeatureContributions {
        row_ids: ids.clone(),
        features: names(row),
        contributions: row.columns().iter().map(|_| vec![0.0; row.n_rows()]).collect(),
        values: row.columns().iter().map(|c| c.cells().to_vec()).collect(),
        base_value: 0.0,
        space: FeatureSpace::Algorithm,
        predictions: None,
    });
    let examples = Explanation::SimilarExamples(ExampleSet {
        query_ids: ids,
        neighbors: (0..row.n_rows())
            .map(|r| {
                vec![Neighbor {
                    pool_row: r,
                    target: Cell::Missing,
                    distance: 0.0,
                }]
            })
            .collect(),
        pool: row.columns().to_vec(),
        pool_ids: row.row_ids().clone(),
        space: FeatureSpace::Algorithm,
    });
    (contributions, examples)
}

pub fn validate_pipeline(p: &TransformPipeline, train: &Table) -> ValidationReport {
    let mut routes = Vec::new();
    if train.n_rows() == 0 {
        for route in [Route::Model, Route::Algorithm, Route::AlgorithmToModel, Route::Interpretable] {
            routes.push(RouteCheck::failed(route, "training table has no rows"));
        }
        return ValidationReport { routes };
    }
    let row = train.take_rows(&[0]);

    let model = p.to_model_space(&row);
    routes.push(match &model {
        Ok(t) => RouteCheck::passed(Route::Model, names(t)),
        Err(e) => RouteCheck::failed(Route::Model, e.to_string()),
    });
    let algorithm = p.to_algorithm_space(&row);
    routes.push(match &algorithm {
        Ok(t) => RouteCheck::passed(Route::Algorithm, names(t)),
        Err(e) => RouteCheck::failed(Route::Algorithm, e.to_string()),
    });
    routes.push(match &algorithm {
        Err(_) => RouteCheck::failed(Route::AlgorithmToModel, "algorithm route failed"),
        Ok(a) => match p.algorithm_to_model_space(a) {
            Err(e) => RouteCheck::failed(Route::AlgorithmToModel, e.to_string()),
            Ok(composed) => match &model {
                Ok(m) if *m != composed => RouteCheck::failed(
                    Route::AlgorithmToModel,
                    format!(
                        "composition differs from the model route: [{}] vs [{}]",
                        names(&composed).join(", "),
                        names(m).join(", ")
                    ),
                ),
                _ => RouteCheck::passed(Route::AlgorithmToModel, names(&composed)),
            },
        },
    });
    let interpretable = p.to_interpretable_space(&row);
    routes.push(match &interpretable {
        Ok(t) => RouteCheck::passed(Route::Interpretable, names(t)),
        Err(e) => RouteCheck::failed(Route::Interpretable, e.to_string()),
    });

    let (additive, example) = match &algorithm {
        Ok(a) => zero_explanations(a),
        Err(_) => {
            routes.push(RouteCheck::failed(Route::AdditiveExplanation, "algorithm route failed"));
            routes.push(RouteCheck::failed(Route::ExampleExplanation, "algorithm route failed"));
            return ValidationReport { routes };
        }
    };
    let interp_cols: Option<HashSet<String>> =
        interpretable.as_ref().ok().map(|t| names(t).into_iter().collect());
    for (route, e) in [(Route::AdditiveExplanation, additive), (Route::ExampleExplanation, example)] {
        routes.push(match p.explanation_to_interpretable(e) {
            Err(err) => RouteCheck::failed(route, err.to_string()),
            Ok((out, audit)) => {
                let (out, mut check) = match &out {
                    Explanation::SimilarExamples(x) => match x.pool_table() {
                        Ok(_) => (&out, RouteCheck::passed(route, out.features().iter().map(|s| s.to_string()).collect())),
                        Err(err) => (&out, RouteCheck::failed(route, err.to_string())),
                    },
                    _ => (&out, RouteCheck::passed(route, out.features().iter().map(|s| s.to_string()).collect())),
                };
                if let Err(violations) = out.validate() {
                    check.ok = false;
                    check.error = Some(violations.join("; "));
                }
                check.events = audit.events;
                check.stopped = audit.stopped;
                if let (false, Some(cols)) = (audit.stopped, &interp_cols) {
                    let got: HashSet<String> = out.features().iter().map(|s| s.to_string()).collect();
                    if &got != cols {
                        let mut missing: Vec<_> = cols.difference(&got).cloned().collect();
                        let mut extra: Vec<_> = got.difference(cols).cloned().collect();
                        missing.sort();
                        extra.sort();
                        check.notes.push(format!(
                            "explanation features differ from interpretable columns (absent: [{}], extra: [{}])",
                            missing.join(", "),
                            extra.join(", ")
                        ));
                    }
                }
                check
            }
        });
    }
    ValidationReport { routes }
}

// Shared helpers for the transformer implementations.

pub(crate) fn require_column<'t>(
    data: &'t Table,
    transformer: &str,
    column: &str,
) -> Result<&'t crate::tabular::Column> {
    data.column(column)
        .ok_or_else(|| Error::missing_column(transformer, column))
}

pub(crate) fn not_fitted(transformer: &str) -> Error {
    Error::transform(transformer, "transformer used before fit")
}

/// Applies a score map built from the explanation's feature list to either
/// additive kind. Example-based explanations must be routed elsewhere.
pub(crate) fn map_additive(
    e: Explanation,
    context: Option<&Table>,
    build: impl FnOnce(&[String]) -> Result<ScoreMap>,
) -> Result<Explanation> {
    Ok(match e {
        Explanation::Contributions(c) => {
            let map = build(&c.features)?;
            Explanation::Contributions(c.remap(&map, context))
        }
        Explanation::Importance(i) => {
            let map = build(&i.features)?;
            Explanation::Importance(FeatureImportance::remap(i, &map))
        }
        other => other,
    })
}

/// Runs a table transform over the example pool of an example-based
/// explanation.
pub(crate) fn map_pool(
    e: Explanation,
    f: impl FnOnce(Table) -> Result<(Table, Vec<String>)>,
) -> Result<Outcome> {
    let (wrap, set): (fn(ExampleSet) -> Explanation, ExampleSet) = match e {
        Explanation::SimilarExamples(x) => (Explanation::SimilarExamples, x),
        Explanation::Counterfactual(x) => (Explanation::Counterfactual, x),
        other => return Ok(Outcome::applied(other)),
    };
    let (pool, shell) = set.into_pool_table()?;
    let (pool, warnings) = f(pool)?;
    Ok(Outcome::Applied {
        explanation: wrap(shell.with_pool(pool)),
        warnings,
    })
}

pub(crate) fn is_additive(e: &Explanation) -> bool {
    matches!(e, Explanation::Contributions(_) | Explanation::Importance(_))
}

/// Score map that keeps every feature as is, except those matched by
/// `rewrite`, which returns the output for a given feature (or `None` to
/// drop it).
pub(crate) fn passthrough_map(features: &[String]) -> ScoreMap {
    features
        .iter()
        .enumerate()
        .map(|(i, f)| crate::explanation::MappedFeature {
            name: f.clone(),
            sources: vec![i],
        })
        .collect()
}

pub(crate) fn rename_in_map(features: &[String], from: &str, to: &str) -> ScoreMap {
    let mut map = passthrough_map(features);
    for m in &mut map {
        if m.name == from {
            m.name = to.to_string();
        }
    }
    map
}

pub(crate) fn rename_column(pool: Table, from: &str, to: &str) -> Result<Table> {
    let columns = pool
        .columns()
        .iter()
        .map(|c| if c.name() == from { c.clone().renamed(to) } else { c.clone() })
        .collect();
    pool.with_columns(columns)
}

#[allow(unused)]
pub(crate) fn sequential(n: usize) -> RowIds {
    RowIds::Sequential(n)
}

#[cfg(test)]
mod tests;
