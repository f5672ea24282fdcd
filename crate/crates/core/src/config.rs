//! Project configuration and the saved app bundle.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::explainer::{ExplainerKind, ExplainerOptions};
use crate::explanation::Descriptions;
use crate::model::{fit_linear, load_model_spec, model_to_spec, Model};
use crate::realapp::{AppParts, RealApp};
use crate::tabular::{read_table, Column, Table};
use crate::transform::{
    FeatureSpaceFlags, Transformer, TransformerSpec, TransformPipeline, UnsupportedMode, TRANSFORMER_TYPES,
};

pub const CONFIG_VERSION: &str = "realpipe-config/1";
pub const BUNDLE_VERSION: &str = "realpipe-bundle/1";
pub const SEED_ENV: &str = "REALPIPE_SEED";
pub const DEFAULT_MODEL_ID: &str = "default";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_column: Option<String>,
    pub target_column: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransformerConfig {
    #[serde(rename = "type")]
    pub kind: String,
    #[serde(default = "empty_object")]
    pub params: Value,
    pub model: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algo: Option<bool>,
    pub interpret: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on_unsupported: Option<UnsupportedMode>,
}

fn empty_object() -> Value {
    json!({})
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProjectConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub data: DataConfig,
    /// A model spec, or `{"fit":"linear"}` to fit ridge least squares on the
    /// model-space training data.
    pub model: Value,
    #[serde(default)]
    pub transformers: Vec<TransformerConfig>,
    #[serde(default)]
    pub feature_descriptions: Descriptions,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub explainer: ExplainerOptions,
}

impl ProjectConfig {
    pub fn from_json(text: &str) -> Result<ProjectConfig> {
        let cfg: ProjectConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid config: {e}")))?;
        if let Some(v) = &cfg.version {
            if v != CONFIG_VERSION {
                return Err(Error::Config(format!("unsupported config version {v:?}")));
            }
        }
        // Surface unknown types and bad params before any data is read.
        cfg.build_transformers()?;
        Ok(cfg)
    }

    /// Reads a config file. Relative data paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<(ProjectConfig, PathBuf)> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let cfg = ProjectConfig::from_json(&text)?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn build_transformers(&self) -> Result<Vec<Transformer>> {
        self.transformers
            .iter()
            .enumerate()
            .map(|(i, t)| {
                if !TRANSFORMER_TYPES.contains(&t.kind.as_str()) {
                    return Err(Error::Config(format!(
                        "unknown transformer type {:?} (expected one of {})",
                        t.kind,
                        TRANSFORMER_TYPES.join(", ")
                    )));
                }
                let spec: TransformerSpec = serde_json::from_value(json!({ "type": t.kind, "params": t.params }))
                    .map_err(|e| Error::Config(format!("transformer #{i} ({}): {e}", t.kind)))?;
                let transformer = Transformer::new(spec, FeatureSpaceFlags::new(t.model, t.algo, t.interpret));
                Ok(match t.on_unsupported {
                    Some(mode) => transformer.with_mode(mode),
                    None => transformer,
                })
            })
            .collect()
    }

    /// Training features and targets. The target column is removed from the
    /// returned table.
    pub fn load_training(&self, base: &Path) -> Result<(Table, Vec<f64>)> {
        let path = base.join(&self.data.path);
        let bytes = std::fs::read(&path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        let table = read_table(&bytes, self.data.id_column.as_deref())?;
        split_target(&table, &self.data.target_column)
    }

    /// The seed after applying the environment override.
    pub fn resolved_seed(&self) -> Result<u64> {
        match std::env::var(SEED_ENV) {
            Ok(s) => s
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{SEED_ENV} must be an unsigned integer, got {s:?}"))),
            Err(_) => Ok(self.seed),
        }
    }

    /// Builds the app: fits the pipeline, fits or loads the model, and
    /// validates.
    pub fn build_app(&self, base: &Path) -> Result<RealApp> {
        let seed = self.resolved_seed()?;
        let transformers = self.build_transformers()?;
        let (train, targets) = self.load_training(base)?;
        let mut pipeline = TransformPipeline::new(transformers);
        pipeline.fit(&train)?;
        let model = self.resolve_model(&pipeline, &train, &targets)?;
        RealApp::from_parts(AppParts {
            models: [(DEFAULT_MODEL_ID.to_string(), model)].into_iter().collect(),
            active: DEFAULT_MODEL_ID.to_string(),
            pipeline,
            train,
            targets,
            descriptions: self.feature_descriptions.clone(),
            id_column: self.data.id_column.clone(),
            seed,
            options: self.explainer.clone(),
            backgrounds: HashMap::new(),
        })
    }

    fn resolve_model(&self, pipeline: &TransformPipeline, train: &Table, targets: &[f64]) -> Result<Model> {
        match self.model.get("fit") {
            Some(Value::String(s)) if s == "linear" => {
                let x = pipeline.to_model_space(train)?;
                Ok(Model::linear(fit_linear(&x, targets)?))
            }
            Some(other) => Err(Error::Config(format!("unknown model fit {other}; only \"linear\" is supported"))),
            None => load_model_spec(&self.model),
        }
    }
}

/// Splits `target` out of `table`. Target cells must be numeric or boolean.
pub fn split_target(table: &Table, target: &str) -> Result<(Table, Vec<f64>)> {
    let col = table
        .column(target)
        .ok_or_else(|| Error::Data(format!("target column {target:?} not found")))?;
    let targets = col
        .cells()
        .iter()
        .enumerate()
        .map(|(r, c)| {
            c.as_f64()
                .ok_or_else(|| Error::Data(format!("target in row {:?} is not numeric: {c}", table.row_id(r))))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((drop_column(table, target)?, targets))
}

pub fn drop_column(table: &Table, name: &str) -> Result<Table> {
    let rest: Vec<Column> = table.columns().iter().filter(|c| c.name() != name).cloned().collect();
    table.with_columns(rest)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplainerState {
    pub background_row_ids: Vec<String>,
    pub base_value: f64,
}

/// Everything needed to rebuild a [`RealApp`] without refitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AppBundle {
    pub version: String,
    pub config: Value,
    pub pipeline: TransformPipeline,
    pub models: IndexMap<String, Value>,
    pub active_model: String,
    pub target_column: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id_column: Option<String>,
    pub seed: u64,
    pub options: ExplainerOptions,
    pub feature_descriptions: Descriptions,
    pub train: Table,
    pub targets: Vec<f64>,
    pub explainers: IndexMap<String, ExplainerState>,
}

impl AppBundle {
    /// Captures `app`, fitting every explainer kind so background samples and
    /// base values are stored.
    pub fn from_app(app: &RealApp, config: &ProjectConfig) -> Result<AppBundle> {
        let mut explainers = IndexMap::new();
        for kind in ExplainerKind::ALL {
            let f = app.explainer(kind)?;
            explainers.insert(
                kind.as_str().to_string(),
                ExplainerState {
                    background_row_ids: f.background.indices.iter().map(|&i| app.train().row_id(i).into_owned()).collect(),
                    base_value: f.base_value,
                },
            );
        }
        Ok(AppBundle {
            version: BUNDLE_VERSION.to_string(),
            config: serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?,
            pipeline: app.pipeline().clone(),
            models: app.models().iter().map(|(k, m)| (k.clone(), model_to_spec(m))).collect(),
            active_model: app.active_model_id().to_string(),
            target_column: config.data.target_column.clone(),
            id_column: app.id_column().map(String::from),
            seed: app.seed(),
            options: app.options().clone(),
            feature_descriptions: app.descriptions().clone(),
            train: app.train().clone(),
            targets: app.targets().to_vec(),
            explainers,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<AppBundle> {
        let doc: Value = serde_json::from_str(text).map_err(|e| Error::Config(format!("invalid bundle: {e}")))?;
        match doc.get("version").and_then(Value::as_str) {
            Some(BUNDLE_VERSION) => {}
            Some(v) => return Err(Error::Config(format!("unsupported bundle version {v:?}"))),
            None => return Err(Error::Config("bundle has no version".into())),
        }
        serde_json::from_value(doc).map_err(|e| Error::Config(format!("invalid bundle: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<AppBundle> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        AppBundle::from_json(&text)
    }

    /// Rebuilds the app. The stored base values must be reproduced exactly.
    pub fn into_app(self) -> Result<RealApp> {
        let models = self
            .models
            .iter()
            .map(|(k, spec)| Ok((k.clone(), load_model_spec(spec)?)))
            .collect::<Result<IndexMap<_, _>>>()?;
        let mut backgrounds = HashMap::new();
        for (name, state) in &self.explainers {
            let kind = ExplainerKind::ALL
                .into_iter()
                .find(|k| k.as_str() == name)
                .ok_or_else(|| Error::Config(format!("unknown explainer kind {name:?} in bundle")))?;
            backgrounds.insert(kind, state.background_row_ids.clone());
        }
        let app = RealApp::from_parts(AppParts {
            models,
            active: self.active_model,
            pipeline: self.pipeline,
            train: self.train,
            targets: self.targets,
            descriptions: self.feature_descriptions,
            id_column: self.id_column,
            seed: self.seed,
            options: self.options,
            backgrounds,
        })?;
        for (name, state) in &self.explainers {
            let kind = ExplainerKind::ALL.into_iter().find(|k| k.as_str() == name).expect("checked");
            let f = app.explainer(kind)?;
            if f.base_value.to_bits() != state.base_value.to_bits() {
                return Err(Error::Data(format!(
                    "bundle is inconsistent: {name} base value {} recomputes to {}",
                    state.base_value, f.base_value
                )));
            }
        }
        Ok(app)
    }
}
