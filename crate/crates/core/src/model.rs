//! Models: anything that maps a model-ready table to one prediction per row.
//!
//! Two native reference models are provided, a linear model and a binary
//! decision tree, plus a ridge least-squares fitter used to build fixtures.

use indexmap::IndexMap;
use nalgebra::{DMatrix, DVector};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::tabular::{Column, DType, Table};

/// Diagonal regularizer used by [`fit_linear`].
pub const RIDGE_LAMBDA: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Regression,
    /// Outputs are probabilities of the positive class, in [0, 1].
    BinaryProbability,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: IndexMap<String, f64>,
    pub intercept: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Internal {
        feature: String,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

/// Binary regression tree stored as an arena. A row goes left iff
/// `x[feature] <= threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeModel {
    nodes: Vec<TreeNode>,
    root: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelKind {
    Linear(LinearModel),
    Tree(TreeModel),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    kind: ModelKind,
    task: Task,
}

impl LinearModel {
    pub fn new(weights: impl IntoIterator<Item = (String, f64)>, intercept: f64) -> Self {
        LinearModel {
            weights: weights.into_iter().collect(),
            intercept,
        }
    }
}

impl TreeModel {
    pub fn new(nodes: Vec<TreeNode>, root: usize) -> Result<Self> {
        let tree = TreeModel { nodes, root };
        tree.check_structure()?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn root(&self) -> usize {
        self.root
    }

    /// Every node reachable exactly once from the root, no dangling indices.
    fn check_structure(&self) -> Result<()> {
        let n = self.nodes.len();
        if self.root >= n {
            return Err(Error::Config(format!("tree root {} out of range", self.root)));
        }
        let mut visited = vec![false; n];
        let mut stack = vec![self.root];
        while let Some(i) = stack.pop() {
            if visited[i] {
                return Err(Error::Config(format!("tree node {i} is reached twice (cycle or shared child)")));
            }
            visited[i] = true;
            if let TreeNode::Internal { left, right, .. } = &self.nodes[i] {
                for &child in [left, right] {
                    if child >= n {
                        return Err(Error::Config(format!("tree node {i} has dangling child {child}")));
                    }
                    stack.push(child);
                }
            }
        }
        if let Some(i) = visited.iter().position(|v| !v) {
            return Err(Error::Config(format!("tree node {i} is unreachable from the root")));
        }
        Ok(())
    }

    fn leaf_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.nodes.iter().filter_map(|n| match n {
            TreeNode::Leaf { value } => Some(*value),
            TreeNode::Internal { .. } => None,
        })
    }
}

impl Model {
    pub fn linear(model: LinearModel) -> Self {
        Model {
            kind: ModelKind::Linear(model),
            task: Task::Regression,
        }
    }

    pub fn tree(model: TreeModel, task: Task) -> Result<Self> {
        if task == Task::BinaryProbability {
            if let Some(v) = model.leaf_values().find(|v| !(0.0..=1.0).contains(v)) {
                return Err(Error::Config(format!(
                    "binary tree leaf value {v} is not a probability"
                )));
            }
        }
        Ok(Model {
            kind: ModelKind::Tree(model),
            task,
        })
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn as_linear(&self) -> Option<&LinearModel> {
        match &self.kind {
            ModelKind::Linear(m) => Some(m),
            ModelKind::Tree(_) => None,
        }
    }

    /// Model-space feature names the model reads, in first-use order.
    pub fn features(&self) -> Vec<&str> {
        match &self.kind {
            ModelKind::Linear(m) => m.weights.keys().map(String::as_str).collect(),
            ModelKind::Tree(t) => {
                let mut out: Vec<&str> = Vec::new();
                for node in &t.nodes {
                    if let TreeNode::Internal { feature, .. } = node {
                        if !out.contains(&feature.as_str()) {
                            out.push(feature);
                        }
                    }
                }
                out
            }
        }
    }

    pub fn predict(&self, table: &Table) -> Result<Vec<f64>> {
        predict(self, table)
    }
}

fn numeric_view<'t>(table: &'t Table, feature: &str) -> Result<&'t Column> {
    let col = table
        .column(feature)
        .ok_or_else(|| Error::Contract(format!("model feature {feature:?} missing from input")))?;
    if col.dtype() == DType::Categorical {
        return Err(Error::Contract(format!(
            "model feature {feature:?} is categorical; expected numeric or boolean"
        )));
    }
    Ok(col)
}

fn cell_value(table: &Table, col: &Column, row: usize) -> Result<f64> {
    col.cells()[row].as_f64().ok_or_else(|| {
        Error::Data(format!(
            "row {:?} has no usable value for model feature {:?}",
            table.row_id(row),
            col.name()
        ))
    })
}

/// Deterministic prediction, one value per row.
pub fn predict(model: &Model, table: &Table) -> Result<Vec<f64>> {
    let n = table.n_rows();
    match &model.kind {
        ModelKind::Linear(m) => {
            let mut out = vec![m.intercept; n];
            for (feature, &w) in &m.weights {
                let col = numeric_view(table, feature)?;
                for (row, acc) in out.iter_mut().enumerate() {
                    *acc += w * cell_value(table, col, row)?;
                }
            }
            Ok(out)
        }
        ModelKind::Tree(t) => {
            let mut columns = Vec::with_capacity(t.nodes.len());
            for node in &t.nodes {
                columns.push(match node {
                    TreeNode::Internal { feature, .. } => Some(numeric_view(table, feature)?),
                    TreeNode::Leaf { .. } => None,
                });
            }
            (0..n)
                .map(|row| {
                    let mut i = t.root;
                    loop {
                        match &t.nodes[i] {
                            TreeNode::Leaf { value } => return Ok(*value),
                            TreeNode::Internal {
                                threshold,
                                left,
                                right,
                                ..
                            } => {
                                let col = columns[i].expect("internal node has a column");
                                let x = cell_value(table, col, row)?;
                                i = if x <= *threshold { *left } else { *right };
                            }
                        }
                    }
                })
                .collect()
        }
    }
}

/// Ridge least squares via the normal equations, `lambda = 1e-8` on every
/// diagonal entry except the intercept's.
pub fn fit_linear(x: &Table, y: &[f64]) -> Result<LinearModel> {
    let n = x.n_rows();
    if n == 0 {
        return Err(Error::Data("cannot fit a linear model on zero rows".into()));
    }
    if y.len() != n {
        return Err(Error::Data(format!("{} targets for {n} rows", y.len())));
    }
    let d = x.n_cols();
    let mut design = DMatrix::<f64>::zeros(n, d + 1);
    for row in 0..n {
        design[(row, 0)] = 1.0;
    }
    for (j, col) in x.columns().iter().enumerate() {
        let col = numeric_view(x, col.name())?;
        for row in 0..n {
            design[(row, j + 1)] = cell_value(x, col, row)?;
        }
    }
    let mut gram = design.transpose() * &design;
    for j in 1..=d {
        gram[(j, j)] += RIDGE_LAMBDA;
    }
    let rhs = design.transpose() * DVector::from_column_slice(y);
    let beta = match gram.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => gram
            .lu()
            .solve(&rhs)
            .ok_or_else(|| Error::Data("normal equations are singular".into()))?,
    };
    Ok(LinearModel {
        intercept: beta[0],
        weights: x
            .columns()
            .iter()
            .enumerate()
            .map(|(j, c)| (c.name().to_string(), beta[j + 1]))
            .collect(),
    })
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn parse_task(doc: &Value) -> Result<Task> {
    match doc.get("task") {
        None => Ok(Task::Regression),
        Some(Value::String(s)) if s == "regression" => Ok(Task::Regression),
        Some(Value::String(s)) if s == "binary" => Ok(Task::BinaryProbability),
        Some(other) => Err(config_err(format!("unknown model task {other}"))),
    }
}

fn number(v: &Value, what: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| config_err(format!("{what} must be a number")))
}

fn index(v: &Value, what: &str) -> Result<usize> {
    v.as_u64()
        .map(|i| i as usize)
        .ok_or_else(|| config_err(format!("{what} must be a non-negative integer")))
}

/// Builds a model from a model-spec document:
/// `{"kind":"linear","weights":{..},"intercept":n}` or
/// `{"kind":"tree","nodes":[..],"root":i,"task":"regression"|"binary"}`.
pub fn load_model_spec(doc: &Value) -> Result<Model> {
    let kind = doc
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| config_err("model spec needs a string \"kind\""))?;
    match kind {
        "linear" => {
            if parse_task(doc)? != Task::Regression {
                return Err(config_err("linear models only support the regression task"));
            }
            let weights = doc
                .get("weights")
                .and_then(Value::as_object)
                .ok_or_else(|| config_err("linear model needs a \"weights\" object"))?
                .iter()
                .map(|(k, v)| Ok((k.clone(), number(v, "weight")?)))
                .collect::<Result<Vec<_>>>()?;
            let intercept = match doc.get("intercept") {
                Some(v) => number(v, "intercept")?,
                None => 0.0,
            };
            Ok(Model::linear(LinearModel::new(weights, intercept)))
        }
        "tree" => {
            let raw = doc
                .get("nodes")
                .and_then(Value::as_array)
                .ok_or_else(|| config_err("tree model needs a \"nodes\" array"))?;
            let nodes = raw
                .iter()
                .enumerate()
                .map(|(i, node)| {
                    if let Some(value) = node.get("value") {
                        return Ok(TreeNode::Leaf {
                            value: number(value, "leaf value")?,
                        });
                    }
                    let field = |name: &str| {
                        node.get(name)
                            .ok_or_else(|| config_err(format!("tree node {i} lacks \"{name}\"")))
                    };
                    Ok(TreeNode::Internal {
                        feature: field("feature")?
                            .as_str()
                            .ok_or_else(|| config_err("feature must be a string"))?
                            .to_string(),
                        threshold: number(field("threshold")?, "threshold")?,
                        left: index(field("left")?, "left")?,
                        right: index(field("right")?, "right")?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let root = match doc.get("root") {
                Some(v) => index(v, "root")?,
                None => 0,
            };
            Model::tree(TreeModel::new(nodes, root)?, parse_task(doc)?)
        }
        other => Err(config_err(format!("unknown model kind {other:?}"))),
    }
}

/// Inverse of [`load_model_spec`].
pub fn model_to_spec(model: &Model) -> Value {
    match &model.kind {
        ModelKind::Linear(m) => json!({
            "kind": "linear",
            "weights": m.weights,
            "intercept": m.intercept,
        }),
        ModelKind::Tree(t) => json!({
            "kind": "tree",
            "nodes": t.nodes.iter().map(|n| match n {
                TreeNode::Internal { feature, threshold, left, right } => json!({
                    "feature": feature, "threshold": threshold, "left": left, "right": right,
                }),
                TreeNode::Leaf { value } => json!({ "value": value }),
            }).collect::<Vec<_>>(),
            "root": t.root,
            "task": match model.task {
                Task::Regression => "regression",
                Task::BinaryProbability => "binary",
            },
        }),
    }
}

/// Convenience for building model-space tables in tests and demos.
pub fn numeric_table(columns: &[(&str, &[f64])]) -> Result<Table> {
    Table::with_sequential_ids(
        columns
            .iter()
            .map(|(name, values)| Column::numeric(*name, values.iter().copied()))
            .collect(),
    )
}
