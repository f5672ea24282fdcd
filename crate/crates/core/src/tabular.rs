//! Typed columnar tables with CSV ingestion and serialization.
//!
//! Every feature space the engine works with (original, algorithm-ready,
//! model-ready, interpretable) is a [`Table`]. Tables are immutable once
//! built; transforms produce new tables.

use std::borrow::Cow;
use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Literal used when an [`Cell::Any`] is written out.
pub const ANY_LITERAL: &str = "(any)";

/// Header emitted for the row-id column by [`Table::to_csv`].
pub const ID_HEADER: &str = "id";

/// A single value in a table or explanation.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Numeric(f64),
    Categorical(String),
    Boolean(bool),
    Missing,
    /// Unconstrained value. Only written by example-based explanation
    /// transforms, never present in model input.
    Any,
}

impl Cell {
    pub fn categorical(value: impl Into<String>) -> Self {
        Cell::Categorical(value.into())
    }

    /// Numeric view of the cell; booleans coerce to 1/0.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Numeric(x) => Some(*x),
            Cell::Boolean(b) => Some(if *b { 1.0 } else { 0.0 }),
            _ => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    /// Text form used for CSV output, category keys and labels.
    pub fn render(&self) -> Cow<'_, str> {
        match self {
            Cell::Numeric(x) => Cow::Owned(format_number(*x)),
            Cell::Categorical(s) => Cow::Borrowed(s),
            Cell::Boolean(true) => Cow::Borrowed("true"),
            Cell::Boolean(false) => Cow::Borrowed("false"),
            Cell::Missing => Cow::Borrowed(""),
            Cell::Any => Cow::Borrowed(ANY_LITERAL),
        }
    }

    fn conforms_to(&self, dtype: DType) -> bool {
        match self {
            Cell::Missing | Cell::Any => true,
            Cell::Numeric(_) => dtype == DType::Numeric,
            Cell::Categorical(_) => dtype == DType::Categorical,
            Cell::Boolean(_) => dtype == DType::Boolean,
        }
    }

    fn dtype(&self) -> Option<DType> {
        match self {
            Cell::Numeric(_) => Some(DType::Numeric),
            Cell::Categorical(_) => Some(DType::Categorical),
            Cell::Boolean(_) => Some(DType::Boolean),
            Cell::Missing | Cell::Any => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render())
    }
}

/// Shortest decimal string that parses back to the same `f64`.
pub fn format_number(x: f64) -> String {
    // `Display` for f64 is shortest round-trip and never uses exponents.
    format!("{x}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DType {
    Numeric,
    Categorical,
    Boolean,
}

impl fmt::Display for DType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DType::Numeric => "numeric",
            DType::Categorical => "categorical",
            DType::Boolean => "boolean",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    name: String,
    dtype: DType,
    cells: Vec<Cell>,
}

impl Column {
    pub fn new(name: impl Into<String>, dtype: DType, cells: Vec<Cell>) -> Result<Self> {
        let name = name.into();
        if let Some((row, cell)) = cells.iter().enumerate().find(|(_, c)| !c.conforms_to(dtype)) {
            return Err(Error::Schema(format!(
                "column {name:?} is {dtype} but row {row} holds {cell:?}"
            )));
        }
        Ok(Column { name, dtype, cells })
    }

    /// Builds a column whose dtype is taken from its first typed cell.
    /// All-missing columns default to numeric.
    pub fn from_cells(name: impl Into<String>, cells: Vec<Cell>) -> Result<Self> {
        let dtype = cells.iter().find_map(Cell::dtype).unwrap_or(DType::Numeric);
        Column::new(name, dtype, cells)
    }

    pub fn numeric(name: impl Into<String>, values: impl IntoIterator<Item = f64>) -> Self {
        Column {
            name: name.into(),
            dtype: DType::Numeric,
            cells: values.into_iter().map(Cell::Numeric).collect(),
        }
    }

    pub fn categorical<S: Into<String>>(
        name: impl Into<String>,
        values: impl IntoIterator<Item = S>,
    ) -> Self {
        Column {
            name: name.into(),
            dtype: DType::Categorical,
            cells: values.into_iter().map(|v| Cell::Categorical(v.into())).collect(),
        }
    }

    pub fn boolean(name: impl Into<String>, values: impl IntoIterator<Item = bool>) -> Self {
        Column {
            name: name.into(),
            dtype: DType::Boolean,
            cells: values.into_iter().map(Cell::Boolean).collect(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn cells(&self) -> &[Cell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn into_cells(self) -> Vec<Cell> {
        self.cells
    }

    pub fn renamed(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    fn take(&self, indices: &[usize]) -> Column {
        Column {
            name: self.name.clone(),
            dtype: self.dtype,
            cells: indices.iter().map(|&i| self.cells[i].clone()).collect(),
        }
    }
}

/// Row identifiers. Sequential ids ("0", "1", ...) are kept implicit so
/// scratch tables built inside the explainers do not allocate strings.
#[derive(Debug, Clone)]
pub enum RowIds {
    Sequential(usize),
    Named(Arc<[String]>),
}

impl RowIds {
    pub fn named(ids: Vec<String>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::Schema(format!("duplicate row id {id:?}")));
            }
        }
        Ok(RowIds::Named(ids.into()))
    }

    pub fn len(&self) -> usize {
        match self {
            RowIds::Sequential(n) => *n,
            RowIds::Named(ids) => ids.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Cow<'_, str> {
        match self {
            RowIds::Sequential(_) => Cow::Owned(i.to_string()),
            RowIds::Named(ids) => Cow::Borrowed(&ids[i]),
        }
    }

    pub fn to_vec(&self) -> Vec<String> {
        (0..self.len()).map(|i| self.get(i).into_owned()).collect()
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        match self {
            RowIds::Sequential(n) => id
                .parse::<usize>()
                .ok()
                .filter(|i| i < n && i.to_string() == id),
            RowIds::Named(ids) => ids.iter().position(|x| x == id),
        }
    }

    fn take(&self, indices: &[usize]) -> RowIds {
        RowIds::Named(indices.iter().map(|&i| self.get(i).into_owned()).collect())
    }
}

impl PartialEq for RowIds {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (RowIds::Sequential(a), RowIds::Sequential(b)) => a == b,
            (RowIds::Named(a), RowIds::Named(b)) => a == b,
            _ => self.len() == other.len() && (0..self.len()).all(|i| self.get(i) == other.get(i)),
        }
    }
}

/// Ordered, typed, column-major dataset with unique row ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    columns: Vec<Column>,
    row_ids: RowIds,
}

impl Table {
    pub fn new(columns: Vec<Column>, row_ids: RowIds) -> Result<Self> {
        let table = Table { columns, row_ids };
        table.check_shape()?;
        Ok(table)
    }

    pub fn with_sequential_ids(columns: Vec<Column>) -> Result<Self> {
        let n = columns.first().map_or(0, Column::len);
        Table::new(columns, RowIds::Sequential(n))
    }

    pub fn with_named_ids(columns: Vec<Column>, ids: Vec<String>) -> Result<Self> {
        Table::new(columns, RowIds::named(ids)?)
    }

    /// Same rows, new columns.
    pub fn with_columns(&self, columns: Vec<Column>) -> Result<Self> {
        Table::new(columns, self.row_ids.clone())
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.row_ids.len();
        let mut names = HashSet::with_capacity(self.columns.len());
        for col in &self.columns {
            if !names.insert(col.name.as_str()) {
                return Err(Error::Schema(format!("duplicate column name {:?}", col.name)));
            }
            if col.len() != n {
                return Err(Error::Schema(format!(
                    "column {:?} has {} cells but the table has {n} rows",
                    col.name,
                    col.len()
                )));
            }
        }
        Ok(())
    }

    /// Re-checks every structural invariant, including row-id uniqueness
    /// and cell/dtype conformance.
    pub fn check_invariants(&self) -> Result<()> {
        self.check_shape()?;
        if let RowIds::Named(ids) = &self.row_ids {
            RowIds::named(ids.to_vec())?;
        }
        for col in &self.columns {
            Column::new(col.name.clone(), col.dtype, col.cells.clone())?;
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn into_columns(self) -> Vec<Column> {
        self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name == name)
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column_index(name).is_some()
    }

    pub fn row_ids(&self) -> &RowIds {
        &self.row_ids
    }

    pub fn row_id(&self, i: usize) -> Cow<'_, str> {
        self.row_ids.get(i)
    }

    /// Sub-table with the given row positions, keeping their ids.
    pub fn take_rows(&self, indices: &[usize]) -> Table {
        Table {
            columns: self.columns.iter().map(|c| c.take(indices)).collect(),
            row_ids: self.row_ids.take(indices),
        }
    }

    /// Sub-table in the order of `ids`.
    pub fn select_rows<S: AsRef<str>>(&self, ids: &[S]) -> Result<Table> {
        let mut indices = Vec::with_capacity(ids.len());
        let lookup: std::collections::HashMap<Cow<'_, str>, usize> = match &self.row_ids {
            RowIds::Sequential(_) => Default::default(),
            RowIds::Named(_) => (0..self.n_rows()).map(|i| (self.row_id(i), i)).collect(),
        };
        for id in ids {
            let id = id.as_ref();
            let pos = match &self.row_ids {
                RowIds::Sequential(_) => self.row_ids.position(id),
                RowIds::Named(_) => lookup.get(id).copied(),
            };
            indices.push(pos.ok_or_else(|| Error::Lookup(id.to_string()))?);
        }
        let table = self.take_rows(&indices);
        // Repeated ids in the request would break uniqueness.
        if let RowIds::Named(ids) = &table.row_ids {
            RowIds::named(ids.to_vec())?;
        }
        Ok(table)
    }

    pub fn read_csv(bytes: &[u8], id_column: Option<&str>) -> Result<Table> {
        read_table(bytes, id_column)
    }

    pub fn to_csv(&self, include_ids: bool) -> String {
        write_table(self, include_ids)
    }
}

/// Parses RFC-4180 CSV (header row required, LF or CRLF line endings).
pub fn read_table(bytes: &[u8], id_column: Option<&str>) -> Result<Table> {
    let text = std::str::from_utf8(bytes).map_err(|e| Error::Parse {
        row: 0,
        message: format!("input is not UTF-8: {e}"),
    })?;
    let text = text.strip_prefix('\u{feff}').unwrap_or(text);
    let mut records = parse_records(text)?.into_iter();
    let header = records
        .next()
        .ok_or_else(|| Error::Schema("missing header row".into()))?;
    {
        let mut seen = HashSet::new();
        for name in &header {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("duplicate header name {name:?}")));
            }
        }
    }
    let id_pos = match id_column {
        Some(name) => Some(
            header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::Schema(format!("id column {name:?} not in header")))?,
        ),
        None => None,
    };

    let mut raw: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    for (i, record) in records.enumerate() {
        if record.len() != header.len() {
            return Err(Error::Parse {
                // header is record 1
                row: i + 2,
                message: format!("expected {} fields, found {}", header.len(), record.len()),
            });
        }
        for (j, field) in record.into_iter().enumerate() {
            raw[j].push(field);
        }
    }

    let mut ids = None;
    let mut columns = Vec::with_capacity(header.len());
    for (j, (name, fields)) in header.into_iter().zip(raw).enumerate() {
        if Some(j) == id_pos {
            ids = Some(fields);
        } else {
            columns.push(infer_column(name, fields));
        }
    }
    match ids {
        Some(ids) => Table::with_named_ids(columns, ids),
        None => {
            let n = columns.first().map_or(0, Column::len);
            Table::new(columns, RowIds::Sequential(n))
        }
    }
}

fn infer_column(name: String, fields: Vec<String>) -> Column {
    let present = || fields.iter().filter(|f| !f.is_empty());
    let dtype = if present().next().is_some()
        && present().all(|f| f.eq_ignore_ascii_case("true") || f.eq_ignore_ascii_case("false"))
    {
        DType::Boolean
    } else if present().all(|f| parse_decimal(f).is_some()) {
        DType::Numeric
    } else {
        DType::Categorical
    };
    let cells = fields
        .into_iter()
        .map(|f| {
            if f.is_empty() {
                return Cell::Missing;
            }
            match dtype {
                DType::Boolean => Cell::Boolean(f.eq_ignore_ascii_case("true")),
                DType::Numeric => Cell::Numeric(parse_decimal(&f).expect("checked above")),
                DType::Categorical => Cell::Categorical(f),
            }
        })
        .collect();
    Column { name, dtype, cells }
}

/// Decimal literal: optional sign, digits with an optional fraction, and an
/// optional exponent. Rejects `inf`, `nan` and hex forms.
fn parse_decimal(s: &str) -> Option<f64> {
    let body = s.strip_prefix(['+', '-']).unwrap_or(s);
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(pos) => (&body[..pos], Some(&body[pos + 1..])),
        None => (body, None),
    };
    let (int, frac) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f),
        None => (mantissa, ""),
    };
    let digits = |p: &str| p.bytes().all(|b| b.is_ascii_digit());
    if int.is_empty() && frac.is_empty() || !digits(int) || !digits(frac) {
        return None;
    }
    if let Some(exp) = exponent {
        let exp = exp.strip_prefix(['+', '-']).unwrap_or(exp);
        if exp.is_empty() || !digits(exp) {
            return None;
        }
    }
    s.parse().ok()
}

fn parse_records(text: &str) -> Result<Vec<Vec<String>>> {
    let mut records = Vec::new();
    let mut record = Vec::new();
    let mut field = String::new();
    let mut in_quotes = false;
    // true once anything has been read since the last record terminator
    let mut pending = false;
    let mut chars = text.chars().peekable();

    while let Some(c) = chars.next() {
        if in_quotes {
            if c == '"' {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    field.push('"');
                } else {
                    in_quotes = false;
                }
            } else {
                field.push(c);
            }
            continue;
        }
        match c {
            ',' => {
                record.push(std::mem::take(&mut field));
                pending = true;
            }
            '"' if field.is_empty() => {
                in_quotes = true;
                pending = true;
            }
            '\r' | '\n' => {
                if c == '\r' && chars.peek() == Some(&'\n') {
                    chars.next();
                }
                record.push(std::mem::take(&mut field));
                records.push(std::mem::take(&mut record));
                pending = false;
            }
            _ => {
                field.push(c);
                pending = true;
            }
        }
    }
    if in_quotes {
        return Err(Error::Parse {
            row: records.len() + 1,
            message: "unterminated quoted field".into(),
        });
    }
    if pending {
        record.push(field);
        records.push(record);
    }
    Ok(records)
}

/// Writes RFC-4180 CSV with LF line endings.
pub fn write_table(table: &Table, include_ids: bool) -> String {
    let mut out = String::new();
    let mut header: Vec<&str> = Vec::with_capacity(table.n_cols() + 1);
    if include_ids {
        header.push(ID_HEADER);
    }
    header.extend(table.column_names());
    write_record(&mut out, header.into_iter());
    for i in 0..table.n_rows() {
        let id = table.row_id(i);
        let cells: Vec<Cow<'_, str>> = table.columns.iter().map(|c| c.cells[i].render()).collect();
        let fields = include_ids
            .then_some(id.as_ref())
            .into_iter()
            .chain(cells.iter().map(|c| c.as_ref()));
        write_record(&mut out, fields);
    }
    out
}

fn write_record<'a>(out: &mut String, fields: impl Iterator<Item = &'a str>) {
    for (j, field) in fields.enumerate() {
        if j > 0 {
            out.push(',');
        }
        if field.contains([',', '"', '\n', '\r']) {
            out.push('"');
            out.push_str(&field.replace('"', "\"\""));
            out.push('"');
        } else {
            out.push_str(field);
        }
    }
    out.push('\n');
}

// Structured (JSON) form used by the app bundle.

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Numeric(x) => serializer.serialize_f64(*x),
            Cell::Categorical(s) => serializer.serialize_str(s),
            Cell::Boolean(b) => serializer.serialize_bool(*b),
            Cell::Missing => serializer.serialize_none(),
            Cell::Any => serializer.serialize_str(ANY_LITERAL),
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(deserializer)?;
        match value {
            serde_json::Value::Null => Ok(Cell::Missing),
            serde_json::Value::Bool(b) => Ok(Cell::Boolean(b)),
            serde_json::Value::Number(n) => n
                .as_f64()
                .map(Cell::Numeric)
                .ok_or_else(|| de::Error::custom("number out of range")),
            serde_json::Value::String(s) => Ok(Cell::Categorical(s)),
            other => Err(de::Error::custom(format!("unsupported cell value {other}"))),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ColumnRepr {
    name: String,
    dtype: DType,
    cells: Vec<Cell>,
}

#[derive(Serialize, Deserialize)]
struct TableRepr {
    row_ids: Vec<String>,
    columns: Vec<ColumnRepr>,
}

impl Serialize for Table {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        TableRepr {
            row_ids: self.row_ids.to_vec(),
            columns: self
                .columns
                .iter()
                .map(|c| ColumnRepr {
                    name: c.name.clone(),
                    dtype: c.dtype,
                    cells: c.cells.clone(),
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Table {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = TableRepr::deserialize(deserializer)?;
        let columns = repr
            .columns
            .into_iter()
            .map(|c| Column::new(c.name, c.dtype, c.cells))
            .collect::<Result<Vec<_>>>()
            .map_err(de::Error::custom)?;
        Table::with_named_ids(columns, repr.row_ids).map_err(de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn read(s: &str) -> Result<Table> {
        read_table(s.as_bytes(), None)
    }

    #[test]
    fn infers_numeric_and_categorical() {
        let t = read("a,b\n1,x\n2,y").unwrap();
        assert_eq!(t.column("a").unwrap().dtype(), DType::Numeric);
        assert_eq!(t.column("a").unwrap().cells(), &[Cell::Numeric(1.0), Cell::Numeric(2.0)]);
        assert_eq!(t.column("b").unwrap().dtype(), DType::Categorical);
        assert_eq!(t.row_ids().to_vec(), vec!["0", "1"]);
    }

    #[test]
    fn empty_field_is_missing() {
        let t = read("a\n1\n\n").unwrap();
        assert_eq!(t.column("a").unwrap().cells(), &[Cell::Numeric(1.0), Cell::Missing]);
        assert_eq!(t.column("a").unwrap().dtype(), DType::Numeric);
    }

    #[test]
    fn duplicate_header_rejected() {
        assert!(matches!(read("a,a\n1,2"), Err(Error::Schema(_))));
    }

    #[test]
    fn duplicate_row_ids_rejected() {
        let err = read_table(b"id,a\nx,1\nx,2\n", Some("id")).unwrap_err();
        assert!(matches!(err, Error::Schema(_)));
    }

    #[test]
    fn ragged_row_reports_row_number() {
        match read("a,b\n1,2\n3\n") {
            Err(Error::Parse { row, .. }) => assert_eq!(row, 3),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn boolean_inference_is_strict() {
        let t = read("a,b\nTrue,0\nfalse,1\n").unwrap();
        assert_eq!(t.column("a").unwrap().dtype(), DType::Boolean);
        assert_eq!(t.column("b").unwrap().dtype(), DType::Numeric);
    }

    #[test]
    fn non_finite_literals_stay_categorical() {
        let t = read("a\ninf\nNaN\n").unwrap();
        assert_eq!(t.column("a").unwrap().dtype(), DType::Categorical);
    }

    #[test]
    fn id_column_becomes_row_ids() {
        let t = read_table(b"k,a\nr1,1\nr2,2\r\n", Some("k")).unwrap();
        assert_eq!(t.column_names(), vec!["a"]);
        assert_eq!(t.row_ids().to_vec(), vec!["r1", "r2"]);
        assert!(read_table(b"k,a\nr1,1\n", Some("zz")).is_err());
    }

    #[test]
    fn quoted_fields() {
        let t = read("a,b\n\"x, y\",\"he said \"\"hi\"\"\"\n").unwrap();
        assert_eq!(t.column("a").unwrap().cells()[0], Cell::categorical("x, y"));
        assert_eq!(t.column("b").unwrap().cells()[0], Cell::categorical("he said \"hi\""));
        let back = read(&t.to_csv(false)).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn any_literal_reads_back_as_text() {
        let t = Table::with_sequential_ids(vec![
            Column::new("a", DType::Categorical, vec![Cell::Any]).unwrap()
        ])
        .unwrap();
        let csv = t.to_csv(false);
        assert_eq!(csv, "a\n(any)\n");
        let back = read(&csv).unwrap();
        assert_eq!(back.column("a").unwrap().cells()[0], Cell::categorical(ANY_LITERAL));
    }

    #[test]
    fn writes_minimal_csv() {
        let t = Table::with_sequential_ids(vec![Column::numeric("a", [1.0])]).unwrap();
        assert_eq!(write_table(&t, false), "a\n1\n");
        let t = Table::with_sequential_ids(vec![
            Column::new("a", DType::Numeric, vec![Cell::Missing, Cell::Numeric(0.5)]).unwrap(),
            Column::categorical("b", ["x", "y"]),
        ])
        .unwrap();
        assert_eq!(write_table(&t, true), "id,a,b\n0,,x\n1,0.5,y\n");
    }

    #[test]
    fn select_rows_contract() {
        let t = read_table(b"id,a\np,1\nq,2\nr,3\n", Some("id")).unwrap();
        assert_eq!(t.select_rows(&["p", "q", "r"]).unwrap(), t);
        let empty = t.select_rows::<&str>(&[]).unwrap();
        assert_eq!(empty.n_rows(), 0);
        assert_eq!(empty.column_names(), vec!["a"]);
        assert_eq!(t.select_rows(&["zz"]).unwrap_err(), Error::Lookup("zz".into()));
        let reordered = t.select_rows(&["r", "p"]).unwrap();
        assert_eq!(reordered.row_ids().to_vec(), vec!["r", "p"]);
        assert_eq!(reordered.column("a").unwrap().cells()[0], Cell::Numeric(3.0));
    }

    #[test]
    fn sequential_ids_select() {
        let t = read("a\n5\n6\n7\n").unwrap();
        let s = t.select_rows(&["2", "0"]).unwrap();
        assert_eq!(s.column("a").unwrap().cells(), &[Cell::Numeric(7.0), Cell::Numeric(5.0)]);
        assert!(t.select_rows(&["3"]).is_err());
        assert!(t.select_rows(&["01"]).is_err());
    }

    #[test]
    fn dtype_conformance_enforced() {
        assert!(Column::new("a", DType::Numeric, vec![Cell::categorical("x")]).is_err());
        assert!(Column::new("a", DType::Numeric, vec![Cell::Missing, Cell::Any]).is_ok());
    }

    #[test]
    fn bundle_json_round_trip() {
        let t = read_table(b"id,a,b,c\nx,1.5,u,true\ny,,v,false\n", Some("id")).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Table = serde_json::from_str(&json).unwrap();
        assert_eq!(back, t);
    }

    proptest! {
        #[test]
        fn numeric_csv_round_trip(
            rows in proptest::collection::vec(
                proptest::collection::vec(-1e12f64..1e12, 3), 1..20)
        ) {
            let columns = (0..3)
                .map(|j| Column::numeric(format!("c{j}"), rows.iter().map(|r| r[j])))
                .collect();
            let t = Table::with_sequential_ids(columns).unwrap();
            let back = read(&t.to_csv(false)).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
