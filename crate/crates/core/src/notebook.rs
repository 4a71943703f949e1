//! Notebook document model (nbformat v4).
//!
//! Cells are numbered from 1. Every mutation returns a new [`Notebook`] and
//! keeps the numbering contiguous.

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{json, Map, Value};

/// Separator used between cells when rendering a notebook for a prompt.
pub const DEFAULT_SEPARATOR: &str = "#%% ===== CELL BOUNDARY ===== %%#";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NotebookError {
    #[error("malformed notebook at byte {offset}: {message}")]
    Parse { offset: usize, message: String },
    #[error("unsupported notebook format {major}.x (only 4.x is supported)")]
    UnsupportedFormat { major: u64 },
    #[error("CellOutOfRange: cell {cell_num} does not exist (notebook has {len} cells)")]
    CellOutOfRange { cell_num: usize, len: usize },
    #[error("SeparatorCollision: separator occurs in the source of cell {cell_num}")]
    SeparatorCollision { cell_num: usize },
    #[error("separator must be a non-empty single line")]
    InvalidSeparator,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellKind {
    Code,
    Markdown,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Output {
    Stream { name: String, text: String },
    /// `execute_result`; only the `text/plain` representation is modelled.
    Result { execution_count: Option<u64>, text: String },
    Error { ename: String, evalue: String, traceback: Vec<String> },
    /// Any other output, kept verbatim.
    Other(Value),
}

#[derive(Debug, Clone)]
pub struct Cell {
    index: usize,
    pub kind: CellKind,
    pub source: String,
    pub outputs: Vec<Output>,
    pub execution_count: Option<u64>,
    pub id: Option<String>,
    pub metadata: Map<String, Value>,
    /// Position in the notebook the session started from; `None` for cells
    /// inserted since.
    origin: Option<usize>,
}

impl PartialEq for Cell {
    fn eq(&self, other: &Self) -> bool {
        self.index == other.index
            && self.kind == other.kind
            && self.source == other.source
            && self.outputs == other.outputs
            && self.execution_count == other.execution_count
            && self.id == other.id
            && self.metadata == other.metadata
    }
}

impl Cell {
    pub fn code(source: impl Into<String>) -> Self {
        Cell::new(CellKind::Code, source.into())
    }

    pub fn markdown(source: impl Into<String>) -> Self {
        Cell::new(CellKind::Markdown, source.into())
    }

    fn new(kind: CellKind, source: String) -> Self {
        Cell {
            index: 0,
            kind,
            source,
            outputs: Vec::new(),
            execution_count: None,
            id: None,
            metadata: Map::new(),
            origin: None,
        }
    }

    /// 1-based position in the owning notebook.
    pub fn index(&self) -> usize {
        self.index
    }

    pub fn origin(&self) -> Option<usize> {
        self.origin
    }

    pub fn is_code(&self) -> bool {
        self.kind == CellKind::Code
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Notebook {
    cells: Vec<Cell>,
    pub format_version: (u64, u64),
    pub metadata: Map<String, Value>,
}

impl Default for Notebook {
    fn default() -> Self {
        Notebook { cells: Vec::new(), format_version: (4, 5), metadata: Map::new() }
    }
}

/// Failing cell plus the error it raised.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorContext {
    pub cell_num: usize,
    pub traceback: String,
    pub ename: String,
    pub evalue: String,
}

impl ErrorContext {
    /// Checks that `cell_num` names a code cell of `nb` and the traceback is non-empty.
    pub fn validate(&self, nb: &Notebook) -> Result<(), String> {
        match nb.cell(self.cell_num) {
            None => Err(NotebookError::CellOutOfRange { cell_num: self.cell_num, len: nb.len() }.to_string()),
            Some(c) if !c.is_code() => Err(format!("cell {} is not a code cell", self.cell_num)),
            Some(_) if self.traceback.trim().is_empty() => Err("traceback is empty".into()),
            Some(_) => Ok(()),
        }
    }
}

impl Notebook {
    pub fn from_cells(cells: impl IntoIterator<Item = Cell>) -> Self {
        let mut nb = Notebook { cells: cells.into_iter().collect(), ..Default::default() };
        nb.renumber();
        nb.mark_origins();
        nb
    }

    /// Parses nbformat JSON.
    pub fn parse(text: &str) -> Result<Notebook, NotebookError> {
        let root: Value = serde_json::from_str(text).map_err(|e| NotebookError::Parse {
            offset: byte_offset(text, e.line(), e.column()),
            message: e.to_string(),
        })?;
        Notebook::from_value(root)
    }

    pub fn from_value(root: Value) -> Result<Notebook, NotebookError> {
        let schema = |message: String| NotebookError::Parse { offset: 0, message };
        let Value::Object(mut root) = root else {
            return Err(schema("top level is not an object".into()));
        };
        let major = root
            .get("nbformat")
            .and_then(Value::as_u64)
            .ok_or_else(|| schema("missing integer field `nbformat`".into()))?;
        if major != 4 {
            return Err(NotebookError::UnsupportedFormat { major });
        }
        let minor = root.get("nbformat_minor").and_then(Value::as_u64).unwrap_or(0);
        let metadata = match root.remove("metadata") {
            Some(Value::Object(m)) => m,
            None => Map::new(),
            Some(_) => return Err(schema("`metadata` is not an object".into())),
        };
        let Some(Value::Array(raw_cells)) = root.remove("cells") else {
            return Err(schema("missing array field `cells`".into()));
        };
        let mut cells = Vec::with_capacity(raw_cells.len());
        for (i, raw) in raw_cells.into_iter().enumerate() {
            cells.push(parse_cell(raw).map_err(|m| schema(format!("cell {}: {m}", i + 1)))?);
        }
        let mut nb = Notebook { cells, format_version: (major, minor), metadata };
        nb.renumber();
        nb.mark_origins();
        Ok(nb)
    }

    /// Serializes to nbformat JSON with sorted keys and one-space indent.
    pub fn serialize(&self) -> String {
        let mut buf = Vec::new();
        let formatter = serde_json::ser::PrettyFormatter::with_indent(b" ");
        let mut ser = serde_json::Serializer::with_formatter(&mut buf, formatter);
        self.to_value().serialize(&mut ser).expect("serializing a JSON value cannot fail");
        let mut text = String::from_utf8(buf).expect("serde_json emits UTF-8");
        text.push('\n');
        text
    }

    pub fn to_value(&self) -> Value {
        let cells: Vec<Value> = self.cells.iter().map(|c| cell_to_value(c, self.format_version.1)).collect();
        json!({
            "cells": cells,
            "metadata": Value::Object(self.metadata.clone()),
            "nbformat": self.format_version.0,
            "nbformat_minor": self.format_version.1,
        })
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

    /// 1-based lookup.
    pub fn cell(&self, cell_num: usize) -> Option<&Cell> {
        cell_num.checked_sub(1).and_then(|i| self.cells.get(i))
    }

    /// Current number of the cell that was at `origin` when the notebook was loaded.
    pub fn find_origin(&self, origin: usize) -> Option<usize> {
        self.cells.iter().find(|c| c.origin == Some(origin)).map(|c| c.index)
    }

    /// Renders all cell sources, without outputs, joined by `separator` lines.
    pub fn render_for_prompt(&self, separator: &str) -> Result<String, NotebookError> {
        if separator.is_empty() || separator.contains('\n') {
            return Err(NotebookError::InvalidSeparator);
        }
        if let Some(c) = self.cells.iter().find(|c| c.source.contains(separator)) {
            return Err(NotebookError::SeparatorCollision { cell_num: c.index });
        }
        let sources: Vec<&str> = self.cells.iter().map(|c| c.source.as_str()).collect();
        Ok(sources.join(&format!("\n{separator}\n")))
    }

    /// Renders with [`DEFAULT_SEPARATOR`], appending a numeric suffix until it
    /// no longer occurs in any source. Returns the text and the separator used.
    pub fn render_with_default_separator(&self) -> (String, String) {
        let mut separator = DEFAULT_SEPARATOR.to_string();
        let mut attempt = 1;
        loop {
            match self.render_for_prompt(&separator) {
                Ok(text) => return (text, separator),
                Err(_) => {
                    attempt += 1;
                    separator = format!("{DEFAULT_SEPARATOR} {attempt}");
                }
            }
        }
    }

    /// Replaces the source of `cell_num` and clears its outputs.
    pub fn apply_edit(&self, cell_num: usize, new_source: &str) -> Result<Notebook, NotebookError> {
        let mut nb = self.clone();
        let cell = nb.cell_mut(cell_num)?;
        cell.source = new_source.to_string();
        cell.outputs.clear();
        cell.execution_count = None;
        Ok(nb)
    }

    /// Inserts a code cell at `position` (default: append). Returns the new cell number.
    pub fn insert_cell(&self, position: Option<usize>, source: &str) -> Result<(Notebook, usize), NotebookError> {
        let n = self.cells.len();
        let at = position.unwrap_or(n + 1);
        if at < 1 || at > n + 1 {
            return Err(NotebookError::CellOutOfRange { cell_num: at, len: n });
        }
        let mut nb = self.clone();
        let mut cell = Cell::code(source);
        if nb.format_version >= (4, 5) {
            cell.id = Some(nb.fresh_id());
        }
        nb.cells.insert(at - 1, cell);
        nb.renumber();
        Ok((nb, at))
    }

    /// Records execution results on a cell.
    pub fn set_outputs(
        &mut self,
        cell_num: usize,
        outputs: Vec<Output>,
        execution_count: Option<u64>,
    ) -> Result<(), NotebookError> {
        let cell = self.cell_mut(cell_num)?;
        if cell.is_code() {
            cell.outputs = outputs;
            cell.execution_count = execution_count;
        }
        Ok(())
    }

    fn cell_mut(&mut self, cell_num: usize) -> Result<&mut Cell, NotebookError> {
        let len = self.cells.len();
        cell_num
            .checked_sub(1)
            .and_then(|i| self.cells.get_mut(i))
            .ok_or(NotebookError::CellOutOfRange { cell_num, len })
    }

    fn renumber(&mut self) {
        for (i, c) in self.cells.iter_mut().enumerate() {
            c.index = i + 1;
            if c.kind == CellKind::Markdown {
                c.outputs.clear();
                c.execution_count = None;
            }
        }
    }

    fn mark_origins(&mut self) {
        for c in &mut self.cells {
            c.origin = Some(c.index);
        }
    }

    fn fresh_id(&self) -> String {
        (1..)
            .map(|k| format!("nbfix-{k}"))
            .find(|id| !self.cells.iter().any(|c| c.id.as_deref() == Some(id.as_str())))
            .unwrap()
    }
}

impl Serialize for Notebook {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Notebook {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        Notebook::from_value(Value::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

fn byte_offset(text: &str, line: usize, column: usize) -> usize {
    if line == 0 {
        return 0;
    }
    let line_start: usize = text.split_inclusive('\n').take(line - 1).map(str::len).sum();
    (line_start + column.saturating_sub(1)).min(text.len())
}

fn join_source(v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Array(parts) => parts
            .iter()
            .map(|p| p.as_str().map(str::to_string).ok_or_else(|| "source lines must be strings".to_string()))
            .collect::<Result<Vec<_>, _>>()
            .map(|lines| lines.concat()),
        Value::Null => Ok(String::new()),
        _ => Err("`source` must be a string or a list of strings".into()),
    }
}

fn split_source(s: &str) -> Value {
    Value::Array(s.split_inclusive('\n').map(|l| Value::String(l.to_string())).collect())
}

fn parse_cell(raw: Value) -> Result<Cell, String> {
    let Value::Object(mut obj) = raw else {
        return Err("not an object".into());
    };
    let kind = match obj.get("cell_type").and_then(Value::as_str) {
        Some("code") => CellKind::Code,
        Some("markdown") => CellKind::Markdown,
        Some(other) => return Err(format!("unsupported cell_type `{other}`")),
        None => return Err("missing `cell_type`".into()),
    };
    let source = join_source(obj.get("source").unwrap_or(&Value::Null))?;
    let metadata = match obj.remove("metadata") {
        Some(Value::Object(m)) => m,
        _ => Map::new(),
    };
    let id = obj.get("id").and_then(Value::as_str).map(str::to_string);
    let mut cell = Cell::new(kind, source);
    cell.metadata = metadata;
    cell.id = id;
    if kind == CellKind::Code {
        cell.execution_count = match obj.get("execution_count") {
            None | Some(Value::Null) => None,
            Some(v) => Some(v.as_u64().ok_or("`execution_count` must be a non-negative integer or null")?),
        };
        if let Some(Value::Array(outs)) = obj.remove("outputs") {
            cell.outputs = outs.into_iter().map(parse_output).collect();
        }
    }
    Ok(cell)
}

fn parse_output(v: Value) -> Output {
    let text = |v: Option<&Value>| v.and_then(|t| join_source(t).ok());
    match v.get("output_type").and_then(Value::as_str) {
        Some("stream") => {
            if let (Some(name), Some(t)) = (v.get("name").and_then(Value::as_str), text(v.get("text"))) {
                return Output::Stream { name: name.to_string(), text: t };
            }
        }
        Some("execute_result") => {
            let data = v.get("data").and_then(Value::as_object);
            let only_plain = data.is_some_and(|d| d.len() == 1)
                && v.get("metadata").and_then(Value::as_object).is_none_or(|m| m.is_empty());
            if let (true, Some(t)) = (only_plain, text(data.and_then(|d| d.get("text/plain")))) {
                return Output::Result { execution_count: v.get("execution_count").and_then(Value::as_u64), text: t };
            }
        }
        Some("error") => {
            let tb: Option<Vec<String>> = v
                .get("traceback")
                .and_then(Value::as_array)
                .and_then(|a| a.iter().map(|l| l.as_str().map(str::to_string)).collect());
            if let (Some(ename), Some(evalue), Some(traceback)) =
                (v.get("ename").and_then(Value::as_str), v.get("evalue").and_then(Value::as_str), tb)
            {
                return Output::Error { ename: ename.into(), evalue: evalue.into(), traceback };
            }
        }
        _ => {}
    }
    Output::Other(v)
}

fn output_to_value(o: &Output) -> Value {
    match o {
        Output::Stream { name, text } => json!({"output_type": "stream", "name": name, "text": split_source(text)}),
        Output::Result { execution_count, text } => json!({
            "output_type": "execute_result",
            "execution_count": execution_count,
            "data": {"text/plain": split_source(text)},
            "metadata": {},
        }),
        Output::Error { ename, evalue, traceback } => json!({
            "output_type": "error",
            "ename": ename,
            "evalue": evalue,
            "traceback": traceback,
        }),
        Output::Other(v) => v.clone(),
    }
}

fn cell_to_value(c: &Cell, minor: u64) -> Value {
    let mut obj = Map::new();
    obj.insert("cell_type".into(), json!(c.kind));
    obj.insert("metadata".into(), Value::Object(c.metadata.clone()));
    obj.insert("source".into(), split_source(&c.source));
    if let Some(id) = &c.id {
        if minor >= 5 {
            obj.insert("id".into(), json!(id));
        }
    }
    if c.kind == CellKind::Code {
        obj.insert("execution_count".into(), json!(c.execution_count));
        obj.insert("outputs".into(), Value::Array(c.outputs.iter().map(output_to_value).collect()));
    }
    Value::Object(obj)
}
