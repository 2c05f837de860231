//! Test-model suites: parsing, linking and structural validation.
//!
//! A suite is a set of directed models. Vertices are verification points,
//! edges are stimuli. Vertices sharing a `sharedState` label are linked
//! across models: visiting one lets the walk continue from any other.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::guard::{self, Expr, Stmt, SyntaxError};

/// Suite-wide vertex index (suite declaration order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VertexKey(pub usize);

/// Suite-wide edge index (suite declaration order).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeKey(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ElementKey {
    Vertex(VertexKey),
    Edge(EdgeKey),
}

/// `model/element` reference as written in stop specs and CLI flags.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ElementRef {
    pub model: String,
    pub element: String,
}

impl ElementRef {
    pub fn new(model: &str, element: &str) -> Self {
        Self {
            model: model.to_string(),
            element: element.to_string(),
        }
    }

    pub fn parse(text: &str) -> Option<Self> {
        let (model, element) = text.trim().split_once('/')?;
        if model.is_empty() || element.is_empty() || element.contains('/') {
            return None;
        }
        Some(Self::new(model, element))
    }
}

impl fmt::Display for ElementRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.model, self.element)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Vertex {
    pub id: String,
    pub name: String,
    pub shared_state: Option<String>,
    pub requirements: BTreeSet<String>,
}

#[derive(Debug, Clone)]
pub struct Guard {
    pub text: String,
    pub expr: Expr,
}

// Source spelling is not semantic.
impl PartialEq for Guard {
    fn eq(&self, other: &Self) -> bool {
        self.expr == other.expr
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub id: String,
    pub name: String,
    pub source: String,
    pub target: String,
    pub guard: Option<Guard>,
    pub actions: Vec<Stmt>,
    pub weight: Option<f64>,
    pub dependency: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub id: String,
    pub name: String,
    pub init_actions: Vec<Stmt>,
    pub vertices: Vec<Vertex>,
    pub edges: Vec<Edge>,
}

/// A linked, validated suite. Immutable after parsing.
#[derive(Debug, Clone)]
pub struct Suite {
    models: Vec<Model>,
    entry: VertexKey,
    requirements: BTreeSet<String>,
    // (model index, vertex index within model)
    vertex_locs: Vec<(usize, usize)>,
    edge_locs: Vec<(usize, usize)>,
    vertex_base: Vec<usize>,
    edge_base: Vec<usize>,
    edge_ends: Vec<(VertexKey, VertexKey)>,
    out_edges: Vec<Vec<EdgeKey>>,
    shared: BTreeMap<String, Vec<VertexKey>>,
    model_index: HashMap<String, usize>,
}

impl PartialEq for Suite {
    fn eq(&self, other: &Self) -> bool {
        self.models == other.models && self.entry == other.entry
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("malformed suite document: {0}")]
    Malformed(String),
    #[error("duplicate id `{id}` in {scope}")]
    DuplicateId { scope: String, id: String },
    #[error("dangling edge endpoint: edge `{model}/{edge}` references unknown vertex `{vertex}`")]
    DanglingEndpoint {
        model: String,
        edge: String,
        vertex: String,
    },
    #[error("unknown entry element `{0}`")]
    UnknownEntry(ElementRef),
    #[error("`{model}/{element}`: {message}")]
    OutOfRange {
        model: String,
        element: String,
        message: String,
    },
    #[error("`{model}/{element}`: {message}")]
    Invalid {
        model: String,
        element: String,
        message: String,
    },
    #[error("`{model}/{element}`: invalid {what} `{text}`: {source}")]
    Expression {
        model: String,
        element: String,
        what: &'static str,
        text: String,
        source: Box<SyntaxError>,
    },
}

impl ModelError {
    /// `(model-id, element-id)` the error points at, when it has one.
    pub fn location(&self) -> Option<(String, String)> {
        match self {
            ModelError::Malformed(_) => None,
            ModelError::DuplicateId { scope, id } => Some((scope.clone(), id.clone())),
            ModelError::DanglingEndpoint { model, edge, .. } => Some((model.clone(), edge.clone())),
            ModelError::UnknownEntry(r) => Some((r.model.clone(), r.element.clone())),
            ModelError::OutOfRange { model, element, .. }
            | ModelError::Invalid { model, element, .. }
            | ModelError::Expression { model, element, .. } => {
                Some((model.clone(), element.clone()))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Severity {
    Error,
    Warning,
}

impl fmt::Display for Severity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Severity::Error => "error",
            Severity::Warning => "warning",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: &'static str,
    pub model: String,
    pub element: String,
    pub message: String,
}

impl Diagnostic {
    pub fn from_error(err: &ModelError) -> Self {
        let (model, element) = err.location().unwrap_or_default();
        Diagnostic {
            severity: Severity::Error,
            code: match err {
                ModelError::Malformed(_) => "malformed",
                ModelError::DuplicateId { .. } => "duplicate-id",
                ModelError::DanglingEndpoint { .. } => "dangling-endpoint",
                ModelError::UnknownEntry(_) => "unknown-entry",
                ModelError::OutOfRange { .. } => "out-of-range",
                ModelError::Invalid { .. } => "invalid",
                ModelError::Expression { .. } => "expression",
            },
            model,
            element,
            message: err.to_string(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}] {}/{}: {}",
            self.severity, self.code, self.model, self.element, self.message
        )
    }
}

// Wire format.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    entry: RawEntry,
    models: Vec<RawModel>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    model: String,
    vertex: String,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawModel {
    id: String,
    name: String,
    #[serde(default)]
    init_actions: Vec<String>,
    vertices: Vec<RawVertex>,
    #[serde(default)]
    edges: Vec<RawEdge>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawVertex {
    id: String,
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    shared_state: Option<String>,
    #[serde(default)]
    requirements: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    id: String,
    name: String,
    source: String,
    target: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    guard: Option<String>,
    #[serde(default)]
    actions: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dependency: Option<i64>,
}

fn is_token(s: &str) -> bool {
    !s.is_empty() && !s.chars().any(char::is_whitespace)
}

fn parse_stmts(model: &str, element: &str, texts: &[String]) -> Result<Vec<Stmt>, ModelError> {
    texts
        .iter()
        .map(|t| {
            guard::parse_stmt(t).map_err(|source| ModelError::Expression {
                model: model.to_string(),
                element: element.to_string(),
                what: "action",
                text: t.clone(),
                source: Box::new(source),
            })
        })
        .collect()
}

/// Parses and links a suite document.
pub fn parse_suite(document: &str) -> Result<Suite, ModelError> {
    let raw: RawSuite =
        serde_json::from_str(document).map_err(|e| ModelError::Malformed(e.to_string()))?;
    let mut seen_models = BTreeSet::new();
    let mut models = Vec::with_capacity(raw.models.len());
    for rm in raw.models {
        if !is_token(&rm.id) {
            return Err(ModelError::Invalid {
                model: rm.id.clone(),
                element: String::new(),
                message: "model id must be a non-empty token".into(),
            });
        }
        if !seen_models.insert(rm.id.clone()) {
            return Err(ModelError::DuplicateId {
                scope: "suite".into(),
                id: rm.id,
            });
        }
        models.push(link_model(rm)?);
    }
    Suite::from_models(
        models,
        &ElementRef::new(&raw.entry.model, &raw.entry.vertex),
    )
}

fn link_model(rm: RawModel) -> Result<Model, ModelError> {
    let mid = rm.id.clone();
    let mut ids = BTreeSet::new();
    let mut vertices = Vec::with_capacity(rm.vertices.len());
    for rv in rm.vertices {
        if !is_token(&rv.id) || rv.id.contains('/') {
            return Err(ModelError::Invalid {
                model: mid,
                element: rv.id,
                message: "vertex id must be a non-empty token without `/`".into(),
            });
        }
        if !ids.insert(rv.id.clone()) {
            return Err(ModelError::DuplicateId {
                scope: mid,
                id: rv.id,
            });
        }
        if rv.name.trim().is_empty() {
            return Err(ModelError::Invalid {
                model: mid,
                element: rv.id,
                message: "vertex name must be non-empty".into(),
            });
        }
        if let Some(bad) = rv.requirements.iter().find(|r| !is_token(r)) {
            return Err(ModelError::Invalid {
                model: mid,
                element: rv.id,
                message: format!("requirement tag {bad:?} is not a token"),
            });
        }
        if rv.shared_state.as_deref().is_some_and(|s| !is_token(s)) {
            return Err(ModelError::Invalid {
                model: mid,
                element: rv.id,
                message: "shared state label must be a non-empty token".into(),
            });
        }
        vertices.push(Vertex {
            id: rv.id,
            name: rv.name,
            shared_state: rv.shared_state,
            requirements: rv.requirements.into_iter().collect(),
        });
    }
    let vertex_ids: BTreeSet<&str> = vertices.iter().map(|v| v.id.as_str()).collect();
    let mut edges = Vec::with_capacity(rm.edges.len());
    for re in rm.edges {
        if !is_token(&re.id) || re.id.contains('/') {
            return Err(ModelError::Invalid {
                model: mid,
                element: re.id,
                message: "edge id must be a non-empty token without `/`".into(),
            });
        }
        if !ids.insert(re.id.clone()) {
            return Err(ModelError::DuplicateId {
                scope: mid,
                id: re.id,
            });
        }
        if re.name.trim().is_empty() {
            return Err(ModelError::Invalid {
                model: mid,
                element: re.id,
                message: "edge name must be non-empty".into(),
            });
        }
        for end in [&re.source, &re.target] {
            if !vertex_ids.contains(end.as_str()) {
                return Err(ModelError::DanglingEndpoint {
                    model: mid,
                    edge: re.id.clone(),
                    vertex: end.clone(),
                });
            }
        }
        if let Some(w) = re.weight {
            if !(w > 0.0 && w <= 1.0) {
                return Err(ModelError::OutOfRange {
                    model: mid,
                    element: re.id,
                    message: format!("weight {w} outside (0, 1]"),
                });
            }
        }
        let dependency = match re.dependency {
            Some(d) if (0..=100).contains(&d) => Some(d as u8),
            Some(d) => {
                return Err(ModelError::OutOfRange {
                    model: mid,
                    element: re.id,
                    message: format!("dependency {d} outside [0, 100]"),
                })
            }
            None => None,
        };
        let guard = match re.guard {
            Some(text) => {
                let expr = guard::parse_guard(&text).map_err(|source| ModelError::Expression {
                    model: mid.clone(),
                    element: re.id.clone(),
                    what: "guard",
                    text: text.clone(),
                    source: Box::new(source),
                })?;
                Some(Guard { text, expr })
            }
            None => None,
        };
        let actions = parse_stmts(&mid, &re.id, &re.actions)?;
        edges.push(Edge {
            id: re.id,
            name: re.name,
            source: re.source,
            target: re.target,
            guard,
            actions,
            weight: re.weight,
            dependency,
        });
    }
    let init_actions = parse_stmts(&mid, "", &rm.init_actions)?;
    Ok(Model {
        id: rm.id,
        name: rm.name,
        init_actions,
        vertices,
        edges,
    })
}

impl Suite {
    /// Links models that already passed the per-model checks in `link_model`.
    pub(crate) fn from_models(models: Vec<Model>, entry: &ElementRef) -> Result<Self, ModelError> {
        let mut vertex_locs = Vec::new();
        let mut edge_locs = Vec::new();
        let mut vertex_base = Vec::new();
        let mut edge_base = Vec::new();
        let mut model_index = HashMap::new();
        for (mi, m) in models.iter().enumerate() {
            if model_index.insert(m.id.clone(), mi).is_some() {
                return Err(ModelError::DuplicateId {
                    scope: "suite".into(),
                    id: m.id.clone(),
                });
            }
            vertex_base.push(vertex_locs.len());
            edge_base.push(edge_locs.len());
            vertex_locs.extend((0..m.vertices.len()).map(|vi| (mi, vi)));
            edge_locs.extend((0..m.edges.len()).map(|ei| (mi, ei)));
        }
        let mut out_edges = vec![Vec::new(); vertex_locs.len()];
        let mut edge_ends = Vec::with_capacity(edge_locs.len());
        for (mi, m) in models.iter().enumerate() {
            let local: HashMap<&str, usize> = m
                .vertices
                .iter()
                .enumerate()
                .map(|(i, v)| (v.id.as_str(), i))
                .collect();
            for e in &m.edges {
                let resolve = |id: &str| {
                    local
                        .get(id)
                        .map(|&i| VertexKey(vertex_base[mi] + i))
                        .ok_or_else(|| ModelError::DanglingEndpoint {
                            model: m.id.clone(),
                            edge: e.id.clone(),
                            vertex: id.to_string(),
                        })
                };
                let ends = (resolve(&e.source)?, resolve(&e.target)?);
                out_edges[ends.0 .0].push(EdgeKey(edge_ends.len()));
                edge_ends.push(ends);
            }
        }
        let mut shared: BTreeMap<String, Vec<VertexKey>> = BTreeMap::new();
        let mut requirements = BTreeSet::new();
        for (k, &(mi, vi)) in vertex_locs.iter().enumerate() {
            let v = &models[mi].vertices[vi];
            if let Some(label) = &v.shared_state {
                shared.entry(label.clone()).or_default().push(VertexKey(k));
            }
            requirements.extend(v.requirements.iter().cloned());
        }
        let mut suite = Suite {
            models,
            entry: VertexKey(0),
            requirements,
            vertex_locs,
            edge_locs,
            vertex_base,
            edge_base,
            edge_ends,
            out_edges,
            shared,
            model_index,
        };
        suite.entry = match suite.resolve(entry) {
            Some(ElementKey::Vertex(v)) => v,
            _ => return Err(ModelError::UnknownEntry(entry.clone())),
        };
        Ok(suite)
    }

    pub fn models(&self) -> &[Model] {
        &self.models
    }

    pub fn model(&self, id: &str) -> Option<&Model> {
        self.model_index.get(id).map(|&i| &self.models[i])
    }

    pub fn entry(&self) -> VertexKey {
        self.entry
    }

    /// Union of all vertex requirement tags.
    pub fn requirements_universe(&self) -> &BTreeSet<String> {
        &self.requirements
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_locs.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_locs.len()
    }

    pub fn vertex_keys(&self) -> impl Iterator<Item = VertexKey> {
        (0..self.vertex_locs.len()).map(VertexKey)
    }

    pub fn edge_keys(&self) -> impl Iterator<Item = EdgeKey> {
        (0..self.edge_locs.len()).map(EdgeKey)
    }

    pub fn vertex(&self, key: VertexKey) -> &Vertex {
        let (mi, vi) = self.vertex_locs[key.0];
        &self.models[mi].vertices[vi]
    }

    pub fn edge(&self, key: EdgeKey) -> &Edge {
        let (mi, ei) = self.edge_locs[key.0];
        &self.models[mi].edges[ei]
    }

    pub fn vertex_model(&self, key: VertexKey) -> &Model {
        &self.models[self.vertex_locs[key.0].0]
    }

    pub fn edge_model(&self, key: EdgeKey) -> &Model {
        &self.models[self.edge_locs[key.0].0]
    }

    pub fn model_of_vertex(&self, key: VertexKey) -> usize {
        self.vertex_locs[key.0].0
    }

    pub fn edge_source(&self, key: EdgeKey) -> VertexKey {
        self.edge_ends[key.0].0
    }

    pub fn edge_target(&self, key: EdgeKey) -> VertexKey {
        self.edge_ends[key.0].1
    }

    /// Out-edges in model declaration order.
    pub fn out_edges(&self, key: VertexKey) -> &[EdgeKey] {
        &self.out_edges[key.0]
    }

    /// Same-label vertices (including `key` itself); empty if unlabeled.
    pub fn shared_peers(&self, key: VertexKey) -> &[VertexKey] {
        self.vertex(key)
            .shared_state
            .as_ref()
            .and_then(|l| self.shared.get(l))
            .map_or(&[], Vec::as_slice)
    }

    pub fn shared_labels(&self) -> impl Iterator<Item = (&str, &[VertexKey])> {
        self.shared.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn resolve(&self, r: &ElementRef) -> Option<ElementKey> {
        let &mi = self.model_index.get(&r.model)?;
        let m = &self.models[mi];
        if let Some(vi) = m.vertices.iter().position(|v| v.id == r.element) {
            return Some(ElementKey::Vertex(VertexKey(self.vertex_base[mi] + vi)));
        }
        m.edges
            .iter()
            .position(|e| e.id == r.element)
            .map(|ei| ElementKey::Edge(EdgeKey(self.edge_base[mi] + ei)))
    }

    pub fn vertex_ref(&self, key: VertexKey) -> ElementRef {
        ElementRef::new(&self.vertex_model(key).id, &self.vertex(key).id)
    }

    pub fn edge_ref(&self, key: EdgeKey) -> ElementRef {
        ElementRef::new(&self.edge_model(key).id, &self.edge(key).id)
    }

    /// Serializes back to the suite document format.
    pub fn to_json(&self) -> String {
        let entry = self.vertex_ref(self.entry);
        let raw = RawSuite {
            entry: RawEntry {
                model: entry.model,
                vertex: entry.element,
            },
            models: self
                .models
                .iter()
                .map(|m| RawModel {
                    id: m.id.clone(),
                    name: m.name.clone(),
                    init_actions: m.init_actions.iter().map(ToString::to_string).collect(),
                    vertices: m
                        .vertices
                        .iter()
                        .map(|v| RawVertex {
                            id: v.id.clone(),
                            name: v.name.clone(),
                            shared_state: v.shared_state.clone(),
                            requirements: v.requirements.iter().cloned().collect(),
                        })
                        .collect(),
                    edges: m
                        .edges
                        .iter()
                        .map(|e| RawEdge {
                            id: e.id.clone(),
                            name: e.name.clone(),
                            source: e.source.clone(),
                            target: e.target.clone(),
                            guard: e.guard.as_ref().map(|g| g.expr.to_string()),
                            actions: e.actions.iter().map(ToString::to_string).collect(),
                            weight: e.weight,
                            dependency: e.dependency.map(i64::from),
                        })
                        .collect(),
                })
                .collect(),
        };
        serde_json::to_string_pretty(&raw).expect("suite serialization cannot fail")
    }

    /// Vertices reachable from `from` following edges (guards ignored) and
    /// shared-state jumps.
    pub fn reachable_from(&self, from: VertexKey) -> Vec<bool> {
        let mut seen = vec![false; self.vertex_count()];
        let mut queue = VecDeque::new();
        seen[from.0] = true;
        queue.push_back(from);
        while let Some(v) = queue.pop_front() {
            let next = self
                .out_edges(v)
                .iter()
                .map(|&e| self.edge_target(e))
                .chain(self.shared_peers(v).iter().copied());
            for w in next {
                if !seen[w.0] {
                    seen[w.0] = true;
                    queue.push_back(w);
                }
            }
        }
        seen
    }
}

/// All vertices suite-wide whose shared state equals `label`, in suite order.
pub fn shared_group(suite: &Suite, label: &str) -> Vec<ElementRef> {
    suite
        .shared
        .get(label)
        .map(|keys| keys.iter().map(|&k| suite.vertex_ref(k)).collect())
        .unwrap_or_default()
}

/// Structural warnings. Deterministic, sorted by (model, element, code).
pub fn validate_suite(suite: &Suite) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut warn = |model: &str, element: &str, code: &'static str, message: String| {
        out.push(Diagnostic {
            severity: Severity::Warning,
            code,
            model: model.to_string(),
            element: element.to_string(),
            message,
        })
    };
    let reachable = suite.reachable_from(suite.entry());
    for key in suite.vertex_keys() {
        let v = suite.vertex(key);
        let mid = &suite.vertex_model(key).id;
        if !reachable[key.0] {
            warn(
                mid,
                &v.id,
                "unreachable-vertex",
                format!("vertex `{}` is unreachable from the entry", v.name),
            );
        }
        if suite.out_edges(key).is_empty() && v.shared_state.is_none() {
            warn(
                mid,
                &v.id,
                "dead-end-vertex",
                format!("dead-end vertex `{}` has no out-edges", v.name),
            );
        }
        if suite.shared_peers(key).len() == 1 {
            warn(
                mid,
                &v.id,
                "singleton-shared-group",
                format!(
                    "shared state `{}` is used by this vertex only",
                    v.shared_state.as_deref().unwrap_or_default()
                ),
            );
        }
        if !v.name.starts_with("n_") {
            warn(
                mid,
                &v.id,
                "vertex-name-prefix",
                format!("vertex name `{}` lacks the `n_` prefix", v.name),
            );
        }
    }
    for key in suite.edge_keys() {
        let e = suite.edge(key);
        if !e.name.starts_with("e_") {
            warn(
                &suite.edge_model(key).id,
                &e.id,
                "edge-name-prefix",
                format!("edge name `{}` lacks the `e_` prefix", e.name),
            );
        }
    }
    out.sort_by(|a, b| (&a.model, &a.element, a.code).cmp(&(&b.model, &b.element, b.code)));
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) const LINE: &str = r#"{
        "entry": {"model": "m", "vertex": "a"},
        "models": [{"id": "m", "name": "line",
            "vertices": [
                {"id": "a", "name": "n_a"}, {"id": "b", "name": "n_b"}, {"id": "c", "name": "n_c"}],
            "edges": [
                {"id": "ab", "name": "e_ab", "source": "a", "target": "b"},
                {"id": "bc", "name": "e_bc", "source": "b", "target": "c"}]}]}"#;

    #[test]
    fn minimal_suite() {
        let doc = r#"{"entry": {"model": "m", "vertex": "v1"},
            "models": [{"id": "m", "name": "M",
                "vertices": [{"id": "v1", "name": "n_one"}, {"id": "v2", "name": "n_two"}],
                "edges": [{"id": "e1", "name": "e_go", "source": "v1", "target": "v2"}]}]}"#;
        let suite = parse_suite(doc).unwrap();
        assert_eq!(suite.vertex_count(), 2);
        assert_eq!(suite.edge_count(), 1);
        assert!(suite.requirements_universe().is_empty());
        assert_eq!(suite.entry(), VertexKey(0));
    }

    #[test]
    fn login_names_are_exposed_verbatim() {
        let doc = r#"{"entry": {"model": "login", "vertex": "start"},
            "models": [{"id": "login", "name": "Login",
                "vertices": [
                    {"id": "start", "name": "n_verify_in_login_page", "requirements": ["R1.1"]},
                    {"id": "forgot", "name": "n_verify_in_forgot_password_page", "requirements": ["R1.2"]},
                    {"id": "dash", "name": "n_verify_in_dashboard"}],
                "edges": [
                    {"id": "e1", "name": "e_click_signin", "source": "start", "target": "forgot"},
                    {"id": "e2", "name": "e_valid_login", "source": "start", "target": "dash"}]}]}"#;
        let suite = parse_suite(doc).unwrap();
        let m = suite.model("login").unwrap();
        assert_eq!(m.vertices[1].name, "n_verify_in_forgot_password_page");
        assert_eq!(m.edges[0].name, "e_click_signin");
        assert_eq!(m.edges[1].name, "e_valid_login");
        assert_eq!(
            suite.requirements_universe().iter().collect::<Vec<_>>(),
            ["R1.1", "R1.2"]
        );
    }

    #[test]
    fn dangling_endpoint_names_the_edge() {
        let doc = LINE.replace(r#""target": "c""#, r#""target": "zz""#);
        let err = parse_suite(&doc).unwrap_err();
        assert_eq!(
            err,
            ModelError::DanglingEndpoint {
                model: "m".into(),
                edge: "bc".into(),
                vertex: "zz".into()
            }
        );
        assert!(err.to_string().contains("dangling edge endpoint"));
    }

    #[test]
    fn rejects_bad_documents() {
        let unknown = LINE.replace(r#""name": "line","#, r#""name": "line", "colour": 1,"#);
        let err = parse_suite(&unknown).unwrap_err();
        assert!(err.to_string().contains("colour"), "{err}");

        let dup = LINE.replace(r#""id": "c""#, r#""id": "b""#);
        assert!(matches!(
            parse_suite(&dup),
            Err(ModelError::DuplicateId { .. })
        ));

        let dup_across_kinds = LINE.replace(r#""id": "bc""#, r#""id": "b""#);
        assert!(matches!(
            parse_suite(&dup_across_kinds),
            Err(ModelError::DuplicateId { .. })
        ));

        let entry = LINE.replace(r#""vertex": "a""#, r#""vertex": "q""#);
        assert!(matches!(
            parse_suite(&entry),
            Err(ModelError::UnknownEntry(_))
        ));

        let weight = LINE.replace(r#""target": "b"}"#, r#""target": "b", "weight": 1.5}"#);
        assert!(matches!(
            parse_suite(&weight),
            Err(ModelError::OutOfRange { .. })
        ));
        let weight = LINE.replace(r#""target": "b"}"#, r#""target": "b", "weight": 0}"#);
        assert!(matches!(
            parse_suite(&weight),
            Err(ModelError::OutOfRange { .. })
        ));

        let dep = LINE.replace(r#""target": "b"}"#, r#""target": "b", "dependency": 101}"#);
        assert!(matches!(
            parse_suite(&dep),
            Err(ModelError::OutOfRange { .. })
        ));

        let guard = LINE.replace(r#""target": "b"}"#, r#""target": "b", "guard": "x >"}"#);
        let err = parse_suite(&guard).unwrap_err();
        assert_eq!(err.location(), Some(("m".into(), "ab".into())));

        assert!(matches!(parse_suite("{"), Err(ModelError::Malformed(_))));
    }

    #[test]
    fn strongly_connected_model_has_no_diagnostics() {
        let doc = LINE.replace(
            r#"{"id": "bc", "name": "e_bc", "source": "b", "target": "c"}"#,
            r#"{"id": "bc", "name": "e_bc", "source": "b", "target": "c"},
               {"id": "ca", "name": "e_ca", "source": "c", "target": "a"}"#,
        );
        assert_eq!(validate_suite(&parse_suite(&doc).unwrap()), vec![]);
    }

    #[test]
    fn dead_end_is_a_warning() {
        let diags = validate_suite(&parse_suite(LINE).unwrap());
        assert_eq!(diags.len(), 1);
        assert_eq!(diags[0].code, "dead-end-vertex");
        assert_eq!(diags[0].severity, Severity::Warning);
        assert_eq!(
            (diags[0].model.as_str(), diags[0].element.as_str()),
            ("m", "c")
        );
    }

    pub(crate) const TWO_MODELS: &str = r#"{
        "entry": {"model": "login", "vertex": "l0"},
        "models": [
          {"id": "login", "name": "Login",
           "vertices": [{"id": "l0", "name": "n_login"}, {"id": "l1", "name": "n_home", "sharedState": "HOME"}],
           "edges": [{"id": "le", "name": "e_valid_login", "source": "l0", "target": "l1"},
                     {"id": "lb", "name": "e_logout", "source": "l1", "target": "l0"}]},
          {"id": "dash", "name": "Dashboard",
           "vertices": [{"id": "d0", "name": "n_dash", "sharedState": "HOME"}, {"id": "d1", "name": "n_projects"}],
           "edges": [{"id": "de", "name": "e_projects", "source": "d0", "target": "d1"},
                     {"id": "db", "name": "e_back", "source": "d1", "target": "d0"}]}]}"#;

    #[test]
    fn shared_label_links_models_for_reachability() {
        let suite = parse_suite(TWO_MODELS).unwrap();
        let diags = validate_suite(&suite);
        assert!(
            diags.iter().all(|d| d.code != "unreachable-vertex"),
            "{diags:?}"
        );
        // oracle: brute-force closure over the jump-augmented adjacency matrix
        let n = suite.vertex_count();
        let mut adj = vec![vec![false; n]; n];
        for e in suite.edge_keys() {
            adj[suite.edge_source(e).0][suite.edge_target(e).0] = true;
        }
        for a in suite.vertex_keys() {
            for b in suite.vertex_keys() {
                let (la, lb) = (&suite.vertex(a).shared_state, &suite.vertex(b).shared_state);
                if la.is_some() && la == lb {
                    adj[a.0][b.0] = true;
                }
            }
        }
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    if adj[i][k] && adj[k][j] {
                        adj[i][j] = true;
                    }
                }
            }
        }
        let reach = suite.reachable_from(suite.entry());
        for v in 0..n {
            assert_eq!(reach[v], v == suite.entry().0 || adj[suite.entry().0][v]);
        }
    }

    #[test]
    fn unreachable_and_singleton_and_prefix_warnings() {
        let doc = r#"{"entry": {"model": "m", "vertex": "a"},
            "models": [{"id": "m", "name": "M",
                "vertices": [{"id": "a", "name": "n_a", "sharedState": "S"},
                             {"id": "b", "name": "verify_b"}],
                "edges": [{"id": "ba", "name": "e_ba", "source": "b", "target": "a"}]}]}"#;
        let diags = validate_suite(&parse_suite(doc).unwrap());
        let codes: Vec<_> = diags.iter().map(|d| (d.element.as_str(), d.code)).collect();
        assert_eq!(
            codes,
            [
                ("a", "singleton-shared-group"),
                ("b", "unreachable-vertex"),
                ("b", "vertex-name-prefix"),
            ]
        );
    }

    #[test]
    fn shared_groups() {
        let suite = parse_suite(TWO_MODELS).unwrap();
        assert_eq!(
            shared_group(&suite, "HOME"),
            vec![
                ElementRef::new("login", "l1"),
                ElementRef::new("dash", "d0")
            ]
        );
        assert!(shared_group(&suite, "NOPE").is_empty());

        let doc = TWO_MODELS.replace(
            r#""name": "n_projects""#,
            r#""name": "n_projects", "sharedState": "HOME""#,
        );
        let suite = parse_suite(&doc).unwrap();
        // oracle: filter every vertex by label
        let expected: Vec<_> = suite
            .vertex_keys()
            .filter(|&k| suite.vertex(k).shared_state.as_deref() == Some("HOME"))
            .map(|k| suite.vertex_ref(k))
            .collect();
        assert_eq!(shared_group(&suite, "HOME"), expected);
        assert_eq!(expected.len(), 3);
        assert_eq!(
            expected[1..],
            [ElementRef::new("dash", "d0"), ElementRef::new("dash", "d1")]
        );
    }

    #[test]
    fn element_refs() {
        assert_eq!(
            ElementRef::parse("login/v2"),
            Some(ElementRef::new("login", "v2"))
        );
        assert_eq!(ElementRef::parse("login"), None);
        assert_eq!(ElementRef::parse("/v"), None);
        let suite = parse_suite(TWO_MODELS).unwrap();
        assert_eq!(
            suite.resolve(&ElementRef::new("dash", "db")),
            Some(ElementKey::Edge(EdgeKey(3)))
        );
        assert_eq!(
            suite.resolve(&ElementRef::new("dash", "d1")),
            Some(ElementKey::Vertex(VertexKey(3)))
        );
        assert_eq!(suite.resolve(&ElementRef::new("dash", "zz")), None);
    }

    prop_compose! {
        fn arb_model(idx: usize)(
            n in 1usize..5,
            edges in prop::collection::vec((0usize..5, 0usize..5, prop::option::of(1u32..=100), prop::option::of(0i64..=100), any::<bool>()), 0..6),
            tags in prop::collection::vec(prop::option::of("R[0-9]"), 5),
            shared in prop::collection::vec(prop::option::of("[AB]"), 5),
        ) -> Model {
            let vertices: Vec<Vertex> = (0..n).map(|i| Vertex {
                id: format!("v{i}"),
                name: format!("n_{idx}_{i}"),
                shared_state: shared[i].clone(),
                requirements: tags[i].iter().cloned().collect(),
            }).collect();
            let edges = edges.into_iter().enumerate().map(|(j, (s, t, w, d, g))| Edge {
                id: format!("e{j}"),
                name: format!("e_{idx}_{j}"),
                source: format!("v{}", s % n),
                target: format!("v{}", t % n),
                guard: g.then(|| Guard { text: "x < 3".into(), expr: guard::parse_guard("x < 3").unwrap() }),
                actions: if g { vec![guard::parse_stmt("x = x + 1").unwrap()] } else { vec![] },
                weight: w.map(|w| f64::from(w) / 100.0),
                dependency: d.map(|d| d as u8),
            }).collect();
            Model {
                id: format!("m{idx}"),
                name: format!("Model {idx}"),
                init_actions: vec![guard::parse_stmt("x = 0").unwrap()],
                vertices,
                edges,
            }
        }
    }

    fn arb_suite() -> impl Strategy<Value = Suite> {
        (arb_model(0), arb_model(1)).prop_map(|(a, b)| {
            Suite::from_models(vec![a, b], &ElementRef::new("m0", "v0")).unwrap()
        })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_round_trips(suite in arb_suite()) {
            let reparsed = parse_suite(&suite.to_json()).unwrap();
            prop_assert_eq!(&reparsed, &suite);
            let total: usize = suite.models().iter().map(|m| m.vertices.len()).sum();
            let distinct: BTreeSet<_> = suite.vertex_keys().map(|k| suite.vertex_ref(k)).collect();
            prop_assert_eq!(distinct.len(), total);
        }

        #[test]
        fn validation_is_deterministic(suite in arb_suite()) {
            let a = validate_suite(&suite);
            prop_assert_eq!(&a, &validate_suite(&suite));
            let mut sorted = a.clone();
            sorted.sort_by(|x, y| (&x.model, &x.element, x.code).cmp(&(&y.model, &y.element, y.code)));
            prop_assert_eq!(a, sorted);
        }
    }
}
