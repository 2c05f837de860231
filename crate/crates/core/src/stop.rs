//! Stop conditions: the nine halting rules plus `and`/`or` composition.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::model::{EdgeKey, ElementKey, ElementRef, Suite, VertexKey};

#[derive(Debug, Clone, PartialEq)]
pub enum StopCondition {
    EdgeCoverage(f64),
    VertexCoverage(f64),
    RequirementCoverage(f64),
    DependencyEdgeCoverage(u8),
    ReachedVertex(ElementRef),
    ReachedEdge(ElementRef),
    TimeDuration(f64),
    Length(u64),
    Never,
    All(Vec<StopCondition>),
    Any(Vec<StopCondition>),
}

/// Distinct-visit sets plus multiplicity counters for one run.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CoverageState {
    pub visited_edges: BTreeSet<EdgeKey>,
    pub visited_vertices: BTreeSet<VertexKey>,
    pub visited_requirements: BTreeSet<String>,
    pub executed_edge_count: u64,
    pub executed_vertex_count: u64,
    pub last_step: Option<ElementKey>,
}

impl CoverageState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a vertex visit. `emitted` is false for a shared-state landing,
    /// which is counted but does not become the last step.
    pub fn visit_vertex(&mut self, suite: &Suite, key: VertexKey, emitted: bool) {
        self.visited_vertices.insert(key);
        self.visited_requirements
            .extend(suite.vertex(key).requirements.iter().cloned());
        self.executed_vertex_count += 1;
        if emitted {
            self.last_step = Some(ElementKey::Vertex(key));
        }
    }

    pub fn visit_edge(&mut self, key: EdgeKey) {
        self.visited_edges.insert(key);
        self.executed_edge_count += 1;
        self.last_step = Some(ElementKey::Edge(key));
    }
}

fn reaches_pct(covered: usize, total: usize, pct: f64) -> bool {
    if total == 0 {
        return true;
    }
    100.0 * covered as f64 >= pct * total as f64
}

pub fn is_fulfilled(
    cond: &StopCondition,
    cov: &CoverageState,
    suite: &Suite,
    elapsed_s: f64,
) -> bool {
    match cond {
        StopCondition::EdgeCoverage(pct) => {
            reaches_pct(cov.visited_edges.len(), suite.edge_count(), *pct)
        }
        StopCondition::VertexCoverage(pct) => {
            reaches_pct(cov.visited_vertices.len(), suite.vertex_count(), *pct)
        }
        StopCondition::RequirementCoverage(pct) => reaches_pct(
            cov.visited_requirements.len(),
            suite.requirements_universe().len(),
            *pct,
        ),
        StopCondition::DependencyEdgeCoverage(threshold) => suite
            .edge_keys()
            .filter(|&e| suite.edge(e).dependency.is_some_and(|d| d >= *threshold))
            .all(|e| cov.visited_edges.contains(&e)),
        StopCondition::ReachedVertex(r) | StopCondition::ReachedEdge(r) => {
            cov.last_step.is_some() && suite.resolve(r) == cov.last_step
        }
        StopCondition::TimeDuration(secs) => elapsed_s >= *secs,
        StopCondition::Length(pairs) => cov.executed_edge_count >= *pairs,
        StopCondition::Never => false,
        StopCondition::All(parts) => parts.iter().all(|c| is_fulfilled(c, cov, suite, elapsed_s)),
        StopCondition::Any(parts) => parts.iter().any(|c| is_fulfilled(c, cov, suite, elapsed_s)),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StopSpecError {
    #[error("stop spec syntax error at offset {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown stop condition `{0}`")]
    UnknownCondition(String),
    #[error("invalid argument for `{name}`: {message}")]
    Argument { name: String, message: String },
    #[error("stop condition references unknown {kind} `{reference}`")]
    UnknownReference {
        kind: &'static str,
        reference: ElementRef,
    },
}

impl StopCondition {
    /// Checks that every referenced element exists with the right kind.
    pub fn check_refs(&self, suite: &Suite) -> Result<(), StopSpecError> {
        match self {
            StopCondition::ReachedVertex(r) => match suite.resolve(r) {
                Some(ElementKey::Vertex(_)) => Ok(()),
                _ => Err(StopSpecError::UnknownReference {
                    kind: "vertex",
                    reference: r.clone(),
                }),
            },
            StopCondition::ReachedEdge(r) => match suite.resolve(r) {
                Some(ElementKey::Edge(_)) => Ok(()),
                _ => Err(StopSpecError::UnknownReference {
                    kind: "edge",
                    reference: r.clone(),
                }),
            },
            StopCondition::All(parts) | StopCondition::Any(parts) => {
                parts.iter().try_for_each(|p| p.check_refs(suite))
            }
            _ => Ok(()),
        }
    }

    /// True if some leaf is `reached_edge`, which can only hold right after
    /// an edge step.
    pub fn watches_edges(&self) -> bool {
        match self {
            StopCondition::ReachedEdge(_) => true,
            StopCondition::All(p) | StopCondition::Any(p) => p.iter().any(Self::watches_edges),
            _ => false,
        }
    }
}

impl fmt::Display for StopCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |f: &mut fmt::Formatter<'_>, parts: &[StopCondition], sep: &str| {
            for (i, p) in parts.iter().enumerate() {
                if i > 0 {
                    write!(f, " {sep} ")?;
                }
                if matches!(p, StopCondition::All(_) | StopCondition::Any(_)) {
                    write!(f, "({p})")?;
                } else {
                    write!(f, "{p}")?;
                }
            }
            Ok(())
        };
        match self {
            StopCondition::EdgeCoverage(p) => write!(f, "edge_coverage({p})"),
            StopCondition::VertexCoverage(p) => write!(f, "vertex_coverage({p})"),
            StopCondition::RequirementCoverage(p) => write!(f, "requirement_coverage({p})"),
            StopCondition::DependencyEdgeCoverage(t) => write!(f, "dependency_edge_coverage({t})"),
            StopCondition::ReachedVertex(r) => write!(f, "reached_vertex({r})"),
            StopCondition::ReachedEdge(r) => write!(f, "reached_edge({r})"),
            StopCondition::TimeDuration(s) => write!(f, "time({s})"),
            StopCondition::Length(n) => write!(f, "length({n})"),
            StopCondition::Never => f.write_str("never()"),
            StopCondition::All(parts) => join(f, parts, "and"),
            StopCondition::Any(parts) => join(f, parts, "or"),
        }
    }
}

struct SpecParser<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> SpecParser<'a> {
    fn skip_ws(&mut self) {
        while self.text[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.text[self.pos..]
                .chars()
                .next()
                .map_or(1, char::len_utf8);
        }
    }

    fn syntax(&self, message: impl Into<String>) -> StopSpecError {
        StopSpecError::Syntax {
            pos: self.pos,
            message: message.into(),
        }
    }

    fn word(&mut self) -> &'a str {
        self.skip_ws();
        let rest = &self.text[self.pos..];
        let len = rest
            .find(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
            .unwrap_or(rest.len());
        self.pos += len;
        &rest[..len]
    }

    fn keyword(&mut self, kw: &str) -> bool {
        let save = self.pos;
        if self.word() == kw {
            true
        } else {
            self.pos = save;
            false
        }
    }

    fn punct(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.text[self.pos..].starts_with(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn or(&mut self) -> Result<StopCondition, StopSpecError> {
        let mut parts = vec![self.and()?];
        while self.keyword("or") {
            parts.push(self.and()?);
        }
        Ok(flatten(parts, false))
    }

    fn and(&mut self) -> Result<StopCondition, StopSpecError> {
        let mut parts = vec![self.atom()?];
        while self.keyword("and") {
            parts.push(self.atom()?);
        }
        Ok(flatten(parts, true))
    }

    fn atom(&mut self) -> Result<StopCondition, StopSpecError> {
        if self.punct('(') {
            let inner = self.or()?;
            if !self.punct(')') {
                return Err(self.syntax("expected `)`"));
            }
            return Ok(inner);
        }
        let name = self.word();
        if name.is_empty() {
            return Err(self.syntax("expected a condition name"));
        }
        let arg = if self.punct('(') {
            let start = self.pos;
            let Some(len) = self.text[start..].find(')') else {
                return Err(self.syntax("unterminated argument list"));
            };
            self.pos = start + len + 1;
            Some(self.text[start..start + len].trim())
        } else {
            None
        };
        build(name, arg)
    }
}

fn flatten(mut parts: Vec<StopCondition>, all: bool) -> StopCondition {
    if parts.len() == 1 {
        return parts.pop().expect("one part");
    }
    let mut out = Vec::new();
    for p in parts {
        match p {
            StopCondition::All(inner) if all => out.extend(inner),
            StopCondition::Any(inner) if !all => out.extend(inner),
            other => out.push(other),
        }
    }
    if all {
        StopCondition::All(out)
    } else {
        StopCondition::Any(out)
    }
}

fn build(name: &str, arg: Option<&str>) -> Result<StopCondition, StopSpecError> {
    let bad = |message: String| StopSpecError::Argument {
        name: name.to_string(),
        message,
    };
    let required = || {
        arg.filter(|a| !a.is_empty())
            .ok_or_else(|| bad("missing argument".into()))
    };
    let pct = || -> Result<f64, StopSpecError> {
        let a = required()?;
        let v: f64 = a
            .parse()
            .map_err(|_| bad(format!("`{a}` is not a number")))?;
        if !(0.0..=100.0).contains(&v) {
            return Err(bad(format!("{v} is outside [0, 100]")));
        }
        Ok(v)
    };
    let reference = || -> Result<ElementRef, StopSpecError> {
        let a = required()?;
        ElementRef::parse(a)
            .ok_or_else(|| bad(format!("`{a}` is not a <model>/<element> reference")))
    };
    Ok(match name {
        "edge_coverage" => StopCondition::EdgeCoverage(pct()?),
        "vertex_coverage" => StopCondition::VertexCoverage(pct()?),
        "requirement_coverage" => StopCondition::RequirementCoverage(pct()?),
        "dependency_edge_coverage" => {
            let a = required()?;
            let t: u8 = a
                .parse()
                .ok()
                .filter(|t| *t <= 100)
                .ok_or_else(|| bad(format!("`{a}` is not an integer in [0, 100]")))?;
            StopCondition::DependencyEdgeCoverage(t)
        }
        "reached_vertex" => StopCondition::ReachedVertex(reference()?),
        "reached_edge" => StopCondition::ReachedEdge(reference()?),
        "time" => {
            let a = required()?;
            let s: f64 = a
                .parse()
                .map_err(|_| bad(format!("`{a}` is not a number")))?;
            if !(s > 0.0 && s.is_finite()) {
                return Err(bad(format!("duration must be positive, got {a}")));
            }
            StopCondition::TimeDuration(s)
        }
        "length" => {
            let a = required()?;
            StopCondition::Length(
                a.parse()
                    .map_err(|_| bad(format!("`{a}` is not a non-negative integer")))?,
            )
        }
        "never" => {
            if arg.is_some_and(|a| !a.is_empty()) {
                return Err(bad("takes no argument".into()));
            }
            StopCondition::Never
        }
        other => return Err(StopSpecError::UnknownCondition(other.to_string())),
    })
}

/// Parses e.g. `reached_vertex(login/v2) or time(3600)`. `and` binds tighter
/// than `or`; parentheses group.
pub fn parse_stop_spec(text: &str) -> Result<StopCondition, StopSpecError> {
    let mut p = SpecParser { text, pos: 0 };
    let cond = p.or()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.syntax("unexpected trailing input"));
    }
    Ok(cond)
}
