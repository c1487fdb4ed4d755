use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::grammar::{is_structuring, Gmawfp, SortKind};
use super::order::is_prefix;
use crate::enumeration::{
    count_target_artifacts, detect_recursive_sorts, ensure_axiom_visibility,
    generate_target_artifacts, DEFAULT_LIMIT,
};
use crate::projection::project_artifact_rooted;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl Issue {
    pub fn error(code: &str, message: impl Into<String>) -> Self {
        Issue {
            severity: Severity::Error,
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn warning(code: &str, message: impl Into<String>) -> Self {
        Issue {
            severity: Severity::Warning,
            code: code.to_string(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues
            .iter()
            .filter(|i| i.severity == Severity::Warning)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }

    pub fn has_code(&self, code: &str) -> bool {
        self.issues.iter().any(|i| i.code == code)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for i in &self.issues {
            if !first {
                writeln!(f)?;
            }
            first = false;
            let sev = match i.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, "{sev}[{}]: {}", i.code, i.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ValidationOptions {
    /// Require every axiom to be readable by every actor.
    pub axiom_visibility: bool,
    /// Look for scenarios an actor cannot tell apart (requires enumeration).
    pub ambiguity: bool,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        ValidationOptions {
            axiom_visibility: false,
            ambiguity: true,
        }
    }
}

pub fn validate_gmawfp(spec: &Gmawfp, opts: &ValidationOptions) -> ValidationReport {
    let mut out = Vec::new();
    let g = &spec.gmwf;

    let mut seen = BTreeSet::new();
    for s in &g.sorts {
        if s.name.is_empty() || s.name.chars().any(char::is_whitespace) {
            out.push(Issue::error(
                "bad-sort-name",
                format!("invalid sort name {:?}", s.name),
            ));
        }
        if !seen.insert(s.name.as_str()) {
            out.push(Issue::error(
                "duplicate-sort",
                format!("sort {} declared twice", s.name),
            ));
        }
        let expected = if is_structuring(&s.name) {
            SortKind::Structuring
        } else {
            SortKind::Process
        };
        if s.kind != expected {
            out.push(Issue::error(
                "sort-kind-mismatch",
                format!("sort {} has the wrong kind", s.name),
            ));
        }
    }

    if g.axioms.is_empty() {
        out.push(Issue::error("no-axiom", "the grammar has no axiom"));
    }
    for a in &g.axioms {
        if !g.has_sort(a) {
            out.push(Issue::error(
                "unknown-sort",
                format!("axiom {a} is not a sort"),
            ));
        }
    }

    let mut prods = BTreeSet::new();
    for p in &g.productions {
        for s in std::iter::once(p.lhs()).chain(p.rhs().iter().map(String::as_str)) {
            if !g.has_sort(s) {
                out.push(Issue::error(
                    "unknown-sort",
                    format!("production {p} uses undeclared sort {s}"),
                ));
            }
        }
        if !prods.insert(p) {
            out.push(Issue::error(
                "duplicate-production",
                format!("production {p} is repeated"),
            ));
        }
    }

    // every sort reachable from an axiom must have a production
    let mut reachable: BTreeSet<&str> = BTreeSet::new();
    let mut stack: Vec<&str> = g.axioms.iter().map(String::as_str).collect();
    while let Some(s) = stack.pop() {
        if !reachable.insert(s) {
            continue;
        }
        for p in g.productions_for(s) {
            stack.extend(p.rhs().iter().map(String::as_str));
        }
    }
    for s in &reachable {
        if g.has_sort(s) && g.productions_for(s).next().is_none() {
            out.push(Issue::error(
                "missing-production",
                format!("sort {s} is reachable but has no production"),
            ));
        }
    }
    for s in &g.sorts {
        if !reachable.contains(s.name.as_str()) {
            out.push(Issue::warning(
                "unreachable-sort",
                format!("sort {} is not reachable from an axiom", s.name),
            ));
        }
    }

    let mut actors = BTreeSet::new();
    for a in &spec.actors {
        if a.is_empty() {
            out.push(Issue::error("bad-actor-name", "empty actor name"));
        }
        if !actors.insert(a.as_str()) {
            out.push(Issue::error(
                "duplicate-actor",
                format!("actor {a} listed twice"),
            ));
        }
    }
    if !spec.has_actor(&spec.initiator) {
        out.push(Issue::error(
            "initiator-not-actor",
            format!("initiator {} is not an actor", spec.initiator),
        ));
    }
    let mut accredited: BTreeMap<&str, usize> = BTreeMap::new();
    for acc in &spec.accreditations {
        *accredited.entry(acc.actor.as_str()).or_default() += 1;
        if !spec.has_actor(&acc.actor) {
            out.push(Issue::error(
                "unknown-actor",
                format!("accreditation for unknown actor {}", acc.actor),
            ));
        }
        for (set, what) in [
            (&acc.read, "read"),
            (&acc.write, "write"),
            (&acc.execute, "execute"),
        ] {
            for s in set {
                if !g.has_sort(s) {
                    out.push(Issue::error(
                        "unknown-sort",
                        format!("{} has {what} on undeclared sort {s}", acc.actor),
                    ));
                }
            }
        }
        for s in acc.write.difference(&acc.read) {
            out.push(Issue::error(
                "write-not-in-read",
                format!("{} may write {s} without reading it", acc.actor),
            ));
        }
        if opts.axiom_visibility {
            for a in &g.axioms {
                if !acc.read.contains(a) {
                    out.push(Issue::error(
                        "axiom-not-visible",
                        format!("{} cannot read axiom {a}", acc.actor),
                    ));
                }
            }
        }
    }
    for a in &spec.actors {
        match accredited.get(a.as_str()) {
            None => out.push(Issue::error(
                "missing-accreditation",
                format!("actor {a} has no accreditation"),
            )),
            Some(n) if *n > 1 => out.push(Issue::error(
                "duplicate-accreditation",
                format!("actor {a} has {n} accreditations"),
            )),
            _ => {}
        }
    }

    for s in &reachable {
        let developable = g.productions_for(s).next().is_some();
        if developable && g.has_sort(s) && spec.writers(s).next().is_none() {
            out.push(Issue::warning(
                "no-writer",
                format!("no actor may write sort {s}"),
            ));
        }
    }

    let recursive = detect_recursive_sorts(g);
    if !recursive.is_empty() {
        let names: Vec<_> = recursive.iter().cloned().collect();
        out.push(Issue::warning(
            "recursive-sorts",
            format!(
                "recursive sorts {}: scenarios cannot be enumerated",
                names.join(", ")
            ),
        ));
    }

    let structurally_ok = out.iter().all(|i| i.severity != Severity::Error);
    if opts.ambiguity && structurally_ok && recursive.is_empty() {
        out.extend(ambiguity_warnings(spec));
    }

    ValidationReport { issues: out }
}

/// Two distinct scenarios whose projections for some actor are
/// prefix-comparable: that actor cannot tell them apart.
fn ambiguity_warnings(spec: &Gmawfp) -> Vec<Issue> {
    let ext = ensure_axiom_visibility(spec);
    match count_target_artifacts(&ext.gmwf) {
        Ok(n) if n <= DEFAULT_LIMIT as u128 => {}
        _ => return Vec::new(),
    }
    let Ok(targets) = generate_target_artifacts(&ext.gmwf) else {
        return Vec::new();
    };
    let mut out = Vec::new();
    for acc in &ext.accreditations {
        let view = acc.view();
        let projected: Vec<_> = targets
            .iter()
            .map(|t| project_artifact_rooted(t, &view).ok())
            .collect();
        let mut clash = None;
        'outer: for i in 0..projected.len() {
            for j in (i + 1)..projected.len() {
                if let (Some(a), Some(b)) = (&projected[i], &projected[j]) {
                    if is_prefix(a, b) || is_prefix(b, a) {
                        clash = Some((i, j));
                        break 'outer;
                    }
                }
            }
        }
        if let Some((i, j)) = clash {
            out.push(Issue::warning(
                "ambiguous-scenarios",
                format!(
                    "actor {} cannot distinguish scenarios #{i} and #{j}; guide choice may matter",
                    acc.actor
                ),
            ));
        }
    }
    out
}
