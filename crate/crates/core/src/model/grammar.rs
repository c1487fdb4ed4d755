use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Prefix reserved for structuring sorts introduced by projection.
pub const STRUCTURING_PREFIX: char = '#';

pub fn is_structuring(name: &str) -> bool {
    name.starts_with(STRUCTURING_PREFIX)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SortKind {
    Process,
    Structuring,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sort {
    pub name: String,
    pub kind: SortKind,
}

impl Sort {
    pub fn new(name: impl Into<String>) -> Self {
        let name = name.into();
        let kind = if is_structuring(&name) {
            SortKind::Structuring
        } else {
            SortKind::Process
        };
        Sort { name, kind }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Annotation {
    #[serde(rename = "seq")]
    Sequential,
    #[serde(rename = "par")]
    Parallel,
}

impl Annotation {
    pub fn symbol(self) -> &'static str {
        match self {
            Annotation::Sequential => ";",
            Annotation::Parallel => "||",
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Annotation::Sequential => "seq",
            Annotation::Parallel => "par",
        }
    }
}

/// A production `lhs -> rhs`. Productions with at most one right-hand
/// symbol always carry the sequential annotation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "RawProduction")]
pub struct Production {
    lhs: String,
    rhs: Vec<String>,
    annotation: Annotation,
}

#[derive(Deserialize)]
struct RawProduction {
    lhs: String,
    #[serde(default)]
    rhs: Vec<String>,
    #[serde(default = "default_annotation")]
    annotation: Annotation,
}

fn default_annotation() -> Annotation {
    Annotation::Sequential
}

impl From<RawProduction> for Production {
    fn from(raw: RawProduction) -> Self {
        Production::new(raw.lhs, raw.rhs, raw.annotation)
    }
}

impl Production {
    pub fn new<S: Into<String>>(
        lhs: impl Into<String>,
        rhs: impl IntoIterator<Item = S>,
        annotation: Annotation,
    ) -> Self {
        let rhs: Vec<String> = rhs.into_iter().map(Into::into).collect();
        let annotation = if rhs.len() <= 1 {
            Annotation::Sequential
        } else {
            annotation
        };
        Production {
            lhs: lhs.into(),
            rhs,
            annotation,
        }
    }

    pub fn seq(lhs: &str, rhs: &[&str]) -> Self {
        Production::new(lhs, rhs.iter().copied(), Annotation::Sequential)
    }

    pub fn par(lhs: &str, rhs: &[&str]) -> Self {
        Production::new(lhs, rhs.iter().copied(), Annotation::Parallel)
    }

    pub fn epsilon(lhs: impl Into<String>) -> Self {
        Production::new(lhs, Vec::<String>::new(), Annotation::Sequential)
    }

    pub fn lhs(&self) -> &str {
        &self.lhs
    }

    pub fn rhs(&self) -> &[String] {
        &self.rhs
    }

    pub fn annotation(&self) -> Annotation {
        self.annotation
    }

    pub fn is_epsilon(&self) -> bool {
        self.rhs.is_empty()
    }
}

impl fmt::Display for Production {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> ", self.lhs)?;
        if self.rhs.is_empty() {
            return write!(f, "ε");
        }
        let sep = format!(" {} ", self.annotation.symbol());
        write!(f, "{}", self.rhs.join(&sep))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProductionParseError {
    #[error("missing '->' in production {0:?}")]
    MissingArrow(String),
    #[error("empty left-hand side in production {0:?}")]
    EmptyLhs(String),
    #[error("production {0:?} mixes ';' and '||'")]
    Mixed(String),
    #[error("empty symbol in production {0:?}")]
    EmptySymbol(String),
}

impl FromStr for Production {
    type Err = ProductionParseError;

    /// Parses `A -> B ; C`, `E -> G1 || G2`, `B -> ε` (also `eps` or nothing).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (lhs, rhs) = s
            .split_once("->")
            .ok_or_else(|| ProductionParseError::MissingArrow(s.to_string()))?;
        let lhs = lhs.trim();
        if lhs.is_empty() {
            return Err(ProductionParseError::EmptyLhs(s.to_string()));
        }
        let rhs = rhs.trim();
        if rhs.is_empty() || rhs == "ε" || rhs == "eps" {
            return Ok(Production::epsilon(lhs));
        }
        let has_par = rhs.contains("||");
        let has_seq = rhs.contains(';');
        let (parts, annotation): (Vec<&str>, _) = match (has_par, has_seq) {
            (true, true) => return Err(ProductionParseError::Mixed(s.to_string())),
            (true, false) => (rhs.split("||").collect(), Annotation::Parallel),
            (false, true) => (rhs.split(';').collect(), Annotation::Sequential),
            (false, false) => (vec![rhs], Annotation::Sequential),
        };
        let parts: Vec<String> = parts.iter().map(|p| p.trim().to_string()).collect();
        if parts
            .iter()
            .any(|p| p.is_empty() || p.contains(char::is_whitespace))
        {
            return Err(ProductionParseError::EmptySymbol(s.to_string()));
        }
        Ok(Production::new(lhs, parts, annotation))
    }
}

/// Grammatical model of a workflow: sorts, axioms and annotated productions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gmwf {
    pub sorts: Vec<Sort>,
    pub axioms: Vec<String>,
    pub productions: Vec<Production>,
}

impl Gmwf {
    pub fn sort(&self, name: &str) -> Option<&Sort> {
        self.sorts.iter().find(|s| s.name == name)
    }

    pub fn has_sort(&self, name: &str) -> bool {
        self.sort(name).is_some()
    }

    pub fn is_axiom(&self, name: &str) -> bool {
        self.axioms.iter().any(|a| a == name)
    }

    pub fn has_production(&self, p: &Production) -> bool {
        self.productions.contains(p)
    }

    pub fn productions_for<'a>(
        &'a self,
        lhs: &'a str,
    ) -> impl Iterator<Item = &'a Production> + 'a {
        self.productions.iter().filter(move |p| p.lhs() == lhs)
    }

    pub fn sort_names(&self) -> impl Iterator<Item = &str> {
        self.sorts.iter().map(|s| s.name.as_str())
    }
}

/// The set of sorts an actor may read.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct View(BTreeSet<String>);

impl View {
    pub fn new() -> Self {
        View(BTreeSet::new())
    }

    pub fn contains(&self, sort: &str) -> bool {
        self.0.contains(sort)
    }

    pub fn insert(&mut self, sort: impl Into<String>) -> bool {
        self.0.insert(sort.into())
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_set(&self) -> &BTreeSet<String> {
        &self.0
    }
}

impl<S: Into<String>> FromIterator<S> for View {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        View(iter.into_iter().map(Into::into).collect())
    }
}

impl From<BTreeSet<String>> for View {
    fn from(set: BTreeSet<String>) -> Self {
        View(set)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Accreditation {
    pub actor: String,
    pub read: BTreeSet<String>,
    pub write: BTreeSet<String>,
    pub execute: BTreeSet<String>,
}

impl Accreditation {
    pub fn view(&self) -> View {
        View::from(self.read.clone())
    }
}

/// A workflow grammar together with its actors and their accreditations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Gmawfp {
    pub gmwf: Gmwf,
    pub actors: Vec<String>,
    pub accreditations: Vec<Accreditation>,
    pub initiator: String,
}

impl Gmawfp {
    pub fn accreditation(&self, actor: &str) -> Option<&Accreditation> {
        self.accreditations.iter().find(|a| a.actor == actor)
    }

    pub fn has_actor(&self, actor: &str) -> bool {
        self.actors.iter().any(|a| a == actor)
    }

    pub fn view(&self, actor: &str) -> Option<View> {
        self.accreditation(actor).map(Accreditation::view)
    }

    /// Actors holding write accreditation on `sort`, in actor order.
    pub fn writers<'a>(&'a self, sort: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.actors.iter().map(String::as_str).filter(move |a| {
            self.accreditation(a)
                .map(|acc| acc.write.contains(sort))
                .unwrap_or(false)
        })
    }
}
