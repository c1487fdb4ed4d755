//! Canonical JSON forms of specifications and artifacts.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::artifact::Artifact;
use crate::model::grammar::{
    is_structuring, Accreditation, Annotation, Gmawfp, Gmwf, Production, Sort,
};
use crate::model::validate::{validate_gmawfp, Issue, ValidationOptions, ValidationReport};

/// Compact JSON with object keys in sorted order.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("value serialises to JSON");
    serde_json::to_string(&v).expect("JSON value prints")
}

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("malformed JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("invalid specification: {0}")]
    Invalid(ValidationReport),
    #[error("malformed artifact: {0}")]
    Shape(#[from] crate::model::artifact::ShapeError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortEntry {
    pub name: String,
}

/// Either one annotation for the whole rhs or one per gap between symbols.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AnnotationEntry {
    One(Annotation),
    PerGap(Vec<Annotation>),
}

impl Default for AnnotationEntry {
    fn default() -> Self {
        AnnotationEntry::One(Annotation::Sequential)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProductionEntry {
    pub lhs: String,
    #[serde(default)]
    pub rhs: Vec<String>,
    #[serde(default)]
    pub annotation: AnnotationEntry,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AccreditationEntry {
    pub actor: String,
    #[serde(default)]
    pub read: Vec<String>,
    #[serde(default)]
    pub write: Vec<String>,
    #[serde(default)]
    pub execute: Vec<String>,
}

/// On-disk process specification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpecDocument {
    pub sorts: Vec<SortEntry>,
    pub axioms: Vec<String>,
    pub productions: Vec<ProductionEntry>,
    pub actors: Vec<String>,
    pub accreditations: Vec<AccreditationEntry>,
    pub initiator: String,
}

impl SpecDocument {
    pub fn parse(text: &str) -> Result<Self, FormatError> {
        Ok(serde_json::from_str(text)?)
    }

    /// Issues that only exist in the document form, such as mixed
    /// annotations or reserved names.
    fn document_issues(&self) -> Vec<Issue> {
        let mut issues = Vec::new();
        for s in &self.sorts {
            if is_structuring(&s.name) {
                issues.push(Issue::error(
                    "reserved-sort-name",
                    format!("sort {} uses the reserved '#' prefix", s.name),
                ));
            }
        }
        for p in &self.productions {
            if let AnnotationEntry::PerGap(gaps) = &p.annotation {
                let distinct: BTreeSet<_> = gaps.iter().collect();
                if distinct.len() > 1 {
                    issues.push(Issue::error(
                        "mixed-annotation",
                        format!("production for {} mixes sequential and parallel", p.lhs),
                    ));
                }
                if p.rhs.len() > 1 && gaps.len() != p.rhs.len() - 1 {
                    issues.push(Issue::error(
                        "annotation-arity",
                        format!(
                            "production for {} has {} symbols but {} annotations",
                            p.lhs,
                            p.rhs.len(),
                            gaps.len()
                        ),
                    ));
                }
            }
        }
        issues
    }

    /// The model, without validating it.
    pub fn to_model(&self) -> Gmawfp {
        let productions = self
            .productions
            .iter()
            .map(|p| {
                let ann = match &p.annotation {
                    AnnotationEntry::One(a) => *a,
                    AnnotationEntry::PerGap(g) => {
                        g.first().copied().unwrap_or(Annotation::Sequential)
                    }
                };
                Production::new(p.lhs.clone(), p.rhs.clone(), ann)
            })
            .collect();
        let set = |v: &Vec<String>| v.iter().cloned().collect::<BTreeSet<_>>();
        Gmawfp {
            gmwf: Gmwf {
                sorts: self
                    .sorts
                    .iter()
                    .map(|s| Sort::new(s.name.clone()))
                    .collect(),
                axioms: self.axioms.clone(),
                productions,
            },
            actors: self.actors.clone(),
            accreditations: self
                .accreditations
                .iter()
                .map(|a| Accreditation {
                    actor: a.actor.clone(),
                    read: set(&a.read),
                    write: set(&a.write),
                    execute: set(&a.execute),
                })
                .collect(),
            initiator: self.initiator.clone(),
        }
    }

    pub fn validate(&self, opts: &ValidationOptions) -> ValidationReport {
        let mut report = ValidationReport {
            issues: self.document_issues(),
        };
        report
            .issues
            .extend(validate_gmawfp(&self.to_model(), opts).issues);
        report
    }

    /// Validated model; warnings are tolerated.
    pub fn into_spec(self) -> Result<Gmawfp, FormatError> {
        let report = self.validate(&ValidationOptions::default());
        if report.has_errors() {
            return Err(FormatError::Invalid(report));
        }
        Ok(self.to_model())
    }

    pub fn from_spec(spec: &Gmawfp) -> Self {
        let list = |s: &BTreeSet<String>| s.iter().cloned().collect::<Vec<_>>();
        SpecDocument {
            sorts: spec
                .gmwf
                .sorts
                .iter()
                .map(|s| SortEntry {
                    name: s.name.clone(),
                })
                .collect(),
            axioms: spec.gmwf.axioms.clone(),
            productions: spec
                .gmwf
                .productions
                .iter()
                .map(|p| ProductionEntry {
                    lhs: p.lhs().to_string(),
                    rhs: p.rhs().to_vec(),
                    annotation: AnnotationEntry::One(p.annotation()),
                })
                .collect(),
            actors: spec.actors.clone(),
            accreditations: spec
                .accreditations
                .iter()
                .map(|a| AccreditationEntry {
                    actor: a.actor.clone(),
                    read: list(&a.read),
                    write: list(&a.write),
                    execute: list(&a.execute),
                })
                .collect(),
            initiator: spec.initiator.clone(),
        }
    }
}

pub fn parse_spec(text: &str) -> Result<Gmawfp, FormatError> {
    SpecDocument::parse(text)?.into_spec()
}

pub fn print_spec(spec: &Gmawfp) -> String {
    canonical_json(&SpecDocument::from_spec(spec))
}

/// Parses an artifact and checks its node shapes (not conformance).
pub fn parse_artifact(text: &str) -> Result<Artifact, FormatError> {
    let t: Artifact = serde_json::from_str(text)?;
    t.check_shape()?;
    Ok(t)
}

pub fn print_artifact(t: &Artifact) -> String {
    canonical_json(t)
}
