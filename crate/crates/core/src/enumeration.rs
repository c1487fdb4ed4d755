//! Recursion detection, axiom normalisation and target-artifact enumeration.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::algo::tarjan_scc;
use petgraph::graphmap::DiGraphMap;
use thiserror::Error;

use crate::format::canonical_json;
use crate::model::artifact::Artifact;
use crate::model::grammar::{Gmawfp, Gmwf, Production, Sort};

pub const DEFAULT_LIMIT: usize = 10_000;

/// Base name of the axiom introduced by [`ensure_axiom_visibility`].
pub const FRESH_AXIOM: &str = "A_G";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EnumerationError {
    #[error("grammar is recursive through {sorts:?}")]
    RecursiveGrammar { sorts: BTreeSet<String> },
    #[error("more than {limit} target artifacts (at least {count})")]
    ExplosionLimit { limit: usize, count: u128 },
}

/// Complete artifacts denoted by a grammar, sorted by canonical JSON.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TargetArtifactSet {
    pub artifacts: Vec<Artifact>,
}

impl TargetArtifactSet {
    /// Sorts and deduplicates.
    pub fn from_artifacts(artifacts: Vec<Artifact>) -> Self {
        let mut keyed: Vec<(String, Artifact)> = artifacts
            .into_iter()
            .map(|a| (canonical_json(&a), a))
            .collect();
        keyed.sort_by(|x, y| x.0.cmp(&y.0));
        keyed.dedup_by(|x, y| x.0 == y.0);
        TargetArtifactSet {
            artifacts: keyed.into_iter().map(|(_, a)| a).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.artifacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.artifacts.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Artifact> {
        self.artifacts.iter()
    }

    pub fn contains(&self, t: &Artifact) -> bool {
        self.artifacts.contains(t)
    }
}

/// Sorts lying on a cycle of the derives-to relation.
pub fn detect_recursive_sorts(g: &Gmwf) -> BTreeSet<String> {
    let mut graph: DiGraphMap<&str, ()> = DiGraphMap::new();
    for s in &g.sorts {
        graph.add_node(s.name.as_str());
    }
    for p in &g.productions {
        for r in p.rhs() {
            graph.add_edge(p.lhs(), r.as_str(), ());
        }
    }
    let mut out = BTreeSet::new();
    for scc in tarjan_scc(&graph) {
        if scc.len() > 1 || graph.contains_edge(scc[0], scc[0]) {
            out.extend(scc.iter().map(|s| s.to_string()));
        }
    }
    out
}

/// Makes every actor able to read a single axiom.
///
/// When the grammar has several axioms or some actor cannot read one, a
/// fresh axiom is added with a unit production towards each former axiom;
/// every actor reads it and only the initiator writes it.
pub fn ensure_axiom_visibility(spec: &Gmawfp) -> Gmawfp {
    let axioms = &spec.gmwf.axioms;
    let all_read = spec
        .accreditations
        .iter()
        .all(|acc| axioms.iter().all(|a| acc.read.contains(a)));
    if axioms.len() == 1 && all_read {
        return spec.clone();
    }
    let mut name = FRESH_AXIOM.to_string();
    while spec.gmwf.has_sort(&name) {
        name.push('\'');
    }
    let mut out = spec.clone();
    out.gmwf.sorts.insert(0, Sort::new(name.clone()));
    let units: Vec<Production> = axioms
        .iter()
        .map(|a| Production::seq(&name, &[a.as_str()]))
        .collect();
    out.gmwf.productions.splice(0..0, units);
    out.gmwf.axioms = vec![name.clone()];
    for acc in &mut out.accreditations {
        acc.read.insert(name.clone());
        if acc.actor == spec.initiator {
            acc.write.insert(name.clone());
        }
    }
    out
}

/// Number of target artifacts, saturating.
pub fn count_target_artifacts(g: &Gmwf) -> Result<u128, EnumerationError> {
    let rec = detect_recursive_sorts(g);
    if !rec.is_empty() {
        return Err(EnumerationError::RecursiveGrammar { sorts: rec });
    }
    let mut memo = BTreeMap::new();
    Ok(g.axioms.iter().fold(0u128, |acc, a| {
        acc.saturating_add(count_sort(g, a, &mut memo))
    }))
}

fn count_sort<'a>(g: &'a Gmwf, sort: &'a str, memo: &mut BTreeMap<&'a str, u128>) -> u128 {
    if let Some(&n) = memo.get(sort) {
        return n;
    }
    let mut total = 0u128;
    for p in g.productions_for(sort) {
        let mut prod = 1u128;
        for r in p.rhs() {
            prod = prod.saturating_mul(count_sort(g, r, memo));
        }
        total = total.saturating_add(prod);
    }
    memo.insert(sort, total);
    total
}

pub fn generate_target_artifacts(g: &Gmwf) -> Result<TargetArtifactSet, EnumerationError> {
    generate_target_artifacts_with_limit(g, DEFAULT_LIMIT)
}

pub fn generate_target_artifacts_with_limit(
    g: &Gmwf,
    limit: usize,
) -> Result<TargetArtifactSet, EnumerationError> {
    let total = count_target_artifacts(g)?;
    if total > limit as u128 {
        return Err(EnumerationError::ExplosionLimit {
            limit,
            count: total,
        });
    }
    let mut memo: BTreeMap<&str, Vec<Artifact>> = BTreeMap::new();
    let mut out = Vec::new();
    for a in &g.axioms {
        out.extend(expand_sort(g, a, limit, &mut memo)?);
    }
    Ok(TargetArtifactSet::from_artifacts(out))
}

fn expand_sort<'a>(
    g: &'a Gmwf,
    sort: &'a str,
    limit: usize,
    memo: &mut BTreeMap<&'a str, Vec<Artifact>>,
) -> Result<Vec<Artifact>, EnumerationError> {
    if let Some(v) = memo.get(sort) {
        return Ok(v.clone());
    }
    let mut out = Vec::new();
    for p in g.productions_for(sort) {
        let mut combos: Vec<Vec<Artifact>> = vec![Vec::new()];
        for r in p.rhs() {
            let options = expand_sort(g, r, limit, memo)?;
            let size = (combos.len() as u128) * (options.len() as u128);
            if size > limit as u128 {
                return Err(EnumerationError::ExplosionLimit { limit, count: size });
            }
            combos = combos
                .iter()
                .flat_map(|prefix| {
                    options.iter().map(move |o| {
                        let mut next = prefix.clone();
                        next.push(o.clone());
                        next
                    })
                })
                .collect();
        }
        out.extend(
            combos
                .into_iter()
                .map(|children| Artifact::developed(p.clone(), children)),
        );
        if out.len() > limit {
            return Err(EnumerationError::ExplosionLimit {
                limit,
                count: out.len() as u128,
            });
        }
    }
    memo.insert(sort, out.clone());
    Ok(out)
}
