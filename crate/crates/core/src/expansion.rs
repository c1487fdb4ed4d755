//! Expansion of an updated partial replica back into a global artifact.
//!
//! A scenario compatible with both the current global artifact and the
//! edited replica is picked as a guide; the result follows the guide's shape,
//! takes every node the actor touched from the replica, keeps what was
//! already there, and cuts the guide off wherever nothing is known yet.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumeration::{generate_target_artifacts, TargetArtifactSet};
use crate::format::canonical_json;
use crate::model::artifact::{Address, Artifact, NodeState};
use crate::model::grammar::{is_structuring, Annotation, Gmwf, Production, View};
use crate::model::order::is_prefix;
use crate::projection::{project_gmwf_from_targets, LocalGmwf, ProjectionError};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum GuidePolicy {
    /// Canonically least guide.
    #[default]
    First,
    Seeded(u64),
    /// Caller's pick by index; `None` asks back when the choice matters.
    External(Option<usize>),
}

impl std::str::FromStr for GuidePolicy {
    type Err = String;

    /// `first`, `seed=<n>`, `index=<k>` or `external`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s == "first" {
            return Ok(GuidePolicy::First);
        }
        if s == "external" {
            return Ok(GuidePolicy::External(None));
        }
        if let Some(n) = s.strip_prefix("seed=") {
            return n
                .parse()
                .map(GuidePolicy::Seeded)
                .map_err(|e| format!("bad seed: {e}"));
        }
        if let Some(k) = s.strip_prefix("index=") {
            return k
                .parse()
                .map(|k| GuidePolicy::External(Some(k)))
                .map_err(|e| format!("bad index: {e}"));
        }
        Err(format!("unknown guide policy {s:?}"))
    }
}

impl std::fmt::Display for GuidePolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GuidePolicy::First => write!(f, "first"),
            GuidePolicy::Seeded(n) => write!(f, "seed={n}"),
            GuidePolicy::External(Some(k)) => write!(f, "index={k}"),
            GuidePolicy::External(None) => write!(f, "external"),
        }
    }
}

/// A distinct outcome offered when the guide choice is left to the caller.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuideOption {
    pub index: usize,
    pub guide: Artifact,
    pub result: Artifact,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExpansionError {
    #[error("no scenario is compatible with the artifact and its update")]
    EmptyGuides,
    #[error("guide does not fit at {addr}: {reason}")]
    GuideMismatch { addr: Address, reason: String },
    #[error("{} guides lead to different results; pick one", options.len())]
    GuideChoiceRequired { options: Vec<GuideOption> },
    #[error("guide index {index} out of range ({count} guides)")]
    InvalidGuideIndex { index: usize, count: usize },
    #[error(transparent)]
    Projection(#[from] ProjectionError),
}

/// Compatible scenarios in canonical order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GuideSet {
    pub guides: Vec<Artifact>,
}

/// Scenarios that extend `t` and whose projection extends `t_maj`.
pub fn find_guides(
    t: &Artifact,
    t_maj: &Artifact,
    targets: &TargetArtifactSet,
    local: &LocalGmwf,
) -> GuideSet {
    let guides = targets
        .iter()
        .filter(|tg| is_prefix(t, tg))
        .filter(|tg| {
            local
                .project(tg)
                .map(|p| is_prefix(t_maj, &p))
                .unwrap_or(false)
        })
        .cloned()
        .collect();
    GuideSet { guides }
}

/// Index of the guide to use under a non-interactive policy.
pub fn select_guide(gs: &GuideSet, policy: GuidePolicy) -> Result<usize, ExpansionError> {
    let n = gs.guides.len();
    if n == 0 {
        return Err(ExpansionError::EmptyGuides);
    }
    match policy {
        GuidePolicy::First | GuidePolicy::External(None) => Ok(0),
        GuidePolicy::Seeded(seed) => Ok(ChaCha8Rng::seed_from_u64(seed).random_range(0..n)),
        GuidePolicy::External(Some(k)) if k < n => Ok(k),
        GuidePolicy::External(Some(k)) => {
            Err(ExpansionError::InvalidGuideIndex { index: k, count: n })
        }
    }
}

struct Merge<'a> {
    t_g: &'a Artifact,
    maj_at: BTreeMap<Address, &'a Artifact>,
}

fn mismatch(addr: &Address, reason: impl Into<String>) -> ExpansionError {
    ExpansionError::GuideMismatch {
        addr: addr.clone(),
        reason: reason.into(),
    }
}

/// Maps guide addresses to the replica nodes standing for them.
fn align<'a>(
    maj: &'a Artifact,
    proj: &Artifact,
    at: Address,
    origins: &BTreeMap<Address, Address>,
    out: &mut BTreeMap<Address, &'a Artifact>,
) -> Result<(), ExpansionError> {
    if maj.label != proj.label {
        return Err(mismatch(
            &at,
            format!(
                "replica has {} where the guide shows {}",
                maj.label, proj.label
            ),
        ));
    }
    if let Some(g) = origins.get(&at) {
        out.insert(g.clone(), maj);
    }
    if maj.is_bud() {
        return Ok(());
    }
    if maj.children.len() != proj.children.len() {
        return Err(mismatch(&at, "replica and guide disagree on children"));
    }
    for (i, (m, p)) in maj.children.iter().zip(&proj.children).enumerate() {
        align(m, p, at.child(i), origins, out)?;
    }
    Ok(())
}

impl Merge<'_> {
    fn has_mapped_below(&self, addr: &Address) -> bool {
        self.maj_at
            .range(addr.clone()..)
            .take_while(|(a, _)| a.0.starts_with(&addr.0))
            .any(|(a, _)| a != addr)
    }

    fn node(
        &self,
        g: &Artifact,
        t: Option<&Artifact>,
        addr: Address,
    ) -> Result<Artifact, ExpansionError> {
        let maj = self.maj_at.get(&addr).copied();
        if let Some(tn) = t {
            if tn.label != g.label {
                return Err(mismatch(
                    &addr,
                    format!("artifact has {} but guide has {}", tn.label, g.label),
                ));
            }
            if let Some(p) = &tn.production {
                if Some(p) != g.production.as_ref() {
                    return Err(mismatch(&addr, format!("artifact used {p}")));
                }
            }
        }
        match (t, maj) {
            (_, Some(m)) => {
                if m.is_bud() {
                    if t.is_some_and(|tn| !tn.is_bud()) {
                        return Err(mismatch(
                            &addr,
                            "replica regresses a developed node to a bud",
                        ));
                    }
                    return Ok(Artifact {
                        payload: m.payload.clone(),
                        ..Artifact::bud(g.label.clone(), m.state)
                    });
                }
                let mut out = self.developed(g, t.filter(|tn| !tn.is_bud()), &addr)?;
                out.payload = m.payload.clone();
                Ok(out)
            }
            (Some(tn), None) if !tn.is_bud() => {
                let mut out = self.developed(g, Some(tn), &addr)?;
                out.payload = tn.payload.clone();
                Ok(out)
            }
            (t, None) => {
                if self.has_mapped_below(&addr) {
                    return self.developed(g, None, &addr);
                }
                match t {
                    Some(tn) => Ok(tn.clone()),
                    // upstair bud: guide region nobody has reached
                    None => Ok(Artifact::locked(g.label.clone())),
                }
            }
        }
    }

    fn developed(
        &self,
        g: &Artifact,
        t: Option<&Artifact>,
        addr: &Address,
    ) -> Result<Artifact, ExpansionError> {
        let production = g
            .production
            .clone()
            .ok_or_else(|| mismatch(addr, "guide is not complete"))?;
        let children = g
            .children
            .iter()
            .enumerate()
            .map(|(i, gc)| self.node(gc, t.and_then(|tn| tn.children.get(i)), addr.child(i)))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Artifact::developed(production, children))
    }
}

/// Merges `t` and the replica `t_maj` along the guide `t_g`. Lock states of
/// the result are not normalised.
pub fn three_way_merge(
    t: &Artifact,
    t_maj: &Artifact,
    t_g: &Artifact,
    local: &LocalGmwf,
) -> Result<Artifact, ExpansionError> {
    let tracked = local.project_tracked(t_g)?;
    let mut maj_at = BTreeMap::new();
    align(
        t_maj,
        &tracked.artifact,
        Address::root(),
        &tracked.origins,
        &mut maj_at,
    )?;
    let merge = Merge { t_g, maj_at };
    merge.node(merge.t_g, Some(t), Address::root())
}

/// Recomputes bud lock states: a bud under a sequential production is
/// unlocked iff every left sibling is complete; under a parallel production
/// all buds are unlocked. A root bud is unlocked.
pub fn normalize_bud_states(t: &Artifact) -> Artifact {
    let mut out = t.clone();
    if out.is_bud() {
        out.state = NodeState::UnlockedBud;
    }
    normalize_children(&mut out);
    out
}

fn normalize_children(n: &mut Artifact) {
    let par = n.annotation() == Annotation::Parallel;
    let mut left_complete = true;
    for c in &mut n.children {
        if c.is_bud() {
            c.state = if par || left_complete {
                NodeState::UnlockedBud
            } else {
                NodeState::LockedBud
            };
        } else {
            normalize_children(c);
        }
        left_complete &= c.is_complete();
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expansion {
    pub result: Artifact,
    pub guides: usize,
    pub chosen: usize,
}

/// Expansion-pruning of `t_maj` against the global artifact `t`.
pub fn expand(
    t: &Artifact,
    t_maj: &Artifact,
    targets: &TargetArtifactSet,
    local: &LocalGmwf,
    policy: GuidePolicy,
) -> Result<Expansion, ExpansionError> {
    let gs = find_guides(t, t_maj, targets, local);
    if gs.guides.is_empty() {
        return Err(ExpansionError::EmptyGuides);
    }
    let merge_with = |i: usize| {
        three_way_merge(t, t_maj, &gs.guides[i], local).map(|m| normalize_bud_states(&m))
    };
    if policy == GuidePolicy::External(None) && gs.guides.len() > 1 {
        let mut options: Vec<GuideOption> = Vec::new();
        let mut seen = BTreeSet::new();
        for (i, g) in gs.guides.iter().enumerate() {
            let result = merge_with(i)?;
            if seen.insert(canonical_json(&result)) {
                options.push(GuideOption {
                    index: i,
                    guide: g.clone(),
                    result,
                });
            }
        }
        if options.len() > 1 {
            return Err(ExpansionError::GuideChoiceRequired { options });
        }
        let only = options.pop().expect("at least one guide");
        return Ok(Expansion {
            result: only.result,
            guides: gs.guides.len(),
            chosen: only.index,
        });
    }
    let chosen = select_guide(&gs, policy)?;
    Ok(Expansion {
        result: merge_with(chosen)?,
        guides: gs.guides.len(),
        chosen,
    })
}

/// [`expand`] from the grammar and view alone.
pub fn expand_in(
    t: &Artifact,
    t_maj: &Artifact,
    g: &Gmwf,
    v: &View,
    policy: GuidePolicy,
) -> Result<Expansion, ExpansionError> {
    let targets = generate_target_artifacts(g).map_err(ProjectionError::from)?;
    let local = project_gmwf_from_targets(g, &targets, v)?;
    expand(t, t_maj, &targets, &local, policy)
}

/// Splices structuring nodes into their parents. Productions of rebuilt
/// nodes keep their own annotation; the result is for comparisons only.
pub fn erase_structuring(t: &Artifact) -> Artifact {
    let mut children = Vec::new();
    for c in &t.children {
        let c = erase_structuring(c);
        if is_structuring(&c.label) {
            children.extend(c.children);
        } else {
            children.push(c);
        }
    }
    let production = t.production.as_ref().map(|p| {
        Production::new(
            p.lhs(),
            children.iter().map(|c| c.label.clone()),
            p.annotation(),
        )
    });
    Artifact {
        label: t.label.clone(),
        state: t.state,
        production,
        children,
        payload: t.payload.clone(),
    }
}
