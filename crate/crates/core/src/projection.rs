//! Projection of artifacts and grammars onto an actor's view.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::enumeration::{generate_target_artifacts, EnumerationError, TargetArtifactSet};
use crate::model::artifact::{Address, Artifact, NodeState};
use crate::model::grammar::{
    is_structuring, Annotation, Gmwf, Production, Sort, View, STRUCTURING_PREFIX,
};

/// Ordered list of projected artifacts.
pub type Forest = Vec<Artifact>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProjectionError {
    #[error("projection yields {count} artifacts instead of one")]
    NotSingleton { count: usize },
    #[error("axiom {0} is not in the view")]
    AxiomNotVisible(String),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
}

/// Naming state for structuring sorts: one name per canonical shape.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StructuringContext {
    counter: usize,
    canon: BTreeMap<String, String>,
}

impl StructuringContext {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reuses the given shape-to-name map; fresh names continue after it.
    pub fn seeded(canon: BTreeMap<String, String>) -> Self {
        let counter = canon
            .values()
            .filter_map(|n| structuring_index(n))
            .max()
            .unwrap_or(0);
        StructuringContext { counter, canon }
    }

    pub fn name_for(&mut self, shape: &str) -> String {
        if let Some(n) = self.canon.get(shape) {
            return n.clone();
        }
        self.counter += 1;
        let name = structuring_name(self.counter);
        self.canon.insert(shape.to_string(), name.clone());
        name
    }

    pub fn canon(&self) -> &BTreeMap<String, String> {
        &self.canon
    }
}

pub fn structuring_name(i: usize) -> String {
    format!("{STRUCTURING_PREFIX}S{i}")
}

fn structuring_index(name: &str) -> Option<usize> {
    name.strip_prefix(STRUCTURING_PREFIX)?
        .strip_prefix('S')?
        .parse()
        .ok()
}

fn quote(label: &str) -> String {
    serde_json::to_string(label).expect("strings serialise")
}

/// Encoding of a node's local scheduling: its head (label, or `#` for a
/// structuring node), annotation, and the keys of its children, where a
/// structuring child contributes its own shape. Lock states are ignored.
pub fn canonical_shape(t: &Artifact) -> String {
    let head = if is_structuring(&t.label) {
        "#".to_string()
    } else {
        quote(&t.label)
    };
    if t.children.is_empty() {
        return head;
    }
    let keys: Vec<String> = t
        .children
        .iter()
        .map(|c| {
            if is_structuring(&c.label) {
                canonical_shape(c)
            } else {
                quote(&c.label)
            }
        })
        .collect();
    format!("{head}({}:{})", t.annotation().keyword(), keys.join(","))
}

struct PNode {
    label: String,
    state: NodeState,
    annotation: Annotation,
    children: Vec<PNode>,
    payload: Option<Vec<u8>>,
    origin: Option<Address>,
    /// Set on structuring nodes made by this projection.
    shape: Option<String>,
}

impl PNode {
    fn key(&self) -> String {
        self.shape.clone().unwrap_or_else(|| {
            if is_structuring(&self.label) {
                "#".to_string()
            } else {
                quote(&self.label)
            }
        })
    }

    fn into_artifact(self, origins: &mut BTreeMap<Address, Address>, at: Address) -> Artifact {
        if let Some(o) = self.origin {
            origins.insert(at.clone(), o);
        }
        let production = (self.state == NodeState::Developed).then(|| {
            Production::new(
                self.label.clone(),
                self.children.iter().map(|c| c.label.clone()),
                self.annotation,
            )
        });
        let children = self
            .children
            .into_iter()
            .enumerate()
            .map(|(i, c)| c.into_artifact(origins, at.child(i)))
            .collect();
        Artifact {
            label: self.label,
            state: self.state,
            production,
            children,
            payload: self.payload,
        }
    }
}

fn structuring(
    annotation: Annotation,
    children: Vec<PNode>,
    ctx: &mut StructuringContext,
) -> PNode {
    let keys: Vec<String> = children.iter().map(PNode::key).collect();
    let shape = format!("#({}:{})", annotation.keyword(), keys.join(","));
    PNode {
        label: ctx.name_for(&shape),
        state: NodeState::Developed,
        annotation,
        children,
        payload: None,
        origin: None,
        shape: Some(shape),
    }
}

fn project_children(
    n: &Artifact,
    addr: &Address,
    v: &View,
    ctx: &mut StructuringContext,
) -> Vec<PNode> {
    let ann = n.annotation();
    let mut kids = Vec::new();
    for (i, c) in n.children.iter().enumerate() {
        let projs = project_node(c, addr.child(i), v, ctx);
        if projs.len() >= 2 && c.annotation() != ann {
            kids.push(structuring(c.annotation(), projs, ctx));
        } else {
            kids.extend(projs);
        }
    }
    kids
}

fn project_node(n: &Artifact, addr: Address, v: &View, ctx: &mut StructuringContext) -> Vec<PNode> {
    if !v.contains(&n.label) {
        if n.is_bud() {
            return Vec::new();
        }
        return project_children(n, &addr, v, ctx);
    }
    if n.is_bud() {
        return vec![PNode {
            label: n.label.clone(),
            state: n.state,
            annotation: Annotation::Sequential,
            children: Vec::new(),
            payload: n.payload.clone(),
            origin: Some(addr),
            shape: None,
        }];
    }
    let mut kids = project_children(n, &addr, v, ctx);
    let mut annotation = n.annotation();
    if kids.len() == 1 && kids[0].shape.is_some() {
        let s = kids.pop().expect("one child");
        annotation = s.annotation;
        kids = s.children;
    }
    vec![PNode {
        label: n.label.clone(),
        state: NodeState::Developed,
        annotation,
        children: kids,
        payload: n.payload.clone(),
        origin: Some(addr),
        shape: None,
    }]
}

/// A projected artifact with, for every kept node, the address of the
/// node it came from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrackedProjection {
    pub artifact: Artifact,
    /// Projected address to source address; structuring nodes are absent.
    pub origins: BTreeMap<Address, Address>,
}

pub fn project_tracked(
    t: &Artifact,
    v: &View,
    ctx: &mut StructuringContext,
) -> Vec<TrackedProjection> {
    project_node(t, Address::root(), v, ctx)
        .into_iter()
        .map(|p| {
            let mut origins = BTreeMap::new();
            let artifact = p.into_artifact(&mut origins, Address::root());
            TrackedProjection { artifact, origins }
        })
        .collect()
}

pub fn project_artifact(t: &Artifact, v: &View, ctx: &mut StructuringContext) -> Forest {
    project_tracked(t, v, ctx)
        .into_iter()
        .map(|p| p.artifact)
        .collect()
}

pub fn project_artifact_rooted(t: &Artifact, v: &View) -> Result<Artifact, ProjectionError> {
    project_rooted_with(t, v, &mut StructuringContext::new())
}

pub fn project_rooted_with(
    t: &Artifact,
    v: &View,
    ctx: &mut StructuringContext,
) -> Result<Artifact, ProjectionError> {
    single(project_artifact(t, v, ctx))
}

fn single<T>(mut forest: Vec<T>) -> Result<T, ProjectionError> {
    if forest.len() != 1 {
        return Err(ProjectionError::NotSingleton {
            count: forest.len(),
        });
    }
    Ok(forest.pop().expect("one element"))
}

/// Grammar obtained by projecting every scenario onto a view.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalGmwf {
    pub view: View,
    pub gmwf: Gmwf,
    pub local_targets: TargetArtifactSet,
    /// Canonical shape of each structuring sort.
    pub structuring: BTreeMap<String, String>,
}

impl LocalGmwf {
    pub fn context(&self) -> StructuringContext {
        StructuringContext::seeded(self.structuring.clone())
    }

    /// Rooted projection using this grammar's structuring names.
    pub fn project(&self, t: &Artifact) -> Result<Artifact, ProjectionError> {
        project_rooted_with(t, &self.view, &mut self.context())
    }

    pub fn project_tracked(&self, t: &Artifact) -> Result<TrackedProjection, ProjectionError> {
        single(project_tracked(t, &self.view, &mut self.context()))
    }

    pub fn structuring_sorts(&self) -> impl Iterator<Item = &Sort> {
        self.gmwf.sorts.iter().filter(|s| is_structuring(&s.name))
    }

    /// Sorts readable through this grammar: the view plus structuring sorts.
    pub fn readable(&self, sort: &str) -> bool {
        self.view.contains(sort) || self.gmwf.has_sort(sort) && is_structuring(sort)
    }
}

pub fn project_gmwf(g: &Gmwf, v: &View) -> Result<LocalGmwf, ProjectionError> {
    let targets = generate_target_artifacts(g)?;
    project_gmwf_from_targets(g, &targets, v)
}

/// As [`project_gmwf`] with the scenarios already enumerated.
pub fn project_gmwf_from_targets(
    g: &Gmwf,
    targets: &TargetArtifactSet,
    v: &View,
) -> Result<LocalGmwf, ProjectionError> {
    if let Some(a) = g.axioms.iter().find(|a| !v.contains(a)) {
        return Err(ProjectionError::AxiomNotVisible(a.clone()));
    }
    let mut ctx = StructuringContext::new();
    let projected = targets
        .iter()
        .map(|t| project_rooted_with(t, v, &mut ctx))
        .collect::<Result<Vec<_>, _>>()?;

    // number structuring sorts by first pre-order appearance
    let mut rename: BTreeMap<String, String> = BTreeMap::new();
    for p in &projected {
        for (_, n) in p.nodes() {
            if is_structuring(&n.label) && !rename.contains_key(&n.label) {
                let next = structuring_name(rename.len() + 1);
                rename.insert(n.label.clone(), next);
            }
        }
    }
    let renamed: Vec<Artifact> = projected.iter().map(|p| rename_sorts(p, &rename)).collect();
    let structuring: BTreeMap<String, String> = ctx
        .canon()
        .iter()
        .filter_map(|(shape, old)| rename.get(old).map(|new| (shape.clone(), new.clone())))
        .collect();
    let local_targets = TargetArtifactSet::from_artifacts(renamed);

    let mut productions: Vec<Production> = Vec::new();
    let mut seen = BTreeSet::new();
    for t in local_targets.iter() {
        for (_, n) in t.nodes() {
            if let Some(p) = &n.production {
                if seen.insert(p.clone()) {
                    productions.push(p.clone());
                }
            }
        }
    }
    let mut sorts: Vec<Sort> = g
        .sorts
        .iter()
        .filter(|s| v.contains(&s.name))
        .cloned()
        .collect();
    let mut extra: Vec<&String> = rename.values().collect();
    extra.sort_by_key(|n| structuring_index(n));
    sorts.extend(extra.into_iter().map(|n| Sort::new(n.clone())));

    Ok(LocalGmwf {
        view: v.clone(),
        gmwf: Gmwf {
            sorts,
            axioms: g.axioms.clone(),
            productions,
        },
        local_targets,
        structuring,
    })
}

/// Relabels sorts according to `map`, productions included.
pub fn rename_sorts(t: &Artifact, map: &BTreeMap<String, String>) -> Artifact {
    let get = |s: &str| map.get(s).cloned().unwrap_or_else(|| s.to_string());
    Artifact {
        label: get(&t.label),
        state: t.state,
        production: t
            .production
            .as_ref()
            .map(|p| Production::new(get(p.lhs()), p.rhs().iter().map(|s| get(s)), p.annotation())),
        children: t.children.iter().map(|c| rename_sorts(c, map)).collect(),
        payload: t.payload.clone(),
    }
}
