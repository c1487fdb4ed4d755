//! Per-actor execution: local grammar, replicas, commits and routing.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::enumeration::{
    ensure_axiom_visibility, generate_target_artifacts, EnumerationError, TargetArtifactSet,
};
use crate::expansion::{expand, normalize_bud_states, ExpansionError, GuidePolicy};
use crate::model::artifact::{Address, Artifact, NodeState};
use crate::model::grammar::{Accreditation, Annotation, Gmawfp, Production};
use crate::model::order::{conforms, is_complete, join};
use crate::model::validate::{validate_gmawfp, ValidationOptions, ValidationReport};
use crate::projection::{project_gmwf_from_targets, LocalGmwf, ProjectionError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("invalid specification:\n{0}")]
    Invalid(ValidationReport),
    #[error("unknown actor {0}")]
    UnknownActor(String),
    #[error("unknown case {0}")]
    UnknownCase(String),
    #[error("case {0} already exists")]
    CaseExists(String),
    #[error("only the initiator {0} may open cases")]
    NotInitiator(String),
    #[error("the grammar needs a single axiom to open cases")]
    MultipleAxioms,
    #[error("no replica held for case {0}")]
    NoReplica(String),
    #[error("replica of case {0} has uncommitted edits")]
    ReplicaInFlight(String),
    #[error("no node at address {0}")]
    InvalidAddress(Address),
    #[error("node at {0} is not a bud")]
    NotABud(Address),
    #[error("bud at {0} is locked")]
    LockedBud(Address),
    #[error("{actor} may not write {sort}")]
    NotAccredited { actor: String, sort: String },
    #[error("production {0} is not applicable here")]
    UnknownProduction(String),
    #[error("received artifact does not conform to the grammar")]
    NonConformingArtifact,
    #[error("received artifact conflicts with the local copy")]
    JoinConflict,
    #[error(transparent)]
    Expansion(#[from] ExpansionError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Enumeration(#[from] EnumerationError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RoutingMode {
    Forward,
    ReturnToSender,
    Terminate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub destinations: BTreeSet<String>,
    pub mode: RoutingMode,
}

impl RoutingDecision {
    /// Whether `actor` keeps working on the case itself.
    pub fn keeps(&self, actor: &str) -> bool {
        self.mode == RoutingMode::Forward && self.destinations.contains(actor)
    }

    /// Peers that must be sent the artifact.
    pub fn recipients<'a>(&'a self, current: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.destinations
            .iter()
            .map(String::as_str)
            .filter(move |d| *d != current)
    }
}

/// How an artifact reached a peer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DeliveryKind {
    Forward,
    Return,
}

impl From<RoutingMode> for DeliveryKind {
    fn from(m: RoutingMode) -> Self {
        match m {
            RoutingMode::ReturnToSender => DeliveryKind::Return,
            _ => DeliveryKind::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Op {
    Initiate,
    Develop,
    Commit,
    Discard,
    Deliver,
    Ack,
}

/// One event-log line.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Event {
    pub ts: u64,
    pub case_id: String,
    pub actor: String,
    pub op: Op,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addr: Option<Address>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub production: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub destinations: Option<BTreeSet<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<RoutingMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub from: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guides: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guide: Option<usize>,
}

impl Event {
    pub fn new(case_id: &str, actor: &str, op: Op) -> Self {
        Event {
            ts: 0,
            case_id: case_id.to_string(),
            actor: actor.to_string(),
            op,
            addr: None,
            production: None,
            destinations: None,
            mode: None,
            from: None,
            guides: None,
            guide: None,
        }
    }
}

/// Configuration shared by every case a peer handles.
#[derive(Debug, Clone)]
pub struct PeerConfig {
    pub actor: String,
    /// Specification with a single, universally readable axiom.
    pub spec: Arc<Gmawfp>,
    pub accreditation: Accreditation,
    pub local: LocalGmwf,
    pub targets: Arc<TargetArtifactSet>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CaseState {
    pub case_id: String,
    pub global: Artifact,
    pub replica: Option<Artifact>,
    /// Replica differs from the projection of `global`.
    pub dirty: bool,
    pub provenance: Option<String>,
    pub log: Vec<Event>,
}

impl CaseState {
    fn push(&mut self, mut e: Event) -> Event {
        e.ts = self.log.len() as u64;
        self.log.push(e.clone());
        e
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadyTask {
    pub addr: Address,
    pub sort: String,
    pub productions: Vec<Production>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitOutcome {
    pub result: Artifact,
    pub routing: RoutingDecision,
    pub guides: usize,
    pub chosen: usize,
    pub event: Event,
}

/// Validates the specification and builds one configuration per actor,
/// enumerating scenarios once.
pub fn configure_peers(spec: &Gmawfp) -> Result<Vec<PeerConfig>, EngineError> {
    let opts = ValidationOptions {
        ambiguity: false,
        ..ValidationOptions::default()
    };
    let report = validate_gmawfp(spec, &opts);
    if report.has_errors() {
        return Err(EngineError::Invalid(report));
    }
    let ext = Arc::new(ensure_axiom_visibility(spec));
    let targets = Arc::new(generate_target_artifacts(&ext.gmwf)?);
    ext.actors
        .iter()
        .map(|actor| {
            let accreditation = ext
                .accreditation(actor)
                .cloned()
                .ok_or_else(|| EngineError::UnknownActor(actor.clone()))?;
            let local = project_gmwf_from_targets(&ext.gmwf, &targets, &accreditation.view())?;
            Ok(PeerConfig {
                actor: actor.clone(),
                spec: ext.clone(),
                accreditation,
                local,
                targets: targets.clone(),
            })
        })
        .collect()
}

pub fn configure_peer(spec: &Gmawfp, actor: &str) -> Result<PeerConfig, EngineError> {
    if !spec.has_actor(actor) {
        return Err(EngineError::UnknownActor(actor.to_string()));
    }
    configure_peers(spec)?
        .into_iter()
        .find(|c| c.actor == actor)
        .ok_or_else(|| EngineError::UnknownActor(actor.to_string()))
}

/// A fresh case: one unlocked bud of the axiom.
pub fn initiate_case(spec: &Gmawfp) -> Result<Artifact, EngineError> {
    match spec.gmwf.axioms.as_slice() {
        [axiom] => Ok(Artifact::unlocked(axiom.clone())),
        _ => Err(EngineError::MultipleAxioms),
    }
}

/// Where a freshly committed artifact goes next.
///
/// Writers of the unlocked buds created by this commit receive it; the
/// current actor keeps it when it still has unlocked buds it may write.
/// Otherwise it goes back to whoever sent it, and a complete artifact ends
/// the case.
pub fn route(
    t_f: &Artifact,
    prev: Option<&Artifact>,
    spec: &Gmawfp,
    current: &str,
    sender: Option<&str>,
) -> RoutingDecision {
    if is_complete(t_f) {
        return RoutingDecision {
            destinations: BTreeSet::new(),
            mode: RoutingMode::Terminate,
        };
    }
    let mut destinations = BTreeSet::new();
    let mut current_ready = false;
    let writes = |actor: &str, sort: &str| {
        spec.accreditation(actor)
            .map(|a| a.write.contains(sort))
            .unwrap_or(false)
    };
    for (addr, bud) in t_f.buds() {
        if bud.state != NodeState::UnlockedBud {
            continue;
        }
        if writes(current, &bud.label) {
            current_ready = true;
        }
        let created = prev.is_none_or(|p| p.node(&addr).is_none());
        if created {
            destinations.extend(spec.writers(&bud.label).map(str::to_string));
        }
    }
    if current_ready {
        destinations.insert(current.to_string());
    }
    if !destinations.is_empty() {
        return RoutingDecision {
            destinations,
            mode: RoutingMode::Forward,
        };
    }
    RoutingDecision {
        destinations: sender.map(str::to_string).into_iter().collect(),
        mode: RoutingMode::ReturnToSender,
    }
}

#[derive(Debug, Clone)]
pub struct PeerState {
    pub config: Arc<PeerConfig>,
    cases: BTreeMap<String, CaseState>,
}

impl PeerState {
    pub fn new(config: Arc<PeerConfig>) -> Self {
        PeerState {
            config,
            cases: BTreeMap::new(),
        }
    }

    pub fn actor(&self) -> &str {
        &self.config.actor
    }

    pub fn case(&self, case_id: &str) -> Option<&CaseState> {
        self.cases.get(case_id)
    }

    pub fn cases(&self) -> impl Iterator<Item = &CaseState> {
        self.cases.values()
    }

    fn case_mut(&mut self, case_id: &str) -> Result<&mut CaseState, EngineError> {
        self.cases
            .get_mut(case_id)
            .ok_or_else(|| EngineError::UnknownCase(case_id.to_string()))
    }

    /// Projection of `global` if it is a valid local artifact.
    pub fn replica_of(&self, global: &Artifact) -> Option<Artifact> {
        let local = &self.config.local;
        local
            .project(global)
            .ok()
            .filter(|r| conforms(r, &local.gmwf))
    }

    pub fn open_case(&mut self, case_id: &str) -> Result<Event, EngineError> {
        let spec = &self.config.spec;
        if self.config.actor != spec.initiator {
            return Err(EngineError::NotInitiator(spec.initiator.clone()));
        }
        if self.cases.contains_key(case_id) {
            return Err(EngineError::CaseExists(case_id.to_string()));
        }
        let global = initiate_case(spec)?;
        let replica = self.replica_of(&global);
        let mut case = CaseState {
            case_id: case_id.to_string(),
            global,
            replica,
            dirty: false,
            provenance: None,
            log: Vec::new(),
        };
        let e = case.push(Event::new(case_id, &self.config.actor, Op::Initiate));
        self.cases.insert(case_id.to_string(), case);
        Ok(e)
    }

    pub fn list_ready_tasks(&self, case_id: &str) -> Result<Vec<ReadyTask>, EngineError> {
        let case = self
            .case(case_id)
            .ok_or_else(|| EngineError::UnknownCase(case_id.to_string()))?;
        let replica = case
            .replica
            .as_ref()
            .ok_or_else(|| EngineError::NoReplica(case_id.to_string()))?;
        let config = &self.config;
        let write = &config.accreditation.write;
        Ok(replica
            .buds()
            .into_iter()
            .filter(|(_, b)| b.state == NodeState::UnlockedBud && write.contains(&b.label))
            .map(|(addr, b)| ReadyTask {
                productions: config
                    .local
                    .gmwf
                    .productions_for(&b.label)
                    .filter(|p| {
                        let next = grow(replica, &addr, p);
                        expand(
                            &case.global,
                            &next,
                            &config.targets,
                            &config.local,
                            GuidePolicy::First,
                        )
                        .is_ok()
                    })
                    .cloned()
                    .collect(),
                addr,
                sort: b.label.clone(),
            })
            .filter(|t| !t.productions.is_empty())
            .collect())
    }

    pub fn develop_bud(
        &mut self,
        case_id: &str,
        addr: &Address,
        p: &Production,
    ) -> Result<Event, EngineError> {
        let config = self.config.clone();
        let case = self.case_mut(case_id)?;
        let replica = case
            .replica
            .as_ref()
            .ok_or_else(|| EngineError::NoReplica(case_id.to_string()))?;
        let node = replica
            .node(addr)
            .ok_or_else(|| EngineError::InvalidAddress(addr.clone()))?;
        if !node.is_bud() {
            return Err(EngineError::NotABud(addr.clone()));
        }
        if node.state == NodeState::LockedBud {
            return Err(EngineError::LockedBud(addr.clone()));
        }
        if !config.accreditation.write.contains(&node.label) {
            return Err(EngineError::NotAccredited {
                actor: config.actor.clone(),
                sort: node.label.clone(),
            });
        }
        if p.lhs() != node.label || !config.local.gmwf.has_production(p) {
            return Err(EngineError::UnknownProduction(p.to_string()));
        }

        let mut next = grow(replica, addr, p);

        // lock states follow the global artifact this edit would produce
        let trial = expand(
            &case.global,
            &next,
            &config.targets,
            &config.local,
            GuidePolicy::First,
        )?;
        if let Ok(fresh) = config.local.project(&trial.result) {
            copy_bud_states(&mut next, &fresh);
        }
        case.replica = Some(next);
        case.dirty = true;
        let mut e = Event::new(case_id, &config.actor, Op::Develop);
        e.addr = Some(addr.clone());
        e.production = Some(p.to_string());
        Ok(case.push(e))
    }

    /// Attaches opaque task data to a node of the replica.
    pub fn set_payload(
        &mut self,
        case_id: &str,
        addr: &Address,
        payload: Vec<u8>,
    ) -> Result<(), EngineError> {
        let write = self.config.accreditation.write.clone();
        let actor = self.config.actor.clone();
        let case = self.case_mut(case_id)?;
        let replica = case
            .replica
            .as_mut()
            .ok_or_else(|| EngineError::NoReplica(case_id.to_string()))?;
        let node = replica
            .node_mut(addr)
            .ok_or_else(|| EngineError::InvalidAddress(addr.clone()))?;
        if !write.contains(&node.label) {
            return Err(EngineError::NotAccredited {
                actor,
                sort: node.label.clone(),
            });
        }
        node.payload = Some(payload);
        case.dirty = true;
        Ok(())
    }

    pub fn commit_case(
        &mut self,
        case_id: &str,
        policy: GuidePolicy,
    ) -> Result<CommitOutcome, EngineError> {
        let config = self.config.clone();
        let case = self.case_mut(case_id)?;
        let replica = case
            .replica
            .as_ref()
            .ok_or_else(|| EngineError::NoReplica(case_id.to_string()))?;
        let (result, guides, chosen, routing) = if case.dirty {
            let ex = expand(
                &case.global,
                replica,
                &config.targets,
                &config.local,
                policy,
            )?;
            let routing = route(
                &ex.result,
                Some(&case.global),
                &config.spec,
                &config.actor,
                case.provenance.as_deref(),
            );
            (ex.result, ex.guides, ex.chosen, routing)
        } else {
            let routing = match &case.provenance {
                Some(sender) if !is_complete(&case.global) => RoutingDecision {
                    destinations: BTreeSet::from([sender.clone()]),
                    mode: RoutingMode::ReturnToSender,
                },
                _ => route(
                    &case.global,
                    Some(&case.global),
                    &config.spec,
                    &config.actor,
                    None,
                ),
            };
            (case.global.clone(), 0, 0, routing)
        };
        case.global = result.clone();
        case.dirty = false;
        let keep = routing.keeps(&config.actor) || routing.mode == RoutingMode::Terminate;
        let mut e = Event::new(case_id, &config.actor, Op::Commit);
        e.destinations = Some(routing.destinations.clone());
        e.mode = Some(routing.mode);
        e.guides = Some(guides);
        e.guide = Some(chosen);
        let event = case.push(e);
        let replica = keep.then(|| self.replica_of(&result)).flatten();
        self.case_mut(case_id)?.replica = replica;
        Ok(CommitOutcome {
            result,
            routing,
            guides,
            chosen,
            event,
        })
    }

    /// Drops uncommitted edits.
    pub fn discard(&mut self, case_id: &str) -> Result<Event, EngineError> {
        let actor = self.config.actor.clone();
        let global = self.case_mut(case_id)?.global.clone();
        let replica = self.replica_of(&global);
        let case = self.case_mut(case_id)?;
        case.replica = replica;
        case.dirty = false;
        Ok(case.push(Event::new(case_id, &actor, Op::Discard)))
    }

    pub fn on_receive(
        &mut self,
        case_id: &str,
        t: &Artifact,
        sender: &str,
        kind: DeliveryKind,
    ) -> Result<Event, EngineError> {
        if !conforms(t, &self.config.spec.gmwf) {
            return Err(EngineError::NonConformingArtifact);
        }
        let global = match self.cases.get(case_id) {
            Some(c) if c.dirty => return Err(EngineError::ReplicaInFlight(case_id.to_string())),
            Some(c) => normalize_bud_states(&join(&c.global, t).ok_or(EngineError::JoinConflict)?),
            None => t.clone(),
        };
        let replica = self.replica_of(&global);
        let actor = self.config.actor.clone();
        let case = self
            .cases
            .entry(case_id.to_string())
            .or_insert_with(|| CaseState {
                case_id: case_id.to_string(),
                global: global.clone(),
                replica: None,
                dirty: false,
                provenance: None,
                log: Vec::new(),
            });
        case.global = global;
        case.replica = replica;
        if kind == DeliveryKind::Forward || case.provenance.is_none() {
            case.provenance = Some(sender.to_string());
        }
        let mut e = Event::new(case_id, &actor, Op::Deliver);
        e.from = Some(sender.to_string());
        e.mode = Some(match kind {
            DeliveryKind::Forward => RoutingMode::Forward,
            DeliveryKind::Return => RoutingMode::ReturnToSender,
        });
        Ok(case.push(e))
    }
}

fn copy_bud_states(into: &mut Artifact, from: &Artifact) {
    if into.label != from.label {
        return;
    }
    if into.is_bud() && from.is_bud() {
        into.state = from.state;
        return;
    }
    if into.children.len() == from.children.len() {
        for (a, b) in into.children.iter_mut().zip(&from.children) {
            copy_bud_states(a, b);
        }
    }
}

/// `replica` with the bud at `addr` developed by `p`.
fn grow(replica: &Artifact, addr: &Address, p: &Production) -> Artifact {
    let mut next = replica.clone();
    let target = next.node_mut(addr).expect("address checked");
    let par = p.annotation() == Annotation::Parallel;
    let children = p
        .rhs()
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let state = if par || i == 0 {
                NodeState::UnlockedBud
            } else {
                NodeState::LockedBud
            };
            Artifact::bud(s.clone(), state)
        })
        .collect();
    let payload = target.payload.take();
    *target = Artifact::developed(p.clone(), children);
    target.payload = payload;
    next
}
