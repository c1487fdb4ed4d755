//! Deterministic in-memory multi-peer simulator.
//!
//! Every actor runs a [`PeerState`]; committed artifacts travel through
//! per-(sender, receiver) FIFO channels and are delivered as soon as the
//! receiver has no uncommitted edits on the case.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use gmwf_core::engine::{
    configure_peers, CommitOutcome, DeliveryKind, EngineError, Event, Op, PeerConfig, PeerState,
    ReadyTask, RoutingMode,
};
use gmwf_core::expansion::GuidePolicy;
use gmwf_core::format::canonical_json;
use gmwf_core::{is_complete, Address, Artifact, Gmawfp, Production};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_CASE: &str = "case-1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Action {
    Initiate,
    Develop,
    Commit,
    Discard,
    Ack,
}

/// One scripted actor action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Step {
    pub actor: String,
    pub action: Action,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub addr: Option<Address>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub production: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guide_policy: Option<String>,
}

impl Step {
    pub fn new(actor: &str, action: Action) -> Self {
        Step {
            actor: actor.to_string(),
            action,
            case: None,
            addr: None,
            production: None,
            guide_policy: None,
        }
    }

    pub fn case_id(&self) -> &str {
        self.case.as_deref().unwrap_or(DEFAULT_CASE)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Script {
    pub steps: Vec<Step>,
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("step is missing its {0}")]
    MissingField(&'static str),
    #[error("bad production {text:?}: {reason}")]
    BadProduction { text: String, reason: String },
    #[error("bad guide policy {0:?}")]
    BadPolicy(String),
    #[error("case {0} has already terminated")]
    Terminated(String),
    #[error("step {index}: {source}")]
    AtStep {
        index: usize,
        #[source]
        source: Box<SimError>,
    },
}

impl SimError {
    /// The engine error behind this failure, if any.
    pub fn engine(&self) -> Option<&EngineError> {
        match self {
            SimError::Engine(e) => Some(e),
            SimError::AtStep { source, .. } => source.engine(),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
struct Message {
    case_id: String,
    artifact: Artifact,
    kind: DeliveryKind,
}

/// Final state of one case.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CaseOutcome {
    pub artifact: Artifact,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimTrace {
    pub events: Vec<Event>,
    pub cases: BTreeMap<String, CaseOutcome>,
}

impl SimTrace {
    pub fn to_canonical(&self) -> String {
        canonical_json(self)
    }
}

pub struct World {
    spec: Arc<Gmawfp>,
    peers: BTreeMap<String, PeerState>,
    queues: BTreeMap<(String, String), VecDeque<Message>>,
    clock: u64,
    trace: Vec<Event>,
    latest: BTreeMap<String, Artifact>,
    terminated: BTreeSet<String>,
}

impl World {
    pub fn new(spec: &Gmawfp) -> Result<Self, SimError> {
        let configs = configure_peers(spec)?
            .into_iter()
            .map(Arc::new)
            .collect::<Vec<_>>();
        Ok(Self::from_configs(&configs))
    }

    /// Builds a world from peers configured elsewhere.
    pub fn from_configs(configs: &[Arc<PeerConfig>]) -> Self {
        let spec = configs
            .first()
            .map(|c| c.spec.clone())
            .expect("a valid process has at least one actor");
        World {
            spec,
            peers: configs
                .iter()
                .map(|c| (c.actor.clone(), PeerState::new(c.clone())))
                .collect(),
            queues: BTreeMap::new(),
            clock: 0,
            trace: Vec::new(),
            latest: BTreeMap::new(),
            terminated: BTreeSet::new(),
        }
    }

    pub fn spec(&self) -> &Gmawfp {
        &self.spec
    }

    pub fn peer(&self, actor: &str) -> Result<&PeerState, EngineError> {
        self.peers
            .get(actor)
            .ok_or_else(|| EngineError::UnknownActor(actor.to_string()))
    }

    fn peer_mut(&mut self, actor: &str) -> Result<&mut PeerState, EngineError> {
        self.peers
            .get_mut(actor)
            .ok_or_else(|| EngineError::UnknownActor(actor.to_string()))
    }

    pub fn trace(&self) -> &[Event] {
        &self.trace
    }

    pub fn has_case(&self, case_id: &str) -> bool {
        self.latest.contains_key(case_id)
    }

    pub fn case_ids(&self) -> impl Iterator<Item = &String> {
        self.latest.keys()
    }

    pub fn is_terminated(&self, case_id: &str) -> bool {
        self.terminated.contains(case_id)
    }

    /// Most recently committed global artifact of a case.
    pub fn latest(&self, case_id: &str) -> Option<&Artifact> {
        self.latest.get(case_id)
    }

    /// Messages not yet delivered.
    pub fn pending(&self) -> usize {
        self.queues.values().map(VecDeque::len).sum()
    }

    fn record(&mut self, mut e: Event) -> Event {
        self.clock += 1;
        e.ts = self.clock;
        self.trace.push(e.clone());
        e
    }

    pub fn initiate(&mut self, actor: &str, case_id: &str) -> Result<Event, SimError> {
        let e = self.peer_mut(actor)?.open_case(case_id)?;
        let global = self
            .peer(actor)?
            .case(case_id)
            .expect("just opened")
            .global
            .clone();
        self.latest.insert(case_id.to_string(), global);
        Ok(self.record(e))
    }

    pub fn develop(
        &mut self,
        actor: &str,
        case_id: &str,
        addr: &Address,
        p: &Production,
    ) -> Result<Event, SimError> {
        self.check_open(case_id)?;
        self.check_held(actor, case_id)?;
        let e = self.peer_mut(actor)?.develop_bud(case_id, addr, p)?;
        Ok(self.record(e))
    }

    pub fn commit(
        &mut self,
        actor: &str,
        case_id: &str,
        policy: GuidePolicy,
    ) -> Result<CommitOutcome, SimError> {
        self.check_open(case_id)?;
        self.check_held(actor, case_id)?;
        let mut out = self.peer_mut(actor)?.commit_case(case_id, policy)?;
        out.event = self.record(out.event);
        self.latest.insert(case_id.to_string(), out.result.clone());
        if out.routing.mode == RoutingMode::Terminate {
            self.terminated.insert(case_id.to_string());
        }
        let kind = DeliveryKind::from(out.routing.mode);
        for to in out.routing.recipients(actor) {
            self.queues
                .entry((actor.to_string(), to.to_string()))
                .or_default()
                .push_back(Message {
                    case_id: case_id.to_string(),
                    artifact: out.result.clone(),
                    kind,
                });
        }
        self.pump()?;
        Ok(out)
    }

    pub fn discard(&mut self, actor: &str, case_id: &str) -> Result<Event, SimError> {
        self.check_held(actor, case_id)?;
        let e = self.peer_mut(actor)?.discard(case_id)?;
        let e = self.record(e);
        self.pump()?;
        Ok(e)
    }

    /// Records that an actor has seen the routing outcome of a case.
    pub fn ack(&mut self, actor: &str, case_id: &str) -> Result<Event, SimError> {
        self.peer(actor)?;
        if !self.has_case(case_id) {
            return Err(EngineError::UnknownCase(case_id.to_string()).into());
        }
        Ok(self.record(Event::new(case_id, actor, Op::Ack)))
    }

    fn check_open(&self, case_id: &str) -> Result<(), SimError> {
        if self.terminated.contains(case_id) {
            return Err(SimError::Terminated(case_id.to_string()));
        }
        Ok(())
    }

    /// A case the actor has never received reads as a missing replica.
    fn check_held(&self, actor: &str, case_id: &str) -> Result<(), SimError> {
        if self.has_case(case_id) && self.peer(actor)?.case(case_id).is_none() {
            return Err(EngineError::NoReplica(case_id.to_string()).into());
        }
        Ok(())
    }

    /// Delivers queued messages until every channel is empty or blocked.
    pub fn pump(&mut self) -> Result<(), SimError> {
        loop {
            let mut ready = None;
            for ((from, to), q) in &self.queues {
                let Some(m) = q.front() else { continue };
                let busy = self.peers[to].case(&m.case_id).is_some_and(|c| c.dirty);
                if !busy {
                    ready = Some((from.clone(), to.clone()));
                    break;
                }
            }
            let Some(key) = ready else { return Ok(()) };
            let m = self
                .queues
                .get_mut(&key)
                .and_then(VecDeque::pop_front)
                .expect("front checked");
            let (from, to) = key;
            let e = self
                .peer_mut(&to)?
                .on_receive(&m.case_id, &m.artifact, &from, m.kind)?;
            self.record(e);
        }
    }

    pub fn ready_tasks(&self, actor: &str, case_id: &str) -> Result<Vec<ReadyTask>, EngineError> {
        self.peer(actor)?.list_ready_tasks(case_id)
    }

    /// Applies one step.
    pub fn apply(&mut self, step: &Step) -> Result<(), SimError> {
        let case_id = step.case_id().to_string();
        let actor = step.actor.as_str();
        match step.action {
            Action::Initiate => {
                self.initiate(actor, &case_id)?;
            }
            Action::Develop => {
                if !self.has_case(&case_id) && actor == self.spec.initiator {
                    self.initiate(actor, &case_id)?;
                }
                let addr = step.addr.clone().ok_or(SimError::MissingField("addr"))?;
                let text = step
                    .production
                    .as_deref()
                    .ok_or(SimError::MissingField("production"))?;
                let p = parse_production(text)?;
                self.develop(actor, &case_id, &addr, &p)?;
            }
            Action::Commit => {
                let policy = parse_policy(step.guide_policy.as_deref())?;
                self.commit(actor, &case_id, policy)?;
            }
            Action::Discard => {
                self.discard(actor, &case_id)?;
            }
            Action::Ack => {
                self.ack(actor, &case_id)?;
            }
        }
        Ok(())
    }

    pub fn outcome(&self) -> SimTrace {
        SimTrace {
            events: self.trace.clone(),
            cases: self
                .latest
                .iter()
                .map(|(id, t)| {
                    (
                        id.clone(),
                        CaseOutcome {
                            artifact: t.clone(),
                            complete: is_complete(t),
                        },
                    )
                })
                .collect(),
        }
    }
}

pub fn parse_production(text: &str) -> Result<Production, SimError> {
    text.parse()
        .map_err(
            |e: gmwf_core::model::grammar::ProductionParseError| SimError::BadProduction {
                text: text.to_string(),
                reason: e.to_string(),
            },
        )
}

pub fn parse_policy(text: Option<&str>) -> Result<GuidePolicy, SimError> {
    match text {
        None => Ok(GuidePolicy::First),
        Some(s) => s.parse().map_err(|_| SimError::BadPolicy(s.to_string())),
    }
}

/// Runs a whole script on a fresh world.
pub fn simulate(spec: &Gmawfp, script: &Script) -> Result<SimTrace, SimError> {
    let mut world = World::new(spec)?;
    for (index, step) in script.steps.iter().enumerate() {
        world.apply(step).map_err(|e| SimError::AtStep {
            index,
            source: Box::new(e),
        })?;
    }
    Ok(world.outcome())
}
