//! Acceptance run: one PASS/FAIL line per criterion.
//!
//! Criteria listed in `EXPECTED_FAILURES` are known not to hold; the run
//! still evaluates them and prints their counts, and fails if the set of
//! failing criteria changes in either direction.

mod common;

use std::collections::BTreeSet;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use common::{load_script, load_spec, script_path, spec_path};
use gmwf_core::engine::{configure_peers, Op, PeerConfig, PeerState, RoutingMode};
use gmwf_core::enumeration::{
    detect_recursive_sorts, ensure_axiom_visibility, generate_target_artifacts,
};
use gmwf_core::expansion::{erase_structuring, expand, GuidePolicy};
use gmwf_core::model::order::join;
use gmwf_core::projection::{project_artifact, project_artifact_rooted, project_gmwf, LocalGmwf};
use gmwf_core::{
    is_prefix, is_structuring, is_update, validate_gmawfp, Artifact, Gmawfp, ValidationOptions,
};
use gmwf_oracles::brute;
use gmwf_oracles::fixtures::{
    art_1, art_2, expected_local_productions, extended, published_ae_productions,
};
use gmwf_oracles::random::{random_spec, Limits};
use gmwf_oracles::reference::{self, anonymize, expand_named};
use gmwf_workbench::sim::{simulate, Script, World};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EXPECTED_FAILURES: &[&str] = &["local-conformance-suite", "random-suite"];

struct Outcome {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn outcome(name: &'static str, pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        name,
        pass,
        detail: detail.into(),
    }
}

fn ms(d: Duration) -> String {
    format!("{} ms", d.as_millis())
}

fn peer_review() -> Gmawfp {
    ensure_axiom_visibility(&load_spec("peer-review"))
}

const ACTORS: [&str; 4] = ["EC", "AE", "R1", "R2"];

fn enumeration_golden() -> Outcome {
    let start = Instant::now();
    let targets = generate_target_artifacts(&peer_review().gmwf);
    let took = start.elapsed();
    match targets {
        Ok(t) => {
            let ok = t.artifacts == vec![extended(art_1()), extended(art_2())]
                && took < Duration::from_secs(1);
            outcome(
                "enumeration-golden",
                ok,
                format!("{} targets in {}", t.len(), ms(took)),
            )
        }
        Err(e) => outcome("enumeration-golden", false, e.to_string()),
    }
}

fn local_production_keys(local: &LocalGmwf) -> BTreeSet<String> {
    let names: Vec<String> = local.structuring_sorts().map(|s| s.name.clone()).collect();
    let texts: Vec<String> = local
        .gmwf
        .productions
        .iter()
        .map(|p| p.to_string())
        .collect();
    let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    expand_named(&refs, &name_refs)
}

fn oracle_keys(spec: &Gmawfp, actor: &str) -> BTreeSet<String> {
    let view = spec.accreditation(actor).unwrap().read.clone();
    let mut out = BTreeSet::new();
    for t in brute::targets(&spec.gmwf) {
        for tree in reference::project(&t, &view) {
            tree.productions(&mut out);
        }
    }
    out
}

fn grammar_projection_golden() -> Outcome {
    let spec = peer_review();
    let mut notes = Vec::new();
    let mut ok = true;
    for actor in ACTORS {
        let local = project_gmwf(&spec.gmwf, &spec.view(actor).unwrap()).unwrap();
        let got = local_production_keys(&local);
        let expected = expand_named(&expected_local_productions(actor), &["S1", "S2", "S3"]);
        let oracle = oracle_keys(&spec, actor);
        let row_ok =
            got == expected && oracle == expected && got.len() == local.gmwf.productions.len();
        ok &= row_ok;
        notes.push(format!("{actor}:{}", local.gmwf.productions.len()));
    }
    let ec = project_gmwf(&spec.gmwf, &spec.view("EC").unwrap()).unwrap();
    ok &= ec.gmwf.productions.len() == 14;
    let published = expand_named(&published_ae_productions(), &["S1", "S2"]);
    let variance: Vec<String> = published
        .symmetric_difference(&oracle_keys(&spec, "AE"))
        .cloned()
        .collect();
    ok &= variance == ["A -> ε", "A_G -> ε"];
    outcome(
        "grammar-projection-golden",
        ok,
        format!(
            "{} productions; AE variance {:?}",
            notes.join(" "),
            variance
        ),
    )
}

fn artifact_projection_golden() -> Outcome {
    let spec = peer_review();
    let t = extended(art_2());
    let r1 = project_artifact_rooted(&t, &spec.view("R1").unwrap()).unwrap();
    let ec = project_artifact_rooted(&t, &spec.view("EC").unwrap()).unwrap();
    let structuring = ec
        .nodes()
        .iter()
        .filter(|(_, n)| is_structuring(&n.label))
        .count();
    let c = &ec.children[0].children[0];
    let c_prod = c
        .production
        .as_ref()
        .map(|p| p.to_string())
        .unwrap_or_default();
    let c_ok = c.children.len() == 2
        && is_structuring(&c.children[0].label)
        && c_prod == format!("C -> {} ; F", c.children[0].label);
    let ok = r1.to_string() == "A_G[C[G1[H1 ; I1]]]"
        && anonymize(&ec).render() == "A_G[A[C[#[#[H1 ; I1] || #[H2 ; I2]] ; F] ; D]]"
        && structuring == 3
        && c_ok;
    outcome(
        "artifact-projection-golden",
        ok,
        format!("R1 {r1}; EC has {structuring} structuring nodes, {c_prod}"),
    )
}

/// Targets plus every single-cut truncation.
fn truncation_domain(spec: &Gmawfp) -> Vec<Artifact> {
    let targets = generate_target_artifacts(&spec.gmwf).unwrap();
    let mut out = Vec::new();
    for t in targets.iter() {
        out.push(t.clone());
        out.extend(brute::truncations(t).into_iter().filter(|c| c != t));
    }
    let mut seen = BTreeSet::new();
    out.retain(|t| seen.insert(gmwf_core::format::canonical_json(t)));
    out
}

#[derive(Default)]
struct PropCounts {
    checked: usize,
    tree_fail: usize,
    local_fail: usize,
    conf_checked_targets: usize,
    conf_fail_targets: usize,
    conf_checked_prefixes: usize,
    conf_fail_prefixes: usize,
    preimage_checked: usize,
    preimage_fail: usize,
}

impl PropCounts {
    fn conf_fail(&self) -> usize {
        self.conf_fail_targets + self.conf_fail_prefixes
    }
}

fn check_props(spec: &Gmawfp, counts: &mut PropCounts) {
    let domain = truncation_domain(spec);
    let targets = generate_target_artifacts(&spec.gmwf).unwrap();
    for actor in &spec.actors {
        let v = spec.view(actor).unwrap();
        let local = project_gmwf(&spec.gmwf, &v).unwrap();

        // stability of the grammar projection
        let rec = detect_recursive_sorts(&local.gmwf);
        let report = validate_gmawfp(
            &Gmawfp {
                gmwf: local.gmwf.clone(),
                actors: vec![actor.clone()],
                accreditations: vec![gmwf_core::Accreditation {
                    actor: actor.clone(),
                    read: local.gmwf.sort_names().map(String::from).collect(),
                    write: BTreeSet::new(),
                    execute: BTreeSet::new(),
                }],
                initiator: actor.clone(),
            },
            &ValidationOptions {
                axiom_visibility: true,
                ambiguity: false,
            },
        );
        if !rec.is_empty()
            || local.gmwf.axioms != spec.gmwf.axioms
            || report.has_code("unknown-sort")
        {
            counts.local_fail += 1;
        }

        for t in &domain {
            counts.checked += 1;
            let forest = project_artifact(t, &v, &mut local.context());
            if forest.len() != 1 {
                counts.tree_fail += 1;
                continue;
            }
            let conforming = brute::conforms(&forest[0], &local.gmwf);
            if targets.contains(t) {
                counts.conf_checked_targets += 1;
                counts.conf_fail_targets += usize::from(!conforming);
            } else {
                counts.conf_checked_prefixes += 1;
                counts.conf_fail_prefixes += usize::from(!conforming);
            }
        }

        let images: Vec<Artifact> = targets
            .iter()
            .filter_map(|t| local.project(t).ok())
            .collect();
        for lt in local.local_targets.iter() {
            counts.preimage_checked += 1;
            if !images.contains(lt) {
                counts.preimage_fail += 1;
            }
        }
    }
}

fn prop_suites() -> (Outcome, Outcome, Outcome) {
    let mut c = PropCounts::default();
    check_props(&peer_review(), &mut c);
    let p1 = outcome(
        "single-tree-suite",
        c.tree_fail == 0,
        format!(
            "{} (artifact, view) pairs, {} failures",
            c.checked, c.tree_fail
        ),
    );
    let p3 = outcome(
        "local-conformance-suite",
        c.conf_fail() == 0,
        format!(
            "targets {}/{} conform; prefixes {}/{} conform",
            c.conf_checked_targets - c.conf_fail_targets,
            c.conf_checked_targets,
            c.conf_checked_prefixes - c.conf_fail_prefixes,
            c.conf_checked_prefixes
        ),
    );
    let p4 = outcome(
        "preimage-suite",
        c.preimage_fail == 0 && c.preimage_checked > 0,
        format!(
            "{} local targets, {} without preimage",
            c.preimage_checked, c.preimage_fail
        ),
    );
    (p1, p3, p4)
}

#[derive(Default)]
struct SoundCounts {
    triples: usize,
    failures: Vec<String>,
}

/// Every single-bud development open to `peer` on `case_id`, checked
/// against the expansion guarantees.
fn probe_developments(peer: &PeerState, case_id: &str, counts: &mut SoundCounts) {
    let Some(case) = peer.case(case_id) else {
        return;
    };
    let Ok(tasks) = peer.list_ready_tasks(case_id) else {
        return;
    };
    let config = &peer.config;
    for task in tasks {
        for p in &task.productions {
            counts.triples += 1;
            let mut trial = peer.clone();
            if let Err(e) = trial.develop_bud(case_id, &task.addr, p) {
                counts
                    .failures
                    .push(format!("{} {} {p}: {e}", config.actor, task.addr));
                continue;
            }
            let t_maj = trial.case(case_id).unwrap().replica.clone().unwrap();
            if let Err(msg) = check_expansion(&case.global, &t_maj, config) {
                counts
                    .failures
                    .push(format!("{} {} {p}: {msg}", config.actor, task.addr));
            }
        }
    }
}

fn check_expansion(
    t: &Artifact,
    t_maj: &Artifact,
    config: &PeerConfig,
) -> Result<Artifact, String> {
    let ex = expand(t, t_maj, &config.targets, &config.local, GuidePolicy::First)
        .map_err(|e| e.to_string())?;
    if ex.guides == 0 {
        return Err("no guide".into());
    }
    if !gmwf_core::conforms(&ex.result, &config.spec.gmwf) {
        return Err("result does not conform".into());
    }
    if !is_prefix(t, &ex.result) {
        return Err("input is not a prefix of the result".into());
    }
    let back = config
        .local
        .project(&ex.result)
        .map_err(|e| e.to_string())?;
    if !is_prefix(&erase_structuring(t_maj), &erase_structuring(&back)) {
        return Err("update is not a prefix of the result's projection".into());
    }
    Ok(ex.result)
}

fn expansion_suite() -> Outcome {
    let start = Instant::now();
    let spec = peer_review();
    let mut counts = SoundCounts::default();
    for name in ["rejection", "acceptance"] {
        let script = load_script(name);
        let mut world = World::new(&spec).unwrap();
        for step in &script.steps {
            world.apply(step).unwrap();
            for actor in ACTORS {
                probe_developments(world.peer(actor).unwrap(), step.case_id(), &mut counts);
            }
        }
    }
    let took = start.elapsed();
    outcome(
        "expansion-suite",
        counts.failures.is_empty() && counts.triples > 0 && took < Duration::from_secs(10),
        format!(
            "{} triples, {} failures{} in {}",
            counts.triples,
            counts.failures.len(),
            counts
                .failures
                .first()
                .map(|f| format!(" (first: {f})"))
                .unwrap_or_default(),
            ms(took)
        ),
    )
}

fn e2e_replays() -> Outcome {
    let spec = load_spec("peer-review");
    let rejection = simulate(&spec, &load_script("rejection"));
    let acceptance = simulate(&spec, &load_script("acceptance"));
    let (Ok(rej), Ok(acc)) = (rejection, acceptance) else {
        return outcome("e2e-replays", false, "a script failed to replay");
    };
    let rej_ok = rej.cases["case-1"].artifact == extended(art_1()) && rej.cases["case-1"].complete;
    let acc_ok = acc.cases["case-1"].artifact == extended(art_2()) && acc.cases["case-1"].complete;
    let hops: Vec<String> = acc
        .events
        .iter()
        .filter(|e| e.op == Op::Commit)
        .map(|e| {
            let to: Vec<&str> = e
                .destinations
                .iter()
                .flatten()
                .map(String::as_str)
                .collect();
            match e.mode {
                Some(RoutingMode::Terminate) => format!("{}:end", e.actor),
                _ => format!("{}->{}", e.actor, to.join("+")),
            }
        })
        .collect();
    let expected = [
        "EC->AE",
        "AE->R1+R2",
        "R1->AE",
        "R2->AE",
        "AE->EC",
        "EC:end",
    ];
    let merged = acc
        .events
        .iter()
        .filter(|e| {
            e.op == Op::Deliver && e.actor == "AE" && e.mode == Some(RoutingMode::ReturnToSender)
        })
        .count();
    let ok = rej_ok && acc_ok && hops == expected && merged == 2;
    outcome(
        "e2e-replays",
        ok,
        format!(
            "rejection final ok={rej_ok}; acceptance final ok={acc_ok}; route {}",
            hops.join(" ")
        ),
    )
}

/// Random walk over one random process; returns the number of commits.
fn random_walk(spec: &Gmawfp, rng: &mut ChaCha8Rng, counts: &mut SoundCounts) -> (usize, bool) {
    let configs: Vec<Arc<PeerConfig>> = match configure_peers(spec) {
        Ok(c) => c.into_iter().map(Arc::new).collect(),
        Err(e) => {
            counts.failures.push(format!("configure: {e}"));
            return (0, false);
        }
    };
    let ext = configs[0].spec.clone();
    let mut world = World::from_configs(&configs);
    let case = "r";
    if let Err(e) = world.initiate(&ext.initiator, case) {
        counts.failures.push(format!("initiate: {e}"));
        return (0, false);
    }
    let mut commits = 0;
    for _ in 0..200 {
        if world.is_terminated(case) {
            break;
        }
        let mut moves = Vec::new();
        let mut dirty = Vec::new();
        for a in &ext.actors {
            let peer = world.peer(a).unwrap();
            if let Some(c) = peer.case(case) {
                if let Some(r) = &c.replica {
                    let view = &peer.config.local;
                    if r.nodes().iter().any(|(_, n)| !view.readable(&n.label)) {
                        counts
                            .failures
                            .push(format!("{a} sees a foreign label in {r}"));
                    }
                }
                if c.dirty {
                    dirty.push(a.clone());
                }
            }
            for t in world.ready_tasks(a, case).unwrap_or_default() {
                for p in t.productions {
                    moves.push((a.clone(), t.addr.clone(), p));
                }
            }
        }
        let commit_now = !dirty.is_empty() && (moves.is_empty() || rng.random_bool(0.4));
        if commit_now {
            let a = dirty[rng.random_range(0..dirty.len())].clone();
            let peer = world.peer(&a).unwrap();
            let before = peer.case(case).unwrap().global.clone();
            let t_maj = peer.case(case).unwrap().replica.clone().unwrap();
            let latest = world.latest(case).cloned().unwrap();
            counts.triples += 1;
            if let Err(msg) = check_expansion(&before, &t_maj, &peer.config) {
                counts.failures.push(format!("{a}: {msg}"));
                break;
            }
            match world.commit(&a, case, GuidePolicy::First) {
                Ok(out) => {
                    commits += 1;
                    if !is_update(&before, &out.result) {
                        counts
                            .failures
                            .push(format!("{a}: commit is not an update of its input"));
                    }
                    if join(&latest, &out.result).is_none() {
                        counts
                            .failures
                            .push(format!("{a}: conflicting global artifacts"));
                    }
                }
                Err(e) => {
                    counts.failures.push(format!("{a} commit: {e}"));
                    break;
                }
            }
        } else if !moves.is_empty() {
            let (a, addr, p) = moves[rng.random_range(0..moves.len())].clone();
            if let Err(e) = world.develop(&a, case, &addr, &p) {
                counts.failures.push(format!("{a} develop {addr} {p}: {e}"));
                break;
            }
        } else {
            break;
        }
    }
    (commits, world.is_terminated(case))
}

fn random_suite() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let limits = Limits::default();
    let mut props = PropCounts::default();
    let mut enum_fail = 0;
    for _ in 0..200 {
        let spec = ensure_axiom_visibility(&random_spec(&mut rng, &limits));
        let fast = generate_target_artifacts(&spec.gmwf).unwrap();
        let slow: BTreeSet<String> = brute::targets(&spec.gmwf)
            .iter()
            .map(gmwf_core::format::canonical_json)
            .collect();
        let fast_keys: BTreeSet<String> =
            fast.iter().map(gmwf_core::format::canonical_json).collect();
        enum_fail += usize::from(fast_keys != slow);
        check_props(&spec, &mut props);
    }
    let mut sound = SoundCounts::default();
    let mut commits = 0;
    let mut finished = 0;
    for _ in 0..50 {
        let spec = random_spec(&mut rng, &limits);
        let (n, done) = random_walk(&spec, &mut rng, &mut sound);
        commits += n;
        finished += usize::from(done);
    }
    let took = start.elapsed();
    let ok = enum_fail == 0
        && props.tree_fail == 0
        && props.local_fail == 0
        && props.conf_fail() == 0
        && props.preimage_fail == 0
        && sound.failures.is_empty()
        && took < Duration::from_secs(60);
    outcome(
        "random-suite",
        ok,
        format!(
            "200 grammars: enum {enum_fail} / single-tree {} / local-grammar {} / conformance targets {}/{} prefixes {}/{} / preimage {} failures; \
             50 walks: {commits} commits ({finished} walks terminated), {} expansions, {} soundness failures{}; {}",
            props.tree_fail,
            props.local_fail,
            props.conf_fail_targets,
            props.conf_checked_targets,
            props.conf_fail_prefixes,
            props.conf_checked_prefixes,
            props.preimage_fail,
            sound.triples,
            sound.failures.len(),
            sound.failures.first().map(|f| format!(" (first: {f})")).unwrap_or_default(),
            ms(took)
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let mut traces = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("trace-{i}.json"));
        let status = Command::new(env!("CARGO_BIN_EXE_gmwf"))
            .arg("simulate")
            .arg(spec_path("peer-review"))
            .arg(script_path("acceptance"))
            .arg("--trace")
            .arg(&out)
            .status()
            .unwrap();
        if !status.success() {
            return outcome("determinism", false, "simulate failed");
        }
        traces.push(std::fs::read(out).unwrap());
    }
    let script: Script = load_script("rejection");
    let spec = load_spec("peer-review");
    let lib_same = simulate(&spec, &script).unwrap().to_canonical()
        == simulate(&spec, &script).unwrap().to_canonical();
    outcome(
        "determinism",
        traces[0] == traces[1] && lib_same,
        format!(
            "{} trace bytes, identical={}",
            traces[0].len(),
            traces[0] == traces[1]
        ),
    )
}

fn main() {
    let (p1, p3, p4) = prop_suites();
    let results = vec![
        enumeration_golden(),
        grammar_projection_golden(),
        artifact_projection_golden(),
        p1,
        p3,
        p4,
        expansion_suite(),
        e2e_replays(),
        random_suite(),
        determinism(),
    ];
    println!();
    for r in &results {
        let tag = if r.pass { "PASS" } else { "FAIL" };
        println!("{tag}  {:<28} {}", r.name, r.detail);
    }
    let failing: BTreeSet<&str> = results.iter().filter(|r| !r.pass).map(|r| r.name).collect();
    let expected: BTreeSet<&str> = EXPECTED_FAILURES.iter().copied().collect();
    assert_eq!(
        failing, expected,
        "failing criteria differ from the documented set"
    );
}
