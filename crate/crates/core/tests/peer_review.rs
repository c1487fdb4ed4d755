use std::collections::BTreeSet;

use gmwf_core::enumeration::{ensure_axiom_visibility, generate_target_artifacts};
use gmwf_core::expansion::{expand, find_guides, select_guide, GuidePolicy};
use gmwf_core::format::canonical_json;
use gmwf_core::projection::{canonical_shape, project_artifact_rooted, project_gmwf};
use gmwf_core::{conforms, is_complete, validate_gmawfp, Artifact, Production, ValidationOptions};
use gmwf_oracles::fixtures::{
    art_1, art_2, expected_local_productions, extended, peer_review_spec, published_ae_productions,
};
use gmwf_oracles::reference::{self, anonymize, expand_named};

fn p(text: &str) -> Production {
    text.parse().unwrap()
}

fn extended_spec() -> gmwf_core::Gmawfp {
    ensure_axiom_visibility(&peer_review_spec())
}

#[test]
fn spec_validates_cleanly() {
    let report = validate_gmawfp(&peer_review_spec(), &ValidationOptions::default());
    assert!(!report.has_errors(), "{report}");
    let ext = extended_spec();
    let strict = ValidationOptions {
        axiom_visibility: true,
        ..Default::default()
    };
    assert!(!validate_gmawfp(&ext, &strict).has_errors());
    assert!(validate_gmawfp(&peer_review_spec(), &strict).has_code("axiom-not-visible"));
}

#[test]
fn axiom_extension() {
    let ext = extended_spec();
    assert_eq!(ext.gmwf.axioms, vec!["A_G".to_string()]);
    assert!(ext.gmwf.has_production(&p("A_G -> A")));
    for acc in &ext.accreditations {
        assert!(acc.read.contains("A_G"));
        assert_eq!(acc.write.contains("A_G"), acc.actor == "EC");
    }
    assert_eq!(ensure_axiom_visibility(&ext), ext);
}

#[test]
fn two_scenarios() {
    let targets = generate_target_artifacts(&extended_spec().gmwf).unwrap();
    assert_eq!(
        targets.artifacts,
        vec![extended(art_1()), extended(art_2())]
    );
    assert!(canonical_json(&targets.artifacts[0]) < canonical_json(&targets.artifacts[1]));
}

fn local_set(actor: &str) -> BTreeSet<String> {
    let ext = extended_spec();
    let local = project_gmwf(&ext.gmwf, &ext.view(actor).unwrap()).unwrap();
    let mut out = BTreeSet::new();
    for t in local.local_targets.iter() {
        anonymize(t).productions(&mut out);
    }
    let direct: BTreeSet<String> = local
        .gmwf
        .productions
        .iter()
        .map(|p| p.to_string())
        .collect();
    assert_eq!(direct.len(), local.gmwf.productions.len());
    out
}

fn oracle_set(actor: &str) -> BTreeSet<String> {
    let ext = extended_spec();
    let view = ext.accreditation(actor).unwrap().read.clone();
    let mut out = BTreeSet::new();
    for t in gmwf_oracles::brute::targets(&ext.gmwf) {
        let forest = reference::project(&t, &view);
        assert_eq!(forest.len(), 1);
        forest[0].productions(&mut out);
    }
    out
}

#[test]
fn local_grammars_match_the_reference_and_the_table() {
    for actor in ["EC", "AE", "R1", "R2"] {
        let expected = expand_named(&expected_local_productions(actor), &["S1", "S2", "S3"]);
        assert_eq!(
            oracle_set(actor),
            expected,
            "oracle vs expected for {actor}"
        );
        assert_eq!(
            local_set(actor),
            expected,
            "library vs expected for {actor}"
        );
    }
    let published = expand_named(&published_ae_productions(), &["S1", "S2"]);
    let diff: Vec<_> = published
        .symmetric_difference(&oracle_set("AE"))
        .cloned()
        .collect();
    assert_eq!(diff, vec!["A -> ε".to_string(), "A_G -> ε".to_string()]);
}

#[test]
fn ec_local_grammar_has_fourteen_productions_with_named_structuring_sorts() {
    let ext = extended_spec();
    let local = project_gmwf(&ext.gmwf, &ext.view("EC").unwrap()).unwrap();
    assert_eq!(local.gmwf.productions.len(), 14);
    for text in [
        "C -> #S1 ; F",
        "#S1 -> #S2 || #S3",
        "#S2 -> H1 ; I1",
        "#S3 -> H2 ; I2",
    ] {
        assert!(local.gmwf.has_production(&p(text)), "{text}");
    }
    let names: BTreeSet<_> = local.structuring.values().collect();
    assert_eq!(names.len(), local.structuring.len());
    assert_eq!(local.structuring_sorts().count(), 3);
    let r1 = project_gmwf(&ext.gmwf, &ext.view("R1").unwrap()).unwrap();
    assert_eq!(r1.gmwf.productions.len(), 6);
}

#[test]
fn replicas_of_the_full_review() {
    let ext = extended_spec();
    let t = extended(art_2());
    let r1 = project_artifact_rooted(&t, &ext.view("R1").unwrap()).unwrap();
    assert_eq!(r1.to_string(), "A_G[C[G1[H1 ; I1]]]");
    let ec = project_artifact_rooted(&t, &ext.view("EC").unwrap()).unwrap();
    assert_eq!(
        anonymize(&ec).render(),
        "A_G[A[C[#[#[H1 ; I1] || #[H2 ; I2]] ; F] ; D]]"
    );
    let c = &ec.children[0].children[0];
    let s = &c.children[0];
    assert_eq!(
        c.production,
        Some(Production::new(
            "C",
            [s.label.as_str(), "F"],
            gmwf_core::Annotation::Sequential
        ))
    );
    let v_ec = ext.accreditation("EC").unwrap().read.clone();
    assert_eq!(reference::project(&t, &v_ec), vec![anonymize(&ec)]);
}

#[test]
fn equal_shapes_for_the_same_scheduling() {
    let ext = extended_spec();
    let v = ext.view("EC").unwrap();
    let a = project_artifact_rooted(&extended(art_2()), &v).unwrap();
    let mut partial = extended(art_2());
    // same replica obtained with a different bud elsewhere
    *partial.node_mut(&gmwf_core::Address(vec![0, 1])).unwrap() = Artifact::unlocked("D");
    let b = project_artifact_rooted(&partial, &v).unwrap();
    let s2 = |t: &Artifact| t.children[0].children[0].children[0].children[0].clone();
    assert_eq!(canonical_shape(&s2(&a)), canonical_shape(&s2(&b)));
}

#[test]
fn r1_local_grammar_projects_the_rejection_to_an_empty_axiom() {
    let ext = extended_spec();
    let r1 = project_artifact_rooted(&extended(art_1()), &ext.view("R1").unwrap()).unwrap();
    assert_eq!(r1, Artifact::leaf("A_G"));
}

#[test]
fn guides_for_the_first_decision() {
    let ext = extended_spec();
    let targets = generate_target_artifacts(&ext.gmwf).unwrap();
    let local = project_gmwf(&ext.gmwf, &ext.view("EC").unwrap()).unwrap();

    let t = Artifact::developed(p("A_G -> A"), vec![Artifact::unlocked("A")]);
    let t_maj = Artifact::developed(
        p("A_G -> A"),
        vec![Artifact::developed(
            p("A -> C ; D"),
            vec![Artifact::unlocked("C"), Artifact::locked("D")],
        )],
    );
    let gs = find_guides(&t, &t_maj, &targets, &local);
    assert_eq!(gs.guides, vec![extended(art_2())]);
    let ex = expand(&t, &t_maj, &targets, &local, GuidePolicy::First).unwrap();
    assert_eq!(ex.result.to_string(), "A_G[A[C? ; D!]]");
    assert!(conforms(&ex.result, &ext.gmwf));

    let bud = Artifact::unlocked("A_G");
    let both = find_guides(&bud, &bud, &targets, &local);
    assert_eq!(both.guides.len(), 2);
    assert_eq!(
        both.guides[select_guide(&both, GuidePolicy::First).unwrap()],
        extended(art_1())
    );

    let done = extended(art_1());
    let proj = local.project(&done).unwrap();
    assert_eq!(
        find_guides(&done, &proj, &targets, &local).guides,
        vec![done.clone()]
    );
    let ex = expand(&done, &proj, &targets, &local, GuidePolicy::First).unwrap();
    assert_eq!(ex.result, done);
    assert!(is_complete(&ex.result));
}

#[test]
fn editor_decision_makes_upstair_buds() {
    let ext = extended_spec();
    let targets = generate_target_artifacts(&ext.gmwf).unwrap();
    let local = project_gmwf(&ext.gmwf, &ext.view("AE").unwrap()).unwrap();
    let t = Artifact::developed(
        p("A_G -> A"),
        vec![Artifact::developed(
            p("A -> C ; D"),
            vec![Artifact::unlocked("C"), Artifact::locked("D")],
        )],
    );
    let replica = local.project(&t).unwrap();
    assert_eq!(replica.to_string(), "A_G[A[C?]]");
    let mut t_maj = replica.clone();
    let s1 = local.structuring.values().min().unwrap().clone();
    let s2 = local.structuring.values().max().unwrap().clone();
    *t_maj.node_mut(&gmwf_core::Address(vec![0, 0])).unwrap() = Artifact::developed(
        p("C -> E ; F"),
        vec![
            Artifact::developed(
                Production::par("E", &[s1.as_str(), s2.as_str()]),
                vec![
                    Artifact::unlocked(s1.clone()),
                    Artifact::unlocked(s2.clone()),
                ],
            ),
            Artifact::locked("F"),
        ],
    );
    assert!(conforms(&t_maj, &local.gmwf));
    let ex = expand(&t, &t_maj, &targets, &local, GuidePolicy::First).unwrap();
    assert_eq!(ex.result.to_string(), "A_G[A[C[E[G1? || G2?] ; F!] ; D!]]");
}
