use std::collections::BTreeSet;

use gmwf_core::{Accreditation, Artifact, Gmawfp, Gmwf, Production, Sort};

fn set(items: &[&str]) -> BTreeSet<String> {
    items.iter().map(|s| s.to_string()).collect()
}

fn p(text: &str) -> Production {
    text.parse().expect("fixture production")
}

/// Peer-review productions P1..P13.
pub fn peer_review_productions() -> Vec<Production> {
    [
        "A -> B ; D",
        "A -> C ; D",
        "C -> E ; F",
        "E -> G1 || G2",
        "G1 -> H1 ; I1",
        "G2 -> H2 ; I2",
        "B -> ε",
        "D -> ε",
        "F -> ε",
        "H1 -> ε",
        "I1 -> ε",
        "H2 -> ε",
        "I2 -> ε",
    ]
    .iter()
    .map(|s| p(s))
    .collect()
}

pub fn peer_review_gmwf() -> Gmwf {
    Gmwf {
        sorts: [
            "A", "B", "C", "D", "E", "F", "G1", "G2", "H1", "H2", "I1", "I2",
        ]
        .iter()
        .map(|s| Sort::new(*s))
        .collect(),
        axioms: vec!["A".into()],
        productions: peer_review_productions(),
    }
}

/// Peer-review process with the accreditations of the four actors.
pub fn peer_review_spec() -> Gmawfp {
    let acc = |actor: &str, r: &[&str], w: &[&str], x: &[&str]| Accreditation {
        actor: actor.into(),
        read: set(r),
        write: set(w),
        execute: set(x),
    };
    Gmawfp {
        gmwf: peer_review_gmwf(),
        actors: vec!["EC".into(), "AE".into(), "R1".into(), "R2".into()],
        accreditations: vec![
            acc(
                "EC",
                &["A", "B", "C", "D", "H1", "H2", "I1", "I2", "F"],
                &["A", "B", "D"],
                &["C"],
            ),
            acc(
                "AE",
                &["A", "C", "E", "F", "H1", "H2", "I1", "I2"],
                &["C", "E", "F"],
                &["G1", "G2"],
            ),
            acc("R1", &["C", "G1", "H1", "I1"], &["G1", "H1", "I1"], &[]),
            acc("R2", &["C", "G2", "H2", "I2"], &["G2", "H2", "I2"], &[]),
        ],
        initiator: "EC".into(),
    }
}

/// Immediate rejection: A[B ; D].
pub fn art_1() -> Artifact {
    Artifact::developed(
        p("A -> B ; D"),
        vec![Artifact::leaf("B"), Artifact::leaf("D")],
    )
}

/// Full review: A[C[E[G1[H1 ; I1] || G2[H2 ; I2]] ; F] ; D].
pub fn art_2() -> Artifact {
    let g1 = Artifact::developed(
        p("G1 -> H1 ; I1"),
        vec![Artifact::leaf("H1"), Artifact::leaf("I1")],
    );
    let g2 = Artifact::developed(
        p("G2 -> H2 ; I2"),
        vec![Artifact::leaf("H2"), Artifact::leaf("I2")],
    );
    let e = Artifact::developed(p("E -> G1 || G2"), vec![g1, g2]);
    let c = Artifact::developed(p("C -> E ; F"), vec![e, Artifact::leaf("F")]);
    Artifact::developed(p("A -> C ; D"), vec![c, Artifact::leaf("D")])
}

/// Wraps an artifact under the added axiom `A_G`.
pub fn extended(t: Artifact) -> Artifact {
    Artifact::developed(p("A_G -> A"), vec![t])
}

/// Write accreditations of the four actors, by actor.
pub fn write_sets() -> Vec<(&'static str, BTreeSet<String>)> {
    vec![
        ("EC", set(&["A", "B", "D"])),
        ("AE", set(&["C", "E", "F"])),
        ("R1", set(&["G1", "H1", "I1"])),
        ("R2", set(&["G2", "H2", "I2"])),
    ]
}

/// Local productions expected for each actor, with `S1`.. standing for
/// structuring sorts. The AE row carries `A -> ε` where the published table
/// writes `A_G -> ε`.
pub fn expected_local_productions(actor: &str) -> Vec<&'static str> {
    match actor {
        "EC" => vec![
            "A_G -> A",
            "A -> B ; D",
            "A -> C ; D",
            "C -> S1 ; F",
            "S1 -> S2 || S3",
            "S2 -> H1 ; I1",
            "S3 -> H2 ; I2",
            "B -> ε",
            "D -> ε",
            "F -> ε",
            "H1 -> ε",
            "I1 -> ε",
            "H2 -> ε",
            "I2 -> ε",
        ],
        "AE" => vec![
            "A_G -> A",
            "A -> C",
            "C -> E ; F",
            "E -> S1 || S2",
            "S1 -> H1 ; I1",
            "S2 -> H2 ; I2",
            "H1 -> ε",
            "I1 -> ε",
            "H2 -> ε",
            "I2 -> ε",
            "F -> ε",
            "A -> ε",
        ],
        "R1" => vec![
            "A_G -> C",
            "C -> G1",
            "G1 -> H1 ; I1",
            "H1 -> ε",
            "I1 -> ε",
            "A_G -> ε",
        ],
        "R2" => vec![
            "A_G -> C",
            "C -> G2",
            "G2 -> H2 ; I2",
            "H2 -> ε",
            "I2 -> ε",
            "A_G -> ε",
        ],
        _ => Vec::new(),
    }
}

/// The AE row as published.
pub fn published_ae_productions() -> Vec<&'static str> {
    let mut v = expected_local_productions("AE");
    *v.last_mut().expect("non-empty") = "A_G -> ε";
    v
}
