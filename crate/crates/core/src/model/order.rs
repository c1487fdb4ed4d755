use super::artifact::{Artifact, NodeState};
use super::grammar::Gmwf;

/// `t` is rooted at an axiom, uses only productions of `g`, and its buds
/// are sorts of `g`.
pub fn conforms(t: &Artifact, g: &Gmwf) -> bool {
    g.is_axiom(&t.label) && t.check_shape().is_ok() && nodes_conform(t, g)
}

fn nodes_conform(t: &Artifact, g: &Gmwf) -> bool {
    match &t.production {
        None => g.has_sort(&t.label),
        Some(p) => g.has_production(p) && t.children.iter().all(|c| nodes_conform(c, g)),
    }
}

pub fn is_complete(t: &Artifact) -> bool {
    t.is_complete()
}

/// `ta` can be grown into `tb` by developing some of its buds. Lock states
/// and payloads are ignored.
pub fn is_prefix(ta: &Artifact, tb: &Artifact) -> bool {
    if ta.label != tb.label {
        return false;
    }
    if ta.is_bud() {
        return true;
    }
    if tb.is_bud() {
        return false;
    }
    let same_production = match (&ta.production, &tb.production) {
        (Some(pa), Some(pb)) => pa.rhs() == pb.rhs() && pa.annotation() == pb.annotation(),
        _ => false,
    };
    same_production
        && ta.children.len() == tb.children.len()
        && ta
            .children
            .iter()
            .zip(&tb.children)
            .all(|(a, b)| is_prefix(a, b))
}

/// `t2` is an update of `t1`: it extends `t1` at its buds, never moves a bud
/// back from unlocked to locked, and leaves `t1`'s developed nodes alone.
pub fn is_update(t1: &Artifact, t2: &Artifact) -> bool {
    if t1.label != t2.label {
        return false;
    }
    if t1.is_bud() {
        return t2.state >= t1.state;
    }
    if t2.is_bud() || t1.production != t2.production || t1.payload != t2.payload {
        return false;
    }
    t1.children.len() == t2.children.len()
        && t1
            .children
            .iter()
            .zip(&t2.children)
            .all(|(a, b)| is_update(a, b))
}

/// Least upper bound of two artifacts under the update order, if they are
/// compatible.
pub fn join(a: &Artifact, b: &Artifact) -> Option<Artifact> {
    if a.label != b.label {
        return None;
    }
    match (a.is_bud(), b.is_bud()) {
        (true, true) => Some(if b.state > a.state {
            b.clone()
        } else {
            a.clone()
        }),
        (true, false) => Some(b.clone()),
        (false, true) => Some(a.clone()),
        (false, false) => {
            if a.production != b.production || a.children.len() != b.children.len() {
                return None;
            }
            let payload = match (&a.payload, &b.payload) {
                (Some(x), Some(y)) if x != y => return None,
                (x, y) => x.clone().or_else(|| y.clone()),
            };
            let children = a
                .children
                .iter()
                .zip(&b.children)
                .map(|(x, y)| join(x, y))
                .collect::<Option<Vec<_>>>()?;
            Some(Artifact {
                label: a.label.clone(),
                state: NodeState::Developed,
                production: a.production.clone(),
                children,
                payload,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::grammar::Production;

    fn a_bd(b: Artifact, d: Artifact) -> Artifact {
        Artifact::developed(Production::seq("A", &["B", "D"]), vec![b, d])
    }

    #[test]
    fn update_examples() {
        let t1 = Artifact::unlocked("A");
        let t2 = a_bd(Artifact::unlocked("B"), Artifact::locked("D"));
        assert!(is_update(&t1, &t2));
        assert!(!is_update(&t2, &t1));
        assert!(is_update(&Artifact::locked("D"), &Artifact::unlocked("D")));
        assert!(!is_update(&Artifact::unlocked("D"), &Artifact::locked("D")));
    }

    #[test]
    fn prefix_ignores_lock_state() {
        let x = a_bd(Artifact::unlocked("B"), Artifact::locked("D"));
        let y = a_bd(Artifact::locked("B"), Artifact::unlocked("D"));
        assert!(is_prefix(&x, &y) && is_prefix(&y, &x));
    }

    #[test]
    fn join_takes_the_more_developed_side() {
        let left = a_bd(Artifact::leaf("B"), Artifact::locked("D"));
        let right = a_bd(Artifact::unlocked("B"), Artifact::unlocked("D"));
        let j = join(&left, &right).unwrap();
        assert_eq!(j, a_bd(Artifact::leaf("B"), Artifact::unlocked("D")));
        let other = Artifact::developed(
            Production::seq("A", &["C", "D"]),
            vec![Artifact::unlocked("C"), Artifact::locked("D")],
        );
        assert!(join(&left, &other).is_none());
    }
}
