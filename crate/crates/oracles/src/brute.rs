use gmwf_core::{Address, Artifact, Gmwf, NodeState, Production};

/// Conformance checked node by node with an explicit work list.
pub fn conforms(t: &Artifact, g: &Gmwf) -> bool {
    if !g.axioms.contains(&t.label) {
        return false;
    }
    let mut work = vec![t];
    while let Some(n) = work.pop() {
        match n.state {
            NodeState::LockedBud | NodeState::UnlockedBud => {
                if n.production.is_some() || !n.children.is_empty() {
                    return false;
                }
                if !g.sorts.iter().any(|s| s.name == n.label) {
                    return false;
                }
            }
            NodeState::Developed => {
                let Some(p) = &n.production else { return false };
                if !g.productions.iter().any(|q| q == p) || p.lhs() != n.label {
                    return false;
                }
                let labels: Vec<&str> = n.children.iter().map(|c| c.label.as_str()).collect();
                let rhs: Vec<&str> = p.rhs().iter().map(String::as_str).collect();
                if labels != rhs {
                    return false;
                }
                work.extend(n.children.iter());
            }
        }
    }
    true
}

/// Every complete derivation from an axiom, without sharing or ordering.
pub fn targets(g: &Gmwf) -> Vec<Artifact> {
    g.axioms.iter().flat_map(|a| derive(g, a, 0)).collect()
}

fn derive(g: &Gmwf, sort: &str, depth: usize) -> Vec<Artifact> {
    assert!(depth < 64, "grammar looks recursive");
    let mut out = Vec::new();
    for p in g.productions.iter().filter(|p| p.lhs() == sort) {
        let mut partial: Vec<Vec<Artifact>> = vec![vec![]];
        for r in p.rhs() {
            let opts = derive(g, r, depth + 1);
            let mut next = Vec::new();
            for prefix in &partial {
                for o in &opts {
                    let mut v = prefix.clone();
                    v.push(o.clone());
                    next.push(v);
                }
            }
            partial = next;
        }
        for kids in partial {
            out.push(Artifact::developed(p.clone(), kids));
        }
    }
    out
}

/// Prefixes of `t`: ways of cutting subtrees back to buds, at most about
/// `cap` per node. The last one is always `t` itself. Buds are left unlocked.
pub fn prefixes(t: &Artifact, cap: usize) -> Vec<Artifact> {
    let mut out = vec![Artifact::unlocked(t.label.clone())];
    if t.is_bud() {
        return out;
    }
    let mut partial: Vec<Vec<Artifact>> = vec![vec![]];
    for c in &t.children {
        let opts = prefixes(c, cap);
        let mut next = Vec::new();
        for prefix in &partial {
            for o in &opts {
                let mut v = prefix.clone();
                v.push(o.clone());
                next.push(v);
            }
        }
        keep_ends(&mut next, cap);
        partial = next;
    }
    let p: Production = t.production.clone().expect("developed node");
    for kids in partial {
        let mut n = Artifact::developed(p.clone(), kids);
        n.payload = t.payload.clone();
        out.push(n);
    }
    keep_ends(&mut out, cap);
    out
}

fn keep_ends<T>(v: &mut Vec<T>, cap: usize) {
    if v.len() > cap.max(2) {
        let last = v.pop().expect("non-empty");
        v.truncate(cap.max(2) - 1);
        v.push(last);
    }
}

/// `t` with the node at each address in turn replaced by an unlocked bud.
pub fn truncations(t: &Artifact) -> Vec<Artifact> {
    t.nodes()
        .into_iter()
        .map(|(addr, n)| {
            let mut cut = t.clone();
            *cut.node_mut(&addr).expect("own address") = Artifact::unlocked(n.label.clone());
            cut
        })
        .collect()
}

/// Addresses of unlocked buds.
pub fn unlocked_buds(t: &Artifact) -> Vec<Address> {
    t.nodes()
        .into_iter()
        .filter(|(_, n)| n.state == NodeState::UnlockedBud)
        .map(|(a, _)| a)
        .collect()
}
