//! Reference projection working on anonymous structuring nodes.

use std::collections::{BTreeMap, BTreeSet};

use gmwf_core::{is_structuring, Annotation, Artifact, NodeState};

pub const ANON: &str = "#";

/// A projected tree whose structuring nodes are all labelled `#`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RTree {
    pub label: String,
    pub state: NodeState,
    pub ann: Annotation,
    pub kids: Vec<RTree>,
}

fn kind(t: &Artifact) -> Annotation {
    match &t.production {
        Some(p) if p.rhs().len() > 1 => p.annotation(),
        _ => Annotation::Sequential,
    }
}

fn sym(a: Annotation) -> &'static str {
    match a {
        Annotation::Sequential => ";",
        Annotation::Parallel => "||",
    }
}

impl RTree {
    /// Label, or the full expansion of a structuring node.
    pub fn key(&self) -> String {
        if self.label != ANON {
            return self.label.clone();
        }
        let inner: Vec<String> = self.kids.iter().map(RTree::key).collect();
        format!("{{{}}}", inner.join(&format!(" {} ", sym(self.ann))))
    }

    /// Productions used, with structuring sorts written as expansions.
    pub fn productions(&self, out: &mut BTreeSet<String>) {
        if self.state != NodeState::Developed {
            return;
        }
        let rhs = if self.kids.is_empty() {
            "ε".to_string()
        } else {
            let keys: Vec<String> = self.kids.iter().map(RTree::key).collect();
            keys.join(&format!(" {} ", sym(self.ann)))
        };
        out.insert(format!("{} -> {}", self.key(), rhs));
        for k in &self.kids {
            k.productions(out);
        }
    }

    pub fn render(&self) -> String {
        let mut s = self.label.clone();
        match self.state {
            NodeState::UnlockedBud => s.push('?'),
            NodeState::LockedBud => s.push('!'),
            NodeState::Developed if !self.kids.is_empty() => {
                let inner: Vec<String> = self.kids.iter().map(RTree::render).collect();
                s.push('[');
                s.push_str(&inner.join(&format!(" {} ", sym(self.ann))));
                s.push(']');
            }
            NodeState::Developed => {}
        }
        s
    }
}

pub fn project(t: &Artifact, view: &BTreeSet<String>) -> Vec<RTree> {
    let mut kids = Vec::new();
    if t.state == NodeState::Developed {
        for c in &t.children {
            let sub = project(c, view);
            if sub.len() > 1 && kind(c) != kind(t) {
                kids.push(RTree {
                    label: ANON.into(),
                    state: NodeState::Developed,
                    ann: kind(c),
                    kids: sub,
                });
            } else {
                kids.extend(sub);
            }
        }
    }
    if !view.contains(&t.label) {
        return kids;
    }
    if t.state != NodeState::Developed {
        return vec![RTree {
            label: t.label.clone(),
            state: t.state,
            ann: Annotation::Sequential,
            kids: Vec::new(),
        }];
    }
    if kids.len() == 1 && kids[0].label == ANON {
        let s = kids.remove(0);
        return vec![RTree {
            label: t.label.clone(),
            state: NodeState::Developed,
            ann: s.ann,
            kids: s.kids,
        }];
    }
    let ann = if kids.len() > 1 {
        kind(t)
    } else {
        Annotation::Sequential
    };
    vec![RTree {
        label: t.label.clone(),
        state: NodeState::Developed,
        ann,
        kids,
    }]
}

/// Forgets structuring names.
pub fn anonymize(t: &Artifact) -> RTree {
    RTree {
        label: if is_structuring(&t.label) {
            ANON.into()
        } else {
            t.label.clone()
        },
        state: t.state,
        ann: kind(t),
        kids: t.children.iter().map(anonymize).collect(),
    }
}

/// Rewrites textual productions such as `C -> S1 ; F`, where the listed
/// `names` are structuring sorts, into the expansion notation of
/// [`RTree::productions`].
pub fn expand_named(prods: &[&str], names: &[&str]) -> BTreeSet<String> {
    let parsed: Vec<(String, Vec<String>, &str)> = prods
        .iter()
        .map(|p| {
            let (l, r) = p.split_once("->").expect("arrow");
            let r = r.trim();
            let sep = if r.contains("||") { "||" } else { ";" };
            let rhs = if r == "ε" {
                Vec::new()
            } else {
                r.split(sep).map(|s| s.trim().to_string()).collect()
            };
            (l.trim().to_string(), rhs, sep)
        })
        .collect();
    let defs: BTreeMap<&str, (&Vec<String>, &str)> = parsed
        .iter()
        .filter(|(l, _, _)| names.contains(&l.as_str()))
        .map(|(l, r, s)| (l.as_str(), (r, *s)))
        .collect();
    fn key(s: &str, defs: &BTreeMap<&str, (&Vec<String>, &str)>) -> String {
        match defs.get(s) {
            None => s.to_string(),
            Some((rhs, sep)) => {
                let inner: Vec<String> = rhs.iter().map(|r| key(r, defs)).collect();
                format!("{{{}}}", inner.join(&format!(" {sep} ")))
            }
        }
    }
    parsed
        .iter()
        .map(|(l, rhs, sep)| {
            let r = if rhs.is_empty() {
                "ε".to_string()
            } else {
                let keys: Vec<String> = rhs.iter().map(|x| key(x, &defs)).collect();
                keys.join(&format!(" {sep} "))
            };
            format!("{} -> {}", key(l, &defs), r)
        })
        .collect()
}
