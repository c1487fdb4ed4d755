use std::collections::{BTreeMap, BTreeSet};

use gmwf_core::{Accreditation, Annotation, Gmawfp, Gmwf, Production, Sort};
use rand::Rng;

#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_sorts: usize,
    pub max_rhs: usize,
    pub max_targets: u64,
    pub max_actors: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            max_sorts: 8,
            max_rhs: 3,
            max_targets: 40,
            max_actors: 3,
        }
    }
}

fn count(g: &Gmwf, sort: &str, memo: &mut BTreeMap<String, u64>) -> u64 {
    if let Some(n) = memo.get(sort) {
        return *n;
    }
    let n = g
        .productions
        .iter()
        .filter(|p| p.lhs() == sort)
        .map(|p| {
            p.rhs()
                .iter()
                .fold(1u64, |acc, r| acc.saturating_mul(count(g, r, memo)))
        })
        .fold(0u64, u64::saturating_add);
    memo.insert(sort.to_string(), n);
    n
}

/// A non-recursive grammar: productions only point at later sorts.
pub fn random_gmwf<R: Rng>(rng: &mut R, limits: &Limits) -> Gmwf {
    loop {
        let n = rng.random_range(2..=limits.max_sorts);
        let names: Vec<String> = (0..n).map(|i| format!("X{i}")).collect();
        let mut productions = Vec::new();
        for i in 0..n {
            let later = &names[i + 1..];
            let count = if later.is_empty() {
                1
            } else {
                rng.random_range(1..=3)
            };
            for _ in 0..count {
                let len = if later.is_empty() {
                    0
                } else {
                    rng.random_range(0..=limits.max_rhs)
                };
                let rhs: Vec<String> = (0..len)
                    .map(|_| later[rng.random_range(0..later.len())].clone())
                    .collect();
                let ann = if rng.random_bool(0.5) {
                    Annotation::Sequential
                } else {
                    Annotation::Parallel
                };
                let p = Production::new(names[i].clone(), rhs, ann);
                if !productions.contains(&p) {
                    productions.push(p);
                }
            }
        }
        let g = Gmwf {
            sorts: names.iter().map(|s| Sort::new(s.clone())).collect(),
            axioms: vec![names[0].clone()],
            productions,
        };
        let total = count(&g, &names[0], &mut BTreeMap::new());
        if total >= 1 && total <= limits.max_targets {
            return g;
        }
    }
}

/// A grammar plus actors whose views all contain the axiom; every sort
/// has at least one writer and the initiator `a0` writes the axiom.
pub fn random_spec<R: Rng>(rng: &mut R, limits: &Limits) -> Gmawfp {
    let gmwf = random_gmwf(rng, limits);
    let k = rng.random_range(1..=limits.max_actors);
    let actors: Vec<String> = (0..k).map(|i| format!("a{i}")).collect();
    let axiom = gmwf.axioms[0].clone();
    let mut accs: Vec<Accreditation> = actors
        .iter()
        .map(|a| {
            let mut read = BTreeSet::from([axiom.clone()]);
            let mut write = BTreeSet::new();
            for s in &gmwf.sorts {
                if rng.random_bool(0.5) {
                    read.insert(s.name.clone());
                }
                if read.contains(&s.name) && rng.random_bool(0.4) {
                    write.insert(s.name.clone());
                }
            }
            Accreditation {
                actor: a.clone(),
                read,
                write,
                execute: BTreeSet::new(),
            }
        })
        .collect();
    accs[0].write.insert(axiom.clone());
    for s in &gmwf.sorts {
        if !accs.iter().any(|a| a.write.contains(&s.name)) {
            let i = rng.random_range(0..k);
            accs[i].read.insert(s.name.clone());
            accs[i].write.insert(s.name.clone());
        }
    }
    Gmawfp {
        gmwf,
        actors: actors.clone(),
        accreditations: accs,
        initiator: actors[0].clone(),
    }
}
