use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::grammar::{Annotation, Production};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NodeState {
    #[serde(rename = "locked")]
    LockedBud,
    #[serde(rename = "unlocked")]
    UnlockedBud,
    #[serde(rename = "dev")]
    Developed,
}

impl NodeState {
    pub fn is_bud(self) -> bool {
        !matches!(self, NodeState::Developed)
    }
}

/// An ordered labelled tree recording the execution state of one case.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Artifact {
    pub label: String,
    pub state: NodeState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub production: Option<Production>,
    #[serde(default)]
    pub children: Vec<Artifact>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "payload_b64")]
    pub payload: Option<Vec<u8>>,
}

mod payload_b64 {
    use base64::engine::general_purpose::STANDARD;
    use base64::Engine;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<Vec<u8>>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(bytes) => s.serialize_str(&STANDARD.encode(bytes)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Vec<u8>>, D::Error> {
        let text: Option<String> = Option::deserialize(d)?;
        text.map(|t| STANDARD.decode(t).map_err(serde::de::Error::custom))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ShapeError {
    #[error("node at {addr} is a bud but has children")]
    BudWithChildren { addr: Address },
    #[error("node at {addr} is developed without a production")]
    MissingProduction { addr: Address },
    #[error("bud at {addr} carries a production")]
    BudWithProduction { addr: Address },
    #[error("node at {addr} labelled {label} uses a production for {lhs}")]
    LhsMismatch {
        addr: Address,
        label: String,
        lhs: String,
    },
    #[error("children at {addr} do not match the right-hand side of {production}")]
    ChildrenMismatch { addr: Address, production: String },
}

impl Artifact {
    pub fn bud(label: impl Into<String>, state: NodeState) -> Self {
        debug_assert!(state.is_bud());
        Artifact {
            label: label.into(),
            state,
            production: None,
            children: Vec::new(),
            payload: None,
        }
    }

    pub fn unlocked(label: impl Into<String>) -> Self {
        Artifact::bud(label, NodeState::UnlockedBud)
    }

    pub fn locked(label: impl Into<String>) -> Self {
        Artifact::bud(label, NodeState::LockedBud)
    }

    /// A node developed with `production`; children must follow its rhs.
    pub fn developed(production: Production, children: Vec<Artifact>) -> Self {
        debug_assert_eq!(production.rhs().len(), children.len());
        Artifact {
            label: production.lhs().to_string(),
            state: NodeState::Developed,
            production: Some(production),
            children,
            payload: None,
        }
    }

    /// A node closed by its epsilon production.
    pub fn leaf(label: impl Into<String>) -> Self {
        Artifact::developed(Production::epsilon(label), Vec::new())
    }

    pub fn with_payload(mut self, payload: Vec<u8>) -> Self {
        self.payload = Some(payload);
        self
    }

    pub fn is_bud(&self) -> bool {
        self.state.is_bud()
    }

    pub fn is_complete(&self) -> bool {
        !self.is_bud() && self.children.iter().all(Artifact::is_complete)
    }

    /// Annotation of the production used at this node, sequential for buds.
    pub fn annotation(&self) -> Annotation {
        self.production
            .as_ref()
            .map(Production::annotation)
            .unwrap_or(Annotation::Sequential)
    }

    pub fn node(&self, addr: &Address) -> Option<&Artifact> {
        let mut cur = self;
        for &i in &addr.0 {
            cur = cur.children.get(i)?;
        }
        Some(cur)
    }

    pub fn node_mut(&mut self, addr: &Address) -> Option<&mut Artifact> {
        let mut cur = self;
        for &i in &addr.0 {
            cur = cur.children.get_mut(i)?;
        }
        Some(cur)
    }

    /// Every node with its address, in pre-order.
    pub fn nodes(&self) -> Vec<(Address, &Artifact)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        collect(self, &mut path, &mut out);
        out
    }

    pub fn buds(&self) -> Vec<(Address, &Artifact)> {
        self.nodes()
            .into_iter()
            .filter(|(_, n)| n.is_bud())
            .collect()
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Artifact::size).sum::<usize>()
    }

    /// Checks the local shape rules: buds are childless and production-free,
    /// developed nodes carry a production whose rhs labels their children.
    pub fn check_shape(&self) -> Result<(), ShapeError> {
        for (addr, n) in self.nodes() {
            match (&n.production, n.is_bud()) {
                (Some(_), true) => return Err(ShapeError::BudWithProduction { addr }),
                (None, true) if !n.children.is_empty() => {
                    return Err(ShapeError::BudWithChildren { addr })
                }
                (None, true) => {}
                (None, false) => return Err(ShapeError::MissingProduction { addr }),
                (Some(p), false) => {
                    if p.lhs() != n.label {
                        return Err(ShapeError::LhsMismatch {
                            addr,
                            label: n.label.clone(),
                            lhs: p.lhs().to_string(),
                        });
                    }
                    let labels_match = p.rhs().len() == n.children.len()
                        && p.rhs().iter().zip(&n.children).all(|(s, c)| *s == c.label);
                    if !labels_match {
                        return Err(ShapeError::ChildrenMismatch {
                            addr,
                            production: p.to_string(),
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

fn collect<'a>(n: &'a Artifact, path: &mut Vec<usize>, out: &mut Vec<(Address, &'a Artifact)>) {
    out.push((Address(path.clone()), n));
    for (i, c) in n.children.iter().enumerate() {
        path.push(i);
        collect(c, path, out);
        path.pop();
    }
}

impl fmt::Display for Artifact {
    /// Compact bracket notation, e.g. `A[C[F] ; D?]`: `?` marks an unlocked
    /// bud, `!` a locked one.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label)?;
        match self.state {
            NodeState::UnlockedBud => return write!(f, "?"),
            NodeState::LockedBud => return write!(f, "!"),
            NodeState::Developed => {}
        }
        if self.children.is_empty() {
            return Ok(());
        }
        write!(f, "[")?;
        let sep = format!(" {} ", self.annotation().symbol());
        for (i, c) in self.children.iter().enumerate() {
            if i > 0 {
                write!(f, "{sep}")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// Path of zero-based child indices from the root; empty for the root.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Address(pub Vec<usize>);

impl Address {
    pub fn root() -> Self {
        Address(Vec::new())
    }

    pub fn child(&self, i: usize) -> Self {
        let mut v = self.0.clone();
        v.push(i);
        Address(v)
    }

    pub fn is_root(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_strict_prefix_of(&self, other: &Address) -> bool {
        self.0.len() < other.0.len() && other.0.starts_with(&self.0)
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        let parts: Vec<String> = self.0.iter().map(usize::to_string).collect();
        write!(f, "{}", parts.join("."))
    }
}

impl FromStr for Address {
    type Err = std::num::ParseIntError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        if s.is_empty() || s == "ε" || s == "root" {
            return Ok(Address::root());
        }
        s.split('.')
            .map(|p| p.trim().parse())
            .collect::<Result<_, _>>()
            .map(Address)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Artifact {
        Artifact::developed(
            Production::seq("A", &["C", "D"]),
            vec![Artifact::unlocked("C"), Artifact::locked("D")],
        )
    }

    #[test]
    fn addressing() {
        let t = sample();
        assert_eq!(t.node(&Address(vec![1])).unwrap().label, "D");
        assert!(t.node(&Address(vec![2])).is_none());
        let addrs: Vec<String> = t.nodes().iter().map(|(a, _)| a.to_string()).collect();
        assert_eq!(addrs, ["ε", "0", "1"]);
        assert_eq!("0.1".parse::<Address>().unwrap(), Address(vec![0, 1]));
    }

    #[test]
    fn json_round_trip_with_payload() {
        let mut t = sample();
        t.children[0] = Artifact::leaf("C").with_payload(b"ok".to_vec());
        let text = serde_json::to_string(&t).unwrap();
        assert!(text.contains("\"payload\":\"b2s=\""));
        let back: Artifact = serde_json::from_str(&text).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn shape_checks() {
        assert!(sample().check_shape().is_ok());
        let mut bad = sample();
        bad.children[0].label = "X".into();
        assert!(matches!(
            bad.check_shape(),
            Err(ShapeError::ChildrenMismatch { .. })
        ));
        let mut bud = Artifact::unlocked("A");
        bud.children.push(Artifact::unlocked("B"));
        assert!(matches!(
            bud.check_shape(),
            Err(ShapeError::BudWithChildren { .. })
        ));
    }

    #[test]
    fn display_notation() {
        assert_eq!(sample().to_string(), "A[C? ; D!]");
    }
}
