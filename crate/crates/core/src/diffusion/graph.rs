use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::UserId;

/// Directed sender → potential-recipient graph without self-loops.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SocialGraph {
    out: BTreeMap<UserId, BTreeSet<UserId>>,
}

impl SocialGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_edges<I>(edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (UserId, UserId)>,
    {
        let mut g = Self::new();
        for (a, b) in edges {
            g.add_edge(a, b)?;
        }
        Ok(g)
    }

    pub fn add_node(&mut self, node: UserId) {
        self.out.entry(node).or_default();
    }

    pub fn add_edge(&mut self, src: UserId, dst: UserId) -> Result<()> {
        if src == dst {
            return Err(Error::validation(format!("self-loop on {src}")));
        }
        self.add_node(dst.clone());
        self.out.entry(src).or_default().insert(dst);
        Ok(())
    }

    pub fn contains(&self, node: &UserId) -> bool {
        self.out.contains_key(node)
    }

    pub fn has_edge(&self, src: &UserId, dst: &UserId) -> bool {
        self.out.get(src).is_some_and(|s| s.contains(dst))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &UserId> {
        self.out.keys()
    }

    pub fn out_neighbors(&self, node: &UserId) -> impl Iterator<Item = &UserId> {
        self.out.get(node).into_iter().flatten()
    }

    pub fn edges(&self) -> impl Iterator<Item = (&UserId, &UserId)> {
        self.out.iter().flat_map(|(a, bs)| bs.iter().map(move |b| (a, b)))
    }

    pub fn node_count(&self) -> usize {
        self.out.len()
    }

    pub fn edge_count(&self) -> usize {
        self.out.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.out.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(s: &str) -> UserId {
        UserId::new(s).unwrap()
    }

    #[test]
    fn self_loops_rejected() {
        let mut g = SocialGraph::new();
        assert!(g.add_edge(u("a"), u("a")).is_err());
        g.add_edge(u("a"), u("b")).unwrap();
        g.add_edge(u("a"), u("b")).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert_eq!(g.node_count(), 2);
        assert!(g.has_edge(&u("a"), &u("b")) && !g.has_edge(&u("b"), &u("a")));
        assert_eq!(g.out_neighbors(&u("zz")).count(), 0);
    }
}
