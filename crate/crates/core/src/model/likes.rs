use std::collections::{BTreeMap, BTreeSet};

use super::{ItemId, RatingsTable, UserId};
use super::ratings::Rating;

/// Sparse unary user/item relation, indexed in both orientations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LikesMatrix {
    user_to_items: BTreeMap<UserId, BTreeSet<ItemId>>,
    item_to_users: BTreeMap<ItemId, BTreeSet<UserId>>,
}

impl LikesMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (UserId, ItemId)>,
    {
        let mut m = Self::new();
        for (u, i) in pairs {
            m.insert(u, i);
        }
        m
    }

    /// Returns true if the pair was not already present.
    pub fn insert(&mut self, user: UserId, item: ItemId) -> bool {
        let fresh = self
            .user_to_items
            .entry(user.clone())
            .or_default()
            .insert(item.clone());
        if fresh {
            self.item_to_users.entry(item).or_default().insert(user);
        }
        fresh
    }

    pub fn likes(&self, user: &UserId, item: &ItemId) -> bool {
        self.user_to_items
            .get(user)
            .is_some_and(|items| items.contains(item))
    }

    /// Items liked by `user`; empty for unknown users.
    pub fn items_of(&self, user: &UserId) -> &BTreeSet<ItemId> {
        static EMPTY: BTreeSet<ItemId> = BTreeSet::new();
        self.user_to_items.get(user).unwrap_or(&EMPTY)
    }

    /// Users who like `item`; empty for unknown items.
    pub fn users_of(&self, item: &ItemId) -> &BTreeSet<UserId> {
        static EMPTY: BTreeSet<UserId> = BTreeSet::new();
        self.item_to_users.get(item).unwrap_or(&EMPTY)
    }

    pub fn users(&self) -> impl Iterator<Item = &UserId> {
        self.user_to_items.keys()
    }

    pub fn items(&self) -> impl Iterator<Item = &ItemId> {
        self.item_to_users.keys()
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&UserId, &ItemId)> {
        self.user_to_items
            .iter()
            .flat_map(|(u, items)| items.iter().map(move |i| (u, i)))
    }

    /// Number of (user, item) likes.
    pub fn len(&self) -> usize {
        self.user_to_items.values().map(BTreeSet::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.user_to_items.is_empty()
    }

    /// Full-scan check that both orientations agree.
    pub fn is_transpose_consistent(&self) -> bool {
        let forward = self
            .user_to_items
            .iter()
            .all(|(u, items)| !items.is_empty() && items.iter().all(|i| self.users_of(i).contains(u)));
        let backward = self
            .item_to_users
            .iter()
            .all(|(i, users)| !users.is_empty() && users.iter().all(|u| self.items_of(u).contains(i)));
        forward && backward
    }
}

/// Every rating at or above `threshold` becomes a like.
pub fn to_unary(ratings: &RatingsTable, threshold: Rating) -> LikesMatrix {
    LikesMatrix::from_pairs(
        ratings
            .iter()
            .filter(|(_, _, r)| *r >= threshold)
            .map(|(u, i, _)| (u.clone(), i.clone())),
    )
}

/// Per-user set union.
pub fn merge_likes(a: &LikesMatrix, b: &LikesMatrix) -> LikesMatrix {
    let mut out = a.clone();
    for (u, i) in b.pairs() {
        out.insert(u.clone(), i.clone());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn u(s: &str) -> UserId {
        UserId::new(s).unwrap()
    }
    fn it(s: &str) -> ItemId {
        ItemId::new(s).unwrap()
    }
    fn r(x: f64) -> Rating {
        Rating::from_f64(x).unwrap()
    }

    #[test]
    fn like_threshold_is_inclusive() {
        let mut t = RatingsTable::new();
        t.insert(u("a"), it("x"), r(4.0)).unwrap();
        t.insert(u("a"), it("y"), r(3.5)).unwrap();
        let likes = to_unary(&t, r(4.0));
        assert!(likes.likes(&u("a"), &it("x")));
        assert!(!likes.likes(&u("a"), &it("y")));
        assert!(likes.is_transpose_consistent());
    }

    #[test]
    fn empty_table_gives_empty_matrix() {
        assert!(to_unary(&RatingsTable::new(), r(4.0)).is_empty());
    }

    #[test]
    fn merge_disjoint_and_idempotent() {
        let a = LikesMatrix::from_pairs([(u("a"), it("x")), (u("b"), it("y"))]);
        let b = LikesMatrix::from_pairs([(u("c"), it("z"))]);
        assert_eq!(merge_likes(&a, &b).len(), 3);
        assert_eq!(merge_likes(&a, &a), a);
    }

    #[test]
    fn merge_counts_overlap_once() {
        let a = LikesMatrix::from_pairs([(u("a"), it("x")), (u("a"), it("y"))]);
        let b = LikesMatrix::from_pairs([(u("a"), it("y")), (u("b"), it("y"))]);
        let m = merge_likes(&a, &b);
        // {(a,x),(a,y)} ∪ {(a,y),(b,y)}
        assert_eq!(m.len(), 3);
        assert_eq!(m.users_of(&it("y")).len(), 2);
    }

    fn arb_pairs() -> impl Strategy<Value = Vec<(u8, u8)>> {
        proptest::collection::vec((0u8..8, 0u8..8), 0..40)
    }

    fn build(pairs: &[(u8, u8)]) -> LikesMatrix {
        LikesMatrix::from_pairs(
            pairs
                .iter()
                .map(|(a, b)| (u(&format!("u{a}")), it(&format!("i{b}")))),
        )
    }

    proptest! {
        #[test]
        fn merge_matches_set_union(a in arb_pairs(), b in arb_pairs()) {
            let m = merge_likes(&build(&a), &build(&b));
            let oracle: BTreeSet<(u8, u8)> = a.iter().chain(b.iter()).copied().collect();
            prop_assert_eq!(m.len(), oracle.len());
            prop_assert!(m.is_transpose_consistent());
        }

        #[test]
        fn unary_is_monotone_in_threshold(
            entries in proptest::collection::btree_map((0u8..6, 0u8..6), 1u8..=10, 0..30),
            lo in 1u8..=10, hi in 1u8..=10,
        ) {
            let (lo, hi) = (lo.min(hi), lo.max(hi));
            let mut t = RatingsTable::new();
            for ((a, b), half) in &entries {
                t.insert(u(&format!("u{a}")), it(&format!("i{b}")), Rating::from_half_steps(*half).unwrap()).unwrap();
            }
            let low = to_unary(&t, Rating::from_half_steps(lo).unwrap());
            let high = to_unary(&t, Rating::from_half_steps(hi).unwrap());
            prop_assert!(high.pairs().all(|(u, i)| low.likes(u, i)));
        }
    }
}
