//! Ego-network recommendations: each user's most similar friends vote for
//! items, weighted by their Jaccard similarity to the user.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::{ItemId, LikesMatrix, UserId};
use crate::similarity::{jaccard_users, SimilarityScore};

pub const DEFAULT_FRIENDS: usize = 20;
pub const DEFAULT_LIST_LEN: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct RecommendationList {
    pub user: UserId,
    /// Sorted by descending score, ties by ascending item id.
    pub entries: Vec<(ItemId, f64)>,
}

impl RecommendationList {
    pub fn items(&self) -> impl Iterator<Item = &ItemId> {
        self.entries.iter().map(|(i, _)| i)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// The `k` friends most similar to `user`, ties broken by ascending id.
pub fn top_k_friends(
    user: &UserId,
    friends: &BTreeSet<UserId>,
    likes: &LikesMatrix,
    k: usize,
) -> Vec<(UserId, SimilarityScore)> {
    let mut ranked: Vec<(UserId, SimilarityScore)> = friends
        .iter()
        .filter(|f| *f != user)
        .map(|f| (f.clone(), jaccard_users(user, f, likes)))
        .collect();
    ranked.sort_by(|(fa, sa), (fb, sb)| by_score_then_id(sa.value(), fa, sb.value(), fb));
    ranked.truncate(k);
    ranked
}

/// Similarity-weighted share of neighbors who like `item`; 0 when every
/// neighbor similarity is 0.
pub fn score_item(neighbors: &[(UserId, SimilarityScore)], item: &ItemId, likes: &LikesMatrix) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (f, s) in neighbors {
        den += s.value();
        if likes.likes(f, item) {
            num += s.value();
        }
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

pub fn recommend(
    user: &UserId,
    friends: &BTreeSet<UserId>,
    likes: &LikesMatrix,
    k: usize,
    n: usize,
) -> Result<RecommendationList> {
    if k == 0 || n == 0 {
        return Err(Error::contract(format!("recommend needs k >= 1 and n >= 1, got k={k}, n={n}")));
    }
    let neighbors = top_k_friends(user, friends, likes, k);
    let denominator: f64 = neighbors.iter().map(|(_, s)| s.value()).sum();
    let mut entries = Vec::new();
    if denominator > 0.0 {
        let own = likes.items_of(user);
        let mut numerators: BTreeMap<&ItemId, f64> = BTreeMap::new();
        for (f, s) in &neighbors {
            for item in likes.items_of(f) {
                if !own.contains(item) {
                    *numerators.entry(item).or_insert(0.0) += s.value();
                }
            }
        }
        entries = numerators
            .into_iter()
            .filter(|(_, num)| *num > 0.0)
            .map(|(item, _)| (item.clone(), score_item(&neighbors, item, likes)))
            .collect();
        entries.sort_by(|(ia, sa), (ib, sb)| by_score_then_id(*sa, ia, *sb, ib));
        entries.truncate(n);
    }
    Ok(RecommendationList { user: user.clone(), entries })
}

fn by_score_then_id<T: Ord>(sa: f64, a: &T, sb: f64, b: &T) -> Ordering {
    sb.total_cmp(&sa).then_with(|| a.cmp(b))
}
