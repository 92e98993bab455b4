//! Jaccard similarities over like sets and the user/item preference estimate
//! built from them.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ItemId, LikesMatrix, UserId};

/// A similarity in `[0, 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq, PartialOrd)]
pub struct SimilarityScore(f64);

impl SimilarityScore {
    pub const ZERO: SimilarityScore = SimilarityScore(0.0);
    pub const ONE: SimilarityScore = SimilarityScore(1.0);

    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(SimilarityScore(value))
        } else {
            Err(Error::validation(format!("similarity {value} outside [0, 1]")))
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// |A ∩ B| / |A ∪ B|, and 0 when both sets are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> SimilarityScore {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    let inter = small.iter().filter(|x| large.contains(x)).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        SimilarityScore::ZERO
    } else {
        SimilarityScore(inter as f64 / union as f64)
    }
}

pub fn jaccard_users(u: &UserId, v: &UserId, likes: &LikesMatrix) -> SimilarityScore {
    jaccard(likes.items_of(u), likes.items_of(v))
}

pub fn jaccard_items(i: &ItemId, j: &ItemId, likes: &LikesMatrix) -> SimilarityScore {
    jaccard(likes.users_of(i), likes.users_of(j))
}

/// Source of item-item similarities.
pub trait ItemSimilarity {
    fn item_similarity(&self, i: &ItemId, j: &ItemId) -> SimilarityScore;
}

impl ItemSimilarity for LikesMatrix {
    fn item_similarity(&self, i: &ItemId, j: &ItemId) -> SimilarityScore {
        jaccard_items(i, j, self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PreferenceOptions {
    /// Whether the item itself counts when the user already likes it.
    pub include_self: bool,
}

impl Default for PreferenceOptions {
    fn default() -> Self {
        Self { include_self: true }
    }
}

/// Mean item-item similarity between `item` and each item `user` likes.
pub fn user_item_preference(user: &UserId, item: &ItemId, likes: &LikesMatrix) -> SimilarityScore {
    user_item_preference_with(user, item, likes, likes, PreferenceOptions::default())
}

pub fn user_item_preference_with(
    user: &UserId,
    item: &ItemId,
    likes: &LikesMatrix,
    sims: &impl ItemSimilarity,
    opts: PreferenceOptions,
) -> SimilarityScore {
    let liked = likes.items_of(user);
    let mut total = 0.0;
    let mut n = 0usize;
    for j in liked {
        if !opts.include_self && j == item {
            continue;
        }
        total += sims.item_similarity(item, j).value();
        n += 1;
    }
    if n == 0 {
        SimilarityScore::ZERO
    } else {
        // Clamp guards the last ulp of rounding in the mean.
        SimilarityScore((total / n as f64).clamp(0.0, 1.0))
    }
}

/// Exact item-item Jaccard similarities for every pair in a fixed item
/// universe, stored as a dense upper triangle.
#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityCache {
    index: BTreeMap<ItemId, usize>,
    self_sim: Vec<f64>,
    upper: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheRow {
    item_i: String,
    item_j: String,
    similarity: f64,
}

impl SimilarityCache {
    pub fn build<'a>(likes: &LikesMatrix, items: impl IntoIterator<Item = &'a ItemId>) -> Self {
        let index: BTreeMap<ItemId, usize> = items
            .into_iter()
            .cloned()
            .collect::<BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(k, i)| (i, k))
            .collect();
        let n = index.len();
        let mut co = vec![0u32; n * n.saturating_sub(1) / 2];
        for user in likes.users() {
            let liked: Vec<usize> = likes
                .items_of(user)
                .iter()
                .filter_map(|i| index.get(i).copied())
                .collect();
            for (a, &x) in liked.iter().enumerate() {
                for &y in &liked[a + 1..] {
                    co[tri_index(n, x.min(y), x.max(y))] += 1;
                }
            }
        }
        let counts: Vec<usize> = index.keys().map(|i| likes.users_of(i).len()).collect();
        let mut upper = vec![0.0; co.len()];
        for x in 0..n {
            for y in x + 1..n {
                let k = tri_index(n, x, y);
                let c = co[k] as usize;
                let union = counts[x] + counts[y] - c;
                if union > 0 {
                    upper[k] = c as f64 / union as f64;
                }
            }
        }
        let self_sim = counts.iter().map(|&c| if c > 0 { 1.0 } else { 0.0 }).collect();
        Self { index, self_sim, upper }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn contains(&self, item: &ItemId) -> bool {
        self.index.contains_key(item)
    }

    /// `None` when either item is outside the cached universe.
    pub fn get(&self, i: &ItemId, j: &ItemId) -> Option<SimilarityScore> {
        let x = *self.index.get(i)?;
        let y = *self.index.get(j)?;
        let n = self.index.len();
        let v = match x.cmp(&y) {
            std::cmp::Ordering::Equal => self.self_sim[x],
            std::cmp::Ordering::Less => self.upper[tri_index(n, x, y)],
            std::cmp::Ordering::Greater => self.upper[tri_index(n, y, x)],
        };
        Some(SimilarityScore(v))
    }

    /// Writes `item_i,item_j,similarity` for every pair with `item_i < item_j`.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let items: Vec<&ItemId> = self.index.keys().collect();
        let n = items.len();
        for x in 0..n {
            for y in x + 1..n {
                w.serialize(CacheRow {
                    item_i: items[x].to_string(),
                    item_j: items[y].to_string(),
                    similarity: self.upper[tri_index(n, x, y)],
                })?;
            }
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a dump produced by [`write_csv`](Self::write_csv). Self
    /// similarity of a loaded item is taken as 1.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        let mut rdr = csv::Reader::from_reader(reader);
        for row in rdr.deserialize::<CacheRow>() {
            let row = row.map_err(|e| Error::validation(format!("similarity cache: {e}")))?;
            let i = ItemId::new(row.item_i)?;
            let j = ItemId::new(row.item_j)?;
            if i >= j {
                return Err(Error::validation(format!("cache pair ({i}, {j}) not ordered i < j")));
            }
            SimilarityScore::new(row.similarity)?;
            rows.push((i, j, row.similarity));
        }
        let universe: BTreeSet<ItemId> = rows.iter().flat_map(|(i, j, _)| [i.clone(), j.clone()]).collect();
        let index: BTreeMap<ItemId, usize> = universe.into_iter().enumerate().map(|(k, i)| (i, k)).collect();
        let n = index.len();
        let mut upper = vec![0.0; n * n.saturating_sub(1) / 2];
        for (i, j, s) in rows {
            upper[tri_index(n, index[&i], index[&j])] = s;
        }
        Ok(Self { index, self_sim: vec![1.0; n], upper })
    }
}

fn tri_index(n: usize, x: usize, y: usize) -> usize {
    debug_assert!(x < y && y < n);
    x * (2 * n - x - 1) / 2 + (y - x - 1)
}

/// Cache-first lookup that falls back to on-demand computation.
pub struct CachedSimilarity<'a> {
    pub likes: &'a LikesMatrix,
    pub cache: &'a SimilarityCache,
}

impl ItemSimilarity for CachedSimilarity<'_> {
    fn item_similarity(&self, i: &ItemId, j: &ItemId) -> SimilarityScore {
        self.cache
            .get(i, j)
            .unwrap_or_else(|| jaccard_items(i, j, self.likes))
    }
}
