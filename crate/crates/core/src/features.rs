//! Feature vectors for share prediction and balanced dataset construction.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use log::warn;

use crate::error::{Error, Result};
use crate::model::{ItemId, ItemMeta, LikesMatrix, ShareRecord, UserId};
use crate::rng;
use crate::similarity::{
    jaccard_users, user_item_preference_with, ItemSimilarity, PreferenceOptions, SimilarityScore,
};

/// The six predictor columns, in vector order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Feature {
    SenderItemSim,
    RecipientItemSim,
    SenderRecipientSim,
    SenderPromiscuity,
    ExtRating,
    ExtPopularity,
}

impl Feature {
    pub const ALL: [Feature; 6] = [
        Feature::SenderItemSim,
        Feature::RecipientItemSim,
        Feature::SenderRecipientSim,
        Feature::SenderPromiscuity,
        Feature::ExtRating,
        Feature::ExtPopularity,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<Feature> {
        Self::ALL.get(index).copied()
    }

    /// Name used in printed trees.
    pub fn short_name(self) -> &'static str {
        match self {
            Feature::SenderItemSim => "sharer_sim",
            Feature::RecipientItemSim => "recip_sim",
            Feature::SenderRecipientSim => "sharer_recip_sim",
            Feature::SenderPromiscuity => "sharer_prom",
            Feature::ExtRating => "ext_rating",
            Feature::ExtPopularity => "ext_pop",
        }
    }

    /// Column name in features.csv.
    pub fn column_name(self) -> &'static str {
        match self {
            Feature::SenderItemSim => "sender_item_sim",
            Feature::RecipientItemSim => "recipient_item_sim",
            Feature::SenderRecipientSim => "sender_recipient_sim",
            Feature::SenderPromiscuity => "sender_promiscuity",
            Feature::ExtRating => "ext_rating",
            Feature::ExtPopularity => "ext_popularity",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Feature::ALL
            .into_iter()
            .find(|f| f.short_name() == s || f.column_name() == s)
            .ok_or_else(|| Error::validation(format!("unknown feature {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FeatureVector {
    pub sender_item_sim: SimilarityScore,
    pub recipient_item_sim: SimilarityScore,
    pub sender_recipient_sim: SimilarityScore,
    pub sender_promiscuity: u32,
    pub item_ext_rating: f64,
    pub item_ext_popularity: f64,
}

impl FeatureVector {
    pub fn get(&self, feature: Feature) -> f64 {
        match feature {
            Feature::SenderItemSim => self.sender_item_sim.value(),
            Feature::RecipientItemSim => self.recipient_item_sim.value(),
            Feature::SenderRecipientSim => self.sender_recipient_sim.value(),
            Feature::SenderPromiscuity => f64::from(self.sender_promiscuity),
            Feature::ExtRating => self.item_ext_rating,
            Feature::ExtPopularity => self.item_ext_popularity,
        }
    }

    pub fn as_array(&self) -> [f64; 6] {
        Feature::ALL.map(|f| self.get(f))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingInstance {
    pub record: ShareRecord,
    pub features: FeatureVector,
    pub label: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BalancedDataset {
    pub instances: Vec<TrainingInstance>,
    pub seed: u64,
}

impl BalancedDataset {
    pub fn len(&self) -> usize {
        self.instances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instances.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.instances.iter().filter(|x| x.label).count()
    }
}

/// Shares sent by `sender` in the supplied split.
pub fn promiscuity(sender: &UserId, training_shares: &[ShareRecord]) -> u32 {
    training_shares
        .iter()
        .filter(|r| r.shared && &r.sender == sender)
        .count() as u32
}

/// Per-sender share counts over a split.
pub fn promiscuity_counts<'a>(records: impl IntoIterator<Item = &'a ShareRecord>) -> HashMap<UserId, u32> {
    let mut counts = HashMap::new();
    for r in records.into_iter().filter(|r| r.shared) {
        *counts.entry(r.sender.clone()).or_insert(0) += 1;
    }
    counts
}

pub fn featurize(
    sender: &UserId,
    recipient: &UserId,
    item: &ItemId,
    likes: &LikesMatrix,
    meta: Option<&ItemMeta>,
    training_shares: &[ShareRecord],
) -> Result<FeatureVector> {
    let meta = meta.ok_or_else(|| Error::MissingItemMeta(item.to_string()))?;
    Ok(build_vector(
        sender,
        recipient,
        item,
        likes,
        likes,
        PreferenceOptions::default(),
        meta,
        promiscuity(sender, training_shares),
    ))
}

#[allow(clippy::too_many_arguments)]
fn build_vector(
    sender: &UserId,
    recipient: &UserId,
    item: &ItemId,
    likes: &LikesMatrix,
    sims: &impl ItemSimilarity,
    opts: PreferenceOptions,
    meta: &ItemMeta,
    promiscuity: u32,
) -> FeatureVector {
    FeatureVector {
        sender_item_sim: user_item_preference_with(sender, item, likes, sims, opts),
        recipient_item_sim: user_item_preference_with(recipient, item, likes, sims, opts),
        sender_recipient_sim: jaccard_users(sender, recipient, likes),
        sender_promiscuity: promiscuity,
        item_ext_rating: meta.ext_rating,
        item_ext_popularity: meta.ext_popularity,
    }
}

/// Batch featurization against one likes matrix and metadata table.
pub struct Featurizer<'a, S> {
    pub likes: &'a LikesMatrix,
    pub sims: &'a S,
    pub meta: &'a BTreeMap<ItemId, ItemMeta>,
    pub options: PreferenceOptions,
}

impl<S: ItemSimilarity> Featurizer<'_, S> {
    /// Featurizes every record, computing promiscuity from
    /// `training_shares`. Records whose item lacks metadata are skipped and
    /// logged.
    pub fn featurize_all(&self, records: &[ShareRecord], training_shares: &[ShareRecord]) -> Vec<TrainingInstance> {
        let counts = promiscuity_counts(training_shares);
        let mut skipped = 0usize;
        let out: Vec<TrainingInstance> = records
            .iter()
            .filter_map(|r| {
                let Some(meta) = self.meta.get(&r.item) else {
                    skipped += 1;
                    return None;
                };
                let prom = counts.get(&r.sender).copied().unwrap_or(0);
                let features = build_vector(
                    &r.sender,
                    &r.recipient,
                    &r.item,
                    self.likes,
                    self.sims,
                    self.options,
                    meta,
                    prom,
                );
                Some(TrainingInstance { record: r.clone(), features, label: r.shared })
            })
            .collect();
        if skipped > 0 {
            warn!("skipped {skipped} records without item metadata");
        }
        out
    }
}

/// Replaces every instance's promiscuity with counts from `training`.
pub fn apply_promiscuity(instances: &mut [TrainingInstance], training: &[&TrainingInstance]) {
    let counts = promiscuity_counts(training.iter().map(|t| &t.record));
    for inst in instances {
        inst.features.sender_promiscuity = counts.get(&inst.record.sender).copied().unwrap_or(0);
    }
}

/// Index sets for `m` balanced samples: every positive plus an equal number
/// of negatives drawn without replacement. Indices come back in pool order.
pub fn balanced_indices(labels: &[bool], m: usize, seed: u64) -> Result<Vec<(u64, Vec<usize>)>> {
    if m == 0 {
        return Err(Error::contract("need at least one balanced dataset"));
    }
    let positives: Vec<usize> = (0..labels.len()).filter(|&i| labels[i]).collect();
    let negatives: Vec<usize> = (0..labels.len()).filter(|&i| !labels[i]).collect();
    if negatives.len() < positives.len() {
        return Err(Error::InsufficientNegatives { needed: positives.len(), available: negatives.len() });
    }
    Ok((0..m)
        .map(|d| {
            let ds_seed = rng::derive_seed(seed, "balanced", &[d as u64]);
            let mut r = rng::substream(ds_seed, "negatives", &[]);
            let mut picked: Vec<usize> = rand::seq::index::sample(&mut r, negatives.len(), positives.len())
                .into_iter()
                .map(|k| negatives[k])
                .collect();
            picked.sort_unstable();
            let mut idx = positives.clone();
            idx.extend(picked);
            (ds_seed, idx)
        })
        .collect())
}

pub fn build_balanced_datasets(pool: &[TrainingInstance], m: usize, seed: u64) -> Result<Vec<BalancedDataset>> {
    let labels: Vec<bool> = pool.iter().map(|x| x.label).collect();
    Ok(balanced_indices(&labels, m, seed)?
        .into_iter()
        .map(|(ds_seed, idx)| BalancedDataset {
            instances: idx.into_iter().map(|i| pool[i].clone()).collect(),
            seed: ds_seed,
        })
        .collect())
}

/// Balanced samples of raw share records.
pub fn balanced_record_sets(records: &[ShareRecord], m: usize, seed: u64) -> Result<Vec<Vec<ShareRecord>>> {
    let labels: Vec<bool> = records.iter().map(|r| r.shared).collect();
    Ok(balanced_indices(&labels, m, seed)?
        .into_iter()
        .map(|(_, idx)| idx.into_iter().map(|i| records[i].clone()).collect())
        .collect())
}
