//! Synthetic study populations with a known generative process.
//!
//! Users and items get latent taste vectors. Likes are drawn in proportion to
//! affinity, every dyad sees recommender output, ratings are noisy affinity on
//! the half-step grid and each sender shares a geometric number of shown items
//! ranked by `ρ·taste(sender) + taste(recipient)`. Item quality (a per-item bias)
//! drives likes, ratings and popularity but not the share decision.
//!
//! None of this is fitted to real data. It exists so the pipeline and the
//! simulator have ground truth to be tested against.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{
    merge_likes, session_records, to_unary, DyadSession, ItemId, ItemMeta, LikesMatrix, Rating, RatingsTable,
    ShareRecord, UserId, LIST_SIZE,
};
use crate::recommender::{recommend, DEFAULT_FRIENDS};
use crate::rng::substream;
use crate::stats::LmmRow;

/// Targets and knobs for [`generate_study`].
#[derive(Clone, Debug, PartialEq)]
pub struct StudyProfile {
    pub n_pairs: usize,
    pub likes_mean: f64,
    pub likes_sd: f64,
    pub ratings_per_person: f64,
    pub mean_rating: f64,
    pub shares_per_person: f64,
    pub latent_dim: usize,
    /// ρ = a/b, sender taste weight relative to recipient taste.
    pub sender_weight_ratio: f64,
    pub n_items: usize,
    pub n_background: usize,
    pub friends_per_participant: usize,
    /// Correlation between partners' taste vectors.
    pub partner_homophily: f64,
    /// Fraction of dyads shown the union of both lists.
    pub both_shown_fraction: f64,
    /// Sharpness of like sampling, `P ∝ exp(τ·affinity)`.
    pub like_temperature: f64,
    pub item_bias_sd: f64,
    /// How strongly affinity decides which shown items get rated,
    /// `P ∝ exp(λ·affinity)`; 0 picks uniformly.
    pub rating_selectivity: f64,
    /// Rating points per unit of affinity before rounding.
    pub rating_slope: f64,
    pub rating_noise: f64,
    pub share_noise: f64,
}

impl Default for StudyProfile {
    fn default() -> Self {
        Self {
            n_pairs: 87,
            likes_mean: 18.2,
            likes_sd: 31.8,
            ratings_per_person: 8.18,
            mean_rating: 3.85,
            shares_per_person: 2.66,
            latent_dim: 8,
            sender_weight_ratio: 3.0,
            n_items: 400,
            n_background: 1500,
            friends_per_participant: 40,
            partner_homophily: 0.5,
            both_shown_fraction: 0.5,
            like_temperature: 1.5,
            item_bias_sd: 0.3,
            rating_selectivity: 2.0,
            rating_slope: 1.0,
            rating_noise: 0.3,
            share_noise: 0.3,
        }
    }
}

impl StudyProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("likes_mean", self.likes_mean),
            ("likes_sd", self.likes_sd),
            ("ratings_per_person", self.ratings_per_person),
            ("mean_rating", self.mean_rating),
            ("shares_per_person", self.shares_per_person),
            ("like_temperature", self.like_temperature),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::validation(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("item_bias_sd", self.item_bias_sd), ("rating_selectivity", self.rating_selectivity), ("rating_slope", self.rating_slope), ("rating_noise", self.rating_noise), ("share_noise", self.share_noise)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::validation(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.n_pairs == 0 || self.latent_dim == 0 || self.n_items == 0 || self.friends_per_participant == 0 {
            return Err(Error::validation("n_pairs, latent_dim, n_items and friends_per_participant must be positive"));
        }
        if self.n_background < self.friends_per_participant {
            return Err(Error::validation("n_background must be at least friends_per_participant"));
        }
        if !(self.sender_weight_ratio >= 1.0 && self.sender_weight_ratio.is_finite()) {
            return Err(Error::validation(format!("sender_weight_ratio must be >= 1, got {}", self.sender_weight_ratio)));
        }
        if !(0.0..=1.0).contains(&self.partner_homophily) || !(0.0..=1.0).contains(&self.both_shown_fraction) {
            return Err(Error::validation("partner_homophily and both_shown_fraction must lie in [0, 1]"));
        }
        if self.n_items < 2 * LIST_SIZE {
            return Err(Error::Calibration(format!("catalog of {} items cannot fill two lists of {LIST_SIZE}", self.n_items)));
        }
        if self.shares_per_person >= LIST_SIZE as f64 || self.ratings_per_person > LIST_SIZE as f64 {
            return Err(Error::Calibration(format!(
                "shares/person {} and ratings/person {} must fit in {LIST_SIZE} shown items",
                self.shares_per_person, self.ratings_per_person
            )));
        }
        if !(0.5..=5.0).contains(&self.mean_rating) {
            return Err(Error::Calibration(format!("mean rating {} is off the 0.5..5 scale", self.mean_rating)));
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse().map_err(|_| Error::validation(format!("bad value {v:?} for {key}")))
        }
        match key {
            "n_pairs" => self.n_pairs = num(key, value)?,
            "likes_mean" => self.likes_mean = num(key, value)?,
            "likes_sd" => self.likes_sd = num(key, value)?,
            "ratings_per_person" => self.ratings_per_person = num(key, value)?,
            "mean_rating" => self.mean_rating = num(key, value)?,
            "shares_per_person" => self.shares_per_person = num(key, value)?,
            "latent_dim" => self.latent_dim = num(key, value)?,
            "sender_weight_ratio" => self.sender_weight_ratio = num(key, value)?,
            "n_items" => self.n_items = num(key, value)?,
            "n_background" => self.n_background = num(key, value)?,
            "friends_per_participant" => self.friends_per_participant = num(key, value)?,
            "partner_homophily" => self.partner_homophily = num(key, value)?,
            "both_shown_fraction" => self.both_shown_fraction = num(key, value)?,
            "like_temperature" => self.like_temperature = num(key, value)?,
            "item_bias_sd" => self.item_bias_sd = num(key, value)?,
            "rating_selectivity" => self.rating_selectivity = num(key, value)?,
            "rating_slope" => self.rating_slope = num(key, value)?,
            "rating_noise" => self.rating_noise = num(key, value)?,
            "share_noise" => self.share_noise = num(key, value)?,
            other => return Err(Error::validation(format!("unknown profile key {other:?}"))),
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        format!(
            "n_pairs={}\nlikes_mean={}\nlikes_sd={}\nratings_per_person={}\nmean_rating={}\nshares_per_person={}\n\
             latent_dim={}\nsender_weight_ratio={}\nn_items={}\nn_background={}\nfriends_per_participant={}\n\
             partner_homophily={}\nboth_shown_fraction={}\nlike_temperature={}\nitem_bias_sd={}\nrating_selectivity={}\nrating_slope={}\nrating_noise={}\n\
             share_noise={}\n",
            self.n_pairs,
            self.likes_mean,
            self.likes_sd,
            self.ratings_per_person,
            self.mean_rating,
            self.shares_per_person,
            self.latent_dim,
            self.sender_weight_ratio,
            self.n_items,
            self.n_background,
            self.friends_per_participant,
            self.partner_homophily,
            self.both_shown_fraction,
            self.like_temperature,
            self.item_bias_sd,
            self.rating_selectivity,
            self.rating_slope,
            self.rating_noise,
            self.share_noise,
        )
    }
}

/// Hidden generative state. Never an input to the pipeline.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub user_traits: BTreeMap<UserId, Vec<f64>>,
    pub item_traits: BTreeMap<ItemId, Vec<f64>>,
    pub item_bias: BTreeMap<ItemId, f64>,
    /// Noise-free share score `ρ·taste(sender) + taste(recipient)` per (sender, shown item).
    pub share_scores: BTreeMap<(UserId, ItemId), f64>,
}

impl GroundTruth {
    /// Long format `kind,user_id,item_id,index,value`; floats use shortest round-trip text.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["kind", "user_id", "item_id", "index", "value"])?;
        for (u, v) in &self.user_traits {
            for (k, x) in v.iter().enumerate() {
                w.write_record(["user_trait", u.as_str(), "", &k.to_string(), &x.to_string()])?;
            }
        }
        for (i, v) in &self.item_traits {
            for (k, x) in v.iter().enumerate() {
                w.write_record(["item_trait", "", i.as_str(), &k.to_string(), &x.to_string()])?;
            }
        }
        for (i, b) in &self.item_bias {
            w.write_record(["item_bias", "", i.as_str(), "0", &b.to_string()])?;
        }
        for ((u, i), s) in &self.share_scores {
            w.write_record(["share_score", u.as_str(), i.as_str(), "0", &s.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut truth = Self::default();
        let mut r = csv::Reader::from_reader(reader);
        for (n, rec) in r.records().enumerate() {
            let rec = rec.map_err(|e| Error::validation(format!("groundtruth row {}: {e}", n + 2)))?;
            let bad = |what: &str| Error::validation(format!("groundtruth row {}: {what}", n + 2));
            let field = |k: usize| rec.get(k).ok_or_else(|| bad("missing field"));
            let index: usize = field(3)?.parse().map_err(|_| bad("bad index"))?;
            let value: f64 = field(4)?.parse().map_err(|_| bad("bad value"))?;
            let push = |v: &mut Vec<f64>| {
                if v.len() != index {
                    return Err(bad("trait indices out of order"));
                }
                v.push(value);
                Ok(())
            };
            match field(0)? {
                "user_trait" => push(truth.user_traits.entry(UserId::new(field(1)?)?).or_default())?,
                "item_trait" => push(truth.item_traits.entry(ItemId::new(field(2)?)?).or_default())?,
                "item_bias" => {
                    truth.item_bias.insert(ItemId::new(field(2)?)?, value);
                }
                "share_score" => {
                    truth.share_scores.insert((UserId::new(field(1)?)?, ItemId::new(field(2)?)?), value);
                }
                other => return Err(bad(&format!("unknown kind {other:?}"))),
            }
        }
        Ok(truth)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticStudy {
    pub profile: StudyProfile,
    pub seed: u64,
    /// Profile likes of participants and background users.
    pub likes: LikesMatrix,
    pub ratings: RatingsTable,
    /// One record per (sender, shown item), shared or not.
    pub shares: Vec<ShareRecord>,
    pub sessions: Vec<DyadSession>,
    pub items: BTreeMap<ItemId, ItemMeta>,
    /// Participant → friends (partner included).
    pub friends: BTreeMap<UserId, BTreeSet<UserId>>,
    pub truth: GroundTruth,
}

impl SyntheticStudy {
    pub fn participants(&self) -> impl Iterator<Item = &UserId> {
        self.sessions.iter().flat_map(|s| [s.user_a(), s.user_b()])
    }

    /// Profile likes plus every rating at or above the like threshold.
    pub fn pipeline_likes(&self) -> LikesMatrix {
        merge_likes(&self.likes, &to_unary(&self.ratings, Rating::LIKE_THRESHOLD))
    }

    pub fn shares_sent(&self) -> usize {
        self.shares.iter().filter(|r| r.shared).count()
    }
}

struct Latent {
    dim: usize,
    users: BTreeMap<UserId, Vec<f64>>,
    items: Vec<(ItemId, Vec<f64>, f64)>,
}

impl Latent {
    fn taste(&self, u: &[f64], item: usize) -> f64 {
        let y = &self.items[item].1;
        u.iter().zip(y).map(|(a, b)| a * b).sum::<f64>() / (self.dim as f64).sqrt()
    }

    fn affinity(&self, u: &[f64], item: usize) -> f64 {
        self.taste(u, item) + self.items[item].2
    }
}

fn gaussian_vec(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Standard Gumbel noise. Adding it to log-weights and keeping the top `n`
/// draws `n` items without replacement in proportion to the weights.
fn gumbel(rng: &mut impl Rng) -> f64 {
    -(-(rng.random::<f64>().max(f64::MIN_POSITIVE)).ln()).ln()
}

/// Inverse CDF of a geometric count on {0, 1, ...} with the given mean.
fn geometric_quantile(mean: f64, u: f64) -> usize {
    let q = mean / (1.0 + mean);
    ((1.0 - u).ln() / q.ln()).floor().max(0.0) as usize
}

/// Draws `n` values whose empirical distribution is stratified over `(0, 1)`:
/// `(j + U_j) / n` in shuffled order.
fn stratified_uniforms(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|j| (j as f64 + rng.random::<f64>()) / n as f64).collect();
    v.shuffle(rng);
    v
}

fn to_half_steps(x: f64) -> u8 {
    (x * 2.0).round().clamp(1.0, 10.0) as u8
}

/// Builds a study deterministically from `seed`.
pub fn generate_study(profile: &StudyProfile, seed: u64) -> Result<SyntheticStudy> {
    profile.validate()?;
    let d = profile.latent_dim;
    let n_participants = 2 * profile.n_pairs;

    let mut rng = substream(seed, "items", &[]);
    let bias = Normal::new(0.0, profile.item_bias_sd).map_err(|e| Error::validation(e.to_string()))?;
    let items: Vec<(ItemId, Vec<f64>, f64)> = (0..profile.n_items)
        .map(|k| {
            let y = gaussian_vec(&mut rng, d);
            (ItemId::new(format!("m{k:04}")).expect("non-empty"), y, bias.sample(&mut rng))
        })
        .collect();

    let mut rng = substream(seed, "users", &[]);
    let mut users = BTreeMap::new();
    let background: Vec<UserId> = (0..profile.n_background)
        .map(|k| UserId::new(format!("u{k:05}")).expect("non-empty"))
        .collect();
    for u in &background {
        users.insert(u.clone(), gaussian_vec(&mut rng, d));
    }
    let h = profile.partner_homophily;
    let mut pairs = Vec::with_capacity(profile.n_pairs);
    for p in 0..profile.n_pairs {
        let a = UserId::new(format!("p{p:03}a")).expect("non-empty");
        let b = UserId::new(format!("p{p:03}b")).expect("non-empty");
        let xa = gaussian_vec(&mut rng, d);
        let z = gaussian_vec(&mut rng, d);
        let xb = xa.iter().zip(&z).map(|(x, z)| h * x + (1.0 - h * h).sqrt() * z).collect();
        users.insert(a.clone(), xa);
        users.insert(b.clone(), xb);
        pairs.push((a, b));
    }
    let latent = Latent { dim: d, users, items };

    // Log-normal like counts matched to the target mean and sd.
    let sigma2 = (1.0 + (profile.likes_sd / profile.likes_mean).powi(2)).ln();
    let mu = profile.likes_mean.ln() - sigma2 / 2.0;
    let count_dist = rand_distr::LogNormal::new(mu, sigma2.sqrt()).map_err(|e| Error::validation(e.to_string()))?;
    let cap = (profile.n_items / 2).max(1);
    let mut likes = LikesMatrix::new();
    for (u, x) in &latent.users {
        let mut rng = substream(seed, "likes", &[crate::rng::id_hash(u.as_str())]);
        let n = (count_dist.sample(&mut rng).round() as usize).clamp(1, cap);
        let mut keyed: Vec<(f64, usize)> = (0..latent.items.len())
            .map(|k| {
                (profile.like_temperature * latent.affinity(x, k) + gumbel(&mut rng), k)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, k) in &keyed[..n] {
            likes.insert(u.clone(), latent.items[k].0.clone());
        }
    }

    // Friends: the most like-minded of a random candidate pool, plus the partner.
    let mut friends = BTreeMap::new();
    for (p, (a, b)) in pairs.iter().enumerate() {
        for (who, partner, side) in [(a, b, 0u64), (b, a, 1u64)] {
            let mut rng = substream(seed, "friends", &[p as u64, side]);
            let pool_size = (3 * profile.friends_per_participant).min(background.len());
            let pool = rand::seq::index::sample(&mut rng, background.len(), pool_size);
            let x = &latent.users[who];
            let mut ranked: Vec<(f64, usize)> = pool
                .into_iter()
                .map(|k| (x.iter().zip(&latent.users[&background[k]]).map(|(a, b)| a * b).sum::<f64>(), k))
                .collect();
            ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut set: BTreeSet<UserId> = ranked
                .iter()
                .take(profile.friends_per_participant)
                .map(|&(_, k)| background[k].clone())
                .collect();
            set.insert(partner.clone());
            friends.insert(who.clone(), set);
        }
    }

    // Global popularity order used to pad short recommendation lists.
    let mut popular: Vec<(usize, &ItemId)> = latent.items.iter().map(|(i, _, _)| (likes.users_of(i).len(), i)).collect();
    popular.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(b.1)));

    let list_for = |u: &UserId| -> Result<Vec<ItemId>> {
        let rec = recommend(u, &friends[u], &likes, DEFAULT_FRIENDS, LIST_SIZE)?;
        let mut list: Vec<ItemId> = rec.items().cloned().collect();
        let own = likes.items_of(u);
        for (_, item) in &popular {
            if list.len() >= LIST_SIZE {
                break;
            }
            if !own.contains(*item) && !list.contains(item) {
                list.push((*item).clone());
            }
        }
        Ok(list)
    };

    let item_index: BTreeMap<&ItemId, usize> = latent.items.iter().enumerate().map(|(k, (i, _, _))| (i, k)).collect();
    let rho = profile.sender_weight_ratio;
    let mut sessions = Vec::with_capacity(profile.n_pairs);
    let mut truth_scores = BTreeMap::new();
    let mut rng = substream(seed, "shares", &[]);
    let share_quantiles = stratified_uniforms(&mut rng, n_participants);
    let mut rng = substream(seed, "ratings-count", &[]);
    let rating_quantiles = stratified_uniforms(&mut rng, n_participants);
    let rate_lo = profile.ratings_per_person.floor();
    let rate_frac = profile.ratings_per_person - rate_lo;

    let mut share_plans: Vec<SharePlan> = Vec::new();
    let mut rating_draws: Vec<(UserId, ItemId, f64, f64)> = Vec::new();
    for (p, (a, b)) in pairs.iter().enumerate() {
        let mut rng = substream(seed, "session", &[p as u64]);
        let list_a = list_for(a)?;
        let list_b = list_for(b)?;
        let (mut shown, own_a, own_b): (Vec<ItemId>, BTreeSet<ItemId>, BTreeSet<ItemId>) =
            if rng.random::<f64>() < profile.both_shown_fraction {
                let mut union: Vec<ItemId> = list_a.clone();
                union.extend(list_b.iter().filter(|i| !list_a.contains(i)).cloned());
                (union, list_a.into_iter().collect(), list_b.into_iter().collect())
            } else if rng.random::<bool>() {
                (list_a.clone(), list_a.into_iter().collect(), BTreeSet::new())
            } else {
                (list_b.clone(), BTreeSet::new(), list_b.into_iter().collect())
            };
        shown.shuffle(&mut rng);
        let session = DyadSession::new(a.clone(), b.clone(), shown.clone(), own_a, own_b)?;

        for (side, (sender, recipient)) in [(a, b), (b, a)].into_iter().enumerate() {
            let slot = 2 * p + side;
            let xs = &latent.users[sender];
            let xr = &latent.users[recipient];
            let mut rng = substream(seed, "share-noise", &[p as u64, side as u64]);
            let scored: Vec<(f64, ItemId)> = shown
                .iter()
                .map(|i| {
                    let k = item_index[i];
                    let (ts, tr) = (latent.taste(xs, k), latent.taste(xr, k));
                    truth_scores.insert((sender.clone(), i.clone()), rho * ts + tr);
                    (rho * ts + tr + profile.share_noise * rng.sample::<f64, _>(StandardNormal), i.clone())
                })
                .collect();
            let k = geometric_quantile(profile.shares_per_person, share_quantiles[slot]);
            share_plans.push(SharePlan { session: p, sender: sender.clone(), quota: k, cutoff: 0.0, scored });

            let n_rate = if rating_quantiles[slot] < rate_frac { rate_lo + 1.0 } else { rate_lo } as usize;
            let mut rng = substream(seed, "ratings", &[p as u64, side as u64]);
            let mut keyed: Vec<(f64, usize)> = shown
                .iter()
                .enumerate()
                .map(|(k, i)| (profile.rating_selectivity * latent.affinity(xs, item_index[i]) + gumbel(&mut rng), k))
                .collect();
            keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
            let mut picked: Vec<usize> = keyed.iter().take(n_rate).map(|&(_, k)| k).collect();
            picked.sort_unstable();
            for k in picked {
                let item = &shown[k];
                let aff = latent.affinity(xs, item_index[item]);
                let noise = profile.rating_noise * rng.sample::<f64, _>(StandardNormal);
                rating_draws.push((sender.clone(), item.clone(), aff, noise));
            }
        }
        sessions.push(session);
    }

    let offset = calibrate_rating_offset(&rating_draws, profile.rating_slope, profile.mean_rating)?;
    let mut ratings = RatingsTable::new();
    for (u, i, aff, noise) in &rating_draws {
        let r = Rating::from_half_steps(to_half_steps(offset + profile.rating_slope * aff + noise))?;
        ratings.insert(u.clone(), i.clone(), r)?;
    }

    let target = profile.shares_per_person * n_participants as f64;
    set_cutoffs(&mut share_plans);
    let shift = calibrate_share_shift(&share_plans, target)?;
    let mut shares = Vec::new();
    for plan in &share_plans {
        shares.extend(session_records(&sessions[plan.session], &plan.sender, &plan.shared(shift))?);
    }

    let mut rng = substream(seed, "meta", &[]);
    let mut meta = BTreeMap::new();
    for (i, _, b) in &latent.items {
        let ext_rating = (6.5 + 0.8 * b + 0.8 * rng.sample::<f64, _>(StandardNormal)).clamp(1.0, 10.0);
        let ext_rating = (ext_rating * 10.0).round() / 10.0;
        let popularity = (8.0 + b + rng.sample::<f64, _>(StandardNormal)).exp().round();
        meta.insert(i.clone(), ItemMeta::new(i.clone(), ext_rating, popularity)?);
    }

    let truth = GroundTruth {
        user_traits: latent.users.clone(),
        item_traits: latent.items.iter().map(|(i, y, _)| (i.clone(), y.clone())).collect(),
        item_bias: latent.items.iter().map(|(i, _, b)| (i.clone(), *b)).collect(),
        share_scores: truth_scores,
    };

    Ok(SyntheticStudy {
        profile: profile.clone(),
        seed,
        likes,
        ratings,
        shares,
        sessions,
        items: meta,
        friends,
        truth,
    })
}

/// One sender's share decision. Items are ranked by
/// `ρ·taste(sender) + taste(recipient) + noise` and the prefix above `cutoff + shift` is shared.
struct SharePlan {
    session: usize,
    sender: UserId,
    /// Promiscuity draw: shares this sender would make on a typical list.
    quota: usize,
    cutoff: f64,
    /// (total score, item)
    scored: Vec<(f64, ItemId)>,
}

impl SharePlan {
    fn count(&self, shift: f64) -> usize {
        self.scored.iter().filter(|x| x.0 > self.cutoff + shift).count()
    }

    fn shared(&self, shift: f64) -> BTreeSet<ItemId> {
        self.scored.iter().filter(|x| x.0 > self.cutoff + shift).map(|x| x.1.clone()).collect()
    }
}

/// Each cutoff is the quantile of the pooled score distribution that a
/// typical list would clear `quota` times. Pooling keeps the rule symmetric in
/// sender and recipient taste when ρ = 1, and lets well-matched lists draw
/// more shares than the quota.
fn set_cutoffs(plans: &mut [SharePlan]) {
    let mut pooled: Vec<f64> = plans.iter().flat_map(|p| p.scored.iter().map(|x| x.0)).collect();
    if pooled.is_empty() {
        return;
    }
    pooled.sort_by(f64::total_cmp);
    for plan in plans {
        let n = plan.scored.len();
        plan.cutoff = match plan.quota {
            0 => f64::INFINITY,
            k if k >= n => f64::NEG_INFINITY,
            k => {
                let q = 1.0 - k as f64 / n as f64;
                pooled[((q * pooled.len() as f64) as usize).min(pooled.len() - 1)]
            }
        };
    }
}

/// Global shift on every cutoff so total shares land as close as possible to
/// `target`. Share counts are non-increasing in the shift.
fn calibrate_share_shift(plans: &[SharePlan], target: f64) -> Result<f64> {
    let total = |shift: f64| plans.iter().map(|p| p.count(shift)).sum::<usize>() as f64;
    let (mut lo, mut hi) = (-50.0, 50.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = if (total(lo) - target).abs() <= (total(hi) - target).abs() { lo } else { hi };
    if plans.is_empty() || (total(best) - target).abs() > 0.1 * target {
        return Err(Error::Calibration(format!("cannot reach {target} shares from the shown items")));
    }
    Ok(best)
}

/// Finds the offset whose discretized ratings average `target`. The mean of
/// clipped, rounded ratings is non-decreasing in the offset, so bisection works.
fn calibrate_rating_offset(draws: &[(UserId, ItemId, f64, f64)], slope: f64, target: f64) -> Result<f64> {
    if draws.is_empty() {
        return Err(Error::Calibration("no ratings to calibrate".into()));
    }
    let mean_at = |offset: f64| {
        draws
            .iter()
            .map(|(_, _, aff, noise)| f64::from(to_half_steps(offset + slope * aff + noise)) / 2.0)
            .sum::<f64>()
            / draws.len() as f64
    };
    let (mut lo, mut hi) = (-20.0, 25.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if mean_at(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let best = if (mean_at(lo) - target).abs() <= (mean_at(hi) - target).abs() { lo } else { hi };
    if (mean_at(best) - target).abs() > 0.05 {
        return Err(Error::Calibration(format!("could not bring the mean rating within 0.05 of {target}")));
    }
    Ok(best)
}

/// Ratings-long rows from `3.5 + β·condition + u_participant + v_item + ε` over a
/// fully crossed participant × item design. Exactly half the rows (rounded
/// down) get `condition = true`, at random positions.
pub fn planted_effect_ratings(
    n_participants: usize,
    n_items: usize,
    beta: f64,
    sd_participant: f64,
    sd_item: f64,
    sd_residual: f64,
    seed: u64,
) -> Result<Vec<LmmRow>> {
    for (name, v) in [("sd_participant", sd_participant), ("sd_item", sd_item), ("sd_residual", sd_residual)] {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::validation(format!("{name} must be a non-negative number, got {v}")));
        }
    }
    if n_participants == 0 || n_items == 0 || !beta.is_finite() {
        return Err(Error::validation("need at least one participant and one item and a finite beta"));
    }
    let mut rng = substream(seed, "planted", &[]);
    let z = |sd: f64, rng: &mut rand_chacha::ChaCha8Rng| sd * rng.sample::<f64, _>(StandardNormal);
    let u: Vec<f64> = (0..n_participants).map(|_| z(sd_participant, &mut rng)).collect();
    let v: Vec<f64> = (0..n_items).map(|_| z(sd_item, &mut rng)).collect();
    let n = n_participants * n_items;
    let mut condition: Vec<bool> = (0..n).map(|k| k < n / 2).collect();
    condition.shuffle(&mut rng);
    let mut rows = Vec::with_capacity(n);
    for p in 0..n_participants {
        for m in 0..n_items {
            let c = condition[p * n_items + m];
            let e = z(sd_residual, &mut rng);
            rows.push(LmmRow {
                rating: PLANTED_INTERCEPT + if c { beta } else { 0.0 } + u[p] + v[m] + e,
                participant: UserId::new(format!("p{p:04}")).expect("non-empty"),
                item: ItemId::new(format!("m{m:04}")).expect("non-empty"),
                condition: c,
            });
        }
    }
    Ok(rows)
}

pub const PLANTED_INTERCEPT: f64 = 3.5;
