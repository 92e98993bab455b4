use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

use super::{ItemId, UserId};

/// A rating on the half-step grid {0.5, 1.0, ..., 5.0}, stored as an integer
/// count of half-steps so threshold comparisons are exact.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rating(u8);

impl Rating {
    pub const MIN_HALF_STEPS: u8 = 1;
    pub const MAX_HALF_STEPS: u8 = 10;
    /// 4.0, the default like threshold.
    pub const LIKE_THRESHOLD: Rating = Rating(8);

    pub fn from_half_steps(half_steps: u8) -> Result<Self> {
        if (Self::MIN_HALF_STEPS..=Self::MAX_HALF_STEPS).contains(&half_steps) {
            Ok(Rating(half_steps))
        } else {
            Err(Error::validation(format!(
                "rating of {half_steps} half-steps outside 0.5..=5.0"
            )))
        }
    }

    /// Accepts only values within 1e-9 of a half-step grid point.
    pub fn from_f64(value: f64) -> Result<Self> {
        let doubled = value * 2.0;
        let rounded = doubled.round();
        if !value.is_finite() || (doubled - rounded).abs() > 1e-9 {
            return Err(Error::validation(format!("rating {value} is not on the half-step grid")));
        }
        if !(0.0..=255.0).contains(&rounded) {
            return Err(Error::validation(format!("rating {value} outside 0.5..=5.0")));
        }
        Self::from_half_steps(rounded as u8)
    }

    pub fn half_steps(self) -> u8 {
        self.0
    }

    pub fn value(self) -> f64 {
        f64::from(self.0) / 2.0
    }
}

impl fmt::Display for Rating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.1}", self.value())
    }
}

/// At most one rating per (user, item).
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RatingsTable {
    entries: BTreeMap<(UserId, ItemId), Rating>,
}

impl RatingsTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, user: UserId, item: ItemId, rating: Rating) -> Result<()> {
        use std::collections::btree_map::Entry;
        match self.entries.entry((user, item)) {
            Entry::Occupied(e) => Err(Error::validation(format!(
                "duplicate rating for ({}, {})",
                e.key().0,
                e.key().1
            ))),
            Entry::Vacant(e) => {
                e.insert(rating);
                Ok(())
            }
        }
    }

    pub fn get(&self, user: &UserId, item: &ItemId) -> Option<Rating> {
        self.entries.get(&(user.clone(), item.clone())).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&UserId, &ItemId, Rating)> {
        self.entries.iter().map(|((u, i), r)| (u, i, *r))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
