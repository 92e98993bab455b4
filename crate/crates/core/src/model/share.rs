use std::collections::BTreeSet;

use crate::error::{Error, Result};

use super::{DyadSession, ItemId, UserId};

/// A directed (sender, recipient, item) event. `shared == false` means the
/// item was shown to the sender but not shared.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ShareRecord {
    pub sender: UserId,
    pub recipient: UserId,
    pub item: ItemId,
    pub shared: bool,
}

impl ShareRecord {
    pub fn new(sender: UserId, recipient: UserId, item: ItemId, shared: bool) -> Result<Self> {
        if sender == recipient {
            return Err(Error::validation(format!("share from {sender} to itself")));
        }
        Ok(Self { sender, recipient, item, shared })
    }
}

/// External item characteristics (e.g. an average rating on 1..=10 and a
/// vote count).
#[derive(Clone, Debug, PartialEq)]
pub struct ItemMeta {
    pub item: ItemId,
    pub ext_rating: f64,
    pub ext_popularity: f64,
}

impl ItemMeta {
    pub fn new(item: ItemId, ext_rating: f64, ext_popularity: f64) -> Result<Self> {
        if !(1.0..=10.0).contains(&ext_rating) {
            return Err(Error::validation(format!(
                "ext_rating {ext_rating} for {item} outside [1, 10]"
            )));
        }
        if !(ext_popularity.is_finite() && ext_popularity >= 0.0) {
            return Err(Error::validation(format!(
                "ext_popularity {ext_popularity} for {item} must be a non-negative count"
            )));
        }
        Ok(Self { item, ext_rating, ext_popularity })
    }
}

/// Builds one record per item shown in `session`, marking as shared the
/// items `sender` passed on to the partner.
pub fn session_records(
    session: &DyadSession,
    sender: &UserId,
    shared_items: &BTreeSet<ItemId>,
) -> Result<Vec<ShareRecord>> {
    let recipient = session.partner_of(sender)?.clone();
    if let Some(stray) = shared_items.iter().find(|i| !session.shown_items().contains(i)) {
        return Err(Error::validation(format!(
            "{sender} shared {stray}, which was not shown in the session"
        )));
    }
    session
        .shown_items()
        .iter()
        .map(|i| ShareRecord::new(sender.clone(), recipient.clone(), i.clone(), shared_items.contains(i)))
        .collect()
}
