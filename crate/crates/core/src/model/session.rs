use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};

use super::{ItemId, UserId};

/// Number of recommendations computed per participant.
pub const LIST_SIZE: usize = 10;

/// Which recommendations a participant saw.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum StudyGroup {
    BothShown,
    OwnShown,
    OtherShown,
}

impl StudyGroup {
    pub fn name(self) -> &'static str {
        match self {
            StudyGroup::BothShown => "both_shown",
            StudyGroup::OwnShown => "own_shown",
            StudyGroup::OtherShown => "other_shown",
        }
    }
}

impl fmt::Display for StudyGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Provenance of a shown item.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    OwnA,
    OwnB,
    Both,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::OwnA => "own_a",
            Provenance::OwnB => "own_b",
            Provenance::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "own_a" => Ok(Provenance::OwnA),
            "own_b" => Ok(Provenance::OwnB),
            "both" => Ok(Provenance::Both),
            other => Err(Error::validation(format!("unknown provenance {other:?}"))),
        }
    }
}

/// A pair of participants who were shown the same list of items.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DyadSession {
    user_a: UserId,
    user_b: UserId,
    shown_items: Vec<ItemId>,
    own_recs_a: BTreeSet<ItemId>,
    own_recs_b: BTreeSet<ItemId>,
}

impl DyadSession {
    /// `shown_items` keeps its ingested order and must equal the union of the
    /// two provenance sets, without duplicates, with 10..=20 entries.
    pub fn new(
        user_a: UserId,
        user_b: UserId,
        shown_items: Vec<ItemId>,
        own_recs_a: BTreeSet<ItemId>,
        own_recs_b: BTreeSet<ItemId>,
    ) -> Result<Self> {
        let fail = |reason: String| Error::InconsistentSession {
            user_a: user_a.to_string(),
            user_b: user_b.to_string(),
            reason,
        };
        if user_a == user_b {
            return Err(fail("a participant cannot pair with themselves".into()));
        }
        let shown: BTreeSet<&ItemId> = shown_items.iter().collect();
        if shown.len() != shown_items.len() {
            return Err(fail("duplicate shown items".into()));
        }
        if !(LIST_SIZE..=2 * LIST_SIZE).contains(&shown_items.len()) {
            return Err(fail(format!("{} shown items, expected 10..=20", shown_items.len())));
        }
        let union: BTreeSet<&ItemId> = own_recs_a.iter().chain(&own_recs_b).collect();
        if union != shown {
            return Err(fail("shown items differ from the union of both recommendation sets".into()));
        }
        Ok(Self { user_a, user_b, shown_items, own_recs_a, own_recs_b })
    }

    pub fn user_a(&self) -> &UserId {
        &self.user_a
    }

    pub fn user_b(&self) -> &UserId {
        &self.user_b
    }

    pub fn shown_items(&self) -> &[ItemId] {
        &self.shown_items
    }

    pub fn own_recs_a(&self) -> &BTreeSet<ItemId> {
        &self.own_recs_a
    }

    pub fn own_recs_b(&self) -> &BTreeSet<ItemId> {
        &self.own_recs_b
    }

    pub fn provenance(&self, item: &ItemId) -> Option<Provenance> {
        match (self.own_recs_a.contains(item), self.own_recs_b.contains(item)) {
            (true, true) => Some(Provenance::Both),
            (true, false) => Some(Provenance::OwnA),
            (false, true) => Some(Provenance::OwnB),
            (false, false) => None,
        }
    }

    pub fn partner_of(&self, participant: &UserId) -> Result<&UserId> {
        if participant == &self.user_a {
            Ok(&self.user_b)
        } else if participant == &self.user_b {
            Ok(&self.user_a)
        } else {
            Err(Error::contract(format!(
                "{participant} is not in session {}/{}",
                self.user_a, self.user_b
            )))
        }
    }

    fn own_recs_of(&self, participant: &UserId) -> &BTreeSet<ItemId> {
        if participant == &self.user_a {
            &self.own_recs_a
        } else {
            &self.own_recs_b
        }
    }
}

/// Classifies a participant by the provenance of what they were shown.
pub fn assign_group(participant: &UserId, session: &DyadSession) -> Result<StudyGroup> {
    let partner = session.partner_of(participant)?;
    if session.shown_items.len() > LIST_SIZE {
        return Ok(StudyGroup::BothShown);
    }
    let covered_by = |recs: &BTreeSet<ItemId>| session.shown_items.iter().all(|i| recs.contains(i));
    if covered_by(session.own_recs_of(participant)) {
        Ok(StudyGroup::OwnShown)
    } else if covered_by(session.own_recs_of(partner)) {
        Ok(StudyGroup::OtherShown)
    } else {
        Err(Error::InconsistentSession {
            user_a: session.user_a.to_string(),
            user_b: session.user_b.to_string(),
            reason: "10-item session mixes provenance".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn u(s: &str) -> UserId {
        UserId::new(s).unwrap()
    }
    fn items(prefix: &str, n: usize) -> Vec<ItemId> {
        (0..n).map(|k| ItemId::new(format!("{prefix}{k}")).unwrap()).collect()
    }

    #[test]
    fn fourteen_items_is_both_shown() {
        let a = items("a", 10);
        let b: Vec<ItemId> = items("a", 6).into_iter().chain(items("b", 4)).collect();
        let shown: Vec<ItemId> = items("a", 10).into_iter().chain(items("b", 4)).collect();
        let s = DyadSession::new(u("p"), u("q"), shown, a.into_iter().collect(), b.into_iter().collect()).unwrap();
        assert_eq!(s.shown_items().len(), 14);
        assert_eq!(assign_group(&u("p"), &s).unwrap(), StudyGroup::BothShown);
        assert_eq!(assign_group(&u("q"), &s).unwrap(), StudyGroup::BothShown);
    }

    #[test]
    fn own_and_other_are_dual() {
        let shown = items("m", 10);
        let s = DyadSession::new(u("p"), u("q"), shown.clone(), shown.iter().cloned().collect(), BTreeSet::new())
            .unwrap();
        assert_eq!(assign_group(&u("p"), &s).unwrap(), StudyGroup::OwnShown);
        assert_eq!(assign_group(&u("q"), &s).unwrap(), StudyGroup::OtherShown);
    }

    #[test]
    fn mixed_ten_item_session_is_an_error() {
        let shown = items("m", 10);
        let a: BTreeSet<ItemId> = shown[..5].iter().cloned().collect();
        let b: BTreeSet<ItemId> = shown[5..].iter().cloned().collect();
        let s = DyadSession::new(u("p"), u("q"), shown, a, b).unwrap();
        assert!(matches!(
            assign_group(&u("p"), &s),
            Err(Error::InconsistentSession { .. })
        ));
    }

    #[test]
    fn outsider_is_a_contract_error() {
        let shown = items("m", 10);
        let s = DyadSession::new(u("p"), u("q"), shown.clone(), shown.into_iter().collect(), BTreeSet::new())
            .unwrap();
        assert!(matches!(assign_group(&u("z"), &s), Err(Error::Contract(_))));
    }

    #[test]
    fn session_shape_is_validated() {
        let nine = items("m", 9);
        assert!(DyadSession::new(u("p"), u("q"), nine.clone(), nine.into_iter().collect(), BTreeSet::new()).is_err());
        let shown = items("m", 10);
        let partial: BTreeSet<ItemId> = shown[..9].iter().cloned().collect();
        assert!(DyadSession::new(u("p"), u("q"), shown, partial, BTreeSet::new()).is_err());
    }
}
