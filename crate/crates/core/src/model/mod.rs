//! Study domain objects: users, items, likes, ratings, shares and dyad
//! sessions.

mod ids;
mod likes;
mod ratings;
mod session;
mod share;

pub use ids::{ItemId, UserId};
pub use likes::{merge_likes, to_unary, LikesMatrix};
pub use ratings::{Rating, RatingsTable};
pub use session::{assign_group, DyadSession, Provenance, StudyGroup, LIST_SIZE};
pub use share::{session_records, ItemMeta, ShareRecord};
