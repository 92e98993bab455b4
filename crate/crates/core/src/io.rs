//! CSV ingestion and emission for every on-disk format, plus atomic writes.
//!
//! All files carry a header row. Floats are written in shortest round-trip
//! form so re-reading an output reproduces it exactly.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::diffusion::{SeedAssignments, SocialGraph};
use crate::error::{Error, Result};
use crate::features::{FeatureVector, TrainingInstance};
use crate::model::{DyadSession, ItemId, ItemMeta, LikesMatrix, Provenance, Rating, RatingsTable, ShareRecord, UserId};
use crate::similarity::SimilarityScore;
use crate::stats::LmmRow;
use crate::synthgen::SyntheticStudy;

pub const LIKES_FILE: &str = "likes.csv";
pub const RATINGS_FILE: &str = "ratings.csv";
pub const SHARES_FILE: &str = "shares.csv";
pub const ITEMS_FILE: &str = "items.csv";
pub const SESSIONS_FILE: &str = "sessions.csv";
pub const GRAPH_FILE: &str = "graph.csv";
/// Ground truth lives one directory down so pipeline inputs never pick it up.
pub const TRUTH_DIR: &str = "truth";
pub const TRUTH_FILE: &str = "groundtruth.csv";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io { path: path.to_path_buf(), source }
}

fn csv_err(path: &Path) -> impl FnOnce(csv::Error) -> Error + '_ {
    move |source| Error::Csv { path: path.to_path_buf(), source }
}

/// Writes through a temporary file in the destination directory, then
/// renames it over `path`, so readers never see a partial file.
pub fn write_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> Result<()>,
{
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    let tmp = tempfile::NamedTempFile::new_in(&dir).map_err(io_err(&dir))?;
    {
        let mut w = BufWriter::new(tmp.as_file());
        fill(&mut w)?;
        w.flush().map_err(io_err(path))?;
    }
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| Error::Io { path: path.to_path_buf(), source: e.error })?;
    Ok(())
}

/// `write_atomic` for CSV writers; maps csv errors onto the target path.
pub fn write_csv_atomic<F>(path: &Path, fill: F) -> Result<()>
where
    F: FnOnce(&mut dyn Write) -> csv::Result<()>,
{
    write_atomic(path, |w| fill(w).map_err(csv_err(path)))
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(io_err(path))
}

/// Deserializes every row, tagging failures with file and line.
fn read_rows<T, R>(path: &Path, reader: R) -> Result<Vec<(usize, T)>>
where
    T: for<'de> Deserialize<'de>,
    R: Read,
{
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut out = Vec::new();
    for (n, row) in r.deserialize::<T>().enumerate() {
        out.push((n + 2, row.map_err(csv_err(path))?));
    }
    Ok(out)
}

fn at(path: &Path, line: usize, e: Error) -> Error {
    match e {
        Error::Validation(msg) => Error::Validation(format!("{}:{line}: {msg}", path.display())),
        other => other,
    }
}

fn flag(path: &Path, line: usize, v: u8) -> Result<bool> {
    match v {
        0 => Ok(false),
        1 => Ok(true),
        other => Err(Error::Validation(format!("{}:{line}: expected 0 or 1, got {other}", path.display()))),
    }
}

#[derive(Deserialize)]
struct UserItemRow {
    user_id: UserId,
    item_id: ItemId,
}

pub fn read_likes(path: &Path) -> Result<LikesMatrix> {
    read_likes_from(path, open(path)?)
}

pub fn read_likes_from<R: Read>(path: &Path, reader: R) -> Result<LikesMatrix> {
    Ok(LikesMatrix::from_pairs(read_rows::<UserItemRow, _>(path, reader)?.into_iter().map(|(_, r)| (r.user_id, r.item_id))))
}

pub fn write_likes<W: Write>(likes: &LikesMatrix, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "item_id"])?;
    for (u, i) in likes.pairs() {
        w.write_record([u.as_str(), i.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct RatingRow {
    user_id: UserId,
    item_id: ItemId,
    rating: f64,
}

pub fn read_ratings(path: &Path) -> Result<RatingsTable> {
    read_ratings_from(path, open(path)?)
}

pub fn read_ratings_from<R: Read>(path: &Path, reader: R) -> Result<RatingsTable> {
    let mut table = RatingsTable::new();
    for (line, r) in read_rows::<RatingRow, _>(path, reader)? {
        let rating = Rating::from_f64(r.rating).map_err(|e| at(path, line, e))?;
        table.insert(r.user_id, r.item_id, rating).map_err(|e| at(path, line, e))?;
    }
    Ok(table)
}

pub fn write_ratings<W: Write>(ratings: &RatingsTable, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "item_id", "rating"])?;
    for (u, i, r) in ratings.iter() {
        w.write_record([u.as_str(), i.as_str(), &r.value().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ShareRow {
    sender_id: UserId,
    recipient_id: UserId,
    item_id: ItemId,
    shared: u8,
}

pub fn read_shares(path: &Path) -> Result<Vec<ShareRecord>> {
    read_shares_from(path, open(path)?)
}

pub fn read_shares_from<R: Read>(path: &Path, reader: R) -> Result<Vec<ShareRecord>> {
    read_rows::<ShareRow, _>(path, reader)?
        .into_iter()
        .map(|(line, r)| {
            ShareRecord::new(r.sender_id, r.recipient_id, r.item_id, flag(path, line, r.shared)?)
                .map_err(|e| at(path, line, e))
        })
        .collect()
}

pub fn write_shares<W: Write>(shares: &[ShareRecord], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["sender_id", "recipient_id", "item_id", "shared"])?;
    for r in shares {
        w.write_record([r.sender.as_str(), r.recipient.as_str(), r.item.as_str(), if r.shared { "1" } else { "0" }])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct ItemRow {
    item_id: ItemId,
    ext_rating: f64,
    ext_popularity: f64,
}

pub fn read_items(path: &Path) -> Result<BTreeMap<ItemId, ItemMeta>> {
    read_items_from(path, open(path)?)
}

pub fn read_items_from<R: Read>(path: &Path, reader: R) -> Result<BTreeMap<ItemId, ItemMeta>> {
    let mut out = BTreeMap::new();
    for (line, r) in read_rows::<ItemRow, _>(path, reader)? {
        let meta = ItemMeta::new(r.item_id.clone(), r.ext_rating, r.ext_popularity).map_err(|e| at(path, line, e))?;
        if out.insert(r.item_id.clone(), meta).is_some() {
            return Err(at(path, line, Error::validation(format!("duplicate item {}", r.item_id))));
        }
    }
    Ok(out)
}

pub fn write_items<'a, W: Write>(items: impl IntoIterator<Item = &'a ItemMeta>, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["item_id", "ext_rating", "ext_popularity"])?;
    for m in items {
        w.write_record([m.item.as_str(), &m.ext_rating.to_string(), &m.ext_popularity.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct SessionRow {
    user_a: UserId,
    user_b: UserId,
    item_id: ItemId,
    provenance: String,
}

/// Rows are grouped by `(user_a, user_b)`; sessions come back in order of first
/// appearance and items in row order.
pub fn read_sessions(path: &Path) -> Result<Vec<DyadSession>> {
    read_sessions_from(path, open(path)?)
}

pub fn read_sessions_from<R: Read>(path: &Path, reader: R) -> Result<Vec<DyadSession>> {
    type Pending = (Vec<ItemId>, BTreeSet<ItemId>, BTreeSet<ItemId>);
    let mut order: Vec<(UserId, UserId)> = Vec::new();
    let mut groups: BTreeMap<(UserId, UserId), Pending> = BTreeMap::new();
    for (line, r) in read_rows::<SessionRow, _>(path, reader)? {
        let prov = Provenance::parse(&r.provenance).map_err(|e| at(path, line, e))?;
        let key = (r.user_a, r.user_b);
        let entry = groups.entry(key.clone()).or_insert_with(|| {
            order.push(key);
            Default::default()
        });
        entry.0.push(r.item_id.clone());
        if matches!(prov, Provenance::OwnA | Provenance::Both) {
            entry.1.insert(r.item_id.clone());
        }
        if matches!(prov, Provenance::OwnB | Provenance::Both) {
            entry.2.insert(r.item_id);
        }
    }
    order
        .into_iter()
        .map(|key| {
            let (shown, a, b) = groups.remove(&key).expect("grouped above");
            DyadSession::new(key.0, key.1, shown, a, b)
        })
        .collect()
}

pub fn write_sessions<W: Write>(sessions: &[DyadSession], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_a", "user_b", "item_id", "provenance"])?;
    for s in sessions {
        for i in s.shown_items() {
            let prov = s.provenance(i).expect("shown items have provenance");
            w.write_record([s.user_a().as_str(), s.user_b().as_str(), i.as_str(), prov.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct EdgeRow {
    src: UserId,
    dst: UserId,
}

pub fn read_graph(path: &Path) -> Result<SocialGraph> {
    read_graph_from(path, open(path)?)
}

pub fn read_graph_from<R: Read>(path: &Path, reader: R) -> Result<SocialGraph> {
    let mut g = SocialGraph::new();
    for (line, r) in read_rows::<EdgeRow, _>(path, reader)? {
        g.add_edge(r.src, r.dst).map_err(|e| at(path, line, e))?;
    }
    Ok(g)
}

pub fn write_graph<W: Write>(graph: &SocialGraph, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["src", "dst"])?;
    for (a, b) in graph.edges() {
        w.write_record([a.as_str(), b.as_str()])?;
    }
    w.flush()?;
    Ok(())
}

/// Friend lists as a directed graph, one edge per (user, friend).
pub fn friends_to_graph(friends: &BTreeMap<UserId, BTreeSet<UserId>>) -> Result<SocialGraph> {
    SocialGraph::from_edges(friends.iter().flat_map(|(u, fs)| fs.iter().map(move |f| (u.clone(), f.clone()))))
}

/// Out-neighbors of every node with at least one edge.
pub fn graph_to_friends(graph: &SocialGraph) -> BTreeMap<UserId, BTreeSet<UserId>> {
    let mut out: BTreeMap<UserId, BTreeSet<UserId>> = BTreeMap::new();
    for (a, b) in graph.edges() {
        out.entry(a.clone()).or_default().insert(b.clone());
    }
    out
}

pub fn read_seeds(path: &Path) -> Result<SeedAssignments> {
    read_seeds_from(path, open(path)?)
}

pub fn read_seeds_from<R: Read>(path: &Path, reader: R) -> Result<SeedAssignments> {
    let mut seeds = SeedAssignments::new();
    for (_, r) in read_rows::<UserItemRow, _>(path, reader)? {
        seeds.entry(r.user_id).or_default().insert(r.item_id);
    }
    Ok(seeds)
}

pub fn write_seeds<W: Write>(seeds: &SeedAssignments, writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["user_id", "item_id"])?;
    for (u, items) in seeds {
        for i in items {
            w.write_record([u.as_str(), i.as_str()])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct FeatureRow {
    sender: UserId,
    recipient: UserId,
    item: ItemId,
    sender_item_sim: f64,
    recipient_item_sim: f64,
    sender_recipient_sim: f64,
    sender_promiscuity: u32,
    ext_rating: f64,
    ext_popularity: f64,
    label: u8,
}

pub const FEATURE_HEADER: [&str; 10] = [
    "sender",
    "recipient",
    "item",
    "sender_item_sim",
    "recipient_item_sim",
    "sender_recipient_sim",
    "sender_promiscuity",
    "ext_rating",
    "ext_popularity",
    "label",
];

pub fn read_features(path: &Path) -> Result<Vec<TrainingInstance>> {
    read_features_from(path, open(path)?)
}

pub fn read_features_from<R: Read>(path: &Path, reader: R) -> Result<Vec<TrainingInstance>> {
    read_rows::<FeatureRow, _>(path, reader)?
        .into_iter()
        .map(|(line, r)| {
            let label = flag(path, line, r.label)?;
            let fail = |e| at(path, line, e);
            let features = FeatureVector {
                sender_item_sim: SimilarityScore::new(r.sender_item_sim).map_err(fail)?,
                recipient_item_sim: SimilarityScore::new(r.recipient_item_sim).map_err(fail)?,
                sender_recipient_sim: SimilarityScore::new(r.sender_recipient_sim).map_err(fail)?,
                sender_promiscuity: r.sender_promiscuity,
                item_ext_rating: r.ext_rating,
                item_ext_popularity: r.ext_popularity,
            };
            ItemMeta::new(r.item.clone(), r.ext_rating, r.ext_popularity).map_err(fail)?;
            let record = ShareRecord::new(r.sender, r.recipient, r.item, label).map_err(fail)?;
            Ok(TrainingInstance { record, features, label })
        })
        .collect()
}

pub fn write_features<W: Write>(instances: &[TrainingInstance], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(FEATURE_HEADER)?;
    for t in instances {
        let f = &t.features;
        w.write_record([
            t.record.sender.as_str(),
            t.record.recipient.as_str(),
            t.record.item.as_str(),
            &f.sender_item_sim.value().to_string(),
            &f.recipient_item_sim.value().to_string(),
            &f.sender_recipient_sim.value().to_string(),
            &f.sender_promiscuity.to_string(),
            &f.item_ext_rating.to_string(),
            &f.item_ext_popularity.to_string(),
            if t.label { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Deserialize)]
struct LmmCsvRow {
    rating: f64,
    participant_id: UserId,
    item_id: ItemId,
    condition: u8,
}

/// Ratings-long table `rating,participant_id,item_id,condition`.
pub fn read_lmm_rows(path: &Path) -> Result<Vec<LmmRow>> {
    read_lmm_rows_from(path, open(path)?)
}

pub fn read_lmm_rows_from<R: Read>(path: &Path, reader: R) -> Result<Vec<LmmRow>> {
    read_rows::<LmmCsvRow, _>(path, reader)?
        .into_iter()
        .map(|(line, r)| {
            if !r.rating.is_finite() {
                return Err(at(path, line, Error::validation("rating is not finite")));
            }
            Ok(LmmRow {
                rating: r.rating,
                participant: r.participant_id,
                item: r.item_id,
                condition: flag(path, line, r.condition)?,
            })
        })
        .collect()
}

pub fn write_lmm_rows<W: Write>(rows: &[LmmRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["rating", "participant_id", "item_id", "condition"])?;
    for r in rows {
        w.write_record([
            r.rating.to_string().as_str(),
            r.participant.as_str(),
            r.item.as_str(),
            if r.condition { "1" } else { "0" },
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_kv(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::validation(format!("line {}: expected key=value, got {line:?}", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn read_to_string(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

/// Observable study inputs, as read back from a directory.
#[derive(Clone, Debug, PartialEq)]
pub struct StudyFiles {
    pub likes: LikesMatrix,
    pub ratings: RatingsTable,
    pub shares: Vec<ShareRecord>,
    pub items: BTreeMap<ItemId, ItemMeta>,
    pub sessions: Vec<DyadSession>,
}

pub fn read_study_dir(dir: &Path) -> Result<StudyFiles> {
    Ok(StudyFiles {
        likes: read_likes(&dir.join(LIKES_FILE))?,
        ratings: read_ratings(&dir.join(RATINGS_FILE))?,
        shares: read_shares(&dir.join(SHARES_FILE))?,
        items: read_items(&dir.join(ITEMS_FILE))?,
        sessions: read_sessions(&dir.join(SESSIONS_FILE))?,
    })
}

/// Writes the observable files into `dir` and ground truth into `dir/truth/`.
pub fn write_study_dir(study: &SyntheticStudy, dir: &Path) -> Result<()> {
    write_csv_atomic(&dir.join(LIKES_FILE), |w| write_likes(&study.likes, w))?;
    write_csv_atomic(&dir.join(RATINGS_FILE), |w| write_ratings(&study.ratings, w))?;
    write_csv_atomic(&dir.join(SHARES_FILE), |w| write_shares(&study.shares, w))?;
    write_csv_atomic(&dir.join(ITEMS_FILE), |w| write_items(study.items.values(), w))?;
    write_csv_atomic(&dir.join(SESSIONS_FILE), |w| write_sessions(&study.sessions, w))?;
    let graph = friends_to_graph(&study.friends)?;
    write_csv_atomic(&dir.join(GRAPH_FILE), |w| write_graph(&graph, w))?;
    write_csv_atomic(&dir.join(TRUTH_DIR).join(TRUTH_FILE), |w| study.truth.write_csv(w))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthgen::{generate_study, StudyProfile};

    fn p() -> &'static Path {
        Path::new("mem.csv")
    }

    #[test]
    fn ratings_are_grid_checked_with_line_numbers() {
        let text = "user_id,item_id,rating\nu,a,4.0\nu,b,3.3\n";
        let err = read_ratings_from(p(), text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("mem.csv:3"), "{err}");
        let ok = read_ratings_from(p(), "user_id,item_id,rating\nu,a,4\nu,b,0.5\n".as_bytes()).unwrap();
        assert_eq!(ok.len(), 2);
        let dup = "user_id,item_id,rating\nu,a,4\nu,a,3\n";
        assert!(read_ratings_from(p(), dup.as_bytes()).is_err());
    }

    #[test]
    fn shares_flag_must_be_binary() {
        assert!(read_shares_from(p(), "sender_id,recipient_id,item_id,shared\na,b,x,2\n".as_bytes()).is_err());
        assert!(read_shares_from(p(), "sender_id,recipient_id,item_id,shared\na,a,x,1\n".as_bytes()).is_err());
        let ok = read_shares_from(p(), "sender_id,recipient_id,item_id,shared\na,b,x,1\n".as_bytes()).unwrap();
        assert!(ok[0].shared);
    }

    #[test]
    fn missing_columns_are_errors() {
        assert!(matches!(read_likes_from(p(), "user,item\na,b\n".as_bytes()), Err(Error::Csv { .. })));
        assert!(read_graph_from(p(), "src,dst\na,a\n".as_bytes()).is_err());
        assert!(parse_kv("a=1\nnonsense\n").is_err());
        assert_eq!(parse_kv("# c\n a = 1 \n\nb=x # t\n").unwrap(), vec![("a".into(), "1".into()), ("b".into(), "x".into())]);
    }

    #[test]
    fn sessions_group_by_pair_and_keep_order() {
        let mut text = String::from("user_a,user_b,item_id,provenance\n");
        for k in (0..10).rev() {
            text.push_str(&format!("p,q,m{k},own_a\n"));
        }
        for k in 0..12 {
            let prov = if k < 4 { "both" } else if k < 8 { "own_a" } else { "own_b" };
            text.push_str(&format!("r,s,n{k},{prov}\n"));
        }
        let sessions = read_sessions_from(p(), text.as_bytes()).unwrap();
        assert_eq!(sessions.len(), 2);
        assert_eq!(sessions[0].shown_items()[0].as_str(), "m9");
        assert_eq!(sessions[1].own_recs_a().len(), 8);
        assert_eq!(sessions[1].own_recs_b().len(), 8);
        let mut buf = Vec::new();
        write_sessions(&sessions, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), text);
    }

    #[test]
    fn study_round_trips_through_csv() {
        let profile = StudyProfile { n_pairs: 8, n_background: 120, n_items: 80, ..Default::default() };
        let study = generate_study(&profile, 4).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_study_dir(&study, dir.path()).unwrap();
        let back = read_study_dir(dir.path()).unwrap();
        assert_eq!(back.likes, study.likes);
        assert_eq!(back.ratings, study.ratings);
        assert_eq!(back.shares, study.shares);
        assert_eq!(back.items, study.items);
        assert_eq!(back.sessions, study.sessions);
        let g = read_graph(&dir.path().join(GRAPH_FILE)).unwrap();
        assert_eq!(graph_to_friends(&g), study.friends);
        assert!(!dir.path().join(TRUTH_FILE).exists());
        let truth = crate::synthgen::GroundTruth::read_csv(open(&dir.path().join(TRUTH_DIR).join(TRUTH_FILE)).unwrap()).unwrap();
        assert_eq!(truth, study.truth);
    }

    #[test]
    fn features_and_lmm_rows_round_trip() {
        let rows = crate::synthgen::planted_effect_ratings(4, 3, 0.4, 0.3, 0.3, 1.0, 2).unwrap();
        let mut buf = Vec::new();
        write_lmm_rows(&rows, &mut buf).unwrap();
        assert_eq!(read_lmm_rows_from(p(), buf.as_slice()).unwrap(), rows);

        let text = "sender,recipient,item,sender_item_sim,recipient_item_sim,sender_recipient_sim,sender_promiscuity,ext_rating,ext_popularity,label\n\
                    a,b,x,0.1,0.2,0.30000000000000004,3,7.5,1200,1\n";
        let inst = read_features_from(p(), text.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_features(&inst, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), text);
        let bad = text.replace("0.1,", "1.1,");
        assert!(read_features_from(p(), bad.as_bytes()).is_err());
    }

    #[test]
    fn atomic_write_replaces_whole_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub").join("out.txt");
        write_atomic(&path, |w| w.write_all(b"first").map_err(io_err(Path::new("x")))).unwrap();
        write_atomic(&path, |w| w.write_all(b"second").map_err(io_err(Path::new("x")))).unwrap();
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        let failed = write_atomic(&path, |w| {
            w.write_all(b"partial").map_err(io_err(Path::new("x")))?;
            Err(Error::validation("boom"))
        });
        assert!(failed.is_err());
        assert_eq!(std::fs::read_to_string(&path).unwrap(), "second");
        assert_eq!(std::fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
