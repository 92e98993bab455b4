use std::io::Write;
use std::thread;

use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::features::{apply_promiscuity, BalancedDataset, Feature, TrainingInstance};
use crate::rng;

use super::metrics::{metrics, EvalEntry, MetricMeans};
use super::tree::{train_rows, TreeParams};

pub const DEFAULT_FOLDS: usize = 10;

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// `folds[d][k]`: dataset `d`, held-out fold `k`.
    pub folds: Vec<Vec<EvalEntry>>,
    pub dataset_means: Vec<MetricMeans>,
    pub grand_mean: MetricMeans,
}

/// Stratified fold ids for one dataset. Positives and negatives are dealt
/// round-robin from a shuffled order, continuing the rotation across labels.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.shuffle(&mut rng::substream(seed, "cv-shuffle", &[]));
    let mut assignment = vec![0; labels.len()];
    let mut k = 0;
    for want in [true, false] {
        for &i in order.iter().filter(|&&i| labels[i] == want) {
            assignment[i] = k % folds;
            k += 1;
        }
    }
    assignment
}

pub fn cross_validate(
    datasets: &[BalancedDataset],
    params: &TreeParams,
    folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    cross_validate_jobs(datasets, params, folds, seed, 1)
}

/// As [`cross_validate`], spreading datasets over `jobs` threads. Results are
/// identical for every `jobs`.
pub fn cross_validate_jobs(
    datasets: &[BalancedDataset],
    params: &TreeParams,
    folds: usize,
    seed: u64,
    jobs: usize,
) -> Result<EvalReport> {
    params.validate()?;
    if folds < 2 {
        return Err(Error::contract(format!("cross-validation needs at least 2 folds, got {folds}")));
    }
    if datasets.is_empty() {
        return Err(Error::contract("no datasets to evaluate"));
    }
    if let Some(small) = datasets.iter().find(|d| d.len() < folds) {
        return Err(Error::contract(format!(
            "dataset of {} instances is smaller than {folds} folds",
            small.len()
        )));
    }
    let run = |d: usize| evaluate_dataset(&datasets[d], params, folds, rng::derive_seed(seed, "cv", &[d as u64]));
    let per_dataset: Vec<Result<Vec<EvalEntry>>> = if jobs <= 1 {
        (0..datasets.len()).map(run).collect()
    } else {
        let chunk = datasets.len().div_ceil(jobs);
        thread::scope(|s| {
            let handles: Vec<_> = (0..datasets.len())
                .collect::<Vec<_>>()
                .chunks(chunk)
                .map(|ids| {
                    let ids = ids.to_vec();
                    let run = &run;
                    s.spawn(move || ids.into_iter().map(run).collect::<Vec<_>>())
                })
                .collect();
            handles.into_iter().flat_map(|h| h.join().expect("cv worker panicked")).collect()
        })
    };
    let folds_out = per_dataset.into_iter().collect::<Result<Vec<_>>>()?;
    let dataset_means: Vec<MetricMeans> = folds_out
        .iter()
        .map(|fs| MetricMeans::mean_of(fs.iter().map(MetricMeans::from)))
        .collect();
    let grand_mean = MetricMeans::mean_of(dataset_means.iter().copied());
    Ok(EvalReport { folds: folds_out, dataset_means, grand_mean })
}

fn evaluate_dataset(data: &BalancedDataset, params: &TreeParams, folds: usize, seed: u64) -> Result<Vec<EvalEntry>> {
    let labels: Vec<bool> = data.instances.iter().map(|x| x.label).collect();
    let assignment = stratified_folds(&labels, folds, seed);
    (0..folds)
        .map(|k| {
            let train: Vec<&TrainingInstance> = data
                .instances
                .iter()
                .zip(&assignment)
                .filter(|(_, &f)| f != k)
                .map(|(x, _)| x)
                .collect();
            // Promiscuity is recounted from this fold's training portion.
            let mut local = data.instances.clone();
            apply_promiscuity(&mut local, &train);
            let (train_rows_, train_labels): (Vec<[f64; 6]>, Vec<bool>) = local
                .iter()
                .zip(&assignment)
                .filter(|(_, &f)| f != k)
                .map(|(x, _)| (x.features.as_array(), x.label))
                .unzip();
            let tree = train_rows(&train_rows_, &train_labels, params)?;
            let (pred, truth): (Vec<bool>, Vec<bool>) = local
                .iter()
                .zip(&assignment)
                .filter(|(_, &f)| f == k)
                .map(|(x, _)| (tree.predict(&x.features), x.label))
                .unzip();
            metrics(&pred, &truth)
        })
        .collect()
}

/// A named feature subset, as in the rows of a share-prediction table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FeatureGroup {
    pub name: String,
    pub features: Vec<Feature>,
}

impl FeatureGroup {
    pub fn new(name: impl Into<String>, features: &[Feature]) -> Self {
        Self { name: name.into(), features: features.to_vec() }
    }

    /// The four headline groups: item, recipient, sender, sender+recipient.
    pub fn headline() -> Vec<FeatureGroup> {
        use Feature::*;
        vec![
            FeatureGroup::new("item", &[ExtRating, ExtPopularity]),
            FeatureGroup::new("recipient", &[RecipientItemSim, SenderRecipientSim]),
            FeatureGroup::new("sender", &[SenderItemSim, SenderPromiscuity]),
            FeatureGroup::new(
                "sender+recipient",
                &[SenderItemSim, RecipientItemSim, SenderRecipientSim, SenderPromiscuity],
            ),
        ]
    }

    /// Every row: single features, their pairs, and the combined group.
    pub fn detailed() -> Vec<FeatureGroup> {
        use Feature::*;
        vec![
            FeatureGroup::new("item:ext_rating", &[ExtRating]),
            FeatureGroup::new("item:ext_popularity", &[ExtPopularity]),
            FeatureGroup::new("item", &[ExtRating, ExtPopularity]),
            FeatureGroup::new("recipient:recipient_item_sim", &[RecipientItemSim]),
            FeatureGroup::new("recipient:sender_recipient_sim", &[SenderRecipientSim]),
            FeatureGroup::new("recipient", &[RecipientItemSim, SenderRecipientSim]),
            FeatureGroup::new("sender:sender_item_sim", &[SenderItemSim]),
            FeatureGroup::new("sender:sender_promiscuity", &[SenderPromiscuity]),
            FeatureGroup::new("sender", &[SenderItemSim, SenderPromiscuity]),
            FeatureGroup::new(
                "sender+recipient",
                &[SenderItemSim, RecipientItemSim, SenderRecipientSim, SenderPromiscuity],
            ),
        ]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AblationRow {
    pub group: String,
    pub report: EvalReport,
}

/// Cross-validates each feature group with otherwise identical settings.
pub fn ablation(
    groups: &[FeatureGroup],
    datasets: &[BalancedDataset],
    params: &TreeParams,
    folds: usize,
    seed: u64,
    jobs: usize,
) -> Result<Vec<AblationRow>> {
    groups
        .iter()
        .map(|g| {
            if g.features.is_empty() {
                return Err(Error::contract(format!("feature group {:?} is empty", g.name)));
            }
            let p = TreeParams { features: g.features.clone(), ..params.clone() };
            Ok(AblationRow { group: g.name.clone(), report: cross_validate_jobs(datasets, &p, folds, seed, jobs)? })
        })
        .collect()
}

/// `group,precision,recall,accuracy` with grand means.
pub fn write_report_csv<W: Write>(rows: &[AblationRow], writer: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["group", "precision", "recall", "accuracy"])?;
    for r in rows {
        let m = r.report.grand_mean;
        w.write_record([
            r.group.clone(),
            format!("{:.6}", m.precision),
            format!("{:.6}", m.recall),
            format!("{:.6}", m.accuracy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureVector;
    use crate::model::{ItemId, ShareRecord, UserId};
    use crate::similarity::SimilarityScore;

    fn instance(k: usize, x: f64, label: bool) -> TrainingInstance {
        let record = ShareRecord::new(
            UserId::new(format!("s{}", k % 13)).unwrap(),
            UserId::new("r").unwrap(),
            ItemId::new(format!("i{k}")).unwrap(),
            label,
        )
        .unwrap();
        let features = FeatureVector {
            sender_item_sim: SimilarityScore::new(x).unwrap(),
            recipient_item_sim: SimilarityScore::ZERO,
            sender_recipient_sim: SimilarityScore::ZERO,
            sender_promiscuity: 0,
            item_ext_rating: 5.0,
            item_ext_popularity: 10.0,
        };
        TrainingInstance { record, features, label }
    }

    fn separable(n: usize) -> BalancedDataset {
        let instances = (0..n)
            .map(|k| {
                let label = k % 2 == 0;
                instance(k, if label { 0.6 + 0.3 * (k as f64 / n as f64) } else { 0.1 + 0.3 * (k as f64 / n as f64) }, label)
            })
            .collect();
        BalancedDataset { instances, seed: 0 }
    }

    #[test]
    fn stratified_folds_balance_positives() {
        let labels: Vec<bool> = (0..97).map(|k| k % 3 == 0).collect();
        let a = stratified_folds(&labels, 10, 5);
        let pos = labels.iter().filter(|l| **l).count();
        let mean = pos as f64 / 10.0;
        for k in 0..10 {
            let c = (0..labels.len()).filter(|&i| a[i] == k && labels[i]).count();
            assert!((c as f64 - mean).abs() <= 1.0, "fold {k}: {c} vs {mean}");
        }
        assert_eq!(a, stratified_folds(&labels, 10, 5));
    }

    #[test]
    fn separable_data_is_learned_perfectly() {
        let ds = vec![separable(100), separable(60)];
        let params = TreeParams::with_features(&[Feature::SenderItemSim]);
        let rep = cross_validate(&ds, &params, 10, 3).unwrap();
        assert_eq!(rep.grand_mean.accuracy, 1.0);
        assert!(rep.folds.iter().flatten().all(|e| e.accuracy == 1.0));
        assert_eq!(rep, cross_validate(&ds, &params, 10, 3).unwrap());
    }

    #[test]
    fn grand_mean_is_mean_of_dataset_means() {
        let ds = vec![separable(40), separable(50), separable(30)];
        let rep = cross_validate(&ds, &TreeParams::default(), 5, 9).unwrap();
        let m = MetricMeans::mean_of(rep.dataset_means.iter().copied());
        assert_eq!(m, rep.grand_mean);
        for e in rep.folds.iter().flatten() {
            for v in [e.precision, e.recall, e.accuracy] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn parallel_matches_sequential() {
        let ds: Vec<BalancedDataset> = (0..5).map(|k| separable(40 + 4 * k)).collect();
        let a = cross_validate_jobs(&ds, &TreeParams::default(), 4, 1, 1).unwrap();
        let b = cross_validate_jobs(&ds, &TreeParams::default(), 4, 1, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn contract_errors() {
        let ds = vec![separable(8)];
        assert!(cross_validate(&ds, &TreeParams::default(), 1, 0).is_err());
        assert!(cross_validate(&ds, &TreeParams::default(), 10, 0).is_err());
        let empty = [FeatureGroup::new("none", &[])];
        assert!(ablation(&empty, &[separable(40)], &TreeParams::default(), 5, 0, 1).is_err());
    }

    #[test]
    fn headline_groups_match_table_layout() {
        let g = FeatureGroup::headline();
        let names: Vec<&str> = g.iter().map(|x| x.name.as_str()).collect();
        assert_eq!(names, ["item", "recipient", "sender", "sender+recipient"]);
        let combined = &g[3].features;
        assert_eq!(combined.len(), 4);
        assert!(!combined.contains(&Feature::ExtRating) && !combined.contains(&Feature::ExtPopularity));
        let mut csv = Vec::new();
        let rows = ablation(&g, &[separable(40)], &TreeParams::default(), 4, 0, 1).unwrap();
        write_report_csv(&rows, &mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert_eq!(text.lines().count(), 5);
        assert!(text.starts_with("group,precision,recall,accuracy\n"));
    }
}
