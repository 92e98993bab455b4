use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Precision, recall and accuracy for one evaluation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalEntry {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
    pub confusion: Confusion,
    /// False when nothing was predicted positive; precision is then reported
    /// as 0.
    pub precision_defined: bool,
    /// False when the truth has no positives; recall is then reported as 0.
    pub recall_defined: bool,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MetricMeans {
    pub precision: f64,
    pub recall: f64,
    pub accuracy: f64,
}

impl MetricMeans {
    pub fn mean_of(entries: impl IntoIterator<Item = MetricMeans>) -> MetricMeans {
        let mut n = 0usize;
        let mut acc = MetricMeans::default();
        for e in entries {
            acc.precision += e.precision;
            acc.recall += e.recall;
            acc.accuracy += e.accuracy;
            n += 1;
        }
        if n > 0 {
            let n = n as f64;
            acc.precision /= n;
            acc.recall /= n;
            acc.accuracy /= n;
        }
        acc
    }
}

impl From<&EvalEntry> for MetricMeans {
    fn from(e: &EvalEntry) -> Self {
        MetricMeans { precision: e.precision, recall: e.recall, accuracy: e.accuracy }
    }
}

pub fn metrics(predictions: &[bool], truth: &[bool]) -> Result<EvalEntry> {
    if predictions.len() != truth.len() {
        return Err(Error::contract(format!(
            "{} predictions for {} labels",
            predictions.len(),
            truth.len()
        )));
    }
    if truth.is_empty() {
        return Err(Error::contract("metrics need at least one labelled example"));
    }
    let mut c = Confusion::default();
    for (&p, &t) in predictions.iter().zip(truth) {
        match (p, t) {
            (true, true) => c.tp += 1,
            (true, false) => c.fp += 1,
            (false, false) => c.tn += 1,
            (false, true) => c.fn_ += 1,
        }
    }
    let ratio = |num: usize, den: usize| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    Ok(EvalEntry {
        precision: ratio(c.tp, c.tp + c.fp),
        recall: ratio(c.tp, c.tp + c.fn_),
        accuracy: ratio(c.tp + c.tn, c.total()),
        confusion: c,
        precision_defined: c.tp + c.fp > 0,
        recall_defined: c.tp + c.fn_ > 0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn all_positive_predictor_on_balanced_data() {
        let truth = [true, true, false, false];
        let e = metrics(&[true; 4], &truth).unwrap();
        assert_eq!((e.precision, e.recall, e.accuracy), (0.5, 1.0, 0.5));
    }

    #[test]
    fn perfect_predictor() {
        let truth = [true, false, true, false, false];
        let e = metrics(&truth, &truth).unwrap();
        assert_eq!((e.precision, e.recall, e.accuracy), (1.0, 1.0, 1.0));
    }

    #[test]
    fn confusion_matrix_oracle() {
        // TP=2, FP=1, FN=1, TN=2
        let pred = [true, true, true, false, false, false];
        let truth = [true, true, false, true, false, false];
        let e = metrics(&pred, &truth).unwrap();
        assert_eq!(e.confusion, Confusion { tp: 2, fp: 1, tn: 2, fn_: 1 });
        assert_relative_eq!(e.precision, 2.0 / 3.0);
        assert_relative_eq!(e.recall, 2.0 / 3.0);
        assert_relative_eq!(e.accuracy, 4.0 / 6.0);
    }

    #[test]
    fn no_positive_predictions_flags_precision() {
        let e = metrics(&[false, false], &[true, false]).unwrap();
        assert_eq!(e.precision, 0.0);
        assert!(!e.precision_defined);
    }

    #[test]
    fn contract_errors() {
        assert!(metrics(&[true], &[true, false]).is_err());
        assert!(metrics(&[], &[]).is_err());
    }
}
