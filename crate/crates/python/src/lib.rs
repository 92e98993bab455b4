//! Python bindings for the similarity, recommendation, statistics, tree and
//! synthetic-study pieces of `sharepref`.

use std::collections::{BTreeSet, HashMap};
use std::path::Path;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use sharepref::classifier::DecisionTree;
use sharepref::diffusion::CascadeConfig;
use sharepref::model::{ItemId, LikesMatrix, UserId};
use sharepref::stats::{self, LmmRow, SampleSummary, TTestResult};
use sharepref::synthgen::{generate_study, StudyProfile};
use sharepref::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

type Summary = (usize, f64, f64);

fn summary((n, mean, sd): Summary) -> PyResult<SampleSummary> {
    SampleSummary::new(n, mean, sd).map_err(py_err)
}

fn ttest_dict(r: TTestResult) -> HashMap<&'static str, f64> {
    HashMap::from([("t", r.t), ("df", r.df), ("p", r.p), ("p_upper", r.p_upper), ("p_lower", r.p_lower)])
}

#[pyfunction]
fn jaccard(a: Vec<String>, b: Vec<String>) -> f64 {
    let a: BTreeSet<String> = a.into_iter().collect();
    let b: BTreeSet<String> = b.into_iter().collect();
    sharepref::similarity::jaccard(&a, &b).value()
}

/// Top-`n` items for `user` from their `k` most similar friends, as
/// `(item, score)` pairs.
#[pyfunction]
#[pyo3(signature = (user, friends, likes, k = 20, n = 10))]
fn recommend(
    user: &str,
    friends: Vec<String>,
    likes: Vec<(String, String)>,
    k: usize,
    n: usize,
) -> PyResult<Vec<(String, f64)>> {
    let mut matrix = LikesMatrix::new();
    for (u, i) in likes {
        matrix.insert(UserId::new(u).map_err(py_err)?, ItemId::new(i).map_err(py_err)?);
    }
    let friends = friends
        .into_iter()
        .map(UserId::new)
        .collect::<Result<BTreeSet<_>, _>>()
        .map_err(py_err)?;
    let list = sharepref::recommender::recommend(&UserId::new(user).map_err(py_err)?, &friends, &matrix, k, n)
        .map_err(py_err)?;
    Ok(list.entries.into_iter().map(|(i, s)| (i.to_string(), s)).collect())
}

#[pyfunction]
fn welch_t(a: Summary, b: Summary) -> PyResult<HashMap<&'static str, f64>> {
    Ok(ttest_dict(stats::welch_t_from_summary(&summary(a)?, &summary(b)?).map_err(py_err)?))
}

#[pyfunction]
fn pooled_t(a: Summary, b: Summary) -> PyResult<HashMap<&'static str, f64>> {
    Ok(ttest_dict(stats::pooled_t_from_summary(&summary(a)?, &summary(b)?).map_err(py_err)?))
}

#[pyfunction]
fn cohens_d(a: Summary, b: Summary) -> PyResult<f64> {
    stats::cohens_d(&summary(a)?, &summary(b)?).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (pref_sender, pref_recipient, pref_threshold = 0.2, sender_weight = 3.0, recipient_weight = 1.0, bias = -2.0))]
fn share_probability(
    pref_sender: f64,
    pref_recipient: f64,
    pref_threshold: f64,
    sender_weight: f64,
    recipient_weight: f64,
    bias: f64,
) -> PyResult<f64> {
    let cfg = CascadeConfig { pref_threshold, sender_weight, recipient_weight, bias, ..CascadeConfig::default() };
    cfg.validate().map_err(py_err)?;
    Ok(sharepref::diffusion::share_probability(pref_sender, pref_recipient, &cfg))
}

/// Fits the model with and without the condition effect and compares them.
/// Rows are `(rating, participant, item, condition)`.
#[pyfunction]
fn lmm_test(rows: Vec<(f64, String, String, bool)>) -> PyResult<HashMap<&'static str, f64>> {
    let rows = rows
        .into_iter()
        .map(|(rating, p, i, condition)| {
            Ok(LmmRow {
                rating,
                participant: UserId::new(p).map_err(py_err)?,
                item: ItemId::new(i).map_err(py_err)?,
                condition,
            })
        })
        .collect::<PyResult<Vec<_>>>()?;
    let full = stats::fit_lmm(&rows, true).map_err(py_err)?;
    let null = stats::fit_lmm(&rows, false).map_err(py_err)?;
    let lrt = stats::likelihood_ratio_test(&full, &null).map_err(py_err)?;
    Ok(HashMap::from([
        ("intercept", full.intercept()),
        ("condition", full.condition_effect().unwrap_or(0.0)),
        ("var_participant", full.var_participant),
        ("var_item", full.var_item),
        ("var_residual", full.var_residual),
        ("loglik", full.log_likelihood),
        ("null_loglik", null.log_likelihood),
        ("chi_square", lrt.chi_square),
        ("p", lrt.p),
    ]))
}

/// Writes a synthetic study directory; returns the number of shares sent.
#[pyfunction]
#[pyo3(signature = (out_dir, seed = 0, overrides = None))]
fn synth(out_dir: &str, seed: u64, overrides: Option<HashMap<String, String>>) -> PyResult<usize> {
    let mut profile = StudyProfile::default();
    let mut overrides: Vec<_> = overrides.unwrap_or_default().into_iter().collect();
    overrides.sort();
    for (k, v) in &overrides {
        profile.set(k, v).map_err(py_err)?;
    }
    let study = generate_study(&profile, seed).map_err(py_err)?;
    std::fs::create_dir_all(out_dir).map_err(|e| PyOSError::new_err(format!("{out_dir}: {e}")))?;
    sharepref::io::write_study_dir(&study, Path::new(out_dir)).map_err(py_err)?;
    Ok(study.shares_sent())
}

#[pyclass(name = "DecisionTree", frozen)]
struct PyDecisionTree {
    inner: DecisionTree,
}

#[pymethods]
impl PyDecisionTree {
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        Ok(Self { inner: DecisionTree::from_text(text).map_err(py_err)? })
    }

    fn to_text(&self) -> String {
        self.inner.to_text()
    }

    /// `row` holds sender_item_sim, recipient_item_sim, sender_recipient_sim,
    /// sender_promiscuity, ext_rating, ext_popularity.
    fn predict(&self, row: [f64; 6]) -> bool {
        self.inner.predict_row(&row)
    }

    fn depth(&self) -> usize {
        self.inner.depth()
    }
}

#[pymodule]
fn sharepref_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(jaccard, m)?)?;
    m.add_function(wrap_pyfunction!(recommend, m)?)?;
    m.add_function(wrap_pyfunction!(welch_t, m)?)?;
    m.add_function(wrap_pyfunction!(pooled_t, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_d, m)?)?;
    m.add_function(wrap_pyfunction!(share_probability, m)?)?;
    m.add_function(wrap_pyfunction!(lmm_test, m)?)?;
    m.add_function(wrap_pyfunction!(synth, m)?)?;
    m.add_class::<PyDecisionTree>()?;
    Ok(())
}
