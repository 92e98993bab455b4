//! t-tests, effect sizes, correlation and a random-intercepts mixed model.

mod lmm;
mod optimize;
mod ttest;

pub use lmm::{fit_lmm, fit_lmm_with, likelihood_ratio_test, LmmFit, LmmOptions, LmmRow, LrtResult};
pub use optimize::{nelder_mead, NelderMeadResult};
pub use ttest::{
    cohens_d, paired_t, pearson_corr, pooled_t_from_summary, welch_t_from_summary, SampleSummary,
    TTestResult, TTestVariant,
};
