use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// n, mean and sample standard deviation (n - 1 denominator).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

impl SampleSummary {
    pub fn new(n: usize, mean: f64, sd: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::contract(format!("sample summary needs n >= 2, got {n}")));
        }
        if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
            return Err(Error::validation(format!("invalid summary mean={mean} sd={sd}")));
        }
        Ok(Self { n, mean, sd })
    }

    pub fn from_samples(xs: &[f64]) -> Result<Self> {
        let (mean, var) = mean_var(xs)?;
        Self::new(xs.len(), mean, var.sqrt())
    }

    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }
}

/// Mean and unbiased variance.
pub(crate) fn mean_var(xs: &[f64]) -> Result<(f64, f64)> {
    if xs.len() < 2 {
        return Err(Error::contract(format!("need at least 2 observations, got {}", xs.len())));
    }
    if xs.iter().any(|x| !x.is_finite()) {
        return Err(Error::validation("non-finite observation"));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    Ok((mean, ss / (n - 1.0)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TTestVariant {
    Welch,
    Pooled,
    Paired,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided p-value.
    pub p: f64,
    /// P(T >= t).
    pub p_upper: f64,
    /// P(T <= t).
    pub p_lower: f64,
    pub variant: TTestVariant,
}

impl TTestResult {
    fn new(t: f64, df: f64, variant: TTestVariant) -> Self {
        let (p_upper, p_lower) = if t.is_infinite() {
            if t > 0.0 { (0.0, 1.0) } else { (1.0, 0.0) }
        } else {
            let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
            (dist.sf(t), dist.cdf(t))
        };
        let p = (2.0 * p_upper.min(p_lower)).min(1.0);
        Self { t, df, p, p_upper, p_lower, variant }
    }

    /// True when the statistic is infinite because the spread was zero.
    pub fn is_infinite(&self) -> bool {
        self.t.is_infinite()
    }
}

/// Unpaired t-test with Welch–Satterthwaite degrees of freedom.
pub fn welch_t_from_summary(a: &SampleSummary, b: &SampleSummary) -> Result<TTestResult> {
    let (va, vb) = (a.variance() / a.n as f64, b.variance() / b.n as f64);
    let se2 = va + vb;
    if se2 == 0.0 {
        return Err(Error::DegenerateSample("both samples have zero spread".into()));
    }
    let df = se2 * se2 / (va * va / (a.n as f64 - 1.0) + vb * vb / (b.n as f64 - 1.0));
    Ok(TTestResult::new((a.mean - b.mean) / se2.sqrt(), df, TTestVariant::Welch))
}

/// Unpaired t-test assuming equal variances.
pub fn pooled_t_from_summary(a: &SampleSummary, b: &SampleSummary) -> Result<TTestResult> {
    let s = pooled_sd(a, b)?;
    let se = s * (1.0 / a.n as f64 + 1.0 / b.n as f64).sqrt();
    let df = (a.n + b.n - 2) as f64;
    Ok(TTestResult::new((a.mean - b.mean) / se, df, TTestVariant::Pooled))
}

/// One-sample t-test on paired differences. Zero spread with a nonzero mean
/// gives an infinite statistic (see [`TTestResult::is_infinite`]).
pub fn paired_t(differences: &[f64]) -> Result<TTestResult> {
    let (mean, var) = mean_var(differences)?;
    let n = differences.len() as f64;
    let t = if var == 0.0 {
        if mean == 0.0 { 0.0 } else { mean.signum() * f64::INFINITY }
    } else {
        mean / (var.sqrt() / n.sqrt())
    };
    Ok(TTestResult::new(t, n - 1.0, TTestVariant::Paired))
}

fn pooled_sd(a: &SampleSummary, b: &SampleSummary) -> Result<f64> {
    let num = (a.n as f64 - 1.0) * a.variance() + (b.n as f64 - 1.0) * b.variance();
    let s = (num / (a.n + b.n - 2) as f64).sqrt();
    if s == 0.0 {
        return Err(Error::DegenerateSample("pooled standard deviation is zero".into()));
    }
    Ok(s)
}

/// Standardized mean difference using the pooled standard deviation.
pub fn cohens_d(a: &SampleSummary, b: &SampleSummary) -> Result<f64> {
    Ok((a.mean - b.mean) / pooled_sd(a, b)?)
}

/// Sample Pearson correlation.
pub fn pearson_corr(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::contract(format!("length mismatch: {} vs {}", xs.len(), ys.len())));
    }
    let (mx, vx) = mean_var(xs)?;
    let (my, vy) = mean_var(ys)?;
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::UndefinedCorrelation("a variable has zero variance".into()));
    }
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>() / (xs.len() as f64 - 1.0);
    Ok((cov / (vx.sqrt() * vy.sqrt())).clamp(-1.0, 1.0))
}
