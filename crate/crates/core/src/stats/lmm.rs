//! Gaussian linear mixed model with crossed random intercepts:
//!
//! `rating = β₀ [+ β₁·condition] + u_participant + v_item + ε`
//!
//! fit by maximum likelihood (not REML, so nested fixed-effect models can be
//! compared with a likelihood-ratio test).
//!
//! The relative standard deviations `θ = (σ_p/σ_e, σ_m/σ_e)` are searched in
//! log space. For fixed `θ`, β and σ_e² are profiled out through one Cholesky
//! factorization of the penalized normal equations
//!
//! ```text
//! [ ΛZᵀZΛ + I   ΛZᵀX ] [u]   [ΛZᵀy]
//! [ XᵀZΛ        XᵀX  ] [β] = [Xᵀy ]
//! ```
//!
//! giving `-2ℓ = log|ΛZᵀZΛ + I| + N (1 + log(2π r² / N))` with `r²` the
//! penalized residual sum of squares. The system is `(P + M + p)` square
//! where P and M are the participant and item counts, so cost does not grow
//! with N beyond forming the cross-products.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use sha2::{Digest, Sha256};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::model::{ItemId, UserId};

use super::optimize::nelder_mead;

/// One observation in long format.
#[derive(Clone, Debug, PartialEq)]
pub struct LmmRow {
    pub rating: f64,
    pub participant: UserId,
    pub item: ItemId,
    pub condition: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmmFit {
    /// Intercept, then the condition coefficient when included.
    pub beta: Vec<f64>,
    pub include_condition: bool,
    pub var_participant: f64,
    pub var_item: f64,
    pub var_residual: f64,
    /// Maximized log-likelihood. Infinite only for an exact fit.
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub iterations: usize,
    /// The fixed effects reproduce the response exactly; variances are 0.
    pub exact_fit: bool,
    /// Digest of the data rows, used to pair nested fits.
    pub fingerprint: u64,
}

impl LmmFit {
    pub fn intercept(&self) -> f64 {
        self.beta[0]
    }

    pub fn condition_effect(&self) -> Option<f64> {
        self.beta.get(1).copied()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmmOptions {
    /// Stop once the log-likelihood spread across the search simplex is
    /// below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LmmOptions {
    fn default() -> Self {
        Self { tolerance: 1e-8, max_iterations: 2000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LrtResult {
    pub chi_square: f64,
    pub df: u32,
    pub p: f64,
}

pub fn fit_lmm(data: &[LmmRow], include_condition: bool) -> Result<LmmFit> {
    fit_lmm_with(data, include_condition, LmmOptions::default())
}

pub fn fit_lmm_with(data: &[LmmRow], include_condition: bool, opts: LmmOptions) -> Result<LmmFit> {
    let problem = Problem::new(data, include_condition)?;
    let fingerprint = fingerprint(data);
    let n = data.len() as f64;

    let base = |iterations| LmmFit {
        beta: Vec::new(),
        include_condition,
        var_participant: 0.0,
        var_item: 0.0,
        var_residual: 0.0,
        log_likelihood: 0.0,
        n_obs: data.len(),
        iterations,
        exact_fit: false,
        fingerprint,
    };

    let ols = problem.evaluate(0.0, 0.0).expect("fixed-effect design checked in Problem::new");
    if ols.rss <= 1e-24 * problem.yty.max(1.0) {
        return Ok(LmmFit { beta: ols.beta, log_likelihood: f64::INFINITY, exact_fit: true, ..base(0) });
    }

    const LOG_FLOOR: f64 = -30.0;
    const LOG_CEIL: f64 = 12.0;
    let theta_of = |eta: f64| (eta.clamp(LOG_FLOOR, LOG_CEIL) / 2.0).exp();
    let objective = |eta: &[f64]| {
        problem
            .evaluate(theta_of(eta[0]), theta_of(eta[1]))
            .map_or(f64::INFINITY, |e| e.deviance)
    };
    // Deviance is -2ℓ, so a log-likelihood tolerance doubles.
    let nm = nelder_mead(objective, &[0.0, 0.0], 1.0, 2.0 * opts.tolerance, opts.max_iterations);

    let (tp, tm) = (theta_of(nm.x[0]), theta_of(nm.x[1]));
    let mut best: Option<(f64, f64, Eval)> = None;
    for (a, b) in [(tp, tm), (0.0, tm), (tp, 0.0), (0.0, 0.0)] {
        if let Some(e) = problem.evaluate(a, b) {
            if best.as_ref().is_none_or(|(_, _, cur)| e.deviance < cur.deviance) {
                best = Some((a, b, e));
            }
        }
    }
    let (tp, tm, e) = best.expect("boundary evaluation always succeeds");
    let sigma2 = e.rss / n;
    let fit = LmmFit {
        beta: e.beta,
        var_participant: tp * tp * sigma2,
        var_item: tm * tm * sigma2,
        var_residual: sigma2,
        log_likelihood: -0.5 * e.deviance,
        ..base(nm.iterations)
    };
    if !nm.converged {
        return Err(Error::NonConvergence { iterations: nm.iterations, best: Box::new(fit) });
    }
    Ok(fit)
}

/// χ² = 2(ℓ_full − ℓ_null), clamped at 0, on one degree of freedom.
pub fn likelihood_ratio_test(full: &LmmFit, null: &LmmFit) -> Result<LrtResult> {
    if full.fingerprint != null.fingerprint || full.n_obs != null.n_obs {
        return Err(Error::contract("nested fits were computed on different data"));
    }
    if !full.include_condition || null.include_condition {
        return Err(Error::contract("full model must include the condition effect and the null must not"));
    }
    let diff = full.log_likelihood - null.log_likelihood;
    let chi_square = if diff.is_nan() { 0.0 } else { (2.0 * diff).max(0.0) };
    let p = if chi_square.is_infinite() {
        0.0
    } else {
        ChiSquared::new(1.0).expect("df 1").sf(chi_square)
    };
    Ok(LrtResult { chi_square, df: 1, p })
}

fn fingerprint(data: &[LmmRow]) -> u64 {
    let mut h = Sha256::new();
    for r in data {
        h.update(r.rating.to_bits().to_le_bytes());
        h.update(r.participant.as_str().as_bytes());
        h.update([0]);
        h.update(r.item.as_str().as_bytes());
        h.update([0, u8::from(r.condition)]);
    }
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

struct Eval {
    deviance: f64,
    rss: f64,
    beta: Vec<f64>,
}

/// Cross-products of the design, computed once per fit.
struct Problem {
    n: usize,
    n_part: usize,
    n_fixed: usize,
    ztz: DMatrix<f64>,
    ztx: DMatrix<f64>,
    xtx: DMatrix<f64>,
    zty: DVector<f64>,
    xty: DVector<f64>,
    yty: f64,
}

impl Problem {
    fn new(data: &[LmmRow], include_condition: bool) -> Result<Self> {
        if let Some(bad) = data.iter().find(|r| !r.rating.is_finite()) {
            return Err(Error::validation(format!("non-finite rating {}", bad.rating)));
        }
        let parts: BTreeMap<&UserId, usize> = index_of(data.iter().map(|r| &r.participant));
        let items: BTreeMap<&ItemId, usize> = index_of(data.iter().map(|r| &r.item));
        if parts.len() < 2 || items.len() < 2 {
            return Err(Error::contract(format!(
                "mixed model needs at least 2 participants and 2 items, got {} and {}",
                parts.len(),
                items.len()
            )));
        }
        let n_part = parts.len();
        let q = n_part + items.len();
        let p = if include_condition { 2 } else { 1 };
        let mut ztz = DMatrix::zeros(q, q);
        let mut ztx = DMatrix::zeros(q, p);
        let mut xtx = DMatrix::zeros(p, p);
        let mut zty = DVector::zeros(q);
        let mut xty = DVector::zeros(p);
        let mut yty = 0.0;
        for r in data {
            let a = parts[&r.participant];
            let b = n_part + items[&r.item];
            let x = [1.0, if r.condition { 1.0 } else { 0.0 }];
            let x = &x[..p];
            ztz[(a, a)] += 1.0;
            ztz[(b, b)] += 1.0;
            ztz[(a, b)] += 1.0;
            ztz[(b, a)] += 1.0;
            for (j, xj) in x.iter().enumerate() {
                ztx[(a, j)] += xj;
                ztx[(b, j)] += xj;
                xty[j] += xj * r.rating;
                for (k, xk) in x.iter().enumerate() {
                    xtx[(j, k)] += xj * xk;
                }
            }
            zty[a] += r.rating;
            zty[b] += r.rating;
            yty += r.rating * r.rating;
        }
        if xtx.clone().cholesky().is_none() {
            return Err(Error::validation("condition column is constant; its effect is not identifiable"));
        }
        Ok(Self { n: data.len(), n_part, n_fixed: p, ztz, ztx, xtx, zty, xty, yty })
    }

    fn evaluate(&self, theta_p: f64, theta_m: f64) -> Option<Eval> {
        let q = self.ztz.nrows();
        let p = self.n_fixed;
        let lam: Vec<f64> = (0..q).map(|i| if i < self.n_part { theta_p } else { theta_m }).collect();
        let mut m = DMatrix::zeros(q + p, q + p);
        for i in 0..q {
            for j in 0..q {
                m[(i, j)] = lam[i] * self.ztz[(i, j)] * lam[j];
            }
            m[(i, i)] += 1.0;
            for j in 0..p {
                let v = lam[i] * self.ztx[(i, j)];
                m[(i, q + j)] = v;
                m[(q + j, i)] = v;
            }
        }
        for i in 0..p {
            for j in 0..p {
                m[(q + i, q + j)] = self.xtx[(i, j)];
            }
        }
        let mut rhs = DVector::zeros(q + p);
        for i in 0..q {
            rhs[i] = lam[i] * self.zty[i];
        }
        for j in 0..p {
            rhs[q + j] = self.xty[j];
        }
        let chol = m.cholesky()?;
        let sol = chol.solve(&rhs);
        let rss = (self.yty - rhs.dot(&sol)).max(0.0);
        let l = chol.l_dirty();
        let logdet: f64 = (0..q).map(|i| 2.0 * l[(i, i)].ln()).sum();
        let n = self.n as f64;
        let deviance = if rss > 0.0 {
            logdet + n * (1.0 + (2.0 * std::f64::consts::PI * rss / n).ln())
        } else {
            f64::NEG_INFINITY
        };
        Some(Eval { deviance, rss, beta: (0..p).map(|j| sol[q + j]).collect() })
    }
}

fn index_of<'a, T: Ord + 'a>(keys: impl Iterator<Item = &'a T>) -> BTreeMap<&'a T, usize> {
    let mut m = BTreeMap::new();
    for k in keys {
        let next = m.len();
        m.entry(k).or_insert(next);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(rating: f64, p: usize, m: usize, cond: bool) -> LmmRow {
        LmmRow {
            rating,
            participant: UserId::new(format!("p{p}")).unwrap(),
            item: ItemId::new(format!("m{m}")).unwrap(),
            condition: cond,
        }
    }

    /// Dense marginal log-likelihood, N(Xβ, σp² ZpZpᵀ + σm² ZmZmᵀ + σe² I).
    fn dense_loglik(data: &[LmmRow], fit: &LmmFit) -> f64 {
        let n = data.len();
        let mut v = DMatrix::<f64>::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let mut c = 0.0;
                if data[i].participant == data[j].participant {
                    c += fit.var_participant;
                }
                if data[i].item == data[j].item {
                    c += fit.var_item;
                }
                if i == j {
                    c += fit.var_residual;
                }
                v[(i, j)] = c;
            }
        }
        let resid = DVector::from_iterator(
            n,
            data.iter().map(|r| {
                r.rating - fit.beta[0] - if r.condition { fit.beta.get(1).copied().unwrap_or(0.0) } else { 0.0 }
            }),
        );
        let chol = v.cholesky().unwrap();
        let logdet: f64 = (0..n).map(|i| 2.0 * chol.l_dirty()[(i, i)].ln()).sum();
        let quad = resid.dot(&chol.solve(&resid));
        -0.5 * (n as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + quad)
    }

    fn small_data() -> Vec<LmmRow> {
        let mut v = Vec::new();
        let pe = [0.4, -0.3, 0.1, 0.0, -0.5, 0.2];
        let me = [0.3, -0.2, 0.25, -0.35];
        let mut k = 0u32;
        for (p, pv) in pe.iter().enumerate() {
            for (m, mv) in me.iter().enumerate() {
                k = k.wrapping_mul(1103515245).wrapping_add(12345);
                let noise = ((k >> 16) % 1000) as f64 / 1000.0 - 0.5;
                let cond = (p + m) % 2 == 0;
                v.push(row(3.0 + if cond { 0.4 } else { 0.0 } + pv + mv + noise, p, m, cond));
            }
        }
        v
    }

    #[test]
    fn profiled_likelihood_matches_dense_evaluation() {
        let data = small_data();
        for include in [false, true] {
            let fit = fit_lmm(&data, include).unwrap();
            let dense = dense_loglik(&data, &fit);
            assert_relative_eq!(fit.log_likelihood, dense, epsilon = 1e-8);
            assert!(fit.var_participant >= 0.0 && fit.var_item >= 0.0 && fit.var_residual > 0.0);
        }
    }

    #[test]
    fn optimum_beats_nearby_variance_settings() {
        let data = small_data();
        let fit = fit_lmm(&data, true).unwrap();
        for (dp, dm, de) in [(1.1, 1.0, 1.0), (0.9, 1.0, 1.0), (1.0, 1.2, 1.0), (1.0, 1.0, 0.95)] {
            let mut other = fit.clone();
            other.var_participant *= dp;
            other.var_item *= dm;
            other.var_residual *= de;
            assert!(dense_loglik(&data, &other) <= fit.log_likelihood + 1e-9);
        }
    }

    #[test]
    fn constant_response_is_an_exact_fit() {
        let data: Vec<LmmRow> = (0..4).flat_map(|p| (0..4).map(move |m| row(3.5, p, m, (p + m) % 2 == 0))).collect();
        let fit = fit_lmm(&data, true).unwrap();
        assert!(fit.exact_fit);
        assert_relative_eq!(fit.intercept(), 3.5, epsilon = 1e-12);
        assert!(fit.condition_effect().unwrap().abs() < 1e-12);
        assert_eq!((fit.var_participant, fit.var_item, fit.var_residual), (0.0, 0.0, 0.0));
        let null = fit_lmm(&data, false).unwrap();
        let lrt = likelihood_ratio_test(&fit, &null).unwrap();
        assert_eq!(lrt.chi_square, 0.0);
    }

    #[test]
    fn lrt_contracts() {
        let data = small_data();
        let full = fit_lmm(&data, true).unwrap();
        let null = fit_lmm(&data, false).unwrap();
        let lrt = likelihood_ratio_test(&full, &null).unwrap();
        assert!(lrt.chi_square >= 0.0 && (0.0..=1.0).contains(&lrt.p));
        assert!(likelihood_ratio_test(&null, &full).is_err());
        let mut other = data.clone();
        other[0].rating += 1.0;
        let null2 = fit_lmm(&other, false).unwrap();
        assert!(likelihood_ratio_test(&full, &null2).is_err());
        assert_eq!(likelihood_ratio_test(&full, &full).map(|r| r.chi_square).ok(), None);
    }

    #[test]
    fn chi_square_tail_matches_closed_forms() {
        let chi1 = ChiSquared::new(1.0).unwrap();
        let chi2 = ChiSquared::new(2.0).unwrap();
        for x in [0.05, 0.5, 1.0, 3.84, 10.0, 25.0] {
            let exact2 = (-x / 2.0f64).exp();
            assert!(((chi2.sf(x) - exact2) / exact2).abs() < 1e-10);
            // P(χ²₁ > x) = erfc(sqrt(x/2)); statrs' incomplete gamma is good to ~1e-10 here.
            let exact1 = statrs::function::erf::erfc((x / 2.0f64).sqrt());
            assert!(((chi1.sf(x) - exact1) / exact1).abs() < 1e-9);
        }
    }

    #[test]
    fn input_validation() {
        let one_part: Vec<LmmRow> = (0..5).map(|m| row(m as f64, 0, m, m % 2 == 0)).collect();
        assert!(matches!(fit_lmm(&one_part, false), Err(Error::Contract(_))));
        let const_cond: Vec<LmmRow> = (0..3).flat_map(|p| (0..3).map(move |m| row((p * m) as f64, p, m, true))).collect();
        assert!(fit_lmm(&const_cond, true).is_err());
        assert!(fit_lmm(&const_cond, false).is_ok());
    }

    #[test]
    fn iteration_budget_exhaustion_carries_best_fit() {
        let data = small_data();
        let opts = LmmOptions { tolerance: 1e-12, max_iterations: 2 };
        match fit_lmm_with(&data, true, opts) {
            Err(Error::NonConvergence { iterations, best }) => {
                assert_eq!(iterations, 2);
                assert!(best.log_likelihood.is_finite());
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }
}
