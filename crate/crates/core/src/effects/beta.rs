// SPDX-License-Identifier: MIT OR Apache-2.0

//! Maximum-likelihood beta regression with a logit mean link and one
//! precision parameter.
//!
//! Parameters are `theta = (beta, tau)` with `phi = exp(tau)`. With
//! `mu = logistic(x'beta)`, `a = mu phi` and `b = (1 - mu) phi`, each
//! observation contributes
//!
//! ```text
//! ln G(phi) - ln G(a) - ln G(b) + (a - 1) ln y + (b - 1) ln(1 - y)
//! ```
//!
//! Gradient and Hessian are analytic; the optimizer is a damped Newton
//! iteration with backtracking.

use nalgebra::{DMatrix, DVector};

use super::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::stats::special::{digamma, inv_logit, ln_gamma, logit, trigamma};

const MAX_ITER: usize = 200;
const GRAD_TOL: f64 = 1e-8;
const TAU_LIMIT: f64 = 30.0;
const BETA_LIMIT: f64 = 50.0;

/// Log density of `Beta(mu phi, (1 - mu) phi)` at `y`.
pub fn beta_log_density(y: f64, mu: f64, phi: f64) -> f64 {
    let (a, b) = (mu * phi, (1.0 - mu) * phi);
    ln_gamma(phi) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * y.ln() + (b - 1.0) * (1.0 - y).ln()
}

fn mean_pair(eta: f64) -> (f64, f64) {
    // 1 - mu computed directly keeps precision for large eta
    let mu = inv_logit(eta).clamp(1e-15, 1.0 - 1e-15);
    let nu = inv_logit(-eta).clamp(1e-15, 1.0 - 1e-15);
    (mu, nu)
}

/// Beta log-likelihood over the rows of a design, optionally leaving one
/// row out.
#[derive(Debug, Clone)]
pub struct BetaLikelihood<'a> {
    x: &'a DMatrix<f64>,
    ln_y: Vec<f64>,
    ln_1my: Vec<f64>,
    skip: Option<usize>,
}

impl<'a> BetaLikelihood<'a> {
    pub fn new(x: &'a DMatrix<f64>, y: &[f64]) -> Self {
        BetaLikelihood {
            x,
            ln_y: y.iter().map(|v| v.ln()).collect(),
            ln_1my: y.iter().map(|v| (1.0 - v).ln()).collect(),
            skip: None,
        }
    }

    /// The same likelihood without row `i`.
    pub fn without(&self, i: usize) -> Self {
        BetaLikelihood { skip: Some(i), ..self.clone() }
    }

    pub fn n_params(&self) -> usize {
        self.x.ncols() + 1
    }

    fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.x.nrows()).filter(move |i| Some(*i) != self.skip)
    }

    fn eta(&self, theta: &[f64]) -> DVector<f64> {
        let p = self.x.ncols();
        self.x * DVector::from_column_slice(&theta[..p])
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        let eta = self.eta(theta);
        let phi = theta[self.x.ncols()].exp();
        let lg_phi = ln_gamma(phi);
        self.rows()
            .map(|i| {
                let (mu, nu) = mean_pair(eta[i]);
                let (a, b) = (mu * phi, nu * phi);
                lg_phi - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * self.ln_y[i] + (b - 1.0) * self.ln_1my[i]
            })
            .sum()
    }

    /// Log density of row `i` under `theta`, whether or not it is skipped.
    pub fn pointwise(&self, theta: &[f64], i: usize) -> f64 {
        let p = self.x.ncols();
        let eta: f64 = (0..p).map(|j| self.x[(i, j)] * theta[j]).sum();
        let phi = theta[p].exp();
        let (mu, nu) = mean_pair(eta);
        let (a, b) = (mu * phi, nu * phi);
        ln_gamma(phi) - ln_gamma(a) - ln_gamma(b) + (a - 1.0) * self.ln_y[i] + (b - 1.0) * self.ln_1my[i]
    }

    /// Score of row `i` alone.
    pub fn row_score(&self, theta: &[f64], i: usize) -> DVector<f64> {
        let p = self.x.ncols();
        let eta: f64 = (0..p).map(|j| self.x[(i, j)] * theta[j]).sum();
        let phi = theta[p].exp();
        let (mu, nu) = mean_pair(eta);
        let (a, b) = (mu * phi, nu * phi);
        let (psi_a, psi_b) = (digamma(a), digamma(b));
        let w = phi * mu * nu * ((self.ln_y[i] - self.ln_1my[i]) - (psi_a - psi_b));
        let mut s = DVector::zeros(p + 1);
        for j in 0..p {
            s[j] = self.x[(i, j)] * w;
        }
        s[p] = phi * digamma(phi) + a * (self.ln_y[i] - psi_a) + b * (self.ln_1my[i] - psi_b);
        s
    }

    pub fn gradient(&self, theta: &[f64]) -> DVector<f64> {
        self.derivatives(theta, false).0
    }

    /// Gradient and Hessian with respect to `(beta, tau)`.
    pub fn gradient_hessian(&self, theta: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let (g, h) = self.derivatives(theta, true);
        (g, h.expect("requested"))
    }

    fn derivatives(&self, theta: &[f64], hessian: bool) -> (DVector<f64>, Option<DMatrix<f64>>) {
        let p = self.x.ncols();
        let n = self.x.nrows();
        let eta = self.eta(theta);
        let phi = theta[p].exp();
        let (psi_phi, tri_phi) = (digamma(phi), if hessian { trigamma(phi) } else { 0.0 });
        let mut w_eta = DVector::zeros(n);
        let mut w_eta_eta = DVector::zeros(n);
        let mut w_eta_tau = DVector::zeros(n);
        let (mut g_tau, mut h_tau_tau) = (0.0, 0.0);
        for i in self.rows() {
            let (mu, nu) = mean_pair(eta[i]);
            let (a, b) = (mu * phi, nu * phi);
            let (psi_a, psi_b) = (digamma(a), digamma(b));
            let gl = mu * nu;
            let d = (self.ln_y[i] - self.ln_1my[i]) - (psi_a - psi_b);
            w_eta[i] = phi * gl * d;
            let l_tau = phi * psi_phi + a * (self.ln_y[i] - psi_a) + b * (self.ln_1my[i] - psi_b);
            g_tau += l_tau;
            if hessian {
                let (tri_a, tri_b) = (trigamma(a), trigamma(b));
                w_eta_eta[i] = phi * gl * (nu - mu) * d - phi * phi * gl * gl * (tri_a + tri_b);
                w_eta_tau[i] = phi * gl * (d - a * tri_a + b * tri_b);
                h_tau_tau += l_tau + phi * phi * tri_phi - a * a * tri_a - b * b * tri_b;
            }
        }
        let mut g = DVector::zeros(p + 1);
        g.rows_mut(0, p).copy_from(&self.x.tr_mul(&w_eta));
        g[p] = g_tau;
        if !hessian {
            return (g, None);
        }
        let mut weighted = self.x.clone();
        for (i, mut row) in weighted.row_iter_mut().enumerate() {
            row *= w_eta_eta[i];
        }
        let mut h = DMatrix::zeros(p + 1, p + 1);
        h.view_mut((0, 0), (p, p)).copy_from(&self.x.tr_mul(&weighted));
        let cross = self.x.tr_mul(&w_eta_tau);
        for j in 0..p {
            h[(j, p)] = cross[j];
            h[(p, j)] = cross[j];
        }
        h[(p, p)] = h_tau_tau;
        (g, Some(h))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegressionFit {
    pub column_names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub phi: f64,
    /// Covariance of `(beta, ln phi)`, the inverse observed information.
    pub covariance: DMatrix<f64>,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub iterations: usize,
}

impl RegressionFit {
    pub fn std_error(&self, j: usize) -> f64 {
        self.covariance[(j, j)].sqrt()
    }

    /// `(beta, ln phi)` as one vector.
    pub fn theta(&self) -> Vec<f64> {
        let mut t = self.coefficients.clone();
        t.push(self.phi.ln());
        t
    }

    pub fn fitted_means(&self, x: &DMatrix<f64>) -> Vec<f64> {
        (x * DVector::from_column_slice(&self.coefficients)).iter().map(|e| inv_logit(*e)).collect()
    }
}

pub(crate) struct Optimum {
    pub theta: Vec<f64>,
    pub hessian: DMatrix<f64>,
    pub value: f64,
    pub iterations: usize,
}

/// Damped Newton ascent from `start`.
pub(crate) fn maximize(lik: &BetaLikelihood, start: &[f64]) -> Result<Optimum> {
    let k = start.len();
    let mut theta = start.to_vec();
    let mut value = lik.value(&theta);
    if !value.is_finite() {
        return Err(Error::procedure("beta regression", "log-likelihood is not finite at the start values"));
    }
    let mut damping = 0.0f64;
    for iter in 0..MAX_ITER {
        let (g, h) = lik.gradient_hessian(&theta);
        let gmax = g.amax();
        let info = -&h;
        if gmax < GRAD_TOL {
            return finish(theta, h, value, iter);
        }
        let mut improved = false;
        for _ in 0..12 {
            let mut a = info.clone();
            if damping > 0.0 {
                let scale = 1.0 + info.diagonal().amax();
                for j in 0..k {
                    a[(j, j)] += damping * scale;
                }
            }
            let Some(chol) = a.cholesky() else {
                damping = (damping * 10.0).max(1e-8);
                continue;
            };
            let step = chol.solve(&g);
            let decrement = g.dot(&step);
            // no representable improvement left
            if decrement < 1e-20 {
                return finish(theta, h, value, iter);
            }
            // expected gain below the rounding noise of the log-likelihood:
            // the line search cannot tell, so take the plain Newton step
            if decrement < 1e-12 * (1.0 + value.abs()) {
                for (a, s) in theta.iter_mut().zip(step.iter()) {
                    *a += s;
                }
                value = lik.value(&theta);
                improved = true;
                break;
            }
            let mut t = 1.0;
            for _ in 0..40 {
                let trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(a, s)| a + t * s).collect();
                let v = lik.value(&trial);
                if v.is_finite() && v >= value {
                    theta = trial;
                    value = v;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if improved {
                damping = if t == 1.0 { damping / 10.0 } else { damping };
                if damping < 1e-10 {
                    damping = 0.0;
                }
                break;
            }
            damping = (damping * 10.0).max(1e-6);
        }
        if !improved {
            return Err(Error::procedure(
                "beta regression",
                format!("no ascent direction after {iter} iterations (gradient max-norm {gmax:.3e})"),
            ));
        }
        let tau = theta[k - 1];
        if tau > TAU_LIMIT {
            return Err(Error::procedure(
                "beta regression",
                format!("precision diverges (ln phi = {tau:.1}); the response is nearly constant"),
            ));
        }
        if let Some(j) = theta[..k - 1].iter().position(|b| b.abs() > BETA_LIMIT) {
            return Err(Error::procedure(
                "beta regression",
                format!("coefficient {j} diverges ({:.1}); separation-like degeneracy", theta[j]),
            ));
        }
    }
    let gmax = lik.gradient(&theta).amax();
    Err(Error::procedure(
        "beta regression",
        format!("no convergence in {MAX_ITER} iterations (gradient max-norm {gmax:.3e})"),
    ))
}

fn finish(theta: Vec<f64>, hessian: DMatrix<f64>, value: f64, iterations: usize) -> Result<Optimum> {
    Ok(Optimum { theta, hessian, value, iterations })
}

/// Least squares on the logit scale for `beta`, moments for `phi`.
pub(crate) fn start_values(x: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let (n, p) = (x.nrows(), x.ncols());
    let z = DVector::from_iterator(n, y.iter().map(|v| logit(*v)));
    let beta = x.clone().svd(true, true).solve(&z, 1e-12).unwrap_or_else(|_| DVector::zeros(p));
    let mu: Vec<f64> = (x * &beta).iter().map(|e| inv_logit(*e)).collect();
    let rss: f64 = y.iter().zip(&mu).map(|(v, m)| (v - m).powi(2)).sum();
    let sigma2 = rss / (n - p).max(1) as f64;
    let mean_var = mu.iter().map(|m| m * (1.0 - m)).sum::<f64>() / n as f64;
    let phi = if sigma2 > 0.0 { (mean_var / sigma2 - 1.0).max(1.0) } else { 1e6 };
    let mut theta: Vec<f64> = beta.iter().copied().collect();
    theta.push(phi.min(1e6).ln());
    theta
}

/// Maximum-likelihood fit.
pub fn beta_regression_fit(d: &DesignMatrix) -> Result<RegressionFit> {
    d.validate()?;
    if d.y.iter().all(|v| *v == d.y[0]) {
        return Err(Error::procedure("beta regression", "response is constant; precision is unbounded"));
    }
    let lik = BetaLikelihood::new(&d.x, &d.y);
    let opt = maximize(&lik, &start_values(&d.x, &d.y))?;
    fit_from_optimum(d, opt)
}

pub(crate) fn fit_from_optimum(d: &DesignMatrix, opt: Optimum) -> Result<RegressionFit> {
    let p = d.n_cols();
    let info = -&opt.hessian;
    let covariance = info.clone().cholesky().map(|c| c.inverse()).ok_or_else(|| {
        Error::procedure("beta regression", "observed information is not positive definite at the optimum")
    })?;
    let covariance = (&covariance + covariance.transpose()) * 0.5;
    Ok(RegressionFit {
        column_names: d.column_names.clone(),
        coefficients: opt.theta[..p].to_vec(),
        phi: opt.theta[p].exp(),
        covariance,
        log_likelihood: opt.value,
        n_obs: d.n_rows(),
        iterations: opt.iterations,
    })
}

/// Replaces the covariance of `fit` with the cluster-robust sandwich
/// `A^-1 B A^-1 G/(G-1)`, where `B` sums outer products of per-cluster
/// scores. `clusters[i]` labels row `i`.
pub fn cluster_robust(d: &DesignMatrix, fit: &RegressionFit, clusters: &[&str]) -> Result<RegressionFit> {
    if clusters.len() != d.n_rows() {
        return Err(Error::Precondition(format!("{} cluster labels for {} rows", clusters.len(), d.n_rows())));
    }
    let lik = BetaLikelihood::new(&d.x, &d.y);
    let theta = fit.theta();
    let k = theta.len();
    let mut sums: std::collections::BTreeMap<&str, DVector<f64>> = std::collections::BTreeMap::new();
    for (i, c) in clusters.iter().enumerate() {
        *sums.entry(c).or_insert_with(|| DVector::zeros(k)) += lik.row_score(&theta, i);
    }
    let g = sums.len() as f64;
    if sums.len() < 2 {
        return Err(Error::procedure("cluster-robust covariance", "needs at least two clusters"));
    }
    let mut meat = DMatrix::zeros(k, k);
    for s in sums.values() {
        meat += s * s.transpose();
    }
    let bread = &fit.covariance;
    let cov = bread * meat * bread * (g / (g - 1.0));
    Ok(RegressionFit { covariance: (&cov + cov.transpose()) * 0.5, ..fit.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::design::{Frame, Term};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Beta, Distribution, StandardNormal};
    use statrs::distribution::{Beta as RefBeta, Continuous};

    fn simulate(n: usize, beta: &[f64], phi: f64, seed: u64) -> DesignMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let xs: Vec<Vec<f64>> = (1..beta.len()).map(|_| (0..n).map(|_| rng.sample(StandardNormal)).collect()).collect();
        let mut frame = Frame::new(n);
        let mut terms = vec![Term::Intercept];
        for (j, col) in xs.iter().enumerate() {
            let name = format!("x{j}");
            frame = frame.numeric(&name, col).unwrap();
            terms.push(Term::Numeric(name));
        }
        let y: Vec<f64> = (0..n)
            .map(|i| {
                let eta = beta[0] + xs.iter().zip(&beta[1..]).map(|(c, b)| c[i] * b).sum::<f64>();
                let mu = inv_logit(eta);
                Beta::new(mu * phi, (1.0 - mu) * phi).unwrap().sample(&mut rng)
            })
            .collect();
        DesignMatrix::build(&frame, &terms, &y).unwrap()
    }

    #[test]
    fn density_matches_reference() {
        for &(y, mu, phi) in &[(0.3, 0.5, 2.0), (0.91, 0.8, 35.0), (0.02, 0.1, 4.5)] {
            let r = RefBeta::new(mu * phi, (1.0 - mu) * phi).unwrap().ln_pdf(y);
            assert!((beta_log_density(y, mu, phi) - r).abs() < 1e-10);
        }
    }

    #[test]
    fn intercept_only_recovers_mean_and_precision() {
        let d = simulate(500, &[logit(0.7)], 20.0, 1);
        let fit = beta_regression_fit(&d).unwrap();
        assert!((inv_logit(fit.coefficients[0]) - 0.7).abs() < 0.03);
        assert!((fit.phi / 20.0 - 1.0).abs() < 0.2, "phi {}", fit.phi);
    }

    #[test]
    fn two_coefficients_within_two_se() {
        let d = simulate(1000, &[0.5, -0.3], 30.0, 2);
        let fit = beta_regression_fit(&d).unwrap();
        for (j, truth) in [0.5, -0.3].iter().enumerate() {
            assert!((fit.coefficients[j] - truth).abs() < 2.0 * fit.std_error(j));
        }
        let gmax = BetaLikelihood::new(&d.x, &d.y).gradient(&fit.theta()).amax();
        assert!(gmax < 1e-8, "{gmax}");
        let c = &fit.covariance;
        assert_eq!(c, &c.transpose());
        assert!(c.clone().symmetric_eigenvalues().iter().all(|e| *e > 0.0));
    }

    #[test]
    fn gradient_and_hessian_match_differences() {
        let d = simulate(60, &[0.2, 0.4, -0.1], 15.0, 3);
        let lik = BetaLikelihood::new(&d.x, &d.y);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let theta: Vec<f64> = vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(0.0..4.0),
            ];
            let (g, h) = lik.gradient_hessian(&theta);
            for j in 0..4 {
                let step = 1e-5;
                let mut up = theta.clone();
                let mut dn = theta.clone();
                up[j] += step;
                dn[j] -= step;
                let fd = (lik.value(&up) - lik.value(&dn)) / (2.0 * step);
                assert!((g[j] - fd).abs() <= 1e-6 * (1.0 + fd.abs()), "grad {j}: {} vs {fd}", g[j]);
                let gd = (lik.gradient(&up) - lik.gradient(&dn)) / (2.0 * step);
                for k in 0..4 {
                    assert!((h[(k, j)] - gd[k]).abs() <= 1e-5 * (1.0 + gd[k].abs()), "hess {k},{j}");
                }
            }
        }
    }

    #[test]
    fn row_scores_sum_to_gradient() {
        let d = simulate(30, &[0.3, 0.2], 12.0, 7);
        let lik = BetaLikelihood::new(&d.x, &d.y);
        let theta = [0.1, 0.25, 2.2];
        let total = (0..30).fold(DVector::zeros(3), |acc, i| acc + lik.row_score(&theta, i));
        assert!((total - lik.gradient(&theta)).amax() < 1e-9);
    }

    #[test]
    fn singleton_clusters_give_the_usual_sandwich() {
        let d = simulate(200, &[0.3, 0.5], 25.0, 8);
        let fit = beta_regression_fit(&d).unwrap();
        let labels: Vec<String> = (0..200).map(|i| i.to_string()).collect();
        let refs: Vec<&str> = labels.iter().map(|s| s.as_str()).collect();
        let robust = cluster_robust(&d, &fit, &refs).unwrap();
        // correctly specified model: sandwich and model-based agree roughly
        for j in 0..2 {
            let ratio = robust.std_error(j) / fit.std_error(j);
            assert!((0.8..1.25).contains(&ratio), "{ratio}");
        }
        assert!(cluster_robust(&d, &fit, &refs[..10]).is_err());
    }

    #[test]
    fn boundary_and_constant_responses_rejected() {
        let mut d = simulate(50, &[0.0], 10.0, 5);
        d.y[0] = 0.0;
        assert!(matches!(beta_regression_fit(&d), Err(Error::Precondition(_))));
        d.y = vec![0.4; 50];
        let err = beta_regression_fit(&d).unwrap_err();
        assert!(err.is_statistical(), "{err}");
    }

    #[test]
    fn leaving_a_row_out_matches_a_smaller_design() {
        let d = simulate(40, &[0.3, 0.2], 12.0, 6);
        let lik = BetaLikelihood::new(&d.x, &d.y).without(7);
        let theta = [0.1, 0.3, 2.0];
        let full = BetaLikelihood::new(&d.x, &d.y);
        assert!((lik.value(&theta) - (full.value(&theta) - full.pointwise(&theta, 7))).abs() < 1e-9);
        assert!(
            (full.pointwise(&theta, 7) - beta_log_density(d.y[7], inv_logit(0.1 + 0.3 * d.x[(7, 1)]), 2f64.exp()))
                .abs()
                < 1e-12
        );
    }
}
