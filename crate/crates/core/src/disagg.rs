//! Recovering the mixing density from one aggregated series: orthonormal
//! Gegenbauer expansion of `phi(x) / (1 - x^2)^q` with coefficients
//! estimated from sample autocovariances.

use rayon::prelude::*;

use crate::dd::Dd;
use crate::error::{domain, Error, Result};
use crate::mixing::{EdgeIntegrand, MixingLaw};
use crate::panel::{simulate_aggregate, PanelConfig};
use crate::quad::{gauss_jacobi, Abscissa};
use crate::rng::replicate_seed;
use crate::special::{gamma, ln_gamma};

pub const MAX_DEGREE: usize = 64;
/// Orthonormality tolerance of the construction self-check.
const GRAM_TOL: f64 = 1e-8;
pub const DEFAULT_GAMMA: f64 = 0.3;
pub const GRID_POINTS: usize = 512;

/// Orthonormal polynomials `G_0..=G_K` in `L_2((1 - x^2)^q dx)` on `(-1, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GegenbauerBasis {
    q: f64,
    degree: usize,
    /// `G_k(x) = p0 * P_k(x)`, `x P_k = b_{k+1} P_{k+1} + b_k P_{k-1}`.
    p0: f64,
    /// `b_k` for `k = 1..=K` (index 0 unused).
    b: Vec<f64>,
    /// `coeffs[k][j]`: coefficient of `x^j` in `G_k`.
    coeffs: Vec<Vec<Dd>>,
}

/// `b_k^2 = k (k + 2λ - 1) / (4 (k + λ)(k + λ - 1))`, `λ = q + 1/2`, written so
/// that `k = 1` stays finite at `λ = 0`.
fn recurrence_sq(k: usize, lambda: Dd) -> Dd {
    let one = Dd::from(1.0);
    let kd = Dd::from(k as f64);
    if k == 1 {
        return one / (Dd::from(2.0) * (one + lambda));
    }
    let two_l = lambda + lambda;
    (kd * (kd + two_l - one)) / (Dd::from(4.0) * (kd + lambda) * (kd + lambda - one))
}

/// `∫_{-1}^{1} (1 - x^2)^q dx`.
fn weight_mass(q: f64) -> f64 {
    (0.5 * std::f64::consts::PI.ln() + ln_gamma(q + 1.0) - ln_gamma(q + 1.5)).exp()
}

impl GegenbauerBasis {
    pub fn new(q: f64, degree: usize) -> Result<Self> {
        if !(q > -1.0) || !q.is_finite() {
            return domain(format!("q must exceed -1, got {q}"));
        }
        if degree > MAX_DEGREE {
            return domain(format!("degree must be at most {MAX_DEGREE}, got {degree}"));
        }
        let lambda = Dd::from(q) + Dd::from(0.5);
        let b_dd: Vec<Dd> = std::iter::once(Dd::ZERO)
            .chain((1..=degree + 1).map(|k| recurrence_sq(k, lambda).sqrt()))
            .collect();
        let p0 = 1.0 / weight_mass(q).sqrt();
        // monomial coefficients of P_k, then scaled by p0
        let mut polys: Vec<Vec<Dd>> = Vec::with_capacity(degree + 1);
        polys.push(vec![Dd::from(1.0)]);
        for k in 0..degree {
            let mut next = vec![Dd::ZERO; k + 2];
            for (j, &c) in polys[k].iter().enumerate() {
                next[j + 1] = next[j + 1] + c;
            }
            if k >= 1 {
                for (j, &c) in polys[k - 1].iter().enumerate() {
                    next[j] = next[j] - b_dd[k] * c;
                }
            }
            for c in next.iter_mut() {
                *c = *c / b_dd[k + 1];
            }
            polys.push(next);
        }
        let p0_dd = Dd::from(p0);
        let coeffs = polys
            .into_iter()
            .map(|p| p.into_iter().map(|c| c * p0_dd).collect())
            .collect();
        let basis = GegenbauerBasis {
            q,
            degree,
            p0,
            b: b_dd.iter().map(|x| x.to_f64()).collect(),
            coeffs,
        };
        basis.self_check()?;
        Ok(basis)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Coefficient of `x^j` in `G_k`.
    pub fn coefficient(&self, k: usize, j: usize) -> f64 {
        self.coeffs[k].get(j).map_or(0.0, |c| c.to_f64())
    }

    /// `G_0(x), ..., G_K(x)` by the three-term recurrence.
    pub fn eval_all(&self, x: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.degree + 1);
        let mut prev = 0.0;
        let mut cur = self.p0;
        out.push(cur);
        for k in 0..self.degree {
            let next = (x * cur - if k >= 1 { self.b[k] * prev } else { 0.0 }) / self.b[k + 1];
            prev = cur;
            cur = next;
            out.push(cur);
        }
        out
    }

    /// `G_k(x)` from the monomial coefficients.
    pub fn eval_monomial(&self, k: usize, x: f64) -> f64 {
        let xd = Dd::from(x);
        self.coeffs[k].iter().rev().fold(Dd::ZERO, |acc, &c| acc * xd + c).to_f64()
    }

    /// `Σ_j g_{k,j} m_j` for each `k ≤ K`, accumulated in double-double.
    pub fn moment_combinations(&self, moments: &[f64]) -> Vec<f64> {
        self.coeffs
            .iter()
            .map(|row| {
                row.iter()
                    .zip(moments)
                    .fold(Dd::ZERO, |acc, (&c, &m)| acc + c * Dd::from(m))
                    .to_f64()
            })
            .collect()
    }

    /// Gram matrix of the monomial form under a Gauss–Jacobi rule of `nodes` points.
    pub fn gram(&self, nodes: usize) -> Result<Vec<Vec<f64>>> {
        let rule = gauss_jacobi(nodes, self.q, self.q)?;
        let vals: Vec<Vec<f64>> = rule
            .nodes
            .iter()
            .map(|&x| (0..=self.degree).map(|k| self.eval_monomial(k, x)).collect())
            .collect();
        Ok(gram_from_values(&vals, &rule.weights, self.degree + 1))
    }

    fn self_check(&self) -> Result<()> {
        let g = self.gram(self.degree + 2)?;
        let worst = max_identity_deviation(&g);
        if !(worst < GRAM_TOL) {
            return Err(Error::Consistency(format!(
                "Gegenbauer basis q={} K={} deviates from orthonormality by {worst:e}",
                self.q, self.degree
            )));
        }
        Ok(())
    }
}

fn gram_from_values(vals: &[Vec<f64>], weights: &[f64], size: usize) -> Vec<Vec<f64>> {
    let mut g = vec![vec![0.0; size]; size];
    for (row, &w) in vals.iter().zip(weights) {
        for j in 0..size {
            for k in 0..size {
                g[j][k] += w * row[j] * row[k];
            }
        }
    }
    g
}

/// `max_{j,k} |g_{jk} - δ_{jk}|`.
pub fn max_identity_deviation(g: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, row) in g.iter().enumerate() {
        for (k, v) in row.iter().enumerate() {
            worst = worst.max((v - if j == k { 1.0 } else { 0.0 }).abs());
        }
    }
    worst
}

/// Gram matrix of the handbook closed form with its printed normalizer
/// `g_n = π 2^{-2q} Γ(n+2q+1) / (Γ(q+1/2)^2 Γ(n+q+1/2))`.
///
/// The printed constant does not give an orthonormal family (at `q = 0` the
/// first diagonal entry is `√π · 2 ≈ 3.545`); the basis above uses the
/// standard norm instead. Kept for side-by-side comparison.
pub fn handbook_normalizer_gram(q: f64, degree: usize) -> Result<Vec<Vec<f64>>> {
    if !(q > -1.0) || q == -0.5 {
        return domain(format!("the handbook form needs q > -1 and q != -1/2, got {q}"));
    }
    if degree > 20 {
        return domain("the handbook comparison is limited to degree 20");
    }
    let l = q + 0.5;
    let coeffs: Vec<Vec<f64>> = (0..=degree)
        .map(|n| {
            let nf = n as f64;
            let gn = std::f64::consts::PI / 2f64.powf(2.0 * q) * gamma(nf + 2.0 * q + 1.0)
                / (gamma(l).powi(2) * gamma(nf + l));
            let mut row = vec![0.0; n + 1];
            for m in 0..=n / 2 {
                let p = n - 2 * m;
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                row[p] = sign / gn.sqrt() / gamma(l) * 2f64.powi(p as i32) * gamma(l + nf - m as f64)
                    / (gamma(m as f64 + 1.0) * gamma(p as f64 + 1.0));
            }
            row
        })
        .collect();
    let rule = gauss_jacobi(degree + 2, q, q)?;
    let vals: Vec<Vec<f64>> = rule
        .nodes
        .iter()
        .map(|&x| coeffs.iter().map(|row| row.iter().rev().fold(0.0, |acc, c| acc * x + c)).collect())
        .collect();
    Ok(gram_from_values(&vals, &rule.weights, degree + 1))
}

/// `n^{-1} Σ_{i=1}^{n-j} (x_i - x̄)(x_{i+j} - x̄)`.
pub fn sample_autocov(series: &[f64], j: usize) -> Result<f64> {
    Ok(sample_autocovs(series, j)?[j])
}

/// [`sample_autocov`] for lags `0..=max_lag`.
pub fn sample_autocovs(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = series.len();
    if max_lag >= n {
        return domain(format!("lag {max_lag} needs more than {n} observations"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = series.iter().map(|x| x - mean).collect();
    Ok(raw_lag_products(&centered, max_lag))
}

/// `n^{-1} Σ_{i=1}^{n-j} x_i x_{i+j}` without centering, for lags `0..=max_lag`.
pub fn raw_autocovs(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if max_lag >= series.len() {
        return domain(format!("lag {max_lag} needs more than {} observations", series.len()));
    }
    Ok(raw_lag_products(series, max_lag))
}

fn raw_lag_products(x: &[f64], max_lag: usize) -> Vec<f64> {
    let n = x.len();
    (0..=max_lag)
        .map(|j| x[..n - j].iter().zip(&x[j..]).map(|(a, b)| a * b).sum::<f64>() / n as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum VarianceMode {
    /// Innovation variance estimated as `r̂(0) - r̂(2)`.
    Estimated,
    Known,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DensityEstimate {
    pub q: f64,
    pub degree: usize,
    pub zeta: Vec<f64>,
    /// Innovation variance used for the normalization.
    pub sigma_w2: f64,
    pub mode: VarianceMode,
    pub n: usize,
}

/// Expansion coefficients of `phi / (1 - x^2)^q` from one series.
///
/// With `sigma_w2 = None` the innovation variance is estimated from the
/// series and the estimate integrates to one.
pub fn estimate(series: &[f64], basis: &GegenbauerBasis, sigma_w2: Option<f64>) -> Result<DensityEstimate> {
    let k = basis.degree();
    if k + 2 >= series.len() {
        return domain(format!("degree {k} needs more than {} observations", k + 3));
    }
    let r = sample_autocovs(series, k + 2)?;
    let diffs: Vec<f64> = (0..=k).map(|j| r[j] - r[j + 2]).collect();
    let (s2, mode) = match sigma_w2 {
        None => (diffs[0], VarianceMode::Estimated),
        Some(v) if v > 0.0 => (v, VarianceMode::Known),
        Some(v) => return domain(format!("innovation variance must be positive, got {v}")),
    };
    if !(s2 > 0.0 && s2.is_finite()) {
        return Err(Error::Degenerate(format!("estimated innovation variance is {s2}")));
    }
    let mut zeta: Vec<f64> = basis.moment_combinations(&diffs).into_iter().map(|z| z / s2).collect();
    if mode == VarianceMode::Estimated {
        zeta[0] = basis.coefficient(0, 0);
    }
    Ok(DensityEstimate { q: basis.q(), degree: k, zeta, sigma_w2: s2, mode, n: series.len() })
}

/// The same estimate truncated to degree `k`.
pub fn truncate(est: &DensityEstimate, k: usize) -> DensityEstimate {
    let k = k.min(est.degree);
    DensityEstimate { degree: k, zeta: est.zeta[..=k].to_vec(), ..est.clone() }
}

fn check_pair(est: &DensityEstimate, basis: &GegenbauerBasis) -> Result<()> {
    if est.q != basis.q() || est.degree > basis.degree() {
        return domain(format!(
            "estimate (q={}, K={}) does not match basis (q={}, K={})",
            est.q,
            est.degree,
            basis.q(),
            basis.degree()
        ));
    }
    Ok(())
}

/// `phi_hat(x) = (1 - x^2)^q Σ_k zeta_k G_k(x)`; may be negative.
pub fn evaluate_phi_hat(est: &DensityEstimate, basis: &GegenbauerBasis, x: f64) -> Result<f64> {
    check_pair(est, basis)?;
    if !(x.abs() < 1.0) {
        return domain(format!("x must lie in (-1, 1), got {x}"));
    }
    let g = basis.eval_all(x);
    let s: f64 = est.zeta.iter().zip(&g).map(|(z, g)| z * g).sum();
    Ok(s * ((1.0 - x) * (1.0 + x)).powf(est.q))
}

/// Midpoints `x_i = -1 + (i + 1/2) 2/m`.
pub fn evaluation_grid(m: usize) -> Vec<f64> {
    (0..m).map(|i| -1.0 + (i as f64 + 0.5) * 2.0 / m as f64).collect()
}

/// `K = floor(γ ln n)`, admissible for `0 < γ < 1 / (2 ln(1 + √2))`.
pub fn select_k(n: usize, gamma: f64) -> Result<usize> {
    let bound = 1.0 / (2.0 * std::f64::consts::SQRT_2.ln_1p());
    if n < 2 {
        return domain("at least two observations are needed");
    }
    if !(gamma > 0.0 && gamma < bound) {
        return domain(format!("gamma must lie in (0, 1/(2 ln(1+√2)) = {bound:.5}), got {gamma}"));
    }
    Ok((gamma * (n as f64).ln()).floor() as usize)
}

/// Exact expansion coefficients `zeta_k = ∫ phi(x) G_k(x) dx` of a mixing law.
pub fn exact_zeta(truth: &MixingLaw, basis: &GegenbauerBasis) -> Result<Vec<f64>> {
    (0..=basis.degree())
        .map(|k| truth.moment_functional(&EdgeIntegrand::smooth(|at: &Abscissa| basis.eval_all(at.x)[k])))
        .collect()
}

/// The true density paired with a basis, for repeated ISE evaluation.
#[derive(Debug, Clone)]
pub struct IseReference {
    pub zeta: Vec<f64>,
    /// `∫ phi^2 / (1 - x^2)^q`.
    pub norm2: f64,
}

impl IseReference {
    pub fn new(truth: &MixingLaw, basis: &GegenbauerBasis) -> Result<Self> {
        let report = truth.check_conditions(basis.q());
        if !report.phicond_ok {
            return domain(format!(
                "phi^2 / (1 - x^2)^q is not integrable for q = {}; admissible range {:?}",
                basis.q(),
                report.q_admissible_range
            ));
        }
        Ok(IseReference { zeta: exact_zeta(truth, basis)?, norm2: truth.phi_sq_weighted(basis.q())? })
    }

    /// `∫ (phi_hat - phi)^2 / (1 - x^2)^q`.
    pub fn ise(&self, est: &DensityEstimate) -> f64 {
        let cross: f64 = est.zeta.iter().zip(&self.zeta).map(|(a, b)| a * b).sum();
        let own: f64 = est.zeta.iter().map(|a| a * a).sum();
        (own - 2.0 * cross + self.norm2).max(0.0)
    }
}

/// Weighted integrated squared error of an estimate against the true law.
pub fn ise(est: &DensityEstimate, basis: &GegenbauerBasis, truth: &MixingLaw) -> Result<f64> {
    check_pair(est, basis)?;
    Ok(IseReference::new(truth, basis)?.ise(est))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct MiseRow {
    pub q: f64,
    pub k: usize,
    pub mise: f64,
    /// Monte Carlo standard error of `mise`.
    pub stderr: f64,
}

/// Mean ISE over `replications` simulated panels for each `(q, K)`.
///
/// Replicate `r` simulates `template` with seed `replicate_seed(template.seed, r)`;
/// the mixing law of the template is the truth.
pub fn mise_experiment(
    template: &PanelConfig,
    q_grid: &[f64],
    k_grid: &[usize],
    replications: usize,
) -> Result<Vec<MiseRow>> {
    if replications == 0 || q_grid.is_empty() || k_grid.is_empty() {
        return domain("MISE needs at least one replicate, one q and one K");
    }
    let requested = (template.n_micro as u128 * template.n_time as u128).saturating_mul(replications as u128);
    if requested > template.budget {
        return Err(Error::Budget { requested, limit: template.budget });
    }
    let k_max = *k_grid.iter().max().expect("nonempty");
    let bases: Vec<GegenbauerBasis> = q_grid.iter().map(|&q| GegenbauerBasis::new(q, k_max)).collect::<Result<_>>()?;
    let refs: Vec<IseReference> =
        bases.iter().map(|b| IseReference::new(&template.mixing, b)).collect::<Result<_>>()?;
    let per_rep: Vec<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut cfg = template.clone();
            cfg.seed = replicate_seed(template.seed, r);
            let series = simulate_aggregate(&cfg)?.values;
            let mut out = Vec::with_capacity(q_grid.len() * k_grid.len());
            for (basis, reference) in bases.iter().zip(&refs) {
                let full = estimate(&series, basis, None)?;
                for &k in k_grid {
                    out.push(reference.ise(&truncate(&full, k)));
                }
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let rf = replications as f64;
    let mut rows = Vec::with_capacity(q_grid.len() * k_grid.len());
    for (qi, &q) in q_grid.iter().enumerate() {
        for (ki, &k) in k_grid.iter().enumerate() {
            let idx = qi * k_grid.len() + ki;
            let mean = per_rep.iter().map(|v| v[idx]).sum::<f64>() / rf;
            let var = if replications > 1 {
                per_rep.iter().map(|v| (v[idx] - mean).powi(2)).sum::<f64>() / (rf - 1.0)
            } else {
                0.0
            };
            rows.push(MiseRow { q, k, mise: mean, stderr: (var / rf).sqrt() });
        }
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct RateRow {
    pub n: usize,
    pub lag: usize,
    /// Monte Carlo variance of `r°(lag) - r°(lag + 2)` (uncentered).
    pub variance: f64,
}

/// Monte Carlo variance of uncentered lag differences `r°_n(k) - r°_n(k+2)`
/// for each sample size and lag. Each replicate simulates one path of length
/// `max(ns)` and uses its prefixes.
pub fn lag_difference_variance(
    template: &PanelConfig,
    ns: &[usize],
    lags: &[usize],
    replications: usize,
) -> Result<Vec<RateRow>> {
    if replications < 2 || ns.is_empty() || lags.is_empty() {
        return domain("need at least two replicates, one n and one lag");
    }
    let n_max = *ns.iter().max().expect("nonempty");
    let lag_max = *lags.iter().max().expect("nonempty") + 2;
    if ns.iter().any(|&n| n <= lag_max) {
        return domain(format!("every n must exceed the largest lag {lag_max}"));
    }
    let requested = (template.n_micro as u128 * n_max as u128).saturating_mul(replications as u128);
    if requested > template.budget {
        return Err(Error::Budget { requested, limit: template.budget });
    }
    let per_rep: Vec<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let mut cfg = template.clone();
            cfg.seed = replicate_seed(template.seed, r);
            cfg.n_time = n_max;
            let x = simulate_aggregate(&cfg)?.values;
            let mut out = Vec::with_capacity(ns.len() * lags.len());
            for &n in ns {
                let raw = raw_autocovs(&x[..n], lag_max)?;
                out.extend(lags.iter().map(|&k| raw[k] - raw[k + 2]));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let rf = replications as f64;
    let mut rows = Vec::new();
    for (ni, &n) in ns.iter().enumerate() {
        for (ki, &lag) in lags.iter().enumerate() {
            let idx = ni * lags.len() + ki;
            let mean = per_rep.iter().map(|v| v[idx]).sum::<f64>() / rf;
            let variance = per_rep.iter().map(|v| (v[idx] - mean).powi(2)).sum::<f64>() / (rf - 1.0);
            rows.push(RateRow { n, lag, variance });
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::LevyTriplet;

    #[test]
    fn low_degree_values() {
        let b = GegenbauerBasis::new(0.0, 3).unwrap();
        assert!((b.coefficient(0, 0) - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((b.coefficient(1, 1) - 1.5f64.sqrt()).abs() < 1e-14);
        assert_eq!(b.coefficient(1, 0), 0.0);
        let b = GegenbauerBasis::new(0.5, 0).unwrap();
        assert!((b.coefficient(0, 0) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-14);
        // Chebyshev weight
        let b = GegenbauerBasis::new(-0.5, 2).unwrap();
        let t2 = (2.0 / std::f64::consts::PI).sqrt();
        assert!((b.coefficient(2, 2) - 2.0 * t2).abs() < 1e-14 && (b.coefficient(2, 0) + t2).abs() < 1e-14);
    }

    #[test]
    fn orthonormal_and_parity() {
        for &q in &[-0.9, -0.5, 0.0, 0.5, 1.0, 2.0, 4.5] {
            let b = GegenbauerBasis::new(q, 12).unwrap();
            let g = b.gram(400).unwrap();
            assert!(max_identity_deviation(&g) < 1e-8, "q={q}");
            for k in 0..=12 {
                for j in 0..=k {
                    if (j + k) % 2 == 1 {
                        assert_eq!(b.coefficient(k, j), 0.0);
                    }
                }
            }
        }
        assert!(GegenbauerBasis::new(-1.0, 3).is_err());
        assert!(GegenbauerBasis::new(0.0, 65).is_err());
    }

    #[test]
    fn high_degree_monomials_track_the_recurrence() {
        for &q in &[-0.5, 0.5, 2.0] {
            let b = GegenbauerBasis::new(q, MAX_DEGREE).unwrap();
            for &x in &[-0.97, -0.3, 0.0, 0.41, 0.999] {
                let rec = b.eval_all(x);
                for k in [20, 40, MAX_DEGREE] {
                    let scale = rec.iter().map(|v| v.abs()).fold(1.0, f64::max);
                    // double-double Horner still cancels against coefficients near (1+√2)^k
                    let tol = if k > 40 { 1e-7 } else { 1e-10 };
                    assert!((b.eval_monomial(k, x) - rec[k]).abs() < tol * scale, "q={q} k={k} x={x}");
                }
            }
        }
    }

    #[test]
    fn handbook_normalizer_is_not_orthonormal() {
        let g = handbook_normalizer_gram(0.0, 2).unwrap();
        assert!((g[0][0] - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
        assert!(handbook_normalizer_gram(-0.5, 2).is_err());
    }

    #[test]
    fn autocov_examples() {
        let x = [1.0, 2.0, 3.0];
        let r = sample_autocovs(&x, 2).unwrap();
        assert!((r[0] - 2.0 / 3.0).abs() < 1e-15 && r[1].abs() < 1e-15 && (r[2] + 1.0 / 3.0).abs() < 1e-15);
        assert!(sample_autocov(&x, 3).is_err());
        assert_eq!(sample_autocovs(&[4.0; 10], 5).unwrap(), vec![0.0; 6]);
        let raw = raw_autocovs(&x, 1).unwrap();
        assert!((raw[0] - 14.0 / 3.0).abs() < 1e-15 && (raw[1] - 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn estimate_examples() {
        let b = GegenbauerBasis::new(0.0, 0).unwrap();
        let e = estimate(&[1.0, 2.0, 3.0], &b, None).unwrap();
        assert!((e.sigma_w2 - 1.0).abs() < 1e-15);
        assert_eq!(e.zeta[0], b.coefficient(0, 0));
        assert!(matches!(estimate(&[5.0; 20], &b, None), Err(Error::Degenerate(_))));
        let b3 = GegenbauerBasis::new(0.0, 3).unwrap();
        assert!(estimate(&[1.0, 2.0, 3.0, 4.0, 5.0], &b3, None).is_err());
        let k = estimate(&[1.0, 2.0, 3.0], &b, Some(2.0)).unwrap();
        assert_eq!(k.mode, VarianceMode::Known);
        assert!((k.zeta[0] - 0.5 * b.coefficient(0, 0)).abs() < 1e-15);
    }

    #[test]
    fn phi_hat_shape() {
        let b = GegenbauerBasis::new(1.0, 4).unwrap();
        let even = DensityEstimate {
            q: 1.0,
            degree: 4,
            zeta: vec![0.5, 0.0, 0.3, 0.0, -0.2],
            sigma_w2: 1.0,
            mode: VarianceMode::Estimated,
            n: 100,
        };
        for &x in &[0.1, 0.5, 0.93] {
            let a = evaluate_phi_hat(&even, &b, x).unwrap();
            assert!((a - evaluate_phi_hat(&even, &b, -x).unwrap()).abs() < 1e-14);
        }
        assert!(evaluate_phi_hat(&even, &b, 1.0 - 1e-12).unwrap().abs() < 1e-9);
        assert!(evaluate_phi_hat(&even, &b, 1.0).is_err());
        let grid = evaluation_grid(GRID_POINTS);
        assert_eq!(grid.len(), 512);
        assert!((grid[0] + 1.0 - 1.0 / 512.0).abs() < 1e-15);
    }

    #[test]
    fn select_k_examples() {
        assert_eq!(select_k(10_000, 0.3).unwrap(), 2);
        assert_eq!(select_k(1_000_000, 0.55).unwrap(), 7);
        assert!(select_k(10_000, 0.6).is_err());
        assert!(select_k(1, 0.3).is_err());
    }

    #[test]
    fn exact_coefficients_reconstruct() {
        let m = MixingLaw::beta_edge(0.75).unwrap();
        let b = GegenbauerBasis::new(0.5, 12).unwrap();
        let reference = IseReference::new(&m, &b).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..=12 {
            let est = DensityEstimate {
                q: 0.5,
                degree: k,
                zeta: reference.zeta[..=k].to_vec(),
                sigma_w2: 1.0,
                mode: VarianceMode::Known,
                n: 0,
            };
            let v = reference.ise(&est);
            assert!(v <= prev + 1e-14, "tail must not grow: k={k}");
            prev = v;
        }
        assert!(prev < 1e-3, "{prev}");
        // the first coefficient is the mass of phi times G_0
        assert!((reference.zeta[0] - b.coefficient(0, 0)).abs() < 1e-12);
        assert!(IseReference::new(&m, &GegenbauerBasis::new(2.6, 2).unwrap()).is_err());
    }

    #[test]
    fn estimator_is_location_scale_invariant() {
        let m = MixingLaw::beta_edge(0.75).unwrap();
        let cfg = PanelConfig::new(300, 3000, 9, m.clone(), LevyTriplet::gaussian(1.0).unwrap());
        let x = simulate_aggregate(&cfg).unwrap().values;
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.5 * v).collect();
        let b = GegenbauerBasis::new(0.5, 6).unwrap();
        let ex = estimate(&x, &b, None).unwrap();
        let ey = estimate(&y, &b, None).unwrap();
        for (a, c) in ex.zeta.iter().zip(&ey.zeta) {
            assert!((a - c).abs() < 1e-10 * (1.0 + a.abs()));
        }
        let reference = IseReference::new(&m, &b).unwrap();
        assert!((reference.ise(&ex) - reference.ise(&ey)).abs() < 1e-10);
        // ∫ phi_hat = 1
        let rule = gauss_jacobi(40, 0.5, 0.5).unwrap();
        let mass: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, w)| w * evaluate_phi_hat(&ex, &b, x).unwrap() / (1.0 - x * x).sqrt())
            .sum();
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn mise_grid_shape() {
        let m = MixingLaw::beta_edge(0.75).unwrap();
        let cfg = PanelConfig::new(100, 500, 4, m, LevyTriplet::gaussian(1.0).unwrap());
        let rows = mise_experiment(&cfg, &[0.0, 0.5], &[0, 2, 3], 2).unwrap();
        assert_eq!(rows.len(), 6);
        assert!(rows.iter().all(|r| r.mise.is_finite() && r.mise >= 0.0));
        let mut tight = cfg.clone();
        tight.budget = 1000;
        assert!(matches!(mise_experiment(&tight, &[0.5], &[2], 2), Err(Error::Budget { .. })));
    }
}
