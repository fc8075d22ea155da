//! Limit theory of the aggregate: the marginal log-characteristic function,
//! partial-sum regime constants, the regime-III stable limit and the
//! empirical scaling-exponent experiment.

use std::sync::Mutex;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::levy::{classify_regime, edge_moments, stable_omega, JumpCf, LevyTriplet, Regime, RegimeReport};
use crate::mixing::{EdgeIntegrand, MixingLaw};
use crate::panel::{simulate_aggregate, AggregatedSeries, PanelConfig};
use crate::quad::{integrate_adaptive, legendre16, Abscissa};
use crate::rng::{replicate_seed, stream, StreamDomain};
use crate::special::gamma;

/// Explicit terms summed before switching to the Euler–Maclaurin form.
const EXPLICIT_TERMS: usize = 512;
/// Jumps are treated as small once `|y| * jump_scale` is below this.
const SMALL_ARG: f64 = 0.1;
const CUMULANT_ORDERS: u32 = 40;

/// Sums `Σ_{j≥0} V_J(y b^j)` for the jump part `V_J` of a triplet.
struct GeometricJumpSum {
    cf: JumpCf,
    /// `κ_m / m!`
    scaled_cumulants: Vec<f64>,
    scale: f64,
    explicit_terms: usize,
    /// `∫_0^y V_J(u)/u du` at `y = ±theta`.
    base_integrals: Mutex<Vec<(f64, Complex64)>>,
}

impl GeometricJumpSum {
    fn new(t: &LevyTriplet, explicit_terms: usize) -> Result<Self> {
        let mut fact = 1.0;
        let mut scaled_cumulants = vec![0.0; CUMULANT_ORDERS as usize + 1];
        for m in 2..=CUMULANT_ORDERS {
            fact *= f64::from(m);
            scaled_cumulants[m as usize] = t.jump_cumulant(m) / fact;
        }
        Ok(GeometricJumpSum {
            cf: t.jump_cf()?,
            scaled_cumulants,
            scale: t.jump_scale(),
            explicit_terms,
            base_integrals: Mutex::new(Vec::new()),
        })
    }

    /// `Σ_{j≥0} V_J(y e^{-λ j})`, `λ > 0`.
    fn sum(&self, y: f64, lambda: f64) -> Result<Complex64> {
        if y == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        let ratio = y.abs() * self.scale / SMALL_ARG;
        let needed = if ratio <= 1.0 { 0.0 } else { (ratio.ln() / lambda).ceil() };
        if needed <= self.explicit_terms as f64 {
            let needed = needed as usize;
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..needed {
                acc += self.cf.eval(y * (-lambda * j as f64).exp())?;
            }
            let y0 = y * (-lambda * needed as f64).exp();
            Ok(acc + self.cumulant_tail(y0, lambda))
        } else {
            // Euler–Maclaurin: ∫_0^∞ f + f(0)/2 - f'(0)/12 with f(j) = V_J(y e^{-λj}).
            let v = self.cf.eval(y)?;
            let h = 1e-4 * y.abs();
            let dv = (self.cf.eval(y + h)? - self.cf.eval(y - h)?) / (2.0 * h);
            Ok(self.log_integral(y)? / lambda + v * 0.5 + dv * (lambda * y / 12.0))
        }
    }

    /// `Σ_{j≥0} V_J(y b^j)` by the cumulant expansion, valid for small `|y|`.
    fn cumulant_tail(&self, y: f64, lambda: f64) -> Complex64 {
        let iy = Complex64::new(0.0, y);
        let mut pow = iy;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 2..=CUMULANT_ORDERS as usize {
            pow *= iy;
            let k = self.scaled_cumulants[m];
            if k == 0.0 {
                continue;
            }
            let term = pow * (k / -(-lambda * m as f64).exp_m1());
            acc += term;
            if term.norm() < 1e-18 * acc.norm() {
                break;
            }
        }
        acc
    }

    /// `∫_0^y V_J(u)/u du`.
    fn log_integral(&self, y: f64) -> Result<Complex64> {
        let integrand = |u: f64| -> Complex64 {
            if u == 0.0 {
                Complex64::new(0.0, 0.0)
            } else {
                self.cf.eval(u).unwrap_or(Complex64::new(f64::NAN, f64::NAN)) / u
            }
        };
        {
            let cache = self.base_integrals.lock().expect("cache lock");
            if let Some(&(b, ib)) = cache.iter().find(|(b, _)| b.signum() == y.signum() && ((y - b) / b).abs() <= 0.05) {
                let g = legendre16();
                return Ok(ib + g.integrate(b, y, integrand));
            }
        }
        let value = integrate_adaptive(integrand, 0.0, y, 1e-13 * (1.0 + y.abs()), 4000)?;
        if value.re.is_nan() {
            return Err(Error::NumericFailure { what: "jump log-cf integral".into(), achieved: f64::NAN });
        }
        self.base_integrals.lock().expect("cache lock").push((y, value));
        Ok(value)
    }
}

/// `Θ(θ) = E Σ_{k≥0} V(θ a^k)`: log-characteristic function of the
/// stationary aggregate at one time point.
pub fn theta_log_cf(theta: f64, m: &MixingLaw, t: &LevyTriplet, tol: f64) -> Result<Complex64> {
    theta_log_cf_with(theta, m, t, tol, EXPLICIT_TERMS)
}

fn theta_log_cf_with(
    theta: f64,
    m: &MixingLaw,
    t: &LevyTriplet,
    tol: f64,
    explicit_terms: usize,
) -> Result<Complex64> {
    if !(tol > 0.0 && tol <= 1e-4) {
        return domain(format!("tolerance must lie in (0, 1e-4], got {tol}"));
    }
    if theta == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let mut total = Complex64::new(0.0, 0.0);
    if t.sigma() > 0.0 {
        let e: f64 = m.moment_functional(&EdgeIntegrand::with_poles(|_: &Abscissa| 1.0, 1.0, 1.0))?;
        total += -0.5 * t.sigma().powi(2) * theta * theta * e;
    }
    if t.mu() != 0.0 {
        let e: f64 = m.moment_functional(&EdgeIntegrand::with_poles(|_: &Abscissa| 1.0, 1.0, 0.0))?;
        total += Complex64::new(0.0, t.mu() * theta * e);
    }
    if t.has_jumps() {
        let sum = GeometricJumpSum::new(t, explicit_terms)?;
        let failure = Mutex::new(None);
        let record = |r: Result<Complex64>| match r {
            Ok(v) => v,
            Err(e) => {
                *failure.lock().expect("failure lock") = Some(e);
                Complex64::new(0.0, 0.0)
            }
        };
        // Σ_k V_J(θ a^k) times (1 - a^2), which stays bounded at both ends.
        let jump: Complex64 = m.moment_functional(&EdgeIntegrand::with_poles(
            |at: &Abscissa| {
                let bounded = if at.x == 0.0 {
                    record(sum.cf.eval(theta))
                } else if at.x > 0.0 {
                    record(sum.sum(theta, -(-at.omx).ln_1p()))
                } else {
                    let lambda = -2.0 * (-at.opx).ln_1p();
                    record(sum.sum(theta, lambda)) + record(sum.sum(theta * at.x, lambda))
                };
                bounded * (at.omx * at.opx)
            },
            1.0,
            1.0,
        ))?;
        if let Some(e) = failure.into_inner().expect("failure lock") {
            return Err(e);
        }
        total += jump;
    }
    Ok(total)
}

/// Terms of the partial-sum kernel summed explicitly before the smooth
/// remainder is handled by Euler–Maclaurin.
const PARTIAL_EXPLICIT: usize = 256;

/// Full log-cf `V(u)` of a triplet with a prebuilt jump part.
struct FullLogCf<'a> {
    t: &'a LevyTriplet,
    jumps: Option<&'a GeometricJumpSum>,
}

impl FullLogCf<'_> {
    fn eval(&self, u: f64) -> Result<Complex64> {
        let s = self.t.sigma();
        let mut v = Complex64::new(-0.5 * s * s * u * u, self.t.mu() * u);
        if let Some(j) = self.jumps {
            v += j.cf.eval(u)?;
        }
        Ok(v)
    }
}

/// `Σ_{j=a}^{b} f(j)` for `f` smooth on the integers, where `f(j) - limit`
/// decays like `e^{-rate j}` (`limit = None` when it does not decay within
/// the range).
fn smooth_sum(
    f: &dyn Fn(f64) -> Result<Complex64>,
    a: usize,
    b: usize,
    rate: f64,
    limit: Option<Complex64>,
) -> Result<Complex64> {
    let zero = Complex64::new(0.0, 0.0);
    if a > b {
        return Ok(zero);
    }
    if b - a < 64 {
        let mut acc = zero;
        for j in a..=b {
            acc += f(j as f64)?;
        }
        return Ok(acc);
    }
    let base = limit.unwrap_or(zero);
    let count = (b - a + 1) as f64;
    let (af, bf) = (a as f64, b as f64);
    if limit.is_some() && rate * af > 40.0 {
        return Ok(base * count);
    }
    let end = if limit.is_some() { bf.min(af + 45.0 / rate) } else { bf };
    let g = |s: f64| -> Result<Complex64> { Ok(f(s)? - base) };
    let dg = |s: f64| -> Result<Complex64> {
        let h = 0.01 * s.min(1.0 / rate.max(1e-300)).max(1e-3);
        Ok((g(s + h)? - g(s - h)?) / (2.0 * h))
    };
    // Panels double in length, capped at a few decay lengths.
    let rule = legendre16();
    let mut integral = zero;
    let mut lo = af;
    while lo < end {
        let hi = end.min(lo + lo.min(4.0 / rate.max(1e-300)));
        let mut acc = zero;
        let (half, mid) = (0.5 * (hi - lo), 0.5 * (hi + lo));
        for (&t, &w) in rule.nodes.iter().zip(&rule.weights) {
            acc += g(mid + half * t)? * w;
        }
        integral += acc * half;
        lo = hi;
    }
    let (ga, gb) = (g(af)?, if end < bf { zero } else { g(bf)? });
    let (dga, dgb) = (dg(af)?, if end < bf { zero } else { dg(bf)? });
    Ok(base * count + integral + (ga + gb) * 0.5 + (dgb - dga) / 12.0)
}

/// Log-characteristic function of the partial sum `S_n = Σ_{t=1}^n X(t)` of
/// the stationary aggregate:
/// `E[ Σ_{m=1}^n V(θ c_m(a)) + Σ_{k≥1} V(θ c_n(a) a^k) ]`,
/// `c_m(a) = (1 - a^m) / (1 - a)`.
///
/// At `n = 1` this is [`theta_log_cf`]. Long runs of the first sum are
/// handled by Euler–Maclaurin, accurate to about `1e-6` relative for
/// `|θ| ≤ 1`.
pub fn partial_sum_log_cf(theta: f64, n: usize, m: &MixingLaw, t: &LevyTriplet) -> Result<Complex64> {
    partial_sum_log_cf_with(theta, n, m, t, PARTIAL_EXPLICIT)
}

fn partial_sum_log_cf_with(
    theta: f64,
    n: usize,
    m: &MixingLaw,
    t: &LevyTriplet,
    explicit: usize,
) -> Result<Complex64> {
    if n == 0 {
        return domain("partial sums need n >= 1");
    }
    if !theta.is_finite() {
        return domain(format!("theta must be finite, got {theta}"));
    }
    if theta == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let jumps = if t.has_jumps() { Some(GeometricJumpSum::new(t, EXPLICIT_TERMS)?) } else { None };
    let v = FullLogCf { t, jumps: jumps.as_ref() };
    let s = t.sigma();
    let failure = Mutex::new(None);
    let record = |r: Result<Complex64>| match r {
        Ok(v) => v,
        Err(e) => {
            *failure.lock().expect("failure lock") = Some(e);
            Complex64::new(0.0, 0.0)
        }
    };
    let nf = n as f64;
    let body = |at: &Abscissa| -> Result<Complex64> {
        let x = at.x;
        let one_minus = at.omx;
        if x == 0.0 {
            return Ok(v.eval(theta)? * nf);
        }
        // Decay rate of |x|^m and the kernel c(m) for real m.
        let rate = if x > 0.0 { -(-one_minus).ln_1p() } else { -(-at.opx).ln_1p() };
        let sign = |parity: usize| if x > 0.0 || parity % 2 == 0 { 1.0 } else { -1.0 };
        let c = |mm: f64, parity: usize| -> f64 {
            if x > 0.0 {
                -(-rate * mm).exp_m1() / one_minus
            } else {
                (1.0 - sign(parity) * (-rate * mm).exp()) / one_minus
            }
        };
        let head = explicit.min(n);
        let mut acc = Complex64::new(0.0, 0.0);
        for mm in 1..=head {
            acc += v.eval(theta * c(mm as f64, mm))?;
        }
        if head < n {
            let decays = rate * nf > 45.0;
            let limit = if decays { Some(v.eval(theta / one_minus)?) } else { None };
            if x > 0.0 {
                acc += smooth_sum(&|s| v.eval(theta * c(s, 0)), head + 1, n, rate, limit)?;
            } else {
                // m = 2j + parity, each class smooth in j.
                for (parity, lo) in [(0, (head + 2) / 2), (1, (head + 1) / 2)] {
                    let hi = (n - parity) / 2;
                    let term = |j: f64| v.eval(theta * c(2.0 * j + parity as f64, parity));
                    acc += smooth_sum(&term, lo, hi, 2.0 * rate, limit)?;
                }
            }
        }
        // Tail Σ_{k≥1} V(y x^k) with y = θ c_n.
        let y = theta * c(nf, n);
        let x2 = x * x / (one_minus * at.opx);
        acc += Complex64::new(-0.5 * s * s * y * y * x2, t.mu() * y * x / one_minus);
        if let Some(j) = &jumps {
            if x > 0.0 {
                acc += j.sum(y * x, rate)?;
            } else {
                acc += j.sum(y * x, 2.0 * rate)? + j.sum(y * x * x, 2.0 * rate)?;
            }
        }
        Ok(acc)
    };
    let total: Complex64 = m.moment_functional(&EdgeIntegrand::with_poles(
        |at: &Abscissa| record(body(at)) * (at.omx * at.opx),
        1.0,
        1.0,
    ))?;
    if let Some(e) = failure.into_inner().expect("failure lock") {
        return Err(e);
    }
    Ok(total)
}

/// Time-average estimate of a characteristic function value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfEstimate {
    pub theta: f64,
    pub value: Complex64,
    /// Batch-means standard error of `value`.
    pub stderr: f64,
}

const CF_BATCHES: usize = 32;
const MIN_CF_LENGTH: usize = 1000;

/// `(1/n) Σ_t exp(iθ x_t)` for each `θ`.
pub fn empirical_cf(series: &[f64], thetas: &[f64]) -> Result<Vec<CfEstimate>> {
    let n = series.len();
    if n < MIN_CF_LENGTH {
        return domain(format!("empirical cf needs at least {MIN_CF_LENGTH} points, got {n}"));
    }
    let batch = n / CF_BATCHES;
    Ok(thetas
        .iter()
        .map(|&theta| {
            let terms = |xs: &[f64]| xs.iter().map(|&x| Complex64::from_polar(1.0, theta * x)).sum::<Complex64>();
            let value = terms(series) / n as f64;
            let means: Vec<Complex64> = (0..CF_BATCHES)
                .map(|b| terms(&series[b * batch..(b + 1) * batch]) / batch as f64)
                .collect();
            let grand = means.iter().sum::<Complex64>() / CF_BATCHES as f64;
            let var = means.iter().map(|m| (m - grand).norm_sqr()).sum::<f64>() / (CF_BATCHES - 1) as f64;
            CfEstimate { theta, value, stderr: (var / CF_BATCHES as f64).sqrt() }
        })
        .collect())
}

/// `σ^2 ψ(1) Γ(β - 2)`, the variance at time one of the fractional Brownian
/// limit in the Gaussian long-memory regime.
pub fn fbm_variance_constant(beta: f64, sigma: f64, psi1: f64) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return domain(format!("edge exponent must lie in (0, 1), got {beta}"));
    }
    Ok(sigma * sigma * psi1 * gamma(beta - 2.0))
}

/// Log-cf at time `tau` of the `(1+β)`-stable Lévy limit of the pure-jump
/// regime with finite moments: `-τ |θ|^{1+β} ψ(1) ω(θ; 1+β, π_β⁺, π_β⁻)`.
///
/// Positive jumps enter the first tail constant of `ω`, the one multiplying
/// `-i sign(θ) sin`, matching the convention of the small-jump limit.
pub fn regime_iii_limit_cf(theta: f64, tau: f64, beta: f64, t: &LevyTriplet, psi1: f64) -> Result<Complex64> {
    if !(beta > 0.0 && beta < 1.0) {
        return domain(format!("edge exponent must lie in (0, 1), got {beta}"));
    }
    if !(tau > 0.0) {
        return domain(format!("time must be positive, got {tau}"));
    }
    if t.sigma() != 0.0 {
        return domain("the stable limit needs a triplet without Gaussian part");
    }
    if !t.has_jumps() {
        return domain("the stable limit needs a nonzero Lévy measure");
    }
    if theta == 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let (plus, minus) = edge_moments(beta, t)?;
    let omega = stable_omega(theta, 1.0 + beta, plus, minus)?;
    Ok(-omega * (tau * theta.abs().powf(1.0 + beta) * psi1))
}

/// Regime of the aggregate together with the constants of its limit.
pub fn classify(m: &MixingLaw, t: &LevyTriplet) -> Result<RegimeReport> {
    let beta = m
        .edge_beta()
        .ok_or_else(|| Error::Domain("regimes are defined for mixing laws with an edge exponent".into()))?;
    let mut report = classify_regime(beta, t)?;
    let psi1 = m.psi_at_one()?;
    report.constants.insert("psi1".into(), psi1);
    match report.regime {
        Regime::I => {
            report
                .constants
                .insert("fbm_variance".into(), fbm_variance_constant(beta, t.sigma(), psi1)?);
        }
        Regime::IV => {
            let s2 = t.second_moment();
            report.constants.insert("sigma_phi2".into(), m.sigma_phi2(s2)?);
            report.constants.insert("long_run_variance".into(), m.long_run_variance(s2)?);
        }
        _ => {}
    }
    Ok(report)
}

/// Statistic of `S_n` over replicates whose growth in `n` is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScaleStat {
    MedianAbs,
    Iqr,
    StdDev,
}

impl ScaleStat {
    pub fn apply(&self, xs: &[f64]) -> f64 {
        self.with_leave_one_out(xs).0
    }

    /// The statistic on `xs` and on `xs` with each entry removed in turn.
    pub fn with_leave_one_out(&self, xs: &[f64]) -> (f64, Vec<f64>) {
        let n = xs.len();
        match self {
            ScaleStat::MedianAbs | ScaleStat::Iqr => {
                let vals: Vec<f64> = match self {
                    ScaleStat::MedianAbs => xs.iter().map(|x| x.abs()).collect(),
                    _ => xs.to_vec(),
                };
                let mut order: Vec<usize> = (0..n).collect();
                order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
                let sorted: Vec<f64> = order.iter().map(|&i| vals[i]).collect();
                let mut rank = vec![0; n];
                for (k, &i) in order.iter().enumerate() {
                    rank[i] = k;
                }
                let stat = |skip: Option<usize>| match self {
                    ScaleStat::MedianAbs => quantile_sorted(&sorted, skip, 0.5),
                    _ => quantile_sorted(&sorted, skip, 0.75) - quantile_sorted(&sorted, skip, 0.25),
                };
                (stat(None), rank.iter().map(|&k| stat(Some(k))).collect())
            }
            ScaleStat::StdDev => {
                let sum: f64 = xs.iter().sum();
                let sq: f64 = xs.iter().map(|x| x * x).sum();
                let sd = |s: f64, q: f64, m: usize| {
                    let mf = m as f64;
                    ((q - s * s / mf).max(0.0) / (mf - 1.0)).sqrt()
                };
                let mean = sum / n as f64;
                let full = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
                (full, xs.iter().map(|x| sd(sum - x, sq - x * x, n - 1)).collect())
            }
        }
    }
}

/// Type-7 quantile of `sorted`, optionally with the entry at rank `skip` removed.
fn quantile_sorted(sorted: &[f64], skip: Option<usize>, p: f64) -> f64 {
    let len = sorted.len() - usize::from(skip.is_some());
    let at = |k: usize| match skip {
        Some(s) if k >= s => sorted[k + 1],
        _ => sorted[k],
    };
    let h = (len - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    at(lo) + (h - lo as f64) * (at(hi) - at(lo))
}

/// Paths fed to the scaling experiment.
pub trait PathSource: Sync {
    /// Path of length `len` for replicate `replicate`.
    fn path(&self, replicate: u64, len: usize) -> Result<Vec<f64>>;

    /// Work units (unit-steps) needed for one path of length `len`.
    fn cells(&self, len: usize) -> u128 {
        len as u128
    }

    fn budget(&self) -> u128 {
        u128::MAX
    }
}

/// Aggregates of a simulated panel; replicate `r` uses seed
/// `replicate_seed(template.seed, r)`.
#[derive(Debug, Clone)]
pub struct PanelSource {
    pub template: PanelConfig,
}

impl PanelSource {
    pub fn config_for(&self, replicate: u64, len: usize) -> PanelConfig {
        let mut cfg = self.template.clone();
        cfg.seed = replicate_seed(self.template.seed, replicate);
        cfg.n_time = len;
        cfg
    }

    pub fn series(&self, replicate: u64, len: usize) -> Result<AggregatedSeries> {
        simulate_aggregate(&self.config_for(replicate, len))
    }
}

impl PathSource for PanelSource {
    fn path(&self, replicate: u64, len: usize) -> Result<Vec<f64>> {
        Ok(self.series(replicate, len)?.values)
    }

    fn cells(&self, len: usize) -> u128 {
        self.template.n_micro as u128 * len as u128
    }

    fn budget(&self) -> u128 {
        self.template.budget
    }
}

/// Independent standard normal values.
#[derive(Debug, Clone, Copy)]
pub struct IidNormalSource {
    pub seed: u64,
}

impl PathSource for IidNormalSource {
    fn path(&self, replicate: u64, len: usize) -> Result<Vec<f64>> {
        let mut rng = stream(self.seed, StreamDomain::Replicates, replicate);
        Ok((0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingExperiment {
    pub n_grid: Vec<usize>,
    pub replications: usize,
    pub scale_stat: ScaleStat,
    /// `sums[r][g]` is `S_n` for replicate `r` at `n = n_grid[g]`.
    pub sums: Vec<Vec<f64>>,
    /// Scale statistic per grid point.
    pub scales: Vec<f64>,
    pub exponent: f64,
    /// Jackknife (leave one replicate out) standard error of `exponent`.
    pub stderr: f64,
}

pub const MIN_REPLICATIONS: usize = 4;

/// Fits the growth exponent of partial sums `S_n = Σ_{t≤n} x_t`.
///
/// Each replicate contributes one path of length `max(n_grid)`; its nested
/// partial sums give `S_n` at every grid point. The exponent is the
/// least-squares slope of `log scale(S_n)` on `log n` over the largest half
/// of the grid.
pub fn run_scaling_experiment<S: PathSource>(
    source: &S,
    n_grid: &[usize],
    replications: usize,
    scale_stat: ScaleStat,
) -> Result<ScalingExperiment> {
    if n_grid.len() < 2 || n_grid[0] == 0 || n_grid.windows(2).any(|w| w[1] <= w[0]) {
        return domain("n grid must be strictly increasing with at least two positive entries");
    }
    if replications < MIN_REPLICATIONS {
        return domain(format!("at least {MIN_REPLICATIONS} replications are needed, got {replications}"));
    }
    let max_n = *n_grid.last().expect("nonempty grid");
    let requested = source.cells(max_n).saturating_mul(replications as u128);
    if requested > source.budget() {
        return Err(Error::Budget { requested, limit: source.budget() });
    }
    let sums: Vec<Vec<f64>> = (0..replications as u64)
        .into_par_iter()
        .map(|r| -> Result<Vec<f64>> {
            let path = source.path(r, max_n)?;
            let mut out = Vec::with_capacity(n_grid.len());
            let mut acc = 0.0;
            let mut t = 0;
            for &n in n_grid {
                while t < n {
                    acc += path[t];
                    t += 1;
                }
                out.push(acc);
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let first = n_grid.len() - n_grid.len().div_ceil(2);
    let mut scales = Vec::with_capacity(n_grid.len());
    let mut dropped = Vec::with_capacity(n_grid.len());
    for g in 0..n_grid.len() {
        let column: Vec<f64> = sums.iter().map(|s| s[g]).collect();
        let (full, loo) = scale_stat.with_leave_one_out(&column);
        scales.push(full);
        dropped.push(loo);
    }
    let positive = |v: &f64| *v > 0.0 && v.is_finite();
    if !scales[first..].iter().all(positive) || !dropped[first..].iter().flatten().all(positive) {
        return Err(Error::Degenerate("scale statistic of partial sums is zero".into()));
    }
    let xs: Vec<f64> = n_grid[first..].iter().map(|&n| (n as f64).ln()).collect();
    let slope = |col: &dyn Fn(usize) -> f64| {
        let ys: Vec<f64> = (first..n_grid.len()).map(|g| col(g).ln()).collect();
        ols_slope(&xs, &ys)
    };
    let exponent = slope(&|g| scales[g]);
    let leave_out: Vec<f64> = (0..replications).map(|r| slope(&|g| dropped[g][r])).collect();
    let mean = leave_out.iter().sum::<f64>() / replications as f64;
    let rf = replications as f64;
    let stderr = ((rf - 1.0) / rf * leave_out.iter().map(|v| (v - mean).powi(2)).sum::<f64>()).sqrt();
    Ok(ScalingExperiment {
        n_grid: n_grid.to_vec(),
        replications,
        scale_stat,
        sums,
        scales,
        exponent,
        stderr,
    })
}

/// Least-squares slope of `ys` on `xs`.
pub fn ols_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::levy::JumpFamily;

    /// Partial-sum log-cf for a point mass by direct summation.
    fn brute_partial(theta: f64, n: usize, c: f64, t: &LevyTriplet) -> Complex64 {
        let v = |u: f64| t.v_log_cf(u).unwrap();
        let kernel = |m: usize| (1.0 - c.powi(m as i32)) / (1.0 - c);
        let mut acc: Complex64 = (1..=n).map(|m| v(theta * kernel(m))).sum();
        let y = theta * kernel(n);
        let mut p = c;
        while (y * p).abs() > 1e-13 {
            acc += v(y * p);
            p *= c;
        }
        acc
    }

    #[test]
    fn partial_sum_cf_matches_point_mass_sums() {
        let gamma = LevyTriplet::centered_gamma(1.0, 1.0).unwrap();
        let ts = LevyTriplet::truncated_stable(1.8, 1.0, 0.5, 1.0).unwrap();
        let mixed = LevyTriplet::new(0.3, 0.7, JumpFamily::CenteredGamma { shape: 2.0, scale: 0.5 }).unwrap();
        for (c, th, t) in [
            (0.9, 0.2, &gamma),
            (-0.7, 0.5, &ts),
            (0.999, 0.05, &ts),
            (-0.995, 0.1, &gamma),
            (0.99999, 0.01, &gamma),
            (0.95, 0.3, &mixed),
        ] {
            let law = MixingLaw::point_mass(c).unwrap();
            for n in [1, 300, 3000] {
                let got = partial_sum_log_cf(th, n, &law, t).unwrap();
                let want = brute_partial(th, n, c, t);
                assert!((got - want).norm() < 1e-6 * want.norm().max(1e-3), "c={c} n={n}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn partial_sum_cf_reduces_to_marginal_at_one() {
        let law = MixingLaw::beta_edge(0.75).unwrap();
        for t in [
            LevyTriplet::centered_gamma(1.0, 1.0).unwrap(),
            LevyTriplet::truncated_stable(1.8, 1.0, 1.0, 1.0).unwrap(),
            LevyTriplet::new(0.2, 1.0, JumpFamily::NoJumps).unwrap(),
        ] {
            for th in [0.3, 1.0] {
                let a = partial_sum_log_cf(th, 1, &law, &t).unwrap();
                let b = theta_log_cf(th, &law, &t, 1e-10).unwrap();
                assert!((a - b).norm() < 1e-8 * b.norm(), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn partial_sum_cf_gaussian_variance() {
        let g = LevyTriplet::gaussian(1.0).unwrap();
        for beta in [0.5, 1.5] {
            let law = MixingLaw::beta_edge(beta).unwrap();
            let n = 3000;
            let r: Vec<f64> = (0..n as u32).map(|k| law.theoretical_r(k, 1.0).unwrap()).collect();
            let var = n as f64 * r[0] + 2.0 * (1..n).map(|k| (n - k) as f64 * r[k]).sum::<f64>();
            let th = 0.01;
            let got = partial_sum_log_cf(th, n, &law, &g).unwrap();
            let want = -0.5 * th * th * var;
            assert!(((got.re - want) / want).abs() < 1e-6 && got.im.abs() < 1e-9, "beta={beta}: {got} vs {want}");
            // the accelerated sum against the fully explicit one
            let slow = partial_sum_log_cf_with(th, n, &law, &g, n).unwrap();
            assert!((got - slow).norm() < 1e-7 * slow.norm());
        }
    }

    #[test]
    fn point_mass_cf() {
        let g = LevyTriplet::gaussian(1.0).unwrap();
        let v = theta_log_cf(1.0, &MixingLaw::point_mass(0.5).unwrap(), &g, 1e-8).unwrap();
        assert!((v - Complex64::new(-2.0 / 3.0, 0.0)).norm() < 1e-14);
        let t = LevyTriplet::centered_gamma(1.0, 1.0).unwrap();
        let zero = MixingLaw::point_mass(0.0).unwrap();
        assert!((theta_log_cf(1.3, &zero, &t, 1e-8).unwrap() - t.v_log_cf(1.3).unwrap()).norm() < 1e-14);
        for &(c, th) in &[(0.9, 2.0), (-0.7, 1.0), (0.999, 0.5), (-0.995, 3.0)] {
            let m = MixingLaw::point_mass(c).unwrap();
            let mut brute = Complex64::new(0.0, 0.0);
            let mut y: f64 = th;
            for _ in 0..200_000 {
                brute += t.v_log_cf(y).unwrap();
                y *= c;
                if y.abs() < 1e-300 {
                    break;
                }
            }
            let v = theta_log_cf(th, &m, &t, 1e-8).unwrap();
            assert!((v - brute).norm() < 1e-9 * brute.norm(), "c={c}: {v} vs {brute}");
        }
    }

    #[test]
    fn euler_maclaurin_branch_agrees_with_explicit_sums() {
        for t in [
            LevyTriplet::centered_gamma(1.0, 1.0).unwrap(),
            LevyTriplet::truncated_stable(1.5, 1.0, 0.5, 1.0).unwrap(),
        ] {
            let fast = GeometricJumpSum::new(&t, EXPLICIT_TERMS).unwrap();
            let slow = GeometricJumpSum::new(&t, 200_000).unwrap();
            for &(y, lambda) in &[(2.0, 1e-3), (-3.0, 2e-3), (0.5, 1e-4), (40.0, 1e-3)] {
                let a = fast.sum(y, lambda).unwrap();
                let b = slow.sum(y, lambda).unwrap();
                assert!((a - b).norm() < 1e-9 * b.norm(), "{t:?} y={y} λ={lambda}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn cf_is_hermitian_and_curvature_is_variance() {
        let m = MixingLaw::beta_edge(0.75).unwrap();
        let t = LevyTriplet::new(0.0, 0.5, crate::levy::JumpFamily::CenteredGamma { shape: 1.0, scale: 1.0 }).unwrap();
        let a = theta_log_cf(0.8, &m, &t, 1e-8).unwrap();
        let b = theta_log_cf(-0.8, &m, &t, 1e-8).unwrap();
        assert!((a - b.conj()).norm() < 1e-12);
        assert_eq!(theta_log_cf(0.0, &m, &t, 1e-8).unwrap(), Complex64::new(0.0, 0.0));
        let h = 1e-3;
        let d2 = (theta_log_cf(h, &m, &t, 1e-8).unwrap().re * 2.0) / (h * h);
        let var = m.theoretical_r(0, t.second_moment()).unwrap();
        assert!((-d2 / var - 1.0).abs() < 1e-4, "{} vs {var}", -d2);
        assert!(theta_log_cf(1.0, &m, &t, 1e-3).is_err());
    }

    #[test]
    fn empirical_cf_basics() {
        let c = vec![0.7; 2000];
        let e = empirical_cf(&c, &[0.0, 1.5]).unwrap();
        assert_eq!(e[0].value, Complex64::new(1.0, 0.0));
        assert!((e[1].value - Complex64::from_polar(1.0, 1.05)).norm() < 1e-12);
        let n = 100_000;
        let xs = IidNormalSource { seed: 3 }.path(0, n).unwrap();
        let e = empirical_cf(&xs, &[1.0]).unwrap();
        assert!((e[0].value - Complex64::new((-0.5f64).exp(), 0.0)).norm() < 3.0 / (n as f64).sqrt());
        assert!(empirical_cf(&xs[..10], &[1.0]).is_err());
    }

    #[test]
    fn fbm_constant() {
        let v = fbm_variance_constant(0.5, 1.0, 1.0).unwrap();
        assert!((v - 4.0 * std::f64::consts::PI.sqrt() / 3.0).abs() < 1e-12);
        assert_eq!(fbm_variance_constant(0.5, 0.0, 1.0).unwrap(), 0.0);
        let v2 = fbm_variance_constant(0.3, 2.0, 1.7).unwrap();
        assert!((v2 / fbm_variance_constant(0.3, 1.0, 1.7).unwrap() - 4.0).abs() < 1e-12);
        assert!(fbm_variance_constant(1.2, 1.0, 1.0).is_err());
    }

    /// `ψ(1) ∫_0^∞ V(θy) y^{-2-β} dy` by direct quadrature.
    fn stable_limit_by_quadrature(theta: f64, beta: f64, t: &LevyTriplet, psi1: f64) -> Complex64 {
        let cf = t.jump_cf().unwrap();
        let f = |y: f64| -> Complex64 {
            if y == 0.0 {
                return Complex64::new(0.0, 0.0);
            }
            cf.eval(theta * y).unwrap() * y.powf(-2.0 - beta)
        };
        // y = s^2 near 0 and y = 1/s beyond 1 keep both pieces smooth
        let near = integrate_adaptive(|s: f64| f(s * s) * (2.0 * s), 0.0, 1.0, 1e-12, 4000).unwrap();
        let far = integrate_adaptive(
            |s: f64| if s == 0.0 { Complex64::new(0.0, 0.0) } else { f(1.0 / s) / (s * s) },
            0.0,
            1.0,
            1e-12,
            4000,
        )
        .unwrap();
        (near + far) * psi1
    }

    #[test]
    fn stable_limit_matches_direct_integral() {
        let beta = 0.5;
        for t in [
            LevyTriplet::centered_gamma(1.0, 1.0).unwrap(),
            LevyTriplet::truncated_stable(1.2, 1.0, 0.3, 2.0).unwrap(),
        ] {
            for &th in &[1.0, -0.6] {
                let a = regime_iii_limit_cf(th, 1.0, beta, &t, 1.3).unwrap();
                let b = stable_limit_by_quadrature(th, beta, &t, 1.3);
                assert!((a - b).norm() < 1e-7 * b.norm(), "θ={th}: {a} vs {b}");
            }
        }
        let g = LevyTriplet::centered_gamma(1.0, 1.0).unwrap();
        assert_eq!(regime_iii_limit_cf(0.0, 1.0, beta, &g, 1.0).unwrap(), Complex64::new(0.0, 0.0));
        let one = regime_iii_limit_cf(0.7, 1.0, beta, &g, 1.0).unwrap();
        let two = regime_iii_limit_cf(0.7, 2.0, beta, &g, 1.0).unwrap();
        assert!((two - one * 2.0).norm() < 1e-14);
        assert!(regime_iii_limit_cf(0.7, 1.0, beta, &LevyTriplet::gaussian(1.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn classification_constants() {
        let m = MixingLaw::beta_edge(0.5).unwrap();
        let r = classify(&m, &LevyTriplet::gaussian(1.0).unwrap()).unwrap();
        assert_eq!(r.regime, Regime::I);
        let psi1 = 1.5 * 2.5 / 2f64.powf(1.5);
        assert!((r.constants["fbm_variance"] - psi1 * gamma(-1.5)).abs() < 1e-12);
        let r = classify(&MixingLaw::beta_edge(1.5).unwrap(), &LevyTriplet::gaussian(1.0).unwrap()).unwrap();
        assert_eq!(r.regime, Regime::IV);
        assert!((r.constants["sigma_phi2"] - 2.0 * r.constants["long_run_variance"]).abs() < 1e-12);
        assert!(classify(&MixingLaw::point_mass(0.1).unwrap(), &LevyTriplet::gaussian(1.0).unwrap()).is_err());
    }

    #[test]
    fn clt_oracle_recovers_one_half() {
        let grid: Vec<usize> = (8..=14).map(|k| 1usize << k).collect();
        // the median-based slope has sd near 0.9/sqrt(R) on this grid
        let e = run_scaling_experiment(&IidNormalSource { seed: 17 }, &grid, 4000, ScaleStat::MedianAbs).unwrap();
        assert!((e.exponent - 0.5).abs() < 0.03, "{} ± {}", e.exponent, e.stderr);
        assert!(e.stderr > 0.005 && e.stderr < 0.03, "{}", e.stderr);
        assert_eq!(e.sums.len(), 4000);
        let e = run_scaling_experiment(&IidNormalSource { seed: 18 }, &grid, 1000, ScaleStat::StdDev).unwrap();
        assert!((e.exponent - 0.5).abs() < 0.03, "{} ± {}", e.exponent, e.stderr);
    }

    #[test]
    fn scale_statistics_and_guards() {
        let xs = [-3.0, -1.0, 0.5, 2.0, 4.0];
        assert_eq!(ScaleStat::MedianAbs.apply(&xs), 2.0);
        assert!((ScaleStat::Iqr.apply(&xs) - 3.0).abs() < 1e-15);
        assert!((ScaleStat::StdDev.apply(&[1.0, 3.0]) - 2f64.sqrt()).abs() < 1e-15);
        for stat in [ScaleStat::MedianAbs, ScaleStat::Iqr, ScaleStat::StdDev] {
            let (_, loo) = stat.with_leave_one_out(&xs);
            for (i, v) in loo.iter().enumerate() {
                let mut rest = xs.to_vec();
                rest.remove(i);
                assert!((v - stat.apply(&rest)).abs() < 1e-12, "{stat:?} {i}");
            }
        }
        struct Zero;
        impl PathSource for Zero {
            fn path(&self, _: u64, len: usize) -> Result<Vec<f64>> {
                Ok(vec![0.0; len])
            }
        }
        let grid = [16, 32, 64, 128];
        assert!(matches!(
            run_scaling_experiment(&Zero, &grid, 10, ScaleStat::MedianAbs),
            Err(Error::Degenerate(_))
        ));
        assert!(run_scaling_experiment(&Zero, &[32, 16], 10, ScaleStat::MedianAbs).is_err());
        assert!(run_scaling_experiment(&Zero, &grid, 2, ScaleStat::MedianAbs).is_err());
    }
}
