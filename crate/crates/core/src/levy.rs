//! Infinitely divisible laws given by a characteristic triplet, their
//! log-characteristic functions, Lévy-measure functionals, increment
//! samplers and the partial-sum regime classifier.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Gamma, Poisson, StandardNormal};

use crate::error::{domain, Error, Result};
use crate::quad::{gauss_jacobi, integrate_adaptive, Rule};
use crate::special::gamma;

/// Parametric Lévy measures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpFamily {
    NoJumps,
    /// `Gamma(shape, scale) - shape*scale`; Lévy density `shape x^-1 e^{-x/scale}` on `x > 0`.
    CenteredGamma { shape: f64, scale: f64 },
    /// Lévy density `alpha c± |x|^{-1-alpha}` for `0 < ±x <= cutoff`, zero beyond.
    TruncatedStable {
        alpha: f64,
        c_plus: f64,
        c_minus: f64,
        cutoff: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

/// Characteristic triplet `(mu, sigma, pi)` of an infinitely divisible law
/// with finite variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevyTriplet {
    mu: f64,
    sigma: f64,
    jumps: JumpFamily,
}

impl LevyTriplet {
    pub fn new(mu: f64, sigma: f64, jumps: JumpFamily) -> Result<Self> {
        if !mu.is_finite() {
            return domain("drift must be finite");
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return domain(format!("sigma must be a finite nonnegative number, got {sigma}"));
        }
        match jumps {
            JumpFamily::NoJumps => {}
            JumpFamily::CenteredGamma { shape, scale } => {
                if !(shape > 0.0 && shape.is_finite() && scale > 0.0 && scale.is_finite()) {
                    return domain(format!(
                        "gamma jumps need shape > 0 and scale > 0, got shape={shape}, scale={scale}"
                    ));
                }
            }
            JumpFamily::TruncatedStable { alpha, c_plus, c_minus, cutoff } => {
                if !(alpha > 0.0 && alpha < 2.0) {
                    return domain(format!("stable index must lie in (0, 2), got {alpha}"));
                }
                if !(c_plus >= 0.0 && c_minus >= 0.0 && c_plus + c_minus > 0.0) {
                    return domain(format!(
                        "tail constants must be nonnegative with positive sum, got c+={c_plus}, c-={c_minus}"
                    ));
                }
                if !(cutoff > 0.0 && cutoff.is_finite()) {
                    return domain(format!("cutoff must be positive, got {cutoff}"));
                }
            }
        }
        Ok(LevyTriplet { mu, sigma, jumps })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        Self::new(0.0, sigma, JumpFamily::NoJumps)
    }

    pub fn centered_gamma(shape: f64, scale: f64) -> Result<Self> {
        Self::new(0.0, 0.0, JumpFamily::CenteredGamma { shape, scale })
    }

    pub fn truncated_stable(alpha: f64, c_plus: f64, c_minus: f64, cutoff: f64) -> Result<Self> {
        Self::new(0.0, 0.0, JumpFamily::TruncatedStable { alpha, c_plus, c_minus, cutoff })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn jumps(&self) -> JumpFamily {
        self.jumps
    }

    pub fn has_jumps(&self) -> bool {
        !matches!(self.jumps, JumpFamily::NoJumps)
    }

    /// `sigma^2 + ∫ x^2 pi(dx)`, the variance of the law.
    pub fn second_moment(&self) -> f64 {
        self.sigma * self.sigma + self.levy_moment(2.0).expect("second moment is always finite")
    }

    /// Typical jump size, used to decide when a cumulant expansion of the
    /// jump part is accurate.
    pub fn jump_scale(&self) -> f64 {
        match self.jumps {
            JumpFamily::NoJumps => 0.0,
            JumpFamily::CenteredGamma { scale, .. } => scale,
            JumpFamily::TruncatedStable { cutoff, .. } => cutoff,
        }
    }

    /// `V(theta)`: the log-characteristic function.
    pub fn v_log_cf(&self, theta: f64) -> Result<Complex64> {
        let gauss = Complex64::new(-0.5 * self.sigma * self.sigma * theta * theta, self.mu * theta);
        Ok(gauss + self.jump_cf()?.eval(theta)?)
    }

    /// Evaluator for the compensated jump integral `∫(e^{iθx} - 1 - iθx) pi(dx)`.
    pub fn jump_cf(&self) -> Result<JumpCf> {
        JumpCf::new(self)
    }

    /// Tail mass `Π^side(x)` of the Lévy measure beyond `x` on one side.
    pub fn pi_tail(&self, x: f64, side: Side) -> Result<f64> {
        if !(x > 0.0) {
            return domain(format!("tail argument must be positive, got {x}"));
        }
        Ok(match (self.jumps, side) {
            (JumpFamily::NoJumps, _) => 0.0,
            (JumpFamily::CenteredGamma { shape, scale }, Side::Plus) => {
                shape * crate::special::exp_integral_e1(x / scale)
            }
            (JumpFamily::CenteredGamma { .. }, Side::Minus) => 0.0,
            (JumpFamily::TruncatedStable { alpha, c_plus, c_minus, cutoff }, side) => {
                let c = if side == Side::Plus { c_plus } else { c_minus };
                if x >= cutoff {
                    0.0
                } else {
                    c * (x.powf(-alpha) - cutoff.powf(-alpha))
                }
            }
        })
    }

    /// `∫ |x|^p pi(dx)`.
    pub fn levy_moment(&self, p: f64) -> Result<f64> {
        Ok(self.one_sided_moment(p, Side::Plus)? + self.one_sided_moment(p, Side::Minus)?)
    }

    /// `∫_{±x>0} |x|^p pi(dx)`.
    pub fn one_sided_moment(&self, p: f64, side: Side) -> Result<f64> {
        if !(p > 0.0) {
            return domain(format!("moment order must be positive, got {p}"));
        }
        Ok(match (self.jumps, side) {
            (JumpFamily::NoJumps, _) => 0.0,
            (JumpFamily::CenteredGamma { shape, scale }, Side::Plus) => {
                shape * scale.powf(p) * gamma(p)
            }
            (JumpFamily::CenteredGamma { .. }, Side::Minus) => 0.0,
            (JumpFamily::TruncatedStable { alpha, c_plus, c_minus, cutoff }, side) => {
                let c = if side == Side::Plus { c_plus } else { c_minus };
                if c == 0.0 {
                    0.0
                } else if p <= alpha {
                    return domain(format!(
                        "moment of order {p} diverges at the origin for stable index {alpha}"
                    ));
                } else {
                    c * alpha * cutoff.powf(p - alpha) / (p - alpha)
                }
            }
        })
    }

    /// Signed moment `∫ x^m pi(dx)`, the `m`-th cumulant of the jump part.
    pub fn jump_cumulant(&self, m: u32) -> f64 {
        let p = f64::from(m);
        let plus = self.one_sided_moment(p, Side::Plus).unwrap_or(f64::NAN);
        let minus = self.one_sided_moment(p, Side::Minus).unwrap_or(f64::NAN);
        if m % 2 == 0 {
            plus + minus
        } else {
            plus - minus
        }
    }

    /// Index of the small-jump behaviour `Π(x) ~ x^{-alpha}` near the origin,
    /// when the family has one.
    pub fn small_jump_index(&self) -> Option<f64> {
        match self.jumps {
            JumpFamily::TruncatedStable { alpha, .. } => Some(alpha),
            _ => None,
        }
    }
}

/// Fixed nodes used for the near-origin part of truncated-stable integrals.
const NEAR_NODES: usize = 30;
const TAIL_REL_TOL: f64 = 1e-13;
const RAY_LENGTH: f64 = 60.0;

/// Precomputed evaluator for the jump part of `V`.
#[derive(Debug, Clone)]
pub struct JumpCf {
    kind: JumpCfKind,
}

#[derive(Debug, Clone)]
enum JumpCfKind {
    None,
    Gamma { shape: f64, scale: f64 },
    Stable { alpha: f64, c_sum: f64, c_diff: f64, cutoff: f64, near: Rule },
}

impl JumpCf {
    fn new(t: &LevyTriplet) -> Result<Self> {
        let kind = match t.jumps {
            JumpFamily::NoJumps => JumpCfKind::None,
            JumpFamily::CenteredGamma { shape, scale } => JumpCfKind::Gamma { shape, scale },
            JumpFamily::TruncatedStable { alpha, c_plus, c_minus, cutoff } => JumpCfKind::Stable {
                alpha,
                c_sum: c_plus + c_minus,
                c_diff: c_plus - c_minus,
                cutoff,
                near: gauss_jacobi(NEAR_NODES, 0.0, 1.0 - alpha)?,
            },
        };
        Ok(JumpCf { kind })
    }

    pub fn eval(&self, theta: f64) -> Result<Complex64> {
        if theta == 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        match &self.kind {
            JumpCfKind::None => Ok(Complex64::new(0.0, 0.0)),
            JumpCfKind::Gamma { shape, scale } => Ok(gamma_jump_cf(theta * scale) * *shape),
            JumpCfKind::Stable { alpha, c_sum, c_diff, cutoff, near } => {
                let (ic, is) = stable_integrals(theta.abs(), *alpha, *cutoff, near)?;
                let is = is * theta.signum();
                Ok(Complex64::new(alpha * c_sum * ic, alpha * c_diff * is))
            }
        }
    }
}

/// `-ln(1 - iz) - iz`.
fn gamma_jump_cf(z: f64) -> Complex64 {
    let iz = Complex64::new(0.0, z);
    if z.abs() < 1e-3 {
        // Σ_{m≥2} (iz)^m / m
        let mut term = iz;
        let mut acc = Complex64::new(0.0, 0.0);
        for m in 2..12 {
            term *= iz;
            acc += term / m as f64;
        }
        acc
    } else {
        -(Complex64::new(1.0, 0.0) - iz).ln() - iz
    }
}

/// `(∫_0^K (cos θx - 1) x^{-1-α} dx, ∫_0^K (sin θx - θx) x^{-1-α} dx)` for `θ > 0`.
fn stable_integrals(theta: f64, alpha: f64, cutoff: f64, near: &Rule) -> Result<(f64, f64)> {
    let split = cutoff.min(1.0 / theta);
    // On [0, split] write the integrand as x^{1-α} times a smooth factor.
    let half = 0.5 * split;
    let scale = half.powf(2.0 - alpha);
    let mut ic = 0.0;
    let mut is = 0.0;
    for (&t, &w) in near.nodes.iter().zip(&near.weights) {
        let x = half * (1.0 + t);
        let z = theta * x;
        let s = (0.5 * z).sin();
        ic += w * (-2.0 * s * s / (x * x));
        is += w * theta * theta * sin_minus_id_over_sq(z);
    }
    ic *= scale;
    is *= scale;

    if split < cutoff {
        let osc = upper_tail_oscillatory(theta, alpha, split)? - upper_tail_oscillatory(theta, alpha, cutoff)?;
        let inv_pow = (split.powf(-alpha) - cutoff.powf(-alpha)) / alpha;
        let lin = if (alpha - 1.0).abs() < 1e-12 {
            (cutoff / split).ln()
        } else {
            (cutoff.powf(1.0 - alpha) - split.powf(1.0 - alpha)) / (1.0 - alpha)
        };
        ic += osc.re - inv_pow;
        is += osc.im - theta * lin;
    }
    Ok((ic, is))
}

/// `∫_x^∞ e^{iθy} y^{-1-α} dy` for `θ > 0`, along the vertical ray
/// `y = x + it/θ` where the integrand decays like `e^{-t}` instead of oscillating.
fn upper_tail_oscillatory(theta: f64, alpha: f64, x: f64) -> Result<Complex64> {
    let ray = integrate_adaptive(
        |t: f64| Complex64::new(x, t / theta).powf(-1.0 - alpha) * (-t).exp(),
        0.0,
        RAY_LENGTH,
        TAIL_REL_TOL * x.powf(-1.0 - alpha),
        2000,
    )?;
    Ok(Complex64::new(0.0, 1.0 / theta) * Complex64::from_polar(1.0, theta * x) * ray)
}

/// `(sin z - z) / z^2`.
fn sin_minus_id_over_sq(z: f64) -> f64 {
    if z.abs() < 0.1 {
        let z2 = z * z;
        z * (-1.0 / 6.0 + z2 * (1.0 / 120.0 + z2 * (-1.0 / 5040.0 + z2 / 362_880.0)))
    } else {
        (z.sin() - z) / (z * z)
    }
}

/// Sampler for the time-`dt` increment of the Lévy process whose time-one
/// law has the given triplet, with the drift removed so draws have mean zero.
#[derive(Debug, Clone)]
pub struct IncrementSampler {
    gauss_sd: f64,
    kind: SamplerKind,
}

#[derive(Debug, Clone)]
enum SamplerKind {
    None,
    Gamma { dist: Gamma<f64>, mean: f64 },
    Stable(StableJumps),
}

#[derive(Debug, Clone)]
struct StableJumps {
    alpha: f64,
    /// Expected number of jumps beyond the threshold, per side.
    rate: [f64; 2],
    poisson: [Option<Poisson<f64>>; 2],
    /// `threshold^{-alpha}` and `cutoff^{-alpha}`.
    lo_pow: f64,
    hi_pow: f64,
    /// Mean of the retained jumps, subtracted so the increment is centered.
    drift: f64,
}

impl StableJumps {
    fn size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        (self.hi_pow + u * (self.lo_pow - self.hi_pow)).powf(-1.0 / self.alpha)
    }
}

impl IncrementSampler {
    /// Sampler with the default small-jump threshold: the largest `delta`
    /// for which the substituted Gaussian has standard deviation at least
    /// `5 delta`.
    pub fn new(t: &LevyTriplet, dt: f64) -> Result<Self> {
        Self::build(t, dt, None)
    }

    /// Sampler with an explicit small-jump threshold for truncated-stable jumps.
    pub fn with_threshold(t: &LevyTriplet, dt: f64, delta: f64) -> Result<Self> {
        Self::build(t, dt, Some(delta))
    }

    /// Largest threshold satisfying the Gaussian-substitution validity rule.
    pub fn default_threshold(t: &LevyTriplet, dt: f64) -> Option<f64> {
        match t.jumps {
            JumpFamily::TruncatedStable { alpha, c_plus, c_minus, cutoff } => Some(cutoff.min(
                (dt * (c_plus + c_minus) * alpha / (25.0 * (2.0 - alpha))).powf(1.0 / alpha),
            )),
            _ => None,
        }
    }

    fn build(t: &LevyTriplet, dt: f64, delta: Option<f64>) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return domain(format!("time step must be positive, got {dt}"));
        }
        let mut var = t.sigma * t.sigma * dt;
        let kind = match t.jumps {
            JumpFamily::NoJumps => SamplerKind::None,
            JumpFamily::CenteredGamma { shape, scale } => SamplerKind::Gamma {
                dist: Gamma::new(shape * dt, scale)
                    .map_err(|e| Error::Domain(format!("gamma increment: {e}")))?,
                mean: shape * scale * dt,
            },
            JumpFamily::TruncatedStable { alpha, c_plus, c_minus, cutoff } => {
                let default = Self::default_threshold(t, dt).expect("stable family");
                let delta = match delta {
                    None => default,
                    Some(d) if d > 0.0 && d <= default => d,
                    Some(d) => {
                        return domain(format!(
                            "small-jump threshold {d} must lie in (0, {default}] so the Gaussian substitute has sd >= 5 delta"
                        ))
                    }
                };
                let c_sum = c_plus + c_minus;
                var += dt * c_sum * alpha * delta.powf(2.0 - alpha) / (2.0 - alpha);
                let lo_pow = delta.powf(-alpha);
                let hi_pow = cutoff.powf(-alpha);
                let rate = [dt * c_plus * (lo_pow - hi_pow), dt * c_minus * (lo_pow - hi_pow)];
                let mean_size = if (alpha - 1.0).abs() < 1e-12 {
                    (cutoff / delta).ln()
                } else {
                    alpha * (cutoff.powf(1.0 - alpha) - delta.powf(1.0 - alpha)) / (1.0 - alpha)
                };
                let poisson = rate.map(|r| if r > 0.0 { Poisson::new(r).ok() } else { None });
                SamplerKind::Stable(StableJumps {
                    alpha,
                    rate,
                    poisson,
                    lo_pow,
                    hi_pow,
                    drift: dt * (c_plus - c_minus) * mean_size,
                })
            }
        };
        Ok(IncrementSampler { gauss_sd: var.sqrt(), kind })
    }

    /// Standard deviation of the Gaussian part, including any substituted small jumps.
    pub fn gaussian_sd(&self) -> f64 {
        self.gauss_sd
    }

    /// Expected number of explicitly simulated jumps per draw.
    pub fn jump_rate(&self) -> f64 {
        match &self.kind {
            SamplerKind::Stable(s) => s.rate[0] + s.rate[1],
            _ => 0.0,
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let mut x = if self.gauss_sd > 0.0 {
            self.gauss_sd * rng.sample::<f64, _>(StandardNormal)
        } else {
            0.0
        };
        match &self.kind {
            SamplerKind::None => {}
            SamplerKind::Gamma { dist, mean } => x += dist.sample(rng) - mean,
            SamplerKind::Stable(s) => {
                x -= s.drift;
                for (side, sign) in [(0, 1.0), (1, -1.0)] {
                    if let Some(p) = &s.poisson[side] {
                        let k = p.sample(rng) as u64;
                        for _ in 0..k {
                            x += sign * s.size(rng);
                        }
                    }
                }
            }
        }
        x
    }

    /// Fills `out` with independent draws.
    ///
    /// Truncated-stable jumps are placed as a Poisson number of jumps over
    /// the whole block at uniform positions, which has the same law as
    /// per-draw Poisson counts.
    pub fn fill<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        match &self.kind {
            SamplerKind::Stable(s) => {
                for v in out.iter_mut() {
                    *v = self.gauss_sd * rng.sample::<f64, _>(StandardNormal) - s.drift;
                }
                let len = out.len();
                if len == 0 {
                    return;
                }
                for (side, sign) in [(0, 1.0), (1, -1.0)] {
                    if s.rate[side] <= 0.0 {
                        continue;
                    }
                    let total = match Poisson::new(s.rate[side] * len as f64) {
                        Ok(p) => p.sample(rng) as u64,
                        Err(_) => 0,
                    };
                    for _ in 0..total {
                        let pos = rng.random_range(0..len);
                        out[pos] += sign * s.size(rng);
                    }
                }
            }
            _ => {
                for v in out.iter_mut() {
                    *v = self.draw(rng);
                }
            }
        }
    }
}

/// One draw of the time-`dt` increment, `dt` in `(0, 1]`.
pub fn sample_increment<R: Rng + ?Sized>(t: &LevyTriplet, dt: f64, rng: &mut R) -> Result<f64> {
    if !(dt > 0.0 && dt <= 1.0) {
        return domain(format!("time step must lie in (0, 1], got {dt}"));
    }
    Ok(IncrementSampler::new(t, dt)?.draw(rng))
}

/// `ω(θ; α, c1, c2)`: the stable log-cf is `-|θ|^α ω`.
///
/// At `alpha = 2` the law is taken as normal with variance `c1 + c2`.
pub fn stable_omega(theta: f64, alpha: f64, c1: f64, c2: f64) -> Result<Complex64> {
    check_stable_args(alpha, c1, c2)?;
    if alpha == 2.0 {
        return Ok(Complex64::new(0.5 * (c1 + c2), 0.0));
    }
    if alpha == 1.0 {
        return Ok(Complex64::new((c1 + c2) * PI / 2.0, 0.0));
    }
    let k = gamma(2.0 - alpha) / (1.0 - alpha);
    let a = PI * alpha / 2.0;
    Ok(Complex64::new(
        k * (c1 + c2) * a.cos(),
        -k * (c1 - c2) * theta.signum() * a.sin(),
    ))
}

fn check_stable_args(alpha: f64, c1: f64, c2: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 2.0) {
        return domain(format!("stable index must lie in (0, 2], got {alpha}"));
    }
    if !(c1 >= 0.0 && c2 >= 0.0 && c1 + c2 > 0.0) {
        return domain(format!("stable constants must be nonnegative with positive sum, got {c1}, {c2}"));
    }
    if alpha == 1.0 && c1 != c2 {
        return Err(Error::Unsupported(format!(
            "index 1 requires c1 == c2, got c1={c1}, c2={c2}"
        )));
    }
    Ok(())
}

/// Draw from the stable law with log-cf `-|θ|^α ω(θ; α, c1, c2)` by the
/// Chambers–Mallows–Stuck construction.
pub fn sample_stable<R: Rng + ?Sized>(alpha: f64, c1: f64, c2: f64, rng: &mut R) -> Result<f64> {
    check_stable_args(alpha, c1, c2)?;
    if alpha == 2.0 {
        return Ok((c1 + c2).sqrt() * rng.sample::<f64, _>(StandardNormal));
    }
    let v = PI * (rng.random::<f64>() - 0.5);
    if alpha == 1.0 {
        return Ok((c1 + c2) * PI / 2.0 * v.tan());
    }
    let w: f64 = rng.sample(Exp1);
    let omega = stable_omega(1.0, alpha, c1, c2)?;
    let scale = omega.re.powf(1.0 / alpha);
    let skew = (c1 - c2) / (c1 + c2);
    let tan = (PI * alpha / 2.0).tan();
    let b = (skew * tan).atan() / alpha;
    let s = (1.0 + skew * skew * tan * tan).powf(1.0 / (2.0 * alpha));
    let x = s * (alpha * (v + b)).sin() / v.cos().powf(1.0 / alpha)
        * ((v - alpha * (v + b)).cos() / w).powf((1.0 - alpha) / alpha);
    Ok(scale * x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Regime {
    I,
    II,
    III,
    IV,
}

impl Regime {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::I => "I",
            Regime::II => "II",
            Regime::III => "III",
            Regime::IV => "IV",
        }
    }
}

/// Partial-sum limit of the aggregate for a given edge exponent and triplet.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeReport {
    pub regime: Regime,
    /// Exponent of `n` in the normalization of partial sums.
    pub exponent: f64,
    pub limit_name: String,
    pub constants: BTreeMap<String, f64>,
}

/// Classifies the partial-sum regime.
///
/// The stable index used to separate the two pure-jump regimes is the
/// family's small-jump index; families without one (gamma jumps) have
/// moments of every positive order and fall in regime III.
pub fn classify_regime(beta: f64, t: &LevyTriplet) -> Result<RegimeReport> {
    if !(beta > 0.0 && beta.is_finite()) {
        return domain(format!("edge exponent must be positive, got {beta}"));
    }
    if beta == 1.0 {
        return Err(Error::Boundary("edge exponent 1 separates long and short memory".into()));
    }
    let mut constants = BTreeMap::new();
    let (regime, exponent, name) = if beta > 1.0 {
        constants.insert("sigma_w2".into(), t.second_moment());
        (Regime::IV, 0.5, "Brownian motion")
    } else if t.sigma > 0.0 {
        let s2 = t.sigma * t.sigma;
        constants.insert("sigma2".into(), s2);
        constants.insert("sigma2_gamma".into(), s2 * gamma(beta - 2.0));
        (Regime::I, 1.0 - beta / 2.0, "fractional Brownian motion")
    } else {
        match t.jumps {
            JumpFamily::NoJumps => {
                return Err(Error::Degenerate("triplet has neither Gaussian part nor jumps".into()))
            }
            JumpFamily::TruncatedStable { alpha, c_plus, c_minus, .. } => {
                if alpha == 1.0 + beta {
                    return Err(Error::Boundary(format!(
                        "stable index {alpha} equals 1 + edge exponent"
                    )));
                }
                if alpha > 1.0 + beta {
                    constants.insert("c_plus".into(), c_plus);
                    constants.insert("c_minus".into(), c_minus);
                    (Regime::II, 1.0 - beta / alpha, "self-similar stable process")
                } else {
                    insert_edge_moments(&mut constants, beta, t)?;
                    (Regime::III, 1.0 / (1.0 + beta), "stable Lévy process")
                }
            }
            JumpFamily::CenteredGamma { .. } => {
                insert_edge_moments(&mut constants, beta, t)?;
                (Regime::III, 1.0 / (1.0 + beta), "stable Lévy process")
            }
        }
    };
    Ok(RegimeReport { regime, exponent, limit_name: name.into(), constants })
}

fn insert_edge_moments(
    constants: &mut BTreeMap<String, f64>,
    beta: f64,
    t: &LevyTriplet,
) -> Result<()> {
    let (plus, minus) = edge_moments(beta, t)?;
    constants.insert("pi_beta_plus".into(), plus);
    constants.insert("pi_beta_minus".into(), minus);
    Ok(())
}

/// `(1+β)^{-1} ∫_{±x>0} |x|^{1+β} pi(dx)` for both sides.
pub fn edge_moments(beta: f64, t: &LevyTriplet) -> Result<(f64, f64)> {
    let p = 1.0 + beta;
    Ok((
        t.one_sided_moment(p, Side::Plus)? / p,
        t.one_sided_moment(p, Side::Minus)? / p,
    ))
}
