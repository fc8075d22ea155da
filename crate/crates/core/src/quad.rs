//! Quadrature: Gauss rules by Golub–Welsch, adaptive Gauss–Kronrod, and a
//! composite rule graded toward algebraic endpoint singularities at ±1.

use std::ops::{Add, Mul, Sub};
use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::special::ln_gamma;

/// Values that quadrature can accumulate.
pub trait Scalar:
    Copy + Default + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> + Send + Sync
{
    fn magnitude(&self) -> f64;
}

impl Scalar for f64 {
    fn magnitude(&self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn magnitude(&self) -> f64 {
        self.norm()
    }
}

/// Nodes and weights on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct Rule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl Rule {
    /// `∫_a^b f` for a rule with unit weight function.
    pub fn integrate<T: Scalar>(&self, a: f64, b: f64, f: impl Fn(f64) -> T) -> T {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = T::default();
        for (&t, &w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * t) * w;
        }
        acc * half
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Gauss–Jacobi rule for the weight `(1-x)^a (1+x)^b` on `[-1, 1]`.
pub fn gauss_jacobi(n: usize, a: f64, b: f64) -> Result<Rule> {
    if n == 0 {
        return Err(Error::Domain("quadrature rule needs at least one node".into()));
    }
    if !(a > -1.0 && b > -1.0) {
        return Err(Error::Domain(format!(
            "Jacobi exponents must exceed -1, got a={a}, b={b}"
        )));
    }
    let ab = a + b;
    let ln_mu0 = (ab + 1.0) * std::f64::consts::LN_2 + ln_gamma(a + 1.0) + ln_gamma(b + 1.0)
        - ln_gamma(ab + 2.0);
    let mu0 = ln_mu0.exp();

    let mut diag = vec![0.0; n];
    let mut off = vec![0.0; n.saturating_sub(1)];
    diag[0] = (b - a) / (ab + 2.0);
    for (k, d) in diag.iter_mut().enumerate().skip(1) {
        let kf = k as f64;
        let s = 2.0 * kf + ab;
        *d = (b * b - a * a) / (s * (s + 2.0));
    }
    for (i, o) in off.iter_mut().enumerate() {
        let k = (i + 1) as f64;
        let s = 2.0 * k + ab;
        let beta = if i == 0 {
            4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab))
        } else {
            4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0))
        };
        *o = beta.sqrt();
    }

    let mut jac = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        jac[(i, i)] = diag[i];
        if i + 1 < n {
            jac[(i, i + 1)] = off[i];
            jac[(i + 1, i)] = off[i];
        }
    }
    let eig = jac.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(Rule {
        nodes: pairs.iter().map(|p| p.0).collect(),
        weights: pairs.iter().map(|p| p.1).collect(),
    })
}

pub fn gauss_legendre(n: usize) -> Rule {
    gauss_jacobi(n, 0.0, 0.0).expect("Legendre rule")
}

pub(crate) fn legendre16() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(16))
}

pub(crate) fn legendre32() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(32))
}

pub(crate) fn legendre64() -> &'static Rule {
    static R: OnceLock<Rule> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(64))
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<T: Scalar>(f: &impl Fn(f64) -> T, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kron = kron + s * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + s * WG[j / 2];
        }
    }
    let k = kron * h;
    let g = gauss * h;
    (k, (k - g).magnitude())
}

/// Globally adaptive Gauss–Kronrod (7, 15) integration of `f` over `[a, b]`.
///
/// Returns the integral once the summed error estimate drops below
/// `abs_tol`; otherwise a [`Error::NumericFailure`] carrying the estimate
/// reached after `max_intervals` subdivisions.
pub fn integrate_adaptive<T: Scalar>(
    f: impl Fn(f64) -> T,
    a: f64,
    b: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Result<T> {
    if a == b {
        return Ok(T::default());
    }
    let (v, e) = gk15(&f, a, b);
    let mut parts = vec![(a, b, v, e)];
    loop {
        let total_err: f64 = parts.iter().map(|p| p.3).sum();
        if total_err <= abs_tol {
            break;
        }
        if parts.len() >= max_intervals {
            return Err(Error::NumericFailure {
                what: "adaptive quadrature".into(),
                achieved: total_err,
            });
        }
        let (idx, _) = parts
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = parts.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        parts.push((lo, mid, v1, e1));
        parts.push((mid, hi, v2, e2));
    }
    // Sum in a fixed order so results do not depend on subdivision history.
    parts.sort_by(|p, q| p.0.total_cmp(&q.0));
    Ok(parts.iter().fold(T::default(), |acc, p| acc + p.2))
}

/// A point of `(-1, 1)` together with the distances to both endpoints,
/// computed without cancellation near the endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Abscissa {
    pub x: f64,
    /// `1 - x`
    pub omx: f64,
    /// `1 + x`
    pub opx: f64,
}

impl Abscissa {
    pub fn new(x: f64) -> Self {
        Abscissa { x, omx: 1.0 - x, opx: 1.0 + x }
    }

    pub(crate) fn from_upper_gap(u: f64) -> Self {
        Abscissa { x: 1.0 - u, omx: u, opx: 2.0 - u }
    }

    pub(crate) fn from_lower_gap(v: f64) -> Self {
        Abscissa { x: v - 1.0, omx: 2.0 - v, opx: v }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct WeightedNode {
    pub at: Abscissa,
    pub weight: f64,
}

/// Layout of a composite rule for `∫ f(x) (1-x)^p (1+x)^s dx`.
///
/// The interior `[breaks[0], breaks[last]]` is covered by Gauss–Legendre
/// panels between consecutive breakpoints. When `graded_upper` is set the
/// region `[breaks[last], 1]` is covered by geometrically shrinking panels
/// toward `x = 1` ending in a Gauss–Jacobi tip that absorbs `(1-x)^p`
/// exactly; likewise `graded_lower` for `[-1, breaks[0]]`.
#[derive(Debug, Clone)]
pub struct EndpointLayout {
    pub upper_power: f64,
    pub lower_power: f64,
    pub breaks: Vec<f64>,
    pub graded_upper: bool,
    pub graded_lower: bool,
    pub panel_order: usize,
}

const GRADING_LEVELS: usize = 40;
const TIP_ORDER: usize = 16;

/// Weighted nodes whose weights already include `(1-x)^p (1+x)^s`.
#[derive(Debug, Clone)]
pub struct EndpointRule {
    pub nodes: Vec<WeightedNode>,
}

impl EndpointRule {
    pub fn new(layout: &EndpointLayout) -> Result<Self> {
        let p = layout.upper_power;
        let s = layout.lower_power;
        if layout.breaks.len() < 2 {
            return Err(Error::Domain("endpoint rule needs at least two breakpoints".into()));
        }
        if layout.graded_upper && p <= -1.0 {
            return Err(Error::Domain(format!(
                "integrand behaves like (1-x)^{p} at x=1, which is not integrable"
            )));
        }
        if layout.graded_lower && s <= -1.0 {
            return Err(Error::Domain(format!(
                "integrand behaves like (1+x)^{s} at x=-1, which is not integrable"
            )));
        }
        let panel = match layout.panel_order {
            16 => legendre16().clone(),
            32 => legendre32().clone(),
            64 => legendre64().clone(),
            m => gauss_legendre(m),
        };
        let g16 = legendre16();
        let mut nodes = Vec::new();
        let power_weight = |a: &Abscissa| -> f64 {
            let mut w = 1.0;
            if p != 0.0 {
                w *= a.omx.powf(p);
            }
            if s != 0.0 {
                w *= a.opx.powf(s);
            }
            w
        };

        if layout.graded_lower {
            let eps = 1.0 + layout.breaks[0];
            grade_edge(eps, s, g16, &mut nodes, |v| Abscissa::from_lower_gap(v), |a| {
                if p != 0.0 { a.omx.powf(p) } else { 1.0 }
            })?;
        }
        for w in layout.breaks.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b <= a {
                continue;
            }
            let half = 0.5 * (b - a);
            let mid = 0.5 * (a + b);
            for (&t, &wt) in panel.nodes.iter().zip(&panel.weights) {
                let at = Abscissa::new(mid + half * t);
                nodes.push(WeightedNode { at, weight: wt * half * power_weight(&at) });
            }
        }
        if layout.graded_upper {
            let eps = 1.0 - layout.breaks[layout.breaks.len() - 1];
            grade_edge(eps, p, g16, &mut nodes, |u| Abscissa::from_upper_gap(u), |a| {
                if s != 0.0 { a.opx.powf(s) } else { 1.0 }
            })?;
        }
        Ok(EndpointRule { nodes })
    }

    pub fn integrate<T: Scalar>(&self, f: impl Fn(&Abscissa) -> T) -> T {
        self.nodes
            .iter()
            .fold(T::default(), |acc, n| acc + f(&n.at) * n.weight)
    }
}

/// Fills nodes for `∫_0^eps g(r) r^power dr` where `r` is the distance to
/// the endpoint and `other` supplies the smooth factor from the far end.
fn grade_edge(
    eps: f64,
    power: f64,
    panel: &Rule,
    nodes: &mut Vec<WeightedNode>,
    to_abscissa: impl Fn(f64) -> Abscissa,
    other: impl Fn(&Abscissa) -> f64,
) -> Result<()> {
    if eps <= 0.0 {
        return Ok(());
    }
    let mut hi = eps;
    for _ in 0..GRADING_LEVELS {
        let lo = 0.5 * hi;
        let half = 0.5 * (hi - lo);
        let mid = 0.5 * (hi + lo);
        for (&t, &wt) in panel.nodes.iter().zip(&panel.weights) {
            let r = mid + half * t;
            let at = to_abscissa(r);
            let pw = if power != 0.0 { r.powf(power) } else { 1.0 };
            nodes.push(WeightedNode { at, weight: wt * half * pw * other(&at) });
        }
        hi = lo;
    }
    // Tip [0, hi]: Jacobi weight (1+t)^power on [-1,1] mapped to r = hi(1+t)/2.
    let tip = gauss_jacobi(TIP_ORDER, 0.0, power)?;
    let scale = (0.5 * hi).powf(power + 1.0);
    for (&t, &wt) in tip.nodes.iter().zip(&tip.weights) {
        let r = 0.5 * hi * (1.0 + t);
        let at = to_abscissa(r);
        nodes.push(WeightedNode { at, weight: wt * scale * other(&at) });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::beta_fn;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let r = gauss_legendre(10);
        let v: f64 = r.integrate(-1.0, 1.0, |x| x.powi(18));
        assert!((v - 2.0 / 19.0).abs() < 1e-14);
        assert!((r.weights.iter().sum::<f64>() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn jacobi_weights_sum_to_beta_integral() {
        for &(a, b) in &[(0.5, -0.5), (-0.75, 1.0), (2.0, 0.25), (-0.5, -0.5)] {
            let r = gauss_jacobi(20, a, b).unwrap();
            let mu0 = 2f64.powf(a + b + 1.0) * beta_fn(a + 1.0, b + 1.0);
            let s: f64 = r.weights.iter().sum();
            assert!((s - mu0).abs() < 1e-12 * mu0, "a={a} b={b}: {s} vs {mu0}");
            // first moment: ∫ x (1-x)^a (1+x)^b = mu0 (b-a)/(a+b+2)
            let m1: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| x * w).sum();
            assert!((m1 - mu0 * (b - a) / (a + b + 2.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn adaptive_handles_oscillation_and_reports_failure() {
        let v = integrate_adaptive(|x: f64| (20.0 * x).cos(), 0.0, 3.0, 1e-12, 500).unwrap();
        assert!((v - (60.0f64).sin() / 20.0).abs() < 1e-12);
        let err = integrate_adaptive(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, 1e-15, 4);
        assert!(matches!(err, Err(Error::NumericFailure { .. })));
    }

    #[test]
    fn endpoint_rule_captures_singular_powers() {
        // ∫ (1-x)^{-3/4} (1+x) dx = 2^{5/4} B(2, 1/4)
        let layout = EndpointLayout {
            upper_power: -0.75,
            lower_power: 1.0,
            breaks: (0..=8).map(|i| -0.5 + 0.125 * i as f64).collect(),
            graded_upper: true,
            graded_lower: true,
            panel_order: 32,
        };
        let rule = EndpointRule::new(&layout).unwrap();
        let total: f64 = rule.integrate(|_| 1.0);
        let exact = 2f64.powf(1.25) * beta_fn(2.0, 0.25);
        assert!((total - exact).abs() < 1e-12 * exact, "{total} vs {exact}");
    }
}
