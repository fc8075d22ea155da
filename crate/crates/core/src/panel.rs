//! Simulation of the random-coefficient AR(1) panel and its aggregate.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::levy::{IncrementSampler, LevyTriplet};
use crate::mixing::{beta_edge_normalizer, sample_beta_edge, MixingLaw};
use crate::quad::Abscissa;
use crate::rng::{stream, StreamDomain};

/// Longest truncated stationary series ever summed.
pub const MAX_INIT_TERMS: u64 = 1_000_000;
/// Default cap on `N * n` for one aggregate.
pub const DEFAULT_BUDGET: u128 = 10_000_000_000;
/// Units simulated together before their sums enter the reduction tree.
const UNIT_BLOCK: usize = 128;
/// Length of the increment buffer used while running a unit.
const CHUNK: usize = 4096;

/// How each micro path is started.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InitScheme {
    /// `X(0) = Σ_{k≤L} a^k ε(-k)` with `|a|^L ≤ tol`.
    ///
    /// When `coarsening > 0` and `a` is close to 1, runs of `m` consecutive
    /// terms whose weights differ by at most a factor `1 - coarsening` are
    /// replaced by one increment over `m` time steps, rescaled so the
    /// variance of the series is exact. `coarsening = 0` sums every term.
    TruncatedSeries { tol: f64, coarsening: f64 },
    /// Start at zero and discard `steps` steps.
    ZeroPlusBurnin { steps: u64 },
}

impl Default for InitScheme {
    fn default() -> Self {
        InitScheme::TruncatedSeries { tol: 1e-10, coarsening: 1e-2 }
    }
}

/// How the AR coefficients of the panel are drawn.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoefficientDesign {
    /// Coefficients drawn from the mixing law, every unit on time step `1/N`.
    Plain,
    /// Coefficients drawn from the density proportional to
    /// `(1+x)(1-x)^exponent`; each unit runs on Lévy time
    /// `(1/N) phi(a) / proposal(a)` so the aggregate has the same limit law.
    /// A smaller exponent places more units near the unit root.
    EdgeTilted { exponent: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PanelConfig {
    pub n_micro: usize,
    pub n_time: usize,
    pub init: InitScheme,
    pub seed: u64,
    /// Seed for the coefficient draws; the main seed when absent. Pinning it
    /// keeps the same coefficient panel across replicates.
    pub coef_seed: Option<u64>,
    pub mixing: MixingLaw,
    pub triplet: LevyTriplet,
    pub design: CoefficientDesign,
    pub budget: u128,
}

impl PanelConfig {
    pub fn new(n_micro: usize, n_time: usize, seed: u64, mixing: MixingLaw, triplet: LevyTriplet) -> Self {
        PanelConfig {
            n_micro,
            n_time,
            init: InitScheme::default(),
            seed,
            coef_seed: None,
            mixing,
            triplet,
            design: CoefficientDesign::Plain,
            budget: DEFAULT_BUDGET,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_micro == 0 || self.n_time == 0 {
            return domain("panel needs at least one unit and one time step");
        }
        match self.init {
            InitScheme::TruncatedSeries { tol, coarsening } => {
                if !(tol > 0.0 && tol < 1.0) {
                    return domain(format!("init tolerance must lie in (0, 1), got {tol}"));
                }
                if !(0.0..0.5).contains(&coarsening) {
                    return domain(format!("init coarsening must lie in [0, 0.5), got {coarsening}"));
                }
            }
            InitScheme::ZeroPlusBurnin { steps } => {
                if steps == 0 {
                    return domain("burn-in needs at least one step");
                }
            }
        }
        if let CoefficientDesign::EdgeTilted { exponent } = self.design {
            let beta = self.mixing.edge_beta().ok_or_else(|| {
                Error::Domain("an edge-tilted design needs a mixing law with a density".into())
            })?;
            if !(exponent > -1.0 && exponent < beta) {
                return domain(format!(
                    "tilt exponent must lie in (-1, {beta}), got {exponent}"
                ));
            }
        }
        let cells = self.n_micro as u128 * self.n_time as u128;
        if cells > self.budget {
            return Err(Error::Budget { requested: cells, limit: self.budget });
        }
        Ok(())
    }
}

/// One simulated aggregate path with what is needed to reproduce it.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregatedSeries {
    pub values: Vec<f64>,
    pub config: PanelConfig,
    /// Variance of the innovation law, `sigma^2 + ∫x^2 pi(dx)`.
    pub sigma_w2_true: f64,
    /// Largest bound on the truncation bias of any unit's initial value.
    pub init_bias_bound: f64,
}

/// Source of innovation sequences for a micro path.
pub trait IncrementSource {
    fn fill_increments<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R);
}

impl IncrementSource for IncrementSampler {
    fn fill_increments<R: Rng + ?Sized>(&self, out: &mut [f64], rng: &mut R) {
        self.fill(out, rng);
    }
}

/// Every increment equal to the same value.
#[derive(Debug, Clone, Copy)]
pub struct ConstantIncrements(pub f64);

impl IncrementSource for ConstantIncrements {
    fn fill_increments<R: Rng + ?Sized>(&self, out: &mut [f64], _rng: &mut R) {
        out.fill(self.0);
    }
}

/// Initial value together with the length of the series used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitDraw {
    pub value: f64,
    /// Index `L` of the last term of the series.
    pub terms: u64,
    /// `|a|^{L+1}` times the stationary standard deviation.
    pub bias_bound: f64,
}

/// Number `L` of terms after which `|a|^L ≤ tol`, capped at [`MAX_INIT_TERMS`].
pub fn truncation_terms(a: f64, tol: f64) -> u64 {
    if a == 0.0 {
        return 0;
    }
    let l = (tol.ln() / a.abs().ln()).ceil();
    if l >= MAX_INIT_TERMS as f64 {
        MAX_INIT_TERMS
    } else {
        l.max(0.0) as u64
    }
}

/// `ln |a|` computed from the gaps to ±1.
fn ln_abs(at: &Abscissa) -> f64 {
    if at.x >= 0.0 {
        (-at.omx).ln_1p()
    } else {
        (-at.opx).ln_1p()
    }
}

/// `1 - a^2`.
fn one_minus_sq(at: &Abscissa) -> f64 {
    at.omx * at.opx
}

fn init_bias(at: &Abscissa, terms: u64, sigma_w2: f64, dt: f64) -> f64 {
    let sd = (sigma_w2 * dt / one_minus_sq(at)).sqrt();
    ((terms + 1) as f64 * ln_abs(at)).exp() * sd
}

/// Draw of the stationary initial value `Σ_{k=0}^{L} a^k ε(-k)` for a unit
/// with coefficient `a` and innovations on time step `dt`.
pub fn stationary_init<R: Rng + ?Sized>(
    a: f64,
    t: &LevyTriplet,
    dt: f64,
    tol: f64,
    rng: &mut R,
) -> Result<InitDraw> {
    if !(a > -1.0 && a < 1.0) {
        return domain(format!("AR coefficient must lie in (-1, 1), got {a}"));
    }
    if !(tol > 0.0 && tol < 1.0) {
        return domain(format!("init tolerance must lie in (0, 1), got {tol}"));
    }
    let sampler = IncrementSampler::new(t, dt)?;
    Ok(init_series(&Abscissa::new(a), t, &sampler, dt, tol, 0.0, rng))
}

fn init_series<R: Rng + ?Sized>(
    at: &Abscissa,
    t: &LevyTriplet,
    sampler: &IncrementSampler,
    dt: f64,
    tol: f64,
    coarsening: f64,
    rng: &mut R,
) -> InitDraw {
    let sigma_w2 = t.second_moment();
    if at.x == 0.0 {
        return InitDraw { value: sampler.draw(rng), terms: 0, bias_bound: 0.0 };
    }
    let terms = truncation_terms(at.x, tol);
    let bias_bound = init_bias(at, terms, sigma_w2, dt);
    let ln_a = ln_abs(at);
    if !t.has_jumps() {
        // Gaussian series: exact law of the truncated sum.
        let var = t.sigma().powi(2) * dt * -(2.0 * (terms + 1) as f64 * ln_a).exp_m1() / one_minus_sq(at);
        let z: f64 = rng.sample(StandardNormal);
        return InitDraw { value: var.sqrt() * z, terms, bias_bound };
    }
    let run = if at.x > 0.0 && coarsening > 0.0 {
        ((-coarsening).ln_1p() / ln_a).floor().max(1.0) as u64
    } else {
        1
    };
    let value = if run <= 1 {
        let mut acc = 0.0;
        let mut weight = 1.0;
        let mut buf = vec![0.0; CHUNK];
        let mut left = terms + 1;
        while left > 0 {
            let k = left.min(CHUNK as u64) as usize;
            sampler.fill(&mut buf[..k], rng);
            for &e in &buf[..k] {
                acc += weight * e;
                weight *= at.x;
            }
            left -= k as u64;
        }
        acc
    } else {
        let m = run as f64;
        let block = IncrementSampler::new(t, m * dt).expect("valid block step");
        // Σ_{j<m} a^{2j} = c^2 m keeps the variance of each run exact.
        let c = (-(2.0 * m * ln_a).exp_m1() / (one_minus_sq(at) * m)).sqrt();
        let step = (m * ln_a).exp();
        let blocks = (terms + 1).div_ceil(run);
        let mut acc = 0.0;
        let mut weight = c;
        for _ in 0..blocks {
            acc += weight * block.draw(rng);
            weight *= step;
        }
        acc
    };
    InitDraw { value, terms, bias_bound }
}

/// `X(1..n)` from `X(t) = a X(t-1) + ε(t)` started at `init_value`.
pub fn simulate_micro_path<S: IncrementSource, R: Rng + ?Sized>(
    a: f64,
    source: &S,
    n: usize,
    init_value: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(a > -1.0 && a < 1.0) {
        return domain(format!("AR coefficient must lie in (-1, 1), got {a}"));
    }
    if n == 0 {
        return domain("path length must be at least 1");
    }
    let mut out = vec![0.0; n];
    run_unit(a, source, init_value, &mut out, Accumulate::Overwrite, rng);
    Ok(out)
}

#[derive(Clone, Copy)]
enum Accumulate {
    Overwrite,
    Add,
}

fn run_unit<S: IncrementSource, R: Rng + ?Sized>(
    a: f64,
    source: &S,
    init_value: f64,
    out: &mut [f64],
    mode: Accumulate,
    rng: &mut R,
) {
    let mut buf = vec![0.0; CHUNK.min(out.len())];
    let mut x = init_value;
    for chunk in out.chunks_mut(CHUNK) {
        let inc = &mut buf[..chunk.len()];
        source.fill_increments(inc, rng);
        match mode {
            Accumulate::Overwrite => {
                for (o, &e) in chunk.iter_mut().zip(inc.iter()) {
                    x = a * x + e;
                    *o = x;
                }
            }
            Accumulate::Add => {
                for (o, &e) in chunk.iter_mut().zip(inc.iter()) {
                    x = a * x + e;
                    *o += x;
                }
            }
        }
    }
}

/// Coefficient of unit `i` and its share of Lévy time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDraw {
    pub coef: Abscissa,
    pub dt: f64,
}

/// Coefficient and time step of unit `index`.
pub fn draw_unit(cfg: &PanelConfig, index: usize) -> Result<UnitDraw> {
    let mut rng = stream(cfg.coef_seed.unwrap_or(cfg.seed), StreamDomain::Coefficients, index as u64);
    let base = 1.0 / cfg.n_micro as f64;
    Ok(match cfg.design {
        CoefficientDesign::Plain => UnitDraw { coef: cfg.mixing.sample(&mut rng), dt: base },
        CoefficientDesign::EdgeTilted { exponent } => {
            let coef = sample_beta_edge(exponent, &mut rng);
            let proposal = coef.opx * coef.omx.powf(exponent) / beta_edge_normalizer(exponent);
            let target = cfg.mixing.density_at(&coef)?;
            UnitDraw { coef, dt: base * target / proposal }
        }
    })
}

fn unit_rng(cfg: &PanelConfig, index: usize) -> ChaCha8Rng {
    stream(cfg.seed, StreamDomain::Innovations, index as u64)
}

/// Simulates `Σ_i X_i(t)`, `t = 1..n`.
///
/// Units are independent given their streams, are simulated in parallel in
/// fixed blocks, and their sums are combined by a fixed pairwise tree, so the
/// result is the same for every thread count.
pub fn simulate_aggregate(cfg: &PanelConfig) -> Result<AggregatedSeries> {
    cfg.validate()?;
    let n = cfg.n_time;
    let blocks: Vec<usize> = (0..cfg.n_micro.div_ceil(UNIT_BLOCK)).collect();
    let partial: Vec<(Vec<f64>, f64)> = blocks
        .par_iter()
        .map(|&b| -> Result<(Vec<f64>, f64)> {
            let mut sum = vec![0.0; n];
            let mut bias: f64 = 0.0;
            let lo = b * UNIT_BLOCK;
            let hi = (lo + UNIT_BLOCK).min(cfg.n_micro);
            for i in lo..hi {
                let unit = draw_unit(cfg, i)?;
                let sampler = IncrementSampler::new(&cfg.triplet, unit.dt)?;
                let mut rng = unit_rng(cfg, i);
                let a = unit.coef.x;
                let init = match cfg.init {
                    InitScheme::TruncatedSeries { tol, coarsening } => {
                        let d = init_series(&unit.coef, &cfg.triplet, &sampler, unit.dt, tol, coarsening, &mut rng);
                        bias = bias.max(d.bias_bound);
                        d.value
                    }
                    InitScheme::ZeroPlusBurnin { steps } => {
                        let mut x = 0.0;
                        let mut buf = vec![0.0; CHUNK];
                        let mut left = steps;
                        while left > 0 {
                            let k = left.min(CHUNK as u64) as usize;
                            sampler.fill(&mut buf[..k], &mut rng);
                            for &e in &buf[..k] {
                                x = a * x + e;
                            }
                            left -= k as u64;
                        }
                        x
                    }
                };
                run_unit(a, &sampler, init, &mut sum, Accumulate::Add, &mut rng);
            }
            Ok((sum, bias))
        })
        .collect::<Result<Vec<_>>>()?;
    let init_bias_bound = partial.iter().map(|p| p.1).fold(0.0, f64::max);
    let values = pairwise_sum(partial.into_iter().map(|p| p.0).collect());
    Ok(AggregatedSeries {
        values,
        config: cfg.clone(),
        sigma_w2_true: cfg.triplet.second_moment(),
        init_bias_bound,
    })
}

/// Elementwise sum of equal-length vectors by a fixed binary tree.
pub(crate) fn pairwise_sum(mut parts: Vec<Vec<f64>>) -> Vec<f64> {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap_or_default()
}
