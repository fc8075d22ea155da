//! Mixing laws for the random AR coefficient and the functionals of them
//! that the limit theory needs.
//!
//! Expectations `E g(a)` are computed by a composite rule that is graded
//! toward both ends of `(-1, 1)` and absorbs algebraic endpoint behaviour of
//! the density and of the integrand exactly, so integrands such as
//! `a^t / (1 - a^2)` or `(1 - a)^{-2}` are handled without loss.

use std::sync::Arc;

use rand::Rng;

use crate::error::{domain, Error, Result};
use crate::levy::LevyTriplet;
use crate::quad::{Abscissa, EndpointLayout, EndpointRule, Scalar};

/// `E g(a)` integrand of the form `smooth(x) (1-x)^{-upper_pole} (1+x)^{-lower_pole}`.
pub struct EdgeIntegrand<F> {
    pub smooth: F,
    pub upper_pole: f64,
    pub lower_pole: f64,
}

impl<F> EdgeIntegrand<F> {
    pub fn smooth(f: F) -> Self {
        EdgeIntegrand { smooth: f, upper_pole: 0.0, lower_pole: 0.0 }
    }

    pub fn with_poles(f: F, upper_pole: f64, lower_pole: f64) -> Self {
        EdgeIntegrand { smooth: f, upper_pole, lower_pole }
    }
}

/// Distance from `x = 1` below which the composite rule is graded.
const EDGE_WIDTH: f64 = 0.5;
const INTERIOR_PANELS: usize = 8;
const INTERIOR_ORDER: usize = 32;
const TABLE_CELL_ORDER: usize = 16;
const TABLE_NORM_TOL: f64 = 1e-8;

/// Normalizer of `(1+x)(1-x)^b` on `(-1, 1)`, finite for `b > -1`.
pub fn beta_edge_normalizer(b: f64) -> f64 {
    2f64.powf(b + 2.0) / ((b + 1.0) * (b + 2.0))
}

/// Draw from the density proportional to `(1+x)(1-x)^b`, `b > -1`,
/// returned with its exact distance to `x = 1`.
pub fn sample_beta_edge<R: Rng + ?Sized>(b: f64, rng: &mut R) -> Abscissa {
    loop {
        let v: f64 = rng.random();
        let u = 2.0 * v.powf(1.0 / (b + 1.0));
        let accept: f64 = rng.random();
        if u > 0.0 && accept * 2.0 < 2.0 - u {
            return Abscissa::from_upper_gap(u);
        }
    }
}

/// Law of the AR coefficient.
#[derive(Debug, Clone, PartialEq)]
pub enum MixingLaw {
    /// Density `Z^{-1} (1+x)(1-x)^beta` on `(-1, 1)`.
    BetaEdge { beta: f64 },
    PointMass { c: f64 },
    Table(Arc<TableDensity>),
}

/// Piecewise density given at grid nodes in `(-1, 1)`.
///
/// The edge-adjusted profile `psi(x) = phi(x) / (1-x)^beta` is interpolated
/// linearly between nodes and held constant from the last node up to 1.
/// The support starts at the first node.
#[derive(Debug, Clone, PartialEq)]
pub struct TableDensity {
    nodes: Vec<f64>,
    psi: Vec<f64>,
    beta: f64,
    /// Probability of each cell `[x_i, x_{i+1})`, with the last entry for `[x_last, 1)`.
    cell_mass: Vec<f64>,
}

impl TableDensity {
    fn new(nodes: Vec<f64>, phi: Vec<f64>, beta: f64, rescale: bool) -> Result<Self> {
        if nodes.len() < 2 || nodes.len() != phi.len() {
            return domain("density table needs at least two nodes and one value per node");
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return domain(format!("edge exponent must be positive, got {beta}"));
        }
        if nodes.iter().any(|&x| !(x > -1.0 && x < 1.0)) {
            return domain("density table nodes must lie strictly inside (-1, 1)");
        }
        if nodes.windows(2).any(|w| w[1] <= w[0]) {
            return domain("density table nodes must be strictly increasing");
        }
        if phi.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return domain("density table values must be finite and nonnegative");
        }
        let mut psi: Vec<f64> =
            nodes.iter().zip(&phi).map(|(&x, &p)| p / (1.0 - x).powf(beta)).collect();
        let mut mass = cell_masses(&nodes, &psi, beta);
        let total: f64 = mass.iter().sum();
        if !(total > 0.0) {
            return domain("density table has zero mass");
        }
        if rescale {
            psi.iter_mut().for_each(|p| *p /= total);
            mass.iter_mut().for_each(|m| *m /= total);
        }
        let table = TableDensity { nodes, psi, beta, cell_mass: mass };
        let law = MixingLaw::Table(Arc::new(table.clone()));
        let integral: f64 = law.moment_functional(&EdgeIntegrand::smooth(|_: &Abscissa| 1.0))?;
        if (integral - 1.0).abs() > TABLE_NORM_TOL {
            return domain(format!("density table integrates to {integral}, not 1"));
        }
        Ok(table)
    }

    fn psi_at(&self, x: f64) -> f64 {
        let n = self.nodes.len();
        if x < self.nodes[0] {
            return 0.0;
        }
        if x >= self.nodes[n - 1] {
            return self.psi[n - 1];
        }
        let i = self.nodes.partition_point(|&v| v <= x) - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let w = (x - x0) / (x1 - x0);
        self.psi[i] * (1.0 - w) + self.psi[i + 1] * w
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }
}

/// `∫ psi(x) (1-x)^beta dx` per cell, with `psi` linear in each cell.
fn cell_masses(nodes: &[f64], psi: &[f64], beta: f64) -> Vec<f64> {
    // ∫_a^b (1-x)^p dx
    let pow_int = |a: f64, b: f64, p: f64| ((1.0 - a).powf(p + 1.0) - (1.0 - b).powf(p + 1.0)) / (p + 1.0);
    let mut out = Vec::with_capacity(nodes.len());
    for i in 0..nodes.len() - 1 {
        let (a, b) = (nodes[i], nodes[i + 1]);
        // psi = A + B (1 - x) on the cell
        let slope = (psi[i + 1] - psi[i]) / (b - a);
        let big_b = -slope;
        let big_a = psi[i] - big_b * (1.0 - a);
        out.push(big_a * pow_int(a, b, beta) + big_b * pow_int(a, b, beta + 1.0));
    }
    let last = nodes[nodes.len() - 1];
    out.push(psi[psi.len() - 1] * (1.0 - last).powf(beta + 1.0) / (beta + 1.0));
    out
}

/// Which of the conditions needed by the theory and the estimator hold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionReport {
    /// `q > -1`, so the weight `(1 - x^2)^q` is integrable.
    pub q_valid: bool,
    /// `E[1 / (1 - |a|)] < ∞`.
    pub moment_ok: bool,
    /// `∫ phi^2 / (1 - x^2)^q < ∞`.
    pub phicond_ok: bool,
    /// Open interval of `q` for which the previous condition holds.
    pub q_admissible_range: (f64, f64),
}

impl MixingLaw {
    pub fn beta_edge(beta: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) {
            return domain(format!("edge exponent must be positive, got {beta}"));
        }
        Ok(MixingLaw::BetaEdge { beta })
    }

    pub fn point_mass(c: f64) -> Result<Self> {
        if !(c > -1.0 && c < 1.0) {
            return domain(format!("point mass must lie in (-1, 1), got {c}"));
        }
        Ok(MixingLaw::PointMass { c })
    }

    /// Table density whose values must already integrate to one.
    pub fn table(nodes: Vec<f64>, phi: Vec<f64>, beta: f64) -> Result<Self> {
        Ok(MixingLaw::Table(Arc::new(TableDensity::new(nodes, phi, beta, false)?)))
    }

    /// Table density rescaled to integrate to one.
    pub fn table_unnormalized(nodes: Vec<f64>, phi: Vec<f64>, beta: f64) -> Result<Self> {
        Ok(MixingLaw::Table(Arc::new(TableDensity::new(nodes, phi, beta, true)?)))
    }

    /// Exponent of `(1-x)` in the density near the unit root.
    pub fn edge_beta(&self) -> Option<f64> {
        match self {
            MixingLaw::BetaEdge { beta } => Some(*beta),
            MixingLaw::PointMass { .. } => None,
            MixingLaw::Table(t) => Some(t.beta),
        }
    }

    /// `lim_{x→1} phi(x) / (1-x)^beta`.
    pub fn psi_at_one(&self) -> Result<f64> {
        match self {
            MixingLaw::BetaEdge { beta } => Ok((beta + 1.0) * (beta + 2.0) / 2f64.powf(beta + 1.0)),
            MixingLaw::PointMass { .. } => domain("a point mass has no density near the unit root"),
            MixingLaw::Table(t) => Ok(t.psi[t.psi.len() - 1]),
        }
    }

    /// `phi(x) / (1-x)^beta`, the smooth profile of the density.
    pub fn psi(&self, at: &Abscissa) -> Result<f64> {
        match self {
            MixingLaw::BetaEdge { beta } => Ok(at.opx / beta_edge_normalizer(*beta)),
            MixingLaw::PointMass { .. } => domain("a point mass has no density"),
            MixingLaw::Table(t) => Ok(t.psi_at(at.x)),
        }
    }

    pub fn density(&self, x: f64) -> Result<f64> {
        if !(x > -1.0 && x < 1.0) {
            return domain(format!("density is defined on (-1, 1), got {x}"));
        }
        self.density_at(&Abscissa::new(x))
    }

    pub fn density_at(&self, at: &Abscissa) -> Result<f64> {
        let beta = self.edge_beta().unwrap_or(0.0);
        Ok(self.psi(at)? * at.omx.powf(beta))
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Abscissa {
        match self {
            MixingLaw::BetaEdge { beta } => sample_beta_edge(*beta, rng),
            MixingLaw::PointMass { c } => Abscissa::new(*c),
            MixingLaw::Table(t) => sample_table(t, rng),
        }
    }

    /// `E g(a)`.
    pub fn moment_functional<T, F>(&self, g: &EdgeIntegrand<F>) -> Result<T>
    where
        T: Scalar,
        F: Fn(&Abscissa) -> T,
    {
        match self {
            MixingLaw::PointMass { c } => {
                let at = Abscissa::new(*c);
                Ok((g.smooth)(&at) * (at.omx.powf(-g.upper_pole) * at.opx.powf(-g.lower_pole)))
            }
            MixingLaw::BetaEdge { beta } => {
                let up = beta - g.upper_pole;
                let low = 1.0 - g.lower_pole;
                if up <= -1.0 {
                    return domain(format!(
                        "E[(1-a)^-{k}] diverges: the edge exponent {beta} must exceed {m}",
                        k = g.upper_pole,
                        m = g.upper_pole - 1.0
                    ));
                }
                if low <= -1.0 {
                    return domain(format!(
                        "E[(1+a)^-{k}] diverges: pole order at -1 must be below 2",
                        k = g.lower_pole
                    ));
                }
                let breaks = interior_breaks(-1.0 + EDGE_WIDTH, 1.0 - EDGE_WIDTH, INTERIOR_PANELS);
                let rule = EndpointRule::new(&EndpointLayout {
                    upper_power: up,
                    lower_power: low,
                    breaks,
                    graded_upper: true,
                    graded_lower: true,
                    panel_order: INTERIOR_ORDER,
                })?;
                let z = beta_edge_normalizer(*beta);
                Ok(rule.integrate(|at| (g.smooth)(at)) * (1.0 / z))
            }
            MixingLaw::Table(t) => {
                let up = t.beta - g.upper_pole;
                if up <= -1.0 {
                    return domain(format!(
                        "E[(1-a)^-{k}] diverges: the edge exponent {b} must exceed {m}",
                        k = g.upper_pole,
                        b = t.beta,
                        m = g.upper_pole - 1.0
                    ));
                }
                let rule = EndpointRule::new(&EndpointLayout {
                    upper_power: up,
                    lower_power: -g.lower_pole,
                    breaks: t.nodes.clone(),
                    graded_upper: true,
                    graded_lower: false,
                    panel_order: TABLE_CELL_ORDER,
                })?;
                Ok(rule.integrate(|at| (g.smooth)(at) * t.psi_at(at.x)))
            }
        }
    }

    /// `r(t) = sigma_w2 E[a^t / (1 - a^2)]`.
    pub fn theoretical_r(&self, t: u32, sigma_w2: f64) -> Result<f64> {
        let t = i32::try_from(t).map_err(|_| Error::Domain("lag too large".into()))?;
        let e: f64 = self.moment_functional(&EdgeIntegrand::with_poles(
            |at: &Abscissa| at.x.powi(t),
            1.0,
            1.0,
        ))?;
        Ok(sigma_w2 * e)
    }

    /// `sigma_w2 E(1-a)^{-2}`: the long-run variance of the aggregate,
    /// `lim Var(S_n) / n`.
    pub fn long_run_variance(&self, sigma_w2: f64) -> Result<f64> {
        if let Some(b) = self.edge_beta() {
            if b <= 1.0 {
                return domain(format!(
                    "E(1-a)^-2 is infinite for edge exponent {b}; it needs an exponent above 1"
                ));
            }
        }
        let e: f64 = self.moment_functional(&EdgeIntegrand::with_poles(|_: &Abscissa| 1.0, 2.0, 0.0))?;
        Ok(sigma_w2 * e)
    }

    /// `2 sigma_w2 E(1-a)^{-2}`, the variance constant attached to the
    /// Brownian partial-sum regime as it is usually stated.
    ///
    /// This is twice [`MixingLaw::long_run_variance`]: with `a = 0` the
    /// aggregate is white noise of variance `sigma_w2` and `Var(S_n)/n` is
    /// `sigma_w2`, not `2 sigma_w2`.
    pub fn sigma_phi2(&self, sigma_w2: f64) -> Result<f64> {
        Ok(2.0 * self.long_run_variance(sigma_w2)?)
    }

    /// Fourth cumulant of the marginal aggregate, `pi_4 E[1 / (1 - a^4)]`.
    pub fn cum4_theoretical(&self, t: &LevyTriplet) -> Result<f64> {
        let pi4 = t.levy_moment(4.0)?;
        if pi4 == 0.0 {
            return Ok(0.0);
        }
        let e: f64 = self.moment_functional(&EdgeIntegrand::with_poles(
            |at: &Abscissa| 1.0 / (1.0 + at.x * at.x),
            1.0,
            1.0,
        ))?;
        Ok(pi4 * e)
    }

    /// `∫ phi^2 (1 - x^2)^{-q} dx`.
    pub fn phi_sq_weighted(&self, q: f64) -> Result<f64> {
        match self {
            MixingLaw::PointMass { .. } => domain("a point mass has no square-integrable density"),
            MixingLaw::BetaEdge { beta } => {
                let up = 2.0 * beta - q;
                let low = 2.0 - q;
                if up <= -1.0 || low <= -1.0 {
                    return domain(format!(
                        "∫phi^2/(1-x^2)^q diverges for q={q}; it needs q < {}",
                        (1.0 + 2.0 * beta).min(3.0)
                    ));
                }
                let rule = EndpointRule::new(&EndpointLayout {
                    upper_power: up,
                    lower_power: low,
                    breaks: interior_breaks(-1.0 + EDGE_WIDTH, 1.0 - EDGE_WIDTH, INTERIOR_PANELS),
                    graded_upper: true,
                    graded_lower: true,
                    panel_order: INTERIOR_ORDER,
                })?;
                let z = beta_edge_normalizer(*beta);
                Ok(rule.integrate(|_| 1.0) / (z * z))
            }
            MixingLaw::Table(t) => {
                let up = 2.0 * t.beta - q;
                if up <= -1.0 {
                    return domain(format!(
                        "∫phi^2/(1-x^2)^q diverges for q={q}; it needs q < {}",
                        1.0 + 2.0 * t.beta
                    ));
                }
                let rule = EndpointRule::new(&EndpointLayout {
                    upper_power: up,
                    lower_power: -q,
                    breaks: t.nodes.clone(),
                    graded_upper: true,
                    graded_lower: false,
                    panel_order: TABLE_CELL_ORDER,
                })?;
                Ok(rule.integrate(|at| {
                    let p = t.psi_at(at.x);
                    p * p
                }))
            }
        }
    }

    pub fn check_conditions(&self, q: f64) -> ConditionReport {
        let q_valid = q > -1.0;
        let (moment_ok, upper) = match self {
            MixingLaw::PointMass { .. } => (true, -1.0),
            MixingLaw::BetaEdge { beta } => (true, (1.0 + 2.0 * beta).min(3.0)),
            MixingLaw::Table(t) => {
                let m: Result<f64> = self.moment_functional(&EdgeIntegrand::with_poles(
                    |at: &Abscissa| if at.x >= 0.0 { 1.0 } else { at.omx / at.opx },
                    1.0,
                    0.0,
                ));
                let ok = m.map(|v| v.is_finite()).unwrap_or(false);
                // The support starts inside (-1, 1), so only x = 1 constrains q.
                (ok, 1.0 + 2.0 * t.beta)
            }
        };
        let phicond_ok = q_valid
            && q < upper
            && match self {
                MixingLaw::Table(_) => self.phi_sq_weighted(q).map(|v| v.is_finite()).unwrap_or(false),
                _ => true,
            };
        ConditionReport { q_valid, moment_ok, phicond_ok, q_admissible_range: (-1.0, upper) }
    }
}

fn interior_breaks(lo: f64, hi: f64, panels: usize) -> Vec<f64> {
    (0..=panels).map(|i| lo + (hi - lo) * i as f64 / panels as f64).collect()
}

fn sample_table<R: Rng + ?Sized>(t: &TableDensity, rng: &mut R) -> Abscissa {
    let b1 = t.beta + 1.0;
    let n = t.nodes.len();
    loop {
        let mut u: f64 = rng.random::<f64>() * t.cell_mass.iter().sum::<f64>();
        let mut cell = t.cell_mass.len() - 1;
        for (i, &m) in t.cell_mass.iter().enumerate() {
            if u < m {
                cell = i;
                break;
            }
            u -= m;
        }
        // Proposal proportional to (1-x)^beta on the cell, by inversion in the gap 1-x.
        let gap_hi = 1.0 - t.nodes[cell];
        let gap_lo = if cell + 1 < n { 1.0 - t.nodes[cell + 1] } else { 0.0 };
        let v: f64 = rng.random();
        let p_hi = gap_hi.powf(b1);
        let p_lo = gap_lo.powf(b1);
        let gap = (p_hi - v * (p_hi - p_lo)).powf(1.0 / b1);
        let at = Abscissa::from_upper_gap(gap);
        if cell + 1 == n {
            return at;
        }
        let cap = t.psi[cell].max(t.psi[cell + 1]);
        if cap <= 0.0 {
            continue;
        }
        if rng.random::<f64>() * cap <= t.psi_at(at.x) {
            return at;
        }
    }
}
