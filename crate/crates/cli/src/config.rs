//! Run configuration: one TOML file, every key optional.

use std::path::Path;

use aggar_core::limits::ScaleStat;
use aggar_core::panel::DEFAULT_BUDGET;
use aggar_core::{CoefficientDesign, InitScheme, JumpFamily, LevyTriplet, MixingLaw, PanelConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Cap on unit-steps (units × time steps × replicates).
    pub budget: Option<u64>,
    pub panel: PanelSection,
    pub mixing: MixingSection,
    pub triplet: TripletSection,
    pub theory: TheorySection,
    pub scaling: ScalingSection,
    pub disagg: DisaggSection,
    pub mise: MiseSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            budget: None,
            panel: PanelSection::default(),
            mixing: MixingSection::default(),
            triplet: TripletSection::default(),
            theory: TheorySection::default(),
            scaling: ScalingSection::default(),
            disagg: DisaggSection::default(),
            mise: MiseSection::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DesignKey {
    Plain,
    EdgeTilted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitKey {
    TruncatedSeries,
    Burnin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PanelSection {
    pub n_micro: usize,
    pub n_time: usize,
    pub design: DesignKey,
    pub tilt_exponent: f64,
    pub init: InitKey,
    pub init_tol: f64,
    pub init_coarsening: f64,
    pub burnin_steps: u64,
    /// Pins the coefficient draws across seeds and replicates.
    pub coef_seed: Option<u64>,
}

impl Default for PanelSection {
    fn default() -> Self {
        PanelSection {
            n_micro: 2000,
            n_time: 10_000,
            design: DesignKey::Plain,
            tilt_exponent: -0.5,
            init: InitKey::TruncatedSeries,
            init_tol: 1e-10,
            init_coarsening: 1e-2,
            burnin_steps: 10_000,
            coef_seed: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MixingFamily {
    BetaEdge,
    PointMass,
    Table,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixingSection {
    pub family: MixingFamily,
    pub beta: Option<f64>,
    pub c: Option<f64>,
    /// CSV with header `x,phi` (rescaled to integrate to one); relative paths
    /// resolve against the config file.
    pub table: Option<String>,
    pub table_beta: Option<f64>,
}

impl Default for MixingSection {
    fn default() -> Self {
        MixingSection { family: MixingFamily::BetaEdge, beta: Some(0.75), c: None, table: None, table_beta: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpKey {
    None,
    CenteredGamma,
    TruncatedStable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TripletSection {
    pub mu: f64,
    /// Defaults to 1 without jumps and 0 with jumps.
    pub sigma: Option<f64>,
    pub family: JumpKey,
    pub shape: Option<f64>,
    pub scale: Option<f64>,
    pub alpha: Option<f64>,
    pub c_plus: Option<f64>,
    pub c_minus: Option<f64>,
    pub cutoff: Option<f64>,
}

impl Default for TripletSection {
    fn default() -> Self {
        TripletSection {
            mu: 0.0,
            sigma: None,
            family: JumpKey::None,
            shape: None,
            scale: None,
            alpha: None,
            c_plus: None,
            c_minus: None,
            cutoff: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    pub thetas: Vec<f64>,
    pub max_lag: u32,
    pub tol: f64,
}

impl Default for TheorySection {
    fn default() -> Self {
        TheorySection { thetas: vec![0.25, 0.5, 1.0, 2.0], max_lag: 64, tol: 1e-8 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKey {
    Panel,
    IidNormal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatKey {
    MedianAbs,
    Iqr,
    StdDev,
}

impl From<StatKey> for ScaleStat {
    fn from(k: StatKey) -> Self {
        match k {
            StatKey::MedianAbs => ScaleStat::MedianAbs,
            StatKey::Iqr => ScaleStat::Iqr,
            StatKey::StdDev => ScaleStat::StdDev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScalingSection {
    pub source: SourceKey,
    /// Explicit grid; otherwise powers of two from `log2_min` to `log2_max`.
    pub n_grid: Option<Vec<usize>>,
    pub log2_min: u32,
    pub log2_max: u32,
    pub replications: usize,
    pub scale_stat: StatKey,
}

impl Default for ScalingSection {
    fn default() -> Self {
        ScalingSection {
            source: SourceKey::Panel,
            n_grid: None,
            log2_min: 8,
            log2_max: 14,
            replications: 100,
            scale_stat: StatKey::MedianAbs,
        }
    }
}

impl ScalingSection {
    pub fn grid(&self) -> Vec<usize> {
        match &self.n_grid {
            Some(g) => g.clone(),
            None => (self.log2_min..=self.log2_max).map(|k| 1usize << k).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisaggSection {
    /// Series CSV (`t,value`) to analyse; a panel is simulated when absent.
    pub input: Option<String>,
    pub q: f64,
    /// Degrees to report; `floor(gamma ln n)` when absent.
    pub k: Option<Vec<usize>>,
    pub gamma: f64,
    /// Known innovation variance; estimated from the series when absent.
    pub sigma_w2: Option<f64>,
    pub grid_points: usize,
}

impl Default for DisaggSection {
    fn default() -> Self {
        DisaggSection {
            input: None,
            q: 0.5,
            k: None,
            gamma: aggar_core::disagg::DEFAULT_GAMMA,
            sigma_w2: None,
            grid_points: aggar_core::disagg::GRID_POINTS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MiseSection {
    pub q_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub replications: usize,
}

impl Default for MiseSection {
    fn default() -> Self {
        MiseSection {
            q_grid: vec![-0.5, -0.25, 0.0, 0.25, 0.5, 0.75],
            k_grid: (0..=6).collect(),
            replications: 20,
        }
    }
}

fn need(v: Option<f64>, section: &str, key: &str) -> Result<f64, CliError> {
    v.ok_or_else(|| CliError::Config(format!("[{section}] needs `{key}`")))
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.display().to_string(), message: e.to_string() })?;
        let mut cfg = Self::parse(&text)?;
        // make table paths independent of the working directory
        if let (Some(t), Some(dir)) = (&cfg.mixing.table, path.parent()) {
            if Path::new(t).is_relative() {
                cfg.mixing.table = Some(dir.join(t).to_string_lossy().into_owned());
            }
        }
        if let (Some(t), Some(dir)) = (&cfg.disagg.input, path.parent()) {
            if Path::new(t).is_relative() {
                cfg.disagg.input = Some(dir.join(t).to_string_lossy().into_owned());
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn budget(&self) -> u128 {
        self.budget.map_or(DEFAULT_BUDGET, u128::from)
    }

    pub fn triplet(&self) -> Result<LevyTriplet, CliError> {
        let t = &self.triplet;
        let jumps = match t.family {
            JumpKey::None => JumpFamily::NoJumps,
            JumpKey::CenteredGamma => JumpFamily::CenteredGamma {
                shape: need(t.shape, "triplet", "shape")?,
                scale: need(t.scale, "triplet", "scale")?,
            },
            JumpKey::TruncatedStable => JumpFamily::TruncatedStable {
                alpha: need(t.alpha, "triplet", "alpha")?,
                c_plus: need(t.c_plus, "triplet", "c_plus")?,
                c_minus: need(t.c_minus, "triplet", "c_minus")?,
                cutoff: need(t.cutoff, "triplet", "cutoff")?,
            },
        };
        let sigma = t.sigma.unwrap_or(if t.family == JumpKey::None { 1.0 } else { 0.0 });
        Ok(LevyTriplet::new(t.mu, sigma, jumps)?)
    }

    pub fn mixing(&self) -> Result<MixingLaw, CliError> {
        let m = &self.mixing;
        Ok(match m.family {
            MixingFamily::BetaEdge => MixingLaw::beta_edge(need(m.beta, "mixing", "beta")?)?,
            MixingFamily::PointMass => MixingLaw::point_mass(need(m.c, "mixing", "c")?)?,
            MixingFamily::Table => {
                let path = m.table.as_ref().ok_or_else(|| CliError::Config("[mixing] needs `table`".into()))?;
                let (x, phi) = read_table(Path::new(path))?;
                MixingLaw::table_unnormalized(x, phi, need(m.table_beta, "mixing", "table_beta")?)?
            }
        })
    }

    pub fn panel(&self) -> Result<PanelConfig, CliError> {
        let p = &self.panel;
        let mut cfg = PanelConfig::new(p.n_micro, p.n_time, self.seed, self.mixing()?, self.triplet()?);
        cfg.design = match p.design {
            DesignKey::Plain => CoefficientDesign::Plain,
            DesignKey::EdgeTilted => CoefficientDesign::EdgeTilted { exponent: p.tilt_exponent },
        };
        cfg.init = match p.init {
            InitKey::TruncatedSeries => InitScheme::TruncatedSeries { tol: p.init_tol, coarsening: p.init_coarsening },
            InitKey::Burnin => InitScheme::ZeroPlusBurnin { steps: p.burnin_steps },
        };
        cfg.coef_seed = p.coef_seed;
        cfg.budget = self.budget();
        cfg.validate()?;
        Ok(cfg)
    }
}

fn read_table(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| CliError::Config(format!("cannot read table {}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(|e| CliError::Config(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["x", "phi"] {
        return Err(CliError::Config(format!("table {} must have header `x,phi`", path.display())));
    }
    let mut x = Vec::new();
    let mut phi = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| CliError::Config(e.to_string()))?;
        let parse = |s: &str| s.trim().parse::<f64>().map_err(|e| CliError::Config(format!("bad number `{s}`: {e}")));
        x.push(parse(&rec[0])?);
        phi.push(parse(&rec[1])?);
    }
    Ok((x, phi))
}

/// Named configurations shipped with the binary.
pub const PRESETS: &[(&str, &str)] = &[
    ("smoke", include_str!("../presets/smoke.toml")),
    ("gamma_long_run", include_str!("../presets/gamma_long_run.toml")),
    ("regime_i", include_str!("../presets/regime_i.toml")),
    ("regime_ii", include_str!("../presets/regime_ii.toml")),
    ("regime_iii", include_str!("../presets/regime_iii.toml")),
    ("regime_iv", include_str!("../presets/regime_iv.toml")),
    ("clt_oracle", include_str!("../presets/clt_oracle.toml")),
    ("disagg_beta025", include_str!("../presets/disagg_beta025.toml")),
    ("disagg_beta075", include_str!("../presets/disagg_beta075.toml")),
    ("disagg_beta125", include_str!("../presets/disagg_beta125.toml")),
];

pub fn preset(name: &str) -> Result<RunConfig, CliError> {
    let text = PRESETS.iter().find(|(n, _)| *n == name).map(|(_, t)| *t).ok_or_else(|| {
        let names: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::Config(format!("unknown preset `{name}`; available: {}", names.join(", ")))
    })?;
    RunConfig::parse(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = RunConfig::parse("").unwrap();
        assert_eq!(c, RunConfig::default());
        assert_eq!(c.triplet().unwrap(), LevyTriplet::gaussian(1.0).unwrap());
    }

    #[test]
    fn round_trips_through_toml() {
        for (name, _) in PRESETS {
            let c = preset(name).unwrap();
            assert_eq!(RunConfig::parse(&c.to_toml()).unwrap(), c, "{name}");
            c.panel().unwrap();
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(RunConfig::parse("sed = 3"), Err(CliError::Config(_))));
        let c = RunConfig::parse("[triplet]\nfamily = \"centered_gamma\"\nshape = 1.0").unwrap();
        assert!(matches!(c.triplet(), Err(CliError::Config(m)) if m.contains("scale")));
        let c = RunConfig::parse("[mixing]\nbeta = -1.0").unwrap();
        assert!(c.mixing().is_err());
        assert!(preset("nope").is_err());
    }
}
