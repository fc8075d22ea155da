//! Contemporaneous aggregation of random-coefficient AR(1) panels driven by
//! infinitely divisible innovations.
//!
//! - [`levy`]: Lévy triplets, increment sampling, stable laws, regimes.
//! - [`mixing`]: laws of the AR coefficient and their moment functionals.
//! - [`panel`]: simulation of the aggregated panel.
//! - [`limits`]: marginal characteristic function, limit constants and the
//!   partial-sum scaling experiment.
//! - [`disagg`]: Gegenbauer-series estimation of the mixing density.

mod dd;
pub mod disagg;
pub mod error;
pub mod levy;
pub mod limits;
pub mod mixing;
pub mod panel;
pub mod quad;
pub mod rng;
pub mod special;

pub use disagg::{
    estimate, evaluate_phi_hat, mise_experiment, select_k, DensityEstimate, GegenbauerBasis, MiseRow,
    VarianceMode,
};
pub use error::{Error, Result};
pub use levy::{JumpFamily, LevyTriplet, Regime, RegimeReport};
pub use limits::{
    partial_sum_log_cf, run_scaling_experiment, theta_log_cf, IidNormalSource, PanelSource, PathSource, ScaleStat,
    ScalingExperiment,
};
pub use mixing::MixingLaw;
pub use panel::{simulate_aggregate, AggregatedSeries, CoefficientDesign, InitScheme, PanelConfig};
