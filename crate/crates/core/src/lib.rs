//! Multi-factor stochastic-volatility model for commodity futures with
//! seasonal mean-reversion levels: characteristic function, Fourier pricing of
//! vanilla and calendar spread options, correlation analytics and a Monte
//! Carlo reference engine.

// Validation is written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charfn;
pub mod config;
pub mod correlation;
pub mod error;
pub mod model;
pub mod montecarlo;
pub mod ode;
pub mod quad;
pub mod seasonality;
pub mod spread;
pub mod vanilla;

pub use charfn::{CfArgs, CfEngine, ComplexValue};
pub use config::RunConfig;
pub use error::{Error, Result};
pub use model::{FellerCheck, FuturesCurve, ModelConfig, VolFactor};
pub use montecarlo::{McEstimate, McSettings};
pub use seasonality::{Pattern, SeasonalitySpec, ThetaBounds};
pub use spread::{cso_call, cso_put, CsoSpec};
pub use vanilla::{price_vanilla, OptionKind, PriceResult, VanillaSpec};
