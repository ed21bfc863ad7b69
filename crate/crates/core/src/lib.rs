//! Price-augmented logit-hazard diffusion: the adoption law, parameter
//! estimation from adoption/price series, finite-horizon optimal pricing,
//! and rebate equilibria between a policymaker and a monopolist.

pub mod diffusion;
pub mod error;
pub mod estimation;
pub mod lambert;
pub mod nelder_mead;
pub mod pricing;
pub mod rebate;
pub mod scalar;

pub use diffusion::{
    hazard, incremental_profit, normalize_alpha, simulate, step, MarketSpec, ModelParams,
    Trajectory,
};
pub use error::{Error, Result};
pub use estimation::{fit, nrmse, predict, AdoptionSeries, FitOptions, FitResult};
pub use lambert::{lambert_w0, lambert_w0_exp, WResult};
pub use pricing::{
    estimate_stage_bound, last_period_price, last_period_value, rollout, solve, verify_structure,
    GridConfig, PricingSolution, StageBound, StructureReport,
};
pub use rebate::{
    beta_thresholds, firm_best_response, solve_multi_period, solve_single_period, GameSpec,
    RebateEquilibrium, RebateScan, Thresholds,
};
