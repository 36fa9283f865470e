//! Tracy-Widom laws, classical locations, rigidity and the Monte Carlo edge
//! harness.

pub mod airy;
pub mod classical;
pub mod mc;
pub mod tracy_widom;

pub use classical::{classical_locations, rescaled_solution, rigidity_report, RigidityReport};
pub use mc::{candidate_laws, mc_edge, regime_test, MCRunResult, Regime, RegimeConfig, RegimeVerdict};
pub use tracy_widom::{tw_cdf, Beta, CdfValue, LimitLaw, TwTable};
