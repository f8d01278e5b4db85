//! Closed forms and quadratures for every constant and covariance the
//! simulators are checked against.

mod constants;
mod covariance;
mod exact;
mod records;
mod weights;

pub use constants::{
    a_h, a_h_second_route, chung_constant, integral_liminf_constant, kappa_known, kappa_lq_known,
    lil_constant, sigma2_b0, sigma2_w, sigma_tilde2_b, sigma_tilde2_w, KappaValue,
};
pub use covariance::{
    r_fbm_stationary, r_lambda, r_rec, r_smoothed, r_smoothed_quadrature, sigma2_general,
    sigma2_general_checked, DecayBound, StationaryCovariance, VarianceCheck, MAX_POINT_DEPTH,
};
pub use exact::{bridge_survival, brownian_sup_smallball_exact, brownian_sup_smallball_log};
pub use records::{
    spec_from_parts, ConstantRecord, ConstantRequest, ConstantValue, SCHEMA_VERSION,
};
pub use weights::{lq_constant, lr_norm, w_norm, LqConstant, LqMode, Segment, Shape, Weight};
