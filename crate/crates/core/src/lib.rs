//! Laguerre spectral collocation combined with spectral homotopy analysis
//! for infinite-horizon nonlinear optimal control.

pub mod laguerre_basis;
pub mod sham_engine;
pub mod ocp_model;
pub mod oracle_bvp;
