//! Kronecker-factored curvature, penalties and curvature oracles.

mod eigen;
mod factors;
mod fisher;
mod hessian;
mod kron;

pub use eigen::{max_eigenvalue, EigenEstimate};
pub use factors::{collect_factors, read_snapshot, write_snapshot, CurvatureSnapshot, LayerFactors};
pub use fisher::{fisher_diag, fisher_from_sample_grads};
pub use hessian::{
    exact_hessian, exact_hessian_full, exact_hessian_raw, fd_hessian, fd_jacobian, HESSIAN_FD_STEP, HESSIAN_PARAM_CAP,
};
pub use kron::{
    kfac_penalty_grad, kfac_penalty_grad_with, kfac_quadratic, kfac_quadratic_with, kron_explicit,
    kron_explicit_capped, layer_quadratic, unvec_col, vec_col, PenaltyForm, KRON_ORACLE_CAP,
};
