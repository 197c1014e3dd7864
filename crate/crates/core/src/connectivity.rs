//! Linear mode connectivity: interpolation, running-average merging,
//! λ-scans, the forgetting estimate and the multitask loss bound.

mod forgetting;
mod path;

pub use forgetting::{
    bound_check, forgetting_actual, forgetting_actual_with, forgetting_quadratic, forgetting_record, BoundRecord,
    CurvatureOperator, CurvatureSource, DenseCurvature, ForgettingRecord, BOUND_SLACK,
};
pub use path::{interpolate, merge_running, scan, uniform_grid, validate_grid, PathScan, ScanRow};

/// Default number of points on a λ-scan grid (step 0.05).
pub const DEFAULT_GRID_POINTS: usize = 21;
