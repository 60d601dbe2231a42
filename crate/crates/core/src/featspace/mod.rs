//! Feature-space inspection: PCA, density curves, age brackets and
//! distribution-shift tests on PCA scores.

mod brackets;
mod kde;
mod matrix;
mod pca;
mod shift;

pub use brackets::{bracket_ages, AgeBracketing};
pub(crate) use kde::quantile_sorted;
pub use kde::{bandwidth, kde, Bandwidth, KdeCurve};
pub use matrix::FeatureMatrix;
pub use pca::{pca_fit, pca_fit_rows, pca_project, pca_project_rows, PcaModel};
pub use shift::{feature_shift_tests, Comparison, ShiftRow, ShiftTable, MIN_SIDE};
