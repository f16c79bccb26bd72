//! Simultaneous confidence bands for all contrasts among several regression
//! curves fitted to a common design.
//!
//! The critical value of a band is the upper quantile of the maximum of a
//! chi-square random process indexed by the explanatory variable. This crate
//! evaluates that quantile with the volume-of-tube tail approximation for the
//! process maximum, and ships seeded Monte Carlo oracles that validate every
//! closed-form path.
//!
//! Module map:
//! - [`basis`]: regression basis families (polynomial, trigonometric, B-spline)
//!   with exact first and second derivatives;
//! - [`design`]: information matrix, square-root factor, and the normalized
//!   spherical curve traced by the basis;
//! - [`geometry`]: arc length, Euler characteristic, curvature, and the
//!   local/global critical radii of the index manifold;
//! - [`tube`]: tube-formula tail probabilities, the studentized variant,
//!   the critical-value solver, and the tube-volume identity;
//! - [`inference`]: group fits, contrast bands, the chi-square scan statistic,
//!   pooled variance, and AIC/BIC model selection;
//! - [`montecarlo`]: reproducible simulation oracles (process maxima, coverage
//!   under misspecification, deterministic bias, average band width).

pub mod basis;
pub mod design;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod montecarlo;
pub(crate) mod numeric;
pub mod tube;

pub use basis::{bspline_scalar, BasisSpec, DerivOrder};
pub use design::{information_matrix, sqrt_factor, DesignInfo, Domain, SphericalCurve};
pub use error::{Error, Result};
pub use geometry::{ArcLength, CurveGeometry, GeometryGrids};
pub use inference::{
    chi2_scan, contrast_band, fit_group, fit_groups, h_matrix, model_selection, pooled_variance,
    ContrastBand, GroupFit, GroupSample, ModelSelection,
};
pub use montecarlo::{
    average_band_width, bias_delta, coverage_bias_bound, coverage_simulation,
    simulate_max_process, CoverageResult, MaxProcessSample, SimulationConfig, TrueModel,
};
pub use tube::{
    chi2_upper_tail, critical_value, studentized_tube_tail, studentized_tube_tail_quadrature,
    tube_tail_probability, tube_volume_fraction, TubeFormulaParams,
};
