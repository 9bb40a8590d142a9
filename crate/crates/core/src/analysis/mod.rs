//! Discrete quantities of the a priori and stability estimates, and checkers
//! that verify the estimates on concrete runs.

pub mod constants;
pub mod diagnostics;
pub mod functional;
pub mod report;
pub mod triangle;

pub use constants::{derive_constants, ConstantsTable, DELTA_CAP};
pub use diagnostics::{
    conservation_report, continuity_modulus, ConservationSummary, ConservationTracker,
};
pub use functional::{
    check_glimm_bound, difference_functionals, functional_sweep, row_functionals, FunctionalRecord,
};
pub use report::{slack, CheckRecord, Report, SummaryRow, SLACK_REL};
pub use triangle::{
    check_interaction_sum, check_triangle_estimates, interaction_sum, pointwise_bound_report,
    triangle_row_mass, TriangleSpec,
};
