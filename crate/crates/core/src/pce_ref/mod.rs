//! Reference chaos coefficients: closed forms, the propagator system and
//! Monte-Carlo projection, with truncated-expansion evaluation.

mod closed_form;
mod mc_project;
mod propagator;
mod table;

pub use closed_form::{
    active_slots, gbm_coeff, gbm_index_set, gbm_second_moment, gbm_table, ou_coeff, ou_second_moment, ou_table,
};
pub use mc_project::{mc_project_coeff, McEstimate, McOptions};
pub use propagator::{propagator_solve, propagator_solve_on, AffineSdeCoeffs, TimeFn, MAX_PROPAGATOR_INDICES};
pub use table::{pce_eval, uniform_grid, CoefficientTable};
