//! Scenario driver library behind the `acas` binary: scenario schema,
//! the generate/simulate/authenticate pipeline stages and report
//! rendering.

pub mod pipeline;
pub mod report;
pub mod scenario;

pub use pipeline::{
    cmd_authenticate, cmd_e2e, cmd_generate, cmd_simulate, FullReport, PipelineError,
};
pub use scenario::Scenario;
