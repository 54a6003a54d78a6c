//! Scenario files in, JSON reports and CSV sidecars out.

pub mod bundled;
pub mod report;
pub mod run;
pub mod scenario;

pub use report::{ReportDocument, TaskReport, TaskResult, TaskStatus};
pub use run::{run_scenario, RunOptions, RunOutput};
pub use scenario::{parse_scenario, Diagnostic, DiagnosticKind, Scenario, TaskKind, TaskSpec};

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/scenarios.md")]
mod book_scenarios {}
