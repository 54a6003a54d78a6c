use nalgebra::Vector3;
use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};
use topophase::dynamics::{InterferometerResult, Op};
use topophase::gauge::ConditionReport;
use topophase::phase::PhaseBreakdown;
use topophase::spinor::DomainResiduals;

use crate::scenario::{DriverKind, PhaseKind};

/// Hex SHA-256 of the scenario text.
pub fn scenario_hash(source: &str) -> String {
    hex::encode(Sha256::digest(source.as_bytes()))
}

/// Per-task seed: the first eight bytes of SHA-256(seed ‖ task name), so a
/// task's stream depends on its name only, never on its position.
pub fn task_seed(seed: u64, task: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(task.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument {
    pub toolkit_version: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub seed: u64,
    pub sign_convention: String,
    /// Set when at least one task failed.
    pub partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
    pub tasks: Vec<TaskReport>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct TaskReport {
    pub name: String,
    pub kind: String,
    pub seed: u64,
    pub status: TaskStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<TaskResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Sidecar files, relative to the report.
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub files: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_seconds: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum TaskResult {
    Phase(PhaseResult),
    Conditions(ConditionsResult),
    Evolve(InterferometerResult),
    Precession(PrecessionResult),
    Autocorrelation(Box<AutocorrelationReport>),
    IdentityChecks(IdentityResult),
}

#[derive(Debug, Clone, Serialize)]
pub struct PhaseResult {
    pub which: PhaseKind,
    pub value: f64,
    pub error_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub breakdown: Option<PhaseBreakdown>,
    /// Winding about the field's singular axis, for closed paths.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub winding: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinements: Option<u32>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionsResult {
    pub pass: bool,
    pub ac_pass: bool,
    pub sab_pass: bool,
    pub report: ConditionReport,
}

pub const EFFECTIVE_NOTE: &str =
    "effective precession uses Omega = 2 mu (B_eff + E_eff x v); the constant is fixed so that E_eff = 0 reproduces the 2 mu B frequency";

#[derive(Debug, Clone, Serialize)]
pub struct PrecessionResult {
    pub driver: DriverKind,
    pub steps: usize,
    pub initial_bloch: [f64; 3],
    pub final_bloch: [f64; 3],
    /// max | |⟨σ⟩| − 1 | along the trajectory.
    pub norm_drift: f64,
    /// max |⟨σ⟩(t) − ⟨σ⟩(t0)|.
    pub max_deviation: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
}

pub type Matrix = [[[f64; 2]; 2]; 2];

pub fn matrix(op: &Op) -> Matrix {
    let z = |c: Complex64| [c.re, c.im];
    [[z(op[(0, 0)]), z(op[(0, 1)])], [z(op[(1, 0)]), z(op[(1, 1)])]]
}

#[derive(Debug, Clone, Serialize)]
pub struct Expectations {
    pub c: [f64; 2],
    pub s: [f64; 2],
    pub s_plus: [f64; 2],
    pub s_minus: [f64; 2],
}

#[derive(Debug, Clone, Serialize)]
pub struct AutocorrelationReport {
    pub driver: DriverKind,
    pub delta_t: f64,
    pub c: Matrix,
    pub s: Matrix,
    pub s_plus: Matrix,
    pub s_minus: Matrix,
    pub expectations: Expectations,
    pub hermiticity_residual: f64,
    pub symmetrized_residual: f64,
    pub symmetrized_residual_s: f64,
    pub unsymmetrized_residual: f64,
    pub commutator_norms: [[f64; 3]; 3],
    pub propagator_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<&'static str>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IdentityResult {
    pub seed: u64,
    pub trials: usize,
    pub max_kinetic: DomainResiduals,
    pub max_moment: DomainResiduals,
}

pub fn triple(v: &Vector3<f64>) -> [f64; 3] {
    [v.x, v.y, v.z]
}

/// Pretty JSON with a trailing newline.
pub fn to_json(report: &ReportDocument) -> String {
    let mut s = serde_json::to_string_pretty(report).expect("report types serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn task_seeds_depend_on_name_only() {
        assert_eq!(task_seed(0, "a"), task_seed(0, "a"));
        assert_ne!(task_seed(0, "a"), task_seed(0, "b"));
        assert_ne!(task_seed(0, "a"), task_seed(1, "a"));
    }

    #[test]
    fn hash_is_hex_sha256() {
        assert_eq!(scenario_hash(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    }
}
