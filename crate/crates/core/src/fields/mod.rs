//! Prescribed electromagnetic environments, the field tensor and numeric
//! differential operators.

pub mod config;
pub mod diff;
pub mod expr;
pub mod tensor;

pub use config::{
    numeric_curl, numeric_div, numeric_grad, Axis, Envelope, ExpressionField, FieldConfig, FieldJacobian, FieldKind,
    FieldPart, DEFAULT_EXCLUSION_RADIUS, RAMP_FRACTION,
};
pub use expr::{parse_field_expression, Expr, ExprKind};
pub use tensor::{assemble_field_tensor, FieldSample, FieldTensor};

/// Default finite-difference step in length units.
pub const DEFAULT_STEP: f64 = 1e-4;
