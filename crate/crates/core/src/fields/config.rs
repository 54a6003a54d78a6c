use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::diff;
use super::expr::{parse_field_expression, Expr, Variable};
use super::tensor::FieldSample;
use crate::error::{invalid, Error, Result};
use crate::spinor::FourVector;

/// Default radius around a singular line inside which sampling is refused.
pub const DEFAULT_EXCLUSION_RADIUS: f64 = 1e-6;

/// Infinite straight line through `point` along unit `direction`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub point: Vector3<f64>,
    pub direction: Vector3<f64>,
}

impl Axis {
    pub fn new(point: Vector3<f64>, direction: Vector3<f64>) -> Result<Self> {
        let n = direction.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(invalid("axis direction must be a nonzero vector"));
        }
        Ok(Self { point, direction: direction / n })
    }

    /// The z axis.
    pub fn z() -> Self {
        Self { point: Vector3::zeros(), direction: Vector3::z() }
    }

    /// Component of `r − point` perpendicular to the axis.
    pub fn radial(&self, r: &Vector3<f64>) -> Vector3<f64> {
        let d = r - self.point;
        d - self.direction * d.dot(&self.direction)
    }

    pub fn distance(&self, r: &Vector3<f64>) -> f64 {
        self.radial(r).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Envelope {
    /// C¹ smoothstep ramps of width 5% of the window at each end.
    Smooth,
    /// Hard on/off switching.
    Square,
}

/// Fraction of the pulse window used by each smooth ramp.
pub const RAMP_FRACTION: f64 = 0.05;

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

/// Six component expressions; missing components are zero.
#[derive(Debug, Clone)]
pub struct ExpressionField {
    pub electric: [Option<Arc<Expr>>; 3],
    pub magnetic: [Option<Arc<Expr>>; 3],
}

impl ExpressionField {
    /// Parses the components given as source text, `None` meaning zero.
    pub fn parse(electric: [Option<&str>; 3], magnetic: [Option<&str>; 3]) -> Result<Self> {
        let parse = |src: Option<&str>| -> Result<Option<Arc<Expr>>> {
            src.map(|s| parse_field_expression(s).map(Arc::new)).transpose()
        };
        Ok(Self {
            electric: [parse(electric[0])?, parse(electric[1])?, parse(electric[2])?],
            magnetic: [parse(magnetic[0])?, parse(magnetic[1])?, parse(magnetic[2])?],
        })
    }

    fn eval_vec(components: &[Option<Arc<Expr>>; 3], event: &FourVector) -> Result<Vector3<f64>> {
        let mut v = Vector3::zeros();
        for (i, c) in components.iter().enumerate() {
            if let Some(expr) = c {
                v[i] = expr.eval(event)?;
            }
        }
        Ok(v)
    }

    fn depends_on(&self, var: Variable) -> bool {
        self.electric.iter().chain(self.magnetic.iter()).flatten().any(|e| e.depends_on(var))
    }

    fn part_depends_on(components: &[Option<Arc<Expr>>; 3], var: Variable) -> bool {
        components.iter().flatten().any(|e| e.depends_on(var))
    }
}

#[derive(Debug, Clone)]
pub enum FieldKind {
    Zero,
    /// Infinite filament with charge per unit length `density`.
    LineCharge {
        density: f64,
        axis: Axis,
    },
    /// Spatially uniform magnetic field switched on during [t_on, t_off].
    PulsedUniformB {
        amplitude: Vector3<f64>,
        t_on: f64,
        t_off: f64,
        envelope: Envelope,
    },
    Expression(ExpressionField),
}

/// Prescribed electromagnetic environment. Immutable once built.
#[derive(Debug, Clone)]
pub struct FieldConfig {
    kind: FieldKind,
    exclusion_radius: f64,
}

/// Spatial derivatives at one event: `electric[(i, j)] = ∂_j E_i`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldJacobian {
    pub electric: Matrix3<f64>,
    pub magnetic: Matrix3<f64>,
}

impl FieldConfig {
    pub fn zero() -> Self {
        Self { kind: FieldKind::Zero, exclusion_radius: DEFAULT_EXCLUSION_RADIUS }
    }

    pub fn line_charge(density: f64, axis: Axis) -> Result<Self> {
        if !density.is_finite() {
            return Err(invalid("line charge density must be finite"));
        }
        Ok(Self { kind: FieldKind::LineCharge { density, axis }, exclusion_radius: DEFAULT_EXCLUSION_RADIUS })
    }

    pub fn pulsed_uniform_b(amplitude: Vector3<f64>, t_on: f64, t_off: f64, envelope: Envelope) -> Result<Self> {
        if !(t_on < t_off) {
            return Err(invalid(format!("pulse window requires t_on < t_off, got [{t_on}, {t_off}]")));
        }
        Ok(Self {
            kind: FieldKind::PulsedUniformB { amplitude, t_on, t_off, envelope },
            exclusion_radius: DEFAULT_EXCLUSION_RADIUS,
        })
    }

    pub fn expression(field: ExpressionField) -> Self {
        Self { kind: FieldKind::Expression(field), exclusion_radius: DEFAULT_EXCLUSION_RADIUS }
    }

    pub fn with_exclusion_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(invalid("exclusion radius must be non-negative"));
        }
        self.exclusion_radius = radius;
        Ok(self)
    }

    pub fn kind(&self) -> &FieldKind {
        &self.kind
    }

    pub fn exclusion_radius(&self) -> f64 {
        self.exclusion_radius
    }

    pub fn singular_axes(&self) -> Vec<Axis> {
        match &self.kind {
            FieldKind::LineCharge { axis, .. } => vec![*axis],
            _ => Vec::new(),
        }
    }

    pub fn is_static(&self) -> bool {
        match &self.kind {
            FieldKind::Zero | FieldKind::LineCharge { .. } => true,
            FieldKind::PulsedUniformB { .. } => false,
            FieldKind::Expression(f) => !f.depends_on(Variable::T),
        }
    }

    /// Whether E or B (selected by `part`) changes with time.
    pub fn part_is_static(&self, part: FieldPart) -> bool {
        match (&self.kind, part) {
            (FieldKind::PulsedUniformB { .. }, FieldPart::Magnetic) => false,
            (FieldKind::Expression(f), FieldPart::Electric) => {
                !ExpressionField::part_depends_on(&f.electric, Variable::T)
            }
            (FieldKind::Expression(f), FieldPart::Magnetic) => {
                !ExpressionField::part_depends_on(&f.magnetic, Variable::T)
            }
            _ => true,
        }
    }

    /// Times where the field (or its first derivative) is not smooth.
    pub fn time_breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            FieldKind::PulsedUniformB { t_on, t_off, envelope, .. } => match envelope {
                Envelope::Square => vec![*t_on, *t_off],
                Envelope::Smooth => {
                    let w = RAMP_FRACTION * (t_off - t_on);
                    vec![*t_on, t_on + w, t_off - w, *t_off]
                }
            },
            _ => Vec::new(),
        }
    }

    /// Smallest distance from `r` to any singular axis.
    pub fn singular_distance(&self, r: &Vector3<f64>) -> f64 {
        self.singular_axes().iter().map(|a| a.distance(r)).fold(f64::INFINITY, f64::min)
    }

    /// Fails with `AxisProximity` when `r` lies within `margin` of a singular axis.
    pub fn require_clearance(&self, r: &Vector3<f64>, margin: f64) -> Result<()> {
        let distance = self.singular_distance(r);
        if distance <= margin {
            return Err(Error::AxisProximity { distance, radius: margin });
        }
        Ok(())
    }

    pub fn sample(&self, event: &FourVector) -> Result<FieldSample> {
        match &self.kind {
            FieldKind::Zero => Ok(FieldSample::default()),
            FieldKind::LineCharge { density, axis } => {
                let r = event.spatial();
                self.require_clearance(&r, self.exclusion_radius)?;
                let d = axis.radial(&r);
                let e = d * (density / (2.0 * PI * d.norm_squared()));
                Ok(FieldSample::new(e, Vector3::zeros()))
            }
            FieldKind::PulsedUniformB { amplitude, t_on, t_off, envelope } => {
                let t = event.t();
                let weight = match envelope {
                    Envelope::Square => {
                        if t >= *t_on && t <= *t_off {
                            1.0
                        } else {
                            0.0
                        }
                    }
                    Envelope::Smooth => {
                        let w = RAMP_FRACTION * (t_off - t_on);
                        smoothstep((t - t_on) / w).min(smoothstep((t_off - t) / w))
                    }
                };
                Ok(FieldSample::new(Vector3::zeros(), amplitude * weight))
            }
            FieldKind::Expression(field) => Ok(FieldSample::new(
                ExpressionField::eval_vec(&field.electric, event)?,
                ExpressionField::eval_vec(&field.magnetic, event)?,
            )),
        }
    }

    /// Spatial Jacobian of E and B: closed form for the built-in sources,
    /// central differences with step `h` for expression fields.
    pub fn jacobian(&self, event: &FourVector, h: f64) -> Result<FieldJacobian> {
        match &self.kind {
            FieldKind::Zero | FieldKind::PulsedUniformB { .. } => {
                Ok(FieldJacobian { electric: Matrix3::zeros(), magnetic: Matrix3::zeros() })
            }
            FieldKind::LineCharge { density, axis } => {
                let r = event.spatial();
                self.require_clearance(&r, self.exclusion_radius)?;
                let d = axis.radial(&r);
                let d2 = d.norm_squared();
                let n = axis.direction;
                let projector = Matrix3::identity() - n * n.transpose();
                let electric = (projector / d2 - d * d.transpose() * (2.0 / (d2 * d2))) * (density / (2.0 * PI));
                Ok(FieldJacobian { electric, magnetic: Matrix3::zeros() })
            }
            FieldKind::Expression(_) => Ok(FieldJacobian {
                electric: diff::jacobian(|ev| Ok(self.sample(ev)?.electric), event, h)?,
                magnetic: diff::jacobian(|ev| Ok(self.sample(ev)?.magnetic), event, h)?,
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldPart {
    Electric,
    Magnetic,
}

fn stencil_clearance(config: &FieldConfig, event: &FourVector, h: f64) -> Result<()> {
    if !config.singular_axes().is_empty() {
        config.require_clearance(&event.spatial(), config.exclusion_radius() + 2.0 * h)?;
    }
    Ok(())
}

fn part_sampler(config: &FieldConfig, part: FieldPart) -> impl Fn(&FourVector) -> Result<Vector3<f64>> + '_ {
    move |ev| {
        let s = config.sample(ev)?;
        Ok(match part {
            FieldPart::Electric => s.electric,
            FieldPart::Magnetic => s.magnetic,
        })
    }
}

/// Central-difference divergence of E or B.
pub fn numeric_div(config: &FieldConfig, part: FieldPart, event: &FourVector, h: f64) -> Result<f64> {
    stencil_clearance(config, event, h)?;
    diff::divergence(part_sampler(config, part), event, h)
}

/// Central-difference curl of E or B.
pub fn numeric_curl(config: &FieldConfig, part: FieldPart, event: &FourVector, h: f64) -> Result<Vector3<f64>> {
    stencil_clearance(config, event, h)?;
    diff::curl(part_sampler(config, part), event, h)
}

/// Central-difference gradient of a scalar derived from the field sample.
pub fn numeric_grad<F>(config: &FieldConfig, scalar: F, event: &FourVector, h: f64) -> Result<Vector3<f64>>
where
    F: Fn(&FieldSample) -> f64,
{
    stencil_clearance(config, event, h)?;
    diff::gradient(|ev| Ok(scalar(&config.sample(ev)?)), event, h)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::DEFAULT_STEP;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn line_charge_magnitude_and_direction() {
        let cfg = FieldConfig::line_charge(4.0 * PI, Axis::z()).unwrap();
        let s = cfg.sample(&FourVector::new(0.0, 0.0, 2.0, 5.0)).unwrap();
        assert!((s.electric - Vector3::y()).norm() < 1e-15);
        assert_eq!(s.magnetic, Vector3::zeros());
    }

    #[test]
    fn line_charge_refuses_axis() {
        let cfg = FieldConfig::line_charge(1.0, Axis::z()).unwrap();
        let err = cfg.sample(&FourVector::new(0.0, 5e-7, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::AxisProximity { .. }));
    }

    #[test]
    fn pulse_outside_window_is_off() {
        let cfg = FieldConfig::pulsed_uniform_b(2.0 * Vector3::z(), 0.0, 5.0, Envelope::Smooth).unwrap();
        assert_eq!(cfg.sample(&FourVector::new(7.0, 1.0, 2.0, 3.0)).unwrap().magnetic, Vector3::zeros());
        assert_eq!(cfg.sample(&FourVector::new(2.5, 1.0, 2.0, 3.0)).unwrap().magnetic, 2.0 * Vector3::z());
        // ramp width 0.25
        let full = cfg.sample(&FourVector::new(0.25, 0.0, 0.0, 0.0)).unwrap().magnetic.z;
        assert!((full - 2.0).abs() < 1e-15);
        let half = cfg.sample(&FourVector::new(0.125, 0.0, 0.0, 0.0)).unwrap().magnetic.z;
        assert!((half - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pulse_rejects_inverted_window() {
        assert!(FieldConfig::pulsed_uniform_b(Vector3::z(), 5.0, 5.0, Envelope::Square).is_err());
    }

    #[test]
    fn expression_field_evaluates() {
        let f = ExpressionField::parse([Some("sin(pi/2) * x"), None, None], [None, None, None]).unwrap();
        let cfg = FieldConfig::expression(f);
        let s = cfg.sample(&FourVector::new(0.0, 3.0, 0.0, 0.0)).unwrap();
        assert!((s.electric.x - 3.0).abs() < 1e-15);
        assert!(cfg.is_static());
    }

    #[test]
    fn line_charge_div_and_curl_vanish_off_axis() {
        let cfg = FieldConfig::line_charge(1.0, Axis::z()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let rho = rng.random_range(0.3..5.0);
            let phi = rng.random_range(0.0..2.0 * PI);
            let ev = FourVector::new(0.0, rho * phi.cos(), rho * phi.sin(), rng.random_range(-2.0..2.0));
            let div = numeric_div(&cfg, FieldPart::Electric, &ev, DEFAULT_STEP).unwrap();
            let curl = numeric_curl(&cfg, FieldPart::Electric, &ev, DEFAULT_STEP).unwrap();
            assert!(div.abs() < 1e-6, "div {div} at rho {rho}");
            assert!(curl.norm() < 1e-6);
        }
    }

    #[test]
    fn analytic_jacobian_matches_differences() {
        let axis = Axis::new(Vector3::new(0.3, -0.2, 0.0), Vector3::new(0.2, 0.1, 1.0)).unwrap();
        let cfg = FieldConfig::line_charge(2.5, axis).unwrap();
        let ev = FourVector::new(0.0, 1.1, 0.7, -0.4);
        let exact = cfg.jacobian(&ev, DEFAULT_STEP).unwrap().electric;
        let numeric = diff::jacobian(|e| Ok(cfg.sample(e)?.electric), &ev, DEFAULT_STEP).unwrap();
        assert!((exact - numeric).norm() < 1e-7);
    }

    #[test]
    fn stencil_touching_exclusion_zone_fails() {
        let cfg = FieldConfig::line_charge(1.0, Axis::z()).unwrap();
        let ev = FourVector::new(0.0, 1.5e-4, 0.0, 0.0);
        assert!(matches!(numeric_div(&cfg, FieldPart::Electric, &ev, 1e-4), Err(Error::AxisProximity { .. })));
    }

    #[test]
    fn curl_of_zero_field_is_exactly_zero() {
        let cfg = FieldConfig::zero();
        let c = numeric_curl(&cfg, FieldPart::Magnetic, &FourVector::new(0.0, 1.0, 2.0, 3.0), 1e-4).unwrap();
        assert_eq!(c, Vector3::zeros());
    }
}
