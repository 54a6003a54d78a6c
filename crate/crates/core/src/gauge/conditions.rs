use std::io::Write;
use std::path::Path;

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fields::effective_fields;
use crate::error::{invalid, Result};
use crate::fields::{diff, numeric_div, numeric_grad, Axis, FieldConfig, FieldPart};
use crate::spinor::FourVector;

/// Residuals above this count as a violated condition.
pub const DEFAULT_CONDITION_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_LATTICE_RESOLUTION: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    /// ∇·E = 0
    Divergence,
    /// (ŝ·∇)E = 0
    Transverse,
    /// ∇(ŝ·B) = 0
    ScalarGradient,
    /// |ℬ| from the numeric curl of 𝒜⃗
    EffectiveMagnetic,
    /// |ℰ| from the numeric gradient of 𝒜⁰
    EffectiveElectric,
}

impl Condition {
    pub const ALL: [Condition; 5] = [
        Condition::Divergence,
        Condition::Transverse,
        Condition::ScalarGradient,
        Condition::EffectiveMagnetic,
        Condition::EffectiveElectric,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Condition::Divergence => "divergence",
            Condition::Transverse => "transverse",
            Condition::ScalarGradient => "scalar_gradient",
            Condition::EffectiveMagnetic => "effective_magnetic",
            Condition::EffectiveElectric => "effective_electric",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum RegionShape {
    Box {
        min: Vector3<f64>,
        max: Vector3<f64>,
    },
    /// Cylindrical shell r_min ≤ ρ ≤ r_max around `axis`, |axial offset| ≤ half_length.
    Annulus {
        axis: Axis,
        r_min: f64,
        r_max: f64,
        half_length: f64,
    },
}

/// Sample lattice: `resolution`³ points over the bounding box of `shape`
/// at fixed `time`, keeping only points inside the shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleRegion {
    pub shape: RegionShape,
    pub time: f64,
    pub resolution: usize,
}

impl SampleRegion {
    pub fn new(shape: RegionShape, time: f64, resolution: usize) -> Result<Self> {
        if resolution < 2 {
            return Err(invalid("lattice resolution must be at least 2"));
        }
        match shape {
            RegionShape::Box { min, max } => {
                if (0..3).any(|i| !(min[i] < max[i])) {
                    return Err(invalid("box region needs min < max on every axis"));
                }
            }
            RegionShape::Annulus { r_min, r_max, half_length, .. } => {
                if !(r_min >= 0.0 && r_min < r_max && half_length >= 0.0) {
                    return Err(invalid("annulus needs 0 ≤ r_min < r_max and half_length ≥ 0"));
                }
            }
        }
        Ok(Self { shape, time, resolution })
    }

    pub fn annulus(axis: Axis, r_min: f64, r_max: f64, half_length: f64) -> Result<Self> {
        Self::new(RegionShape::Annulus { axis, r_min, r_max, half_length }, 0.0, DEFAULT_LATTICE_RESOLUTION)
    }

    /// Lattice points inside the shape, in a fixed order.
    pub fn points(&self) -> Vec<Vector3<f64>> {
        let n = self.resolution;
        let lin = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / (n - 1) as f64;
        let mut out = Vec::new();
        match self.shape {
            RegionShape::Box { min, max } => {
                for i in 0..n {
                    for j in 0..n {
                        for k in 0..n {
                            out.push(Vector3::new(lin(min.x, max.x, i), lin(min.y, max.y, j), lin(min.z, max.z, k)));
                        }
                    }
                }
            }
            RegionShape::Annulus { axis, r_min, r_max, half_length } => {
                let (u, v) = orthonormal_pair(&axis.direction);
                for i in 0..n {
                    for j in 0..n {
                        let a = lin(-r_max, r_max, i);
                        let b = lin(-r_max, r_max, j);
                        let rho = a.hypot(b);
                        if rho < r_min || rho > r_max {
                            continue;
                        }
                        for k in 0..n {
                            let c = lin(-half_length, half_length, k);
                            out.push(axis.point + u * a + v * b + axis.direction * c);
                        }
                    }
                }
            }
        }
        out
    }
}

/// Unit vectors (u, v) with u × v = n.
pub(crate) fn orthonormal_pair(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let seed = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let u = (seed - n * n.dot(&seed)).normalize();
    (u, n.cross(&u))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub condition: Condition,
    pub max_residual: f64,
    pub worst_point: Option<[f64; 4]>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeSample {
    pub event: [f64; 4],
    /// In the order of [`Condition::ALL`].
    pub residuals: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub polarization: Vector3<f64>,
    pub tolerance: f64,
    pub step: f64,
    pub results: Vec<ConditionResult>,
    pub excluded: usize,
    #[serde(skip)]
    pub samples: Vec<LatticeSample>,
}

impl ConditionReport {
    pub fn pass(&self) -> bool {
        self.results.iter().all(|r| r.pass)
    }

    pub fn result(&self, condition: Condition) -> &ConditionResult {
        self.results.iter().find(|r| r.condition == condition).expect("every condition is evaluated")
    }

    /// Force-free verdict for the rest-frame AC conditions.
    pub fn ac_pass(&self) -> bool {
        self.result(Condition::Divergence).pass && self.result(Condition::Transverse).pass
    }

    pub fn sab_pass(&self) -> bool {
        self.result(Condition::ScalarGradient).pass
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["t", "x", "y", "z"];
        header.extend(Condition::ALL.iter().map(|c| c.name()));
        w.write_record(&header)?;
        for s in &self.samples {
            let row: Vec<String> = s.event.iter().chain(&s.residuals).map(|v| v.to_string()).collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Evaluates the force-free conditions and the effective-field cross-check
/// on every lattice point at least ε_axis + 2h away from a singular axis.
pub fn check_topological_conditions(
    config: &FieldConfig,
    polarization: &Vector3<f64>,
    region: &SampleRegion,
    tolerance: f64,
    h: f64,
) -> Result<ConditionReport> {
    if !(tolerance > 0.0) || !(h > 0.0) {
        return Err(invalid("tolerance and step must be positive"));
    }
    let clearance = config.exclusion_radius() + 2.0 * h;
    let all = region.points();
    let kept: Vec<Vector3<f64>> = all.iter().copied().filter(|r| config.singular_distance(r) > clearance).collect();
    let excluded = all.len() - kept.len();
    let s = *polarization;

    let samples: Vec<LatticeSample> = kept
        .par_iter()
        .map(|r| -> Result<LatticeSample> {
            let ev = FourVector::from_parts(region.time, r);
            let div = numeric_div(config, FieldPart::Electric, &ev, h)?;
            let je = diff::jacobian(|e| Ok(config.sample(e)?.electric), &ev, h)?;
            let transverse = (je * s).norm();
            let grad = numeric_grad(config, |f| s.dot(&f.magnetic), &ev, h)?.norm();
            let eff = effective_fields(config, &s, &ev, h)?;
            Ok(LatticeSample {
                event: ev.0,
                residuals: [div.abs(), transverse, grad, eff.direct_b.norm(), eff.direct_e.norm()],
            })
        })
        .collect::<Result<_>>()?;

    let results = Condition::ALL
        .iter()
        .enumerate()
        .map(|(k, &condition)| {
            let mut max_residual = 0.0;
            let mut worst_point = None;
            for s in &samples {
                if s.residuals[k] > max_residual || worst_point.is_none() {
                    max_residual = s.residuals[k];
                    worst_point = Some(s.event);
                }
            }
            ConditionResult { condition, max_residual, worst_point, pass: max_residual < tolerance }
        })
        .collect();
    Ok(ConditionReport { polarization: s, tolerance, step: h, results, excluded, samples })
}
