use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use super::path::Path;
use super::quadrature::gauss_legendre;
use super::winding::winding_number;
use crate::error::{invalid, Error, Result};
use crate::fields::{Axis, FieldConfig, DEFAULT_STEP};
use crate::gauge::{field_strength, EffectiveGaugePotential};
use crate::spinor::{levi_civita3, FourVector, PolarizedParticle};

/// Successive refinements must agree to this before a flux is accepted.
pub const FLUX_AGREEMENT: f64 = 1e-6;
const MAX_REFINEMENTS: u32 = 7;
const GAUSS_ORDER: usize = 8;
const CENTROID_SAMPLES: usize = 512;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub vertices: Vec<Vector3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vector3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(invalid("mesh has no triangles"));
        }
        if triangles.iter().flatten().any(|&i| i >= vertices.len()) {
            return Err(invalid("triangle index out of range"));
        }
        Ok(Self { vertices, triangles })
    }

    /// Splits every triangle into four at its edge midpoints.
    pub fn refined(&self) -> Self {
        let mut vertices = self.vertices.clone();
        let mut triangles = Vec::with_capacity(self.triangles.len() * 4);
        let mut mid = std::collections::HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vector3<f64>>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                vertices.push((vertices[a] + vertices[b]) * 0.5);
                vertices.len() - 1
            })
        };
        for &[a, b, c] in &self.triangles {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            triangles.extend([[a, ab, ca], [ab, b, bc], [ca, bc, c], [ab, bc, ca]]);
        }
        Self { vertices, triangles }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Surface {
    /// Cone from the loop's centroid to the loop, r(τ, u) = c + u (loop(τ) − c).
    Fan,
    Mesh(TriangleMesh),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxPhase {
    pub value: f64,
    pub refinements: u32,
    /// Difference between the last two refinement levels.
    pub last_change: f64,
}

/// Δφ = (μ/2)∫dS^{μν}ℱ_{μν} over a spatial surface at `time`, with
/// dS^{ij} = −ε^{ijk}dA_k so that the integrand reduces to μℬ·dA.
pub fn surface_flux_phase(
    config: &FieldConfig,
    particle: &PolarizedParticle,
    loop_path: &Path,
    surface: &Surface,
    time: f64,
) -> Result<FluxPhase> {
    if !loop_path.is_closed() {
        return Err(invalid("flux phase needs a closed loop"));
    }
    let axes = config.singular_axes();
    for axis in &axes {
        if winding_number(loop_path, axis)? != 0 {
            return Err(Error::SurfaceCrossesSingularity);
        }
    }
    let potential = EffectiveGaugePotential::relativistic(config.clone(), particle.four_spin())?;
    let clearance = config.exclusion_radius() + 2.0 * DEFAULT_STEP;
    let mu = particle.moment();
    let flux_density = |r: &Vector3<f64>, da: &Vector3<f64>| -> Result<f64> {
        if axes.iter().any(|a| a.distance(r) <= clearance) {
            return Err(Error::SurfaceCrossesSingularity);
        }
        let f = field_strength(&potential, &FourVector::from_parts(time, r), DEFAULT_STEP)?;
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let ds: f64 = (0..3).map(|k| -levi_civita3(i, j, k) * da[k]).sum();
                acc += ds * f[i + 1][j + 1];
            }
        }
        Ok(0.5 * mu * acc)
    };
    match surface {
        Surface::Fan => refine(|level| fan_integral(loop_path, &axes, clearance, level, &flux_density)),
        Surface::Mesh(mesh) => {
            for axis in &axes {
                if mesh_pierced(mesh, axis) {
                    return Err(Error::SurfaceCrossesSingularity);
                }
            }
            let mut current = mesh.clone();
            refine(|level| {
                if level > 0 {
                    current = current.refined();
                }
                mesh_integral(&current, &flux_density)
            })
        }
    }
}

fn refine<F>(mut at_level: F) -> Result<FluxPhase>
where
    F: FnMut(u32) -> Result<f64>,
{
    let mut prev = at_level(0)?;
    for level in 1..=MAX_REFINEMENTS {
        let value = at_level(level)?;
        let change = (value - prev).abs();
        if change <= FLUX_AGREEMENT {
            return Ok(FluxPhase { value, refinements: level, last_change: change });
        }
        prev = value;
    }
    Err(Error::QuadratureNonconvergence { tolerance: FLUX_AGREEMENT, estimate: f64::NAN })
}

fn loop_centroid(path: &Path) -> Vector3<f64> {
    let pts = path.sample(CENTROID_SAMPLES);
    pts[..CENTROID_SAMPLES].iter().sum::<Vector3<f64>>() / CENTROID_SAMPLES as f64
}

fn fan_integral<F>(path: &Path, axes: &[Axis], clearance: f64, level: u32, density: &F) -> Result<f64>
where
    F: Fn(&Vector3<f64>, &Vector3<f64>) -> Result<f64>,
{
    let c = loop_centroid(path);
    let (x, w) = gauss_legendre(GAUSS_ORDER);
    let mut tau_breaks = vec![0.0];
    tau_breaks.extend(path.breakpoints());
    tau_breaks.push(1.0);
    let per = 4usize << level;
    let u_panels = 2usize << level;
    let mut total = 0.0;
    for pair in tau_breaks.windows(2) {
        let width = (pair[1] - pair[0]) / per as f64;
        for p in 0..per {
            let t0 = pair[0] + width * p as f64;
            for (xi, wi) in x.iter().zip(&w) {
                let tau = t0 + 0.5 * width * (xi + 1.0);
                let edge = path.position(tau) - c;
                let dl = path.tangent(tau);
                for axis in axes {
                    if segment_axis_distance(&c, &(c + edge), axis) <= clearance {
                        return Err(Error::SurfaceCrossesSingularity);
                    }
                }
                let normal = edge.cross(&dl);
                for q in 0..u_panels {
                    let u0 = q as f64 / u_panels as f64;
                    let uw = 1.0 / u_panels as f64;
                    for (xj, wj) in x.iter().zip(&w) {
                        let u = u0 + 0.5 * uw * (xj + 1.0);
                        let r = c + edge * u;
                        let da = normal * (u * 0.25 * width * uw * wi * wj);
                        total += density(&r, &da)?;
                    }
                }
            }
        }
    }
    Ok(total)
}

fn segment_axis_distance(a: &Vector3<f64>, b: &Vector3<f64>, axis: &Axis) -> f64 {
    let pa = axis.radial(a);
    let d = axis.radial(b) - pa;
    let len2 = d.norm_squared();
    let t = if len2 == 0.0 { 0.0 } else { (-pa.dot(&d) / len2).clamp(0.0, 1.0) };
    (pa + d * t).norm()
}

// Degree-5 seven-point rule on a triangle, barycentric coordinates.
fn radon_rule() -> [([f64; 3], f64); 7] {
    let s15 = 15f64.sqrt();
    let a1 = (6.0 - s15) / 21.0;
    let a2 = (6.0 + s15) / 21.0;
    let w1 = (155.0 - s15) / 1200.0;
    let w2 = (155.0 + s15) / 1200.0;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([a1, a1, 1.0 - 2.0 * a1], w1),
        ([a1, 1.0 - 2.0 * a1, a1], w1),
        ([1.0 - 2.0 * a1, a1, a1], w1),
        ([a2, a2, 1.0 - 2.0 * a2], w2),
        ([a2, 1.0 - 2.0 * a2, a2], w2),
        ([1.0 - 2.0 * a2, a2, a2], w2),
    ]
}

fn mesh_integral<F>(mesh: &TriangleMesh, density: &F) -> Result<f64>
where
    F: Fn(&Vector3<f64>, &Vector3<f64>) -> Result<f64>,
{
    let rule = radon_rule();
    let mut total = 0.0;
    for &[ia, ib, ic] in &mesh.triangles {
        let (a, b, c) = (mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]);
        let area = (b - a).cross(&(c - a)) * 0.5;
        for (bary, w) in &rule {
            let r = a * bary[0] + b * bary[1] + c * bary[2];
            total += density(&r, &(area * *w))?;
        }
    }
    Ok(total)
}

/// Whether the infinite axis line passes through any triangle.
fn mesh_pierced(mesh: &TriangleMesh, axis: &Axis) -> bool {
    mesh.triangles.iter().any(|&[ia, ib, ic]| {
        let (a, b, c) = (mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]);
        let e1 = b - a;
        let e2 = c - a;
        let p = axis.direction.cross(&e2);
        let det = e1.dot(&p);
        if det.abs() < 1e-300 {
            return false;
        }
        let s = axis.point - a;
        let u = s.dot(&p) / det;
        let q = s.cross(&e1);
        let v = axis.direction.dot(&q) / det;
        u >= 0.0 && v >= 0.0 && u + v <= 1.0
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::ExpressionField;
    use crate::phase::integrals::open_path_phase;
    use crate::phase::path::SpacetimePath;
    use crate::phase::quadrature::QuadratureOptions;

    fn particle() -> PolarizedParticle {
        PolarizedParticle::at_rest(1.0, 0.5, Vector3::z()).unwrap()
    }

    #[test]
    fn enclosing_loop_reports_obstruction() {
        let cfg = FieldConfig::line_charge(2.0, Axis::z()).unwrap();
        let c = Path::circle(Vector3::zeros(), 1.0, Vector3::z(), 1).unwrap();
        let err = surface_flux_phase(&cfg, &particle(), &c, &Surface::Fan, 0.0).unwrap_err();
        assert!(matches!(err, Error::SurfaceCrossesSingularity));
    }

    #[test]
    fn non_enclosing_loop_has_zero_flux() {
        let cfg = FieldConfig::line_charge(2.0, Axis::z()).unwrap();
        let c = Path::circle(Vector3::new(3.0, 0.0, 0.0), 1.0, Vector3::z(), 1).unwrap();
        let flux = surface_flux_phase(&cfg, &particle(), &c, &Surface::Fan, 0.0).unwrap();
        assert!(flux.value.abs() < 1e-6, "{flux:?}");
    }

    #[test]
    fn stokes_agreement_for_smooth_field() {
        let field = ExpressionField::parse([Some("x*x"), Some("sin(x)"), Some("y")], [None, None, None]).unwrap();
        let cfg = FieldConfig::expression(field);
        let c = Path::circle(Vector3::new(0.2, -0.1, 0.0), 0.8, Vector3::z(), 1).unwrap();
        let flux = surface_flux_phase(&cfg, &particle(), &c, &Surface::Fan, 0.0).unwrap();
        let line =
            open_path_phase(&cfg, &particle(), &SpacetimePath::spatial(c, 0.0), &QuadratureOptions::default()).unwrap();
        assert!(line.total.abs() > 0.1);
        assert!((flux.value - line.total).abs() < 1e-5, "{} {}", flux.value, line.total);
    }

    #[test]
    fn mesh_matches_fan() {
        let field = ExpressionField::parse([Some("x*y"), None, None], [None, None, None]).unwrap();
        let cfg = FieldConfig::expression(field);
        let sq = Path::polyline(vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 0.0),
        ])
        .unwrap();
        let mesh = TriangleMesh::new(
            vec![Vector3::zeros(), Vector3::x(), Vector3::new(1.0, 1.0, 0.0), Vector3::y()],
            vec![[0, 1, 2], [0, 2, 3]],
        )
        .unwrap();
        let a = surface_flux_phase(&cfg, &particle(), &sq, &Surface::Fan, 0.0).unwrap();
        let b = surface_flux_phase(&cfg, &particle(), &sq, &Surface::Mesh(mesh), 0.0).unwrap();
        // ℬ = ẑ∂_x E_x − ∂_z E = (0, 0, y): flux μ∫y dA = 0.5·0.5.
        assert!((a.value - 0.25).abs() < 1e-6);
        assert!((b.value - 0.25).abs() < 1e-6);
    }

    #[test]
    fn pierced_mesh_detected() {
        let mesh = TriangleMesh::new(
            vec![Vector3::new(-1.0, -1.0, 0.0), Vector3::new(2.0, -1.0, 0.0), Vector3::new(-1.0, 2.0, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        assert!(mesh_pierced(&mesh, &Axis::z()));
        assert_eq!(mesh.refined().triangles.len(), 4);
        assert_eq!(mesh.refined().vertices.len(), 6);
    }
}
