use std::f64::consts::PI;

use nalgebra::{Vector2, Vector3};

use super::path::{Path, PathKind};
use crate::error::{invalid, Error, Result};
use crate::fields::{Axis, DEFAULT_EXCLUSION_RADIUS};
use crate::gauge::conditions::orthonormal_pair;

const INITIAL_INTERVALS: usize = 256;
const MAX_STEP_ANGLE: f64 = PI / 8.0;
const MAX_BISECTIONS: u32 = 40;
const RESIDUAL_LIMIT: f64 = 1e-6;

struct Projector {
    axis: Axis,
    u: Vector3<f64>,
    v: Vector3<f64>,
}

impl Projector {
    fn new(axis: &Axis) -> Self {
        let (u, v) = orthonormal_pair(&axis.direction);
        Self { axis: *axis, u, v }
    }

    fn project(&self, r: &Vector3<f64>) -> Result<Vector2<f64>> {
        let d = self.axis.radial(r);
        let p = Vector2::new(d.dot(&self.u), d.dot(&self.v));
        let distance = p.norm();
        if distance < DEFAULT_EXCLUSION_RADIUS {
            return Err(Error::PathIntersectsAxis { distance });
        }
        Ok(p)
    }
}

fn turn(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    (a.x * b.y - a.y * b.x).atan2(a.dot(b))
}

fn segment_distance(a: &Vector2<f64>, b: &Vector2<f64>) -> f64 {
    let d = b - a;
    let len2 = d.norm_squared();
    let t = if len2 == 0.0 { 0.0 } else { (-a.dot(&d) / len2).clamp(0.0, 1.0) };
    (a + d * t).norm()
}

/// Total azimuthal angle swept by the path's projection around the axis.
pub fn swept_angle(path: &Path, axis: &Axis) -> Result<f64> {
    let proj = Projector::new(axis);
    match path.kind() {
        PathKind::Polyline(vertices) => {
            let pts: Vec<Vector2<f64>> = vertices.iter().map(|r| proj.project(r)).collect::<Result<_>>()?;
            let mut total = 0.0;
            for w in pts.windows(2) {
                let distance = segment_distance(&w[0], &w[1]);
                if distance < DEFAULT_EXCLUSION_RADIUS {
                    return Err(Error::PathIntersectsAxis { distance });
                }
                total += turn(&w[0], &w[1]);
            }
            Ok(total)
        }
        _ => {
            let mut total = 0.0;
            let mut prev = proj.project(&path.position(0.0))?;
            for k in 0..INITIAL_INTERVALS {
                let a = k as f64 / INITIAL_INTERVALS as f64;
                let b = (k + 1) as f64 / INITIAL_INTERVALS as f64;
                total += sweep(path, &proj, a, b, &mut prev, 0)?;
            }
            Ok(total)
        }
    }
}

fn sweep(path: &Path, proj: &Projector, a: f64, b: f64, prev: &mut Vector2<f64>, depth: u32) -> Result<f64> {
    let start = *prev;
    let end = proj.project(&path.position(b))?;
    let angle = turn(&start, &end);
    if angle.abs() <= MAX_STEP_ANGLE || depth >= MAX_BISECTIONS {
        if depth >= MAX_BISECTIONS {
            let distance = start.norm().min(end.norm());
            return Err(Error::PathIntersectsAxis { distance });
        }
        *prev = end;
        return Ok(angle);
    }
    let mid = 0.5 * (a + b);
    let left = sweep(path, proj, a, mid, prev, depth + 1)?;
    let right = sweep(path, proj, mid, b, prev, depth + 1)?;
    Ok(left + right)
}

/// Signed number of turns of a closed path about `axis`, positive for
/// counterclockwise circulation seen from the tip of the axis direction.
pub fn winding_number(path: &Path, axis: &Axis) -> Result<i64> {
    if !path.is_closed() {
        return Err(invalid("winding number needs a closed path"));
    }
    let turns = swept_angle(path, axis)? / (2.0 * PI);
    let n = turns.round();
    if (turns - n).abs() > RESIDUAL_LIMIT {
        return Err(invalid(format!("accumulated angle {turns} turns is not an integer")));
    }
    Ok(n as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_circle_and_reverse() {
        let c = Path::circle(Vector3::zeros(), 1.0, Vector3::z(), 1).unwrap();
        assert_eq!(winding_number(&c, &Axis::z()).unwrap(), 1);
        assert_eq!(winding_number(&c.reversed(), &Axis::z()).unwrap(), -1);
        let c3 = Path::circle(Vector3::new(0.2, 0.0, 4.0), 1.0, Vector3::z(), -3).unwrap();
        assert_eq!(winding_number(&c3, &Axis::z()).unwrap(), -3);
    }

    #[test]
    fn figure_eight_counts_enclosing_lobe() {
        // Lemniscate of Gerono shifted so only the left lobe surrounds the axis.
        let fig = Path::parametric(|t| {
            let th = 2.0 * PI * t;
            Vector3::new(th.cos() + 0.5, -0.5 * (2.0 * th).sin(), 0.0)
        });
        assert_eq!(winding_number(&fig, &Axis::z()).unwrap(), 1);
    }

    #[test]
    fn square_offset_and_through_axis() {
        let sq = |x0: f64| {
            Path::polyline(vec![
                Vector3::new(x0, -1.0, 0.0),
                Vector3::new(x0 + 2.0, -1.0, 0.0),
                Vector3::new(x0 + 2.0, 1.0, 0.0),
                Vector3::new(x0, 1.0, 0.0),
                Vector3::new(x0, -1.0, 0.0),
            ])
            .unwrap()
        };
        assert_eq!(winding_number(&sq(-1.0), &Axis::z()).unwrap(), 1);
        assert_eq!(winding_number(&sq(1.0), &Axis::z()).unwrap(), 0);
        assert!(matches!(winding_number(&sq(0.0), &Axis::z()), Err(Error::PathIntersectsAxis { .. })));
    }

    #[test]
    fn open_path_rejected() {
        let p = Path::polyline(vec![Vector3::x(), Vector3::y()]).unwrap();
        assert!(winding_number(&p, &Axis::z()).is_err());
    }
}
