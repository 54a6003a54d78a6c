use std::f64::consts::PI;
use std::fmt;
use std::io::Read;
use std::sync::Arc;

use nalgebra::Vector3;

use crate::error::{invalid, Result};
use crate::gauge::conditions::orthonormal_pair;

/// Vertices closer than this close a polyline.
pub const CLOSURE_TOLERANCE: f64 = 1e-12;
const TANGENT_STEP: f64 = 1e-3;

type CurveFn = dyn Fn(f64) -> Vector3<f64> + Send + Sync;

#[derive(Clone)]
pub enum PathKind {
    Polyline(Vec<Vector3<f64>>),
    /// Traversed |winding| times, counterclockwise about `normal` when positive.
    Circle {
        center: Vector3<f64>,
        radius: f64,
        normal: Vector3<f64>,
        winding: i32,
    },
    /// Position on τ ∈ [0, 1]. Without an explicit tangent, the derivative is
    /// taken by a five-point stencil, which samples slightly outside [0, 1].
    Parametric {
        position: Arc<CurveFn>,
        tangent: Option<Arc<CurveFn>>,
    },
}

impl fmt::Debug for PathKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PathKind::Polyline(v) => f.debug_tuple("Polyline").field(v).finish(),
            PathKind::Circle { center, radius, normal, winding } => f
                .debug_struct("Circle")
                .field("center", center)
                .field("radius", radius)
                .field("normal", normal)
                .field("winding", winding)
                .finish(),
            PathKind::Parametric { .. } => f.write_str("Parametric"),
        }
    }
}

/// Spatial curve parameterized on τ ∈ [0, 1].
#[derive(Debug, Clone)]
pub struct Path {
    kind: PathKind,
}

impl Path {
    pub fn polyline(vertices: Vec<Vector3<f64>>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(invalid("a polyline needs at least two vertices"));
        }
        if vertices.iter().any(|v| !v.iter().all(|c| c.is_finite())) {
            return Err(invalid("polyline vertices must be finite"));
        }
        Ok(Self { kind: PathKind::Polyline(vertices) })
    }

    pub fn circle(center: Vector3<f64>, radius: f64, normal: Vector3<f64>, winding: i32) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(invalid("circle radius must be positive"));
        }
        if winding == 0 {
            return Err(invalid("circle winding must be a nonzero integer"));
        }
        let n = normal.norm();
        if !(n > 0.0) {
            return Err(invalid("circle normal must be nonzero"));
        }
        Ok(Self { kind: PathKind::Circle { center, radius, normal: normal / n, winding } })
    }

    pub fn parametric(position: impl Fn(f64) -> Vector3<f64> + Send + Sync + 'static) -> Self {
        Self { kind: PathKind::Parametric { position: Arc::new(position), tangent: None } }
    }

    pub fn parametric_with_tangent(
        position: impl Fn(f64) -> Vector3<f64> + Send + Sync + 'static,
        tangent: impl Fn(f64) -> Vector3<f64> + Send + Sync + 'static,
    ) -> Self {
        Self { kind: PathKind::Parametric { position: Arc::new(position), tangent: Some(Arc::new(tangent)) } }
    }

    pub fn kind(&self) -> &PathKind {
        &self.kind
    }

    pub fn is_closed(&self) -> bool {
        match &self.kind {
            PathKind::Circle { .. } => true,
            _ => (self.position(0.0) - self.position(1.0)).norm() <= CLOSURE_TOLERANCE,
        }
    }

    fn segment(&self, tau: f64, n: usize) -> (usize, f64) {
        let x = tau.clamp(0.0, 1.0) * n as f64;
        let k = (x.floor() as usize).min(n - 1);
        (k, x - k as f64)
    }

    fn circle_frame(normal: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
        orthonormal_pair(normal)
    }

    pub fn position(&self, tau: f64) -> Vector3<f64> {
        match &self.kind {
            PathKind::Polyline(v) => {
                let (k, u) = self.segment(tau, v.len() - 1);
                v[k] + (v[k + 1] - v[k]) * u
            }
            PathKind::Circle { center, radius, normal, winding } => {
                let (u, w) = Self::circle_frame(normal);
                let th = 2.0 * PI * *winding as f64 * tau;
                center + (u * th.cos() + w * th.sin()) * *radius
            }
            PathKind::Parametric { position, .. } => position(tau),
        }
    }

    /// dr/dτ.
    pub fn tangent(&self, tau: f64) -> Vector3<f64> {
        match &self.kind {
            PathKind::Polyline(v) => {
                let n = v.len() - 1;
                let (k, _) = self.segment(tau, n);
                (v[k + 1] - v[k]) * n as f64
            }
            PathKind::Circle { radius, normal, winding, .. } => {
                let (u, w) = Self::circle_frame(normal);
                let rate = 2.0 * PI * *winding as f64;
                let th = rate * tau;
                (w * th.cos() - u * th.sin()) * (*radius * rate)
            }
            PathKind::Parametric { position, tangent } => match tangent {
                Some(t) => t(tau),
                None => {
                    let h = TANGENT_STEP;
                    (position(tau - 2.0 * h) - position(tau + 2.0 * h) + (position(tau + h) - position(tau - h)) * 8.0)
                        / (12.0 * h)
                }
            },
        }
    }

    /// Interior parameter values where the tangent is discontinuous.
    pub fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            PathKind::Polyline(v) => {
                let n = v.len() - 1;
                (1..n).map(|k| k as f64 / n as f64).collect()
            }
            _ => Vec::new(),
        }
    }

    pub fn reversed(&self) -> Self {
        let kind = match &self.kind {
            PathKind::Polyline(v) => PathKind::Polyline(v.iter().rev().copied().collect()),
            PathKind::Circle { center, radius, normal, winding } => {
                PathKind::Circle { center: *center, radius: *radius, normal: *normal, winding: -winding }
            }
            PathKind::Parametric { position, tangent } => {
                let p = position.clone();
                let t = tangent.clone();
                PathKind::Parametric {
                    position: Arc::new(move |tau| p(1.0 - tau)),
                    tangent: t.map(|t| Arc::new(move |tau| -t(1.0 - tau)) as Arc<CurveFn>),
                }
            }
        };
        Self { kind }
    }

    /// `n + 1` evenly spaced points including both ends.
    pub fn sample(&self, n: usize) -> Vec<Vector3<f64>> {
        (0..=n).map(|k| self.position(k as f64 / n as f64)).collect()
    }
}

/// How time advances along a path.
#[derive(Debug, Clone, PartialEq)]
pub enum Timing {
    /// The whole path sits at one instant (dt = 0).
    Instant(f64),
    /// t(τ) = start + (end − start)·τ.
    Linear { start: f64, end: f64 },
    /// One time per polyline vertex, linear in between.
    PerVertex(Vec<f64>),
}

/// A path with time, v⃗ = (dr/dτ)/(dt/dτ), optionally overridden by a fixed
/// particle velocity.
#[derive(Debug, Clone)]
pub struct SpacetimePath {
    path: Path,
    timing: Timing,
    velocity: Option<Vector3<f64>>,
    /// Set on reversed paths: the forward path, so integrals over the
    /// reversal are exact negations.
    forward: Option<Arc<SpacetimePath>>,
}

const SUBLUMINAL_SAMPLES: usize = 256;

impl SpacetimePath {
    pub fn new(path: Path, timing: Timing) -> Result<Self> {
        if let Timing::PerVertex(times) = &timing {
            match path.kind() {
                PathKind::Polyline(v) if v.len() == times.len() => {}
                _ => return Err(invalid("per-vertex timing needs a polyline with one time per vertex")),
            }
            if times.windows(2).any(|w| !(w[0] <= w[1])) {
                return Err(invalid("vertex times must be nondecreasing"));
            }
        }
        let out = Self { path, timing, velocity: None, forward: None };
        for k in 0..=SUBLUMINAL_SAMPLES {
            let tau = k as f64 / SUBLUMINAL_SAMPLES as f64;
            if out.derived_velocity(tau).norm() >= 1.0 {
                return Err(invalid("path velocity must stay below the speed of light"));
            }
        }
        Ok(out)
    }

    /// A path at a single instant.
    pub fn spatial(path: Path, time: f64) -> Self {
        Self { path, timing: Timing::Instant(time), velocity: None, forward: None }
    }

    /// A particle resting at `position` between `start` and `end`.
    pub fn stationary(position: Vector3<f64>, start: f64, end: f64) -> Result<Self> {
        if !(start <= end) {
            return Err(invalid("stationary path needs start ≤ end"));
        }
        let path = Path::polyline(vec![position, position])?;
        Ok(Self { path, timing: Timing::Linear { start, end }, velocity: None, forward: None })
    }

    /// Uses a fixed particle velocity in the velocity-dependent terms.
    pub fn with_velocity(mut self, velocity: Vector3<f64>) -> Result<Self> {
        if !(velocity.norm() < 1.0) {
            return Err(invalid("velocity must be subluminal"));
        }
        self.velocity = Some(velocity);
        if let Some(f) = self.forward.take() {
            let mut f = (*f).clone();
            f.velocity = Some(velocity);
            self.forward = Some(Arc::new(f));
        }
        Ok(self)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn timing(&self) -> &Timing {
        &self.timing
    }

    pub fn time(&self, tau: f64) -> f64 {
        match &self.timing {
            Timing::Instant(t) => *t,
            Timing::Linear { start, end } => start + (end - start) * tau,
            Timing::PerVertex(times) => {
                let n = times.len() - 1;
                let (k, u) = self.path.segment(tau, n);
                times[k] + (times[k + 1] - times[k]) * u
            }
        }
    }

    pub fn time_rate(&self, tau: f64) -> f64 {
        match &self.timing {
            Timing::Instant(_) => 0.0,
            Timing::Linear { start, end } => end - start,
            Timing::PerVertex(times) => {
                let n = times.len() - 1;
                let (k, _) = self.path.segment(tau, n);
                (times[k + 1] - times[k]) * n as f64
            }
        }
    }

    fn derived_velocity(&self, tau: f64) -> Vector3<f64> {
        let rate = self.time_rate(tau);
        if rate == 0.0 {
            Vector3::zeros()
        } else {
            self.path.tangent(tau) / rate
        }
    }

    pub fn velocity(&self, tau: f64) -> Vector3<f64> {
        self.velocity.unwrap_or_else(|| self.derived_velocity(tau))
    }

    pub fn reversed(&self) -> Self {
        if let Some(f) = &self.forward {
            return (**f).clone();
        }
        let timing = match &self.timing {
            Timing::Instant(t) => Timing::Instant(*t),
            Timing::Linear { start, end } => Timing::Linear { start: *end, end: *start },
            Timing::PerVertex(times) => Timing::PerVertex(times.iter().rev().copied().collect()),
        };
        Self { path: self.path.reversed(), timing, velocity: self.velocity, forward: Some(Arc::new(self.clone())) }
    }

    /// The forward path if this one was built by `reversed`.
    pub(crate) fn forward(&self) -> Option<&SpacetimePath> {
        self.forward.as_deref()
    }

    /// Sorted breakpoints on [0, 1]: ends, path corners and the parameters
    /// where time crosses one of `times`.
    pub fn breakpoints(&self, times: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0, 1.0];
        out.extend(self.path.breakpoints());
        for &tb in times {
            match &self.timing {
                Timing::Instant(_) => {}
                Timing::Linear { start, end } => {
                    if end != start {
                        out.push((tb - start) / (end - start));
                    }
                }
                Timing::PerVertex(ts) => {
                    let n = ts.len() - 1;
                    for k in 0..n {
                        let (a, b) = (ts[k], ts[k + 1]);
                        if a < tb && tb < b {
                            out.push((k as f64 + (tb - a) / (b - a)) / n as f64);
                        }
                    }
                }
            }
        }
        out.retain(|t| (0.0..=1.0).contains(t));
        out.sort_by(f64::total_cmp);
        out.dedup();
        out
    }

    /// Reads a vertex list with header `t,x,y,z`. Constant time yields an
    /// instantaneous path.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |name: &str| {
            headers
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| invalid(format!("path CSV is missing column `{name}`")))
        };
        let idx = [col("t")?, col("x")?, col("y")?, col("z")?];
        let mut times = Vec::new();
        let mut vertices = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record?;
            let mut vals = [0.0; 4];
            for (slot, &i) in vals.iter_mut().zip(&idx) {
                let field = record.get(i).unwrap_or("");
                *slot = field.parse().map_err(|_| invalid(format!("row {}: `{field}` is not a number", line + 2)))?;
            }
            times.push(vals[0]);
            vertices.push(Vector3::new(vals[1], vals[2], vals[3]));
        }
        let path = Path::polyline(vertices)?;
        if times.iter().all(|t| *t == times[0]) {
            Ok(Self::spatial(path, times[0]))
        } else {
            Self::new(path, Timing::PerVertex(times))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn circle_starts_on_x_and_turns_counterclockwise() {
        let c = Path::circle(Vector3::zeros(), 2.0, Vector3::z(), 1).unwrap();
        assert!((c.position(0.0) - Vector3::new(2.0, 0.0, 0.0)).norm() < 1e-15);
        assert!((c.position(0.25) - Vector3::new(0.0, 2.0, 0.0)).norm() < 1e-14);
        assert!(c.is_closed());
        assert!((c.tangent(0.0) - Vector3::new(0.0, 4.0 * PI, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn polyline_closure_and_tangent() {
        let sq = Path::polyline(vec![
            Vector3::new(0.0, 0.0, 0.0),
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(1.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 0.0),
        ])
        .unwrap();
        assert!(sq.is_closed());
        assert_eq!(sq.breakpoints(), vec![1.0 / 3.0, 2.0 / 3.0]);
        assert_eq!(sq.tangent(0.5), Vector3::new(0.0, 3.0, 0.0));
        assert_eq!(sq.position(1.0), Vector3::zeros());
        let open = Path::polyline(vec![Vector3::zeros(), Vector3::x()]).unwrap();
        assert!(!open.is_closed());
    }

    #[test]
    fn stencil_tangent_matches_analytic() {
        let p = Path::parametric(|t| Vector3::new((3.0 * t).sin(), t * t, 0.0));
        let d = p.tangent(0.4);
        assert!((d - Vector3::new(3.0 * 1.2f64.cos(), 0.8, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn reversal_swaps_ends() {
        let p = Path::parametric(|t| Vector3::new(t, 2.0 * t, 0.0)).reversed();
        assert_eq!(p.position(0.0), Vector3::new(1.0, 2.0, 0.0));
        assert!((p.tangent(0.5) + Vector3::new(1.0, 2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn superluminal_paths_rejected() {
        let p = Path::polyline(vec![Vector3::zeros(), Vector3::x() * 10.0]).unwrap();
        assert!(SpacetimePath::new(p.clone(), Timing::Linear { start: 0.0, end: 5.0 }).is_err());
        let sp = SpacetimePath::new(p, Timing::Linear { start: 0.0, end: 20.0 }).unwrap();
        assert!((sp.velocity(0.3).x - 0.5).abs() < 1e-15);
    }

    #[test]
    fn time_breakpoints_map_to_parameter() {
        let sp = SpacetimePath::stationary(Vector3::zeros(), 0.0, 10.0).unwrap();
        assert_eq!(sp.breakpoints(&[2.5, 5.0, 12.0]), vec![0.0, 0.25, 0.5, 1.0]);
    }

    #[test]
    fn csv_import() {
        let text = "t,x,y,z\n0,0,0,0\n2,1,0,0\n4,1,1,0\n";
        let sp = SpacetimePath::from_csv(text.as_bytes()).unwrap();
        assert_eq!(sp.time(0.75), 3.0);
        assert!((sp.velocity(0.25) - Vector3::new(0.5, 0.0, 0.0)).norm() < 1e-15);
        let bad = "t,x,y\n0,0,0\n";
        assert!(SpacetimePath::from_csv(bad.as_bytes()).is_err());
        let same = "t,x,y,z\n1,0,0,0\n1,1,0,0\n";
        assert_eq!(*SpacetimePath::from_csv(same.as_bytes()).unwrap().timing(), Timing::Instant(1.0));
    }
}
