use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::evolve::Propagator;
use super::grid::{GaussianPacket, GridGeometry, SpinorGrid};
use super::hamiltonian::{build_fw_hamiltonian, HamiltonianTerms};
use super::spin::SpinState;
use crate::error::{invalid, Error, Result};
use crate::fields::FieldConfig;
use crate::gauge::EffectiveGaugePotential;
use crate::phase::{potential_phase, Path, QuadratureOptions, SpacetimePath};

/// Below this overlap magnitude the relative phase is reported as undefined.
pub const MIN_OVERLAP: f64 = 1e-3;
/// Required packet-centre distance from every singular axis, in packet widths.
pub const MIN_CLEARANCE_WIDTHS: f64 = 5.0;

/// Two-arm interferometer in the z = 0 plane. The source sits at
/// (−L, 0), the arms turn at (0, ±H) and recombine at (L, 0). Each arm is
/// driven by momentum kicks only: (k_x, ±k_y) at the source, ∓2k_y at the
/// apex and ±k_y at the detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerSetup {
    pub mass: f64,
    pub moment: f64,
    pub polarization: Vector3<f64>,
    /// Packet width σ at the apex, where the chirped packet is narrowest.
    pub width: f64,
    /// Magnitude of the wave vector along the arms.
    pub wavenumber: f64,
    pub half_length: f64,
    pub half_height: f64,
    /// Half edge of the square simulation box.
    pub half_box: f64,
    /// Nodes per box edge.
    pub grid: usize,
    pub dt: f64,
}

impl Default for InterferometerSetup {
    fn default() -> Self {
        Self {
            mass: 2.0,
            moment: 1.0,
            polarization: Vector3::z(),
            width: 1.0,
            wavenumber: 9.0,
            half_length: 8.0,
            half_height: 8.0,
            half_box: 16.0,
            grid: 256,
            dt: 0.01,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterferometerResult {
    /// arg⟨ψ_left|ψ_right⟩ at recombination.
    pub phase: f64,
    /// Line-integral phase of the right arm minus the left arm.
    pub predicted: f64,
    pub overlap: f64,
    pub grid: usize,
    pub h: f64,
    pub dt: f64,
    pub steps_per_leg: usize,
    pub wave_vector: [f64; 2],
    /// Closest approach of a packet centre to a singular axis, in widths.
    pub clearance_widths: f64,
    /// Largest norm fraction found within four nodes of the boundary.
    pub edge_fraction: f64,
    pub norm_drift: f64,
}

impl InterferometerResult {
    pub fn error(&self) -> f64 {
        (self.phase - self.predicted).abs()
    }
}

impl InterferometerSetup {
    /// Same physical setup on an `n × n` grid with dt scaled like h.
    pub fn refined(&self, n: usize) -> Self {
        Self { grid: n, dt: self.dt * self.grid as f64 / n as f64, ..*self }
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::centered(self.grid, self.half_box)
    }

    pub fn source(&self) -> Vector2<f64> {
        Vector2::new(-self.half_length, 0.0)
    }

    pub fn detector(&self) -> Vector2<f64> {
        Vector2::new(self.half_length, 0.0)
    }

    fn apex(&self, upper: bool) -> Vector2<f64> {
        Vector2::new(0.0, if upper { self.half_height } else { -self.half_height })
    }

    fn arm(&self, upper: bool) -> Result<Path> {
        let p = |v: Vector2<f64>| Vector3::new(v.x, v.y, 0.0);
        Path::polyline(vec![p(self.source()), p(self.apex(upper)), p(self.detector())])
    }

    /// Upper arm.
    pub fn left_path(&self) -> Result<Path> {
        self.arm(true)
    }

    /// Lower arm.
    pub fn right_path(&self) -> Result<Path> {
        self.arm(false)
    }

    fn validate(&self) -> Result<()> {
        let positive =
            [self.mass, self.width, self.wavenumber, self.half_length, self.half_height, self.half_box, self.dt];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) || !self.moment.is_finite() {
            return Err(invalid("interferometer parameters must be positive and finite"));
        }
        if self.half_length.max(self.half_height) >= self.half_box {
            return Err(invalid("interferometer arms must fit inside the box"));
        }
        Ok(())
    }

    /// Lattice wave vector (k_x, k_y) with |k| = wavenumber whose discrete
    /// group velocity points along the first leg.
    fn wave_vector(&self, h: f64) -> Result<Vector2<f64>> {
        let k = self.wavenumber;
        let ratio = self.half_length / self.half_height;
        let f = |ky: f64| ((k * k - ky * ky).max(0.0).sqrt() * h).sin() - ratio * (ky * h).sin();
        let (mut lo, mut hi) = (0.0, k);
        if !(f(lo) > 0.0 && f(hi) < 0.0) {
            return Err(invalid("no lattice wave vector matches the arm direction"));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let ky = 0.5 * (lo + hi);
        let kx = (k * k - ky * ky).sqrt();
        if kx * h >= std::f64::consts::FRAC_PI_2 || ky * h >= std::f64::consts::FRAC_PI_2 {
            return Err(invalid("wave vector too large for the grid spacing"));
        }
        Ok(Vector2::new(kx, ky))
    }
}

/// Lattice parallel transport e^{iμ∫𝒜⃗·dl} from node `root`, first along its
/// column, then along each row.
fn transport_from(terms: &HamiltonianTerms, root: (usize, usize)) -> Vec<Complex64> {
    let g = terms.geometry;
    let mut d = vec![Complex64::ONE; g.len()];
    let (i0, j0) = root;
    for j in j0 + 1..g.ny {
        d[g.index(i0, j)] = d[g.index(i0, j - 1)] * terms.links_y[g.index(i0, j - 1)].conj();
    }
    for j in (0..j0).rev() {
        d[g.index(i0, j)] = d[g.index(i0, j + 1)] * terms.links_y[g.index(i0, j)];
    }
    for j in 0..g.ny {
        for i in i0 + 1..g.nx {
            d[g.index(i, j)] = d[g.index(i - 1, j)] * terms.links_x[g.index(i - 1, j)].conj();
        }
        for i in (0..i0).rev() {
            d[g.index(i, j)] = d[g.index(i + 1, j)] * terms.links_x[g.index(i, j)];
        }
    }
    d
}

fn nearest_node(g: &GridGeometry, r: &Vector2<f64>) -> (usize, usize) {
    let idx = |x: f64, o: f64, n: usize| (((x - o) / g.h).round().max(0.0) as usize).min(n - 1);
    (idx(r.x, g.origin[0], g.nx), idx(r.y, g.origin[1], g.ny))
}

fn run_arm(
    setup: &InterferometerSetup,
    terms: &HamiltonianTerms,
    initial: &SpinorGrid,
    k: Vector2<f64>,
    upper: bool,
    steps_per_leg: usize,
) -> Result<(SpinorGrid, f64)> {
    let sign = if upper { 1.0 } else { -1.0 };
    let mut psi = initial.clone();
    psi.kick(&Vector2::new(k.x, sign * k.y), &setup.source());
    let mut prop = Propagator::new(terms.clone(), setup.dt)?;
    let mut edge: f64 = 0.0;
    prop.run(&mut psi, steps_per_leg)?;
    edge = edge.max(psi.edge_fraction(4));
    psi.kick(&Vector2::new(0.0, -2.0 * sign * k.y), &setup.apex(upper));
    prop.run(&mut psi, steps_per_leg)?;
    edge = edge.max(psi.edge_fraction(4));
    psi.kick(&Vector2::new(0.0, sign * k.y), &setup.detector());
    Ok((psi, edge))
}

/// Runs both arms around `config` and compares arg⟨ψ_left|ψ_right⟩ with
/// the line-integral phase difference of the two arms.
pub fn interferometric_phase(config: &FieldConfig, setup: &InterferometerSetup) -> Result<InterferometerResult> {
    setup.validate()?;
    let geometry = setup.geometry()?;
    let h = geometry.h;
    let k = setup.wave_vector(h)?;
    let m = setup.mass;

    // Discrete CN group velocity along x for the lattice dispersion.
    let energy = (2.0 - (k.x * h).cos() - (k.y * h).cos()) / (m * h * h);
    let vx = (k.x * h).sin() / (m * h) / (1.0 + (0.5 * setup.dt * energy).powi(2));
    let steps_per_leg = (setup.half_length / vx / setup.dt).round() as usize;
    if steps_per_leg == 0 {
        return Err(invalid("time step longer than an arm"));
    }
    let leg_time = steps_per_leg as f64 * setup.dt;
    log::debug!(
        "interferometer on {}² nodes, h = {h}, k = ({}, {}), {steps_per_leg} steps per leg",
        setup.grid,
        k.x,
        k.y
    );
    // Curvature of the lattice dispersion sets the spreading mass.
    let spreading_mass = m / (k.x * h).cos().min((k.y * h).cos());

    let axes = config.singular_axes();
    let width_at = |t: f64| {
        let s = setup.width;
        (s * s + ((t - leg_time) / (2.0 * spreading_mass * s)).powi(2)).sqrt()
    };
    let mut clearance = f64::INFINITY;
    for n in 0..=200 {
        let t = 2.0 * leg_time * n as f64 / 200.0;
        let frac = (t / leg_time).min(2.0);
        for upper in [true, false] {
            let apex = setup.apex(upper);
            let c = if frac <= 1.0 {
                setup.source() + (apex - setup.source()) * frac
            } else {
                apex + (setup.detector() - apex) * (frac - 1.0)
            };
            for axis in &axes {
                let d = axis.distance(&Vector3::new(c.x, c.y, 0.0));
                clearance = clearance.min(d / width_at(t));
            }
        }
    }
    if clearance < MIN_CLEARANCE_WIDTHS {
        return Err(invalid(format!(
            "packet passes {clearance:.2} widths from a singular axis, need {MIN_CLEARANCE_WIDTHS}"
        )));
    }

    let terms = build_fw_hamiltonian(config, &setup.polarization, setup.moment, m, geometry)?;
    let spin = SpinState::along(&setup.polarization)?.amplitudes();
    let packet = GaussianPacket {
        center: setup.source(),
        width: setup.width,
        momentum: Vector2::zeros(),
        spin,
        focus_time: leg_time,
        mass: spreading_mass,
    };
    let mut initial = SpinorGrid::gaussian(geometry, &packet)?;
    let transport = transport_from(&terms, nearest_node(&geometry, &setup.source()));
    for comp in &mut initial.components {
        for (v, d) in comp.iter_mut().zip(&transport) {
            *v *= d;
        }
    }
    let norm0 = initial.norm();

    let (left, right) = rayon::join(
        || run_arm(setup, &terms, &initial, k, true, steps_per_leg),
        || run_arm(setup, &terms, &initial, k, false, steps_per_leg),
    );
    let ((left, edge_l), (right, edge_r)) = (left?, right?);
    let overlap = left.inner(&right)?;
    if overlap.norm() < MIN_OVERLAP {
        return Err(Error::OverlapTooSmall { overlap: overlap.norm() });
    }

    let potential = EffectiveGaugePotential::nonrelativistic(config.clone(), setup.polarization)?;
    let opts = QuadratureOptions::default();
    let arm_phase = |p: Path| -> Result<f64> {
        Ok(potential_phase(&potential, setup.moment, &SpacetimePath::spatial(p, 0.0), &opts)?.value)
    };
    let predicted = arm_phase(setup.right_path()?)? - arm_phase(setup.left_path()?)?;

    Ok(InterferometerResult {
        phase: overlap.arg(),
        predicted,
        overlap: overlap.norm(),
        grid: setup.grid,
        h,
        dt: setup.dt,
        steps_per_leg,
        wave_vector: [k.x, k.y],
        clearance_widths: clearance,
        edge_fraction: edge_l.max(edge_r),
        norm_drift: (left.norm() - norm0).abs().max((right.norm() - norm0).abs()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wave_vector_follows_arm() {
        let s = InterferometerSetup { half_height: 6.0, ..Default::default() };
        let h = s.geometry().unwrap().h;
        let k = s.wave_vector(h).unwrap();
        assert!(((k.x * h).sin() / (k.y * h).sin() - 8.0 / 6.0).abs() < 1e-12);
        assert!((k.norm() - 9.0).abs() < 1e-12);
    }

    #[test]
    fn transport_is_flat_without_field() {
        let g = GridGeometry::centered(8, 2.0).unwrap();
        let t = build_fw_hamiltonian(&FieldConfig::zero(), &Vector3::z(), 1.0, 1.0, g).unwrap();
        assert!(transport_from(&t, (2, 3)).iter().all(|d| *d == Complex64::ONE));
    }

    #[test]
    fn clearance_check() {
        let cfg = FieldConfig::line_charge(1.0, crate::fields::Axis::z()).unwrap();
        let s = InterferometerSetup { half_length: 4.0, half_height: 4.0, width: 1.0, ..Default::default() };
        assert!(interferometric_phase(&cfg, &s).is_err());
    }
}
