use std::sync::Arc;

use nalgebra::{DMatrix, Vector2, Vector3};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::GridGeometry;
use crate::error::{invalid, Result};
use crate::fields::{FieldConfig, FieldPart};
use crate::gauge::{exact_effective_fields, EffectiveGaugePotential, PotentialField, Provenance};
use crate::spinor::FourVector;

/// Step for differentiating ℰ⃗ when forming ∇·ℰ⃗ and ∇×ℰ⃗.
const SECOND_DERIVATIVE_STEP: f64 = 1e-3;
const FIRST_DERIVATIVE_STEP: f64 = 1e-4;

/// The individually Hermitian pieces of the upper-block FW Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    /// (p − μ𝒜⃗)²/2m with Peierls link phases, Dirichlet boundary.
    Kinetic,
    /// μ𝒜⁰
    Scalar,
    /// −(μ/2m) σ⃗·ℬ⃗
    Zeeman,
    /// −(μ/4m²) σ⃗·(ℰ⃗×π⃗) together with −(iμ/8m²) σ⃗·(∇×ℰ⃗), applied as the
    /// Hermitian product −(μ/8m²) ε_{kij} σ_k {ℰ_i, π_j}.
    SpinOrbit,
    /// −(μ/8m²) ∇·ℰ⃗
    Darwin,
}

impl Term {
    pub const ALL: [Term; 5] = [Term::Kinetic, Term::Scalar, Term::Zeeman, Term::SpinOrbit, Term::Darwin];
}

#[derive(Debug)]
struct Source {
    config: FieldConfig,
    potential: EffectiveGaugePotential,
    provenance: Provenance,
    moment: f64,
    mass: f64,
    plane_z: f64,
    vector_static: bool,
    scalar_static: bool,
}

/// Per-node samples of every FW term at one time.
#[derive(Debug, Clone)]
pub struct HamiltonianTerms {
    source: Arc<Source>,
    pub geometry: GridGeometry,
    pub time: f64,
    /// U from node (i, j) to (i+1, j): exp(−iμ h 𝒜⃗ₓ) at the edge midpoint.
    pub links_x: Arc<Vec<Complex64>>,
    /// U from node (i, j) to (i, j+1).
    pub links_y: Arc<Vec<Complex64>>,
    /// μ𝒜⁰
    pub scalar: Vec<f64>,
    /// −(μ/2m)ℬ⃗, multiplying σ⃗.
    pub zeeman: Arc<Vec<Vector3<f64>>>,
    /// ℰ⃗ at each node.
    pub effective_e: Vec<Vector3<f64>>,
    /// ∇×ℰ⃗ at each node (reported; its operator is folded into the spin-orbit term).
    pub curl_e: Vec<Vector3<f64>>,
    /// −(μ/8m²)∇·ℰ⃗
    pub darwin: Vec<f64>,
}

/// Samples 𝒜⃗, 𝒜⁰, ℬ⃗, ℰ⃗ on the grid in the plane z = `plane_z` and
/// assembles the FW terms for a particle with the given polarization. The
/// rest mass is dropped.
pub fn build_fw_hamiltonian(
    config: &FieldConfig,
    polarization: &Vector3<f64>,
    moment: f64,
    mass: f64,
    geometry: GridGeometry,
) -> Result<HamiltonianTerms> {
    build_fw_hamiltonian_with(config, Provenance::Nonrelativistic(*polarization), moment, mass, geometry, 0.0, 0.0)
}

pub fn build_fw_hamiltonian_with(
    config: &FieldConfig,
    provenance: Provenance,
    moment: f64,
    mass: f64,
    geometry: GridGeometry,
    plane_z: f64,
    time: f64,
) -> Result<HamiltonianTerms> {
    if !(mass > 0.0) || !moment.is_finite() {
        return Err(invalid("mass must be positive and the moment finite"));
    }
    let potential = EffectiveGaugePotential::new(config.clone(), provenance)?;
    let boosted = potential.four_spin()[0] != 0.0;
    let e_static = config.part_is_static(FieldPart::Electric);
    let b_static = config.part_is_static(FieldPart::Magnetic);
    let source = Arc::new(Source {
        config: config.clone(),
        potential,
        provenance,
        moment,
        mass,
        plane_z,
        vector_static: e_static && (!boosted || b_static),
        scalar_static: b_static,
    });
    sample_terms(source, geometry, time, None)
}

fn sample_terms(
    source: Arc<Source>,
    geometry: GridGeometry,
    time: f64,
    previous: Option<&HamiltonianTerms>,
) -> Result<HamiltonianTerms> {
    let n = geometry.len();
    let event = |r: Vector2<f64>| FourVector::new(time, r.x, r.y, source.plane_z);
    let reuse_vector = previous.filter(|_| source.vector_static);

    let (links_x, links_y, zeeman) = match reuse_vector {
        Some(p) => (p.links_x.clone(), p.links_y.clone(), p.zeeman.clone()),
        None => {
            // Peierls phase from 𝒜⃗ sampled at the edge midpoint.
            let link = |from: Vector2<f64>, to: Vector2<f64>| -> Result<Complex64> {
                let d = to - from;
                let a = source.potential.potential(&event(from + d * 0.5))?.vector();
                Ok(Complex64::from_polar(1.0, -source.moment * (a.x * d.x + a.y * d.y)))
            };
            let lx: Vec<Complex64> = (0..n)
                .into_par_iter()
                .map(|k| {
                    let (i, j) = geometry.coords(k);
                    if i + 1 < geometry.nx {
                        link(geometry.position(i, j), geometry.position(i + 1, j))
                    } else {
                        Ok(Complex64::ONE)
                    }
                })
                .collect::<Result<_>>()?;
            let ly: Vec<Complex64> = (0..n)
                .into_par_iter()
                .map(|k| {
                    let (i, j) = geometry.coords(k);
                    if j + 1 < geometry.ny {
                        link(geometry.position(i, j), geometry.position(i, j + 1))
                    } else {
                        Ok(Complex64::ONE)
                    }
                })
                .collect::<Result<_>>()?;
            let factor = -source.moment / (2.0 * source.mass);
            let z: Vec<Vector3<f64>> = (0..n)
                .into_par_iter()
                .map(|k| {
                    let (b, _) = exact_effective_fields(
                        &source.config,
                        &source.provenance,
                        &event(geometry.node_position(k)),
                        FIRST_DERIVATIVE_STEP,
                    )?;
                    Ok(b * factor)
                })
                .collect::<Result<_>>()?;
            (Arc::new(lx), Arc::new(ly), Arc::new(z))
        }
    };

    let reuse_scalar = previous.filter(|_| source.scalar_static);
    let (scalar, effective_e, curl_e, darwin) = match reuse_scalar {
        Some(p) => (p.scalar.clone(), p.effective_e.clone(), p.curl_e.clone(), p.darwin.clone()),
        None => {
            let e_at = |ev: &FourVector| -> Result<Vector3<f64>> {
                Ok(exact_effective_fields(&source.config, &source.provenance, ev, FIRST_DERIVATIVE_STEP)?.1)
            };
            let so_coeff = -source.moment / (8.0 * source.mass * source.mass);
            let rows: Vec<(f64, Vector3<f64>, Vector3<f64>, f64)> = (0..n)
                .into_par_iter()
                .map(|k| {
                    let ev = event(geometry.node_position(k));
                    let scalar = source.moment * source.potential.potential(&ev)?.scalar();
                    let e = e_at(&ev)?;
                    let jac = crate::fields::diff::jacobian(e_at, &ev, SECOND_DERIVATIVE_STEP)?;
                    let curl = crate::fields::diff::curl_of_jacobian(&jac);
                    Ok((scalar, e, curl, so_coeff * jac.trace()))
                })
                .collect::<Result<_>>()?;
            let mut scalar = Vec::with_capacity(n);
            let mut effective_e = Vec::with_capacity(n);
            let mut curl_e = Vec::with_capacity(n);
            let mut darwin = Vec::with_capacity(n);
            for (s, e, c, d) in rows {
                scalar.push(s);
                effective_e.push(e);
                curl_e.push(c);
                darwin.push(d);
            }
            (scalar, effective_e, curl_e, darwin)
        }
    };

    Ok(HamiltonianTerms { source, geometry, time, links_x, links_y, scalar, zeeman, effective_e, curl_e, darwin })
}

/// Largest absolute value of each term's per-node data.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TermMagnitudes {
    pub vector_potential_phase: f64,
    pub scalar: f64,
    pub zeeman: f64,
    pub spin_orbit: f64,
    pub curl_e: f64,
    pub darwin: f64,
}

impl HamiltonianTerms {
    pub fn mass(&self) -> f64 {
        self.source.mass
    }

    pub fn moment(&self) -> f64 {
        self.source.moment
    }

    pub fn is_static(&self) -> bool {
        self.source.vector_static && self.source.scalar_static
    }

    /// Terms re-sampled at time `t`; static pieces are shared.
    pub fn at_time(&self, t: f64) -> Result<Self> {
        if self.is_static() {
            let mut out = self.clone();
            out.time = t;
            return Ok(out);
        }
        sample_terms(self.source.clone(), self.geometry, t, Some(self))
    }

    pub fn magnitudes(&self) -> TermMagnitudes {
        let amax = |v: &[Vector3<f64>]| v.iter().fold(0.0f64, |m, x| m.max(x.amax()));
        let smax = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let phase = self.links_x.iter().chain(self.links_y.iter()).fold(0.0f64, |m, u| m.max(u.arg().abs()));
        let mm = self.source.mass;
        TermMagnitudes {
            vector_potential_phase: phase,
            scalar: smax(&self.scalar),
            zeeman: amax(&self.zeeman),
            spin_orbit: amax(&self.effective_e) * self.source.moment.abs() / (4.0 * mm * mm),
            curl_e: amax(&self.curl_e) * self.source.moment.abs() / (8.0 * mm * mm),
            darwin: smax(&self.darwin),
        }
    }

    /// Whether σ_z commutes with every term, so the components decouple.
    pub fn is_spin_diagonal(&self) -> bool {
        self.zeeman.iter().all(|z| z.x == 0.0 && z.y == 0.0) && self.effective_e.iter().all(|e| *e == Vector3::zeros())
    }

    /// Non-kinetic local energy scale used by the stability guard.
    pub fn local_energy_scale(&self) -> f64 {
        let m = self.magnitudes();
        m.scalar + m.zeeman * 3f64.sqrt() + m.darwin + m.spin_orbit * 2.0 / self.geometry.h
    }

    /// Diagonal of H for component `c` (σ_z sign +1 for c = 0).
    pub(crate) fn diagonal(&self, c: usize, k: usize) -> f64 {
        let sign = if c == 0 { 1.0 } else { -1.0 };
        let h = self.geometry.h;
        2.0 / (self.source.mass * h * h) + self.scalar[k] + self.darwin[k] + sign * self.zeeman[k].z
    }

    /// out = H ψ for the full two-component state.
    pub fn apply(&self, psi: &[Vec<Complex64>; 2], out: &mut [Vec<Complex64>; 2]) {
        let [o0, o1] = out;
        self.apply_terms(&Term::ALL, [&psi[0], &psi[1]], [o0, o1]);
    }

    /// out = (selected terms) ψ.
    pub fn apply_terms(&self, terms: &[Term], psi: [&[Complex64]; 2], out: [&mut [Complex64]; 2]) {
        let has = |t: Term| terms.contains(&t);
        let spin_orbit = has(Term::SpinOrbit) && self.effective_e.iter().any(|e| *e != Vector3::zeros());
        let so_coeff = -self.source.moment / (8.0 * self.source.mass * self.source.mass);
        let [out0, out1] = out;
        out0.par_iter_mut().zip(out1.par_iter_mut()).enumerate().for_each(|(k, (o0, o1))| {
            let mut acc = [Complex64::ZERO; 2];
            for c in 0..2 {
                let x = psi[c];
                if has(Term::Kinetic) {
                    acc[c] += self.kinetic_at(x, k);
                }
                let mut diag = 0.0;
                if has(Term::Scalar) {
                    diag += self.scalar[k];
                }
                if has(Term::Darwin) {
                    diag += self.darwin[k];
                }
                acc[c] += x[k] * diag;
            }
            if has(Term::Zeeman) {
                let z = self.zeeman[k];
                let (u, d) = (psi[0][k], psi[1][k]);
                acc[0] += u * z.z + d * Complex64::new(z.x, -z.y);
                acc[1] += u * Complex64::new(z.x, z.y) - d * z.z;
            }
            if spin_orbit {
                let w = self.spin_orbit_at(psi, k);
                // σ⃗·W for spinor-valued W_k.
                acc[0] += (w[2][0] + w[0][1] - Complex64::I * w[1][1]) * so_coeff;
                acc[1] += (w[0][0] + Complex64::I * w[1][0] - w[2][1]) * so_coeff;
            }
            *o0 = acc[0];
            *o1 = acc[1];
        });
    }

    /// One component of H ψ when the Hamiltonian is spin diagonal.
    pub(crate) fn apply_diagonal_block(&self, c: usize, x: &[Complex64], out: &mut [Complex64]) {
        let sign = if c == 0 { 1.0 } else { -1.0 };
        out.par_iter_mut().enumerate().for_each(|(k, o)| {
            *o = self.kinetic_at(x, k) + x[k] * (self.scalar[k] + self.darwin[k] + sign * self.zeeman[k].z);
        });
    }

    #[inline]
    fn kinetic_at(&self, x: &[Complex64], k: usize) -> Complex64 {
        let g = &self.geometry;
        let (i, j) = g.coords(k);
        let mut nb = Complex64::ZERO;
        if i + 1 < g.nx {
            nb += self.links_x[k] * x[k + 1];
        }
        if i > 0 {
            nb += self.links_x[k - 1].conj() * x[k - 1];
        }
        if j + 1 < g.ny {
            nb += self.links_y[k] * x[k + g.nx];
        }
        if j > 0 {
            nb += self.links_y[k - g.nx].conj() * x[k - g.nx];
        }
        (x[k] * 4.0 - nb) / (2.0 * self.source.mass * g.h * g.h)
    }

    /// Covariant central difference π_dir f at node k for a node function f.
    #[inline]
    fn pi_at<F: Fn(usize) -> Complex64>(&self, dir: usize, k: usize, f: F) -> Complex64 {
        let g = &self.geometry;
        let (i, j) = g.coords(k);
        let (links, stride, pos, len) =
            if dir == 0 { (&self.links_x, 1, i, g.nx) } else { (&self.links_y, g.nx, j, g.ny) };
        let mut d = Complex64::ZERO;
        if pos + 1 < len {
            d += links[k] * f(k + stride);
        }
        if pos > 0 {
            d -= links[k - stride].conj() * f(k - stride);
        }
        -Complex64::I * d / (2.0 * g.h)
    }

    /// W_k = ε_{kij}{ℰ_i, π_j}ψ for k = x, y, z, each a two-spinor.
    fn spin_orbit_at(&self, psi: [&[Complex64]; 2], k: usize) -> [[Complex64; 2]; 3] {
        let e = &self.effective_e;
        let mut w = [[Complex64::ZERO; 2]; 3];
        for c in 0..2 {
            let x = psi[c];
            let anti = |i: usize, dir: usize| -> Complex64 {
                e[k][i] * self.pi_at(dir, k, |m| x[m]) + self.pi_at(dir, k, |m| x[m] * e[m][i])
            };
            w[0][c] = -anti(2, 1);
            w[1][c] = anti(2, 0);
            w[2][c] = anti(0, 1) - anti(1, 0);
        }
        w
    }

    /// Dense matrix of the selected terms; small grids only.
    pub fn assemble_dense(&self, terms: &[Term]) -> Result<DMatrix<Complex64>> {
        let n = self.geometry.len();
        if n > 32 * 32 {
            return Err(invalid("dense assembly is limited to 32 × 32 grids"));
        }
        let dim = 2 * n;
        let mut m = DMatrix::zeros(dim, dim);
        let mut psi = [vec![Complex64::ZERO; n], vec![Complex64::ZERO; n]];
        let mut out = [vec![Complex64::ZERO; n], vec![Complex64::ZERO; n]];
        for col in 0..dim {
            psi[col / n][col % n] = Complex64::ONE;
            {
                let [o0, o1] = &mut out;
                self.apply_terms(terms, [&psi[0], &psi[1]], [o0, o1]);
            }
            psi[col / n][col % n] = Complex64::ZERO;
            for row in 0..dim {
                m[(row, col)] = out[row / n][row % n];
            }
        }
        Ok(m)
    }

    /// max |H − H†| of each term assembled as a matrix.
    pub fn hermiticity_residuals(&self) -> Result<Vec<(Term, f64)>> {
        Term::ALL
            .iter()
            .map(|&t| {
                let m = self.assemble_dense(&[t])?;
                let asym = (&m - m.adjoint()).iter().fold(0.0f64, |a, z| a.max(z.norm()));
                Ok((t, asym))
            })
            .collect()
    }
}
