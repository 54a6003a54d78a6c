use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Vector2, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Largest supported grid edge.
pub const MAX_GRID_EDGE: usize = 2048;
pub const DUMP_MAGIC: &[u8; 4] = b"TPHG";
pub const DUMP_VERSION: u32 = 1;

/// Uniform node lattice: node (i, j) sits at origin + (i h, j h).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    pub nx: usize,
    pub ny: usize,
    pub h: f64,
    pub origin: [f64; 2],
}

impl GridGeometry {
    pub fn new(nx: usize, ny: usize, h: f64, origin: [f64; 2]) -> Result<Self> {
        if !(3..=MAX_GRID_EDGE).contains(&nx) || !(3..=MAX_GRID_EDGE).contains(&ny) {
            return Err(invalid(format!("grid edges must lie in 3..={MAX_GRID_EDGE}")));
        }
        if !(h > 0.0) || !h.is_finite() || !origin.iter().all(|v| v.is_finite()) {
            return Err(invalid("grid spacing must be positive and the origin finite"));
        }
        Ok(Self { nx, ny, h, origin })
    }

    /// `n × n` nodes covering [−half_width, half_width]² with nodes at cell
    /// centres, so the origin falls on a plaquette centre when `n` is even.
    pub fn centered(n: usize, half_width: f64) -> Result<Self> {
        let h = 2.0 * half_width / n as f64;
        Self::new(n, n, h, [-half_width + 0.5 * h, -half_width + 0.5 * h])
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    pub fn coords(&self, n: usize) -> (usize, usize) {
        (n % self.nx, n / self.nx)
    }

    pub fn position(&self, i: usize, j: usize) -> Vector2<f64> {
        Vector2::new(self.origin[0] + i as f64 * self.h, self.origin[1] + j as f64 * self.h)
    }

    pub fn node_position(&self, n: usize) -> Vector2<f64> {
        let (i, j) = self.coords(n);
        self.position(i, j)
    }

    pub fn extent(&self) -> ([f64; 2], [f64; 2]) {
        let max = self.position(self.nx - 1, self.ny - 1);
        (self.origin, [max.x, max.y])
    }
}

/// Two-component wavefunction on a [`GridGeometry`], component-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorGrid {
    pub geometry: GridGeometry,
    pub components: [Vec<Complex64>; 2],
    pub time: f64,
}

/// Gaussian packet description.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPacket {
    pub center: Vector2<f64>,
    pub width: f64,
    pub momentum: Vector2<f64>,
    /// Spin amplitudes, normalized on construction.
    pub spin: [Complex64; 2],
    /// Time until the packet reaches minimum width under free evolution
    /// with the given mass, zero for an initially focused packet.
    pub focus_time: f64,
    pub mass: f64,
}

impl SpinorGrid {
    pub fn zeros(geometry: GridGeometry) -> Self {
        let n = geometry.len();
        Self { geometry, components: [vec![Complex64::ZERO; n], vec![Complex64::ZERO; n]], time: 0.0 }
    }

    pub fn gaussian(geometry: GridGeometry, packet: &GaussianPacket) -> Result<Self> {
        if !(packet.width > 0.0) || !(packet.mass > 0.0) {
            return Err(invalid("packet width and mass must be positive"));
        }
        let spin_norm = (packet.spin[0].norm_sqr() + packet.spin[1].norm_sqr()).sqrt();
        if !(spin_norm > 0.0) {
            return Err(invalid("packet spin amplitudes must not both vanish"));
        }
        // Free evolution maps 1/(4α) with α = σ² + i t/(2m); start at t = −focus.
        let alpha = Complex64::new(packet.width * packet.width, -packet.focus_time / (2.0 * packet.mass));
        let mut grid = Self::zeros(geometry);
        for n in 0..geometry.len() {
            let d = geometry.node_position(n) - packet.center;
            let amp = (-(d.norm_squared()) / (4.0 * alpha)).exp() * Complex64::from_polar(1.0, packet.momentum.dot(&d));
            for c in 0..2 {
                grid.components[c][n] = amp * packet.spin[c] / spin_norm;
            }
        }
        let norm = grid.norm();
        if !(norm > 0.0) {
            return Err(invalid("packet does not overlap the grid"));
        }
        grid.scale(1.0 / norm.sqrt());
        Ok(grid)
    }

    pub fn scale(&mut self, factor: f64) {
        for comp in &mut self.components {
            for v in comp.iter_mut() {
                *v *= factor;
            }
        }
    }

    /// h² Σ |ψ|².
    pub fn norm(&self) -> f64 {
        let h2 = self.geometry.h * self.geometry.h;
        h2 * self.components.iter().flatten().map(|v| v.norm_sqr()).sum::<f64>()
    }

    /// ⟨self|other⟩ = h² Σ ψ̄ φ over both components.
    pub fn inner(&self, other: &SpinorGrid) -> Result<Complex64> {
        if self.geometry != other.geometry {
            return Err(invalid("inner product of grids with different geometry"));
        }
        let h2 = self.geometry.h * self.geometry.h;
        let mut acc = Complex64::ZERO;
        for c in 0..2 {
            for (a, b) in self.components[c].iter().zip(&other.components[c]) {
                acc += a.conj() * b;
            }
        }
        Ok(acc * h2)
    }

    pub fn density(&self) -> Vec<f64> {
        (0..self.geometry.len()).map(|n| self.components[0][n].norm_sqr() + self.components[1][n].norm_sqr()).collect()
    }

    pub fn mean_position(&self) -> Vector2<f64> {
        let rho = self.density();
        let total: f64 = rho.iter().sum();
        let mut acc = Vector2::zeros();
        for (n, r) in rho.iter().enumerate() {
            acc += self.geometry.node_position(n) * *r;
        }
        acc / total
    }

    /// Spin expectation ⟨σ⃗⟩ of the whole wavefunction divided by its norm.
    pub fn spin_expectation(&self) -> Vector3<f64> {
        let mut s = Vector3::zeros();
        let mut total = 0.0;
        for n in 0..self.geometry.len() {
            let (u, d) = (self.components[0][n], self.components[1][n]);
            let ud = u.conj() * d;
            s += Vector3::new(2.0 * ud.re, 2.0 * ud.im, u.norm_sqr() - d.norm_sqr());
            total += u.norm_sqr() + d.norm_sqr();
        }
        s / total
    }

    /// Multiplies by exp(i q·(r − center)), leaving the phase at `center` unchanged.
    pub fn kick(&mut self, q: &Vector2<f64>, center: &Vector2<f64>) {
        for n in 0..self.geometry.len() {
            let phase = Complex64::from_polar(1.0, q.dot(&(self.geometry.node_position(n) - center)));
            for c in 0..2 {
                self.components[c][n] *= phase;
            }
        }
    }

    /// Fraction of the norm within `margin` nodes of the boundary.
    pub fn edge_fraction(&self, margin: usize) -> f64 {
        let g = &self.geometry;
        let rho = self.density();
        let total: f64 = rho.iter().sum();
        let edge: f64 = rho
            .iter()
            .enumerate()
            .filter(|(n, _)| {
                let (i, j) = g.coords(*n);
                i < margin || j < margin || i + margin >= g.nx || j + margin >= g.ny
            })
            .map(|(_, r)| r)
            .sum();
        edge / total
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["x", "y", "re_up", "im_up", "re_down", "im_down"])?;
        for n in 0..self.geometry.len() {
            let r = self.geometry.node_position(n);
            let (u, d) = (self.components[0][n], self.components[1][n]);
            w.write_record([r.x, r.y, u.re, u.im, d.re, d.im].map(|v| v.to_string()))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn export_csv(&self, path: &Path) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }

    /// Binary dump: magic, version, nx, ny as little-endian u32, then per
    /// node in row-major order the pairs (Re, Im) of both components as
    /// little-endian f64.
    pub fn write_binary<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(DUMP_MAGIC)?;
        for v in [DUMP_VERSION, self.geometry.nx as u32, self.geometry.ny as u32] {
            w.write_all(&v.to_le_bytes())?;
        }
        for n in 0..self.geometry.len() {
            for c in 0..2 {
                let z = self.components[c][n];
                w.write_all(&z.re.to_le_bytes())?;
                w.write_all(&z.im.to_le_bytes())?;
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn export_binary(&self, path: &Path) -> Result<()> {
        self.write_binary(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    /// Reads a dump; the geometry spacing and origin are not stored and are
    /// taken from `h` and `origin`.
    pub fn read_binary<R: Read>(mut r: R, h: f64, origin: [f64; 2]) -> Result<Self> {
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[0..4] != DUMP_MAGIC {
            return Err(invalid("not a grid dump"));
        }
        let word = |k: usize| u32::from_le_bytes(header[4 * k..4 * k + 4].try_into().expect("4 bytes"));
        if word(1) != DUMP_VERSION {
            return Err(invalid(format!("unsupported dump version {}", word(1))));
        }
        let geometry = GridGeometry::new(word(2) as usize, word(3) as usize, h, origin)?;
        let mut grid = Self::zeros(geometry);
        let mut buf = [0u8; 8];
        let mut next = |r: &mut R| -> Result<f64> {
            r.read_exact(&mut buf)?;
            Ok(f64::from_le_bytes(buf))
        };
        for n in 0..geometry.len() {
            for c in 0..2 {
                let re = next(&mut r)?;
                let im = next(&mut r)?;
                grid.components[c][n] = Complex64::new(re, im);
            }
        }
        Ok(grid)
    }
}
