use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::SpinorGrid;
use super::hamiltonian::{HamiltonianTerms, Term};
use crate::error::{invalid, Error, Result};

pub const SOLVER_TOLERANCE: f64 = 1e-13;
pub const SOLVER_MAX_ITERATIONS: usize = 1000;
/// dt times the largest non-kinetic local energy must stay below this.
pub const STABILITY_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveStats {
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(Complex64::ZERO, |s, (x, y)| s + x.conj() * y)
}

fn norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Jacobi-preconditioned BiCGSTAB for A x = b, starting from the given x.
pub fn bicgstab<A>(apply: A, diag: &[Complex64], b: &[Complex64], x: &mut [Complex64]) -> Result<SolveStats>
where
    A: Fn(&[Complex64], &mut [Complex64]),
{
    let n = b.len();
    let b_norm = norm(b);
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = Complex64::ZERO);
        return Ok(SolveStats::default());
    }
    let target = SOLVER_TOLERANCE * b_norm;
    let precondition = |src: &[Complex64], dst: &mut [Complex64]| {
        dst.par_iter_mut().zip(src.par_iter()).zip(diag.par_iter()).for_each(|((d, s), m)| *d = s / m);
    };

    let mut r = vec![Complex64::ZERO; n];
    apply(x, &mut r);
    r.par_iter_mut().zip(b.par_iter()).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut residual = norm(&r);
    if residual <= target {
        return Ok(SolveStats { iterations: 0, residual: residual / b_norm });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (Complex64::ONE, Complex64::ONE, Complex64::ONE);
    let mut v = vec![Complex64::ZERO; n];
    let mut p = vec![Complex64::ZERO; n];
    let mut y = vec![Complex64::ZERO; n];
    let mut s = vec![Complex64::ZERO; n];
    let mut z = vec![Complex64::ZERO; n];
    let mut t = vec![Complex64::ZERO; n];

    for it in 1..=SOLVER_MAX_ITERATIONS {
        let rho_next = dot(&r_hat, &r);
        if rho_next.norm() == 0.0 {
            break;
        }
        let beta = (rho_next / rho) * (alpha / omega);
        rho = rho_next;
        p.par_iter_mut()
            .zip(r.par_iter())
            .zip(v.par_iter())
            .for_each(|((pi, ri), vi)| *pi = ri + beta * (*pi - omega * vi));
        precondition(&p, &mut y);
        apply(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        s.par_iter_mut().zip(r.par_iter()).zip(v.par_iter()).for_each(|((si, ri), vi)| *si = ri - alpha * vi);
        if norm(&s) <= target {
            x.par_iter_mut().zip(y.par_iter()).for_each(|(xi, yi)| *xi += alpha * yi);
            return Ok(SolveStats { iterations: it, residual: norm(&s) / b_norm });
        }
        precondition(&s, &mut z);
        apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt.norm() == 0.0 { Complex64::ZERO } else { dot(&t, &s) / tt };
        x.par_iter_mut().zip(y.par_iter()).zip(z.par_iter()).for_each(|((xi, yi), zi)| *xi += alpha * yi + omega * zi);
        r.par_iter_mut().zip(s.par_iter()).zip(t.par_iter()).for_each(|((ri, si), ti)| *ri = si - omega * ti);
        residual = norm(&r);
        if residual <= target {
            return Ok(SolveStats { iterations: it, residual: residual / b_norm });
        }
        if omega.norm() == 0.0 {
            break;
        }
    }
    Err(Error::SolverNonconvergence { residual: residual / b_norm, iterations: SOLVER_MAX_ITERATIONS })
}

/// Crank–Nicolson stepper: (1 + i dt H/2) ψ⁺ = (1 − i dt H/2) ψ, with H
/// sampled at the step midpoint.
#[derive(Debug, Clone)]
pub struct Propagator {
    terms: HamiltonianTerms,
    dt: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct EvolutionStats {
    pub steps: usize,
    pub max_iterations: usize,
    pub max_residual: f64,
}

impl EvolutionStats {
    fn absorb(&mut self, s: SolveStats) {
        self.max_iterations = self.max_iterations.max(s.iterations);
        self.max_residual = self.max_residual.max(s.residual);
    }
}

impl Propagator {
    pub fn new(terms: HamiltonianTerms, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid("time step must be positive"));
        }
        let p = Self { terms, dt };
        p.check_stability(&p.terms)?;
        Ok(p)
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn terms(&self) -> &HamiltonianTerms {
        &self.terms
    }

    fn check_stability(&self, terms: &HamiltonianTerms) -> Result<()> {
        let scale = self.dt * terms.local_energy_scale();
        if scale >= STABILITY_LIMIT {
            return Err(invalid(format!(
                "dt times local energy scale is {scale:.3}, must stay below {STABILITY_LIMIT}"
            )));
        }
        Ok(())
    }

    /// Advances `grid` by one step.
    pub fn step(&mut self, grid: &mut SpinorGrid) -> Result<SolveStats> {
        if grid.geometry != self.terms.geometry {
            return Err(invalid("grid geometry does not match the Hamiltonian"));
        }
        let mid = grid.time + 0.5 * self.dt;
        if !self.terms.is_static() && self.terms.time != mid {
            self.terms = self.terms.at_time(mid)?;
            self.check_stability(&self.terms)?;
        }
        let half = Complex64::new(0.0, 0.5 * self.dt);
        let terms = &self.terms;
        let n = grid.geometry.len();
        let mut stats = SolveStats::default();
        if terms.is_spin_diagonal() {
            for c in 0..2 {
                if grid.components[c].iter().all(|z| *z == Complex64::ZERO) {
                    continue;
                }
                let x = &mut grid.components[c];
                let mut hx = vec![Complex64::ZERO; n];
                terms.apply_diagonal_block(c, x, &mut hx);
                let rhs: Vec<Complex64> = x.par_iter().zip(hx.par_iter()).map(|(a, b)| a - half * b).collect();
                let diag: Vec<Complex64> =
                    (0..n).into_par_iter().map(|k| Complex64::ONE + half * terms.diagonal(c, k)).collect();
                let s = bicgstab(
                    |v, out| {
                        terms.apply_diagonal_block(c, v, out);
                        out.par_iter_mut().zip(v.par_iter()).for_each(|(o, vi)| *o = vi + half * *o);
                    },
                    &diag,
                    &rhs,
                    x,
                )?;
                stats.iterations = stats.iterations.max(s.iterations);
                stats.residual = stats.residual.max(s.residual);
            }
        } else {
            let mut flat: Vec<Complex64> = grid.components.concat();
            let mut hx = vec![Complex64::ZERO; 2 * n];
            apply_flat(terms, &flat, &mut hx);
            let rhs: Vec<Complex64> = flat.par_iter().zip(hx.par_iter()).map(|(a, b)| a - half * b).collect();
            let diag: Vec<Complex64> =
                (0..2 * n).into_par_iter().map(|k| Complex64::ONE + half * terms.diagonal(k / n, k % n)).collect();
            stats = bicgstab(
                |v, out| {
                    apply_flat(terms, v, out);
                    out.par_iter_mut().zip(v.par_iter()).for_each(|(o, vi)| *o = vi + half * *o);
                },
                &diag,
                &rhs,
                &mut flat,
            )?;
            let (up, down) = flat.split_at(n);
            grid.components[0].copy_from_slice(up);
            grid.components[1].copy_from_slice(down);
        }
        grid.time += self.dt;
        Ok(stats)
    }

    /// Advances `grid` by `steps` steps.
    pub fn run(&mut self, grid: &mut SpinorGrid, steps: usize) -> Result<EvolutionStats> {
        let mut stats = EvolutionStats::default();
        for _ in 0..steps {
            stats.absorb(self.step(grid)?);
            stats.steps += 1;
        }
        log::debug!(
            "{} CN steps to t = {}, at most {} solver iterations, residual {:.2e}",
            stats.steps,
            grid.time,
            stats.max_iterations,
            stats.max_residual
        );
        Ok(stats)
    }
}

fn apply_flat(terms: &HamiltonianTerms, v: &[Complex64], out: &mut [Complex64]) {
    let n = v.len() / 2;
    let (v0, v1) = v.split_at(n);
    let (o0, o1) = out.split_at_mut(n);
    terms.apply_terms(&Term::ALL, [v0, v1], [o0, o1]);
}

/// Crank–Nicolson evolution of `grid` for `steps` steps of size `dt`.
pub fn evolve(grid: &SpinorGrid, terms: &HamiltonianTerms, dt: f64, steps: usize) -> Result<SpinorGrid> {
    let mut out = grid.clone();
    Propagator::new(terms.clone(), dt)?.run(&mut out, steps)?;
    Ok(out)
}

/// Continuity residual at one interior node set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurrentCheck {
    /// max |∂_t ρ + ∇·j| over interior nodes and time slices.
    pub max_residual: f64,
    /// max |∂_t ρ| over the same nodes, for scale.
    pub max_rate: f64,
}

/// Node-centred covariant current j = (1/m) Im(ψ† π ψ) at node k, both
/// components summed.
fn current(terms: &HamiltonianTerms, grid: &SpinorGrid, k: usize) -> [f64; 2] {
    let g = &grid.geometry;
    let m = terms.mass();
    let mut j = [0.0; 2];
    for c in 0..2 {
        let x = &grid.components[c];
        let dx = (terms.links_x[k] * x[k + 1] - terms.links_x[k - 1].conj() * x[k - 1]) / (2.0 * g.h);
        let dy = (terms.links_y[k] * x[k + g.nx] - terms.links_y[k - g.nx].conj() * x[k - g.nx]) / (2.0 * g.h);
        j[0] += (x[k].conj() * dx).im / m;
        j[1] += (x[k].conj() * dy).im / m;
    }
    j
}

/// Evaluates ∂_t|ψ|² + ∇·j on interior nodes for equally spaced slices,
/// using centred differences in time and space. Spin-orbit currents are
/// not included, so the check is meaningful for spin-diagonal Hamiltonians.
pub fn probability_current_check(history: &[SpinorGrid], terms: &HamiltonianTerms) -> Result<CurrentCheck> {
    if history.len() < 3 {
        return Err(invalid("current check needs at least three time slices"));
    }
    let g = history[0].geometry;
    if history.iter().any(|s| s.geometry != g) || terms.geometry != g {
        return Err(invalid("slices and Hamiltonian must share one geometry"));
    }
    let dt = history[1].time - history[0].time;
    if !(dt > 0.0) || history.windows(2).any(|w| ((w[1].time - w[0].time) - dt).abs() > 1e-9 * dt.abs().max(1.0)) {
        return Err(invalid("time slices must be equally spaced and increasing"));
    }
    let mut out = CurrentCheck { max_residual: 0.0, max_rate: 0.0 };
    for w in history.windows(3) {
        let (before, now, after) = (&w[0], &w[1], &w[2]);
        let (rb, ra) = (before.density(), after.density());
        // Current on the ring i, j ∈ 1..n−1 so the divergence stencil sits on 2..n−2.
        let j: Vec<Option<[f64; 2]>> = (0..g.len())
            .into_par_iter()
            .map(|k| {
                let (i, jj) = g.coords(k);
                (i >= 1 && jj >= 1 && i + 1 < g.nx && jj + 1 < g.ny).then(|| current(terms, now, k))
            })
            .collect();
        let (res, rate) = (0..g.len())
            .into_par_iter()
            .filter_map(|k| {
                let (i, jj) = g.coords(k);
                if i < 2 || jj < 2 || i + 2 >= g.nx || jj + 2 >= g.ny {
                    return None;
                }
                let div = (j[k + 1]?[0] - j[k - 1]?[0] + j[k + g.nx]?[1] - j[k - g.nx]?[1]) / (2.0 * g.h);
                let rate = (ra[k] - rb[k]) / (2.0 * dt);
                Some(((rate + div).abs(), rate.abs()))
            })
            .reduce(|| (0.0, 0.0), |a, b| (a.0.max(b.0), a.1.max(b.1)));
        out.max_residual = out.max_residual.max(res);
        out.max_rate = out.max_rate.max(rate);
    }
    Ok(out)
}
