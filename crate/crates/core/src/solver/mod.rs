//! Regularized p-Laplace solver on symmetry-reduced `(ξ, θ)` grids.
//!
//! Two discretizations of the same bilinear (Q1) finite-element problem are
//! available. The potential form minimizes the regularized p-energy in `u`
//! by lagged diffusivity; the Moser form solves for `w = -(p-1) ln u` by a
//! damped Newton method, which stays well scaled as `p → 1`.

mod export;
mod kacanov;
mod newton;

use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{DomainSpec, Grid, ManifoldModel};
use crate::radial::{capacity_from_flux, decay_rate, radial_potential};

pub use export::{read_binary, write_binary, write_csv, write_nodal_csv, BINARY_MAGIC};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Formulation {
    /// Potential form for `p ≥ 1.35`, Moser form below.
    Auto,
    Potential,
    Moser,
}

/// Below this exponent `Auto` picks the Moser form.
pub const AUTO_MOSER_BELOW: f64 = 1.35;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LinearSolver {
    /// IC(0)-preconditioned conjugate gradients.
    Pcg,
    /// Banded LU with partial pivoting.
    BandedLu,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialGuess {
    /// Radial oracle of the inner sphere, renormalized along each ray.
    Radial,
    /// `(h(θ)/ρ)^{(n-p)/(p-1)}`.
    ConePower,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub p: f64,
    /// Regularization floor; `None` means `1e-6 / R_out`.
    pub eps_min: Option<f64>,
    pub max_outer: usize,
    /// Sup-norm relative update that ends the final stage.
    pub update_tol: f64,
    /// Update tolerance of the intermediate ε stages.
    pub stage_tol: f64,
    pub linear_tol: f64,
    pub max_halvings: usize,
    pub formulation: Formulation,
    pub linear_solver: LinearSolver,
    pub initial_guess: InitialGuess,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            p: 2.0,
            eps_min: None,
            max_outer: 200,
            update_tol: 1e-8,
            stage_tol: 1e-4,
            linear_tol: 1e-10,
            max_halvings: 30,
            formulation: Formulation::Auto,
            linear_solver: LinearSolver::Pcg,
            initial_guess: InitialGuess::Radial,
        }
    }
}

impl SolverConfig {
    pub fn with_p(p: f64) -> Self {
        Self { p, ..Self::default() }
    }

    /// Admissible exponents for grid solves, `[1.02, min(n - 0.05, 3.5)]`.
    pub fn p_range(n: usize) -> (f64, f64) {
        (1.02, (n as f64 - 0.05).min(3.5))
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        let (lo, hi) = Self::p_range(n);
        if !(self.p >= lo && self.p <= hi) {
            return Err(Error::InvalidArgument(format!(
                "grid solver accepts p in [{lo}, {hi}], got {}",
                self.p
            )));
        }
        let positive = |v: f64| v.is_finite() && v > 0.0;
        if let Some(e) = self.eps_min {
            if !positive(e) {
                return Err(Error::InvalidArgument(format!("eps_min must be positive, got {e}")));
            }
        }
        for (name, v) in [
            ("update_tol", self.update_tol),
            ("stage_tol", self.stage_tol),
            ("linear_tol", self.linear_tol),
        ] {
            if !positive(v) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if self.max_outer == 0 {
            return Err(Error::InvalidArgument("max_outer must be at least 1".into()));
        }
        Ok(())
    }

    pub fn resolved_formulation(&self) -> Formulation {
        match self.formulation {
            Formulation::Auto if self.p < AUTO_MOSER_BELOW => Formulation::Moser,
            Formulation::Auto => Formulation::Potential,
            f => f,
        }
    }

    /// ε schedule `max(ε_min, 0.1·4^{-k})`, ending at ε_min.
    pub fn eps_schedule(&self, outer_radius: f64) -> Vec<f64> {
        let floor = self.eps_min.unwrap_or(1e-6 / outer_radius);
        let mut v = Vec::new();
        let mut k = 0;
        loop {
            let e = (0.1 * 0.25f64.powi(k)).max(floor);
            v.push(e);
            if e == floor {
                return v;
            }
            k += 1;
        }
    }
}

/// Per-iteration history of a solve.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct ResidualStats {
    pub formulation: Option<Formulation>,
    /// Objective after each accepted outer iteration (regularized energy
    /// plus the outer Robin term).
    pub energies: Vec<f64>,
    /// Index into `energies` of the last iteration of each ε stage.
    pub stage_ends: Vec<usize>,
    pub stage_eps: Vec<f64>,
    /// Sup-norm relative updates.
    pub updates: Vec<f64>,
    /// Euclidean residual norms (Newton iterations only).
    pub residuals: Vec<f64>,
    pub linear_iterations: Vec<usize>,
    pub halvings: usize,
    pub final_update: f64,
    pub achieved_eps: f64,
    pub iterations: usize,
}

impl ResidualStats {
    /// Largest energy increase between consecutive iterations inside any
    /// ε stage, relative to the energy scale.
    pub fn max_stage_energy_increase(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let mut start = 0;
        for &end in &self.stage_ends {
            for k in start + 1..=end.min(self.energies.len().saturating_sub(1)) {
                let (a, b) = (self.energies[k - 1], self.energies[k]);
                worst = worst.max((b - a) / a.abs().max(1e-300));
            }
            start = end + 1;
        }
        worst
    }
}

/// Nodal field on a grid produced by a solve.
#[derive(Clone, Debug)]
pub struct DiscreteField {
    grid: Arc<Grid>,
    p: f64,
    formulation: Formulation,
    eps: f64,
    robin_rate: f64,
    u: Vec<f64>,
    log_u: Vec<f64>,
    log_gradient: OnceLock<Vec<[f64; 2]>>,
}

impl DiscreteField {
    /// Wraps nodal values of `u` (all positive) as a field of the potential
    /// formulation.
    pub fn from_values(grid: Arc<Grid>, p: f64, eps: f64, u: Vec<f64>) -> Result<Self> {
        if u.len() != grid.num_nodes() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values for {} nodes",
                u.len(),
                grid.num_nodes()
            )));
        }
        let log_u = u.iter().map(|v| v.ln()).collect();
        let robin_rate = robin_rate(&grid, p)?;
        Ok(Self {
            grid,
            p,
            formulation: Formulation::Potential,
            eps,
            robin_rate,
            u,
            log_u,
            log_gradient: OnceLock::new(),
        })
    }

    pub(crate) fn from_log(
        grid: Arc<Grid>,
        p: f64,
        eps: f64,
        formulation: Formulation,
        log_u: Vec<f64>,
    ) -> Result<Self> {
        let u = log_u.iter().map(|v| v.exp()).collect();
        let robin_rate = robin_rate(&grid, p)?;
        Ok(Self {
            grid,
            p,
            formulation,
            eps,
            robin_rate,
            u,
            log_u,
            log_gradient: OnceLock::new(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn grid_arc(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn formulation(&self) -> Formulation {
        self.formulation
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Decay rate `κ` of the outer Robin condition `∂_ρ u + κ u = 0`.
    pub fn robin_rate(&self) -> f64 {
        self.robin_rate
    }

    pub fn values(&self) -> &[f64] {
        &self.u
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log_u
    }

    /// Nodal gradient of `ln u` in the frame of [`discrete_gradient`].
    pub fn log_gradient(&self) -> &[[f64; 2]] {
        self.log_gradient
            .get_or_init(|| discrete_gradient(&self.grid, &self.log_u))
    }

    pub fn value(&self, i: usize, j: usize) -> f64 {
        self.u[self.grid.node(i, j)]
    }

    /// Flux `∫ |∇u|^{p-2} ∂_ν u` through the layer of cells between node
    /// rows `i` and `i + 1`, tested against the discrete indicator of the
    /// rows `≤ i`. At a converged solve it does not depend on `i`.
    pub fn layer_flux(&self, i: usize) -> Result<f64> {
        let g = &*self.grid;
        if i + 1 >= g.rows() {
            return Err(Error::InvalidSurface(format!("no cell layer above row {i}")));
        }
        let p = self.p;
        let e2 = self.eps * self.eps;
        let dx = g.xi()[i + 1] - g.xi()[i];
        let mut s = 0.0;
        for j in 0..g.cols() - 1 {
            let nodes = g.cell_nodes(i, j);
            for (q, qp) in g.cell_quad(i, j).iter().enumerate() {
                let gr = g.shape_gradients(i, j, q);
                match self.formulation {
                    Formulation::Moser => {
                        let w: [f64; 4] = nodes.map(|k| -(p - 1.0) * self.log_u[k]);
                        let (gx, gt) = grad(&w, &gr);
                        let gg = qform(&qp.k, gx, gt);
                        let wq = interp(&w, q);
                        let a = (gg + e2).powf(0.5 * (p - 2.0));
                        s += qp.weight * (-wq).exp() * a * (qp.k[0] * gx + qp.k[1] * gt) / dx;
                    }
                    _ => {
                        let v: [f64; 4] = nodes.map(|k| self.u[k]);
                        let (gx, gt) = grad(&v, &gr);
                        let a = (qform(&qp.k, gx, gt) + e2).powf(0.5 * (p - 2.0));
                        s -= qp.weight * a * (qp.k[0] * gx + qp.k[1] * gt) / dx;
                    }
                }
            }
        }
        Ok(match self.formulation {
            Formulation::Moser => (p - 1.0).powf(1.0 - p) * s,
            _ => s,
        })
    }

    /// Normalized capacity from the flux through cell layer `i`.
    pub fn layer_capacity(&self, i: usize) -> Result<f64> {
        Ok(capacity_from_flux(self.grid.dimension(), self.p, self.layer_flux(i)?))
    }

    /// Value at a computational point by bilinear interpolation.
    pub fn interpolate(&self, xi: f64, theta: f64) -> Result<f64> {
        let g = &*self.grid;
        let (i, s) = locate(g.xi(), xi).ok_or_else(|| Error::InvalidArgument(format!("xi = {xi} outside grid")))?;
        let (j, t) =
            locate(g.theta(), theta).ok_or_else(|| Error::InvalidArgument(format!("theta = {theta} outside grid")))?;
        let v = |a: usize, b: usize| self.log_u[g.node(a, b)];
        // interpolate ln u, which is smooth where u decays like a power
        let l =
            (1.0 - s) * ((1.0 - t) * v(i, j) + t * v(i, j + 1)) + s * ((1.0 - t) * v(i + 1, j) + t * v(i + 1, j + 1));
        Ok(l.exp())
    }
}

pub(crate) fn locate(x: &[f64], v: f64) -> Option<(usize, f64)> {
    let n = x.len();
    if !(v >= x[0] && v <= x[n - 1]) {
        return None;
    }
    let i = match x.binary_search_by(|a| a.total_cmp(&v)) {
        Ok(i) => i.min(n - 2),
        Err(i) => i - 1,
    };
    Some((i, (v - x[i]) / (x[i + 1] - x[i])))
}

#[inline]
pub(crate) fn grad(v: &[f64; 4], g: &[[f64; 2]; 4]) -> (f64, f64) {
    let mut gx = 0.0;
    let mut gt = 0.0;
    for a in 0..4 {
        gx += v[a] * g[a][0];
        gt += v[a] * g[a][1];
    }
    (gx, gt)
}

#[inline]
pub(crate) fn qform(k: &[f64; 3], gx: f64, gt: f64) -> f64 {
    k[0] * gx * gx + 2.0 * k[1] * gx * gt + k[2] * gt * gt
}

#[inline]
pub(crate) fn interp(v: &[f64; 4], q: usize) -> f64 {
    let s = Grid::shape_values(q);
    v[0] * s[0] + v[1] * s[1] + v[2] * s[2] + v[3] * s[3]
}

fn robin_rate(grid: &Grid, p: f64) -> Result<f64> {
    let end = grid.model().end(grid.end())?;
    decay_rate(&end.warp, grid.dimension(), p, grid.outer_radius())
}

/// Initial `ln u` at every node.
fn initial_log_u(model: &ManifoldModel, domain: &DomainSpec, grid: &Grid, cfg: &SolverConfig) -> Result<Vec<f64>> {
    let n = grid.dimension();
    let p = cfg.p;
    let k = (n as f64 - p) / (p - 1.0);
    let theta = grid.theta();
    let cols = grid.cols();
    let rho = grid.rho();
    let mut out = Vec::with_capacity(grid.num_nodes());
    match cfg.initial_guess {
        InitialGuess::ConePower => {
            for (idx, r) in rho.iter().enumerate() {
                let h = domain.h(theta[idx % cols]);
                out.push(-k * (r / h).ln().max(0.0));
            }
        }
        InitialGuess::Radial => {
            let sol = radial_potential(model, grid.end(), domain.min_radius(), p)?;
            let at_h: Vec<f64> = theta.iter().map(|&t| sol.log_u(domain.h(t))).collect::<Result<_>>()?;
            for (idx, &r) in rho.iter().enumerate() {
                let j = idx % cols;
                let v = if idx < cols {
                    0.0
                } else {
                    (sol.log_u(r)? - at_h[j]).min(0.0)
                };
                out.push(v);
            }
        }
    }
    Ok(out)
}

/// Solves for the p-capacitary potential of `domain` on `grid`.
pub fn solve_p_laplace(
    model: &ManifoldModel,
    domain: &DomainSpec,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
) -> Result<(DiscreteField, ResidualStats)> {
    solve_p_laplace_from(model, domain, grid, cfg, None)
}

/// [`solve_p_laplace`] starting from a supplied nodal `ln u` (for instance
/// the solution at a nearby exponent).
pub fn solve_p_laplace_from(
    model: &ManifoldModel,
    domain: &DomainSpec,
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    initial_log_u: Option<&[f64]>,
) -> Result<(DiscreteField, ResidualStats)> {
    if grid.domain() != domain || grid.model() != model {
        return Err(Error::InvalidGrid(
            "grid was not built for this model and domain".into(),
        ));
    }
    cfg.validate(model.dimension())?;
    let start = match initial_log_u {
        Some(v) if v.len() == grid.num_nodes() => v.to_vec(),
        Some(v) => {
            return Err(Error::InvalidArgument(format!(
                "initial guess has {} values for {} nodes",
                v.len(),
                grid.num_nodes()
            )))
        }
        None => self::initial_log_u(model, domain, grid, cfg)?,
    };
    match cfg.resolved_formulation() {
        Formulation::Moser => newton::solve(grid, cfg, start),
        _ => kacanov::solve(grid, cfg, start),
    }
}

/// Regularized energy `Σ ω (|∇v|²_g + ε²)^{p/2}` over the grid annulus.
pub fn energy_of(grid: &Grid, values: &[f64], p: f64, eps: f64) -> f64 {
    let e2 = eps * eps;
    let mut e = 0.0;
    for i in 0..grid.rows() - 1 {
        for j in 0..grid.cols() - 1 {
            let nodes = grid.cell_nodes(i, j);
            let v = nodes.map(|k| values[k]);
            for (q, qp) in grid.cell_quad(i, j).iter().enumerate() {
                let (gx, gt) = grad(&v, &grid.shape_gradients(i, j, q));
                e += qp.weight * (qform(&qp.k, gx, gt) + e2).powf(0.5 * p);
            }
        }
    }
    e
}

/// Nodal gradient in the orthonormal frame `(∂_ρ, F(ρ)^{-1} ∂_θ)`.
///
/// Second-order differences in `(ξ, θ)`, centered inside and one-sided on
/// the grid boundary, mapped to the physical frame by the chain rule.
pub fn discrete_gradient(grid: &Grid, values: &[f64]) -> Vec<[f64; 2]> {
    let xi = grid.xi();
    let th = grid.theta();
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut out = Vec::with_capacity(grid.num_nodes());
    for i in 0..rows {
        for j in 0..cols {
            let vx = diff3(xi, i, |a| values[grid.node(a, j)]);
            let vt = diff3(th, j, |b| values[grid.node(i, b)]);
            let (r, rx, rt) = grid.map(xi[i], th[j]);
            let v_rho = vx / rx;
            let v_theta = vt - rt * v_rho;
            out.push([v_rho, v_theta / grid.warp(r)]);
        }
    }
    out
}

/// Second-order derivative at node `k` of samples on a nonuniform mesh.
fn diff3(x: &[f64], k: usize, v: impl Fn(usize) -> f64) -> f64 {
    let n = x.len();
    let (a, b, c) = if k == 0 {
        (0, 1, 2)
    } else if k == n - 1 {
        (n - 3, n - 2, n - 1)
    } else {
        (k - 1, k, k + 1)
    };
    let (x0, x1, x2) = (x[a], x[b], x[c]);
    let t = x[k];
    // derivative of the Lagrange interpolant through three points
    let l0 = (2.0 * t - x1 - x2) / ((x0 - x1) * (x0 - x2));
    let l1 = (2.0 * t - x0 - x2) / ((x1 - x0) * (x1 - x2));
    let l2 = (2.0 * t - x0 - x1) / ((x2 - x0) * (x2 - x1));
    l0 * v(a) + l1 * v(b) + l2 * v(c)
}

/// Objective of the potential form: energy plus the outer Robin term.
pub(crate) fn objective(grid: &Grid, values: &[f64], p: f64, eps: f64, kappa: f64) -> f64 {
    let last = grid.rows() - 1;
    let kp = kappa.powf(p - 1.0);
    let boundary: f64 = grid
        .outer_weights()
        .iter()
        .enumerate()
        .map(|(j, w)| w * kp * values[grid.node(last, j)].abs().powf(p))
        .sum();
    energy_of(grid, values, p, eps) + boundary
}
