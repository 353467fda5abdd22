//! Damped Newton iteration for the Moser form
//! `div(e^{-w} (|∇w|² + ε²)^{(p-2)/2} ∇w) = 0`, `w = -(p-1) ln u`.
//!
//! The outer Robin condition `∂_ρ u = -κ u` becomes the natural flux
//! condition `e^{-w} |∇w|^{p-2} ∂_ρ w = ((p-1)κ)^{p-1} e^{-w}`.

use std::sync::Arc;

use super::{grad, interp, objective, qform, DiscreteField, Formulation, ResidualStats, SolverConfig};
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::linalg::{norm, Banded};

struct System<'a> {
    g: &'a Grid,
    p: f64,
    e2: f64,
    /// `((p-1)κ)^{p-1}`
    c_out: f64,
}

impl System<'_> {
    /// Residual over free nodes; fills the Jacobian when given one.
    fn assemble(&self, w: &[f64], res: &mut [f64], mut jac: Option<&mut Banded>) {
        let g = self.g;
        let p = self.p;
        let (rows, cols) = (g.rows(), g.cols());
        res.iter_mut().for_each(|v| *v = 0.0);
        if let Some(j) = jac.as_deref_mut() {
            j.clear();
        }
        for i in 0..rows - 1 {
            for jj in 0..cols - 1 {
                let nodes = g.cell_nodes(i, jj);
                let wv = nodes.map(|k| w[k]);
                for (q, qp) in g.cell_quad(i, jj).iter().enumerate() {
                    let gr = g.shape_gradients(i, jj, q);
                    let phi = Grid::shape_values(q);
                    let (gx, gt) = grad(&wv, &gr);
                    let s = qform(&qp.k, gx, gt) + self.e2;
                    let a = s.powf(0.5 * (p - 2.0));
                    let da = (p - 2.0) * s.powf(0.5 * (p - 4.0));
                    let ew = qp.weight * (-interp(&wv, q)).exp();
                    let k = &qp.k;
                    let kw = [k[0] * gx + k[1] * gt, k[1] * gx + k[2] * gt];
                    for ia in 0..4 {
                        if nodes[ia] < cols {
                            continue;
                        }
                        let ra = nodes[ia] - cols;
                        let flux_a = gr[ia][0] * kw[0] + gr[ia][1] * kw[1];
                        res[ra] += ew * a * flux_a;
                        if let Some(jm) = jac.as_deref_mut() {
                            let kga = [k[0] * gr[ia][0] + k[1] * gr[ia][1], k[1] * gr[ia][0] + k[2] * gr[ia][1]];
                            for ib in 0..4 {
                                if nodes[ib] < cols {
                                    continue;
                                }
                                let t1 = kga[0] * gr[ib][0] + kga[1] * gr[ib][1];
                                let wb = kw[0] * gr[ib][0] + kw[1] * gr[ib][1];
                                let v = ew * (-phi[ib] * a * flux_a + a * t1 + da * wb * flux_a);
                                jm.add(ra, nodes[ib] - cols, v);
                            }
                        }
                    }
                }
            }
        }
        let last = rows - 1;
        for (j, wt) in g.outer_weights().iter().enumerate() {
            let node = g.node(last, j);
            let b = wt * self.c_out * (-w[node]).exp();
            res[node - cols] -= b;
            if let Some(jm) = jac.as_deref_mut() {
                jm.add(node - cols, node - cols, b);
            }
        }
    }
}

pub(super) fn solve(
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    start_log: Vec<f64>,
) -> Result<(DiscreteField, ResidualStats)> {
    let p = cfg.p;
    let mut w0: Vec<f64> = start_log.iter().map(|l| -(p - 1.0) * l).collect();
    let cols = grid.cols();
    for v in &mut w0[..cols] {
        *v = 0.0;
    }
    let schedule = cfg.eps_schedule(grid.outer_radius());
    let floor = *schedule.last().expect("non-empty schedule");
    // the gradient of w stays away from zero, so go straight to the floor
    // and fall back to continuation only when that stalls
    let (w, stats) = match run(grid, cfg, w0.clone(), &[floor]) {
        Ok(ok) => ok,
        Err(Error::SolverStall { .. }) => run(grid, cfg, w0, &schedule)?,
        Err(e) => return Err(e),
    };
    let log_u: Vec<f64> = w.iter().map(|v| -v / (p - 1.0)).collect();
    let field = DiscreteField::from_log(grid.clone(), p, stats.achieved_eps, Formulation::Moser, log_u)?;
    Ok((field, stats))
}

fn run(grid: &Arc<Grid>, cfg: &SolverConfig, mut w: Vec<f64>, stages: &[f64]) -> Result<(Vec<f64>, ResidualStats)> {
    let g = &**grid;
    let p = cfg.p;
    let cols = g.cols();
    let kappa = super::robin_rate(g, p)?;
    let ndof = w.len() - cols;
    let mut jac = Banded::new(ndof, cols + 1, cols + 1);
    let mut res = vec![0.0; ndof];
    let mut trial_res = vec![0.0; ndof];
    let mut trial = w.clone();
    let mut stats = ResidualStats {
        formulation: Some(Formulation::Moser),
        ..Default::default()
    };
    let u_of = |w: &[f64]| -> Vec<f64> { w.iter().map(|v| (-v / (p - 1.0)).exp()).collect() };

    for (stage, &eps) in stages.iter().enumerate() {
        let final_stage = stage + 1 == stages.len();
        let tol = if final_stage { cfg.update_tol } else { cfg.stage_tol };
        let sys = System {
            g,
            p,
            e2: eps * eps,
            c_out: ((p - 1.0) * kappa).powf(p - 1.0),
        };
        loop {
            if stats.iterations >= cfg.max_outer {
                stats.achieved_eps = eps;
                return Err(Error::SolverStall {
                    reason: format!("Newton iteration did not converge within {} steps", cfg.max_outer),
                    stats: Box::new(stats),
                });
            }
            sys.assemble(&w, &mut res, Some(&mut jac));
            let r0 = norm(&res);
            jac.factor()?;
            let mut step: Vec<f64> = res.iter().map(|v| -v).collect();
            jac.solve_in_place(&mut step)?;
            stats.linear_iterations.push(1);

            let mut lambda = 1.0;
            let mut halvings = 0;
            let r1 = loop {
                for k in 0..ndof {
                    trial[k + cols] = w[k + cols] + lambda * step[k];
                }
                sys.assemble(&trial, &mut trial_res, None);
                let r1 = norm(&trial_res);
                if r1.is_finite() && (r1 <= (1.0 - 1e-4 * lambda) * r0 || r0 < 1e-300) {
                    break r1;
                }
                // at round-off level the residual can no longer decrease
                if r1.is_finite() && r1 <= r0 * (1.0 + 1e-6) && lambda == 1.0 && step_small(&step, &w, cfg.update_tol) {
                    break r1;
                }
                halvings += 1;
                stats.halvings += 1;
                if halvings > cfg.max_halvings {
                    stats.achieved_eps = eps;
                    return Err(Error::SolverStall {
                        reason: format!("residual did not decrease after {} step halvings", cfg.max_halvings),
                        stats: Box::new(stats),
                    });
                }
                lambda *= 0.5;
            };
            let scale = w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            let upd = lambda * step.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale;
            std::mem::swap(&mut w, &mut trial);
            trial.copy_from_slice(&w);
            stats.residuals.push(r1);
            stats.energies.push(objective(g, &u_of(&w), p, eps, kappa));
            stats.updates.push(upd);
            stats.iterations += 1;
            stats.final_update = upd;
            if upd < tol && lambda == 1.0 {
                break;
            }
        }
        stats.stage_ends.push(stats.energies.len() - 1);
        stats.stage_eps.push(eps);
        stats.achieved_eps = eps;
    }
    Ok((w, stats))
}

fn step_small(step: &[f64], w: &[f64], tol: f64) -> bool {
    let scale = w.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    step.iter().fold(0.0f64, |m, v| m.max(v.abs())) / scale < tol
}
