//! Lagged-diffusivity (Kačanov) iteration for the potential form.

use std::sync::Arc;

use super::{grad, objective, qform, DiscreteField, Formulation, LinearSolver, ResidualStats, SolverConfig};
use crate::error::{Error, Result};
use crate::geometry::Grid;
use crate::linalg::{pcg, Banded, Csr};

/// CSR pattern over the free nodes (every row but the inner boundary) with
/// the per-cell scatter map.
struct Pattern {
    csr: Csr,
    cell_pos: Vec<[[Option<usize>; 4]; 4]>,
}

impl Pattern {
    fn new(grid: &Grid) -> Self {
        let (rows, cols) = (grid.rows(), grid.cols());
        let ndof = (rows - 1) * cols;
        let mut pat = Vec::with_capacity(ndof);
        for i in 1..rows {
            for j in 0..cols {
                let mut r = Vec::with_capacity(9);
                for a in i.saturating_sub(1).max(1)..=(i + 1).min(rows - 1) {
                    for b in j.saturating_sub(1)..=(j + 1).min(cols - 1) {
                        r.push(grid.node(a, b) - cols);
                    }
                }
                pat.push(r);
            }
        }
        let csr = Csr::from_pattern(pat);
        let mut cell_pos = Vec::with_capacity((rows - 1) * (cols - 1));
        for i in 0..rows - 1 {
            for j in 0..cols - 1 {
                let nodes = grid.cell_nodes(i, j);
                let mut m = [[None; 4]; 4];
                for a in 0..4 {
                    for b in 0..4 {
                        if nodes[a] >= cols && nodes[b] >= cols {
                            m[a][b] = csr.position(nodes[a] - cols, nodes[b] - cols);
                        }
                    }
                }
                cell_pos.push(m);
            }
        }
        Self { csr, cell_pos }
    }
}

pub(super) fn solve(
    grid: &Arc<Grid>,
    cfg: &SolverConfig,
    start_log: Vec<f64>,
) -> Result<(DiscreteField, ResidualStats)> {
    let g = &**grid;
    let p = cfg.p;
    let (rows, cols) = (g.rows(), g.cols());
    let kappa = super::robin_rate(g, p)?;
    let mut u: Vec<f64> = start_log.iter().map(|l| l.exp()).collect();
    for v in &mut u[..cols] {
        *v = 1.0;
    }
    let mut pat = Pattern::new(g);
    let ndof = pat.csr.dim();
    let mut rhs = vec![0.0; ndof];
    let mut stats = ResidualStats {
        formulation: Some(Formulation::Potential),
        ..Default::default()
    };
    let schedule = cfg.eps_schedule(g.outer_radius());
    let kp = kappa.powf(p - 1.0);
    let last = rows - 1;

    for (stage, &eps) in schedule.iter().enumerate() {
        let final_stage = stage + 1 == schedule.len();
        let tol = if final_stage { cfg.update_tol } else { cfg.stage_tol };
        let e2 = eps * eps;
        let mut e_cur = objective(g, &u, p, eps, kappa);
        loop {
            if stats.iterations >= cfg.max_outer {
                stats.achieved_eps = eps;
                return Err(Error::SolverStall {
                    reason: format!("update above tolerance at the iteration cap {}", cfg.max_outer),
                    stats: Box::new(stats),
                });
            }
            // freeze the diffusivity and assemble the linear problem
            pat.csr.clear();
            rhs.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..rows - 1 {
                for j in 0..cols - 1 {
                    let nodes = g.cell_nodes(i, j);
                    let v = nodes.map(|k| u[k]);
                    let pos = &pat.cell_pos[i * (cols - 1) + j];
                    for (q, qp) in g.cell_quad(i, j).iter().enumerate() {
                        let gr = g.shape_gradients(i, j, q);
                        let (gx, gt) = grad(&v, &gr);
                        let c = qp.weight * (qform(&qp.k, gx, gt) + e2).powf(0.5 * (p - 2.0));
                        let k = &qp.k;
                        for a in 0..4 {
                            if nodes[a] < cols {
                                continue;
                            }
                            let ka = [k[0] * gr[a][0] + k[1] * gr[a][1], k[1] * gr[a][0] + k[2] * gr[a][1]];
                            for b in 0..4 {
                                let m = c * (ka[0] * gr[b][0] + ka[1] * gr[b][1]);
                                match pos[a][b] {
                                    Some(at) => pat.csr.add_at(at, m),
                                    // inner boundary node, u = 1
                                    None => rhs[nodes[a] - cols] -= m,
                                }
                            }
                        }
                    }
                }
            }
            for (j, w) in g.outer_weights().iter().enumerate() {
                let node = g.node(last, j);
                let beta = w * kp * u[node].abs().max(1e-300).powf(p - 2.0);
                pat.csr.add_diagonal(node - cols, beta);
            }

            let mut x: Vec<f64> = u[cols..].to_vec();
            let iters = match cfg.linear_solver {
                LinearSolver::Pcg => pcg(&pat.csr, &rhs, &mut x, cfg.linear_tol, 20 * ndof)?.iterations,
                LinearSolver::BandedLu => {
                    let mut b = Banded::new(ndof, cols + 1, cols + 1);
                    for r in 0..ndof {
                        for (c, v) in pat.csr.row(r) {
                            b.add(r, c, v);
                        }
                    }
                    b.factor()?;
                    x.copy_from_slice(&rhs);
                    b.solve_in_place(&mut x)?;
                    0
                }
            };
            stats.linear_iterations.push(iters);

            // damped update: halve while the objective increases
            let slack = 1e-12 * e_cur.abs().max(1e-300);
            let mut lambda = 1.0;
            let mut cand = u.clone();
            let mut halvings = 0;
            let e_new = loop {
                for k in cols..u.len() {
                    cand[k] = u[k] + lambda * (x[k - cols] - u[k]);
                }
                let e = objective(g, &cand, p, eps, kappa);
                if e <= e_cur + slack {
                    break e;
                }
                halvings += 1;
                stats.halvings += 1;
                if halvings > cfg.max_halvings {
                    stats.achieved_eps = eps;
                    return Err(Error::SolverStall {
                        reason: format!("energy did not decrease after {} step halvings", cfg.max_halvings),
                        stats: Box::new(stats),
                    });
                }
                lambda *= 0.5;
            };
            let scale = cand.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let upd = cand.iter().zip(&u).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale.max(1e-300);
            u = cand;
            e_cur = e_new;
            stats.energies.push(e_new);
            stats.updates.push(upd);
            stats.iterations += 1;
            stats.final_update = upd;
            if upd < tol {
                break;
            }
        }
        stats.stage_ends.push(stats.energies.len() - 1);
        stats.stage_eps.push(eps);
        stats.achieved_eps = eps;
    }

    if let Some(bad) = u.iter().find(|v| !(**v > 0.0)) {
        return Err(Error::Internal(format!("potential lost positivity (value {bad})")));
    }
    let field = DiscreteField::from_values(grid.clone(), p, stats.achieved_eps, u)?;
    Ok((field, stats))
}
