//! Oriented marching squares on the `(ξ, θ)` grid and the induced measures
//! of the resulting surfaces of revolution.

use std::collections::{HashMap, HashSet};

use serde::Serialize;

use crate::error::Result;
use crate::geometry::{unit_sphere_area, Grid};
use crate::quadrature::{gauss_legendre_unit, integrate_default};

/// One connected piece of a level set, as a polyline in the meridian
/// half-plane. The full hypersurface is its rotation about the axis.
#[derive(Clone, Debug, Serialize)]
pub struct LevelCurve {
    /// Crossing points `(ρ, θ)`.
    pub points: Vec<[f64; 2]>,
    /// Induced hypersurface measure of each segment.
    pub segment_measures: Vec<f64>,
    /// Runs from the axis `θ = 0` to the axis `θ = π`, so it encloses `Ω`.
    pub encloses: bool,
    pub closed: bool,
}

/// Polyline in computational coordinates; segment `k` lies in `cells[k]`.
pub(crate) struct Chain {
    pub pts: Vec<[f64; 2]>,
    pub cells: Vec<(usize, usize)>,
    pub closed: bool,
    pub axes: (Option<usize>, Option<usize>),
}

struct Segment {
    from: usize,
    to: usize,
    cell: (usize, usize),
}

/// Edge ids: `2 node(i,j)` for the ξ-edge to `(i+1, j)`, `2 node(i,j) + 1`
/// for the θ-edge to `(i, j+1)`.
fn edge_point(grid: &Grid, values: &[f64], level: f64, id: usize) -> [f64; 2] {
    let node = id / 2;
    let (i, j) = (node / grid.cols(), node % grid.cols());
    let (a, b, (i2, j2)) = if id.is_multiple_of(2) {
        (node, grid.node(i + 1, j), (i + 1, j))
    } else {
        (node, grid.node(i, j + 1), (i, j + 1))
    };
    let f = ((level - values[a]) / (values[b] - values[a])).clamp(0.0, 1.0);
    let (xi, th) = (grid.xi(), grid.theta());
    // geometric placement along ξ keeps power laws exact
    [xi[i] * (xi[i2] / xi[i]).powf(f), th[j] + f * (th[j2] - th[j])]
}

fn edge_axis(grid: &Grid, id: usize) -> Option<usize> {
    if id % 2 == 1 {
        return None;
    }
    let j = (id / 2) % grid.cols();
    if j == 0 {
        Some(0)
    } else if j == grid.cols() - 1 {
        Some(1)
    } else {
        None
    }
}

/// Traces `{values = level}` with the region `values > level` kept on the
/// left of every chain.
pub(crate) fn march(grid: &Grid, values: &[f64], level: f64) -> Vec<Chain> {
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut segs = Vec::new();
    // corners in cycle order and their local (s, t) positions
    const LOCAL: [[f64; 2]; 4] = [[0.0, 0.0], [0.0, 1.0], [1.0, 1.0], [1.0, 0.0]];
    for i in 0..rows - 1 {
        for j in 0..cols - 1 {
            let c = [
                grid.node(i, j),
                grid.node(i, j + 1),
                grid.node(i + 1, j + 1),
                grid.node(i + 1, j),
            ];
            let above = c.map(|k| values[k] > level);
            let edges = [2 * c[0] + 1, 2 * c[1], 2 * c[3] + 1, 2 * c[0]];
            let crossing: Vec<usize> = (0..4).filter(|&k| above[k] != above[(k + 1) % 4]).collect();
            let local_point = |k: usize| {
                let (a, b) = (k, (k + 1) % 4);
                let f = ((level - values[c[a]]) / (values[c[b]] - values[c[a]])).clamp(0.0, 1.0);
                [
                    LOCAL[a][0] + f * (LOCAL[b][0] - LOCAL[a][0]),
                    LOCAL[a][1] + f * (LOCAL[b][1] - LOCAL[a][1]),
                ]
            };
            let mut push = |ea: usize, eb: usize, reference: usize| {
                let (p, q, r) = (local_point(ea), local_point(eb), LOCAL[reference]);
                let cross = (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
                let (from, to) = if (cross > 0.0) == above[reference] {
                    (ea, eb)
                } else {
                    (eb, ea)
                };
                segs.push(Segment {
                    from: edges[from],
                    to: edges[to],
                    cell: (i, j),
                });
            };
            match crossing.len() {
                2 => {
                    let (a, b) = (crossing[0], crossing[1]);
                    // adjacent edges isolate their shared corner; opposite
                    // edges split the cell and any corner decides
                    let reference = if b == a + 1 { b } else { 0 };
                    push(a, b, reference);
                }
                4 => {
                    let center = c.iter().map(|&k| values[k]).sum::<f64>() / 4.0;
                    let center_above = center > level;
                    for k in 0..4 {
                        if above[k] != center_above {
                            push((k + 3) % 4, k, k);
                        }
                    }
                }
                _ => {}
            }
        }
    }

    let starts: HashMap<usize, usize> = segs.iter().enumerate().map(|(k, s)| (s.from, k)).collect();
    let ends: HashSet<usize> = segs.iter().map(|s| s.to).collect();
    let mut used = vec![false; segs.len()];
    let mut chains = Vec::new();
    let trace = |first: usize, used: &mut Vec<bool>| {
        let mut pts = vec![edge_point(grid, values, level, segs[first].from)];
        let mut cells = Vec::new();
        let mut k = first;
        let mut closed = false;
        loop {
            used[k] = true;
            pts.push(edge_point(grid, values, level, segs[k].to));
            cells.push(segs[k].cell);
            match starts.get(&segs[k].to) {
                Some(&next) if next == first => {
                    closed = true;
                    break;
                }
                Some(&next) if !used[next] => k = next,
                _ => break,
            }
        }
        let axes = if closed {
            (None, None)
        } else {
            (edge_axis(grid, segs[first].from), edge_axis(grid, segs[k].to))
        };
        Chain {
            pts,
            cells,
            closed,
            axes,
        }
    };
    for k in 0..segs.len() {
        if !used[k] && !ends.contains(&segs[k].from) {
            chains.push(trace(k, &mut used));
        }
    }
    for k in 0..segs.len() {
        if !used[k] {
            chains.push(trace(k, &mut used));
        }
    }
    chains
}

/// `∫_{floor}^{ρ} F^{n-1}`, the volume of `{ρ' ≤ ρ}` per unit round-sphere
/// measure.
pub(crate) struct VolumeDensity<'g> {
    grid: &'g Grid,
    floor: f64,
}

impl<'g> VolumeDensity<'g> {
    pub fn new(grid: &'g Grid) -> Self {
        Self {
            grid,
            floor: grid.model().radial_floor(),
        }
    }

    pub fn at(&self, rho: f64) -> Result<f64> {
        let e = self.grid.dimension() as i32 - 1;
        integrate_default(|s| self.grid.warp(s).powi(e), self.floor, rho)
    }
}

/// Gradient data used to integrate `|∇u|^{p-1}` over the curve.
pub(crate) struct FluxSpec<'a> {
    /// Nodal gradient of `ln u`.
    pub log_gradient: &'a [[f64; 2]],
    pub p: f64,
    /// Value of `u` on the curve.
    pub u: f64,
}

pub(crate) struct Measured {
    pub curves: Vec<LevelCurve>,
    pub area: f64,
    pub volume: f64,
    pub flux: Option<f64>,
    pub min_gradient: Option<f64>,
    pub r_min: f64,
    pub r_max: f64,
}

fn bilinear(grid: &Grid, data: &[[f64; 2]], cell: (usize, usize), x: [f64; 2]) -> [f64; 2] {
    let (i, j) = cell;
    let (xi, th) = (grid.xi(), grid.theta());
    let s = ((x[0] - xi[i]) / (xi[i + 1] - xi[i])).clamp(0.0, 1.0);
    let t = ((x[1] - th[j]) / (th[j + 1] - th[j])).clamp(0.0, 1.0);
    let d = |a: usize, b: usize| data[grid.node(a, b)];
    let mut out = [0.0; 2];
    for (c, o) in out.iter_mut().enumerate() {
        *o = (1.0 - s) * ((1.0 - t) * d(i, j)[c] + t * d(i, j + 1)[c])
            + s * ((1.0 - t) * d(i + 1, j)[c] + t * d(i + 1, j + 1)[c]);
    }
    out
}

/// Area, enclosed volume (Green's theorem in the meridian plane) and
/// optionally the flux of each chain.
pub(crate) fn measure(grid: &Grid, chains: &[Chain], flux: Option<&FluxSpec>) -> Result<Measured> {
    let n = grid.dimension();
    let s_nm2 = unit_sphere_area(n - 2);
    let (gx, gw) = gauss_legendre_unit(3);
    let vol = VolumeDensity::new(grid);
    let mut out = Measured {
        curves: Vec::with_capacity(chains.len()),
        area: 0.0,
        volume: 0.0,
        flux: flux.map(|_| 0.0),
        min_gradient: flux.map(|_| f64::INFINITY),
        r_min: f64::INFINITY,
        r_max: 0.0,
    };
    for ch in chains {
        let mut points = Vec::with_capacity(ch.pts.len());
        for x in &ch.pts {
            let r = grid.map(x[0], x[1]).0;
            out.r_min = out.r_min.min(r);
            out.r_max = out.r_max.max(r);
            points.push([r, x[1]]);
        }
        let mut measures = Vec::with_capacity(ch.cells.len());
        for (k, &cell) in ch.cells.iter().enumerate() {
            let (a, b) = (ch.pts[k], ch.pts[k + 1]);
            let d = [b[0] - a[0], b[1] - a[1]];
            let mut m = 0.0;
            for (&x, &w) in gx.iter().zip(gw) {
                let pt = [a[0] + x * d[0], a[1] + x * d[1]];
                let (r, rx, rt) = grid.map(pt[0], pt[1]);
                let f = grid.warp(r);
                let dr = rx * d[0] + rt * d[1];
                let ang = s_nm2 * pt[1].sin().powi(n as i32 - 2);
                let da = w * (dr * dr + f * f * d[1] * d[1]).sqrt() * (f.powi(n as i32 - 2) * ang);
                m += da;
                out.volume += w * vol.at(r)? * ang * d[1];
                if let Some(spec) = flux {
                    let g = bilinear(grid, spec.log_gradient, cell, pt);
                    let grad = spec.u * (g[0] * g[0] + g[1] * g[1]).sqrt();
                    *out.flux.as_mut().expect("flux requested") += da * grad.powf(spec.p - 1.0);
                    let mg = out.min_gradient.as_mut().expect("flux requested");
                    *mg = mg.min(grad);
                }
            }
            measures.push(m);
            out.area += m;
        }
        out.curves.push(LevelCurve {
            points,
            segment_measures: measures,
            encloses: matches!(ch.axes, (Some(a), Some(b)) if a != b),
            closed: ch.closed,
        });
    }
    Ok(out)
}

/// The inner boundary row as a chain.
pub(crate) fn boundary_chain(grid: &Grid) -> Chain {
    let xi0 = grid.xi()[0];
    Chain {
        pts: grid.theta().iter().map(|&t| [xi0, t]).collect(),
        cells: (0..grid.cols() - 1).map(|j| (0, j)).collect(),
        closed: false,
        axes: (Some(0), Some(1)),
    }
}
