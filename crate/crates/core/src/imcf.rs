//! Weak inverse mean curvature flow as the limit `p → 1` of
//! `w_p = -(p-1) ln u_p`, hull areas from the capacity limit, and the
//! checks on the resulting `w`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use crate::asymptotics::{richardson_extrapolate, BoundRow};
use crate::capacity::{march, measure, relative_spread};
use crate::error::{Error, Result};
use crate::geometry::{unit_sphere_area, DomainSpec, EndId, Grid, GridSpec, ManifoldModel};
use crate::radial::{
    linear_to_zero, quadratic_to_zero, radial_capacity, radial_potential, RadialImcf, IMCF_CALIBRATION_FACTOR,
};
use crate::solver::{discrete_gradient, solve_p_laplace_from, DiscreteField, ResidualStats, SolverConfig};

/// Relative extrapolation spread, against the field scale at the
/// calibration radius, beyond which the limit is rejected.
pub const EXTRAPOLATION_TOLERANCE: f64 = 1e-2;

/// `w_p = -(p-1) ln u_p` at every node; zero on `∂Ω`.
pub fn moser_transform(field: &DiscreteField) -> Result<Vec<f64>> {
    let p = field.p();
    if let Some(bad) = field.values().iter().find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "potential has a nonpositive value {bad}"
        )));
    }
    let cols = field.grid().cols();
    Ok(field
        .log_values()
        .iter()
        .enumerate()
        .map(|(k, l)| if k < cols { 0.0 } else { -(p - 1.0) * l })
        .collect())
}

/// Extrapolated `w` on a grid.
#[derive(Clone, Debug)]
pub struct ImcfField {
    grid: Arc<Grid>,
    ladder: Vec<f64>,
    w: Vec<f64>,
    spread: Vec<f64>,
    calibration_radius: f64,
    calibration_spread: f64,
    calibration_scale: f64,
}

impl ImcfField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn ladder(&self) -> &[f64] {
        &self.ladder
    }

    pub fn values(&self) -> &[f64] {
        &self.w
    }

    /// Nodewise `|3-point − 2-point|` extrapolation difference.
    pub fn spread(&self) -> &[f64] {
        &self.spread
    }

    pub fn calibration(&self) -> (f64, f64, f64) {
        (self.calibration_radius, self.calibration_spread, self.calibration_scale)
    }
}

/// Node row of the sphere at `IMCF_CALIBRATION_FACTOR` times the largest
/// boundary radius, kept inside the grid.
fn calibration_row(grid: &Grid) -> usize {
    let target = IMCF_CALIBRATION_FACTOR * grid.domain().max_radius();
    let first = grid.first_sphere_row().min(grid.rows() - 1);
    (first..grid.rows())
        .find(|&i| grid.xi()[i] >= target)
        .unwrap_or(grid.rows() - 1)
}

/// Nodewise linear extrapolation in `p - 1` from the two smallest `p`.
pub fn p_to_one_extrapolate(fields: &[DiscreteField]) -> Result<ImcfField> {
    if fields.len() < 3 {
        return Err(Error::InvalidArgument(format!(
            "the p ladder needs at least 3 entries, got {}",
            fields.len()
        )));
    }
    let grid = fields[0].grid_arc().clone();
    if fields.iter().any(|f| !Arc::ptr_eq(f.grid_arc(), &grid)) {
        return Err(Error::InvalidArgument("ladder fields live on different grids".into()));
    }
    let mut order: Vec<usize> = (0..fields.len()).collect();
    order.sort_by(|&a, &b| fields[b].p().total_cmp(&fields[a].p()));
    let ladder: Vec<f64> = order.iter().map(|&k| fields[k].p()).collect();
    if ladder.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::InvalidArgument("repeated exponent in the p ladder".into()));
    }
    let ws = order
        .iter()
        .map(|&k| moser_transform(&fields[k]))
        .collect::<Result<Vec<_>>>()?;
    let x: Vec<f64> = ladder.iter().map(|p| p - 1.0).collect();
    let mut w = Vec::with_capacity(grid.num_nodes());
    let mut spread = Vec::with_capacity(grid.num_nodes());
    let mut y = vec![0.0; ws.len()];
    for k in 0..grid.num_nodes() {
        for (slot, wp) in y.iter_mut().zip(&ws) {
            *slot = wp[k];
        }
        let lin = linear_to_zero(&x, &y);
        w.push(lin);
        spread.push((quadratic_to_zero(&x, &y) - lin).abs());
    }
    let row = calibration_row(&grid);
    let nodes = grid.node(row, 0)..grid.node(row, grid.cols() - 1) + 1;
    let cal_spread = spread[nodes.clone()].iter().fold(0.0f64, |m, v| m.max(*v));
    let cal_scale = w[nodes].iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if cal_spread > EXTRAPOLATION_TOLERANCE * cal_scale {
        return Err(Error::ExtrapolationUnreliable(format!(
            "spread {cal_spread:e} at rho = {} exceeds {EXTRAPOLATION_TOLERANCE} x field scale {cal_scale}",
            grid.xi()[row]
        )));
    }
    Ok(ImcfField {
        calibration_radius: grid.xi()[row],
        calibration_spread: cal_spread,
        calibration_scale: cal_scale,
        grid,
        ladder,
        w,
        spread,
    })
}

/// Solves the ladder from the largest `p` down, starting each solve from
/// the previous one with `ln u` rescaled by the ratio of decay exponents.
pub fn solve_moser_ladder(
    model: &ManifoldModel,
    domain: &DomainSpec,
    grid: &Arc<Grid>,
    base: &SolverConfig,
    ladder: &[f64],
) -> Result<Vec<(DiscreteField, ResidualStats)>> {
    let n = model.dimension() as f64;
    let mut ps = ladder.to_vec();
    ps.sort_by(|a, b| b.total_cmp(a));
    let mut out: Vec<(DiscreteField, ResidualStats)> = Vec::with_capacity(ps.len());
    for p in ps {
        let cfg = SolverConfig { p, ..base.clone() };
        let start = out.last().map(|(prev, _)| {
            let q = prev.p();
            let s = ((n - p) / (p - 1.0)) / ((n - q) / (q - 1.0));
            prev.log_values().iter().map(|l| l * s).collect::<Vec<_>>()
        });
        out.push(solve_p_laplace_from(model, domain, grid, &cfg, start.as_deref())?);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct HullArea {
    pub end: EndId,
    /// `(p, C_p^{(i)})`, `p` decreasing.
    pub ladder: Vec<(f64, f64)>,
    /// Linear extrapolation of `C_p^{(i)}` to `p = 1`.
    pub capacity_limit: f64,
    /// `|quadratic − linear|` extrapolation difference.
    pub spread: f64,
    /// `|S^{n-1}|` times the capacity limit.
    pub area: f64,
    /// Whether the capacities move monotonically along the ladder.
    pub monotone: bool,
}

/// Hull area from per-end capacities along a p ladder.
pub fn hull_area_from_capacities(end: EndId, n: usize, ladder: &[(f64, f64)]) -> Result<HullArea> {
    if ladder.len() < 3 {
        return Err(Error::InvalidArgument("the p ladder needs at least 3 entries".into()));
    }
    let mut l = ladder.to_vec();
    l.sort_by(|a, b| b.0.total_cmp(&a.0));
    let x: Vec<f64> = l.iter().map(|e| e.0 - 1.0).collect();
    let y: Vec<f64> = l.iter().map(|e| e.1).collect();
    let lin = linear_to_zero(&x, &y);
    let tol = 1e-9 * lin.abs();
    let up = y.windows(2).all(|w| w[1] >= w[0] - tol);
    let down = y.windows(2).all(|w| w[1] <= w[0] + tol);
    Ok(HullArea {
        end,
        capacity_limit: lin,
        spread: (quadratic_to_zero(&x, &y) - lin).abs(),
        area: unit_sphere_area(n - 1) * lin,
        monotone: up || down,
        ladder: l,
    })
}

/// `(p, C_p)` of ladder fields from the layer flux at the first sphere row.
pub fn ladder_capacities(fields: &[DiscreteField]) -> Result<Vec<(f64, f64)>> {
    fields
        .iter()
        .map(|f| {
            let g = f.grid();
            Ok((f.p(), f.layer_capacity(g.first_sphere_row().min(g.rows() - 2))?))
        })
        .collect()
}

/// Hull area of `domain` on one end. Without a grid the domain must be a
/// coordinate ball and the radial oracle supplies the capacities.
pub fn hull_area_estimate(
    model: &ManifoldModel,
    domain: &DomainSpec,
    end: EndId,
    ladder: &[f64],
    grid: Option<(&GridSpec, &SolverConfig)>,
) -> Result<HullArea> {
    let n = model.dimension();
    let caps: Vec<(f64, f64)> = match (grid, domain) {
        (None, DomainSpec::Coordinate { radius }) => ladder
            .par_iter()
            .map(|&p| Ok((p, radial_capacity(&radial_potential(model, end, *radius, p)?))))
            .collect::<Result<_>>()?,
        (None, _) => {
            return Err(Error::InvalidArgument(
                "a non-coordinate domain needs a grid for the hull area".into(),
            ))
        }
        (Some((spec, cfg)), _) => {
            let g = Arc::new(crate::geometry::build_grid(model, end, domain, spec)?);
            let fields: Vec<DiscreteField> = solve_moser_ladder(model, domain, &g, cfg, ladder)?
                .into_iter()
                .map(|x| x.0)
                .collect();
            ladder_capacities(&fields)?
        }
    };
    hull_area_from_capacities(end, n, &caps)
}

/// `w` from either source, for the checks below.
#[derive(Clone, Copy, Debug)]
pub enum Imcf<'a> {
    Radial(&'a RadialImcf),
    Field(&'a ImcfField),
}

impl<'a> From<&'a RadialImcf> for Imcf<'a> {
    fn from(w: &'a RadialImcf) -> Self {
        Imcf::Radial(w)
    }
}

impl<'a> From<&'a ImcfField> for Imcf<'a> {
    fn from(w: &'a ImcfField) -> Self {
        Imcf::Field(w)
    }
}

/// `(w, |∇w|)` on `{ρ = s}` with normalized angular weights.
struct WSphere {
    weights: Vec<f64>,
    w: Vec<f64>,
    grad: Vec<f64>,
}

impl Imcf<'_> {
    fn dimension(&self) -> usize {
        match self {
            Imcf::Radial(r) => r.n,
            Imcf::Field(f) => f.grid.dimension(),
        }
    }

    fn end(&self) -> EndId {
        match self {
            Imcf::Radial(r) => r.end,
            Imcf::Field(f) => f.grid.end(),
        }
    }

    fn sphere(&self, s: f64) -> Result<WSphere> {
        match self {
            Imcf::Radial(r) => Ok(WSphere {
                weights: vec![1.0],
                w: vec![r.w(s)?],
                grad: vec![r.dw(s)?.abs()],
            }),
            Imcf::Field(f) => {
                let g = &*f.grid;
                let (i, _) = g.sphere_bracket(s)?;
                let (x0, x1) = (g.xi()[i], g.xi()[i + 1]);
                let t = (s / x0).ln() / (x1 / x0).ln();
                let rows = [i, i + 1];
                let grad = row_gradients(g, &f.w, &rows);
                let total = unit_sphere_area(g.dimension() - 1);
                let mut out = WSphere {
                    weights: g.angular_weights().iter().map(|w| w / total).collect(),
                    w: Vec::with_capacity(g.cols()),
                    grad: Vec::with_capacity(g.cols()),
                };
                for j in 0..g.cols() {
                    let (a, b) = (g.node(i, j), g.node(i + 1, j));
                    out.w.push((1.0 - t) * f.w[a] + t * f.w[b]);
                    let (ga, gb) = (grad[0][j], grad[1][j]);
                    let g0 = (1.0 - t) * ga[0] + t * gb[0];
                    let g1 = (1.0 - t) * ga[1] + t * gb[1];
                    out.grad.push(g0.hypot(g1));
                }
                Ok(out)
            }
        }
    }
}

/// Gradient of a nodal field on selected rows.
fn row_gradients(grid: &Grid, values: &[f64], rows: &[usize]) -> Vec<Vec<[f64; 2]>> {
    let all = discrete_gradient(grid, values);
    rows.iter()
        .map(|&i| (0..grid.cols()).map(|j| all[grid.node(i, j)]).collect())
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ImcfConstant {
    /// Richardson limit of the sphere means of `w − (n-1) ln ρ`.
    pub measured: f64,
    /// `-ln(|∂Ω*| / (AVR |S^{n-1}|))`.
    pub predicted: f64,
    /// `|measured − predicted| / max(1, |predicted|)`.
    pub residual: f64,
    pub spread: f64,
    /// `(s, mean, oscillation)` of `w − (n-1) ln ρ`.
    pub ladder: Vec<(f64, f64, f64)>,
    /// False when the oscillation fails to decrease along the ladder.
    pub oscillation_decreasing: bool,
}

pub fn imcf_constant_check(
    model: &ManifoldModel,
    w: Imcf,
    hull_area: f64,
    ladder: &[f64],
    order: f64,
) -> Result<ImcfConstant> {
    let n = w.dimension();
    let avr = model.avr_of_end(w.end())?;
    if !(hull_area > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "hull area must be positive, got {hull_area}"
        )));
    }
    let predicted = -(hull_area / (avr * unit_sphere_area(n - 1))).ln();
    let rows = ladder
        .par_iter()
        .map(|&s| {
            let sp = w.sphere(s)?;
            let shift = (n as f64 - 1.0) * s.ln();
            let d: Vec<f64> = sp.w.iter().map(|v| v - shift).collect();
            let mean: f64 = d.iter().zip(&sp.weights).map(|(v, q)| v * q).sum();
            let hi = d.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = d.iter().copied().fold(f64::INFINITY, f64::min);
            Ok((s, mean, hi - lo))
        })
        .collect::<Result<Vec<_>>>()?;
    let s: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let means: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let r = richardson_extrapolate(&s, &means, order)?;
    Ok(ImcfConstant {
        measured: r.limit,
        predicted,
        residual: (r.limit - predicted).abs() / predicted.abs().max(1.0),
        spread: r.spread,
        oscillation_decreasing: rows.windows(2).all(|p| p[1].2 <= p[0].2 + 1e-12),
        ladder: rows,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthRow {
    pub t: f64,
    pub area: f64,
    /// `|∂{w ≤ t}| e^{-t}`.
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthTable {
    pub rows: Vec<GrowthRow>,
    /// `(max − min) / mean` of the ratios.
    pub deviation: f64,
}

/// `|∂{w ≤ t}| / e^t` along a ladder of `t`.
pub fn exponential_growth_check(model: &ManifoldModel, w: Imcf, ladder: &[f64]) -> Result<GrowthTable> {
    let rows = ladder
        .par_iter()
        .map(|&t| {
            let area = match w {
                Imcf::Radial(r) => model.sphere_area(r.end, r.radius_of_level(t)?)?,
                Imcf::Field(f) => {
                    let g = &*f.grid;
                    let outer = g.node(g.rows() - 1, 0)..g.num_nodes();
                    let hi = f.w[outer].iter().copied().fold(f64::INFINITY, f64::min);
                    let lo = f.w[..g.cols()].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    if !(t > lo && t < hi) {
                        return Err(Error::LevelOutOfRange {
                            level: t,
                            min: lo,
                            max: hi,
                        });
                    }
                    let neg: Vec<f64> = f.w.iter().map(|v| -v).collect();
                    let chains = march(g, &neg, -t);
                    if chains.is_empty() {
                        return Err(Error::EmptyLevelSet(t));
                    }
                    measure(g, &chains, None)?.area
                }
            };
            Ok(GrowthRow {
                t,
                area,
                ratio: area * (-t).exp(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    Ok(GrowthTable {
        deviation: relative_spread(&ratios),
        rows,
    })
}

/// `sup_{ρ = s} ρ |∇w|`; tends to `n - 1` on cones.
pub fn imcf_gradient_check(w: Imcf, ladder: &[f64]) -> Result<Vec<BoundRow>> {
    ladder
        .par_iter()
        .map(|&s| {
            let sp = w.sphere(s)?;
            Ok(BoundRow {
                s,
                value: s * sp.grad.iter().copied().fold(0.0, f64::max),
            })
        })
        .collect()
}

/// `sup |w − (n-1) ln ρ|` over the grid nodes, or over the ladder radii
/// for radial flows.
pub fn imcf_liyau_bound(w: Imcf, ladder: &[f64]) -> Result<f64> {
    match w {
        Imcf::Radial(r) => {
            let k = r.n as f64 - 1.0;
            let mut b: f64 = (r.w(r.rho0)? - k * r.rho0.ln()).abs();
            for &s in ladder {
                b = b.max((r.w(s)? - k * s.ln()).abs());
            }
            Ok(b)
        }
        Imcf::Field(f) => {
            let k = f.grid.dimension() as f64 - 1.0;
            Ok(f.grid
                .rho()
                .iter()
                .zip(&f.w)
                .map(|(r, v)| (v - k * r.ln()).abs())
                .fold(0.0, f64::max))
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct Coherence {
    /// `(p, -(p-1) ln γ_p)`.
    pub ladder: Vec<(f64, f64)>,
    /// Linear extrapolation to `p = 1`.
    pub limit: f64,
    pub spread: f64,
    /// `|limit − κ_predicted|`.
    pub residual: f64,
}

/// `-(p-1) ln γ_p = -ln(C_p/AVR)` along the ladder, extrapolated to `p = 1`.
pub fn coherence_check(hull: &HullArea, avr: f64, predicted: f64) -> Coherence {
    let ladder: Vec<(f64, f64)> = hull.ladder.iter().map(|&(p, c)| (p, -(c / avr).ln())).collect();
    let x: Vec<f64> = ladder.iter().map(|e| e.0 - 1.0).collect();
    let y: Vec<f64> = ladder.iter().map(|e| e.1).collect();
    let limit = linear_to_zero(&x, &y);
    Coherence {
        spread: (quadratic_to_zero(&x, &y) - limit).abs(),
        residual: (limit - predicted).abs(),
        limit,
        ladder,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ImcfReport {
    pub end: EndId,
    pub ladder: Vec<f64>,
    pub hull: HullArea,
    pub constant: ImcfConstant,
    pub coherence: Coherence,
    pub growth: GrowthTable,
    pub gradient: Vec<BoundRow>,
    /// `sup |w − (n-1) ln ρ|`.
    pub liyau_bound: f64,
    /// Extrapolation spread at the calibration radius.
    pub extrapolation_spread: f64,
}

/// Runs the checks on one end given `w` and the hull-area estimate.
pub fn imcf_report(
    model: &ManifoldModel,
    w: Imcf,
    hull: HullArea,
    s_ladder: &[f64],
    t_ladder: &[f64],
    order: f64,
) -> Result<ImcfReport> {
    let constant = imcf_constant_check(model, w, hull.area, s_ladder, order)?;
    let avr = model.avr_of_end(w.end())?;
    let coherence = coherence_check(&hull, avr, constant.predicted);
    let (ladder, extrapolation_spread) = match w {
        Imcf::Radial(r) => (r.ladder(), r.spread(IMCF_CALIBRATION_FACTOR * r.rho0)?),
        Imcf::Field(f) => (f.ladder.clone(), f.calibration_spread),
    };
    Ok(ImcfReport {
        end: w.end(),
        ladder,
        growth: exponential_growth_check(model, w, t_ladder)?,
        gradient: imcf_gradient_check(w, s_ladder)?,
        liyau_bound: imcf_liyau_bound(w, s_ladder)?,
        extrapolation_spread,
        hull,
        constant,
        coherence,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_grid, make_model, EndDescriptor, LinkSpec, WarpProfile};
    use crate::radial::{radial_imcf, GAMMA_LADDER, MOSER_LADDER};
    use std::f64::consts::PI;

    fn model(w: WarpProfile, a: f64) -> ManifoldModel {
        make_model(3, &[EndDescriptor::new(w, LinkSpec::round(a))]).unwrap()
    }

    #[test]
    fn cone_flow_is_exact() {
        let m = model(WarpProfile::cone(1.0), 0.9);
        let d = DomainSpec::Coordinate { radius: 1.0 };
        let w = radial_imcf(&m, EndId::E1, 1.0).unwrap();
        let hull = hull_area_estimate(&m, &d, EndId::E1, &MOSER_LADDER, None).unwrap();
        assert!((hull.area - 4.0 * PI * 0.81).abs() < 1e-9);
        let rep = imcf_report(&m, Imcf::Radial(&w), hull, &GAMMA_LADDER, &[2.0, 4.0, 6.0], 1.0).unwrap();
        assert!(rep.constant.measured.abs() < 1e-9 && rep.constant.predicted.abs() < 1e-9);
        assert!(rep.growth.deviation < 1e-9);
        assert!((rep.growth.rows[0].ratio - 4.0 * PI * 0.81).abs() < 1e-6);
        assert!(rep.gradient.iter().all(|r| (r.value - 2.0).abs() < 1e-12));
    }

    #[test]
    fn offset_flow_constant() {
        let m = model(WarpProfile::offset(1.0, 0.5), 1.0);
        let d = DomainSpec::Coordinate { radius: 1.0 };
        let w = radial_imcf(&m, EndId::E1, 1.0).unwrap();
        let hull = hull_area_estimate(&m, &d, EndId::E1, &MOSER_LADDER, None).unwrap();
        // C_p = 1.5^{3-p} here, so the hull is the sphere of area 9π
        assert!((hull.area / (9.0 * PI) - 1.0).abs() < 1e-3, "{}", hull.area);
        let rep = imcf_report(&m, Imcf::Radial(&w), hull, &GAMMA_LADDER, &[2.0, 4.0, 6.0], 1.0).unwrap();
        assert!(
            (rep.constant.measured + 2.0 * 1.5f64.ln()).abs() < 1e-6,
            "{:?}",
            rep.constant
        );
        assert!(rep.constant.residual < 1e-3);
        assert!(rep.coherence.residual < 1e-3);
        assert!(rep.growth.deviation < 1e-9);
        assert!((rep.gradient[0].value - 2e3 / 1000.5).abs() < 1e-6);
    }

    #[test]
    fn flat_ladder_extrapolates_to_log() {
        let m = model(WarpProfile::cone(1.0), 1.0);
        let d = DomainSpec::Coordinate { radius: 1.0 };
        let g = Arc::new(build_grid(&m, EndId::E1, &d, &GridSpec::new(64.0, 64, 8)).unwrap());
        let fields: Vec<DiscreteField> = solve_moser_ladder(&m, &d, &g, &SolverConfig::default(), &[1.2, 1.1, 1.05])
            .unwrap()
            .into_iter()
            .map(|x| x.0)
            .collect();
        let w = p_to_one_extrapolate(&fields).unwrap();
        // w_p is linear in p, so only the O(h^2) error of each solve remains
        for (r, v) in g.rho().iter().zip(w.values()) {
            assert!((v - 2.0 * r.ln()).abs() < 1e-3, "{r}: {:e}", v - 2.0 * r.ln());
        }
        let s = w.spread().iter().fold(0.0f64, |m, v| m.max(*v));
        assert!(s < 5e-4, "{s:e}");
        let grow = exponential_growth_check(&m, Imcf::Field(&w), &[1.0, 2.0, 4.0]).unwrap();
        assert!(grow.deviation < 1e-3, "{grow:?}");
        assert!((grow.rows[0].ratio / (4.0 * PI) - 1.0).abs() < 1e-3);
        assert!(p_to_one_extrapolate(&fields[..2]).is_err());
    }

    #[test]
    fn non_positive_potential_rejected() {
        let m = model(WarpProfile::cone(1.0), 1.0);
        let d = DomainSpec::Coordinate { radius: 1.0 };
        let g = Arc::new(build_grid(&m, EndId::E1, &d, &GridSpec::new(8.0, 8, 8)).unwrap());
        let mut v = vec![0.5; g.num_nodes()];
        v[20] = 0.0;
        let f = DiscreteField::from_values(g, 1.5, 0.0, v).unwrap();
        assert!(moser_transform(&f).is_err());
    }
}
