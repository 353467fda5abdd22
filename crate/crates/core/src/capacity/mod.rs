//! Capacities from fluxes, level-set geometry and eccentricity, for radial
//! oracles and grid solutions alike.

mod levelset;

use rayon::prelude::*;
use serde::Serialize;

pub use levelset::LevelCurve;
pub(crate) use levelset::{march, measure};

use crate::error::{Error, Result};
use crate::geometry::{unit_ball_volume, unit_sphere_area, EndId, ManifoldModel};
use crate::quadrature::integrate_default;
use crate::radial::{capacity_from_flux, RadialSolution};
use crate::solver::DiscreteField;

/// A p-capacitary potential on one end: a radial oracle or a grid solution.
#[derive(Clone, Copy, Debug)]
pub enum Potential<'a> {
    Radial(&'a RadialSolution),
    Field(&'a DiscreteField),
}

impl<'a> From<&'a RadialSolution> for Potential<'a> {
    fn from(s: &'a RadialSolution) -> Self {
        Potential::Radial(s)
    }
}

impl<'a> From<&'a DiscreteField> for Potential<'a> {
    fn from(f: &'a DiscreteField) -> Self {
        Potential::Field(f)
    }
}

/// Values on a coordinate sphere `{ρ = s}` with normalized angular weights.
#[derive(Clone, Debug, Serialize)]
pub struct SphereSamples {
    pub radius: f64,
    pub theta: Vec<f64>,
    /// Sum to one.
    pub weights: Vec<f64>,
    pub u: Vec<f64>,
    pub du_drho: Vec<f64>,
    pub grad_norm: Vec<f64>,
}

impl SphereSamples {
    pub fn mean(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.weights.iter().enumerate().map(|(k, w)| w * f(k)).sum()
    }

    pub fn max(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.u.len()).map(f).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self, f: impl Fn(usize) -> f64) -> f64 {
        (0..self.u.len()).map(f).fold(f64::INFINITY, f64::min)
    }
}

impl Potential<'_> {
    pub fn p(&self) -> f64 {
        match self {
            Potential::Radial(s) => s.p,
            Potential::Field(f) => f.p(),
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            Potential::Radial(s) => s.n,
            Potential::Field(f) => f.grid().dimension(),
        }
    }

    pub fn end(&self) -> EndId {
        match self {
            Potential::Radial(s) => s.end,
            Potential::Field(f) => f.grid().end(),
        }
    }

    /// `(n-p)/(p-1)`.
    pub fn decay_exponent(&self) -> f64 {
        (self.dimension() as f64 - self.p()) / (self.p() - 1.0)
    }

    /// Range of radii carrying coordinate spheres.
    pub fn coverage(&self) -> (f64, f64) {
        match self {
            Potential::Radial(s) => (s.rho0, f64::INFINITY),
            Potential::Field(f) => {
                let g = f.grid();
                (g.xi()[g.first_sphere_row().min(g.rows() - 1)], g.outer_radius())
            }
        }
    }

    /// Flux `∫ |∇u|^{p-1}` through any surface enclosing `Ω`.
    pub fn flux(&self) -> Result<f64> {
        match self {
            Potential::Radial(s) => Ok(s.flux),
            Potential::Field(f) => f.layer_flux(f.grid().first_sphere_row().min(f.grid().rows() - 2)),
        }
    }

    /// Normalized capacity.
    pub fn capacity(&self) -> Result<f64> {
        Ok(capacity_from_flux(self.dimension(), self.p(), self.flux()?))
    }

    /// Samples on `{ρ = s}`. Grid values are interpolated linearly in
    /// `ln ρ` from `ln u` and its gradient.
    pub fn sphere(&self, s: f64) -> Result<SphereSamples> {
        match self {
            Potential::Radial(sol) => {
                let u = sol.u(s)?;
                let du = sol.du(s)?;
                Ok(SphereSamples {
                    radius: s,
                    theta: vec![0.0],
                    weights: vec![1.0],
                    u: vec![u],
                    du_drho: vec![du],
                    grad_norm: vec![du.abs()],
                })
            }
            Potential::Field(f) => {
                let g = f.grid();
                let (i, _) = g.sphere_bracket(s)?;
                let (x0, x1) = (g.xi()[i], g.xi()[i + 1]);
                let t = (s / x0).ln() / (x1 / x0).ln();
                let lu = f.log_values();
                let lg = f.log_gradient();
                let total = unit_sphere_area(g.dimension() - 1);
                let mut out = SphereSamples {
                    radius: s,
                    theta: g.theta().to_vec(),
                    weights: g.angular_weights().iter().map(|w| w / total).collect(),
                    u: Vec::with_capacity(g.cols()),
                    du_drho: Vec::with_capacity(g.cols()),
                    grad_norm: Vec::with_capacity(g.cols()),
                };
                for j in 0..g.cols() {
                    let (a, b) = (g.node(i, j), g.node(i + 1, j));
                    let l = (1.0 - t) * lu[a] + t * lu[b];
                    let g0 = (1.0 - t) * lg[a][0] + t * lg[b][0];
                    let g1 = (1.0 - t) * lg[a][1] + t * lg[b][1];
                    let u = l.exp();
                    out.u.push(u);
                    out.du_drho.push(u * g0);
                    out.grad_norm.push(u * g0.hypot(g1));
                }
                Ok(out)
            }
        }
    }
}

/// Normalized capacity from the flux through the coordinate sphere
/// `{ρ = s}`, which must enclose `Ω`.
pub fn flux_capacity_at(src: Potential, s: f64) -> Result<f64> {
    match src {
        Potential::Radial(sol) => {
            if !(s >= sol.rho0) {
                return Err(Error::InvalidSurface(format!(
                    "sphere rho = {s} meets the domain (boundary at rho = {})",
                    sol.rho0
                )));
            }
            Ok(capacity_from_flux(sol.n, sol.p, sol.flux_at(s)?))
        }
        Potential::Field(f) => {
            let g = f.grid();
            if s < g.domain().max_radius() {
                return Err(Error::InvalidSurface(format!(
                    "sphere rho = {s} meets the domain (max boundary radius {})",
                    g.domain().max_radius()
                )));
            }
            let (i, _) = g.sphere_bracket(s)?;
            f.layer_capacity(i)
        }
    }
}

/// Normalized capacity from the flux through `∂Ω` itself.
pub fn boundary_capacity(src: Potential) -> Result<f64> {
    match src {
        Potential::Radial(sol) => Ok(capacity_from_flux(sol.n, sol.p, sol.flux_at(sol.rho0)?)),
        Potential::Field(f) => f.layer_capacity(0),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EndCapacity {
    pub end: EndId,
    pub capacity: f64,
    pub avr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PerEndCapacity {
    pub p: f64,
    pub ends: Vec<EndCapacity>,
    /// Sum of the per-end capacities.
    pub total: f64,
    /// Sum of the per-end volume ratios.
    pub avr: f64,
}

impl PerEndCapacity {
    pub fn of(&self, end: EndId) -> Option<f64> {
        self.ends.iter().find(|e| e.end == end).map(|e| e.capacity)
    }
}

/// One potential per end of `model`, all at the same `p`.
pub fn per_end_capacity(model: &ManifoldModel, sources: &[Potential]) -> Result<PerEndCapacity> {
    let p = sources
        .first()
        .ok_or_else(|| Error::InvalidArgument("no potentials given".into()))?
        .p();
    let mut ends = Vec::with_capacity(model.ends().len());
    for id in model.end_ids() {
        let mut hits = sources.iter().filter(|s| s.end() == id);
        let src = hits
            .next()
            .ok_or_else(|| Error::InvalidArgument(format!("no potential covers end {id}")))?;
        if hits.next().is_some() {
            return Err(Error::InvalidArgument(format!("more than one potential on end {id}")));
        }
        if src.p() != p {
            return Err(Error::InvalidArgument(format!("mixed exponents {} and {p}", src.p())));
        }
        ends.push(EndCapacity {
            end: id,
            capacity: src.capacity()?,
            avr: model.avr_of_end(id)?,
        });
    }
    if sources.len() > ends.len() {
        return Err(Error::InvalidArgument(
            "potential on an end the model does not have".into(),
        ));
    }
    Ok(PerEndCapacity {
        p,
        total: ends.iter().map(|e| e.capacity).sum(),
        avr: ends.iter().map(|e| e.avr).sum(),
        ends,
    })
}

/// A level set `{u = level}` of a potential on one end.
#[derive(Clone, Debug, Serialize)]
pub struct LevelSet {
    pub level: f64,
    pub curves: Vec<LevelCurve>,
    /// Smallest and largest `ρ` on the level set.
    pub r_min: f64,
    pub r_max: f64,
    /// Induced hypersurface measure.
    pub area: f64,
    /// Volume of the sublevel region `{u ≥ level}` together with `Ω` and
    /// everything below it down to the radial floor.
    pub volume: f64,
    /// `∫ |∇u|^{p-1}` over the level set.
    pub flux: f64,
    pub min_gradient: f64,
    /// False when `|∇u|` nearly vanishes on the level set.
    pub regular: bool,
}

impl LevelSet {
    pub fn components(&self) -> usize {
        self.curves.len()
    }

    pub fn eccentricity(&self) -> Result<f64> {
        if self.curves.len() != 1 || !self.curves[0].encloses {
            return Err(Error::MultiComponent {
                level: self.level,
                components: self.curves.len(),
            });
        }
        Ok(self.r_max / self.r_min)
    }
}

/// Traces `{u = level}` on a grid solution by linear interpolation of
/// `ln u` along grid edges. `level = 1` returns `∂Ω`.
pub fn extract_level_set(field: &DiscreteField, level: f64) -> Result<LevelSet> {
    let g = field.grid();
    let lu = field.log_values();
    let cols = g.cols();
    let outer = (g.rows() - 1) * cols;
    let lo = lu[outer..].iter().fold(f64::NEG_INFINITY, |m, v| m.max(*v)).exp();
    let hi = lu[..cols].iter().fold(f64::INFINITY, |m, v| m.min(*v)).exp();
    if !(level > lo && level <= hi) {
        return Err(Error::LevelOutOfRange {
            level,
            min: lo,
            max: hi,
        });
    }
    let chains = if level == hi {
        vec![levelset::boundary_chain(g)]
    } else {
        march(g, lu, level.ln())
    };
    if chains.is_empty() {
        return Err(Error::EmptyLevelSet(level));
    }
    let spec = levelset::FluxSpec {
        log_gradient: field.log_gradient(),
        p: field.p(),
        u: level,
    };
    let m = measure(g, &chains, Some(&spec))?;
    let scale = field
        .values()
        .iter()
        .zip(field.log_gradient())
        .map(|(u, d)| u * d[0].hypot(d[1]))
        .fold(0.0, f64::max);
    let min_gradient = m.min_gradient.unwrap_or(0.0);
    Ok(LevelSet {
        level,
        curves: m.curves,
        r_min: m.r_min,
        r_max: m.r_max,
        area: m.area,
        volume: m.volume,
        flux: m.flux.unwrap_or(0.0),
        min_gradient,
        regular: min_gradient >= 1e-6 * scale,
    })
}

/// Volume of `{floor ≤ ρ ≤ s}` on one end.
pub fn radial_volume(model: &ManifoldModel, end: EndId, s: f64) -> Result<f64> {
    let e = model.check_radius(end, s)?;
    let k = model.dimension() as i32 - 1;
    let w = e.warp;
    let v = integrate_default(|r| w.value(r).powi(k), model.radial_floor(), s)?;
    Ok(v * e.link.area(model.dimension()))
}

/// Level set of a radial potential: a coordinate sphere.
fn radial_level_set(model: &ManifoldModel, sol: &RadialSolution, level: f64) -> Result<LevelSet> {
    let r = sol.radius_of_level(level)?;
    let area = model.sphere_area(sol.end, r)?;
    let grad = sol.du(r)?.abs();
    Ok(LevelSet {
        level,
        curves: Vec::new(),
        r_min: r,
        r_max: r,
        area,
        volume: radial_volume(model, sol.end, r)?,
        flux: sol.flux_at(r)?,
        min_gradient: grad,
        regular: grad > 0.0,
    })
}

/// Level set of either kind of potential.
pub fn level_set(model: &ManifoldModel, src: Potential, level: f64) -> Result<LevelSet> {
    match src {
        Potential::Radial(sol) => radial_level_set(model, sol, level),
        Potential::Field(f) => extract_level_set(f, level),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EccentricityRow {
    pub t: f64,
    pub r_min: f64,
    pub r_max: f64,
    pub ecc: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EccentricityTable {
    pub rows: Vec<EccentricityRow>,
    /// Largest increase of `ecc` between consecutive levels.
    pub max_increase: f64,
    pub non_increasing: bool,
    pub tolerance: f64,
}

pub const ECCENTRICITY_TOLERANCE: f64 = 1e-3;

/// `R(t)/r(t)` for the levels `{u = 1/t}`, `t` ascending.
pub fn eccentricity(model: &ManifoldModel, src: Potential, ladder: &[f64]) -> Result<EccentricityTable> {
    let rows = ladder
        .par_iter()
        .map(|&t| {
            let ls = level_set(model, src, 1.0 / t)?;
            let ecc = match src {
                Potential::Radial(_) => 1.0,
                Potential::Field(_) => ls.eccentricity()?,
            };
            Ok(EccentricityRow {
                t,
                r_min: ls.r_min,
                r_max: ls.r_max,
                ecc,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let max_increase = rows.windows(2).map(|w| w[1].ecc - w[0].ecc).fold(0.0, f64::max);
    Ok(EccentricityTable {
        non_increasing: max_increase <= ECCENTRICITY_TOLERANCE,
        tolerance: ECCENTRICITY_TOLERANCE,
        max_increase,
        rows,
    })
}

/// Level of `u` where `v = K u^{-(p-1)/(n-p)}` equals `s`, with
/// `K = (C_p/AVR)^{1/(n-p)}` given through `ratio = C_p/AVR`.
pub fn v_level(ratio: f64, n: usize, p: f64, s: f64) -> f64 {
    let n = n as f64;
    let k = ratio.powf(1.0 / (n - p));
    (s / k).powf(-(n - p) / (p - 1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct AreaVolumeRow {
    pub s: f64,
    /// `u` on `{v = s}`.
    pub level: f64,
    pub area: f64,
    pub volume: f64,
    /// `area / (s^{n-1} |S^{n-1}|)`.
    pub area_ratio: f64,
    /// `volume / (s^n |B^n|)`.
    pub volume_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AreaVolumeTable {
    pub avr: f64,
    pub rows: Vec<AreaVolumeRow>,
}

/// Area of `{v = s}` and volume of `{v ≤ s}` along a ladder of `s`.
pub fn level_area_volume(model: &ManifoldModel, src: Potential, ratio: f64, ladder: &[f64]) -> Result<AreaVolumeTable> {
    let n = src.dimension();
    let p = src.p();
    let rows = ladder
        .par_iter()
        .map(|&s| {
            let level = v_level(ratio, n, p, s);
            let ls = level_set(model, src, level).map_err(|e| beyond_coverage(e, s))?;
            Ok(AreaVolumeRow {
                s,
                level,
                area: ls.area,
                volume: ls.volume,
                area_ratio: ls.area / (s.powi(n as i32 - 1) * unit_sphere_area(n - 1)),
                volume_ratio: ls.volume / (s.powi(n as i32) * unit_ball_volume(n)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AreaVolumeTable {
        avr: model.avr_of_end(src.end())?,
        rows,
    })
}

fn beyond_coverage(e: Error, s: f64) -> Error {
    match e {
        Error::LevelOutOfRange { .. } => Error::InvalidArgument(format!("s = {s} lies beyond the covered range: {e}")),
        other => other,
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelCapacityRow {
    pub s: f64,
    /// `t` with `{v = s} = {u = 1/t}`.
    pub t: f64,
    /// `Cap_p({v ≤ s})`, the un-normalized capacity.
    pub capacity: f64,
    /// `Cap_p({v ≤ s}) / (s^{n-p} |S^{n-1}|)`.
    pub normalized: f64,
    pub deviation: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelCapacityTable {
    /// `((n-p)/(p-1))^{p-1} AVR`.
    pub limit: f64,
    pub rows: Vec<LevelCapacityRow>,
}

/// Capacity of the sublevel sets `{v ≤ s}`: the flux through a coordinate
/// sphere enclosing `{v = s}`, rescaled by `t^{p-1}`.
pub fn capacity_level_sets(
    model: &ManifoldModel,
    src: Potential,
    ratio: f64,
    ladder: &[f64],
) -> Result<LevelCapacityTable> {
    let n = src.dimension();
    let p = src.p();
    let nf = n as f64;
    let limit = ((nf - p) / (p - 1.0)).powf(p - 1.0) * model.avr_of_end(src.end())?;
    let rows = ladder
        .par_iter()
        .map(|&s| {
            let level = v_level(ratio, n, p, s);
            let t = 1.0 / level;
            let flux = match src {
                Potential::Radial(sol) => sol.flux_at(sol.radius_of_level(level)?)?,
                Potential::Field(f) => {
                    let ls = extract_level_set(f, level).map_err(|e| beyond_coverage(e, s))?;
                    let g = f.grid();
                    let r = ls.r_max.max(g.xi()[g.first_sphere_row()]);
                    let (i, _) = g.sphere_bracket(r).map_err(|e| beyond_coverage(e, s))?;
                    f.layer_flux(i.min(g.rows() - 2))?
                }
            };
            let capacity = t.powf(p - 1.0) * flux;
            let normalized = capacity / (s.powf(nf - p) * unit_sphere_area(n - 1));
            Ok(LevelCapacityRow {
                s,
                t,
                capacity,
                normalized,
                deviation: (normalized / limit - 1.0).abs(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LevelCapacityTable { limit, rows })
}

/// Whether `dev` is non-increasing, counting any change below `floor` as
/// no change.
pub fn deviations_decrease(dev: &[f64], floor: f64) -> bool {
    dev.windows(2).all(|w| w[1] <= w[0] + floor)
}

#[derive(Clone, Debug, Serialize)]
pub struct ScalingRow {
    pub end: EndId,
    pub t: f64,
    /// `∫_{u = 1/t} |∇u|^{p-1}`.
    pub level_flux: f64,
    /// `C_p({u ≥ 1/t})`, the normalized capacity of the potential `t u`.
    pub capacity_t: f64,
    /// `C_p({u ≥ 1/t}) t^{-(p-1)}`.
    pub scaled: f64,
    /// `|scaled − C_p| / C_p`.
    pub residual: f64,
}

/// Scaling table of one potential, with each level flux measured on the
/// level set itself.
pub fn scaling_table(model: &ManifoldModel, src: Potential, ladder: &[f64]) -> Result<Vec<ScalingRow>> {
    let cap = src.capacity()?;
    let (n, p) = (src.dimension(), src.p());
    ladder
        .par_iter()
        .map(|&t| {
            let ls = level_set(model, src, 1.0 / t)?;
            let capacity_t = capacity_from_flux(n, p, t.powf(p - 1.0) * ls.flux);
            let scaled = capacity_t / t.powf(p - 1.0);
            Ok(ScalingRow {
                end: src.end(),
                t,
                level_flux: ls.flux,
                capacity_t,
                scaled,
                residual: (scaled / cap - 1.0).abs(),
            })
        })
        .collect()
}

/// `(max − min) / mean` of the scaled capacities.
pub fn relative_spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    (max - min) / mean.abs()
}

#[derive(Clone, Debug, Serialize)]
pub struct CapacityReport {
    pub p: f64,
    /// `C_p`, the sum of the per-end capacities.
    pub total: f64,
    pub per_end: Vec<EndCapacity>,
    /// Capacity from the flux through `∂Ω`, summed over ends.
    pub boundary: f64,
    pub scaling: Vec<ScalingRow>,
    /// Largest relative spread of the scaled capacities on any end.
    pub scaling_spread: f64,
}

pub fn capacity_report(model: &ManifoldModel, sources: &[Potential], ladder: &[f64]) -> Result<CapacityReport> {
    let per_end = per_end_capacity(model, sources)?;
    let mut boundary = 0.0;
    let mut scaling = Vec::new();
    let mut scaling_spread: f64 = 0.0;
    for src in sources {
        boundary += boundary_capacity(*src)?;
        let rows = scaling_table(model, *src, ladder)?;
        if !rows.is_empty() {
            let v: Vec<f64> = rows.iter().map(|r| r.scaled).collect();
            scaling_spread = scaling_spread.max(relative_spread(&v));
        }
        scaling.extend(rows);
    }
    Ok(CapacityReport {
        p: per_end.p,
        total: per_end.total,
        per_end: per_end.ends,
        boundary,
        scaling,
        scaling_spread,
    })
}
