//! Closed-form reference values used by the integration tests.
#![allow(dead_code)]

use std::f64::consts::PI;
use std::sync::Arc;

use conecap::geometry::{
    build_grid, make_model, DomainSpec, EndDescriptor, EndId, GridSpec, LinkSpec, ManifoldModel, WarpProfile,
};
use conecap::solver::{solve_p_laplace, DiscreteField, SolverConfig};

pub fn one_end(warp: WarpProfile, link_scale: f64) -> ManifoldModel {
    make_model(3, &[EndDescriptor::new(warp, LinkSpec::round(link_scale))]).unwrap()
}

pub fn flat() -> ManifoldModel {
    one_end(WarpProfile::cone(1.0), 1.0)
}

pub fn two_end_catenoid() -> ManifoldModel {
    let w = WarpProfile::smoothed(1.0, 1.0);
    make_model(
        3,
        &[
            EndDescriptor::new(w, LinkSpec::round(1.0)),
            EndDescriptor::new(w, LinkSpec::round(1.0)),
        ],
    )
    .unwrap()
}

pub fn decay_exponent(n: usize, p: f64) -> f64 {
    (n as f64 - p) / (p - 1.0)
}

/// Potential of `{ρ ≤ ρ0}` for `f = cρ + b` in dimension 3: the flux
/// `f² |u'|^{p-1}` is constant, so `u = ((ρ+b/c)/(ρ0+b/c))^{-k}`.
pub fn affine_potential(p: f64, slope: f64, shift: f64, rho0: f64, rho: f64) -> f64 {
    let o = shift / slope;
    ((rho + o) / (rho0 + o)).powf(-decay_exponent(3, p))
}

/// Normalized capacity of `{ρ ≤ ρ0}` for `f = cρ + b`, link scale `a`, n = 3.
pub fn affine_capacity(p: f64, slope: f64, shift: f64, link_scale: f64, rho0: f64) -> f64 {
    let k = decay_exponent(3, p);
    let f0 = slope * rho0 + shift;
    let du = k / (rho0 + shift / slope);
    let flux = (link_scale * f0).powi(2) * du.powf(p - 1.0);
    (1.0 / k).powf(p - 1.0) * flux
}

/// Two-end model `f = √(ρ²+1)`, p = 2, `Ω = {|ρ| ≤ 1}`.
pub fn catenoid_potential(rho: f64) -> f64 {
    4.0 / PI * (PI / 2.0 - rho.abs().atan())
}

pub const CATENOID_END_CAPACITY: f64 = 4.0 / PI;

/// Newtonian capacity of the prolate spheroid with semi-axes `a > b = b`,
/// normalized so the unit ball has capacity 1.
pub fn prolate_capacity(a: f64, b: f64) -> f64 {
    let e = (1.0 - (b / a).powi(2)).sqrt();
    a * e / e.atanh()
}

/// Surface area of the prolate spheroid with semi-axes `a > b = b`.
pub fn prolate_area(a: f64, b: f64) -> f64 {
    let e = (1.0 - (b / a).powi(2)).sqrt();
    2.0 * PI * b * b * (1.0 + a / (b * e) * e.asin())
}

pub const ELLIPSOID: DomainSpec = DomainSpec::Ellipsoid {
    axial: 2.0,
    equatorial: 1.0,
};

pub fn solve(model: &ManifoldModel, end: EndId, domain: &DomainSpec, spec: GridSpec, p: f64) -> DiscreteField {
    let g = Arc::new(build_grid(model, end, domain, &spec).unwrap());
    solve_p_laplace(model, domain, &g, &SolverConfig::with_p(p)).unwrap().0
}

/// Largest `|u_h − u|` over the nodes and cell midpoints of a field on a
/// coordinate-ball grid, where `ρ = ξ`.
pub fn sup_error(field: &DiscreteField, exact: impl Fn(f64) -> f64) -> f64 {
    let g = field.grid();
    let (xi, th) = (g.xi(), g.theta());
    let mut err = 0.0f64;
    for i in 0..g.rows() {
        for j in 0..g.cols() {
            err = err.max((field.value(i, j) - exact(xi[i])).abs());
            if i + 1 < g.rows() && j + 1 < g.cols() {
                let x = 0.5 * (xi[i] + xi[i + 1]);
                let v = field.interpolate(x, 0.5 * (th[j] + th[j + 1])).unwrap();
                err = err.max((v - exact(x)).abs());
            }
        }
    }
    err
}
