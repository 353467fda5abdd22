use serde::{Deserialize, Serialize};

use super::model::{unit_sphere_area, EndId, ManifoldModel, WarpProfile};
use crate::error::{Error, Result};

/// Starting domain `Ω`, axisymmetric about the polar axis `θ = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DomainSpec {
    /// `{ρ ≤ radius}`
    Coordinate { radius: f64 },
    /// Graph over the link: spheroid with semi-axis `axial` along `θ = 0`.
    Ellipsoid { axial: f64, equatorial: f64 },
    /// Graph over the link: `ρ ≤ radius (1 + amplitude cos(mode θ))`.
    Harmonic { radius: f64, amplitude: f64, mode: u32 },
}

impl DomainSpec {
    pub fn is_coordinate(&self) -> bool {
        matches!(self, DomainSpec::Coordinate { .. })
    }

    /// Boundary radius `h(θ)`.
    pub fn h(&self, theta: f64) -> f64 {
        match *self {
            DomainSpec::Coordinate { radius } => radius,
            DomainSpec::Ellipsoid { axial, equatorial } => {
                let (s, c) = theta.sin_cos();
                1.0 / (c * c / (axial * axial) + s * s / (equatorial * equatorial)).sqrt()
            }
            DomainSpec::Harmonic {
                radius,
                amplitude,
                mode,
            } => radius * (1.0 + amplitude * (mode as f64 * theta).cos()),
        }
    }

    /// `h'(θ)`.
    pub fn dh(&self, theta: f64) -> f64 {
        match *self {
            DomainSpec::Coordinate { .. } => 0.0,
            DomainSpec::Ellipsoid { axial, equatorial } => {
                let (s, c) = theta.sin_cos();
                let h = self.h(theta);
                -h.powi(3) * s * c * (1.0 / (equatorial * equatorial) - 1.0 / (axial * axial))
            }
            DomainSpec::Harmonic {
                radius,
                amplitude,
                mode,
            } => {
                let m = mode as f64;
                -radius * amplitude * m * (m * theta).sin()
            }
        }
    }

    pub fn min_radius(&self) -> f64 {
        match *self {
            DomainSpec::Coordinate { radius } => radius,
            DomainSpec::Ellipsoid { axial, equatorial } => axial.min(equatorial),
            DomainSpec::Harmonic {
                radius,
                amplitude,
                mode,
            } => {
                if mode == 0 {
                    radius * (1.0 + amplitude)
                } else {
                    radius * (1.0 - amplitude.abs())
                }
            }
        }
    }

    pub fn max_radius(&self) -> f64 {
        match *self {
            DomainSpec::Coordinate { radius } => radius,
            DomainSpec::Ellipsoid { axial, equatorial } => axial.max(equatorial),
            DomainSpec::Harmonic {
                radius,
                amplitude,
                mode,
            } => {
                if mode == 0 {
                    radius * (1.0 + amplitude)
                } else {
                    radius * (1.0 + amplitude.abs())
                }
            }
        }
    }

    pub fn validate(&self, floor: f64) -> Result<()> {
        let ok = match *self {
            DomainSpec::Coordinate { radius } => radius.is_finite() && radius > 0.0,
            DomainSpec::Ellipsoid { axial, equatorial } => {
                axial.is_finite() && equatorial.is_finite() && axial > 0.0 && equatorial > 0.0
            }
            DomainSpec::Harmonic { radius, amplitude, .. } => {
                radius.is_finite() && radius > 0.0 && amplitude.is_finite() && amplitude.abs() < 1.0
            }
        };
        if !ok {
            return Err(Error::InvalidArgument(format!("malformed domain {self:?}")));
        }
        if self.min_radius() <= floor {
            return Err(Error::InvalidArgument(format!(
                "domain boundary reaches radius {} at or below the model floor {floor}",
                self.min_radius()
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum RadialSpacing {
    /// Cell widths grow by `ratio` from the inner boundary outward.
    Geometric { ratio: f64 },
    /// Nodes equally spaced in `ln ξ`.
    LogUniform,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub outer_radius: f64,
    pub radial_cells: usize,
    pub angular_cells: usize,
    pub spacing: RadialSpacing,
}

impl GridSpec {
    pub fn new(outer_radius: f64, radial_cells: usize, angular_cells: usize) -> Self {
        Self {
            outer_radius,
            radial_cells,
            angular_cells,
            spacing: RadialSpacing::LogUniform,
        }
    }

    pub fn with_spacing(mut self, spacing: RadialSpacing) -> Self {
        self.spacing = spacing;
        self
    }
}

/// Quadrature data at one Gauss point of a cell.
#[derive(Clone, Copy, Debug)]
pub struct QuadPoint {
    /// `dμ` weight, including the angular link factor.
    pub weight: f64,
    /// Inverse metric in `(ξ, θ)`: `[K_ξξ, K_ξθ, K_θθ]`.
    pub k: [f64; 3],
    pub rho: f64,
    pub theta: f64,
}

/// Radial map `ρ = ξ h(θ)^{χ(ξ)}` for graph domains, with `χ = 1` on the
/// inner boundary and `χ = 0` for `ξ ≥ xi_blend`.
#[derive(Clone, Copy, Debug)]
struct Blend {
    xi_blend: f64,
}

impl Blend {
    fn chi(&self, xi: f64) -> (f64, f64) {
        if xi >= self.xi_blend {
            return (0.0, 0.0);
        }
        let lb = self.xi_blend.ln();
        let t = (xi.ln() / lb).clamp(0.0, 1.0);
        let s = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        let ds = 30.0 * t * t * (1.0 - t) * (1.0 - t);
        (1.0 - s, -ds / (xi * lb))
    }
}

/// Tensor-product grid on `(ξ, θ) ∈ [ξ₀, R_out] × [0, π]` over one end,
/// carrying the Q1 quadrature data of the warped metric.
#[derive(Clone, Debug)]
pub struct Grid {
    model: ManifoldModel,
    end: EndId,
    domain: DomainSpec,
    spec: GridSpec,
    warp: WarpProfile,
    link_scale: f64,
    blend: Option<Blend>,
    xi: Vec<f64>,
    theta: Vec<f64>,
    rho: Vec<f64>,
    quad: Vec<QuadPoint>,
    outer_weights: Vec<f64>,
    angular_weights: Vec<f64>,
    first_sphere_row: usize,
}

/// Local Gauss abscissae of the 2-point rule on `[0, 1]`.
pub(crate) const GAUSS2: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

pub fn build_grid(model: &ManifoldModel, end: EndId, domain: &DomainSpec, spec: &GridSpec) -> Result<Grid> {
    let (warp, link_scale) = model.effective_warp(end)?;
    domain.validate(model.radial_floor())?;
    let (ni, nj) = (spec.radial_cells, spec.angular_cells);
    if ni < 8 || nj < 8 {
        return Err(Error::InvalidGrid(format!(
            "grid too coarse: {ni} x {nj} cells (need at least 8 x 8)"
        )));
    }
    let r_out = spec.outer_radius;
    if !(r_out.is_finite() && r_out > domain.max_radius()) {
        return Err(Error::InvalidGrid(format!(
            "outer radius {r_out} does not enclose the domain (max boundary radius {})",
            domain.max_radius()
        )));
    }
    if let RadialSpacing::Geometric { ratio } = spec.spacing {
        if !(1.0..=1.2).contains(&ratio) {
            return Err(Error::InvalidGrid(format!("geometric ratio {ratio} outside [1, 1.2]")));
        }
    }

    let (xi0, blend) = match *domain {
        DomainSpec::Coordinate { radius } => (radius, None),
        _ => {
            let xb = (4.0 * domain.max_radius()).max(2.0).min(0.5 * r_out);
            if xb <= 1.0 {
                return Err(Error::InvalidGrid(format!(
                    "outer radius {r_out} leaves no room to blend the boundary"
                )));
            }
            (1.0, Some(Blend { xi_blend: xb }))
        }
    };

    let mut xi = radial_nodes(xi0, r_out, ni, spec.spacing);
    if let Some(b) = blend {
        // a node exactly on ξ_b makes the sphere ρ = ξ_b a grid row
        let k = (1..ni)
            .min_by(|&i, &j| {
                (xi[i] / b.xi_blend)
                    .ln()
                    .abs()
                    .total_cmp(&(xi[j] / b.xi_blend).ln().abs())
            })
            .expect("at least 8 radial cells");
        xi[k] = b.xi_blend;
    }
    let theta: Vec<f64> = (0..=nj).map(|j| std::f64::consts::PI * j as f64 / nj as f64).collect();

    let mut grid = Grid {
        model: model.clone(),
        end,
        domain: *domain,
        spec: *spec,
        warp,
        link_scale,
        blend,
        xi,
        theta,
        rho: Vec::new(),
        quad: Vec::new(),
        outer_weights: Vec::new(),
        angular_weights: Vec::new(),
        first_sphere_row: 0,
    };
    grid.first_sphere_row = match blend {
        None => 0,
        Some(b) => grid.xi.iter().position(|&x| x >= b.xi_blend).unwrap_or(ni),
    };
    grid.rho = (0..=ni)
        .flat_map(|i| (0..=nj).map(move |j| (i, j)))
        .map(|(i, j)| grid.map(grid.xi[i], grid.theta[j]).0)
        .collect();
    grid.fill_quadrature()?;
    Ok(grid)
}

fn radial_nodes(a: f64, b: f64, cells: usize, spacing: RadialSpacing) -> Vec<f64> {
    let mut x: Vec<f64> = match spacing {
        RadialSpacing::LogUniform => {
            let l = (b / a).ln();
            (0..=cells).map(|i| a * (l * i as f64 / cells as f64).exp()).collect()
        }
        RadialSpacing::Geometric { ratio } => {
            let n = cells as f64;
            let h0 = if ratio == 1.0 {
                (b - a) / n
            } else {
                (b - a) * (ratio - 1.0) / (ratio.powf(n) - 1.0)
            };
            let mut v = Vec::with_capacity(cells + 1);
            let mut s = a;
            let mut h = h0;
            for _ in 0..=cells {
                v.push(s);
                s += h;
                h *= ratio;
            }
            v
        }
    };
    x[0] = a;
    x[cells] = b;
    x
}

impl Grid {
    pub fn model(&self) -> &ManifoldModel {
        &self.model
    }

    pub fn end(&self) -> EndId {
        self.end
    }

    pub fn domain(&self) -> &DomainSpec {
        &self.domain
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.model.dimension()
    }

    /// Number of node rows (constant `ξ`), `I + 1`.
    pub fn rows(&self) -> usize {
        self.xi.len()
    }

    /// Number of node columns (constant `θ`), `J + 1`.
    pub fn cols(&self) -> usize {
        self.theta.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.rows() * self.cols()
    }

    /// Node index with `θ` running fastest.
    #[inline]
    pub fn node(&self, i: usize, j: usize) -> usize {
        i * self.cols() + j
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Physical radius at every node.
    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn outer_radius(&self) -> f64 {
        self.spec.outer_radius
    }

    /// Effective warp `F(ρ) = a f(ρ)` against the unit round sphere.
    #[inline]
    pub fn warp(&self, rho: f64) -> f64 {
        self.link_scale * self.warp.value(rho)
    }

    #[inline]
    pub fn warp_derivative(&self, rho: f64) -> f64 {
        self.link_scale * self.warp.derivative(rho)
    }

    /// `(ρ, ∂ρ/∂ξ, ∂ρ/∂θ)` at a computational point.
    pub fn map(&self, xi: f64, theta: f64) -> (f64, f64, f64) {
        match self.blend {
            None => (xi, 1.0, 0.0),
            Some(b) => {
                let (chi, dchi) = b.chi(xi);
                if chi == 0.0 && dchi == 0.0 {
                    return (xi, 1.0, 0.0);
                }
                let h = self.domain.h(theta);
                let l = h.ln();
                let r = xi * (chi * l).exp();
                (r, r * (1.0 / xi + dchi * l), r * chi * self.domain.dh(theta) / h)
            }
        }
    }

    /// First node row lying on a coordinate sphere; every row from here out
    /// is the sphere `ρ = ξ_i`.
    pub fn first_sphere_row(&self) -> usize {
        self.first_sphere_row
    }

    pub fn is_sphere_row(&self, i: usize) -> bool {
        i >= self.first_sphere_row
    }

    /// Cells `(i, j)` for `i < I`, `j < J`; returns the four corner nodes
    /// ordered `(i,j), (i,j+1), (i+1,j), (i+1,j+1)`.
    #[inline]
    pub fn cell_nodes(&self, i: usize, j: usize) -> [usize; 4] {
        let a = self.node(i, j);
        let b = self.node(i + 1, j);
        [a, a + 1, b, b + 1]
    }

    #[inline]
    pub fn cell_quad(&self, i: usize, j: usize) -> &[QuadPoint] {
        let k = (i * (self.cols() - 1) + j) * 4;
        &self.quad[k..k + 4]
    }

    /// Gradients `(∂/∂ξ, ∂/∂θ)` of the four bilinear shape functions of a
    /// cell at Gauss point `q` (index `2 a + b` for local abscissae `(a, b)`
    /// in `(ξ, θ)`).
    #[inline]
    pub fn shape_gradients(&self, i: usize, j: usize, q: usize) -> [[f64; 2]; 4] {
        let dx = self.xi[i + 1] - self.xi[i];
        let dt = self.theta[j + 1] - self.theta[j];
        let s = GAUSS2[q / 2];
        let t = GAUSS2[q % 2];
        [
            [-(1.0 - t) / dx, -(1.0 - s) / dt],
            [-t / dx, (1.0 - s) / dt],
            [(1.0 - t) / dx, -s / dt],
            [t / dx, s / dt],
        ]
    }

    /// Shape function values at Gauss point `q`.
    #[inline]
    pub fn shape_values(q: usize) -> [f64; 4] {
        let s = GAUSS2[q / 2];
        let t = GAUSS2[q % 2];
        [(1.0 - s) * (1.0 - t), (1.0 - s) * t, s * (1.0 - t), s * t]
    }

    /// Lumped boundary weights on the outer sphere, `∫ φ_j dσ`.
    pub fn outer_weights(&self) -> &[f64] {
        &self.outer_weights
    }

    /// Lumped angular weights `∫ φ_j sin^{n-2}θ |S^{n-2}| dθ`; they sum to
    /// `|S^{n-1}|`.
    pub fn angular_weights(&self) -> &[f64] {
        &self.angular_weights
    }

    /// Total `dμ` of the computational annulus.
    pub fn total_weight(&self) -> f64 {
        self.quad.iter().map(|q| q.weight).sum()
    }

    /// Locates a sphere radius between two sphere rows: `(i, t)` with
    /// `s = (1-t) ξ_i + t ξ_{i+1}`.
    pub fn sphere_bracket(&self, s: f64) -> Result<(usize, f64)> {
        let lo = self.xi[self.first_sphere_row];
        let hi = *self.xi.last().expect("non-empty");
        if self.first_sphere_row >= self.rows() - 1 || !(s >= lo && s <= hi) {
            return Err(Error::InvalidSurface(format!(
                "sphere rho = {s} is not a grid sphere (covered range [{lo}, {hi}])"
            )));
        }
        let i = match self.xi.binary_search_by(|x| x.total_cmp(&s)) {
            Ok(i) => i.min(self.rows() - 2),
            Err(i) => i - 1,
        };
        let t = (s - self.xi[i]) / (self.xi[i + 1] - self.xi[i]);
        Ok((i, t))
    }

    fn fill_quadrature(&mut self) -> Result<()> {
        let n = self.dimension();
        let s_nm2 = unit_sphere_area(n - 2);
        let (ni, nj) = (self.rows() - 1, self.cols() - 1);
        let mut quad = Vec::with_capacity(ni * nj * 4);
        for i in 0..ni {
            let dx = self.xi[i + 1] - self.xi[i];
            for j in 0..nj {
                let dt = self.theta[j + 1] - self.theta[j];
                for q in 0..4 {
                    let xi = self.xi[i] + GAUSS2[q / 2] * dx;
                    let th = self.theta[j] + GAUSS2[q % 2] * dt;
                    let (r, rx, rt) = self.map(xi, th);
                    if !(rx > 0.0) {
                        return Err(Error::InvalidGrid(format!(
                            "radial map folds over at xi = {xi}, theta = {th} (d rho/d xi = {rx})"
                        )));
                    }
                    let f = self.warp(r);
                    let ang = th.sin().powi(n as i32 - 2) * s_nm2;
                    let weight = 0.25 * dx * dt * rx * f.powi(n as i32 - 1) * ang;
                    let det = rx * rx * f * f;
                    let k = [(rt * rt + f * f) / det, -rx * rt / det, rx * rx / det];
                    quad.push(QuadPoint {
                        weight,
                        k,
                        rho: r,
                        theta: th,
                    });
                }
            }
        }
        self.quad = quad;

        // hat-function moments of sin^{n-2}θ with the same 2-point rule as
        // the cells, so θ-independent data stay exactly θ-independent
        let mut ang = vec![0.0; nj + 1];
        for j in 0..nj {
            let dt = self.theta[j + 1] - self.theta[j];
            for x in GAUSS2 {
                let w = 0.5;
                let th = self.theta[j] + x * dt;
                let v = w * dt * th.sin().powi(n as i32 - 2) * s_nm2;
                ang[j] += v * (1.0 - x);
                ang[j + 1] += v * x;
            }
        }
        let fr = self.warp(self.outer_radius()).powi(n as i32 - 1);
        self.outer_weights = ang.iter().map(|a| a * fr).collect();
        self.angular_weights = ang;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::model::{make_model, EndDescriptor, LinkSpec};
    use std::f64::consts::PI;

    fn flat() -> ManifoldModel {
        make_model(3, &[EndDescriptor::new(WarpProfile::cone(1.0), LinkSpec::round(1.0))]).unwrap()
    }

    #[test]
    fn coordinate_grid_endpoints_and_volume() {
        let m = flat();
        let spec = GridSpec::new(64.0, 128, 32).with_spacing(RadialSpacing::Geometric { ratio: 1.05 });
        let g = build_grid(&m, EndId::E1, &DomainSpec::Coordinate { radius: 1.0 }, &spec).unwrap();
        assert_eq!(g.xi()[0], 1.0);
        assert_eq!(*g.xi().last().unwrap(), 64.0);
        assert!(g.xi().windows(2).all(|w| w[1] > w[0]));
        let vol = m.annulus_volume(EndId::E1, 1.0, 64.0).unwrap();
        assert!((g.total_weight() / vol - 1.0).abs() < 1e-6);
        let s: f64 = g.angular_weights().iter().sum();
        assert!((s - 4.0 * PI).abs() < 1e-6);
    }

    #[test]
    fn ellipsoid_grid_conforms() {
        let m = flat();
        let d = DomainSpec::Ellipsoid {
            axial: 2.0,
            equatorial: 1.0,
        };
        let g = build_grid(&m, EndId::E1, &d, &GridSpec::new(64.0, 128, 32)).unwrap();
        assert_eq!(g.xi()[0], 1.0);
        for j in 0..g.cols() {
            let th = g.theta()[j];
            assert!((g.rho()[g.node(0, j)] - d.h(th)).abs() < 1e-13);
            let last = g.rows() - 1;
            assert!((g.rho()[g.node(last, j)] - 64.0).abs() < 1e-12);
        }
        assert!((g.rho()[g.node(0, 0)] - 2.0).abs() < 1e-14);
        let vol = 4.0 * PI / 3.0 * (64f64.powi(3) - 2.0);
        assert!(
            (g.total_weight() / vol - 1.0).abs() < 1e-5,
            "{}",
            g.total_weight() / vol
        );
        assert!(g.first_sphere_row() > 0 && g.first_sphere_row() < g.rows() - 1);
    }

    #[test]
    fn map_derivatives_match_finite_differences() {
        let m = flat();
        let d = DomainSpec::Harmonic {
            radius: 1.0,
            amplitude: 0.3,
            mode: 2,
        };
        let g = build_grid(&m, EndId::E1, &d, &GridSpec::new(32.0, 16, 16)).unwrap();
        let h = 1e-6;
        for &(x, t) in &[(1.3, 0.4), (2.5, 2.0), (1.01, 1.5)] {
            let (_, rx, rt) = g.map(x, t);
            let fx = (g.map(x + h, t).0 - g.map(x - h, t).0) / (2.0 * h);
            let ft = (g.map(x, t + h).0 - g.map(x, t - h).0) / (2.0 * h);
            assert!((rx - fx).abs() < 1e-7 && (rt - ft).abs() < 1e-7);
        }
    }

    #[test]
    fn ellipsoid_dh_matches_finite_difference() {
        let d = DomainSpec::Ellipsoid {
            axial: 2.0,
            equatorial: 1.0,
        };
        for t in [0.1, 0.7, 1.9, 3.0] {
            let fd = (d.h(t + 1e-6) - d.h(t - 1e-6)) / 2e-6;
            assert!((d.dh(t) - fd).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_bad_grids() {
        let m = flat();
        let d = DomainSpec::Coordinate { radius: 1.0 };
        assert!(matches!(
            build_grid(&m, EndId::E1, &d, &GridSpec::new(64.0, 4, 32)),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            build_grid(&m, EndId::E1, &d, &GridSpec::new(0.5, 16, 16)),
            Err(Error::InvalidGrid(_))
        ));
        let bad_q = GridSpec::new(64.0, 16, 16).with_spacing(RadialSpacing::Geometric { ratio: 1.5 });
        assert!(matches!(
            build_grid(&m, EndId::E1, &d, &bad_q),
            Err(Error::InvalidGrid(_))
        ));
    }

    #[test]
    fn sphere_bracket() {
        let m = flat();
        let g = build_grid(
            &m,
            EndId::E1,
            &DomainSpec::Coordinate { radius: 1.0 },
            &GridSpec::new(64.0, 64, 16),
        )
        .unwrap();
        let (i, t) = g.sphere_bracket(8.0).unwrap();
        let s = (1.0 - t) * g.xi()[i] + t * g.xi()[i + 1];
        assert!((s - 8.0).abs() < 1e-12);
        assert!(g.sphere_bracket(100.0).is_err());
    }
}
