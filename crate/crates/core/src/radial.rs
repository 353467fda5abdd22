//! Quadrature-exact radial p-capacitary potentials and the radial weak IMCF
//! on warped products.

use serde::Serialize;

use crate::asymptotics::richardson_extrapolate;
use crate::error::{Error, Result};
use crate::geometry::{unit_sphere_area, EndId, ManifoldModel, WarpProfile};
use crate::quadrature;

/// Beyond this radius the far-field expansion of the warp is integrated in
/// closed form.
pub const TAIL_CUTOFF: f64 = 1e6;

/// Radii of the γ evaluation ladder.
pub const GAMMA_LADDER: [f64; 3] = [1e3, 1e4, 1e5];

/// Default p ladder for the Moser limit.
pub const MOSER_LADDER: [f64; 4] = [1.2, 1.1, 1.05, 1.025];

/// `J(ρ) = ∫_ρ^∞ (f(s)/f(ρ))^{-m} ds`. The potential is
/// `u(ρ) = f(ρ)^{-m} J(ρ) / (f(ρ₀)^{-m} J(ρ₀))`; the scaling keeps the
/// integrand bounded by one for increasing warps, so large `m` is safe.
pub(crate) fn scaled_tail(warp: &WarpProfile, m: f64, rho: f64) -> Result<f64> {
    let c = warp.slope();
    if !(c > 0.0) {
        return Err(Error::DivergentTail(format!("asymptotic slope {c} is not positive")));
    }
    if !(m > 1.0) {
        return Err(Error::DivergentTail(format!("exponent m = {m} must exceed 1")));
    }
    let fr = warp.value(rho);
    let cut = rho.max(TAIL_CUTOFF);
    let (b1, b2) = warp.far_field();
    let lead = (m * (fr / (c * cut)).ln()).exp();
    let tail = lead * (cut / (m - 1.0) - b1 + (0.5 * m * (m + 1.0) * b1 * b1 - m * b2) / ((m + 1.0) * cut));
    if cut == rho {
        return Ok(tail);
    }
    let ln_fr = fr.ln();
    let body = quadrature::integrate(
        |x: f64| {
            let s = x.exp();
            (-m * (warp.value(s).ln() - ln_fr)).exp() * s
        },
        rho.ln(),
        cut.ln(),
        1e-15 * rho,
        1e-12,
    )?;
    Ok(body + tail)
}

/// Decay rate `-u'/u` of the radial potential at `ρ`; equals
/// `((n-p)/(p-1))/ρ` on cones.
pub fn decay_rate(warp: &WarpProfile, n: usize, p: f64, rho: f64) -> Result<f64> {
    let m = (n as f64 - 1.0) / (p - 1.0);
    Ok(1.0 / scaled_tail(warp, m, rho)?)
}

fn check_p(n: usize, p: f64) -> Result<()> {
    if !(p > 1.0 && p < n as f64) {
        return Err(Error::InvalidArgument(format!(
            "p must lie in (1, n) = (1, {n}), got {p}"
        )));
    }
    Ok(())
}

/// Radial p-capacitary potential of `{ρ ≤ ρ₀}` on one end.
#[derive(Clone, Debug, Serialize)]
pub struct RadialSolution {
    pub end: EndId,
    pub n: usize,
    pub p: f64,
    pub rho0: f64,
    warp: WarpProfile,
    link_area: f64,
    avr: f64,
    m: f64,
    f0: f64,
    j0: f64,
    /// `ln A` with `u = A ∫_ρ^∞ f^{-m}`.
    pub log_normalization: f64,
    /// Flux `|u'|^{p-1} f^{n-1} |L|`, independent of the radius.
    pub flux: f64,
    /// `(C_p / AVR)^{1/(p-1)}`.
    pub gamma: f64,
}

pub fn radial_potential(model: &ManifoldModel, end: EndId, rho0: f64, p: f64) -> Result<RadialSolution> {
    let n = model.dimension();
    check_p(n, p)?;
    let e = model.check_radius(end, rho0)?;
    if rho0 <= 0.0 {
        return Err(Error::OutOfDomain {
            end: end.0,
            radius: rho0,
        });
    }
    let warp = e.warp;
    let link_area = e.link.area(n);
    let m = (n as f64 - 1.0) / (p - 1.0);
    let f0 = warp.value(rho0);
    let j0 = scaled_tail(&warp, m, rho0)?;
    // Φ = |L| f₀^{n-1} J₀^{1-p}
    let flux = link_area * f0.powf(n as f64 - 1.0) * j0.powf(1.0 - p);
    let avr = model.avr_of_end(end)?;
    let cap = capacity_from_flux(n, p, flux);
    Ok(RadialSolution {
        end,
        n,
        p,
        rho0,
        warp,
        link_area,
        avr,
        m,
        f0,
        j0,
        log_normalization: m * f0.ln() - j0.ln(),
        flux,
        gamma: (cap / avr).powf(1.0 / (p - 1.0)),
    })
}

/// Normalized capacity from a flux through an enclosing surface.
pub fn capacity_from_flux(n: usize, p: f64, flux: f64) -> f64 {
    let n = n as f64;
    ((p - 1.0) / (n - p)).powf(p - 1.0) * flux / unit_sphere_area(n as usize - 1)
}

impl RadialSolution {
    /// `k = (n-p)/(p-1)`, the decay exponent on cones.
    pub fn decay_exponent(&self) -> f64 {
        (self.n as f64 - self.p) / (self.p - 1.0)
    }

    pub fn warp(&self) -> &WarpProfile {
        &self.warp
    }

    pub fn link_area(&self) -> f64 {
        self.link_area
    }

    pub fn avr(&self) -> f64 {
        self.avr
    }

    fn check(&self, rho: f64) -> Result<()> {
        if !(rho >= self.rho0 && rho.is_finite()) {
            return Err(Error::OutOfDomain {
                end: self.end.0,
                radius: rho,
            });
        }
        Ok(())
    }

    pub fn log_u(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        let j = scaled_tail(&self.warp, self.m, rho)?;
        Ok(-self.m * (self.warp.value(rho) / self.f0).ln() + (j / self.j0).ln())
    }

    pub fn u(&self, rho: f64) -> Result<f64> {
        Ok(self.log_u(rho)?.exp())
    }

    /// `u'(ρ) = -u/J(ρ)`.
    pub fn du(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        let j = scaled_tail(&self.warp, self.m, rho)?;
        let lu = -self.m * (self.warp.value(rho) / self.f0).ln() + (j / self.j0).ln();
        Ok(-lu.exp() / j)
    }

    /// Flux `|u'|^{p-1} f^{n-1} |L|` measured at `ρ`.
    pub fn flux_at(&self, rho: f64) -> Result<f64> {
        let du = self.du(rho)?;
        Ok(du.abs().powf(self.p - 1.0) * self.warp.value(rho).powf(self.n as f64 - 1.0) * self.link_area)
    }

    /// Sphere radius of the level `{u = level}`, by bisection in `ln ρ`.
    pub fn radius_of_level(&self, level: f64) -> Result<f64> {
        if !(level > 0.0 && level <= 1.0) {
            return Err(Error::LevelOutOfRange {
                level,
                min: 0.0,
                max: 1.0,
            });
        }
        if level == 1.0 {
            return Ok(self.rho0);
        }
        let target = level.ln();
        let mut lo = self.rho0.ln();
        let mut hi = lo + 1.0;
        while self.log_u(hi.exp())? > target {
            lo = hi;
            hi += 2.0 * (hi - self.rho0.ln()).max(1.0);
            if hi > 700.0 {
                return Err(Error::LevelOutOfRange {
                    level,
                    min: 0.0,
                    max: 1.0,
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.log_u(mid.exp())? > target {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi.abs().max(1.0) {
                break;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }
}

pub fn radial_capacity(sol: &RadialSolution) -> f64 {
    capacity_from_flux(sol.n, sol.p, sol.flux)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaPair {
    /// Richardson limit of `s^{(n-p)/(p-1)} u(s)` along the ladder.
    pub limit: f64,
    /// `(C_p/AVR)^{1/(p-1)}`.
    pub formula: f64,
    pub ladder: Vec<(f64, f64)>,
    pub spread: f64,
}

pub fn gamma_of(sol: &RadialSolution) -> Result<GammaPair> {
    let k = sol.decay_exponent();
    let mut ladder = Vec::with_capacity(GAMMA_LADDER.len());
    for s in GAMMA_LADDER {
        let v = (k * s.ln() + sol.log_u(s)?).exp();
        ladder.push((s, v));
    }
    let values: Vec<f64> = ladder.iter().map(|x| x.1).collect();
    let r = richardson_extrapolate(&GAMMA_LADDER, &values, 1.0)?;
    let scale = r.limit.abs().max(f64::MIN_POSITIVE);
    if !(r.spread / scale <= 1e-4) {
        return Err(Error::Diagnostics(format!(
            "gamma ladder did not converge (relative spread {:e})",
            r.spread / scale
        )));
    }
    Ok(GammaPair {
        limit: r.limit,
        formula: sol.gamma,
        ladder,
        spread: r.spread,
    })
}

/// Radial weak IMCF from `{ρ ≤ ρ₀}`: exact on cones, otherwise the linear
/// extrapolation in `p - 1` of `-(p-1) ln u_p` over a ladder of radial
/// potentials.
#[derive(Clone, Debug)]
pub struct RadialImcf {
    pub end: EndId,
    pub n: usize,
    pub rho0: f64,
    warp: WarpProfile,
    link_area: f64,
    avr: f64,
    /// Empty on exact cones.
    solutions: Vec<RadialSolution>,
}

/// Radius where the extrapolation spread is calibrated, relative to `ρ₀`.
pub const IMCF_CALIBRATION_FACTOR: f64 = 10.0;

pub fn radial_imcf(model: &ManifoldModel, end: EndId, rho0: f64) -> Result<RadialImcf> {
    radial_imcf_with_ladder(model, end, rho0, &MOSER_LADDER)
}

pub fn radial_imcf_with_ladder(model: &ManifoldModel, end: EndId, rho0: f64, ladder: &[f64]) -> Result<RadialImcf> {
    let e = model.check_radius(end, rho0)?;
    if !(rho0 > 0.0) {
        return Err(Error::OutOfDomain {
            end: end.0,
            radius: rho0,
        });
    }
    let n = model.dimension();
    let mut w = RadialImcf {
        end,
        n,
        rho0,
        warp: e.warp,
        link_area: e.link.area(n),
        avr: model.avr_of_end(end)?,
        solutions: Vec::new(),
    };
    if e.warp.is_cone() {
        return Ok(w);
    }
    if ladder.len() < 3 {
        return Err(Error::InvalidArgument("the p ladder needs at least 3 entries".into()));
    }
    let mut ps = ladder.to_vec();
    ps.sort_by(|a, b| b.total_cmp(a));
    w.solutions = ps
        .iter()
        .map(|&p| radial_potential(model, end, rho0, p))
        .collect::<Result<Vec<_>>>()?;
    let spread = w.spread(IMCF_CALIBRATION_FACTOR * rho0)?;
    if spread > 1e-3 {
        return Err(Error::ExtrapolationUnreliable(format!(
            "p -> 1 extrapolation spread {spread:e} exceeds 1e-3 at rho = {}",
            IMCF_CALIBRATION_FACTOR * rho0
        )));
    }
    Ok(w)
}

/// Linear extrapolation to `x = 0` through the two entries with smallest `x`.
pub(crate) fn linear_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len();
    let (x1, y1, x2, y2) = (x[k - 2], y[k - 2], x[k - 1], y[k - 1]);
    y2 - x2 * (y1 - y2) / (x1 - x2)
}

/// Quadratic extrapolation to `x = 0` through the three smallest `x`.
pub(crate) fn quadratic_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len();
    let (xs, ys) = (&x[k - 3..], &y[k - 3..]);
    let mut v = 0.0;
    for a in 0..3 {
        let mut l = 1.0;
        for b in 0..3 {
            if a != b {
                l *= (0.0 - xs[b]) / (xs[a] - xs[b]);
            }
        }
        v += l * ys[a];
    }
    v
}

impl RadialImcf {
    /// True when `w = (n-1) ln(ρ/ρ₀)` holds exactly.
    pub fn is_exact(&self) -> bool {
        self.solutions.is_empty()
    }

    pub fn avr(&self) -> f64 {
        self.avr
    }

    pub fn w(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        if self.is_exact() {
            return Ok((self.n as f64 - 1.0) * (rho / self.rho0).ln());
        }
        let (x, y) = self.ladder_values(rho)?;
        Ok(linear_to_zero(&x, &y))
    }

    /// `dw/dρ` by differentiating each ladder entry exactly.
    pub fn dw(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        if self.is_exact() {
            return Ok((self.n as f64 - 1.0) / rho);
        }
        let mut x = Vec::with_capacity(self.solutions.len());
        let mut y = Vec::with_capacity(self.solutions.len());
        for s in &self.solutions {
            x.push(s.p - 1.0);
            y.push((s.p - 1.0) / scaled_tail(&s.warp, s.m, rho)?);
        }
        Ok(linear_to_zero(&x, &y))
    }

    /// |3-point − 2-point| extrapolation difference at `ρ`.
    pub fn spread(&self, rho: f64) -> Result<f64> {
        self.check(rho)?;
        if self.is_exact() {
            return Ok(0.0);
        }
        let (x, y) = self.ladder_values(rho)?;
        Ok((quadratic_to_zero(&x, &y) - linear_to_zero(&x, &y)).abs())
    }

    pub fn ladder(&self) -> Vec<f64> {
        self.solutions.iter().map(|s| s.p).collect()
    }

    pub fn solutions(&self) -> &[RadialSolution] {
        &self.solutions
    }

    /// Area of the coordinate sphere `{ρ = s}`.
    pub fn sphere_area(&self, rho: f64) -> f64 {
        self.warp.value(rho).powf(self.n as f64 - 1.0) * self.link_area
    }

    /// Radius of the level `{w = t}`, by bisection in `ln ρ`.
    pub fn radius_of_level(&self, t: f64) -> Result<f64> {
        if !(t >= 0.0) {
            return Err(Error::LevelOutOfRange {
                level: t,
                min: 0.0,
                max: f64::INFINITY,
            });
        }
        if t == 0.0 {
            return Ok(self.rho0);
        }
        let l0 = self.rho0.ln();
        let mut lo = l0;
        let mut hi = l0 + t / (self.n as f64 - 1.0) + 1.0;
        while self.w(hi.exp())? < t {
            lo = hi;
            hi += 2.0 * (hi - l0);
            if hi > 700.0 {
                return Err(Error::LevelOutOfRange {
                    level: t,
                    min: 0.0,
                    max: f64::INFINITY,
                });
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.w(mid.exp())? < t {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 * hi.abs().max(1.0) {
                break;
            }
        }
        Ok((0.5 * (lo + hi)).exp())
    }

    fn check(&self, rho: f64) -> Result<()> {
        if !(rho >= self.rho0 && rho.is_finite()) {
            return Err(Error::OutOfDomain {
                end: self.end.0,
                radius: rho,
            });
        }
        Ok(())
    }

    fn ladder_values(&self, rho: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut x = Vec::with_capacity(self.solutions.len());
        let mut y = Vec::with_capacity(self.solutions.len());
        for s in &self.solutions {
            x.push(s.p - 1.0);
            y.push(-(s.p - 1.0) * s.log_u(rho)?);
        }
        Ok((x, y))
    }
}
