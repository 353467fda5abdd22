//! Blow-down analysis of p-capacitary potentials: rescaled profiles, the
//! asymptotic constant γ, and the two-sided and gradient bounds.

use rayon::prelude::*;
use serde::Serialize;

use crate::capacity::Potential;
use crate::error::{Error, Result};
use crate::geometry::{EndId, ManifoldModel};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Richardson {
    pub limit: f64,
    pub spread: f64,
}

/// One-step Richardson elimination of an `s^{-order}` error term along a
/// geometric ladder of abscissae `s`.
pub fn richardson_extrapolate(s: &[f64], values: &[f64], order: f64) -> Result<Richardson> {
    if values.len() < 3 || s.len() != values.len() {
        return Err(Error::InvalidArgument(format!(
            "Richardson extrapolation needs at least 3 ladder values with abscissae, got {} values and {} abscissae",
            values.len(),
            s.len()
        )));
    }
    let acc: Vec<f64> = (0..values.len() - 1)
        .map(|k| {
            let r = (s[k + 1] / s[k]).powf(order);
            (r * values[k + 1] - values[k]) / (r - 1.0)
        })
        .collect();
    let k = acc.len();
    Ok(Richardson {
        limit: acc[k - 1],
        spread: (acc[k - 1] - acc[k - 2]).abs(),
    })
}

/// Blow-down data of `s^{(n-p)/(p-1)} u` on the sphere `{ρ = s}`.
#[derive(Clone, Debug, Serialize)]
pub struct ProfileRow {
    pub s: f64,
    pub sup: f64,
    pub inf: f64,
    pub mean: f64,
    pub osc: f64,
}

/// Rescaled profiles `u_s = s^{(n-p)/(p-1)} u(s ·)` on the unit sphere.
pub fn blow_down_profile(src: Potential, ladder: &[f64]) -> Result<Vec<ProfileRow>> {
    let k = src.decay_exponent();
    ladder
        .par_iter()
        .map(|&s| {
            let sp = src.sphere(s)?;
            let scale = s.powf(k);
            let sup = scale * sp.max(|j| sp.u[j]);
            let inf = scale * sp.min(|j| sp.u[j]);
            Ok(ProfileRow {
                s,
                sup,
                inf,
                mean: scale * sp.mean(|j| sp.u[j]),
                osc: sup - inf,
            })
        })
        .collect()
}

/// Relative oscillation increase tolerated along a blow-down ladder.
pub const OSCILLATION_TOLERANCE: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct GammaEstimate {
    /// Richardson limit of the sphere means.
    pub measured: f64,
    /// `(C_p/AVR)^{1/(p-1)}`.
    pub formula: f64,
    /// `|measured − formula| / formula`.
    pub residual: f64,
    pub spread: f64,
    /// Assumed order of the `s^{-order}` error term.
    pub order: f64,
    pub ladder: Vec<(f64, f64)>,
}

pub fn gamma_estimate(profile: &[ProfileRow], capacity: f64, avr: f64, p: f64, order: f64) -> Result<GammaEstimate> {
    if !(capacity > 0.0 && avr > 0.0 && p > 1.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma needs positive capacity and AVR and p > 1, got {capacity}, {avr}, {p}"
        )));
    }
    let rel: Vec<f64> = profile.iter().map(|r| r.osc / r.mean).collect();
    if let Some(w) = rel.windows(2).find(|w| w[1] > w[0] + OSCILLATION_TOLERANCE) {
        return Err(Error::Diagnostics(format!(
            "blow-down oscillation grows from {:e} to {:e}",
            w[0], w[1]
        )));
    }
    let s: Vec<f64> = profile.iter().map(|r| r.s).collect();
    let means: Vec<f64> = profile.iter().map(|r| r.mean).collect();
    let r = richardson_extrapolate(&s, &means, order)?;
    let formula = (capacity / avr).powf(1.0 / (p - 1.0));
    Ok(GammaEstimate {
        measured: r.limit,
        formula,
        residual: (r.limit / formula - 1.0).abs(),
        spread: r.spread,
        order,
        ladder: s.into_iter().zip(means).collect(),
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct LiYauRow {
    pub s: f64,
    pub min_ratio: f64,
    pub max_ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct LiYauBand {
    /// Smallest and largest `u ρ^{(n-p)/(p-1)}` over the covered region
    /// and the limit at infinity.
    pub band_min: f64,
    pub band_max: f64,
    /// Smallest `C` with `C^{-1} ρ^{-k} ≤ u ≤ C ρ^{-k}`.
    pub constant: f64,
    /// Limit value used for the uncovered tail.
    pub tail: f64,
    pub table: Vec<LiYauRow>,
    /// Whether the sphere means move monotonically along the ladder.
    pub monotone: bool,
}

impl LiYauBand {
    pub fn brackets(&self, value: f64, rel_tol: f64) -> bool {
        value >= self.band_min * (1.0 - rel_tol) && value <= self.band_max * (1.0 + rel_tol)
    }
}

/// Two-sided power bound of `u` with `ρ` in place of the distance. The
/// band covers every grid node outside `Ω` (or the ladder radii for radial
/// potentials) together with the limit `tail` of the ratio at infinity.
pub fn liyau_check(src: Potential, ladder: &[f64], tail: f64) -> Result<LiYauBand> {
    let k = src.decay_exponent();
    let mut lo = tail;
    let mut hi = tail;
    let mut table = Vec::with_capacity(ladder.len());
    let mut means = Vec::with_capacity(ladder.len());
    for &s in ladder {
        let sp = src.sphere(s)?;
        let scale = s.powf(k);
        let row = LiYauRow {
            s,
            min_ratio: scale * sp.min(|j| sp.u[j]),
            max_ratio: scale * sp.max(|j| sp.u[j]),
        };
        lo = lo.min(row.min_ratio);
        hi = hi.max(row.max_ratio);
        means.push(scale * sp.mean(|j| sp.u[j]));
        table.push(row);
    }
    match src {
        Potential::Radial(sol) => {
            let r = sol.u(sol.rho0)? * sol.rho0.powf(k);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        Potential::Field(f) => {
            for (r, u) in f.grid().rho().iter().zip(f.values()) {
                let v = u * r.powf(k);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
    }
    let up = means.windows(2).all(|w| w[1] >= w[0]);
    let down = means.windows(2).all(|w| w[1] <= w[0]);
    Ok(LiYauBand {
        band_min: lo,
        band_max: hi,
        constant: hi.max(1.0 / lo),
        tail,
        table,
        monotone: up || down,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct BoundRow {
    pub s: f64,
    pub value: f64,
}

/// `sup_{ρ = s} ρ |∇u| / u`; tends to `(n-p)/(p-1)` on cones.
pub fn gradient_bound_check(src: Potential, ladder: &[f64]) -> Result<Vec<BoundRow>> {
    ladder
        .par_iter()
        .map(|&s| {
            let sp = src.sphere(s)?;
            Ok(BoundRow {
                s,
                value: s * sp.max(|j| sp.grad_norm[j] / sp.u[j]),
            })
        })
        .collect()
}

/// `sup_{ρ = s} |∂_ρ u − γ ∂_ρ ρ^{-k}| s^{(n-1)/(p-1)}` with `k = (n-p)/(p-1)`.
pub fn derivative_asymptotics(src: Potential, gamma: f64, ladder: &[f64]) -> Result<Vec<BoundRow>> {
    let k = src.decay_exponent();
    ladder
        .par_iter()
        .map(|&s| {
            let sp = src.sphere(s)?;
            let model = -gamma * k * s.powf(-k - 1.0);
            let scale = s.powf(k + 1.0);
            Ok(BoundRow {
                s,
                value: scale * sp.max(|j| (sp.du_drho[j] - model).abs()),
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticsReport {
    pub end: EndId,
    pub p: f64,
    pub capacity: f64,
    pub avr: f64,
    pub gamma: GammaEstimate,
    pub profile: Vec<ProfileRow>,
    pub liyau: LiYauBand,
    pub gradient: Vec<BoundRow>,
    pub derivative: Vec<BoundRow>,
    /// Limit of the gradient table on cones, `(n-p)/(p-1)`.
    pub gradient_limit: f64,
}

/// Full blow-down analysis of one end along a ladder of radii. `capacity`
/// is the per-end capacity `C_p^{(i)}`.
pub fn asymptotics_report(
    model: &ManifoldModel,
    src: Potential,
    capacity: f64,
    ladder: &[f64],
    order: f64,
) -> Result<AsymptoticsReport> {
    let avr = model.avr_of_end(src.end())?;
    let profile = blow_down_profile(src, ladder)?;
    let gamma = gamma_estimate(&profile, capacity, avr, src.p(), order)?;
    let liyau = liyau_check(src, ladder, gamma.measured)?;
    let gradient = gradient_bound_check(src, ladder)?;
    let derivative = derivative_asymptotics(src, gamma.formula, ladder)?;
    Ok(AsymptoticsReport {
        end: src.end(),
        p: src.p(),
        capacity,
        avr,
        gradient_limit: src.decay_exponent(),
        gamma,
        profile,
        liyau,
        gradient,
        derivative,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{make_model, EndDescriptor, LinkSpec, WarpProfile};
    use crate::radial::{radial_capacity, radial_potential, GAMMA_LADDER};

    fn model(w: WarpProfile, a: f64) -> ManifoldModel {
        make_model(3, &[EndDescriptor::new(w, LinkSpec::round(a))]).unwrap()
    }

    #[test]
    fn richardson_examples() {
        let s = GAMMA_LADDER;
        let v: Vec<f64> = s.iter().map(|x| 1.5 / (1.0 + 0.5 / x)).collect();
        let r = richardson_extrapolate(&s, &v, 1.0).unwrap();
        assert!((r.limit - 1.5).abs() < 1e-7 && r.spread <= 1e-7, "{r:?}");
        let c = richardson_extrapolate(&s, &[2.0; 3], 1.0).unwrap();
        assert_eq!((c.limit, c.spread), (2.0, 0.0));
        let v: Vec<f64> = s.iter().map(|x| 1.0 + 1.0 / x + 1.0 / (x * x)).collect();
        assert!((richardson_extrapolate(&s, &v, 1.0).unwrap().limit - 1.0).abs() < 1e-6);
        assert!(richardson_extrapolate(&s[..2], &v[..2], 1.0).is_err());
    }

    #[test]
    fn offset_warp_gamma_and_bounds() {
        let m = model(WarpProfile::offset(1.0, 0.5), 1.0);
        let sol = radial_potential(&m, EndId::E1, 1.0, 2.0).unwrap();
        let rep = asymptotics_report(&m, Potential::Radial(&sol), radial_capacity(&sol), &GAMMA_LADDER, 1.0).unwrap();
        assert!((rep.gamma.measured - 1.5).abs() < 1e-6);
        assert!(rep.gamma.residual < 1e-4);
        assert!(rep.profile.iter().all(|r| r.osc == 0.0));
        assert!((rep.profile[0].mean - 1.5 / (1.0 + 0.5 / 1e3)).abs() < 1e-9);
        assert!((rep.liyau.band_min - 1.0).abs() < 1e-9 && (rep.liyau.band_max - 1.5).abs() < 1e-6);
        assert!(rep.liyau.brackets(rep.gamma.formula, 1e-9));
        assert!((rep.gradient[0].value - 1e3 / 1000.5).abs() < 1e-9);
        assert!(rep.derivative.windows(2).all(|w| w[1].value < w[0].value));
    }

    #[test]
    fn cone_profiles_are_constant() {
        let m = model(WarpProfile::cone(1.0), 0.9);
        let sol = radial_potential(&m, EndId::E1, 1.0, 1.5).unwrap();
        let rep = asymptotics_report(&m, Potential::Radial(&sol), radial_capacity(&sol), &GAMMA_LADDER, 1.0).unwrap();
        assert!((rep.gamma.measured - 1.0).abs() < 1e-8 && rep.gamma.residual < 1e-8);
        assert!(rep.profile.iter().all(|r| (r.mean - 1.0).abs() < 1e-8));
        assert!(rep.gradient.iter().all(|r| (r.value - 3.0).abs() < 1e-8));
        assert!(rep.derivative.iter().all(|r| r.value < 1e-7));
    }

    #[test]
    fn growing_oscillation_is_rejected() {
        let row = |s: f64, osc: f64| ProfileRow {
            s,
            sup: 1.0 + osc,
            inf: 1.0,
            mean: 1.0,
            osc,
        };
        let prof = [row(8.0, 0.0), row(16.0, 0.1), row(32.0, 0.2)];
        assert!(matches!(
            gamma_estimate(&prof, 1.0, 1.0, 2.0, 1.0),
            Err(Error::Diagnostics(_))
        ));
    }
}
