use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature;

/// Area of the unit sphere `S^k` in `R^{k+1}`.
pub fn unit_sphere_area(k: usize) -> f64 {
    // |S^k| = 2π/(k-1) |S^{k-2}|, seeded by |S^0| = 2 and |S^1| = 2π
    let mut even = 2.0;
    let mut odd = 2.0 * std::f64::consts::PI;
    if k == 0 {
        return even;
    }
    if k == 1 {
        return odd;
    }
    let mut d = 2;
    loop {
        let next = 2.0 * std::f64::consts::PI / (d as f64 - 1.0);
        if d % 2 == 0 {
            even *= next;
        } else {
            odd *= next;
        }
        if d == k {
            return if k.is_multiple_of(2) { even } else { odd };
        }
        d += 1;
    }
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    unit_sphere_area(n - 1) / n as f64
}

/// Index of an end, zero-based. Displayed as `E1`, `E2`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct EndId(pub usize);

impl EndId {
    pub const E1: EndId = EndId(0);
    pub const E2: EndId = EndId(1);
}

impl std::fmt::Display for EndId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "E{}", self.0 + 1)
    }
}

/// Closed-form warp registry. On a two-ended model the profile is written in
/// the end-local coordinate `r = |ρ| ≥ 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum WarpProfile {
    /// `f = c ρ`
    Cone { slope: f64 },
    /// `f = c ρ + b`
    Offset { slope: f64, shift: f64 },
    /// `f = c sqrt(ρ² + b²)`
    Smoothed { slope: f64, core: f64 },
}

impl WarpProfile {
    pub fn cone(slope: f64) -> Self {
        WarpProfile::Cone { slope }
    }

    pub fn offset(slope: f64, shift: f64) -> Self {
        WarpProfile::Offset { slope, shift }
    }

    pub fn smoothed(slope: f64, core: f64) -> Self {
        WarpProfile::Smoothed { slope, core }
    }

    pub fn slope(&self) -> f64 {
        match *self {
            WarpProfile::Cone { slope } | WarpProfile::Offset { slope, .. } | WarpProfile::Smoothed { slope, .. } => {
                slope
            }
        }
    }

    pub fn value(&self, r: f64) -> f64 {
        match *self {
            WarpProfile::Cone { slope } => slope * r,
            WarpProfile::Offset { slope, shift } => slope * r + shift,
            WarpProfile::Smoothed { slope, core } => slope * r.hypot(core),
        }
    }

    pub fn derivative(&self, r: f64) -> f64 {
        match *self {
            WarpProfile::Cone { slope } | WarpProfile::Offset { slope, .. } => slope,
            WarpProfile::Smoothed { slope, core } => slope * r / r.hypot(core),
        }
    }

    pub fn second_derivative(&self, r: f64) -> f64 {
        match *self {
            WarpProfile::Cone { .. } | WarpProfile::Offset { .. } => 0.0,
            WarpProfile::Smoothed { slope, core } => {
                let q = r * r + core * core;
                slope * core * core / (q * q.sqrt())
            }
        }
    }

    /// Coefficients of the far-field expansion `f = c s (1 + β₁/s + β₂/s² + …)`.
    pub fn far_field(&self) -> (f64, f64) {
        match *self {
            WarpProfile::Cone { .. } => (0.0, 0.0),
            WarpProfile::Offset { slope, shift } => (shift / slope, 0.0),
            WarpProfile::Smoothed { core, .. } => (0.0, 0.5 * core * core),
        }
    }

    /// True when the profile is an exact cone `f = cρ`.
    pub fn is_cone(&self) -> bool {
        match *self {
            WarpProfile::Cone { .. } => true,
            WarpProfile::Offset { shift, .. } => shift == 0.0,
            WarpProfile::Smoothed { core, .. } => core == 0.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LinkSpec {
    /// Round sphere of radius `scale`.
    RoundSphere { scale: f64 },
    /// A link known only through its area; usable for radial runs only.
    ExplicitArea { area: f64 },
}

impl LinkSpec {
    pub fn round(scale: f64) -> Self {
        LinkSpec::RoundSphere { scale }
    }

    pub fn area(&self, n: usize) -> f64 {
        match *self {
            LinkSpec::RoundSphere { scale } => scale.powi(n as i32 - 1) * unit_sphere_area(n - 1),
            LinkSpec::ExplicitArea { area } => area,
        }
    }

    pub fn round_scale(&self) -> Option<f64> {
        match *self {
            LinkSpec::RoundSphere { scale } => Some(scale),
            LinkSpec::ExplicitArea { .. } => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EndDescriptor {
    pub warp: WarpProfile,
    pub link: LinkSpec,
}

impl EndDescriptor {
    pub fn new(warp: WarpProfile, link: LinkSpec) -> Self {
        Self { warp, link }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Topology {
    /// `ρ ∈ [rho_min, ∞)`.
    SingleEnd { rho_min: f64 },
    /// Signed `ρ ∈ ℝ`; `E1 = {ρ > 0}`, `E2 = {ρ < 0}`.
    DoubleEnd,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct End {
    pub id: EndId,
    pub warp: WarpProfile,
    pub link: LinkSpec,
}

/// Warped product `dρ² + f(ρ)² g_L` with one or two conical ends.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ManifoldModel {
    n: usize,
    topology: Topology,
    ends: Vec<End>,
    ricci_profile_kappa: f64,
}

const SLOPE_CHECK_RADIUS: f64 = 1e6;

/// Builds a model with the default floor `rho_min = 0` for single-ended models.
pub fn make_model(n: usize, ends: &[EndDescriptor]) -> Result<ManifoldModel> {
    make_model_with_floor(n, ends, 0.0)
}

/// Like [`make_model`], with an explicit lower end `rho_min` of the radial
/// coordinate on a single-ended model. Ignored for two ends.
pub fn make_model_with_floor(n: usize, ends: &[EndDescriptor], rho_min: f64) -> Result<ManifoldModel> {
    if n < 3 {
        return Err(Error::InvalidModel(format!("dimension must be at least 3, got {n}")));
    }
    let topology = match ends.len() {
        0 => return Err(Error::InvalidModel("a model needs at least one end".into())),
        1 => Topology::SingleEnd { rho_min },
        2 => Topology::DoubleEnd,
        k => {
            return Err(Error::UnsupportedTopology(format!(
                "{k} ends (at most 2 are supported)"
            )))
        }
    };
    if !(rho_min.is_finite() && rho_min >= 0.0) {
        return Err(Error::InvalidModel(format!(
            "rho_min must be finite and nonnegative, got {rho_min}"
        )));
    }
    let floor = match topology {
        Topology::SingleEnd { rho_min } => rho_min,
        Topology::DoubleEnd => 0.0,
    };

    let mut built = Vec::with_capacity(ends.len());
    for (i, d) in ends.iter().enumerate() {
        let id = EndId(i);
        validate_end(id, d, floor)?;
        built.push(End {
            id,
            warp: d.warp,
            link: d.link,
        });
    }

    if let [e1, e2] = built.as_slice() {
        if e1.link.round_scale().is_some() != e2.link.round_scale().is_some() {
            return Err(Error::InvalidModel("both ends must carry the same kind of link".into()));
        }
        // the signed warp a·f must join continuously and with matching slope at ρ = 0
        let s1 = e1.link.round_scale().unwrap_or(1.0);
        let s2 = e2.link.round_scale().unwrap_or(1.0);
        let (v1, v2) = (s1 * e1.warp.value(0.0), s2 * e2.warp.value(0.0));
        let (d1, d2) = (s1 * e1.warp.derivative(0.0), s2 * e2.warp.derivative(0.0));
        let tol = 1e-12 * v1.abs().max(v2.abs()).max(1.0);
        if (v1 - v2).abs() > tol {
            return Err(Error::InvalidModel(format!(
                "warp is discontinuous across rho = 0 ({v1} vs {v2})"
            )));
        }
        if (d1 + d2).abs() > tol {
            return Err(Error::InvalidModel(format!(
                "warp is not C1 across rho = 0 (one-sided slopes {d1} and {})",
                -d2
            )));
        }
    }

    let mut model = ManifoldModel {
        n,
        topology,
        ends: built,
        ricci_profile_kappa: 0.0,
    };
    model.ricci_profile_kappa = model.sampled_ricci_kappa();
    Ok(model)
}

fn validate_end(id: EndId, d: &EndDescriptor, floor: f64) -> Result<()> {
    let c = d.warp.slope();
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::InvalidModel(format!(
            "{id}: asymptotic slope must be positive, got {c}"
        )));
    }
    match d.link {
        LinkSpec::RoundSphere { scale } if !(scale.is_finite() && scale > 0.0) => {
            return Err(Error::InvalidModel(format!(
                "{id}: link scale must be positive, got {scale}"
            )));
        }
        LinkSpec::ExplicitArea { area } if !(area.is_finite() && area > 0.0) => {
            return Err(Error::InvalidModel(format!(
                "{id}: link area must be positive, got {area}"
            )));
        }
        _ => {}
    }
    // the floor itself may be a cone tip
    let mut samples: Vec<f64> = (-12..=24).map(|k| floor + 10f64.powf(k as f64 * 0.25)).collect();
    if floor > 0.0 || !d.warp.is_cone() {
        samples.push(floor);
    }
    for r in samples {
        let v = d.warp.value(r);
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::InvalidModel(format!(
                "{id}: warp sample f({r}) = {v} is not positive"
            )));
        }
    }
    let ratio = d.warp.value(SLOPE_CHECK_RADIUS) / (c * SLOPE_CHECK_RADIUS);
    if (ratio - 1.0).abs() >= 1e-3 {
        return Err(Error::InvalidModel(format!(
            "{id}: f(rho)/(c rho) = {ratio} at rho = 1e6 does not approach 1"
        )));
    }
    Ok(())
}

impl ManifoldModel {
    pub fn dimension(&self) -> usize {
        self.n
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn ends(&self) -> &[End] {
        &self.ends
    }

    pub fn end_ids(&self) -> impl Iterator<Item = EndId> + '_ {
        self.ends.iter().map(|e| e.id)
    }

    pub fn end(&self, id: EndId) -> Result<&End> {
        self.ends.get(id.0).ok_or(Error::UnknownEnd(id.0))
    }

    /// κ of the quadratic Ricci lower bound, estimated from warp samples.
    /// Metadata only.
    pub fn ricci_profile_kappa(&self) -> f64 {
        self.ricci_profile_kappa
    }

    /// Smallest admissible end-local radius.
    pub fn radial_floor(&self) -> f64 {
        match self.topology {
            Topology::SingleEnd { rho_min } => rho_min,
            Topology::DoubleEnd => 0.0,
        }
    }

    pub fn contains_radius(&self, id: EndId, s: f64) -> Result<bool> {
        let end = self.end(id)?;
        Ok(s.is_finite() && s >= self.radial_floor() && end.warp.value(s) > 0.0)
    }

    pub(crate) fn check_radius(&self, id: EndId, s: f64) -> Result<&End> {
        let end = self.end(id)?;
        if !self.contains_radius(id, s)? {
            return Err(Error::OutOfDomain { end: id.0, radius: s });
        }
        Ok(end)
    }

    /// Area of the link `L` of an end in its own metric.
    pub fn link_area(&self, id: EndId) -> Result<f64> {
        Ok(self.end(id)?.link.area(self.n))
    }

    /// Warp seen by the round unit-sphere metric, `a · f(r)`. Only defined
    /// for round links.
    pub fn effective_warp(&self, id: EndId) -> Result<(WarpProfile, f64)> {
        let end = self.end(id)?;
        let a = end.link.round_scale().ok_or_else(|| {
            Error::InvalidModel(format!(
                "{id}: grid solves need a round link, got an explicit-area link"
            ))
        })?;
        Ok((end.warp, a))
    }

    pub fn avr_of_end(&self, id: EndId) -> Result<f64> {
        let end = self.end(id)?;
        let c = end.warp.slope();
        Ok(c.powi(self.n as i32 - 1) * end.link.area(self.n) / unit_sphere_area(self.n - 1))
    }

    /// Sum of the per-end asymptotic volume ratios.
    pub fn avr(&self) -> f64 {
        self.ends.iter().map(|e| self.avr_of_end(e.id).expect("own end")).sum()
    }

    /// Area of the coordinate sphere `{ρ = s}` on one end.
    pub fn sphere_area(&self, id: EndId, s: f64) -> Result<f64> {
        let end = self.check_radius(id, s)?;
        Ok(end.warp.value(s).powi(self.n as i32 - 1) * end.link.area(self.n))
    }

    /// Volume of `{s1 ≤ ρ ≤ s2}` on one end.
    pub fn annulus_volume(&self, id: EndId, s1: f64, s2: f64) -> Result<f64> {
        if !(s1 < s2) {
            return Err(Error::InvalidArgument(format!(
                "annulus bounds must satisfy s1 < s2, got [{s1}, {s2}]"
            )));
        }
        let end = self.check_radius(id, s1)?;
        self.check_radius(id, s2)?;
        let e = (self.n - 1) as i32;
        let w = end.warp;
        let integral = if s1 > 0.0 {
            quadrature::integrate_default(
                |x: f64| {
                    let s = x.exp();
                    w.value(s).powi(e) * s
                },
                s1.ln(),
                s2.ln(),
            )?
        } else {
            quadrature::integrate_default(|s| w.value(s).powi(e), s1, s2)?
        };
        Ok(integral * end.link.area(self.n))
    }

    fn sampled_ricci_kappa(&self) -> f64 {
        let n = self.n as f64;
        let floor = self.radial_floor();
        let mut k2: f64 = 0.0;
        for end in &self.ends {
            let a = end.link.round_scale().unwrap_or(1.0);
            let mut rs: Vec<f64> = (-8..=16).map(|k| floor + 10f64.powf(k as f64 * 0.25)).collect();
            if self.topology == Topology::DoubleEnd {
                rs.push(0.0);
            }
            for r in rs {
                let f = a * end.warp.value(r);
                let df = a * end.warp.derivative(r);
                let d2f = a * end.warp.second_derivative(r);
                let ric_rad = -(n - 1.0) * d2f / f;
                let ric_tan = -d2f / f + (n - 2.0) * (1.0 - df * df) / (f * f);
                let lowest = ric_rad.min(ric_tan);
                k2 = k2.max(-lowest * (1.0 + r).powi(2) / (n - 1.0));
            }
        }
        k2.max(0.0).sqrt()
    }
}
