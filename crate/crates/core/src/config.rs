//! Experiment configuration: TOML parsing with aggregated, line-anchored
//! validation and a canonical serialization for hashing.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};
use toml::{Table, Value};

use crate::error::{ConfigIssue, Error, Result};
use crate::geometry::{
    make_model_with_floor, DomainSpec, EndDescriptor, GridSpec, LinkSpec, ManifoldModel, RadialSpacing, WarpProfile,
};
use crate::radial::{GAMMA_LADDER, MOSER_LADDER};
use crate::solver::{Formulation, InitialGuess, LinearSolver, SolverConfig};

/// One end as written in the configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndConfig {
    /// `cone`, `offset` or `smoothed`.
    pub warp: String,
    pub slope: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shift: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub core: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_area: Option<f64>,
}

impl EndConfig {
    pub fn descriptor(&self) -> EndDescriptor {
        let warp = match self.warp.as_str() {
            "offset" => WarpProfile::offset(self.slope, self.shift.unwrap_or(0.0)),
            "smoothed" => WarpProfile::smoothed(self.slope, self.core.unwrap_or(0.0)),
            _ => WarpProfile::cone(self.slope),
        };
        let link = match self.link_area {
            Some(area) => LinkSpec::ExplicitArea { area },
            None => LinkSpec::round(self.link_scale.unwrap_or(1.0)),
        };
        EndDescriptor::new(warp, link)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelConfig {
    pub dimension: usize,
    pub rho_min: f64,
    pub ends: Vec<EndConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Ladders {
    /// Blow-down radii; defaults depend on the pipeline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Vec<f64>>,
    /// Levels `t` of `{u = 1/t}` for scaling and eccentricity.
    pub t: Vec<f64>,
    /// Values `s` of the normalized potential `v` for level-set tables.
    pub v: Vec<f64>,
    /// Levels of `w` for the exponential growth table.
    pub growth: Vec<f64>,
    /// Moser exponents, descending.
    pub p: Vec<f64>,
    /// Order of the `s^{-order}` term removed by Richardson extrapolation.
    pub order: f64,
}

impl Default for Ladders {
    fn default() -> Self {
        Self {
            s: None,
            t: vec![2.0, 4.0, 8.0, 16.0],
            v: vec![8.0, 16.0, 32.0],
            growth: vec![2.0, 3.0, 4.0, 5.0, 6.0],
            p: MOSER_LADDER.to_vec(),
            order: 1.0,
        }
    }
}

/// Blow-down radii used when none are configured.
pub const GRID_S_LADDER: [f64; 3] = [8.0, 16.0, 32.0];

impl Ladders {
    /// Configured `s` ladder, or the default for radial or grid runs.
    pub fn s_or_default(&self, on_grid: bool) -> Vec<f64> {
        match (&self.s, on_grid) {
            (Some(s), _) => s.clone(),
            (None, true) => GRID_S_LADDER.to_vec(),
            (None, false) => GAMMA_LADDER.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    /// Output root; not part of the configuration hash.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub model: ModelConfig,
    pub domain: DomainSpec,
    /// Without a grid the domain must be a coordinate ball and the radial
    /// oracle replaces the PDE solver.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    pub solver: SolverConfig,
    pub ladders: Ladders,
}

impl ExperimentConfig {
    pub fn build_model(&self) -> Result<ManifoldModel> {
        let ends: Vec<EndDescriptor> = self.model.ends.iter().map(EndConfig::descriptor).collect();
        make_model_with_floor(self.model.dimension, &ends, self.model.rho_min)
    }

    /// Configuration as TOML in the accepted schema.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes to TOML")
    }

    /// Canonical JSON: the configuration without its output root.
    pub fn canonical_json(&self) -> String {
        let c = ExperimentConfig {
            output: None,
            ..self.clone()
        };
        serde_json::to_string(&c).expect("configuration serializes to JSON")
    }

    /// SHA-256 of the canonical JSON, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

/// Byte offsets of keys and array elements by dotted path.
struct Spans {
    offsets: BTreeMap<String, usize>,
    line_starts: Vec<usize>,
}

impl Spans {
    fn new(raw: &str) -> Self {
        let mut offsets = BTreeMap::new();
        if let Ok(doc) = toml::de::DeTable::parse(raw) {
            index_table(doc.get_ref(), "", &mut offsets);
        }
        let line_starts = std::iter::once(0)
            .chain(raw.match_indices('\n').map(|(i, _)| i + 1))
            .collect();
        Spans { offsets, line_starts }
    }

    fn line_of(&self, offset: usize) -> usize {
        self.line_starts.partition_point(|&s| s <= offset)
    }

    /// Line of `path`, falling back to the nearest located ancestor.
    fn line(&self, path: &str) -> Option<usize> {
        let mut p = path.to_string();
        loop {
            if let Some(&o) = self.offsets.get(&p) {
                return Some(self.line_of(o));
            }
            let cut = p.rfind(['.', '['])?;
            p.truncate(cut);
        }
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.to_string()
    } else {
        format!("{prefix}.{key}")
    }
}

fn index_table(t: &toml::de::DeTable, prefix: &str, out: &mut BTreeMap<String, usize>) {
    for (k, v) in t {
        let path = join(prefix, k.get_ref());
        out.insert(path.clone(), k.span().start);
        index_value(v.get_ref(), &path, out);
    }
}

fn index_value(v: &toml::de::DeValue, path: &str, out: &mut BTreeMap<String, usize>) {
    match v {
        toml::de::DeValue::Table(t) => index_table(t, path, out),
        toml::de::DeValue::Array(a) => {
            for (i, e) in a.iter().enumerate() {
                let p = format!("{path}[{i}]");
                out.entry(p.clone()).or_insert(e.span().start);
                index_value(e.get_ref(), &p, out);
            }
        }
        _ => {}
    }
}

/// Issue collector walking the parsed document.
struct Checker {
    spans: Spans,
    issues: Vec<ConfigIssue>,
}

impl Checker {
    fn issue(&mut self, path: &str, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            line: self.spans.line(path),
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn unknown_keys(&mut self, t: &Table, prefix: &str, allowed: &[&str]) {
        for k in t.keys() {
            if !allowed.contains(&k.as_str()) {
                self.issue(
                    &join(prefix, k),
                    format!("unknown key (expected one of: {})", allowed.join(", ")),
                );
            }
        }
    }

    fn sub_table<'a>(&mut self, t: &'a Table, prefix: &str, key: &str, required: bool) -> Option<&'a Table> {
        let path = join(prefix, key);
        match t.get(key) {
            Some(Value::Table(s)) => Some(s),
            Some(_) => {
                self.issue(&path, "expected a table");
                None
            }
            None => {
                if required {
                    self.issue(&path, "missing required table");
                }
                None
            }
        }
    }

    fn number(&mut self, t: &Table, prefix: &str, key: &str, required: bool) -> Option<f64> {
        let path = join(prefix, key);
        match t.get(key) {
            Some(Value::Float(x)) => Some(*x),
            Some(Value::Integer(i)) => Some(*i as f64),
            Some(_) => {
                self.issue(&path, "expected a number");
                None
            }
            None => {
                if required {
                    self.issue(&path, "missing required field");
                }
                None
            }
        }
    }

    fn positive(&mut self, t: &Table, prefix: &str, key: &str, required: bool) -> Option<f64> {
        let v = self.number(t, prefix, key, required)?;
        if !(v.is_finite() && v > 0.0) {
            self.issue(&join(prefix, key), format!("must be a positive finite number, got {v}"));
            return None;
        }
        Some(v)
    }

    fn integer(&mut self, t: &Table, prefix: &str, key: &str, required: bool) -> Option<i64> {
        let path = join(prefix, key);
        match t.get(key) {
            Some(Value::Integer(i)) => Some(*i),
            Some(_) => {
                self.issue(&path, "expected an integer");
                None
            }
            None => {
                if required {
                    self.issue(&path, "missing required field");
                }
                None
            }
        }
    }

    fn count(&mut self, t: &Table, prefix: &str, key: &str, min: i64, required: bool) -> Option<usize> {
        let v = self.integer(t, prefix, key, required)?;
        if v < min {
            self.issue(&join(prefix, key), format!("must be at least {min}, got {v}"));
            return None;
        }
        Some(v as usize)
    }

    fn string<'a>(&mut self, t: &'a Table, prefix: &str, key: &str, required: bool) -> Option<&'a str> {
        let path = join(prefix, key);
        match t.get(key) {
            Some(Value::String(s)) => Some(s),
            Some(_) => {
                self.issue(&path, "expected a string");
                None
            }
            None => {
                if required {
                    self.issue(&path, "missing required field");
                }
                None
            }
        }
    }

    fn choice<T: Copy>(&mut self, t: &Table, prefix: &str, key: &str, options: &[(&str, T)]) -> Option<T> {
        let s = self.string(t, prefix, key, false)?;
        match options.iter().find(|o| o.0 == s) {
            Some(o) => Some(o.1),
            None => {
                let names: Vec<&str> = options.iter().map(|o| o.0).collect();
                self.issue(
                    &join(prefix, key),
                    format!("unknown value {s:?} (expected one of: {})", names.join(", ")),
                );
                None
            }
        }
    }

    fn list(&mut self, t: &Table, prefix: &str, key: &str) -> Option<Vec<f64>> {
        let path = join(prefix, key);
        let arr = match t.get(key)? {
            Value::Array(a) => a,
            _ => {
                self.issue(&path, "expected an array of numbers");
                return None;
            }
        };
        let mut out = Vec::with_capacity(arr.len());
        for (i, v) in arr.iter().enumerate() {
            match v {
                Value::Float(x) => out.push(*x),
                Value::Integer(k) => out.push(*k as f64),
                _ => {
                    self.issue(&format!("{path}[{i}]"), "expected a number");
                    return None;
                }
            }
        }
        Some(out)
    }

    /// Positive, finite and strictly increasing, with at least `min` entries.
    fn ladder(&mut self, t: &Table, prefix: &str, key: &str, min: usize) -> Option<Vec<f64>> {
        let v = self.list(t, prefix, key)?;
        let path = join(prefix, key);
        if v.len() < min {
            self.issue(&path, format!("needs at least {min} entries, got {}", v.len()));
            return None;
        }
        if v.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            self.issue(&path, "entries must be positive and finite");
            return None;
        }
        if v.windows(2).any(|w| w[1] <= w[0]) {
            self.issue(&path, "entries must be strictly increasing");
            return None;
        }
        Some(v)
    }
}

const TOP_KEYS: &[&str] = &["preset", "output", "model", "domain", "grid", "solver", "ladders"];
const END_KEYS: &[&str] = &["warp", "slope", "shift", "core", "link_scale", "link_area"];
const SOLVER_KEYS: &[&str] = &[
    "p",
    "eps_min",
    "max_outer",
    "update_tol",
    "stage_tol",
    "linear_tol",
    "max_halvings",
    "formulation",
    "linear_solver",
    "initial_guess",
];

/// Parses and fully validates a configuration. Every problem found is
/// reported; nothing is accepted partially.
pub fn validate_config(raw: &str) -> Result<ExperimentConfig> {
    let doc: Table = match raw.parse() {
        Ok(t) => t,
        Err(e) => {
            let e: toml::de::Error = e;
            let line = e.span().map(|s| 1 + raw[..s.start].matches('\n').count());
            return Err(Error::InvalidConfig(vec![ConfigIssue {
                line,
                path: String::new(),
                message: e.message().trim().to_string(),
            }]));
        }
    };
    let mut c = Checker {
        spans: Spans::new(raw),
        issues: Vec::new(),
    };
    c.unknown_keys(&doc, "", TOP_KEYS);

    let preset = c.string(&doc, "", "preset", false).map(str::to_string);
    if let Some(p) = &preset {
        if crate::presets::Preset::from_name(p).is_none() {
            let names: Vec<&str> = crate::presets::Preset::ALL.iter().map(|p| p.name()).collect();
            c.issue(
                "preset",
                format!("unknown preset {p:?} (expected one of: {})", names.join(", ")),
            );
        }
    }
    let output = c.string(&doc, "", "output", false).map(PathBuf::from);

    let model = parse_model(&mut c, &doc);
    let n = model.as_ref().map(|m| m.dimension);
    let domain = parse_domain(&mut c, &doc);
    let grid = parse_grid(&mut c, &doc);
    let solver = parse_solver(&mut c, &doc, n);
    let ladders = parse_ladders(&mut c, &doc, n);

    if let (Some(m), Some(d)) = (&model, &domain) {
        let ends: Vec<EndDescriptor> = m.ends.iter().map(EndConfig::descriptor).collect();
        match make_model_with_floor(m.dimension, &ends, m.rho_min) {
            Ok(built) => {
                if let Err(e) = d.validate(built.radial_floor()) {
                    c.issue("domain", e.to_string());
                }
            }
            Err(e) => c.issue("model", e.to_string()),
        }
        if let Some(g) = &grid {
            if g.outer_radius <= d.max_radius() {
                c.issue(
                    "grid.outer_radius",
                    format!("must exceed the largest boundary radius {}", d.max_radius()),
                );
            }
        } else if !d.is_coordinate() {
            c.issue("grid", "a non-coordinate domain needs a [grid] table");
        }
    }
    if let (Some(g), Some(l)) = (&grid, &ladders) {
        let top = l.s_or_default(true).into_iter().fold(0.0, f64::max);
        if top > g.outer_radius {
            let path = if l.s.is_some() {
                "ladders.s"
            } else {
                "grid.outer_radius"
            };
            c.issue(
                path,
                format!(
                    "the s ladder reaches {top}, beyond the grid outer radius {}",
                    g.outer_radius
                ),
            );
        }
    }

    match (c.issues.is_empty(), model, domain, solver, ladders) {
        (true, Some(model), Some(domain), Some(solver), Some(ladders)) => Ok(ExperimentConfig {
            preset,
            output,
            model,
            domain,
            grid,
            solver,
            ladders,
        }),
        _ => {
            c.issues.sort_by_key(|i| (i.line.unwrap_or(usize::MAX), i.path.clone()));
            Err(Error::InvalidConfig(c.issues))
        }
    }
}

fn parse_model(c: &mut Checker, doc: &Table) -> Option<ModelConfig> {
    let t = c.sub_table(doc, "", "model", true)?;
    c.unknown_keys(t, "model", &["dimension", "rho_min", "ends"]);
    let dimension = c.count(t, "model", "dimension", 3, true);
    let rho_min = match c.number(t, "model", "rho_min", false) {
        Some(r) if !(r.is_finite() && r >= 0.0) => {
            c.issue("model.rho_min", format!("must be finite and nonnegative, got {r}"));
            None
        }
        Some(r) => Some(r),
        None => Some(0.0),
    };
    let ends = match t.get("ends") {
        Some(Value::Array(a)) if (1..=2).contains(&a.len()) => {
            let parsed: Vec<Option<EndConfig>> = a
                .iter()
                .enumerate()
                .map(|(i, e)| parse_end(c, e, &format!("model.ends[{i}]")))
                .collect();
            parsed.into_iter().collect::<Option<Vec<_>>>()
        }
        Some(Value::Array(a)) => {
            c.issue("model.ends", format!("a model has 1 or 2 ends, got {}", a.len()));
            None
        }
        Some(_) => {
            c.issue("model.ends", "expected an array of tables ([[model.ends]])");
            None
        }
        None => {
            c.issue("model.ends", "missing required field");
            None
        }
    };
    Some(ModelConfig {
        dimension: dimension?,
        rho_min: rho_min?,
        ends: ends?,
    })
}

fn parse_end(c: &mut Checker, v: &Value, path: &str) -> Option<EndConfig> {
    let Value::Table(t) = v else {
        c.issue(path, "expected a table");
        return None;
    };
    c.unknown_keys(t, path, END_KEYS);
    let warp = c.choice(
        t,
        path,
        "warp",
        &[("cone", "cone"), ("offset", "offset"), ("smoothed", "smoothed")],
    );
    if warp.is_none() && !t.contains_key("warp") {
        c.issue(&join(path, "warp"), "missing required field");
    }
    let slope = c.positive(t, path, "slope", true);
    let mut shift = None;
    let mut core = None;
    match warp {
        Some("offset") => {
            shift = c.number(t, path, "shift", true);
            if shift.is_some_and(|s| !s.is_finite()) {
                c.issue(&join(path, "shift"), "must be finite");
            }
        }
        Some("smoothed") => core = c.positive(t, path, "core", true),
        _ => {}
    }
    for (key, allowed) in [("shift", warp == Some("offset")), ("core", warp == Some("smoothed"))] {
        if t.contains_key(key) && !allowed && warp.is_some() {
            c.issue(&join(path, key), format!("not used by a {} warp", warp.unwrap_or("")));
        }
    }
    let link_scale = c.positive(t, path, "link_scale", false);
    let link_area = c.positive(t, path, "link_area", false);
    if t.contains_key("link_scale") && t.contains_key("link_area") {
        c.issue(path, "give at most one of link_scale and link_area");
    }
    Some(EndConfig {
        warp: warp?.to_string(),
        slope: slope?,
        shift,
        core,
        link_scale: if link_area.is_none() {
            Some(link_scale.unwrap_or(1.0))
        } else {
            None
        },
        link_area,
    })
}

fn parse_domain(c: &mut Checker, doc: &Table) -> Option<DomainSpec> {
    let t = c.sub_table(doc, "", "domain", true)?;
    let kind = c.choice(
        t,
        "domain",
        "kind",
        &[("coordinate", 0), ("ellipsoid", 1), ("harmonic", 2)],
    );
    if !t.contains_key("kind") {
        c.issue("domain.kind", "missing required field");
    }
    match kind? {
        0 => {
            c.unknown_keys(t, "domain", &["kind", "radius"]);
            Some(DomainSpec::Coordinate {
                radius: c.positive(t, "domain", "radius", true)?,
            })
        }
        1 => {
            c.unknown_keys(t, "domain", &["kind", "axial", "equatorial"]);
            let axial = c.positive(t, "domain", "axial", true);
            let equatorial = c.positive(t, "domain", "equatorial", true);
            Some(DomainSpec::Ellipsoid {
                axial: axial?,
                equatorial: equatorial?,
            })
        }
        _ => {
            c.unknown_keys(t, "domain", &["kind", "radius", "amplitude", "mode"]);
            let radius = c.positive(t, "domain", "radius", true);
            let amplitude = c.number(t, "domain", "amplitude", true);
            if amplitude.is_some_and(|a| !(a.abs() < 1.0)) {
                c.issue("domain.amplitude", "must lie in (-1, 1)");
            }
            let mode = c.count(t, "domain", "mode", 0, true);
            Some(DomainSpec::Harmonic {
                radius: radius?,
                amplitude: amplitude.filter(|a| a.abs() < 1.0)?,
                mode: u32::try_from(mode?).ok()?,
            })
        }
    }
}

fn parse_grid(c: &mut Checker, doc: &Table) -> Option<GridSpec> {
    let t = c.sub_table(doc, "", "grid", false)?;
    c.unknown_keys(t, "grid", &["outer_radius", "radial_cells", "angular_cells", "spacing"]);
    let outer = c.positive(t, "grid", "outer_radius", true);
    let radial = c.count(t, "grid", "radial_cells", 8, true);
    let angular = c.count(t, "grid", "angular_cells", 8, true);
    let spacing = match t.get("spacing") {
        None => Some(RadialSpacing::LogUniform),
        Some(Value::String(s)) if s == "log-uniform" => Some(RadialSpacing::LogUniform),
        Some(Value::Table(s)) => {
            c.unknown_keys(s, "grid.spacing", &["kind", "ratio"]);
            match c.choice(
                s,
                "grid.spacing",
                "kind",
                &[("log-uniform", false), ("geometric", true)],
            ) {
                Some(false) => Some(RadialSpacing::LogUniform),
                Some(true) => match c.number(s, "grid.spacing", "ratio", true) {
                    Some(r) if (1.0..=1.2).contains(&r) => Some(RadialSpacing::Geometric { ratio: r }),
                    Some(r) => {
                        c.issue("grid.spacing.ratio", format!("must lie in [1, 1.2], got {r}"));
                        None
                    }
                    None => None,
                },
                None => {
                    if !s.contains_key("kind") {
                        c.issue("grid.spacing.kind", "missing required field");
                    }
                    None
                }
            }
        }
        Some(_) => {
            c.issue(
                "grid.spacing",
                "expected \"log-uniform\" or a table { kind = \"geometric\", ratio = ... }",
            );
            None
        }
    };
    Some(GridSpec {
        outer_radius: outer?,
        radial_cells: radial?,
        angular_cells: angular?,
        spacing: spacing?,
    })
}

fn parse_solver(c: &mut Checker, doc: &Table, n: Option<usize>) -> Option<SolverConfig> {
    let mut cfg = SolverConfig::default();
    let Some(t) = c.sub_table(doc, "", "solver", false) else {
        return Some(cfg);
    };
    c.unknown_keys(t, "solver", SOLVER_KEYS);
    let mut ok = true;
    if let Some(p) = c.number(t, "solver", "p", false) {
        cfg.p = p;
    }
    if let Some(n) = n {
        if !(cfg.p > 1.0 && cfg.p < n as f64) {
            c.issue("solver.p", format!("p must lie in (1, n) = (1, {n}), got {}", cfg.p));
            ok = false;
        }
    }
    if t.contains_key("eps_min") {
        cfg.eps_min = c.positive(t, "solver", "eps_min", false);
        ok &= cfg.eps_min.is_some();
    }
    for (key, slot) in [
        ("update_tol", &mut cfg.update_tol),
        ("stage_tol", &mut cfg.stage_tol),
        ("linear_tol", &mut cfg.linear_tol),
    ] {
        if t.contains_key(key) {
            match c.positive(t, "solver", key, false) {
                Some(v) => *slot = v,
                None => ok = false,
            }
        }
    }
    for (key, slot, min) in [
        ("max_outer", &mut cfg.max_outer, 1),
        ("max_halvings", &mut cfg.max_halvings, 0),
    ] {
        if t.contains_key(key) {
            match c.count(t, "solver", key, min, false) {
                Some(v) => *slot = v,
                None => ok = false,
            }
        }
    }
    macro_rules! pick {
        ($key:literal, $slot:expr, $opts:expr) => {
            if t.contains_key($key) {
                match c.choice(t, "solver", $key, $opts) {
                    Some(v) => $slot = v,
                    None => ok = false,
                }
            }
        };
    }
    pick!(
        "formulation",
        cfg.formulation,
        &[
            ("auto", Formulation::Auto),
            ("potential", Formulation::Potential),
            ("moser", Formulation::Moser)
        ]
    );
    pick!(
        "linear_solver",
        cfg.linear_solver,
        &[("pcg", LinearSolver::Pcg), ("banded-lu", LinearSolver::BandedLu)]
    );
    pick!(
        "initial_guess",
        cfg.initial_guess,
        &[
            ("radial", InitialGuess::Radial),
            ("cone-power", InitialGuess::ConePower)
        ]
    );
    ok.then_some(cfg)
}

fn parse_ladders(c: &mut Checker, doc: &Table, n: Option<usize>) -> Option<Ladders> {
    let mut l = Ladders::default();
    let Some(t) = c.sub_table(doc, "", "ladders", false) else {
        return Some(l);
    };
    c.unknown_keys(t, "ladders", &["s", "t", "v", "growth", "p", "order"]);
    let mut ok = true;
    if t.contains_key("s") {
        l.s = c.ladder(t, "ladders", "s", 3);
        ok &= l.s.is_some();
    }
    for (key, slot, min) in [("t", &mut l.t, 2), ("v", &mut l.v, 2), ("growth", &mut l.growth, 2)] {
        if t.contains_key(key) {
            match c.ladder(t, "ladders", key, min) {
                Some(v) => *slot = v,
                None => ok = false,
            }
        }
    }
    if t.contains_key("p") {
        match c.list(t, "ladders", "p") {
            Some(p) if p.len() < 3 => {
                c.issue("ladders.p", format!("needs at least 3 exponents, got {}", p.len()));
                ok = false;
            }
            Some(p) => {
                let hi = n.map_or(f64::INFINITY, |n| n as f64);
                if p.iter().any(|x| !(*x > 1.0 && *x < hi)) {
                    c.issue("ladders.p", "p must lie in (1, n) for every ladder entry");
                    ok = false;
                } else if p.windows(2).any(|w| w[1] >= w[0]) {
                    c.issue("ladders.p", "exponents must be strictly decreasing");
                    ok = false;
                } else {
                    l.p = p;
                }
            }
            None => ok = false,
        }
    }
    if let Some(o) = c.positive(t, "ladders", "order", false) {
        l.order = o;
    } else if t.contains_key("order") {
        ok = false;
    }
    ok.then_some(l)
}

#[cfg(test)]
mod tests {
    use super::*;

    const FLAT_BALL: &str = "
[model]
dimension = 3

[[model.ends]]
warp = \"cone\"
slope = 1.0

[domain]
kind = \"coordinate\"
radius = 1.0
";

    fn issues(raw: &str) -> Vec<ConfigIssue> {
        match validate_config(raw) {
            Err(Error::InvalidConfig(v)) => v,
            other => panic!("expected invalid config, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = validate_config(FLAT_BALL).unwrap();
        assert_eq!(c.solver, SolverConfig::default());
        assert_eq!(c.ladders, Ladders::default());
        assert_eq!(c.model.ends[0].link_scale, Some(1.0));
        assert!(c.grid.is_none());
        assert_eq!(c.build_model().unwrap().avr(), 1.0);
    }

    #[test]
    fn p_outside_range() {
        let raw = format!("{FLAT_BALL}\n[solver]\np = 5\n");
        let v = issues(&raw);
        assert_eq!(v.len(), 1);
        assert!(v[0].message.contains("p must lie in (1, n)"), "{}", v[0]);
        assert_eq!(v[0].line, Some(14));
    }

    #[test]
    fn missing_slope_names_field() {
        let raw = FLAT_BALL.replace("slope = 1.0\n", "");
        let v = issues(&raw);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "model.ends[0].slope");
        assert!(v[0].line.is_some());
    }

    #[test]
    fn issues_are_aggregated() {
        let raw = FLAT_BALL.replace("radius = 1.0", "radius = -1.0\ncolor = 3") + "\n[ladders]\ns = [3, 2, 1]\n";
        let v = issues(&raw);
        let paths: Vec<&str> = v.iter().map(|i| i.path.as_str()).collect();
        assert!(paths.contains(&"domain.radius"), "{paths:?}");
        assert!(paths.contains(&"domain.color"), "{paths:?}");
        assert!(paths.contains(&"ladders.s"), "{paths:?}");
        let color = v.iter().find(|i| i.path == "domain.color").unwrap();
        assert_eq!(color.line, Some(12));
    }

    #[test]
    fn syntax_error_has_line() {
        let v = issues("[model]\ndimension = = 3\n");
        assert_eq!(v[0].line, Some(2));
    }

    #[test]
    fn ellipsoid_needs_grid() {
        let raw = FLAT_BALL.replace(
            "kind = \"coordinate\"\nradius = 1.0",
            "kind = \"ellipsoid\"\naxial = 2\nequatorial = 1",
        );
        let v = issues(&raw);
        assert_eq!(v[0].path, "grid");
    }

    #[test]
    fn s_ladder_must_fit_the_grid() {
        let grid = "\n[grid]\nouter_radius = 16\nradial_cells = 8\nangular_cells = 8\n";
        let v = issues(&format!("{FLAT_BALL}{grid}"));
        assert_eq!(v[0].path, "grid.outer_radius");
        assert!(v[0].message.contains("reaches 32"), "{}", v[0].message);
        let v = issues(&format!("{FLAT_BALL}{grid}[ladders]\ns = [2, 4, 20]\n"));
        assert_eq!(v[0].path, "ladders.s");
        assert!(validate_config(&format!("{FLAT_BALL}{grid}[ladders]\ns = [2, 4, 8]\n")).is_ok());
    }

    #[test]
    fn unknown_preset_rejected() {
        let v = issues(&format!("preset = \"nope\"\n{FLAT_BALL}"));
        assert_eq!(v[0].path, "preset");
    }

    #[test]
    fn hash_stable_under_reserialization() {
        let raw = format!(
            "{FLAT_BALL}\n[grid]\nouter_radius = 64\nradial_cells = 32\nangular_cells = 8\nspacing = {{ kind = \"geometric\", ratio = 1.1 }}\n\
             [solver]\np = 1.5\neps_min = 1e-9\nlinear_solver = \"banded-lu\"\n[ladders]\ns = [10, 20, 40]\n"
        );
        let c = validate_config(&raw).unwrap();
        let again = validate_config(&c.to_toml()).unwrap();
        assert_eq!(c, again);
        assert_eq!(c.hash(), again.hash());
        assert_eq!(c.hash().len(), 64);
        let moved = ExperimentConfig {
            output: Some("elsewhere".into()),
            ..c.clone()
        };
        assert_eq!(moved.hash(), c.hash());
    }
}
