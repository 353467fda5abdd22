//! Preset experiments: each runs one pipeline on a configuration and
//! returns its tables, reports and acceptance checks.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::asymptotics::{asymptotics_report, AsymptoticsReport};
use crate::capacity::{
    capacity_level_sets, capacity_report, deviations_decrease, eccentricity, level_area_volume, per_end_capacity,
    Potential,
};
use crate::config::ExperimentConfig;
use crate::error::{ConfigIssue, Error, Result};
use crate::geometry::{build_grid, EndId, ManifoldModel};
use crate::imcf::{
    hull_area_estimate, hull_area_from_capacities, imcf_report, ladder_capacities, p_to_one_extrapolate,
    solve_moser_ladder, Imcf, ImcfField, ImcfReport,
};
use crate::radial::{radial_imcf_with_ladder, radial_potential, RadialImcf, RadialSolution};
use crate::solver::{solve_p_laplace, DiscreteField, ResidualStats};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    Thm1Potential,
    Thm2Imcf,
    ScalingLaw,
    Liyau,
    Eccentricity,
    LevelAreas,
    TwoEnds,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::Thm1Potential,
        Preset::Thm2Imcf,
        Preset::ScalingLaw,
        Preset::Liyau,
        Preset::Eccentricity,
        Preset::LevelAreas,
        Preset::TwoEnds,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Preset::Thm1Potential => "thm1-potential",
            Preset::Thm2Imcf => "thm2-imcf",
            Preset::ScalingLaw => "scaling-law",
            Preset::Liyau => "liyau",
            Preset::Eccentricity => "eccentricity",
            Preset::LevelAreas => "level-areas",
            Preset::TwoEnds => "two-ends",
        }
    }

    pub fn from_name(name: &str) -> Option<Preset> {
        Preset::ALL.into_iter().find(|p| p.name() == name)
    }

    /// The result the preset checks.
    pub fn statement(self) -> &'static str {
        match self {
            Preset::Thm1Potential => {
                "Asymptotic behaviour of the p-capacitary potential: on each end, rho^((n-p)/(p-1)) u tends to \
                 gamma = (C_p/AVR)^(1/(p-1)), with C_p the per-end normalized capacity"
            }
            Preset::Thm2Imcf => {
                "Asymptotic behaviour of the weak inverse mean curvature flow: w - (n-1) ln rho tends to \
                 -ln(|boundary of the strictly outward minimizing hull| / (AVR |S^(n-1)|))"
            }
            Preset::ScalingLaw => "Scaling of the normalized capacity of the superlevel sets {u >= 1/t} as t^(p-1)",
            Preset::Liyau => {
                "Two-sided power bounds of the potential by rho^(-(n-p)/(p-1)) and the matching gradient bound \
                 sup rho |grad u| / u"
            }
            Preset::Eccentricity => "Monotone decay of the eccentricity R(t)/r(t) of the level sets {u = 1/t}",
            Preset::LevelAreas => {
                "Limits of the normalized areas, volumes and capacities of the sublevel sets of the normalized \
                 potential v"
            }
            Preset::TwoEnds => "Splitting of the capacity and of the volume ratio into contributions of the two ends",
        }
    }
}

/// One acceptance check.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    /// Upper bound on `value`; absent for pass/fail properties.
    pub tolerance: Option<f64>,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, tolerance: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass: value <= tolerance,
            value,
            tolerance: Some(tolerance),
            detail: detail.into(),
        }
    }

    fn holds(name: impl Into<String>, pass: bool, value: f64, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            value,
            tolerance: None,
            pass,
            detail: detail.into(),
        }
    }
}

/// Plot layout of a table: column indices of `x` and the plotted `y`.
#[derive(Clone, Debug, Serialize)]
pub struct Plot {
    pub x: usize,
    pub y: Vec<usize>,
    pub logx: bool,
    pub logy: bool,
}

/// A table written as CSV, with `#` header comments.
#[derive(Clone, Debug, Serialize)]
pub struct TableOut {
    pub name: String,
    pub comments: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    pub plot: Option<Plot>,
}

impl TableOut {
    fn new(name: &str, comments: &[&str], columns: &[&str]) -> Self {
        TableOut {
            name: name.to_string(),
            comments: comments.iter().map(|s| s.to_string()).collect(),
            columns: columns.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
            plot: None,
        }
    }

    fn plot(mut self, x: usize, y: &[usize], logx: bool, logy: bool) -> Self {
        self.plot = Some(Plot {
            x,
            y: y.to_vec(),
            logx,
            logy,
        });
        self
    }
}

/// Everything a preset produces before it is written to disk.
#[derive(Clone, Debug, Serialize)]
pub struct PresetOutput {
    pub preset: Preset,
    pub statement: String,
    pub tables: Vec<TableOut>,
    pub reports: Value,
    pub checks: Vec<Check>,
}

impl PresetOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn end_no(e: EndId) -> f64 {
    (e.0 + 1) as f64
}

/// Tolerances of the radial oracle and of the grid solver.
fn tol(on_grid: bool, radial: f64, grid: f64) -> f64 {
    if on_grid {
        grid
    } else {
        radial
    }
}

/// Potentials of one run, one per end.
enum Solved {
    Radial(Vec<RadialSolution>),
    Field(Vec<(DiscreteField, ResidualStats)>),
}

impl Solved {
    fn sources(&self) -> Vec<Potential<'_>> {
        match self {
            Solved::Radial(v) => v.iter().map(Potential::from).collect(),
            Solved::Field(v) => v.iter().map(|(f, _)| Potential::from(f)).collect(),
        }
    }

    fn stats(&self) -> Value {
        match self {
            Solved::Radial(_) => Value::Null,
            Solved::Field(v) => json!(v.iter().map(|x| &x.1).collect::<Vec<_>>()),
        }
    }
}

fn coordinate_radius(config: &ExperimentConfig) -> Result<f64> {
    match config.domain {
        crate::geometry::DomainSpec::Coordinate { radius } => Ok(radius),
        _ => Err(Error::InvalidConfig(vec![ConfigIssue {
            line: None,
            path: "grid".into(),
            message: "a non-coordinate domain needs a [grid] table".into(),
        }])),
    }
}

/// Solves for the potential on every end, in parallel across ends.
fn solve_all(model: &ManifoldModel, config: &ExperimentConfig) -> Result<Solved> {
    let ends: Vec<EndId> = model.end_ids().collect();
    let p = config.solver.p;
    match &config.grid {
        None => {
            let r = coordinate_radius(config)?;
            Ok(Solved::Radial(
                ends.iter()
                    .map(|&e| radial_potential(model, e, r, p))
                    .collect::<Result<_>>()?,
            ))
        }
        Some(spec) => Ok(Solved::Field(
            ends.par_iter()
                .map(|&e| {
                    let g = Arc::new(build_grid(model, e, &config.domain, spec)?);
                    config.solver.validate(model.dimension())?;
                    solve_p_laplace(model, &config.domain, &g, &config.solver)
                })
                .collect::<Result<_>>()?,
        )),
    }
}

/// Runs the pipeline of `preset` on a validated configuration.
pub fn run_pipeline(preset: Preset, config: &ExperimentConfig) -> Result<PresetOutput> {
    let model = config.build_model()?;
    let (tables, reports, checks) = match preset {
        Preset::Thm1Potential => thm1(&model, config)?,
        Preset::Thm2Imcf => thm2(&model, config)?,
        Preset::ScalingLaw => scaling(&model, config)?,
        Preset::Liyau => liyau(&model, config)?,
        Preset::Eccentricity => ecc(&model, config)?,
        Preset::LevelAreas => level_areas(&model, config)?,
        Preset::TwoEnds => two_ends(&model, config)?,
    };
    Ok(PresetOutput {
        preset,
        statement: preset.statement().to_string(),
        tables,
        reports,
        checks,
    })
}

type Parts = (Vec<TableOut>, Value, Vec<Check>);

fn asymptotics_all(
    model: &ManifoldModel,
    config: &ExperimentConfig,
    solved: &Solved,
) -> Result<Vec<AsymptoticsReport>> {
    let sources = solved.sources();
    let caps = per_end_capacity(model, &sources)?;
    let s = config.ladders.s_or_default(config.grid.is_some());
    sources
        .iter()
        .map(|src| {
            let c = caps.of(src.end()).expect("every end has a capacity");
            asymptotics_report(model, *src, c, &s, config.ladders.order)
        })
        .collect()
}

fn thm1(model: &ManifoldModel, config: &ExperimentConfig) -> Result<Parts> {
    let solved = solve_all(model, config)?;
    let reports = asymptotics_all(model, config, &solved)?;
    let on_grid = config.grid.is_some();
    let mut gamma = TableOut::new(
        "gamma_ladder",
        &[
            "blow-down profile s^((n-p)/(p-1)) u on the sphere rho = s",
            "gamma_formula = (C_p/AVR)^(1/(p-1)) per end",
        ],
        &["end", "s", "mean", "sup", "inf", "osc", "gamma_formula"],
    )
    .plot(1, &[2, 6], true, false);
    let mut summary = TableOut::new(
        "gamma_summary",
        &["Richardson limit of the sphere means against the capacity formula"],
        &[
            "end",
            "p",
            "capacity",
            "avr",
            "gamma_measured",
            "gamma_formula",
            "residual",
            "spread",
        ],
    );
    let mut checks = Vec::new();
    for r in &reports {
        for row in &r.profile {
            gamma.rows.push(vec![
                end_no(r.end),
                row.s,
                row.mean,
                row.sup,
                row.inf,
                row.osc,
                r.gamma.formula,
            ]);
        }
        summary.rows.push(vec![
            end_no(r.end),
            r.p,
            r.capacity,
            r.avr,
            r.gamma.measured,
            r.gamma.formula,
            r.gamma.residual,
            r.gamma.spread,
        ]);
        let e = r.end.0 + 1;
        checks.push(Check::at_most(
            format!("gamma residual E{e}"),
            r.gamma.residual,
            tol(on_grid, 1e-4, 2e-2),
            "|gamma_measured - gamma_formula| / gamma_formula",
        ));
        let osc: Vec<f64> = r.profile.iter().map(|x| x.osc).collect();
        checks.push(Check::holds(
            format!("blow-down oscillation E{e}"),
            deviations_decrease(&osc, 1e-12),
            *osc.last().unwrap_or(&0.0),
            "osc(s) non-increasing along the s ladder",
        ));
    }
    let reports = json!({ "asymptotics": reports, "solver": solved.stats() });
    Ok((vec![gamma, summary], reports, checks))
}

/// Extrapolated flow and hull area on one end.
enum Flow {
    Radial(RadialImcf),
    Field(ImcfField),
}

impl Flow {
    fn as_imcf(&self) -> Imcf<'_> {
        match self {
            Flow::Radial(r) => Imcf::Radial(r),
            Flow::Field(f) => Imcf::Field(f),
        }
    }
}

fn thm2(model: &ManifoldModel, config: &ExperimentConfig) -> Result<Parts> {
    let ladder = &config.ladders.p;
    let on_grid = config.grid.is_some();
    let s = config.ladders.s_or_default(on_grid);
    let reports: Vec<(ImcfReport, bool)> = model
        .end_ids()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&end| {
            let (flow, hull) = match &config.grid {
                None => {
                    let r = coordinate_radius(config)?;
                    let hull = hull_area_estimate(model, &config.domain, end, ladder, None)?;
                    (Flow::Radial(radial_imcf_with_ladder(model, end, r, ladder)?), hull)
                }
                Some(spec) => {
                    let g = Arc::new(build_grid(model, end, &config.domain, spec)?);
                    let fields: Vec<DiscreteField> =
                        solve_moser_ladder(model, &config.domain, &g, &config.solver, ladder)?
                            .into_iter()
                            .map(|x| x.0)
                            .collect();
                    let hull = hull_area_from_capacities(end, model.dimension(), &ladder_capacities(&fields)?)?;
                    (Flow::Field(p_to_one_extrapolate(&fields)?), hull)
                }
            };
            let exact = matches!(&flow, Flow::Radial(r) if r.is_exact());
            let rep = imcf_report(
                model,
                flow.as_imcf(),
                hull,
                &s,
                &config.ladders.growth,
                config.ladders.order,
            )?;
            Ok((rep, exact))
        })
        .collect::<Result<_>>()?;

    let mut constant = TableOut::new(
        "imcf_constant",
        &[
            "sphere means of w - (n-1) ln rho along the s ladder",
            "kappa_predicted = -ln(|boundary of the hull| / (AVR |S^(n-1)|))",
        ],
        &["end", "s", "mean", "osc", "kappa_predicted"],
    )
    .plot(1, &[2, 4], true, false);
    let mut growth = TableOut::new(
        "area_growth",
        &["area of the boundary of {w <= t} and its ratio to e^t"],
        &["end", "t", "area", "ratio"],
    )
    .plot(1, &[3], false, false);
    let mut hull = TableOut::new(
        "hull_area",
        &["per-end capacities along the p ladder; their p -> 1 limit times |S^(n-1)| is the hull area"],
        &["end", "p", "capacity", "minus_log_capacity_ratio"],
    )
    .plot(1, &[2], false, false);
    let mut checks = Vec::new();
    for (r, exact) in &reports {
        let e = end_no(r.end);
        for &(s, mean, osc) in &r.constant.ladder {
            constant.rows.push(vec![e, s, mean, osc, r.constant.predicted]);
        }
        for row in &r.growth.rows {
            growth.rows.push(vec![e, row.t, row.area, row.ratio]);
        }
        for (&(p, c), &(_, q)) in r.hull.ladder.iter().zip(&r.coherence.ladder) {
            hull.rows.push(vec![e, p, c, q]);
        }
        let k = r.end.0 + 1;
        checks.push(Check::at_most(
            format!("kappa residual E{k}"),
            r.constant.residual,
            0.05,
            "|kappa_measured - kappa_predicted| / max(1, |kappa_predicted|)",
        ));
        checks.push(Check::at_most(
            format!("area growth deviation E{k}"),
            r.growth.deviation,
            0.05,
            "(max - min) / mean of |boundary of {w <= t}| e^(-t)",
        ));
        if *exact {
            checks.push(Check::at_most(
                format!("cone additive constant E{k}"),
                r.constant.measured.abs(),
                1e-6,
                "|w - (n-1) ln rho| on an exact cone",
            ));
        }
    }
    let reports: Vec<&ImcfReport> = reports.iter().map(|x| &x.0).collect();
    Ok((vec![constant, growth, hull], json!({ "imcf": reports }), checks))
}

fn scaling(model: &ManifoldModel, config: &ExperimentConfig) -> Result<Parts> {
    let solved = solve_all(model, config)?;
    let rep = capacity_report(model, &solved.sources(), &config.ladders.t)?;
    let mut t = TableOut::new(
        "scaling",
        &[
            "level flux of {u = 1/t} and the capacity of {u >= 1/t} rescaled by t^(-(p-1))",
            "residual = |scaled - C_p| / C_p",
        ],
        &["end", "t", "level_flux", "capacity_t", "scaled", "residual"],
    )
    .plot(1, &[4], true, false);
    for r in &rep.scaling {
        t.rows.push(vec![
            end_no(r.end),
            r.t,
            r.level_flux,
            r.capacity_t,
            r.scaled,
            r.residual,
        ]);
    }
    let checks = vec![Check::at_most(
        "scaling spread",
        rep.scaling_spread,
        0.005,
        "relative spread of C_p({u >= 1/t}) t^(-(p-1)) over the t ladder",
    )];
    Ok((vec![t], json!({ "capacity": rep, "solver": solved.stats() }), checks))
}

fn liyau(model: &ManifoldModel, config: &ExperimentConfig) -> Result<Parts> {
    let solved = solve_all(model, config)?;
    let reports = asymptotics_all(model, config, &solved)?;
    let on_grid = config.grid.is_some();
    let mut band = TableOut::new(
        "liyau",
        &["extremes of u rho^((n-p)/(p-1)) on the sphere rho = s"],
        &["end", "s", "min_ratio", "max_ratio"],
    )
    .plot(1, &[2, 3], true, false);
    let mut grad = TableOut::new(
        "gradient_bound",
        &["sup over rho = s of rho |grad u| / u and its cone limit (n-p)/(p-1)"],
        &["end", "s", "value", "limit"],
    )
    .plot(1, &[2, 3], true, false);
    let mut checks = Vec::new();
    for r in &reports {
        let e = r.end.0 + 1;
        for row in &r.liyau.table {
            band.rows.push(vec![end_no(r.end), row.s, row.min_ratio, row.max_ratio]);
        }
        for row in &r.gradient {
            grad.rows.push(vec![end_no(r.end), row.s, row.value, r.gradient_limit]);
        }
        checks.push(Check::holds(
            format!("two-sided band E{e}"),
            r.liyau.constant.is_finite() && r.liyau.brackets(r.gamma.formula, tol(on_grid, 1e-4, 2e-2)),
            r.liyau.constant,
            format!(
                "band [{}, {}] brackets gamma = {}",
                r.liyau.band_min, r.liyau.band_max, r.gamma.formula
            ),
        ));
        let sup = r.gradient.iter().map(|x| x.value).fold(0.0, f64::max);
        checks.push(Check::holds(
            format!("gradient bound E{e}"),
            sup.is_finite(),
            sup,
            "sup_s sup_{rho = s} rho |grad u| / u",
        ));
        if !on_grid {
            if let Some(row) = r.gradient.iter().find(|x| x.s >= 1e3) {
                checks.push(Check::at_most(
                    format!("gradient cone limit E{e}"),
                    (row.value / r.gradient_limit - 1.0).abs(),
                    0.01,
                    format!("relative distance to (n-p)/(p-1) at s = {}", row.s),
                ));
            }
        }
    }
    Ok((
        vec![band, grad],
        json!({ "asymptotics": reports, "solver": solved.stats() }),
        checks,
    ))
}

fn ecc(model: &ManifoldModel, config: &ExperimentConfig) -> Result<Parts> {
    let solved = solve_all(model, config)?;
    let mut levels = vec![1.0];
    levels.extend(config.ladders.t.iter().filter(|&&t| t > 1.0));
    let mut table = TableOut::new(
        "eccentricity",
        &["R(t)/r(t) of the level set {u = 1/t}; t = 1 is the boundary"],
        &["end", "t", "r_min", "r_max", "ecc"],
    )
    .plot(1, &[4], true, false);
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for src in solved.sources() {
        let e = src.end().0 + 1;
        let rep = eccentricity(model, src, &levels)?;
        for r in &rep.rows {
            table.rows.push(vec![end_no(src.end()), r.t, r.r_min, r.r_max, r.ecc]);
        }
        match src {
            Potential::Radial(_) => {
                let worst = rep.rows.iter().map(|r| (r.ecc - 1.0).abs()).fold(0.0, f64::max);
                checks.push(Check::at_most(
                    format!("radial eccentricity E{e}"),
                    worst,
                    1e-6,
                    "max |ecc - 1|",
                ));
            }
            Potential::Field(_) => checks.push(Check::at_most(
                format!("eccentricity non-increasing E{e}"),
                rep.max_increase,
                rep.tolerance,
                "largest increase of ecc between consecutive levels",
            )),
        }
        reports.push(rep);
    }
    Ok((
        vec![table],
        json!({ "eccentricity": reports, "solver": solved.stats() }),
        checks,
    ))
}

fn level_areas(model: &ManifoldModel, config: &ExperimentConfig) -> Result<Parts> {
    let solved = solve_all(model, config)?;
    let sources = solved.sources();
    let caps = per_end_capacity(model, &sources)?;
    let ladder = &config.ladders.v;
    // deviations below the solver tolerance carry no trend
    let floor = tol(config.grid.is_some(), 1e-12, 1e-8);
    let mut av = TableOut::new(
        "level_areas",
        &[
            "area of {v = s} over s^(n-1) |S^(n-1)| and volume of {v <= s} over s^n |B^n|",
            "both ratios tend to the per-end AVR",
        ],
        &[
            "end",
            "s",
            "level",
            "area",
            "volume",
            "area_ratio",
            "volume_ratio",
            "avr",
        ],
    )
    .plot(1, &[5, 6, 7], true, false);
    let mut lc = TableOut::new(
        "level_capacity",
        &["capacity of {v <= s} over s^(n-p) |S^(n-1)| and its limit ((n-p)/(p-1))^(p-1) AVR"],
        &["end", "s", "t", "capacity", "normalized", "deviation", "limit"],
    )
    .plot(1, &[4, 6], true, false);
    let mut checks = Vec::new();
    let mut reports = Vec::new();
    for src in &sources {
        let end = src.end();
        let e = end.0 + 1;
        let avr = model.avr_of_end(end)?;
        let ratio = caps.of(end).expect("every end has a capacity") / avr;
        let a = level_area_volume(model, *src, ratio, ladder)?;
        let c = capacity_level_sets(model, *src, ratio, ladder)?;
        for r in &a.rows {
            av.rows.push(vec![
                end_no(end),
                r.s,
                r.level,
                r.area,
                r.volume,
                r.area_ratio,
                r.volume_ratio,
                avr,
            ]);
        }
        for r in &c.rows {
            lc.rows.push(vec![
                end_no(end),
                r.s,
                r.t,
                r.capacity,
                r.normalized,
                r.deviation,
                c.limit,
            ]);
        }
        let series: [(&str, Vec<f64>); 3] = [
            ("capacity", c.rows.iter().map(|r| r.deviation).collect()),
            (
                "area",
                a.rows.iter().map(|r| (r.area_ratio / avr - 1.0).abs()).collect(),
            ),
            (
                "volume",
                a.rows.iter().map(|r| (r.volume_ratio / avr - 1.0).abs()).collect(),
            ),
        ];
        for (name, dev) in series {
            let last = *dev.last().unwrap_or(&0.0);
            checks.push(Check {
                name: format!("{name} ratio E{e}"),
                value: last,
                tolerance: Some(0.01),
                pass: last <= 0.01 && deviations_decrease(&dev, floor),
                detail: format!("final relative deviation, with deviations non-increasing along s up to {floor:e}"),
            });
        }
        reports.push(json!({ "end": end, "areas": a, "capacities": c }));
    }
    Ok((
        vec![av, lc],
        json!({ "level_sets": reports, "solver": solved.stats() }),
        checks,
    ))
}

fn two_ends(model: &ManifoldModel, config: &ExperimentConfig) -> Result<Parts> {
    if model.ends().len() != 2 {
        return Err(Error::InvalidConfig(vec![ConfigIssue {
            line: None,
            path: "model.ends".into(),
            message: format!("the two-ends preset needs 2 ends, got {}", model.ends().len()),
        }]));
    }
    let solved = solve_all(model, config)?;
    let caps = per_end_capacity(model, &solved.sources())?;
    let mut t = TableOut::new(
        "per_end_capacity",
        &["per-end normalized capacities C_p^(i) and volume ratios AVR_i"],
        &["end", "capacity", "avr"],
    );
    for c in &caps.ends {
        t.rows.push(vec![end_no(c.end), c.capacity, c.avr]);
    }
    let sum: f64 = caps.ends.iter().map(|c| c.capacity).sum();
    let avr_sum: f64 = caps.ends.iter().map(|c| c.avr).sum();
    let mut checks = vec![
        Check::at_most(
            "capacity splitting",
            (caps.total - sum).abs() / sum,
            1e-12,
            "C_p against the sum of per-end capacities",
        ),
        Check::at_most(
            "AVR splitting",
            (model.avr() - avr_sum).abs() / avr_sum,
            1e-12,
            "AVR against the sum of per-end ratios",
        ),
    ];
    let e = model.ends();
    if e[0].warp == e[1].warp && e[0].link == e[1].link {
        let (c1, c2) = (caps.ends[0].capacity, caps.ends[1].capacity);
        checks.push(Check::at_most(
            "symmetric ends agree",
            (c1 - c2).abs() / c1.max(c2),
            tol(config.grid.is_some(), 1e-6, 1e-3),
            "relative difference of the two per-end capacities",
        ));
    }
    Ok((vec![t], json!({ "capacity": caps, "solver": solved.stats() }), checks))
}
