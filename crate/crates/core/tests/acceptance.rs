//! Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

mod common;

use std::fs;
use std::path::Path;
use std::time::Instant;

use common::*;
use conecap::asymptotics::{blow_down_profile, gradient_bound_check, liyau_check, richardson_extrapolate};
use conecap::capacity::{
    boundary_capacity, capacity_level_sets, deviations_decrease, eccentricity, level_area_volume, per_end_capacity,
    relative_spread, scaling_table, Potential,
};
use conecap::config::validate_config;
use conecap::geometry::{DomainSpec, EndId, GridSpec, ManifoldModel, WarpProfile};
use conecap::imcf::{exponential_growth_check, hull_area_estimate, imcf_constant_check, Imcf};
use conecap::presets::Preset;
use conecap::radial::{
    gamma_of, radial_capacity, radial_imcf, radial_potential, RadialSolution, GAMMA_LADDER, MOSER_LADDER,
};
use conecap::report::run_preset;
use conecap::solver::{DiscreteField, SolverConfig};

/// Sub-checks of one criterion.
struct Tally {
    pass: bool,
    notes: Vec<String>,
}

impl Tally {
    fn new() -> Self {
        Self {
            pass: true,
            notes: Vec::new(),
        }
    }

    fn at_most(&mut self, what: &str, value: f64, tol: f64) {
        let ok = value <= tol;
        self.pass &= ok;
        self.notes
            .push(format!("{what} {value:.3e} {} {tol:.0e}", if ok { "<=" } else { ">" }));
    }

    fn at_least(&mut self, what: &str, value: f64, bound: f64) {
        let ok = value >= bound;
        self.pass &= ok;
        self.notes
            .push(format!("{what} {value:.3} {} {bound}", if ok { ">=" } else { "<" }));
    }

    fn holds(&mut self, what: &str, ok: bool) {
        self.pass &= ok;
        self.notes.push(format!("{what}: {}", if ok { "yes" } else { "no" }));
    }
}

const BALL: DomainSpec = DomainSpec::Coordinate { radius: 1.0 };
const GRID_S: [f64; 3] = [8.0, 16.0, 32.0];

fn fine() -> GridSpec {
    GridSpec::new(64.0, 256, 64)
}

fn offset() -> ManifoldModel {
    one_end(WarpProfile::offset(1.0, 0.5), 1.0)
}

fn cone() -> ManifoldModel {
    one_end(WarpProfile::cone(1.0), 0.9)
}

fn radial(m: &ManifoldModel, p: f64) -> RadialSolution {
    radial_potential(m, EndId::E1, 1.0, p).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}

fn c1(t: &mut Tally) {
    let m = flat();
    let mut worst = 0.0f64;
    for p in [1.5, 2.0, 2.5] {
        let sol = radial(&m, p);
        for rho in [2.0, 10.0, 100.0] {
            worst = worst.max(rel(sol.u(rho).unwrap(), rho.powf(-decay_exponent(3, p))));
        }
        t.at_most(
            &format!("|C_p(B) - 1| at p={p}"),
            (radial_capacity(&sol) - 1.0).abs(),
            1e-8,
        );
    }
    t.at_most("potential relative error", worst, 1e-8);
}

fn c2(t: &mut Tally) {
    let g = gamma_of(&radial(&offset(), 2.0)).unwrap();
    t.at_most("offset gamma vs 1.5", rel(g.limit, 1.5), 1e-4);
    t.at_most("offset gamma vs formula", rel(g.limit, g.formula), 1e-4);
    let g = gamma_of(&radial(&cone(), 2.0)).unwrap();
    t.at_most("cone gamma vs formula", rel(g.limit, g.formula), 1e-8);
}

/// Richardson limit in `s` of the blow-down sphere means, and the
/// oscillations along the ladder.
fn blow_down_gamma(f: &DiscreteField) -> (f64, Vec<f64>) {
    let prof = blow_down_profile(f.into(), &GRID_S).unwrap();
    let means: Vec<f64> = prof.iter().map(|r| r.mean).collect();
    let r = richardson_extrapolate(&GRID_S, &means, 1.0).unwrap();
    (r.limit, prof.iter().map(|r| r.osc).collect())
}

fn c3(t: &mut Tally) {
    let m = flat();
    let runs: Vec<(f64, f64, Vec<f64>)> = [GridSpec::new(64.0, 128, 32), fine(), GridSpec::new(128.0, 256, 64)]
        .into_iter()
        .map(|spec| {
            let f = solve(&m, EndId::E1, &ELLIPSOID, spec, 2.0);
            let (g, osc) = blow_down_gamma(&f);
            (g, boundary_capacity((&f).into()).unwrap(), osc)
        })
        .collect();
    // second order in the grid spacing, first order in the outer radius
    let extrapolate = |v: [f64; 3]| (4.0 * v[1] - v[0]) / 3.0 + 2.0 * (v[2] - v[1]);
    let gamma = extrapolate([runs[0].0, runs[1].0, runs[2].0]);
    let cap = extrapolate([runs[0].1, runs[1].1, runs[2].1]);
    // flat space: AVR = 1 and p - 1 = 1
    t.at_most("gamma AVR vs measured C_p", rel(gamma, cap), 2e-2);
    t.at_most(
        "gamma AVR vs spheroid capacity",
        rel(gamma, prolate_capacity(2.0, 1.0)),
        2e-2,
    );
    let osc = &runs[1].2;
    t.holds("osc decreasing along s", osc.windows(2).all(|w| w[1] < w[0]));
}

fn c4(t: &mut Tally) {
    for (p, tol) in [(2.0, 1e-3), (1.5, 5e-3)] {
        for (name, m, shift) in [("cone", cone(), 0.0), ("offset", offset(), 0.5)] {
            let errs: Vec<f64> = [(64, 16), (128, 32), (256, 64)]
                .into_iter()
                .map(|(nr, na)| {
                    let f = solve(&m, EndId::E1, &BALL, GridSpec::new(64.0, nr, na), p);
                    sup_error(&f, |r| affine_potential(p, 1.0, shift, 1.0, r))
                })
                .collect();
            t.at_most(&format!("{name} p={p} sup error"), errs[2], tol);
            t.at_least(&format!("{name} p={p} order"), (errs[1] / errs[2]).log2(), 1.5);
        }
    }
}

fn c5(t: &mut Tally) {
    let ladder = [2.0, 4.0, 8.0, 16.0];
    for (name, m) in [("flat", flat()), ("cone", cone())] {
        let f = solve(&m, EndId::E1, &BALL, fine(), 2.0);
        let rows = scaling_table(&m, (&f).into(), &ladder).unwrap();
        t.at_most(
            &format!("{name} grid spread"),
            relative_spread(&rows.iter().map(|r| r.scaled).collect::<Vec<_>>()),
            5e-3,
        );
        let sol = radial(&m, 2.0);
        let rows = scaling_table(&m, (&sol).into(), &ladder).unwrap();
        t.at_most(
            &format!("{name} radial spread"),
            relative_spread(&rows.iter().map(|r| r.scaled).collect::<Vec<_>>()),
            5e-3,
        );
    }
}

fn c6(t: &mut Tally) {
    let m = offset();
    let avr = m.avr();
    let sol = radial(&m, 2.0);
    let field = solve(&m, EndId::E1, &BALL, fine(), 2.0);
    for (name, src, floor) in [
        ("radial", Potential::from(&sol), 1e-12),
        ("grid", Potential::from(&field), 1e-8),
    ] {
        let ratio = src.capacity().unwrap() / avr;
        let caps = capacity_level_sets(&m, src, ratio, &GRID_S).unwrap();
        let av = level_area_volume(&m, src, ratio, &GRID_S).unwrap();
        let series = [
            ("capacity", caps.rows.iter().map(|r| r.deviation).collect::<Vec<_>>()),
            ("area", av.rows.iter().map(|r| rel(r.area_ratio, avr)).collect()),
            ("volume", av.rows.iter().map(|r| rel(r.volume_ratio, avr)).collect()),
        ];
        for (what, dev) in series {
            t.at_most(&format!("{name} {what} final deviation"), dev[dev.len() - 1], 1e-2);
            t.holds(&format!("{name} {what} decreasing"), deviations_decrease(&dev, floor));
        }
    }
}

fn c7(t: &mut Tally) {
    let levels = [1.0, 2.0, 4.0, 8.0, 16.0];
    let m = cone();
    let sol = radial(&m, 2.0);
    let tab = eccentricity(&m, (&sol).into(), &levels).unwrap();
    let worst = tab.rows.iter().map(|r| r.r_max / r.r_min - 1.0).fold(0.0, f64::max);
    t.at_most("radial oracle |ecc - 1|", worst, 1e-6);
    let f = solve(&m, EndId::E1, &BALL, fine(), 2.0);
    let tab = eccentricity(&m, (&f).into(), &levels).unwrap();
    let worst = tab.rows.iter().map(|r| (r.ecc - 1.0).abs()).fold(0.0, f64::max);
    t.at_most("radial PDE |ecc - 1|", worst, 1e-6);
    let m = flat();
    let f = solve(&m, EndId::E1, &ELLIPSOID, fine(), 2.0);
    let tab = eccentricity(&m, (&f).into(), &levels).unwrap();
    t.at_most("ellipsoid |ecc(1) - 2|", (tab.rows[0].ecc - 2.0).abs(), 1e-12);
    t.at_most("ellipsoid largest ecc increase", tab.max_increase, 1e-3);
}

fn c8(t: &mut Tally) {
    let ladder = [2.0, 4.0, 8.0, 16.0, 32.0];
    for (name, m) in [("flat", flat()), ("cone", cone()), ("offset", offset())] {
        for p in [1.5, 2.0] {
            let sol = radial(&m, p);
            let g = gamma_of(&sol).unwrap();
            let band = liyau_check((&sol).into(), &GAMMA_LADDER, g.limit).unwrap();
            t.holds(
                &format!(
                    "{name} p={p} band [{:.4}, {:.4}] brackets gamma",
                    band.band_min, band.band_max
                ),
                band.band_max.is_finite() && band.band_min > 0.0 && band.brackets(g.formula, 1e-6),
            );
            let k = decay_exponent(3, p);
            let far = gradient_bound_check((&sol).into(), &[1e3]).unwrap()[0].value;
            t.at_most(
                &format!("{name} p={p} rho|grad u|/u at 1e3 vs cone limit"),
                rel(far, k),
                1e-2,
            );
            let near = gradient_bound_check((&sol).into(), &ladder).unwrap();
            t.holds(
                &format!("{name} p={p} gradient bound finite"),
                near.iter().all(|r| r.value.is_finite()),
            );
        }
    }
    let m = flat();
    // the graph map of the ellipsoid leaves coordinate spheres from ρ = 8 on
    let cases = [
        ("ball", BALL, &ladder[..], 1.0),
        ("ellipsoid", ELLIPSOID, &GRID_S[..], prolate_capacity(2.0, 1.0)),
    ];
    for (name, domain, spheres, exact) in cases {
        let f = solve(&m, EndId::E1, &domain, fine(), 2.0);
        let (gamma, _) = blow_down_gamma(&f);
        let band = liyau_check((&f).into(), spheres, gamma).unwrap();
        t.holds(
            &format!(
                "grid {name} band [{:.4}, {:.4}] brackets gamma",
                band.band_min, band.band_max
            ),
            band.band_max.is_finite() && band.band_min > 0.0 && band.brackets(exact, 1e-3),
        );
        let g = gradient_bound_check((&f).into(), spheres).unwrap();
        let sup = g.iter().map(|r| r.value).fold(0.0, f64::max);
        t.holds(
            &format!("grid {name} sup rho|grad u|/u = {sup:.4} finite"),
            sup.is_finite(),
        );
    }
}

fn c9(t: &mut Tally) {
    let growth = [2.0, 3.0, 4.0, 5.0, 6.0];
    let m = cone();
    let w = radial_imcf(&m, EndId::E1, 1.0).unwrap();
    let worst = [1.0, 2.0, 10.0, 1e3, 1e5]
        .into_iter()
        .map(|r: f64| (w.w(r).unwrap() - 2.0 * r.ln()).abs())
        .fold(0.0, f64::max);
    t.at_most("cone |w - (n-1) ln rho|", worst, 1e-6);
    for (name, m) in [("cone", cone()), ("offset", offset())] {
        let w = radial_imcf(&m, EndId::E1, 1.0).unwrap();
        let hull = hull_area_estimate(&m, &BALL, EndId::E1, &MOSER_LADDER, None).unwrap();
        let k = imcf_constant_check(&m, Imcf::Radial(&w), hull.area, &GAMMA_LADDER, 1.0).unwrap();
        t.at_most(&format!("{name} kappa residual"), k.residual, 5e-2);
        let g = exponential_growth_check(&m, Imcf::Radial(&w), &growth).unwrap();
        t.at_most(&format!("{name} growth deviation"), g.deviation, 5e-2);
    }
}

fn c10(t: &mut Tally) {
    let m = flat();
    let spec = fine();
    let hull = hull_area_estimate(
        &m,
        &ELLIPSOID,
        EndId::E1,
        &MOSER_LADDER,
        Some((&spec, &SolverConfig::with_p(2.0))),
    )
    .unwrap();
    t.at_most(
        "hull area vs spheroid area",
        rel(hull.area, prolate_area(2.0, 1.0)),
        2e-2,
    );
}

fn c11(t: &mut Tally) {
    let m = two_end_catenoid();
    let sols: Vec<RadialSolution> = m
        .end_ids()
        .map(|e| radial_potential(&m, e, 1.0, 2.0).unwrap())
        .collect();
    let per = per_end_capacity(&m, &sols.iter().map(Potential::from).collect::<Vec<_>>()).unwrap();
    for e in &per.ends {
        t.at_most(
            &format!("oracle {} vs 4/pi", e.end),
            (e.capacity - CATENOID_END_CAPACITY).abs(),
            1e-6,
        );
    }
    t.holds(
        "capacity splitting sums",
        per.total == per.ends.iter().map(|e| e.capacity).sum::<f64>(),
    );
    t.holds(
        "AVR splitting sums",
        per.avr == m.avr() && per.avr == m.end_ids().map(|e| m.avr_of_end(e).unwrap()).sum::<f64>(),
    );
    let fields: Vec<DiscreteField> = m.end_ids().map(|e| solve(&m, e, &BALL, fine(), 2.0)).collect();
    let per = per_end_capacity(&m, &fields.iter().map(Potential::from).collect::<Vec<_>>()).unwrap();
    for e in &per.ends {
        t.at_most(
            &format!("PDE {} vs 4/pi", e.end),
            rel(e.capacity, CATENOID_END_CAPACITY),
            1e-3,
        );
    }
    t.holds(
        "PDE capacity splitting sums",
        per.total == per.ends.iter().map(|e| e.capacity).sum::<f64>(),
    );
}

const CONE_RADIAL: &str = "
[model]
dimension = 3

[[model.ends]]
warp = \"cone\"
slope = 1.0
link_scale = 0.9

[domain]
kind = \"coordinate\"
radius = 1.0
";

const CATENOID_RADIAL: &str = "
[model]
dimension = 3

[[model.ends]]
warp = \"smoothed\"
slope = 1.0
core = 1.0

[[model.ends]]
warp = \"smoothed\"
slope = 1.0
core = 1.0

[domain]
kind = \"coordinate\"
radius = 1.0
";

const ELLIPSOID_GRID: &str = "
[model]
dimension = 3

[[model.ends]]
warp = \"cone\"
slope = 1.0

[domain]
kind = \"ellipsoid\"
axial = 2.0
equatorial = 1.0

[grid]
outer_radius = 64.0
radial_cells = 128
angular_cells = 32
";

fn csv_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    out.sort();
    out
}

fn c12(t: &mut Tally) {
    let mut runs: Vec<(Preset, &str)> = Preset::ALL
        .iter()
        .filter(|p| **p != Preset::TwoEnds)
        .map(|p| (*p, CONE_RADIAL))
        .collect();
    runs.push((Preset::TwoEnds, CATENOID_RADIAL));
    runs.extend(
        [Preset::Thm1Potential, Preset::Thm2Imcf, Preset::Eccentricity]
            .into_iter()
            .map(|p| (p, ELLIPSOID_GRID)),
    );
    for (preset, raw) in runs {
        let cfg = validate_config(raw).unwrap();
        let roots = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
        let files: Vec<Vec<(String, Vec<u8>)>> = roots
            .iter()
            .map(|r| csv_files(&run_preset(preset, &cfg, r.path()).unwrap().directory))
            .collect();
        t.holds(
            &format!("{} ({} CSV files) identical", preset.name(), files[0].len()),
            !files[0].is_empty() && files[0] == files[1],
        );
    }
}

type Criterion = (&'static str, fn(&mut Tally));

const CRITERIA: [Criterion; 12] = [
    ("radial oracle exactness", c1),
    ("asymptotic constant, radial", c2),
    ("asymptotic constant, ellipsoid", c3),
    ("PDE path vs radial oracle", c4),
    ("capacity scaling law", c5),
    ("level-set asymptotics", c6),
    ("eccentricity", c7),
    ("Li-Yau and gradient bounds", c8),
    ("weak IMCF asymptotics", c9),
    ("hull area limit", c10),
    ("two-end decomposition", c11),
    ("determinism", c12),
];

fn main() {
    let clock = Instant::now();
    let results: Vec<(Tally, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = CRITERIA
            .iter()
            .map(|(_, run)| {
                scope.spawn(move || {
                    let start = Instant::now();
                    let mut t = Tally::new();
                    run(&mut t);
                    (t, start.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join().unwrap_or_else(|_| {
                    let mut t = Tally::new();
                    t.holds("completed without panic", false);
                    (t, 0.0)
                })
            })
            .collect()
    });
    let mut failed = 0;
    for (k, ((name, _), (t, secs))) in CRITERIA.iter().zip(&results).enumerate() {
        if !t.pass {
            failed += 1;
        }
        println!(
            "{} criterion {:>2} {name} ({secs:.1}s): {}",
            if t.pass { "PASS" } else { "FAIL" },
            k + 1,
            t.notes.join("; ")
        );
    }
    println!(
        "{} of 12 criteria passed in {:.1}s",
        12 - failed,
        clock.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
