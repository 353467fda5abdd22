mod common;

use common::*;
use conecap::asymptotics::richardson_extrapolate;
use conecap::capacity::{per_end_capacity, relative_spread, Potential};
use conecap::config::validate_config;
use conecap::geometry::{make_model, EndDescriptor, EndId, LinkSpec, WarpProfile};
use conecap::radial::{radial_capacity, radial_potential};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn affine_warps_match_closed_form(
        p in 1.1f64..2.9,
        slope in 0.3f64..2.0,
        shift in 0.0f64..2.0,
        link in 0.3f64..1.5,
        rho0 in 0.2f64..5.0,
    ) {
        let warp = if shift == 0.0 { WarpProfile::cone(slope) } else { WarpProfile::offset(slope, shift) };
        let m = one_end(warp, link);
        let sol = radial_potential(&m, EndId::E1, rho0, p).unwrap();
        let exact = affine_capacity(p, slope, shift, link, rho0);
        prop_assert!(rel(radial_capacity(&sol), exact) < 1e-7, "{} vs {exact}", radial_capacity(&sol));
        for k in [1.5, 4.0, 40.0] {
            let r = rho0 * k;
            let u = affine_potential(p, slope, shift, rho0, r);
            prop_assert!(rel(sol.u(r).unwrap(), u) < 1e-7);
        }
    }

    #[test]
    fn potentials_decrease_and_are_ordered_by_domain(
        p in 1.2f64..2.8,
        core in 0.2f64..3.0,
        rho0 in 0.5f64..3.0,
        grow in 1.1f64..3.0,
    ) {
        let m = one_end(WarpProfile::smoothed(1.0, core), 1.0);
        let small = radial_potential(&m, EndId::E1, rho0, p).unwrap();
        let large = radial_potential(&m, EndId::E1, rho0 * grow, p).unwrap();
        let mut last = 1.0;
        for k in 1..40 {
            let r = rho0 * grow * 1.3f64.powi(k);
            let (a, b) = (small.u(r).unwrap(), large.u(r).unwrap());
            prop_assert!(a > 0.0 && a < last);
            // comparison principle: the larger domain has the larger potential
            prop_assert!(b > a);
            last = a;
        }
        prop_assert!(radial_capacity(&large) > radial_capacity(&small));
    }

    #[test]
    fn per_end_capacities_split_exactly(
        c1 in 0.5f64..1.5,
        c2 in 0.5f64..1.5,
        a1 in 0.5f64..1.2,
        a2 in 0.5f64..1.2,
        p in 1.3f64..2.7,
    ) {
        // cores chosen so that a f is continuous across the neck ρ = 0
        let warp = |c: f64, a: f64| WarpProfile::smoothed(c, 1.0 / (c * a));
        let ends = [
            EndDescriptor::new(warp(c1, a1), LinkSpec::round(a1)),
            EndDescriptor::new(warp(c2, a2), LinkSpec::round(a2)),
        ];
        let m = make_model(3, &ends).unwrap();
        let sols: Vec<_> = m.end_ids().map(|e| radial_potential(&m, e, 1.0, p).unwrap()).collect();
        let per = per_end_capacity(&m, &sols.iter().map(Potential::from).collect::<Vec<_>>()).unwrap();
        prop_assert_eq!(per.total, per.ends[0].capacity + per.ends[1].capacity);
        prop_assert_eq!(per.avr, m.avr());
        // each end agrees with a one-end model carrying the same warp
        for (k, (c, a)) in [(c1, a1), (c2, a2)].into_iter().enumerate() {
            let single = one_end(warp(c, a), a);
            let s = radial_potential(&single, EndId::E1, 1.0, p).unwrap();
            prop_assert!(rel(per.ends[k].capacity, radial_capacity(&s)) < 1e-8);
        }
    }

    #[test]
    fn richardson_removes_first_order_term(a in -5.0f64..5.0, b in -5.0f64..5.0, s0 in 1.0f64..100.0) {
        let s = [s0, 2.0 * s0, 4.0 * s0];
        let v: Vec<f64> = s.iter().map(|x| a + b / x).collect();
        let r = richardson_extrapolate(&s, &v, 1.0).unwrap();
        prop_assert!((r.limit - a).abs() < 1e-9 * (1.0 + a.abs() + b.abs()));
        prop_assert!(r.spread < 1e-9 * (1.0 + b.abs()));
    }

    #[test]
    fn spread_is_scale_invariant(v in proptest::collection::vec(0.5f64..2.0, 2..8), k in 0.1f64..10.0) {
        let scaled: Vec<f64> = v.iter().map(|x| k * x).collect();
        prop_assert!((relative_spread(&v) - relative_spread(&scaled)).abs() < 1e-12);
    }

    #[test]
    fn config_hash_ignores_layout(slope in 0.2f64..3.0, link in 0.2f64..2.0, radius in 0.5f64..4.0) {
        let a = format!(
            "[model]\ndimension = 3\n[[model.ends]]\nwarp = \"cone\"\nslope = {slope:?}\nlink_scale = {link:?}\n[domain]\nkind = \"coordinate\"\nradius = {radius:?}\n"
        );
        let b = format!(
            "# reordered\n[domain]\nradius = {radius:?}\nkind = \"coordinate\"\n\n[model]\n[[model.ends]]\nlink_scale = {link:?}\nslope = {slope:?}\nwarp = \"cone\"\n"
        );
        let b = b.replace("[model]\n", "[model]\ndimension = 3\n");
        prop_assert_eq!(validate_config(&a).unwrap().hash(), validate_config(&b).unwrap().hash());
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a / b - 1.0).abs()
}
