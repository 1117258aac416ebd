use bossamp::denoise::{f_binary, f_gauss, fprime_binary, fprime_gauss_exact, soft_threshold};
use bossamp::metrics::{contour_half, success_area, GridField};
use bossamp::recover::{group_update_binary, group_update_gauss, prior_update};
use bossamp::GroupStructure;
use proptest::prelude::*;

fn beta() -> impl Strategy<Value = f64> {
    (-6.0f64..1.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #[test]
    fn binary_mean_is_a_probability(u in -5.0f64..6.0, b in beta(), g in 0.001f64..0.999) {
        let f = f_binary(u, b, g);
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!(fprime_binary(u, b, g) >= 0.0);
        prop_assert!(f_binary(u + 0.1, b, g) >= f);
    }

    #[test]
    fn gaussian_mean_shrinks_towards_zero(u in -20.0f64..20.0, b in beta(), g in 0.001f64..0.999, s in 0.01f64..10.0) {
        let f = f_gauss(u, b, g, s);
        prop_assert!(f.is_finite());
        prop_assert!(f.abs() <= u.abs());
        prop_assert!(f * u >= 0.0);
        prop_assert!(fprime_gauss_exact(u, b, g, s) >= 0.0);
    }

    #[test]
    fn soft_threshold_is_nonexpansive(u in -10.0f64..10.0, v in -10.0f64..10.0, t in 0.0f64..3.0) {
        let (a, c) = (soft_threshold(u, t), soft_threshold(v, t));
        prop_assert!((a - c).abs() <= (u - v).abs() + 1e-12);
        prop_assert!(a.abs() <= (u.abs() - t).max(0.0) + 1e-15);
    }

    #[test]
    fn prior_update_stays_clamped(l in proptest::collection::vec(-1e4f64..1e4, 1..20)) {
        for g in prior_update(&l) {
            prop_assert!((1e-12..=1.0 - 1e-12).contains(&g));
        }
    }

    #[test]
    fn own_innovation_never_reaches_own_lvalue(
        u in proptest::collection::vec(-2.0f64..3.0, 12),
        idx in 0usize..12,
        bump in -5.0f64..5.0,
        b in 0.01f64..1.0,
        gs in prop::sample::select(vec![1usize, 2, 3, 4, 6]),
    ) {
        let groups = GroupStructure::contiguous(12, gs).unwrap();
        let gamma0 = vec![0.8; 12];
        let base = group_update_binary(&u, b, &gamma0, &groups).unwrap();
        let mut moved = u.clone();
        moved[idx] += bump;
        let after = group_update_binary(&moved, b, &gamma0, &groups).unwrap();
        prop_assert_eq!(base[idx].to_bits(), after[idx].to_bits());
        let gb = group_update_gauss(&u, b, &gamma0, 1.0, &groups).unwrap();
        let ga = group_update_gauss(&moved, b, &gamma0, 1.0, &groups).unwrap();
        prop_assert_eq!(gb[idx].to_bits(), ga[idx].to_bits());
        // entries outside the group are untouched as well
        let g = idx / gs;
        for n in (0..12).filter(|n| n / gs != g) {
            prop_assert_eq!(base[n].to_bits(), after[n].to_bits());
        }
    }

    #[test]
    fn success_area_is_bounded(values in proptest::collection::vec(0.0f64..=1.0, 16)) {
        let rows: Vec<Vec<f64>> = values.chunks(4).map(|c| c.to_vec()).collect();
        let field = GridField::new(vec![0.0, 1.0, 2.0, 3.0], vec![0.0, 1.0, 2.0, 3.0], rows).unwrap();
        let area = success_area(&field);
        prop_assert!((0.0..=9.0 + 1e-12).contains(&area));
        for line in contour_half(&field) {
            for (x, y) in line {
                prop_assert!((0.0..=3.0).contains(&x) && (0.0..=3.0).contains(&y));
            }
        }
    }
}

proptest! {
    #[test]
    fn denoisers_stay_finite(
        u in -1e10f64..1e10,
        be in -12.0f64..12.0,
        g in 0.0f64..=1.0,
        s in 1e-6f64..1e6,
    ) {
        let b = 10f64.powf(be);
        let g = bossamp::model::clamp_gamma(g);
        for v in [
            f_binary(u, b, g),
            fprime_binary(u, b, g),
            f_gauss(u, b, g, s),
            fprime_gauss_exact(u, b, g, s),
            bossamp::denoise::g_gauss(u, b, g, s),
        ] {
            prop_assert!(v.is_finite(), "{u} {b} {g} {s}");
        }
        let f = f_gauss(u, b, g, s);
        prop_assert!(f.abs() <= u.abs() * s / (s + b) * (1.0 + 1e-15));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solver_state_stays_finite(
        seed in any::<u64>(),
        m in 5usize..60,
        groups in prop::sample::select(vec![1usize, 2, 4]),
        snr in prop::sample::select(vec![-10.0, 0.0, 20.0, 60.0, f64::INFINITY]),
        gaussian in any::<bool>(),
    ) {
        use bossamp::{bamp, bossamp_group, make_instance, PriorKind, StoppingRule};
        let kind = if gaussian { PriorKind::SparseGaussian { sigma_x_sq: 1.0 } } else { PriorKind::SparseBinary };
        let inst = make_instance(m, 64, 8, groups, kind, snr, seed).unwrap();
        let stop = StoppingRule::default();
        for out in [
            bamp(&inst.y, &inst.a, &inst.prior, stop).unwrap(),
            bossamp_group(&inst.y, &inst.a, &inst.prior, &inst.groups, stop).unwrap(),
        ] {
            prop_assert!(out.iterations >= 1 && out.iterations <= 100);
            prop_assert!(out.x_hat.iter().all(|v| v.is_finite()));
        }
    }
}
