use proptest::prelude::*;
use relaysec_core::analytic::{self, Strategy as Relaying};
use relaysec_core::channel::{NetworkConfig, RelayLinkParams};
use relaysec_core::QuadratureSpec;

fn link() -> impl Strategy<Value = RelayLinkParams> {
    (-2.0f64..1.0, -2.0f64..1.0).prop_map(|(lm, le)| {
        RelayLinkParams::new(10f64.powf(lm), 10f64.powf(le), 10f64.powf(-lm)).unwrap()
    })
}

fn network() -> impl Strategy<Value = NetworkConfig> {
    prop::collection::vec(link(), 1..5).prop_map(|r| NetworkConfig::new(r).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn df_cdf_is_a_distribution(p in link(), z1 in 1e-6f64..50.0, dz in 0.0f64..20.0) {
        let a = analytic::cdf_z_df(z1, &p).unwrap();
        let b = analytic::cdf_z_df(z1 + dz, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a - 1e-15);
    }

    #[test]
    fn af_cdf_is_a_distribution(p in link(), z1 in 1.0f64..50.0, dz in 0.0f64..20.0) {
        let a = analytic::cdf_z_af_approx(z1, &p).unwrap();
        let b = analytic::cdf_z_af_approx(z1 + dz, &p).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        prop_assert!(b >= a - 1e-15);
    }

    #[test]
    fn expansion_reconstructs_selection_cdf(config in network(), z in 1.0f64..50.0) {
        let e = analytic::expand_partial_fractions(&config).unwrap();
        let want = analytic::selection_tail(z, &config, Relaying::Df).unwrap();
        prop_assert!((e.eval(z) - want).abs() <= 1e-10);
    }

    #[test]
    fn df_asr_grows_with_relays(p in link(), n in 1usize..5) {
        let a = analytic::asr_df_closed(&NetworkConfig::iid(n, p).unwrap()).unwrap();
        let b = analytic::asr_df_closed(&NetworkConfig::iid(n + 1, p).unwrap()).unwrap();
        prop_assert!(b > a);
    }

    #[test]
    fn df_asr_monotone_in_link_quality(lm in -2.0f64..1.0, le in -2.0f64..1.0, n in 1usize..4) {
        let at = |lm: f64, le: f64| {
            let p = RelayLinkParams::new(10f64.powf(lm), 10f64.powf(le), 1.0).unwrap();
            analytic::asr_df_closed(&NetworkConfig::iid(n, p).unwrap()).unwrap()
        };
        let base = at(lm, le);
        // A weaker main link (larger lambda_m) hurts; a weaker eavesdropper helps.
        prop_assert!(at(lm + 0.1, le) < base);
        prop_assert!(at(lm, le + 0.1) > base);
    }
}

#[test]
fn af_closed_form_below_df() {
    let quad = QuadratureSpec::default();
    for n in 1..=3 {
        for (lm, le) in [(1.0, 1.0), (0.1, 1.0), (0.1, 0.1)] {
            let cfg =
                NetworkConfig::iid(n, RelayLinkParams::new(lm, le, 1.0 / lm).unwrap()).unwrap();
            let af = analytic::asr_af_closed(&cfg, &quad).unwrap();
            let df = analytic::asr_df_closed(&cfg).unwrap();
            assert!(af < df, "n={n} lm={lm} le={le}: {af} vs {df}");
        }
    }
}
