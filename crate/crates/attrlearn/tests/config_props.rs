use attrlearn::config::ExperimentConfig;
use proptest::prelude::*;

const ADVERSARIES: [&str; 5] = ["none", "label_flip_in_band", "far_cluster", "antipodal_in_band", "mixed"];
const DISTS: [&str; 4] = ["gaussian", "laplace_isotropic", "uniform_cube_isotropic", "logistic_isotropic"];

proptest! {
    #[test]
    fn configs_round_trip_through_text(
        d in 1usize..5000,
        s_frac in 0.0f64..1.0,
        eps in 0.001f64..0.5,
        delta in 0.001f64..0.5,
        ratio in 0.0f64..2.0,
        seeds in proptest::collection::vec(0u64..1000, 1..5),
        adv in 0usize..5,
        dist in 0usize..4,
        passive in any::<bool>(),
    ) {
        let s = 1 + ((d - 1) as f64 * s_frac) as usize;
        let text = format!(
            "d = {d}\ns = {s}\neps = {eps}\ndelta = {delta}\neta_over_eps = {ratio}\ndist = \"{}\"\nseeds = {seeds:?}\nmode = \"{}\"\n[adversary]\nkind = \"{}\"\n",
            DISTS[dist],
            if passive { "passive" } else { "active" },
            ADVERSARIES[adv],
        );
        let cfg = ExperimentConfig::from_toml(&text).unwrap();
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        prop_assert_eq!(&again, &cfg);
        let r = cfg.resolve().unwrap();
        prop_assert_eq!(r.seeds, seeds);
        prop_assert!(r.eta >= 0.0 && r.eta < 0.5);
    }

    #[test]
    fn out_of_range_noise_is_rejected(eta in 0.5f64..10.0) {
        let text = format!("d = 10\ns = 2\neps = 0.1\ndelta = 0.1\neta = {eta}\n");
        prop_assert!(ExperimentConfig::from_toml(&text).is_err());
    }
}
