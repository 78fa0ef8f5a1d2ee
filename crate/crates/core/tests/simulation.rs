use mdir_logrank::rng::substream;
use mdir_logrank::sim::hazard::{censoring_rate_to_scale, sample_survival, standard_exponential};
use mdir_logrank::sim::study::{
    empirical_size_study, generate_dataset, power_curve_study, uniformity_ks, write_csv, Alternative, Direction,
    PerturbedGroups, ScenarioConfig, ThetaScaling,
};
use mdir_logrank::sim::{PerturbedHazard, SurvivalLaw};
use mdir_logrank::Weight;

/// Kolmogorov distance of a sample from a continuous distribution function.
fn ks_distance(mut x: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().fold(0.0, |d: f64, (i, &v)| {
        let f = cdf(v);
        d.max((i + 1) as f64 / n - f).max(f - i as f64 / n)
    })
}

#[test]
fn constant_weight_gives_rate_1_08() {
    let config = ScenarioConfig::default();
    let [c1, _] = config.coefficients(0.8);
    assert!((c1 - 0.08).abs() < 1e-15);
    let law = SurvivalLaw::Perturbed(PerturbedHazard::new(Weight::polynomial(0, 0), c1).unwrap());
    let draws = sample_survival(&law, 100_000, &mut substream(1, 0));
    assert!(ks_distance(draws, |t| 1.0 - (-1.08 * t).exp()) < 0.01);
}

#[test]
fn probability_integral_transform_is_uniform() {
    for (w, c) in [(Weight::polynomial(4, 0), 0.3), (Weight::polynomial(0, 4), -0.5), (Weight::polynomial(1, 1), 2.0)] {
        let h = PerturbedHazard::new(w, c).unwrap();
        let law = SurvivalLaw::Perturbed(h.clone());
        let u: Vec<f64> = sample_survival(&law, 100_000, &mut substream(2, 0))
            .into_iter()
            .map(|t| 1.0 - (-h.cumulative(t)).exp())
            .collect();
        assert!(ks_distance(u, |x| x) < 0.01);
    }
}

#[test]
fn censoring_fraction() {
    let c = censoring_rate_to_scale(0.10).unwrap();
    let mut rng = substream(3, 0);
    let censored = (0..100_000)
        .filter(|_| {
            let t = standard_exponential(&mut rng);
            let cens = standard_exponential(&mut rng) / c;
            cens < t
        })
        .count();
    assert!((censored as f64 / 1e5 - 0.10).abs() < 0.005);
    let config = ScenarioConfig { censoring: [0.1, 0.3], n1: 5000, n2: 5000, ..ScenarioConfig::default() };
    let s = generate_dataset(&config, 0).unwrap();
    let rate = |g: mdir_logrank::Group| {
        let members = s.subjects().iter().filter(|x| x.group == g);
        members.clone().filter(|x| !x.event).count() as f64 / members.count() as f64
    };
    assert!((rate(mdir_logrank::Group::First) - 0.1).abs() < 0.015);
    assert!((rate(mdir_logrank::Group::Second) - 0.3).abs() < 0.015);
}

#[test]
fn first_only_perturbation_leaves_group_two_exponential() {
    let config = ScenarioConfig {
        perturbed: PerturbedGroups::FirstOnly,
        scaling: ThetaScaling::Fixed,
        ..ScenarioConfig::default()
    };
    let c = config.coefficients(0.5);
    assert_eq!(c[1], 0.0);
    assert!((c[0] - 0.5).abs() < 1e-12);
}

#[test]
fn small_studies_are_reproducible() {
    let config = ScenarioConfig { n_sim: 60, n_boot: 49, master_seed: 3, ..ScenarioConfig::default() };
    let a = empirical_size_study(&config).unwrap();
    let b = empirical_size_study(&config).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.outcomes, b.outcomes);
    assert_eq!(a.rows.len(), 4);
    assert!(a.randomized_p_values().iter().all(|&p| p > 0.0 && p <= 1.0));
    assert!(uniformity_ks(&a.randomized_p_values()).p_value > 0.001);
    let alt = ScenarioConfig {
        alternative: Alternative::HazardDirection { weight: Weight::polynomial(0, 0), theta: 0.5 },
        ..config.clone()
    };
    assert!(empirical_size_study(&alt).is_err());
}

#[test]
fn zero_theta_matches_null_data() {
    let config = ScenarioConfig { n_sim: 5, ..ScenarioConfig::default() };
    let null = generate_dataset(&config, 2).unwrap();
    let zero = ScenarioConfig {
        alternative: Alternative::HazardDirection { weight: Weight::polynomial(4, 0), theta: 0.0 },
        ..config
    };
    assert_eq!(generate_dataset(&zero, 2).unwrap(), null);
}

#[test]
fn power_csv_shape() {
    let config = ScenarioConfig { n_sim: 20, n_boot: 19, ..ScenarioConfig::default() };
    let thetas = Direction::Central.default_thetas();
    let studies = power_curve_study(&config, &Weight::Polynomial(Direction::Central.weight()), &thetas).unwrap();
    let rows: Vec<_> = studies.into_iter().flat_map(|s| s.rows).collect();
    let mut buf = Vec::new();
    write_csv(&rows, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "scenario_id,test,theta,power,ci_lo,ci_hi");
    assert_eq!(lines.len(), 1 + 4 * 8);
    let tests: std::collections::BTreeSet<&str> = lines[1..].iter().map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(tests.len(), 4);
}
