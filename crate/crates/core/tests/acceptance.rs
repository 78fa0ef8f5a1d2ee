//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

mod common;

use std::time::{Duration, Instant};

use common::random_sample;
use mdir_logrank::bootstrap::{bootstrap_vector, iteration_multipliers, squared_multiplier_covariance};
use mdir_logrank::ingest::{load, Filter, InputSpec};
use mdir_logrank::rng::substream;
use mdir_logrank::sim::study::{
    empirical_size_study, power_curve_study, single_test_name, uniformity_ks, Direction, ReplicationOutcome,
    ScenarioConfig, StudyOutcome, JOINT_TEST,
};
use mdir_logrank::{
    covariance_matrix, logrank_vector, max_projection_statistic, qp_oracle_statistic, run_test, singly_weighted_test,
    CovEstimatorKind, EventTable, MultiplierKind, TestConfig, TestResult, TieMethod, Weight, WeightSet,
};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

const SEED: u64 = 7;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let set = WeightSet::default_directions();
    let mut worst_unit = 0.0f64;
    let mut rademacher_exact = true;
    for seed in 0..100 {
        let s = random_sample(seed, 60, if seed % 2 == 0 { Some(0.1) } else { None });
        let events = EventTable::new(&s, TieMethod::Sequential);
        let t = logrank_vector(&events, &set);
        let sigma = covariance_matrix(&events, &set);
        let ones = vec![1.0; s.len()];
        let tg = bootstrap_vector(&events, &set, &ones).unwrap();
        let sg = squared_multiplier_covariance(&events, &set, &ones).unwrap();
        for (a, b) in t.iter().zip(tg.iter()).chain(sigma.iter().zip(sg.iter())) {
            worst_unit = worst_unit.max(rel_diff(*a, *b));
        }
        for b in 0..20 {
            let g = iteration_multipliers(MultiplierKind::Rademacher, s.len(), seed, b);
            rademacher_exact &= squared_multiplier_covariance(&events, &set, &g).unwrap() == sigma;
        }
    }
    let unit_time = start.elapsed();
    let mut worst_single = 0.0f64;
    for seed in 0..200 {
        let s = random_sample(1000 + seed, 60, Some(0.1));
        let events = EventTable::new(&s, TieMethod::Sequential);
        for l in 0..3 {
            let w = set.weights()[l].clone();
            let one = WeightSet::single(w.clone()).unwrap();
            let t = logrank_vector(&events, &one);
            let sigma = covariance_matrix(&events, &one);
            if sigma[(0, 0)] <= 0.0 {
                continue;
            }
            let s_n = max_projection_statistic(&t, &sigma).unwrap().value;
            let z = singly_weighted_test(&events, &w).unwrap().studentized;
            worst_single = worst_single.max(rel_diff(s_n, z * z));
        }
    }
    let pass = worst_unit <= 1e-12 && rademacher_exact && worst_single <= 1e-12 && unit_time < Duration::from_secs(5);
    verdict(
        pass,
        format!(
            "G=1 max diff {worst_unit:.2e} ({:.2}s), Rademacher covariance exact: {rademacher_exact}, m=1 max diff {worst_single:.2e}",
            unit_time.as_secs_f64()
        ),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut rng = substream(SEED, 2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let m = rng.random_range(1..=6);
        let a: DMatrix<f64> = DMatrix::from_fn(m, m, |_, _| StandardNormal.sample(&mut rng));
        let sigma = &a * a.transpose() + DMatrix::identity(m, m) * 1e-3;
        let t: DVector<f64> = DVector::from_fn(m, |_, _| StandardNormal.sample(&mut rng));
        let s = max_projection_statistic(&t, &sigma).unwrap().value;
        let q = qp_oracle_statistic(&t, &sigma).unwrap();
        worst = worst.max(rel_diff(s, q));
    }
    let elapsed = start.elapsed();
    verdict(
        worst <= 1e-8 && elapsed < Duration::from_secs(60),
        format!("max relative gap {worst:.2e} over 1000 instances in {:.1}s", elapsed.as_secs_f64()),
    )
}

fn criterion_3() -> Verdict {
    let config = TestConfig {
        iterations: 200,
        seed: SEED,
        ..TestConfig::default()
    };
    let mut mismatches = 0;
    for seed in 0..50 {
        let s = random_sample(5000 + seed, 60, Some(0.05));
        let base = run_test(&s, &config).unwrap();
        for f in [|t: f64| t.ln_1p(), |t: f64| t * t * t] {
            let moved = run_test(&s.map_times(f).unwrap(), &config).unwrap();
            if moved.s_n.to_bits() != base.s_n.to_bits() || moved.p_value.to_bits() != base.p_value.to_bits() {
                mismatches += 1;
            }
        }
    }
    verdict(mismatches == 0, format!("{mismatches} of 100 transformed runs differ"))
}

fn size_config(multiplier: MultiplierKind, covariance: CovEstimatorKind) -> ScenarioConfig {
    ScenarioConfig {
        multiplier,
        covariance,
        n_sim: 2000,
        n_boot: 500,
        master_seed: SEED,
        ..ScenarioConfig::default()
    }
}

fn power_config() -> ScenarioConfig {
    ScenarioConfig {
        n_sim: 1000,
        n_boot: 500,
        master_seed: SEED,
        ..ScenarioConfig::default()
    }
}

/// Everything criteria 4, 5, 7 and 8 are computed from.
struct Studies {
    size: Vec<StudyOutcome>,
    empirical: StudyOutcome,
    power: Vec<(Direction, StudyOutcome)>,
    elapsed: Duration,
}

const SIZE_MULTIPLIERS: [MultiplierKind; 3] =
    [MultiplierKind::Rademacher, MultiplierKind::StandardNormal, MultiplierKind::CenteredPoisson];

fn run_studies(threads: usize) -> Studies {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        let start = Instant::now();
        let size = SIZE_MULTIPLIERS
            .iter()
            .map(|&m| empirical_size_study(&size_config(m, CovEstimatorKind::SquaredMultiplier)).unwrap())
            .collect();
        let size_elapsed = start.elapsed();
        let empirical = empirical_size_study(&size_config(
            MultiplierKind::CenteredPoisson,
            CovEstimatorKind::EmpiricalOfDraws,
        ))
        .unwrap();
        let power = Direction::ALL
            .iter()
            .map(|&d| {
                let theta = *d.default_thetas().last().unwrap();
                let study = power_curve_study(&power_config(), &Weight::Polynomial(d.weight()), &[theta])
                    .unwrap()
                    .remove(0);
                (d, study)
            })
            .collect();
        Studies {
            size,
            empirical,
            power,
            elapsed: size_elapsed,
        }
    })
}

fn criterion_4(st: &Studies) -> Verdict {
    let bands = [(4.0, 6.8), (4.5, 7.2), (7.0, 10.5)];
    let mut pass = st.elapsed < Duration::from_secs(30 * 60);
    let mut parts = Vec::new();
    for ((m, study), (lo, hi)) in SIZE_MULTIPLIERS.iter().zip(&st.size).zip(bands) {
        let rate = 100.0 * study.joint().rate;
        pass &= (lo..=hi).contains(&rate);
        parts.push(format!("{m} {rate:.2}% in [{lo}, {hi}]"));
    }
    parts.push(format!("{:.0}s", st.elapsed.as_secs_f64()));
    verdict(pass, parts.join(", "))
}

fn criterion_5(st: &Studies) -> Verdict {
    let rate = 100.0 * st.empirical.joint().rate;
    let squared = 100.0 * st.size[2].joint().rate;
    verdict(
        (4.0..=7.5).contains(&rate) && rate < squared,
        format!("poisson/empirical {rate:.2}% in [4.0, 7.5], below poisson/squared {squared:.2}%"),
    )
}

fn p_value_of(o: &ReplicationOutcome, test: &str, labels: &[String]) -> f64 {
    if test == JOINT_TEST {
        o.joint
    } else {
        let l = labels.iter().position(|x| single_test_name(x) == test).unwrap();
        o.singles[l]
    }
}

/// Mean and standard error of the paired difference in rejection indicators.
fn paired_difference(study: &StudyOutcome, a: &str, b: &str, alpha: f64) -> (f64, f64) {
    let labels = WeightSet::default_directions().labels();
    let d: Vec<f64> = study
        .outcomes
        .iter()
        .map(|o| {
            let ra = (p_value_of(o, a, &labels) <= alpha) as u8 as f64;
            let rb = (p_value_of(o, b, &labels) <= alpha) as u8 as f64;
            ra - rb
        })
        .collect();
    let n = d.len() as f64;
    let mean = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn criterion_7(st: &Studies) -> Verdict {
    let alpha = power_config().alpha;
    let singles: Vec<String> = WeightSet::default_directions().labels().iter().map(|l| single_test_name(l)).collect();
    let mut pass = true;
    let mut parts = Vec::new();
    for (d, study) in &st.power {
        let rate = |t: &str| 100.0 * study.row(t).unwrap().rate;
        let matched = single_test_name(&d.weight().to_string());
        if *d == Direction::Central {
            let w1 = &singles[0];
            let ok = singles[1..].iter().all(|s| rate(w1) >= rate(s))
                && rate(w1) >= rate(JOINT_TEST)
                && singles[1..].iter().all(|s| rate(JOINT_TEST) >= rate(s));
            pass &= ok;
            parts.push(format!(
                "central {} (w1 {:.1}, joint {:.1}, early {:.1}, late {:.1})",
                if ok { "ok" } else { "violated" },
                rate(w1),
                rate(JOINT_TEST),
                rate(&singles[1]),
                rate(&singles[2])
            ));
            continue;
        }
        let mut pairs = vec![(matched.clone(), JOINT_TEST.to_string())];
        pairs.extend(singles.iter().filter(|s| **s != matched).map(|s| (JOINT_TEST.to_string(), s.clone())));
        let mut notes = Vec::new();
        for (hi, lo) in pairs {
            let (diff, se) = paired_difference(study, &hi, &lo, alpha);
            let ok = diff >= 2.0 * se && diff > 0.0;
            pass &= ok;
            notes.push(format!(
                "{hi} {:.1} vs {lo} {:.1}: {:+.1} ({:.1} SE){}",
                rate(&hi),
                rate(&lo),
                100.0 * diff,
                if se > 0.0 { diff / se } else { 0.0 },
                if ok { "" } else { " short" }
            ));
        }
        parts.push(format!("{d}: {}", notes.join("; ")));
    }
    verdict(pass, parts.join(" | "))
}

fn criterion_8(st: &Studies) -> Verdict {
    let ks = uniformity_ks(&st.size[0].randomized_p_values());
    let plain = st.size[0].joint_p_values();
    let at_one = plain.iter().filter(|&&p| p == 1.0).count();
    verdict(
        ks.p_value > 0.01,
        format!(
            "KS D = {:.4}, p = {:.3} on tie-randomized p-values ({at_one} of {} plain p-values equal 1)",
            ks.statistic,
            ks.p_value,
            plain.len()
        ),
    )
}

fn criterion_9(a: &Studies, b: &Studies) -> Verdict {
    let counts = |s: &Studies| -> Vec<usize> {
        s.size
            .iter()
            .chain(std::iter::once(&s.empirical))
            .chain(s.power.iter().map(|(_, p)| p))
            .flat_map(|st| st.rows.iter().map(|r| r.rejections))
            .collect()
    };
    let same_counts = counts(a) == counts(b);
    let same_p = a.size.iter().zip(&b.size).all(|(x, y)| x.outcomes == y.outcomes);
    verdict(
        same_counts && same_p,
        format!(
            "{} rejection counts identical at 1 and 4 threads: {same_counts}; size-study p-values identical: {same_p}",
            counts(a).len()
        ),
    )
}

fn veteran(small_cell: bool, group1: &str) -> (mdir_logrank::SurvivalSample, TestResult) {
    let spec = InputSpec {
        group1: Some(group1.to_string()),
        filters: if small_cell {
            vec!["celltype=smallcell".parse::<Filter>().unwrap()]
        } else {
            vec![]
        },
        ..InputSpec::veteran()
    };
    let sample = load(&spec).unwrap().sample;
    let config = TestConfig {
        iterations: 10_000,
        seed: 42,
        ..TestConfig::default()
    };
    let result = run_test(&sample, &config).unwrap();
    (sample, result)
}

fn criterion_6() -> Verdict {
    let start = Instant::now();
    let (_, small) = veteran(true, "2");
    let (_, full) = veteran(false, "1");
    let single = |r: &TestResult, l: usize| r.singly[l].result.as_ref().unwrap().p_normal;
    let checks = [
        ("small joint", small.p_value, 0.033, 0.053),
        ("small late", single(&small, 2), 0.0, 0.008),
        ("small proportional", single(&small, 0), 0.055, 0.078),
        ("small early", single(&small, 1), 0.26, 0.30),
        ("full joint", full.p_value, 0.074, 0.098),
    ];
    let elapsed = start.elapsed();
    let mut pass = elapsed < Duration::from_secs(120);
    let parts: Vec<String> = checks
        .iter()
        .map(|&(name, p, lo, hi)| {
            pass &= (lo..=hi).contains(&p);
            format!("{name} {p:.4} in [{lo}, {hi}]")
        })
        .collect();
    verdict(pass, format!("{} ({:.1}s)", parts.join(", "), elapsed.as_secs_f64()))
}

fn main() {
    // `cargo test` passes harness flags such as `--nocapture`; listing runs nothing.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut results: Vec<(u32, &str, Verdict)> = Vec::new();
    results.push((1, "exact identities", criterion_1()));
    results.push((2, "subset enumeration equals QP oracle", criterion_2()));
    results.push((3, "rank invariance", criterion_3()));
    let first = run_studies(1);
    let second = run_studies(4);
    results.push((4, "empirical size, squared-multiplier covariance", criterion_4(&first)));
    results.push((5, "empirical size, covariance of the draws", criterion_5(&first)));
    results.push((6, "veteran p-values", criterion_6()));
    results.push((7, "power ordering at the largest theta", criterion_7(&first)));
    results.push((8, "null p-value uniformity", criterion_8(&first)));
    results.push((9, "determinism across thread counts", criterion_9(&first, &second)));
    let mut failed = 0;
    for (id, name, v) in &results {
        println!("criterion {id} [{}] {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
