#![allow(dead_code)]

use mdir_logrank::rng::substream;
use mdir_logrank::{Group, Subject, SurvivalSample};
use proptest::prelude::*;
use rand::Rng;

/// Random two-sample data with roughly 30% censoring. With `grid`, times are
/// rounded to multiples of it so that ties occur.
pub fn random_sample(seed: u64, max_n: usize, grid: Option<f64>) -> SurvivalSample {
    let mut rng = substream(seed, 99);
    loop {
        let n = rng.random_range(4..=max_n);
        let subjects: Vec<Subject> = (0..n)
            .map(|_| {
                let group = if rng.random_bool(0.5) { Group::First } else { Group::Second };
                let u: f64 = rng.random();
                let mut time = -(-u).ln_1p() * if group == Group::First { 1.0 } else { 1.3 };
                if let Some(h) = grid {
                    time = (time / h).round() * h;
                }
                Subject::new(time, rng.random_bool(0.7), group)
            })
            .collect();
        if let Ok(sample) = SurvivalSample::new(subjects) {
            return sample;
        }
    }
}

/// Samples of 4 to 40 subjects on a coarse time grid, so ties are common.
pub fn sample_strategy() -> impl Strategy<Value = SurvivalSample> {
    prop::collection::vec((1u32..60, any::<bool>(), any::<bool>()), 4..40).prop_filter_map("valid sample", |rows| {
        let subjects = rows
            .into_iter()
            .map(|(t, e, g)| Subject::new(t as f64 / 10.0, e, if g { Group::First } else { Group::Second }))
            .collect();
        SurvivalSample::new(subjects).ok()
    })
}

/// Brute-force at-risk counts `#{X_i >= t}` per group.
pub fn at_risk(sample: &SurvivalSample, t: f64) -> [usize; 2] {
    let mut y = [0; 2];
    for s in sample.subjects() {
        if s.time >= t {
            y[s.group.index()] += 1;
        }
    }
    y
}

/// Pooled Kaplan–Meier `F(t−)` from its product definition over distinct
/// event times strictly before `t`.
pub fn km_left(sample: &SurvivalSample, t: f64) -> f64 {
    let mut times: Vec<f64> = sample.subjects().iter().filter(|s| s.event && s.time < t).map(|s| s.time).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    let mut surv = 1.0;
    for u in times {
        let y = at_risk(sample, u);
        let d = sample.subjects().iter().filter(|s| s.event && s.time == u).count();
        surv *= 1.0 - d as f64 / (y[0] + y[1]) as f64;
    }
    1.0 - surv
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
