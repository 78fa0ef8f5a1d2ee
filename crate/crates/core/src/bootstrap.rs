//! Wild bootstrap of the projection statistic: each subject's counting
//! process is multiplied by an independent mean-zero, unit-variance
//! multiplier, and the bootstrap statistic is studentized either by the
//! squared-multiplier covariance or by the empirical covariance of the
//! bootstrap vectors.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{EventTable, TieMethod};
use crate::logrank::{singly_from_parts, EventDesign, SinglyWeightedResult};
use crate::projection::{max_projection_statistic, ProjectionSolver};
use crate::rng::substream;
use crate::sample::SurvivalSample;
use crate::weights::WeightSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MultiplierKind {
    /// Uniform on `{-1, +1}`.
    Rademacher,
    StandardNormal,
    /// `Poisson(1) - 1`.
    CenteredPoisson,
}

impl MultiplierKind {
    pub fn draw<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            MultiplierKind::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            MultiplierKind::StandardNormal => StandardNormal.sample(rng),
            MultiplierKind::CenteredPoisson => {
                let p: f64 = Poisson::new(1.0).expect("valid rate").sample(rng);
                p - 1.0
            }
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MultiplierKind::Rademacher => "rademacher",
            MultiplierKind::StandardNormal => "normal",
            MultiplierKind::CenteredPoisson => "poisson",
        }
    }
}

impl fmt::Display for MultiplierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MultiplierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rademacher" => Ok(MultiplierKind::Rademacher),
            "normal" | "standard-normal" => Ok(MultiplierKind::StandardNormal),
            "poisson" | "centered-poisson" => Ok(MultiplierKind::CenteredPoisson),
            other => Err(Error::Config(format!("unknown multiplier `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovEstimatorKind {
    /// Covariance with each event weighted by its squared multiplier.
    SquaredMultiplier,
    /// Sample covariance of the bootstrap vectors, shared by the data
    /// statistic and every draw.
    EmpiricalOfDraws,
}

impl CovEstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            CovEstimatorKind::SquaredMultiplier => "squared",
            CovEstimatorKind::EmpiricalOfDraws => "empirical",
        }
    }
}

impl fmt::Display for CovEstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for CovEstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "squared" | "squared-multiplier" => Ok(CovEstimatorKind::SquaredMultiplier),
            "empirical" | "empirical-of-draws" => Ok(CovEstimatorKind::EmpiricalOfDraws),
            other => Err(Error::Config(format!("unknown covariance estimator `{other}`"))),
        }
    }
}

pub fn draw_multipliers<R: Rng + ?Sized>(kind: MultiplierKind, n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| kind.draw(rng)).collect()
}

/// Multipliers of bootstrap iteration `iteration`.
pub fn iteration_multipliers(kind: MultiplierKind, n: usize, seed: u64, iteration: u64) -> Vec<f64> {
    draw_multipliers(kind, n, &mut substream(seed, iteration))
}

fn check_multipliers(design: &EventDesign, multipliers: &[f64]) -> Result<()> {
    if multipliers.len() != design.n_subjects() {
        return Err(Error::ShapeError(format!(
            "{} multipliers for {} subjects",
            multipliers.len(),
            design.n_subjects()
        )));
    }
    Ok(())
}

/// Bootstrap vector `T^G`: the logrank vector with each event scaled by
/// its subject's multiplier.
pub fn bootstrap_vector(events: &EventTable, weights: &WeightSet, multipliers: &[f64]) -> Result<DVector<f64>> {
    let design = EventDesign::new(events, weights);
    check_multipliers(&design, multipliers)?;
    let mut out = vec![0.0; design.dim()];
    design.weighted_vector(|i| multipliers[i], &mut out);
    Ok(DVector::from_vec(out))
}

/// Covariance with each event weighted by its subject's squared multiplier.
pub fn squared_multiplier_covariance(
    events: &EventTable,
    weights: &WeightSet,
    multipliers: &[f64],
) -> Result<DMatrix<f64>> {
    let design = EventDesign::new(events, weights);
    check_multipliers(&design, multipliers)?;
    Ok(design.weighted_covariance(|i| multipliers[i] * multipliers[i]))
}

/// `S^G`: the projection statistic of `T^G` studentized by `covariance`.
pub fn bootstrap_statistic(
    events: &EventTable,
    weights: &WeightSet,
    multipliers: &[f64],
    covariance: &DMatrix<f64>,
) -> Result<f64> {
    let t = bootstrap_vector(events, weights, multipliers)?;
    Ok(max_projection_statistic(&t, covariance)?.value)
}

#[derive(Debug, Clone)]
pub struct TestConfig {
    pub weights: WeightSet,
    pub multiplier: MultiplierKind,
    pub covariance: CovEstimatorKind,
    pub iterations: usize,
    pub seed: u64,
    pub ties: TieMethod,
}

impl TestConfig {
    pub fn new(weights: WeightSet) -> TestConfig {
        TestConfig {
            weights,
            ..TestConfig::default()
        }
    }
}

impl Default for TestConfig {
    fn default() -> Self {
        TestConfig {
            weights: WeightSet::default_directions(),
            multiplier: MultiplierKind::Rademacher,
            covariance: CovEstimatorKind::SquaredMultiplier,
            iterations: 10_000,
            seed: 1,
            ties: TieMethod::Sequential,
        }
    }
}

/// Singly-weighted results for one weight of the set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinglyReport {
    pub weight: String,
    /// `None` when the weight's variance estimate is zero.
    pub result: Option<SinglyWeightedResult>,
    /// Wild-bootstrap p-value of the one-weight projection statistic,
    /// computed from the same multipliers as the joint test.
    pub p_bootstrap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub s_n: f64,
    pub t_vec: Vec<f64>,
    /// Row-major plug-in covariance `Σ̂` studentizing the data statistic.
    pub sigma: Vec<f64>,
    pub active_subset: Vec<usize>,
    pub draws: Vec<f64>,
    pub p_value: f64,
    pub singly: Vec<SinglyReport>,
    pub weights: Vec<String>,
    pub multiplier: MultiplierKind,
    pub covariance: CovEstimatorKind,
    pub iterations: usize,
    pub seed: u64,
    pub ties: TieMethod,
}

/// `(1 + #{draws >= observed}) / (B + 1)`.
pub fn monte_carlo_p_value(observed: f64, draws: impl IntoIterator<Item = f64>) -> f64 {
    let mut count = 0usize;
    let mut total = 0usize;
    for d in draws {
        total += 1;
        if d >= observed {
            count += 1;
        }
    }
    (1 + count) as f64 / (total + 1) as f64
}

/// One-weight projection statistic `t²/σ² · 1{t > 0}`.
fn single_statistic(t: f64, variance: f64) -> f64 {
    if t > 0.0 && variance > 0.0 {
        t * t / variance
    } else {
        0.0
    }
}

struct Draw {
    t: Vec<f64>,
    stat: f64,
    singles: Vec<f64>,
}

/// Wild-bootstrap test of the projection statistic, reproducible from the seed.
pub fn run_test(sample: &SurvivalSample, config: &TestConfig) -> Result<TestResult> {
    if config.iterations < 1 {
        return Err(Error::Config("the number of bootstrap iterations must be at least 1".into()));
    }
    let events = EventTable::new(sample, config.ties);
    let design = EventDesign::new(&events, &config.weights);
    let m = design.dim();
    let n = design.n_subjects();
    let t = design.logrank_vector();
    let sigma_hat = design.covariance_matrix();
    let labels = config.weights.labels();

    let draw_vector = |b: usize| -> Vec<f64> {
        let g = iteration_multipliers(config.multiplier, n, config.seed, b as u64);
        let mut tg = vec![0.0; m];
        design.weighted_vector(|i| g[i], &mut tg);
        tg
    };

    let draws: Vec<Draw> = match config.covariance {
        CovEstimatorKind::SquaredMultiplier => {
            // Rademacher multipliers square to one, so Σ^G = Σ̂ for every draw.
            let fixed = match config.multiplier {
                MultiplierKind::Rademacher => Some(ProjectionSolver::new(&sigma_hat)?),
                _ => None,
            };
            let draws = (0..config.iterations)
                .into_par_iter()
                .map(|b| -> Result<Draw> {
                    let g = iteration_multipliers(config.multiplier, n, config.seed, b as u64);
                    let mut tg = vec![0.0; m];
                    design.weighted_vector(|i| g[i], &mut tg);
                    let (stat, diag) = match &fixed {
                        Some(solver) => (
                            solver.evaluate_unchecked(&tg).value,
                            sigma_hat.diagonal().as_slice().to_vec(),
                        ),
                        None => {
                            let cov = design.weighted_covariance(|i| g[i] * g[i]);
                            let stat = ProjectionSolver::new(&cov)?.evaluate_unchecked(&tg).value;
                            (stat, cov.diagonal().as_slice().to_vec())
                        }
                    };
                    let singles = tg.iter().zip(&diag).map(|(&x, &v)| single_statistic(x, v)).collect();
                    Ok(Draw { t: tg, stat, singles })
                })
                .collect::<Result<Vec<_>>>()?;
            draws
        }
        // The covariance of the draws studentizes the draws only; the data
        // statistic keeps the plug-in estimate.
        CovEstimatorKind::EmpiricalOfDraws => {
            let vectors: Vec<Vec<f64>> = (0..config.iterations).into_par_iter().map(draw_vector).collect();
            let cov = empirical_covariance(&vectors, m);
            let solver = ProjectionSolver::new(&cov)?;
            let diag = cov.diagonal();
            vectors
                .into_par_iter()
                .map(|tg| {
                    let stat = solver.evaluate_unchecked(&tg).value;
                    let singles = tg.iter().zip(diag.iter()).map(|(&x, &v)| single_statistic(x, v)).collect();
                    Draw { t: tg, stat, singles }
                })
                .collect()
        }
    };

    let projection = ProjectionSolver::new(&sigma_hat)?.evaluate(t.as_slice())?;
    let s_n = projection.value;
    let p_value = monte_carlo_p_value(s_n, draws.iter().map(|d| d.stat));

    let singly = (0..m)
        .map(|l| {
            let observed = single_statistic(t[l], sigma_hat[(l, l)]);
            SinglyReport {
                weight: labels[l].clone(),
                result: singly_from_parts(t[l], sigma_hat[(l, l)], &labels[l]).ok(),
                p_bootstrap: monte_carlo_p_value(observed, draws.iter().map(|d| d.singles[l])),
            }
        })
        .collect();

    debug_assert!(draws.iter().all(|d| d.t.len() == m));
    Ok(TestResult {
        s_n,
        t_vec: t.as_slice().to_vec(),
        sigma: sigma_hat.transpose().as_slice().to_vec(),
        active_subset: projection.active_subset,
        draws: draws.iter().map(|d| d.stat).collect(),
        p_value,
        singly,
        weights: labels,
        multiplier: config.multiplier,
        covariance: config.covariance,
        iterations: config.iterations,
        seed: config.seed,
        ties: config.ties,
    })
}

/// Sample covariance (denominator `B - 1`, or `B` for a single draw).
pub fn empirical_covariance(vectors: &[Vec<f64>], m: usize) -> DMatrix<f64> {
    let b = vectors.len();
    let mut mean = vec![0.0; m];
    for v in vectors {
        for (acc, x) in mean.iter_mut().zip(v) {
            *acc += x;
        }
    }
    mean.iter_mut().for_each(|x| *x /= b as f64);
    let mut cov = DMatrix::zeros(m, m);
    for v in vectors {
        for r in 0..m {
            let dr = v[r] - mean[r];
            for s in r..m {
                cov[(r, s)] += dr * (v[s] - mean[s]);
            }
        }
    }
    let denom = if b > 1 { (b - 1) as f64 } else { 1.0 };
    for r in 0..m {
        for s in r..m {
            let value = cov[(r, s)] / denom;
            cov[(r, s)] = value;
            cov[(s, r)] = value;
        }
    }
    cov
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample::{Group, Subject};

    fn small_sample() -> SurvivalSample {
        let data = [
            (0.3, true, Group::First),
            (1.2, true, Group::Second),
            (0.7, false, Group::First),
            (2.5, true, Group::Second),
            (0.9, true, Group::First),
            (1.6, true, Group::Second),
            (0.2, true, Group::Second),
            (3.1, false, Group::First),
        ];
        SurvivalSample::new(data.iter().map(|&(t, e, g)| Subject::new(t, e, g)).collect()).unwrap()
    }

    #[test]
    fn rademacher_draws_are_signs() {
        let mut rng = substream(3, 0);
        assert!(draw_multipliers(MultiplierKind::Rademacher, 1000, &mut rng)
            .iter()
            .all(|&g| g == 1.0 || g == -1.0));
    }

    #[test]
    fn parses_names() {
        assert_eq!("Rademacher".parse::<MultiplierKind>().unwrap(), MultiplierKind::Rademacher);
        assert_eq!("poisson".parse::<MultiplierKind>().unwrap(), MultiplierKind::CenteredPoisson);
        assert_eq!("normal".parse::<MultiplierKind>().unwrap(), MultiplierKind::StandardNormal);
        assert!("gamma".parse::<MultiplierKind>().is_err());
        assert_eq!("empirical".parse::<CovEstimatorKind>().unwrap(), CovEstimatorKind::EmpiricalOfDraws);
        assert!("other".parse::<CovEstimatorKind>().is_err());
    }

    #[test]
    fn zero_iterations_is_a_config_error() {
        let config = TestConfig {
            iterations: 0,
            ..TestConfig::default()
        };
        assert!(matches!(run_test(&small_sample(), &config), Err(Error::Config(_))));
    }

    #[test]
    fn unit_multipliers_restore_data_statistic() {
        let s = small_sample();
        let events = EventTable::new(&s, TieMethod::Sequential);
        let w = WeightSet::default_directions();
        let ones = vec![1.0; s.len()];
        let design = EventDesign::new(&events, &w);
        assert_eq!(bootstrap_vector(&events, &w, &ones).unwrap(), design.logrank_vector());
        assert_eq!(
            squared_multiplier_covariance(&events, &w, &ones).unwrap(),
            design.covariance_matrix()
        );
        let zeros = vec![0.0; s.len()];
        assert_eq!(bootstrap_vector(&events, &w, &zeros).unwrap(), DVector::zeros(3));
        assert_eq!(squared_multiplier_covariance(&events, &w, &zeros).unwrap(), DMatrix::zeros(3, 3));
        let sigma = design.covariance_matrix();
        assert_eq!(bootstrap_statistic(&events, &w, &zeros, &sigma).unwrap(), 0.0);
    }

    #[test]
    fn wrong_multiplier_count_is_a_shape_error() {
        let s = small_sample();
        let events = EventTable::new(&s, TieMethod::Sequential);
        let w = WeightSet::default_directions();
        assert!(matches!(bootstrap_vector(&events, &w, &[1.0]), Err(Error::ShapeError(_))));
    }

    #[test]
    fn p_value_convention() {
        assert_eq!(monte_carlo_p_value(1.0, [0.5, 1.0, 2.0]), 0.75);
        assert_eq!(monte_carlo_p_value(5.0, [0.5, 1.0, 2.0]), 0.25);
        assert_eq!(monte_carlo_p_value(0.0, [0.0, 0.0]), 1.0);
    }

    #[test]
    fn run_test_is_seed_deterministic() {
        let config = TestConfig {
            iterations: 200,
            seed: 11,
            ..TestConfig::default()
        };
        let a = run_test(&small_sample(), &config).unwrap();
        let b = run_test(&small_sample(), &config).unwrap();
        assert_eq!(a, b);
        assert!(a.p_value >= 1.0 / 201.0 && a.p_value <= 1.0);
        assert!(a.draws.iter().all(|&d| d >= 0.0));
    }

    #[test]
    fn empirical_covariance_of_two_points() {
        let cov = empirical_covariance(&[vec![1.0, 0.0], vec![-1.0, 2.0]], 2);
        assert_eq!(cov, DMatrix::from_row_slice(2, 2, &[2.0, -2.0, -2.0, 2.0]));
    }
}
