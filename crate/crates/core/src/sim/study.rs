//! Monte-Carlo size and power studies of the wild-bootstrap tests.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hazard::{censoring_rate_to_scale, standard_exponential, PerturbedHazard, SurvivalLaw};
use crate::bootstrap::{run_test, CovEstimatorKind, MultiplierKind, TestConfig};
use crate::error::{Error, Result};
use crate::estimators::TieMethod;
use crate::rng::{derive_seed, substream};
use crate::sample::{Group, Subject, SurvivalSample};
use crate::weights::{PolynomialWeight, Weight, WeightSet};

/// Hazard directions used in the power studies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    Proportional,
    Early,
    Late,
    Central,
}

impl Direction {
    pub const ALL: [Direction; 4] = [Direction::Proportional, Direction::Early, Direction::Late, Direction::Central];

    pub fn weight(self) -> PolynomialWeight {
        match self {
            Direction::Proportional => PolynomialWeight::PROPORTIONAL,
            Direction::Early => PolynomialWeight::EARLY,
            Direction::Late => PolynomialWeight::LATE,
            Direction::Central => PolynomialWeight::CENTRAL,
        }
    }

    /// The eight equidistant ϑ values studied for this direction.
    pub fn default_thetas(self) -> Vec<f64> {
        let (lo, hi) = match self {
            Direction::Proportional => (0.1, 0.8),
            Direction::Early | Direction::Late => (0.3, 2.4),
            Direction::Central => (0.2, 1.6),
        };
        linspace(lo, hi, 8)
    }

    pub fn name(self) -> &'static str {
        match self {
            Direction::Proportional => "proportional",
            Direction::Early => "early",
            Direction::Late => "late",
            Direction::Central => "central",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "proportional" | "prop" => Ok(Direction::Proportional),
            "early" => Ok(Direction::Early),
            "late" => Ok(Direction::Late),
            "central" => Ok(Direction::Central),
            other => Err(Error::Config(format!("unknown direction `{other}`"))),
        }
    }
}

pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => vec![],
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

#[derive(Debug, Clone)]
pub enum Alternative {
    Null,
    HazardDirection { weight: Weight, theta: f64 },
}

/// Whether ϑ enters the hazards divided by `√n` (local alternatives) or as is.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThetaScaling {
    #[default]
    Local,
    Fixed,
}

/// Which groups' hazards are perturbed under an alternative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbedGroups {
    /// Group 1 up and group 2 down, `c_j = (−1)^{j+1} n_j^{-1} (n1 n2 / n)^{1/2}`.
    #[default]
    Both,
    FirstOnly,
}

#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub n1: usize,
    pub n2: usize,
    /// Average censoring rates of the two groups.
    pub censoring: [f64; 2],
    pub alternative: Alternative,
    pub scaling: ThetaScaling,
    pub perturbed: PerturbedGroups,
    pub weights: WeightSet,
    pub multiplier: MultiplierKind,
    pub covariance: CovEstimatorKind,
    pub alpha: f64,
    pub n_sim: usize,
    pub n_boot: usize,
    pub master_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            n1: 50,
            n2: 50,
            censoring: [0.15, 0.15],
            alternative: Alternative::Null,
            scaling: ThetaScaling::Local,
            perturbed: PerturbedGroups::Both,
            weights: WeightSet::default_directions(),
            multiplier: MultiplierKind::Rademacher,
            covariance: CovEstimatorKind::SquaredMultiplier,
            alpha: 0.05,
            n_sim: 2000,
            n_boot: 500,
            master_seed: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n1 == 0 || self.n2 == 0 {
            return Err(Error::Config("both groups need at least one subject".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 0.5) {
            return Err(Error::Config(format!("alpha {} is outside (0, 0.5)", self.alpha)));
        }
        if self.n_sim == 0 || self.n_boot == 0 {
            return Err(Error::Config("n_sim and n_boot must be positive".into()));
        }
        for rate in self.censoring {
            censoring_rate_to_scale(rate)?;
        }
        if let Alternative::HazardDirection { theta, .. } = &self.alternative {
            if !(theta.is_finite() && *theta >= 0.0) {
                return Err(Error::Config(format!("theta {theta} must be finite and nonnegative")));
            }
        }
        self.laws().map(|_| ())
    }

    /// Perturbation size of each group's hazard.
    pub fn coefficients(&self, theta: f64) -> [f64; 2] {
        let (n1, n2) = (self.n1 as f64, self.n2 as f64);
        let n = n1 + n2;
        let root = (n1 * n2 / n).sqrt();
        let factor = match self.scaling {
            ThetaScaling::Local => 1.0,
            ThetaScaling::Fixed => n.sqrt(),
        };
        let c1 = theta * root / n1 * factor;
        let c2 = match self.perturbed {
            PerturbedGroups::Both => -theta * root / n2 * factor,
            PerturbedGroups::FirstOnly => 0.0,
        };
        [c1, c2]
    }

    fn laws(&self) -> Result<[SurvivalLaw; 2]> {
        Ok(match &self.alternative {
            Alternative::Null => [SurvivalLaw::StdExponential, SurvivalLaw::StdExponential],
            Alternative::HazardDirection { weight, theta } => {
                let [c1, c2] = self.coefficients(*theta);
                [
                    SurvivalLaw::Perturbed(PerturbedHazard::new(weight.clone(), c1)?),
                    SurvivalLaw::Perturbed(PerturbedHazard::new(weight.clone(), c2)?),
                ]
            }
        })
    }

    pub fn theta(&self) -> f64 {
        match &self.alternative {
            Alternative::Null => 0.0,
            Alternative::HazardDirection { theta, .. } => *theta,
        }
    }

    pub fn scenario_id(&self) -> String {
        let alt = match &self.alternative {
            Alternative::Null => "null".to_string(),
            Alternative::HazardDirection { weight, .. } => format!("dir{}", weight.label()),
        };
        format!(
            "n{}-{}_c{}-{}_{}_{}_{}",
            self.n1,
            self.n2,
            (self.censoring[0] * 100.0).round(),
            (self.censoring[1] * 100.0).round(),
            self.multiplier,
            self.covariance,
            alt
        )
    }

    fn test_config(&self, replication: usize) -> TestConfig {
        TestConfig {
            weights: self.weights.clone(),
            multiplier: self.multiplier,
            covariance: self.covariance,
            iterations: self.n_boot,
            seed: derive_seed(self.master_seed, 2 * replication as u64 + 1),
            ties: TieMethod::Sequential,
        }
    }
}

/// Dataset of replication `replication`: group 1 subjects first, each
/// drawing its survival time and then its censoring time.
pub fn generate_dataset(config: &ScenarioConfig, replication: usize) -> Result<SurvivalSample> {
    let laws = config.laws()?;
    let rates = [
        censoring_rate_to_scale(config.censoring[0])?,
        censoring_rate_to_scale(config.censoring[1])?,
    ];
    let mut rng = substream(derive_seed(config.master_seed, 2 * replication as u64), 0);
    let mut subjects = Vec::with_capacity(config.n1 + config.n2);
    for (group, size) in [(Group::First, config.n1), (Group::Second, config.n2)] {
        let law = &laws[group.index()];
        let rate = rates[group.index()];
        for _ in 0..size {
            let t = law.draw(&mut rng);
            let c = if rate > 0.0 {
                standard_exponential(&mut rng) / rate
            } else {
                f64::INFINITY
            };
            subjects.push(Subject::new(t.min(c), t <= c, group));
        }
    }
    SurvivalSample::new(subjects)
}

/// p-values of one simulated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationOutcome {
    pub joint: f64,
    /// Joint p-value with ties between `S_n` and the draws broken at random,
    /// see [`randomized_p_value`].
    pub joint_randomized: f64,
    pub singles: Vec<f64>,
}

/// `(#{draws > s} + U (1 + #{draws = s})) / (B + 1)` with `U ~ Uniform(0, 1)`.
///
/// The plain Monte-Carlo p-value equals 1 whenever `S_n = 0`, an event of
/// positive probability, so its null law has an atom at 1. Spreading ties
/// uniformly removes the atom and leaves a continuous p-value.
pub fn randomized_p_value(observed: f64, draws: &[f64], u: f64) -> f64 {
    let greater = draws.iter().filter(|&&d| d > observed).count();
    let equal = draws.iter().filter(|&&d| d == observed).count();
    (greater as f64 + u * (1 + equal) as f64) / (draws.len() + 1) as f64
}

pub fn run_replication(config: &ScenarioConfig, replication: usize) -> Result<ReplicationOutcome> {
    let sample = match generate_dataset(config, replication) {
        Ok(s) => s,
        // A dataset without events carries no evidence against the null.
        Err(Error::AllCensored) => {
            return Ok(ReplicationOutcome {
                joint: 1.0,
                joint_randomized: 1.0,
                singles: vec![1.0; config.weights.len()],
            })
        }
        Err(e) => return Err(e),
    };
    let result = run_test(&sample, &config.test_config(replication))?;
    let u: f64 = substream(derive_seed(config.master_seed, 2 * replication as u64), 1).random();
    Ok(ReplicationOutcome {
        joint: result.p_value,
        joint_randomized: randomized_p_value(result.s_n, &result.draws, u),
        singles: result.singly.iter().map(|s| s.p_bootstrap).collect(),
    })
}

pub fn run_replications(config: &ScenarioConfig) -> Result<Vec<ReplicationOutcome>> {
    config.validate()?;
    (0..config.n_sim)
        .into_par_iter()
        .map(|r| run_replication(config, r))
        .collect()
}

/// Wilson score interval for `successes / trials` at normal quantile `z`.
pub fn wilson_interval(successes: usize, trials: usize, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

const WILSON_Z95: f64 = 1.959_963_984_540_054;

/// Rejection rate of one test at one ϑ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionSummary {
    pub scenario_id: String,
    pub test: String,
    pub theta: f64,
    pub rejections: usize,
    pub n_sim: usize,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl RejectionSummary {
    fn new(scenario_id: &str, test: String, theta: f64, rejections: usize, n_sim: usize) -> Self {
        let (ci_lo, ci_hi) = wilson_interval(rejections, n_sim, WILSON_Z95);
        RejectionSummary {
            scenario_id: scenario_id.to_string(),
            test,
            theta,
            rejections,
            n_sim,
            rate: rejections as f64 / n_sim as f64,
            ci_lo,
            ci_hi,
        }
    }

    /// Binomial standard error of the rate.
    pub fn std_error(&self) -> f64 {
        (self.rate * (1.0 - self.rate) / self.n_sim as f64).sqrt()
    }
}

pub const JOINT_TEST: &str = "joint";

pub fn single_test_name(label: &str) -> String {
    format!("single:{label}")
}

fn summarize(config: &ScenarioConfig, outcomes: &[ReplicationOutcome]) -> Vec<RejectionSummary> {
    let id = config.scenario_id();
    let theta = config.theta();
    let count = |f: &dyn Fn(&ReplicationOutcome) -> f64| outcomes.iter().filter(|o| f(o) <= config.alpha).count();
    let mut rows = vec![RejectionSummary::new(
        &id,
        JOINT_TEST.to_string(),
        theta,
        count(&|o| o.joint),
        outcomes.len(),
    )];
    for (l, label) in config.weights.labels().iter().enumerate() {
        rows.push(RejectionSummary::new(
            &id,
            single_test_name(label),
            theta,
            count(&|o| o.singles[l]),
            outcomes.len(),
        ));
    }
    rows
}

#[derive(Debug, Clone)]
pub struct StudyOutcome {
    pub rows: Vec<RejectionSummary>,
    pub outcomes: Vec<ReplicationOutcome>,
}

impl StudyOutcome {
    pub fn row(&self, test: &str) -> Option<&RejectionSummary> {
        self.rows.iter().find(|r| r.test == test)
    }

    pub fn joint(&self) -> &RejectionSummary {
        self.row(JOINT_TEST).expect("joint row is always present")
    }

    pub fn joint_p_values(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.joint).collect()
    }

    pub fn randomized_p_values(&self) -> Vec<f64> {
        self.outcomes.iter().map(|o| o.joint_randomized).collect()
    }
}

pub fn empirical_size_study(config: &ScenarioConfig) -> Result<StudyOutcome> {
    if !matches!(config.alternative, Alternative::Null) {
        return Err(Error::Config("a size study needs the null alternative".into()));
    }
    let outcomes = run_replications(config)?;
    Ok(StudyOutcome {
        rows: summarize(config, &outcomes),
        outcomes,
    })
}

/// Power of the joint and singly-weighted tests along a ϑ grid.
pub fn power_curve_study(base: &ScenarioConfig, direction: &Weight, thetas: &[f64]) -> Result<Vec<StudyOutcome>> {
    if thetas.is_empty() {
        return Err(Error::Config("empty theta grid".into()));
    }
    thetas
        .iter()
        .map(|&theta| {
            let config = ScenarioConfig {
                alternative: Alternative::HazardDirection {
                    weight: direction.clone(),
                    theta,
                },
                ..base.clone()
            };
            let outcomes = run_replications(&config)?;
            Ok(StudyOutcome {
                rows: summarize(&config, &outcomes),
                outcomes,
            })
        })
        .collect()
}

pub fn write_csv<W: Write>(rows: &[RejectionSummary], out: W) -> Result<()> {
    let io = |e: csv::Error| Error::Config(format!("writing CSV failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["scenario_id", "test", "theta", "power", "ci_lo", "ci_hi"])
        .map_err(io)?;
    for r in rows {
        w.write_record([
            r.scenario_id.clone(),
            r.test.clone(),
            r.theta.to_string(),
            r.rate.to_string(),
            r.ci_lo.to_string(),
            r.ci_hi.to_string(),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| Error::Config(format!("writing CSV failed: {e}")))
}

pub fn format_summary(rows: &[RejectionSummary]) -> String {
    let mut s = format!(
        "{:<44} {:<12} {:>8} {:>9} {:>19}\n",
        "scenario", "test", "theta", "rate %", "95% CI %"
    );
    for r in rows {
        s.push_str(&format!(
            "{:<44} {:<12} {:>8.4} {:>9.3} {:>8.3} - {:>8.3}\n",
            r.scenario_id,
            r.test,
            r.theta,
            100.0 * r.rate,
            100.0 * r.ci_lo,
            100.0 * r.ci_hi
        ));
    }
    s
}

/// One-sample Kolmogorov–Smirnov test against Uniform(0, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p_value: f64,
}

pub fn uniformity_ks(p_values: &[f64]) -> KsOutcome {
    let mut sorted = p_values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let statistic = sorted.iter().enumerate().fold(0.0f64, |d, (i, &p)| {
        let above = (i + 1) as f64 / n - p;
        let below = p - i as f64 / n;
        d.max(above).max(below)
    });
    KsOutcome {
        statistic,
        p_value: kolmogorov_survival(statistic, sorted.len()),
    }
}

/// `P(D_n > d)` from the Kolmogorov limit with Stephens' finite-n correction.
pub fn kolmogorov_survival(d: f64, n: usize) -> f64 {
    let sn = (n as f64).sqrt();
    let lambda = (sn + 0.12 + 0.11 / sn) * d;
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for j in 1..=100 {
        let j = j as f64;
        let term = (-2.0 * j * j * lambda * lambda).exp();
        sum += if j as usize % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}
