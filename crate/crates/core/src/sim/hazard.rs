//! Survival-time generators: the standard exponential baseline and its
//! hazard-direction perturbations `A(t) = t + c·W(t)` with
//! `W(t) = ∫_0^t w(1 − e^{−s}) ds`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::weights::{PolynomialWeight, Weight};

const BISECTION_STEPS: usize = 80;

/// Cumulative hazard of a perturbed standard exponential.
#[derive(Debug, Clone)]
pub struct PerturbedHazard {
    weight: Weight,
    /// Signed perturbation size `c` (e.g. `ϑ · c_{j,n}`).
    coefficient: f64,
}

impl PerturbedHazard {
    /// Requires the hazard `1 + c·w(x)` to stay positive on `[0, 1]`.
    pub fn new(weight: Weight, coefficient: f64) -> Result<Self> {
        if !coefficient.is_finite() {
            return Err(Error::Config(format!("perturbation size {coefficient} is not finite")));
        }
        let (lo, hi) = weight_range(&weight);
        let min_hazard = (1.0 + coefficient * lo).min(1.0 + coefficient * hi);
        if min_hazard <= 0.0 {
            return Err(Error::Config(format!(
                "perturbation {coefficient} of weight `{}` makes the hazard nonpositive",
                weight.label()
            )));
        }
        Ok(PerturbedHazard { weight, coefficient })
    }

    pub fn coefficient(&self) -> f64 {
        self.coefficient
    }

    /// `W(t)`: closed form for polynomial weights, Simpson's rule otherwise.
    pub fn weight_integral(&self, t: f64) -> f64 {
        match &self.weight {
            Weight::Polynomial(p) => polynomial_weight_integral(*p, t),
            Weight::General(_) => simpson(|s| self.weight.eval_unchecked(-(-s).exp_m1()), t),
        }
    }

    pub fn cumulative(&self, t: f64) -> f64 {
        if self.coefficient == 0.0 {
            t
        } else {
            t + self.coefficient * self.weight_integral(t)
        }
    }

    /// Solves `A(T) = e` by bracketing and bisection.
    pub fn invert(&self, e: f64) -> f64 {
        if self.coefficient == 0.0 {
            return e;
        }
        let mut lo = 0.0;
        let mut hi = e.max(1.0);
        while self.cumulative(hi) < e {
            lo = hi;
            hi *= 2.0;
        }
        for _ in 0..BISECTION_STEPS {
            let mid = 0.5 * (lo + hi);
            if self.cumulative(mid) < e {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }
}

/// `∫_0^t (1 − e^{−s})^r e^{−g s} ds
///    = Σ_k C(r,k) (−1)^k (1 − e^{−(k+g) t}) / (k+g)`, the `k + g = 0` term being `t`.
pub fn polynomial_weight_integral(p: PolynomialWeight, t: f64) -> f64 {
    let mut total = 0.0;
    let mut binom = 1.0;
    for k in 0..=p.r {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        let rate = (k + p.g) as f64;
        let term = if rate == 0.0 { t } else { -(-rate * t).exp_m1() / rate };
        total += sign * binom * term;
        binom = binom * (p.r - k) as f64 / (k + 1) as f64;
    }
    total
}

fn simpson(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    let panels = 2 * ((t * 256.0).ceil() as usize).max(64);
    let h = t / panels as f64;
    let mut acc = f(0.0) + f(t);
    for i in 1..panels {
        let x = i as f64 * h;
        acc += if i % 2 == 1 { 4.0 * f(x) } else { 2.0 * f(x) };
    }
    acc * h / 3.0
}

/// Smallest and largest value of a weight on `[0, 1]`.
fn weight_range(w: &Weight) -> (f64, f64) {
    match w {
        Weight::Polynomial(p) => {
            let peak = if p.r + p.g == 0 {
                1.0
            } else {
                let x = p.r as f64 / (p.r + p.g) as f64;
                x.powi(p.r as i32) * (1.0 - x).powi(p.g as i32)
            };
            let lo = if p.r == 0 && p.g == 0 { 1.0 } else { 0.0 };
            (lo, peak)
        }
        Weight::General(_) => (0..=1000).map(|k| w.eval_unchecked(k as f64 / 1000.0)).fold(
            (f64::INFINITY, f64::NEG_INFINITY),
            |(lo, hi), v| (lo.min(v), hi.max(v)),
        ),
    }
}

#[derive(Debug, Clone)]
pub enum SurvivalLaw {
    StdExponential,
    Perturbed(PerturbedHazard),
}

impl SurvivalLaw {
    pub fn cumulative(&self, t: f64) -> f64 {
        match self {
            SurvivalLaw::StdExponential => t,
            SurvivalLaw::Perturbed(h) => h.cumulative(t),
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let e = standard_exponential(rng);
        match self {
            SurvivalLaw::StdExponential => e,
            SurvivalLaw::Perturbed(h) => h.invert(e),
        }
    }
}

/// Inverse-CDF draw `−ln(1 − U)`.
pub fn standard_exponential<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    -(-u).ln_1p()
}

pub fn sample_survival<R: Rng + ?Sized>(law: &SurvivalLaw, count: usize, rng: &mut R) -> Vec<f64> {
    (0..count).map(|_| law.draw(rng)).collect()
}

/// Hazard rate `c` of exponential censoring that censors a standard
/// exponential survival time with probability `rate`: `c / (1 + c) = rate`.
/// Rate 0 gives `c = 0`, i.e. no censoring.
pub fn censoring_rate_to_scale(rate: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::Config(format!("censoring rate {rate} is outside [0, 1)")));
    }
    Ok(rate / (1.0 - rate))
}
