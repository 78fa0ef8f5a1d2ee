//! Weight functions on `[0, 1]`, evaluated at the pooled Kaplan–Meier left
//! limit, and selection of linearly independent weight sets.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Right end of the interval `[0, ε]` on which general weights are compared.
pub const INDEPENDENCE_EPSILON: f64 = 0.1;
pub const INDEPENDENCE_GRID_POINTS: usize = 201;
/// Singular values below this fraction of the largest count as zero.
pub const INDEPENDENCE_RANK_TOLERANCE: f64 = 1e-10;

/// `w(x) = x^r (1 - x)^g`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct PolynomialWeight {
    pub r: u32,
    pub g: u32,
}

impl PolynomialWeight {
    pub const PROPORTIONAL: PolynomialWeight = PolynomialWeight { r: 0, g: 0 };
    pub const EARLY: PolynomialWeight = PolynomialWeight { r: 0, g: 4 };
    pub const LATE: PolynomialWeight = PolynomialWeight { r: 4, g: 0 };
    pub const CENTRAL: PolynomialWeight = PolynomialWeight { r: 1, g: 1 };

    pub fn new(r: u32, g: u32) -> Self {
        PolynomialWeight { r, g }
    }

    fn eval(&self, x: f64) -> f64 {
        x.powi(self.r as i32) * (1.0 - x).powi(self.g as i32)
    }

    /// Monomial coefficients `c_k` of `sum_k c_k x^k`.
    fn monomial_coefficients(&self) -> Vec<BigInt> {
        let degree = (self.r + self.g) as usize;
        let mut coeffs = vec![BigInt::zero(); degree + 1];
        let mut binom = BigInt::one();
        for k in 0..=self.g as usize {
            let c = if k % 2 == 0 { binom.clone() } else { -binom.clone() };
            coeffs[self.r as usize + k] = c;
            binom = binom * BigInt::from(self.g as usize - k) / BigInt::from(k + 1);
        }
        coeffs
    }
}

impl fmt::Display for PolynomialWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.r, self.g)
    }
}

impl FromStr for PolynomialWeight {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("weight `{s}` is not of the form r:g"));
        let (r, g) = s.trim().split_once(':').ok_or_else(bad)?;
        Ok(PolynomialWeight {
            r: r.trim().parse().map_err(|_| bad())?,
            g: g.trim().parse().map_err(|_| bad())?,
        })
    }
}

/// Caller-supplied weight function. The evaluator must be side-effect free,
/// continuous and of bounded variation.
#[derive(Clone)]
pub struct GeneralWeight {
    label: String,
    evaluator: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl GeneralWeight {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        GeneralWeight {
            label: label.into(),
            evaluator: Arc::new(f),
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for GeneralWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GeneralWeight")
            .field("label", &self.label)
            .finish_non_exhaustive()
    }
}

#[derive(Debug, Clone)]
pub enum Weight {
    Polynomial(PolynomialWeight),
    General(GeneralWeight),
}

impl Weight {
    pub fn polynomial(r: u32, g: u32) -> Weight {
        Weight::Polynomial(PolynomialWeight::new(r, g))
    }

    pub fn general(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Weight {
        Weight::General(GeneralWeight::new(label, f))
    }

    pub fn evaluate(&self, x: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&x) {
            return Err(Error::DomainError(x));
        }
        Ok(self.eval_unchecked(x))
    }

    /// Evaluation without the domain check, for arguments already known to
    /// lie in `[0, 1]` (Kaplan–Meier values).
    pub(crate) fn eval_unchecked(&self, x: f64) -> f64 {
        match self {
            Weight::Polynomial(p) => p.eval(x),
            Weight::General(g) => (g.evaluator)(x),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Weight::Polynomial(p) => p.to_string(),
            Weight::General(g) => g.label.clone(),
        }
    }

    pub fn as_polynomial(&self) -> Option<PolynomialWeight> {
        match self {
            Weight::Polynomial(p) => Some(*p),
            Weight::General(_) => None,
        }
    }
}

impl From<PolynomialWeight> for Weight {
    fn from(p: PolynomialWeight) -> Self {
        Weight::Polynomial(p)
    }
}

/// Parses the comma-separated `r:g` list used on the command line.
pub fn parse_weight_list(s: &str) -> Result<Vec<PolynomialWeight>> {
    let list: Vec<PolynomialWeight> = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(str::parse)
        .collect::<Result<_>>()?;
    if list.is_empty() {
        return Err(Error::Config("empty weight list".into()));
    }
    Ok(list)
}

/// Upper bound on the number of weights; the projection statistic
/// enumerates all `2^m - 1` subsets.
pub const MAX_WEIGHTS: usize = 12;

/// Ordered, linearly independent weights.
#[derive(Debug, Clone)]
pub struct WeightSet {
    weights: Vec<Weight>,
    allow_signed: bool,
}

/// Outcome of [`select_independent_subset`].
#[derive(Debug, Clone)]
pub struct Selection {
    pub set: WeightSet,
    /// Input positions of candidates that were dropped.
    pub dropped: Vec<usize>,
}

impl WeightSet {
    /// The three directions used by default: proportional, early and late.
    pub fn default_directions() -> WeightSet {
        WeightSet {
            weights: vec![
                PolynomialWeight::PROPORTIONAL.into(),
                PolynomialWeight::EARLY.into(),
                PolynomialWeight::LATE.into(),
            ],
            allow_signed: false,
        }
    }

    /// Builds a set that must already be independent.
    pub fn new(weights: Vec<Weight>) -> Result<WeightSet> {
        Self::with_sign_policy(weights, false)
    }

    pub fn with_sign_policy(weights: Vec<Weight>, allow_signed: bool) -> Result<WeightSet> {
        let n = weights.len();
        let selection = select_independent_subset(weights, allow_signed)?;
        if !selection.dropped.is_empty() {
            return Err(Error::Config(format!(
                "weights at positions {:?} are linearly dependent on earlier ones",
                selection.dropped
            )));
        }
        debug_assert_eq!(selection.set.len(), n);
        Ok(selection.set)
    }

    pub fn single(weight: Weight) -> Result<WeightSet> {
        Self::new(vec![weight])
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn allows_signed(&self) -> bool {
        self.allow_signed
    }

    pub fn labels(&self) -> Vec<String> {
        self.weights.iter().map(Weight::label).collect()
    }

    /// The single weight at position `i` as its own set.
    pub fn component(&self, i: usize) -> WeightSet {
        WeightSet {
            weights: vec![self.weights[i].clone()],
            allow_signed: self.allow_signed,
        }
    }

    /// Evaluates every weight at `x` into `out`.
    pub(crate) fn eval_into(&self, x: f64, out: &mut [f64]) {
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o = w.eval_unchecked(x);
        }
    }
}

fn check_membership(w: &Weight, allow_signed: bool) -> Result<()> {
    let Weight::General(g) = w else {
        return Ok(());
    };
    let invalid = |reason: &str| Error::InvalidWeight {
        label: g.label.clone(),
        reason: reason.to_string(),
    };
    let mut any_nonzero = false;
    for k in 0..=1000 {
        let v = (g.evaluator)(k as f64 / 1000.0);
        if !v.is_finite() {
            return Err(invalid("not finite on [0, 1]"));
        }
        if v < 0.0 && !allow_signed {
            return Err(invalid("negative values need the signed-weight opt-in"));
        }
        any_nonzero |= v != 0.0;
    }
    if !any_nonzero {
        return Err(invalid("identically zero on [0, 1]"));
    }
    Ok(())
}

/// Greedy prefix selection of a linearly independent subset, preserving
/// input order. Polynomial-only sets are decided exactly (rational rank of
/// the monomial expansions); anything involving a general weight uses the
/// numeric rank of the Gram matrix on a grid over `[0, ε]`.
pub fn select_independent_subset(candidates: Vec<Weight>, allow_signed: bool) -> Result<Selection> {
    if candidates.is_empty() {
        return Err(Error::Config("at least one weight is required".into()));
    }
    for w in &candidates {
        check_membership(w, allow_signed)?;
    }
    let all_polynomial = candidates.iter().all(|w| w.as_polynomial().is_some());
    let mut kept: Vec<Weight> = Vec::new();
    let mut dropped = Vec::new();
    for (i, w) in candidates.into_iter().enumerate() {
        let mut trial = kept.clone();
        trial.push(w.clone());
        let independent = if all_polynomial {
            let polys: Vec<PolynomialWeight> = trial.iter().filter_map(Weight::as_polynomial).collect();
            exact_polynomial_rank(&polys) == polys.len()
        } else {
            numeric_gram_rank(&trial) == trial.len()
        };
        if independent {
            kept.push(w);
        } else {
            dropped.push(i);
        }
    }
    if kept.len() > MAX_WEIGHTS {
        return Err(Error::Config(format!(
            "{} independent weights exceed the limit of {MAX_WEIGHTS}",
            kept.len()
        )));
    }
    Ok(Selection {
        set: WeightSet {
            weights: kept,
            allow_signed,
        },
        dropped,
    })
}

fn exact_polynomial_rank(polys: &[PolynomialWeight]) -> usize {
    let width = polys.iter().map(|p| (p.r + p.g) as usize + 1).max().unwrap_or(0);
    let mut rows: Vec<Vec<BigRational>> = polys
        .iter()
        .map(|p| {
            let mut row: Vec<BigRational> = p
                .monomial_coefficients()
                .into_iter()
                .map(BigRational::from_integer)
                .collect();
            row.resize(width, BigRational::zero());
            row
        })
        .collect();

    let mut rank = 0;
    for col in 0..width {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        for r in 0..rows.len() {
            if r != rank && !rows[r][col].is_zero() {
                let factor = &rows[r][col] / &rows[rank][col];
                for c in col..width {
                    let delta = &factor * &rows[rank][c];
                    rows[r][c] -= delta;
                }
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Gram matrix `∫_0^ε w_i w_j dx` approximated by the trapezoid rule on the
/// independence grid.
pub fn gram_matrix(weights: &[Weight]) -> DMatrix<f64> {
    let m = weights.len();
    let n = INDEPENDENCE_GRID_POINTS;
    let h = INDEPENDENCE_EPSILON / (n - 1) as f64;
    let values = DMatrix::from_fn(n, m, |k, j| weights[j].eval_unchecked(k as f64 * h));
    let mut gram = DMatrix::zeros(m, m);
    for k in 0..n {
        let q = if k == 0 || k == n - 1 { 0.5 * h } else { h };
        for i in 0..m {
            for j in 0..m {
                gram[(i, j)] += q * values[(k, i)] * values[(k, j)];
            }
        }
    }
    gram
}

pub fn numeric_gram_rank(weights: &[Weight]) -> usize {
    let gram = gram_matrix(weights);
    let sv = gram.singular_values();
    let largest = sv.max();
    if largest <= 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > INDEPENDENCE_RANK_TOLERANCE * largest).count()
}
