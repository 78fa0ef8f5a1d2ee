//! Weighted logrank statistics `T_n(w)`, their covariance estimate `Σ̂_n`
//! and the singly-weighted one-sided tests.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::estimators::EventTable;
use crate::projection::{Projection, ProjectionSolver};
use crate::weights::{Weight, WeightSet};

/// Per-event quantities with the weights already evaluated; shared by the
/// data statistic and every bootstrap replicate.
#[derive(Debug, Clone)]
pub struct EventDesign {
    m: usize,
    scale: f64,
    subjects: Vec<usize>,
    /// Row-major `n_events x m`: `w_l(F̂(t_i-))`.
    weight_values: Vec<f64>,
    /// `Y2/Y` or `-Y1/Y` at each event.
    contrasts: Vec<f64>,
    /// `Y1 Y2 / Y^2` at each event.
    variance_factors: Vec<f64>,
    n_subjects: usize,
}

impl EventDesign {
    pub fn new(events: &EventTable, weights: &WeightSet) -> EventDesign {
        let m = weights.len();
        let points = events.points();
        let mut weight_values = vec![0.0; points.len() * m];
        for (row, p) in weight_values.chunks_mut(m).zip(points) {
            weights.eval_into(p.km_left, row);
        }
        EventDesign {
            m,
            scale: events.scale(),
            subjects: points.iter().map(|p| p.subject).collect(),
            weight_values,
            contrasts: points.iter().map(|p| p.contrast()).collect(),
            variance_factors: points.iter().map(|p| p.variance_factor()).collect(),
            n_subjects: events.n_subjects(),
        }
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn n_events(&self) -> usize {
        self.subjects.len()
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    /// Sample index of each event, aligned with the event rows.
    pub fn event_subjects(&self) -> &[usize] {
        &self.subjects
    }

    /// `sqrt(n/(n1 n2)) Σ_i g_i w(F̂(t_i-)) c_i`, with `g_i` the factor of
    /// the subject owning event `i`.
    pub(crate) fn weighted_vector(&self, factor: impl Fn(usize) -> f64, out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, row) in self.weight_values.chunks(self.m).enumerate() {
            let c = factor(self.subjects[i]) * self.contrasts[i];
            for (o, &w) in out.iter_mut().zip(row) {
                *o += w * c;
            }
        }
        out.iter_mut().for_each(|o| *o *= self.scale);
    }

    /// `n/(n1 n2) Σ_i g_i w_r w_s Y1Y2/Y²`, with `g_i` the factor of the
    /// subject owning event `i`.
    pub(crate) fn weighted_covariance(&self, factor: impl Fn(usize) -> f64) -> DMatrix<f64> {
        let m = self.m;
        let mut cov = DMatrix::zeros(m, m);
        for (i, row) in self.weight_values.chunks(m).enumerate() {
            let v = factor(self.subjects[i]) * self.variance_factors[i];
            for r in 0..m {
                let wr = row[r] * v;
                for s in r..m {
                    cov[(r, s)] += wr * row[s];
                }
            }
        }
        let scale2 = self.scale * self.scale;
        for r in 0..m {
            for s in r..m {
                let value = cov[(r, s)] * scale2;
                cov[(r, s)] = value;
                cov[(s, r)] = value;
            }
        }
        cov
    }

    pub fn logrank_vector(&self) -> DVector<f64> {
        let mut out = vec![0.0; self.m];
        self.weighted_vector(|_| 1.0, &mut out);
        DVector::from_vec(out)
    }

    pub fn covariance_matrix(&self) -> DMatrix<f64> {
        self.weighted_covariance(|_| 1.0)
    }
}

/// `(T_n(w_1), …, T_n(w_m))`.
pub fn logrank_vector(events: &EventTable, weights: &WeightSet) -> DVector<f64> {
    EventDesign::new(events, weights).logrank_vector()
}

/// `Σ̂_n`, symmetric by construction.
pub fn covariance_matrix(events: &EventTable, weights: &WeightSet) -> DMatrix<f64> {
    EventDesign::new(events, weights).covariance_matrix()
}

/// The data statistic for a weight set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatBundle {
    pub t_vec: Vec<f64>,
    /// Row-major `m x m`.
    pub sigma_hat: Vec<f64>,
    pub s_n: f64,
    /// 0-based weight indices attaining the maximum; empty when `s_n == 0`.
    pub active_subset: Vec<usize>,
}

impl StatBundle {
    pub fn compute(events: &EventTable, weights: &WeightSet) -> Result<StatBundle> {
        let design = EventDesign::new(events, weights);
        let t = design.logrank_vector();
        let sigma = design.covariance_matrix();
        let Projection {
            value,
            active_subset,
        } = ProjectionSolver::new(&sigma)?.evaluate(t.as_slice())?;
        Ok(StatBundle {
            t_vec: t.as_slice().to_vec(),
            sigma_hat: sigma.transpose().as_slice().to_vec(),
            s_n: value,
            active_subset,
        })
    }

    pub fn dim(&self) -> usize {
        self.t_vec.len()
    }

    pub fn sigma(&self) -> DMatrix<f64> {
        let m = self.dim();
        DMatrix::from_row_slice(m, m, &self.sigma_hat)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinglyWeightedResult {
    pub t_stat: f64,
    pub sigma: f64,
    /// `T_n / σ̂ · 1{T_n > 0}`.
    pub studentized: f64,
    /// One-sided normal p-value `1 − Φ(T_n / σ̂)` of the classical test.
    pub p_normal: f64,
}

pub fn singly_weighted_test(events: &EventTable, weight: &Weight) -> Result<SinglyWeightedResult> {
    let set = WeightSet::with_sign_policy(vec![weight.clone()], true)?;
    let design = EventDesign::new(events, &set);
    singly_from_parts(design.logrank_vector()[0], design.covariance_matrix()[(0, 0)], &weight.label())
}

pub(crate) fn singly_from_parts(t_stat: f64, variance: f64, label: &str) -> Result<SinglyWeightedResult> {
    if variance <= 0.0 {
        return Err(Error::DegenerateVariance(label.to_string()));
    }
    let sigma = variance.sqrt();
    let z = t_stat / sigma;
    let normal = Normal::standard();
    Ok(SinglyWeightedResult {
        t_stat,
        sigma,
        studentized: if t_stat > 0.0 { z } else { 0.0 },
        p_normal: normal.sf(z),
    })
}
