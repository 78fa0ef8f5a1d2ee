//! Two-sample right-censored data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Group membership. `First` is the group whose hazard is tested for being
/// larger, i.e. the alternative is that `Second` survives longer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    First,
    Second,
}

impl Group {
    pub fn index(self) -> usize {
        match self {
            Group::First => 0,
            Group::Second => 1,
        }
    }

    pub fn swapped(self) -> Group {
        match self {
            Group::First => Group::Second,
            Group::Second => Group::First,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subject {
    pub time: f64,
    pub event: bool,
    pub group: Group,
}

impl Subject {
    pub fn new(time: f64, event: bool, group: Group) -> Self {
        Subject { time, event, group }
    }
}

/// Validated two-sample survival data. Subject order is preserved; it fixes
/// the multiplier assignment and the order of tied observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSample {
    subjects: Vec<Subject>,
    sizes: [usize; 2],
}

impl SurvivalSample {
    pub fn new(subjects: Vec<Subject>) -> Result<Self> {
        for (index, s) in subjects.iter().enumerate() {
            if !s.time.is_finite() || s.time < 0.0 {
                return Err(Error::InvalidTime {
                    index,
                    time: s.time,
                });
            }
        }
        let mut sizes = [0usize; 2];
        for s in &subjects {
            sizes[s.group.index()] += 1;
        }
        if sizes[0] == 0 {
            return Err(Error::GroupEmpty(1));
        }
        if sizes[1] == 0 {
            return Err(Error::GroupEmpty(2));
        }
        if !subjects.iter().any(|s| s.event) {
            return Err(Error::AllCensored);
        }
        Ok(SurvivalSample { subjects, sizes })
    }

    /// Builds a sample from parallel slices.
    pub fn from_columns(times: &[f64], events: &[bool], groups: &[Group]) -> Result<Self> {
        if times.len() != events.len() || times.len() != groups.len() {
            return Err(Error::ShapeError(format!(
                "columns have lengths {}, {}, {}",
                times.len(),
                events.len(),
                groups.len()
            )));
        }
        let subjects = times
            .iter()
            .zip(events)
            .zip(groups)
            .map(|((&time, &event), &group)| Subject { time, event, group })
            .collect();
        Self::new(subjects)
    }

    pub fn subjects(&self) -> &[Subject] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }

    pub fn n1(&self) -> usize {
        self.sizes[0]
    }

    pub fn n2(&self) -> usize {
        self.sizes[1]
    }

    /// `sqrt(n / (n1 n2))`, the scaling of every logrank statistic.
    pub fn scale(&self) -> f64 {
        let n = self.len() as f64;
        (n / (self.n1() as f64 * self.n2() as f64)).sqrt()
    }

    /// Same data with group labels exchanged.
    pub fn swap_groups(&self) -> SurvivalSample {
        SurvivalSample {
            subjects: self
                .subjects
                .iter()
                .map(|s| Subject {
                    group: s.group.swapped(),
                    ..*s
                })
                .collect(),
            sizes: [self.sizes[1], self.sizes[0]],
        }
    }

    /// Applies `f` to every observed time. `f` should be strictly increasing
    /// for the result to describe the same ranks.
    pub fn map_times(&self, f: impl Fn(f64) -> f64) -> Result<SurvivalSample> {
        SurvivalSample::new(
            self.subjects
                .iter()
                .map(|s| Subject {
                    time: f(s.time),
                    ..*s
                })
                .collect(),
        )
    }
}
