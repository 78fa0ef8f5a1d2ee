//! Counting-process summaries of a two-sample censored dataset: risk sets,
//! event and censoring increments, Nelson–Aalen estimators and the pooled
//! Kaplan–Meier left limit used as the weight-function argument.

use serde::{Deserialize, Serialize};

use crate::sample::{Group, SurvivalSample};

/// One distinct observed time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEntry {
    pub time: f64,
    /// Subjects with observed time `>= time`, per group.
    pub at_risk: [usize; 2],
    pub events: [usize; 2],
    pub censored: [usize; 2],
    /// Pooled Kaplan–Meier distribution estimate just before `time`.
    pub km_left: f64,
    /// Subjects with an event at `time`, in input order.
    pub event_owners: Vec<EventOwner>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventOwner {
    /// Index into the sample.
    pub subject: usize,
    pub group: Group,
}

impl RiskEntry {
    pub fn total_at_risk(&self) -> usize {
        self.at_risk[0] + self.at_risk[1]
    }

    pub fn total_events(&self) -> usize {
        self.events[0] + self.events[1]
    }
}

/// Tied observations aggregated into one entry per distinct time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskTable {
    entries: Vec<RiskEntry>,
    sizes: [usize; 2],
}

impl RiskTable {
    pub fn entries(&self) -> &[RiskEntry] {
        &self.entries
    }

    pub fn n1(&self) -> usize {
        self.sizes[0]
    }

    pub fn n2(&self) -> usize {
        self.sizes[1]
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.entries.iter().map(|e| e.time)
    }
}

/// Stable ordering of subject indices by observed time. Ties keep input order.
fn time_order(sample: &SurvivalSample) -> Vec<usize> {
    let subjects = sample.subjects();
    let mut order: Vec<usize> = (0..subjects.len()).collect();
    order.sort_by(|&a, &b| subjects[a].time.total_cmp(&subjects[b].time));
    order
}

pub fn build_risk_table(sample: &SurvivalSample) -> RiskTable {
    let subjects = sample.subjects();
    let order = time_order(sample);
    let mut remaining = [sample.n1(), sample.n2()];
    let mut survival = 1.0;
    let mut entries = Vec::new();

    let mut start = 0;
    while start < order.len() {
        let time = subjects[order[start]].time;
        let mut end = start;
        while end < order.len() && subjects[order[end]].time == time {
            end += 1;
        }
        let mut entry = RiskEntry {
            time,
            at_risk: remaining,
            events: [0; 2],
            censored: [0; 2],
            km_left: 1.0 - survival,
            event_owners: Vec::new(),
        };
        let mut owners: Vec<usize> = order[start..end].to_vec();
        owners.sort_unstable();
        for idx in owners {
            let s = &subjects[idx];
            let g = s.group.index();
            if s.event {
                entry.events[g] += 1;
                entry.event_owners.push(EventOwner {
                    subject: idx,
                    group: s.group,
                });
            } else {
                entry.censored[g] += 1;
            }
            remaining[g] -= 1;
        }
        survival *= 1.0 - entry.total_events() as f64 / entry.total_at_risk() as f64;
        entries.push(entry);
        start = end;
    }

    RiskTable {
        entries,
        sizes: [sample.n1(), sample.n2()],
    }
}

/// Right-continuous step function starting at zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub jump_times: Vec<f64>,
    pub cumulative_values: Vec<f64>,
}

impl StepFunction {
    pub fn value_at(&self, t: f64) -> f64 {
        match self.jump_times.partition_point(|&s| s <= t) {
            0 => 0.0,
            k => self.cumulative_values[k - 1],
        }
    }

    pub fn is_zero(&self) -> bool {
        self.jump_times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HazardOf {
    Group(Group),
    Pooled,
}

pub fn nelson_aalen(table: &RiskTable, which: HazardOf) -> StepFunction {
    let mut jump_times = Vec::new();
    let mut cumulative_values = Vec::new();
    let mut acc = 0.0;
    for e in table.entries() {
        let (d, y) = match which {
            HazardOf::Group(g) => (e.events[g.index()], e.at_risk[g.index()]),
            HazardOf::Pooled => (e.total_events(), e.total_at_risk()),
        };
        if d > 0 && y > 0 {
            acc += d as f64 / y as f64;
            jump_times.push(e.time);
            cumulative_values.push(acc);
        }
    }
    StepFunction {
        jump_times,
        cumulative_values,
    }
}

/// How tied observation times enter the statistics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TieMethod {
    /// Observations sorted by time, ties kept in input order, each one its
    /// own step of the risk set and Kaplan–Meier product.
    #[default]
    Sequential,
    /// One step per distinct time, as in [`RiskTable`].
    Aggregate,
}

/// Risk-set state seen by one observed event.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventPoint {
    pub subject: usize,
    pub group: Group,
    pub at_risk: [usize; 2],
    pub km_left: f64,
}

impl EventPoint {
    /// Contribution of this event to `Y1 Y2 / Y (dA1 - dA2)`: `Y2/Y` for a
    /// first-group event, `-Y1/Y` for a second-group event.
    pub fn contrast(&self) -> f64 {
        let y = (self.at_risk[0] + self.at_risk[1]) as f64;
        match self.group {
            Group::First => self.at_risk[1] as f64 / y,
            Group::Second => -(self.at_risk[0] as f64) / y,
        }
    }

    /// `Y1 Y2 / Y^2` at this event.
    pub fn variance_factor(&self) -> f64 {
        let y = (self.at_risk[0] + self.at_risk[1]) as f64;
        self.at_risk[0] as f64 * self.at_risk[1] as f64 / (y * y)
    }
}

/// Per-event view of the data that all statistics are computed from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventTable {
    points: Vec<EventPoint>,
    n_subjects: usize,
    sizes: [usize; 2],
    ties: TieMethod,
}

impl EventTable {
    pub fn new(sample: &SurvivalSample, ties: TieMethod) -> EventTable {
        let points = match ties {
            TieMethod::Aggregate => aggregate_points(&build_risk_table(sample)),
            TieMethod::Sequential => sequential_points(sample),
        };
        EventTable {
            points,
            n_subjects: sample.len(),
            sizes: [sample.n1(), sample.n2()],
            ties,
        }
    }

    pub fn from_risk_table(table: &RiskTable) -> EventTable {
        let n_subjects = table.n1() + table.n2();
        EventTable {
            points: aggregate_points(table),
            n_subjects,
            sizes: [table.n1(), table.n2()],
            ties: TieMethod::Aggregate,
        }
    }

    pub fn points(&self) -> &[EventPoint] {
        &self.points
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub fn n1(&self) -> usize {
        self.sizes[0]
    }

    pub fn n2(&self) -> usize {
        self.sizes[1]
    }

    pub fn ties(&self) -> TieMethod {
        self.ties
    }

    pub fn scale(&self) -> f64 {
        let n = self.n_subjects as f64;
        (n / (self.sizes[0] as f64 * self.sizes[1] as f64)).sqrt()
    }
}

fn aggregate_points(table: &RiskTable) -> Vec<EventPoint> {
    table
        .entries()
        .iter()
        .flat_map(|e| {
            e.event_owners.iter().map(move |owner| EventPoint {
                subject: owner.subject,
                group: owner.group,
                at_risk: e.at_risk,
                km_left: e.km_left,
            })
        })
        .collect()
}

fn sequential_points(sample: &SurvivalSample) -> Vec<EventPoint> {
    let subjects = sample.subjects();
    let mut remaining = [sample.n1(), sample.n2()];
    let mut survival = 1.0;
    let mut points = Vec::new();
    for idx in time_order(sample) {
        let s = &subjects[idx];
        let y = (remaining[0] + remaining[1]) as f64;
        if s.event {
            points.push(EventPoint {
                subject: idx,
                group: s.group,
                at_risk: remaining,
                km_left: 1.0 - survival,
            });
            survival *= 1.0 - 1.0 / y;
        }
        remaining[s.group.index()] -= 1;
    }
    points
}
