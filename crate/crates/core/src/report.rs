//! Flat key/value reports of a test run, rendered as text or JSON.
//!
//! Both renderings come from one ordered list of fields, and numbers are
//! printed with the shortest representation that round-trips, so the text
//! and JSON outputs carry bit-identical values.

use serde_json::{Map, Number, Value};

use crate::bootstrap::TestResult;
use crate::sample::SurvivalSample;

#[derive(Debug, Clone, PartialEq)]
pub enum Field {
    Num(f64),
    Int(u64),
    Text(String),
    List(Vec<String>),
    Missing,
}

impl Field {
    fn to_json(&self) -> Value {
        match self {
            Field::Num(x) => Number::from_f64(*x).map(Value::Number).unwrap_or(Value::Null),
            Field::Int(i) => Value::from(*i),
            Field::Text(s) => Value::from(s.as_str()),
            Field::List(items) => Value::from(items.clone()),
            Field::Missing => Value::Null,
        }
    }

    fn to_text(&self) -> String {
        match self {
            Field::List(items) if items.is_empty() => "-".to_string(),
            Field::List(items) => items.join("; "),
            Field::Text(s) => s.clone(),
            Field::Missing => "NA".to_string(),
            other => other.to_json().to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputReport {
    fields: Vec<(String, Field)>,
}

/// Context of a run that the test result itself does not record.
#[derive(Debug, Clone, Default)]
pub struct RunContext {
    pub group_labels: [String; 2],
    pub warnings: Vec<String>,
    pub debug: bool,
}

impl OutputReport {
    pub fn new(sample: &SurvivalSample, result: &TestResult, ctx: &RunContext) -> Self {
        let mut f: Vec<(String, Field)> = Vec::new();
        let mut put = |k: &str, v: Field| f.push((k.to_string(), v));
        put("p_value", Field::Num(result.p_value));
        put("s_n", Field::Num(result.s_n));
        put("iterations", Field::Int(result.iterations as u64));
        put("multiplier", Field::Text(result.multiplier.to_string()));
        put("covariance", Field::Text(result.covariance.to_string()));
        put("ties", Field::Text(format!("{:?}", result.ties).to_lowercase()));
        put("seed", Field::Int(result.seed));
        put("weights", Field::Text(result.weights.join(",")));
        put("m", Field::Int(result.weights.len() as u64));
        let active: Vec<&str> = result.active_subset.iter().map(|&i| result.weights[i].as_str()).collect();
        put("active_subset", Field::Text(active.join(",")));
        put("group1", Field::Text(ctx.group_labels[0].clone()));
        put("group2", Field::Text(ctx.group_labels[1].clone()));
        put("n", Field::Int(sample.len() as u64));
        put("n1", Field::Int(sample.n1() as u64));
        put("n2", Field::Int(sample.n2() as u64));
        put(
            "events",
            Field::Int(sample.subjects().iter().filter(|s| s.event).count() as u64),
        );
        for single in &result.singly {
            let key = |name: &str| format!("single.{}.{}", single.weight, name);
            let num = |x: Option<f64>| x.map_or(Field::Missing, Field::Num);
            let r = single.result.as_ref();
            f.push((key("t"), num(r.map(|r| r.t_stat))));
            f.push((key("sigma"), num(r.map(|r| r.sigma))));
            f.push((key("studentized"), num(r.map(|r| r.studentized))));
            f.push((key("p_asymptotic"), num(r.map(|r| r.p_normal))));
            f.push((key("p_bootstrap"), Field::Num(single.p_bootstrap)));
        }
        if ctx.debug {
            for (label, t) in result.weights.iter().zip(&result.t_vec) {
                f.push((format!("t_vec.{label}"), Field::Num(*t)));
            }
        }
        f.push(("warnings".to_string(), Field::List(ctx.warnings.clone())));
        OutputReport { fields: f }
    }

    pub fn fields(&self) -> &[(String, Field)] {
        &self.fields
    }

    pub fn get(&self, key: &str) -> Option<&Field> {
        self.fields.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn number(&self, key: &str) -> Option<f64> {
        match self.get(key)? {
            Field::Num(x) => Some(*x),
            Field::Int(i) => Some(*i as f64),
            _ => None,
        }
    }

    pub fn to_json(&self) -> Value {
        let map: Map<String, Value> = self.fields.iter().map(|(k, v)| (k.clone(), v.to_json())).collect();
        Value::Object(map)
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("report serializes")
    }

    pub fn to_text(&self) -> String {
        let width = self.fields.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        self.fields
            .iter()
            .map(|(k, v)| format!("{k:<width$}  {}\n", v.to_text()))
            .collect()
    }
}
