use std::fmt::Write;

use serde::{Deserialize, Serialize};

use crate::training::Phase;

/// Payload of a metric emission.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetricData {
    Int(i64),
    Float(f64),
    Matrix(Vec<Vec<u64>>),
}

impl MetricData {
    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            MetricData::Int(v) => Some(v as f64),
            MetricData::Float(v) => Some(v),
            MetricData::Matrix(_) => None,
        }
    }
}

/// One emitted metric value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: String,
    /// Global training iteration at emission.
    pub x: u64,
    pub value: MetricData,
    pub phase: Phase,
    pub stream: String,
    pub task: Option<usize>,
    pub experience: Option<usize>,
}

impl MetricValue {
    pub fn new(
        id: &str,
        x: u64,
        value: MetricData,
        phase: Phase,
        stream: &str,
        task: Option<usize>,
        experience: Option<usize>,
    ) -> Self {
        MetricValue {
            name: metric_name(id, phase, stream, task, experience),
            x,
            value,
            phase,
            stream: stream.to_owned(),
            task,
            experience,
        }
    }
}

/// `<id>/<phase>_phase/<stream>_stream[/TaskNNN[/ExpNNN]]`.
pub fn metric_name(
    id: &str,
    phase: Phase,
    stream: &str,
    task: Option<usize>,
    experience: Option<usize>,
) -> String {
    let mut name = format!("{id}/{phase}_phase/{stream}_stream");
    if let Some(t) = task {
        write!(name, "/Task{t:03}").expect("writing to a String");
        if let Some(e) = experience {
            write!(name, "/Exp{e:03}").expect("writing to a String");
        }
    }
    name
}
