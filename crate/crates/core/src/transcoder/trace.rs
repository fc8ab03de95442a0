use std::collections::BTreeMap;

use serde::Serialize;

/// One element application.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TraceEvent {
    /// Seconds.
    pub time: f64,
    pub element: String,
    /// Power of the state leaving the element (or leaving the port).
    pub power: f64,
    /// Power removed at this element.
    pub loss: f64,
}

/// Ordered record of a conversion run.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SimulationTrace {
    pub input_power: f64,
    pub events: Vec<TraceEvent>,
}

impl SimulationTrace {
    pub fn total_loss(&self) -> f64 {
        self.events.iter().map(|e| e.loss).sum()
    }

    /// Summed loss per element name.
    pub fn loss_by_element(&self) -> BTreeMap<&str, f64> {
        let mut m = BTreeMap::new();
        for e in &self.events {
            *m.entry(e.element.as_str()).or_insert(0.0) += e.loss;
        }
        m
    }

    pub fn loss_at(&self, element: &str) -> f64 {
        self.events
            .iter()
            .filter(|e| e.element == element)
            .map(|e| e.loss)
            .sum()
    }

    /// Total power carried by `output` events.
    pub fn output_power(&self) -> f64 {
        self.events
            .iter()
            .filter(|e| e.element == "output")
            .map(|e| e.power)
            .sum()
    }

    /// JSON lines with times in ns.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for e in &self.events {
            let line = serde_json::json!({
                "t_ns": e.time * 1e9,
                "element": e.element,
                "power": e.power,
                "loss": e.loss,
            });
            out.push_str(&line.to_string());
            out.push('\n');
        }
        out
    }

    pub(crate) fn push(&mut self, time: f64, element: &str, power: f64, loss: f64) {
        self.events.push(TraceEvent {
            time,
            element: element.to_string(),
            power,
            loss,
        });
    }
}
