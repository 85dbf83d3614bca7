use super::rng;
use super::SimError;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Injected failure modes.
///
/// `point_failure` draw `i` of the fault at index `j` in the world's fault
/// list is `rng::unit(seed, &[rng::POINT_FAILURE, j, i])`; the query fails
/// when the draw is below `rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FaultSpec {
    /// The next `count` picks (of `object`, or of anything) slip.
    GraspSlip {
        #[serde(default = "one")]
        count: u32,
        #[serde(default)]
        object: Option<String>,
    },
    /// Constant offset added to every perceived coordinate.
    LocalizationBias { offset: [f64; 3] },
    /// The next `count` captures return nothing.
    CaptureDropout {
        #[serde(default = "one")]
        count: u32,
    },
    /// Each pointing query independently returns a useless point.
    PointFailure { rate: f64 },
}

fn one() -> u32 {
    1
}

const KINDS: [&str; 4] = ["grasp_slip", "localization_bias", "capture_dropout", "point_failure"];

impl FaultSpec {
    pub fn from_json(value: &Value) -> Result<Self, SimError> {
        let kind = value.get("kind").and_then(Value::as_str).unwrap_or("");
        if !KINDS.contains(&kind) {
            return Err(SimError::UnknownFaultKind(kind.to_string()));
        }
        serde_json::from_value(value.clone()).map_err(|e| SimError::InvalidWorld(format!("fault: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActiveFault {
    pub spec: FaultSpec,
    /// Triggers consumed (one-shot kinds) or draws taken (probabilistic).
    pub used: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FaultSchedule {
    pub seed: u64,
    pub faults: Vec<ActiveFault>,
}

impl FaultSchedule {
    pub fn push(&mut self, spec: FaultSpec) {
        self.faults.push(ActiveFault { spec, used: 0 });
    }

    pub fn take_grasp_slip(&mut self, object: &str) -> bool {
        for f in &mut self.faults {
            if let FaultSpec::GraspSlip { count, object: target } = &f.spec {
                let applies = target.as_deref().is_none_or(|t| t == object);
                if applies && f.used < *count as u64 {
                    f.used += 1;
                    return true;
                }
            }
        }
        false
    }

    pub fn take_capture_dropout(&mut self) -> bool {
        for f in &mut self.faults {
            if let FaultSpec::CaptureDropout { count } = f.spec {
                if f.used < count as u64 {
                    f.used += 1;
                    return true;
                }
            }
        }
        false
    }

    pub fn localization_bias(&self) -> [f64; 3] {
        let mut b = [0.0; 3];
        for f in &self.faults {
            if let FaultSpec::LocalizationBias { offset } = f.spec {
                for k in 0..3 {
                    b[k] += offset[k];
                }
            }
        }
        b
    }

    /// Draws once from every point-failure fault; true if any fires.
    pub fn draw_point_failure(&mut self) -> bool {
        let mut failed = false;
        for (j, f) in self.faults.iter_mut().enumerate() {
            if let FaultSpec::PointFailure { rate } = f.spec {
                let u = rng::unit(self.seed, &[rng::POINT_FAILURE, j as u64, f.used]);
                f.used += 1;
                failed |= u < rate;
            }
        }
        failed
    }
}
