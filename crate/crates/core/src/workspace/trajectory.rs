use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Control, ModelSpec, State};
use crate::error::{Error, Result};

/// State and control sequences as stored on disk. Extra keys, such as the
/// chain of a search solution, are ignored on load.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<Vec<f64>>,
    pub actions: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<f64>,
}

impl Trajectory {
    pub fn new(xs: &[State], us: &[Control]) -> Self {
        Trajectory {
            states: xs.iter().map(|x| x.as_slice().to_vec()).collect(),
            actions: us.iter().map(|u| u.as_slice().to_vec()).collect(),
            dt: None,
            cost: None,
        }
    }

    pub fn states(&self) -> Vec<State> {
        self.states.iter().map(|x| State::from_column_slice(x)).collect()
    }

    pub fn controls(&self) -> Vec<Control> {
        self.actions.iter().map(|u| Control::from_column_slice(u)).collect()
    }

    /// Checks lengths and dimensions against `model`.
    pub fn check(&self, model: &ModelSpec) -> Result<()> {
        if self.states.is_empty() || self.states.len() != self.actions.len() + 1 {
            return Err(Error::Precondition(format!(
                "a trajectory needs one more state than actions, got {} and {}",
                self.states.len(),
                self.actions.len()
            )));
        }
        if let Some(x) = self.states.iter().find(|x| x.len() != model.state_dim) {
            return Err(Error::Dimension {
                what: "state",
                got: x.len(),
                expected: model.state_dim,
            });
        }
        if let Some(u) = self.actions.iter().find(|u| u.len() != model.control_dim) {
            return Err(Error::Dimension {
                what: "action",
                got: u.len(),
                expected: model.control_dim,
            });
        }
        Ok(())
    }

    pub fn from_yaml_str(text: &str, origin: &str) -> Result<Self> {
        serde_yaml::from_str(text).map_err(|e| Error::parse_yaml(origin, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_yaml_str(&text, &path.display().to_string())
    }

    pub fn to_yaml(&self) -> String {
        serde_yaml::to_string(self).expect("trajectory serializes")
    }
}
