//! Flat key-value model parameters, loadable from YAML.
//!
//! Every model ships a complete default table; a parameter file only
//! overrides keys it names. Unknown keys are rejected so typos surface early.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ModelId;
use crate::error::{Error, Result};

const G: f64 = 9.81;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    values: BTreeMap<String, f64>,
}

impl ModelParams {
    pub fn defaults(id: ModelId) -> Self {
        let mut v: Vec<(&str, f64)> = vec![("g", G)];
        match id {
            ModelId::Unicycle1V0 | ModelId::Unicycle1V1 | ModelId::Unicycle1V2 => {
                let (v_min, w_min) = match id {
                    ModelId::Unicycle1V0 => (-0.5, -0.5),
                    ModelId::Unicycle1V1 => (0.25, -0.5),
                    _ => (0.25, -0.25),
                };
                v.extend([
                    ("dt", 0.1),
                    ("v_min", v_min),
                    ("v_max", 0.5),
                    ("w_min", w_min),
                    ("w_max", 0.5),
                    ("body_length", 0.5),
                    ("body_width", 0.25),
                    ("weight_position", 1.0),
                    ("weight_orientation", 0.5),
                ]);
            }
            ModelId::Unicycle2 => v.extend([
                ("dt", 0.1),
                ("v_min", -0.5),
                ("v_max", 0.5),
                ("w_min", -0.5),
                ("w_max", 0.5),
                ("a_min", -0.25),
                ("a_max", 0.25),
                ("alpha_min", -0.25),
                ("alpha_max", 0.25),
                ("body_length", 0.5),
                ("body_width", 0.25),
                ("weight_position", 1.0),
                ("weight_orientation", 0.5),
                ("weight_linear_velocity", 0.25),
                ("weight_angular_velocity", 0.25),
            ]),
            ModelId::CarTrailer => v.extend([
                ("dt", 0.1),
                ("v_min", -0.1),
                ("v_max", 0.5),
                ("phi_max", std::f64::consts::FRAC_PI_3),
                ("wheelbase", 0.25),
                ("hitch_length", 0.5),
                ("body_length", 0.5),
                ("body_width", 0.25),
                ("trailer_length", 0.3),
                ("trailer_width", 0.25),
                ("weight_position", 1.0),
                ("weight_orientation", 0.5),
            ]),
            ModelId::Acrobot => v.extend([
                ("dt", 0.01),
                ("m1", 1.0),
                ("m2", 1.0),
                ("l1", 1.0),
                ("l2", 1.0),
                ("lc1", 0.5),
                ("lc2", 0.5),
                ("i1", 1.0 / 3.0),
                ("i2", 1.0 / 3.0),
                ("u_max", 10.0),
                ("qdot_max", 8.0),
                ("link_radius", 0.05),
                ("weight_orientation", 0.5),
                ("weight_angular_velocity", 0.2),
            ]),
            ModelId::PlanarRotor => v.extend([
                ("dt", 0.01),
                ("mass", 2.5),
                ("inertia", 1.2),
                ("arm", 0.3),
                ("thrust_to_weight", 1.3),
                ("v_max", 4.0),
                ("w_max", 8.0),
                ("body_length", 0.6),
                ("body_width", 0.1),
                ("weight_position", 1.0),
                ("weight_orientation", 0.5),
                ("weight_linear_velocity", 0.2),
                ("weight_angular_velocity", 0.2),
            ]),
            ModelId::RotorPole => v.extend([
                ("dt", 0.01),
                ("mass", 2.5),
                ("inertia", 1.2),
                ("arm", 0.3),
                ("pole_length", 0.5),
                ("pole_mass", 0.5),
                ("thrust_to_weight", 2.0),
                ("v_max", 4.0),
                ("w_max", 8.0),
                ("qdot_max", 8.0),
                ("body_length", 0.6),
                ("body_width", 0.1),
                ("pole_radius", 0.05),
                ("weight_position", 1.0),
                ("weight_orientation", 0.5),
                ("weight_linear_velocity", 0.2),
                ("weight_angular_velocity", 0.2),
            ]),
            // Crazyflie 2.1
            ModelId::QuadrotorV0 => v.extend([
                ("dt", 0.01),
                ("mass", 0.034),
                ("jxx", 16.571710e-6),
                ("jyy", 16.655602e-6),
                ("jzz", 29.261652e-6),
                ("arm_length", 0.046),
                ("torque_to_thrust", 0.006),
                ("thrust_to_weight", 1.3),
                ("v_max", 4.0),
                ("w_max", 8.0),
                ("radius", 0.1),
                ("weight_position", 1.0),
                ("weight_orientation", 0.5),
                ("weight_linear_velocity", 0.2),
                ("weight_angular_velocity", 0.05),
            ]),
            ModelId::QuadrotorV1 => v.extend([
                ("dt", 0.01),
                ("mass", 1.0),
                ("jxx", 0.01),
                ("jyy", 0.01),
                ("jzz", 0.02),
                ("thrust_max_ratio", 2.0),
                ("torque_max", 0.2),
                ("v_max", 4.0),
                ("w_max", 8.0),
                ("radius", 0.25),
                ("weight_position", 1.0),
                ("weight_orientation", 0.5),
                ("weight_linear_velocity", 0.2),
                ("weight_angular_velocity", 0.05),
            ]),
        }
        ModelParams {
            values: v.into_iter().map(|(k, x)| (k.to_string(), x)).collect(),
        }
    }

    pub fn get(&self, key: &str) -> f64 {
        match self.values.get(key) {
            Some(v) => *v,
            None => panic!("model parameter `{key}` missing from defaults"),
        }
    }

    pub fn get_opt(&self, key: &str) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn set(&mut self, key: &str, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::Param {
                key: key.into(),
                reason: "value must be finite".into(),
            });
        }
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value;
                Ok(())
            }
            None => Err(Error::Param {
                key: key.into(),
                reason: "unknown key for this model".into(),
            }),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.values.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Overlays a flat YAML document on the defaults for `id`. A `model` key,
    /// if present, must name `id`.
    pub fn from_yaml_str(id: ModelId, text: &str, origin: &str) -> Result<Self> {
        let doc: BTreeMap<String, serde_yaml::Value> =
            serde_yaml::from_str(text).map_err(|e| Error::parse_yaml(origin, e))?;
        let mut params = Self::defaults(id);
        for (key, value) in doc {
            if key == "model" {
                let name = value.as_str().unwrap_or_default();
                if name != id.name() {
                    return Err(Error::ModelMismatch {
                        found: name.to_string(),
                        expected: id.name().to_string(),
                    });
                }
                continue;
            }
            let x = value.as_f64().ok_or_else(|| Error::Param {
                key: key.clone(),
                reason: "expected a number".into(),
            })?;
            params.set(&key, x)?;
        }
        Ok(params)
    }

    pub fn load(id: ModelId, path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_yaml_str(id, &text, &path.display().to_string())
    }

    pub fn to_yaml(&self, id: ModelId) -> String {
        let mut out = format!("model: {}\n", id.name());
        for (k, v) in &self.values {
            out.push_str(&format!("{k}: {v:?}\n"));
        }
        out
    }
}
