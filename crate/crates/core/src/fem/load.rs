use serde::{Deserialize, Serialize};

use crate::error::FemError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LoadKind {
    PointLoad,
    BodyForce,
}

impl LoadKind {
    /// Length of the compressed load vector fed to the GP.
    pub fn input_dim(self) -> usize {
        match self {
            LoadKind::PointLoad => 3,
            LoadKind::BodyForce => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LoadKind::PointLoad => "point_load",
            LoadKind::BodyForce => "body_force",
        }
    }
}

impl std::str::FromStr for LoadKind {
    type Err = FemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "point_load" | "point" => Ok(LoadKind::PointLoad),
            "body_force" | "body" => Ok(LoadKind::BodyForce),
            other => Err(FemError::InvalidLoad(format!("unknown load kind {other:?}"))),
        }
    }
}

/// Compressed load descriptor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LoadSpec {
    /// Nodal force `(fx, fy)` [N] at arc distance `d` [m] from the fixed boundary.
    PointLoad { fx: f64, fy: f64, d: f64 },
    /// Uniform body force density `(bx, by)` [N/kg].
    BodyForce { bx: f64, by: f64 },
}

impl LoadSpec {
    pub fn kind(&self) -> LoadKind {
        match self {
            LoadSpec::PointLoad { .. } => LoadKind::PointLoad,
            LoadSpec::BodyForce { .. } => LoadKind::BodyForce,
        }
    }

    pub fn zero(kind: LoadKind) -> Self {
        match kind {
            LoadKind::PointLoad => LoadSpec::PointLoad { fx: 0.0, fy: 0.0, d: 0.0 },
            LoadKind::BodyForce => LoadSpec::BodyForce { bx: 0.0, by: 0.0 },
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        match *self {
            LoadSpec::PointLoad { fx, fy, d } => vec![fx, fy, d],
            LoadSpec::BodyForce { bx, by } => vec![bx, by],
        }
    }

    pub fn from_slice(kind: LoadKind, v: &[f64]) -> Result<Self, FemError> {
        if v.len() != kind.input_dim() {
            return Err(FemError::Shape(format!(
                "{} expects {} components, got {}",
                kind.as_str(),
                kind.input_dim(),
                v.len()
            )));
        }
        Ok(match kind {
            LoadKind::PointLoad => LoadSpec::PointLoad { fx: v[0], fy: v[1], d: v[2] },
            LoadKind::BodyForce => LoadSpec::BodyForce { bx: v[0], by: v[1] },
        })
    }

    /// In-plane force magnitude (point force or body force density).
    pub fn magnitude(&self) -> f64 {
        match *self {
            LoadSpec::PointLoad { fx, fy, .. } => fx.hypot(fy),
            LoadSpec::BodyForce { bx, by } => bx.hypot(by),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.magnitude() == 0.0
    }
}
