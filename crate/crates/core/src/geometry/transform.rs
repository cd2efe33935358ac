use serde::{Deserialize, Serialize};

use super::Point3;
use crate::error::{Error, Result};

const ORTHONORMAL_TOLERANCE: f64 = 1e-9;

/// Rotation followed by translation: `p' = R p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: [[f64; 3]; 3],
    translation: Point3,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl RigidTransform {
    pub const IDENTITY: RigidTransform = RigidTransform {
        rotation: [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]],
        translation: Point3::ORIGIN,
    };

    /// Builds a transform from a row-major rotation matrix, rejecting anything
    /// that is not a proper rotation within 1e-9.
    pub fn new(rotation: [[f64; 3]; 3], translation: Point3) -> Result<Self> {
        if !translation.is_finite() || rotation.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidTransform("non-finite entry".into()));
        }
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| rotation[i][k] * rotation[j][k]).sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                if (dot - expected).abs() > ORTHONORMAL_TOLERANCE {
                    return Err(Error::InvalidTransform(format!(
                        "rotation rows {i},{j} not orthonormal (dot = {dot})"
                    )));
                }
            }
        }
        let det = determinant(&rotation);
        if (det - 1.0).abs() > ORTHONORMAL_TOLERANCE {
            return Err(Error::InvalidTransform(format!(
                "rotation determinant {det} is not +1"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    /// Rotation about the z-axis by `angle` radians (counter-clockwise seen from +z).
    pub fn rotation_z(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self {
            rotation: [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]],
            translation: Point3::ORIGIN,
        }
    }

    pub fn translation(t: Point3) -> Self {
        Self {
            translation: t,
            ..Self::IDENTITY
        }
    }

    pub fn rotation(&self) -> &[[f64; 3]; 3] {
        &self.rotation
    }

    pub fn translation_part(&self) -> Point3 {
        self.translation
    }

    pub fn rotate(&self, v: Point3) -> Point3 {
        let r = &self.rotation;
        Point3::new(
            r[0][0] * v.x + r[0][1] * v.y + r[0][2] * v.z,
            r[1][0] * v.x + r[1][1] * v.y + r[1][2] * v.z,
            r[2][0] * v.x + r[2][1] * v.y + r[2][2] * v.z,
        )
    }

    pub fn apply(&self, p: Point3) -> Point3 {
        self.rotate(p) + self.translation
    }

    pub fn inverse(&self) -> Self {
        let r = &self.rotation;
        let rt = [
            [r[0][0], r[1][0], r[2][0]],
            [r[0][1], r[1][1], r[2][1]],
            [r[0][2], r[1][2], r[2][2]],
        ];
        let inv = Self {
            rotation: rt,
            translation: Point3::ORIGIN,
        };
        Self {
            translation: -inv.rotate(self.translation),
            ..inv
        }
    }

    /// `self` after `first`: `(self ∘ first)(p) = self(first(p))`.
    pub fn compose(&self, first: &RigidTransform) -> Self {
        let a = &self.rotation;
        let b = &first.rotation;
        let mut rotation = [[0.0; 3]; 3];
        for (i, row) in rotation.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| a[i][k] * b[k][j]).sum();
            }
        }
        Self {
            rotation,
            translation: self.apply(first.translation),
        }
    }
}

fn determinant(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}
