use nalgebra::{Rotation3, Unit, UnitQuaternion};
use serde::{Deserialize, Serialize};

use crate::mesh::TriangleMesh;
use crate::partition::{cart_to_sph, sph_to_cart, SphericalCoord};
use crate::{Error, Result, Vec3};

/// `p ↦ a·R(β, axis)·p + t` with the axis stored as spherical angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityTransform {
    pub scale: f64,
    /// Rotation angle β in radians.
    pub angle: f64,
    pub axis_theta: f64,
    pub axis_phi: f64,
    pub translation: [f64; 3],
}

impl Default for SimilarityTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        Self {
            scale: 1.0,
            angle: 0.0,
            axis_theta: 0.0,
            axis_phi: 0.0,
            translation: [0.0; 3],
        }
    }

    pub fn new(scale: f64, angle: f64, axis: &Vec3, translation: Vec3) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::InvalidArgument(format!("scale {scale} must be positive")));
        }
        if !(axis.norm() > 0.0) {
            return Err(Error::InvalidArgument("rotation axis must be non-zero".into()));
        }
        let s = cart_to_sph(axis);
        Ok(Self {
            scale,
            angle,
            axis_theta: s.theta,
            axis_phi: s.phi,
            translation: translation.into(),
        })
    }

    pub fn from_rotation(scale: f64, rotation: &Rotation3<f64>, translation: Vec3) -> Result<Self> {
        match UnitQuaternion::from_rotation_matrix(rotation).axis_angle() {
            Some((axis, angle)) => Self::new(scale, angle, &axis, translation),
            None => Self::new(scale, 0.0, &Vec3::z(), translation),
        }
    }

    pub fn axis(&self) -> Vec3 {
        sph_to_cart(&SphericalCoord {
            r: 1.0,
            theta: self.axis_theta,
            phi: self.axis_phi,
        })
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Unit::new_normalize(self.axis()), self.angle)
    }

    pub fn t(&self) -> Vec3 {
        Vec3::from(self.translation)
    }

    pub fn apply(&self, p: &Vec3) -> Vec3 {
        self.rotation() * p * self.scale + self.t()
    }

    pub fn apply_all(&self, points: &[Vec3]) -> Vec<Vec3> {
        let r = self.rotation();
        let t = self.t();
        points.iter().map(|p| r * p * self.scale + t).collect()
    }

    /// Transforms vertices and rotates normals.
    pub fn apply_mesh(&self, mesh: &TriangleMesh) -> TriangleMesh {
        let r = self.rotation();
        TriangleMesh {
            vertices: self.apply_all(&mesh.vertices),
            faces: mesh.faces.clone(),
            normals: mesh.normals.as_ref().map(|n| n.iter().map(|v| r * v).collect()),
        }
    }

    pub fn inverse(&self) -> Self {
        let r_inv = self.rotation().inverse();
        let t = -(r_inv * self.t()) / self.scale;
        Self::from_rotation(1.0 / self.scale, &r_inv, t).expect("inverse of a valid transform")
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Self) -> Self {
        let r = self.rotation() * other.rotation();
        let t = self.rotation() * other.t() * self.scale + self.t();
        Self::from_rotation(self.scale * other.scale, &r, t).expect("composition of valid transforms")
    }

    /// Angle of the relative rotation between two transforms.
    pub fn rotation_distance(&self, other: &Self) -> f64 {
        UnitQuaternion::from_rotation_matrix(&self.rotation())
            .angle_to(&UnitQuaternion::from_rotation_matrix(&other.rotation()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn inverse_round_trip(
            scale in 0.5f64..2.0,
            angle in -3.1f64..3.1,
            ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0,
            tx in -0.2f64..0.2, ty in -0.2f64..0.2, tz in -0.2f64..0.2,
            px in -1.0f64..1.0, py in -1.0f64..1.0, pz in -1.0f64..1.0,
        ) {
            let t = SimilarityTransform::new(scale, angle, &Vec3::new(ax, ay, az), Vec3::new(tx, ty, tz)).unwrap();
            prop_assert!((t.axis().norm() - 1.0).abs() < 1e-12);
            let p = Vec3::new(px, py, pz);
            prop_assert!((t.inverse().apply(&t.apply(&p)) - p).norm() < 1e-9);
            prop_assert!((t.compose(&t.inverse()).apply(&p) - p).norm() < 1e-9);
        }
    }

    #[test]
    fn quarter_turn() {
        let t = SimilarityTransform::new(2.0, std::f64::consts::FRAC_PI_2, &Vec3::z(), Vec3::x()).unwrap();
        assert!((t.apply(&Vec3::x()) - Vec3::new(1.0, 2.0, 0.0)).norm() < 1e-12);
        assert!(SimilarityTransform::new(0.0, 0.0, &Vec3::z(), Vec3::zeros()).is_err());
    }
}
