//! Differentiable scalar fields.
//!
//! Every backend exposes value, gradient and Hessian at arbitrary points.
//! All math runs in `f64`; [`GridField`] stores its samples as `f32` and
//! promotes them on read.

mod grid;
mod perturbed;
mod primitive;

pub use grid::{bake_grid, Bbox, GridField};
pub(crate) use grid::fill_grid_checked;
pub use perturbed::PerturbedField;
pub use primitive::Primitive;

use crate::{Mat3, Result, Vec3};

/// Value, gradient and Hessian at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub gradient: Vec3,
    pub hessian: Mat3,
}

/// A scalar field over 3-space with first and second derivatives.
///
/// Implementations are immutable and safe to evaluate from many threads.
pub trait ScalarField: Send + Sync {
    fn eval(&self, p: &Vec3) -> Result<f64>;

    fn eval_with_gradient(&self, p: &Vec3) -> Result<(f64, Vec3)>;

    fn hessian(&self, p: &Vec3) -> Result<Mat3>;

    fn gradient(&self, p: &Vec3) -> Result<Vec3> {
        Ok(self.eval_with_gradient(p)?.1)
    }

    fn derivatives(&self, p: &Vec3) -> Result<Derivatives> {
        let (value, gradient) = self.eval_with_gradient(p)?;
        let hessian = self.hessian(p)?;
        Ok(Derivatives {
            value,
            gradient,
            hessian,
        })
    }
}

impl<T: ScalarField + ?Sized> ScalarField for &T {
    fn eval(&self, p: &Vec3) -> Result<f64> {
        (**self).eval(p)
    }
    fn eval_with_gradient(&self, p: &Vec3) -> Result<(f64, Vec3)> {
        (**self).eval_with_gradient(p)
    }
    fn hessian(&self, p: &Vec3) -> Result<Mat3> {
        (**self).hessian(p)
    }
    fn gradient(&self, p: &Vec3) -> Result<Vec3> {
        (**self).gradient(p)
    }
    fn derivatives(&self, p: &Vec3) -> Result<Derivatives> {
        (**self).derivatives(p)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for Box<T> {
    fn eval(&self, p: &Vec3) -> Result<f64> {
        (**self).eval(p)
    }
    fn eval_with_gradient(&self, p: &Vec3) -> Result<(f64, Vec3)> {
        (**self).eval_with_gradient(p)
    }
    fn hessian(&self, p: &Vec3) -> Result<Mat3> {
        (**self).hessian(p)
    }
    fn gradient(&self, p: &Vec3) -> Result<Vec3> {
        (**self).gradient(p)
    }
    fn derivatives(&self, p: &Vec3) -> Result<Derivatives> {
        (**self).derivatives(p)
    }
}

impl<T: ScalarField + ?Sized> ScalarField for std::sync::Arc<T> {
    fn eval(&self, p: &Vec3) -> Result<f64> {
        (**self).eval(p)
    }
    fn eval_with_gradient(&self, p: &Vec3) -> Result<(f64, Vec3)> {
        (**self).eval_with_gradient(p)
    }
    fn hessian(&self, p: &Vec3) -> Result<Mat3> {
        (**self).hessian(p)
    }
    fn gradient(&self, p: &Vec3) -> Result<Vec3> {
        (**self).gradient(p)
    }
    fn derivatives(&self, p: &Vec3) -> Result<Derivatives> {
        (**self).derivatives(p)
    }
}

/// Central-difference gradient of `eval`.
pub fn finite_difference_gradient<F: ScalarField + ?Sized>(
    field: &F,
    p: &Vec3,
    h: f64,
) -> Result<Vec3> {
    let mut g = Vec3::zeros();
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = h;
        g[k] = (field.eval(&(p + e))? - field.eval(&(p - e))?) / (2.0 * h);
    }
    Ok(g)
}

/// Central-difference Hessian from the gradient, symmetrized.
pub fn finite_difference_hessian<F: ScalarField + ?Sized>(
    field: &F,
    p: &Vec3,
    h: f64,
) -> Result<Mat3> {
    let mut m = Mat3::zeros();
    for k in 0..3 {
        let mut e = Vec3::zeros();
        e[k] = h;
        let d = (field.gradient(&(p + e))? - field.gradient(&(p - e))?) / (2.0 * h);
        m.set_column(k, &d);
    }
    Ok((m + m.transpose()) * 0.5)
}
