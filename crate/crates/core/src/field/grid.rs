use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ScalarField;
use crate::{Error, Mat3, Result, Vec3};

/// Axis-aligned box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bbox {
    pub min: Vec3,
    pub max: Vec3,
}

impl Bbox {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self { min, max }
    }

    /// `[-half, half]³`.
    pub fn cube(half: f64) -> Self {
        Self::new(Vec3::repeat(-half), Vec3::repeat(half))
    }

    /// Default extraction box keeping unit-sphere-normalized shapes interior.
    pub fn standard() -> Self {
        Self::cube(1.05)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn is_degenerate(&self) -> bool {
        !(0..3).all(|k| self.max[k] > self.min[k] && self.min[k].is_finite() && self.max[k].is_finite())
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|k| p[k] >= self.min[k] && p[k] <= self.max[k])
    }

    pub fn translated(&self, t: &Vec3) -> Self {
        Self::new(self.min + t, self.max + t)
    }

    /// Smallest box containing all points, or `None` for an empty slice.
    pub fn from_points(points: &[Vec3]) -> Option<Self> {
        let first = points.first()?;
        let (min, max) = points.iter().fold((*first, *first), |(lo, hi), p| {
            (lo.inf(p), hi.sup(p))
        });
        Some(Self::new(min, max))
    }
}

/// Regular grid of samples evaluated with a uniform cubic B-spline.
///
/// Samples act as spline coefficients (approximating, not interpolating), so
/// value, gradient and Hessian are C² over the whole box. Coefficients past
/// the border replicate the edge sample. Queries outside the box are errors.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    dims: [usize; 3],
    bbox: Bbox,
    values: Vec<f32>,
    spacing: Vec3,
}

impl GridField {
    /// `values` is x-fastest, then y, then z.
    pub fn new(dims: [usize; 3], bbox: Bbox, values: Vec<f32>) -> Result<Self> {
        if dims.iter().any(|&d| d < 4) {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least 4 samples per axis, got {dims:?}"
            )));
        }
        if bbox.is_degenerate() {
            return Err(Error::InvalidArgument(format!("degenerate bbox {bbox:?}")));
        }
        let n = dims[0] * dims[1] * dims[2];
        if values.len() != n {
            return Err(Error::InvalidArgument(format!(
                "expected {n} grid values, got {}",
                values.len()
            )));
        }
        let ext = bbox.extent();
        let spacing = Vec3::new(
            ext.x / (dims[0] - 1) as f64,
            ext.y / (dims[1] - 1) as f64,
            ext.z / (dims[2] - 1) as f64,
        );
        Ok(Self {
            dims,
            bbox,
            values,
            spacing,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn bbox(&self) -> &Bbox {
        &self.bbox
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn spacing(&self) -> Vec3 {
        self.spacing
    }

    /// World position of node `(i, j, k)`.
    pub fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        node_position(&self.bbox, &self.spacing, i, j, k)
    }

    pub fn with_bbox(&self, bbox: Bbox) -> Result<Self> {
        Self::new(self.dims, bbox, self.values.clone())
    }

    #[inline]
    fn sample(&self, i: isize, j: isize, k: isize) -> f64 {
        let c = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
        let (i, j, k) = (c(i, self.dims[0]), c(j, self.dims[1]), c(k, self.dims[2]));
        self.values[i + self.dims[0] * (j + self.dims[1] * k)] as f64
    }

    /// Base node index and basis weights (value, d/du, d²/du²) along each axis.
    fn locate(&self, p: &Vec3) -> Result<[(isize, [[f64; 4]; 3]); 3]> {
        let tol = 1e-12 * self.bbox.extent().max();
        if !(0..3).all(|a| p[a] >= self.bbox.min[a] - tol && p[a] <= self.bbox.max[a] + tol) {
            return Err(Error::OutOfDomain(*p));
        }
        let mut out = [(0isize, [[0.0; 4]; 3]); 3];
        for a in 0..3 {
            let t = ((p[a] - self.bbox.min[a]) / self.spacing[a]).clamp(0.0, (self.dims[a] - 1) as f64);
            let base = (t.floor() as isize).min(self.dims[a] as isize - 2);
            let u = t - base as f64;
            out[a] = (base, bspline_weights(u));
        }
        Ok(out)
    }

    fn accumulate(&self, p: &Vec3, second: bool) -> Result<(f64, Vec3, Mat3)> {
        let loc = self.locate(p)?;
        let (bx, wx) = loc[0];
        let (by, wy) = loc[1];
        let (bz, wz) = loc[2];
        let mut v = 0.0;
        let mut g = Vec3::zeros();
        let mut h = [0.0f64; 6]; // xx yy zz xy xz yz
        for c in 0..4 {
            for b in 0..4 {
                for a in 0..4 {
                    let s = self.sample(bx - 1 + a as isize, by - 1 + b as isize, bz - 1 + c as isize);
                    let (x0, x1, x2) = (wx[0][a], wx[1][a], wx[2][a]);
                    let (y0, y1, y2) = (wy[0][b], wy[1][b], wy[2][b]);
                    let (z0, z1, z2) = (wz[0][c], wz[1][c], wz[2][c]);
                    v += s * x0 * y0 * z0;
                    g.x += s * x1 * y0 * z0;
                    g.y += s * x0 * y1 * z0;
                    g.z += s * x0 * y0 * z1;
                    if second {
                        h[0] += s * x2 * y0 * z0;
                        h[1] += s * x0 * y2 * z0;
                        h[2] += s * x0 * y0 * z2;
                        h[3] += s * x1 * y1 * z0;
                        h[4] += s * x1 * y0 * z1;
                        h[5] += s * x0 * y1 * z1;
                    }
                }
            }
        }
        let sp = self.spacing;
        let g = Vec3::new(g.x / sp.x, g.y / sp.y, g.z / sp.z);
        let hm = Mat3::new(
            h[0] / (sp.x * sp.x),
            h[3] / (sp.x * sp.y),
            h[4] / (sp.x * sp.z),
            h[3] / (sp.x * sp.y),
            h[1] / (sp.y * sp.y),
            h[5] / (sp.y * sp.z),
            h[4] / (sp.x * sp.z),
            h[5] / (sp.y * sp.z),
            h[2] / (sp.z * sp.z),
        );
        Ok((v, g, hm))
    }
}

fn node_position(bbox: &Bbox, spacing: &Vec3, i: usize, j: usize, k: usize) -> Vec3 {
    bbox.min + Vec3::new(i as f64 * spacing.x, j as f64 * spacing.y, k as f64 * spacing.z)
}

/// Uniform cubic B-spline basis for nodes `base-1 ..= base+2` at offset `u ∈ [0, 1]`.
#[inline]
fn bspline_weights(u: f64) -> [[f64; 4]; 3] {
    let u2 = u * u;
    let u3 = u2 * u;
    let v = 1.0 - u;
    [
        [
            v * v * v / 6.0,
            (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0,
            (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0,
            u3 / 6.0,
        ],
        [
            -0.5 * v * v,
            1.5 * u2 - 2.0 * u,
            -1.5 * u2 + u + 0.5,
            0.5 * u2,
        ],
        [v, 3.0 * u - 2.0, 1.0 - 3.0 * u, u],
    ]
}

impl ScalarField for GridField {
    fn eval(&self, p: &Vec3) -> Result<f64> {
        let loc = self.locate(p)?;
        let (bx, wx) = loc[0];
        let (by, wy) = loc[1];
        let (bz, wz) = loc[2];
        let mut v = 0.0;
        for c in 0..4 {
            let mut vy = 0.0;
            for b in 0..4 {
                let mut vx = 0.0;
                for a in 0..4 {
                    vx += wx[0][a]
                        * self.sample(bx - 1 + a as isize, by - 1 + b as isize, bz - 1 + c as isize);
                }
                vy += wy[0][b] * vx;
            }
            v += wz[0][c] * vy;
        }
        Ok(v)
    }

    fn eval_with_gradient(&self, p: &Vec3) -> Result<(f64, Vec3)> {
        let (v, g, _) = self.accumulate(p, false)?;
        Ok((v, g))
    }

    fn hessian(&self, p: &Vec3) -> Result<Mat3> {
        Ok(self.accumulate(p, true)?.2)
    }

    fn derivatives(&self, p: &Vec3) -> Result<super::Derivatives> {
        let (value, gradient, hessian) = self.accumulate(p, true)?;
        Ok(super::Derivatives {
            value,
            gradient,
            hessian,
        })
    }
}

fn validate_bake_args(dims: [usize; 3], bbox: &Bbox) -> Result<()> {
    if dims.iter().any(|&d| d < 8) {
        return Err(Error::InvalidArgument(format!(
            "bake dims must be >= 8 per axis, got {dims:?}"
        )));
    }
    if bbox.is_degenerate() {
        return Err(Error::InvalidArgument(format!("degenerate bbox {bbox:?}")));
    }
    Ok(())
}

/// Fills a grid node by node with `sample`, one z-slab per task.
pub(crate) fn fill_grid_checked<S>(dims: [usize; 3], bbox: &Bbox, sample: S) -> Result<Vec<f32>>
where
    S: Fn(&Vec3) -> Result<f64> + Sync,
{
    let ext = bbox.extent();
    let spacing = Vec3::new(
        ext.x / (dims[0] - 1) as f64,
        ext.y / (dims[1] - 1) as f64,
        ext.z / (dims[2] - 1) as f64,
    );
    let slab = dims[0] * dims[1];
    let mut values = vec![0f32; slab * dims[2]];
    values
        .par_chunks_mut(slab)
        .enumerate()
        .try_for_each(|(k, chunk)| -> Result<()> {
            for j in 0..dims[1] {
                for i in 0..dims[0] {
                    let p = node_position(bbox, &spacing, i, j, k);
                    chunk[i + dims[0] * j] = sample(&p)? as f32;
                }
            }
            Ok(())
        })?;
    Ok(values)
}

/// Samples `field` at every node of a `dims` lattice spanning `bbox`.
///
/// The box should contain the zero set with a margin of at least two cells.
/// Output is independent of the thread count.
pub fn bake_grid<F: ScalarField + ?Sized>(field: &F, dims: [usize; 3], bbox: Bbox) -> Result<GridField> {
    validate_bake_args(dims, &bbox)?;
    let values = fill_grid_checked(dims, &bbox, |p| field.eval(p))?;
    GridField::new(dims, bbox, values)
}
