//! On-surface point sampling and isosurface extraction.

mod dual_contouring;
mod marching_cubes;
mod mc_tables;
mod sampling;

pub use dual_contouring::dual_contouring;
pub use marching_cubes::marching_cubes;
pub use sampling::{sample_surface, SampleSet, DEFAULT_SAMPLE_TOLERANCE};

use rayon::prelude::*;

use crate::field::{Bbox, ScalarField};
use crate::{Error, Result, Vec3};

/// Which isosurfacer to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Isosurfacer {
    MarchingCubes,
    DualContouring,
}

impl std::str::FromStr for Isosurfacer {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" | "marching-cubes" => Ok(Self::MarchingCubes),
            "dc" | "dual-contouring" => Ok(Self::DualContouring),
            _ => Err(Error::InvalidArgument(format!("unknown isosurfacer `{s}`"))),
        }
    }
}

impl std::fmt::Display for Isosurfacer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::MarchingCubes => "mc",
            Self::DualContouring => "dc",
        })
    }
}

pub fn extract<F: ScalarField + ?Sized>(
    method: Isosurfacer,
    field: &F,
    resolution: usize,
    bbox: &Bbox,
) -> Result<crate::mesh::TriangleMesh> {
    match method {
        Isosurfacer::MarchingCubes => marching_cubes(field, resolution, bbox),
        Isosurfacer::DualContouring => dual_contouring(field, resolution, bbox),
    }
}

/// Field values on a `res³` lattice spanning the bbox, x fastest.
struct Lattice {
    res: usize,
    origin: Vec3,
    step: Vec3,
    values: Vec<f64>,
}

impl Lattice {
    fn sample<F: ScalarField + ?Sized>(field: &F, res: usize, bbox: &Bbox) -> Result<Self> {
        if res < 8 {
            return Err(Error::InvalidArgument(format!("resolution {res} below 8")));
        }
        if bbox.is_degenerate() {
            return Err(Error::InvalidArgument("degenerate bbox".into()));
        }
        let step = bbox.extent() / (res - 1) as f64;
        let origin = bbox.min;
        let slabs: Vec<Vec<f64>> = (0..res)
            .into_par_iter()
            .map(|k| {
                let mut slab = Vec::with_capacity(res * res);
                for j in 0..res {
                    for i in 0..res {
                        let p = Self::position(origin, step, res, i, j, k, bbox);
                        slab.push(field.eval(&p)?);
                    }
                }
                Ok(slab)
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            res,
            origin,
            step,
            values: slabs.concat(),
        })
    }

    /// Node position; the last node snaps to the bbox max so it stays in domain.
    fn position(origin: Vec3, step: Vec3, res: usize, i: usize, j: usize, k: usize, bbox: &Bbox) -> Vec3 {
        let c = |n: usize, a: usize| {
            if n == res - 1 {
                bbox.max[a]
            } else {
                origin[a] + n as f64 * step[a]
            }
        };
        Vec3::new(c(i, 0), c(j, 1), c(k, 2))
    }

    fn node(&self, i: usize, j: usize, k: usize) -> Vec3 {
        self.origin + Vec3::new(i as f64 * self.step.x, j as f64 * self.step.y, k as f64 * self.step.z)
    }

    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.res + j) * self.res + i
    }

    fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    /// Zero crossing on the lattice edge from node `n0` along `axis`.
    fn edge_point(&self, n0: [usize; 3], axis: usize) -> Vec3 {
        let mut n1 = n0;
        n1[axis] += 1;
        let (v0, v1) = (self.value(n0[0], n0[1], n0[2]), self.value(n1[0], n1[1], n1[2]));
        let t = if v0 == v1 { 0.5 } else { (v0 / (v0 - v1)).clamp(0.0, 1.0) };
        let p0 = self.node(n0[0], n0[1], n0[2]);
        let p1 = self.node(n1[0], n1[1], n1[2]);
        p0 + (p1 - p0) * t
    }
}

/// Unit field gradient at `p`, or `None` where it is unavailable or zero.
fn field_normal<F: ScalarField + ?Sized>(field: &F, p: &Vec3) -> Option<Vec3> {
    let g = field.gradient(p).ok()?;
    let l = g.norm();
    (l > 1e-12 && l.is_finite()).then(|| g / l)
}

/// Field normals per vertex, falling back to area-weighted face normals.
fn attach_normals<F: ScalarField + ?Sized>(field: &F, mesh: &mut crate::mesh::TriangleMesh) {
    let normals: Vec<Option<Vec3>> = mesh.vertices.par_iter().map(|p| field_normal(field, p)).collect();
    mesh.compute_vertex_normals();
    if let Some(fallback) = mesh.normals.as_mut() {
        for (n, g) in fallback.iter_mut().zip(normals) {
            if let Some(g) = g {
                *n = g;
            }
        }
    }
}
