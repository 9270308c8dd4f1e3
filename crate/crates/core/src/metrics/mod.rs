//! Geometric differences between meshes, point sets and surfaces.
//!
//! Chamfer distance and normal difference are measured on area-uniform
//! surface samples, so they do not depend on mesh resolution. Distances are
//! taken from each sample to the other surface (exact point-to-triangle via a
//! BVH), which removes the sampling floor of point-to-point matching.

mod bvh;

pub use bvh::{closest_point_on_triangle, ClosestPoint, SurfaceIndex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::mesh::TriangleMesh;
use crate::{Error, Result, Vec3};

pub const DEFAULT_METRIC_SAMPLES: usize = 30_000;

fn check(mesh: &TriangleMesh) -> Result<()> {
    if mesh.faces.is_empty() {
        return Err(Error::InvalidMesh("mesh has no faces".into()));
    }
    Ok(())
}

/// Mean distance from `n` area-uniform samples of `from` to the surface `to`.
fn one_sided(from: &TriangleMesh, to: &SurfaceIndex, n: usize, seed: u64) -> Result<f64> {
    let samples = from.sample_by_area(n, seed)?;
    let sum: f64 = samples.par_iter().map(|s| to.distance(&s.point)).sum();
    Ok(sum / n.max(1) as f64)
}

/// Symmetric Chamfer distance: the average of both one-sided mean distances.
pub fn chamfer(a: &TriangleMesh, b: &TriangleMesh, n_samples: usize, seed: u64) -> Result<f64> {
    check(a)?;
    check(b)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let (ia, ib) = (SurfaceIndex::new(a)?, SurfaceIndex::new(b)?);
    Ok(0.5 * (one_sided(a, &ib, n_samples, seed)? + one_sided(b, &ia, n_samples, seed.wrapping_add(1))?))
}

/// Mean exact point-to-surface distance.
pub fn p2s(points: &[Vec3], reference: &TriangleMesh) -> Result<f64> {
    check(reference)?;
    if points.is_empty() {
        return Err(Error::InvalidArgument("no points".into()));
    }
    let idx = SurfaceIndex::new(reference)?;
    Ok(p2s_indexed(points, &idx))
}

pub fn p2s_indexed(points: &[Vec3], idx: &SurfaceIndex) -> f64 {
    let sum: f64 = points.par_iter().map(|p| idx.distance(p)).sum();
    sum / points.len().max(1) as f64
}

fn one_sided_normals(from: &TriangleMesh, to: &TriangleMesh, idx: &SurfaceIndex, n: usize, seed: u64) -> Result<f64> {
    let samples = from.sample_by_area(n, seed)?;
    let sum: f64 = samples
        .par_iter()
        .map(|s| {
            let na = from.interpolated_normal(s.face, s.bary);
            let c = idx.closest_point(&s.point);
            let nb = to.interpolated_normal(c.face, c.bary);
            1.0 - na.dot(&nb).clamp(-1.0, 1.0)
        })
        .sum();
    Ok(sum / n.max(1) as f64)
}

/// Mean `1 - cos` between normals at samples and at their nearest points on
/// the other mesh, symmetrized. Vertex normals are interpolated when present.
pub fn normal_difference(a: &TriangleMesh, b: &TriangleMesh, n_samples: usize, seed: u64) -> Result<f64> {
    check(a)?;
    check(b)?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one sample".into()));
    }
    let (ia, ib) = (SurfaceIndex::new(a)?, SurfaceIndex::new(b)?);
    Ok(0.5
        * (one_sided_normals(a, b, &ib, n_samples, seed)?
            + one_sided_normals(b, a, &ia, n_samples, seed.wrapping_add(1))?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshComparison {
    pub chamfer: f64,
    pub p2s_a_to_b: f64,
    pub p2s_b_to_a: f64,
    pub normal_diff: f64,
}

/// All mesh-to-mesh metrics; the `p2s` terms use the vertices of each mesh.
pub fn compare(a: &TriangleMesh, b: &TriangleMesh, n_samples: usize, seed: u64) -> Result<MeshComparison> {
    Ok(MeshComparison {
        chamfer: chamfer(a, b, n_samples, seed)?,
        p2s_a_to_b: p2s(&a.vertices, b)?,
        p2s_b_to_a: p2s(&b.vertices, a)?,
        normal_diff: normal_difference(a, b, n_samples, seed)?,
    })
}
