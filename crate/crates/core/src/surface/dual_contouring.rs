use std::collections::HashMap;

use super::{attach_normals, field_normal, Lattice};
use crate::field::{Bbox, ScalarField};
use crate::mesh::TriangleMesh;
use crate::{Error, Mat3, Result, Vec3};

/// Pull of the cell vertex toward the mean crossing point, relative to the
/// plane terms.
const QEF_REGULARIZATION: f64 = 0.05;

/// Dual contouring: one vertex per sign-changing cell placed by a regularized
/// quadratic error fit to the tangent planes at edge crossings, and one quad
/// per sign-changing lattice edge.
pub fn dual_contouring<F: ScalarField + ?Sized>(field: &F, resolution: usize, bbox: &Bbox) -> Result<TriangleMesh> {
    let lat = Lattice::sample(field, resolution, bbox)?;
    let n = lat.res;
    let cell_index = |i: usize, j: usize, k: usize| (k * (n - 1) + j) * (n - 1) + i;
    let mut cell_vertex: HashMap<usize, u32> = HashMap::new();
    let mut vertices = Vec::new();

    for k in 0..n - 1 {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let mut crossings = Vec::new();
                for axis in 0..3 {
                    for a in 0..2 {
                        for b in 0..2 {
                            let mut n0 = [i, j, k];
                            n0[(axis + 1) % 3] += a;
                            n0[(axis + 2) % 3] += b;
                            let mut n1 = n0;
                            n1[axis] += 1;
                            let v0 = lat.value(n0[0], n0[1], n0[2]);
                            let v1 = lat.value(n1[0], n1[1], n1[2]);
                            if (v0 < 0.0) != (v1 < 0.0) {
                                crossings.push(lat.edge_point(n0, axis));
                            }
                        }
                    }
                }
                if crossings.is_empty() {
                    continue;
                }
                let lo = lat.node(i, j, k);
                let hi = lat.node(i + 1, j + 1, k + 1);
                let v = solve_qef(field, &crossings, lat.step.norm(), &lo, &hi);
                cell_vertex.insert(cell_index(i, j, k), vertices.len() as u32);
                vertices.push(v);
            }
        }
    }

    let mut faces = Vec::new();
    for k in 0..n {
        for j in 0..n {
            for i in 0..n {
                let v0 = lat.value(i, j, k);
                for axis in 0..3 {
                    let mut n1 = [i, j, k];
                    n1[axis] += 1;
                    if n1[axis] >= n {
                        continue;
                    }
                    let v1 = lat.value(n1[0], n1[1], n1[2]);
                    if (v0 < 0.0) == (v1 < 0.0) {
                        continue;
                    }
                    let (u, w) = ((axis + 1) % 3, (axis + 2) % 3);
                    let base = [i, j, k];
                    if base[u] == 0 || base[w] == 0 || base[u] >= n - 1 || base[w] >= n - 1 {
                        continue;
                    }
                    // cells around the edge, counter-clockwise about +axis
                    let mut quad = [0u32; 4];
                    for (q, (du, dw)) in [(1, 1), (0, 1), (0, 0), (1, 0)].iter().enumerate() {
                        let mut c = base;
                        c[u] -= du;
                        c[w] -= dw;
                        quad[q] = cell_vertex[&cell_index(c[0], c[1], c[2])];
                    }
                    if v0 >= 0.0 {
                        quad.reverse();
                    }
                    for f in [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]] {
                        if f[0] != f[1] && f[1] != f[2] && f[0] != f[2] {
                            faces.push(f);
                        }
                    }
                }
            }
        }
    }
    if faces.is_empty() {
        return Err(Error::EmptySurface);
    }
    let mut mesh = TriangleMesh::new(vertices, faces);
    attach_normals(field, &mut mesh);
    Ok(mesh)
}

/// Minimizes `Σ (nᵢ·(x - pᵢ))² + λ|x - m|²`, clamped to the cell.
fn solve_qef<F: ScalarField + ?Sized>(field: &F, points: &[Vec3], scale: f64, lo: &Vec3, hi: &Vec3) -> Vec3 {
    let mass = points.iter().sum::<Vec3>() / points.len() as f64;
    let lambda = QEF_REGULARIZATION * points.len() as f64;
    let mut a = Mat3::identity() * lambda;
    let mut b = Vec3::zeros();
    for p in points {
        if let Some(nrm) = field_normal(field, p) {
            let nn = nrm * nrm.transpose();
            a += nn;
            b += nn * (p - mass);
        }
    }
    let offset = a.try_inverse().map(|inv| inv * b).unwrap_or_else(Vec3::zeros);
    let offset = if offset.norm() > 2.0 * scale { Vec3::zeros() } else { offset };
    let x = mass + offset;
    Vec3::new(x.x.clamp(lo.x, hi.x), x.y.clamp(lo.y, hi.y), x.z.clamp(lo.z, hi.z))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Primitive;

    #[test]
    fn sphere_vertices_close_to_surface() {
        let s = Primitive::sphere(Vec3::zeros(), 0.5);
        let m = dual_contouring(&s, 64, &Bbox::standard()).unwrap();
        m.validate().unwrap();
        assert!(m.vertices.iter().all(|v| (v.norm() - 0.5).abs() <= 2e-2));
        assert!(m.is_watertight());
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn blob_is_closed() {
        let f = Primitive::preset("blob").unwrap();
        let m = dual_contouring(&f, 48, &Bbox::standard()).unwrap();
        assert!(m.is_watertight());
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn empty_field() {
        let s = Primitive::sphere(Vec3::new(5.0, 0.0, 0.0), 0.5);
        assert!(matches!(dual_contouring(&s, 16, &Bbox::standard()), Err(Error::EmptySurface)));
    }
}
