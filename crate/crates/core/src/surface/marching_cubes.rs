use std::collections::HashMap;

use super::mc_tables::{EDGE_TABLE, TRIANGLE_TABLE};
use super::{attach_normals, Lattice};
use crate::field::{Bbox, ScalarField};
use crate::mesh::TriangleMesh;
use crate::{Error, Result};

/// Cube corner offsets in table order.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];

/// Cube edge `e` as (start corner, axis).
const EDGES: [(usize, usize); 12] = [
    (0, 0),
    (1, 1),
    (3, 0),
    (0, 1),
    (4, 0),
    (5, 1),
    (7, 0),
    (4, 1),
    (0, 2),
    (1, 2),
    (2, 2),
    (3, 2),
];

/// Marching cubes over a `resolution³` lattice of the bbox.
///
/// Corners with negative value are inside. Vertices are welded per lattice
/// edge, so the mesh of a closed surface is watertight; normals come from the
/// field gradient.
pub fn marching_cubes<F: ScalarField + ?Sized>(field: &F, resolution: usize, bbox: &Bbox) -> Result<TriangleMesh> {
    let lat = Lattice::sample(field, resolution, bbox)?;
    let n = lat.res;
    let mut welded: HashMap<(usize, u8), u32> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for k in 0..n - 1 {
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    if lat.value(i + off[0], j + off[1], k + off[2]) < 0.0 {
                        case |= 1 << c;
                    }
                }
                if EDGE_TABLE[case] == 0 {
                    continue;
                }
                let mut ids = [u32::MAX; 12];
                for (e, &(corner, axis)) in EDGES.iter().enumerate() {
                    if EDGE_TABLE[case] & (1 << e) == 0 {
                        continue;
                    }
                    let off = CORNERS[corner];
                    let n0 = [i + off[0], j + off[1], k + off[2]];
                    let key = (lat.index(n0[0], n0[1], n0[2]), axis as u8);
                    ids[e] = *welded.entry(key).or_insert_with(|| {
                        vertices.push(lat.edge_point(n0, axis));
                        vertices.len() as u32 - 1
                    });
                }
                for tri in TRIANGLE_TABLE[case].chunks(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    let f = [ids[tri[0] as usize], ids[tri[2] as usize], ids[tri[1] as usize]];
                    if f[0] != f[1] && f[1] != f[2] && f[0] != f[2] {
                        faces.push(f);
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
