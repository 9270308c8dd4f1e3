//! Indexed triangle meshes.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    /// Unit per-vertex normals, if known.
    pub normals: Option<Vec<Vec3>>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[u32; 3]>) -> Self {
        Self {
            vertices,
            faces,
            normals: None,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    /// Checks index range, degenerate faces, finiteness and normal lengths.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        if let Some(p) = self.vertices.iter().find(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidMesh(format!("non-finite vertex {p:?}")));
        }
        for (k, f) in self.faces.iter().enumerate() {
            if f.iter().any(|&i| i as usize >= n) {
                return Err(Error::InvalidMesh(format!("face {k} index out of range")));
            }
            if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                return Err(Error::InvalidMesh(format!("face {k} is degenerate")));
            }
        }
        if let Some(normals) = &self.normals {
            if normals.len() != n {
                return Err(Error::InvalidMesh("normal count differs from vertex count".into()));
            }
            if normals.iter().any(|v| (v.norm() - 1.0).abs() > 1e-6) {
                return Err(Error::InvalidMesh("normal not unit length".into()));
            }
        }
        Ok(())
    }

    pub fn triangle(&self, f: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[f];
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unnormalized face normal (twice the area).
    pub fn face_cross(&self, f: usize) -> Vec3 {
        let [a, b, c] = self.triangle(f);
        (b - a).cross(&(c - a))
    }

    pub fn area(&self) -> f64 {
        (0..self.faces.len()).map(|f| 0.5 * self.face_cross(f).norm()).sum()
    }

    /// Undirected edge → number of incident faces.
    pub fn edge_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut m = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// Every edge shared by exactly two faces.
    pub fn is_watertight(&self) -> bool {
        !self.faces.is_empty() && self.edge_counts().values().all(|&c| c == 2)
    }

    /// `V - E + F` over vertices referenced by faces.
    pub fn euler_characteristic(&self) -> i64 {
        let mut used = vec![false; self.vertices.len()];
        for f in &self.faces {
            for &i in f {
                used[i as usize] = true;
            }
        }
        let v = used.iter().filter(|&&u| u).count() as i64;
        v - self.edge_counts().len() as i64 + self.faces.len() as i64
    }

    pub fn mean_edge_length(&self) -> f64 {
        let edges = self.edge_counts();
        if edges.is_empty() {
            return 0.0;
        }
        let sum: f64 = edges
            .keys()
            .map(|&(a, b)| (self.vertices[a as usize] - self.vertices[b as usize]).norm())
            .sum();
        sum / edges.len() as f64
    }

    /// Signed enclosed volume; positive for outward-oriented closed meshes.
    pub fn signed_volume(&self) -> f64 {
        (0..self.faces.len())
            .map(|f| {
                let [a, b, c] = self.triangle(f);
                a.dot(&b.cross(&c)) / 6.0
            })
            .sum()
    }

    /// Area-weighted average of incident face normals, normalized.
    pub fn compute_vertex_normals(&mut self) {
        let mut acc = vec![Vec3::zeros(); self.vertices.len()];
        for f in &self.faces {
            let [a, b, c] = *f;
            let [pa, pb, pc] = [
                self.vertices[a as usize],
                self.vertices[b as usize],
                self.vertices[c as usize],
            ];
            let n = (pb - pa).cross(&(pc - pa));
            for i in f {
                acc[*i as usize] += n;
            }
        }
        self.normals = Some(
            acc.into_iter()
                .map(|n| {
                    let l = n.norm();
                    if l > 0.0 {
                        n / l
                    } else {
                        Vec3::z()
                    }
                })
                .collect(),
        );
    }

    pub fn with_vertex_normals(mut self) -> Self {
        self.compute_vertex_normals();
        self
    }

    /// Drops vertices not referenced by any face and reindexes.
    pub fn compact(&mut self) {
        let mut map = vec![u32::MAX; self.vertices.len()];
        let mut verts = Vec::new();
        let mut normals = self.normals.as_ref().map(|_| Vec::new());
        for f in &mut self.faces {
            for i in f.iter_mut() {
                let old = *i as usize;
                if map[old] == u32::MAX {
                    map[old] = verts.len() as u32;
                    verts.push(self.vertices[old]);
                    if let (Some(out), Some(src)) = (normals.as_mut(), self.normals.as_ref()) {
                        out.push(src[old]);
                    }
                }
                *i = map[old];
            }
        }
        self.vertices = verts;
        self.normals = normals;
    }

    /// `n` points uniformly distributed by area, with the face each came from
    /// and its barycentric coordinates.
    pub fn sample_by_area(&self, n: usize, seed: u64) -> Result<Vec<SurfaceSample>> {
        if self.faces.is_empty() {
            return Err(Error::InvalidMesh("mesh has no faces".into()));
        }
        let mut cdf = Vec::with_capacity(self.faces.len());
        let mut total = 0.0;
        for f in 0..self.faces.len() {
            total += self.face_cross(f).norm();
            cdf.push(total);
        }
        if !(total > 0.0) {
            return Err(Error::InvalidMesh("mesh has zero area".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Ok((0..n)
            .map(|_| {
                let t = rng.random::<f64>() * total;
                let face = cdf.partition_point(|&c| c <= t).min(self.faces.len() - 1);
                let (mut u, mut v): (f64, f64) = (rng.random(), rng.random());
                if u + v > 1.0 {
                    u = 1.0 - u;
                    v = 1.0 - v;
                }
                let bary = [1.0 - u - v, u, v];
                let [a, b, c] = self.triangle(face);
                SurfaceSample {
                    point: a * bary[0] + b * bary[1] + c * bary[2],
                    face,
                    bary,
                }
            })
            .collect())
    }

    /// Barycentric blend of vertex normals (face normal when absent), normalized.
    pub fn interpolated_normal(&self, face: usize, bary: [f64; 3]) -> Vec3 {
        let fallback = || {
            let n = self.face_cross(face);
            let l = n.norm();
            if l > 0.0 {
                n / l
            } else {
                Vec3::z()
            }
        };
        let Some(normals) = &self.normals else {
            return fallback();
        };
        let f = self.faces[face];
        let n = normals[f[0] as usize] * bary[0] + normals[f[1] as usize] * bary[1] + normals[f[2] as usize] * bary[2];
        let l = n.norm();
        if l > 1e-12 {
            n / l
        } else {
            fallback()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurfaceSample {
    pub point: Vec3,
    pub face: usize,
    pub bary: [f64; 3],
}

/// Octahedron with vertices on the unit axes, outward oriented.
pub fn octahedron() -> TriangleMesh {
    let v = vec![
        Vec3::x(),
        -Vec3::x(),
        Vec3::y(),
        -Vec3::y(),
        Vec3::z(),
        -Vec3::z(),
    ];
    let f = vec![
        [0, 2, 4],
        [2, 1, 4],
        [1, 3, 4],
        [3, 0, 4],
        [2, 0, 5],
        [1, 2, 5],
        [3, 1, 5],
        [0, 3, 5],
    ];
    TriangleMesh::new(v, f)
}

/// Subdivided icosahedron projected onto a sphere.
pub fn icosphere(center: Vec3, radius: f64, subdivisions: usize) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(faces.len() * 4);
        let mut midpoint = |a: u32, b: u32, verts: &mut Vec<Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                verts.push(((verts[a as usize] + verts[b as usize]) * 0.5).normalize());
                verts.len() as u32 - 1
            })
        };
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut verts);
            let bc = midpoint(b, c, &mut verts);
            let ca = midpoint(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let normals = verts.clone();
    let mut m = TriangleMesh::new(verts.iter().map(|v| center + v * radius).collect(), faces);
    m.normals = Some(normals);
    m
}
