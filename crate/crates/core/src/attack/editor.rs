//! Mutable triangle mesh with vertex-face adjacency for local edits.

use crate::mesh::TriangleMesh;
use crate::{Error, Result, Vec3};

#[derive(Debug, Clone)]
pub(crate) struct MeshEditor {
    pub pos: Vec<Vec3>,
    pub faces: Vec<[u32; 3]>,
    pub face_alive: Vec<bool>,
    pub vertex_alive: Vec<bool>,
    pub vfaces: Vec<Vec<u32>>,
}

/// Rotates `f` so that it starts with `a`.
fn starting_at(f: [u32; 3], a: u32) -> [u32; 3] {
    if f[0] == a {
        f
    } else if f[1] == a {
        [f[1], f[2], f[0]]
    } else {
        [f[2], f[0], f[1]]
    }
}

impl MeshEditor {
    pub fn new(mesh: &TriangleMesh) -> Result<Self> {
        mesh.validate()?;
        let mut e = Self {
            pos: mesh.vertices.clone(),
            faces: Vec::with_capacity(mesh.faces.len()),
            face_alive: Vec::with_capacity(mesh.faces.len()),
            vertex_alive: vec![true; mesh.vertices.len()],
            vfaces: vec![Vec::new(); mesh.vertices.len()],
        };
        for f in &mesh.faces {
            e.add_face(*f);
        }
        Ok(e)
    }

    /// Fails on edges shared by more than two faces.
    pub fn require_manifold(&self) -> Result<()> {
        let m = self.to_mesh_unchecked();
        if m.edge_counts().values().any(|&c| c > 2) {
            return Err(Error::InvalidMesh("non-manifold edge".into()));
        }
        Ok(())
    }

    fn to_mesh_unchecked(&self) -> TriangleMesh {
        TriangleMesh::new(
            self.pos.clone(),
            self.faces
                .iter()
                .zip(&self.face_alive)
                .filter(|(_, a)| **a)
                .map(|(f, _)| *f)
                .collect(),
        )
    }

    /// Live faces and referenced vertices, compacted.
    pub fn into_mesh(self) -> TriangleMesh {
        let mut m = self.to_mesh_unchecked();
        m.compact();
        m
    }

    pub fn add_face(&mut self, f: [u32; 3]) -> u32 {
        let id = self.faces.len() as u32;
        self.faces.push(f);
        self.face_alive.push(true);
        for v in f {
            self.vfaces[v as usize].push(id);
        }
        id
    }

    pub fn remove_face(&mut self, id: u32) {
        self.face_alive[id as usize] = false;
        for v in self.faces[id as usize] {
            self.vfaces[v as usize].retain(|&g| g != id);
        }
    }

    pub fn add_vertex(&mut self, p: Vec3) -> u32 {
        self.pos.push(p);
        self.vertex_alive.push(true);
        self.vfaces.push(Vec::new());
        self.pos.len() as u32 - 1
    }

    pub fn live_vertices(&self) -> usize {
        self.vertex_alive.iter().filter(|&&a| a).count()
    }

    pub fn edge_faces(&self, a: u32, b: u32) -> Vec<u32> {
        self.vfaces[a as usize]
            .iter()
            .copied()
            .filter(|&f| self.faces[f as usize].contains(&b))
            .collect()
    }

    /// Sorted one-ring of `v`.
    pub fn neighbors(&self, v: u32) -> Vec<u32> {
        let mut n: Vec<u32> = self.vfaces[v as usize]
            .iter()
            .flat_map(|&f| self.faces[f as usize])
            .filter(|&u| u != v)
            .collect();
        n.sort_unstable();
        n.dedup();
        n
    }

    pub fn valence(&self, v: u32) -> usize {
        self.neighbors(v).len()
    }

    /// Undirected edges of live faces, each once, in a deterministic order.
    pub fn edges(&self) -> Vec<(u32, u32)> {
        let mut e: Vec<(u32, u32)> = self
            .faces
            .iter()
            .zip(&self.face_alive)
            .filter(|(_, a)| **a)
            .flat_map(|(f, _)| (0..3).map(move |k| (f[k].min(f[(k + 1) % 3]), f[k].max(f[(k + 1) % 3]))))
            .collect();
        e.sort_unstable();
        e.dedup();
        e
    }

    pub fn is_boundary_vertex(&self, v: u32) -> bool {
        self.neighbors(v).iter().any(|&u| self.edge_faces(v, u).len() != 2)
    }

    pub fn face_normal(&self, f: [u32; 3]) -> Vec3 {
        let [a, b, c] = f.map(|v| self.pos[v as usize]);
        (b - a).cross(&(c - a))
    }

    /// Third vertex of each face on edge `(a, b)`: `(c, d)` with faces
    /// `(a, b, c)` and `(b, a, d)`.
    pub fn opposite(&self, a: u32, b: u32) -> Option<(u32, u32, u32, u32)> {
        let fs = self.edge_faces(a, b);
        if fs.len() != 2 {
            return None;
        }
        let (mut c, mut d) = (None, None);
        let (mut fc, mut fd) = (0, 0);
        for f in fs {
            let r = starting_at(self.faces[f as usize], a);
            if r[1] == b {
                c = Some(r[2]);
                fc = f;
            } else {
                d = Some(r[1]);
                fd = f;
            }
        }
        Some((c?, d?, fc, fd))
    }

    /// Inserts a vertex at `p` on edge `(a, b)`, splitting both adjacent faces.
    pub fn split(&mut self, a: u32, b: u32, p: Vec3) -> u32 {
        let m = self.add_vertex(p);
        for f in self.edge_faces(a, b) {
            let r = starting_at(self.faces[f as usize], a);
            self.remove_face(f);
            if r[1] == b {
                let c = r[2];
                self.add_face([a, m, c]);
                self.add_face([m, b, c]);
            } else {
                // face is (a, c, b)
                let c = r[1];
                self.add_face([a, c, m]);
                self.add_face([m, c, b]);
            }
        }
        m
    }

    /// Whether collapsing `a` into `b` at position `p` keeps the mesh a
    /// closed 2-manifold without folding any face by more than 90 degrees.
    pub fn can_collapse(&self, a: u32, b: u32, p: &Vec3) -> bool {
        let Some((c, d, fc, fd)) = self.opposite(a, b) else {
            return false;
        };
        if c == d {
            return false;
        }
        let na = self.neighbors(a);
        let nb = self.neighbors(b);
        let common = na.iter().filter(|v| nb.binary_search(v).is_ok()).count();
        if common != 2 || na.len() + nb.len() < 8 || self.valence(c) <= 3 || self.valence(d) <= 3 {
            return false;
        }
        if self.is_boundary_vertex(a) || self.is_boundary_vertex(b) {
            return false;
        }
        for v in [a, b] {
            for &f in &self.vfaces[v as usize] {
                if f == fc || f == fd {
                    continue;
                }
                let old = self.faces[f as usize];
                let before = self.face_normal(old);
                let moved = old.map(|u| if u == a || u == b { self.pos.len() as u32 } else { u });
                let [x, y, z] = moved.map(|u| if u as usize == self.pos.len() { *p } else { self.pos[u as usize] });
                let after = (y - x).cross(&(z - x));
                if after.norm() <= 1e-14 * before.norm().max(1e-300) || after.dot(&before) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    /// Removes `a`, reattaches its faces to `b` and moves `b` to `p`.
    pub fn collapse(&mut self, a: u32, b: u32, p: Vec3) {
        for f in self.edge_faces(a, b) {
            self.remove_face(f);
        }
        for f in self.vfaces[a as usize].clone() {
            let mut face = self.faces[f as usize];
            self.remove_face(f);
            for v in face.iter_mut() {
                if *v == a {
                    *v = b;
                }
            }
            self.add_face(face);
        }
        self.vertex_alive[a as usize] = false;
        self.pos[b as usize] = p;
    }

    /// Replaces edge `(a, b)` by the edge joining its opposite vertices.
    pub fn flip(&mut self, a: u32, b: u32) -> bool {
        let Some((c, d, fc, fd)) = self.opposite(a, b) else {
            return false;
        };
        if c == d || self.neighbors(c).binary_search(&d).is_ok() {
            return false;
        }
        self.remove_face(fc);
        self.remove_face(fd);
        self.add_face([a, d, c]);
        self.add_face([d, b, c]);
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    fn check_closed(e: &MeshEditor) {
        let m = e.clone().into_mesh();
        m.validate().unwrap();
        assert!(m.is_watertight());
        assert_eq!(m.euler_characteristic(), 2);
        assert!(m.signed_volume() > 0.0);
    }

    #[test]
    fn split_flip_collapse_keep_closed_surface() {
        let m = icosphere(Vec3::zeros(), 1.0, 2);
        let mut e = MeshEditor::new(&m).unwrap();
        let (a, b) = e.edges()[10];
        let mid = (e.pos[a as usize] + e.pos[b as usize]) * 0.5;
        let v = e.split(a, b, mid);
        check_closed(&e);
        assert_eq!(e.valence(v), 4);
        let (x, y) = e.edges()[40];
        assert!(e.flip(x, y));
        check_closed(&e);
        let (x, y) = e.edges()[77];
        let p = e.pos[y as usize];
        if e.can_collapse(x, y, &p) {
            e.collapse(x, y, p);
            check_closed(&e);
        }
    }
}
