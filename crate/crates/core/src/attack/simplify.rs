//! Quadric-error edge-collapse decimation.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use nalgebra::Matrix4;

use super::editor::MeshEditor;
use crate::mesh::TriangleMesh;
use crate::{Mat3, Result, Vec3};

#[derive(Debug, PartialEq)]
struct Candidate {
    cost: f64,
    a: u32,
    b: u32,
    stamp: (u32, u32),
    target: [f64; 3],
}

impl Eq for Candidate {}

impl Ord for Candidate {
    fn cmp(&self, o: &Self) -> Ordering {
        // min-heap on cost, ties by edge
        o.cost.total_cmp(&self.cost).then((o.a, o.b).cmp(&(self.a, self.b)))
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}

fn quadric_cost(q: &Matrix4<f64>, p: &Vec3) -> f64 {
    let h = nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
    (h.transpose() * q * h)[0].max(0.0)
}

fn best_position(q: &Matrix4<f64>, pa: &Vec3, pb: &Vec3) -> (Vec3, f64) {
    let a = Mat3::new(q[(0, 0)], q[(0, 1)], q[(0, 2)], q[(1, 0)], q[(1, 1)], q[(1, 2)], q[(2, 0)], q[(2, 1)], q[(2, 2)]);
    let b = Vec3::new(q[(0, 3)], q[(1, 3)], q[(2, 3)]);
    let mid = (pa + pb) * 0.5;
    let mut best = (mid, quadric_cost(q, &mid));
    if a.determinant().abs() > 1e-12 {
        if let Some(inv) = a.try_inverse() {
            let p = -(inv * b);
            if (p - mid).norm() <= (pa - pb).norm() {
                let c = quadric_cost(q, &p);
                if c < best.1 {
                    best = (p, c);
                }
            }
        }
    }
    for p in [pa, pb] {
        let c = quadric_cost(q, p);
        if c < best.1 {
            best = (*p, c);
        }
    }
    best
}

/// Collapses edges in order of quadric error until `fraction` of the
/// vertices are gone or no legal collapse remains.
pub fn simplify(mesh: &TriangleMesh, fraction: f64) -> Result<TriangleMesh> {
    let mut e = MeshEditor::new(mesh)?;
    e.require_manifold()?;
    let start = e.live_vertices();
    let remove = (fraction * start as f64).round() as usize;
    if remove == 0 {
        return Ok(mesh.clone());
    }
    let mut quadrics = vec![Matrix4::<f64>::zeros(); e.pos.len()];
    for (f, alive) in e.faces.iter().zip(&e.face_alive) {
        if !alive {
            continue;
        }
        let n = e.face_normal(*f);
        let area2 = n.norm();
        if area2 == 0.0 {
            continue;
        }
        let n = n / area2;
        let plane = nalgebra::Vector4::new(n.x, n.y, n.z, -n.dot(&e.pos[f[0] as usize]));
        let k = plane * plane.transpose() * (0.5 * area2);
        for v in f {
            quadrics[*v as usize] += k;
        }
    }
    let mut stamps = vec![0u32; e.pos.len()];
    let push = |heap: &mut BinaryHeap<Candidate>, e: &MeshEditor, q: &[Matrix4<f64>], s: &[u32], a: u32, b: u32| {
        let sum = q[a as usize] + q[b as usize];
        let (p, cost) = best_position(&sum, &e.pos[a as usize], &e.pos[b as usize]);
        heap.push(Candidate {
            cost,
            a,
            b,
            stamp: (s[a as usize], s[b as usize]),
            target: p.into(),
        });
    };
    let mut heap = BinaryHeap::new();
    for (a, b) in e.edges() {
        push(&mut heap, &e, &quadrics, &stamps, a, b);
    }
    let mut removed = 0;
    while removed < remove {
        let Some(c) = heap.pop() else { break };
        let (a, b) = (c.a, c.b);
        if !e.vertex_alive[a as usize]
            || !e.vertex_alive[b as usize]
            || (stamps[a as usize], stamps[b as usize]) != c.stamp
        {
            continue;
        }
        let p = Vec3::from(c.target);
        if !e.can_collapse(a, b, &p) {
            continue;
        }
        e.collapse(a, b, p);
        quadrics[b as usize] = quadrics[b as usize] + quadrics[a as usize];
        stamps[b as usize] += 1;
        removed += 1;
        for n in e.neighbors(b) {
            push(&mut heap, &e, &quadrics, &stamps, n.min(b), n.max(b));
        }
    }
    let mut out = e.into_mesh();
    if mesh.normals.is_some() {
        out.compute_vertex_normals();
    }
    Ok(out)
}
