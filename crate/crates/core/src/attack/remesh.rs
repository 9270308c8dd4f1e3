//! Incremental isotropic remeshing with projection onto the input surface.

use super::editor::MeshEditor;
use crate::metrics::SurfaceIndex;
use crate::mesh::TriangleMesh;
use crate::{Error, Result, Vec3};

fn target_valence(e: &MeshEditor, v: u32) -> i64 {
    if e.is_boundary_vertex(v) {
        4
    } else {
        6
    }
}

fn split_long(e: &mut MeshEditor, high: f64) {
    for (a, b) in e.edges() {
        let (pa, pb) = (e.pos[a as usize], e.pos[b as usize]);
        if (pa - pb).norm() > high && e.edge_faces(a, b).len() == 2 {
            e.split(a, b, (pa + pb) * 0.5);
        }
    }
}

fn collapse_short(e: &mut MeshEditor, low: f64, high: f64) {
    for (a, b) in e.edges() {
        if !e.vertex_alive[a as usize] || !e.vertex_alive[b as usize] || e.edge_faces(a, b).len() != 2 {
            continue;
        }
        let (pa, pb) = (e.pos[a as usize], e.pos[b as usize]);
        if (pa - pb).norm() >= low {
            continue;
        }
        let mid = (pa + pb) * 0.5;
        let too_long = e
            .neighbors(a)
            .into_iter()
            .chain(e.neighbors(b))
            .any(|n| n != a && n != b && (e.pos[n as usize] - mid).norm() > high);
        if !too_long && e.can_collapse(a, b, &mid) {
            e.collapse(a, b, mid);
        }
    }
}

fn flip_to_valence(e: &mut MeshEditor) {
    for (a, b) in e.edges() {
        let Some((c, d, fc, fd)) = e.opposite(a, b) else {
            continue;
        };
        let dev = |v: u32, delta: i64| (e.valence(v) as i64 + delta - target_valence(e, v)).abs();
        let before = dev(a, 0) + dev(b, 0) + dev(c, 0) + dev(d, 0);
        let after = dev(a, -1) + dev(b, -1) + dev(c, 1) + dev(d, 1);
        if after >= before {
            continue;
        }
        let n_old = e.face_normal(e.faces[fc as usize]) + e.face_normal(e.faces[fd as usize]);
        let (n1, n2) = (e.face_normal([a, d, c]), e.face_normal([d, b, c]));
        if n1.dot(&n_old) <= 0.0 || n2.dot(&n_old) <= 0.0 || n1.dot(&n2) <= 0.0 {
            continue;
        }
        e.flip(a, b);
    }
}

fn vertex_normal(e: &MeshEditor, v: u32) -> Vec3 {
    let n: Vec3 = e.vfaces[v as usize].iter().map(|&f| e.face_normal(e.faces[f as usize])).sum();
    let l = n.norm();
    if l > 0.0 {
        n / l
    } else {
        Vec3::zeros()
    }
}

fn relax_and_project(e: &mut MeshEditor, reference: &SurfaceIndex) {
    let n = e.pos.len();
    let mut next = e.pos.clone();
    for v in 0..n as u32 {
        if !e.vertex_alive[v as usize] || e.vfaces[v as usize].is_empty() || e.is_boundary_vertex(v) {
            continue;
        }
        let ring = e.neighbors(v);
        let q = ring.iter().map(|&u| e.pos[u as usize]).sum::<Vec3>() / ring.len() as f64;
        let p = e.pos[v as usize];
        let nrm = vertex_normal(e, v);
        let moved = q + nrm * nrm.dot(&(p - q));
        next[v as usize] = reference.closest_point(&moved).point;
    }
    e.pos = next;
}

/// Split edges above `4/3·L`, collapse below `4/5·L`, flip toward valence 6,
/// relax tangentially and project onto the input mesh, `iterations` times.
pub fn remesh(mesh: &TriangleMesh, target: f64, iterations: usize) -> Result<TriangleMesh> {
    if !(target > 0.0 && target.is_finite()) {
        return Err(Error::InvalidArgument(format!("target edge length {target} must be positive")));
    }
    let mut e = MeshEditor::new(mesh)?;
    e.require_manifold()?;
    if iterations == 0 {
        return Ok(mesh.clone());
    }
    let reference = SurfaceIndex::new(mesh)?;
    let (low, high) = (0.8 * target, 4.0 / 3.0 * target);
    for _ in 0..iterations {
        split_long(&mut e, high);
        collapse_short(&mut e, low, high);
        flip_to_valence(&mut e);
        relax_and_project(&mut e, &reference);
    }
    let mut out = e.into_mesh();
    if mesh.normals.is_some() {
        out.compute_vertex_normals();
    }
    Ok(out)
}
