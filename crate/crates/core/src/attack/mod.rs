//! Mesh distortions used to probe watermark robustness.
//!
//! Spec grammar, `name:arg1[:arg2]`:
//!
//! | spec | effect |
//! |---|---|
//! | `gaussian:σ` | i.i.d. normal noise per coordinate |
//! | `rotate:deg[:x,y,z]` | rotation about an axis through the origin (default z) |
//! | `scale:factor` | uniform scaling about the origin |
//! | `translate:x,y,z` | translation |
//! | `combined:spec;spec;…` | attacks applied in order |
//! | `quantize:bits` | coordinates snapped to `2^bits` levels over the bbox |
//! | `simplify:fraction` | quadric edge collapse removing a fraction of vertices |
//! | `smooth:iterations[:λ]` | uniform Laplacian smoothing, λ = 0.5 by default |
//! | `remesh[:L[:iterations]]` | isotropic remeshing, `L` defaults to the mean edge length |

mod editor;
mod remesh;
mod simplify;

pub use remesh::remesh;
pub use simplify::simplify;

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::mesh::TriangleMesh;
use crate::verify::SimilarityTransform;
use crate::{Error, Result, Vec3};

pub const DEFAULT_SMOOTH_LAMBDA: f64 = 0.5;
pub const DEFAULT_REMESH_ITERATIONS: usize = 5;

#[derive(Debug, Clone, PartialEq)]
pub enum AttackSpec {
    Gaussian { sigma: f64 },
    Rotate { degrees: f64, axis: Vec3 },
    Scale { factor: f64 },
    Translate { offset: Vec3 },
    Combined(Vec<AttackSpec>),
    Quantize { bits: u32 },
    Simplify { fraction: f64 },
    Smooth { iterations: usize, lambda: f64 },
    /// `target = None` uses the mean input edge length.
    Remesh { target: Option<f64>, iterations: usize },
}

fn num<T: FromStr>(s: &str, what: &str) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("invalid {what} `{s}`")))
}

fn vec3(s: &str) -> Result<Vec3> {
    let parts: Vec<f64> = s.split(',').map(|c| num(c, "vector component")).collect::<Result<_>>()?;
    match parts[..] {
        [x, y, z] => Ok(Vec3::new(x, y, z)),
        _ => Err(Error::InvalidArgument(format!("expected x,y,z, got `{s}`"))),
    }
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match self {
            Self::Gaussian { sigma } if !(*sigma >= 0.0 && sigma.is_finite()) => bad(format!("σ = {sigma}")),
            Self::Rotate { axis, .. } if !(axis.norm() > 0.0) => bad("zero rotation axis".into()),
            Self::Scale { factor } if !(*factor > 0.0 && factor.is_finite()) => bad(format!("scale {factor}")),
            Self::Quantize { bits } if !(1..=32).contains(bits) => bad(format!("bits {bits} outside [1, 32]")),
            Self::Simplify { fraction } if !(0.0..1.0).contains(fraction) => bad(format!("fraction {fraction}")),
            Self::Smooth { lambda, .. } if !(*lambda > 0.0 && *lambda <= 1.0) => bad(format!("λ = {lambda}")),
            Self::Remesh { target: Some(t), .. } if !(*t > 0.0) => bad(format!("target length {t}")),
            Self::Combined(list) => list.iter().try_for_each(Self::validate),
            _ => Ok(()),
        }
    }

    /// Applies the attack; `seed` drives the stochastic variants.
    pub fn apply(&self, mesh: &TriangleMesh, seed: u64) -> Result<TriangleMesh> {
        self.validate()?;
        match self {
            Self::Gaussian { sigma } => Ok(gaussian_noise(mesh, *sigma, seed)),
            Self::Rotate { degrees, axis } => {
                Ok(SimilarityTransform::new(1.0, degrees.to_radians(), axis, Vec3::zeros())?.apply_mesh(mesh))
            }
            Self::Scale { factor } => Ok(SimilarityTransform::new(*factor, 0.0, &Vec3::z(), Vec3::zeros())?.apply_mesh(mesh)),
            Self::Translate { offset } => Ok(SimilarityTransform::new(1.0, 0.0, &Vec3::z(), *offset)?.apply_mesh(mesh)),
            Self::Combined(list) => list
                .iter()
                .enumerate()
                .try_fold(mesh.clone(), |m, (k, a)| a.apply(&m, seed.wrapping_add(k as u64))),
            Self::Quantize { bits } => Ok(quantize(mesh, *bits)),
            Self::Simplify { fraction } => simplify(mesh, *fraction),
            Self::Smooth { iterations, lambda } => Ok(smooth(mesh, *iterations, *lambda)),
            Self::Remesh { target, iterations } => {
                let l = target.unwrap_or_else(|| mesh.mean_edge_length());
                remesh(mesh, l, *iterations)
            }
        }
    }
}

impl FromStr for AttackSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let args: Vec<&str> = if rest.is_empty() { Vec::new() } else { rest.split(':').collect() };
        let need = |n: usize| -> Result<()> {
            if args.len() < n {
                Err(Error::InvalidArgument(format!("`{name}` needs {n} argument(s)")))
            } else {
                Ok(())
            }
        };
        let spec = match name {
            "gaussian" => {
                need(1)?;
                Self::Gaussian { sigma: num(args[0], "σ")? }
            }
            "rotate" => {
                need(1)?;
                Self::Rotate {
                    degrees: num(args[0], "angle")?,
                    axis: args.get(1).map_or(Ok(Vec3::z()), |a| vec3(a))?,
                }
            }
            "scale" => {
                need(1)?;
                Self::Scale { factor: num(args[0], "scale")? }
            }
            "translate" => {
                need(1)?;
                Self::Translate { offset: vec3(args[0])? }
            }
            "combined" => Self::Combined(rest.split(';').map(str::parse).collect::<Result<_>>()?),
            "quantize" => {
                need(1)?;
                Self::Quantize { bits: num(args[0], "bits")? }
            }
            "simplify" => {
                need(1)?;
                Self::Simplify { fraction: num(args[0], "fraction")? }
            }
            "smooth" => {
                need(1)?;
                Self::Smooth {
                    iterations: num(args[0], "iterations")?,
                    lambda: args.get(1).map_or(Ok(DEFAULT_SMOOTH_LAMBDA), |l| num(l, "λ"))?,
                }
            }
            "remesh" => Self::Remesh {
                target: args.first().map(|t| num(t, "target length")).transpose()?,
                iterations: args.get(1).map_or(Ok(DEFAULT_REMESH_ITERATIONS), |i| num(i, "iterations"))?,
            },
            _ => return Err(Error::InvalidArgument(format!("unknown attack `{name}`"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl fmt::Display for AttackSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = |p: &Vec3| format!("{},{},{}", p.x, p.y, p.z);
        match self {
            Self::Gaussian { sigma } => write!(f, "gaussian:{sigma}"),
            Self::Rotate { degrees, axis } => write!(f, "rotate:{degrees}:{}", v(axis)),
            Self::Scale { factor } => write!(f, "scale:{factor}"),
            Self::Translate { offset } => write!(f, "translate:{}", v(offset)),
            Self::Combined(list) => {
                let parts: Vec<String> = list.iter().map(ToString::to_string).collect();
                write!(f, "combined:{}", parts.join(";"))
            }
            Self::Quantize { bits } => write!(f, "quantize:{bits}"),
            Self::Simplify { fraction } => write!(f, "simplify:{fraction}"),
            Self::Smooth { iterations, lambda } => write!(f, "smooth:{iterations}:{lambda}"),
            Self::Remesh { target: Some(t), iterations } => write!(f, "remesh:{t}:{iterations}"),
            Self::Remesh { target: None, .. } => write!(f, "remesh"),
        }
    }
}

fn refresh_normals(mut out: TriangleMesh, had_normals: bool) -> TriangleMesh {
    if had_normals {
        out.compute_vertex_normals();
    } else {
        out.normals = None;
    }
    out
}

pub fn gaussian_noise(mesh: &TriangleMesh, sigma: f64, seed: u64) -> TriangleMesh {
    if sigma == 0.0 {
        return mesh.clone();
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("σ validated");
    let mut out = mesh.clone();
    for v in &mut out.vertices {
        for c in v.iter_mut() {
            *c += normal.sample(&mut rng);
        }
    }
    refresh_normals(out, mesh.normals.is_some())
}

/// Snaps each coordinate to `2^bits` uniform levels spanning the mesh bbox.
pub fn quantize(mesh: &TriangleMesh, bits: u32) -> TriangleMesh {
    let Some(bbox) = crate::field::Bbox::from_points(&mesh.vertices) else {
        return mesh.clone();
    };
    let levels = (2f64.powi(bits as i32) - 1.0).max(1.0);
    let step = bbox.extent() / levels;
    let mut out = mesh.clone();
    for v in &mut out.vertices {
        for a in 0..3 {
            if step[a] > 0.0 {
                v[a] = bbox.min[a] + ((v[a] - bbox.min[a]) / step[a]).round() * step[a];
            }
        }
    }
    refresh_normals(out, mesh.normals.is_some())
}

/// `v ← v + λ·(mean of neighbors − v)`, all vertices updated together.
pub fn smooth(mesh: &TriangleMesh, iterations: usize, lambda: f64) -> TriangleMesh {
    if iterations == 0 {
        return mesh.clone();
    }
    let mut neighbors: Vec<Vec<u32>> = vec![Vec::new(); mesh.vertices.len()];
    for f in &mesh.faces {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            neighbors[a as usize].push(b);
            neighbors[b as usize].push(a);
        }
    }
    for n in &mut neighbors {
        n.sort_unstable();
        n.dedup();
    }
    let mut pos = mesh.vertices.clone();
    for _ in 0..iterations {
        pos = pos
            .iter()
            .zip(&neighbors)
            .map(|(p, ring)| {
                if ring.is_empty() {
                    return *p;
                }
                let c = ring.iter().map(|&u| pos[u as usize]).sum::<Vec3>() / ring.len() as f64;
                p + (c - p) * lambda
            })
            .collect();
    }
    let mut out = mesh.clone();
    out.vertices = pos;
    refresh_normals(out, mesh.normals.is_some())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::icosphere;

    fn sphere() -> TriangleMesh {
        icosphere(Vec3::zeros(), 0.5, 4)
    }

    #[test]
    fn zero_parameters_are_identity() {
        let m = sphere();
        for spec in ["gaussian:0", "rotate:0", "scale:1", "translate:0,0,0", "simplify:0", "smooth:0", "remesh:0.05:0"] {
            let out = spec.parse::<AttackSpec>().unwrap().apply(&m, 3).unwrap();
            assert_eq!(out.faces, m.faces, "{spec}");
            for (a, b) in out.vertices.iter().zip(&m.vertices) {
                assert!((a - b).norm() < 1e-12, "{spec}");
            }
        }
        let q = quantize(&m, 32);
        let step = 1.0 / (2f64.powi(32) - 1.0);
        assert!(q.vertices.iter().zip(&m.vertices).all(|(a, b)| (a - b).norm() <= step));
    }

    #[test]
    fn parse_and_display() {
        for s in ["gaussian:0.005", "quantize:16", "smooth:3:0.5", "simplify:0.3", "combined:rotate:30:0,1,0;scale:1.1;translate:0.05,0,0"] {
            let a: AttackSpec = s.parse().unwrap();
            assert_eq!(a.to_string().parse::<AttackSpec>().unwrap(), a);
        }
        for bad in ["gaussian:-1", "quantize:0", "quantize:40", "simplify:1", "smooth:1:0", "explode:1", "gaussian"] {
            assert!(bad.parse::<AttackSpec>().is_err(), "{bad}");
        }
    }

    #[test]
    fn gaussian_is_seed_deterministic() {
        let m = sphere();
        let a = gaussian_noise(&m, 0.01, 5);
        assert_eq!(a, gaussian_noise(&m, 0.01, 5));
        assert_ne!(a, gaussian_noise(&m, 0.01, 6));
        let d: Vec<f64> = a.vertices.iter().zip(&m.vertices).flat_map(|(p, q)| (p - q).iter().copied().collect::<Vec<_>>()).collect();
        let var = d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64;
        assert!((var.sqrt() - 0.01).abs() < 1e-3);
    }

    #[test]
    fn quantize_snaps_to_levels() {
        let m = sphere();
        let q = quantize(&m, 4);
        let mut xs: Vec<f64> = q.vertices.iter().map(|v| v.x).collect();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        assert!(xs.len() <= 16);
    }

    #[test]
    fn smoothing_shrinks_sphere() {
        let m = sphere();
        let s = smooth(&m, 1, 0.5);
        let r: f64 = s.vertices.iter().map(|v| v.norm()).sum::<f64>() / s.vertices.len() as f64;
        assert!(r < 0.5 && r > 0.49);
        assert!(s.signed_volume() > 0.0);
    }

    #[test]
    fn simplify_keeps_closed_manifold() {
        let m = sphere();
        let s = simplify(&m, 0.3).unwrap();
        let removed = m.vertices.len() - s.vertices.len();
        assert_eq!(removed, (0.3 * m.vertices.len() as f64).round() as usize);
        assert!(s.is_watertight());
        assert_eq!(s.euler_characteristic(), 2);
        assert!(s.signed_volume() > 0.0);
        let s90 = simplify(&m, 0.9).unwrap();
        assert!(s90.is_watertight());
        assert_eq!(s90.euler_characteristic(), 2);
        assert!(s90.vertices.iter().all(|v| (v.norm() - 0.5).abs() < 0.03));
    }

    #[test]
    fn remesh_moves_vertices_and_stays_close() {
        let m = sphere();
        let l = m.mean_edge_length();
        let r = remesh(&m, l, 5).unwrap();
        assert!(r.is_watertight());
        assert_eq!(r.euler_characteristic(), 2);
        assert!(r.signed_volume() > 0.0);
        let coincident = r
            .vertices
            .iter()
            .filter(|v| m.vertices.iter().any(|u| (*v - u).norm() < 1e-9))
            .count();
        assert!((coincident as f64) < 0.01 * r.vertices.len() as f64);
        assert!(r.vertices.iter().all(|v| (v.norm() - 0.5).abs() < 5e-3));
        let ratio = r.mean_edge_length() / l;
        assert!((0.7..1.3).contains(&ratio), "{ratio}");
    }

    #[test]
    fn affine_preserves_orientation() {
        let m = sphere().with_vertex_normals();
        let out = "combined:rotate:120:1,1,0;scale:1.2;translate:0.1,0,0".parse::<AttackSpec>().unwrap().apply(&m, 0).unwrap();
        assert!(out.signed_volume() > 0.0);
        let t = SimilarityTransform::new(1.2, 120f64.to_radians(), &Vec3::new(1.0, 1.0, 0.0), Vec3::zeros()).unwrap();
        assert!((out.vertices[7] - (t.apply(&m.vertices[7]) + Vec3::new(0.1, 0.0, 0.0))).norm() < 1e-12);
    }

    #[test]
    fn non_manifold_rejected_by_remesh() {
        let v = vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z(), -Vec3::z()];
        let m = TriangleMesh::new(v, vec![[0, 1, 2], [0, 1, 3], [0, 1, 4]]);
        assert!(matches!(remesh(&m, 0.1, 1), Err(Error::InvalidMesh(_))));
    }
}
