use nalgebra::{Rotation3, SMatrix, SVector, SymmetricEigen};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SimilarityTransform;
use crate::field::{Bbox, ScalarField};
use crate::mesh::TriangleMesh;
use crate::surface::marching_cubes;
use crate::{Error, Mat3, Result, Vec3};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignConfig {
    /// Log-spaced coarse scales over `scale_range`.
    pub scale_steps: usize,
    pub scale_range: [f64; 2],
    pub angle_step_deg: f64,
    /// Coarse translations per axis over `[-translation_range, translation_range]`.
    pub translation_steps: usize,
    pub translation_range: f64,
    /// Vertices scored during the search.
    pub subsample: usize,
    /// Vertices used to screen the coarse grid before rescoring.
    pub screen_points: usize,
    /// Coarse cells rescored on the full subsample.
    pub rescore: usize,
    /// Coarse cells refined by the fine stage.
    pub top_k: usize,
    pub fine_iterations: usize,
    /// Scales the fine stage may reach; shrinking a mesh onto one surface
    /// point would otherwise drive the residual to zero.
    pub scale_limits: [f64; 2],
    /// Also refine from moment-matched starts against a reference extraction.
    pub moment_starts: bool,
    /// Domain used for the reference extraction.
    pub bbox: Bbox,
    /// Score of a point where the field cannot be evaluated.
    pub out_of_domain_penalty: f64,
    /// Largest acceptable final mean `|G|`.
    pub max_residual: f64,
    pub seed: u64,
}

impl Default for AlignConfig {
    fn default() -> Self {
        Self {
            scale_steps: 5,
            scale_range: [0.8, 1.25],
            angle_step_deg: 15.0,
            translation_steps: 5,
            translation_range: 0.1,
            subsample: 2000,
            screen_points: 128,
            rescore: 64,
            top_k: 5,
            fine_iterations: 100,
            scale_limits: [0.7, 1.45],
            moment_starts: true,
            bbox: Bbox::standard(),
            out_of_domain_penalty: 1.0,
            max_residual: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    /// Maps the suspect mesh onto the watermarked surface.
    pub transform: SimilarityTransform,
    /// Mean `|G|` over all aligned vertices.
    pub residual: f64,
    pub mesh: TriangleMesh,
}

#[derive(Debug, Clone, Copy)]
struct Pose {
    scale: f64,
    rotation: Rotation3<f64>,
    translation: Vec3,
}

impl Pose {
    fn apply(&self, v: &Vec3) -> Vec3 {
        self.rotation * v * self.scale + self.translation
    }
}

fn coarse_rotations(step_deg: f64) -> Vec<Rotation3<f64>> {
    let mut out = vec![Rotation3::identity()];
    let steps = (180.0 / step_deg).round() as usize;
    for dz in -1i32..=1 {
        for dy in -1i32..=1 {
            for dx in -1i32..=1 {
                if dx == 0 && dy == 0 && dz == 0 {
                    continue;
                }
                let axis = Vec3::new(dx as f64, dy as f64, dz as f64).normalize();
                for k in 1..=steps {
                    out.push(Rotation3::new(axis * (k as f64 * step_deg).to_radians()));
                }
            }
        }
    }
    out
}

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect()
}

fn point_score<F: ScalarField + ?Sized>(field: &F, p: &Vec3, penalty: f64) -> f64 {
    match field.eval(p) {
        Ok(v) if v.is_finite() => v.abs().min(penalty),
        _ => penalty,
    }
}

/// Mean `|G|`, abandoned once it provably exceeds `bound`.
fn bounded_score<F: ScalarField + ?Sized>(field: &F, pose: &Pose, pts: &[Vec3], penalty: f64, bound: f64) -> Option<f64> {
    let n = pts.len() as f64;
    let limit = bound * n;
    let mut sum = 0.0;
    for v in pts {
        sum += point_score(field, &pose.apply(v), penalty);
        if sum > limit {
            return None;
        }
    }
    Some(sum / n)
}

fn mean_score<F: ScalarField + ?Sized>(field: &F, pose: &Pose, pts: &[Vec3], penalty: f64) -> f64 {
    let sum: f64 = pts.par_iter().map(|v| point_score(field, &pose.apply(v), penalty)).sum();
    sum / pts.len().max(1) as f64
}

/// Area-weighted centroid and covariance of a mesh surface.
fn surface_moments(mesh: &TriangleMesh) -> Option<(Vec3, Mat3)> {
    let mut area = 0.0;
    let mut c = Vec3::zeros();
    let mut m2 = Mat3::zeros();
    for f in 0..mesh.faces.len() {
        let [a, b, d] = mesh.triangle(f);
        let w = 0.5 * (b - a).cross(&(d - a)).norm();
        let g = (a + b + d) / 3.0;
        area += w;
        c += g * w;
        // second moment of a triangle about the origin
        let s = a * a.transpose() + b * b.transpose() + d * d.transpose() + (a + b + d) * (a + b + d).transpose();
        m2 += s * (w / 12.0);
    }
    if !(area > 0.0) {
        return None;
    }
    c /= area;
    Some((c, m2 / area - c * c.transpose()))
}

/// Eigenvectors as columns, sorted by decreasing eigenvalue, right-handed.
fn principal_frame(cov: &Mat3) -> Mat3 {
    let eig = SymmetricEigen::new(*cov);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut m = Mat3::from_columns(&[
        eig.eigenvectors.column(order[0]).into_owned(),
        eig.eigenvectors.column(order[1]).into_owned(),
        eig.eigenvectors.column(order[2]).into_owned(),
    ]);
    if m.determinant() < 0.0 {
        let c = -m.column(2);
        m.set_column(2, &c);
    }
    m
}

/// Poses matching the mesh's centroid, spread and principal axes to a
/// reference extraction of the field, one per axis-sign choice.
fn moment_starts<F: ScalarField + ?Sized>(mesh: &TriangleMesh, field: &F, bbox: &Bbox) -> Vec<Pose> {
    let Ok(reference) = marching_cubes(field, 48, bbox) else {
        return Vec::new();
    };
    let (Some((cm, covm)), Some((cr, covr))) = (surface_moments(mesh), surface_moments(&reference)) else {
        return Vec::new();
    };
    if !(covm.trace() > 0.0) {
        return Vec::new();
    }
    let scale = (covr.trace() / covm.trace()).sqrt();
    let (fm, fr) = (principal_frame(&covm), principal_frame(&covr));
    let mut out = Vec::new();
    for signs in [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]] {
        let r = fr * Mat3::from_diagonal(&Vec3::from(signs)) * fm.transpose();
        let rotation = Rotation3::from_matrix(&r);
        out.push(Pose {
            scale,
            rotation,
            translation: cr - rotation * cm * scale,
        });
    }
    out
}

/// Levenberg–Marquardt on `Σ G(a·R·v + t)²` over `(log a, rotation vector, t)`.
fn refine<F: ScalarField + ?Sized>(field: &F, start: Pose, pts: &[Vec3], cfg: &AlignConfig) -> Pose {
    let penalty = cfg.out_of_domain_penalty;
    let cost = |pose: &Pose| -> f64 {
        pts.iter()
            .map(|v| {
                let r = point_score(field, &pose.apply(v), penalty);
                r * r
            })
            .sum()
    };
    let mut pose = start;
    let mut current = cost(&pose);
    let mut lambda = 1e-3;
    for _ in 0..cfg.fine_iterations {
        let mut jtj = SMatrix::<f64, 7, 7>::zeros();
        let mut jtr = SVector::<f64, 7>::zeros();
        for v in pts {
            let w = pose.rotation * v * pose.scale;
            let Ok((g_val, g)) = field.eval_with_gradient(&(w + pose.translation)) else {
                continue;
            };
            let row = SVector::<f64, 7>::from_column_slice(&[
                g.dot(&w),
                w.cross(&g).x,
                w.cross(&g).y,
                w.cross(&g).z,
                g.x,
                g.y,
                g.z,
            ]);
            jtj += row * row.transpose();
            jtr += row * g_val;
        }
        let mut improved = false;
        while lambda < 1e10 {
            let mut a = jtj;
            for k in 0..7 {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12);
            }
            let Some(step) = a.lu().solve(&(-jtr)) else {
                lambda *= 4.0;
                continue;
            };
            let cand = Pose {
                scale: pose.scale * step[0].exp(),
                rotation: Rotation3::new(Vec3::new(step[1], step[2], step[3])) * pose.rotation,
                translation: pose.translation + Vec3::new(step[4], step[5], step[6]),
            };
            let c = if (cfg.scale_limits[0]..=cfg.scale_limits[1]).contains(&cand.scale) {
                cost(&cand)
            } else {
                f64::INFINITY
            };
            if c < current {
                let gain = current - c;
                pose = cand;
                current = c;
                lambda = (lambda / 3.0).max(1e-12);
                improved = gain > 1e-14 * current.max(1e-300) && step.norm() > 1e-12;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    pose
}

/// Finds the similarity transform that best places `mesh` on the zero set of `field`.
///
/// A coarse grid over scale, rotation and translation is screened on a few
/// vertices with early termination, the best cells are rescored on the full
/// subsample, and the top `K` (plus moment-matched starts) are refined by
/// Levenberg–Marquardt. The returned residual uses all vertices.
pub fn align<F: ScalarField + ?Sized>(mesh: &TriangleMesh, field: &F, cfg: &AlignConfig) -> Result<Alignment> {
    if mesh.vertices.is_empty() {
        return Err(Error::InvalidMesh("mesh has no vertices".into()));
    }
    if cfg.top_k == 0 || cfg.subsample == 0 || cfg.screen_points == 0 {
        return Err(Error::InvalidArgument("alignment sizes must be positive".into()));
    }
    let penalty = cfg.out_of_domain_penalty;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n = mesh.vertices.len();
    let take = cfg.subsample.min(n);
    let pts: Vec<Vec3> = sample(&mut rng, n, take).iter().map(|i| mesh.vertices[i]).collect();
    let screen = &pts[..cfg.screen_points.min(take)];

    let rotations = coarse_rotations(cfg.angle_step_deg);
    let [s_lo, s_hi] = cfg.scale_range;
    let scales: Vec<f64> = linspace(s_lo.ln(), s_hi.ln(), cfg.scale_steps).into_iter().map(f64::exp).collect();
    let shifts = linspace(-cfg.translation_range, cfg.translation_range, cfg.translation_steps);
    let per_rotation = scales.len() * shifts.len().pow(3);
    let total = rotations.len() * per_rotation;
    let pose_of = |idx: usize| {
        let (r, rest) = (idx / per_rotation, idx % per_rotation);
        let (s, t) = (rest / shifts.len().pow(3), rest % shifts.len().pow(3));
        let m = shifts.len();
        Pose {
            scale: scales[s],
            rotation: rotations[r],
            translation: Vec3::new(shifts[t % m], shifts[t / m % m], shifts[t / (m * m)]),
        }
    };

    let keep = cfg.rescore.max(cfg.top_k);
    let mut best: Vec<(f64, usize)> = Vec::new();
    const CHUNK: usize = 4096;
    for lo in (0..total).step_by(CHUNK) {
        let bound = if best.len() >= keep { best[keep - 1].0 } else { f64::INFINITY };
        let scored: Vec<(f64, usize)> = (lo..(lo + CHUNK).min(total))
            .into_par_iter()
            .filter_map(|idx| bounded_score(field, &pose_of(idx), screen, penalty, bound).map(|s| (s, idx)))
            .collect();
        best.extend(scored);
        best.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        best.truncate(keep);
    }
    let mut rescored: Vec<(f64, usize)> = best
        .iter()
        .map(|&(_, idx)| (mean_score(field, &pose_of(idx), &pts, penalty), idx))
        .collect();
    rescored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    log::debug!(
        "coarse alignment: {total} cells, best subsample score {:.5}",
        rescored.first().map_or(f64::NAN, |b| b.0)
    );

    let mut starts: Vec<Pose> = rescored.iter().take(cfg.top_k).map(|&(_, idx)| pose_of(idx)).collect();
    if cfg.moment_starts {
        starts.extend(moment_starts(mesh, field, &cfg.bbox));
    }
    let refined: Vec<Pose> = starts.iter().map(|&s| refine(field, s, &pts, cfg)).collect();
    let mut winner: Option<(f64, Pose)> = None;
    for pose in refined {
        let score = mean_score(field, &pose, &mesh.vertices, penalty);
        if winner.is_none_or(|(w, _)| score < w) {
            winner = Some((score, pose));
        }
    }
    let (residual, pose) = winner.expect("at least one start");
    if !(residual <= cfg.max_residual) {
        return Err(Error::AlignmentFailed {
            residual,
            limit: cfg.max_residual,
        });
    }
    let transform = SimilarityTransform::from_rotation(pose.scale, &pose.rotation, pose.translation)?;
    Ok(Alignment {
        transform,
        residual,
        mesh: transform.apply_mesh(mesh),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Primitive;

    #[test]
    fn coarse_grid_shape() {
        assert_eq!(coarse_rotations(15.0).len(), 1 + 26 * 12);
        let s: Vec<f64> = linspace(0.8f64.ln(), 1.25f64.ln(), 5).into_iter().map(f64::exp).collect();
        assert!((s[2] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_identity() {
        let f = Primitive::preset("blob").unwrap();
        let mesh = marching_cubes(&f, 64, &Bbox::standard()).unwrap();
        let a = align(&mesh, &f, &AlignConfig::default()).unwrap();
        let t = a.transform;
        assert!((t.scale - 1.0).abs() <= 1e-3);
        assert!(t.rotation_distance(&SimilarityTransform::identity()).to_degrees() <= 0.5);
        assert!(t.t().norm() <= 1e-3);
    }

    #[test]
    fn recovers_a_similarity() {
        let f = Primitive::preset("blob").unwrap();
        let mesh = marching_cubes(&f, 64, &Bbox::standard()).unwrap();
        let attack = SimilarityTransform::new(1.15, 2.3, &Vec3::new(0.3, -0.5, 0.8), Vec3::new(0.05, -0.07, 0.02)).unwrap();
        let moved = attack.apply_mesh(&mesh);
        let a = align(&moved, &f, &AlignConfig::default()).unwrap();
        let back = a.transform.compose(&attack);
        assert!((back.scale - 1.0).abs() < 1e-2);
        assert!(back.rotation_distance(&SimilarityTransform::identity()).to_degrees() < 2.0);
        assert!(a.residual < 2e-3);
    }

    #[test]
    fn unrelated_shape_fails() {
        let sphere = Primitive::preset("sphere").unwrap();
        let torus = marching_cubes(&Primitive::preset("torus").unwrap(), 48, &Bbox::standard()).unwrap();
        assert!(matches!(
            align(&torus, &sphere, &AlignConfig::default()),
            Err(Error::AlignmentFailed { .. })
        ));
    }
}
