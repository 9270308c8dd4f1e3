//! Message-guided deformation and the watermarked field.
//!
//! Inside partition `(i, j)` carrying bit `b`, a point moves along the field
//! gradient by the window value: `D(y) = y ± C(y)·∇F(y)` (`+` for `b = 1`).
//! The watermarked field is `G(x) = F(D⁻¹(x))`; `D⁻¹` has no closed form and
//! is computed by Newton's method on `D(y) - x = 0`.
//!
//! Jacobians here use the usual row-per-output layout,
//! `J_D = I ± (C·H_F + ∇F ∇Cᵀ)`, so `∇G(x) = J_D(y)⁻ᵀ ∇F(y)`.

use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::field::{fill_grid_checked, Bbox, GridField, ScalarField};
use crate::partition::PartitionLayout;
use crate::{Error, Mat3, Result, Vec3};

/// Determinant magnitude below which a Jacobian counts as singular.
pub const SINGULAR_DET: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NewtonConfig {
    /// τ; a start converges once `|D(y) - x| <= 10τ`.
    pub tolerance: f64,
    pub max_iterations: usize,
    /// Number of starts: the query point plus `batch_size - 1` seeded samples.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-8,
            max_iterations: 100,
            batch_size: 100,
            seed: 0,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance > 0.0) || self.max_iterations == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(format!("invalid Newton config {self:?}")));
        }
        Ok(())
    }

    /// The seeded fallback starts in `[-1, 1]³`.
    pub fn fallback_starts(&self) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        (1..self.batch_size)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                )
            })
            .collect()
    }
}

/// Result of inverting the deformation at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Inversion {
    pub point: Vec3,
    /// `|D(y) - x|`.
    pub residual: f64,
    /// `|F(y)|`, the surface-proximity quantity of the batched scheme.
    pub field_value: f64,
    pub iterations: usize,
    /// 0 for the query point itself, `k` for the k-th seeded start.
    pub start: usize,
}

fn sign(bit: bool) -> f64 {
    if bit {
        1.0
    } else {
        -1.0
    }
}

/// `D(y)`.
pub fn deform<F: ScalarField + ?Sized>(y: &Vec3, base: &F, layout: &PartitionLayout) -> Result<Vec3> {
    let idx = layout.partition_of(y)?;
    let c = layout.window(y)?;
    if c == 0.0 {
        return Ok(*y);
    }
    let g = base.gradient(y)?;
    Ok(y + g * (sign(layout.bit_of_partition(idx)) * c))
}

/// `J_D(y)`, rows indexed by output component.
pub fn deform_jacobian<F: ScalarField + ?Sized>(
    y: &Vec3,
    base: &F,
    layout: &PartitionLayout,
) -> Result<Mat3> {
    Ok(deform_with_jacobian(y, base, layout)?.1)
}

/// `(D(y), J_D(y))` from a single field evaluation.
pub fn deform_with_jacobian<F: ScalarField + ?Sized>(
    y: &Vec3,
    base: &F,
    layout: &PartitionLayout,
) -> Result<(Vec3, Mat3)> {
    let (c, grad_c, idx) = layout.window_and_gradient_or_pole(y)?;
    if c == 0.0 && grad_c == Vec3::zeros() {
        return Ok((*y, Mat3::identity()));
    }
    let d = base.derivatives(y)?;
    let s = sign(layout.bit_of_partition(idx));
    let x = y + d.gradient * (s * c);
    let j = Mat3::identity() + (d.hessian * c + d.gradient * grad_c.transpose()) * s;
    Ok((x, j))
}

/// Closed-form 3×3 inverse with the determinant guard.
pub fn invert3(m: &Mat3) -> Result<Mat3> {
    let det = m.determinant();
    if !(det.abs() >= SINGULAR_DET) {
        return Err(Error::SingularJacobian { det });
    }
    let adj = Mat3::new(
        m[(1, 1)] * m[(2, 2)] - m[(1, 2)] * m[(2, 1)],
        m[(0, 2)] * m[(2, 1)] - m[(0, 1)] * m[(2, 2)],
        m[(0, 1)] * m[(1, 2)] - m[(0, 2)] * m[(1, 1)],
        m[(1, 2)] * m[(2, 0)] - m[(1, 0)] * m[(2, 2)],
        m[(0, 0)] * m[(2, 2)] - m[(0, 2)] * m[(2, 0)],
        m[(0, 2)] * m[(1, 0)] - m[(0, 0)] * m[(1, 2)],
        m[(1, 0)] * m[(2, 1)] - m[(1, 1)] * m[(2, 0)],
        m[(0, 1)] * m[(2, 0)] - m[(0, 0)] * m[(2, 1)],
        m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)],
    );
    Ok(adj / det)
}

/// Newton iterations `y ← y - J_D(y)⁻¹ (D(y) - x)` from one start.
///
/// Returns `Err(best_residual)` when the start fails.
fn newton_from<F: ScalarField + ?Sized>(
    x: &Vec3,
    start: Vec3,
    base: &F,
    layout: &PartitionLayout,
    cfg: &NewtonConfig,
) -> std::result::Result<(Vec3, f64, usize), f64> {
    let target = 10.0 * cfg.tolerance;
    let mut y = start;
    let mut best = f64::INFINITY;
    for it in 0..=cfg.max_iterations {
        let Ok((d, j)) = deform_with_jacobian(&y, base, layout) else {
            return Err(best);
        };
        let r = d - x;
        let res = r.norm();
        if !res.is_finite() {
            return Err(best);
        }
        best = best.min(res);
        if res <= target {
            return Ok(polish(x, y, res, base, layout, it));
        }
        if it == cfg.max_iterations {
            break;
        }
        let Ok(inv) = invert3(&j) else {
            return Err(best);
        };
        y -= inv * r;
    }
    Err(best)
}

/// Up to two extra Newton steps, each kept only if it lowers the residual.
fn polish<F: ScalarField + ?Sized>(
    x: &Vec3,
    mut y: Vec3,
    mut res: f64,
    base: &F,
    layout: &PartitionLayout,
    iterations: usize,
) -> (Vec3, f64, usize) {
    let mut its = iterations;
    for _ in 0..2 {
        if res == 0.0 {
            break;
        }
        let Ok((d, j)) = deform_with_jacobian(&y, base, layout) else {
            break;
        };
        let Ok(inv) = invert3(&j) else {
            break;
        };
        let cand = y - inv * (d - x);
        match deform(&cand, base, layout) {
            Ok(dc) if (dc - x).norm() < res => {
                res = (dc - x).norm();
                y = cand;
                its += 1;
            }
            _ => break,
        }
    }
    (y, res, its)
}

fn invert_with_starts<F: ScalarField + ?Sized>(
    x: &Vec3,
    base: &F,
    layout: &PartitionLayout,
    cfg: &NewtonConfig,
    fallback: &[Vec3],
) -> Result<Inversion> {
    let finish = |y: Vec3, res: f64, its: usize, start: usize| -> Result<Inversion> {
        Ok(Inversion {
            point: y,
            residual: res,
            field_value: base.eval(&y)?.abs(),
            iterations: its,
            start,
        })
    };
    let mut best_failed = match newton_from(x, *x, base, layout, cfg) {
        Ok((y, res, its)) => return finish(y, res, its, 0),
        Err(b) => b,
    };
    let mut best: Option<(Vec3, f64, usize, usize)> = None;
    for (k, s) in fallback.iter().enumerate() {
        match newton_from(x, *s, base, layout, cfg) {
            Ok((y, res, its)) => {
                if best.is_none_or(|b| res < b.1) {
                    best = Some((y, res, its, k + 1));
                }
            }
            Err(b) => best_failed = best_failed.min(b),
        }
    }
    match best {
        Some((y, res, its, k)) => finish(y, res, its, k),
        None => Err(Error::NonConvergence {
            best_residual: best_failed,
        }),
    }
}

/// `D⁻¹(x)`, starting from `x` and falling back to the seeded batch.
pub fn invert_deform<F: ScalarField + ?Sized>(
    x: &Vec3,
    base: &F,
    layout: &PartitionLayout,
    cfg: &NewtonConfig,
) -> Result<Vec3> {
    cfg.validate()?;
    Ok(invert_with_starts(x, base, layout, cfg, &cfg.fallback_starts())?.point)
}

/// `G = F ∘ D⁻¹`.
///
/// Value and gradient are analytic given the Newton preimage; the Hessian is a
/// central difference of the gradient.
#[derive(Debug, Clone)]
pub struct WatermarkedField<F> {
    base: F,
    layout: PartitionLayout,
    newton: NewtonConfig,
    fallback: Vec<Vec3>,
}

impl<F: ScalarField> WatermarkedField<F> {
    pub fn new(base: F, layout: PartitionLayout, newton: NewtonConfig) -> Result<Self> {
        newton.validate()?;
        let fallback = newton.fallback_starts();
        Ok(Self {
            base,
            layout,
            newton,
            fallback,
        })
    }

    pub fn base(&self) -> &F {
        &self.base
    }

    pub fn layout(&self) -> &PartitionLayout {
        &self.layout
    }

    pub fn newton(&self) -> &NewtonConfig {
        &self.newton
    }

    pub fn deform(&self, y: &Vec3) -> Result<Vec3> {
        deform(y, &self.base, &self.layout)
    }

    pub fn jacobian(&self, y: &Vec3) -> Result<Mat3> {
        deform_jacobian(y, &self.base, &self.layout)
    }

    pub fn invert(&self, x: &Vec3) -> Result<Inversion> {
        invert_with_starts(x, &self.base, &self.layout, &self.newton, &self.fallback)
    }
}

impl<F: ScalarField> ScalarField for WatermarkedField<F> {
    fn eval(&self, x: &Vec3) -> Result<f64> {
        let inv = self.invert(x)?;
        self.base.eval(&inv.point)
    }

    fn eval_with_gradient(&self, x: &Vec3) -> Result<(f64, Vec3)> {
        let y = self.invert(x)?.point;
        let (value, g) = self.base.eval_with_gradient(&y)?;
        let j = self.jacobian(&y)?;
        let inv = invert3(&j)?;
        Ok((value, inv.transpose() * g))
    }

    fn hessian(&self, x: &Vec3) -> Result<Mat3> {
        crate::field::finite_difference_hessian(self, x, 1e-5)
    }
}

/// Outcome of baking a watermarked field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BakeReport {
    pub nodes: usize,
    /// Nodes where Newton failed and `F(x)` was stored instead.
    pub failures: usize,
    pub failure_fraction: f64,
    pub mean_iterations: f64,
    /// Nodes solved only by a seeded fallback start.
    pub fallback_starts_used: usize,
}

/// Bakes `G` to a standalone grid with no reference to the deformation.
///
/// Nodes whose inversion fails store `F(x)` and are counted in the report.
pub fn bake_watermarked<F: ScalarField>(
    wf: &WatermarkedField<F>,
    dims: [usize; 3],
    bbox: Bbox,
) -> Result<(GridField, BakeReport)> {
    let failures = AtomicUsize::new(0);
    let fallbacks = AtomicUsize::new(0);
    let iterations = AtomicU64::new(0);
    let values = fill_grid_checked(dims, &bbox, |x| match wf.invert(x) {
        Ok(inv) => {
            iterations.fetch_add(inv.iterations as u64, Ordering::Relaxed);
            if inv.start > 0 {
                fallbacks.fetch_add(1, Ordering::Relaxed);
            }
            wf.base.eval(&inv.point)
        }
        Err(_) => {
            failures.fetch_add(1, Ordering::Relaxed);
            wf.base.eval(x)
        }
    })?;
    let nodes = dims[0] * dims[1] * dims[2];
    let failures = failures.into_inner();
    if failures > 0 {
        log::warn!("bake: Newton failed at {failures} of {nodes} nodes, stored F(x) there");
    }
    let report = BakeReport {
        nodes,
        failures,
        failure_fraction: failures as f64 / nodes as f64,
        mean_iterations: iterations.into_inner() as f64 / (nodes - failures).max(1) as f64,
        fallback_starts_used: fallbacks.into_inner(),
    };
    Ok((GridField::new(dims, bbox, values)?, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{bake_grid, finite_difference_gradient, Primitive};
    use crate::partition::{sph_to_cart, PartitionIndex, SphericalCoord};
    use rand::{Rng, SeedableRng};

    fn layout(delta: f64) -> PartitionLayout {
        let message = [1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 1, 0, 1]
            .iter()
            .map(|&b| b == 1)
            .collect();
        PartitionLayout::new(32, message, delta).unwrap()
    }

    fn sphere() -> Primitive {
        Primitive::sphere(Vec3::zeros(), 0.5)
    }

    fn center_direction(l: &PartitionLayout, bit: bool) -> Vec3 {
        let k = (0..l.n_partitions())
            .map(|k| l.unflat(k))
            .find(|idx| idx.i == 14 && l.bit_of_partition(*idx) == bit)
            .unwrap();
        let (t, p) = l.cell_center(k);
        sph_to_cart(&SphericalCoord { r: 1.0, theta: t, phi: p })
    }

    /// Points within 0.01 of the surface, away from cell boundaries and the z-axis.
    fn near_surface(shape: &Primitive, l: &PartitionLayout, seed: u64, n: usize) -> Vec<Vec3> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        while out.len() < n {
            let mut p = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            for _ in 0..20 {
                let (f, g) = shape.eval_with_gradient(&p).unwrap();
                p -= g * f;
            }
            p += Vec3::new(
                rng.random_range(-0.01..0.01),
                rng.random_range(-0.01..0.01),
                rng.random_range(-0.01..0.01),
            );
            if p.x.hypot(p.y) < 0.05 || away_from_boundary(l, &p) < 1e-3 {
                continue;
            }
            out.push(p);
        }
        out
    }

    fn away_from_boundary(l: &PartitionLayout, p: &Vec3) -> f64 {
        let s = crate::partition::cart_to_sph(p);
        let idx = l.partition_of(p).unwrap();
        let ((t0, _), (p0, _)) = l.cell_bounds(idx);
        let u = (s.theta - t0) / l.d_theta();
        let v = (s.phi - p0) / l.d_phi();
        u.min(1.0 - u).min(v).min(1.0 - v)
    }

    #[test]
    fn deform_is_identity_on_boundaries() {
        let l = layout(0.001);
        let ((t0, _), _) = l.cell_bounds(PartitionIndex { i: 9, j: 4 });
        let y = sph_to_cart(&SphericalCoord { r: 0.5, theta: t0, phi: 0.3 });
        let x = deform(&y, &sphere(), &l).unwrap();
        assert!((x - y).norm() < 1e-15);
    }

    #[test]
    fn deform_moves_sphere_radially_by_delta() {
        let l = layout(0.001);
        let up = center_direction(&l, true) * 0.5;
        let down = center_direction(&l, false) * 0.5;
        assert!((deform(&up, &sphere(), &l).unwrap().norm() - 0.501).abs() < 1e-12);
        assert!((deform(&down, &sphere(), &l).unwrap().norm() - 0.499).abs() < 1e-12);
    }

    #[test]
    fn zero_strength_is_identity() {
        let l = layout(0.0);
        let s = sphere();
        for p in near_surface(&s, &layout(0.001), 1, 20) {
            assert_eq!(deform(&p, &s, &l).unwrap(), p);
            assert_eq!(deform_jacobian(&p, &s, &l).unwrap(), Mat3::identity());
            assert_eq!(invert_deform(&p, &s, &l, &NewtonConfig::default()).unwrap(), p);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let l = layout(0.001);
        for shape in [sphere(), Primitive::preset("blob").unwrap()] {
            for y in near_surface(&shape, &l, 2, 100) {
                let j = deform_jacobian(&y, &shape, &l).unwrap();
                let h = 1e-6;
                let mut fd = Mat3::zeros();
                for k in 0..3 {
                    let mut e = Vec3::zeros();
                    e[k] = h;
                    let col = (deform(&(y + e), &shape, &l).unwrap()
                        - deform(&(y - e), &shape, &l).unwrap())
                        / (2.0 * h);
                    fd.set_column(k, &col);
                }
                assert!((fd - j).norm() / j.norm() <= 1e-4, "{y:?}");
            }
        }
    }

    #[test]
    fn newton_round_trip() {
        let l = layout(0.001);
        let s = sphere();
        let cfg = NewtonConfig::default();
        for y in near_surface(&s, &l, 3, 300) {
            let x = deform(&y, &s, &l).unwrap();
            let back = invert_deform(&x, &s, &l, &cfg).unwrap();
            assert!((back - y).norm() <= 1e-6);
        }
    }

    #[test]
    fn watermarked_value_and_gradient() {
        let l = layout(0.001);
        let wf = WatermarkedField::new(sphere(), l.clone(), NewtonConfig::default()).unwrap();
        let up = center_direction(&l, true);
        assert!(wf.eval(&(up * 0.501)).unwrap().abs() <= 1e-9);
        // radial symmetry of the gradient on a radial ray through a cell center
        let g = wf.gradient(&(up * 0.6)).unwrap();
        assert!(g.normalize().cross(&up).norm() < 1e-9);
        for x in near_surface(&sphere(), &l, 4, 50) {
            let g = wf.gradient(&x).unwrap();
            let fd = finite_difference_gradient(&wf, &x, 1e-5).unwrap();
            assert!((g - fd).norm() / g.norm() <= 1e-3);
        }
    }

    #[test]
    fn sign_correctness_on_surface() {
        let l = layout(0.001);
        for shape in [sphere(), Primitive::preset("torus").unwrap(), Primitive::preset("blob").unwrap()] {
            for y in near_surface(&shape, &l, 5, 200) {
                let mut y = y;
                for _ in 0..5 {
                    let (f, g) = shape.eval_with_gradient(&y).unwrap();
                    y -= g * f;
                }
                let c = l.window(&y).unwrap();
                if c <= 0.0 {
                    continue;
                }
                let f = shape.eval(&deform(&y, &shape, &l).unwrap()).unwrap();
                let bit = l.bit_of_partition(l.partition_of(&y).unwrap());
                assert_eq!(f > 0.0, bit, "{y:?}");
            }
        }
    }

    #[test]
    fn bake_with_zero_strength_matches_plain_bake() {
        let s = Primitive::preset("torus").unwrap();
        let wf = WatermarkedField::new(s.clone(), layout(0.0), NewtonConfig::default()).unwrap();
        let (g, report) = bake_watermarked(&wf, [20; 3], Bbox::standard()).unwrap();
        let plain = bake_grid(&s, [20; 3], Bbox::standard()).unwrap();
        assert_eq!(report.failures, 0);
        assert!(g
            .values()
            .iter()
            .zip(plain.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn invalid_config_rejected() {
        let cfg = NewtonConfig {
            batch_size: 0,
            ..NewtonConfig::default()
        };
        assert!(WatermarkedField::new(sphere(), layout(0.001), cfg).is_err());
        assert!(matches!(invert3(&Mat3::zeros()), Err(Error::SingularJacobian { .. })));
    }
}
