//! Spherical coordinates, the `N_s × N_s` partition of directions, and the
//! per-cell window that scales the watermark deformation.
//!
//! Conventions: `θ = acos(z / r) ∈ [0, π]`, `φ = atan2(y, x) ∈ [-π, π]`.
//! Cells are half-open with the lower index winning on a shared boundary;
//! the last row and column are closed.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::{Error, Result, Vec3};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphericalCoord {
    pub r: f64,
    pub theta: f64,
    pub phi: f64,
}

/// `θ = φ = 0` at the origin.
pub fn cart_to_sph(p: &Vec3) -> SphericalCoord {
    let r = p.norm();
    if r == 0.0 {
        return SphericalCoord {
            r: 0.0,
            theta: 0.0,
            phi: 0.0,
        };
    }
    SphericalCoord {
        r,
        theta: (p.z / r).clamp(-1.0, 1.0).acos(),
        phi: p.y.atan2(p.x),
    }
}

pub fn sph_to_cart(s: &SphericalCoord) -> Vec3 {
    let (st, ct) = s.theta.sin_cos();
    let (sp, cp) = s.phi.sin_cos();
    Vec3::new(s.r * st * cp, s.r * st * sp, s.r * ct)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PartitionIndex {
    pub i: usize,
    pub j: usize,
}

/// The partition grid, the embedded message and the watermark strength δ.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionLayout {
    pub n_s: usize,
    pub message: Vec<bool>,
    pub delta: f64,
}

pub const DEFAULT_NS: usize = 32;
pub const DEFAULT_DELTA: f64 = 0.001;
pub const DEFAULT_MESSAGE_BITS: usize = 16;

impl PartitionLayout {
    pub fn new(n_s: usize, message: Vec<bool>, delta: f64) -> Result<Self> {
        if n_s == 0 {
            return Err(Error::InvalidArgument("n_s must be >= 1".into()));
        }
        if message.is_empty() {
            return Err(Error::InvalidArgument("message must not be empty".into()));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(Error::InvalidArgument(format!("delta must be >= 0, got {delta}")));
        }
        Ok(Self { n_s, message, delta })
    }

    pub fn n_m(&self) -> usize {
        self.message.len()
    }

    pub fn n_partitions(&self) -> usize {
        self.n_s * self.n_s
    }

    pub fn d_theta(&self) -> f64 {
        PI / self.n_s as f64
    }

    pub fn d_phi(&self) -> f64 {
        2.0 * PI / self.n_s as f64
    }

    /// Same layout with a different strength.
    pub fn with_delta(&self, delta: f64) -> Self {
        Self {
            delta,
            ..self.clone()
        }
    }

    /// `(θ_i, θ_{i+1})` and `(φ_j, φ_{j+1})` of a cell.
    pub fn cell_bounds(&self, idx: PartitionIndex) -> ((f64, f64), (f64, f64)) {
        let (dt, dp) = (self.d_theta(), self.d_phi());
        (
            (idx.i as f64 * dt, (idx.i + 1) as f64 * dt),
            (-PI + idx.j as f64 * dp, -PI + (idx.j + 1) as f64 * dp),
        )
    }

    pub fn cell_center(&self, idx: PartitionIndex) -> (f64, f64) {
        let ((t0, t1), (p0, p1)) = self.cell_bounds(idx);
        (0.5 * (t0 + t1), 0.5 * (p0 + p1))
    }

    /// Flat index `i·N_s + j`.
    pub fn flat(&self, idx: PartitionIndex) -> usize {
        idx.i * self.n_s + idx.j
    }

    pub fn unflat(&self, k: usize) -> PartitionIndex {
        PartitionIndex {
            i: k / self.n_s,
            j: k % self.n_s,
        }
    }

    /// Message position carried by a partition: `(i·N_s + j) mod N_m`.
    pub fn message_slot(&self, idx: PartitionIndex) -> usize {
        self.flat(idx) % self.n_m()
    }

    pub fn bit_of_partition(&self, idx: PartitionIndex) -> bool {
        self.message[self.message_slot(idx)]
    }

    fn index_of(&self, s: &SphericalCoord) -> PartitionIndex {
        let n = self.n_s as f64;
        let last = self.n_s as isize - 1;
        let i = ((s.theta * n / PI).floor() as isize).clamp(0, last) as usize;
        let j = (((s.phi + PI) * n / (2.0 * PI)).floor() as isize).clamp(0, last) as usize;
        PartitionIndex { i, j }
    }

    pub fn partition_of(&self, p: &Vec3) -> Result<PartitionIndex> {
        if *p == Vec3::zeros() {
            return Err(Error::UndefinedDirection);
        }
        Ok(self.index_of(&cart_to_sph(p)))
    }

    /// Normalized position `(u, v) ∈ [0,1]²` of a direction inside its cell.
    fn cell_offsets(&self, s: &SphericalCoord, idx: PartitionIndex) -> (f64, f64) {
        let ((t0, _), (p0, _)) = self.cell_bounds(idx);
        ((s.theta - t0) / self.d_theta(), (s.phi - p0) / self.d_phi())
    }

    /// Biquadratic bump: δ at the cell center, zero on the cell boundary.
    pub fn window(&self, p: &Vec3) -> Result<f64> {
        if *p == Vec3::zeros() {
            return Err(Error::UndefinedDirection);
        }
        let s = cart_to_sph(p);
        let idx = self.index_of(&s);
        let (u, v) = self.cell_offsets(&s, idx);
        Ok(16.0 * self.delta * (1.0 - u) * u * (1.0 - v) * v)
    }

    /// Cartesian gradient of [`window`](Self::window) by the chain rule through `θ` and `φ`.
    ///
    /// Fails with [`Error::SingularDirection`] on the z-axis, where `∇φ` blows up.
    pub fn window_gradient(&self, p: &Vec3) -> Result<Vec3> {
        Ok(self.window_with_gradient(p)?.1)
    }

    /// `(C(p), ∇C(p), partition of p)` in one pass.
    pub fn window_with_gradient(&self, p: &Vec3) -> Result<(f64, Vec3, PartitionIndex)> {
        if *p == Vec3::zeros() {
            return Err(Error::UndefinedDirection);
        }
        let rho2 = p.x * p.x + p.y * p.y;
        if rho2 == 0.0 {
            return Err(Error::SingularDirection);
        }
        let s = cart_to_sph(p);
        let idx = self.index_of(&s);
        let (u, v) = self.cell_offsets(&s, idx);
        let a = (1.0 - u) * u;
        let b = (1.0 - v) * v;
        let c = 16.0 * self.delta * a * b;
        let dc_dtheta = 16.0 * self.delta * b * (1.0 - 2.0 * u) / self.d_theta();
        let dc_dphi = 16.0 * self.delta * a * (1.0 - 2.0 * v) / self.d_phi();
        let rho = rho2.sqrt();
        let r2 = s.r * s.r;
        let grad_theta = Vec3::new(p.x * p.z / (r2 * rho), p.y * p.z / (r2 * rho), -rho / r2);
        let grad_phi = Vec3::new(-p.y / rho2, p.x / rho2, 0.0);
        Ok((c, grad_theta * dc_dtheta + grad_phi * dc_dphi, idx))
    }

    /// `(C, ∇C)` with the pole fallback: on the z-axis `∇C` is taken as zero.
    pub fn window_and_gradient_or_pole(&self, p: &Vec3) -> Result<(f64, Vec3, PartitionIndex)> {
        match self.window_with_gradient(p) {
            Err(Error::SingularDirection) => Ok((self.window(p)?, Vec3::zeros(), self.partition_of(p)?)),
            other => other,
        }
    }

    /// Heuristic injectivity bound on δ for surfaces no closer than
    /// `min_surface_radius` to the origin.
    pub fn injectivity_bound(&self, min_surface_radius: f64) -> f64 {
        0.25 * self.d_theta().min(self.d_phi()) * min_surface_radius
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn layout(n_s: usize, message: &[u8], delta: f64) -> PartitionLayout {
        PartitionLayout::new(n_s, message.iter().map(|&b| b == 1).collect(), delta).unwrap()
    }

    fn default_layout() -> PartitionLayout {
        layout(32, &[1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1, 0, 0, 1, 0, 1], 0.001)
    }

    fn at(theta: f64, phi: f64) -> Vec3 {
        sph_to_cart(&SphericalCoord { r: 0.7, theta, phi })
    }

    #[test]
    fn cart_to_sph_examples() {
        let s = cart_to_sph(&Vec3::new(0.0, 0.0, 1.0));
        assert_eq!((s.r, s.theta, s.phi), (1.0, 0.0, 0.0));
        let s = cart_to_sph(&Vec3::new(1.0, 0.0, 0.0));
        assert_eq!((s.r, s.theta, s.phi), (1.0, PI / 2.0, 0.0));
        let s = cart_to_sph(&Vec3::new(0.0, -1.0, 0.0));
        assert_eq!((s.r, s.theta, s.phi), (1.0, PI / 2.0, -PI / 2.0));
        let s = cart_to_sph(&Vec3::zeros());
        assert_eq!((s.r, s.theta, s.phi), (0.0, 0.0, 0.0));
    }

    #[test]
    fn sph_to_cart_examples() {
        let p = sph_to_cart(&SphericalCoord { r: 1.0, theta: 0.0, phi: 1.234 });
        assert_relative_eq!(p, Vec3::z(), epsilon = 1e-15);
        let p = sph_to_cart(&SphericalCoord { r: 2.0, theta: PI / 2.0, phi: PI });
        assert_relative_eq!(p, Vec3::new(-2.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn round_trip_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let p = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            assert!((sph_to_cart(&cart_to_sph(&p)) - p).norm() <= 1e-12);
        }
    }

    #[test]
    fn partition_of_examples() {
        let l2 = layout(2, &[1, 0, 1, 1], 0.001);
        assert_eq!(l2.partition_of(&Vec3::z()).unwrap(), PartitionIndex { i: 0, j: 1 });
        let l = default_layout();
        assert_eq!(l.partition_of(&Vec3::x()).unwrap(), PartitionIndex { i: 16, j: 16 });
        // atan2(-0, -1) = -π: the seam maps to the first column
        let seam = Vec3::new(-1.0, -0.0, 0.3);
        assert_eq!(cart_to_sph(&seam).phi, -PI);
        assert_eq!(l.partition_of(&seam).unwrap().j, 0);
        // φ = +π clamps into the last column, θ = π into the last row
        assert_eq!(l.partition_of(&Vec3::new(-1.0, 0.0, 0.3)).unwrap().j, 31);
        assert_eq!(l.partition_of(&-Vec3::z()).unwrap().i, 31);
        assert!(matches!(l.partition_of(&Vec3::zeros()), Err(Error::UndefinedDirection)));
    }

    #[test]
    fn cell_centers_round_trip() {
        let l = default_layout();
        for k in 0..l.n_partitions() {
            let idx = l.unflat(k);
            let (t, p) = l.cell_center(idx);
            assert_eq!(l.partition_of(&at(t, p)).unwrap(), idx);
        }
    }

    #[test]
    fn window_examples() {
        let l = default_layout();
        let idx = PartitionIndex { i: 10, j: 5 };
        let ((t0, t1), (p0, p1)) = l.cell_bounds(idx);
        let (tc, pc) = l.cell_center(idx);
        assert_relative_eq!(l.window(&at(tc, pc)).unwrap(), 0.001, epsilon = 1e-15);
        assert!(l.window(&at(t0, pc)).unwrap().abs() < 1e-15);
        assert!(l.window(&at(tc, p0)).unwrap().abs() < 1e-15);
        let quarter = at(t0 + 0.25 * (t1 - t0), pc);
        assert_relative_eq!(l.window(&quarter).unwrap(), 0.75 * 0.001, epsilon = 1e-12);
        let _ = p1;
    }

    #[test]
    fn window_continuous_across_boundaries() {
        let l = default_layout();
        let ((t0, _), (p0, _)) = l.cell_bounds(PartitionIndex { i: 7, j: 9 });
        let eps = 1e-9;
        for (a, b) in [
            (at(t0 - eps, p0 + 0.05), at(t0 + eps, p0 + 0.05)),
            (at(t0 + 0.05, p0 - eps), at(t0 + 0.05, p0 + eps)),
        ] {
            assert!(l.window(&a).unwrap() < 1e-9);
            assert!(l.window(&b).unwrap() < 1e-9);
        }
    }

    #[test]
    fn window_gradient_zero_at_center_and_separable() {
        let l = default_layout();
        let idx = PartitionIndex { i: 12, j: 20 };
        let (tc, pc) = l.cell_center(idx);
        assert!(l.window_gradient(&at(tc, pc)).unwrap().norm() < 1e-15);
        // φ at the center: only the θ direction contributes
        let p = at(tc + 0.02, pc);
        let g = l.window_gradient(&p).unwrap();
        let s = cart_to_sph(&p);
        let grad_phi_dir = Vec3::new(-s.phi.sin(), s.phi.cos(), 0.0);
        assert!(g.dot(&grad_phi_dir).abs() < 1e-15);
        assert!(g.norm() > 0.0);
    }

    #[test]
    fn window_gradient_matches_finite_differences() {
        let l = default_layout();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let h = 1e-7;
        let mut checked = 0;
        while checked < 100 {
            let p = Vec3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if p.norm() < 0.2 || p.x.hypot(p.y) < 0.05 {
                continue;
            }
            // keep the stencil inside one cell
            let s = cart_to_sph(&p);
            let idx = l.partition_of(&p).unwrap();
            let (u, v) = l.cell_offsets(&s, idx);
            if u.min(1.0 - u).min(v).min(1.0 - v) < 1e-3 {
                continue;
            }
            let g = l.window_gradient(&p).unwrap();
            let mut fd = Vec3::zeros();
            for k in 0..3 {
                let mut e = Vec3::zeros();
                e[k] = h;
                fd[k] = (l.window(&(p + e)).unwrap() - l.window(&(p - e)).unwrap()) / (2.0 * h);
            }
            assert!((fd - g).norm() <= 1e-4 * g.norm().max(1e-6), "{p:?}: {fd:?} vs {g:?}");
            checked += 1;
        }
    }

    #[test]
    fn z_axis_gradient_is_singular() {
        let l = default_layout();
        assert!(matches!(
            l.window_gradient(&Vec3::new(0.0, 0.0, 0.4)),
            Err(Error::SingularDirection)
        ));
        let (c, g, _) = l.window_and_gradient_or_pole(&Vec3::new(0.0, 0.0, 0.4)).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(g, Vec3::zeros());
    }

    #[test]
    fn bit_assignment() {
        let l2 = layout(2, &[1, 0, 1, 1], 0.001);
        assert!(l2.bit_of_partition(PartitionIndex { i: 1, j: 1 }));
        let l = default_layout();
        assert_eq!(l.message_slot(PartitionIndex { i: 0, j: 16 }), 0);
        assert_eq!(l.message_slot(PartitionIndex { i: 1, j: 3 }), 3);
        assert_eq!(l.bit_of_partition(PartitionIndex { i: 1, j: 3 }), l.message[3]);
    }

    #[test]
    fn every_cell_has_positive_window_mass() {
        // midpoint quadrature of C·sinθ over each angular cell
        let l = default_layout();
        let m = 8;
        for k in 0..l.n_partitions() {
            let idx = l.unflat(k);
            let ((t0, t1), (p0, p1)) = l.cell_bounds(idx);
            let mut mass = 0.0;
            for a in 0..m {
                for b in 0..m {
                    let t = t0 + (a as f64 + 0.5) / m as f64 * (t1 - t0);
                    let p = p0 + (b as f64 + 0.5) / m as f64 * (p1 - p0);
                    mass += l.window(&at(t, p)).unwrap() * t.sin();
                }
            }
            assert!(mass > 0.0, "cell {idx:?}");
        }
    }

    proptest! {
        #[test]
        fn window_depends_only_on_direction(
            x in -1.0f64..1.0, y in -1.0f64..1.0, z in -1.0f64..1.0, scale in 0.01f64..10.0
        ) {
            let p = Vec3::new(x, y, z);
            prop_assume!(p.norm() > 1e-6);
            let l = default_layout();
            let a = l.window(&p).unwrap();
            let b = l.window(&(p * scale)).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
            prop_assert!((0.0..=l.delta * (1.0 + 1e-12)).contains(&a));
        }
    }
}
