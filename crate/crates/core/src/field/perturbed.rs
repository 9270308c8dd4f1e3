use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ScalarField;
use crate::{Error, Mat3, Result, Vec3};

#[derive(Debug, Clone)]
struct Wave {
    k: Vec3,
    phase: f64,
}

/// A base field plus a seeded sum of small plane waves.
///
/// Models the independent reconstruction error of a field that was never
/// watermarked: its zero set sits within `amplitude` of the base surface
/// with a sign pattern unrelated to any partition layout. Used to draw null
/// samples for detector calibration.
#[derive(Debug, Clone)]
pub struct PerturbedField<F> {
    base: F,
    amplitude: f64,
    waves: Vec<Wave>,
}

impl<F: ScalarField> PerturbedField<F> {
    /// `waves` plane waves with wavelength `wavelength`, random directions
    /// and phases; the summed ripple has peak amplitude at most `amplitude`.
    pub fn new(base: F, amplitude: f64, wavelength: f64, waves: usize, seed: u64) -> Result<Self> {
        if !(amplitude >= 0.0 && amplitude.is_finite()) {
            return Err(Error::InvalidArgument(format!("amplitude must be >= 0, got {amplitude}")));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return Err(Error::InvalidArgument(format!("wavelength must be > 0, got {wavelength}")));
        }
        if waves == 0 {
            return Err(Error::InvalidArgument("need at least one wave".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let freq = std::f64::consts::TAU / wavelength;
        let waves = (0..waves)
            .map(|_| {
                let d: Vec3 = loop {
                    let v = Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    let n = v.norm();
                    if n > 1e-3 && n <= 1.0 {
                        break v / n;
                    }
                };
                Wave {
                    k: d * freq,
                    phase: rng.random_range(0.0..std::f64::consts::TAU),
                }
            })
            .collect();
        Ok(PerturbedField {
            base,
            amplitude,
            waves,
        })
    }

    pub fn base(&self) -> &F {
        &self.base
    }

    fn weight(&self) -> f64 {
        self.amplitude / self.waves.len() as f64
    }
}

impl<F: ScalarField> ScalarField for PerturbedField<F> {
    fn eval(&self, p: &Vec3) -> Result<f64> {
        let w = self.weight();
        let r: f64 = self.waves.iter().map(|s| (s.k.dot(p) + s.phase).cos()).sum();
        Ok(self.base.eval(p)? + w * r)
    }

    fn eval_with_gradient(&self, p: &Vec3) -> Result<(f64, Vec3)> {
        let w = self.weight();
        let (mut v, mut g) = self.base.eval_with_gradient(p)?;
        for s in &self.waves {
            let a = s.k.dot(p) + s.phase;
            v += w * a.cos();
            g -= s.k * (w * a.sin());
        }
        Ok((v, g))
    }

    fn hessian(&self, p: &Vec3) -> Result<Mat3> {
        let w = self.weight();
        let mut h = self.base.hessian(p)?;
        for s in &self.waves {
            let a = s.k.dot(p) + s.phase;
            h -= s.k * s.k.transpose() * (w * a.cos());
        }
        Ok(h)
    }
}
