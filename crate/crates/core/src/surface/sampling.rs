use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::field::ScalarField;
use crate::{Error, Result, Vec3};

pub const DEFAULT_SAMPLE_TOLERANCE: f64 = 1e-6;
const MAX_PROJECTION_STEPS: usize = 50;
const CHUNK: usize = 256;

/// Points on the zero set of a field.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    pub points: Vec<Vec3>,
    /// Candidates drawn to produce them.
    pub attempts: usize,
}

impl SampleSet {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Projects `x ← x - F(x)∇F(x)` until `|F| <= tol`.
fn project<F: ScalarField + ?Sized>(field: &F, mut x: Vec3, tol: f64) -> Option<Vec3> {
    for _ in 0..MAX_PROJECTION_STEPS {
        let (f, g) = field.eval_with_gradient(&x).ok()?;
        if f.abs() <= tol {
            return Some(x);
        }
        x -= g * f;
        if !x.iter().all(|c| c.is_finite()) {
            return None;
        }
    }
    match field.eval(&x) {
        Ok(f) if f.abs() <= tol => Some(x),
        _ => None,
    }
}

/// Draws candidates uniformly in `[-1, 1]³` and projects them onto the zero set.
///
/// Candidates are processed in fixed chunks and accepted in draw order, so the
/// result depends only on the seed.
pub fn sample_surface<F: ScalarField + ?Sized>(field: &F, n: usize, seed: u64, tol: f64) -> Result<SampleSet> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be positive")));
    }
    let max_attempts = 1000 + 100 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n);
    let mut attempts = 0;
    while points.len() < n && attempts < max_attempts {
        let batch = CHUNK.max(2 * (n - points.len())).min(max_attempts - attempts);
        let starts: Vec<Vec3> = (0..batch)
            .map(|_| {
                Vec3::new(
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                    rng.random_range(-1.0..=1.0),
                )
            })
            .collect();
        let projected: Vec<Option<Vec3>> = starts.par_iter().map(|&x| project(field, x, tol)).collect();
        for (k, p) in projected.into_iter().enumerate() {
            if let Some(p) = p {
                points.push(p);
                if points.len() == n {
                    attempts += k + 1;
                    return Ok(SampleSet { points, attempts });
                }
            }
        }
        attempts += batch;
    }
    if points.len() < n {
        return Err(Error::SamplingExhausted {
            produced: points.len(),
            requested: n,
            attempts,
        });
    }
    Ok(SampleSet { points, attempts })
}
