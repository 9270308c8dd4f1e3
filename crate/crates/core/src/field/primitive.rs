use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{Derivatives, ScalarField};
use crate::{Error, Mat3, Result, Vec3};

/// Closed-form signed distance primitives.
///
/// Sphere and torus are exact Euclidean distances. The smooth union blends
/// its children with a cubic polynomial minimum, which is C² wherever the
/// children are.
///
/// Medial-axis conventions: the sphere gradient at its center is `+z` with a
/// zero Hessian; the torus picks `+x` as the radial direction on its axis and
/// that radial direction as the gradient on its core circle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Primitive {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Torus around the z-axis through `center`.
    Torus {
        center: [f64; 3],
        major_radius: f64,
        minor_radius: f64,
    },
    SmoothUnion {
        children: Vec<Primitive>,
        blend: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Order {
    Value,
    Gradient,
    Hessian,
}

impl Primitive {
    pub fn sphere(center: Vec3, radius: f64) -> Self {
        Primitive::Sphere {
            center: center.into(),
            radius,
        }
    }

    pub fn torus(center: Vec3, major_radius: f64, minor_radius: f64) -> Self {
        Primitive::Torus {
            center: center.into(),
            major_radius,
            minor_radius,
        }
    }

    pub fn smooth_union(children: Vec<Primitive>, blend: f64) -> Self {
        Primitive::SmoothUnion { children, blend }
    }

    /// Named test shapes, all normalized inside the unit sphere.
    ///
    /// `sphere` (r = 0.5), `torus` (R = 0.5, r = 0.2) and `blob`, an
    /// asymmetric smooth union of three spheres.
    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "sphere" => Some(Self::sphere(Vec3::zeros(), 0.5)),
            "torus" => Some(Self::torus(Vec3::zeros(), 0.5, 0.2)),
            "blob" => Some(Self::smooth_union(
                vec![
                    Self::sphere(Vec3::new(0.1, 0.0, -0.05), 0.45),
                    Self::sphere(Vec3::new(-0.25, 0.2, 0.1), 0.33),
                    Self::sphere(Vec3::new(0.1, -0.2, 0.25), 0.3),
                ],
                0.2,
            )),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Primitive::Sphere { radius, .. } if !(*radius > 0.0) => Err(Error::InvalidArgument(
                format!("sphere radius must be positive, got {radius}"),
            )),
            Primitive::Torus {
                major_radius,
                minor_radius,
                ..
            } if !(*major_radius > 0.0 && *minor_radius > 0.0) => Err(Error::InvalidArgument(
                "torus radii must be positive".into(),
            )),
            Primitive::SmoothUnion { children, blend } => {
                if children.is_empty() {
                    return Err(Error::InvalidArgument("smooth union needs children".into()));
                }
                if !(*blend >= 0.0) {
                    return Err(Error::InvalidArgument("blend radius must be >= 0".into()));
                }
                children.iter().try_for_each(Primitive::validate)
            }
            _ => Ok(()),
        }
    }

    fn jet(&self, p: &Vec3, order: Order) -> Derivatives {
        match self {
            Primitive::Sphere { center, radius } => {
                let d = p - Vec3::from(*center);
                let r = d.norm();
                if r == 0.0 {
                    return Derivatives {
                        value: -radius,
                        gradient: Vec3::z(),
                        hessian: Mat3::zeros(),
                    };
                }
                let mut out = zero_jet(r - radius);
                if order >= Order::Gradient {
                    let n = d / r;
                    out.gradient = n;
                    if order == Order::Hessian {
                        out.hessian = (Mat3::identity() - n * n.transpose()) / r;
                    }
                }
                out
            }
            Primitive::Torus {
                center,
                major_radius,
                minor_radius,
            } => {
                let d = p - Vec3::from(*center);
                let rho = d.x.hypot(d.y);
                let u = if rho > 0.0 {
                    Vec3::new(d.x / rho, d.y / rho, 0.0)
                } else {
                    Vec3::x()
                };
                let w = d - u * *major_radius;
                let q = w.norm();
                let mut out = zero_jet(q - minor_radius);
                if order >= Order::Gradient {
                    if q == 0.0 {
                        out.gradient = u;
                        return out;
                    }
                    let n = w / q;
                    out.gradient = n;
                    if order == Order::Hessian {
                        let mut h = Mat3::identity() - n * n.transpose();
                        if rho > 0.0 {
                            let t = Vec3::new(-u.y, u.x, 0.0);
                            h -= t * t.transpose() * (*major_radius / rho);
                        }
                        out.hessian = h / q;
                    }
                }
                out
            }
            Primitive::SmoothUnion { children, blend } => {
                let mut iter = children.iter();
                let first = iter
                    .next()
                    .map(|c| c.jet(p, order))
                    .unwrap_or_else(|| zero_jet(f64::INFINITY));
                iter.fold(first, |acc, c| smooth_min(&acc, &c.jet(p, order), *blend, order))
            }
        }
    }
}

fn zero_jet(value: f64) -> Derivatives {
    Derivatives {
        value,
        gradient: Vec3::zeros(),
        hessian: Mat3::zeros(),
    }
}

/// Cubic polynomial smooth minimum: `min(a, b) - k h³ / 6`, `h = max(k - |a - b|, 0) / k`.
fn smooth_min(a: &Derivatives, b: &Derivatives, k: f64, order: Order) -> Derivatives {
    let d = a.value - b.value;
    if d.abs() >= k {
        return if d <= 0.0 { *a } else { *b };
    }
    let ad = d.abs();
    let value = 0.5 * (a.value + b.value) - k / 6.0 - d * d / (2.0 * k) + ad * ad * ad / (6.0 * k * k);
    let mut out = zero_jet(value);
    if order >= Order::Gradient {
        let sa = 0.5 - d / k + d * ad / (2.0 * k * k);
        let sb = 1.0 - sa;
        out.gradient = a.gradient * sa + b.gradient * sb;
        if order == Order::Hessian {
            let saa = -1.0 / k + ad / (k * k);
            let dg = a.gradient - b.gradient;
            out.hessian = a.hessian * sa + b.hessian * sb + dg * dg.transpose() * saa;
        }
    }
    out
}

impl ScalarField for Primitive {
    fn eval(&self, p: &Vec3) -> Result<f64> {
        Ok(self.jet(p, Order::Value).value)
    }

    fn eval_with_gradient(&self, p: &Vec3) -> Result<(f64, Vec3)> {
        let j = self.jet(p, Order::Gradient);
        Ok((j.value, j.gradient))
    }

    fn hessian(&self, p: &Vec3) -> Result<Mat3> {
        Ok(self.jet(p, Order::Hessian).hessian)
    }

    fn derivatives(&self, p: &Vec3) -> Result<Derivatives> {
        Ok(self.jet(p, Order::Hessian))
    }
}

fn parse_vec3(s: &str) -> Result<Vec3> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| Error::InvalidArgument(format!("bad vector '{s}': {e}")))?;
    match parts.as_slice() {
        [x, y, z] => Ok(Vec3::new(*x, *y, *z)),
        _ => Err(Error::InvalidArgument(format!("expected x,y,z, got '{s}'"))),
    }
}

fn parse_num(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| Error::InvalidArgument(format!("bad number '{s}': {e}")))
}

/// Parses `sphere:R[@cx,cy,cz]`, `torus:R:r[@cx,cy,cz]`,
/// `union:k:<spec>|<spec>|...`, or a preset name (`sphere`, `torus`, `blob`).
impl FromStr for Primitive {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(p) = Primitive::preset(s) {
            return Ok(p);
        }
        let (body, center) = match s.split_once('@') {
            Some((b, c)) if !s.starts_with("union:") => (b, parse_vec3(c)?),
            _ => (s, Vec3::zeros()),
        };
        let prim = if let Some(rest) = body.strip_prefix("sphere:") {
            Primitive::sphere(center, parse_num(rest)?)
        } else if let Some(rest) = body.strip_prefix("torus:") {
            let (big, small) = rest
                .split_once(':')
                .ok_or_else(|| Error::InvalidArgument(format!("torus needs R:r, got '{rest}'")))?;
            Primitive::torus(center, parse_num(big)?, parse_num(small)?)
        } else if let Some(rest) = body.strip_prefix("union:") {
            let (k, kids) = rest.split_once(':').ok_or_else(|| {
                Error::InvalidArgument(format!("union needs k:<spec>|<spec>, got '{rest}'"))
            })?;
            let children = kids
                .split('|')
                .map(str::parse)
                .collect::<Result<Vec<Primitive>>>()?;
            Primitive::smooth_union(children, parse_num(k)?)
        } else {
            return Err(Error::InvalidArgument(format!("unknown primitive '{s}'")));
        };
        prim.validate()?;
        Ok(prim)
    }
}
