use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::{Error, Result, Vec3};

/// Binary little-endian PLY with `float x, y, z` per vertex.
pub fn write_ply_points(path: impl AsRef<Path>, points: &[Vec3]) -> Result<()> {
    let mut out = format!(
        "ply\nformat binary_little_endian 1.0\ncomment funcmark point set\nelement vertex {}\nproperty float x\nproperty float y\nproperty float z\nend_header\n",
        points.len()
    )
    .into_bytes();
    out.reserve(points.len() * 12);
    for p in points {
        for c in p.iter() {
            out.extend_from_slice(&(*c as f32).to_le_bytes());
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Reads vertex positions from an ASCII or binary little-endian PLY.
///
/// Scalar `float`/`double` vertex properties are supported; `x`, `y`, `z`
/// are picked by name.
pub fn read_ply_points(path: impl AsRef<Path>) -> Result<Vec<Vec3>> {
    let mut r = BufReader::new(std::fs::File::open(path)?);
    let mut line = String::new();
    let mut lineno = 0;
    let mut next = |r: &mut BufReader<std::fs::File>, line: &mut String| -> Result<usize> {
        line.clear();
        if r.read_line(line)? == 0 {
            return Err(Error::Format("unexpected end of PLY header".into()));
        }
        lineno += 1;
        Ok(lineno)
    };
    next(&mut r, &mut line)?;
    if line.trim() != "ply" {
        return Err(Error::Format("missing `ply` magic".into()));
    }
    let mut binary = None;
    let mut count = None;
    let mut props: Vec<(String, usize)> = Vec::new();
    let mut in_vertex = false;
    loop {
        let n = next(&mut r, &mut line)?;
        let t: Vec<&str> = line.split_whitespace().collect();
        match t.as_slice() {
            ["format", "binary_little_endian", _] => binary = Some(true),
            ["format", "ascii", _] => binary = Some(false),
            ["format", ..] => return Err(Error::Format("unsupported PLY format".into())),
            ["element", "vertex", c] => {
                count = Some(c.parse::<usize>().map_err(|_| Error::Parse {
                    line: n,
                    message: "invalid vertex count".into(),
                })?);
                in_vertex = true;
            }
            ["element", ..] => in_vertex = false,
            ["property", ty, name] if in_vertex => {
                let size = match *ty {
                    "float" | "float32" => 4,
                    "double" | "float64" => 8,
                    _ => {
                        return Err(Error::Parse {
                            line: n,
                            message: format!("unsupported property type `{ty}`"),
                        })
                    }
                };
                props.push((name.to_string(), size));
            }
            ["end_header"] => break,
            _ => {}
        }
    }
    let binary = binary.ok_or_else(|| Error::Format("missing PLY format line".into()))?;
    let count = count.ok_or_else(|| Error::Format("missing vertex element".into()))?;
    let slot = |axis: &str| {
        props
            .iter()
            .position(|(n, _)| n == axis)
            .ok_or_else(|| Error::Format(format!("missing property `{axis}`")))
    };
    let (ix, iy, iz) = (slot("x")?, slot("y")?, slot("z")?);
    let mut pts = Vec::with_capacity(count);
    if binary {
        let stride: usize = props.iter().map(|p| p.1).sum();
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        if buf.len() < stride * count {
            return Err(Error::Length {
                expected: stride * count,
                actual: buf.len(),
            });
        }
        let mut offsets = Vec::with_capacity(props.len());
        let mut o = 0;
        for p in &props {
            offsets.push(o);
            o += p.1;
        }
        let read = |rec: &[u8], k: usize| -> f64 {
            let s = &rec[offsets[k]..offsets[k] + props[k].1];
            if props[k].1 == 4 {
                f32::from_le_bytes(s.try_into().unwrap()) as f64
            } else {
                f64::from_le_bytes(s.try_into().unwrap())
            }
        };
        for rec in buf.chunks_exact(stride).take(count) {
            pts.push(Vec3::new(read(rec, ix), read(rec, iy), read(rec, iz)));
        }
    } else {
        for _ in 0..count {
            let n = next(&mut r, &mut line)?;
            let vals: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::Parse {
                    line: n,
                    message: "invalid number".into(),
                })?;
            if vals.len() < props.len() {
                return Err(Error::Parse {
                    line: n,
                    message: "too few values".into(),
                });
            }
            pts.push(Vec3::new(vals[ix], vals[iy], vals[iz]));
        }
    }
    Ok(pts)
}
