use std::fmt::Write as _;
use std::path::Path;

use crate::mesh::TriangleMesh;
use crate::{Error, Result, Vec3};

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn floats(line: usize, rest: &[&str]) -> Result<Vec3> {
    if rest.len() < 3 {
        return Err(parse_err(line, "expected three coordinates"));
    }
    let mut v = Vec3::zeros();
    for k in 0..3 {
        v[k] = rest[k]
            .parse()
            .map_err(|_| parse_err(line, format!("invalid number `{}`", rest[k])))?;
    }
    Ok(v)
}

/// Resolves a 1-based (or negative, relative) OBJ index.
fn index(line: usize, token: &str, count: usize) -> Result<usize> {
    let head = token.split('/').next().unwrap_or("");
    let i: i64 = head
        .parse()
        .map_err(|_| parse_err(line, format!("invalid face index `{token}`")))?;
    let resolved = if i > 0 { i - 1 } else { count as i64 + i };
    if i == 0 || resolved < 0 || resolved >= count as i64 {
        return Err(parse_err(line, format!("face index {i} out of range")));
    }
    Ok(resolved as usize)
}

/// Parses `v`, `vn` and `f` records; polygons are fan-triangulated.
///
/// Normals are kept when there is exactly one per vertex.
pub fn read_obj_str(text: &str) -> Result<TriangleMesh> {
    let mut vertices = Vec::new();
    let mut normals = Vec::new();
    let mut faces = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let mut it = raw.split_whitespace();
        let Some(tag) = it.next() else { continue };
        let rest: Vec<&str> = it.collect();
        match tag {
            "v" => vertices.push(floats(line, &rest)?),
            "vn" => normals.push(floats(line, &rest)?),
            "f" => {
                if rest.len() < 3 {
                    return Err(parse_err(line, "face needs at least three vertices"));
                }
                let ids: Vec<u32> = rest
                    .iter()
                    .map(|t| index(line, t, vertices.len()).map(|i| i as u32))
                    .collect::<Result<_>>()?;
                for w in 1..ids.len() - 1 {
                    let f = [ids[0], ids[w], ids[w + 1]];
                    if f[0] == f[1] || f[1] == f[2] || f[0] == f[2] {
                        return Err(parse_err(line, "degenerate face"));
                    }
                    faces.push(f);
                }
            }
            _ => {}
        }
    }
    let normals = if !normals.is_empty() && normals.len() == vertices.len() {
        Some(normals.iter().map(|n| n.try_normalize(0.0).unwrap_or_else(Vec3::z)).collect())
    } else {
        None
    };
    Ok(TriangleMesh {
        vertices,
        faces,
        normals,
    })
}

pub fn read_obj(path: impl AsRef<Path>) -> Result<TriangleMesh> {
    read_obj_str(&std::fs::read_to_string(path)?)
}

fn sig9(x: f64) -> String {
    format!("{x:.8e}")
}

/// OBJ text with 9 significant digits; `vn` records share the vertex index.
pub fn write_obj_string(mesh: &TriangleMesh) -> String {
    let mut s = String::with_capacity(mesh.vertices.len() * 60 + mesh.faces.len() * 30);
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", sig9(v.x), sig9(v.y), sig9(v.z));
    }
    if let Some(normals) = &mesh.normals {
        for n in normals {
            let _ = writeln!(s, "vn {} {} {}", sig9(n.x), sig9(n.y), sig9(n.z));
        }
        for f in &mesh.faces {
            let [a, b, c] = f.map(|i| i + 1);
            let _ = writeln!(s, "f {a}//{a} {b}//{b} {c}//{c}");
        }
    } else {
        for f in &mesh.faces {
            let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
        }
    }
    s
}

pub fn write_obj(path: impl AsRef<Path>, mesh: &TriangleMesh) -> Result<()> {
    std::fs::write(path, write_obj_string(mesh))?;
    Ok(())
}
