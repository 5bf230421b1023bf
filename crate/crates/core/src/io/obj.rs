use crate::geometry::{TriangleMesh, Vec3};

/// Reads vertices and faces from Wavefront OBJ text. Polygons are fanned into
/// triangles; texture and normal references are ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, String> {
    let mut mesh = TriangleMesh::default();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut words = line.split_whitespace();
        match words.next() {
            Some("v") => {
                let coords: Vec<f64> = words
                    .take(3)
                    .map(|w| w.parse::<f64>().map_err(|_| format!("line {line_no}: cannot parse vertex coordinate '{w}'")))
                    .collect::<Result<_, _>>()?;
                if coords.len() != 3 {
                    return Err(format!("line {line_no}: vertex needs three coordinates"));
                }
                mesh.vertices.push(Vec3::new(coords[0], coords[1], coords[2]));
            }
            Some("f") => {
                let mut idx = Vec::new();
                for w in words {
                    let head = w.split('/').next().unwrap_or("");
                    let v: i64 = head.parse().map_err(|_| format!("line {line_no}: bad face index '{w}'"))?;
                    let n = mesh.vertices.len() as i64;
                    let resolved = if v > 0 { v - 1 } else { n + v };
                    if v == 0 || resolved < 0 || resolved >= n {
                        return Err(format!("line {line_no}: face index {v} out of range (have {n} vertices)"));
                    }
                    idx.push(resolved as usize);
                }
                if idx.len() < 3 {
                    return Err(format!("line {line_no}: face needs at least three vertices"));
                }
                for k in 1..idx.len() - 1 {
                    mesh.faces.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    if mesh.faces.is_empty() {
        return Err("no faces found".into());
    }
    Ok(mesh)
}

pub fn write_obj(mesh: &TriangleMesh, header: &str) -> String {
    use std::fmt::Write as _;
    let mut s = String::new();
    for line in header.lines() {
        let _ = writeln!(s, "# {line}");
    }
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {:.6} {:.6} {:.6}", v.x, v.y, v.z);
    }
    for f in &mesh.faces {
        let _ = writeln!(s, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1);
    }
    s
}
