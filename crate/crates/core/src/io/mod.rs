//! Object file loading and point-cloud export.

mod obj;
mod ply;

pub use obj::{parse_obj, write_obj};
pub use ply::{parse_ply, write_ply_mesh_binary, write_ply_points, PlyData};

use std::path::Path;

use crate::error::{GraspError, Result};
use crate::geometry::{estimate_normals, sample_mesh, SurfacePointCloud, TriangleMesh};

/// Default number of object surface samples.
pub const DEFAULT_OBJECT_SAMPLES: usize = 2000;

/// What an object file contained.
#[derive(Debug, Clone, PartialEq)]
pub enum ObjectData {
    Mesh(TriangleMesh),
    /// Raw cloud, normals present only if the file had them.
    Cloud(PlyData),
}

pub fn read_object_file(path: &Path) -> Result<ObjectData> {
    let bytes = std::fs::read(path).map_err(|e| GraspError::io(path, e))?;
    let ext = path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase);
    match ext.as_deref() {
        Some("obj") => {
            let text = std::str::from_utf8(&bytes).map_err(|e| GraspError::parse(path, format!("byte {}: not UTF-8", e.valid_up_to())))?;
            parse_obj(text).map(ObjectData::Mesh).map_err(|m| GraspError::parse(path, m))
        }
        Some("ply") => {
            let data = parse_ply(&bytes).map_err(|m| GraspError::parse(path, m))?;
            if data.faces.is_empty() {
                if data.vertices.is_empty() {
                    return Err(GraspError::parse(path, "no vertices"));
                }
                Ok(ObjectData::Cloud(data))
            } else {
                let mut mesh = TriangleMesh {
                    vertices: data.vertices,
                    faces: Vec::new(),
                };
                for f in &data.faces {
                    for k in 1..f.len().saturating_sub(1) {
                        mesh.faces.push([f[0], f[k], f[k + 1]]);
                    }
                }
                Ok(ObjectData::Mesh(mesh))
            }
        }
        _ => Err(GraspError::parse(path, "unsupported object format (expected .obj or .ply)")),
    }
}

/// Loads an object as a surface cloud. Meshes are sampled with `samples`
/// points; raw clouds are used as-is, with normals estimated when missing.
pub fn load_object(path: &Path, samples: usize, seed: u64) -> Result<SurfacePointCloud> {
    match read_object_file(path)? {
        ObjectData::Mesh(mesh) => sample_mesh(&mesh.triangles(), samples, seed).map_err(|e| GraspError::parse(path, e.to_string())),
        ObjectData::Cloud(data) => {
            let normals = match data.normals {
                Some(n) => n,
                None => estimate_normals(&data.vertices)?,
            };
            SurfacePointCloud::new(data.vertices, normals)
        }
    }
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| GraspError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| GraspError::io(path, e))
}
