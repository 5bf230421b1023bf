//! Regenerates the bundled hand model and synthetic objects under `data/`.
//!
//! ```text
//! cargo run -p grasp-core --example export_data -- [data_dir]
//! ```

use std::path::PathBuf;

use grasp_core::hand::HandModel;
use grasp_core::io::{write_file, write_obj, write_ply_mesh_binary};
use grasp_core::shapes::{benchmark_suite, on_ground, uv_sphere};

fn main() -> grasp_core::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data"));
    HandModel::default_three_finger().save(&dir.join("hands/default.hand.json"))?;
    for (name, mesh) in benchmark_suite() {
        let header = format!("{name}, resting on z = 0, meters");
        write_file(&dir.join(format!("objects/{name}.obj")), write_obj(&mesh, &header))?;
    }
    let sphere = on_ground(uv_sphere(0.05, 24, 48));
    write_file(&dir.join("objects/sphere_r5.ply"), write_ply_mesh_binary(&sphere.vertices, &sphere.faces))?;
    Ok(())
}
