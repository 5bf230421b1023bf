use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use grasp_core::contact::IndexedCloud;
use grasp_core::hand::{forward_kinematics, HandModel};
use grasp_core::io::{load_object, read_object_file, write_file, write_ply_points, ObjectData};
use grasp_core::planner::{plan as run_plan, PlannerConfig};
use grasp_core::results::{trace_bands_csv, trace_csv, Inputs, ResultsFile, RunManifest};
use grasp_core::{GraspError, Result};
use log::{debug, info};

use crate::{PlanArgs, TraceArgs, ValidateArgs, EXIT_NO_GRASP};

fn load_hand(path: Option<&Path>) -> Result<HandModel> {
    match path {
        Some(p) => HandModel::load(p),
        None => Ok(HandModel::default_three_finger()),
    }
}

fn load_config(a: &PlanArgs) -> Result<PlannerConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| GraspError::Io {
                path: p.clone(),
                source: e,
            })?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            serde_path_to_error::deserialize(de).map_err(|e| GraspError::Parse {
                path: p.clone(),
                message: format!("line {}: {} at `{}`", e.inner().line(), e.inner(), e.path()),
            })?
        }
        None => PlannerConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag { cfg.$field = v; })*
        };
    }
    set!(samples => n_samples, seed => seed, tmax => t_max, beta => beta, w0 => w0,
         w_growth => w_growth, k_clusters => k_clusters, workers => workers);
    cfg.validate()?;
    Ok(cfg)
}

pub fn plan(a: &PlanArgs) -> Result<ExitCode> {
    let cfg = load_config(a)?;
    let model = load_hand(a.hand.as_deref())?;
    let cloud = load_object(&a.object, a.points, cfg.seed)?;
    info!("object {}: {} points; hand: {} points", a.object.display(), cloud.len(), model.point_count());
    let object = IndexedCloud::new(cloud)?;
    let inputs = Inputs {
        object: a.object.display().to_string(),
        hand: a.hand.as_ref().map(|p| p.display().to_string()),
        object_points: object.cloud.len(),
        hand_points: model.point_count(),
    };

    let start = Instant::now();
    let out = run_plan(&object, &model, &cfg)?;
    let elapsed = start.elapsed().as_secs_f64();
    for r in &out.results {
        debug!(
            "sample {}: cluster {}, accepted {}, e_quality {:.4}, e_cls {:.3e}, pairs {}/{}",
            r.sample,
            r.cluster,
            r.accepted,
            r.e_quality(),
            r.e_cls(),
            r.object_pairs,
            r.ground_pairs
        );
    }

    let results = ResultsFile::new(inputs.clone(), &cfg, &out);
    let manifest = RunManifest::new(inputs, &cfg, &out, elapsed);
    write_file(&a.out.join("results.json"), results.to_json())?;
    write_file(&a.out.join("manifest.json"), manifest.to_json())?;
    write_file(&a.out.join("trace.csv"), trace_csv(&results.grasps))?;
    if a.export_clouds {
        let clouds = a.out.join("clouds");
        write_file(
            &clouds.join("object.ply"),
            write_ply_points(object.cloud.points(), object.cloud.normals(), "object surface samples"),
        )?;
        for (rank, r) in out.results.iter().enumerate() {
            let posed = forward_kinematics(&model, &r.state);
            let (points, normals): (Vec<_>, Vec<_>) = posed.surface_points().map(|(_, p, n)| (*p, *n)).unzip();
            let comment = format!("sample {} accepted {}", r.sample, r.accepted);
            write_file(&clouds.join(format!("grasp_{rank:03}.ply")), write_ply_points(&points, &normals, &comment))?;
        }
    }

    let s = &manifest.stats;
    println!(
        "{}: accepted {}/{}, collision-free {}/{}, time {:.3} s ({:.3} s/grasp)",
        a.object.display(),
        s.accepted,
        s.samples,
        s.collision_free,
        s.samples,
        elapsed,
        s.mean_sample_time_s
    );
    println!("wrote {}", a.out.display());
    Ok(if s.accepted > 0 { ExitCode::SUCCESS } else { ExitCode::from(EXIT_NO_GRASP) })
}

pub fn trace(a: &TraceArgs) -> Result<ExitCode> {
    let results = ResultsFile::load(&a.results)?;
    let csv = if a.bands {
        trace_bands_csv(&results.grasps)
    } else if let Some(s) = a.sample {
        let g = results.grasps.iter().filter(|g| g.sample == s).collect::<Vec<_>>();
        if g.is_empty() {
            return Err(GraspError::InvalidConfig(format!(
                "{}: no grasp with sample {s}",
                a.results.display()
            )));
        }
        trace_csv(g)
    } else {
        trace_csv(&results.grasps)
    };
    match &a.out {
        Some(p) => write_file(p, csv)?,
        None => print!("{csv}"),
    }
    Ok(ExitCode::SUCCESS)
}

pub fn validate(a: &ValidateArgs) -> Result<ExitCode> {
    if a.hand.is_some() || a.object.is_none() {
        let model = load_hand(a.hand.as_deref())?;
        println!(
            "hand: {} points, {} fingers, {} joints",
            model.point_count(),
            model.fingers.len(),
            model.total_joints()
        );
    }
    if let Some(path) = &a.object {
        match read_object_file(path)? {
            ObjectData::Mesh(mesh) => {
                println!("object: {} vertices, {} triangles", mesh.vertices.len(), mesh.faces.len());
            }
            ObjectData::Cloud(data) => {
                let normals = if data.normals.is_some() { "with normals" } else { "without normals" };
                println!("object: {} points {normals}", data.vertices.len());
            }
        }
        let cloud = load_object(path, a.points, 0)?;
        println!("object cloud: {} points", cloud.len());
    }
    Ok(ExitCode::SUCCESS)
}
