//! Runs the planner over the synthetic benchmark suite and prints the
//! per-object acceptance counts. Set `VERBOSE=1` for one line per sample.
//!
//! ```text
//! cargo run --release -p grasp-core --example suite -- [seed] [samples]
//! ```

use std::time::Instant;

use grasp_core::contact::IndexedCloud;
use grasp_core::geometry::sample_mesh;
use grasp_core::hand::HandModel;
use grasp_core::planner::{plan, PlannerConfig};
use grasp_core::shapes::{benchmark_suite, on_ground, uv_sphere};

fn main() -> grasp_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let seed: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(7);
    let samples: usize = args.next().and_then(|s| s.parse().ok()).unwrap_or(10);
    let verbose = std::env::var_os("VERBOSE").is_some();
    let model = HandModel::default_three_finger();
    let cfg = PlannerConfig {
        seed,
        n_samples: samples,
        ..PlannerConfig::default()
    };
    let mut objects = benchmark_suite();
    objects.push(("sphere_r5", on_ground(uv_sphere(0.05, 24, 48))));
    for (name, mesh) in objects {
        let cloud = IndexedCloud::new(sample_mesh(&mesh.triangles(), 2000, seed)?)?;
        let start = Instant::now();
        let out = plan(&cloud, &model, &cfg)?;
        let errors = out.results.iter().filter(|r| r.error.is_some()).count();
        let cf = out.results.iter().filter(|r| r.collision_free).count();
        let dec = out.results.iter().filter(|r| r.e_col + r.e_cls() <= r.trace[0].e_penalty).count();
        println!(
            "{name:>10}: accepted {}/{samples}  collision-free {cf}  errors {errors}  penalty-decreased {dec}  {:.2}s",
            out.accepted(),
            start.elapsed().as_secs_f64()
        );
        for r in out.results.iter().filter(|_| verbose) {
            println!(
                "    sample {} cluster {} accepted {} pairs {}/{} e_cls {:.2e} e_quality {:.3e} {}",
                r.sample,
                r.cluster,
                r.accepted,
                r.object_pairs,
                r.ground_pairs,
                r.e_cls(),
                r.e_quality(),
                r.error.as_deref().unwrap_or("")
            );
        }
    }
    Ok(())
}
