//! Procedural test objects. All meshes are wound counter-clockwise seen from
//! outside.

use std::f64::consts::TAU;

use crate::geometry::{TriangleMesh, Vec3};

fn push_quad(mesh: &mut TriangleMesh, a: usize, b: usize, c: usize, d: usize) {
    mesh.faces.push([a, b, c]);
    mesh.faces.push([a, c, d]);
}

/// Axis-aligned box centered at the origin with full side lengths `size`.
pub fn cuboid(size: Vec3) -> TriangleMesh {
    let h = size * 0.5;
    let mut m = TriangleMesh::default();
    for i in 0..8 {
        let sx = if i & 1 == 0 { -h.x } else { h.x };
        let sy = if i & 2 == 0 { -h.y } else { h.y };
        let sz = if i & 4 == 0 { -h.z } else { h.z };
        m.vertices.push(Vec3::new(sx, sy, sz));
    }
    push_quad(&mut m, 0, 2, 3, 1); // -z
    push_quad(&mut m, 4, 5, 7, 6); // +z
    push_quad(&mut m, 0, 1, 5, 4); // -y
    push_quad(&mut m, 2, 6, 7, 3); // +y
    push_quad(&mut m, 0, 4, 6, 2); // -x
    push_quad(&mut m, 1, 3, 7, 5); // +x
    m
}

pub fn uv_sphere(radius: f64, stacks: usize, slices: usize) -> TriangleMesh {
    let mut m = TriangleMesh::default();
    m.vertices.push(Vec3::new(0.0, 0.0, -radius));
    for i in 1..stacks {
        let theta = std::f64::consts::PI * i as f64 / stacks as f64;
        let (z, r) = (-radius * theta.cos(), radius * theta.sin());
        for j in 0..slices {
            let phi = TAU * j as f64 / slices as f64;
            m.vertices.push(Vec3::new(r * phi.cos(), r * phi.sin(), z));
        }
    }
    m.vertices.push(Vec3::new(0.0, 0.0, radius));
    let top = m.vertices.len() - 1;
    let ring = |i: usize, j: usize| 1 + (i - 1) * slices + j % slices;
    for j in 0..slices {
        m.faces.push([0, ring(1, j + 1), ring(1, j)]);
        m.faces.push([top, ring(stacks - 1, j), ring(stacks - 1, j + 1)]);
    }
    for i in 1..stacks - 1 {
        for j in 0..slices {
            push_quad(&mut m, ring(i, j), ring(i, j + 1), ring(i + 1, j + 1), ring(i + 1, j));
        }
    }
    m
}

/// Upright cylinder centered at the origin.
pub fn cylinder(radius: f64, height: f64, slices: usize) -> TriangleMesh {
    let mut m = TriangleMesh::default();
    let hz = height * 0.5;
    for j in 0..slices {
        let phi = TAU * j as f64 / slices as f64;
        m.vertices.push(Vec3::new(radius * phi.cos(), radius * phi.sin(), -hz));
        m.vertices.push(Vec3::new(radius * phi.cos(), radius * phi.sin(), hz));
    }
    let bottom = m.vertices.len();
    m.vertices.push(Vec3::new(0.0, 0.0, -hz));
    m.vertices.push(Vec3::new(0.0, 0.0, hz));
    let top = bottom + 1;
    for j in 0..slices {
        let k = (j + 1) % slices;
        push_quad(&mut m, 2 * j, 2 * k, 2 * k + 1, 2 * j + 1);
        m.faces.push([bottom, 2 * k, 2 * j]);
        m.faces.push([top, 2 * j + 1, 2 * k + 1]);
    }
    m
}

/// Torus lying in the xy plane, centered at the origin.
pub fn torus(major: f64, minor: f64, rings: usize, sides: usize) -> TriangleMesh {
    let mut m = TriangleMesh::default();
    for i in 0..rings {
        let u = TAU * i as f64 / rings as f64;
        for j in 0..sides {
            let v = TAU * j as f64 / sides as f64;
            let r = major + minor * v.cos();
            m.vertices.push(Vec3::new(r * u.cos(), r * u.sin(), minor * v.sin()));
        }
    }
    let idx = |i: usize, j: usize| (i % rings) * sides + j % sides;
    for i in 0..rings {
        for j in 0..sides {
            push_quad(&mut m, idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
        }
    }
    m
}

/// Extrudes a counter-clockwise polygon in the xz plane along y, centered on
/// y = 0. The polygon must be star-shaped around its first vertex.
pub fn extrude_xz(polygon: &[(f64, f64)], depth: f64) -> TriangleMesh {
    let n = polygon.len();
    let hy = depth * 0.5;
    let mut m = TriangleMesh::default();
    for &(x, z) in polygon {
        m.vertices.push(Vec3::new(x, -hy, z));
    }
    for &(x, z) in polygon {
        m.vertices.push(Vec3::new(x, hy, z));
    }
    for i in 1..n - 1 {
        m.faces.push([0, i + 1, i]);
        m.faces.push([n, n + i, n + i + 1]);
    }
    for i in 0..n {
        let k = (i + 1) % n;
        push_quad(&mut m, i, k, n + k, n + i);
    }
    // (x, z) counter-clockwise faces +y, so the loops above wind inward
    for f in &mut m.faces {
        f.swap(1, 2);
    }
    m
}

/// L-shaped bracket: a base plate with an upright flange at -x.
pub fn l_bracket(length: f64, height: f64, depth: f64, thickness: f64) -> TriangleMesh {
    let (x0, x1) = (-length * 0.5, length * 0.5);
    let poly = [
        (x0, 0.0),
        (x1, 0.0),
        (x1, thickness),
        (x0 + thickness, thickness),
        (x0 + thickness, height),
        (x0, height),
    ];
    // star-shaped around (x0, 0)
    extrude_xz(&poly, depth)
}

/// Translates the mesh so it rests on z = 0 and is centered in x and y.
pub fn on_ground(mesh: TriangleMesh) -> TriangleMesh {
    let mut lo = Vec3::repeat(f64::INFINITY);
    let mut hi = Vec3::repeat(f64::NEG_INFINITY);
    for v in &mesh.vertices {
        lo = lo.inf(v);
        hi = hi.sup(v);
    }
    let shift = Vec3::new(-(lo.x + hi.x) * 0.5, -(lo.y + hi.y) * 0.5, -lo.z);
    mesh.translated(shift)
}

/// The six-object benchmark suite, each resting on the ground.
pub fn benchmark_suite() -> Vec<(&'static str, TriangleMesh)> {
    vec![
        ("sphere", on_ground(uv_sphere(0.035, 24, 48))),
        ("box", on_ground(cuboid(Vec3::new(0.06, 0.04, 0.02)))),
        ("cylinder", on_ground(cylinder(0.025, 0.09, 48))),
        ("low_box", on_ground(cuboid(Vec3::new(0.08, 0.05, 0.01)))),
        ("l_bracket", on_ground(l_bracket(0.08, 0.06, 0.04, 0.01))),
        ("torus", on_ground(torus(0.04, 0.013, 48, 24))),
    ]
}
