//! Procedural test and demo meshes.

use std::f64::consts::{PI, TAU};

use super::{Point3, SurfaceMesh};

/// Region label of body vertices on [`statue_blob`].
pub const BODY_LABEL: i32 = 0;
/// Region label of head vertices on [`statue_blob`].
pub const HEAD_LABEL: i32 = 1;

/// Builds a closed surface from `stacks - 1` rings of `slices` vertices plus
/// two poles. Produces `2 * slices * (stacks - 1)` faces.
fn lathe<F>(stacks: u32, slices: u32, top: Point3, bottom: Point3, ring: F) -> SurfaceMesh
where
    F: Fn(u32, f64) -> Point3,
{
    assert!(stacks >= 2 && slices >= 3, "lathe needs stacks >= 2, slices >= 3");
    let mut vertices = vec![top];
    for i in 1..stacks {
        for j in 0..slices {
            let phi = TAU * j as f64 / slices as f64;
            vertices.push(ring(i, phi));
        }
    }
    vertices.push(bottom);
    let south = vertices.len() as u32 - 1;
    let ring_start = |i: u32| 1 + (i - 1) * slices;

    let mut faces = Vec::with_capacity(2 * (slices * (stacks - 1)) as usize);
    for j in 0..slices {
        let jn = (j + 1) % slices;
        faces.push([0, ring_start(1) + j, ring_start(1) + jn]);
    }
    for i in 1..stacks - 1 {
        let (a, b) = (ring_start(i), ring_start(i + 1));
        for j in 0..slices {
            let jn = (j + 1) % slices;
            faces.push([a + j, b + j, b + jn]);
            faces.push([a + j, b + jn, a + jn]);
        }
    }
    let last = ring_start(stacks - 1);
    for j in 0..slices {
        let jn = (j + 1) % slices;
        faces.push([last + j, south, last + jn]);
    }
    SurfaceMesh::new(vertices, faces).expect("lathe produces a valid mesh")
}

/// Latitude/longitude sphere. `stacks = 51, slices = 50` gives 5000 faces.
pub fn uv_sphere(center: Point3, radius: f64, stacks: u32, slices: u32) -> SurfaceMesh {
    lathe(
        stacks,
        slices,
        center + Point3::new(0.0, 0.0, radius),
        center - Point3::new(0.0, 0.0, radius),
        |i, phi| {
            let theta = PI * i as f64 / stacks as f64;
            center
                + Point3::new(
                    radius * theta.sin() * phi.cos(),
                    radius * theta.sin() * phi.sin(),
                    radius * theta.cos(),
                )
        },
    )
}

const BLOB_TOP: f64 = 0.98;
const BLOB_BOTTOM: f64 = -0.97;
const NECK_Z: f64 = 0.45;

fn blob_profile(z: f64) -> f64 {
    let head = (0.28f64.powi(2) - (z - 0.7).powi(2)).max(0.0).sqrt();
    let body = 0.5 * (1.0 - ((z + 0.25) / 0.72).powi(2)).max(0.0).sqrt();
    let neck = if (0.3..=0.6).contains(&z) { 0.13 } else { 0.0 };
    head.max(body).max(neck)
}

/// Head displacement off the vertical axis, growing above the neck.
fn blob_lean(z: f64) -> Point3 {
    let s = ((z - 0.2) / (BLOB_TOP - 0.2)).clamp(0.0, 1.0);
    Point3::new(0.08 * s * s, -0.06 * s * s, 0.0)
}

/// Statue-like closed blob standing along +z in roughly `[-1, 1]`: a wide
/// body with shoulders, a thin neck and a head displaced from the axis.
/// Vertices above the neck carry [`HEAD_LABEL`], the rest [`BODY_LABEL`].
pub fn statue_blob(stacks: u32, slices: u32) -> SurfaceMesh {
    let z_of = |i: u32| BLOB_TOP - (BLOB_TOP - BLOB_BOTTOM) * i as f64 / stacks as f64;
    let mesh = lathe(
        stacks,
        slices,
        Point3::new(0.0, 0.0, BLOB_TOP) + blob_lean(BLOB_TOP),
        Point3::new(0.0, 0.0, BLOB_BOTTOM),
        |i, phi| {
            let z = z_of(i);
            let rho = blob_profile(z);
            let shoulders = if z < NECK_Z { 1.0 + 0.25 * (2.0 * phi).cos().max(0.0) } else { 1.0 };
            Point3::new(rho * shoulders * phi.cos(), 0.8 * rho * phi.sin(), z) + blob_lean(z)
        },
    );
    let labels = mesh
        .vertices()
        .iter()
        .map(|v| if v.z > NECK_Z { HEAD_LABEL } else { BODY_LABEL })
        .collect();
    mesh.with_region_labels(labels).expect("one label per vertex")
}

/// Rectangle in the plane `z = z0`, centered at the origin, split into
/// `nx * ny` quads.
pub fn grid_plane(width: f64, height: f64, nx: u32, ny: u32, z0: f64) -> SurfaceMesh {
    let mut vertices = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            vertices.push(Point3::new(
                -0.5 * width + width * i as f64 / nx as f64,
                -0.5 * height + height * j as f64 / ny as f64,
                z0,
            ));
        }
    }
    let idx = |i: u32, j: u32| j * (nx + 1) + i;
    let mut faces = Vec::new();
    for j in 0..ny {
        for i in 0..nx {
            faces.push([idx(i, j), idx(i + 1, j), idx(i + 1, j + 1)]);
            faces.push([idx(i, j), idx(i + 1, j + 1), idx(i, j + 1)]);
        }
    }
    SurfaceMesh::new(vertices, faces).expect("grid plane is valid")
}
