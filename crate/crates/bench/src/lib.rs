//! Shared fixtures for the benchmarks.

use gaze3d::coordmap::ScaleSpec;
use gaze3d::geometry::{mesh_bbox, shapes, Camera, Point3, SurfaceMesh};
use gaze3d::saliency::VoxelGrid;

/// Statue blob with about 5000 faces.
pub fn blob() -> SurfaceMesh {
    shapes::statue_blob(51, 50)
}

pub fn camera(size: u32) -> Camera {
    Camera::new(Point3::new(0.0, -4.0, 0.0), Point3::ORIGIN, Point3::new(0.0, 0.0, 1.0), 40.0, size, size)
        .expect("valid camera")
}

pub fn scale(mesh: &SurfaceMesh) -> ScaleSpec {
    ScaleSpec::from_bbox(&mesh_bbox(mesh).expect("non-empty mesh"), 0.01).expect("valid scale")
}

/// Grid of side `n` with a few scattered unit impulses.
pub fn impulses(n: usize) -> VoxelGrid {
    let mut g = VoxelGrid::zeros([n; 3], Point3::ORIGIN, 1.0).expect("valid grid");
    for k in 0..16 {
        let i = (k * 7919) % n;
        let j = (k * 104_729) % n;
        let l = (k * 1_299_709) % n;
        g.set([i, j, l], 1.0).expect("finite value");
    }
    g
}
