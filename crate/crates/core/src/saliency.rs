//! Voxelized 3D saliency maps: binning of fixation clouds, separable
//! Gaussian filtering, normalization and transfer onto mesh vertex colors.

use serde::{Deserialize, Serialize};

use crate::coordmap::ScaleSpec;
use crate::error::{Error, Result};
use crate::geometry::{Point3, SurfaceMesh};
use crate::projection::FixationCloud3D;

/// Regular grid of cubic voxels. Values are stored x-fastest:
/// `index = x + nx * (y + ny * z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct VoxelGrid {
    dims: [usize; 3],
    origin: Point3,
    voxel_size: f64,
    values: Vec<f64>,
}

impl VoxelGrid {
    pub fn zeros(dims: [usize; 3], origin: Point3, voxel_size: f64) -> Result<Self> {
        Self::validate_layout(dims, origin, voxel_size)?;
        Ok(Self {
            dims,
            origin,
            voxel_size,
            values: vec![0.0; dims.iter().product()],
        })
    }

    pub fn from_values(
        dims: [usize; 3],
        origin: Point3,
        voxel_size: f64,
        values: Vec<f64>,
    ) -> Result<Self> {
        Self::validate_layout(dims, origin, voxel_size)?;
        let n: usize = dims.iter().product();
        if values.len() != n {
            return Err(Error::InvalidGrid(format!(
                "{dims:?} grid needs {n} values, got {}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidGrid(format!(
                "voxel values must be finite and >= 0, found {v}"
            )));
        }
        Ok(Self {
            dims,
            origin,
            voxel_size,
            values,
        })
    }

    fn validate_layout(dims: [usize; 3], origin: Point3, voxel_size: f64) -> Result<()> {
        if dims.contains(&0) {
            return Err(Error::InvalidGrid(format!("dimensions {dims:?} must be >= 1")));
        }
        if !(voxel_size > 0.0 && voxel_size.is_finite()) {
            return Err(Error::InvalidGrid(format!("voxel size {voxel_size} must be > 0")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid("non-finite origin".into()));
        }
        Ok(())
    }

    /// Cubic grid of `n^3` voxels centered on the scale volume, with side
    /// equal to the largest range grown by `padding` on each side.
    pub fn covering(scale: &ScaleSpec, n: usize, padding: f64) -> Result<Self> {
        Self::covering_dims(scale, [n; 3], padding)
    }

    /// Grid with the given dims whose cubic voxels cover the padded scale
    /// volume along its largest axis.
    pub fn covering_dims(scale: &ScaleSpec, dims: [usize; 3], padding: f64) -> Result<Self> {
        if dims.contains(&0) {
            return Err(Error::InvalidGrid(format!("dimensions {dims:?} must be >= 1")));
        }
        let bounds = scale.bounds();
        let ext = bounds.extent();
        let side_needed = (0..3)
            .map(|i| ext[i] * (1.0 + 2.0 * padding) / dims[i] as f64)
            .fold(0.0f64, f64::max);
        let voxel_size = if side_needed > 0.0 { side_needed } else { 1.0 };
        let center = bounds.center();
        let origin = Point3::new(
            center.x - 0.5 * voxel_size * dims[0] as f64,
            center.y - 0.5 * voxel_size * dims[1] as f64,
            center.z - 0.5 * voxel_size * dims[2] as f64,
        );
        Self::zeros(dims, origin, voxel_size)
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn origin(&self) -> Point3 {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(0.0, f64::max)
    }

    pub fn index(&self, [x, y, z]: [usize; 3]) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    pub fn get(&self, ijk: [usize; 3]) -> f64 {
        self.values[self.index(ijk)]
    }

    pub fn set(&mut self, ijk: [usize; 3], v: f64) -> Result<()> {
        if !(v.is_finite() && v >= 0.0) {
            return Err(Error::InvalidGrid(format!("voxel value {v} must be finite and >= 0")));
        }
        let i = self.index(ijk);
        self.values[i] = v;
        Ok(())
    }

    /// Same layout, new values (unchecked; callers keep values finite and >= 0).
    fn with_values(&self, values: Vec<f64>) -> Self {
        Self {
            values,
            ..self.clone()
        }
    }

    /// Voxel containing `p`. A point on a shared face belongs to the
    /// higher-index voxel; the outer faces of the grid count as inside.
    pub fn voxel_of(&self, p: Point3) -> Option<[usize; 3]> {
        let mut ijk = [0usize; 3];
        for (axis, slot) in ijk.iter_mut().enumerate() {
            let u = (p[axis] - self.origin[axis]) / self.voxel_size;
            let n = self.dims[axis];
            if !(u >= 0.0 && u <= n as f64) {
                return None;
            }
            *slot = (u.floor() as usize).min(n - 1);
        }
        Some(ijk)
    }

    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if !(factor >= 0.0 && factor.is_finite()) {
            return Err(Error::InvalidGrid(format!("scale factor {factor} must be >= 0")));
        }
        Ok(self.with_values(self.values.iter().map(|v| v * factor).collect()))
    }
}

/// Accumulates each point's weight into the voxel containing it.
pub fn voxelize(
    cloud: &FixationCloud3D,
    dims: [usize; 3],
    origin: Point3,
    voxel_size: f64,
) -> Result<VoxelGrid> {
    let grid = VoxelGrid::zeros(dims, origin, voxel_size)?;
    voxelize_into(cloud, grid)
}

/// [`voxelize`] onto the layout of an existing (typically zero) grid.
pub fn voxelize_into(cloud: &FixationCloud3D, mut grid: VoxelGrid) -> Result<VoxelGrid> {
    for (&p, &w) in cloud.points().iter().zip(cloud.weights()) {
        let ijk = grid.voxel_of(p).ok_or(Error::OutsideVoxelGrid { point: p })?;
        let i = grid.index(ijk);
        grid.values[i] += w;
    }
    Ok(grid)
}

/// Normalized discrete Gaussian with radius `ceil(3 * sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as usize;
    let mut k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Separable 3D Gaussian filter. Equivalent to zero-padding the grid by the
/// kernel radius, convolving, and cropping back to the input dims: mass that
/// spreads past the border is lost, all other mass is kept.
pub fn gaussian_blur3d(grid: &VoxelGrid, sigma_voxels: f64) -> Result<VoxelGrid> {
    if !(sigma_voxels > 0.0 && sigma_voxels.is_finite()) {
        return Err(Error::InvalidGrid(format!("sigma {sigma_voxels} must be finite and > 0")));
    }
    let kernel = gaussian_kernel(sigma_voxels);
    let mut values = grid.values.clone();
    let mut scratch = vec![0.0; values.len()];
    for axis in 0..3 {
        convolve_axis(&values, &mut scratch, grid.dims, axis, &kernel);
        std::mem::swap(&mut values, &mut scratch);
    }
    Ok(grid.with_values(values))
}

fn convolve_axis(src: &[f64], dst: &mut [f64], dims: [usize; 3], axis: usize, kernel: &[f64]) {
    let radius = (kernel.len() / 2) as isize;
    let n = dims[axis] as isize;
    let stride = match axis {
        0 => 1,
        1 => dims[0],
        _ => dims[0] * dims[1],
    };
    let mut line = vec![0.0; n as usize];
    // Every line along `axis` starts at a voxel whose `axis` coordinate is 0.
    for start in 0..src.len() {
        if (start / stride) % dims[axis] != 0 {
            continue;
        }
        for (i, v) in line.iter_mut().enumerate() {
            *v = src[start + i * stride];
        }
        for i in 0..n {
            let lo = (i - radius).max(0);
            let hi = (i + radius).min(n - 1);
            let mut acc = 0.0;
            for j in lo..=hi {
                acc += line[j as usize] * kernel[(j - i + radius) as usize];
            }
            dst[start + i as usize * stride] = acc;
        }
    }
}

/// Divides by the total so values sum to 1.
pub fn normalize(grid: &VoxelGrid) -> Result<VoxelGrid> {
    let sum = grid.sum();
    if !(sum > 0.0) {
        return Err(Error::EmptySaliencyMap);
    }
    Ok(grid.with_values(grid.values.iter().map(|v| v / sum).collect()))
}

/// Piecewise-linear colormap over `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColormapSpec {
    anchors: Vec<(f64, [f64; 3])>,
}

impl ColormapSpec {
    pub fn new(anchors: Vec<(f64, [f64; 3])>) -> Result<Self> {
        if anchors.len() < 2 {
            return Err(Error::InvalidColormap("need at least two anchors".into()));
        }
        if anchors[0].0 != 0.0 || anchors[anchors.len() - 1].0 != 1.0 {
            return Err(Error::InvalidColormap("anchors must start at 0 and end at 1".into()));
        }
        if anchors.windows(2).any(|w| !(w[1].0 > w[0].0)) {
            return Err(Error::InvalidColormap("anchor positions must increase strictly".into()));
        }
        if anchors.iter().flat_map(|a| a.1).any(|c| !(0.0..=1.0).contains(&c)) {
            return Err(Error::InvalidColormap("anchor colors must lie in [0, 1]".into()));
        }
        Ok(Self { anchors })
    }

    /// Blue-cyan-green-yellow-red ramp.
    pub fn jet() -> Self {
        Self::new(vec![
            (0.0, [0.0, 0.0, 0.5]),
            (0.125, [0.0, 0.0, 1.0]),
            (0.375, [0.0, 1.0, 1.0]),
            (0.625, [1.0, 1.0, 0.0]),
            (0.875, [1.0, 0.0, 0.0]),
            (1.0, [0.5, 0.0, 0.0]),
        ])
        .expect("valid anchors")
    }

    pub fn anchors(&self) -> &[(f64, [f64; 3])] {
        &self.anchors
    }

    pub fn sample(&self, t: f64) -> [f64; 3] {
        let t = if t.is_nan() { 0.0 } else { t.clamp(0.0, 1.0) };
        let i = self
            .anchors
            .windows(2)
            .position(|w| t <= w[1].0)
            .unwrap_or(self.anchors.len() - 2);
        let (p0, c0) = self.anchors[i];
        let (p1, c1) = self.anchors[i + 1];
        let s = (t - p0) / (p1 - p0);
        [0, 1, 2].map(|k| c0[k] + (c1[k] - c0[k]) * s)
    }
}

impl Default for ColormapSpec {
    fn default() -> Self {
        Self::jet()
    }
}

/// Colors each vertex by the value of its containing voxel, scaled by the
/// grid maximum. An all-zero grid maps every vertex to `colormap(0)`.
pub fn colorize_mesh(
    mesh: &SurfaceMesh,
    grid: &VoxelGrid,
    colormap: &ColormapSpec,
) -> Result<SurfaceMesh> {
    let max = grid.max();
    let colors = mesh
        .vertices()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let ijk = grid.voxel_of(v).ok_or(Error::VertexOutsideGrid { index: i })?;
            let t = if max > 0.0 { grid.get(ijk) / max } else { 0.0 };
            Ok(colormap.sample(t))
        })
        .collect::<Result<Vec<_>>>()?;
    mesh.clone().with_vertex_colors(colors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cube(n: usize) -> VoxelGrid {
        VoxelGrid::zeros([n; 3], Point3::ORIGIN, 1.0).unwrap()
    }

    fn delta(n: usize, at: [usize; 3], v: f64) -> VoxelGrid {
        let mut g = cube(n);
        g.set(at, v).unwrap();
        g
    }

    #[test]
    fn voxelize_empty_and_single() {
        let g = voxelize(&FixationCloud3D::new(), [4; 3], Point3::ORIGIN, 0.5).unwrap();
        assert_eq!(g.sum(), 0.0);
        let c = FixationCloud3D::from_points(vec![Point3::new(1.2, 0.1, 1.9)]);
        let g = voxelize(&c, [4; 3], Point3::ORIGIN, 0.5).unwrap();
        assert_eq!(g.get([2, 0, 3]), 1.0);
        assert_eq!(g.sum(), 1.0);
    }

    #[test]
    fn voxelize_conserves_mass() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let pts: Vec<_> = (0..1000)
            .map(|_| Point3::new(rng.random_range(0.0..2.0), rng.random_range(0.0..2.0), rng.random_range(0.0..2.0)))
            .collect();
        let g = voxelize(&FixationCloud3D::from_points(pts), [8; 3], Point3::ORIGIN, 0.25).unwrap();
        assert_eq!(g.sum(), 1000.0);
    }

    #[test]
    fn boundary_points_go_to_higher_voxel() {
        let c = FixationCloud3D::from_points(vec![Point3::new(0.5, 0.0, 0.0), Point3::new(1.0, 1.0, 1.0)]);
        let g = voxelize(&c, [2; 3], Point3::ORIGIN, 0.5).unwrap();
        assert_eq!(g.get([1, 0, 0]), 1.0);
        // Outer face of the grid stays inside the last voxel.
        assert_eq!(g.get([1, 1, 1]), 1.0);
    }

    #[test]
    fn voxelize_rejects_outside_point() {
        let c = FixationCloud3D::from_points(vec![Point3::new(3.0, 0.0, 0.0)]);
        let err = voxelize(&c, [2; 3], Point3::ORIGIN, 0.5).unwrap_err();
        assert!(err.to_string().starts_with("fixation outside voxel grid: (3, 0, 0)"));
    }

    #[test]
    fn blur_peak_matches_kernel_center() {
        let g = delta(15, [7; 3], 1.0);
        let b = gaussian_blur3d(&g, 1.0).unwrap();
        // Independent oracle: direct evaluation of the normalized 1D kernel.
        let w: Vec<f64> = (-3i32..=3).map(|d| (-(d * d) as f64 / 2.0).exp()).collect();
        let c = 1.0 / w.iter().sum::<f64>();
        assert!((b.get([7; 3]) - c * c * c).abs() < 1e-15);
        assert!((b.sum() - 1.0).abs() < 1e-9);
        // Off-center response is the separable product.
        let w1 = w[4] * c;
        assert!((b.get([8, 7, 7]) - w1 * c * c).abs() < 1e-15);
    }

    #[test]
    fn blur_loses_mass_only_past_border() {
        let g = delta(5, [0, 2, 2], 1.0);
        let b = gaussian_blur3d(&g, 1.0).unwrap();
        assert!(b.sum() < 1.0);
        assert!(b.values().iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn blur_is_translation_equivariant() {
        let a = gaussian_blur3d(&delta(21, [9, 10, 10], 1.0), 1.5).unwrap();
        let b = gaussian_blur3d(&delta(21, [10, 10, 10], 1.0), 1.5).unwrap();
        for x in 1..21 {
            for y in 0..21 {
                for z in 0..21 {
                    assert!((a.get([x - 1, y, z]) - b.get([x, y, z])).abs() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn blur_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 9;
        let rand_grid = |rng: &mut ChaCha8Rng| {
            let vals = (0..n * n * n).map(|_| rng.random_range(0.0..1.0)).collect();
            VoxelGrid::from_values([n; 3], Point3::ORIGIN, 1.0, vals).unwrap()
        };
        let (ga, gb) = (rand_grid(&mut rng), rand_grid(&mut rng));
        let (a, b) = (2.5, 0.75);
        let combo = VoxelGrid::from_values(
            [n; 3],
            Point3::ORIGIN,
            1.0,
            ga.values().iter().zip(gb.values()).map(|(x, y)| a * x + b * y).collect(),
        )
        .unwrap();
        let lhs = gaussian_blur3d(&combo, 1.2).unwrap();
        let (ba, bb) = (gaussian_blur3d(&ga, 1.2).unwrap(), gaussian_blur3d(&gb, 1.2).unwrap());
        for i in 0..lhs.len() {
            let rhs = a * ba.values()[i] + b * bb.values()[i];
            assert!((lhs.values()[i] - rhs).abs() < 1e-9);
        }
    }

    #[test]
    fn blur_rejects_bad_sigma() {
        assert!(gaussian_blur3d(&cube(3), 0.0).is_err());
        assert!(gaussian_blur3d(&cube(3), f64::NAN).is_err());
    }

    #[test]
    fn normalize_cases() {
        let g = VoxelGrid::from_values([4, 1, 1], Point3::ORIGIN, 1.0, vec![1.0, 2.0, 0.5, 0.5]).unwrap();
        let n = normalize(&g).unwrap();
        assert!((n.sum() - 1.0).abs() < 1e-12);
        let again = normalize(&n).unwrap();
        for (a, b) in n.values().iter().zip(again.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let d = normalize(&delta(3, [1, 1, 1], 7.0)).unwrap();
        assert_eq!(d.get([1, 1, 1]), 1.0);
        assert!(matches!(normalize(&cube(3)), Err(Error::EmptySaliencyMap)));
    }

    #[test]
    fn colormap_validation_and_sampling() {
        assert!(ColormapSpec::new(vec![(0.0, [0.0; 3])]).is_err());
        assert!(ColormapSpec::new(vec![(0.1, [0.0; 3]), (1.0, [1.0; 3])]).is_err());
        assert!(ColormapSpec::new(vec![(0.0, [0.0; 3]), (0.0, [0.5; 3]), (1.0, [1.0; 3])]).is_err());
        let gray = ColormapSpec::new(vec![(0.0, [0.0; 3]), (1.0, [1.0; 3])]).unwrap();
        assert_eq!(gray.sample(0.25), [0.25; 3]);
        assert_eq!(gray.sample(2.0), [1.0; 3]);
        let jet = ColormapSpec::jet();
        assert_eq!(jet.sample(0.5), [0.5, 1.0, 0.5]);
    }

    fn mesh_in_unit_cube() -> SurfaceMesh {
        SurfaceMesh::new(
            vec![Point3::new(0.25, 0.25, 0.25), Point3::new(0.75, 0.25, 0.25), Point3::new(0.25, 0.75, 0.75)],
            vec![[0, 1, 2]],
        )
        .unwrap()
    }

    #[test]
    fn colorize_uniform_zero_and_hot() {
        let cm = ColormapSpec::jet();
        let mesh = mesh_in_unit_cube();
        let uniform = VoxelGrid::from_values([2; 3], Point3::ORIGIN, 0.5, vec![0.3; 8]).unwrap();
        let m = colorize_mesh(&mesh, &uniform, &cm).unwrap();
        assert!(m.vertex_colors().unwrap().iter().all(|c| *c == cm.sample(1.0)));

        let zero = VoxelGrid::zeros([2; 3], Point3::ORIGIN, 0.5).unwrap();
        let m = colorize_mesh(&mesh, &zero, &cm).unwrap();
        assert!(m.vertex_colors().unwrap().iter().all(|c| *c == cm.sample(0.0)));

        let mut hot = zero.clone();
        hot.set([1, 0, 0], 5.0).unwrap();
        let m = colorize_mesh(&mesh, &hot, &cm).unwrap();
        let colors = m.vertex_colors().unwrap();
        assert_eq!(colors[1], cm.sample(1.0));
        assert_eq!(colors[0], cm.sample(0.0));
        assert_eq!(colors[2], cm.sample(0.0));

        let scaled = colorize_mesh(&mesh, &hot.scaled(3.0).unwrap(), &cm).unwrap();
        assert_eq!(scaled.vertex_colors(), m.vertex_colors());
    }

    #[test]
    fn colorize_rejects_vertex_outside() {
        let mesh = SurfaceMesh::new(
            vec![Point3::new(0.25, 0.25, 0.25), Point3::new(2.0, 0.0, 0.0), Point3::new(0.0, 0.5, 0.0)],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let g = VoxelGrid::zeros([2; 3], Point3::ORIGIN, 0.5).unwrap();
        assert!(matches!(colorize_mesh(&mesh, &g, &ColormapSpec::jet()), Err(Error::VertexOutsideGrid { index: 1 })));
    }

    #[test]
    fn covering_grid_contains_scale_volume() {
        let s = ScaleSpec::new([-1.0, 0.0, 2.0], [2.0, 1.0, 4.0]).unwrap();
        let g = VoxelGrid::covering(&s, 16, 0.05).unwrap();
        let b = s.bounds();
        for p in [b.min, b.max, b.center()] {
            assert!(g.voxel_of(p).is_some());
        }
        assert!((g.voxel_size() * 16.0 - 4.4).abs() < 1e-12);
    }
}
