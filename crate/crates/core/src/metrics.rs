//! Fixation-distribution descriptors and saliency-map similarity metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point3, SurfaceMesh};
use crate::projection::FixationCloud3D;
use crate::saliency::VoxelGrid;

/// Compactness of a fixation cloud. `mean_wss` is the mean squared distance
/// to the centroid; it equals `var_x + var_y + var_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WssReport {
    pub mean_wss: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub var_z: f64,
}

/// Relative tolerance for the WSS / variance-sum identity.
const WSS_IDENTITY_TOLERANCE: f64 = 1e-9;

/// Weighted centroid, per-axis population variances (divided by the total
/// weight) and mean within-cluster sum of squares. The two sides of the
/// WSS identity are computed separately and checked against each other.
pub fn wss(cloud: &FixationCloud3D) -> Result<WssReport> {
    if cloud.is_empty() {
        return Err(Error::NoFixations);
    }
    let total = cloud.total_weight();
    let weighted = || cloud.points().iter().zip(cloud.weights());
    let centroid = weighted().fold(Point3::ORIGIN, |acc, (&p, &w)| acc + p * w) / total;

    let mut var = [0.0f64; 3];
    for axis in 0..3 {
        let s: f64 = weighted().map(|(p, w)| w * (p[axis] - centroid[axis]).powi(2)).sum();
        var[axis] = s / total;
    }
    let mean_wss = weighted()
        .map(|(&p, &w)| w * (p - centroid).norm_squared())
        .sum::<f64>()
        / total;

    let sum_var = var[0] + var[1] + var[2];
    debug_assert!(
        (mean_wss - sum_var).abs() <= WSS_IDENTITY_TOLERANCE * mean_wss.abs().max(f64::MIN_POSITIVE),
        "WSS identity violated: {mean_wss} vs {sum_var}"
    );
    Ok(WssReport {
        mean_wss,
        var_x: var[0],
        var_y: var[1],
        var_z: var[2],
    })
}

/// Difference in compactness; 0 means equally compact.
pub fn wss_diff(a: &FixationCloud3D, b: &FixationCloud3D) -> Result<f64> {
    Ok(wss(a)?.mean_wss - wss(b)?.mean_wss)
}

/// Peak and mean over all voxels of the grid as given (callers pass the
/// sum-normalized map).
pub fn map_stats(grid: &VoxelGrid) -> (f64, f64) {
    let n = grid.len().max(1) as f64;
    (grid.max(), grid.sum() / n)
}

fn check_layout(a: &VoxelGrid, b: &VoxelGrid) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch {
            a: a.dims(),
            b: b.dims(),
        });
    }
    if a.origin() != b.origin() || a.voxel_size() != b.voxel_size() {
        return Err(Error::InvalidGrid("maps cover different volumes".into()));
    }
    Ok(())
}

/// Pearson linear correlation coefficient of the flattened voxel values.
pub fn cc(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    check_layout(a, b)?;
    let n = a.len() as f64;
    let mean_a = a.sum() / n;
    let mean_b = b.sum() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.values().iter().zip(b.values()) {
        let (dx, dy) = (x - mean_a, y - mean_b);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::ConstantMap);
    }
    Ok((sab / (saa.sqrt() * sbb.sqrt())).clamp(-1.0, 1.0))
}

/// Histogram intersection of the two sum-normalized maps.
pub fn sim(a: &VoxelGrid, b: &VoxelGrid) -> Result<f64> {
    check_layout(a, b)?;
    let (sa, sb) = (a.sum(), b.sum());
    if !(sa > 0.0 && sb > 0.0) {
        return Err(Error::EmptySaliencyMap);
    }
    let s: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| (x / sa).min(y / sb))
        .sum();
    Ok(s.clamp(0.0, 1.0))
}

/// Per-condition description of one pooled fixation map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionReport {
    pub mean_wss: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub var_z: f64,
    pub map_max: f64,
    pub map_mean: f64,
    pub n_fixations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionReport>,
}

/// `cloud` gives the WSS terms; `saliency` must be the sum-normalized map.
pub fn distribution_report(cloud: &FixationCloud3D, saliency: &VoxelGrid) -> Result<DistributionReport> {
    let w = wss(cloud)?;
    let (map_max, map_mean) = map_stats(saliency);
    Ok(DistributionReport {
        mean_wss: w.mean_wss,
        var_x: w.var_x,
        var_y: w.var_y,
        var_z: w.var_z,
        map_max,
        map_mean,
        n_fixations: cloud.len(),
        regions: None,
    })
}

/// Pairwise comparison of two conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub cc: f64,
    pub sim: f64,
    pub wss_diff: f64,
}

pub fn similarity_report(
    cloud_a: &FixationCloud3D,
    map_a: &VoxelGrid,
    cloud_b: &FixationCloud3D,
    map_b: &VoxelGrid,
) -> Result<SimilarityReport> {
    Ok(SimilarityReport {
        cc: cc(map_a, map_b)?,
        sim: sim(map_a, map_b)?,
        wss_diff: wss_diff(cloud_a, cloud_b)?,
    })
}

/// One value of an analysis report: a condition, a condition pair, or a
/// region breakdown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReportEntry {
    Distribution(DistributionReport),
    Similarity(SimilarityReport),
    Regions(RegionReport),
}

/// Share of fixation weight per mesh region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RegionReport {
    /// Region name (or label number) to fraction of assigned weight. Empty
    /// when no fixation was assigned.
    pub fractions: BTreeMap<String, f64>,
    pub unassigned_count: usize,
}

/// Uniform hash grid over vertices for fixed-radius nearest-vertex queries.
struct VertexIndex<'a> {
    vertices: &'a [Point3],
    cell: f64,
    buckets: std::collections::HashMap<[i64; 3], Vec<u32>>,
}

impl<'a> VertexIndex<'a> {
    fn new(vertices: &'a [Point3], cell: f64) -> Self {
        let mut buckets: std::collections::HashMap<[i64; 3], Vec<u32>> = Default::default();
        for (i, &v) in vertices.iter().enumerate() {
            buckets.entry(Self::key(v, cell)).or_default().push(i as u32);
        }
        Self {
            vertices,
            cell,
            buckets,
        }
    }

    fn key(p: Point3, cell: f64) -> [i64; 3] {
        [p.x, p.y, p.z].map(|c| (c / cell).floor() as i64)
    }

    /// Nearest vertex within `cell` of `p`; ties go to the lowest index.
    fn nearest_within(&self, p: Point3) -> Option<usize> {
        let k = Self::key(p, self.cell);
        let mut best: Option<(f64, u32)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = self.buckets.get(&[k[0] + dx, k[1] + dy, k[2] + dz]) else {
                        continue;
                    };
                    for &i in bucket {
                        let d = p.distance(self.vertices[i as usize]);
                        if d <= self.cell && best.is_none_or(|(bd, bi)| d < bd || (d == bd && i < bi)) {
                            best = Some((d, i));
                        }
                    }
                }
            }
        }
        best.map(|(_, i)| i as usize)
    }
}

/// Assigns each fixation to the region of its nearest labeled vertex when
/// that vertex lies within `max_dist`. `names` maps labels to report keys;
/// unnamed labels are keyed by their number.
pub fn region_fractions(
    cloud: &FixationCloud3D,
    mesh: &SurfaceMesh,
    max_dist: f64,
    names: &BTreeMap<i32, String>,
) -> Result<RegionReport> {
    let labels = mesh.region_labels().ok_or(Error::MissingRegionLabels)?;
    if !(max_dist > 0.0 && max_dist.is_finite()) {
        return Err(Error::InvalidFixation(format!("max_dist {max_dist} must be > 0")));
    }
    let name_of = |l: i32| names.get(&l).cloned().unwrap_or_else(|| l.to_string());
    let mut weights: BTreeMap<String, f64> = labels.iter().map(|&l| (name_of(l), 0.0)).collect();
    let index = VertexIndex::new(mesh.vertices(), max_dist);
    let mut assigned = 0.0;
    let mut unassigned_count = 0;
    for (&p, &w) in cloud.points().iter().zip(cloud.weights()) {
        match index.nearest_within(p) {
            Some(v) => {
                *weights.entry(name_of(labels[v])).or_default() += w;
                assigned += w;
            }
            None => unassigned_count += 1,
        }
    }
    let fractions = if assigned > 0.0 {
        weights.into_iter().map(|(k, w)| (k, w / assigned)).collect()
    } else {
        BTreeMap::new()
    };
    Ok(RegionReport {
        fractions,
        unassigned_count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn line_grid(values: Vec<f64>) -> VoxelGrid {
        VoxelGrid::from_values([values.len(), 1, 1], Point3::ORIGIN, 1.0, values).unwrap()
    }

    fn cloud(ps: &[[f64; 3]]) -> FixationCloud3D {
        FixationCloud3D::from_points(ps.iter().map(|&p| Point3::from_array(p)).collect())
    }

    #[test]
    fn wss_identical_points() {
        let r = wss(&cloud(&[[1.0, 2.0, 3.0]; 4])).unwrap();
        assert_eq!((r.mean_wss, r.var_x, r.var_y, r.var_z), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn wss_two_points() {
        let r = wss(&cloud(&[[0.0; 3], [2.0, 0.0, 0.0]])).unwrap();
        assert_eq!(r.var_x, 1.0);
        assert_eq!(r.var_y, 0.0);
        assert_eq!(r.mean_wss, 1.0);
    }

    #[test]
    fn wss_empty_is_error() {
        assert_eq!(wss(&FixationCloud3D::new()).unwrap_err().to_string(), "no fixations");
    }

    #[test]
    fn wss_diff_scaled_spread() {
        // Doubling x-spread about the centroid quadruples var_x.
        let b = cloud(&[[0.0, 0.0, 0.0], [1.0, 1.0, 0.0], [2.0, 0.0, 1.0], [3.0, 2.0, 0.0]]);
        let cx = 1.5;
        let a = cloud(&[[-1.5, 0.0, 0.0], [0.5, 1.0, 0.0], [2.5, 0.0, 1.0], [4.5, 2.0, 0.0]]);
        assert_eq!(a.points()[0].x, cx - 2.0 * (cx - 0.0));
        let var_x_b = wss(&b).unwrap().var_x;
        let d = wss_diff(&a, &b).unwrap();
        assert!((d - 3.0 * var_x_b).abs() < 1e-12);
        assert_eq!(wss_diff(&b, &a).unwrap(), -d);
        assert_eq!(wss_diff(&b, &b).unwrap(), 0.0);
    }

    #[test]
    fn map_stats_cases() {
        let mut d = VoxelGrid::zeros([2, 2, 2], Point3::ORIGIN, 1.0).unwrap();
        d.set([1, 0, 1], 1.0).unwrap();
        assert_eq!(map_stats(&d), (1.0, 1.0 / 8.0));
        assert_eq!(map_stats(&line_grid(vec![0.25; 4])), (0.25, 0.25));
        assert_eq!(map_stats(&line_grid(vec![0.75, 0.25])), (0.75, 0.5));
    }

    #[test]
    fn cc_cases() {
        let a = line_grid(vec![0.1, 0.5, 0.2, 0.9]);
        assert!((cc(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        assert!((cc(&line_grid(vec![1.0, 0.0]), &line_grid(vec![0.0, 1.0])).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(cc(&a, &line_grid(vec![1.0; 4])), Err(Error::ConstantMap)));
        assert!(matches!(cc(&a, &line_grid(vec![1.0; 3])), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn sim_cases() {
        let a = line_grid(vec![0.1, 0.5, 0.2, 0.9]);
        assert!((sim(&a, &a).unwrap() - 1.0).abs() < 1e-9);
        assert_eq!(sim(&line_grid(vec![1.0, 0.0, 0.0]), &line_grid(vec![0.0, 2.0, 3.0])).unwrap(), 0.0);
        let s = sim(&line_grid(vec![0.7, 0.3]), &line_grid(vec![0.3, 0.7])).unwrap();
        assert!((s - 0.6).abs() < 1e-12);
        assert!(sim(&a, &line_grid(vec![0.0; 4])).is_err());
    }

    fn labeled_mesh() -> SurfaceMesh {
        SurfaceMesh::new(
            vec![Point3::new(0.0, 0.0, 1.0), Point3::new(0.1, 0.0, 1.0), Point3::new(0.0, 0.0, 0.0), Point3::new(0.1, 0.0, 0.0)],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap()
        .with_region_labels(vec![1, 1, 0, 0])
        .unwrap()
    }

    fn names() -> BTreeMap<i32, String> {
        BTreeMap::from([(0, "body".to_string()), (1, "head".to_string())])
    }

    #[test]
    fn region_all_head() {
        let c = cloud(&[[0.0, 0.0, 0.95], [0.1, 0.01, 1.0]]);
        let r = region_fractions(&c, &labeled_mesh(), 0.2, &names()).unwrap();
        assert_eq!(r.fractions["head"], 1.0);
        assert_eq!(r.fractions["body"], 0.0);
        assert_eq!(r.unassigned_count, 0);
    }

    #[test]
    fn region_three_to_one() {
        let c = cloud(&[[0.0, 0.0, 1.0], [0.1, 0.0, 1.0], [0.05, 0.0, 0.9], [0.0, 0.0, 0.1]]);
        let r = region_fractions(&c, &labeled_mesh(), 0.2, &names()).unwrap();
        assert_eq!(r.fractions["head"], 0.75);
        assert_eq!(r.fractions["body"], 0.25);
        let doubled = region_fractions(&c.scaled_weights(2.0), &labeled_mesh(), 0.2, &names()).unwrap();
        assert_eq!(doubled, r);
    }

    #[test]
    fn region_all_far_and_missing_labels() {
        let c = cloud(&[[5.0, 5.0, 5.0], [0.0, 3.0, 0.0]]);
        let r = region_fractions(&c, &labeled_mesh(), 0.2, &names()).unwrap();
        assert_eq!(r.unassigned_count, 2);
        assert!(r.fractions.is_empty());
        let plain = SurfaceMesh::new(labeled_mesh().vertices().to_vec(), vec![]).unwrap();
        assert!(matches!(region_fractions(&c, &plain, 0.2, &names()), Err(Error::MissingRegionLabels)));
    }

    #[test]
    fn unnamed_labels_use_numbers() {
        let c = cloud(&[[0.0, 0.0, 0.0]]);
        let r = region_fractions(&c, &labeled_mesh(), 0.2, &BTreeMap::new()).unwrap();
        assert_eq!(r.fractions["0"], 1.0);
    }

    fn grid_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
        (2usize..40).prop_flat_map(|n| {
            (
                prop::collection::vec(0.0f64..10.0, n),
                prop::collection::vec(0.0f64..10.0, n),
            )
        })
    }

    proptest! {
        #[test]
        fn cc_and_sim_symmetric_and_bounded((a, b) in grid_pair()) {
            let (ga, gb) = (line_grid(a), line_grid(b));
            if let (Ok(x), Ok(y)) = (cc(&ga, &gb), cc(&gb, &ga)) {
                prop_assert_eq!(x, y);
                prop_assert!((-1.0..=1.0).contains(&x));
            }
            if let (Ok(x), Ok(y)) = (sim(&ga, &gb), sim(&gb, &ga)) {
                prop_assert_eq!(x, y);
                prop_assert!((0.0..=1.0).contains(&x));
            }
        }

        #[test]
        fn cc_affine_invariant((a, b) in grid_pair(), alpha in 0.1f64..10.0, beta in 0.0f64..5.0) {
            let (ga, gb) = (line_grid(a.clone()), line_grid(b));
            let ta = line_grid(a.iter().map(|v| alpha * v + beta).collect());
            if let (Ok(x), Ok(y)) = (cc(&ga, &gb), cc(&ta, &gb)) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn wss_translation_invariant(
            pts in prop::collection::vec(prop::array::uniform3(-5.0f64..5.0), 1..30),
            shift in prop::array::uniform3(-100.0f64..100.0),
        ) {
            let a = wss(&cloud(&pts)).unwrap();
            let moved: Vec<[f64; 3]> = pts.iter().map(|p| [p[0] + shift[0], p[1] + shift[1], p[2] + shift[2]]).collect();
            let b = wss(&cloud(&moved)).unwrap();
            prop_assert!((a.mean_wss - b.mean_wss).abs() < 1e-9);
            prop_assert!((a.mean_wss - (a.var_x + a.var_y + a.var_z)).abs() <= 1e-9 * a.mean_wss.max(1e-300));
        }
    }
}
