//! Planar geometry: convex hulls, polygon areas, density clustering, and a
//! Monte Carlo estimate of the area of a union of hulls clipped to a region.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::vec2::Vec2;

/// Collinearity tolerance for hull construction and containment tests.
const EPS: f64 = 1e-12;

/// Convex polygon with counter-clockwise vertices. May be degenerate
/// (fewer than 3 vertices), in which case its area is zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConvexPolygon {
    pub vertices: Vec<Vec2>,
}

impl ConvexPolygon {
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Closed-set membership test. Degenerate polygons contain nothing.
    pub fn contains(&self, p: Vec2) -> bool {
        if self.is_degenerate() {
            return false;
        }
        let n = self.vertices.len();
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            if (b - a).cross(p - a) < -EPS {
                return false;
            }
        }
        true
    }

    /// Axis-aligned bounding box as (min, max); None when empty.
    pub fn bounding_box(&self) -> Option<(Vec2, Vec2)> {
        let mut it = self.vertices.iter();
        let first = *it.next()?;
        let (mut lo, mut hi) = (first, first);
        for v in it {
            lo.x = lo.x.min(v.x);
            lo.y = lo.y.min(v.y);
            hi.x = hi.x.max(v.x);
            hi.y = hi.y.max(v.y);
        }
        Some((lo, hi))
    }
}

/// Andrew monotone-chain convex hull. Duplicate points are merged and
/// collinear points dropped; fewer than 3 non-collinear input points give a
/// degenerate polygon with area 0.
pub fn convex_hull(points: &[Vec2]) -> ConvexPolygon {
    let mut pts: Vec<Vec2> = points.to_vec();
    pts.sort_by(|a, b| (a.x, a.y).partial_cmp(&(b.x, b.y)).unwrap());
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);

    if pts.len() <= 2 {
        return ConvexPolygon { vertices: pts };
    }

    let turn = |o: Vec2, a: Vec2, b: Vec2| (a - o).cross(b - o);

    let mut hull: Vec<Vec2> = Vec::with_capacity(pts.len() + 1);
    // lower hull
    for &p in &pts {
        while hull.len() >= 2 && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= EPS {
            hull.pop();
        }
        hull.push(p);
    }
    // upper hull
    let lower_len = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower_len && turn(hull[hull.len() - 2], hull[hull.len() - 1], p) <= EPS
        {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop(); // last point repeats the first
    ConvexPolygon { vertices: hull }
}

/// Shoelace area of a convex polygon; 0 for degenerate polygons.
pub fn polygon_area(poly: &ConvexPolygon) -> f64 {
    if poly.is_degenerate() {
        return 0.0;
    }
    let n = poly.vertices.len();
    let mut twice = 0.0;
    for i in 0..n {
        let a = poly.vertices[i];
        let b = poly.vertices[(i + 1) % n];
        twice += a.cross(b);
    }
    (twice / 2.0).max(0.0)
}

/// Per-point cluster labels: -1 is noise, clusters are 0..k-1 in order of
/// discovery.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterLabeling {
    pub labels: Vec<i32>,
}

impl ClusterLabeling {
    pub fn n_clusters(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
    }
}

/// Density-based clustering with the Euclidean metric. Points are scanned in
/// index order, so the labeling is deterministic for a given input order.
pub fn dbscan(points: &[Vec2], eps: f64, min_pts: usize) -> ClusterLabeling {
    assert!(eps > 0.0, "dbscan eps must be positive");
    assert!(min_pts >= 1, "dbscan min_pts must be at least 1");
    let n = points.len();
    let eps2 = eps * eps;
    const UNVISITED: i32 = -2;
    const NOISE: i32 = -1;
    let mut labels = vec![UNVISITED; n];

    let neighbors = |i: usize| -> Vec<usize> {
        (0..n)
            .filter(|&j| (points[j] - points[i]).norm_squared() <= eps2)
            .collect()
    };

    let mut cluster = 0;
    for i in 0..n {
        if labels[i] != UNVISITED {
            continue;
        }
        let nbrs = neighbors(i);
        if nbrs.len() < min_pts {
            labels[i] = NOISE;
            continue;
        }
        labels[i] = cluster;
        let mut queue: Vec<usize> = nbrs;
        let mut head = 0;
        while head < queue.len() {
            let j = queue[head];
            head += 1;
            if labels[j] == NOISE {
                labels[j] = cluster; // border point
            }
            if labels[j] != UNVISITED {
                continue;
            }
            labels[j] = cluster;
            let jn = neighbors(j);
            if jn.len() >= min_pts {
                queue.extend(jn);
            }
        }
        cluster += 1;
    }
    ClusterLabeling { labels }
}

/// Cluster the terminal points, build one hull per cluster, and estimate the
/// area of (union of hulls) ∩ `clip_to` by seeded Monte Carlo membership
/// sampling over the clip region's bounding box. Noise points and clusters
/// with fewer than 3 distinct points contribute zero area. The result is
/// clamped to `[0, polygon_area(clip_to)]`.
pub fn union_area_of_cluster_hulls<R: Rng>(
    terminal_points: &[Vec2],
    eps: f64,
    min_pts: usize,
    clip_to: &ConvexPolygon,
    mc_samples: usize,
    rng: &mut R,
) -> f64 {
    assert!(mc_samples >= 1, "mc_samples must be at least 1");
    let clip_area = polygon_area(clip_to);
    if terminal_points.is_empty() || clip_area <= 0.0 {
        return 0.0;
    }

    let hulls = cluster_hulls(terminal_points, eps, min_pts);
    if hulls.iter().all(|h| h.is_degenerate()) {
        return 0.0;
    }

    let (lo, hi) = clip_to.bounding_box().expect("non-degenerate clip polygon");
    let bbox_area = (hi.x - lo.x) * (hi.y - lo.y);
    let mut hits = 0usize;
    for _ in 0..mc_samples {
        let p = Vec2::new(rng.gen_range(lo.x..=hi.x), rng.gen_range(lo.y..=hi.y));
        if clip_to.contains(p) && hulls.iter().any(|h| h.contains(p)) {
            hits += 1;
        }
    }
    let est = bbox_area * hits as f64 / mc_samples as f64;
    est.clamp(0.0, clip_area)
}

/// The per-cluster hulls behind [`union_area_of_cluster_hulls`], exposed for
/// reachable-set exports.
pub fn cluster_hulls(points: &[Vec2], eps: f64, min_pts: usize) -> Vec<ConvexPolygon> {
    let labeling = dbscan(points, eps, min_pts);
    let k = labeling.n_clusters();
    let mut hulls = Vec::with_capacity(k);
    for c in 0..k as i32 {
        let members: Vec<Vec2> = points
            .iter()
            .zip(&labeling.labels)
            .filter(|(_, &l)| l == c)
            .map(|(&p, _)| p)
            .collect();
        hulls.push(convex_hull(&members));
    }
    hulls
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::substream;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn square_with_center() -> Vec<Vec2> {
        vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
            Vec2::new(0.5, 0.5),
        ]
    }

    #[test]
    fn hull_of_square_corners_plus_center() {
        let hull = convex_hull(&square_with_center());
        assert_eq!(hull.vertices.len(), 4);
        assert!((polygon_area(&hull) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hull_of_collinear_points_is_degenerate() {
        let pts = vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 1.0), Vec2::new(2.0, 2.0)];
        let hull = convex_hull(&pts);
        assert!(hull.is_degenerate());
        assert_eq!(polygon_area(&hull), 0.0);
    }

    #[test]
    fn hull_of_few_points_is_degenerate() {
        assert_eq!(polygon_area(&convex_hull(&[])), 0.0);
        assert_eq!(polygon_area(&convex_hull(&[Vec2::new(1.0, 2.0)])), 0.0);
        let two = convex_hull(&[Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0)]);
        assert_eq!(two.vertices.len(), 2);
        assert_eq!(polygon_area(&two), 0.0);
    }

    fn uniform_disk_points(n: usize, seed: u64) -> Vec<Vec2> {
        let mut rng = substream(seed, 0);
        let mut pts = Vec::with_capacity(n);
        while pts.len() < n {
            let p = Vec2::new(rng.gen_range(-1.0..=1.0), rng.gen_range(-1.0..=1.0));
            if p.norm_squared() <= 1.0 {
                pts.push(p);
            }
        }
        pts
    }

    /// Oracle: the hull of N uniform points in the unit disk approaches the
    /// disk area π from below as N grows; the deficit scales like N^(-2/3).
    #[test]
    fn hull_area_of_uniform_disk_samples() {
        let a_small = polygon_area(&convex_hull(&uniform_disk_points(10_000, 11)));
        assert!(a_small >= 0.97 * PI, "area {a_small} below Monte Carlo bound");
        assert!(a_small <= PI, "hull cannot exceed the disk");

        let a_large = polygon_area(&convex_hull(&uniform_disk_points(1_000_000, 12)));
        assert!(a_large > a_small);
        assert!(a_large >= 0.995 * PI, "10^6-point hull should approach π, got {a_large}");
        assert!(a_large <= PI);
    }

    #[test]
    fn area_trivials() {
        let unit = ConvexPolygon {
            vertices: vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(1.0, 1.0),
                Vec2::new(0.0, 1.0),
            ],
        };
        assert!((polygon_area(&unit) - 1.0).abs() < 1e-15);
        let tri = ConvexPolygon {
            vertices: vec![Vec2::new(0.0, 0.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)],
        };
        assert!((polygon_area(&tri) - 0.5).abs() < 1e-15);
        assert_eq!(polygon_area(&ConvexPolygon::default()), 0.0);
    }

    #[test]
    fn dbscan_two_groups() {
        let eps = 0.1;
        let mut pts = Vec::new();
        for i in 0..10 {
            pts.push(Vec2::new(0.01 * i as f64, 0.0));
        }
        for i in 0..10 {
            pts.push(Vec2::new(1.0 + 0.01 * i as f64, 0.0)); // 10·eps away
        }
        let labels = dbscan(&pts, eps, 3);
        assert_eq!(labels.n_clusters(), 2);
        assert!(labels.labels[..10].iter().all(|&l| l == 0));
        assert!(labels.labels[10..].iter().all(|&l| l == 1));
    }

    #[test]
    fn dbscan_identical_points_form_one_cluster() {
        let pts = vec![Vec2::new(2.0, 3.0); 8];
        let labels = dbscan(&pts, 0.5, 3);
        assert_eq!(labels.n_clusters(), 1);
        assert!(labels.labels.iter().all(|&l| l == 0));
    }

    #[test]
    fn dbscan_isolated_point_is_noise() {
        let labels = dbscan(&[Vec2::new(0.0, 0.0)], 1.0, 3);
        assert_eq!(labels.labels, vec![-1]);
    }

    #[test]
    fn union_area_empty_terminal_set_is_zero() {
        let clip = convex_hull(&square_with_center());
        let mut rng = substream(1, 0);
        assert_eq!(union_area_of_cluster_hulls(&[], 0.5, 3, &clip, 100, &mut rng), 0.0);
    }

    #[test]
    fn union_area_full_overlap_matches_clip_area() {
        // One cluster whose hull equals the clip polygon.
        let corners = [
            Vec2::new(0.0, 0.0),
            Vec2::new(2.0, 0.0),
            Vec2::new(2.0, 2.0),
            Vec2::new(0.0, 2.0),
        ];
        let clip = convex_hull(&corners);
        let mut rng = substream(2, 0);
        let est = union_area_of_cluster_hulls(&corners, 3.0, 3, &clip, 50_000, &mut rng);
        // Every sampled point lies in both the clip and the cluster hull.
        assert!((est - polygon_area(&clip)).abs() < 1e-12);
    }

    /// Oracle: two disjoint unit squares have union area exactly 2; the MC
    /// estimate over a 4x4 clip box has binomial std 16·sqrt(p(1-p)/n) with
    /// p = 2/16, which is under 0.017 for n = 1e5, so 0.05 is a 3σ bound.
    #[test]
    fn union_area_two_disjoint_unit_squares() {
        let clip = convex_hull(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(4.0, 0.0),
            Vec2::new(4.0, 4.0),
            Vec2::new(0.0, 4.0),
        ]);
        let mut terminal = Vec::new();
        for (ox, oy) in [(0.0, 0.0), (3.0, 3.0)] {
            terminal.extend([
                Vec2::new(ox, oy),
                Vec2::new(ox + 1.0, oy),
                Vec2::new(ox + 1.0, oy + 1.0),
                Vec2::new(ox, oy + 1.0),
            ]);
        }
        let mut rng = substream(3, 0);
        let est = union_area_of_cluster_hulls(&terminal, 1.05, 3, &clip, 100_000, &mut rng);
        assert!((est - 2.0).abs() < 0.05, "estimate {est} outside 3σ of 2.0");
    }

    #[test]
    fn union_area_never_exceeds_clip() {
        let clip = convex_hull(&[
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ]);
        // Terminal cluster far larger than the clip region.
        let big = [
            Vec2::new(-5.0, -5.0),
            Vec2::new(5.0, -5.0),
            Vec2::new(5.0, 5.0),
            Vec2::new(-5.0, 5.0),
        ];
        let mut rng = substream(4, 0);
        let est = union_area_of_cluster_hulls(&big, 20.0, 3, &clip, 10_000, &mut rng);
        assert!(est <= polygon_area(&clip) + 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Re-hulling a hull's vertices changes the area by < 1e-12.
        #[test]
        fn hull_idempotent(pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..40)) {
            let pts: Vec<Vec2> = pts.into_iter().map(|(x, y)| Vec2::new(x, y)).collect();
            let h1 = convex_hull(&pts);
            let h2 = convex_hull(&h1.vertices);
            prop_assert!((polygon_area(&h1) - polygon_area(&h2)).abs() < 1e-12);
        }

        /// Adding points never decreases hull area.
        #[test]
        fn hull_containment_monotone(
            pts in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..30),
            extra in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..10),
        ) {
            let base: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
            let mut all = base.clone();
            all.extend(extra.iter().map(|&(x, y)| Vec2::new(x, y)));
            prop_assert!(polygon_area(&convex_hull(&all)) >= polygon_area(&convex_hull(&base)) - 1e-12);
        }

        /// Rotating the point set preserves hull area to 1e-9 relative.
        #[test]
        fn hull_rotation_invariant(
            pts in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 3..30),
            angle in 0.0f64..std::f64::consts::TAU,
        ) {
            let base: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
            let rotated: Vec<Vec2> = base.iter().map(|p| p.rotated(angle)).collect();
            let a = polygon_area(&convex_hull(&base));
            let b = polygon_area(&convex_hull(&rotated));
            prop_assert!((a - b).abs() <= 1e-9 * a.max(1.0));
        }

        /// DBSCAN labels are invariant under a global translation.
        #[test]
        fn dbscan_translation_invariant(
            pts in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 0..25),
            shift in (-100.0f64..100.0, -100.0f64..100.0),
        ) {
            let base: Vec<Vec2> = pts.iter().map(|&(x, y)| Vec2::new(x, y)).collect();
            let moved: Vec<Vec2> = base
                .iter()
                .map(|p| Vec2::new(p.x + shift.0, p.y + shift.1))
                .collect();
            prop_assert_eq!(dbscan(&base, 0.8, 3), dbscan(&moved, 0.8, 3));
        }
    }
}
