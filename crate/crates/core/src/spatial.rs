//! Thin nearest-neighbour index over 3D points.

use std::num::NonZero;

use kiddo::immutable::float::kdtree::ImmutableKdTree;
use kiddo::SquaredEuclidean;

use crate::geometry::Point3;

pub struct PointIndex {
    tree: ImmutableKdTree<f64, u64, 3, 32>,
    len: usize,
}

impl PointIndex {
    pub fn new(points: &[Point3]) -> Self {
        let coords: Vec<[f64; 3]> = points.iter().map(|p| [p.x, p.y, p.z]).collect();
        Self { tree: ImmutableKdTree::new_from_slice(&coords), len: points.len() }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Index and distance of the nearest stored point.
    pub fn nearest(&self, p: &Point3) -> Option<(usize, f64)> {
        if self.len == 0 {
            return None;
        }
        let nn = self.tree.nearest_one::<SquaredEuclidean>(&[p.x, p.y, p.z]);
        Some((nn.item as usize, nn.distance.sqrt()))
    }

    /// The `k` nearest stored points, closest first.
    pub fn nearest_n(&self, p: &Point3, k: usize) -> Vec<(usize, f64)> {
        let Some(k) = NonZero::new(k.min(self.len)) else {
            return Vec::new();
        };
        self.tree
            .nearest_n::<SquaredEuclidean>(&[p.x, p.y, p.z], k)
            .into_iter()
            .map(|nn| (nn.item as usize, nn.distance.sqrt()))
            .collect()
    }

    /// Indices of all stored points within `radius` (inclusive), ascending.
    pub fn within(&self, p: &Point3, radius: f64) -> Vec<usize> {
        if self.len == 0 {
            return Vec::new();
        }
        let r2 = radius * radius;
        let mut out: Vec<usize> = self
            .tree
            .within_unsorted::<SquaredEuclidean>(&[p.x, p.y, p.z], r2)
            .into_iter()
            .filter(|nn| nn.distance <= r2)
            .map(|nn| nn.item as usize)
            .collect();
        out.sort_unstable();
        out
    }
}
