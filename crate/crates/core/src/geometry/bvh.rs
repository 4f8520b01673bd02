//! Bounding-volume hierarchy over world-space triangles.
//!
//! Median split along the longest centroid axis; leaves hold at most
//! [`LEAF_SIZE`] triangles.

use nalgebra::{Point3, Vector3};

const LEAF_SIZE: usize = 4;

#[derive(Clone, Copy, Debug)]
struct Aabb {
    min: Point3<f64>,
    max: Point3<f64>,
}

impl Aabb {
    fn empty() -> Self {
        Self {
            min: Point3::from(Vector3::repeat(f64::INFINITY)),
            max: Point3::from(Vector3::repeat(f64::NEG_INFINITY)),
        }
    }

    fn grow(&mut self, p: &Point3<f64>) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    fn longest_axis(&self) -> usize {
        let d = self.max - self.min;
        if d.x >= d.y && d.x >= d.z {
            0
        } else if d.y >= d.z {
            1
        } else {
            2
        }
    }

    /// Slab test; returns the entry distance when the ray hits within `t_max`.
    #[inline]
    fn hit(&self, origin: &Point3<f64>, inv_dir: &Vector3<f64>, t_max: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = t_max;
        for a in 0..3 {
            let mut near = (self.min[a] - origin[a]) * inv_dir[a];
            let mut far = (self.max[a] - origin[a]) * inv_dir[a];
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf: treat as unbounded on this axis.
            if !near.is_nan() {
                t0 = t0.max(near);
            }
            if !far.is_nan() {
                t1 = t1.min(far);
            }
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Clone, Copy, Debug)]
struct Node {
    bounds: Aabb,
    /// Leaf: first triangle slot. Interior: index of the left child (right = left + 1).
    start: u32,
    /// Leaf: triangle count. Interior: 0.
    count: u32,
}

/// A closest-hit record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    /// Ray parameter (distance when the direction is unit length).
    pub t: f64,
    /// Index into the triangle list the BVH was built from.
    pub triangle: usize,
}

/// Immutable BVH over a triangle soup.
#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    triangles: Vec<[Point3<f64>; 3]>,
    /// Slot → original triangle index.
    order: Vec<u32>,
}

impl Bvh {
    pub fn build(triangles: Vec<[Point3<f64>; 3]>) -> Self {
        let mut order: Vec<u32> = (0..triangles.len() as u32).collect();
        let centroids: Vec<Point3<f64>> = triangles
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let mut nodes = Vec::with_capacity(2 * triangles.len() / LEAF_SIZE + 1);
        if !triangles.is_empty() {
            nodes.push(Node {
                bounds: Aabb::empty(),
                start: 0,
                count: 0,
            });
            build_node(&mut nodes, 0, &triangles, &centroids, &mut order, 0, triangles.len());
        }
        let ordered = order.iter().map(|&i| triangles[i as usize]).collect();
        Self {
            nodes,
            triangles: ordered,
            order,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Closest intersection with `t ∈ (t_min, t_max)`.
    pub fn closest_hit(
        &self,
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
        t_min: f64,
        t_max: f64,
    ) -> Option<Hit> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut best: Option<(f64, usize)> = None;
        let mut limit = t_max;
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.hit(origin, &inv, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.start as usize;
                for slot in start..start + node.count as usize {
                    if let Some(t) = intersect(origin, dir, &self.triangles[slot]) {
                        if t > t_min && t < limit {
                            limit = t;
                            best = Some((t, slot));
                        }
                    }
                }
            } else {
                let left = node.start as usize;
                let dl = self.nodes[left].bounds.hit(origin, &inv, limit);
                let dr = self.nodes[left + 1].bounds.hit(origin, &inv, limit);
                // Visit the nearer child first.
                match (dl, dr) {
                    (Some(a), Some(b)) if a <= b => {
                        stack.push(left + 1);
                        stack.push(left);
                    }
                    (Some(_), Some(_)) => {
                        stack.push(left);
                        stack.push(left + 1);
                    }
                    (Some(_), None) => stack.push(left),
                    (None, Some(_)) => stack.push(left + 1),
                    (None, None) => {}
                }
            }
        }
        best.map(|(t, slot)| Hit {
            t,
            triangle: self.order[slot] as usize,
        })
    }

    /// True if anything is hit with `t ∈ (t_min, t_max)`.
    pub fn occluded(&self, origin: &Point3<f64>, dir: &Vector3<f64>, t_min: f64, t_max: f64) -> bool {
        if self.nodes.is_empty() {
            return false;
        }
        let inv = dir.map(|d| 1.0 / d);
        let mut stack = Vec::with_capacity(64);
        stack.push(0usize);
        while let Some(ni) = stack.pop() {
            let node = &self.nodes[ni];
            if node.bounds.hit(origin, &inv, t_max).is_none() {
                continue;
            }
            if node.count > 0 {
                let start = node.start as usize;
                for tri in &self.triangles[start..start + node.count as usize] {
                    if let Some(t) = intersect(origin, dir, tri) {
                        if t > t_min && t < t_max {
                            return true;
                        }
                    }
                }
            } else {
                stack.push(node.start as usize);
                stack.push(node.start as usize + 1);
            }
        }
        false
    }
}

fn build_node(
    nodes: &mut Vec<Node>,
    index: usize,
    triangles: &[[Point3<f64>; 3]],
    centroids: &[Point3<f64>],
    order: &mut [u32],
    start: usize,
    end: usize,
) {
    let mut bounds = Aabb::empty();
    let mut centroid_bounds = Aabb::empty();
    for &i in &order[start..end] {
        for p in &triangles[i as usize] {
            bounds.grow(p);
        }
        centroid_bounds.grow(&centroids[i as usize]);
    }
    let count = end - start;
    if count <= LEAF_SIZE {
        nodes[index] = Node {
            bounds,
            start: start as u32,
            count: count as u32,
        };
        return;
    }
    let axis = centroid_bounds.longest_axis();
    let mid = start + count / 2;
    order[start..end].select_nth_unstable_by(count / 2, |&a, &b| {
        centroids[a as usize][axis].total_cmp(&centroids[b as usize][axis])
    });
    let left = nodes.len();
    let placeholder = Node {
        bounds: Aabb::empty(),
        start: 0,
        count: 0,
    };
    nodes.push(placeholder);
    nodes.push(placeholder);
    nodes[index] = Node {
        bounds,
        start: left as u32,
        count: 0,
    };
    build_node(nodes, left, triangles, centroids, order, start, mid);
    build_node(nodes, left + 1, triangles, centroids, order, mid, end);
}

/// Two-sided Möller–Trumbore intersection; returns the ray parameter.
#[inline]
pub fn intersect(origin: &Point3<f64>, dir: &Vector3<f64>, tri: &[Point3<f64>; 3]) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = dir.cross(&e2);
    let det = e1.dot(&p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv_det = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&p) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv_det)
}
