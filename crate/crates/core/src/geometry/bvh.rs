//! Bounding volume hierarchy over a deforming triangle set. The tree topology
//! is built once; `refit` updates the boxes after vertices move.

use super::{closest_point_on_triangle, ray_triangle, Vec3};
use crate::scalar::Real;

const LEAF_SIZE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb<S> {
    pub min: Vec3<S>,
    pub max: Vec3<S>,
}

impl<S: Real> Aabb<S> {
    pub fn empty() -> Self {
        let inf = S::infinity();
        Self { min: Vec3::new(inf, inf, inf), max: Vec3::new(-inf, -inf, -inf) }
    }

    pub fn grow(&mut self, p: Vec3<S>) {
        self.min = self.min.min(p);
        self.max = self.max.max(p);
    }

    pub fn merge(&self, o: &Self) -> Self {
        Self { min: self.min.min(o.min), max: self.max.max(o.max) }
    }

    pub fn center(&self) -> Vec3<S> {
        (self.min + self.max) * S::lit(0.5)
    }

    pub fn distance_squared(&self, p: Vec3<S>) -> S {
        let d = |v: S, lo: S, hi: S| {
            if v < lo {
                lo - v
            } else if v > hi {
                v - hi
            } else {
                S::zero()
            }
        };
        let dx = d(p.x, self.min.x, self.max.x);
        let dy = d(p.y, self.min.y, self.max.y);
        let dz = d(p.z, self.min.z, self.max.z);
        dx * dx + dy * dy + dz * dz
    }

    /// Slab test; returns the entry parameter when the ray meets the box
    /// before `t_max`.
    fn ray_entry(&self, origin: Vec3<S>, inv_dir: Vec3<S>, t_max: S) -> Option<S> {
        let mut t0 = S::zero();
        let mut t1 = t_max;
        for axis in 0..3 {
            let (o, inv, lo, hi) = (origin[axis], inv_dir[axis], self.min[axis], self.max[axis]);
            let mut ta = (lo - o) * inv;
            let mut tb = (hi - o) * inv;
            if ta.is_nan() || tb.is_nan() {
                // ray parallel to the slab and origin on its plane
                if o < lo || o > hi {
                    return None;
                }
                continue;
            }
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        Some(t0)
    }
}

#[derive(Debug, Clone)]
struct Node<S> {
    bounds: Aabb<S>,
    /// Leaves own `order[start..start + count]`; interior nodes have
    /// `count == 0`, the left child at the next index and the right at `right`.
    start: usize,
    count: usize,
    right: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosestHit<S> {
    pub point: Vec3<S>,
    pub distance: S,
    pub triangle: usize,
}

#[derive(Debug, Clone)]
pub struct Bvh<S> {
    nodes: Vec<Node<S>>,
    order: Vec<usize>,
}

fn tri_bounds<S: Real>(pos: &[Vec3<S>], t: &[usize; 3]) -> Aabb<S> {
    let mut b = Aabb::empty();
    for &i in t {
        b.grow(pos[i]);
    }
    b
}

impl<S: Real> Bvh<S> {
    pub fn build(pos: &[Vec3<S>], tris: &[[usize; 3]]) -> Self {
        let mut bvh = Self { nodes: Vec::with_capacity(2 * tris.len() / LEAF_SIZE + 1), order: (0..tris.len()).collect() };
        if !tris.is_empty() {
            let centers: Vec<Vec3<S>> = tris.iter().map(|t| tri_bounds(pos, t).center()).collect();
            bvh.split(pos, tris, &centers, 0, tris.len());
        }
        bvh
    }

    fn split(&mut self, pos: &[Vec3<S>], tris: &[[usize; 3]], centers: &[Vec3<S>], start: usize, end: usize) -> usize {
        let idx = self.nodes.len();
        let bounds = self.order[start..end]
            .iter()
            .fold(Aabb::empty(), |b, &t| b.merge(&tri_bounds(pos, &tris[t])));
        self.nodes.push(Node { bounds, start, count: end - start, right: 0 });
        if end - start <= LEAF_SIZE {
            return idx;
        }
        let mut cb = Aabb::empty();
        for &t in &self.order[start..end] {
            cb.grow(centers[t]);
        }
        let ext = cb.max - cb.min;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centers[a][axis].partial_cmp(&centers[b][axis]).unwrap_or(std::cmp::Ordering::Equal)
        });
        self.split(pos, tris, centers, start, mid);
        let right = self.split(pos, tris, centers, mid, end);
        let node = &mut self.nodes[idx];
        node.count = 0;
        node.right = right;
        idx
    }

    /// Recomputes node bounds for moved vertices. Children always follow
    /// their parent in `nodes`, so a reverse sweep is bottom-up.
    pub fn refit(&mut self, pos: &[Vec3<S>], tris: &[[usize; 3]]) {
        for i in (0..self.nodes.len()).rev() {
            let node = &self.nodes[i];
            let bounds = if node.count > 0 {
                self.order[node.start..node.start + node.count]
                    .iter()
                    .fold(Aabb::empty(), |b, &t| b.merge(&tri_bounds(pos, &tris[t])))
            } else {
                self.nodes[i + 1].bounds.merge(&self.nodes[node.right].bounds)
            };
            self.nodes[i].bounds = bounds;
        }
    }

    /// Nearest triangle hit along the ray within `max_len`; returns
    /// `(distance, triangle)`. `dir` must be unit length.
    pub fn raycast(
        &self,
        pos: &[Vec3<S>],
        tris: &[[usize; 3]],
        origin: Vec3<S>,
        dir: Vec3<S>,
        max_len: S,
    ) -> Option<(S, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv = Vec3::new(S::one() / dir.x, S::one() / dir.y, S::one() / dir.z);
        let mut best: Option<(S, usize)> = None;
        let mut limit = max_len;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bounds.ray_entry(origin, inv, limit).is_none() {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = tris[t];
                    if let Some(d) = ray_triangle(origin, dir, pos[a], pos[b], pos[c]) {
                        if d <= limit {
                            limit = d;
                            best = Some((d, t));
                        }
                    }
                }
            } else {
                stack.push(node.right);
                stack.push(i + 1);
            }
        }
        best
    }

    /// Closest surface point to `p` among triangles no farther than `max_dist`.
    pub fn closest(&self, pos: &[Vec3<S>], tris: &[[usize; 3]], p: Vec3<S>, max_dist: S) -> Option<ClosestHit<S>> {
        if self.nodes.is_empty() {
            return None;
        }
        let mut best: Option<ClosestHit<S>> = None;
        let mut limit_sq = max_dist * max_dist;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bounds.distance_squared(p) > limit_sq {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.start..node.start + node.count] {
                    let [a, b, c] = tris[t];
                    let q = closest_point_on_triangle(p, pos[a], pos[b], pos[c]);
                    let d2 = (q - p).norm_squared();
                    if d2 <= limit_sq {
                        limit_sq = d2;
                        best = Some(ClosestHit { point: q, distance: d2.sqrt(), triangle: t });
                    }
                }
            } else {
                let (l, r) = (i + 1, node.right);
                let dl = self.nodes[l].bounds.distance_squared(p);
                let dr = self.nodes[r].bounds.distance_squared(p);
                // visit the nearer child first
                if dl < dr {
                    stack.push(r);
                    stack.push(l);
                } else {
                    stack.push(l);
                    stack.push(r);
                }
            }
        }
        best
    }

    /// Indices of triangles whose closest point lies within `radius` of `p`.
    pub fn triangles_within(&self, pos: &[Vec3<S>], tris: &[[usize; 3]], p: Vec3<S>, radius: S) -> Vec<usize> {
        let mut out = Vec::new();
        if self.nodes.is_empty() {
            return out;
        }
        let r2 = radius * radius;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bounds.distance_squared(p) > r2 {
                continue;
            }
            if node.count > 0 {
                out.extend(self.order[node.start..node.start + node.count].iter().copied().filter(|&t| {
                    let [a, b, c] = tris[t];
                    (closest_point_on_triangle(p, pos[a], pos[b], pos[c]) - p).norm_squared() <= r2
                }));
            } else {
                stack.push(node.right);
                stack.push(i + 1);
            }
        }
        out
    }

    pub fn root_bounds(&self) -> Option<Aabb<S>> {
        self.nodes.first().map(|n| n.bounds)
    }
}
