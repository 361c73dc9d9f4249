//! Bounding volume hierarchy over triangles.
//!
//! Built once with binned SAH splits, then traversed concurrently
//! (read-only) by any number of threads.

use crate::math::V3;

const LEAF_SIZE: usize = 4;
const BINS: usize = 12;
const MEDIAN_DEPTH: usize = 40;

#[derive(Clone, Copy, Debug, PartialEq)]
struct Aabb {
    lo: V3,
    hi: V3,
}

impl Aabb {
    const EMPTY: Aabb = Aabb {
        lo: V3 {
            x: f64::INFINITY,
            y: f64::INFINITY,
            z: f64::INFINITY,
        },
        hi: V3 {
            x: f64::NEG_INFINITY,
            y: f64::NEG_INFINITY,
            z: f64::NEG_INFINITY,
        },
    };

    fn grow(&mut self, p: V3) {
        self.lo = self.lo.min_comp(p);
        self.hi = self.hi.max_comp(p);
    }

    fn merge(&mut self, o: &Aabb) {
        self.lo = self.lo.min_comp(o.lo);
        self.hi = self.hi.max_comp(o.hi);
    }

    fn area(&self) -> f64 {
        let d = self.hi - self.lo;
        if d.x < 0.0 {
            return 0.0;
        }
        2.0 * (d.x * d.y + d.y * d.z + d.z * d.x)
    }

    /// Entry distance of the ray, if it overlaps `[0, tmax]`.
    #[inline]
    fn hit(&self, o: V3, inv: V3, tmax: f64) -> Option<f64> {
        let mut t0 = 0.0f64;
        let mut t1 = tmax;
        for a in 0..3 {
            let (lo, hi, oa, ia) = (self.lo.axis(a), self.hi.axis(a), o.axis(a), inv.axis(a));
            let (mut near, mut far) = ((lo - oa) * ia, (hi - oa) * ia);
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN from 0 * inf leaves the bounds untouched
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
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
    /// Leaf: first primitive; interior: index of the second child (the
    /// first child directly follows its parent).
    offset: u32,
    /// Primitive count, zero for interior nodes.
    count: u32,
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<Node>,
    /// Primitive order, leaves index into this.
    order: Vec<u32>,
    tris: Vec<[V3; 3]>,
}

/// Ray-triangle distance (Moller-Trumbore), if within `(tmin, tmax)`.
#[inline]
pub fn intersect_triangle(o: V3, d: V3, tri: &[V3; 3], tmin: f64, tmax: f64) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let p = d.cross(e2);
    let det = e1.dot(p);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = o - tri[0];
    let u = s.dot(p) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(e1);
    let v = d.dot(q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(q) * inv;
    (t > tmin && t < tmax).then_some(t)
}

impl Bvh {
    pub fn new(tris: Vec<[V3; 3]>) -> Self {
        let n = tris.len();
        let mut bvh = Bvh {
            nodes: Vec::with_capacity(2 * n.max(1)),
            order: (0..n as u32).collect(),
            tris,
        };
        let boxes: Vec<Aabb> = bvh
            .tris
            .iter()
            .map(|t| {
                let mut b = Aabb::EMPTY;
                t.iter().for_each(|&p| b.grow(p));
                b
            })
            .collect();
        let centers: Vec<V3> = boxes.iter().map(|b| (b.lo + b.hi) * 0.5).collect();
        if n == 0 {
            bvh.nodes.push(Node {
                bounds: Aabb::EMPTY,
                offset: 0,
                count: 0,
            });
        } else {
            bvh.build(0, n, &boxes, &centers, 0);
        }
        bvh
    }

    pub fn len(&self) -> usize {
        self.tris.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tris.is_empty()
    }

    pub fn triangle(&self, i: usize) -> &[V3; 3] {
        &self.tris[i]
    }

    fn build(&mut self, start: usize, end: usize, boxes: &[Aabb], centers: &[V3], depth: usize) -> usize {
        let mut bounds = Aabb::EMPTY;
        let mut cbounds = Aabb::EMPTY;
        for &i in &self.order[start..end] {
            bounds.merge(&boxes[i as usize]);
            cbounds.grow(centers[i as usize]);
        }
        let me = self.nodes.len();
        self.nodes.push(Node {
            bounds,
            offset: start as u32,
            count: (end - start) as u32,
        });
        if end - start <= LEAF_SIZE {
            return me;
        }
        let (axis, split) = if depth >= MEDIAN_DEPTH {
            // deep trees switch to median splits so traversal stacks stay bounded
            let d = cbounds.hi - cbounds.lo;
            let axis = if d.x >= d.y && d.x >= d.z { 0 } else if d.y >= d.z { 1 } else { 2 };
            (axis, f64::NAN)
        } else {
            match self.best_split(start, end, &cbounds, boxes, centers, bounds.area()) {
                Some(s) => s,
                None => return me,
            }
        };
        let mid = {
            let slice = &mut self.order[start..end];
            let mut i = 0;
            for j in 0..slice.len() {
                if centers[slice[j] as usize].axis(axis) < split {
                    slice.swap(i, j);
                    i += 1;
                }
            }
            start + i
        };
        let mid = if mid == start || mid == end {
            // all centers on one side of the plane: fall back to a median split
            let slice = &mut self.order[start..end];
            slice.sort_by(|a, b| centers[*a as usize].axis(axis).total_cmp(&centers[*b as usize].axis(axis)));
            (start + end) / 2
        } else {
            mid
        };
        self.build(start, mid, boxes, centers, depth + 1);
        let right = self.build(mid, end, boxes, centers, depth + 1);
        self.nodes[me].offset = right as u32;
        self.nodes[me].count = 0;
        me
    }

    fn best_split(
        &self,
        start: usize,
        end: usize,
        cbounds: &Aabb,
        boxes: &[Aabb],
        centers: &[V3],
        parent_area: f64,
    ) -> Option<(usize, f64)> {
        let n = end - start;
        let mut best: Option<(f64, usize, f64)> = None;
        for axis in 0..3 {
            let (lo, hi) = (cbounds.lo.axis(axis), cbounds.hi.axis(axis));
            if hi - lo <= 1e-12 * (1.0 + lo.abs()) {
                continue;
            }
            let mut bins = [(Aabb::EMPTY, 0usize); BINS];
            let scale = BINS as f64 / (hi - lo);
            for &i in &self.order[start..end] {
                let b = (((centers[i as usize].axis(axis) - lo) * scale) as usize).min(BINS - 1);
                bins[b].0.merge(&boxes[i as usize]);
                bins[b].1 += 1;
            }
            let mut right_area = [0.0; BINS];
            let mut right_count = [0usize; BINS];
            let (mut acc, mut cnt) = (Aabb::EMPTY, 0);
            for b in (1..BINS).rev() {
                acc.merge(&bins[b].0);
                cnt += bins[b].1;
                right_area[b] = acc.area();
                right_count[b] = cnt;
            }
            let (mut acc, mut cnt) = (Aabb::EMPTY, 0);
            for b in 0..BINS - 1 {
                acc.merge(&bins[b].0);
                cnt += bins[b].1;
                if cnt == 0 || right_count[b + 1] == 0 {
                    continue;
                }
                let cost = acc.area() * cnt as f64 + right_area[b + 1] * right_count[b + 1] as f64;
                if best.is_none_or(|(c, _, _)| cost < c) {
                    best = Some((cost, axis, lo + (b + 1) as f64 / scale));
                }
            }
        }
        let (cost, axis, split) = best?;
        // splitting must beat intersecting every primitive in one leaf
        if cost / parent_area.max(1e-300) >= n as f64 && n <= 4 * LEAF_SIZE {
            return None;
        }
        Some((axis, split))
    }

    fn traverse(&self, o: V3, d: V3, tmin: f64, mut tmax: f64, any: bool, reject: &dyn Fn(u32) -> bool) -> Option<(f64, u32)> {
        if self.tris.is_empty() {
            return None;
        }
        let inv = V3::new(1.0 / d.x, 1.0 / d.y, 1.0 / d.z);
        let mut stack = [0u32; 64];
        let mut sp = 1usize;
        let mut best = None;
        while sp > 0 {
            sp -= 1;
            let node = &self.nodes[stack[sp] as usize];
            if node.bounds.hit(o, inv, tmax).is_none() {
                continue;
            }
            if node.count > 0 {
                let first = node.offset as usize;
                for &prim in &self.order[first..first + node.count as usize] {
                    if reject(prim) {
                        continue;
                    }
                    if let Some(t) = intersect_triangle(o, d, &self.tris[prim as usize], tmin, tmax) {
                        if any {
                            return Some((t, prim));
                        }
                        tmax = t;
                        best = Some((t, prim));
                    }
                }
            } else {
                let idx = stack[sp] as usize;
                stack[sp] = node.offset;
                stack[sp + 1] = (idx + 1) as u32;
                sp += 2;
            }
        }
        best
    }

    /// Whether any non-rejected triangle is hit with `tmin < t < tmax`.
    pub fn occluded(&self, o: V3, d: V3, tmin: f64, tmax: f64, reject: &dyn Fn(u32) -> bool) -> bool {
        self.traverse(o, d, tmin, tmax, true, reject).is_some()
    }

    /// Nearest non-rejected hit `(t, triangle)`.
    pub fn closest(&self, o: V3, d: V3, tmin: f64, tmax: f64, reject: &dyn Fn(u32) -> bool) -> Option<(f64, u32)> {
        self.traverse(o, d, tmin, tmax, false, reject)
    }
}
