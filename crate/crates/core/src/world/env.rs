//! Ground-truth obstacle geometry and exact ray queries against it.

use serde::{Deserialize, Serialize};

use crate::state::Vec3;

/// Axis-aligned box, also used for the world bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: Vec3, max: Vec3) -> Self {
        Self {
            min: min.into(),
            max: max.into(),
        }
    }

    pub fn lo(&self) -> Vec3 {
        Vec3::from(self.min)
    }

    pub fn hi(&self) -> Vec3 {
        Vec3::from(self.max)
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn intersects(&self, other: &Aabb) -> bool {
        (0..3).all(|i| self.min[i] <= other.max[i] && other.min[i] <= self.max[i])
    }

    /// Euclidean distance from `p` to the box (0 inside).
    pub fn distance(&self, p: &Vec3) -> f64 {
        let mut d2 = 0.0;
        for i in 0..3 {
            let e = (self.min[i] - p[i]).max(p[i] - self.max[i]).max(0.0);
            d2 += e * e;
        }
        d2.sqrt()
    }

    /// Slab test. Returns the entry/exit parameters of the ray against the box.
    fn ray_span(&self, origin: &Vec3, dir: &Vec3) -> Option<(f64, f64)> {
        let mut t0 = f64::NEG_INFINITY;
        let mut t1 = f64::INFINITY;
        for i in 0..3 {
            if dir[i].abs() < 1e-300 {
                if origin[i] < self.min[i] || origin[i] > self.max[i] {
                    return None;
                }
            } else {
                let inv = 1.0 / dir[i];
                let mut a = (self.min[i] - origin[i]) * inv;
                let mut b = (self.max[i] - origin[i]) * inv;
                if a > b {
                    std::mem::swap(&mut a, &mut b);
                }
                t0 = t0.max(a);
                t1 = t1.min(b);
            }
        }
        (t0 <= t1).then_some((t0, t1))
    }
}

/// Vertical cylinder with flat caps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub center: [f64; 2],
    pub radius: f64,
    pub z_min: f64,
    pub z_max: f64,
}

impl Cylinder {
    pub fn contains(&self, p: &Vec3) -> bool {
        let dx = p.x - self.center[0];
        let dy = p.y - self.center[1];
        p.z >= self.z_min && p.z <= self.z_max && dx * dx + dy * dy <= self.radius * self.radius
    }

    pub fn distance(&self, p: &Vec3) -> f64 {
        let dx = p.x - self.center[0];
        let dy = p.y - self.center[1];
        let radial = ((dx * dx + dy * dy).sqrt() - self.radius).max(0.0);
        let vertical = (self.z_min - p.z).max(p.z - self.z_max).max(0.0);
        radial.hypot(vertical)
    }

    pub fn bounding_box(&self) -> Aabb {
        Aabb {
            min: [
                self.center[0] - self.radius,
                self.center[1] - self.radius,
                self.z_min,
            ],
            max: [
                self.center[0] + self.radius,
                self.center[1] + self.radius,
                self.z_max,
            ],
        }
    }

    fn ray_entry(&self, origin: &Vec3, dir: &Vec3) -> Option<f64> {
        if self.contains(origin) {
            return Some(0.0);
        }
        let ox = origin.x - self.center[0];
        let oy = origin.y - self.center[1];
        let a = dir.x * dir.x + dir.y * dir.y;
        let mut best: Option<f64> = None;
        let mut consider = |t: f64| {
            if t >= 0.0 && best.is_none_or(|b| t < b) {
                best = Some(t);
            }
        };
        // lateral surface
        if a > 1e-300 {
            let b = 2.0 * (ox * dir.x + oy * dir.y);
            let c = ox * ox + oy * oy - self.radius * self.radius;
            let disc = b * b - 4.0 * a * c;
            if disc >= 0.0 {
                let sq = disc.sqrt();
                for t in [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)] {
                    let z = origin.z + t * dir.z;
                    if z >= self.z_min && z <= self.z_max {
                        consider(t);
                    }
                }
            }
        }
        // caps
        if dir.z.abs() > 1e-300 {
            for zc in [self.z_min, self.z_max] {
                let t = (zc - origin.z) / dir.z;
                let x = ox + t * dir.x;
                let y = oy + t * dir.y;
                if x * x + y * y <= self.radius * self.radius {
                    consider(t);
                }
            }
        }
        best
    }
}

/// Obstacle world used to generate sensor data and judge collisions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthEnv {
    pub bounds: Aabb,
    #[serde(default)]
    pub boxes: Vec<Aabb>,
    #[serde(default)]
    pub cylinders: Vec<Cylinder>,
}

impl GroundTruthEnv {
    pub fn empty(bounds: Aabb) -> Self {
        Self {
            bounds,
            boxes: Vec::new(),
            cylinders: Vec::new(),
        }
    }

    /// Returns one message per violated invariant, prefixed with `prefix`.
    pub fn validate(&self, prefix: &str) -> Vec<String> {
        let mut errs = Vec::new();
        for i in 0..3 {
            if !(self.bounds.min[i] < self.bounds.max[i]) {
                errs.push(format!("{prefix}.bounds: min[{i}] must be below max[{i}]"));
            }
        }
        for (k, b) in self.boxes.iter().enumerate() {
            if (0..3).any(|i| b.min[i] > b.max[i]) {
                errs.push(format!("{prefix}.boxes[{k}]: min exceeds max"));
            } else if !b.intersects(&self.bounds) {
                errs.push(format!("{prefix}.boxes[{k}]: does not intersect bounds"));
            }
        }
        for (k, c) in self.cylinders.iter().enumerate() {
            if !(c.radius > 0.0) {
                errs.push(format!("{prefix}.cylinders[{k}].radius: must be positive"));
            }
            if c.z_min > c.z_max {
                errs.push(format!("{prefix}.cylinders[{k}]: z_min exceeds z_max"));
            } else if !c.bounding_box().intersects(&self.bounds) {
                errs.push(format!("{prefix}.cylinders[{k}]: does not intersect bounds"));
            }
        }
        errs
    }

    pub fn in_obstacle(&self, p: &Vec3) -> bool {
        self.boxes.iter().any(|b| b.contains(p)) || self.cylinders.iter().any(|c| c.contains(p))
    }

    /// Free means strictly inside the bounds and outside every obstacle.
    pub fn is_free(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] > self.bounds.min[i] && p[i] < self.bounds.max[i])
            && !self.in_obstacle(p)
    }

    /// Distance to the nearest obstacle or bound face; 0 when not free.
    pub fn clearance(&self, p: &Vec3) -> f64 {
        if !self.is_free(p) {
            return 0.0;
        }
        let mut d = f64::INFINITY;
        for i in 0..3 {
            d = d.min(p[i] - self.bounds.min[i]).min(self.bounds.max[i] - p[i]);
        }
        for b in &self.boxes {
            d = d.min(b.distance(p));
        }
        for c in &self.cylinders {
            d = d.min(c.distance(p));
        }
        d
    }

    /// Distance along `dir` to the first obstacle or bound surface, if within
    /// `max_range`. An origin that is not free yields `Some(0.0)`.
    pub fn raycast(&self, origin: &Vec3, dir: &Vec3, max_range: f64) -> Option<f64> {
        if !self.is_free(origin) {
            return Some(0.0);
        }
        let mut best = f64::INFINITY;
        if let Some((_, exit)) = self.bounds.ray_span(origin, dir) {
            best = exit.max(0.0);
        }
        for b in &self.boxes {
            if let Some((t0, t1)) = b.ray_span(origin, dir) {
                if t1 >= 0.0 && t0 < best {
                    best = t0.max(0.0);
                }
            }
        }
        for c in &self.cylinders {
            if let Some(t) = c.ray_entry(origin, dir) {
                if t < best {
                    best = t;
                }
            }
        }
        (best <= max_range).then_some(best)
    }

    /// True when the straight segment `a → b` touches an obstacle or leaves the bounds.
    pub fn segment_blocked(&self, a: &Vec3, b: &Vec3) -> bool {
        let d = b - a;
        let len = d.norm();
        if len < 1e-12 {
            return !self.is_free(a);
        }
        self.raycast(a, &(d / len), len).is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn bounds() -> Aabb {
        Aabb::new(Vec3::new(-50.0, -50.0, -50.0), Vec3::new(50.0, 50.0, 50.0))
    }

    #[test]
    fn empty_world_ray_beyond_range_misses() {
        let env = GroundTruthEnv::empty(bounds());
        assert_eq!(env.raycast(&Vec3::zeros(), &Vec3::x(), 30.0), None);
        assert_relative_eq!(env.raycast(&Vec3::zeros(), &Vec3::x(), 60.0).unwrap(), 50.0);
    }

    #[test]
    fn perpendicular_box_face() {
        let mut env = GroundTruthEnv::empty(bounds());
        env.boxes.push(Aabb::new(Vec3::new(3.0, -1.0, -1.0), Vec3::new(4.0, 1.0, 1.0)));
        assert_relative_eq!(env.raycast(&Vec3::zeros(), &Vec3::x(), 30.0).unwrap(), 3.0);
    }

    #[test]
    fn cylinder_through_axis() {
        let mut env = GroundTruthEnv::empty(bounds());
        env.cylinders.push(Cylinder {
            center: [5.0, 0.0],
            radius: 1.0,
            z_min: -2.0,
            z_max: 2.0,
        });
        assert_relative_eq!(
            env.raycast(&Vec3::zeros(), &Vec3::x(), 30.0).unwrap(),
            4.0,
            epsilon = 1e-12
        );
        // from above into the cap
        let d = env
            .raycast(&Vec3::new(5.0, 0.0, 10.0), &-Vec3::z(), 30.0)
            .unwrap();
        assert_relative_eq!(d, 8.0, epsilon = 1e-12);
    }

    #[test]
    fn inside_obstacle_is_zero() {
        let mut env = GroundTruthEnv::empty(bounds());
        env.boxes.push(Aabb::new(Vec3::new(-1.0, -1.0, -1.0), Vec3::new(1.0, 1.0, 1.0)));
        assert_eq!(env.raycast(&Vec3::zeros(), &Vec3::y(), 5.0), Some(0.0));
        assert_eq!(env.clearance(&Vec3::zeros()), 0.0);
    }

    #[test]
    fn validation_reports_every_problem() {
        let mut env = GroundTruthEnv::empty(bounds());
        env.boxes.push(Aabb::new(Vec3::new(100.0, 0.0, 0.0), Vec3::new(101.0, 1.0, 1.0)));
        env.cylinders.push(Cylinder {
            center: [0.0, 0.0],
            radius: -1.0,
            z_min: 0.0,
            z_max: 1.0,
        });
        let errs = env.validate("world");
        assert_eq!(errs.len(), 2, "{errs:?}");
        assert!(errs[0].contains("world.boxes[0]"));
        assert!(errs[1].contains("world.cylinders[0].radius"));
    }

    fn random_env(seed_boxes: Vec<(f64, f64, f64, f64)>, seed_cyl: Vec<(f64, f64, f64)>) -> GroundTruthEnv {
        let mut env = GroundTruthEnv::empty(Aabb::new(Vec3::new(-20.0, -20.0, -5.0), Vec3::new(20.0, 20.0, 5.0)));
        for (x, y, z, s) in seed_boxes {
            env.boxes.push(Aabb::new(Vec3::new(x, y, z), Vec3::new(x + s, y + s * 0.7, z + s * 1.3)));
        }
        for (x, y, r) in seed_cyl {
            env.cylinders.push(Cylinder { center: [x, y], radius: r, z_min: -3.0, z_max: 2.0 });
        }
        env
    }

    proptest! {
        #[test]
        fn hit_distance_brackets_the_surface(
            boxes in proptest::collection::vec((-15.0f64..15.0, -15.0f64..15.0, -4.0f64..3.0, 0.5f64..4.0), 0..8),
            cyls in proptest::collection::vec((-15.0f64..15.0, -15.0f64..15.0, 0.2f64..2.0), 0..8),
            theta in 0.0f64..std::f64::consts::PI,
            phi in -std::f64::consts::PI..std::f64::consts::PI,
        ) {
            let env = random_env(boxes, cyls);
            let origin = Vec3::new(0.1, -0.2, 0.05);
            prop_assume!(env.clearance(&origin) > 1e-3);
            let dir = Vec3::new(theta.sin() * phi.cos(), theta.sin() * phi.sin(), theta.cos());
            let eps = 1e-6;
            if let Some(d) = env.raycast(&origin, &dir, 100.0) {
                prop_assert!(d > 0.0);
                prop_assert!(env.is_free(&(origin + dir * (d - eps))));
                prop_assert!(!env.is_free(&(origin + dir * (d + eps))));
            } else {
                prop_assert!(false, "closed world must always produce a hit");
            }
        }
    }
}
