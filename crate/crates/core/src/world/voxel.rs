//! Uniform voxel occupancy grid accumulated from range scans.
//!
//! Occupancy is monotone: inserting points only ever sets bits. An optional
//! `observed` layer records voxels swept by rays so unknown space can be
//! treated as blocked when planning conservatively.

use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::state::Vec3;
use crate::world::env::{Aabb, GroundTruthEnv};

/// How the planner treats voxels no ray has swept.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnknownPolicy {
    #[default]
    Free,
    Occupied,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoxelMap {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    occupied: Vec<u64>,
    observed: Option<Vec<u64>>,
    occupied_count: usize,
    inflation: Option<InflationCache>,
}

/// Per-cell classification answering inflated queries for one fixed radius
/// bit-identically to the exact test, kept current as voxels are added.
#[derive(Debug, Clone, PartialEq)]
struct InflationCache {
    robot_radius: f64,
    reach: f64,
    span: isize,
    outer2: f64,
    inner2: f64,
    // 0 = free, 1 = blocked, 2 = needs the exact test
    class: Vec<u8>,
}

fn words(n: usize) -> usize {
    n.div_ceil(64)
}

impl VoxelMap {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3]) -> Self {
        assert!(resolution > 0.0, "voxel resolution must be positive");
        assert!(dims.iter().all(|&d| d > 0), "voxel dims must be positive");
        let n = dims[0] * dims[1] * dims[2];
        Self {
            origin,
            resolution,
            dims,
            occupied: vec![0; words(n)],
            observed: None,
            occupied_count: 0,
            inflation: None,
        }
    }

    /// Grid covering `bounds` with cubic voxels of side `resolution`.
    pub fn covering(bounds: &Aabb, resolution: f64) -> Self {
        let lo = bounds.lo();
        let ext = bounds.hi() - lo;
        let dims = [0, 1, 2].map(|i| ((ext[i] / resolution - 1e-9).ceil() as usize).max(1));
        Self::new(lo, resolution, dims)
    }

    /// Enables tracking of swept voxels (needed for [`UnknownPolicy::Occupied`]).
    pub fn with_observation_tracking(mut self) -> Self {
        self.observed = Some(vec![0; self.occupied.len()]);
        self
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn total_voxels(&self) -> usize {
        self.dims[0] * self.dims[1] * self.dims[2]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied_count
    }

    pub fn tracks_observation(&self) -> bool {
        self.observed.is_some()
    }

    pub fn half_diagonal(&self) -> f64 {
        0.5 * self.resolution * 3f64.sqrt()
    }

    pub fn bounds(&self) -> Aabb {
        let hi = self.origin
            + Vec3::new(
                self.dims[0] as f64,
                self.dims[1] as f64,
                self.dims[2] as f64,
            ) * self.resolution;
        Aabb::new(self.origin, hi)
    }

    pub fn linear(&self, idx: [usize; 3]) -> usize {
        idx[0] + self.dims[0] * (idx[1] + self.dims[1] * idx[2])
    }

    /// Voxel containing `p`, or `None` outside the grid.
    pub fn index_of(&self, p: &Vec3) -> Option<[usize; 3]> {
        let mut out = [0usize; 3];
        for i in 0..3 {
            let f = ((p[i] - self.origin[i]) / self.resolution).floor();
            if !(f >= 0.0 && f < self.dims[i] as f64) {
                return None;
            }
            out[i] = f as usize;
        }
        Some(out)
    }

    pub fn center(&self, idx: [usize; 3]) -> Vec3 {
        self.origin
            + Vec3::new(
                idx[0] as f64 + 0.5,
                idx[1] as f64 + 0.5,
                idx[2] as f64 + 0.5,
            ) * self.resolution
    }

    pub fn is_occupied_index(&self, idx: [usize; 3]) -> bool {
        let l = self.linear(idx);
        self.occupied[l / 64] >> (l % 64) & 1 == 1
    }

    pub fn is_occupied_at(&self, p: &Vec3) -> bool {
        self.index_of(p).is_some_and(|i| self.is_occupied_index(i))
    }

    pub fn is_observed_index(&self, idx: [usize; 3]) -> bool {
        match &self.observed {
            Some(bits) => {
                let l = self.linear(idx);
                bits[l / 64] >> (l % 64) & 1 == 1
            }
            None => true,
        }
    }

    /// Marks a voxel occupied; returns whether it changed.
    pub fn set_occupied(&mut self, idx: [usize; 3]) -> bool {
        let l = self.linear(idx);
        let mask = 1u64 << (l % 64);
        let word = &mut self.occupied[l / 64];
        if *word & mask == 0 {
            *word |= mask;
            self.occupied_count += 1;
            if let Some(obs) = &mut self.observed {
                obs[l / 64] |= mask;
            }
            if self.inflation.is_some() {
                self.inflate_around(idx);
            }
            true
        } else {
            false
        }
    }

    fn set_observed(&mut self, idx: [usize; 3]) {
        let l = self.linear(idx);
        if let Some(obs) = &mut self.observed {
            obs[l / 64] |= 1u64 << (l % 64);
        }
    }

    /// Marks every voxel containing a point; points outside the grid are ignored.
    /// Returns the number of newly occupied voxels.
    pub fn insert_scan(&mut self, points: &[Vec3]) -> usize {
        let mut added = 0;
        for p in points {
            if let Some(idx) = self.index_of(p) {
                if self.set_occupied(idx) {
                    added += 1;
                }
            }
        }
        added
    }

    /// Records the voxels swept by a ray from `origin` over `length` as observed.
    /// Occupancy is untouched; a no-op without observation tracking.
    pub fn mark_ray_observed(&mut self, origin: &Vec3, dir: &Vec3, length: f64) {
        if self.observed.is_none() || length <= 0.0 {
            return;
        }
        let step = 0.5 * self.resolution;
        let n = (length / step).ceil() as usize;
        for k in 0..=n {
            let p = origin + dir * (k as f64 * step).min(length);
            if let Some(idx) = self.index_of(&p) {
                self.set_observed(idx);
            }
        }
    }

    /// Inflated occupancy query: true iff any occupied voxel center lies
    /// within `robot_radius + half diagonal` of `pos`, `pos` is outside the grid,
    /// or (with [`UnknownPolicy::Occupied`]) the voxel at `pos` is unobserved.
    ///
    /// Served from the inflation cache when one is enabled for `robot_radius`.
    pub fn is_occupied_inflated(&self, pos: &Vec3, robot_radius: f64, unknown: UnknownPolicy) -> bool {
        let Some(idx) = self.index_of(pos) else {
            return true;
        };
        if unknown == UnknownPolicy::Occupied && !self.is_observed_index(idx) {
            return true;
        }
        if let Some(cache) = &self.inflation {
            if cache.robot_radius == robot_radius {
                return match cache.class[self.linear(idx)] {
                    0 => false,
                    1 => true,
                    _ => self.any_occupied_center_within(pos, cache.reach),
                };
            }
        }
        self.any_occupied_center_within(pos, robot_radius + self.half_diagonal())
    }

    /// Same as [`Self::is_occupied_inflated`] but never consults the cache.
    pub fn is_occupied_inflated_exact(&self, pos: &Vec3, robot_radius: f64, unknown: UnknownPolicy) -> bool {
        let Some(idx) = self.index_of(pos) else {
            return true;
        };
        if unknown == UnknownPolicy::Occupied && !self.is_observed_index(idx) {
            return true;
        }
        self.any_occupied_center_within(pos, robot_radius + self.half_diagonal())
    }

    /// Precomputes inflated occupancy for `robot_radius`; later insertions keep
    /// it current.
    pub fn enable_inflation_cache(&mut self, robot_radius: f64) {
        if self.inflation.as_ref().is_some_and(|c| c.robot_radius == robot_radius) {
            return;
        }
        let hd = self.half_diagonal();
        let reach = robot_radius + hd;
        let inner = reach - hd;
        self.inflation = Some(InflationCache {
            robot_radius,
            reach,
            span: ((reach + hd) / self.resolution).ceil() as isize + 1,
            outer2: (reach + hd) * (reach + hd),
            inner2: if inner > 0.0 { inner * inner } else { -1.0 },
            class: vec![0; self.total_voxels()],
        });
        let [nx, ny, nz] = self.dims;
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if self.is_occupied_index([x, y, z]) {
                        self.inflate_around([x, y, z]);
                    }
                }
            }
        }
    }

    fn inflate_around(&mut self, idx: [usize; 3]) {
        let [nx, ny, nz] = self.dims.map(|d| d as isize);
        let res2 = self.resolution * self.resolution;
        let cache = self.inflation.as_mut().expect("inflation cache enabled");
        let span = cache.span;
        let (x, y, z) = (idx[0] as isize, idx[1] as isize, idx[2] as isize);
        for cz in (z - span).max(0)..=(z + span).min(nz - 1) {
            for cy in (y - span).max(0)..=(y + span).min(ny - 1) {
                for cx in (x - span).max(0)..=(x + span).min(nx - 1) {
                    let (dx, dy, dz) = (cx - x, cy - y, cz - z);
                    let d2 = (dx * dx + dy * dy + dz * dz) as f64 * res2;
                    let l = (cx + nx * (cy + ny * cz)) as usize;
                    if d2 <= cache.inner2 {
                        cache.class[l] = 1;
                    } else if d2 <= cache.outer2 && cache.class[l] == 0 {
                        cache.class[l] = 2;
                    }
                }
            }
        }
    }

    pub(crate) fn any_occupied_center_within(&self, pos: &Vec3, reach: f64) -> bool {
        if self.occupied_count == 0 {
            return false;
        }
        let r2 = reach * reach;
        let mut lo = [0usize; 3];
        let mut hi = [0usize; 3];
        for i in 0..3 {
            // centers at origin + (k + 0.5) res; need |center - pos| <= reach
            let kmin = ((pos[i] - reach - self.origin[i]) / self.resolution - 0.5).ceil();
            let kmax = ((pos[i] + reach - self.origin[i]) / self.resolution - 0.5).floor();
            if kmax < 0.0 || kmin > (self.dims[i] - 1) as f64 {
                return false;
            }
            lo[i] = kmin.max(0.0) as usize;
            hi[i] = (kmax as usize).min(self.dims[i] - 1);
        }
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    if self.is_occupied_index([x, y, z]) && (self.center([x, y, z]) - pos).norm_squared() <= r2 {
                        return true;
                    }
                }
            }
        }
        false
    }

    /// Occupancy grid of the ground truth: every voxel whose cell intersects an
    /// obstacle, plus the outermost layer touching the world bounds.
    pub fn rasterize(env: &GroundTruthEnv, resolution: f64) -> Self {
        let mut map = Self::covering(&env.bounds, resolution);
        let [nx, ny, nz] = map.dims;
        let range = |map: &VoxelMap, b: &Aabb| -> Option<[(usize, usize); 3]> {
            let mut r = [(0, 0); 3];
            for i in 0..3 {
                let lo = ((b.min[i] - map.origin[i]) / map.resolution).floor().max(0.0);
                let hi = ((b.max[i] - map.origin[i]) / map.resolution).floor();
                if hi < 0.0 || lo > (map.dims[i] - 1) as f64 {
                    return None;
                }
                r[i] = (lo as usize, (hi as usize).min(map.dims[i] - 1));
            }
            Some(r)
        };
        for b in &env.boxes {
            if let Some(r) = range(&map, b) {
                for z in r[2].0..=r[2].1 {
                    for y in r[1].0..=r[1].1 {
                        for x in r[0].0..=r[0].1 {
                            map.set_occupied([x, y, z]);
                        }
                    }
                }
            }
        }
        for c in &env.cylinders {
            if let Some(r) = range(&map, &c.bounding_box()) {
                for z in r[2].0..=r[2].1 {
                    for y in r[1].0..=r[1].1 {
                        for x in r[0].0..=r[0].1 {
                            let cell = map.cell_box([x, y, z]);
                            // nearest point of the cell to the axis, in the x-y plane
                            let qx = c.center[0].clamp(cell.min[0], cell.max[0]);
                            let qy = c.center[1].clamp(cell.min[1], cell.max[1]);
                            let d2 = (qx - c.center[0]).powi(2) + (qy - c.center[1]).powi(2);
                            if d2 <= c.radius * c.radius {
                                map.set_occupied([x, y, z]);
                            }
                        }
                    }
                }
            }
        }
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    if x == 0 || y == 0 || z == 0 || x == nx - 1 || y == ny - 1 || z == nz - 1 {
                        map.set_occupied([x, y, z]);
                    }
                }
            }
        }
        if map.observed.is_some() {
            map.observed = Some(vec![u64::MAX; map.occupied.len()]);
        }
        map
    }

    pub fn cell_box(&self, idx: [usize; 3]) -> Aabb {
        let lo = self.origin
            + Vec3::new(idx[0] as f64, idx[1] as f64, idx[2] as f64) * self.resolution;
        Aabb::new(lo, lo + Vec3::repeat(self.resolution))
    }

    /// Writes the flat occupancy dump.
    ///
    /// ```text
    /// kinonav-voxels 1
    /// origin <x> <y> <z>
    /// resolution <r>
    /// dims <nx> <ny> <nz>
    /// <ny*nz lines of nx '0'/'1' characters; line index = y + ny*z>
    /// ```
    pub fn write_dump<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "kinonav-voxels 1")?;
        writeln!(w, "origin {} {} {}", self.origin.x, self.origin.y, self.origin.z)?;
        writeln!(w, "resolution {}", self.resolution)?;
        writeln!(w, "dims {} {} {}", self.dims[0], self.dims[1], self.dims[2])?;
        let mut line = String::with_capacity(self.dims[0]);
        for z in 0..self.dims[2] {
            for y in 0..self.dims[1] {
                line.clear();
                for x in 0..self.dims[0] {
                    line.push(if self.is_occupied_index([x, y, z]) { '1' } else { '0' });
                }
                writeln!(w, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn read_dump<R: BufRead>(r: R) -> io::Result<Self> {
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let mut lines = r.lines();
        let mut next = || -> io::Result<String> {
            lines.next().ok_or_else(|| bad("truncated voxel dump"))?
        };
        if next()?.trim() != "kinonav-voxels 1" {
            return Err(bad("missing voxel dump header"));
        }
        let floats = |s: String, key: &str| -> io::Result<Vec<f64>> {
            let rest = s.strip_prefix(key).ok_or_else(|| bad(key))?;
            rest.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|_| bad(key)))
                .collect()
        };
        let o = floats(next()?, "origin")?;
        let res = floats(next()?, "resolution")?;
        let d = floats(next()?, "dims")?;
        if o.len() != 3 || res.len() != 1 || d.len() != 3 || !(res[0] > 0.0) || d.iter().any(|&v| v < 1.0) {
            return Err(bad("malformed voxel dump header"));
        }
        let mut map = Self::new(Vec3::new(o[0], o[1], o[2]), res[0], [d[0] as usize, d[1] as usize, d[2] as usize]);
        for z in 0..map.dims[2] {
            for y in 0..map.dims[1] {
                let row = next()?;
                if row.len() != map.dims[0] {
                    return Err(bad("voxel row length mismatch"));
                }
                for (x, ch) in row.bytes().enumerate() {
                    match ch {
                        b'1' => {
                            map.set_occupied([x, y, z]);
                        }
                        b'0' => {}
                        _ => return Err(bad("voxel rows must contain only 0/1")),
                    }
                }
            }
        }
        Ok(map)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn map10() -> VoxelMap {
        VoxelMap::new(Vec3::zeros(), 0.5, [20, 20, 10])
    }

    #[test]
    fn empty_scan_leaves_map_unchanged() {
        let mut m = map10();
        let before = m.clone();
        assert_eq!(m.insert_scan(&[]), 0);
        assert_eq!(m, before);
    }

    #[test]
    fn point_at_center_marks_one_voxel() {
        let mut m = map10();
        let c = m.center([3, 4, 5]);
        m.insert_scan(&[c]);
        assert_eq!(m.occupied_count(), 1);
        assert!(m.is_occupied_index([3, 4, 5]));
        assert_eq!(m.index_of(&c), Some([3, 4, 5]));
    }

    #[test]
    fn insertion_is_idempotent() {
        let pts = vec![Vec3::new(1.1, 2.2, 0.3), Vec3::new(7.9, 0.1, 4.9), Vec3::new(-1.0, 0.0, 0.0)];
        let mut once = map10();
        once.insert_scan(&pts);
        let mut twice = once.clone();
        assert_eq!(twice.insert_scan(&pts), 0);
        assert_eq!(once, twice);
        assert_eq!(once.occupied_count(), 2);
    }

    #[test]
    fn inflated_queries() {
        let mut m = map10();
        assert!(!m.is_occupied_inflated(&Vec3::new(5.0, 5.0, 2.0), 0.3, UnknownPolicy::Free));
        let c = m.center([10, 10, 4]);
        m.insert_scan(&[c]);
        assert!(m.is_occupied_inflated(&c, 0.0, UnknownPolicy::Free));
        assert!(m.is_occupied_inflated(&(c + Vec3::new(0.4, 0.0, 0.0)), 0.5, UnknownPolicy::Free));
        // 0.9 m away, radius 0.3 + half diagonal 0.433 = 0.733
        assert!(!m.is_occupied_inflated(&(c + Vec3::new(0.9, 0.0, 0.0)), 0.3, UnknownPolicy::Free));
        // outside the grid counts as blocked
        assert!(m.is_occupied_inflated(&Vec3::new(-0.1, 1.0, 1.0), 0.0, UnknownPolicy::Free));
    }

    #[test]
    fn unknown_as_occupied_requires_observation() {
        let mut m = map10().with_observation_tracking();
        let p = Vec3::new(2.1, 2.1, 2.1);
        assert!(m.is_occupied_inflated(&p, 0.0, UnknownPolicy::Occupied));
        assert!(!m.is_occupied_inflated(&p, 0.0, UnknownPolicy::Free));
        m.mark_ray_observed(&Vec3::new(0.1, 2.1, 2.1), &Vec3::x(), 4.0);
        assert!(!m.is_occupied_inflated(&p, 0.0, UnknownPolicy::Occupied));
        assert_eq!(m.occupied_count(), 0);
    }

    #[test]
    fn rasterize_marks_obstacles_and_shell() {
        let mut env = GroundTruthEnv::empty(Aabb::new(Vec3::zeros(), Vec3::new(10.0, 10.0, 5.0)));
        env.boxes.push(Aabb::new(Vec3::new(4.2, 4.2, 0.0), Vec3::new(4.7, 4.7, 2.0)));
        let m = VoxelMap::rasterize(&env, 0.5);
        assert_eq!(m.dims(), [20, 20, 10]);
        assert!(m.is_occupied_at(&Vec3::new(4.5, 4.5, 1.0)));
        assert!(m.is_occupied_at(&Vec3::new(0.1, 5.0, 2.5)));
        assert!(!m.is_occupied_at(&Vec3::new(2.5, 2.5, 2.5)));
    }

    #[test]
    fn dump_round_trip() {
        let mut m = map10();
        m.insert_scan(&[Vec3::new(1.0, 1.0, 1.0), Vec3::new(9.9, 9.9, 4.9)]);
        let mut buf = Vec::new();
        m.write_dump(&mut buf).unwrap();
        let back = VoxelMap::read_dump(&buf[..]).unwrap();
        assert_eq!(back, m);
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("kinonav-voxels 1\norigin 0 0 0\nresolution 0.5\ndims 20 20 10\n"));
    }

    proptest! {
        #[test]
        fn insert_order_does_not_matter(
            pts in proptest::collection::vec((-1.0f64..11.0, -1.0f64..11.0, -1.0f64..6.0), 0..60),
        ) {
            let pts: Vec<Vec3> = pts.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect();
            let mut a = map10();
            a.insert_scan(&pts);
            let mut rev = pts.clone();
            rev.reverse();
            let mut b = map10();
            let (h1, h2) = rev.split_at(rev.len() / 2);
            b.insert_scan(h1);
            let before = b.clone();
            b.insert_scan(h2);
            for z in 0..10 { for y in 0..20 { for x in 0..20 {
                // monotone: nothing set before is cleared
                if before.is_occupied_index([x, y, z]) { prop_assert!(b.is_occupied_index([x, y, z])); }
            }}}
            prop_assert_eq!(&a, &b);
        }

        #[test]
        fn cell_center_round_trip(x in 0usize..20, y in 0usize..20, z in 0usize..10) {
            let m = map10();
            prop_assert_eq!(m.index_of(&m.center([x, y, z])), Some([x, y, z]));
        }

        #[test]
        fn inflation_cache_matches_exact_query(
            occ in proptest::collection::vec((0usize..20, 0usize..20, 0usize..10), 1..40),
            probes in proptest::collection::vec((-0.5f64..10.5, -0.5f64..10.5, -0.5f64..5.5), 50),
            radius in 0.0f64..1.2,
        ) {
            let mut m = map10();
            let (first, rest) = occ.split_at(occ.len() / 2);
            for &(x, y, z) in first { m.set_occupied([x, y, z]); }
            m.enable_inflation_cache(radius);
            // remaining voxels arrive after the cache exists
            for &(x, y, z) in rest { m.set_occupied([x, y, z]); }
            for (x, y, z) in probes {
                let p = Vec3::new(x, y, z);
                prop_assert_eq!(
                    m.is_occupied_inflated(&p, radius, UnknownPolicy::Free),
                    m.is_occupied_inflated_exact(&p, radius, UnknownPolicy::Free)
                );
            }
        }
    }
}
