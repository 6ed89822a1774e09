//! Piecewise polynomial trajectories in local segment time.

use thiserror::Error;

use crate::state::Vec3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolyError {
    #[error("time {t} outside trajectory span [0, {duration}]")]
    OutOfRange { t: f64, duration: f64 },
    #[error("derivative order {requested} exceeds polynomial order {order}")]
    DerivativeOrder { requested: usize, order: usize },
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("trajectory has no segments")]
    Empty,
}

/// One polynomial piece. Coefficients are ascending powers of local time
/// `t - segment_start`, one list per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PolySegment {
    coeffs: [Vec<f64>; 3],
    duration: f64,
}

impl PolySegment {
    pub fn new(coeffs: [Vec<f64>; 3], duration: f64) -> Result<Self, PolyError> {
        if !(duration > 0.0 && duration.is_finite()) {
            return Err(PolyError::InvalidSegment(format!(
                "duration must be positive, got {duration}"
            )));
        }
        let n = coeffs[0].len();
        if n == 0 || coeffs.iter().any(|c| c.len() != n) {
            return Err(PolyError::InvalidSegment(
                "coefficient lists must be non-empty and equal length across axes".into(),
            ));
        }
        if coeffs.iter().flatten().any(|c| !c.is_finite()) {
            return Err(PolyError::InvalidSegment("non-finite coefficient".into()));
        }
        Ok(Self { coeffs, duration })
    }

    /// Constant segment holding `p`.
    pub fn constant(p: Vec3, duration: f64) -> Result<Self, PolyError> {
        Self::new([vec![p.x], vec![p.y], vec![p.z]], duration)
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn order(&self) -> usize {
        self.coeffs[0].len() - 1
    }

    pub fn coeffs(&self, axis: usize) -> &[f64] {
        &self.coeffs[axis]
    }

    /// `deriv`-th derivative at local time `t`; no range check.
    pub fn eval_local(&self, t: f64, deriv: usize) -> Vec3 {
        Vec3::new(
            eval_axis(&self.coeffs[0], t, deriv),
            eval_axis(&self.coeffs[1], t, deriv),
            eval_axis(&self.coeffs[2], t, deriv),
        )
    }
}

/// Horner evaluation of the `deriv`-th derivative of an ascending-power polynomial.
pub fn eval_axis(coeffs: &[f64], t: f64, deriv: usize) -> f64 {
    if deriv >= coeffs.len() {
        return 0.0;
    }
    let mut acc = 0.0;
    for k in (deriv..coeffs.len()).rev() {
        acc = acc * t + coeffs[k] * falling_factorial(k, deriv);
    }
    acc
}

/// k · (k-1) · … · (k-r+1)
pub fn falling_factorial(k: usize, r: usize) -> f64 {
    ((k + 1 - r)..=k).fold(1.0, |acc, i| acc * i as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyTrajectory {
    segments: Vec<PolySegment>,
    offsets: Vec<f64>,
    start_time: f64,
}

impl PolyTrajectory {
    pub fn new(segments: Vec<PolySegment>, start_time: f64) -> Result<Self, PolyError> {
        if segments.is_empty() {
            return Err(PolyError::Empty);
        }
        let order = segments[0].order();
        if segments.iter().any(|s| s.order() != order) {
            return Err(PolyError::InvalidSegment(
                "all segments must share one polynomial order".into(),
            ));
        }
        let mut offsets = Vec::with_capacity(segments.len() + 1);
        let mut acc = 0.0;
        offsets.push(acc);
        for s in &segments {
            acc += s.duration;
            offsets.push(acc);
        }
        Ok(Self {
            segments,
            offsets,
            start_time,
        })
    }

    pub fn segments(&self) -> &[PolySegment] {
        &self.segments
    }

    pub fn start_time(&self) -> f64 {
        self.start_time
    }

    pub fn with_start_time(mut self, start_time: f64) -> Self {
        self.start_time = start_time;
        self
    }

    pub fn duration(&self) -> f64 {
        *self.offsets.last().unwrap()
    }

    pub fn order(&self) -> usize {
        self.segments[0].order()
    }

    /// Times (relative to start) at which segments begin, plus the final end time.
    pub fn joint_times(&self) -> &[f64] {
        &self.offsets
    }

    /// `deriv`-th derivative at time `t` measured from the trajectory start.
    /// At a joint the later segment is used.
    pub fn eval(&self, t: f64, deriv: usize) -> Result<Vec3, PolyError> {
        let duration = self.duration();
        if !(0.0..=duration).contains(&t) {
            return Err(PolyError::OutOfRange { t, duration });
        }
        if deriv > self.order() {
            return Err(PolyError::DerivativeOrder {
                requested: deriv,
                order: self.order(),
            });
        }
        let (idx, local) = self.locate(t);
        Ok(self.segments[idx].eval_local(local, deriv))
    }

    /// Left-sided value at the end of segment `idx` (used for continuity checks).
    pub fn eval_segment_end(&self, idx: usize, deriv: usize) -> Vec3 {
        let s = &self.segments[idx];
        s.eval_local(s.duration, deriv)
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.segments.len();
        // first offset strictly greater than t, minus one
        let idx = self.offsets[1..n].partition_point(|&o| o <= t);
        (idx, t - self.offsets[idx])
    }
}

/// Free-function form of [`PolyTrajectory::eval`].
pub fn poly_eval(traj: &PolyTrajectory, t: f64, deriv_order: usize) -> Result<Vec3, PolyError> {
    traj.eval(t, deriv_order)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn single(coeffs: [Vec<f64>; 3], duration: f64) -> PolyTrajectory {
        PolyTrajectory::new(vec![PolySegment::new(coeffs, duration).unwrap()], 0.0).unwrap()
    }

    #[test]
    fn constant_segment() {
        let traj = single([vec![5.0], vec![5.0], vec![5.0]], 3.0);
        for t in [0.0, 1.3, 3.0] {
            assert_eq!(traj.eval(t, 0).unwrap(), Vec3::new(5.0, 5.0, 5.0));
        }
    }

    #[test]
    fn quadratic_derivative() {
        let traj = single([vec![0.0, 0.0, 1.0], vec![0.0], vec![0.0]].map(pad3), 3.0);
        assert_relative_eq!(traj.eval(2.0, 1).unwrap().x, 4.0);
        assert_relative_eq!(traj.eval(2.0, 2).unwrap().x, 2.0);
    }

    fn pad3(mut c: Vec<f64>) -> Vec<f64> {
        c.resize(3, 0.0);
        c
    }

    #[test]
    fn out_of_range_and_order_errors() {
        let traj = single([vec![1.0, 2.0], vec![0.0, 0.0], vec![0.0, 0.0]], 1.0);
        assert!(matches!(traj.eval(1.5, 0), Err(PolyError::OutOfRange { .. })));
        assert!(matches!(traj.eval(-0.1, 0), Err(PolyError::OutOfRange { .. })));
        assert!(matches!(
            traj.eval(0.5, 2),
            Err(PolyError::DerivativeOrder { .. })
        ));
    }

    #[test]
    fn joint_uses_later_segment() {
        let a = PolySegment::constant(Vec3::new(1.0, 1.0, 1.0), 1.0).unwrap();
        let b = PolySegment::constant(Vec3::new(2.0, 2.0, 2.0), 1.0).unwrap();
        let traj = PolyTrajectory::new(vec![a, b], 10.0).unwrap();
        assert_eq!(traj.eval(1.0, 0).unwrap().x, 2.0);
        assert_eq!(traj.eval(0.999, 0).unwrap().x, 1.0);
        assert_eq!(traj.eval(2.0, 0).unwrap().x, 2.0);
        assert_eq!(traj.duration(), 2.0);
    }

    #[test]
    fn rejects_bad_segments() {
        assert!(PolySegment::new([vec![1.0], vec![1.0], vec![1.0]], 0.0).is_err());
        assert!(PolySegment::new([vec![1.0], vec![1.0, 2.0], vec![1.0]], 1.0).is_err());
        assert!(PolyTrajectory::new(vec![], 0.0).is_err());
    }

    fn random_degree5(rng: &mut ChaCha8Rng) -> PolyTrajectory {
        let mut axis = || (0..6).map(|_| rng.random_range(-2.0..2.0)).collect::<Vec<_>>();
        single([axis(), axis(), axis()], 2.0)
    }

    #[test]
    fn derivative_matches_central_difference() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let h = 1e-5;
        for _ in 0..20 {
            let traj = random_degree5(&mut rng);
            for _ in 0..100 {
                let t: f64 = rng.random_range(0.01..1.99);
                for k in 1..=5 {
                    let fd = (traj.eval(t + h, k - 1).unwrap() - traj.eval(t - h, k - 1).unwrap())
                        / (2.0 * h);
                    let exact = traj.eval(t, k).unwrap();
                    for a in 0..3 {
                        let scale = exact[a].abs().max(1.0);
                        assert!(
                            (fd[a] - exact[a]).abs() / scale < 1e-5,
                            "deriv {k} axis {a}: fd {} vs {}",
                            fd[a],
                            exact[a]
                        );
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn horner_matches_naive_sum(
            coeffs in proptest::collection::vec(-10.0f64..10.0, 1..9),
            t in -2.0f64..2.0,
        ) {
            let naive: f64 = coeffs.iter().enumerate().map(|(k, c)| c * t.powi(k as i32)).sum();
            prop_assert!((eval_axis(&coeffs, t, 0) - naive).abs() < 1e-9 * naive.abs().max(1.0));
        }
    }
}
