//! Two-rate time indexing and tap-delay lines.
//!
//! The high-rate index `n` and the low-rate index `m` are related by
//! `n = delta * m + offset`. Instants of that form are the *update instants*
//! at which a new low-rate sample arrives; between them the most recent
//! low-rate frame is held.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RateSchedule {
    delta: usize,
    offset: usize,
}

impl RateSchedule {
    pub fn new(delta: usize, offset: usize) -> Result<Self> {
        if delta == 0 {
            return Err(Error::Argument("rate ratio must be at least 1".into()));
        }
        if offset >= delta {
            return Err(Error::Argument(format!(
                "offset {offset} must be below the rate ratio {delta}"
            )));
        }
        Ok(Self { delta, offset })
    }

    /// The single-rate schedule, `n = m`.
    pub fn identity() -> Self {
        Self {
            delta: 1,
            offset: 0,
        }
    }

    pub fn delta(&self) -> usize {
        self.delta
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn high_index(&self, m: usize) -> usize {
        self.delta * m + self.offset
    }

    pub fn low_index(&self, n: usize) -> Option<usize> {
        let shifted = n.checked_sub(self.offset)?;
        (shifted % self.delta == 0).then_some(shifted / self.delta)
    }

    pub fn is_update_instant(&self, n: usize) -> bool {
        self.low_index(n).is_some()
    }

    /// Index of the low-rate frame held at high-rate instant `n`, if any has
    /// arrived yet.
    pub fn held_index(&self, n: usize) -> Option<usize> {
        n.checked_sub(self.offset).map(|s| s / self.delta)
    }
}

/// Fixed-length regressor buffer, most recent sample first.
#[derive(Debug, Clone, PartialEq)]
pub struct TapDelayLine {
    taps: Vec<f64>,
}

impl TapDelayLine {
    /// A zeroed line of `length` taps.
    pub fn new(length: usize) -> Result<Self> {
        if length == 0 {
            return Err(Error::Argument("tap-delay line needs at least one tap".into()));
        }
        Ok(Self {
            taps: vec![0.0; length],
        })
    }

    pub fn from_taps(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Argument("tap-delay line needs at least one tap".into()));
        }
        Ok(Self { taps })
    }

    pub fn push(&mut self, sample: f64) {
        let len = self.taps.len();
        self.taps.copy_within(0..len - 1, 1);
        self.taps[0] = sample;
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn newest(&self) -> f64 {
        self.taps[0]
    }

    /// `taps[0], taps[stride], taps[2 * stride], ...`, `count` values.
    pub fn strided(&self, stride: usize, count: usize) -> impl Iterator<Item = f64> + '_ {
        self.taps.iter().step_by(stride.max(1)).take(count).copied()
    }
}

/// Per-node source statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSignalProfile {
    pub input_variance: f64,
    pub snr_db: f64,
}

impl NodeSignalProfile {
    pub fn new(input_variance: f64, snr_db: f64) -> Result<Self> {
        if !(input_variance > 0.0 && input_variance.is_finite()) {
            return Err(Error::Argument(format!(
                "input variance must be positive, got {input_variance}"
            )));
        }
        if !snr_db.is_finite() {
            return Err(Error::Argument("SNR must be finite".into()));
        }
        Ok(Self {
            input_variance,
            snr_db,
        })
    }
}

/// Draw one profile per node, uniformly over the given ranges.
pub fn draw_profiles<R: Rng + ?Sized>(
    rng: &mut R,
    nodes: usize,
    variance: (f64, f64),
    snr_db: (f64, f64),
) -> Result<Vec<NodeSignalProfile>> {
    (0..nodes)
        .map(|_| {
            let v = uniform(rng, variance);
            let s = uniform(rng, snr_db);
            NodeSignalProfile::new(v, s)
        })
        .collect()
}

fn uniform<R: Rng + ?Sized>(rng: &mut R, (lo, hi): (f64, f64)) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// `count` i.i.d. zero-mean Gaussian samples with the profile's variance.
pub fn generate_reference<R: Rng + ?Sized>(
    rng: &mut R,
    profile: &NodeSignalProfile,
    count: usize,
) -> Vec<f64> {
    let std_dev = profile.input_variance.sqrt();
    (0..count)
        .map(|_| std_dev * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// `u[m] = x[delta * m + offset]` for every in-range `m`.
pub fn decimate(x: &[f64], schedule: RateSchedule) -> Vec<f64> {
    x.iter()
        .skip(schedule.offset())
        .step_by(schedule.delta())
        .copied()
        .collect()
}

/// Bring a low-rate sequence back to the high rate by holding each sample for
/// `delta` instants, starting at its update instant. Instants before the
/// first update are zero. The result has `len` samples.
pub fn hold_upsample(u: &[f64], schedule: RateSchedule, len: usize) -> Vec<f64> {
    (0..len)
        .map(|n| {
            schedule
                .held_index(n)
                .and_then(|m| u.get(m))
                .copied()
                .unwrap_or(0.0)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::substream;
    use proptest::prelude::*;

    fn sched(d: usize, o: usize) -> RateSchedule {
        RateSchedule::new(d, o).unwrap()
    }

    #[test]
    fn high_index_examples() {
        assert_eq!(sched(2, 0).high_index(5), 10);
        assert_eq!(sched(1, 0).high_index(7), 7);
        assert_eq!(sched(3, 2).high_index(4), 14);
    }

    #[test]
    fn low_index_examples() {
        assert_eq!(sched(2, 0).low_index(10), Some(5));
        assert_eq!(sched(2, 0).low_index(7), None);
        assert_eq!(sched(1, 0).low_index(3), Some(3));
        assert_eq!(sched(3, 2).low_index(1), None);
    }

    #[test]
    fn schedule_rejects_bad_offsets() {
        assert!(RateSchedule::new(0, 0).is_err());
        assert!(RateSchedule::new(2, 2).is_err());
        assert!(RateSchedule::new(2, 5).is_err());
    }

    #[test]
    fn push_examples() {
        let mut line = TapDelayLine::new(3).unwrap();
        line.push(1.0);
        assert_eq!(line.taps(), &[1.0, 0.0, 0.0]);

        let mut line = TapDelayLine::from_taps(vec![3.0, 2.0, 1.0]).unwrap();
        line.push(4.0);
        assert_eq!(line.taps(), &[4.0, 3.0, 2.0]);

        let mut line = TapDelayLine::from_taps(vec![5.0]).unwrap();
        line.push(6.0);
        assert_eq!(line.taps(), &[6.0]);
    }

    #[test]
    fn zero_length_line_rejected() {
        assert!(TapDelayLine::new(0).is_err());
    }

    #[test]
    fn decimate_examples() {
        let x = [0.0, 1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(decimate(&x, sched(2, 0)), vec![0.0, 2.0, 4.0]);
        assert_eq!(decimate(&x[..4], sched(1, 0)), x[..4].to_vec());
        assert_eq!(decimate(&[9.0, 8.0, 7.0], sched(2, 1)), vec![8.0]);
        assert!(decimate(&[1.0], sched(3, 2)).is_empty());
    }

    #[test]
    fn hold_upsample_holds_frames() {
        let up = hold_upsample(&[1.0, 2.0], sched(3, 1), 8);
        assert_eq!(up, vec![0.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 0.0]);
    }

    #[test]
    fn reference_empty_request() {
        let p = NodeSignalProfile::new(1.0, 20.0).unwrap();
        assert!(generate_reference(&mut substream(3, &[]), &p, 0).is_empty());
    }

    #[test]
    fn reference_variance_matches_profile() {
        let p = NodeSignalProfile::new(4.0, 20.0).unwrap();
        let x = generate_reference(&mut substream(42, &[]), &p, 100_000);
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        assert!((var - 4.0).abs() / 4.0 < 0.05, "sample variance {var}");
    }

    #[test]
    fn reference_is_deterministic() {
        let p = NodeSignalProfile::new(0.5, 10.0).unwrap();
        let a = generate_reference(&mut substream(9, &[1]), &p, 64);
        let b = generate_reference(&mut substream(9, &[1]), &p, 64);
        assert_eq!(a, b);
    }

    #[test]
    fn profile_rejects_nonpositive_variance() {
        assert!(NodeSignalProfile::new(0.0, 10.0).is_err());
        assert!(NodeSignalProfile::new(-1.0, 10.0).is_err());
    }

    proptest! {
        #[test]
        fn index_round_trip(delta in 1usize..8, off in 0usize..8, m in 0usize..10_000) {
            let s = sched(delta, off % delta);
            prop_assert_eq!(s.low_index(s.high_index(m)), Some(m));
        }

        #[test]
        fn identity_schedule(n in 0usize..10_000, x in prop::collection::vec(-5.0f64..5.0, 0..40)) {
            let s = RateSchedule::identity();
            prop_assert_eq!(s.high_index(n), n);
            prop_assert_eq!(decimate(&x, s), x);
        }

        #[test]
        fn decimate_agrees_with_high_index(
            delta in 1usize..6, off in 0usize..6, x in prop::collection::vec(-5.0f64..5.0, 0..60)
        ) {
            let s = sched(delta, off % delta);
            let u = decimate(&x, s);
            for (m, v) in u.iter().enumerate() {
                prop_assert_eq!(*v, x[s.high_index(m)]);
            }
            prop_assert_eq!(u.len(), (0..x.len()).filter(|&n| s.is_update_instant(n)).count());
        }

        #[test]
        fn pushes_keep_most_recent_first(len in 1usize..10, samples in prop::collection::vec(-5.0f64..5.0, 10..40)) {
            let mut line = TapDelayLine::new(len).unwrap();
            for &s in &samples {
                line.push(s);
            }
            let expected: Vec<f64> = samples.iter().rev().take(len).copied().collect();
            prop_assert_eq!(line.taps(), &expected[..]);
        }
    }
}
