//! Capacity-bounded episodic memory filled by reservoir sampling.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Reservoir-sampled store (Vitter's Algorithm R).
///
/// After `n` offers every offered item is retained with probability
/// `min(1, capacity / n)`.
#[derive(Debug, Clone)]
pub struct ReplayBuffer<T> {
    capacity: usize,
    seen: u64,
    slots: Vec<T>,
}

impl<T> ReplayBuffer<T> {
    /// A zero-capacity buffer is allowed: it never stores anything.
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            seen: 0,
            slots: Vec::with_capacity(capacity.min(4096)),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Total number of items offered so far.
    pub fn seen_count(&self) -> u64 {
        self.seen
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn items(&self) -> &[T] {
        &self.slots
    }

    /// Offers `item`. While filling it is appended; afterwards it replaces a
    /// uniformly chosen slot with probability `capacity / (seen + 1)`.
    pub fn push<R: Rng + ?Sized>(&mut self, item: T, rng: &mut R) {
        if (self.seen as usize) < self.capacity {
            self.slots.push(item);
        } else if self.capacity > 0 {
            let j = rng.gen_range(0..=self.seen);
            if (j as usize) < self.capacity {
                self.slots[j as usize] = item;
            }
        }
        self.seen += 1;
    }

    /// Draws `min(n, len)` distinct stored items uniformly at random.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<&T> {
        let m = n.min(self.slots.len());
        if m == 0 {
            return Vec::new();
        }
        index::sample(rng, self.slots.len(), m)
            .into_iter()
            .map(|i| &self.slots[i])
            .collect()
    }
}

/// Upper-tail p-value of a Pearson test that every item was retained equally
/// often, when each of `trials` rounds retains exactly `per_trial` of the
/// `counts.len()` items. The statistic is scaled for the negative
/// correlation of fixed-size draws so that it is `χ²(N − 1)` under
/// uniformity.
pub fn uniformity_p_value(counts: &[u64], trials: u64, per_trial: usize) -> Result<f64> {
    let n = counts.len();
    if n < 2 || per_trial == 0 || per_trial >= n || trials == 0 {
        return Err(Error::InvalidArgument(format!(
            "uniformity test needs 0 < per_trial < items, got {per_trial} of {n} over {trials} trials"
        )));
    }
    let nf = n as f64;
    let p = per_trial as f64 / nf;
    let expected = trials as f64 * p;
    let var = trials as f64 * p * (1.0 - p) * nf / (nf - 1.0);
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / var).sum();
    let dist = ChiSquared::new(nf - 1.0).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    Ok(1.0 - dist.cdf(stat))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub capacity: usize,
    pub stream_len: usize,
    pub trials: u64,
    /// Smallest and largest per-item retention frequency.
    pub min_freq: f64,
    pub max_freq: f64,
    pub p_value: f64,
}

/// Offers `0..stream_len` to a fresh buffer `trials` times and tests the
/// per-item retention counts against the uniform `capacity / stream_len`.
pub fn inclusion_test<R: Rng + ?Sized>(
    capacity: usize,
    stream_len: usize,
    trials: u64,
    rng: &mut R,
) -> Result<InclusionReport> {
    let mut counts = vec![0u64; stream_len];
    for _ in 0..trials {
        let mut buf = ReplayBuffer::new(capacity);
        for i in 0..stream_len {
            buf.push(i, rng);
        }
        for &i in buf.items() {
            counts[i] += 1;
        }
    }
    let p_value = uniformity_p_value(&counts, trials, capacity)?;
    let freq = |c: u64| c as f64 / trials as f64;
    Ok(InclusionReport {
        capacity,
        stream_len,
        trials,
        min_freq: counts.iter().copied().min().map_or(0.0, freq),
        max_freq: counts.iter().copied().max().map_or(0.0, freq),
        p_value,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_xoshiro::Xoshiro256StarStar;

    fn rng(seed: u64) -> Xoshiro256StarStar {
        Xoshiro256StarStar::seed_from_u64(seed)
    }

    #[test]
    fn fill_phase_keeps_everything_in_order() {
        let mut buf = ReplayBuffer::new(5);
        let mut r = rng(0);
        for i in 0..5 {
            buf.push(i, &mut r);
        }
        assert_eq!(buf.items(), &[0, 1, 2, 3, 4]);
        assert_eq!(buf.seen_count(), 5);
    }

    #[test]
    fn zero_capacity_stores_nothing() {
        let mut buf = ReplayBuffer::new(0);
        let mut r = rng(0);
        for i in 0..10 {
            buf.push(i, &mut r);
        }
        assert!(buf.is_empty());
        assert_eq!(buf.seen_count(), 10);
    }

    #[test]
    fn sampling_edge_cases() {
        let mut r = rng(1);
        let empty: ReplayBuffer<u32> = ReplayBuffer::new(10);
        assert!(empty.sample(10, &mut r).is_empty());

        let mut buf = ReplayBuffer::new(10);
        for i in 0..5 {
            buf.push(i, &mut r);
        }
        let mut got: Vec<i32> = buf.sample(10, &mut r).into_iter().copied().collect();
        got.sort();
        assert_eq!(got, vec![0, 1, 2, 3, 4]);
        assert!(buf.sample(0, &mut r).is_empty());
    }

    #[test]
    fn capacity_one_keeps_each_item_with_probability_one_over_n() {
        let n = 10;
        let trials = 100_000;
        let mut counts = vec![0u64; n];
        let mut r = rng(2);
        for _ in 0..trials {
            let mut buf = ReplayBuffer::new(1);
            for i in 0..n {
                buf.push(i, &mut r);
            }
            counts[buf.items()[0]] += 1;
        }
        let p = uniformity_p_value(&counts, trials, 1).unwrap();
        assert!(p > 0.01, "p = {p}, counts = {counts:?}");
    }

    #[test]
    fn sample_is_uniform_over_slots() {
        let mut r = rng(3);
        let mut buf = ReplayBuffer::new(200);
        for i in 0..200usize {
            buf.push(i, &mut r);
        }
        let trials = 20_000;
        let mut counts = vec![0u64; 200];
        for _ in 0..trials {
            let s = buf.sample(10, &mut r);
            assert_eq!(s.len(), 10);
            for &&i in &s {
                counts[i] += 1;
            }
        }
        let p = uniformity_p_value(&counts, trials, 10).unwrap();
        assert!(p > 0.01, "p = {p}");
    }

    #[test]
    fn inclusion_test_reports_frequencies() {
        let r = inclusion_test(3, 12, 20_000, &mut rng(5)).unwrap();
        assert!(r.p_value > 0.01, "{r:?}");
        assert!((r.min_freq - 0.25).abs() < 0.02 && (r.max_freq - 0.25).abs() < 0.02, "{r:?}");
    }

    #[test]
    fn skewed_counts_are_rejected() {
        let mut counts = vec![1000u64; 10];
        counts[0] = 1300;
        counts[1] = 700;
        assert!(uniformity_p_value(&counts, 10_000, 1).unwrap() < 1e-6);
        assert!(uniformity_p_value(&counts, 10_000, 10).is_err());
    }

    #[test]
    fn sample_is_without_replacement() {
        let mut r = rng(4);
        let mut buf = ReplayBuffer::new(30);
        for i in 0..30 {
            buf.push(i, &mut r);
        }
        for _ in 0..100 {
            let mut s: Vec<i32> = buf.sample(10, &mut r).into_iter().copied().collect();
            s.sort();
            s.dedup();
            assert_eq!(s.len(), 10);
        }
    }

    proptest! {
        #[test]
        fn length_is_min_of_seen_and_capacity(cap in 0usize..50, pushes in 0usize..300, seed in any::<u64>()) {
            let mut r = rng(seed);
            let mut buf = ReplayBuffer::new(cap);
            let mut last_seen = 0;
            for i in 0..pushes {
                buf.push(i, &mut r);
                prop_assert!(buf.len() <= cap);
                prop_assert!(buf.seen_count() > last_seen);
                last_seen = buf.seen_count();
            }
            prop_assert_eq!(buf.len(), pushes.min(cap));
        }

        #[test]
        fn inclusion_is_uniform_for_arbitrary_sizes(cap in 1usize..8, extra in 0usize..24, seed in any::<u64>()) {
            let n = cap + extra + 1;
            let trials = 4_000u64;
            let mut r = rng(seed);
            let mut counts = vec![0u64; n];
            for _ in 0..trials {
                let mut buf = ReplayBuffer::new(cap);
                for i in 0..n {
                    buf.push(i, &mut r);
                }
                for &i in buf.items() {
                    counts[i] += 1;
                }
            }
            // 4.5σ binomial band per item keeps the family-wise false alarm
            // rate negligible across all proptest cases.
            let p = cap as f64 / n as f64;
            let mean = trials as f64 * p;
            let sd = (trials as f64 * p * (1.0 - p)).sqrt();
            for &c in &counts {
                prop_assert!((c as f64 - mean).abs() <= 4.5 * sd + 1e-9, "count {} vs mean {}", c, mean);
            }
        }
    }
}
