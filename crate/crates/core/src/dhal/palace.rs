//! The memory palace: a bounded ring of per-step experiences shared by all
//! vehicles, with uniform sampling for discriminator training.

use rand::Rng;
use std::collections::VecDeque;

use super::encoding::CompactSnapshot;

/// One stored step: state, action, immediate labels, and the trajectory-wide
/// final-collision label.
#[derive(Clone, Debug)]
pub struct Experience {
    pub snapshot: CompactSnapshot,
    /// Applied acceleration in m/s^2.
    pub action: f32,
    pub l_ac: bool,
    pub l_pc: bool,
    pub delta_c: bool,
}

impl Experience {
    pub fn l_c(&self) -> bool {
        self.l_ac || self.l_pc
    }
}

#[derive(Debug, Default)]
pub struct MemoryPalace {
    buf: VecDeque<Experience>,
    capacity: usize,
}

impl MemoryPalace {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0);
        MemoryPalace { buf: VecDeque::with_capacity(capacity.min(1 << 20)), capacity }
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Append a whole vehicle trajectory, stamping every step with the shared
    /// final-collision label. Oldest experiences are evicted first.
    pub fn push_trajectory(
        &mut self,
        steps: Vec<(CompactSnapshot, f32, bool, bool)>,
        delta_c: bool,
    ) {
        for (snapshot, action, l_ac, l_pc) in steps {
            if self.buf.len() == self.capacity {
                self.buf.pop_front();
            }
            self.buf.push_back(Experience { snapshot, action, l_ac, l_pc, delta_c });
        }
    }

    /// Uniform sample of `n` experiences (with replacement).
    pub fn sample<R: Rng>(&self, rng: &mut R, n: usize) -> Vec<&Experience> {
        (0..n).map(|_| &self.buf[rng.random_range(0..self.buf.len())]).collect()
    }

    /// Uniform sample from the newest `window` experiences; used to feed the
    /// actor with fresh states.
    pub fn sample_recent<R: Rng>(&self, rng: &mut R, n: usize, window: usize) -> Vec<&Experience> {
        let lo = self.buf.len().saturating_sub(window);
        (0..n).map(|_| &self.buf[rng.random_range(lo..self.buf.len())]).collect()
    }

    /// Fraction of stored experiences that ended in a collision.
    pub fn collision_fraction(&self) -> f64 {
        if self.buf.is_empty() {
            return 0.0;
        }
        self.buf.iter().filter(|e| e.delta_c).count() as f64 / self.buf.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn snap(v: f32) -> CompactSnapshot {
        CompactSnapshot { ego_trajectory: 0, ego_s: 0.0, ego_v: v, seen: vec![] }
    }

    #[test]
    fn labels_are_broadcast_over_the_trajectory() {
        let mut palace = MemoryPalace::new(100);
        palace.push_trajectory(
            vec![(snap(1.0), 0.1, false, false), (snap(2.0), 0.2, true, false), (snap(3.0), 0.3, false, true)],
            false,
        );
        assert_eq!(palace.len(), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(palace.sample(&mut rng, 10).iter().all(|e| !e.delta_c));

        palace.push_trajectory(vec![(snap(4.0), 0.4, false, false)], true);
        assert!((palace.collision_fraction() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn ring_evicts_oldest_first() {
        let mut palace = MemoryPalace::new(3);
        palace.push_trajectory(
            vec![(snap(1.0), 0.0, false, false), (snap(2.0), 0.0, false, false), (snap(3.0), 0.0, false, false)],
            false,
        );
        // Pushing 3 more evicts the first 3.
        palace.push_trajectory(
            vec![(snap(4.0), 0.0, false, false), (snap(5.0), 0.0, false, false), (snap(6.0), 0.0, false, false)],
            true,
        );
        assert_eq!(palace.len(), 3);
        assert!((palace.collision_fraction() - 1.0).abs() < 1e-12);
    }
}
