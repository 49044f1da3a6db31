//! Queue representation of the two-class ring measures: clients (arrival
//! sites) are matched to the nearest unused service to their left, used
//! services become first-class particles, unused services second-class.
//! Scanning the ring right to left, the queue length is a reflected walk
//! whose clipping events are exactly the unused services; anchoring an
//! unused service at the last site identifies the walk with the pinned
//! bridge of the ring mixture.

use rand::Rng;

use crate::error::{Error, Result};
use crate::models::ring::RingParams;
use crate::oracle::{self, ExactDistribution};
use crate::scalar::Scalar;

/// Arrival and service indicator sets on the ring.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QueueInstance {
    pub arrivals: Vec<bool>,
    pub services: Vec<bool>,
}

impl QueueInstance {
    pub fn new(arrivals: Vec<bool>, services: Vec<bool>) -> Result<Self> {
        if arrivals.len() != services.len() || arrivals.is_empty() {
            return Err(Error::ShapeMismatch);
        }
        let na = arrivals.iter().filter(|&&a| a).count();
        let ns = services.iter().filter(|&&s| s).count();
        if na >= ns {
            return Err(Error::InvalidCounts);
        }
        Ok(QueueInstance { arrivals, services })
    }

    pub fn len(&self) -> usize {
        self.arrivals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arrivals.is_empty()
    }

    /// Used-service flags by the right-to-left queue scan (LCFS service
    /// discipline). Two passes around the ring: the first drains the
    /// arbitrary initial condition, the second is stationary and is the
    /// one recorded.
    pub fn used_services(&self) -> Vec<bool> {
        let n = self.len();
        let mut used = vec![false; n];
        let mut q = 0usize;
        for pass in 0..2 {
            for i in (0..n).rev() {
                if self.arrivals[i] {
                    q += 1;
                }
                if self.services[i] {
                    if q > 0 {
                        q -= 1;
                        if pass == 1 {
                            used[i] = true;
                        }
                    } else if pass == 1 {
                        used[i] = false;
                    }
                }
            }
        }
        used
    }

    /// Particle word: first class on used services, second class on unused
    /// services, empty elsewhere.
    pub fn word(&self) -> Vec<u8> {
        let used = self.used_services();
        (0..self.len())
            .map(|i| {
                if !self.services[i] {
                    0
                } else if used[i] {
                    1
                } else {
                    2
                }
            })
            .collect()
    }

    /// The hidden queue path of the anchored frame: `zeta[n-1] = 0` seeded
    /// at the left edge of the anchor site, `zeta[i] = max(zeta[i+1] +
    /// A_i - S_i, 0)` scanning leftward (0-based edges; `zeta[i]` is the
    /// edge left of site `i`). `None` when the instance is not anchored
    /// (anchor site must carry an unused service, i.e. the wrap edge must
    /// come back to zero).
    pub fn anchored_path(&self) -> Option<Vec<usize>> {
        let n = self.len();
        if self.arrivals[n - 1] || !self.services[n - 1] {
            return None;
        }
        let mut zeta = vec![0usize; n];
        for i in (0..n - 1).rev() {
            let up = usize::from(self.arrivals[i]);
            let down = usize::from(self.services[i]);
            zeta[i] = (zeta[i + 1] + up).saturating_sub(down);
        }
        (zeta[0] == 0).then_some(zeta)
    }

    /// Whether the instance is admissible for the anchored construction.
    pub fn is_anchored(&self) -> bool {
        self.anchored_path().is_some()
    }

    /// The word of an anchored instance read off the queue path and the
    /// site indicators (the mixture route): second class where a service
    /// meets an empty queue, first class where it serves, hole otherwise.
    /// Site `n` (the anchor) is the pinned second-class particle.
    pub fn anchored_word(&self) -> Option<Vec<u8>> {
        let zeta = self.anchored_path()?;
        let n = self.len();
        let mut word = vec![0u8; n];
        word[n - 1] = 2;
        for i in 0..n - 1 {
            let right_queue = if i + 1 < n { zeta[(i + 1) % n] } else { 0 };
            if self.services[i] {
                if right_queue > 0 || self.arrivals[i] {
                    word[i] = 1;
                } else {
                    word[i] = 2;
                }
            }
        }
        Some(word)
    }
}

/// Literal matching oracle: repeatedly pick an unmatched client and serve
/// it at the nearest unused service weakly to its left (cyclically). The
/// resulting used-service set does not depend on the processing order.
pub fn lcfs_matching_oracle(inst: &QueueInstance, client_order: &[usize]) -> Vec<bool> {
    let n = inst.len();
    let mut used = vec![false; n];
    for &c in client_order {
        assert!(inst.arrivals[c], "client order must list arrival sites");
        for d in 0..n {
            let j = (c + n - d) % n;
            if inst.services[j] && !used[j] {
                used[j] = true;
                break;
            }
        }
    }
    used
}

fn subsets_of_size(n: usize, k: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    for mask in 0..(1usize << n) {
        if mask.count_ones() as usize == k {
            out.push((0..n).map(|i| (mask >> i) & 1 == 1).collect());
        }
    }
    out
}

/// Exact law of the queue construction: uniform anchored instances with
/// `|arrivals| = n1`, `|services| = n1 + n2`, pushed through the matching
/// and averaged over a uniform rotation. Equals the canonical ring measure.
pub fn queue_enumerate<T: Scalar>(p: &RingParams) -> Result<ExactDistribution<T>> {
    let n = p.n;
    if n > 12 {
        return Err(Error::TooLarge { size: 1u128 << (2 * n), limit: 1 << 24 });
    }
    let size = 3usize.pow(n as u32);
    let mut table = vec![T::zero(); size];
    let mut admissible = 0usize;
    for arrivals in subsets_of_size(n, p.n1) {
        if arrivals[n - 1] {
            continue;
        }
        for services in subsets_of_size(n, p.n1 + p.n2) {
            if !services[n - 1] {
                continue;
            }
            let inst = QueueInstance::new(arrivals.clone(), services.clone())?;
            let Some(word) = inst.anchored_word() else {
                continue;
            };
            admissible += 1;
            for shift in 0..n {
                let rotated: Vec<u8> = (0..n).map(|i| word[(i + n - shift) % n]).collect();
                let idx = oracle::encode_word(3, &rotated);
                table[idx] = table[idx] + T::one();
            }
        }
    }
    if admissible == 0 {
        return Err(Error::EmptySector);
    }
    ExactDistribution::from_weights(n, 3, table)
}

/// One sample of the queue construction: uniform sets with the required
/// counts, rejected until anchored, then matched and uniformly rotated.
pub fn queue_sample<R: Rng + ?Sized>(p: &RingParams, rng: &mut R) -> Result<Vec<u8>> {
    let n = p.n;
    let draw_subset = |rng: &mut R, k: usize| -> Vec<bool> {
        // Floyd's algorithm for a uniform k-subset.
        let mut chosen = vec![false; n];
        for j in (n - k)..n {
            let t = rng.random_range(0..=j);
            if chosen[t] {
                chosen[j] = true;
            } else {
                chosen[t] = true;
            }
        }
        chosen
    };
    loop {
        let arrivals = draw_subset(rng, p.n1);
        let services = draw_subset(rng, p.n1 + p.n2);
        let inst = QueueInstance::new(arrivals, services)?;
        if let Some(word) = inst.anchored_word() {
            let shift = rng.random_range(0..n);
            return Ok((0..n).map(|i| word[(i + n - shift) % n]).collect());
        }
    }
}
