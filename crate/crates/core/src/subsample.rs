//! Fast global-covariance path: restrict the peer multi-index sum to a random
//! subset per peer thread.
//!
//! The full global covariance for thread m sums an outer product over *every*
//! multi-index of every peer thread, which grows with the peer dimensions.
//! Restricting each peer n to a random subset `S_n` of its multi-indices keeps
//! the estimator consistent while the cost scales with the subset sizes.
//! With every `S_n` equal to the full index set the restricted estimator
//! reduces to the full one exactly.

use crate::data::Collection;
use crate::tensor::decode_offset;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum SubsampleError {
    #[error("budget {budget} is below the number of peer threads {peers}")]
    BudgetTooSmall { budget: usize, peers: usize },

    #[error("target thread {0} out of range")]
    ThreadOutOfRange(usize),

    #[error("collection has a single thread; no peers to subsample")]
    NoPeers,
}

/// Random multi-index subsets, one per peer of a target thread.
///
/// Indices are stored as flat offsets into each peer's canonical layout,
/// sorted ascending; they are distinct within each peer (sampling is uniform
/// without replacement). The draw is reproducible: the master seed fans out
/// into one sub-stream per peer thread via [`crate::derive_seed`], so the
/// sets do not depend on worker counts or draw interleaving.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IndexSets {
    pub target_thread: usize,
    pub seed: u64,
    /// `(peer thread, flat offsets)` in ascending peer order.
    pub sets: Vec<(usize, Vec<usize>)>,
    /// True when the requested budget exceeded the total peer size and the
    /// draw was clipped to the full index sets.
    pub clipped: bool,
}

impl IndexSets {
    /// Total number of selected multi-indices across peers.
    pub fn total(&self) -> usize {
        self.sets.iter().map(|(_, s)| s.len()).sum()
    }

    /// Selected multi-indices of one peer in 0-based per-mode form.
    pub fn multi_indices(&self, c: &Collection, peer: usize) -> Vec<Vec<usize>> {
        let dims = c.thread(peer).dims();
        self.sets
            .iter()
            .find(|(n, _)| *n == peer)
            .map(|(_, flats)| flats.iter().map(|&f| decode_offset(dims, f)).collect())
            .unwrap_or_default()
    }
}

/// Draws per-peer index subsets for target thread `m` with a total budget.
///
/// The budget is split across peers proportionally to their total dimension
/// using largest-remainder rounding with at least one index per peer; a
/// budget above the total peer size is clipped to the full sets (flagged).
pub fn draw_index_sets(
    c: &Collection,
    m: usize,
    total_budget: usize,
    seed: u64,
) -> Result<IndexSets, SubsampleError> {
    if m >= c.num_threads() {
        return Err(SubsampleError::ThreadOutOfRange(m));
    }
    let peers: Vec<usize> = (0..c.num_threads()).filter(|&n| n != m).collect();
    if peers.is_empty() {
        return Err(SubsampleError::NoPeers);
    }
    if total_budget < peers.len() {
        return Err(SubsampleError::BudgetTooSmall {
            budget: total_budget,
            peers: peers.len(),
        });
    }
    let sizes: Vec<usize> = peers.iter().map(|&n| c.thread(n).total_dim()).collect();
    let capacity: usize = sizes.iter().sum();
    let clipped = total_budget > capacity;
    let budget = total_budget.min(capacity);

    let counts = largest_remainder_split(budget, &sizes);

    let sets = peers
        .iter()
        .zip(&counts)
        .map(|(&n, &count)| {
            let p_n = c.thread(n).total_dim();
            let mut flats: Vec<usize> = if count == p_n {
                (0..p_n).collect()
            } else {
                let mut rng = ChaCha12Rng::seed_from_u64(crate::derive_seed(seed, n as u64));
                rand::seq::index::sample(&mut rng, p_n, count).into_vec()
            };
            flats.sort_unstable();
            (n, flats)
        })
        .collect();

    Ok(IndexSets {
        target_thread: m,
        seed,
        sets,
        clipped,
    })
}

/// Index sets covering every peer multi-index (the degenerate full draw).
pub fn full_index_sets(c: &Collection, m: usize) -> Result<IndexSets, SubsampleError> {
    let capacity: usize = (0..c.num_threads())
        .filter(|&n| n != m)
        .map(|n| c.thread(n).total_dim())
        .sum();
    draw_index_sets(c, m, capacity, 0)
}

/// Splits `budget` across bins proportionally to `sizes`, flooring quotas and
/// handing leftovers to the largest fractional remainders; every bin gets at
/// least 1 and at most its size. Requires bins.len() <= budget <= sum(sizes).
fn largest_remainder_split(budget: usize, sizes: &[usize]) -> Vec<usize> {
    let total: usize = sizes.iter().sum();
    let mut counts: Vec<usize> = Vec::with_capacity(sizes.len());
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(sizes.len());
    for (i, &s) in sizes.iter().enumerate() {
        let quota = budget as f64 * s as f64 / total as f64;
        let base = (quota.floor() as usize).clamp(1, s);
        counts.push(base);
        remainders.push((quota - quota.floor(), i));
    }
    // Distribute leftovers by largest remainder, ties to the lowest bin.
    let mut assigned: usize = counts.iter().sum();
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let mut cursor = 0;
    while assigned < budget {
        let (_, i) = remainders[cursor % remainders.len()];
        if counts[i] < sizes[i] {
            counts[i] += 1;
            assigned += 1;
        }
        cursor += 1;
    }
    // The min-1 floor can overshoot tiny budgets; trim from the smallest
    // remainders while respecting the floor.
    let mut cursor = remainders.len();
    while assigned > budget {
        cursor = if cursor == 0 {
            remainders.len() - 1
        } else {
            cursor - 1
        };
        let (_, i) = remainders[cursor];
        if counts[i] > 1 {
            counts[i] -= 1;
            assigned -= 1;
        }
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ThreadSeries;
    use crate::tensor::DenseTensor;

    fn collection(dims: &[&[usize]]) -> Collection {
        let threads = dims
            .iter()
            .map(|d| {
                let obs = vec![DenseTensor::zeros(d.to_vec()).unwrap(); 2];
                ThreadSeries::new(d.to_vec(), obs).unwrap()
            })
            .collect();
        Collection::new(threads).unwrap()
    }

    #[test]
    fn proportional_split_matches_hand_arithmetic() {
        // peers sized (30, 100), budget 50: quotas 11.54 and 38.46 -> (12, 38).
        assert_eq!(largest_remainder_split(50, &[30, 100]), vec![12, 38]);
        assert_eq!(largest_remainder_split(50, &[30, 30]), vec![25, 25]);
        assert_eq!(largest_remainder_split(2, &[1, 1000]), vec![1, 1]);
    }

    #[test]
    fn full_budget_selects_everything() {
        let c = collection(&[&[4], &[3], &[2, 3]]);
        let sets = draw_index_sets(&c, 0, 3 + 6, 7).unwrap();
        assert!(!sets.clipped);
        assert_eq!(sets.sets[0], (1, vec![0, 1, 2]));
        assert_eq!(sets.sets[1], (2, (0..6).collect::<Vec<_>>()));
    }

    #[test]
    fn oversized_budget_clips_with_notice() {
        let c = collection(&[&[4], &[3]]);
        let sets = draw_index_sets(&c, 0, 100, 7).unwrap();
        assert!(sets.clipped);
        assert_eq!(sets.total(), 3);
    }

    #[test]
    fn budget_below_peers_errors() {
        let c = collection(&[&[4], &[3], &[2]]);
        assert!(matches!(
            draw_index_sets(&c, 0, 1, 7),
            Err(SubsampleError::BudgetTooSmall { .. })
        ));
    }

    #[test]
    fn draws_are_seeded_distinct_and_sorted() {
        let c = collection(&[&[2], &[30], &[40]]);
        let a = draw_index_sets(&c, 0, 20, 7).unwrap();
        let b = draw_index_sets(&c, 0, 20, 7).unwrap();
        assert_eq!(a, b);
        let other = draw_index_sets(&c, 0, 20, 8).unwrap();
        assert_ne!(a, other);
        for (_, flats) in &a.sets {
            assert!(flats.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn multi_index_decoding() {
        let c = collection(&[&[2], &[2, 3]]);
        let sets = draw_index_sets(&c, 0, 6, 1).unwrap();
        let multis = sets.multi_indices(&c, 1);
        assert_eq!(multis.len(), 6);
        assert_eq!(multis[0], vec![0, 0]);
        assert_eq!(multis[3], vec![1, 1]);
    }
}
