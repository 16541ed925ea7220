use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};
use crate::rng::{self, Purpose};

/// Seed-set draws attempted before giving up on class diversity.
pub const SEED_REDRAW_LIMIT: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    /// Initially labeled examples.
    pub seed_size: usize,
    pub test_size: usize,
    /// Cap on the unlabeled pool; `None` puts every remaining example in it.
    #[serde(default)]
    pub pool_size: Option<usize>,
    pub rng_seed: u64,
}

/// Id sets of a split, each sorted ascending and pairwise disjoint.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: Vec<usize>,
    pub pool: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles ids with `spec.rng_seed`, takes the test set first, then draws
/// the seed set from the rest, re-drawing until it spans two classes.
pub fn split(dataset: &Dataset, spec: &SplitSpec) -> Result<Split, DatasetError> {
    let available = dataset.len();
    let requested = spec.seed_size + spec.test_size + spec.pool_size.unwrap_or(0);
    if requested > available {
        return Err(DatasetError::InfeasibleSplit { requested, available });
    }
    if spec.seed_size < 2 {
        return Err(DatasetError::Invalid(format!(
            "seed set must hold at least 2 examples to span 2 classes, got {}",
            spec.seed_size
        )));
    }

    let mut rng = rng::stream(spec.rng_seed, Purpose::Split, 0);
    let mut ids: Vec<usize> = (0..available).collect();
    ids.shuffle(&mut rng);
    let mut test = ids.split_off(available - spec.test_size);
    let mut rest = ids;

    let label = |id: usize| dataset.examples()[id].true_label;
    let mut attempts = 0;
    loop {
        if attempts == SEED_REDRAW_LIMIT {
            return Err(DatasetError::SeedNotDiverse { attempts });
        }
        attempts += 1;
        rest.shuffle(&mut rng);
        let first = label(rest[0]);
        if rest[..spec.seed_size].iter().any(|&id| label(id) != first) {
            break;
        }
    }

    let mut pool = rest.split_off(spec.seed_size);
    let mut seed = rest;
    if let Some(cap) = spec.pool_size {
        pool.truncate(cap);
    }
    seed.sort_unstable();
    pool.sort_unstable();
    test.sort_unstable();
    Ok(Split { seed, pool, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_blobs, BlobSpec, Example};
    use proptest::prelude::*;
    use std::collections::HashSet;

    fn blobs(per_class: usize) -> Dataset {
        synth_blobs(&BlobSpec { classes: 2, dim: 2, per_class, spread: 0.2, seed: 1 }).unwrap()
    }

    #[test]
    fn sizes_and_disjointness() {
        let ds = blobs(50);
        let s = split(&ds, &SplitSpec { seed_size: 10, test_size: 20, pool_size: None, rng_seed: 3 }).unwrap();
        assert_eq!((s.seed.len(), s.pool.len(), s.test.len()), (10, 70, 20));
        let all: HashSet<usize> = s.seed.iter().chain(&s.pool).chain(&s.test).copied().collect();
        assert_eq!(all.len(), 100);
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let ds = blobs(50);
        let spec = SplitSpec { seed_size: 10, test_size: 20, pool_size: None, rng_seed: 3 };
        assert_eq!(split(&ds, &spec).unwrap(), split(&ds, &spec).unwrap());
        let other = split(&ds, &SplitSpec { rng_seed: 4, ..spec }).unwrap();
        assert_ne!(split(&ds, &spec).unwrap(), other);
    }

    #[test]
    fn oversized_split_is_infeasible() {
        let ds = blobs(50);
        let err = split(&ds, &SplitSpec { seed_size: 101, test_size: 0, pool_size: None, rng_seed: 0 });
        assert!(matches!(err, Err(DatasetError::InfeasibleSplit { requested: 101, available: 100 })));
    }

    #[test]
    fn pool_cap() {
        let ds = blobs(50);
        let s = split(&ds, &SplitSpec { seed_size: 4, test_size: 6, pool_size: Some(30), rng_seed: 0 }).unwrap();
        assert_eq!(s.pool.len(), 30);
    }

    #[test]
    fn single_class_majority_exhausts_redraws() {
        // one class-1 example among 1000: a 2-element seed set is diverse
        // with probability 0.002 per draw
        let examples: Vec<Example> =
            (0..1000).map(|id| Example { id, features: vec![0.5], true_label: usize::from(id == 999) }).collect();
        let ds = Dataset::new(examples, vec!["a".into(), "b".into()], None).unwrap();
        let mut saw_not_diverse = false;
        for rng_seed in 0..20 {
            match split(&ds, &SplitSpec { seed_size: 2, test_size: 0, pool_size: None, rng_seed }) {
                Err(DatasetError::SeedNotDiverse { attempts }) => {
                    assert_eq!(attempts, SEED_REDRAW_LIMIT);
                    saw_not_diverse = true;
                }
                Ok(s) => assert_ne!(ds.examples()[s.seed[0]].true_label, ds.examples()[s.seed[1]].true_label),
                Err(e) => panic!("unexpected {e}"),
            }
        }
        assert!(saw_not_diverse);
        let s = split(&ds, &SplitSpec { seed_size: 1000, test_size: 0, pool_size: None, rng_seed: 0 }).unwrap();
        assert!(s.pool.is_empty());
    }

    proptest! {
        #[test]
        fn parts_are_disjoint_with_requested_sizes(seed_size in 2usize..30, test_size in 0usize..30, rng_seed in any::<u64>()) {
            let ds = blobs(40);
            let s = split(&ds, &SplitSpec { seed_size, test_size, pool_size: None, rng_seed }).unwrap();
            prop_assert_eq!(s.seed.len(), seed_size);
            prop_assert_eq!(s.test.len(), test_size);
            prop_assert_eq!(s.pool.len(), 80 - seed_size - test_size);
            let all: HashSet<usize> = s.seed.iter().chain(&s.pool).chain(&s.test).copied().collect();
            prop_assert_eq!(all.len(), 80);
            let classes: HashSet<usize> = s.seed.iter().map(|&i| ds.examples()[i].true_label).collect();
            prop_assert!(classes.len() >= 2);
        }
    }
}
