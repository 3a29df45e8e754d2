use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream, PortableRng};

pub const DEFAULT_FOLDS: usize = 6;

/// Partition of test conditions into cross-validation folds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldAssignment {
    pub k: usize,
    pub seed: u64,
    pub mapping: BTreeMap<String, usize>,
}

impl FoldAssignment {
    pub fn fold_of(&self, condition_id: &str) -> Option<usize> {
        self.mapping.get(condition_id).copied()
    }

    /// Conditions of one fold, in sorted order.
    pub fn conditions_in(&self, fold: usize) -> Vec<&str> {
        self.mapping
            .iter()
            .filter(|(_, &f)| f == fold)
            .map(|(c, _)| c.as_str())
            .collect()
    }
}

/// Sorts and dedups the conditions, shuffles them with the portable
/// generator on the fold stream, then deals them round-robin.
pub fn assign_folds<'a, I>(conditions: I, k: usize, seed: u64) -> Result<FoldAssignment>
where
    I: IntoIterator<Item = &'a str>,
{
    if k < 2 {
        return Err(Error::Config(format!("fold count must be at least 2, got {k}")));
    }
    let sorted: BTreeSet<&str> = conditions.into_iter().collect();
    if sorted.len() < k {
        return Err(Error::Validation(format!(
            "{} conditions cannot fill {k} folds",
            sorted.len()
        )));
    }
    let mut order: Vec<&str> = sorted.into_iter().collect();
    PortableRng::new(seed, stream::FOLDS).shuffle(&mut order);
    let mapping = order
        .into_iter()
        .enumerate()
        .map(|(i, c)| (c.to_owned(), i % k))
        .collect();
    Ok(FoldAssignment { k, seed, mapping })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("vp{i:02}")).collect()
    }

    #[test]
    fn twelve_conditions_six_folds() {
        let c = names(12);
        let folds = assign_folds(c.iter().map(String::as_str), 6, 1).unwrap();
        for f in 0..6 {
            assert_eq!(folds.conditions_in(f).len(), 2);
        }
    }

    #[test]
    fn forced_bijection() {
        let c = names(6);
        let folds = assign_folds(c.iter().map(String::as_str), 6, 9).unwrap();
        let used: BTreeSet<usize> = folds.mapping.values().copied().collect();
        assert_eq!(used.len(), 6);
    }

    #[test]
    fn deterministic_bytes() {
        let c = names(12);
        let a = assign_folds(c.iter().map(String::as_str), 6, 3).unwrap();
        let b = assign_folds(c.iter().map(String::as_str), 6, 3).unwrap();
        assert_eq!(serde_json::to_vec(&a).unwrap(), serde_json::to_vec(&b).unwrap());
    }

    #[test]
    fn seeds_differ() {
        let c = names(12);
        let distinct: BTreeSet<_> = (0..10)
            .map(|s| assign_folds(c.iter().map(String::as_str), 6, s).unwrap().mapping)
            .collect();
        assert!(distinct.len() > 1);
    }

    #[test]
    fn too_few_conditions() {
        let c = names(3);
        assert!(assign_folds(c.iter().map(String::as_str), 6, 0).is_err());
        assert!(assign_folds(c.iter().map(String::as_str), 1, 0).is_err());
    }

    proptest! {
        #[test]
        fn balanced_and_order_free(n in 2usize..40, k in 2usize..8, seed in any::<u64>(), rot in 0usize..40) {
            prop_assume!(n >= k);
            let c = names(n);
            let folds = assign_folds(c.iter().map(String::as_str), k, seed).unwrap();
            let mut sizes = vec![0usize; k];
            for &f in folds.mapping.values() { sizes[f] += 1; }
            let (lo, hi) = (sizes.iter().min().unwrap(), sizes.iter().max().unwrap());
            prop_assert!(hi - lo <= 1);
            prop_assert_eq!(folds.mapping.len(), n);

            let mut permuted = c.clone();
            permuted.rotate_left(rot % n);
            permuted.reverse();
            let again = assign_folds(permuted.iter().map(String::as_str), k, seed).unwrap();
            prop_assert_eq!(again, folds);
        }
    }
}
