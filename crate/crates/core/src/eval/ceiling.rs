use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::TrialTable;
use crate::error::{Error, Result};
use crate::eval::metrics::{pearson, spearman_brown};
use crate::exec::Execution;
use crate::rng::{stream, PortableRng};

pub const DEFAULT_REPEATS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseCeilingEstimate {
    pub mean_corrected_r: f64,
    pub repeats: usize,
    pub seed: u64,
    /// Corrected r of every repeat, in repeat order.
    pub per_repeat: Vec<f64>,
    /// Repeats whose half profiles had zero variance (counted as r = 0).
    pub zero_variance_repeats: usize,
}

/// `(subject index, correct, total)` for every subject that responded to
/// one condition.
type ConditionCounts = Vec<(usize, u32, u32)>;

/// Split-half reliability of condition-level accuracy.
///
/// Each repeat shuffles all subjects once. Within every condition, the
/// subjects that responded are taken in that shuffled order and the first
/// half (rounded up, so half A gets the odd subject) forms half A. When every
/// subject answers every condition this is a plain random split of the
/// subjects. The two halves' accuracy profiles are correlated across
/// conditions and Spearman-Brown corrected. Repeat `r` draws from the
/// portable generator seeded with `seed + r`, and the corrected values are
/// averaged in repeat order.
pub fn noise_ceiling(trials: &TrialTable, repeats: usize, seed: u64, execution: Execution) -> Result<NoiseCeilingEstimate> {
    if repeats == 0 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    let mut by_condition: BTreeMap<&str, BTreeMap<&str, (u32, u32)>> = BTreeMap::new();
    for t in trials.records() {
        let e = by_condition
            .entry(&t.condition_id)
            .or_default()
            .entry(&t.subject_id)
            .or_default();
        e.0 += u32::from(t.correct);
        e.1 += 1;
    }
    if by_condition.len() < 2 {
        return Err(Error::Validation(format!(
            "split-half correlation needs at least two conditions, found {}",
            by_condition.len()
        )));
    }
    let subject_index: BTreeMap<&str, usize> =
        trials.subjects().into_iter().enumerate().map(|(i, s)| (s, i)).collect();
    let mut conditions: Vec<ConditionCounts> = Vec::with_capacity(by_condition.len());
    for (c, subjects) in &by_condition {
        if subjects.len() < 2 {
            return Err(Error::Validation(format!(
                "condition '{c}' has responses from {} subject(s); at least 2 required",
                subjects.len()
            )));
        }
        conditions.push(subjects.iter().map(|(s, &(k, n))| (subject_index[s], k, n)).collect());
    }

    let n_subjects = subject_index.len();
    let results = execution.map_range(repeats, |r| split_half_once(&conditions, n_subjects, seed.wrapping_add(r as u64)));
    let mut per_repeat = Vec::with_capacity(repeats);
    let mut zero_variance_repeats = 0;
    for res in results {
        let (value, zero_variance) = res?;
        per_repeat.push(value);
        zero_variance_repeats += usize::from(zero_variance);
    }
    Ok(NoiseCeilingEstimate {
        mean_corrected_r: per_repeat.iter().sum::<f64>() / repeats as f64,
        repeats,
        seed,
        per_repeat,
        zero_variance_repeats,
    })
}

fn split_half_once(conditions: &[ConditionCounts], n_subjects: usize, seed: u64) -> Result<(f64, bool)> {
    let mut rng = PortableRng::new(seed, stream::SPLIT_HALF);
    let mut order: Vec<usize> = (0..n_subjects).collect();
    rng.shuffle(&mut order);
    let mut rank = vec![0; n_subjects];
    for (position, &subject) in order.iter().enumerate() {
        rank[subject] = position;
    }
    let mut half_a = Vec::with_capacity(conditions.len());
    let mut half_b = Vec::with_capacity(conditions.len());
    let mut responders = Vec::new();
    for subjects in conditions {
        responders.clear();
        responders.extend(subjects.iter().copied());
        responders.sort_unstable_by_key(|&(s, _, _)| rank[s]);
        let cut = responders.len().div_ceil(2);
        let accuracy = |half: &[(usize, u32, u32)]| {
            let (k, n) = half
                .iter()
                .fold((0u64, 0u64), |(k, n), &(_, c, t)| (k + u64::from(c), n + u64::from(t)));
            k as f64 / n as f64
        };
        half_a.push(accuracy(&responders[..cut]));
        half_b.push(accuracy(&responders[cut..]));
    }
    let c = pearson(&half_a, &half_b)?;
    Ok((spearman_brown(c.r)?.value, c.zero_variance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::TrialRecord;

    fn table(rows: &[(&str, &str, bool)]) -> TrialTable {
        TrialTable::new(
            rows.iter()
                .map(|(s, c, k)| TrialRecord {
                    subject_id: s.to_string(),
                    imprint_animation_id: "A0".into(),
                    condition_id: c.to_string(),
                    familiar_animation_id: "A1".into(),
                    novel_animation_id: "B1".into(),
                    correct: *k,
                })
                .collect(),
        )
    }

    #[test]
    fn single_subject_condition_rejected() {
        let t = table(&[("s1", "c1", true), ("s2", "c1", false), ("s1", "c2", true)]);
        let err = noise_ceiling(&t, 10, 0, Execution::Sequential).unwrap_err();
        assert!(err.to_string().contains("c2"), "{err}");
    }

    #[test]
    fn odd_subject_goes_to_half_a() {
        // s0..s4 answer (c1, c2, c3) with distinct patterns so every split
        // gives a different profile.
        let answers = [[1, 0, 1], [1, 1, 0], [0, 0, 1], [1, 1, 1], [0, 1, 0]];
        let mut rows = Vec::new();
        let names = ["s0", "s1", "s2", "s3", "s4"];
        for (s, pattern) in answers.iter().enumerate() {
            for (c, &k) in pattern.iter().enumerate() {
                rows.push((names[s], ["c1", "c2", "c3"][c], k == 1));
            }
        }
        let t = table(&rows);
        for seed in 0..10 {
            let mut order: Vec<usize> = (0..5).collect();
            PortableRng::new(seed, stream::SPLIT_HALF).shuffle(&mut order);
            let profile = |half: &[usize]| -> Vec<f64> {
                (0..3)
                    .map(|c| half.iter().map(|&s| answers[s][c] as f64).sum::<f64>() / half.len() as f64)
                    .collect()
            };
            let r = pearson(&profile(&order[..3]), &profile(&order[3..])).unwrap().r;
            let expected = spearman_brown(r).unwrap().value;
            let got = noise_ceiling(&t, 1, seed, Execution::Sequential).unwrap().mean_corrected_r;
            assert_eq!(got, expected, "seed {seed}");
        }
    }

    #[test]
    fn identical_halves_give_one() {
        // Every subject answers each condition the same way, so any split
        // produces identical profiles.
        let mut rows = Vec::new();
        let subjects: Vec<String> = (0..6).map(|i| format!("s{i}")).collect();
        for s in &subjects {
            rows.push((s.as_str(), "c1", true));
            rows.push((s.as_str(), "c2", false));
            rows.push((s.as_str(), "c3", true));
            rows.push((s.as_str(), "c3", false));
        }
        let est = noise_ceiling(&table(&rows), 20, 5, Execution::Sequential).unwrap();
        assert_eq!(est.mean_corrected_r, 1.0);
    }

    #[test]
    fn deterministic_and_mode_independent() {
        let mut rows = Vec::new();
        let subjects: Vec<String> = (0..9).map(|i| format!("s{i}")).collect();
        for (i, s) in subjects.iter().enumerate() {
            for c in 0..4 {
                rows.push((s.as_str(), ["a", "b", "c", "d"][c], (i * 3 + c * 5) % 4 != 0));
            }
        }
        let t = table(&rows);
        let a = noise_ceiling(&t, 25, 11, Execution::Sequential).unwrap();
        let b = noise_ceiling(&t, 25, 11, Execution::Sequential).unwrap();
        let c = noise_ceiling(&t, 25, 11, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        let one = noise_ceiling(&t, 1, 11, Execution::Sequential).unwrap();
        assert_eq!(one.mean_corrected_r, a.per_repeat[0]);
    }
}
